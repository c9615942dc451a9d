#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "orthoe/errors.hpp"
#include "orthoe/manifold.hpp"
#include "support.hpp"

using namespace orthoe;
using namespace orthoe::testing;

namespace {

DenseMatrix random_symmetric(std::size_t d, Rng& rng) {
  const DenseMatrix a = random_matrix(d, d, rng);
  return 0.5 * (a + naive_transpose(a));
}

// ⟨W, gram_schmidt(A)⟩ differentiated by central differences.
DenseMatrix fd_gram_schmidt_grad(const DenseMatrix& a, const DenseMatrix& w, double h) {
  auto f = [&](const DenseMatrix& x) {
    const DenseMatrix q = gram_schmidt(x);
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) s += w.values()[i] * q.values()[i];
    return s;
  };
  DenseMatrix g(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    DenseMatrix p = a, m = a;
    p.values()[i] += h;
    m.values()[i] -= h;
    g.values()[i] = (f(p) - f(m)) / (2 * h);
  }
  return g;
}

double rel_err(const DenseMatrix& got, const DenseMatrix& want) {
  return max_abs_diff(got, want) / std::max(1.0, naive_frobenius(want));
}

}  // namespace

TEST(TangentProject, AtIdentityIsSkewPart) {
  Rng rng(1);
  const DenseMatrix y = random_matrix(4, 4, rng);
  const TangentVector t = tangent_project(DenseMatrix::identity(4), y);
  EXPECT_LE(max_abs_diff(t.dir, 0.5 * (y - naive_transpose(y))), 1e-15);
  EXPECT_EQ(t.at, DenseMatrix::identity(4));
}

TEST(TangentProject, SymmetricNormalComponentVanishes) {
  Rng rng(2);
  const DenseMatrix x = random_orthogonal(3, rng, 1.0);
  const DenseMatrix y = naive_matmul(x, random_symmetric(3, rng));
  EXPECT_LE(naive_frobenius(tangent_project(x, y).dir), 1e-14);
}

TEST(TangentProject, ResultSatisfiesDefiningIdentity) {
  Rng rng(3);
  const DenseMatrix x = random_orthogonal(5, rng, 1.0);
  const DenseMatrix y = random_matrix(5, 5, rng);
  const DenseMatrix xi = tangent_project(x, y).dir;
  const DenseMatrix s = naive_matmul(xi, naive_transpose(x)) + naive_matmul(x, naive_transpose(xi));
  EXPECT_LE(naive_frobenius(s), 1e-10);
}

TEST(TangentProject, Errors) {
  EXPECT_THROW(tangent_project(DenseMatrix::identity(2), DenseMatrix(3, 3)), ShapeError);
  EXPECT_THROW(tangent_project(DenseMatrix::from_rows({{1, 0}, {0, 2}}), DenseMatrix(2, 2)),
               PreconditionError);
}

TEST(TangentProjectProperty, TangentAndIdempotent) {
  Rng rng(4);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t d = dim(rng);
    const DenseMatrix x = haar_orthogonal(d, rng);
    const DenseMatrix y = random_matrix(d, d, rng, -5.0, 5.0);
    const DenseMatrix xi = tangent_project(x, y).dir;
    EXPECT_LE(tangent_residual(x, xi), 1e-10);
    EXPECT_LE(max_abs_diff(tangent_project(x, xi).dir, xi), 1e-10);
  }
}

TEST(ExpMap, ZeroDirectionReturnsBasePoint) {
  Rng rng(5);
  const DenseMatrix x = random_orthogonal(4, rng, 1.0);
  EXPECT_LE(max_abs_diff(exp_map(x, {x, DenseMatrix(4, 4)}), x), 1e-15);
}

TEST(ExpMap, QuarterTurnFromIdentity) {
  const double h = std::numbers::pi / 2;
  const auto xi = DenseMatrix::from_rows({{0, -h}, {h, 0}});
  const DenseMatrix got = exp_map(DenseMatrix::identity(2), {DenseMatrix::identity(2), xi});
  EXPECT_LE(max_abs_diff(got, DenseMatrix::from_rows({{0, -1}, {1, 0}})), 1e-12);
}

TEST(ExpMap, StaysOnManifold) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const DenseMatrix x = haar_orthogonal(6, rng);
    DenseMatrix xi = tangent_project(x, random_matrix(6, 6, rng)).dir;
    const double nrm = naive_frobenius(xi);
    if (nrm > 0) xi *= std::uniform_real_distribution<double>(0.0, 10.0)(rng) / nrm;
    EXPECT_LT(naive_orth_residual(exp_map(x, {x, xi})), 1e-9);
  }
}

TEST(ExpMap, RejectsNonTangentDirection) {
  const DenseMatrix x = DenseMatrix::identity(2);
  EXPECT_THROW(exp_map(x, {x, DenseMatrix::identity(2)}), PreconditionError);
}

TEST(ExpMap, RejectsTangentBasedElsewhere) {
  const DenseMatrix x = DenseMatrix::identity(2);
  EXPECT_THROW(exp_map(x, {rotation2(0.2), DenseMatrix(2, 2)}), PreconditionError);
}

TEST(RetractionStep, ZeroGradientIsFixedPoint) {
  Rng rng(7);
  const DenseMatrix x = random_orthogonal(3, rng, 1.0);
  EXPECT_LE(max_abs_diff(retraction_step(x, DenseMatrix(3, 3), 0.1), x), 1e-15);
}

TEST(RetractionStep, NormalGradientIsFixedPoint) {
  Rng rng(8);
  const DenseMatrix x = random_orthogonal(3, rng, 1.0);
  const DenseMatrix g = naive_matmul(x, random_symmetric(3, rng));
  EXPECT_LE(max_abs_diff(retraction_step(x, g, 0.1), x), 1e-13);
}

TEST(RetractionStep, RejectsNonPositiveStep) {
  EXPECT_THROW(retraction_step(DenseMatrix::identity(2), DenseMatrix(2, 2), 0.0),
               PreconditionError);
}

TEST(RetractionStep, GeodesicDescentOnDistanceToTarget) {
  Rng rng(9);
  const DenseMatrix target = random_orthogonal(4, rng, 0.5);
  auto f = [&](const DenseMatrix& x) {
    const double n = naive_frobenius(x - target);
    return n * n;
  };
  DenseMatrix x = DenseMatrix::identity(4);
  const double f0 = f(x);
  for (int step = 0; step < 500; ++step) x = retraction_step(x, 2.0 * (x - target), 0.1);
  EXPECT_LE(f(x), 0.01 * f0);
}

TEST(RetractionStepProperty, LongRunStaysOrthogonalWithStabilization) {
  Rng rng(10);
  for (std::size_t d : {2, 3, 5}) {
    auto r = BlockDiagOrthogonal::from_blocks({random_orthogonal(d, rng, 1.0)});
    for (int step = 1; step <= 10000; ++step) {
      r.block(0) = retraction_step(r.block(0), random_matrix(d, d, rng), 0.01);
      if (step % 1000 == 0) r.stabilize();
    }
    EXPECT_LE(naive_orth_residual(r.block(0)), 1e-6);
  }
}

TEST(RandomOrthogonal, OneDimensionalIsOne) {
  Rng rng(11);
  EXPECT_EQ(random_orthogonal(1, rng), DenseMatrix::from_rows({{1}}));
}

TEST(RandomOrthogonal, OrthogonalWithUnitDeterminant) {
  Rng rng(12);
  for (std::size_t d = 1; d <= 10; ++d) {
    for (double sd : {0.1, 1.0, 3.0}) {
      const DenseMatrix q = random_orthogonal(d, rng, sd);
      EXPECT_LT(naive_orth_residual(q), 1e-10);
      EXPECT_NEAR(determinant(q), 1.0, 1e-8);
    }
  }
}

TEST(RandomOrthogonal, DeterministicUnderSeed) {
  EXPECT_EQ(random_orthogonal(5, std::uint64_t{42}), random_orthogonal(5, std::uint64_t{42}));
  EXPECT_NE(random_orthogonal(5, std::uint64_t{42}), random_orthogonal(5, std::uint64_t{43}));
}

TEST(RandomOrthogonal, DefaultIsNearIdentity) {
  Rng rng(13);
  const DenseMatrix q = random_orthogonal(4, rng);
  EXPECT_LT(max_abs_diff(q, DenseMatrix::identity(4)), 0.6);
}

TEST(GramSchmidt, OrthonormalInputUnchanged) {
  Rng rng(14);
  const DenseMatrix q = haar_orthogonal(4, rng);
  EXPECT_LE(max_abs_diff(gram_schmidt(q), q), 1e-12);
}

TEST(GramSchmidt, HandComputedTwoByTwo) {
  EXPECT_LE(max_abs_diff(gram_schmidt(DenseMatrix::from_rows({{1, 1}, {0, 1}})),
                         DenseMatrix::identity(2)),
            1e-15);
}

TEST(GramSchmidt, RandomFiveByFivePrefixSpans) {
  Rng rng(15);
  const DenseMatrix a = random_matrix(5, 5, rng);
  const DenseMatrix q = gram_schmidt(a);
  EXPECT_LE(max_abs_diff(naive_matmul(naive_transpose(q), q), DenseMatrix::identity(5)), 1e-10);
  // Column j of A lies in span(q_0..q_j): its least-squares residual against
  // that orthonormal prefix is zero.
  for (std::size_t j = 0; j < 5; ++j) {
    std::vector<double> r(5);
    for (std::size_t i = 0; i < 5; ++i) r[i] = a(i, j);
    for (std::size_t k = 0; k <= j; ++k) {
      double c = 0.0;
      for (std::size_t i = 0; i < 5; ++i) c += q(i, k) * a(i, j);
      for (std::size_t i = 0; i < 5; ++i) r[i] -= c * q(i, k);
    }
    double nrm = 0.0;
    for (double x : r) nrm += x * x;
    EXPECT_LE(std::sqrt(nrm), 1e-12) << "column " << j;
  }
}

TEST(GramSchmidt, RankDeficientNamesColumn) {
  const auto a = DenseMatrix::from_rows({{1, 2, 0}, {1, 2, 1}, {0, 0, 1}});
  try {
    gram_schmidt(a);
    FAIL() << "expected DegeneracyError";
  } catch (const DegeneracyError& e) {
    EXPECT_EQ(e.column(), 1u);
  }
}

TEST(GramSchmidtProperty, Idempotent) {
  Rng rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + trial % 7;
    const DenseMatrix q = gram_schmidt(random_matrix(d, d, rng));
    EXPECT_LE(max_abs_diff(gram_schmidt(q), q), 1e-10);
  }
}

TEST(GramSchmidtBackward, ZeroUpstreamGivesZero) {
  Rng rng(17);
  const DenseMatrix a = random_matrix(3, 3, rng);
  EXPECT_EQ(gram_schmidt_backward(a, DenseMatrix(3, 3)), DenseMatrix(3, 3));
}

TEST(GramSchmidtBackward, SquaredNormLossAtOrthonormalInput) {
  // L = ‖Q‖²_F, so ∂L/∂Q = 2Q.
  Rng rng(18);
  const DenseMatrix a = haar_orthogonal(3, rng);
  const DenseMatrix q = gram_schmidt(a);
  const DenseMatrix w = 2.0 * q;
  auto loss = [](const DenseMatrix& x) {
    const double n = naive_frobenius(gram_schmidt(x));
    return n * n;
  };
  DenseMatrix fd(3, 3);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 9; ++i) {
    DenseMatrix p = a, m = a;
    p.values()[i] += h;
    m.values()[i] -= h;
    fd.values()[i] = (loss(p) - loss(m)) / (2 * h);
  }
  EXPECT_LE(rel_err(gram_schmidt_backward(a, w), fd), 1e-5);
}

TEST(GramSchmidtBackward, MatchesFiniteDifferences) {
  Rng rng(19);
  for (std::size_t d : {2, 3, 4, 6}) {
    for (int trial = 0; trial < 10; ++trial) {
      DenseMatrix a = random_matrix(d, d, rng);
      for (std::size_t i = 0; i < d; ++i) a(i, i) += 1.5;
      const DenseMatrix w = random_matrix(d, d, rng);
      EXPECT_LE(rel_err(gram_schmidt_backward(a, w), fd_gram_schmidt_grad(a, w, 1e-6)), 1e-4)
          << "d=" << d;
    }
  }
}

TEST(GramSchmidtBackward, RejectsShapeMismatch) {
  EXPECT_THROW(gram_schmidt_backward(DenseMatrix::identity(2), DenseMatrix(3, 3)), ShapeError);
}
