#include "orthoe/manifold.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "orthoe/errors.hpp"

namespace orthoe {

namespace {

constexpr double kOrthoTolerance = 1e-6;
constexpr double kTangentTolerance = 1e-6;
constexpr double kDegenerateNorm = 1e-10;

void require_orthogonal(const DenseMatrix& x, const char* op) {
  if (!x.is_square()) throw ShapeError(std::string(op) + ": base point is not square");
  const double res = orthogonality_residual(x);
  if (!(res <= kOrthoTolerance)) {
    throw PreconditionError(std::string(op) + ": base point is not orthogonal (residual " +
                            std::to_string(res) + ")");
  }
}

std::vector<double> column(const DenseMatrix& a, std::size_t j) {
  std::vector<double> c(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) c[i] = a(i, j);
  return c;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Per-column record of the MGS forward pass: the working vector before each
// projection and the final norm.
struct MgsTrace {
  DenseMatrix q;
  std::vector<std::vector<std::vector<double>>> partials;  // [j][i] = v before projecting on q_i
  std::vector<double> norms;
};

MgsTrace mgs_forward(const DenseMatrix& a, bool keep_partials) {
  if (!a.is_square()) {
    throw ShapeError("gram_schmidt: expected a square matrix, got " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  const std::size_t d = a.rows();
  MgsTrace t{DenseMatrix(d, d), {}, std::vector<double>(d)};
  if (keep_partials) t.partials.resize(d);
  std::vector<std::vector<double>> q_cols;
  q_cols.reserve(d);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> v = column(a, j);
    for (std::size_t i = 0; i < j; ++i) {
      if (keep_partials) t.partials[j].push_back(v);
      const double r = dot(q_cols[i], v);
      for (std::size_t k = 0; k < d; ++k) v[k] -= r * q_cols[i][k];
    }
    const double norm = std::sqrt(dot(v, v));
    if (!(norm > kDegenerateNorm)) {
      throw DegeneracyError("gram_schmidt: column " + std::to_string(j) +
                                " is numerically dependent on the preceding columns",
                            j);
    }
    for (double& x : v) x /= norm;
    for (std::size_t k = 0; k < d; ++k) t.q(k, j) = v[k];
    t.norms[j] = norm;
    q_cols.push_back(std::move(v));
  }
  return t;
}

}  // namespace

double tangent_residual(const DenseMatrix& x, const DenseMatrix& xi) {
  DenseMatrix sym = matmul_nt(xi, x);
  sym += transpose(sym);
  return frobenius_norm(sym);
}

TangentVector tangent_project(const DenseMatrix& x, const DenseMatrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw ShapeError("tangent_project: base point and ambient vector differ in shape");
  }
  require_orthogonal(x, "tangent_project");
  const DenseMatrix xty = matmul_tn(x, y);
  DenseMatrix dir = matmul(x, skew_part(xty));
  return {x, std::move(dir)};
}

DenseMatrix exp_map(const DenseMatrix& x, const TangentVector& xi) {
  if (xi.at != x) throw PreconditionError("exp_map: tangent vector is based at another point");
  if (xi.dir.rows() != x.rows() || xi.dir.cols() != x.cols()) {
    throw ShapeError("exp_map: direction differs in shape from base point");
  }
  const double res = tangent_residual(x, xi.dir);
  if (!(res <= kTangentTolerance)) {
    throw PreconditionError("exp_map: direction is not tangent (residual " +
                            std::to_string(res) + ")");
  }
  return matmul(x, expm(skew_part(matmul_tn(x, xi.dir))));
}

DenseMatrix retraction_step(const DenseMatrix& x, const DenseMatrix& euclid_grad, double eta) {
  if (!(eta > 0.0)) throw PreconditionError("retraction_step: step size must be positive");
  TangentVector g = tangent_project(x, euclid_grad);
  g.dir *= -eta;
  return exp_map(x, g);
}

DenseMatrix random_orthogonal(std::size_t d, Rng& rng, double stddev) {
  if (d == 0) throw ShapeError("random_orthogonal: dimension must be at least 1");
  std::normal_distribution<double> normal(0.0, stddev);
  DenseMatrix skew(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = normal(rng);
      skew(i, j) = v;
      skew(j, i) = -v;
    }
  }
  return expm(skew);
}

DenseMatrix random_orthogonal(std::size_t d, std::uint64_t seed, double stddev) {
  Rng rng(seed);
  return random_orthogonal(d, rng, stddev);
}

DenseMatrix gram_schmidt(const DenseMatrix& a) { return mgs_forward(a, false).q; }

DenseMatrix gram_schmidt_backward(const DenseMatrix& a, const DenseMatrix& d_q) {
  if (d_q.rows() != a.rows() || d_q.cols() != a.cols()) {
    throw ShapeError("gram_schmidt_backward: gradient differs in shape from input");
  }
  const MgsTrace t = mgs_forward(a, true);
  const std::size_t d = a.rows();

  std::vector<std::vector<double>> q(d), dq(d);
  for (std::size_t j = 0; j < d; ++j) {
    q[j] = column(t.q, j);
    dq[j] = column(d_q, j);
  }

  DenseMatrix d_a(d, d);
  for (std::size_t j = d; j-- > 0;) {
    // q_j = v / ‖v‖
    const double proj = dot(q[j], dq[j]);
    std::vector<double> dv(d);
    for (std::size_t k = 0; k < d; ++k) dv[k] = (dq[j][k] - q[j][k] * proj) / t.norms[j];

    // v_{i+1} = v_i − (q_iᵀv_i) q_i, unwound from the last projection.
    for (std::size_t i = j; i-- > 0;) {
      const std::vector<double>& v_i = t.partials[j][i];
      const double coeff = dot(q[i], v_i);
      const double back = dot(q[i], dv);
      for (std::size_t k = 0; k < d; ++k) {
        dq[i][k] -= coeff * dv[k] + back * v_i[k];
        dv[k] -= back * q[i][k];
      }
    }
    for (std::size_t k = 0; k < d; ++k) d_a(k, j) = dv[k];
  }
  return d_a;
}

}  // namespace orthoe
