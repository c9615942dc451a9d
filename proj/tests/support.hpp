#pragma once

// Generators and independent reference implementations shared by the tests.
// Nothing here calls the library routine it is used to check.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "orthoe/kg_data.hpp"
#include "orthoe/model.hpp"
#include "orthoe/tensor.hpp"

namespace orthoe::testing {

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                                 double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  DenseMatrix a(rows, cols);
  for (double& x : a.values()) x = u(rng);
  return a;
}

inline DenseMatrix random_skew(std::size_t d, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  DenseMatrix a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      a(i, j) = g(rng);
      a(j, i) = -a(i, j);
    }
  return a;
}

inline DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline DenseMatrix naive_transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// Σ_{k<terms} a^k / k!
inline DenseMatrix taylor_expm(const DenseMatrix& a, int terms = 30) {
  const std::size_t n = a.rows();
  DenseMatrix sum(n, n), term(n, n);
  for (std::size_t i = 0; i < n; ++i) sum(i, i) = term(i, i) = 1.0;
  for (int k = 1; k < terms; ++k) {
    term = naive_matmul(term, a);
    for (double& x : term.values()) x /= k;
    for (std::size_t i = 0; i < sum.size(); ++i) sum.values()[i] += term.values()[i];
  }
  return sum;
}

/// Taylor with scaling and squaring, for arguments too large for a plain series.
inline DenseMatrix taylor_expm_scaled(const DenseMatrix& a) {
  double norm = 0.0;
  for (double x : a.values()) norm += x * x;
  int s = 0;
  while (std::sqrt(norm) / std::ldexp(1.0, s) > 0.5) ++s;
  DenseMatrix scaled = a;
  for (double& x : scaled.values()) x = std::ldexp(x, -s);
  DenseMatrix e = taylor_expm(scaled, 30);
  for (int i = 0; i < s; ++i) e = naive_matmul(e, e);
  return e;
}

inline DenseMatrix dense_assembly(const BlockDiagOrthogonal& r) {
  const std::size_t n = r.dim(), d = r.block_dim();
  DenseMatrix out(n, n);
  for (std::size_t b = 0; b < r.num_blocks(); ++b)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) out(b * d + i, b * d + j) = r.block(b)(i, j);
  return out;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

inline double naive_frobenius(const DenseMatrix& a) {
  double s = 0.0;
  for (double x : a.values()) s += x * x;
  return std::sqrt(s);
}

inline double naive_orth_residual(const DenseMatrix& x) {
  DenseMatrix p = naive_matmul(x, naive_transpose(x));
  for (std::size_t i = 0; i < p.rows(); ++i) p(i, i) -= 1.0;
  return naive_frobenius(p);
}

inline DenseMatrix rotation2(double theta) {
  return DenseMatrix::from_rows({{std::cos(theta), -std::sin(theta)},
                                 {std::sin(theta), std::cos(theta)}});
}

/// Haar-distributed orthogonal matrix: Q factor of a Gaussian matrix with
/// the sign fix, via classical Gram-Schmidt written out here.
inline DenseMatrix haar_orthogonal(std::size_t d, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  DenseMatrix a(d, d);
  for (double& x : a.values()) x = g(rng);
  DenseMatrix q(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = a(i, j);
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += q(i, k) * a(i, j);
      for (std::size_t i = 0; i < d; ++i) v[i] -= dot * q(i, k);
    }
    double nrm = 0.0;
    for (double x : v) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (std::size_t i = 0; i < d; ++i) q(i, j) = v[i] / nrm;
  }
  return q;
}

inline BlockDiagOrthogonal random_relation(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<DenseMatrix> blocks;
  for (std::size_t b = 0; b < n / d; ++b) blocks.push_back(haar_orthogonal(d, rng));
  return BlockDiagOrthogonal::from_blocks(std::move(blocks));
}

inline ModelParams random_model(std::size_t num_entities, std::size_t num_relations,
                                std::size_t n, std::size_t m, std::size_t d, Rng& rng) {
  ModelParams p{EntityTable(num_entities, n, m), RelationTable(num_relations, n, d)};
  std::normal_distribution<double> g(0.0, 1.0);
  for (double& x : p.entities.values()) x = g(rng);
  for (double& b : p.entities.biases()) b = 0.3 * g(rng);
  for (RelationId r = 0; r < num_relations; ++r) p.relations[r] = random_relation(n, d, rng);
  return p;
}

/// Random KG with no duplicate triples, split into train/valid/test.
inline Dataset random_kg(std::size_t num_entities, std::size_t num_relations,
                         std::size_t num_triples, Rng& rng) {
  std::vector<std::string> ents, rels;
  for (std::size_t i = 0; i < num_entities; ++i) ents.push_back("e" + std::to_string(i));
  for (std::size_t i = 0; i < num_relations; ++i) rels.push_back("r" + std::to_string(i));
  Dataset ds;
  ds.name = "random";
  ds.vocab = Vocabulary(ents, rels);
  std::uniform_int_distribution<EntityId> pick_e(0, static_cast<EntityId>(num_entities - 1));
  std::uniform_int_distribution<RelationId> pick_r(0,
                                                   static_cast<RelationId>(num_relations - 1));
  std::vector<Triple> all;
  while (all.size() < num_triples) {
    Triple t{pick_e(rng), pick_r(rng), pick_e(rng)};
    if (std::find(all.begin(), all.end(), t) == all.end()) all.push_back(t);
  }
  const std::size_t n_train = num_triples * 8 / 10;
  const std::size_t n_valid = num_triples / 10;
  ds.train = {Split::kTrain, {all.begin(), all.begin() + n_train}};
  ds.valid = {Split::kValid, {all.begin() + n_train, all.begin() + n_train + n_valid}};
  ds.test = {Split::kTest, {all.begin() + n_train + n_valid, all.end()}};
  return ds;
}

/// Brute-force filtered mid-tie rank straight from the triple lists.
inline double brute_force_rank(const std::vector<double>& scores, const Triple& q,
                               const std::vector<const TripleSet*>& known) {
  auto is_known = [&](EntityId e) {
    for (const TripleSet* s : known)
      for (const Triple& t : s->triples)
        if (t.head == q.head && t.relation == q.relation && t.tail == e) return true;
    return false;
  };
  double rank = 1.0;
  for (EntityId e = 0; e < scores.size(); ++e) {
    if (e == q.tail || is_known(e)) continue;
    if (scores[e] > scores[q.tail]) rank += 1.0;
    else if (scores[e] == scores[q.tail]) rank += 0.5;
  }
  return rank;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("orthoe_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes `ds` as train/valid/test TSVs under `dir`.
inline void write_dataset_tsv(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto dump = [&](const TripleSet& s, const char* file) {
    std::string text;
    for (const Triple& t : s.triples) {
      text += ds.vocab.entity_name(t.head) + "\t" + ds.vocab.relation_name(t.relation) + "\t" +
              ds.vocab.entity_name(t.tail) + "\n";
    }
    write_text(dir / file, text);
  };
  dump(ds.train, "train.txt");
  dump(ds.valid, "valid.txt");
  dump(ds.test, "test.txt");
}

}  // namespace orthoe::testing
