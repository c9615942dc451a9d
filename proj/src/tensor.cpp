#include "orthoe/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "orthoe/errors.hpp"

namespace orthoe {

namespace {

std::string shape_str(const DenseMatrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                     shape_str(b));
  }
}

void require_finite(const DenseMatrix& a, const char* op) {
  if (!a.all_finite()) throw NumericError(std::string(op) + ": non-finite result");
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw ShapeError("DenseMatrix: " + std::to_string(values_.size()) +
                     " values for a " + std::to_string(rows) + "x" +
                     std::to_string(cols) + " matrix");
  }
}

DenseMatrix DenseMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("DenseMatrix::from_rows: ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(values));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) noexcept {
  for (double& v : values_) v *= s;
  return *this;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }
DenseMatrix operator-(DenseMatrix a) { return a *= -1.0; }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a) + " * " + shape_str(b));
  }
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  require_finite(out, "matmul");
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + shape_str(a) + "^T * " + shape_str(b));
  }
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto a_row = a.row(k);
    auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += a_row[i] * b_row[j];
    }
  }
  require_finite(out, "matmul_tn");
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_str(a) + " * " + shape_str(b) + "^T");
  }
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto a_row = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto b_row = b.row(j);
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sum += a_row[k] * b_row[k];
      out(i, j) = sum;
    }
  }
  require_finite(out, "matmul_nt");
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "hadamard");
  DenseMatrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return out;
}

double frobenius_norm(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

double frobenius_norm(const DenseMatrix& a) { return frobenius_norm(a.values()); }

double one_norm(const DenseMatrix& a) {
  double best = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) col += std::abs(a(i, j));
    best = std::max(best, col);
  }
  return best;
}

double orthogonality_residual(const DenseMatrix& a) {
  if (!a.is_square()) throw ShapeError("orthogonality_residual: " + shape_str(a));
  const std::size_t n = a.rows();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto ri = a.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      auto rj = a.row(j);
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += ri[k] * rj[k];
      const double diff = dot - (i == j ? 1.0 : 0.0);
      sum += diff * diff;
    }
  }
  return std::sqrt(sum);
}

DenseMatrix skew_part(const DenseMatrix& a) {
  if (!a.is_square()) throw ShapeError("skew_part: " + shape_str(a));
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = 0.5 * (a(i, j) - a(j, i));
  return out;
}

namespace {

struct LuFactors {
  DenseMatrix lu;
  std::vector<std::size_t> perm;
  int sign = 1;
  bool singular = false;
};

LuFactors lu_decompose(DenseMatrix a) {
  const std::size_t n = a.rows();
  LuFactors f{std::move(a), std::vector<std::size_t>(n), 1, false};
  for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
  DenseMatrix& m = f.lu;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(m(i, k)) > std::abs(m(pivot, k))) pivot = i;
    if (m(pivot, k) == 0.0) {
      f.singular = true;
      continue;
    }
    if (pivot != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(pivot, j));
      std::swap(f.perm[k], f.perm[pivot]);
      f.sign = -f.sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double factor = m(i, k) / m(k, k);
      m(i, k) = factor;
      for (std::size_t j = k + 1; j < n; ++j) m(i, j) -= factor * m(k, j);
    }
  }
  return f;
}

}  // namespace

double determinant(const DenseMatrix& a) {
  if (!a.is_square()) throw ShapeError("determinant: " + shape_str(a));
  const LuFactors f = lu_decompose(a);
  if (f.singular) return 0.0;
  double det = f.sign;
  for (std::size_t i = 0; i < a.rows(); ++i) det *= f.lu(i, i);
  return det;
}

DenseMatrix solve(DenseMatrix a, DenseMatrix b) {
  if (!a.is_square() || a.rows() != b.rows()) {
    throw ShapeError("solve: " + shape_str(a) + " \\ " + shape_str(b));
  }
  const std::size_t n = a.rows();
  const LuFactors f = lu_decompose(std::move(a));
  if (f.singular) throw NumericError("solve: singular matrix");
  DenseMatrix x(n, b.cols());
  for (std::size_t i = 0; i < n; ++i) {
    auto src = b.row(f.perm[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= f.lu(i, k) * x(k, c);
      x(i, c) = s;
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = x(i, c);
      for (std::size_t k = i + 1; k < n; ++k) s -= f.lu(i, k) * x(k, c);
      x(i, c) = s / f.lu(i, i);
    }
  }
  require_finite(x, "solve");
  return x;
}

DenseMatrix expm(const DenseMatrix& a) {
  if (!a.is_square()) throw ShapeError("expm: non-square input " + shape_str(a));
  if (!a.all_finite()) throw NumericError("expm: non-finite input");
  const std::size_t n = a.rows();
  if (n == 0) return a;

  // Higham (2005) degree-13 coefficients and scaling threshold.
  static constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  constexpr double kTheta13 = 5.371920351148152;
  constexpr int kMaxSquarings = 64;

  const double norm = one_norm(a);
  int squarings = 0;
  if (norm > kTheta13) squarings = static_cast<int>(std::ceil(std::log2(norm / kTheta13)));
  if (squarings > kMaxSquarings) {
    throw NumericError("expm: squaring budget exceeded (norm " + std::to_string(norm) + ")");
  }

  const DenseMatrix scaled = std::ldexp(1.0, -squarings) * a;
  const DenseMatrix eye = DenseMatrix::identity(n);
  const DenseMatrix a2 = matmul(scaled, scaled);
  const DenseMatrix a4 = matmul(a2, a2);
  const DenseMatrix a6 = matmul(a4, a2);

  DenseMatrix u_inner = matmul(a6, b[13] * a6 + b[11] * a4 + b[9] * a2);
  u_inner += b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye;
  const DenseMatrix u = matmul(scaled, u_inner);
  DenseMatrix v = matmul(a6, b[12] * a6 + b[10] * a4 + b[8] * a2);
  v += b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye;

  DenseMatrix result = solve(v - u, v + u);
  for (int i = 0; i < squarings; ++i) result = matmul(result, result);
  require_finite(result, "expm");
  return result;
}

DenseMatrix qr_orthogonal_factor(const DenseMatrix& a) {
  if (a.rows() < a.cols()) throw ShapeError("qr_orthogonal_factor: wide input " + shape_str(a));
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  DenseMatrix r = a;
  std::vector<std::vector<double>> reflectors(n);

  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> v(m - k);
    for (std::size_t i = k; i < m; ++i) v[i - k] = r(i, k);
    const double x_norm = frobenius_norm(v);
    auto& refl = reflectors[k];
    if (x_norm == 0.0) continue;
    const double alpha = v[0] > 0 ? -x_norm : x_norm;
    v[0] -= alpha;
    const double v_norm = frobenius_norm(v);
    if (v_norm == 0.0) continue;
    for (double& x : v) x /= v_norm;
    for (std::size_t j = k; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < m; ++i) dot += v[i - k] * r(i, j);
      for (std::size_t i = k; i < m; ++i) r(i, j) -= 2.0 * v[i - k] * dot;
    }
    refl = std::move(v);
  }

  DenseMatrix q(m, n);
  for (std::size_t i = 0; i < n; ++i) q(i, i) = 1.0;
  for (std::size_t k = n; k-- > 0;) {
    const auto& v = reflectors[k];
    if (v.empty()) continue;
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < m; ++i) dot += v[i - k] * q(i, j);
      for (std::size_t i = k; i < m; ++i) q(i, j) -= 2.0 * v[i - k] * dot;
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (r(j, j) < 0.0)
      for (std::size_t i = 0; i < m; ++i) q(i, j) = -q(i, j);
  }
  return q;
}

// ---------------------------------------------------------------------------
// BlockDiagOrthogonal

BlockDiagOrthogonal::BlockDiagOrthogonal(std::size_t block_dim, std::size_t num_blocks)
    : block_dim_(block_dim), blocks_(num_blocks, DenseMatrix::identity(block_dim)) {}

BlockDiagOrthogonal BlockDiagOrthogonal::from_blocks_unchecked(
    std::vector<DenseMatrix> blocks) {
  BlockDiagOrthogonal out;
  if (blocks.empty()) throw ShapeError("BlockDiagOrthogonal: needs at least one block");
  out.block_dim_ = blocks.front().rows();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].rows() != out.block_dim_ || blocks[i].cols() != out.block_dim_) {
      throw ShapeError("BlockDiagOrthogonal: block " + std::to_string(i) + " is " +
                       shape_str(blocks[i]) + ", expected " +
                       std::to_string(out.block_dim_) + "x" +
                       std::to_string(out.block_dim_));
    }
  }
  out.blocks_ = std::move(blocks);
  return out;
}

BlockDiagOrthogonal BlockDiagOrthogonal::from_blocks(std::vector<DenseMatrix> blocks) {
  BlockDiagOrthogonal out = from_blocks_unchecked(std::move(blocks));
  for (std::size_t i = 0; i < out.num_blocks(); ++i) {
    const double res = orthogonality_residual(out.blocks_[i]);
    if (!(res <= kOrthogonalityTolerance)) {
      throw PreconditionError("BlockDiagOrthogonal: block " + std::to_string(i) +
                              " is not orthogonal (residual " + std::to_string(res) + ")");
    }
  }
  return out;
}

DenseMatrix BlockDiagOrthogonal::assemble() const {
  const std::size_t n = dim();
  DenseMatrix out(n, n);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::size_t off = b * block_dim_;
    for (std::size_t i = 0; i < block_dim_; ++i)
      for (std::size_t j = 0; j < block_dim_; ++j) out(off + i, off + j) = blocks_[b](i, j);
  }
  return out;
}

BlockDiagOrthogonal BlockDiagOrthogonal::transposed() const {
  BlockDiagOrthogonal out = *this;
  for (auto& blk : out.blocks_) blk = transpose(blk);
  return out;
}

double BlockDiagOrthogonal::max_orthogonality_residual() const {
  double worst = 0.0;
  for (const auto& blk : blocks_) worst = std::max(worst, orthogonality_residual(blk));
  return worst;
}

std::size_t BlockDiagOrthogonal::stabilize(double threshold) {
  std::size_t touched = 0;
  for (auto& blk : blocks_) {
    if (orthogonality_residual(blk) > threshold) {
      blk = qr_orthogonal_factor(blk);
      ++touched;
    }
  }
  return touched;
}

// ---------------------------------------------------------------------------
// Block application

void block_apply_into(const BlockDiagOrthogonal& r, std::span<const double> in,
                      std::size_t cols, std::span<double> out) {
  const std::size_t d = r.block_dim();
  for (std::size_t b = 0; b < r.num_blocks(); ++b) {
    const DenseMatrix& x = r.block(b);
    const std::size_t base = b * d;
    for (std::size_t i = 0; i < d; ++i) {
      double* out_row = out.data() + (base + i) * cols;
      std::fill(out_row, out_row + cols, 0.0);
      for (std::size_t k = 0; k < d; ++k) {
        const double xik = x(i, k);
        const double* in_row = in.data() + (base + k) * cols;
        for (std::size_t c = 0; c < cols; ++c) out_row[c] += xik * in_row[c];
      }
    }
  }
}

void block_apply_transposed_into(const BlockDiagOrthogonal& r,
                                 std::span<const double> in, std::size_t cols,
                                 std::span<double> out) {
  const std::size_t d = r.block_dim();
  for (std::size_t b = 0; b < r.num_blocks(); ++b) {
    const DenseMatrix& x = r.block(b);
    const std::size_t base = b * d;
    for (std::size_t i = 0; i < d; ++i) {
      double* out_row = out.data() + (base + i) * cols;
      std::fill(out_row, out_row + cols, 0.0);
      for (std::size_t k = 0; k < d; ++k) {
        const double xki = x(k, i);
        const double* in_row = in.data() + (base + k) * cols;
        for (std::size_t c = 0; c < cols; ++c) out_row[c] += xki * in_row[c];
      }
    }
  }
}

DenseMatrix block_apply(const BlockDiagOrthogonal& r, const DenseMatrix& h) {
  if (h.rows() != r.dim()) {
    throw ShapeError("block_apply: relation dimension " + std::to_string(r.dim()) +
                     " vs operand " + shape_str(h));
  }
  DenseMatrix out(h.rows(), h.cols());
  block_apply_into(r, h.values(), h.cols(), out.values());
  require_finite(out, "block_apply");
  return out;
}

DenseMatrix block_apply_transposed(const BlockDiagOrthogonal& r, const DenseMatrix& h) {
  if (h.rows() != r.dim()) {
    throw ShapeError("block_apply_transposed: relation dimension " +
                     std::to_string(r.dim()) + " vs operand " + shape_str(h));
  }
  DenseMatrix out(h.rows(), h.cols());
  block_apply_transposed_into(r, h.values(), h.cols(), out.values());
  require_finite(out, "block_apply_transposed");
  return out;
}

}  // namespace orthoe
