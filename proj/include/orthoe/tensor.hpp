#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace orthoe {

/// Row-major matrix of 64-bit reals. The numeric carrier for entity
/// matrices, orthogonal blocks and gradients.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of row-major `values`; throws ShapeError when
  /// values.size() != rows * cols.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  /// Builds from nested row lists, e.g. {{0, -1}, {1, 0}}.
  static DenseMatrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  bool all_finite() const noexcept;

  DenseMatrix& operator+=(const DenseMatrix& other);
  DenseMatrix& operator-=(const DenseMatrix& other);
  DenseMatrix& operator*=(double s) noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double s, DenseMatrix a);
DenseMatrix operator-(DenseMatrix a);

/// a * b. Throws ShapeError when a.cols() != b.rows().
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// aᵀ * b without forming the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a * bᵀ without forming the transpose.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);

double frobenius_norm(const DenseMatrix& a);
double frobenius_norm(std::span<const double> values);
/// Largest absolute column sum.
double one_norm(const DenseMatrix& a);
double determinant(const DenseMatrix& a);

/// ‖a·aᵀ − I‖_F; zero exactly for orthogonal a.
double orthogonality_residual(const DenseMatrix& a);

/// (a − aᵀ) / 2.
DenseMatrix skew_part(const DenseMatrix& a);

/// Solves a·x = b by LU with partial pivoting. Throws NumericError for a
/// singular system.
DenseMatrix solve(DenseMatrix a, DenseMatrix b);

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant. Throws ShapeError for non-square input and NumericError for
/// non-finite input or when the squaring budget is exceeded.
DenseMatrix expm(const DenseMatrix& a);

/// Orthogonal factor Q of a = Q·R (Householder), with columns signed so that
/// diag(R) > 0. For full-rank a this is the nearest-orthonormal-frame choice
/// used to pull drifted orthogonal blocks back onto the manifold.
DenseMatrix qr_orthogonal_factor(const DenseMatrix& a);

/// Block-diagonal matrix diag(X₀, …, X_{k−1}) of equally sized d×d orthogonal
/// blocks acting on an n = k·d row space.
///
/// Orthogonality of each block (‖X·Xᵀ − I‖_F ≤ 1e−6) is checked by the
/// factory and maintained by the optimizers through stabilize(). Mutable
/// block access exists for optimizers and does not re-check it.
class BlockDiagOrthogonal {
 public:
  static constexpr double kOrthogonalityTolerance = 1e-6;
  static constexpr double kStabilizeThreshold = 1e-8;

  BlockDiagOrthogonal() = default;
  /// All blocks identity.
  BlockDiagOrthogonal(std::size_t block_dim, std::size_t num_blocks);

  /// Validates shapes and orthogonality (PreconditionError otherwise).
  static BlockDiagOrthogonal from_blocks(std::vector<DenseMatrix> blocks);
  /// Validates shapes only. Used for perturbed blocks in gradient checks and
  /// for the un-normalized Gram-Schmidt parameterization.
  static BlockDiagOrthogonal from_blocks_unchecked(std::vector<DenseMatrix> blocks);

  std::size_t block_dim() const noexcept { return block_dim_; }
  std::size_t num_blocks() const noexcept { return blocks_.size(); }
  std::size_t dim() const noexcept { return block_dim_ * blocks_.size(); }

  const DenseMatrix& block(std::size_t i) const { return blocks_.at(i); }
  DenseMatrix& block(std::size_t i) { return blocks_.at(i); }
  const std::vector<DenseMatrix>& blocks() const noexcept { return blocks_; }

  /// Explicit n×n matrix. Test and analysis use only.
  DenseMatrix assemble() const;
  /// diag(X₀ᵀ, …): the inverse of an orthogonal block-diagonal matrix.
  BlockDiagOrthogonal transposed() const;
  /// Largest per-block orthogonality residual.
  double max_orthogonality_residual() const;
  /// Re-orthogonalizes every block whose residual exceeds `threshold` via its
  /// sign-corrected QR factor. Returns the number of blocks touched.
  std::size_t stabilize(double threshold = kStabilizeThreshold);

  friend bool operator==(const BlockDiagOrthogonal&, const BlockDiagOrthogonal&) = default;

 private:
  std::size_t block_dim_ = 0;
  std::vector<DenseMatrix> blocks_;
};

/// r · h computed band by band in O(n·d·m). Throws ShapeError when
/// h.rows() != r.dim().
DenseMatrix block_apply(const BlockDiagOrthogonal& r, const DenseMatrix& h);
/// rᵀ · h, band by band.
DenseMatrix block_apply_transposed(const BlockDiagOrthogonal& r, const DenseMatrix& h);

// Raw kernels over row-major n×m spans, shared by the model hot path.
// out must not alias in.
void block_apply_into(const BlockDiagOrthogonal& r, std::span<const double> in,
                      std::size_t cols, std::span<double> out);
void block_apply_transposed_into(const BlockDiagOrthogonal& r,
                                 std::span<const double> in, std::size_t cols,
                                 std::span<double> out);

}  // namespace orthoe
