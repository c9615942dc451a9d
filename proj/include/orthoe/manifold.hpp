#pragma once

#include <cstdint>

#include "orthoe/random.hpp"
#include "orthoe/tensor.hpp"

namespace orthoe {

/// A direction ξ in the tangent space T_X = {ξ | ξXᵀ + Xξᵀ = 0} of the
/// orthogonal manifold at base point X.
struct TangentVector {
  DenseMatrix at;
  DenseMatrix dir;
};

/// ‖ξXᵀ + Xξᵀ‖_F; zero for members of T_X.
double tangent_residual(const DenseMatrix& x, const DenseMatrix& xi);

/// Riemannian gradient projection P_X(Y) = X(XᵀY − YᵀX)/2.
///
/// Throws ShapeError on mismatched shapes and PreconditionError when x is not
/// orthogonal within 1e−6.
TangentVector tangent_project(const DenseMatrix& x, const DenseMatrix& y);

/// Exponential map Exp_X(ξ) = X · expm(Xᵀξ).
///
/// Xᵀξ is skew-symmetric for tangent ξ; its skew part is what gets
/// exponentiated, so rounding in the product cannot push the result off the
/// manifold. Throws PreconditionError when xi.at differs in shape from x or
/// the tangent residual exceeds 1e−6.
DenseMatrix exp_map(const DenseMatrix& x, const TangentVector& xi);

/// One geodesic gradient step: Exp_X(−η · P_X(∇f)).
DenseMatrix retraction_step(const DenseMatrix& x, const DenseMatrix& euclid_grad, double eta);

/// Default standard deviation of the skew generator used for initialization.
inline constexpr double kInitSkewStddev = 0.1;

/// expm(Ω) for a random skew-symmetric Ω with upper-triangle entries drawn
/// from N(0, stddev²). Small stddev gives a near-identity rotation; large
/// stddev spreads rotations over SO(d). Always det +1.
DenseMatrix random_orthogonal(std::size_t d, Rng& rng, double stddev = kInitSkewStddev);
DenseMatrix random_orthogonal(std::size_t d, std::uint64_t seed,
                              double stddev = kInitSkewStddev);

/// Modified Gram-Schmidt on the columns of a square matrix. Column j is
/// orthogonalized against q₀…q_{j−1} one projection at a time, then
/// normalized. Throws DegeneracyError naming the first column whose
/// post-projection norm is ≤ 1e−10.
DenseMatrix gram_schmidt(const DenseMatrix& a);

/// Reverse-mode derivative of gram_schmidt: given ∂L/∂Q returns ∂L/∂A.
/// Replays the forward pass and differentiates every projection and
/// normalization in reverse order.
DenseMatrix gram_schmidt_backward(const DenseMatrix& a, const DenseMatrix& d_q);

}  // namespace orthoe
