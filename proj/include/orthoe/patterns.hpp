#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "orthoe/tensor.hpp"

namespace orthoe {

// Residuals are returned block-stacked: an n×d matrix whose i-th d-row band
// is the residual of block i. The off-diagonal blocks of the dense residual
// are identically zero, so nothing is lost.

/// Xᵢ·Xᵢ − I for every block.
DenseMatrix symmetry_residual(const BlockDiagOrthogonal& r);
/// r1ᵢ·r2ᵢ − I for every block. ShapeError on mismatched (n, d).
DenseMatrix inversion_residual(const BlockDiagOrthogonal& r1, const BlockDiagOrthogonal& r2);
/// r2ᵢ·r1ᵢ − r3ᵢ for every block (r1 applied first).
DenseMatrix composition_residual(const BlockDiagOrthogonal& r1, const BlockDiagOrthogonal& r2,
                                 const BlockDiagOrthogonal& r3);
/// (‖r2·r1 − r3‖_F/√n, ‖r1·r2 − r3‖_F/√n).
std::pair<double, double> commutator_gap(const BlockDiagOrthogonal& r1,
                                         const BlockDiagOrthogonal& r2,
                                         const BlockDiagOrthogonal& r3);

/// Expands a block-stacked n×d residual to the dense n×n form.
DenseMatrix assemble_block_stacked(const DenseMatrix& stacked);

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;

  friend bool operator==(const HistogramBin&, const HistogramBin&) = default;
};

/// Equal-width bins over [min, max]; the maximum lands in the last bin. A
/// degenerate range produces a single bin. ProtocolError for empty input,
/// PreconditionError for zero bins.
std::vector<HistogramBin> histogram(std::span<const double> entries, std::size_t num_bins);

struct ResidualReport {
  std::string kind;  ///< symmetry, antisymmetry, inversion, composition, commutator-gap
  std::vector<std::string> relations;
  double residual_norm = 0.0;  ///< ‖residual‖_F / √n
  /// commutator-gap only: the residual norm with the two relations swapped.
  double swapped_norm = 0.0;
  std::vector<HistogramBin> bins;
};

inline constexpr std::size_t kDefaultHistogramBins = 100;

/// Builds the report for `kind` over `rels` (arity 1, 1, 2, 3, 3 in the
/// order listed on ResidualReport::kind). The histogram covers the entries
/// of the block-stacked residual, or of r·r for antisymmetry.
/// Throws PreconditionError for an unknown kind or wrong arity.
ResidualReport analyze_relations(const std::string& kind,
                                 std::span<const BlockDiagOrthogonal> rels,
                                 std::vector<std::string> names,
                                 std::size_t num_bins = kDefaultHistogramBins);

/// `bin_lower,bin_upper,count` header then one row per bin.
std::string histogram_csv(const ResidualReport& report);
/// {"kind", "relations", "residual_norm"} plus "swapped_norm" for commutator-gap.
std::string report_json(const ResidualReport& report);

}  // namespace orthoe
