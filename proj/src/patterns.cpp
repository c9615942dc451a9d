#include "orthoe/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "orthoe/errors.hpp"

namespace orthoe {

namespace {

void require_same_shape(const BlockDiagOrthogonal& a, const BlockDiagOrthogonal& b,
                        const char* op) {
  if (a.block_dim() != b.block_dim() || a.num_blocks() != b.num_blocks()) {
    throw ShapeError(std::string(op) + ": relations differ in shape (" +
                     std::to_string(a.dim()) + "/" + std::to_string(a.block_dim()) + " vs " +
                     std::to_string(b.dim()) + "/" + std::to_string(b.block_dim()) + ")");
  }
}

template <typename BlockFn>
DenseMatrix stacked(const BlockDiagOrthogonal& shape, BlockFn fn) {
  const std::size_t d = shape.block_dim();
  DenseMatrix out(shape.dim(), d);
  for (std::size_t b = 0; b < shape.num_blocks(); ++b) {
    const DenseMatrix blk = fn(b);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) out(b * d + i, j) = blk(i, j);
  }
  return out;
}

double normalized(const DenseMatrix& residual, std::size_t n) {
  return frobenius_norm(residual) / std::sqrt(static_cast<double>(n));
}

}  // namespace

DenseMatrix symmetry_residual(const BlockDiagOrthogonal& r) {
  const DenseMatrix eye = DenseMatrix::identity(r.block_dim());
  return stacked(r, [&](std::size_t b) { return matmul(r.block(b), r.block(b)) - eye; });
}

DenseMatrix inversion_residual(const BlockDiagOrthogonal& r1, const BlockDiagOrthogonal& r2) {
  require_same_shape(r1, r2, "inversion_residual");
  const DenseMatrix eye = DenseMatrix::identity(r1.block_dim());
  return stacked(r1, [&](std::size_t b) { return matmul(r1.block(b), r2.block(b)) - eye; });
}

DenseMatrix composition_residual(const BlockDiagOrthogonal& r1, const BlockDiagOrthogonal& r2,
                                 const BlockDiagOrthogonal& r3) {
  require_same_shape(r1, r2, "composition_residual");
  require_same_shape(r1, r3, "composition_residual");
  return stacked(r1,
                 [&](std::size_t b) { return matmul(r2.block(b), r1.block(b)) - r3.block(b); });
}

std::pair<double, double> commutator_gap(const BlockDiagOrthogonal& r1,
                                         const BlockDiagOrthogonal& r2,
                                         const BlockDiagOrthogonal& r3) {
  const std::size_t n = r1.dim();
  return {normalized(composition_residual(r1, r2, r3), n),
          normalized(composition_residual(r2, r1, r3), n)};
}

DenseMatrix assemble_block_stacked(const DenseMatrix& stacked_residual) {
  const std::size_t n = stacked_residual.rows();
  const std::size_t d = stacked_residual.cols();
  if (d == 0 || n % d != 0) {
    throw ShapeError("assemble_block_stacked: " + std::to_string(n) + "x" + std::to_string(d) +
                     " is not block-stacked");
  }
  DenseMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = (i / d) * d;
    for (std::size_t j = 0; j < d; ++j) out(i, base + j) = stacked_residual(i, j);
  }
  return out;
}

std::vector<HistogramBin> histogram(std::span<const double> entries, std::size_t num_bins) {
  if (entries.empty()) throw ProtocolError("histogram: no entries");
  if (num_bins == 0) throw PreconditionError("histogram: need at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(entries.begin(), entries.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw NumericError("histogram: non-finite entry");
  }
  if (lo == hi) return {HistogramBin{lo, hi, entries.size()}};

  const double width = (hi - lo) / static_cast<double>(num_bins);
  std::vector<HistogramBin> bins(num_bins);
  for (std::size_t i = 0; i < num_bins; ++i) {
    bins[i].lower = lo + width * static_cast<double>(i);
    bins[i].upper = i + 1 == num_bins ? hi : lo + width * static_cast<double>(i + 1);
  }
  for (double x : entries) {
    auto idx = static_cast<std::size_t>((x - lo) / width);
    idx = std::min(idx, num_bins - 1);
    ++bins[idx].count;
  }
  return bins;
}

ResidualReport analyze_relations(const std::string& kind,
                                 std::span<const BlockDiagOrthogonal> rels,
                                 std::vector<std::string> names, std::size_t num_bins) {
  std::size_t arity = 0;
  if (kind == "symmetry" || kind == "antisymmetry") {
    arity = 1;
  } else if (kind == "inversion") {
    arity = 2;
  } else if (kind == "composition" || kind == "commutator-gap") {
    arity = 3;
  } else {
    throw PreconditionError("unknown analysis kind '" + kind +
                            "' (expected symmetry, antisymmetry, inversion, composition or "
                            "commutator-gap)");
  }
  if (rels.size() != arity) {
    throw PreconditionError("kind '" + kind + "' takes " + std::to_string(arity) +
                            " relation(s), got " + std::to_string(rels.size()));
  }

  ResidualReport report;
  report.kind = kind;
  report.relations = std::move(names);
  const std::size_t n = rels[0].dim();
  DenseMatrix residual;
  if (kind == "symmetry") {
    residual = symmetry_residual(rels[0]);
  } else if (kind == "antisymmetry") {
    // Antisymmetric relations have r·r far from I; the histogram shows r·r.
    const BlockDiagOrthogonal& r = rels[0];
    residual = stacked(r, [&](std::size_t b) { return matmul(r.block(b), r.block(b)); });
  } else if (kind == "inversion") {
    residual = inversion_residual(rels[0], rels[1]);
  } else {
    residual = composition_residual(rels[0], rels[1], rels[2]);
    if (kind == "commutator-gap") {
      report.swapped_norm = normalized(composition_residual(rels[1], rels[0], rels[2]), n);
    }
  }
  report.residual_norm = kind == "antisymmetry" ? normalized(symmetry_residual(rels[0]), n)
                                                : normalized(residual, n);
  report.bins = histogram(residual.values(), num_bins);
  return report;
}

std::string histogram_csv(const ResidualReport& report) {
  std::string out = "bin_lower,bin_upper,count\n";
  char buf[96];
  for (const auto& b : report.bins) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu\n", b.lower, b.upper, b.count);
    out += buf;
  }
  return out;
}

std::string report_json(const ResidualReport& report) {
  nlohmann::ordered_json j;
  j["kind"] = report.kind;
  j["relations"] = report.relations;
  j["residual_norm"] = report.residual_norm;
  if (report.kind == "commutator-gap") j["swapped_norm"] = report.swapped_norm;
  return j.dump(2) + "\n";
}

}  // namespace orthoe
