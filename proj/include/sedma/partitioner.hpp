#pragma once

// Workload classification, cost-driven block decomposition of matrices onto
// fixed-size crossbars, and tile split / reassembly.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "sedma/core.hpp"
#include "sedma/crossbar.hpp"
#include "sedma/memory_store.hpp"

namespace sedma {

inline constexpr std::size_t kMinPartitionDim = 32;
inline constexpr std::array<std::size_t, 4> kBlockCandidates = {32, 64, 128, 256};

struct DeviceSpec {
  std::size_t max_dim = 256;
  double t_prog = 1e-6;  // seconds per programming attempt
  double t_read = 1e-7;  // seconds per MVM read
  /// Megabytes for a full max_dim × max_dim block; scales with block area.
  double mem_full_block_mb = 16.0;
  /// Programming model used to predict attempts per cell.
  double write_sigma = 0.02;
  ProgramConfig program{};

  double mem_per_block_mb(std::size_t area) const {
    return mem_full_block_mb * static_cast<double>(area) /
           static_cast<double>(max_dim * max_dim);
  }

  void validate() const {
    if (max_dim == 0 || !(t_prog > 0) || !(t_read > 0) || !(mem_full_block_mb > 0))
      throw Error("DeviceSpec: all fields must be positive");
    if (!(write_sigma >= 0)) throw Error("DeviceSpec: write_sigma must be nonnegative");
  }
};

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Expected write-and-verify attempts for a nonzero cell: each lognormal draw
/// lands within tol with probability q, and attempts are capped at max_iters,
/// giving (1 − (1 − q)^N) / q.
inline double expected_program_attempts(double write_sigma, const ProgramConfig& cfg) {
  if (write_sigma == 0.0) return 1.0;
  const double hi = std::log1p(cfg.tol) / write_sigma;
  const double lo = cfg.tol >= 1.0 ? -std::numeric_limits<double>::infinity()
                                   : std::log1p(-cfg.tol) / write_sigma;
  const double q = standard_normal_cdf(hi) - standard_normal_cdf(lo);
  const double n = static_cast<double>(cfg.max_iters);
  if (q <= 0.0) return n;
  return (1.0 - std::pow(1.0 - q, n)) / q;
}

inline WorkloadClass classify_workload(const Matrix& a) {
  if (a.empty()) throw Error("classify_workload: empty matrix");
  WorkloadClass c;
  const std::size_t dim = std::max(a.rows(), a.cols());
  while ((std::size_t{1} << c.size_exp) < dim) ++c.size_exp;

  std::size_t nnz = 0;
  double max_abs = 0.0;
  for (double v : a.data()) {
    if (v != 0.0) ++nnz;
    max_abs = std::max(max_abs, std::abs(v));
  }
  const double frac = static_cast<double>(nnz) / static_cast<double>(a.data().size());
  c.sparsity = frac >= 0.5 ? Sparsity::dense : frac >= 0.1 ? Sparsity::medium : Sparsity::sparse;
  c.magnitude_exp = max_abs == 0.0 ? WorkloadClass::kZeroMagnitude
                                   : static_cast<int>(std::floor(std::log10(max_abs)));
  return c;
}

struct Tile {
  std::size_t row_begin = 0, row_end = 0;
  std::size_t col_begin = 0, col_end = 0;
  double compute_cost = 0.0;  // seconds
  double memory_mb = 0.0;

  std::size_t rows() const noexcept { return row_end - row_begin; }
  std::size_t cols() const noexcept { return col_end - col_begin; }
  bool operator==(const Tile&) const = default;
};

struct PartitionPlan {
  std::size_t m = 0, n = 0;
  std::size_t row_block = 0;
  std::size_t col_block = 0;
  std::vector<Tile> blocks;  // row-major
  double est_compute_cost = 0.0;
  double est_memory_overhead = 0.0;
  double lambda_mem = 0.0;

  double total_cost() const { return est_compute_cost + lambda_mem * est_memory_overhead; }
  std::size_t tile_count() const noexcept { return blocks.size(); }
};

/// Uniform grid of row_block × col_block tiles covering m × n; edge tiles
/// are ragged (padded on the device). Costs are left at zero.
inline PartitionPlan make_plan(std::size_t m, std::size_t n, std::size_t row_block,
                               std::size_t col_block) {
  if (m == 0 || n == 0 || row_block == 0 || col_block == 0)
    throw Error("make_plan: dimensions and block sizes must be positive");
  PartitionPlan plan;
  plan.m = m;
  plan.n = n;
  plan.row_block = row_block;
  plan.col_block = col_block;
  for (std::size_t r = 0; r < m; r += row_block)
    for (std::size_t c = 0; c < n; c += col_block)
      plan.blocks.push_back(Tile{r, std::min(m, r + row_block), c, std::min(n, c + col_block)});
  return plan;
}

/// Fills per-tile cost terms. A tile occupies a full row_block × col_block
/// array; padding cells are zeros and take a single programming attempt.
inline void cost_plan(PartitionPlan& plan, const Matrix& a, const DeviceSpec& dev,
                      double lambda_mem) {
  const double per_cell = expected_program_attempts(dev.write_sigma, dev.program);
  const std::size_t area = plan.row_block * plan.col_block;
  plan.est_compute_cost = 0.0;
  plan.est_memory_overhead = 0.0;
  plan.lambda_mem = lambda_mem;
  for (Tile& t : plan.blocks) {
    std::size_t nnz = 0;
    for (std::size_t i = t.row_begin; i < t.row_end; ++i)
      for (std::size_t j = t.col_begin; j < t.col_end; ++j)
        if (a(i, j) != 0.0) ++nnz;
    // Vector slice: assumed dense over the real columns.
    const double attempts = static_cast<double>(nnz + t.cols()) * per_cell +
                            static_cast<double>(area - nnz + plan.col_block - t.cols());
    t.compute_cost = attempts * dev.t_prog + 3.0 * dev.t_read;
    t.memory_mb = dev.mem_per_block_mb(area);
    plan.est_compute_cost += t.compute_cost;
    plan.est_memory_overhead += t.memory_mb;
  }
}

/// Picks the square block size minimizing
///   Σ compute_cost(tile) + lambda_mem · Σ memory_overhead(tile)
/// over {32, 64, 128, 256} ∩ [1, max_dim]. A hinted block size is evaluated
/// first and wins ties; otherwise ties go to the larger block. Matrices with a
/// side below 32 that fit the device bypass partitioning as one exact block.
inline PartitionPlan optimize_partition(const Matrix& a, const DeviceSpec& dev,
                                        const std::optional<LtmRecord>& hint, double lambda_mem) {
  dev.validate();
  if (a.empty()) throw Error("optimize_partition: empty matrix");
  if (!(lambda_mem >= 0.0)) throw Error("optimize_partition: lambda_mem must be nonnegative");
  const std::size_t m = a.rows(), n = a.cols();

  if (std::min(m, n) < kMinPartitionDim && std::max(m, n) <= dev.max_dim) {
    auto plan = make_plan(m, n, m, n);
    cost_plan(plan, a, dev, lambda_mem);
    return plan;
  }

  std::vector<std::size_t> order;
  if (hint)
    if (auto* s = std::get_if<PartitionStrategy>(&hint->payload))
      if (std::find(kBlockCandidates.begin(), kBlockCandidates.end(), s->block) !=
              kBlockCandidates.end() &&
          s->block <= dev.max_dim)
        order.push_back(s->block);
  for (auto it = kBlockCandidates.rbegin(); it != kBlockCandidates.rend(); ++it)
    if (*it <= dev.max_dim && std::find(order.begin(), order.end(), *it) == order.end())
      order.push_back(*it);
  if (order.empty())
    throw Error("optimize_partition: no candidate block size fits max_dim " +
                std::to_string(dev.max_dim) + " (minimum block is 32)");

  std::optional<PartitionPlan> best;
  for (std::size_t b : order) {
    auto plan = make_plan(m, n, b, b);
    cost_plan(plan, a, dev, lambda_mem);
    if (!best || plan.total_cost() < best->total_cost()) best = std::move(plan);
  }
  return *best;
}

struct TileInput {
  Matrix a;  // padded to row_block × col_block
  Vector x;  // padded to col_block
};

inline TileInput extract_tile(const Matrix& a, std::span<const double> x, const PartitionPlan& plan,
                              const Tile& t) {
  TileInput in{Matrix(plan.row_block, plan.col_block), Vector(plan.col_block, 0.0)};
  for (std::size_t i = t.row_begin; i < t.row_end; ++i)
    for (std::size_t j = t.col_begin; j < t.col_end; ++j)
      in.a(i - t.row_begin, j - t.col_begin) = a(i, j);
  for (std::size_t j = t.col_begin; j < t.col_end; ++j) in.x[j - t.col_begin] = x[j];
  return in;
}

inline std::vector<TileInput> split_matrix(const Matrix& a, std::span<const double> x,
                                           const PartitionPlan& plan) {
  if (a.rows() != plan.m || a.cols() != plan.n)
    throw Error("split_matrix: plan covers " + std::to_string(plan.m) + "x" +
                std::to_string(plan.n) + " but matrix is " + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()));
  if (x.size() != a.cols()) throw Error("split_matrix: vector length does not match columns");
  std::vector<TileInput> out;
  out.reserve(plan.blocks.size());
  for (const Tile& t : plan.blocks) out.push_back(extract_tile(a, x, plan, t));
  return out;
}

/// Sums partials of tiles sharing a row strip and concatenates strips.
/// Each partial may be padded; entries past the tile's real rows are ignored.
inline Vector concat_results(const std::vector<Vector>& partials, const PartitionPlan& plan) {
  if (partials.size() != plan.blocks.size())
    throw Error("concat_results: expected " + std::to_string(plan.blocks.size()) +
                " partials, got " + std::to_string(partials.size()));
  Vector y(plan.m, 0.0);
  for (std::size_t k = 0; k < partials.size(); ++k) {
    const Tile& t = plan.blocks[k];
    if (partials[k].size() < t.rows())
      throw Error("concat_results: partial " + std::to_string(k) + " is shorter than its tile");
    for (std::size_t r = 0; r < t.rows(); ++r) y[t.row_begin + r] += partials[k][r];
  }
  return y;
}

/// Score for long-term write-back: predicted / measured cost, clipped to [0,1].
inline double partition_success_score(const PartitionPlan& plan, double measured_compute_cost) {
  if (!(measured_compute_cost > 0.0)) return 1.0;
  return std::clamp(plan.est_compute_cost / measured_compute_cost, 0.0, 1.0);
}

}  // namespace sedma
