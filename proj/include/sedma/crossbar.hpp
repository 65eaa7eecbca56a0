#pragma once

// Simulated resistive crossbar: noisy closed-loop programming, noisy analog
// matrix-vector reads, three-product first-order error cancellation and
// tridiagonal regularized denoising.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "sedma/core.hpp"
#include "sedma/memory_store.hpp"

namespace sedma {

/// Multiplicative device noise. Programming draws a·exp(write_sigma·z);
/// each read scales every cell by (1 + read_sigma·z). Zero entries stay zero.
struct NoiseModel {
  double write_sigma = 0.02;
  double read_sigma = 0.005;
  std::uint64_t seed = 0;

  static constexpr NoiseModel exact(std::uint64_t seed = 0) noexcept { return {0.0, 0.0, seed}; }
  bool noiseless() const noexcept { return write_sigma == 0.0 && read_sigma == 0.0; }
};

struct CrossbarLimits {
  std::size_t max_dim = 256;
  double conductance_ceiling = 1e6;
};

struct ProgramConfig {
  double tol = 0.01;
  int max_iters = 10;
};

namespace detail {
inline constexpr std::uint64_t kWriteStream = 0x7772697465ULL;  // "write"
inline constexpr std::uint64_t kReadStream = 0x72656164ULL;     // "read"
inline constexpr std::uint64_t kVectorStream = 0x766563ULL;     // "vec"
inline constexpr std::uint64_t kProbeStream = 0x70726f6265ULL;  // "probe"

inline void validate_noise(const NoiseModel& n) {
  if (!(n.write_sigma >= 0.0) || !(n.read_sigma >= 0.0))
    throw Error("NoiseModel: sigmas must be nonnegative");
}

/// One cell of write-and-verify. Returns the best attempt; adds attempts.
inline double write_verify_cell(double target, double sigma, const ProgramConfig& cfg, Rng& rng,
                                std::uint64_t& attempts) {
  std::normal_distribution<double> nd(0.0, 1.0);
  double best = 0.0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iters; ++it) {
    double cand = target * std::exp(sigma * nd(rng));
    ++attempts;
    double err = target == 0.0 ? 0.0 : std::abs(cand - target) / std::abs(target);
    if (err < best_err) {
      best_err = err;
      best = cand;
    }
    if (err <= cfg.tol) break;
  }
  return best;
}
}  // namespace detail

class CrossbarArray {
public:
  CrossbarArray(Matrix target, Matrix programmed, std::uint64_t iterations, NoiseModel noise)
      : target_(std::move(target)),
        programmed_(std::move(programmed)),
        iterations_(iterations),
        noise_(noise),
        read_rng_(mix_seed(noise.seed ^ detail::kReadStream)) {
    if (target_.rows() != programmed_.rows() || target_.cols() != programmed_.cols())
      throw Error("CrossbarArray: programmed shape differs from target shape");
  }

  const Matrix& target() const noexcept { return target_; }
  const Matrix& programmed() const noexcept { return programmed_; }
  std::uint64_t program_iterations() const noexcept { return iterations_; }
  const NoiseModel& noise() const noexcept { return noise_; }
  std::size_t rows() const noexcept { return target_.rows(); }
  std::size_t cols() const noexcept { return target_.cols(); }
  std::uint64_t reads() const noexcept { return reads_; }

  /// Restart the read-noise stream from a new seed.
  void reseed_reads(std::uint64_t seed) { read_rng_.seed(mix_seed(seed ^ detail::kReadStream)); }

  /// y = (programmed ∘ read noise) · x with a fresh draw per cell.
  Vector read_mvm(std::span<const double> x) {
    if (x.size() != cols())
      throw Error("read_mvm: input length " + std::to_string(x.size()) +
                  " does not match crossbar columns " + std::to_string(cols()));
    ++reads_;
    if (noise_.read_sigma == 0.0) return multiply(programmed_, x);
    std::normal_distribution<double> nd(0.0, 1.0);
    Vector y(rows(), 0.0);
    for (std::size_t i = 0; i < rows(); ++i) {
      auto r = programmed_.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < r.size(); ++j)
        acc += r[j] * (1.0 + noise_.read_sigma * nd(read_rng_)) * x[j];
      y[i] = acc;
    }
    return y;
  }

private:
  Matrix target_;
  Matrix programmed_;
  std::uint64_t iterations_;
  NoiseModel noise_;
  Rng read_rng_;
  std::uint64_t reads_ = 0;
};

/// Closed-loop programming of every cell until its relative error is within
/// tol or max_iters attempts are spent; the best attempt is kept.
inline CrossbarArray program_write_verify(const Matrix& a, const NoiseModel& noise,
                                          ProgramConfig cfg = {}, CrossbarLimits limits = {}) {
  detail::validate_noise(noise);
  if (cfg.max_iters < 1) throw Error("program_write_verify: max_iters must be >= 1");
  if (a.empty()) throw Error("program_write_verify: empty matrix");
  if (a.rows() > limits.max_dim || a.cols() > limits.max_dim)
    throw Error("program_write_verify: " + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()) + " exceeds device max dimension " +
                std::to_string(limits.max_dim) + "; partition the matrix first");
  for (double v : a.data())
    if (!(std::abs(v) <= limits.conductance_ceiling))
      throw Error("program_write_verify: entry " + format_real(v) +
                  " exceeds conductance ceiling " + format_real(limits.conductance_ceiling));
  Rng rng(mix_seed(noise.seed ^ detail::kWriteStream));
  Matrix prog(a.rows(), a.cols());
  std::uint64_t attempts = 0;
  auto src = a.data();
  auto dst = prog.data();
  for (std::size_t k = 0; k < src.size(); ++k)
    dst[k] = detail::write_verify_cell(src[k], noise.write_sigma, cfg, rng, attempts);
  return CrossbarArray(a, std::move(prog), attempts, noise);
}

struct ProgrammedVector {
  Vector values;
  std::uint64_t iterations = 0;
};

/// Input vectors go through the same write-and-verify loop on their own
/// noise stream, producing the perturbed x̃.
inline ProgrammedVector program_vector(std::span<const double> x, const NoiseModel& noise,
                                       ProgramConfig cfg = {}) {
  detail::validate_noise(noise);
  if (cfg.max_iters < 1) throw Error("program_vector: max_iters must be >= 1");
  Rng rng(mix_seed(noise.seed ^ detail::kVectorStream));
  ProgrammedVector out;
  out.values.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k)
    out.values[k] = detail::write_verify_cell(x[k], noise.write_sigma, cfg, rng, out.iterations);
  return out;
}

struct ThreeProducts {
  Vector a_xt;   // A·x̃ (exact, digital A)
  Vector at_x;   // Ã·x (crossbar read)
  Vector at_xt;  // Ã·x̃ (crossbar read)

  /// p = A·x̃ + Ã·x − Ã·x̃, which equals A·x − ΔA·Δx in exact arithmetic.
  Vector corrected() const {
    Vector p(a_xt.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = a_xt[i] + at_x[i] - at_xt[i];
    return p;
  }
};

inline ThreeProducts three_products(const Matrix& a, std::span<const double> x,
                                    CrossbarArray& xbar, std::span<const double> x_programmed) {
  if (a.rows() != xbar.rows() || a.cols() != xbar.cols())
    throw Error("first_order_correct: matrix shape does not match crossbar");
  if (x.size() != a.cols() || x_programmed.size() != a.cols())
    throw Error("first_order_correct: vector lengths must equal matrix columns");
  ThreeProducts t;
  t.a_xt = multiply(a, x_programmed);
  t.at_x = xbar.read_mvm(x);
  t.at_xt = xbar.read_mvm(x_programmed);
  return t;
}

inline Vector first_order_correct(const Matrix& a, std::span<const double> x, CrossbarArray& xbar,
                                  std::span<const double> x_programmed) {
  return three_products(a, x, xbar, x_programmed).corrected();
}

/// Solves (I + lambda·LᵀL)·y = p where L is the (n−1)×n first-difference
/// operator. LᵀL is tridiagonal with diagonal (1, 2, …, 2, 1) and −1 off the
/// diagonal, so the Thomas algorithm gives an O(n) exact solve. The system is
/// strictly diagonally dominant for every lambda ≥ 0, so no pivoting is needed.
/// Inputs with n < 2 are returned unchanged and bump *short_input_warnings.
inline Vector denoise(std::span<const double> p, double lambda,
                      std::uint64_t* short_input_warnings = nullptr) {
  if (!(lambda >= 0.0)) throw Error("denoise: lambda must be nonnegative");
  const std::size_t n = p.size();
  if (n < 2) {
    if (short_input_warnings) ++*short_input_warnings;
    return Vector(p.begin(), p.end());
  }
  if (lambda == 0.0) return Vector(p.begin(), p.end());

  const double off = -lambda;
  std::vector<double> c(n);  // modified super-diagonal
  Vector y(n);
  double diag = 1.0 + lambda;
  c[0] = off / diag;
  y[0] = p[0] / diag;
  for (std::size_t i = 1; i < n; ++i) {
    diag = 1.0 + (i + 1 == n ? lambda : 2.0 * lambda);
    double denom = diag - off * c[i - 1];
    c[i] = off / denom;
    y[i] = (p[i] - off * y[i - 1]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) y[i] -= c[i] * y[i + 1];
  return y;
}

inline constexpr std::array<double, 13> kLambdaGrid = {1e-14, 1e-13, 1e-12, 1e-11, 1e-10,
                                                       1e-9,  1e-8,  1e-7,  1e-6,  1e-5,
                                                       1e-4,  1e-3,  1e-2};

struct LambdaProbeConfig {
  bool enabled = true;
  int probes = 3;
  ProgramConfig program{};
  /// Rows of the tile that carry data; trailing zero padding is not denoised.
  /// Zero means all rows.
  std::size_t active_rows = 0;
  /// Record the estimate into short-term memory.
  bool record = true;
};

struct ProbeSample {
  Vector x;
  Vector corrected;  // first-order-corrected crossbar output (active rows)
  Vector exact;      // software A·x (active rows)
};

struct LambdaEstimate {
  double lambda = kDefaultLambda;
  bool from_probes = false;
  std::vector<double> mean_residuals;  // aligned with kLambdaGrid
  std::vector<ProbeSample> samples;
};

/// Probe-based calibration: pushes known random vectors through the full
/// three-product path, then picks the grid lambda minimizing the mean squared
/// residual of the denoised output against the exact software product. Ties
/// go to the smaller lambda. The probe read stream is derived from the array
/// seed, so calibration does not disturb the array's own read noise.
inline LambdaEstimate estimate_lambda_recent(MemoryStore& store, const CrossbarArray& xbar,
                                             const LambdaProbeConfig& cfg = {}) {
  LambdaEstimate est;
  if (!cfg.enabled || cfg.probes <= 0) {
    if (auto obs = store.stm().latest(ObservationKind::lambda)) est.lambda = obs->value;
    return est;
  }
  const std::size_t rows = cfg.active_rows == 0 ? xbar.rows() : std::min(cfg.active_rows, xbar.rows());
  CrossbarArray probe_bar = xbar;
  const std::uint64_t probe_seed = mix_seed(xbar.noise().seed ^ detail::kProbeStream);
  probe_bar.reseed_reads(probe_seed);
  Rng rng(probe_seed);
  NoiseModel vec_noise = xbar.noise();
  for (int k = 0; k < cfg.probes; ++k) {
    ProbeSample s;
    s.x = random_gaussian_vector(xbar.cols(), rng);
    vec_noise.seed = mix_seed(probe_seed + static_cast<std::uint64_t>(k) + 1);
    auto xt = program_vector(s.x, vec_noise, cfg.program);
    auto p = first_order_correct(xbar.target(), s.x, probe_bar, xt.values);
    auto exact = multiply(xbar.target(), s.x);
    s.corrected.assign(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(rows));
    s.exact.assign(exact.begin(), exact.begin() + static_cast<std::ptrdiff_t>(rows));
    est.samples.push_back(std::move(s));
  }
  est.mean_residuals.reserve(kLambdaGrid.size());
  double best = std::numeric_limits<double>::infinity();
  for (double lambda : kLambdaGrid) {
    double acc = 0.0;
    for (const auto& s : est.samples) {
      double d = distance2(denoise(s.corrected, lambda), s.exact);
      acc += d * d;
    }
    double mean = acc / static_cast<double>(est.samples.size());
    est.mean_residuals.push_back(mean);
    if (mean < best) {
      best = mean;
      est.lambda = lambda;
    }
  }
  est.from_probes = true;
  if (cfg.record) {
    store.record_observation({store.time(), ObservationKind::residual, 0, best});
    store.record_observation({store.time(), ObservationKind::lambda, 0, est.lambda});
  }
  return est;
}

}  // namespace sedma
