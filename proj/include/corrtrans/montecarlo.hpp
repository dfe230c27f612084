// SPDX-License-Identifier: Apache-2.0
//
// Seeded parallel Monte Carlo estimation of P(tau > z_alpha) over a grid of
// (alpha, rho, n) cells. Each cell runs K independent workers of N samples;
// worker k of cell c draws from a generator seeded by
// derive_seed(master_seed, c, k), so tables do not depend on scheduling.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "corrtrans/models.hpp"
#include "corrtrans/pearson.hpp"
#include "corrtrans/rng.hpp"

namespace corrtrans {

struct ExperimentGrid {
  ModelKind model = ModelKind::bvn;
  std::vector<double> alphas;
  std::vector<double> rhos;
  std::vector<long long> ns;
  long long N = 100000;  // samples per cell per worker
  int K = 12;            // workers per cell
  std::uint64_t master_seed = 0;
  std::vector<TransformKind> transforms{TransformKind::identity, TransformKind::fisher, TransformKind::optimal};

  void validate() const {
    if (N < 1) throw DomainError("ExperimentGrid: N must be >= 1");
    if (K < 1) throw DomainError("ExperimentGrid: K must be >= 1");
    for (double a : alphas)
      if (!(a > 0.0 && a < 0.5)) throw DomainError("ExperimentGrid: every alpha must lie in (0, 0.5)");
    for (double r : rhos)
      if (!(r >= 0.0 && r < 1.0)) throw DomainError("ExperimentGrid: every rho must lie in [0, 1)");
    for (long long n : ns)
      if (n < 2) throw DomainError("ExperimentGrid: every n must be >= 2");
  }

  [[nodiscard]] std::size_t cell_count() const { return alphas.size() * rhos.size() * ns.size(); }
};

struct GridCell {
  double alpha;
  double rho;
  long long n;
};

/// Cells in (alpha, rho, n) lexicographic order; the position is the cell index
/// used for seed derivation.
inline std::vector<GridCell> enumerate_cells(const ExperimentGrid& grid) {
  std::vector<GridCell> cells;
  cells.reserve(grid.cell_count());
  for (double a : grid.alphas)
    for (double r : grid.rhos)
      for (long long n : grid.ns) cells.push_back({a, r, n});
  return cells;
}

/// Replicate summary: eps_k = alpha_hat_k / alpha - 1, mean, sample sd
/// (divisor K - 1) and se = sd / sqrt(K). sd and se are empty when K = 1.
struct CellResult {
  std::vector<double> alpha_hats;
  double eps_mean = 0.0;
  std::optional<double> eps_sd;
  std::optional<double> eps_se;
  double alpha_hat_mean = 0.0;
};

inline CellResult aggregate(std::span<const double> alpha_hats, double alpha) {
  if (alpha_hats.empty()) throw DomainError("aggregate: at least one replicate required");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("aggregate: alpha must lie in (0, 1)");
  CellResult out;
  out.alpha_hats.assign(alpha_hats.begin(), alpha_hats.end());
  // Welford's update keeps the spread of identical replicates exactly zero.
  double mean = 0.0;
  double m2 = 0.0;
  double hat_sum = 0.0;
  double k = 0.0;
  for (double a : alpha_hats) {
    if (!(a >= 0.0 && a <= 1.0)) throw DomainError("aggregate: alpha_hat outside [0, 1]");
    const double eps = a / alpha - 1.0;
    k += 1.0;
    const double d = eps - mean;
    mean += d / k;
    m2 += d * (eps - mean);
    hat_sum += a;
  }
  out.eps_mean = mean;
  out.alpha_hat_mean = hat_sum / k;
  if (alpha_hats.size() >= 2) {
    out.eps_sd = std::sqrt(m2 / (k - 1.0));
    out.eps_se = *out.eps_sd / std::sqrt(k);
  }
  return out;
}

namespace detail {

template <typename Draw, typename Rng>
std::vector<double> rejection_rates(const Draw& draw, std::span<const TauStatistic> stats, double z_alpha,
                                    long long n, long long N, Rng& g) {
  std::vector<long long> hits(stats.size(), 0);
  for (long long s = 0; s < N; ++s) {
    PearsonSums sums;
    for (long long i = 0; i < n; ++i) {
      const SamplePair p = draw(g);
      sums.add(p.y, p.z);
    }
    const double r = sums.r();
    for (std::size_t k = 0; k < stats.size(); ++k) {
      if (stats[k](r) > z_alpha) ++hits[k];
    }
  }
  std::vector<double> rates(stats.size());
  for (std::size_t k = 0; k < stats.size(); ++k) rates[k] = static_cast<double>(hits[k]) / static_cast<double>(N);
  return rates;
}

}  // namespace detail

/// Rejection frequencies of several transforms evaluated on the same N
/// samples of size n: fraction of samples with tau > z_alpha (strictly).
template <typename Rng>
std::vector<double> run_cell_multi(const DependenceModel& model, std::span<const Transform> transforms, double alpha,
                                   double rho, long long n, long long N, Rng& g) {
  if (N < 1) throw DomainError("run_cell: N must be >= 1");
  if (n < 2) throw DomainError("run_cell: n must be >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("run_cell: alpha must lie in (0, 1)");
  const double z_alpha = normal_quantile(1.0 - alpha);
  const double sigma = sigma_rho(model.moments, rho);
  std::vector<TauStatistic> stats;
  stats.reserve(transforms.size());
  for (const auto& t : transforms) stats.emplace_back(t, rho, sigma, n);
  if (model.kind == ModelKind::bvn) return detail::rejection_rates(BvnDraw(rho), stats, z_alpha, n, N, g);
  return detail::rejection_rates(SquareVDraw(rho), stats, z_alpha, n, N, g);
}

template <typename Rng>
double run_cell(const DependenceModel& model, const Transform& t, double alpha, double rho, long long n, long long N,
                Rng& g) {
  return run_cell_multi(model, std::span<const Transform>(&t, 1), alpha, rho, n, N, g).front();
}

/// Edgeworth prediction of the relative error P(tau > z_alpha)/alpha - 1,
/// i.e. -Delta(z_alpha) / (alpha sqrt(n)); optimal transforms use z_ref = z_alpha.
inline double predicted_relative_error(ModelKind model, TransformKind kind, double alpha, double rho, long long n) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("predicted_relative_error: alpha must lie in (0, 1)");
  if (n < 1) throw DomainError("predicted_relative_error: n must be >= 1");
  const double z_alpha = normal_quantile(1.0 - alpha);
  // + 0.0 folds a negative zero into +0.
  return -delta_closed(model, kind, z_alpha, rho, z_alpha) / (alpha * std::sqrt(static_cast<double>(n))) + 0.0;
}

struct GridRow {
  TransformKind transform;
  GridCell cell;
  CellResult result;
};

struct GridTable {
  ModelKind model = ModelKind::bvn;
  long long N = 0;
  int K = 0;
  std::uint64_t master_seed = 0;
  std::vector<GridRow> rows;
};

/// Worker-pool width: CORRTRANS_THREADS if set to a positive integer,
/// otherwise the hardware concurrency.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("CORRTRANS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs every (cell, worker) task on a pool of `threads` workers. Rows are
/// ordered by cell, then by the grid's transform order.
inline GridTable run_grid(const ExperimentGrid& grid, unsigned threads = default_thread_count()) {
  grid.validate();
  const DependenceModel model = make_model(grid.model);
  const std::vector<GridCell> cells = enumerate_cells(grid);
  const std::size_t K = static_cast<std::size_t>(grid.K);
  const std::size_t T = grid.transforms.size();

  std::vector<std::vector<Transform>> cell_transforms(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const double z_alpha = normal_quantile(1.0 - cells[c].alpha);
    for (TransformKind kind : grid.transforms) cell_transforms[c].push_back(make_transform(model, kind, z_alpha));
  }

  // rates[(c * K + k) * T + t]
  std::vector<double> rates(cells.size() * K * T, 0.0);
  const std::size_t tasks = cells.size() * K;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto work = [&] {
    for (;;) {
      const std::size_t task = next.fetch_add(1);
      if (task >= tasks || failed.load()) return;
      const std::size_t c = task / K;
      const std::size_t k = task % K;
      const GridCell& cell = cells[c];
      try {
        Xoshiro256pp g(derive_seed(grid.master_seed, c, k));
        const auto r = run_cell_multi(model, std::span<const Transform>(cell_transforms[c]), cell.alpha, cell.rho,
                                      cell.n, grid.N, g);
        std::copy(r.begin(), r.end(), rates.begin() + static_cast<std::ptrdiff_t>(task * T));
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (!first_error) {
          first_error = std::make_exception_ptr(NumericError(
              "cell (alpha=" + std::to_string(cell.alpha) + ", rho=" + std::to_string(cell.rho) +
              ", n=" + std::to_string(cell.n) + ", worker=" + std::to_string(k) + "): " + e.what()));
        }
        failed.store(true);
      }
    }
  };

  const unsigned width = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(tasks, 1)));
  if (width <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(width);
    for (unsigned i = 0; i < width; ++i) pool.emplace_back(work);
  }
  if (first_error) std::rethrow_exception(first_error);

  GridTable table{grid.model, grid.N, grid.K, grid.master_seed, {}};
  table.rows.reserve(cells.size() * T);
  std::vector<double> hats(K);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t k = 0; k < K; ++k) hats[k] = rates[(c * K + k) * T + t];
      table.rows.push_back({grid.transforms[t], cells[c], aggregate(hats, cells[c].alpha)});
    }
  }
  return table;
}

}  // namespace corrtrans
