#pragma once

// Monte Carlo harness over link-failure probabilities, log-log rate fits,
// and the plain-text trace formats emitted by the CLI.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "kwsa/error.hpp"
#include "kwsa/metrics.hpp"
#include "kwsa/optimizer.hpp"
#include "kwsa/text.hpp"

namespace kwsa {

struct ExperimentPlan {
  explicit ExperimentPlan(AlgorithmConfig base_config) : base(std::move(base_config)) {}

  /// Template configuration; its network's p_fail is replaced per entry of p_fails.
  AlgorithmConfig base;
  std::vector<double> p_fails{0.0, 0.5, 0.7};
  std::size_t num_runs = 100;
  Vector x_star;
  /// Tail fraction of the log-k range used by rate fits.
  double window = 0.25;
  /// Optional fusion-centre baseline, averaged over the same run indices.
  std::optional<CentralizedConfig> baseline;
  RecordingGrid grid{};
  /// Keep every individual run trace in the result (memory permitting).
  bool keep_runs = false;

  void validate() const {
    if (num_runs < 1) throw InvariantViolation("plan: num_runs must be >= 1");
    if (!(window > 0.0 && window <= 1.0)) throw InvariantViolation("plan: window must lie in (0, 1]");
    if (p_fails.empty() && !baseline) throw InvariantViolation("plan: nothing to run");
    for (double p : p_fails)
      if (!(p >= 0.0 && p <= 1.0)) throw InvariantViolation("plan: p_fail must lie in [0, 1]");
    detail::check_dim(base.dimension(), x_star.size(), "plan x_star");
  }
};

struct ExperimentSeries {
  /// p_fail of the distributed series; empty for the centralized baseline.
  std::optional<double> p_fail;
  RunTrace mean;
  std::vector<RunTrace> runs;
};

struct ExperimentResult {
  std::vector<ExperimentSeries> distributed;
  std::optional<ExperimentSeries> centralized;
};

/// Arithmetic mean of each metric across runs, summed in run-index order.
/// All runs must share one recording grid.
inline RunTrace aggregate_runs(const std::vector<RunTrace>& runs) {
  if (runs.empty()) throw InvariantViolation("aggregate_runs: no runs");
  RunTrace out = runs.front();
  const double r = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    double mse = 0.0, dis = 0.0, gap = 0.0;
    for (const auto& run : runs) {
      if (run.records.size() != out.records.size() || run.records[i].k != out.records[i].k)
        throw InvariantViolation("aggregate_runs: runs use different recording grids");
      mse += run.records[i].mse;
      dis += run.records[i].disagreement_sq;
      gap += run.records[i].avg_gap_sq;
    }
    out.records[i].mse = mse / r;
    out.records[i].disagreement_sq = dis / r;
    out.records[i].avg_gap_sq = gap / r;
  }
  return out;
}

namespace detail {

/// Runs job(0..count-1) on up to `width` threads and returns results by index.
/// On failure the error of the lowest failing index is rethrown, so the
/// outcome never depends on scheduling.
template <class Job>
auto parallel_indexed(std::size_t count, std::size_t width, Job job) {
  using R = decltype(job(std::size_t{0}));
  std::vector<std::optional<R>> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        results[i].emplace(job(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  width = std::clamp<std::size_t>(width, 1, std::max<std::size_t>(count, 1));
  if (width == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(width);
    for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(count);
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

template <class RunOne>
std::vector<RunTrace> run_all(std::size_t num_runs, std::size_t width, RunOne run_one) {
  return parallel_indexed(num_runs, width, [&](std::size_t r) {
    try {
      return run_one(r);
    } catch (const DivergenceError& e) {
      throw e.with_run(r);
    }
  });
}

}  // namespace detail

/// Averages R independent runs for each p_fail (and the baseline, if any).
/// Run r uses stream key (seed, r, ...); the same run index sees the same
/// noise for every p_fail. Output is independent of parallel_width.
inline ExperimentResult monte_carlo(const ExperimentPlan& plan, std::size_t parallel_width = 1) {
  plan.validate();
  ExperimentResult result;
  for (double p : plan.p_fails) {
    AlgorithmConfig config = plan.base;
    config.network.p_fail = p;
    auto runs = detail::run_all(plan.num_runs, parallel_width, [&](std::size_t r) {
      AlgorithmConfig c = config;
      c.run = r;
      return run_distributed(c, plan.x_star, {}, plan.grid);
    });
    ExperimentSeries series{p, aggregate_runs(runs), {}};
    if (plan.keep_runs) series.runs = std::move(runs);
    result.distributed.push_back(std::move(series));
  }
  if (plan.baseline) {
    auto runs = detail::run_all(plan.num_runs, parallel_width, [&](std::size_t r) {
      CentralizedConfig c = *plan.baseline;
      c.run = r;
      return run_centralized(c, plan.x_star, {}, plan.grid);
    });
    ExperimentSeries series{std::nullopt, aggregate_runs(runs), {}};
    if (plan.keep_runs) series.runs = std::move(runs);
    result.centralized = std::move(series);
  }
  return result;
}

/// Least-squares fit of log10(value) against log10(k + 1).
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

inline constexpr std::size_t kMinRatePoints = 10;

using Series = std::vector<std::pair<std::uint64_t, double>>;

/// Points whose log10(k+1) lies in the last `window` fraction of
/// [0, log10(k_max + 1)]. With k_max = 10^4 and window 0.25 that is k >= 999.
inline Series tail_window(const Series& series, double window) {
  if (!(window > 0.0 && window <= 1.0)) throw InvariantViolation("rate window must lie in (0, 1]");
  if (series.empty()) return {};
  std::uint64_t k_max = 0;
  for (const auto& [k, v] : series) k_max = std::max(k_max, k);
  const double cut = (1.0 - window) * std::log10(static_cast<double>(k_max) + 1.0);
  Series out;
  for (const auto& p : series)
    if (std::log10(static_cast<double>(p.first) + 1.0) >= cut - 1e-12) out.push_back(p);
  return out;
}

inline RateFit estimate_rate(const Series& series, double window) {
  const Series tail = tail_window(series, window);
  if (tail.size() < kMinRatePoints)
    throw RateUndefined("rate fit needs at least " + std::to_string(kMinRatePoints) + " points in the window, got " +
                        std::to_string(tail.size()));
  double sx = 0.0, sy = 0.0;
  std::vector<double> xs, ys;
  xs.reserve(tail.size());
  ys.reserve(tail.size());
  for (const auto& [k, v] : tail) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw RateUndefined("rate fit needs positive finite values; got " + format_double(v) + " at k=" +
                          std::to_string(k));
    xs.push_back(std::log10(static_cast<double>(k) + 1.0));
    ys.push_back(std::log10(v));
    sx += xs.back();
    sy += ys.back();
  }
  const double n = static_cast<double>(xs.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw RateUndefined("rate fit needs distinct iteration indices");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += r * r;
  }
  // A flat series leaves only rounding in syy; call that a perfect fit.
  const double flat = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(my));
  fit.r_squared = syy > flat * flat * n ? 1.0 - ss_res / syy : 1.0;
  fit.points = xs.size();
  return fit;
}

enum class Metric { mse, disagreement_sq, avg_gap_sq };

inline Series metric_series(const RunTrace& trace, Metric m) {
  Series out;
  out.reserve(trace.records.size());
  for (const auto& r : trace.records) {
    const double v = m == Metric::mse ? r.mse : m == Metric::disagreement_sq ? r.disagreement_sq : r.avg_gap_sq;
    out.emplace_back(r.k, v);
  }
  return out;
}

/// Mean of the metric over the fit window (the tail level of a curve).
inline double tail_mean(const Series& series, double window) {
  const Series tail = tail_window(series, window);
  if (tail.empty()) throw RateUndefined("tail_mean: empty window");
  double s = 0.0;
  for (const auto& p : tail) s += p.second;
  return s / static_cast<double>(tail.size());
}

inline constexpr const char* kTraceHeader = "k,mse,disagreement_sq,avg_gap_sq,queries";

inline std::string to_csv(const RunTrace& trace) {
  std::ostringstream os;
  os << kTraceHeader << '\n';
  for (const auto& r : trace.records)
    os << r.k << ',' << format_double(r.mse) << ',' << format_double(r.disagreement_sq) << ','
       << format_double(r.avg_gap_sq) << ',' << r.queries << '\n';
  return os.str();
}

inline RunTrace parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trace CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw ParseError("trace CSV: expected header \"" + std::string(kTraceHeader) + "\"");
  RunTrace trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw ParseError("trace CSV line " + std::to_string(lineno) + ": expected 5 columns");
    const std::string where = "trace CSV line " + std::to_string(lineno);
    auto as_count = [&](const std::string& s) {
      const double v = parse_double(s, where);
      if (v < 0 || v != std::floor(v)) throw ParseError(where + ": expected a nonnegative integer");
      return static_cast<std::uint64_t>(v);
    };
    TraceRecord r;
    r.k = as_count(cells[0]);
    r.mse = parse_double(cells[1], where);
    r.disagreement_sq = parse_double(cells[2], where);
    r.avg_gap_sq = parse_double(cells[3], where);
    r.queries = as_count(cells[4]);
    if (!trace.records.empty() && r.k <= trace.records.back().k)
      throw ParseError(where + ": k must be strictly increasing");
    trace.records.push_back(r);
  }
  return trace;
}

}  // namespace kwsa
