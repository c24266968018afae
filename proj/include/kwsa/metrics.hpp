#pragma once

// Network state and the per-iteration error metrics recorded along a run.

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "kwsa/error.hpp"
#include "kwsa/graph.hpp"

namespace kwsa {

/// Row i holds node i's iterate x_i(k).
using Iterates = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DistributedState {
  Iterates iterates;
  std::uint64_t iteration = 0;

  std::size_t num_nodes() const noexcept { return static_cast<std::size_t>(iterates.rows()); }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(iterates.cols()); }
};

/// Mean of the node iterates, summed in node order.
inline Vector network_average(const DistributedState& s) {
  Vector sum = Vector::Zero(s.iterates.cols());
  for (Eigen::Index i = 0; i < s.iterates.rows(); ++i) sum += s.iterates.row(i).transpose();
  return sum / static_cast<double>(s.iterates.rows());
}

/// (1/N) sum_i |x_i - x*|^2
inline double mse_across_nodes(const DistributedState& s, const Vector& x_star) {
  if (x_star.size() != s.iterates.cols())
    throw DimensionMismatch(s.dimension(), static_cast<std::size_t>(x_star.size()), "mse_across_nodes");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.iterates.rows(); ++i)
    acc += (s.iterates.row(i).transpose() - x_star).squaredNorm();
  return acc / static_cast<double>(s.iterates.rows());
}

/// sum_i |x_i - xbar|^2
inline double disagreement_sq(const DistributedState& s) {
  const Vector mean = network_average(s);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.iterates.rows(); ++i) acc += (s.iterates.row(i).transpose() - mean).squaredNorm();
  return acc;
}

/// |xbar - x*|^2
inline double avg_gap_sq(const DistributedState& s, const Vector& x_star) {
  if (x_star.size() != s.iterates.cols())
    throw DimensionMismatch(s.dimension(), static_cast<std::size_t>(x_star.size()), "avg_gap_sq");
  return (network_average(s) - x_star).squaredNorm();
}

struct TraceRecord {
  std::uint64_t k = 0;
  double mse = 0.0;
  double disagreement_sq = 0.0;
  double avg_gap_sq = 0.0;
  std::uint64_t queries = 0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

inline TraceRecord make_record(const DistributedState& s, const Vector& x_star, std::uint64_t queries) {
  return {s.iteration, mse_across_nodes(s, x_star), disagreement_sq(s), avg_gap_sq(s, x_star), queries};
}

/// Metric series of one run (or a run-mean), k strictly increasing.
struct RunTrace {
  std::vector<TraceRecord> records;

  friend bool operator==(const RunTrace&, const RunTrace&) = default;
};

/// Iterations at which a trace is recorded: 0, ceil(ratio^m) for m >= 0, and
/// the final iteration. Uniform density in log k keeps long traces short.
class RecordingGrid {
 public:
  explicit RecordingGrid(double ratio = 1.05) : ratio_(ratio) {
    if (!(ratio_ > 1.0)) throw InvariantViolation("recording grid ratio must exceed 1");
  }

  double ratio() const noexcept { return ratio_; }

  std::vector<std::uint64_t> points(std::uint64_t last) const {
    std::vector<std::uint64_t> out{0};
    for (double v = 1.0;; v *= ratio_) {
      const auto k = static_cast<std::uint64_t>(std::ceil(v - 1e-9));
      if (k > last) break;
      if (k > out.back()) out.push_back(k);
    }
    if (out.back() != last) out.push_back(last);
    return out;
  }

 private:
  double ratio_;
};

}  // namespace kwsa
