#pragma once

// Distributed consensus + innovations KWSA over randomly failing links, and
// the fusion-centre baselines it is compared against.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "kwsa/error.hpp"
#include "kwsa/estimator.hpp"
#include "kwsa/graph.hpp"
#include "kwsa/metrics.hpp"
#include "kwsa/objective.hpp"
#include "kwsa/random.hpp"

namespace kwsa {

/// Called after every iteration with the post-step state.
using Observer = std::function<void(const DistributedState&)>;

struct AlgorithmConfig {
  RandomNetworkModel network;
  std::vector<LocalObjective> objectives;
  NoiseModel noise;
  WeightSchedule schedule;
  Iterates initial_iterates;
  std::uint64_t max_iterations = 10'000;
  std::uint64_t seed = 0;
  /// Monte Carlo run index; part of every stream key.
  std::uint64_t run = 0;

  std::size_t num_nodes() const noexcept { return objectives.size(); }
  std::size_t dimension() const { return objectives.empty() ? 0 : objectives.front().dimension(); }

  /// Smallest local strong convexity modulus.
  double min_local_mu() const {
    double mu = std::numeric_limits<double>::infinity();
    for (const auto& f : objectives) mu = std::min(mu, f.bounds().mu);
    return mu;
  }

  void validate() const {
    if (objectives.empty()) throw InvariantViolation("config: no objectives");
    if (network.base_graph.num_nodes() != objectives.size())
      throw DimensionMismatch(objectives.size(), network.base_graph.num_nodes(), "config network size");
    for (const auto& f : objectives)
      if (f.dimension() != dimension()) throw DimensionMismatch(dimension(), f.dimension(), "config objective");
    if (static_cast<std::size_t>(initial_iterates.rows()) != objectives.size() ||
        static_cast<std::size_t>(initial_iterates.cols()) != dimension())
      throw InvariantViolation("config: initial iterates must be N x d");
    if (!initial_iterates.allFinite()) throw InvariantViolation("config: initial iterates must be finite");
    noise.validate();
    if (const auto report = validate_schedule(schedule, min_local_mu()); !report)
      throw InvariantViolation("config: " + report.message());
  }
};

/// x_i <- x_i - beta * sum_{j in N_i} (x_i - x_j) - alpha * g_i for every
/// node, all reading the same pre-step iterates. Neighbours are summed in
/// increasing index order. Throws DivergenceError on a non-finite row.
inline Iterates consensus_innovations_update(const Iterates& x, const Graph& net, double beta, double alpha,
                                             const Iterates& grads, std::uint64_t k) {
  Iterates next(x.rows(), x.cols());
  Eigen::RowVectorXd acc(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    acc.setZero();
    for (std::size_t j : net.neighbors(static_cast<std::size_t>(i)))
      acc += x.row(i) - x.row(static_cast<Eigen::Index>(j));
    next.row(i) = x.row(i) - beta * acc - alpha * grads.row(i);
    if (!next.row(i).allFinite()) throw DivergenceError(k, static_cast<std::size_t>(i));
  }
  return next;
}

/// One synchronous iteration k over the sampled network `net`. Node i draws
/// its oracle noise from streams[i].
template <ValueOracle O>
DistributedState distributed_step(const DistributedState& state, std::uint64_t k, const Graph& net,
                                  std::span<O> oracles, const WeightSchedule& schedule,
                                  std::span<RandomStream> streams) {
  const auto n = static_cast<std::size_t>(state.iterates.rows());
  if (net.num_nodes() != n || oracles.size() != n || streams.size() != n)
    throw InvariantViolation("distributed_step: network, oracles and streams must match the node count");
  if (!state.iterates.allFinite()) throw InvariantViolation("distributed_step: non-finite input state");
  const ScheduleValues w = schedule_values(schedule, k);
  Iterates grads(state.iterates.rows(), state.iterates.cols());
  Vector xi(state.iterates.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    xi = state.iterates.row(row).transpose();
    grads.row(row) = kw_gradient(oracles[i], xi, w.c, streams[i]).value.transpose();
  }
  return {consensus_innovations_update(state.iterates, net, w.beta, w.alpha, grads, k), k + 1};
}

/// Runs K iterations, sampling one topology per iteration from the network
/// stream and recording metrics on `grid`. Streams are keyed by (seed, run,
/// node, purpose), so observers cannot perturb the trajectory.
inline RunTrace run_distributed(const AlgorithmConfig& config, const Vector& x_star, const Observer& observer = {},
                                const RecordingGrid& grid = RecordingGrid{}) {
  config.validate();
  const std::size_t n = config.num_nodes();
  RandomStream net_rng = RandomStream::derive(config.seed, config.run, 0, StreamPurpose::network);
  std::vector<RandomStream> noise_rng;
  std::vector<ZerothOrderOracle<LocalObjective>> oracles;
  noise_rng.reserve(n);
  oracles.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    noise_rng.push_back(RandomStream::derive(config.seed, config.run, i, StreamPurpose::noise));
    oracles.emplace_back(config.objectives[i], config.noise);
  }
  auto total_queries = [&] {
    std::uint64_t q = 0;
    for (const auto& o : oracles) q += o.query_count();
    return q;
  };

  const auto points = grid.points(config.max_iterations);
  auto next_point = points.begin();
  RunTrace trace;
  trace.records.reserve(points.size());

  DistributedState state{config.initial_iterates, 0};
  if (*next_point == 0) {
    trace.records.push_back(make_record(state, x_star, 0));
    ++next_point;
  }
  for (std::uint64_t k = 0; k < config.max_iterations; ++k) {
    const Graph net = sample_network(config.network, net_rng);
    state = distributed_step(state, k, net, std::span(oracles), config.schedule, std::span(noise_rng));
    if (observer) observer(state);
    if (next_point != points.end() && *next_point == state.iteration) {
      trace.records.push_back(make_record(state, x_star, total_queries()));
      ++next_point;
    }
  }
  return trace;
}

/// Fusion-centre baselines with access to every node's objective.
///   sgd_fusion:  y <- y - (alpha_k / N) sum_i grad g_i(y; a_i(k), b_i(k)),
///                one uniformly drawn datapoint per node per iteration;
///   kwsa_fusion: y <- y - alpha_k * KW estimate of grad sum_i f_i,
///                2d noisy queries of the sum per iteration.
struct CentralizedConfig {
  enum class Mode { sgd_fusion, kwsa_fusion };

  Mode mode = Mode::kwsa_fusion;
  std::vector<LocalObjective> objectives;
  NoiseModel noise;
  WeightSchedule schedule;
  Vector initial;
  std::uint64_t max_iterations = 10'000;
  std::uint64_t seed = 0;
  std::uint64_t run = 0;

  void validate() const {
    if (objectives.empty()) throw InvariantViolation("centralized config: no objectives");
    for (const auto& f : objectives)
      if (f.dimension() != objectives.front().dimension())
        throw DimensionMismatch(objectives.front().dimension(), f.dimension(), "centralized objective");
    detail::check_dim(objectives.front().dimension(), initial.size(), "centralized initial point");
    if (!initial.allFinite()) throw InvariantViolation("centralized config: initial point must be finite");
    if (mode == Mode::sgd_fusion)
      for (const auto& f : objectives)
        if (!f.as_logistic()) throw InvariantViolation("sgd-fusion requires logistic-l2 objectives with datapoints");
    noise.validate();
    double mu = std::numeric_limits<double>::infinity();
    for (const auto& f : objectives) mu = std::min(mu, f.bounds().mu);
    if (const auto report = validate_schedule(schedule, mu); !report)
      throw InvariantViolation("centralized config: " + report.message());
  }
};

inline RunTrace run_centralized(const CentralizedConfig& config, const Vector& x_star, const Observer& observer = {},
                                const RecordingGrid& grid = RecordingGrid{}) {
  config.validate();
  const SumObjective sum(config.objectives);
  ZerothOrderOracle<SumObjective> oracle(sum, config.noise);
  RandomStream noise_rng = RandomStream::derive(config.seed, config.run, 0, StreamPurpose::noise);
  RandomStream data_rng = RandomStream::derive(config.seed, config.run, 0, StreamPurpose::data);
  const double n = static_cast<double>(config.objectives.size());

  const auto points = grid.points(config.max_iterations);
  auto next_point = points.begin();
  RunTrace trace;
  trace.records.reserve(points.size());

  DistributedState state{Iterates(1, config.initial.size()), 0};
  state.iterates.row(0) = config.initial.transpose();
  if (*next_point == 0) {
    trace.records.push_back(make_record(state, x_star, 0));
    ++next_point;
  }
  Vector y = config.initial;
  for (std::uint64_t k = 0; k < config.max_iterations; ++k) {
    const ScheduleValues w = schedule_values(config.schedule, k);
    if (config.mode == CentralizedConfig::Mode::kwsa_fusion) {
      y -= w.alpha * kw_gradient(oracle, y, w.c, noise_rng).value;
    } else {
      Vector g = Vector::Zero(y.size());
      for (const auto& f : config.objectives) {
        const auto& logistic = *f.as_logistic();
        g += logistic.sample_gradient(y, data_rng.uniform_index(logistic.num_points()));
      }
      y -= (w.alpha / n) * g;
    }
    if (!y.allFinite()) throw DivergenceError(k, 0);
    state.iterates.row(0) = y.transpose();
    state.iteration = k + 1;
    if (observer) observer(state);
    if (next_point != points.end() && *next_point == state.iteration) {
      trace.records.push_back(make_record(state, x_star, oracle.query_count()));
      ++next_point;
    }
  }
  return trace;
}

}  // namespace kwsa
