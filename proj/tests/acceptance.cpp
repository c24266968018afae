// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "kwsa/experiment.hpp"
#include "kwsa/instance.hpp"

using namespace kwsa;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Outcome& o) {
  std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

constexpr std::uint64_t kSeed = 7;
constexpr double kWindow = 0.25;

ProblemInstance reference_instance() {
  GeometricGraphSpec g;
  g.num_nodes = 10;
  g.max_degree = 7;
  return generate_instance(g, DatasetSpec{10, 10, 4, 0.3}, kSeed);
}

WeightSchedule reference_schedule() { return {1.0, 1.0 / 7.0, 1.0, 0.25, 0.5}; }

ExperimentPlan rate_plan(const ProblemInstance& inst) {
  const auto n = static_cast<Eigen::Index>(inst.objectives.size());
  const auto d = static_cast<Eigen::Index>(inst.objectives.front().dimension());
  ExperimentPlan plan{AlgorithmConfig{RandomNetworkModel{inst.graph, 0.0}, inst.objectives, NoiseModel::gaussian(1.0),
                                      reference_schedule(), Iterates::Zero(n, d), 10'000, kSeed, 0}};
  plan.p_fails = {0.0, 0.5, 0.7};
  plan.num_runs = 20;
  plan.x_star = solve_ground_truth(inst.objectives, 1e-10);
  plan.window = kWindow;
  plan.keep_runs = true;
  return plan;
}

Vector random_vector(std::size_t d, RandomStream& rng, double scale = 1.0) {
  Vector v(static_cast<Eigen::Index>(d));
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

Outcome estimator_exactness() {
  const auto start = Clock::now();
  RandomStream rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(10);
    Matrix m(d, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    const LocalObjective f =
        QuadraticObjective(m * m.transpose() / static_cast<double>(d) + Matrix::Identity(d, d), random_vector(d, rng));
    ZerothOrderOracle oracle(f, NoiseModel::none());
    const Vector x = random_vector(d, rng);
    const Vector truth = f.gradient(x);
    for (double c : {1.0, 0.1, 0.001}) {
      const Vector g = kw_gradient(oracle, x, c, rng).value;
      worst = std::max(worst, (g - truth).norm() / std::max(truth.norm(), 1e-300));
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-10 && secs < 1.0, "max relative error " + fmt("%.3g", worst) + ", " + fmt("%.3f", secs) + " s"};
}

Outcome bias_bound(const ProblemInstance& inst) {
  const auto start = Clock::now();
  RandomStream rng(202);
  double worst = 0.0;  // max over trials of |g_j - grad_j| / (c (L - mu) / 2)
  for (int trial = 0; trial < 100; ++trial) {
    const LocalObjective& f = inst.objectives[trial % inst.objectives.size()];
    ZerothOrderOracle oracle(f, NoiseModel::none());
    const auto [mu, lip] = f.bounds();
    const Vector x = random_vector(f.dimension(), rng);
    const Vector truth = f.gradient(x);
    for (double c : {0.5, 0.1}) {
      const Vector g = kw_gradient(oracle, x, c, rng).value;
      worst = std::max(worst, (g - truth).lpNorm<Eigen::Infinity>() / (c * (lip - mu) / 2.0));
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1.0 && secs < 1.0,
          "max |g_j - grad_j| / (c(L-mu)/2) = " + fmt("%.3g", worst) + ", " + fmt("%.3f", secs) + " s"};
}

Outcome consensus_conservation(const ProblemInstance& inst) {
  const auto start = Clock::now();
  const std::size_t n = inst.objectives.size();
  const std::size_t d = inst.objectives.front().dimension();
  WeightSchedule schedule = reference_schedule();
  schedule.alpha0 = 0.0;
  const RandomNetworkModel model{inst.graph, 0.3};
  RandomStream net_rng = RandomStream::derive(kSeed, 0, 0, StreamPurpose::network);
  std::vector<RandomStream> streams;
  std::vector<ZerothOrderOracle<LocalObjective>> oracles;
  for (std::size_t i = 0; i < n; ++i) {
    streams.push_back(RandomStream::derive(kSeed, 0, i, StreamPurpose::noise));
    oracles.emplace_back(inst.objectives[i], NoiseModel::gaussian(1.0));
  }
  RandomStream init_rng(303);
  DistributedState state{Iterates(n, d), 0};
  for (Eigen::Index i = 0; i < state.iterates.size(); ++i) state.iterates.data()[i] = init_rng.normal();
  const Vector initial = network_average(state);
  double drift = 0.0;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    state = distributed_step(state, k, sample_network(model, net_rng), std::span(oracles), schedule, std::span(streams));
    drift = std::max(drift, (network_average(state) - initial).lpNorm<Eigen::Infinity>());
  }
  const double secs = seconds_since(start);
  return {drift <= 1e-10 && secs < 1.0, "max drift " + fmt("%.3g", drift) + ", " + fmt("%.3f", secs) + " s"};
}

Outcome stacked_form(const ProblemInstance& inst) {
  RandomStream rng(404);
  const std::size_t n = inst.objectives.size();
  const std::size_t d = inst.objectives.front().dimension();
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Graph g = sample_network({inst.graph, rng.uniform()}, rng);
    const std::uint64_t k = rng.uniform_index(10'000);
    const auto w = schedule_values(reference_schedule(), k);
    Iterates x(n, d), grads(n, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 10 * rng.normal();
    for (Eigen::Index i = 0; i < grads.size(); ++i) grads.data()[i] = 10 * rng.normal();
    const Iterates node_wise = consensus_innovations_update(x, g, w.beta, w.alpha, grads, k);

    const Matrix mix = Matrix::Identity(n, n) - w.beta * laplacian_of(g);
    Matrix kron = Matrix::Zero(n * d, n * d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) kron.block(i * d, j * d, d, d) = mix(i, j) * Matrix::Identity(d, d);
    const Vector stacked = kron * Eigen::Map<const Vector>(x.data(), x.size()) -
                           w.alpha * Eigen::Map<const Vector>(grads.data(), grads.size());
    worst = std::max(worst, (Eigen::Map<const Vector>(node_wise.data(), node_wise.size()) - stacked)
                                .lpNorm<Eigen::Infinity>());
  }
  return {worst <= 1e-12, "max |node-wise - stacked| = " + fmt("%.3g", worst)};
}

Outcome reductions(const ProblemInstance& inst) {
  // N = 1: the consensus term vanishes and the node is the fusion centre.
  const std::vector<LocalObjective> one{inst.objectives.front()};
  const Vector x1 = solve_ground_truth(one, 1e-10);
  const AlgorithmConfig dist{RandomNetworkModel{Graph(1), 0.0}, one, NoiseModel::gaussian(1.0), reference_schedule(),
                             Iterates::Zero(1, 5), 2000, kSeed, 0};
  const CentralizedConfig cen{CentralizedConfig::Mode::kwsa_fusion, one, NoiseModel::gaussian(1.0), reference_schedule(),
                              Vector::Zero(5), 2000, kSeed, 0};
  const bool same = to_csv(run_distributed(dist, x1)) == to_csv(run_centralized(cen, x1));

  // p_fail = 1: every node descends its own objective.
  RandomStream rng(505);
  std::vector<LocalObjective> quads;
  std::vector<Vector> local;
  for (int i = 0; i < 5; ++i) {
    Matrix m(3, 3);
    for (Eigen::Index e = 0; e < m.size(); ++e) m.data()[e] = 0.3 * rng.normal();
    quads.emplace_back(QuadraticObjective(m * m.transpose() + Matrix::Identity(3, 3), random_vector(3, rng)));
    local.push_back(solve_ground_truth({quads.back()}, 1e-12));
  }
  double min_mu = 1e300;
  for (const auto& f : quads) min_mu = std::min(min_mu, f.bounds().mu);
  WeightSchedule s = reference_schedule();
  s.alpha0 = 0.9 / min_mu;
  AlgorithmConfig isolated{RandomNetworkModel{Graph::complete(5), 1.0}, quads, NoiseModel::none(), s,
                           Iterates::Zero(5, 3), 10'000, kSeed, 0};
  Iterates last;
  run_distributed(isolated, solve_ground_truth(quads, 1e-12), [&](const DistributedState& st) { last = st.iterates; });
  double worst = 0.0;
  for (Eigen::Index i = 0; i < 5; ++i)
    worst = std::max(worst, (last.row(i).transpose() - local[static_cast<std::size_t>(i)]).norm());
  return {same && worst <= 1e-2, std::string("N=1 trace ") + (same ? "bit-equal" : "DIFFERS") +
                                     "; p_fail=1 max distance to local minimiser " + fmt("%.3g", worst)};
}

}  // namespace

int main() {
  const auto start = Clock::now();
  const ProblemInstance inst = reference_instance();
  std::printf("instance: seed %llu, %zu nodes, %zu links, max degree %zu, dataset %s\n",
              static_cast<unsigned long long>(kSeed), inst.graph.num_nodes(), inst.graph.num_edges(),
              inst.graph.max_degree(), inst.dataset_hash().c_str());

  const ExperimentPlan plan = rate_plan(inst);
  const ExperimentResult result = monte_carlo(plan, 1);

  std::vector<double> mse_slopes, dis_slopes, tails;
  std::string slope_text, dis_text, tail_text;
  for (const auto& s : result.distributed) {
    mse_slopes.push_back(estimate_rate(metric_series(s.mean, Metric::mse), kWindow).slope);
    dis_slopes.push_back(estimate_rate(metric_series(s.mean, Metric::disagreement_sq), kWindow).slope);
    tails.push_back(tail_mean(metric_series(s.mean, Metric::mse), kWindow));
    const std::string p = "p=" + format_double(*s.p_fail) + " ";
    slope_text += p + fmt("%.4f", mse_slopes.back()) + "  ";
    dis_text += p + fmt("%.4f", dis_slopes.back()) + "  ";
    tail_text += p + fmt("%.5g", tails.back()) + "  ";
  }

  bool in_band = true;
  for (double s : mse_slopes) in_band = in_band && s >= -0.70 && s <= -0.35;
  report(1, "rate reproduction", {in_band, "MSE slopes " + slope_text + "band [-0.70, -0.35]"});

  const double diff = std::abs(mse_slopes[0] - mse_slopes[1]);
  const bool monotone = tails[0] <= tails[1] && tails[1] <= tails[2];
  report(2, "network independence",
         {diff <= 0.15 && monotone, "|slope(0) - slope(0.5)| = " + fmt("%.4f", diff) + "; tail MSE " + tail_text});

  bool dis_ok = true;
  for (double s : dis_slopes) dis_ok = dis_ok && s <= -0.35;
  report(3, "disagreement decay", {dis_ok, "disagreement slopes " + dis_text + "(<= -0.35)"});

  report(4, "estimator exactness", estimator_exactness());
  report(5, "bias bound", bias_bound(inst));
  report(6, "consensus conservation", consensus_conservation(inst));

  double worst = 0.0;
  const double n = static_cast<double>(inst.objectives.size());
  for (const auto& s : result.distributed)
    for (const auto& run : s.runs)
      for (const auto& r : run.records)
        worst = std::max(worst, std::abs(r.mse - (r.avg_gap_sq + r.disagreement_sq / n)) / std::max(r.mse, 1e-300));
  report(7, "pythagorean identity", {worst <= 1e-10, "max relative residual " + fmt("%.3g", worst)});

  report(8, "stacked form", stacked_form(inst));
  report(9, "reductions", reductions(inst));

  const ExperimentResult again = monte_carlo(plan, 2);
  bool identical = true;
  for (std::size_t i = 0; i < result.distributed.size(); ++i)
    identical = identical && to_csv(result.distributed[i].mean) == to_csv(again.distributed[i].mean);
  report(10, "determinism", {identical, identical ? "CSV bytes identical across executions (jobs 1 vs 2)"
                                                  : "CSV bytes differ"});

  std::printf("%d failure(s), %.1f s\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
