#pragma once

// Local objectives f_i, the noisy zeroth-order oracle wrapped around them,
// the synthetic logistic-regression instance, and a deterministic solver for
// the minimiser of the sum.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "kwsa/error.hpp"
#include "kwsa/graph.hpp"
#include "kwsa/random.hpp"
#include "kwsa/text.hpp"

namespace kwsa {

/// Anything that exposes a dimension and an exact value.
template <class F>
concept Objective = requires(const F& f, const Vector& x) {
  { f.dimension() } -> std::convertible_to<std::size_t>;
  { f.value(x) } -> std::convertible_to<double>;
};

/// Hessian bounds mu * I <= H <= lip * I.
struct CurvatureBounds {
  double mu;
  double lip;
};

namespace detail {

inline void check_dim(std::size_t expected, Eigen::Index got, const char* where) {
  if (static_cast<std::size_t>(got) != expected)
    throw DimensionMismatch(expected, static_cast<std::size_t>(got), where);
}

/// log(1 + exp(t)) without overflow.
inline double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

/// 1 / (1 + exp(-t)).
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace detail

/// f(x) = 1/2 x'Ax - b'x with A symmetric positive definite.
class QuadraticObjective {
 public:
  QuadraticObjective(Matrix a, Vector b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() != a_.cols()) throw InvariantViolation("quadratic: A must be square");
    detail::check_dim(static_cast<std::size_t>(a_.rows()), b_.size(), "quadratic b");
    const Vector ev = symmetric_eigenvalues(a_);
    if (!(ev(0) > 0.0)) throw InvariantViolation("quadratic: A must be positive definite");
    bounds_ = {ev(0), ev(ev.size() - 1)};
  }

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(b_.size()); }
  const Matrix& a() const noexcept { return a_; }
  const Vector& b() const noexcept { return b_; }

  double value(const Vector& x) const {
    detail::check_dim(dimension(), x.size(), "quadratic value");
    return 0.5 * x.dot(a_ * x) - b_.dot(x);
  }

  Vector gradient(const Vector& x) const {
    detail::check_dim(dimension(), x.size(), "quadratic gradient");
    return a_ * x - b_;
  }

  Matrix hessian(const Vector& x) const {
    detail::check_dim(dimension(), x.size(), "quadratic hessian");
    return a_;
  }

  CurvatureBounds bounds() const noexcept { return bounds_; }

 private:
  Matrix a_;
  Vector b_;
  CurvatureBounds bounds_{};
};

/// l2-regularised logistic loss over n local datapoints:
///   f(x) = sum_j log(1 + exp(-b_j (w'a_j + x0))) + kappa/2 |x|^2
/// where x = (w, x0), the intercept x0 being the last coordinate.
class LogisticObjective {
 public:
  LogisticObjective(Matrix features, Vector labels, double kappa)
      : features_(std::move(features)), labels_(std::move(labels)), kappa_(kappa) {
    if (!(kappa_ > 0.0)) throw InvariantViolation("logistic: kappa must be positive");
    if (features_.rows() == 0) throw InvariantViolation("logistic: need at least one datapoint");
    detail::check_dim(static_cast<std::size_t>(features_.rows()), labels_.size(), "logistic labels");
    for (Eigen::Index j = 0; j < labels_.size(); ++j)
      if (labels_(j) != 1.0 && labels_(j) != -1.0) throw InvariantViolation("logistic: labels must be +1 or -1");
    // Augmented design rows (a_j, 1); the loss Hessian is bounded by Gram / 4.
    Matrix aug(features_.rows(), features_.cols() + 1);
    aug << features_, Matrix::Ones(features_.rows(), 1);
    const Vector ev = symmetric_eigenvalues(aug.transpose() * aug);
    bounds_ = {kappa_, kappa_ + 0.25 * ev(ev.size() - 1)};
  }

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(features_.cols()) + 1; }
  std::size_t num_points() const noexcept { return static_cast<std::size_t>(features_.rows()); }
  const Matrix& features() const noexcept { return features_; }
  const Vector& labels() const noexcept { return labels_; }
  double kappa() const noexcept { return kappa_; }

  double value(const Vector& x) const {
    detail::check_dim(dimension(), x.size(), "logistic value");
    const auto w = x.head(features_.cols());
    const double x0 = x(x.size() - 1);
    double loss = 0.0;
    for (Eigen::Index j = 0; j < features_.rows(); ++j) {
      const double margin = features_.row(j).dot(w) + x0;
      loss += detail::softplus(-labels_(j) * margin);
    }
    return loss + 0.5 * kappa_ * x.squaredNorm();
  }

  Vector gradient(const Vector& x) const {
    detail::check_dim(dimension(), x.size(), "logistic gradient");
    Vector g = kappa_ * x;
    for (Eigen::Index j = 0; j < features_.rows(); ++j) add_loss_gradient(x, j, 1.0, g);
    return g;
  }

  /// Unbiased single-datapoint estimate of the gradient:
  /// n * grad(loss_j) + kappa * x, with j a uniformly drawn index.
  Vector sample_gradient(const Vector& x, std::size_t j) const {
    detail::check_dim(dimension(), x.size(), "logistic sample gradient");
    Vector g = kappa_ * x;
    add_loss_gradient(x, static_cast<Eigen::Index>(j), static_cast<double>(num_points()), g);
    return g;
  }

  Matrix hessian(const Vector& x) const {
    detail::check_dim(dimension(), x.size(), "logistic hessian");
    const auto p = features_.cols();
    Matrix h = kappa_ * Matrix::Identity(p + 1, p + 1);
    Vector row(p + 1);
    for (Eigen::Index j = 0; j < features_.rows(); ++j) {
      row << features_.row(j).transpose(), 1.0;
      const double s = detail::sigmoid(row.head(p).dot(x.head(p)) + x(p));
      h.noalias() += s * (1.0 - s) * row * row.transpose();
    }
    return h;
  }

  CurvatureBounds bounds() const noexcept { return bounds_; }

 private:
  void add_loss_gradient(const Vector& x, Eigen::Index j, double scale, Vector& g) const {
    const auto w = x.head(features_.cols());
    const double b = labels_(j);
    const double margin = features_.row(j).dot(w) + x(x.size() - 1);
    const double s = -b * detail::sigmoid(-b * margin) * scale;
    g.head(features_.cols()) += s * features_.row(j).transpose();
    g(g.size() - 1) += s;
  }

  Matrix features_;
  Vector labels_;
  double kappa_;
  CurvatureBounds bounds_{};
};

/// Closed set of local objective kinds used by the simulator.
class LocalObjective {
 public:
  enum class Kind { quadratic, logistic_l2 };

  LocalObjective(QuadraticObjective q) : impl_(std::move(q)) {}  // NOLINT(implicit)
  LocalObjective(LogisticObjective l) : impl_(std::move(l)) {}   // NOLINT(implicit)

  Kind kind() const noexcept { return impl_.index() == 0 ? Kind::quadratic : Kind::logistic_l2; }

  std::size_t dimension() const {
    return std::visit([](const auto& f) { return f.dimension(); }, impl_);
  }
  double value(const Vector& x) const {
    return std::visit([&](const auto& f) { return f.value(x); }, impl_);
  }
  Vector gradient(const Vector& x) const {
    return std::visit([&](const auto& f) { return f.gradient(x); }, impl_);
  }
  Matrix hessian(const Vector& x) const {
    return std::visit([&](const auto& f) { return f.hessian(x); }, impl_);
  }
  CurvatureBounds bounds() const {
    return std::visit([](const auto& f) { return f.bounds(); }, impl_);
  }

  const QuadraticObjective* as_quadratic() const { return std::get_if<QuadraticObjective>(&impl_); }
  const LogisticObjective* as_logistic() const { return std::get_if<LogisticObjective>(&impl_); }

 private:
  std::variant<QuadraticObjective, LogisticObjective> impl_;
};

inline double evaluate(const LocalObjective& f, const Vector& x) { return f.value(x); }
inline Vector gradient(const LocalObjective& f, const Vector& x) { return f.gradient(x); }
inline CurvatureBounds strong_convexity_bounds(const LocalObjective& f) { return f.bounds(); }

/// Sum of local objectives, used by the fusion-centre baselines.
class SumObjective {
 public:
  explicit SumObjective(const std::vector<LocalObjective>& parts) : parts_(&parts) {
    if (parts.empty()) throw InvariantViolation("sum objective needs at least one term");
    for (const auto& p : parts)
      if (p.dimension() != parts.front().dimension())
        throw DimensionMismatch(parts.front().dimension(), p.dimension(), "sum objective");
  }

  std::size_t dimension() const { return parts_->front().dimension(); }

  double value(const Vector& x) const {
    double s = 0.0;
    for (const auto& p : *parts_) s += p.value(x);
    return s;
  }

  Vector gradient(const Vector& x) const {
    Vector g = Vector::Zero(x.size());
    for (const auto& p : *parts_) g += p.gradient(x);
    return g;
  }

  Matrix hessian(const Vector& x) const {
    Matrix h = Matrix::Zero(x.size(), x.size());
    for (const auto& p : *parts_) h += p.hessian(x);
    return h;
  }

 private:
  const std::vector<LocalObjective>* parts_;
};

/// Additive oracle noise. For state_scaled_gaussian the variance at query
/// point x is c_f |x|^2 + sigma^2; gaussian_iid ignores the state.
struct NoiseModel {
  enum class Kind { gaussian_iid, state_scaled_gaussian };

  Kind kind = Kind::gaussian_iid;
  double sigma = 1.0;
  double c_f = 0.0;

  static NoiseModel none() { return {Kind::gaussian_iid, 0.0, 0.0}; }
  static NoiseModel gaussian(double sigma) { return {Kind::gaussian_iid, sigma, 0.0}; }
  static NoiseModel state_scaled(double sigma, double c_f) { return {Kind::state_scaled_gaussian, sigma, c_f}; }

  void validate() const {
    if (!(sigma >= 0.0)) throw InvariantViolation("noise sigma must be >= 0");
    if (!(c_f >= 0.0)) throw InvariantViolation("noise c_f must be >= 0");
  }

  double variance_at(const Vector& x) const {
    return kind == Kind::state_scaled_gaussian ? c_f * x.squaredNorm() + sigma * sigma : sigma * sigma;
  }

  /// Zero-variance models consume nothing from the stream.
  double draw(const Vector& x, RandomStream& rng) const {
    const double var = variance_at(x);
    return var > 0.0 ? std::sqrt(var) * rng.normal() : 0.0;
  }
};

/// Noisy value oracle: query(x) = f(x) + noise. Counts its calls.
template <Objective F = LocalObjective>
class ZerothOrderOracle {
 public:
  ZerothOrderOracle(const F& objective, NoiseModel noise) : objective_(&objective), noise_(noise) {
    noise_.validate();
  }

  std::size_t dimension() const { return objective_->dimension(); }
  const F& objective() const noexcept { return *objective_; }
  const NoiseModel& noise() const noexcept { return noise_; }
  std::uint64_t query_count() const noexcept { return queries_; }

  double query(const Vector& x, RandomStream& rng) {
    detail::check_dim(dimension(), x.size(), "oracle query");
    ++queries_;
    return objective_->value(x) + noise_.draw(x, rng);
  }

 private:
  const F* objective_;
  NoiseModel noise_;
  std::uint64_t queries_ = 0;
};

template <Objective F>
ZerothOrderOracle(const F&, NoiseModel) -> ZerothOrderOracle<F>;

struct DatasetSpec {
  std::size_t num_nodes = 10;
  std::size_t points_per_node = 10;
  std::size_t feature_dim = 4;
  double kappa = 0.3;

  std::size_t dimension() const noexcept { return feature_dim + 1; }

  void validate() const {
    if (num_nodes == 0 || points_per_node == 0 || feature_dim == 0 || !(kappa > 0.0))
      throw InvariantViolation("dataset spec: num_nodes, points_per_node, feature_dim and kappa must be positive");
  }
};

/// Synthetic classification data with node-dependent feature distributions.
///
/// A hidden separator x' ~ N(0, I_d) is drawn first. At node i (1-based) each
/// feature entry is N(0,1) + U[0, 5i]; labels are sign(x1'a + x0' + eps) with
/// eps ~ N(0,1) and a zero argument mapped to +1.
inline std::vector<LocalObjective> generate_dataset(const DatasetSpec& spec, RandomStream& rng) {
  spec.validate();
  const auto p = static_cast<Eigen::Index>(spec.feature_dim);
  const auto n = static_cast<Eigen::Index>(spec.points_per_node);
  Vector hidden(p + 1);
  for (Eigen::Index j = 0; j <= p; ++j) hidden(j) = rng.normal();

  std::vector<LocalObjective> out;
  out.reserve(spec.num_nodes);
  for (std::size_t node = 1; node <= spec.num_nodes; ++node) {
    const double support = 5.0 * static_cast<double>(node);
    Matrix features(n, p);
    Vector labels(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index f = 0; f < p; ++f) {
        const double gauss = rng.normal();
        features(j, f) = gauss + rng.uniform(0.0, support);
      }
      const double arg = features.row(j).dot(hidden.head(p)) + hidden(p) + rng.normal();
      labels(j) = arg >= 0.0 ? 1.0 : -1.0;
    }
    out.emplace_back(LogisticObjective(std::move(features), std::move(labels), spec.kappa));
  }
  return out;
}

inline constexpr std::size_t kGroundTruthIterationCap = 10'000'000;

/// Minimiser of sum_i f_i by damped Newton with Armijo backtracking, so the
/// sum decreases monotonically. Stops once |grad| <= tol.
inline Vector solve_ground_truth(const std::vector<LocalObjective>& objectives, double tol,
                                 const Vector* initial = nullptr) {
  if (!(tol > 0.0)) throw InvariantViolation("ground truth: tol must be positive");
  const SumObjective sum(objectives);
  Vector x = initial ? *initial : Vector::Zero(static_cast<Eigen::Index>(sum.dimension()));
  detail::check_dim(sum.dimension(), x.size(), "ground truth initial point");
  double fx = sum.value(x);
  std::size_t flat_steps = 0;
  for (std::size_t it = 0; it < kGroundTruthIterationCap; ++it) {
    const Vector g = sum.gradient(x);
    if (g.norm() <= tol) return x;
    const Vector step = sum.hessian(x).ldlt().solve(-g);
    const double slope = g.dot(step);
    double t = 1.0;
    Vector trial = x + step;
    double ft = sum.value(trial);
    while (ft > fx + 1e-4 * t * slope && t > 1e-20) {
      t *= 0.5;
      trial = x + t * step;
      ft = sum.value(trial);
    }
    if (!(ft <= fx)) break;  // no further decrease representable
    flat_steps = ft < fx ? 0 : flat_steps + 1;
    if (flat_steps > 100) break;
    x = std::move(trial);
    fx = ft;
  }
  if (sum.gradient(x).norm() <= tol) return x;
  throw ConvergenceFailure("ground truth: gradient norm above " + format_double(tol) + " (stalled or hit the " +
                           std::to_string(kGroundTruthIterationCap) + " iteration cap)");
}

/// Per-node dataset text: header "d n kappa", then "label a_1 ... a_{d-1}" rows.
inline std::string to_dataset_text(const LogisticObjective& f) {
  std::ostringstream os;
  os << f.dimension() << ' ' << f.num_points() << ' ' << format_double(f.kappa()) << '\n';
  for (Eigen::Index j = 0; j < f.features().rows(); ++j) {
    os << (f.labels()(j) > 0 ? "1" : "-1");
    for (Eigen::Index c = 0; c < f.features().cols(); ++c) os << ' ' << format_double(f.features()(j, c));
    os << '\n';
  }
  return os.str();
}

inline LogisticObjective parse_dataset_text(const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  auto next = [&](const char* what) {
    if (!(in >> tok)) throw ParseError(std::string("dataset: missing ") + what);
    return parse_double(tok, "dataset");
  };
  const double d = next("dimension");
  const double n = next("point count");
  const double kappa = next("kappa");
  if (d < 2 || n < 1 || d != std::floor(d) || n != std::floor(n))
    throw ParseError("dataset: header must be \"d n kappa\" with d >= 2, n >= 1");
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(d) - 1;
  Matrix features(rows, cols);
  Vector labels(rows);
  for (Eigen::Index j = 0; j < rows; ++j) {
    labels(j) = next("label");
    for (Eigen::Index c = 0; c < cols; ++c) features(j, c) = next("feature");
  }
  if (in >> tok) throw ParseError("dataset: trailing data");
  try {
    return LogisticObjective(std::move(features), std::move(labels), kappa);
  } catch (const InvariantViolation& e) {
    throw ParseError(std::string("dataset: ") + e.what());
  }
}

}  // namespace kwsa
