#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kwsa/error.hpp"
#include "kwsa/objective.hpp"
#include "kwsa/random.hpp"

namespace kwsa {

/// Power-law weights, k counted from 0:
///   alpha_k = alpha0 / (k+1)          innovation (gradient) step
///   beta_k  = beta0 / (k+1)^tau       consensus weight
///   c_k     = c0 / (k+1)^delta        finite-difference spacing
struct WeightSchedule {
  double alpha0 = 1.0;
  double beta0 = 1.0 / 7.0;
  double c0 = 1.0;
  double delta = 0.25;
  double tau = 0.5;
};

struct ScheduleValues {
  double alpha;
  double beta;
  double c;
};

inline ScheduleValues schedule_values(const WeightSchedule& s, std::uint64_t k) {
  const double t = static_cast<double>(k) + 1.0;
  return {s.alpha0 / t, s.beta0 / std::pow(t, s.tau), s.c0 / std::pow(t, s.delta)};
}

/// Outcome of checking a schedule against the step-size conditions. Empty
/// `violations` means the schedule is admissible.
struct ScheduleReport {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
  explicit operator bool() const noexcept { return ok(); }

  std::string message() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v;
    }
    return out;
  }
};

/// Requires delta in (0, 1/2) (so sum alpha_k^2 / c_k^2 converges), tau in
/// (0, 1), positive gains, and mu * alpha0 < 1.
inline ScheduleReport validate_schedule(const WeightSchedule& s, double mu) {
  ScheduleReport r;
  if (!(s.alpha0 > 0.0 && s.beta0 > 0.0 && s.c0 > 0.0))
    r.violations.emplace_back("alpha0, beta0 and c0 must be positive");
  if (!(s.delta > 0.0)) r.violations.emplace_back("delta must be positive");
  if (!(s.delta < 0.5))
    r.violations.emplace_back("summability violated: sum alpha_k^2/c_k^2 diverges (2 - 2*delta = " +
                              format_double(2.0 - 2.0 * s.delta) + " <= 1)");
  if (!(s.tau > 0.0 && s.tau < 1.0)) r.violations.emplace_back("tau must lie in (0, 1)");
  if (!(mu * s.alpha0 < 1.0))
    r.violations.emplace_back("step condition violated: mu * alpha0 = " + format_double(mu * s.alpha0) + " >= 1");
  return r;
}

/// Anything answering noisy value queries.
template <class O>
concept ValueOracle = requires(O& o, const Vector& x, RandomStream& rng) {
  { o.dimension() } -> std::convertible_to<std::size_t>;
  { o.query(x, rng) } -> std::convertible_to<double>;
};

struct KWGradientEstimate {
  Vector value;
  double spacing_used;
  std::uint64_t queries_made;
};

/// Two-point Kiefer-Wolfowitz gradient estimate
///   g_j = (f^(x + c e_j) - f^(x - c e_j)) / (2c),
/// querying dimension by dimension, plus point before minus point.
template <ValueOracle O>
KWGradientEstimate kw_gradient(O& oracle, const Vector& x, double c, RandomStream& rng) {
  if (!(c > 0.0)) throw InvalidSpacing(c);
  const std::size_t d = oracle.dimension();
  detail::check_dim(d, x.size(), "kw_gradient");
  KWGradientEstimate est{Vector(x.size()), c, 0};
  Vector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe(j) = x(j) + c;
    const double plus = oracle.query(probe, rng);
    probe(j) = x(j) - c;
    const double minus = oracle.query(probe, rng);
    probe(j) = x(j);
    est.value(j) = (plus - minus) / (2.0 * c);
  }
  est.queries_made = 2 * d;
  return est;
}

}  // namespace kwsa
