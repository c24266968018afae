#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "kwsa/estimator.hpp"
#include "oracles.hpp"

namespace kwsa {
namespace {

struct Cubic {
  std::size_t dimension() const { return 1; }
  double query(const Vector& x, RandomStream&) { return x(0) * x(0) * x(0); }
};

// Records the probe points it sees.
struct Recorder {
  std::size_t dim;
  std::vector<Vector> seen;
  std::size_t dimension() const { return dim; }
  double query(const Vector& x, RandomStream&) {
    seen.push_back(x);
    return 0.0;
  }
};

std::vector<LocalObjective> small_dataset(std::uint64_t seed) {
  RandomStream rng(seed);
  return generate_dataset({3, 10, 4, 0.3}, rng);
}

TEST(Schedule, Examples) {
  const WeightSchedule s{1.0, 1.0 / 7.0, 1.0, 0.25, 0.5};
  const auto w0 = schedule_values(s, 0);
  EXPECT_EQ(w0.alpha, 1.0);
  EXPECT_EQ(w0.beta, 1.0 / 7.0);
  EXPECT_EQ(w0.c, 1.0);
  const auto w15 = schedule_values(s, 15);
  EXPECT_DOUBLE_EQ(w15.alpha, 1.0 / 16);
  EXPECT_DOUBLE_EQ(w15.beta, 1.0 / 28);
  EXPECT_DOUBLE_EQ(w15.c, 0.5);
  const auto w255 = schedule_values(s, 255);
  EXPECT_DOUBLE_EQ(w255.alpha, 1.0 / 256);
  EXPECT_DOUBLE_EQ(w255.beta, 1.0 / 112);
  EXPECT_DOUBLE_EQ(w255.c, 0.25);
}

TEST(Schedule, StrictlyDecreasing) {
  const WeightSchedule s{};
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const auto a = schedule_values(s, k), b = schedule_values(s, k + 1);
    EXPECT_GT(a.alpha, b.alpha);
    EXPECT_GT(a.beta, b.beta);
    EXPECT_GT(a.c, b.c);
  }
}

TEST(Schedule, Validation) {
  EXPECT_TRUE(validate_schedule(WeightSchedule{}, 0.3).ok());

  WeightSchedule bad_delta;
  bad_delta.delta = 0.6;
  const auto r = validate_schedule(bad_delta, 0.3);
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.message().find("summability violated"), std::string::npos);

  WeightSchedule edge = bad_delta;
  edge.delta = 0.5;
  EXPECT_FALSE(validate_schedule(edge, 0.3).ok());

  const auto step = validate_schedule(WeightSchedule{}, 1.0);
  ASSERT_FALSE(step.ok());
  EXPECT_NE(step.message().find("step condition violated"), std::string::npos);

  WeightSchedule bad_tau;
  bad_tau.tau = 1.0;
  EXPECT_FALSE(validate_schedule(bad_tau, 0.3).ok());
  WeightSchedule zero_gain;
  zero_gain.beta0 = 0.0;
  EXPECT_FALSE(validate_schedule(zero_gain, 0.3).ok());
}

TEST(KWGradient, ExactOnQuadraticsWithoutNoise) {
  RandomStream rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(6);
    Matrix m(d, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    Vector b(d), x(d);
    for (auto& v : b) v = rng.normal();
    for (auto& v : x) v = rng.normal();
    const LocalObjective f = QuadraticObjective(m * m.transpose() + Matrix::Identity(d, d), b);
    ZerothOrderOracle oracle(f, NoiseModel::none());
    for (double c : {1.0, 0.1, 1e-3}) {
      const Vector g = kw_gradient(oracle, x, c, rng).value;
      const double scale = std::max(1.0, std::abs(f.value(x))) + m.squaredNorm() * c * c;
      EXPECT_LE((g - f.gradient(x)).lpNorm<Eigen::Infinity>(), 1e-12 * scale / c);
    }
  }
}

TEST(KWGradient, CubicExample) {
  Cubic f;
  RandomStream rng(1);
  Vector x(1);
  x << 1.0;
  EXPECT_NEAR(kw_gradient(f, x, 0.1, rng).value(0), 3.01, 1e-12);
}

TEST(KWGradient, ProbeOrderAndQueryCount) {
  Recorder r{3, {}};
  RandomStream rng(1);
  const Vector x = Vector::Zero(3);
  const auto est = kw_gradient(r, x, 0.5, rng);
  EXPECT_EQ(est.queries_made, 6u);
  EXPECT_EQ(est.spacing_used, 0.5);
  ASSERT_EQ(r.seen.size(), 6u);
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_EQ(r.seen[2 * j](j), 0.5);
    EXPECT_EQ(r.seen[2 * j + 1](j), -0.5);
    EXPECT_EQ(r.seen[2 * j].norm(), 0.5);
  }
}

TEST(KWGradient, CountsQueriesOnTheOracle) {
  const auto objs = small_dataset(1);
  ZerothOrderOracle oracle(objs[0], NoiseModel::gaussian(1.0));
  RandomStream rng(2);
  for (int i = 0; i < 7; ++i) kw_gradient(oracle, Vector::Zero(5), 0.3, rng);
  EXPECT_EQ(oracle.query_count(), 7u * 2 * 5);
}

TEST(KWGradient, InvalidSpacing) {
  Cubic f;
  RandomStream rng(1);
  const Vector x = Vector::Zero(1);
  EXPECT_THROW(kw_gradient(f, x, 0.0, rng), InvalidSpacing);
  EXPECT_THROW(kw_gradient(f, x, -1.0, rng), InvalidSpacing);
  EXPECT_THROW(kw_gradient(f, x, std::nan(""), rng), InvalidSpacing);
}

TEST(KWGradient, NoiseVarianceMatchesTwoQueryFormula) {
  const LocalObjective f = QuadraticObjective(Matrix::Identity(2, 2), Vector::Zero(2));
  const double sigma = 1.0, c = 0.5;
  ZerothOrderOracle oracle(f, NoiseModel::gaussian(sigma));
  RandomStream rng(12);
  const Vector x = Vector::Ones(2);
  const Vector truth = f.gradient(x);
  const int m = 50000;
  Vector sum = Vector::Zero(2), sumsq = Vector::Zero(2);
  for (int i = 0; i < m; ++i) {
    const Vector e = kw_gradient(oracle, x, c, rng).value - truth;
    sum += e;
    sumsq += e.cwiseProduct(e);
  }
  const double var = sigma * sigma / (2 * c * c);
  for (Eigen::Index j = 0; j < 2; ++j) {
    EXPECT_NEAR(sum(j) / m, 0.0, 4.0 * std::sqrt(var / m));
    EXPECT_NEAR(sumsq(j) / m, var, 0.05 * var);
  }
}

// |E g - grad f| <= c^2 * (max third derivative) / 6, coordinatewise. For
// softplus the third derivative is bounded by 1/(6 sqrt 3) < 0.1 per unit
// direction, scaled by |a_j|^3 summed over datapoints.
TEST(KWGradient, BiasShrinksQuadraticallyInSpacing) {
  const auto objs = small_dataset(3);
  RandomStream rng(4);
  for (const auto& f : objs) {
    ZerothOrderOracle oracle(f, NoiseModel::none());
    const auto& lg = *f.as_logistic();
    Vector x(f.dimension());
    for (auto& v : x) v = 0.1 * rng.normal();
    const Vector truth = f.gradient(x);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      double third = 0.0;
      for (Eigen::Index p = 0; p < lg.features().rows(); ++p) {
        const double a = j + 1 < x.size() ? lg.features()(p, j) : 1.0;
        third += 0.1 * std::abs(a * a * a);
      }
      for (double c : {0.1, 0.01, 0.001}) {
        const double bias = std::abs(kw_gradient(oracle, x, c, rng).value(j) - truth(j));
        EXPECT_LE(bias, c * c * third / 6.0 + 1e-9 / c);
      }
    }
  }
}

TEST(KWGradient, AveragedEstimateIsConsistent) {
  const auto objs = small_dataset(5);
  const LocalObjective& f = objs[1];
  ZerothOrderOracle oracle(f, NoiseModel::gaussian(1.0));
  RandomStream rng(6);
  const Vector x = Vector::Constant(5, 0.05);
  const Vector truth = f.gradient(x);
  double prev = std::numeric_limits<double>::infinity();
  for (int m : {100, 10000}) {
    const double c = 0.05;
    Vector mean = Vector::Zero(5);
    for (int i = 0; i < m; ++i) mean += kw_gradient(oracle, x, c, rng).value;
    mean /= m;
    const double err = (mean - truth).norm();
    EXPECT_LT(err, prev);
    prev = err;
  }
  // Four standard deviations of the norm of the averaged noise.
  EXPECT_LT(prev, 4.0 * std::sqrt(5.0 / (2 * 0.05 * 0.05 * 10000)));
}

}  // namespace
}  // namespace kwsa
