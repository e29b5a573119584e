#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "evasion/gp_model.hpp"
#include "evasion/rng.hpp"
#include "support/oracles.hpp"

using namespace evasion;

namespace {

const ObsGrid kObs(Domain{}, 20);

GpObservations random_observations(std::mt19937_64& gen, int n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GpObservations obs;
  for (int k = 0; k < n; ++k) {
    obs.push_back({k, 0}, {unit(gen), unit(gen)}, -2.0 + 3.0 * unit(gen), 0.01 + unit(gen));
  }
  return obs;
}

oracle::DenseGp to_oracle(const GpObservations& obs, const GpHyper& h) {
  oracle::DenseGp d;
  d.points = obs.points;
  d.values = obs.values;
  d.noise = obs.noise;
  d.alpha = h.alpha;
  d.beta = h.beta;
  d.mean = h.prior_mean;
  d.jitter = factorize(obs, h).jitter;
  return d;
}

/// Observations at cell centers, as select_observable produces them.
GpObservations cell_observations(std::mt19937_64& gen, int count) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<bool> used(kObs.cell_count(), false);
  for (int k = 0; k < count;) {
    const auto c = static_cast<std::size_t>(unit(gen) * kObs.cell_count());
    if (!used[c]) {
      used[c] = true;
      ++k;
    }
  }
  GpObservations obs;
  for (std::size_t c = 0; c < used.size(); ++c) {
    if (!used[c]) continue;
    const CellId id = kObs.from_linear(c);
    obs.push_back(id, cell_center(id, kObs), std::log(0.05 + 3.0 * unit(gen)),
                  1.0 / (1.0 + 40.0 * unit(gen)));
  }
  return obs;
}

TEST(Kernel, Examples) {
  const GpHyper h{2.5, 0.2, 0.0};
  EXPECT_DOUBLE_EQ(kernel({0.3, 0.3}, {0.3, 0.3}, h), 2.5);
  EXPECT_NEAR(kernel({0.3, 0.3}, {0.5, 0.3}, h), 2.5 * std::exp(-1.0), 1e-15);
  EXPECT_LT(kernel({0.0, 0.0}, {2.0, 0.0}, {1.0, 0.2, 0.0}), 1e-43);
}

TEST(SelectObservable, DefaultThresholds) {
  CellStats s(kObs);
  const double t_min = std::sqrt(2.0) * 0.05;
  const std::size_t a = kObs.linear({2, 3});
  s.captures[a] = 1.0;
  s.entries[a] = 20;
  s.time[a] = 0.08;
  const std::size_t b = kObs.linear({4, 3});  // G_c just below one
  s.captures[b] = 0.99;
  s.entries[b] = 50;
  s.time[b] = 1.0;
  const std::size_t c = kObs.linear({5, 3});  // too few entries
  s.captures[c] = 3.0;
  s.entries[c] = 19;
  s.time[c] = 1.0;
  const std::size_t d = kObs.linear({6, 3});  // too little time
  s.captures[d] = 3.0;
  s.entries[d] = 40;
  s.time[d] = 0.07;
  const GpObservations obs = select_observable(s, 20, t_min);
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_EQ(obs.cells[0], (CellId{2, 3}));
  EXPECT_DOUBLE_EQ(obs.values[0], std::log(1.0 / 0.08));
  EXPECT_DOUBLE_EQ(obs.noise[0], 1.0);
  EXPECT_EQ(obs.points[0], cell_center({2, 3}, kObs));
}

TEST(SelectObservable, EmptyAndContract) {
  EXPECT_TRUE(select_observable(CellStats(kObs), 20, 0.07).empty());
  EXPECT_THROW(select_observable(CellStats(kObs), 20, 0.0), ContractViolation);
}

TEST(Posterior, NoiseFreeSingleObservationInterpolates) {
  GpObservations obs;
  obs.push_back({0, 0}, {0.4, 0.6}, 1.3, 0.0);
  const GpHyper h{1.0, 0.2, -0.5};
  const auto [m, rho] = posterior(obs, h, {{0.4, 0.6}});
  EXPECT_NEAR(m[0], 1.3, 1e-8);
  EXPECT_NEAR(rho[0], 0.0, 1e-8);
}

TEST(Posterior, FarFromDataRevertsToPrior) {
  GpObservations obs;
  obs.push_back({0, 0}, {0.05, 0.05}, 2.0, 0.1);
  const GpHyper h{1.7, 0.05, -0.4};
  const auto [m, rho] = posterior(obs, h, {{0.95, 0.95}});
  EXPECT_NEAR(m[0], -0.4, 1e-12);
  EXPECT_NEAR(rho[0], 1.7, 1e-12);
}

TEST(Posterior, TwoObservationsMatchHandSolved2x2) {
  GpObservations obs;
  obs.push_back({0, 0}, {0.3, 0.4}, 0.5, 0.2);
  obs.push_back({1, 0}, {0.5, 0.45}, -1.0, 0.3);
  const GpHyper h{1.2, 0.25, -0.2};
  const double jit = factorize(obs, h).jitter;
  // Explicit 2x2 inverse.
  const double k12 = 1.2 * std::exp(-(0.04 + 0.0025) / 0.0625);
  const double a = 1.2 + 0.2 + jit, d = 1.2 + 0.3 + jit;
  const double det = a * d - k12 * k12;
  const Point x{0.42, 0.38};
  const double k1 = 1.2 * std::exp(-squared_distance(x, {0.3, 0.4}) / 0.0625);
  const double k2 = 1.2 * std::exp(-squared_distance(x, {0.5, 0.45}) / 0.0625);
  const double z1 = 0.5 + 0.2, z2 = -1.0 + 0.2;
  const double w1 = (d * z1 - k12 * z2) / det, w2 = (-k12 * z1 + a * z2) / det;
  const double m_ref = -0.2 + k1 * w1 + k2 * w2;
  const double v_ref = 1.2 - (d * k1 * k1 - 2 * k12 * k1 * k2 + a * k2 * k2) / det;
  const auto [m, rho] = posterior(obs, h, {x});
  EXPECT_NEAR(m[0], m_ref, 1e-10);
  EXPECT_NEAR(rho[0], v_ref, 1e-10);
}

TEST(Posterior, MatchesDenseOracleOnRandomInstances) {
  std::mt19937_64 gen(123);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 10;
    const GpObservations obs = random_observations(gen, n);
    const GpHyper h{0.1 + 3.0 * unit(gen), 0.05 + 0.5 * unit(gen), -1.0 + unit(gen)};
    std::vector<Point> query;
    for (int q = 0; q < 15; ++q) query.push_back({unit(gen), unit(gen)});
    const auto [m, rho] = posterior(obs, h, query);
    const oracle::DenseGp ref = to_oracle(obs, h);
    for (std::size_t q = 0; q < query.size(); ++q) {
      const auto [mr, vr] = ref.at(query[q]);
      EXPECT_NEAR(m[q], mr, 1e-10);
      EXPECT_NEAR(rho[q], std::max(vr, 0.0), 1e-10);
    }
    EXPECT_NEAR(log_marginal_likelihood(obs, h), ref.log_marginal_likelihood(), 1e-10);
  }
}

TEST(Posterior, VarianceBoundedByPrior) {
  std::mt19937_64 gen(5);
  const GpObservations obs = random_observations(gen, 8);
  const GpHyper h{0.8, 0.3, 0.0};
  std::vector<Point> query;
  for (int i = 0; i <= 10; ++i) {
    for (int j = 0; j <= 10; ++j) query.push_back({i / 10.0, j / 10.0});
  }
  const auto [m, rho] = posterior(obs, h, query);
  for (double r : rho) {
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 0.8);
  }
}

TEST(Posterior, VarianceNeverGrowsWithMoreData) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const GpHyper h{1.0, 0.2, -0.7};
  std::vector<Point> query;
  for (int q = 0; q < 100; ++q) query.push_back({unit(gen), unit(gen)});
  GpObservations obs;
  std::vector<double> prev(query.size(), h.alpha);
  for (int k = 0; k < 25; ++k) {
    obs.push_back({k, 0}, {unit(gen), unit(gen)}, unit(gen), 0.05 + unit(gen));
    const auto [m, rho] = posterior(obs, h, query);
    for (std::size_t q = 0; q < query.size(); ++q) {
      EXPECT_LE(rho[q], prev[q] + 1e-8);
      prev[q] = rho[q];
    }
  }
}

TEST(Posterior, NoiseFreeDataIsInterpolated) {
  std::mt19937_64 gen(9);
  GpObservations obs = cell_observations(gen, 12);
  for (double& s : obs.noise) s = 0.0;
  const GpHyper h{1.0, 0.15, -0.7};
  const auto [m, rho] = posterior(obs, h, obs.points);
  for (std::size_t k = 0; k < obs.size(); ++k) EXPECT_NEAR(m[k], obs.values[k], 1e-6);
}

TEST(Posterior, NotPositiveDefiniteIsIllConditioned) {
  GpObservations obs;
  obs.push_back({0, 0}, {0.5, 0.5}, 0.0, -2.0);
  EXPECT_THROW(posterior(obs, {1.0, 0.2, 0.0}, {{0.5, 0.5}}), IllConditionedError);
  EXPECT_THROW(log_marginal_likelihood(obs, {1.0, 0.2, 0.0}), IllConditionedError);
}

TEST(Posterior, DuplicateNoiseFreePointsNeedJitter) {
  GpObservations obs;
  obs.push_back({0, 0}, {0.5, 0.5}, 1.0, 0.0);
  obs.push_back({0, 0}, {0.5, 0.5}, 1.0, 0.0);
  const GramFactor f = factorize(obs, {1.0, 0.2, 0.0});
  EXPECT_GE(f.jitter, kInitialJitter);
  EXPECT_LE(f.jitter, kMaxJitter);
  const auto [m, rho] = posterior(obs, {1.0, 0.2, 0.0}, {{0.5, 0.5}});
  EXPECT_NEAR(m[0], 1.0, 1e-6);
}

TEST(LowerConfidenceGp, Examples) {
  const PdeGrid g(Domain{}, 5);
  EXPECT_DOUBLE_EQ(lower_confidence_gp(ScalarField(g, 0.0), ScalarField(g, 0.0), 15000, 400, 0.01)[3],
                   1.0);
  EXPECT_NEAR(lower_confidence_gp(ScalarField(g, std::log(2.0)), ScalarField(g, 0.0), 15000, 400,
                                  0.01)[7],
              2.0, 1e-15);
  EXPECT_NEAR(lower_confidence_gp(ScalarField(g, 0.0), ScalarField(g, 0.1), 15000, 400, 0.01)[0],
              std::exp(-0.44958248), 1e-8);
  EXPECT_NEAR(
      lower_confidence_gp(ScalarField(g, 0.0), ScalarField(g, 0.09), 15000, 400, 0.01, true)[0],
      std::exp(-0.3 * 4.4958248), 1e-8);
}

TEST(LogMarginalLikelihood, OneDimensionalExamples) {
  // alpha + noise + jitter = 1.
  GpObservations obs;
  const double jitter = kInitialJitter * 0.5;
  obs.push_back({0, 0}, {0.5, 0.5}, 0.0, 0.5 - jitter);
  EXPECT_NEAR(log_marginal_likelihood(obs, {0.5, 0.2, 0.0}), -0.918938533, 1e-9);
  obs.values[0] = 1.0;
  EXPECT_NEAR(log_marginal_likelihood(obs, {0.5, 0.2, 0.0}), -1.418938533, 1e-9);
}

TEST(LogMarginalLikelihood, ThreePointDenseOracle) {
  std::mt19937_64 gen(31);
  const GpObservations obs = random_observations(gen, 3);
  const GpHyper h{1.3, 0.22, -0.1};
  EXPECT_NEAR(log_marginal_likelihood(obs, h), to_oracle(obs, h).log_marginal_likelihood(), 1e-10);
}

TEST(TuneHyperparameters, RecoversLengthScale) {
  // Draw Z at 200 random points from a GP with alpha = 1, beta = 0.2.
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const GpHyper truth{1.0, 0.2, 0.0};
  GpObservations obs;
  for (int k = 0; k < 200; ++k) obs.push_back({k, 0}, {unit(gen), unit(gen)}, 0.0, 1e-4);
  Eigen::MatrixXd cov = gram_matrix(obs, truth);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  ASSERT_EQ(llt.info(), Eigen::Success);
  Eigen::VectorXd e(200);
  for (int k = 0; k < 200; ++k) e(k) = normal(gen);
  const Eigen::VectorXd z = llt.matrixL() * e;
  for (int k = 0; k < 200; ++k) obs.values[static_cast<std::size_t>(k)] = z(k);

  const GpHyper start{5.0, 0.6, 0.0};
  const TuneResult r = tune_hyperparameters(obs, start, HyperBounds::for_grid(kObs));
  EXPECT_GT(r.hyper.beta, 0.2 / 1.5);
  EXPECT_LT(r.hyper.beta, 0.2 * 1.5);
  EXPECT_EQ(r.hyper.prior_mean, 0.0);
  EXPECT_NEAR(r.lml, log_marginal_likelihood(obs, r.hyper), 1e-9);
}

TEST(TuneHyperparameters, SingleObservationKeepsCurrent) {
  GpObservations obs;
  obs.push_back({0, 0}, {0.5, 0.5}, 0.3, 0.5);
  const GpHyper current{1.0, 0.2, -0.7};
  const TuneResult r = tune_hyperparameters(obs, current, HyperBounds::for_grid(kObs));
  EXPECT_EQ(r.hyper, current);
}

TEST(TuneHyperparameters, NeverWorseThanCurrent) {
  std::mt19937_64 gen(44);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    const GpObservations obs = cell_observations(gen, 5 + 5 * trial);
    const GpHyper current{0.05 + 10 * unit(gen), 0.03 + unit(gen), -0.7};
    const TuneResult r = tune_hyperparameters(obs, current, HyperBounds::for_grid(kObs));
    EXPECT_GE(r.lml, log_marginal_likelihood(obs, current) - 1e-12);
    const HyperBounds b = HyperBounds::for_grid(kObs);
    if (!(r.hyper == current)) {
      EXPECT_GE(r.hyper.alpha, b.alpha_min * (1 - 1e-12));
      EXPECT_LE(r.hyper.alpha, b.alpha_max * (1 + 1e-12));
      EXPECT_GE(r.hyper.beta, b.beta_min * (1 - 1e-12));
      EXPECT_LE(r.hyper.beta, b.beta_max * (1 + 1e-12));
    }
  }
}

TEST(TuneHyperparameters, EmptyIsAContractViolation) {
  EXPECT_THROW(tune_hyperparameters({}, {}, HyperBounds::for_grid(kObs)), ContractViolation);
}

TEST(HyperBounds, FollowGrid) {
  const HyperBounds b = HyperBounds::for_grid(kObs);
  EXPECT_DOUBLE_EQ(b.beta_min, 0.025);
  EXPECT_DOUBLE_EQ(b.beta_max, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(b.alpha_min, 1e-2);
  EXPECT_DOUBLE_EQ(b.alpha_max, 1e4);
}

TEST(DeltaMethod, LogEstimateVarianceIsInverseCaptureCount) {
  RngStream rng(606);
  constexpr int kReps = 1000;
  const double k_true = 0.7;
  std::vector<double> z(kReps);
  double mean_gc = 0.0;
  for (int r = 0; r < kReps; ++r) {
    double gc = 0.0, gt = 0.0;
    for (int v = 0; v < 100; ++v) {
      const double s = rng.exponential() / k_true;
      gc += s < 1.0;
      gt += std::min(s, 1.0);
    }
    ASSERT_GE(gc, 1.0);
    z[r] = std::log(gc / gt);
    mean_gc += gc / kReps;
  }
  ASSERT_GE(mean_gc, 30.0);
  double mz = 0.0;
  for (double v : z) mz += v / kReps;
  double var = 0.0;
  for (double v : z) var += (v - mz) * (v - mz) / (kReps - 1);
  EXPECT_NEAR(var, 1.0 / mean_gc, 0.25 / mean_gc);
}

TEST(GridPosterior, MatchesGenericPosteriorOnEveryNode) {
  std::mt19937_64 gen(12);
  const PdeGrid pde(Domain{}, 101);
  GridPosterior engine(kObs, pde);
  for (int count : {1, 7, 60}) {
    const GpObservations obs = cell_observations(gen, count);
    const GpHyper h{0.5 + count / 10.0, 0.1 + count / 200.0, -0.7};
    GpPosterior out = engine.prior(h);
    engine.update(obs, h, out);
    std::vector<Point> nodes;
    for (int j = 0; j < 101; ++j) {
      for (int i = 0; i < 101; ++i) nodes.push_back(pde.node(i, j));
    }
    const auto [m, rho] = posterior(obs, h, nodes);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      ASSERT_NEAR(out.mean[k], m[k], 1e-10);
      ASSERT_NEAR(out.variance[k], rho[k], 1e-10);
    }
  }
}

TEST(GridPosterior, ReusesFactorWhenOnlyValuesChange) {
  std::mt19937_64 gen(13);
  const PdeGrid pde(Domain{}, 41);
  GridPosterior engine(kObs, pde);
  GpObservations obs = cell_observations(gen, 10);
  const GpHyper h{1.0, 0.2, -0.7};
  GpPosterior out = engine.prior(h);
  engine.update(obs, h, out);
  for (double& v : obs.values) v += 0.3;
  engine.update(obs, h, out);
  EXPECT_EQ(engine.updates(), 2u);
  EXPECT_EQ(engine.refactorizations(), 1u);
  std::vector<Point> nodes;
  for (int j = 0; j < 41; ++j) {
    for (int i = 0; i < 41; ++i) nodes.push_back(pde.node(i, j));
  }
  const auto [m, rho] = posterior(obs, h, nodes);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    EXPECT_NEAR(out.mean[k], m[k], 1e-10);
    EXPECT_NEAR(out.variance[k], rho[k], 1e-10);
  }
  obs.noise[0] *= 0.5;
  engine.update(obs, h, out);
  EXPECT_EQ(engine.refactorizations(), 2u);
}

TEST(GridPosterior, PriorIsConstantMeanAndZeroVariance) {
  const GridPosterior engine(kObs, PdeGrid(Domain{}, 11));
  const GpPosterior p = engine.prior({1.0, 0.2, -0.25});
  EXPECT_EQ(p.mean.min(), -0.25);
  EXPECT_EQ(p.mean.max(), -0.25);
  EXPECT_EQ(p.variance.max(), 0.0);
}

TEST(GpCsv, Header) {
  const GridPosterior engine(kObs, PdeGrid(Domain{}, 3));
  std::ostringstream os;
  write_gp_csv(os, engine.prior({1.0, 0.2, 0.5}));
  EXPECT_EQ(os.str().substr(0, 20), "i,j,M,rho\n0,0,0.5,0\n");
}

}  // namespace
