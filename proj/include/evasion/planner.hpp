#ifndef EVASION_PLANNER_HPP_
#define EVASION_PLANNER_HPP_

// The two episodic learners (piecewise-constant MLE and GP on log K), both
// driven by the same plan -> solve -> trace -> simulate -> update step, and
// the excess-risk / capture-rate metrics.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "evasion/censored_stats.hpp"
#include "evasion/eikonal.hpp"
#include "evasion/episode.hpp"
#include "evasion/gp_model.hpp"
#include "evasion/path_tracer.hpp"
#include "evasion/rng.hpp"
#include "evasion/scenario.hpp"

namespace evasion {

struct EpisodeRecord {
  double capture_probability = 0.0;  // Q_i of the planned path under the true K
  bool captured = false;             // Delta_i
  double cumulative_intensity = 0.0; // J_i
  double path_length = 0.0;
  std::optional<Point> capture_point;

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

struct EpisodeLog {
  std::string algorithm;
  std::uint64_t seed = 0;
  long long planned_episodes = 0;
  std::vector<EpisodeRecord> episodes;

  std::size_t size() const { return episodes.size(); }
};

struct MetricSeries {
  std::vector<double> excess_risk;   // R_j
  std::vector<double> capture_rate;  // S_j
  double optimal = 0.0;              // Q*
};

struct HyperLogEntry {
  long long episode = 0;
  GpHyper hyper;
  double lml = 0.0;
};

/// Final state of an Alg-PC run. `failure` is set when a numerical error
/// stopped the loop early; the log then holds the completed episodes.
struct PcRun {
  EpisodeLog log;
  CellStats stats;
  Trajectory last_path;
  std::optional<std::string> failure;
};

struct GpRun {
  EpisodeLog log;
  GpPosterior posterior;
  GpHyper hyper;
  CellStats stats;
  std::vector<HyperLogEntry> hyper_log;
  Trajectory last_path;
  std::optional<std::string> failure;
};

/// Called after every episode with its 1-based index; for progress output.
using EpisodeCallback = std::function<void(long long episode)>;

/// Q* = 1 - exp(-u(x0)) with u solved under the true intensity.
inline double optimal_capture_prob(const ScalarField& true_intensity, const ScalarField& speed,
                                   Point x0) {
  const ScalarField u = solve_eikonal(speed, true_intensity);
  return 1.0 - std::exp(-interpolate(u, x0));
}

inline double optimal_capture_prob(const Scenario& s) {
  const ScalarField k = build_intensity(s);
  return optimal_capture_prob(k, ScalarField(k.grid(), s.speed), s.start);
}

inline MetricSeries compute_metrics(const EpisodeLog& log, double q_star) {
  detail::require(log.size() > 0, "compute_metrics: empty log");
  MetricSeries m;
  m.optimal = q_star;
  m.excess_risk.reserve(log.size());
  m.capture_rate.reserve(log.size());
  double excess = 0.0;
  double captures = 0.0;
  for (std::size_t j = 0; j < log.size(); ++j) {
    excess += log.episodes[j].capture_probability - q_star;
    captures += log.episodes[j].captured ? 1.0 : 0.0;
    m.excess_risk.push_back(excess / static_cast<double>(j + 1));
    m.capture_rate.push_back(captures / static_cast<double>(j + 1));
  }
  return m;
}

namespace detail {

struct EpisodeContext {
  ObsGrid obs;
  PdeGrid pde;
  ScalarField truth;
  ScalarField speed;
  Point start;
  double h_path;

  explicit EpisodeContext(const Scenario& s)
      : obs(s.obs_grid()),
        pde(s.pde_grid()),
        truth(build_intensity(s)),
        speed(pde, s.speed),
        start(s.start),
        h_path(s.path_step()) {}

  // One plan/solve/trace/simulate step against the planning field `plan`.
  EpisodeOutcome step(const ScalarField& plan, RngStream& rng, Trajectory& path) const {
    const ScalarField u = solve_eikonal(speed, plan);
    path = trace_path(u, start, h_path, &speed);
    return simulate_episode(path, truth, obs, rng);
  }
};

// Like validate(), but T = 0 is allowed: a run of zero episodes returns the
// initial state.
inline void validate_for_run(const Scenario& s) {
  Scenario checked = s;
  if (checked.episodes == 0) checked.episodes = 1;
  validate(checked);
}

inline EpisodeRecord make_record(const EpisodeOutcome& o, const Trajectory& path) {
  return {1.0 - std::exp(-o.cumulative_intensity), o.captured, o.cumulative_intensity,
          path.length(), o.capture_point};
}

}  // namespace detail

/// Piecewise-constant learner: lower-confidence MLE field, re-planned and
/// updated every episode.
inline PcRun run_alg_pc(const Scenario& s, RngStream& rng,
                        const EpisodeCallback& on_episode = {}) {
  detail::validate_for_run(s);
  const detail::EpisodeContext ctx(s);
  PcRun run;
  run.log.algorithm = "pc";
  run.log.seed = rng.seed();
  run.log.planned_episodes = s.episodes;
  run.stats = init_stats(s.epsilon, s.k_min, ctx.obs);
  PcEstimate est = mle_estimates(run.stats);

  try {
    for (long long t = 1; t <= s.episodes; ++t) {
      const ScalarField plan =
          lower_confidence_pc(est, s.episodes, s.gamma, s.k_min, ctx.obs, ctx.pde);
      const EpisodeOutcome outcome = ctx.step(plan, rng, run.last_path);
      update_stats(run.stats, outcome);
      est = mle_estimates(run.stats);
      run.log.episodes.push_back(detail::make_record(outcome, run.last_path));
      if (on_episode) on_episode(t);
    }
  } catch (const NumericalError& e) {
    run.failure = e.what();
  }
  return run;
}

/// GP learner on log K with Criteria* admission, lower-confidence planning
/// field exp(M - c rho) and periodic marginal-likelihood tuning.
inline GpRun run_alg_gp(const Scenario& s, RngStream& rng,
                        const EpisodeCallback& on_episode = {}) {
  detail::validate_for_run(s);
  const detail::EpisodeContext ctx(s);
  GpRun run;
  run.log.algorithm = "gp";
  run.log.seed = rng.seed();
  run.log.planned_episodes = s.episodes;
  run.stats = CellStats(ctx.obs);
  run.hyper = s.initial_hyper();
  GridPosterior engine(ctx.obs, ctx.pde);
  run.posterior = engine.prior(run.hyper);
  const HyperBounds bounds = HyperBounds::for_grid(ctx.obs);
  const double t_min = s.min_cell_time();

  try {
    for (long long t = 1; t <= s.episodes; ++t) {
      const ScalarField plan =
          lower_confidence_gp(run.posterior.mean, run.posterior.variance, s.episodes,
                              ctx.obs.cell_count(), s.gamma, s.bonus_uses_sqrt);
      const EpisodeOutcome outcome = ctx.step(plan, rng, run.last_path);
      update_stats(run.stats, outcome);
      run.log.episodes.push_back(detail::make_record(outcome, run.last_path));

      const GpObservations obs = select_observable(run.stats, s.n_min, t_min);
      if (!obs.empty()) {
        engine.update(obs, run.hyper, run.posterior);
        if (t > s.tune_every && t % s.tune_every == 1) {
          const TuneResult tuned = tune_hyperparameters(obs, run.hyper, bounds);
          run.hyper = tuned.hyper;
          run.hyper_log.push_back({t, tuned.hyper, tuned.lml});
        }
      }
      if (on_episode) on_episode(t);
    }
  } catch (const NumericalError& e) {
    run.failure = e.what();
  }
  return run;
}

/// Plans once on `plan` and returns the true capture probability of the path.
inline double planned_capture_prob(const Scenario& s, const ScalarField& plan,
                                   Trajectory* path_out = nullptr) {
  const ScalarField speed(plan.grid(), s.speed);
  const ScalarField u = solve_eikonal(speed, plan);
  const Trajectory path = trace_path(u, s.start, s.path_step(), &speed);
  const double j = cumulative_intensity(path, build_intensity(s));
  if (path_out) *path_out = path;
  return 1.0 - std::exp(-j);
}

namespace detail {
inline void put_real(std::ostream& os, double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  os << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
}
}  // namespace detail

/// `episode,R_j,S_j,Q_i,Delta_i`
inline void write_metrics_csv(std::ostream& os, const EpisodeLog& log, const MetricSeries& m) {
  os << "episode,R_j,S_j,Q_i,Delta_i\n";
  for (std::size_t j = 0; j < log.size(); ++j) {
    os << j + 1 << ',';
    detail::put_real(os, m.excess_risk[j]);
    os << ',';
    detail::put_real(os, m.capture_rate[j]);
    os << ',';
    detail::put_real(os, log.episodes[j].capture_probability);
    os << ',' << (log.episodes[j].captured ? 1 : 0) << '\n';
  }
}

/// `episode,captured,J,Q_i,capture_x,capture_y`, coordinates empty when not captured.
inline void write_episode_csv(std::ostream& os, const EpisodeLog& log) {
  os << "episode,captured,J,Q_i,capture_x,capture_y\n";
  for (std::size_t j = 0; j < log.size(); ++j) {
    const EpisodeRecord& r = log.episodes[j];
    os << j + 1 << ',' << (r.captured ? 1 : 0) << ',';
    detail::put_real(os, r.cumulative_intensity);
    os << ',';
    detail::put_real(os, r.capture_probability);
    os << ',';
    if (r.capture_point) {
      detail::put_real(os, r.capture_point->x);
      os << ',';
      detail::put_real(os, r.capture_point->y);
    } else {
      os << ',';
    }
    os << '\n';
  }
}

/// `episode,alpha,beta,lml`
inline void write_hyper_csv(std::ostream& os, const std::vector<HyperLogEntry>& entries) {
  os << "episode,alpha,beta,lml\n";
  for (const HyperLogEntry& e : entries) {
    os << e.episode << ',';
    detail::put_real(os, e.hyper.alpha);
    os << ',';
    detail::put_real(os, e.hyper.beta);
    os << ',';
    detail::put_real(os, e.lml);
    os << '\n';
  }
}

}  // namespace evasion

#endif  // EVASION_PLANNER_HPP_
