#ifndef EVASION_EXPERIMENT_HPP_
#define EVASION_EXPERIMENT_HPP_

// Runs the selected learner(s) on a scenario and writes every artifact:
// CSV logs and snapshots plus the six SVG panels.

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "evasion/config.hpp"
#include "evasion/planner.hpp"
#include "evasion/svg.hpp"

namespace evasion {

enum class Algorithm { kPc, kGp, kBoth };

inline std::optional<Algorithm> parse_algorithm(const std::string& name) {
  if (name == "pc") return Algorithm::kPc;
  if (name == "gp") return Algorithm::kGp;
  if (name == "both") return Algorithm::kBoth;
  return std::nullopt;
}

/// Random streams: Alg-GP draws from child 0 of the scenario seed, Alg-PC
/// from child 1, whichever algorithms are selected. A `both` run therefore
/// reproduces the two single-algorithm runs exactly.
inline RngStream gp_stream(std::uint64_t seed) { return RngStream::derive(seed, 0); }
inline RngStream pc_stream(std::uint64_t seed) { return RngStream::derive(seed, 1); }

struct ExperimentResult {
  double optimal = 0.0;  // Q*
  std::optional<PcRun> pc;
  std::optional<GpRun> gp;
  std::vector<std::filesystem::path> files;

  bool failed() const { return (pc && pc->failure) || (gp && gp->failure); }
};

namespace detail {

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  template <typename Fn>
  void write(const std::string& name, Fn&& fn) {
    const std::filesystem::path p = dir_ / name;
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
    fn(os);
    os.flush();
    if (!os) throw std::runtime_error("write failed for '" + p.string() + "'");
    files_.push_back(p);
  }

  const std::vector<std::filesystem::path>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> files_;
};

struct FinalPlan {
  ScalarField field;  // planning intensity after the last update
  ScalarField value;  // u under that field
  Trajectory path;
};

inline std::optional<FinalPlan> final_plan(const Scenario& s, const ScalarField& field) {
  try {
    const ScalarField speed(field.grid(), s.speed);
    ScalarField u = solve_eikonal(speed, field);
    Trajectory path = trace_path(u, s.start, s.path_step(), &speed);
    return FinalPlan{field, std::move(u), std::move(path)};
  } catch (const NumericalError&) {
    return std::nullopt;
  }
}

inline ScalarField exp_field(const ScalarField& f) {
  ScalarField out(f.grid());
  for (std::size_t k = 0; k < f.size(); ++k) out[k] = std::exp(f[k]);
  return out;
}

inline std::vector<svg::Dot> capture_dots(const EpisodeLog& log, svg::Color color) {
  std::vector<svg::Dot> dots;
  for (const EpisodeRecord& r : log.episodes) {
    if (r.capture_point) dots.push_back({*r.capture_point, color, 1.6});
  }
  return dots;
}

}  // namespace detail

/// Runs and writes artifacts into `output_dir`. Numerical failures inside a
/// learner do not throw: the completed episodes are still written and
/// `failed()` reports the stop. A NumericalError while solving for the
/// optimum propagates after the resolved config and true intensity are
/// written. I/O problems throw std::runtime_error.
inline ExperimentResult run_experiment(const Scenario& s, Algorithm algorithm,
                                       const std::filesystem::path& output_dir,
                                       std::ostream* progress = nullptr) {
  validate(s);
  detail::ArtifactWriter out(output_dir);
  ExperimentResult result;

  const PdeGrid pde = s.pde_grid();
  const ObsGrid obs = s.obs_grid();
  const ScalarField truth = build_intensity(s);
  const ScalarField speed(pde, s.speed);
  out.write("scenario_resolved.cfg", [&](std::ostream& os) { write_scenario(os, s); });
  out.write("true_intensity.csv", [&](std::ostream& os) { write_field_csv(os, truth); });

  result.optimal = optimal_capture_prob(truth, speed, s.start);
  const std::optional<detail::FinalPlan> optimal_plan = detail::final_plan(s, truth);
  if (optimal_plan) {
    out.write("optimal_path.csv",
              [&](std::ostream& os) { write_trajectory_csv(os, optimal_plan->path); });
  }

  const auto reporter = [&](const char* name) -> EpisodeCallback {
    if (!progress) return {};
    const long long every = std::max<long long>(1, s.episodes / 10);
    return [progress, name, every, total = s.episodes](long long t) {
      if (t % every == 0 || t == total) *progress << name << ": episode " << t << '/' << total << '\n';
    };
  };

  if (algorithm != Algorithm::kPc) {
    RngStream rng = gp_stream(s.seed);
    result.gp = run_alg_gp(s, rng, reporter("gp"));
  }
  if (algorithm != Algorithm::kGp) {
    RngStream rng = pc_stream(s.seed);
    result.pc = run_alg_pc(s, rng, reporter("pc"));
  }

  std::optional<MetricSeries> gp_metrics, pc_metrics;
  std::optional<detail::FinalPlan> gp_plan, pc_plan;
  const auto write_log = [&](const std::string& tag, const EpisodeLog& log, const CellStats& stats,
                             std::optional<MetricSeries>& metrics) {
    metrics = log.size() > 0 ? compute_metrics(log, result.optimal) : MetricSeries{{}, {}, result.optimal};
    out.write("metrics_" + tag + ".csv",
              [&](std::ostream& os) { write_metrics_csv(os, log, *metrics); });
    out.write("episodes_" + tag + ".csv", [&](std::ostream& os) { write_episode_csv(os, log); });
    out.write("stats_" + tag + ".csv", [&](std::ostream& os) { write_stats_csv(os, stats); });
  };
  const auto write_plan = [&](const std::string& tag, const std::optional<detail::FinalPlan>& p) {
    if (!p) return;
    out.write("planning_field_" + tag + ".csv",
              [&](std::ostream& os) { write_field_csv(os, p->field); });
    out.write("value_" + tag + ".csv", [&](std::ostream& os) { write_field_csv(os, p->value); });
    out.write("path_" + tag + ".csv", [&](std::ostream& os) { write_trajectory_csv(os, p->path); });
  };

  if (result.gp) {
    const GpRun& run = *result.gp;
    write_log("gp", run.log, run.stats, gp_metrics);
    out.write("gp_snapshot.csv", [&](std::ostream& os) { write_gp_csv(os, run.posterior); });
    out.write("hyper_log.csv", [&](std::ostream& os) { write_hyper_csv(os, run.hyper_log); });
    gp_plan = detail::final_plan(
        s, lower_confidence_gp(run.posterior.mean, run.posterior.variance, s.episodes,
                               obs.cell_count(), s.gamma, s.bonus_uses_sqrt));
    write_plan("gp", gp_plan);
  }
  PcEstimate pc_est;
  if (result.pc) {
    const PcRun& run = *result.pc;
    write_log("pc", run.log, run.stats, pc_metrics);
    pc_est = mle_estimates(run.stats);
    pc_plan = detail::final_plan(
        s, lower_confidence_pc(pc_est, s.episodes, s.gamma, s.k_min, obs, pde));
    write_plan("pc", pc_plan);
  }

  // Panels. The learned-field panels show Alg-GP when it ran, else Alg-PC.
  const bool show_gp = result.gp.has_value();
  const std::optional<detail::FinalPlan>& plan = show_gp ? gp_plan : pc_plan;
  const svg::Color plan_color = show_gp ? svg::kBlue : svg::kGreen;
  std::vector<svg::Polyline> optimal_line;
  if (optimal_plan) {
    optimal_line.push_back({optimal_plan->path.vertices, svg::kRed, 2.0, true});
  }
  const svg::Dot start_dot{s.start, svg::kCyan, 5.0};

  {
    svg::FieldPanel p;
    p.title = "True intensity K with optimal path (dashed)";
    p.field = &truth;
    p.lines = optimal_line;
    p.dots = {start_dot};
    out.write("panel1_true_intensity.svg",
              [&](std::ostream& os) { svg::write_field_panel(os, p, s.domain); });
  }
  {
    svg::FieldPanel p;
    p.title = std::string("Level sets of u (") + (show_gp ? "Alg-GP" : "Alg-PC") +
              " final planning field)";
    if (plan) {
      p.contours = &plan->value;
      p.lines.push_back({plan->path.vertices, plan_color, 2.0, false});
    }
    for (const auto& l : optimal_line) p.lines.push_back(l);
    p.dots = {start_dot};
    out.write("panel2_value_level_sets.svg",
              [&](std::ostream& os) { svg::write_field_panel(os, p, s.domain); });
  }

  ScalarField learned(pde), spread(pde);
  if (show_gp) {
    learned = detail::exp_field(result.gp->posterior.mean);
    spread = result.gp->posterior.variance;
  } else {
    learned = prolong_cells(pc_est.intensity, obs, pde);
    spread = prolong_cells(pc_est.variance, obs, pde);
  }
  {
    svg::FieldPanel p;
    p.title = show_gp ? "exp(M), captures and final planned path"
                      : "MLE intensity, captures and final planned path";
    p.field = &learned;
    p.dots = detail::capture_dots(show_gp ? result.gp->log : result.pc->log, svg::kRed);
    if (plan) p.lines.push_back({plan->path.vertices, svg::kWhite, 2.5, false});
    p.dots.push_back(start_dot);
    out.write("panel3_learned_intensity.svg",
              [&](std::ostream& os) { svg::write_field_panel(os, p, s.domain); });
  }
  {
    svg::FieldPanel p;
    p.title = show_gp ? "Posterior variance rho of log K" : "MLE variance estimate";
    p.field = &spread;
    p.dots = {start_dot};
    out.write("panel4_uncertainty.svg",
              [&](std::ostream& os) { svg::write_field_panel(os, p, s.domain); });
  }
  {
    svg::ChartPanel c;
    c.title = "Averaged excess risk";
    c.y_label = "R_j";
    if (gp_metrics) c.series.push_back({"Alg-GP", gp_metrics->excess_risk, svg::kBlue});
    if (pc_metrics) c.series.push_back({"Alg-PC", pc_metrics->excess_risk, svg::kGreen});
    out.write("panel5_excess_risk.svg", [&](std::ostream& os) { svg::write_chart_panel(os, c); });
  }
  {
    svg::ChartPanel c;
    c.title = "Capture rate";
    c.y_label = "S_j";
    if (gp_metrics) c.series.push_back({"Alg-GP", gp_metrics->capture_rate, svg::kBlue});
    if (pc_metrics) c.series.push_back({"Alg-PC", pc_metrics->capture_rate, svg::kGreen});
    c.reference = result.optimal;
    c.reference_label = "Q*";
    out.write("panel6_capture_rate.svg", [&](std::ostream& os) { svg::write_chart_panel(os, c); });
  }

  result.files = out.files();
  return result;
}

}  // namespace evasion

#endif  // EVASION_EXPERIMENT_HPP_
