// sparse_bvm: dataset generation, support posteriors, diagnostics and audits
// driven by one JSON experiment config.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "sbvm/diagnostics.hpp"
#include "sbvm/error.hpp"
#include "sbvm/experiments.hpp"

namespace {

using namespace sbvm;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::string out = "sparse_bvm_out";
  bool force = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "experiment config (JSON)")->required();
  sub->add_option("--seed", c.seed, "override the data and experiment seeds");
  sub->add_option("--alpha", c.alpha, "override the temperature alpha in (0, 1]");
  sub->add_option("--out", c.out, "output directory");
  sub->add_flag("--force", c.force, "overwrite existing artifacts");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) {
    cfg.seeds.data = *c.seed;
    cfg.seeds.experiment = *c.seed;
  }
  if (c.alpha) {
    if (!(*c.alpha > 0.0 && *c.alpha <= 1.0)) throw ConfigError("--alpha must lie in (0, 1]");
    cfg.alpha = *c.alpha;
  }
  return cfg;
}

Json envelope(const ExperimentConfig& cfg, const std::string& command) {
  Json j;
  j["command"] = command;
  j["config"] = to_json(cfg);
  j["config_hash"] = config_hash(cfg);
  j["seeds"] = {{"design", cfg.seeds.design}, {"data", cfg.seeds.data}, {"experiment", cfg.seeds.experiment}};
  return j;
}

std::string metrics_text(const ExperimentConfig& cfg, const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  write_metrics_csv(os, config_hash(cfg), rows);
  return os.str();
}

void run_generate(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const Dataset d = generate_dataset(cfg);
  std::ostringstream os;
  write_dataset_csv(os, d);
  write_artifact(c.out, "dataset.csv", os.str(), c.force);
}

void run_fit(const Common& c, const std::string& mode) {
  ExperimentConfig cfg = resolve(c);
  if (!mode.empty()) cfg.mode = parse_marginal_mode(mode);
  const Dataset d = generate_dataset(cfg);
  const SasPrior prior = make_prior(cfg.prior, cfg.design.group_sizes);
  const SupportPosterior sp = support_posterior(d, prior, cfg.alpha, cfg.s_max, make_posterior_options(cfg));
  Json j = envelope(cfg, "fit");
  j["posterior"] = posterior_json(sp);
  std::vector<MetricRow> rows;
  const Support mode_support = posterior_mode_support(sp);
  rows.push_back({d.design.n(), "mode_weight", sp.weight(mode_support), 0.0});
  if (d.truth) rows.push_back({d.design.n(), "truth_support_weight", sp.weight(d.truth->support), 0.0});
  write_artifact(c.out, "posterior.json", dump_json(j), c.force);
  write_artifact(c.out, "metrics.csv", metrics_text(cfg, rows), c.force);
}

void run_diagnose(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const Dataset d = generate_dataset(cfg);
  const SasPrior prior = make_prior(cfg.prior, cfg.design.group_sizes);
  PosteriorOptions po = make_posterior_options(cfg);
  po.mode = MarginalMode::exact;
  po.center = CenterMode::posterior_mode;
  const SupportPosterior sp = support_posterior(d, prior, cfg.alpha, cfg.s_max, po);
  const SupportPosterior mix = mixture_weights(d, prior, cfg.alpha, cfg.s_max, cfg.k_dim);
  const PosteriorProblem pb(d, prior, cfg.alpha);
  TvOptions tvo;
  tvo.mc_draws = cfg.tolerances.tv_draws;
  tvo.seed = mix64(cfg.seeds.experiment ^ 0x7f);
  const TvEstimate tv = tv_between_support_mixtures(exact_mixture_law(pb, sp), gaussian_mixture_law(mix), tvo);

  DiagnosticsReport rep;
  const int n = d.design.n();
  rep.recovery_prob = sp.weight(d.require_truth().support);
  rep.tv_exact_mixture = tv.value;
  rep.tv_exact_mixture_se = tv.se;
  rep.tv_mixture_oracle = tv_mixture_vs_oracle(mix, oracle_law(d, cfg.alpha));
  std::vector<MetricRow> rows = {{n, "recovery_prob", rep.recovery_prob, 0.0},
                                 {n, "tv_exact_mixture", tv.value, tv.se},
                                 {n, "tv_mixture_oracle", rep.tv_mixture_oracle, 0.0}};

  if (!cfg.n_grid.empty()) {
    std::vector<Simulation> sims;
    for (int m : cfg.n_grid) sims.push_back(make_simulation(cfg, m));
    EngineSettings engine{cfg.s_max, make_posterior_options(cfg)};
    engine.posterior.summaries = false;
    for (const auto& r : support_recovery_experiment(sims, prior, cfg.alpha, engine, cfg.replications.recovery,
                                                     cfg.seeds.experiment)) {
      rows.push_back({r.n, "posterior_mass_true_support", r.posterior_mass, r.posterior_mass_se});
      rows.push_back({r.n, "mode_hit", r.mode_hit, r.mode_hit_se});
    }
    if (cfg.alpha < 1.0)
      for (const auto& r : oracle_collapse_experiment(sims, prior, cfg.alpha, cfg.s_max, cfg.k_dim,
                                                      cfg.replications.collapse, cfg.seeds.experiment ^ 0xc0))
        rows.push_back({r.n, "tv_mixture_oracle_mean", r.value, r.se});
    EngineSettings hel = engine;
    hel.posterior.summaries = true;
    for (const auto& r : hellinger_contraction(sims, prior, cfg.alpha, hel, ContractionOptions{},
                                               cfg.replications.contraction, cfg.seeds.experiment ^ 0x4e))
      rows.push_back({r.n, "hellinger_exceedance", r.value, r.se});
  }

  Json j = envelope(cfg, "diagnose");
  j["report"] = report_json(rep);
  j["tv_method"] = std::string(to_string(tv.method));
  write_artifact(c.out, "report.json", dump_json(j), c.force);
  write_artifact(c.out, "metrics.csv", metrics_text(cfg, rows), c.force);
}

void run_coverage(const Common& c, std::optional<double> level) {
  ExperimentConfig cfg = resolve(c);
  if (level) {
    if (!(*level > 0.0 && *level < 1.0)) throw ConfigError("--level must lie in (0, 1)");
    cfg.level = *level;
  }
  const Simulation sim = make_simulation(cfg);
  const SasPrior prior = make_prior(cfg.prior, cfg.design.group_sizes);
  EngineSettings engine{cfg.s_max, make_posterior_options(cfg)};
  engine.posterior.summaries = false;
  CoverageOptions co;
  co.level = cfg.level;
  co.credibility_draws = cfg.tolerances.credibility_draws;
  const CoverageResult res =
      coverage_experiment(sim, prior, cfg.alpha, engine, co, cfg.replications.coverage, cfg.seeds.experiment);
  DiagnosticsReport rep;
  rep.coverage = res.coverage;
  rep.coverage_se = res.se;
  Json j = envelope(cfg, "coverage");
  j["report"] = report_json(rep);
  j["coverage"] = {{"level", cfg.level},
                   {"coverage", res.coverage},
                   {"se", res.se},
                   {"credibility_gap", res.credibility_gap},
                   {"credibility_gap_se", res.gap_se},
                   {"mode_correct", res.mode_correct},
                   {"used", res.used},
                   {"excluded", res.excluded}};
  const int n = sim.design.n();
  const std::vector<MetricRow> rows = {{n, "coverage", res.coverage, res.se},
                                       {n, "credibility_gap", res.credibility_gap, res.gap_se},
                                       {n, "mode_correct", res.mode_correct, 0.0}};
  write_artifact(c.out, "report.json", dump_json(j), c.force);
  write_artifact(c.out, "metrics.csv", metrics_text(cfg, rows), c.force);
}

void run_audit(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const Simulation sim = make_simulation(cfg);
  const SasPrior prior = make_prior(cfg.prior, cfg.design.group_sizes);
  AuditOptions ao;
  ao.k_dim = cfg.k_dim;
  ao.alpha = cfg.alpha < 1.0 ? cfg.alpha : 0.5;
  ao.score_replications = cfg.replications.score;
  ao.seed = cfg.seeds.experiment;
  ao.renyi_s_max = std::min(cfg.s_max, 2);
  const DiagnosticsReport rep = assumption_audit(sim, prior, ao);
  Json j = envelope(cfg, "audit");
  j["report"] = report_json(rep);
  std::vector<MetricRow> rows;
  for (const auto& r : rep.rows) rows.push_back({sim.design.n(), r.name, r.value, 0.0});
  write_artifact(c.out, "report.json", dump_json(j), c.force);
  write_artifact(c.out, "metrics.csv", metrics_text(cfg, rows), c.force);
}

int fail(int code, const std::string& kind, const std::string& message) {
  Json err = {{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse_bvm: spike-and-slab GLM posteriors and their Gaussian approximations"};
  app.require_subcommand(1);
  Common common;
  std::string mode;
  std::optional<double> level;

  auto* gen = app.add_subcommand("generate", "simulate a dataset and write dataset.csv");
  add_common(gen, common);
  auto* fit = app.add_subcommand("fit", "support posterior; writes posterior.json and metrics.csv");
  add_common(fit, common);
  fit->add_option("--mode", mode, "marginal computation")->check(CLI::IsMember({"exact", "laplace"}));
  auto* diag = app.add_subcommand("diagnose", "TV distances and recovery; writes report.json and metrics.csv");
  add_common(diag, common);
  auto* cov = app.add_subcommand("coverage", "plug-in credible set coverage experiment");
  add_common(cov, common);
  cov->add_option("--level", level, "credible level in (0, 1)");
  auto* aud = app.add_subcommand("audit", "assumption audit table");
  add_common(aud, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(1, "usage", e.what());
  }

  try {
    if (gen->parsed()) run_generate(common);
    if (fit->parsed()) run_fit(common, mode);
    if (diag->parsed()) run_diagnose(common);
    if (cov->parsed()) run_coverage(common, level);
    if (aud->parsed()) run_audit(common);
  } catch (const ConfigError& e) {
    return fail(1, "config", e.what());
  } catch (const std::exception& e) {
    return fail(2, "runtime", e.what());
  }
  return 0;
}
