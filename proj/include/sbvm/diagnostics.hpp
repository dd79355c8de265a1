#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "sbvm/dataset.hpp"
#include "sbvm/posterior.hpp"
#include "sbvm/prior.hpp"

namespace sbvm {

// ---------------------------------------------------------------------------
// Total variation between laws on the union of coordinate subspaces.

enum class TvMethod { exact_singular_sum, per_support_quadrature, mc };
std::string_view to_string(TvMethod m);

struct TvEstimate {
  double value = 0.0;
  double se = 0.0;
  TvMethod method = TvMethod::exact_singular_sum;
};

// One component of a support mixture: weight times a normalized density on
// R^{p_S}. `mean`/`precision` describe the component when it is Gaussian and
// serve as the importance proposal otherwise.
struct ComponentLaw {
  Support support;
  double weight = 0.0;
  bool gaussian = true;
  Vector mean;
  Matrix precision;
  std::function<double(const Vector&)> log_density;
};
using MixtureLaw = std::vector<ComponentLaw>;

MixtureLaw gaussian_mixture_law(const SupportPosterior& sp);
// Exact per-support laws exp(log_integrand - log_marginal), with the
// posterior-mode Gaussian as proposal. `sp` must come from support_posterior
// with the same problem.
MixtureLaw exact_mixture_law(const PosteriorProblem& pb, const SupportPosterior& sp);

struct TvOptions {
  long mc_draws = 20000;
  std::uint64_t seed = 0x7f4a;
  // Shared supports where both weights fall below this are bounded by
  // half their summed weight instead of being integrated.
  double negligible = 1e-12;
};

TvEstimate tv_between_support_mixtures(const MixtureLaw& a, const MixtureLaw& b, const TvOptions& opt = {});
TvEstimate tv_between_support_mixtures(const SupportPosterior& a, const SupportPosterior& b,
                                       const TvOptions& opt = {});
// 1 - omega_{S0} when the S0 component of `mix` equals the oracle law to 1e-10;
// otherwise the general computation.
double tv_mixture_vs_oracle(const SupportPosterior& mix, const OracleLaw& oracle);

// ---------------------------------------------------------------------------
// Credible sets.

enum class CredibleKind { oracle, plugin };

struct CredibleSet {
  CredibleKind kind = CredibleKind::plugin;
  Support support;
  Vector center;
  Matrix precision;  // alpha-scaled
  double level = 0.95;
  double chi2_quantile = 0.0;
  // Plug-in set fell back to center 0 and precision alpha * I.
  bool fallback = false;
};

CredibleSet oracle_credible_set(const OracleLaw& law, double level);
// Plug-in set on `support`: restricted MLE with alpha-scaled observed
// information when that is p.d., else center 0 with precision alpha * I.
CredibleSet plugin_credible_set(const Dataset& data, double alpha, const Support& support, double level,
                                const NewtonOptions& opt = {});
// Uses the entry's Gaussian summary when it has one.
CredibleSet plugin_credible_set(const SupportPosterior& sp, double level);
bool contains(const GroupedDesign& design, const CredibleSet& cs, const Vector& beta);
// (b - center)^T precision (b - center) for b restricted to the set's support.
double quadratic_form(const GroupedDesign& design, const CredibleSet& cs, const Vector& beta);

// Posterior probability of the set: sum over S within the set's support of
// w_S * P_S(set), each P_S by self-normalized importance sampling of the
// exact per-support law with its posterior-mode Gaussian as proposal.
double credibility(const PosteriorProblem& pb, const SupportPosterior& sp, const CredibleSet& cs, int draws,
                   std::uint64_t seed, double min_weight = 1e-10);

// ---------------------------------------------------------------------------
// Experiments. Replicate r always uses make_stream(seed, r).

struct EngineSettings {
  int s_max = 3;
  PosteriorOptions posterior;
};

struct CoverageResult {
  double coverage = 0.0;
  double se = 0.0;
  double credibility_gap = 0.0;
  double gap_se = 0.0;
  double mode_correct = 0.0;
  int used = 0;
  int excluded = 0;
};
struct CoverageOptions {
  double level = 0.95;
  int credibility_draws = 2000;
  // Skip selection and use the true support (pivotal check).
  bool fix_support = false;
};
CoverageResult coverage_experiment(const Simulation& sim, const SasPrior& prior, double alpha,
                                   const EngineSettings& engine, const CoverageOptions& opt, int replications,
                                   std::uint64_t seed);

struct TrendRow {
  int n = 0;
  double value = 0.0;
  double se = 0.0;
  int excluded = 0;
};

struct RecoveryRow {
  int n = 0;
  double posterior_mass = 0.0;  // E Pi(S_beta = S0 | Y)
  double posterior_mass_se = 0.0;
  double mode_hit = 0.0;        // P(S_hat = S0)
  double mode_hit_se = 0.0;
  int excluded = 0;
};
std::vector<RecoveryRow> support_recovery_experiment(const std::vector<Simulation>& sims, const SasPrior& prior,
                                                     double alpha, const EngineSettings& engine, int replications,
                                                     std::uint64_t seed);

// Mean of 1 - omega_{S0} = TV(mixture, oracle) per design size.
std::vector<TrendRow> oracle_collapse_experiment(const std::vector<Simulation>& sims, const SasPrior& prior,
                                                 double alpha, int s_max, int k_dim, int replications,
                                                 std::uint64_t seed);

// Supremum of log E exp{lambda u^T Z_S} / lambda^2 over supports |S| <= s,
// unit directions u (coordinate axes plus `random_directions` random ones)
// and the grid lambda = +-window/32 * {1..32}, window = 2 sqrt(s log G).
double estimate_b_mgf(const Simulation& sim, int s, int random_directions = 8, std::uint64_t seed = 0xb3f);

inline constexpr double kKappa0 = 4.6094379124341003;  // 3 + log 5

struct ScoreEnvelopeResult {
  double exceedance = 0.0;
  double se = 0.0;
  double bound = 0.0;      // 2 G^{-2s}
  double threshold = 0.0;  // multiplier * K_sc * sqrt(s log G)
  double b_mgf = 0.0;
  double k_sc = 0.0;
  bool within_bound = false;
  std::vector<double> sup_quantiles;  // 0.5, 0.9, 0.99, max of sup_S ||Z_S||
  // Tail of ||Z_{S0}||^2 beyond the chi-square 0.99 quantile; empty when
  // |S0| exceeds s.
  double check_empirical = 0.0;
  double check_analytic = 0.0;
  double check_se = 0.0;
};
ScoreEnvelopeResult score_envelope_experiment(const Simulation& sim, int s, int replications, std::uint64_t seed,
                                              double multiplier = 1.0, double b_mgf = -1.0);

struct RenyiEntry {
  Support support;
  double r = 0.0;
  Vector minimizer;
  bool converged = true;
  double grid_r = -1.0;  // grid cross-check for p_S = 1
};
struct RenyiTable {
  int n = 0;
  double alpha = 0.0;
  double c_r = 1.0;
  std::vector<RenyiEntry> entries;  // supports not containing S0
  double summability = 0.0;         // sum exp{-nR + C_R p_S + C_R (s0 + |S|) log G}
};
struct RenyiOptions {
  int restarts = 16;
  double c_r = 1.0;
  bool grid_check = true;
  std::uint64_t seed = 0x4e1;
};
RenyiTable renyi_separation(const Simulation& sim, double alpha, int s_max, const RenyiOptions& opt = {});
// n^{-1} sum_i J_alpha(x_{i,S}^T b, eta0_i, tau_i).
double renyi_objective(const Simulation& sim, double alpha, const Support& s, const Vector& b, Vector* grad = nullptr);

// H_n^2(beta, beta0) = n^{-1} sum_i h^2(x_i^T beta, x_i^T beta0, tau_i).
double average_hellinger_sq(const GlmFamily& family, const Vector& eta, const Vector& eta0, const Vector& tau);

struct ContractionOptions {
  double k = 1.0;
  int draws = 200;
};
std::vector<TrendRow> hellinger_contraction(const std::vector<Simulation>& sims, const SasPrior& prior,
                                            double alpha, const EngineSettings& engine,
                                            const ContractionOptions& opt, int replications, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Assumption audit.

struct AuditRow {
  std::string name;
  double value = 0.0;
  std::string relation;  // inequality the value enters, or empty
  double margin = 0.0;   // observed slack; NaN when no margin applies
  bool ok = true;
  std::string module;
};

struct DiagnosticsReport {
  // Experiment summaries; NaN when not computed.
  double recovery_prob = std::numeric_limits<double>::quiet_NaN();
  double tv_exact_mixture = std::numeric_limits<double>::quiet_NaN();
  double tv_exact_mixture_se = std::numeric_limits<double>::quiet_NaN();
  double tv_mixture_oracle = std::numeric_limits<double>::quiet_NaN();
  double coverage = std::numeric_limits<double>::quiet_NaN();
  double coverage_se = std::numeric_limits<double>::quiet_NaN();
  std::vector<AuditRow> rows;
  RenyiTable renyi;
  const AuditRow* find(std::string_view name) const;
};

struct AuditOptions {
  int k_dim = 3;
  // Sparsity level for the compatibility numbers; 0 means s0.
  int compat_s = 0;
  std::size_t cap = 200000;
  double alpha = 0.5;
  int score_replications = 0;
  int prior_mc = 20000;
  int sieve_mc = 20000;
  double sieve_c0 = 3.0;
  int mgf_directions = 8;
  std::uint64_t seed = 0xa11d;
  bool renyi = true;
  int renyi_s_max = 2;
};
DiagnosticsReport assumption_audit(const Simulation& sim, const SasPrior& prior, const AuditOptions& opt = {});

}  // namespace sbvm
