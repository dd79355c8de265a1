#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "sbvm/dataset.hpp"
#include "sbvm/prior.hpp"
#include "sbvm/restricted_fit.hpp"
#include "sbvm/rng.hpp"

namespace sbvm {

// Expansion used for the Laplace proxy of a support marginal.
//   mle:             at the restricted MLE with the observed information, slab at the MLE
//   score_quadratic: at the truth, exp{(alpha/2) D^T F0^{-1} D} with the truth Fisher block
//   posterior_mode:  full second-order expansion of alpha*l + log slab at its maximizer
enum class CenterMode { mle, score_quadratic, posterior_mode };
enum class MarginalMode { exact, laplace };
enum class ExactMethod { none, gauss_hermite, importance };

std::string_view to_string(CenterMode m);
std::string_view to_string(MarginalMode m);
std::string_view to_string(ExactMethod m);
CenterMode parse_center_mode(std::string_view s);
MarginalMode parse_marginal_mode(std::string_view s);

struct ExactOptions {
  std::vector<int> gh_levels = {8, 16, 32, 64};
  double gh_tol = 1e-8;
  int max_gh_dim = 3;
  long is_draws = 200000;
  double min_ess = 100.0;
  std::uint64_t seed = 0xe4ac7;
};

struct LaplaceExpansion {
  double log_q = 0.0;  // relative to the common reference alpha * l_ref
  Vector center;
  Matrix precision;    // Hessian of -(alpha l + log slab) at `center`
  bool ok = false;
};

struct MarginalEstimate {
  Support support;
  double log_laplace = 0.0;
  double log_exact = 0.0;
  ExactMethod exact_method = ExactMethod::none;
  int gh_level = 0;
  long draws = 0;
  double ess = 0.0;
  double exact_se = 0.0;
  bool reliable = true;
};

// Everything the engine needs about one dataset, prior and temperature. The
// tempered log-likelihood is alpha * loglik_scale * l_S, shifted by the
// common reference alpha * loglik_scale * l_ref, where l_ref is the
// log-likelihood at the truth when known and at zero otherwise.
class PosteriorProblem {
 public:
  PosteriorProblem(const Dataset& data, const SasPrior& prior, double alpha, double loglik_scale = 1.0);

  const Dataset& data() const { return *data_; }
  const SasPrior& prior() const { return *prior_; }
  double alpha() const { return alpha_; }
  double temper() const { return alpha_ * scale_; }
  double l_ref() const { return l_ref_; }

  RestrictedModel model(const Support& s) const;
  // alpha*scale*(l_S(b) - l_ref) + log slab_S(b).
  double log_integrand(const RestrictedModel& m, const Vector& b) const;
  RestrictedModel::Derivatives integrand_derivatives(const RestrictedModel& m, const Vector& b) const;

 private:
  const Dataset* data_;
  const SasPrior* prior_;
  double alpha_;
  double scale_;
  double l_ref_;
};

LaplaceExpansion posterior_mode_expansion(const PosteriorProblem& pb, const RestrictedModel& m,
                                          const NewtonOptions& opt = {});
double laplace_log_marginal(const PosteriorProblem& pb, const RestrictedModel& m, CenterMode mode,
                            const NewtonOptions& opt = {});
MarginalEstimate exact_log_marginal(const PosteriorProblem& pb, const RestrictedModel& m,
                                    const ExactOptions& opt = {}, const LaplaceExpansion* expansion = nullptr);

struct PosteriorEntry {
  Support support;
  double log_weight = 0.0;
  // Gaussian summary: restricted MLE and alpha-scaled observed information.
  Vector mean;
  Matrix precision;
  bool summary_ok = false;
  bool separated = false;
  // Unnormalized log marginal used for the weight (relative to l_ref).
  double log_marginal = 0.0;
  LaplaceExpansion expansion;
  MarginalEstimate marginal;
};

struct SupportPosterior {
  double alpha = 1.0;
  std::vector<PosteriorEntry> entries;
  bool normalized = false;

  double weight(const Support& s) const;
  const PosteriorEntry* find(const Support& s) const;
};

struct PosteriorOptions {
  MarginalMode mode = MarginalMode::laplace;
  CenterMode center = CenterMode::posterior_mode;
  bool summaries = true;
  ExactOptions exact;
  // In exact mode, supports whose Laplace weight falls below this floor keep
  // the Laplace marginal instead of being integrated.
  double exact_weight_floor = 0.0;
  std::size_t cap = kDefaultEnumerationCap;
  double loglik_scale = 1.0;
  NewtonOptions newton;
};

// log_weights[k] - log_sum_exp(log_weights); sets normalized.
void normalize(SupportPosterior& sp);

SupportPosterior support_posterior(const Dataset& data, const SasPrior& prior, double alpha, int s_max,
                                   const PosteriorOptions& opt = {});

// Quadratic-score Gaussian mixture over supersets of S0 with
// |S| <= min(s_max, k_dim * s0).
SupportPosterior mixture_weights(const Dataset& data, const SasPrior& prior, double alpha, int s_max,
                                 int k_dim = 3, std::size_t cap = kDefaultEnumerationCap);

struct OracleLaw {
  Support support;
  Vector mean;
  Matrix covariance;
  Matrix precision;
};
OracleLaw oracle_law(const Dataset& data, double alpha);

// Argmax weight; ties go to the lexicographically first support.
Support posterior_mode_support(const SupportPosterior& sp);

struct PosteriorDraw {
  std::size_t entry;
  Vector beta;  // ambient, zero off the support
};
// Draws from the Gaussian summaries.
std::vector<PosteriorDraw> sample_posterior(const GroupedDesign& design, const SupportPosterior& sp, int k,
                                            Rng& rng);

struct ExactSampleResult {
  std::vector<PosteriorDraw> draws;
  double acceptance = 1.0;
  bool flagged = false;  // acceptance below 1e-3
};
// Exact per-support laws by rejection from the Laplace Gaussian of each
// support. The envelope constant comes from a pilot sample and is raised if
// a later draw exceeds it.
ExactSampleResult sample_exact_posterior(const PosteriorProblem& pb, const SupportPosterior& sp, int k, Rng& rng);

// Draws from N(mean, precision^{-1}).
Vector sample_gaussian(const Vector& mean, const Matrix& precision, Rng& rng);
double log_gaussian_density(const Vector& x, const Vector& mean, const Matrix& precision);

}  // namespace sbvm
