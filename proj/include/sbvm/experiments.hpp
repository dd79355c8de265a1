#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "sbvm/dataset.hpp"
#include "sbvm/diagnostics.hpp"
#include "sbvm/posterior.hpp"
#include "sbvm/prior.hpp"

namespace sbvm {

using Json = nlohmann::json;

enum class DesignGenerator { iid_gaussian_normalized, orthonormal, duplicated_pair, from_file };
std::string_view to_string(DesignGenerator g);

struct FamilySpec {
  FamilyKind kind = FamilyKind::gaussian;
  double r = 1.0;    // negbin size
  double tau = 1.0;  // common dispersion
};

struct DesignSpec {
  int n = 100;
  int g = 10;
  std::vector<int> group_sizes;  // empty: all groups of size 1
  DesignGenerator generator = DesignGenerator::iid_gaussian_normalized;
  std::string path;  // from_file only
};

// Either explicit blocks (one per support group) or a signal magnitude. With
// `signal_multiplier`, every true group has norm multiplier * eps_n / phi2(s0),
// phi2 taken on the unweighted Gram matrix; with `magnitude`, norm magnitude.
// Group directions are (1, ..., 1)/sqrt(m_g) with alternating signs.
struct TruthSpec {
  Support support;
  std::vector<std::vector<double>> blocks;
  std::optional<double> signal_multiplier;
  std::optional<double> magnitude;
};

struct PriorSpec {
  SizePriorKind size = SizePriorKind::complexity;
  double c = 1.0;
  double a = 1.0;
  double u = 2.0;
  SlabKind slab = SlabKind::group_gaussian;
  double sigma2 = 1.0;
  double lambda = 1.0;
};

struct SeedSpec {
  std::uint64_t design = 1;
  std::uint64_t data = 2;
  std::uint64_t experiment = 3;
};

struct ReplicationSpec {
  int coverage = 200;
  int recovery = 100;
  int collapse = 100;
  int score = 1000;
  int contraction = 50;
};

struct ToleranceSpec {
  double gh_tol = 1e-8;
  double min_ess = 100.0;
  long is_draws = 200000;
  double exact_weight_floor = 0.0;
  long tv_draws = 20000;
  int credibility_draws = 1000;
};

struct ExperimentConfig {
  FamilySpec family;
  DesignSpec design;
  TruthSpec truth;
  PriorSpec prior;
  double alpha = 1.0;
  int s_max = 2;
  int k_dim = 3;
  double level = 0.95;
  MarginalMode mode = MarginalMode::laplace;
  CenterMode center = CenterMode::posterior_mode;
  std::vector<int> n_grid;  // empty: design.n only
  SeedSpec seeds;
  ReplicationSpec replications;
  ToleranceSpec tolerances;
};

// Throws ConfigError listing every invalid field.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::string& path);
Json to_json(const ExperimentConfig& c);
// Sorted keys, shortest round-trip numbers, no whitespace.
std::string canonical_form(const ExperimentConfig& c);
// FNV-1a 64 of the canonical form, 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

// Design generators. Columns of the iid generator have Euclidean norm
// sqrt(n); the orthonormal generator gives X^T X / n = I (needs n >= p).
GroupedDesign generate_design(const DesignSpec& spec, Rng& rng);
PaddedVector generate_truth(const TruthSpec& spec, const GroupedDesign& design);
SasPrior make_prior(const PriorSpec& spec, const std::vector<int>& group_sizes);
GlmFamily make_family(const FamilySpec& spec);
PosteriorOptions make_posterior_options(const ExperimentConfig& c);

// Design, truth and dispersion from the design seed; `n` overrides design.n.
Simulation make_simulation(const ExperimentConfig& c, std::optional<int> n = std::nullopt);
// Simulation plus one response draw from the data seed.
Dataset generate_dataset(const ExperimentConfig& c, std::optional<int> n = std::nullopt);

// Artifacts. Every writer embeds the config hash; doubles use 17 significant digits.
void write_dataset_csv(std::ostream& out, const Dataset& d);
Json posterior_json(const SupportPosterior& sp);
Json report_json(const DiagnosticsReport& r);
struct MetricRow {
  int n;
  std::string metric;
  double value;
  double se;
};
void write_metrics_csv(std::ostream& out, const std::string& hash, const std::vector<MetricRow>& rows);

// Writes `content` to dir/name; refuses to replace an existing file unless
// `force`. Throws Error on refusal or I/O failure.
void write_artifact(const std::filesystem::path& dir, const std::string& name, const std::string& content,
                    bool force);
// JSON text with a trailing newline.
std::string dump_json(const Json& j);

}  // namespace sbvm
