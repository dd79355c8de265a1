#include "sbvm/experiments.hpp"

#include <cmath>
#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sbvm/error.hpp"

namespace sbvm {

namespace {

constexpr std::string_view kGenerators[] = {"iid_gaussian_normalized", "orthonormal", "duplicated_pair",
                                            "from_file"};

// Reads typed fields from a JSON object and records every problem instead of
// stopping at the first one.
class Reader {
 public:
  Reader(const Json& j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(errors) {
    if (!j_.is_object()) errors_.push_back(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out, bool required = false) {
    seen_.push_back(key);
    if (!has(key)) {
      if (required) errors_.push_back(path_ + "." + key + ": required");
      return;
    }
    const Json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, int> || std::is_same_v<T, long>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        out = v.get<T>();
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
          throw std::invalid_argument("expected a non-negative integer");
        out = v.get<std::uint64_t>();
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
        out = v.get<double>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
        out = v.get<std::string>();
      } else {
        out = v.get<T>();
      }
    } catch (const std::exception& e) {
      errors_.push_back(path_ + "." + key + ": " + e.what());
    }
  }

  Reader child(const std::string& key, bool required = false) {
    seen_.push_back(key);
    if (!has(key)) {
      if (required) errors_.push_back(path_ + "." + key + ": required");
      return Reader(empty_object(), path_ + "." + key, errors_);
    }
    return Reader(j_.at(key), path_ + "." + key, errors_);
  }

  void error(const std::string& key, const std::string& msg) { errors_.push_back(path_ + "." + key + ": " + msg); }

  // Flags keys that no getter asked for.
  void finish() {
    if (!j_.is_object()) return;
    for (const auto& [k, v] : j_.items())
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) errors_.push_back(path_ + "." + k + ": unknown key");
  }

 private:
  static const Json& empty_object() {
    static const Json e = Json::object();
    return e;
  }

  const Json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::vector<std::string> seen_;
};

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::string_view to_string(DesignGenerator g) { return kGenerators[static_cast<int>(g)]; }

ExperimentConfig parse_config(const Json& j) {
  std::vector<std::string> errors;
  ExperimentConfig c;
  Reader root(j, "config", errors);

  {
    Reader f = root.child("family", true);
    std::string name;
    f.get("name", name, true);
    if (!name.empty()) {
      try {
        c.family.kind = parse_family_kind(name);
      } catch (const ConfigError& e) {
        f.error("name", e.what());
      }
    }
    f.get("r", c.family.r);
    f.get("tau", c.family.tau);
    if (!(c.family.r > 0.0)) f.error("r", "must be positive");
    if (!(c.family.tau > 0.0)) f.error("tau", "must be positive");
    if (c.family.kind != FamilyKind::gaussian && c.family.kind != FamilyKind::gamma_log && c.family.tau != 1.0)
      f.error("tau", "discrete families need tau = 1");
    f.finish();
  }
  {
    Reader d = root.child("design", true);
    d.get("n", c.design.n, true);
    d.get("G", c.design.g, true);
    d.get("group_sizes", c.design.group_sizes);
    std::string gen = "iid_gaussian_normalized";
    d.get("generator", gen);
    const auto it = std::find(std::begin(kGenerators), std::end(kGenerators), gen);
    if (it == std::end(kGenerators))
      d.error("generator", "unknown generator '" + gen + "'");
    else
      c.design.generator = static_cast<DesignGenerator>(it - std::begin(kGenerators));
    d.get("path", c.design.path);
    if (c.design.n < 1) d.error("n", "must be positive");
    if (c.design.g < 1) d.error("G", "must be positive");
    if (c.design.group_sizes.empty() && c.design.g >= 1) c.design.group_sizes.assign(c.design.g, 1);
    if (static_cast<int>(c.design.group_sizes.size()) != c.design.g)
      d.error("group_sizes", "length must equal G");
    for (int m : c.design.group_sizes)
      if (m < 1) d.error("group_sizes", "entries must be positive");
    if (c.design.generator == DesignGenerator::from_file && c.design.path.empty())
      d.error("path", "required by the from_file generator");
    d.finish();
  }
  {
    Reader t = root.child("truth", true);
    t.get("support", c.truth.support, true);
    t.get("blocks", c.truth.blocks);
    for (const char* key : {"signal_multiplier", "magnitude"}) {
      if (!t.has(key)) continue;
      double v = 0.0;
      t.get(key, v);
      if (!(v > 0.0)) t.error(key, "must be positive");
      (std::string(key) == "magnitude" ? c.truth.magnitude : c.truth.signal_multiplier) = v;
    }
    const int given = !c.truth.blocks.empty() + c.truth.signal_multiplier.has_value() + c.truth.magnitude.has_value();
    if (given != 1) t.error("support", "exactly one of blocks, signal_multiplier, magnitude is required");
    for (std::size_t k = 0; k < c.truth.support.size(); ++k) {
      const int g = c.truth.support[k];
      if (g < 0 || g >= c.design.g) t.error("support", "group index out of range");
      if (k > 0 && g <= c.truth.support[k - 1]) t.error("support", "indices must be strictly increasing");
    }
    if (!c.truth.blocks.empty()) {
      if (c.truth.blocks.size() != c.truth.support.size()) t.error("blocks", "one block per support group");
      for (std::size_t k = 0; k < std::min(c.truth.blocks.size(), c.truth.support.size()); ++k) {
        const int g = c.truth.support[k];
        if (g >= 0 && g < static_cast<int>(c.design.group_sizes.size()) &&
            static_cast<int>(c.truth.blocks[k].size()) != c.design.group_sizes[g])
          t.error("blocks", "block length must equal the group size");
      }
    }
    t.finish();
  }
  {
    Reader p = root.child("prior");
    Reader size = p.child("size");
    std::string kind = "complexity";
    size.get("kind", kind);
    if (kind == "complexity")
      c.prior.size = SizePriorKind::complexity;
    else if (kind == "beta_binomial")
      c.prior.size = SizePriorKind::beta_binomial;
    else
      size.error("kind", "unknown size prior '" + kind + "'");
    size.get("c", c.prior.c);
    size.get("a", c.prior.a);
    size.get("u", c.prior.u);
    if (!(c.prior.c > 0.0)) size.error("c", "must be positive");
    if (!(c.prior.a > 0.0)) size.error("a", "must be positive");
    if (!(c.prior.u > 1.0)) size.error("u", "must exceed 1");
    size.finish();
    Reader slab = p.child("slab");
    std::string skind = "gaussian";
    slab.get("kind", skind);
    if (skind == "gaussian")
      c.prior.slab = SlabKind::group_gaussian;
    else if (skind == "laplace")
      c.prior.slab = SlabKind::group_laplace;
    else
      slab.error("kind", "unknown slab '" + skind + "'");
    slab.get("sigma2", c.prior.sigma2);
    slab.get("lambda", c.prior.lambda);
    if (!(c.prior.sigma2 > 0.0)) slab.error("sigma2", "must be positive");
    if (!(c.prior.lambda > 0.0)) slab.error("lambda", "must be positive");
    slab.finish();
    p.finish();
  }
  root.get("alpha", c.alpha, true);
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) root.error("alpha", "must lie in (0, 1]");
  root.get("s_max", c.s_max);
  root.get("k_dim", c.k_dim);
  root.get("level", c.level);
  if (c.s_max < 0) root.error("s_max", "must be non-negative");
  if (c.k_dim < 1) root.error("k_dim", "must be positive");
  if (!(c.level > 0.0 && c.level < 1.0)) root.error("level", "must lie in (0, 1)");
  {
    std::string mode = "laplace", center = "posterior_mode";
    root.get("mode", mode);
    root.get("center", center);
    try {
      c.mode = parse_marginal_mode(mode);
    } catch (const ConfigError& e) {
      root.error("mode", e.what());
    }
    try {
      c.center = parse_center_mode(center);
    } catch (const ConfigError& e) {
      root.error("center", e.what());
    }
  }
  root.get("n_grid", c.n_grid);
  for (std::size_t k = 0; k < c.n_grid.size(); ++k)
    if (c.n_grid[k] < 1 || (k > 0 && c.n_grid[k] <= c.n_grid[k - 1]))
      root.error("n_grid", "must be positive and strictly increasing");
  {
    Reader s = root.child("seeds");
    s.get("design", c.seeds.design);
    s.get("data", c.seeds.data);
    s.get("experiment", c.seeds.experiment);
    s.finish();
  }
  {
    Reader r = root.child("replications");
    r.get("coverage", c.replications.coverage);
    r.get("recovery", c.replications.recovery);
    r.get("collapse", c.replications.collapse);
    r.get("score", c.replications.score);
    r.get("contraction", c.replications.contraction);
    for (int v : {c.replications.coverage, c.replications.recovery, c.replications.collapse, c.replications.score,
                  c.replications.contraction})
      if (v < 1) {
        r.error("*", "replication counts must be positive");
        break;
      }
    r.finish();
  }
  {
    Reader t = root.child("tolerances");
    t.get("gh_tol", c.tolerances.gh_tol);
    t.get("min_ess", c.tolerances.min_ess);
    t.get("is_draws", c.tolerances.is_draws);
    t.get("exact_weight_floor", c.tolerances.exact_weight_floor);
    t.get("tv_draws", c.tolerances.tv_draws);
    t.get("credibility_draws", c.tolerances.credibility_draws);
    if (!(c.tolerances.gh_tol > 0.0)) t.error("gh_tol", "must be positive");
    if (c.tolerances.is_draws < 1 || c.tolerances.tv_draws < 1 || c.tolerances.credibility_draws < 1)
      t.error("*", "draw counts must be positive");
    if (!(c.tolerances.exact_weight_floor >= 0.0 && c.tolerances.exact_weight_floor < 1.0))
      t.error("exact_weight_floor", "must lie in [0, 1)");
    t.finish();
  }
  root.finish();

  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["family"] = {{"name", std::string(to_string(c.family.kind))}, {"r", c.family.r}, {"tau", c.family.tau}};
  j["design"] = {{"n", c.design.n},
                 {"G", c.design.g},
                 {"group_sizes", c.design.group_sizes},
                 {"generator", std::string(to_string(c.design.generator))}};
  if (!c.design.path.empty()) j["design"]["path"] = c.design.path;
  j["truth"] = {{"support", c.truth.support}};
  if (!c.truth.blocks.empty()) j["truth"]["blocks"] = c.truth.blocks;
  if (c.truth.signal_multiplier) j["truth"]["signal_multiplier"] = *c.truth.signal_multiplier;
  if (c.truth.magnitude) j["truth"]["magnitude"] = *c.truth.magnitude;
  j["prior"]["size"] = {{"kind", std::string(to_string(c.prior.size))}};
  if (c.prior.size == SizePriorKind::complexity) {
    j["prior"]["size"]["c"] = c.prior.c;
    j["prior"]["size"]["a"] = c.prior.a;
  } else {
    j["prior"]["size"]["u"] = c.prior.u;
  }
  if (c.prior.slab == SlabKind::group_gaussian)
    j["prior"]["slab"] = {{"kind", "gaussian"}, {"sigma2", c.prior.sigma2}};
  else
    j["prior"]["slab"] = {{"kind", "laplace"}, {"lambda", c.prior.lambda}};
  j["alpha"] = c.alpha;
  j["s_max"] = c.s_max;
  j["k_dim"] = c.k_dim;
  j["level"] = c.level;
  j["mode"] = std::string(to_string(c.mode));
  j["center"] = std::string(to_string(c.center));
  j["n_grid"] = c.n_grid;
  j["seeds"] = {{"design", c.seeds.design}, {"data", c.seeds.data}, {"experiment", c.seeds.experiment}};
  j["replications"] = {{"coverage", c.replications.coverage},
                       {"recovery", c.replications.recovery},
                       {"collapse", c.replications.collapse},
                       {"score", c.replications.score},
                       {"contraction", c.replications.contraction}};
  j["tolerances"] = {{"gh_tol", c.tolerances.gh_tol},
                     {"min_ess", c.tolerances.min_ess},
                     {"is_draws", c.tolerances.is_draws},
                     {"exact_weight_floor", c.tolerances.exact_weight_floor},
                     {"tv_draws", c.tolerances.tv_draws},
                     {"credibility_draws", c.tolerances.credibility_draws}};
  return j;
}

std::string canonical_form(const ExperimentConfig& c) { return to_json(c).dump(); }

std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_form(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------

GroupedDesign generate_design(const DesignSpec& spec, Rng& rng) {
  std::vector<int> sizes = spec.group_sizes;
  if (sizes.empty()) sizes.assign(spec.g, 1);
  int p = 0;
  for (int m : sizes) p += m;
  const int n = spec.n;
  std::normal_distribution<double> nd;
  auto gaussian_matrix = [&] {
    Matrix x(n, p);
    for (int j = 0; j < p; ++j)
      for (int i = 0; i < n; ++i) x(i, j) = nd(rng);
    return x;
  };
  auto normalize_columns = [&](Matrix& x) {
    for (int j = 0; j < p; ++j) x.col(j) *= std::sqrt(static_cast<double>(n)) / x.col(j).norm();
  };
  switch (spec.generator) {
    case DesignGenerator::iid_gaussian_normalized: {
      Matrix x = gaussian_matrix();
      normalize_columns(x);
      return GroupedDesign(std::move(x), sizes);
    }
    case DesignGenerator::orthonormal: {
      if (n < p) throw ConfigError("orthonormal generator needs n >= p");
      const Matrix x = gaussian_matrix();
      Eigen::HouseholderQR<Matrix> qr(x);
      Matrix q = qr.householderQ() * Matrix::Identity(n, p);
      q *= std::sqrt(static_cast<double>(n));
      return GroupedDesign(std::move(q), sizes);
    }
    case DesignGenerator::duplicated_pair: {
      if (sizes.size() < 2 || sizes[0] != sizes[1])
        throw ConfigError("duplicated_pair generator needs two leading groups of equal size");
      Matrix x = gaussian_matrix();
      normalize_columns(x);
      x.middleCols(sizes[0], sizes[1]) = x.leftCols(sizes[0]);
      return GroupedDesign(std::move(x), sizes);
    }
    case DesignGenerator::from_file: {
      GroupedDesign d = load_design_csv(spec.path);
      if (d.n() != spec.n || d.num_groups() != spec.g || d.group_sizes() != sizes)
        throw ConfigError("design file " + spec.path + " disagrees with n, G or group_sizes");
      return d;
    }
  }
  throw ConfigError("unknown design generator");
}

PaddedVector generate_truth(const TruthSpec& spec, const GroupedDesign& design) {
  design.validate_support(spec.support);
  PaddedVector out;
  out.support = spec.support;
  out.values.resize(design.support_dim(spec.support));
  int off = 0;
  if (!spec.blocks.empty()) {
    for (std::size_t k = 0; k < spec.support.size(); ++k) {
      const int m = design.group_size(spec.support[k]);
      if (static_cast<int>(spec.blocks[k].size()) != m) throw ConfigError("truth block length mismatch");
      for (int j = 0; j < m; ++j) out.values(off + j) = spec.blocks[k][j];
      off += m;
    }
    return out;
  }
  double norm = 0.0;
  if (spec.magnitude) {
    norm = *spec.magnitude;
  } else if (spec.signal_multiplier) {
    const int s0 = static_cast<int>(spec.support.size());
    if (s0 == 0) throw ConfigError("signal_multiplier needs a nonempty support");
    const double eps_n = std::sqrt(s0 * std::log(static_cast<double>(design.num_groups())) / design.n());
    const double phi2 = compatibility_phi2(design, Vector::Ones(design.n()), s0);
    if (!(phi2 > 0.0)) throw ConfigError("signal_multiplier preset needs phi2(s0) > 0");
    norm = *spec.signal_multiplier * eps_n / phi2;
  } else {
    throw ConfigError("truth needs blocks, signal_multiplier or magnitude");
  }
  for (std::size_t k = 0; k < spec.support.size(); ++k) {
    const int m = design.group_size(spec.support[k]);
    const double sign = k % 2 == 0 ? 1.0 : -1.0;
    out.values.segment(off, m).setConstant(sign * norm / std::sqrt(static_cast<double>(m)));
    off += m;
  }
  return out;
}

SasPrior make_prior(const PriorSpec& spec, const std::vector<int>& group_sizes) {
  const int g = static_cast<int>(group_sizes.size());
  SizePrior size = spec.size == SizePriorKind::complexity ? SizePrior::complexity(g, spec.c, spec.a)
                                                          : SizePrior::beta_binomial(g, spec.u);
  Slab slab = spec.slab == SlabKind::group_gaussian ? Slab::gaussian(spec.sigma2) : Slab::laplace(spec.lambda);
  return SasPrior(std::move(size), slab, group_sizes);
}

GlmFamily make_family(const FamilySpec& spec) { return GlmFamily(spec.kind, spec.r); }

PosteriorOptions make_posterior_options(const ExperimentConfig& c) {
  PosteriorOptions o;
  o.mode = c.mode;
  o.center = c.center;
  o.exact.gh_tol = c.tolerances.gh_tol;
  o.exact.min_ess = c.tolerances.min_ess;
  o.exact.is_draws = c.tolerances.is_draws;
  o.exact.seed = mix64(c.seeds.experiment ^ 0xe4ac7);
  o.exact_weight_floor = c.tolerances.exact_weight_floor;
  return o;
}

Simulation make_simulation(const ExperimentConfig& c, std::optional<int> n) {
  DesignSpec ds = c.design;
  if (n) ds.n = *n;
  Rng rng = make_stream(c.seeds.design, static_cast<std::uint64_t>(ds.n));
  Simulation sim;
  sim.family = make_family(c.family);
  sim.design = generate_design(ds, rng);
  sim.tau = Vector::Constant(ds.n, c.family.tau);
  sim.truth = generate_truth(c.truth, sim.design);
  return sim;
}

Dataset generate_dataset(const ExperimentConfig& c, std::optional<int> n) {
  const Simulation sim = make_simulation(c, n);
  Rng rng = make_stream(c.seeds.data, static_cast<std::uint64_t>(sim.design.n()));
  Dataset d = sim.draw(rng);
  d.config_hash = config_hash(c);
  d.seed = c.seeds.data;
  return d;
}

// ---------------------------------------------------------------------------

void write_dataset_csv(std::ostream& out, const Dataset& d) {
  out << std::setprecision(17);
  out << "# config_hash: " << d.config_hash << "\n";
  out << "# seed: " << d.seed << "\n";
  out << "# family: " << d.family.name() << "\n";
  if (d.truth) {
    out << "# truth_support: " << format_support(d.truth->support) << "\n";
    out << "# truth_values:";
    for (Eigen::Index j = 0; j < d.truth->values.size(); ++j) out << (j ? "," : " ") << d.truth->values(j);
    out << "\n";
  }
  out << "group_sizes: ";
  for (int g = 0; g < d.design.num_groups(); ++g) out << (g ? "," : "") << d.design.group_size(g);
  out << "\n";
  out << "y,tau";
  for (int j = 0; j < d.design.p(); ++j) out << ",x" << j;
  out << "\n";
  for (int i = 0; i < d.design.n(); ++i) {
    out << d.y(i) << "," << d.tau(i);
    for (int j = 0; j < d.design.p(); ++j) out << "," << d.design.x()(i, j);
    out << "\n";
  }
}

namespace {

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index j = 0; j < v.size(); ++j) a.push_back(v(j));
  return a;
}

Json matrix_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
  return a;
}

// NaN and infinities become null.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

Json posterior_json(const SupportPosterior& sp) {
  Json j;
  j["alpha"] = sp.alpha;
  j["normalized"] = sp.normalized;
  j["mode_support"] = posterior_mode_support(sp);
  Json entries = Json::array();
  for (const auto& e : sp.entries) {
    Json x;
    x["support"] = e.support;
    x["log_weight"] = number(e.log_weight);
    x["weight"] = number(std::exp(e.log_weight));
    x["log_marginal"] = number(e.log_marginal);
    x["log_laplace"] = number(e.marginal.log_laplace);
    x["log_exact"] = number(e.marginal.log_exact);
    x["exact_method"] = std::string(to_string(e.marginal.exact_method));
    x["gh_level"] = e.marginal.gh_level;
    x["draws"] = e.marginal.draws;
    x["ess"] = number(e.marginal.ess);
    x["exact_se"] = number(e.marginal.exact_se);
    x["reliable"] = e.marginal.reliable;
    x["summary_ok"] = e.summary_ok;
    x["separated"] = e.separated;
    x["mean"] = vector_json(e.mean);
    x["precision"] = matrix_json(e.precision);
    entries.push_back(std::move(x));
  }
  j["entries"] = std::move(entries);
  return j;
}

Json report_json(const DiagnosticsReport& r) {
  Json j;
  j["recovery_prob"] = number(r.recovery_prob);
  j["tv_exact_mixture"] = number(r.tv_exact_mixture);
  j["tv_exact_mixture_se"] = number(r.tv_exact_mixture_se);
  j["tv_mixture_oracle"] = number(r.tv_mixture_oracle);
  j["coverage"] = number(r.coverage);
  j["coverage_se"] = number(r.coverage_se);
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"name", row.name},
                    {"value", number(row.value)},
                    {"relation", row.relation},
                    {"margin", number(row.margin)},
                    {"ok", row.ok},
                    {"module", row.module}});
  j["audit"] = std::move(rows);
  Json renyi;
  renyi["n"] = r.renyi.n;
  renyi["alpha"] = r.renyi.alpha;
  renyi["c_r"] = r.renyi.c_r;
  renyi["summability"] = number(r.renyi.summability);
  Json entries = Json::array();
  for (const auto& e : r.renyi.entries)
    entries.push_back({{"support", e.support},
                       {"r", number(e.r)},
                       {"converged", e.converged},
                       {"grid_r", number(e.grid_r)},
                       {"minimizer", vector_json(e.minimizer)}});
  renyi["entries"] = std::move(entries);
  j["renyi"] = std::move(renyi);
  return j;
}

void write_metrics_csv(std::ostream& out, const std::string& hash, const std::vector<MetricRow>& rows) {
  out << "# config_hash: " << hash << "\n";
  out << "n,metric,value,se\n";
  for (const auto& r : rows)
    out << r.n << "," << r.metric << "," << format_double(r.value) << "," << format_double(r.se) << "\n";
}

void write_artifact(const std::filesystem::path& dir, const std::string& name, const std::string& content,
                    bool force) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  const fs::path target = dir / name;
  if (fs::exists(target) && !force)
    throw Error("refusing to overwrite " + target.string() + " (pass --force)");
  std::ofstream out(target, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + target.string());
  out << content;
  if (!out) throw Error("write failed for " + target.string());
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace sbvm
