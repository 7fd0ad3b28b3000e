#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cnc/csv.hpp"
#include "cnc/errors.hpp"
#include "cnc/linalg.hpp"
#include "cnc/params.hpp"
#include "cnc/trajectory.hpp"

namespace cnc {

enum class ProblemKind { halfspace, quadratic, mlp };
enum class LossKind { sigmoid, linear, quadratic };
enum class InitKind { origin, near_saddle, explicit_vector };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::halfspace;
  std::size_t n = 40;
  std::size_t d = 4;
  double separation = 0.75;
  double reg_weight = 0.0;
  std::uint64_t data_seed = 7;
  LossKind loss = LossKind::sigmoid;
  // quadratic testbed
  Vec h_diag = {1.0, -1.0};
  Vec b;                       // defaults to zeros of matching size
  double noise_sigma = 1.0;
  Vec noise_dir;               // defaults to the last coordinate axis
  // mlp testbed
  std::vector<std::size_t> layers = {4, 4, 3};
};

struct MethodSpec {
  Method method = Method::gd;
  double eta = 0.25;
  double r = 0.1;
  double g_thres = 0.0;
  std::int64_t tr = 10;
  std::optional<double> derive_eps;  // derive the bundle from epsilon instead
};

struct InitSpec {
  InitKind kind = InitKind::near_saddle;
  Vec explicit_vector;
  Vec search_start;  // non-empty: single polish from this point
  // multi-start policy when search_start is empty: random starts with norms
  // in [radius_lo, radius_hi], keeping the saddle with the most negative
  // minimum eigenvalue
  std::int64_t search_tries = 30;
  double radius_lo = 2.0;
  double radius_hi = 8.0;
  std::uint64_t search_seed = 101;
  double eps_g = 1e-4;
  std::int64_t max_iters = 20000;
  double offset_scale = 0.0;
  std::uint64_t offset_seed = 1;
};

struct MeasureSpec {
  ProblemKind kind = ProblemKind::halfspace;
  std::vector<std::size_t> dims = {8, 16, 32, 64};
  std::vector<std::size_t> depths = {1, 2, 4};
  std::size_t width = 4;
  std::size_t classes = 3;
  std::size_t n = 50;
  std::size_t m = 5;
  double param_scale = 3.0;
  std::size_t iso_draws = 100000;
  std::uint64_t seed = 1;
};

struct ExperimentConfig {
  ProblemSpec problem;
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> seeds = {1};
  std::int64_t t_max = 1000;
  InitSpec init;
  std::string out_dir = "out";
  std::size_t snapshot_thinning = 1;
  std::int64_t eig_log_every = 1;
  double drop_frac = 0.05;
  int resample_tries = 20;
  MeasureSpec measure;
  SmoothnessConstants derive_constants;
  std::string source_text;  // echoed into output headers
};

namespace detail {

struct KeyValue {
  std::string value;
  std::size_t line = 0;
  bool used = false;
};

class ConfigReader {
 public:
  explicit ConfigReader(const std::string& text) {
    std::size_t line_no = 0;
    for (const std::string& raw : split(text, '\n')) {
      ++line_no;
      std::string line = trim(raw);
      if (line.empty() || line[0] == '#') continue;
      std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ParseError("line " + std::to_string(line_no) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty key");
      if (entries_.count(key))
        throw ParseError("line " + std::to_string(line_no) + ": duplicate key " + key);
      entries_[key] = {value, line_no, false};
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::optional<std::string> take(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    it->second.used = true;
    return it->second.value;
  }

  double take_double(const std::string& key, double fallback) {
    auto v = take(key);
    if (!v) return fallback;
    return parse_double(key, *v);
  }

  std::int64_t take_int(const std::string& key, std::int64_t fallback) {
    auto v = take(key);
    if (!v) return fallback;
    return parse_int(key, *v);
  }

  std::uint64_t take_u64(const std::string& key, std::uint64_t fallback) {
    auto v = take(key);
    if (!v) return fallback;
    std::int64_t x = parse_int(key, *v);
    if (x < 0) throw ParseError(where(key) + ": must be nonnegative");
    return static_cast<std::uint64_t>(x);
  }

  Vec take_vec(const std::string& key, Vec fallback) {
    auto v = take(key);
    if (!v) return fallback;
    Vec out;
    for (const std::string& f : split(*v, ','))
      out.push_back(parse_double(key, trim(f)));
    return out;
  }

  std::vector<std::size_t> take_size_list(const std::string& key,
                                          std::vector<std::size_t> fallback) {
    auto v = take(key);
    if (!v) return fallback;
    std::vector<std::size_t> out;
    for (const std::string& f : split(*v, ',')) {
      std::int64_t x = parse_int(key, trim(f));
      if (x < 0) throw ParseError(where(key) + ": negative entry");
      out.push_back(static_cast<std::size_t>(x));
    }
    return out;
  }

  std::vector<std::uint64_t> take_u64_list(const std::string& key,
                                           std::vector<std::uint64_t> fallback) {
    auto v = take(key);
    if (!v) return fallback;
    std::vector<std::uint64_t> out;
    for (const std::string& f : split(*v, ',')) {
      std::int64_t x = parse_int(key, trim(f));
      if (x < 0) throw ParseError(where(key) + ": negative entry");
      out.push_back(static_cast<std::uint64_t>(x));
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, kv] : entries_)
      if (!kv.used)
        throw ParseError("line " + std::to_string(kv.line) + ": unknown key " + key);
  }

 private:
  std::string where(const std::string& key) const {
    auto it = entries_.find(key);
    return "line " + std::to_string(it == entries_.end() ? 0 : it->second.line) + " (" + key + ")";
  }

  double parse_double(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      double x = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return x;
    } catch (const std::exception&) {
      throw ParseError(where(key) + ": bad number '" + s + "'");
    }
  }

  std::int64_t parse_int(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      long long x = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return x;
    } catch (const std::exception&) {
      throw ParseError(where(key) + ": bad integer '" + s + "'");
    }
  }

  std::map<std::string, KeyValue> entries_;
};

inline Method parse_method_name(const std::string& name) {
  if (name == "gd") return Method::gd;
  if (name == "sgd") return Method::sgd;
  if (name == "iso_pgd") return Method::iso_pgd;
  if (name == "cnc_pgd") return Method::cnc_pgd;
  if (name == "cnc_sgd") return Method::cnc_sgd;
  throw ParseError("unknown method '" + name + "'");
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  detail::ConfigReader r(text);
  ExperimentConfig cfg;
  cfg.source_text = text;

  if (auto kind = r.take("problem.kind")) {
    if (*kind == "halfspace") cfg.problem.kind = ProblemKind::halfspace;
    else if (*kind == "quadratic") cfg.problem.kind = ProblemKind::quadratic;
    else if (*kind == "mlp") cfg.problem.kind = ProblemKind::mlp;
    else throw ParseError("unknown problem.kind '" + *kind + "'");
  }
  cfg.problem.n = static_cast<std::size_t>(r.take_int("problem.n", static_cast<std::int64_t>(cfg.problem.n)));
  cfg.problem.d = static_cast<std::size_t>(r.take_int("problem.d", static_cast<std::int64_t>(cfg.problem.d)));
  cfg.problem.separation = r.take_double("problem.separation", cfg.problem.separation);
  cfg.problem.reg_weight = r.take_double("problem.reg_weight", cfg.problem.reg_weight);
  cfg.problem.data_seed = r.take_u64("problem.data_seed", cfg.problem.data_seed);
  if (auto loss = r.take("problem.loss")) {
    if (*loss == "sigmoid") cfg.problem.loss = LossKind::sigmoid;
    else if (*loss == "linear") cfg.problem.loss = LossKind::linear;
    else if (*loss == "quadratic") cfg.problem.loss = LossKind::quadratic;
    else throw ParseError("unknown problem.loss '" + *loss + "'");
  }
  cfg.problem.h_diag = r.take_vec("problem.h_diag", cfg.problem.h_diag);
  cfg.problem.b = r.take_vec("problem.b", cfg.problem.b);
  cfg.problem.noise_sigma = r.take_double("problem.noise_sigma", cfg.problem.noise_sigma);
  cfg.problem.noise_dir = r.take_vec("problem.noise_dir", cfg.problem.noise_dir);
  cfg.problem.layers = r.take_size_list("problem.layers", cfg.problem.layers);

  std::vector<std::string> method_names;
  if (auto m = r.take("methods")) {
    for (const std::string& f : split(*m, ',')) method_names.push_back(trim(f));
  } else {
    method_names = {"gd"};
  }
  for (const std::string& name : method_names) {
    MethodSpec spec;
    spec.method = detail::parse_method_name(name);
    spec.eta = r.take_double(name + ".eta", spec.eta);
    spec.r = r.take_double(name + ".r", spec.r);
    spec.g_thres = r.take_double(name + ".g_thres", spec.g_thres);
    spec.tr = r.take_int(name + ".tr", spec.tr);
    if (r.has(name + ".derive_eps")) spec.derive_eps = r.take_double(name + ".derive_eps", 0.0);
    cfg.methods.push_back(spec);
  }

  cfg.seeds = r.take_u64_list("seeds", cfg.seeds);
  cfg.t_max = r.take_int("t_max", cfg.t_max);

  if (auto init = r.take("init")) {
    if (*init == "origin") cfg.init.kind = InitKind::origin;
    else if (*init == "near_saddle") cfg.init.kind = InitKind::near_saddle;
    else if (*init == "explicit") cfg.init.kind = InitKind::explicit_vector;
    else throw ParseError("unknown init '" + *init + "'");
  }
  cfg.init.explicit_vector = r.take_vec("init.vector", cfg.init.explicit_vector);
  cfg.init.search_start = r.take_vec("init.search_start", cfg.init.search_start);
  cfg.init.search_tries = r.take_int("init.search_tries", cfg.init.search_tries);
  cfg.init.radius_lo = r.take_double("init.radius_lo", cfg.init.radius_lo);
  cfg.init.radius_hi = r.take_double("init.radius_hi", cfg.init.radius_hi);
  cfg.init.search_seed = r.take_u64("init.search_seed", cfg.init.search_seed);
  cfg.init.eps_g = r.take_double("init.eps_g", cfg.init.eps_g);
  cfg.init.max_iters = r.take_int("init.max_iters", cfg.init.max_iters);
  cfg.init.offset_scale = r.take_double("init.offset_scale", cfg.init.offset_scale);
  cfg.init.offset_seed = r.take_u64("init.offset_seed", cfg.init.offset_seed);

  if (auto out = r.take("out_dir")) cfg.out_dir = *out;
  cfg.snapshot_thinning =
      static_cast<std::size_t>(r.take_int("snapshot_thinning", static_cast<std::int64_t>(cfg.snapshot_thinning)));
  cfg.eig_log_every = r.take_int("eig_log_every", cfg.eig_log_every);
  cfg.drop_frac = r.take_double("drop_frac", cfg.drop_frac);
  cfg.resample_tries = static_cast<int>(r.take_int("resample_tries", cfg.resample_tries));

  if (auto kind = r.take("measure.kind")) {
    if (*kind == "halfspace") cfg.measure.kind = ProblemKind::halfspace;
    else if (*kind == "mlp") cfg.measure.kind = ProblemKind::mlp;
    else throw ParseError("unknown measure.kind '" + *kind + "'");
  }
  cfg.measure.dims = r.take_size_list("measure.dims", cfg.measure.dims);
  cfg.measure.depths = r.take_size_list("measure.depths", cfg.measure.depths);
  cfg.measure.width = static_cast<std::size_t>(r.take_int("measure.width", static_cast<std::int64_t>(cfg.measure.width)));
  cfg.measure.classes = static_cast<std::size_t>(r.take_int("measure.classes", static_cast<std::int64_t>(cfg.measure.classes)));
  cfg.measure.n = static_cast<std::size_t>(r.take_int("measure.n", static_cast<std::int64_t>(cfg.measure.n)));
  cfg.measure.m = static_cast<std::size_t>(r.take_int("measure.m", static_cast<std::int64_t>(cfg.measure.m)));
  cfg.measure.param_scale = r.take_double("measure.param_scale", cfg.measure.param_scale);
  cfg.measure.iso_draws = static_cast<std::size_t>(r.take_int("measure.iso_draws", static_cast<std::int64_t>(cfg.measure.iso_draws)));
  cfg.measure.seed = r.take_u64("measure.seed", cfg.measure.seed);

  cfg.derive_constants.L = r.take_double("derive.L", cfg.derive_constants.L);
  cfg.derive_constants.ell = r.take_double("derive.ell", cfg.derive_constants.ell);
  cfg.derive_constants.rho = r.take_double("derive.rho", cfg.derive_constants.rho);
  cfg.derive_constants.gamma = r.take_double("derive.gamma", cfg.derive_constants.gamma);
  cfg.derive_constants.delta = r.take_double("derive.delta", cfg.derive_constants.delta);
  cfg.derive_constants.f_gap = r.take_double("derive.f_gap", cfg.derive_constants.f_gap);

  r.reject_unknown();

  // validation pass: collect every violation, then throw once
  std::vector<std::string> bad;
  if (cfg.methods.empty()) bad.push_back("methods: need at least one");
  if (cfg.seeds.empty()) bad.push_back("seeds: need at least one");
  if (cfg.t_max < 0) bad.push_back("t_max: must be nonnegative");
  for (const MethodSpec& m : cfg.methods) {
    std::string name = method_name(m.method);
    if (!(m.eta > 0.0)) bad.push_back(name + ".eta: must be positive");
    if (m.r < 0.0) bad.push_back(name + ".r: must be nonnegative");
    if (m.g_thres < 0.0) bad.push_back(name + ".g_thres: must be nonnegative");
    if (m.tr < 1) bad.push_back(name + ".tr: must be >= 1");
    if (m.derive_eps && !(*m.derive_eps > 0.0 && *m.derive_eps < 1.0))
      bad.push_back(name + ".derive_eps: must be in (0,1)");
    if (m.method == Method::cnc_sgd && !m.derive_eps && !(m.eta < m.r))
      bad.push_back(name + ": requires eta < r");
  }
  if (cfg.problem.kind == ProblemKind::halfspace) {
    if (cfg.problem.n < 2 || cfg.problem.n % 2 != 0) bad.push_back("problem.n: must be even and >= 2");
    if (cfg.problem.d < 1) bad.push_back("problem.d: must be >= 1");
    if (cfg.problem.reg_weight < 0.0) bad.push_back("problem.reg_weight: must be nonnegative");
  }
  if (cfg.problem.kind == ProblemKind::quadratic) {
    if (cfg.problem.h_diag.empty()) bad.push_back("problem.h_diag: must be non-empty");
    if (!cfg.problem.b.empty() && cfg.problem.b.size() != cfg.problem.h_diag.size())
      bad.push_back("problem.b: size must match problem.h_diag");
    if (!cfg.problem.noise_dir.empty() && cfg.problem.noise_dir.size() != cfg.problem.h_diag.size())
      bad.push_back("problem.noise_dir: size must match problem.h_diag");
    if (cfg.problem.noise_sigma < 0.0) bad.push_back("problem.noise_sigma: must be nonnegative");
  }
  if (cfg.problem.kind == ProblemKind::mlp && cfg.problem.layers.size() < 2)
    bad.push_back("problem.layers: need input and output layer");
  if (cfg.init.kind == InitKind::explicit_vector && cfg.init.explicit_vector.empty())
    bad.push_back("init.vector: required for explicit init");
  if (!(cfg.init.eps_g > 0.0)) bad.push_back("init.eps_g: must be positive");
  if (cfg.init.search_tries < 1) bad.push_back("init.search_tries: must be >= 1");
  if (!(cfg.init.radius_lo > 0.0 && cfg.init.radius_hi >= cfg.init.radius_lo))
    bad.push_back("init.radius_lo/hi: need 0 < lo <= hi");
  if (cfg.snapshot_thinning < 1) bad.push_back("snapshot_thinning: must be >= 1");
  if (cfg.eig_log_every < 0) bad.push_back("eig_log_every: must be nonnegative");
  if (!(cfg.drop_frac > 0.0 && cfg.drop_frac < 1.0)) bad.push_back("drop_frac: must be in (0,1)");
  if (cfg.resample_tries < 1) bad.push_back("resample_tries: must be >= 1");
  if (!bad.empty()) {
    std::string msg = "invalid config:";
    for (const std::string& b : bad) msg += "\n  " + b;
    throw ValidationError(msg);
  }
  return cfg;
}

// Gaussian halfspace escape benchmark: n=40, d=4, step size 1/4,
// perturbation radius 0.1, squared-gradient threshold 0.01, batch size 1,
// ten seeds, 2000 iterations. Separation 0 keeps the folded sample cloud
// symmetric so that the objective has proper finite saddle points; the
// start is the most negatively curved stationary point found by the
// multi-start search.
inline std::string preset_halfspaces_appendix_e() {
  return
      "problem.kind = halfspace\n"
      "problem.n = 40\n"
      "problem.d = 4\n"
      "problem.separation = 0\n"
      "problem.reg_weight = 0\n"
      "problem.data_seed = 25\n"
      "problem.loss = sigmoid\n"
      "methods = gd,sgd,iso_pgd,cnc_pgd\n"
      "gd.eta = 0.25\n"
      "sgd.eta = 0.25\n"
      "iso_pgd.eta = 0.25\n"
      "iso_pgd.r = 0.1\n"
      "iso_pgd.g_thres = 0.01\n"
      "iso_pgd.tr = 10\n"
      "cnc_pgd.eta = 0.25\n"
      "cnc_pgd.r = 0.1\n"
      "cnc_pgd.g_thres = 0.01\n"
      "cnc_pgd.tr = 1\n"
      "seeds = 1,2,3,4,5,6,7,8,9,10\n"
      "t_max = 2000\n"
      "init = near_saddle\n"
      "drop_frac = 0.01\n"
      "out_dir = out-appendix-e\n";
}

inline ExperimentConfig config_from_preset(const std::string& name) {
  if (name == "halfspaces-appendix-e") return parse_config(preset_halfspaces_appendix_e());
  throw ParseError("unknown preset '" + name + "'");
}

}  // namespace cnc
