#include "stt/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "stt/error.hpp"
#include "stt/flow.hpp"

namespace stt {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  fail(Err::config_error, path + ": " + what);
}

class Section {
 public:
  Section(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) bad(path_, "expected an object");
  }
  ~Section() = default;

  double number(const char* key, double fallback) {
    return fetch(key, fallback, [&](const json& v) {
      if (!v.is_number()) bad(path_ + "." + key, "expected a number");
      return v.get<double>();
    });
  }
  int integer(const char* key, int fallback) {
    return fetch(key, fallback, [&](const json& v) {
      if (!v.is_number_integer()) bad(path_ + "." + key, "expected an integer");
      return v.get<int>();
    });
  }
  std::uint64_t u64(const char* key, std::uint64_t fallback) {
    return fetch(key, fallback, [&](const json& v) {
      if (!v.is_number_unsigned() && !v.is_number_integer())
        bad(path_ + "." + key, "expected a nonnegative integer");
      return v.get<std::uint64_t>();
    });
  }
  std::string str(const char* key, const std::string& fallback) {
    return fetch(key, fallback, [&](const json& v) {
      if (!v.is_string()) bad(path_ + "." + key, "expected a string");
      return v.get<std::string>();
    });
  }
  std::vector<double> number_list(const char* key, const std::vector<double>& fallback) {
    return fetch(key, fallback, [&](const json& v) {
      if (!v.is_array()) bad(path_ + "." + key, "expected an array of numbers");
      std::vector<double> out;
      for (const auto& e : v) {
        if (!e.is_number()) bad(path_ + "." + key, "expected an array of numbers");
        out.push_back(e.get<double>());
      }
      return out;
    });
  }
  const json* object(const char* key) {
    seen_.insert(key);
    const auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }
  void finish() const {
    for (const auto& [key, _] : j_->items())
      if (!seen_.count(key)) bad(path_ + "." + key, "unknown key");
  }

 private:
  template <class T, class F>
  T fetch(const char* key, const T& fallback, F&& convert) {
    seen_.insert(key);
    const auto it = j_->find(key);
    if (it == j_->end()) return fallback;
    return convert(*it);
  }
  const json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(Err::config_error, std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Section root(j, "config");

  if (const json* d = root.object("domain")) {
    Section s(*d, "domain");
    cfg.domain.n = s.integer("n", cfg.domain.n);
    cfg.domain.r_omega = s.number("r_omega", cfg.domain.r_omega);
    cfg.domain.rho = s.number("rho", cfg.domain.rho);
    cfg.domain.h_offset = s.number("h_offset", cfg.domain.h_offset);
    s.finish();
  }
  if (const json* d = root.object("metrics")) {
    Section s(*d, "metrics");
    cfg.metrics.eps = s.number("eps", cfg.metrics.eps);
    cfg.metrics.atoms_per_field = s.integer("atoms_per_field", cfg.metrics.atoms_per_field);
    cfg.metrics.seed = s.u64("seed", cfg.metrics.seed);
    cfg.metrics.diffeo_amplitude = s.number("diffeo_amplitude", cfg.metrics.diffeo_amplitude);
    cfg.metrics.diffeo_seed = s.u64("diffeo_seed", cfg.metrics.diffeo_seed);
    s.finish();
  }
  if (const json* d = root.object("flow")) {
    Section s(*d, "flow");
    cfg.flow.step_factor = s.number("step_factor", cfg.flow.step_factor);
    cfg.flow.budget_factor = s.number("budget_factor", cfg.flow.budget_factor);
    s.finish();
  }
  if (const json* d = root.object("tau")) {
    Section s(*d, "tau");
    cfg.tau.points = s.integer("points", cfg.tau.points);
    cfg.tau.time_factor = s.number("time_factor", cfg.tau.time_factor);
    cfg.tau.T_factor = s.number("T_factor", cfg.tau.T_factor);
    s.finish();
  }
  if (const json* d = root.object("rays")) {
    Section s(*d, "rays");
    cfg.rays.rho_param = s.number("rho_param", cfg.rays.rho_param);
    cfg.rays.count = s.integer("count", cfg.rays.count);
    s.finish();
  }
  if (const json* d = root.object("fourier")) {
    Section s(*d, "fourier");
    cfg.fourier.N = s.integer("N", cfg.fourier.N);
    cfg.fourier.mu = s.number("mu", cfg.fourier.mu);
    cfg.fourier.rho1 = s.number("rho1", cfg.fourier.rho1);
    cfg.fourier.rho2 = s.number("rho2", cfg.fourier.rho2);
    cfg.fourier.y_points = s.integer("y_points", cfg.fourier.y_points);
    cfg.fourier.s_step = s.number("s_step", cfg.fourier.s_step);
    cfg.fourier.eta_stride = s.integer("eta_stride", cfg.fourier.eta_stride);
    s.finish();
  }
  if (const json* d = root.object("cone")) {
    Section s(*d, "cone");
    cfg.cone.N = s.integer("N", cfg.cone.N);
    cfg.cone.L = s.number("L", cfg.cone.L);
    cfg.cone.mu_list = s.number_list("mu_list", cfg.cone.mu_list);
    cfg.cone.K = s.number("K", cfg.cone.K);
    s.finish();
  }
  if (const json* d = root.object("contraction")) {
    Section s(*d, "contraction");
    cfg.contraction.slack = s.number("slack", cfg.contraction.slack);
    cfg.contraction.floor_abs = s.number("floor_abs", cfg.contraction.floor_abs);
    cfg.contraction.chart_N = s.integer("chart_N", cfg.contraction.chart_N);
    cfg.contraction.lattice_N = s.integer("lattice_N", cfg.contraction.lattice_N);
    s.finish();
  }
  cfg.experiment = root.str("experiment", cfg.experiment);
  cfg.seed = root.u64("seed", cfg.seed);
  cfg.workers = root.integer("workers", cfg.workers);
  cfg.out_dir = root.str("out_dir", cfg.out_dir);
  root.finish();

  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Err::io_error, "cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(text);
}

void ExperimentConfig::validate() const {
  domain.validate();
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) fail(Err::config_error, std::string(what) + " must be positive");
  };
  positive(metrics.eps + 1.0, "metrics.eps + 1");  // eps = 0 allowed
  if (metrics.eps < 0.0) fail(Err::config_error, "metrics.eps must be nonnegative");
  positive(flow.step_factor, "flow.step_factor");
  positive(flow.budget_factor, "flow.budget_factor");
  if (tau.points < 2) fail(Err::config_error, "tau.points must be >= 2");
  positive(tau.time_factor - 1.0, "tau.time_factor - 1 (pairs must be timelike)");
  if (!(rays.rho_param < -1.0))
    fail(Err::config_error, "rays.rho_param must be < -1 (timelike, close to light-like)");
  if (fourier.N < 8 || fourier.N % 2 != 0)
    fail(Err::config_error, "fourier.N must be an even integer >= 8");
  positive(fourier.mu, "fourier.mu");
  if (!(fourier.rho1 < -1.0) || !(fourier.rho2 < fourier.rho1))
    fail(Err::config_error, "need rho2 < rho1 < -1");
  positive(fourier.s_step, "fourier.s_step");
  if (fourier.eta_stride < 1) fail(Err::config_error, "fourier.eta_stride must be >= 1");
  if (cone.N < 16) fail(Err::config_error, "cone.N must be >= 16");
  positive(cone.L, "cone.L");
  for (double mu : cone.mu_list) positive(mu, "cone.mu_list entries");
  if (cone.K < 1.0) fail(Err::config_error, "cone.K must be >= 1");
  positive(contraction.slack, "contraction.slack");
  positive(contraction.floor_abs, "contraction.floor_abs");
  if (contraction.chart_N < 16 || contraction.lattice_N < 16)
    fail(Err::config_error, "contraction lattice sizes must be >= 16");
  static const std::set<std::string> known = {"metric-dump", "flow-trace", "tau",     "scatter",
                                              "straighten",  "identity",   "fourier", "riemannian",
                                              "full"};
  if (!known.count(experiment))
    fail(Err::config_error, "unknown experiment '" + experiment + "'");
  if (workers < 0) fail(Err::config_error, "workers must be >= 0");
}

std::string ExperimentConfig::canonical() const {
  nlohmann::json j;  // plain json keeps keys sorted: canonical by construction
  j["domain"] = {{"n", domain.n},
                 {"r_omega", domain.r_omega},
                 {"rho", domain.rho},
                 {"h_offset", domain.h_offset}};
  j["metrics"] = {{"eps", metrics.eps},
                  {"atoms_per_field", metrics.atoms_per_field},
                  {"seed", metrics.seed},
                  {"diffeo_amplitude", metrics.diffeo_amplitude},
                  {"diffeo_seed", metrics.diffeo_seed}};
  j["flow"] = {{"step_factor", flow.step_factor}, {"budget_factor", flow.budget_factor}};
  j["tau"] = {{"points", tau.points},
              {"time_factor", tau.time_factor},
              {"T_factor", tau.T_factor}};
  j["rays"] = {{"rho_param", rays.rho_param}, {"count", rays.count}};
  j["fourier"] = {{"N", fourier.N},         {"mu", fourier.mu},
                  {"rho1", fourier.rho1},   {"rho2", fourier.rho2},
                  {"y_points", fourier.y_points}, {"s_step", fourier.s_step},
                  {"eta_stride", fourier.eta_stride}};
  j["cone"] = {{"N", cone.N}, {"L", cone.L}, {"mu_list", cone.mu_list}, {"K", cone.K}};
  j["contraction"] = {{"slack", contraction.slack},
                      {"floor_abs", contraction.floor_abs},
                      {"chart_N", contraction.chart_N},
                      {"lattice_N", contraction.lattice_N}};
  j["experiment"] = experiment;
  j["seed"] = seed;
  j["workers"] = workers;
  return j.dump();
}

std::string ExperimentConfig::hash_hex() const {
  const std::string s = canonical();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

FlowOptions ExperimentConfig::flow_options() const {
  FlowOptions f;
  f.step = flow.step_factor * domain.rho;
  f.param_budget = flow.budget_factor * domain.rho;
  return f;
}

}  // namespace stt
