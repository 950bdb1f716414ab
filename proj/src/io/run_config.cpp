#include "ldt/io/run_config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <string>

#include "ldt/errors.hpp"

namespace ldt::io {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw config_error("config: " + msg); }

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where + " must be an object");
}

void reject_unknown(const json& j, const std::string& where,
                    std::initializer_list<const char*> keys) {
  expect_object(j, where);
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) fail("unknown key '" + item.key() + "' in " + where);
  }
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(where + " must be finite");
  return x;
}

long as_integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where + " must be an integer");
  return v.get<long>();
}

std::uint64_t as_u64(const json& v, const std::string& where) {
  if (!v.is_number_unsigned() && !v.is_number_integer()) fail(where + " must be an integer");
  if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
    fail(where + " must be nonnegative");
  return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) fail(where + " must be a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where + " must be a string");
  return v.get<std::string>();
}

std::vector<double> as_number_array(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where + " must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(as_number(e, where + " entry"));
  return out;
}

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

Scheme parse_scheme(const std::string& s, const std::string& where) {
  if (s == "euler_if") return Scheme::euler_if;
  if (s == "rk2_if") return Scheme::rk2_if;
  fail(where + ": unknown scheme '" + s + "'");
}

std::string scheme_name(Scheme s) { return s == Scheme::euler_if ? "euler_if" : "rk2_if"; }

McScheme parse_mc_scheme(const std::string& s, const std::string& where) {
  if (s == "euler_maruyama_if") return McScheme::euler_maruyama_if;
  if (s == "heun_if") return McScheme::heun_if;
  fail(where + ": unknown scheme '" + s + "'");
}

std::string mc_scheme_name(McScheme s) {
  return s == McScheme::euler_maruyama_if ? "euler_maruyama_if" : "heun_if";
}

InstantonConfig::Method parse_method(const std::string& s, const std::string& where) {
  if (s == "automatic") return InstantonConfig::Method::automatic;
  if (s == "gradient_descent") return InstantonConfig::Method::gradient_descent;
  if (s == "lbfgs") return InstantonConfig::Method::lbfgs;
  fail(where + ": unknown method '" + s + "'");
}

std::string method_name(InstantonConfig::Method m) {
  switch (m) {
    case InstantonConfig::Method::gradient_descent:
      return "gradient_descent";
    case InstantonConfig::Method::lbfgs:
      return "lbfgs";
    default:
      return "automatic";
  }
}

IntegratorConfig parse_integrator(const json& j) {
  reject_unknown(j, "integrator", {"scheme", "use_linear_part"});
  IntegratorConfig out;
  if (const json* v = find(j, "scheme"))
    out.scheme = parse_scheme(as_string(*v, "integrator.scheme"), "integrator.scheme");
  if (const json* v = find(j, "use_linear_part"))
    out.use_linear_part = as_bool(*v, "integrator.use_linear_part");
  return out;
}

InstantonConfig parse_instanton(const json& j) {
  reject_unknown(j, "instanton",
                 {"penalty_schedule", "grad_reduction_inner", "grad_reduction_final",
                  "constraint_tol", "max_final_stages", "max_iterations", "method",
                  "lbfgs_memory", "precondition", "armijo_c1", "backtrack", "max_line_search",
                  "n_starts", "start_seed", "start_amplitude"});
  InstantonConfig out;
  if (const json* v = find(j, "penalty_schedule")) {
    out.penalty_schedule = as_number_array(*v, "instanton.penalty_schedule");
    for (std::size_t i = 0; i < out.penalty_schedule.size(); ++i) {
      if (out.penalty_schedule[i] <= 0.0) fail("instanton.penalty_schedule must be positive");
      if (i > 0 && out.penalty_schedule[i] < out.penalty_schedule[i - 1])
        fail("instanton.penalty_schedule must be nondecreasing");
    }
  }
  if (const json* v = find(j, "grad_reduction_inner")) {
    out.grad_reduction_inner = as_number(*v, "instanton.grad_reduction_inner");
    if (out.grad_reduction_inner < 1.0) fail("instanton.grad_reduction_inner must be >= 1");
  }
  if (const json* v = find(j, "grad_reduction_final")) {
    out.grad_reduction_final = as_number(*v, "instanton.grad_reduction_final");
    if (out.grad_reduction_final < 1.0) fail("instanton.grad_reduction_final must be >= 1");
  }
  if (const json* v = find(j, "constraint_tol")) {
    out.constraint_tol = as_number(*v, "instanton.constraint_tol");
    if (out.constraint_tol <= 0.0) fail("instanton.constraint_tol must be positive");
  }
  if (const json* v = find(j, "max_final_stages")) {
    out.max_final_stages = static_cast<int>(as_integer(*v, "instanton.max_final_stages"));
    if (out.max_final_stages < 1) fail("instanton.max_final_stages must be >= 1");
  }
  if (const json* v = find(j, "max_iterations")) {
    out.max_iterations = as_integer(*v, "instanton.max_iterations");
    if (out.max_iterations < 1) fail("instanton.max_iterations must be >= 1");
  }
  if (const json* v = find(j, "method"))
    out.method = parse_method(as_string(*v, "instanton.method"), "instanton.method");
  if (const json* v = find(j, "lbfgs_memory")) {
    out.lbfgs_memory = static_cast<int>(as_integer(*v, "instanton.lbfgs_memory"));
    if (out.lbfgs_memory < 1) fail("instanton.lbfgs_memory must be >= 1");
  }
  if (const json* v = find(j, "precondition")) out.precondition = as_bool(*v, "instanton.precondition");
  if (const json* v = find(j, "armijo_c1")) {
    out.armijo_c1 = as_number(*v, "instanton.armijo_c1");
    if (out.armijo_c1 <= 0.0 || out.armijo_c1 >= 1.0) fail("instanton.armijo_c1 must be in (0,1)");
  }
  if (const json* v = find(j, "backtrack")) {
    out.backtrack = as_number(*v, "instanton.backtrack");
    if (out.backtrack <= 0.0 || out.backtrack >= 1.0) fail("instanton.backtrack must be in (0,1)");
  }
  if (const json* v = find(j, "max_line_search")) {
    out.max_line_search = static_cast<int>(as_integer(*v, "instanton.max_line_search"));
    if (out.max_line_search < 1) fail("instanton.max_line_search must be >= 1");
  }
  if (const json* v = find(j, "n_starts")) {
    out.n_starts = static_cast<int>(as_integer(*v, "instanton.n_starts"));
    if (out.n_starts < 1) fail("instanton.n_starts must be >= 1");
  }
  if (const json* v = find(j, "start_seed")) out.start_seed = as_u64(*v, "instanton.start_seed");
  if (const json* v = find(j, "start_amplitude")) {
    out.start_amplitude = as_number(*v, "instanton.start_amplitude");
    if (out.start_amplitude < 0.0) fail("instanton.start_amplitude must be nonnegative");
  }
  return out;
}

json instanton_to_json(const InstantonConfig& c) {
  json j;
  j["penalty_schedule"] = c.penalty_schedule;
  j["grad_reduction_inner"] = c.grad_reduction_inner;
  j["grad_reduction_final"] = c.grad_reduction_final;
  j["constraint_tol"] = c.constraint_tol;
  j["max_final_stages"] = c.max_final_stages;
  j["max_iterations"] = c.max_iterations;
  j["method"] = method_name(c.method);
  j["lbfgs_memory"] = c.lbfgs_memory;
  j["precondition"] = c.precondition;
  j["armijo_c1"] = c.armijo_c1;
  j["backtrack"] = c.backtrack;
  j["max_line_search"] = c.max_line_search;
  j["n_starts"] = c.n_starts;
  j["start_seed"] = c.start_seed;
  j["start_amplitude"] = c.start_amplitude;
  return j;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  reject_unknown(j, "config",
                 {"problem", "grid", "targets", "integrator", "instanton", "spectrum",
                  "riccati", "tube", "sampling", "seed", "threads"});
  RunConfig out;

  const json* problem = find(j, "problem");
  if (!problem) fail("missing section 'problem'");
  reject_unknown(*problem, "problem", {"type", "ou_kappa", "kdv"});
  const json* type = find(*problem, "type");
  if (!type) fail("problem.type is required");
  out.problem_type = as_string(*type, "problem.type");
  if (out.problem_type != "model2d" && out.problem_type != "ou" && out.problem_type != "kdv")
    fail("problem.type must be one of model2d, ou, kdv");
  if (const json* v = find(*problem, "ou_kappa")) {
    out.ou_kappa = as_number(*v, "problem.ou_kappa");
    if (out.ou_kappa <= 0.0) fail("problem.ou_kappa must be positive");
  }
  if (const json* v = find(*problem, "kdv")) {
    reject_unknown(*v, "problem.kdv", {"n_x", "nu", "kappa", "dealias"});
    if (const json* w = find(*v, "n_x")) out.kdv.n_x = static_cast<int>(as_integer(*w, "problem.kdv.n_x"));
    if (const json* w = find(*v, "nu")) out.kdv.nu = as_number(*w, "problem.kdv.nu");
    if (const json* w = find(*v, "kappa")) out.kdv.kappa = as_number(*w, "problem.kdv.kappa");
    if (const json* w = find(*v, "dealias")) out.kdv.dealias = as_bool(*w, "problem.kdv.dealias");
    if (out.kdv.n_x < 8 || (out.kdv.n_x & (out.kdv.n_x - 1)) != 0)
      fail("problem.kdv.n_x must be a power of two >= 8");
    if (out.kdv.nu <= 0.0) fail("problem.kdv.nu must be positive");
  }

  const json* grid = find(j, "grid");
  if (!grid) fail("missing section 'grid'");
  reject_unknown(*grid, "grid", {"n_steps", "horizon"});
  const json* n_steps = find(*grid, "n_steps");
  if (!n_steps) fail("grid.n_steps is required");
  out.n_steps = static_cast<int>(as_integer(*n_steps, "grid.n_steps"));
  if (out.n_steps < 1) fail("grid.n_steps must be >= 1");
  if (const json* v = find(*grid, "horizon")) {
    out.horizon = as_number(*v, "grid.horizon");
    if (out.horizon <= 0.0) fail("grid.horizon must be positive");
  }

  const json* targets = find(j, "targets");
  if (!targets) fail("missing section 'targets'");
  reject_unknown(*targets, "targets", {"z_values", "epsilons"});
  const json* zv = find(*targets, "z_values");
  if (!zv) fail("targets.z_values is required");
  out.z_values = as_number_array(*zv, "targets.z_values");
  if (out.z_values.empty()) fail("targets.z_values must be nonempty");
  for (std::size_t i = 1; i < out.z_values.size(); ++i)
    if (out.z_values[i] <= out.z_values[i - 1]) fail("targets.z_values must be strictly increasing");
  if (const json* v = find(*targets, "epsilons")) {
    out.epsilons = as_number_array(*v, "targets.epsilons");
    for (double e : out.epsilons)
      if (e <= 0.0) fail("targets.epsilons must be positive");
  }
  if (out.epsilons.empty()) out.epsilons = {1.0};

  IntegratorConfig integ;
  if (const json* v = find(j, "integrator")) integ = parse_integrator(*v);

  if (const json* v = find(j, "instanton")) out.instanton = parse_instanton(*v);
  out.instanton.integ = integ;

  if (const json* v = find(j, "spectrum")) {
    reject_unknown(*v, "spectrum", {"enabled", "n_pairs", "tol", "max_basis", "max_restarts", "seed"});
    if (const json* w = find(*v, "enabled")) out.spectrum_enabled = as_bool(*w, "spectrum.enabled");
    if (const json* w = find(*v, "n_pairs")) {
      out.spectrum.n_pairs = static_cast<int>(as_integer(*w, "spectrum.n_pairs"));
      if (out.spectrum.n_pairs < 1) fail("spectrum.n_pairs must be >= 1");
    }
    if (const json* w = find(*v, "tol")) {
      out.spectrum.tol = as_number(*w, "spectrum.tol");
      if (out.spectrum.tol <= 0.0) fail("spectrum.tol must be positive");
    }
    if (const json* w = find(*v, "max_basis")) {
      out.spectrum.max_basis = static_cast<int>(as_integer(*w, "spectrum.max_basis"));
      if (out.spectrum.max_basis < 0) fail("spectrum.max_basis must be nonnegative");
    }
    if (const json* w = find(*v, "max_restarts")) {
      out.spectrum.max_restarts = static_cast<int>(as_integer(*w, "spectrum.max_restarts"));
      if (out.spectrum.max_restarts < 0) fail("spectrum.max_restarts must be nonnegative");
    }
    if (const json* w = find(*v, "seed")) out.spectrum.seed = as_u64(*w, "spectrum.seed");
  }

  if (const json* v = find(j, "riccati")) {
    reject_unknown(*v, "riccati", {"enabled", "dense_cap", "blowup_norm", "spike_factor", "store_path"});
    if (const json* w = find(*v, "enabled")) out.riccati_enabled = as_bool(*w, "riccati.enabled");
    if (const json* w = find(*v, "dense_cap")) {
      out.riccati.dense_cap = static_cast<int>(as_integer(*w, "riccati.dense_cap"));
      if (out.riccati.dense_cap < 1) fail("riccati.dense_cap must be >= 1");
    }
    if (const json* w = find(*v, "blowup_norm")) {
      out.riccati.blowup_norm = as_number(*w, "riccati.blowup_norm");
      if (out.riccati.blowup_norm <= 0.0) fail("riccati.blowup_norm must be positive");
    }
    if (const json* w = find(*v, "spike_factor")) {
      out.riccati.spike_factor = as_number(*w, "riccati.spike_factor");
      if (out.riccati.spike_factor <= 1.0) fail("riccati.spike_factor must be > 1");
    }
    if (const json* w = find(*v, "store_path")) out.riccati.store_path = as_bool(*w, "riccati.store_path");
  }
  out.riccati.integ = integ;

  if (const json* v = find(j, "tube")) {
    reject_unknown(*v, "tube", {"enabled", "times"});
    if (const json* w = find(*v, "enabled")) out.tube_enabled = as_bool(*w, "tube.enabled");
    if (const json* w = find(*v, "times")) {
      out.tube_times = as_number_array(*w, "tube.times");
      for (double t : out.tube_times)
        if (t < 0.0 || t > out.horizon) fail("tube.times must lie in [0, horizon]");
    }
  }

  if (const json* v = find(j, "sampling")) {
    reject_unknown(*v, "sampling",
                   {"direct", "importance", "n_samples", "scheme", "conditioning_tol"});
    if (const json* w = find(*v, "direct")) out.sampling_direct = as_bool(*w, "sampling.direct");
    if (const json* w = find(*v, "importance"))
      out.sampling_importance = as_bool(*w, "sampling.importance");
    if (const json* w = find(*v, "n_samples")) {
      out.sampling.n_samples = as_integer(*w, "sampling.n_samples");
      if (out.sampling.n_samples < 0) fail("sampling.n_samples must be nonnegative");
    }
    if (const json* w = find(*v, "scheme"))
      out.sampling.scheme = parse_mc_scheme(as_string(*w, "sampling.scheme"), "sampling.scheme");
    if (const json* w = find(*v, "conditioning_tol")) {
      out.sampling.conditioning_tol = as_number(*w, "sampling.conditioning_tol");
      if (out.sampling.conditioning_tol <= 0.0) fail("sampling.conditioning_tol must be positive");
    }
    if ((out.sampling_direct || out.sampling_importance) && out.sampling.n_samples < 1)
      fail("sampling.n_samples must be >= 1 when sampling is enabled");
  }

  if (const json* v = find(j, "seed")) out.seed = as_u64(*v, "seed");
  if (const json* v = find(j, "threads")) {
    out.threads = static_cast<int>(as_integer(*v, "threads"));
    if (out.threads < 1) fail("threads must be >= 1");
  }

  if (out.problem_type == "kdv" && !out.instanton.integ.use_linear_part)
    fail("kdv requires integrator.use_linear_part = true");

  return out;
}

RunConfig RunConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail("cannot open config file " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail("invalid JSON in " + file.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  json j;
  j["problem"]["type"] = problem_type;
  j["problem"]["ou_kappa"] = ou_kappa;
  j["problem"]["kdv"] = {{"n_x", kdv.n_x}, {"nu", kdv.nu}, {"kappa", kdv.kappa},
                         {"dealias", kdv.dealias}};
  j["grid"]["n_steps"] = n_steps;
  j["grid"]["horizon"] = horizon;
  j["targets"]["z_values"] = z_values;
  j["targets"]["epsilons"] = epsilons;
  j["integrator"] = {{"scheme", scheme_name(instanton.integ.scheme)},
                     {"use_linear_part", instanton.integ.use_linear_part}};
  j["instanton"] = instanton_to_json(instanton);
  j["spectrum"] = {{"enabled", spectrum_enabled},
                   {"n_pairs", spectrum.n_pairs},
                   {"tol", spectrum.tol},
                   {"max_basis", spectrum.max_basis},
                   {"max_restarts", spectrum.max_restarts},
                   {"seed", spectrum.seed}};
  j["riccati"] = {{"enabled", riccati_enabled},
                  {"dense_cap", riccati.dense_cap},
                  {"blowup_norm", riccati.blowup_norm},
                  {"spike_factor", riccati.spike_factor},
                  {"store_path", riccati.store_path}};
  j["tube"] = {{"enabled", tube_enabled}, {"times", tube_times}};
  j["sampling"] = {{"direct", sampling_direct},
                   {"importance", sampling_importance},
                   {"n_samples", sampling.n_samples},
                   {"scheme", mc_scheme_name(sampling.scheme)},
                   {"conditioning_tol", sampling.conditioning_tol}};
  j["seed"] = seed;
  j["threads"] = threads;
  return j;
}

std::string RunConfig::canonical() const {
  // nlohmann object keys are stored sorted; dump() emits shortest
  // round-trip numbers, so this string is stable under input reordering.
  return to_json().dump();
}

std::uint64_t RunConfig::hash() const { return fnv1a(canonical()); }

std::uint64_t RunConfig::stage_hash(const std::string& stage) const {
  json full = to_json();
  json sub;
  sub["problem"] = full["problem"];
  sub["grid"] = full["grid"];
  sub["integrator"] = full["integrator"];
  sub["z_values"] = full["targets"]["z_values"];
  sub["instanton"] = full["instanton"];
  if (stage == "instanton") {
  } else if (stage == "spectrum") {
    sub["spectrum"] = full["spectrum"];
  } else if (stage == "riccati") {
    sub["riccati"] = full["riccati"];
  } else if (stage == "estimate") {
    sub["spectrum"] = full["spectrum"];
    sub["riccati"] = full["riccati"];
    sub["epsilons"] = full["targets"]["epsilons"];
  } else if (stage == "tube") {
    sub["spectrum"] = full["spectrum"];
    sub["tube"] = full["tube"];
    sub["epsilons"] = full["targets"]["epsilons"];
  } else if (stage == "sample") {
    sub["sampling"] = full["sampling"];
    sub["epsilons"] = full["targets"]["epsilons"];
    sub["seed"] = full["seed"];
  } else {
    fail("unknown stage '" + stage + "'");
  }
  return fnv1a(sub.dump());
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace ldt::io
