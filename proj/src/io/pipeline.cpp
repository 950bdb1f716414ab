#include "ldt/io/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>

#include "ldt/covariance.hpp"
#include "ldt/errors.hpp"
#include "ldt/estimates.hpp"
#include "ldt/io/artifacts.hpp"
#include "ldt/problems/kdv.hpp"
#include "ldt/problems/model2d.hpp"
#include "ldt/problems/ou.hpp"
#include "ldt/riccati.hpp"
#include "ldt/second_variation.hpp"

namespace ldt::io {

namespace {

std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string stage_stem(const RunConfig& cfg, const std::string& stage) {
  return stage + "_" + hex16(cfg.stage_hash(stage));
}

std::filesystem::path stage_manifest_path(const RunConfig& cfg, const PipelineOptions& opt,
                                          const std::string& stage) {
  return opt.out_dir / (stage_stem(cfg, stage) + ".json");
}

ProblemSpec make_problem(const RunConfig& cfg) {
  if (cfg.problem_type == "model2d") return make_model2d();
  if (cfg.problem_type == "ou") return make_ou(cfg.ou_kappa);
  if (cfg.problem_type == "kdv") return make_kdv(cfg.kdv);
  throw config_error("unknown problem type '" + cfg.problem_type + "'");
}

std::string zp(int i, const std::string& what) { return "z" + std::to_string(i) + "_" + what; }

void write_instanton_entry(ArtifactWriter& w, int i, const InstantonResult& r) {
  w.add_matrix(zp(i, "eta"), r.eta.values());
  w.add_matrix(zp(i, "phi"), r.phi.values());
  w.add_matrix(zp(i, "theta"), r.theta.values());
  w.add_scalar(zp(i, "lambda"), r.lambda);
  w.add_scalar(zp(i, "z"), r.z);
  w.add_scalar(zp(i, "rate"), r.rate);
  w.add_scalar(zp(i, "rate_adjoint"), r.rate_adjoint);
  w.add_scalar(zp(i, "obs"), r.obs);
  w.add_scalar(zp(i, "obs_residual"), r.obs_residual);
  w.add_scalar(zp(i, "first_order_residual"), r.first_order_residual);
  w.add_scalar(zp(i, "iterations"), static_cast<double>(r.iterations));
  w.add_scalar(zp(i, "final_grad_norm"), r.final_grad_norm);
  w.add_scalar(zp(i, "converged"), r.converged ? 1.0 : 0.0);
}

InstantonResult load_instanton_entry(const ArtifactReader& rd, const ProblemSpec& spec,
                                     GridPtr grid, int i) {
  InstantonResult r(grid, spec.noise_rank, spec.state_dim);
  r.eta.values() = rd.read_matrix(zp(i, "eta"));
  r.phi.values() = rd.read_matrix(zp(i, "phi"));
  r.theta.values() = rd.read_matrix(zp(i, "theta"));
  r.lambda = rd.scalar(zp(i, "lambda"));
  r.z = rd.scalar(zp(i, "z"));
  r.rate = rd.scalar(zp(i, "rate"));
  r.rate_adjoint = rd.scalar(zp(i, "rate_adjoint"));
  r.obs = rd.scalar(zp(i, "obs"));
  r.obs_residual = rd.scalar(zp(i, "obs_residual"));
  r.first_order_residual = rd.scalar(zp(i, "first_order_residual"));
  r.iterations = static_cast<long>(rd.scalar(zp(i, "iterations")));
  r.final_grad_norm = rd.scalar(zp(i, "final_grad_norm"));
  r.converged = rd.scalar(zp(i, "converged")) > 0.5;
  return r;
}

ArtifactReader open_stage(const RunConfig& cfg, const PipelineOptions& opt,
                          const std::string& stage) {
  return ArtifactReader(stage_manifest_path(cfg, opt, stage));
}

void run_instanton_stage(const RunConfig& cfg, const PipelineOptions& opt) {
  const ProblemSpec spec = make_problem(cfg);
  GridPtr grid = make_uniform_grid(cfg.n_steps, cfg.horizon);
  auto results = rate_function_sweep(spec, grid, cfg.z_values, cfg.instanton);
  ArtifactWriter w(opt.out_dir, stage_stem(cfg, "instanton"));
  w.set_run_id(stage_stem(cfg, "instanton"));
  w.set_config_hash(cfg.hash());
  w.add_note("stage", "instanton");
  w.add_note("problem", cfg.problem_type);
  w.add_scalar("n_z", static_cast<double>(results.size()));
  for (std::size_t i = 0; i < results.size(); ++i)
    write_instanton_entry(w, static_cast<int>(i), results[i]);
  w.finalize();
}

void run_spectrum_stage(const RunConfig& cfg, const PipelineOptions& opt) {
  const ProblemSpec spec = make_problem(cfg);
  GridPtr grid = make_uniform_grid(cfg.n_steps, cfg.horizon);
  ArtifactReader inst_rd = open_stage(cfg, opt, "instanton");
  const int n_z = static_cast<int>(inst_rd.scalar("n_z"));
  ArtifactWriter w(opt.out_dir, stage_stem(cfg, "spectrum"));
  w.set_run_id(stage_stem(cfg, "spectrum"));
  w.set_config_hash(cfg.hash());
  w.add_note("stage", "spectrum");
  w.add_scalar("n_z", n_z);
  w.add_vector("z_values", Eigen::Map<const Vector>(cfg.z_values.data(),
                                                    static_cast<Eigen::Index>(cfg.z_values.size())));
  for (int i = 0; i < n_z; ++i) {
    InstantonResult inst = load_instanton_entry(inst_rd, spec, grid, i);
    SecondVariationOperator::Config svc;
    svc.integ = cfg.instanton.integ;
    SecondVariationOperator sv(spec, inst, svc);
    PathOperator op;
    op.apply = [&sv](const Path& p) { return sv.apply(p); };
    op.grid = sv.grid_ptr();
    op.width = sv.width();
    SpectrumResult sr = dominant_eigenpairs(op, cfg.spectrum);
    Vector mu = Eigen::Map<const Vector>(sr.eigenvalues.data(),
                                         static_cast<Eigen::Index>(sr.eigenvalues.size()));
    Vector res = Eigen::Map<const Vector>(sr.residuals.data(),
                                          static_cast<Eigen::Index>(sr.residuals.size()));
    Vector pp = Eigen::Map<const Vector>(sr.partial_products.data(),
                                         static_cast<Eigen::Index>(sr.partial_products.size()));
    w.add_vector(zp(i, "eigenvalues"), mu);
    w.add_vector(zp(i, "residuals"), res);
    w.add_vector(zp(i, "partial_products"), pp);
    for (std::size_t k = 0; k < sr.eigenvectors.size(); ++k)
      w.add_matrix(zp(i, "mode" + std::to_string(k)), sr.eigenvectors[k].values());
    w.add_scalar(zp(i, "n_modes"), static_cast<double>(sr.eigenvectors.size()));
    w.add_scalar(zp(i, "operator_applications"), static_cast<double>(sr.operator_applications));
    w.add_scalar(zp(i, "converged"), sr.converged ? 1.0 : 0.0);
    w.add_scalar(zp(i, "assumption_ok"), sr.assumption_ok ? 1.0 : 0.0);
    FredholmResult det = fredholm_determinant(sr);
    w.add_scalar(zp(i, "det"), det.value);
    w.add_scalar(zp(i, "det_factors"), static_cast<double>(det.factors_used));
    w.add_scalar(zp(i, "det_converged"), det.converged ? 1.0 : 0.0);
  }
  w.finalize();
}

SpectrumResult load_spectrum_entry(const ArtifactReader& rd, GridPtr grid, int i) {
  SpectrumResult sr;
  Vector mu = rd.read_vector(zp(i, "eigenvalues"));
  Vector res = rd.read_vector(zp(i, "residuals"));
  Vector pp = rd.read_vector(zp(i, "partial_products"));
  sr.eigenvalues.assign(mu.data(), mu.data() + mu.size());
  sr.residuals.assign(res.data(), res.data() + res.size());
  sr.partial_products.assign(pp.data(), pp.data() + pp.size());
  const int n_modes = static_cast<int>(rd.scalar(zp(i, "n_modes")));
  for (int k = 0; k < n_modes; ++k)
    sr.eigenvectors.emplace_back(grid, rd.read_matrix(zp(i, "mode" + std::to_string(k))));
  sr.converged = rd.scalar(zp(i, "converged")) > 0.5;
  sr.assumption_ok = rd.scalar(zp(i, "assumption_ok")) > 0.5;
  return sr;
}

void run_riccati_stage(const RunConfig& cfg, const PipelineOptions& opt) {
  const ProblemSpec spec = make_problem(cfg);
  GridPtr grid = make_uniform_grid(cfg.n_steps, cfg.horizon);
  ArtifactReader inst_rd = open_stage(cfg, opt, "instanton");
  const int n_z = static_cast<int>(inst_rd.scalar("n_z"));
  ArtifactWriter w(opt.out_dir, stage_stem(cfg, "riccati"));
  w.set_run_id(stage_stem(cfg, "riccati"));
  w.set_config_hash(cfg.hash());
  w.add_note("stage", "riccati");
  w.add_scalar("n_z", n_z);
  for (int i = 0; i < n_z; ++i) {
    InstantonResult inst = load_instanton_entry(inst_rd, spec, grid, i);
    RiccatiResult rr = solve_riccati(spec, inst, cfg.riccati);
    w.add_matrix(zp(i, "q_final"), rr.q_final);
    w.add_matrix(zp(i, "u_final"), rr.u_final);
    w.add_scalar(zp(i, "trace_integral"), rr.trace_integral);
    w.add_scalar(zp(i, "prefactor"), prefactor_riccati(rr));
    w.add_matrix(zp(i, "cov_final"), final_time_covariance_riccati(rr));
    w.add_scalar(zp(i, "spikes"), static_cast<double>(rr.spike_nodes.size()));
  }
  w.finalize();
}

void run_estimate_stage(const RunConfig& cfg, const PipelineOptions& opt) {
  if (!cfg.spectrum_enabled && !cfg.riccati_enabled)
    throw config_error("estimate stage needs the spectrum or the riccati stage enabled");
  const ProblemSpec spec = make_problem(cfg);
  GridPtr grid = make_uniform_grid(cfg.n_steps, cfg.horizon);
  ArtifactReader inst_rd = open_stage(cfg, opt, "instanton");
  const int n_z = static_cast<int>(inst_rd.scalar("n_z"));
  std::optional<ArtifactReader> spec_rd;
  if (cfg.spectrum_enabled) spec_rd.emplace(stage_manifest_path(cfg, opt, "spectrum"));
  std::optional<ArtifactReader> ricc_rd;
  if (cfg.riccati_enabled) ricc_rd.emplace(stage_manifest_path(cfg, opt, "riccati"));

  ArtifactWriter w(opt.out_dir, stage_stem(cfg, "estimate"));
  w.set_run_id(stage_stem(cfg, "estimate"));
  w.set_config_hash(cfg.hash());
  w.add_note("stage", "estimate");
  w.add_scalar("n_z", n_z);
  w.add_scalar("n_eps", static_cast<double>(cfg.epsilons.size()));
  w.add_vector("z_values", Eigen::Map<const Vector>(cfg.z_values.data(),
                                                    static_cast<Eigen::Index>(cfg.z_values.size())));
  w.add_vector("epsilons", Eigen::Map<const Vector>(cfg.epsilons.data(),
                                                    static_cast<Eigen::Index>(cfg.epsilons.size())));
  for (int i = 0; i < n_z; ++i) {
    InstantonResult inst = load_instanton_entry(inst_rd, spec, grid, i);
    std::optional<double> ricc_prefactor;
    if (ricc_rd) ricc_prefactor = ricc_rd->scalar(zp(i, "prefactor"));
    w.add_scalar(zp(i, "rate"), inst.rate);
    w.add_scalar(zp(i, "lambda"), inst.lambda);
    std::optional<FredholmResult> det;
    if (spec_rd) {
      det.emplace();
      det->value = spec_rd->scalar(zp(i, "det"));
      det->factors_used = static_cast<int>(spec_rd->scalar(zp(i, "det_factors")));
      det->converged = spec_rd->scalar(zp(i, "det_converged")) > 0.5;
      w.add_scalar(zp(i, "det"), det->value);
      w.add_scalar(zp(i, "prefactor"), prefactor_fredholm(inst, *det));
    }
    if (ricc_prefactor) w.add_scalar(zp(i, "prefactor_riccati"), *ricc_prefactor);
    for (std::size_t j = 0; j < cfg.epsilons.size(); ++j) {
      const double eps = cfg.epsilons[j];
      const std::string ep = zp(i, "eps" + std::to_string(j) + "_");
      if (det) {
        EstimateReport rep = make_estimate_report(inst, *det, eps, ricc_prefactor);
        w.add_scalar(ep + "tail", rep.tail);
        w.add_scalar(ep + "log10_tail", rep.log10_tail);
        w.add_scalar(ep + "pdf", rep.pdf);
        if (ricc_prefactor)
          w.add_scalar(ep + "tail_riccati", tail_probability(inst.rate, *ricc_prefactor, eps));
      } else {
        w.add_scalar(ep + "tail", tail_probability(inst.rate, *ricc_prefactor, eps));
        w.add_scalar(ep + "log10_tail",
                     log10_tail_probability(inst.rate, *ricc_prefactor, eps));
        w.add_scalar(ep + "pdf", pdf_estimate(inst.rate, inst.lambda, *ricc_prefactor, eps));
        w.add_scalar(ep + "tail_riccati", tail_probability(inst.rate, *ricc_prefactor, eps));
      }
    }
  }
  w.finalize();
}

int nearest_node(const TimeGrid& grid, double t) {
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid.n_nodes(); ++i) {
    const double d = std::abs(grid.node(i) - t);
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

void run_tube_stage(const RunConfig& cfg, const PipelineOptions& opt) {
  if (!cfg.spectrum_enabled) throw config_error("tube stage needs the spectrum stage enabled");
  const ProblemSpec spec = make_problem(cfg);
  GridPtr grid = make_uniform_grid(cfg.n_steps, cfg.horizon);
  ArtifactReader inst_rd = open_stage(cfg, opt, "instanton");
  ArtifactReader spec_rd = open_stage(cfg, opt, "spectrum");
  const int n_z = static_cast<int>(inst_rd.scalar("n_z"));
  std::vector<double> times = cfg.tube_times;
  if (times.empty()) times = {0.25 * cfg.horizon, 0.5 * cfg.horizon, 0.75 * cfg.horizon, cfg.horizon};

  ArtifactWriter w(opt.out_dir, stage_stem(cfg, "tube"));
  w.set_run_id(stage_stem(cfg, "tube"));
  w.set_config_hash(cfg.hash());
  w.add_note("stage", "tube");
  w.add_scalar("n_z", n_z);
  w.add_scalar("n_times", static_cast<double>(times.size()));
  w.add_scalar("eps", cfg.epsilons.front());
  for (int i = 0; i < n_z; ++i) {
    InstantonResult inst = load_instanton_entry(inst_rd, spec, grid, i);
    SpectrumResult sr = load_spectrum_entry(spec_rd, grid, i);
    TubeConfig tc;
    tc.integ = cfg.instanton.integ;
    TubeModel tube = build_tube(spec, inst, sr, tc);
    for (std::size_t k = 0; k < times.size(); ++k) {
      const int node = nearest_node(*grid, times[k]);
      TubeModel::Marginal m = tube.marginal(node, cfg.epsilons.front());
      const std::string tp = zp(i, "t" + std::to_string(k) + "_");
      w.add_scalar(tp + "time", grid->node(node));
      w.add_vector(tp + "mean", m.mean);
      w.add_matrix(tp + "cov", m.covariance);
    }
  }
  w.finalize();
}

void run_sample_stage(const RunConfig& cfg, const PipelineOptions& opt) {
  if (!cfg.sampling_direct && !cfg.sampling_importance)
    throw config_error("sample stage needs sampling.direct or sampling.importance enabled");
  const ProblemSpec spec = make_problem(cfg);
  GridPtr grid = make_uniform_grid(cfg.n_steps, cfg.horizon);
  std::optional<ArtifactReader> inst_rd;
  if (cfg.sampling_importance) inst_rd.emplace(stage_manifest_path(cfg, opt, "instanton"));

  ArtifactWriter w(opt.out_dir, stage_stem(cfg, "sample"));
  w.set_run_id(stage_stem(cfg, "sample"));
  w.set_config_hash(cfg.hash());
  w.add_note("stage", "sample");
  w.add_scalar("n_z", static_cast<double>(cfg.z_values.size()));
  w.add_scalar("n_eps", static_cast<double>(cfg.epsilons.size()));
  for (std::size_t i = 0; i < cfg.z_values.size(); ++i) {
    for (std::size_t j = 0; j < cfg.epsilons.size(); ++j) {
      McConfig mc = cfg.sampling;
      mc.eps = cfg.epsilons[j];
      mc.seed = cfg.seed;
      mc.threads = cfg.threads;
      const std::string ep = zp(static_cast<int>(i), "eps" + std::to_string(j) + "_");
      if (cfg.sampling_direct) {
        McTailResult r = direct_tail_mc(spec, grid, cfg.z_values[i], mc);
        w.add_scalar(ep + "direct_estimate", r.estimate);
        w.add_scalar(ep + "direct_low", r.interval.low);
        w.add_scalar(ep + "direct_high", r.interval.high);
        w.add_scalar(ep + "direct_hits", static_cast<double>(r.hits));
        w.add_scalar(ep + "direct_failures", static_cast<double>(r.failures));
        w.add_scalar(ep + "direct_n", static_cast<double>(r.n_samples));
      }
      if (cfg.sampling_importance) {
        InstantonResult inst = load_instanton_entry(*inst_rd, spec, grid, static_cast<int>(i));
        IsTailResult r = importance_sampled_tail(spec, inst, mc);
        w.add_scalar(ep + "is_estimate", r.estimate);
        w.add_scalar(ep + "is_std_error", r.std_error);
        w.add_scalar(ep + "is_n", static_cast<double>(r.n_samples));
        w.add_scalar(ep + "is_ess", r.effective_sample_size);
      }
    }
  }
  w.finalize();
}

RunConfig apply_overrides(const RunConfig& cfg, const PipelineOptions& opt) {
  RunConfig c = cfg;
  if (opt.seed) c.seed = *opt.seed;
  if (opt.threads) c.threads = *opt.threads;
  return c;
}

bool stage_cached(const RunConfig& cfg, const PipelineOptions& opt, const std::string& stage) {
  return std::filesystem::exists(stage_manifest_path(cfg, opt, stage));
}

void dispatch_stage(const RunConfig& cfg, const PipelineOptions& opt, const std::string& stage) {
  if (stage_cached(cfg, opt, stage)) return;
  std::filesystem::create_directories(opt.out_dir);
  if (stage == "instanton") {
    run_instanton_stage(cfg, opt);
  } else if (stage == "spectrum") {
    run_spectrum_stage(cfg, opt);
  } else if (stage == "riccati") {
    run_riccati_stage(cfg, opt);
  } else if (stage == "estimate") {
    run_estimate_stage(cfg, opt);
  } else if (stage == "tube") {
    run_tube_stage(cfg, opt);
  } else if (stage == "sample") {
    run_sample_stage(cfg, opt);
  } else {
    throw config_error("unknown stage '" + stage + "'");
  }
}

void ensure_upstream(const RunConfig& cfg, const PipelineOptions& opt, const std::string& stage) {
  if (stage == "instanton") return;
  if (stage == "sample" && !cfg.sampling_importance) return;
  dispatch_stage(cfg, opt, "instanton");
  if (stage == "estimate" || stage == "tube") {
    if (cfg.spectrum_enabled) dispatch_stage(cfg, opt, "spectrum");
    if (stage == "estimate" && cfg.riccati_enabled) dispatch_stage(cfg, opt, "riccati");
  }
}

}  // namespace

void run_stage(const RunConfig& cfg, const PipelineOptions& opt, const std::string& stage) {
  const auto& stages = pipeline_stages();
  if (std::find(stages.begin(), stages.end(), stage) == stages.end())
    throw config_error("unknown stage '" + stage + "'");
  RunConfig c = apply_overrides(cfg, opt);
  ensure_upstream(c, opt, stage);
  dispatch_stage(c, opt, stage);
}

void run_pipeline(const RunConfig& cfg, const PipelineOptions& opt) {
  RunConfig c = apply_overrides(cfg, opt);
  std::filesystem::create_directories(opt.out_dir);
  nlohmann::json summary;
  summary["config"] = c.to_json();
  summary["config_hash"] = c.hash();
  auto record = [&](const std::string& stage) {
    dispatch_stage(c, opt, stage);
    summary["stages"][stage] = stage_stem(c, stage);
  };
  record("instanton");
  if (c.spectrum_enabled) record("spectrum");
  if (c.riccati_enabled) record("riccati");
  if (c.spectrum_enabled || c.riccati_enabled) record("estimate");
  if (c.tube_enabled) record("tube");
  if (c.sampling_direct || c.sampling_importance) record("sample");
  const std::filesystem::path summary_path = opt.out_dir / ("run_" + hex16(c.hash()) + ".json");
  std::ofstream out(summary_path, std::ios::trunc);
  if (!out) throw config_error("cannot write " + summary_path.string());
  out << summary.dump(2) << "\n";
}

}  // namespace ldt::io
