#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>

#include "ldt/errors.hpp"
#include "ldt/io/artifacts.hpp"
#include "ldt/io/pipeline.hpp"

namespace ldt::io {

namespace {

namespace fs = std::filesystem;

/// Latest manifest in out_dir whose name starts with "<stage>_".
std::optional<fs::path> latest_manifest(const fs::path& out_dir, const std::string& stage) {
  std::optional<fs::path> best;
  fs::file_time_type best_time{};
  if (!fs::exists(out_dir)) return best;
  const std::string prefix = stage + "_";
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    const std::string name = entry.path().stem().string();
    if (name.rfind(prefix, 0) != 0) continue;
    const auto t = entry.last_write_time();
    if (!best || t > best_time) {
      best = entry.path();
      best_time = t;
    }
  }
  return best;
}

ArtifactReader require_manifest(const fs::path& out_dir, const std::string& stage) {
  auto p = latest_manifest(out_dir, stage);
  if (!p) throw config_error("no '" + stage + "' artifacts found in " + out_dir.string());
  return ArtifactReader(*p);
}

std::ofstream open_csv(const fs::path& out_dir, const std::string& which) {
  std::ofstream out(out_dir / (which + ".csv"), std::ios::trunc);
  if (!out) throw config_error("cannot write " + (out_dir / (which + ".csv")).string());
  out << std::setprecision(17);
  return out;
}

std::string zp(int i, const std::string& what) { return "z" + std::to_string(i) + "_" + what; }

void export_eigen_decay(const fs::path& out_dir) {
  ArtifactReader rd = require_manifest(out_dir, "spectrum");
  Vector zs = rd.read_vector("z_values");
  std::ofstream out = open_csv(out_dir, "eigen_decay");
  out << "z,index,mu,abs_mu,residual\n";
  const int n_z = static_cast<int>(rd.scalar("n_z"));
  for (int i = 0; i < n_z; ++i) {
    Vector mu = rd.read_vector(zp(i, "eigenvalues"));
    Vector res = rd.read_vector(zp(i, "residuals"));
    for (Eigen::Index k = 0; k < mu.size(); ++k)
      out << zs[i] << "," << k << "," << mu[k] << "," << std::abs(mu[k]) << "," << res[k] << "\n";
  }
}

void export_det_convergence(const fs::path& out_dir) {
  ArtifactReader rd = require_manifest(out_dir, "spectrum");
  Vector zs = rd.read_vector("z_values");
  std::ofstream out = open_csv(out_dir, "det_convergence");
  out << "z,n_factors,partial_product\n";
  const int n_z = static_cast<int>(rd.scalar("n_z"));
  for (int i = 0; i < n_z; ++i) {
    Vector pp = rd.read_vector(zp(i, "partial_products"));
    for (Eigen::Index k = 0; k < pp.size(); ++k) out << zs[i] << "," << k + 1 << "," << pp[k] << "\n";
  }
}

void export_tail_vs_z(const fs::path& out_dir) {
  ArtifactReader rd = require_manifest(out_dir, "estimate");
  Vector zs = rd.read_vector("z_values");
  Vector eps = rd.read_vector("epsilons");
  const auto& scalars = rd.manifest().scalars;
  std::ofstream out = open_csv(out_dir, "tail_vs_z");
  out << "z,eps,rate,lambda,det,prefactor,prefactor_riccati,tail,log10_tail,pdf\n";
  auto opt_scalar = [&](const std::string& name) -> std::string {
    auto it = scalars.find(name);
    if (it == scalars.end()) return "";
    std::ostringstream s;
    s << std::setprecision(17) << it->second;
    return s.str();
  };
  const int n_z = static_cast<int>(rd.scalar("n_z"));
  const int n_eps = static_cast<int>(rd.scalar("n_eps"));
  for (int i = 0; i < n_z; ++i) {
    for (int j = 0; j < n_eps; ++j) {
      const std::string ep = zp(i, "eps" + std::to_string(j) + "_");
      out << zs[i] << "," << eps[j] << "," << rd.scalar(zp(i, "rate")) << ","
          << rd.scalar(zp(i, "lambda")) << "," << opt_scalar(zp(i, "det")) << ","
          << opt_scalar(zp(i, "prefactor")) << "," << opt_scalar(zp(i, "prefactor_riccati"))
          << "," << rd.scalar(ep + "tail") << "," << rd.scalar(ep + "log10_tail") << ","
          << rd.scalar(ep + "pdf") << "\n";
    }
  }
}

void export_tube_slices(const fs::path& out_dir) {
  ArtifactReader rd = require_manifest(out_dir, "tube");
  std::ofstream out = open_csv(out_dir, "tube_slices");
  out << "z_index,time,i,j,mean_i,cov_ij\n";
  const int n_z = static_cast<int>(rd.scalar("n_z"));
  const int n_times = static_cast<int>(rd.scalar("n_times"));
  for (int i = 0; i < n_z; ++i) {
    for (int k = 0; k < n_times; ++k) {
      const std::string tp = zp(i, "t" + std::to_string(k) + "_");
      const double t = rd.scalar(tp + "time");
      Vector mean = rd.read_vector(tp + "mean");
      Matrix cov = rd.read_matrix(tp + "cov");
      for (Eigen::Index a = 0; a < cov.rows(); ++a)
        for (Eigen::Index b = 0; b < cov.cols(); ++b)
          out << i << "," << t << "," << a << "," << b << "," << mean[a] << "," << cov(a, b)
              << "\n";
    }
  }
}

void export_rate_sweep(const fs::path& out_dir) {
  ArtifactReader rd = require_manifest(out_dir, "instanton");
  std::ofstream out = open_csv(out_dir, "rate_sweep");
  out << "z,rate,lambda,iterations,final_grad_norm,converged\n";
  const int n_z = static_cast<int>(rd.scalar("n_z"));
  for (int i = 0; i < n_z; ++i) {
    out << rd.scalar(zp(i, "z")) << "," << rd.scalar(zp(i, "rate")) << ","
        << rd.scalar(zp(i, "lambda")) << "," << rd.scalar(zp(i, "iterations")) << ","
        << rd.scalar(zp(i, "final_grad_norm")) << "," << rd.scalar(zp(i, "converged")) << "\n";
  }
}

}  // namespace

void export_plot_data(const std::filesystem::path& out_dir, const std::string& which) {
  if (which == "eigen_decay") {
    export_eigen_decay(out_dir);
  } else if (which == "det_convergence") {
    export_det_convergence(out_dir);
  } else if (which == "tail_vs_z") {
    export_tail_vs_z(out_dir);
  } else if (which == "tube_slices") {
    export_tube_slices(out_dir);
  } else if (which == "rate_sweep") {
    export_rate_sweep(out_dir);
  } else {
    throw config_error("unknown export '" + which +
                       "'; expected eigen_decay, det_convergence, tail_vs_z, tube_slices or "
                       "rate_sweep");
  }
}

}  // namespace ldt::io
