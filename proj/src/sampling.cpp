#include "ldt/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <utility>
#include <vector>

#include "ldt/errors.hpp"
#include "ldt/rng.hpp"
#include "stepper.hpp"

namespace ldt {

namespace {

/// Fixed-size chunks processed worker-agnostically: per-chunk partials are
/// combined in chunk order, so results are bitwise independent of the
/// thread count.
constexpr long kChunk = 4096;

template <typename Fn>
void run_chunks(long n, int threads, Fn&& fn) {
  const long n_chunks = (n + kChunk - 1) / kChunk;
  std::atomic<long> next{0};
  auto worker = [&] {
    while (true) {
      const long c = next.fetch_add(1);
      if (c >= n_chunks) {
        return;
      }
      fn(c, c * kChunk, std::min(n, (c + 1) * kChunk));
    }
  };
  if (threads <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back(worker);
  }
  for (std::thread& t : pool) {
    t.join();
  }
}

Vector draw_normals(const CounterRng& rng, std::uint64_t sample, int step, int rank) {
  Vector xi(rank);
  for (int i = 0; i < rank; ++i) {
    xi(i) = rng.normal(sample, step, i);
  }
  return xi;
}

/// One step of the stochastic integrator with noise increment
/// sqrt(eps dt) sigma xi folded in at the left node.
Vector sde_step(const detail::Ops& ops, McScheme scheme, double dt, double eps,
                const Vector& x, const Vector& xi) {
  const Vector noise = std::sqrt(eps * dt) * ops.p.sigma_apply(xi);
  if (scheme == McScheme::euler_maruyama_if) {
    return ops.E(dt, x + dt * ops.N(x) + noise);
  }
  const Vector s1 = ops.N(x);
  const Vector stage = ops.E(dt, x + dt * s1 + noise);
  return ops.E(dt, x + 0.5 * dt * s1 + noise) + 0.5 * dt * ops.N(stage);
}

void validate_mc(const ProblemSpec& spec, const McConfig& cfg) {
  spec.validate();
  if (!(cfg.eps > 0.0)) {
    throw config_error("monte carlo: eps must be positive");
  }
  if (cfg.n_samples < 1) {
    throw config_error("monte carlo: n_samples must be positive");
  }
}

}  // namespace

Interval wilson_interval(long hits, long n, double confidence) {
  if (n < 1 || hits < 0 || hits > n) {
    throw config_error("wilson_interval: need 0 <= hits <= n, n >= 1");
  }
  if (!(confidence > 0.0) || !(confidence < 1.0)) {
    throw config_error("wilson_interval: confidence must be in (0, 1)");
  }
  const double zq = inverse_normal_cdf(0.5 + 0.5 * confidence);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nn;
  const double denom = 1.0 + zq * zq / nn;
  const double center = (p + zq * zq / (2.0 * nn)) / denom;
  const double half =
      zq * std::sqrt(p * (1.0 - p) / nn + zq * zq / (4.0 * nn * nn)) / denom;
  return Interval{std::max(0.0, center - half), std::min(1.0, center + half)};
}

McTailResult direct_tail_mc(const ProblemSpec& spec, GridPtr grid, double z,
                            const McConfig& cfg) {
  validate_mc(spec, cfg);
  const detail::Ops ops{spec, spec.linear_part != nullptr, false};
  const CounterRng rng(cfg.seed);
  const TimeGrid& g = *grid;

  const long n_chunks = (cfg.n_samples + kChunk - 1) / kChunk;
  std::vector<long> chunk_hits(n_chunks, 0);
  std::vector<long> chunk_failures(n_chunks, 0);

  run_chunks(cfg.n_samples, cfg.threads, [&](long c, long lo, long hi) {
    long hits = 0;
    long failures = 0;
    for (long s = lo; s < hi; ++s) {
      Vector x = spec.initial_state;
      bool ok = true;
      for (int k = 0; k < g.n_steps(); ++k) {
        x = sde_step(ops, cfg.scheme, g.dt(k), cfg.eps, x,
                     draw_normals(rng, static_cast<std::uint64_t>(s), k, spec.noise_rank));
        if (!x.allFinite()) {
          ok = false;
          break;
        }
      }
      if (!ok) {
        ++failures;
      } else if (spec.observable(x) >= z) {
        ++hits;
      }
    }
    chunk_hits[c] = hits;
    chunk_failures[c] = failures;
  });

  McTailResult res;
  res.n_samples = cfg.n_samples;
  for (long c = 0; c < n_chunks; ++c) {
    res.hits += chunk_hits[c];
    res.failures += chunk_failures[c];
  }
  res.estimate = static_cast<double>(res.hits) / static_cast<double>(res.n_samples);
  res.interval = wilson_interval(res.hits, res.n_samples);
  return res;
}

double IsEnsemble::effective_sample_size() const {
  double sw = 0.0;
  double sw2 = 0.0;
  for (double w : weights) {
    sw += w;
    sw2 += w * w;
  }
  return sw2 > 0.0 ? sw * sw / sw2 : 0.0;
}

Vector IsEnsemble::weighted_mean(int slot, int state_dim) const {
  if (slot < 0 || (slot + 1) * state_dim > records.cols()) {
    throw dimension_error("IsEnsemble::weighted_mean: slot out of range");
  }
  Vector mean = Vector::Zero(state_dim);
  double sw = 0.0;
  for (long i = 0; i < records.rows(); ++i) {
    mean += weights[i] * records.row(i).segment(slot * state_dim, state_dim).transpose();
    sw += weights[i];
  }
  if (sw <= 0.0) {
    throw numerical_error("IsEnsemble::weighted_mean: total weight is zero");
  }
  return mean / sw;
}

Matrix IsEnsemble::weighted_covariance(int slot, int state_dim) const {
  const Vector mean = weighted_mean(slot, state_dim);
  Matrix cov = Matrix::Zero(state_dim, state_dim);
  double sw = 0.0;
  for (long i = 0; i < records.rows(); ++i) {
    const Vector d =
        records.row(i).segment(slot * state_dim, state_dim).transpose() - mean;
    cov.noalias() += weights[i] * d * d.transpose();
    sw += weights[i];
  }
  return cov / sw;
}

IsEnsemble importance_sampled_paths(const ProblemSpec& spec, const InstantonResult& instanton,
                                    const McConfig& cfg,
                                    const std::vector<int>& record_nodes) {
  validate_mc(spec, cfg);
  const TimeGrid& g = instanton.eta.grid();
  for (int node : record_nodes) {
    if (node < 0 || node >= g.n_nodes()) {
      throw config_error("importance_sampled_paths: record node out of range");
    }
  }
  const detail::Ops ops{spec, spec.linear_part != nullptr, false};
  const CounterRng rng(cfg.seed);
  const double eps = cfg.eps;
  const double root_eps = std::sqrt(eps);

  // Per-node precomputation along the instanton: drift of the stepping
  // split (linear parts cancel in the weight integrand) and noise shifts.
  std::vector<Vector> n_phi(g.n_nodes());
  std::vector<Vector> theta(g.n_nodes());
  std::vector<Vector> phi(g.n_nodes());
  for (int k = 0; k < g.n_nodes(); ++k) {
    phi[k] = instanton.phi.node_copy(k);
    n_phi[k] = ops.N(phi[k]);
    theta[k] = instanton.theta.node_copy(k);
  }
  std::vector<Vector> shift(g.n_steps());
  for (int k = 0; k < g.n_steps(); ++k) {
    shift[k] = std::sqrt(g.dt(k) / eps) * instanton.eta.node_copy(k);
  }

  const int rec_width = static_cast<int>(record_nodes.size()) * spec.state_dim;
  struct ChunkOut {
    std::vector<double> rows;  // accepted records, rec_width per sample
    std::vector<double> logw;
    long overflow = 0;
    long accepted = 0;
  };
  const long n_chunks = (cfg.n_samples + kChunk - 1) / kChunk;
  std::vector<ChunkOut> parts(n_chunks);

  run_chunks(cfg.n_samples, cfg.threads, [&](long c, long lo, long hi) {
    ChunkOut& out = parts[c];
    std::vector<double> row(rec_width);
    for (long s = lo; s < hi; ++s) {
      Vector x = spec.initial_state;
      double integral = 0.0;
      bool ok = true;
      std::size_t rec = 0;
      auto visit = [&](int k, const Vector& xk) {
        const Vector d = xk - phi[k];
        const Vector residual = ops.N(xk) - n_phi[k] - ops.dN(phi[k], d);
        integral += g.weight(k) * residual.dot(theta[k]);
        for (std::size_t r = 0; r < record_nodes.size(); ++r) {
          if (record_nodes[r] == k) {
            for (int i = 0; i < spec.state_dim; ++i) {
              row[r * spec.state_dim + i] = d(i) / root_eps;
            }
            ++rec;
          }
        }
      };
      visit(0, x);
      for (int k = 0; k < g.n_steps(); ++k) {
        const Vector xi =
            draw_normals(rng, static_cast<std::uint64_t>(s), k, spec.noise_rank) + shift[k];
        x = sde_step(ops, cfg.scheme, g.dt(k), eps, x, xi);
        if (!x.allFinite()) {
          ok = false;
          break;
        }
        visit(k + 1, x);
      }
      (void)rec;
      if (!ok) {
        continue;
      }
      const double obs = spec.observable(x);
      if (std::abs(obs - instanton.z) / root_eps > cfg.conditioning_tol) {
        continue;
      }
      const int last = g.n_steps();
      const Vector d_last = x - phi[last];
      const double boundary =
          instanton.lambda *
          (obs - spec.observable(phi[last]) - spec.obs_grad(phi[last]).dot(d_last));
      const double logw = (integral + boundary) / eps;
      if (!std::isfinite(logw)) {
        ++out.overflow;
        continue;
      }
      ++out.accepted;
      out.logw.push_back(logw);
      out.rows.insert(out.rows.end(), row.begin(), row.end());
    }
  });

  IsEnsemble ens;
  ens.record_nodes = record_nodes;
  ens.n_total = cfg.n_samples;
  for (const ChunkOut& p : parts) {
    ens.n_accepted += p.accepted;
    ens.n_overflow += p.overflow;
  }
  ens.records.resize(ens.n_accepted, rec_width);
  ens.log_weights.reserve(ens.n_accepted);
  long r = 0;
  for (const ChunkOut& p : parts) {
    for (long i = 0; i < p.accepted; ++i, ++r) {
      for (int jcol = 0; jcol < rec_width; ++jcol) {
        ens.records(r, jcol) = p.rows[i * rec_width + jcol];
      }
      ens.log_weights.push_back(p.logw[i]);
    }
  }
  double max_logw = 0.0;
  if (!ens.log_weights.empty()) {
    max_logw = *std::max_element(ens.log_weights.begin(), ens.log_weights.end());
  }
  ens.weights.reserve(ens.log_weights.size());
  for (double lw : ens.log_weights) {
    ens.weights.push_back(std::exp(lw - max_logw));
  }
  return ens;
}

IsTailResult importance_sampled_tail(const ProblemSpec& spec, const InstantonResult& instanton,
                                     const McConfig& cfg) {
  validate_mc(spec, cfg);
  if (cfg.scheme != McScheme::euler_maruyama_if) {
    throw config_error(
        "importance_sampled_tail: the exact likelihood ratio requires euler_maruyama_if");
  }
  const TimeGrid& g = instanton.eta.grid();
  const detail::Ops ops{spec, spec.linear_part != nullptr, false};
  const CounterRng rng(cfg.seed);
  const double eps = cfg.eps;

  std::vector<Vector> eta(g.n_steps());
  std::vector<double> shift_scale(g.n_steps());
  std::vector<double> log_offset(g.n_steps());
  for (int k = 0; k < g.n_steps(); ++k) {
    eta[k] = instanton.eta.node_copy(k);
    shift_scale[k] = std::sqrt(g.dt(k) / eps);
    log_offset[k] = -0.5 * g.dt(k) / eps * eta[k].squaredNorm();
  }

  const long n_chunks = (cfg.n_samples + kChunk - 1) / kChunk;
  std::vector<double> chunk_sum(n_chunks, 0.0);
  std::vector<double> chunk_sum2(n_chunks, 0.0);

  run_chunks(cfg.n_samples, cfg.threads, [&](long c, long lo, long hi) {
    double sum = 0.0;
    double sum2 = 0.0;
    for (long s = lo; s < hi; ++s) {
      Vector x = spec.initial_state;
      double loglr = 0.0;
      bool ok = true;
      for (int k = 0; k < g.n_steps(); ++k) {
        const Vector xi = draw_normals(rng, static_cast<std::uint64_t>(s), k, spec.noise_rank);
        loglr += -shift_scale[k] * eta[k].dot(xi) + log_offset[k];
        x = sde_step(ops, cfg.scheme, g.dt(k), eps, x, xi + shift_scale[k] * eta[k]);
        if (!x.allFinite()) {
          ok = false;
          break;
        }
      }
      double w = 0.0;
      if (ok && spec.observable(x) >= instanton.z) {
        w = std::exp(loglr);
      }
      sum += w;
      sum2 += w * w;
    }
    chunk_sum[c] = sum;
    chunk_sum2[c] = sum2;
  });

  double sw = 0.0;
  double sw2 = 0.0;
  for (long c = 0; c < n_chunks; ++c) {
    sw += chunk_sum[c];
    sw2 += chunk_sum2[c];
  }
  IsTailResult res;
  res.n_samples = cfg.n_samples;
  const double n = static_cast<double>(cfg.n_samples);
  res.estimate = sw / n;
  const double var = std::max(0.0, sw2 / n - res.estimate * res.estimate);
  res.std_error = std::sqrt(var / n);
  res.effective_sample_size = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
  return res;
}

}  // namespace ldt
