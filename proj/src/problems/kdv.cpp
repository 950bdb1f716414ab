#include "ldt/problems/kdv.hpp"

#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include <fftw3.h>

#include "ldt/errors.hpp"

namespace ldt {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

/// Shared spectral machinery. Plans are created once (FFTW planning is not
/// thread safe) with FFTW_UNALIGNED so the new-array execute API works on
/// ordinary heap buffers; the callbacks stay pure and reentrant.
class KdvCore {
 public:
  KdvCore(int n, double nu, double kappa, bool dealias)
      : n_(n), n_modes_(n / 2 + 1), nu_(nu), kappa_(kappa) {
    std::vector<double> proto_r(n_);
    std::vector<std::complex<double>> proto_c(n_modes_);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_dft_r2c_1d(n_, proto_r.data(),
                                reinterpret_cast<fftw_complex*>(proto_c.data()), flags);
    bwd_ = fftw_plan_dft_c2r_1d(n_, reinterpret_cast<fftw_complex*>(proto_c.data()),
                                proto_r.data(), flags);
    if (fwd_ == nullptr || bwd_ == nullptr) {
      throw numerical_error("make_kdv: FFTW plan creation failed");
    }
    mask_.assign(n_modes_, 1.0);
    if (dealias) {
      for (int k = 0; k < n_modes_; ++k) {
        if (3 * k > n_) {
          mask_[k] = 0.0;
        }
      }
    }
  }

  KdvCore(const KdvCore&) = delete;
  KdvCore& operator=(const KdvCore&) = delete;

  ~KdvCore() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  int n() const { return n_; }

  using Spectrum = std::vector<std::complex<double>>;

  Spectrum fft(const Vector& u) const {
    std::vector<double> in(u.data(), u.data() + n_);
    Spectrum out(n_modes_);
    fftw_execute_dft_r2c(fwd_, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
    return out;
  }

  /// Consumes the spectrum (FFTW c2r may overwrite its input).
  Vector ifft(Spectrum spec) const {
    Vector out(n_);
    fftw_execute_dft_c2r(bwd_, reinterpret_cast<fftw_complex*>(spec.data()), out.data());
    return out / static_cast<double>(n_);
  }

  void apply_mask(Spectrum& s) const {
    for (int k = 0; k < n_modes_; ++k) {
      s[k] *= mask_[k];
    }
  }

  /// d/dx: multiply by ik, Nyquist zeroed to keep the operator real.
  void apply_derivative(Spectrum& s) const {
    for (int k = 0; k < n_modes_; ++k) {
      s[k] *= std::complex<double>(0.0, static_cast<double>(k));
    }
    if (n_ % 2 == 0) {
      s[n_modes_ - 1] = 0.0;
    }
  }

  /// Symbol of the linear part nu u_xx - kappa u_xxx; the Nyquist imaginary
  /// part is dropped to keep the operator real.
  std::complex<double> symbol(int k) const {
    const double kk = static_cast<double>(k);
    std::complex<double> ell(-nu_ * kk * kk, kappa_ * kk * kk * kk);
    if (n_ % 2 == 0 && k == n_modes_ - 1) {
      ell = std::complex<double>(ell.real(), 0.0);
    }
    return ell;
  }

  Vector apply_symbol(const Vector& v, bool transpose) const {
    Spectrum s = fft(v);
    for (int k = 0; k < n_modes_; ++k) {
      const std::complex<double> ell = symbol(k);
      s[k] *= transpose ? std::conj(ell) : ell;
    }
    return ifft(std::move(s));
  }

  Vector apply_exp_symbol(double dt, const Vector& v, bool transpose) const {
    Spectrum s = fft(v);
    for (int k = 0; k < n_modes_; ++k) {
      const std::complex<double> e = std::exp(symbol(k) * dt);
      s[k] *= transpose ? std::conj(e) : e;
    }
    return ifft(std::move(s));
  }

  Vector dealias(const Vector& u) const {
    Spectrum s = fft(u);
    apply_mask(s);
    return ifft(std::move(s));
  }

  /// P[a b] for already-projected factors.
  Vector projected_product(const Vector& a, const Vector& b) const {
    Spectrum s = fft(a.cwiseProduct(b));
    apply_mask(s);
    return ifft(std::move(s));
  }

  /// N(u) = -1/2 d/dx P[(Pu)^2].
  Vector nonlinear(const Vector& u) const {
    const Vector pu = dealias(u);
    Spectrum s = fft(pu.cwiseProduct(pu));
    apply_mask(s);
    apply_derivative(s);
    return -0.5 * ifft(std::move(s));
  }

  /// grad N(u) v = -d/dx P[(Pu)(Pv)].
  Vector nonlinear_jac(const Vector& u, const Vector& v) const {
    Spectrum s = fft(dealias(u).cwiseProduct(dealias(v)));
    apply_mask(s);
    apply_derivative(s);
    return -ifft(std::move(s));
  }

  /// grad N(u)^T w = P[(Pu) (P dw/dx)].
  Vector nonlinear_jac_adj(const Vector& u, const Vector& w) const {
    Spectrum dw = fft(w);
    apply_derivative(dw);
    apply_mask(dw);
    return projected_product(dealias(u), ifft(std::move(dw)));
  }

  /// <grad^2 N, theta> gamma = P[(P gamma)(P dtheta/dx)] (u independent).
  Vector hessian(const Vector& theta, const Vector& gamma) const {
    Spectrum dt = fft(theta);
    apply_derivative(dt);
    apply_mask(dt);
    return projected_product(dealias(gamma), ifft(std::move(dt)));
  }

 private:
  int n_;
  int n_modes_;
  double nu_;
  double kappa_;
  std::vector<double> mask_;
  fftw_plan fwd_;
  fftw_plan bwd_;
};

class SpectralLinearPart final : public LinearPart {
 public:
  explicit SpectralLinearPart(std::shared_ptr<const KdvCore> core) : core_(std::move(core)) {}
  Vector apply(const Vector& v) const override { return core_->apply_symbol(v, false); }
  Vector apply_transpose(const Vector& v) const override {
    return core_->apply_symbol(v, true);
  }
  Vector exp_apply(double dt, const Vector& v) const override {
    return core_->apply_exp_symbol(dt, v, false);
  }
  Vector exp_apply_transpose(double dt, const Vector& v) const override {
    return core_->apply_exp_symbol(dt, v, true);
  }

 private:
  std::shared_ptr<const KdvCore> core_;
};

}  // namespace

ProblemSpec make_kdv(const KdvConfig& cfg) {
  if (cfg.n_x < 8 || (cfg.n_x & (cfg.n_x - 1)) != 0) {
    throw config_error("make_kdv: n_x must be a power of two, at least 8");
  }
  if (!(cfg.nu > 0.0)) {
    throw config_error("make_kdv: nu must be positive");
  }
  const auto core = std::make_shared<const KdvCore>(cfg.n_x, cfg.nu, cfg.kappa, cfg.dealias);
  const int n = cfg.n_x;

  Vector sin_x(n);
  Vector cos_x(n);
  for (int j = 0; j < n; ++j) {
    const double x = 2.0 * kPi * j / n;
    sin_x(j) = std::sin(x);
    cos_x(j) = std::cos(x);
  }
  const double amp = 1.0 / std::sqrt(kPi);

  ProblemSpec p;
  p.name = "kdv";
  p.state_dim = n;
  p.noise_rank = 2;
  p.initial_state = Vector::Zero(n);

  p.drift = [core](const Vector& u) {
    return Vector(core->apply_symbol(u, false) + core->nonlinear(u));
  };
  p.jacobian_action = [core](const Vector& u, const Vector& v) {
    return Vector(core->apply_symbol(v, false) + core->nonlinear_jac(u, v));
  };
  p.jacobian_adjoint_action = [core](const Vector& u, const Vector& w) {
    return Vector(core->apply_symbol(w, true) + core->nonlinear_jac_adj(u, w));
  };
  p.hessian_bilinear = [core](const Vector&, const Vector& adj, const Vector& dir) {
    return core->hessian(adj, dir);
  };

  p.sigma_apply = [sin_x, cos_x, amp](const Vector& w) {
    return Vector(amp * (w(0) * sin_x + w(1) * cos_x));
  };
  p.sigma_adjoint = [sin_x, cos_x, amp](const Vector& v) {
    Vector r(2);
    r(0) = amp * sin_x.dot(v);
    r(1) = amp * cos_x.dot(v);
    return r;
  };

  p.observable = [](const Vector& u) { return u(0); };
  p.obs_grad = [n](const Vector&) {
    Vector g = Vector::Zero(n);
    g(0) = 1.0;
    return g;
  };

  p.linear_part = std::make_shared<SpectralLinearPart>(core);
  p.nonlinear_drift = [core](const Vector& u) { return core->nonlinear(u); };
  p.nonlinear_jacobian_action = [core](const Vector& u, const Vector& v) {
    return core->nonlinear_jac(u, v);
  };
  p.nonlinear_jacobian_adjoint_action = [core](const Vector& u, const Vector& w) {
    return core->nonlinear_jac_adj(u, w);
  };
  return p;
}

}  // namespace ldt
