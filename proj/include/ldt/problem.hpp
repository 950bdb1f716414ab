#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <string>

namespace ldt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Optional stiff/linear split b(x) = L x + N(x) for integrating-factor
/// schemes. Implementations must provide exact exponential actions.
class LinearPart {
 public:
  virtual ~LinearPart() = default;
  virtual Vector apply(const Vector& v) const = 0;
  virtual Vector apply_transpose(const Vector& v) const = 0;
  /// exp(L dt) v
  virtual Vector exp_apply(double dt, const Vector& v) const = 0;
  /// exp(L^T dt) v
  virtual Vector exp_apply_transpose(double dt, const Vector& v) const = 0;
};

/// Diagonal L = diag(d): exponential actions are elementwise.
class DiagonalLinearPart final : public LinearPart {
 public:
  explicit DiagonalLinearPart(Vector diag) : diag_(std::move(diag)) {}
  Vector apply(const Vector& v) const override { return diag_.cwiseProduct(v); }
  Vector apply_transpose(const Vector& v) const override { return diag_.cwiseProduct(v); }
  Vector exp_apply(double dt, const Vector& v) const override {
    return (diag_ * dt).array().exp().matrix().cwiseProduct(v);
  }
  Vector exp_apply_transpose(double dt, const Vector& v) const override {
    return exp_apply(dt, v);
  }
  const Vector& diag() const { return diag_; }

 private:
  Vector diag_;
};

/// Additive-noise SDE instance dX = b(X) dt + sqrt(eps) sigma dB with a
/// scalar terminal observable f(X_T). sigma maps rank-many noise
/// coordinates into the state space; all adjoints are Euclidean transposes.
/// Every callback must be pure and reentrant.
struct ProblemSpec {
  std::string name;
  int state_dim = 0;
  int noise_rank = 0;
  Vector initial_state;

  /// b(x)
  std::function<Vector(const Vector&)> drift;
  /// grad b(x) v
  std::function<Vector(const Vector&, const Vector&)> jacobian_action;
  /// grad b(x)^T v
  std::function<Vector(const Vector&, const Vector&)> jacobian_adjoint_action;
  /// <grad^2 b(x), theta> gamma, the symmetric Hessian form contracted
  /// against an adjoint vector: sum_k d_i d_j b_k(x) theta_k gamma_j.
  std::function<Vector(const Vector&, const Vector&, const Vector&)> hessian_bilinear;

  /// sigma w (R^rank -> R^dim) and sigma^T v (R^dim -> R^rank).
  std::function<Vector(const Vector&)> sigma_apply;
  std::function<Vector(const Vector&)> sigma_adjoint;

  /// f, grad f, and grad^2 f(x) v (null means identically zero Hessian).
  std::function<double(const Vector&)> observable;
  std::function<Vector(const Vector&)> obs_grad;
  std::function<Vector(const Vector&, const Vector&)> obs_hess_action;

  /// Stiff split for integrating-factor schemes. When present,
  /// nonlinear_* must be the exact remainders b - L, grad b - L, ...
  std::shared_ptr<const LinearPart> linear_part;
  std::function<Vector(const Vector&)> nonlinear_drift;
  std::function<Vector(const Vector&, const Vector&)> nonlinear_jacobian_action;
  std::function<Vector(const Vector&, const Vector&)> nonlinear_jacobian_adjoint_action;

  /// a = sigma sigma^T assembled by probing sigma_apply column by column.
  Matrix covariance_matrix() const;
  /// sigma as a dense dim x rank matrix.
  Matrix sigma_matrix() const;
  /// sigma^T sigma (rank x rank), the natural preconditioner block.
  Matrix noise_gram() const;

  void validate() const;
};

}  // namespace ldt
