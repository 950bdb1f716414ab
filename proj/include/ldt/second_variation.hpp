#pragma once

#include <atomic>
#include <optional>

#include "ldt/checkpoint.hpp"
#include "ldt/instanton.hpp"

namespace ldt {

/// Matrix-free projected second variation
///   A_z deta = P (d^2(lambda_z F)/deta^2) P deta,
/// with P the L2 projector orthogonal to eta_z. theta_z already carries
/// lambda_z through its terminal condition, so no outer factor appears.
/// Self-adjoint in the weighted L2 inner product.
class SecondVariationOperator {
 public:
  enum class Mode { exact, finite_difference };

  struct Config {
    Mode mode = Mode::exact;
    /// FD step; <= 0 selects 1e-5 * ||eta_z|| / ||deta|| per application.
    double fd_step = -1.0;
    std::optional<CheckpointPlan> plan;
    IntegratorConfig integ;
  };

  SecondVariationOperator(const ProblemSpec& spec, const InstantonResult& instanton,
                          Config cfg);

  Path apply(const Path& deta) const;

  const TimeGrid& grid() const { return instanton_.eta.grid(); }
  GridPtr grid_ptr() const { return instanton_.eta.grid_ptr(); }
  int width() const { return spec_->noise_rank; }
  /// Discretized noise-space dimension n_nodes * rank.
  int dim() const { return instanton_.eta.grid().n_nodes() * spec_->noise_rank; }
  long apply_count() const { return apply_count_.load(); }
  const InstantonResult& instanton() const { return instanton_; }

 private:
  const ProblemSpec* spec_;
  InstantonResult instanton_;
  Config cfg_;
  detail::ForwardCache fwd_;
  Path base_grad_;  // gradient at eta_z (FD mode baseline)
  double eta_norm_ = 0.0;
  mutable std::atomic<long> apply_count_{0};
};

}  // namespace ldt
