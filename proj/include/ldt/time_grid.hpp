#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

namespace ldt {

/// Strictly increasing time nodes 0 = t_0 < ... < t_N = T together with
/// trapezoidal quadrature weights. All path-space inner products are taken
/// against these weights.
class TimeGrid {
 public:
  /// Uniform grid with n_steps intervals on [0, horizon].
  static TimeGrid uniform(int n_steps, double horizon);
  /// Arbitrary node positions; first node must be 0, nodes strictly increasing.
  static TimeGrid from_nodes(const std::vector<double>& nodes);

  int n_steps() const { return static_cast<int>(nodes_.size()) - 1; }
  int n_nodes() const { return static_cast<int>(nodes_.size()); }
  double horizon() const { return nodes_[nodes_.size() - 1]; }
  double node(int i) const { return nodes_[i]; }
  double dt(int i) const { return nodes_[i + 1] - nodes_[i]; }
  double weight(int i) const { return weights_[i]; }
  const Eigen::VectorXd& nodes() const { return nodes_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  bool same_as(const TimeGrid& other) const;

 private:
  explicit TimeGrid(Eigen::VectorXd nodes);

  Eigen::VectorXd nodes_;
  Eigen::VectorXd weights_;
};

using GridPtr = std::shared_ptr<const TimeGrid>;

inline GridPtr make_uniform_grid(int n_steps, double horizon) {
  return std::make_shared<const TimeGrid>(TimeGrid::uniform(n_steps, horizon));
}

}  // namespace ldt
