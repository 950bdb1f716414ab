#include "ldt/time_grid.hpp"

#include <cmath>

#include "ldt/errors.hpp"

namespace ldt {

TimeGrid::TimeGrid(Eigen::VectorXd nodes) : nodes_(std::move(nodes)) {
  const int n = static_cast<int>(nodes_.size());
  if (n < 2) {
    throw config_error("TimeGrid: need at least 1 step (2 nodes)");
  }
  if (nodes_[0] != 0.0) {
    throw config_error("TimeGrid: first node must be t = 0");
  }
  for (int i = 0; i + 1 < n; ++i) {
    if (!(nodes_[i + 1] > nodes_[i])) {
      throw config_error("TimeGrid: nodes must increase strictly");
    }
  }
  weights_.resize(n);
  weights_.setZero();
  for (int i = 0; i + 1 < n; ++i) {
    const double h = nodes_[i + 1] - nodes_[i];
    weights_[i] += 0.5 * h;
    weights_[i + 1] += 0.5 * h;
  }
}

TimeGrid TimeGrid::uniform(int n_steps, double horizon) {
  if (n_steps < 1) {
    throw config_error("TimeGrid::uniform: need at least 1 step");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw config_error("TimeGrid::uniform: horizon must be positive and finite");
  }
  Eigen::VectorXd nodes(n_steps + 1);
  for (int i = 0; i <= n_steps; ++i) {
    nodes[i] = horizon * static_cast<double>(i) / static_cast<double>(n_steps);
  }
  nodes[n_steps] = horizon;
  return TimeGrid(std::move(nodes));
}

TimeGrid TimeGrid::from_nodes(const std::vector<double>& nodes) {
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(nodes.data(),
                                                        static_cast<Eigen::Index>(nodes.size()));
  return TimeGrid(std::move(v));
}

bool TimeGrid::same_as(const TimeGrid& other) const {
  return nodes_.size() == other.nodes_.size() && nodes_ == other.nodes_;
}

}  // namespace ldt
