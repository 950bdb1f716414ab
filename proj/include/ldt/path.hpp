#pragma once

#include <Eigen/Core>

#include "ldt/time_grid.hpp"

namespace ldt {

/// A time-discrete vector-valued path: one value row per grid node.
/// Used for states (width = state dim), adjoints, and noise paths
/// (width = rank of sigma).
class Path {
 public:
  Path(GridPtr grid, int width);
  Path(GridPtr grid, Eigen::MatrixXd values);

  const TimeGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  int width() const { return static_cast<int>(values_.cols()); }

  Eigen::MatrixXd& values() { return values_; }
  const Eigen::MatrixXd& values() const { return values_; }

  /// Value row at node i (strided view into the row-per-node storage).
  Eigen::Ref<Eigen::VectorXd, 0, Eigen::InnerStride<>> node(int i) {
    return values_.row(i).transpose();
  }
  Eigen::VectorXd node_copy(int i) const { return values_.row(i).transpose(); }
  void set_node(int i, const Eigen::VectorXd& v) { values_.row(i) = v.transpose(); }

  Path& operator+=(const Path& other);
  Path& operator-=(const Path& other);
  Path& operator*=(double s);

 private:
  GridPtr grid_;
  Eigen::MatrixXd values_;  // (n_nodes) x width
};

Path operator+(Path a, const Path& b);
Path operator-(Path a, const Path& b);
Path operator*(double s, Path p);

/// Trapezoidal L2([0,T]) inner product sum_i w_i <p_i, q_i>.
double l2_inner(const Path& p, const Path& q);
double l2_norm(const Path& p);

/// p minus its L2 projection onto span{reference}. Zero reference returns p.
Path project_orthogonal(const Path& p, const Path& reference);

}  // namespace ldt
