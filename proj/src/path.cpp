#include "ldt/path.hpp"

#include "ldt/errors.hpp"

namespace ldt {

namespace {

void check_same_shape(const Path& a, const Path& b, const char* what) {
  if (!a.grid().same_as(b.grid()) || a.width() != b.width()) {
    throw dimension_error(std::string(what) + ": paths live on different grids or widths");
  }
}

}  // namespace

Path::Path(GridPtr grid, int width) : grid_(std::move(grid)) {
  if (!grid_) {
    throw dimension_error("Path: null grid");
  }
  if (width < 1) {
    throw dimension_error("Path: width must be positive");
  }
  values_ = Eigen::MatrixXd::Zero(grid_->n_nodes(), width);
}

Path::Path(GridPtr grid, Eigen::MatrixXd values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) {
    throw dimension_error("Path: null grid");
  }
  if (values_.rows() != grid_->n_nodes() || values_.cols() < 1) {
    throw dimension_error("Path: value rows must match grid nodes");
  }
}

Path& Path::operator+=(const Path& other) {
  check_same_shape(*this, other, "Path::operator+=");
  values_ += other.values_;
  return *this;
}

Path& Path::operator-=(const Path& other) {
  check_same_shape(*this, other, "Path::operator-=");
  values_ -= other.values_;
  return *this;
}

Path& Path::operator*=(double s) {
  values_ *= s;
  return *this;
}

Path operator+(Path a, const Path& b) { return a += b; }
Path operator-(Path a, const Path& b) { return a -= b; }
Path operator*(double s, Path p) { return p *= s; }

double l2_inner(const Path& p, const Path& q) {
  check_same_shape(p, q, "l2_inner");
  const Eigen::VectorXd& w = p.grid().weights();
  return (p.values().cwiseProduct(q.values()) * Eigen::VectorXd::Ones(p.width()))
      .dot(w);
}

double l2_norm(const Path& p) {
  const Eigen::VectorXd& w = p.grid().weights();
  return std::sqrt((p.values().array().square().matrix() * Eigen::VectorXd::Ones(p.width()))
                       .dot(w));
}

Path project_orthogonal(const Path& p, const Path& reference) {
  check_same_shape(p, reference, "project_orthogonal");
  const double ref_sq = l2_inner(reference, reference);
  if (ref_sq <= 0.0) {
    return p;
  }
  const double coeff = l2_inner(reference, p) / ref_sq;
  Path out = p;
  out.values() -= coeff * reference.values();
  return out;
}

}  // namespace ldt
