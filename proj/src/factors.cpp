#include "pushest/factors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pushest {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

Vec3 finite_twist(const Pose2& x_prev, const Pose2& x_curr, double dt) {
  const Vec2 v = x_prev.rotation().transpose() * (x_curr.translation() - x_prev.translation()) / dt;
  return {v.x(), v.y(), wrap_angle(x_curr.theta() - x_prev.theta()) / dt};
}

Mat2 contact_frame(const FingerReading& finger) {
  const double norm = finger.force.norm();
  if (!(norm > 0.0)) {
    throw std::invalid_argument("contact reading with zero force is inconsistent");
  }
  const Vec2 f = finger.force / norm;
  Mat2 frame;
  frame.col(0) = f;
  frame.col(1) = quarter_turn() * f;
  return frame;
}

}  // namespace

Covariances Covariances::defaults() {
  Covariances c;
  c.motion = Vec3(1.3e-9, 1.6e-9, 2.3e-13).asDiagonal();  // identified
  c.contact = Vec2(0.002 * 0.002, 0.002 * 0.002).asDiagonal();
  c.visual = Vec3(0.01 * 0.01, 0.01 * 0.01, std::pow(3.0 * kDeg, 2)).asDiagonal();
  c.stationary = Vec3(0.001 * 0.001, 0.001 * 0.001, std::pow(0.3 * kDeg, 2)).asDiagonal();
  return c;
}

Covariances Covariances::identified() {
  // Diagonals of `characterize-noise --seed 101 --seeds 5` on the standard scenario.
  Covariances c;
  c.motion = Vec3(1.3e-9, 1.6e-9, 2.3e-13).asDiagonal();
  c.contact = Vec2(2.5e-7, 5.6e-9).asDiagonal();
  c.visual = Vec3(1.0e-4, 1.0e-4, 2.7e-3).asDiagonal();
  c.stationary = Vec3(1.4e-7, 1.4e-7, 2.6e-6).asDiagonal();
  return c;
}

Vec2 sensed_contact_point(const FingerReading& finger, double pusher_radius) {
  return finger.position - pusher_radius * contact_frame(finger).col(0);
}

Vec3 motion_residual(const Pose2& x_prev, const Pose2& x_curr, const Wrench2& wrench, double c,
                     double dt) {
  const Vec3 twist = finite_twist(x_prev, x_curr, dt);
  const Vec3 ls(c * c * wrench.fx, c * c * wrench.fy, wrench.m);
  return twist.cross(ls);
}

Wrench2 contact_wrench(const Pose2& pose, std::span<const FingerReading> fingers,
                       const Polygon& poly) {
  Vec2 force = Vec2::Zero();
  double moment = 0.0;
  for (const FingerReading& f : fingers) {
    const Vec2 on_object = -f.force;
    const ClosestPoint cp = closest_point_on_polygon(poly, pose, f.position);
    force += on_object;
    moment += cross2(cp.point - pose.translation(), on_object);
  }
  const Vec2 local = pose.rotation().transpose() * force;
  return {local.x(), local.y(), moment};
}

Vec2 contact_residual(const Pose2& x, const FingerReading& finger, const ShapeModel& shape,
                      double pusher_radius) {
  const Mat2 frame = contact_frame(finger);
  const Vec2 b = finger.position - pusher_radius * frame.col(0);
  const ClosestPoint a = closest_point_on_polygon(shape.polygon(), x, b);
  return frame.transpose() * (a.point - b);
}

Vec3 visual_residual(const Pose2& x, const Pose2& w) { return pose_diff(x, w); }

Vec3 prior_residual(const Pose2& x_curr, const Pose2& x_prev) { return pose_diff(x_curr, x_prev); }

Eigen::Matrix<double, 2, 3> closest_point_jacobian(const Polygon& poly, const Pose2& pose,
                                                   const Vec2& q) {
  const ClosestPoint cp = closest_point_on_polygon(poly, pose, q);
  const Mat2 j = quarter_turn();
  Eigen::Matrix<double, 2, 3> d;
  if (cp.at_vertex) {
    d.leftCols<2>().setIdentity();
    d.col(2) = j * (cp.point - pose.translation());
    return d;
  }
  // A = q - n (n . (q - P0)) with P0 the posed edge start and n its normal.
  const Vec2 n = pose.rotation() * poly.edge_normal(cp.edge);
  const Vec2 p0 = transform_point(pose, poly.vertex(cp.edge));
  const Vec2 dn = j * n;
  const Vec2 dp0 = j * (p0 - pose.translation());
  d.leftCols<2>() = n * n.transpose();
  d.col(2) = -dn * n.dot(q - p0) - n * (dn.dot(q - p0) - n.dot(dp0));
  return d;
}

char kind_letter(FactorKind kind) {
  switch (kind) {
    case FactorKind::Motion: return 'M';
    case FactorKind::Contact: return 'C';
    case FactorKind::Visual: return 'V';
    case FactorKind::Stationary: return 'S';
  }
  return '?';
}

Factor::Factor(FactorKind kind, std::vector<NodeId> nodes, const Eigen::MatrixXd& cov)
    : kind_(kind), nodes_(std::move(nodes)), covariance_(cov) {
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * cov.cwiseAbs().maxCoeff()) {
    throw std::invalid_argument("factor covariance must be symmetric");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("factor covariance must be positive definite");
  }
  const Eigen::MatrixXd l = llt.matrixL();
  whitener_ = l.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
}

Factor Factor::motion(NodeId prev, NodeId curr, std::vector<FingerReading> fingers,
                      std::shared_ptr<const ShapeModel> shape, double dt, const Mat3& cov) {
  if (!(dt > 0.0)) throw std::invalid_argument("motion factor needs dt > 0");
  Factor f(FactorKind::Motion, {prev, curr}, cov);
  f.fingers_ = std::move(fingers);
  f.shape_ = std::move(shape);
  f.dt_ = dt;
  return f;
}

Factor Factor::contact(NodeId node, FingerReading finger,
                       std::shared_ptr<const ShapeModel> shape, double pusher_radius,
                       const Mat2& cov) {
  contact_frame(finger);  // rejects zero force
  Factor f(FactorKind::Contact, {node}, cov);
  f.fingers_ = {finger};
  f.shape_ = std::move(shape);
  f.pusher_radius_ = pusher_radius;
  return f;
}

Factor Factor::visual(NodeId node, const Pose2& w, const Mat3& cov) {
  Factor f(FactorKind::Visual, {node}, cov);
  f.target_ = w;
  return f;
}

Factor Factor::stationary(NodeId curr, NodeId prev, const Mat3& cov) {
  return Factor(FactorKind::Stationary, {curr, prev}, cov);
}

Factor Factor::anchor(NodeId node, const Pose2& fixed, const Mat3& cov) {
  Factor f(FactorKind::Stationary, {node}, cov);
  f.target_ = fixed;
  return f;
}

Eigen::VectorXd Factor::residual(std::span<const Pose2> states) const {
  switch (kind_) {
    case FactorKind::Motion: {
      const Wrench2 w = contact_wrench(states[0], fingers_, shape_->polygon());
      return motion_residual(states[0], states[1], w, shape_->c(), dt_);
    }
    case FactorKind::Contact:
      return contact_residual(states[0], fingers_.front(), *shape_, pusher_radius_);
    case FactorKind::Visual:
      return visual_residual(states[0], target_);
    case FactorKind::Stationary:
      return nodes_.size() == 1 ? prior_residual(states[0], target_)
                                : prior_residual(states[0], states[1]);
  }
  return {};
}

Eigen::MatrixXd Factor::jacobian(std::span<const Pose2> states) const {
  const auto n = static_cast<Eigen::Index>(nodes_.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim(), 3 * n);
  switch (kind_) {
    case FactorKind::Visual:
      jac.setIdentity();
      break;
    case FactorKind::Stationary:
      jac.leftCols<3>().setIdentity();
      if (n == 2) jac.rightCols<3>() = -Mat3::Identity();
      break;
    case FactorKind::Contact: {
      const FingerReading& finger = fingers_.front();
      const Mat2 frame = contact_frame(finger);
      const Vec2 b = finger.position - pusher_radius_ * frame.col(0);
      jac = frame.transpose() * closest_point_jacobian(shape_->polygon(), states[0], b);
      break;
    }
    case FactorKind::Motion: {
      const Pose2& prev = states[0];
      const Pose2& curr = states[1];
      const double c2 = shape_->c() * shape_->c();
      const Mat2 j = quarter_turn();
      const Mat2 rt = prev.rotation().transpose();
      const Wrench2 w = contact_wrench(prev, fingers_, shape_->polygon());
      const Vec3 twist = finite_twist(prev, curr, dt_);
      const Vec3 ls(c2 * w.fx, c2 * w.fy, w.m);

      Mat3 dv_prev = Mat3::Zero();
      dv_prev.topLeftCorner<2, 2>() = -rt / dt_;
      dv_prev.block<2, 1>(0, 2) = -j * twist.head<2>();
      dv_prev(2, 2) = -1.0 / dt_;
      Mat3 dv_curr = Mat3::Zero();
      dv_curr.topLeftCorner<2, 2>() = rt / dt_;
      dv_curr(2, 2) = 1.0 / dt_;

      Mat3 dl_prev = Mat3::Zero();
      dl_prev.block<2, 1>(0, 2) = -c2 * (j * Vec2(w.fx, w.fy));
      for (const FingerReading& f : fingers_) {
        const Vec2 g = -f.force;
        Eigen::Matrix<double, 2, 3> arm =
            closest_point_jacobian(shape_->polygon(), prev, f.position);
        arm.leftCols<2>() -= Mat2::Identity();
        dl_prev.row(2) += -(j * g).transpose() * arm;
      }
      jac.leftCols<3>() = -skew(ls) * dv_prev + skew(twist) * dl_prev;
      jac.rightCols<3>() = -skew(ls) * dv_curr;
      break;
    }
  }
  return jac;
}

Eigen::MatrixXd Factor::numeric_jacobian(std::span<const Pose2> states, double step) const {
  std::vector<Pose2> work(states.begin(), states.end());
  Eigen::MatrixXd jac(dim(), 3 * static_cast<Eigen::Index>(work.size()));
  for (std::size_t s = 0; s < work.size(); ++s) {
    for (int k = 0; k < 3; ++k) {
      Vec3 delta = Vec3::Zero();
      delta(k) = step;
      const Pose2 base = work[s];
      work[s] = retract(base, delta);
      const Eigen::VectorXd plus = residual(work);
      work[s] = retract(base, -delta);
      const Eigen::VectorXd minus = residual(work);
      work[s] = base;
      Eigen::VectorXd diff = plus - minus;
      // Keep angular residual components continuous across the wrap seam.
      if (kind_ == FactorKind::Visual || kind_ == FactorKind::Stationary) {
        diff(2) = wrap_angle(diff(2));
      }
      jac.col(static_cast<Eigen::Index>(3 * s) + k) = diff / (2.0 * step);
    }
  }
  return jac;
}

double Factor::cost(std::span<const Pose2> states) const {
  return (whitener_ * residual(states)).squaredNorm();
}

double mahalanobis_squared(const Eigen::VectorXd& e, const Eigen::MatrixXd& cov) {
  return e.dot(cov.ldlt().solve(e));
}

}  // namespace pushest
