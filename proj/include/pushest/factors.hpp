#pragma once

#include "pushest/geom2d.hpp"
#include "pushest/physics.hpp"
#include "pushest/sensors.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace pushest {

using NodeId = std::uint64_t;

/// Noise covariances of the four cost terms.
struct Covariances {
  Mat3 motion;      // cross-product motion residual
  Mat2 contact;     // contact-frame point residual, m^2
  Mat3 visual;      // camera pose residual
  Mat3 stationary;  // per estimation step (10 ms)

  // Nominal sensor noise; the motion term is identified from simulation.
  static Covariances defaults();
  // All four identified from ground-truth residuals of the standard scenario.
  static Covariances identified();
};

// Contact point on the finger circle, opposite the sensed object-on-finger force.
Vec2 sensed_contact_point(const FingerReading& finger, double pusher_radius);

// Finite-difference twist of x_prev -> x_curr in the x_prev frame crossed with the
// limit-surface direction (c^2 Fx, c^2 Fy, m). Zero iff the two are parallel.
Vec3 motion_residual(const Pose2& x_prev, const Pose2& x_curr, const Wrench2& wrench, double c,
                     double dt);

// Total wrench that the in-contact fingers apply to an object at `pose`, in that
// pose's frame. The moment is about the pose origin, with each force acting at
// the boundary point closest to its finger centre.
Wrench2 contact_wrench(const Pose2& pose, std::span<const FingerReading> fingers,
                       const Polygon& poly);

// A - B in the contact frame (sensed force direction, its left perpendicular).
// Throws std::invalid_argument for a zero force.
Vec2 contact_residual(const Pose2& x, const FingerReading& finger, const ShapeModel& shape,
                      double pusher_radius);

Vec3 visual_residual(const Pose2& x, const Pose2& w);
Vec3 prior_residual(const Pose2& x_curr, const Pose2& x_prev);

// d(closest boundary point to the fixed world point q)/d(x, y, theta) of the pose.
Eigen::Matrix<double, 2, 3> closest_point_jacobian(const Polygon& poly, const Pose2& pose,
                                                   const Vec2& q);

enum class FactorKind { Motion, Contact, Visual, Stationary };

char kind_letter(FactorKind kind);

/// One covariance-weighted residual term connecting one or two pose nodes.
class Factor {
 public:
  static Factor motion(NodeId prev, NodeId curr, std::vector<FingerReading> fingers,
                       std::shared_ptr<const ShapeModel> shape, double dt, const Mat3& cov);
  static Factor contact(NodeId node, FingerReading finger,
                        std::shared_ptr<const ShapeModel> shape, double pusher_radius,
                        const Mat2& cov);
  static Factor visual(NodeId node, const Pose2& w, const Mat3& cov);
  static Factor stationary(NodeId curr, NodeId prev, const Mat3& cov);
  // Unary stationary prior pinning a node to a fixed pose.
  static Factor anchor(NodeId node, const Pose2& fixed, const Mat3& cov);

  FactorKind kind() const { return kind_; }
  const std::vector<NodeId>& nodes() const { return nodes_; }
  int dim() const { return static_cast<int>(covariance_.rows()); }
  bool is_anchor() const { return kind_ == FactorKind::Stationary && nodes_.size() == 1; }

  // `states` are ordered like nodes().
  Eigen::VectorXd residual(std::span<const Pose2> states) const;
  Eigen::MatrixXd jacobian(std::span<const Pose2> states) const;
  Eigen::MatrixXd numeric_jacobian(std::span<const Pose2> states, double step = 1e-6) const;

  const Eigen::MatrixXd& covariance() const { return covariance_; }
  // W with W^T W = covariance^-1.
  const Eigen::MatrixXd& whitener() const { return whitener_; }
  double cost(std::span<const Pose2> states) const;

 private:
  Factor(FactorKind kind, std::vector<NodeId> nodes, const Eigen::MatrixXd& cov);

  FactorKind kind_;
  std::vector<NodeId> nodes_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd whitener_;

  std::vector<FingerReading> fingers_;
  std::shared_ptr<const ShapeModel> shape_;
  double pusher_radius_ = 0.0;
  double dt_ = 0.0;
  Pose2 target_;
};

// Squared Mahalanobis norm e^T cov^-1 e.
double mahalanobis_squared(const Eigen::VectorXd& e, const Eigen::MatrixXd& cov);

}  // namespace pushest
