#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <vector>

namespace pushest {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

// Wraps an angle into [-pi, pi). Throws std::domain_error for non-finite input.
double wrap_angle(double a);

// Quarter-turn rotation, J * (x, y) = (-y, x).
inline Mat2 quarter_turn() {
  Mat2 j;
  j << 0.0, -1.0, 1.0, 0.0;
  return j;
}

// z-component of the planar cross product a x b.
inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline Mat2 rotation(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

/// Planar pose. The heading is kept wrapped into [-pi, pi).
class Pose2 {
 public:
  Pose2() = default;
  Pose2(double x, double y, double theta);
  explicit Pose2(const Vec3& v) : Pose2(v.x(), v.y(), v.z()) {}

  double x() const { return x_; }
  double y() const { return y_; }
  double theta() const { return theta_; }

  Vec2 translation() const { return {x_, y_}; }
  Mat2 rotation() const { return pushest::rotation(theta_); }
  Vec3 vector() const { return {x_, y_, theta_}; }

  // this * other: other is expressed in this pose's frame.
  Pose2 compose(const Pose2& other) const;
  Pose2 inverse() const;

  bool operator==(const Pose2&) const = default;

 private:
  double x_ = 0.0;
  double y_ = 0.0;
  double theta_ = 0.0;
};

struct Twist2 {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  Vec3 vector() const { return {vx, vy, omega}; }
};

// (a.x - b.x, a.y - b.y, wrap(a.theta - b.theta)).
Vec3 pose_diff(const Pose2& a, const Pose2& b);

// Rotation by theta followed by translation.
Vec2 transform_point(const Pose2& pose, const Vec2& p_local);

// Adds an increment to the (x, y, theta) coordinates, wrapping the heading.
Pose2 retract(const Pose2& pose, const Vec3& delta);

/// Simple counter-clockwise polygon. Construction validates the vertex list and
/// throws std::invalid_argument for fewer than three vertices, self-intersection
/// or clockwise / zero-area input.
class Polygon {
 public:
  explicit Polygon(std::vector<Vec2> vertices);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  const Vec2& vertex(std::size_t i) const { return vertices_[i % vertices_.size()]; }

  double area() const { return area_; }
  Vec2 centroid() const;
  bool contains(const Vec2& q) const;

  Polygon translated(const Vec2& offset) const;
  Polygon scaled(double s) const;

  // Outward unit normal of edge i (from vertex i to vertex i + 1).
  Vec2 edge_normal(std::size_t i) const;

 private:
  std::vector<Vec2> vertices_;
  double area_ = 0.0;
};

/// Result of a closest-boundary-point query.
struct ClosestPoint {
  Vec2 point;        // on the posed boundary, world frame
  double distance;   // |q - point|, always >= 0
  Vec2 normal;       // outward unit normal of the supporting feature
  std::size_t edge;  // supporting edge index
  double t;          // position along the edge in [0, 1]
  bool at_vertex;    // true when the projection clamped to an edge end
  std::size_t vertex;
};

// Closest point on the boundary of `poly` posed by `pose`, to the world point q.
// Equidistant edges resolve to the lowest edge index. Interior points are
// allowed. Vertex hits report the normalized bisector of the adjacent edge
// normals.
ClosestPoint closest_point_on_polygon(const Polygon& poly, const Pose2& pose, const Vec2& q);

// Same query with the polygon already expressed in the query frame.
ClosestPoint closest_point_local(const Polygon& poly, const Vec2& q);

// Convenience shapes, centered at the origin.
Polygon make_rectangle(double width, double height);
Polygon make_ellipse(double width, double height, std::size_t segments);
Polygon make_regular_polygon(double circumradius, std::size_t sides);

}  // namespace pushest
