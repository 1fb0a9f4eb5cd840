#include "pushest/geom2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace pushest {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Orientation of the triplet (a, b, c): > 0 for a left turn.
double orient(const Vec2& a, const Vec2& b, const Vec2& c) { return cross2(b - a, c - a); }

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = orient(q1, q2, p1);
  const double d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1);
  const double d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  return (d1 == 0 && on_segment(q1, q2, p1)) || (d2 == 0 && on_segment(q1, q2, p2)) ||
         (d3 == 0 && on_segment(p1, p2, q1)) || (d4 == 0 && on_segment(p1, p2, q2));
}

}  // namespace

double wrap_angle(double a) {
  if (!std::isfinite(a)) {
    throw std::domain_error("wrap_angle: non-finite angle");
  }
  double r = a - kTwoPi * std::floor((a + std::numbers::pi) / kTwoPi);
  // floor() can land one period off when a + pi rounds onto a multiple of 2pi.
  if (r >= std::numbers::pi) r -= kTwoPi;
  if (r < -std::numbers::pi) r += kTwoPi;
  return r;
}

Pose2::Pose2(double x, double y, double theta) : x_(x), y_(y), theta_(wrap_angle(theta)) {}

Pose2 Pose2::compose(const Pose2& other) const {
  const Vec2 t = translation() + rotation() * other.translation();
  return {t.x(), t.y(), theta_ + other.theta_};
}

Pose2 Pose2::inverse() const {
  const Vec2 t = -(rotation().transpose() * translation());
  return {t.x(), t.y(), -theta_};
}

Vec3 pose_diff(const Pose2& a, const Pose2& b) {
  return {a.x() - b.x(), a.y() - b.y(), wrap_angle(a.theta() - b.theta())};
}

Vec2 transform_point(const Pose2& pose, const Vec2& p_local) {
  return pose.rotation() * p_local + pose.translation();
}

Pose2 retract(const Pose2& pose, const Vec3& delta) {
  return {pose.x() + delta.x(), pose.y() + delta.y(), pose.theta() + delta.z()};
}

Polygon::Polygon(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
  const std::size_t n = vertices_.size();
  if (n < 3) {
    throw std::invalid_argument("polygon needs at least 3 vertices");
  }
  for (const auto& v : vertices_) {
    if (!v.allFinite()) throw std::invalid_argument("polygon vertex is not finite");
  }
  double twice_area = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    twice_area += cross2(vertices_[i], vertices_[(i + 1) % n]);
  }
  area_ = 0.5 * twice_area;
  if (!(area_ > 0.0)) {
    throw std::invalid_argument("polygon must be counter-clockwise with positive area");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(vertices_[i], vertices_[(i + 1) % n], vertices_[j],
                             vertices_[(j + 1) % n])) {
        throw std::invalid_argument("polygon is self-intersecting");
      }
    }
  }
}

Vec2 Polygon::centroid() const {
  const std::size_t n = vertices_.size();
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = vertices_[i];
    const Vec2& b = vertices_[(i + 1) % n];
    c += (a + b) * cross2(a, b);
  }
  return c / (6.0 * area_);
}

bool Polygon::contains(const Vec2& q) const {
  bool inside = false;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = vertices_[i];
    const Vec2& b = vertices_[j];
    if ((a.y() > q.y()) != (b.y() > q.y()) &&
        q.x() < (b.x() - a.x()) * (q.y() - a.y()) / (b.y() - a.y()) + a.x()) {
      inside = !inside;
    }
  }
  return inside;
}

Polygon Polygon::translated(const Vec2& offset) const {
  std::vector<Vec2> v = vertices_;
  for (auto& p : v) p += offset;
  return Polygon(std::move(v));
}

Polygon Polygon::scaled(double s) const {
  if (!(s > 0.0)) throw std::invalid_argument("polygon scale must be positive");
  std::vector<Vec2> v = vertices_;
  for (auto& p : v) p *= s;
  return Polygon(std::move(v));
}

Vec2 Polygon::edge_normal(std::size_t i) const {
  const Vec2 d = vertex(i + 1) - vertex(i);
  return Vec2(d.y(), -d.x()).normalized();
}

ClosestPoint closest_point_local(const Polygon& poly, const Vec2& q) {
  const std::size_t n = poly.size();
  ClosestPoint best{Vec2::Zero(), std::numeric_limits<double>::infinity(), Vec2::Zero(), 0, 0.0,
                    false, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly.vertex(i);
    const Vec2 d = poly.vertex(i + 1) - a;
    const double t = std::clamp((q - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
    const Vec2 p = a + t * d;
    const double dist = (q - p).norm();
    if (dist < best.distance) {
      best.point = p;
      best.distance = dist;
      best.edge = i;
      best.t = t;
    }
  }
  best.at_vertex = best.t == 0.0 || best.t == 1.0;
  if (best.at_vertex) {
    best.vertex = best.t == 0.0 ? best.edge : (best.edge + 1) % n;
    const std::size_t prev = (best.vertex + n - 1) % n;
    best.normal = (poly.edge_normal(prev) + poly.edge_normal(best.vertex)).normalized();
  } else {
    best.vertex = best.edge;
    best.normal = poly.edge_normal(best.edge);
  }
  return best;
}

ClosestPoint closest_point_on_polygon(const Polygon& poly, const Pose2& pose, const Vec2& q) {
  const Mat2 r = pose.rotation();
  const Vec2 q_local = r.transpose() * (q - pose.translation());
  ClosestPoint cp = closest_point_local(poly, q_local);
  cp.point = r * cp.point + pose.translation();
  cp.normal = r * cp.normal;
  return cp;
}

Polygon make_rectangle(double width, double height) {
  const double hx = 0.5 * width;
  const double hy = 0.5 * height;
  return Polygon({{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}});
}

Polygon make_ellipse(double width, double height, std::size_t segments) {
  std::vector<Vec2> v;
  v.reserve(segments);
  for (std::size_t i = 0; i < segments; ++i) {
    const double a = kTwoPi * static_cast<double>(i) / static_cast<double>(segments);
    v.emplace_back(0.5 * width * std::cos(a), 0.5 * height * std::sin(a));
  }
  return Polygon(std::move(v));
}

Polygon make_regular_polygon(double circumradius, std::size_t sides) {
  return make_ellipse(2.0 * circumradius, 2.0 * circumradius, sides);
}

}  // namespace pushest
