#include "pushest/physics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pushest {

namespace {

// Antiderivative of sqrt(1 + u^2): integral of sec^3 in the tangent coordinate.
double sec_cubed_integral(double u) { return 0.5 * (u * std::sqrt(1.0 + u * u) + std::asinh(u)); }

constexpr double kCandidateGap = 2e-3;

struct ContactGeometry {
  std::size_t finger;
  Vec2 point;   // world
  Vec2 normal;  // world, object -> finger
  double gap;
};

ContactGeometry contact_geometry(const Polygon& poly, const Pose2& pose, const PusherState& p,
                                 std::size_t index) {
  const ClosestPoint cp = closest_point_on_polygon(poly, pose, p.center);
  const Vec2 q_local = pose.rotation().transpose() * (p.center - pose.translation());
  const bool inside = poly.contains(q_local);
  Vec2 n = cp.distance > 1e-12 ? Vec2((p.center - cp.point) / cp.distance) : cp.normal;
  if (inside) n = -n;
  const double gap = inside ? -(cp.distance + p.radius) : cp.distance - p.radius;
  return {index, cp.point, n, gap};
}

}  // namespace

double compute_c(const Polygon& poly) {
  double integral = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly.vertex(i);
    const Vec2& b = poly.vertex(i + 1);
    const Vec2 d = b - a;
    const double len = d.norm();
    const double twice_signed_area = cross2(a, b);
    const double h = std::abs(twice_signed_area) / len;
    if (h == 0.0) continue;
    const Vec2 dir = d / len;
    const double ua = a.dot(dir) / h;
    const double ub = b.dot(dir) / h;
    const double mag = h * h * h / 3.0 * std::abs(sec_cubed_integral(ub) - sec_cubed_integral(ua));
    integral += twice_signed_area > 0.0 ? mag : -mag;
  }
  return integral / poly.area();
}

Polygon center_polygon(const Polygon& poly) { return poly.translated(-poly.centroid()); }

ShapeModel::ShapeModel(Polygon polygon, double mu_pusher, double mu_surface, double mass)
    : ShapeModel(polygon, compute_c(polygon), mu_pusher, mu_surface, mass) {}

ShapeModel::ShapeModel(Polygon polygon, double c, double mu_pusher, double mu_surface, double mass)
    : polygon_(std::move(polygon)),
      c_(c),
      mu_pusher_(mu_pusher),
      mu_surface_(mu_surface),
      mass_(mass) {
  if (!(c_ > 0.0)) throw std::invalid_argument("limit-surface constant c must be positive");
  if (!(mu_pusher_ >= 0.0)) throw std::invalid_argument("mu_pusher must be non-negative");
  if (!(mu_surface_ > 0.0)) throw std::invalid_argument("mu_surface must be positive");
  if (!(mass_ > 0.0)) throw std::invalid_argument("mass must be positive");
  if (polygon_.centroid().norm() > 1e-9) {
    throw std::invalid_argument("shape polygon must have its centroid at the origin");
  }
}

Polygon named_shape(std::string_view id) {
  if (id == "rect1") return make_rectangle(0.09, 0.09);
  if (id == "ellip2") return make_ellipse(0.105, 0.1309, 128);
  if (id == "butter") {
    // Egg outline whose width tapers from 95.3 mm to 54.7 mm over 156 mm.
    constexpr double kHeight = 0.156;
    constexpr double kWide = 0.0953;
    constexpr double kNarrow = 0.0547;
    constexpr std::size_t kSegments = 128;
    std::vector<Vec2> v;
    v.reserve(kSegments);
    for (std::size_t i = 0; i < kSegments; ++i) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / kSegments;
      const double y = 0.5 * kHeight * std::sin(a);
      const double width = kNarrow + (kWide - kNarrow) * (y / kHeight + 0.5);
      v.emplace_back(0.5 * width * std::cos(a), y);
    }
    return center_polygon(Polygon(std::move(v)));
  }
  throw std::invalid_argument("unknown shape id: " + std::string(id));
}

double named_shape_mass(std::string_view id) {
  if (id == "rect1") return 0.837;
  if (id == "ellip2") return 1.110;
  if (id == "butter") return 1.197;
  throw std::invalid_argument("unknown shape id: " + std::string(id));
}

Twist2 twist_from_wrench(const ShapeModel& shape, const Wrench2& w) {
  const double c2 = shape.c() * shape.c();
  const Vec3 dir(c2 * w.fx, c2 * w.fy, w.m);
  const double norm = dir.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("twist direction undefined for a zero wrench");
  return {dir.x() / norm, dir.y() / norm, dir.z() / norm};
}

std::size_t PusherScript::finger_count() const {
  std::size_t n = 0;
  for (const auto& s : segments) n = std::max({n, s.starts.size(), s.active.size()});
  return n;
}

double PusherScript::duration() const {
  double d = 0.0;
  for (const auto& s : segments) d += s.duration;
  return d;
}

std::size_t Trajectory::index_at(double t) const {
  if (steps.empty()) throw std::out_of_range("empty trajectory");
  if (t <= steps.front().t) return 0;
  const auto k = static_cast<std::size_t>(std::floor((t - steps.front().t) / dt + 1e-9));
  return std::min(k, steps.size() - 1);
}

Pose2 Trajectory::pose_at(double t) const {
  const std::size_t k = index_at(t);
  if (k + 1 >= steps.size()) return steps.back().pose;
  const Pose2& a = steps[k].pose;
  const Pose2& b = steps[k + 1].pose;
  const double s = std::clamp((t - steps[k].t) / dt, 0.0, 1.0);
  const Vec3 d = pose_diff(b, a);
  return {a.x() + s * d.x(), a.y() + s * d.y(), a.theta() + s * d.z()};
}

ContactSolution resolve_contacts(const ShapeModel& shape, const Pose2& pose,
                                 const std::vector<PusherState>& pushers, double dt) {
  ContactSolution out;
  out.fingers.resize(pushers.size());

  std::vector<ContactGeometry> contacts;
  for (std::size_t i = 0; i < pushers.size(); ++i) {
    FingerRecord& rec = out.fingers[i];
    rec.pusher = pushers[i];
    if (!pushers[i].active) continue;
    const ContactGeometry g = contact_geometry(shape.polygon(), pose, pushers[i], i);
    rec.contact_point = g.point;
    rec.normal = g.normal;
    rec.gap = g.gap;
    if (g.gap < kCandidateGap) contacts.push_back(g);
  }
  if (contacts.empty()) return out;

  const Mat2 rot = pose.rotation();
  const Mat2 j = quarter_turn();
  const std::size_t n = contacts.size();
  const Vec3 h_diag(1.0 / (shape.max_force() * shape.max_force()),
                    1.0 / (shape.max_force() * shape.max_force()),
                    1.0 / (shape.max_moment() * shape.max_moment()));
  const Mat3 h = h_diag.asDiagonal();

  // Object frame contact data. Force on the object from contact i is
  // -fn * normal + ft * tangent, with (fn, ft) the unknowns.
  std::vector<Eigen::Matrix<double, 3, 2>> g_mats(n);
  std::vector<Vec2> normals(n), tangents(n), vels(n);
  std::vector<double> gaps(n);
  Eigen::MatrixXd wrench_map(3, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 r = rot.transpose() * (contacts[i].point - pose.translation());
    normals[i] = rot.transpose() * contacts[i].normal;
    tangents[i] = j * normals[i];
    vels[i] = rot.transpose() * pushers[contacts[i].finger].velocity;
    gaps[i] = std::max(contacts[i].gap, 0.0);
    g_mats[i].topRows<2>().setIdentity();
    g_mats[i].row(2) = (j * r).transpose();
    Mat2 basis;
    basis.col(0) = -normals[i];
    basis.col(1) = tangents[i];
    wrench_map.middleCols(2 * i, 2) = g_mats[i] * basis;
  }
  // Rows mapping the scaled forces to the finger-relative velocity components.
  const Eigen::MatrixXd vel_map = h * wrench_map;
  std::vector<Eigen::RowVectorXd> normal_rows(n), tangent_rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    normal_rows[i] = normals[i].transpose() * g_mats[i].transpose() * vel_map;
    tangent_rows[i] = tangents[i].transpose() * g_mats[i].transpose() * vel_map;
  }

  const double mu = shape.mu_pusher();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= 4;

  for (std::size_t combo = 0; combo < combos; ++combo) {
    std::vector<ContactMode> modes(n);
    for (std::size_t i = 0, code = combo; i < n; ++i, code /= 4) {
      modes[n - 1 - i] = static_cast<ContactMode>(code % 4);
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto rn = static_cast<Eigen::Index>(2 * i);
      const auto rt = rn + 1;
      if (modes[i] == ContactMode::Separate) {
        a(rn, rn) = 1.0;
        a(rt, rt) = 1.0;
        continue;
      }
      // Gap closes exactly by the end of the step.
      a.row(rn) = normal_rows[i];
      b(rn) = normals[i].dot(vels[i]) + gaps[i] / dt;
      if (modes[i] == ContactMode::Stick) {
        a.row(rt) = tangent_rows[i];
        b(rt) = tangents[i].dot(vels[i]);
      } else {
        a(rt, rt) = 1.0;
        a(rt, rn) = modes[i] == ContactMode::SlidePositive ? -mu : mu;
      }
    }
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    const Eigen::VectorXd x = cod.solve(b);
    if ((a * x - b).norm() > 1e-9 * (1.0 + b.norm())) continue;

    const Vec3 v = vel_map * x;
    const double force_tol = 1e-10 * std::max(1.0, x.lpNorm<Eigen::Infinity>());
    const double vel_tol = 1e-10;
    bool consistent = true;
    for (std::size_t i = 0; i < n && consistent; ++i) {
      const double fn = x(static_cast<Eigen::Index>(2 * i));
      const double ft = x(static_cast<Eigen::Index>(2 * i + 1));
      const Vec2 rel = vels[i] - g_mats[i].transpose() * v;
      const double rate_t = tangents[i].dot(rel);
      switch (modes[i]) {
        case ContactMode::Separate:
          consistent = gaps[i] + dt * normals[i].dot(rel) >= -1e-12;
          break;
        case ContactMode::Stick:
          consistent = fn >= -force_tol && std::abs(ft) <= mu * fn + force_tol;
          break;
        case ContactMode::SlidePositive:
          consistent = fn >= -force_tol && rate_t >= -vel_tol;
          break;
        case ContactMode::SlideNegative:
          consistent = fn >= -force_tol && rate_t <= vel_tol;
          break;
      }
    }
    if (!consistent) continue;

    const Vec3 w_scaled = wrench_map * x;
    const double s2 = w_scaled.dot(h * w_scaled);
    if (!(s2 > 1e-300)) return out;  // every contact separates
    const double s = std::sqrt(s2);
    out.twist = {v.x(), v.y(), v.z()};
    out.wrench = {w_scaled.x() / s, w_scaled.y() / s, w_scaled.z() / s};
    for (std::size_t i = 0; i < n; ++i) {
      const double fn = x(static_cast<Eigen::Index>(2 * i)) / s;
      const double ft = x(static_cast<Eigen::Index>(2 * i + 1)) / s;
      FingerRecord& rec = out.fingers[contacts[i].finger];
      rec.mode = modes[i];
      if (modes[i] == ContactMode::Separate || !(fn > 0.0)) {
        rec.mode = ContactMode::Separate;
        continue;
      }
      rec.in_contact = true;
      const Vec2 on_object = -fn * normals[i] + ft * tangents[i];
      rec.force_on_pusher = -(rot * on_object);
    }
    return out;
  }
  throw std::runtime_error("resolve_contacts: no consistent contact mode");
}

Trajectory simulate_push(const ShapeModel& shape, const PusherScript& script, const Pose2& x0,
                         double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_push: dt must be positive");
  const std::size_t fingers = script.finger_count();
  Trajectory traj;
  traj.dt = dt;

  std::vector<PusherState> pushers(fingers);
  for (auto& p : pushers) {
    p.radius = script.radius;
    p.active = false;
  }
  Pose2 pose = x0;
  std::size_t step = 0;

  for (const PushSegment& seg : script.segments) {
    const Mat2 frame_rot = seg.frame == SegmentFrame::Object ? pose.rotation() : Mat2::Identity();
    const Vec2 velocity = frame_rot * seg.velocity;
    if (velocity.norm() > kMaxQuasiStaticSpeed) {
      throw std::invalid_argument("simulate_push: pusher speed is not quasi-static");
    }
    for (std::size_t i = 0; i < fingers; ++i) {
      PusherState& p = pushers[i];
      if (i < seg.starts.size()) {
        p.center = seg.frame == SegmentFrame::Object ? transform_point(pose, seg.starts[i])
                                                     : seg.starts[i];
      }
      p.active = i < seg.active.size() ? static_cast<bool>(seg.active[i]) : i < seg.starts.size();
      p.velocity = p.active ? velocity : Vec2::Zero();
      if (p.active && contact_geometry(shape.polygon(), pose, p, i).gap < -kProjectionTolerance) {
        throw std::invalid_argument("simulate_push: pusher starts inside the object");
      }
    }

    const auto n_steps = static_cast<std::size_t>(std::llround(seg.duration / dt));
    for (std::size_t k = 0; k < n_steps; ++k, ++step) {
      ContactSolution sol = resolve_contacts(shape, pose, pushers, dt);
      SimStep rec;
      rec.t = static_cast<double>(step) * dt;
      rec.pose = pose;
      rec.twist = sol.twist;
      rec.wrench = sol.wrench;
      rec.fingers = std::move(sol.fingers);

      const Vec2 t_next =
          pose.translation() + pose.rotation() * Vec2(sol.twist.vx, sol.twist.vy) * dt;
      pose = Pose2(t_next.x(), t_next.y(), pose.theta() + sol.twist.omega * dt);
      for (auto& p : pushers) p.center += p.velocity * dt;

      for (std::size_t i = 0; i < fingers; ++i) {
        if (!pushers[i].active) continue;
        const ContactGeometry g = contact_geometry(shape.polygon(), pose, pushers[i], i);
        if (g.gap < -kProjectionTolerance) {
          const Vec2 t = pose.translation() + g.gap * g.normal;
          pose = Pose2(t.x(), t.y(), pose.theta());
          rec.projected = true;
        }
      }
      traj.steps.push_back(std::move(rec));
    }
  }

  SimStep last;
  last.t = static_cast<double>(step) * dt;
  last.pose = pose;
  last.fingers.resize(fingers);
  for (std::size_t i = 0; i < fingers; ++i) {
    last.fingers[i].pusher = pushers[i];
    last.fingers[i].pusher.velocity = Vec2::Zero();
  }
  traj.steps.push_back(std::move(last));
  return traj;
}

}  // namespace pushest
