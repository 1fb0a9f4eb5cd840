#pragma once

#include "pushest/geom2d.hpp"

#include <string_view>
#include <vector>

namespace pushest {

inline constexpr double kGravity = 9.81;

/// Planar wrench; the moment is about the object frame origin.
struct Wrench2 {
  double fx = 0.0;
  double fy = 0.0;
  double m = 0.0;

  Vec3 vector() const { return {fx, fy, m}; }
};

// Mean distance of the polygon's area to the origin, (1/A) * integral |r| dA,
// evaluated in closed form per edge. This is the ellipsoid limit-surface
// constant for a uniform pressure distribution centred at the origin.
double compute_c(const Polygon& poly);

// Shifts a polygon so that its area centroid sits at the origin.
Polygon center_polygon(const Polygon& poly);

/// Rigid object pushed on a support surface.
class ShapeModel {
 public:
  // c is computed from the polygon under uniform pressure.
  ShapeModel(Polygon polygon, double mu_pusher, double mu_surface, double mass);
  ShapeModel(Polygon polygon, double c, double mu_pusher, double mu_surface, double mass);

  const Polygon& polygon() const { return polygon_; }
  double c() const { return c_; }
  double mu_pusher() const { return mu_pusher_; }
  double mu_surface() const { return mu_surface_; }
  double mass() const { return mass_; }

  // Semi-axes of the ellipsoid limit surface.
  double max_force() const { return mu_surface_ * mass_ * kGravity; }
  double max_moment() const { return c_ * max_force(); }

 private:
  Polygon polygon_;
  double c_;
  double mu_pusher_;
  double mu_surface_;
  double mass_;
};

// Object shapes used by the standard experiments: "rect1", "ellip2", "butter".
Polygon named_shape(std::string_view id);
double named_shape_mass(std::string_view id);

// Unit twist direction (c^2 fx, c^2 fy, m) / norm, object frame.
// Throws std::invalid_argument for the zero wrench.
Twist2 twist_from_wrench(const ShapeModel& shape, const Wrench2& w);

struct PusherState {
  Vec2 center = Vec2::Zero();
  double radius = 0.003125;
  Vec2 velocity = Vec2::Zero();
  bool active = true;  // inactive fingers are lifted off the surface
};

enum class ContactMode { Separate, Stick, SlidePositive, SlideNegative };

struct FingerRecord {
  PusherState pusher;
  bool in_contact = false;  // carries a strictly positive normal force
  ContactMode mode = ContactMode::Separate;
  Vec2 force_on_pusher = Vec2::Zero();  // world frame, object on finger
  Vec2 contact_point = Vec2::Zero();    // world frame, on the object boundary
  Vec2 normal = Vec2::Zero();           // world frame, from object towards finger
  double gap = 0.0;
};

/// Object state at t and the motion applied over [t, t + dt).
struct SimStep {
  double t = 0.0;
  Pose2 pose;
  Twist2 twist;    // object frame at `pose`
  Wrench2 wrench;  // total pusher wrench on the object, object frame at `pose`
  std::vector<FingerRecord> fingers;
  bool projected = false;  // penetration projection was applied after this step
};

struct Trajectory {
  double dt = 0.0;
  std::vector<SimStep> steps;

  double duration() const { return steps.empty() ? 0.0 : steps.back().t; }
  // Linear interpolation between steps, heading interpolated along the short arc.
  Pose2 pose_at(double t) const;
  // Index of the last step with steps[i].t <= t.
  std::size_t index_at(double t) const;
};

enum class SegmentFrame { World, Object };

/// Straight constant-velocity pusher motion. With SegmentFrame::Object the start
/// points and velocity are given in the object frame sampled at the beginning of
/// the segment, so strokes follow the object wherever earlier strokes left it.
struct PushSegment {
  double duration = 0.0;
  SegmentFrame frame = SegmentFrame::World;
  std::vector<Vec2> starts;
  Vec2 velocity = Vec2::Zero();
  std::vector<bool> active;
};

struct PusherScript {
  double radius = 0.003125;
  std::vector<PushSegment> segments;

  std::size_t finger_count() const;
  double duration() const;
};

inline constexpr double kMaxQuasiStaticSpeed = 0.1;
inline constexpr double kProjectionTolerance = 1e-6;

/// Outcome of one quasi-static contact resolution.
struct ContactSolution {
  Twist2 twist;
  Wrench2 wrench;
  std::vector<FingerRecord> fingers;
};

// Resolves the contact forces and object twist for one step of length dt.
ContactSolution resolve_contacts(const ShapeModel& shape, const Pose2& pose,
                                 const std::vector<PusherState>& pushers, double dt);

// Quasi-static forward simulation. Throws std::invalid_argument when dt <= 0, a
// segment exceeds kMaxQuasiStaticSpeed, or a segment starts with an active
// finger inside the object.
Trajectory simulate_push(const ShapeModel& shape, const PusherScript& script, const Pose2& x0,
                         double dt);

}  // namespace pushest
