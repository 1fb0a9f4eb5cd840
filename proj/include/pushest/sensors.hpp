#pragma once

#include "pushest/geom2d.hpp"
#include "pushest/physics.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace pushest {

struct VisualSample {
  double t = 0.0;
  Pose2 pose;              // meaningless when !available
  bool available = false;
};

struct FingerReading {
  Vec2 force = Vec2::Zero();     // object on finger, world frame
  Vec2 position = Vec2::Zero();  // finger centre, world frame
  bool contact = false;          // |force| >= tau
};

struct TactileSample {
  double t = 0.0;
  std::vector<FingerReading> fingers;

  std::size_t contact_count() const;
};

struct NoiseSpec {
  Vec3 visual_sigma = Vec3(0.01, 0.01, 3.0 * 3.14159265358979323846 / 180.0);
  // Constant calibration bias added to every visual pose.
  Vec3 visual_bias = Vec3::Zero();
  double force_sigma = 0.005;
  double finger_pos_sigma = 0.0005;
  double tau = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
  static NoiseSpec zero();
};

/// Sorted, non-overlapping [start, end) intervals during which the camera is blind.
class OcclusionSchedule {
 public:
  OcclusionSchedule() = default;
  explicit OcclusionSchedule(std::vector<std::pair<double, double>> intervals);

  bool occluded(double t) const;
  const std::vector<std::pair<double, double>>& intervals() const { return intervals_; }
  double total() const;

 private:
  std::vector<std::pair<double, double>> intervals_;
};

// One sample every 1/rate seconds from t = 0 to the end of the trajectory.
std::vector<VisualSample> render_visual(const Trajectory& gt, const NoiseSpec& noise,
                                        const OcclusionSchedule& occ, double rate);

// Samples the simulator step at or before each sample time (zero-order hold).
std::vector<TactileSample> render_tactile(const Trajectory& gt, const NoiseSpec& noise,
                                          double rate);

// Integer microsecond clock used for all sample/tick association.
std::int64_t to_micros(double t);

}  // namespace pushest
