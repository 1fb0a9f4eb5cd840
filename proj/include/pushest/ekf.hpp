#pragma once

#include "pushest/factors.hpp"
#include "pushest/geom2d.hpp"
#include "pushest/physics.hpp"
#include "pushest/sensors.hpp"

#include <optional>
#include <vector>

namespace pushest {

struct GaussianBelief {
  Pose2 mean;
  Mat3 covariance = Mat3::Zero();
};

struct EkfDiagnostics {
  bool projected = false;  // covariance needed a PSD projection
  int visual_updates = 0;
  int contact_updates = 0;
  int motion_updates = 0;
};

/// Single-state filter over the same measurement models as the smoother.
/// Prediction keeps the mean and adds the stationary covariance; updates are
/// applied sequentially: visual, per-finger contact, then the motion
/// pseudo-measurement against the previous posterior mean.
class Ekf {
 public:
  Ekf(std::shared_ptr<const ShapeModel> shape, Covariances covariances, double pusher_radius,
      GaussianBelief initial);

  const GaussianBelief& step(const TactileSample& tactile, const std::optional<VisualSample>& visual,
                             double dt);
  const GaussianBelief& belief() const { return belief_; }
  const EkfDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  std::shared_ptr<const ShapeModel> shape_;
  Covariances cov_;
  double radius_;
  GaussianBelief belief_;
  std::optional<Pose2> previous_mean_;
  std::optional<TactileSample> previous_tactile_;
  EkfDiagnostics diagnostics_;
};

// One filter cycle as a pure function. `previous_mean` and `motion_fingers`
// feed the motion pseudo-measurement (skipped when either is empty).
GaussianBelief ekf_step(const GaussianBelief& belief, const TactileSample& tactile,
                        const std::optional<VisualSample>& visual, const ShapeModel& shape,
                        double dt, const Covariances& cov, double pusher_radius,
                        const std::optional<Pose2>& previous_mean = std::nullopt,
                        const std::vector<FingerReading>& motion_fingers = {},
                        EkfDiagnostics* diagnostics = nullptr);

// Symmetrizes and clips negative eigenvalues. Returns true if clipping was needed.
bool project_psd(Mat3& covariance);

/// Holds the latest available camera pose.
struct BaselineOutput {
  double t;
  Pose2 pose;
};

// Zero-order hold of the latest available visual pose at each query time.
// Throws std::invalid_argument for a query before the first available sample.
std::vector<BaselineOutput> raw_visual_baseline(const std::vector<VisualSample>& stream,
                                                const std::vector<double>& query_times);

}  // namespace pushest
