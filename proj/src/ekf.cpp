#include "pushest/ekf.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace pushest {

namespace {

// Joseph-form measurement update with innovation y = z - h(x).
template <int Rows>
void kalman_update(GaussianBelief& b, const Eigen::Matrix<double, Rows, 1>& innovation,
                   const Eigen::Matrix<double, Rows, 3>& h,
                   const Eigen::Matrix<double, Rows, Rows>& r) {
  const Eigen::Matrix<double, Rows, Rows> s = h * b.covariance * h.transpose() + r;
  const Eigen::Matrix<double, 3, Rows> k = s.ldlt().solve(h * b.covariance).transpose();
  b.mean = retract(b.mean, k * innovation);
  const Mat3 a = Mat3::Identity() - k * h;
  b.covariance = a * b.covariance * a.transpose() + k * r * k.transpose();
  b.covariance = (0.5 * (b.covariance + b.covariance.transpose())).eval();
}

}  // namespace

bool project_psd(Mat3& covariance) {
  covariance = (0.5 * (covariance + covariance.transpose())).eval();
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(covariance);
  if (eig.eigenvalues().minCoeff() >= 0.0) return false;
  const Vec3 clipped = eig.eigenvalues().cwiseMax(0.0);
  covariance = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  covariance = (0.5 * (covariance + covariance.transpose())).eval();
  return true;
}

GaussianBelief ekf_step(const GaussianBelief& belief, const TactileSample& tactile,
                        const std::optional<VisualSample>& visual, const ShapeModel& shape,
                        double dt, const Covariances& cov, double pusher_radius,
                        const std::optional<Pose2>& previous_mean,
                        const std::vector<FingerReading>& motion_fingers,
                        EkfDiagnostics* diagnostics) {
  GaussianBelief b = belief;
  b.covariance += cov.stationary;

  if (visual && visual->available) {
    const Vec3 y = pose_diff(visual->pose, b.mean);
    kalman_update<3>(b, y, Mat3::Identity(), cov.visual);
    if (diagnostics) ++diagnostics->visual_updates;
  }

  const std::shared_ptr<const ShapeModel> view(std::shared_ptr<const ShapeModel>{}, &shape);
  for (const FingerReading& f : tactile.fingers) {
    if (!f.contact) continue;
    const Factor factor = Factor::contact(0, f, view, pusher_radius, cov.contact);
    const Pose2 states[] = {b.mean};
    const Vec2 y = -factor.residual(states);
    const Eigen::Matrix<double, 2, 3> h = factor.jacobian(states);
    kalman_update<2>(b, y, h, cov.contact);
    if (diagnostics) ++diagnostics->contact_updates;
  }

  if (previous_mean && !motion_fingers.empty() && dt > 0.0) {
    const Factor factor = Factor::motion(0, 1, motion_fingers, view, dt, cov.motion);
    const Pose2 states[] = {*previous_mean, b.mean};
    const Vec3 y = -factor.residual(states);
    const Eigen::MatrixXd j = factor.jacobian(states);
    const Mat3 h = j.rightCols<3>();
    const Mat3 h_prev = j.leftCols<3>();
    // The stored previous mean carries the previous posterior's uncertainty.
    const Mat3 r = cov.motion + h_prev * belief.covariance * h_prev.transpose();
    kalman_update<3>(b, y, h, r);
    if (diagnostics) ++diagnostics->motion_updates;
  }

  if (project_psd(b.covariance) && diagnostics) diagnostics->projected = true;
  return b;
}

Ekf::Ekf(std::shared_ptr<const ShapeModel> shape, Covariances covariances, double pusher_radius,
         GaussianBelief initial)
    : shape_(std::move(shape)),
      cov_(std::move(covariances)),
      radius_(pusher_radius),
      belief_(std::move(initial)) {
  if (!shape_) throw std::invalid_argument("ekf needs a shape model");
}

const GaussianBelief& Ekf::step(const TactileSample& tactile,
                                const std::optional<VisualSample>& visual, double dt) {
  std::vector<FingerReading> touching;
  if (previous_tactile_) {
    for (const auto& f : previous_tactile_->fingers) {
      if (f.contact) touching.push_back(f);
    }
  }
  belief_ = ekf_step(belief_, tactile, visual, *shape_, dt, cov_, radius_, previous_mean_,
                     touching, &diagnostics_);
  previous_mean_ = belief_.mean;
  previous_tactile_ = tactile;
  return belief_;
}

std::vector<BaselineOutput> raw_visual_baseline(const std::vector<VisualSample>& stream,
                                                const std::vector<double>& query_times) {
  std::vector<BaselineOutput> out;
  out.reserve(query_times.size());
  std::size_t next = 0;
  std::optional<Pose2> latest;
  for (double q : query_times) {
    const std::int64_t q_us = to_micros(q);
    while (next < stream.size() && to_micros(stream[next].t) <= q_us) {
      if (stream[next].available) latest = stream[next].pose;
      ++next;
    }
    if (!latest) {
      throw std::invalid_argument("raw_visual_baseline: no visual sample available yet");
    }
    out.push_back({q, *latest});
  }
  return out;
}

}  // namespace pushest
