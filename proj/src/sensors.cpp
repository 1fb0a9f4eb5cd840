#include "pushest/sensors.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace pushest {

namespace {

// Independent, reproducible engines per stream.
std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::size_t sample_count(const Trajectory& gt, double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("sample rate must be positive");
  if (gt.steps.empty()) return 0;
  return static_cast<std::size_t>(std::floor(gt.duration() * rate + 1e-9)) + 1;
}

// Gaussian draw that is exactly zero for a zero sigma.
double draw(std::mt19937_64& rng, std::normal_distribution<double>& unit, double sigma) {
  const double z = unit(rng);
  return sigma == 0.0 ? 0.0 : sigma * z;
}

}  // namespace

std::size_t TactileSample::contact_count() const {
  std::size_t n = 0;
  for (const auto& f : fingers) n += f.contact ? 1 : 0;
  return n;
}

void NoiseSpec::validate() const {
  if ((visual_sigma.array() < 0.0).any() || force_sigma < 0.0 || finger_pos_sigma < 0.0) {
    throw std::invalid_argument("noise sigmas must be non-negative");
  }
  if (!(tau > 0.0)) throw std::invalid_argument("contact threshold tau must be positive");
}

NoiseSpec NoiseSpec::zero() {
  NoiseSpec n;
  n.visual_sigma.setZero();
  n.visual_bias.setZero();
  n.force_sigma = 0.0;
  n.finger_pos_sigma = 0.0;
  return n;
}

OcclusionSchedule::OcclusionSchedule(std::vector<std::pair<double, double>> intervals)
    : intervals_(std::move(intervals)) {
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    if (!(intervals_[i].first < intervals_[i].second)) {
      throw std::invalid_argument("occlusion interval must have start < end");
    }
    if (i > 0 && intervals_[i].first < intervals_[i - 1].second) {
      throw std::invalid_argument("occlusion intervals must be sorted and non-overlapping");
    }
  }
}

bool OcclusionSchedule::occluded(double t) const {
  for (const auto& [start, end] : intervals_) {
    if (t >= start && t < end) return true;
  }
  return false;
}

double OcclusionSchedule::total() const {
  double s = 0.0;
  for (const auto& [start, end] : intervals_) s += end - start;
  return s;
}

std::int64_t to_micros(double t) { return std::llround(t * 1e6); }

std::vector<VisualSample> render_visual(const Trajectory& gt, const NoiseSpec& noise,
                                        const OcclusionSchedule& occ, double rate) {
  noise.validate();
  const std::size_t n = sample_count(gt, rate);
  auto rng = make_engine(noise.seed, 1);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<VisualSample> out;
  out.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    VisualSample s;
    s.t = static_cast<double>(j) / rate;
    const Pose2 truth = gt.pose_at(s.t);
    // Draw even when occluded so the noise sequence does not depend on the schedule.
    const Vec3 e(draw(rng, unit, noise.visual_sigma.x()), draw(rng, unit, noise.visual_sigma.y()),
                 draw(rng, unit, noise.visual_sigma.z()));
    s.available = !occ.occluded(s.t);
    if (s.available) s.pose = retract(truth, e + noise.visual_bias);
    out.push_back(s);
  }
  return out;
}

std::vector<TactileSample> render_tactile(const Trajectory& gt, const NoiseSpec& noise,
                                          double rate) {
  noise.validate();
  const std::size_t n = sample_count(gt, rate);
  auto rng = make_engine(noise.seed, 2);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<TactileSample> out;
  out.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    TactileSample s;
    s.t = static_cast<double>(j) / rate;
    const SimStep& step = gt.steps[gt.index_at(s.t)];
    for (const FingerRecord& f : step.fingers) {
      FingerReading r;
      r.force = f.force_on_pusher;
      r.force.x() += draw(rng, unit, noise.force_sigma);
      r.force.y() += draw(rng, unit, noise.force_sigma);
      r.position = f.pusher.center;
      r.position.x() += draw(rng, unit, noise.finger_pos_sigma);
      r.position.y() += draw(rng, unit, noise.finger_pos_sigma);
      r.contact = r.force.norm() >= noise.tau;
      s.fingers.push_back(r);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace pushest
