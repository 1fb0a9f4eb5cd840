// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero
// if any criterion fails.
#include "pushest/ekf.hpp"
#include "pushest/scenario.hpp"
#include "pushest/smoother.hpp"
#include "pushest/stats.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

using namespace pushest;

namespace {

constexpr double kRad2Deg = 180.0 / std::numbers::pi;

// Pinned tolerances.
constexpr double kJacobianStep = 1e-6;
constexpr double kJacobianRelTol = 1e-5;
constexpr int kJacobianSamples = 100;
constexpr double kJacobianSeconds = 10.0;
constexpr double kSimResidualTol = 1e-8;
constexpr double kSimSeconds = 30.0;
constexpr double kRecoveryMm = 1e-3;
constexpr double kRecoveryDeg = 1e-3;
constexpr double kFusionTransRatio = 0.6;
constexpr double kSmoothingTransRatio = 1.1;
constexpr double kOcclusionRatio = 0.3;
constexpr double kTrimMm = 0.5;
constexpr double kTrimDeg = 0.1;
constexpr double kMeanStepMs = 5.0;
constexpr double kMaxStepMs = 100.0;
constexpr double kCovarianceRelTol = 0.05;
constexpr int kSeeds = 10;

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("CRITERION %d %s: %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

// Identifies which boundary feature is closest; changes mark a switch neighbourhood.
int feature(const Polygon& poly, const Pose2& pose, const Vec2& q) {
  const ClosestPoint cp = closest_point_on_polygon(poly, pose, q);
  return cp.at_vertex ? -1 - static_cast<int>(cp.vertex) : static_cast<int>(cp.edge);
}

// True when perturbing any pose coordinate well beyond the FD step keeps the
// closest feature of every query point.
bool away_from_switch(const Polygon& poly, const Pose2& pose, const std::vector<Vec2>& queries) {
  constexpr double margin = 1e-4;
  for (const Vec2& q : queries) {
    const int f0 = feature(poly, pose, q);
    for (int k = 0; k < 3; ++k) {
      for (double s : {-margin, margin}) {
        Vec3 d = Vec3::Zero();
        d(k) = s;
        if (feature(poly, retract(pose, d), q) != f0) return false;
      }
    }
  }
  return true;
}

struct JacobianCase {
  Factor factor;
  std::vector<Pose2> states;
};

class StateSampler {
 public:
  explicit StateSampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  Pose2 pose() { return Pose2(uniform(-0.2, 0.2), uniform(-0.2, 0.2), uniform(-3.1, 3.1)); }

  // A finger touching (or nearly touching) the boundary of `poly` at `pose`,
  // pushed by a force inside a friction cone around the normal.
  FingerReading finger(const Polygon& poly, const Pose2& pose, double radius) {
    const std::size_t e = index(poly.size());
    const double t = uniform(0.05, 0.95);
    const Vec2 local = poly.vertex(e) + t * (poly.vertex(e + 1) - poly.vertex(e));
    const Vec2 n_local = poly.edge_normal(e);
    const Vec2 p = transform_point(pose, local);
    const Vec2 n = pose.rotation() * n_local;
    FingerReading f;
    f.position = p + n * (radius + uniform(-5e-4, 5e-4));
    f.force = rotation(uniform(-0.24, 0.24)) * n * uniform(0.1, 3.0);
    f.contact = true;
    return f;
  }

 private:
  std::mt19937_64 rng_;
};

void criterion_jacobians() {
  const auto t0 = std::chrono::steady_clock::now();
  const double radius = 0.003125;
  std::vector<std::shared_ptr<const ShapeModel>> shapes;
  for (const char* id : {"rect1", "ellip2", "butter"}) {
    shapes.push_back(std::make_shared<const ShapeModel>(named_shape(id), 0.25, 0.28,
                                                        named_shape_mass(id)));
  }
  const Mat3 cov3 = Vec3(1e-4, 1e-4, 1e-3).asDiagonal();
  const Mat2 cov2 = Vec2(1e-6, 1e-6).asDiagonal();

  StateSampler rng(20240601);
  using Generator = std::function<std::optional<JacobianCase>()>;
  const std::vector<std::pair<std::string, Generator>> kinds = {
      {"M",
       [&]() -> std::optional<JacobianCase> {
         const auto& shape = shapes[rng.index(shapes.size())];
         const Pose2 prev = rng.pose();
         const Pose2 curr = retract(prev, Vec3(rng.uniform(-2e-3, 2e-3), rng.uniform(-2e-3, 2e-3),
                                               rng.uniform(-0.05, 0.05)));
         std::vector<FingerReading> fingers;
         const std::size_t count = 1 + rng.index(2);
         std::vector<Vec2> queries;
         for (std::size_t i = 0; i < count; ++i) {
           fingers.push_back(rng.finger(shape->polygon(), prev, radius));
           queries.push_back(fingers.back().position);
         }
         if (!away_from_switch(shape->polygon(), prev, queries)) return std::nullopt;
         return JacobianCase{Factor::motion(0, 1, fingers, shape, 0.01, cov3), {prev, curr}};
       }},
      {"C",
       [&]() -> std::optional<JacobianCase> {
         const auto& shape = shapes[rng.index(shapes.size())];
         const Pose2 x = rng.pose();
         const FingerReading f = rng.finger(shape->polygon(), x, radius);
         if (!away_from_switch(shape->polygon(), x, {sensed_contact_point(f, radius)})) {
           return std::nullopt;
         }
         return JacobianCase{Factor::contact(0, f, shape, radius, cov2), {x}};
       }},
      {"V",
       [&]() -> std::optional<JacobianCase> {
         const Pose2 x = rng.pose();
         return JacobianCase{Factor::visual(0, rng.pose(), cov3), {x}};
       }},
      {"S",
       [&]() -> std::optional<JacobianCase> {
         return JacobianCase{Factor::stationary(1, 0, cov3), {rng.pose(), rng.pose()}};
       }},
      {"S-anchor",
       [&]() -> std::optional<JacobianCase> {
         return JacobianCase{Factor::anchor(0, rng.pose(), cov3), {rng.pose()}};
       }},
  };

  bool pass = true;
  std::string detail;
  for (const auto& [name, make] : kinds) {
    int accepted = 0;
    int skipped = 0;
    double worst = 0.0;
    while (accepted < kJacobianSamples) {
      const auto c = make();
      if (!c) {
        ++skipped;
        continue;
      }
      const Eigen::MatrixXd ja = c->factor.jacobian(c->states);
      const Eigen::MatrixXd jn = c->factor.numeric_jacobian(c->states, kJacobianStep);
      const double rel = (ja - jn).norm() / std::max(jn.norm(), 1e-300);
      worst = std::max(worst, rel);
      ++accepted;
    }
    pass = pass && worst < kJacobianRelTol;
    detail += format("%s max rel err %.2e (%d states, %d near switches skipped); ", name.c_str(),
                     worst, accepted, skipped);
  }
  const double elapsed = seconds_since(t0);
  pass = pass && elapsed < kJacobianSeconds;
  report(1, pass, detail + format("runtime %.2f s", elapsed));
}

// ---------------------------------------------------------------- criterion 2

void criterion_simulator_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario s = Scenario::noiseless();
  const ShapeModel shape = make_shape(s);
  const SensorStreams streams = simulate_scenario(s);
  const auto& steps = streams.ground_truth.steps;

  double worst_motion = 0.0;
  double worst_contact = 0.0;
  double worst_contact_t = 0.0;
  std::size_t contact_steps = 0;
  std::size_t over_tol = 0;
  std::size_t projected = 0;
  for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
    projected += steps[k].projected ? 1 : 0;
    std::vector<FingerReading> touching;
    for (const auto& f : steps[k].fingers) {
      if (f.in_contact) touching.push_back({f.force_on_pusher, f.pusher.center, true});
    }
    if (touching.empty()) continue;
    ++contact_steps;
    const Wrench2 w = contact_wrench(steps[k].pose, touching, shape.polygon());
    const double m = motion_residual(steps[k].pose, steps[k + 1].pose, w, shape.c(),
                                     steps[k + 1].t - steps[k].t)
                         .norm();
    worst_motion = std::max(worst_motion, m);
    bool over = m >= kSimResidualTol;
    for (const auto& f : touching) {
      const double c = contact_residual(steps[k].pose, f, shape, s.pusher_radius).norm();
      if (c > worst_contact) {
        worst_contact = c;
        worst_contact_t = steps[k].t;
      }
      over = over || c >= kSimResidualTol;
    }
    over_tol += over ? 1 : 0;
  }
  const double elapsed = seconds_since(t0);
  const bool pass = worst_motion < kSimResidualTol && worst_contact < kSimResidualTol &&
                    elapsed < kSimSeconds;
  report(2, pass,
         format("%zu contact steps: max |M| %.2e, max |C| %.3e m (t=%.3f s), %zu steps over "
                "tolerance, %zu projections; runtime %.2f s",
                contact_steps, worst_motion, worst_contact, worst_contact_t, over_tol, projected,
                elapsed));
}

// ---------------------------------------------------------------- criterion 3

void criterion_recovery() {
  Scenario s = Scenario::noiseless();
  s.estimators = {Method::Smoother};
  s.window = WindowConfig{};
  const RunReport report_ = run_scenario(s);
  const TickRecord& last = report_.get(Method::Smoother).records.back();
  const Vec3 d = pose_diff(last.estimate, last.ground_truth);
  const double mm = 1e3 * d.head<2>().norm();
  const double deg = std::abs(d.z()) * kRad2Deg;
  report(3, mm < kRecoveryMm && deg < kRecoveryDeg,
         format("final error %.2e mm, %.2e deg at t=%.2f s", mm, deg, last.t));
}

// ------------------------------------------------------------ criteria 4 and 5

void criteria_fusion_and_smoothing() {
  RmseReport smoother, ekf, baseline;
  for (int k = 1; k <= kSeeds; ++k) {
    const RunReport r = run_scenario(Scenario::standard(static_cast<std::uint64_t>(k)));
    auto add = [](RmseReport& acc, const RmseReport& x) {
      acc.trans_rmse_mm += x.trans_rmse_mm / kSeeds;
      acc.rot_rmse_deg += x.rot_rmse_deg / kSeeds;
    };
    add(smoother, r.get(Method::Smoother).rmse);
    add(ekf, r.get(Method::Ekf).rmse);
    add(baseline, r.get(Method::Baseline).rmse);
  }
  report(4,
         smoother.trans_rmse_mm <= kFusionTransRatio * baseline.trans_rmse_mm &&
             smoother.rot_rmse_deg <= baseline.rot_rmse_deg,
         format("mean over %d seeds: smoother %.2f mm / %.2f deg, raw visual %.2f mm / %.2f deg "
                "(trans ratio %.3f)",
                kSeeds, smoother.trans_rmse_mm, smoother.rot_rmse_deg, baseline.trans_rmse_mm,
                baseline.rot_rmse_deg, smoother.trans_rmse_mm / baseline.trans_rmse_mm));
  report(5,
         smoother.rot_rmse_deg <= ekf.rot_rmse_deg &&
             smoother.trans_rmse_mm <= kSmoothingTransRatio * ekf.trans_rmse_mm,
         format("mean over %d seeds: smoother %.2f mm / %.2f deg, EKF %.2f mm / %.2f deg "
                "(trans ratio %.3f)",
                kSeeds, smoother.trans_rmse_mm, smoother.rot_rmse_deg, ekf.trans_rmse_mm,
                ekf.rot_rmse_deg, smoother.trans_rmse_mm / ekf.trans_rmse_mm));
}

// ---------------------------------------------------------------- criterion 6

void criterion_occlusion() {
  constexpr double occ_start = 3.0;
  constexpr double occ_end = 13.0;
  bool pass = true;
  double worst_ratio = 0.0;
  double sum_smoother = 0.0;
  double sum_baseline = 0.0;
  std::size_t min_contacts = 2;
  for (int k = 1; k <= kSeeds; ++k) {
    Scenario s = Scenario::standard(static_cast<std::uint64_t>(k));
    s.script = "long_push";
    s.occlusion = {{occ_start, occ_end}};
    s.occlusion_fraction.reset();
    s.estimators = {Method::Smoother, Method::Baseline};
    const RunReport r = run_scenario(s);
    // Last tick inside the blind interval.
    auto at_end = [&](Method m) {
      const auto& recs = r.get(m).records;
      const TickRecord* last = nullptr;
      for (const auto& rec : recs) {
        if (rec.t < occ_end) last = &rec;
        if (rec.t >= occ_start && rec.t < occ_end) min_contacts = std::min(min_contacts, rec.n_contacts);
      }
      return 1e3 * (last->estimate.translation() - last->ground_truth.translation()).norm();
    };
    const double es = at_end(Method::Smoother);
    const double eb = at_end(Method::Baseline);
    sum_smoother += es;
    sum_baseline += eb;
    worst_ratio = std::max(worst_ratio, es / eb);
    pass = pass && es <= kOcclusionRatio * eb;
  }
  pass = pass && min_contacts == 2;
  report(6, pass,
         format("10 s occlusion, %d seeds: mean error at occlusion end smoother %.2f mm vs raw "
                "visual %.1f mm; worst per-seed ratio %.4f; min contacts during occlusion %zu",
                kSeeds, sum_smoother / kSeeds, sum_baseline / kSeeds, worst_ratio, min_contacts));
}

// ---------------------------------------------------------------- criterion 7

void criterion_trim() {
  const Scenario s = Scenario::standard(3);
  const SensorStreams streams = simulate_scenario(s);
  std::vector<Tick> ticks = make_ticks(s, streams);
  ticks.resize(1000);
  const auto shape = std::make_shared<const ShapeModel>(make_shape(s));
  auto run = [&](const WindowConfig& w) {
    SmootherOptions opt;
    opt.window = w;
    opt.covariances = s.covariances;
    opt.pusher_radius = s.pusher_radius;
    Smoother sm(shape, opt);
    Pose2 last;
    for (const Tick& t : ticks) {
      sm.add_step(t.t, t.input.tactile, t.input.visual);
      last = sm.update();
    }
    return last;
  };
  const Pose2 trimmed = run(WindowConfig{});
  const Pose2 full = run(WindowConfig::unbounded(WindowConfig{}.relin_every));
  const Vec3 d = pose_diff(trimmed, full);
  const double mm = 1e3 * d.head<2>().norm();
  const double deg = std::abs(d.z()) * kRad2Deg;
  report(7, mm < kTrimMm && deg < kTrimDeg,
         format("1000 steps, window 200/300/100 vs untrimmed: final difference %.4f mm, %.5f deg",
                mm, deg));
}

// ---------------------------------------------------------------- criterion 8

void criterion_timing() {
  Scenario s = Scenario::standard(1);
  s.estimators = {Method::Smoother};
  s.window = WindowConfig{};
  const RunReport r = run_scenario(s);
  const TimingStats& t = r.get(Method::Smoother).timing;
  report(8, t.mean_ms < kMeanStepMs && t.max_ms < kMaxStepMs,
         format("window 200, %zu steps: mean %.3f ms, std %.3f ms, max %.3f ms",
                r.get(Method::Smoother).records.size(), t.mean_ms, t.std_ms, t.max_ms));
}

// ---------------------------------------------------------------- criterion 9

void criterion_noise_pipeline() {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal;
  const Vec3 sigma(2.0, 0.5, 0.01);
  const Eigen::Matrix3d truth = sigma.cwiseProduct(sigma).asDiagonal();
  std::vector<Eigen::VectorXd> samples;
  samples.reserve(100000);
  for (int i = 0; i < 100000; ++i) {
    samples.push_back(Vec3(sigma.x() * normal(rng), sigma.y() * normal(rng), sigma.z() * normal(rng)));
  }
  const Eigen::MatrixXd est = identify_covariance(samples);
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      worst = std::max(worst, std::abs(est(i, j) - truth(i, j)) / std::sqrt(truth(i, i) * truth(j, j)));
    }
  }

  std::vector<Eigen::VectorXd> gauss, uniform;
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    gauss.push_back(Eigen::VectorXd::Constant(1, 3.0 + 0.2 * normal(rng)));
    uniform.push_back(Eigen::VectorXd::Constant(1, uni(rng)));
  }
  const AxisNormality g = normality_report(gauss).front();
  const AxisNormality u = normality_report(uniform).front();
  report(9, worst < kCovarianceRelTol && g.ks_pass && !u.ks_pass,
         format("1e5 samples: worst relative covariance error %.4f; KS gaussian %.4f (band %.4f), "
                "uniform %.4f",
                worst, g.ks_statistic, g.ks_threshold, u.ks_statistic));
}

// --------------------------------------------------------------- criterion 10

void criterion_determinism() {
  auto csv = [](const Scenario& s) {
    std::ostringstream out;
    write_trajectory_csv(out, run_scenario(s), false);
    return out.str();
  };
  const Scenario s = Scenario::standard(7);
  const std::string a = csv(s);
  const std::string b = csv(s);

  // The smoother rows must not depend on which other estimators ran.
  Scenario only = s;
  only.estimators = {Method::Smoother};
  const std::string c = csv(only);
  const bool prefix = a.compare(0, c.size(), c) == 0;

  Scenario occ = s;
  occ.script = "long_push";
  occ.occlusion = {{3.0, 13.0}};
  const bool occ_same = csv(occ) == csv(occ);
  report(10, a == b && prefix && occ_same,
         format("stroke script rerun %s (%zu bytes), smoother-only rows %s, long push rerun %s",
                a == b ? "identical" : "differs", a.size(), prefix ? "identical" : "differ",
                occ_same ? "identical" : "differs"));
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<void()>>> criteria = {
      {1, criterion_jacobians},  {2, criterion_simulator_consistency},
      {3, criterion_recovery},   {4, criteria_fusion_and_smoothing},
      {6, criterion_occlusion},  {7, criterion_trim},
      {8, criterion_timing},     {9, criterion_noise_pipeline},
      {10, criterion_determinism}};
  for (const auto& [id, run] : criteria) {
    try {
      run();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
