#include "pushest/factors.hpp"

#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

using namespace pushest;
using doctest::Approx;

namespace {

constexpr double kRadius = 0.003125;

std::shared_ptr<const ShapeModel> square() {
  return std::make_shared<const ShapeModel>(named_shape("rect1"), 0.25, 0.28, 0.837);
}

// Finger touching the -x face of the square at the origin, pushed back along -x.
FingerReading left_finger() { return {Vec2(-1.0, 0.0), Vec2(-0.045 - kRadius, 0.0), true}; }

double max_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST_CASE("motion residual examples") {
  // Twist (1,0,0) from a 1 s pure x translation, wrench (0,1,0), c = 1.
  const Vec3 r = motion_residual(Pose2(), Pose2(1, 0, 0), {0, 1, 0}, 1.0, 1.0);
  CHECK((r - Vec3(0, 0, 1)).norm() < 1e-15);
  CHECK(motion_residual(Pose2(), Pose2(), {0, 0, 0}, 0.05, 0.01).norm() == 0.0);

  // Parallel twist and limit-surface direction, in the previous pose frame.
  const double c = 0.04;
  const Wrench2 w{0.3, -0.2, 0.001};
  const Pose2 prev(0.1, 0.2, 0.7);
  const double k = 0.01;
  const Vec2 t = prev.translation() + prev.rotation() * Vec2(k * c * c * w.fx, k * c * c * w.fy);
  const Pose2 curr(t.x(), t.y(), prev.theta() + k * w.m);
  CHECK(motion_residual(prev, curr, w, c, 0.01).norm() < 1e-15);
}

TEST_CASE("contact residual examples") {
  const auto sq = square();
  const FingerReading f = left_finger();
  CHECK((sensed_contact_point(f, kRadius) - Vec2(-0.045, 0.0)).norm() < 1e-15);
  CHECK(contact_residual(Pose2(), f, *sq, kRadius).norm() < 1e-15);

  // Object moved 5 mm along the contact normal, away from B.
  const Vec2 r = contact_residual(Pose2(0.005, 0.0, 0.0), f, *sq, kRadius);
  CHECK(std::abs(r.x()) == Approx(0.005).epsilon(1e-12));
  CHECK(std::abs(r.y()) < 1e-15);

  FingerReading zero = f;
  zero.force.setZero();
  CHECK_THROWS_AS(contact_residual(Pose2(), zero, *sq, kRadius), std::invalid_argument);
}

TEST_CASE("contact residual vanishes on noiseless frictionless-direction pushes") {
  const auto sq = square();
  PusherScript script;
  PushSegment seg;
  seg.frame = SegmentFrame::Object;
  seg.starts = {Vec2(-0.045 - kRadius - 0.0024, 0.0)};
  seg.velocity = Vec2(0.06, 0.0);
  seg.duration = 1.0;
  seg.active = {true};
  script.segments = {seg};
  const Trajectory traj = simulate_push(*sq, script, Pose2(0.02, -0.01, 0.4), 0.004);
  int checked = 0;
  for (const auto& st : traj.steps) {
    for (const auto& rec : st.fingers) {
      if (!rec.in_contact) continue;
      const FingerReading f{rec.force_on_pusher, rec.pusher.center, true};
      CHECK(contact_residual(st.pose, f, *sq, kRadius).norm() < 1e-8);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("visual and prior residual examples") {
  CHECK(visual_residual(Pose2(1, 2, 0.3), Pose2(1, 2, 0.3)).norm() == 0.0);
  CHECK(visual_residual(Pose2(0, 0, 3.0), Pose2(0, 0, -3.0)).z() == Approx(-0.28319).epsilon(1e-4));
  CHECK((visual_residual(Pose2(0.01, 0, 0), Pose2()) - Vec3(0.01, 0, 0)).norm() < 1e-15);

  CHECK(prior_residual(Pose2(1, 1, 1), Pose2(1, 1, 1)).norm() == 0.0);
  CHECK((prior_residual(Pose2(0.001, 0, 0.01), Pose2()) - Vec3(0.001, 0, 0.01)).norm() < 1e-15);
  CHECK(prior_residual(Pose2(0, 0, 3.1), Pose2(0, 0, -3.1)).z() ==
        Approx(6.2 - 2 * std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("linear factor Jacobians") {
  const Mat3 cov = Mat3::Identity() * 1e-4;
  const std::vector<Pose2> one = {Pose2(0.3, -0.2, 2.9)};
  const Factor v = Factor::visual(0, Pose2(0.1, 0.1, -3.0), cov);
  CHECK((v.jacobian(one) - Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);

  const std::vector<Pose2> two = {Pose2(0.3, -0.2, 2.9), Pose2(0.1, 0.0, -3.1)};
  const Factor s = Factor::stationary(1, 0, cov);
  const Eigen::MatrixXd j = s.jacobian(two);
  CHECK((j.leftCols(3) - Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);
  CHECK((j.rightCols(3) + Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);
}

TEST_CASE("nonlinear factor Jacobians match central differences") {
  const auto sq = square();
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> pos(-0.01, 0.01);
  std::uniform_real_distribution<double> ang(-0.3, 0.3);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Pose2 x(pos(rng), pos(rng), ang(rng));
    // Finger near the -x face with a force roughly along the inward normal.
    const Vec2 p(-0.045 - kRadius + pos(rng) * 0.2, 0.02 * unit(rng));
    const FingerReading f{Vec2(-1.0, 0.2 * unit(rng)), p, true};
    const std::vector<Pose2> one = {x};
    const Factor c = Factor::contact(0, f, sq, kRadius, Mat2::Identity() * 1e-6);
    CHECK(max_rel_err(c.jacobian(one), c.numeric_jacobian(one)) < 1e-5);

    const Pose2 next(x.x() + pos(rng) * 0.1, x.y() + pos(rng) * 0.1, x.theta() + ang(rng) * 0.01);
    const std::vector<Pose2> two = {x, next};
    const Factor m = Factor::motion(0, 1, {f}, sq, 0.01, Mat3::Identity() * 1e-9);
    CHECK(max_rel_err(m.jacobian(two), m.numeric_jacobian(two)) < 1e-5);
  }
}

TEST_CASE("factor dimensions, whitening and cost") {
  const auto sq = square();
  const Mat3 cov = Vec3(1e-4, 4e-4, 2.7e-3).asDiagonal();
  const Factor v = Factor::visual(3, Pose2(0.01, 0.02, 0.03), cov);
  CHECK(v.dim() == 3);
  CHECK(v.kind() == FactorKind::Visual);
  CHECK(kind_letter(v.kind()) == 'V');
  const Eigen::MatrixXd& w = v.whitener();
  CHECK((w.transpose() * w - Eigen::MatrixXd(cov.inverse())).norm() < 1e-6 * cov.inverse().norm());

  const std::vector<Pose2> one = {Pose2()};
  const Eigen::VectorXd e = v.residual(one);
  CHECK(v.cost(one) == Approx(mahalanobis_squared(e, cov)).epsilon(1e-12));
  CHECK(v.cost(one) == Approx(1.0 + 1.0 + 0.03 * 0.03 / 2.7e-3).epsilon(1e-12));

  CHECK(Factor::contact(0, left_finger(), sq, kRadius, Mat2::Identity()).dim() == 2);
  CHECK(Factor::stationary(1, 0, cov).dim() == 3);
  CHECK(Factor::anchor(0, Pose2(), cov).is_anchor());
  CHECK_FALSE(Factor::stationary(1, 0, cov).is_anchor());

  Mat3 asym = cov;
  asym(0, 1) = 1e-3;
  CHECK_THROWS_AS(Factor::visual(0, Pose2(), asym), std::invalid_argument);
  CHECK_THROWS_AS(Factor::motion(0, 1, {left_finger()}, sq, 0.0, cov), std::invalid_argument);
}

TEST_CASE("default covariances are symmetric positive definite") {
  for (const Covariances& c : {Covariances::defaults(), Covariances::identified()}) {
    CHECK(Eigen::LLT<Mat3>(c.motion).info() == Eigen::Success);
    CHECK(Eigen::LLT<Mat2>(c.contact).info() == Eigen::Success);
    CHECK(Eigen::LLT<Mat3>(c.visual).info() == Eigen::Success);
    CHECK(Eigen::LLT<Mat3>(c.stationary).info() == Eigen::Success);
  }
  const Covariances d = Covariances::defaults();
  CHECK(d.visual(0, 0) == Approx(1e-4));
  CHECK(d.contact(0, 0) == Approx(4e-6));
  CHECK(d.stationary(2, 2) == Approx(std::pow(0.3 * std::numbers::pi / 180.0, 2)));
}
