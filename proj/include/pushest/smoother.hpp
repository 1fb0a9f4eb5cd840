#pragma once

#include "pushest/factors.hpp"
#include "pushest/geom2d.hpp"
#include "pushest/physics.hpp"
#include "pushest/sensors.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pushest {

/// Sliding-window bookkeeping. With trimming enabled, `trim_count` of the oldest
/// nodes are dropped whenever the window reaches `trim_at` nodes.
struct WindowConfig {
  std::size_t window_len = 200;
  std::size_t trim_at = 300;
  std::size_t trim_count = 100;
  std::size_t relin_every = 100;
  bool trimming = true;

  void validate() const;
  // Window of `len` retained steps using the default trim/relinearization ratios.
  static WindowConfig with_length(std::size_t len);
  static WindowConfig unbounded(std::size_t relin_every = 100);
};

struct SolverConfig {
  int max_iters_per_update = 3;
  double step_tolerance = 1e-9;
  double damping = 0.0;  // initial Levenberg lambda; 0 is plain Gauss-Newton
  int damping_retries = 3;
  // A cached factor linearization is refreshed once one of its nodes has moved
  // further than this from the linearization point.
  double relin_translation = 1e-4;
  double relin_rotation = 1e-3;
};

// Which cost terms are instantiated.
struct FactorSwitches {
  bool motion = true;
  bool contact = true;
  bool visual = true;
  bool stationary = true;
};

struct SmootherOptions {
  WindowConfig window;
  SolverConfig solver;
  Covariances covariances = Covariances::defaults();
  FactorSwitches use;
  double pusher_radius = 0.003125;
  Pose2 initial_pose;  // used when the first step has no visual sample
};

class UnderdeterminedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-update diagnostics.
struct UpdateStats {
  int iterations = 0;
  int rejected = 0;
  bool relinearized = false;
  double cost_before = 0.0;
  double cost_after = 0.0;
};

/// Sliding-window factor-graph smoother over planar object poses.
///
/// Each estimation step adds one pose node together with its stationary prior,
/// visual, contact and motion factors. update() runs damped Gauss-Newton over
/// the whole window. Factor Jacobians are cached between steps and refreshed
/// every `relin_every` steps and after every trim; residuals are always
/// evaluated at the current estimates.
class Smoother {
 public:
  struct Node {
    NodeId id;
    double t;
    Pose2 estimate;
  };

  Smoother(std::shared_ptr<const ShapeModel> shape, SmootherOptions options);

  // Throws std::invalid_argument when t is not strictly increasing.
  void add_step(double t, const TactileSample& tactile, const std::optional<VisualSample>& visual);

  // Returns the newest estimate. Throws UnderdeterminedError on a singular system.
  Pose2 update();

  // Drops the oldest `count` nodes and their factors, then anchors the oldest
  // survivor at its current estimate.
  void trim(std::size_t count);

  // Iterates to convergence with a fresh linearization every iteration.
  int optimize(int max_iters, double step_tolerance);

  Pose2 estimate() const;
  const Pose2& estimate_of(NodeId id) const;
  void set_estimate(NodeId id, const Pose2& pose);

  const std::deque<Node>& nodes() const { return nodes_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t factor_count() const { return factors_.size(); }
  std::size_t factor_count(FactorKind kind) const;
  std::vector<Factor> factors() const;
  NodeId newest_id() const;

  double total_cost() const;
  const UpdateStats& last_update() const { return last_update_; }
  const SmootherOptions& options() const { return options_; }

 private:
  struct Entry {
    Entry(Factor f) : factor(std::move(f)) {}

    Factor factor;
    bool linearized = false;
    Eigen::MatrixXd whitened_jacobian;
    std::vector<Pose2> linearization_point;
  };

  std::size_t index_of(NodeId id) const;
  std::vector<Pose2> states_for(const Factor& f, const std::vector<Pose2>& poses) const;
  double cost_at(const std::vector<Pose2>& poses) const;
  void linearize(Entry& e, const std::vector<Pose2>& poses) const;
  bool stale(const Entry& e, const std::vector<Pose2>& poses) const;
  // One damped Gauss-Newton step; returns the accepted step norm (0 if rejected).
  double iterate(bool relinearize, UpdateStats& stats);

  std::shared_ptr<const ShapeModel> shape_;
  SmootherOptions options_;
  std::deque<Node> nodes_;
  std::vector<Entry> factors_;
  std::optional<TactileSample> previous_tactile_;
  NodeId next_id_ = 0;
  std::size_t steps_ = 0;
  bool force_relinearize_ = false;
  UpdateStats last_update_;
};

struct StepInput {
  double t = 0.0;
  TactileSample tactile;
  std::optional<VisualSample> visual;
};

// Full nonlinear least squares over every step (no trimming), iterated until the
// step norm drops below `step_tolerance`. Each node is seeded from a full solve
// of the steps before it.
std::vector<Pose2> batch_solve(std::shared_ptr<const ShapeModel> shape,
                               const std::vector<StepInput>& steps, SmootherOptions options,
                               double step_tolerance = 1e-10, int max_iters = 200);

}  // namespace pushest
