#pragma once

#include "pushest/factors.hpp"
#include "pushest/physics.hpp"
#include "pushest/sensors.hpp"
#include "pushest/smoother.hpp"
#include "pushest/stats.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pushest {

enum class Method { Smoother, Ekf, Baseline };

std::string method_name(Method m);
Method parse_method(const std::string& name);

/// Everything needed to reproduce one experiment. Loaded from a JSON document;
/// every field is optional and falls back to the defaults below.
struct Scenario {
  std::string shape = "rect1";              // rect1 | ellip2 | butter | custom
  std::vector<Vec2> polygon;                // custom shape outline, metres, CCW
  std::optional<double> mass;               // kg, defaults per named shape
  std::string surface = "plywood";          // abs | delrin | plywood | pu | custom
  std::optional<double> mu_surface;         // overrides the surface table
  double mu_pusher = 0.25;
  double pusher_radius = 0.003125;
  double pusher_speed = 0.06;
  std::string script = "strokes";           // strokes | long_push
  NoiseSpec noise = standard_noise();
  std::vector<std::pair<double, double>> occlusion;  // explicit intervals
  std::optional<double> occlusion_fraction = 0.3;    // spread over the pushing strokes
  std::uint64_t seed = 1;
  std::vector<Method> estimators = {Method::Smoother, Method::Ekf, Method::Baseline};
  WindowConfig window;
  SolverConfig solver;
  Covariances covariances = Covariances::defaults();
  FactorSwitches use;
  double sim_dt = 0.004;
  double visual_rate = 30.0;
  double tactile_rate = 250.0;
  double estimator_rate = 100.0;

  static Scenario from_json(const nlohmann::json& j);
  static Scenario load(const std::filesystem::path& file);
  nlohmann::json to_json() const;

  // Biased noisy camera, 30% occlusion. Same as the field defaults.
  static NoiseSpec standard_noise();
  // Default-noise scenario estimated with the identified covariances.
  static Scenario standard(std::uint64_t seed);
  // Zero-noise, fully visible variant of the standard scenario.
  static Scenario noiseless();
};

double surface_friction(const std::string& surface);
ShapeModel make_shape(const Scenario& s);

/// Pusher script plus the intervals in which the fingers are meant to push.
struct ScriptPlan {
  PusherScript script;
  std::vector<std::pair<double, double>> strokes;
  double duration = 0.0;
};

// "strokes": straight two-finger pushes on each side, two corner pushes and two
// one-finger pushes. "long_push": one long straight two-finger push.
ScriptPlan make_script(const Scenario& s, const ShapeModel& shape);
OcclusionSchedule make_occlusion(const Scenario& s, const ScriptPlan& plan);

struct SensorStreams {
  Trajectory ground_truth;
  std::vector<VisualSample> visual;
  std::vector<TactileSample> tactile;
};

SensorStreams simulate_scenario(const Scenario& s);

/// Sensor data associated with one estimator tick.
struct Tick {
  double t = 0.0;
  Pose2 ground_truth;
  StepInput input;  // latest tactile sample, camera frame received since the last tick
};

std::vector<Tick> make_ticks(const Scenario& s, const SensorStreams& streams);

struct TickRecord {
  double t = 0.0;
  Pose2 ground_truth;
  Pose2 estimate;
  std::size_t n_contacts = 0;
  bool visual_available = false;
  double step_ms = 0.0;
};

struct TimingStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double max_ms = 0.0;
};

TimingStats timing_stats(const std::vector<double>& samples_ms);

struct MethodRun {
  Method method = Method::Smoother;
  std::vector<TickRecord> records;
  RmseReport rmse;
  TimingStats timing;
};

struct RunReport {
  std::vector<MethodRun> runs;

  const MethodRun& get(Method m) const;
};

RunReport run_estimators(const Scenario& s, const SensorStreams& streams);
RunReport run_scenario(const Scenario& s);

/// One residual component evaluated at the ground-truth poses.
struct ResidualRecord {
  double t = 0.0;
  FactorKind kind = FactorKind::Visual;
  int component = 0;
  double value = 0.0;
};

std::vector<ResidualRecord> ground_truth_residuals(const Scenario& s, const SensorStreams& streams);

// Groups residual records per factor kind into vectors.
std::vector<Eigen::VectorXd> residual_vectors(const std::vector<ResidualRecord>& records,
                                              FactorKind kind);

// Covariances identified from ground-truth residuals.
Covariances identify_covariances(const std::vector<ResidualRecord>& records);

nlohmann::json covariances_to_json(const Covariances& c);
Covariances covariances_from_json(const nlohmann::json& j, const Covariances& fallback);

// CSV writers/readers. Numbers are printed with a fixed format so identical
// inputs give identical bytes. step_ms is only written when with_timing is set.
void write_trajectory_csv(std::ostream& out, const RunReport& report, bool with_timing);
void write_residual_csv(std::ostream& out, const std::vector<ResidualRecord>& records);
void write_streams(const std::filesystem::path& dir, const SensorStreams& streams);
SensorStreams read_streams(const std::filesystem::path& dir);

}  // namespace pushest
