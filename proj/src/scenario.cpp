#include "pushest/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace pushest {

namespace {

using nlohmann::json;

constexpr double kStandoff = 0.01;     // finger start distance from the object
constexpr double kRestStart = 1.0;     // camera-only warm-up
constexpr double kRestBetween = 0.5;   // fingers lifted between strokes
constexpr double kRestEnd = 3.0;

Vec2 vec2_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
Vec3 vec3_from(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index n) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  if (j.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("bad covariance size");
  for (Eigen::Index r = 0; r < n; ++r) {
    const json& row = j.at(static_cast<std::size_t>(r));
    if (row.is_number()) {
      m(r, r) = row.get<double>();  // flat list: diagonal
    } else {
      for (Eigen::Index c = 0; c < n; ++c) m(r, c) = row.at(static_cast<std::size_t>(c));
    }
  }
  return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

// Distance from the origin to the shape boundary's supporting line along dir.
double support(const Polygon& poly, const Vec2& dir) {
  double s = -std::numeric_limits<double>::infinity();
  for (const auto& v : poly.vertices()) s = std::max(s, v.dot(dir));
  return s;
}

struct StrokeSpec {
  Vec2 direction;               // object frame, unit
  std::vector<Vec2> contacts;   // nominal contact lines: lateral positions (object frame)
  double push_time;
};

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::Smoother: return "smoother";
    case Method::Ekf: return "ekf";
    case Method::Baseline: return "baseline";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "smoother") return Method::Smoother;
  if (name == "ekf") return Method::Ekf;
  if (name == "baseline") return Method::Baseline;
  throw std::invalid_argument("unknown estimator: " + name);
}

double surface_friction(const std::string& surface) {
  // Dynamic friction coefficients of the support materials.
  if (surface == "abs") return 0.16;
  if (surface == "delrin") return 0.15;
  if (surface == "plywood") return 0.28;
  if (surface == "pu") return 0.35;
  throw std::invalid_argument("unknown surface: " + surface);
}

ShapeModel make_shape(const Scenario& s) {
  Polygon poly = s.shape == "custom" ? center_polygon(Polygon(s.polygon)) : named_shape(s.shape);
  const double mass = s.mass ? *s.mass : named_shape_mass(s.shape == "custom" ? "rect1" : s.shape);
  const double mu_s = s.mu_surface ? *s.mu_surface : surface_friction(s.surface);
  return ShapeModel(std::move(poly), s.mu_pusher, mu_s, mass);
}

NoiseSpec Scenario::standard_noise() {
  NoiseSpec n;
  n.visual_bias = Vec3(0.008, 0.006, 0.0);  // 10 mm calibration offset
  return n;
}

Scenario Scenario::standard(std::uint64_t seed) {
  Scenario s;
  s.seed = seed;
  s.noise.seed = seed;
  s.covariances = Covariances::identified();
  return s;
}

Scenario Scenario::noiseless() {
  Scenario s;
  s.noise = NoiseSpec::zero();
  s.occlusion_fraction.reset();
  return s;
}

ScriptPlan make_script(const Scenario& s, const ShapeModel& shape) {
  const Polygon& poly = shape.polygon();
  const double r = s.pusher_radius;
  const double speed = s.pusher_speed;
  if (!(speed > 0.0)) throw std::invalid_argument("pusher speed must be positive");
  // Standoffs are whole simulator steps of approach so first contact falls on a
  // step boundary instead of part-way through a step.
  auto standoff = [&](double normal_speed) {
    const double per_step = normal_speed * s.sim_dt;
    return std::ceil(kStandoff / per_step - 1e-9) * per_step;
  };

  std::vector<StrokeSpec> strokes;
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  if (s.script == "strokes") {
    // (a)-(d) straight two-finger pushes, (e)(f) corner pushes, (g)(h) one finger.
    strokes = {
        {{1, 0}, {{0, -0.02}, {0, 0.02}}, 6.0},
        {{-1, 0}, {{0, 0.02}, {0, -0.02}}, 6.0},
        {{0, 1}, {{0.02, 0}, {-0.02, 0}}, 6.0},
        {{0, -1}, {{-0.02, 0}, {0.02, 0}}, 6.0},
        {{inv_sqrt2, inv_sqrt2}, {}, 6.0},
        {{-inv_sqrt2, -inv_sqrt2}, {}, 6.0},
        {{1, 0}, {{0, 0.015}}, 2.5},
        {{-1, 0}, {{0, 0.015}}, 2.5},
    };
  } else if (s.script == "long_push") {
    strokes = {{{1, 0}, {{0, -0.02}, {0, 0.02}}, 13.0}};
  } else {
    throw std::invalid_argument("unknown script: " + s.script);
  }

  ScriptPlan plan;
  plan.script.radius = r;
  auto rest = [&](double duration) {
    PushSegment seg;
    seg.duration = duration;
    seg.active = {false, false};
    plan.script.segments.push_back(seg);
    plan.duration += duration;
  };

  rest(kRestStart);
  for (std::size_t i = 0; i < strokes.size(); ++i) {
    const StrokeSpec& st = strokes[i];
    PushSegment seg;
    seg.frame = SegmentFrame::Object;
    seg.velocity = st.direction * speed;
    double approach_time = 0.0;
    if (st.contacts.empty()) {
      // Corner push: one finger on each of the two faces adjacent to the corner.
      const Vec2 ex = st.direction.x() > 0 ? Vec2(-1, 0) : Vec2(1, 0);
      const Vec2 ey = st.direction.y() > 0 ? Vec2(0, -1) : Vec2(0, 1);
      const double off = 0.02;
      const Vec2 lat_x = -ey * off;  // along the x face, towards the pushed corner
      const Vec2 lat_y = -ex * off;
      // Each finger closes its gap at speed / sqrt(2).
      const double gap = standoff(speed / std::numbers::sqrt2);
      seg.starts = {ex * (support(poly, ex) + r + gap) + lat_x,
                    ey * (support(poly, ey) + r + gap) + lat_y};
      approach_time = gap * std::numbers::sqrt2 / speed;
    } else {
      const Vec2 back = -st.direction;
      const double gap = standoff(speed);
      for (const Vec2& lateral : st.contacts) {
        seg.starts.push_back(lateral + back * (support(poly, back) + r + gap));
      }
      approach_time = gap / speed;
    }
    seg.active.assign(seg.starts.size(), true);
    seg.active.resize(2, false);
    seg.duration = approach_time + st.push_time;
    plan.strokes.emplace_back(plan.duration + approach_time, plan.duration + seg.duration);
    plan.script.segments.push_back(seg);
    plan.duration += seg.duration;
    rest(i + 1 < strokes.size() ? kRestBetween : kRestEnd);
  }
  return plan;
}

OcclusionSchedule make_occlusion(const Scenario& s, const ScriptPlan& plan) {
  if (!s.occlusion.empty()) return OcclusionSchedule(s.occlusion);
  if (!s.occlusion_fraction || *s.occlusion_fraction <= 0.0 || plan.strokes.empty()) {
    return OcclusionSchedule();
  }
  // Equal blind windows centred inside each stroke.
  const double each = *s.occlusion_fraction * plan.duration / static_cast<double>(plan.strokes.size());
  std::vector<std::pair<double, double>> intervals;
  for (const auto& [start, end] : plan.strokes) {
    const double len = std::min(each, end - start);
    const double mid = 0.5 * (start + end);
    intervals.emplace_back(mid - 0.5 * len, mid + 0.5 * len);
  }
  return OcclusionSchedule(std::move(intervals));
}

Scenario Scenario::from_json(const json& j) {
  Scenario s;
  if (j.contains("shape")) {
    const json& sh = j.at("shape");
    if (sh.is_string()) {
      s.shape = sh.get<std::string>();
    } else {
      s.shape = "custom";
      for (const auto& v : sh.at("polygon")) s.polygon.push_back(vec2_from(v));
      if (sh.contains("mass")) s.mass = sh.at("mass").get<double>();
    }
  }
  if (j.contains("mass")) s.mass = j.at("mass").get<double>();
  if (j.contains("surface")) s.surface = j.at("surface").get<std::string>();
  if (j.contains("mu_surface")) s.mu_surface = j.at("mu_surface").get<double>();
  s.mu_pusher = j.value("mu_pusher", s.mu_pusher);
  s.pusher_radius = j.value("pusher_radius", s.pusher_radius);
  s.pusher_speed = j.value("pusher_speed", s.pusher_speed);
  s.script = j.value("script", s.script);
  s.seed = j.value("seed", s.seed);
  s.noise.seed = s.seed;
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    if (n.contains("visual_sigma")) s.noise.visual_sigma = vec3_from(n.at("visual_sigma"));
    if (n.contains("visual_bias")) s.noise.visual_bias = vec3_from(n.at("visual_bias"));
    s.noise.force_sigma = n.value("force_sigma", s.noise.force_sigma);
    s.noise.finger_pos_sigma = n.value("finger_pos_sigma", s.noise.finger_pos_sigma);
    s.noise.tau = n.value("tau", s.noise.tau);
  }
  s.noise.validate();
  if (j.contains("occlusion")) {
    const json& o = j.at("occlusion");
    if (o.is_object()) {
      s.occlusion_fraction = o.at("fraction").get<double>();
    } else {
      s.occlusion_fraction.reset();
      for (const auto& iv : o) s.occlusion.emplace_back(iv.at(0).get<double>(), iv.at(1).get<double>());
      OcclusionSchedule check(s.occlusion);
    }
  }
  if (j.contains("estimators")) {
    s.estimators.clear();
    for (const auto& e : j.at("estimators")) s.estimators.push_back(parse_method(e));
  }
  if (j.contains("window")) {
    const json& w = j.at("window");
    if (w.contains("window_len") && !w.contains("trim_at")) {
      s.window = WindowConfig::with_length(w.at("window_len").get<std::size_t>());
    }
    s.window.window_len = w.value("window_len", s.window.window_len);
    s.window.trim_at = w.value("trim_at", s.window.trim_at);
    s.window.trim_count = w.value("trim_count", s.window.trim_count);
    s.window.relin_every = w.value("relin_every", s.window.relin_every);
    s.window.trimming = w.value("trimming", s.window.trimming);
  }
  s.window.validate();
  if (j.contains("solver")) {
    const json& sv = j.at("solver");
    s.solver.max_iters_per_update = sv.value("max_iters_per_update", s.solver.max_iters_per_update);
    s.solver.step_tolerance = sv.value("step_tolerance", s.solver.step_tolerance);
    s.solver.damping = sv.value("damping", s.solver.damping);
    s.solver.relin_translation = sv.value("relin_translation", s.solver.relin_translation);
    s.solver.relin_rotation = sv.value("relin_rotation", s.solver.relin_rotation);
  }
  if (j.contains("covariances")) s.covariances = covariances_from_json(j.at("covariances"), s.covariances);
  if (j.contains("factors")) {
    const json& f = j.at("factors");
    s.use.motion = f.value("motion", true);
    s.use.contact = f.value("contact", true);
    s.use.visual = f.value("visual", true);
    s.use.stationary = f.value("stationary", true);
  }
  s.sim_dt = j.value("sim_dt", s.sim_dt);
  s.visual_rate = j.value("visual_rate", s.visual_rate);
  s.tactile_rate = j.value("tactile_rate", s.tactile_rate);
  s.estimator_rate = j.value("estimator_rate", s.estimator_rate);
  return s;
}

Scenario Scenario::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open scenario file: " + file.string());
  return from_json(json::parse(in));
}

json Scenario::to_json() const {
  json j;
  if (shape == "custom") {
    json poly = json::array();
    for (const auto& v : polygon) poly.push_back({v.x(), v.y()});
    j["shape"] = {{"polygon", poly}};
  } else {
    j["shape"] = shape;
  }
  if (mass) j["mass"] = *mass;
  j["surface"] = surface;
  if (mu_surface) j["mu_surface"] = *mu_surface;
  j["mu_pusher"] = mu_pusher;
  j["pusher_radius"] = pusher_radius;
  j["pusher_speed"] = pusher_speed;
  j["script"] = script;
  j["seed"] = seed;
  j["noise"] = {{"visual_sigma", {noise.visual_sigma.x(), noise.visual_sigma.y(), noise.visual_sigma.z()}},
                {"visual_bias", {noise.visual_bias.x(), noise.visual_bias.y(), noise.visual_bias.z()}},
                {"force_sigma", noise.force_sigma},
                {"finger_pos_sigma", noise.finger_pos_sigma},
                {"tau", noise.tau}};
  if (!occlusion.empty()) {
    json o = json::array();
    for (const auto& [a, b] : occlusion) o.push_back({a, b});
    j["occlusion"] = o;
  } else if (occlusion_fraction) {
    j["occlusion"] = {{"fraction", *occlusion_fraction}};
  }
  json est = json::array();
  for (Method m : estimators) est.push_back(method_name(m));
  j["estimators"] = est;
  j["window"] = {{"window_len", window.window_len}, {"trim_at", window.trim_at},
                 {"trim_count", window.trim_count}, {"relin_every", window.relin_every},
                 {"trimming", window.trimming}};
  j["solver"] = {{"max_iters_per_update", solver.max_iters_per_update},
                 {"step_tolerance", solver.step_tolerance},
                 {"damping", solver.damping},
                 {"relin_translation", solver.relin_translation},
                 {"relin_rotation", solver.relin_rotation}};
  j["covariances"] = covariances_to_json(covariances);
  j["factors"] = {{"motion", use.motion}, {"contact", use.contact}, {"visual", use.visual},
                  {"stationary", use.stationary}};
  j["sim_dt"] = sim_dt;
  j["visual_rate"] = visual_rate;
  j["tactile_rate"] = tactile_rate;
  j["estimator_rate"] = estimator_rate;
  return j;
}

json covariances_to_json(const Covariances& c) {
  return {{"motion", matrix_to_json(c.motion)},
          {"contact", matrix_to_json(c.contact)},
          {"visual", matrix_to_json(c.visual)},
          {"stationary", matrix_to_json(c.stationary)}};
}

Covariances covariances_from_json(const json& j, const Covariances& fallback) {
  Covariances c = fallback;
  if (j.contains("motion")) c.motion = matrix_from(j.at("motion"), 3);
  if (j.contains("contact")) c.contact = matrix_from(j.at("contact"), 2);
  if (j.contains("visual")) c.visual = matrix_from(j.at("visual"), 3);
  if (j.contains("stationary")) c.stationary = matrix_from(j.at("stationary"), 3);
  return c;
}

}  // namespace pushest
