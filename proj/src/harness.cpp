#include "pushest/ekf.hpp"
#include "pushest/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pushest {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(split_csv(line));
  }
  return rows;
}

double to_double(const std::string& s) { return std::stod(s); }

std::vector<FingerReading> touching(const TactileSample& s) {
  std::vector<FingerReading> out;
  for (const auto& f : s.fingers) {
    if (f.contact) out.push_back(f);
  }
  return out;
}

void push_vector(std::vector<ResidualRecord>& out, double t, FactorKind kind,
                 const Eigen::VectorXd& r) {
  for (Eigen::Index i = 0; i < r.size(); ++i) out.push_back({t, kind, static_cast<int>(i), r(i)});
}

}  // namespace

const MethodRun& RunReport::get(Method m) const {
  for (const auto& r : runs) {
    if (r.method == m) return r;
  }
  throw std::invalid_argument("method not in report: " + method_name(m));
}

SensorStreams simulate_scenario(const Scenario& s) {
  const ShapeModel shape = make_shape(s);
  const ScriptPlan plan = make_script(s, shape);
  NoiseSpec noise = s.noise;
  noise.seed = s.seed;
  SensorStreams out;
  out.ground_truth = simulate_push(shape, plan.script, Pose2(), s.sim_dt);
  out.visual = render_visual(out.ground_truth, noise, make_occlusion(s, plan), s.visual_rate);
  out.tactile = render_tactile(out.ground_truth, noise, s.tactile_rate);
  return out;
}

std::vector<Tick> make_ticks(const Scenario& s, const SensorStreams& streams) {
  if (!(s.estimator_rate > 0.0)) throw std::invalid_argument("estimator rate must be positive");
  if (streams.tactile.empty()) throw std::invalid_argument("no tactile samples");
  const double duration = streams.ground_truth.duration();
  const auto count = static_cast<std::size_t>(std::floor(duration * s.estimator_rate + 1e-9)) + 1;

  std::vector<Tick> ticks;
  ticks.reserve(count);
  std::size_t tac = 0;
  std::size_t vis = 0;
  std::int64_t prev_us = std::numeric_limits<std::int64_t>::min();
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) / s.estimator_rate;
    const std::int64_t t_us = to_micros(t);
    while (tac + 1 < streams.tactile.size() && to_micros(streams.tactile[tac + 1].t) <= t_us) ++tac;

    Tick tick;
    tick.t = t;
    tick.ground_truth = streams.ground_truth.pose_at(t);
    tick.input.t = t;
    tick.input.tactile = streams.tactile[tac];
    // Latest camera frame received in (previous tick, this tick].
    while (vis < streams.visual.size() && to_micros(streams.visual[vis].t) <= t_us) {
      if (to_micros(streams.visual[vis].t) > prev_us) tick.input.visual = streams.visual[vis];
      ++vis;
    }
    prev_us = t_us;
    ticks.push_back(std::move(tick));
  }
  return ticks;
}

TimingStats timing_stats(const std::vector<double>& samples_ms) {
  TimingStats t;
  if (samples_ms.empty()) return t;
  double sum = 0.0;
  for (double v : samples_ms) {
    sum += v;
    t.max_ms = std::max(t.max_ms, v);
  }
  t.mean_ms = sum / static_cast<double>(samples_ms.size());
  double sq = 0.0;
  for (double v : samples_ms) sq += (v - t.mean_ms) * (v - t.mean_ms);
  t.std_ms = std::sqrt(sq / static_cast<double>(samples_ms.size()));
  return t;
}

RunReport run_estimators(const Scenario& s, const SensorStreams& streams) {
  using Clock = std::chrono::steady_clock;
  const auto shape = std::make_shared<const ShapeModel>(make_shape(s));
  std::vector<Tick> ticks = make_ticks(s, streams);

  // Estimation starts with the first camera frame.
  auto first = std::find_if(ticks.begin(), ticks.end(), [](const Tick& t) {
    return t.input.visual && t.input.visual->available;
  });
  if (first == ticks.end()) throw std::invalid_argument("no visual sample available");
  ticks.erase(ticks.begin(), first);
  const Pose2 initial = ticks.front().input.visual->pose;

  auto base_record = [](const Tick& tick) {
    TickRecord r;
    r.t = tick.t;
    r.ground_truth = tick.ground_truth;
    r.n_contacts = tick.input.tactile.contact_count();
    r.visual_available = tick.input.visual && tick.input.visual->available;
    return r;
  };
  auto finish = [&](MethodRun& run, const std::vector<double>& ms) {
    std::vector<Pose2> est, gt;
    for (const auto& r : run.records) {
      est.push_back(r.estimate);
      gt.push_back(r.ground_truth);
    }
    run.rmse = rmse(est, gt);
    run.timing = timing_stats(ms);
  };

  RunReport report;
  for (Method m : s.estimators) {
    MethodRun run;
    run.method = m;
    std::vector<double> ms;
    ms.reserve(ticks.size());
    if (m == Method::Smoother) {
      SmootherOptions opt;
      opt.window = s.window;
      opt.solver = s.solver;
      opt.covariances = s.covariances;
      opt.use = s.use;
      opt.pusher_radius = s.pusher_radius;
      opt.initial_pose = initial;
      Smoother smoother(shape, opt);
      for (const Tick& tick : ticks) {
        TickRecord r = base_record(tick);
        const auto t0 = Clock::now();
        smoother.add_step(tick.t, tick.input.tactile, tick.input.visual);
        r.estimate = smoother.update();
        r.step_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        ms.push_back(r.step_ms);
        run.records.push_back(r);
      }
    } else if (m == Method::Ekf) {
      Ekf ekf(shape, s.covariances, s.pusher_radius, GaussianBelief{initial, s.covariances.visual});
      const double dt = 1.0 / s.estimator_rate;
      for (const Tick& tick : ticks) {
        TickRecord r = base_record(tick);
        const auto t0 = Clock::now();
        r.estimate = ekf.step(tick.input.tactile, tick.input.visual, dt).mean;
        r.step_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        ms.push_back(r.step_ms);
        run.records.push_back(r);
      }
    } else {
      std::vector<double> times;
      for (const Tick& tick : ticks) times.push_back(tick.t);
      const auto t0 = Clock::now();
      const auto out = raw_visual_baseline(streams.visual, times);
      const double per_step = std::chrono::duration<double, std::milli>(Clock::now() - t0).count() /
                              static_cast<double>(ticks.size());
      for (std::size_t i = 0; i < ticks.size(); ++i) {
        TickRecord r = base_record(ticks[i]);
        r.estimate = out[i].pose;
        r.step_ms = per_step;
        ms.push_back(per_step);
        run.records.push_back(r);
      }
    }
    finish(run, ms);
    report.runs.push_back(std::move(run));
  }
  return report;
}

RunReport run_scenario(const Scenario& s) { return run_estimators(s, simulate_scenario(s)); }

std::vector<ResidualRecord> ground_truth_residuals(const Scenario& s, const SensorStreams& streams) {
  const auto shape = std::make_shared<const ShapeModel>(make_shape(s));
  const std::vector<Tick> ticks = make_ticks(s, streams);
  std::vector<ResidualRecord> out;
  for (std::size_t i = 0; i < ticks.size(); ++i) {
    const Tick& tick = ticks[i];
    const Pose2 x = tick.ground_truth;
    if (tick.input.visual && tick.input.visual->available) {
      push_vector(out, tick.t, FactorKind::Visual, visual_residual(x, tick.input.visual->pose));
    }
    for (const auto& f : touching(tick.input.tactile)) {
      push_vector(out, tick.t, FactorKind::Contact, contact_residual(x, f, *shape, s.pusher_radius));
    }
    if (i == 0) continue;
    const Tick& prev = ticks[i - 1];
    const auto fingers = touching(prev.input.tactile);
    if (!fingers.empty()) {
      const Wrench2 w = contact_wrench(prev.ground_truth, fingers, shape->polygon());
      push_vector(out, tick.t, FactorKind::Motion,
                  motion_residual(prev.ground_truth, x, w, shape->c(), tick.t - prev.t));
    }
    push_vector(out, tick.t, FactorKind::Stationary, prior_residual(x, prev.ground_truth));
  }
  return out;
}

std::vector<Eigen::VectorXd> residual_vectors(const std::vector<ResidualRecord>& records,
                                              FactorKind kind) {
  std::vector<Eigen::VectorXd> out;
  std::vector<double> current;
  auto flush = [&] {
    if (current.empty()) return;
    out.push_back(Eigen::Map<const Eigen::VectorXd>(current.data(),
                                                    static_cast<Eigen::Index>(current.size())));
    current.clear();
  };
  for (const auto& r : records) {
    if (r.kind != kind) continue;
    if (r.component == 0) flush();
    current.push_back(r.value);
  }
  flush();
  return out;
}

Covariances identify_covariances(const std::vector<ResidualRecord>& records) {
  Covariances c = Covariances::defaults();
  c.motion = identify_covariance(residual_vectors(records, FactorKind::Motion));
  c.contact = identify_covariance(residual_vectors(records, FactorKind::Contact));
  c.visual = identify_covariance(residual_vectors(records, FactorKind::Visual));
  c.stationary = identify_covariance(residual_vectors(records, FactorKind::Stationary));
  return c;
}

void write_trajectory_csv(std::ostream& out, const RunReport& report, bool with_timing) {
  out << "t,gt_x,gt_y,gt_theta,est_x,est_y,est_theta,method,n_contacts,visual_available,step_ms\n";
  for (const auto& run : report.runs) {
    const std::string name = method_name(run.method);
    for (const auto& r : run.records) {
      out << fmt(r.t) << ',' << fmt(r.ground_truth.x()) << ',' << fmt(r.ground_truth.y()) << ','
          << fmt(r.ground_truth.theta()) << ',' << fmt(r.estimate.x()) << ','
          << fmt(r.estimate.y()) << ',' << fmt(r.estimate.theta()) << ',' << name << ','
          << r.n_contacts << ',' << (r.visual_available ? 1 : 0) << ','
          << fmt(with_timing ? r.step_ms : 0.0) << '\n';
    }
  }
}

void write_residual_csv(std::ostream& out, const std::vector<ResidualRecord>& records) {
  out << "t,kind,component_index,value\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << fmt(r.t) << ',' << kind_letter(r.kind) << ',' << r.component << ',' << buf << '\n';
  }
}

void write_streams(const std::filesystem::path& dir, const SensorStreams& streams) {
  std::filesystem::create_directories(dir);
  char buf[64];
  auto g = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  {
    std::ofstream out(dir / "ground_truth.csv");
    out << "t,x,y,theta,n_contacts\n";
    for (const auto& st : streams.ground_truth.steps) {
      std::size_t n = 0;
      for (const auto& f : st.fingers) n += f.in_contact ? 1 : 0;
      out << g(st.t) << ',' << g(st.pose.x()) << ',' << g(st.pose.y()) << ',' << g(st.pose.theta())
          << ',' << n << '\n';
    }
  }
  {
    std::ofstream out(dir / "visual.csv");
    out << "t,x,y,theta,available\n";
    for (const auto& v : streams.visual) {
      out << g(v.t) << ',' << g(v.pose.x()) << ',' << g(v.pose.y()) << ',' << g(v.pose.theta())
          << ',' << (v.available ? 1 : 0) << '\n';
    }
  }
  {
    std::ofstream out(dir / "tactile.csv");
    out << "t,finger,fx,fy,px,py,contact\n";
    for (const auto& s : streams.tactile) {
      for (std::size_t i = 0; i < s.fingers.size(); ++i) {
        const auto& f = s.fingers[i];
        out << g(s.t) << ',' << i << ',' << g(f.force.x()) << ',' << g(f.force.y()) << ','
            << g(f.position.x()) << ',' << g(f.position.y()) << ',' << (f.contact ? 1 : 0) << '\n';
      }
    }
  }
}

SensorStreams read_streams(const std::filesystem::path& dir) {
  SensorStreams s;
  for (const auto& row : read_csv(dir / "ground_truth.csv")) {
    SimStep st;
    st.t = to_double(row.at(0));
    st.pose = Pose2(to_double(row.at(1)), to_double(row.at(2)), to_double(row.at(3)));
    s.ground_truth.steps.push_back(st);
  }
  if (s.ground_truth.steps.size() >= 2) {
    s.ground_truth.dt = s.ground_truth.steps[1].t - s.ground_truth.steps[0].t;
  }
  for (const auto& row : read_csv(dir / "visual.csv")) {
    VisualSample v;
    v.t = to_double(row.at(0));
    v.pose = Pose2(to_double(row.at(1)), to_double(row.at(2)), to_double(row.at(3)));
    v.available = row.at(4) == "1";
    s.visual.push_back(v);
  }
  for (const auto& row : read_csv(dir / "tactile.csv")) {
    const double t = to_double(row.at(0));
    if (s.tactile.empty() || to_micros(s.tactile.back().t) != to_micros(t)) {
      s.tactile.push_back(TactileSample{t, {}});
    }
    FingerReading f;
    f.force = Vec2(to_double(row.at(2)), to_double(row.at(3)));
    f.position = Vec2(to_double(row.at(4)), to_double(row.at(5)));
    f.contact = row.at(6) == "1";
    s.tactile.back().fingers.push_back(f);
  }
  return s;
}

}  // namespace pushest
