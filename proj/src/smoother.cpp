#include "pushest/smoother.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pushest {

void WindowConfig::validate() const {
  if (relin_every == 0) throw std::invalid_argument("relin_every must be positive");
  if (!trimming) return;
  if (trim_at != window_len + trim_count) {
    throw std::invalid_argument("trim_at must equal window_len + trim_count");
  }
  if (trim_count == 0 || trim_count % relin_every != 0) {
    throw std::invalid_argument("relin_every must divide trim_count");
  }
}

WindowConfig WindowConfig::with_length(std::size_t len) {
  if (len == 0) throw std::invalid_argument("window length must be positive");
  // Default layout keeps len nodes, trims len/2 at a time and relinearizes at each trim.
  WindowConfig w;
  w.window_len = len;
  w.trim_count = std::max<std::size_t>(1, len / 2);
  w.trim_at = w.window_len + w.trim_count;
  w.relin_every = w.trim_count;
  return w;
}

WindowConfig WindowConfig::unbounded(std::size_t relin_every) {
  WindowConfig w;
  w.trimming = false;
  w.relin_every = relin_every;
  return w;
}

Smoother::Smoother(std::shared_ptr<const ShapeModel> shape, SmootherOptions options)
    : shape_(std::move(shape)), options_(std::move(options)) {
  if (!shape_) throw std::invalid_argument("smoother needs a shape model");
  options_.window.validate();
  if (options_.solver.max_iters_per_update < 1) {
    throw std::invalid_argument("max_iters_per_update must be at least 1");
  }
}

std::size_t Smoother::index_of(NodeId id) const {
  if (nodes_.empty() || id < nodes_.front().id || id > nodes_.back().id) {
    throw std::out_of_range("node is not in the window");
  }
  return static_cast<std::size_t>(id - nodes_.front().id);
}

NodeId Smoother::newest_id() const {
  if (nodes_.empty()) throw std::logic_error("smoother window is empty");
  return nodes_.back().id;
}

Pose2 Smoother::estimate() const { return estimate_of(newest_id()); }

const Pose2& Smoother::estimate_of(NodeId id) const { return nodes_[index_of(id)].estimate; }

void Smoother::set_estimate(NodeId id, const Pose2& pose) { nodes_[index_of(id)].estimate = pose; }

std::size_t Smoother::factor_count(FactorKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      factors_.begin(), factors_.end(), [kind](const Entry& e) { return e.factor.kind() == kind; }));
}

std::vector<Factor> Smoother::factors() const {
  std::vector<Factor> out;
  out.reserve(factors_.size());
  for (const auto& e : factors_) out.push_back(e.factor);
  return out;
}

void Smoother::add_step(double t, const TactileSample& tactile,
                        const std::optional<VisualSample>& visual) {
  if (!nodes_.empty() && !(t > nodes_.back().t)) {
    throw std::invalid_argument("add_step: timestamps must be strictly increasing");
  }
  const bool has_visual = visual.has_value() && visual->available;
  const bool has_prev = !nodes_.empty();
  Pose2 init = options_.initial_pose;
  if (has_prev) {
    init = nodes_.back().estimate;
  } else if (has_visual) {
    init = visual->pose;
  }
  const NodeId id = next_id_++;
  const Covariances& cov = options_.covariances;
  const FactorSwitches& use = options_.use;

  if (has_prev) {
    const Node& prev = nodes_.back();
    if (use.stationary) factors_.push_back({Factor::stationary(id, prev.id, cov.stationary)});
    if (use.motion && previous_tactile_) {
      std::vector<FingerReading> touching;
      for (const auto& f : previous_tactile_->fingers) {
        if (f.contact) touching.push_back(f);
      }
      if (!touching.empty()) {
        factors_.push_back(
            {Factor::motion(prev.id, id, std::move(touching), shape_, t - prev.t, cov.motion)});
      }
    }
  }
  nodes_.push_back({id, t, init});
  if (use.visual && has_visual) factors_.push_back({Factor::visual(id, visual->pose, cov.visual)});
  if (use.contact) {
    for (const auto& f : tactile.fingers) {
      if (f.contact) {
        factors_.push_back(
            {Factor::contact(id, f, shape_, options_.pusher_radius, cov.contact)});
      }
    }
  }
  previous_tactile_ = tactile;
  ++steps_;

  const WindowConfig& w = options_.window;
  if (w.trimming && nodes_.size() >= w.trim_at) trim(w.trim_count);
}

void Smoother::trim(std::size_t count) {
  if (count == 0) return;
  if (count >= nodes_.size()) throw std::invalid_argument("trim: count must be below node count");
  const NodeId first_kept = nodes_[count].id;
  std::erase_if(factors_, [first_kept](const Entry& e) {
    return std::any_of(e.factor.nodes().begin(), e.factor.nodes().end(),
                       [first_kept](NodeId n) { return n < first_kept; });
  });
  nodes_.erase(nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(count));
  const Node& oldest = nodes_.front();
  factors_.push_back(
      {Factor::anchor(oldest.id, oldest.estimate, options_.covariances.stationary)});
  force_relinearize_ = true;
}

std::vector<Pose2> Smoother::states_for(const Factor& f, const std::vector<Pose2>& poses) const {
  std::vector<Pose2> s;
  s.reserve(f.nodes().size());
  for (NodeId id : f.nodes()) s.push_back(poses[index_of(id)]);
  return s;
}

double Smoother::cost_at(const std::vector<Pose2>& poses) const {
  double c = 0.0;
  for (const auto& e : factors_) c += e.factor.cost(states_for(e.factor, poses));
  return c;
}

double Smoother::total_cost() const {
  std::vector<Pose2> poses;
  poses.reserve(nodes_.size());
  for (const auto& n : nodes_) poses.push_back(n.estimate);
  return cost_at(poses);
}

void Smoother::linearize(Entry& e, const std::vector<Pose2>& poses) const {
  e.linearization_point = states_for(e.factor, poses);
  e.whitened_jacobian = e.factor.whitener() * e.factor.jacobian(e.linearization_point);
  e.linearized = true;
}

bool Smoother::stale(const Entry& e, const std::vector<Pose2>& poses) const {
  const SolverConfig& sc = options_.solver;
  for (std::size_t k = 0; k < e.factor.nodes().size(); ++k) {
    const Vec3 d = pose_diff(poses[index_of(e.factor.nodes()[k])], e.linearization_point[k]);
    if (d.head<2>().cwiseAbs().maxCoeff() > sc.relin_translation ||
        std::abs(d.z()) > sc.relin_rotation) {
      return true;
    }
  }
  return false;
}

double Smoother::iterate(bool relinearize, UpdateStats& stats) {
  std::vector<Pose2> poses;
  poses.reserve(nodes_.size());
  for (const auto& n : nodes_) poses.push_back(n.estimate);

  // Every factor touches one node or two consecutive nodes, so the normal
  // equations are block tridiagonal: diag[i] = H(i,i), upper[i] = H(i,i+1).
  const std::size_t n = nodes_.size();
  std::vector<Mat3> diag(n, Mat3::Zero());
  std::vector<Mat3> upper(n > 0 ? n - 1 : 0, Mat3::Zero());
  std::vector<Vec3> gradient(n, Vec3::Zero());
  double cost0 = 0.0;

  for (Entry& e : factors_) {
    if (relinearize || !e.linearized || stale(e, poses)) linearize(e, poses);
    const Eigen::VectorXd r = e.factor.whitener() * e.factor.residual(states_for(e.factor, poses));
    cost0 += r.squaredNorm();
    const Eigen::MatrixXd& j = e.whitened_jacobian;
    const auto& ids = e.factor.nodes();
    const std::size_t i0 = index_of(ids[0]);
    const auto j0 = j.leftCols<3>();
    diag[i0] += j0.transpose() * j0;
    gradient[i0] += j0.transpose() * r;
    if (ids.size() == 2) {
      const std::size_t i1 = index_of(ids[1]);
      const auto j1 = j.middleCols<3>(3);
      diag[i1] += j1.transpose() * j1;
      gradient[i1] += j1.transpose() * r;
      if (i1 == i0 + 1) {
        upper[i0] += j0.transpose() * j1;
      } else if (i0 == i1 + 1) {
        upper[i1] += j1.transpose() * j0;
      } else {
        throw std::logic_error("factor connects non-adjacent nodes");
      }
    }
  }

  // Block LDL^T by forward elimination; returns false on a (near) singular pivot.
  std::vector<Eigen::LDLT<Mat3>> pivots(n);
  std::vector<Mat3> couplings(n);
  auto solve = [&](double lambda, std::vector<Vec3>& delta) {
    std::vector<Vec3> rhs(n);
    double max_pivot = 0.0;
    double min_pivot = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      Mat3 s = diag[i];
      s.diagonal().array() += lambda;
      rhs[i] = -gradient[i];
      if (i > 0) {
        s -= upper[i - 1].transpose() * couplings[i - 1];
        rhs[i] -= upper[i - 1].transpose() * rhs[i - 1];
      }
      pivots[i].compute(s);
      const Vec3 d = pivots[i].vectorD();
      max_pivot = std::max(max_pivot, d.cwiseAbs().maxCoeff());
      min_pivot = std::min(min_pivot, d.minCoeff());
      if (i + 1 < n) couplings[i] = pivots[i].solve(upper[i]);
      rhs[i] = pivots[i].solve(rhs[i]);
    }
    if (!(max_pivot > 0.0) || !(min_pivot > 1e-12 * max_pivot)) return false;
    delta.assign(n, Vec3::Zero());
    for (std::size_t i = n; i-- > 0;) {
      delta[i] = rhs[i];
      if (i + 1 < n) delta[i] -= couplings[i] * delta[i + 1];
    }
    return true;
  };

  std::vector<Vec3> delta;
  if (!solve(0.0, delta)) throw UnderdeterminedError("smoother system is underdetermined");

  double mean_diag = 0.0;
  for (const Mat3& d : diag) mean_diag += d.trace();
  mean_diag /= static_cast<double>(3 * n);

  double lambda = options_.solver.damping;
  for (int attempt = 0; attempt <= options_.solver.damping_retries; ++attempt) {
    if (lambda > 0.0 && !solve(lambda, delta)) break;
    std::vector<Pose2> candidate = poses;
    double norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      candidate[i] = retract(candidate[i], delta[i]);
      norm2 += delta[i].squaredNorm();
    }
    const double cost1 = cost_at(candidate);
    if (cost1 <= cost0) {
      for (std::size_t i = 0; i < n; ++i) nodes_[i].estimate = candidate[i];
      return std::sqrt(norm2);
    }
    ++stats.rejected;
    lambda = lambda > 0.0 ? 10.0 * lambda : 1e-4 * mean_diag;
  }
  return 0.0;
}

Pose2 Smoother::update() {
  if (nodes_.empty()) throw std::logic_error("update: no nodes in the window");
  UpdateStats stats;
  stats.relinearized = force_relinearize_ || steps_ % options_.window.relin_every == 0;
  stats.cost_before = total_cost();
  for (int it = 0; it < options_.solver.max_iters_per_update; ++it) {
    const double step = iterate(stats.relinearized, stats);
    ++stats.iterations;
    if (step < options_.solver.step_tolerance) break;
  }
  force_relinearize_ = false;
  stats.cost_after = total_cost();
  last_update_ = stats;
  return estimate();
}

int Smoother::optimize(int max_iters, double step_tolerance) {
  UpdateStats stats;
  stats.relinearized = true;
  stats.cost_before = total_cost();
  int it = 0;
  while (it < max_iters) {
    const double step = iterate(true, stats);
    ++it;
    if (step < step_tolerance) break;
  }
  stats.iterations = it;
  stats.cost_after = total_cost();
  last_update_ = stats;
  force_relinearize_ = false;
  return it;
}

std::vector<Pose2> batch_solve(std::shared_ptr<const ShapeModel> shape,
                               const std::vector<StepInput>& steps, SmootherOptions options,
                               double step_tolerance, int max_iters) {
  options.window = WindowConfig::unbounded(1);
  Smoother smoother(std::move(shape), options);
  // Raw camera poses are too far from the contact constraints to start from, so
  // each prefix is solved once to seed the next node.
  for (const StepInput& s : steps) {
    smoother.add_step(s.t, s.tactile, s.visual);
    smoother.optimize(options.solver.max_iters_per_update, step_tolerance);
  }
  smoother.optimize(max_iters, step_tolerance);
  std::vector<Pose2> out;
  out.reserve(smoother.node_count());
  for (const auto& n : smoother.nodes()) out.push_back(n.estimate);
  return out;
}

}  // namespace pushest
