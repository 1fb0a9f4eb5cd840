#include "pushest/stats.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pushest {

namespace {

// Asymptotic Kolmogorov-Smirnov critical value at the 1% level.
constexpr double kKs99 = 1.6276;

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

RmseReport rmse(const std::vector<Pose2>& est, const std::vector<Pose2>& gt) {
  if (est.size() != gt.size()) throw std::invalid_argument("rmse: length mismatch");
  if (est.empty()) throw std::invalid_argument("rmse: empty trajectories");
  std::vector<double> trans, rot;
  trans.reserve(est.size());
  rot.reserve(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Vec3 d = pose_diff(est[i], gt[i]);
    trans.push_back(1e3 * d.head<2>().norm());
    rot.push_back(std::abs(d.z()) * 180.0 / std::numbers::pi);
  }
  auto rms = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
  };
  RmseReport r;
  r.trans_rmse_mm = rms(trans);
  r.rot_rmse_deg = rms(rot);
  r.trans_std_mm = population_std(trans, mean_of(trans));
  r.rot_std_deg = population_std(rot, mean_of(rot));
  return r;
}

Eigen::MatrixXd identify_covariance(const std::vector<Eigen::VectorXd>& residuals) {
  if (residuals.empty()) throw std::invalid_argument("identify_covariance: no samples");
  const Eigen::Index k = residuals.front().size();
  if (residuals.size() < static_cast<std::size_t>(k) + 1) {
    throw std::invalid_argument("identify_covariance: need at least k + 1 samples");
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
  for (const auto& r : residuals) {
    if (r.size() != k) throw std::invalid_argument("identify_covariance: dimension mismatch");
    mean += r;
  }
  mean /= static_cast<double>(residuals.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
  for (const auto& r : residuals) {
    const Eigen::VectorXd d = r - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(residuals.size() - 1);
  return 0.5 * (cov + cov.transpose());
}

std::vector<AxisNormality> normality_report(const std::vector<Eigen::VectorXd>& residuals,
                                            std::size_t bins) {
  if (residuals.size() < 30) throw std::invalid_argument("normality_report: need >= 30 samples");
  if (bins == 0) throw std::invalid_argument("normality_report: bins must be positive");
  const Eigen::Index k = residuals.front().size();
  const auto n = residuals.size();
  std::vector<AxisNormality> out(static_cast<std::size_t>(k));

  for (Eigen::Index axis = 0; axis < k; ++axis) {
    AxisNormality& a = out[static_cast<std::size_t>(axis)];
    std::vector<double> v;
    v.reserve(n);
    for (const auto& r : residuals) v.push_back(r(axis));
    std::sort(v.begin(), v.end());

    a.mean = mean_of(v);
    a.stddev = population_std(v, a.mean);
    a.degenerate = !(a.stddev > 0.0);

    const double lo = v.front();
    const double hi = a.degenerate ? v.front() + 1.0 : v.back();
    a.bin_edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) {
      a.bin_edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
    }
    a.counts.assign(bins, 0);
    for (double x : v) {
      auto b = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
      ++a.counts[std::min(b, bins - 1)];
    }

    a.ks_threshold = kKs99 / std::sqrt(static_cast<double>(n));
    if (a.degenerate) {
      a.ks_statistic = 1.0;
      a.ks_pass = false;
      continue;
    }
    const boost::math::normal_distribution<double> fit(a.mean, a.stddev);
    a.qq.reserve(n);
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      a.qq.emplace_back(boost::math::quantile(fit, p), v[i]);
      const double cdf = boost::math::cdf(fit, v[i]);
      d = std::max({d, static_cast<double>(i + 1) / static_cast<double>(n) - cdf,
                    cdf - static_cast<double>(i) / static_cast<double>(n)});
    }
    a.ks_statistic = d;
    a.ks_pass = d <= a.ks_threshold;
  }
  return out;
}

}  // namespace pushest
