#pragma once

#include "pushest/geom2d.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace pushest {

/// Error summary in the units of the result tables: millimetres and degrees.
struct RmseReport {
  double trans_rmse_mm = 0.0;
  double trans_std_mm = 0.0;
  double rot_rmse_deg = 0.0;
  double rot_std_deg = 0.0;
};

// Throws std::invalid_argument on a length mismatch or empty input.
RmseReport rmse(const std::vector<Pose2>& est, const std::vector<Pose2>& gt);

// Unbiased sample covariance. Needs at least k + 1 samples of k-vectors.
Eigen::MatrixXd identify_covariance(const std::vector<Eigen::VectorXd>& residuals);

struct AxisNormality {
  std::vector<double> bin_edges;   // bins + 1 edges
  std::vector<std::size_t> counts;
  double mean = 0.0;
  double stddev = 0.0;   // maximum-likelihood (1/n)
  bool degenerate = false;  // zero variance
  // (theoretical quantile of the fitted Gaussian, sorted sample)
  std::vector<std::pair<double, double>> qq;
  double ks_statistic = 0.0;
  double ks_threshold = 0.0;  // 99% band
  bool ks_pass = false;
};

// Per-axis histogram, Gaussian fit, QQ pairs and a Kolmogorov-Smirnov check
// against the fitted Gaussian. Needs at least 30 samples.
std::vector<AxisNormality> normality_report(const std::vector<Eigen::VectorXd>& residuals,
                                            std::size_t bins = 30);

}  // namespace pushest
