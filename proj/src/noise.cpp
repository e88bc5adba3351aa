#include "asyncmic/noise.hpp"

#include "asyncmic/errors.hpp"

#include <cmath>
#include <limits>

namespace asyncmic::noise {
namespace {

void check_inputs(std::span<const MicrophoneState> mics, const EventTrajectory& traj) {
  traj.validate();
  if (mics.size() < 2) throw DimensionError("at least 2 microphones are required");
}

// Residuals at the rounding level of the operands are reported as exact zeros.
double snap(double residual, double magnitude) {
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * magnitude;
  return std::abs(residual) <= floor ? 0.0 : residual;
}

}  // namespace

SigmaSEstimate estimate_sigma_s(const MeasurementSet& measurements,
                                std::span<const MicrophoneState> truth_mics,
                                const EventTrajectory& truth_traj,
                                const PhysicalConstants& consts) {
  check_inputs(truth_mics, truth_traj);
  const int n = static_cast<int>(truth_mics.size());
  const int k = truth_traj.event_count();
  if (!measurements.has_tdoa_s()) throw MissingBlockError("missing tdoa_s block");
  measurements.validate_shape(n, k);

  const auto& s = truth_traj.positions;
  const auto& dt = truth_traj.intervals;
  double dt_sum = 0.0;
  for (double v : dt) dt_sum += v;
  if (!(dt_sum > 0.0)) throw DimensionError("emission intervals sum to zero");

  SigmaSEstimate out;
  out.drift_hat.resize(n);
  double ss = 0.0;
  std::vector<double> reduced(k - 1);
  std::vector<double> magnitude(k - 1);
  for (int i = 0; i < n; ++i) {
    const Vec3& x = truth_mics[i].position;
    double sum = 0.0;
    for (int j = 0; j + 1 < k; ++j) {
      const double range_diff = ((x - s[j + 1]).norm() - (x - s[j]).norm()) / consts.sound_speed;
      reduced[j] = measurements.tdoa_s(i, j) - range_diff - dt[j];
      magnitude[j] = std::abs(measurements.tdoa_s(i, j)) + std::abs(range_diff) + dt[j];
      sum += reduced[j];
    }
    const double drift = sum / dt_sum;
    out.drift_hat[i] = drift;
    for (int j = 0; j + 1 < k; ++j) ss += std::pow(snap(reduced[j] - drift * dt[j], magnitude[j]), 2);
  }
  out.sample_count = n * (k - 1);
  out.degrees_of_freedom = out.sample_count - n;
  out.sigma_s = out.degrees_of_freedom > 0 ? std::sqrt(ss / out.degrees_of_freedom) : 0.0;
  return out;
}

SigmaMEstimate estimate_sigma_m(const MeasurementSet& measurements,
                                std::span<const MicrophoneState> truth_mics,
                                const EventTrajectory& truth_traj,
                                const PhysicalConstants& consts) {
  check_inputs(truth_mics, truth_traj);
  const int n = static_cast<int>(truth_mics.size());
  const int k = truth_traj.event_count();
  if (!measurements.has_tdoa_m()) throw MissingBlockError("missing tdoa_m block");
  measurements.validate_shape(n, k);

  const auto& s = truth_traj.positions;
  const auto t = truth_traj.emission_times();

  // Rows [1, t_j]; the normal matrix is shared by every microphone.
  MatX design(k, 2);
  for (int j = 0; j < k; ++j) design.row(j) << 1.0, t[j];
  const Eigen::Matrix2d normal = design.transpose() * design;
  if (std::abs(normal.determinant()) <= 1e-12 * normal.squaredNorm()) {
    throw DimensionError("emission times are identical; offset and drift are not separable");
  }
  const Eigen::Matrix2d normal_inv = normal.inverse();

  SigmaMEstimate out;
  double ss = 0.0;
  VecX b(k);
  VecX magnitude(k);
  for (int i = 1; i < n; ++i) {
    const Vec3& x = truth_mics[i].position;
    const Vec3& x0 = truth_mics[0].position;
    for (int j = 0; j < k; ++j) {
      const double range_diff = ((x - s[j]).norm() - (x0 - s[j]).norm()) / consts.sound_speed;
      b(j) = measurements.tdoa_m(i - 1, j) - range_diff;
      magnitude(j) = std::abs(measurements.tdoa_m(i - 1, j)) + std::abs(range_diff);
    }
    const Eigen::Vector2d fit = normal_inv * (design.transpose() * b);
    out.offset_hat.push_back(fit(0));
    out.drift_hat.push_back(fit(1));
    const VecX e = b - design * fit;
    for (int j = 0; j < k; ++j) {
      const double m = magnitude(j) + std::abs(fit(0)) + std::abs(fit(1) * t[j]);
      ss += std::pow(snap(e(j), m), 2);
    }
  }
  out.sample_count = (n - 1) * k;
  out.degrees_of_freedom = out.sample_count - 2 * (n - 1);
  out.sigma_m = out.degrees_of_freedom > 0 ? std::sqrt(ss / out.degrees_of_freedom) : 0.0;
  return out;
}

NoiseEstimate estimate_noise(const MeasurementSet& measurements,
                             std::span<const MicrophoneState> truth_mics,
                             const EventTrajectory& truth_traj, const PhysicalConstants& consts) {
  return {estimate_sigma_s(measurements, truth_mics, truth_traj, consts),
          estimate_sigma_m(measurements, truth_mics, truth_traj, consts)};
}

std::vector<char> classify_noise_case(double sigma_s, double sigma_m) {
  auto both_in = [&](double lo, double hi) {
    return sigma_s > lo && sigma_s < hi && sigma_m > lo && sigma_m < hi;
  };
  std::vector<char> labels;
  if (sigma_s < 1e-4 && sigma_m < 1e-4) labels.push_back('A');
  if (both_in(1e-4, 1.5e-4)) labels.push_back('B');
  if (both_in(1.5e-4, 5e-4)) labels.push_back('C');
  if (std::abs(sigma_s - sigma_m) < 1e-5) labels.push_back('D');
  labels.push_back('E');
  return labels;
}

std::string case_labels(const std::vector<char>& labels) {
  return std::string(labels.begin(), labels.end());
}

}  // namespace asyncmic::noise
