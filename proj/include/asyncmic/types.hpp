#pragma once

// Domain types shared by every module.
//
// Index convention: microphones and sound events are 0-based in code.
// Microphone 0 is the TDOA-M reference channel; event 0 is emitted at t = 0.

#include <Eigen/Dense>

#include <cstddef>
#include <string_view>
#include <vector>

namespace asyncmic {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kDefaultSoundSpeed = 343.0;  // m/s
inline constexpr double kMaxDriftMagnitude = 1e-2;

enum class Mode { hybrid, tdoa_m_only };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view text);

struct MicrophoneState {
  Vec3 position = Vec3::Zero();  // m
  double offset = 0.0;           // s, start-time shift of this channel
  double drift = 0.0;            // dimensionless clock scale error

  // Throws DimensionError on non-finite values or |drift| above the sanity bound.
  void validate() const;
};

struct EventTrajectory {
  std::vector<Vec3> positions;   // s_j, m
  std::vector<double> intervals; // emission gaps between consecutive events, s

  int event_count() const { return static_cast<int>(positions.size()); }

  // t_0 = 0, t_j = sum of the first j intervals.
  double emission_time(int event) const;
  std::vector<double> emission_times() const;

  // Requires at least 4 events, K-1 strictly positive intervals.
  void validate() const;
};

struct PhysicalConstants {
  double sound_speed = kDefaultSoundSpeed;  // m/s

  void validate() const;
};

// Stacked measurements for one (N, K) problem. Empty blocks are allowed in
// files (e.g. audio extraction without odometry); consumers check what they need.
struct MeasurementSet {
  MatX tdoa_s;    // N x (K-1), s
  MatX tdoa_m;    // (N-1) x K, s; row r is microphone r+1 against microphone 0
  MatX odometry;  // (K-1) x 3, m
  double sigma_tdoa = 0.0;  // s
  double sigma_odo = 0.0;   // m

  bool has_tdoa_s() const { return tdoa_s.size() > 0; }
  bool has_tdoa_m() const { return tdoa_m.size() > 0; }
  bool has_odometry() const { return odometry.size() > 0; }

  // Throws DimensionError when a present block disagrees with (N, K).
  void validate_shape(int mic_count, int event_count) const;
};

}  // namespace asyncmic
