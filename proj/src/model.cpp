#include "asyncmic/model.hpp"

#include "asyncmic/errors.hpp"

#include <cmath>
#include <random>
#include <string>

namespace asyncmic {

std::string_view to_string(Mode mode) {
  return mode == Mode::hybrid ? "hybrid" : "tdoa-m-only";
}

Mode mode_from_string(std::string_view text) {
  if (text == "hybrid") return Mode::hybrid;
  if (text == "tdoa-m-only" || text == "tdoa_m_only") return Mode::tdoa_m_only;
  throw SchemaError("unknown mode '" + std::string(text) + "' (expected hybrid or tdoa-m-only)");
}

void MicrophoneState::validate() const {
  if (!position.allFinite() || !std::isfinite(offset) || !std::isfinite(drift)) {
    throw DimensionError("microphone state has non-finite entries");
  }
  if (std::abs(drift) > kMaxDriftMagnitude) {
    throw DimensionError("microphone drift " + std::to_string(drift) + " exceeds sanity bound");
  }
}

double EventTrajectory::emission_time(int event) const {
  if (event < 0 || event >= event_count()) {
    throw DimensionError("event index " + std::to_string(event) + " out of range");
  }
  double t = 0.0;
  for (int k = 0; k < event; ++k) t += intervals[k];
  return t;
}

std::vector<double> EventTrajectory::emission_times() const {
  std::vector<double> times(positions.size(), 0.0);
  for (std::size_t j = 1; j < positions.size(); ++j) times[j] = times[j - 1] + intervals[j - 1];
  return times;
}

void EventTrajectory::validate() const {
  if (event_count() < 4) {
    throw DimensionError("trajectory needs at least 4 events, got " + std::to_string(event_count()));
  }
  if (intervals.size() + 1 != positions.size()) {
    throw DimensionError("trajectory has " + std::to_string(positions.size()) + " events but " +
                         std::to_string(intervals.size()) + " intervals");
  }
  for (const auto& p : positions) {
    if (!p.allFinite()) throw DimensionError("non-finite event position");
  }
  for (double dt : intervals) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DimensionError("emission intervals must be positive");
  }
}

void PhysicalConstants::validate() const {
  if (!(sound_speed > 0.0) || !std::isfinite(sound_speed)) {
    throw DimensionError("sound speed must be positive");
  }
}

void MeasurementSet::validate_shape(int mic_count, int event_count) const {
  auto check = [](const MatX& m, long rows, long cols, const char* name) {
    if (m.size() == 0) return;
    if (m.rows() != rows || m.cols() != cols) {
      throw DimensionError(std::string(name) + " block is " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                           std::to_string(cols));
    }
  };
  check(tdoa_s, mic_count, event_count - 1, "tdoa_s");
  check(tdoa_m, mic_count - 1, event_count, "tdoa_m");
  check(odometry, event_count - 1, 3, "odometry");
}

namespace model {
namespace {

void check_event(const EventTrajectory& traj, int event) {
  if (event < 0 || event >= traj.event_count()) {
    throw DimensionError("event index " + std::to_string(event) + " out of range");
  }
}

void check_pair(const EventTrajectory& traj, int pair) {
  if (pair < 0 || pair + 1 >= traj.event_count()) {
    throw DimensionError("event pair index " + std::to_string(pair) + " out of range");
  }
}

}  // namespace

double toa_exact(const MicrophoneState& mic, int event, const EventTrajectory& traj,
                 const PhysicalConstants& consts) {
  check_event(traj, event);
  const double range = (mic.position - traj.positions[event]).norm();
  return (1.0 + mic.drift) * (range / consts.sound_speed + mic.offset + traj.emission_time(event));
}

double toa_simplified(const MicrophoneState& mic, int event, const EventTrajectory& traj,
                      const PhysicalConstants& consts) {
  check_event(traj, event);
  const double range = (mic.position - traj.positions[event]).norm();
  return range / consts.sound_speed + mic.offset + (1.0 + mic.drift) * traj.emission_time(event);
}

double tdoa_s_model(const MicrophoneState& mic, int pair, const EventTrajectory& traj,
                    const PhysicalConstants& consts) {
  check_pair(traj, pair);
  const double next = (mic.position - traj.positions[pair + 1]).norm();
  const double curr = (mic.position - traj.positions[pair]).norm();
  return (next - curr) / consts.sound_speed + (1.0 + mic.drift) * traj.intervals[pair];
}

double tdoa_m_model(const MicrophoneState& mic, const MicrophoneState& reference, int event,
                    const EventTrajectory& traj, const PhysicalConstants& consts) {
  check_event(traj, event);
  const Vec3& s = traj.positions[event];
  const double range_diff = (mic.position - s).norm() - (reference.position - s).norm();
  return range_diff / consts.sound_speed + (mic.offset - reference.offset) +
         (mic.drift - reference.drift) * traj.emission_time(event);
}

Vec3 odometry_model(const EventTrajectory& traj, int pair) {
  check_pair(traj, pair);
  return traj.positions[pair + 1] - traj.positions[pair];
}

MeasurementSet noiseless_measurements(std::span<const MicrophoneState> mics,
                                      const EventTrajectory& traj,
                                      const PhysicalConstants& consts) {
  const int n = static_cast<int>(mics.size());
  const int k = traj.event_count();
  if (n < 2) throw DimensionError("at least 2 microphones are required");
  traj.validate();
  consts.validate();

  MeasurementSet out;
  out.tdoa_s.resize(n, k - 1);
  out.tdoa_m.resize(n - 1, k);
  out.odometry.resize(k - 1, 3);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j + 1 < k; ++j) out.tdoa_s(i, j) = tdoa_s_model(mics[i], j, traj, consts);
  }
  for (int i = 1; i < n; ++i) {
    for (int j = 0; j < k; ++j) out.tdoa_m(i - 1, j) = tdoa_m_model(mics[i], mics[0], j, traj, consts);
  }
  for (int j = 0; j + 1 < k; ++j) out.odometry.row(j) = odometry_model(traj, j).transpose();
  return out;
}

MeasurementSet simulate_measurements(std::span<const MicrophoneState> mics,
                                     const EventTrajectory& traj,
                                     const PhysicalConstants& consts, NoiseLevels noise,
                                     std::uint64_t seed) {
  if (noise.sigma_tdoa < 0.0 || noise.sigma_odo < 0.0) {
    throw DimensionError("noise standard deviations must be nonnegative");
  }
  MeasurementSet out = noiseless_measurements(mics, traj, consts);
  out.sigma_tdoa = noise.sigma_tdoa;
  out.sigma_odo = noise.sigma_odo;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  // Fixed draw order: TDOA-S row-major, TDOA-M row-major, odometry row-major.
  auto perturb = [&](MatX& block, double sd) {
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
      for (Eigen::Index c = 0; c < block.cols(); ++c) {
        const double z = unit(rng);
        if (sd > 0.0) block(r, c) += sd * z;
      }
    }
  };
  perturb(out.tdoa_s, noise.sigma_tdoa);
  perturb(out.tdoa_m, noise.sigma_tdoa);
  perturb(out.odometry, noise.sigma_odo);
  return out;
}

}  // namespace model
}  // namespace asyncmic
