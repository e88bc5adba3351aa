#pragma once

#include "asyncmic/types.hpp"

#include <cstdint>
#include <span>

namespace asyncmic::model {

// Arrival time with the full clock model: (1 + drift)(range/c + offset + t_j).
double toa_exact(const MicrophoneState& mic, int event, const EventTrajectory& traj,
                 const PhysicalConstants& consts);

// Arrival time with the drift acting only on the emission time:
// range/c + offset + (1 + drift) t_j. All measurement models derive from this.
double toa_simplified(const MicrophoneState& mic, int event, const EventTrajectory& traj,
                      const PhysicalConstants& consts);

// Inter-event TDOA on one channel between events `pair` and `pair + 1`.
double tdoa_s_model(const MicrophoneState& mic, int pair, const EventTrajectory& traj,
                    const PhysicalConstants& consts);

// Inter-microphone TDOA of one event, `mic` against the reference microphone.
double tdoa_m_model(const MicrophoneState& mic, const MicrophoneState& reference, int event,
                    const EventTrajectory& traj, const PhysicalConstants& consts);

// Displacement between events `pair` and `pair + 1`.
Vec3 odometry_model(const EventTrajectory& traj, int pair);

struct NoiseLevels {
  double sigma_tdoa = 0.0;  // s, shared by TDOA-S and TDOA-M
  double sigma_odo = 0.0;   // m, per axis
};

// Noiseless stacked models for every block.
MeasurementSet noiseless_measurements(std::span<const MicrophoneState> mics,
                                      const EventTrajectory& traj,
                                      const PhysicalConstants& consts);

// Noiseless models plus i.i.d. zero-mean Gaussian noise. Deterministic for a
// fixed seed. The returned set records the generating SDs.
MeasurementSet simulate_measurements(std::span<const MicrophoneState> mics,
                                     const EventTrajectory& traj,
                                     const PhysicalConstants& consts, NoiseLevels noise,
                                     std::uint64_t seed);

}  // namespace asyncmic::model
