#pragma once

// TDOA noise-level estimation against known ground-truth geometry, and the
// threshold predicates used to partition recorded datasets by noise level.

#include "asyncmic/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace asyncmic::noise {

struct SigmaSEstimate {
  double sigma_s = 0.0;              // s
  std::vector<double> drift_hat;     // per microphone, absolute
  int sample_count = 0;              // N(K-1)
  int degrees_of_freedom = 0;        // N(K-1) - N
};

struct SigmaMEstimate {
  double sigma_m = 0.0;              // s
  std::vector<double> offset_hat;    // microphones 1..N-1, relative to microphone 0
  std::vector<double> drift_hat;     // microphones 1..N-1, relative to microphone 0
  int sample_count = 0;              // (N-1)K
  int degrees_of_freedom = 0;        // (N-1)K - 2(N-1)
};

struct NoiseEstimate {
  SigmaSEstimate s;
  SigmaMEstimate m;
};

SigmaSEstimate estimate_sigma_s(const MeasurementSet& measurements,
                                std::span<const MicrophoneState> truth_mics,
                                const EventTrajectory& truth_traj, const PhysicalConstants& consts);

SigmaMEstimate estimate_sigma_m(const MeasurementSet& measurements,
                                std::span<const MicrophoneState> truth_mics,
                                const EventTrajectory& truth_traj, const PhysicalConstants& consts);

NoiseEstimate estimate_noise(const MeasurementSet& measurements,
                             std::span<const MicrophoneState> truth_mics,
                             const EventTrajectory& truth_traj, const PhysicalConstants& consts);

// Every matching label among A..E, in alphabetical order. The cases overlap:
//   A  both below 1e-4 s
//   B  both in (1e-4, 1.5e-4) s
//   C  both in (1.5e-4, 5e-4) s
//   D  |sigma_s - sigma_m| < 1e-5 s
//   E  unconditioned
std::vector<char> classify_noise_case(double sigma_s, double sigma_m);
std::string case_labels(const std::vector<char>& labels);

}  // namespace asyncmic::noise
