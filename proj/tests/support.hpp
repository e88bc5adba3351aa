#pragma once

#include "asyncmic/frames.hpp"
#include "asyncmic/model.hpp"
#include "asyncmic/sim.hpp"
#include "asyncmic/solver.hpp"

#include <cmath>
#include <vector>

namespace testing {

using namespace asyncmic;

inline sim::Scenario scenario(int trajectory, int mic_count, std::uint64_t seed) {
  sim::Rng rng(seed);
  return sim::random_configuration(sim::TrajectorySpec::named(trajectory), mic_count, rng);
}

inline solver::CalibrationProblem problem_for(const sim::Scenario& sc, Mode mode,
                                              model::NoiseLevels noise, std::uint64_t seed,
                                              const frames::SoundFrameState& init) {
  PhysicalConstants consts;
  auto z = noise.sigma_tdoa == 0.0 && noise.sigma_odo == 0.0
               ? model::noiseless_measurements(sc.mics, sc.traj, consts)
               : model::simulate_measurements(sc.mics, sc.traj, consts, noise, seed);
  return solver::make_problem(std::move(z), sc.traj.intervals, consts, mode, init);
}

// Baseline mode stores drifts relative to microphone 0.
inline frames::SoundFrameState relative_drifts(const frames::SoundFrameState& state, int n) {
  const frames::StateLayout layout{n, 0};
  auto out = state;
  const double d0 = out.mic_block(layout.drift(0));
  for (int i = 0; i < n; ++i) out.mic_block(layout.drift(i)) -= d0;
  return out;
}

inline double max_rel_diff(const MatX& a, const MatX& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace testing
