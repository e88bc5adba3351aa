#pragma once

#include "asyncmic/frames.hpp"
#include "asyncmic/solver.hpp"
#include "asyncmic/types.hpp"

#include <vector>

namespace asyncmic::crlb {

// Fisher information J^T W^-1 J at the true state, over the active columns of `mode`.
MatX fisher_information(const solver::CalibrationProblem& problem,
                        const frames::SoundFrameState& truth_state);

// Same, without needing a measurement set: only geometry, intervals and weights enter.
MatX fisher_information(const frames::SoundFrameState& truth_state,
                        const std::vector<double>& intervals, const PhysicalConstants& consts,
                        Mode mode, const solver::WeightSpec& weights);

enum class DegeneracyPolicy { pseudo_inverse, raise };

struct SoundFrameCrlb {
  MatX full;  // inverse (or pseudo-inverse) of the Fisher matrix
  MatX mic;   // leading microphone-parameter block
  bool degenerate = false;
  double condition = 0.0;  // of the Jacobi-scaled Fisher matrix
  std::vector<VecX> null_directions;
};

inline constexpr double kMaxCondition = 1e12;

// `mic_parameter_count` is 5N-1 (hybrid) or 5N-2 (tdoa_m_only). With
// DegeneracyPolicy::raise a near-singular Fisher matrix throws UnobservableError.
SoundFrameCrlb crlb_sound_frame(const MatX& fisher, int mic_parameter_count,
                                DegeneracyPolicy policy = DegeneracyPolicy::pseudo_inverse);

// A C A^T with the affine map matching the mode's parameterization.
MatX crlb_mic_frame(const MatX& crlb_sound_mic, const frames::FrameTransform& transform, Mode mode);

struct DCrlb {
  double loc = 0.0;  // m
  double off = 0.0;  // s
  double dri = 0.0;
};

// sqrt of the mean over microphones 1..N-1 of the per-microphone bound; the
// location bound of one microphone is the trace of its 3x3 block.
DCrlb d_crlb(const MatX& crlb_mic);

struct CrlbReport {
  Mode mode = Mode::hybrid;
  MatX fisher;
  MatX crlb_sound;
  MatX crlb_mic;
  DCrlb indicators;
  bool degenerate = false;
  double condition = 0.0;
};

CrlbReport compute_crlb(const frames::SoundFrameState& truth_state,
                        const std::vector<double>& intervals, const PhysicalConstants& consts,
                        Mode mode, const solver::WeightSpec& weights);

}  // namespace asyncmic::crlb
