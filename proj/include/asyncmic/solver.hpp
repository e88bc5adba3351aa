#pragma once

// Weighted nonlinear least squares over the Sound-frame state.
//
// Residual rows, in order:
//   TDOA-S   mic-major    (i = 0..N-1, j = 0..K-2)   hybrid mode only
//   TDOA-M   event-major  (j = 0..K-1, i = 1..N-1)
//   odometry pair-major   (j = 0..K-2, axis x,y,z)
//
// In tdoa_m_only mode the drift_0 column is dropped and every stored drift is
// relative to microphone 0 (drift_0 is pinned at zero).

#include "asyncmic/frames.hpp"
#include "asyncmic/types.hpp"

#include <vector>

namespace asyncmic::solver {

struct WeightSpec {
  double sigma_tdoa = 1e-4;  // s
  double sigma_odo = 0.01;   // m

  void validate() const;
  // Measurement SDs, with the defaults above standing in for zeros
  // (noise-free simulations still need finite weights).
  static WeightSpec from_measurements(const MeasurementSet& measurements);
};

struct CalibrationProblem {
  MeasurementSet measurements;
  std::vector<double> intervals;  // K-1 emission gaps, s
  PhysicalConstants consts;
  Mode mode = Mode::hybrid;
  WeightSpec weights;
  frames::SoundFrameState initial_state;

  int mic_count() const { return static_cast<int>(measurements.tdoa_m.rows()) + 1; }
  int event_count() const { return static_cast<int>(intervals.size()) + 1; }
  frames::StateLayout layout() const { return {mic_count(), event_count()}; }

  // Throws MissingBlockError / DimensionError for blocks the mode needs.
  void validate() const;
};

CalibrationProblem make_problem(MeasurementSet measurements, std::vector<double> intervals,
                                PhysicalConstants consts, Mode mode,
                                frames::SoundFrameState initial_state);

int residual_size(int mic_count, int event_count, Mode mode);

// Storage indices (into the stacked Sound-frame vector) that are estimated in `mode`.
std::vector<int> active_columns(const frames::StateLayout& layout, Mode mode);

// f(x) - z.
VecX residual(const CalibrationProblem& problem, const frames::SoundFrameState& state);

// Per-row standard deviations matching the residual order.
VecX residual_sigmas(const CalibrationProblem& problem);

// d(residual)/d(active parameters). Throws SingularGeometryError when a
// microphone coincides with an event.
MatX jacobian(const CalibrationProblem& problem, const frames::SoundFrameState& state);

// r^T W^-1 r.
double weighted_cost(const CalibrationProblem& problem, const frames::SoundFrameState& state);

struct SolverOptions {
  int max_iter = 200;
  double step_tol = 1e-10;       // on the column-scaled step
  double cost_tol = 1e-12;       // relative cost change
  double damping_floor = 1e-6;   // first Levenberg factor after a rejected GN step
  double damping_ceiling = 1e12;
  double rank_threshold = 1e-10;
};

struct CalibrationSolution {
  frames::SoundFrameState state_sound;
  frames::MicFrameState state_mic;
  Mode mode = Mode::hybrid;
  int iterations = 0;
  double final_cost = 0.0;
  bool converged = false;
  int final_rank = 0;  // of the whitened Jacobian where the iteration stopped
  std::vector<double> step_norm_history;
  std::vector<double> cost_history;  // initial cost first
};

// Characteristic magnitudes used for column scaling, per active column.
VecX column_scales(const frames::StateLayout& layout, Mode mode);

// Gauss-Newton with a multiplicative diagonal (Levenberg) fallback on rejected
// steps and on rank-deficient iterates. Throws UnobservableError when the
// normal equations lack full rank at the initial state.
CalibrationSolution solve_gauss_newton(const CalibrationProblem& problem,
                                       const SolverOptions& options = {});

struct ErrorMetrics {
  double loc = 0.0;  // m
  double off = 0.0;  // s
  double dri = 0.0;
  bool mirrored = false;  // the xy-plane reflection of the estimate matched better
};

// RMSE over microphones 1..N-1 in the Mic frame, both estimate and truth
// transformed with their own anchors.
ErrorMetrics evaluate_errors(const frames::MicFrameState& estimate,
                             const frames::MicFrameState& truth);
ErrorMetrics evaluate_errors(const CalibrationSolution& solution,
                             std::span<const MicrophoneState> truth_mics);

}  // namespace asyncmic::solver
