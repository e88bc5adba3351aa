#include "asyncmic/crlb.hpp"

#include "asyncmic/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>

namespace asyncmic::crlb {

using frames::SoundFrameState;
using frames::StateLayout;

MatX fisher_information(const solver::CalibrationProblem& problem,
                        const SoundFrameState& truth_state) {
  const VecX inv_sd = solver::residual_sigmas(problem).cwiseInverse();
  const MatX jw = inv_sd.asDiagonal() * solver::jacobian(problem, truth_state);
  MatX f = jw.transpose() * jw;
  return 0.5 * (f + f.transpose());
}

MatX fisher_information(const SoundFrameState& truth_state, const std::vector<double>& intervals,
                        const PhysicalConstants& consts, Mode mode,
                        const solver::WeightSpec& weights) {
  const int n = static_cast<int>((truth_state.mic_block.size() + 1) / 5);
  const int k = static_cast<int>(intervals.size()) + 1;
  solver::CalibrationProblem problem;
  problem.measurements.tdoa_s = MatX::Zero(n, k - 1);
  problem.measurements.tdoa_m = MatX::Zero(n - 1, k);
  problem.measurements.odometry = MatX::Zero(k - 1, 3);
  problem.intervals = intervals;
  problem.consts = consts;
  problem.mode = mode;
  problem.weights = weights;
  problem.initial_state = truth_state;
  problem.validate();
  return fisher_information(problem, truth_state);
}

SoundFrameCrlb crlb_sound_frame(const MatX& fisher, int mic_parameter_count,
                                DegeneracyPolicy policy) {
  const Eigen::Index dim = fisher.rows();
  if (fisher.cols() != dim || mic_parameter_count > dim) {
    throw DimensionError("Fisher matrix shape does not match the parameter count");
  }
  // Jacobi scaling: parameters span metres to 1e-5 drift units.
  VecX d = fisher.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index c = 0; c < dim; ++c) {
    if (!(d(c) > 0.0)) d(c) = 1.0;
  }
  const VecX inv_d = d.cwiseInverse();
  const MatX scaled = inv_d.asDiagonal() * fisher * inv_d.asDiagonal();

  Eigen::SelfAdjointEigenSolver<MatX> eig(0.5 * (scaled + scaled.transpose()));
  const VecX& values = eig.eigenvalues();  // ascending
  const double largest = values(dim - 1);
  const double smallest = values(0);

  SoundFrameCrlb out;
  out.condition = smallest > 0.0 ? largest / smallest : std::numeric_limits<double>::infinity();
  out.degenerate = !(out.condition <= kMaxCondition);

  MatX scaled_inverse;
  if (!out.degenerate) {
    scaled_inverse = eig.eigenvectors() * values.cwiseInverse().asDiagonal() *
                     eig.eigenvectors().transpose();
  } else {
    const double cutoff = largest / kMaxCondition;
    VecX inv_values = VecX::Zero(dim);
    for (Eigen::Index c = 0; c < dim; ++c) {
      if (values(c) > cutoff) {
        inv_values(c) = 1.0 / values(c);
      } else {
        out.null_directions.push_back((inv_d.asDiagonal() * eig.eigenvectors().col(c)).normalized());
      }
    }
    if (policy == DegeneracyPolicy::raise) {
      std::string msg = "Fisher matrix is singular (condition " + std::to_string(out.condition) +
                        "); near-null directions dominated by parameters:";
      for (const auto& v : out.null_directions) {
        Eigen::Index idx = 0;
        v.cwiseAbs().maxCoeff(&idx);
        msg += " " + std::to_string(idx);
      }
      throw UnobservableError(msg, static_cast<int>(dim - out.null_directions.size()),
                              static_cast<int>(dim));
    }
    scaled_inverse = eig.eigenvectors() * inv_values.asDiagonal() * eig.eigenvectors().transpose();
  }
  out.full = inv_d.asDiagonal() * scaled_inverse * inv_d.asDiagonal();
  out.full = 0.5 * (out.full + out.full.transpose());
  out.mic = out.full.topLeftCorner(mic_parameter_count, mic_parameter_count);
  return out;
}

MatX crlb_mic_frame(const MatX& crlb_sound_mic, const frames::FrameTransform& transform,
                    Mode mode) {
  const MatX a = mode == Mode::hybrid ? transform.affine_matrix : transform.reduced_affine_matrix();
  if (a.cols() != crlb_sound_mic.rows()) {
    throw DimensionError("affine map has " + std::to_string(a.cols()) +
                         " columns but the CRLB block has " + std::to_string(crlb_sound_mic.rows()));
  }
  MatX c = a * crlb_sound_mic * a.transpose();
  return 0.5 * (c + c.transpose());
}

DCrlb d_crlb(const MatX& crlb_mic) {
  const int n = static_cast<int>((crlb_mic.rows() + 2) / 5);
  DCrlb out;
  if (n < 2) return out;
  double loc = 0.0;
  double off = 0.0;
  double dri = 0.0;
  for (int i = 1; i < n; ++i) {
    const int p = StateLayout::mic_frame_position(i);
    loc += crlb_mic(p, p) + crlb_mic(p + 1, p + 1) + crlb_mic(p + 2, p + 2);
    off += crlb_mic(StateLayout::mic_frame_offset(i), StateLayout::mic_frame_offset(i));
    dri += crlb_mic(StateLayout::mic_frame_drift(i), StateLayout::mic_frame_drift(i));
  }
  out.loc = std::sqrt(loc / (n - 1));
  out.off = std::sqrt(off / (n - 1));
  out.dri = std::sqrt(dri / (n - 1));
  return out;
}

CrlbReport compute_crlb(const SoundFrameState& truth_state, const std::vector<double>& intervals,
                        const PhysicalConstants& consts, Mode mode,
                        const solver::WeightSpec& weights) {
  const int n = static_cast<int>((truth_state.mic_block.size() + 1) / 5);
  CrlbReport report;
  report.mode = mode;
  report.fisher = fisher_information(truth_state, intervals, consts, mode, weights);
  const int mic_params = mode == Mode::hybrid ? StateLayout::mic_block_size(n)
                                              : StateLayout::mic_block_size(n) - 1;
  const SoundFrameCrlb sound = crlb_sound_frame(report.fisher, mic_params);
  report.crlb_sound = sound.full;
  report.degenerate = sound.degenerate;
  report.condition = sound.condition;
  const auto transform = frames::compute_frame_transform(frames::mic_positions(truth_state));
  report.crlb_mic = crlb_mic_frame(sound.mic, transform, mode);
  report.indicators = d_crlb(report.crlb_mic);
  return report;
}

}  // namespace asyncmic::crlb
