#include "asyncmic/solver.hpp"

#include "asyncmic/errors.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace asyncmic::solver {

using frames::SoundFrameState;
using frames::StateLayout;

void WeightSpec::validate() const {
  if (!(sigma_tdoa > 0.0) || !(sigma_odo > 0.0)) {
    throw DimensionError("weight standard deviations must be positive");
  }
}

WeightSpec WeightSpec::from_measurements(const MeasurementSet& measurements) {
  WeightSpec w;
  if (measurements.sigma_tdoa > 0.0) w.sigma_tdoa = measurements.sigma_tdoa;
  if (measurements.sigma_odo > 0.0) w.sigma_odo = measurements.sigma_odo;
  return w;
}

void CalibrationProblem::validate() const {
  if (!measurements.has_tdoa_m()) throw MissingBlockError("missing tdoa_m block");
  if (!measurements.has_odometry()) throw MissingBlockError("missing odometry block");
  if (mode == Mode::hybrid && !measurements.has_tdoa_s()) {
    throw MissingBlockError("missing tdoa_s block (required in hybrid mode)");
  }
  const int n = mic_count();
  const int k = event_count();
  if (n < 2) throw DimensionError("at least 2 microphones are required");
  if (k < 4) throw DimensionError("at least 4 events are required");
  measurements.validate_shape(n, k);
  for (double dt : intervals) {
    if (!(dt > 0.0)) throw DimensionError("emission intervals must be positive");
  }
  consts.validate();
  weights.validate();
  if (initial_state.mic_block.size() != StateLayout::mic_block_size(n) ||
      initial_state.source_block.size() != StateLayout::source_block_size(k)) {
    throw DimensionError("initial state does not match N=" + std::to_string(n) +
                         ", K=" + std::to_string(k));
  }
}

CalibrationProblem make_problem(MeasurementSet measurements, std::vector<double> intervals,
                                PhysicalConstants consts, Mode mode,
                                SoundFrameState initial_state) {
  CalibrationProblem p;
  p.weights = WeightSpec::from_measurements(measurements);
  p.measurements = std::move(measurements);
  p.intervals = std::move(intervals);
  p.consts = consts;
  p.mode = mode;
  p.initial_state = std::move(initial_state);
  p.validate();
  return p;
}

int residual_size(int mic_count, int event_count, Mode mode) {
  const int s_rows = mode == Mode::hybrid ? mic_count * (event_count - 1) : 0;
  return s_rows + event_count * (mic_count - 1) + 3 * (event_count - 1);
}

std::vector<int> active_columns(const StateLayout& layout, Mode mode) {
  std::vector<int> cols;
  cols.reserve(layout.total_size());
  for (int c = 0; c < layout.total_size(); ++c) {
    if (mode == Mode::tdoa_m_only && c == layout.drift(0)) continue;
    cols.push_back(c);
  }
  return cols;
}

VecX column_scales(const StateLayout& layout, Mode mode) {
  VecX full = VecX::Ones(layout.total_size());
  for (int i = 0; i < layout.mic_count; ++i) {
    full(layout.drift(i)) = 1e-5;
    if (i > 0) full(layout.offset(i)) = 1e-3;
  }
  const auto cols = active_columns(layout, mode);
  VecX out(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) out(c) = full(cols[c]);
  return out;
}

namespace {

void check_state(const CalibrationProblem& problem, const SoundFrameState& state) {
  const StateLayout layout = problem.layout();
  if (state.mic_block.size() != layout.mic_block_size() ||
      state.source_block.size() != layout.source_block_size()) {
    throw DimensionError("state does not match the problem's N=" +
                         std::to_string(layout.mic_count) +
                         ", K=" + std::to_string(layout.event_count));
  }
}

std::vector<double> emission_times(const std::vector<double>& intervals) {
  std::vector<double> t(intervals.size() + 1, 0.0);
  for (std::size_t j = 1; j < t.size(); ++j) t[j] = t[j - 1] + intervals[j - 1];
  return t;
}

// Unit vector from event to microphone; throws for coincident pairs.
Vec3 unit_from(const Vec3& mic, const Vec3& event, int i, int j) {
  const Vec3 d = mic - event;
  const double r = d.norm();
  if (r < 1e-12) {
    throw SingularGeometryError("microphone " + std::to_string(i) + " coincides with sound event " +
                                    std::to_string(j) + "; range derivative undefined",
                                i, j);
  }
  return d / r;
}

}  // namespace

VecX residual(const CalibrationProblem& problem, const SoundFrameState& state) {
  check_state(problem, state);
  const int n = problem.mic_count();
  const int k = problem.event_count();
  const auto unpacked = frames::unpack_state(state, n, k);
  const auto& mics = unpacked.mics;
  const auto& s = unpacked.events;
  const auto t = emission_times(problem.intervals);
  const double c = problem.consts.sound_speed;
  const auto& z = problem.measurements;

  VecX r(residual_size(n, k, problem.mode));
  int row = 0;
  if (problem.mode == Mode::hybrid) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j + 1 < k; ++j) {
        const double f = ((mics[i].position - s[j + 1]).norm() - (mics[i].position - s[j]).norm()) / c +
                         (1.0 + mics[i].drift) * problem.intervals[j];
        r(row++) = f - z.tdoa_s(i, j);
      }
    }
  }
  for (int j = 0; j < k; ++j) {
    const double ref_range = (mics[0].position - s[j]).norm();
    for (int i = 1; i < n; ++i) {
      const double f = ((mics[i].position - s[j]).norm() - ref_range) / c + mics[i].offset +
                       (mics[i].drift - mics[0].drift) * t[j];
      r(row++) = f - z.tdoa_m(i - 1, j);
    }
  }
  for (int j = 0; j + 1 < k; ++j) {
    const Vec3 f = s[j + 1] - s[j];
    for (int axis = 0; axis < 3; ++axis) r(row++) = f(axis) - z.odometry(j, axis);
  }
  return r;
}

VecX residual_sigmas(const CalibrationProblem& problem) {
  const int n = problem.mic_count();
  const int k = problem.event_count();
  VecX sd(residual_size(n, k, problem.mode));
  const int odo_rows = 3 * (k - 1);
  sd.head(sd.size() - odo_rows).setConstant(problem.weights.sigma_tdoa);
  sd.tail(odo_rows).setConstant(problem.weights.sigma_odo);
  return sd;
}

MatX jacobian(const CalibrationProblem& problem, const SoundFrameState& state) {
  check_state(problem, state);
  const int n = problem.mic_count();
  const int k = problem.event_count();
  const StateLayout layout = problem.layout();
  const auto unpacked = frames::unpack_state(state, n, k);
  const auto& mics = unpacked.mics;
  const auto& s = unpacked.events;
  const auto t = emission_times(problem.intervals);
  const double inv_c = 1.0 / problem.consts.sound_speed;

  MatX full = MatX::Zero(residual_size(n, k, problem.mode), layout.total_size());

  // Adds a 3-vector derivative onto the free coordinates of event j.
  auto add_event = [&](int row, int j, const Vec3& d) {
    for (int axis = 0; axis < 3; ++axis) {
      const int col = layout.source(j, axis);
      if (col >= 0) full(row, col) += d(axis);
    }
  };

  // u[i][j]: unit vector from event j to microphone i.
  std::vector<std::vector<Vec3>> u(n, std::vector<Vec3>(k));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) u[i][j] = unit_from(mics[i].position, s[j], i, j);
  }

  int row = 0;
  if (problem.mode == Mode::hybrid) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j + 1 < k; ++j) {
        full.block<1, 3>(row, layout.position(i)) = ((u[i][j + 1] - u[i][j]) * inv_c).transpose();
        add_event(row, j + 1, -u[i][j + 1] * inv_c);
        add_event(row, j, u[i][j] * inv_c);
        full(row, layout.drift(i)) = problem.intervals[j];
        ++row;
      }
    }
  }
  for (int j = 0; j < k; ++j) {
    for (int i = 1; i < n; ++i) {
      full.block<1, 3>(row, layout.position(i)) = (u[i][j] * inv_c).transpose();
      full.block<1, 3>(row, layout.position(0)) = (-u[0][j] * inv_c).transpose();
      add_event(row, j, (u[0][j] - u[i][j]) * inv_c);
      full(row, layout.offset(i)) = 1.0;
      full(row, layout.drift(i)) = t[j];
      full(row, layout.drift(0)) = -t[j];
      ++row;
    }
  }
  for (int j = 0; j + 1 < k; ++j) {
    for (int axis = 0; axis < 3; ++axis) {
      Vec3 e = Vec3::Zero();
      e(axis) = 1.0;
      add_event(row, j + 1, e);
      add_event(row, j, -e);
      ++row;
    }
  }

  const auto cols = active_columns(layout, problem.mode);
  if (static_cast<int>(cols.size()) == layout.total_size()) return full;
  MatX out(full.rows(), cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(c) = full.col(cols[c]);
  return out;
}

double weighted_cost(const CalibrationProblem& problem, const SoundFrameState& state) {
  const VecX r = residual(problem, state).cwiseQuotient(residual_sigmas(problem));
  return r.squaredNorm();
}

namespace {

SoundFrameState apply_step(const SoundFrameState& state, const std::vector<int>& cols,
                           const VecX& step, int n, int k) {
  VecX x = state.stacked();
  for (std::size_t c = 0; c < cols.size(); ++c) x(cols[c]) += step(c);
  return SoundFrameState::from_stacked(x, n, k);
}

// Baseline mode estimates drifts relative to microphone 0 only.
SoundFrameState normalize_for_mode(SoundFrameState state, const StateLayout& layout, Mode mode) {
  if (mode == Mode::tdoa_m_only) {
    const double d0 = state.mic_block(layout.drift(0));
    for (int i = 0; i < layout.mic_count; ++i) state.mic_block(layout.drift(i)) -= d0;
  }
  return state;
}

}  // namespace

CalibrationSolution solve_gauss_newton(const CalibrationProblem& problem,
                                       const SolverOptions& options) {
  problem.validate();
  const int n = problem.mic_count();
  const int k = problem.event_count();
  const StateLayout layout = problem.layout();
  if (!problem.initial_state.stacked().allFinite()) {
    throw DimensionError("initial state has non-finite entries");
  }

  const auto cols = active_columns(layout, problem.mode);
  const VecX scales = column_scales(layout, problem.mode);
  const VecX inv_sd = residual_sigmas(problem).cwiseInverse();
  const int dim = static_cast<int>(cols.size());

  CalibrationSolution sol;
  sol.mode = problem.mode;
  SoundFrameState x = normalize_for_mode(problem.initial_state, layout, problem.mode);
  VecX r = residual(problem, x).cwiseProduct(inv_sd);
  double cost = r.squaredNorm();
  sol.cost_history.push_back(cost);

  int last_rank = dim;
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    sol.iterations = iter;
    // Whitened, column-scaled Jacobian.
    const MatX js = inv_sd.asDiagonal() * jacobian(problem, x) * scales.asDiagonal();

    Eigen::ColPivHouseholderQR<MatX> qr(js);
    qr.setThreshold(options.rank_threshold);
    last_rank = static_cast<int>(qr.rank());
    const bool deficient = last_rank < dim;
    if (deficient && iter == 1) {
      throw UnobservableError("normal equations are rank deficient at the initial state (numerical rank " +
                                  std::to_string(last_rank) + " of " + std::to_string(dim) +
                                  "); configuration is unobservable",
                              last_rank, dim);
    }

    VecX step;
    double step_norm = 0.0;
    SoundFrameState candidate;
    VecX r_new;
    double cost_new = std::numeric_limits<double>::infinity();
    if (!deficient) {
      step = -qr.solve(r);
      step_norm = step.norm();
      if (step_norm < options.step_tol) {
        x = apply_step(x, cols, step.cwiseProduct(scales), n, k);
        r = residual(problem, x).cwiseProduct(inv_sd);
        cost = r.squaredNorm();
        sol.step_norm_history.push_back(step_norm);
        sol.cost_history.push_back(cost);
        sol.converged = true;
        break;
      }
      // Stationary point: the linear model promises no meaningful decrease.
      if (cost - (r + js * step).squaredNorm() <= options.cost_tol * cost) {
        sol.step_norm_history.push_back(step_norm);
        sol.converged = true;
        break;
      }
      candidate = apply_step(x, cols, step.cwiseProduct(scales), n, k);
      r_new = residual(problem, candidate).cwiseProduct(inv_sd);
      cost_new = r_new.squaredNorm();
    }

    bool damped_step = false;
    if (deficient || (!(cost_new <= cost) && std::isfinite(cost))) {
      damped_step = true;
      // Levenberg fallback: (H + lambda diag(H)) step = -g.
      const MatX h = js.transpose() * js;
      const VecX g = js.transpose() * r;
      const VecX diag = h.diagonal().cwiseMax(1e-12 * h.diagonal().maxCoeff());
      double lambda = options.damping_floor;
      bool accepted = false;
      while (lambda <= options.damping_ceiling) {
        MatX damped = h;
        damped.diagonal() += lambda * diag;
        step = -damped.ldlt().solve(g);
        candidate = apply_step(x, cols, step.cwiseProduct(scales), n, k);
        r_new = residual(problem, candidate).cwiseProduct(inv_sd);
        cost_new = r_new.squaredNorm();
        if (cost_new <= cost) {
          accepted = true;
          break;
        }
        lambda *= 10.0;
      }
      step_norm = step.norm();
      if (!accepted) {
        sol.converged = false;
        break;
      }
    }

    const double rel_change = cost > 0.0 ? (cost - cost_new) / cost : 0.0;
    x = std::move(candidate);
    r = std::move(r_new);
    cost = cost_new;
    sol.step_norm_history.push_back(step_norm);
    sol.cost_history.push_back(cost);
    // A heavily damped step changes the cost little without being near a minimum.
    if (cost == 0.0 || (!damped_step && (step_norm < options.step_tol || rel_change < options.cost_tol))) {
      sol.converged = true;
      break;
    }
  }

  if (!sol.converged) {
    const MatX js = inv_sd.asDiagonal() * jacobian(problem, x) * scales.asDiagonal();
    Eigen::ColPivHouseholderQR<MatX> qr(js);
    qr.setThreshold(options.rank_threshold);
    last_rank = static_cast<int>(qr.rank());
  }
  sol.final_rank = last_rank;

  sol.state_sound = x;
  sol.final_cost = cost;
  sol.state_mic = frames::to_mic_frame(x);
  return sol;
}

ErrorMetrics evaluate_errors(const frames::MicFrameState& estimate,
                             const frames::MicFrameState& truth) {
  if (estimate.values.size() != truth.values.size()) {
    throw DimensionError("estimate and truth have different microphone counts");
  }
  const int n = truth.mic_count();
  ErrorMetrics out;
  if (n < 2) return out;
  auto loc_rmse = [&](const frames::MicFrameState& est) {
    double sum = 0.0;
    for (int i = 1; i < n; ++i) sum += (est.position(i) - truth.position(i)).squaredNorm();
    return std::sqrt(sum / (n - 1));
  };
  const double direct = loc_rmse(estimate);
  const double mirrored = loc_rmse(frames::mirror_z(estimate));
  out.mirrored = mirrored < direct;
  out.loc = std::min(direct, mirrored);
  double off = 0.0;
  double dri = 0.0;
  for (int i = 1; i < n; ++i) {
    off += std::pow(estimate.offset(i) - truth.offset(i), 2);
    dri += std::pow(estimate.drift(i) - truth.drift(i), 2);
  }
  out.off = std::sqrt(off / (n - 1));
  out.dri = std::sqrt(dri / (n - 1));
  return out;
}

ErrorMetrics evaluate_errors(const CalibrationSolution& solution,
                             std::span<const MicrophoneState> truth_mics) {
  const VecX block = frames::pack_mic_block(truth_mics);
  std::vector<Vec3> positions;
  for (const auto& m : truth_mics) positions.push_back(m.position);
  const auto transform = frames::compute_frame_transform(positions);
  const frames::MicFrameState truth{transform.affine_matrix * block + transform.affine_offset};
  return evaluate_errors(solution.state_mic, truth);
}

}  // namespace asyncmic::solver
