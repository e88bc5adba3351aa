#include "asyncmic/errors.hpp"
#include "asyncmic/solver.hpp"
#include "doctest.h"
#include "support.hpp"

#include <chrono>

using namespace asyncmic;

namespace {

// Central differences over the active columns. The model is linear in
// offsets and drifts, so a uniform step only sees rounding there.
MatX numeric_jacobian(const solver::CalibrationProblem& p, const frames::SoundFrameState& state,
                      double h) {
  const auto layout = p.layout();
  const auto cols = solver::active_columns(layout, p.mode);
  const VecX x = state.stacked();
  MatX out(solver::residual_size(layout.mic_count, layout.event_count, p.mode), cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    VecX plus = x, minus = x;
    plus(cols[c]) += h;
    minus(cols[c]) -= h;
    const VecX rp = solver::residual(p, frames::SoundFrameState::from_stacked(plus, layout.mic_count, layout.event_count));
    const VecX rm = solver::residual(p, frames::SoundFrameState::from_stacked(minus, layout.mic_count, layout.event_count));
    out.col(c) = (rp - rm) / (2.0 * h);
  }
  return out;
}

// Largest per-column error relative to the column's largest entry.
double column_relative_error(const MatX& analytic, const MatX& numeric) {
  double worst = 0.0;
  for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
    const double scale = analytic.col(c).cwiseAbs().maxCoeff();
    const double diff = (analytic.col(c) - numeric.col(c)).cwiseAbs().maxCoeff();
    worst = std::max(worst, scale > 0.0 ? diff / scale : diff);
  }
  return worst;
}

}  // namespace

TEST_CASE("residual sizes") {
  CHECK(solver::residual_size(6, 14, Mode::hybrid) == 6 * 13 + 5 * 14 + 3 * 13);
  CHECK(solver::residual_size(6, 14, Mode::tdoa_m_only) == 5 * 14 + 3 * 13);
  CHECK(solver::active_columns({4, 8}, Mode::hybrid).size() == 37);
  CHECK(solver::active_columns({4, 8}, Mode::tdoa_m_only).size() == 36);
}

TEST_CASE("residual vanishes at the truth") {
  auto sc = testing::scenario(3, 6, 5);
  for (Mode mode : {Mode::hybrid, Mode::tdoa_m_only}) {
    auto truth = sc.truth_state();
    if (mode == Mode::tdoa_m_only) {
      for (auto& m : sc.mics) m.drift -= sc.mics[0].drift;
      truth = sc.truth_state();
    }
    auto p = testing::problem_for(sc, mode, {}, 0, truth);
    CHECK(solver::residual(p, truth).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("moving one event touches only its rows") {
  auto sc = testing::scenario(2, 4, 8);
  const auto truth = sc.truth_state();
  auto p = testing::problem_for(sc, Mode::hybrid, {}, 0, truth);
  const int n = 4, k = 10, event = 5;
  VecX x = truth.stacked();
  x(p.layout().source(event, 0)) += 1e-3;
  const VecX r = solver::residual(p, frames::SoundFrameState::from_stacked(x, n, k));
  int row = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j + 1 < k; ++j, ++row) CHECK((r(row) != 0.0) == (j == event || j + 1 == event));
  }
  for (int j = 0; j < k; ++j) {
    for (int i = 1; i < n; ++i, ++row) CHECK((r(row) != 0.0) == (j == event));
  }
  for (int j = 0; j + 1 < k; ++j) {
    for (int a = 0; a < 3; ++a, ++row) CHECK((r(row) != 0.0) == ((j == event || j + 1 == event) && a == 0));
  }
}

TEST_CASE("weighted cost at the truth follows the chi-squared mean") {
  auto sc = testing::scenario(3, 6, 12);
  const auto truth = sc.truth_state();
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto p = testing::problem_for(sc, Mode::hybrid, {1e-4, 0.01}, seed, truth);
    total += solver::weighted_cost(p, truth);
  }
  const int dim = solver::residual_size(6, 14, Mode::hybrid);
  CHECK(total / 200.0 == doctest::Approx(dim).epsilon(0.1));
}

TEST_CASE("analytic Jacobian matches central differences") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const int traj = 1 + seed % 3;
    const int n = 2 + seed % 9;
    auto sc = testing::scenario(traj, n, 100 + seed);
    sim::Rng rng(seed);
    for (Mode mode : {Mode::hybrid, Mode::tdoa_m_only}) {
      auto state = sim::perturbed_initialization(sc.truth_state(), 0.3, rng);
      if (mode == Mode::tdoa_m_only) state = testing::relative_drifts(state, n);
      auto p = testing::problem_for(sc, mode, {1e-4, 0.01}, seed, state);
      const MatX analytic = solver::jacobian(p, state);
      CHECK(column_relative_error(analytic, numeric_jacobian(p, state, 1e-6)) < 1e-6);
    }
  }
}

TEST_CASE("Jacobian structure") {
  auto sc = testing::scenario(1, 5, 44);
  const auto truth = sc.truth_state();
  auto p = testing::problem_for(sc, Mode::hybrid, {}, 0, truth);
  const MatX jac = solver::jacobian(p, truth);
  const auto layout = p.layout();
  const int n = 5, k = 8;
  const int tdoa_s_rows = n * (k - 1);
  const int odo_start = tdoa_s_rows + k * (n - 1);

  // Inter-event rows carry no offsets.
  for (int i = 1; i < n; ++i) CHECK(jac.topRows(tdoa_s_rows).col(layout.offset(i)).cwiseAbs().maxCoeff() == 0.0);

  // Odometry rows: +1 for the later event, -1 for the earlier, on free coordinates only.
  for (int j = 0; j + 1 < k; ++j) {
    for (int a = 0; a < 3; ++a) {
      const auto row = jac.row(odo_start + 3 * j + a);
      const int plus = layout.source(j + 1, a);
      const int minus = layout.source(j, a);
      CHECK(row.cwiseAbs().sum() == (plus >= 0) + (minus >= 0));
      if (plus >= 0) CHECK(row(plus) == 1.0);
      if (minus >= 0) CHECK(row(minus) == -1.0);
    }
  }
}

TEST_CASE("Jacobian rejects a microphone on an event") {
  auto sc = testing::scenario(1, 4, 3);
  auto state = sc.truth_state();
  state.mic_block.segment<3>(frames::StateLayout{4, 8}.position(2)) = sc.traj.positions[4];
  auto p = testing::problem_for(sc, Mode::hybrid, {}, 0, state);
  CHECK_THROWS_AS(solver::jacobian(p, state), SingularGeometryError);
}

TEST_CASE("solver stays at an exact optimum") {
  auto sc = testing::scenario(3, 6, 31);
  const auto truth = sc.truth_state();
  auto p = testing::problem_for(sc, Mode::hybrid, {}, 0, truth);
  const auto sol = solver::solve_gauss_newton(p);
  CHECK(sol.converged);
  CHECK(sol.iterations <= 2);
  CHECK(sol.final_cost < 1e-18);
}

TEST_CASE("exact recovery from a perturbed start") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto sc = testing::scenario(3, 6, 200 + seed);
    sim::Rng rng(seed);
    const auto init = sim::perturbed_initialization(sc.truth_state(), 0.1, rng);
    for (Mode mode : {Mode::hybrid, Mode::tdoa_m_only}) {
      auto p = testing::problem_for(sc, mode, {}, 0, init);
      const auto start = std::chrono::steady_clock::now();
      const auto sol = solver::solve_gauss_newton(p);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      const auto err = solver::evaluate_errors(sol, sc.mics);
      CHECK(sol.converged);
      CHECK(err.loc < 1e-6);
      CHECK(err.off < 1e-9);
      CHECK(err.dri < 1e-9);
      CHECK(seconds < 1.0);
    }
  }
}

TEST_CASE("baseline result ignores the initial reference drift") {
  auto sc = testing::scenario(2, 5, 17);
  sim::Rng rng(2);
  auto init = sim::perturbed_initialization(sc.truth_state(), 0.2, rng);
  auto p = testing::problem_for(sc, Mode::tdoa_m_only, {1e-4, 0.01}, 3, init);
  const auto a = solver::solve_gauss_newton(p);
  p.initial_state.mic_block(frames::StateLayout{5, 10}.drift(0)) = 5e-5;
  const auto b = solver::solve_gauss_newton(p);
  CHECK((a.state_mic.values - b.state_mic.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("unobservable starting point is reported") {
  auto sc = testing::scenario(1, 4, 9);
  auto init = sc.truth_state();
  init.source_block.setZero();
  auto p = testing::problem_for(sc, Mode::hybrid, {}, 0, init);
  CHECK_THROWS_AS(solver::solve_gauss_newton(p), UnobservableError);
}

TEST_CASE("missing blocks") {
  auto sc = testing::scenario(1, 4, 9);
  auto p = testing::problem_for(sc, Mode::hybrid, {}, 0, sc.truth_state());
  p.measurements.tdoa_s.resize(0, 0);
  CHECK_THROWS_AS(p.validate(), MissingBlockError);
  p.mode = Mode::tdoa_m_only;
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("error metrics") {
  auto sc = testing::scenario(3, 3, 2);
  const auto truth = frames::to_mic_frame(sc.truth_state());
  auto z = solver::evaluate_errors(truth, truth);
  CHECK(z.loc == 0.0);
  CHECK(z.off == 0.0);
  CHECK(z.dri == 0.0);

  // In-plane displacement of the third microphone keeps the gauge.
  auto moved = truth;
  moved.values.segment<3>(frames::StateLayout::mic_frame_position(2)) += Vec3(0.03, 0.04, 0.0);
  CHECK(solver::evaluate_errors(moved, truth).loc == doctest::Approx(0.05 / std::sqrt(2.0)));

  frames::MicFrameState two{VecX::Zero(8)};
  two.values(3) = 1.0;
  auto two_moved = two;
  two_moved.values(3) += 0.05;
  CHECK(solver::evaluate_errors(two_moved, two).loc == doctest::Approx(0.05));

  // Rigid motion of the estimate changes nothing.
  auto sc6 = testing::scenario(2, 6, 7);
  sim::Rng rng(5);
  auto est = sim::perturbed_initialization(sc6.truth_state(), 0.05, rng);
  std::vector<MicrophoneState> truth_mics = sc6.mics;
  solver::CalibrationSolution sol;
  sol.state_mic = frames::to_mic_frame(est);
  const auto before = solver::evaluate_errors(sol, truth_mics);
  const Mat3 r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const frames::StateLayout layout{6, 10};
  for (int i = 0; i < 6; ++i) {
    auto seg = est.mic_block.segment<3>(layout.position(i));
    seg = r * Vec3(seg) + Vec3(4, -2, 1);
  }
  sol.state_mic = frames::to_mic_frame(est);
  const auto after = solver::evaluate_errors(sol, truth_mics);
  CHECK(after.loc == doctest::Approx(before.loc).epsilon(1e-10));
  CHECK(after.off == doctest::Approx(before.off).epsilon(1e-10));
  CHECK(after.dri == doctest::Approx(before.dri).epsilon(1e-10));
}
