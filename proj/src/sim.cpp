#include "asyncmic/sim.hpp"

#include "asyncmic/errors.hpp"
#include "asyncmic/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <thread>
#include <tuple>

namespace asyncmic::sim {

using frames::SoundFrameState;
using frames::StateLayout;

TrajectorySpec TrajectorySpec::named(int id) {
  TrajectorySpec spec;
  spec.id = id;
  switch (id) {
    case 1:
      spec.extents = Vec3(3.0, 3.0, 3.0);
      spec.event_count = 8;
      break;
    case 2:
      spec.extents = Vec3(2.0, 6.0, 2.0);
      spec.event_count = 10;
      break;
    case 3:
      spec.extents = Vec3(4.0, 4.0, 2.0);
      spec.event_count = 14;
      break;
    default:
      throw DimensionError("unknown trajectory " + std::to_string(id) + " (expected 1, 2 or 3)");
  }
  return spec;
}

TrajectorySpec TrajectorySpec::custom(std::vector<Vec3> waypoints) {
  TrajectorySpec spec;
  spec.id = 0;
  spec.event_count = static_cast<int>(waypoints.size());
  Vec3 hi = Vec3::Zero();
  for (const auto& w : waypoints) hi = hi.cwiseMax(w);
  spec.extents = hi;
  spec.waypoints = std::move(waypoints);
  return spec;
}

void TrajectorySpec::validate() const {
  if ((extents.array() <= 0.0).any()) throw DimensionError("trajectory extents must be positive");
  if (event_count < 4) throw DimensionError("trajectory needs at least 4 events");
  if (id == 0 && static_cast<int>(waypoints.size()) != event_count) {
    throw DimensionError("custom trajectory waypoint count does not match its event count");
  }
}

std::vector<Vec3> loop_waypoints(const TrajectorySpec& spec, Rng& rng) {
  if (spec.id == 0) return spec.waypoints;
  const Vec3& e = spec.extents;
  const double x0 = spec.inset * e.x(), x1 = (1.0 - spec.inset) * e.x();
  const double y0 = spec.inset * e.y(), y1 = (1.0 - spec.inset) * e.y();
  const double w = x1 - x0, h = y1 - y0;
  const double perimeter = 2.0 * (w + h);
  auto on_loop = [&](double s) {
    s = std::fmod(s, perimeter);
    if (s < w) return Eigen::Vector2d(x0 + s, y0);
    s -= w;
    if (s < h) return Eigen::Vector2d(x1, y0 + s);
    s -= h;
    if (s < w) return Eigen::Vector2d(x1 - s, y1);
    s -= w;
    return Eigen::Vector2d(x0, y1 - s);
  };

  const int k = spec.event_count;
  const int low = (k + 1) / 2;
  const int high = k - low;
  std::uniform_real_distribution<double> jitter(-spec.jitter, spec.jitter);
  std::vector<Vec3> out;
  out.reserve(k);
  for (int j = 0; j < k; ++j) {
    const bool first_lap = j < low;
    const int m = first_lap ? low : high;
    const int idx = first_lap ? j : j - low;
    const double frac = (idx + (first_lap ? 0.5 : 1.0)) / m;
    const Eigen::Vector2d xy = on_loop(frac * perimeter);
    Vec3 p(xy.x(), xy.y(), (first_lap ? spec.low_height : spec.high_height) * e.z());
    for (int a = 0; a < 3; ++a) p(a) = std::clamp(p(a) + jitter(rng) * e(a), 0.0, e(a));
    out.push_back(p);
  }
  return out;
}

SoundFrameState Scenario::truth_state() const { return frames::pack_state(mics, traj); }

Scenario random_configuration(const TrajectorySpec& spec, int mic_count, Rng& rng) {
  spec.validate();
  if (mic_count < 2) throw DimensionError("at least 2 microphones are required");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> offset(-0.1, 0.1);
  std::uniform_real_distribution<double> drift(-1e-4, 1e-4);
  std::uniform_real_distribution<double> interval(1.0, 2.0);

  for (int attempt = 0; attempt < 100; ++attempt) {
    const auto world_events = loop_waypoints(spec, rng);
    std::vector<MicrophoneState> world_mics(mic_count);
    for (int i = 0; i < mic_count; ++i) {
      for (int a = 0; a < 3; ++a) world_mics[i].position(a) = unit(rng) * spec.extents(a);
      world_mics[i].offset = i == 0 ? 0.0 : offset(rng);
      world_mics[i].drift = drift(rng);
    }
    std::vector<double> intervals(spec.event_count - 1);
    for (double& dt : intervals) dt = interval(rng);

    Scenario sc;
    try {
      sc.sound_from_world = frames::anchor_frame(world_events[0], world_events[1], &world_events[2]);
      if (mic_count >= 3) {
        frames::anchor_frame(world_mics[0].position, world_mics[1].position, &world_mics[2].position);
      }
    } catch (const DegenerateGeometryError&) {
      continue;
    }
    bool too_close = false;
    for (const auto& m : world_mics) {
      for (const auto& s : world_events) too_close = too_close || (m.position - s).norm() < 1e-3;
    }
    if (too_close) continue;

    sc.traj.intervals = std::move(intervals);
    for (const auto& s : world_events) sc.traj.positions.push_back(sc.sound_from_world.apply(s));
    // Anchors exactly on their gauge axes.
    sc.traj.positions[0].setZero();
    sc.traj.positions[1].y() = sc.traj.positions[1].z() = 0.0;
    sc.traj.positions[2].z() = 0.0;
    for (auto m : world_mics) {
      m.position = sc.sound_from_world.apply(m.position);
      sc.mics.push_back(m);
    }
    return sc;
  }
  throw DegenerateGeometryError("could not draw a nondegenerate configuration in 100 attempts");
}

SoundFrameState perturbed_initialization(const SoundFrameState& truth, double sigma_init, Rng& rng) {
  if (sigma_init < 0.0) throw DimensionError("sigma_init must be nonnegative");
  const int n = static_cast<int>((truth.mic_block.size() + 1) / 5);
  const int k = static_cast<int>((truth.source_block.size() + 6) / 3);
  const StateLayout layout{n, k};
  std::normal_distribution<double> noise(0.0, 1.0);
  VecX x = truth.stacked();
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) x(layout.position(i) + a) += sigma_init * noise(rng);
    x(layout.drift(i)) = 0.0;
    if (i > 0) x(layout.offset(i)) = 0.0;
  }
  for (int c = layout.mic_block_size(); c < layout.total_size(); ++c) x(c) += sigma_init * noise(rng);
  return SoundFrameState::from_stacked(x, n, k);
}

SoundFrameState random_initialization(const TrajectorySpec& spec, int mic_count, int event_count,
                                      const frames::RigidTransform& sound_from_world, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p(a) = unit(rng) * spec.extents(a);
    return sound_from_world.apply(p);
  };
  const StateLayout layout{mic_count, event_count};
  VecX x = VecX::Zero(layout.total_size());
  for (int i = 0; i < mic_count; ++i) x.segment<3>(layout.position(i)) = draw();
  for (int j = 1; j < event_count; ++j) {
    const Vec3 p = draw();
    for (int a = 0; a < 3; ++a) {
      const int idx = layout.source(j, a);
      if (idx >= 0) x(idx) = p(a);
    }
  }
  return SoundFrameState::from_stacked(x, mic_count, event_count);
}

void ExperimentGrid::validate() const {
  if (trajectories.empty() || mic_counts.empty() || tdoa_noise_sds.empty() || modes.empty()) {
    throw DimensionError("experiment grid lists must be nonempty");
  }
  if (trials_per_cell < 1) throw DimensionError("trials_per_cell must be >= 1");
  for (int t : trajectories) TrajectorySpec::named(t);
  for (int n : mic_counts) {
    if (n < 2) throw DimensionError("mic counts must be >= 2");
  }
  for (double s : tdoa_noise_sds) {
    if (!(s > 0.0)) throw DimensionError("TDOA noise SDs must be positive");
  }
  if (!(sigma_odo > 0.0)) throw DimensionError("sigma_odo must be positive");
  consts.validate();
}

ExperimentGrid ExperimentGrid::part_a() {
  ExperimentGrid g;
  g.mic_counts = {4, 6, 8, 10};
  return g;
}

ExperimentGrid ExperimentGrid::part_b() {
  ExperimentGrid g;
  g.init_noise_sds = {{0.0, 0.0, 0.0}, {1.0, 2.0, 2.0}, {2.0, 4.0, 4.0}, {3.0, 6.0, 6.0}};
  return g;
}

ExperimentGrid ExperimentGrid::part_cd() {
  ExperimentGrid g;
  g.tdoa_noise_sds = {5e-5, 1e-4, 5e-4};
  return g;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::vector<TrialSetup> enumerate_trials(const ExperimentGrid& grid) {
  grid.validate();
  std::vector<TrialSetup> out;
  const int levels = grid.init_noise_sds.empty() ? 1 : static_cast<int>(grid.init_noise_sds.size());
  std::uint64_t index = 0;
  for (int traj : grid.trajectories) {
    for (int n : grid.mic_counts) {
      for (int level = 0; level < levels; ++level) {
        for (double sigma : grid.tdoa_noise_sds) {
          for (int trial = 0; trial < grid.trials_per_cell; ++trial) {
            TrialSetup s;
            s.trajectory = traj;
            s.mic_count = n;
            s.init_level = grid.init_noise_sds.empty() ? -1 : level;
            s.sigma_init = grid.init_noise_sds.empty() ? 0.0 : grid.init_noise_sds[level][traj - 1];
            s.sigma_tdoa = sigma;
            s.trial = trial;
            s.seed = splitmix64(grid.seed ^ splitmix64(index++));
            out.push_back(s);
          }
        }
      }
    }
  }
  return out;
}

TrialRecord run_trial(const TrialSetup& setup, const ExperimentGrid& grid) {
  TrialRecord rec;
  rec.seed = setup.seed;
  rec.trajectory = setup.trajectory;
  rec.mic_count = setup.mic_count;
  rec.init_level = setup.init_level;
  rec.sigma_init = setup.sigma_init;
  rec.sigma_tdoa = setup.sigma_tdoa;
  rec.sigma_odo = grid.sigma_odo;
  rec.trial = setup.trial;

  const TrajectorySpec spec = TrajectorySpec::named(setup.trajectory);
  rec.event_count = spec.event_count;
  Rng rng(setup.seed);

  auto fail_all = [&](const std::string& why) {
    for (Mode m : grid.modes) {
      ModeResult r;
      r.mode = m;
      r.loc_err = r.off_err = r.dri_err = kNaN;
      r.d_crlb = {kNaN, kNaN, kNaN};
      r.failure = why;
      rec.results.push_back(r);
    }
    return rec;
  };

  Scenario sc;
  MeasurementSet meas;
  SoundFrameState init;
  try {
    sc = random_configuration(spec, setup.mic_count, rng);
    meas = model::simulate_measurements(sc.mics, sc.traj, grid.consts,
                                        {setup.sigma_tdoa, grid.sigma_odo}, rng());
    init = setup.init_level < 0
               ? random_initialization(spec, setup.mic_count, spec.event_count, sc.sound_from_world, rng)
               : perturbed_initialization(sc.truth_state(), setup.sigma_init, rng);
  } catch (const Error& e) {
    return fail_all(e.what());
  }
  const SoundFrameState truth = sc.truth_state();

  for (Mode mode : grid.modes) {
    ModeResult r;
    r.mode = mode;
    try {
      auto problem = solver::make_problem(meas, sc.traj.intervals, grid.consts, mode, init);
      const auto sol = solver::solve_gauss_newton(problem, grid.solver_options);
      const auto err = solver::evaluate_errors(sol, sc.mics);
      r.converged = sol.converged;
      r.iterations = sol.iterations;
      r.loc_err = err.loc;
      r.off_err = err.off;
      r.dri_err = err.dri;
    } catch (const Error& e) {
      r.loc_err = r.off_err = r.dri_err = kNaN;
      r.failure = e.what();
    }
    if (grid.compute_crlb) {
      try {
        const auto report = crlb::compute_crlb(truth, sc.traj.intervals, grid.consts, mode,
                                               {setup.sigma_tdoa, grid.sigma_odo});
        r.d_crlb = report.indicators;
        r.crlb_degenerate = report.degenerate;
      } catch (const Error& e) {
        r.d_crlb = {kNaN, kNaN, kNaN};
        if (r.failure.empty()) r.failure = e.what();
      }
    } else {
      r.d_crlb = {kNaN, kNaN, kNaN};
    }
    rec.results.push_back(r);
  }
  return rec;
}

Summary summarize(std::vector<double> values) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  Summary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) {
    s.median = s.q1 = s.q3 = s.mean = kNaN;
    return s;
  }
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * (values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - lo) * (values[hi] - values[lo]);
  };
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / values.size();
  return s;
}

std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records) {
  using Key = std::tuple<int, int, double, int>;
  struct Acc {
    int trials = 0, converged = 0, failures = 0;
    std::vector<double> loc, off, dri, dl, dof, ddr;
  };
  std::map<Key, Acc> groups;
  for (const auto& rec : records) {
    for (const auto& r : rec.results) {
      auto& a = groups[{rec.mic_count, rec.init_level, rec.sigma_tdoa, static_cast<int>(r.mode)}];
      ++a.trials;
      if (r.converged) ++a.converged;
      if (!r.failure.empty()) ++a.failures;
      a.loc.push_back(r.loc_err);
      a.off.push_back(r.off_err);
      a.dri.push_back(r.dri_err);
      a.dl.push_back(r.d_crlb.loc);
      a.dof.push_back(r.d_crlb.off);
      a.ddr.push_back(r.d_crlb.dri);
    }
  }
  std::vector<AggregateRow> out;
  for (auto& [key, a] : groups) {
    AggregateRow row;
    std::tie(row.mic_count, row.init_level, row.sigma_tdoa, std::ignore) = key;
    row.mode = static_cast<Mode>(std::get<3>(key));
    row.trials = a.trials;
    row.converged = a.converged;
    row.failures = a.failures;
    row.loc = summarize(a.loc);
    row.off = summarize(a.off);
    row.dri = summarize(a.dri);
    row.mean_d_crlb_loc = summarize(a.dl).mean;
    row.mean_d_crlb_off = summarize(a.dof).mean;
    row.mean_d_crlb_dri = summarize(a.ddr).mean;
    out.push_back(row);
  }
  return out;
}

GridResult run_grid(const ExperimentGrid& grid, int jobs) {
  const auto setups = enumerate_trials(grid);
  GridResult result;
  result.trials.resize(setups.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < setups.size(); i = next++) {
      result.trials[i] = run_trial(setups[i], grid);
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(setups.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  result.aggregates = aggregate(result.trials);
  return result;
}

}  // namespace asyncmic::sim
