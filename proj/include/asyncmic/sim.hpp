#pragma once

// Seeded Monte Carlo experiments: random microphone/trajectory configurations,
// initializations, and the hybrid vs. TDOA-M-only comparison grid.

#include "asyncmic/crlb.hpp"
#include "asyncmic/frames.hpp"
#include "asyncmic/solver.hpp"
#include "asyncmic/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace asyncmic::sim {

using Rng = std::mt19937_64;

struct TrajectorySpec {
  int id = 0;                     // 1, 2, 3 for the named layouts, 0 for custom
  Vec3 extents = Vec3::Ones();    // bounding box [0, extents], m
  int event_count = 8;
  std::vector<Vec3> waypoints;    // custom layouts only, world frame
  double inset = 0.1;             // loop margin, fraction of each horizontal extent
  double low_height = 0.1;        // fractions of the vertical extent
  double high_height = 0.9;
  double jitter = 0.2;            // uniform waypoint jitter, fraction of each extent

  // 1: 3x3x3 m, 8 events; 2: 2x6x2 m, 10 events; 3: 4x4x2 m, 14 events.
  static TrajectorySpec named(int id);
  static TrajectorySpec custom(std::vector<Vec3> waypoints);
  void validate() const;
};

// Rectangular circuit inset in the box, first half of the events at the low
// height and the rest at the high height, each waypoint jittered uniformly.
std::vector<Vec3> loop_waypoints(const TrajectorySpec& spec, Rng& rng);

struct Scenario {
  std::vector<MicrophoneState> mics;  // Sound frame, offset of mic 0 is zero
  EventTrajectory traj;               // Sound frame
  frames::RigidTransform sound_from_world;
  frames::SoundFrameState truth_state() const;
};

// Microphones uniform in the box, offsets uniform in [-0.1, 0.1] s relative to
// microphone 0, drifts uniform in [-1e-4, 1e-4], intervals uniform in [1, 2] s.
// Degenerate draws (collinear anchors, microphone on top of an event) are
// re-sampled; throws DegenerateGeometryError after 100 attempts.
Scenario random_configuration(const TrajectorySpec& spec, int mic_count, Rng& rng);

// Free position coordinates of `truth` plus N(0, sigma_init^2); clocks zero.
frames::SoundFrameState perturbed_initialization(const frames::SoundFrameState& truth,
                                                 double sigma_init, Rng& rng);

// Microphones and events uniform in the box (mapped into the Sound frame with
// `sound_from_world`); clocks zero.
frames::SoundFrameState random_initialization(const TrajectorySpec& spec, int mic_count,
                                              int event_count,
                                              const frames::RigidTransform& sound_from_world,
                                              Rng& rng);

struct ExperimentGrid {
  std::vector<int> trajectories{1, 2, 3};
  std::vector<int> mic_counts{6};
  // One entry per initialization level: sigma_init for trajectories 1, 2, 3.
  // Empty means random initialization in the trajectory box.
  std::vector<std::array<double, 3>> init_noise_sds;
  std::vector<double> tdoa_noise_sds{1e-4};
  int trials_per_cell = 200;  // per trajectory
  double sigma_odo = 0.01;
  std::uint64_t seed = 1;
  std::vector<Mode> modes{Mode::hybrid, Mode::tdoa_m_only};
  PhysicalConstants consts;
  solver::SolverOptions solver_options;
  bool compute_crlb = true;

  void validate() const;

  static ExperimentGrid part_a();   // N in {4, 6, 8, 10}, random init
  static ExperimentGrid part_b();   // sigma_init 0/1/2/3 m (traj 1), 0/2/4/6 m (traj 2, 3)
  static ExperimentGrid part_cd();  // sigma_tdoa in {5e-5, 1e-4, 5e-4} s, random init
};

struct ModeResult {
  Mode mode = Mode::hybrid;
  bool converged = false;
  int iterations = 0;
  double loc_err = 0.0;
  double off_err = 0.0;
  double dri_err = 0.0;
  crlb::DCrlb d_crlb;
  bool crlb_degenerate = false;
  std::string failure;  // non-empty when the solve or CRLB threw
};

struct TrialRecord {
  std::uint64_t seed = 0;
  int trajectory = 0;
  int mic_count = 0;
  int event_count = 0;
  int init_level = -1;  // -1 for random initialization
  double sigma_init = 0.0;
  double sigma_tdoa = 0.0;
  double sigma_odo = 0.0;
  int trial = 0;
  std::vector<ModeResult> results;
};

struct TrialSetup {
  int trajectory = 1;
  int mic_count = 6;
  int init_level = -1;
  double sigma_init = 0.0;
  double sigma_tdoa = 1e-4;
  int trial = 0;
  std::uint64_t seed = 0;
};

// One configuration, one noise draw, one initialization shared by all modes.
TrialRecord run_trial(const TrialSetup& setup, const ExperimentGrid& grid);

struct Summary {
  int count = 0;  // finite samples
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr() const { return q3 - q1; }
  double mean = 0.0;
};

// Linear-interpolated quantiles over the finite values.
Summary summarize(std::vector<double> values);

struct AggregateRow {
  int mic_count = 0;
  int init_level = -1;
  double sigma_tdoa = 0.0;
  Mode mode = Mode::hybrid;
  int trials = 0;
  int converged = 0;
  int failures = 0;
  Summary loc;
  Summary off;
  Summary dri;
  double mean_d_crlb_loc = 0.0;
  double mean_d_crlb_off = 0.0;
  double mean_d_crlb_dri = 0.0;
};

// Trajectories are pooled; rows are keyed by (N, init level, sigma_tdoa, mode)
// and sorted by that key.
std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records);

struct GridResult {
  std::vector<TrialRecord> trials;  // in cell/trial order
  std::vector<AggregateRow> aggregates;
};

std::vector<TrialSetup> enumerate_trials(const ExperimentGrid& grid);

// Runs every trial on up to `jobs` threads; output order and content do not
// depend on `jobs`.
GridResult run_grid(const ExperimentGrid& grid, int jobs = 1);

}  // namespace asyncmic::sim
