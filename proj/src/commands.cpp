#include "asyncmic/commands.hpp"

#include "asyncmic/crlb.hpp"
#include "asyncmic/errors.hpp"
#include "asyncmic/frames.hpp"
#include "asyncmic/io.hpp"
#include "asyncmic/model.hpp"
#include "asyncmic/noise.hpp"
#include "asyncmic/signal.hpp"
#include "asyncmic/sim.hpp"
#include "asyncmic/solver.hpp"
#include "asyncmic/wav.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

namespace asyncmic::cli {
namespace {

namespace fs = std::filesystem;

class UsageError : public Error {
 public:
  using Error::Error;
};

void require_input(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw IoError("input file not found: " + path.string());
}

void require_output(const fs::path& path) {
  const auto parent = fs::absolute(path).parent_path();
  if (!fs::is_directory(parent)) throw IoError("output directory does not exist: " + parent.string());
}

std::string shape(const MatX& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

// ---- simulate ----

struct SimulateArgs {
  int trajectory = 1;
  int mics = 6;
  double sigma_tdoa = 1e-4;
  double sigma_odo = 0.01;
  double sound_speed = kDefaultSoundSpeed;
  std::uint64_t seed = 1;
  std::optional<double> init_sigma;
  std::string out;
  std::string wav;
  double sample_rate = 16000.0;
  double lead_in = 0.5;
  double audio_noise = 0.0;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  require_output(a.out);
  if (!a.wav.empty()) require_output(a.wav);
  const auto spec = sim::TrajectorySpec::named(a.trajectory);
  PhysicalConstants consts{a.sound_speed};
  consts.validate();

  sim::Rng rng(a.seed);
  const auto scenario = sim::random_configuration(spec, a.mics, rng);
  const std::uint64_t noise_seed = rng();
  const std::uint64_t audio_seed = rng();

  io::ProblemFile file;
  file.mic_count = a.mics;
  file.event_count = spec.event_count;
  file.consts = consts;
  file.intervals = scenario.traj.intervals;
  file.measurements = model::simulate_measurements(scenario.mics, scenario.traj, consts,
                                                   {a.sigma_tdoa, a.sigma_odo}, noise_seed);
  file.truth = io::GroundTruth{scenario.mics, scenario.traj.positions};
  if (a.init_sigma) {
    file.initial_state = sim::perturbed_initialization(scenario.truth_state(), *a.init_sigma, rng);
  }
  io::write_problem(file, a.out);
  out << "wrote " << a.out << ": N=" << file.mic_count << " K=" << file.event_count
      << " tdoa_s " << shape(file.measurements.tdoa_s) << " tdoa_m " << shape(file.measurements.tdoa_m)
      << " odometry " << shape(file.measurements.odometry) << "\n";

  if (!a.wav.empty()) {
    const auto clip = signal::synthesize_scene(scenario.mics, scenario.traj, consts, signal::ChirpSpec{},
                                               a.sample_rate, a.lead_in, a.audio_noise, audio_seed);
    wav::write_wav(a.wav, clip, wav::SampleFormat::float32);
    out << "wrote " << a.wav << ": " << clip.channel_count() << " channels, " << clip.frame_count()
        << " frames at " << clip.sample_rate << " Hz\n";
  }
  return kExitOk;
}

// ---- calibrate ----

struct CalibrateArgs {
  std::string problem;
  std::string out;
  std::string mode = "hybrid";
  std::string init = "auto";
  double init_sigma = 0.1;
  std::vector<double> box{3.0, 3.0, 3.0};
  std::uint64_t seed = 1;
  solver::SolverOptions options;
  bool with_crlb = false;
};

frames::SoundFrameState choose_initialization(const CalibrateArgs& a, const io::ProblemFile& file,
                                              std::ostream& out) {
  std::string how = a.init;
  if (how == "auto") how = file.initial_state ? "file" : file.truth ? "truth" : "random";
  sim::Rng rng(a.seed);
  if (how == "file") {
    if (!file.initial_state) throw MissingBlockError("problem file has no initial_state");
    out << "initialization: from file\n";
    return *file.initial_state;
  }
  if (how == "truth") {
    if (!file.truth) throw MissingBlockError("problem file has no truth block to perturb");
    out << "initialization: truth perturbed by " << a.init_sigma << " m\n";
    const auto truth = frames::pack_state(file.truth->mics, file.truth_trajectory());
    return sim::perturbed_initialization(truth, a.init_sigma, rng);
  }
  sim::TrajectorySpec spec;
  spec.extents = Vec3(a.box[0], a.box[1], a.box[2]);
  spec.event_count = file.event_count;
  out << "initialization: random in " << a.box[0] << " x " << a.box[1] << " x " << a.box[2] << " m\n";
  return sim::random_initialization(spec, file.mic_count, file.event_count, frames::RigidTransform{}, rng);
}

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  require_input(a.problem);
  require_output(a.out);
  const Mode mode = mode_from_string(a.mode);
  const auto file = io::read_problem(a.problem);
  io::require_blocks(file, mode);
  const auto init = choose_initialization(a, file, out);
  const auto problem = solver::make_problem(file.measurements, file.intervals, file.consts, mode, init);
  const auto sol = solver::solve_gauss_newton(problem, a.options);

  io::ReportFile report;
  report.mode = mode;
  report.consts = file.consts;
  report.mic_count = file.mic_count;
  report.event_count = file.event_count;
  report.solution = io::SolutionSummary{sol.state_sound, sol.state_mic, sol.iterations,
                                        sol.converged, sol.final_cost, sol.cost_history};
  report.residuals = io::residual_stats(problem, sol.state_sound);
  if (file.truth) {
    report.errors = solver::evaluate_errors(sol, file.truth->mics);
    if (a.with_crlb) {
      const auto truth = frames::pack_state(file.truth->mics, file.truth_trajectory());
      const auto c = crlb::compute_crlb(truth, file.intervals, file.consts, mode, problem.weights);
      report.crlb = io::CrlbSummary{c.indicators, c.degenerate, c.condition, c.crlb_mic};
    }
  }
  io::write_report(report, a.out);

  out << "mode " << to_string(mode) << ": " << (sol.converged ? "converged" : "did not converge")
      << " after " << sol.iterations << " iterations, cost " << sol.final_cost << "\n";
  if (report.errors) {
    out << "errors: loc " << report.errors->loc << " m, off " << report.errors->off << " s, dri "
        << report.errors->dri << "\n";
  }
  out << "wrote " << a.out << "\n";
  return sol.converged ? kExitOk : kExitNotConverged;
}

// ---- crlb ----

struct CrlbArgs {
  std::string problem;
  std::string out;
  std::string mode = "hybrid";
  bool strict = false;
};

int cmd_crlb(const CrlbArgs& a, std::ostream& out) {
  require_input(a.problem);
  if (!a.out.empty()) require_output(a.out);
  const Mode mode = mode_from_string(a.mode);
  const auto file = io::read_problem(a.problem);
  if (!file.truth) throw MissingBlockError("crlb needs a problem file with a truth block");
  const auto truth = frames::pack_state(file.truth->mics, file.truth_trajectory());
  const auto weights = solver::WeightSpec::from_measurements(file.measurements);
  const auto c = crlb::compute_crlb(truth, file.intervals, file.consts, mode, weights);
  if (a.strict && c.degenerate) {
    throw UnobservableError("Fisher information is near-singular (condition " + std::to_string(c.condition) + ")",
                            -1, static_cast<int>(c.fisher.rows()));
  }
  out << "D_CRLB (" << to_string(mode) << "): loc " << c.indicators.loc << " m, off " << c.indicators.off
      << " s, dri " << c.indicators.dri << (c.degenerate ? " [degenerate]" : "") << "\n";
  if (!a.out.empty()) {
    io::ReportFile report;
    report.mode = mode;
    report.consts = file.consts;
    report.mic_count = file.mic_count;
    report.event_count = file.event_count;
    report.crlb = io::CrlbSummary{c.indicators, c.degenerate, c.condition, c.crlb_mic};
    io::write_report(report, a.out);
    out << "wrote " << a.out << "\n";
  }
  return kExitOk;
}

// ---- estimate-noise ----

struct NoiseArgs {
  std::string problem;
  std::string out;
};

int cmd_estimate_noise(const NoiseArgs& a, std::ostream& out) {
  require_input(a.problem);
  if (!a.out.empty()) require_output(a.out);
  const auto file = io::read_problem(a.problem);
  if (!file.truth) throw MissingBlockError("estimate-noise needs a problem file with a truth block");
  const auto est = noise::estimate_noise(file.measurements, file.truth->mics, file.truth_trajectory(), file.consts);
  out << "sigma_s " << est.s.sigma_s << " s, sigma_m " << est.m.sigma_m << " s, cases "
      << noise::case_labels(noise::classify_noise_case(est.s.sigma_s, est.m.sigma_m)) << "\n";
  if (!a.out.empty()) {
    io::ReportFile report;
    report.consts = file.consts;
    report.mic_count = file.mic_count;
    report.event_count = file.event_count;
    report.noise = est;
    io::write_report(report, a.out);
    out << "wrote " << a.out << "\n";
  }
  return kExitOk;
}

// ---- extract ----

struct ExtractArgs {
  std::string wav;
  std::string out;
  std::string template_path;
  int events = 0;
  int reference = 0;
  std::vector<double> intervals;
  double sound_speed = kDefaultSoundSpeed;
  double sigma_tdoa = 1e-4;
  double sigma_odo = 0.01;
  signal::ExtractionConfig config;
};

int cmd_extract(const ExtractArgs& a, std::ostream& out) {
  require_input(a.wav);
  require_output(a.out);
  if (!a.template_path.empty()) require_input(a.template_path);
  if (a.template_path.empty() && a.intervals.empty()) {
    throw UsageError("extract needs --template or --intervals for the emission gaps");
  }
  const auto clip = wav::read_wav(a.wav);
  if (a.reference < 0 || a.reference >= clip.channel_count()) {
    throw UsageError("--reference " + std::to_string(a.reference) + " is not a channel of a " +
                     std::to_string(clip.channel_count()) + "-channel file");
  }
  if (clip.channel_count() < 2) throw UsageError("extract needs at least 2 channels for TDOA-M");

  io::ProblemFile file;
  if (!a.template_path.empty()) {
    file = io::read_problem(a.template_path);
    if (file.mic_count != clip.channel_count() || file.event_count != a.events) {
      throw SchemaError("template has N=" + std::to_string(file.mic_count) + " K=" +
                        std::to_string(file.event_count) + " but the audio has " +
                        std::to_string(clip.channel_count()) + " channels and --events " + std::to_string(a.events));
    }
  } else {
    file.mic_count = clip.channel_count();
    file.event_count = a.events;
    file.consts.sound_speed = a.sound_speed;
    file.intervals = a.intervals;
    file.measurements.sigma_tdoa = a.sigma_tdoa;
    file.measurements.sigma_odo = a.sigma_odo;
  }

  // Channel order is microphone order; the reference becomes microphone 0.
  std::vector<int> order{a.reference};
  for (int c = 0; c < clip.channel_count(); ++c) {
    if (c != a.reference) order.push_back(c);
  }
  MatX tdoa_s(clip.channel_count(), a.events - 1);
  for (int i = 0; i < clip.channel_count(); ++i) {
    const auto delays = signal::extract_tdoa_s(clip.channels[order[i]], clip.sample_rate, a.events, a.config);
    for (int j = 0; j + 1 < a.events; ++j) tdoa_s(i, j) = delays[j].total();
  }
  const auto m = signal::extract_tdoa_m(clip, a.events, a.reference, a.config);
  file.measurements.tdoa_s = tdoa_s;
  file.measurements.tdoa_m = m.seconds;
  file.initial_state.reset();
  io::write_problem(file, a.out);
  out << "extracted " << clip.channel_count() << " channels, " << a.events << " events: tdoa_s "
      << shape(tdoa_s) << ", tdoa_m " << shape(m.seconds) << "\nwrote " << a.out << "\n";
  return kExitOk;
}

// ---- run-grid ----

struct GridArgs {
  std::string config;
  std::string preset;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string trials_out;
  std::string aggregate_out;
  bool no_crlb = false;
};

int cmd_run_grid(const GridArgs& a, std::ostream& out) {
  if (!a.config.empty() && !a.preset.empty()) throw UsageError("use either --config or --preset, not both");
  require_output(a.trials_out);
  if (!a.aggregate_out.empty()) require_output(a.aggregate_out);
  sim::ExperimentGrid grid;
  if (!a.config.empty()) {
    require_input(a.config);
    grid = io::read_grid(a.config);
  } else if (a.preset == "part-a") {
    grid = sim::ExperimentGrid::part_a();
  } else if (a.preset == "part-b") {
    grid = sim::ExperimentGrid::part_b();
  } else if (a.preset == "part-cd") {
    grid = sim::ExperimentGrid::part_cd();
  }
  if (a.trials) grid.trials_per_cell = *a.trials;
  if (a.seed) grid.seed = *a.seed;
  if (a.no_crlb) grid.compute_crlb = false;
  grid.validate();

  const auto result = sim::run_grid(grid, a.jobs);
  io::write_trial_csv(result.trials, grid.consts.sound_speed, a.trials_out);
  if (!a.aggregate_out.empty()) io::write_aggregate_csv(result.aggregates, grid.consts.sound_speed, a.aggregate_out);

  out << result.trials.size() << " trials\n";
  out << "N  init  sigma_tdoa  mode         conv    loc_median  off_median  dri_median  d_crlb_loc\n";
  for (const auto& r : result.aggregates) {
    out << r.mic_count << "  " << r.init_level << "  " << r.sigma_tdoa << "  " << to_string(r.mode) << "  "
        << r.converged << "/" << r.trials << "  " << r.loc.median << "  " << r.off.median << "  " << r.dri.median
        << "  " << r.mean_d_crlb_loc << "\n";
  }
  out << "wrote " << a.trials_out << (a.aggregate_out.empty() ? "" : " and " + a.aggregate_out) << "\n";
  return kExitOk;
}

void add_solver_flags(CLI::App* cmd, solver::SolverOptions& o) {
  cmd->add_option("--max-iter", o.max_iter, "Gauss-Newton iteration limit (count)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--step-tol", o.step_tol, "convergence threshold on the scaled step norm (dimensionless)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--cost-tol", o.cost_tol, "convergence threshold on the relative cost change (dimensionless)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

void add_extraction_flags(CLI::App* cmd, signal::ExtractionConfig& c) {
  cmd->add_option("--frame-len", c.frame_len, "energy frame length (samples)")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--hop", c.hop, "energy frame hop (samples)")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--threshold", c.energy_threshold_ratio, "onset threshold as a fraction of the peak frame energy (ratio)")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--signal-len", c.signal_len, "calibration signal length (samples)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--max-delay", c.max_expected_delay, "largest expected delay inside a window (samples; 0 = frame length)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--window-len", c.window_len, "capture window length (samples; 0 = signal + 2 x max delay)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--max-lag", c.max_lag, "GCC-PHAT lag search bound (samples; 0 = window / 4)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

int exit_code_for(const std::exception& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const DimensionError*>(&e)) return kExitUsage;
  if (const auto* u = dynamic_cast<const UnobservableError*>(&e)) {
    if (u->rank() >= 0) err << "rank " << u->rank() << " of " << u->dimension() << "\n";
    return kExitDegenerate;
  }
  if (dynamic_cast<const DegenerateGeometryError*>(&e)) return kExitDegenerate;
  return kExitIo;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Asynchronous microphone array calibration with hybrid TDOA", "asyncmic"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "print help for every subcommand");
  const std::vector<std::string> modes{"hybrid", "tdoa-m-only"};

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "simulate a problem file with embedded ground truth");
  simulate->add_option("--trajectory", sim_args.trajectory, "named trajectory: 1 (3x3x3 m, K=8), 2 (2x6x2 m, K=10), 3 (4x4x2 m, K=14)")
      ->check(CLI::IsMember({1, 2, 3}))
      ->capture_default_str();
  simulate->add_option("--mics", sim_args.mics, "microphone count N (count, >= 2)")->check(CLI::Range(2, 1000))->capture_default_str();
  simulate->add_option("--sigma-tdoa", sim_args.sigma_tdoa, "TDOA noise SD (seconds)")->check(CLI::NonNegativeNumber)->capture_default_str();
  simulate->add_option("--sigma-odo", sim_args.sigma_odo, "odometry noise SD per axis (meters)")->check(CLI::NonNegativeNumber)->capture_default_str();
  simulate->add_option("--sound-speed", sim_args.sound_speed, "speed of sound (m/s)")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--seed", sim_args.seed, "random seed (integer)")->capture_default_str();
  simulate->add_option("--init-sigma", sim_args.init_sigma, "embed an initial state: truth positions plus Gaussian noise of this SD (meters)")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--out", sim_args.out, "output problem file (path, JSON)")->required();
  simulate->add_option("--wav", sim_args.wav, "also render the scene as multi-channel audio (path, WAV)");
  simulate->add_option("--sample-rate", sim_args.sample_rate, "audio sample rate (Hz)")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--lead-in", sim_args.lead_in, "silence before the first emission (seconds)")->check(CLI::NonNegativeNumber)->capture_default_str();
  simulate->add_option("--audio-noise", sim_args.audio_noise, "white noise SD added to the audio (amplitude, full scale 1)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  CalibrateArgs cal_args;
  auto* calibrate = app.add_subcommand("calibrate", "estimate microphone and event parameters from a problem file");
  calibrate->add_option("--problem", cal_args.problem, "input problem file (path, JSON)")->required();
  calibrate->add_option("--out", cal_args.out, "output report file (path, JSON)")->required();
  calibrate->add_option("--mode", cal_args.mode, "measurement set: hybrid or tdoa-m-only")->check(CLI::IsMember(modes))->capture_default_str();
  calibrate->add_option("--init", cal_args.init, "initial state: auto, file, truth (perturbed) or random")
      ->check(CLI::IsMember({"auto", "file", "truth", "random"}))
      ->capture_default_str();
  calibrate->add_option("--init-sigma", cal_args.init_sigma, "perturbation SD for --init truth (meters)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  calibrate->add_option("--box", cal_args.box, "box for --init random, Sound frame (meters, 3 values)")
      ->expected(3)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  calibrate->add_option("--seed", cal_args.seed, "random seed for the initialization (integer)")->capture_default_str();
  calibrate->add_flag("--crlb", cal_args.with_crlb, "also write the CRLB summary when the file has ground truth");
  add_solver_flags(calibrate, cal_args.options);

  CrlbArgs crlb_args;
  auto* crlb_cmd = app.add_subcommand("crlb", "Cramer-Rao lower bound at the embedded ground truth");
  crlb_cmd->add_option("--problem", crlb_args.problem, "input problem file with truth (path, JSON)")->required();
  crlb_cmd->add_option("--out", crlb_args.out, "output report file (path, JSON)");
  crlb_cmd->add_option("--mode", crlb_args.mode, "measurement set: hybrid or tdoa-m-only")->check(CLI::IsMember(modes))->capture_default_str();
  crlb_cmd->add_flag("--strict", crlb_args.strict, "fail with exit code 4 instead of using a pseudo-inverse on near-singular information");

  NoiseArgs noise_args;
  auto* noise_cmd = app.add_subcommand("estimate-noise", "estimate TDOA-S and TDOA-M noise SDs against ground truth");
  noise_cmd->add_option("--problem", noise_args.problem, "input problem file with truth (path, JSON)")->required();
  noise_cmd->add_option("--out", noise_args.out, "output report file (path, JSON)");

  ExtractArgs ex_args;
  auto* extract = app.add_subcommand("extract", "extract TDOA-S and TDOA-M measurements from multi-channel audio");
  extract->add_option("--wav", ex_args.wav, "input audio, one channel per microphone (path, WAV)")->required();
  extract->add_option("--events", ex_args.events, "number of sound events K (count)")->check(CLI::Range(4, 100000))->required();
  extract->add_option("--out", ex_args.out, "output problem file (path, JSON)")->required();
  extract->add_option("--reference", ex_args.reference, "reference channel for TDOA-M (index, 0-based)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  extract->add_option("--template", ex_args.template_path, "problem file supplying intervals, odometry, noise SDs and truth (path, JSON)");
  extract->add_option("--intervals", ex_args.intervals, "emission gaps when no template is given (seconds, K-1 values)")
      ->delimiter(',');
  extract->add_option("--sound-speed", ex_args.sound_speed, "speed of sound without a template (m/s)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  extract->add_option("--sigma-tdoa", ex_args.sigma_tdoa, "TDOA noise SD recorded without a template (seconds)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  extract->add_option("--sigma-odo", ex_args.sigma_odo, "odometry noise SD recorded without a template (meters)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  add_extraction_flags(extract, ex_args.config);

  GridArgs grid_args;
  auto* grid_cmd = app.add_subcommand("run-grid", "Monte Carlo comparison of hybrid and TDOA-M-only calibration");
  grid_cmd->add_option("--config", grid_args.config, "grid configuration (path, JSON)");
  grid_cmd->add_option("--preset", grid_args.preset, "built-in grid: part-a (N sweep), part-b (init noise), part-cd (TDOA noise)")
      ->check(CLI::IsMember({"part-a", "part-b", "part-cd"}));
  grid_cmd->add_option("--trials", grid_args.trials, "trials per cell and trajectory (count)")->check(CLI::PositiveNumber);
  grid_cmd->add_option("--seed", grid_args.seed, "grid seed (integer)");
  grid_cmd->add_option("--jobs", grid_args.jobs, "worker threads (count)")->check(CLI::PositiveNumber)->capture_default_str();
  grid_cmd->add_option("--trials-out", grid_args.trials_out, "per-trial output (path, CSV)")->required();
  grid_cmd->add_option("--aggregate-out", grid_args.aggregate_out, "aggregate output (path, CSV)");
  grid_cmd->add_flag("--no-crlb", grid_args.no_crlb, "skip the CRLB computation per trial");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim_args, out);
    if (*calibrate) return cmd_calibrate(cal_args, out);
    if (*crlb_cmd) return cmd_crlb(crlb_args, out);
    if (*noise_cmd) return cmd_estimate_noise(noise_args, out);
    if (*extract) return cmd_extract(ex_args, out);
    if (*grid_cmd) return cmd_run_grid(grid_args, out);
  } catch (const Error& e) {
    return exit_code_for(e, err);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace asyncmic::cli
