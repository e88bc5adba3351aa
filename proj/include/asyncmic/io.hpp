#pragma once

// On-disk formats.
//
// Problems, reports and grid configs are JSON objects tagged with
// "schema" and "version"; times in seconds, distances in meters, drift
// dimensionless. Trial and aggregate tables are CSV with a leading
// "# schema=... version=... sound_speed=..." line.
// Writes go to "<path>.tmp" and are renamed into place.

#include "asyncmic/crlb.hpp"
#include "asyncmic/frames.hpp"
#include "asyncmic/noise.hpp"
#include "asyncmic/sim.hpp"
#include "asyncmic/solver.hpp"
#include "asyncmic/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace asyncmic::io {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kProblemSchema = "asyncmic.problem";
inline constexpr const char* kReportSchema = "asyncmic.report";
inline constexpr const char* kGridSchema = "asyncmic.grid";
inline constexpr const char* kTrialSchema = "asyncmic.trials";
inline constexpr const char* kAggregateSchema = "asyncmic.aggregate";

struct GroundTruth {
  std::vector<MicrophoneState> mics;  // Sound frame, offsets relative to mic 0
  std::vector<Vec3> events;           // Sound frame
};

struct ProblemFile {
  int mic_count = 0;
  int event_count = 0;
  PhysicalConstants consts;
  std::vector<double> intervals;
  MeasurementSet measurements;
  std::optional<GroundTruth> truth;
  std::optional<frames::SoundFrameState> initial_state;

  EventTrajectory truth_trajectory() const;  // requires truth
  // Throws DimensionError naming the inconsistent block.
  void validate() const;
};

ProblemFile read_problem(const std::filesystem::path& path);
void write_problem(const ProblemFile& file, const std::filesystem::path& path);
ProblemFile parse_problem(const std::string& text);
std::string format_problem(const ProblemFile& file);

// Throws MissingBlockError for blocks `mode` needs but `file` lacks.
void require_blocks(const ProblemFile& file, Mode mode);

struct ResidualStats {
  std::optional<double> tdoa_s_rms;  // s; absent in tdoa-m-only mode
  double tdoa_m_rms = 0.0;           // s
  double odometry_rms = 0.0;         // m
};

// Unweighted RMS of each residual block at `state`.
ResidualStats residual_stats(const solver::CalibrationProblem& problem,
                             const frames::SoundFrameState& state);

struct SolutionSummary {
  frames::SoundFrameState state_sound;
  frames::MicFrameState state_mic;
  int iterations = 0;
  bool converged = false;
  double final_cost = 0.0;
  std::vector<double> cost_history;
};

struct CrlbSummary {
  crlb::DCrlb d_crlb;
  bool degenerate = false;
  double condition = 0.0;
  MatX crlb_mic;
};

struct ReportFile {
  Mode mode = Mode::hybrid;
  PhysicalConstants consts;
  int mic_count = 0;
  int event_count = 0;
  std::optional<SolutionSummary> solution;
  std::optional<ResidualStats> residuals;
  std::optional<solver::ErrorMetrics> errors;
  std::optional<CrlbSummary> crlb;
  std::optional<noise::NoiseEstimate> noise;
};

ReportFile read_report(const std::filesystem::path& path);
void write_report(const ReportFile& report, const std::filesystem::path& path);
ReportFile parse_report(const std::string& text);
std::string format_report(const ReportFile& report);

// Missing keys take the ExperimentGrid defaults.
sim::ExperimentGrid read_grid(const std::filesystem::path& path);
void write_grid(const sim::ExperimentGrid& grid, const std::filesystem::path& path);
sim::ExperimentGrid parse_grid(const std::string& text);
std::string format_grid(const sim::ExperimentGrid& grid);

// One row per trial per mode, columns in `trial_csv_columns()` order.
const std::vector<std::string>& trial_csv_columns();
std::string format_trial_csv(const std::vector<sim::TrialRecord>& records, double sound_speed);
void write_trial_csv(const std::vector<sim::TrialRecord>& records, double sound_speed,
                     const std::filesystem::path& path);
std::vector<sim::TrialRecord> parse_trial_csv(const std::string& text);
std::vector<sim::TrialRecord> read_trial_csv(const std::filesystem::path& path);

const std::vector<std::string>& aggregate_csv_columns();
std::string format_aggregate_csv(const std::vector<sim::AggregateRow>& rows, double sound_speed);
void write_aggregate_csv(const std::vector<sim::AggregateRow>& rows, double sound_speed,
                         const std::filesystem::path& path);

// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double value);

std::string read_text(const std::filesystem::path& path);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace asyncmic::io
