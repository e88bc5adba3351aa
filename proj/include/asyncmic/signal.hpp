#pragma once

// Delay extraction from raw audio: short-time-energy onset detection for the
// rough delay, GCC-PHAT for the precise delay, and the synthetic chirp scenes
// used to validate both.

#include "asyncmic/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace asyncmic::signal {

struct AudioClip {
  std::vector<std::vector<double>> channels;  // amplitudes in [-1, 1]
  double sample_rate = 16000.0;               // Hz

  int channel_count() const { return static_cast<int>(channels.size()); }
  std::size_t frame_count() const { return channels.empty() ? 0 : channels.front().size(); }
  void validate() const;  // equal channel lengths, positive rate
};

// Delays are kept in whole samples so total == rough + precise holds exactly.
struct DelayResult {
  long rough_samples = 0;    // difference of window anchors (multiple of the hop)
  long precise_samples = 0;  // GCC-PHAT lag between the aligned windows
  double sample_rate = 16000.0;

  long total_samples() const { return rough_samples + precise_samples; }
  double rough() const { return static_cast<double>(rough_samples) / sample_rate; }
  double precise() const { return static_cast<double>(precise_samples) / sample_rate; }
  double total() const { return static_cast<double>(total_samples()) / sample_rate; }
};

struct ChirpSpec {
  double duration = 0.1;  // s
  double f0 = 500.0;      // Hz
  double f1 = 4000.0;     // Hz
};

// Linear sweep f0 -> f1, peak-normalized to 1. Throws DegenerateInputError
// when either frequency is outside (0, sample_rate/2).
AudioClip synthesize_chirp(double duration, double f0, double f1, double sample_rate);

// Adds amplitude * chirp starting at a (possibly fractional) onset time, evaluated analytically.
void add_chirp(std::vector<double>& samples, double sample_rate, double onset_seconds,
               const ChirpSpec& chirp, double amplitude = 1.0);

// Start index of the first frame of every maximal run of frames whose energy
// exceeds energy_threshold_ratio * (largest frame energy). Empty for silence.
std::vector<long> detect_rough_endpoints(std::span<const double> samples, int frame_len, int hop,
                                         double energy_threshold_ratio);

struct GccResult {
  long lag_samples = 0;  // positive when window_b lags window_a
  double lag_seconds = 0.0;
  double peak = 0.0;
};

// Phase-transform weighted cross-correlation, zero-padded to a power of two of
// at least twice the window length. Throws DegenerateInputError for all-zero windows.
GccResult gcc_phat(std::span<const double> window_a, std::span<const double> window_b,
                   double sample_rate, int max_lag);

struct ExtractionConfig {
  int frame_len = 256;
  int hop = 128;
  double energy_threshold_ratio = 0.1;
  int signal_len = 1600;          // samples in one calibration signal
  int max_expected_delay = 0;     // samples; 0 -> frame_len
  int window_len = 0;             // 0 -> signal_len + 2 * max_expected_delay
  int max_lag = 0;                // 0 -> window_len / 4

  int effective_window() const;
  int effective_max_lag() const;
};

// K-1 inter-event delays on one channel. Throws ExtractionError when the
// detected event count differs from `event_count`.
std::vector<DelayResult> extract_tdoa_s(std::span<const double> samples, double sample_rate,
                                        int event_count, const ExtractionConfig& config = {});

// Inter-channel delays per event, against `reference_channel`. Rows follow the
// channel order with the reference removed; columns are events.
struct TdoaMExtraction {
  std::vector<std::vector<DelayResult>> delays;
  MatX seconds;
};
TdoaMExtraction extract_tdoa_m(const AudioClip& clip, int event_count, int reference_channel,
                               const ExtractionConfig& config = {});

// Renders one channel per microphone with a chirp at every simplified arrival
// time, shifted by `lead_in` seconds, plus white Gaussian noise of SD `noise_sd`.
AudioClip synthesize_scene(std::span<const MicrophoneState> mics, const EventTrajectory& traj,
                           const PhysicalConstants& consts, const ChirpSpec& chirp,
                           double sample_rate, double lead_in, double noise_sd,
                           std::uint64_t seed);

}  // namespace asyncmic::signal
