#include "asyncmic/signal.hpp"

#include "asyncmic/errors.hpp"
#include "asyncmic/model.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <string>

namespace asyncmic::signal {
namespace {

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {}
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

struct FftwPlan {
  explicit FftwPlan(fftw_plan p) : plan(p) {}
  ~FftwPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
  fftw_plan plan;
};

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Forward real FFT of `x` zero-padded to `n`.
std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t n) {
  FftwBuffer in(sizeof(double) * n);
  FftwBuffer out(sizeof(fftw_complex) * (n / 2 + 1));
  auto* in_d = static_cast<double*>(in.ptr);
  auto* out_c = static_cast<fftw_complex*>(out.ptr);
  std::unique_ptr<FftwPlan> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = std::make_unique<FftwPlan>(
        fftw_plan_dft_r2c_1d(static_cast<int>(n), in_d, out_c, FFTW_ESTIMATE));
  }
  std::fill(in_d, in_d + n, 0.0);
  std::copy(x.begin(), x.end(), in_d);
  fftw_execute(plan->plan);
  std::vector<std::complex<double>> spec(n / 2 + 1);
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] = {out_c[k][0], out_c[k][1]};
  return spec;
}

// Inverse of rfft (unnormalized, as FFTW).
std::vector<double> irfft(const std::vector<std::complex<double>>& spec, std::size_t n) {
  FftwBuffer in(sizeof(fftw_complex) * (n / 2 + 1));
  FftwBuffer out(sizeof(double) * n);
  auto* in_c = static_cast<fftw_complex*>(in.ptr);
  auto* out_d = static_cast<double*>(out.ptr);
  std::unique_ptr<FftwPlan> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = std::make_unique<FftwPlan>(
        fftw_plan_dft_c2r_1d(static_cast<int>(n), in_c, out_d, FFTW_ESTIMATE));
  }
  for (std::size_t k = 0; k < spec.size(); ++k) {
    in_c[k][0] = spec[k].real();
    in_c[k][1] = spec[k].imag();
  }
  fftw_execute(plan->plan);
  return {out_d, out_d + n};
}

void check_nyquist(double f, double sample_rate) {
  if (!(f > 0.0) || !(f < sample_rate / 2.0)) {
    throw DegenerateInputError("chirp frequency " + std::to_string(f) +
                               " Hz is outside (0, sample_rate/2)");
  }
}

double chirp_value(double t, const ChirpSpec& chirp) {
  const double k = (chirp.f1 - chirp.f0) / chirp.duration;
  return std::sin(2.0 * std::numbers::pi * (chirp.f0 * t + 0.5 * k * t * t));
}

// Window of `len` samples starting at `start`, zero beyond the clip.
std::vector<double> window_at(std::span<const double> samples, long start, int len) {
  std::vector<double> w(len, 0.0);
  for (int n = 0; n < len; ++n) {
    const long idx = start + n;
    if (idx >= 0 && idx < static_cast<long>(samples.size())) w[n] = samples[idx];
  }
  return w;
}

}  // namespace

void AudioClip::validate() const {
  if (!(sample_rate > 0.0)) throw DegenerateInputError("sample rate must be positive");
  for (const auto& ch : channels) {
    if (ch.size() != frame_count()) throw DegenerateInputError("channels have different lengths");
  }
}

AudioClip synthesize_chirp(double duration, double f0, double f1, double sample_rate) {
  check_nyquist(f0, sample_rate);
  check_nyquist(f1, sample_rate);
  if (duration < 0.0) throw DegenerateInputError("chirp duration must be nonnegative");
  AudioClip clip;
  clip.sample_rate = sample_rate;
  const auto count = static_cast<std::size_t>(std::llround(duration * sample_rate));
  std::vector<double> x(count);
  const ChirpSpec spec{duration, f0, f1};
  double peak = 0.0;
  for (std::size_t n = 0; n < count; ++n) {
    x[n] = chirp_value(static_cast<double>(n) / sample_rate, spec);
    peak = std::max(peak, std::abs(x[n]));
  }
  if (peak > 0.0) {
    for (double& v : x) v /= peak;
  }
  clip.channels.push_back(std::move(x));
  return clip;
}

void add_chirp(std::vector<double>& samples, double sample_rate, double onset_seconds,
               const ChirpSpec& chirp, double amplitude) {
  check_nyquist(chirp.f0, sample_rate);
  check_nyquist(chirp.f1, sample_rate);
  const long first = static_cast<long>(std::ceil(onset_seconds * sample_rate));
  const long last = static_cast<long>(std::floor((onset_seconds + chirp.duration) * sample_rate));
  for (long n = std::max(first, 0L); n <= last && n < static_cast<long>(samples.size()); ++n) {
    const double t = static_cast<double>(n) / sample_rate - onset_seconds;
    if (t < 0.0 || t >= chirp.duration) continue;
    samples[n] += amplitude * chirp_value(t, chirp);
  }
}

std::vector<long> detect_rough_endpoints(std::span<const double> samples, int frame_len, int hop,
                                         double energy_threshold_ratio) {
  if (frame_len < 1 || hop < 1) throw DegenerateInputError("frame length and hop must be >= 1");
  std::vector<double> energy;
  for (std::size_t start = 0; start + frame_len <= samples.size(); start += hop) {
    double e = 0.0;
    for (int n = 0; n < frame_len; ++n) e += samples[start + n] * samples[start + n];
    energy.push_back(e);
  }
  std::vector<long> onsets;
  if (energy.empty()) return onsets;
  const double peak = *std::max_element(energy.begin(), energy.end());
  if (!(peak > 0.0)) return onsets;
  const double threshold = energy_threshold_ratio * peak;
  bool in_run = false;
  for (std::size_t f = 0; f < energy.size(); ++f) {
    const bool above = energy[f] > threshold;
    if (above && !in_run) onsets.push_back(static_cast<long>(f) * hop);
    in_run = above;
  }
  return onsets;
}

GccResult gcc_phat(std::span<const double> window_a, std::span<const double> window_b,
                   double sample_rate, int max_lag) {
  if (window_a.size() != window_b.size()) {
    throw DegenerateInputError("GCC-PHAT windows must have equal length");
  }
  const auto len = static_cast<long>(window_a.size());
  if (max_lag < 0 || max_lag >= len) throw DegenerateInputError("max_lag must be in [0, window length)");
  auto all_zero = [](std::span<const double> w) {
    return std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; });
  };
  if (all_zero(window_a) || all_zero(window_b)) {
    throw DegenerateInputError("GCC-PHAT window is all zeros; phase is undefined");
  }

  const std::size_t n = next_pow2(2 * window_a.size());
  const auto spec_a = rfft(window_a, n);
  const auto spec_b = rfft(window_b, n);
  std::vector<std::complex<double>> cross(spec_a.size());
  double largest = 0.0;
  for (std::size_t k = 0; k < cross.size(); ++k) {
    cross[k] = std::conj(spec_a[k]) * spec_b[k];
    largest = std::max(largest, std::abs(cross[k]));
  }
  for (auto& g : cross) {
    const double mag = std::abs(g);
    g = mag > 1e-15 * largest ? g / mag : std::complex<double>{};
  }
  const auto corr = irfft(cross, n);

  GccResult out;
  out.peak = corr[0];
  // Outward from zero lag so ties resolve to the smallest |lag|.
  for (long m = 1; m <= max_lag; ++m) {
    for (long lag : {m, -m}) {
      const double v = corr[static_cast<std::size_t>((lag + static_cast<long>(n)) % static_cast<long>(n))];
      if (v > out.peak) {
        out.peak = v;
        out.lag_samples = lag;
      }
    }
  }
  out.peak /= static_cast<double>(n);
  out.lag_seconds = static_cast<double>(out.lag_samples) / sample_rate;
  return out;
}

int ExtractionConfig::effective_window() const {
  const int delay = max_expected_delay > 0 ? max_expected_delay : frame_len;
  return window_len > 0 ? window_len : signal_len + 2 * delay;
}

int ExtractionConfig::effective_max_lag() const {
  return max_lag > 0 ? max_lag : effective_window() / 4;
}

namespace {

std::vector<long> detect_exact(std::span<const double> samples, int event_count,
                               const ExtractionConfig& config, const std::string& where) {
  auto onsets = detect_rough_endpoints(samples, config.frame_len, config.hop,
                                       config.energy_threshold_ratio);
  if (static_cast<int>(onsets.size()) != event_count) {
    throw ExtractionError(where + ": detected " + std::to_string(onsets.size()) +
                          " events, expected " + std::to_string(event_count));
  }
  return onsets;
}

DelayResult aligned_delay(std::span<const double> a_samples, long a_onset,
                          std::span<const double> b_samples, long b_onset, double sample_rate,
                          const ExtractionConfig& config) {
  const int window = config.effective_window();
  const long a_anchor = std::max(0L, a_onset - config.hop);
  const long b_anchor = std::max(0L, b_onset - config.hop);
  const auto wa = window_at(a_samples, a_anchor, window);
  const auto wb = window_at(b_samples, b_anchor, window);
  DelayResult d;
  d.sample_rate = sample_rate;
  d.rough_samples = b_anchor - a_anchor;
  d.precise_samples = gcc_phat(wa, wb, sample_rate, config.effective_max_lag()).lag_samples;
  return d;
}

}  // namespace

std::vector<DelayResult> extract_tdoa_s(std::span<const double> samples, double sample_rate,
                                        int event_count, const ExtractionConfig& config) {
  const auto onsets = detect_exact(samples, event_count, config, "channel");
  std::vector<DelayResult> out;
  for (int j = 0; j + 1 < event_count; ++j) {
    out.push_back(aligned_delay(samples, onsets[j], samples, onsets[j + 1], sample_rate, config));
  }
  return out;
}

TdoaMExtraction extract_tdoa_m(const AudioClip& clip, int event_count, int reference_channel,
                               const ExtractionConfig& config) {
  clip.validate();
  if (reference_channel < 0 || reference_channel >= clip.channel_count()) {
    throw DegenerateInputError("reference channel " + std::to_string(reference_channel) +
                               " does not exist");
  }
  std::vector<std::vector<long>> onsets(clip.channel_count());
  for (int ch = 0; ch < clip.channel_count(); ++ch) {
    onsets[ch] = detect_exact(clip.channels[ch], event_count, config, "channel " + std::to_string(ch));
  }
  TdoaMExtraction out;
  out.seconds.resize(clip.channel_count() - 1, event_count);
  int row = 0;
  for (int ch = 0; ch < clip.channel_count(); ++ch) {
    if (ch == reference_channel) continue;
    std::vector<DelayResult> per_event;
    for (int j = 0; j < event_count; ++j) {
      per_event.push_back(aligned_delay(clip.channels[reference_channel], onsets[reference_channel][j],
                                        clip.channels[ch], onsets[ch][j], clip.sample_rate, config));
      out.seconds(row, j) = per_event.back().total();
    }
    out.delays.push_back(std::move(per_event));
    ++row;
  }
  return out;
}

AudioClip synthesize_scene(std::span<const MicrophoneState> mics, const EventTrajectory& traj,
                           const PhysicalConstants& consts, const ChirpSpec& chirp,
                           double sample_rate, double lead_in, double noise_sd,
                           std::uint64_t seed) {
  traj.validate();
  double latest = 0.0;
  std::vector<std::vector<double>> arrivals(mics.size());
  for (std::size_t i = 0; i < mics.size(); ++i) {
    for (int j = 0; j < traj.event_count(); ++j) {
      const double t = lead_in + model::toa_simplified(mics[i], j, traj, consts);
      if (t < 0.0) throw DegenerateInputError("lead-in too short for the channel offsets");
      arrivals[i].push_back(t);
      latest = std::max(latest, t);
    }
  }
  const auto frames = static_cast<std::size_t>(std::ceil((latest + chirp.duration + lead_in) * sample_rate));
  AudioClip clip;
  clip.sample_rate = sample_rate;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < mics.size(); ++i) {
    std::vector<double> x(frames, 0.0);
    for (double t : arrivals[i]) add_chirp(x, sample_rate, t, chirp, 0.5);
    if (noise_sd > 0.0) {
      for (double& v : x) v += noise_sd * unit(rng);
    }
    for (double& v : x) v = std::clamp(v, -1.0, 1.0);
    clip.channels.push_back(std::move(x));
  }
  return clip;
}

}  // namespace asyncmic::signal
