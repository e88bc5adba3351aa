#pragma once

// Sound-frame and Mic-frame gauges and the affine map between them.
//
// Sound frame: s_0 = 0, s_1 on the +x axis, s_2 in the xy-plane with y >= 0.
// Mic frame:   x_0 = 0, x_1 on the +x axis, x_2 in the xy-plane with y >= 0.
//
// Sound-frame mic block (length 5N-1):
//   [x_0(3), drift_0, x_1(3), offset_1, drift_1, ..., x_{N-1}(3), offset_{N-1}, drift_{N-1}]
// offsets are relative to microphone 0, drifts are absolute.
// Source block (length 3K-6):
//   [(s_1)_x, (s_2)_x, (s_2)_y, s_3(3), ..., s_{K-1}(3)]
// Mic-frame vector (length 5N-2):
//   [x_0(3), x_1(3), offset_1, drift_1 - drift_0, ..., x_{N-1}(3), offset_{N-1}, drift_{N-1} - drift_0]

#include "asyncmic/types.hpp"

#include <span>

namespace asyncmic::frames {

inline constexpr double kGaugeTolerance = 1e-9;  // m

// Every state-vector index in the project derives from this layout.
struct StateLayout {
  int mic_count = 0;
  int event_count = 0;

  static int mic_block_size(int n) { return 5 * n - 1; }
  static int source_block_size(int k) { return 3 * k - 6; }
  static int mic_frame_size(int n) { return 5 * n - 2; }

  int mic_block_size() const { return mic_block_size(mic_count); }
  int source_block_size() const { return source_block_size(event_count); }
  int total_size() const { return mic_block_size() + source_block_size(); }

  // Indices into the stacked Sound-frame vector [mic_block, source_block].
  int position(int mic) const { return mic == 0 ? 0 : 4 + 5 * (mic - 1); }
  int offset(int mic) const { return mic == 0 ? -1 : 4 + 5 * (mic - 1) + 3; }
  int drift(int mic) const { return mic == 0 ? 3 : 4 + 5 * (mic - 1) + 4; }
  // -1 for gauge-fixed coordinates.
  int source(int event, int axis) const;

  // Indices into the Mic-frame vector.
  static int mic_frame_position(int mic) { return mic == 0 ? 0 : 3 + 5 * (mic - 1); }
  static int mic_frame_offset(int mic) { return mic == 0 ? -1 : 3 + 5 * (mic - 1) + 3; }
  static int mic_frame_drift(int mic) { return mic == 0 ? -1 : 3 + 5 * (mic - 1) + 4; }
};

struct SoundFrameState {
  VecX mic_block;
  VecX source_block;

  VecX stacked() const;
  static SoundFrameState from_stacked(const VecX& x, int mic_count, int event_count);
};

struct MicFrameState {
  VecX values;

  int mic_count() const { return static_cast<int>((values.size() + 2) / 5); }
  Vec3 position(int mic) const { return values.segment<3>(StateLayout::mic_frame_position(mic)); }
  double offset(int mic) const;  // 0 for the reference
  double drift(int mic) const;   // relative to the reference; 0 for the reference
};

struct UnpackedState {
  std::vector<MicrophoneState> mics;  // offsets relative to mic 0 (mic 0 has offset 0)
  std::vector<Vec3> events;
};

struct FrameTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  MatX affine_matrix;  // (5N-2) x (5N-1)
  VecX affine_offset;  // 5N-2

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  // Affine matrix for the reduced parameterization without the drift_0 column,
  // i.e. drifts already stored relative to microphone 0.
  MatX reduced_affine_matrix() const;
};

// Rigid (R, t) with R*a+t = 0, R*b+t on +x, R*c+t in the xy-plane with y >= 0.
// Without `c` the rotation is the minimal one taking b-a onto +x.
// Throws DegenerateGeometryError on coincident or collinear anchors.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
};
RigidTransform anchor_frame(const Vec3& a, const Vec3& b, const Vec3* c);

// Throws FrameMismatchError when the events are not in the Sound-frame gauge.
SoundFrameState pack_state(std::span<const MicrophoneState> mics, const EventTrajectory& traj);
UnpackedState unpack_state(const SoundFrameState& state, int mic_count, int event_count);

FrameTransform compute_frame_transform(std::span<const Vec3> mic_positions_sound);

// Matrix route: A * mic_block + b with A, b evaluated at the state's own positions.
MicFrameState to_mic_frame(const SoundFrameState& state);
MicFrameState to_mic_frame(const SoundFrameState& state, const FrameTransform& transform);
// Componentwise route: rotate positions, copy offsets, difference drifts.
MicFrameState to_mic_frame_componentwise(const SoundFrameState& state,
                                         const FrameTransform& transform);

// Reflection through the xy-plane of the Mic frame.
MicFrameState mirror_z(const MicFrameState& state);

// Mic block alone, e.g. for ground truth without a trajectory.
VecX pack_mic_block(std::span<const MicrophoneState> mics);

// Mic positions of a Sound-frame state, in microphone order.
std::vector<Vec3> mic_positions(const SoundFrameState& state);

}  // namespace asyncmic::frames
