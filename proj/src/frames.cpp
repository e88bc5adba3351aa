#include "asyncmic/frames.hpp"

#include "asyncmic/errors.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <string>

namespace asyncmic::frames {

int StateLayout::source(int event, int axis) const {
  const int base = mic_block_size();
  switch (event) {
    case 0:
      return -1;
    case 1:
      return axis == 0 ? base : -1;
    case 2:
      return axis == 2 ? -1 : base + 1 + axis;
    default:
      return base + 3 + 3 * (event - 3) + axis;
  }
}

VecX SoundFrameState::stacked() const {
  VecX x(mic_block.size() + source_block.size());
  x << mic_block, source_block;
  return x;
}

SoundFrameState SoundFrameState::from_stacked(const VecX& x, int mic_count, int event_count) {
  const StateLayout layout{mic_count, event_count};
  if (x.size() != layout.total_size()) {
    throw DimensionError("state vector has length " + std::to_string(x.size()) + ", expected " +
                         std::to_string(layout.total_size()));
  }
  return {x.head(layout.mic_block_size()), x.tail(layout.source_block_size())};
}

double MicFrameState::offset(int mic) const {
  return mic == 0 ? 0.0 : values(StateLayout::mic_frame_offset(mic));
}

double MicFrameState::drift(int mic) const {
  return mic == 0 ? 0.0 : values(StateLayout::mic_frame_drift(mic));
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform anchor_frame(const Vec3& a, const Vec3& b, const Vec3* c) {
  const Vec3 ab = b - a;
  const double scale = std::max({1.0, a.norm(), b.norm()});
  if (ab.norm() <= 1e-12 * scale) {
    throw DegenerateGeometryError("frame anchors 0 and 1 coincide");
  }
  const Vec3 e1 = ab.normalized();
  RigidTransform out;
  if (c == nullptr) {
    out.rotation = Eigen::Quaterniond::FromTwoVectors(e1, Vec3::UnitX()).toRotationMatrix();
  } else {
    const Vec3 ac = *c - a;
    const Vec3 w = ac - ac.dot(e1) * e1;
    if (w.norm() <= 1e-9 * std::max(ac.norm(), 1e-300)) {
      throw DegenerateGeometryError("frame anchors 0, 1, 2 are collinear");
    }
    const Vec3 e2 = w.normalized();
    out.rotation.row(0) = e1.transpose();
    out.rotation.row(1) = e2.transpose();
    out.rotation.row(2) = e1.cross(e2).transpose();
  }
  out.translation = -(out.rotation * a);
  return out;
}

MatX FrameTransform::reduced_affine_matrix() const {
  const Eigen::Index cols = affine_matrix.cols();
  MatX reduced(affine_matrix.rows(), cols - 1);
  reduced << affine_matrix.leftCols(3), affine_matrix.rightCols(cols - 4);
  return reduced;
}

SoundFrameState pack_state(std::span<const MicrophoneState> mics, const EventTrajectory& traj) {
  const int n = static_cast<int>(mics.size());
  const int k = traj.event_count();
  if (n < 1) throw DimensionError("no microphones");
  if (k < 4) throw DimensionError("at least 4 events are required");
  const auto& s = traj.positions;
  const bool gauge_ok = s[0].norm() <= kGaugeTolerance && std::abs(s[1].y()) <= kGaugeTolerance &&
                        std::abs(s[1].z()) <= kGaugeTolerance &&
                        std::abs(s[2].z()) <= kGaugeTolerance && s[2].y() >= -kGaugeTolerance;
  if (!gauge_ok) {
    throw FrameMismatchError(
        "events are not in the Sound frame (need s_0 = 0, s_1 on +x, s_2 in xy-plane with y >= 0)");
  }

  const StateLayout layout{n, k};
  VecX x = VecX::Zero(layout.total_size());
  for (int i = 0; i < n; ++i) {
    x.segment<3>(layout.position(i)) = mics[i].position;
    x(layout.drift(i)) = mics[i].drift;
    if (i > 0) x(layout.offset(i)) = mics[i].offset - mics[0].offset;
  }
  for (int j = 1; j < k; ++j) {
    for (int axis = 0; axis < 3; ++axis) {
      const int idx = layout.source(j, axis);
      if (idx >= 0) x(idx) = s[j](axis);
    }
  }
  return SoundFrameState::from_stacked(x, n, k);
}

UnpackedState unpack_state(const SoundFrameState& state, int mic_count, int event_count) {
  const StateLayout layout{mic_count, event_count};
  if (state.mic_block.size() != layout.mic_block_size() ||
      state.source_block.size() != layout.source_block_size()) {
    throw DimensionError("state does not match N=" + std::to_string(mic_count) +
                         ", K=" + std::to_string(event_count));
  }
  const VecX x = state.stacked();
  UnpackedState out;
  out.mics.resize(mic_count);
  for (int i = 0; i < mic_count; ++i) {
    out.mics[i].position = x.segment<3>(layout.position(i));
    out.mics[i].drift = x(layout.drift(i));
    out.mics[i].offset = i == 0 ? 0.0 : x(layout.offset(i));
  }
  out.events.assign(event_count, Vec3::Zero());
  for (int j = 1; j < event_count; ++j) {
    for (int axis = 0; axis < 3; ++axis) {
      const int idx = layout.source(j, axis);
      if (idx >= 0) out.events[j](axis) = x(idx);
    }
  }
  return out;
}

VecX pack_mic_block(std::span<const MicrophoneState> mics) {
  const int n = static_cast<int>(mics.size());
  const StateLayout layout{n, 4};
  VecX m = VecX::Zero(layout.mic_block_size());
  for (int i = 0; i < n; ++i) {
    m.segment<3>(layout.position(i)) = mics[i].position;
    m(layout.drift(i)) = mics[i].drift;
    if (i > 0) m(layout.offset(i)) = mics[i].offset - mics[0].offset;
  }
  return m;
}

std::vector<Vec3> mic_positions(const SoundFrameState& state) {
  const int n = static_cast<int>((state.mic_block.size() + 1) / 5);
  const StateLayout layout{n, 4};
  std::vector<Vec3> out(n);
  for (int i = 0; i < n; ++i) out[i] = state.mic_block.segment<3>(layout.position(i));
  return out;
}

FrameTransform compute_frame_transform(std::span<const Vec3> mic_positions_sound) {
  const int n = static_cast<int>(mic_positions_sound.size());
  if (n < 2) throw DegenerateGeometryError("the Mic frame needs at least 2 microphones");
  const RigidTransform rigid = anchor_frame(mic_positions_sound[0], mic_positions_sound[1],
                                            n >= 3 ? &mic_positions_sound[2] : nullptr);

  FrameTransform out;
  out.rotation = rigid.rotation;
  out.translation = rigid.translation;

  const StateLayout layout{n, 4};
  const int rows = StateLayout::mic_frame_size(n);
  const int cols = StateLayout::mic_block_size(n);
  out.affine_matrix = MatX::Zero(rows, cols);
  out.affine_offset = VecX::Zero(rows);
  for (int i = 0; i < n; ++i) {
    const int row = StateLayout::mic_frame_position(i);
    out.affine_matrix.block<3, 3>(row, layout.position(i)) = rigid.rotation;
    out.affine_offset.segment<3>(row) = rigid.translation;
    if (i == 0) continue;
    out.affine_matrix(StateLayout::mic_frame_offset(i), layout.offset(i)) = 1.0;
    out.affine_matrix(StateLayout::mic_frame_drift(i), layout.drift(i)) = 1.0;
    out.affine_matrix(StateLayout::mic_frame_drift(i), layout.drift(0)) = -1.0;
  }
  return out;
}

MicFrameState to_mic_frame(const SoundFrameState& state, const FrameTransform& transform) {
  if (transform.affine_matrix.cols() != state.mic_block.size()) {
    throw DimensionError("frame transform does not match the state's microphone count");
  }
  return {transform.affine_matrix * state.mic_block + transform.affine_offset};
}

MicFrameState to_mic_frame(const SoundFrameState& state) {
  const auto positions = mic_positions(state);
  return to_mic_frame(state, compute_frame_transform(positions));
}

MicFrameState to_mic_frame_componentwise(const SoundFrameState& state,
                                         const FrameTransform& transform) {
  const int n = static_cast<int>((state.mic_block.size() + 1) / 5);
  const StateLayout layout{n, 4};
  const VecX& m = state.mic_block;
  MicFrameState out{VecX::Zero(StateLayout::mic_frame_size(n))};
  for (int i = 0; i < n; ++i) {
    const Vec3 p = m.segment<3>(layout.position(i));
    out.values.segment<3>(StateLayout::mic_frame_position(i)) = transform.apply(p);
    if (i == 0) continue;
    out.values(StateLayout::mic_frame_offset(i)) = m(layout.offset(i));
    out.values(StateLayout::mic_frame_drift(i)) = m(layout.drift(i)) - m(layout.drift(0));
  }
  return out;
}

MicFrameState mirror_z(const MicFrameState& state) {
  MicFrameState out = state;
  for (int i = 0; i < state.mic_count(); ++i) {
    out.values(StateLayout::mic_frame_position(i) + 2) *= -1.0;
  }
  return out;
}

}  // namespace asyncmic::frames
