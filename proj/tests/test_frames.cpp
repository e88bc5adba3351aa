#include "asyncmic/errors.hpp"
#include "asyncmic/frames.hpp"
#include "doctest.h"
#include "support.hpp"

#include <random>

using namespace asyncmic;
using frames::StateLayout;

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-3.1, 3.1);
  const Vec3 axis = Vec3(g(rng), g(rng), g(rng)).normalized();
  return Eigen::AngleAxisd(angle(rng), axis).toRotationMatrix();
}

// Microphones already in the Mic-frame pose.
std::vector<MicrophoneState> posed_mics(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<MicrophoneState> mics(n);
  for (auto& m : mics) {
    m.position = Vec3(u(rng), u(rng), u(rng));
    m.offset = 0.01 * u(rng);
    m.drift = 1e-5 * u(rng);
  }
  mics[0].position.setZero();
  mics[0].offset = 0.0;
  mics[1].position = Vec3(1.5, 0, 0);
  mics[2].position = Vec3(0.3, 0.8, 0);
  return mics;
}

}  // namespace

TEST_CASE("state dimensions") {
  CHECK(StateLayout{2, 4}.total_size() == 15);
  CHECK(StateLayout{4, 8}.total_size() == 37);
  CHECK(StateLayout::mic_frame_size(6) == 28);

  // Every stored coordinate has exactly one index.
  const StateLayout layout{5, 9};
  std::vector<int> hits(layout.total_size(), 0);
  for (int i = 0; i < 5; ++i) {
    for (int a = 0; a < 3; ++a) ++hits[layout.position(i) + a];
    ++hits[layout.drift(i)];
    if (i > 0) ++hits[layout.offset(i)];
  }
  for (int j = 0; j < 9; ++j) {
    for (int a = 0; a < 3; ++a) {
      if (layout.source(j, a) >= 0) ++hits[layout.source(j, a)];
    }
  }
  for (int h : hits) CHECK(h == 1);
}

TEST_CASE("pack and unpack") {
  auto sc = testing::scenario(2, 7, 21);
  const auto state = frames::pack_state(sc.mics, sc.traj);
  const auto back = frames::unpack_state(state, 7, 10);
  for (int i = 0; i < 7; ++i) {
    CHECK((back.mics[i].position - sc.mics[i].position).norm() == 0.0);
    CHECK(back.mics[i].offset == sc.mics[i].offset);
    CHECK(back.mics[i].drift == sc.mics[i].drift);
  }
  for (int j = 0; j < 10; ++j) CHECK((back.events[j] - sc.traj.positions[j]).norm() == 0.0);

  const auto again = frames::pack_state(back.mics, EventTrajectory{back.events, sc.traj.intervals});
  CHECK(again.stacked() == state.stacked());

  const auto zero = frames::unpack_state(frames::SoundFrameState::from_stacked(VecX::Zero(15), 2, 4), 2, 4);
  for (const auto& m : zero.mics) CHECK(m.position.norm() == 0.0);
  for (const auto& s : zero.events) CHECK(s.norm() == 0.0);
}

TEST_CASE("pack rejects events outside the gauge") {
  auto sc = testing::scenario(1, 4, 2);
  sc.traj.positions[1].y() = 0.5;
  CHECK_THROWS_AS(frames::pack_state(sc.mics, sc.traj), FrameMismatchError);
}

TEST_CASE("anchor frame") {
  const Vec3 a(1, 1, 1), b(3, 2, 1), c(0, 4, 2);
  const auto t = frames::anchor_frame(a, b, &c);
  CHECK(t.apply(a).norm() < 1e-14);
  CHECK(std::abs(t.apply(b).y()) < 1e-14);
  CHECK(std::abs(t.apply(b).z()) < 1e-14);
  CHECK(t.apply(b).x() > 0.0);
  CHECK(std::abs(t.apply(c).z()) < 1e-14);
  CHECK(t.apply(c).y() > 0.0);
  CHECK(t.rotation.determinant() == doctest::Approx(1.0));
  CHECK((t.inverse().apply(t.apply(c)) - c).norm() < 1e-14);

  const Vec3 on_line(5, 3, 1);
  CHECK_THROWS_AS(frames::anchor_frame(a, b, &on_line), DegenerateGeometryError);
  CHECK_THROWS_AS(frames::anchor_frame(a, a, nullptr), DegenerateGeometryError);
}

TEST_CASE("identity pose gives the identity transform") {
  std::mt19937_64 rng(3);
  const auto mics = posed_mics(5, rng);
  std::vector<Vec3> p;
  for (const auto& m : mics) p.push_back(m.position);
  const auto t = frames::compute_frame_transform(p);
  CHECK((t.rotation - Mat3::Identity()).norm() < 1e-15);
  CHECK(t.translation.norm() < 1e-15);
}

TEST_CASE("rigid motion is undone by the Mic frame") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const auto mics = posed_mics(6, rng);
    const Mat3 r = random_rotation(rng);
    const Vec3 shift(0.7 * rep, -1.0, 2.5);
    std::vector<Vec3> moved;
    for (const auto& m : mics) moved.push_back(r * m.position + shift);
    const auto t = frames::compute_frame_transform(moved);
    for (int i = 0; i < 6; ++i) CHECK((t.apply(moved[i]) - mics[i].position).norm() < 1e-10);
    // Distances survive.
    CHECK((t.apply(moved[4]) - t.apply(moved[5])).norm() ==
          doctest::Approx((moved[4] - moved[5]).norm()).epsilon(1e-12));
  }
}

TEST_CASE("matrix and componentwise Mic-frame maps agree") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    auto sc = testing::scenario(1 + seed % 3, 3 + seed % 6, seed);
    const auto state = sc.truth_state();
    const auto t = frames::compute_frame_transform(frames::mic_positions(state));
    const auto a = frames::to_mic_frame(state, t);
    const auto b = frames::to_mic_frame_componentwise(state, t);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-12);

    // Gauge of the result.
    CHECK(a.position(0).norm() < 1e-12);
    CHECK(std::abs(a.position(1).y()) < 1e-12);
    CHECK(std::abs(a.position(1).z()) < 1e-12);
    CHECK(std::abs(a.position(2).z()) < 1e-12);
    CHECK(a.position(2).y() >= 0.0);
    CHECK(a.offset(0) == 0.0);
    CHECK(a.drift(0) == 0.0);
  }
}

TEST_CASE("equal drifts vanish in the Mic frame") {
  auto sc = testing::scenario(3, 5, 4);
  for (auto& m : sc.mics) m.drift = 3e-5;
  const auto mic = frames::to_mic_frame(sc.truth_state());
  for (int i = 0; i < 5; ++i) CHECK(mic.drift(i) == 0.0);
  CHECK(mic.offset(3) == sc.mics[3].offset);
}

TEST_CASE("reduced affine matrix drops the reference drift column") {
  auto sc = testing::scenario(1, 4, 6);
  auto state = testing::relative_drifts(sc.truth_state(), 4);
  const auto t = frames::compute_frame_transform(frames::mic_positions(state));
  const MatX reduced = t.reduced_affine_matrix();
  CHECK(reduced.cols() == t.affine_matrix.cols() - 1);
  VecX block(reduced.cols());
  block << state.mic_block.head(3), state.mic_block.tail(state.mic_block.size() - 4);
  CHECK(((reduced * block + t.affine_offset) - frames::to_mic_frame(state, t).values).norm() < 1e-12);
}

TEST_CASE("mirror flips only z") {
  auto sc = testing::scenario(2, 4, 1);
  const auto mic = frames::to_mic_frame(sc.truth_state());
  const auto m = frames::mirror_z(mic);
  for (int i = 0; i < 4; ++i) {
    CHECK(m.position(i).z() == -mic.position(i).z());
    CHECK(m.position(i).x() == mic.position(i).x());
  }
  CHECK(frames::mirror_z(m).values == mic.values);
}
