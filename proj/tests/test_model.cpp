#include "asyncmic/errors.hpp"
#include "asyncmic/model.hpp"
#include "doctest.h"
#include "support.hpp"

#include <cmath>

using namespace asyncmic;

namespace {

EventTrajectory line_trajectory(std::vector<Vec3> positions, double dt) {
  EventTrajectory traj;
  traj.positions = std::move(positions);
  traj.intervals.assign(traj.positions.size() - 1, dt);
  return traj;
}

MicrophoneState mic_at(Vec3 p, double offset = 0.0, double drift = 0.0) {
  MicrophoneState m;
  m.position = p;
  m.offset = offset;
  m.drift = drift;
  return m;
}

}  // namespace

TEST_CASE("exact arrival time") {
  PhysicalConstants consts;
  auto traj = line_trajectory({{343, 0, 0}, {0, 0, 0}, {0, 1, 0}, {1, 1, 0}}, 2.0);
  CHECK(model::toa_exact(mic_at(Vec3::Zero()), 0, traj, consts) == doctest::Approx(1.0).epsilon(1e-15));
  auto at_origin = line_trajectory({{1, 0, 0}, {0, 0, 0}, {0, 1, 0}, {1, 1, 0}}, 2.0);
  CHECK(model::toa_exact(mic_at({0, 0, 0}, 0.1, 1e-4), 1, at_origin, consts) ==
        doctest::Approx(2.10021).epsilon(1e-14));
}

TEST_CASE("simplified arrival time") {
  PhysicalConstants consts;
  auto traj = line_trajectory({{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}}, 5.0);
  const double t = model::toa_simplified(mic_at({1, 0, 0}, 0.05, 1e-4), 2, traj, consts);
  CHECK(t == doctest::Approx(1.0 / 343.0 + 0.05 + 10.001).epsilon(1e-14));

  const auto plain = mic_at({2, 3, 1}, 0.02, 0.0);
  for (int j = 0; j < 4; ++j) {
    CHECK(model::toa_simplified(plain, j, traj, consts) == model::toa_exact(plain, j, traj, consts));
  }
}

TEST_CASE("simplified and exact forms differ by drift times range plus offset") {
  PhysicalConstants consts;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto sc = testing::scenario(3, 6, seed);
    for (const auto& m : sc.mics) {
      for (int j = 0; j < sc.traj.event_count(); ++j) {
        const double range = (m.position - sc.traj.positions[j]).norm() / consts.sound_speed;
        const double gap = model::toa_exact(m, j, sc.traj, consts) - model::toa_simplified(m, j, sc.traj, consts);
        CHECK(std::abs(gap - m.drift * (range + m.offset)) < 1e-13);
      }
    }
  }
}

TEST_CASE("inter-event TDOA") {
  PhysicalConstants consts;
  auto still = line_trajectory({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}}, 1.0);
  CHECK(model::tdoa_s_model(mic_at({0, 0, 0}), 0, still, consts) == 1.0);
  CHECK(model::tdoa_s_model(mic_at({0, 0, 0}, 0.0, 1e-4), 1, still, consts) ==
        doctest::Approx(1.0001).epsilon(1e-15));

  auto sc = testing::scenario(2, 5, 3);
  for (const auto& m : sc.mics) {
    for (int j = 0; j + 1 < sc.traj.event_count(); ++j) {
      const double diff = model::toa_simplified(m, j + 1, sc.traj, consts) - model::toa_simplified(m, j, sc.traj, consts);
      CHECK(std::abs(model::tdoa_s_model(m, j, sc.traj, consts) - diff) < 1e-14);
    }
  }
}

TEST_CASE("inter-microphone TDOA") {
  PhysicalConstants consts;
  auto sc = testing::scenario(1, 4, 9);
  for (int j = 0; j < sc.traj.event_count(); ++j) {
    CHECK(model::tdoa_m_model(sc.mics[2], sc.mics[2], j, sc.traj, consts) == 0.0);
    const double diff = model::toa_simplified(sc.mics[3], j, sc.traj, consts) -
                        model::toa_simplified(sc.mics[0], j, sc.traj, consts);
    CHECK(std::abs(model::tdoa_m_model(sc.mics[3], sc.mics[0], j, sc.traj, consts) - diff) < 1e-14);
  }
  // Equidistant microphones, pure offset.
  auto traj = line_trajectory({{0, 0, 0}, {0, 0, 1}, {0, 0, 2}, {0, 0, 3}}, 1.0);
  CHECK(model::tdoa_m_model(mic_at({0, 1, 0}, 0.01), mic_at({1, 0, 0}), 3, traj, consts) ==
        doctest::Approx(0.01).epsilon(1e-14));
}

TEST_CASE("odometry") {
  auto traj = line_trajectory({{0, 0, 0}, {1, 2, 3}, {1, 2, 3}, {4, 0, 1}}, 1.0);
  CHECK(model::odometry_model(traj, 0) == Vec3(1, 2, 3));
  CHECK(model::odometry_model(traj, 1) == Vec3::Zero());
  Vec3 sum = Vec3::Zero();
  for (int j = 0; j < 3; ++j) sum += model::odometry_model(traj, j);
  CHECK((sum - (traj.positions[3] - traj.positions[0])).norm() < 1e-15);
}

TEST_CASE("measurement simulation") {
  PhysicalConstants consts;
  auto sc = testing::scenario(3, 6, 4);
  const auto clean = model::noiseless_measurements(sc.mics, sc.traj, consts);
  CHECK(clean.tdoa_s.rows() == 6);
  CHECK(clean.tdoa_s.cols() == 13);
  CHECK(clean.tdoa_m.rows() == 5);
  CHECK(clean.tdoa_m.cols() == 14);
  CHECK(clean.odometry.rows() == 13);

  const auto zero = model::simulate_measurements(sc.mics, sc.traj, consts, {0.0, 0.0}, 5);
  CHECK(zero.tdoa_s == clean.tdoa_s);
  CHECK(zero.tdoa_m == clean.tdoa_m);
  CHECK(zero.odometry == clean.odometry);

  const auto a = model::simulate_measurements(sc.mics, sc.traj, consts, {1e-4, 0.01}, 11);
  const auto b = model::simulate_measurements(sc.mics, sc.traj, consts, {1e-4, 0.01}, 11);
  CHECK(a.tdoa_s == b.tdoa_s);
  CHECK(a.tdoa_m == b.tdoa_m);
  CHECK(a.odometry == b.odometry);
  CHECK(a.sigma_tdoa == 1e-4);

  // Sample SD of the TDOA noise over ~1.4e4 draws.
  double ss = 0.0;
  long count = 0;
  for (std::uint64_t seed = 0; seed < 110; ++seed) {
    const auto z = model::simulate_measurements(sc.mics, sc.traj, consts, {1e-4, 0.01}, seed);
    ss += (z.tdoa_s - clean.tdoa_s).squaredNorm() + (z.tdoa_m - clean.tdoa_m).squaredNorm();
    count += z.tdoa_s.size() + z.tdoa_m.size();
  }
  CHECK(std::sqrt(ss / count) == doctest::Approx(1e-4).epsilon(0.02));
}

TEST_CASE("measurement shape validation") {
  MeasurementSet z;
  z.tdoa_s = MatX::Zero(3, 4);
  CHECK_NOTHROW(z.validate_shape(3, 5));
  CHECK_THROWS_AS(z.validate_shape(4, 5), DimensionError);
}
