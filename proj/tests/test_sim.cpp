#include "asyncmic/errors.hpp"
#include "asyncmic/sim.hpp"
#include "doctest.h"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

using namespace asyncmic;

TEST_CASE("named trajectories") {
  const int counts[] = {8, 10, 14};
  const Vec3 boxes[] = {{3, 3, 3}, {2, 6, 2}, {4, 4, 2}};
  for (int id = 1; id <= 3; ++id) {
    const auto spec = sim::TrajectorySpec::named(id);
    CHECK(spec.event_count == counts[id - 1]);
    CHECK(spec.extents == boxes[id - 1]);
    sim::Rng rng(id);
    for (int rep = 0; rep < 50; ++rep) {
      const auto w = sim::loop_waypoints(spec, rng);
      REQUIRE(static_cast<int>(w.size()) == spec.event_count);
      for (const auto& p : w) {
        CHECK((p.array() >= 0.0).all());
        CHECK((p.array() <= spec.extents.array()).all());
      }
    }
  }
  CHECK_THROWS_AS(sim::TrajectorySpec::named(4), DimensionError);
}

TEST_CASE("random configurations") {
  const auto spec = sim::TrajectorySpec::named(1);
  sim::Rng rng(99);
  for (int rep = 0; rep < 2000; ++rep) {
    const auto sc = sim::random_configuration(spec, 5, rng);
    CHECK(sc.mics[0].offset == 0.0);
    for (const auto& m : sc.mics) {
      REQUIRE(std::abs(m.offset) <= 0.1);
      REQUIRE(std::abs(m.drift) <= 1e-4);
    }
    for (double dt : sc.traj.intervals) REQUIRE((dt >= 1.0 && dt <= 2.0));
    // Sound-frame gauge holds exactly.
    REQUIRE(sc.traj.positions[0].norm() == 0.0);
    REQUIRE(sc.traj.positions[1].y() == 0.0);
    REQUIRE(sc.traj.positions[2].z() == 0.0);
    // Inside the box once mapped back.
    const auto back = sc.sound_from_world.inverse();
    for (const auto& m : sc.mics) {
      const Vec3 w = back.apply(m.position);
      REQUIRE((w.array() >= -1e-9).all());
      REQUIRE((w.array() <= spec.extents.array() + 1e-9).all());
    }
  }
}

TEST_CASE("configurations are reproducible") {
  const auto a = testing::scenario(2, 6, 5);
  const auto b = testing::scenario(2, 6, 5);
  CHECK(a.truth_state().stacked() == b.truth_state().stacked());
  CHECK(a.traj.intervals == b.traj.intervals);
  const auto c = testing::scenario(2, 6, 6);
  CHECK(a.truth_state().stacked() != c.truth_state().stacked());
}

TEST_CASE("perturbed initialization") {
  const auto sc = testing::scenario(3, 6, 1);
  const auto truth = sc.truth_state();
  sim::Rng rng(4);
  const auto same = sim::perturbed_initialization(truth, 0.0, rng);
  const frames::StateLayout layout{6, 14};
  for (int i = 0; i < 6; ++i) {
    CHECK(same.mic_block.segment<3>(layout.position(i)) == truth.mic_block.segment<3>(layout.position(i)));
    CHECK(same.mic_block(layout.drift(i)) == 0.0);
    if (i > 0) CHECK(same.mic_block(layout.offset(i)) == 0.0);
  }
  CHECK(same.source_block == truth.source_block);

  // Per-coordinate spread over many draws.
  double ss = 0.0;
  long count = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const auto p = sim::perturbed_initialization(truth, 2.0, rng);
    for (int i = 0; i < 6; ++i) {
      ss += (p.mic_block.segment<3>(layout.position(i)) - truth.mic_block.segment<3>(layout.position(i))).squaredNorm();
      count += 3;
    }
    ss += (p.source_block - truth.source_block).squaredNorm();
    count += p.source_block.size();
    // Gauge-fixed coordinates stay fixed.
    const auto u = frames::unpack_state(p, 6, 14);
    REQUIRE(u.events[0].norm() == 0.0);
    REQUIRE(u.events[1].y() == 0.0);
    REQUIRE(u.events[1].z() == 0.0);
    REQUIRE(u.events[2].z() == 0.0);
  }
  CHECK(std::sqrt(ss / count) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("random initialization") {
  const auto spec = sim::TrajectorySpec::named(2);
  sim::Rng rng(12);
  const auto sc = sim::random_configuration(spec, 4, rng);
  const auto back = sc.sound_from_world.inverse();
  double mean_y = 0.0;
  const int reps = 500;
  for (int rep = 0; rep < reps; ++rep) {
    const auto init = sim::random_initialization(spec, 4, 10, sc.sound_from_world, rng);
    const auto u = frames::unpack_state(init, 4, 10);
    for (const auto& m : u.mics) {
      const Vec3 w = back.apply(m.position);
      REQUIRE((w.array() >= -1e-9).all());
      REQUIRE((w.array() <= spec.extents.array() + 1e-9).all());
      REQUIRE(m.drift == 0.0);
      REQUIRE(m.offset == 0.0);
      mean_y += w.y() / (4.0 * reps);
    }
  }
  CHECK(mean_y == doctest::Approx(3.0).epsilon(0.03));
}

TEST_CASE("summary statistics") {
  const auto s = sim::summarize({4.0, 1.0, 3.0, 2.0, std::nan("")});
  CHECK(s.count == 4);
  CHECK(s.median == doctest::Approx(2.5));
  CHECK(s.q1 == doctest::Approx(1.75));
  CHECK(s.q3 == doctest::Approx(3.25));
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(sim::summarize({}).count == 0);
}

TEST_CASE("small grid") {
  auto grid = sim::ExperimentGrid::part_b();
  grid.trials_per_cell = 2;
  grid.trajectories = {1, 3};
  const auto setups = sim::enumerate_trials(grid);
  CHECK(setups.size() == 2u * 4u * 2u);
  CHECK(setups.back().sigma_init == 6.0);

  const auto one = sim::run_grid(grid, 1);
  const auto two = sim::run_grid(grid, 2);
  REQUIRE(one.trials.size() == setups.size());
  for (std::size_t t = 0; t < one.trials.size(); ++t) {
    CHECK(one.trials[t].seed == two.trials[t].seed);
    REQUIRE(one.trials[t].results.size() == 2);
    for (int m = 0; m < 2; ++m) {
      const auto& a = one.trials[t].results[m];
      const auto& b = two.trials[t].results[m];
      CHECK(std::memcmp(&a.loc_err, &b.loc_err, sizeof(double)) == 0);
      CHECK(a.iterations == b.iterations);
      CHECK(a.loc_err >= 0.0);
    }
    CHECK(one.trials[t].results[0].d_crlb.loc < one.trials[t].results[1].d_crlb.loc);
  }
  CHECK(one.aggregates.size() == 8);

  // Aggregates do not depend on record order.
  auto reversed = one.trials;
  std::reverse(reversed.begin(), reversed.end());
  const auto again = sim::aggregate(reversed);
  for (std::size_t r = 0; r < again.size(); ++r) {
    CHECK(again[r].loc.median == one.aggregates[r].loc.median);
    CHECK(again[r].mean_d_crlb_loc == doctest::Approx(one.aggregates[r].mean_d_crlb_loc).epsilon(1e-14));
  }

  grid.mic_counts = {};
  CHECK_THROWS_AS(grid.validate(), DimensionError);
}
