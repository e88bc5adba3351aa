#include "asyncmic/commands.hpp"
#include "asyncmic/io.hpp"
#include "doctest.h"

#include <filesystem>
#include <sstream>

using namespace asyncmic;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& file) const { return (path / file).string(); }
};

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"simulate", "--mics", "1", "--out", "x.json"}).code == cli::kExitUsage);
  CHECK(run({"simulate", "--trajectory", "5", "--out", "x.json"}).code == cli::kExitUsage);
  CHECK(run({"calibrate", "--problem", "p.json"}).code == cli::kExitUsage);

  const auto help = run({"--help-all"});
  CHECK(help.code == cli::kExitOk);
  CHECK(help.out.find("run-grid") != std::string::npos);
  CHECK(help.out.find("(seconds)") != std::string::npos);
}

TEST_CASE("simulate") {
  TempDir dir("asyncmic_cli_sim");
  const std::vector<std::string> args{"simulate", "--trajectory", "1", "--mics", "6", "--sigma-tdoa", "1e-4",
                                      "--seed", "7", "--out"};
  auto a = args;
  a.push_back(dir / "a.json");
  auto b = args;
  b.push_back(dir / "b.json");
  REQUIRE(run(a).code == 0);
  REQUIRE(run(b).code == 0);
  const auto f = io::read_problem(dir / "a.json");
  CHECK(f.mic_count == 6);
  CHECK(f.event_count == 8);
  CHECK(io::read_text(dir / "a.json") == io::read_text(dir / "b.json"));
}

TEST_CASE("calibrate, crlb and noise on a noiseless file") {
  TempDir dir("asyncmic_cli_cal");
  REQUIRE(run({"simulate", "--trajectory", "3", "--mics", "5", "--sigma-tdoa", "0", "--sigma-odo", "0",
               "--seed", "3", "--out", dir / "p.json"})
              .code == 0);

  REQUIRE(run({"calibrate", "--problem", dir / "p.json", "--out", dir / "h.json", "--init", "truth", "--crlb"}).code == 0);
  const auto h = io::read_report(dir / "h.json");
  REQUIRE(h.errors);
  CHECK(h.errors->loc < 1e-6);
  REQUIRE(h.residuals);
  CHECK(h.residuals->tdoa_s_rms);
  CHECK(h.crlb);

  REQUIRE(run({"calibrate", "--problem", dir / "p.json", "--out", dir / "b.json", "--init", "truth",
               "--mode", "tdoa-m-only"})
              .code == 0);
  const auto b = io::read_report(dir / "b.json");
  CHECK(b.mode == Mode::tdoa_m_only);
  CHECK_FALSE(b.residuals->tdoa_s_rms);

  const auto c = run({"crlb", "--problem", dir / "p.json", "--out", dir / "c.json"});
  REQUIRE(c.code == 0);
  CHECK(c.out.find("D_CRLB") != std::string::npos);
  CHECK(io::read_report(dir / "c.json").crlb->d_crlb.loc > 0.0);

  REQUIRE(run({"estimate-noise", "--problem", dir / "p.json", "--out", dir / "n.json"}).code == 0);
  const auto n = io::read_report(dir / "n.json");
  REQUIRE(n.noise);
  CHECK(n.noise->s.sigma_s == 0.0);
  CHECK(n.noise->m.sigma_m == 0.0);
}

TEST_CASE("exit codes for bad inputs") {
  TempDir dir("asyncmic_cli_bad");
  CHECK(run({"calibrate", "--problem", dir / "absent.json", "--out", dir / "r.json"}).code == cli::kExitIo);

  io::write_text_atomic(dir / "junk.json", "{\"schema\": 3}");
  CHECK(run({"calibrate", "--problem", dir / "junk.json", "--out", dir / "r.json"}).code == cli::kExitIo);

  REQUIRE(run({"simulate", "--mics", "4", "--out", dir / "p.json"}).code == 0);
  CHECK(run({"calibrate", "--problem", dir / "p.json", "--out", (dir.path / "nodir" / "r.json").string()}).code == cli::kExitIo);

  // Every event at the origin: the starting point cannot be linearized.
  auto f = io::read_problem(dir / "p.json");
  f.initial_state = frames::SoundFrameState::from_stacked(
      VecX::Zero(frames::StateLayout{4, 8}.total_size()), 4, 8);
  io::write_problem(f, dir / "flat.json");
  CHECK(run({"calibrate", "--problem", dir / "flat.json", "--out", dir / "r.json", "--init", "file"}).code ==
        cli::kExitDegenerate);

  REQUIRE(run({"calibrate", "--problem", dir / "p.json", "--out", dir / "r.json", "--init", "truth",
               "--max-iter", "1"})
              .code == cli::kExitNotConverged);
}

TEST_CASE("extract from synthetic audio") {
  TempDir dir("asyncmic_cli_wav");
  REQUIRE(run({"simulate", "--trajectory", "3", "--mics", "4", "--seed", "5", "--out", dir / "p.json",
               "--wav", dir / "s.wav"})
              .code == 0);
  REQUIRE(run({"extract", "--wav", dir / "s.wav", "--events", "14", "--template", dir / "p.json", "--out",
               dir / "x.json"})
              .code == 0);
  const auto x = io::read_problem(dir / "x.json");
  CHECK(x.measurements.tdoa_s.rows() == 4);
  CHECK(x.measurements.tdoa_s.cols() == 13);
  CHECK(x.measurements.tdoa_m.rows() == 3);

  CHECK(run({"extract", "--wav", dir / "s.wav", "--events", "12", "--template", dir / "p.json", "--out",
             dir / "y.json"})
            .code != 0);
}

TEST_CASE("run-grid output is reproducible") {
  TempDir dir("asyncmic_cli_grid");
  const std::vector<std::string> base{"run-grid", "--preset", "part-cd", "--trials", "1", "--seed", "11"};
  auto a = base;
  a.insert(a.end(), {"--trials-out", dir / "a.csv", "--aggregate-out", dir / "aa.csv"});
  auto b = base;
  b.insert(b.end(), {"--trials-out", dir / "b.csv", "--aggregate-out", dir / "ba.csv", "--jobs", "3"});
  REQUIRE(run(a).code == 0);
  REQUIRE(run(b).code == 0);
  CHECK(io::read_text(dir / "a.csv") == io::read_text(dir / "b.csv"));
  CHECK(io::read_text(dir / "aa.csv") == io::read_text(dir / "ba.csv"));
  CHECK(io::read_trial_csv(dir / "a.csv").size() == 9);
}
