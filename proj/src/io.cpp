#include "asyncmic/io.hpp"

#include "asyncmic/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <tuple>

namespace asyncmic::io {
namespace {

using Json = nlohmann::ordered_json;

// ---- writing ----

Json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

Json vector_json(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

Json vector_json(const VecX& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

Json vec3_json(const Vec3& v) { return Json::array({number(v.x()), number(v.y()), number(v.z())}); }

Json matrix_json(const MatX& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

Json state_json(const frames::SoundFrameState& s) {
  return Json{{"mic_block", vector_json(s.mic_block)}, {"source_block", vector_json(s.source_block)}};
}

Json header(const char* schema, double sound_speed) {
  return Json{{"schema", schema}, {"version", kSchemaVersion}, {"sound_speed", number(sound_speed)}};
}

// ---- reading ----

std::string join(const std::string& path, const std::string& key) { return path + "/" + key; }

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw SchemaError((path.empty() ? std::string("/") : path) + ": " + what);
}

const Json& field(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(join(path, key), "missing");
  return *it;
}

const Json* optional_field(const Json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double get_number(const Json& v, const std::string& path) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  fail(path, "expected a number");
}

long long get_integer(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<long long>();
}

bool get_bool(const Json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

std::string get_string(const Json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

std::vector<double> get_doubles(const Json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_number(v[i], join(path, std::to_string(i))));
  return out;
}

VecX get_vector(const Json& v, const std::string& path) {
  const auto d = get_doubles(v, path);
  return Eigen::Map<const VecX>(d.data(), static_cast<Eigen::Index>(d.size()));
}

Vec3 get_vec3(const Json& v, const std::string& path) {
  const auto d = get_doubles(v, path);
  if (d.size() != 3) fail(path, "expected 3 components, got " + std::to_string(d.size()));
  return Vec3(d[0], d[1], d[2]);
}

MatX get_matrix(const Json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of rows");
  if (v.empty()) return MatX();
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < v.size(); ++r) rows.push_back(get_doubles(v[r], join(path, std::to_string(r))));
  const std::size_t cols = rows.front().size();
  MatX m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      fail(join(path, std::to_string(r)), "row has " + std::to_string(rows[r].size()) +
                                              " entries, expected " + std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

frames::SoundFrameState get_state(const Json& v, const std::string& path) {
  frames::SoundFrameState s;
  s.mic_block = get_vector(field(v, "mic_block", path), join(path, "mic_block"));
  s.source_block = get_vector(field(v, "source_block", path), join(path, "source_block"));
  return s;
}

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what());
  }
}

void check_header(const Json& doc, const char* schema) {
  const auto name = get_string(field(doc, "schema", ""), "/schema");
  if (name != schema) fail("/schema", "expected \"" + std::string(schema) + "\", got \"" + name + "\"");
  const auto version = get_integer(field(doc, "version", ""), "/version");
  if (version != kSchemaVersion) {
    fail("/version", "version " + std::to_string(version) + " not recognized (supported: " +
                         std::to_string(kSchemaVersion) + ")");
  }
}

PhysicalConstants get_consts(const Json& doc) {
  PhysicalConstants c;
  c.sound_speed = get_number(field(doc, "sound_speed", ""), "/sound_speed");
  try {
    c.validate();
  } catch (const Error& e) {
    fail("/sound_speed", e.what());
  }
  return c;
}

int get_count(const Json& doc, const char* key) {
  const auto v = get_integer(field(doc, key, ""), std::string("/") + key);
  if (v < 0 || v > 100000) fail(std::string("/") + key, "out of range");
  return static_cast<int>(v);
}

// ---- CSV ----

std::string sanitize(std::string text) {
  for (char& ch : text) {
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ';';
  }
  return text;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw SchemaError(where + ": not a number: \"" + s + "\"");
  return v;
}

template <typename Int>
Int parse_int(const std::string& s, const std::string& where) {
  Int v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw SchemaError(where + ": not an integer: \"" + s + "\"");
  return v;
}

std::string csv_preamble(const char* schema, double sound_speed) {
  return std::string("# schema=") + schema + " version=" + std::to_string(kSchemaVersion) +
         " sound_speed=" + format_double(sound_speed) + "\n";
}

std::string join_columns(const std::vector<std::string>& cols) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += cols[i];
  }
  return out + "\n";
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, ptr);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

// ---- problem ----

EventTrajectory ProblemFile::truth_trajectory() const {
  if (!truth) throw MissingBlockError("problem has no ground truth");
  EventTrajectory t;
  t.positions = truth->events;
  t.intervals = intervals;
  return t;
}

void ProblemFile::validate() const {
  if (mic_count < 2) throw DimensionError("N must be at least 2, got " + std::to_string(mic_count));
  if (event_count < 4) throw DimensionError("K must be at least 4, got " + std::to_string(event_count));
  consts.validate();
  if (static_cast<int>(intervals.size()) != event_count - 1) {
    throw DimensionError("intervals has " + std::to_string(intervals.size()) + " entries, expected K-1 = " +
                         std::to_string(event_count - 1));
  }
  for (double dt : intervals) {
    if (!(dt > 0.0)) throw DimensionError("intervals must be positive");
  }
  measurements.validate_shape(mic_count, event_count);
  if (measurements.sigma_tdoa < 0.0 || measurements.sigma_odo < 0.0) {
    throw DimensionError("noise SDs must be nonnegative");
  }
  if (truth) {
    if (static_cast<int>(truth->mics.size()) != mic_count) {
      throw DimensionError("truth has " + std::to_string(truth->mics.size()) + " microphones, expected N = " +
                           std::to_string(mic_count));
    }
    if (static_cast<int>(truth->events.size()) != event_count) {
      throw DimensionError("truth has " + std::to_string(truth->events.size()) + " events, expected K = " +
                           std::to_string(event_count));
    }
  }
  if (initial_state) {
    if (initial_state->mic_block.size() != frames::StateLayout::mic_block_size(mic_count)) {
      throw DimensionError("initial_state mic_block has " + std::to_string(initial_state->mic_block.size()) +
                           " entries, expected 5N-1 = " +
                           std::to_string(frames::StateLayout::mic_block_size(mic_count)));
    }
    if (initial_state->source_block.size() != frames::StateLayout::source_block_size(event_count)) {
      throw DimensionError("initial_state source_block has " +
                           std::to_string(initial_state->source_block.size()) + " entries, expected 3K-6 = " +
                           std::to_string(frames::StateLayout::source_block_size(event_count)));
    }
  }
}

void require_blocks(const ProblemFile& file, Mode mode) {
  if (mode == Mode::hybrid && !file.measurements.has_tdoa_s()) {
    throw MissingBlockError("measurements/tdoa_s is required in hybrid mode");
  }
  if (!file.measurements.has_tdoa_m()) throw MissingBlockError("measurements/tdoa_m is required");
  if (!file.measurements.has_odometry()) throw MissingBlockError("measurements/odometry is required");
}

std::string format_problem(const ProblemFile& file) {
  file.validate();
  Json doc = header(kProblemSchema, file.consts.sound_speed);
  doc["N"] = file.mic_count;
  doc["K"] = file.event_count;
  doc["intervals"] = vector_json(file.intervals);
  Json m{{"sigma_tdoa", number(file.measurements.sigma_tdoa)}, {"sigma_odo", number(file.measurements.sigma_odo)}};
  if (file.measurements.has_tdoa_s()) m["tdoa_s"] = matrix_json(file.measurements.tdoa_s);
  if (file.measurements.has_tdoa_m()) m["tdoa_m"] = matrix_json(file.measurements.tdoa_m);
  if (file.measurements.has_odometry()) m["odometry"] = matrix_json(file.measurements.odometry);
  doc["measurements"] = std::move(m);
  if (file.truth) {
    Json mics = Json::array();
    for (const auto& mic : file.truth->mics) {
      mics.push_back({{"position", vec3_json(mic.position)}, {"offset", number(mic.offset)}, {"drift", number(mic.drift)}});
    }
    Json events = Json::array();
    for (const auto& e : file.truth->events) events.push_back(vec3_json(e));
    doc["truth"] = Json{{"mics", std::move(mics)}, {"events", std::move(events)}};
  }
  if (file.initial_state) doc["initial_state"] = state_json(*file.initial_state);
  return doc.dump(2) + "\n";
}

ProblemFile parse_problem(const std::string& text) {
  const Json doc = parse_json(text);
  check_header(doc, kProblemSchema);
  ProblemFile f;
  f.consts = get_consts(doc);
  f.mic_count = get_count(doc, "N");
  f.event_count = get_count(doc, "K");
  f.intervals = get_doubles(field(doc, "intervals", ""), "/intervals");

  const Json& m = field(doc, "measurements", "");
  const std::string mp = "/measurements";
  f.measurements.sigma_tdoa = get_number(field(m, "sigma_tdoa", mp), mp + "/sigma_tdoa");
  f.measurements.sigma_odo = get_number(field(m, "sigma_odo", mp), mp + "/sigma_odo");
  if (const Json* b = optional_field(m, "tdoa_s")) f.measurements.tdoa_s = get_matrix(*b, mp + "/tdoa_s");
  if (const Json* b = optional_field(m, "tdoa_m")) f.measurements.tdoa_m = get_matrix(*b, mp + "/tdoa_m");
  if (const Json* b = optional_field(m, "odometry")) f.measurements.odometry = get_matrix(*b, mp + "/odometry");

  if (const Json* t = optional_field(doc, "truth")) {
    GroundTruth truth;
    const Json& mics = field(*t, "mics", "/truth");
    if (!mics.is_array()) fail("/truth/mics", "expected an array");
    for (std::size_t i = 0; i < mics.size(); ++i) {
      const std::string p = "/truth/mics/" + std::to_string(i);
      MicrophoneState mic;
      mic.position = get_vec3(field(mics[i], "position", p), p + "/position");
      mic.offset = get_number(field(mics[i], "offset", p), p + "/offset");
      mic.drift = get_number(field(mics[i], "drift", p), p + "/drift");
      truth.mics.push_back(mic);
    }
    const Json& events = field(*t, "events", "/truth");
    if (!events.is_array()) fail("/truth/events", "expected an array");
    for (std::size_t j = 0; j < events.size(); ++j) {
      truth.events.push_back(get_vec3(events[j], "/truth/events/" + std::to_string(j)));
    }
    f.truth = std::move(truth);
  }
  if (const Json* s = optional_field(doc, "initial_state")) f.initial_state = get_state(*s, "/initial_state");

  try {
    f.validate();
  } catch (const DimensionError& e) {
    throw SchemaError(std::string("inconsistent dimensions: ") + e.what());
  }
  return f;
}

ProblemFile read_problem(const std::filesystem::path& path) {
  try {
    return parse_problem(read_text(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_problem(const ProblemFile& file, const std::filesystem::path& path) {
  write_text_atomic(path, format_problem(file));
}

// ---- report ----

ResidualStats residual_stats(const solver::CalibrationProblem& problem,
                             const frames::SoundFrameState& state) {
  const VecX r = solver::residual(problem, state);
  const int n = problem.mic_count();
  const int k = problem.event_count();
  auto rms = [&](Eigen::Index start, Eigen::Index len) {
    return len == 0 ? 0.0 : std::sqrt(r.segment(start, len).squaredNorm() / static_cast<double>(len));
  };
  ResidualStats out;
  Eigen::Index at = 0;
  if (problem.mode == Mode::hybrid) {
    const Eigen::Index len = static_cast<Eigen::Index>(n) * (k - 1);
    out.tdoa_s_rms = rms(at, len);
    at += len;
  }
  const Eigen::Index m_len = static_cast<Eigen::Index>(n - 1) * k;
  out.tdoa_m_rms = rms(at, m_len);
  at += m_len;
  out.odometry_rms = rms(at, 3 * (k - 1));
  return out;
}

std::string format_report(const ReportFile& report) {
  Json doc = header(kReportSchema, report.consts.sound_speed);
  doc["mode"] = std::string(to_string(report.mode));
  doc["N"] = report.mic_count;
  doc["K"] = report.event_count;
  if (report.solution) {
    const auto& s = *report.solution;
    doc["solution"] = Json{{"converged", s.converged},
                           {"iterations", s.iterations},
                           {"final_cost", number(s.final_cost)},
                           {"cost_history", vector_json(s.cost_history)},
                           {"state_sound", state_json(s.state_sound)},
                           {"state_mic", vector_json(s.state_mic.values)}};
  }
  if (report.residuals) {
    Json r = Json::object();
    if (report.residuals->tdoa_s_rms) r["tdoa_s_rms"] = number(*report.residuals->tdoa_s_rms);
    r["tdoa_m_rms"] = number(report.residuals->tdoa_m_rms);
    r["odometry_rms"] = number(report.residuals->odometry_rms);
    doc["residuals"] = std::move(r);
  }
  if (report.errors) {
    doc["errors"] = Json{{"loc", number(report.errors->loc)},
                         {"off", number(report.errors->off)},
                         {"dri", number(report.errors->dri)},
                         {"mirrored", report.errors->mirrored}};
  }
  if (report.crlb) {
    const auto& c = *report.crlb;
    doc["crlb"] = Json{{"d_crlb", {{"loc", number(c.d_crlb.loc)}, {"off", number(c.d_crlb.off)}, {"dri", number(c.d_crlb.dri)}}},
                       {"degenerate", c.degenerate},
                       {"condition", number(c.condition)},
                       {"crlb_mic", matrix_json(c.crlb_mic)}};
  }
  if (report.noise) {
    const auto& n = *report.noise;
    doc["noise"] = Json{
        {"sigma_s", number(n.s.sigma_s)},
        {"sigma_m", number(n.m.sigma_m)},
        {"cases", noise::case_labels(noise::classify_noise_case(n.s.sigma_s, n.m.sigma_m))},
        {"tdoa_s", {{"drift_hat", vector_json(n.s.drift_hat)},
                    {"sample_count", n.s.sample_count},
                    {"degrees_of_freedom", n.s.degrees_of_freedom}}},
        {"tdoa_m", {{"offset_hat", vector_json(n.m.offset_hat)},
                    {"drift_hat", vector_json(n.m.drift_hat)},
                    {"sample_count", n.m.sample_count},
                    {"degrees_of_freedom", n.m.degrees_of_freedom}}}};
  }
  return doc.dump(2) + "\n";
}

ReportFile parse_report(const std::string& text) {
  const Json doc = parse_json(text);
  check_header(doc, kReportSchema);
  ReportFile r;
  r.consts = get_consts(doc);
  try {
    r.mode = mode_from_string(get_string(field(doc, "mode", ""), "/mode"));
  } catch (const Error& e) {
    fail("/mode", e.what());
  }
  r.mic_count = get_count(doc, "N");
  r.event_count = get_count(doc, "K");

  if (const Json* s = optional_field(doc, "solution")) {
    const std::string p = "/solution";
    SolutionSummary sol;
    sol.converged = get_bool(field(*s, "converged", p), p + "/converged");
    sol.iterations = static_cast<int>(get_integer(field(*s, "iterations", p), p + "/iterations"));
    sol.final_cost = get_number(field(*s, "final_cost", p), p + "/final_cost");
    sol.cost_history = get_doubles(field(*s, "cost_history", p), p + "/cost_history");
    sol.state_sound = get_state(field(*s, "state_sound", p), p + "/state_sound");
    sol.state_mic.values = get_vector(field(*s, "state_mic", p), p + "/state_mic");
    r.solution = std::move(sol);
  }
  if (const Json* s = optional_field(doc, "residuals")) {
    const std::string p = "/residuals";
    ResidualStats st;
    if (const Json* v = optional_field(*s, "tdoa_s_rms")) st.tdoa_s_rms = get_number(*v, p + "/tdoa_s_rms");
    st.tdoa_m_rms = get_number(field(*s, "tdoa_m_rms", p), p + "/tdoa_m_rms");
    st.odometry_rms = get_number(field(*s, "odometry_rms", p), p + "/odometry_rms");
    r.residuals = st;
  }
  if (const Json* s = optional_field(doc, "errors")) {
    const std::string p = "/errors";
    solver::ErrorMetrics e;
    e.loc = get_number(field(*s, "loc", p), p + "/loc");
    e.off = get_number(field(*s, "off", p), p + "/off");
    e.dri = get_number(field(*s, "dri", p), p + "/dri");
    e.mirrored = get_bool(field(*s, "mirrored", p), p + "/mirrored");
    r.errors = e;
  }
  if (const Json* s = optional_field(doc, "crlb")) {
    const std::string p = "/crlb";
    CrlbSummary c;
    const Json& d = field(*s, "d_crlb", p);
    c.d_crlb.loc = get_number(field(d, "loc", p + "/d_crlb"), p + "/d_crlb/loc");
    c.d_crlb.off = get_number(field(d, "off", p + "/d_crlb"), p + "/d_crlb/off");
    c.d_crlb.dri = get_number(field(d, "dri", p + "/d_crlb"), p + "/d_crlb/dri");
    c.degenerate = get_bool(field(*s, "degenerate", p), p + "/degenerate");
    c.condition = get_number(field(*s, "condition", p), p + "/condition");
    c.crlb_mic = get_matrix(field(*s, "crlb_mic", p), p + "/crlb_mic");
    r.crlb = std::move(c);
  }
  if (const Json* s = optional_field(doc, "noise")) {
    const std::string p = "/noise";
    noise::NoiseEstimate n;
    n.s.sigma_s = get_number(field(*s, "sigma_s", p), p + "/sigma_s");
    n.m.sigma_m = get_number(field(*s, "sigma_m", p), p + "/sigma_m");
    const Json& ss = field(*s, "tdoa_s", p);
    n.s.drift_hat = get_doubles(field(ss, "drift_hat", p + "/tdoa_s"), p + "/tdoa_s/drift_hat");
    n.s.sample_count = static_cast<int>(get_integer(field(ss, "sample_count", p + "/tdoa_s"), p + "/tdoa_s/sample_count"));
    n.s.degrees_of_freedom =
        static_cast<int>(get_integer(field(ss, "degrees_of_freedom", p + "/tdoa_s"), p + "/tdoa_s/degrees_of_freedom"));
    const Json& sm = field(*s, "tdoa_m", p);
    n.m.offset_hat = get_doubles(field(sm, "offset_hat", p + "/tdoa_m"), p + "/tdoa_m/offset_hat");
    n.m.drift_hat = get_doubles(field(sm, "drift_hat", p + "/tdoa_m"), p + "/tdoa_m/drift_hat");
    n.m.sample_count = static_cast<int>(get_integer(field(sm, "sample_count", p + "/tdoa_m"), p + "/tdoa_m/sample_count"));
    n.m.degrees_of_freedom =
        static_cast<int>(get_integer(field(sm, "degrees_of_freedom", p + "/tdoa_m"), p + "/tdoa_m/degrees_of_freedom"));
    r.noise = std::move(n);
  }
  return r;
}

ReportFile read_report(const std::filesystem::path& path) {
  try {
    return parse_report(read_text(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_report(const ReportFile& report, const std::filesystem::path& path) {
  write_text_atomic(path, format_report(report));
}

// ---- grid ----

std::string format_grid(const sim::ExperimentGrid& grid) {
  Json doc = header(kGridSchema, grid.consts.sound_speed);
  doc["trajectories"] = grid.trajectories;
  doc["mic_counts"] = grid.mic_counts;
  Json levels = Json::array();
  for (const auto& l : grid.init_noise_sds) levels.push_back(Json::array({l[0], l[1], l[2]}));
  doc["init_noise_sds"] = std::move(levels);
  doc["tdoa_noise_sds"] = grid.tdoa_noise_sds;
  doc["trials_per_cell"] = grid.trials_per_cell;
  doc["sigma_odo"] = grid.sigma_odo;
  doc["seed"] = grid.seed;
  Json modes = Json::array();
  for (Mode m : grid.modes) modes.push_back(std::string(to_string(m)));
  doc["modes"] = std::move(modes);
  doc["compute_crlb"] = grid.compute_crlb;
  const auto& o = grid.solver_options;
  doc["solver"] = Json{{"max_iter", o.max_iter},
                       {"step_tol", o.step_tol},
                       {"cost_tol", o.cost_tol},
                       {"damping_floor", o.damping_floor},
                       {"damping_ceiling", o.damping_ceiling},
                       {"rank_threshold", o.rank_threshold}};
  return doc.dump(2) + "\n";
}

sim::ExperimentGrid parse_grid(const std::string& text) {
  const Json doc = parse_json(text);
  check_header(doc, kGridSchema);
  sim::ExperimentGrid g;
  if (const Json* p = optional_field(doc, "preset")) {
    const auto name = get_string(*p, "/preset");
    if (name == "part-a") {
      g = sim::ExperimentGrid::part_a();
    } else if (name == "part-b") {
      g = sim::ExperimentGrid::part_b();
    } else if (name == "part-cd") {
      g = sim::ExperimentGrid::part_cd();
    } else {
      fail("/preset", "unknown preset \"" + name + "\" (expected part-a, part-b or part-cd)");
    }
  }
  if (optional_field(doc, "sound_speed")) g.consts = get_consts(doc);
  auto ints = [&](const char* key, std::vector<int>& out) {
    if (const Json* v = optional_field(doc, key)) {
      const std::string p = std::string("/") + key;
      if (!v->is_array()) fail(p, "expected an array of integers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        out.push_back(static_cast<int>(get_integer((*v)[i], join(p, std::to_string(i)))));
      }
    }
  };
  ints("trajectories", g.trajectories);
  ints("mic_counts", g.mic_counts);
  if (const Json* v = optional_field(doc, "init_noise_sds")) {
    if (!v->is_array()) fail("/init_noise_sds", "expected an array");
    g.init_noise_sds.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string p = "/init_noise_sds/" + std::to_string(i);
      const Json& e = (*v)[i];
      if (e.is_array()) {
        const auto d = get_doubles(e, p);
        if (d.size() != 3) fail(p, "expected one SD per trajectory (3 values)");
        g.init_noise_sds.push_back({d[0], d[1], d[2]});
      } else {
        const double s = get_number(e, p);
        g.init_noise_sds.push_back({s, s, s});
      }
    }
  }
  if (const Json* v = optional_field(doc, "tdoa_noise_sds")) g.tdoa_noise_sds = get_doubles(*v, "/tdoa_noise_sds");
  if (const Json* v = optional_field(doc, "trials_per_cell")) {
    g.trials_per_cell = static_cast<int>(get_integer(*v, "/trials_per_cell"));
  }
  if (const Json* v = optional_field(doc, "sigma_odo")) g.sigma_odo = get_number(*v, "/sigma_odo");
  if (const Json* v = optional_field(doc, "seed")) {
    if (!v->is_number_unsigned()) fail("/seed", "expected a nonnegative integer");
    g.seed = v->get<std::uint64_t>();
  }
  if (const Json* v = optional_field(doc, "modes")) {
    if (!v->is_array()) fail("/modes", "expected an array of mode names");
    g.modes.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string p = "/modes/" + std::to_string(i);
      try {
        g.modes.push_back(mode_from_string(get_string((*v)[i], p)));
      } catch (const Error& e) {
        fail(p, e.what());
      }
    }
  }
  if (const Json* v = optional_field(doc, "compute_crlb")) g.compute_crlb = get_bool(*v, "/compute_crlb");
  if (const Json* s = optional_field(doc, "solver")) {
    auto& o = g.solver_options;
    if (const Json* v = optional_field(*s, "max_iter")) o.max_iter = static_cast<int>(get_integer(*v, "/solver/max_iter"));
    if (const Json* v = optional_field(*s, "step_tol")) o.step_tol = get_number(*v, "/solver/step_tol");
    if (const Json* v = optional_field(*s, "cost_tol")) o.cost_tol = get_number(*v, "/solver/cost_tol");
    if (const Json* v = optional_field(*s, "damping_floor")) o.damping_floor = get_number(*v, "/solver/damping_floor");
    if (const Json* v = optional_field(*s, "damping_ceiling")) o.damping_ceiling = get_number(*v, "/solver/damping_ceiling");
    if (const Json* v = optional_field(*s, "rank_threshold")) o.rank_threshold = get_number(*v, "/solver/rank_threshold");
  }
  try {
    g.validate();
  } catch (const DimensionError& e) {
    throw SchemaError(std::string("invalid grid: ") + e.what());
  }
  return g;
}

sim::ExperimentGrid read_grid(const std::filesystem::path& path) {
  try {
    return parse_grid(read_text(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_grid(const sim::ExperimentGrid& grid, const std::filesystem::path& path) {
  write_text_atomic(path, format_grid(grid));
}

// ---- trial CSV ----

const std::vector<std::string>& trial_csv_columns() {
  static const std::vector<std::string> cols{
      "seed",      "trajectory", "mic_count",  "event_count", "init_level", "sigma_init",
      "sigma_tdoa", "sigma_odo", "trial",      "mode",        "converged",  "iterations",
      "loc_err",   "off_err",    "dri_err",    "d_crlb_loc",  "d_crlb_off", "d_crlb_dri",
      "crlb_degenerate", "failure"};
  return cols;
}

std::string format_trial_csv(const std::vector<sim::TrialRecord>& records, double sound_speed) {
  std::string out = csv_preamble(kTrialSchema, sound_speed) + join_columns(trial_csv_columns());
  for (const auto& rec : records) {
    for (const auto& r : rec.results) {
      std::vector<std::string> f{std::to_string(rec.seed),
                                 std::to_string(rec.trajectory),
                                 std::to_string(rec.mic_count),
                                 std::to_string(rec.event_count),
                                 std::to_string(rec.init_level),
                                 format_double(rec.sigma_init),
                                 format_double(rec.sigma_tdoa),
                                 format_double(rec.sigma_odo),
                                 std::to_string(rec.trial),
                                 std::string(to_string(r.mode)),
                                 r.converged ? "1" : "0",
                                 std::to_string(r.iterations),
                                 format_double(r.loc_err),
                                 format_double(r.off_err),
                                 format_double(r.dri_err),
                                 format_double(r.d_crlb.loc),
                                 format_double(r.d_crlb.off),
                                 format_double(r.d_crlb.dri),
                                 r.crlb_degenerate ? "1" : "0",
                                 sanitize(r.failure)};
      out += join_columns(f);
    }
  }
  return out;
}

void write_trial_csv(const std::vector<sim::TrialRecord>& records, double sound_speed,
                     const std::filesystem::path& path) {
  write_text_atomic(path, format_trial_csv(records, sound_speed));
}

std::vector<sim::TrialRecord> parse_trial_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_header = false;
  const auto& cols = trial_csv_columns();
  std::vector<sim::TrialRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto f = split(line);
    const std::string where = "line " + std::to_string(line_no);
    if (!have_header) {
      if (f != cols) throw SchemaError(where + ": unexpected trial CSV header");
      have_header = true;
      continue;
    }
    if (f.size() != cols.size()) {
      throw SchemaError(where + ": expected " + std::to_string(cols.size()) + " fields, got " +
                        std::to_string(f.size()));
    }
    sim::TrialRecord rec;
    rec.seed = parse_int<std::uint64_t>(f[0], where + " seed");
    rec.trajectory = parse_int<int>(f[1], where + " trajectory");
    rec.mic_count = parse_int<int>(f[2], where + " mic_count");
    rec.event_count = parse_int<int>(f[3], where + " event_count");
    rec.init_level = parse_int<int>(f[4], where + " init_level");
    rec.sigma_init = parse_double(f[5], where + " sigma_init");
    rec.sigma_tdoa = parse_double(f[6], where + " sigma_tdoa");
    rec.sigma_odo = parse_double(f[7], where + " sigma_odo");
    rec.trial = parse_int<int>(f[8], where + " trial");
    sim::ModeResult r;
    try {
      r.mode = mode_from_string(f[9]);
    } catch (const Error& e) {
      throw SchemaError(where + " mode: " + e.what());
    }
    r.converged = parse_int<int>(f[10], where + " converged") != 0;
    r.iterations = parse_int<int>(f[11], where + " iterations");
    r.loc_err = parse_double(f[12], where + " loc_err");
    r.off_err = parse_double(f[13], where + " off_err");
    r.dri_err = parse_double(f[14], where + " dri_err");
    r.d_crlb.loc = parse_double(f[15], where + " d_crlb_loc");
    r.d_crlb.off = parse_double(f[16], where + " d_crlb_off");
    r.d_crlb.dri = parse_double(f[17], where + " d_crlb_dri");
    r.crlb_degenerate = parse_int<int>(f[18], where + " crlb_degenerate") != 0;
    r.failure = f[19];

    const auto key = [](const sim::TrialRecord& t) {
      return std::make_tuple(t.seed, t.trajectory, t.mic_count, t.init_level, t.sigma_tdoa, t.trial);
    };
    if (!out.empty() && key(out.back()) == key(rec)) {
      out.back().results.push_back(r);
    } else {
      rec.results.push_back(r);
      out.push_back(std::move(rec));
    }
  }
  if (!have_header) throw SchemaError("trial CSV has no header");
  return out;
}

std::vector<sim::TrialRecord> read_trial_csv(const std::filesystem::path& path) {
  try {
    return parse_trial_csv(read_text(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

// ---- aggregate CSV ----

const std::vector<std::string>& aggregate_csv_columns() {
  static const std::vector<std::string> cols{
      "mic_count",     "init_level",   "sigma_tdoa",   "mode",         "trials",
      "converged",     "failures",     "loc_median",   "loc_q1",       "loc_q3",
      "off_median",    "off_q1",       "off_q3",       "dri_median",   "dri_q1",
      "dri_q3",        "d_crlb_loc_mean", "d_crlb_off_mean", "d_crlb_dri_mean"};
  return cols;
}

std::string format_aggregate_csv(const std::vector<sim::AggregateRow>& rows, double sound_speed) {
  std::string out = csv_preamble(kAggregateSchema, sound_speed) + join_columns(aggregate_csv_columns());
  for (const auto& r : rows) {
    std::vector<std::string> f{std::to_string(r.mic_count),
                               std::to_string(r.init_level),
                               format_double(r.sigma_tdoa),
                               std::string(to_string(r.mode)),
                               std::to_string(r.trials),
                               std::to_string(r.converged),
                               std::to_string(r.failures),
                               format_double(r.loc.median),
                               format_double(r.loc.q1),
                               format_double(r.loc.q3),
                               format_double(r.off.median),
                               format_double(r.off.q1),
                               format_double(r.off.q3),
                               format_double(r.dri.median),
                               format_double(r.dri.q1),
                               format_double(r.dri.q3),
                               format_double(r.mean_d_crlb_loc),
                               format_double(r.mean_d_crlb_off),
                               format_double(r.mean_d_crlb_dri)};
    out += join_columns(f);
  }
  return out;
}

void write_aggregate_csv(const std::vector<sim::AggregateRow>& rows, double sound_speed,
                         const std::filesystem::path& path) {
  write_text_atomic(path, format_aggregate_csv(rows, sound_speed));
}

}  // namespace asyncmic::io
