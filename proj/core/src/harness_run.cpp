#include "mim/harness.hpp"

#include <fstream>
#include <sstream>

namespace mim::harness {
namespace {

std::vector<double> parse_doubles(std::string_view s) {
  std::vector<double> out;
  std::string item;
  std::istringstream in{std::string(s)};
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

opt::EvalRow parse_row(std::string_view line) {
  const auto v = parse_doubles(line);
  if (v.size() != 3) throw std::invalid_argument("malformed row '" + std::string(line) + "'");
  return {static_cast<std::uint64_t>(v[0]), v[1], v[2]};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

std::string curve_header() { return "epoch,loss,rel_l2"; }

std::string format_row(const opt::EvalRow& r) {
  return std::to_string(r.epoch) + "," + fmt17(r.loss) + "," + fmt17(r.rel_l2);
}

std::vector<opt::EvalRow> parse_curve(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != curve_header()) {
    throw std::invalid_argument("curve file: missing header " + curve_header());
  }
  std::vector<opt::EvalRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    rows.push_back(parse_row(line));
  }
  return rows;
}

std::filesystem::path curve_path(const ExperimentConfig& c) { return c.output + ".curve.csv"; }
std::filesystem::path record_path(const ExperimentConfig& c) { return c.output + ".record"; }

// Record schema, one key=value per line:
//   format, version, status (ok | diverged), message, epochs, final_rel_l2,
//   seconds, seed.init, seed.eval, seed.sampling, parameter_count,
//   config.<key> for every config key, row=<epoch,loss,rel_l2> per eval row,
//   params=<comma separated values>.
std::string format_record(const RunRecord& r) {
  std::ostringstream o;
  o << "format=mim-record-1\n"
    << "version=" << r.version << "\n"
    << "status=" << (r.diverged ? "diverged" : "ok") << "\n"
    << "message=" << one_line(r.message) << "\n"
    << "epochs=" << r.epochs << "\n"
    << "final_rel_l2=" << fmt17(r.final_error) << "\n"
    << "seconds=" << fmt17(r.seconds) << "\n"
    << "seed.init=" << r.seeds.init << "\n"
    << "seed.eval=" << r.seeds.eval << "\n"
    << "seed.sampling=" << r.seeds.sampling << "\n"
    << "parameter_count=" << r.params.size() << "\n";
  std::istringstream cfg(format_config(r.config));
  for (std::string line; std::getline(cfg, line);) {
    const auto eq = line.find(" = ");
    o << "config." << line.substr(0, eq) << "=" << line.substr(eq + 3) << "\n";
  }
  for (const auto& row : r.rows) o << "row=" << format_row(row) << "\n";
  o << "params=";
  for (std::size_t i = 0; i < r.params.size(); ++i) o << (i ? "," : "") << fmt17(r.params[i]);
  o << "\n";
  return o.str();
}

RunRecord parse_record(std::string_view text) {
  RunRecord r;
  std::istringstream in{std::string(text)};
  std::string line;
  bool has_format = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("record: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "format") {
      if (value != "mim-record-1") throw std::invalid_argument("record: unknown format " + value);
      has_format = true;
    } else if (key == "version") {
      r.version = value;
    } else if (key == "status") {
      r.diverged = value == "diverged";
    } else if (key == "message") {
      r.message = value;
    } else if (key == "epochs") {
      r.epochs = std::stoull(value);
    } else if (key == "final_rel_l2") {
      r.final_error = std::stod(value);
    } else if (key == "seconds") {
      r.seconds = std::stod(value);
    } else if (key == "seed.init") {
      r.seeds.init = std::stoull(value);
    } else if (key == "seed.eval") {
      r.seeds.eval = std::stoull(value);
    } else if (key == "seed.sampling") {
      r.seeds.sampling = std::stoull(value);
    } else if (key == "parameter_count") {
      r.params.reserve(std::stoull(value));
    } else if (key.starts_with("config.")) {
      set_field(r.config, key.substr(7), value);
    } else if (key == "row") {
      r.rows.push_back(parse_row(value));
    } else if (key == "params") {
      r.params = parse_doubles(value);
    } else {
      throw std::invalid_argument("record: unknown key " + key);
    }
  }
  if (!has_format) throw std::invalid_argument("record: missing format line");
  return r;
}

RunRecord run(const ExperimentConfig& raw, bool write_files) {
  const ExperimentConfig c = with_defaults(raw);
  c.validate();
  Problem p = build_problem(c);
  RunRecord r;
  r.config = c;
  r.version = MIM_VERSION;
  r.seeds = run_seeds(c.seed);

  std::ofstream curve;
  if (write_files) {
    const auto dir = std::filesystem::path(c.output).parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    curve.open(curve_path(c), std::ios::trunc);
    if (!curve) throw std::runtime_error("cannot write " + curve_path(c).string());
    curve << curve_header() << "\n" << std::flush;
  }

  opt::TrainConfig tc;
  tc.max_epochs = c.max_epochs;
  tc.eval_interval = c.eval_interval;
  tc.seed = r.seeds.sampling;
  tc.freeze_samples = c.freeze_samples;
  tc.adam.alpha = c.alpha;
  tc.eval.chunk = c.chunk;
  const opt::TrainResult t =
      opt::train(*p.objective, p.trial->init(r.seeds.init), p.eval_x, p.eval_u, tc,
                 [&](const opt::EvalRow& row) {
                   if (curve.is_open()) curve << format_row(row) << "\n" << std::flush;
                 });
  r.rows = t.rows;
  r.diverged = t.diverged;
  r.message = t.message;
  r.epochs = t.epochs;
  r.final_error = t.final_error;
  r.seconds = t.seconds;
  r.params = t.params;
  if (write_files) {
    if (r.diverged) curve << "# diverged: " << r.message << "\n";
    curve.close();
    write_file(record_path(c), format_record(r));
  }
  return r;
}

RunRecord run_or_resume(const ExperimentConfig& raw, bool* reused) {
  const ExperimentConfig c = with_defaults(raw);
  if (std::ifstream in(record_path(c)); in) {
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      RunRecord old = parse_record(ss.str());
      if (!old.diverged && format_config(old.config) == format_config(c)) {
        if (reused) *reused = true;
        return old;
      }
    } catch (const std::exception&) {
      // Unreadable record: run again.
    }
  }
  if (reused) *reused = false;
  return run(c);
}

}  // namespace mim::harness
