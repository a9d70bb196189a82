#include "mim/harness.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <sstream>

namespace mim::harness {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "mim_harness_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

ExperimentConfig tiny(const std::string& name) {
  ExperimentConfig c = parse_config(
      "experiment = dirichlet-elliptic-ball\n"
      "method = MIM\n"
      "d = 2\nn = 4\nm = 1\n"
      "interior = 64\n"
      "max_epochs = 30\n"
      "eval_interval = 10\n"
      "eval_points = 128\n"
      "seed = 7\n");
  c.output = scratch(name).string();
  return c;
}

TEST(Config, ParsesKeysCommentsAndDefaults) {
  const auto c = parse_config(
      "# Neumann cube baseline\n"
      "experiment = neumann-cube\n"
      "method = DGM   # penalty\n"
      "d = 4\n\n"
      "n = 15\nm = 2\ninterior = 500\n");
  EXPECT_EQ(c.experiment, "neumann-cube");
  EXPECT_EQ(c.method, Method::DGM);
  EXPECT_EQ(c.d, 4);
  EXPECT_EQ(c.interior, 500);
  // The pair's penalty defaults: lambda = 1 and 1000 points per face.
  EXPECT_EQ(c.lambda, 1.0);
  EXPECT_EQ(c.boundary, 8000);
  EXPECT_EQ(c.resolved_activation(), nn::Activation::ReQu);
}

TEST(Config, FormatRoundTrips) {
  ExperimentConfig c = parse_config("experiment = wave\nmethod = MIM2\nd = 3\nactivation = ReCu\nalpha = 0.00025\n");
  c.freeze_samples = true;
  c.output = "some/where";
  const ExperimentConfig back = parse_config(format_config(c));
  EXPECT_EQ(format_config(back), format_config(c));
  EXPECT_EQ(back.alpha, 0.00025);
  EXPECT_EQ(back.activation, nn::Activation::ReCu);
}

TEST(Config, UnknownExperimentListsValidIds) {
  try {
    parse_config("experiment = heat-ball\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "experiment");
    const std::string msg = e.what();
    for (const auto& entry : catalogue()) EXPECT_NE(msg.find(entry.id), std::string::npos) << entry.id;
  }
}

TEST(Config, FieldLevelErrors) {
  auto field_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(field_of("method = MIM\n"), "experiment");
  EXPECT_EQ(field_of("experiment = monge-ampere\nmethod = DGM\n"), "method");
  EXPECT_EQ(field_of("experiment = monge-ampere\nd = 12\n"), "d");
  EXPECT_EQ(field_of("experiment = periodic-1d-highfreq\nd = 2\n"), "d");
  EXPECT_EQ(field_of("experiment = dirichlet-elliptic-ball\nn = ten\n"), "n");
  EXPECT_EQ(field_of("experiment = dirichlet-elliptic-ball\ncolour = red\n"), "colour");
  EXPECT_EQ(field_of("experiment = dirichlet-elliptic-ball\ninterior = 0\n"), "interior");
  EXPECT_EQ(field_of("experiment = dirichlet-elliptic-ball\nactivation = tanh\n"), "activation");
  // Penalties only where they are part of the compared method.
  EXPECT_EQ(field_of("experiment = dirichlet-elliptic-ball\nlambda = 2\n"), "lambda");
  EXPECT_EQ(field_of("experiment = parabolic\nmethod = DGM\n"), "<none>");
  EXPECT_EQ(field_of("experiment = dirichlet-elliptic-ball\nd = 2\n"), "<none>");
}

TEST(Config, MissingFileIsAnError) {
  EXPECT_THROW(load_config(scratch("does-not-exist.cfg")), std::exception);
}

TEST(Catalogue, EveryEntryBuildsAProblem) {
  for (const auto& e : catalogue()) {
    for (Method m : e.methods) {
      ExperimentConfig c;
      c.experiment = e.id;
      c.method = m;
      c.d = std::max(2, e.min_d);
      if (c.d > e.max_d) c.d = e.max_d;
      c.n = 4;
      c.m = 1;
      c.interior = 16;
      c.eval_points = 16;
      c.k = e.id == "periodic-product" ? 3 : 1;
      c = with_defaults(c);
      SCOPED_TRACE(e.id + " " + std::string(loss::to_string(m)));
      const Problem p = build_problem(c);
      EXPECT_EQ(p.eval_x.cols(), 16);
      EXPECT_EQ(p.eval_u.cols(), 16);
      EXPECT_GT(p.trial->parameter_count(), 0u);
    }
  }
}

TEST(Seeds, StreamsAreDistinctAndStable) {
  const RunSeeds a = run_seeds(1), b = run_seeds(1), c = run_seeds(2);
  EXPECT_EQ(a.init, b.init);
  EXPECT_EQ(a.eval, b.eval);
  EXPECT_NE(a.init, a.eval);
  EXPECT_NE(a.init, c.init);
}

TEST(Run, WritesCurveAndRecord) {
  const ExperimentConfig c = tiny("files");
  const RunRecord r = run(c);
  EXPECT_FALSE(r.diverged);
  const std::string curve = slurp(curve_path(c));
  EXPECT_EQ(curve.substr(0, curve.find('\n')), "epoch,loss,rel_l2");
  const auto rows = parse_curve(curve);
  ASSERT_EQ(rows.size(), 4u);  // epochs 0, 10, 20 and the final 30
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i - 1].epoch, rows[i].epoch);
  EXPECT_EQ(rows.back().epoch, 30u);
  EXPECT_EQ(rows.back().rel_l2, r.final_error);
  EXPECT_TRUE(std::filesystem::exists(record_path(c)));
}

TEST(Run, SameConfigAndSeedGiveIdenticalCurves) {
  const ExperimentConfig a = tiny("det_a");
  ExperimentConfig b = a;
  b.output = scratch("det_b").string();
  run(a);
  run(b);
  EXPECT_EQ(slurp(curve_path(a)), slurp(curve_path(b)));
  ExperimentConfig other = a;
  other.seed = 8;
  other.output = scratch("det_c").string();
  run(other);
  EXPECT_NE(slurp(curve_path(a)), slurp(curve_path(other)));
}

TEST(Run, RecordEchoReproducesTheRun) {
  const ExperimentConfig c = tiny("echo");
  const RunRecord first = run(c);
  const RunRecord parsed = parse_record(slurp(record_path(c)));
  EXPECT_EQ(format_config(parsed.config), format_config(c));
  EXPECT_EQ(parsed.final_error, first.final_error);
  EXPECT_EQ(parsed.params, first.params);
  EXPECT_EQ(parsed.rows.size(), first.rows.size());
  EXPECT_EQ(parsed.seeds.init, first.seeds.init);
  EXPECT_EQ(parsed.version, first.version);

  const RunRecord again = run(parsed.config, false);
  EXPECT_EQ(again.final_error, first.final_error);  // bit-identical
  EXPECT_EQ(again.params, first.params);
}

TEST(Run, ResumeReusesOnlyMatchingRecords) {
  ExperimentConfig c = tiny("resume");
  const RunRecord first = run(c);
  bool reused = false;
  const RunRecord same = run_or_resume(c, &reused);
  EXPECT_TRUE(reused);
  EXPECT_EQ(same.final_error, first.final_error);
  c.max_epochs = 20;
  run_or_resume(c, &reused);
  EXPECT_FALSE(reused);
}

TEST(Run, InvalidConfigThrowsBeforeWritingFiles) {
  ExperimentConfig c = tiny("invalid");
  std::filesystem::remove(curve_path(c));
  c.method = Method::MIM2;
  EXPECT_THROW(run(c), ConfigError);
  EXPECT_FALSE(std::filesystem::exists(curve_path(c)));
}

TEST(Record, RejectsUnknownKeysAndFormats) {
  EXPECT_THROW(parse_record("version=1\n"), std::invalid_argument);
  EXPECT_THROW(parse_record("format=other\n"), std::invalid_argument);
  EXPECT_THROW(parse_record("format=mim-record-1\nbogus=1\n"), std::invalid_argument);
}

TEST(Curve, RowsRoundTripAtFullPrecision) {
  const opt::EvalRow r{12, 0.1 + 0.2, 1.0 / 3.0};
  const auto rows = parse_curve(curve_header() + "\n" + format_row(r) + "\n# diverged: x\n");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].epoch, 12u);
  EXPECT_EQ(rows[0].loss, r.loss);
  EXPECT_EQ(rows[0].rel_l2, r.rel_l2);
  EXPECT_THROW(parse_curve("epoch,loss\n"), std::invalid_argument);
}

TEST(Verify, PristineSuitePassesWithinBudget) {
  const auto start = std::chrono::steady_clock::now();
  const auto results = verify();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ASSERT_EQ(results.size(), 6u);
  for (const auto& r : results) EXPECT_TRUE(r.pass) << r.name << ": " << r.detail;
  EXPECT_LT(seconds, 120.0);
}

TEST(Verify, SourceSignFlipFailsNamingTheExperiment) {
  VerifyOptions o;
  o.flip_source = "neumann-ball";
  const PropertyResult r = check_sources(o);
  EXPECT_FALSE(r.pass);
  EXPECT_NE(r.detail.find("neumann-ball"), std::string::npos) << r.detail;
}

TEST(Verify, NonVanishingMultiplierFailsExactness) {
  VerifyOptions o;
  o.bad_dirichlet_multiplier = true;
  o.draws = 2;
  o.samples = 100;
  const PropertyResult r = check_exactness(o);
  EXPECT_FALSE(r.pass);
  EXPECT_NE(r.detail.find("shifted multiplier"), std::string::npos) << r.detail;
}

TEST(Tables, DeskT1HasTwoRowsWithBothMethods) {
  const TableSpec t = table("T1", Budget::Desk);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].keys[0], "2");
  EXPECT_EQ(t.rows[1].keys[0], "4");
  for (const auto& row : t.rows) {
    ASSERT_EQ(row.cells.size(), 2u);
    EXPECT_EQ(row.cells[0].column, "MIM");
    EXPECT_EQ(row.cells[1].column, "DGM");
    EXPECT_LE(row.cells[0].config.max_epochs, 20000u);
    EXPECT_LE(row.cells[0].config.interior, 10000);
  }
  EXPECT_EQ(t.rows[0].cells[0].paper, "2.37 e-04");
}

TEST(Tables, PublishedTargetsAreVerbatim) {
  const TableSpec t5 = table("T5", Budget::Desk);
  EXPECT_EQ(t5.rows[0].keys[0], "2");
  EXPECT_EQ(t5.rows[0].cells[0].paper, "9.47 e-05");
  const TableSpec t2 = table("T2", Budget::Desk);
  EXPECT_EQ(t2.rows[0].keys[0], "2");
  EXPECT_EQ(t2.rows[0].keys[1], "10");
  EXPECT_EQ(t2.rows[0].cells[0].paper, "1.39 e-04");
}

TEST(Tables, FullBudgetKeepsEveryPrintedRow) {
  EXPECT_EQ(table("T1", Budget::Paper).rows.size(), 8u);
  EXPECT_EQ(table("T1", Budget::Paper).rows.back().cells.size(), 1u);  // no DGM at d = 256
  EXPECT_EQ(table("T10", Budget::Paper).rows.size(), 36u);
  for (const auto& id : table_ids()) {
    for (const auto& row : table(id, Budget::Paper).rows) {
      for (const auto& cell : row.cells) EXPECT_NO_THROW(cell.config.validate()) << id;
    }
  }
}

TEST(Tables, DeskCapsFollowTheBudget) {
  const TableSpec t9 = table("T9", Budget::Desk);
  for (const auto& row : t9.rows) {
    EXPECT_LE(row.cells[0].config.d, 4);
    EXPECT_LE(row.cells[0].config.interior, 2000);
  }
  for (const auto& row : table("T10", Budget::Desk).rows) EXPECT_EQ(row.cells[0].config.max_epochs, 50000u);
  EXPECT_THROW(table("T11", Budget::Desk), std::invalid_argument);
  EXPECT_EQ(parse_budget("paper"), Budget::Paper);
  EXPECT_THROW(parse_budget("laptop"), std::invalid_argument);
}

TEST(Tables, ActivationKeysUseTheCanonicalSpelling) {
  bool found = false;
  for (const auto& row : table("T10", Budget::Desk).rows) {
    found = found || row.keys == std::vector<std::string>{"2", "20", "requ", "MIM2"};
  }
  EXPECT_TRUE(found);
}

}  // namespace
}  // namespace mim::harness
