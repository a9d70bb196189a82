#include "mim/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace h = mim::harness;

namespace {

int cmd_list() {
  for (const auto& e : h::catalogue()) {
    std::string methods;
    for (auto m : e.methods) methods += (methods.empty() ? "" : ",") + std::string(mim::loss::to_string(m));
    std::printf("%-22s %-12s %s\n", e.id.c_str(), methods.c_str(), e.summary.c_str());
  }
  std::printf("\ntables:");
  for (const auto& id : h::table_ids()) std::printf(" %s", id.c_str());
  std::printf("\n");
  return 0;
}

int cmd_run(const std::string& path) {
  h::ExperimentConfig c;
  try {
    c = h::load_config(path);
  } catch (const h::ConfigError& e) {
    std::fprintf(stderr, "invalid config: %s: %s\n", e.field().c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return 2;
  }
  const h::RunRecord r = h::run(c);
  std::printf("%s %s d=%d epochs=%llu rel_l2=%s seconds=%.1f\n", c.experiment.c_str(),
              std::string(mim::loss::to_string(c.method)).c_str(), c.d,
              static_cast<unsigned long long>(r.epochs), h::fmt17(r.final_error).c_str(), r.seconds);
  std::printf("curve: %s\nrecord: %s\n", h::curve_path(c).c_str(), h::record_path(c).c_str());
  if (r.diverged) {
    std::fprintf(stderr, "%s\n", r.message.c_str());
    return 3;
  }
  return 0;
}

int cmd_verify(const h::VerifyOptions& o) {
  bool ok = true;
  for (const auto& p : h::verify(o)) {
    std::printf("%s %-18s %6.1fs  %s\n", p.pass ? "PASS" : "FAIL", p.name.c_str(), p.seconds, p.detail.c_str());
    ok = ok && p.pass;
  }
  return ok ? 0 : 1;
}

int cmd_table(const std::string& id, const std::string& budget, const std::string& out) {
  const auto result = h::run_table(id, h::parse_budget(budget), out, &std::cout);
  std::printf("wrote %s (%d failed cells)\n", result.csv.c_str(), result.failed);
  return result.failed == 0 ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  mim::opt::tune_allocator();
  CLI::App app{"Mixed-residual PDE solver experiments"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "List experiments and tables");

  std::string config;
  auto* run = app.add_subcommand("run", "Train one configuration");
  run->add_option("config", config, "Config file (key = value lines)")->required();

  h::VerifyOptions vo;
  auto* verify = app.add_subcommand("verify", "Run the no-training property suite");
  verify->add_option("--flip-source", vo.flip_source, "Mutation: negate the source of this experiment");
  verify->add_flag("--bad-dirichlet-multiplier", vo.bad_dirichlet_multiplier,
                   "Mutation: shift the ball multiplier off the boundary");

  std::string table_id, budget = "desk", out = "tables";
  auto* table = app.add_subcommand("table", "Run or resume every cell of a table");
  table->add_option("id", table_id, "Table id (T1..T10)")->required();
  table->add_option("--budget", budget, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  table->add_option("--out", out, "Output directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*list) return cmd_list();
    if (*run) return cmd_run(config);
    if (*verify) return cmd_verify(vo);
    if (*table) return cmd_table(table_id, budget, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
