// Prints one PASS/FAIL line per acceptance criterion. Criteria 1-5 need no
// training; 6-14 train desk-scale cells and reuse finished records under --out.

#include "mim/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

namespace h = mim::harness;
using mim::loss::Method;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Cell {
  double eps;
  std::vector<mim::opt::EvalRow> rows;
};

class Runner {
 public:
  explicit Runner(std::filesystem::path out) : out_(std::move(out)) {}

  // Desk cell of `table` whose keys start with `keys`.
  Cell error(const std::string& table, const std::vector<std::string>& keys, const std::string& column) {
    for (const auto& row : h::table(table, h::Budget::Desk).rows) {
      if (!std::equal(keys.begin(), keys.end(), row.keys.begin())) continue;
      for (const auto& cell : row.cells) {
        if (cell.column != column) continue;
        h::ExperimentConfig c = cell.config;
        std::string name = table;
        for (const auto& k : row.keys) name += "_" + k;
        name += "_" + column;
        for (char& ch : name) {
          if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
        }
        c.output = (out_ / name).string();
        bool reused = false;
        std::fprintf(stderr, "  %s: %s %s d=%d, %llu epochs...\n", name.c_str(), c.experiment.c_str(),
                     std::string(mim::loss::to_string(c.method)).c_str(), c.d,
                     static_cast<unsigned long long>(c.max_epochs));
        const h::RunRecord r = h::run_or_resume(c, &reused);
        std::fprintf(stderr, "    rel_l2 %.4e%s (%.0f s)\n", r.final_error, reused ? " [reused]" : "",
                     r.seconds);
        if (r.diverged) throw std::runtime_error(name + ": " + r.message);
        return {r.final_error, r.rows};
      }
    }
    throw std::logic_error("no desk cell " + table + " " + column);
  }

 private:
  std::filesystem::path out_;
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

// Appends "name eps <= tol" with the first recorded epoch that met the
// tolerance, and folds the comparison into o.
void bound(Outcome& o, const std::string& name, const Cell& c, double tol) {
  const bool ok = c.eps <= tol;
  o.pass = o.pass && ok;
  std::string first = "never met";
  for (const auto& r : c.rows) {
    if (r.rel_l2 <= tol) {
      first = "met at epoch " + std::to_string(r.epoch);
      break;
    }
  }
  o.detail += (o.detail.empty() ? "" : "; ") + name + " " + sci(c.eps) + (ok ? " <= " : " > ") + sci(tol) +
              " (" + first + ")";
}

void less(Outcome& o, const std::string& a, double x, const std::string& b, double y) {
  const bool ok = x < y;
  o.pass = o.pass && ok;
  o.detail += (o.detail.empty() ? "" : "; ") + a + (ok ? " < " : " >= ") + b;
}

std::set<int> parse_only(const std::string& s) {
  std::set<int> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    const auto dash = item.find('-');
    const int lo = std::stoi(item.substr(0, dash));
    const int hi = dash == std::string::npos ? lo : std::stoi(item.substr(dash + 1));
    for (int i = lo; i <= hi; ++i) out.insert(i);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  mim::opt::tune_allocator();
  CLI::App app{"Acceptance criteria 1-14"};
  std::string only = "1-14";
  std::string out = "acceptance_runs";
  app.add_option("--only", only, "Criteria to check, e.g. 1-5 or 6,8");
  app.add_option("--out", out, "Directory for run records (finished runs are reused)");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected = parse_only(only);

  std::vector<h::PropertyResult> props;
  if (std::any_of(selected.begin(), selected.end(), [](int i) { return i <= 5; })) props = h::verify();
  auto prop = [&](const std::string& name) {
    for (const auto& p : props) {
      if (p.name == name) return Outcome{p.pass, p.detail};
    }
    return Outcome{false, "property not run"};
  };

  Runner R(out);
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1,
       [&] {
         Outcome o = prop("construction exactness");
         const Outcome per = prop("periodicity");
         o.pass = o.pass && per.pass;
         o.detail += "; " + per.detail;
         return o;
       }},
      {2, [&] { return prop("autodiff vs finite differences"); }},
      {3, [&] { return prop("ADAM oracle"); }},
      {4, [&] { return prop("parameter counts"); }},
      {5, [&] { return prop("source terms vs finite differences"); }},
      {6,
       [&] {
         Outcome o;
         bound(o, "MIM", R.error("T1", {"2", "10", "2"}, "MIM"), 2.4e-3);
         bound(o, "DGM", R.error("T1", {"2", "10", "2"}, "DGM"), 3.3e-3);
         return o;
       }},
      {7,
       [&] {
         Outcome o;
         bound(o, "MIM", R.error("T2", {"2", "10", "2"}, "MIM"), 1.4e-3);
         return o;
       }},
      {8,
       [&] {
         Outcome o;
         const Cell m2 = R.error("T3", {"2"}, "MIM"), g2 = R.error("T3", {"2"}, "DGM");
         const Cell m4 = R.error("T3", {"4"}, "MIM"), g4 = R.error("T3", {"4"}, "DGM");
         bound(o, "MIM d=2", m2, 2.9e-4);
         less(o, "MIM d=2 " + sci(m2.eps), m2.eps, "DGM " + sci(g2.eps), g2.eps);
         less(o, "MIM d=4 " + sci(m4.eps), m4.eps, "DGM " + sci(g4.eps), g4.eps);
         return o;
       }},
      {9,
       [&] {
         Outcome o;
         bound(o, "MIM", R.error("T4", {"2"}, "MIM"), 5.2e-3);
         bound(o, "DGM", R.error("T4", {"2"}, "DGM"), 1.1e-2);
         return o;
       }},
      {10,
       [&] {
         Outcome o;
         const Cell s = R.error("T5", {"2"}, "MIM"), a = R.error("T6", {"2"}, "MIM");
         bound(o, "SumDiff", s, 9.5e-4);
         bound(o, "Augmented", a, 7.5e-2);
         less(o, "SumDiff", s.eps, "Augmented", a.eps);
         return o;
       }},
      {11,
       [&] {
         Outcome o;
         bound(o, "slab", R.error("T7", {"slab", "2"}, "MIM"), 1.8e-2);
         bound(o, "annulus", R.error("T7", {"annulus", "2"}, "MIM"), 2.4e-3);
         return o;
       }},
      {12,
       [&] {
         Outcome o;
         bound(o, "k=1", R.error("T8", {"sum k=1", "2"}, "MIM"), 1.6e-2);
         bound(o, "k=3", R.error("T8", {"product k=3", "2"}, "MIM"), 2.6e-2);
         bound(o, "1D", R.error("T8", {"high frequency k=1", "1"}, "MIM"), 4.3e-2);
         return o;
       }},
      {13,
       [&] {
         Outcome o;
         const Cell m1 = R.error("T9", {"2"}, "MIM1"), g = R.error("T9", {"2"}, "DGM");
         bound(o, "MIM1", m1, 1.9e-1);
         bound(o, "DGM", g, 5.2e-3);
         o.detail += std::string("; observed ordering ") + (g.eps < m1.eps ? "DGM < MIM1" : "MIM1 <= DGM") +
                     " (recorded, not asserted)";
         return o;
       }},
      {14,
       [&] {
         Outcome o;
         const std::vector<std::string> keys{"2", "20", std::string(mim::nn::to_string(mim::nn::Activation::ReQu))};
         auto row = [&](const char* method) {
           auto k = keys;
           k.push_back(method);
           return R.error("T10", k, "m=3");
         };
         const Cell m2 = row("MIM2"), g = row("DGM");
         bound(o, "MIM2", m2, 2.5e-2);
         less(o, "MIM2 " + sci(m2.eps), m2.eps, "DGM " + sci(g.eps), g.eps);
         return o;
       }},
  };

  int failed = 0;
  for (const auto& [id, check] : criteria) {
    if (!selected.count(id)) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
