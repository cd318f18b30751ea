#include "altproj/scenario.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kIoError = 1;
constexpr int kInvalid = 2;
constexpr int kNumerical = 3;

std::string fmt(const altproj::Json& v) {
  std::ostringstream os;
  if (v.is_number()) os << std::setprecision(6) << v.get<double>();
  else os << v.dump();
  return os.str();
}

void print_summary(const altproj::ScenarioResult& res, const std::filesystem::path& dir) {
  const altproj::Json& rep = res.report;
  const altproj::Json& reg = rep["regularity"];
  const std::size_t fine = reg["finest_level"];
  const altproj::Json& lv = reg["levels"][fine];
  std::cout << rep["scenario"].get<std::string>() << ": level " << fine << " (rho " << fmt(lv["rho"]) << ")"
            << "  c " << fmt(lv["c_hat"]["value"]) << "  c1 " << fmt(lv["c1_hat"]["value"]) << "  c2 "
            << fmt(lv["c2_hat"]["value"]) << "  c3 " << fmt(lv["c3_hat"]["value"]) << "  c4 "
            << fmt(lv["c4_hat"]["value"]) << "  theta4 " << fmt(lv["theta4_hat"]["value"]) << '\n';
  for (const auto& s : rep["verdicts_by_start"]) {
    if (s.contains("radius_fraction")) std::cout << "  radius " << fmt(s["radius_fraction"]) << " rho0:";
    else std::cout << "  point " << s["point"].get<std::size_t>() << ':';
    std::cout << " runs " << s["runs"].get<std::size_t>() << ", converged " << s["converged"].get<std::size_t>()
              << ", bound applicable " << s["applicable"].get<std::size_t>() << ", satisfied "
              << s["satisfied"].get<std::size_t>() << '\n';
  }
  std::cout << "  wrote " << (dir / "report.json").string() << " and " << res.runs.size() << " trace(s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alternating projections between two closed sets: regularity constants and rate checks."};
  app.require_subcommand(1);

  std::string scenario_ref;
  std::string out_dir;
  unsigned jobs = 1;
  std::uint64_t seed_override = 0;
  double tol = 0.0;
  std::string show;

  auto* run = app.add_subcommand("run", "Run a scenario file or built-in and write traces and a report");
  run->add_option("scenario", scenario_ref, "Scenario file or built-in name")->required();
  auto* out_opt = run->add_option("--out-dir", out_dir, "Output root (default $ALTPROJ_OUT_DIR or ./altproj-out)");
  run->add_option("--jobs", jobs, "Parallel runs")->check(CLI::Range(1u, 256u));
  auto* seed_opt = run->add_option("--seed-override", seed_override, "Use this single seed for runs and sampling");
  auto* tol_opt = run->add_option("--tol", tol, "Stopping tolerance of the iterations");

  auto* validate = app.add_subcommand("validate", "Parse and check a scenario without running it");
  validate->add_option("scenario", scenario_ref, "Scenario file or built-in name")->required();

  auto* list = app.add_subcommand("builtins", "List built-in scenarios");
  list->add_option("--show", show, "Print the scenario text of one built-in");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  if (list->parsed()) {
    if (show.empty()) {
      std::cout << altproj::list_builtins();
      return kOk;
    }
    const altproj::Builtin* b = altproj::find_builtin(show);
    if (!b) {
      std::cerr << "error: no built-in named '" << show << "'\n";
      return kInvalid;
    }
    std::cout << b->text;
    return kOk;
  }

  altproj::Scenario sc;
  try {
    sc = altproj::parse_scenario(altproj::load_scenario_text(scenario_ref));
    altproj::RunOptions opt;
    if (*seed_opt) opt.seed_override = seed_override;
    if (*tol_opt) opt.tol = tol;
    altproj::apply_overrides(sc, opt);
  } catch (const altproj::ScenarioError& e) {
    std::cerr << "error: " << scenario_ref << ": " << e.what() << '\n';
    return kInvalid;
  }

  if (validate->parsed()) {
    std::cout << sc.name << ": ok (" << altproj::plan_runs(sc).size() << " runs, " << sc.regularity.ladder.levels
              << " ladder levels)\n";
    return kOk;
  }

  std::filesystem::path root = "altproj-out";
  if (*out_opt) root = out_dir;
  else if (const char* env = std::getenv("ALTPROJ_OUT_DIR"); env && *env) root = env;

  altproj::ScenarioResult res;
  try {
    res = altproj::evaluate_scenario(sc, jobs);
  } catch (const altproj::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const altproj::DomainError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  try {
    print_summary(res, altproj::write_scenario_outputs(sc, res, root));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}
