#include "altproj/scenario.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace altproj;
namespace fs = std::filesystem;

namespace {

const std::string kLines60 =
    "name = lines\n"
    "setA.kind = line\n"
    "setA.angle = 0\n"
    "setB.kind = line   # second line\n"
    "setB.angle = 60\n"
    "xbar = [0, 0]\n"
    "initial.seeds = 2\n"
    "initial.radii = [0.5, 0.1]\n";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("altproj-cli-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t error_line(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    return e.line();
  }
  return 0;
}

std::string error_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    return e.what();
  }
  return "";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ALTPROJ_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const ScenarioResult& builtin_result(const std::string& name) {
  static std::map<std::string, ScenarioResult> cache;
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, evaluate_scenario(parse_scenario(find_builtin(name)->text))).first;
  return it->second;
}

const Json& finest(const ScenarioResult& r) {
  const Json& reg = r.report["regularity"];
  return reg["levels"][reg["finest_level"].get<std::size_t>()];
}

}  // namespace

TEST(ScenarioParse, KeyValueBuildsNestedTree) {
  const Json j = parse_key_value(kLines60);
  EXPECT_EQ(j["setB"]["kind"], "line");
  EXPECT_EQ(j["setB"]["angle"], 60);
  EXPECT_EQ(j["xbar"], Json::array({0, 0}));
  const Scenario sc = parse_scenario(kLines60);
  EXPECT_EQ(sc.name, "lines");
  EXPECT_EQ(sc.seeds.size(), 2u);
  EXPECT_EQ(sc.radii, (std::vector<double>{0.5, 0.1}));
  EXPECT_EQ(plan_runs(sc).size(), 4u);
}

TEST(ScenarioParse, JsonFormIsEquivalent) {
  const std::string json = R"({"name": "lines", "setA": {"kind": "line", "angle": 0},
    "setB": {"kind": "line", "angle": 60}, "xbar": [0, 0],
    "initial": {"seeds": 2, "radii": [0.5, 0.1]}})";
  EXPECT_EQ(parse_scenario_text(json), parse_key_value(kLines60));
  const Scenario a = parse_scenario(json), b = parse_scenario(kLines60);
  EXPECT_EQ(evaluate_scenario(a).report.dump(), evaluate_scenario(b).report.dump());
}

TEST(ScenarioParse, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("name = x\nsetA.kind line\n"), 2u);
  EXPECT_EQ(error_line("setA.kind = ball\n\n# c\nsetA.kind = ball\n"), 4u);
  EXPECT_EQ(error_line("setA = 3\nsetA.kind = ball\n"), 2u);
  EXPECT_EQ(error_line("a..b = 1\n"), 1u);
  EXPECT_EQ(error_line("xbar = [0, \n"), 1u);
  EXPECT_EQ(error_line("{\n  \"name\": \"x\",\n  \"dim\": ]\n}"), 3u);
}

TEST(ScenarioValidate, NamesTheViolatedCheck) {
  EXPECT_NE(error_of("setA.kind = ball\nsetA.center = [5, 5]\nsetA.radius = 1\nsetB.kind = line\nsetB.angle = 0\n")
                .find("xbar is not in setA"),
            std::string::npos);
  EXPECT_NE(error_of(kLines60 + "method.scheme = fast\n").find("method.scheme"), std::string::npos);
  EXPECT_NE(error_of(kLines60 + "method.tau = 0.5\n").find("exact scheme"), std::string::npos);
  EXPECT_NE(error_of(kLines60 + "ladder.factor = 2\n").find("factor"), std::string::npos);
  EXPECT_NE(error_of(kLines60 + "setA.colour = red\n").find("unknown key 'setA.colour'"), std::string::npos);
  EXPECT_NE(error_of(kLines60 + "initial.points = [[1, 2]]\n").find("exclude"), std::string::npos);
  EXPECT_NE(error_of("dim = 3\nsetA.kind = sawtooth\nsetB.kind = diagonal\n").find("dim = 2"), std::string::npos);
  EXPECT_NE(error_of("setA.kind = ball\nsetA.center = [0, 0, 0]\nsetA.radius = 1\nsetB.kind = diagonal\n")
                .find("3 coordinates"),
            std::string::npos);
  EXPECT_NE(error_of("setA.kind = ball\nsetA.center = [0, 0]\nsetA.radius = 0\nsetB.kind = diagonal\n").find("setA"),
            std::string::npos);
  EXPECT_NE(error_of("setA.kind = hexagon\nsetB.kind = diagonal\n").find("unknown set kind"), std::string::npos);
}

TEST(ScenarioValidate, SetKindsAndTransforms) {
  const Scenario sc = parse_scenario(
      "setA.kind = union\n"
      "setA.parts = [{\"kind\": \"ball\", \"center\": [1, 0], \"radius\": 1}, {\"kind\": \"halfspace\", \"normal\": [0, 1]}]\n"
      "setB.kind = segments\n"
      "setB.segments = [[[0, 0], [0, 1]]]\n"
      "setB.rotate = 90\n"
      "setB.shift = [0, 0]\n");
  EXPECT_NEAR(sc.b->distance(make_point({-0.5, 0})), 0.0, 1e-15);
  EXPECT_NEAR(sc.b->distance(make_point({0, 0.5})), 0.5, 1e-15);
  EXPECT_NEAR(sc.a->distance(make_point({3, 1})), 1.0, 1e-15);
}

TEST(Builtins, ListingHasProvenance) {
  const std::string text = list_builtins();
  for (const char* name : {"example-2.15", "example-2.16", "two-lines-30", "two-lines-45", "two-lines-60", "two-lines-90"})
    EXPECT_NE(text.find(name), std::string::npos) << name;
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), builtins().size());
  for (const Builtin& b : builtins()) {
    EXPECT_NO_THROW(parse_scenario(b.text)) << b.name;
    EXPECT_EQ(parse_scenario(b.text).name, b.name);
  }
}

TEST(RunScenario, SawtoothReport) {
  const Json& lv = finest(builtin_result("example-2.15"));
  EXPECT_NEAR(lv["c2_hat"]["value"].get<double>(), 2.0 / std::sqrt(5.0), 1e-2);
  EXPECT_NEAR(lv["c4_hat"]["value"].get<double>(), 1.0, 1e-2);
  EXPECT_EQ(lv["level"], 5);
}

TEST(RunScenario, RayUnionReport) {
  const ScenarioResult& res = builtin_result("example-2.16");
  const Json& lv = finest(res);
  EXPECT_NEAR(lv["c4_hat"]["value"].get<double>(), 1.0 / std::sqrt(2.0), 1e-2);
  EXPECT_NEAR(lv["c2_hat"]["value"].get<double>(), 1.0, 1e-2);
  for (const Json& run : res.report["runs"]) EXPECT_EQ(run["verdict"]["theorem"], "DIL-3.8");
}

TEST(RunScenario, TwoLinesSixtyCycleRate) {
  const ScenarioResult& res = builtin_result("two-lines-60");
  ASSERT_FALSE(res.report["runs"].empty());
  for (const Json& run : res.report["runs"]) {
    EXPECT_TRUE(run["converged"].get<bool>());
    EXPECT_NEAR(run["rate"]["per_cycle"].get<double>(), 0.25, 1e-2);
    EXPECT_TRUE(run["verdict"]["satisfied"].get<bool>());
  }
}

TEST(RunScenario, NumericFieldsCarryLevelOrWindow) {
  const Json& rep = builtin_result("two-lines-60").report;
  for (const Json& lv : rep["regularity"]["levels"]) {
    EXPECT_TRUE(lv.contains("level"));
    EXPECT_TRUE(lv.contains("rho"));
  }
  for (const Json& run : rep["runs"]) {
    EXPECT_TRUE(run["rate"].contains("window"));
    EXPECT_TRUE(run["verdict"].contains("level"));
    EXPECT_TRUE(run["verdict"].contains("window"));
  }
  for (const Json& g : rep["regularity"]["super_regularity"]["A"]) EXPECT_TRUE(g.contains("level"));
}

TEST(RunScenario, OutputsAreByteIdenticalAndIndependentOfJobs) {
  const Scenario sc = parse_scenario(find_builtin("example-2.16")->text);
  const fs::path d1 = scratch("a"), d2 = scratch("b");
  write_scenario_outputs(sc, evaluate_scenario(sc, 1), d1);
  write_scenario_outputs(sc, evaluate_scenario(sc, 4), d2);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(d1 / sc.name)) {
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(d2 / sc.name / e.path().filename())) << e.path();
  }
  EXPECT_EQ(files, plan_runs(sc).size() + 1);
  const std::string csv = slurp(d1 / sc.name / "trace-000.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,tag,x_1,x_2,step_norm,dist_A,dist_B,cert_ratio_tau,cert_ratio_sigma");
}

TEST(RunScenario, OverridesApply) {
  Scenario sc = parse_scenario(kLines60);
  RunOptions opt;
  opt.seed_override = 42;
  opt.tol = 1e-10;
  apply_overrides(sc, opt);
  EXPECT_EQ(sc.seeds, std::vector<std::uint64_t>{42});
  EXPECT_EQ(sc.regularity.seed, 42u);
  EXPECT_EQ(sc.stop.tol, 1e-10);
  opt.tol = -1.0;
  EXPECT_THROW(apply_overrides(sc, opt), ScenarioError);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("exit");
  EXPECT_EQ(run_cli("builtins"), 0);
  EXPECT_EQ(run_cli("builtins --show example-2.15"), 0);
  EXPECT_EQ(run_cli("validate two-lines-45"), 0);
  EXPECT_EQ(run_cli("validate no-such-scenario"), 2);
  {
    std::ofstream bad(dir / "bad.txt");
    bad << "setA.kind = line\nsetA.angle = 0\nsetB.kind = ball\nsetB.center = [3, 3]\nsetB.radius = 1\n";
  }
  EXPECT_EQ(run_cli("validate " + (dir / "bad.txt").string()), 2);
  EXPECT_EQ(run_cli("run " + (dir / "bad.txt").string() + " --out-dir " + dir.string()), 2);
  EXPECT_EQ(run_cli("run two-lines-90 --jobs 2 --out-dir " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "two-lines-90" / "report.json"));
  EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST(Cli, OutDirDefaultsToEnvironment) {
  const fs::path dir = scratch("env");
  const std::string cmd = "ALTPROJ_OUT_DIR=" + dir.string() + " " + ALTPROJ_CLI + " run two-lines-90 > /dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "two-lines-90" / "report.json"));
}

TEST(Cli, NumericalFailureExitCode) {
  const fs::path dir = scratch("nan");
  {
    std::ofstream f(dir / "huge.txt");
    f << "setA.kind = line\nsetA.angle = 0\nsetB.kind = line\nsetB.angle = 45\n"
      << "initial.points = [[1.7e308, 1.7e308]]\n";
  }
  EXPECT_EQ(run_cli("run " + (dir / "huge.txt").string() + " --out-dir " + dir.string()), 3);
}

TEST(Cli, ShippedScenariosValidate) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(ALTPROJ_SCENARIO_DIR)) {
    EXPECT_NO_THROW(parse_scenario(load_scenario_text(e.path().string()))) << e.path();
    EXPECT_EQ(run_cli("validate " + e.path().string()), 0) << e.path();
    ++n;
  }
  EXPECT_GE(n, 3u);
}
