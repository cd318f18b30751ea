#pragma once

// Declarative scenarios: parsing, validation, built-in instances, and the
// driver that writes CSV traces and the JSON report.

#include "altproj/analysis.hpp"
#include "altproj/iterate.hpp"
#include "altproj/regularity.hpp"
#include "altproj/sets.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace altproj {

using Json = nlohmann::json;

/// Malformed or invalid scenario. `line` is 0 when the problem is not tied to
/// one line of the source.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Scenario {
  std::string name = "scenario";
  std::string description;
  Index dim = 2;
  Json set_a, set_b;  // set specs as given, echoed in the report
  SetPtr a, b;
  Point xbar;
  RegularityConfig regularity;
  InexactnessPolicy policy;
  std::vector<double> radii;   // initial radii as fractions of rho0
  std::vector<Point> points;   // explicit initial points, used instead of radii
  std::vector<std::uint64_t> seeds;
  StopRule stop;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool valid_key_part(const std::string& k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; });
}

inline Json parse_value(const std::string& raw, std::size_t line) {
  if (raw.empty()) throw ScenarioError("missing value", line);
  const char c = raw.front();
  if (c == '[' || c == '{' || c == '"') {
    try {
      return Json::parse(raw);
    } catch (const Json::parse_error& e) {
      throw ScenarioError("malformed value '" + raw + "'", line);
    }
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(raw, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == raw.size()) {
      if (raw.find_first_of(".eE") == std::string::npos && std::abs(v) < 9e15) return static_cast<std::int64_t>(v);
      return v;
    }
  }
  return raw;
}

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace detail

/// Parses `key.sub = value` lines ('#' starts a comment) into a nested JSON
/// object. Values are JSON literals, numbers, true/false or bare words.
inline Json parse_key_value(const std::string& text) {
  Json root = Json::object();
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ScenarioError("expected 'key = value'", no);
    const std::string key = detail::trim(line.substr(0, eq));
    const Json value = detail::parse_value(detail::trim(line.substr(eq + 1)), no);
    Json* node = &root;
    std::string part;
    std::istringstream ks(key);
    std::vector<std::string> parts;
    while (std::getline(ks, part, '.')) parts.push_back(part);
    if (parts.empty() || key.back() == '.') throw ScenarioError("bad key '" + key + "'", no);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (!detail::valid_key_part(parts[i])) throw ScenarioError("bad key '" + key + "'", no);
      if (!node->is_object()) throw ScenarioError("key '" + key + "' extends a value set earlier", no);
      if (i + 1 == parts.size()) {
        if (node->contains(parts[i])) throw ScenarioError("duplicate key '" + key + "'", no);
        (*node)[parts[i]] = value;
      } else {
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = Json::object();
      }
    }
  }
  return root;
}

/// Key-value text, or a JSON document when the first non-blank character is '{'.
inline Json parse_scenario_text(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ScenarioError(std::string("malformed JSON: ") + e.what(), detail::line_of_offset(text, e.byte));
    }
  }
  return parse_key_value(text);
}

namespace detail {

/// Typed access to one JSON object; unknown keys are errors.
class Fields {
 public:
  Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ScenarioError(where("") + " must be a section");
  }

  bool has(const std::string& k) const { return j_.contains(k); }

  const Json& raw(const std::string& k) {
    used_.insert(k);
    if (!j_.contains(k)) throw ScenarioError("missing " + where(k));
    return j_.at(k);
  }

  double num(const std::string& k) {
    const Json& v = raw(k);
    if (!v.is_number()) throw ScenarioError(where(k) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ScenarioError(where(k) + " must be finite");
    return d;
  }
  double num(const std::string& k, double dflt) { return has(k) ? num(k) : dflt; }

  long integer(const std::string& k, long dflt) {
    if (!has(k)) return dflt;
    const Json& v = raw(k);
    if (!v.is_number_integer()) throw ScenarioError(where(k) + " must be an integer");
    return v.get<long>();
  }

  std::string str(const std::string& k) {
    const Json& v = raw(k);
    if (!v.is_string()) throw ScenarioError(where(k) + " must be a word");
    return v.get<std::string>();
  }
  std::string str(const std::string& k, const std::string& dflt) { return has(k) ? str(k) : dflt; }

  Point point(const std::string& k, Index dim) { return to_point(raw(k), where(k), dim); }

  std::vector<Point> points(const std::string& k, Index dim) {
    const Json& v = raw(k);
    if (!v.is_array() || v.empty()) throw ScenarioError(where(k) + " must be a non-empty list of points");
    std::vector<Point> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(to_point(v[i], where(k) + "[" + std::to_string(i) + "]", dim));
    return out;
  }

  std::vector<std::pair<Point, Point>> pairs(const std::string& k, Index dim) {
    const Json& v = raw(k);
    if (!v.is_array() || v.empty()) throw ScenarioError(where(k) + " must be a non-empty list of point pairs");
    std::vector<std::pair<Point, Point>> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string w = where(k) + "[" + std::to_string(i) + "]";
      if (!v[i].is_array() || v[i].size() != 2) throw ScenarioError(w + " must be a pair of points");
      out.emplace_back(to_point(v[i][0], w, dim), to_point(v[i][1], w, dim));
    }
    return out;
  }

  std::vector<double> numbers(const std::string& k) {
    const Json& v = raw(k);
    if (!v.is_array() || v.empty()) throw ScenarioError(where(k) + " must be a non-empty list of numbers");
    std::vector<double> out;
    for (const Json& e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) throw ScenarioError(where(k) + " must hold finite numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  Fields section(const std::string& k) { return Fields(has(k) ? raw(k) : empty_, path_.empty() ? k : path_ + "." + k); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ScenarioError("unknown key " + where(it.key()));
  }

  std::string where(const std::string& k) const {
    if (k.empty()) return path_.empty() ? "scenario" : "'" + path_ + "'";
    return "'" + (path_.empty() ? k : path_ + "." + k) + "'";
  }

 private:
  static Point to_point(const Json& v, const std::string& w, Index dim) {
    if (!v.is_array()) throw ScenarioError(w + " must be a list of coordinates");
    if (static_cast<Index>(v.size()) != dim)
      throw ScenarioError(w + " has " + std::to_string(v.size()) + " coordinates, dim is " + std::to_string(dim));
    Point p(dim);
    for (Index i = 0; i < dim; ++i) {
      if (!v[static_cast<std::size_t>(i)].is_number()) throw ScenarioError(w + " must hold numbers");
      p[i] = v[static_cast<std::size_t>(i)].get<double>();
      if (!std::isfinite(p[i])) throw ScenarioError(w + " must be finite");
    }
    return p;
  }

  inline static const Json empty_ = Json::object();
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline Eigen::MatrixXd rotation_2d(double deg) {
  const double t = deg * M_PI / 180.0;
  Eigen::MatrixXd r(2, 2);
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  return r;
}

inline SetPtr build_set(const Json& spec, const std::string& path, Index dim) {
  Fields f(spec, path);
  const std::string kind = f.str("kind");
  auto need_2d = [&] {
    if (dim != 2) throw ScenarioError(f.where("kind") + " = " + kind + " needs dim = 2");
  };
  SetPtr s;
  try {
    if (kind == "sawtooth") {
      need_2d();
      s = make_sawtooth(static_cast<int>(f.integer("depth", 40)));
    } else if (kind == "diagonal") {
      s = make_diagonal_line(dim, f.num("lo", 0.0), f.num("hi", 1.0));
    } else if (kind == "line") {
      need_2d();
      const double t = f.num("angle") * M_PI / 180.0;
      const Point base = f.has("point") ? f.point("point", dim) : Point::Zero(dim);
      s = make_affine_subspace(base, {make_point({std::cos(t), std::sin(t)})});
    } else if (kind == "affine") {
      s = make_affine_subspace(f.point("point", dim), f.has("directions") ? f.points("directions", dim) : std::vector<Point>{});
    } else if (kind == "halfspace") {
      s = make_halfspace(f.point("normal", dim), f.num("offset", 0.0));
    } else if (kind == "ball") {
      s = make_ball(f.point("center", dim), f.num("radius"));
    } else if (kind == "polygon") {
      need_2d();
      s = make_convex_polygon(f.points("vertices", dim));
    } else if (kind == "segments") {
      s = make_segment_union(f.pairs("segments", dim));
    } else if (kind == "rays") {
      s = make_ray_union(f.pairs("rays", dim));
    } else if (kind == "union") {
      const Json& parts = f.raw("parts");
      if (!parts.is_array() || parts.empty()) throw ScenarioError(f.where("parts") + " must be a non-empty list of sets");
      std::vector<SetPtr> children;
      for (std::size_t i = 0; i < parts.size(); ++i)
        children.push_back(build_set(parts[i], path + ".parts[" + std::to_string(i) + "]", dim));
      s = make_finite_union(std::move(children));
    } else {
      throw ScenarioError(f.where("kind") + ": unknown set kind '" + kind + "'");
    }
    if (f.has("scale") || f.has("rotate") || f.has("shift")) {
      const double scale = f.num("scale", 1.0);
      Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(dim, dim);
      if (f.has("rotate")) {
        need_2d();
        rot = rotation_2d(f.num("rotate"));
      }
      const Point shift = f.has("shift") ? f.point("shift", dim) : Point::Zero(dim);
      s = make_transformed(s, scale, rot, shift);
    }
  } catch (const DomainError& e) {
    throw ScenarioError(f.where("") + ": " + e.what());
  }
  f.finish();
  return s;
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "exact") return Scheme::exact;
  if (s == "tau-sigma") return Scheme::tau_sigma;
  if (s == "sigma-monotone") return Scheme::sigma_monotone;
  throw ScenarioError("'method.scheme' must be exact, tau-sigma or sigma-monotone, got '" + s + "'");
}

inline Mode parse_mode(const std::string& s) {
  if (s == "nearest") return Mode::nearest;
  if (s == "adversarial") return Mode::adversarial;
  if (s == "random") return Mode::random;
  throw ScenarioError("'method.mode' must be nearest, adversarial or random, got '" + s + "'");
}

}  // namespace detail

/// Builds and validates a scenario; nothing is computed beyond the checks on
/// the reference point.
inline Scenario scenario_from_json(const Json& root) {
  detail::Fields f(root, "");
  Scenario sc;
  sc.name = f.str("name", sc.name);
  if (sc.name.empty() || sc.name.front() == '.' || !std::all_of(sc.name.begin(), sc.name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
      }))
    throw ScenarioError("'name' may only hold letters, digits, '-', '_' and '.'");
  sc.description = f.str("description", "");
  const long dim = f.integer("dim", 2);
  if (dim < 1 || dim > 8) throw ScenarioError("'dim' must lie in [1, 8]");
  sc.dim = static_cast<Index>(dim);
  sc.set_a = f.raw("setA");
  sc.set_b = f.raw("setB");
  sc.a = detail::build_set(sc.set_a, "setA", sc.dim);
  sc.b = detail::build_set(sc.set_b, "setB", sc.dim);
  sc.xbar = f.has("xbar") ? f.point("xbar", sc.dim) : Point::Zero(sc.dim);
  const double da = sc.a->distance(sc.xbar), db = sc.b->distance(sc.xbar);
  if (!(da <= 1e-9)) throw ScenarioError("xbar is not in setA (distance " + std::to_string(da) + " > 1e-9)");
  if (!(db <= 1e-9)) throw ScenarioError("xbar is not in setB (distance " + std::to_string(db) + " > 1e-9)");

  detail::Fields lad = f.section("ladder");
  sc.regularity.ladder.rho0 = lad.num("rho0", 0.25);
  sc.regularity.ladder.factor = lad.num("factor", 0.5);
  sc.regularity.ladder.levels = static_cast<int>(lad.integer("levels", 6));
  lad.finish();

  detail::Fields smp = f.section("samples");
  const long grid = smp.integer("grid", 200), random = smp.integer("random", 200), normals = smp.integer("normals", 8);
  const long sseed = smp.integer("seed", 0);
  if (grid < 1 || random < 0 || normals < 1 || sseed < 0)
    throw ScenarioError("'samples' counts must be positive (random may be 0) and the seed nonnegative");
  sc.regularity.grid = static_cast<std::size_t>(grid);
  sc.regularity.random = static_cast<std::size_t>(random);
  sc.regularity.normal_samples = static_cast<std::size_t>(normals);
  sc.regularity.seed = static_cast<std::uint64_t>(sseed);
  smp.finish();

  detail::Fields m = f.section("method");
  sc.policy.scheme = detail::parse_scheme(m.str("scheme", "exact"));
  sc.policy.tau = m.num("tau", 1.0);
  sc.policy.sigma = m.num("sigma", 0.0);
  sc.policy.mode = detail::parse_mode(m.str("mode", "nearest"));
  m.finish();

  detail::Fields init = f.section("initial");
  if (init.has("points") && init.has("radii")) throw ScenarioError("'initial.points' and 'initial.radii' exclude each other");
  if (init.has("points")) sc.points = init.points("points", sc.dim);
  else sc.radii = init.has("radii") ? init.numbers("radii") : std::vector<double>{0.5, 0.1, 0.02};
  for (double r : sc.radii)
    if (!(r > 0.0)) throw ScenarioError("'initial.radii' must be positive");
  if (init.has("seeds") && init.raw("seeds").is_array()) {
    for (const Json& s : init.raw("seeds")) {
      if (!s.is_number_unsigned()) throw ScenarioError("'initial.seeds' must hold nonnegative integers");
      sc.seeds.push_back(s.get<std::uint64_t>());
    }
    if (sc.seeds.empty()) throw ScenarioError("'initial.seeds' must not be empty");
  } else {
    const long n = init.integer("seeds", 1);
    if (n < 1 || n > 100000) throw ScenarioError("'initial.seeds' count must lie in [1, 100000]");
    for (long s = 0; s < n; ++s) sc.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  init.finish();

  detail::Fields st = f.section("stop");
  sc.stop.tol = st.num("tol", sc.stop.tol);
  sc.stop.max_iter = st.integer("max_iter", sc.stop.max_iter);
  st.finish();
  f.finish();

  try {
    sc.regularity.ladder.validate();
    sc.policy.validate();
    sc.stop.validate();
  } catch (const DomainError& e) {
    throw ScenarioError(e.what());
  }
  return sc;
}

inline Scenario parse_scenario(const std::string& text) { return scenario_from_json(parse_scenario_text(text)); }

// ---------------------------------------------------------------------------
// Built-in scenarios.

struct Builtin {
  std::string name;
  std::string provenance;
  std::string text;
};

inline std::string two_lines_text(int deg) {
  std::ostringstream os;
  os << "name = two-lines-" << deg << "\n"
     << "description = \"lines through 0 at angle " << deg << " degrees\"\n"
     << "setA.kind = line\nsetA.angle = 0\n"
     << "setB.kind = line\nsetB.angle = " << deg << "\n"
     << "xbar = [0, 0]\nmethod.scheme = exact\ninitial.seeds = 4\n";
  return os.str();
}

inline const std::vector<Builtin>& builtins() {
  static const std::vector<Builtin> list = [] {
    std::vector<Builtin> b;
    b.push_back({"example-2.15",
                 "sawtooth graph against the diagonal segment: c2 = 2/sqrt(5), c4 = 1 (published example)",
                 "name = example-2.15\n"
                 "description = \"sawtooth graph vs diagonal segment\"\n"
                 "setA.kind = sawtooth\nsetA.depth = 40\n"
                 "setB.kind = diagonal\nsetB.lo = 0\nsetB.hi = 1\n"
                 "xbar = [0, 0]\nmethod.scheme = exact\ninitial.seeds = 4\n"});
    b.push_back({"example-2.16",
                 "two-ray unions sharing the first axis: c4 = 1/sqrt(2), c2 = 1 (published example)",
                 "name = example-2.16\n"
                 "description = \"ray unions sharing the first axis\"\n"
                 "setA.kind = rays\nsetA.rays = [[[0, 0], [1, 0]], [[0, 0], [1, -1]]]\n"
                 "setB.kind = rays\nsetB.rays = [[[0, 0], [1, 0]], [[0, 0], [1, 1]]]\n"
                 "xbar = [0, 0]\nmethod.scheme = exact\ninitial.seeds = 4\n"});
    for (int deg : {30, 45, 60, 90})
      b.push_back({"two-lines-" + std::to_string(deg),
                   "lines at " + std::to_string(deg) + " degrees: cycle rate cos^2 of the angle (derived, two-line closed form)",
                   two_lines_text(deg)});
    return b;
  }();
  return list;
}

inline const Builtin* find_builtin(const std::string& name) {
  for (const Builtin& b : builtins())
    if (b.name == name) return &b;
  return nullptr;
}

inline std::string list_builtins() {
  std::ostringstream os;
  for (const Builtin& b : builtins()) os << std::left << std::setw(14) << b.name << "  " << b.provenance << '\n';
  return os.str();
}

/// A built-in name or a path to a scenario file.
inline std::string load_scenario_text(const std::string& ref) {
  if (const Builtin* b = find_builtin(ref)) return b->text;
  std::ifstream in(ref, std::ios::binary);
  if (!in) throw ScenarioError("cannot read scenario '" + ref + "' (neither a file nor a built-in)");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Running.

struct RunOptions {
  std::filesystem::path out_dir = "altproj-out";
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed_override;
  std::optional<double> tol;
};

struct RunSpec {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> radius_index;
  std::optional<std::size_t> point_index;
  Point x0;
};

struct RunResult {
  RunSpec spec;
  IterationTrace trace;
  std::optional<RateEstimate> rate;
  std::string rate_error;
  BoundReport verdict;
  std::string csv;
};

struct ScenarioResult {
  Json report;
  std::vector<RunResult> runs;
};

inline void apply_overrides(Scenario& sc, const RunOptions& opt) {
  if (opt.seed_override) {
    sc.seeds = {*opt.seed_override};
    sc.regularity.seed = *opt.seed_override;
  }
  if (opt.tol) {
    sc.stop.tol = *opt.tol;
    try {
      sc.stop.validate();
    } catch (const DomainError& e) {
      throw ScenarioError(std::string("--tol: ") + e.what());
    }
  }
}

inline std::vector<RunSpec> plan_runs(const Scenario& sc) {
  std::vector<RunSpec> out;
  const std::size_t starts = sc.points.empty() ? sc.radii.size() : sc.points.size();
  for (std::size_t i = 0; i < starts; ++i)
    for (std::uint64_t seed : sc.seeds) {
      RunSpec r;
      r.index = out.size();
      r.seed = seed;
      if (sc.points.empty()) {
        r.radius_index = i;
        Rng rng(detail::mix_seed(seed, i, 7));
        r.x0 = sc.xbar + sc.radii[i] * sc.regularity.ladder.rho0 * rng.unit_vector(sc.dim);
      } else {
        r.point_index = i;
        r.x0 = sc.points[i];
      }
      out.push_back(std::move(r));
    }
  return out;
}

namespace detail {

inline Json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline Json vec(const Point& p) {
  Json a = Json::array();
  for (Index i = 0; i < p.size(); ++i) a.push_back(num(p[i]));
  return a;
}

inline Json estimate_json(const Estimate& e) {
  Json j{{"value", num(e.value)}};
  if (!e.witness.empty()) {
    Json w = Json::object();
    if (e.witness.a.size()) w["a"] = vec(e.witness.a);
    if (e.witness.b.size()) w["b"] = vec(e.witness.b);
    if (e.witness.u.size()) w["u"] = vec(e.witness.u);
    if (e.witness.v.size()) w["v"] = vec(e.witness.v);
    j["witness"] = w;
  }
  return j;
}

inline Json modulus_json(const std::vector<std::pair<double, Estimate>>& g) {
  Json a = Json::array();
  for (std::size_t j = 0; j < g.size(); ++j) {
    Json e = estimate_json(g[j].second);
    e["level"] = j;
    e["delta"] = num(g[j].first);
    a.push_back(e);
  }
  return a;
}

inline Json regularity_json(const RegularityReport& rep) {
  Json levels = Json::array();
  for (std::size_t j = 0; j < rep.levels.size(); ++j) {
    const LevelReport& lv = rep.levels[j];
    const double c2 = lv.c2_hat.value;
    levels.push_back({{"level", j},
                      {"rho", num(lv.rho)},
                      {"c_hat", estimate_json(lv.c_hat)},
                      {"c1_hat", estimate_json(lv.c1_hat)},
                      {"c2_hat", estimate_json(lv.c2_hat)},
                      {"theta2_hat", {{"value", num(c2 >= 0.0 ? std::sqrt(std::max(0.0, 1.0 - c2 * c2)) : kInf)}}},
                      {"c3_hat", estimate_json(lv.c3_hat)},
                      {"c3_hat_reversed", estimate_json(lv.c3_hat_reversed)},
                      {"c4_hat", estimate_json(lv.c4_hat)},
                      {"theta4_hat", estimate_json(lv.theta4_hat)},
                      {"counts",
                       {{"a", lv.counts.a},
                        {"b", lv.counts.b},
                        {"a_minus_b", lv.counts.a_minus_b},
                        {"b_minus_a", lv.counts.b_minus_a},
                        {"pairs", lv.counts.pairs},
                        {"max_ties", lv.counts.max_ties}}}});
  }
  const std::size_t fine = rep.levels.size() - 1;
  return {{"levels", levels},
          {"finest_level", fine},
          {"super_regularity",
           {{"A", modulus_json(rep.super_regularity_a)},
            {"B", modulus_json(rep.super_regularity_b)},
            {"A_restricted_to_B", modulus_json(rep.b_super_regularity_a)}}},
          {"qualification",
           {{"holds", rep.qualification.holds},
            {"margin", num(rep.qualification.margin)},
            {"levels", {fine - 1, fine}}}},
          {"caveat", rep.caveat},
          {"theta2_note", rep.theta2_note}};
}

inline Json window_json(const RateEstimate& r) { return {{"first", r.first}, {"last", r.last}}; }

inline Json run_json(const RunResult& r, const Scenario& sc, std::size_t finest, const std::string& csv_name) {
  Json start;
  if (r.spec.radius_index) {
    const double f = sc.radii[*r.spec.radius_index];
    start = {{"radius_fraction", num(f)}, {"radius", num(f * sc.regularity.ladder.rho0)}};
  } else {
    start = {{"point", *r.spec.point_index}};
  }
  Json j{{"run", r.spec.index},
         {"seed", r.spec.seed},
         {"start", start},
         {"x0", vec(r.spec.x0)},
         {"trace_csv", csv_name},
         {"converged", r.trace.converged},
         {"monotonicity_failure", r.trace.monotonicity_failure},
         {"projections", r.trace.projections()},
         {"final", {{"x", vec(r.trace.last())},
                    {"iter", r.trace.projections()},
                    {"dist_A", num(r.trace.steps.back().dist_a)},
                    {"dist_B", num(r.trace.steps.back().dist_b)}}}};
  if (r.rate) {
    j["rate"] = {{"window", window_json(*r.rate)},
                 {"per_projection", num(r.rate->rate)},
                 {"per_cycle", num(r.rate->cycle_rate)},
                 {"cycles", r.rate->per_cycle_ratios.size()}};
  } else {
    j["rate"] = {{"error", r.rate_error}};
  }
  const BoundReport& v = r.verdict;
  Json inputs = Json::object();
  for (const auto& [k, x] : v.inputs) inputs[k] = num(x);
  Json verdict{{"theorem", v.theorem},
               {"applicable", v.applicable},
               {"converged", v.converged},
               {"level", finest},
               {"inputs", inputs},
               {"note", v.note}};
  if (v.applicable) {
    verdict["rate_unit"] = v.rate_unit;
    verdict["bound"] = num(v.bound);
    if (r.rate) {
      verdict["window"] = window_json(*r.rate);
      verdict["empirical"] = num(v.empirical);
      verdict["slack"] = num(v.slack);
    }
    verdict["satisfied"] = v.satisfied;
  }
  j["verdict"] = verdict;
  return j;
}

inline Json policy_json(const InexactnessPolicy& p) {
  return {{"scheme", p.scheme == Scheme::tau_sigma        ? "tau-sigma"
                     : p.scheme == Scheme::sigma_monotone ? "sigma-monotone"
                                                          : "exact"},
          {"tau", num(p.tau)},
          {"sigma", num(p.sigma)},
          {"mode", to_string(p.mode)}};
}

inline std::string csv_name(std::size_t index) {
  std::ostringstream os;
  os << "trace-" << std::setw(3) << std::setfill('0') << index << ".csv";
  return os.str();
}

inline RunResult execute(const Scenario& sc, const RunSpec& spec, const RegularityReport& rep) {
  RunResult r;
  r.spec = spec;
  InexactnessPolicy pol = sc.policy;
  pol.seed = spec.seed;
  r.trace = run_policy(*sc.a, *sc.b, spec.x0, pol, sc.stop);
  if (r.trace.converged) {
    try {
      r.rate = estimate_rate(r.trace, sc.stop.tol);
    } catch (const NoRateError& e) {
      r.rate_error = e.what();
    }
  } else {
    r.rate_error = r.trace.monotonicity_failure ? "stopped: no admissible monotone step" : "did not converge";
  }
  CompareOptions opt;
  opt.tol = sc.stop.tol;
  r.verdict = compare(r.trace, rep, pol, opt);
  std::ostringstream os;
  write_trace_csv(os, r.trace);
  r.csv = os.str();
  return r;
}

}  // namespace detail

/// Estimates the regularity ladder, then runs every (start, seed) pair,
/// `jobs` at a time. Results are merged in run order, so the report does not
/// depend on `jobs`.
inline ScenarioResult evaluate_scenario(const Scenario& sc, unsigned jobs = 1) {
  ScenarioResult out;
  const RegularityReport rep = estimate_regularity(*sc.a, *sc.b, sc.xbar, sc.regularity);
  const std::vector<RunSpec> specs = plan_runs(sc);
  out.runs.resize(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      try {
        out.runs[i] = detail::execute(sc, specs[i], rep);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(specs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  const std::size_t finest = rep.levels.size() - 1;
  Json runs = Json::array();
  for (const RunResult& r : out.runs) runs.push_back(detail::run_json(r, sc, finest, detail::csv_name(r.spec.index)));

  Json by_start = Json::array();
  const std::size_t starts = sc.points.empty() ? sc.radii.size() : sc.points.size();
  for (std::size_t i = 0; i < starts; ++i) {
    std::size_t total = 0, converged = 0, applicable = 0, satisfied = 0;
    double min_slack = kInf;
    for (const RunResult& r : out.runs) {
      if ((sc.points.empty() ? r.spec.radius_index : r.spec.point_index) != i) continue;
      ++total;
      converged += r.trace.converged;
      applicable += r.verdict.applicable;
      satisfied += r.verdict.applicable && r.verdict.satisfied;
      if (r.verdict.applicable && r.verdict.converged) min_slack = std::min(min_slack, r.verdict.slack);
    }
    Json e{{"runs", total}, {"converged", converged}, {"applicable", applicable}, {"satisfied", satisfied},
           {"min_slack", {{"value", detail::num(min_slack)}, {"window", "tail window of each run"}}}};
    if (sc.points.empty()) e["radius_fraction"] = detail::num(sc.radii[i]);
    else e["point"] = i;
    by_start.push_back(e);
  }

  Json seeds = Json::array();
  for (std::uint64_t s : sc.seeds) seeds.push_back(s);
  out.report = {{"scenario", sc.name},
                {"description", sc.description},
                {"dim", sc.dim},
                {"xbar", detail::vec(sc.xbar)},
                {"sets", {{"A", sc.set_a}, {"B", sc.set_b}}},
                {"ladder",
                 {{"rho0", detail::num(sc.regularity.ladder.rho0)},
                  {"factor", detail::num(sc.regularity.ladder.factor)},
                  {"levels", sc.regularity.ladder.levels}}},
                {"samples",
                 {{"grid", sc.regularity.grid},
                  {"random", sc.regularity.random},
                  {"normals", sc.regularity.normal_samples},
                  {"seed", sc.regularity.seed}}},
                {"method", detail::policy_json(sc.policy)},
                {"stop", {{"tol", detail::num(sc.stop.tol)}, {"max_iter", sc.stop.max_iter}}},
                {"seeds", seeds},
                {"regularity", detail::regularity_json(rep)},
                {"runs", runs},
                {"verdicts_by_start", by_start}};
  return out;
}

/// Writes <out_dir>/<name>/report.json and one trace CSV per run.
inline std::filesystem::path write_scenario_outputs(const Scenario& sc, const ScenarioResult& res,
                                                     const std::filesystem::path& out_dir) {
  const std::filesystem::path dir = out_dir / sc.name;
  std::filesystem::create_directories(dir);
  for (const RunResult& r : res.runs) {
    std::ofstream f(dir / detail::csv_name(r.spec.index), std::ios::binary);
    f << r.csv;
    if (!f) throw std::runtime_error("cannot write " + (dir / detail::csv_name(r.spec.index)).string());
  }
  std::ofstream f(dir / "report.json", std::ios::binary);
  f << res.report.dump(2) << '\n';
  if (!f) throw std::runtime_error("cannot write " + (dir / "report.json").string());
  return dir;
}

}  // namespace altproj
