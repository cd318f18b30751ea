#pragma once

// Sampled estimates of the regularity constants of a pair of closed sets at a
// common point, over a shrinking ladder of radii.

#include "altproj/sets.hpp"

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace altproj {

struct RadiusLadder {
  double rho0 = 0.25;
  double factor = 0.5;
  int levels = 6;

  void validate() const {
    if (!(rho0 > 0.0) || !std::isfinite(rho0)) throw DomainError("ladder: rho0 must be positive");
    if (!(factor > 0.0 && factor < 1.0)) throw DomainError("ladder: factor must lie in (0, 1)");
    if (levels < 2) throw DomainError("ladder: need at least 2 levels");
  }
  double rho(int j) const { return rho0 * std::pow(factor, j); }
  std::vector<double> radii() const {
    std::vector<double> out;
    for (int j = 0; j < levels; ++j) out.push_back(rho(j));
    return out;
  }
};

struct RegularityConfig {
  RadiusLadder ladder;
  std::size_t grid = 200;          // deterministic samples per set per level
  std::size_t random = 200;        // seeded samples per set per level
  std::size_t normal_samples = 8;  // interior unit normals per cone
  RestrictedSampling restricted;   // radius is rescaled per level
  std::uint64_t seed = 0;
};

/// Points and unit directions realizing a sup or inf.
struct Witness {
  Point a, b, u, v;
  bool empty() const { return a.size() == 0; }
};

/// A value together with where it was attained. -inf (or +inf for an inf)
/// means the quantified set was empty.
struct Estimate {
  double value = -kInf;
  Witness witness;
};

struct SampleCounts {
  std::size_t a = 0;           // samples of A in the ball
  std::size_t b = 0;           // samples of B in the ball
  std::size_t a_minus_b = 0;   // of which outside the other set
  std::size_t b_minus_a = 0;
  std::size_t pairs = 0;       // (a, b) pairs used for the set-difference constants
  std::size_t max_ties = 1;    // largest projection set met while enumerating b_a, a_b
};

struct LevelReport {
  double rho = 0.0;
  Estimate c_hat;
  Estimate c1_hat;
  Estimate c2_hat;
  Estimate c3_hat;           // chains a1 in A -> b in P_B(a1) -> a2 in P_A(b)
  Estimate c3_hat_reversed;  // the same with the roles of A and B exchanged
  Estimate c4_hat;
  Estimate theta4_hat;       // an infimum: +inf when no pair exists
  SampleCounts counts;
};

struct Qualification {
  bool holds = true;
  double margin = kInf;  // min ||u + v|| over sampled unit normals
  Witness witness;
};

struct RegularityReport {
  std::vector<LevelReport> levels;
  std::vector<std::pair<double, Estimate>> super_regularity_a;
  std::vector<std::pair<double, Estimate>> super_regularity_b;
  std::vector<std::pair<double, Estimate>> b_super_regularity_a;  // A with cones restricted to B
  Qualification qualification;
  std::string caveat =
      "limiting normal cones approximated by proximal cones at the two smallest radii; "
      "suprema and infima taken over finite samples";
  std::string theta2_note = "theta2 = sqrt(1 - c2^2) when c2 >= 0, by the same Pythagorean relation";

  const LevelReport& finest() const { return levels.back(); }
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Canonical text key of a cone so equal cones met at different samples are
/// evaluated once.
inline std::string cone_key(const Cone& c) {
  if (c.is_empty()) return "E";
  std::vector<std::string> gens;
  char buf[64];
  for (const Point& g : c.generators()) {
    std::string s;
    for (Index i = 0; i < g.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9f,", g[i] + 0.0);
      s += buf;
    }
    gens.push_back(s);
  }
  std::sort(gens.begin(), gens.end());
  std::string key = "G";
  for (const std::string& s : gens) key += s + ";";
  key += "L";
  if (!c.lineality().empty()) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(c.dim(), c.dim());
    for (const Point& l : c.lineality()) P += l * l.transpose();
    for (Index i = 0; i < P.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9f,", P.data()[i] + 0.0);
      key += buf;
    }
  }
  return key;
}

/// Distinct cones with one representative base point each, and for every
/// sample the index of its cone.
struct ConeTable {
  std::vector<Cone> cones;
  std::vector<Point> base;
  std::vector<std::vector<Point>> units;
  std::vector<std::size_t> of_sample;
};

inline ConeTable tabulate_cones(const std::vector<Point>& samples, const std::vector<Cone>& cones,
                                std::size_t normal_samples, std::uint64_t seed) {
  ConeTable t;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string key = cone_key(cones[i]);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, t.cones.size()).first;
      t.cones.push_back(cones[i]);
      t.base.push_back(samples[i]);
      t.units.push_back(unit_sphere_samples(cones[i], normal_samples, seed));
    }
    t.of_sample.push_back(it->second);
  }
  return t;
}

/// sup of -<u, v> over unit u in table A, unit v in table B. For each pair of
/// cones the unit samples of one are tested against the exact support of the
/// other, which is exact in the plane.
inline Estimate opposite_normals_sup(const ConeTable& ta, const ConeTable& tb) {
  Estimate best;
  for (std::size_t i = 0; i < ta.cones.size(); ++i) {
    if (ta.units[i].empty()) continue;
    for (std::size_t j = 0; j < tb.cones.size(); ++j) {
      if (tb.units[j].empty()) continue;
      auto consider = [&](double val, const Point& u, const Point& v) {
        if (val > best.value) {
          best.value = val;
          best.witness = {ta.base[i], tb.base[j], u, v};
        }
      };
      for (const Point& u : ta.units[i]) {
        const Point p = tb.cones[j].project(-u);
        const double val = max_unit_inner(tb.cones[j], -u);
        const Point v = p.norm() > 1e-12 ? Point(p / p.norm()) : tb.units[j].front();
        consider(val, u, v);
      }
      for (const Point& v : tb.units[j]) {
        const Point p = ta.cones[i].project(-v);
        const double val = max_unit_inner(ta.cones[i], -v);
        const Point u = p.norm() > 1e-12 ? Point(p / p.norm()) : ta.units[i].front();
        consider(val, u, v);
      }
    }
  }
  if (best.value > 1.0) best.value = 1.0;
  return best;
}

inline std::vector<Point> in_ball(const std::vector<Point>& pts, const Point& c, double r) {
  std::vector<Point> out;
  for (const Point& p : pts)
    if ((p - c).norm() <= r * (1.0 + 1e-12)) out.push_back(p);
  return out;
}

inline std::vector<Cone> proximal_cones(const SetOracle& s, const std::vector<Point>& pts) {
  std::vector<Cone> out;
  out.reserve(pts.size());
  for (const Point& p : pts) out.push_back(s.normal_cone_at(p));
  return out;
}

inline std::vector<Cone> restricted_cones(const SetOracle& s, const SetOracle& other, const std::vector<Point>& pts,
                                          const RestrictedSampling& base, double rho) {
  RestrictedSampling cfg = base;
  cfg.radius = 4.0 * rho;
  std::vector<Cone> out;
  out.reserve(pts.size());
  for (const Point& p : pts) out.push_back(restricted_proximal_normal_cone(s, other, p, cfg));
  return out;
}

/// Samples of a set in the ball, augmented with the projections of the other
/// set's samples that land in the ball (so chains and tie points are covered).
struct LevelSamples {
  std::vector<Point> a, b;          // plain samples
  std::vector<Point> a_aug, b_aug;  // with cross projections
};

inline LevelSamples sample_level(const SetOracle& A, const SetOracle& B, const Point& xbar, double rho,
                                 const RegularityConfig& cfg, int level) {
  LevelSamples s;
  Rng ra(mix_seed(cfg.seed, static_cast<std::uint64_t>(level), 1));
  Rng rb(mix_seed(cfg.seed, static_cast<std::uint64_t>(level), 2));
  s.a = in_ball(A.sample_ball(xbar, rho, cfg.grid, cfg.random, ra), xbar, rho);
  s.b = in_ball(B.sample_ball(xbar, rho, cfg.grid, cfg.random, rb), xbar, rho);
  s.a_aug = s.a;
  s.b_aug = s.b;
  for (const Point& b : s.b)
    for (const Point& p : A.project(b).points)
      if ((p - xbar).norm() <= rho) s.a_aug.push_back(p);
  for (const Point& a : s.a)
    for (const Point& p : B.project(a).points)
      if ((p - xbar).norm() <= rho) s.b_aug.push_back(p);
  return s;
}

inline void require_common_point(const SetOracle& A, const SetOracle& B, const Point& xbar) {
  require_same_dim(xbar, A.dim(), "reference point");
  if (B.dim() != A.dim()) throw DomainError("sets differ in dimension");
  if (!A.contains(xbar)) throw DomainError("reference point is not in A");
  if (!B.contains(xbar)) throw DomainError("reference point is not in B");
}

}  // namespace detail

inline constexpr double kExclusionTol = 1e-9;

/// sup -<u, v> over unit proximal normals u at a in A, v at b in B, per level.
inline std::vector<Estimate> estimate_c_uniform(const SetOracle& A, const SetOracle& B, const Point& xbar,
                                                const RegularityConfig& cfg) {
  detail::require_common_point(A, B, xbar);
  cfg.ladder.validate();
  std::vector<Estimate> out;
  for (int j = 0; j < cfg.ladder.levels; ++j) {
    const auto s = detail::sample_level(A, B, xbar, cfg.ladder.rho(j), cfg, j);
    const auto ta = detail::tabulate_cones(s.a_aug, detail::proximal_cones(A, s.a_aug), cfg.normal_samples, cfg.seed);
    const auto tb = detail::tabulate_cones(s.b_aug, detail::proximal_cones(B, s.b_aug), cfg.normal_samples, cfg.seed);
    out.push_back(detail::opposite_normals_sup(ta, tb));
  }
  return out;
}

/// As estimate_c_uniform with the cones restricted to the other set.
inline std::vector<Estimate> estimate_c1_blpw(const SetOracle& A, const SetOracle& B, const Point& xbar,
                                              const RegularityConfig& cfg) {
  detail::require_common_point(A, B, xbar);
  cfg.ladder.validate();
  std::vector<Estimate> out;
  for (int j = 0; j < cfg.ladder.levels; ++j) {
    const double rho = cfg.ladder.rho(j);
    const auto s = detail::sample_level(A, B, xbar, rho, cfg, j);
    const auto ta = detail::tabulate_cones(s.a_aug, detail::restricted_cones(A, B, s.a_aug, cfg.restricted, rho),
                                           cfg.normal_samples, cfg.seed);
    const auto tb = detail::tabulate_cones(s.b_aug, detail::restricted_cones(B, A, s.b_aug, cfg.restricted, rho),
                                           cfg.normal_samples, cfg.seed);
    out.push_back(detail::opposite_normals_sup(ta, tb));
  }
  return out;
}

namespace detail {

struct Differences {
  std::vector<Point> a_out;  // samples of A not in B
  std::vector<Point> b_out;  // samples of B not in A
};

inline Differences set_differences(const SetOracle& A, const SetOracle& B, const LevelSamples& s) {
  Differences d;
  for (const Point& a : s.a_aug)
    if (B.distance(a) > kExclusionTol) d.a_out.push_back(a);
  for (const Point& b : s.b_aug)
    if (A.distance(b) > kExclusionTol) d.b_out.push_back(b);
  return d;
}

inline Estimate c2_level(const SetOracle& A, const SetOracle& B, const Differences& d, SampleCounts& counts) {
  // The quotient separates: sup over unit (a - b_a) times unit (b - a_b).
  std::vector<std::pair<Point, Point>> us, vs;  // (unit direction, base point)
  for (const Point& a : d.a_out) {
    const ProjectionResult pr = B.project(a);
    counts.max_ties = std::max(counts.max_ties, pr.points.size());
    for (const Point& ba : pr.points) us.emplace_back((a - ba) / (a - ba).norm(), a);
  }
  for (const Point& b : d.b_out) {
    const ProjectionResult pr = A.project(b);
    counts.max_ties = std::max(counts.max_ties, pr.points.size());
    for (const Point& ab : pr.points) vs.emplace_back((b - ab) / (b - ab).norm(), b);
  }
  Estimate best;
  for (const auto& [u, a] : us)
    for (const auto& [v, b] : vs) {
      const double val = -u.dot(v);
      if (val > best.value) {
        best.value = val;
        best.witness = {a, b, u, v};
      }
    }
  return best;
}

inline Estimate c3_level(const SetOracle& A, const SetOracle& B, const std::vector<Point>& a_samples,
                         const Point& xbar, double rho) {
  Estimate best;
  const double r = rho * (1.0 + 1e-12);
  for (const Point& a1 : a_samples) {
    for (const Point& b : B.project(a1).points) {
      if ((b - xbar).norm() > r || (a1 - b).norm() <= kExclusionTol) continue;
      for (const Point& a2 : A.project(b).points) {
        if ((a2 - xbar).norm() > r || (a2 - b).norm() <= kExclusionTol) continue;
        const Point u = (a1 - b) / (a1 - b).norm();
        const Point v = (a2 - b) / (a2 - b).norm();
        const double val = u.dot(v);
        if (val > best.value) {
          best.value = val;
          best.witness = {a1, b, u, v};
        }
      }
    }
  }
  return best;
}

/// theta4 = inf over pairs of max(d(w, N_A(a)), d(-w, N_B(b))) with w the unit
/// vector from a to b; c4 = sup of min(sup <w, u>, sup <-w, v>) over unit
/// normals u, v. Per pair the two are tied by ||P_K w||^2 + d(w, K)^2 = 1.
inline std::pair<Estimate, Estimate> c4_level(const std::vector<Point>& a_out, const std::vector<Cone>& ka,
                                              const std::vector<Point>& b_out, const std::vector<Cone>& kb) {
  Estimate c4, th4;
  th4.value = kInf;
  for (std::size_t i = 0; i < a_out.size(); ++i) {
    for (std::size_t j = 0; j < b_out.size(); ++j) {
      const Point w = (b_out[j] - a_out[i]) / (b_out[j] - a_out[i]).norm();
      const Point pa = ka[i].project(w);
      const Point pb = kb[j].project(-w);
      const double da = (w - pa).norm(), db = (-w - pb).norm();
      const double na = pa.norm(), nb = pb.norm();
      const double ma = na > 1e-12 ? pa.dot(w) / na : max_unit_inner(ka[i], w);
      const double mb = nb > 1e-12 ? -pb.dot(w) / nb : max_unit_inner(kb[j], -w);
      const double th = std::max(da, db);
      const double c = std::min(ma, mb);
      if (th < th4.value) {
        th4.value = th;
        th4.witness = {a_out[i], b_out[j], pa, pb};
      }
      if (c > c4.value) {
        c4.value = c;
        const Point u = pa.norm() > 1e-12 ? Point(pa / pa.norm()) : pa;
        const Point v = pb.norm() > 1e-12 ? Point(pb / pb.norm()) : pb;
        c4.witness = {a_out[i], b_out[j], u, v};
      }
    }
  }
  if (c4.value > 1.0) c4.value = 1.0;
  return {c4, th4};
}

}  // namespace detail

/// sup -<a - b_a, b - a_b> / (||a - b_a|| ||b - a_b||) over a in A\B, b in B\A.
inline std::vector<Estimate> estimate_c2(const SetOracle& A, const SetOracle& B, const Point& xbar,
                                         const RegularityConfig& cfg) {
  detail::require_common_point(A, B, xbar);
  cfg.ladder.validate();
  std::vector<Estimate> out;
  for (int j = 0; j < cfg.ladder.levels; ++j) {
    const auto s = detail::sample_level(A, B, xbar, cfg.ladder.rho(j), cfg, j);
    SampleCounts counts;
    out.push_back(detail::c2_level(A, B, detail::set_differences(A, B, s), counts));
  }
  return out;
}

/// sup <a1 - b, a2 - b> / (||a1 - b|| ||a2 - b||) over chains a1 in A,
/// b in P_B(a1), a2 in P_A(b), all in the ball, a1 != b != a2. Chains that
/// leave the ball are not counted.
inline std::vector<Estimate> estimate_c3_nr(const SetOracle& A, const SetOracle& B, const Point& xbar,
                                            const RegularityConfig& cfg) {
  detail::require_common_point(A, B, xbar);
  cfg.ladder.validate();
  std::vector<Estimate> out;
  for (int j = 0; j < cfg.ladder.levels; ++j) {
    const double rho = cfg.ladder.rho(j);
    const auto s = detail::sample_level(A, B, xbar, rho, cfg, j);
    out.push_back(detail::c3_level(A, B, s.a_aug, xbar, rho));
  }
  return out;
}

/// Per level (c4, theta4), both from the same pairs.
inline std::vector<std::pair<Estimate, Estimate>> estimate_c4_theta4(const SetOracle& A, const SetOracle& B,
                                                                     const Point& xbar, const RegularityConfig& cfg) {
  detail::require_common_point(A, B, xbar);
  cfg.ladder.validate();
  std::vector<std::pair<Estimate, Estimate>> out;
  for (int j = 0; j < cfg.ladder.levels; ++j) {
    const auto s = detail::sample_level(A, B, xbar, cfg.ladder.rho(j), cfg, j);
    const auto d = detail::set_differences(A, B, s);
    out.push_back(detail::c4_level(d.a_out, detail::proximal_cones(A, d.a_out), d.b_out,
                                   detail::proximal_cones(B, d.b_out)));
  }
  return out;
}

namespace detail {

inline Estimate gamma_level(const std::vector<Point>& pts, const std::vector<Cone>& cones) {
  Estimate best;
  best.value = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (cones[i].is_empty() || cones[i].is_trivial()) continue;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const Point d = pts[k] - pts[i];
      const double n = d.norm();
      if (n == 0.0) continue;
      const double val = max_unit_inner(cones[i], d / n);
      if (val > best.value) {
        best.value = val;
        const Point p = cones[i].project(d);
        best.witness = {pts[k], pts[i], p.norm() > 0 ? Point(p / p.norm()) : p, d / n};
      }
    }
  }
  return best;
}

}  // namespace detail

/// gamma(delta) = sup <u, x - a> / ||x - a|| over sampled x != a in A near xbar
/// and unit u in N_A^prox(a), clamped below at 0.
inline std::vector<std::pair<double, Estimate>> super_regularity_modulus(const SetOracle& A, const Point& xbar,
                                                                         const std::vector<double>& deltas,
                                                                         const RegularityConfig& cfg) {
  require_same_dim(xbar, A.dim(), "reference point");
  if (!A.contains(xbar)) throw DomainError("reference point is not in the set");
  std::vector<std::pair<double, Estimate>> out;
  for (std::size_t j = 0; j < deltas.size(); ++j) {
    if (!(deltas[j] > 0.0)) throw DomainError("super-regularity: radii must be positive");
    Rng rng(detail::mix_seed(cfg.seed, j, 3));
    const auto pts = detail::in_ball(A.sample_ball(xbar, deltas[j], cfg.grid, cfg.random, rng), xbar, deltas[j]);
    out.emplace_back(deltas[j], detail::gamma_level(pts, detail::proximal_cones(A, pts)));
  }
  return out;
}

/// As super_regularity_modulus with normals restricted to B.
inline std::vector<std::pair<double, Estimate>> b_super_regularity_modulus(const SetOracle& A, const SetOracle& B,
                                                                           const Point& xbar,
                                                                           const std::vector<double>& deltas,
                                                                           const RegularityConfig& cfg) {
  require_same_dim(xbar, A.dim(), "reference point");
  if (!A.contains(xbar)) throw DomainError("reference point is not in the set");
  if (B.dim() != A.dim()) throw DomainError("sets differ in dimension");
  std::vector<std::pair<double, Estimate>> out;
  for (std::size_t j = 0; j < deltas.size(); ++j) {
    if (!(deltas[j] > 0.0)) throw DomainError("super-regularity: radii must be positive");
    Rng rng(detail::mix_seed(cfg.seed, j, 3));
    const auto pts = detail::in_ball(A.sample_ball(xbar, deltas[j], cfg.grid, cfg.random, rng), xbar, deltas[j]);
    out.emplace_back(deltas[j],
                     detail::gamma_level(pts, detail::restricted_cones(A, B, pts, cfg.restricted, deltas[j])));
  }
  return out;
}

/// Basic qualification: no unit proximal normal of A near xbar is (nearly)
/// opposite to one of B. Normals are pooled over the two smallest radii.
inline Qualification check_qualification(const SetOracle& A, const SetOracle& B, const Point& xbar,
                                         const RegularityConfig& cfg, double threshold = 0.05) {
  detail::require_common_point(A, B, xbar);
  cfg.ladder.validate();
  std::vector<Point> pa, pb;
  for (int j = cfg.ladder.levels - 2; j < cfg.ladder.levels; ++j) {
    const auto s = detail::sample_level(A, B, xbar, cfg.ladder.rho(j), cfg, j);
    pa.insert(pa.end(), s.a_aug.begin(), s.a_aug.end());
    pb.insert(pb.end(), s.b_aug.begin(), s.b_aug.end());
  }
  const auto ta = detail::tabulate_cones(pa, detail::proximal_cones(A, pa), cfg.normal_samples, cfg.seed);
  const auto tb = detail::tabulate_cones(pb, detail::proximal_cones(B, pb), cfg.normal_samples, cfg.seed);
  const Estimate e = detail::opposite_normals_sup(ta, tb);
  Qualification q;
  q.witness = e.witness;
  // ||u + v||^2 = 2 - 2 (-<u, v>) for unit u, v.
  q.margin = std::isfinite(e.value) ? std::sqrt(std::max(0.0, 2.0 - 2.0 * e.value)) : kInf;
  q.holds = q.margin >= threshold;
  return q;
}

/// Every constant at every level from one set of samples per level.
inline RegularityReport estimate_regularity(const SetOracle& A, const SetOracle& B, const Point& xbar,
                                            const RegularityConfig& cfg) {
  detail::require_common_point(A, B, xbar);
  cfg.ladder.validate();
  RegularityReport rep;
  for (int j = 0; j < cfg.ladder.levels; ++j) {
    const double rho = cfg.ladder.rho(j);
    const auto s = detail::sample_level(A, B, xbar, rho, cfg, j);
    LevelReport lv;
    lv.rho = rho;
    lv.counts.a = s.a_aug.size();
    lv.counts.b = s.b_aug.size();

    const auto cones_a = detail::proximal_cones(A, s.a_aug);
    const auto cones_b = detail::proximal_cones(B, s.b_aug);
    const auto ta = detail::tabulate_cones(s.a_aug, cones_a, cfg.normal_samples, cfg.seed);
    const auto tb = detail::tabulate_cones(s.b_aug, cones_b, cfg.normal_samples, cfg.seed);
    lv.c_hat = detail::opposite_normals_sup(ta, tb);

    const auto ra = detail::tabulate_cones(s.a_aug, detail::restricted_cones(A, B, s.a_aug, cfg.restricted, rho),
                                           cfg.normal_samples, cfg.seed);
    const auto rb = detail::tabulate_cones(s.b_aug, detail::restricted_cones(B, A, s.b_aug, cfg.restricted, rho),
                                           cfg.normal_samples, cfg.seed);
    lv.c1_hat = detail::opposite_normals_sup(ra, rb);

    const auto d = detail::set_differences(A, B, s);
    lv.counts.a_minus_b = d.a_out.size();
    lv.counts.b_minus_a = d.b_out.size();
    lv.counts.pairs = d.a_out.size() * d.b_out.size();
    lv.c2_hat = detail::c2_level(A, B, d, lv.counts);
    lv.c3_hat = detail::c3_level(A, B, s.a_aug, xbar, rho);
    lv.c3_hat_reversed = detail::c3_level(B, A, s.b_aug, xbar, rho);

    std::vector<Cone> ka, kb;
    for (std::size_t i = 0; i < s.a_aug.size(); ++i)
      if (B.distance(s.a_aug[i]) > kExclusionTol) ka.push_back(cones_a[i]);
    for (std::size_t i = 0; i < s.b_aug.size(); ++i)
      if (A.distance(s.b_aug[i]) > kExclusionTol) kb.push_back(cones_b[i]);
    std::tie(lv.c4_hat, lv.theta4_hat) = detail::c4_level(d.a_out, ka, d.b_out, kb);
    rep.levels.push_back(std::move(lv));
  }
  const std::vector<double> radii = cfg.ladder.radii();
  rep.super_regularity_a = super_regularity_modulus(A, xbar, radii, cfg);
  rep.super_regularity_b = super_regularity_modulus(B, xbar, radii, cfg);
  rep.b_super_regularity_a = b_super_regularity_modulus(A, B, xbar, radii, cfg);
  rep.qualification = check_qualification(A, B, xbar, cfg);
  return rep;
}

}  // namespace altproj
