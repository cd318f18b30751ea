#pragma once

// Exact and inexact alternating projections with per-step admissibility
// certificates.

#include "altproj/sets.hpp"

#include <iomanip>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace altproj {

enum class Scheme { exact, tau_sigma, sigma_monotone };
enum class Mode { nearest, adversarial, random };
enum class TiePolicy { lexicographic, random };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::exact: return "exact";
    case Scheme::tau_sigma: return "tau-sigma";
    case Scheme::sigma_monotone: return "sigma-monotone";
  }
  return "?";
}

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::nearest: return "nearest";
    case Mode::adversarial: return "adversarial";
    case Mode::random: return "random";
  }
  return "?";
}

struct InexactnessPolicy {
  Scheme scheme = Scheme::exact;
  double tau = 1.0;
  double sigma = 0.0;
  Mode mode = Mode::nearest;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("policy: tau must lie in (0, 1]");
    if (!(sigma >= 0.0 && sigma < 1.0)) throw DomainError("policy: sigma must lie in [0, 1)");
    if (scheme == Scheme::exact && (tau != 1.0 || sigma != 0.0))
      throw DomainError("policy: exact scheme requires tau = 1 and sigma = 0");
  }

  /// Distance ratio actually enforced: the sigma-monotone scheme has none.
  double effective_tau() const { return scheme == Scheme::sigma_monotone ? 0.0 : tau; }
};

/// The two admissibility inequalities for a chosen a given x:
/// tau ||x - a|| <= d(x, S) and d(x - a, N_S(a)) <= sigma ||x - a||.
struct Certificate {
  double len = std::numeric_limits<double>::quiet_NaN();          // ||x - a||
  double dist = std::numeric_limits<double>::quiet_NaN();         // d(x, S)
  double normal_dist = std::numeric_limits<double>::quiet_NaN();  // d(x - a, N_S(a))

  /// d(x, S) / ||x - a||, 1 when a = x.
  double dist_ratio() const { return len == 0.0 ? 1.0 : dist / len; }
  /// d(x - a, N_S(a)) / ||x - a||, 0 when a = x.
  double normal_ratio() const { return len == 0.0 ? 0.0 : normal_dist / len; }

  bool satisfies(double tau, double sigma, double tol = 1e-9) const {
    return tau * len <= dist + tol && normal_dist <= sigma * len + tol;
  }
};

enum class Tag { start, A, B };

struct TraceStep {
  Point x;
  Tag tag = Tag::start;
  double step = 0.0;
  double dist_a = 0.0;
  double dist_b = 0.0;
  Certificate cert;
};

struct IterationTrace {
  std::vector<TraceStep> steps;
  double tau = 1.0;
  double sigma = 0.0;
  bool converged = false;
  bool monotonicity_failure = false;
  std::optional<Point> limit;

  std::size_t projections() const { return steps.empty() ? 0 : steps.size() - 1; }
  const Point& last() const { return steps.back().x; }

  bool certificates_ok(double tol = 1e-9) const {
    for (std::size_t k = 1; k < steps.size(); ++k)
      if (!steps[k].cert.satisfies(tau, sigma, tol)) return false;
    return true;
  }
};

class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, IterationTrace partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const IterationTrace& partial() const { return partial_; }

 private:
  IterationTrace partial_;
};

struct StopRule {
  double tol = 1e-12;
  long max_iter = 100000;

  void validate() const {
    if (!(tol > 0.0)) throw DomainError("stop rule: tol must be positive");
    if (max_iter < 1) throw DomainError("stop rule: max_iter must be positive");
  }
};

inline Certificate certify(const SetOracle& s, const Point& x, const Point& a) {
  const double len = (x - a).norm();
  return {len, s.distance(x), len == 0.0 ? 0.0 : s.normal_cone_at(a).distance(x - a)};
}

namespace detail {

struct Admissibility {
  double tau = 1.0;
  double sigma = 0.0;
  double max_len = kInf;  // monotonicity cap on ||x - a||
};

// Relative slack absorbing rounding in the two inequalities, far inside the
// 1e-9 the certificates are checked at.
inline constexpr double kSelectSlack = 1e-12;

inline bool admissible(const SetOracle& s, const Point& x, const Point& a, double d, const Admissibility& adm) {
  const double len = (x - a).norm();
  if (len > adm.max_len) return false;
  if (len == 0.0) return d == 0.0;
  if (adm.tau * len > d + kSelectSlack * len) return false;
  return s.normal_cone_at(a).distance(x - a) <= (adm.sigma + kSelectSlack) * len;
}

/// The tie chosen by the policy, unless it fails the admissibility
/// inequalities; then the nearest member. That only happens at distances
/// comparable to the absolute tie tolerance, where every nearby point ties.
inline Point pick_tie(const SetOracle& s, const Point& x, const ProjectionResult& pr, const Admissibility& adm,
                      TiePolicy ties, Rng& rng) {
  std::size_t k = 0;
  if (ties == TiePolicy::random && pr.points.size() > 1) k = rng.index(pr.points.size());
  if (pr.points.size() == 1 || admissible(s, x, pr.points[k], pr.distance, {adm.tau, adm.sigma})) return pr.points[k];
  std::size_t best = 0;
  for (std::size_t i = 1; i < pr.points.size(); ++i)
    if ((x - pr.points[i]).norm() < (x - pr.points[best]).norm()) best = i;
  return pr.points[best];
}

inline Point random_select(const SetOracle& s, const Point& x, const Point& p, double d, const Admissibility& adm,
                           Rng& rng) {
  const double reach = std::max(d, 1e-300) / std::max(adm.tau, 0.5);
  for (int trial = 0; trial < 1000; ++trial) {
    const Point probe = p + rng.uniform(0.0, reach) * rng.unit_vector(x.size());
    const Point q = s.project(probe).points.front();
    if (admissible(s, x, q, d, adm)) return q;
  }
  return p;
}

/// Start from the farthest admissible local candidate, then grow ||x - a||
/// by moving along the set: steps of length h in +-e_i, h *= 1.1 on success
/// and halved otherwise.
inline Point adversarial_select(const SetOracle& s, const Point& x, const Point& p, double d,
                                const Admissibility& adm) {
  Point best = p;
  double best_len = (x - p).norm();
  for (const Point& q : s.candidates(x)) {
    const double len = (x - q).norm();
    if (len > best_len && admissible(s, x, q, d, adm)) {
      best = q;
      best_len = len;
    }
  }
  double h = 0.01 * std::max(d, 1e-300);
  const Index n = x.size();
  for (int round = 0; round < 50; ++round) {
    Point next = best;
    double next_len = best_len;
    for (Index i = 0; i < n; ++i) {
      for (double sgn : {1.0, -1.0}) {
        Point probe = best;
        probe[i] += sgn * h;
        const Point q = s.project(probe).points.front();
        const double len = (x - q).norm();
        if (len > next_len && admissible(s, x, q, d, adm)) {
          next = q;
          next_len = len;
        }
      }
    }
    if (next_len > best_len) {
      best = next;
      best_len = next_len;
      h *= 1.1;
    } else {
      h *= 0.5;
    }
  }
  return best;
}

/// The selected point, or nothing when even the exact projection breaks the
/// monotonicity cap.
inline std::optional<Point> select(const SetOracle& s, const Point& x, const Admissibility& adm, Mode mode,
                                   TiePolicy ties, Rng& rng) {
  const ProjectionResult pr = s.project(x);
  const double d = pr.distance;
  if (d == 0.0) return x;
  const Point p = pick_tie(s, x, pr, adm, ties, rng);
  const bool exact_ok = (x - p).norm() <= adm.max_len;
  Point out = p;
  switch (mode) {
    case Mode::nearest: break;
    case Mode::random: out = random_select(s, x, p, d, adm, rng); break;
    case Mode::adversarial: out = adversarial_select(s, x, p, d, adm); break;
  }
  if (out == p && !exact_ok) return std::nullopt;
  return out;
}

inline void require_finite(const Point& x, IterationTrace& trace) {
  if (!is_finite(x)) {
    trace.converged = false;
    throw NumericalFailure("non-finite iterate after " + std::to_string(trace.projections()) + " projections",
                           std::move(trace));
  }
}

inline TraceStep make_step(const SetOracle& A, const SetOracle& B, const Point& prev, Point x, Tag tag) {
  TraceStep st;
  st.step = (x - prev).norm();
  st.dist_a = A.distance(x);
  st.dist_b = B.distance(x);
  st.cert = certify(tag == Tag::A ? A : B, prev, x);
  st.x = std::move(x);
  st.tag = tag;
  return st;
}

inline bool stop_now(const TraceStep& st, const StopRule& stop) {
  return st.step < stop.tol && st.dist_a < 10 * stop.tol && st.dist_b < 10 * stop.tol;
}

inline TraceStep start_step(const SetOracle& A, const SetOracle& B, const Point& x0) {
  TraceStep st;
  st.x = x0;
  st.dist_a = A.distance(x0);
  st.dist_b = B.distance(x0);
  return st;
}

inline void check_inputs(const SetOracle& A, const SetOracle& B, const Point& x0, const StopRule& stop) {
  require_same_dim(x0, A.dim(), "iteration start");
  require_same_dim(x0, B.dim(), "iteration start");
  if (!is_finite(x0)) throw DomainError("iteration start must be finite");
  stop.validate();
}

}  // namespace detail

/// A point a of s with tau ||x - a|| <= d(x, s) and d(x - a, N_s(a)) <= sigma ||x - a||.
inline Point tau_sigma_project(const SetOracle& s, const Point& x, double tau, double sigma, Mode mode, Rng& rng,
                               TiePolicy ties = TiePolicy::lexicographic) {
  InexactnessPolicy{Scheme::tau_sigma, tau, sigma, mode}.validate();
  require_same_dim(x, s.dim(), "tau_sigma_project");
  return *detail::select(s, x, {tau, sigma}, mode, ties, rng);
}

inline Point tau_sigma_project(const SetOracle& s, const Point& x, double tau, double sigma, Mode mode,
                               std::uint64_t seed = 0) {
  Rng rng(seed);
  return tau_sigma_project(s, x, tau, sigma, mode, rng);
}

/// A point a of s with d(x - a, N_s(a)) <= sigma ||x - a||; no distance ratio.
inline Point sigma_project(const SetOracle& s, const Point& x, double sigma, Mode mode, Rng& rng,
                           TiePolicy ties = TiePolicy::lexicographic) {
  InexactnessPolicy{Scheme::sigma_monotone, 1.0, sigma, mode}.validate();
  require_same_dim(x, s.dim(), "sigma_project");
  return *detail::select(s, x, {0.0, sigma}, mode, ties, rng);
}

inline Point sigma_project(const SetOracle& s, const Point& x, double sigma, Mode mode, std::uint64_t seed = 0) {
  Rng rng(seed);
  return sigma_project(s, x, sigma, mode, rng);
}

/// Projects onto B, then A, and so on, with (tau, sigma)-admissible selections.
inline IterationTrace run_tau_sigma(const SetOracle& A, const SetOracle& B, const Point& x0, double tau, double sigma,
                                   Mode mode, const StopRule& stop = {}, std::uint64_t seed = 0,
                                   TiePolicy ties = TiePolicy::lexicographic) {
  InexactnessPolicy{Scheme::tau_sigma, tau, sigma, mode}.validate();
  detail::check_inputs(A, B, x0, stop);
  Rng rng(seed);
  IterationTrace trace;
  trace.tau = tau;
  trace.sigma = sigma;
  trace.steps.push_back(detail::start_step(A, B, x0));
  for (long k = 0; k < stop.max_iter; ++k) {
    const Tag tag = k % 2 == 0 ? Tag::B : Tag::A;
    const SetOracle& s = tag == Tag::B ? B : A;
    const Point prev = trace.last();
    Point x = *detail::select(s, prev, {tau, sigma}, mode, ties, rng);
    detail::require_finite(x, trace);
    trace.steps.push_back(detail::make_step(A, B, prev, std::move(x), tag));
    if (detail::stop_now(trace.steps.back(), stop)) {
      trace.converged = true;
      trace.limit = trace.last();
      break;
    }
  }
  return trace;
}

/// Plain alternating projections x_{2n+1} in P_B(x_{2n}), x_{2n+2} in P_A(x_{2n+1}).
inline IterationTrace alternating(const SetOracle& A, const SetOracle& B, const Point& x0, const StopRule& stop = {},
                                  TiePolicy ties = TiePolicy::lexicographic, std::uint64_t seed = 0) {
  return run_tau_sigma(A, B, x0, 1.0, 0.0, Mode::nearest, stop, seed, ties);
}

/// sigma-projections with ||x_{n+2} - x_{n+1}|| <= ||x_{n+1} - x_n||. Proposals
/// breaking the monotonicity are redrawn or replaced by the exact projection;
/// if that fails too, the run stops with `monotonicity_failure` set.
inline IterationTrace run_sigma_monotone(const SetOracle& A, const SetOracle& B, const Point& x0, const Point& x1,
                                         double sigma, Mode mode, const StopRule& stop = {}, std::uint64_t seed = 0,
                                         TiePolicy ties = TiePolicy::lexicographic) {
  InexactnessPolicy{Scheme::sigma_monotone, 1.0, sigma, mode}.validate();
  detail::check_inputs(A, B, x0, stop);
  require_same_dim(x1, B.dim(), "second iterate");
  if (!B.contains(x1)) throw DomainError("second iterate must lie in B");
  if (!certify(B, x0, x1).satisfies(0.0, sigma)) throw DomainError("second iterate is not a sigma-projection of the first");
  Rng rng(seed);
  IterationTrace trace;
  trace.tau = 0.0;
  trace.sigma = sigma;
  trace.steps.push_back(detail::start_step(A, B, x0));
  trace.steps.push_back(detail::make_step(A, B, x0, x1, Tag::B));
  detail::require_finite(x1, trace);
  if (detail::stop_now(trace.steps.back(), stop)) {
    trace.converged = true;
    trace.limit = trace.last();
    return trace;
  }
  // Rounding slack so that exact projections between convex sets never trip the cap.
  constexpr double kSlack = 1e-12;
  for (long k = 1; k < stop.max_iter; ++k) {
    const Tag tag = k % 2 == 0 ? Tag::B : Tag::A;
    const SetOracle& s = tag == Tag::B ? B : A;
    const Point prev = trace.last();
    const double cap = trace.steps.back().step * (1.0 + kSlack) + 1e-300;
    std::optional<Point> x = detail::select(s, prev, {0.0, sigma, cap}, mode, ties, rng);
    if (!x) {
      trace.monotonicity_failure = true;
      break;
    }
    detail::require_finite(*x, trace);
    trace.steps.push_back(detail::make_step(A, B, prev, std::move(*x), tag));
    if (detail::stop_now(trace.steps.back(), stop)) {
      trace.converged = true;
      trace.limit = trace.last();
      break;
    }
  }
  return trace;
}

/// Runs the scheme named by the policy. The sigma-monotone scheme first moves
/// x0 onto A (monotonicity of exact steps needs x0 in A) and then draws
/// x1 = sigma_project(B, x0) with the same mode.
inline IterationTrace run_policy(const SetOracle& A, const SetOracle& B, const Point& x0,
                                 const InexactnessPolicy& policy, const StopRule& stop = {}) {
  policy.validate();
  switch (policy.scheme) {
    case Scheme::exact: return alternating(A, B, x0, stop, TiePolicy::lexicographic, policy.seed);
    case Scheme::tau_sigma:
      return run_tau_sigma(A, B, x0, policy.tau, policy.sigma, policy.mode, stop, policy.seed);
    case Scheme::sigma_monotone: {
      detail::check_inputs(A, B, x0, stop);
      const Point start = A.project(x0).points.front();
      Rng rng(policy.seed ^ 0x9E3779B97F4A7C15ULL);
      const Point x1 = sigma_project(B, start, policy.sigma, policy.mode, rng);
      return run_sigma_monotone(A, B, start, x1, policy.sigma, policy.mode, stop, policy.seed);
    }
  }
  throw DomainError("unknown scheme");
}

/// mu = inf over sampled u in A ∩ B_delta(a) with ||u - b|| <= ||a - b|| of
/// d((b - u)/||b - u||, N_A(u)). Sampling covers a, the projections of b that
/// fall in the ball, and `grid` + `random` points of A in the ball.
inline double sample_mu(const SetOracle& A, const Point& a, const Point& b, double delta, std::size_t grid = 200,
                        std::size_t random = 200, std::uint64_t seed = 0) {
  Rng rng(seed);
  std::vector<Point> us = A.sample_ball(a, delta, grid, random, rng);
  us.push_back(a);
  for (const Point& p : A.project(b).points) us.push_back(p);
  for (const Point& p : A.candidates(b)) us.push_back(p);
  const double ab = (a - b).norm();
  double mu = kInf;
  for (const Point& u : us) {
    if ((u - a).norm() > delta || !A.contains(u)) continue;
    const double ub = (u - b).norm();
    if (ub > ab || ub == 0.0) continue;
    mu = std::min(mu, A.normal_cone_at(u).distance((b - u) / ub));
  }
  return mu == kInf ? 0.0 : mu;
}

/// Does d(b, A) <= ||a - b|| - mu delta hold (with 1e-9 slack)?
inline bool verify_distance_decrease(const SetOracle& A, const Point& a, const Point& b, double delta, double mu) {
  require_same_dim(a, A.dim(), "verify_distance_decrease");
  require_same_dim(b, A.dim(), "verify_distance_decrease");
  if (!A.contains(a)) throw DomainError("verify_distance_decrease: a must lie in A");
  if (A.distance(b) == 0.0) throw DomainError("verify_distance_decrease: b must lie outside A");
  if (!(delta > 0.0)) throw DomainError("verify_distance_decrease: delta must be positive");
  return A.distance(b) <= (a - b).norm() - mu * delta + 1e-9;
}

inline bool verify_distance_decrease(const SetOracle& A, const Point& a, const Point& b, double delta) {
  return verify_distance_decrease(A, a, b, delta, sample_mu(A, a, b, delta));
}

/// Columns: iter, tag, x_1..x_n, step_norm, dist_A, dist_B, cert_ratio_tau,
/// cert_ratio_sigma; 17 significant digits.
inline void write_trace_csv(std::ostream& os, const IterationTrace& trace) {
  const Index n = trace.steps.empty() ? 0 : trace.steps.front().x.size();
  os << "iter,tag";
  for (Index i = 1; i <= n; ++i) os << ",x_" << i;
  os << ",step_norm,dist_A,dist_B,cert_ratio_tau,cert_ratio_sigma\n";
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17);
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const TraceStep& st = trace.steps[k];
    os << k << ',' << (st.tag == Tag::start ? "x0" : st.tag == Tag::A ? "A" : "B");
    for (Index i = 0; i < n; ++i) os << ',' << st.x[i];
    os << ',' << st.step << ',' << st.dist_a << ',' << st.dist_b << ',' << st.cert.dist_ratio() << ','
       << st.cert.normal_ratio() << '\n';
  }
  os.flags(flags);
  os.precision(prec);
}

}  // namespace altproj
