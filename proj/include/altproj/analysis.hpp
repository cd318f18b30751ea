#pragma once

// Empirical R-linear rates of iteration traces and the rate bounds they are
// compared against.

#include "altproj/iterate.hpp"
#include "altproj/regularity.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace altproj {

class NoRateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HypothesisViolation : public DomainError {
 public:
  using DomainError::DomainError;
};

struct RateEstimate {
  double rate = 0.0;        // per projection: geometric mean of the ratios
  double cycle_rate = 0.0;  // per full cycle (two projections)
  std::size_t first = 0;    // ratios r_k for k in [first, last)
  std::size_t last = 0;
  std::vector<double> ratios;
  std::vector<double> per_cycle_ratios;
  Point limit_estimate;
};

namespace detail {

inline double geometric_mean(const std::vector<double>& r) {
  if (r.empty()) return 0.0;
  double s = 0.0;
  for (double v : r) {
    if (v <= 0.0) return 0.0;
    s += std::log(v);
  }
  return std::exp(s / static_cast<double>(r.size()));
}

}  // namespace detail

/// Ratios r_k = ||x_{k+1} - x*|| / ||x_k - x*|| with x* the final iterate,
/// from the first iterate lying in a set (k = 1) while ||x_k - x*|| > 100 tol.
inline RateEstimate estimate_rate(const IterationTrace& trace, double tol = 1e-12) {
  if (!trace.converged || trace.steps.empty()) throw NoRateError("estimate_rate: trace did not converge");
  RateEstimate out;
  out.limit_estimate = trace.last();
  const std::size_t n = trace.steps.size();
  out.first = n > 1 ? 1 : 0;
  out.last = out.first;
  for (std::size_t k = out.first; k + 1 < n; ++k) {
    const double den = (trace.steps[k].x - out.limit_estimate).norm();
    if (den <= 100 * tol) break;
    out.ratios.push_back((trace.steps[k + 1].x - out.limit_estimate).norm() / den);
    out.last = k + 1;
  }
  for (std::size_t k = 0; k + 1 < out.ratios.size(); k += 2)
    out.per_cycle_ratios.push_back(out.ratios[k] * out.ratios[k + 1]);
  out.rate = detail::geometric_mean(out.ratios);
  out.cycle_rate = out.per_cycle_ratios.empty() ? out.rate * out.rate : detail::geometric_mean(out.per_cycle_ratios);
  return out;
}

struct DilBound {
  double gamma_star = 0.0;
  double c = 1.0;
  bool feasible = false;  // c < 1
};

/// Largest admissible gamma in {sigma < gamma < theta4, gamma - sigma <= tau}
/// (kept 1e-6 below theta4) and c = (1 - gamma^2 + gamma sigma) / tau. c is
/// decreasing in gamma for gamma > sigma / 2, so this gamma minimizes c.
inline DilBound bound_dil(double theta4, double tau, double sigma) {
  if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("bound_dil: tau must lie in (0, 1]");
  if (!(sigma >= 0.0 && sigma < 1.0)) throw DomainError("bound_dil: sigma must lie in [0, 1)");
  if (!(theta4 >= 0.0 && theta4 <= 1.0)) throw DomainError("bound_dil: theta4 must lie in [0, 1]");
  if (sigma >= theta4) throw HypothesisViolation("bound_dil: sigma >= theta4, the rate theorem does not apply");
  DilBound out;
  out.gamma_star = std::min(theta4 - 1e-6, sigma + tau);
  if (!(out.gamma_star > sigma)) return out;
  out.c = (1.0 - out.gamma_star * out.gamma_star + out.gamma_star * sigma) / tau;
  out.feasible = out.c < 1.0;
  return out;
}

struct UniformBound {
  double c0 = 1.0;
  bool applicable = false;  // c0 < 1
};

/// c0 = c_hat (1 - sigma^2) + sigma^2 + 2 sigma sqrt(1 - sigma^2) + sigma.
inline UniformBound bound_uniform(double c_hat, double sigma) {
  if (!(c_hat >= -1.0 && c_hat <= 1.0)) throw DomainError("bound_uniform: c_hat must lie in [-1, 1]");
  if (!(sigma >= 0.0 && sigma < 1.0)) throw DomainError("bound_uniform: sigma must lie in [0, 1)");
  UniformBound out;
  const double s2 = sigma * sigma;
  out.c0 = sigma == 0.0 ? c_hat : c_hat * (1.0 - s2) + s2 + 2.0 * sigma * std::sqrt(1.0 - s2) + sigma;
  out.applicable = out.c0 < 1.0;
  return out;
}

struct CompareOptions {
  double c_offset = 0.01;       // c = constant + offset inside (constant, 1)
  double gamma_gate = 0.05;     // super-regularity accepted when gamma(delta_min) is below this
  double rate_slack = 5e-3;     // satisfied iff empirical <= bound + slack
  double tol = 1e-12;           // trace tolerance, for the rate window
};

struct BoundReport {
  std::string theorem = "NOT-APPLICABLE";  // LLM-1.2, BLPW-2.11, DIL-3.8, UNIF-3.11 or NOT-APPLICABLE
  bool applicable = false;
  bool converged = false;
  std::map<std::string, double> inputs;
  std::string rate_unit;  // per-projection or per-cycle
  double bound = kInf;
  double empirical = kInf;
  bool satisfied = false;
  double slack = 0.0;  // bound - empirical
  std::string note;
};

namespace detail {

inline double finest_gamma(const std::vector<std::pair<double, Estimate>>& g) {
  return g.empty() ? kInf : g.back().second.value;
}

inline void finish(BoundReport& r, const IterationTrace& trace, const CompareOptions& opt, bool per_cycle) {
  r.applicable = true;
  r.rate_unit = per_cycle ? "per-cycle" : "per-projection";
  r.converged = trace.converged;
  if (!trace.converged) {
    r.note += "trace did not converge; ";
    return;
  }
  const RateEstimate est = estimate_rate(trace, opt.tol);
  r.empirical = per_cycle ? est.cycle_rate : est.rate;
  r.slack = r.bound - r.empirical;
  r.satisfied = r.empirical <= r.bound + opt.rate_slack;
}

inline bool try_llm(BoundReport& r, const RegularityReport& rep, const CompareOptions& opt) {
  const double c_hat = rep.finest().c_hat.value;
  const double gamma = finest_gamma(rep.super_regularity_a);
  if (!(c_hat < 1.0)) {
    r.note += "LLM-1.2: c_hat = " + std::to_string(c_hat) + " is not below 1; ";
    return false;
  }
  if (!(gamma < opt.gamma_gate)) {
    r.note += "LLM-1.2: A not super-regular (gamma = " + std::to_string(gamma) + "); ";
    return false;
  }
  const double c = std::max(c_hat, -1.0) + opt.c_offset;
  if (!(c < 1.0)) {
    r.note += "LLM-1.2: c_hat + offset is not below 1; ";
    return false;
  }
  r.theorem = "LLM-1.2";
  r.inputs = {{"c_hat", c_hat}, {"gamma", gamma}, {"c", c}, {"rho", rep.finest().rho}};
  r.bound = std::sqrt(c);
  return true;
}

inline bool try_blpw(BoundReport& r, const RegularityReport& rep, const CompareOptions& opt) {
  const double c1 = rep.finest().c1_hat.value;
  const double gamma = finest_gamma(rep.b_super_regularity_a);
  if (!(c1 < 1.0)) {
    r.note += "BLPW-2.11: c1_hat = " + std::to_string(c1) + " is not below 1; ";
    return false;
  }
  if (!(gamma < opt.gamma_gate)) {
    r.note += "BLPW-2.11: A not B-super-regular (gamma = " + std::to_string(gamma) + "); ";
    return false;
  }
  const double c = std::max(c1, -1.0) + opt.c_offset;
  if (!(c < 1.0)) {
    r.note += "BLPW-2.11: c1_hat + offset is not below 1; ";
    return false;
  }
  r.theorem = "BLPW-2.11";
  r.inputs = {{"c1_hat", c1}, {"gamma_B", gamma}, {"c", c}, {"rho", rep.finest().rho}};
  r.bound = std::sqrt(c);
  return true;
}

inline bool try_dil(BoundReport& r, const RegularityReport& rep, double tau, double sigma) {
  const double theta4 = rep.finest().theta4_hat.value;
  if (!(theta4 > sigma) || !(theta4 <= 1.0)) {
    r.note += "DIL-3.8: theta4 = " + std::to_string(theta4) + " does not exceed sigma; ";
    return false;
  }
  const DilBound b = bound_dil(theta4, tau, sigma);
  if (!b.feasible) {
    r.note += "DIL-3.8: no admissible gamma gives c < 1; ";
    return false;
  }
  r.theorem = "DIL-3.8";
  r.inputs = {{"theta4", theta4}, {"tau", tau}, {"sigma", sigma}, {"gamma", b.gamma_star}, {"c", b.c},
              {"rho", rep.finest().rho}};
  r.bound = b.c;
  return true;
}

inline bool try_unif(BoundReport& r, const RegularityReport& rep, double sigma, const CompareOptions& opt) {
  const double c_hat = rep.finest().c_hat.value;
  const double gamma = finest_gamma(rep.super_regularity_a);
  if (!(c_hat < 1.0) || !(gamma < opt.gamma_gate)) {
    r.note += "UNIF-3.11: needs c_hat < 1 and A super-regular (c_hat = " + std::to_string(c_hat) +
              ", gamma = " + std::to_string(gamma) + "); ";
    return false;
  }
  const UniformBound u = bound_uniform(std::max(c_hat, -1.0), sigma);
  const double c = u.c0 + opt.c_offset;
  if (!u.applicable || !(c < 1.0)) {
    r.note += "UNIF-3.11: c0 = " + std::to_string(u.c0) + " leaves no c in (c0, 1); ";
    return false;
  }
  r.theorem = "UNIF-3.11";
  r.inputs = {{"c_hat", c_hat}, {"sigma", sigma}, {"gamma", gamma}, {"c0", u.c0}, {"c", c},
              {"rho", rep.finest().rho}};
  r.bound = std::sqrt(c);
  return true;
}

}  // namespace detail

/// Picks the rate theorem the policy falls under and checks the trace's rate
/// against it. Exact runs try LLM-1.2, then BLPW-2.11 (both sqrt(c) per
/// projection), then DIL-3.8 with tau = 1, sigma = 0 (c per cycle);
/// tau-sigma runs use DIL-3.8; sigma-monotone runs use UNIF-3.11.
inline BoundReport compare(const IterationTrace& trace, const RegularityReport& rep, const InexactnessPolicy& policy,
                           const CompareOptions& opt = {}) {
  BoundReport r;
  if (rep.levels.empty()) {
    r.note = "no regularity estimates";
    return r;
  }
  switch (policy.scheme) {
    case Scheme::exact:
      if (detail::try_llm(r, rep, opt) || detail::try_blpw(r, rep, opt)) {
        detail::finish(r, trace, opt, false);
      } else if (detail::try_dil(r, rep, 1.0, 0.0)) {
        detail::finish(r, trace, opt, true);
      }
      break;
    case Scheme::tau_sigma:
      if (detail::try_dil(r, rep, policy.tau, policy.sigma)) detail::finish(r, trace, opt, true);
      break;
    case Scheme::sigma_monotone:
      if (detail::try_unif(r, rep, policy.sigma, opt)) detail::finish(r, trace, opt, false);
      break;
  }
  if (!r.applicable) r.converged = trace.converged;
  while (!r.note.empty() && (r.note.back() == ' ' || r.note.back() == ';')) r.note.pop_back();
  return r;
}

}  // namespace altproj
