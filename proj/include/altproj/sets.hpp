#pragma once

// Closed-set oracles: exact (multi-valued) metric projection, distance,
// proximal normal cones, and the sampling hooks the estimators rely on.

#include "altproj/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace altproj {

/// Absolute tolerance on distance below which two candidates count as tied.
inline constexpr double kTieTol = 1e-9;
/// Membership tolerance for preconditions such as "a lies in A".
inline constexpr double kMemberTol = 1e-9;
/// Tie points closer than this are merged.
inline constexpr double kDedupGap = 1e-8;

struct ProjectionResult {
  std::vector<Point> points;  // lexicographically sorted, pairwise > kDedupGap apart
  double distance = 0.0;
};

class SetOracle;
using SetPtr = std::shared_ptr<const SetOracle>;

class SetOracle {
 public:
  virtual ~SetOracle() = default;

  virtual std::string kind() const = 0;
  virtual Index dim() const = 0;
  virtual double distance(const Point& x) const = 0;
  virtual ProjectionResult project(const Point& x) const = 0;

  /// Proximal normal cone at a point already known to lie in the set.
  virtual Cone normal_cone_at(const Point& a) const = 0;

  /// Points of the set inside the closed ball B(center, radius): `grid`
  /// deterministic points spread over the piece(s), plus `random` draws.
  virtual std::vector<Point> sample_ball(const Point& center, double radius, std::size_t grid, std::size_t random,
                                         Rng& rng) const = 0;

  /// Size of the part of the set inside the ball (length for curves); used to
  /// apportion samples across the children of a union.
  virtual double extent_in_ball(const Point& center, double radius) const = 0;

  /// Parameters t in [0, tmax] where origin + t * dir meets the set. Isolated
  /// crossings are returned exactly; overlaps are represented by their ends and
  /// a spread of interior parameters.
  virtual std::vector<double> ray_hits(const Point& origin, const Point& dir, double tmax) const = 0;

  /// Local candidates for inexact projection of x: the exact projection onto
  /// every convex piece. Defaults to the exact projection set.
  virtual std::vector<Point> candidates(const Point& x) const { return project(x).points; }

  bool contains(const Point& x, double tol = kMemberTol) const { return distance(x) <= tol; }
};

namespace detail {

inline void finalize_projection(const Point& x, std::vector<Point> pts, ProjectionResult& out) {
  double best = kInf;
  std::vector<double> dist(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    dist[i] = (x - pts[i]).norm();
    best = std::min(best, dist[i]);
  }
  // Nearest first, so each near-duplicate cluster is represented by its nearest member.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (dist[i] <= best + kTieTol) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  out.points.clear();
  for (std::size_t i : order) {
    bool dup = false;
    for (const Point& q : out.points) dup = dup || (q - pts[i]).norm() <= kDedupGap;
    if (!dup) out.points.push_back(std::move(pts[i]));
  }
  std::sort(out.points.begin(), out.points.end(), lex_less);
  out.distance = best;
}

/// Representative parameters of the interval [s0, s1]: both ends, a geometric
/// approach to s0 and a uniform spread.
inline void spread_interval(double s0, double s1, std::vector<double>& out) {
  out.push_back(s0);
  if (!(s1 > s0)) return;
  out.push_back(s1);
  for (int j = 1; j <= 12; ++j) out.push_back(s0 + (s1 - s0) * std::ldexp(1.0, -j));
  for (int j = 1; j < 8; ++j) out.push_back(s0 + (s1 - s0) * j / 8.0);
}

inline void sort_unique(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

/// Full-dimensional sets: project a lattice and random points of the ball onto
/// the set; interior points stay, exterior ones land on the boundary.
inline std::vector<Point> sample_solid(const SetOracle& s, const Point& c, double r, std::size_t grid,
                                       std::size_t random, Rng& rng) {
  std::vector<Point> out;
  const Index n = c.size();
  auto keep = [&](const Point& q) {
    const Point y = s.project(q).points.front();
    if ((y - c).norm() <= r * (1.0 + 1e-12)) out.push_back(y);
  };
  if (grid > 0) {
    const auto per_axis = static_cast<std::size_t>(
        std::max(2.0, std::floor(std::pow(static_cast<double>(grid), 1.0 / static_cast<double>(n)))));
    std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
    while (true) {
      Point q(n);
      for (Index i = 0; i < n; ++i)
        q[i] = c[i] - r + 2.0 * r * static_cast<double>(idx[static_cast<std::size_t>(i)]) /
                              static_cast<double>(per_axis - 1);
      if ((q - c).norm() <= r) keep(q);
      Index k = 0;
      while (k < n && ++idx[static_cast<std::size_t>(k)] == per_axis) idx[static_cast<std::size_t>(k++)] = 0;
      if (k == n) break;
    }
  }
  for (std::size_t i = 0; i < random; ++i) {
    const Point dir = rng.unit_vector(n);
    const double rad = r * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
    keep(c + rad * dir);
  }
  return out;
}

}  // namespace detail

/// p + t d for t in [lo, hi] with unit d; covers segments, rays, lines and
/// single points (lo == hi).
class LinearPiece final : public SetOracle {
 public:
  static LinearPiece segment(const Point& a, const Point& b) {
    const double len = (b - a).norm();
    if (len == 0.0) return point(a);
    return LinearPiece("segment", a, (b - a) / len, 0.0, len);
  }
  static LinearPiece ray(const Point& origin, const Point& dir) {
    if (dir.norm() == 0.0) throw DomainError("ray: zero direction");
    return LinearPiece("ray", origin, dir / dir.norm(), 0.0, kInf);
  }
  static LinearPiece line(const Point& base, const Point& dir) {
    if (dir.norm() == 0.0) throw DomainError("line: zero direction");
    return LinearPiece("line", base, dir / dir.norm(), -kInf, kInf);
  }
  static LinearPiece point(const Point& q) {
    Point d = Point::Zero(q.size());
    d[0] = 1.0;
    return LinearPiece("point", q, d, 0.0, 0.0);
  }

  std::string kind() const override { return kind_; }
  Index dim() const override { return base_.size(); }
  bool is_point() const { return lo_ == hi_; }
  const Point& base() const { return base_; }
  const Point& direction() const { return dir_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  double param(const Point& x) const { return std::clamp((x - base_).dot(dir_), lo_, hi_); }
  Point at(double t) const { return base_ + t * dir_; }

  double distance(const Point& x) const override {
    require_same_dim(x, dim(), "distance");
    const double t = param(x);
    return (x - base_ - t * dir_).norm();
  }

  ProjectionResult project(const Point& x) const override {
    require_same_dim(x, dim(), "project");
    ProjectionResult r;
    r.points.push_back(at(param(x)));
    r.distance = (x - r.points.front()).norm();
    return r;
  }

  Cone normal_cone_at(const Point& a) const override {
    const Index n = dim();
    std::vector<Point> full;
    for (Index i = 0; i < n; ++i) full.push_back(Point::Unit(n, i));
    if (is_point()) return Cone(n, {}, full);

    // Orthogonal complement of the direction.
    std::vector<Point> comp;
    for (const Point& e : full) {
      Point q = e - e.dot(dir_) * dir_;
      for (const Point& c : comp) q -= q.dot(c) * c;
      if (q.norm() > 1e-8) comp.push_back(q / q.norm());
    }
    const double t = (a - base_).dot(dir_);
    const double len = hi_ - lo_;
    const double tol = std::isfinite(len) ? 1e-9 * len : 1e-12 * std::max(1.0, std::abs(t));
    std::vector<Point> gens;
    if (std::isfinite(lo_) && t <= lo_ + tol) gens.push_back(-dir_);
    if (std::isfinite(hi_) && t >= hi_ - tol) gens.push_back(dir_);
    if (gens.size() == 2) return Cone(n, {}, full);
    return Cone(n, gens, comp);
  }

  std::vector<Point> sample_ball(const Point& c, double r, std::size_t grid, std::size_t random,
                                 Rng& rng) const override {
    std::vector<Point> out;
    double t0 = 0.0, t1 = 0.0;
    if (!clip(c, r, t0, t1)) return out;
    if (t1 <= t0) {
      if (grid + random > 0) out.push_back(at(t0));
      return out;
    }
    if (grid == 1) out.push_back(at(0.5 * (t0 + t1)));
    for (std::size_t j = 0; grid >= 2 && j < grid; ++j)
      out.push_back(at(t0 + (t1 - t0) * static_cast<double>(j) / static_cast<double>(grid - 1)));
    for (std::size_t j = 0; j < random; ++j) out.push_back(at(rng.uniform(t0, t1)));
    return out;
  }

  double extent_in_ball(const Point& c, double r) const override {
    double t0 = 0.0, t1 = 0.0;
    if (!clip(c, r, t0, t1)) return -1.0;
    return t1 - t0;
  }

  std::vector<double> ray_hits(const Point& o, const Point& u, double tmax) const override {
    std::vector<double> out;
    const double uu = u.squaredNorm();
    if (uu == 0.0) return out;
    const double scale = std::max((base_ - o).norm(), 1e-300);
    if (is_point()) {
      const double s = (base_ - o).dot(u) / uu;
      if (s >= 0.0 && s <= tmax && (o + s * u - base_).norm() <= 1e-10 * scale) out.push_back(s);
      return out;
    }
    const Point u_perp = u - u.dot(dir_) * dir_;
    if (u_perp.norm() <= 1e-12 * std::sqrt(uu)) {
      // Parallel: overlap only if the ray lies on the supporting line.
      const Point off = (o - base_) - (o - base_).dot(dir_) * dir_;
      if (off.norm() > 1e-10 * scale) return out;
      const double rate = u.dot(dir_);  // dt/ds
      const double t_o = (o - base_).dot(dir_);
      double s0 = (lo_ - t_o) / rate, s1 = (hi_ - t_o) / rate;
      if (s0 > s1) std::swap(s0, s1);
      s0 = std::max(s0, 0.0);
      s1 = std::min(s1, tmax);
      if (s0 <= s1) detail::spread_interval(s0, s1, out);
      return out;
    }
    // Solve o + s u = base + t d in the least-squares sense and check the residual.
    Eigen::Matrix2d M;
    M << uu, -u.dot(dir_), -u.dot(dir_), 1.0;
    Eigen::Vector2d rhs((base_ - o).dot(u), -(base_ - o).dot(dir_));
    const Eigen::Vector2d st = M.partialPivLu().solve(rhs);
    const double s = st[0], t = st[1];
    if (s < 0.0 || s > tmax) return out;
    const double len = hi_ - lo_;
    const double ttol = std::isfinite(len) ? 1e-12 * len : 0.0;
    if (t < lo_ - ttol || t > hi_ + ttol) return out;
    if ((o + s * u - at(std::clamp(t, lo_, hi_))).norm() > 1e-9 * std::max(scale, std::abs(s) * std::sqrt(uu)))
      return out;
    out.push_back(s);
    return out;
  }

 private:
  LinearPiece(std::string kind, Point base, Point dir, double lo, double hi)
      : kind_(std::move(kind)), base_(std::move(base)), dir_(std::move(dir)), lo_(lo), hi_(hi) {}

  bool clip(const Point& c, double r, double& t0, double& t1) const {
    const double tc = (c - base_).dot(dir_);
    const double d2 = (c - at(tc)).squaredNorm();
    if (is_point()) {
      t0 = t1 = 0.0;
      return (base_ - c).norm() <= r;
    }
    if (d2 > r * r) return false;
    const double h = std::sqrt(r * r - d2);
    t0 = std::max(lo_, tc - h);
    t1 = std::min(hi_, tc + h);
    return t0 <= t1;
  }

  std::string kind_;
  Point base_;
  Point dir_;
  double lo_;
  double hi_;
};

/// base + span(directions).
class AffineSubspace final : public SetOracle {
 public:
  AffineSubspace(Point base, const std::vector<Point>& directions) : base_(std::move(base)) {
    const Index n = base_.size();
    for (const Point& d : directions) {
      require_same_dim(d, n, "affine-subspace direction");
      Point q = d;
      for (const Point& b : basis_) q -= q.dot(b) * b;
      if (q.norm() > 1e-10) basis_.push_back(q / q.norm());
    }
    for (Index i = 0; i < n; ++i) {
      Point q = Point::Unit(n, i);
      for (const Point& b : basis_) q -= q.dot(b) * b;
      for (const Point& b : complement_) q -= q.dot(b) * b;
      if (q.norm() > 1e-8) complement_.push_back(q / q.norm());
    }
  }

  std::string kind() const override { return "affine-subspace"; }
  Index dim() const override { return base_.size(); }
  const std::vector<Point>& basis() const { return basis_; }

  Point foot(const Point& x) const {
    Point y = base_;
    for (const Point& b : basis_) y += (x - base_).dot(b) * b;
    return y;
  }

  double distance(const Point& x) const override {
    require_same_dim(x, dim(), "distance");
    return (x - foot(x)).norm();
  }

  ProjectionResult project(const Point& x) const override {
    require_same_dim(x, dim(), "project");
    ProjectionResult r;
    r.points.push_back(foot(x));
    r.distance = (x - r.points.front()).norm();
    return r;
  }

  Cone normal_cone_at(const Point&) const override { return Cone(dim(), {}, complement_); }

  std::vector<Point> sample_ball(const Point& c, double r, std::size_t grid, std::size_t random,
                                 Rng& rng) const override {
    std::vector<Point> out;
    const Point f = foot(c);
    const double d2 = (c - f).squaredNorm();
    if (d2 > r * r) return out;
    const double rr = std::sqrt(r * r - d2);
    const std::size_t k = basis_.size();
    if (k == 0) {
      out.push_back(f);
      return out;
    }
    if (k == 1) {
      for (std::size_t j = 0; grid >= 2 && j < grid; ++j)
        out.push_back(f + (-rr + 2.0 * rr * static_cast<double>(j) / static_cast<double>(grid - 1)) * basis_[0]);
      if (grid == 1) out.push_back(f);
      for (std::size_t j = 0; j < random; ++j) out.push_back(f + rng.uniform(-rr, rr) * basis_[0]);
      return out;
    }
    if (grid > 0) {
      const auto m = static_cast<std::size_t>(
          std::max(2.0, std::floor(std::pow(static_cast<double>(grid), 1.0 / static_cast<double>(k)))));
      std::vector<std::size_t> idx(k, 0);
      while (true) {
        Point y = f;
        Eigen::VectorXd coeff(static_cast<Index>(k));
        for (std::size_t i = 0; i < k; ++i)
          coeff[static_cast<Index>(i)] = -rr + 2.0 * rr * static_cast<double>(idx[i]) / static_cast<double>(m - 1);
        if (coeff.norm() <= rr) {
          for (std::size_t i = 0; i < k; ++i) y += coeff[static_cast<Index>(i)] * basis_[i];
          out.push_back(y);
        }
        std::size_t i = 0;
        while (i < k && ++idx[i] == m) idx[i++] = 0;
        if (i == k) break;
      }
    }
    for (std::size_t j = 0; j < random; ++j) {
      const Point dir = rng.unit_vector(static_cast<Index>(k));
      const double rad = rr * std::pow(rng.uniform(), 1.0 / static_cast<double>(k));
      Point y = f;
      for (std::size_t i = 0; i < k; ++i) y += rad * dir[static_cast<Index>(i)] * basis_[i];
      out.push_back(y);
    }
    return out;
  }

  double extent_in_ball(const Point& c, double r) const override {
    const double d2 = (c - foot(c)).squaredNorm();
    if (d2 > r * r) return -1.0;
    return 2.0 * std::sqrt(r * r - d2);
  }

  std::vector<double> ray_hits(const Point& o, const Point& u, double tmax) const override {
    std::vector<double> out;
    const Point e = o - foot(o);
    const Point f = u - (foot(u + base_) - base_);
    const double scale = std::max(e.norm(), 1e-300);
    if (f.norm() <= 1e-12 * u.norm()) {
      if (e.norm() <= 1e-10 * std::max(1.0, o.norm())) detail::spread_interval(0.0, tmax, out);
      return out;
    }
    const double s = -e.dot(f) / f.squaredNorm();
    if (s >= 0.0 && s <= tmax && (e + s * f).norm() <= 1e-9 * scale) out.push_back(s);
    return out;
  }

 private:
  Point base_;
  std::vector<Point> basis_;
  std::vector<Point> complement_;
};

/// { x : <normal, x> <= offset }.
class Halfspace final : public SetOracle {
 public:
  Halfspace(const Point& normal, double offset) {
    const double n = normal.norm();
    if (n == 0.0) throw DomainError("halfspace: zero normal");
    normal_ = normal / n;
    offset_ = offset / n;
  }

  std::string kind() const override { return "halfspace"; }
  Index dim() const override { return normal_.size(); }

  double distance(const Point& x) const override {
    require_same_dim(x, dim(), "distance");
    return std::max(0.0, normal_.dot(x) - offset_);
  }

  ProjectionResult project(const Point& x) const override {
    require_same_dim(x, dim(), "project");
    ProjectionResult r;
    const double excess = std::max(0.0, normal_.dot(x) - offset_);
    r.points.push_back(x - excess * normal_);
    r.distance = excess;
    return r;
  }

  Cone normal_cone_at(const Point& a) const override {
    if (normal_.dot(a) < offset_ - kMemberTol) return Cone::trivial(dim());
    return Cone::ray(normal_);
  }

  std::vector<Point> sample_ball(const Point& c, double r, std::size_t grid, std::size_t random,
                                 Rng& rng) const override {
    return detail::sample_solid(*this, c, r, grid, random, rng);
  }

  double extent_in_ball(const Point& c, double r) const override { return distance(c) <= r ? r : -1.0; }

  std::vector<double> ray_hits(const Point& o, const Point& u, double tmax) const override {
    std::vector<double> out;
    const double a = normal_.dot(o) - offset_;
    const double b = normal_.dot(u);
    double s0 = 0.0, s1 = tmax;
    if (b == 0.0) {
      if (a > 0.0) return out;
    } else if (b > 0.0) {
      s1 = std::min(s1, -a / b);
    } else {
      s0 = std::max(s0, -a / b);
    }
    if (s0 <= s1) detail::spread_interval(s0, s1, out);
    return out;
  }

 private:
  Point normal_;
  double offset_ = 0.0;
};

class Ball final : public SetOracle {
 public:
  Ball(Point center, double radius) : center_(std::move(center)), radius_(radius) {
    if (!(radius_ > 0.0)) throw DomainError("ball: radius must be positive");
  }

  std::string kind() const override { return "ball"; }
  Index dim() const override { return center_.size(); }

  double distance(const Point& x) const override {
    require_same_dim(x, dim(), "distance");
    return std::max(0.0, (x - center_).norm() - radius_);
  }

  ProjectionResult project(const Point& x) const override {
    require_same_dim(x, dim(), "project");
    ProjectionResult r;
    const double d = (x - center_).norm();
    if (d <= radius_) {
      r.points.push_back(x);
      r.distance = 0.0;
    } else {
      r.points.push_back(center_ + (radius_ / d) * (x - center_));
      r.distance = d - radius_;
    }
    return r;
  }

  Cone normal_cone_at(const Point& a) const override {
    if ((a - center_).norm() < radius_ - kMemberTol) return Cone::trivial(dim());
    return Cone::ray(a - center_);
  }

  std::vector<Point> sample_ball(const Point& c, double r, std::size_t grid, std::size_t random,
                                 Rng& rng) const override {
    return detail::sample_solid(*this, c, r, grid, random, rng);
  }

  double extent_in_ball(const Point& c, double r) const override { return distance(c) <= r ? r : -1.0; }

  std::vector<double> ray_hits(const Point& o, const Point& u, double tmax) const override {
    std::vector<double> out;
    const double uu = u.squaredNorm();
    if (uu == 0.0) return out;
    const Point w = o - center_;
    const double b = w.dot(u) / uu;
    const double disc = b * b - (w.squaredNorm() - radius_ * radius_) / uu;
    if (disc < 0.0) return out;
    const double h = std::sqrt(disc);
    const double s0 = std::max(0.0, -b - h);
    const double s1 = std::min(tmax, -b + h);
    if (s0 <= s1) detail::spread_interval(s0, s1, out);
    return out;
  }

 private:
  Point center_;
  double radius_;
};

/// Convex polygon in the plane given by its vertices (either orientation).
class ConvexPolygon final : public SetOracle {
 public:
  explicit ConvexPolygon(std::vector<Point> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() < 3) throw DomainError("convex-polygon: need at least 3 vertices");
    for (const Point& v : vertices_) require_same_dim(v, 2, "convex-polygon vertex");
    double area = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      const Point& p = vertices_[i];
      const Point& q = vertices_[(i + 1) % vertices_.size()];
      area += p[0] * q[1] - q[0] * p[1];
    }
    if (area == 0.0) throw DomainError("convex-polygon: degenerate");
    if (area < 0.0) std::reverse(vertices_.begin(), vertices_.end());
    const std::size_t m = vertices_.size();
    for (std::size_t i = 0; i < m; ++i) {
      const Point& p = vertices_[i];
      const Point& q = vertices_[(i + 1) % m];
      Point n = make_point({q[1] - p[1], p[0] - q[0]});
      normals_.push_back(n / n.norm());
      edges_.push_back(LinearPiece::segment(p, q));
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (normals_[i].dot(vertices_[j] - vertices_[i]) > 1e-12 * scale())
          throw DomainError("convex-polygon: vertices are not in convex position");
  }

  std::string kind() const override { return "convex-polygon"; }
  Index dim() const override { return 2; }

  double distance(const Point& x) const override { return project(x).distance; }

  ProjectionResult project(const Point& x) const override {
    require_same_dim(x, 2, "project");
    ProjectionResult r;
    if (inside(x, 0.0)) {
      r.points.push_back(x);
      r.distance = 0.0;
      return r;
    }
    double best = kInf;
    Point arg;
    for (const LinearPiece& e : edges_) {
      const Point y = e.at(e.param(x));
      const double d = (x - y).norm();
      if (d < best) {
        best = d;
        arg = y;
      }
    }
    r.points.push_back(arg);
    r.distance = best;
    return r;
  }

  Cone normal_cone_at(const Point& a) const override {
    std::vector<Point> gens;
    for (std::size_t i = 0; i < edges_.size(); ++i)
      if (std::abs(normals_[i].dot(a - vertices_[i])) <= kMemberTol && edges_[i].distance(a) <= kMemberTol)
        gens.push_back(normals_[i]);
    if (gens.empty()) return Cone::trivial(2);
    return Cone(2, gens, {});
  }

  std::vector<Point> sample_ball(const Point& c, double r, std::size_t grid, std::size_t random,
                                 Rng& rng) const override {
    return detail::sample_solid(*this, c, r, grid, random, rng);
  }

  double extent_in_ball(const Point& c, double r) const override { return distance(c) <= r ? r : -1.0; }

  std::vector<double> ray_hits(const Point& o, const Point& u, double tmax) const override {
    std::vector<double> out;
    double s0 = 0.0, s1 = tmax;
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const double a = normals_[i].dot(o - vertices_[i]);
      const double b = normals_[i].dot(u);
      if (b == 0.0) {
        if (a > 0.0) return out;
      } else if (b > 0.0) {
        s1 = std::min(s1, -a / b);
      } else {
        s0 = std::max(s0, -a / b);
      }
    }
    if (s0 <= s1) detail::spread_interval(s0, s1, out);
    return out;
  }

 private:
  double scale() const {
    double s = 1.0;
    for (const Point& v : vertices_) s = std::max(s, v.norm());
    return s;
  }

  bool inside(const Point& x, double tol) const {
    for (std::size_t i = 0; i < normals_.size(); ++i)
      if (normals_[i].dot(x - vertices_[i]) > tol) return false;
    return true;
  }

  std::vector<Point> vertices_;
  std::vector<Point> normals_;
  std::vector<LinearPiece> edges_;
};

/// Finite union of closed sets. Projection collects the minimizers of every
/// child; the proximal normal cone at a is the intersection of the cones of the
/// children through a, re-checked by projecting a + eps g back at two scales.
class UnionSet final : public SetOracle {
 public:
  UnionSet(std::string kind, std::vector<SetPtr> children) : kind_(std::move(kind)), children_(std::move(children)) {
    if (children_.empty()) throw DomainError(kind_ + ": union needs at least one piece");
    for (const SetPtr& c : children_)
      if (c->dim() != children_.front()->dim()) throw DomainError(kind_ + ": pieces differ in dimension");
  }

  std::string kind() const override { return kind_; }
  Index dim() const override { return children_.front()->dim(); }
  const std::vector<SetPtr>& children() const { return children_; }

  double distance(const Point& x) const override {
    require_same_dim(x, dim(), "distance");
    double best = kInf;
    for (const SetPtr& c : children_) best = std::min(best, c->distance(x));
    return best;
  }

  ProjectionResult project(const Point& x) const override {
    require_same_dim(x, dim(), "project");
    std::vector<double> dist(children_.size());
    double best = kInf;
    for (std::size_t i = 0; i < children_.size(); ++i) {
      dist[i] = children_[i]->distance(x);
      best = std::min(best, dist[i]);
    }
    std::vector<Point> pts;
    for (std::size_t i = 0; i < children_.size(); ++i) {
      if (dist[i] > best + kTieTol) continue;
      for (Point& p : children_[i]->project(x).points) pts.push_back(std::move(p));
    }
    ProjectionResult r;
    detail::finalize_projection(x, std::move(pts), r);
    return r;
  }

  Cone normal_cone_at(const Point& a) const override {
    const Index n = dim();
    std::vector<double> dist(children_.size());
    double best = kInf;
    for (std::size_t i = 0; i < children_.size(); ++i) {
      dist[i] = children_[i]->distance(a);
      best = std::min(best, dist[i]);
    }
    const double active_tol = best + 1e-12 * std::max(1.0, a.norm());
    std::vector<Cone> active;
    double gap = kInf;  // distance to the nearest piece not through a
    for (std::size_t i = 0; i < children_.size(); ++i) {
      if (dist[i] <= active_tol)
        active.push_back(children_[i]->normal_cone_at(a));
      else
        gap = std::min(gap, dist[i]);
    }
    // Proximal normals are local: pieces at positive distance do not matter.
    if (active.size() == 1) return active.front();

    std::vector<Point> cand;
    for (const Cone& c : active) {
      for (const Point& g : c.generators()) cand.push_back(g);
      for (const Point& l : c.lineality()) {
        cand.push_back(l);
        cand.push_back(-l);
      }
    }
    std::vector<Point> kept;
    const double scale = std::min(1.0, 0.5 * gap);
    for (const Point& g : cand) {
      bool in_all = true;
      for (const Cone& c : active) in_all = in_all && c.distance(g) <= 1e-9;
      if (!in_all) continue;
      bool verified = true;
      for (double eps : {1e-4, 1e-6}) {
        const Point x = a + (eps * scale) * g;
        const ProjectionResult pr = project(x);
        bool found = false;
        for (const Point& p : pr.points) found = found || (p - a).norm() <= 1e-3 * eps * scale;
        verified = verified && found;
      }
      if (verified) kept.push_back(g);
    }
    return cone_from_directions(n, kept);
  }

  std::vector<Point> sample_ball(const Point& c, double r, std::size_t grid, std::size_t random,
                                 Rng& rng) const override {
    std::vector<Point> out;
    std::vector<double> ext(children_.size());
    double total = 0.0;
    for (std::size_t i = 0; i < children_.size(); ++i) {
      ext[i] = children_[i]->extent_in_ball(c, r);
      // Pieces far below the ball's scale only add sub-resolution ties.
      if (ext[i] > 0.0 && ext[i] < r * std::ldexp(1.0, -12)) ext[i] = -1.0;
      if (ext[i] > 0.0) total += ext[i];
    }
    for (std::size_t i = 0; i < children_.size(); ++i) {
      if (ext[i] < 0.0) continue;
      std::size_t share = 1;  // isolated points inside the ball
      if (ext[i] > 0.0)
        share = std::max<std::size_t>(
            2, static_cast<std::size_t>(std::llround(static_cast<double>(grid) * ext[i] / total)));
      for (Point& p : children_[i]->sample_ball(c, r, share, 0, rng)) out.push_back(std::move(p));
    }
    if (total <= 0.0) return out;
    for (std::size_t j = 0; j < random; ++j) {
      double pick = rng.uniform() * total;
      std::size_t chosen = children_.size();
      for (std::size_t i = 0; i < children_.size(); ++i) {
        if (ext[i] <= 0.0) continue;
        chosen = i;
        if (pick < ext[i]) break;
        pick -= ext[i];
      }
      for (Point& p : children_[chosen]->sample_ball(c, r, 0, 1, rng)) out.push_back(std::move(p));
    }
    return out;
  }

  double extent_in_ball(const Point& c, double r) const override {
    double total = -1.0;
    for (const SetPtr& ch : children_) {
      const double e = ch->extent_in_ball(c, r);
      if (e >= 0.0) total = std::max(total, 0.0) + e;
    }
    return total;
  }

  std::vector<double> ray_hits(const Point& o, const Point& u, double tmax) const override {
    std::vector<double> out;
    for (const SetPtr& c : children_)
      for (double s : c->ray_hits(o, u, tmax)) out.push_back(s);
    detail::sort_unique(out);
    return out;
  }

  std::vector<Point> candidates(const Point& x) const override {
    std::vector<Point> out;
    for (const SetPtr& c : children_)
      for (Point& p : c->candidates(x)) out.push_back(std::move(p));
    return out;
  }

 private:
  std::string kind_;
  std::vector<SetPtr> children_;
};

/// Graph of the zigzag, held as a union of its teeth. Below the smallest kept
/// tooth the normal cone is that of the full graph at the origin:
/// zeros (s, 0) force x_1 <= 0 and valleys (3s/4, -s/4) force x_2 >= 3 x_1.
class SawtoothGraph final : public SetOracle {
 public:
  SawtoothGraph(std::shared_ptr<const UnionSet> body, int depth) : body_(std::move(body)), depth_(depth) {}

  std::string kind() const override { return body_->kind(); }
  Index dim() const override { return 2; }
  int depth() const { return depth_; }
  double distance(const Point& x) const override { return body_->distance(x); }
  ProjectionResult project(const Point& x) const override { return body_->project(x); }

  Cone normal_cone_at(const Point& a) const override {
    if (a.norm() < std::ldexp(1.0, -depth_)) return Cone(2, {make_point({0.0, 1.0}), make_point({-1.0, -3.0})}, {});
    return body_->normal_cone_at(a);
  }

  std::vector<Point> sample_ball(const Point& c, double r, std::size_t grid, std::size_t random,
                                 Rng& rng) const override {
    return body_->sample_ball(c, r, grid, random, rng);
  }
  double extent_in_ball(const Point& c, double r) const override { return body_->extent_in_ball(c, r); }
  std::vector<double> ray_hits(const Point& o, const Point& u, double tmax) const override {
    return body_->ray_hits(o, u, tmax);
  }
  std::vector<Point> candidates(const Point& x) const override { return body_->candidates(x); }

 private:
  std::shared_ptr<const UnionSet> body_;
  int depth_;
};

/// Image of a set under y = shift + scale * Q x with Q orthogonal.
class TransformedSet final : public SetOracle {
 public:
  TransformedSet(SetPtr child, double scale, Eigen::MatrixXd rotation, Point shift)
      : child_(std::move(child)), scale_(scale), rot_(std::move(rotation)), shift_(std::move(shift)) {
    if (!(scale_ > 0.0)) throw DomainError("transformed: scale must be positive");
    if (rot_.rows() != child_->dim() || rot_.cols() != child_->dim() || shift_.size() != child_->dim())
      throw DomainError("transformed: dimension mismatch");
  }

  std::string kind() const override { return child_->kind(); }
  Index dim() const override { return child_->dim(); }

  Point forward(const Point& x) const { return shift_ + scale_ * (rot_ * x); }
  Point inverse(const Point& y) const { return rot_.transpose() * (y - shift_) / scale_; }

  double distance(const Point& y) const override { return scale_ * child_->distance(inverse(y)); }

  ProjectionResult project(const Point& y) const override {
    require_same_dim(y, dim(), "project");
    ProjectionResult inner = child_->project(inverse(y));
    ProjectionResult r;
    for (const Point& p : inner.points) r.points.push_back(forward(p));
    std::sort(r.points.begin(), r.points.end(), lex_less);
    r.distance = scale_ * inner.distance;
    return r;
  }

  Cone normal_cone_at(const Point& a) const override {
    const Cone c = child_->normal_cone_at(inverse(a));
    if (c.is_empty()) return Cone::empty(dim());
    std::vector<Point> gens, lin;
    for (const Point& g : c.generators()) gens.push_back(rot_ * g);
    for (const Point& l : c.lineality()) lin.push_back(rot_ * l);
    return Cone(dim(), gens, lin);
  }

  std::vector<Point> sample_ball(const Point& c, double r, std::size_t grid, std::size_t random,
                                 Rng& rng) const override {
    std::vector<Point> out = child_->sample_ball(inverse(c), r / scale_, grid, random, rng);
    for (Point& p : out) p = forward(p);
    return out;
  }

  double extent_in_ball(const Point& c, double r) const override {
    const double e = child_->extent_in_ball(inverse(c), r / scale_);
    return e < 0.0 ? e : scale_ * e;
  }

  std::vector<double> ray_hits(const Point& o, const Point& u, double tmax) const override {
    return child_->ray_hits(inverse(o), rot_.transpose() * u / scale_, tmax);
  }

  std::vector<Point> candidates(const Point& y) const override {
    std::vector<Point> out = child_->candidates(inverse(y));
    for (Point& p : out) p = forward(p);
    return out;
  }

 private:
  SetPtr child_;
  double scale_;
  Eigen::MatrixXd rot_;
  Point shift_;
};

// ---------------------------------------------------------------------------
// Factories for the named set kinds.

inline SetPtr make_affine_subspace(const Point& base, const std::vector<Point>& directions) {
  return std::make_shared<AffineSubspace>(base, directions);
}
inline SetPtr make_halfspace(const Point& normal, double offset) { return std::make_shared<Halfspace>(normal, offset); }
inline SetPtr make_ball(const Point& center, double radius) { return std::make_shared<Ball>(center, radius); }
inline SetPtr make_convex_polygon(const std::vector<Point>& vertices) {
  return std::make_shared<ConvexPolygon>(vertices);
}

inline SetPtr make_segment_union(const std::vector<std::pair<Point, Point>>& segments) {
  std::vector<SetPtr> pieces;
  for (const auto& [p, q] : segments) pieces.push_back(std::make_shared<LinearPiece>(LinearPiece::segment(p, q)));
  return std::make_shared<UnionSet>("segment-union", std::move(pieces));
}

inline SetPtr make_ray_union(const std::vector<std::pair<Point, Point>>& rays) {
  std::vector<SetPtr> pieces;
  for (const auto& [o, d] : rays) pieces.push_back(std::make_shared<LinearPiece>(LinearPiece::ray(o, d)));
  return std::make_shared<UnionSet>("ray-union", std::move(pieces));
}

/// {(t, ..., t) : t in [lo, hi]} in R^dim.
inline SetPtr make_diagonal_line(Index dim, double lo, double hi) {
  if (!(hi >= lo)) throw DomainError("diagonal-line: need lo <= hi");
  const Point a = Point::Constant(dim, lo);
  const Point b = Point::Constant(dim, hi);
  auto piece = std::make_shared<LinearPiece>(LinearPiece::segment(a, b));
  return std::make_shared<UnionSet>("diagonal-line", std::vector<SetPtr>{piece});
}

/// Graph of the zigzag f on [0, 1]: f vanishes at every 1/2^n and dips to
/// -1/2^(n+2) at 3/2^(n+2), with slopes -1 then +1 between consecutive zeros.
/// Teeth below scale 2^-depth are dropped and the origin is adjoined.
inline SetPtr make_sawtooth(int depth) {
  if (depth < 1 || depth > 60) throw DomainError("sawtooth-graph: depth must be in [1, 60]");
  std::vector<SetPtr> pieces;
  for (int n = 0; n < depth; ++n) {
    const double zero_lo = std::ldexp(1.0, -(n + 1));
    const double zero_hi = std::ldexp(1.0, -n);
    const double valley = 3.0 * std::ldexp(1.0, -(n + 2));
    const Point p = make_point({zero_lo, 0.0});
    const Point v = make_point({valley, -std::ldexp(1.0, -(n + 2))});
    const Point q = make_point({zero_hi, 0.0});
    pieces.push_back(std::make_shared<LinearPiece>(LinearPiece::segment(p, v)));
    pieces.push_back(std::make_shared<LinearPiece>(LinearPiece::segment(v, q)));
  }
  pieces.push_back(std::make_shared<LinearPiece>(LinearPiece::point(make_point({0.0, 0.0}))));
  return std::make_shared<SawtoothGraph>(std::make_shared<UnionSet>("sawtooth-graph", std::move(pieces)), depth);
}

inline SetPtr make_finite_union(std::vector<SetPtr> children) {
  return std::make_shared<UnionSet>("finite-union", std::move(children));
}

inline SetPtr make_transformed(SetPtr child, double scale, const Eigen::MatrixXd& rotation, const Point& shift) {
  return std::make_shared<TransformedSet>(std::move(child), scale, rotation, shift);
}

// ---------------------------------------------------------------------------
// Operations.

inline double distance(const SetOracle& s, const Point& x) {
  require_same_dim(x, s.dim(), "distance");
  return s.distance(x);
}

inline ProjectionResult project(const SetOracle& s, const Point& x) {
  require_same_dim(x, s.dim(), "project");
  return s.project(x);
}

inline Cone proximal_normal_cone(const SetOracle& s, const Point& a) {
  require_same_dim(a, s.dim(), "proximal_normal_cone");
  if (!s.contains(a)) throw DomainError("proximal_normal_cone: point is not in the set");
  return s.normal_cone_at(a);
}

struct RestrictedSampling {
  double radius = 1.0;           // ball around a searched on the other set
  std::size_t grid = 64;         // grid points of the other set in that ball
  std::size_t rays = 16;         // interior directions of the proximal cone traced as rays
  double ray_length = 1e3;       // how far the rays are followed
  std::uint64_t seed = 0;
};

/// Exact preimage directions lie in the proximal cone; projecting onto it
/// removes the slack the tie tolerance lets in.
inline Cone snap_to_proximal(const SetOracle& s, const Point& a, std::vector<Point> dirs) {
  const Cone prox = s.normal_cone_at(a);
  for (Point& d : dirs) d = prox.project(d);
  return cone_from_directions(s.dim(), dirs);
}

/// Does a lie in P_S(x) (up to the tie tolerance)?
inline bool projects_onto(const SetOracle& s, const Point& x, const Point& a) {
  return (x - a).norm() <= s.distance(x) + kTieTol;
}

/// cone((P_S^{-1}(a) ∩ other) - a), built from points of `other` that project
/// onto a: grid points near a and crossings of `other` with rays a + t u for u
/// in the proximal normal cone. EMPTY when no point of `other` qualifies.
inline Cone restricted_proximal_normal_cone(const SetOracle& s, const SetOracle& other, const Point& a,
                                            const RestrictedSampling& cfg = {}) {
  require_same_dim(a, s.dim(), "restricted_proximal_normal_cone");
  if (other.dim() != s.dim()) throw DomainError("restricted_proximal_normal_cone: dimension mismatch");
  if (!s.contains(a)) throw DomainError("restricted_proximal_normal_cone: point is not in the set");

  Rng rng(cfg.seed);
  std::vector<Point> cand = other.sample_ball(a, cfg.radius, cfg.grid, 0, rng);
  for (const Point& u : unit_sphere_samples(s.normal_cone_at(a), cfg.rays, cfg.seed)) {
    for (double t : other.ray_hits(a, u, cfg.ray_length)) cand.push_back(a + t * u);
  }
  if (other.contains(a, 0.0)) cand.push_back(a);

  bool any = false;
  std::vector<Point> good, bad;
  for (const Point& x : cand) {
    if ((x - a).norm() == 0.0) {
      any = any || other.contains(a);
      continue;
    }
    if (projects_onto(s, x, a))
      good.push_back(x);
    else
      bad.push_back(x);
  }
  any = any || !good.empty();
  if (!any) return Cone::empty(s.dim());

  std::vector<Point> dirs;
  for (const Point& x : good) dirs.push_back(x - a);
  const Cone coarse = cone_from_directions(s.dim(), dirs);
  if (bad.empty() || coarse.generators().empty()) return snap_to_proximal(s, a, dirs);

  // Push each extreme sample towards the edge of the preimage: bisect against
  // the nearest sample of `other` that does not project onto a.
  for (const Point& g : coarse.generators()) {
    std::size_t best = 0;
    double align = -kInf;
    for (std::size_t i = 0; i < good.size(); ++i) {
      const double c = g.dot(good[i] - a) / (good[i] - a).norm();
      if (c > align) {
        align = c;
        best = i;
      }
    }
    Point in = good[best];
    Point out = bad.front();
    for (const Point& x : bad)
      if ((x - in).norm() < (out - in).norm()) out = x;
    for (int it = 0; it < 60 && (out - in).norm() > 1e-12 * (in - a).norm(); ++it) {
      const Point mid = other.project(0.5 * (in + out)).points.front();
      const double len = (mid - a).norm();
      if (len > 0.0 && len <= s.distance(mid) + 1e-9 * len)
        in = mid;
      else
        out = mid;
    }
    dirs.push_back(in - a);
  }
  return snap_to_proximal(s, a, dirs);
}

}  // namespace altproj
