#pragma once

// Euclidean primitives shared by every module: points, finitely generated
// cones, exact distance-to-cone via active-set NNLS, and sphere sampling.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace altproj {

using Point = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Precondition violated (wrong dimension, point outside a set, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline Point make_point(std::initializer_list<double> coords) {
  Point p(static_cast<Index>(coords.size()));
  Index i = 0;
  for (double c : coords) p[i++] = c;
  return p;
}

inline bool is_finite(const Point& p) { return p.allFinite(); }

inline bool lex_less(const Point& a, const Point& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

inline void require_same_dim(const Point& a, Index dim, const char* what) {
  if (a.size() != dim) {
    throw DomainError(std::string(what) + ": dimension mismatch (got " + std::to_string(a.size()) +
                      ", expected " + std::to_string(dim) + ")");
  }
}

/// Seeded generator whose draws do not depend on the standard library's
/// distribution implementations, so samples are bit-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t index(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(engine_() % n); }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Point unit_vector(Index dim) {
    Point v(dim);
    do {
      for (Index i = 0; i < dim; ++i) v[i] = normal();
    } while (v.norm() < 1e-12);
    return v / v.norm();
  }

 private:
  std::mt19937_64 engine_;
};

/// Nonnegative least squares min_{x >= 0} ||v - G x|| by the Lawson-Hanson
/// active-set method. Terminates when the dual residual G^T (v - G x) has no
/// entry above `tol` (scaled by max(1, ||v||)) on the inactive set.
inline Eigen::VectorXd nnls(const Eigen::MatrixXd& G, const Eigen::VectorXd& v, double tol = 1e-12) {
  const Index m = G.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  if (m == 0) return x;

  const double scale = std::max(1.0, v.norm());
  const int max_iter = static_cast<int>(3 * m + 30);
  std::vector<char> passive(static_cast<std::size_t>(m), 0);
  Eigen::VectorXd r = v;

  for (int outer = 0; outer < max_iter; ++outer) {
    const Eigen::VectorXd w = G.transpose() * r;
    Index enter = -1;
    double best = tol * scale;
    for (Index j = 0; j < m; ++j) {
      if (!passive[j] && w[j] > best) {
        best = w[j];
        enter = j;
      }
    }
    if (enter < 0) break;
    passive[enter] = 1;

    for (int inner = 0; inner < max_iter; ++inner) {
      std::vector<Index> idx;
      for (Index j = 0; j < m; ++j)
        if (passive[j]) idx.push_back(j);
      if (idx.empty()) break;

      Eigen::MatrixXd Gp(G.rows(), static_cast<Index>(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) Gp.col(static_cast<Index>(k)) = G.col(idx[k]);
      const Eigen::VectorXd z = Gp.completeOrthogonalDecomposition().solve(v);

      bool feasible = true;
      for (Index k = 0; k < z.size(); ++k) feasible = feasible && z[k] > 0.0;
      if (feasible) {
        x.setZero();
        for (std::size_t k = 0; k < idx.size(); ++k) x[idx[k]] = z[static_cast<Index>(k)];
        break;
      }

      double alpha = 1.0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double zk = z[static_cast<Index>(k)];
        const double xk = x[idx[k]];
        if (zk <= 0.0) alpha = std::min(alpha, xk / (xk - zk));
      }
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const Index j = idx[k];
        x[j] += alpha * (z[static_cast<Index>(k)] - x[j]);
        if (x[j] <= 1e-15) {
          x[j] = 0.0;
          passive[j] = 0;
        }
      }
    }
    r = v - G * x;
  }
  return x;
}

/// A finitely generated convex cone { sum l_i g_i + w : l_i >= 0, w in span(L) },
/// or the EMPTY marker (no points at all). Generators are stored at unit length,
/// lineality as an orthonormal basis.
class Cone {
 public:
  static Cone empty(Index dim) {
    Cone c(dim, {}, {});
    c.empty_ = true;
    return c;
  }

  static Cone trivial(Index dim) { return Cone(dim, {}, {}); }

  static Cone ray(const Point& g) { return Cone(g.size(), {g}, {}); }

  static Cone subspace(const std::vector<Point>& basis, Index dim) { return Cone(dim, {}, basis); }

  Cone(Index dim, const std::vector<Point>& generators, const std::vector<Point>& lineality) : dim_(dim) {
    for (const Point& l : lineality) require_same_dim(l, dim, "Cone lineality");
    for (const Point& g : generators) require_same_dim(g, dim, "Cone generator");

    if (!lineality.empty()) {
      Eigen::MatrixXd L(dim, static_cast<Index>(lineality.size()));
      for (std::size_t k = 0; k < lineality.size(); ++k) L.col(static_cast<Index>(k)) = lineality[k];
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(L);
      qr.setThreshold(1e-12);
      const Index rank = qr.rank();
      if (rank > 0) {
        Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, rank);
        basis_ = Q;
        for (Index k = 0; k < rank; ++k) lineality_.push_back(Q.col(k));
      }
    }
    for (const Point& g : generators) {
      Point gp = g;
      if (basis_.cols() > 0) gp -= basis_ * (basis_.transpose() * g);
      const double n = gp.norm();
      if (n <= 1e-12 * std::max(1.0, g.norm())) continue;  // absorbed by lineality or zero
      generators_.push_back(g / g.norm());
      reduced_.push_back(gp);
    }
    if (!reduced_.empty()) {
      reduced_matrix_.resize(dim, static_cast<Index>(reduced_.size()));
      for (std::size_t k = 0; k < reduced_.size(); ++k) reduced_matrix_.col(static_cast<Index>(k)) = reduced_[k];
    }
  }

  Index dim() const { return dim_; }
  bool is_empty() const { return empty_; }
  bool is_trivial() const { return !empty_ && generators_.empty() && lineality_.empty(); }
  const std::vector<Point>& generators() const { return generators_; }
  const std::vector<Point>& lineality() const { return lineality_; }

  /// Nearest point of the cone to v. Throws on the EMPTY marker.
  Point project(const Point& v) const {
    require_same_dim(v, dim_, "Cone::project");
    if (empty_) throw DomainError("Cone::project: empty cone has no points");
    if (basis_.cols() == 0) {
      if (reduced_.empty()) return Point::Zero(dim_);
      if (reduced_.size() == 1) {
        const Point& g = reduced_.front();
        return std::max(0.0, g.dot(v) / g.squaredNorm()) * g;
      }
      if (reduced_.size() == 2 && dim_ == 2) return project_planar_pair(v);
      return reduced_matrix_ * nnls(reduced_matrix_, v);
    }
    Point lin = basis_ * (basis_.transpose() * v);
    if (reduced_.empty()) return lin;
    const Point rest = v - lin;
    if (reduced_.size() == 1) {
      const Point& g = reduced_.front();
      return lin + std::max(0.0, g.dot(rest) / g.squaredNorm()) * g;
    }
    return lin + reduced_matrix_ * nnls(reduced_matrix_, rest);
  }

  /// Euclidean distance from v to the cone; +inf for the EMPTY marker.
  double distance(const Point& v) const {
    if (empty_) return kInf;
    return (v - project(v)).norm();
  }

  bool contains(const Point& v, double tol = 1e-9) const { return !empty_ && distance(v) <= tol; }

 private:
  // Two generators in the plane: inside if both coefficients are nonnegative,
  // otherwise the nearer of the two ray projections.
  Point project_planar_pair(const Point& v) const {
    const Eigen::Vector2d g1(reduced_[0][0], reduced_[0][1]);
    const Eigen::Vector2d g2(reduced_[1][0], reduced_[1][1]);
    const Eigen::Vector2d w(v[0], v[1]);
    const double det = g1[0] * g2[1] - g1[1] * g2[0];
    if (std::abs(det) > 1e-9) {
      const double l1 = (w[0] * g2[1] - w[1] * g2[0]) / det;
      const double l2 = (g1[0] * w[1] - g1[1] * w[0]) / det;
      if (l1 >= 0.0 && l2 >= 0.0) return v;
    } else {
      const Eigen::VectorXd lambda = nnls(reduced_matrix_, v);
      return reduced_matrix_ * lambda;
    }
    const Eigen::Vector2d p1 = std::max(0.0, g1.dot(w) / g1.squaredNorm()) * g1;
    const Eigen::Vector2d p2 = std::max(0.0, g2.dot(w) / g2.squaredNorm()) * g2;
    const Eigen::Vector2d& p = (w - p1).squaredNorm() <= (w - p2).squaredNorm() ? p1 : p2;
    return make_point({p[0], p[1]});
  }

  Index dim_ = 0;
  bool empty_ = false;
  std::vector<Point> generators_;
  std::vector<Point> lineality_;
  Eigen::MatrixXd basis_ = Eigen::MatrixXd(0, 0);
  std::vector<Point> reduced_;
  Eigen::MatrixXd reduced_matrix_;
};

inline double cone_distance(const Cone& c, const Point& v) { return c.distance(v); }

/// Cone generated by a bag of directions. Near-duplicates are merged; in the
/// plane the bag is reduced to its two extreme rays (or to a half-plane / the
/// whole plane when the directions are not contained in an open half-plane).
inline Cone cone_from_directions(Index dim, const std::vector<Point>& directions) {
  std::vector<Point> units;
  for (const Point& d : directions) {
    const double n = d.norm();
    if (n < 1e-300) continue;
    const Point u = d / n;
    bool dup = false;
    for (const Point& q : units) dup = dup || (q - u).norm() < 1e-12;
    if (!dup) units.push_back(u);
  }
  if (units.empty()) return Cone::trivial(dim);
  if (units.size() == 2 && (units[0] + units[1]).norm() < 1e-12) return Cone(dim, {}, {units[0]});
  if (dim != 2 || units.size() <= 2) return Cone(dim, units, {});

  std::vector<double> angle(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) angle[i] = std::atan2(units[i][1], units[i][0]);
  std::vector<std::size_t> order(units.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return angle[a] < angle[b]; });

  double widest = -1.0;
  std::size_t gap_end = 0;  // the direction following the widest angular gap
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t cur = order[k];
    const std::size_t nxt = order[(k + 1) % order.size()];
    double gap = angle[nxt] - angle[cur];
    if (k + 1 == order.size()) gap += 2.0 * M_PI;
    if (gap > widest) {
      widest = gap;
      gap_end = (k + 1) % order.size();
    }
  }
  const Point& first = units[order[gap_end]];
  const Point& last = units[order[(gap_end + order.size() - 1) % order.size()]];
  if (widest > M_PI + 1e-12) return Cone(dim, {first, last}, {});
  if (widest < M_PI - 1e-12) {
    return Cone(dim, {}, {make_point({1.0, 0.0}), make_point({0.0, 1.0})});
  }
  // Exactly a half-plane: boundary line plus the inward direction.
  const Point inward = make_point({-first[1], first[0]});
  return Cone(dim, {inward}, {first});
}

/// Unit directions that span the cone: extreme rays, both signs of each
/// lineality direction, then up to k normalized nonnegative combinations (the
/// first is the plain sum, the rest Dirichlet-weighted). Deterministic in seed.
inline std::vector<Point> unit_sphere_samples(const Cone& c, std::size_t k, std::uint64_t seed = 0) {
  std::vector<Point> out;
  if (c.is_empty() || c.is_trivial()) return out;

  std::vector<Point> extreme = c.generators();
  for (const Point& l : c.lineality()) {
    extreme.push_back(l);
    extreme.push_back(-l);
  }
  auto push_unique = [&out](const Point& p) {
    const double n = p.norm();
    if (n < 1e-12) return;
    const Point u = p / n;
    for (const Point& q : out)
      if ((q - u).norm() < 1e-9) return;
    out.push_back(u);
  };
  for (const Point& e : extreme) push_unique(e);

  if (k == 0 || extreme.size() < 2) return out;
  Point sum = Point::Zero(c.dim());
  for (const Point& g : c.generators()) sum += g;
  push_unique(sum);

  Rng rng(seed);
  for (std::size_t i = 1; i < k; ++i) {
    Point comb = Point::Zero(c.dim());
    for (const Point& e : extreme) {
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      comb += -std::log(u) * e;
    }
    push_unique(comb);
  }
  return out;
}

/// sup { <u, w> : u in cone, ||u|| = 1 }; -inf when the cone has no unit vectors.
/// When w has a nonzero projection p onto the cone the supremum is ||p|| (attained
/// at p/||p||); otherwise it is nonpositive and taken over the extreme directions.
inline double max_unit_inner(const Cone& c, const Point& w) {
  if (c.is_empty() || c.is_trivial()) return -kInf;
  const Point p = c.project(w);
  const double pn = p.norm();
  if (pn > 1e-12 * std::max(1.0, w.norm())) return p.dot(w) / pn;
  double best = -kInf;
  for (const Point& g : c.generators()) best = std::max(best, g.dot(w));
  for (const Point& l : c.lineality()) best = std::max(best, std::abs(l.dot(w)));
  return best;
}

/// ||x - y|| / ||y|| - || x/||x|| - z || with z the projection of x/||x|| on R y.
/// Nonnegative for all nonzero x, y.
inline double projection_gap(const Point& x, const Point& y) {
  if (x.size() != y.size()) throw DomainError("projection_gap: dimension mismatch");
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) throw DomainError("projection_gap: zero vector");
  const Point xu = x / nx;
  const Point yu = y / ny;
  const Point z = xu.dot(yu) * yu;
  return (x - y).norm() / ny - (xu - z).norm();
}

}  // namespace altproj
