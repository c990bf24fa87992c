#pragma once

// Conics, tangents and arcs in a projective plane PG(2, F), F of odd order.

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bbconic/errors.hpp"
#include "bbconic/galois.hpp"
#include "bbconic/projgeom.hpp"

namespace bbconic {

using Vec3 = std::array<Elem, 3>;
using Mat3 = std::array<Vec3, 3>;

namespace mat3 {

inline Vec3 of(const ProjPoint& p) { return {p[0], p[1], p[2]}; }

inline Vec3 apply(const Field& f, const Mat3& m, const Vec3& v) {
  Vec3 r{};
  for (int i = 0; i < 3; ++i) {
    Elem s = 0;
    for (int j = 0; j < 3; ++j) s = f.add(s, f.mul(m[i][j], v[j]));
    r[i] = s;
  }
  return r;
}

inline Elem dot(const Field& f, const Vec3& a, const Vec3& b) {
  return f.add(f.add(f.mul(a[0], b[0]), f.mul(a[1], b[1])), f.mul(a[2], b[2]));
}

inline Vec3 cross(const Field& f, const Vec3& a, const Vec3& b) {
  return {f.sub(f.mul(a[1], b[2]), f.mul(a[2], b[1])),
          f.sub(f.mul(a[2], b[0]), f.mul(a[0], b[2])),
          f.sub(f.mul(a[0], b[1]), f.mul(a[1], b[0]))};
}

inline Elem det(const Field& f, const Mat3& m) {
  return dot(f, m[0], cross(f, m[1], m[2]));
}

inline Mat3 mul(const Field& f, const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Elem s = 0;
      for (int k = 0; k < 3; ++k) s = f.add(s, f.mul(a[i][k], b[k][j]));
      r[i][j] = s;
    }
  }
  return r;
}

inline Mat3 transpose(const Mat3& a) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[i][j] = a[j][i];
  }
  return r;
}

inline Mat3 inverse(const Field& f, const Mat3& a) {
  const Elem d = det(f, a);
  if (d == 0) throw DegenerateInput("singular 3x3 matrix");
  const Elem di = f.inv(d);
  // rows of the inverse are cofactor columns: inv = adj / det, adj^T = [c0 c1 c2] with c_i = a_j x a_k
  const Vec3 c0 = cross(f, a[1], a[2]);
  const Vec3 c1 = cross(f, a[2], a[0]);
  const Vec3 c2 = cross(f, a[0], a[1]);
  Mat3 r{};
  for (int i = 0; i < 3; ++i) {
    r[i][0] = f.mul(c0[i], di);
    r[i][1] = f.mul(c1[i], di);
    r[i][2] = f.mul(c2[i], di);
  }
  return r;
}

inline Mat3 identity() { return {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}}; }

}  // namespace mat3

/// Q(P) = P^T M P with M symmetric; normalised so the first nonzero entry
/// (row-major) is 1.
struct QuadraticForm {
  Mat3 m{};

  Elem evaluate(const Field& f, const Vec3& p) const { return mat3::dot(f, p, mat3::apply(f, m, p)); }
  Elem evaluate(const Field& f, const ProjPoint& p) const { return evaluate(f, mat3::of(p)); }
  bool nondegenerate(const Field& f) const { return mat3::det(f, m) != 0; }

  /// a x^2 + b y^2 + c z^2 + d xy + e xz + g yz.
  static QuadraticForm from_coefficients(const Field& f, Elem a, Elem b, Elem c, Elem d, Elem e, Elem g) {
    if (f.characteristic() == 2) throw InvalidField("symmetric forms need odd characteristic");
    const Elem half = f.inv(f.from_int(2));
    QuadraticForm qf;
    qf.m = {Vec3{a, f.mul(d, half), f.mul(e, half)},
            Vec3{f.mul(d, half), b, f.mul(g, half)},
            Vec3{f.mul(e, half), f.mul(g, half), c}};
    return qf.normalized(f);
  }

  QuadraticForm normalized(const Field& f) const {
    Elem lead = 0;
    for (const auto& row : m) {
      for (Elem x : row) {
        if (!lead && x) lead = x;
      }
    }
    if (!lead) return *this;
    const Elem inv = f.inv(lead);
    QuadraticForm r;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) r.m[i][j] = f.mul(m[i][j], inv);
    }
    return r;
  }

  /// Form of the image conic under P -> G P.
  QuadraticForm transformed(const Field& f, const Mat3& g) const {
    const Mat3 gi = mat3::inverse(f, g);
    return QuadraticForm{mat3::mul(f, mat3::transpose(gi), mat3::mul(f, m, gi))}.normalized(f);
  }

  std::string to_string() const {
    std::string s;
    for (int i = 0; i < 3; ++i) {
      if (i) s += ';';
      for (int j = 0; j < 3; ++j) {
        if (j) s += ',';
        s += std::to_string(m[i][j]);
      }
    }
    return s;
  }

  bool operator==(const QuadraticForm&) const = default;
};

enum class ConicPosition { on, interior, exterior };

inline const char* to_string(ConicPosition p) {
  switch (p) {
    case ConicPosition::on: return "on";
    case ConicPosition::interior: return "interior";
    case ConicPosition::exterior: return "exterior";
  }
  return "?";
}

struct ArcCheck {
  bool is_arc = true;
  std::optional<std::array<std::size_t, 3>> violating_triple;  // indices into the input
};

namespace detail {

inline void require_plane(const ProjectiveSpace& plane) {
  if (plane.n() != 2) throw AmbientMismatch("conic operations need a projective plane");
  if (plane.field().characteristic() == 2) throw InvalidField("conic operations need odd order");
}

inline bool collinear(const Field& f, const Vec3& a, const Vec3& b, const Vec3& c) {
  return mat3::dot(f, a, mat3::cross(f, b, c)) == 0;
}

}  // namespace detail

/// Line with dual coordinates `dual` as a subspace of the plane.
inline Subspace line_from_dual(const ProjectiveSpace& plane, const Vec3& dual) {
  return plane.hyperplane(Coords{dual[0], dual[1], dual[2]});
}

inline Vec3 normalized_dual(const Field& f, Vec3 v) {
  for (Elem x : v) {
    if (x) {
      const Elem inv = f.inv(x);
      for (auto& y : v) y = f.mul(y, inv);
      return v;
    }
  }
  return v;
}

/// Brute force over all triples; the reported triple is the least one.
inline ArcCheck is_arc(const ProjectiveSpace& plane, std::span<const ProjPoint> pts) {
  detail::require_plane(plane);
  const Field& f = plane.field();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 a = mat3::of(pts[i]);
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const Vec3 ab = mat3::cross(f, a, mat3::of(pts[j]));
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        if (mat3::dot(f, ab, mat3::of(pts[k])) == 0) return {false, std::array<std::size_t, 3>{i, j, k}};
      }
    }
  }
  return {};
}

/// Per-point secant hashing: P_i, P_j, P_k collinear iff the lines P_iP_j and
/// P_iP_k coincide.
inline ArcCheck is_arc_by_secants(const ProjectiveSpace& plane, std::span<const ProjPoint> pts) {
  detail::require_plane(plane);
  const Field& f = plane.field();
  const unsigned q = f.order();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::unordered_map<std::uint32_t, std::size_t> seen;
    const Vec3 a = mat3::of(pts[i]);
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const Vec3 d = normalized_dual(f, mat3::cross(f, a, mat3::of(pts[j])));
      if (d == Vec3{0, 0, 0}) return {false, std::array<std::size_t, 3>{i, j, j}};
      const std::uint32_t key = (static_cast<std::uint32_t>(d[0]) * q + d[1]) * q + d[2];
      auto [it, inserted] = seen.emplace(key, j);
      if (!inserted) return {false, std::array<std::size_t, 3>{i, it->second, j}};
    }
  }
  return {};
}

/// The unique conic through five points in general position.
inline QuadraticForm conic_through_5(const ProjectiveSpace& plane, std::span<const ProjPoint> pts) {
  detail::require_plane(plane);
  const Field& f = plane.field();
  if (pts.size() != 5) throw DegenerateInput("conic_through_5 needs exactly five points");
  if (const auto chk = is_arc(plane, pts); !chk.is_arc) {
    const auto& t = *chk.violating_triple;
    throw DegenerateInput("three of the five points are collinear",
                          pts[t[0]].to_string() + ";" + pts[t[1]].to_string() + ";" + pts[t[2]].to_string());
  }
  detail::WorkMatrix m{};
  for (std::size_t i = 0; i < 5; ++i) {
    const Elem x = pts[i][0], y = pts[i][1], z = pts[i][2];
    m[i] = Coords{f.mul(x, x), f.mul(y, y), f.mul(z, z), f.mul(x, y), f.mul(x, z), f.mul(y, z)};
  }
  const unsigned rank = detail::rref(f, m, 5, 6);
  if (rank != 5) throw DegenerateInput("monomial system has nullspace of dimension " + std::to_string(6 - rank));
  // single free column
  std::array<bool, 6> is_pivot{};
  std::array<unsigned, 5> pivots{};
  for (unsigned r = 0; r < 5; ++r) {
    unsigned c = 0;
    while (m[r][c] == 0) ++c;
    pivots[r] = c;
    is_pivot[c] = true;
  }
  unsigned free_col = 0;
  while (is_pivot[free_col]) ++free_col;
  std::array<Elem, 6> coef{};
  coef[free_col] = 1;
  for (unsigned r = 0; r < 5; ++r) coef[pivots[r]] = f.neg(m[r][free_col]);
  const QuadraticForm qf = QuadraticForm::from_coefficients(f, coef[0], coef[1], coef[2], coef[3], coef[4], coef[5]);
  if (!qf.nondegenerate(f)) throw DegenerateInput("fitted conic is degenerate");
  return qf;
}

/// Dual coordinates M P of the tangent at P.
inline Vec3 tangent_dual(const ProjectiveSpace& plane, const QuadraticForm& form, const ProjPoint& p) {
  detail::require_plane(plane);
  const Field& f = plane.field();
  if (form.evaluate(f, p) != 0) throw PointNotOnConic("point is not on the conic", p.to_string());
  return normalized_dual(f, mat3::apply(f, form.m, mat3::of(p)));
}

inline Subspace tangent_line(const ProjectiveSpace& plane, const QuadraticForm& form, const ProjPoint& p) {
  return line_from_dual(plane, tangent_dual(plane, form, p));
}

/// All points of the conic, in point-id order.
inline std::vector<ProjPoint> conic_points(const ProjectiveSpace& plane, const QuadraticForm& form) {
  detail::require_plane(plane);
  const Field& f = plane.field();
  std::vector<ProjPoint> out;
  for (PointId id = 0; id < plane.point_count(); ++id) {
    const ProjPoint p = plane.point_at(id);
    if (form.evaluate(f, p) == 0) out.push_back(p);
  }
  return out;
}

/// Number of tangent lines of the conic through each point, indexed by id.
inline std::vector<unsigned char> tangent_counts(const ProjectiveSpace& plane, const QuadraticForm& form,
                                                 std::span<const ProjPoint> on_conic) {
  std::vector<unsigned char> counts(plane.point_count(), 0);
  for (const auto& x : on_conic) {
    plane.for_each_point(tangent_line(plane, form, x), [&](const ProjPoint& p) { ++counts[plane.id_of(p)]; });
  }
  return counts;
}

/// Tangent counting against precomputed conic points.
inline ConicPosition classify_vs_conic(const ProjectiveSpace& plane, const QuadraticForm& form, const ProjPoint& p,
                                       std::span<const ProjPoint> on_conic) {
  detail::require_plane(plane);
  const Field& f = plane.field();
  if (form.evaluate(f, p) == 0) return ConicPosition::on;
  unsigned tangents = 0;
  const Vec3 v = mat3::of(p);
  for (const auto& x : on_conic) {
    if (mat3::dot(f, mat3::apply(f, form.m, mat3::of(x)), v) == 0) ++tangents;
  }
  if (tangents == 0) return ConicPosition::interior;
  if (tangents == 2) return ConicPosition::exterior;
  throw DegenerateInput("point lies on " + std::to_string(tangents) + " tangents", p.to_string());
}

inline ConicPosition classify_vs_conic(const ProjectiveSpace& plane, const QuadraticForm& form, const ProjPoint& p) {
  const auto pts = conic_points(plane, form);
  return classify_vs_conic(plane, form, p, pts);
}

/// Completes a q-arc by fitting the conic through five of its points.
inline ProjPoint complete_q_arc(const ProjectiveSpace& plane, std::span<const ProjPoint> arc) {
  detail::require_plane(plane);
  const Field& f = plane.field();
  if (const auto chk = is_arc(plane, arc); !chk.is_arc) {
    const auto& t = *chk.violating_triple;
    throw NotAnArc("input has three collinear points",
                   arc[t[0]].to_string() + ";" + arc[t[1]].to_string() + ";" + arc[t[2]].to_string());
  }
  if (arc.size() < 5) throw CompletionNotUnique("fewer than five points do not determine a conic");
  const QuadraticForm form = conic_through_5(plane, arc.first(5));
  for (const auto& p : arc) {
    if (form.evaluate(f, p) != 0) throw CompletionNotUnique("arc does not lie on a single conic", p.to_string());
  }
  std::optional<ProjPoint> extra;
  std::size_t on = 0;
  for (PointId id = 0; id < plane.point_count(); ++id) {
    const ProjPoint p = plane.point_at(id);
    if (form.evaluate(f, p) != 0) continue;
    ++on;
    if (std::find(arc.begin(), arc.end(), p) == arc.end()) {
      if (extra) throw CompletionNotUnique("conic has more than one point outside the arc");
      extra = p;
    }
  }
  if (!extra || on != arc.size() + 1) throw CompletionNotUnique("conic has no point outside the arc");
  return *extra;
}

/// Independent route: the only point off the arc lying on none of its secants.
inline ProjPoint complete_q_arc_by_secants(const ProjectiveSpace& plane, std::span<const ProjPoint> arc) {
  detail::require_plane(plane);
  const Field& f = plane.field();
  if (const auto chk = is_arc_by_secants(plane, arc); !chk.is_arc) throw NotAnArc("input has three collinear points");
  std::vector<char> covered(plane.point_count(), 0);
  for (const auto& p : arc) covered[plane.id_of(p)] = 1;
  for (std::size_t i = 0; i < arc.size(); ++i) {
    for (std::size_t j = i + 1; j < arc.size(); ++j) {
      const Vec3 d = mat3::cross(f, mat3::of(arc[i]), mat3::of(arc[j]));
      plane.for_each_point(line_from_dual(plane, d), [&](const ProjPoint& p) { covered[plane.id_of(p)] = 1; });
    }
  }
  std::optional<ProjPoint> found;
  for (PointId id = 0; id < plane.point_count(); ++id) {
    if (covered[id]) continue;
    if (found) throw CompletionNotUnique("several points lie on no secant");
    found = plane.point_at(id);
  }
  if (!found) throw CompletionNotUnique("every point lies on a secant");
  return *found;
}

}  // namespace bbconic
