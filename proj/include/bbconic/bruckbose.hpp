#pragma once

// Bruck-Bose coordinates: PG(2, q^2) with line at infinity z = 0, PG(4, q)
// with hyperplane at infinity x4 = 0, and the regular spread of that
// hyperplane given by right multiplication in GF(q^2).

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "bbconic/bitset.hpp"
#include "bbconic/conics.hpp"
#include "bbconic/errors.hpp"
#include "bbconic/galois.hpp"
#include "bbconic/parallel.hpp"
#include "bbconic/projgeom.hpp"

namespace bbconic {

class BruckBoseFrame {
 public:
  explicit BruckBoseFrame(FieldPtr base) : BruckBoseFrame(QuadExtension(std::move(base))) {}

  explicit BruckBoseFrame(QuadExtension ext)
      : ext_(std::move(ext)),
        plane_(ext_.ext_ptr(), 2),
        pg4_(ext_.base_ptr(), 4),
        sigma_(ext_.base_ptr(), 3),
        sigma_inf_(pg4_.hyperplane(Coords{0, 0, 0, 0, 1})),
        line_inf_(plane_.hyperplane(Coords{0, 0, 1})) {
    if (ext_.base().characteristic() == 2) throw InvalidField("the Bruck-Bose frame needs odd q");
    const unsigned q2 = q() * q();
    spread_.reserve(q2 + 1);
    for (unsigned m = 0; m < q2; ++m) spread_.push_back(line_for_slope(static_cast<Elem>(m)));
    const std::array<Coords, 2> vertical{Coords{0, 0, 1, 0}, Coords{0, 0, 0, 1}};
    spread_.push_back(sigma_.subspace(vertical));
    for (std::size_t i = 0; i < spread_.size(); ++i) spread_index_.emplace(spread_[i], i);
    Bitset cover(sigma_.point_count());
    for (const auto& l : spread_) {
      sigma_.for_each_point(l, [&](const ProjPoint& p) {
        const PointId id = sigma_.id_of(p);
        if (cover.test(id)) throw SpreadViolation("regular spread lines overlap", p.to_string());
        cover.set(id);
      });
    }
    if (cover.count() != sigma_.point_count()) throw SpreadViolation("regular spread does not cover the hyperplane");
  }

  static BruckBoseFrame build(const FieldSpec& spec) { return BruckBoseFrame(Field::make(spec)); }

  const QuadExtension& ext() const noexcept { return ext_; }
  unsigned q() const noexcept { return ext_.q(); }
  const Field& base() const noexcept { return ext_.base(); }
  const Field& big() const noexcept { return ext_.ext(); }

  /// PG(2, q^2), PG(4, q), and PG(3, q) as the coordinates of the hyperplane at infinity.
  const ProjectiveSpace& plane() const noexcept { return plane_; }
  const ProjectiveSpace& pg4() const noexcept { return pg4_; }
  const ProjectiveSpace& sigma() const noexcept { return sigma_; }
  const Subspace& sigma_inf() const noexcept { return sigma_inf_; }
  const Subspace& line_inf() const noexcept { return line_inf_; }

  /// The regular spread, in PG(3) coordinates. Index m < q^2 is the line of
  /// slope m (infinite point (1, m, 0)); index q^2 is the vertical line.
  const std::vector<Subspace>& spread_reg() const noexcept { return spread_; }

  std::optional<std::size_t> spread_index(const Subspace& sigma_line) const {
    auto it = spread_index_.find(sigma_line);
    if (it == spread_index_.end()) return std::nullopt;
    return it->second;
  }

  /// Index of the regular spread line through a point of PG(3).
  std::size_t spread_index_of(const ProjPoint& sigma_point) const {
    const Elem x = ext_.compose(sigma_point[0], sigma_point[1]);
    const Elem y = ext_.compose(sigma_point[2], sigma_point[3]);
    if (x == 0) return q() * q();
    return big().div(y, x);
  }

  ProjPoint infinite_point(std::size_t index) const {
    if (index == q() * q()) return plane_.point({0, 1, 0});
    return plane_.point({1, static_cast<Elem>(index), 0});
  }

  std::size_t infinite_index(const ProjPoint& p) const {
    if (p[2] != 0) throw NotAffine("point is not on the line at infinity", p.to_string());
    if (p[0] == 0) return q() * q();
    return p[1];
  }

  Subspace spread_line_for(const ProjPoint& infinite) const { return spread_[infinite_index(infinite)]; }

  ProjPoint infinite_point_for(const Subspace& sigma_line) const {
    const auto idx = spread_index(sigma_line);
    if (!idx) throw SpreadViolation("line is not in the regular spread", sigma_line.to_string());
    return infinite_point(*idx);
  }

  /// Affine point (a, b, 1) of PG(2, q^2) to (a0, a1, b0, b1, 1).
  ProjPoint point_down(const ProjPoint& p) const {
    if (p[2] == 0) throw NotAffine("point lies on the line at infinity", p.to_string());
    const Field& e = big();
    const Elem zi = e.inv(p[2]);
    const auto [a0, a1] = ext_.decompose(e.mul(p[0], zi));
    const auto [b0, b1] = ext_.decompose(e.mul(p[1], zi));
    return pg4_.point({a0, a1, b0, b1, 1});
  }

  ProjPoint point_up(const ProjPoint& x) const {
    if (x[4] == 0) throw NotAffine("point lies in the hyperplane at infinity", x.to_string());
    const Field& b = base();
    const Elem wi = b.inv(x[4]);
    const Elem a = ext_.compose(b.mul(x[0], wi), b.mul(x[1], wi));
    const Elem c = ext_.compose(b.mul(x[2], wi), b.mul(x[3], wi));
    return plane_.point({a, c, 1});
  }

  ProjPoint lift(const ProjPoint& s) const { return pg4_.point({s[0], s[1], s[2], s[3], 0}); }

  Subspace lift(const Subspace& s) const {
    std::vector<Coords> rows;
    for (unsigned i = 0; i < s.rank(); ++i) {
      const Coords& r = s.row(i);
      rows.push_back(Coords{r[0], r[1], r[2], r[3], 0});
    }
    return pg4_.subspace(rows);
  }

  ProjPoint drop(const ProjPoint& x) const {
    if (x[4] != 0) throw AmbientMismatch("point is not in the hyperplane at infinity", x.to_string());
    return sigma_.point({x[0], x[1], x[2], x[3]});
  }

  Subspace drop(const Subspace& s) const {
    if (!pg4_.contains(sigma_inf_, s)) throw AmbientMismatch("subspace is not in the hyperplane at infinity", s.to_string());
    std::vector<Coords> rows;
    for (unsigned i = 0; i < s.rank(); ++i) {
      const Coords& r = s.row(i);
      rows.push_back(Coords{r[0], r[1], r[2], r[3]});
    }
    return sigma_.subspace(rows);
  }

  /// Affine plane of PG(4, q) corresponding to a line of PG(2, q^2) other than
  /// the line at infinity.
  Subspace line_down(const Subspace& line) const {
    if (line == line_inf_) throw NotAffine("the line at infinity has no affine plane image");
    const auto at_inf = plane_.meet(line, line_inf_);
    const ProjPoint inf_pt = plane_.point(at_inf->row(0));
    std::optional<ProjPoint> affine;
    for (unsigned i = 0; i < line.rank() && !affine; ++i) {
      if (line.row(i)[2] != 0) affine = plane_.point(line.row(i));
    }
    return pg4_.span(lift(spread_line_for(inf_pt)), point_down(*affine));
  }

  /// Inverse of line_down for affine planes through a regular spread line.
  Subspace line_up(const Subspace& affine_plane) const {
    const auto at_inf = pg4_.meet(affine_plane, sigma_inf_);
    if (affine_plane.rank() != 3 || !at_inf || at_inf->rank() != 2) {
      throw NotAffine("not an affine plane", affine_plane.to_string());
    }
    const ProjPoint inf_pt = infinite_point_for(drop(*at_inf));
    std::optional<ProjPoint> affine;
    for (unsigned i = 0; i < affine_plane.rank() && !affine; ++i) {
      if (affine_plane.row(i)[4] != 0) affine = pg4_.point(affine_plane.row(i));
    }
    return plane_.span({point_up(*affine), inf_pt});
  }

 private:
  Subspace line_for_slope(Elem m) const {
    const Field& e = big();
    const auto [m0, m1] = ext_.decompose(m);
    const auto [w0, w1] = ext_.decompose(e.mul(ext_.omega(), m));
    const std::array<Coords, 2> rows{Coords{1, 0, m0, m1}, Coords{0, 1, w0, w1}};
    return sigma_.subspace(rows);
  }

  QuadExtension ext_;
  ProjectiveSpace plane_;
  ProjectiveSpace pg4_;
  ProjectiveSpace sigma_;
  Subspace sigma_inf_;
  Subspace line_inf_;
  std::vector<Subspace> spread_;
  std::unordered_map<Subspace, std::size_t, SubspaceHash> spread_index_;
};

/// A nondegenerate conic of PG(2, q^2) tangent to the line at infinity.
struct TangentConic {
  QuadraticForm form;
  ProjPoint p_inf;
  std::vector<ProjPoint> affine;  // the q^2 affine points, by point id
  Mat3 transform = mat3::identity();  // image of x^2 = yz under P -> transform * P
  std::uint64_t seed = 0;

  std::vector<ProjPoint> all_points() const {
    std::vector<ProjPoint> out = affine;
    out.push_back(p_inf);
    return out;
  }
};

/// Image of {(t, t^2, 1)} u {(0, 1, 0)} under a seed-derived affine
/// projectivity [[a, b, c], [d, e, f], [0, 0, 1]]; seed 0 is the identity.
inline TangentConic random_tangent_conic(const BruckBoseFrame& frame, std::uint64_t seed) {
  const Field& e = frame.big();
  const ProjectiveSpace& plane = frame.plane();
  const unsigned n = e.order();
  Mat3 g = mat3::identity();
  if (seed != 0) {
    std::mt19937_64 rng(seed);
    do {
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 3; ++c) g[r][c] = static_cast<Elem>(rng() % n);
      }
    } while (mat3::det(e, g) == 0);
  }
  TangentConic tc;
  tc.seed = seed;
  tc.transform = g;
  tc.form = QuadraticForm::from_coefficients(e, 1, 0, 0, 0, 0, e.neg(1)).transformed(e, g);
  const Vec3 pinf = mat3::apply(e, g, Vec3{0, 1, 0});
  tc.p_inf = plane.point({pinf[0], pinf[1], pinf[2]});
  for (unsigned t = 0; t < n; ++t) {
    const Elem et = static_cast<Elem>(t);
    const Vec3 v = mat3::apply(e, g, Vec3{et, e.mul(et, et), 1});
    tc.affine.push_back(plane.point({v[0], v[1], v[2]}));
  }
  std::sort(tc.affine.begin(), tc.affine.end(),
            [&](const ProjPoint& a, const ProjPoint& b) { return plane.id_of(a) < plane.id_of(b); });
  return tc;
}

/// The q^2 points of PG(4, q) corresponding to the affine part of the conic,
/// ordered by point id.
inline std::vector<ProjPoint> build_C(const BruckBoseFrame& frame, const TangentConic& conic) {
  std::vector<ProjPoint> out;
  out.reserve(conic.affine.size());
  for (const auto& p : conic.affine) out.push_back(frame.point_down(p));
  const ProjectiveSpace& s = frame.pg4();
  std::sort(out.begin(), out.end(), [&](const ProjPoint& a, const ProjPoint& b) { return s.id_of(a) < s.id_of(b); });
  return out;
}

/// A plane together with the indices of the given points it contains.
struct RichPlane {
  Subspace plane;
  std::vector<std::uint32_t> members;  // ascending
};

/// Every plane of `space` holding at least `min_points` of `pts` (and not all
/// of them on one line), sorted by canonical form. Each plane is reported
/// from the pair of its two smallest member indices, so no deduplication is
/// needed.
inline std::vector<RichPlane> rich_planes(const ProjectiveSpace& space, std::span<const ProjPoint> pts,
                                          std::size_t min_points, unsigned threads = 1) {
  const std::size_t n = pts.size();
  auto chunks = parallel_chunks(n, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<RichPlane> found;
    std::vector<std::uint32_t> count;
    std::vector<std::uint32_t> first;
    std::vector<PointId> image(n);
    std::vector<PointId> touched;
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const Quotient qt(space, space.span({pts[i], pts[j]}));
        const std::size_t np = qt.target().point_count();
        if (count.size() != np) {
          count.assign(np, 0);
          first.assign(np, 0);
        }
        touched.clear();
        std::vector<std::uint32_t> on_line;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == i || k == j) continue;
          const auto id = qt.image_id(pts[k]);
          if (!id) {
            on_line.push_back(static_cast<std::uint32_t>(k));
            image[k] = static_cast<PointId>(-1);
            continue;
          }
          image[k] = *id;
          if (count[*id]++ == 0) {
            first[*id] = static_cast<std::uint32_t>(k);
            touched.push_back(*id);
          }
        }
        const std::uint32_t min_line = on_line.empty() ? static_cast<std::uint32_t>(n) : on_line.front();
        for (PointId id : touched) {
          const std::size_t total = 2 + on_line.size() + count[id];
          if (total >= min_points && first[id] > j && min_line > j) {
            RichPlane rp;
            rp.members = {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)};
            for (auto k : on_line) rp.members.push_back(k);
            for (std::size_t k = j + 1; k < n; ++k) {
              if (image[k] == id) rp.members.push_back(static_cast<std::uint32_t>(k));
            }
            std::sort(rp.members.begin(), rp.members.end());
            rp.plane = qt.join(pts[first[id]]);
            found.push_back(std::move(rp));
          }
        }
        for (PointId id : touched) count[id] = 0;
      }
    }
    return found;
  });
  std::vector<RichPlane> all;
  for (auto& c : chunks) {
    for (auto& rp : c) all.push_back(std::move(rp));
  }
  std::sort(all.begin(), all.end(), [](const RichPlane& a, const RichPlane& b) { return a.plane < b.plane; });
  return all;
}

/// Closure of a quadrangle under joins and meets of its secants. This is the
/// subplane over the prime field, so it is the Baer subplane exactly when q
/// is prime. Throws ClosureOverflow once the set exceeds `cap` points.
inline std::vector<ProjPoint> baer_closure(const ProjectiveSpace& plane, std::span<const ProjPoint> quadrangle,
                                           std::size_t cap) {
  if (quadrangle.size() != 4 || !is_arc(plane, quadrangle).is_arc) {
    throw DegenerateInput("baer_closure needs four points, no three collinear");
  }
  const Field& f = plane.field();
  std::vector<char> in(plane.point_count(), 0);
  std::vector<ProjPoint> pts;
  for (const auto& p : quadrangle) {
    in[plane.id_of(p)] = 1;
    pts.push_back(p);
  }
  bool grew = true;
  while (grew) {
    grew = false;
    std::vector<Vec3> lines;
    std::unordered_map<std::uint64_t, char> seen;
    const std::uint64_t qq = f.order();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        const Vec3 d = normalized_dual(f, mat3::cross(f, mat3::of(pts[i]), mat3::of(pts[j])));
        if (seen.emplace((d[0] * qq + d[1]) * qq + d[2], 1).second) lines.push_back(d);
      }
    }
    std::vector<ProjPoint> added;
    for (std::size_t a = 0; a < lines.size(); ++a) {
      for (std::size_t b = a + 1; b < lines.size(); ++b) {
        const Vec3 x = mat3::cross(f, lines[a], lines[b]);
        const ProjPoint p = plane.point({x[0], x[1], x[2]});
        const PointId id = plane.id_of(p);
        if (in[id]) continue;
        in[id] = 1;
        added.push_back(p);
        if (pts.size() + added.size() > cap) throw ClosureOverflow("closure exceeds " + std::to_string(cap) + " points");
      }
    }
    if (!added.empty()) {
      grew = true;
      pts.insert(pts.end(), added.begin(), added.end());
    }
  }
  std::sort(pts.begin(), pts.end(), [&](const ProjPoint& a, const ProjPoint& b) { return plane.id_of(a) < plane.id_of(b); });
  return pts;
}

inline std::vector<ProjPoint> baer_closure(const BruckBoseFrame& frame, std::span<const ProjPoint> quadrangle) {
  const std::size_t q = frame.q();
  return baer_closure(frame.plane(), quadrangle, q * q + q + 1);
}

/// The Baer subplane through a quadrangle as the image of PG(2, q) under the
/// projectivity sending the standard frame to the quadrangle.
inline std::vector<ProjPoint> baer_subplane(const BruckBoseFrame& frame, std::span<const ProjPoint> quadrangle) {
  const ProjectiveSpace& plane = frame.plane();
  if (quadrangle.size() != 4 || !is_arc(plane, quadrangle).is_arc) {
    throw DegenerateInput("baer_subplane needs four points, no three collinear");
  }
  const Field& e = frame.big();
  Mat3 cols{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) cols[r][c] = quadrangle[c][r];
  }
  const Vec3 lambda = mat3::apply(e, mat3::inverse(e, cols), mat3::of(quadrangle[3]));
  Mat3 g{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) g[r][c] = e.mul(cols[r][c], lambda[c]);
  }
  ProjectiveSpace sub(frame.ext().base_ptr(), 2);
  std::vector<ProjPoint> out;
  sub.for_each_point(sub.whole(), [&](const ProjPoint& x) {
    const Vec3 v = mat3::apply(e, g, Vec3{frame.ext().embed(x[0]), frame.ext().embed(x[1]), frame.ext().embed(x[2])});
    out.push_back(plane.point({v[0], v[1], v[2]}));
  });
  std::sort(out.begin(), out.end(), [&](const ProjPoint& a, const ProjPoint& b) { return plane.id_of(a) < plane.id_of(b); });
  return out;
}

struct Lemma1Options {
  unsigned threads = 1;
  std::size_t baer_checks = 10;
  const std::vector<ProjPoint>* c_override = nullptr;  // replaces build_C output
};

struct Lemma1Report {
  std::size_t c_points = 0;
  std::size_t cplanes = 0;
  std::size_t pairs_covered_once = 0;
  std::size_t affine_off_conic = 0;
  std::size_t on_zero_planes = 0;
  std::size_t on_two_planes = 0;
  std::size_t interior = 0;
  std::size_t exterior = 0;
  std::size_t baer_checked = 0;
  std::size_t baer_closure_agreements = 0;
};

/// Checks, by enumeration in PG(4, q), that every affine plane meeting C in
/// five or more points meets it in a q-arc, that every pair of C-points lies
/// in exactly one such plane, and that affine points off the conic lie on 0
/// (interior) or 2 (exterior) of them. Throws LemmaViolation.
inline Lemma1Report verify_lemma1(const BruckBoseFrame& frame, const TangentConic& conic, const Lemma1Options& opt = {}) {
  const ProjectiveSpace& pg4 = frame.pg4();
  const ProjectiveSpace& plane = frame.plane();
  const unsigned q = frame.q();
  const std::vector<ProjPoint> c = opt.c_override ? *opt.c_override : build_C(frame, conic);
  Lemma1Report rep;
  rep.c_points = c.size();
  if (c.size() != static_cast<std::size_t>(q) * q) throw LemmaViolation("C has " + std::to_string(c.size()) + " points");

  const auto planes = rich_planes(pg4, c, 5, opt.threads);
  rep.cplanes = planes.size();
  ProjectiveSpace local(frame.ext().base_ptr(), 2);
  for (const auto& rp : planes) {
    if (rp.members.size() != q) {
      throw LemmaViolation("C-plane meets C in " + std::to_string(rp.members.size()) + " points", rp.plane.to_string());
    }
    std::vector<ProjPoint> arc;
    for (auto k : rp.members) {
      const auto lc = pg4.local_coords(rp.plane, c[k].coords());
      arc.push_back(local.point({lc[0], lc[1], lc[2]}));
    }
    if (!is_arc(local, arc).is_arc) throw LemmaViolation("C-plane section is not an arc", rp.plane.to_string());
  }
  if (planes.size() != static_cast<std::size_t>(q) * q + q) {
    throw LemmaViolation("found " + std::to_string(planes.size()) + " C-planes, expected q^2+q");
  }

  const std::size_t n = c.size();
  std::vector<std::uint8_t> pair(n * n, 0);
  for (const auto& rp : planes) {
    for (std::size_t a = 0; a < rp.members.size(); ++a) {
      for (std::size_t b = a + 1; b < rp.members.size(); ++b) ++pair[rp.members[a] * n + rp.members[b]];
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (pair[a * n + b] != 1) {
        throw LemmaViolation("pair of C-points lies on " + std::to_string(pair[a * n + b]) + " C-planes",
                             c[a].to_string() + ";" + c[b].to_string());
      }
      ++rep.pairs_covered_once;
    }
  }

  std::vector<std::uint16_t> planes_on(pg4.point_count(), 0);
  for (const auto& rp : planes) pg4.for_each_point(rp.plane, [&](const ProjPoint& x) { ++planes_on[pg4.id_of(x)]; });
  const auto conic_pts = conic.all_points();
  const auto tangents = tangent_counts(plane, conic.form, conic_pts);
  for (PointId id = 0; id < plane.point_count(); ++id) {
    const ProjPoint x = plane.point_at(id);
    if (x[2] == 0 || conic.form.evaluate(frame.big(), x) == 0) continue;
    ++rep.affine_off_conic;
    const unsigned on = planes_on[pg4.id_of(frame.point_down(x))];
    const bool interior = tangents[id] == 0;
    (interior ? rep.interior : rep.exterior)++;
    if (on == 0) {
      ++rep.on_zero_planes;
    } else if (on == 2) {
      ++rep.on_two_planes;
    } else {
      throw LemmaViolation("affine point off the conic lies on " + std::to_string(on) + " C-planes", x.to_string());
    }
    if ((on == 0) != interior) {
      throw LemmaViolation(std::string(interior ? "interior" : "exterior") + " point lies on " + std::to_string(on) +
                               " C-planes",
                           x.to_string());
    }
  }

  const bool prime = is_prime(q);
  for (std::size_t i = 0; i < planes.size() && i < opt.baer_checks; ++i) {
    const auto& rp = planes[i];
    const ProjPoint p = frame.point_up(c[rp.members[0]]);
    const ProjPoint qpt = frame.point_up(c[rp.members[1]]);
    const auto t = plane.meet(tangent_line(plane, conic.form, p), frame.line_inf());
    const ProjPoint tp = plane.point(t->row(0));
    const std::vector<ProjPoint> quad{p, qpt, tp, conic.p_inf};
    const auto sub = baer_subplane(frame, quad);
    if (prime) {
      if (baer_closure(frame, quad) != sub) throw LemmaViolation("Baer closure and projectivity image differ", rp.plane.to_string());
      ++rep.baer_closure_agreements;
    }
    std::vector<PointId> down;
    std::vector<PointId> on_conic;
    for (const auto& x : sub) {
      if (conic.form.evaluate(frame.big(), x) == 0) on_conic.push_back(plane.id_of(x));
      if (x[2] != 0) down.push_back(pg4.id_of(frame.point_down(x)));
    }
    std::sort(down.begin(), down.end());
    std::vector<PointId> affine_part;
    pg4.for_each_point(rp.plane, [&](const ProjPoint& x) {
      if (x[4] != 0) affine_part.push_back(pg4.id_of(x));
    });
    std::sort(affine_part.begin(), affine_part.end());
    if (down != affine_part) throw LemmaViolation("Baer subplane does not match its C-plane", rp.plane.to_string());
    std::vector<PointId> expect{plane.id_of(conic.p_inf)};
    for (auto k : rp.members) expect.push_back(plane.id_of(frame.point_up(c[k])));
    std::sort(expect.begin(), expect.end());
    std::sort(on_conic.begin(), on_conic.end());
    if (on_conic != expect) throw LemmaViolation("Baer subplane meets the conic unexpectedly", rp.plane.to_string());
    ++rep.baer_checked;
  }
  return rep;
}

// ---- C-point dump ----------------------------------------------------------

struct CDump {
  FieldSpec spec;
  std::uint64_t seed = 0;
  std::vector<ProjPoint> points;  // normalised PG(4, q) points, file order
};

inline void write_c_dump(std::ostream& os, const FieldSpec& spec, std::uint64_t seed, std::span<const ProjPoint> pts) {
  os << "q=" << spec.order() << " poly=" << spec.modulus_string() << " seed=" << seed << '\n';
  for (const auto& p : pts) os << p.to_string() << '\n';
}

inline CDump parse_c_dump(std::istream& in, std::optional<unsigned> expected_q = std::nullopt) {
  CDump dump;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError("line " + std::to_string(lineno) + ": " + what);
  };
  if (!std::getline(in, line)) throw ParseError("line 1: empty dump");
  lineno = 1;
  std::optional<unsigned> q;
  std::optional<std::vector<unsigned>> poly;
  {
    std::istringstream hs(line);
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw fail("malformed header token '" + tok + "'");
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      try {
        if (key == "q") {
          q = static_cast<unsigned>(std::stoul(val));
        } else if (key == "poly") {
          std::vector<unsigned> coeffs;
          std::istringstream ps(val);
          std::string c;
          while (std::getline(ps, c, ',')) coeffs.push_back(static_cast<unsigned>(std::stoul(c)));
          poly = coeffs;
        } else if (key == "seed") {
          dump.seed = std::stoull(val);
        } else {
          throw fail("unknown header key '" + key + "'");
        }
      } catch (const std::logic_error&) {
        throw fail("bad header value '" + tok + "'");
      }
    }
  }
  if (!q) throw fail("header lacks q=");
  if (expected_q && *expected_q != *q) {
    throw fail("header q=" + std::to_string(*q) + " does not match configured q=" + std::to_string(*expected_q));
  }
  try {
    FieldSpec spec = FieldSpec::for_order(*q);
    if (poly) spec.modulus = *poly;
    Field::make(spec);
    dump.spec = spec;
  } catch (const InvalidField& e) {
    throw fail(e.what());
  }
  const auto field = Field::make(dump.spec);
  const ProjectiveSpace pg4(field, 4);
  std::vector<char> seen(pg4.point_count(), 0);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tok;
    Coords c{};
    std::size_t col = 0;
    while (std::getline(ls, tok, ',')) {
      std::size_t used = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(tok, &used);
      } catch (const std::logic_error&) {
        throw fail("bad coordinate '" + tok + "'");
      }
      if (used != tok.size() || v >= *q || col >= 5) throw fail("bad coordinate '" + tok + "'");
      c[col++] = static_cast<Elem>(v);
    }
    if (col != 5) throw fail("expected 5 coordinates");
    if (c[4] == 0) throw fail("not affine");
    const ProjPoint p = pg4.point(c);
    const PointId id = pg4.id_of(p);
    if (seen[id]) throw SizeMismatch("line " + std::to_string(lineno) + ": duplicate point " + p.to_string());
    seen[id] = 1;
    dump.points.push_back(p);
  }
  const std::size_t want = static_cast<std::size_t>(*q) * *q;
  if (dump.points.size() != want) {
    throw SizeMismatch("dump has " + std::to_string(dump.points.size()) + " points, expected " + std::to_string(want));
  }
  return dump;
}

inline CDump read_c_dump(const std::string& path, std::optional<unsigned> expected_q = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return parse_c_dump(in, expected_q);
}

}  // namespace bbconic
