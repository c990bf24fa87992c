#pragma once

// Recovers the spread from a set C of q^2 affine points of PG(4, q) that
// satisfies the three plane axioms, certifies that the spread is regular and
// unique, and that C together with one extra point is a conic of the
// rebuilt plane.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bbconic/bitset.hpp"
#include "bbconic/bruckbose.hpp"
#include "bbconic/conics.hpp"
#include "bbconic/errors.hpp"
#include "bbconic/parallel.hpp"
#include "bbconic/projgeom.hpp"
#include "bbconic/report.hpp"

namespace bbconic {

struct ReconOptions {
  unsigned threads = 1;
  bool full_checks = true;  // also run the exhaustive structural sweeps
};

struct CPlane {
  Subspace plane;                      // PG(4, q)
  std::vector<std::uint32_t> members;  // indices into CConfiguration::points
  ProjPoint pi_inf;                    // PG(3, q) coordinates
  Subspace cline;                      // plane ∩ Σ∞ in PG(3, q) coordinates
  QuadraticForm local_form;            // conic through members and pi_inf, local coordinates
  std::uint32_t cls = 0;
};

struct CConfiguration {
  std::vector<ProjPoint> points;  // sorted by PG(4, q) id
  std::vector<CPlane> planes;     // sorted by canonical form
  std::vector<std::vector<std::uint32_t>> planes_through;
  std::vector<std::vector<std::uint32_t>> classes;
  std::vector<std::uint32_t> pair_plane;  // n * n, plane holding the pair

  std::size_t size() const noexcept { return points.size(); }
  std::uint32_t plane_of(std::size_t i, std::size_t j) const { return pair_plane[i * points.size() + j]; }
};

enum class SigmaLabel : std::uint8_t { zero_point, one_line_point, infinity_point };

inline const char* to_string(SigmaLabel l) {
  switch (l) {
    case SigmaLabel::zero_point: return "zero_point";
    case SigmaLabel::one_line_point: return "one_line_point";
    case SigmaLabel::infinity_point: return "infinity_point";
  }
  return "?";
}

struct SigmaClassification {
  std::vector<SigmaLabel> label;                          // by PG(3, q) point id
  std::vector<std::vector<std::uint32_t>> clines_through;  // C-plane indices
  std::vector<PointId> infinity_points;
  std::vector<PointId> zero_points;
  std::size_t one_line_points = 0;
};

struct Spread {
  std::vector<Subspace> lines;       // PG(3, q)
  std::size_t distinguished = 0;     // index of t_inf
  std::vector<std::int64_t> source;  // C-point index of t_A, -1 for t_inf

  const Subspace& t_inf() const { return lines[distinguished]; }
};

struct Regulus {
  std::vector<Subspace> lines;     // sorted
  std::vector<Subspace> opposite;  // sorted
};

struct ClosureReport {
  std::size_t pairs = 0;
  std::size_t passes = 0;
  std::vector<Regulus> reguli;  // distinct reguli through the distinguished line
  std::optional<std::array<std::size_t, 2>> first_failure;
  std::string witness;

  bool closed() const noexcept { return pairs == passes; }
};

struct KleinImage {
  std::vector<ProjPoint> image;  // PG(5, q), one per spread line
  Subspace span;
  bool on_quadric = true;
  std::size_t section_size = 0;
  bool section_is_image = false;
  bool cap = false;
  bool regular = false;
};

namespace detail {

template <std::size_t N>
using SqMat = std::array<std::array<Elem, N>, N>;

template <std::size_t N>
SqMat<N> mat_identity() {
  SqMat<N> m{};
  for (std::size_t i = 0; i < N; ++i) m[i][i] = 1;
  return m;
}

template <std::size_t N>
SqMat<N> mat_mul(const Field& f, const SqMat<N>& a, const SqMat<N>& b) {
  SqMat<N> r{};
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      Elem s = 0;
      for (std::size_t k = 0; k < N; ++k) s = f.add(s, f.mul(a[i][k], b[k][j]));
      r[i][j] = s;
    }
  }
  return r;
}

template <std::size_t N>
std::array<Elem, N> row_times(const Field& f, const std::array<Elem, N>& v, const SqMat<N>& m) {
  std::array<Elem, N> r{};
  for (std::size_t j = 0; j < N; ++j) {
    Elem s = 0;
    for (std::size_t k = 0; k < N; ++k) s = f.add(s, f.mul(v[k], m[k][j]));
    r[j] = s;
  }
  return r;
}

template <std::size_t N>
SqMat<N> mat_inverse(const Field& f, SqMat<N> a) {
  SqMat<N> inv = mat_identity<N>();
  for (std::size_t c = 0; c < N; ++c) {
    std::size_t piv = c;
    while (piv < N && a[piv][c] == 0) ++piv;
    if (piv == N) throw DegenerateInput("matrix is singular");
    std::swap(a[piv], a[c]);
    std::swap(inv[piv], inv[c]);
    const Elem s = f.inv(a[c][c]);
    for (std::size_t j = 0; j < N; ++j) {
      a[c][j] = f.mul(a[c][j], s);
      inv[c][j] = f.mul(inv[c][j], s);
    }
    for (std::size_t r = 0; r < N; ++r) {
      if (r == c || a[r][c] == 0) continue;
      const Elem g = a[r][c];
      for (std::size_t j = 0; j < N; ++j) {
        a[r][j] = f.sub(a[r][j], f.mul(g, a[c][j]));
        inv[r][j] = f.sub(inv[r][j], f.mul(g, inv[c][j]));
      }
    }
  }
  return inv;
}

inline ProjPoint to_local(const ProjectiveSpace& pg4, const ProjectiveSpace& local, const Subspace& plane,
                          const ProjPoint& x) {
  const auto lc = pg4.local_coords(plane, x.coords());
  return local.point({lc[0], lc[1], lc[2]});
}

inline ProjPoint from_local(const ProjectiveSpace& pg4, const Subspace& plane, const ProjPoint& x) {
  const std::array<Elem, 3> l{x[0], x[1], x[2]};
  return pg4.point(pg4.combine(plane, l));
}

inline std::size_t count_inside(const ProjectiveSpace& space, const Subspace& s, std::span<const ProjPoint> pts) {
  std::size_t n = 0;
  for (const auto& p : pts) n += space.contains(s, p) ? 1 : 0;
  return n;
}

inline std::size_t shared_members(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

/// Distribution of the points over the planes through a line of PG(4, q).
struct PlaneLoad {
  std::size_t max = 0;
  std::size_t planes_hit = 0;
  std::optional<Subspace> fullest;  // a plane attaining max
};

inline PlaneLoad plane_load(const ProjectiveSpace& pg4, const Subspace& line, std::span<const ProjPoint> pts) {
  const Quotient qt(pg4, line);
  std::unordered_map<PointId, std::uint32_t> count;
  std::vector<std::optional<PointId>> image(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    image[k] = qt.image_id(pts[k]);
    if (image[k]) ++count[*image[k]];
  }
  PlaneLoad out;
  out.planes_hit = count.size();
  for (const auto& [id, c] : count) out.max = std::max<std::size_t>(out.max, c);
  for (std::size_t k = 0; k < pts.size() && out.max; ++k) {
    if (image[k] && count[*image[k]] == out.max) {
      out.fullest = qt.join(pts[k]);
      break;
    }
  }
  return out;
}

inline std::string join_points(std::span<const ProjPoint> pts) {
  std::string s;
  for (const auto& p : pts) {
    if (!s.empty()) s += ';';
    s += p.to_string();
  }
  return s;
}

}  // namespace detail

// ---- C-planes and axioms ----------------------------------------------

inline CConfiguration discover_cplanes(const BruckBoseFrame& frame, std::vector<ProjPoint> points,
                                       const ReconOptions& opt = {}, Counts* counts = nullptr) {
  const ProjectiveSpace& pg4 = frame.pg4();
  const unsigned q = frame.q();
  const std::size_t n = points.size();
  if (n != static_cast<std::size_t>(q) * q) {
    throw SizeMismatch("C has " + std::to_string(n) + " points, expected " + std::to_string(q * q));
  }
  for (const auto& p : points) {
    if (p.size() != 5 || p[4] == 0) throw NotAffine("C-point is not an affine point of PG(4,q)", p.to_string());
  }
  std::sort(points.begin(), points.end(), [&](const ProjPoint& a, const ProjPoint& b) { return pg4.id_of(a) < pg4.id_of(b); });
  for (std::size_t i = 1; i < n; ++i) {
    if (points[i] == points[i - 1]) throw SizeMismatch("C has a repeated point", points[i].to_string());
  }

  CConfiguration cfg;
  cfg.points = std::move(points);
  const auto rich = rich_planes(pg4, cfg.points, 5, opt.threads);
  const ProjectiveSpace local(frame.ext().base_ptr(), 2);
  for (const auto& rp : rich) {
    if (rp.members.size() != q) {
      throw AxiomA1Violation("plane meets C in " + std::to_string(rp.members.size()) + " points", rp.plane.to_string());
    }
    std::vector<ProjPoint> arc;
    for (auto k : rp.members) arc.push_back(detail::to_local(pg4, local, rp.plane, cfg.points[k]));
    if (!is_arc(local, arc).is_arc) throw AxiomA1Violation("plane section of C is not an arc", rp.plane.to_string());
    CPlane cp;
    cp.plane = rp.plane;
    cp.members = rp.members;
    cfg.planes.push_back(std::move(cp));
  }

  constexpr std::uint32_t none = static_cast<std::uint32_t>(-1);
  cfg.pair_plane.assign(n * n, none);
  cfg.planes_through.assign(n, {});
  for (std::uint32_t pi = 0; pi < cfg.planes.size(); ++pi) {
    const auto& m = cfg.planes[pi].members;
    for (auto a : m) cfg.planes_through[a].push_back(pi);
    for (std::size_t x = 0; x < m.size(); ++x) {
      for (std::size_t y = x + 1; y < m.size(); ++y) {
        auto& slot = cfg.pair_plane[m[x] * n + m[y]];
        if (slot != none) {
          throw AxiomA2Violation("pair of C-points lies on two C-planes",
                                 cfg.points[m[x]].to_string() + ";" + cfg.points[m[y]].to_string());
        }
        slot = pi;
        cfg.pair_plane[m[y] * n + m[x]] = pi;
      }
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (cfg.pair_plane[a * n + b] == none) {
        throw AxiomA2Violation("pair of C-points lies on no C-plane", cfg.points[a].to_string() + ";" + cfg.points[b].to_string());
      }
    }
  }
  if (counts) {
    counts->set("c_points", static_cast<std::int64_t>(n));
    counts->set("cplanes", static_cast<std::int64_t>(cfg.planes.size()));
    counts->set("pairs_covered_once", static_cast<std::int64_t>(n * (n - 1) / 2));
  }
  return cfg;
}

/// Histogram of C-plane incidences over the affine points of PG(4, q).
inline void verify_axiom3(const BruckBoseFrame& frame, const CConfiguration& cfg, Counts* counts = nullptr) {
  const ProjectiveSpace& pg4 = frame.pg4();
  const unsigned q = frame.q();
  std::vector<std::uint16_t> on(pg4.point_count(), 0);
  for (const auto& cp : cfg.planes) pg4.for_each_point(cp.plane, [&](const ProjPoint& x) { ++on[pg4.id_of(x)]; });
  std::vector<char> is_c(pg4.point_count(), 0);
  for (const auto& p : cfg.points) is_c[pg4.id_of(p)] = 1;
  std::map<unsigned, std::int64_t> hist;
  std::int64_t affine = 0;
  for (PointId id = 0; id < pg4.point_count(); ++id) {
    const ProjPoint x = pg4.point_at(id);
    if (x[4] == 0) continue;
    ++affine;
    if (is_c[id]) {
      if (on[id] != q + 1) {
        throw AxiomA3Violation("C-point lies on " + std::to_string(on[id]) + " C-planes", x.to_string());
      }
      continue;
    }
    if (on[id] != 0 && on[id] != 2) {
      throw AxiomA3Violation("affine point off C lies on " + std::to_string(on[id]) + " C-planes", x.to_string());
    }
    ++hist[on[id]];
  }
  if (counts) {
    counts->set("affine_points", affine);
    counts->set("c_points_on_q_plus_1", static_cast<std::int64_t>(cfg.points.size()));
    counts->set("off_c_on_0", hist[0]);
    counts->set("off_c_on_2", hist[2]);
  }
}

/// Partition into classes of pairwise C-point-disjoint planes.
inline void parallel_classes(const BruckBoseFrame& frame, CConfiguration& cfg, Counts* counts = nullptr) {
  const unsigned q = frame.q();
  const std::size_t np = cfg.planes.size();
  constexpr std::uint32_t unset = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> cls(np, unset);
  cfg.classes.clear();
  for (std::size_t i = 0; i < np; ++i) {
    if (cls[i] != unset) continue;
    const auto c = static_cast<std::uint32_t>(cfg.classes.size());
    cfg.classes.push_back({static_cast<std::uint32_t>(i)});
    cls[i] = c;
    for (std::size_t j = i + 1; j < np; ++j) {
      if (detail::shared_members(cfg.planes[i].members, cfg.planes[j].members) == 0) {
        if (cls[j] != unset) {
          throw StructureViolation("C-point-disjoint planes fall in different classes",
                                   cfg.planes[i].plane.to_string() + "|" + cfg.planes[j].plane.to_string());
        }
        cls[j] = c;
        cfg.classes.back().push_back(static_cast<std::uint32_t>(j));
      }
    }
  }
  std::int64_t same = 0, cross = 0;
  for (std::size_t i = 0; i < np; ++i) {
    cfg.planes[i].cls = cls[i];
    for (std::size_t j = i + 1; j < np; ++j) {
      const std::size_t s = detail::shared_members(cfg.planes[i].members, cfg.planes[j].members);
      const bool same_class = cls[i] == cls[j];
      if ((same_class && s != 0) || (!same_class && s != 1)) {
        throw StructureViolation(std::string(same_class ? "same-class" : "cross-class") + " planes share " +
                                     std::to_string(s) + " C-points",
                                 cfg.planes[i].plane.to_string() + "|" + cfg.planes[j].plane.to_string());
      }
      ++(same_class ? same : cross);
    }
  }
  if (cfg.classes.size() != q + 1) {
    throw StructureViolation("found " + std::to_string(cfg.classes.size()) + " parallel classes, expected q+1");
  }
  for (const auto& c : cfg.classes) {
    if (c.size() != q) {
      throw StructureViolation("parallel class of size " + std::to_string(c.size()), cfg.planes[c[0]].plane.to_string());
    }
  }
  if (counts) {
    counts->set("classes", static_cast<std::int64_t>(cfg.classes.size()));
    counts->set("class_size", q);
    counts->set("same_class_pairs", same);
    counts->set("cross_class_pairs", cross);
  }
}

/// Completes each C-plane's arc to a conic, records its point at infinity and
/// C-line, and classifies the points of Σ∞ by the C-lines through them.
inline SigmaClassification infinity_data(const BruckBoseFrame& frame, CConfiguration& cfg, const ReconOptions& opt = {},
                                         Counts* counts = nullptr) {
  const ProjectiveSpace& pg4 = frame.pg4();
  const ProjectiveSpace& sigma = frame.sigma();
  const unsigned q = frame.q();
  const ProjectiveSpace local(frame.ext().base_ptr(), 2);

  for (auto& cp : cfg.planes) {
    std::vector<ProjPoint> arc;
    for (auto k : cp.members) arc.push_back(detail::to_local(pg4, local, cp.plane, cfg.points[k]));
    ProjPoint extra;
    try {
      extra = complete_q_arc(local, arc);
    } catch (const Error& e) {
      throw StructureViolation(std::string("C-plane arc does not complete to a conic: ") + e.what(), cp.plane.to_string());
    }
    const ProjPoint x = detail::from_local(pg4, cp.plane, extra);
    if (x[4] != 0) throw StructureViolation("completing point of a C-plane is affine", cp.plane.to_string());
    cp.pi_inf = frame.drop(x);
    const auto at_inf = pg4.meet(cp.plane, frame.sigma_inf());
    if (!at_inf || at_inf->rank() != 2) throw StructureViolation("C-plane does not meet Σ∞ in a line", cp.plane.to_string());
    cp.cline = frame.drop(*at_inf);
    if (!sigma.contains(cp.cline, cp.pi_inf)) throw StructureViolation("∞-point is off the C-line", cp.plane.to_string());
    arc.push_back(extra);
    cp.local_form = conic_through_5(local, std::span<const ProjPoint>(arc).first(5));
  }

  for (const auto& c : cfg.classes) {
    for (std::size_t a = 0; a < c.size(); ++a) {
      const CPlane& pa = cfg.planes[c[a]];
      for (std::size_t b = a + 1; b < c.size(); ++b) {
        const CPlane& pb = cfg.planes[c[b]];
        const auto m = pg4.meet(pa.plane, pb.plane);
        if (pa.pi_inf != pb.pi_inf || !m || m->rank() != 1 || pg4.point(m->row(0)) != frame.lift(pa.pi_inf)) {
          throw StructureViolation("planes of one class do not meet exactly in a common ∞-point",
                                   pa.plane.to_string() + "|" + pb.plane.to_string());
        }
      }
    }
  }

  std::int64_t line_meets = 0, point_meets = 0, three_spaces = 0;
  if (opt.full_checks) {
    const std::size_t np = cfg.planes.size();
    for (std::size_t i = 0; i < np; ++i) {
      const CPlane& a = cfg.planes[i];
      for (std::size_t j = i + 1; j < np; ++j) {
        const CPlane& b = cfg.planes[j];
        if (a.cls == b.cls) continue;
        const auto m = pg4.meet(a.plane, b.plane);
        const std::string w = a.plane.to_string() + "|" + b.plane.to_string();
        if (!m || m->rank() > 2) throw StructureViolation("C-planes meet in neither a point nor a line", w);
        if (m->rank() == 1) {
          ++point_meets;
          continue;
        }
        ++line_meets;
        if (detail::count_inside(pg4, *m, cfg.points) != 1) throw StructureViolation("C-planes meet in a line without exactly one C-point", w);
        if (a.pi_inf != b.pi_inf) throw StructureViolation("C-planes spanning a 3-space have different ∞-points", w);
        const Subspace solid = pg4.span(a.plane, b.plane);
        ++three_spaces;
        if (detail::count_inside(pg4, solid, cfg.points) != 2 * q - 1) {
          throw StructureViolation("3-space spanned by two C-planes holds extra C-points", solid.to_string());
        }
        for (std::size_t k = 0; k < np; ++k) {
          if (k != i && k != j && pg4.contains(solid, cfg.planes[k].plane)) {
            throw StructureViolation("3-space contains three C-planes", solid.to_string());
          }
        }
      }
    }
  }

  SigmaClassification sc;
  const std::size_t ns = sigma.point_count();
  sc.label.assign(ns, SigmaLabel::zero_point);
  sc.clines_through.assign(ns, {});
  std::unordered_set<Subspace, SubspaceHash> distinct_lines;
  for (std::uint32_t i = 0; i < cfg.planes.size(); ++i) {
    distinct_lines.insert(cfg.planes[i].cline);
    sigma.for_each_point(cfg.planes[i].cline, [&](const ProjPoint& p) { sc.clines_through[sigma.id_of(p)].push_back(i); });
  }
  if (distinct_lines.size() != cfg.planes.size()) {
    throw StructureViolation("two C-planes share a C-line");
  }
  std::set<PointId> pinfs;
  for (const auto& cp : cfg.planes) pinfs.insert(sigma.id_of(cp.pi_inf));
  for (PointId id = 0; id < ns; ++id) {
    const std::size_t k = sc.clines_through[id].size();
    if (k == 0) {
      sc.zero_points.push_back(id);
    } else if (k == 1) {
      sc.label[id] = SigmaLabel::one_line_point;
      ++sc.one_line_points;
    } else {
      sc.label[id] = SigmaLabel::infinity_point;
      sc.infinity_points.push_back(id);
      if (k != 2 * q) {
        throw StructureViolation("∞-point lies on " + std::to_string(k) + " C-lines", sigma.point_at(id).to_string());
      }
      std::set<std::uint32_t> cls;
      for (auto pi : sc.clines_through[id]) cls.insert(cfg.planes[pi].cls);
      if (cls.size() != 2) {
        throw StructureViolation("∞-point is shared by " + std::to_string(cls.size()) + " parallel classes",
                                 sigma.point_at(id).to_string());
      }
    }
  }
  if (std::set<PointId>(sc.infinity_points.begin(), sc.infinity_points.end()) != pinfs) {
    throw StructureViolation("points on several C-lines differ from the C-planes' ∞-points");
  }
  const std::size_t half = (q + 1) / 2;
  const std::size_t one_line = static_cast<std::size_t>(q) * q * q + static_cast<std::size_t>(q) * q;
  if (sc.infinity_points.size() != half || sc.zero_points.size() != half || sc.one_line_points != one_line) {
    throw StructureViolation("Σ∞ classification " + std::to_string(sc.infinity_points.size()) + "/" +
                             std::to_string(sc.zero_points.size()) + "/" + std::to_string(sc.one_line_points) +
                             " differs from (q+1)/2, (q+1)/2, q^3+q^2");
  }
  if (counts) {
    counts->set("infinity_points", static_cast<std::int64_t>(sc.infinity_points.size()));
    counts->set("zero_points", static_cast<std::int64_t>(sc.zero_points.size()));
    counts->set("one_line_points", static_cast<std::int64_t>(sc.one_line_points));
    counts->set("clines", static_cast<std::int64_t>(distinct_lines.size()));
    counts->set("clines_per_infinity_point", 2 * q);
    if (opt.full_checks) {
      counts->set("cross_pairs_meeting_in_point", point_meets);
      counts->set("cross_pairs_meeting_in_line", line_meets);
      counts->set("three_spaces_checked", three_spaces);
    }
  }
  return sc;
}

/// The line of Σ∞ carrying the ∞-points and the 0-points.
inline Subspace t_infinity(const BruckBoseFrame& frame, const CConfiguration& cfg, const SigmaClassification& sc,
                           const ReconOptions& opt = {}, Counts* counts = nullptr) {
  const ProjectiveSpace& sigma = frame.sigma();
  const ProjectiveSpace& pg4 = frame.pg4();
  const unsigned q = frame.q();
  std::vector<ProjPoint> special;
  for (auto id : sc.infinity_points) special.push_back(sigma.point_at(id));
  for (auto id : sc.zero_points) special.push_back(sigma.point_at(id));
  std::sort(special.begin(), special.end(), [&](const ProjPoint& a, const ProjPoint& b) { return sigma.id_of(a) < sigma.id_of(b); });
  const Subspace t = sigma.span(special);
  if (t.rank() != 2 || special.size() != q + 1) {
    throw NotCollinear("∞-points and 0-points span a subspace of rank " + std::to_string(t.rank()), detail::join_points(special));
  }

  for (const auto& cp : cfg.planes) {
    const auto m = sigma.meet(t, cp.cline);
    if (!m || m->rank() != 1 || sigma.point(m->row(0)) != cp.pi_inf) {
      throw StructureViolation("C-line does not meet t∞ in its ∞-point", cp.cline.to_string());
    }
  }

  const Quotient through(pg4, frame.lift(t));
  std::set<PointId> hit;
  for (const auto& p : cfg.points) {
    if (!hit.insert(*through.image_id(p)).second) {
      throw StructureViolation("affine plane through t∞ holds two C-points", through.join(p).to_string());
    }
  }

  const Quotient pencil(sigma, t);
  std::map<PointId, std::vector<std::uint32_t>> groups;
  for (std::uint32_t i = 0; i < cfg.planes.size(); ++i) {
    const Subspace& l = cfg.planes[i].cline;
    auto img = pencil.image_id(l.row(0));
    if (!img) img = pencil.image_id(l.row(1));
    groups[*img].push_back(i);
  }
  if (groups.size() != q + 1) throw StructureViolation("C-lines do not fill the q+1 planes through t∞");
  for (const auto& [img, members] : groups) {
    const CPlane& first = cfg.planes[members[0]];
    if (members.size() != q) {
      throw StructureViolation("plane through t∞ holds " + std::to_string(members.size()) + " C-lines",
                               pencil.join(first.cline.row(0)).to_string());
    }
    for (auto i : members) {
      if (cfg.planes[i].pi_inf != first.pi_inf || cfg.planes[i].cls != first.cls) {
        throw StructureViolation("C-lines in a plane through t∞ do not share a class", pencil.join(first.cline.row(0)).to_string());
      }
    }
  }
  (void)opt;
  if (counts) {
    counts->set("special_points", static_cast<std::int64_t>(special.size()));
    counts->set("clines_meeting_tinf", static_cast<std::int64_t>(cfg.planes.size()));
    counts->set("affine_planes_through_tinf_with_one_c_point", static_cast<std::int64_t>(hit.size()));
    counts->set("planes_through_tinf", static_cast<std::int64_t>(groups.size()));
  }
  return t;
}

/// Point where the tangent at C-point `a` to the conic of C-plane `pi` meets Σ∞.
inline ProjPoint tangent_trace_point(const BruckBoseFrame& frame, const CConfiguration& cfg, std::size_t pi, std::size_t a) {
  const ProjectiveSpace& pg4 = frame.pg4();
  const Field& f = frame.base();
  const ProjectiveSpace local(frame.ext().base_ptr(), 2);
  const CPlane& cp = cfg.planes[pi];
  const ProjPoint la = detail::to_local(pg4, local, cp.plane, cfg.points[a]);
  const Vec3 tangent = tangent_dual(local, cp.local_form, la);
  const Vec3 at_inf{cp.plane.row(0)[4], cp.plane.row(1)[4], cp.plane.row(2)[4]};
  const Vec3 x = mat3::cross(f, tangent, at_inf);
  if (x == Vec3{0, 0, 0}) throw TangentDegenerate("tangent lies in Σ∞", cp.plane.to_string());
  const ProjPoint px = detail::from_local(pg4, cp.plane, local.point({x[0], x[1], x[2]}));
  const ProjPoint trace = frame.drop(px);
  if (!frame.sigma().contains(cp.cline, trace)) throw TangentDegenerate("tangent trace is off the C-line", cp.plane.to_string());
  return trace;
}

/// The line t_A through the tangent traces of C-point `a`.
inline Subspace tangent_trace(const BruckBoseFrame& frame, const CConfiguration& cfg, std::size_t a, const Subspace& t_inf) {
  const ProjectiveSpace& sigma = frame.sigma();
  std::vector<ProjPoint> traces;
  for (auto pi : cfg.planes_through[a]) traces.push_back(tangent_trace_point(frame, cfg, pi, a));
  std::vector<ProjPoint> sorted = traces;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw TangentDegenerate("two C-planes give the same tangent trace", cfg.points[a].to_string());
  }
  const Subspace t = sigma.span(traces);
  if (t.rank() != 2 || traces.size() != frame.q() + 1) {
    throw NotCollinear("tangent traces of a C-point are not collinear", cfg.points[a].to_string());
  }
  if (sigma.meet(t, t_inf)) throw SpreadViolation("t_A meets t∞", cfg.points[a].to_string());
  return t;
}

inline std::vector<Subspace> tangent_traces(const BruckBoseFrame& frame, const CConfiguration& cfg, const Subspace& t_inf,
                                            const ReconOptions& opt = {}, Counts* counts = nullptr) {
  const ProjectiveSpace& sigma = frame.sigma();
  const ProjectiveSpace& pg4 = frame.pg4();
  std::vector<Subspace> t(cfg.size());
  for (std::size_t a = 0; a < cfg.size(); ++a) t[a] = tangent_trace(frame, cfg, a, t_inf);
  if (opt.full_checks) {
    for (std::size_t a = 0; a < cfg.size(); ++a) {
      for (std::uint32_t pi = 0; pi < cfg.planes.size(); ++pi) {
        const bool meets = sigma.meet(t[a], cfg.planes[pi].cline).has_value();
        const bool holds = std::binary_search(cfg.planes[pi].members.begin(), cfg.planes[pi].members.end(),
                                              static_cast<std::uint32_t>(a));
        if (meets != holds) {
          throw StructureViolation(holds ? "C-plane through A misses t_A" : "C-plane meeting t_A misses A",
                                   cfg.planes[pi].plane.to_string());
        }
      }
      const Subspace plane = pg4.span(frame.lift(t[a]), cfg.points[a]);
      if (detail::count_inside(pg4, plane, cfg.points) != 1) {
        throw StructureViolation("plane <t_A, A> holds another C-point", plane.to_string());
      }
    }
  }
  if (counts) {
    counts->set("tangent_traces", static_cast<std::int64_t>(cfg.size()));
    counts->set("trace_points_per_line", frame.q() + 1);
  }
  return t;
}

/// Owner line of each PG(3) point; throws unless the lines partition the space.
inline std::vector<std::uint32_t> spread_owner(const ProjectiveSpace& sigma, const std::vector<Subspace>& lines) {
  constexpr std::uint32_t none = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> owner(sigma.point_count(), none);
  for (std::uint32_t i = 0; i < lines.size(); ++i) {
    if (lines[i].rank() != 2) throw SpreadViolation("spread member is not a line", lines[i].to_string());
    sigma.for_each_point(lines[i], [&](const ProjPoint& p) {
      auto& o = owner[sigma.id_of(p)];
      if (o != none) throw SpreadViolation("spread lines meet", lines[o].to_string() + "|" + lines[i].to_string());
      o = i;
    });
  }
  for (PointId id = 0; id < owner.size(); ++id) {
    if (owner[id] == none) throw SpreadViolation("point of Σ∞ on no spread line", sigma.point_at(id).to_string());
  }
  return owner;
}

inline Spread assemble_spread(const BruckBoseFrame& frame, const CConfiguration& cfg, const std::vector<Subspace>& t,
                              const Subspace& t_inf, const ReconOptions& opt = {}, Counts* counts = nullptr) {
  const ProjectiveSpace& sigma = frame.sigma();
  const ProjectiveSpace& pg4 = frame.pg4();
  const unsigned q = frame.q();
  Spread s;
  s.lines = t;
  s.lines.push_back(t_inf);
  s.distinguished = t.size();
  for (std::size_t a = 0; a < t.size(); ++a) s.source.push_back(static_cast<std::int64_t>(a));
  s.source.push_back(-1);
  if (s.lines.size() != static_cast<std::size_t>(q) * q + 1) throw SpreadViolation("wrong number of spread lines");
  const auto owner = spread_owner(sigma, s.lines);

  std::int64_t meeting = 0, compatible = 0, checked_planes = 0;
  if (opt.full_checks) {
    std::unordered_set<Subspace, SubspaceHash> clines;
    for (const auto& cp : cfg.planes) clines.insert(cp.cline);
    std::vector<Subspace> candidates;
    sigma.for_each_subspace(1, [&](const Subspace& l) {
      if (l == t_inf) return;
      const auto m = sigma.meet(l, t_inf);
      if (m) candidates.push_back(l);
    });
    meeting = static_cast<std::int64_t>(candidates.size());
    struct Tally {
      std::int64_t compatible = 0, planes = 0;
    };
    const auto tallies = parallel_chunks(candidates.size(), opt.threads, [&](std::size_t, std::size_t b, std::size_t e) {
      Tally tally;
      for (std::size_t i = b; i < e; ++i) {
        const Subspace& l = candidates[i];
        std::vector<std::size_t> met;
        sigma.for_each_point(l, [&](const ProjPoint& p) {
          const auto o = owner[sigma.id_of(p)];
          if (o != s.distinguished) met.push_back(o);
        });
        if (met.size() != q) throw StructureViolation("line through t∞ meets a spread line twice", l.to_string());
        const auto pi = cfg.plane_of(met[0], met[1]);
        for (auto a : met) {
          if (!std::binary_search(cfg.planes[pi].members.begin(), cfg.planes[pi].members.end(), static_cast<std::uint32_t>(a))) {
            throw StructureViolation("C-points of the spread lines met by a line through t∞ are not on one C-plane",
                                     l.to_string());
          }
        }
        if (clines.count(l)) continue;
        const Subspace lifted = frame.lift(l);
        const auto load = detail::plane_load(pg4, lifted, cfg.points);
        if (load.max > 2) throw StructureViolation("affine plane through a line meeting t∞ holds three C-points", load.fullest->to_string());
        ++tally.compatible;
        for (auto a : met) {
          const Subspace plane = pg4.span(lifted, cfg.points[a]);
          ++tally.planes;
          if (detail::count_inside(pg4, plane, cfg.points) != 1) {
            throw StructureViolation("plane <A, l> holds a second C-point", plane.to_string());
          }
        }
      }
      return tally;
    });
    for (const auto& t2 : tallies) {
      compatible += t2.compatible;
      checked_planes += t2.planes;
    }
  }
  if (counts) {
    counts->set("spread_lines", static_cast<std::int64_t>(s.lines.size()));
    counts->set("covered_points", static_cast<std::int64_t>(owner.size()));
    counts->set("skew_pairs", static_cast<std::int64_t>(s.lines.size() * (s.lines.size() - 1) / 2));
    if (opt.full_checks) {
      counts->set("lines_meeting_tinf", meeting);
      counts->set("arc_compatible_lines_meeting_tinf", compatible);
      counts->set("single_point_planes_checked", checked_planes);
    }
  }
  return s;
}

// ---- reguli and regularity ---------------------------------------------

/// Through each point of `a`, the line meeting `b` and `c`; sorted.
inline std::vector<Subspace> transversals(const ProjectiveSpace& s3, const Subspace& a, const Subspace& b, const Subspace& c) {
  std::vector<Subspace> out;
  s3.for_each_point(a, [&](const ProjPoint& p) {
    const auto r = s3.meet(s3.span(b, p), c);
    if (!r || r->rank() != 1) throw NotSkew("no unique transversal", a.to_string() + "|" + b.to_string() + "|" + c.to_string());
    out.push_back(s3.span({p, s3.point(r->row(0))}));
  });
  std::sort(out.begin(), out.end());
  return out;
}

inline Regulus regulus_from(const ProjectiveSpace& s3, const Subspace& l1, const Subspace& l2, const Subspace& l3) {
  if (s3.n() != 3) throw AmbientMismatch("reguli live in PG(3,q)");
  const std::array<const Subspace*, 3> ls{&l1, &l2, &l3};
  for (std::size_t i = 0; i < 3; ++i) {
    if (ls[i]->rank() != 2) throw NotSkew("not a line", ls[i]->to_string());
    for (std::size_t j = i + 1; j < 3; ++j) {
      if (s3.meet(*ls[i], *ls[j])) throw NotSkew("lines meet", ls[i]->to_string() + "|" + ls[j]->to_string());
    }
  }
  Regulus r;
  r.opposite = transversals(s3, l1, l2, l3);
  r.lines = transversals(s3, r.opposite[0], r.opposite[1], r.opposite[2]);
  const std::size_t want = s3.q() + 1;
  auto distinct = [](const std::vector<Subspace>& v) { return std::adjacent_find(v.begin(), v.end()) == v.end(); };
  if (r.opposite.size() != want || r.lines.size() != want || !distinct(r.opposite) || !distinct(r.lines)) {
    throw StructureViolation("regulus families have the wrong size");
  }
  for (const auto* l : ls) {
    if (!std::binary_search(r.lines.begin(), r.lines.end(), *l)) throw StructureViolation("regulus misses a defining line", l->to_string());
  }
  return r;
}

/// For every pair of non-distinguished lines, whether the regulus they
/// span with the distinguished line lies in the spread.
inline ClosureReport regulus_closure(const ProjectiveSpace& sigma, const Spread& s, unsigned threads = 1) {
  std::unordered_map<Subspace, std::uint32_t, SubspaceHash> index;
  for (std::uint32_t i = 0; i < s.lines.size(); ++i) index.emplace(s.lines[i], i);
  std::vector<std::uint32_t> others;
  for (std::uint32_t i = 0; i < s.lines.size(); ++i) {
    if (i != s.distinguished) others.push_back(i);
  }
  struct Part {
    std::size_t pairs = 0, passes = 0;
    std::vector<std::pair<std::vector<std::uint32_t>, Regulus>> found;
    std::optional<std::array<std::size_t, 2>> failure;
    std::string witness;
  };
  const auto parts = parallel_chunks(others.size(), threads, [&](std::size_t, std::size_t b, std::size_t e) {
    Part part;
    std::set<std::vector<std::uint32_t>> seen;
    for (std::size_t x = b; x < e; ++x) {
      for (std::size_t y = x + 1; y < others.size(); ++y) {
        ++part.pairs;
        Regulus r = regulus_from(sigma, s.t_inf(), s.lines[others[x]], s.lines[others[y]]);
        std::vector<std::uint32_t> key;
        bool inside = true;
        for (const auto& l : r.lines) {
          auto it = index.find(l);
          if (it == index.end()) {
            inside = false;
            if (!part.failure) {
              part.failure = std::array<std::size_t, 2>{others[x], others[y]};
              part.witness = l.to_string();
            }
            break;
          }
          key.push_back(it->second);
        }
        if (!inside) continue;
        ++part.passes;
        std::sort(key.begin(), key.end());
        if (seen.insert(key).second) part.found.emplace_back(std::move(key), std::move(r));
      }
    }
    return part;
  });
  ClosureReport rep;
  std::set<std::vector<std::uint32_t>> seen;
  for (const auto& part : parts) {
    rep.pairs += part.pairs;
    rep.passes += part.passes;
    if (!rep.first_failure && part.failure) {
      rep.first_failure = part.failure;
      rep.witness = part.witness;
    }
    for (const auto& [key, r] : part.found) {
      if (seen.insert(key).second) rep.reguli.push_back(r);
    }
  }
  return rep;
}

/// Every regulus spanned by three lines of the spread lies in it.
inline bool is_regular_by_reguli(const ProjectiveSpace& sigma, const std::vector<Subspace>& lines) {
  std::unordered_set<Subspace, SubspaceHash> in(lines.begin(), lines.end());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      for (std::size_t k = j + 1; k < lines.size(); ++k) {
        const Regulus r = regulus_from(sigma, lines[i], lines[j], lines[k]);
        for (const auto& l : r.lines) {
          if (!in.count(l)) return false;
        }
      }
    }
  }
  return true;
}

/// Plücker coordinates in the order p01, p02, p03, p12, p13, p23.
inline Coords plucker(const Field& f, const Subspace& line) {
  const Coords& u = line.row(0);
  const Coords& v = line.row(1);
  auto p = [&](int i, int j) { return f.sub(f.mul(u[i], v[j]), f.mul(u[j], v[i])); };
  return Coords{p(0, 1), p(0, 2), p(0, 3), p(1, 2), p(1, 3), p(2, 3)};
}

/// p01 p23 - p02 p13 + p03 p12.
inline Elem klein_form(const Field& f, const Coords& p) {
  return f.add(f.sub(f.mul(p[0], p[5]), f.mul(p[1], p[4])), f.mul(p[2], p[3]));
}

inline KleinImage klein_regularity(const ProjectiveSpace& sigma, const std::vector<Subspace>& lines) {
  const Field& f = sigma.field();
  const ProjectiveSpace pg5(sigma.field_ptr(), 5);
  const std::size_t want = static_cast<std::size_t>(sigma.q()) * sigma.q() + 1;
  KleinImage k;
  for (const auto& l : lines) {
    const Coords p = plucker(f, l);
    k.on_quadric = k.on_quadric && klein_form(f, p) == 0;
    k.image.push_back(pg5.point(p));
  }
  k.span = pg5.span(k.image);
  if (k.span.rank() == 4) {
    std::vector<char> in_image(pg5.point_count(), 0);
    for (const auto& p : k.image) in_image[pg5.id_of(p)] = 1;
    std::vector<PointId> section;
    std::vector<char> in_section(pg5.point_count(), 0);
    pg5.for_each_point(k.span, [&](const ProjPoint& p) {
      if (klein_form(f, p.coords()) == 0) {
        section.push_back(pg5.id_of(p));
        in_section[section.back()] = 1;
      }
    });
    k.section_size = section.size();
    std::size_t image_hits = 0;
    for (auto id : section) image_hits += in_image[id] ? 1 : 0;
    k.section_is_image = image_hits == section.size() && section.size() == k.image.size();
    k.cap = true;
    for (std::size_t i = 0; i < section.size() && k.cap; ++i) {
      const ProjPoint a = pg5.point_at(section[i]);
      for (std::size_t j = i + 1; j < section.size() && k.cap; ++j) {
        std::size_t on = 0;
        pg5.for_each_point(pg5.span({a, pg5.point_at(section[j])}), [&](const ProjPoint& x) { on += in_section[pg5.id_of(x)]; });
        k.cap = on == 2;
      }
    }
  }
  k.regular = k.on_quadric && k.span.rank() == 4 && k.section_is_image && k.section_size == want && k.cap &&
              lines.size() == want;
  return k;
}

/// Replaces the first regulus of the spread (in index-triple order) that
/// avoids the distinguished line by its opposite regulus.
inline Spread hall_perturbation(const ProjectiveSpace& sigma, const Spread& s, Regulus* replaced = nullptr) {
  std::unordered_map<Subspace, std::size_t, SubspaceHash> index;
  for (std::size_t i = 0; i < s.lines.size(); ++i) index.emplace(s.lines[i], i);
  const std::size_t n = s.lines.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = j + 1; k < n; ++k) {
        if (i == s.distinguished || j == s.distinguished || k == s.distinguished) continue;
        const Regulus r = regulus_from(sigma, s.lines[i], s.lines[j], s.lines[k]);
        std::vector<std::size_t> pos;
        for (const auto& l : r.lines) {
          auto it = index.find(l);
          if (it == index.end() || it->second == s.distinguished) break;
          pos.push_back(it->second);
        }
        if (pos.size() != r.lines.size()) continue;
        std::sort(pos.begin(), pos.end());
        Spread out = s;
        for (std::size_t m = 0; m < pos.size(); ++m) {
          out.lines[pos[m]] = r.opposite[m];
          out.source[pos[m]] = -2;
        }
        if (replaced) *replaced = r;
        return out;
      }
    }
  }
  throw RegularityViolation("spread has no regulus avoiding the distinguished line");
}

// ---- the rebuilt plane -------------------------------------------------

/// Projectivity of PG(3, q) (row vectors, v -> v m) taking a regular spread
/// onto the frame's regular spread with the distinguished line going to the
/// vertical line. When the spread already is the frame's, m is semilinear
/// over GF(q^2) and induces x -> sigma(x) n on GF(q^2)^2.
struct Alignment {
  detail::SqMat<4> m{};
  std::optional<bool> frobenius;  // set when m is GF(q^2)-semilinear
  std::array<std::array<Elem, 2>, 2> n{};
};

inline Alignment align_to_regular(const BruckBoseFrame& frame, const Spread& s) {
  const Field& f = frame.base();
  const Field& e = frame.big();
  const QuadExtension& ext = frame.ext();
  using M2 = detail::SqMat<2>;
  using M4 = detail::SqMat<4>;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < s.lines.size(); ++i) {
    if (i != s.distinguished) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.lines[a] < s.lines[b]; });
  const Subspace& l0 = s.lines[order[0]];
  const Subspace& linf = s.t_inf();
  M4 basis{};
  for (std::size_t j = 0; j < 4; ++j) {
    basis[0][j] = l0.row(0)[j];
    basis[1][j] = l0.row(1)[j];
    basis[2][j] = linf.row(0)[j];
    basis[3][j] = linf.row(1)[j];
  }
  const M4 binv = detail::mat_inverse<4>(f, basis);
  auto graph = [&](const Subspace& l) {
    M2 x{}, y{};
    for (std::size_t r = 0; r < 2; ++r) {
      const std::array<Elem, 4> row{l.row(r)[0], l.row(r)[1], l.row(r)[2], l.row(r)[3]};
      const auto c = detail::row_times<4>(f, row, binv);
      x[r] = {c[0], c[1]};
      y[r] = {c[2], c[3]};
    }
    return detail::mat_mul<2>(f, detail::mat_inverse<2>(f, x), y);
  };
  const M2 t1inv = detail::mat_inverse<2>(f, graph(s.lines[order[1]]));
  const M2 id = detail::mat_identity<2>();
  std::optional<M2> w;
  for (std::size_t i = 1; i < order.size(); ++i) {
    const M2 t = detail::mat_mul<2>(f, graph(s.lines[order[i]]), t1inv);
    const M2 sq = detail::mat_mul<2>(f, t, t);
    bool root = true;
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < 2; ++c) {
        root = root && sq[r][c] == f.add(f.mul(ext.s(), t[r][c]), f.mul(ext.t(), id[r][c]));
      }
    }
    if (root && (!w || t < *w)) w = t;
  }
  if (!w) throw StructureViolation("spread set has no root of the extension polynomial");
  const M2 p{std::array<Elem, 2>{1, 0}, std::array<Elem, 2>{(*w)[0][0], (*w)[0][1]}};
  const M2 pinv = detail::mat_inverse<2>(f, p);
  const M2 lower = detail::mat_mul<2>(f, t1inv, pinv);
  M4 block{};
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 2; ++c) {
      block[r][c] = pinv[r][c];
      block[r + 2][c + 2] = lower[r][c];
    }
  }
  Alignment al;
  al.m = detail::mat_mul<4>(f, binv, block);

  const ProjectiveSpace& sigma = frame.sigma();
  const std::size_t vertical = static_cast<std::size_t>(frame.q()) * frame.q();
  for (std::size_t i = 0; i < s.lines.size(); ++i) {
    std::array<Coords, 2> rows{};
    for (std::size_t r = 0; r < 2; ++r) {
      const std::array<Elem, 4> row{s.lines[i].row(r)[0], s.lines[i].row(r)[1], s.lines[i].row(r)[2], s.lines[i].row(r)[3]};
      const auto img = detail::row_times<4>(f, row, al.m);
      rows[r] = Coords{img[0], img[1], img[2], img[3]};
    }
    const auto idx = frame.spread_index(sigma.subspace(rows));
    if (!idx || ((i == s.distinguished) != (*idx == vertical))) {
      throw StructureViolation("alignment does not carry the spread onto the regular spread", s.lines[i].to_string());
    }
  }

  auto image_pair = [&](std::size_t row) {
    return std::array<Elem, 2>{ext.compose(al.m[row][0], al.m[row][1]), ext.compose(al.m[row][2], al.m[row][3])};
  };
  const Elem om = ext.omega();
  const Elem omq = ext.frobenius(om);
  std::optional<bool> frob;
  for (std::size_t b = 0; b < 2; ++b) {
    const auto v = image_pair(2 * b);
    const auto wv = image_pair(2 * b + 1);
    const bool lin = wv[0] == e.mul(om, v[0]) && wv[1] == e.mul(om, v[1]);
    const bool semi = wv[0] == e.mul(omq, v[0]) && wv[1] == e.mul(omq, v[1]);
    if ((!lin && !semi) || (frob && *frob != !lin)) return al;
    frob = !lin;
    al.n[b] = v;
  }
  al.frobenius = frob;
  return al;
}

inline ProjPoint apply_alignment(const BruckBoseFrame& frame, const Alignment& al, const ProjPoint& x) {
  const std::array<Elem, 4> v{x[0], x[1], x[2], x[3]};
  const auto img = detail::row_times<4>(frame.base(), v, al.m);
  return frame.pg4().point({img[0], img[1], img[2], img[3], x[4]});
}

/// Image of a conic of PG(2, q^2) under the collineation induced by an alignment.
inline QuadraticForm transport_form(const BruckBoseFrame& frame, const Alignment& al, const QuadraticForm& form) {
  const Field& e = frame.big();
  if (!al.frobenius) throw StructureViolation("alignment is not semilinear over GF(q^2)");
  QuadraticForm src = form;
  if (*al.frobenius) {
    for (auto& row : src.m) {
      for (auto& x : row) x = frame.ext().frobenius(x);
    }
  }
  const Mat3 g{Vec3{al.n[0][0], al.n[1][0], 0}, Vec3{al.n[0][1], al.n[1][1], 0}, Vec3{0, 0, 1}};
  return src.transformed(e, g);
}

struct ArcCertificate {
  std::size_t arc_size = 0;
  std::size_t secant_planes_checked = 0;
  std::optional<Alignment> alignment;
  std::optional<QuadraticForm> fitted;  // in PG(2, q^2) after alignment
  std::optional<bool> matches_input;    // transported input conic equals the fit
};

/// Checks C ∪ {T∞} is an arc of the translation plane of the spread; for a
/// regular spread also fits the conic after aligning with the frame.
inline ArcCertificate rebuild_plane_and_certify_arc(const BruckBoseFrame& frame, const std::vector<ProjPoint>& c,
                                                    const Spread& s, bool regular, const QuadraticForm* input = nullptr,
                                                    Counts* counts = nullptr) {
  const ProjectiveSpace& pg4 = frame.pg4();
  const unsigned q = frame.q();
  ArcCertificate cert;
  for (std::size_t i = 0; i < s.lines.size(); ++i) {
    const Subspace lifted = frame.lift(s.lines[i]);
    const auto load = detail::plane_load(pg4, lifted, c);
    cert.secant_planes_checked += static_cast<std::size_t>(q) * q;
    if (load.max > 2) throw NotAnArc("affine plane meets C in " + std::to_string(load.max) + " points", load.fullest->to_string());
    if (i == s.distinguished && (load.max != 1 || load.planes_hit != c.size())) {
      throw NotAnArc("affine plane through t∞ meets C in " + std::to_string(load.max) + " points", load.fullest->to_string());
    }
  }
  cert.arc_size = c.size() + 1;
  if (regular) {
    const Alignment al = align_to_regular(frame, s);
    const ProjectiveSpace& plane = frame.plane();
    std::vector<ProjPoint> arc;
    for (const auto& x : c) arc.push_back(frame.point_up(apply_alignment(frame, al, x)));
    arc.push_back(frame.infinite_point(static_cast<std::size_t>(q) * q));
    if (const auto chk = is_arc_by_secants(plane, arc); !chk.is_arc) {
      throw NotAnArc("aligned point set has three collinear points");
    }
    const QuadraticForm fit = conic_through_5(plane, std::span<const ProjPoint>(arc).first(5));
    for (const auto& p : arc) {
      if (fit.evaluate(frame.big(), p) != 0) throw NotAnArc("arc is not contained in one conic", p.to_string());
    }
    if (conic_points(plane, fit).size() != arc.size()) throw NotAnArc("fitted conic has points outside the arc");
    cert.alignment = al;
    cert.fitted = fit;
    if (input) {
      cert.matches_input = transport_form(frame, al, *input) == fit;
      if (!*cert.matches_input) {
        throw NotAnArc("fitted conic differs from the transported input conic", fit.to_string());
      }
    }
  }
  if (counts) {
    counts->set("arc_points", static_cast<std::int64_t>(cert.arc_size));
    counts->set("secant_planes_checked", static_cast<std::int64_t>(cert.secant_planes_checked));
    counts->set("conic_fit", cert.fitted ? 1 : 0);
    if (cert.alignment && cert.alignment->frobenius) counts->set("alignment_frobenius", *cert.alignment->frobenius ? 1 : 0);
    if (cert.matches_input) counts->set("matches_input_conic", *cert.matches_input ? 1 : 0);
  }
  return cert;
}

// ---- uniqueness --------------------------------------------------------

inline void uniqueness_check(const BruckBoseFrame& frame, const CConfiguration& cfg, const Spread& s,
                             const ClosureReport& closure, const ReconOptions& opt = {}, Counts* counts = nullptr) {
  const ProjectiveSpace& sigma = frame.sigma();
  const ProjectiveSpace& pg4 = frame.pg4();
  std::unordered_set<Subspace, SubspaceHash> in_spread(s.lines.begin(), s.lines.end());
  std::vector<Subspace> outside;
  sigma.for_each_subspace(1, [&](const Subspace& l) {
    if (!in_spread.count(l) && !sigma.meet(l, s.t_inf())) outside.push_back(l);
  });
  const auto bad = parallel_chunks(outside.size(), opt.threads, [&](std::size_t, std::size_t b, std::size_t e) {
    std::optional<Subspace> first;
    for (std::size_t i = b; i < e && !first; ++i) {
      if (detail::plane_load(pg4, frame.lift(outside[i]), cfg.points).max < 3) first = outside[i];
    }
    return first;
  });
  for (const auto& x : bad) {
    if (x) throw UniquenessViolation("line outside the spread lies on no affine plane with three C-points", x->to_string());
  }

  std::unordered_set<Subspace, SubspaceHash> clines;
  for (const auto& cp : cfg.planes) clines.insert(cp.cline);
  std::int64_t exactly_one = 0;
  for (const auto& r : closure.reguli) {
    std::size_t k = 0;
    for (const auto& l : r.opposite) k += clines.count(l);
    if (k == 0) throw UniquenessViolation("opposite regulus contains no C-line", r.lines.front().to_string());
    exactly_one += k == 1 ? 1 : 0;
  }

  std::int64_t compatible = 0;
  for (const auto& l : s.lines) {
    const auto load = detail::plane_load(pg4, frame.lift(l), cfg.points);
    if (load.max > 2) throw UniquenessViolation("spread line lies on an affine plane with three C-points", l.to_string());
    ++compatible;
  }
  if (counts) {
    counts->set("lines_outside_spread_disjoint_from_tinf", static_cast<std::int64_t>(outside.size()));
    counts->set("reguli_through_tinf", static_cast<std::int64_t>(closure.reguli.size()));
    counts->set("opposite_reguli_with_one_cline", exactly_one);
    counts->set("arc_compatible_spread_lines", compatible);
  }
}

// ---- pipeline ----------------------------------------------------------

struct Reconstruction {
  CConfiguration config;
  SigmaClassification sigma;
  Subspace t_inf;
  Spread spread;
  ClosureReport closure;
  KleinImage klein;
  ArcCertificate arc;
};

struct PipelineOptions {
  ReconOptions recon;
  bool exploratory = false;
};

/// Runs the reconstruction stages on `points`. With `forward`, the points are
/// first built from that conic (adding a leading stage) and the result is
/// compared with the conic and the frame's regular spread.
inline PipelineReport run_pipeline(const BruckBoseFrame& frame, std::vector<ProjPoint> points,
                                   const TangentConic* forward, const PipelineOptions& po,
                                   Reconstruction* out = nullptr) {
  PipelineReport rep;
  rep.exploratory = po.exploratory;
  StageRunner run(rep);
  Reconstruction rec;
  const ReconOptions& opt = po.recon;
  const ProjectiveSpace& sigma = frame.sigma();

  if (forward) {
    run.run("forward_build", [&](Counts& c) {
      points = build_C(frame, *forward);
      c.set("c_points", static_cast<std::int64_t>(points.size()));
      c.set("seed", static_cast<std::int64_t>(forward->seed));
    });
  }
  run.run("cplanes", [&](Counts& c) { rec.config = discover_cplanes(frame, points, opt, &c); });
  run.run("axiom3", [&](Counts& c) { verify_axiom3(frame, rec.config, &c); });
  run.run("parallel_classes", [&](Counts& c) { parallel_classes(frame, rec.config, &c); });
  run.run("infinity_data", [&](Counts& c) { rec.sigma = infinity_data(frame, rec.config, opt, &c); });
  run.run("t_infinity", [&](Counts& c) { rec.t_inf = t_infinity(frame, rec.config, rec.sigma, opt, &c); });
  run.run("spread", [&](Counts& c) {
    const auto t = tangent_traces(frame, rec.config, rec.t_inf, opt, &c);
    rec.spread = assemble_spread(frame, rec.config, t, rec.t_inf, opt, &c);
  });
  run.run("regularity", [&](Counts& c) {
    rec.closure = regulus_closure(sigma, rec.spread, opt.threads);
    rec.klein = klein_regularity(sigma, rec.spread.lines);
    c.set("regulus_pairs", static_cast<std::int64_t>(rec.closure.pairs));
    c.set("regulus_passes", static_cast<std::int64_t>(rec.closure.passes));
    c.set("distinct_reguli", static_cast<std::int64_t>(rec.closure.reguli.size()));
    c.set("klein_span_dimension", static_cast<std::int64_t>(rec.klein.span.dimension()));
    c.set("klein_section_size", static_cast<std::int64_t>(rec.klein.section_size));
    c.set("klein_cap", rec.klein.cap ? 1 : 0);
    c.set("klein_regular", rec.klein.regular ? 1 : 0);
    c.set("oracles_agree", rec.klein.regular == rec.closure.closed() ? 1 : 0);
    if (!rec.closure.closed()) {
      throw ClosureViolation("regulus through t∞ leaves the spread", rec.closure.witness);
    }
    if (!rec.klein.regular) throw RegularityViolation("Klein image is not an elliptic quadric section");
    if (opt.full_checks) {
      std::unordered_set<Subspace, SubspaceHash> clines;
      for (const auto& cp : rec.config.planes) clines.insert(cp.cline);
      std::int64_t one = 0;
      for (const auto& r : rec.closure.reguli) {
        std::size_t k = 0;
        for (const auto& l : r.opposite) k += clines.count(l);
        if (k != 1) throw ClosureViolation("opposite regulus holds " + std::to_string(k) + " C-lines", r.lines.front().to_string());
        ++one;
      }
      c.set("opposite_reguli_with_one_cline", one);
    }
  });
  run.run("arc_certificate", [&](Counts& c) {
    rec.arc = rebuild_plane_and_certify_arc(frame, rec.config.points, rec.spread, true, forward ? &forward->form : nullptr, &c);
  });
  run.run("uniqueness", [&](Counts& c) {
    uniqueness_check(frame, rec.config, rec.spread, rec.closure, opt, &c);
    if (forward) {
      std::vector<Subspace> a = rec.spread.lines, b = frame.spread_reg();
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b) throw UniquenessViolation("reconstructed spread differs from the regular spread of the frame");
      const std::size_t expect = frame.infinite_index(forward->p_inf);
      if (frame.spread_index(rec.spread.t_inf()) != expect) {
        throw UniquenessViolation("t∞ is not the spread line of the conic's point at infinity", rec.spread.t_inf().to_string());
      }
      c.set("spread_equals_regular", 1);
    }
  });
  if (out) *out = std::move(rec);
  return rep;
}

}  // namespace bbconic
