#pragma once

// Points, subspaces and incidence in PG(n, F) for n <= 5.
//
// Every subspace is stored by its reduced row-echelon basis (leading ones,
// rows ordered by pivot column), so equality and hashing are structural.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bbconic/bitset.hpp"
#include "bbconic/errors.hpp"
#include "bbconic/galois.hpp"

namespace bbconic {

inline constexpr std::size_t kMaxCoords = 6;
using Coords = std::array<Elem, kMaxCoords>;
using PointId = std::uint32_t;

/// Normalised homogeneous coordinates: first nonzero entry is 1.
class ProjPoint {
 public:
  ProjPoint() = default;

  std::size_t size() const noexcept { return size_; }
  Elem operator[](std::size_t i) const noexcept { return c_[i]; }
  const Coords& coords() const noexcept { return c_; }
  std::span<const Elem> view() const noexcept { return {c_.data(), size_}; }

  std::string to_string() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < size_; ++i) {
      if (i) os << ',';
      os << c_[i];
    }
    return os.str();
  }

  bool operator==(const ProjPoint&) const = default;
  auto operator<=>(const ProjPoint&) const = default;

 private:
  friend class ProjectiveSpace;
  std::uint8_t size_ = 0;
  Coords c_{};
};

/// A projective subspace given by its canonical basis.
class Subspace {
 public:
  Subspace() = default;

  unsigned ambient() const noexcept { return n_; }
  unsigned rank() const noexcept { return rank_; }
  int dimension() const noexcept { return static_cast<int>(rank_) - 1; }
  std::size_t coords() const noexcept { return static_cast<std::size_t>(n_) + 1; }
  const Coords& row(std::size_t i) const noexcept { return rows_[i]; }

  unsigned pivot(std::size_t i) const noexcept {
    unsigned c = 0;
    while (rows_[i][c] == 0) ++c;
    return c;
  }

  /// Rows as comma-separated integers, separated by ';'.
  std::string to_string() const {
    std::ostringstream os;
    for (unsigned r = 0; r < rank_; ++r) {
      if (r) os << ';';
      for (std::size_t c = 0; c <= n_; ++c) {
        if (c) os << ',';
        os << rows_[r][c];
      }
    }
    return os.str();
  }

  bool operator==(const Subspace&) const = default;
  /// Rank first, then the basis read row by row.
  auto operator<=>(const Subspace&) const = default;

  std::size_t hash() const noexcept {
    std::size_t h = 1469598103934665603ULL ^ (static_cast<std::size_t>(n_) << 8 | rank_);
    for (unsigned r = 0; r < rank_; ++r) {
      for (std::size_t c = 0; c <= n_; ++c) {
        h = (h ^ rows_[r][c]) * 1099511628211ULL;
      }
    }
    return h;
  }

 private:
  friend class ProjectiveSpace;
  std::uint8_t rank_ = 0;
  std::uint8_t n_ = 0;
  std::array<Coords, kMaxCoords> rows_{};
};

struct SubspaceHash {
  std::size_t operator()(const Subspace& s) const noexcept { return s.hash(); }
};

enum class AffineKind { contained, meets_in_lower };

struct AffineRelation {
  AffineKind kind;
  std::optional<Subspace> at_infinity;  // s ∩ hyperplane when not contained
};

namespace detail {

inline constexpr std::size_t kMaxRows = 2 * kMaxCoords;
using WorkMatrix = std::array<Coords, kMaxRows>;

/// In-place reduced row-echelon form; returns the rank.
inline unsigned rref(const Field& f, WorkMatrix& m, unsigned rows, unsigned cols) {
  unsigned r = 0;
  for (unsigned c = 0; c < cols && r < rows; ++c) {
    unsigned piv = r;
    while (piv < rows && m[piv][c] == 0) ++piv;
    if (piv == rows) continue;
    if (piv != r) std::swap(m[piv], m[r]);
    const Elem inv = f.inv(m[r][c]);
    if (inv != 1) {
      for (unsigned j = c; j < cols; ++j) m[r][j] = f.mul(m[r][j], inv);
    }
    for (unsigned i = 0; i < rows; ++i) {
      if (i == r) continue;
      const Elem factor = m[i][c];
      if (factor == 0) continue;
      const Elem nf = f.neg(factor);
      for (unsigned j = c; j < cols; ++j) {
        if (m[r][j]) m[i][j] = f.add(m[i][j], f.mul(nf, m[r][j]));
      }
    }
    ++r;
  }
  for (unsigned i = r; i < rows; ++i) m[i].fill(0);
  return r;
}

inline std::uint64_t ipow(std::uint64_t b, unsigned e) {
  std::uint64_t r = 1;
  while (e--) r *= b;
  return r;
}

}  // namespace detail

/// PG(n, F). Cheap to copy (holds a shared field pointer).
class ProjectiveSpace {
 public:
  ProjectiveSpace(FieldPtr field, unsigned n) : field_(std::move(field)), n_(n) {
    if (n_ + 1 > kMaxCoords) throw AmbientMismatch("ambient dimension must be at most 5");
    if (!field_) throw InvalidField("null field");
  }

  const Field& field() const noexcept { return *field_; }
  const FieldPtr& field_ptr() const noexcept { return field_; }
  unsigned n() const noexcept { return n_; }
  unsigned coords() const noexcept { return n_ + 1; }
  unsigned q() const noexcept { return field_->order(); }

  std::uint64_t point_count() const noexcept { return (detail::ipow(q(), n_ + 1) - 1) / (q() - 1); }

  // ---- points ----------------------------------------------------------

  /// Normalises raw coordinates. Throws DegenerateInput for the zero vector.
  ProjPoint point(std::span<const Elem> raw) const {
    if (raw.size() != coords()) throw AmbientMismatch("coordinate count does not match ambient space");
    ProjPoint p;
    p.size_ = static_cast<std::uint8_t>(coords());
    std::size_t lead = 0;
    while (lead < raw.size() && raw[lead] == 0) ++lead;
    if (lead == raw.size()) throw DegenerateInput("zero vector is not a projective point");
    const Elem inv = field_->inv(raw[lead]);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] >= q()) throw InvalidField("coordinate out of range");
      p.c_[i] = field_->mul(raw[i], inv);
    }
    return p;
  }
  ProjPoint point(std::initializer_list<Elem> raw) const {
    return point(std::span<const Elem>(raw.begin(), raw.size()));
  }
  ProjPoint point(const Coords& raw) const { return point(std::span<const Elem>(raw.data(), coords())); }

  /// Rank of the normalised vector in lexicographic order of coordinates.
  PointId id_of(const ProjPoint& p) const noexcept {
    const unsigned qq = q();
    std::size_t lead = 0;
    while (p.c_[lead] == 0) ++lead;
    std::uint64_t offset = (detail::ipow(qq, n_ - static_cast<unsigned>(lead)) - 1) / (qq - 1);
    std::uint64_t rank = 0;
    for (std::size_t i = lead + 1; i <= n_; ++i) rank = rank * qq + p.c_[i];
    return static_cast<PointId>(offset + rank);
  }

  ProjPoint point_at(PointId id) const {
    const unsigned qq = q();
    ProjPoint p;
    p.size_ = static_cast<std::uint8_t>(coords());
    std::uint64_t rest = id;
    for (unsigned lead = n_ + 1; lead-- > 0;) {
      const std::uint64_t block = detail::ipow(qq, n_ - lead);
      if (rest < block) {
        p.c_[lead] = 1;
        for (unsigned i = n_; i > lead; --i) {
          p.c_[i] = static_cast<Elem>(rest % qq);
          rest /= qq;
        }
        return p;
      }
      rest -= block;
    }
    throw AmbientMismatch("point id out of range");
  }

  Elem dot(const Coords& a, const Coords& b) const noexcept {
    Elem s = 0;
    for (unsigned i = 0; i <= n_; ++i) {
      if (a[i] && b[i]) s = field_->add(s, field_->mul(a[i], b[i]));
    }
    return s;
  }

  // ---- subspaces -------------------------------------------------------

  /// Canonical subspace spanned by the given rows (rank may drop).
  Subspace subspace(std::span<const Coords> rows) const {
    if (rows.size() > detail::kMaxRows) throw AmbientMismatch("too many spanning vectors");
    detail::WorkMatrix m{};
    for (std::size_t i = 0; i < rows.size(); ++i) m[i] = rows[i];
    return from_work(m, static_cast<unsigned>(rows.size()));
  }

  Subspace of(const ProjPoint& p) const {
    check(p);
    Subspace s;
    s.n_ = static_cast<std::uint8_t>(n_);
    s.rank_ = 1;
    s.rows_[0] = p.c_;
    return s;
  }

  Subspace whole() const {
    Subspace s;
    s.n_ = static_cast<std::uint8_t>(n_);
    s.rank_ = static_cast<std::uint8_t>(n_ + 1);
    for (unsigned i = 0; i <= n_; ++i) s.rows_[i][i] = 1;
    return s;
  }

  /// Hyperplane {x : dual . x = 0}.
  Subspace hyperplane(const Coords& dual) const {
    std::array<Coords, 1> d{dual};
    return from_rows_nullspace(subspace(d));
  }

  Subspace span(const Subspace& a, const Subspace& b) const {
    check(a);
    check(b);
    detail::WorkMatrix m{};
    unsigned r = 0;
    for (unsigned i = 0; i < a.rank_; ++i) m[r++] = a.rows_[i];
    for (unsigned i = 0; i < b.rank_; ++i) m[r++] = b.rows_[i];
    return from_work(m, r);
  }
  Subspace span(const Subspace& a, const ProjPoint& p) const { return span(a, of(p)); }

  Subspace span(std::span<const ProjPoint> pts) const {
    if (pts.empty()) throw AmbientMismatch("span of an empty list");
    Subspace acc = of(pts[0]);
    for (std::size_t i = 1; i < pts.size(); ++i) acc = span(acc, pts[i]);
    return acc;
  }
  Subspace span(std::initializer_list<ProjPoint> pts) const {
    return span(std::span<const ProjPoint>(pts.begin(), pts.size()));
  }
  Subspace span(std::span<const Subspace> parts) const {
    if (parts.empty()) throw AmbientMismatch("span of an empty list");
    Subspace acc = parts[0];
    check(acc);
    for (std::size_t i = 1; i < parts.size(); ++i) acc = span(acc, parts[i]);
    return acc;
  }

  /// Rows of a basis of the annihilator {h : h . x = 0 for all x in s}.
  std::vector<Coords> annihilator(const Subspace& s) const {
    check(s);
    std::vector<Coords> out;
    const unsigned cols = coords();
    std::array<int, kMaxCoords> pivot_row{};
    pivot_row.fill(-1);
    for (unsigned r = 0; r < s.rank_; ++r) pivot_row[s.pivot(r)] = static_cast<int>(r);
    for (unsigned f = 0; f < cols; ++f) {
      if (pivot_row[f] >= 0) continue;
      Coords v{};
      v[f] = 1;
      for (unsigned r = 0; r < s.rank_; ++r) v[s.pivot(r)] = field_->neg(s.rows_[r][f]);
      out.push_back(v);
    }
    return out;
  }

  std::optional<Subspace> meet(const Subspace& a, const Subspace& b) const {
    check(a);
    check(b);
    const auto ha = annihilator(a);
    const auto hb = annihilator(b);
    detail::WorkMatrix m{};
    unsigned r = 0;
    for (const auto& h : ha) m[r++] = h;
    for (const auto& h : hb) m[r++] = h;
    if (r == 0) return a;  // both are the whole space
    const Subspace dual = from_work(m, r);
    if (dual.rank_ == coords()) return std::nullopt;
    return from_rows_nullspace(dual);
  }

  bool contains(const Subspace& s, const Coords& x) const noexcept {
    Coords v = x;
    for (unsigned r = 0; r < s.rank_; ++r) {
      const unsigned pc = s.pivot(r);
      const Elem factor = v[pc];
      if (factor == 0) continue;
      const Elem nf = field_->neg(factor);
      for (unsigned j = pc; j <= n_; ++j) {
        if (s.rows_[r][j]) v[j] = field_->add(v[j], field_->mul(nf, s.rows_[r][j]));
      }
    }
    for (unsigned j = 0; j <= n_; ++j) {
      if (v[j]) return false;
    }
    return true;
  }
  bool contains(const Subspace& s, const ProjPoint& p) const noexcept { return contains(s, p.c_); }
  bool contains(const Subspace& big, const Subspace& small) const noexcept {
    for (unsigned r = 0; r < small.rank_; ++r) {
      if (!contains(big, small.rows_[r])) return false;
    }
    return true;
  }

  /// Coordinates of x in the canonical basis of s (x must lie in s).
  std::array<Elem, kMaxCoords> local_coords(const Subspace& s, const Coords& x) const noexcept {
    std::array<Elem, kMaxCoords> c{};
    for (unsigned r = 0; r < s.rank_; ++r) c[r] = x[s.pivot(r)];
    return c;
  }
  Coords combine(const Subspace& s, std::span<const Elem> local) const noexcept {
    Coords v{};
    for (unsigned r = 0; r < s.rank_ && r < local.size(); ++r) {
      const Elem a = local[r];
      if (!a) continue;
      for (unsigned j = 0; j <= n_; ++j) {
        if (s.rows_[r][j]) v[j] = field_->add(v[j], field_->mul(a, s.rows_[r][j]));
      }
    }
    return v;
  }

  /// Visits each point of s exactly once.
  template <class Fn>
  void for_each_point(const Subspace& s, Fn&& fn) const {
    const unsigned k = s.rank_;
    const unsigned qq = q();
    // leading coefficient 1 on row `lead`, arbitrary coefficients on later rows
    for (unsigned lead = 0; lead < k; ++lead) {
      const unsigned free_rows = k - 1 - lead;
      const std::uint64_t total = detail::ipow(qq, free_rows);
      for (std::uint64_t idx = 0; idx < total; ++idx) {
        ProjPoint p;
        p.size_ = static_cast<std::uint8_t>(coords());
        p.c_ = s.rows_[lead];
        std::uint64_t rest = idx;
        for (unsigned r = k; r-- > lead + 1;) {
          const Elem a = static_cast<Elem>(rest % qq);
          rest /= qq;
          if (!a) continue;
          for (unsigned j = 0; j <= n_; ++j) {
            if (s.rows_[r][j]) p.c_[j] = field_->add(p.c_[j], field_->mul(a, s.rows_[r][j]));
          }
        }
        fn(p);
      }
    }
  }

  std::vector<ProjPoint> points_of(const Subspace& s) const {
    std::vector<ProjPoint> out;
    for_each_point(s, [&](const ProjPoint& p) { out.push_back(p); });
    return out;
  }
  std::vector<PointId> point_ids(const Subspace& s) const {
    std::vector<PointId> out;
    for_each_point(s, [&](const ProjPoint& p) { out.push_back(id_of(p)); });
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Number of d-dimensional subspaces: Gaussian binomial [n+1 choose d+1]_q.
  std::uint64_t subspace_count(unsigned d) const {
    if (d > n_) return 0;
    const unsigned k = d + 1;
    std::uint64_t num = 1, den = 1;
    for (unsigned i = 0; i < k; ++i) {
      num *= detail::ipow(q(), n_ + 1 - i) - 1;
      den *= detail::ipow(q(), i + 1) - 1;
    }
    return num / den;
  }

  /// Lazily visits every d-subspace once, grouped by pivot pattern.
  template <class Fn>
  void for_each_subspace(unsigned d, Fn&& fn) const {
    if (d > n_) return;
    const unsigned k = d + 1;
    const unsigned cols = coords();
    std::array<unsigned, kMaxCoords> piv{};
    for (unsigned i = 0; i < k; ++i) piv[i] = i;
    while (true) {
      // free positions: (row r, column c) with c > piv[r], c not a pivot
      std::array<std::pair<unsigned, unsigned>, kMaxCoords * kMaxCoords> free{};
      unsigned nfree = 0;
      for (unsigned r = 0; r < k; ++r) {
        for (unsigned c = piv[r] + 1; c < cols; ++c) {
          bool is_pivot = false;
          for (unsigned r2 = 0; r2 < k; ++r2) is_pivot = is_pivot || piv[r2] == c;
          if (!is_pivot) free[nfree++] = {r, c};
        }
      }
      const std::uint64_t total = detail::ipow(q(), nfree);
      for (std::uint64_t idx = 0; idx < total; ++idx) {
        Subspace s;
        s.n_ = static_cast<std::uint8_t>(n_);
        s.rank_ = static_cast<std::uint8_t>(k);
        for (unsigned r = 0; r < k; ++r) s.rows_[r][piv[r]] = 1;
        std::uint64_t rest = idx;
        for (unsigned f = nfree; f-- > 0;) {
          s.rows_[free[f].first][free[f].second] = static_cast<Elem>(rest % q());
          rest /= q();
        }
        fn(s);
      }
      // next combination of pivot columns
      int i = static_cast<int>(k) - 1;
      while (i >= 0 && piv[i] == cols - k + static_cast<unsigned>(i)) --i;
      if (i < 0) break;
      ++piv[i];
      for (unsigned j = static_cast<unsigned>(i) + 1; j < k; ++j) piv[j] = piv[j - 1] + 1;
    }
  }

  /// Every d-subspace, sorted lexicographically by canonical basis.
  std::vector<Subspace> enumerate_subspaces(unsigned d) const {
    std::vector<Subspace> out;
    out.reserve(subspace_count(d));
    for_each_subspace(d, [&](const Subspace& s) { out.push_back(s); });
    std::sort(out.begin(), out.end());
    return out;
  }

  AffineRelation affine_filter(const Subspace& s, const Subspace& hyperplane) const {
    if (hyperplane.rank_ != n_) throw AmbientMismatch("affine_filter needs a hyperplane");
    if (contains(hyperplane, s)) return {AffineKind::contained, std::nullopt};
    return {AffineKind::meets_in_lower, meet(s, hyperplane)};
  }

  /// Parses the textual dump format and canonicalises.
  Subspace parse_subspace(std::string_view text) const {
    std::vector<Coords> rows;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find(';', start);
      if (end == std::string_view::npos) end = text.size();
      const auto row_text = text.substr(start, end - start);
      Coords row{};
      std::size_t col = 0;
      std::size_t p = 0;
      while (p <= row_text.size()) {
        std::size_t e = row_text.find(',', p);
        if (e == std::string_view::npos) e = row_text.size();
        const std::string tok(row_text.substr(p, e - p));
        if (col >= coords() || tok.empty()) throw ParseError("malformed subspace row '" + std::string(row_text) + "'");
        std::size_t used = 0;
        const unsigned long v = std::stoul(tok, &used);
        if (used != tok.size() || v >= q()) throw ParseError("bad coordinate '" + tok + "'");
        row[col++] = static_cast<Elem>(v);
        p = e + 1;
      }
      if (col != coords()) throw ParseError("row has wrong length");
      rows.push_back(row);
      start = end + 1;
    }
    Subspace s = subspace(rows);
    if (s.rank_ != rows.size()) throw ParseError("dependent rows in subspace dump");
    return s;
  }

  std::string point_string(const ProjPoint& p) const { return p.to_string(); }

 private:
  void check(const Subspace& s) const {
    if (s.n_ != n_) throw AmbientMismatch("subspace lives in PG(" + std::to_string(s.n_) + ") not PG(" + std::to_string(n_) + ")");
  }
  void check(const ProjPoint& p) const {
    if (p.size_ != coords()) throw AmbientMismatch("point has wrong coordinate count");
  }

  Subspace from_work(detail::WorkMatrix& m, unsigned rows) const {
    const unsigned rank = detail::rref(*field_, m, rows, coords());
    Subspace s;
    s.n_ = static_cast<std::uint8_t>(n_);
    s.rank_ = static_cast<std::uint8_t>(rank);
    for (unsigned i = 0; i < rank; ++i) s.rows_[i] = m[i];
    return s;
  }

  /// Subspace annihilated by the rows of `dual`.
  Subspace from_rows_nullspace(const Subspace& dual) const {
    const auto basis = annihilator(dual);
    return subspace(basis);
  }

  FieldPtr field_;
  unsigned n_;
};

/// Subspaces of rank r + 1 through a fixed rank-r subspace s, identified with
/// the points of PG(n - r, q) via the annihilator of s.
class Quotient {
 public:
  Quotient(const ProjectiveSpace& space, const Subspace& s)
      : space_(space), base_(s), functionals_(space.annihilator(s)),
        target_(space.field_ptr(), static_cast<unsigned>(functionals_.size()) - 1) {
    if (functionals_.empty()) throw DegenerateInput("quotient by the whole space");
  }

  const ProjectiveSpace& target() const noexcept { return target_; }
  const Subspace& base() const noexcept { return base_; }

  /// Id in target() of <s, x>, or nullopt when x lies in s.
  std::optional<PointId> image_id(const Coords& x) const {
    Coords v{};
    bool nonzero = false;
    for (std::size_t i = 0; i < functionals_.size(); ++i) {
      v[i] = space_.dot(functionals_[i], x);
      nonzero = nonzero || v[i];
    }
    if (!nonzero) return std::nullopt;
    return target_.id_of(target_.point(v));
  }
  std::optional<PointId> image_id(const ProjPoint& p) const { return image_id(p.coords()); }

  Subspace join(const Coords& x) const {
    const std::array<Coords, 1> row{x};
    return space_.span(base_, space_.subspace(row));
  }
  Subspace join(const ProjPoint& p) const { return space_.span(base_, p); }

 private:
  ProjectiveSpace space_;
  Subspace base_;
  std::vector<Coords> functionals_;
  ProjectiveSpace target_;
};

/// Materialised point/line incidence for one ambient space.
class IncidenceIndex {
 public:
  explicit IncidenceIndex(const ProjectiveSpace& space) : space_(space) {
    lines_ = space.enumerate_subspaces(1);
    const std::size_t np = space.point_count();
    line_points_.reserve(lines_.size());
    lines_through_.assign(np, {});
    line_ids_.reserve(lines_.size() * 2);
    for (std::size_t l = 0; l < lines_.size(); ++l) {
      line_ids_.emplace(lines_[l], static_cast<std::uint32_t>(l));
      Bitset bits(np);
      space.for_each_point(lines_[l], [&](const ProjPoint& p) {
        const PointId id = space.id_of(p);
        bits.set(id);
        lines_through_[id].push_back(static_cast<std::uint32_t>(l));
      });
      line_points_.push_back(std::move(bits));
    }
  }

  const ProjectiveSpace& space() const noexcept { return space_; }
  std::size_t point_count() const noexcept { return lines_through_.size(); }
  std::size_t line_count() const noexcept { return lines_.size(); }
  const Subspace& line(std::size_t id) const noexcept { return lines_[id]; }
  std::optional<std::uint32_t> line_id(const Subspace& l) const {
    auto it = line_ids_.find(l);
    if (it == line_ids_.end()) return std::nullopt;
    return it->second;
  }
  const Bitset& points_on(std::size_t line) const noexcept { return line_points_[line]; }
  const std::vector<std::uint32_t>& lines_through(PointId p) const noexcept { return lines_through_[p]; }
  bool is_incident(PointId p, std::size_t line) const noexcept { return line_points_[line].test(p); }

 private:
  ProjectiveSpace space_;
  std::vector<Subspace> lines_;
  std::unordered_map<Subspace, std::uint32_t, SubspaceHash> line_ids_;
  std::vector<Bitset> line_points_;
  std::vector<std::vector<std::uint32_t>> lines_through_;
};

}  // namespace bbconic
