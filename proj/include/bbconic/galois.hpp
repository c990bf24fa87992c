#pragma once

// Exact arithmetic in GF(q) and its quadratic extension GF(q^2).
//
// Elements are small integer codes. A field built from a FieldSpec encodes
// c_0 + c_1 x + ... + c_{k-1} x^{k-1} as sum c_i p^i; a quadratic extension
// GF(q)[w] encodes x_0 + x_1 w as x_0 + x_1 q. Arithmetic is done by
// polynomial reduction once, at construction, and cached in dense tables.

#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bbconic/errors.hpp"

namespace bbconic {

using Elem = std::uint16_t;

enum class QuadraticCharacter { zero, square, nonsquare };

inline const char* to_string(QuadraticCharacter c) {
  switch (c) {
    case QuadraticCharacter::zero: return "zero";
    case QuadraticCharacter::square: return "square";
    case QuadraticCharacter::nonsquare: return "nonsquare";
  }
  return "?";
}

inline bool is_prime(unsigned n) {
  if (n < 2) return false;
  for (unsigned d = 2; d * d <= n; ++d) {
    if (n % d == 0) return false;
  }
  return true;
}

/// Splits q = p^k. Returns nullopt if q is not a prime power.
inline std::optional<std::pair<unsigned, unsigned>> prime_power(unsigned q) {
  if (q < 2) return std::nullopt;
  unsigned p = 2;
  while (q % p != 0) ++p;
  unsigned k = 0;
  unsigned r = q;
  while (r % p == 0) {
    r /= p;
    ++k;
  }
  if (r != 1) return std::nullopt;
  return std::make_pair(p, k);
}

namespace poly {

// Dense polynomials over GF(p), little-endian, no trailing zeros (zero = {}).
using Poly = std::vector<unsigned>;

inline void trim(Poly& a) {
  while (!a.empty() && a.back() == 0) a.pop_back();
}

inline unsigned inv_mod(unsigned a, unsigned p) {
  // p is prime: a^(p-2)
  unsigned result = 1;
  unsigned base = a % p;
  unsigned e = p - 2;
  while (e) {
    if (e & 1U) result = result * base % p;
    base = base * base % p;
    e >>= 1U;
  }
  return result;
}

/// Remainder of a modulo b (b nonzero).
inline Poly mod(Poly a, const Poly& b, unsigned p) {
  trim(a);
  const std::size_t db = b.size() - 1;
  const unsigned lead_inv = inv_mod(b.back(), p);
  while (a.size() >= b.size()) {
    const unsigned factor = a.back() * lead_inv % p;
    const std::size_t shift = a.size() - 1 - db;
    for (std::size_t i = 0; i <= db; ++i) {
      a[shift + i] = (a[shift + i] + p - factor * b[i] % p) % p;
    }
    trim(a);
  }
  return a;
}

inline Poly mul(const Poly& a, const Poly& b, unsigned p) {
  if (a.empty() || b.empty()) return {};
  Poly r(a.size() + b.size() - 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      r[i + j] = (r[i + j] + a[i] * b[j]) % p;
    }
  }
  trim(r);
  return r;
}

/// Trial division by every monic polynomial of degree 1..deg/2.
inline bool is_irreducible(const Poly& f, unsigned p) {
  Poly g = f;
  trim(g);
  if (g.size() < 2) return false;
  const std::size_t deg = g.size() - 1;
  for (std::size_t d = 1; d <= deg / 2; ++d) {
    std::size_t count = 1;
    for (std::size_t i = 0; i < d; ++i) count *= p;
    for (std::size_t idx = 0; idx < count; ++idx) {
      Poly h(d + 1, 0);
      std::size_t v = idx;
      for (std::size_t i = 0; i < d; ++i) {
        h[i] = static_cast<unsigned>(v % p);
        v /= p;
      }
      h[d] = 1;
      if (mod(g, h, p).empty()) return false;
    }
  }
  return true;
}

}  // namespace poly

/// Characteristic, degree and modulus of GF(p^k) = GF(p)[x]/(modulus).
struct FieldSpec {
  unsigned p = 0;
  unsigned k = 0;
  std::vector<unsigned> modulus;  // little-endian, monic, size k + 1

  unsigned order() const {
    unsigned q = 1;
    for (unsigned i = 0; i < k; ++i) q *= p;
    return q;
  }

  std::string modulus_string() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < modulus.size(); ++i) {
      if (i) os << ',';
      os << modulus[i];
    }
    return os.str();
  }

  /// Lexicographically least monic irreducible of degree k, comparing the
  /// non-leading coefficients (c_0, c_1, ..., c_{k-1}) in that order.
  static FieldSpec canonical(unsigned p, unsigned k) {
    if (!is_prime(p)) throw InvalidField("characteristic " + std::to_string(p) + " is not prime");
    if (k == 0) throw InvalidField("extension degree must be at least 1");
    std::size_t count = 1;
    for (unsigned i = 0; i < k; ++i) count *= p;
    for (std::size_t idx = 0; idx < count; ++idx) {
      std::vector<unsigned> m(k + 1, 0);
      std::size_t v = idx;
      for (unsigned i = k; i-- > 0;) {  // c_0 is the most significant digit
        m[i] = static_cast<unsigned>(v % p);
        v /= p;
      }
      m[k] = 1;
      if (poly::is_irreducible(m, p)) return FieldSpec{p, k, std::move(m)};
    }
    throw InvalidField("no irreducible polynomial found");  // unreachable
  }

  static FieldSpec for_order(unsigned q) {
    const auto pk = prime_power(q);
    if (!pk) throw InvalidField("q = " + std::to_string(q) + " is not a prime power");
    return canonical(pk->first, pk->second);
  }
};

/// A finite field with cached operation tables. Immutable after construction.
class Field {
 public:
  /// GF(p)[x]/(modulus). Validates primality of p and irreducibility.
  static std::shared_ptr<const Field> make(const FieldSpec& spec) {
    if (!is_prime(spec.p)) throw InvalidField("characteristic " + std::to_string(spec.p) + " is not prime");
    if (spec.k == 0 || spec.modulus.size() != spec.k + 1) {
      throw InvalidField("modulus must have exactly k + 1 coefficients");
    }
    for (unsigned c : spec.modulus) {
      if (c >= spec.p) throw InvalidField("modulus coefficient out of range");
    }
    if (spec.modulus.back() != 1) throw InvalidField("modulus must be monic");
    if (!poly::is_irreducible(spec.modulus, spec.p)) {
      throw InvalidField("modulus " + spec.modulus_string() + " is reducible over GF(" + std::to_string(spec.p) + ")");
    }
    const unsigned q = spec.order();
    if (q > 4096) throw InvalidField("field order too large for table arithmetic");

    auto f = std::shared_ptr<Field>(new Field());
    f->order_ = q;
    f->p_ = spec.p;
    f->degree_ = spec.k;
    f->prime_degree_ = spec.k;
    f->spec_ = spec;

    const unsigned p = spec.p;
    auto digits = [&](unsigned code) {
      poly::Poly d(spec.k, 0);
      for (unsigned i = 0; i < spec.k; ++i) {
        d[i] = code % p;
        code /= p;
      }
      return d;
    };
    auto encode = [&](poly::Poly d) {
      unsigned code = 0;
      d.resize(spec.k, 0);
      for (unsigned i = spec.k; i-- > 0;) code = code * p + d[i];
      return static_cast<Elem>(code);
    };
    f->build_tables([&](unsigned a, unsigned b) {
      poly::Poly da = digits(a), db = digits(b);
      poly::Poly sum(spec.k, 0);
      for (unsigned i = 0; i < spec.k; ++i) sum[i] = (da[i] + db[i]) % p;
      return encode(sum);
    }, [&](unsigned a, unsigned b) {
      poly::Poly da = digits(a), db = digits(b);
      poly::trim(da);
      poly::trim(db);
      return encode(poly::mod(poly::mul(da, db, p), spec.modulus, p));
    });
    return f;
  }

  /// base[w]/(w^2 - s w - t). Requires the quadratic to have no root in base.
  static std::shared_ptr<const Field> quadratic(std::shared_ptr<const Field> base, Elem s, Elem t) {
    const Field& b = *base;
    const unsigned q = b.order();
    if (s >= q || t >= q) throw InvalidField("extension coefficients out of range");
    for (unsigned x = 0; x < q; ++x) {
      const Elem ex = static_cast<Elem>(x);
      if (b.sub(b.sub(b.mul(ex, ex), b.mul(s, ex)), t) == 0) {
        throw InvalidField("w^2 - s w - t has a root in the base field");
      }
    }
    auto f = std::shared_ptr<Field>(new Field());
    f->order_ = q * q;
    f->p_ = b.characteristic();
    f->degree_ = 2;
    f->prime_degree_ = 2 * b.prime_degree();
    f->spec_ = b.spec_;
    f->base_ = base;
    f->build_tables([&](unsigned x, unsigned y) {
      const Elem x0 = static_cast<Elem>(x % q), x1 = static_cast<Elem>(x / q);
      const Elem y0 = static_cast<Elem>(y % q), y1 = static_cast<Elem>(y / q);
      return static_cast<Elem>(b.add(x0, y0) + q * b.add(x1, y1));
    }, [&](unsigned x, unsigned y) {
      const Elem x0 = static_cast<Elem>(x % q), x1 = static_cast<Elem>(x / q);
      const Elem y0 = static_cast<Elem>(y % q), y1 = static_cast<Elem>(y / q);
      const Elem hi = b.mul(x1, y1);
      const Elem r0 = b.add(b.mul(x0, y0), b.mul(t, hi));
      const Elem r1 = b.add(b.add(b.mul(x0, y1), b.mul(x1, y0)), b.mul(s, hi));
      return static_cast<Elem>(r0 + q * r1);
    });
    return f;
  }

  unsigned order() const noexcept { return order_; }
  unsigned characteristic() const noexcept { return p_; }
  /// Degree over the field this one was constructed from (prime field or base).
  unsigned degree() const noexcept { return degree_; }
  /// Degree over the prime field.
  unsigned prime_degree() const noexcept { return prime_degree_; }
  /// The field this one is a quadratic extension of, or null.
  const std::shared_ptr<const Field>& base() const noexcept { return base_; }
  /// Spec of the underlying GF(q) (for a quadratic extension, of its base).
  const FieldSpec& spec() const noexcept { return spec_; }

  Elem zero() const noexcept { return 0; }
  Elem one() const noexcept { return 1; }

  Elem add(Elem a, Elem b) const noexcept { return add_[a * order_ + b]; }
  Elem mul(Elem a, Elem b) const noexcept { return mul_[a * order_ + b]; }
  Elem neg(Elem a) const noexcept { return neg_[a]; }
  Elem sub(Elem a, Elem b) const noexcept { return add_[a * order_ + neg_[b]]; }

  Elem inv(Elem a) const {
    if (a == 0) throw DivisionByZero("inverse of zero");
    return inv_[a];
  }
  Elem div(Elem a, Elem b) const {
    if (b == 0) throw DivisionByZero("division by zero");
    return mul(a, inv_[b]);
  }
  Elem pow(Elem a, std::uint64_t e) const noexcept {
    Elem result = 1;
    Elem base = a;
    while (e) {
      if (e & 1U) result = mul(result, base);
      base = mul(base, base);
      e >>= 1U;
    }
    return result;
  }

  /// Image of an integer under Z -> prime subfield.
  Elem from_int(long long n) const noexcept {
    long long r = n % static_cast<long long>(p_);
    if (r < 0) r += p_;
    return static_cast<Elem>(r);
  }

  /// Coordinates over the construction basis (prime field digits, or (x0, x1)
  /// over the base for a quadratic extension).
  std::vector<unsigned> coefficients(Elem a) const {
    const unsigned radix = base_ ? base_->order() : p_;
    std::vector<unsigned> c(degree_, 0);
    unsigned v = a;
    for (unsigned i = 0; i < degree_; ++i) {
      c[i] = v % radix;
      v /= radix;
    }
    return c;
  }

  Elem from_coefficients(const std::vector<unsigned>& c) const {
    const unsigned radix = base_ ? base_->order() : p_;
    if (c.size() > degree_) throw InvalidField("too many coefficients");
    unsigned code = 0;
    for (std::size_t i = c.size(); i-- > 0;) {
      if (c[i] >= radix) throw InvalidField("coefficient out of range");
      code = code * radix + c[i];
    }
    return static_cast<Elem>(code);
  }

  /// Legendre-style character via a^((q-1)/2); q must be odd.
  QuadraticCharacter quadratic_character(Elem a) const {
    if (p_ == 2) throw InvalidField("quadratic character needs odd order");
    if (a == 0) return QuadraticCharacter::zero;
    return pow(a, (order_ - 1) / 2) == 1 ? QuadraticCharacter::square : QuadraticCharacter::nonsquare;
  }

  std::string description() const {
    std::ostringstream os;
    os << "GF(" << order_ << ")";
    if (base_) os << " over GF(" << base_->order() << ")";
    return os.str();
  }

 private:
  Field() = default;

  template <class AddFn, class MulFn>
  void build_tables(AddFn&& add_fn, MulFn&& mul_fn) {
    const unsigned q = order_;
    add_.assign(static_cast<std::size_t>(q) * q, 0);
    mul_.assign(static_cast<std::size_t>(q) * q, 0);
    neg_.assign(q, 0);
    inv_.assign(q, 0);
    for (unsigned a = 0; a < q; ++a) {
      for (unsigned b = 0; b < q; ++b) {
        add_[a * q + b] = add_fn(a, b);
        mul_[a * q + b] = mul_fn(a, b);
      }
    }
    for (unsigned a = 0; a < q; ++a) {
      for (unsigned b = 0; b < q; ++b) {
        if (add_[a * q + b] == 0) neg_[a] = static_cast<Elem>(b);
        if (mul_[a * q + b] == 1) inv_[a] = static_cast<Elem>(b);
      }
    }
  }

  unsigned order_ = 0;
  unsigned p_ = 0;
  unsigned degree_ = 0;
  unsigned prime_degree_ = 0;
  FieldSpec spec_;
  std::shared_ptr<const Field> base_;
  std::vector<Elem> add_, mul_, neg_, inv_;
};

using FieldPtr = std::shared_ptr<const Field>;

/// Value-semantic field element bound to its field. Mixing elements of
/// different fields throws FieldMismatch.
class FieldElement {
 public:
  FieldElement(FieldPtr field, Elem value) : field_(std::move(field)), value_(value) {
    if (!field_) throw FieldMismatch("element without a field");
    if (value_ >= field_->order()) throw InvalidField("element code out of range");
  }
  static FieldElement from_int(const FieldPtr& field, long long n) { return {field, field->from_int(n)}; }

  const FieldPtr& field() const noexcept { return field_; }
  Elem value() const noexcept { return value_; }
  std::vector<unsigned> coefficients() const { return field_->coefficients(value_); }
  bool is_zero() const noexcept { return value_ == 0; }

  FieldElement operator+(const FieldElement& o) const { return {field_, field_->add(value_, check(o))}; }
  FieldElement operator-(const FieldElement& o) const { return {field_, field_->sub(value_, check(o))}; }
  FieldElement operator*(const FieldElement& o) const { return {field_, field_->mul(value_, check(o))}; }
  FieldElement operator/(const FieldElement& o) const { return {field_, field_->div(value_, check(o))}; }
  FieldElement operator-() const { return {field_, field_->neg(value_)}; }
  FieldElement inv() const { return {field_, field_->inv(value_)}; }
  FieldElement pow(std::uint64_t e) const { return {field_, field_->pow(value_, e)}; }
  QuadraticCharacter character() const { return field_->quadratic_character(value_); }

  bool operator==(const FieldElement& o) const { return field_ == o.field_ && value_ == o.value_; }

 private:
  Elem check(const FieldElement& o) const {
    if (o.field_ != field_) throw FieldMismatch("operands belong to different fields");
    return o.value_;
  }

  FieldPtr field_;
  Elem value_;
};

/// GF(q^2) = GF(q)[w], w^2 = s w + t, with the subfield embedding and the
/// decomposition x = x0 + x1 w.
class QuadExtension {
 public:
  explicit QuadExtension(FieldPtr base) : base_(std::move(base)) {
    const auto [s, t] = canonical_minimal_polynomial(*base_);
    s_ = s;
    t_ = t;
    ext_ = Field::quadratic(base_, s_, t_);
  }
  QuadExtension(FieldPtr base, Elem s, Elem t)
      : base_(std::move(base)), s_(s), t_(t), ext_(Field::quadratic(base_, s, t)) {}

  const Field& base() const noexcept { return *base_; }
  const Field& ext() const noexcept { return *ext_; }
  const FieldPtr& base_ptr() const noexcept { return base_; }
  const FieldPtr& ext_ptr() const noexcept { return ext_; }
  unsigned q() const noexcept { return base_->order(); }
  Elem s() const noexcept { return s_; }
  Elem t() const noexcept { return t_; }

  Elem omega() const noexcept { return static_cast<Elem>(q()); }
  Elem embed(Elem a) const noexcept { return a; }
  bool in_subfield(Elem x) const noexcept { return x < q(); }
  std::pair<Elem, Elem> decompose(Elem x) const noexcept {
    return {static_cast<Elem>(x % q()), static_cast<Elem>(x / q())};
  }
  Elem compose(Elem x0, Elem x1) const noexcept { return static_cast<Elem>(x0 + q() * x1); }

  /// x -> x^q, the generator of Gal(GF(q^2)/GF(q)).
  Elem frobenius(Elem x) const noexcept { return ext_->pow(x, q()); }

  /// Least (c0, c1) with x^2 + c1 x + c0 irreducible; returned as (s, t) with
  /// w^2 = s w + t.
  static std::pair<Elem, Elem> canonical_minimal_polynomial(const Field& f) {
    const unsigned q = f.order();
    for (unsigned c0 = 0; c0 < q; ++c0) {
      for (unsigned c1 = 0; c1 < q; ++c1) {
        bool has_root = false;
        for (unsigned x = 0; x < q && !has_root; ++x) {
          const Elem ex = static_cast<Elem>(x);
          has_root = f.add(f.add(f.mul(ex, ex), f.mul(static_cast<Elem>(c1), ex)), static_cast<Elem>(c0)) == 0;
        }
        if (!has_root) {
          return {f.neg(static_cast<Elem>(c1)), f.neg(static_cast<Elem>(c0))};
        }
      }
    }
    throw InvalidField("no irreducible quadratic");  // unreachable
  }

 private:
  FieldPtr base_;
  Elem s_ = 0;
  Elem t_ = 0;
  FieldPtr ext_;
};

}  // namespace bbconic
