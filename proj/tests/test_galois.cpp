#include <gtest/gtest.h>

#include <random>
#include <set>
#include <vector>

#include "bbconic/galois.hpp"

using namespace bbconic;

namespace {

// Schoolbook polynomial product reduced by a monic modulus, on coefficient
// vectors; independent of the field's tables.
std::vector<unsigned> naive_mulmod(std::vector<unsigned> a, std::vector<unsigned> b, const std::vector<unsigned>& m,
                                   unsigned p) {
  const std::size_t k = m.size() - 1;
  std::vector<unsigned> r(2 * k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) r[i + j] = (r[i + j] + a[i] * b[j]) % p;
  }
  for (std::size_t d = 2 * k - 1; d >= k; --d) {
    const unsigned c = r[d];
    if (!c) continue;
    for (std::size_t i = 0; i <= k; ++i) r[d - k + i] = (r[d - k + i] + p - (c * m[i]) % p) % p;
  }
  r.resize(k);
  return r;
}

std::vector<unsigned> digits(unsigned code, unsigned p, unsigned k) {
  std::vector<unsigned> d(k);
  for (unsigned i = 0; i < k; ++i) {
    d[i] = code % p;
    code /= p;
  }
  return d;
}

void check_axioms(const Field& f) {
  const unsigned q = f.order();
  for (Elem a = 0; a < q; ++a) {
    ASSERT_EQ(f.add(a, 0), a);
    ASSERT_EQ(f.mul(a, 1), a);
    ASSERT_EQ(f.add(a, f.neg(a)), 0);
    if (a) {
      ASSERT_EQ(f.mul(a, f.inv(a)), 1);
    }
    for (Elem b = 0; b < q; ++b) {
      ASSERT_EQ(f.add(a, b), f.add(b, a));
      ASSERT_EQ(f.mul(a, b), f.mul(b, a));
      if (a && b) {
        ASSERT_NE(f.mul(a, b), 0);
      }
      for (Elem c = 0; c < q; ++c) {
        ASSERT_EQ(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
        ASSERT_EQ(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        ASSERT_EQ(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
      }
    }
  }
}

}  // namespace

TEST(Galois, PrimeFieldExamples) {
  auto f = Field::make(FieldSpec::for_order(7));
  EXPECT_EQ(f->mul(3, 5), 1);
  EXPECT_EQ(f->inv(4), 2);
  EXPECT_EQ(f->sub(2, 5), 4);
  EXPECT_EQ(f->div(1, 4), 2);
  EXPECT_EQ(f->pow(3, 6), 1);
}

TEST(Galois, Gf9SquareOfGenerator) {
  const auto spec = FieldSpec::canonical(3, 2);
  EXPECT_EQ(spec.modulus, (std::vector<unsigned>{1, 0, 1}));
  auto f = Field::make(spec);
  EXPECT_EQ(f->mul(3, 3), 2);  // x * x = -1 = 2
  for (Elem a = 0; a < 9; ++a) {
    for (Elem b = 0; b < 9; ++b) {
      const auto r = naive_mulmod(digits(a, 3, 2), digits(b, 3, 2), spec.modulus, 3);
      EXPECT_EQ(f->coefficients(f->mul(a, b)), r);
    }
  }
}

TEST(Galois, CanonicalModulusIsLeastIrreducible) {
  for (unsigned p : {3U, 5U, 7U, 11U}) {
    // degree 2: irreducible iff no root
    std::vector<unsigned> expect;
    for (unsigned c0 = 0; c0 < p && expect.empty(); ++c0) {
      for (unsigned c1 = 0; c1 < p && expect.empty(); ++c1) {
        bool root = false;
        for (unsigned x = 0; x < p; ++x) root = root || (x * x + c1 * x + c0) % p == 0;
        if (!root) expect = {c0, c1, 1};
      }
    }
    EXPECT_EQ(FieldSpec::canonical(p, 2).modulus, expect) << p;
  }
  EXPECT_EQ(FieldSpec::canonical(7, 1).modulus, (std::vector<unsigned>{0, 1}));
}

TEST(Galois, TablesMatchPolynomialReduction) {
  for (unsigned q : {9U, 25U, 27U, 49U}) {
    const auto spec = FieldSpec::for_order(q);
    auto f = Field::make(spec);
    for (Elem a = 0; a < q; ++a) {
      for (Elem b = 0; b < q; ++b) {
        ASSERT_EQ(f->coefficients(f->mul(a, b)), naive_mulmod(digits(a, spec.p, spec.k), digits(b, spec.p, spec.k),
                                                              spec.modulus, spec.p));
      }
    }
  }
}

TEST(Galois, FieldAxiomsExhaustive) {
  for (unsigned q : {3U, 5U, 7U, 9U, 11U, 13U}) {
    SCOPED_TRACE(q);
    check_axioms(*Field::make(FieldSpec::for_order(q)));
  }
  for (unsigned q : {3U, 5U, 7U}) {
    SCOPED_TRACE(q * q);
    check_axioms(QuadExtension(Field::make(FieldSpec::for_order(q))).ext());
  }
}

TEST(Galois, QuadraticCharacter) {
  auto f = Field::make(FieldSpec::for_order(7));
  EXPECT_EQ(f->quadratic_character(2), QuadraticCharacter::square);
  EXPECT_EQ(f->quadratic_character(3), QuadraticCharacter::nonsquare);
  EXPECT_EQ(f->quadratic_character(0), QuadraticCharacter::zero);
  for (unsigned q : {7U, 9U, 11U, 13U, 25U}) {
    auto g = Field::make(FieldSpec::for_order(q));
    std::set<Elem> squares;
    for (Elem b = 1; b < q; ++b) squares.insert(g->mul(b, b));
    for (Elem a = 1; a < q; ++a) {
      EXPECT_EQ(g->quadratic_character(a) == QuadraticCharacter::square, squares.count(a) == 1) << q << " " << a;
      for (Elem b = 1; b < q; ++b) {
        const bool sa = g->quadratic_character(a) == QuadraticCharacter::square;
        const bool sb = g->quadratic_character(b) == QuadraticCharacter::square;
        EXPECT_EQ(g->quadratic_character(g->mul(a, b)) == QuadraticCharacter::square, sa == sb);
      }
    }
  }
}

TEST(Galois, ExtensionEmbedAndDecompose) {
  for (unsigned q : {7U, 9U}) {
    QuadExtension ext(Field::make(FieldSpec::for_order(q)));
    const Field& e = ext.ext();
    const Field& b = ext.base();
    EXPECT_EQ(ext.decompose(ext.omega()), (std::pair<Elem, Elem>{0, 1}));
    for (Elem a = 0; a < q; ++a) {
      EXPECT_EQ(ext.decompose(ext.embed(a)), (std::pair<Elem, Elem>{a, 0}));
      for (Elem c = 0; c < q; ++c) {
        EXPECT_EQ(e.add(ext.embed(a), ext.embed(c)), ext.embed(b.add(a, c)));
        EXPECT_EQ(e.mul(ext.embed(a), ext.embed(c)), ext.embed(b.mul(a, c)));
      }
    }
    std::set<Elem> seen;
    for (Elem x = 0; x < q * q; ++x) {
      const auto [x0, x1] = ext.decompose(x);
      EXPECT_EQ(ext.compose(x0, x1), x);
      EXPECT_EQ(e.add(ext.embed(x0), e.mul(ext.embed(x1), ext.omega())), x);
      seen.insert(x);
    }
    EXPECT_EQ(seen.size(), q * q);
    const Elem w = ext.omega();
    EXPECT_EQ(e.mul(w, w), e.add(e.mul(ext.s(), w), ext.t()));
  }
}

TEST(Galois, FrobeniusFixesExactlyTheSubfield) {
  for (unsigned q : {3U, 5U, 7U, 9U, 11U, 13U}) {
    QuadExtension ext(Field::make(FieldSpec::for_order(q)));
    const Field& e = ext.ext();
    std::set<Elem> image;
    for (Elem x = 0; x < q * q; ++x) {
      image.insert(ext.frobenius(x));
      EXPECT_EQ(ext.frobenius(x) == x, ext.in_subfield(x)) << q << " " << x;
      EXPECT_EQ(ext.frobenius(ext.frobenius(x)), x);
    }
    EXPECT_EQ(image.size(), q * q);
    std::mt19937_64 rng(q);
    for (int i = 0; i < 2000; ++i) {
      const Elem a = static_cast<Elem>(rng() % (q * q)), b = static_cast<Elem>(rng() % (q * q));
      EXPECT_EQ(ext.frobenius(e.add(a, b)), e.add(ext.frobenius(a), ext.frobenius(b)));
      EXPECT_EQ(ext.frobenius(e.mul(a, b)), e.mul(ext.frobenius(a), ext.frobenius(b)));
    }
  }
}

TEST(Galois, Errors) {
  auto f = Field::make(FieldSpec::for_order(7));
  auto g = Field::make(FieldSpec::for_order(11));
  EXPECT_THROW(f->inv(0), DivisionByZero);
  EXPECT_THROW(f->div(3, 0), DivisionByZero);
  EXPECT_THROW(FieldElement(f, 1) + FieldElement(g, 1), FieldMismatch);
  EXPECT_THROW(FieldElement(f, 0).inv(), DivisionByZero);
  EXPECT_THROW(Field::make(FieldSpec{3, 2, {2, 0, 1}}), InvalidField);  // x^2 - 1
  EXPECT_THROW(Field::make(FieldSpec{6, 1, {0, 1}}), InvalidField);
  EXPECT_THROW(FieldSpec::for_order(15), InvalidField);
  const FieldElement a(f, 3), b(f, 5);
  EXPECT_EQ((a * b).value(), 1);
  EXPECT_EQ((a / b).value(), f->mul(3, f->inv(5)));
  EXPECT_EQ(a.character(), QuadraticCharacter::nonsquare);
}

TEST(Galois, OverriddenModulus) {
  // x^2 + x + 2 is also irreducible over GF(3); the field it defines is isomorphic
  auto f = Field::make(FieldSpec{3, 2, {2, 1, 1}});
  EXPECT_EQ(f->order(), 9U);
  check_axioms(*f);
  EXPECT_EQ(f->add(f->mul(3, 3), f->add(3, 2)), 0);
}
