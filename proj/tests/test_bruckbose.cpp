#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "bbconic/bruckbose.hpp"

using namespace bbconic;

namespace {

const BruckBoseFrame& frame7() {
  static const BruckBoseFrame f(Field::make(FieldSpec::for_order(7)));
  return f;
}

std::set<PointId> ids_of(const ProjectiveSpace& s, std::span<const ProjPoint> pts) {
  std::set<PointId> out;
  for (const auto& p : pts) out.insert(s.id_of(p));
  return out;
}

}  // namespace

TEST(BruckBose, RegularSpreadIsASpread) {
  for (unsigned q : {3U, 5U, 7U, 9U}) {
    const BruckBoseFrame fr(Field::make(FieldSpec::for_order(q)));
    const auto& s = fr.sigma();
    const auto& spread = fr.spread_reg();
    ASSERT_EQ(spread.size(), q * q + 1);
    for (std::size_t a = 0; a < spread.size(); ++a) {
      ASSERT_EQ(spread[a].dimension(), 1);
      for (std::size_t b = a + 1; b < spread.size(); ++b) ASSERT_FALSE(s.meet(spread[a], spread[b])) << a << " " << b;
    }
    std::size_t covered = 0;
    for (const auto& l : spread) covered += s.points_of(l).size();
    EXPECT_EQ(covered, s.point_count());
    for (PointId id = 0; id < s.point_count(); ++id) {
      const ProjPoint p = s.point_at(id);
      ASSERT_TRUE(s.contains(spread[fr.spread_index_of(p)], p));
    }
  }
  EXPECT_EQ(frame7().sigma().point_count(), 400U);
}

TEST(BruckBose, PointMapsAreInverse) {
  const auto& fr = frame7();
  const auto& plane = fr.plane();
  std::size_t affine = 0;
  for (PointId id = 0; id < plane.point_count(); ++id) {
    const ProjPoint p = plane.point_at(id);
    if (p[2] == 0) {
      EXPECT_THROW(fr.point_down(p), NotAffine);
      continue;
    }
    ++affine;
    const ProjPoint x = fr.point_down(p);
    ASSERT_NE(x[4], 0);
    ASSERT_EQ(fr.point_up(x), p);
  }
  EXPECT_EQ(affine, 2401U);
  EXPECT_EQ(fr.point_down(plane.point({0, 0, 1})), fr.pg4().point({0, 0, 0, 0, 1}));
  EXPECT_THROW(fr.point_up(fr.pg4().point({1, 0, 0, 0, 0})), NotAffine);
}

TEST(BruckBose, LinesMapToAffinePlanesThroughSpreadLines) {
  const auto& fr = frame7();
  const auto& plane = fr.plane();
  const auto& pg4 = fr.pg4();
  EXPECT_THROW(fr.line_down(fr.line_inf()), NotAffine);
  std::size_t checked = 0;
  plane.for_each_subspace(1, [&](const Subspace& l) {
    if (l == fr.line_inf()) return;
    const Subspace img = fr.line_down(l);
    ASSERT_EQ(img.dimension(), 2);
    ASSERT_EQ(fr.line_up(img), l);
    const ProjPoint inf = plane.point(plane.meet(l, fr.line_inf())->row(0));
    ASSERT_TRUE(pg4.contains(img, fr.lift(fr.spread_line_for(inf))));
    plane.for_each_point(l, [&](const ProjPoint& p) {
      if (p[2] != 0) {
        ASSERT_TRUE(pg4.contains(img, fr.point_down(p)));
      }
    });
    ++checked;
  });
  EXPECT_EQ(checked, 2450U);
}

TEST(BruckBose, CollinearTriplesAreCoplanarWithTheirSpreadLine) {
  const auto& fr = frame7();
  const Field& e = fr.big();
  const auto& plane = fr.plane();
  const auto& pg4 = fr.pg4();
  std::mt19937_64 rng(11);
  const unsigned n = e.order();
  for (int trial = 0; trial < 1000; ++trial) {
    const Elem a = static_cast<Elem>(rng() % n), b = static_cast<Elem>(rng() % n);
    const std::size_t m = rng() % (n + 1);
    std::vector<ProjPoint> pts;
    std::set<Elem> steps;
    while (steps.size() < 3) steps.insert(static_cast<Elem>(rng() % n));
    for (Elem t : steps) {
      if (m == n) {
        pts.push_back(plane.point({a, e.add(b, t), 1}));
      } else {
        pts.push_back(plane.point({e.add(a, t), e.add(b, e.mul(t, static_cast<Elem>(m))), 1}));
      }
    }
    std::vector<ProjPoint> down;
    for (const auto& p : pts) down.push_back(fr.point_down(p));
    const Subspace span = pg4.span(pg4.span(down), fr.lift(fr.spread_reg()[m]));
    ASSERT_EQ(span.dimension(), 2);
  }
}

TEST(BruckBose, TangentConics) {
  const auto& fr = frame7();
  const Field& e = fr.big();
  const auto& plane = fr.plane();
  const TangentConic c0 = random_tangent_conic(fr, 0);
  EXPECT_EQ(c0.form, QuadraticForm::from_coefficients(e, 1, 0, 0, 0, 0, e.neg(1)));
  EXPECT_EQ(c0.p_inf, plane.point({0, 1, 0}));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TangentConic c = random_tangent_conic(fr, seed);
    EXPECT_TRUE(c.form.nondegenerate(e));
    EXPECT_EQ(c.affine.size(), 49U);
    std::size_t on_inf = 0;
    plane.for_each_point(fr.line_inf(), [&](const ProjPoint& p) { on_inf += c.form.evaluate(e, p) == 0; });
    EXPECT_EQ(on_inf, 1U);
    EXPECT_EQ(c.form.evaluate(e, c.p_inf), 0);
    for (const auto& p : c.affine) {
      EXPECT_EQ(c.form.evaluate(e, p), 0);
      EXPECT_NE(p[2], 0);
    }
    EXPECT_EQ(ids_of(plane, c.all_points()), ids_of(plane, conic_points(plane, c.form)));
    const TangentConic again = random_tangent_conic(fr, seed);
    EXPECT_EQ(again.form, c.form);
    EXPECT_EQ(again.affine, c.affine);
  }
}

TEST(BruckBose, BuildC) {
  const auto& fr = frame7();
  const auto& pg4 = fr.pg4();
  const auto c = build_C(fr, random_tangent_conic(fr, 0));
  ASSERT_EQ(c.size(), 49U);
  EXPECT_EQ(ids_of(pg4, c).size(), 49U);
  EXPECT_NE(std::find(c.begin(), c.end(), pg4.point({0, 0, 0, 0, 1})), c.end());
  for (const auto& x : c) EXPECT_FALSE(pg4.contains(fr.sigma_inf(), x));
}

TEST(BruckBose, PlanesThroughSpreadLinesMeetCInAtMostTwoPoints) {
  const auto& fr = frame7();
  const auto& pg4 = fr.pg4();
  for (std::uint64_t seed : {0U, 5U}) {
    const auto c = build_C(fr, random_tangent_conic(fr, seed));
    std::size_t tangent_planes = 0;
    for (const auto& l : fr.spread_reg()) {
      const Quotient qt(pg4, fr.lift(l));
      std::map<PointId, int> count;
      for (const auto& x : c) ++count[*qt.image_id(x)];
      for (const auto& [id, n] : count) {
        ASSERT_LE(n, 2);
        tangent_planes += n == 1;
      }
    }
    // planes meeting C once: images of the q^2 affine tangents and of the q^2
    // lines through the point at infinity of the conic
    EXPECT_EQ(tangent_planes, 98U);
  }
}

TEST(BruckBose, BaerClosureOfSubfieldQuadrangle) {
  const auto& fr = frame7();
  const auto& plane = fr.plane();
  const std::vector<ProjPoint> quad{plane.point({1, 0, 0}), plane.point({0, 1, 0}), plane.point({0, 0, 1}),
                                    plane.point({1, 1, 1})};
  const auto closure = baer_closure(fr, quad);
  ASSERT_EQ(closure.size(), 57U);
  for (const auto& p : closure) {
    for (unsigned i = 0; i < 3; ++i) EXPECT_TRUE(fr.ext().in_subfield(p[i]));
  }
  EXPECT_EQ(closure, baer_subplane(fr, quad));
  // diagonal points of the quadrangle
  const Field& e = fr.big();
  for (auto [a, b, c, d] : {std::array<int, 4>{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}}) {
    const Vec3 l1 = mat3::cross(e, mat3::of(quad[a]), mat3::of(quad[b]));
    const Vec3 l2 = mat3::cross(e, mat3::of(quad[c]), mat3::of(quad[d]));
    const Vec3 x = mat3::cross(e, l1, l2);
    const ProjPoint p = plane.point({x[0], x[1], x[2]});
    EXPECT_NE(std::find(closure.begin(), closure.end(), p), closure.end());
  }
  EXPECT_THROW(baer_closure(plane, quad, 20), ClosureOverflow);
  const std::vector<ProjPoint> degenerate{quad[0], quad[1], plane.point({1, 1, 0}), quad[2]};
  EXPECT_THROW(baer_closure(fr, degenerate), DegenerateInput);
}

TEST(BruckBose, BaerClosureOnRandomQuadrangles) {
  const auto& fr = frame7();
  const auto& plane = fr.plane();
  std::mt19937_64 rng(21);
  int done = 0;
  while (done < 50) {
    std::vector<ProjPoint> quad;
    for (int i = 0; i < 4; ++i) quad.push_back(plane.point_at(static_cast<PointId>(rng() % plane.point_count())));
    if (!is_arc(plane, quad).is_arc) continue;
    const auto closure = baer_closure(fr, quad);
    ASSERT_EQ(closure.size(), 57U);
    ASSERT_EQ(closure, baer_subplane(fr, quad));
    ++done;
  }
}

TEST(BruckBose, BaerClosureOverNonPrimeFieldGivesPrimeSubplane) {
  const BruckBoseFrame fr(Field::make(FieldSpec::for_order(9)));
  const auto& plane = fr.plane();
  const std::vector<ProjPoint> quad{plane.point({1, 0, 0}), plane.point({0, 1, 0}), plane.point({0, 0, 1}),
                                    plane.point({1, 1, 1})};
  EXPECT_EQ(baer_closure(fr, quad).size(), 13U);
  EXPECT_EQ(baer_subplane(fr, quad).size(), 91U);
}

TEST(BruckBose, Lemma1Canonical) {
  const auto& fr = frame7();
  const Lemma1Report r = verify_lemma1(fr, random_tangent_conic(fr, 0));
  EXPECT_EQ(r.c_points, 49U);
  EXPECT_EQ(r.cplanes, 56U);
  EXPECT_EQ(r.pairs_covered_once, 1176U);
  EXPECT_EQ(r.affine_off_conic, 2401U - 49U);
  // interior points of a conic in PG(2, s) number s(s-1)/2 and all are affine
  // here; exterior ones number s(s+1)/2 of which s lie on the tangent z = 0
  EXPECT_EQ(r.interior, 49U * 48U / 2);
  EXPECT_EQ(r.exterior, 49U * 50U / 2 - 49U);
  EXPECT_EQ(r.on_zero_planes, r.interior);
  EXPECT_EQ(r.on_two_planes, r.exterior);
  EXPECT_EQ(r.baer_checked, 10U);
  EXPECT_EQ(r.baer_closure_agreements, 10U);
}

TEST(BruckBose, Lemma1RandomSeedsAndThreads) {
  const auto& fr = frame7();
  for (std::uint64_t seed : {1U, 2U, 3U}) {
    Lemma1Options opt;
    opt.threads = 4;
    const Lemma1Report r = verify_lemma1(fr, random_tangent_conic(fr, seed), opt);
    EXPECT_EQ(r.cplanes, 56U);
    EXPECT_EQ(r.on_zero_planes, 1176U);
  }
}

TEST(BruckBose, Lemma1NonPrimeField) {
  const BruckBoseFrame fr(Field::make(FieldSpec::for_order(9)));
  Lemma1Options opt;
  opt.threads = 4;
  const Lemma1Report r = verify_lemma1(fr, random_tangent_conic(fr, 7), opt);
  EXPECT_EQ(r.cplanes, 90U);
  EXPECT_EQ(r.interior, 81U * 80U / 2);
  EXPECT_EQ(r.baer_checked, 10U);
  EXPECT_EQ(r.baer_closure_agreements, 0U);
}

TEST(BruckBose, Lemma1DetectsSwappedPoint) {
  const auto& fr = frame7();
  const auto conic = random_tangent_conic(fr, 0);
  auto c = build_C(fr, conic);
  const auto& pg4 = fr.pg4();
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    auto bad = c;
    ProjPoint x = bad[0];
    do {
      x = pg4.point({static_cast<Elem>(rng() % 7), static_cast<Elem>(rng() % 7), static_cast<Elem>(rng() % 7),
                     static_cast<Elem>(rng() % 7), 1});
    } while (std::find(c.begin(), c.end(), x) != c.end());
    bad[rng() % bad.size()] = x;
    Lemma1Options opt;
    opt.c_override = &bad;
    EXPECT_THROW(verify_lemma1(fr, conic, opt), LemmaViolation);
  }
}

TEST(BruckBose, DumpRoundTrip) {
  const auto& fr = frame7();
  const auto c = build_C(fr, random_tangent_conic(fr, 4));
  std::stringstream ss;
  write_c_dump(ss, fr.base().spec(), 4, c);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "q=7 poly=0,1 seed=4");
  const CDump d = parse_c_dump(ss, 7U);
  EXPECT_EQ(d.points, c);
  EXPECT_EQ(d.seed, 4U);
  EXPECT_EQ(d.spec.modulus, fr.base().spec().modulus);
}

TEST(BruckBose, DumpErrors) {
  const auto& fr = frame7();
  const auto c = build_C(fr, random_tangent_conic(fr, 0));
  auto dump_of = [&](std::vector<ProjPoint> pts) {
    std::stringstream ss;
    write_c_dump(ss, fr.base().spec(), 0, pts);
    return ss.str();
  };
  {
    auto pts = c;
    pts[5] = pts[4];
    std::stringstream ss(dump_of(pts));
    EXPECT_THROW(parse_c_dump(ss), SizeMismatch);
  }
  {
    auto pts = c;
    pts.pop_back();
    std::stringstream ss(dump_of(pts));
    EXPECT_THROW(parse_c_dump(ss), SizeMismatch);
  }
  {
    std::string text = dump_of(c);
    text += "1,2,3,4,0\n";
    std::stringstream ss(text);
    try {
      parse_c_dump(ss);
      FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find("not affine"), std::string::npos);
      EXPECT_NE(std::string(e.what()).find("line 51"), std::string::npos);
    }
  }
  {
    std::stringstream ss("q=7 poly=0,1 seed=0\n1,2,x,4,1\n");
    EXPECT_THROW(parse_c_dump(ss), ParseError);
  }
  {
    std::stringstream ss("q=9 poly=2,0,1 seed=0\n");
    EXPECT_THROW(parse_c_dump(ss), ParseError);
  }
  {
    std::stringstream ss(dump_of(c));
    EXPECT_THROW(parse_c_dump(ss, 9U), ParseError);
  }
}
