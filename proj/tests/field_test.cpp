#include "aba/field.hpp"

#include <map>
#include <set>

#include "doctest.h"

using namespace aba;

// ===========================================================================
// Brute-force oracles. These are deliberately the dumbest possible
// implementations: exhaustive search over the whole field / coefficient
// space. The real implementations must agree with them exactly.
// ===========================================================================

namespace {

Fe brute_inv(const Field& F, Fe a) {
  for (Fe b = 1; b < F.p(); ++b)
    if (F.mul(a, b) == 1) return b;
  return 0;  // unreachable for a != 0 in a field
}

// Enumerates every coefficient vector of length t+1 over GF(p).
template <typename Fn>
void for_each_unipoly(const Field& F, unsigned t, Fn fn) {
  std::vector<Fe> c(t + 1, 0);
  while (true) {
    fn(UniPoly{c});
    unsigned k = 0;
    while (k <= t && ++c[k] == F.p()) c[k++] = 0;
    if (k > t) return;
  }
}

// Enumerates every (t+1)x(t+1) coefficient matrix over GF(p).
template <typename Fn>
void for_each_bipoly(const Field& F, unsigned t, Fn fn) {
  const unsigned m = (t + 1) * (t + 1);
  BiPoly f;
  f.t = t;
  f.a.assign(m, 0);
  while (true) {
    fn(f);
    unsigned k = 0;
    while (k < m && ++f.a[k] == F.p()) f.a[k++] = 0;
    if (k >= m) return;
  }
}

// Brute-force bivariate solve: scan the whole coefficient space and classify
// by the number of polynomials satisfying every constraint.
BiFit brute_bipoly_solve(const Field& F, const std::vector<BiConstraint>& cons, unsigned t) {
  BiFit out;
  size_t hits = 0;
  for_each_bipoly(F, t, [&](const BiPoly& f) {
    for (const auto& c : cons)
      if (f.eval(F, c.x, c.y) != c.v) return;
    if (++hits == 1) out.poly = f;
  });
  if (hits == 0)
    out.status = BiFit::Inconsistent;
  else if (hits == 1)
    out.status = BiFit::Ok;
  else
    out.status = BiFit::Underdetermined;
  return out;
}

}  // namespace

// ===========================================================================
// Field arithmetic
// ===========================================================================

TEST_CASE("field inverse matches exhaustive search on small primes") {
  for (uint64_t p : {5ULL, 7ULL, 11ULL, 13ULL}) {
    Field F(p);
    for (Fe a = 1; a < p; ++a) {
      Fe inv = F.inv(a);
      CHECK(inv == brute_inv(F, a));
      CHECK(F.mul(a, inv) == 1);
    }
  }
}

TEST_CASE("field inverse frozen values") {
  Field F(7);
  CHECK(F.inv(1) == 1);
  CHECK(F.inv(3) == 5);  // 3*5 = 15 = 1 mod 7
  CHECK_THROWS_AS(F.inv(0), std::domain_error);
}

TEST_CASE("field constructor rejects non-primes and oversized moduli") {
  CHECK_THROWS_AS(Field(6), std::invalid_argument);
  CHECK_THROWS_AS(Field(1), std::invalid_argument);
  CHECK_THROWS_AS(Field(1ULL << 32), std::invalid_argument);
  CHECK_NOTHROW(Field(2147483647));  // default run modulus, a Mersenne prime
}

TEST_CASE("field arithmetic basics at the default modulus") {
  Field F(2147483647);
  CHECK(F.add(F.p() - 1, 5) == 4);
  CHECK(F.sub(3, 7) == F.p() - 4);
  CHECK(F.mul(F.p() - 1, F.p() - 1) == 1);  // (-1)^2
  CHECK(F.pow(2, 31) == 1);                 // 2^31 = p + 1
  CHECK(F.pow(2, 62) == 1);
  CHECK(F.inv(2) == (F.p() + 1) / 2);
}

// ===========================================================================
// Univariate interpolation
// ===========================================================================

TEST_CASE("interpolation frozen examples, p=7 t=1") {
  Field F(7);
  auto fit = interpolate_unipoly(F, {{1, 2}, {2, 3}}, 1);
  REQUIRE(fit.status == UniFit::Ok);
  CHECK(fit.poly.coeffs == std::vector<Fe>{1, 1});  // x + 1

  fit = interpolate_unipoly(F, {{1, 2}, {2, 3}, {3, 4}}, 1);
  REQUIRE(fit.status == UniFit::Ok);
  CHECK(fit.poly.coeffs == std::vector<Fe>{1, 1});

  fit = interpolate_unipoly(F, {{1, 2}, {2, 3}, {3, 5}}, 1);
  CHECK(fit.status == UniFit::Inconsistent);
}

TEST_CASE("interpolation error cases") {
  Field F(7);
  CHECK_THROWS_AS(interpolate_unipoly(F, {{1, 2}}, 1), std::invalid_argument);         // underdetermined
  CHECK_THROWS_AS(interpolate_unipoly(F, {{1, 2}, {1, 3}}, 1), std::invalid_argument); // duplicate x
}

TEST_CASE("interpolation round-trips every polynomial over small primes") {
  // Exhaustive: every degree<=t polynomial, evaluated at t+1 points, comes
  // back exactly; with extra consistent points it still comes back; with one
  // perturbed extra point it is flagged Inconsistent.
  for (uint64_t p : {5ULL, 7ULL, 11ULL, 13ULL}) {
    Field F(p);
    for (unsigned t = 0; t <= 2; ++t) {
      for_each_unipoly(F, t, [&](const UniPoly& f) {
        std::vector<Point> pts;
        for (Fe x = 1; x <= t + 1; ++x) pts.push_back({x, f.eval(F, x)});
        auto fit = interpolate_unipoly(F, pts, t);
        REQUIRE(fit.status == UniFit::Ok);
        REQUIRE(fit.poly == f);

        if (t + 2 < p) {
          auto extra = pts;
          extra.push_back({t + 2, f.eval(F, t + 2)});
          fit = interpolate_unipoly(F, extra, t);
          REQUIRE(fit.status == UniFit::Ok);
          REQUIRE(fit.poly == f);

          extra.back().y = F.add(extra.back().y, 1);
          fit = interpolate_unipoly(F, extra, t);
          REQUIRE(fit.status == UniFit::Inconsistent);
        }
      });
    }
  }
}

TEST_CASE("interpolation is order-independent") {
  Field F(13);
  Rng rng(42);
  for (int iter = 0; iter < 200; ++iter) {
    unsigned t = 1 + rng.below(2);
    UniPoly f = random_unipoly(F, rng.below(13), t, rng);
    std::vector<Point> pts;
    for (Fe x = 1; x <= t + 2; ++x) pts.push_back({x, f.eval(F, x)});
    // Shuffle.
    for (size_t i = pts.size(); i > 1; --i) std::swap(pts[i - 1], pts[rng.below(i)]);
    auto fit = interpolate_unipoly(F, pts, t);
    REQUIRE(fit.status == UniFit::Ok);
    REQUIRE(fit.poly == f);
  }
}

// ===========================================================================
// Random polynomial generation
// ===========================================================================

TEST_CASE("random_unipoly pins the secret and reproduces per seed") {
  Field F(7);
  Rng r1(99), r2(99), r3(100);
  auto a = random_unipoly(F, 4, 1, r1);
  auto b = random_unipoly(F, 4, 1, r2);
  auto c = random_unipoly(F, 4, 1, r3);
  CHECK(a == b);
  CHECK(a.eval(F, 0) == 4);
  CHECK(c.eval(F, 0) == 4);

  Rng r4(7);
  auto d = random_unipoly(F, 4, 0, r4);
  CHECK(d.coeffs == std::vector<Fe>{4});  // t=0 forces the constant
}

TEST_CASE("random_bipoly pins the secret") {
  Field F(11);
  Rng rng(5);
  for (int iter = 0; iter < 50; ++iter) {
    auto f = random_bipoly(F, 2, 1 + rng.below(3), rng);
    CHECK(f.eval(F, 0, 0) == 2);
  }
  Rng r0(1);
  auto c = random_bipoly(F, 2, 0, r0);
  CHECK(c.a == std::vector<Fe>{2});
}

// ===========================================================================
// Bivariate rows/columns
// ===========================================================================

TEST_CASE("bipoly rows and columns") {
  Field F(7);

  // f(x,y) = x*y: t=1, coefficient of x^1 y^1 is 1.
  BiPoly f;
  f.t = 1;
  f.a = {0, 0, 0, 1};
  auto g2 = bipoly_row(F, f, 2);
  CHECK(g2.coeffs == std::vector<Fe>{0, 2});  // g_2(y) = 2y

  // Constant bipoly.
  BiPoly c;
  c.t = 1;
  c.a = {5, 0, 0, 0};
  for (uint64_t j = 1; j <= 4; ++j) {
    CHECK(bipoly_row(F, c, j).coeffs == std::vector<Fe>{5, 0});
    CHECK(bipoly_col(F, c, j).coeffs == std::vector<Fe>{5, 0});
  }

  // Row/col consistency: row(k) at l == col(l) at k == f(k,l).
  Rng rng(3);
  for (int iter = 0; iter < 20; ++iter) {
    auto r = random_bipoly(F, rng.below(7), 2, rng);
    for (uint64_t k = 1; k <= 4; ++k)
      for (uint64_t l = 1; l <= 4; ++l) {
        CHECK(bipoly_row(F, r, k).eval(F, l) == r.eval(F, k, l));
        CHECK(bipoly_col(F, r, l).eval(F, k) == r.eval(F, k, l));
      }
  }

  CHECK_THROWS_AS(bipoly_row(F, f, 0), std::invalid_argument);
  CHECK_THROWS_AS(bipoly_col(F, f, 7), std::invalid_argument);
}

// ===========================================================================
// Bivariate solving
// ===========================================================================

TEST_CASE("bipoly solver frozen examples") {
  Field F(7);

  auto fit = interpolate_bipoly(F, {{1, 1, 5}}, 0);
  REQUIRE(fit.status == BiFit::Ok);
  CHECK(fit.poly.a == std::vector<Fe>{5});

  // Full 2x2 grid of f(x,y) = x + y.
  std::vector<BiConstraint> grid;
  for (Fe k = 1; k <= 2; ++k)
    for (Fe l = 1; l <= 2; ++l) grid.push_back({k, l, F.add(k, l)});
  fit = interpolate_bipoly(F, grid, 1);
  REQUIRE(fit.status == BiFit::Ok);
  CHECK(fit.poly.a == std::vector<Fe>{0, 1, 1, 0});  // x + y

  // Three points of that grid only: rank-deficient.
  grid.pop_back();
  fit = interpolate_bipoly(F, grid, 1);
  CHECK(fit.status == BiFit::Underdetermined);

  CHECK_THROWS_AS(interpolate_bipoly(F, {{1, 1, 0}, {1, 1, 1}}, 1), std::invalid_argument);
}

TEST_CASE("bipoly solver agrees with coefficient-space enumeration, p<=7 t<=1") {
  for (uint64_t p : {5ULL, 7ULL}) {
    Field F(p);
    Rng rng(p);
    for (unsigned t = 0; t <= 1; ++t) {
      // A catalog of constraint sets: random instances of every size 1..6
      // with coordinates in [1, 4], values random (often unsatisfiable),
      // plus exact grids from random polynomials.
      for (int iter = 0; iter < 60; ++iter) {
        std::vector<BiConstraint> cons;
        std::set<std::pair<Fe, Fe>> used;
        size_t want = 1 + rng.below(6);
        while (cons.size() < want) {
          Fe x = 1 + rng.below(4), y = 1 + rng.below(4);
          if (!used.insert({x, y}).second) continue;
          cons.push_back({x, y, rng.below(p)});
        }
        auto got = interpolate_bipoly(F, cons, t);
        auto want_fit = brute_bipoly_solve(F, cons, t);
        REQUIRE(got.status == want_fit.status);
        if (got.status == BiFit::Ok) REQUIRE(got.poly == want_fit.poly);
      }
      for (int iter = 0; iter < 20; ++iter) {
        auto f = random_bipoly(F, rng.below(p), t, rng);
        std::vector<BiConstraint> cons;
        for (Fe k = 1; k <= t + 1; ++k)
          for (Fe l = 1; l <= t + 1; ++l) cons.push_back({k, l, f.eval(F, k, l)});
        auto got = interpolate_bipoly(F, cons, t);
        REQUIRE(got.status == BiFit::Ok);
        REQUIRE(got.poly == f);
        auto want_fit = brute_bipoly_solve(F, cons, t);
        REQUIRE(want_fit.status == BiFit::Ok);
        REQUIRE(got.poly == want_fit.poly);
      }
    }
  }
}

TEST_CASE("bipoly grid round-trips at p in {11,13}, t<=2") {
  for (uint64_t p : {11ULL, 13ULL}) {
    Field F(p);
    Rng rng(p * 31);
    for (unsigned t = 0; t <= 2; ++t) {
      for (int iter = 0; iter < 40; ++iter) {
        auto f = random_bipoly(F, rng.below(p), t, rng);
        std::vector<BiConstraint> cons;
        for (Fe k = 1; k <= t + 1; ++k)
          for (Fe l = 1; l <= t + 1; ++l) cons.push_back({k, l, f.eval(F, k, l)});
        auto got = interpolate_bipoly(F, cons, t);
        REQUIRE(got.status == BiFit::Ok);
        REQUIRE(got.poly == f);

        // Perturb one grid value: with a full-rank grid this must be
        // inconsistent... only when there is an extra constraint pinning it.
        cons.push_back({t + 2, 1, f.eval(F, t + 2, 1)});
        got = interpolate_bipoly(F, cons, t);
        REQUIRE(got.status == BiFit::Ok);
        cons.back().v = F.add(cons.back().v, 1);
        got = interpolate_bipoly(F, cons, t);
        REQUIRE(got.status == BiFit::Inconsistent);

        // Dropping below (t+1)^2 independent constraints: underdetermined.
        if (t > 0) {
          std::vector<BiConstraint> few(cons.begin(), cons.begin() + (t + 1) * (t + 1) - 1);
          got = interpolate_bipoly(F, few, t);
          REQUIRE(got.status == BiFit::Underdetermined);
        }
      }
    }
  }
}

// ===========================================================================
// Hiding substrate: the share distribution itself
// ===========================================================================

TEST_CASE("any t evaluations of a fresh share polynomial are uniform (p=5)") {
  Field F(5);

  // t=1: for fixed secret s, each evaluation point x != 0 sees every field
  // value exactly once as the blinding coefficient sweeps GF(5).
  for (Fe s = 0; s < 5; ++s) {
    for (Fe x = 1; x < 5; ++x) {
      std::map<Fe, int> counts;
      for (Fe b = 0; b < 5; ++b) counts[UniPoly{{s, b}}.eval(F, x)]++;
      for (auto& [v, c] : counts) CHECK(c == 1);
      CHECK(counts.size() == 5);
    }
  }

  // t=2: joint distribution of evaluations at any two distinct nonzero
  // points is exactly uniform over GF(5)^2 (25 polynomials, 25 cells).
  for (Fe s = 0; s < 5; ++s) {
    for (Fe x1 = 1; x1 < 5; ++x1)
      for (Fe x2 = x1 + 1; x2 < 5; ++x2) {
        std::map<std::pair<Fe, Fe>, int> counts;
        for (Fe b1 = 0; b1 < 5; ++b1)
          for (Fe b2 = 0; b2 < 5; ++b2) {
            UniPoly f{{s, b1, b2}};
            counts[{f.eval(F, x1), f.eval(F, x2)}]++;
          }
        CHECK(counts.size() == 25);
        for (auto& [v, c] : counts) CHECK(c == 1);
      }
  }
}
