#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "aba/rng.hpp"

namespace aba {

// A field element is a plain integer in [0, p). We keep it a typedef rather
// than a wrapper struct: the share/reconstruct machinery stores millions of
// these and the Field object is the single place that enforces the range.
using Fe = uint64_t;

// Arithmetic in GF(p) for prime p < 2^31 (products fit in uint64). The prime
// is per-run state: the default modulus is 2147483647, tests use tiny primes
// so results can be checked by exhaustive enumeration.
class Field {
 public:
  explicit Field(uint64_t p);

  uint64_t p() const { return p_; }

  Fe add(Fe a, Fe b) const {
    Fe s = a + b;
    return s >= p_ ? s - p_ : s;
  }
  Fe sub(Fe a, Fe b) const { return a >= b ? a - b : a + p_ - b; }
  Fe neg(Fe a) const { return a == 0 ? 0 : p_ - a; }
  Fe mul(Fe a, Fe b) const { return (a * b) % p_; }
  Fe pow(Fe a, uint64_t e) const;
  // Multiplicative inverse; throws on zero.
  Fe inv(Fe a) const;
  // Reduces an arbitrary integer into the field.
  Fe reduce(uint64_t v) const { return v % p_; }

 private:
  uint64_t p_;
};

// Degree <= t univariate polynomial; coeffs[k] multiplies x^k and the vector
// length is exactly t+1 (leading coefficients may be zero).
struct UniPoly {
  std::vector<Fe> coeffs;

  unsigned degree_bound() const { return static_cast<unsigned>(coeffs.size()) - 1; }
  Fe eval(const Field& F, Fe x) const;
  bool operator==(const UniPoly&) const = default;
};

// Degree <= t in each variable; coefficient of x^i y^j is at a[i*(t+1)+j].
struct BiPoly {
  unsigned t = 0;
  std::vector<Fe> a;

  Fe coeff(unsigned i, unsigned j) const { return a[i * (t + 1) + j]; }
  Fe& coeff(unsigned i, unsigned j) { return a[i * (t + 1) + j]; }
  Fe eval(const Field& F, Fe x, Fe y) const;
  bool operator==(const BiPoly&) const = default;
};

struct Point {
  Fe x, y;
};

// coeffs[0] = secret, higher coefficients uniform.
UniPoly random_unipoly(const Field& F, Fe secret, unsigned t, Rng& rng);
// a_00 = secret, all other coefficients uniform.
BiPoly random_bipoly(const Field& F, Fe secret, unsigned t, Rng& rng);

// Row g_j(y) = f(j, y) and column h_j(x) = f(x, j); j must be in [1, n] with
// n < p (callers index processes by their id).
UniPoly bipoly_row(const Field& F, const BiPoly& f, uint64_t j);
UniPoly bipoly_col(const Field& F, const BiPoly& f, uint64_t j);

// Lagrange interpolation through exactly t+1 points with distinct x.
// Throws std::invalid_argument on duplicate x or wrong point count.
UniPoly interpolate_exact(const Field& F, const std::vector<Point>& pts, unsigned t);

struct UniFit {
  enum Status { Ok, Inconsistent };
  Status status = Ok;
  UniPoly poly;  // valid only when status == Ok
};

// Overdetermined interpolation: fits the t+1 points of smallest x and checks
// the rest against the result. Any consistent subset yields the same
// polynomial, so the answer does not depend on input order.
// Throws on duplicate x ("duplicate x") or |pts| < t+1 ("underdetermined").
UniFit interpolate_unipoly(const Field& F, std::vector<Point> pts, unsigned t);

struct BiConstraint {
  Fe x, y, v;  // f(x, y) = v
};

struct BiFit {
  enum Status { Ok, Inconsistent, Underdetermined };
  Status status = Ok;
  BiPoly poly;  // valid only when status == Ok
};

// Exact linear solve (Gaussian elimination over GF(p)) for the (t+1)^2
// coefficients. Keys (x, y) must be distinct; duplicates throw.
BiFit interpolate_bipoly(const Field& F, const std::vector<BiConstraint>& cons, unsigned t);

}  // namespace aba
