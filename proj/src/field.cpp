#include "aba/field.hpp"

#include <algorithm>

namespace aba {

namespace {

bool is_prime(uint64_t p) {
  if (p < 2) return false;
  for (uint64_t d = 2; d * d <= p; ++d)
    if (p % d == 0) return false;
  return true;
}

}  // namespace

Field::Field(uint64_t p) : p_(p) {
  if (p >= (1ULL << 31)) throw std::invalid_argument("field: modulus must be < 2^31");
  if (!is_prime(p)) throw std::invalid_argument("field: modulus must be prime");
}

Fe Field::pow(Fe a, uint64_t e) const {
  Fe r = 1, b = a % p_;
  while (e) {
    if (e & 1) r = mul(r, b);
    b = mul(b, b);
    e >>= 1;
  }
  return r;
}

Fe Field::inv(Fe a) const {
  if (a == 0) throw std::domain_error("division by zero in field");
  return pow(a, p_ - 2);
}

Fe UniPoly::eval(const Field& F, Fe x) const {
  // Horner, highest coefficient first.
  Fe acc = 0;
  for (size_t k = coeffs.size(); k-- > 0;) acc = F.add(F.mul(acc, x), coeffs[k]);
  return acc;
}

Fe BiPoly::eval(const Field& F, Fe x, Fe y) const {
  Fe acc = 0;
  for (unsigned i = t + 1; i-- > 0;) {
    Fe row = 0;
    for (unsigned j = t + 1; j-- > 0;) row = F.add(F.mul(row, y), coeff(i, j));
    acc = F.add(F.mul(acc, x), row);
  }
  return acc;
}

UniPoly random_unipoly(const Field& F, Fe secret, unsigned t, Rng& rng) {
  UniPoly f;
  f.coeffs.resize(t + 1);
  f.coeffs[0] = secret;
  for (unsigned k = 1; k <= t; ++k) f.coeffs[k] = rng.below(F.p());
  return f;
}

BiPoly random_bipoly(const Field& F, Fe secret, unsigned t, Rng& rng) {
  BiPoly f;
  f.t = t;
  f.a.resize((t + 1) * (t + 1));
  for (auto& c : f.a) c = rng.below(F.p());
  f.coeff(0, 0) = secret;
  return f;
}

UniPoly bipoly_row(const Field& F, const BiPoly& f, uint64_t j) {
  if (j == 0 || j >= F.p()) throw std::invalid_argument("bipoly_row: index out of range");
  // g_j(y) = sum_j' (sum_i a_ij' j^i) y^j'
  UniPoly g;
  g.coeffs.resize(f.t + 1);
  for (unsigned jy = 0; jy <= f.t; ++jy) {
    Fe acc = 0;
    for (unsigned i = f.t + 1; i-- > 0;) acc = F.add(F.mul(acc, j), f.coeff(i, jy));
    g.coeffs[jy] = acc;
  }
  return g;
}

UniPoly bipoly_col(const Field& F, const BiPoly& f, uint64_t j) {
  if (j == 0 || j >= F.p()) throw std::invalid_argument("bipoly_col: index out of range");
  UniPoly h;
  h.coeffs.resize(f.t + 1);
  for (unsigned ix = 0; ix <= f.t; ++ix) {
    Fe acc = 0;
    for (unsigned jy = f.t + 1; jy-- > 0;) acc = F.add(F.mul(acc, j), f.coeff(ix, jy));
    h.coeffs[ix] = acc;
  }
  return h;
}

UniPoly interpolate_exact(const Field& F, const std::vector<Point>& pts, unsigned t) {
  if (pts.size() != t + 1) throw std::invalid_argument("interpolate_exact: need exactly t+1 points");
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      if (pts[i].x == pts[j].x) throw std::invalid_argument("interpolate: duplicate x");

  // Sum of y_i * prod_{k!=i} (x - x_k) / (x_i - x_k), accumulated in
  // coefficient form.
  UniPoly out;
  out.coeffs.assign(t + 1, 0);
  std::vector<Fe> basis;
  for (size_t i = 0; i <= t; ++i) {
    basis.assign(1, 1);  // polynomial "1"
    Fe denom = 1;
    for (size_t k = 0; k <= t; ++k) {
      if (k == i) continue;
      // basis *= (x - x_k)
      basis.push_back(0);
      for (size_t d = basis.size() - 1; d > 0; --d)
        basis[d] = F.add(basis[d - 1], F.mul(basis[d], F.neg(pts[k].x)));
      basis[0] = F.mul(basis[0], F.neg(pts[k].x));
      denom = F.mul(denom, F.sub(pts[i].x, pts[k].x));
    }
    Fe w = F.mul(pts[i].y, F.inv(denom));
    for (size_t d = 0; d < basis.size(); ++d)
      out.coeffs[d] = F.add(out.coeffs[d], F.mul(w, basis[d]));
  }
  return out;
}

UniFit interpolate_unipoly(const Field& F, std::vector<Point> pts, unsigned t) {
  if (pts.size() < t + 1) throw std::invalid_argument("interpolate: underdetermined");
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
  for (size_t i = 1; i < pts.size(); ++i)
    if (pts[i].x == pts[i - 1].x) throw std::invalid_argument("interpolate: duplicate x");

  std::vector<Point> head(pts.begin(), pts.begin() + t + 1);
  UniFit fit;
  fit.poly = interpolate_exact(F, head, t);
  for (size_t i = t + 1; i < pts.size(); ++i) {
    if (fit.poly.eval(F, pts[i].x) != pts[i].y) {
      fit.status = UniFit::Inconsistent;
      return fit;
    }
  }
  fit.status = UniFit::Ok;
  return fit;
}

BiFit interpolate_bipoly(const Field& F, const std::vector<BiConstraint>& cons, unsigned t) {
  for (size_t i = 0; i < cons.size(); ++i)
    for (size_t j = i + 1; j < cons.size(); ++j)
      if (cons[i].x == cons[j].x && cons[i].y == cons[j].y)
        throw std::invalid_argument("interpolate_bipoly: duplicate key");

  const unsigned m = (t + 1) * (t + 1);
  // Augmented matrix, one row per constraint: coefficients x^i y^j, rhs v.
  std::vector<std::vector<Fe>> rows;
  rows.reserve(cons.size());
  for (const auto& c : cons) {
    std::vector<Fe> row(m + 1);
    Fe xp = 1;
    for (unsigned i = 0; i <= t; ++i) {
      Fe yp = 1;
      for (unsigned j = 0; j <= t; ++j) {
        row[i * (t + 1) + j] = F.mul(xp, yp);
        yp = F.mul(yp, c.y);
      }
      xp = F.mul(xp, c.x);
    }
    row[m] = c.v;
    rows.push_back(std::move(row));
  }

  // Gaussian elimination with first-nonzero pivoting (deterministic).
  unsigned rank = 0;
  std::vector<unsigned> pivot_col;
  for (unsigned col = 0; col < m && rank < rows.size(); ++col) {
    size_t piv = rows.size();
    for (size_t r = rank; r < rows.size(); ++r)
      if (rows[r][col] != 0) {
        piv = r;
        break;
      }
    if (piv == rows.size()) continue;
    std::swap(rows[rank], rows[piv]);
    Fe iv = F.inv(rows[rank][col]);
    for (unsigned cc = col; cc <= m; ++cc) rows[rank][cc] = F.mul(rows[rank][cc], iv);
    for (size_t r = 0; r < rows.size(); ++r) {
      if (r == rank || rows[r][col] == 0) continue;
      Fe factor = rows[r][col];
      for (unsigned cc = col; cc <= m; ++cc)
        rows[r][cc] = F.sub(rows[r][cc], F.mul(factor, rows[rank][cc]));
    }
    pivot_col.push_back(col);
    ++rank;
  }

  BiFit fit;
  for (size_t r = rank; r < rows.size(); ++r)
    if (rows[r][m] != 0) {
      fit.status = BiFit::Inconsistent;
      return fit;
    }
  if (rank < m) {
    fit.status = BiFit::Underdetermined;
    return fit;
  }

  fit.status = BiFit::Ok;
  fit.poly.t = t;
  fit.poly.a.assign(m, 0);
  for (unsigned r = 0; r < rank; ++r) fit.poly.a[pivot_col[r]] = rows[r][m];
  return fit;
}

}  // namespace aba
