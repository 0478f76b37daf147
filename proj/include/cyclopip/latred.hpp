#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "real.hpp"
#include "zlinalg.hpp"

namespace cyclopip {

inline Int vec_norm2(const std::vector<Int>& v) {
  Int s = 0;
  for (const Int& e : v) s += e * e;
  return s;
}

/**
 * Exact integral LLL (de Weger / Cohen 2.6.7 formulation): Gram-Schmidt data
 * kept as integers d_i = det(Gram of first i rows) and lambda_{ij} =
 * d_{j+1} mu_{ij}. No floating point anywhere, so the Lovasz condition on
 * the output is exact. delta = num/den, in (1/4, 1).
 *
 * Throws invalid_argument on dependent rows.
 */
inline IntMat lll(const IntMat& b, long delta_num = 99,
                  long delta_den = 100) {
  const std::size_t k = b.rows();
  if (k == 0) return b;
  if (4 * delta_num <= delta_den || delta_num >= delta_den)
    throw std::invalid_argument("lll: delta outside (1/4, 1)");
  IntMat rows = b;

  std::vector<Int> d(k + 1);
  d[0] = 1;
  std::vector<std::vector<Int>> lam(k, std::vector<Int>(k));

  auto dot = [&](std::size_t i, std::size_t j) {
    Int s = 0;
    for (std::size_t t = 0; t < rows.cols(); ++t)
      s += rows.at(i, t) * rows.at(j, t);
    return s;
  };

  // compute lambda row i (j <= i) from current rows
  auto compute_lam_row = [&](std::size_t i) {
    for (std::size_t j = 0; j <= i; ++j) {
      Int u = dot(i, j);
      for (std::size_t t = 0; t < j; ++t)
        u = (d[t + 1] * u - lam[i][t] * lam[j][t]) / d[t];
      if (j < i)
        lam[i][j] = u;
      else {
        d[i + 1] = u;
        if (u <= 0) throw std::invalid_argument("lll: dependent rows");
      }
    }
  };

  auto red = [&](std::size_t kk, std::size_t l) {
    // |2 lambda_{kk,l}| > d_{l+1}: reduce row kk by q * row l
    Int two = 2 * lam[kk][l];
    if (abs(two) <= d[l + 1]) return;
    Int q = floor_div(two + d[l + 1], 2 * d[l + 1]);
    for (std::size_t t = 0; t < rows.cols(); ++t)
      rows.at(kk, t) -= q * rows.at(l, t);
    lam[kk][l] -= q * d[l + 1];
    for (std::size_t t = 0; t < l; ++t) lam[kk][t] -= q * lam[l][t];
  };

  std::size_t kmax = 0;
  compute_lam_row(0);
  std::size_t kk = 1;
  while (kk < k) {
    if (kk > kmax) {
      kmax = kk;
      compute_lam_row(kk);
    }
    red(kk, kk - 1);
    // Lovasz (integer form): swap when
    //   den*(d[kk+1] d[kk-1] + lam^2) < num * d[kk]^2
    Int lamv = lam[kk][kk - 1];
    if (Int(delta_den) * (d[kk + 1] * d[kk - 1] + lamv * lamv) <
        Int(delta_num) * d[kk] * d[kk]) {
      // SWAP(kk)
      for (std::size_t t = 0; t < rows.cols(); ++t)
        std::swap(rows.at(kk, t), rows.at(kk - 1, t));
      for (std::size_t j = 0; j + 1 < kk; ++j)
        std::swap(lam[kk][j], lam[kk - 1][j]);
      Int B = (d[kk - 1] * d[kk + 1] + lamv * lamv) / d[kk];
      for (std::size_t i = kk + 1; i <= kmax; ++i) {
        Int t = lam[i][kk];
        lam[i][kk] = (d[kk + 1] * lam[i][kk - 1] - lamv * t) / d[kk];
        lam[i][kk - 1] = (B * t + lamv * lam[i][kk]) / d[kk + 1];
      }
      d[kk] = B;
      kk = kk > 1 ? kk - 1 : 1;
    } else {
      for (std::size_t l = kk - 1; l-- > 0;) red(kk, l);
      ++kk;
    }
  }
  return rows;
}

struct GsoReal {
  std::vector<std::vector<Real>> mu;  // lower triangular, mu[i][i] = 1
  std::vector<Real> bstar2;           // squared GSO norms
};

inline GsoReal gso_real(const std::vector<std::vector<Real>>& rows) {
  const std::size_t k = rows.size();
  GsoReal g;
  g.mu.assign(k, std::vector<Real>(k, Real(0)));
  g.bstar2.assign(k, Real(0));
  std::vector<std::vector<Real>> bstar = rows;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      Real num(0);
      for (std::size_t t = 0; t < rows[i].size(); ++t)
        num += rows[i][t] * bstar[j][t];
      Real m = num / g.bstar2[j];
      g.mu[i][j] = m;
      for (std::size_t t = 0; t < rows[i].size(); ++t)
        bstar[i][t] -= m * bstar[j][t];
    }
    g.mu[i][i] = 1;
    Real s(0);
    for (const Real& e : bstar[i]) s += e * e;
    g.bstar2[i] = s;
  }
  return g;
}

inline std::vector<std::vector<Real>> to_real_rows(const IntMat& m) {
  std::vector<std::vector<Real>> r(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    r[i].reserve(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j)
      r[i].push_back(to_real(m.at(i, j)));
  }
  return r;
}

namespace detail {

/**
 * Schnorr-Euchner enumeration of the shortest nonzero vector in the
 * projected lattice spanned by GSO block [lo, hi). Returns block-local
 * coefficients, or nullopt if nothing beats radius2. Deterministic zig-zag
 * order; node budget guards runaway trees.
 */
inline std::optional<std::vector<long>> enumerate_shortest(
    const GsoReal& g, std::size_t lo, std::size_t hi, Real radius2,
    std::size_t node_budget = 40000000) {
  const std::size_t m = hi - lo;
  std::vector<long> x(m, 0), best;
  Real best2 = radius2;
  std::size_t nodes = 0;

  // depth-first over levels i = m-1 .. 0 (level i fixes x[i])
  struct Frame {
    Real center;
    long step;  // zig-zag counter
  };
  std::vector<Frame> fr(m);
  std::vector<Real> partial(m + 1, Real(0));  // dist^2 accumulated above i

  // center at level i given x[i+1..m-1]
  auto center_at = [&](std::size_t i) {
    Real c(0);
    for (std::size_t j = i + 1; j < m; ++j)
      c -= Real(x[j]) * g.mu[lo + j][lo + i];
    return c;
  };
  auto value_at = [&](std::size_t i, long step) {
    // zig-zag around round(center), nearer side first: |x - center| is then
    // non-decreasing in step, which justifies pruning a whole level
    long base = long(round_to_int(fr[i].center).get_si());
    if (step == 0) return base;
    long mag = (step + 1) / 2;
    bool pos_first = fr[i].center >= Real(base);
    bool odd = (step % 2) == 1;
    long off = (odd == pos_first) ? mag : -mag;
    return base + off;
  };

  std::size_t i = m - 1;
  fr[i].center = center_at(i);
  fr[i].step = 0;
  for (;;) {
    if (++nodes > node_budget)
      throw std::runtime_error("enumeration budget exceeded");
    long xi = value_at(i, fr[i].step);
    Real diff = Real(xi) - fr[i].center;
    Real dist = partial[i + 1] + diff * diff * g.bstar2[lo + i];
    if (dist < best2) {
      x[i] = xi;
      if (i == 0) {
        bool zero = true;
        for (long v : x)
          if (v != 0) zero = false;
        if (!zero) {
          best = x;
          best2 = dist;
        }
        ++fr[i].step;
      } else {
        partial[i] = dist;
        --i;
        fr[i].center = center_at(i);
        fr[i].step = 0;
      }
    } else {
      // exceeding radius at this step: larger |offsets| only grow, done here
      if (i == m - 1) break;
      ++i;
      ++fr[i].step;
    }
  }
  if (best.empty()) return std::nullopt;
  return best;
}

/** Unimodular matrix with first row = c (c primitive). */
inline IntMat unimodular_completion(const std::vector<Int>& c) {
  const std::size_t k = c.size();
  IntMat col(k, 1);
  for (std::size_t i = 0; i < k; ++i) col.at(i, 0) = c[i];
  std::size_t rank = 0;
  auto [h, u] = hnf_with_transform(col, &rank);
  if (rank != 1 || h.at(0, 0) != 1)
    throw std::invalid_argument("unimodular_completion: not primitive");
  // u * col = e_0, so col = u^{-1} e_0; (u^{-1})^T has first row c
  std::size_t r2 = 0;
  auto [id, uinv] = hnf_with_transform(u, &r2);
  if (id.rows() != k)
    throw std::logic_error("unimodular_completion: bad inverse");
  IntMat m(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) m.at(i, j) = uinv.at(j, i);
  return m;
}

/** Replace rows [lo, hi) by M * rows[lo, hi) (M unimodular). */
inline void apply_block_transform(IntMat& rows, std::size_t lo,
                                  const IntMat& m) {
  const std::size_t k = m.rows();
  IntMat block(k, rows.cols());
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < rows.cols(); ++j) {
      Int acc = 0;
      for (std::size_t t = 0; t < k; ++t)
        acc += m.at(i, t) * rows.at(lo + t, j);
      block.at(i, j) = acc;
    }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < rows.cols(); ++j)
      rows.at(lo + i, j) = block.at(i, j);
}

/** LLL applied in place to the tail rows [lo, end). */
inline void lll_tail(IntMat& rows, std::size_t lo) {
  const std::size_t k = rows.rows() - lo;
  if (k < 2) return;
  IntMat tail(k, rows.cols());
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < rows.cols(); ++j)
      tail.at(i, j) = rows.at(lo + i, j);
  tail = lll(tail);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < rows.cols(); ++j)
      rows.at(lo + i, j) = tail.at(i, j);
}

inline unsigned gso_precision_for(const IntMat& b) {
  std::size_t maxbits = 1;
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      std::size_t s = mpz_sizeinbase(b.at(i, j).get_mpz_t(), 2);
      if (s > maxbits) maxbits = s;
    }
  return unsigned(2 * maxbits + 16 * b.rows() + 96);
}

}  // namespace detail

/**
 * HKZ reduction by iterated projected-shortest-vector insertion. b_1 of the
 * output is a shortest nonzero lattice vector. Hermite's bound
 * ||b_1||^2k <= k^k det(Gram) is asserted exactly.
 */
inline IntMat hkz(const IntMat& b) {
  const std::size_t k = b.rows();
  if (k > 44) throw std::runtime_error("hkz: dimension beyond enumeration budget");
  if (k == 0) return b;
  IntMat rows = lll(b);
  PrecisionGuard guard(detail::gso_precision_for(rows));
  for (std::size_t i = 0; i + 1 < k; ++i) {
    GsoReal g = gso_real(to_real_rows(rows));
    Real radius2 = g.bstar2[i] * Real("1.0000001");
    auto x = detail::enumerate_shortest(g, i, k, radius2);
    if (!x) continue;  // b_i already shortest in the projection
    bool trivial = (*x)[0] == 1 || (*x)[0] == -1;
    for (std::size_t j = 1; j < x->size(); ++j)
      if ((*x)[j] != 0) trivial = false;
    if (trivial) continue;
    std::vector<Int> c;
    for (long v : *x) c.emplace_back(v);
    IntMat m = detail::unimodular_completion(c);
    detail::apply_block_transform(rows, i, m);
    detail::lll_tail(rows, i + 1);
  }
  // Hermite bound assert: ||b1||^2k <= k^k det(Gram)
  Int n2 = vec_norm2(rows.row(0));
  Int lhs;
  mpz_pow_ui(lhs.get_mpz_t(), n2.get_mpz_t(), k);
  Int kk;
  mpz_ui_pow_ui(kk.get_mpz_t(), k, k);
  Int gram = det_bareiss(rows.mul(transpose(rows)));
  if (lhs > kk * gram) throw std::logic_error("hkz: Hermite bound violated");
  return rows;
}

/**
 * BKZ with block size l: LLL plus sliding-window projected enumeration,
 * bounded tours (default 2k). Asserts the Schnorr-style bound
 * ||b_1|| <= l^{k/l} det^{1/k} (documented slack over Lemma-quality
 * l^{k/2l}, covering gamma_l <= l and the exponent rounding).
 */
inline IntMat bkz(const IntMat& b, std::size_t l, std::size_t max_tours = 0) {
  const std::size_t k = b.rows();
  if (k == 0) return b;
  if (l < 2) throw std::invalid_argument("bkz: block size must be >= 2");
  if (l > k) l = k;
  if (max_tours == 0) max_tours = 2 * k;
  IntMat rows = lll(b);
  PrecisionGuard guard(detail::gso_precision_for(rows));
  for (std::size_t tour = 0; tour < max_tours; ++tour) {
    bool changed = false;
    for (std::size_t j = 0; j + 1 < k; ++j) {
      std::size_t e = std::min(j + l, k);
      GsoReal g = gso_real(to_real_rows(rows));
      Real radius2 = g.bstar2[j] * Real("0.9999");
      auto x = detail::enumerate_shortest(g, j, e, radius2);
      if (!x) continue;
      std::vector<Int> c;
      for (long v : *x) c.emplace_back(v);
      IntMat m = detail::unimodular_completion(c);
      detail::apply_block_transform(rows, j, m);
      detail::lll_tail(rows, j);
      changed = true;
    }
    if (!changed) break;
  }
  // quality check in floating point with margin
  {
    GsoReal g = gso_real(to_real_rows(rows));
    Real det2(1);
    for (const Real& v : g.bstar2) det2 *= v;
    Real bound = pow(Real(double(l)), Real(2.0 * double(k) / double(l))) *
                 pow(det2, Real(1) / Real(double(k)));
    Real b1 = Real(0);
    for (std::size_t t = 0; t < rows.cols(); ++t)
      b1 += to_real(rows.at(0, t)) * to_real(rows.at(0, t));
    if (b1 > bound * Real("1.000001"))
      throw std::logic_error("bkz: quality bound violated");
  }
  return rows;
}

/**
 * Babai nearest plane on a real basis (k rows, dimension >= k). Returns the
 * integer coefficient vector x; the decoded point is x * basis.
 */
inline std::vector<Int> babai_nearest_plane(
    const std::vector<std::vector<Real>>& basis, std::vector<Real> t) {
  const std::size_t k = basis.size();
  GsoReal g = gso_real(basis);
  // recompute bstar vectors for projections
  std::vector<std::vector<Real>> bstar = basis;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < i; ++j)
      for (std::size_t c = 0; c < bstar[i].size(); ++c)
        bstar[i][c] -= g.mu[i][j] * bstar[j][c];
  std::vector<Int> x(k);
  for (std::size_t i = k; i-- > 0;) {
    Real num(0);
    for (std::size_t c = 0; c < t.size(); ++c) num += t[c] * bstar[i][c];
    Real ci = num / g.bstar2[i];
    x[i] = round_to_int(ci);
    Real xi = to_real(x[i]);
    for (std::size_t c = 0; c < t.size(); ++c) t[c] -= xi * basis[i][c];
  }
  return x;
}

inline std::vector<Int> babai_nearest_plane(const IntMat& basis,
                                            const std::vector<Real>& t) {
  return babai_nearest_plane(to_real_rows(basis), t);
}

/**
 * Babai round-off: x = round(t B^+) via the normal equations
 * (least squares onto the row span, then coordinate rounding).
 */
inline std::vector<Int> babai_round_off(
    const std::vector<std::vector<Real>>& basis,
    const std::vector<Real>& t) {
  const std::size_t k = basis.size();
  // solve y (B B^T) = t B^T by Gaussian elimination
  std::vector<std::vector<Real>> a(k, std::vector<Real>(k + 1, Real(0)));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      Real s(0);
      for (std::size_t c = 0; c < basis[i].size(); ++c)
        s += basis[i][c] * basis[j][c];
      a[i][j] = s;
    }
    Real s(0);
    for (std::size_t c = 0; c < basis[i].size(); ++c)
      s += t[c] * basis[i][c];
    a[i][k] = s;
  }
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (abs(a[r][col]) > abs(a[piv][col])) piv = r;
    std::swap(a[piv], a[col]);
    if (a[col][col] == 0)
      throw std::invalid_argument("babai_round_off: dependent basis");
    for (std::size_t r = 0; r < k; ++r) {
      if (r == col) continue;
      Real f = a[r][col] / a[col][col];
      for (std::size_t cidx = col; cidx <= k; ++cidx)
        a[r][cidx] -= f * a[col][cidx];
    }
  }
  std::vector<Int> x(k);
  for (std::size_t i = 0; i < k; ++i) x[i] = round_to_int(a[i][k] / a[i][i]);
  return x;
}

inline std::vector<Int> babai_round_off(const IntMat& basis,
                                        const std::vector<Real>& t) {
  return babai_round_off(to_real_rows(basis), t);
}

/** sqrt of the Gram determinant of real row vectors (0 if degenerate). */
inline Real real_gram_volume(const std::vector<std::vector<Real>>& rows) {
  if (rows.empty()) return Real(1);
  GsoReal g = gso_real(rows);
  Real v(1);
  for (const Real& b2 : g.bstar2) {
    if (b2 <= 0) return Real(0);
    v *= sqrt(b2);
  }
  return v;
}

}  // namespace cyclopip
