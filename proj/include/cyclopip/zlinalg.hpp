#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cyclopip {

using Int = mpz_class;

/** Dense integer matrix, row-major, arbitrary-precision entries. */
class IntMat {
 public:
  IntMat() : rows_(0), cols_(0) {}
  IntMat(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols) {}

  static IntMat identity(std::size_t n) {
    IntMat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  Int& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const Int& at(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::vector<Int> row(std::size_t i) const {
    return std::vector<Int>(data_.begin() + i * cols_,
                            data_.begin() + (i + 1) * cols_);
  }
  void set_row(std::size_t i, const std::vector<Int>& v) {
    for (std::size_t j = 0; j < cols_; ++j) at(i, j) = v[j];
  }

  void append_row(const std::vector<Int>& v) {
    if (v.size() != cols_ && rows_ != 0)
      throw std::invalid_argument("append_row: width mismatch");
    if (rows_ == 0 && cols_ == 0) cols_ = v.size();
    data_.insert(data_.end(), v.begin(), v.end());
    ++rows_;
  }

  bool row_is_zero(std::size_t i) const {
    for (std::size_t j = 0; j < cols_; ++j)
      if (at(i, j) != 0) return false;
    return true;
  }

  bool operator==(const IntMat& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }
  bool operator!=(const IntMat& o) const { return !(*this == o); }

  IntMat mul(const IntMat& o) const {
    if (cols_ != o.rows_) throw std::invalid_argument("mul: shape mismatch");
    IntMat r(rows_, o.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = 0; k < cols_; ++k) {
        const Int& a = at(i, k);
        if (a == 0) continue;
        for (std::size_t j = 0; j < o.cols_; ++j) r.at(i, j) += a * o.at(k, j);
      }
    return r;
  }

  std::string to_string() const {
    std::string s;
    for (std::size_t i = 0; i < rows_; ++i) {
      s += "[";
      for (std::size_t j = 0; j < cols_; ++j) {
        s += at(i, j).get_str();
        if (j + 1 < cols_) s += " ";
      }
      s += "]\n";
    }
    return s;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<Int> data_;
};

inline Int floor_div(const Int& a, const Int& b) {
  Int q;
  mpz_fdiv_q(q.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return q;
}

inline Int gcdext(const Int& a, const Int& b, Int& u, Int& v) {
  Int g;
  mpz_gcdext(g.get_mpz_t(), u.get_mpz_t(), v.get_mpz_t(), a.get_mpz_t(),
             b.get_mpz_t());
  return g;
}

inline IntMat transpose(const IntMat& m) {
  IntMat r(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) r.at(j, i) = m.at(i, j);
  return r;
}

namespace detail {

// Row operations shared by the HNF routines.
inline void row_submul(IntMat& m, std::size_t dst, std::size_t src,
                       const Int& q) {
  if (q == 0) return;
  for (std::size_t j = 0; j < m.cols(); ++j) m.at(dst, j) -= q * m.at(src, j);
}

inline void row_negate(IntMat& m, std::size_t i) {
  for (std::size_t j = 0; j < m.cols(); ++j) m.at(i, j) = -m.at(i, j);
}

inline void row_swap(IntMat& m, std::size_t a, std::size_t b) {
  if (a == b) return;
  for (std::size_t j = 0; j < m.cols(); ++j) std::swap(m.at(a, j), m.at(b, j));
}

// Unimodular 2x2 combination placing gcd of column entries on row a.
inline void row_gcd_combine(IntMat& m, std::size_t a, std::size_t b,
                            std::size_t col, IntMat* u) {
  const Int x = m.at(a, col), y = m.at(b, col);
  Int s, t;
  Int g = gcdext(x, y, s, t);
  Int xg = x / g, yg = y / g;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    Int p = m.at(a, j), q = m.at(b, j);
    m.at(a, j) = s * p + t * q;
    m.at(b, j) = -yg * p + xg * q;
  }
  if (u) {
    for (std::size_t j = 0; j < u->cols(); ++j) {
      Int p = u->at(a, j), q = u->at(b, j);
      u->at(a, j) = s * p + t * q;
      u->at(b, j) = -yg * p + xg * q;
    }
  }
}

inline IntMat reverse_cols(const IntMat& m) {
  IntMat r(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      r.at(i, j) = m.at(i, m.cols() - 1 - j);
  return r;
}

// Classic row HNF with leading pivots: pivot columns strictly increasing,
// pivots positive, entries above each pivot reduced into [0, pivot).
// Returns the rank; zero rows are moved to the bottom. If `u` is non-null it
// is updated so that u * original == result throughout.
inline std::size_t hnf_upper_in_place(IntMat& h, IntMat* u) {
  const std::size_t k = h.rows(), m = h.cols();
  std::size_t row = 0;
  for (std::size_t col = 0; col < m && row < k; ++col) {
    std::size_t piv = row;
    while (piv < k && h.at(piv, col) == 0) ++piv;
    if (piv == k) continue;
    row_swap(h, row, piv);
    if (u) row_swap(*u, row, piv);
    for (std::size_t i = row + 1; i < k; ++i)
      if (h.at(i, col) != 0) row_gcd_combine(h, row, i, col, u);
    if (h.at(row, col) < 0) {
      row_negate(h, row);
      if (u) row_negate(*u, row);
    }
    for (std::size_t i = 0; i < row; ++i) {
      Int q = floor_div(h.at(i, col), h.at(row, col));
      row_submul(h, i, row, q);
      if (u) row_submul(*u, i, row, q);
    }
    ++row;
  }
  return row;
}

}  // namespace detail

/** Exact determinant via fraction-free Gaussian elimination (Bareiss). */
inline Int det_bareiss(const IntMat& m);

/**
 * Hermite normal form, lower-triangular convention: each returned row has a
 * positive trailing pivot, pivot columns strictly increase, and entries in a
 * pivot column below the pivot row lie in [0, pivot). Zero rows are dropped,
 * so a full-rank square input yields a square lower-triangular matrix with
 * positive diagonal. Square nonsingular inputs are reduced modulo the
 * determinant to bound entry growth; the result is canonical either way.
 */
inline IntMat hnf(const IntMat& m) {
  IntMat work = m;
  if (m.rows() == m.cols() && m.rows() > 0) {
    Int d = abs(det_bareiss(m));
    if (d != 0) {
      // Augment with d*I: d*Z^m lies inside the row lattice, so entries may
      // be reduced mod d at will without changing the lattice. Centered
      // representatives keep small inputs small.
      IntMat aug(2 * m.rows(), m.cols());
      for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
          Int e = m.at(i, j) % d;
          if (2 * e > d) e -= d;
          if (2 * e < -d) e += d;
          aug.at(i, j) = e;
        }
        aug.at(m.rows() + i, i) = d;
      }
      work = std::move(aug);
    }
  }
  IntMat h = detail::reverse_cols(work);
  std::size_t rank = detail::hnf_upper_in_place(h, nullptr);
  IntMat r(rank, m.cols());
  for (std::size_t i = 0; i < rank; ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      r.at(i, j) = h.at(rank - 1 - i, m.cols() - 1 - j);
  return r;
}

/**
 * HNF together with a unimodular transform: returns (H, U) with U * M = H.
 * H keeps the input row count; rows 0..rank-1 hold the canonical basis and
 * the remaining rows are zero (their U rows span the left kernel).
 */
inline std::pair<IntMat, IntMat> hnf_with_transform(const IntMat& m,
                                                    std::size_t* rank_out =
                                                        nullptr) {
  IntMat h = detail::reverse_cols(m);
  IntMat u = IntMat::identity(m.rows());
  std::size_t rank = detail::hnf_upper_in_place(h, &u);
  IntMat hr(m.rows(), m.cols());
  IntMat ur(m.rows(), m.rows());
  for (std::size_t i = 0; i < rank; ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j)
      hr.at(i, j) = h.at(rank - 1 - i, m.cols() - 1 - j);
    for (std::size_t j = 0; j < m.rows(); ++j)
      ur.at(i, j) = u.at(rank - 1 - i, j);
  }
  for (std::size_t i = rank; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.rows(); ++j) ur.at(i, j) = u.at(i, j);
  if (rank_out) *rank_out = rank;
  return {std::move(hr), std::move(ur)};
}

/** Basis of the left kernel {x : x*M = 0}, returned in canonical HNF. */
inline IntMat left_kernel(const IntMat& m) {
  std::size_t rank = 0;
  auto [h, u] = hnf_with_transform(m, &rank);
  IntMat ker(m.rows() - rank, m.rows());
  for (std::size_t i = rank; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.rows(); ++j)
      ker.at(i - rank, j) = u.at(i, j);
  return hnf(ker);
}

inline std::size_t rank(const IntMat& m) { return hnf(m).rows(); }

inline Int det_bareiss(const IntMat& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("det: not square");
  const std::size_t n = m.rows();
  if (n == 0) return 1;
  IntMat a = m;
  Int prev = 1;
  int sign = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (a.at(k, k) == 0) {
      std::size_t p = k + 1;
      while (p < n && a.at(p, k) == 0) ++p;
      if (p == n) return 0;
      detail::row_swap(a, k, p);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i)
      for (std::size_t j = k + 1; j < n; ++j) {
        Int t = a.at(i, j) * a.at(k, k) - a.at(i, k) * a.at(k, j);
        mpz_divexact(a.at(i, j).get_mpz_t(), t.get_mpz_t(), prev.get_mpz_t());
      }
    prev = a.at(k, k);
  }
  return sign > 0 ? a.at(n - 1, n - 1) : -a.at(n - 1, n - 1);
}

namespace detail {

inline std::size_t trailing_nonzero(const std::vector<Int>& v, bool& any) {
  for (std::size_t j = v.size(); j-- > 0;)
    if (v[j] != 0) {
      any = true;
      return j;
    }
  any = false;
  return 0;
}

}  // namespace detail

/**
 * Smith normal form divisors: the nonzero invariant factors d_1 | d_2 | ...,
 * each positive. Uses the classical pivot/gcd reduction.
 */
inline std::vector<Int> snf_divisors(const IntMat& m) {
  IntMat a = hnf(m);  // drop redundancy first; SNF divisors are unchanged
  std::size_t r = a.rows(), c = a.cols();
  std::size_t t = 0;
  while (t < r && t < c) {
    // find a nonzero entry of minimal absolute value in the working block
    std::size_t bi = t, bj = t;
    bool found = false;
    Int best;
    for (std::size_t i = t; i < r; ++i)
      for (std::size_t j = t; j < c; ++j) {
        const Int& e = a.at(i, j);
        if (e == 0) continue;
        Int ab = abs(e);
        if (!found || ab < best) {
          found = true;
          best = ab;
          bi = i;
          bj = j;
        }
      }
    if (!found) break;
    detail::row_swap(a, t, bi);
    for (std::size_t i = 0; i < r; ++i) std::swap(a.at(i, t), a.at(i, bj));
    if (a.at(t, t) < 0) detail::row_negate(a, t);
    bool clean = true;
    for (std::size_t i = t + 1; i < r; ++i)
      if (a.at(i, t) != 0) {
        Int q = floor_div(a.at(i, t), a.at(t, t));
        detail::row_submul(a, i, t, q);
        if (a.at(i, t) != 0) clean = false;
      }
    for (std::size_t j = t + 1; j < c; ++j)
      if (a.at(t, j) != 0) {
        Int q = floor_div(a.at(t, j), a.at(t, t));
        if (q != 0)
          for (std::size_t i = 0; i < r; ++i) a.at(i, j) -= q * a.at(i, t);
        if (a.at(t, j) != 0) clean = false;
      }
    if (!clean) continue;  // smaller entries appeared; redo this pivot
    // divisibility sweep: pivot must divide the remaining block
    bool divides = true;
    for (std::size_t i = t + 1; i < r && divides; ++i)
      for (std::size_t j = t + 1; j < c && divides; ++j)
        if (a.at(i, j) % a.at(t, t) != 0) {
          for (std::size_t jj = 0; jj < c; ++jj) a.at(t, jj) += a.at(i, jj);
          divides = false;
        }
    if (!divides) continue;
    ++t;
  }
  std::vector<Int> d;
  for (std::size_t i = 0; i < t; ++i) d.push_back(a.at(i, i));
  return d;
}

/**
 * Canonical solution of x * A = y over Z, if one exists. The returned vector
 * is the unique solution whose coordinates are reduced against the HNF of the
 * left kernel of A (pivot coordinates in [0, pivot)).
 */
inline std::optional<std::vector<Int>> solve_left(const IntMat& a,
                                                  const std::vector<Int>& y) {
  if (y.size() != a.cols()) throw std::invalid_argument("solve_left: shape");
  std::size_t rank = 0;
  auto [h, u] = hnf_with_transform(a, &rank);
  std::vector<Int> residual = y;
  std::vector<Int> z(rank);
  for (std::size_t i = rank; i-- > 0;) {
    bool any = false;
    std::size_t piv = 0;
    for (std::size_t j = a.cols(); j-- > 0;)
      if (h.at(i, j) != 0) {
        piv = j;
        any = true;
        break;
      }
    if (!any) continue;
    if (residual[piv] % h.at(i, piv) != 0) return std::nullopt;
    z[i] = residual[piv] / h.at(i, piv);
    if (z[i] != 0)
      for (std::size_t j = 0; j < a.cols(); ++j)
        residual[j] -= z[i] * h.at(i, j);
  }
  for (const Int& v : residual)
    if (v != 0) return std::nullopt;
  std::vector<Int> x(a.rows());
  for (std::size_t i = 0; i < rank; ++i)
    if (z[i] != 0)
      for (std::size_t j = 0; j < a.rows(); ++j) x[j] += z[i] * u.at(i, j);
  // canonicalize modulo the left kernel
  IntMat ker = left_kernel(a);
  for (std::size_t i = ker.rows(); i-- > 0;) {
    bool any = false;
    std::size_t piv = detail::trailing_nonzero(ker.row(i), any);
    if (!any) continue;
    Int q = floor_div(x[piv], ker.at(i, piv));
    if (q != 0)
      for (std::size_t j = 0; j < a.rows(); ++j) x[j] -= q * ker.at(i, j);
  }
  return x;
}

/**
 * Incremental HNF of a growing set of relation rows. Tracks rank and pivot
 * product without recomputing from scratch on every insertion; once full
 * column rank is reached, inserted rows are reduced modulo the lattice
 * determinant to bound entry growth.
 */
class HnfAccumulator {
 public:
  explicit HnfAccumulator(std::size_t cols) : cols_(cols) {}

  std::size_t rank() const { return rows_.size(); }
  std::size_t cols() const { return cols_; }
  bool full_rank() const { return rows_.size() == cols_; }

  Int det() const {
    Int d = 1;
    for (const auto& r : rows_) d *= r.second[r.first];
    return d;
  }

  /** Inserts a row; returns true if it changed the lattice. */
  bool insert(std::vector<Int> v) {
    if (v.size() != cols_) throw std::invalid_argument("insert: width");
    if (full_rank()) {
      Int d = det();
      if (d == 1) return false;  // lattice is all of Z^m already
      for (auto& e : v) {
        e %= d;
        if (e < 0) e += d;
      }
    }
    bool changed = false;
    for (;;) {
      bool any = false;
      std::size_t t = detail::trailing_nonzero(v, any);
      if (!any) return changed;
      auto it = find_pivot(t);
      if (it == rows_.end() || it->first != t) {
        if (v[t] < 0)
          for (auto& e : v) e = -e;
        rows_.insert(it, {t, std::move(v)});
        reduce_all();
        return true;
      }
      std::vector<Int>& h = it->second;
      if (v[t] % h[t] == 0) {
        Int q = v[t] / h[t];
        for (std::size_t j = 0; j <= t; ++j) v[j] -= q * h[j];
      } else {
        Int s, w;
        Int g = gcdext(h[t], v[t], s, w);
        Int hg = h[t] / g, vg = v[t] / g;
        for (std::size_t j = 0; j <= t; ++j) {
          Int p = h[j], q = v[j];
          h[j] = s * p + w * q;
          v[j] = -vg * p + hg * q;
        }
        changed = true;
      }
    }
  }

  /** Canonical HNF snapshot (rank x cols, trailing-pivot convention). */
  IntMat snapshot() const {
    IntMat m(0, cols_);
    for (const auto& r : rows_) m.append_row(r.second);
    return hnf(m);
  }

 private:
  using Row = std::pair<std::size_t, std::vector<Int>>;  // (pivot col, row)

  std::vector<Row>::iterator find_pivot(std::size_t col) {
    auto it = rows_.begin();
    while (it != rows_.end() && it->first < col) ++it;
    return it;
  }

  void reduce_all() {
    for (std::size_t i = 0; i < rows_.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) {
        std::size_t c = rows_[j].first;
        Int q = floor_div(rows_[i].second[c], rows_[j].second[c]);
        if (q != 0)
          for (std::size_t k = 0; k <= c; ++k)
            rows_[i].second[k] -= q * rows_[j].second[k];
      }
  }

  std::size_t cols_;
  std::vector<Row> rows_;  // sorted by pivot column
};

}  // namespace cyclopip
