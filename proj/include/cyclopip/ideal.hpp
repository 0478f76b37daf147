#pragma once

#include <algorithm>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "cyclo.hpp"
#include "zlinalg.hpp"

namespace cyclopip {

/**
 * Prime ideal (p, g(zeta)): g a monic irreducible factor of Phi_N mod p of
 * degree f, norm p^f, ramification index e (> 1 exactly when p | N). For
 * f = 1, g = X - root.
 */
struct PrimeIdeal {
  unsigned long N = 0;
  unsigned long p = 0;
  unsigned f = 0;
  unsigned e = 1;
  std::vector<unsigned long> poly;  // monic, coefficients mod p, size f+1
  unsigned long root = 0;           // meaningful only when f == 1

  Int norm() const {
    Int r;
    mpz_ui_pow_ui(r.get_mpz_t(), p, f);
    return r;
  }
  bool operator==(const PrimeIdeal& o) const {
    return N == o.N && p == o.p && poly == o.poly;
  }
  bool operator!=(const PrimeIdeal& o) const { return !(*this == o); }
  /** Factor-base order: by norm, then p, then polynomial. */
  bool operator<(const PrimeIdeal& o) const {
    return std::make_tuple(norm(), p, poly) <
           std::make_tuple(o.norm(), o.p, o.poly);
  }
};

/**
 * Fractional ideal of Z[zeta_N]: (1/den) times the lattice spanned by the
 * rows of an n x n lower-triangular HNF matrix (row i has its pivot at
 * column i). The denominator is minimal positive.
 */
class Ideal {
 public:
  /** From arbitrary generating rows (need not be square or reduced). */
  Ideal(const Conductor& c, const IntMat& rows, Int den = 1)
      : c_(c), m_(hnf(rows)), den_(std::move(den)) {
    if (m_.rows() != c.n() || m_.cols() != c.n())
      throw std::invalid_argument("ideal: basis must have full rank n");
    for (std::size_t i = 0; i < c.n(); ++i)
      if (m_.at(i, i) == 0) throw std::domain_error("ideal: zero ideal");
    if (den_ <= 0) throw std::invalid_argument("ideal: denominator <= 0");
    normalize();
  }

  static Ideal ring_of_integers(const Conductor& c) {
    IntMat id(c.n(), c.n());
    for (std::size_t i = 0; i < c.n(); ++i) id.at(i, i) = 1;
    return Ideal(c, id);
  }

  const Conductor& conductor() const { return c_; }
  const IntMat& basis() const { return m_; }
  const Int& denominator() const { return den_; }
  bool is_integral() const { return den_ == 1; }

  /** Row i of the basis as an element (times 1/den). */
  CycloElement basis_element(std::size_t i) const {
    return CycloElement(c_, m_.row(i));
  }

  bool operator==(const Ideal& o) const {
    return c_ == o.c_ && den_ == o.den_ && m_ == o.m_;
  }
  bool operator!=(const Ideal& o) const { return !(*this == o); }

 private:
  void normalize() {
    if (den_ == 1) return;
    Int g = den_;
    for (std::size_t i = 0; i < m_.rows() && g > 1; ++i)
      for (std::size_t j = 0; j <= i && g > 1; ++j)
        g = gcd(g, m_.at(i, j));
    if (g > 1) {
      for (std::size_t i = 0; i < m_.rows(); ++i)
        for (std::size_t j = 0; j <= i; ++j) m_.at(i, j) /= g;
      den_ /= g;
    }
  }

  Conductor c_;
  IntMat m_;
  Int den_;
};

/** Norm of an integral ideal: product of HNF diagonal entries. */
inline Int ideal_norm(const Ideal& I) {
  if (!I.is_integral())
    throw std::invalid_argument("ideal_norm: fractional ideal");
  Int r = 1;
  for (std::size_t i = 0; i < I.basis().rows(); ++i) r *= I.basis().at(i, i);
  return r;
}

/** Norm of a fractional ideal as (num, den) with den = l^n. */
inline std::pair<Int, Int> ideal_norm_rational(const Ideal& I) {
  Int num = 1;
  for (std::size_t i = 0; i < I.basis().rows(); ++i)
    num *= I.basis().at(i, i);
  Int den;
  mpz_pow_ui(den.get_mpz_t(), I.denominator().get_mpz_t(),
             I.conductor().n());
  Int g = gcd(num, den);
  return {num / g, den / g};
}

/** The principal ideal (a): HNF of the lattice {a zeta^i}. */
inline Ideal ideal_from_generator(const CycloElement& a) {
  if (a.is_zero()) throw std::domain_error("ideal_from_generator: zero");
  return Ideal(a.conductor(), multiplication_matrix(a));
}

/** Exact quotient a/b in O_K, or nullopt when b does not divide a. */
inline std::optional<CycloElement> element_div(const CycloElement& a,
                                               const CycloElement& b) {
  if (a.conductor() != b.conductor())
    throw std::invalid_argument("element_div: conductor mismatch");
  if (b.is_zero()) throw std::domain_error("element_div: zero divisor");
  // x * M_b = coeffs(b * x), so a solution x is the quotient a/b.
  auto x = solve_left(multiplication_matrix(b), a.coeffs());
  if (!x) return std::nullopt;
  return CycloElement(a.conductor(), *x);
}

/** Product ideal. Rows are pairwise basis products, entry-reduced modulo
 * d = N(a)N(b) (d lies in the product ideal, so this is lattice-preserving
 * together with the appended d*identity rows). */
inline Ideal ideal_mul(const Ideal& A, const Ideal& B) {
  if (A.conductor() != B.conductor())
    throw std::invalid_argument("ideal_mul: conductor mismatch");
  const Conductor& c = A.conductor();
  std::size_t n = c.n();
  Int d = 1;
  for (std::size_t i = 0; i < n; ++i)
    d *= A.basis().at(i, i) * B.basis().at(i, i);
  IntMat rows(n * n + n, n);
  for (std::size_t i = 0; i < n; ++i) {
    CycloElement ai = A.basis_element(i);
    for (std::size_t j = 0; j < n; ++j) {
      CycloElement prod = ai * B.basis_element(j);
      for (std::size_t k = 0; k < n; ++k) {
        Int v = prod.coeffs()[k] % d;
        if (v < 0) v += d;
        rows.at(i * n + j, k) = v;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) rows.at(n * n + i, i) = d;
  return Ideal(c, rows, A.denominator() * B.denominator());
}

namespace detail {

/** Trace form Gram matrix T_{ij} = Tr(zeta^{i+j}), cached per conductor. */
inline const IntMat& trace_gram(const Conductor& c) {
  static std::map<unsigned long, IntMat> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(c.N());
  if (it != cache.end()) return it->second;
  IntMat t(c.n(), c.n());
  for (std::size_t i = 0; i < c.n(); ++i)
    for (std::size_t j = 0; j < c.n(); ++j)
      t.at(i, j) = trace_zeta_power(c, i + j);
  return cache.emplace(c.N(), std::move(t)).first->second;
}

/**
 * Colon lattice {x in Z^n : x * L(B) subseteq d O_K}, where L(B) is the
 * lattice spanned by the rows of B. Contains d Z^n, so every intermediate
 * kernel is full rank. Used for ideal inversion and uniformizer search.
 */
inline IntMat colon_lattice(const Conductor& c, const IntMat& B,
                            const Int& d) {
  std::size_t n = c.n();
  IntMat R(n, n);
  for (std::size_t i = 0; i < n; ++i) R.at(i, i) = 1;
  for (std::size_t bi = 0; bi < B.rows(); ++bi) {
    CycloElement b(c, B.row(bi));
    if (b.is_zero()) continue;
    IntMat Mb = multiplication_matrix(b);
    // condition: (x R) Mb = 0 mod d for x in Z^k
    IntMat S(R.rows() + n, n);
    IntMat RM = R.mul(Mb);
    for (std::size_t i = 0; i < R.rows(); ++i)
      for (std::size_t j = 0; j < n; ++j) {
        Int v = RM.at(i, j) % d;
        if (v < 0) v += d;
        S.at(i, j) = v;
      }
    for (std::size_t i = 0; i < n; ++i) S.at(R.rows() + i, i) = d;
    IntMat K = left_kernel(S);
    IntMat newR(K.rows(), n);
    for (std::size_t i = 0; i < K.rows(); ++i)
      for (std::size_t j = 0; j < n; ++j) {
        Int acc = 0;
        for (std::size_t t = 0; t < R.rows(); ++t)
          acc += K.at(i, t) * R.at(t, j);
        newR.at(i, j) = acc;
      }
    R = hnf(newR);
  }
  return R;
}

}  // namespace detail

/** Inverse fractional ideal, minimal positive denominator. */
inline Ideal ideal_inverse(const Ideal& I) {
  const Conductor& c = I.conductor();
  Int d = 1;
  for (std::size_t i = 0; i < c.n(); ++i) d *= I.basis().at(i, i);
  // (1/l)M  ->  inverse = (l/d) { x : x M subseteq d O }
  IntMat J = detail::colon_lattice(c, I.basis(), d);
  IntMat scaled(J.rows(), J.cols());
  for (std::size_t i = 0; i < J.rows(); ++i)
    for (std::size_t j = 0; j < J.cols(); ++j)
      scaled.at(i, j) = J.at(i, j) * I.denominator();
  return Ideal(c, scaled, d);
}

/**
 * Prime ideals above p with norm <= B (B = 0: no bound), ordered by their
 * polynomial. Dedekind: distinct irreducible factors of Phi_N mod p; for
 * p | N these are the factors of Phi_m mod p (N = p^v m), each with
 * ramification phi(p^v).
 */
inline std::vector<PrimeIdeal> primes_above(const Conductor& c,
                                            unsigned long p, const Int& B) {
  unsigned long m = c.N();
  unsigned e = 1;
  if (m % p == 0) {
    unsigned long pv = 1;
    while (m % p == 0) {
      m /= p;
      pv *= p;
    }
    e = unsigned(euler_phi(pv));
  }
  // f = multiplicative order of p mod m
  unsigned f = 1;
  if (m > 1) {
    unsigned long r = p % m;
    if (std::gcd(r, m) != 1)
      throw std::logic_error("primes_above: bad reduced conductor");
    unsigned long acc = r;
    f = 1;
    while (acc != 1) {
      acc = (acc * r) % m;
      ++f;
    }
  }
  Int nrm;
  mpz_ui_pow_ui(nrm.get_mpz_t(), p, f);
  if (B > 0 && nrm > B) return {};

  fppoly::Fp fp{p};
  fppoly::Poly target;
  if (m == 1)
    target = {fp.sub(0, 1), 1};  // X - 1
  else if (m == 2)
    target = {1, 1};  // X + 1
  else
    target = detail::poly_mod_p(cyclotomic_polynomial(Conductor::of(m)), p);

  std::vector<fppoly::Poly> factors;
  Rng rng(0x9e3779b97f4a7c15ULL ^ (c.N() * 1000003ULL + p), 31);
  fppoly::equal_degree_factor(target, f, fp, rng, factors);
  std::sort(factors.begin(), factors.end());

  std::vector<PrimeIdeal> out;
  for (auto& g : factors) {
    PrimeIdeal q;
    q.N = c.N();
    q.p = p;
    q.f = f;
    q.e = e;
    q.poly.assign(g.begin(), g.end());
    if (f == 1) q.root = fp.sub(0, g[0]);  // g = X - root
    out.push_back(std::move(q));
  }
  return out;
}

/** The ideal (p, g(zeta)) for a PrimeIdeal. */
inline Ideal prime_to_ideal(const Conductor& c, const PrimeIdeal& q) {
  if (q.N != c.N()) throw std::invalid_argument("prime_to_ideal: conductor");
  std::size_t n = c.n();
  std::vector<Int> g(q.poly.size());
  for (std::size_t i = 0; i < q.poly.size(); ++i)
    g[i] = Int(mpz_class(q.poly[i]));
  CycloElement ge(c, std::move(g));
  IntMat rows(2 * n, n);
  for (std::size_t i = 0; i < n; ++i) rows.at(i, i) = q.p;
  IntMat mg = multiplication_matrix(ge);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Int v = mg.at(i, j) % Int(q.p);
      if (v < 0) v += Int(q.p);
      rows.at(n + i, j) = v;
    }
  return Ideal(c, rows);
}

namespace detail {

struct TauEntry {
  std::vector<Int> c;  // tau = c(zeta)/p, an element of q^{-1} \ O_K
};

/** Uniformizer cache: tau with v_q(tau) = -1, v at all other primes >= 0. */
inline const TauEntry& tau_for(const Conductor& c, const PrimeIdeal& q) {
  static std::map<std::tuple<unsigned long, unsigned long,
                             std::vector<unsigned long>>,
                  TauEntry>
      cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(q.N, q.p, q.poly);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  Ideal qI = prime_to_ideal(c, q);
  // p q^{-1} = {x : x q subseteq p O}; any basis row not divisible by p
  // gives tau = row/p outside O_K.
  IntMat C = colon_lattice(c, qI.basis(), Int(q.p));
  IntMat H = hnf(C);
  Int pp(q.p);
  for (std::size_t i = 0; i < H.rows(); ++i) {
    bool divisible = true;
    for (std::size_t j = 0; j < H.cols(); ++j)
      if (H.at(i, j) % pp != 0) {
        divisible = false;
        break;
      }
    if (!divisible) {
      TauEntry e;
      e.c = H.row(i);
      return cache.emplace(key, std::move(e)).first->second;
    }
  }
  throw std::logic_error("tau_for: no uniformizer found");
}

inline long int_valuation(Int v, const Int& p) {
  long k = 0;
  while (v % p == 0) {
    v /= p;
    ++k;
  }
  return k;
}

}  // namespace detail

/** Exact q-adic valuation of a nonzero element. */
inline long valuation_element(const CycloElement& a, const PrimeIdeal& q) {
  if (a.is_zero()) throw std::domain_error("valuation: zero element");
  const Conductor& c = a.conductor();
  const detail::TauEntry& tau = detail::tau_for(c, q);
  CycloElement t(c, tau.c);
  Int p(q.p);
  CycloElement cur = a;
  long v = 0;
  for (;;) {
    CycloElement next = cur * t;
    bool divisible = true;
    for (const Int& e : next.coeffs())
      if (e % p != 0) {
        divisible = false;
        break;
      }
    if (!divisible) return v;
    std::vector<Int> w(next.coeffs());
    for (auto& e : w) e /= p;
    cur = CycloElement(c, std::move(w));
    ++v;
  }
}

/** Exact q-adic valuation of a fractional ideal (negative allowed). */
inline long valuation(const Ideal& I, const PrimeIdeal& q) {
  const Conductor& c = I.conductor();
  const detail::TauEntry& tau = detail::tau_for(c, q);
  CycloElement t(c, tau.c);
  Int p(q.p);
  IntMat M = I.basis();
  long v = 0;
  for (;;) {
    IntMat next(M.rows(), M.cols());
    bool divisible = true;
    for (std::size_t i = 0; i < M.rows() && divisible; ++i) {
      CycloElement prod = CycloElement(c, M.row(i)) * t;
      for (std::size_t j = 0; j < M.cols(); ++j) {
        if (prod.coeffs()[j] % p != 0) {
          divisible = false;
          break;
        }
        next.at(i, j) = prod.coeffs()[j] / p;
      }
    }
    if (!divisible) break;
    M = std::move(next);
    ++v;
  }
  return v - long(q.e) * detail::int_valuation(I.denominator(), p);
}

/** Membership a in I (for integral a; handles fractional I). */
inline bool ideal_contains(const Ideal& I, const CycloElement& a) {
  const Conductor& c = I.conductor();
  std::vector<Int> x(a.coeffs());
  for (auto& e : x) e *= I.denominator();
  // back-substitute against lower-triangular rows, highest pivot first
  for (std::size_t i = c.n(); i-- > 0;) {
    Int r = x[i] % I.basis().at(i, i);
    if (r != 0) return false;
    Int y = x[i] / I.basis().at(i, i);
    if (y != 0)
      for (std::size_t j = 0; j <= i; ++j) x[j] -= y * I.basis().at(i, j);
  }
  return true;
}

/**
 * Exponent vector of I over the factor base, or absent when I is not
 * smooth: norm must factor completely over the base's rational primes with
 * valuations fully carried by base primes.
 */
inline std::optional<std::vector<long>> factor_over(
    const Ideal& I, const std::vector<PrimeIdeal>& fb) {
  if (!I.is_integral())
    throw std::invalid_argument("factor_over: fractional ideal");
  Int nrm = ideal_norm(I);
  std::vector<long> e(fb.size(), 0);
  std::vector<unsigned long> ps;
  for (const auto& q : fb) ps.push_back(q.p);
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  for (unsigned long p : ps) {
    Int pp(p);
    long vp = detail::int_valuation(nrm, pp);
    if (vp == 0) continue;
    Int piece;
    mpz_pow_ui(piece.get_mpz_t(), pp.get_mpz_t(), unsigned(vp));
    nrm /= piece;
    long carried = 0;
    for (std::size_t i = 0; i < fb.size(); ++i) {
      if (fb[i].p != p) continue;
      long v = valuation(I, fb[i]);
      e[i] = v;
      carried += long(fb[i].f) * v;
    }
    if (carried != vp) return std::nullopt;
  }
  if (nrm != 1) return std::nullopt;
  return e;
}

/** Residue of a modulo a degree-1 prime: P(root) mod p. */
inline unsigned long residue(const CycloElement& a, const PrimeIdeal& q) {
  if (q.f != 1) throw std::invalid_argument("residue: prime not degree 1");
  fppoly::Fp fp{q.p};
  unsigned long acc = 0;
  for (std::size_t i = a.coeffs().size(); i-- > 0;) {
    acc = fp.mul(acc, q.root);
    acc = fp.add(acc, mpz_fdiv_ui(a.coeffs()[i].get_mpz_t(), q.p));
  }
  return acc;
}

/**
 * Image of q under zeta -> zeta^t as a member of primes_above(q.p).
 * Degree-1 primes map by root -> root^{t^{-1} mod N}; higher degree by
 * matching the transported ideal. Cached per (q, t).
 */
inline PrimeIdeal galois_on_prime(const Conductor& c, const PrimeIdeal& q,
                                  unsigned long t) {
  auto candidates = primes_above(c, q.p, 0);
  if (q.f == 1) {
    // tinv: t^{-1} mod N; root of sigma_t(q) is root^{tinv}
    unsigned long tinv = 1;
    for (unsigned long k = 1; k < c.N(); ++k)
      if ((k * t) % c.N() == 1) {
        tinv = k;
        break;
      }
    fppoly::Fp fp{q.p};
    unsigned long w = fp.pow(q.root, tinv);
    for (auto& cand : candidates)
      if (cand.f == 1 && cand.root == w) return cand;
    throw std::logic_error("galois_on_prime: missing image root");
  }
  IntMat src = prime_to_ideal(c, q).basis();
  IntMat rows(src.rows(), src.cols());
  for (std::size_t i = 0; i < src.rows(); ++i) {
    CycloElement img = galois_apply(CycloElement(c, src.row(i)), t);
    for (std::size_t j = 0; j < src.cols(); ++j)
      rows.at(i, j) = img.coeffs()[j];
  }
  Ideal moved(c, rows);
  for (auto& cand : candidates)
    if (prime_to_ideal(c, cand) == moved) return cand;
  throw std::logic_error("galois_on_prime: no matching prime");
}

}  // namespace cyclopip
