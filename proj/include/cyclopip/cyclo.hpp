#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "conductor.hpp"
#include "fppoly.hpp"
#include "real.hpp"
#include "zlinalg.hpp"

namespace cyclopip {

inline int mobius(unsigned long n) {
  int r = 1;
  for (unsigned long q = 2; q * q <= n; ++q)
    if (n % q == 0) {
      n /= q;
      if (n % q == 0) return 0;
      r = -r;
    }
  if (n > 1) r = -r;
  return r;
}

inline unsigned long euler_phi(unsigned long n) {
  unsigned long r = n;
  for (unsigned long q = 2; q * q <= n; ++q)
    if (n % q == 0) {
      r -= r / q;
      while (n % q == 0) n /= q;
    }
  if (n > 1) r -= r / n;
  return r;
}

namespace detail {

// Exact division of integer polynomials (divisor monic up to sign).
inline std::vector<Int> poly_divexact(std::vector<Int> num,
                                      const std::vector<Int>& den) {
  if (den.empty() || num.size() < den.size())
    throw std::logic_error("poly_divexact: degree mismatch");
  std::size_t dd = den.size() - 1;
  std::vector<Int> q(num.size() - dd);
  for (std::size_t i = num.size(); i-- > dd;) {
    Int c = num[i] / den[dd];
    q[i - dd] = c;
    if (c != 0)
      for (std::size_t j = 0; j <= dd; ++j) num[i - dd + j] -= c * den[j];
  }
  for (const Int& e : num)
    if (e != 0) throw std::logic_error("poly_divexact: inexact");
  return q;
}

}  // namespace detail

/**
 * Phi_N as a dense coefficient vector of length n+1 (monic). Prime powers use
 * the closed form X^{p^{s-1}(p-1)} + X^{p^{s-1}(p-2)} + ... + 1; other N via
 * the Moebius product over divisors.
 */
inline const std::vector<Int>& cyclotomic_polynomial(const Conductor& c) {
  static std::map<unsigned long, std::vector<Int>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(c.N());
  if (it != cache.end()) return it->second;

  std::vector<Int> phi;
  if (c.is_prime_power()) {
    unsigned long p = c.p();
    unsigned long step = c.N() / p;  // p^{s-1}
    phi.assign(c.n() + 1, Int(0));
    for (unsigned long j = 0; j < p; ++j) phi[j * step] = 1;
  } else {
    // Phi_N = prod_{d | N} (X^d - 1)^{mu(N/d)}
    std::vector<unsigned long> divisors;
    for (unsigned long d = 1; d <= c.N(); ++d)
      if (c.N() % d == 0) divisors.push_back(d);
    std::vector<Int> num{1};
    std::vector<Int> den{1};
    for (unsigned long d : divisors) {
      int mu_v = mobius(c.N() / d);
      if (mu_v == 0) continue;
      std::vector<Int>& target = (mu_v == 1) ? num : den;
      // multiply target by (X^d - 1)
      std::vector<Int> prod(target.size() + d);
      for (std::size_t i = 0; i < target.size(); ++i) {
        if (target[i] == 0) continue;
        prod[i] -= target[i];
        prod[i + d] += target[i];
      }
      target = std::move(prod);
    }
    phi = detail::poly_divexact(std::move(num), den);
  }
  return cache.emplace(c.N(), std::move(phi)).first->second;
}

namespace detail {

// Reduce an integer polynomial (any degree) mod Phi_N; result length n.
inline std::vector<Int> reduce_mod_phi(std::vector<Int> v,
                                       const Conductor& c) {
  const std::vector<Int>& phi = cyclotomic_polynomial(c);
  const std::size_t n = c.n();
  for (std::size_t i = v.size(); i-- > n;) {
    if (v[i] == 0) continue;
    Int coef = std::move(v[i]);
    v[i] = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (phi[j] != 0) v[i - n + j] -= coef * phi[j];
  }
  v.resize(n);
  return v;
}

}  // namespace detail

/** Element of O_K = Z[zeta_N], stored as the unique residue mod Phi_N. */
class CycloElement {
 public:
  CycloElement(const Conductor& c, std::vector<Int> coeffs)
      : c_(c), v_(std::move(coeffs)) {
    if (v_.size() > c.n()) v_ = detail::reduce_mod_phi(std::move(v_), c);
    v_.resize(c.n());
  }

  static CycloElement zero(const Conductor& c) {
    return CycloElement(c, std::vector<Int>(c.n()));
  }
  static CycloElement one(const Conductor& c) { return from_int(c, 1); }
  static CycloElement from_int(const Conductor& c, Int k) {
    std::vector<Int> v(c.n());
    v[0] = std::move(k);
    return CycloElement(c, std::move(v));
  }
  /** zeta^k, reduced. */
  static CycloElement zeta_pow(const Conductor& c, long k) {
    long m = k % long(c.N());
    if (m < 0) m += long(c.N());
    std::vector<Int> v(std::size_t(m) + 1);
    v[std::size_t(m)] = 1;
    return CycloElement(c, std::move(v));
  }

  const Conductor& conductor() const { return c_; }
  const std::vector<Int>& coeffs() const { return v_; }

  bool is_zero() const {
    for (const Int& e : v_)
      if (e != 0) return false;
    return true;
  }

  bool is_rational() const {
    for (std::size_t i = 1; i < v_.size(); ++i)
      if (v_[i] != 0) return false;
    return true;
  }

  Int max_abs_coeff() const {
    Int m = 0;
    for (const Int& e : v_)
      if (abs(e) > m) m = abs(e);
    return m;
  }

  CycloElement operator+(const CycloElement& o) const {
    check(o);
    std::vector<Int> r(v_);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += o.v_[i];
    return CycloElement(c_, std::move(r));
  }
  CycloElement operator-(const CycloElement& o) const {
    check(o);
    std::vector<Int> r(v_);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= o.v_[i];
    return CycloElement(c_, std::move(r));
  }
  CycloElement operator-() const {
    std::vector<Int> r(v_);
    for (auto& e : r) e = -e;
    return CycloElement(c_, std::move(r));
  }
  CycloElement operator*(const CycloElement& o) const {
    check(o);
    std::vector<Int> prod(2 * c_.n() - 1);
    for (std::size_t i = 0; i < v_.size(); ++i) {
      if (v_[i] == 0) continue;
      for (std::size_t j = 0; j < o.v_.size(); ++j)
        if (o.v_[j] != 0) prod[i + j] += v_[i] * o.v_[j];
    }
    return CycloElement(c_, detail::reduce_mod_phi(std::move(prod), c_));
  }
  CycloElement scaled(const Int& k) const {
    std::vector<Int> r(v_);
    for (auto& e : r) e *= k;
    return CycloElement(c_, std::move(r));
  }

  bool operator==(const CycloElement& o) const {
    return c_ == o.c_ && v_ == o.v_;
  }
  bool operator!=(const CycloElement& o) const { return !(*this == o); }

 private:
  void check(const CycloElement& o) const {
    if (c_ != o.c_) throw std::invalid_argument("conductor mismatch");
  }

  Conductor c_;
  std::vector<Int> v_;
};

namespace detail {

inline const std::vector<fppoly::u64>& crt_primes(std::size_t count) {
  static std::vector<fppoly::u64> primes;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  if (primes.size() < count) {
    mpz_class p = primes.empty() ? mpz_class(1) << 61 : mpz_class(primes.back());
    while (primes.size() < count) {
      mpz_nextprime(p.get_mpz_t(), p.get_mpz_t());
      primes.push_back(p.get_ui());
    }
  }
  return primes;
}

inline fppoly::Poly poly_mod_p(const std::vector<Int>& v, fppoly::u64 p) {
  fppoly::Poly r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    r[i] = mpz_fdiv_ui(v[i].get_mpz_t(), p);
  }
  fppoly::normalize(r);
  return r;
}

}  // namespace detail

/**
 * Field norm N(a) = Res(Phi_N, P), computed exactly by CRT over word primes
 * with a Hadamard bound on the result size. Always nonnegative here: the
 * field is totally imaginary, so the norm is a product of |.|^2 terms.
 */
inline Int norm(const CycloElement& a) {
  if (a.is_zero()) throw std::domain_error("norm: zero input");
  const Conductor& c = a.conductor();
  if (a.is_rational()) {
    Int r;
    mpz_pow_ui(r.get_mpz_t(), a.coeffs()[0].get_mpz_t(), c.n());
    return r;
  }
  const std::vector<Int>& phi = cyclotomic_polynomial(c);
  // Hadamard bound on |Res|: ||Phi||_2^{deg P} * ||P||_2^n
  Int s2phi = 0, s2p = 0;
  for (const Int& e : phi) s2phi += e * e;
  std::size_t degp = 0;
  for (std::size_t i = 0; i < a.coeffs().size(); ++i) {
    const Int& e = a.coeffs()[i];
    if (e != 0) degp = i;
    s2p += e * e;
  }
  std::size_t bound_bits =
      (degp * (mpz_sizeinbase(s2phi.get_mpz_t(), 2)) +
       c.n() * (mpz_sizeinbase(s2p.get_mpz_t(), 2))) /
          2 +
      8;
  std::size_t nprimes = bound_bits / 60 + 2;
  const auto& primes = detail::crt_primes(nprimes);

  Int x = 0, m = 1;
  for (std::size_t i = 0; i < nprimes; ++i) {
    fppoly::Fp fp{primes[i]};
    fppoly::u64 r =
        fppoly::resultant(detail::poly_mod_p(phi, fp.p),
                          detail::poly_mod_p(a.coeffs(), fp.p), fp);
    // incremental CRT: adjust x to also satisfy x = r mod p
    fppoly::u64 xm = mpz_fdiv_ui(x.get_mpz_t(), fp.p);
    fppoly::u64 mm = mpz_fdiv_ui(m.get_mpz_t(), fp.p);
    fppoly::u64 t = fp.mul(fp.sub(r, xm), fp.inv(mm));
    x += m * Int(mpz_class(t));
    m *= Int(mpz_class(fp.p));
  }
  if (2 * x > m) x -= m;
  if (x < 0) throw std::logic_error("norm: negative resultant");
  return x;
}

/** Image under the automorphism zeta -> zeta^t, gcd(t, N) = 1. */
inline CycloElement galois_apply(const CycloElement& a, unsigned long t) {
  const Conductor& c = a.conductor();
  t %= c.N();
  if (std::gcd(t, c.N()) != 1)
    throw std::invalid_argument("galois_apply: t not invertible mod N");
  std::vector<Int> w(c.N());
  for (std::size_t i = 0; i < c.n(); ++i)
    if (a.coeffs()[i] != 0) w[(i * t) % c.N()] += a.coeffs()[i];
  return CycloElement(c, std::move(w));
}

/** Complex conjugation zeta -> zeta^{-1}. */
inline CycloElement conjugate(const CycloElement& a) {
  return galois_apply(a, a.conductor().N() - 1);
}

/** Ascending residues k in (0, N/2) coprime to N: the embedding
 * representatives with argument in (0, pi), one per conjugate pair. */
inline std::vector<unsigned long> embedding_representatives(
    const Conductor& c) {
  std::vector<unsigned long> reps;
  for (unsigned long k = 1; 2 * k < c.N(); ++k)
    if (std::gcd(k, c.N()) == 1) reps.push_back(k);
  return reps;
}

/**
 * Log embedding: entries ln|sigma_k(a)| over the representative embeddings.
 * Throws PrecisionExhausted when a value is too close to zero to certify at
 * the requested precision; callers double `precision` and retry.
 */
inline LogVector log_embedding(const CycloElement& a, unsigned precision) {
  if (a.is_zero()) throw std::domain_error("log_embedding: zero input");
  const Conductor& c = a.conductor();
  Int sum_abs = 0;
  for (const Int& e : a.coeffs()) sum_abs += abs(e);
  unsigned extra = unsigned(mpz_sizeinbase(sum_abs.get_mpz_t(), 2)) + 32;
  PrecisionGuard guard(precision + extra);

  LogVector out;
  out.precision = precision;
  Real tiny = pow(Real(2), -int(precision) / 2);
  for (unsigned long k : embedding_representatives(c)) {
    Cplx w = unit_root(c.N(), k);
    Cplx z(Real(0), Real(0));
    for (std::size_t i = c.n(); i-- > 0;) {
      z = z * w;
      z.re += to_real(a.coeffs()[i]);
    }
    Real az = z.abs();
    if (az < tiny)
      throw PrecisionExhausted("log_embedding: embedding too close to zero");
    out.entries.push_back(log(az));
  }
  return out;
}

/** Cyclotomic unit u_j = (zeta^j - 1)/(zeta - 1) = 1 + zeta + ... + zeta^{j-1}. */
inline CycloElement cyclotomic_unit(const Conductor& c, unsigned long j) {
  j %= c.N();
  if (j == 1 || std::gcd(j, c.N()) != 1)
    throw std::invalid_argument("cyclotomic_unit: need gcd(j,N)=1, j != 1");
  std::vector<Int> v(j);
  for (auto& e : v) e = 1;
  return CycloElement(c, std::move(v));
}

/** |Delta_K|: p^{p^{s-1}(ps-s-1)} for N = p^s, and in general
 * N^n / prod_{p | N} p^{n/(p-1)}. */
inline Int discriminant(const Conductor& c) {
  Int num;
  mpz_ui_pow_ui(num.get_mpz_t(), c.N(), c.n());
  for (auto& [p, e] : c.factors()) {
    Int den;
    mpz_ui_pow_ui(den.get_mpz_t(), p, c.n() / (p - 1));
    num /= den;
  }
  return num;
}

/** Tr_{K/Q}(zeta^a) = mu(N/g) * phi(N)/phi(N/g), g = gcd(a, N). */
inline Int trace_zeta_power(const Conductor& c, unsigned long a) {
  a %= c.N();
  unsigned long g = std::gcd(a, c.N());
  unsigned long d = c.N() / g;
  return Int(long(mobius(d)) * long(c.n() / euler_phi(d)));
}

/** Rows i = coefficients of a * zeta^i; the matrix of multiplication by a. */
inline IntMat multiplication_matrix(const CycloElement& a) {
  const Conductor& c = a.conductor();
  IntMat m(c.n(), c.n());
  std::vector<Int> cur = a.coeffs();
  for (std::size_t i = 0;; ++i) {
    for (std::size_t j = 0; j < c.n(); ++j) m.at(i, j) = cur[j];
    if (i + 1 == c.n()) break;
    // multiply by zeta: shift up one degree and reduce
    cur.insert(cur.begin(), Int(0));
    cur = detail::reduce_mod_phi(std::move(cur), c);
  }
  return m;
}

/** Exact quotient a/b in O_K, or absent when b does not divide a. */
inline std::optional<CycloElement> element_divide_exact(
    const CycloElement& a, const CycloElement& b) {
  if (b.is_zero()) throw std::domain_error("element_divide_exact: zero");
  auto x = solve_left(multiplication_matrix(b), a.coeffs());
  if (!x) return std::nullopt;
  return CycloElement(a.conductor(), std::move(*x));
}

inline std::string element_to_string(const CycloElement& a) {
  std::string s = std::to_string(a.conductor().N()) + ":";
  for (std::size_t i = 0; i < a.coeffs().size(); ++i) {
    if (i) s += ",";
    s += a.coeffs()[i].get_str();
  }
  return s;
}

inline CycloElement element_from_string(const std::string& s) {
  auto colon = s.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("element: missing conductor prefix");
  Conductor c = Conductor::of(std::stoul(s.substr(0, colon)));
  std::vector<Int> v;
  std::stringstream ss(s.substr(colon + 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(Int(tok));
  if (v.size() != c.n())
    throw std::invalid_argument("element: wrong coefficient count");
  return CycloElement(c, std::move(v));
}

}  // namespace cyclopip
