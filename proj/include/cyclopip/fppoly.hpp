#pragma once

// Dense polynomial arithmetic over F_p for word-sized p. Used for the
// CRT-modular resultant (norms) and for splitting Phi_N mod p into the prime
// ideals above p.

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace cyclopip::fppoly {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

struct Fp {
  u64 p;

  u64 add(u64 a, u64 b) const {
    u64 s = a + b;
    return s >= p ? s - p : s;
  }
  u64 sub(u64 a, u64 b) const { return a >= b ? a - b : a + p - b; }
  u64 mul(u64 a, u64 b) const { return u64(u128(a) * b % p); }
  u64 neg(u64 a) const { return a == 0 ? 0 : p - a; }

  u64 pow(u64 a, u64 e) const {
    u64 r = 1 % p;
    while (e) {
      if (e & 1) r = mul(r, a);
      a = mul(a, a);
      e >>= 1;
    }
    return r;
  }

  u64 inv(u64 a) const {
    // extended Euclid; p need not be prime for unit a, but callers pass primes
    long long t = 0, nt = 1;
    long long r = (long long)p, nr = (long long)(a % p);
    while (nr != 0) {
      long long q = r / nr;
      t -= q * nt;
      std::swap(t, nt);
      r -= q * nr;
      std::swap(r, nr);
    }
    if (r != 1) throw std::domain_error("inv: not invertible");
    return t < 0 ? u64(t + (long long)p) : u64(t);
  }
};

/** Coefficients low to high; empty vector is the zero polynomial. */
using Poly = std::vector<u64>;

inline void normalize(Poly& a) {
  while (!a.empty() && a.back() == 0) a.pop_back();
}

inline int deg(const Poly& a) { return int(a.size()) - 1; }

inline Poly mul(const Poly& a, const Poly& b, const Fp& fp) {
  if (a.empty() || b.empty()) return {};
  Poly r(a.size() + b.size() - 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0) continue;
    for (std::size_t j = 0; j < b.size(); ++j)
      r[i + j] = fp.add(r[i + j], fp.mul(a[i], b[j]));
  }
  normalize(r);
  return r;
}

/** Remainder of a modulo b (b nonzero). */
inline Poly rem(Poly a, const Poly& b, const Fp& fp) {
  if (b.empty()) throw std::domain_error("rem: zero divisor");
  u64 lead_inv = fp.inv(b.back());
  normalize(a);
  while (deg(a) >= deg(b)) {
    u64 f = fp.mul(a.back(), lead_inv);
    std::size_t shift = a.size() - b.size();
    if (f != 0)
      for (std::size_t i = 0; i + 1 < b.size(); ++i)
        a[shift + i] = fp.sub(a[shift + i], fp.mul(f, b[i]));
    a.pop_back();
    normalize(a);
  }
  return a;
}

/** Quotient f / g when the division is exact. */
inline Poly divexact(const Poly& f, const Poly& g, const Fp& fp) {
  Poly q(f.size() - g.size() + 1, 0);
  Poly r = f;
  u64 lead_inv = fp.inv(g.back());
  while (deg(r) >= deg(g)) {
    u64 c = fp.mul(r.back(), lead_inv);
    std::size_t shift = r.size() - g.size();
    q[shift] = c;
    if (c != 0)
      for (std::size_t i = 0; i + 1 < g.size(); ++i)
        r[shift + i] = fp.sub(r[shift + i], fp.mul(c, g[i]));
    r.pop_back();
    normalize(r);
  }
  if (!r.empty()) throw std::logic_error("divexact: inexact division");
  return q;
}

inline Poly gcd(Poly a, Poly b, const Fp& fp) {
  normalize(a);
  normalize(b);
  while (!b.empty()) {
    Poly r = rem(a, b, fp);
    a = std::move(b);
    b = std::move(r);
  }
  if (!a.empty() && a.back() != 1) {
    u64 inv = fp.inv(a.back());
    for (auto& c : a) c = fp.mul(c, inv);
  }
  return a;
}

inline Poly mulmod(const Poly& a, const Poly& b, const Poly& mod,
                   const Fp& fp) {
  return rem(mul(a, b, fp), mod, fp);
}

/** a^e mod (mod) with arbitrary-precision exponent. */
inline Poly powmod(Poly a, const mpz_class& e, const Poly& mod, const Fp& fp) {
  Poly r{1};
  a = rem(std::move(a), mod, fp);
  for (std::size_t bit = mpz_sizeinbase(e.get_mpz_t(), 2); bit-- > 0;) {
    r = mulmod(r, r, mod, fp);
    if (mpz_tstbit(e.get_mpz_t(), bit)) r = mulmod(r, a, mod, fp);
  }
  return r;
}

/** Resultant of a and b over F_p by the Euclidean recurrence. */
inline u64 resultant(Poly a, Poly b, const Fp& fp) {
  normalize(a);
  normalize(b);
  if (a.empty() || b.empty()) return 0;
  u64 res = 1;
  bool negate = false;
  while (deg(b) > 0) {
    Poly r = rem(a, b, fp);
    int da = deg(a), db = deg(b), dr = deg(r);
    if ((da & 1) && (db & 1)) negate = !negate;
    if (r.empty()) return 0;
    res = fp.mul(res, fp.pow(b.back(), u64(da - dr)));
    a = std::move(b);
    b = std::move(r);
  }
  res = fp.mul(res, fp.pow(b[0], u64(deg(a))));
  return negate ? fp.neg(res) : res;
}

/**
 * Equal-degree factorization (Cantor-Zassenhaus): f squarefree monic with all
 * irreducible factors of degree d. Deterministic given the rng seed.
 */
inline void equal_degree_factor(const Poly& f, unsigned d, const Fp& fp,
                                Rng& rng, std::vector<Poly>& out) {
  if (deg(f) == int(d)) {
    Poly g = f;
    u64 inv = fp.inv(g.back());
    for (auto& c : g) c = fp.mul(c, inv);
    out.push_back(std::move(g));
    return;
  }
  Poly splitter;
  for (;;) {
    Poly a(std::size_t(deg(f)), 0);
    for (auto& c : a) c = rng.u64() % fp.p;
    normalize(a);
    if (a.empty()) continue;
    Poly g;
    if (fp.p == 2) {
      // trace map over F_{2^d}
      Poly t = a, cur = a;
      for (unsigned i = 1; i < d; ++i) {
        cur = mulmod(cur, cur, f, fp);
        t.resize(std::max(t.size(), cur.size()), 0);
        for (std::size_t j = 0; j < cur.size(); ++j)
          t[j] = fp.add(t[j], cur[j]);
        normalize(t);
      }
      g = gcd(f, t, fp);
    } else {
      mpz_class e = 1;
      for (unsigned i = 0; i < d; ++i) e *= fp.p;
      e = (e - 1) / 2;
      Poly b = powmod(a, e, f, fp);
      if (b.empty())
        g = gcd(f, a, fp);
      else {
        b[0] = fp.sub(b[0], 1);
        normalize(b);
        g = gcd(f, b, fp);
      }
    }
    if (deg(g) > 0 && deg(g) < deg(f)) {
      splitter = std::move(g);
      break;
    }
  }
  Poly other = divexact(f, splitter, fp);
  equal_degree_factor(splitter, d, fp, rng, out);
  equal_degree_factor(other, d, fp, rng, out);
}

}  // namespace cyclopip::fppoly
