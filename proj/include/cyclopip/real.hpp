#pragma once

#include <gmpxx.h>
#include <mpfr.h>

#include <boost/multiprecision/mpfr.hpp>

#include <stdexcept>
#include <vector>

namespace cyclopip {

namespace mp = boost::multiprecision;

/** Arbitrary-precision real; working precision is scoped via PrecisionGuard. */
using Real = mp::number<mp::mpfr_float_backend<0>, mp::et_off>;

/** Raised when a numeric routine cannot certify its tolerance; callers retry
 * with doubled precision. */
struct PrecisionExhausted : std::runtime_error {
  explicit PrecisionExhausted(const std::string& what)
      : std::runtime_error(what) {}
};

inline unsigned bits_to_digits10(unsigned bits) {
  return unsigned(double(bits) * 0.30103) + 3;
}

/** Sets the default construction precision for Real within a scope. */
class PrecisionGuard {
 public:
  explicit PrecisionGuard(unsigned bits)
      : saved_(Real::default_precision()) {
    Real::default_precision(bits_to_digits10(bits));
  }
  ~PrecisionGuard() { Real::default_precision(saved_); }
  PrecisionGuard(const PrecisionGuard&) = delete;
  PrecisionGuard& operator=(const PrecisionGuard&) = delete;

 private:
  unsigned saved_;
};

inline Real real_pi() {
  Real x;
  mpfr_const_pi(x.backend().data(), MPFR_RNDN);
  return x;
}

inline Real to_real(const mpz_class& z) {
  Real r;
  mpfr_set_z(r.backend().data(), z.get_mpz_t(), MPFR_RNDN);
  return r;
}

/** Round to nearest integer (ties away handled by mpfr round). */
inline mpz_class round_to_int(const Real& r) {
  mpz_class z;
  mpfr_get_z(z.get_mpz_t(), r.backend().data(), MPFR_RNDN);
  return z;
}

/** Minimal complex type over Real; only what the embeddings need. */
struct Cplx {
  Real re, im;

  Cplx() : re(0), im(0) {}
  Cplx(Real r, Real i) : re(std::move(r)), im(std::move(i)) {}

  Cplx operator+(const Cplx& o) const { return {re + o.re, im + o.im}; }
  Cplx operator-(const Cplx& o) const { return {re - o.re, im - o.im}; }
  Cplx operator*(const Cplx& o) const {
    return {re * o.re - im * o.im, re * o.im + im * o.re};
  }
  Cplx& operator+=(const Cplx& o) {
    re += o.re;
    im += o.im;
    return *this;
  }
  Real abs2() const { return re * re + im * im; }
  Real abs() const { return sqrt(abs2()); }
};

/** e^{2*pi*i*k/N} at the current working precision. */
inline Cplx unit_root(unsigned long N, unsigned long k) {
  Real theta = 2 * real_pi() * Real(k) / Real(N);
  return {cos(theta), sin(theta)};
}

/**
 * Log-embedding image: one entry per non-conjugate complex embedding, the
 * representative of each conjugate pair taken with argument in (0, pi).
 */
struct LogVector {
  std::vector<Real> entries;
  unsigned precision = 0;

  std::size_t size() const { return entries.size(); }
  Real sum() const {
    Real s = 0;
    for (const auto& e : entries) s += e;
    return s;
  }
};

}  // namespace cyclopip
