#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cyclopip {

/**
 * Conductor N of the cyclotomic field Q(zeta_N), N > 2, together with its
 * factorization and degree n = phi(N). Prime powers N = p^s are the primary
 * domain (they get closed-form discriminants and ramification); general N is
 * supported so that every field the test suite exercises is constructible.
 */
class Conductor {
 public:
  static Conductor of(unsigned long N) { return Conductor(N); }

  static Conductor prime_power(unsigned long p, unsigned s) {
    unsigned long N = 1;
    for (unsigned i = 0; i < s; ++i) {
      if (N > (1UL << 40) / p) throw std::invalid_argument("conductor too big");
      N *= p;
    }
    Conductor c(N);
    if (!c.is_prime_power())
      throw std::invalid_argument("p must be prime");
    return c;
  }

  unsigned long N() const { return N_; }
  unsigned long n() const { return n_; }

  const std::vector<std::pair<unsigned long, unsigned>>& factors() const {
    return factors_;
  }

  bool is_prime_power() const { return factors_.size() == 1; }

  unsigned long p() const {
    require_prime_power();
    return factors_[0].first;
  }
  unsigned s() const {
    require_prime_power();
    return factors_[0].second;
  }

  /** Unit rank r = n/2 - 1. */
  unsigned long unit_rank() const { return n_ / 2 - 1; }

  /** Order of the torsion subgroup of O_K^*: lcm(2, N). */
  unsigned long torsion_order() const { return N_ % 2 == 0 ? N_ : 2 * N_; }

  bool operator==(const Conductor& o) const { return N_ == o.N_; }
  bool operator!=(const Conductor& o) const { return N_ != o.N_; }

 private:
  explicit Conductor(unsigned long N) : N_(N) {
    if (N <= 2) throw std::invalid_argument("conductor must exceed 2");
    unsigned long m = N;
    for (unsigned long q = 2; q * q <= m; ++q)
      if (m % q == 0) {
        unsigned e = 0;
        while (m % q == 0) {
          m /= q;
          ++e;
        }
        factors_.push_back({q, e});
      }
    if (m > 1) factors_.push_back({m, 1});
    n_ = 1;
    for (auto& [q, e] : factors_) {
      n_ *= q - 1;
      for (unsigned i = 1; i < e; ++i) n_ *= q;
    }
    if (n_ % 2 != 0)
      throw std::invalid_argument("degree must be even (N > 2)");
  }

  void require_prime_power() const {
    if (!is_prime_power())
      throw std::logic_error("conductor is not a prime power");
  }

  unsigned long N_;
  unsigned long n_;
  std::vector<std::pair<unsigned long, unsigned>> factors_;
};

}  // namespace cyclopip
