#pragma once
// q-descent: short elements of ideal sublattices rewrite the class of a
// large-norm prime as a product of smaller-norm primes, recursing until
// every residual prime sits at the factor-base scale.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cyclopip/conductor.hpp"
#include "cyclopip/cyclo.hpp"
#include "cyclopip/ideal.hpp"
#include "cyclopip/latred.hpp"
#include "cyclopip/relations.hpp"
#include "cyclopip/rng.hpp"
#include "cyclopip/zlinalg.hpp"

namespace cyclopip {

enum class ReduceMode { HKZ, BKZ };

/**
 * Descent tuning. The asymptotic parameterization (a, b, epsilon) drives the
 * default projection/block dimensions; at desk scale those formulas evaluate
 * to tiny fractional values, so k_override / l_override pin them explicitly
 * (which is what every test does) and the derived values are clamped to
 * 2 <= l <= k <= n regardless.
 */
struct DescentParams {
  double epsilon = 0.05;
  double a = 0.45;  // BKZ block-size exponent: l = n^a
  double b = 1.0;   // input size exponent: N(I) ~ 2^{n^b}
  ReduceMode mode = ReduceMode::HKZ;
  std::size_t k_override = 0;  // 0: evaluate the formula, then clamp
  std::size_t l_override = 0;
  long A = 2;  // randomizer exponents drawn uniformly from [0, A]
  unsigned long trial_budget = 4000;
  bool force_window = false;  // accept out-of-window (a, b) with a warning
  unsigned workers = 1;
};

/**
 * Constraint window for the BKZ parameterization: 2/5 + eps/5 <= a <= 1/2
 * and 2 - 3a + 2eps <= b <= 7a - 2. Returns human-readable violations;
 * empty means valid. epsilon <= 0 is never acceptable.
 */
inline std::vector<std::string> validate_params(const DescentParams& p) {
  std::vector<std::string> w;
  char buf[160];
  if (p.epsilon <= 0) w.push_back("epsilon must be > 0");
  if (p.mode == ReduceMode::BKZ && p.epsilon > 0) {
    double alo = 0.4 + p.epsilon / 5;
    if (p.a < alo || p.a > 0.5) {
      std::snprintf(buf, sizeof buf, "a = %.4g outside [%.4g, 0.5]", p.a,
                    alo);
      w.push_back(buf);
    }
    double blo = 2 - 3 * p.a + 2 * p.epsilon, bhi = 7 * p.a - 2;
    if (p.b < blo || p.b > bhi) {
      std::snprintf(buf, sizeof buf, "b = %.4g outside [%.4g, %.4g]", p.b,
                    blo, bhi);
      w.push_back(buf);
    }
  }
  return w;
}

/** Effective BKZ block size: l = n^a (or the override), clamped to [2, n]. */
inline std::size_t descent_l(const DescentParams& p, std::size_t n) {
  std::size_t l = p.l_override
                      ? p.l_override
                      : std::size_t(std::floor(std::pow(double(n), p.a)));
  return std::clamp<std::size_t>(l, 2, std::max<std::size_t>(n, 2));
}

/**
 * Effective projection dimension: k = n^{1/2+eps} in HKZ mode, or
 * k = n^{min(4a-1, b+2a-1-eps)} in BKZ mode; clamped to [max(2, l), n].
 */
inline std::size_t descent_k(const DescentParams& p, std::size_t n) {
  std::size_t lo = std::max<std::size_t>(2, descent_l(p, n));
  std::size_t k;
  if (p.k_override) {
    k = p.k_override;
  } else {
    double expo = p.mode == ReduceMode::HKZ
                      ? 0.5 + p.epsilon
                      : std::min(4 * p.a - 1, p.b + 2 * p.a - 1 - p.epsilon);
    k = std::size_t(std::floor(std::pow(double(n), expo)));
  }
  return std::clamp<std::size_t>(k, lo, std::max<std::size_t>(n, lo));
}

/**
 * The k x k upper-left block of I's HNF basis: the sublattice of I supported
 * on the first k power-basis coordinates. Its determinant is the product of
 * the first k pivots, hence divides (and never exceeds) N(I); asserted.
 */
inline IntMat sublattice(const Ideal& I, std::size_t k) {
  if (!I.is_integral())
    throw std::invalid_argument("sublattice: fractional ideal");
  const std::size_t n = I.conductor().n();
  if (k < 1 || k > n) throw std::invalid_argument("sublattice: k out of range");
  IntMat m(k, k);
  Int d = 1;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) m.at(i, j) = I.basis().at(i, j);
    d *= m.at(i, i);
  }
  if (d > ideal_norm(I))
    throw std::logic_error("sublattice: determinant bound violated");
  return m;
}

namespace detail {

inline Int ipow(const Int& b, unsigned long e) {
  Int r;
  mpz_pow_ui(r.get_mpz_t(), b.get_mpz_t(), e);
  return r;
}

}  // namespace detail

/**
 * A short nonzero element of I: the first vector of the reduced k-dim
 * sublattice, embedded as sum_i alpha_i zeta^{i-1}. Membership in I is
 * verified, and the reduction norm bound is asserted exactly in integers:
 *   HKZ:  |N(alpha)|^k <= n^{nk} N(I)^n        (N(alpha) <= n^n N(I)^{n/k})
 *   BKZ:  |N(alpha)|^{kl} <= n^{nkl} l^{k^2 n} N(I)^{nl}
 * The BKZ form doubles the l-exponent constant kn/2l and keeps the n^n
 * coefficient-embedding factor explicit: at desk scale the o(1) in the
 * asymptotic statement cannot absorb it.
 */
inline CycloElement short_element(const Ideal& I, std::size_t k,
                                  ReduceMode mode, std::size_t l = 4) {
  const Conductor& c = I.conductor();
  const std::size_t n = c.n();
  IntMat L = sublattice(I, k);
  IntMat R = mode == ReduceMode::HKZ ? hkz(L) : bkz(L, l);
  std::vector<Int> v = R.row(0);
  v.resize(n);  // coefficients of 1, zeta, ..., zeta^{k-1}
  CycloElement alpha(c, std::move(v));
  if (alpha.is_zero()) throw std::logic_error("short_element: zero vector");
  if (!ideal_contains(I, alpha))
    throw std::logic_error("short_element: membership violated");
  Int na = norm(alpha);
  if (na < 0) na = -na;
  Int NI = ideal_norm(I);
  bool ok;
  if (mode == ReduceMode::HKZ) {
    ok = detail::ipow(na, k) <=
         detail::ipow(Int(long(n)), n * k) * detail::ipow(NI, n);
  } else {
    ok = detail::ipow(na, k * l) <=
         detail::ipow(Int(long(n)), n * k * l) *
             detail::ipow(Int(long(l)), k * k * n) * detail::ipow(NI, n * l);
  }
  if (!ok) throw std::logic_error("short_element: reduction bound violated");
  return alpha;
}

/**
 * Exact prime factorization of the principal ideal (a): factor |N(a)| fully,
 * then carry each rational prime's multiplicity into valuations at the
 * primes above it (sum f_q v_q = v_p(N) asserted). Sorted by (norm, p, poly).
 */
inline std::vector<std::pair<PrimeIdeal, long>> factor_element(
    const CycloElement& a) {
  const Conductor& c = a.conductor();
  Int na = norm(a);  // throws on zero
  if (na < 0) na = -na;
  auto fac = smooth_factor(na, na < 2 ? Int(2) : na);
  std::vector<std::pair<PrimeIdeal, long>> out;
  for (const auto& [p, mult] : *fac) {
    if (!p.fits_ulong_p())
      throw std::runtime_error("factor_element: prime exceeds machine range");
    long carried = 0;
    for (const auto& q : primes_above(c, p.get_ui(), 0)) {
      long v = element_valuation_at(a, q);
      if (v != 0) {
        out.emplace_back(q, v);
        carried += long(q.f) * v;
      }
    }
    if (carried != long(mult))
      throw std::logic_error("factor_element: valuation carry mismatch");
  }
  std::sort(out.begin(), out.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  return out;
}

namespace detail {

inline bool same_prime(const PrimeIdeal& a, const PrimeIdeal& b) {
  return !(a < b) && !(b < a);
}

/** prod q^e for signed exponents, as a fractional ideal. */
inline Ideal prime_power_product(
    const Conductor& c, const std::vector<std::pair<PrimeIdeal, long>>& fs) {
  Ideal acc = Ideal::ring_of_integers(c);
  for (const auto& [q, e] : fs) {
    if (e == 0) continue;
    Ideal qi = prime_to_ideal(c, q);
    if (e < 0) qi = ideal_inverse(qi);
    for (long t = 0; t < std::labs(e); ++t) acc = ideal_mul(acc, qi);
  }
  return acc;
}

}  // namespace detail

/** One verified rewrite q = (alpha) * prod cofactor^{-e}. */
struct RoundResult {
  CycloElement alpha;  // short element of q * (randomizer product)
  std::vector<std::pair<PrimeIdeal, long>> cofactor;  // (alpha) = q * prod
  unsigned long trials = 0;
  std::vector<std::string> warnings;
};

/**
 * One descent round: randomize I = q * prod p_i^{x_i} over the small base
 * (x_i uniform in [0, A]), take a short element of the k-dim sublattice, and
 * accept when the cofactor (alpha)/I is smooth at target_bound. The returned
 * relation (alpha) = q * prod cofactor is verified by exact ideal equality;
 * every cofactor prime has norm <= target_bound. Workers race trials; runs
 * are reproducible only in single-worker mode.
 */
inline RoundResult descent_round(const Conductor& c, const PrimeIdeal& q,
                                 const DescentParams& params,
                                 const FactorBase& fb_small,
                                 const Int& target_bound,
                                 std::uint64_t seed) {
  if (q.norm() <= target_bound)
    throw std::invalid_argument("descent_round: prime already below target");
  for (const auto& p : fb_small.primes)
    if (p.norm() > target_bound)
      throw std::invalid_argument(
          "descent_round: factor base exceeds the target bound");
  auto warnings = validate_params(params);
  if (!warnings.empty() && !(params.force_window && params.epsilon > 0))
    throw std::invalid_argument("descent_round: " + warnings.front());

  const std::size_t n = c.n();
  const std::size_t l = descent_l(params, n);
  const std::size_t k = descent_k(params, n);
  const Ideal Q = prime_to_ideal(c, q);
  const Int NQ = q.norm();
  std::vector<Ideal> fbI;
  fbI.reserve(fb_small.size());
  for (const auto& p : fb_small.primes) fbI.push_back(prime_to_ideal(c, p));

  std::atomic<bool> found{false};
  std::atomic<unsigned long> trials{0};
  std::mutex mu;
  std::optional<RoundResult> result;

  auto worker = [&](unsigned wid) {
    Rng rng(seed, wid);
    for (unsigned long t = wid; t < params.trial_budget && !found.load();
         t += std::max(1u, params.workers)) {
      trials.fetch_add(1);
      Ideal I = Q;
      Int NI = NQ;
      std::vector<long> x(fb_small.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.uniform_int(0, params.A);
        for (long j = 0; j < x[i]; ++j) {
          I = ideal_mul(I, fbI[i]);
          NI *= fb_small.primes[i].norm();
        }
      }
      CycloElement alpha = short_element(I, k, params.mode, l);
      Int na = norm(alpha);
      if (na < 0) na = -na;
      if (na % NI != 0)
        throw std::logic_error("descent_round: norm not divisible by N(I)");
      if (!smooth_factor(na / NI, target_bound)) continue;
      auto fac = factor_element(alpha);
      // peel one power of q; the rest must sit at or below target_bound
      std::vector<std::pair<PrimeIdeal, long>> cof;
      bool sawq = false, ok = true;
      for (auto& [pr, e] : fac) {
        long rem = e;
        if (detail::same_prime(pr, q)) {
          sawq = true;
          rem = e - 1;
        }
        if (rem < 0) ok = false;
        if (rem == 0) continue;
        if (pr.norm() > target_bound) ok = false;
        cof.emplace_back(pr, rem);
      }
      if (!sawq || !ok) continue;
      // exact relation check: (alpha) = q * prod cofactor as ideals
      Ideal rhs = ideal_mul(Q, detail::prime_power_product(c, cof));
      if (ideal_from_generator(alpha) != rhs)
        throw std::logic_error("descent_round: relation verification failed");
      std::lock_guard<std::mutex> lock(mu);
      if (!found.exchange(true))
        result = RoundResult{alpha, std::move(cof), 0, warnings};
      return;
    }
  };

  if (params.workers <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < params.workers; ++w)
      pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }
  if (!result) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "descent_round (N=%lu, q over %lu, target %s): budget "
                  "exhausted after %lu trials",
                  c.N(), q.p, target_bound.get_str().c_str(), trials.load());
    throw std::runtime_error(buf);
  }
  result->trials = trials.load();
  return *result;
}

/** Output of the initial decomposition: (num/den) * I = prod factors. */
struct InitialDecomposition {
  CycloElement num;
  Int den = 1;
  std::vector<std::pair<PrimeIdeal, long>> factors;
  unsigned long trials = 0;
};

/**
 * Decompose an arbitrary integral ideal over primes of norm <= bound:
 * randomize I_r = I * prod p^{x}, invert, BKZ-reduce the numerator lattice
 * of I_r^{-1} with block size l, and accept when b = (alpha) I_r is
 * bound-smooth. Exactness ((alpha) I = prod q^e, signed exponents allowed)
 * is verified by ideal equality, and N(b) is asserted against the reduction
 * bound 2^{n^{3/2} lg(n)/2} * sqrt|Delta| with documented slack (an extra
 * n^{n/2} 2^n coefficient-embedding factor that the asymptotic form hides).
 * When I is already bound-smooth, returns alpha = 1 with zero trials.
 */
inline InitialDecomposition initial_decomposition(
    const Ideal& I, const FactorBase& fb, long A, std::size_t l,
    const Int& bound, std::uint64_t seed, unsigned long trial_budget = 2000) {
  const Conductor& c = I.conductor();
  const std::size_t n = c.n();
  if (!I.is_integral())
    throw std::invalid_argument("initial_decomposition: fractional ideal");
  for (const auto& p : fb.primes)
    if (p.norm() > bound)
      throw std::invalid_argument(
          "initial_decomposition: factor base exceeds the bound");

  // exact ideal factorization at the bound, or nullopt when not smooth
  auto try_factor = [&](const Ideal& J)
      -> std::optional<std::vector<std::pair<PrimeIdeal, long>>> {
    Int nj = ideal_norm(J);
    auto rat = smooth_factor(nj, bound);
    if (!rat) return std::nullopt;
    std::vector<std::pair<PrimeIdeal, long>> out;
    for (const auto& [p, mult] : *rat) {
      long carried = 0;
      for (const auto& pr : primes_above(c, p.get_ui(), 0)) {
        long v = valuation(J, pr);
        if (v != 0) {
          if (pr.norm() > bound) return std::nullopt;
          out.emplace_back(pr, v);
          carried += long(pr.f) * v;
        }
      }
      if (carried != long(mult))
        throw std::logic_error("initial_decomposition: carry mismatch");
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
  };

  if (auto direct = try_factor(I))
    return InitialDecomposition{CycloElement::one(c), 1, std::move(*direct),
                                0};

  const double lg_bound = std::pow(double(n), 1.5) * std::log2(double(n)) / 2 +
                          double(n) * std::log2(double(n)) / 2 +
                          mpz_sizeinbase(discriminant(c).get_mpz_t(), 2) / 2.0 +
                          double(n) + 1;
  std::vector<Ideal> fbI;
  for (const auto& p : fb.primes) fbI.push_back(prime_to_ideal(c, p));
  Rng rng(seed, 7081);
  for (unsigned long t = 0; t < trial_budget; ++t) {
    Ideal Ir = I;
    std::vector<long> x(fb.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.uniform_int(0, A);
      for (long j = 0; j < x[i]; ++j) Ir = ideal_mul(Ir, fbI[i]);
    }
    Ideal Jinv = ideal_inverse(Ir);  // numerator lattice = den * Ir^{-1}
    IntMat R = bkz(Jinv.basis(), std::max<std::size_t>(2, l));
    CycloElement beta(c, R.row(0));
    if (beta.is_zero()) continue;
    // C = (beta/den) * Ir is integral by construction of the lattice
    Ideal C0 = ideal_mul(ideal_from_generator(beta), Ir);
    Ideal C(c, C0.basis(), C0.denominator() * Jinv.denominator());
    if (!C.is_integral())
      throw std::logic_error("initial_decomposition: non-integral cofactor");
    auto cfac = try_factor(C);
    if (!cfac) continue;
    if (mpz_sizeinbase(ideal_norm(C).get_mpz_t(), 2) > lg_bound)
      throw std::logic_error("initial_decomposition: norm bound violated");
    // (beta/den) * I = C * prod p^{-x}
    std::vector<std::pair<PrimeIdeal, long>> factors = *cfac;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == 0) continue;
      bool merged = false;
      for (auto& [pr, e] : factors)
        if (detail::same_prime(pr, fb.primes[i])) {
          e -= x[i];
          merged = true;
          break;
        }
      if (!merged) factors.emplace_back(fb.primes[i], -x[i]);
    }
    factors.erase(std::remove_if(factors.begin(), factors.end(),
                                 [](const auto& f) { return f.second == 0; }),
                  factors.end());
    std::sort(factors.begin(), factors.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    // exact verification: (num) * I = den * prod q^e as fractional ideals
    Ideal lhs = ideal_mul(ideal_from_generator(beta), I);
    Ideal rhs = ideal_mul(
        ideal_from_generator(CycloElement::from_int(c, Jinv.denominator())),
        detail::prime_power_product(c, factors));
    if (lhs != rhs)
      throw std::logic_error("initial_decomposition: verification failed");
    return InitialDecomposition{beta, Jinv.denominator(), std::move(factors),
                                t + 1};
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "initial_decomposition (N=%lu, bound %s): budget exhausted "
                "after %lu trials",
                c.N(), bound.get_str().c_str(), trial_budget);
  throw std::runtime_error(buf);
}

/** One multiplicative contributor gen^exp of a decomposition (gen=num/den). */
struct GenEntry {
  CycloElement num;
  Int den = 1;
  long exp = 1;
  std::optional<PrimeIdeal> source;  // round input prime; absent for stage 0
};

/** I = prod gens^exp * prod primes^exps, exactly (fractional ideals). */
struct Decomposition {
  std::vector<GenEntry> gens;
  std::vector<PrimeIdeal> primes;
  std::vector<long> exps;
  unsigned long rounds = 0;
  unsigned long trials = 0;
  std::vector<std::string> warnings;
};

/**
 * Valuation-level check of the decomposition identity at every prime above
 * a rational prime dividing any participating norm or denominator (no other
 * prime can carry a nonzero valuation on either side).
 */
inline bool verify_decomposition(const Ideal& I, const Decomposition& d) {
  if (d.primes.size() != d.exps.size()) return false;
  const Conductor& c = I.conductor();
  std::vector<unsigned long> ps;
  auto add_from = [&](const Int& v) {
    Int a = v < 0 ? Int(-v) : v;
    if (a <= 1) return;
    auto fac = smooth_factor(a, a);
    for (const auto& [p, e] : *fac) {
      (void)e;
      ps.push_back(p.get_ui());
    }
  };
  add_from(ideal_norm_rational(I).first);
  add_from(I.denominator());
  for (const auto& g : d.gens) {
    add_from(norm(g.num));
    add_from(g.den);
  }
  for (const auto& q : d.primes) ps.push_back(q.p);
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  for (unsigned long p : ps) {
    for (const auto& q : primes_above(c, p, 0)) {
      long lhs = valuation(I, q);
      long rhs = 0;
      for (const auto& g : d.gens) {
        long v = element_valuation_at(g.num, q);
        if (g.den != 1)
          v -= long(q.e) * detail::int_valuation(g.den, Int(long(q.p)));
        rhs += g.exp * v;
      }
      for (std::size_t i = 0; i < d.primes.size(); ++i)
        if (detail::same_prime(d.primes[i], q)) rhs += d.exps[i];
      if (lhs != rhs) return false;
    }
  }
  return true;
}

/** Budget exhaustion mid-descent; carries the resumable partial tree. */
struct DescentError : std::runtime_error {
  Decomposition partial;
  DescentError(const std::string& m, Decomposition p)
      : std::runtime_error(m), partial(std::move(p)) {}
};

/**
 * Staged descent: initial decomposition at the stage-0 bound, then rounds on
 * the largest outstanding prime with per-round target max(final_bound,
 * N(q)^{1-eps}) until everything sits at or below final_bound. Each round
 * strictly shrinks the processed prime's log-norm by >= eps * ln N(q), so
 * the ladder terminates; residual exponents accumulate across rounds. On a
 * budget exhaustion the partial tree is thrown inside DescentError.
 */
inline Decomposition full_descent(const Ideal& I, const DescentParams& params,
                                  const FactorBase& fb, const Int& final_bound,
                                  std::uint64_t seed,
                                  unsigned long stage0_bound = 0) {
  const Conductor& c = I.conductor();
  const std::size_t n = c.n();
  if (!I.is_integral())
    throw std::invalid_argument("full_descent: fractional ideal");
  Decomposition d;
  d.warnings = validate_params(params);
  if (!d.warnings.empty() && !(params.force_window && params.epsilon > 0))
    throw std::invalid_argument("full_descent: " + d.warnings.front());

  Int stage0(stage0_bound);
  if (stage0 == 0) {
    stage0 = n < 24 ? detail::ipow(Int(2), n) : detail::ipow(Int(2), 24);
    if (stage0 < final_bound) stage0 = final_bound;
  }
  std::size_t l0 = params.l_override
                       ? params.l_override
                       : std::size_t(std::floor(std::sqrt(double(n))));
  std::optional<InitialDecomposition> init;
  try {
    init = initial_decomposition(I, fb, params.A, std::max<std::size_t>(2, l0),
                                 stage0, seed, params.trial_budget);
  } catch (const std::runtime_error& e) {
    throw DescentError(std::string("full_descent stage 0: ") + e.what(),
                       std::move(d));
  }
  d.trials += init->trials;
  if (!(init->num == CycloElement::one(c) && init->den == 1))
    d.gens.push_back(GenEntry{init->num, init->den, -1, std::nullopt});

  // outstanding primes with accumulated exponents
  std::vector<std::pair<PrimeIdeal, long>> acc = init->factors;
  auto largest_above = [&]() -> std::size_t {
    std::size_t best = acc.size();
    for (std::size_t i = 0; i < acc.size(); ++i)
      if (acc[i].second != 0 && acc[i].first.norm() > final_bound &&
          (best == acc.size() || acc[best].first.norm() < acc[i].first.norm()))
        best = i;
    return best;
  };
  for (;;) {
    std::size_t i = largest_above();
    if (i == acc.size()) break;
    PrimeIdeal q = acc[i].first;
    long e = acc[i].second;
    double lnN = std::log(q.norm().get_d());
    Int target = Int(std::max(
        final_bound.get_d(), std::floor(std::exp((1 - params.epsilon) * lnN))));
    if (target < final_bound) target = final_bound;
    std::optional<RoundResult> rr;
    try {
      rr = descent_round(c, q, params, fb, target,
                         seed + 10007 * (d.rounds + 1));
    } catch (const std::runtime_error& e2) {
      for (const auto& [pr, ex] : acc)
        if (ex != 0) {
          d.primes.push_back(pr);
          d.exps.push_back(ex);
        }
      throw DescentError(std::string("full_descent: ") + e2.what(),
                         std::move(d));
    }
    d.rounds += 1;
    d.trials += rr->trials;
    acc[i].second = 0;
    d.gens.push_back(GenEntry{rr->alpha, 1, e, q});
    for (const auto& [pr, ex] : rr->cofactor) {
      bool merged = false;
      for (auto& [apr, ae] : acc)
        if (detail::same_prime(apr, pr)) {
          ae -= e * ex;
          merged = true;
          break;
        }
      if (!merged) acc.emplace_back(pr, -e * ex);
    }
  }
  std::sort(acc.begin(), acc.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [pr, ex] : acc)
    if (ex != 0) {
      d.primes.push_back(pr);
      d.exps.push_back(ex);
    }
  if (!verify_decomposition(I, d))
    throw std::logic_error("full_descent: decomposition verification failed");
  return d;
}

}  // namespace cyclopip
