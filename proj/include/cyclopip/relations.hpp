#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "ideal.hpp"
#include "rng.hpp"

namespace cyclopip {

/** Process-wide count of relation sampling attempts. Callers that promise a
 * sampling-free code path snapshot this before/after to audit the promise. */
inline std::atomic<unsigned long>& sampling_counter() {
  static std::atomic<unsigned long> v{0};
  return v;
}

/** ceil(12 ln^2 |Delta|): above this bound the factor-base classes generate
 * the class group (under GRH). Smaller bounds are usable but downgrade the
 * result to "generated subgroup" unless certified otherwise. */
inline Int bach_bound(const Conductor& c) {
  PrecisionGuard guard(128);
  Real l = log(to_real(discriminant(c)));
  return round_to_int(ceil(12 * l * l));
}

/** All prime ideals of norm <= B above rational primes <= B,
 * sorted by (norm, p, poly). */
struct FactorBase {
  Int bound;
  std::vector<PrimeIdeal> primes;

  static FactorBase build(const Conductor& c, const Int& B) {
    if (B < 2) throw std::invalid_argument("factor base: bound < 2");
    FactorBase fb;
    fb.bound = B;
    Int p = 1;
    for (;;) {
      mpz_nextprime(p.get_mpz_t(), p.get_mpz_t());
      if (p > B) break;
      for (auto& q : primes_above(c, p.get_ui(), B)) fb.primes.push_back(q);
    }
    std::sort(fb.primes.begin(), fb.primes.end());
    return fb;
  }

  std::size_t size() const { return primes.size(); }

  std::optional<std::size_t> index_of(const PrimeIdeal& q) const {
    for (std::size_t i = 0; i < primes.size(); ++i)
      if (primes[i] == q) return i;
    return std::nullopt;
  }
};

/** Verified relation (generator) = prod q_i^{exponents_i} over the base. */
struct Relation {
  std::vector<long> exponents;
  CycloElement generator;
};

inline CycloElement sample_random_element(const Conductor& c, long A,
                                          Rng& rng) {
  if (A < 1) throw std::invalid_argument("sample: A >= 1 required");
  for (;;) {
    std::vector<Int> v(c.n());
    for (auto& e : v) e = rng.uniform_int(-A, A);
    CycloElement a(c, std::move(v));
    if (!a.is_zero()) return a;
  }
}

/** u_a plus h random signed monomials zeta^i; h = 0 gives the unit itself. */
inline CycloElement sample_unit_variation(const Conductor& c,
                                          unsigned long a, unsigned h,
                                          Rng& rng) {
  CycloElement x = cyclotomic_unit(c, a);
  for (unsigned i = 0; i < h; ++i) {
    long k = rng.uniform_int(0, long(c.N()) - 1);
    CycloElement mono = CycloElement::zeta_pow(c, k);
    x = rng.u64() % 2 ? x + mono : x - mono;
  }
  return x;
}

namespace detail {

/** Pollard rho with Brent cycle detection; x odd composite without factors
 * below the trial-division limit. */
inline Int pollard_rho(const Int& x, Rng& rng) {
  for (;;) {
    Int c(rng.uniform_int(1, 1000000));
    Int y(rng.uniform_int(2, 1000000));
    Int m = 128, g = 1, r = 1, q = 1, ys = y, xx = y;
    while (g == 1) {
      xx = y;
      for (Int i = 0; i < r; ++i) y = (y * y + c) % x;
      Int k = 0;
      while (k < r && g == 1) {
        ys = y;
        Int lim = m < r - k ? m : r - k;
        for (Int i = 0; i < lim; ++i) {
          y = (y * y + c) % x;
          Int d = xx - y;
          if (d < 0) d = -d;
          q = q * d % x;
        }
        g = gcd(q, x);
        k += m;
      }
      r *= 2;
    }
    if (g == x) {
      g = 1;
      while (g == 1) {
        ys = (ys * ys + c) % x;
        Int d = xx - ys;
        if (d < 0) d = -d;
        g = gcd(d, x);
      }
    }
    if (g != x) return g;
  }
}

inline bool is_probable_prime(const Int& x) {
  return mpz_probab_prime_p(x.get_mpz_t(), 28) != 0;
}

}  // namespace detail

/**
 * Full factorization of |x| when B-smooth, else absent: trial division to
 * min(B, 2^20), then perfect-power splitting and Pollard rho on the
 * cofactor. Returns (prime, multiplicity) pairs sorted by prime.
 */
inline std::optional<std::vector<std::pair<Int, unsigned>>> smooth_factor(
    Int x, const Int& B) {
  if (x == 0) throw std::domain_error("smooth_factor: zero");
  x = abs(x);
  std::vector<std::pair<Int, unsigned>> out;
  if (x == 1) return out;
  unsigned long td_limit = 1UL << 20;
  if (B < Int(td_limit)) td_limit = B.get_ui();
  for (unsigned long p = 2; p <= td_limit && Int(p) * Int(p) <= x; ++p) {
    if (x % p == 0) {
      unsigned m = 0;
      while (x % p == 0) {
        x /= p;
        ++m;
      }
      out.emplace_back(Int(p), m);
    }
  }
  // remaining cofactor: 1, a prime, or composite with no factor <= td_limit
  std::vector<Int> stack;
  if (x > 1) stack.push_back(x);
  Rng rng(0x9e3779b97f4a7c15ULL, 47);
  while (!stack.empty()) {
    Int v = stack.back();
    stack.pop_back();
    if (detail::is_probable_prime(v)) {
      if (v > B) return std::nullopt;
      bool merged = false;
      for (auto& [p, m] : out)
        if (p == v) {
          ++m;
          merged = true;
        }
      if (!merged) out.emplace_back(v, 1);
      continue;
    }
    // perfect-power check first: rho can stall on p^k
    Int root;
    bool split = false;
    for (unsigned k = 2; k <= mpz_sizeinbase(v.get_mpz_t(), 2); ++k) {
      if (mpz_root(root.get_mpz_t(), v.get_mpz_t(), k) != 0) {
        for (unsigned i = 0; i < k; ++i) stack.push_back(root);
        split = true;
        break;
      }
    }
    if (split) continue;
    Int d = detail::pollard_rho(v, rng);
    stack.push_back(d);
    stack.push_back(v / d);
  }
  std::sort(out.begin(), out.end());
  std::vector<std::pair<Int, unsigned>> merged;
  for (auto& [p, m] : out) {
    if (!merged.empty() && merged.back().first == p)
      merged.back().second += m;
    else
      merged.emplace_back(p, m);
  }
  return merged;
}

namespace detail {

/** Hensel lift of a degree-1 root of Phi_N mod p to mod p^K (p coprime to
 * N, so the root is simple and Newton iteration applies). */
inline Int lifted_root(const Conductor& c, const PrimeIdeal& q, unsigned K) {
  static std::map<std::tuple<unsigned long, unsigned long, unsigned long,
                             unsigned>,
                  Int>
      cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(q.N, q.p, q.root, K);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  const std::vector<Int>& phi = cyclotomic_polynomial(c);
  std::vector<Int> dphi(phi.size() - 1);
  for (std::size_t i = 1; i < phi.size(); ++i)
    dphi[i - 1] = Int(static_cast<long>(i)) * phi[i];
  auto eval = [](const std::vector<Int>& poly, const Int& at,
                 const Int& mod) {
    Int acc = 0;
    for (std::size_t i = poly.size(); i-- > 0;)
      acc = (acc * at + poly[i]) % mod;
    if (acc < 0) acc += mod;
    return acc;
  };
  Int r(q.root);
  unsigned have = 1;
  while (have < K) {
    unsigned next = std::min(2 * have, K);
    Int pn;
    mpz_ui_pow_ui(pn.get_mpz_t(), q.p, next);
    Int f = eval(phi, r, pn);
    Int df = eval(dphi, r, pn);
    Int inv;
    if (mpz_invert(inv.get_mpz_t(), df.get_mpz_t(), pn.get_mpz_t()) == 0)
      throw std::logic_error("lifted_root: derivative not invertible");
    r = (r - f * inv) % pn;
    if (r < 0) r += pn;
    have = next;
  }
  return cache.emplace(key, std::move(r)).first->second;
}

}  // namespace detail

/**
 * Valuation of a nonzero element at a split degree-1 prime (p coprime to
 * N) via the Hensel-lifted root: v_q(a) = v_p(a(r)) in Z_p. Much faster
 * than the tau loop on relation-collection hot paths.
 */
inline long valuation_split_fast(const CycloElement& a, const PrimeIdeal& q) {
  if (q.f != 1 || a.conductor().N() % q.p == 0)
    throw std::invalid_argument("valuation_split_fast: needs split prime");
  if (a.is_zero()) throw std::domain_error("valuation: zero element");
  for (unsigned K = 24;; K *= 2) {
    Int r = detail::lifted_root(a.conductor(), q, K);
    Int pk;
    mpz_ui_pow_ui(pk.get_mpz_t(), q.p, K);
    Int acc = 0;
    for (std::size_t i = a.coeffs().size(); i-- > 0;)
      acc = (acc * r + a.coeffs()[i]) % pk;
    if (acc < 0) acc += pk;
    if (acc == 0) continue;  // valuation >= K; retry with more precision
    long v = 0;
    Int p(q.p);
    while (acc % p == 0) {
      acc /= p;
      ++v;
    }
    return v;
  }
}

/** Dispatches to the fast split path when available. */
inline long element_valuation_at(const CycloElement& a, const PrimeIdeal& q) {
  return (q.f == 1 && a.conductor().N() % q.p != 0)
             ? valuation_split_fast(a, q)
             : valuation_element(a, q);
}

/**
 * Turn a into a verified relation if N(a) is B-smooth and all valuations
 * land on factor-base primes. Exponents are computed from a directly and
 * cross-checked against the norm factorization (sum of f_q v_q per rational
 * prime must carry the full multiplicity).
 */
inline std::optional<Relation> try_relation(const CycloElement& a,
                                            const FactorBase& fb) {
  if (a.is_zero()) throw std::domain_error("try_relation: zero");
  Int nrm = norm(a);
  auto fac = smooth_factor(nrm, fb.bound);
  if (!fac) return std::nullopt;
  std::vector<long> e(fb.size(), 0);
  for (auto& [p, mult] : *fac) {
    unsigned long pl = p.get_ui();
    long carried = 0;
    bool any = false;
    for (std::size_t i = 0; i < fb.size(); ++i) {
      const PrimeIdeal& q = fb.primes[i];
      if (q.p != pl) continue;
      any = true;
      long v = element_valuation_at(a, q);
      e[i] = v;
      carried += long(q.f) * v;
    }
    if (!any || carried != long(mult)) return std::nullopt;
  }
  return Relation{std::move(e), a};
}

/** Independent check: rebuild prod q^e as an ideal and compare with (gen). */
inline bool verify_relation(const Relation& r, const FactorBase& fb,
                            const Conductor& c) {
  Ideal lhs = ideal_from_generator(r.generator);
  Ideal rhs = Ideal::ring_of_integers(c);
  for (std::size_t i = 0; i < fb.size(); ++i) {
    long e = r.exponents[i];
    if (e < 0) return false;  // relation generators here are integral
    Ideal q = prime_to_ideal(c, fb.primes[i]);
    for (long k = 0; k < e; ++k) rhs = ideal_mul(rhs, q);
  }
  return lhs == rhs;
}

/**
 * Galois-orbit amplification: sigma_t(alpha) yields the relation with
 * exponents permuted through sigma_t on primes. Each conjugate is rebuilt
 * from scratch via try_relation, so every member is valuation-verified;
 * conjugates that fail to land in the base (impossible for a norm-closed
 * base, since sigma preserves p and f) are skipped and counted. Members are
 * deduplicated by exponent vector against the input and each other.
 */
inline std::vector<Relation> galois_orbit(const Relation& r,
                                          const FactorBase& fb,
                                          const Conductor& c,
                                          unsigned* skipped = nullptr) {
  std::vector<Relation> out;
  if (skipped) *skipped = 0;
  std::vector<std::vector<long>> seen{r.exponents};
  for (unsigned long t = 2; t < c.N(); ++t) {
    if (std::gcd(t, c.N()) != 1) continue;
    std::vector<long> expect(fb.size(), 0);
    bool inside = true;
    for (std::size_t i = 0; i < fb.size() && inside; ++i) {
      if (r.exponents[i] == 0) continue;
      PrimeIdeal img = galois_on_prime(c, fb.primes[i], t);
      auto idx = fb.index_of(img);
      if (!idx)
        inside = false;
      else
        expect[*idx] += r.exponents[i];
    }
    if (!inside) {
      if (skipped) ++*skipped;
      continue;
    }
    if (std::find(seen.begin(), seen.end(), expect) != seen.end()) continue;
    auto rebuilt = try_relation(galois_apply(r.generator, t), fb);
    if (!rebuilt || rebuilt->exponents != expect) {
      if (skipped) ++*skipped;
      continue;
    }
    seen.push_back(expect);
    out.push_back(std::move(*rebuilt));
  }
  return out;
}

/** log2 N(a) from the exact resultant norm (always nonnegative here). */
inline double log2_norm(const CycloElement& a) {
  Int nrm = norm(a);
  PrecisionGuard guard(64);
  Real v = log(to_real(nrm)) / log(Real(2));
  return v.convert_to<double>();
}

/** Heuristic smoothness rate u^{-u}, u = ln|N(alpha)| / ln B. */
inline double heuristic1_rate(double log2_norm_value, const Int& B) {
  double lb = std::log2(B.get_d());
  if (lb <= 0) return 1.0;
  double u = log2_norm_value / lb;
  if (u <= 1) return 1.0;
  return std::exp(-u * std::log(u));
}

/**
 * Append-only relation sink shared by sampling workers. Tracks the
 * attempt/success statistics used for the Heuristic-1 smoothness log.
 */
struct RelationAccumulator {
  std::vector<Relation> relations;
  unsigned long attempts = 0;
  unsigned long smooth = 0;
  double log2_norm_sum = 0;

  void record_attempt(double l2n) {
    std::lock_guard<std::mutex> lock(mu_);
    ++attempts;
    log2_norm_sum += l2n;
  }
  void append(Relation r) {
    std::lock_guard<std::mutex> lock(mu_);
    ++smooth;
    relations.push_back(std::move(r));
  }
  std::size_t size() {
    std::lock_guard<std::mutex> lock(mu_);
    return relations.size();
  }
  double observed_rate() {
    std::lock_guard<std::mutex> lock(mu_);
    return attempts ? double(smooth) / double(attempts) : 0.0;
  }
  double mean_log2_norm() {
    std::lock_guard<std::mutex> lock(mu_);
    return attempts ? log2_norm_sum / double(attempts) : 0.0;
  }

 private:
  std::mutex mu_;
};

struct SamplerConfig {
  long A = 1;          // coefficient bound for random elements
  unsigned max_h = 2;  // unit variations draw h in [1, max_h]
  bool orbits = true;  // amplify each hit through the Galois orbit
  unsigned workers = 1;
};

/**
 * Collects verified relations until the accumulator holds at least `want`
 * or per-worker attempts hit `budget`. Workers alternate random elements
 * and unit variations on split PRNG streams: each stream's draw sequence is
 * reproducible, and a single-worker run is fully deterministic. With
 * several workers the early-exit cutoff depends on scheduling.
 */
inline void collect_relations(const Conductor& c, const FactorBase& fb,
                              std::size_t want, std::uint64_t seed,
                              const SamplerConfig& cfg,
                              RelationAccumulator& acc,
                              unsigned long budget = 200000,
                              std::uint64_t stream_base = 1000) {
  std::vector<unsigned long> unit_idx;
  for (unsigned long a = 2; a < c.N(); ++a)
    if (std::gcd(a, c.N()) == 1) unit_idx.push_back(a);
  auto work = [&](unsigned wid) {
    Rng rng(seed, stream_base + wid);
    for (unsigned long it = 0; it < budget; ++it) {
      if (acc.size() >= want) return;
      CycloElement a = CycloElement::one(c);
      if (it % 2 == 0 || unit_idx.empty()) {
        a = sample_random_element(c, cfg.A, rng);
      } else {
        unsigned long ua = unit_idx[rng.u64() % unit_idx.size()];
        unsigned h = unsigned(rng.uniform_int(1, long(cfg.max_h)));
        a = sample_unit_variation(c, ua, h, rng);
        if (a.is_zero()) continue;
      }
      sampling_counter().fetch_add(1, std::memory_order_relaxed);
      acc.record_attempt(log2_norm(a));
      auto rel = try_relation(a, fb);
      if (!rel) continue;
      Relation base = *rel;
      acc.append(std::move(*rel));
      if (cfg.orbits) {
        for (auto& member : galois_orbit(base, fb, c))
          acc.append(std::move(member));
      }
    }
  };
  unsigned nw = std::max(1u, cfg.workers);
  if (nw == 1) {
    work(0);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < nw; ++w) pool.emplace_back(work, w);
  for (auto& t : pool) t.join();
}

/** Benchmark rows: mean log2 |N(alpha)| of Hamming-weight-w random 0/1
 * vectors vs. weight-w cyclotomic units perturbed by one signed monomial. */
struct Table1Row {
  unsigned weight;
  double random_mean;
  double unitvar_mean;
};

inline std::vector<Table1Row> table1_benchmark(
    const Conductor& c, const std::vector<unsigned>& weights,
    unsigned trials, std::uint64_t seed) {
  if (trials < 30) throw std::invalid_argument("table1: trials >= 30");
  std::vector<Table1Row> rows;
  for (unsigned w : weights) {
    if (w < 2 || w > c.n())
      throw std::invalid_argument("table1: weight outside [2, n]");
    // nearest unit index of Hamming weight >= w (u_a has a ones before
    // reduction; a < n keeps the weight exact)
    unsigned long ua = w;
    while (std::gcd(ua, c.N()) != 1) ++ua;
    Rng rng(seed, w);
    double racc = 0, uacc = 0;
    for (unsigned t = 0; t < trials; ++t) {
      std::vector<Int> v(c.n());
      // w distinct positions set to 1: partial Fisher-Yates over indices
      std::vector<std::size_t> idx(c.n());
      for (std::size_t i = 0; i < c.n(); ++i) idx[i] = i;
      for (unsigned j = 0; j < w; ++j) {
        std::size_t k =
            j + std::size_t(rng.uniform_int(0, long(c.n()) - 1 - long(j)));
        std::swap(idx[j], idx[k]);
        v[idx[j]] = 1;
      }
      racc += log2_norm(CycloElement(c, std::move(v)));
      CycloElement uv = sample_unit_variation(c, ua, 1, rng);
      while (uv.is_zero()) uv = sample_unit_variation(c, ua, 1, rng);
      uacc += log2_norm(uv);
    }
    rows.push_back(Table1Row{w, racc / trials, uacc / trials});
  }
  return rows;
}

/** CSV with the fixed header, one row per weight. */
inline std::string table1_csv(const std::vector<Table1Row>& rows) {
  std::string out = "weight,random_mean,unitvar_mean\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%u,%.4f,%.4f\n", r.weight,
                  r.random_mean, r.unitvar_mean);
    out += buf;
  }
  return out;
}

}  // namespace cyclopip
