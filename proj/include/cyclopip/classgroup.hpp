#pragma once

#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relations.hpp"

namespace cyclopip {

/** Truncated analytic class number formula at the given prime bound. The
 * raw product approximates h R; hstar = product / sqrt(2) is the lower
 * bound in the sandwich hstar <= h R < 2 hstar provided the truncation
 * stays within a factor sqrt(2). */
struct EulerEstimate {
  Real hstar;
  Real product;
  unsigned long truncated_at;
};

namespace detail {

inline unsigned long multiplicative_order(unsigned long a, unsigned long m) {
  unsigned long acc = a % m, k = 1;
  while (acc != 1) {
    acc = (acc * a) % m;
    ++k;
  }
  return k;
}

}  // namespace detail

inline EulerEstimate euler_product_estimate(const Conductor& c,
                                            unsigned long P0,
                                            unsigned precision) {
  if (P0 < 2) throw std::invalid_argument("euler product: P0 >= 2");
  if (precision < 32)
    throw std::invalid_argument("euler product: precision >= 32");
  PrecisionGuard guard(precision);
  // leading term w sqrt|Delta| / (2 pi)^{n/2}; r1 = 0, r2 = n/2 always
  Real lead = to_real(Int(c.torsion_order())) * sqrt(to_real(discriminant(c)));
  Real twopi = 2 * real_pi();
  for (std::size_t i = 0; i < c.n() / 2; ++i) lead /= twopi;
  Real prod = 1;
  unsigned long last = 2;
  Int p = 1;
  for (;;) {
    mpz_nextprime(p.get_mpz_t(), p.get_mpz_t());
    if (p > Int(P0)) break;
    unsigned long pl = p.get_ui();
    // local factor (1 - 1/p) prod_{q | p} (1 - 1/Nq)^{-1}: with N = p^v m
    // the primes above p have degree f = ord(p mod m), count g = phi(m)/f
    unsigned long m = c.N();
    while (m % pl == 0) m /= pl;
    unsigned long f = m == 1 ? 1 : detail::multiplicative_order(pl % m, m);
    unsigned long g = euler_phi(m) / f;
    Int nq;
    mpz_ui_pow_ui(nq.get_mpz_t(), pl, f);
    Real local = 1 - 1 / Real(pl);
    Real qfac = 1 - 1 / to_real(nq);
    for (unsigned long i = 0; i < g; ++i) local /= qfac;
    prod *= local;
    last = pl;
  }
  Real value = lead * prod;
  return {value / sqrt(Real(2)), value, last};
}

/**
 * Incremental lattice of real log vectors. Insertion keeps an exact basis
 * of the generated lattice: independent vectors extend it; dependent ones
 * are written as rational combinations (denominator found by rounding) and
 * refine the basis by the corresponding finite index. Throws
 * PrecisionExhausted when a dependency cannot be resolved at the working
 * precision, so callers can rebuild with more bits.
 */
class LogLatticeBuilder {
 public:
  LogLatticeBuilder(std::size_t ambient, unsigned precision)
      : dim_(ambient), prec_(precision) {}

  std::size_t rank() const { return basis_.size(); }
  std::size_t ambient() const { return dim_; }

  bool insert(const std::vector<Real>& v) {
    if (v.size() != dim_) throw std::invalid_argument("log insert: width");
    PrecisionGuard guard(prec_);
    Real tiny = ldexp(Real(1), -int(prec_) / 2);
    Real nv = norm2(v);
    if (nv < tiny) return false;  // torsion: zero log vector
    if (basis_.empty()) {
      basis_.push_back(v);
      return true;
    }
    std::size_t k = basis_.size();
    // least squares v ~ sum x_i basis_i via the normal equations
    std::vector<std::vector<Real>> g(k, std::vector<Real>(k + 1));
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) g[i][j] = dot(basis_[i], basis_[j]);
      g[i][k] = dot(basis_[i], v);
    }
    std::vector<Real> x = solve(std::move(g));
    std::vector<Real> res = v;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < dim_; ++j) res[j] -= x[i] * basis_[i][j];
    Real rn = norm2(res);
    if (rn * rn > tiny * (1 + nv) * (1 + nv)) {
      basis_.push_back(v);
      return true;
    }
    // dependent: find the least q with q x integral
    Real eps = ldexp(Real(1), -int(prec_) / 4);
    for (long q = 1; q <= 512; ++q) {
      bool ok = true;
      std::vector<Int> num(k);
      for (std::size_t i = 0; i < k && ok; ++i) {
        Real t = q * x[i];
        num[i] = round_to_int(t);
        if (abs(t - to_real(num[i])) > eps) ok = false;
      }
      if (!ok) continue;
      if (q == 1) return false;  // v already in the lattice
      refine(num, q);
      return true;
    }
    throw PrecisionExhausted("log lattice: unresolved dependency");
  }

  /** sqrt(Gram determinant) of the current basis; 1 when empty. */
  Real volume() const {
    PrecisionGuard guard(prec_);
    if (basis_.empty()) return Real(1);
    std::size_t k = basis_.size();
    std::vector<std::vector<Real>> g(k, std::vector<Real>(k));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) g[i][j] = dot(basis_[i], basis_[j]);
    // determinant by Gaussian elimination with partial pivoting
    Real det = 1;
    for (std::size_t col = 0; col < k; ++col) {
      std::size_t piv = col;
      for (std::size_t i = col + 1; i < k; ++i)
        if (abs(g[i][col]) > abs(g[piv][col])) piv = i;
      if (piv != col) {
        std::swap(g[piv], g[col]);
        det = -det;
      }
      det *= g[col][col];
      if (g[col][col] == 0) return Real(0);
      for (std::size_t i = col + 1; i < k; ++i) {
        Real f = g[i][col] / g[col][col];
        for (std::size_t j = col; j < k; ++j) g[i][j] -= f * g[col][j];
      }
    }
    if (det < 0) return Real(0);  // numerically degenerate Gram
    return sqrt(det);
  }

 private:
  Real dot(const std::vector<Real>& a, const std::vector<Real>& b) const {
    Real s = 0;
    for (std::size_t i = 0; i < dim_; ++i) s += a[i] * b[i];
    return s;
  }
  Real norm2(const std::vector<Real>& a) const { return sqrt(dot(a, a)); }

  static std::vector<Real> solve(std::vector<std::vector<Real>> m) {
    std::size_t k = m.size();
    for (std::size_t col = 0; col < k; ++col) {
      std::size_t piv = col;
      for (std::size_t i = col + 1; i < k; ++i)
        if (abs(m[i][col]) > abs(m[piv][col])) piv = i;
      std::swap(m[piv], m[col]);
      if (m[col][col] == 0)
        throw PrecisionExhausted("log lattice: singular Gram");
      for (std::size_t i = 0; i < k; ++i) {
        if (i == col) continue;
        Real f = m[i][col] / m[col][col];
        for (std::size_t j = col; j <= k; ++j) m[i][j] -= f * m[col][j];
      }
    }
    std::vector<Real> x(k);
    for (std::size_t i = 0; i < k; ++i) x[i] = m[i][k] / m[i][i];
    return x;
  }

  /** v = (num/q) . basis joins the lattice: new basis rows are HNF rows of
   * [q I; num] divided by q, expressed back in ambient coordinates. */
  void refine(const std::vector<Int>& num, long q) {
    std::size_t k = basis_.size();
    IntMat stack(k + 1, k);
    for (std::size_t i = 0; i < k; ++i) stack.at(i, i) = q;
    for (std::size_t i = 0; i < k; ++i) stack.at(k, i) = num[i];
    IntMat h = hnf(stack);
    if (h.rows() != k) throw std::logic_error("log lattice: refine rank");
    Real rq(q);
    std::vector<std::vector<Real>> next(k, std::vector<Real>(dim_, Real(0)));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        if (h.at(i, j) == 0) continue;
        Real coef = to_real(h.at(i, j)) / rq;
        for (std::size_t t = 0; t < dim_; ++t)
          next[i][t] += coef * basis_[j][t];
      }
    basis_ = std::move(next);
  }

  std::size_t dim_;
  unsigned prec_;
  std::vector<std::vector<Real>> basis_;
};

/** From the volume of a rank-r log lattice (rows ln|sigma_k|, zero-sum, in
 * R^{r+1}) to the classical regulator normalization: R = 2^r vol/sqrt(r+1)
 * (complex places carry weight 2; any r x r minor has equal magnitude). */
inline Real log_volume_to_regulator(const Real& vol, std::size_t r) {
  PrecisionGuard guard(96);
  Real t = vol;
  for (std::size_t i = 0; i < r; ++i) t *= 2;
  return t / sqrt(Real(long(r) + 1));
}

/**
 * Multiplicative generators of the cyclotomic units: u_j over the embedding
 * representatives j modulo negation, j != 1. For composite N, 1 - zeta^j is
 * itself a unit, and subfield cyclotomic units are lifted as well; both are
 * needed for the log lattice to reach full rank / small index.
 */
inline std::vector<CycloElement> cyclotomic_unit_generators(
    const Conductor& c) {
  std::vector<CycloElement> gens;
  for (unsigned long k : embedding_representatives(c))
    if (k != 1) gens.push_back(cyclotomic_unit(c, k));
  if (!c.is_prime_power()) {
    CycloElement one = CycloElement::one(c);
    gens.push_back(one - CycloElement::zeta_pow(c, 1));
    for (unsigned long d = 3; d < c.N(); ++d) {
      if (c.N() % d != 0) continue;
      long step = long(c.N() / d);
      bool d_prime_power = Conductor::of(d).is_prime_power();
      if (!d_prime_power)
        gens.push_back(one - CycloElement::zeta_pow(c, step));
      for (unsigned long j = 2; 2 * j < d; ++j) {
        if (std::gcd(j, d) != 1) continue;
        if (d_prime_power) {
          CycloElement u = CycloElement::zero(c);
          for (unsigned long i = 0; i < j; ++i)
            u = u + CycloElement::zeta_pow(c, long(i) * step);
          gens.push_back(u);
        } else {
          gens.push_back(one - CycloElement::zeta_pow(c, long(j) * step));
        }
      }
    }
  }
  return gens;
}

/**
 * h+ R in the classical normalization: volume of the lattice generated by
 * the Log(u_j) (plus composite-N extras), converted by
 * log_volume_to_regulator. Throws on a rank-deficient log set.
 */
inline Real cyclotomic_regulator(const Conductor& c, unsigned precision) {
  std::size_t r = c.n() / 2 - 1;
  if (r == 0) return Real(1);
  for (unsigned prec = precision;; prec *= 2) {
    if (prec > 1u << 16)
      throw std::runtime_error("cyclotomic_regulator: precision runaway");
    try {
      LogLatticeBuilder builder(c.n() / 2, prec);
      for (const auto& u : cyclotomic_unit_generators(c))
        builder.insert(log_embedding(u, prec).entries);
      if (builder.rank() != r)
        throw std::runtime_error(
            "cyclotomic_regulator: degenerate log set (rank " +
            std::to_string(builder.rank()) + " of " + std::to_string(r) +
            ")");
      return log_volume_to_regulator(builder.volume(), r);
    } catch (const PrecisionExhausted&) {
    }
  }
}

struct ClassGroupOptions {
  unsigned long euler_P0 = 50000;
  unsigned precision = 192;
  long A = 2;               // sampling coefficient bound
  unsigned max_h = 2;       // unit-variation perturbation cap
  unsigned workers = 1;
  unsigned long round_budget = 120000;  // per-worker attempts per round
  unsigned max_rounds = 10;
  double lower_tolerance = 0.25;  // accept d V >= (1 - tol) hstar
};

struct ClassGroupResult {
  unsigned long N = 0;
  FactorBase fb;
  std::vector<Relation> relations;  // seeds first, then sampled; all verified
  IntMat hnf_basis;                 // full-rank HNF of the exponent lattice
  std::vector<Int> divisors;        // SNF chain, product = det = h
  Int h;
  Real regulator;  // certified unit-lattice volume, regulator-normalized
  Real hstar;
  Real euler_product;
  unsigned long euler_P0 = 0;
  bool certified = false;
  double margin = 0;  // d V / hstar, in [1 - tol, 1.5) when certified
  std::uint64_t seed = 0;
  unsigned long attempts = 0;
  std::vector<std::string> warnings;
};

namespace detail {

/** Exact unit check for a kernel vector: the norm of prod alpha_i^{k_i},
 * read off the stored smooth factorizations, must have exponent zero at
 * every prime. */
inline bool kernel_vector_is_unit(
    const std::vector<Relation>& rels,
    const std::vector<std::vector<std::pair<Int, unsigned>>>& norm_facs,
    const std::vector<Int>& kvec) {
  std::map<Int, Int> tot;
  for (std::size_t i = 0; i < rels.size(); ++i) {
    if (kvec[i] == 0) continue;
    for (const auto& [p, m] : norm_facs[i]) tot[p] += kvec[i] * long(m);
  }
  for (const auto& [p, e] : tot)
    if (e != 0) return false;
  return true;
}

}  // namespace detail

/**
 * Relation-matrix class group computation with Euler-product certification.
 * The loop: sample verified relations (seeded with cyclotomic units, whose
 * zero exponent rows put Log(units) into every kernel), HNF-accumulate
 * until full rank, then test d V against hstar; on failure double the
 * relation target and continue. V starts from the seeded unit logs and is
 * enriched with kernel combinations of the sampled relations whenever the
 * seeds alone do not certify.
 */
inline ClassGroupResult compute_class_group(const Conductor& c, const Int& B,
                                            std::uint64_t seed,
                                            ClassGroupOptions opts = {}) {
  ClassGroupResult res;
  res.N = c.N();
  res.seed = seed;
  res.fb = FactorBase::build(c, B);
  const std::size_t m = res.fb.size();
  Int bach = bach_bound(c);
  if (B < bach)
    res.warnings.push_back("factor-base bound " + B.get_str() +
                           " is below the Bach bound " + bach.get_str() +
                           "; generation is assumed and checked only "
                           "through the d*V certification");
  EulerEstimate est;
  unsigned prec = opts.precision;
  est = euler_product_estimate(c, opts.euler_P0, prec);
  res.hstar = est.hstar;
  res.euler_product = est.product;
  res.euler_P0 = est.truncated_at;

  // seed relations: cyclotomic units, zero exponent vectors
  std::vector<CycloElement> gens = cyclotomic_unit_generators(c);
  for (const auto& u : gens) {
    if (norm(u) != 1)
      throw std::logic_error("class group: unit seed with norm != 1");
    auto rel = try_relation(u, res.fb);
    if (!rel) throw std::logic_error("class group: unit seed rejected");
    res.relations.push_back(std::move(*rel));
  }
  const std::size_t n_seeds = res.relations.size();

  HnfAccumulator hacc(m);
  RelationAccumulator acc;
  SamplerConfig cfg;
  cfg.A = opts.A;
  cfg.max_h = opts.max_h;
  cfg.workers = opts.workers;
  std::size_t target = m;  // the paper's k, doubled on failure
  std::size_t consumed = 0;
  const std::size_t r = c.n() / 2 - 1;

  auto diagnostics = [&](const char* what) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "class group (N=%lu B=%s): %s after %lu attempts, "
                  "%lu smooth, %zu relations, rank %zu/%zu, observed rate "
                  "%.3g vs heuristic %.3g",
                  c.N(), B.get_str().c_str(), what, acc.attempts, acc.smooth,
                  res.relations.size(), hacc.rank(), m, acc.observed_rate(),
                  heuristic1_rate(acc.mean_log2_norm(), B));
    return std::string(buf);
  };

  for (unsigned round = 0; round < opts.max_rounds; ++round) {
    collect_relations(c, res.fb, target, seed, cfg, acc, opts.round_budget,
                      1000 + 64ULL * round);
    res.attempts = acc.attempts;
    for (; consumed < acc.relations.size(); ++consumed) {
      const Relation& rel = acc.relations[consumed];
      res.relations.push_back(rel);
      std::vector<Int> row(m);
      for (std::size_t j = 0; j < m; ++j) row[j] = rel.exponents[j];
      hacc.insert(std::move(row));
    }
    if (acc.relations.size() < target) {
      if (hacc.full_rank() && round + 1 < opts.max_rounds) {
        // sampling stalled short of the doubled target; fall through and
        // let certification decide before burning the remaining budget
      } else if (!hacc.full_rank()) {
        throw std::runtime_error(diagnostics("relation budget exhausted"));
      }
    }
    if (!hacc.full_rank()) {
      target *= 2;
      continue;
    }
    Int d = hacc.det();

    // V phase at escalating precision
    for (;;) {
      try {
        LogLatticeBuilder builder(c.n() / 2, prec);
        std::vector<LogVector> logs(res.relations.size());
        auto log_of = [&](std::size_t i) -> const LogVector& {
          if (logs[i].entries.empty())
            logs[i] = log_embedding(res.relations[i].generator, prec);
          return logs[i];
        };
        for (std::size_t i = 0; i < n_seeds; ++i)
          builder.insert(log_of(i).entries);

        auto evaluate = [&]() -> std::optional<double> {
          if (builder.rank() != r) return std::nullopt;
          Real V = log_volume_to_regulator(builder.volume(), r);
          PrecisionGuard guard(prec);
          Real ratio = to_real(d) * V / res.hstar;
          res.regulator = V;
          return ratio.convert_to<double>();
        };
        std::optional<double> ratio = evaluate();
        if (!ratio || *ratio >= 1.5) {
          // enrich with kernel units of the sampled relations
          IntMat M(res.relations.size(), m);
          for (std::size_t i = 0; i < res.relations.size(); ++i)
            for (std::size_t j = 0; j < m; ++j)
              M.at(i, j) = res.relations[i].exponents[j];
          std::vector<std::vector<std::pair<Int, unsigned>>> nf(
              res.relations.size());
          for (std::size_t i = 0; i < res.relations.size(); ++i)
            nf[i] = *smooth_factor(norm(res.relations[i].generator),
                                   res.fb.bound);
          std::size_t mrank = 0;
          auto [h_, u_] = hnf_with_transform(M, &mrank);
          for (std::size_t i = mrank; i < M.rows(); ++i) {
            std::vector<Int> kvec(M.rows());
            std::size_t maxbits = 1;
            for (std::size_t j = 0; j < M.rows(); ++j) {
              kvec[j] = u_.at(i, j);
              maxbits = std::max(
                  maxbits, mpz_sizeinbase(kvec[j].get_mpz_t(), 2));
            }
            if (maxbits * 4 > prec) throw PrecisionExhausted("kernel bits");
            if (!detail::kernel_vector_is_unit(res.relations, nf, kvec))
              throw std::logic_error(
                  "class group: kernel vector is not a unit");
            std::vector<Real> lv(c.n() / 2, Real(0));
            {
              PrecisionGuard guard(prec);
              for (std::size_t j = 0; j < M.rows(); ++j) {
                if (kvec[j] == 0) continue;
                Real f = to_real(kvec[j]);
                const LogVector& L = log_of(j);
                for (std::size_t t = 0; t < lv.size(); ++t)
                  lv[t] += f * L.entries[t];
              }
              Real s = 0;
              for (const auto& e : lv) s += e;
              if (abs(s) > ldexp(Real(1), -int(prec) / 4) * (1 + abs(s)))
                throw std::logic_error(
                    "class group: kernel log has nonzero sum");
            }
            builder.insert(lv);
          }
          ratio = evaluate();
        }
        if (ratio && *ratio < 1.5) {
          if (*ratio < 1.0 - opts.lower_tolerance)
            throw std::logic_error(diagnostics(
                "certification undershoot (d V below the Euler window)"));
          res.margin = *ratio;
          res.certified = true;
        }
        break;
      } catch (const PrecisionExhausted&) {
        prec *= 2;
        if (prec > 1u << 15)
          throw std::runtime_error(diagnostics("precision runaway"));
      }
    }
    if (!res.certified) {
      target *= 2;
      continue;
    }
    res.hnf_basis = hacc.snapshot();
    res.h = d;
    res.divisors = snf_divisors(res.hnf_basis);
    Int check = 1;
    for (const auto& di : res.divisors) check *= di;
    if (check != d)
      throw std::logic_error("class group: SNF/determinant mismatch");
    return res;
  }
  throw std::runtime_error(diagnostics("not certified within max_rounds"));
}

}  // namespace cyclopip
