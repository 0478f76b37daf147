#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "descent.hpp"
#include "latred.hpp"
#include "serialize.hpp"

namespace cyclopip {

/**
 * Lazy product over a store's generator table: prod base[i]^{e_i} held as
 * (index, exponent) references plus a cached log vector and cached residues
 * at the store's split primes. Nothing is expanded unless asked to.
 */
struct ProductForm {
  std::vector<std::pair<std::size_t, long>> terms;
  LogVector log;
  std::vector<unsigned long> residues;
};

/** One row of the stored HNF: exponents over the factor base plus a
 * generator of the corresponding principal ideal in product form. */
struct StoreRow {
  std::vector<long> hrow;
  ProductForm beta;
};

struct PrecompOptions {
  Int essential_bound = 0;     // 0: 12 ln^2 |Delta| (the generation bound)
  unsigned capacity_bits = 160;  // min bits of prod of split-prime norms
  std::size_t min_splits = 3;
  unsigned precision = 192;
  unsigned long expand_check = 20000;  // build-time exact-verification budget
  ClassGroupOptions cg;
};

/**
 * Persisted batch precomputation. The factor base is sorted by norm, so the
 * primes of norm <= essential_bound form the prefix [0, essential). The HNF
 * H of the relation lattice is then block triangular,
 *
 *     H = ( H1  0 )
 *         ( H2  I )
 *
 * with H1 on the essential columns: every non-essential prime is directly a
 * product of essential primes times a stored generator. Each row i carries
 * beta_i with (beta_i) = prod_j q_j^{H[i][j]}, as a product form over the
 * generator table (relation generators first, cyclotomic units after).
 */
struct PrecompStore {
  unsigned long N = 0;
  Int bound;            // factor-base bound B
  Int essential_bound;  // column split between H1 and the identity block
  std::size_t essential = 0;
  FactorBase fb;
  std::vector<CycloElement> base;
  std::size_t unit_base_start = 0;
  std::vector<StoreRow> rows;
  std::vector<PrimeIdeal> split_primes;  // degree 1, distinct rationals
  Int capacity;                          // prod of split-prime norms
  unsigned precision = 192;
  std::uint64_t seed = 0;
  Int h;
  bool certified = false;
  std::vector<std::string> warnings;
};

namespace detail {

/** r^e mod p with signed e; negative exponents go through the inverse. */
inline unsigned long residue_power(const fppoly::Fp& fp, unsigned long r,
                                   long e) {
  if (e == 0) return 1;
  unsigned long mag = e < 0 ? -static_cast<unsigned long>(e)
                            : static_cast<unsigned long>(e);
  unsigned long b = e < 0 ? fp.inv(r) : r;
  return fp.pow(b, mag);
}

/** Greedy maximal independent subset of the cyclotomic-unit log vectors.
 * Prime-power conductors keep every generator; composite ones can carry
 * dependent extras. Returns (unit index, log) pairs in generator order. */
inline std::vector<std::pair<std::size_t, LogVector>> independent_unit_logs(
    const Conductor& c, unsigned precision) {
  PrecisionGuard guard(precision);
  auto units = cyclotomic_unit_generators(c);
  std::vector<std::pair<std::size_t, LogVector>> out;
  std::vector<std::vector<Real>> ortho;
  Real tol = ldexp(Real(1), -long(precision) / 2);
  for (std::size_t ui = 0; ui < units.size(); ++ui) {
    // Only true units may enter the decode basis: multiplying a generator
    // by anything else would change its ideal.
    if (abs(norm(units[ui])) != 1) continue;
    LogVector lv = log_embedding(units[ui], precision);
    std::vector<Real> w = lv.entries;
    for (const auto& b : ortho) {
      Real num = 0, den = 0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        num += w[k] * b[k];
        den += b[k] * b[k];
      }
      Real mu = num / den;
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= mu * b[k];
    }
    Real n2 = 0;
    for (const auto& x : w) n2 += x * x;
    if (n2 > tol) {
      out.emplace_back(ui, std::move(lv));
      ortho.push_back(std::move(w));
    }
  }
  return out;
}

/** Smallest degree-1 split prime above a rational r = 1 mod N with
 * r > floor_p and r not among `used`; deterministic. */
inline PrimeIdeal next_split_prime(const Conductor& c, unsigned long floor_p,
                                   const std::vector<unsigned long>& used) {
  const unsigned long N = c.N();
  for (unsigned long r = N + 1;; r += N) {
    if (r <= floor_p) continue;
    if (std::find(used.begin(), used.end(), r) != used.end()) continue;
    Int rz(r);
    if (mpz_probab_prime_p(rz.get_mpz_t(), 40) == 0) continue;
    auto above = primes_above(c, r, 0);
    if (above.empty() || above.front().f != 1)
      throw std::logic_error("next_split_prime: 1 mod N prime not split");
    return above.front();
  }
}

inline void expect(std::istream& in, const char* key) {
  std::string t = ser::next_token(in, key);
  if (t != key)
    throw FormatError(std::string("store: expected '") + key + "', got '" + t +
                      "'");
}

}  // namespace detail

/** Residues of prod base[t]^{e_t} at every split prime, recomputed from
 * scratch. Throws if some base element vanishes at a split prime. */
inline std::vector<unsigned long> residues_of(
    const PrecompStore& st,
    const std::vector<std::pair<std::size_t, long>>& terms) {
  std::vector<unsigned long> out(st.split_primes.size());
  for (std::size_t j = 0; j < st.split_primes.size(); ++j) {
    const PrimeIdeal& sp = st.split_primes[j];
    fppoly::Fp fp{sp.p};
    unsigned long acc = 1;
    for (const auto& [t, e] : terms) {
      unsigned long r = residue(st.base.at(t), sp);
      if (r == 0)
        throw std::logic_error("residues_of: base element vanishes mod split prime over " +
                               std::to_string(sp.p));
      acc = fp.mul(acc, detail::residue_power(fp, r, e));
    }
    out[j] = acc;
  }
  return out;
}

/** Log vector of prod base[t]^{e_t}, recomputed at the store precision. */
inline LogVector log_of(const PrecompStore& st,
                        const std::vector<std::pair<std::size_t, long>>& terms) {
  PrecisionGuard guard(st.precision);
  Conductor c = Conductor::of(st.N);
  LogVector out;
  out.precision = st.precision;
  out.entries.assign(c.n() / 2, Real(0));
  for (const auto& [t, e] : terms) {
    LogVector lt = log_embedding(st.base.at(t), st.precision);
    for (std::size_t k = 0; k < out.entries.size(); ++k)
      out.entries[k] += Real(e) * lt.entries[k];
  }
  return out;
}

/** Normalized product form: terms merged by index, zeros dropped, caches
 * filled. The canonical way to build a ProductForm against a store. */
inline ProductForm make_product_form(
    const PrecompStore& st,
    const std::vector<std::pair<std::size_t, long>>& terms) {
  std::map<std::size_t, long> acc;
  for (const auto& [t, e] : terms) {
    if (t >= st.base.size())
      throw std::invalid_argument("product form: base index out of range");
    long& slot = acc[t];
    if (__builtin_add_overflow(slot, e, &slot))
      throw std::overflow_error("product form: exponent overflow");
  }
  ProductForm pf;
  for (const auto& [t, e] : acc)
    if (e != 0) pf.terms.emplace_back(t, e);
  pf.log = log_of(st, pf.terms);
  pf.residues = residues_of(st, pf.terms);
  return pf;
}

/** Product of store rows with multiplicities, as one product form. */
inline ProductForm combine_rows(
    const PrecompStore& st,
    const std::vector<std::pair<std::size_t, long>>& parts) {
  std::vector<std::pair<std::size_t, long>> terms;
  for (const auto& [ri, k] : parts) {
    if (ri >= st.rows.size())
      throw std::invalid_argument("combine_rows: row index out of range");
    for (const auto& [t, e] : st.rows[ri].beta.terms) {
      long prod = 0;
      if (__builtin_mul_overflow(e, k, &prod))
        throw std::overflow_error("combine_rows: exponent overflow");
      terms.emplace_back(t, prod);
    }
  }
  return make_product_form(st, terms);
}

namespace detail {

/** Expand terms over an explicit base into a fraction (P, Q). */
inline std::pair<CycloElement, CycloElement> expand_terms(
    const Conductor& c, const std::vector<CycloElement>& base,
    const std::vector<std::pair<std::size_t, long>>& terms,
    unsigned long budget) {
  unsigned long weight = 0;
  for (const auto& [t, e] : terms)
    weight += e < 0 ? -static_cast<unsigned long>(e)
                    : static_cast<unsigned long>(e);
  if (weight > budget)
    throw std::runtime_error("expand_parts: exponent weight " +
                             std::to_string(weight) + " exceeds budget " +
                             std::to_string(budget));
  CycloElement P = CycloElement::one(c), Q = CycloElement::one(c);
  for (const auto& [t, e] : terms) {
    unsigned long mag = e < 0 ? -static_cast<unsigned long>(e)
                              : static_cast<unsigned long>(e);
    for (unsigned long i = 0; i < mag; ++i) {
      if (e > 0)
        P = P * base.at(t);
      else
        Q = Q * base.at(t);
    }
  }
  return {P, Q};
}

}  // namespace detail

/** Expanded value as a fraction (P, Q) with pf = P / Q, both products of
 * base elements. Cost grows with the total exponent weight, hence budget. */
inline std::pair<CycloElement, CycloElement> expand_parts(
    const PrecompStore& st, const ProductForm& pf,
    unsigned long budget = 20000) {
  return detail::expand_terms(Conductor::of(st.N), st.base, pf.terms, budget);
}

/** H as a matrix (rows of the store stacked). */
inline IntMat store_hnf(const PrecompStore& st) {
  const std::size_t m = st.rows.size();
  IntMat h(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m && j < st.rows[i].hrow.size(); ++j)
      h.at(i, j) = st.rows[i].hrow[j];
  return h;
}

/** Structural invariants only: shapes, ordering, the block split, reduced
 * triangular H, split-prime sanity. Returns failures; empty means ok. */
inline std::vector<std::string> store_structural_errors(
    const PrecompStore& st) {
  std::vector<std::string> errs;
  const std::size_t m = st.fb.size();
  Conductor c = Conductor::of(st.N);
  if (st.bound < 2) errs.push_back("factor-base bound < 2");
  if (st.essential_bound < 2) errs.push_back("essential bound < 2");
  if (st.rows.size() != m) errs.push_back("row count != factor-base size");
  if (st.essential > m) errs.push_back("essential split out of range");
  if (st.essential == 0) errs.push_back("no essential primes");
  if (st.base.empty()) errs.push_back("empty generator table");
  if (st.unit_base_start > st.base.size())
    errs.push_back("unit table start out of range");
  for (std::size_t i = 0; i + 1 < m; ++i)
    if (st.fb.primes[i + 1] < st.fb.primes[i]) {
      errs.push_back("factor base not sorted");
      break;
    }
  for (const auto& q : st.fb.primes)
    if (q.N != st.N) {
      errs.push_back("factor-base prime conductor mismatch");
      break;
    }
  for (std::size_t i = 0; i < m; ++i) {
    bool ess = st.fb.primes[i].norm() <= st.essential_bound;
    if (ess != (i < st.essential)) {
      errs.push_back("essential prefix does not match the norm bound");
      break;
    }
  }
  for (std::size_t i = 0; i < st.rows.size() && i < m; ++i) {
    const auto& row = st.rows[i];
    if (row.hrow.size() != m) {
      errs.push_back("row " + std::to_string(i) + ": bad H row length");
      continue;
    }
    for (std::size_t j = 0; j < m; ++j) {
      long v = row.hrow[j];
      if (j > i && v != 0)
        errs.push_back("row " + std::to_string(i) + ": not lower triangular");
      if (v < 0) errs.push_back("row " + std::to_string(i) + ": negative entry");
      if (j < i && st.rows[j].hrow.size() == m && v >= st.rows[j].hrow[j])
        errs.push_back("row " + std::to_string(i) + ": entry not reduced");
    }
    if (row.hrow[i] < 1)
      errs.push_back("row " + std::to_string(i) + ": nonpositive pivot");
    if (i >= st.essential) {
      if (row.hrow[i] != 1)
        errs.push_back("row " + std::to_string(i) +
                       ": identity block pivot != 1");
      for (std::size_t j = st.essential; j < i; ++j)
        if (row.hrow[j] != 0)
          errs.push_back("row " + std::to_string(i) +
                         ": identity block off-diagonal entry");
    }
    if (row.beta.residues.size() != st.split_primes.size())
      errs.push_back("row " + std::to_string(i) + ": residue cache length");
    if (row.beta.log.entries.size() != c.n() / 2)
      errs.push_back("row " + std::to_string(i) + ": log vector length");
    for (const auto& [t, e] : row.beta.terms) {
      if (t >= st.base.size())
        errs.push_back("row " + std::to_string(i) + ": term index range");
      if (e == 0)
        errs.push_back("row " + std::to_string(i) + ": zero exponent kept");
    }
  }
  Int cap = 1;
  std::vector<unsigned long> ps;
  for (const auto& sp : st.split_primes) {
    if (sp.f != 1) errs.push_back("split prime not degree 1");
    if (sp.N != st.N) errs.push_back("split prime conductor mismatch");
    if (std::find(ps.begin(), ps.end(), sp.p) != ps.end())
      errs.push_back("split primes share a rational prime");
    ps.push_back(sp.p);
    cap *= sp.norm();
  }
  if (cap != st.capacity) errs.push_back("capacity != product of split norms");
  return errs;
}

/**
 * Deep verification: structure, then per row the cached residues and logs
 * recomputed from the term list, and, within the expansion budget, the exact
 * ideal identity (beta_i) = prod_j q_j^{H[i][j]}. Empty result means ok.
 */
inline std::vector<std::string> verify_store(const PrecompStore& st,
                                             unsigned long expand_budget =
                                                 20000) {
  auto errs = store_structural_errors(st);
  if (!errs.empty()) return errs;
  Conductor c = Conductor::of(st.N);
  PrecisionGuard guard(st.precision);
  Real tol = ldexp(Real(1), -long(st.precision) / 2);
  for (std::size_t i = 0; i < st.rows.size(); ++i) {
    const auto& row = st.rows[i];
    try {
      auto res = residues_of(st, row.beta.terms);
      if (res != row.beta.residues)
        errs.push_back("row " + std::to_string(i) + ": residue cache stale");
      LogVector lg = log_of(st, row.beta.terms);
      for (std::size_t k = 0; k < lg.entries.size(); ++k)
        if (abs(lg.entries[k] - row.beta.log.entries[k]) > tol) {
          errs.push_back("row " + std::to_string(i) + ": log cache stale");
          break;
        }
      unsigned long weight = 0;
      for (const auto& [t, e] : row.beta.terms)
        weight += e < 0 ? -static_cast<unsigned long>(e)
                        : static_cast<unsigned long>(e);
      if (weight <= expand_budget) {
        auto [p, q] = expand_parts(st, row.beta, expand_budget);
        std::vector<std::pair<PrimeIdeal, long>> f;
        for (std::size_t j = 0; j < row.hrow.size(); ++j)
          if (row.hrow[j] != 0) f.emplace_back(st.fb.primes[j], row.hrow[j]);
        Ideal lhs = ideal_from_generator(p);
        Ideal rhs = ideal_mul(detail::prime_power_product(c, f),
                              ideal_from_generator(q));
        if (!(lhs == rhs))
          errs.push_back("row " + std::to_string(i) +
                         ": generator does not match its H row");
      }
    } catch (const std::exception& e) {
      errs.push_back("row " + std::to_string(i) + ": " + e.what());
    }
  }
  return errs;
}

/**
 * Batch precomputation: certified class group at bound B, canonical HNF with
 * transform, per-row generators in product form with residues at degree-1
 * split primes and size-reduced log vectors (nearest-plane against the
 * cyclotomic-unit log lattice).
 *
 * `split_primes` seeds the split-prime list; primes at which some generator
 * vanishes are replaced (with a warning), and the list is extended until
 * prod N(p_j) reaches 2^capacity_bits. Throws when the class group cannot be
 * certified, when relations fail to reach full rank, or when the essential
 * primes do not generate the class group at the configured bound.
 */
inline PrecompStore precompute(const Conductor& c, const Int& B,
                               std::vector<PrimeIdeal> split_primes,
                               std::uint64_t seed,
                               const PrecompOptions& opts = {}) {
  PrecisionGuard guard(opts.precision);
  auto cg = compute_class_group(c, B, seed, opts.cg);

  PrecompStore st;
  st.N = c.N();
  st.bound = B;
  st.essential_bound =
      opts.essential_bound > 0 ? opts.essential_bound : bach_bound(c);
  st.fb = cg.fb;
  st.precision = opts.precision;
  st.seed = seed;
  st.h = cg.h;
  st.certified = cg.certified;
  st.warnings = cg.warnings;
  const std::size_t m = st.fb.size();
  while (st.essential < m &&
         st.fb.primes[st.essential].norm() <= st.essential_bound)
    ++st.essential;
  if (st.essential == 0)
    throw std::invalid_argument(
        "precompute: essential bound excludes every factor-base prime");

  const std::size_t nrel = cg.relations.size();
  st.base.reserve(nrel);
  for (const auto& r : cg.relations) st.base.push_back(r.generator);
  st.unit_base_start = nrel;
  for (const auto& u : cyclotomic_unit_generators(c)) st.base.push_back(u);

  IntMat M(nrel, m);
  for (std::size_t i = 0; i < nrel; ++i)
    for (std::size_t j = 0; j < m; ++j)
      M.at(i, j) = cg.relations[i].exponents[j];
  std::size_t rk = 0;
  auto [H, U] = hnf_with_transform(M, &rk);
  if (rk != m)
    throw std::runtime_error("precompute: relations do not reach full rank");
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (H.at(i, j) != cg.hnf_basis.at(i, j))
        throw std::logic_error(
            "precompute: transform HNF disagrees with the accumulated basis");
  for (std::size_t i = st.essential; i < m; ++i)
    if (H.at(i, i) != 1)
      throw std::runtime_error(
          "precompute: primes of norm <= " + st.essential_bound.get_str() +
          " do not generate the class group (pivot " + H.at(i, i).get_str() +
          " at norm " + st.fb.primes[i].norm().get_str() +
          "); raise the essential bound");

  // Split primes: validate the seeds, replace colliding ones, extend until
  // the capacity target. Auto candidates sit above max(B, N), where no
  // factor-base-smooth generator and no unit can vanish.
  auto collides = [&](const PrimeIdeal& q) {
    for (const auto& b : st.base)
      if (residue(b, q) == 0) return true;
    return false;
  };
  if (!B.fits_ulong_p())
    throw std::invalid_argument("precompute: bound out of range");
  unsigned long floor_p = std::max(B.get_ui(), c.N());
  std::vector<unsigned long> used;
  auto fresh_split = [&]() {
    for (;;) {
      PrimeIdeal q = detail::next_split_prime(c, floor_p, used);
      floor_p = q.p;
      if (!collides(q)) return q;
      st.warnings.push_back("split prime over " + std::to_string(q.p) +
                            " skipped: residue collision");
    }
  };
  for (auto& q : split_primes) {
    if (q.N != c.N())
      throw std::invalid_argument("precompute: split prime conductor mismatch");
    if (q.f != 1)
      throw std::invalid_argument("precompute: split primes must be degree 1");
    if (std::find(used.begin(), used.end(), q.p) != used.end())
      throw std::invalid_argument(
          "precompute: split primes must lie over distinct rationals");
    if (collides(q)) {
      st.warnings.push_back("split prime over " + std::to_string(q.p) +
                            " replaced: residue collision");
      q = fresh_split();
    }
    used.push_back(q.p);
  }
  Int cap_target = Int(1) << opts.capacity_bits;
  st.capacity = 1;
  for (const auto& q : split_primes) st.capacity *= q.norm();
  while (split_primes.size() < opts.min_splits || st.capacity < cap_target) {
    PrimeIdeal q = fresh_split();
    used.push_back(q.p);
    st.capacity *= q.norm();
    split_primes.push_back(q);
  }
  st.split_primes = std::move(split_primes);

  auto ulogs = detail::independent_unit_logs(c, opts.precision);
  std::vector<std::vector<Real>> ubasis;
  ubasis.reserve(ulogs.size());
  for (const auto& [ui, lv] : ulogs) ubasis.push_back(lv.entries);

  st.rows.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    StoreRow row;
    row.hrow.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      if (!H.at(i, j).fits_slong_p())
        throw std::runtime_error("precompute: H entry exceeds long range");
      row.hrow[j] = H.at(i, j).get_si();
    }
    std::vector<std::pair<std::size_t, long>> terms;
    for (std::size_t t = 0; t < nrel; ++t) {
      if (U.at(i, t) == 0) continue;
      if (!U.at(i, t).fits_slong_p())
        throw std::runtime_error("precompute: transform entry exceeds long");
      terms.emplace_back(t, U.at(i, t).get_si());
    }
    ProductForm pf = make_product_form(st, terms);
    if (!ubasis.empty()) {
      auto x = babai_nearest_plane(ubasis, pf.log.entries);
      bool any = false;
      for (const auto& xi : x)
        if (xi != 0) any = true;
      if (any) {
        auto adjusted = pf.terms;
        for (std::size_t k = 0; k < x.size(); ++k) {
          if (x[k] == 0) continue;
          if (!x[k].fits_slong_p())
            throw std::runtime_error("precompute: unit decode out of range");
          adjusted.emplace_back(st.unit_base_start + ulogs[k].first,
                                -x[k].get_si());
        }
        pf = make_product_form(st, adjusted);
      }
    }
    row.beta = std::move(pf);
    st.rows.push_back(std::move(row));
  }

  auto errs = verify_store(st, opts.expand_check);
  if (!errs.empty())
    throw std::logic_error("precompute: store verification failed: " +
                           errs.front());
  return st;
}

/** Exponents over the essential prefix plus store-row references. */
struct RewriteResult {
  std::vector<long> exps;  // over fb[0, essential)
  std::vector<std::pair<std::size_t, long>> rows_used;  // (row, multiplicity)
};

/**
 * Rewrites a prime-exponent decomposition so that it is supported only on
 * the essential primes. Identity-block rows are subtracted, so as ideals
 *
 *   prod q^{in} = prod_{j < essential} q_j^{out.exps[j]}
 *                 * prod (beta_row)^{mult} over out.rows_used,
 *
 * an exact equality, not only one of classes. Membership of the applied
 * change in the relation lattice is re-checked via solve_left.
 */
inline RewriteResult rewrite_to_small(
    const std::vector<std::pair<PrimeIdeal, long>>& decomp,
    const PrecompStore& st) {
  const std::size_t m = st.fb.size();
  if (st.rows.size() != m)
    throw std::invalid_argument("rewrite_to_small: malformed store");
  std::vector<Int> y(m, Int(0));
  for (const auto& [q, e] : decomp) {
    auto idx = st.fb.index_of(q);
    if (!idx)
      throw std::invalid_argument(
          "rewrite_to_small: prime of norm " + q.norm().get_str() +
          " not in the store factor base");
    y[*idx] += e;
  }
  const std::vector<Int> y0 = y;
  RewriteResult out;
  for (std::size_t j = m; j-- > st.essential;) {
    if (y[j] == 0) continue;
    Int k = y[j];
    for (std::size_t i = 0; i < m; ++i) y[i] -= k * Int(st.rows[j].hrow[i]);
    if (y[j] != 0)
      throw std::logic_error("rewrite_to_small: identity-block pivot not 1");
    if (!k.fits_slong_p())
      throw std::runtime_error("rewrite_to_small: multiplicity out of range");
    out.rows_used.emplace_back(j, k.get_si());
  }
  for (std::size_t j = st.essential; j < m; ++j)
    if (y[j] != 0)
      throw std::logic_error("rewrite_to_small: residual non-essential support");
  std::vector<Int> delta(m);
  for (std::size_t i = 0; i < m; ++i) delta[i] = y0[i] - y[i];
  if (!solve_left(store_hnf(st), delta))
    throw std::logic_error("rewrite_to_small: class equality lost");
  out.exps.resize(st.essential);
  for (std::size_t j = 0; j < st.essential; ++j) {
    if (!y[j].fits_slong_p())
      throw std::runtime_error("rewrite_to_small: exponent out of range");
    out.exps[j] = y[j].get_si();
  }
  return out;
}

inline RewriteResult rewrite_to_small(const Decomposition& d,
                                      const PrecompStore& st) {
  std::vector<std::pair<PrimeIdeal, long>> v;
  v.reserve(d.primes.size());
  for (std::size_t i = 0; i < d.primes.size(); ++i)
    v.emplace_back(d.primes[i], d.exps[i]);
  return rewrite_to_small(v, st);
}

inline std::string store_serialize_payload(const PrecompStore& st) {
  std::ostringstream out;
  out << "N " << st.N << '\n';
  out << "bound " << st.bound.get_str() << '\n';
  out << "essential-bound " << st.essential_bound.get_str() << '\n';
  out << "essential " << st.essential << '\n';
  out << "precision " << st.precision << '\n';
  out << "seed " << st.seed << '\n';
  out << "h " << st.h.get_str() << '\n';
  out << "certified " << (st.certified ? 1 : 0) << '\n';
  out << "fb " << st.fb.size() << ' ' << st.fb.bound.get_str() << '\n';
  for (const auto& q : st.fb.primes) ser::put_prime(out, q);
  out << "base " << st.base.size() << ' ' << st.unit_base_start << '\n';
  for (const auto& b : st.base) ser::put_element(out, b);
  out << "splits " << st.split_primes.size() << '\n';
  for (const auto& q : st.split_primes) ser::put_prime(out, q);
  out << "capacity " << st.capacity.get_str() << '\n';
  out << "rows " << st.rows.size() << '\n';
  for (const auto& row : st.rows) {
    out << "hrow";
    for (long e : row.hrow) out << ' ' << e;
    out << '\n';
    out << "terms " << row.beta.terms.size();
    for (const auto& [t, e] : row.beta.terms) out << ' ' << t << ' ' << e;
    out << '\n';
    out << "residues";
    for (unsigned long r : row.beta.residues) out << ' ' << r;
    out << '\n';
    out << "log " << row.beta.log.precision;
    for (const auto& e : row.beta.log.entries)
      out << ' ' << ser::real_to_hex(e);
    out << '\n';
  }
  out << "warnings " << st.warnings.size() << '\n';
  for (const auto& w : st.warnings) out << w << '\n';
  out << "end\n";
  return out.str();
}

/** Versioned, checksummed textual container. */
inline void store_save(std::ostream& out, const PrecompStore& st) {
  std::string payload = store_serialize_payload(st);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(ser::fnv1a(payload)));
  out << "cyclopip-precomp v1\nchecksum " << buf << '\n' << payload;
}

/** Loads and structurally re-validates a store. Any header, checksum, or
 * shape problem raises FormatError; a truncated file never half-loads. */
inline PrecompStore store_load(std::istream& in) {
  std::string header;
  std::getline(in, header);
  if (header != "cyclopip-precomp v1")
    throw FormatError("store: bad or unsupported header");
  detail::expect(in, "checksum");
  std::string hex = ser::next_token(in, "checksum value");
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  std::string payload((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  unsigned long long want = 0;
  try {
    want = std::stoull(hex, nullptr, 16);
  } catch (const std::exception&) {
    throw FormatError("store: malformed checksum");
  }
  if (ser::fnv1a(payload) != want)
    throw FormatError("store: checksum mismatch (corrupt or truncated file)");

  std::istringstream ps(payload);
  PrecompStore st;
  detail::expect(ps, "N");
  st.N = ser::get_ulong(ps, "N");
  Conductor c = [&] {
    try {
      return Conductor::of(st.N);
    } catch (const std::exception& e) {
      throw FormatError(std::string("store: bad conductor: ") + e.what());
    }
  }();
  detail::expect(ps, "bound");
  st.bound = ser::get_int(ps, "bound");
  detail::expect(ps, "essential-bound");
  st.essential_bound = ser::get_int(ps, "essential-bound");
  detail::expect(ps, "essential");
  st.essential = ser::get_size(ps, "essential");
  detail::expect(ps, "precision");
  st.precision = unsigned(ser::get_ulong(ps, "precision"));
  detail::expect(ps, "seed");
  st.seed = ser::get_ulong(ps, "seed");
  detail::expect(ps, "h");
  st.h = ser::get_int(ps, "h");
  detail::expect(ps, "certified");
  st.certified = ser::get_ulong(ps, "certified") != 0;
  detail::expect(ps, "fb");
  std::size_t m = ser::get_size(ps, "fb size");
  if (m == 0 || m > 100000) throw FormatError("store: implausible fb size");
  st.fb.bound = ser::get_int(ps, "fb bound");
  st.fb.primes.reserve(m);
  for (std::size_t i = 0; i < m; ++i) st.fb.primes.push_back(ser::get_prime(ps));
  detail::expect(ps, "base");
  std::size_t nb = ser::get_size(ps, "base size");
  if (nb == 0 || nb > 1000000) throw FormatError("store: implausible base size");
  st.unit_base_start = ser::get_size(ps, "unit start");
  st.base.reserve(nb);
  for (std::size_t i = 0; i < nb; ++i)
    st.base.push_back(ser::get_element(ps, c));
  detail::expect(ps, "splits");
  std::size_t ns = ser::get_size(ps, "split count");
  if (ns > 10000) throw FormatError("store: implausible split count");
  for (std::size_t i = 0; i < ns; ++i)
    st.split_primes.push_back(ser::get_prime(ps));
  detail::expect(ps, "capacity");
  st.capacity = ser::get_int(ps, "capacity");
  detail::expect(ps, "rows");
  std::size_t nr = ser::get_size(ps, "row count");
  if (nr != m) throw FormatError("store: row count != fb size");
  st.rows.reserve(nr);
  for (std::size_t i = 0; i < nr; ++i) {
    StoreRow row;
    detail::expect(ps, "hrow");
    row.hrow.resize(m);
    for (auto& e : row.hrow) e = ser::get_long(ps, "hrow entry");
    detail::expect(ps, "terms");
    std::size_t nt = ser::get_size(ps, "term count");
    if (nt > nb) throw FormatError("store: implausible term count");
    row.beta.terms.reserve(nt);
    for (std::size_t k = 0; k < nt; ++k) {
      std::size_t t = ser::get_size(ps, "term index");
      long e = ser::get_long(ps, "term exponent");
      row.beta.terms.emplace_back(t, e);
    }
    detail::expect(ps, "residues");
    row.beta.residues.resize(ns);
    for (auto& r : row.beta.residues) r = ser::get_ulong(ps, "residue");
    detail::expect(ps, "log");
    row.beta.log.precision = unsigned(ser::get_ulong(ps, "log precision"));
    row.beta.log.entries.resize(c.n() / 2);
    for (auto& e : row.beta.log.entries)
      e = ser::get_real(ps, row.beta.log.precision, "log entry");
    st.rows.push_back(std::move(row));
  }
  detail::expect(ps, "warnings");
  std::size_t nw = ser::get_size(ps, "warning count");
  if (nw > 100000) throw FormatError("store: implausible warning count");
  ps.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  for (std::size_t i = 0; i < nw; ++i) {
    std::string w;
    if (!std::getline(ps, w)) throw FormatError("store: truncated warnings");
    st.warnings.push_back(std::move(w));
  }
  detail::expect(ps, "end");
  auto errs = store_structural_errors(st);
  if (!errs.empty()) throw FormatError("store: " + errs.front());
  return st;
}

inline void store_save_file(const std::string& path, const PrecompStore& st) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("store: cannot open for writing: " + path);
  store_save(f, st);
  f.flush();
  if (!f) throw std::runtime_error("store: write failed: " + path);
}

inline PrecompStore store_load_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("store: cannot open: " + path);
  return store_load(f);
}

}  // namespace cyclopip
