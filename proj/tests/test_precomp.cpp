#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cyclopip/precomp.hpp"

using namespace cyclopip;

namespace {

const PrecompStore& store8() {
  static PrecompStore st = precompute(Conductor::of(8), 50, {}, 42);
  return st;
}

// Split essential bound: nine primes of norm <= 20 stay essential, the four
// norm-49 primes land in the identity block.
const PrecompStore& store16() {
  static PrecompStore st = [] {
    PrecompOptions o;
    o.essential_bound = 20;
    return precompute(Conductor::of(16), 50, {}, 42, o);
  }();
  return st;
}

}  // namespace

TEST_CASE("product forms cache residues and logs homomorphically",
          "[precomp]") {
  const PrecompStore& st = store8();
  Conductor c = Conductor::of(8);
  REQUIRE(st.base.size() >= 2);

  SECTION("single reference expands to the base element") {
    ProductForm pf = make_product_form(st, {{0, 1}});
    REQUIRE(pf.terms.size() == 1);
    auto [p, q] = expand_parts(st, pf);
    CHECK(p == st.base[0]);
    CHECK(q == CycloElement::one(c));
    for (std::size_t j = 0; j < st.split_primes.size(); ++j)
      CHECK(pf.residues[j] == residue(st.base[0], st.split_primes[j]));
    LogVector direct = log_embedding(st.base[0], st.precision);
    PrecisionGuard guard(st.precision);
    Real tol = ldexp(Real(1), -90);
    for (std::size_t k = 0; k < direct.entries.size(); ++k)
      CHECK(abs(pf.log.entries[k] - direct.entries[k]) < tol);
  }

  SECTION("terms merge and signed exponents go through inverses") {
    ProductForm pf = make_product_form(st, {{0, 2}, {1, -1}, {0, -1}});
    REQUIRE(pf.terms.size() == 2);
    CHECK(pf.terms[0] == std::pair<std::size_t, long>{0, 1});
    CHECK(pf.terms[1] == std::pair<std::size_t, long>{1, -1});
    auto [p, q] = expand_parts(st, pf);
    CHECK(p == st.base[0]);
    CHECK(q == st.base[1]);
    // homomorphism oracle: residue(P) = residue(Q) * cached residue mod p
    for (std::size_t j = 0; j < st.split_primes.size(); ++j) {
      const PrimeIdeal& sp = st.split_primes[j];
      fppoly::Fp fp{sp.p};
      CHECK(residue(p, sp) == fp.mul(residue(q, sp), pf.residues[j]));
    }
    PrecisionGuard guard(st.precision);
    LogVector l0 = log_embedding(st.base[0], st.precision);
    LogVector l1 = log_embedding(st.base[1], st.precision);
    Real tol = ldexp(Real(1), -90);
    for (std::size_t k = 0; k < l0.entries.size(); ++k)
      CHECK(abs(pf.log.entries[k] - (l0.entries[k] - l1.entries[k])) < tol);
  }

  SECTION("cancelling terms leave the empty product") {
    ProductForm pf = make_product_form(st, {{3, 2}, {3, -2}});
    CHECK(pf.terms.empty());
    for (unsigned long r : pf.residues) CHECK(r == 1);
    auto [p, q] = expand_parts(st, pf);
    CHECK(p == CycloElement::one(c));
    CHECK(q == CycloElement::one(c));
  }

  SECTION("bad index and budget violations are rejected") {
    CHECK_THROWS_AS(make_product_form(st, {{st.base.size(), 1}}),
                    std::invalid_argument);
    ProductForm pf = make_product_form(st, {{0, 40}});
    CHECK_THROWS_AS(expand_parts(st, pf, 39), std::runtime_error);
  }

  SECTION("combine_rows matches direct construction") {
    REQUIRE(st.rows.size() >= 2);
    ProductForm pf = combine_rows(st, {{0, 1}, {1, 2}});
    std::vector<std::pair<std::size_t, long>> terms = st.rows[0].beta.terms;
    for (const auto& [t, e] : st.rows[1].beta.terms)
      terms.emplace_back(t, 2 * e);
    ProductForm direct = make_product_form(st, terms);
    CHECK(pf.terms == direct.terms);
    CHECK(pf.residues == direct.residues);
    CHECK_THROWS_AS(combine_rows(st, {{st.rows.size(), 1}}),
                    std::invalid_argument);
  }
}

TEST_CASE("precompute builds a deeply verified store", "[precomp]") {
  const PrecompStore& st = store8();
  Conductor c = Conductor::of(8);

  CHECK(st.N == 8);
  CHECK(st.h == 1);
  CHECK(st.certified);
  // 2; four over each of 17, 41; two each of norms 9, 25, 49
  REQUIRE(st.fb.size() == 15);
  CHECK(st.essential == 15);  // bound 50 sits below the generation bound
  CHECK(st.rows.size() == 15);
  CHECK(verify_store(st).empty());

  SECTION("h = 1 collapses H to the identity") {
    for (std::size_t i = 0; i < st.rows.size(); ++i)
      for (std::size_t j = 0; j < st.rows[i].hrow.size(); ++j)
        CHECK(st.rows[i].hrow[j] == (i == j ? 1 : 0));
  }

  SECTION("row generators exactly generate their primes") {
    for (std::size_t i : {std::size_t(0), st.rows.size() - 1}) {
      auto [p, q] = expand_parts(st, st.rows[i].beta);
      Ideal lhs = ideal_from_generator(p);
      Ideal rhs = ideal_mul(prime_to_ideal(c, st.fb.primes[i]),
                            ideal_from_generator(q));
      CHECK(lhs == rhs);
    }
  }

  SECTION("rows are size-reduced fixed points of the unit decoder") {
    auto ulogs = detail::independent_unit_logs(c, st.precision);
    REQUIRE(ulogs.size() == c.n() / 2 - 1);
    std::vector<std::vector<Real>> ubasis;
    for (const auto& [ui, lv] : ulogs) ubasis.push_back(lv.entries);
    for (const auto& row : st.rows) {
      auto x = babai_nearest_plane(ubasis, row.beta.log.entries);
      for (const auto& xi : x) CHECK(xi == 0);
    }
  }

  SECTION("generator table ends with the cyclotomic units") {
    auto units = cyclotomic_unit_generators(c);
    REQUIRE(st.base.size() == st.unit_base_start + units.size());
    for (std::size_t k = 0; k < units.size(); ++k)
      CHECK(st.base[st.unit_base_start + k] == units[k]);
  }

  SECTION("split primes are plentiful, split, and collision-free") {
    CHECK(st.split_primes.size() >= 3);
    CHECK(st.capacity >= Int(1) << 160);
    Int cap = 1;
    for (const auto& sp : st.split_primes) {
      CHECK(sp.f == 1);
      CHECK(sp.p % 8 == 1);
      CHECK(sp.p > 50);
      cap *= sp.norm();
      for (const auto& b : st.base) CHECK(residue(b, sp) != 0);
    }
    CHECK(cap == st.capacity);
  }

  SECTION("same seed reproduces the store byte for byte") {
    PrecompStore again = precompute(Conductor::of(8), 50, {}, 42);
    CHECK(store_serialize_payload(again) == store_serialize_payload(st));
  }
}

TEST_CASE("essential split yields the block-triangular shape", "[precomp]") {
  const PrecompStore& st = store16();
  Conductor c = Conductor::of(16);

  REQUIRE(st.fb.size() == 13);
  REQUIRE(st.essential == 9);
  CHECK(verify_store(st).empty());
  for (std::size_t i = st.essential; i < st.rows.size(); ++i) {
    CHECK(st.rows[i].hrow[i] == 1);
    for (std::size_t j = st.essential; j < i; ++j)
      CHECK(st.rows[i].hrow[j] == 0);
  }
  for (std::size_t i = 0; i < st.essential; ++i)
    for (std::size_t j = st.essential; j < st.fb.size(); ++j)
      CHECK(st.rows[i].hrow[j] == 0);

  SECTION("identity rewrite for already-small decompositions") {
    std::vector<std::pair<PrimeIdeal, long>> dec = {{st.fb.primes[1], 3},
                                                    {st.fb.primes[0], -2}};
    RewriteResult rw = rewrite_to_small(dec, st);
    CHECK(rw.rows_used.empty());
    REQUIRE(rw.exps.size() == st.essential);
    CHECK(rw.exps[0] == -2);
    CHECK(rw.exps[1] == 3);
    for (std::size_t j = 2; j < rw.exps.size(); ++j) CHECK(rw.exps[j] == 0);
  }

  SECTION("a norm-49 prime rewrites onto essential support exactly") {
    const std::size_t j0 = st.essential;  // first identity-block column
    const PrimeIdeal& q49 = st.fb.primes[j0];
    REQUIRE(q49.norm() == 49);
    RewriteResult rw = rewrite_to_small({{q49, 1}}, st);
    REQUIRE(rw.rows_used.size() == 1);
    CHECK(rw.rows_used[0] == std::pair<std::size_t, long>{j0, 1});
    // exact oracle: q49 * (Q) * prod q^{-exps} == (P) for beta_{j0} = P/Q
    auto [p, q] = expand_parts(st, st.rows[j0].beta);
    std::vector<std::pair<PrimeIdeal, long>> neg;
    for (std::size_t i = 0; i < rw.exps.size(); ++i)
      if (rw.exps[i] != 0) {
        REQUIRE(rw.exps[i] <= 0);  // subtracting an HNF row only removes
        neg.emplace_back(st.fb.primes[i], -rw.exps[i]);
      }
    Ideal lhs = ideal_mul(ideal_mul(prime_to_ideal(c, q49),
                                    ideal_from_generator(q)),
                          detail::prime_power_product(c, neg));
    CHECK(lhs == ideal_from_generator(p));
  }

  SECTION("mixed input accumulates multiplicities") {
    const std::size_t j0 = st.essential;
    RewriteResult rw =
        rewrite_to_small({{st.fb.primes[j0], 2}, {st.fb.primes[3], 1}}, st);
    REQUIRE(rw.rows_used.size() == 1);
    CHECK(rw.rows_used[0] == std::pair<std::size_t, long>{j0, 2});
    CHECK(rw.exps[3] >= 1);  // the direct essential exponent survives
  }

  SECTION("the Decomposition overload matches the pair form") {
    Decomposition d;
    d.primes = {st.fb.primes[st.essential], st.fb.primes[2]};
    d.exps = {1, -1};
    RewriteResult a = rewrite_to_small(d, st);
    RewriteResult b = rewrite_to_small(
        {{st.fb.primes[st.essential], 1}, {st.fb.primes[2], -1}}, st);
    CHECK(a.exps == b.exps);
    CHECK(a.rows_used == b.rows_used);
  }

  SECTION("primes outside the store factor base are rejected") {
    auto q97 = primes_above(c, 97, 0);
    REQUIRE(!q97.empty());
    CHECK_THROWS_AS(rewrite_to_small({{q97.front(), 1}}, st),
                    std::invalid_argument);
  }
}

TEST_CASE("stores survive a bit-exact round trip and reject damage",
          "[precomp]") {
  const PrecompStore& st = store16();

  std::ostringstream out;
  store_save(out, st);
  const std::string file = out.str();

  SECTION("round trip is lossless, including the reals") {
    std::istringstream in(file);
    PrecompStore back = store_load(in);
    CHECK(store_serialize_payload(back) == store_serialize_payload(st));
    CHECK(verify_store(back).empty());
    CHECK(back.essential == st.essential);
    CHECK(back.capacity == st.capacity);
    for (std::size_t i = 0; i < st.rows.size(); ++i) {
      CHECK(back.rows[i].hrow == st.rows[i].hrow);
      CHECK(back.rows[i].beta.terms == st.rows[i].beta.terms);
      CHECK(back.rows[i].beta.residues == st.rows[i].beta.residues);
      for (std::size_t k = 0; k < st.rows[i].beta.log.entries.size(); ++k)
        CHECK(back.rows[i].beta.log.entries[k] ==
              st.rows[i].beta.log.entries[k]);
    }
    std::ostringstream out2;
    store_save(out2, back);
    CHECK(out2.str() == file);
  }

  SECTION("a flipped payload byte fails the checksum") {
    std::string bad = file;
    std::size_t pos = bad.find("capacity");
    REQUIRE(pos != std::string::npos);
    bad[pos] = 'k';
    std::istringstream in(bad);
    CHECK_THROWS_WITH(store_load(in), Catch::Matchers::ContainsSubstring(
                                          "checksum"));
  }

  SECTION("a truncated file never loads partially") {
    std::istringstream in(file.substr(0, file.size() / 2));
    CHECK_THROWS_WITH(store_load(in), Catch::Matchers::ContainsSubstring(
                                          "checksum"));
  }

  SECTION("structural damage with a fixed-up checksum is still rejected") {
    std::string payload = store_serialize_payload(st);
    std::string needle = "\nessential " + std::to_string(st.essential) + "\n";
    std::size_t pos = payload.find(needle);
    REQUIRE(pos != std::string::npos);
    payload.replace(pos, needle.size(), "\nessential 9999\n");
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(ser::fnv1a(payload)));
    std::string doctored =
        "cyclopip-precomp v1\nchecksum " + std::string(buf) + "\n" + payload;
    std::istringstream in(doctored);
    CHECK_THROWS_AS(store_load(in), FormatError);
  }

  SECTION("wrong header versions are rejected") {
    std::string bad = "cyclopip-precomp v9\n" + file.substr(file.find('\n') + 1);
    std::istringstream in(bad);
    CHECK_THROWS_WITH(store_load(in),
                      Catch::Matchers::ContainsSubstring("header"));
  }

  SECTION("file helpers round-trip through the filesystem") {
    const std::string path = "precomp_store_test.tmp";
    store_save_file(path, st);
    PrecompStore back = store_load_file(path);
    CHECK(store_serialize_payload(back) == store_serialize_payload(st));
    std::remove(path.c_str());
    CHECK_THROWS_AS(store_load_file(path), std::runtime_error);
  }
}

TEST_CASE("split-prime seeding, collisions, and bad configurations",
          "[precomp]") {
  Conductor c = Conductor::of(16);

  SECTION("colliding seed primes are replaced with a warning") {
    auto q17 = primes_above(c, 17, 0);
    REQUIRE(q17.front().f == 1);
    PrecompStore st = precompute(c, 50, {q17.front()}, 42);
    for (const auto& sp : st.split_primes) {
      CHECK(sp.p != 17);
      CHECK(sp.p > 50);
    }
    bool warned = false;
    for (const auto& w : st.warnings)
      if (w.find("residue collision") != std::string::npos) warned = true;
    CHECK(warned);
  }

  SECTION("clean seed primes are kept in front") {
    auto q97 = primes_above(c, 97, 0);
    REQUIRE(q97.front().f == 1);
    PrecompStore st = precompute(c, 50, {q97.front()}, 42);
    REQUIRE(!st.split_primes.empty());
    CHECK(st.split_primes.front() == q97.front());
  }

  SECTION("degree-2 and duplicate seeds are invalid") {
    auto q7 = primes_above(c, 7, 0);
    REQUIRE(q7.front().f == 2);
    CHECK_THROWS_AS(precompute(c, 50, {q7.front()}, 42),
                    std::invalid_argument);
    auto q97 = primes_above(c, 97, 0);
    CHECK_THROWS_AS(precompute(c, 50, {q97[0], q97[1]}, 42),
                    std::invalid_argument);
  }

  SECTION("an essential bound below every norm is rejected") {
    PrecompOptions o;
    o.essential_bound = 1;
    CHECK_THROWS_AS(precompute(c, 50, {}, 42, o), std::invalid_argument);
  }

  SECTION("essential primes that cannot generate the class group") {
    PrecompOptions o;
    o.essential_bound = 23;  // only the principal ramified prime stays
    CHECK_THROWS_WITH(precompute(Conductor::of(23), 300, {}, 42, o),
                      Catch::Matchers::ContainsSubstring("essential"));
  }
}
