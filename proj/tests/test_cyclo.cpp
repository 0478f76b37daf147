#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <vector>

#include "cyclopip/cyclo.hpp"
#include "cyclopip/rng.hpp"
#include "reference_zlinalg.hpp"

using namespace cyclopip;

namespace {

std::vector<Int> poly_from(std::initializer_list<long> v) {
  std::vector<Int> r;
  for (long x : v) r.emplace_back(x);
  return r;
}

CycloElement random_element(const Conductor& c, Rng& rng, long lo, long hi) {
  std::vector<Int> v(c.n());
  for (auto& e : v) e = rng.uniform_int(lo, hi);
  return CycloElement(c, std::move(v));
}

// Multiply two dense integer polynomials (test-side oracle helper).
std::vector<Int> poly_mul(const std::vector<Int>& a,
                          const std::vector<Int>& b) {
  std::vector<Int> r(a.size() + b.size() - 1);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

// |det|^2 of the full embedding matrix (sigma_j(zeta^i))_{j,i}, rounded to
// the nearest integer: equals |disc| for the power basis of Z[zeta].
Int embedding_disc(const Conductor& c, unsigned prec) {
  PrecisionGuard guard(prec);
  std::size_t n = c.n();
  // all embeddings: k coprime to N, 0 < k < N
  std::vector<unsigned long> ks;
  for (unsigned long k = 1; k < c.N(); ++k)
    if (std::gcd(k, c.N()) == 1) ks.push_back(k);
  REQUIRE(ks.size() == n);
  std::vector<std::vector<Cplx>> m(n);
  for (std::size_t j = 0; j < n; ++j) {
    m[j].reserve(n);
    Cplx w = unit_root(c.N(), ks[j]);
    Cplx acc(Real(1), Real(0));
    for (std::size_t i = 0; i < n; ++i) {
      m[j].push_back(acc);
      acc = acc * w;
    }
  }
  // Gaussian elimination over C
  auto cdiv = [](const Cplx& a, const Cplx& b) {
    Real d = b.abs2();
    return Cplx((a.re * b.re + a.im * b.im) / d,
                (a.im * b.re - a.re * b.im) / d);
  };
  Real det2(1);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (m[r][col].abs2() > m[piv][col].abs2()) piv = r;
    std::swap(m[piv], m[col]);
    det2 *= m[col][col].abs2();
    for (std::size_t r = col + 1; r < n; ++r) {
      Cplx f = cdiv(m[r][col], m[col][col]);
      for (std::size_t cc = col; cc < n; ++cc)
        m[r][cc] = m[r][cc] - Cplx(f.re * m[col][cc].re - f.im * m[col][cc].im,
                                   f.re * m[col][cc].im + f.im * m[col][cc].re);
    }
  }
  Real rounded = round(det2);
  Int out(rounded.convert_to<std::string>());
  return out;
}

}  // namespace

TEST_CASE("cyclotomic polynomials match known forms", "[cyclo]") {
  CHECK(cyclotomic_polynomial(Conductor::of(8)) ==
        poly_from({1, 0, 0, 0, 1}));
  CHECK(cyclotomic_polynomial(Conductor::of(9)) ==
        poly_from({1, 0, 0, 1, 0, 0, 1}));
  CHECK(cyclotomic_polynomial(Conductor::of(5)) ==
        poly_from({1, 1, 1, 1, 1}));
  CHECK(cyclotomic_polynomial(Conductor::of(12)) ==
        poly_from({1, 0, -1, 0, 1}));
  CHECK(cyclotomic_polynomial(Conductor::of(15)) ==
        poly_from({1, -1, 0, 1, -1, 1, 0, -1, 1}));

  // prod_{d | N} Phi_d = X^N - 1 for several N, mixing both code paths
  for (unsigned long N : {5UL, 8UL, 9UL, 12UL, 15UL, 16UL, 20UL, 23UL}) {
    std::vector<Int> prod{1};
    for (unsigned long d = 1; d <= N; ++d) {
      if (N % d != 0) continue;
      std::vector<Int> phid;
      if (d == 1)
        phid = poly_from({-1, 1});
      else if (d == 2)
        phid = poly_from({1, 1});
      else
        phid = cyclotomic_polynomial(Conductor::of(d));
      prod = poly_mul(prod, phid);
    }
    std::vector<Int> expect(N + 1);
    expect[0] = -1;
    expect[N] = 1;
    CHECK(prod == expect);
  }
}

TEST_CASE("ring operations and pinned products", "[cyclo]") {
  Conductor c8 = Conductor::of(8);
  CycloElement z = CycloElement::zeta_pow(c8, 1);
  CycloElement z3 = CycloElement::zeta_pow(c8, 3);
  CHECK(z * z3 == -CycloElement::one(c8));  // zeta^4 = -1
  CHECK(CycloElement::one(c8) * z3 == z3);

  CycloElement a = CycloElement::one(c8) + z;
  CycloElement b = CycloElement::one(c8) - z;
  CHECK(a * b == CycloElement::one(c8) - CycloElement::zeta_pow(c8, 2));

  Rng rng(77, 0);
  for (unsigned long N : {5UL, 8UL, 9UL, 12UL, 16UL}) {
    Conductor c = Conductor::of(N);
    for (int it = 0; it < 20; ++it) {
      CycloElement x = random_element(c, rng, -9, 9);
      CycloElement y = random_element(c, rng, -9, 9);
      CycloElement w = random_element(c, rng, -9, 9);
      CHECK(x * y == y * x);
      CHECK((x * y) * w == x * (y * w));
      CHECK(x * (y + w) == x * y + x * w);
      CHECK(x + (-x) == CycloElement::zero(c));
    }
  }
}

TEST_CASE("norm agrees with multiplication-matrix determinant", "[cyclo]") {
  CHECK(norm(CycloElement::from_int(Conductor::of(8), 2)) == 16);
  Conductor c5 = Conductor::of(5);
  CHECK(norm(CycloElement::one(c5) - CycloElement::zeta_pow(c5, 1)) == 5);
  CHECK(norm(CycloElement::zeta_pow(Conductor::of(8), 1)) == 1);

  Rng rng(1002, 0);
  for (unsigned long N : {5UL, 8UL, 12UL}) {
    Conductor c = Conductor::of(N);
    for (int it = 0; it < 30; ++it) {
      CycloElement x = random_element(c, rng, -20, 20);
      if (x.is_zero()) continue;
      IntMat m = multiplication_matrix(x);
      CHECK(norm(x) == refz::ref_det(m));
    }
  }
  // larger conductor, larger coefficients: compare against Bareiss
  for (unsigned long N : {16UL, 15UL, 23UL}) {
    Conductor c = Conductor::of(N);
    for (int it = 0; it < 8; ++it) {
      CycloElement x = random_element(c, rng, -1000000, 1000000);
      if (x.is_zero()) continue;
      CHECK(norm(x) == det_bareiss(multiplication_matrix(x)));
    }
  }
}

TEST_CASE("norm is multiplicative and Hadamard-bounded", "[cyclo]") {
  Rng rng(1003, 0);
  for (unsigned long N : {5UL, 8UL, 9UL, 16UL}) {
    Conductor c = Conductor::of(N);
    for (int it = 0; it < 15; ++it) {
      CycloElement x = random_element(c, rng, -50, 50);
      CycloElement y = random_element(c, rng, -50, 50);
      if (x.is_zero() || y.is_zero()) continue;
      CHECK(norm(x * y) == norm(x) * norm(y));
      // |N(a)| <= n^n A^n with A = max |coeff|
      Int a_max = x.max_abs_coeff();
      Int bound;
      mpz_ui_pow_ui(bound.get_mpz_t(), c.n(), c.n());
      Int an;
      mpz_pow_ui(an.get_mpz_t(), a_max.get_mpz_t(), c.n());
      CHECK(norm(x) <= bound * an);
    }
  }
  CHECK_THROWS_AS(norm(CycloElement::zero(Conductor::of(8))),
                  std::domain_error);
}

TEST_CASE("galois action", "[cyclo]") {
  Conductor c8 = Conductor::of(8);
  CHECK(galois_apply(CycloElement::zeta_pow(c8, 1), 3) ==
        CycloElement::zeta_pow(c8, 3));
  CHECK_THROWS_AS(galois_apply(CycloElement::one(c8), 2),
                  std::invalid_argument);

  Rng rng(1004, 0);
  for (unsigned long N : {5UL, 8UL, 12UL, 16UL}) {
    Conductor c = Conductor::of(N);
    std::vector<unsigned long> ts;
    for (unsigned long t = 1; t < N; ++t)
      if (std::gcd(t, N) == 1) ts.push_back(t);
    for (int it = 0; it < 25; ++it) {
      CycloElement x = random_element(c, rng, -30, 30);
      CycloElement y = random_element(c, rng, -30, 30);
      unsigned long t = ts[std::size_t(rng.uniform_int(0, long(ts.size()) - 1))];
      unsigned long t2 = ts[std::size_t(rng.uniform_int(0, long(ts.size()) - 1))];
      CHECK(galois_apply(x, 1) == x);
      CHECK(galois_apply(x * y, t) == galois_apply(x, t) * galois_apply(y, t));
      CHECK(galois_apply(x + y, t) == galois_apply(x, t) + galois_apply(y, t));
      CHECK(galois_apply(galois_apply(x, t), t2) ==
            galois_apply(x, (t * t2) % N));
      if (!x.is_zero()) CHECK(norm(galois_apply(x, t)) == norm(x));
    }
  }
  // conjugate: a * conj(a) has nonnegative trace-form diagonal; spot check
  CycloElement z = CycloElement::zeta_pow(c8, 1);
  CHECK(conjugate(z) == CycloElement::zeta_pow(c8, 7));
}

TEST_CASE("log embedding", "[cyclo]") {
  Conductor c8 = Conductor::of(8);
  LogVector lv = log_embedding(CycloElement::one(c8), 64);
  REQUIRE(lv.size() == 2);  // n/2 entries
  for (const Real& e : lv.entries) CHECK(abs(e) < pow(Real(2), -30));

  LogVector l2 = log_embedding(CycloElement::from_int(c8, 2), 64);
  Real ln2 = log(Real(2));
  for (const Real& e : l2.entries) CHECK(abs(e - ln2) < pow(Real(2), -30));

  Rng rng(1005, 0);
  for (unsigned long N : {5UL, 12UL, 16UL}) {
    Conductor c = Conductor::of(N);
    for (int it = 0; it < 10; ++it) {
      CycloElement x = random_element(c, rng, -40, 40);
      CycloElement y = random_element(c, rng, -40, 40);
      if (x.is_zero() || y.is_zero()) continue;
      unsigned prec = 96;
      LogVector la = log_embedding(x, prec);
      LogVector lb = log_embedding(y, prec);
      LogVector lab = log_embedding(x * y, prec);
      REQUIRE(la.size() == c.n() / 2);
      Real tol = pow(Real(2), -int(prec) / 2);
      // sum = (1/2) ln N(a)
      PrecisionGuard guard(prec + 64);
      Real target = log(to_real(norm(x))) / 2;
      CHECK(abs(la.sum() - target) < tol);
      for (std::size_t i = 0; i < la.size(); ++i)
        CHECK(abs(la.entries[i] + lb.entries[i] - lab.entries[i]) < tol);
    }
  }
  CHECK_THROWS_AS(log_embedding(CycloElement::zero(c8), 64),
                  std::domain_error);
}

TEST_CASE("log embedding precision exhaustion and retry", "[cyclo]") {
  // u_2^60 at N=5 has an embedding ~ 0.618^60 ~ 2^{-41.6}: below the 2^{-32}
  // certification floor at precision 64, above the floor at 128.
  Conductor c5 = Conductor::of(5);
  CycloElement u = cyclotomic_unit(c5, 2);
  CycloElement pw = CycloElement::one(c5);
  for (int i = 0; i < 60; ++i) pw = pw * u;
  CHECK_THROWS_AS(log_embedding(pw, 64), PrecisionExhausted);
  LogVector lv = log_embedding(pw, 128);
  CHECK(abs(lv.sum()) < pow(Real(2), -40));  // unit: sum of logs is 0
}

TEST_CASE("cyclotomic units", "[cyclo]") {
  Conductor c5 = Conductor::of(5);
  CycloElement u2 = cyclotomic_unit(c5, 2);
  CHECK(u2 == CycloElement::one(c5) + CycloElement::zeta_pow(c5, 1));
  CHECK(norm(u2) == 1);

  Conductor c8 = Conductor::of(8);
  CycloElement u3 = cyclotomic_unit(c8, 3);
  CHECK(u3 == CycloElement::one(c8) + CycloElement::zeta_pow(c8, 1) +
                  CycloElement::zeta_pow(c8, 2));
  CHECK(norm(u3) == 1);

  for (unsigned long N : {5UL, 8UL, 9UL, 16UL}) {
    Conductor c = Conductor::of(N);
    for (unsigned long j = 2; j < N; ++j) {
      if (std::gcd(j, N) != 1) continue;
      CycloElement u = cyclotomic_unit(c, j);
      CHECK(norm(u) == 1);
      LogVector lv = log_embedding(u, 96);
      CHECK(abs(lv.sum()) < pow(Real(2), -40));
    }
  }
  CHECK_THROWS_AS(cyclotomic_unit(c5, 1), std::invalid_argument);
  CHECK_THROWS_AS(cyclotomic_unit(Conductor::of(8), 2),
                  std::invalid_argument);
}

TEST_CASE("discriminant", "[cyclo]") {
  CHECK(discriminant(Conductor::of(8)) == 256);
  CHECK(discriminant(Conductor::of(5)) == 125);
  CHECK(discriminant(Conductor::of(3)) == 3);
  for (unsigned long N : {3UL, 5UL, 8UL, 9UL, 12UL, 15UL, 16UL}) {
    Conductor c = Conductor::of(N);
    CHECK(discriminant(c) == embedding_disc(c, 192));
  }
}

TEST_CASE("trace of zeta powers", "[cyclo]") {
  for (unsigned long N : {5UL, 8UL, 9UL, 12UL, 16UL}) {
    Conductor c = Conductor::of(N);
    for (unsigned long a = 0; a < N; ++a) {
      IntMat m = multiplication_matrix(CycloElement::zeta_pow(c, long(a)));
      Int tr = 0;
      for (std::size_t i = 0; i < c.n(); ++i) tr += m.at(i, i);
      CHECK(trace_zeta_power(c, a) == tr);
    }
  }
}

TEST_CASE("element serialization", "[cyclo]") {
  Conductor c8 = Conductor::of(8);
  CycloElement a(c8, poly_from({1, 0, 2, 0}));
  CHECK(element_to_string(a) == "8:1,0,2,0");
  CHECK(element_from_string("8:1,0,2,0") == a);

  Rng rng(1006, 0);
  for (unsigned long N : {5UL, 12UL, 16UL}) {
    Conductor c = Conductor::of(N);
    for (int it = 0; it < 10; ++it) {
      CycloElement x = random_element(c, rng, -1000, 1000);
      CHECK(element_from_string(element_to_string(x)) == x);
    }
  }
  CHECK_THROWS_AS(element_from_string("8:1,0,2"), std::invalid_argument);
  CHECK_THROWS_AS(element_from_string("nonsense"), std::invalid_argument);
}

TEST_CASE("conductor helpers", "[cyclo]") {
  Conductor c16 = Conductor::prime_power(2, 4);
  CHECK(c16.N() == 16);
  CHECK(c16.n() == 8);
  CHECK(c16.unit_rank() == 3);
  CHECK(c16.torsion_order() == 16);
  Conductor c5 = Conductor::of(5);
  CHECK(c5.torsion_order() == 10);
  CHECK(c5.is_prime_power());
  Conductor c12 = Conductor::of(12);
  CHECK_FALSE(c12.is_prime_power());
  CHECK(c12.n() == 4);
  CHECK_THROWS_AS(c12.p(), std::logic_error);
  CHECK_THROWS_AS(Conductor::of(2), std::invalid_argument);
  CHECK(euler_phi(12) == 4);
  CHECK(mobius(6) == 1);
  CHECK(mobius(12) == 0);
  CHECK(mobius(30) == -1);
}
