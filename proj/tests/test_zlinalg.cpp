#include <catch2/catch_amalgamated.hpp>

#include <cyclopip/rng.hpp>
#include <cyclopip/zlinalg.hpp>

#include "reference_zlinalg.hpp"

using namespace cyclopip;

namespace {

IntMat from_rows(const std::vector<std::vector<long>>& rows) {
  IntMat m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m.at(i, j) = rows[i][j];
  return m;
}

IntMat random_mat(Rng& rng, std::size_t maxdim, long bound) {
  std::size_t r = std::size_t(rng.uniform_int(1, long(maxdim)));
  std::size_t c = std::size_t(rng.uniform_int(1, long(maxdim)));
  IntMat m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      m.at(i, j) = Int(rng.uniform_int(-bound, bound));
  return m;
}

}  // namespace

TEST_CASE("hnf matches hand-derived and reference values", "[zlinalg]") {
  IntMat m = from_rows({{1, 2}, {3, 4}});
  IntMat h = hnf(m);
  REQUIRE(h == from_rows({{1, 0}, {0, 2}}));

  IntMat id = IntMat::identity(4);
  REQUIRE(hnf(id) == id);

  // idempotence
  REQUIRE(hnf(h) == h);
}

TEST_CASE("hnf agrees with the naive reference on random inputs", "[zlinalg]") {
  Rng rng(20260825);
  for (int iter = 0; iter < 150; ++iter) {
    IntMat m = random_mat(rng, 8, 30);
    IntMat h1 = hnf(m);
    IntMat h2 = refz::ref_hnf(m);
    INFO("input:\n" << m.to_string());
    REQUIRE(h1 == h2);
    REQUIRE(hnf(h1) == h1);
  }
}

TEST_CASE("hnf_with_transform returns a unimodular certificate", "[zlinalg]") {
  auto [h0, u0] = hnf_with_transform(IntMat::identity(3));
  REQUIRE(h0 == IntMat::identity(3));
  REQUIRE(u0 == IntMat::identity(3));

  Rng rng(7);
  for (int iter = 0; iter < 100; ++iter) {
    IntMat m = random_mat(rng, 7, 25);
    std::size_t rank = 0;
    auto [h, u] = hnf_with_transform(m, &rank);
    REQUIRE(u.mul(m) == h);
    Int du = refz::ref_det(u);
    REQUIRE(abs(du) == 1);
    // nonzero rows of h form hnf(m)
    IntMat hn(rank, m.cols());
    for (std::size_t i = 0; i < rank; ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) hn.at(i, j) = h.at(i, j);
    REQUIRE(hn == hnf(m));
  }
}

TEST_CASE("snf divisor chains", "[zlinalg]") {
  REQUIRE(snf_divisors(from_rows({{2, 0}, {0, 3}})) ==
          std::vector<Int>{1, 6});
  REQUIRE(snf_divisors(from_rows({{2, 0}, {0, 4}})) ==
          std::vector<Int>{2, 4});
  REQUIRE(snf_divisors(IntMat::identity(5)) ==
          std::vector<Int>(5, Int(1)));

  Rng rng(99);
  for (int iter = 0; iter < 120; ++iter) {
    IntMat m = random_mat(rng, 6, 20);
    auto d1 = snf_divisors(m);
    auto d2 = refz::ref_snf(m);
    INFO("input:\n" << m.to_string());
    REQUIRE(d1 == d2);
    for (std::size_t i = 0; i + 1 < d1.size(); ++i)
      REQUIRE(d1[i + 1] % d1[i] == 0);
  }
}

TEST_CASE("snf product equals |det| on full-rank square input", "[zlinalg]") {
  Rng rng(4242);
  int checked = 0;
  while (checked < 40) {
    IntMat m = random_mat(rng, 6, 12);
    if (m.rows() != m.cols()) continue;
    Int d = det_bareiss(m);
    if (d == 0) continue;
    auto divisors = snf_divisors(m);
    Int prod = 1;
    for (const auto& e : divisors) prod *= e;
    REQUIRE(prod == abs(d));
    REQUIRE(refz::ref_det(m) == d);
    ++checked;
  }
}

TEST_CASE("solve_left pinned examples", "[zlinalg]") {
  IntMat a = from_rows({{2, 0}, {0, 2}});
  auto x = solve_left(a, {Int(4), Int(2)});
  REQUIRE(x.has_value());
  REQUIRE(*x == std::vector<Int>{2, 1});

  IntMat b = from_rows({{2, 0}, {0, 1}});
  REQUIRE(!solve_left(b, {Int(1), Int(0)}).has_value());
}

TEST_CASE("solve_left round-trips and matches reference", "[zlinalg]") {
  Rng rng(31337);
  for (int iter = 0; iter < 120; ++iter) {
    IntMat a = random_mat(rng, 7, 20);
    std::vector<Int> x0(a.rows());
    for (auto& e : x0) e = Int(rng.uniform_int(-9, 9));
    std::vector<Int> y(a.cols());
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t i = 0; i < a.rows(); ++i) y[j] += x0[i] * a.at(i, j);
    auto x = solve_left(a, y);
    REQUIRE(x.has_value());
    std::vector<Int> yy(a.cols());
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t i = 0; i < a.rows(); ++i) yy[j] += (*x)[i] * a.at(i, j);
    REQUIRE(yy == y);
    auto xr = refz::ref_solve_left(a, y);
    REQUIRE(xr.has_value());
    REQUIRE(*x == *xr);

    // a vector off the lattice must be rejected identically by both
    std::vector<Int> ybad = y;
    ybad[0] += 1;
    auto miss = solve_left(a, ybad);
    auto missr = refz::ref_solve_left(a, ybad);
    REQUIRE(miss.has_value() == missr.has_value());
    if (miss.has_value()) REQUIRE(*miss == *missr);
  }
}

TEST_CASE("left kernel basis", "[zlinalg]") {
  IntMat m = from_rows({{1, 1}, {1, 1}});
  IntMat k = left_kernel(m);
  REQUIRE(k.rows() == 1);
  REQUIRE(k == hnf(from_rows({{1, -1}})));

  REQUIRE(left_kernel(IntMat::identity(3)).rows() == 0);

  Rng rng(555);
  for (int iter = 0; iter < 80; ++iter) {
    IntMat m2 = random_mat(rng, 6, 15);
    IntMat k2 = left_kernel(m2);
    for (std::size_t i = 0; i < k2.rows(); ++i) {
      std::vector<Int> prod(m2.cols());
      for (std::size_t j = 0; j < m2.cols(); ++j)
        for (std::size_t t = 0; t < m2.rows(); ++t)
          prod[j] += k2.at(i, t) * m2.at(t, j);
      REQUIRE(prod == std::vector<Int>(m2.cols()));
    }
    REQUIRE(k2 == refz::ref_left_kernel(m2));
  }
}

TEST_CASE("incremental hnf accumulator tracks rank and determinant",
          "[zlinalg]") {
  Rng rng(8080);
  for (int iter = 0; iter < 40; ++iter) {
    std::size_t cols = std::size_t(rng.uniform_int(2, 6));
    std::size_t nrows = std::size_t(rng.uniform_int(2, 12));
    IntMat m(nrows, cols);
    HnfAccumulator acc(cols);
    for (std::size_t i = 0; i < nrows; ++i) {
      std::vector<Int> row(cols);
      for (auto& e : row) e = Int(rng.uniform_int(-15, 15));
      m.set_row(i, row);
      acc.insert(row);
    }
    IntMat expect = hnf(m);
    REQUIRE(acc.rank() == expect.rows());
    REQUIRE(acc.snapshot() == expect);
    if (acc.full_rank()) {
      Int d = 1;
      for (std::size_t i = 0; i < expect.rows(); ++i) d *= expect.at(i, i);
      REQUIRE(acc.det() == d);
    }
  }
}
