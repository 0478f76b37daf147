#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <cctype>
#include <string_view>
#include <vector>

#include "classgroup.hpp"

namespace cyclopip {

/** Raised on any malformed or inconsistent persisted record. */
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

namespace ser {

/** FNV-1a 64-bit; stable across platforms, used as a container checksum. */
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string next_token(std::istream& in, const char* what) {
  std::string t;
  if (!(in >> t)) throw FormatError(std::string(what) + ": truncated input");
  return t;
}

inline Int get_int(std::istream& in, const char* what = "int") {
  std::string t = next_token(in, what);
  try {
    return Int(t);
  } catch (const std::exception&) {
    throw FormatError(std::string(what) + ": bad integer '" + t + "'");
  }
}

inline long get_long(std::istream& in, const char* what = "long") {
  Int v = get_int(in, what);
  if (!v.fits_slong_p())
    throw FormatError(std::string(what) + ": out of long range");
  return v.get_si();
}

inline unsigned long get_ulong(std::istream& in, const char* what = "ulong") {
  Int v = get_int(in, what);
  if (v < 0 || !v.fits_ulong_p())
    throw FormatError(std::string(what) + ": out of ulong range");
  return v.get_ui();
}

inline std::size_t get_size(std::istream& in, const char* what = "count") {
  return std::size_t(get_ulong(in, what));
}

/** Exact hexfloat image of a Real (mpfr "%Ra"); lossless at any precision. */
inline std::string real_to_hex(const Real& r) {
  char* s = nullptr;
  mpfr_asprintf(&s, "%Ra", r.backend().data());
  std::string out(s);
  mpfr_free_str(s);
  return out;
}

/** Parse a hexfloat image into a Real. The variable precision is sized from
 * the mantissa so the parse is always exact; `bits` only sets a floor. */
inline Real real_from_hex(const std::string& s, unsigned bits) {
  std::size_t mant = 0;
  for (char ch : s) {
    if (ch == 'p' || ch == 'P') break;
    if (std::isxdigit(static_cast<unsigned char>(ch))) ++mant;
  }
  unsigned need = std::max<unsigned>(bits, unsigned(4 * mant) + 8);
  Real r;
  mpfr_set_prec(r.backend().data(), need >= MPFR_PREC_MIN ? need : 53);
  if (mpfr_set_str(r.backend().data(), s.c_str(), 0, MPFR_RNDN) != 0)
    throw FormatError("real: bad hexfloat '" + s + "'");
  return r;
}

inline Real get_real(std::istream& in, unsigned bits,
                     const char* what = "real") {
  return real_from_hex(next_token(in, what), bits);
}

inline void put_prime(std::ostream& out, const PrimeIdeal& q) {
  out << q.N << ' ' << q.p << ' ' << q.f << ' ' << q.e << ' '
      << (q.f == 1 ? q.root : 0ul);
  for (auto cf : q.poly) out << ' ' << cf;
  out << '\n';
}

inline PrimeIdeal get_prime(std::istream& in) {
  PrimeIdeal q;
  q.N = get_ulong(in, "prime N");
  q.p = get_ulong(in, "prime p");
  q.f = unsigned(get_ulong(in, "prime f"));
  q.e = unsigned(get_ulong(in, "prime e"));
  q.root = get_ulong(in, "prime root");
  if (q.p < 2 || q.f == 0 || q.e == 0)
    throw FormatError("prime: malformed record");
  q.poly.resize(q.f + 1);
  for (auto& cf : q.poly) cf = get_ulong(in, "prime poly");
  if (q.poly.back() != 1) throw FormatError("prime: poly not monic");
  return q;
}

inline void put_element(std::ostream& out, const CycloElement& a) {
  const auto& cs = a.coeffs();
  for (std::size_t i = 0; i < cs.size(); ++i)
    out << (i ? " " : "") << cs[i].get_str();
  out << '\n';
}

inline CycloElement get_element(std::istream& in, const Conductor& c) {
  std::vector<Int> v(c.n());
  for (auto& e : v) e = get_int(in, "element coeff");
  return CycloElement(c, std::move(v));
}

inline void put_matrix(std::ostream& out, const IntMat& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j)
      out << (j ? " " : "") << m.at(i, j).get_str();
    out << '\n';
  }
}

inline IntMat get_matrix(std::istream& in) {
  std::size_t r = get_size(in, "matrix rows");
  std::size_t cc = get_size(in, "matrix cols");
  if (r > 4096 || cc > 4096) throw FormatError("matrix: implausible shape");
  IntMat m(r, cc);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < cc; ++j) m.at(i, j) = get_int(in, "matrix");
  return m;
}

/** Fractional ideal as denominator plus row-major basis matrix. */
inline void put_ideal(std::ostream& out, const Ideal& I) {
  out << I.denominator().get_str() << '\n';
  put_matrix(out, I.basis());
}

inline Ideal get_ideal(std::istream& in, const Conductor& c) {
  Int den = get_int(in, "ideal den");
  if (den <= 0) throw FormatError("ideal: denominator <= 0");
  IntMat m = get_matrix(in);
  try {
    return Ideal(c, m, den);
  } catch (const std::exception& e) {
    throw FormatError(std::string("ideal: ") + e.what());
  }
}

inline void put_relation(std::ostream& out, const Relation& r) {
  out << r.exponents.size();
  for (long e : r.exponents) out << ' ' << e;
  out << '\n';
  put_element(out, r.generator);
}

inline Relation get_relation(std::istream& in, const Conductor& c) {
  std::size_t k = get_size(in, "relation len");
  if (k > 100000) throw FormatError("relation: implausible length");
  Relation r{std::vector<long>(k), CycloElement::zero(c)};
  for (auto& e : r.exponents) e = get_long(in, "relation exp");
  r.generator = get_element(in, c);
  return r;
}

/**
 * Ideal input file: either header "ideal-hnf" followed by a denominator and
 * a basis matrix, or header "ideal-gen" followed by n integer coefficients
 * of a generator on the power basis.
 */
inline Ideal read_ideal_file(std::istream& in, const Conductor& c) {
  std::string kind = next_token(in, "ideal file header");
  if (kind == "ideal-hnf") return get_ideal(in, c);
  if (kind == "ideal-gen") {
    CycloElement g = get_element(in, c);
    if (g.is_zero()) throw FormatError("ideal-gen: zero generator");
    return ideal_from_generator(g);
  }
  throw FormatError("ideal file: unknown header '" + kind + "'");
}

inline void write_ideal_file(std::ostream& out, const Ideal& I) {
  out << "ideal-hnf\n";
  put_ideal(out, I);
}

/** Deterministic key-value report of a class-group run. */
inline std::string classgroup_report(const ClassGroupResult& r) {
  std::ostringstream out;
  out << "classgroup-report v1\n";
  out << "N " << r.N << '\n';
  out << "factor-base-size " << r.fb.size() << '\n';
  out << "factor-base-bound " << r.fb.bound.get_str() << '\n';
  out << "relations " << r.relations.size() << '\n';
  out << "h " << r.h.get_str() << '\n';
  out << "divisors";
  for (const auto& d : r.divisors) out << ' ' << d.get_str();
  out << '\n';
  {
    std::ostringstream fs;
    fs.precision(20);
    fs << "regulator " << r.regulator << '\n';
    fs << "hstar " << r.hstar << '\n';
    fs << "euler-product " << r.euler_product << '\n';
    out << fs.str();
  }
  out << "euler-P0 " << r.euler_P0 << '\n';
  out << "certified " << (r.certified ? 1 : 0) << '\n';
  {
    std::ostringstream fs;
    fs.precision(17);
    fs << "margin " << r.margin << '\n';
    out << fs.str();
  }
  out << "seed " << r.seed << '\n';
  out << "attempts " << r.attempts << '\n';
  for (const auto& w : r.warnings) out << "warning " << w << '\n';
  out << "hnf-basis\n";
  put_matrix(out, r.hnf_basis);
  return out.str();
}

}  // namespace ser
}  // namespace cyclopip
