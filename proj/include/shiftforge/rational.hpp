#ifndef SHIFTFORGE_RATIONAL_HPP
#define SHIFTFORGE_RATIONAL_HPP

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace shiftforge {

// All arithmetic in this project is exact rational arithmetic (GMP mpq).
// Doubles appear only in log output and benchmark timings, never in results.
using Rat = mpq_class;
using Int = mpz_class;

inline Rat rat(long num, long den = 1) {
    Rat r(num, den);
    r.canonicalize();
    return r;
}

inline Rat rat_of(const Int& num, const Int& den) {
    Rat r(num, den);
    r.canonicalize();
    return r;
}

// Parses "p/q" or "p". Throws on empty/zero-denominator input.
inline Rat rat_from_string(const std::string& s) {
    if (s.empty()) throw std::invalid_argument("empty rational literal");
    Rat r;
    if (r.set_str(s, 10) != 0)
        throw std::invalid_argument("bad rational literal: " + s);
    if (r.get_den() == 0) throw std::invalid_argument("zero denominator: " + s);
    r.canonicalize();
    return r;
}

inline std::string rat_to_string(const Rat& r) { return r.get_str(); }

inline Rat pow_rat(const Rat& base, unsigned long e) {
    Rat out;
    mpz_pow_ui(mpq_numref(out.get_mpq_t()), mpq_numref(base.get_mpq_t()), e);
    mpz_pow_ui(mpq_denref(out.get_mpq_t()), mpq_denref(base.get_mpq_t()), e);
    // base is canonical, so num^e / den^e already is.
    return out;
}

// base^e for integer e; negative exponents require base > 0.
inline Rat pow_rat_signed(const Rat& base, long e) {
    if (e >= 0) return pow_rat(base, static_cast<unsigned long>(e));
    if (base <= 0) throw std::domain_error("pow_rat_signed: nonpositive base");
    Rat p = pow_rat(base, static_cast<unsigned long>(-e));
    return Rat(1) / p;
}

inline Int pow2_int(unsigned long e) {
    Int out;
    mpz_ui_pow_ui(out.get_mpz_t(), 2, e);
    return out;
}

inline Rat pow2_rat(long e) {
    if (e >= 0) return Rat(pow2_int(static_cast<unsigned long>(e)));
    return rat_of(1, pow2_int(static_cast<unsigned long>(-e)));
}

// floor(r * 2^shift) as an integer; pairs with DyadicAcc below.
inline Int floor_scaled(const Rat& r, unsigned long shift) {
    Int num = r.get_num();
    num <<= shift;
    Int q;
    mpz_fdiv_q(q.get_mpz_t(), num.get_mpz_t(), r.get_den().get_mpz_t());
    return q;
}

inline Int ceil_scaled(const Rat& r, unsigned long shift) {
    Int num = r.get_num();
    num <<= shift;
    Int q;
    mpz_cdiv_q(q.get_mpz_t(), num.get_mpz_t(), r.get_den().get_mpz_t());
    return q;
}

// Floor of sqrt for nonnegative integers.
inline Int isqrt(const Int& n) {
    Int r;
    mpz_sqrt(r.get_mpz_t(), n.get_mpz_t());
    return r;
}

}  // namespace shiftforge

#endif
