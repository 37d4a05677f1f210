#ifndef SHIFTFORGE_INTERVAL_HPP
#define SHIFTFORGE_INTERVAL_HPP

#include "shiftforge/rational.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace shiftforge {

// Closed rational interval [lo, hi]. Endpoint arithmetic is exact, so the
// usual outward-rounding concerns of floating-point interval libraries do
// not apply; widening happens only where a quantity is a genuine series
// limit and we enclose it by partial sum + tail bound.
struct Interval {
    Rat lo;
    Rat hi;

    Interval() : lo(0), hi(0) {}
    explicit Interval(const Rat& point) : lo(point), hi(point) {}
    Interval(Rat l, Rat h) : lo(std::move(l)), hi(std::move(h)) {
        if (lo > hi) throw std::invalid_argument("interval: lo > hi");
    }

    static Interval exact(const Rat& r) { return Interval(r); }

    bool is_point() const { return lo == hi; }
    Rat width() const { return Rat(hi - lo); }
    bool contains(const Rat& r) const { return lo <= r && r <= hi; }
    bool contains_zero() const { return sgn(lo) <= 0 && sgn(hi) >= 0; }
    bool strictly_positive() const { return sgn(lo) > 0; }
    bool overlaps(const Interval& o) const { return lo <= o.hi && o.lo <= hi; }

    Interval& operator+=(const Interval& o) {
        lo += o.lo;
        hi += o.hi;
        return *this;
    }
    Interval& operator-=(const Interval& o) {
        lo -= o.hi;
        hi -= o.lo;
        return *this;
    }
};

inline Interval operator+(Interval a, const Interval& b) { return a += b; }
inline Interval operator-(Interval a, const Interval& b) { return a -= b; }

inline Interval operator*(const Interval& a, const Interval& b) {
    Rat p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
    Rat lo = std::min(std::min(p1, p2), std::min(p3, p4));
    Rat hi = std::max(std::max(p1, p2), std::max(p3, p4));
    return Interval(lo, hi);
}

inline Interval operator*(const Rat& s, const Interval& a) {
    if (sgn(s) >= 0) return Interval(Rat(s * a.lo), Rat(s * a.hi));
    return Interval(Rat(s * a.hi), Rat(s * a.lo));
}

// Division by an interval with positive lower bound.
inline Interval operator/(const Interval& a, const Interval& b) {
    if (sgn(b.lo) <= 0)
        throw std::domain_error("interval division by non-positive interval");
    if (sgn(a.lo) >= 0) return Interval(Rat(a.lo / b.hi), Rat(a.hi / b.lo));
    if (sgn(a.hi) <= 0) return Interval(Rat(a.lo / b.lo), Rat(a.hi / b.hi));
    return Interval(Rat(a.lo / b.lo), Rat(a.hi / b.lo));
}

inline Interval operator/(const Interval& a, const Rat& s) {
    if (sgn(s) <= 0) throw std::domain_error("interval division by s <= 0");
    return Interval(Rat(a.lo / s), Rat(a.hi / s));
}

inline Interval pow_iv(const Interval& a, long e) {
    if (e == 0) return Interval(Rat(1));
    if (sgn(a.lo) < 0) throw std::domain_error("pow_iv: negative base");
    if (e > 0)
        return Interval(pow_rat(a.lo, static_cast<unsigned long>(e)),
                        pow_rat(a.hi, static_cast<unsigned long>(e)));
    if (sgn(a.lo) == 0) throw std::domain_error("pow_iv: 1/0");
    return Interval(pow_rat_signed(a.hi, e), pow_rat_signed(a.lo, e));
}

inline Interval hull(const Interval& a, const Interval& b) {
    return Interval(std::min(a.lo, b.lo), std::max(a.hi, b.hi));
}

inline bool operator==(const Interval& a, const Interval& b) {
    return a.lo == b.lo && a.hi == b.hi;
}

inline std::string to_string(const Interval& a) {
    return "[" + rat_to_string(a.lo) + ", " + rat_to_string(a.hi) + "]";
}

// Enclosure of sqrt(a) for a >= 0 with denominator 2^-prec_bits resolution.
// Used for display of weights; all internal bookkeeping stays squared.
inline Interval sqrt_iv(const Interval& a, unsigned long prec_bits = 64) {
    if (sgn(a.lo) < 0) throw std::domain_error("sqrt_iv: negative");
    auto lower = [&](const Rat& r) {
        Int scaled = floor_scaled(r, 2 * prec_bits);
        Int root = isqrt(scaled);
        return rat_of(root, pow2_int(prec_bits));
    };
    auto upper = [&](const Rat& r) {
        Int scaled = ceil_scaled(r, 2 * prec_bits);
        Int root = isqrt(scaled);
        if (root * root < scaled) ++root;
        return rat_of(root, pow2_int(prec_bits));
    };
    return Interval(lower(a.lo), upper(a.hi));
}

// Accumulates long interval sums in fixed-point (units of 2^-kShift),
// rounding lower endpoints down and upper endpoints up. Keeps denominators
// bounded; the rounding slack per term is 2^-kShift each way.
class DyadicAcc {
public:
    static constexpr unsigned long kShift = 96;

    DyadicAcc() : lo_units_(0), hi_units_(0) {}

    void add(const Interval& term) {
        lo_units_ += floor_scaled(term.lo, kShift);
        hi_units_ += ceil_scaled(term.hi, kShift);
    }
    void add_exact(const Rat& term) {
        lo_units_ += floor_scaled(term, kShift);
        hi_units_ += ceil_scaled(term, kShift);
    }

    Interval value() const {
        Int den = pow2_int(kShift);
        return Interval(rat_of(lo_units_, den), rat_of(hi_units_, den));
    }

private:
    Int lo_units_;
    Int hi_units_;
};

// Certified lower bound accumulator: floor-rounded fixed point. The result
// never exceeds the true sum of the added terms.
class LowerAcc {
public:
    static constexpr unsigned long kShift = 64;

    LowerAcc() : units_(0) {}
    void add(const Rat& term) { units_ += floor_scaled(term, kShift); }
    Rat value() const { return rat_of(units_, pow2_int(kShift)); }
    bool exceeds(const Rat& bound) const { return value() > bound; }

private:
    Int units_;
};

}  // namespace shiftforge

#endif
