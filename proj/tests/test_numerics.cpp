#include "shiftforge/interval.hpp"
#include "shiftforge/pairing.hpp"

#include <doctest.h>

#include <set>

using namespace shiftforge;

TEST_CASE("rational parsing and formatting round-trip") {
    CHECK(rat_from_string("3/4") == rat(3, 4));
    CHECK(rat_from_string("-7") == rat(-7));
    CHECK(rat_to_string(rat(6, 4)) == "3/2");
    CHECK_THROWS_AS(rat_from_string(""), std::invalid_argument);
    CHECK_THROWS_AS(rat_from_string("1/0"), std::invalid_argument);
}

TEST_CASE("rational powers incl. negative exponents") {
    CHECK(pow_rat(rat(2, 3), 3) == rat(8, 27));
    CHECK(pow_rat_signed(rat(2), -3) == rat(1, 8));
    CHECK(pow_rat_signed(rat(5, 2), 0) == rat(1));
    CHECK_THROWS_AS(pow_rat_signed(rat(0), -1), std::domain_error);
}

TEST_CASE("interval arithmetic is exact and sound") {
    Interval a(rat(1, 3), rat(1, 2));
    Interval b(rat(-1, 4), rat(2));
    Interval s = a + b;
    CHECK(s.lo == rat(1, 12));
    CHECK(s.hi == rat(5, 2));
    Interval p = a * b;
    CHECK(p.lo == rat(-1, 8));
    CHECK(p.hi == rat(1));
    Interval q = b / a;  // divisor positive
    CHECK(q.lo == rat(-3, 4));
    CHECK(q.hi == rat(6));
    CHECK_THROWS_AS(a / Interval(rat(-1), rat(1)), std::domain_error);
    CHECK(Interval(rat(-1), rat(1)).contains_zero());
    CHECK_FALSE(a.contains_zero());
}

TEST_CASE("interval multiplication is order-independent on positives") {
    Interval a(rat(1, 3), rat(1, 2)), b(rat(2, 5), rat(3, 5)), c(rat(7, 2), rat(4));
    CHECK((a * b) * c == a * (b * c));
    CHECK(a * b == b * a);
}

TEST_CASE("sqrt enclosure brackets the true root") {
    Interval s = sqrt_iv(Interval(rat(2)));
    CHECK(s.lo * s.lo <= rat(2));
    CHECK(s.hi * s.hi >= rat(2));
    CHECK(s.hi - s.lo < rat(1, 1000000));
    Interval four = sqrt_iv(Interval(rat(4)));
    CHECK(four.contains(rat(2)));
}

TEST_CASE("dyadic accumulator encloses exact sums") {
    DyadicAcc acc;
    Rat exact(0);
    for (int i = 1; i <= 1000; ++i) {
        Rat term = rat(1, i) / rat(i + 1);
        exact += term;
        acc.add_exact(term);
    }
    Interval v = acc.value();
    CHECK(v.lo <= exact);
    CHECK(v.hi >= exact);
    CHECK(v.width() <= rat(1000) / pow2_rat(DyadicAcc::kShift));
}

TEST_CASE("lower accumulator never overshoots") {
    LowerAcc acc;
    Rat exact(0);
    for (int i = 1; i <= 500; ++i) {
        Rat term = rat(1, 2 * i + 1);
        exact += term;
        acc.add(term);
    }
    CHECK(acc.value() <= exact);
    CHECK(exact - acc.value() <= rat(500) / pow2_rat(LowerAcc::kShift));
}

TEST_CASE("cantor pairing is a bijection on a window") {
    std::set<Int> seen;
    for (long a = 0; a < 30; ++a)
        for (long b = 0; b < 30; ++b) {
            Int z = cantor_pair(Int(a), Int(b));
            CHECK(seen.insert(z).second);
            auto [x, y] = cantor_unpair(z);
            CHECK(x == a);
            CHECK(y == b);
        }
}

TEST_CASE("xi_path is a level bijection") {
    // k = 2: enumerate codes 0..199 and invert
    for (long code = 0; code < 200; ++code) {
        auto path = xi_path_inverse(Int(code), 2);
        CHECK(path.size() == 2);
        CHECK(path[0] >= 1);
        CHECK(path[1] >= 1);
        CHECK(xi_path(path) == code);
    }
    // distinctness across a grid
    std::set<Int> seen;
    for (std::uint32_t a = 1; a <= 12; ++a)
        for (std::uint32_t b = 1; b <= 12; ++b)
            CHECK(seen.insert(xi_path({a, b})).second);
}

TEST_CASE("node_code covers root and inverts") {
    CHECK(node_code({}) == 0);
    CHECK(node_decode(Int(0)).empty());
    for (long code = 0; code < 100; ++code) {
        auto node = node_decode(Int(code));
        CHECK(node_code(node) == code);
    }
}
