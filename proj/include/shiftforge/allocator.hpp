#ifndef SHIFTFORGE_ALLOCATOR_HPP
#define SHIFTFORGE_ALLOCATOR_HPP

#include "shiftforge/pairing.hpp"
#include "shiftforge/rational.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace shiftforge {

// Allocation key of one gap measure: the subtree it lives in and the index
// node inside that subtree. The key is mapped through a fixed structural
// bijection to xi in Z+, which fixes the fractional offset of every atom the
// measure will ever emit. Distinct keys therefore get disjoint, unbounded
// support sets regardless of evaluation order or thread count.
struct AllocKey {
    Int subtree;                      // 0 = rooted / anchor subtree
    std::vector<std::uint32_t> node;  // node in the index tree X

    Int xi() const { return cantor_pair(subtree, node_code(node)); }

    std::string to_string() const {
        std::string s = "s" + subtree.get_str() + "/";
        if (node.empty()) {
            s += "r";
        } else {
            for (std::size_t i = 0; i < node.size(); ++i) {
                if (i) s += '.';
                s += std::to_string(node[i]);
            }
        }
        return s;
    }
};

// Subtree index for the rootless chain: sibling i >= 1 hanging off ancestor
// level j >= 1. The anchor subtree is 0.
inline Int chain_subtree_index(std::uint32_t level, std::uint32_t sibling) {
    return 1 + cantor_pair(Int(level) - 1, Int(sibling) - 1);
}

inline Rat alloc_offset(const Int& xi) { return rat_of(xi, Int(xi + 1)); }

// Support schedule: a(key, i) = theta + (i - 1) + xi/(xi + 1), i >= 1.
// Strictly increasing and unbounded in i; theta is an integer >= 1 in every
// model we build, so the fractional part identifies the key exactly.
inline Rat alloc_support(const Rat& theta, const Int& xi, const Int& index) {
    return Rat(theta + Rat(index - 1) + alloc_offset(xi));
}

struct DecodedSupport {
    Int xi;
    Int integer_part;  // theta + (i - 1); the owner resolves i from theta
};

// Inverts the schedule: recovers xi from the fractional part, or nullopt if
// the support provably lies on no key's schedule.
inline std::optional<DecodedSupport> decode_support(const Rat& support) {
    Int ip;
    mpz_fdiv_q(ip.get_mpz_t(), support.get_num().get_mpz_t(),
               support.get_den().get_mpz_t());
    Rat frac = support - Rat(ip);
    if (frac == 0) return DecodedSupport{Int(0), ip};
    // frac = xi/(xi+1)  <=>  xi = frac/(1-frac), integral
    Rat one_minus(1 - frac);
    Rat xi_r = frac / one_minus;
    if (xi_r.get_den() != 1) return std::nullopt;
    return DecodedSupport{Int(xi_r.get_num()), ip};
}

}  // namespace shiftforge

#endif
