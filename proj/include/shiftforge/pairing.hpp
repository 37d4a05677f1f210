#ifndef SHIFTFORGE_PAIRING_HPP
#define SHIFTFORGE_PAIRING_HPP

#include "shiftforge/rational.hpp"

#include <cstdint>
#include <vector>

namespace shiftforge {

// Cantor pairing on Z+^2: pair(a, b) = (a+b)(a+b+1)/2 + b.
inline Int cantor_pair(const Int& a, const Int& b) {
    Int s = a + b;
    return s * (s + 1) / 2 + b;
}

// Inverse of cantor_pair.
inline std::pair<Int, Int> cantor_unpair(const Int& z) {
    // s = floor((sqrt(8z+1) - 1) / 2)
    Int w = isqrt(Int(8 * z + 1));
    Int s = (w - 1) / 2;
    Int t = s * (s + 1) / 2;
    Int b = z - t;
    Int a = s - b;
    if (a < 0) {  // guard against isqrt edge rounding
        s += 1;
        t = s * (s + 1) / 2;
        b = z - t;
        a = s - b;
    }
    return {a, b};
}

// Fixed bijection xi_k : N^k -> Z+ (positive-integer tuples, k >= 1),
// built by iterated Cantor pairing:
//   xi_1((j)) = j - 1,  xi_k((j, rest)) = pair(j - 1, xi_{k-1}(rest)).
inline Int xi_path(const std::vector<std::uint32_t>& path) {
    if (path.empty()) throw std::invalid_argument("xi_path: empty tuple");
    Int acc = Int(path.back()) - 1;
    for (std::size_t i = path.size() - 1; i-- > 0;)
        acc = cantor_pair(Int(path[i]) - 1, acc);
    return acc;
}

// Inverse of xi_path for a given tuple length.
inline std::vector<std::uint32_t> xi_path_inverse(Int code, std::size_t k) {
    if (k == 0) throw std::invalid_argument("xi_path_inverse: k = 0");
    std::vector<std::uint32_t> path;
    path.reserve(k);
    for (std::size_t i = 0; i + 1 < k; ++i) {
        auto [a, rest] = cantor_unpair(code);
        path.push_back(static_cast<std::uint32_t>(a.get_ui()) + 1);
        code = rest;
    }
    path.push_back(static_cast<std::uint32_t>(code.get_ui()) + 1);
    return path;
}

// Bijection X -> Z+ over the index tree X = union_k N^k (root = empty tuple):
// root -> 0, x in N^k -> 1 + pair(k-1, xi_k(x)).
inline Int node_code(const std::vector<std::uint32_t>& path) {
    if (path.empty()) return Int(0);
    return 1 + cantor_pair(Int(path.size() - 1), xi_path(path));
}

inline std::vector<std::uint32_t> node_decode(const Int& code) {
    if (code == 0) return {};
    auto [km1, xi] = cantor_unpair(Int(code - 1));
    return xi_path_inverse(xi, km1.get_ui() + 1);
}

}  // namespace shiftforge

#endif
