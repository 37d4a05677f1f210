#ifndef SHIFTFORGE_TREE_HPP
#define SHIFTFORGE_TREE_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace shiftforge {

struct MalformedAddress : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Shape of the extremal directed tree: one rooted and one rootless variant
// exist up to isomorphism; every vertex has countably many children,
// enumerated on demand.
struct TreeShape {
    bool rooted = true;
};

// Canonical vertex name. `ancestor_index` walks up the parent chain from the
// anchor in the rootless tree (always 0 in rooted models); `path` descends
// child indices. In canonical form a path entry 0 never appears: child 0 of
// ancestor j is ancestor j-1, and canonicalize() collapses that spelling.
struct VertexAddress {
    std::uint32_t ancestor_index = 0;
    std::vector<std::uint32_t> path;

    bool operator==(const VertexAddress&) const = default;
    bool is_anchor() const { return ancestor_index == 0 && path.empty(); }
};

// Total order used to make every report and export deterministic.
inline bool operator<(const VertexAddress& a, const VertexAddress& b) {
    if (a.ancestor_index != b.ancestor_index)
        return a.ancestor_index < b.ancestor_index;
    return a.path < b.path;
}

// Serialized form "j:p1.p2.....pk"; the root/anchor is "0:".
inline std::string format_address(const VertexAddress& v) {
    std::string out = std::to_string(v.ancestor_index) + ":";
    for (std::size_t i = 0; i < v.path.size(); ++i) {
        if (i) out += '.';
        out += std::to_string(v.path[i]);
    }
    return out;
}

VertexAddress parse_address(const std::string& s);

// Collapses the w0-identification (ancestor j, path [0, rest]) = (ancestor
// j-1, path [rest]) until the ancestor index is minimal. Rooted models
// reject any 0 entry. Idempotent.
VertexAddress canonicalize(const TreeShape& shape, std::uint32_t ancestor_index,
                           std::vector<std::uint32_t> path);

inline VertexAddress canonicalize(const TreeShape& shape, const VertexAddress& v) {
    return canonicalize(shape, v.ancestor_index, v.path);
}

// Parent map. Returns nullopt exactly for the root of the rooted tree.
std::optional<VertexAddress> parent(const TreeShape& shape, const VertexAddress& v);

// First `count` children in canonical enumeration order. In the rootless
// tree, child 0 of ancestor j >= 1 is ancestor j-1 and comes first.
std::vector<VertexAddress> children(const TreeShape& shape, const VertexAddress& v,
                                    std::uint32_t count);

// Path length from the enclosing enumeration anchor (the k of N^k).
inline std::uint32_t generation_degree(const VertexAddress& v) {
    return static_cast<std::uint32_t>(v.path.size());
}

// All vertices reachable from v in <= depth steps through the first
// `breadth` children of each vertex; size sum_{i<=depth} breadth^i.
std::vector<VertexAddress> descendants_to_depth(const TreeShape& shape,
                                                const VertexAddress& v,
                                                std::uint32_t depth,
                                                std::uint32_t breadth);

}  // namespace shiftforge

#endif
