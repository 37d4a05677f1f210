#include "shiftforge/tree.hpp"

namespace shiftforge {

VertexAddress canonicalize(const TreeShape& shape, std::uint32_t ancestor_index,
                           std::vector<std::uint32_t> path) {
    if (shape.rooted && ancestor_index != 0)
        throw MalformedAddress("rooted model: ancestor_index must be 0");
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (path[i] == 0 && (shape.rooted || i != 0))
            throw MalformedAddress("zero path entry at position " +
                                   std::to_string(i + 1));
    }
    // (j, [0, rest]) -> (j-1, [rest]); a leading zero names the previous
    // anchor, which cannot itself be spelled with another leading zero.
    if (!path.empty() && path.front() == 0) {
        if (ancestor_index == 0)
            throw MalformedAddress("leading zero entry at the anchor");
        ancestor_index -= 1;
        path.erase(path.begin());
        if (!path.empty() && path.front() == 0)
            throw MalformedAddress("zero path entry at position 2");
    }
    return VertexAddress{ancestor_index, std::move(path)};
}

std::optional<VertexAddress> parent(const TreeShape& shape, const VertexAddress& v) {
    if (!v.path.empty()) {
        VertexAddress p = v;
        p.path.pop_back();
        return p;
    }
    if (shape.rooted) return std::nullopt;
    return VertexAddress{v.ancestor_index + 1, {}};
}

std::vector<VertexAddress> children(const TreeShape& shape, const VertexAddress& v,
                                    std::uint32_t count) {
    if (count == 0) throw std::invalid_argument("children: count must be >= 1");
    std::vector<VertexAddress> out;
    out.reserve(count);
    std::uint32_t next_fresh = 1;
    if (!shape.rooted && v.path.empty() && v.ancestor_index >= 1) {
        // w0 = previously built subtree root, i.e. the next anchor down.
        out.push_back(VertexAddress{v.ancestor_index - 1, {}});
    }
    while (out.size() < count) {
        VertexAddress c = v;
        c.path.push_back(next_fresh++);
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<VertexAddress> descendants_to_depth(const TreeShape& shape,
                                                const VertexAddress& v,
                                                std::uint32_t depth,
                                                std::uint32_t breadth) {
    std::vector<VertexAddress> out{v};
    std::size_t layer_begin = 0;
    for (std::uint32_t d = 0; d < depth; ++d) {
        std::size_t layer_end = out.size();
        for (std::size_t i = layer_begin; i < layer_end; ++i) {
            auto kids = children(shape, out[i], breadth);
            out.insert(out.end(), kids.begin(), kids.end());
        }
        layer_begin = layer_end;
    }
    return out;
}

VertexAddress parse_address(const std::string& s) {
    auto colon = s.find(':');
    if (colon == std::string::npos)
        throw MalformedAddress("address missing ':': " + s);
    VertexAddress v;
    try {
        v.ancestor_index =
            static_cast<std::uint32_t>(std::stoul(s.substr(0, colon)));
    } catch (const std::exception&) {
        throw MalformedAddress("bad ancestor index in: " + s);
    }
    std::size_t pos = colon + 1;
    while (pos < s.size()) {
        auto dot = s.find('.', pos);
        if (dot == std::string::npos) dot = s.size();
        try {
            v.path.push_back(
                static_cast<std::uint32_t>(std::stoul(s.substr(pos, dot - pos))));
        } catch (const std::exception&) {
            throw MalformedAddress("bad path entry in: " + s);
        }
        pos = dot + 1;
    }
    return v;
}

}  // namespace shiftforge
