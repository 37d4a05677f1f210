#include "shiftforge/tree.hpp"

#include <doctest.h>

using namespace shiftforge;

namespace {
const TreeShape kRooted{true};
const TreeShape kRootless{false};
}  // namespace

TEST_CASE("canonicalize fixes the w0-identification") {
    CHECK(canonicalize(kRooted, 0, {}) == VertexAddress{0, {}});
    CHECK(canonicalize(kRootless, 1, {0}) == VertexAddress{0, {}});
    CHECK(canonicalize(kRootless, 2, {0, 3}) == (VertexAddress{1, {3}}));
    // idempotence on a sample of well-formed inputs
    for (std::uint32_t j = 0; j < 4; ++j) {
        for (std::vector<std::uint32_t> path :
             {std::vector<std::uint32_t>{}, {1}, {2, 5}, {3, 1, 1}}) {
            auto once = canonicalize(kRootless, j, path);
            auto twice = canonicalize(kRootless, once.ancestor_index, once.path);
            CHECK(once == twice);
        }
    }
}

TEST_CASE("canonicalize rejects malformed addresses") {
    CHECK_THROWS_AS(canonicalize(kRooted, 0, {0}), MalformedAddress);
    CHECK_THROWS_AS(canonicalize(kRooted, 1, {1}), MalformedAddress);
    CHECK_THROWS_AS(canonicalize(kRootless, 2, {1, 0}), MalformedAddress);
    CHECK_THROWS_AS(canonicalize(kRootless, 2, {0, 0}), MalformedAddress);
    CHECK_THROWS_AS(canonicalize(kRootless, 0, {0, 3}), MalformedAddress);
}

TEST_CASE("parent drops the last step") {
    CHECK(*parent(kRooted, {0, {2, 5}}) == (VertexAddress{0, {2}}));
    CHECK_FALSE(parent(kRooted, {0, {}}).has_value());
    CHECK(*parent(kRootless, {0, {}}) == (VertexAddress{1, {}}));
    CHECK(*parent(kRootless, {3, {7}}) == (VertexAddress{3, {}}));
}

TEST_CASE("children enumerate canonically") {
    auto rooted_kids = children(kRooted, {0, {}}, 3);
    REQUIRE(rooted_kids.size() == 3);
    CHECK(rooted_kids[0] == (VertexAddress{0, {1}}));
    CHECK(rooted_kids[1] == (VertexAddress{0, {2}}));
    CHECK(rooted_kids[2] == (VertexAddress{0, {3}}));

    auto chain_kids = children(kRootless, {1, {}}, 2);
    REQUIRE(chain_kids.size() == 2);
    CHECK(chain_kids[0] == (VertexAddress{0, {}}));  // w0 = anchor
    CHECK(chain_kids[1] == (VertexAddress{1, {1}}));

    CHECK(children(kRooted, {0, {2}}, 1)[0] == (VertexAddress{0, {2, 1}}));
    CHECK_THROWS_AS(children(kRooted, {0, {}}, 0), std::invalid_argument);
}

TEST_CASE("parent of children recovers the vertex") {
    for (const auto& shape : {kRooted, kRootless}) {
        VertexAddress v{shape.rooted ? 0u : 2u, {3, 1}};
        for (const auto& c : children(shape, v, 5)) CHECK(*parent(shape, c) == v);
    }
    // rootless chain link: child 0 of (j,[]) is (j-1,[])
    for (std::uint32_t j = 1; j <= 4; ++j) {
        auto kids = children(kRootless, {j, {}}, 1);
        CHECK(kids[0] == (VertexAddress{j - 1, {}}));
        CHECK(*parent(kRootless, kids[0]) == (VertexAddress{j, {}}));
    }
}

TEST_CASE("generation degree is the path length") {
    CHECK(generation_degree({0, {}}) == 0);
    CHECK(generation_degree({0, {4, 7}}) == 2);
    CHECK(generation_degree({1, {2}}) == 1);
    VertexAddress v{0, {2}};
    for (const auto& c : children(kRooted, v, 4))
        CHECK(generation_degree(c) == generation_degree(v) + 1);
}

TEST_CASE("descendants_to_depth counts sum of powers") {
    VertexAddress v{0, {}};
    CHECK(descendants_to_depth(kRooted, v, 0, 5) ==
          std::vector<VertexAddress>{v});
    auto one = descendants_to_depth(kRooted, v, 1, 2);
    REQUIRE(one.size() == 3);
    CHECK(one[1] == (VertexAddress{0, {1}}));
    CHECK(one[2] == (VertexAddress{0, {2}}));
    CHECK(descendants_to_depth(kRooted, v, 2, 2).size() == 7);
    CHECK(descendants_to_depth(kRootless, {2, {}}, 2, 3).size() == 13);
}

TEST_CASE("address serialization round-trips") {
    CHECK(format_address({0, {}}) == "0:");
    CHECK(format_address({1, {3, 2}}) == "1:3.2");
    CHECK(parse_address("0:") == (VertexAddress{0, {}}));
    CHECK(parse_address("1:3.2") == (VertexAddress{1, {3, 2}}));
    CHECK_THROWS_AS(parse_address("nonsense"), MalformedAddress);
}
