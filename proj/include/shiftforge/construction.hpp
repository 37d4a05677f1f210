#ifndef SHIFTFORGE_CONSTRUCTION_HPP
#define SHIFTFORGE_CONSTRUCTION_HPP

#include "shiftforge/allocator.hpp"
#include "shiftforge/interval.hpp"
#include "shiftforge/measure.hpp"
#include "shiftforge/pairing.hpp"
#include "shiftforge/tree.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

namespace shiftforge {

// Index node within one rooted subtree: a tuple in N^k, empty = subtree root.
using Node = std::vector<std::uint32_t>;

class SubtreeContext;
using ContextPtr = std::shared_ptr<const SubtreeContext>;

// ---------------------------------------------------------------------------
// Omega streams
// ---------------------------------------------------------------------------

// The canonical enumeration of Omega_x: the inherited t-point first (x not
// the subtree root), then the interleave of component gap measures, where
// component 1 is Delta_x itself and components >= 2 walk the levels of
// extensions x.z by the Cantor diagonal over (level, suffix code).
//
// Raw masses are exact rationals c_w / (i (i+1) a_i^{m_w}); components whose
// dyadic scaling exponent exceeds kDustExponent are kept as enclosures
// [0, 2^-kDustExponent * beta_i] instead of materializing gigantic exact
// denominators. Such dust components are far below every tolerance in use.
class OmegaStream {
public:
    static constexpr unsigned long kDustExponent = 2048;

    OmegaStream(const SubtreeContext* ctx, Node base);

    const Node& base() const { return base_; }
    std::size_t base_level() const { return base_.size(); }
    bool has_t_atom() const { return !base_.empty(); }

    struct RawAtom {
        Rat support;
        Interval raw_mass;  // point interval unless dust
        OriginKey origin;
        Node comp_node;  // node whose Delta the atom belongs to
        Int comp_index;  // index within that gap measure
    };

    RawAtom raw_atom(std::uint64_t slot) const;  // 1-based canonical order

    // Certified upper bound of sum over slots > N of raw_mass * support^q,
    // for q <= base_level + n. Monotone nonincreasing in N.
    Rat raw_tail(long q, std::uint64_t N) const;

    // Component rank of the Delta of `node` within this stream (node must
    // equal base_ or extend it); rank 1 is Delta_base.
    Int comp_rank(const Node& node) const;
    // Stream slot of the i-th atom of component `rank`.
    Int slot_of(const Int& rank, const Int& index) const;

private:
    friend class SubtreeContext;
    struct Component {
        Node node;
        Int scaling_exponent;       // c = 2^-e
        bool dust;                  // e > kDustExponent
        Rat c;                      // exact scaling if not dust
        std::shared_ptr<const GapMeasure> gap;
    };
    const Component& component(const Int& rank) const;

    // Upper bound of the level-p slice remainder sum over z in N^p with
    // suffix code >= m of the scalings c_{base.z}. The full pairing code is
    // strictly increasing in the suffix code, so the remainder is below
    // 2^-(k+p) * 2^-xi(base.z_m) with z_m the code-m suffix. Touched
    // components always form a code prefix per level (diagonal order).
    Rat slice_remainder(long p, const Int& m) const;

    const SubtreeContext* ctx_;
    Node base_;
    Int slice_code_;
    mutable std::mutex mutex_;
    mutable std::map<Int, Component> comps_;
};

// ---------------------------------------------------------------------------
// Tilt measures  (Lemma-sq3 type probability measures)
// ---------------------------------------------------------------------------

// mu_x: the degree-k tilted restriction of nu to Omega_x, normalized:
// mass at atom t is raw_mass(t) * t^k / I_x with I_x = int_{Omega_x} s^k dnu.
// For the subtree root (k = 0) this is nu itself, normalized by its total.
class TiltMeasure final : public DiscreteMeasure {
public:
    TiltMeasure(ContextPtr ctx, Node node);

    const Node& node() const { return node_; }
    const Interval& normalizer() const { return normalizer_; }

    Atom atom(std::uint64_t i) const override;
    Rat support_floor() const override;
    std::optional<Rat> tail_upper(long degree, std::uint64_t n) const override;
    std::optional<DivergenceCertificate> divergence(long degree) const override;
    bool provably_absent(const Rat& support) const override;
    std::optional<Interval> exact_moment(long degree) const override;
    std::optional<Interval> refined_moment(long degree, long rel_exp) const override;
    std::string describe() const override;

private:
    ContextPtr ctx_;
    Node node_;
    long k_;
    Interval normalizer_;  // I_x at the parent-tier policy
};

// ---------------------------------------------------------------------------
// Subtree context
// ---------------------------------------------------------------------------

// One rooted extremal subtree carrying the full Lemma sq1-sq3 pipeline for a
// given order n and support floor theta. All quantities are memoized behind
// deterministic precision policies, so values are independent of evaluation
// order and thread interleaving.
class SubtreeContext : public std::enable_shared_from_this<SubtreeContext> {
public:
    // Relative-width targets of the adaptive enclosures.
    static constexpr long kParentRelExp = 14;  // normalizers of checked vertices
    static constexpr long kChildRelExp = 10;   // child-side consistency masses

    SubtreeContext(unsigned n, Rat theta, Int subtree_index);

    unsigned order() const { return n_; }
    const Rat& theta() const { return theta_; }
    const Int& subtree_index() const { return subtree_; }

    AllocKey key_for(const Node& node) const { return AllocKey{subtree_, node}; }

    // Dyadic scaling exponent of nu_x: c_x = 2^-e with e = 1 for the root
    // and e = k + xi_k(x) + 1 for x in N^k.
    Int scaling_exponent(const Node& node) const;
    Rat scaling(const Node& node) const;  // throws on dust-deep nodes

    std::shared_ptr<const GapMeasure> gap_component(const Node& node) const;
    MeasurePtr nu_component(const Node& node) const;  // c_x * gap(k+n)

    const OmegaStream& omega(const Node& node) const;

    // Adaptive enclosure of int_{Omega_x} s^q d(nu_raw), relative width
    // <= 2^-rel_exp. Deterministic in (node, q, rel_exp).
    Interval raw_omega_integral(const Node& node, long q, long rel_exp) const;

    // Z = nu_raw(R+); the subtree-root tilt normalizer.
    Interval total_raw_mass() const;

    // I_x at parent tier (used by mu) and child tier (consistency RHS).
    Interval tilt_normalizer(const Node& node) const;
    Interval tilt_normalizer_child(const Node& node) const;

    MeasurePtr mu(const Node& node) const;
    Interval lambda_sq(const Node& node) const;  // node nonempty

    // Exact interval of the child-side mass of a raw atom in mu_child.
    Interval child_mass(const Node& child, const OmegaStream::RawAtom& atom) const;

    // t-point resolution: the gap atom serving as t_x (x nonempty).
    std::pair<Node, Int> t_point(const Node& x) const;

    // Membership of the i-th atom of Delta_y in Omega_x.
    bool omega_contains(const Node& y, const Int& atom_index, const Node& x) const;

    // The unique child of x owning a given atom of Omega_x.
    Node owning_child(const Node& x, const Node& y, const Int& atom_index) const;

    // Decode an arbitrary support: the (node, index) of the gap atom, if it
    // belongs to this subtree's allocation at all.
    std::optional<std::pair<Node, Int>> decode_atom(const Rat& support) const;

private:
    friend class OmegaStream;
    friend class TiltMeasure;

    struct Cursor {
        DyadicAcc acc;
        std::uint64_t pos = 0;
    };
    Interval raw_integral_at(const OmegaStream& stream, Cursor& cursor, long q,
                             std::uint64_t N) const;

    unsigned n_;
    Rat theta_;
    Int subtree_;

    mutable std::mutex mutex_;
    mutable std::map<Node, std::shared_ptr<OmegaStream>> streams_;
    mutable std::map<std::tuple<Node, long, long>, Interval> integrals_;
    mutable std::map<Node, MeasurePtr> mus_;
    mutable std::map<Node, Interval> lambda_sq_;
};

// ---------------------------------------------------------------------------
// Rootless chain (Lemma sq4 iterated)
// ---------------------------------------------------------------------------

class RootlessChain;

// mu at the j-th ancestor of the anchor: the lambda^2-weighted 1/s-mixture
// of its children's measures. Component 1 is the previously built child
// (the anchor chain), components >= 2 are fresh sibling subtrees with
// theta_i = (i+1)^2.
class AncestorMeasure final : public DiscreteMeasure {
public:
    AncestorMeasure(const RootlessChain* chain, std::uint32_t level);

    std::uint32_t level() const { return level_; }

    Atom atom(std::uint64_t i) const override;
    Rat support_floor() const override { return Rat(1); }
    std::optional<Rat> tail_upper(long degree, std::uint64_t n) const override;
    std::optional<DivergenceCertificate> divergence(long degree) const override;
    bool provably_absent(const Rat& support) const override;
    std::optional<Interval> exact_moment(long degree) const override;
    std::optional<Interval> refined_moment(long degree, long rel_exp) const override;
    std::string describe() const override;

    // Child measure and coefficient by component rank (1 = anchor chain,
    // r >= 2 = fresh sibling r-1).
    MeasurePtr child_measure(const Int& rank) const;
    Interval child_coefficient(const Int& rank) const;

private:
    const RootlessChain* chain_;
    std::uint32_t level_;
    mutable std::mutex mutex_;
    mutable std::optional<Interval> cached_degree_n_;
};

class RootlessChain {
public:
    explicit RootlessChain(unsigned n);

    unsigned order() const { return n_; }

    // theta of sibling i >= 1 at any level: (i+1)^2; theta_0 = 1.
    static Rat sibling_theta(std::uint32_t i) {
        return Rat((i + 1)) * Rat((i + 1));
    }

    ContextPtr anchor_context() const { return anchor_; }
    ContextPtr sibling_context(std::uint32_t level, std::uint32_t sibling) const;

    // mu on the anchor chain: level 0 = anchor subtree root, level j >= 1 =
    // the AncestorMeasure built by the j-th application of the extension.
    MeasurePtr chain_measure(std::uint32_t level) const;

    // zeta of the level-j extension (j >= 1).
    Interval zeta(std::uint32_t level) const;

    // Squared weight of the edge into child w_i at level j >= 1:
    // lambda^2 = 1 / (zeta_j * theta_i * int s^{n-1} d mu_{w_i}).
    Interval chain_lambda_sq(std::uint32_t level, std::uint32_t sibling) const;

    // int s^{n-1} d mu_{w_i} at level j (sibling 0 = previous chain measure).
    Interval sibling_moment_nm1(std::uint32_t level, std::uint32_t sibling) const;

    // lambda-tilde^2_i * int s^{d-1} dmu_{w_i}: for fresh siblings this is
    // the raw-integral ratio rawM_{d-1} / (theta_i rawM_{n-1}) in which the
    // subtree normalizer cancels, so any relative width is reachable.
    Interval chain_term(std::uint32_t level, std::uint32_t sibling, long degree,
                        long rel_exp) const;

    unsigned n_;

private:
    friend class AncestorMeasure;

    ContextPtr anchor_;
    mutable std::mutex mutex_;
    mutable std::map<std::pair<std::uint32_t, std::uint32_t>, ContextPtr> siblings_;
    mutable std::map<std::uint32_t, MeasurePtr> chain_measures_;
    mutable std::map<std::uint32_t, Interval> zetas_;
    mutable std::map<std::pair<std::uint32_t, std::uint32_t>, Interval> lambdas_;
};

// ---------------------------------------------------------------------------
// ShiftModel
// ---------------------------------------------------------------------------

// The assembled model of the main construction: tree shape, squared-weight
// family, measure family, epsilon family (identically zero). Lazy: any
// canonical vertex can be queried; nothing infinite is materialized.
class ShiftModel {
public:
    static std::shared_ptr<const ShiftModel> assemble(unsigned n, bool rooted);

    unsigned order() const { return n_; }
    const TreeShape& shape() const { return shape_; }

    MeasurePtr mu(const VertexAddress& v) const;
    // Squared weight of the edge into v; nullopt exactly at the rooted root.
    virtual std::optional<Interval> lambda_sq(const VertexAddress& v) const;
    Rat epsilon(const VertexAddress&) const { return Rat(0); }

    // Everything check_consistency needs about one enumerated atom of mu_u.
    struct OwnedAtom {
        Atom atom;                  // atom of mu_u
        VertexAddress owner_child;  // unique child whose mu owns the support
        Interval child_mass;        // mass of the atom in mu_{owner_child}
    };
    std::vector<OwnedAtom> consistency_atoms(const VertexAddress& u,
                                             std::uint64_t horizon) const;

    // Certified bound on the enclosure discrepancy of the consistency
    // identity over atoms beyond the horizon (see check_consistency).
    Rat consistency_tail_slack(const VertexAddress& u, std::uint64_t horizon) const;

    virtual ~ShiftModel() = default;

    // Manifest fields.
    bool rooted() const { return shape_.rooted; }
    static std::string theta_sequence_description(bool rooted);

protected:
    ShiftModel(unsigned n, bool rooted);
    ShiftModel(const ShiftModel&) = default;

    unsigned n_;
    TreeShape shape_;
    ContextPtr rooted_ctx_;                 // rooted model
    std::shared_ptr<RootlessChain> chain_;  // rootless model

    // Vertex -> (context, node) for vertices inside rooted subtrees.
    std::pair<ContextPtr, Node> locate(const VertexAddress& v) const;
    bool is_ancestor_vertex(const VertexAddress& v) const {
        return !shape_.rooted && v.path.empty() && v.ancestor_index >= 1;
    }
};

// Wrapper scaling selected squared weights; measures are untouched. Used by
// the mutation checks: halving one lambda^2 must break (and only break) the
// consistency identity at the parent vertex.
class PerturbedModel final : public ShiftModel {
public:
    PerturbedModel(std::shared_ptr<const ShiftModel> base,
                   std::map<VertexAddress, Rat> factors);

    std::optional<Interval> lambda_sq(const VertexAddress& v) const override;
    const std::map<VertexAddress, Rat>& factors() const { return factors_; }
    const ShiftModel& base() const { return *base_; }

private:
    std::shared_ptr<const ShiftModel> base_;
    std::map<VertexAddress, Rat> factors_;
};

}  // namespace shiftforge

#endif
