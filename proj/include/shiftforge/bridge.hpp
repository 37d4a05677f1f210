#ifndef SHIFTFORGE_BRIDGE_HPP
#define SHIFTFORGE_BRIDGE_HPP

#include "shiftforge/verification.hpp"

#include <map>
#include <memory>
#include <mutex>

namespace shiftforge {

// Discrete measure space (V, m) with the parent map as the transformation:
// the composition-operator side of the construction. Point masses follow
// m(anchor) = 1 and m(v) = lambda_v^2 m(pa v), extended upward through the
// ancestor chain in the rootless case.
class CompositionModel {
public:
    CompositionModel(std::shared_ptr<const ShiftModel> model, VertexAddress anchor);

    const ShiftModel& model() const { return *model_; }
    const VertexAddress& anchor() const { return anchor_; }
    unsigned order() const { return model_->order(); }

    Interval point_mass(const VertexAddress& v) const;

    // phi = parent map; the rooted root is a fixed point so phi is total.
    VertexAddress transform(const VertexAddress& v) const;

    // m(v)/m(u) for u an ancestor of v, computed as the product of lambda^2
    // along the path (the telescoping form; no interval division).
    Interval mass_ratio(const VertexAddress& u, const VertexAddress& v) const;

private:
    std::shared_ptr<const ShiftModel> model_;
    VertexAddress anchor_;
    mutable std::mutex mutex_;
    mutable std::map<VertexAddress, Interval> masses_;
};

inline std::shared_ptr<CompositionModel> to_composition(
    std::shared_ptr<const ShiftModel> model, VertexAddress anchor) {
    return std::make_shared<CompositionModel>(std::move(model), std::move(anchor));
}

// sum over the breadth^k descendants v of u of m(v)/m(u): the k-step mass
// ratio governing membership of the u-indicator in dom(C^k).
PathSum composition_power_sum(const CompositionModel& cm, const VertexAddress& u,
                              unsigned k, std::uint32_t breadth,
                              std::uint64_t horizon);

struct EquivalenceReport {
    VertexAddress vertex;
    unsigned k = 0;
    Interval shift_side;
    Interval composition_side;
    Verdict verdict = Verdict::unresolved;
};

// Checks composition_power_sum against path_sum (they must agree as
// intervals up to the widths both sides carry).
EquivalenceReport equivalence_check(const ShiftModel& model,
                                    const CompositionModel& cm,
                                    const VertexAddress& u, unsigned k,
                                    std::uint32_t breadth, std::uint64_t horizon);

}  // namespace shiftforge

#endif
