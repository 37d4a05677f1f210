#include "shiftforge/bridge.hpp"

#include <functional>

namespace shiftforge {

CompositionModel::CompositionModel(std::shared_ptr<const ShiftModel> model,
                                   VertexAddress anchor)
    : model_(std::move(model)), anchor_(std::move(anchor)) {
    std::lock_guard lock(mutex_);
    masses_.emplace(anchor_, Interval(Rat(1)));
}

VertexAddress CompositionModel::transform(const VertexAddress& v) const {
    auto p = parent(model_->shape(), v);
    return p ? *p : v;  // rooted root is a fixed point of phi
}

Interval CompositionModel::point_mass(const VertexAddress& v) const {
    {
        std::lock_guard lock(mutex_);
        auto it = masses_.find(v);
        if (it != masses_.end()) return it->second;
    }
    Interval value(Rat(0));
    if (!model_->rooted() && v.path.empty() && v.ancestor_index > anchor_.ancestor_index) {
        // ancestors above the anchor: m(x_{j+1}) = m(x_j) / lambda^2_{x_j}
        VertexAddress below{v.ancestor_index - 1, {}};
        auto lam = model_->lambda_sq(below);
        value = point_mass(below) / *lam;
    } else {
        auto p = parent(model_->shape(), v);
        if (!p) throw std::invalid_argument("point_mass: vertex above the anchor");
        auto lam = model_->lambda_sq(v);
        if (!lam) throw std::invalid_argument("point_mass: rooted root reached");
        value = *lam * point_mass(*p);
    }
    std::lock_guard lock(mutex_);
    return masses_.emplace(v, value).first->second;
}

Interval CompositionModel::mass_ratio(const VertexAddress& u,
                                      const VertexAddress& v) const {
    Interval ratio(Rat(1));
    VertexAddress cursor = v;
    while (!(cursor == u)) {
        auto lam = model_->lambda_sq(cursor);
        auto p = parent(model_->shape(), cursor);
        if (!lam || !p)
            throw std::invalid_argument("mass_ratio: u is not an ancestor of v");
        ratio = ratio * *lam;
        cursor = *p;
        if (cursor.path.empty() && u.path.size() > 0 &&
            cursor.ancestor_index > u.ancestor_index + 64)
            throw std::invalid_argument("mass_ratio: u is not an ancestor of v");
    }
    return ratio;
}

PathSum composition_power_sum(const CompositionModel& cm, const VertexAddress& u,
                              unsigned k, std::uint32_t breadth,
                              std::uint64_t horizon) {
    if (k == 0)
        return PathSum{Interval(Rat(1)), FiniteMoment{Interval(Rat(1))}};
    const ShiftModel& model = cm.model();
    Interval total(Rat(0));
    std::function<void(const VertexAddress&, unsigned)> walk =
        [&](const VertexAddress& v, unsigned remaining) {
            for (const auto& child : children(model.shape(), v, breadth)) {
                if (remaining == 1)
                    total += cm.mass_ratio(u, child);
                else
                    walk(child, remaining - 1);
            }
        };
    walk(u, k);
    MeasurePtr mu = model.mu(u);
    if (auto cert = mu->divergence(static_cast<long>(k)))
        return PathSum{total, DivergentMoment{std::move(*cert)}};
    auto enc = moment_enclosure(*mu, static_cast<long>(k), horizon);
    if (!enc) return PathSum{total, FiniteMoment{total}};
    return PathSum{total,
                   FiniteMoment{Interval(total.lo, std::max(enc->hi, total.hi))}};
}

EquivalenceReport equivalence_check(const ShiftModel& model,
                                    const CompositionModel& cm,
                                    const VertexAddress& u, unsigned k,
                                    std::uint32_t breadth, std::uint64_t horizon) {
    EquivalenceReport report;
    report.vertex = u;
    report.k = k;
    PathSum shift_side = path_sum(model, u, k, breadth, horizon);
    PathSum comp_side = composition_power_sum(cm, u, k, breadth, horizon);
    report.shift_side = shift_side.partial;
    report.composition_side = comp_side.partial;
    report.verdict = shift_side.partial.overlaps(comp_side.partial)
                         ? Verdict::pass
                         : Verdict::fail;
    return report;
}

}  // namespace shiftforge
