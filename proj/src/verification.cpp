#include "shiftforge/verification.hpp"

#include <algorithm>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace shiftforge {

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        default: return "unresolved";
    }
}

void parallel_for(std::size_t count, bool parallel,
                  const std::function<void(std::size_t)>& f) {
#ifdef _OPENMP
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (long i = 0; i < static_cast<long>(count); ++i)
            f(static_cast<std::size_t>(i));
        return;
    }
#else
    (void)parallel;
#endif
    for (std::size_t i = 0; i < count; ++i) f(i);
}

std::vector<VertexAddress> truncation_vertices(const ShiftModel& model,
                                               std::uint32_t depth,
                                               std::uint32_t breadth) {
    VertexAddress top;
    if (!model.rooted()) top.ancestor_index = depth;
    auto vertices = descendants_to_depth(model.shape(), top, depth, breadth);
    std::sort(vertices.begin(), vertices.end());
    return vertices;
}

// ---------------------------------------------------------------------------
// Shift action and path sums
// ---------------------------------------------------------------------------

FiniteVector basis_vector(const VertexAddress& u) {
    return FiniteVector{{VectorEntry{u, Rat(1), Interval(Rat(1))}}};
}

FiniteVector apply_shift(const ShiftModel& model, const FiniteVector& f,
                         std::uint32_t breadth) {
    if (breadth == 0) throw std::invalid_argument("apply_shift: breadth >= 1");
    FiniteVector out;
    for (const auto& entry : f.entries) {
        if (sgn(entry.scalar) == 0) continue;
        for (const auto& child : children(model.shape(), entry.vertex, breadth)) {
            auto lam = model.lambda_sq(child);
            if (!lam) continue;
            out.entries.push_back(
                VectorEntry{child, entry.scalar, entry.weight_sq * *lam});
        }
    }
    std::sort(out.entries.begin(), out.entries.end(),
              [](const VectorEntry& a, const VectorEntry& b) {
                  return a.vertex < b.vertex;
              });
    return out;
}

Interval sum_squared_coefficients(const FiniteVector& f) {
    Interval sum(Rat(0));
    for (const auto& e : f.entries)
        sum += Rat(e.scalar * e.scalar) * e.weight_sq;
    return sum;
}

PathSum path_sum(const ShiftModel& model, const VertexAddress& u, unsigned k,
                 std::uint32_t breadth, std::uint64_t horizon) {
    if (k == 0)
        return PathSum{Interval(Rat(1)), FiniteMoment{Interval(Rat(1))}};
    // Depth-first product accumulation over breadth^k paths.
    Interval total(Rat(0));
    std::function<void(const VertexAddress&, unsigned, const Interval&)> walk =
        [&](const VertexAddress& v, unsigned remaining, const Interval& prod) {
            for (const auto& child : children(model.shape(), v, breadth)) {
                auto lam = model.lambda_sq(child);
                if (!lam) continue;
                Interval next = prod * *lam;
                if (remaining == 1)
                    total += next;
                else
                    walk(child, remaining - 1, next);
            }
        };
    walk(u, k, Interval(Rat(1)));

    MeasurePtr mu = model.mu(u);
    if (auto cert = mu->divergence(static_cast<long>(k)))
        return PathSum{total, DivergentMoment{std::move(*cert)}};
    auto enc = moment_enclosure(*mu, static_cast<long>(k), horizon);
    if (!enc)
        return PathSum{total, FiniteMoment{Interval(total.lo, total.hi)}};
    return PathSum{total, FiniteMoment{Interval(total.lo, std::max(enc->hi, total.hi))}};
}

// ---------------------------------------------------------------------------
// Consistency
// ---------------------------------------------------------------------------

ConsistencyReport check_consistency(const ShiftModel& model,
                                    const VertexAddress& u,
                                    std::uint64_t horizon, const Rat& tolerance) {
    if (horizon == 0)
        throw std::invalid_argument("check_consistency: horizon must be >= 1");
    ConsistencyReport report;
    report.vertex = u;
    report.horizon = horizon;
    report.tolerance = tolerance;

    auto atoms = model.consistency_atoms(u, horizon);
    report.atoms_checked = atoms.size();
    for (const auto& owned : atoms) {
        auto lam = model.lambda_sq(owned.owner_child);
        if (!lam) throw std::logic_error("consistency: owner without weight");
        Interval rhs = (*lam * owned.child_mass) / Interval(owned.atom.support);
        Interval residual = owned.atom.mass - rhs;
        if (residual.contains_zero()) {
            ++report.zero_residuals;
        } else {
            report.offenders.push_back(AtomResidual{owned.atom.support,
                                                    owned.owner_child, residual,
                                                    false});
        }
    }

    Rat tail = model.consistency_tail_slack(u, horizon);
    // A perturbed weight below u shifts the unchecked child-side masses.
    if (auto* perturbed = dynamic_cast<const PerturbedModel*>(&model)) {
        for (const auto& [vertex, factor] : perturbed->factors()) {
            auto p = parent(model.shape(), vertex);
            if (p && *p == u) {
                auto t0 = model.mu(u)->tail_upper(0, horizon);
                Rat delta = abs(Rat(1 - factor));
                if (t0) tail += delta * *t0;
            }
        }
    }
    report.tail_bound = tail;

    if (!report.offenders.empty())
        report.verdict = Verdict::fail;
    else if (tail > tolerance)
        report.verdict = Verdict::unresolved;
    else
        report.verdict = Verdict::pass;
    return report;
}

// ---------------------------------------------------------------------------
// Moment profiles and verdicts
// ---------------------------------------------------------------------------

MomentProfile moment_profile(const ShiftModel& model, const VertexAddress& u,
                             std::uint64_t horizon) {
    MeasurePtr mu = model.mu(u);
    long n = static_cast<long>(model.order());
    auto eval = [&](long degree) -> MomentValue {
        if (auto cert = mu->divergence(degree))
            return DivergentMoment{std::move(*cert)};
        auto enc = moment_enclosure(*mu, degree, horizon);
        if (!enc)
            throw std::logic_error("moment_profile: no certificate, no tail");
        return FiniteMoment{*enc};
    };
    return MomentProfile{u, eval(n), eval(n + 1)};
}

DomainVerdict power_dense_verdict(const ShiftModel& model, unsigned k,
                                  std::uint32_t depth, std::uint32_t breadth,
                                  std::uint64_t horizon, bool parallel) {
    DomainVerdict verdict;
    verdict.check = "power_dense";
    verdict.degree = k;
    auto vertices = truncation_vertices(model, depth, breadth);
    verdict.vertices.resize(vertices.size());
    parallel_for(vertices.size(), parallel, [&](std::size_t i) {
        VertexMomentOutcome& out = verdict.vertices[i];
        out.vertex = vertices[i];
        MeasurePtr mu = model.mu(vertices[i]);
        if (auto cert = mu->divergence(static_cast<long>(k))) {
            out.finite = false;
            out.minorant_c = cert->minorant_coefficient();
            out.verdict = Verdict::fail;
            return;
        }
        auto enc = moment_enclosure(*mu, static_cast<long>(k), horizon);
        if (!enc) {
            out.verdict = Verdict::unresolved;
            return;
        }
        out.finite = true;
        out.enclosure = *enc;
        out.verdict = Verdict::pass;
    });
    verdict.verdict = Verdict::pass;
    for (const auto& v : verdict.vertices) {
        if (v.verdict == Verdict::fail) verdict.verdict = Verdict::fail;
        if (v.verdict == Verdict::unresolved && verdict.verdict == Verdict::pass)
            verdict.verdict = Verdict::unresolved;
    }
    return verdict;
}

DomainVerdict trivial_domain_verdict(const ShiftModel& model, unsigned k,
                                     std::uint32_t depth, std::uint32_t breadth,
                                     std::uint64_t horizon,
                                     const Rat& validate_bound, bool parallel) {
    DomainVerdict verdict;
    verdict.check = "trivial_domain";
    verdict.degree = k;
    auto vertices = truncation_vertices(model, depth, breadth);
    verdict.vertices.resize(vertices.size());
    parallel_for(vertices.size(), parallel, [&](std::size_t i) {
        VertexMomentOutcome& out = verdict.vertices[i];
        out.vertex = vertices[i];
        MeasurePtr mu = model.mu(vertices[i]);
        auto cert = mu->divergence(static_cast<long>(k));
        if (!cert) {
            // moment is certifiably finite at this degree
            out.finite = true;
            auto enc = moment_enclosure(*mu, static_cast<long>(k), horizon);
            if (enc) out.enclosure = *enc;
            out.verdict = Verdict::fail;
            return;
        }
        out.finite = false;
        out.minorant_c = cert->minorant_coefficient();
        out.certificate_validated = cert->validate(validate_bound);
        out.verdict = out.certificate_validated ? Verdict::pass : Verdict::fail;
    });
    verdict.verdict = Verdict::pass;
    for (const auto& v : verdict.vertices)
        if (v.verdict != Verdict::pass) verdict.verdict = Verdict::fail;
    return verdict;
}

InjectivityReport injectivity_witness(const ShiftModel& model,
                                      std::uint32_t depth, std::uint32_t breadth) {
    InjectivityReport report;
    report.verdict = Verdict::pass;
    for (const auto& v : truncation_vertices(model, depth, breadth)) {
        auto lam = model.lambda_sq(v);
        if (!lam) continue;  // rooted root
        report.lower_bounds.emplace_back(v, lam->lo);
        if (sgn(lam->lo) <= 0) report.verdict = Verdict::fail;
    }
    return report;
}

}  // namespace shiftforge
