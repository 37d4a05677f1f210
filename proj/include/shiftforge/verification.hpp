#ifndef SHIFTFORGE_VERIFICATION_HPP
#define SHIFTFORGE_VERIFICATION_HPP

#include "shiftforge/construction.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace shiftforge {

enum class Verdict { pass, fail, unresolved };
const char* verdict_name(Verdict v);

// ---------------------------------------------------------------------------
// Finite vectors and the shift action
// ---------------------------------------------------------------------------

// Finitely supported vector. On a tree no two edges feed the same vertex, so
// every coefficient of a shift iterate is a rational scalar times a product
// of weights; we bookkeep the product of squared weights exactly and never
// materialize square roots.
struct VectorEntry {
    VertexAddress vertex;
    Rat scalar;          // rational factor (carries the sign)
    Interval weight_sq;  // accumulated product of lambda^2 along the history
};

struct FiniteVector {
    std::vector<VectorEntry> entries;  // sorted by vertex, addresses distinct
};

FiniteVector basis_vector(const VertexAddress& u);

// Image under the shift, truncated to the first `breadth` children of each
// support vertex: the coefficient at child v is lambda_v * f(parent).
FiniteVector apply_shift(const ShiftModel& model, const FiniteVector& f,
                         std::uint32_t breadth);

// sum over entries of scalar^2 * weight_sq (exact interval arithmetic).
Interval sum_squared_coefficients(const FiniteVector& f);

// ---------------------------------------------------------------------------
// Path-product oracle
// ---------------------------------------------------------------------------

// Partial sum of prod(lambda^2) over the breadth^k paths of length k from u.
// By the consistency recursion this climbs to int s^k dmu_u as breadth grows,
// which is what makes it an oracle independent of the measure-side summation.
struct PathSum {
    Interval partial;
    MomentValue value;
};

PathSum path_sum(const ShiftModel& model, const VertexAddress& u, unsigned k,
                 std::uint32_t breadth, std::uint64_t horizon);

// ---------------------------------------------------------------------------
// Consistency recursion
// ---------------------------------------------------------------------------

struct AtomResidual {
    Rat support;
    VertexAddress owner;
    Interval residual;
    bool contains_zero;
};

struct ConsistencyReport {
    VertexAddress vertex;
    std::uint64_t horizon = 0;
    Rat tolerance;
    std::uint64_t atoms_checked = 0;
    std::uint64_t zero_residuals = 0;
    std::vector<AtomResidual> offenders;  // residuals excluding zero
    Rat tail_bound;
    Verdict verdict = Verdict::unresolved;
};

// Verifies mu_u(t) = lambda_v^2 * mu_v(t)/t atom by atom over the first
// `horizon` atoms of mu_u (v = the owning child); the tail bound certifies
// the enclosure discrepancy beyond the horizon. Pass iff every residual
// contains zero and the tail bound is at most `tolerance`; a too-large tail
// with clean residuals is unresolved, not a failure.
ConsistencyReport check_consistency(const ShiftModel& model,
                                    const VertexAddress& u,
                                    std::uint64_t horizon, const Rat& tolerance);

// ---------------------------------------------------------------------------
// Moment profiles and domain verdicts
// ---------------------------------------------------------------------------

struct MomentProfile {
    VertexAddress vertex;
    MomentValue degree_n;
    MomentValue degree_np1;
};

MomentProfile moment_profile(const ShiftModel& model, const VertexAddress& u,
                             std::uint64_t horizon);

struct VertexMomentOutcome {
    VertexAddress vertex;
    bool finite = false;
    std::optional<Interval> enclosure;  // finite case
    std::optional<Rat> minorant_c;      // divergent case
    bool certificate_validated = false;
    Verdict verdict = Verdict::unresolved;
};

struct DomainVerdict {
    std::string check;
    unsigned degree = 0;
    std::vector<VertexMomentOutcome> vertices;
    Verdict verdict = Verdict::unresolved;
};

// All degree-k moments certified finite on the truncation (the dense-power
// criterion; the full statement over the infinite tree is analytic).
DomainVerdict power_dense_verdict(const ShiftModel& model, unsigned k,
                                  std::uint32_t depth, std::uint32_t breadth,
                                  std::uint64_t horizon, bool parallel = false);

// Divergence certificates at degree k for every truncation vertex, each
// validated by summation past the given bound.
DomainVerdict trivial_domain_verdict(const ShiftModel& model, unsigned k,
                                     std::uint32_t depth, std::uint32_t breadth,
                                     std::uint64_t horizon,
                                     const Rat& validate_bound,
                                     bool parallel = false);

// Positive lower bounds of lambda^2 over the truncation (the injectivity
// witness).
struct InjectivityReport {
    std::vector<std::pair<VertexAddress, Rat>> lower_bounds;
    Verdict verdict = Verdict::unresolved;
};
InjectivityReport injectivity_witness(const ShiftModel& model,
                                      std::uint32_t depth, std::uint32_t breadth);

// Truncation vertex set in canonical (deterministic) order.
std::vector<VertexAddress> truncation_vertices(const ShiftModel& model,
                                               std::uint32_t depth,
                                               std::uint32_t breadth);

// Runs f(i) over [0, count) serially or with OpenMP; results must be written
// to preallocated slots so both engines produce identical output.
void parallel_for(std::size_t count, bool parallel,
                  const std::function<void(std::size_t)>& f);

}  // namespace shiftforge

#endif
