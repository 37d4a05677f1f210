#ifndef SHIFTFORGE_MEASURE_HPP
#define SHIFTFORGE_MEASURE_HPP

#include "shiftforge/allocator.hpp"
#include "shiftforge/interval.hpp"
#include "shiftforge/rational.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace shiftforge {

struct PrecisionUnreachable : std::runtime_error {
    Rat best_width;
    explicit PrecisionUnreachable(Rat w)
        : std::runtime_error("precision unreachable; best width " +
                             rat_to_string(w)),
          best_width(std::move(w)) {}
};

struct Unresolved : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DisjointnessViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Identifies the gap-measure atom an Atom ultimately came from. Mixtures,
// pushes and tilts reuse the inner origin, so equality of origins means
// equality of underlying atoms.
struct OriginKey {
    Int xi;     // allocation key bijection value
    Int index;  // atom index within that gap measure

    bool operator==(const OriginKey&) const = default;
    std::string to_string() const {
        return xi.get_str() + "#" + index.get_str();
    }
};

struct Atom {
    Rat support;
    Interval mass;
    OriginKey origin;
};

// ---------------------------------------------------------------------------
// Divergence certificates
// ---------------------------------------------------------------------------

// One checkable piece of a divergence claim: `lower_bound` is a certified
// lower bound for the sum of the measure's moment-series terms over a range
// of stream positions ending at `stream_end` (ranges of consecutive pieces
// are disjoint and increasing). Early pieces are literal series terms;
// deep pieces of harmonic certificates group a dyadic index block through
// the minorant c/(i+i0), which is still a finite sum of term lower bounds.
struct DivergencePiece {
    Rat lower_bound;
    Int stream_end;
};

class DivergenceCertificate {
public:
    using PieceFn = std::function<DivergencePiece(std::uint64_t)>;

    DivergenceCertificate(Rat minorant_c, Int minorant_i0, PieceFn pieces)
        : c_(std::move(minorant_c)), i0_(std::move(minorant_i0)),
          pieces_(std::move(pieces)) {
        if (sgn(c_) <= 0)
            throw std::invalid_argument("divergence certificate: c <= 0");
    }

    const Rat& minorant_coefficient() const { return c_; }
    const Int& minorant_offset() const { return i0_; }
    DivergencePiece piece(std::uint64_t j) const { return pieces_(j); }

    // Smallest piece-aligned stream index N(B) whose certified partial sum
    // exceeds B. Total for every positive rational B by construction.
    Int index_for_bound(const Rat& bound) const;

    // Re-runs the accumulation to N(B) and checks the claim.
    bool validate(const Rat& bound) const;

private:
    Rat c_;
    Int i0_;
    PieceFn pieces_;
};

// Builds the standard certificate kind: `term(i)` is an exact lower bound of
// the i-th sub-series term, term(i) >= c/(i+i0) holds for all i, and
// `position(i)` maps sub-series indices into the measure's atom stream.
DivergenceCertificate make_harmonic_certificate(
    Rat c, Int i0, std::function<Rat(std::uint64_t)> term,
    std::function<Int(const Int&)> position);

DivergenceCertificate scale_certificate(const DivergenceCertificate& cert,
                                        const Rat& factor);

DivergenceCertificate remap_certificate(const DivergenceCertificate& cert,
                                        std::function<Int(const Int&)> position);

struct FiniteMoment {
    Interval value;
};
struct DivergentMoment {
    DivergenceCertificate cert;
};
using MomentValue = std::variant<FiniteMoment, DivergentMoment>;

inline bool is_finite(const MomentValue& m) {
    return std::holds_alternative<FiniteMoment>(m);
}
inline const Interval& finite_value(const MomentValue& m) {
    return std::get<FiniteMoment>(m).value;
}
inline const DivergenceCertificate& divergence_cert(const MomentValue& m) {
    return std::get<DivergentMoment>(m).cert;
}

// ---------------------------------------------------------------------------
// Stream schedule
// ---------------------------------------------------------------------------

// Fair interleave of countably many component streams into one canonical
// atom order. Component 1 (the dominant one in every measure we build) takes
// every odd slot; even slots walk the Cantor diagonal over components >= 2.
// All maps are closed-form so tail bounds at arbitrary truncation indices
// never require enumeration.
namespace schedule {

inline Int triangle(const Int& m) { return m * (m + 1) / 2; }

// Largest t >= 0 with triangle(t) <= m (m >= 0).
inline Int triangle_inv(const Int& m) {
    Int w = isqrt(Int(8 * m + 1));
    Int t = (w - 1) / 2;
    while (triangle(t + 1) <= m) ++t;
    while (triangle(t) > m) --t;
    return t;
}

struct CompIndex {
    Int comp;   // 1-based
    Int index;  // 1-based within component
};

// slot n >= 1  ->  (component, index)
inline CompIndex slot_to_comp(const Int& slot) {
    if (mpz_odd_p(slot.get_mpz_t()))
        return CompIndex{Int(1), Int((slot + 1) / 2)};
    Int q = slot / 2;  // q >= 1: diagonal position among comps >= 2
    Int d = triangle_inv(Int(q - 1));
    Int s = q - triangle(d);  // 1..d+1
    return CompIndex{Int(s + 1), Int(d + 2 - s)};
}

inline Int comp_to_slot(const Int& comp, const Int& index) {
    if (comp == 1) return Int(2 * index - 1);
    Int s = comp - 1;
    Int d = s + index - 1;  // diagonal number
    Int q = triangle(Int(d - 1)) + s;
    return Int(2 * q);
}

// Number of atoms of component `comp` among the first N slots.
inline Int comp_depth(const Int& comp, const Int& N) {
    if (N <= 0) return Int(0);
    if (comp == 1) return Int((N + 1) / 2);
    Int Q = N / 2;
    Int s = comp - 1;
    if (Q < s) return Int(0);
    // slots q = triangle(d-1) + s for diagonals d >= s
    Int dmax = triangle_inv(Int(Q - s)) + 1;
    if (dmax < s) return Int(0);
    return Int(dmax - s + 1);
}

// Number of components touched within the first N slots.
inline Int comps_touched(const Int& N) {
    if (N <= 0) return Int(0);
    Int Q = N / 2;
    if (Q == 0) return Int(1);
    Int d = triangle_inv(Q);      // completed diagonals
    Int r = Q - triangle(d);      // progress into diagonal d+1
    Int cols = (r > d) ? r : d;   // r <= d+1
    return Int(1 + cols);
}

}  // namespace schedule

// ---------------------------------------------------------------------------
// DiscreteMeasure
// ---------------------------------------------------------------------------

class DiscreteMeasure {
public:
    virtual ~DiscreteMeasure() = default;

    // i-th atom, 1-based, in the measure's canonical order.
    virtual Atom atom(std::uint64_t i) const = 0;

    // Number of atoms if finite; almost all measures here are infinite.
    virtual std::optional<std::uint64_t> atom_count() const { return std::nullopt; }

    virtual Rat support_floor() const = 0;

    // Certified upper bound of sum_{i>N} mass_i * support_i^degree, or
    // nullopt when that tail is infinite.
    virtual std::optional<Rat> tail_upper(long degree, std::uint64_t n) const = 0;

    // Divergence certificate derived from construction metadata; never
    // inferred from numeric growth.
    virtual std::optional<DivergenceCertificate> divergence(long degree) const = 0;

    // Exact-zero proof that no atom of this measure ever has this support.
    virtual bool provably_absent(const Rat& support) const { return false; }

    // Moments known exactly from construction metadata (e.g. the total mass
    // of a measure normalized by its own enclosed total is exactly 1).
    virtual std::optional<Interval> exact_moment(long) const { return std::nullopt; }

    // Finite moments computed through construction-side ratio identities in
    // which normalizers cancel symbolically; unlike the horizon-based
    // enclosure, these reach any relative width. Used by internal adaptive
    // computations; nullopt when no such route exists.
    virtual std::optional<Interval> refined_moment(long /*degree*/,
                                                   long /*rel_exp*/) const {
        return std::nullopt;
    }

    virtual std::string describe() const = 0;

    std::vector<Atom> atoms(std::uint64_t n) const;
    Interval mass_at(const Rat& support, std::uint64_t horizon) const;
};

using MeasurePtr = std::shared_ptr<const DiscreteMeasure>;

// Enclosure of the degree-d moment by partial sum + tail bound at a fixed
// truncation. Returns nullopt when the tail is declared infinite.
std::optional<Interval> moment_enclosure(const DiscreteMeasure& mu, long degree,
                                         std::uint64_t horizon);

// Full moment contract: divergence certificate when construction metadata
// provides one, else a Finite enclosure of width <= precision, else
// PrecisionUnreachable carrying the best width at this horizon.
MomentValue moment(const DiscreteMeasure& mu, long degree, const Rat& precision,
                   std::uint64_t horizon);

inline MomentValue total_mass(const DiscreteMeasure& mu, const Rat& precision,
                              std::uint64_t horizon) {
    return moment(mu, 0, precision, horizon);
}

// ---------------------------------------------------------------------------
// Concrete measures
// ---------------------------------------------------------------------------

class DiracMeasure final : public DiscreteMeasure {
public:
    DiracMeasure(Rat support, Interval mass, OriginKey origin = {Int(-1), Int(1)})
        : atom_{std::move(support), std::move(mass), std::move(origin)} {
        if (atom_.support < 1)
            throw std::invalid_argument("dirac: support must be >= 1");
    }

    Atom atom(std::uint64_t i) const override;
    std::optional<std::uint64_t> atom_count() const override { return 1; }
    Rat support_floor() const override { return atom_.support; }
    std::optional<Rat> tail_upper(long, std::uint64_t n) const override;
    std::optional<DivergenceCertificate> divergence(long) const override {
        return std::nullopt;
    }
    bool provably_absent(const Rat& support) const override {
        return support != atom_.support;
    }
    std::string describe() const override;

private:
    Atom atom_;
};

// The workhorse: discrete measure with atoms on the allocator schedule
// a_i = theta + (i-1) + xi/(xi+1) and masses 1/(i(i+1) a_i^m). The degree-m
// moment telescopes to exactly 1 (partial sums N/(N+1)); degree m+1 carries
// the harmonic minorant 1/(i+1).
class GapMeasure final : public DiscreteMeasure {
public:
    GapMeasure(unsigned m, Rat theta, AllocKey key);

    unsigned gap_degree() const { return m_; }
    const Rat& theta() const { return theta_; }
    const AllocKey& key() const { return key_; }
    const Int& xi() const { return xi_; }

    Rat support_at(const Int& i) const { return alloc_support(theta_, xi_, i); }
    // Exact mass as a rational (the Interval in Atom is a point).
    Rat mass_value(const Int& i) const;
    // Exact term mass_i * support_i^degree.
    Rat term_value(const Int& i, long degree) const;

    Atom atom(std::uint64_t i) const override;
    Rat support_floor() const override { return theta_; }
    std::optional<Rat> tail_upper(long degree, std::uint64_t n) const override;
    std::optional<DivergenceCertificate> divergence(long degree) const override;
    bool provably_absent(const Rat& support) const override;
    std::string describe() const override;

private:
    unsigned m_;
    Rat theta_;
    AllocKey key_;
    Int xi_;
};

// Scales every mass by a positive interval coefficient.
class ScaledMeasure final : public DiscreteMeasure {
public:
    ScaledMeasure(Interval coeff, MeasurePtr inner)
        : coeff_(std::move(coeff)), inner_(std::move(inner)) {
        if (!coeff_.strictly_positive())
            throw std::invalid_argument("scaled measure: coefficient <= 0");
    }

    const Interval& coefficient() const { return coeff_; }
    const MeasurePtr& inner() const { return inner_; }

    Atom atom(std::uint64_t i) const override;
    std::optional<std::uint64_t> atom_count() const override {
        return inner_->atom_count();
    }
    Rat support_floor() const override { return inner_->support_floor(); }
    std::optional<Rat> tail_upper(long degree, std::uint64_t n) const override;
    std::optional<DivergenceCertificate> divergence(long degree) const override;
    bool provably_absent(const Rat& support) const override {
        return inner_->provably_absent(support);
    }
    std::string describe() const override;

private:
    Interval coeff_;
    MeasurePtr inner_;
};

// Masses divided by the enclosed total mass; built by normalize().
class NormalizedMeasure final : public DiscreteMeasure {
public:
    NormalizedMeasure(MeasurePtr inner, Interval total)
        : inner_(std::move(inner)), total_(std::move(total)) {
        if (!total_.strictly_positive())
            throw std::invalid_argument("normalize: total mass not positive");
    }

    const Interval& total() const { return total_; }

    Atom atom(std::uint64_t i) const override;
    std::optional<std::uint64_t> atom_count() const override {
        return inner_->atom_count();
    }
    Rat support_floor() const override { return inner_->support_floor(); }
    std::optional<Rat> tail_upper(long degree, std::uint64_t n) const override;
    std::optional<DivergenceCertificate> divergence(long degree) const override;
    bool provably_absent(const Rat& support) const override {
        return inner_->provably_absent(support);
    }
    std::string describe() const override;

private:
    MeasurePtr inner_;
    Interval total_;
};

// The 1/s transform: same supports, masses divided by their support. The
// degree-d data of the image is the degree-(d-1) data of the source.
class HarmonicPushMeasure final : public DiscreteMeasure {
public:
    explicit HarmonicPushMeasure(MeasurePtr inner) : inner_(std::move(inner)) {
        if (inner_->support_floor() < 1)
            throw std::invalid_argument("harmonic push: support floor < 1");
    }

    const MeasurePtr& inner() const { return inner_; }

    Atom atom(std::uint64_t i) const override;
    std::optional<std::uint64_t> atom_count() const override {
        return inner_->atom_count();
    }
    Rat support_floor() const override { return inner_->support_floor(); }
    std::optional<Rat> tail_upper(long degree, std::uint64_t n) const override {
        return inner_->tail_upper(degree - 1, n);
    }
    std::optional<DivergenceCertificate> divergence(long degree) const override {
        return inner_->divergence(degree - 1);
    }
    bool provably_absent(const Rat& support) const override {
        return inner_->provably_absent(support);
    }
    std::string describe() const override;

private:
    MeasurePtr inner_;
};

// Generic finite mixture sum_i coeff_i * mu_i with pairwise disjoint atom
// supports, interleaved by the canonical schedule. Used directly by tests
// and small compositions; the rootless-chain measure specializes this idea
// with its own tail and divergence oracles.
class LazyMixture final : public DiscreteMeasure {
public:
    struct Component {
        Interval coeff;
        MeasurePtr measure;
    };

    // coefficient_tail: certified upper bound of sum over components beyond
    // the listed ones of coeff * degree-d moment; zero for a complete list.
    LazyMixture(std::vector<Component> comps,
                std::function<Rat(long)> coefficient_tail = nullptr);

    Atom atom(std::uint64_t i) const override;
    std::optional<std::uint64_t> atom_count() const override;
    Rat support_floor() const override;
    std::optional<Rat> tail_upper(long degree, std::uint64_t n) const override;
    std::optional<DivergenceCertificate> divergence(long degree) const override;
    bool provably_absent(const Rat& support) const override;
    std::string describe() const override;

private:
    Atom component_atom(std::size_t comp, std::uint64_t index) const;

    std::vector<Component> comps_;
    std::function<Rat(long)> coeff_tail_;
    mutable std::mutex seen_mutex_;
    mutable std::vector<std::pair<Rat, OriginKey>> seen_;  // disjointness check
};

// normalize(): divides by the certified total mass. The inner enclosure is
// computed at the given horizon; PrecisionUnreachable propagates.
MeasurePtr normalize(const MeasurePtr& mu, const Rat& precision,
                     std::uint64_t horizon);

inline MeasurePtr scaled_mixture(std::vector<LazyMixture::Component> comps,
                                 std::function<Rat(long)> coefficient_tail = nullptr) {
    return std::make_shared<LazyMixture>(std::move(comps),
                                         std::move(coefficient_tail));
}

inline MeasurePtr harmonic_push(MeasurePtr mu) {
    return std::make_shared<HarmonicPushMeasure>(std::move(mu));
}

}  // namespace shiftforge

#endif
