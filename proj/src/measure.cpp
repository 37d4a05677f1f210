#include "shiftforge/measure.hpp"

#include <map>

namespace shiftforge {

namespace {

// Pieces up to this index are literal series terms; beyond it, harmonic
// certificates switch to dyadic index blocks bounded through the minorant.
constexpr std::uint64_t kDirectPieces = 1 << 16;

// Hard cap on certificate accumulation; reached only by a defective
// certificate, never by a valid one.
constexpr std::uint64_t kPieceCap = 400'000'000ULL;

Rat support_power(const Rat& support, long degree) {
    return pow_rat_signed(support, degree);
}

}  // namespace

// ---------------------------------------------------------------------------
// DivergenceCertificate
// ---------------------------------------------------------------------------

Int DivergenceCertificate::index_for_bound(const Rat& bound) const {
    if (sgn(bound) <= 0) throw std::invalid_argument("index_for_bound: B <= 0");
    LowerAcc acc;
    for (std::uint64_t j = 1; j <= kPieceCap; ++j) {
        DivergencePiece p = pieces_(j);
        acc.add(p.lower_bound);
        if (acc.exceeds(bound)) return p.stream_end;
    }
    throw std::logic_error("divergence certificate failed to reach bound");
}

bool DivergenceCertificate::validate(const Rat& bound) const {
    Int target = index_for_bound(bound);
    LowerAcc acc;
    for (std::uint64_t j = 1; j <= kPieceCap; ++j) {
        DivergencePiece p = pieces_(j);
        acc.add(p.lower_bound);
        if (p.stream_end >= target) break;
    }
    return acc.exceeds(bound);
}

// Harmonic-minorant certificate: `term(i)` is an exact lower bound of the
// i-th sub-series term, valid together with term(i) >= c/(i+i0) for all i;
// `position(i)` maps the sub-series index into the measure's stream.
DivergenceCertificate make_harmonic_certificate(
    Rat c, Int i0, std::function<Rat(std::uint64_t)> term,
    std::function<Int(const Int&)> position) {
    auto piece = [c, i0, term = std::move(term),
                  position = std::move(position)](std::uint64_t j) {
        if (j <= kDirectPieces) {
            return DivergencePiece{term(j), position(Int(j))};
        }
        std::uint64_t q = j - kDirectPieces;
        Int L = Int(kDirectPieces) << (q - 1);
        Int R = Int(kDirectPieces) << q;
        Rat block = Rat(R - L) * c / Rat(R + i0);
        return DivergencePiece{block, position(R)};
    };
    return DivergenceCertificate(std::move(c), std::move(i0), std::move(piece));
}

DivergenceCertificate scale_certificate(const DivergenceCertificate& cert,
                                        const Rat& factor) {
    if (sgn(factor) <= 0)
        throw std::invalid_argument("scale_certificate: factor <= 0");
    auto piece = [cert, factor](std::uint64_t j) {
        DivergencePiece p = cert.piece(j);
        p.lower_bound *= factor;
        return p;
    };
    return DivergenceCertificate(Rat(cert.minorant_coefficient() * factor),
                                 cert.minorant_offset(), std::move(piece));
}

DivergenceCertificate remap_certificate(const DivergenceCertificate& cert,
                                        std::function<Int(const Int&)> position) {
    auto piece = [cert, position = std::move(position)](std::uint64_t j) {
        DivergencePiece p = cert.piece(j);
        p.stream_end = position(p.stream_end);
        return p;
    };
    return DivergenceCertificate(cert.minorant_coefficient(),
                                 cert.minorant_offset(), std::move(piece));
}

// ---------------------------------------------------------------------------
// DiscreteMeasure
// ---------------------------------------------------------------------------

std::vector<Atom> DiscreteMeasure::atoms(std::uint64_t n) const {
    if (n == 0) throw std::invalid_argument("atoms: n must be >= 1");
    if (auto count = atom_count()) n = std::min(n, *count);
    std::vector<Atom> out;
    out.reserve(n);
    for (std::uint64_t i = 1; i <= n; ++i) out.push_back(atom(i));
    return out;
}

Interval DiscreteMeasure::mass_at(const Rat& support, std::uint64_t horizon) const {
    if (horizon == 0) throw std::invalid_argument("mass_at: horizon must be >= 1");
    if (provably_absent(support)) return Interval(Rat(0));
    std::uint64_t n = horizon;
    if (auto count = atom_count()) n = std::min(n, *count);
    for (std::uint64_t i = 1; i <= n; ++i) {
        Atom a = atom(i);
        if (a.support == support) return a.mass;
    }
    if (atom_count() && horizon >= *atom_count()) return Interval(Rat(0));
    throw Unresolved("mass_at: support " + rat_to_string(support) +
                     " unresolved within horizon " + std::to_string(horizon) +
                     " of " + describe());
}

std::optional<Interval> moment_enclosure(const DiscreteMeasure& mu, long degree,
                                         std::uint64_t horizon) {
    if (horizon == 0) throw std::invalid_argument("moment: horizon must be >= 1");
    if (auto exact = mu.exact_moment(degree)) return exact;
    std::uint64_t n = horizon;
    if (auto count = mu.atom_count()) n = std::min(n, *count);
    DyadicAcc acc;
    for (std::uint64_t i = 1; i <= n; ++i) {
        Atom a = mu.atom(i);
        acc.add(support_power(a.support, degree) * a.mass);
    }
    auto tail = mu.tail_upper(degree, n);
    if (!tail) return std::nullopt;
    Interval partial = acc.value();
    return Interval(partial.lo, Rat(partial.hi + *tail));
}

MomentValue moment(const DiscreteMeasure& mu, long degree, const Rat& precision,
                   std::uint64_t horizon) {
    if (degree < -1) throw std::invalid_argument("moment: degree must be >= -1");
    if (auto cert = mu.divergence(degree)) return DivergentMoment{std::move(*cert)};
    auto enc = moment_enclosure(mu, degree, horizon);
    if (!enc)
        throw std::logic_error("moment: infinite tail without certificate in " +
                               mu.describe());
    if (enc->width() > precision) throw PrecisionUnreachable(enc->width());
    return FiniteMoment{*enc};
}

// ---------------------------------------------------------------------------
// DiracMeasure
// ---------------------------------------------------------------------------

Atom DiracMeasure::atom(std::uint64_t i) const {
    if (i != 1) throw std::out_of_range("dirac: atom index out of range");
    return atom_;
}

std::optional<Rat> DiracMeasure::tail_upper(long degree, std::uint64_t n) const {
    if (n >= 1) return Rat(0);
    Rat t = atom_.mass.hi * support_power(atom_.support, degree);
    return t;
}

std::string DiracMeasure::describe() const {
    return "dirac(" + rat_to_string(atom_.support) + ")";
}

// ---------------------------------------------------------------------------
// GapMeasure
// ---------------------------------------------------------------------------

GapMeasure::GapMeasure(unsigned m, Rat theta, AllocKey key)
    : m_(m), theta_(std::move(theta)), key_(std::move(key)), xi_(key_.xi()) {
    if (theta_ < 1) throw std::invalid_argument("gap measure: theta < 1");
}

Rat GapMeasure::mass_value(const Int& i) const {
    Rat denom = Rat(i) * Rat(i + 1) * pow_rat(support_at(i), m_);
    return Rat(1) / denom;
}

Rat GapMeasure::term_value(const Int& i, long degree) const {
    // mass_i * a_i^degree = a_i^{degree-m} / (i (i+1))
    Rat p = pow_rat_signed(support_at(i), degree - static_cast<long>(m_));
    return p / (Rat(i) * Rat(i + 1));
}

Atom GapMeasure::atom(std::uint64_t i) const {
    if (i == 0) throw std::out_of_range("gap: atom index 0");
    Int idx(static_cast<unsigned long>(i));
    return Atom{support_at(idx), Interval(mass_value(idx)), OriginKey{xi_, idx}};
}

std::optional<Rat> GapMeasure::tail_upper(long degree, std::uint64_t n) const {
    long m = static_cast<long>(m_);
    if (degree > m) return std::nullopt;
    // sum_{i>N} a_i^{d-m}/(i(i+1)) <= a_{N+1}^{d-m} / (N+1); exact at d = m.
    Int next(static_cast<unsigned long>(n + 1));
    Rat bound = pow_rat_signed(support_at(next), degree - m) / Rat(next);
    return bound;
}

std::optional<DivergenceCertificate> GapMeasure::divergence(long degree) const {
    if (degree <= static_cast<long>(m_)) return std::nullopt;
    // a_i >= i because theta >= 1, so term_i >= a_i/(i(i+1)) >= 1/(i+1).
    auto term = [self = *this, degree](std::uint64_t i) {
        return self.term_value(Int(static_cast<unsigned long>(i)), degree);
    };
    auto position = [](const Int& i) { return i; };
    return make_harmonic_certificate(Rat(1), Int(1), std::move(term),
                                     std::move(position));
}

bool GapMeasure::provably_absent(const Rat& support) const {
    Rat idx = support - theta_ - alloc_offset(xi_) + 1;
    if (idx.get_den() != 1) return true;
    return idx < 1;
}

std::string GapMeasure::describe() const {
    return "gap(m=" + std::to_string(m_) + ", theta=" + rat_to_string(theta_) +
           ", key=" + key_.to_string() + ")";
}

// ---------------------------------------------------------------------------
// ScaledMeasure / NormalizedMeasure / HarmonicPushMeasure
// ---------------------------------------------------------------------------

Atom ScaledMeasure::atom(std::uint64_t i) const {
    Atom a = inner_->atom(i);
    a.mass = coeff_ * a.mass;
    return a;
}

std::optional<Rat> ScaledMeasure::tail_upper(long degree, std::uint64_t n) const {
    auto t = inner_->tail_upper(degree, n);
    if (!t) return std::nullopt;
    return Rat(coeff_.hi * *t);
}

std::optional<DivergenceCertificate> ScaledMeasure::divergence(long degree) const {
    auto cert = inner_->divergence(degree);
    if (!cert) return std::nullopt;
    return scale_certificate(*cert, coeff_.lo);
}

std::string ScaledMeasure::describe() const {
    return "scaled(" + to_string(coeff_) + ", " + inner_->describe() + ")";
}

Atom NormalizedMeasure::atom(std::uint64_t i) const {
    Atom a = inner_->atom(i);
    a.mass = a.mass / total_;
    return a;
}

std::optional<Rat> NormalizedMeasure::tail_upper(long degree, std::uint64_t n) const {
    auto t = inner_->tail_upper(degree, n);
    if (!t) return std::nullopt;
    return Rat(*t / total_.lo);
}

std::optional<DivergenceCertificate> NormalizedMeasure::divergence(long degree) const {
    auto cert = inner_->divergence(degree);
    if (!cert) return std::nullopt;
    return scale_certificate(*cert, Rat(1 / total_.hi));
}

std::string NormalizedMeasure::describe() const {
    return "normalized(" + inner_->describe() + ")";
}

Atom HarmonicPushMeasure::atom(std::uint64_t i) const {
    Atom a = inner_->atom(i);
    a.mass = a.mass / Interval(a.support);
    return a;
}

std::string HarmonicPushMeasure::describe() const {
    return "push(" + inner_->describe() + ")";
}

// ---------------------------------------------------------------------------
// LazyMixture
// ---------------------------------------------------------------------------

LazyMixture::LazyMixture(std::vector<Component> comps,
                         std::function<Rat(long)> coefficient_tail)
    : comps_(std::move(comps)), coeff_tail_(std::move(coefficient_tail)) {
    if (comps_.empty()) throw std::invalid_argument("mixture: no components");
    for (const auto& c : comps_)
        if (!c.coeff.strictly_positive())
            throw std::invalid_argument("mixture: coefficient <= 0");
}

Atom LazyMixture::component_atom(std::size_t comp, std::uint64_t index) const {
    const Component& c = comps_[comp];
    Atom a = c.measure->atom(index);
    a.mass = c.coeff * a.mass;
    {
        std::lock_guard lock(seen_mutex_);
        for (const auto& [support, origin] : seen_) {
            if (support == a.support && !(origin == a.origin))
                throw DisjointnessViolation(
                    "mixture components share support " + rat_to_string(support));
        }
        seen_.emplace_back(a.support, a.origin);
    }
    return a;
}

Atom LazyMixture::atom(std::uint64_t i) const {
    if (i == 0) throw std::out_of_range("mixture: atom index 0");
    // Round-robin across the finite component list, skipping exhausted ones.
    std::size_t r = comps_.size();
    std::uint64_t pos = 0;
    std::vector<std::uint64_t> emitted(r, 0);
    for (std::uint64_t slot = 1;; ++slot) {
        std::size_t comp = static_cast<std::size_t>((slot - 1) % r);
        std::uint64_t index = emitted[comp] + 1;
        auto count = comps_[comp].measure->atom_count();
        if (count && index > *count) {
            bool any_left = false;
            for (std::size_t cc = 0; cc < r; ++cc) {
                auto c2 = comps_[cc].measure->atom_count();
                if (!c2 || emitted[cc] < *c2) any_left = true;
            }
            if (!any_left) throw std::out_of_range("mixture: atom index out of range");
            continue;
        }
        emitted[comp] = index;
        if (++pos == i) return component_atom(comp, index);
    }
}

std::optional<std::uint64_t> LazyMixture::atom_count() const {
    std::uint64_t total = 0;
    for (const auto& c : comps_) {
        auto n = c.measure->atom_count();
        if (!n) return std::nullopt;
        total += *n;
    }
    return total;
}

Rat LazyMixture::support_floor() const {
    Rat floor = comps_.front().measure->support_floor();
    for (const auto& c : comps_) floor = std::min(floor, c.measure->support_floor());
    return floor;
}

std::optional<Rat> LazyMixture::tail_upper(long degree, std::uint64_t n) const {
    // Depth of each component after n round-robin slots (conservative: use
    // the minimum it can have been dealt, correct also with exhausted comps).
    std::size_t r = comps_.size();
    Rat total(0);
    for (std::size_t comp = 0; comp < r; ++comp) {
        std::uint64_t depth = n / r + ((n % r) > comp ? 1 : 0);
        auto count = comps_[comp].measure->atom_count();
        if (count && depth > *count) depth = *count;
        auto t = comps_[comp].measure->tail_upper(degree, depth);
        if (!t) return std::nullopt;
        total += comps_[comp].coeff.hi * *t;
    }
    if (coeff_tail_) total += coeff_tail_(degree);
    return total;
}

std::optional<DivergenceCertificate> LazyMixture::divergence(long degree) const {
    for (std::size_t comp = 0; comp < comps_.size(); ++comp) {
        auto cert = comps_[comp].measure->divergence(degree);
        if (!cert) continue;
        // Remaining terms are nonnegative, so the component's certificate
        // transports; its inner index i lands at slot r*(i-1) + comp + 1 at
        // the latest (earlier once other components are exhausted).
        std::size_t r = comps_.size();
        auto scaled = scale_certificate(*cert, comps_[comp].coeff.lo);
        auto position = [r, comp](const Int& i) {
            return Int(Int(r) * (i - 1) + comp + 1);
        };
        return remap_certificate(scaled, std::move(position));
    }
    return std::nullopt;
}

bool LazyMixture::provably_absent(const Rat& support) const {
    for (const auto& c : comps_)
        if (!c.measure->provably_absent(support)) return false;
    return true;
}

std::string LazyMixture::describe() const {
    std::string s = "mixture(";
    for (std::size_t i = 0; i < comps_.size(); ++i) {
        if (i) s += ", ";
        s += comps_[i].measure->describe();
    }
    return s + ")";
}

MeasurePtr normalize(const MeasurePtr& mu, const Rat& precision,
                     std::uint64_t horizon) {
    MomentValue total = moment(*mu, 0, precision, horizon);
    if (!is_finite(total))
        throw std::invalid_argument("normalize: divergent total mass");
    const Interval& z = finite_value(total);
    if (!z.strictly_positive())
        throw std::invalid_argument("normalize: total mass not certifiably positive");
    return std::make_shared<NormalizedMeasure>(mu, z);
}

}  // namespace shiftforge
