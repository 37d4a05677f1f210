#include "shiftforge/construction.hpp"

#include <algorithm>
#include <cassert>

namespace shiftforge {

namespace {

constexpr std::uint64_t kAdaptiveStart = 512;
constexpr std::uint64_t kAdaptiveCap = 1ull << 22;
constexpr std::uint64_t kZetaLeadTerms = 64;
constexpr std::uint64_t kThetaSeriesTerms = 1ull << 17;
constexpr std::uint64_t kAncestorBlockAtoms = 256;
constexpr long kInternalRelExp = 12;  // chain-internal moment enclosures

const Rat& dust_constant() {
    static const Rat d = pow2_rat(-static_cast<long>(OmegaStream::kDustExponent));
    return d;
}

bool starts_with(const Node& longer, const Node& prefix) {
    if (prefix.size() > longer.size()) return false;
    return std::equal(prefix.begin(), prefix.end(), longer.begin());
}

// Adaptive enclosure of a (finite) moment, aiming for relative width
// 2^-rel_exp. Exact and refined (ratio-identity) routes are preferred; the
// atom-stream route accepts a stalled width once it is below 2^-6, since
// measures whose atom masses carry normalizer slop cannot tighten past it.
Interval enclose_moment_rel(const DiscreteMeasure& mu, long degree, long rel_exp) {
    if (auto exact = mu.exact_moment(degree)) return *exact;
    if (auto refined = mu.refined_moment(degree, rel_exp)) return *refined;
    Rat target = pow2_rat(-rel_exp);
    Rat floor_target = pow2_rat(-6);
    std::optional<Interval> prev;
    for (std::uint64_t n = kAdaptiveStart; n <= kAdaptiveCap; n *= 2) {
        auto enc = moment_enclosure(mu, degree, n);
        if (!enc)
            throw std::logic_error("enclose_moment_rel: divergent degree in " +
                                   mu.describe());
        if (enc->is_point()) return *enc;
        if (enc->lo > 0 && enc->width() <= target * enc->lo) return *enc;
        bool stalled = prev && enc->width() * 8 > prev->width() * 7;
        if (stalled && enc->lo > 0 && enc->width() <= floor_target * enc->lo)
            return *enc;
        prev = enc;
    }
    throw PrecisionUnreachable(prev ? prev->width() : Rat(-1));
}

}  // namespace

// ---------------------------------------------------------------------------
// OmegaStream
// ---------------------------------------------------------------------------

OmegaStream::OmegaStream(const SubtreeContext* ctx, Node base)
    : ctx_(ctx), base_(std::move(base)) {
    if (base_.empty()) {
        slice_code_ = 0;
    } else {
        Node ones = base_;
        ones.push_back(1);
        slice_code_ = xi_path(ones);  // code of base.1^p, the same for all p
    }
}

Rat OmegaStream::slice_remainder(long p, const Int& m) const {
    long k = static_cast<long>(base_level());
    Int code;
    if (m == 0) {
        code = slice_code_;
    } else {
        Node z = xi_path_inverse(m, static_cast<std::size_t>(p));
        Node full = base_;
        full.insert(full.end(), z.begin(), z.end());
        code = xi_path(full);
    }
    Int e = Int(k + p) + code;
    if (e > Int(kDustExponent)) return dust_constant();
    return pow2_rat(-static_cast<long>(e.get_si()));
}

const OmegaStream::Component& OmegaStream::component(const Int& rank) const {
    std::lock_guard lock(mutex_);
    auto it = comps_.find(rank);
    if (it != comps_.end()) return it->second;
    Component c;
    if (rank == 1) {
        c.node = base_;
    } else {
        auto [pm1, zeta] = cantor_unpair(Int(rank - 2));
        Node suffix = xi_path_inverse(zeta, pm1.get_ui() + 1);
        c.node = base_;
        c.node.insert(c.node.end(), suffix.begin(), suffix.end());
    }
    c.scaling_exponent = ctx_->scaling_exponent(c.node);
    c.dust = c.scaling_exponent > Int(kDustExponent);
    if (!c.dust) c.c = ctx_->scaling(c.node);
    c.gap = ctx_->gap_component(c.node);
    return comps_.emplace(rank, std::move(c)).first->second;
}

OmegaStream::RawAtom OmegaStream::raw_atom(std::uint64_t slot) const {
    if (slot == 0) throw std::out_of_range("omega stream: slot 0");
    if (has_t_atom()) {
        if (slot == 1) {
            auto [y, idx] = ctx_->t_point(base_);
            auto gap = ctx_->gap_component(y);
            Rat c = ctx_->scaling(y);
            RawAtom a;
            a.support = gap->support_at(idx);
            a.raw_mass = Interval(Rat(c * gap->mass_value(idx)));
            a.origin = OriginKey{gap->xi(), idx};
            a.comp_node = y;
            a.comp_index = idx;
            return a;
        }
        slot -= 1;
    }
    auto ci = schedule::slot_to_comp(Int(static_cast<unsigned long>(slot)));
    const Component& comp = component(ci.comp);
    RawAtom a;
    a.support = comp.gap->support_at(ci.index);
    Rat beta = comp.gap->mass_value(ci.index);
    if (comp.dust)
        a.raw_mass = Interval(Rat(0), Rat(dust_constant() * beta));
    else
        a.raw_mass = Interval(Rat(comp.c * beta));
    a.origin = OriginKey{comp.gap->xi(), ci.index};
    a.comp_node = comp.node;
    a.comp_index = ci.index;
    return a;
}

Rat OmegaStream::raw_tail(long q, std::uint64_t N) const {
    long k = static_cast<long>(base_level());
    long n = static_cast<long>(ctx_->order());
    if (q > k + n)
        throw std::logic_error("omega raw_tail: degree in the divergent regime");
    Rat tail(0);
    std::uint64_t M = N;
    if (has_t_atom()) {
        if (N == 0) {
            auto [y, idx] = ctx_->t_point(base_);
            auto gap = ctx_->gap_component(y);
            tail += ctx_->scaling(y) * gap->mass_value(idx) *
                    pow_rat_signed(gap->support_at(idx), q);
            M = 0;
        } else {
            M = N - 1;
        }
    }
    Int touched = schedule::comps_touched(Int(static_cast<unsigned long>(M)));
    std::map<long, Int> level_touched;
    long max_p = 0;
    for (Int s(1); s <= std::max(touched, Int(1)); ++s) {
        Int depth = schedule::comp_depth(s, Int(static_cast<unsigned long>(M)));
        const Component& comp = component(s);
        long p = static_cast<long>(comp.node.size()) - k;
        max_p = std::max(max_p, p);
        if (p >= 1) level_touched[p] += 1;
        if (comp.dust) {
            // whole remaining integral <= c < 2^-dust
            tail += dust_constant();
            continue;
        }
        auto t = comp.gap->tail_upper(q, depth.get_ui());
        if (!t)
            throw std::logic_error("omega raw_tail: component tail infinite");
        tail += comp.c * *t;
    }
    // Untouched components, slice remainders level by level.
    for (long p = 1; p <= max_p; ++p) {
        auto it = level_touched.find(p);
        tail += slice_remainder(p, it == level_touched.end() ? Int(0) : it->second);
    }
    // Levels beyond max_p sum geometrically to 2^-(k+max_p) * 2^-slice_code.
    tail += slice_remainder(max_p, Int(0));
    return tail;
}

Int OmegaStream::comp_rank(const Node& node) const {
    if (node == base_) return Int(1);
    if (!starts_with(node, base_))
        throw std::invalid_argument("comp_rank: node outside stream");
    Node suffix(node.begin() + static_cast<long>(base_.size()), node.end());
    return Int(2 + cantor_pair(Int(suffix.size() - 1), xi_path(suffix)));
}

Int OmegaStream::slot_of(const Int& rank, const Int& index) const {
    Int s = schedule::comp_to_slot(rank, index);
    return has_t_atom() ? Int(s + 1) : s;
}

// ---------------------------------------------------------------------------
// SubtreeContext
// ---------------------------------------------------------------------------

SubtreeContext::SubtreeContext(unsigned n, Rat theta, Int subtree_index)
    : n_(n), theta_(std::move(theta)), subtree_(std::move(subtree_index)) {
    if (n_ == 0) throw std::invalid_argument("construction requires n >= 1");
    if (theta_ < 1) throw std::invalid_argument("theta must be >= 1");
}

Int SubtreeContext::scaling_exponent(const Node& node) const {
    if (node.empty()) return Int(1);  // c_root = 1/2
    return Int(Int(node.size()) + xi_path(node) + 1);
}

Rat SubtreeContext::scaling(const Node& node) const {
    Int e = scaling_exponent(node);
    if (e > Int(OmegaStream::kDustExponent))
        throw std::logic_error("scaling: node too deep to materialize exactly");
    return pow2_rat(-static_cast<long>(e.get_si()));
}

std::shared_ptr<const GapMeasure> SubtreeContext::gap_component(const Node& node) const {
    return std::make_shared<GapMeasure>(static_cast<unsigned>(node.size()) + n_,
                                        theta_, key_for(node));
}

MeasurePtr SubtreeContext::nu_component(const Node& node) const {
    return std::make_shared<ScaledMeasure>(Interval(scaling(node)),
                                           gap_component(node));
}

const OmegaStream& SubtreeContext::omega(const Node& node) const {
    std::lock_guard lock(mutex_);
    auto it = streams_.find(node);
    if (it == streams_.end())
        it = streams_.emplace(node, std::make_shared<OmegaStream>(this, node)).first;
    return *it->second;
}

Interval SubtreeContext::raw_integral_at(const OmegaStream& stream, Cursor& cursor,
                                         long q, std::uint64_t N) const {
    for (std::uint64_t slot = cursor.pos + 1; slot <= N; ++slot) {
        auto a = stream.raw_atom(slot);
        cursor.acc.add(pow_rat_signed(a.support, q) * a.raw_mass);
    }
    cursor.pos = std::max(cursor.pos, N);
    Interval partial = cursor.acc.value();
    return Interval(partial.lo, Rat(partial.hi + stream.raw_tail(q, N)));
}

Interval SubtreeContext::raw_omega_integral(const Node& node, long q,
                                            long rel_exp) const {
    {
        std::lock_guard lock(mutex_);
        auto it = integrals_.find({node, q, rel_exp});
        if (it != integrals_.end()) return it->second;
    }
    const OmegaStream& stream = omega(node);
    Cursor cursor;
    Rat target = pow2_rat(-rel_exp);
    Interval enc;
    Rat best_width(0);
    bool done = false;
    for (std::uint64_t N = kAdaptiveStart; N <= kAdaptiveCap; N *= 2) {
        enc = raw_integral_at(stream, cursor, q, N);
        best_width = enc.width();
        if (enc.lo > 0 && enc.width() <= target * enc.lo) {
            done = true;
            break;
        }
    }
    if (!done) throw PrecisionUnreachable(best_width);
    std::lock_guard lock(mutex_);
    return integrals_.emplace(std::make_tuple(node, q, rel_exp), enc).first->second;
}

Interval SubtreeContext::total_raw_mass() const {
    return raw_omega_integral({}, 0, kParentRelExp);
}

Interval SubtreeContext::tilt_normalizer(const Node& node) const {
    return raw_omega_integral(node, static_cast<long>(node.size()), kParentRelExp);
}

Interval SubtreeContext::tilt_normalizer_child(const Node& node) const {
    return raw_omega_integral(node, static_cast<long>(node.size()), kChildRelExp);
}

MeasurePtr SubtreeContext::mu(const Node& node) const {
    {
        std::lock_guard lock(mutex_);
        auto it = mus_.find(node);
        if (it != mus_.end()) return it->second;
    }
    MeasurePtr m = std::make_shared<TiltMeasure>(shared_from_this(), node);
    std::lock_guard lock(mutex_);
    return mus_.emplace(node, std::move(m)).first->second;
}

Interval SubtreeContext::lambda_sq(const Node& node) const {
    if (node.empty())
        throw std::invalid_argument("lambda_sq: subtree root carries no weight");
    {
        std::lock_guard lock(mutex_);
        auto it = lambda_sq_.find(node);
        if (it != lambda_sq_.end()) return it->second;
    }
    Node parent(node.begin(), node.end() - 1);
    Interval value = tilt_normalizer(node) / tilt_normalizer(parent);
    std::lock_guard lock(mutex_);
    return lambda_sq_.emplace(node, value).first->second;
}

Interval SubtreeContext::child_mass(const Node& child,
                                    const OmegaStream::RawAtom& atom) const {
    Interval num = pow_rat_signed(atom.support, static_cast<long>(child.size())) *
                   atom.raw_mass;
    return num / tilt_normalizer_child(child);
}

std::pair<Node, Int> SubtreeContext::t_point(const Node& x) const {
    if (x.empty()) throw std::invalid_argument("t_point: subtree root has no t");
    Node y = x;
    // index 1 inherits the parent's t-point, so strip trailing ones
    while (y.size() >= 2 && y.back() == 1) y.pop_back();
    if (y.size() == 1) return {Node{}, Int(y[0])};
    Int idx = Int(y.back()) - 1;
    y.pop_back();
    return {y, idx};
}

bool SubtreeContext::omega_contains(const Node& y, const Int& atom_index,
                                    const Node& x) const {
    if (x.size() <= y.size()) return starts_with(y, x);
    if (!starts_with(x, y)) return false;
    // the atom climbs the t-chain: x = y . (enum index) . 1 . 1 ...
    Int expected = y.empty() ? atom_index : Int(atom_index + 1);
    if (Int(x[y.size()]) != expected) return false;
    for (std::size_t i = y.size() + 1; i < x.size(); ++i)
        if (x[i] != 1) return false;
    return true;
}

Node SubtreeContext::owning_child(const Node& x, const Node& y,
                                  const Int& atom_index) const {
    Node child = x;
    if (y == x) {
        Int idx = x.empty() ? atom_index : Int(atom_index + 1);
        child.push_back(static_cast<std::uint32_t>(idx.get_ui()));
        return child;
    }
    if (y.size() > x.size() && starts_with(y, x)) {
        child.push_back(y[x.size()]);
        return child;
    }
    // the atom is t_x; it continues down the chain through child x.1
    child.push_back(1);
    return child;
}

std::optional<std::pair<Node, Int>> SubtreeContext::decode_atom(const Rat& support) const {
    auto dec = decode_support(support);
    if (!dec) return std::nullopt;
    auto [sub, code] = cantor_unpair(dec->xi);
    if (sub != subtree_) return std::nullopt;
    Node node = node_decode(code);
    Rat idx = support - theta_ - alloc_offset(dec->xi) + 1;
    if (idx.get_den() != 1 || idx < 1) return std::nullopt;
    return std::make_pair(std::move(node), Int(idx.get_num()));
}

// ---------------------------------------------------------------------------
// TiltMeasure
// ---------------------------------------------------------------------------

TiltMeasure::TiltMeasure(ContextPtr ctx, Node node)
    : ctx_(std::move(ctx)), node_(std::move(node)),
      k_(static_cast<long>(node_.size())),
      normalizer_(ctx_->tilt_normalizer(node_)) {}

Atom TiltMeasure::atom(std::uint64_t i) const {
    auto raw = ctx_->omega(node_).raw_atom(i);
    Interval mass =
        (pow_rat_signed(raw.support, k_) * raw.raw_mass) / normalizer_;
    return Atom{raw.support, std::move(mass), raw.origin};
}

Rat TiltMeasure::support_floor() const { return ctx_->theta(); }

std::optional<Rat> TiltMeasure::tail_upper(long degree, std::uint64_t n) const {
    if (degree > static_cast<long>(ctx_->order())) return std::nullopt;
    Rat raw = ctx_->omega(node_).raw_tail(k_ + degree, n);
    return Rat(raw / normalizer_.lo);
}

std::optional<DivergenceCertificate> TiltMeasure::divergence(long degree) const {
    long n = static_cast<long>(ctx_->order());
    if (degree <= n) return std::nullopt;
    // The owned sub-series Delta_node diverges at degree n+1 and beyond:
    // terms c * a_i^{degree-n} / (i(i+1)) with a_i >= i.
    Rat scale = ctx_->scaling(node_) / normalizer_.hi;
    auto gap = ctx_->gap_component(node_);
    long q = k_ + degree;
    auto term = [scale, gap, q](std::uint64_t i) {
        return Rat(scale * gap->term_value(Int(static_cast<unsigned long>(i)), q));
    };
    long shift = node_.empty() ? 0 : 1;
    auto position = [shift](const Int& i) { return Int(2 * i - 1 + shift); };
    return make_harmonic_certificate(scale, Int(1), std::move(term),
                                     std::move(position));
}

bool TiltMeasure::provably_absent(const Rat& support) const {
    auto dec = ctx_->decode_atom(support);
    if (!dec) return true;
    return !ctx_->omega_contains(dec->first, dec->second, node_);
}

std::optional<Interval> TiltMeasure::exact_moment(long degree) const {
    // Normalized by its own enclosed total, so the total mass is exactly 1.
    if (degree == 0) return Interval(Rat(1));
    return std::nullopt;
}

std::optional<Interval> TiltMeasure::refined_moment(long degree,
                                                    long rel_exp) const {
    if (degree > static_cast<long>(ctx_->order())) return std::nullopt;
    if (degree == 0) return Interval(Rat(1));
    // Tilt identity: int s^d dmu_x = raw(k+d) / raw(k); the normalizer
    // cancels, so both raw enclosures can be driven arbitrarily tight.
    Interval num = ctx_->raw_omega_integral(node_, k_ + degree, rel_exp + 2);
    Interval den = ctx_->raw_omega_integral(node_, k_, rel_exp + 2);
    return num / den;
}

std::string TiltMeasure::describe() const {
    std::string s = "mu[s" + ctx_->subtree_index().get_str() + "/";
    if (node_.empty()) {
        s += "r";
    } else {
        for (std::size_t i = 0; i < node_.size(); ++i) {
            if (i) s += '.';
            s += std::to_string(node_[i]);
        }
    }
    return s + "]";
}

// ---------------------------------------------------------------------------
// RootlessChain
// ---------------------------------------------------------------------------

RootlessChain::RootlessChain(unsigned n)
    : n_(n),
      anchor_(std::make_shared<SubtreeContext>(n, Rat(1), Int(0))) {}

ContextPtr RootlessChain::sibling_context(std::uint32_t level,
                                          std::uint32_t sibling) const {
    if (level == 0 || sibling == 0)
        throw std::invalid_argument("sibling_context: level and sibling >= 1");
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(level, sibling);
    auto it = siblings_.find(key);
    if (it == siblings_.end()) {
        it = siblings_
                 .emplace(key, std::make_shared<SubtreeContext>(
                                   n_, sibling_theta(sibling),
                                   chain_subtree_index(level, sibling)))
                 .first;
    }
    return it->second;
}

MeasurePtr RootlessChain::chain_measure(std::uint32_t level) const {
    {
        std::lock_guard lock(mutex_);
        auto it = chain_measures_.find(level);
        if (it != chain_measures_.end()) return it->second;
    }
    MeasurePtr m;
    if (level == 0) {
        m = anchor_->mu({});
    } else {
        zeta(level);  // force; keeps construction order deterministic
        m = std::make_shared<AncestorMeasure>(this, level);
    }
    std::lock_guard lock(mutex_);
    return chain_measures_.emplace(level, std::move(m)).first->second;
}

Interval RootlessChain::sibling_moment_nm1(std::uint32_t level,
                                           std::uint32_t sibling) const {
    MeasurePtr m = sibling == 0 ? chain_measure(level - 1)
                                : sibling_context(level, sibling)->mu({});
    // Siblings beyond the zeta lead terms only feed crude bounds
    // (divergence blocks), so a loose enclosure is enough there.
    long rel = sibling <= kZetaLeadTerms ? kInternalRelExp : 6;
    return enclose_moment_rel(*m, static_cast<long>(n_) - 1, rel);
}

Interval RootlessChain::chain_term(std::uint32_t level, std::uint32_t sibling,
                                   long degree, long rel_exp) const {
    if (sibling == 0) {
        MeasurePtr prev = chain_measure(level - 1);
        Interval md1 = enclose_moment_rel(*prev, degree - 1, rel_exp);
        Interval mn1 = enclose_moment_rel(*prev, static_cast<long>(n_) - 1, rel_exp);
        return md1 / mn1;  // theta_0 = 1
    }
    auto ctx = sibling_context(level, sibling);
    Interval num = ctx->raw_omega_integral({}, degree - 1, rel_exp);
    Interval den = ctx->raw_omega_integral({}, static_cast<long>(n_) - 1, rel_exp);
    return num / (Interval(sibling_theta(sibling)) * den);
}

Interval RootlessChain::zeta(std::uint32_t level) const {
    if (level == 0) throw std::invalid_argument("zeta: level >= 1");
    {
        std::lock_guard lock(mutex_);
        auto it = zetas_.find(level);
        if (it != zetas_.end()) return it->second;
    }
    // zeta = sum_i lambda-tilde_i^2 * int s^{-1} dmu_i, i.e. the degree-0
    // chain terms; terms for i >= 1 are below 1/theta_i^2 = (i+1)^-4.
    Interval sum(Rat(0));
    for (std::uint32_t i = 0; i <= kZetaLeadTerms; ++i)
        sum += chain_term(level, i, 0, kInternalRelExp);
    Int I(kZetaLeadTerms);
    Rat tail = Rat(1) / (Rat(I + 1) * Rat(I + 2) * Rat(I + 2));
    Interval zeta(sum.lo, Rat(sum.hi + tail));
    std::lock_guard lock(mutex_);
    return zetas_.emplace(level, zeta).first->second;
}

Interval RootlessChain::chain_lambda_sq(std::uint32_t level,
                                        std::uint32_t sibling) const {
    if (level == 0) throw std::invalid_argument("chain_lambda_sq: level >= 1");
    {
        std::lock_guard lock(mutex_);
        auto it = lambdas_.find({level, sibling});
        if (it != lambdas_.end()) return it->second;
    }
    Rat theta = sibling == 0 ? Rat(1) : sibling_theta(sibling);
    Interval value = Interval(Rat(1)) /
                     (zeta(level) * Interval(theta) *
                      sibling_moment_nm1(level, sibling));
    std::lock_guard lock(mutex_);
    return lambdas_.emplace(std::make_pair(level, sibling), value).first->second;
}

// ---------------------------------------------------------------------------
// AncestorMeasure
// ---------------------------------------------------------------------------

AncestorMeasure::AncestorMeasure(const RootlessChain* chain, std::uint32_t level)
    : chain_(chain), level_(level) {
    if (level_ == 0) throw std::invalid_argument("ancestor level >= 1");
}

MeasurePtr AncestorMeasure::child_measure(const Int& rank) const {
    if (rank == 1) return chain_->chain_measure(level_ - 1);
    return chain_->sibling_context(level_, static_cast<std::uint32_t>(rank.get_ui()) - 1)
        ->mu({});
}

Interval AncestorMeasure::child_coefficient(const Int& rank) const {
    return chain_->chain_lambda_sq(level_,
                                   static_cast<std::uint32_t>(rank.get_ui()) - 1);
}

Atom AncestorMeasure::atom(std::uint64_t i) const {
    auto ci = schedule::slot_to_comp(Int(static_cast<unsigned long>(i)));
    MeasurePtr inner = child_measure(ci.comp);
    Atom a = inner->atom(ci.index.get_ui());
    a.mass = (child_coefficient(ci.comp) * a.mass) / Interval(a.support);
    return a;
}

std::optional<Rat> AncestorMeasure::tail_upper(long degree, std::uint64_t n) const {
    long order = static_cast<long>(chain_->order());
    if (degree > order) return std::nullopt;
    Int N(static_cast<unsigned long>(n));
    Int touched = schedule::comps_touched(N);
    Rat tail(0);
    for (Int r(1); r <= touched; ++r) {
        Int depth = schedule::comp_depth(r, N);
        MeasurePtr inner = child_measure(r);
        auto t = inner->tail_upper(degree - 1, depth.get_ui());
        if (!t) throw std::logic_error("ancestor tail: inner tail infinite");
        tail += child_coefficient(r).hi * *t;
    }
    // Untouched children are the siblings i >= I (component rank i+1):
    // lambda_i^2 int s^{d-1} dmu_i <= theta_i^{d-n-1}/zeta with theta_i =
    // (i+1)^2, so their sum is below sum_{i>=I} (i+1)^{-g}, g = 2(n+1-d).
    unsigned long I = std::max(touched.get_ui(), 1ul);  // first untouched sibling
    long g = 2 * (order + 1 - degree);
    Rat inv_zeta_lo = Rat(1) / chain_->zeta(level_).lo;
    // sum_{i>=I} (i+1)^-g <= (I+1)^{-(g-2)} * sum_{i>=I} 1/(i(i+1))
    Rat untouched = inv_zeta_lo * pow_rat_signed(Rat(I + 1), -(g - 2)) / Rat(I);
    tail += untouched;
    return tail;
}

std::optional<DivergenceCertificate> AncestorMeasure::divergence(long degree) const {
    long order = static_cast<long>(chain_->order());
    if (degree <= order) return std::nullopt;
    // Fresh sibling j contributes lambda_j^2 int s^n dmu_j >= 1/zeta when
    // enough of mu_j's mass is captured; blocks of 256 atoms per sibling
    // give near-constant certified piece values.
    const RootlessChain* chain = chain_;
    std::uint32_t level = level_;
    unsigned n = chain_->order();
    auto block = [chain, level, n](std::uint64_t j) {
        // Certified lower bound of the sibling-j sub-sum: capture most of
        // mu_j's unit mass in 256 atoms, each term >= lambda^2 mass theta^n.
        auto ctx = chain->sibling_context(level, static_cast<std::uint32_t>(j));
        const OmegaStream& stream = ctx->omega({});
        Rat z_hi = ctx->raw_omega_integral({}, 0, 6).hi;  // crude total is enough
        LowerAcc raw_partial;
        for (std::uint64_t q = 1; q <= kAncestorBlockAtoms; ++q)
            raw_partial.add(stream.raw_atom(q).raw_mass.lo);
        Rat lam_lo = chain->chain_lambda_sq(level, static_cast<std::uint32_t>(j)).lo;
        Rat theta_n = pow_rat(RootlessChain::sibling_theta(static_cast<std::uint32_t>(j)), n);
        return Rat(lam_lo * theta_n * raw_partial.value() / z_hi);
    };
    Rat c = block(1) / 2;
    auto piece = [block](std::uint64_t j) {
        Int end = schedule::comp_to_slot(Int(static_cast<unsigned long>(j + 1)),
                                         Int(kAncestorBlockAtoms));
        return DivergencePiece{block(j), end};
    };
    return DivergenceCertificate(c, Int(1), std::move(piece));
}

bool AncestorMeasure::provably_absent(const Rat& support) const {
    auto dec = decode_support(support);
    if (!dec) return true;
    auto [sub, code] = cantor_unpair(dec->xi);
    ContextPtr ctx;
    if (sub == 0) {
        ctx = chain_->anchor_context();
    } else {
        auto [lvl, sib] = cantor_unpair(Int(sub - 1));
        if (lvl + 1 > Int(level_)) return true;  // subtree hangs above us
        ctx = chain_->sibling_context(static_cast<std::uint32_t>(lvl.get_ui()) + 1,
                                      static_cast<std::uint32_t>(sib.get_ui()) + 1);
    }
    return !ctx->decode_atom(support).has_value();
}

std::optional<Interval> AncestorMeasure::refined_moment(long degree,
                                                        long rel_exp) const {
    long order = static_cast<long>(chain_->order());
    if (degree > order) return std::nullopt;
    if (degree == 0) return Interval(Rat(1));
    if (degree == order) return exact_moment(degree);
    // int s^d dmu = (1/zeta) sum_i lambda-tilde_i^2 int s^{d-1} dmu_{w_i},
    // with terms below theta_i^{d-n-1}.
    Interval sum(Rat(0));
    for (std::uint32_t i = 0; i <= kZetaLeadTerms; ++i)
        sum += chain_->chain_term(level_, i, degree, rel_exp + 2);
    unsigned long I = kZetaLeadTerms;
    long g = 2 * (order + 1 - degree);
    Rat tail = pow_rat_signed(Rat(I + 2), -(g - 2)) / Rat(I + 1);
    Interval series(sum.lo, Rat(sum.hi + tail));
    return series / chain_->zeta(level_);
}

std::optional<Interval> AncestorMeasure::exact_moment(long degree) const {
    if (degree == 0) return Interval(Rat(1));  // zeta is exactly the normalizer
    if (degree == static_cast<long>(chain_->order())) {
        // int s^n dmu = (1/zeta) sum_i 1/theta_i, the lambda-tilde cancellation.
        std::lock_guard lock(mutex_);
        if (!cached_degree_n_) {
            DyadicAcc acc;
            acc.add_exact(Rat(1));  // theta_0
            for (std::uint64_t i = 1; i <= kThetaSeriesTerms; ++i)
                acc.add_exact(Rat(1) / (Rat(i + 1) * Rat(i + 1)));
            Interval s = acc.value();
            Rat tail = Rat(1) / Rat(kThetaSeriesTerms + 1);
            Interval series(s.lo, Rat(s.hi + tail));
            cached_degree_n_ = series / chain_->zeta(level_);
        }
        return cached_degree_n_;
    }
    return std::nullopt;
}

std::string AncestorMeasure::describe() const {
    return "mu[ancestor " + std::to_string(level_) + "]";
}

// ---------------------------------------------------------------------------
// ShiftModel
// ---------------------------------------------------------------------------

ShiftModel::ShiftModel(unsigned n, bool rooted) : n_(n), shape_{rooted} {
    if (n_ == 0) throw std::invalid_argument("model order n must be >= 1");
    if (rooted)
        rooted_ctx_ = std::make_shared<SubtreeContext>(n, Rat(1), Int(0));
    else
        chain_ = std::make_shared<RootlessChain>(n);
}

std::shared_ptr<const ShiftModel> ShiftModel::assemble(unsigned n, bool rooted) {
    return std::shared_ptr<const ShiftModel>(new ShiftModel(n, rooted));
}

std::pair<ContextPtr, Node> ShiftModel::locate(const VertexAddress& v) const {
    if (shape_.rooted) return {rooted_ctx_, v.path};
    if (v.ancestor_index == 0) return {chain_->anchor_context(), v.path};
    if (v.path.empty())
        throw std::invalid_argument("locate: ancestor vertices have no context");
    Node inner(v.path.begin() + 1, v.path.end());
    return {chain_->sibling_context(v.ancestor_index, v.path.front()), inner};
}

MeasurePtr ShiftModel::mu(const VertexAddress& v) const {
    if (is_ancestor_vertex(v)) return chain_->chain_measure(v.ancestor_index);
    auto [ctx, node] = locate(v);
    return ctx->mu(node);
}

std::optional<Interval> ShiftModel::lambda_sq(const VertexAddress& v) const {
    if (shape_.rooted) {
        if (v.path.empty()) return std::nullopt;  // root carries no weight
        return rooted_ctx_->lambda_sq(v.path);
    }
    if (v.path.empty())
        return chain_->chain_lambda_sq(v.ancestor_index + 1, 0);
    if (v.path.size() == 1)
        return chain_->chain_lambda_sq(v.ancestor_index, v.path.front());
    auto [ctx, node] = locate(v);
    return ctx->lambda_sq(node);
}

std::vector<ShiftModel::OwnedAtom> ShiftModel::consistency_atoms(
    const VertexAddress& u, std::uint64_t horizon) const {
    if (horizon == 0)
        throw std::invalid_argument("consistency: horizon must be >= 1");
    std::vector<OwnedAtom> out;
    out.reserve(horizon);
    if (is_ancestor_vertex(u)) {
        auto anc = std::dynamic_pointer_cast<const AncestorMeasure>(mu(u));
        for (std::uint64_t i = 1; i <= horizon; ++i) {
            auto ci = schedule::slot_to_comp(Int(static_cast<unsigned long>(i)));
            MeasurePtr inner = anc->child_measure(ci.comp);
            Atom child_atom = inner->atom(ci.index.get_ui());
            Interval coeff = anc->child_coefficient(ci.comp);
            Atom mine{child_atom.support,
                      (coeff * child_atom.mass) / Interval(child_atom.support),
                      child_atom.origin};
            VertexAddress owner =
                ci.comp == 1
                    ? VertexAddress{u.ancestor_index - 1, {}}
                    : VertexAddress{u.ancestor_index,
                                    {static_cast<std::uint32_t>(ci.comp.get_ui()) - 1}};
            out.push_back(OwnedAtom{std::move(mine), std::move(owner),
                                    child_atom.mass});
        }
        return out;
    }
    auto [ctx, x] = locate(u);
    const OmegaStream& stream = ctx->omega(x);
    Interval I_u = ctx->tilt_normalizer(x);
    long k = static_cast<long>(x.size());
    // Subtree-relative node -> vertex address (inverse of locate()).
    const bool sibling_subtree = !shape_.rooted && u.ancestor_index != 0;
    auto to_address = [&](const Node& node) {
        VertexAddress a;
        a.ancestor_index = u.ancestor_index;
        if (sibling_subtree) a.path.push_back(u.path.front());
        a.path.insert(a.path.end(), node.begin(), node.end());
        return a;
    };
    for (std::uint64_t i = 1; i <= horizon; ++i) {
        auto raw = stream.raw_atom(i);
        Interval mass = (pow_rat_signed(raw.support, k) * raw.raw_mass) / I_u;
        Node child = ctx->owning_child(x, raw.comp_node, raw.comp_index);
        Interval child_mass = ctx->child_mass(child, raw);
        out.push_back(OwnedAtom{Atom{raw.support, std::move(mass), raw.origin},
                                to_address(child), std::move(child_mass)});
    }
    return out;
}

Rat ShiftModel::consistency_tail_slack(const VertexAddress& u,
                                       std::uint64_t horizon) const {
    if (is_ancestor_vertex(u)) return Rat(0);  // masses defined by the identity
    auto [ctx, x] = locate(u);
    Interval I_u = ctx->tilt_normalizer(x);
    Rat raw_tail = ctx->omega(x).raw_tail(static_cast<long>(x.size()), horizon);
    // Both sides of the identity enclose raw * t^k / I_u per atom; the only
    // slack is the width of the 1/I_u enclosure.
    Rat slack = Rat(1) / I_u.lo - Rat(1) / I_u.hi;
    return Rat(raw_tail * slack);
}

std::string ShiftModel::theta_sequence_description(bool rooted) {
    if (rooted) return "1";
    return "theta_0 = 1, theta_i = (i+1)^2";
}

// ---------------------------------------------------------------------------
// PerturbedModel
// ---------------------------------------------------------------------------

PerturbedModel::PerturbedModel(std::shared_ptr<const ShiftModel> base,
                               std::map<VertexAddress, Rat> factors)
    : ShiftModel(*base), base_(std::move(base)), factors_(std::move(factors)) {
    for (const auto& [v, f] : factors_)
        if (sgn(f) <= 0)
            throw std::invalid_argument("perturbation factors must be positive");
}

std::optional<Interval> PerturbedModel::lambda_sq(const VertexAddress& v) const {
    auto base = base_->lambda_sq(v);
    if (!base) return base;
    auto it = factors_.find(v);
    if (it == factors_.end()) return base;
    return it->second * *base;
}

}  // namespace shiftforge
