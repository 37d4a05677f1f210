#include "shiftforge/report.hpp"

#include <json.hpp>

#include <fstream>

namespace shiftforge {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json interval_json(const Interval& iv) {
    return ordered_json::array({rat_to_string(iv.lo), rat_to_string(iv.hi)});
}

ordered_json moment_json(const MomentValue& m) {
    ordered_json j;
    if (is_finite(m)) {
        j["finite"] = interval_json(finite_value(m));
    } else {
        const auto& cert = divergence_cert(m);
        ordered_json c;
        c["c"] = rat_to_string(cert.minorant_coefficient());
        c["i0"] = cert.minorant_offset().get_str();
        j["divergent"] = c;
    }
    return j;
}

ordered_json atom_json(const Atom& a) {
    ordered_json j;
    j["support"] = rat_to_string(a.support);
    j["mass"] = interval_json(a.mass);
    j["origin"] = a.origin.to_string();
    return j;
}

ordered_json config_json(const RunConfig& c) {
    ordered_json j;
    j["n"] = c.n;
    j["rooted"] = c.rooted;
    j["depth"] = c.depth;
    j["breadth"] = c.breadth;
    j["horizon"] = c.horizon;
    j["precision"] = rat_to_string(c.precision);
    j["divergence_bound"] = rat_to_string(c.divergence_bound);
    j["expect_dense"] = c.dense_degree();
    j["expect_trivial"] = c.trivial_degree();
    return j;
}

ordered_json consistency_json(const ConsistencyReport& r) {
    ordered_json j;
    j["vertex"] = format_address(r.vertex);
    j["check"] = "consistency";
    j["verdict"] = verdict_name(r.verdict);
    ordered_json data;
    data["horizon"] = r.horizon;
    data["atoms_checked"] = r.atoms_checked;
    data["zero_residuals"] = r.zero_residuals;
    data["tail_bound"] = rat_to_string(r.tail_bound);
    data["tolerance"] = rat_to_string(r.tolerance);
    ordered_json offenders = ordered_json::array();
    for (const auto& o : r.offenders) {
        ordered_json e;
        e["support"] = rat_to_string(o.support);
        e["owner"] = format_address(o.owner);
        e["residual"] = interval_json(o.residual);
        offenders.push_back(e);
    }
    data["offending_residuals"] = offenders;
    j["data"] = data;
    return j;
}

ordered_json profile_json(const MomentProfile& p, unsigned n) {
    ordered_json j;
    j["vertex"] = format_address(p.vertex);
    j["check"] = "moment_profile";
    bool shape_ok = is_finite(p.degree_n) && !is_finite(p.degree_np1);
    j["verdict"] = shape_ok ? "pass" : "fail";
    ordered_json data;
    data["degree_" + std::to_string(n)] = moment_json(p.degree_n);
    data["degree_" + std::to_string(n + 1)] = moment_json(p.degree_np1);
    j["data"] = data;
    return j;
}

ordered_json domain_json(const DomainVerdict& d) {
    ordered_json j;
    j["check"] = d.check;
    j["degree"] = d.degree;
    j["verdict"] = verdict_name(d.verdict);
    ordered_json vertices = ordered_json::array();
    for (const auto& v : d.vertices) {
        ordered_json e;
        e["vertex"] = format_address(v.vertex);
        e["verdict"] = verdict_name(v.verdict);
        if (v.finite && v.enclosure) e["enclosure"] = interval_json(*v.enclosure);
        if (v.minorant_c) {
            e["minorant_c"] = rat_to_string(*v.minorant_c);
            e["validated"] = v.certificate_validated;
        }
        vertices.push_back(e);
    }
    j["vertices"] = vertices;
    return j;
}

ordered_json bridge_json(const EquivalenceReport& r) {
    ordered_json j;
    j["vertex"] = format_address(r.vertex);
    j["check"] = "bridge_equivalence";
    j["verdict"] = verdict_name(r.verdict);
    ordered_json data;
    data["k"] = r.k;
    data["shift_side"] = interval_json(r.shift_side);
    data["composition_side"] = interval_json(r.composition_side);
    j["data"] = data;
    return j;
}

VertexAddress anchor_of(const ShiftModel& model) {
    return VertexAddress{};  // root or anchor is always "0:"
}

}  // namespace

VerifySuites run_verification(const ShiftModel& model, const RunConfig& config) {
    VerifySuites out;
    auto vertices = truncation_vertices(model, config.depth, config.breadth);

    out.consistency.resize(vertices.size());
    parallel_for(vertices.size(), config.parallel, [&](std::size_t i) {
        out.consistency[i] =
            check_consistency(model, vertices[i], config.horizon, config.precision);
    });

    out.profiles.resize(vertices.size());
    parallel_for(vertices.size(), config.parallel, [&](std::size_t i) {
        out.profiles[i] = moment_profile(model, vertices[i], config.horizon);
    });

    out.dense = power_dense_verdict(model, config.dense_degree(), config.depth,
                                    config.breadth, config.horizon,
                                    config.parallel);
    out.trivial = trivial_domain_verdict(model, config.trivial_degree(),
                                         config.depth, config.breadth,
                                         config.horizon, config.divergence_bound,
                                         config.parallel);

    auto cm = to_composition(
        std::shared_ptr<const ShiftModel>(&model, [](const ShiftModel*) {}),
        anchor_of(model));
    for (const auto& v : vertices) {
        for (unsigned k = 0; k <= model.order(); ++k)
            out.bridge.push_back(
                equivalence_check(model, *cm, v, k, config.breadth, config.horizon));
    }

    out.injectivity = injectivity_witness(model, config.depth, config.breadth);

    bool any_fail = out.dense.verdict == Verdict::fail ||
                    out.trivial.verdict == Verdict::fail ||
                    out.injectivity.verdict == Verdict::fail;
    bool any_unresolved = out.dense.verdict == Verdict::unresolved ||
                          out.trivial.verdict == Verdict::unresolved;
    for (const auto& r : out.consistency) {
        any_fail |= r.verdict == Verdict::fail;
        any_unresolved |= r.verdict == Verdict::unresolved;
    }
    for (const auto& p : out.profiles)
        any_fail |= !(is_finite(p.degree_n) && !is_finite(p.degree_np1));
    for (const auto& b : out.bridge) any_fail |= b.verdict == Verdict::fail;

    out.aggregate = any_fail ? Verdict::fail
                             : (any_unresolved ? Verdict::unresolved : Verdict::pass);
    out.exit_code = any_fail ? 1 : (any_unresolved ? 2 : 0);
    return out;
}

std::string render_manifest(const ShiftModel& model, const RunConfig& config) {
    ordered_json j;
    ordered_json m;
    m["n"] = model.order();
    m["rooted"] = model.rooted();
    m["theta_sequence"] = ShiftModel::theta_sequence_description(model.rooted());
    m["pairing"] = "cantor";
    m["mass_recipe"] = "telescoping";
    m["scaling"] = "dyadic";
    j["model"] = m;
    j["config"] = config_json(config);

    ordered_json vertices = ordered_json::array();
    for (const auto& v : truncation_vertices(model, config.depth, config.breadth)) {
        ordered_json e;
        e["vertex"] = format_address(v);
        auto lam = model.lambda_sq(v);
        if (lam) {
            e["lambda_sq"] = interval_json(*lam);
            e["lambda"] = interval_json(sqrt_iv(*lam));
        } else {
            e["lambda_sq"] = nullptr;
        }
        MeasurePtr mu = model.mu(v);
        auto total = moment_enclosure(*mu, 0, config.horizon);
        e["mu_total_mass"] = total ? interval_json(*total) : ordered_json(nullptr);
        ordered_json atoms = ordered_json::array();
        for (const auto& a : mu->atoms(3)) atoms.push_back(atom_json(a));
        e["first_atoms"] = atoms;
        vertices.push_back(e);
    }
    j["vertices"] = vertices;
    return j.dump(2) + "\n";
}

std::string render_verify_report(const ShiftModel& model, const RunConfig& config,
                                 const VerifySuites& suites) {
    ordered_json j;
    j["model"] = ordered_json{{"n", model.order()}, {"rooted", model.rooted()}};
    j["config"] = config_json(config);
    ordered_json entries = ordered_json::array();
    for (const auto& r : suites.consistency) entries.push_back(consistency_json(r));
    for (const auto& p : suites.profiles)
        entries.push_back(profile_json(p, model.order()));
    entries.push_back(domain_json(suites.dense));
    entries.push_back(domain_json(suites.trivial));
    for (const auto& b : suites.bridge) entries.push_back(bridge_json(b));
    ordered_json inj;
    inj["check"] = "injectivity_witness";
    inj["verdict"] = verdict_name(suites.injectivity.verdict);
    ordered_json bounds = ordered_json::array();
    for (const auto& [v, lo] : suites.injectivity.lower_bounds) {
        bounds.push_back(ordered_json{{"vertex", format_address(v)},
                                      {"lambda_sq_lower", rat_to_string(lo)}});
    }
    inj["data"] = ordered_json{{"lower_bounds", bounds}};
    entries.push_back(inj);
    j["entries"] = entries;
    j["aggregate"] = verdict_name(suites.aggregate);
    j["exit_code"] = suites.exit_code;
    return j.dump(2) + "\n";
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

int cmd_construct(const RunConfig& config) {
    auto model = ShiftModel::assemble(config.n, config.rooted);
    std::string manifest = render_manifest(*model, config);
    write_file_atomic(std::filesystem::path(config.out_dir) / "manifest.json",
                      manifest);
    return 0;
}

int cmd_verify(const RunConfig& config) {
    auto model = ShiftModel::assemble(config.n, config.rooted);
    VerifySuites suites = run_verification(*model, config);
    std::string report = render_verify_report(*model, config, suites);
    write_file_atomic(std::filesystem::path(config.out_dir) / "report.json",
                      report);
    return suites.exit_code;
}

int cmd_export(const RunConfig& config) {
    auto model = ShiftModel::assemble(config.n, config.rooted);
    std::filesystem::path dir(config.out_dir);

    std::vector<VertexAddress> selection;
    for (const auto& s : config.vertices)
        selection.push_back(canonicalize(model->shape(), parse_address(s)));

    // Atom dumps and certificates for the selected vertices.
    ordered_json atoms_doc = ordered_json::array();
    ordered_json certs_doc = ordered_json::array();
    for (const auto& v : selection) {
        MeasurePtr mu = model->mu(v);
        ordered_json e;
        e["vertex"] = format_address(v);
        ordered_json atoms = ordered_json::array();
        for (const auto& a : mu->atoms(std::min<std::uint64_t>(config.horizon, 64)))
            atoms.push_back(atom_json(a));
        e["atoms"] = atoms;
        atoms_doc.push_back(e);

        long d = config.export_degree();
        ordered_json c;
        c["vertex"] = format_address(v);
        c["degree"] = d;
        if (auto cert = mu->divergence(d)) {
            ordered_json cc;
            cc["c"] = rat_to_string(cert->minorant_coefficient());
            cc["i0"] = cert->minorant_offset().get_str();
            ordered_json nb;
            for (long b : {1, 10, 100})
                nb[std::to_string(b)] = cert->index_for_bound(Rat(b)).get_str();
            cc["index_for_bound"] = nb;
            c["divergent"] = cc;
        } else {
            auto enc = moment_enclosure(*mu, d, config.horizon);
            c["finite"] = enc ? interval_json(*enc) : ordered_json(nullptr);
        }
        certs_doc.push_back(c);
    }
    write_file_atomic(dir / "atoms.json", ordered_json(atoms_doc).dump(2) + "\n");
    write_file_atomic(dir / "certificates.json",
                      ordered_json(certs_doc).dump(2) + "\n");

    // Weight table over the truncation.
    ordered_json weights = ordered_json::array();
    for (const auto& v :
         truncation_vertices(*model, config.depth, config.breadth)) {
        auto lam = model->lambda_sq(v);
        if (!lam) continue;
        weights.push_back(ordered_json{{"vertex", format_address(v)},
                                       {"lambda_sq", interval_json(*lam)},
                                       {"lambda", interval_json(sqrt_iv(*lam))}});
    }
    write_file_atomic(dir / "weights.json", ordered_json(weights).dump(2) + "\n");

    // Plot-ready partial sums: one CSV per selected vertex.
    std::string csv = "vertex,degree,i,partial_lower,partial_upper\n";
    for (const auto& v : selection) {
        MeasurePtr mu = model->mu(v);
        long d = config.export_degree();
        DyadicAcc acc;
        for (std::uint64_t i = 1; i <= config.horizon; ++i) {
            Atom a = mu->atom(i);
            acc.add(pow_rat_signed(a.support, d) * a.mass);
            Interval partial = acc.value();
            csv += format_address(v) + "," + std::to_string(d) + "," +
                   std::to_string(i) + "," + rat_to_string(partial.lo) + "," +
                   rat_to_string(partial.hi) + "\n";
        }
        if (auto cert = mu->divergence(d)) {
            csv += format_address(v) + "," + std::to_string(d) +
                   ",certificate,c=" + rat_to_string(cert->minorant_coefficient()) +
                   ",i0=" + cert->minorant_offset().get_str() + "\n";
        } else {
            auto enc = moment_enclosure(*mu, d, config.horizon);
            if (enc)
                csv += format_address(v) + "," + std::to_string(d) +
                       ",upper_bound," + rat_to_string(enc->hi) + ",\n";
        }
    }
    write_file_atomic(dir / "partial_sums.csv", csv);
    return 0;
}

}  // namespace shiftforge
