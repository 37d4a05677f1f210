#include "shiftforge/report.hpp"

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cstdlib>
#include <iostream>

namespace {

void apply_thread_cap() {
#ifdef _OPENMP
    if (const char* cap = std::getenv("SHIFTFORGE_THREADS")) {
        int threads = std::atoi(cap);
        if (threads > 0) omp_set_num_threads(threads);
    }
#endif
}

void add_common(CLI::App* cmd, shiftforge::RunConfig& config,
                std::string& precision) {
    cmd->add_option("--n", config.n, "order of the construction (>= 1)")
        ->check(CLI::PositiveNumber);
    auto* rooted = cmd->add_flag("--rooted", "build on the rooted extremal tree");
    cmd->add_flag("--rootless", "build on the rootless extremal tree")
        ->excludes(rooted);
    cmd->add_option("--depth", config.depth, "truncation depth")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--breadth", config.breadth, "children per vertex")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--horizon", config.horizon, "atoms per measure")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--precision", precision, "residual tolerance, p/q");
    cmd->add_option("--out", config.out_dir, "output directory");
    cmd->add_option("--format", config.format, "json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
    cmd->add_flag("--serial", "disable parallel sweeps");
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap();

    CLI::App app{"certified weighted-shift models on extremal directed trees"};
    app.require_subcommand(1);

    shiftforge::RunConfig config;
    std::string precision;
    std::string bound;

    auto* construct =
        app.add_subcommand("construct", "build a model and write its manifest");
    add_common(construct, config, precision);

    auto* verify =
        app.add_subcommand("verify", "run the verification suites and report");
    add_common(verify, config, precision);
    verify->add_option("--expect-dense", config.expect_dense,
                       "degree expected densely defined (default n)");
    verify->add_option("--expect-trivial", config.expect_trivial,
                       "degree expected to have trivial domain (default n+1)");
    verify->add_option("--bound", bound,
                       "divergence validation bound (default 100)");

    auto* exp = app.add_subcommand("export", "dump atoms, weights, certificates");
    add_common(exp, config, precision);
    exp->add_option("--vertex", config.vertices,
                    "vertex address (repeatable), e.g. 0: or 0:1.2");
    exp->add_option("--degree", config.degree, "moment degree for partial sums");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors exit 2
    }

    try {
        for (auto* cmd : {construct, verify, exp}) {
            if (cmd->parsed()) {
                if (cmd->count("--rootless")) config.rooted = false;
                if (cmd->count("--serial")) config.parallel = false;
            }
        }
        if (!precision.empty())
            config.precision = shiftforge::rat_from_string(precision);
        if (config.precision >= 1 || sgn(config.precision) <= 0) {
            std::cerr << "precision must lie in (0, 1)\n";
            return 2;
        }
        if (!bound.empty())
            config.divergence_bound = shiftforge::rat_from_string(bound);

        if (construct->parsed()) return shiftforge::cmd_construct(config);
        if (verify->parsed()) {
            int code = shiftforge::cmd_verify(config);
            std::cout << "verify: exit " << code << " ("
                      << (code == 0 ? "all pass"
                                    : code == 1 ? "failures" : "unresolved")
                      << "), report at " << config.out_dir << "/report.json\n";
            return code;
        }
        if (exp->parsed()) return shiftforge::cmd_export(config);
    } catch (const shiftforge::PrecisionUnreachable& e) {
        std::cerr << "unresolved: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
