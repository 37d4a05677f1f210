#ifndef SHIFTFORGE_REPORT_HPP
#define SHIFTFORGE_REPORT_HPP

#include "shiftforge/bridge.hpp"
#include "shiftforge/verification.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace shiftforge {

struct RunConfig {
    unsigned n = 1;
    bool rooted = true;
    std::uint32_t depth = 2;
    std::uint32_t breadth = 3;
    std::uint64_t horizon = 256;
    Rat precision = pow2_rat(-16);
    Rat divergence_bound = Rat(100);
    unsigned expect_dense = 0;    // 0 = use n
    unsigned expect_trivial = 0;  // 0 = use n+1
    std::string out_dir = "out";
    std::string format = "json";
    std::vector<std::string> vertices;  // export selection, address syntax
    long degree = -100;                 // export degree; -100 = use n+1
    bool parallel = true;

    unsigned dense_degree() const { return expect_dense ? expect_dense : n; }
    unsigned trivial_degree() const {
        return expect_trivial ? expect_trivial : n + 1;
    }
    long export_degree() const {
        return degree == -100 ? static_cast<long>(n) + 1 : degree;
    }
};

struct VerifySuites {
    std::vector<ConsistencyReport> consistency;
    std::vector<MomentProfile> profiles;
    DomainVerdict dense;
    DomainVerdict trivial;
    std::vector<EquivalenceReport> bridge;
    InjectivityReport injectivity;
    Verdict aggregate = Verdict::unresolved;
    int exit_code = 2;
};

// Runs every verification suite over the truncation. Deterministic: the
// rendered report depends only on the config.
VerifySuites run_verification(const ShiftModel& model, const RunConfig& config);

// Deterministic JSON renderings.
std::string render_manifest(const ShiftModel& model, const RunConfig& config);
std::string render_verify_report(const ShiftModel& model, const RunConfig& config,
                                 const VerifySuites& suites);

// Command entry points shared by the CLI and the tests. Return process exit
// codes (verify: 0 all pass / 1 any fail / 2 unresolved precision).
int cmd_construct(const RunConfig& config);
int cmd_verify(const RunConfig& config);
int cmd_export(const RunConfig& config);

// Atomic file write (write to a temporary, then rename into place).
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace shiftforge

#endif
