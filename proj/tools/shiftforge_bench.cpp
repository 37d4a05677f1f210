// Compares the serial reference sweep against the OpenMP sweep on the
// per-vertex verification kernels and checks that both produce identical
// reports.

#include "shiftforge/report.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cstdlib>
#include <iostream>

using namespace shiftforge;

namespace {

double now_seconds() {
#ifdef _OPENMP
    return omp_get_wtime();
#else
    return static_cast<double>(clock()) / CLOCKS_PER_SEC;
#endif
}

double run_once(const ShiftModel& model, const RunConfig& config,
                std::string& rendered) {
    double t0 = now_seconds();
    VerifySuites suites = run_verification(model, config);
    double dt = now_seconds() - t0;
    rendered = render_verify_report(model, config, suites);
    return dt;
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig config;
    config.n = argc > 1 ? static_cast<unsigned>(std::atoi(argv[1])) : 1;
    config.rooted = !(argc > 2 && std::string(argv[2]) == "rootless");
    config.depth = argc > 3 ? static_cast<std::uint32_t>(std::atoi(argv[3])) : 2;
    config.breadth = argc > 4 ? static_cast<std::uint32_t>(std::atoi(argv[4])) : 3;

#ifdef _OPENMP
    if (const char* cap = std::getenv("SHIFTFORGE_THREADS")) {
        int threads = std::atoi(cap);
        if (threads > 0) omp_set_num_threads(threads);
    }
    int max_threads = omp_get_max_threads();
#else
    int max_threads = 1;
#endif

    std::cout << "bench: n=" << config.n
              << (config.rooted ? " rooted" : " rootless")
              << " depth=" << config.depth << " breadth=" << config.breadth
              << " threads=" << max_threads << "\n";

    // Warm-up run populates the memoized normalizers so both engines time
    // the same per-vertex kernels.
    auto model = ShiftModel::assemble(config.n, config.rooted);
    {
        std::string warm;
        config.parallel = false;
        run_once(*model, config, warm);
    }

    std::string serial_report, parallel_report;
    config.parallel = false;
    double t_serial = run_once(*model, config, serial_report);
    config.parallel = true;
    double t_parallel = run_once(*model, config, parallel_report);

    std::cout << "serial:   " << t_serial << " s\n";
    std::cout << "parallel: " << t_parallel << " s\n";
    if (t_parallel > 0)
        std::cout << "speedup:  " << t_serial / t_parallel << "x\n";

    if (serial_report != parallel_report) {
        std::cout << "MISMATCH: serial and parallel reports differ\n";
        return 1;
    }
    std::cout << "reports identical: yes\n";
    return 0;
}
