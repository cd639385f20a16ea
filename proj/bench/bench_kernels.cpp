#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include <omp.h>

#include "fusevid/kernels.hpp"
#include "fusevid/rng.hpp"

// Times each compute kernel in both backends on identical buffers, checks
// the outputs match bit-for-bit (same per-element reduction order), and
// prints the speedup. Sizes roughly match a desk-scale training step.

using fusevid::Rng;
namespace kr = fusevid::kernels;

namespace {

using clock_type = std::chrono::steady_clock;

double time_best_ms(int reps, const std::function<void()>& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock_type::now();
        fn();
        const auto t1 = clock_type::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (double& v : out) v = rng.normal();
    return out;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

struct Row {
    const char* name;
    double serial_ms;
    double omp_ms;
    bool match;
};

void print_row(const Row& row) {
    std::printf("%-18s %10.3f ms %10.3f ms %8.2fx   %s\n", row.name, row.serial_ms,
                row.omp_ms, row.serial_ms / row.omp_ms, row.match ? "match" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    int reps = 5;
    double scale = 1.0;
    if (argc > 1) scale = std::atof(argv[1]);
    if (scale <= 0.0) {
        std::fprintf(stderr, "usage: %s [size-scale]\n", argv[0]);
        return 1;
    }

    const auto m = static_cast<std::size_t>(256 * scale);
    const auto n_elems = static_cast<std::size_t>(1 << 22);
    const auto rows = static_cast<std::size_t>(4096 * scale);
    const std::size_t cols = 512;

    std::printf("threads=%d  gemm %zux%zux%zu  elementwise n=%zu  rowwise %zux%zu\n\n",
                omp_get_max_threads(), m, m, m, n_elems, rows, cols);
    std::printf("%-18s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    std::vector<Row> rows_out;

    {
        const std::vector<double> a = random_buffer(m * m, 1);
        const std::vector<double> b = random_buffer(m * m, 2);
        std::vector<double> cs(m * m), cp(m * m);
        const double ts = time_best_ms(reps, [&] {
            kr::serial::gemm_nn(a.data(), b.data(), cs.data(), m, m, m);
        });
        const double tp = time_best_ms(reps, [&] {
            kr::omp::gemm_nn(a.data(), b.data(), cp.data(), m, m, m);
        });
        rows_out.push_back({"gemm_nn", ts, tp, bits_equal(cs, cp)});
        const double tsnt = time_best_ms(reps, [&] {
            kr::serial::gemm_nt(a.data(), b.data(), cs.data(), m, m, m);
        });
        const double tpnt = time_best_ms(reps, [&] {
            kr::omp::gemm_nt(a.data(), b.data(), cp.data(), m, m, m);
        });
        rows_out.push_back({"gemm_nt", tsnt, tpnt, bits_equal(cs, cp)});
        const double tstn = time_best_ms(reps, [&] {
            kr::serial::gemm_tn(a.data(), b.data(), cs.data(), m, m, m);
        });
        const double tptn = time_best_ms(reps, [&] {
            kr::omp::gemm_tn(a.data(), b.data(), cp.data(), m, m, m);
        });
        rows_out.push_back({"gemm_tn", tstn, tptn, bits_equal(cs, cp)});
    }

    {
        const std::vector<double> a = random_buffer(n_elems, 3);
        const std::vector<double> b = random_buffer(n_elems, 4);
        std::vector<double> cs(n_elems), cp(n_elems);
        const double ts = time_best_ms(reps, [&] {
            kr::serial::ew_mul(a.data(), b.data(), cs.data(), n_elems);
        });
        const double tp = time_best_ms(reps, [&] {
            kr::omp::ew_mul(a.data(), b.data(), cp.data(), n_elems);
        });
        rows_out.push_back({"ew_mul", ts, tp, bits_equal(cs, cp)});

        const double tsg = time_best_ms(reps, [&] {
            kr::serial::gelu_fwd(a.data(), cs.data(), n_elems);
        });
        const double tpg = time_best_ms(reps, [&] {
            kr::omp::gelu_fwd(a.data(), cp.data(), n_elems);
        });
        rows_out.push_back({"gelu_fwd", tsg, tpg, bits_equal(cs, cp)});

        std::vector<double> ys = b, yp = b;
        const double tsb = time_best_ms(reps, [&] {
            kr::serial::gelu_bwd(a.data(), b.data(), ys.data(), n_elems);
        });
        const double tpb = time_best_ms(reps, [&] {
            kr::omp::gelu_bwd(a.data(), b.data(), yp.data(), n_elems);
        });
        rows_out.push_back({"gelu_bwd", tsb, tpb, bits_equal(ys, yp)});
    }

    {
        const std::vector<double> x = random_buffer(rows * cols, 5);
        std::vector<double> ys(rows * cols), yp(rows * cols);
        std::vector<double> mean_s(rows), rstd_s(rows), mean_p(rows), rstd_p(rows);
        const double ts = time_best_ms(reps, [&] {
            kr::serial::layer_norm_fwd(x.data(), ys.data(), mean_s.data(), rstd_s.data(),
                                       rows, cols, 1e-5);
        });
        const double tp = time_best_ms(reps, [&] {
            kr::omp::layer_norm_fwd(x.data(), yp.data(), mean_p.data(), rstd_p.data(),
                                    rows, cols, 1e-5);
        });
        rows_out.push_back({"layer_norm_fwd", ts, tp, bits_equal(ys, yp)});

        const double tss = time_best_ms(reps, [&] {
            kr::serial::softmax_fwd(x.data(), ys.data(), rows, cols);
        });
        const double tps = time_best_ms(reps, [&] {
            kr::omp::softmax_fwd(x.data(), yp.data(), rows, cols);
        });
        rows_out.push_back({"softmax_fwd", tss, tps, bits_equal(ys, yp)});
    }

    bool all_match = true;
    for (const Row& row : rows_out) {
        print_row(row);
        all_match = all_match && row.match;
    }
    if (!all_match) {
        std::fprintf(stderr, "\nbackend outputs differ\n");
        return 2;
    }
    return 0;
}
