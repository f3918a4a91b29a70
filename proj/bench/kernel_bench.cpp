// Times the parallel kernels against the serial reference implementation and
// checks they agree. Usage: vcprune_kernel_bench [d_out d_in samples repeats]
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "reference_oracle.hpp"
#include "vcprune/calib_stats.hpp"
#include "vcprune/energy_comp.hpp"
#include "vcprune/masking.hpp"
#include "vcprune/parallel.hpp"
#include "vcprune/scoring.hpp"
#include "vcprune/synthetic.hpp"

using namespace vcprune;

namespace {

double median_seconds(int repeats, const std::function<void()>& fn)
{
    std::vector<double> t;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(t.begin(), t.begin() + static_cast<long>(t.size() / 2), t.end());
    return t[t.size() / 2];
}

void row(const char* kernel, double fast, double serial, double max_dev)
{
    std::printf("%-22s %12.5f %12.5f %9.1fx %12.3g\n", kernel, fast, serial, serial / fast, max_dev);
}

} // namespace

int main(int argc, char** argv)
{
    const std::size_t d_out = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 1024;
    const std::size_t d_in = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 1024;
    const std::size_t samples = argc > 3 ? std::strtoul(argv[3], nullptr, 10) : 256;
    const int repeats = argc > 4 ? std::atoi(argv[4]) : 5;

    const auto w = gaussian_matrix(d_out, d_in, 1);
    const auto x = gaussian_matrix(samples, d_in, 2);
    const EnergyCorrectionConfig cfg;

    std::printf("%zux%zu layer, %zu samples, %d threads, median of %d\n", d_out, d_in, samples, num_threads(), repeats);
    std::printf("%-22s %12s %12s %10s %12s\n", "kernel", "parallel_s", "serial_s", "speedup", "max_abs_dev");

    ChannelStats stats;
    ScoreMatrix scores;
    Matrix<double> oracle_scores;
    const double t_cvr = median_seconds(repeats, [&] {
        stats = update(ChannelStats{}, x);
        scores = score_cvr(w, stats);
    });
    const double t_cvr_ref = median_seconds(repeats, [&] { oracle_scores = oracle::oracle_cvr_scores(w, x, 0.5, 1e-8); });
    row("stats+cvr scores", t_cvr, t_cvr_ref, oracle::compare(oracle_scores, scores.values).max_abs_deviation);

    PruneMask mask, oracle_mask;
    const double t_mask = median_seconds(repeats, [&] { mask = build_mask_unstructured(scores, 0.5); });
    const double t_mask_ref = median_seconds(repeats, [&] { oracle_mask = oracle::oracle_unstructured_mask(scores.values, 0.5); });
    row("unstructured mask", t_mask, t_mask_ref, mask == oracle_mask ? 0.0 : 1.0);

    PruneMask nm, oracle_nm;
    const double t_nm = median_seconds(repeats, [&] { nm = build_mask_nm(scores, 2, 4); });
    const double t_nm_ref = median_seconds(repeats, [&] { oracle_nm = oracle::oracle_nm_mask(scores.values, 2, 4); });
    row("2:4 mask", t_nm, t_nm_ref, nm == oracle_nm ? 0.0 : 1.0);

    WeightMatrix ec, oracle_ec;
    const double t_ec = median_seconds(repeats, [&] { ec = energy_compensate(w, mask, cfg).weights; });
    const double t_ec_ref = median_seconds(repeats, [&] { oracle_ec = oracle::oracle_energy_correct(w, mask, cfg); });
    row("energy compensation", t_ec, t_ec_ref, oracle::compare(oracle_ec, ec).max_abs_deviation);
    return 0;
}
