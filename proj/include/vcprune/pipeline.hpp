#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vcprune/calib_stats.hpp"
#include "vcprune/config.hpp"
#include "vcprune/energy_comp.hpp"
#include "vcprune/matrix.hpp"

namespace vcprune {

/// Wall-clock seconds per stage.
struct StageTimings {
    double scoring = 0.0;
    double masking = 0.0;
    double compensation = 0.0;

    double total() const { return scoring + masking + compensation; }
};

struct LayerReport {
    std::string layer;
    std::size_t d_out = 0;
    std::size_t d_in = 0;
    Criterion criterion = Criterion::magnitude;
    std::string sparsity;
    double target_sparsity = 0.0;
    double achieved_sparsity = 0.0;
    EcMode ec = EcMode::off;
    /// ||X W'^T - X W^T||_F / ||X W^T||_F on held-out rows.
    std::optional<double> reconstruction_error;
    std::optional<CorrectionReport> correction;
    StageTimings timings;
};

struct LayerResult {
    WeightMatrix weights;
    PruneMask mask;
    LayerReport report;
};

/// Scores, masks and (optionally) energy-compensates one weight matrix.
/// `stats` is required for the wanda and cvr criteria; `heldout` enables the
/// reconstruction-error field.
LayerResult prune_layer(const WeightMatrix& weights, const ChannelStats* stats, const PruneJobConfig& config,
                        const std::string& name = "layer", const ActivationMatrix* heldout = nullptr);

double reconstruction_error(const WeightMatrix& original, const WeightMatrix& pruned,
                            const ActivationMatrix& activations);

/// Splits an activation dump into calibration rows and the trailing held-out
/// fraction. Both parts keep at least one row when the dump has two or more.
struct ActivationSplit {
    ActivationMatrix calibration;
    ActivationMatrix heldout;
};
ActivationSplit split_activations(const ActivationMatrix& activations, double holdout);

struct JobSummary {
    std::vector<LayerReport> layers;
    std::vector<std::string> passthrough;
};

/// Prunes every rank-2 float tensor of `config.input` matching the filter,
/// copies the rest verbatim, and writes the output checkpoint, the mask
/// container and (if configured) the JSON report. Any layer failure aborts
/// the job with the layer named in the error.
JobSummary run_job(const PruneJobConfig& config);

std::string report_json(const JobSummary& summary, const PruneJobConfig& config);
/// Human-readable table of a report previously produced by report_json.
std::string format_report(const std::string& json_text);

struct BenchmarkRow {
    std::string layer;
    std::string method;
    bool weight_update = false;
    /// Per-stage medians.
    StageTimings median;
    /// Median of per-run totals.
    double total = 0.0;
};

struct BenchmarkTable {
    std::vector<BenchmarkRow> rows;
    /// Per layer: median EC time / median (scoring + masking) time of the
    /// configured criterion.
    std::vector<double> ec_overhead;
};

/// Times magnitude, wanda (when stats exist), the configured criterion, and
/// the configured criterion with EC, reporting per-stage medians.
BenchmarkTable benchmark_layer(const std::string& name, const WeightMatrix& weights, const ChannelStats* stats,
                               const PruneJobConfig& config, int repeats);
BenchmarkTable benchmark(const PruneJobConfig& config, int repeats);
std::string format_benchmark(const BenchmarkTable& table);

struct AblationRow {
    std::string label;
    double reconstruction_error = 0.0;
    double column_energy_deviation = 0.0;
    double achieved_sparsity = 0.0;
};

/// Wanda baseline, +CVR, +EC_col, +EC_col+row on one layer. Statistics come
/// from the calibration split and errors from the held-out split.
std::vector<AblationRow> run_ablation(const WeightMatrix& weights, const ActivationMatrix& activations,
                                      const PruneJobConfig& config);
std::string format_ablation(const std::vector<AblationRow>& rows);

} // namespace vcprune
