#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "vcprune/energy_comp.hpp"
#include "vcprune/masking.hpp"
#include "vcprune/scoring.hpp"

namespace vcprune {

struct PruneJobConfig {
    std::filesystem::path input;
    std::filesystem::path output;
    /// Mask container; defaults to "<output>.masks".
    std::filesystem::path masks;
    std::filesystem::path report;
    std::filesystem::path stats;
    /// Optional activation dumps keyed by layer name. Used for statistics when
    /// no stats file is given, and for held-out reconstruction error.
    std::filesystem::path activations;

    Criterion criterion = Criterion::cvr;
    double alpha = 0.5;
    double eps = 1e-8;
    ActivationFactorMode activation_factor = ActivationFactorMode::variance;
    SparsitySpec sparsity = SparsitySpec::unstructured(0.5);
    Grouping grouping = Grouping::per_row;

    EcMode ec = EcMode::off;
    EnergyCorrectionConfig ec_config;

    /// Glob over tensor names; only rank-2 float tensors are candidates.
    std::string filter = "*";
    /// Trailing fraction of each activation dump reserved for reporting.
    double holdout = 0.2;
    bool report_timings = false;
    /// 0 leaves the OpenMP default.
    int threads = 0;

    bool needs_stats() const { return criterion != Criterion::magnitude; }
    std::filesystem::path masks_path() const;
    CvrOptions cvr_options() const { return {alpha, eps, activation_factor}; }

    /// Checks value ranges only; paths are checked when a job runs.
    void validate() const;
};

/// Sets one `key = value` entry. Unknown keys are an invalid_argument error.
void apply_setting(PruneJobConfig& config, std::string_view key, std::string_view value);

/// Flat key=value text, '#' starts a comment. Later keys override earlier.
std::map<std::string, std::string> parse_settings(std::istream& in);
PruneJobConfig load_config(const std::filesystem::path& path);

/// Canonical key=value rendering, accepted back by load_config.
std::string format_config(const PruneJobConfig& config);

} // namespace vcprune
