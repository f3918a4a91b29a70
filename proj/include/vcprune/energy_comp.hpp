#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "vcprune/matrix.hpp"

namespace vcprune {

struct EnergyCorrectionConfig {
    double eps = 1e-8;
    double clamp_lo = 0.25;
    double clamp_hi = 4.0;

    void validate() const;
};

/// Which correction steps run after masking. Columns always precede rows.
enum class EcMode { off, columns, columns_rows };

std::string_view to_string(EcMode mode);
EcMode parse_ec_mode(std::string_view text);

enum class Remask { yes, no };

/// Output of one correction step along one axis.
struct CorrectionStep {
    WeightMatrix weights;
    std::vector<double> scales;
    std::size_t clamped = 0;
    /// Centered energies about the original means, of `original` and of the
    /// step's input.
    std::vector<double> energy_original;
    std::vector<double> energy_input;
};

/// Rescales each column of `pruned` about the column mean of `original` so
/// that its centered energy matches the original's:
///
///     s_j = clamp(sqrt(E_orig(j) / (E_pruned(j) + eps)), lo, hi)
///     out = (pruned - mu_j) * s_j + mu_j
///
/// then zeroes masked positions again unless `remask` is no.
CorrectionStep correct_columns(const WeightMatrix& original, const WeightMatrix& pruned, const PruneMask& mask,
                               const EnergyCorrectionConfig& cfg, Remask remask = Remask::yes);

/// Same transform along rows (output dimension).
CorrectionStep correct_rows(const WeightMatrix& original, const WeightMatrix& pruned, const PruneMask& mask,
                            const EnergyCorrectionConfig& cfg, Remask remask = Remask::yes);

struct CorrectionReport {
    std::vector<double> column_scales;
    std::vector<double> row_scales;
    std::size_t clamped_columns = 0;
    std::size_t clamped_rows = 0;
    // Mean relative centered-energy deviation from the original, before
    // correction (M . W) and after it (final output).
    double column_deviation_before = 0.0;
    double column_deviation_after = 0.0;
    double row_deviation_before = 0.0;
    double row_deviation_after = 0.0;

    std::size_t clamped_count() const { return clamped_columns + clamped_rows; }
};

struct Compensated {
    WeightMatrix weights;
    CorrectionReport report;
};

/// Masks `original`, then corrects columns and (for columns_rows) rows. Mean
/// and original energy always come from `original`; the row step consumes the
/// column-corrected matrix. Masked positions are exactly zero on return.
Compensated energy_compensate(const WeightMatrix& original, const PruneMask& mask, const EnergyCorrectionConfig& cfg,
                              EcMode mode = EcMode::columns_rows);

/// Mean over columns with nonzero original energy of
/// |E_cand(j) - E_orig(j)| / E_orig(j), both centered on the original column
/// mean.
double column_energy_deviation(const WeightMatrix& original, const WeightMatrix& candidate);
double row_energy_deviation(const WeightMatrix& original, const WeightMatrix& candidate);

} // namespace vcprune
