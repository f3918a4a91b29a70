#include "vcprune/energy_comp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kernels.hpp"

namespace vcprune {

void EnergyCorrectionConfig::validate() const
{
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw Error(ErrorKind::invalid_argument, "energy correction eps must be > 0");
    }
    if (!(clamp_lo > 0.0 && clamp_lo <= 1.0 && clamp_hi >= 1.0 && std::isfinite(clamp_hi))) {
        throw Error(ErrorKind::invalid_argument, "clamp range must satisfy 0 < lo <= 1 <= hi");
    }
}

std::string_view to_string(EcMode mode)
{
    switch (mode) {
    case EcMode::off: return "off";
    case EcMode::columns: return "col";
    case EcMode::columns_rows: return "on";
    }
    return "unknown";
}

EcMode parse_ec_mode(std::string_view text)
{
    if (text == "off") return EcMode::off;
    if (text == "col" || text == "columns") return EcMode::columns;
    if (text == "on" || text == "col+row") return EcMode::columns_rows;
    throw Error(ErrorKind::invalid_argument, "unknown ec mode '" + std::string(text) + "'");
}

namespace {

void check_inputs(const WeightMatrix& original, const WeightMatrix& pruned, const PruneMask& mask,
                  const EnergyCorrectionConfig& cfg, const char* what)
{
    require_same_shape(original, pruned, what);
    require_same_shape(original, mask, what);
    if (original.empty()) {
        throw Error(ErrorKind::empty_input, std::string(what) + ": empty matrix");
    }
    cfg.validate();
}

double clamp_scale(double e_orig, double e_pruned, const EnergyCorrectionConfig& cfg, bool& clamped)
{
    const double s = std::sqrt(e_orig / (e_pruned + cfg.eps));
    clamped = s < cfg.clamp_lo || s > cfg.clamp_hi;
    return std::clamp(s, cfg.clamp_lo, cfg.clamp_hi);
}

double mean_relative_deviation(const std::vector<double>& e_orig, const std::vector<double>& e_cand)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < e_orig.size(); ++k) {
        if (e_orig[k] > 0.0) {
            sum += std::abs(e_cand[k] - e_orig[k]) / e_orig[k];
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

std::vector<double> column_means(const WeightMatrix& w)
{
    std::vector<double> mu(w.cols(), 0.0);
    const double n = static_cast<double>(w.rows());
    detail::for_column_blocks(w.cols(), [&](std::size_t j0, std::size_t j1) {
        for (std::size_t i = 0; i < w.rows(); ++i) {
            const double* x = w.data() + i * w.cols();
            for (std::size_t j = j0; j < j1; ++j) mu[j] += x[j];
        }
        for (std::size_t j = j0; j < j1; ++j) mu[j] /= n;
    });
    return mu;
}

// Centered column energies of `w` about `mu`.
std::vector<double> column_energies(const WeightMatrix& w, const std::vector<double>& mu)
{
    std::vector<double> e(w.cols(), 0.0);
    detail::for_column_blocks(w.cols(), [&](std::size_t j0, std::size_t j1) {
        for (std::size_t i = 0; i < w.rows(); ++i) {
            const double* x = w.data() + i * w.cols();
            for (std::size_t j = j0; j < j1; ++j) {
                const double d = x[j] - mu[j];
                e[j] += d * d;
            }
        }
    });
    return e;
}

double row_mean(std::span<const double> row)
{
    double sum = 0.0;
    for (double x : row) sum += x;
    return sum / static_cast<double>(row.size());
}

double row_energy(std::span<const double> row, double mu)
{
    double e = 0.0;
    for (double x : row) {
        const double d = x - mu;
        e += d * d;
    }
    return e;
}

} // namespace

CorrectionStep correct_columns(const WeightMatrix& original, const WeightMatrix& pruned, const PruneMask& mask,
                               const EnergyCorrectionConfig& cfg, Remask remask)
{
    check_inputs(original, pruned, mask, cfg, "correct_columns");
    const std::size_t rows = original.rows();
    const std::size_t cols = original.cols();

    CorrectionStep step;
    const auto mu = column_means(original);
    step.energy_original.assign(cols, 0.0);
    step.energy_input.assign(cols, 0.0);
    step.scales.assign(cols, 1.0);
    std::vector<std::uint8_t> clamped(cols, 0);

    detail::for_column_blocks(cols, [&](std::size_t j0, std::size_t j1) {
        double* eo = step.energy_original.data();
        double* ep = step.energy_input.data();
        for (std::size_t i = 0; i < rows; ++i) {
            const double* w = original.data() + i * cols;
            const double* p = pruned.data() + i * cols;
            for (std::size_t j = j0; j < j1; ++j) {
                const double dw = w[j] - mu[j];
                const double dp = p[j] - mu[j];
                eo[j] += dw * dw;
                ep[j] += dp * dp;
            }
        }
        for (std::size_t j = j0; j < j1; ++j) {
            bool c = false;
            step.scales[j] = clamp_scale(eo[j], ep[j], cfg, c);
            clamped[j] = c;
        }
    });
    for (auto c : clamped) step.clamped += c;

    step.weights = WeightMatrix(rows, cols);
    const std::uint8_t keep_all = remask == Remask::no;
    detail::for_rows(rows, [&](std::size_t i) {
        const double* p = pruned.data() + i * cols;
        const std::uint8_t* m = mask.data() + i * cols;
        double* out = step.weights.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) {
            const double v = (p[j] - mu[j]) * step.scales[j] + mu[j];
            out[j] = detail::kept(v, m[j] | keep_all);
        }
    });
    return step;
}

CorrectionStep correct_rows(const WeightMatrix& original, const WeightMatrix& pruned, const PruneMask& mask,
                            const EnergyCorrectionConfig& cfg, Remask remask)
{
    check_inputs(original, pruned, mask, cfg, "correct_rows");
    const std::size_t rows = original.rows();
    const std::size_t cols = original.cols();

    CorrectionStep step;
    step.weights = WeightMatrix(rows, cols);
    step.scales.assign(rows, 1.0);
    step.energy_original.assign(rows, 0.0);
    step.energy_input.assign(rows, 0.0);
    std::vector<std::uint8_t> clamped(rows, 0);
    const std::uint8_t keep_all = remask == Remask::no;

    detail::for_rows(rows, [&](std::size_t i) {
        const auto w = original.row(i);
        const auto p = pruned.row(i);
        const double mu = row_mean(w);
        const double eo = row_energy(w, mu);
        const double ep = row_energy(p, mu);
        bool c = false;
        const double s = clamp_scale(eo, ep, cfg, c);
        step.scales[i] = s;
        step.energy_original[i] = eo;
        step.energy_input[i] = ep;
        clamped[i] = c;
        const std::uint8_t* m = mask.data() + i * cols;
        double* out = step.weights.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) {
            const double v = (p[j] - mu) * s + mu;
            out[j] = detail::kept(v, m[j] | keep_all);
        }
    });
    for (auto c : clamped) step.clamped += c;
    return step;
}

Compensated energy_compensate(const WeightMatrix& original, const PruneMask& mask, const EnergyCorrectionConfig& cfg,
                              EcMode mode)
{
    require_same_shape(original, mask, "energy_compensate");
    cfg.validate();
    Compensated result;
    auto& report = result.report;
    const std::size_t rows = original.rows();
    const std::size_t cols = original.cols();

    if (original.empty() || mode == EcMode::off) {
        WeightMatrix masked(rows, cols);
        detail::for_rows(rows, [&](std::size_t i) {
            const double* w = original.data() + i * cols;
            const std::uint8_t* m = mask.data() + i * cols;
            double* out = masked.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) out[j] = detail::kept(w[j], m[j]);
        });
        if (!original.empty()) {
            report.column_deviation_before = report.column_deviation_after = column_energy_deviation(original, masked);
            report.row_deviation_before = report.row_deviation_after = row_energy_deviation(original, masked);
        }
        result.weights = std::move(masked);
        return result;
    }

    // Same arithmetic as correct_columns followed by correct_rows, but the
    // masked input is never materialized and the row step runs on each row
    // while it is still in cache.
    const auto mu = column_means(original);
    std::vector<double> eo(cols, 0.0);
    std::vector<double> ep(cols, 0.0);
    auto& col_scales = report.column_scales;
    col_scales.assign(cols, 1.0);
    std::vector<std::uint8_t> col_clamped(cols, 0);
    detail::for_column_blocks(cols, [&](std::size_t j0, std::size_t j1) {
        for (std::size_t i = 0; i < rows; ++i) {
            const double* w = original.data() + i * cols;
            const std::uint8_t* m = mask.data() + i * cols;
            for (std::size_t j = j0; j < j1; ++j) {
                const double dw = w[j] - mu[j];
                const double dp = detail::kept(w[j], m[j]) - mu[j];
                eo[j] += dw * dw;
                ep[j] += dp * dp;
            }
        }
        for (std::size_t j = j0; j < j1; ++j) {
            bool c = false;
            col_scales[j] = clamp_scale(eo[j], ep[j], cfg, c);
            col_clamped[j] = c;
        }
    });
    for (auto c : col_clamped) report.clamped_columns += c;
    report.column_deviation_before = mean_relative_deviation(eo, ep);

    const bool rows_too = mode == EcMode::columns_rows;
    if (rows_too) report.row_scales.assign(rows, 1.0);
    std::vector<std::uint8_t> row_clamped(rows, 0);
    std::vector<double> row_eo(rows), row_before(rows), row_after(rows);

    result.weights = WeightMatrix(rows, cols);
    const std::size_t chunks = (rows + detail::row_chunk - 1) / detail::row_chunk;
    std::vector<double> partial(chunks * cols, 0.0);
    detail::for_row_chunks(rows, [&](std::size_t chunk, std::size_t i0, std::size_t i1) {
        double* col_after = partial.data() + chunk * cols;
        for (std::size_t i = i0; i < i1; ++i) {
            const auto w = original.row(i);
            const std::uint8_t* m = mask.data() + i * cols;
            double* out = result.weights.data() + i * cols;
            const double rmu = row_mean(w);
            // Independent left-to-right sums share one sweep.
            double e_orig = 0.0, before = 0.0, e_col = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
                const double p = detail::kept(w[j], m[j]);
                const double v = detail::kept((p - mu[j]) * col_scales[j] + mu[j], m[j]);
                out[j] = v;
                const double dw = w[j] - rmu;
                const double dp = p - rmu;
                const double dv = v - rmu;
                e_orig += dw * dw;
                before += dp * dp;
                e_col += dv * dv;
            }
            row_eo[i] = e_orig;
            row_before[i] = before;
            double after = e_col;
            if (rows_too) {
                bool c = false;
                const double s = clamp_scale(e_orig, e_col, cfg, c);
                report.row_scales[i] = s;
                row_clamped[i] = c;
                after = 0.0;
                for (std::size_t j = 0; j < cols; ++j) {
                    const double v = detail::kept((out[j] - rmu) * s + rmu, m[j]);
                    out[j] = v;
                    const double d = v - rmu;
                    after += d * d;
                }
            }
            row_after[i] = after;
            for (std::size_t j = 0; j < cols; ++j) {
                const double d = out[j] - mu[j];
                col_after[j] += d * d;
            }
        }
    });
    for (auto c : row_clamped) report.clamped_rows += c;

    report.row_deviation_before = mean_relative_deviation(row_eo, row_before);
    report.row_deviation_after = mean_relative_deviation(row_eo, row_after);
    std::vector<double> e_after(cols, 0.0);
    for (std::size_t c = 0; c < chunks; ++c) {
        for (std::size_t j = 0; j < cols; ++j) e_after[j] += partial[c * cols + j];
    }
    report.column_deviation_after = mean_relative_deviation(eo, e_after);
    return result;
}

double column_energy_deviation(const WeightMatrix& original, const WeightMatrix& candidate)
{
    require_same_shape(original, candidate, "column_energy_deviation");
    if (original.empty()) return 0.0;
    const auto mu = column_means(original);
    return mean_relative_deviation(column_energies(original, mu), column_energies(candidate, mu));
}

double row_energy_deviation(const WeightMatrix& original, const WeightMatrix& candidate)
{
    require_same_shape(original, candidate, "row_energy_deviation");
    if (original.empty()) return 0.0;
    std::vector<double> eo(original.rows());
    std::vector<double> ec(original.rows());
    detail::for_rows(original.rows(), [&](std::size_t i) {
        const double mu = row_mean(original.row(i));
        eo[i] = row_energy(original.row(i), mu);
        ec[i] = row_energy(candidate.row(i), mu);
    });
    return mean_relative_deviation(eo, ec);
}

} // namespace vcprune
