#include "vcprune/scoring.hpp"

#include <cmath>
#include <string>

#include "kernels.hpp"

namespace vcprune {

std::string_view to_string(Criterion c)
{
    switch (c) {
    case Criterion::magnitude: return "magnitude";
    case Criterion::wanda: return "wanda";
    case Criterion::cvr: return "cvr";
    }
    return "unknown";
}

Criterion parse_criterion(std::string_view text)
{
    if (text == "magnitude") return Criterion::magnitude;
    if (text == "wanda") return Criterion::wanda;
    if (text == "cvr") return Criterion::cvr;
    throw Error(ErrorKind::invalid_argument, "unknown criterion '" + std::string(text) + "'");
}

std::string_view to_string(ActivationFactorMode m)
{
    return m == ActivationFactorMode::variance ? "variance" : "wanda";
}

ActivationFactorMode parse_activation_factor(std::string_view text)
{
    if (text == "variance") return ActivationFactorMode::variance;
    if (text == "wanda") return ActivationFactorMode::wanda;
    throw Error(ErrorKind::invalid_argument, "unknown activation factor '" + std::string(text) + "'");
}

std::vector<double> column_variance(const WeightMatrix& weights)
{
    if (weights.rows() == 0 || weights.cols() == 0) {
        throw Error(ErrorKind::empty_input, "column variance of an empty matrix");
    }
    const std::size_t rows = weights.rows();
    const std::size_t cols = weights.cols();
    const double n = static_cast<double>(rows);
    std::vector<double> var(cols, 0.0);
    detail::for_column_blocks(cols, [&](std::size_t j0, std::size_t j1) {
        const std::size_t w = j1 - j0;
        std::vector<double> mean(w, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            const double* x = weights.data() + i * cols + j0;
            for (std::size_t k = 0; k < w; ++k) mean[k] += x[k];
        }
        for (std::size_t k = 0; k < w; ++k) mean[k] /= n;
        double* acc = var.data() + j0;
        for (std::size_t i = 0; i < rows; ++i) {
            const double* x = weights.data() + i * cols + j0;
            for (std::size_t k = 0; k < w; ++k) {
                const double d = x[k] - mean[k];
                acc[k] += d * d;
            }
        }
        for (std::size_t k = 0; k < w; ++k) acc[k] /= n;
    });
    return var;
}

std::vector<double> weight_calibration(std::span<const double> variance, double alpha, double eps)
{
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw Error(ErrorKind::invalid_argument, "alpha must be finite and >= 0");
    }
    if (!(eps > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "eps must be > 0");
    }
    std::vector<double> c(variance.size());
    const double exponent = -alpha / 2.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
        c[j] = std::pow(variance[j] + eps, exponent);
    }
    return c;
}

ScoreMatrix score(const WeightMatrix& weights, std::span<const double> a, std::span<const double> c)
{
    if (a.size() != weights.cols() || c.size() != weights.cols()) {
        throw Error(ErrorKind::dimension_mismatch, "factor length does not match d_in " + std::to_string(weights.cols()));
    }
    const std::size_t cols = weights.cols();
    std::vector<double> ac(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        ac[j] = a[j] * c[j];
        if (!std::isfinite(ac[j]) || ac[j] < 0.0) {
            throw Error(ErrorKind::invalid_argument, "calibration factors must be finite and nonnegative");
        }
    }
    ScoreMatrix s{Matrix<double>(weights.rows(), cols), Criterion::cvr};
    detail::for_rows(weights.rows(), [&](std::size_t i) {
        const double* w = weights.data() + i * cols;
        double* out = s.values.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) out[j] = std::abs(w[j]) * ac[j];
    });
    return s;
}

ScoreMatrix score_magnitude(const WeightMatrix& weights)
{
    ScoreMatrix s{Matrix<double>(weights.rows(), weights.cols()), Criterion::magnitude};
    const auto in = weights.values();
    auto out = s.values.values();
    detail::for_rows(weights.rows(), [&](std::size_t i) {
        for (std::size_t j = 0, k = i * weights.cols(); j < weights.cols(); ++j, ++k) out[k] = std::abs(in[k]);
    });
    return s;
}

namespace {

void require_stats_width(const WeightMatrix& weights, const ChannelStats& stats)
{
    if (stats.d_in() != weights.cols()) {
        throw Error(ErrorKind::dimension_mismatch, "stats d_in " + std::to_string(stats.d_in()) +
                                                       " does not match weight d_in " + std::to_string(weights.cols()));
    }
}

} // namespace

ScoreMatrix score_wanda(const WeightMatrix& weights, const ChannelStats& stats)
{
    require_stats_width(weights, stats);
    const auto a = wanda_factor(stats);
    const std::vector<double> ones(a.size(), 1.0);
    auto s = score(weights, a, ones);
    s.criterion = Criterion::wanda;
    return s;
}

ScoreMatrix score_cvr(const WeightMatrix& weights, const ChannelStats& stats, const CvrOptions& options)
{
    require_stats_width(weights, stats);
    const auto a = options.activation == ActivationFactorMode::variance ? activation_factor(stats, options.eps)
                                                                         : wanda_factor(stats);
    const auto c = weight_calibration(column_variance(weights), options.alpha, options.eps);
    auto s = score(weights, a, c);
    s.alpha = options.alpha;
    s.eps = options.eps;
    return s;
}

} // namespace vcprune
