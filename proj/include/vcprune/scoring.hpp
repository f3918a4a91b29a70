#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "vcprune/calib_stats.hpp"
#include "vcprune/matrix.hpp"

namespace vcprune {

enum class Criterion { magnitude, wanda, cvr };

/// Which activation statistic CVR multiplies in: the variance-based
/// (v + eps)^(1/4) factor, or Wanda's sqrt(E[x^2]).
enum class ActivationFactorMode { variance, wanda };

std::string_view to_string(Criterion c);
Criterion parse_criterion(std::string_view text);
std::string_view to_string(ActivationFactorMode m);
ActivationFactorMode parse_activation_factor(std::string_view text);

/// Nonnegative per-weight importance, same shape as the source weights.
struct ScoreMatrix {
    Matrix<double> values;
    Criterion criterion = Criterion::magnitude;
    double alpha = 0.0;
    double eps = 0.0;
};

struct CvrOptions {
    double alpha = 0.5;
    double eps = 1e-8;
    ActivationFactorMode activation = ActivationFactorMode::variance;
};

/// Population variance of every input column over the output dimension.
std::vector<double> column_variance(const WeightMatrix& weights);

/// c_j = (v_j + eps)^(-alpha/2).
std::vector<double> weight_calibration(std::span<const double> variance, double alpha, double eps);

/// S_ij = |W_ij| * a_j * c_j.
ScoreMatrix score(const WeightMatrix& weights, std::span<const double> a, std::span<const double> c);

ScoreMatrix score_magnitude(const WeightMatrix& weights);
ScoreMatrix score_wanda(const WeightMatrix& weights, const ChannelStats& stats);
ScoreMatrix score_cvr(const WeightMatrix& weights, const ChannelStats& stats, const CvrOptions& options = {});

} // namespace vcprune
