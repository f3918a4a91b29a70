#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vcprune/matrix.hpp"

namespace vcprune {

/// Rows are samples (tokens), columns are input channels.
using ActivationMatrix = Matrix<double>;

/// Streaming per-channel moments: sample count, running mean and running sum
/// of squared deviations (m2). Variance is the population variance m2/count.
class ChannelStats {
public:
    ChannelStats() = default;
    explicit ChannelStats(std::size_t d_in) : mean_(d_in, 0.0), m2_(d_in, 0.0) {}
    ChannelStats(std::uint64_t count, std::vector<double> mean, std::vector<double> m2);

    std::size_t d_in() const noexcept { return mean_.size(); }
    std::uint64_t count() const noexcept { return count_; }
    std::span<const double> mean() const noexcept { return mean_; }
    std::span<const double> m2() const noexcept { return m2_; }

    double variance(std::size_t j) const;
    std::vector<double> variance() const;
    /// E[x_j^2] = mean^2 + variance.
    std::vector<double> second_moment() const;

    /// Folds a batch in. A default-constructed (d_in = 0) value adopts the
    /// batch width.
    void update(const ActivationMatrix& batch);

private:
    std::uint64_t count_ = 0;
    std::vector<double> mean_;
    std::vector<double> m2_;
};

ChannelStats update(ChannelStats stats, const ActivationMatrix& batch);

/// Moments of the concatenated streams. An empty operand is the identity.
ChannelStats merge(const ChannelStats& a, const ChannelStats& b);

/// a_j = (variance_j + eps)^(1/4).
std::vector<double> activation_factor(const ChannelStats& stats, double eps = 1e-8);

/// sqrt(E[x_j^2]), the per-channel activation norm used by Wanda (up to the
/// constant sqrt(count)).
std::vector<double> wanda_factor(const ChannelStats& stats);

} // namespace vcprune
