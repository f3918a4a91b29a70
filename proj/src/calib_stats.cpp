#include "vcprune/calib_stats.hpp"

#include <cmath>
#include <string>

#include "kernels.hpp"

namespace vcprune {

ChannelStats::ChannelStats(std::uint64_t count, std::vector<double> mean, std::vector<double> m2)
    : count_(count), mean_(std::move(mean)), m2_(std::move(m2))
{
    if (mean_.size() != m2_.size()) {
        throw Error(ErrorKind::dimension_mismatch, "channel stats: mean and m2 lengths differ");
    }
    for (std::size_t j = 0; j < m2_.size(); ++j) {
        if (!std::isfinite(mean_[j]) || !std::isfinite(m2_[j])) {
            throw Error(ErrorKind::non_finite, "channel stats: non-finite moment in channel " + std::to_string(j));
        }
        if (m2_[j] < 0.0) {
            throw Error(ErrorKind::invalid_argument, "channel stats: negative m2 in channel " + std::to_string(j));
        }
    }
}

double ChannelStats::variance(std::size_t j) const
{
    return count_ == 0 ? 0.0 : m2_[j] / static_cast<double>(count_);
}

std::vector<double> ChannelStats::variance() const
{
    std::vector<double> v(d_in());
    for (std::size_t j = 0; j < v.size(); ++j) {
        v[j] = variance(j);
    }
    return v;
}

std::vector<double> ChannelStats::second_moment() const
{
    std::vector<double> s(d_in());
    for (std::size_t j = 0; j < s.size(); ++j) {
        s[j] = mean_[j] * mean_[j] + variance(j);
    }
    return s;
}

void ChannelStats::update(const ActivationMatrix& batch)
{
    if (count_ == 0 && d_in() == 0) {
        mean_.assign(batch.cols(), 0.0);
        m2_.assign(batch.cols(), 0.0);
    }
    if (batch.cols() != d_in()) {
        throw Error(ErrorKind::dimension_mismatch, "activation batch has " + std::to_string(batch.cols()) +
                                                       " columns, stats have " + std::to_string(d_in()));
    }
    for (double x : batch.values()) {
        if (!std::isfinite(x)) {
            throw Error(ErrorKind::non_finite, "activation batch contains a non-finite value");
        }
    }
    const std::size_t rows = batch.rows();
    if (rows == 0) {
        return;
    }

    // Two-pass moments of the batch, then the pairwise combination with the
    // running state.
    const double nb = static_cast<double>(rows);
    const double na = static_cast<double>(count_);
    const double n = na + nb;
    detail::for_column_blocks(batch.cols(), [&](std::size_t j0, std::size_t j1) {
        const std::size_t w = j1 - j0;
        std::vector<double> bmean(w, 0.0);
        std::vector<double> bm2(w, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            const double* x = batch.data() + i * batch.cols() + j0;
            for (std::size_t k = 0; k < w; ++k) bmean[k] += x[k];
        }
        for (std::size_t k = 0; k < w; ++k) bmean[k] /= nb;
        for (std::size_t i = 0; i < rows; ++i) {
            const double* x = batch.data() + i * batch.cols() + j0;
            for (std::size_t k = 0; k < w; ++k) {
                const double d = x[k] - bmean[k];
                bm2[k] += d * d;
            }
        }
        for (std::size_t k = 0; k < w; ++k) {
            const std::size_t j = j0 + k;
            const double delta = bmean[k] - mean_[j];
            mean_[j] += delta * (nb / n);
            m2_[j] += bm2[k] + delta * delta * (na * nb / n);
        }
    });
    count_ += rows;
}

ChannelStats update(ChannelStats stats, const ActivationMatrix& batch)
{
    stats.update(batch);
    return stats;
}

ChannelStats merge(const ChannelStats& a, const ChannelStats& b)
{
    if (a.count() == 0 && (a.d_in() == 0 || a.d_in() == b.d_in())) return b;
    if (b.count() == 0 && (b.d_in() == 0 || b.d_in() == a.d_in())) return a;
    if (a.d_in() != b.d_in()) {
        throw Error(ErrorKind::dimension_mismatch, "cannot merge stats with d_in " + std::to_string(a.d_in()) +
                                                       " and " + std::to_string(b.d_in()));
    }
    const double na = static_cast<double>(a.count());
    const double nb = static_cast<double>(b.count());
    const double n = na + nb;
    std::vector<double> mean(a.d_in());
    std::vector<double> m2(a.d_in());
    for (std::size_t j = 0; j < mean.size(); ++j) {
        const double delta = b.mean()[j] - a.mean()[j];
        mean[j] = a.mean()[j] + delta * (nb / n);
        m2[j] = a.m2()[j] + b.m2()[j] + delta * delta * (na * nb / n);
    }
    return ChannelStats(a.count() + b.count(), std::move(mean), std::move(m2));
}

namespace {

void require_samples(const ChannelStats& stats)
{
    if (stats.count() == 0) {
        throw Error(ErrorKind::empty_input, "channel stats hold no samples");
    }
}

} // namespace

std::vector<double> activation_factor(const ChannelStats& stats, double eps)
{
    require_samples(stats);
    if (!(eps >= 0.0)) {
        throw Error(ErrorKind::invalid_argument, "eps must be nonnegative");
    }
    std::vector<double> a(stats.d_in());
    for (std::size_t j = 0; j < a.size(); ++j) {
        a[j] = std::sqrt(std::sqrt(stats.variance(j) + eps));
    }
    return a;
}

std::vector<double> wanda_factor(const ChannelStats& stats)
{
    require_samples(stats);
    auto s = stats.second_moment();
    for (auto& x : s) {
        x = std::sqrt(x);
    }
    return s;
}

} // namespace vcprune
