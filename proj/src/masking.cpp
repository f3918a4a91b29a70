#include "vcprune/masking.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "kernels.hpp"

namespace vcprune {

SparsitySpec SparsitySpec::unstructured(double ratio)
{
    if (!(ratio >= 0.0 && ratio < 1.0)) {
        throw Error(ErrorKind::invalid_argument, "sparsity ratio must lie in [0, 1)");
    }
    SparsitySpec s;
    s.kind_ = Kind::unstructured;
    s.ratio_ = ratio;
    return s;
}

SparsitySpec SparsitySpec::structured(std::size_t n, std::size_t m)
{
    if (n < 1 || n > m) {
        throw Error(ErrorKind::invalid_argument, "n:m pattern requires 1 <= n <= m");
    }
    SparsitySpec s;
    s.kind_ = Kind::structured;
    s.n_ = n;
    s.m_ = m;
    return s;
}

SparsitySpec SparsitySpec::parse(std::string_view text)
{
    auto bad = [&] { return Error(ErrorKind::invalid_argument, "bad sparsity '" + std::string(text) + "'"); };
    if (auto colon = text.find(':'); colon != std::string_view::npos) {
        std::size_t n = 0, m = 0;
        auto a = std::from_chars(text.data(), text.data() + colon, n);
        auto b = std::from_chars(text.data() + colon + 1, text.data() + text.size(), m);
        if (a.ec != std::errc{} || a.ptr != text.data() + colon || b.ec != std::errc{} ||
            b.ptr != text.data() + text.size()) {
            throw bad();
        }
        return structured(n, m);
    }
    double r = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), r);
    if (ec != std::errc{} || ptr != text.data() + text.size()) throw bad();
    return unstructured(r);
}

double SparsitySpec::target_sparsity() const noexcept
{
    return kind_ == Kind::unstructured ? ratio_ : 1.0 - static_cast<double>(n_) / static_cast<double>(m_);
}

std::string SparsitySpec::to_string() const
{
    if (kind_ == Kind::structured) {
        return std::to_string(n_) + ":" + std::to_string(m_);
    }
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), ratio_);
    return std::string(buf, ptr);
}

std::string_view to_string(Grouping g)
{
    return g == Grouping::per_row ? "row" : "layer";
}

Grouping parse_grouping(std::string_view text)
{
    if (text == "row") return Grouping::per_row;
    if (text == "layer") return Grouping::per_layer;
    throw Error(ErrorKind::invalid_argument, "unknown grouping '" + std::string(text) + "'");
}

std::size_t pruned_count(double ratio, std::size_t count)
{
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(count)));
}

namespace {

void require_valid_scores(const ScoreMatrix& scores)
{
    for (double s : scores.values.values()) {
        if (!std::isfinite(s) || s < 0.0) {
            throw Error(ErrorKind::invalid_argument, "scores must be finite and nonnegative");
        }
    }
}

// Zeroes the k lowest of `scores`, breaking ties toward the lower index:
// everything strictly below the k-th smallest value, then the first
// occurrences of that value.
void prune_lowest(std::span<const double> scores, std::size_t k, std::span<std::uint8_t> out, std::vector<double>& scratch)
{
    if (k == 0) return;
    scratch.assign(scores.begin(), scores.end());
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1), scratch.end());
    const double threshold = scratch[k - 1];
    std::size_t below = 0;
    for (double s : scores) below += s < threshold;
    std::size_t ties = k - below;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (scores[j] < threshold) {
            out[j] = 0;
        } else if (scores[j] == threshold && ties > 0) {
            out[j] = 0;
            --ties;
        }
    }
}

// Keeps the `keep` highest of a small group; ties go to the lower index.
void keep_highest(const double* scores, std::size_t size, std::size_t keep, std::uint8_t* out)
{
    for (std::size_t a = 0; a < size; ++a) {
        std::size_t better = 0;
        for (std::size_t b = 0; b < size; ++b) {
            better += scores[b] > scores[a] || (scores[b] == scores[a] && b < a);
        }
        out[a] = better < keep ? 1 : 0;
    }
}

void keep_highest_sorted(const double* scores, std::size_t size, std::size_t keep, std::uint8_t* out,
                         std::vector<std::size_t>& idx)
{
    idx.resize(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    for (std::size_t r = 0; r < size; ++r) out[idx[r]] = r < keep ? 1 : 0;
}

} // namespace

PruneMask build_mask_unstructured(const ScoreMatrix& scores, double ratio, Grouping grouping)
{
    if (!(ratio >= 0.0 && ratio < 1.0)) {
        throw Error(ErrorKind::invalid_argument, "sparsity ratio must lie in [0, 1)");
    }
    require_valid_scores(scores);
    const auto& s = scores.values;
    PruneMask mask(s.rows(), s.cols(), 1);
    if (grouping == Grouping::per_layer) {
        std::vector<double> scratch;
        prune_lowest(s.values(), pruned_count(ratio, s.size()), mask.values(), scratch);
        return mask;
    }
    const std::size_t k = pruned_count(ratio, s.cols());
#pragma omp parallel
    {
        std::vector<double> scratch;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(s.rows()); ++i) {
            const auto r = static_cast<std::size_t>(i);
            prune_lowest(s.row(r), k, mask.row(r), scratch);
        }
    }
    return mask;
}

PruneMask build_mask_nm(const ScoreMatrix& scores, std::size_t n, std::size_t m)
{
    if (n < 1 || n > m) {
        throw Error(ErrorKind::invalid_argument, "n:m pattern requires 1 <= n <= m");
    }
    require_valid_scores(scores);
    const auto& s = scores.values;
    PruneMask mask(s.rows(), s.cols(), 1);
    if (n == m) return mask;
    constexpr std::size_t small_group = 32;
#pragma omp parallel
    {
        std::vector<std::size_t> idx;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(s.rows()); ++i) {
            const auto r = static_cast<std::size_t>(i);
            const double* row = s.row(r).data();
            std::uint8_t* out = mask.row(r).data();
            for (std::size_t g = 0; g < s.cols(); g += m) {
                const std::size_t size = std::min(m, s.cols() - g);
                const std::size_t keep = size == m ? n : (n * size + m - 1) / m;
                if (size <= small_group) {
                    keep_highest(row + g, size, keep, out + g);
                } else {
                    keep_highest_sorted(row + g, size, keep, out + g, idx);
                }
            }
        }
    }
    return mask;
}

PruneMask build_mask(const ScoreMatrix& scores, const SparsitySpec& spec, Grouping grouping)
{
    if (spec.kind() == SparsitySpec::Kind::structured) {
        return build_mask_nm(scores, spec.n(), spec.m());
    }
    return build_mask_unstructured(scores, spec.ratio(), grouping);
}

WeightMatrix apply_mask(const WeightMatrix& weights, const PruneMask& mask)
{
    require_same_shape(weights, mask, "apply_mask");
    WeightMatrix out(weights.rows(), weights.cols());
    const auto w = weights.values();
    const auto mk = mask.values();
    auto o = out.values();
    detail::for_rows(weights.rows(), [&](std::size_t i) {
        for (std::size_t j = 0, k = i * weights.cols(); j < weights.cols(); ++j, ++k) {
            o[k] = detail::kept(w[k], mk[k]);
        }
    });
    return out;
}

double mask_sparsity(const PruneMask& mask)
{
    if (mask.empty()) return 0.0;
    std::size_t zeros = 0;
    for (auto b : mask.values()) zeros += b == 0;
    return static_cast<double>(zeros) / static_cast<double>(mask.size());
}

} // namespace vcprune
