#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "vcprune/matrix.hpp"
#include "vcprune/scoring.hpp"

namespace vcprune {

/// Target pattern: an unstructured pruned fraction in [0, 1), or n:m (keep n
/// of every m consecutive weights along the input dimension).
class SparsitySpec {
public:
    enum class Kind { unstructured, structured };

    static SparsitySpec unstructured(double ratio);
    static SparsitySpec structured(std::size_t n, std::size_t m);
    /// "0.5" or "2:4".
    static SparsitySpec parse(std::string_view text);

    Kind kind() const noexcept { return kind_; }
    double ratio() const noexcept { return ratio_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t m() const noexcept { return m_; }
    /// Fraction of weights pruned in complete groups.
    double target_sparsity() const noexcept;
    std::string to_string() const;

    friend bool operator==(const SparsitySpec&, const SparsitySpec&) = default;

private:
    SparsitySpec() = default;

    Kind kind_ = Kind::unstructured;
    double ratio_ = 0.0;
    std::size_t n_ = 0;
    std::size_t m_ = 0;
};

/// Comparison group for unstructured selection.
enum class Grouping { per_row, per_layer };

std::string_view to_string(Grouping g);
Grouping parse_grouping(std::string_view text);

/// Number of weights pruned out of `count` at `ratio`: floor(ratio * count).
std::size_t pruned_count(double ratio, std::size_t count);

/// Zeroes the floor(ratio * group) lowest scores of each group; among equal
/// scores the lower column (flat index for per_layer) is pruned first.
PruneMask build_mask_unstructured(const ScoreMatrix& scores, double ratio, Grouping grouping = Grouping::per_row);

/// Keeps the n highest scores of every aligned m-group in each row; among
/// equal scores the lower column is kept first. A trailing group of t < m
/// columns keeps ceil(n * t / m).
PruneMask build_mask_nm(const ScoreMatrix& scores, std::size_t n, std::size_t m);

PruneMask build_mask(const ScoreMatrix& scores, const SparsitySpec& spec, Grouping grouping = Grouping::per_row);

WeightMatrix apply_mask(const WeightMatrix& weights, const PruneMask& mask);

/// Fraction of zero entries in the mask.
double mask_sparsity(const PruneMask& mask);

} // namespace vcprune
