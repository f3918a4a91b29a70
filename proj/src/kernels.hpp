#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>

namespace vcprune::detail {

// Columns are processed in blocks: one thread walks all rows of its block in
// order, so every per-column reduction sums top to bottom whatever the
// thread count.
inline constexpr std::size_t column_block = 64;

template <typename Fn>
void for_column_blocks(std::size_t cols, Fn&& fn)
{
    const auto blocks = static_cast<std::ptrdiff_t>((cols + column_block - 1) / column_block);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < blocks; ++b) {
        const std::size_t begin = static_cast<std::size_t>(b) * column_block;
        fn(begin, std::min(cols, begin + column_block));
    }
}

// `v` where the mask bit is set, +0.0 elsewhere. Masks are random enough that
// a branch here mispredicts about half the time.
inline double kept(double v, std::uint8_t bit)
{
    const std::uint64_t all = std::uint64_t{0} - static_cast<std::uint64_t>(bit != 0);
    return std::bit_cast<double>(std::bit_cast<std::uint64_t>(v) & all);
}

template <typename Fn>
void for_rows(std::size_t rows, Fn&& fn)
{
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i) {
        fn(static_cast<std::size_t>(i));
    }
}

// Fixed-size row chunks, independent of the thread count. Per-chunk partial
// sums combined in chunk order stay reproducible.
inline constexpr std::size_t row_chunk = 256;

template <typename Fn>
void for_row_chunks(std::size_t rows, Fn&& fn)
{
    const auto chunks = static_cast<std::ptrdiff_t>((rows + row_chunk - 1) / row_chunk);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < chunks; ++c) {
        const std::size_t begin = static_cast<std::size_t>(c) * row_chunk;
        fn(static_cast<std::size_t>(c), begin, std::min(rows, begin + row_chunk));
    }
}

} // namespace vcprune::detail
