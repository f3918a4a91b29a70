#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "vcprune/matrix.hpp"

namespace vcprune::testing {

inline Matrix<double> random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double stddev = 1.0)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix<double> m(rows, cols);
    for (auto& x : m.values()) x = dist(rng);
    return m;
}

/// Values exactly representable as 32-bit floats.
inline Matrix<double> random_float_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed)
{
    auto m = random_matrix(rows, cols, seed);
    for (auto& x : m.values()) x = static_cast<double>(static_cast<float>(x));
    return m;
}

inline PruneMask random_mask(std::size_t rows, std::size_t cols, std::uint64_t seed, double keep = 0.5)
{
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution bit(keep);
    PruneMask m(rows, cols);
    for (auto& b : m.values()) b = bit(rng) ? 1 : 0;
    return m;
}

inline bool rel_close(double a, double b, double rel)
{
    return std::fabs(a - b) <= rel * std::max(std::fabs(a), std::fabs(b));
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir()
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("vcprune_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace vcprune::testing
