#pragma once

#include <cstdint>

#include "vcprune/calib_stats.hpp"
#include "vcprune/matrix.hpp"

namespace vcprune {

/// Standard-normal matrix from a seeded 64-bit Mersenne Twister.
WeightMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double stddev = 1.0);

struct SyntheticLayerOptions {
    std::size_t d_out = 128;
    std::size_t d_in = 128;
    std::size_t samples = 640;
    /// Dimension of the subspace shared by weight rows and activations.
    std::size_t rank = 8;
    double weight_noise = 0.3;
    double activation_noise = 0.5;
};

struct SyntheticLayer {
    WeightMatrix weights;
    ActivationMatrix activations;
};

/// A linear layer whose weight rows and input activations share a low-rank
/// subspace, plus isotropic noise on both. Trained projection layers look
/// like this; i.i.d. Gaussian layers do not.
///
///     U ~ N(0,1)^(rank x d_in)
///     W = A U / sqrt(rank d_in) + weight_noise N(0,1) / sqrt(d_in)
///     X = Z U + activation_noise sqrt(rank) N(0,1)
SyntheticLayer make_aligned_layer(const SyntheticLayerOptions& options, std::uint64_t seed);

} // namespace vcprune
