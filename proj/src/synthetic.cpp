#include "vcprune/synthetic.hpp"

#include <cmath>
#include <random>

namespace vcprune {

namespace {

Matrix<double> normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double stddev)
{
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix<double> m(rows, cols);
    for (auto& x : m.values()) x = dist(rng);
    return m;
}

// a (r x k) times b (k x c), plus `add` scaled by `add_scale`.
Matrix<double> multiply_add(const Matrix<double>& a, const Matrix<double>& b, double scale,
                            const Matrix<double>& add, double add_scale)
{
    Matrix<double> out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k) * scale;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
        for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += add_scale * add(i, j);
    }
    return out;
}

} // namespace

WeightMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double stddev)
{
    std::mt19937_64 rng(seed);
    return normal(rows, cols, rng, stddev);
}

SyntheticLayer make_aligned_layer(const SyntheticLayerOptions& o, std::uint64_t seed)
{
    if (o.d_out == 0 || o.d_in == 0 || o.samples == 0 || o.rank == 0) {
        throw Error(ErrorKind::invalid_argument, "synthetic layer dimensions must be positive");
    }
    std::mt19937_64 rng(seed);
    const auto basis = normal(o.rank, o.d_in, rng, 1.0);
    const auto mixing = normal(o.d_out, o.rank, rng, 1.0);
    const auto weight_noise = normal(o.d_out, o.d_in, rng, 1.0);
    const auto latent = normal(o.samples, o.rank, rng, 1.0);
    const auto act_noise = normal(o.samples, o.d_in, rng, 1.0);

    const double rank = static_cast<double>(o.rank);
    const double d_in = static_cast<double>(o.d_in);
    SyntheticLayer layer;
    layer.weights = multiply_add(mixing, basis, 1.0 / std::sqrt(rank * d_in), weight_noise,
                                 o.weight_noise / std::sqrt(d_in));
    layer.activations = multiply_add(latent, basis, 1.0, act_noise, o.activation_noise * std::sqrt(rank));
    return layer;
}

} // namespace vcprune
