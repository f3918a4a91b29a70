#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "reference_oracle.hpp"
#include "test_helpers.hpp"
#include "vcprune/masking.hpp"
#include "vcprune/scoring.hpp"

using namespace vcprune;
using vcprune::testing::random_matrix;
using vcprune::testing::rel_close;

TEST_CASE("column variance")
{
    CHECK(column_variance(WeightMatrix{{2}, {2}, {2}})[0] == 0.0);
    CHECK(column_variance(WeightMatrix{{1}, {3}})[0] == 1.0);
    CHECK_THROWS_AS(column_variance(WeightMatrix{}), Error);

    const auto w = random_matrix(64, 64, 2);
    const auto v = column_variance(w);
    double mean = 0.0;
    for (std::size_t j = 0; j < 64; ++j) {
        mean += v[j] / 64.0;
        CHECK(rel_close(v[j], oracle::oracle_variance(oracle::column(w, j)), 1e-10));
    }
    CHECK(std::fabs(mean - 1.0) < 0.1);
}

TEST_CASE("weight calibration factor")
{
    const std::vector<double> v{0.0, 3.0, 100.0};
    for (double c : weight_calibration(v, 0.0, 1e-8)) CHECK(c == 1.0);
    CHECK(weight_calibration(std::vector<double>{3.0}, 2.0, 1.0)[0] == 0.25);

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<double> rv(50);
    for (auto& x : rv) x = u(rng);
    const auto c = weight_calibration(rv, 1.0, 1e-8);
    for (std::size_t j = 0; j < rv.size(); ++j) CHECK(rel_close(c[j], 1.0 / std::sqrt(rv[j] + 1e-8), 1e-12));

    CHECK_THROWS_AS(weight_calibration(v, -0.1, 1e-8), Error);
    CHECK_THROWS_AS(weight_calibration(v, 0.5, 0.0), Error);
}

TEST_CASE("score is |W| a c")
{
    const auto w = random_matrix(5, 7, 4);
    const std::vector<double> ones(7, 1.0);
    CHECK(score(w, ones, ones).values == score_magnitude(w).values);

    const WeightMatrix row{{-2, 1}};
    const auto s = score(row, std::vector<double>{1, 3}, std::vector<double>{1, 1});
    CHECK(s.values == Matrix<double>{{2, 3}});

    CHECK_THROWS_AS(score(w, std::vector<double>(6, 1.0), ones), Error);
}

TEST_CASE("alpha 0 with the wanda factor reproduces the Wanda metric")
{
    const auto w = random_matrix(16, 12, 5);
    auto x = random_matrix(200, 12, 6);
    for (std::size_t i = 0; i < x.rows(); ++i) x(i, 3) = 8.0 * x(i, 3) + 1.0;
    const auto stats = update(ChannelStats{}, x);
    const auto a = wanda_factor(stats);
    const auto c = weight_calibration(column_variance(w), 0.0, 1e-8);
    const auto cvr = score(w, a, c);
    const auto wanda = score_wanda(w, stats);
    CHECK(cvr.values == wanda.values);

    // Direct product oracle.
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) CHECK(rel_close(cvr.values(i, j), std::fabs(w(i, j)) * a[j], 1e-12));
    }
    // Raw-sample oracle.
    const auto ref = oracle::oracle_wanda_scores(w, x);
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(rel_close(wanda.values.values()[k], ref.values()[k], 1e-9));
}

TEST_CASE("CVR scores match the raw-sample oracle")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto w = random_matrix(24, 16, 100 + seed);
        auto x = random_matrix(150, 16, 200 + seed);
        for (std::size_t i = 0; i < x.rows(); ++i) x(i, seed % 16) *= 10.0;
        const CvrOptions opt{0.5 + 0.1 * static_cast<double>(seed), 1e-8, ActivationFactorMode::variance};
        const auto s = score_cvr(w, update(ChannelStats{}, x), opt);
        const auto ref = oracle::oracle_cvr_scores(w, x, opt.alpha, opt.eps);
        CHECK(s.criterion == Criterion::cvr);
        CHECK(s.alpha == opt.alpha);
        for (std::size_t k = 0; k < ref.size(); ++k) CHECK(rel_close(s.values.values()[k], ref.values()[k], 1e-9));
    }
}

TEST_CASE("magnitude scores")
{
    CHECK(score_magnitude(WeightMatrix{{-1, 0.5}}).values == Matrix<double>{{1, 0.5}});
    CHECK(score_magnitude(WeightMatrix(3, 4)).values == Matrix<double>(3, 4));
    const auto w = random_matrix(9, 13, 7);
    const auto s = score_magnitude(w);
    for (std::size_t k = 0; k < w.size(); ++k) CHECK(s.values.values()[k] == std::fabs(w.values()[k]));
}

TEST_CASE("stats width must match d_in")
{
    const auto stats = update(ChannelStats{}, random_matrix(10, 3, 1));
    CHECK_THROWS_AS(score_wanda(random_matrix(4, 4, 2), stats), Error);
    CHECK_THROWS_AS(score_cvr(random_matrix(4, 4, 2), stats), Error);
}

TEST_CASE("scale equivariance")
{
    const auto w = random_matrix(32, 32, 12);
    const auto stats = update(ChannelStats{}, random_matrix(100, 32, 13));
    for (double k : {0.25, 3.0, -7.0}) {
        WeightMatrix kw = w;
        for (auto& v : kw.values()) v *= k;
        const auto s = score_magnitude(w);
        const auto ks = score_magnitude(kw);
        for (std::size_t e = 0; e < w.size(); ++e) CHECK(rel_close(ks.values.values()[e], std::fabs(k) * s.values.values()[e], 1e-15));

        // CVR: scores scale by |k|^(1-alpha) when eps is co-scaled, so the
        // 50% mask does not move.
        const CvrOptions base{0.5, 1e-8, ActivationFactorMode::variance};
        CvrOptions scaled = base;
        scaled.eps = base.eps * k * k;
        const auto c0 = weight_calibration(column_variance(w), base.alpha, base.eps);
        const auto c1 = weight_calibration(column_variance(kw), scaled.alpha, scaled.eps);
        for (std::size_t j = 0; j < c0.size(); ++j) CHECK(rel_close(c1[j], c0[j] * std::pow(std::fabs(k), -base.alpha), 1e-12));
        const auto a = activation_factor(stats);
        CHECK(build_mask_unstructured(score(w, a, c0), 0.5) == build_mask_unstructured(score(kw, a, c1), 0.5));
    }
}

TEST_CASE("row permutation commutes with scoring and masking")
{
    const auto w = random_matrix(20, 16, 30);
    const auto stats = update(ChannelStats{}, random_matrix(64, 16, 31));
    std::vector<std::size_t> perm(w.rows());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(32));
    WeightMatrix pw(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) pw(i, j) = w(perm[i], j);
    }
    const auto s = score_cvr(w, stats);
    const auto ps = score_cvr(pw, stats);
    const auto m = build_mask_unstructured(s, 0.5);
    const auto pm = build_mask_unstructured(ps, 0.5);
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) {
            CHECK(rel_close(ps.values(i, j), s.values(perm[i], j), 1e-12));
            CHECK(pm(i, j) == m(perm[i], j));
        }
    }
}

TEST_CASE("names parse back")
{
    for (auto c : {Criterion::magnitude, Criterion::wanda, Criterion::cvr}) CHECK(parse_criterion(to_string(c)) == c);
    CHECK(parse_activation_factor("wanda") == ActivationFactorMode::wanda);
    CHECK_THROWS_AS(parse_criterion("sparsegpt"), Error);
}
