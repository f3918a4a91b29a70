#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "reference_oracle.hpp"
#include "test_helpers.hpp"
#include "vcprune/calib_stats.hpp"

using namespace vcprune;
using vcprune::testing::random_matrix;
using vcprune::testing::rel_close;

namespace {

ActivationMatrix rows_of(const ActivationMatrix& m, std::size_t begin, std::size_t end)
{
    ActivationMatrix out(end - begin, m.cols());
    for (std::size_t i = begin; i < end; ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out(i - begin, j) = m(i, j);
    }
    return out;
}

ChannelStats stream(const ActivationMatrix& m, std::size_t batch)
{
    ChannelStats s;
    for (std::size_t b = 0; b < m.rows(); b += batch) s.update(rows_of(m, b, std::min(m.rows(), b + batch)));
    return s;
}

void check_same(const ChannelStats& a, const ChannelStats& b, double rel)
{
    REQUIRE(a.count() == b.count());
    REQUIRE(a.d_in() == b.d_in());
    for (std::size_t j = 0; j < a.d_in(); ++j) {
        CHECK(std::fabs(a.mean()[j] - b.mean()[j]) <= rel * std::max(1.0, std::fabs(a.mean()[j])));
        CHECK(rel_close(a.variance(j), b.variance(j), rel));
    }
}

} // namespace

TEST_CASE("two-point batch")
{
    const auto s = update(ChannelStats{}, ActivationMatrix{{1}, {3}});
    CHECK(s.count() == 2);
    CHECK(s.mean()[0] == 2.0);
    CHECK(s.variance(0) == 1.0);
}

TEST_CASE("constant column has zero variance")
{
    for (std::size_t rows : {1u, 2u, 7u, 100u}) {
        ActivationMatrix m(rows, 1, 5.0);
        const auto s = update(ChannelStats{}, m);
        CHECK(s.variance(0) == 0.0);
        CHECK(s.mean()[0] == 5.0);
    }
}

TEST_CASE("1000 standard-normal samples: near unit variance and equal to the two-pass oracle")
{
    const auto x = random_matrix(1000, 8, 12);
    const auto s = stream(x, 64);
    for (std::size_t j = 0; j < 8; ++j) {
        const double oracle = oracle::oracle_variance(oracle::column(x, j));
        CHECK(std::fabs(s.variance(j) - 1.0) < 0.15);
        CHECK(rel_close(s.variance(j), oracle, 1e-6));
    }
}

TEST_CASE("streaming stays accurate with a large offset")
{
    auto x = random_matrix(3000, 4, 5);
    for (auto& v : x.values()) v += 1e6;
    const auto s = stream(x, 7);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(rel_close(s.variance(j), oracle::oracle_variance(oracle::column(x, j)), 1e-6));
    }
}

TEST_CASE("merge with an empty operand is the identity")
{
    const auto s = update(ChannelStats{}, random_matrix(20, 3, 1));
    check_same(merge(ChannelStats{}, s), s, 0.0);
    check_same(merge(s, ChannelStats{}), s, 0.0);
    check_same(merge(ChannelStats(3), s), s, 0.0);
}

TEST_CASE("merging two 250-sample halves equals the single pass")
{
    const auto x = random_matrix(500, 5, 21);
    const auto whole = update(ChannelStats{}, x);
    const auto halves = merge(update(ChannelStats{}, rows_of(x, 0, 250)), update(ChannelStats{}, rows_of(x, 250, 500)));
    check_same(halves, whole, 1e-6);
}

TEST_CASE("merge of {1,3} and {5,7}")
{
    const auto m = merge(update(ChannelStats{}, ActivationMatrix{{1}, {3}}), update(ChannelStats{}, ActivationMatrix{{5}, {7}}));
    CHECK(m.count() == 4);
    CHECK(m.mean()[0] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(m.variance(0) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("merge is associative and commutative")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto a = update(ChannelStats{}, random_matrix(3 + seed, 4, seed * 3 + 1, 2.0));
        const auto b = update(ChannelStats{}, random_matrix(17, 4, seed * 3 + 2));
        const auto c = update(ChannelStats{}, random_matrix(40 - seed, 4, seed * 3 + 3, 0.5));
        check_same(merge(merge(a, b), c), merge(a, merge(b, c)), 1e-6);
        check_same(merge(a, b), merge(b, a), 1e-6);
    }
}

TEST_CASE("update and merge reject bad input")
{
    ChannelStats s(3);
    CHECK_THROWS_AS(s.update(ActivationMatrix(2, 4)), Error);
    ActivationMatrix bad(2, 3);
    bad(1, 2) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(s.update(bad), Error);
    CHECK_THROWS_AS(merge(update(ChannelStats{}, ActivationMatrix(2, 3, 1.0)), update(ChannelStats{}, ActivationMatrix(2, 2, 1.0))), Error);
}

TEST_CASE("activation factor")
{
    SUBCASE("variance 16 with eps 0 gives 2")
    {
        const ChannelStats s(4, {0.0}, {64.0});
        CHECK(activation_factor(s, 0.0)[0] == doctest::Approx(2.0).epsilon(1e-15));
    }
    SUBCASE("zero variance is floored by eps")
    {
        const ChannelStats s(3, {1.0}, {0.0});
        CHECK(activation_factor(s, 1e-8)[0] == doctest::Approx(1e-2).epsilon(1e-12));
    }
    SUBCASE("fourth root of random variances")
    {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> u(0.0, 50.0);
        std::vector<double> m2(32);
        for (auto& v : m2) v = u(rng) * 10.0;
        const ChannelStats s(10, std::vector<double>(32, 0.0), m2);
        const auto a = activation_factor(s, 1e-8);
        for (std::size_t j = 0; j < 32; ++j) {
            CHECK(rel_close(a[j], std::pow(m2[j] / 10.0 + 1e-8, 0.25), 1e-12));
        }
    }
    SUBCASE("monotone in variance")
    {
        std::vector<double> m2{0.0, 1e-9, 0.5, 2.0, 100.0, 1e6};
        const auto a = activation_factor(ChannelStats(1, std::vector<double>(m2.size(), 0.0), m2));
        for (std::size_t j = 1; j < a.size(); ++j) CHECK(a[j] > a[j - 1]);
    }
    SUBCASE("no samples")
    {
        CHECK_THROWS_AS(activation_factor(ChannelStats(3)), Error);
    }
}

TEST_CASE("wanda factor")
{
    CHECK(wanda_factor(update(ChannelStats{}, ActivationMatrix{{3}, {-3}}))[0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(wanda_factor(update(ChannelStats{}, ActivationMatrix(9, 1, -2.5)))[0] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK_THROWS_AS(wanda_factor(ChannelStats(2)), Error);

    auto x = random_matrix(300, 6, 8);
    for (std::size_t i = 0; i < x.rows(); ++i) x(i, 2) += 3.0;
    const auto w = wanda_factor(stream(x, 50));
    for (std::size_t j = 0; j < 6; ++j) {
        CHECK(rel_close(w[j], std::sqrt(oracle::oracle_mean_square(oracle::column(x, j))), 1e-6));
    }
}
