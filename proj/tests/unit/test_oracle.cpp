// The oracles are the yardstick for everything else, so they get their own
// hand-checked cases.
#include <doctest.h>

#include <cmath>

#include "reference_oracle.hpp"
#include "test_helpers.hpp"

using namespace vcprune;
using namespace vcprune::oracle;

TEST_CASE("moments")
{
    const std::vector<double> xs{1, 2, 3, 4};
    CHECK(oracle_mean(xs) == 2.5);
    CHECK(oracle_variance(xs) == 1.25);
    CHECK(oracle_mean_square(xs) == 7.5);
    CHECK(oracle_variance(std::vector<double>{5, 5, 5}) == 0.0);
}

TEST_CASE("top-k with both tie rules")
{
    const std::vector<double> s{1, 3, 1, 3, 2};
    CHECK(oracle_topk_mask(s, 2) == std::vector<std::uint8_t>{0, 1, 0, 1, 0});
    CHECK(oracle_topk_mask(s, 4) == std::vector<std::uint8_t>{1, 1, 0, 1, 1});
    CHECK(oracle_topk_mask(s, 4, TieBreak::lower_index_pruned) == std::vector<std::uint8_t>{0, 1, 1, 1, 1});
    CHECK(oracle_topk_mask(s, 1) == std::vector<std::uint8_t>{0, 1, 0, 0, 0});
    CHECK(oracle_topk_mask(s, 1, TieBreak::lower_index_pruned) == std::vector<std::uint8_t>{0, 0, 0, 1, 0});
}

TEST_CASE("n:m and unstructured masks")
{
    const Matrix<double> s{{5, 1, 4, 2, 7, 8}};
    CHECK(oracle_nm_mask(s, 2, 4) == PruneMask{{1, 0, 1, 0, 0, 1}});
    CHECK(oracle_unstructured_mask(s, 0.5) == PruneMask{{1, 0, 0, 0, 1, 1}});
}

TEST_CASE("scores from raw samples")
{
    const WeightMatrix w{{1, -2}, {3, 4}};
    const Matrix<double> x{{1, 0}, {3, 2}};
    // Channel variances 1 and 1; weight column variances 1 and 9.
    const auto cvr = oracle_cvr_scores(w, x, 1.0, 0.0);
    CHECK(cvr(0, 0) == doctest::Approx(1.0));
    CHECK(cvr(1, 1) == doctest::Approx(4.0 / 3.0));
    const auto wanda = oracle_wanda_scores(w, x);
    CHECK(wanda(0, 0) == doctest::Approx(std::sqrt(5.0)));
    CHECK(wanda(0, 1) == doctest::Approx(2.0 * std::sqrt(2.0)));
}

TEST_CASE("correction step on the 2x1 example")
{
    const WeightMatrix w{{1}, {3}};
    const PruneMask m{{0}, {1}};
    EnergyCorrectionConfig cfg;
    const auto step = oracle_correct_columns(w, WeightMatrix{{0}, {3}}, m, cfg);
    CHECK(step.scales[0] == doctest::Approx(0.6324555314012203).epsilon(1e-15));
    CHECK(step.remasked(0, 0) == 0.0);
    CHECK(step.pre_remask(0, 0) == doctest::Approx(0.7350889371975593).epsilon(1e-14));
    CHECK(step.energy_original[0] == 2.0);
    CHECK(oracle_column_energy(w, 0, 2.0) == 2.0);
    CHECK(oracle_row_energy(WeightMatrix{{1, 3}}, 0, 2.0) == 2.0);
}

TEST_CASE("energy deviation and reconstruction error")
{
    const WeightMatrix w{{1}, {3}};
    CHECK(oracle_column_energy_deviation(w, w) == 0.0);
    CHECK(oracle_column_energy_deviation(w, WeightMatrix{{0}, {3}}) == doctest::Approx(1.5));
    const WeightMatrix w2{{1, 0}, {0, 1}};
    const Matrix<double> x{{3, 4}};
    CHECK(oracle_reconstruction_error(w2, w2, x) == 0.0);
    CHECK(oracle_reconstruction_error(w2, WeightMatrix{{1, 0}, {0, 0}}, x) == doctest::Approx(0.8));
}

TEST_CASE("compare")
{
    CHECK(compare(WeightMatrix{{1, 2}}, WeightMatrix{{1, 2.5}}).max_abs_deviation == 0.5);
    CHECK_THROWS(compare(WeightMatrix{{1, 2}}, WeightMatrix{{1}}));
}
