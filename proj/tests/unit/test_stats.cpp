#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rxrl/stats.hpp"

using namespace rxrl;

// Reference values computed with scipy.stats (ttest_ind equal_var=False, pearsonr).
TEST(Stats, MeanSe) {
    const std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
    const auto m = mean_se(x);
    EXPECT_EQ(m.n, 8u);
    EXPECT_DOUBLE_EQ(m.mean, 5.0);
    EXPECT_NEAR(m.se, std::sqrt(32.0 / 7.0) / std::sqrt(8.0), 1e-12);
    const std::vector<double> one{3.0};
    EXPECT_DOUBLE_EQ(mean_se(one).se, 0.0);
    EXPECT_EQ(mean_se({}).n, 0u);
}

TEST(Stats, WelchAgainstReference) {
    const std::vector<double> a{19.8, 20.4, 19.6, 17.8, 18.5, 18.9, 18.3, 18.9, 19.5, 22.0};
    const std::vector<double> b{28.2, 26.6, 20.1, 23.3, 25.2, 22.1, 17.7, 27.6, 20.6, 13.7, 23.2, 17.5, 20.6, 18.0, 23.9,
                                21.6, 24.3, 20.4, 23.9, 13.3};
    const auto r = welch_t_test(a, b);
    ASSERT_TRUE(r.has_value());
    EXPECT_NEAR(r->statistic, -2.2255120400, 1e-8);
    EXPECT_NEAR(r->df, 24.5246349443, 1e-8);
    EXPECT_NEAR(r->p_value, 0.0354845308, 1e-8);
    const auto flipped = welch_t_test(b, a);
    EXPECT_NEAR(flipped->statistic, -r->statistic, 1e-12);
    EXPECT_NEAR(flipped->p_value, r->p_value, 1e-12);

    const std::vector<double> c{1.0, 1.0}, d{2.0, 2.0}, e{1.0};
    EXPECT_FALSE(welch_t_test(c, d).has_value());
    EXPECT_FALSE(welch_t_test(a, e).has_value());
}

TEST(Stats, TwoProportionZ) {
    // 45/100 vs 30/100: pooled p = 0.375
    const auto r = two_proportion_z_test(45, 100, 30, 100);
    ASSERT_TRUE(r.has_value());
    const double se = std::sqrt(0.375 * 0.625 * (2.0 / 100.0));
    EXPECT_NEAR(r->statistic, 0.15 / se, 1e-12);
    EXPECT_NEAR(r->p_value, std::erfc(std::abs(0.15 / se) / std::sqrt(2.0)), 1e-12);
    EXPECT_FALSE(two_proportion_z_test(0, 10, 0, 10).has_value());
    EXPECT_FALSE(two_proportion_z_test(1, 0, 1, 5).has_value());
}

TEST(Stats, Pearson) {
    const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 5, 4, 5};
    EXPECT_NEAR(*pearson(x, y), 0.7745966692, 1e-9);
    const std::vector<double> neg{5, 4, 3, 2, 1};
    EXPECT_NEAR(*pearson(x, neg), -1.0, 1e-12);
    const std::vector<double> flat{3, 3, 3, 3, 3};
    EXPECT_FALSE(pearson(x, flat).has_value());
}
