#include "rxrl/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "rxrl/errors.hpp"

namespace rxrl {

namespace {

double sample_variance(std::span<const double> xs, double mean) {
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

MeanSe mean_se(std::span<const double> xs) {
    MeanSe r;
    r.n = xs.size();
    if (xs.empty()) return r;
    double sum = 0.0;
    for (double x : xs) sum += x;
    r.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) r.se = std::sqrt(sample_variance(xs, r.mean) / static_cast<double>(xs.size()));
    return r;
}

std::optional<TestResult> welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) return std::nullopt;
    const auto ma = mean_se(a);
    const auto mb = mean_se(b);
    const double va = ma.se * ma.se;  // s^2 / n
    const double vb = mb.se * mb.se;
    const double se2 = va + vb;
    if (!(se2 > 0.0)) return std::nullopt;
    TestResult r;
    r.statistic = (ma.mean - mb.mean) / std::sqrt(se2);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    r.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    boost::math::students_t dist(r.df);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.statistic)));
    return r;
}

std::optional<TestResult> two_proportion_z_test(std::size_t hits_a, std::size_t n_a,
                                                std::size_t hits_b, std::size_t n_b) {
    if (n_a == 0 || n_b == 0) return std::nullopt;
    if (hits_a > n_a || hits_b > n_b) throw InputError("proportion hits exceed trials");
    const double pa = static_cast<double>(hits_a) / static_cast<double>(n_a);
    const double pb = static_cast<double>(hits_b) / static_cast<double>(n_b);
    const double pooled = static_cast<double>(hits_a + hits_b) / static_cast<double>(n_a + n_b);
    const double se = std::sqrt(pooled * (1.0 - pooled) *
                                (1.0 / static_cast<double>(n_a) + 1.0 / static_cast<double>(n_b)));
    if (!(se > 0.0)) return std::nullopt;
    TestResult r;
    r.statistic = (pa - pb) / se;
    r.p_value = std::erfc(std::abs(r.statistic) / std::sqrt(2.0));
    return r;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError("pearson inputs differ in length");
    if (x.size() < 2) return std::nullopt;
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace rxrl
