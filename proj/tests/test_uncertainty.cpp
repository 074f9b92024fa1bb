#include "ampf/uncertainty.hpp"

#include "ampf/errors.hpp"
#include "ampf/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace ampf;

namespace {

SampleSet make_samples(std::size_t K, std::vector<std::string> names, std::size_t n,
                       std::vector<double> values) {
    SampleSet s;
    s.horizon = K;
    s.metric_names = std::move(names);
    s.sample_count = n;
    s.values = std::move(values);
    return s;
}

} // namespace

TEST_CASE("sigma_at_step population standard deviation") {
    const auto constant = make_samples(1, {"m"}, 3, {1, 1, 1});
    CHECK(sigma_at_step(constant, 0, 0) == 0.0);

    const auto pair = make_samples(1, {"m"}, 2, {0, 2});
    CHECK(sigma_at_step(pair, 0, 0) == 1.0); // mu = 1, divisor N

    // homogeneity: scaling samples scales sigma by |c|
    const auto base = make_samples(1, {"m"}, 4, {1, 2, 3, 4});
    const auto scaled = make_samples(1, {"m"}, 4, {-3, -6, -9, -12});
    CHECK(sigma_at_step(scaled, 0, 0) ==
          doctest::Approx(3.0 * sigma_at_step(base, 0, 0)).epsilon(1e-12));

    const auto lone = make_samples(1, {"m"}, 1, {5});
    CHECK_THROWS_AS(sigma_at_step(lone, 0, 0), DomainError);
}

TEST_CASE("nu averages sigma over the horizon") {
    // K=2 with sigmas 0 and 1 -> 0.5
    const auto s = make_samples(2, {"m"}, 2, {1, 1, 0, 2});
    CHECK(sigma_at_step(s, 0, 0) == 0.0);
    CHECK(sigma_at_step(s, 0, 1) == 1.0);
    CHECK(nu(s, 0) == 0.5);

    const auto flat = make_samples(3, {"m"}, 2, {4, 4, 4, 4, 4, 4});
    CHECK(nu(flat, 0) == 0.0);
}

TEST_CASE("nu equals the brute-force two-loop oracle") {
    Rng rng(99);
    for (int iter = 0; iter < 100; ++iter) {
        const std::size_t K = 5, N = 7, d = 2;
        std::vector<double> vals(K * d * N);
        for (double& v : vals) v = rng.uniform(-10.0, 10.0);
        const auto s = make_samples(K, {"a", "b"}, N, vals);
        for (std::size_t m = 0; m < d; ++m) {
            double sigma_sum = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                double mu = 0.0;
                for (std::size_t i = 0; i < N; ++i) mu += s.at(k, m, i);
                mu /= N;
                double ss = 0.0;
                for (std::size_t i = 0; i < N; ++i)
                    ss += (s.at(k, m, i) - mu) * (s.at(k, m, i) - mu);
                sigma_sum += std::sqrt(ss / N);
            }
            CHECK(std::abs(nu(s, m) - sigma_sum / K) < 1e-12);
        }
    }
}

TEST_CASE("classify threshold semantics") {
    Rng rng(1);
    std::vector<double> noisy(2 * 2 * 5);
    for (double& v : noisy) v = rng.uniform(0.0, 1.0);
    const auto s = make_samples(2, {"a", "b"}, 5, noisy);

    const auto all = classify(s, 0.0);
    CHECK(all.uncertain_metrics.size() == 2); // strict >, nu > 0

    const auto none = classify(s, std::numeric_limits<double>::infinity());
    CHECK(none.uncertain_metrics.empty());

    // deterministic forecast: nu == 0 is not > 0, so certain at threshold 0
    const auto flat = make_samples(1, {"a"}, 3, {2, 2, 2});
    CHECK(classify(flat, 0.0).uncertain_metrics.empty());

    CHECK_THROWS_AS(classify(s, -0.1), DomainError);
}

TEST_CASE("classify report invariants") {
    Rng rng(2);
    std::vector<double> vals(3 * 2 * 6);
    for (double& v : vals) v = rng.uniform(-5.0, 5.0);
    const auto s = make_samples(3, {"a", "b"}, 6, vals);
    const auto rep = classify(s, 0.4);
    for (std::size_t m = 0; m < 2; ++m) {
        // nu equals the mean of the reported sigmas exactly
        double mean = 0.0;
        for (std::size_t k = 0; k < 3; ++k) mean += rep.sigma[k * 2 + m];
        mean /= 3.0;
        CHECK(rep.nu[m] == mean);
        CHECK(rep.is_uncertain(rep.metric_names[m]) == (rep.nu[m] > 0.4));
    }
}

TEST_CASE("classify is monotone in the threshold") {
    Rng rng(21);
    for (int iter = 0; iter < 30; ++iter) {
        std::vector<double> vals(4 * 3 * 5);
        for (double& v : vals) v = rng.uniform(-1.0, 1.0);
        const auto s = make_samples(4, {"a", "b", "c"}, 5, vals);
        const double t1 = rng.uniform(0.0, 0.5);
        const double t2 = t1 + rng.uniform(0.0, 0.5);
        const auto u1 = classify(s, t1).uncertain_metrics;
        const auto u2 = classify(s, t2).uncertain_metrics;
        for (const auto& name : u2)
            CHECK(std::find(u1.begin(), u1.end(), name) != u1.end());
    }
}

TEST_CASE("affine shift leaves sigma, nu and verdicts unchanged") {
    Rng rng(4);
    std::vector<double> vals(2 * 1 * 8);
    for (double& v : vals) v = rng.uniform(0.0, 1.0);
    const auto s = make_samples(2, {"m"}, 8, vals);
    std::vector<double> shifted = vals;
    for (double& v : shifted) v += 123.456;
    const auto s2 = make_samples(2, {"m"}, 8, shifted);
    CHECK(nu(s, 0) == doctest::Approx(nu(s2, 0)).epsilon(1e-12));
    CHECK(classify(s, 0.2).uncertain_metrics == classify(s2, 0.2).uncertain_metrics);
}
