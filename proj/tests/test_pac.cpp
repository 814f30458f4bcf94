#include "oracles/stats.hpp"
#include "pacabs/pac.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pacabs;

TEST(ScenarioLowerBound, ClosedForms) {
    EXPECT_EQ(scenario_lower_bound(100, 0, 0.01), 0.0);
    for (long N : {1L, 7L, 100L, 20000L})
        for (double beta : {1e-9, 0.01, 0.3}) EXPECT_NEAR(scenario_lower_bound(N, N, beta), std::pow(beta / N, 1.0 / N), 1e-9);
}

TEST(ScenarioLowerBound, SmallCaseAgainstDirectSum) {
    const double p = scenario_lower_bound(25, 20, 0.01);
    const double target = 0.01 / 25;
    EXPECT_LT(std::abs(oracle::binomial_tail_direct(25, 5, p) - target), 1e-9 * target);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 0.8);
}

TEST(ScenarioLowerBound, Monotone) {
    for (long N : {10L, 100L, 1000L}) {
        double prev = -1;
        for (long R = 0; R <= N; R += std::max(1L, N / 20)) {
            const double p = scenario_lower_bound(N, R, 0.01);
            EXPECT_GE(p, prev);
            prev = p;
            if (R > 0) EXPECT_LE(scenario_lower_bound(N, R, 1e-4), p + 1e-12);
        }
    }
}

TEST(ScenarioLowerBound, RejectsBadArguments) {
    EXPECT_THROW(scenario_lower_bound(0, 0, 0.1), Error);
    EXPECT_THROW(scenario_lower_bound(10, 11, 0.1), Error);
    EXPECT_THROW(scenario_lower_bound(10, 5, 1.0), Error);
    EXPECT_THROW(hoeffding_upper_bound(10, -1, 0.1), Error);
}

TEST(HoeffdingUpperBound, Examples) {
    EXPECT_EQ(hoeffding_upper_bound(50, 50, 0.3), 1.0);
    EXPECT_NEAR(hoeffding_upper_bound(200, 0, std::exp(-4.0)), 0.1, 1e-15);
    EXPECT_NEAR(hoeffding_upper_bound(20000, 10000, 0.01), 0.5 + std::sqrt(std::log(100.0) / 40000), 1e-15);
    EXPECT_NEAR(hoeffding_upper_bound(20000, 10000, 0.01), 0.51073, 5e-6);
}

TEST(HoeffdingUpperBound, Monotone) {
    double prev = 0;
    for (long Rt = 0; Rt <= 100; ++Rt) {
        const double u = hoeffding_upper_bound(100, Rt, 0.05);
        EXPECT_GE(u, prev);
        EXPECT_GE(u, Rt / 100.0);
        prev = u;
    }
}

TEST(TransitionInterval, Examples) {
    const auto none = transition_interval({100, 0, 0}, 0.1);
    EXPECT_EQ(none.lower, 0.0);
    EXPECT_EQ(none.upper, 0.0);
    EXPECT_TRUE(none.empty_edge());
    const auto full = transition_interval({100, 100, 100}, 0.1);
    EXPECT_NEAR(full.lower, std::pow(0.001, 0.01), 1e-9);
    EXPECT_NEAR(full.lower, 0.9333, 1e-4);
    EXPECT_EQ(full.upper, 1.0);
    EXPECT_FALSE(full.widened);
    EXPECT_THROW(transition_interval({100, 10, 5}, 0.1), Error);
}

TEST(TransitionInterval, CacheAgrees) {
    ScenarioBoundCache cache(500, 0.001);
    std::mt19937_64 rng(2);
    for (int k = 0; k < 200; ++k) {
        const long Rt = long(rng() % 501);
        const long R = Rt ? long(rng() % std::uint64_t(Rt + 1)) : 0;
        const auto a = cache.interval({500, R, Rt});
        const auto b = transition_interval({500, R, Rt}, 0.001);
        EXPECT_EQ(a.lower, b.lower);
        EXPECT_EQ(a.upper, b.upper);
    }
}

TEST(LogBinomialTail, MatchesIncompleteBeta) {
    for (long N : {5L, 60L, 2000L})
        for (long k : {0L, N / 3, N - 1})
            for (double p : {0.2, 0.7, 0.99}) {
                const double ref = oracle::binomial_tail(N, k, p);
                if (ref < 1e-280) continue;
                EXPECT_NEAR(log_binomial_tail(N, k, p), std::log(ref), 1e-9) << N << ' ' << k << ' ' << p;
            }
}

TEST(AllocateConfidence, Examples) {
    EXPECT_NEAR(allocate_confidence(1, 0.9).per_interval_beta, 0.05, 1e-15);
    const auto l = allocate_confidence(480 * 480, 0.99);
    EXPECT_NEAR(l.per_interval_beta, 0.01 / (2.0 * 480 * 480), 1e-20);
    EXPECT_NEAR(l.overall_confidence(), 0.99, 1e-12);
    EXPECT_THROW(allocate_confidence(0, 0.9), Error);
    EXPECT_THROW(allocate_confidence(3, 1.0), Error);
}
