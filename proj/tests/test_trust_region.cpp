#include "ctrcbo/random.hpp"
#include "ctrcbo/trust_region.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace ctrcbo;

namespace {

TrustRegion region(double length, double lmin, double lmax, int ts, int tf, Eigen::Index d = 2) {
    TrustRegionParams p{length, lmin, lmax, ts, tf};
    return TrustRegion::make(0, PolicyVector(Eigen::VectorXd::Constant(d, 0.5)), p);
}

}  // namespace

TEST(RegionBounds, FullSpanCoversGlobalBox) {
    GlobalBounds g{Eigen::Vector2d(-1.0, 2.0), Eigen::Vector2d(3.0, 5.0)};
    auto tr = TrustRegion::make(0, PolicyVector(g.midpoint()), {1.0, 0.05, 1.0, 3, 5});
    const Box b = region_bounds(tr, g);
    EXPECT_EQ(b.lower, g.lower);
    EXPECT_EQ(b.upper, g.upper);
}

TEST(RegionBounds, ClipsAtLowerCorner) {
    const auto g = GlobalBounds::unit(3);
    auto tr = TrustRegion::make(0, PolicyVector(Eigen::VectorXd::Zero(3)), {0.2, 0.05, 1.0, 3, 5});
    const Box b = region_bounds(tr, g);
    for (int j = 0; j < 3; ++j) {
        EXPECT_DOUBLE_EQ(b.lower[j], 0.0);
        EXPECT_DOUBLE_EQ(b.upper[j], 0.1);
    }
}

TEST(RegionBounds, RandomRegionsStayInsideAndContainCenter) {
    RandomStream r(21);
    for (int i = 0; i < 1000; ++i) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(r() % 5);
        GlobalBounds g{Eigen::VectorXd(d), Eigen::VectorXd(d)};
        Eigen::VectorXd c(d);
        for (Eigen::Index j = 0; j < d; ++j) {
            g.lower[j] = -3.0 + 3.0 * uniform01(r);
            g.upper[j] = g.lower[j] + 0.01 + 4.0 * uniform01(r);
            c[j] = g.lower[j] + uniform01(r) * (g.upper[j] - g.lower[j]);
        }
        const double len = 0.01 + 1.5 * uniform01(r);
        auto tr = TrustRegion::make(0, PolicyVector(c), {len, 0.005, 2.0, 3, 5});
        const Box b = region_bounds(tr, g);
        for (Eigen::Index j = 0; j < d; ++j) {
            EXPECT_GE(b.lower[j], g.lower[j]);
            EXPECT_LE(b.upper[j], g.upper[j]);
        }
        EXPECT_TRUE(b.contains(c));
    }
}

TEST(Update, ThreeSuccessesDouble) {
    auto tr = region(0.2, 0.05, 0.8, 3, 5);
    tr = update_on_outcome(tr, true);
    tr = update_on_outcome(tr, true);
    EXPECT_DOUBLE_EQ(tr.length, 0.2);
    tr = update_on_outcome(tr, true);
    EXPECT_DOUBLE_EQ(tr.length, 0.4);
    EXPECT_EQ(tr.success_streak, 0);
}

TEST(Update, DoublingCapsAtMax) {
    auto tr = region(0.5, 0.05, 0.8, 1, 5);
    tr = update_on_outcome(tr, true);
    EXPECT_DOUBLE_EQ(tr.length, 0.8);
    tr = update_on_outcome(tr, true);
    EXPECT_DOUBLE_EQ(tr.length, 0.8);
}

TEST(Update, TwoFailuresHalve) {
    auto tr = region(0.2, 0.05, 0.8, 3, 2);
    tr = update_on_outcome(tr, false);
    tr = update_on_outcome(tr, false);
    EXPECT_DOUBLE_EQ(tr.length, 0.1);
    EXPECT_EQ(tr.restart_count, 0);
}

TEST(Update, RestartBelowMinimum) {
    auto tr = region(0.4, 0.15, 0.8, 3, 1);
    tr = update_on_outcome(tr, false);  // 0.2
    tr = update_on_outcome(tr, false);  // 0.1 < 0.15: restart
    EXPECT_DOUBLE_EQ(tr.length, 0.4);
    EXPECT_EQ(tr.restart_count, 1);
}

TEST(Update, AlternatingOutcomesNeverMove) {
    auto tr = region(0.3, 0.05, 1.0, 2, 2);
    for (int i = 0; i < 20; ++i) {
        tr = update_on_outcome(tr, i % 2 == 0);
        EXPECT_DOUBLE_EQ(tr.length, 0.3);
    }
}

TEST(Update, MatchesReferenceAutomaton) {
    RandomStream r(4);
    for (int seq = 0; seq < 200; ++seq) {
        const int ts = 1 + static_cast<int>(r() % 4), tf = 1 + static_cast<int>(r() % 6);
        auto tr = region(0.4, 0.03, 1.0, ts, tf);
        oracle::TrModel m{0.4, 0.03, 1.0, 0.4, 0, 0, ts, tf, 0};
        for (int s = 0; s < 100; ++s) {
            const bool ok = uniform01(r) < 0.4;
            tr = update_on_outcome(tr, ok);
            m.step(ok);
            ASSERT_EQ(tr.length, m.length);
            ASSERT_EQ(tr.restart_count, m.restarts);
        }
    }
}

TEST(Recenter, AtCurrentCenterIsIdentity) {
    const auto g = GlobalBounds::unit(2);
    auto tr = region(0.3, 0.05, 1.0, 3, 5);
    const auto again = recenter(tr, tr.center, g);
    EXPECT_EQ(region_bounds(again, g).lower, region_bounds(tr, g).lower);
    EXPECT_EQ(region_bounds(again, g).upper, region_bounds(tr, g).upper);
    EXPECT_EQ(again.length, tr.length);
}

TEST(Recenter, AfterRestartUsesIncumbentAndInitialLength) {
    const auto g = GlobalBounds::unit(2);
    auto tr = region(0.4, 0.3, 1.0, 3, 1);
    tr = update_on_outcome(tr, false);
    ASSERT_EQ(tr.restart_count, 1);
    const PolicyVector best{0.9, 0.1};
    tr = recenter(tr, best, g);
    EXPECT_EQ(tr.center, best);
    EXPECT_DOUBLE_EQ(tr.length, tr.length_init);
}

TEST(Recenter, KeepsInvariantsAndRejectsOutside) {
    const auto g = GlobalBounds::unit(3);
    RandomStream r(6);
    auto tr = region(0.25, 0.05, 1.0, 3, 5, 3);
    for (int i = 0; i < 500; ++i) {
        const PolicyVector p{uniform01(r), uniform01(r), uniform01(r)};
        tr = recenter(update_on_outcome(tr, uniform01(r) < 0.5), p, g);
        EXPECT_TRUE(g.contains(tr.center.values()));
        EXPECT_GE(tr.length, tr.length_min);
        EXPECT_LE(tr.length, tr.length_max);
    }
    EXPECT_THROW(recenter(tr, PolicyVector{1.5, 0.0, 0.0}, g), std::invalid_argument);
}

TEST(Make, RejectsInconsistentLengths) {
    EXPECT_THROW(TrustRegion::make(0, PolicyVector{0.5}, {0.01, 0.05, 1.0, 3, 5}), std::invalid_argument);
    EXPECT_THROW(TrustRegion::make(0, PolicyVector{0.5}, {0.4, 0.05, 1.0, 0, 5}), std::invalid_argument);
}
