#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace mimorx;

namespace {
BitVector label_bits(int label) {
    BitVector b(4);
    QamConstellation::write_label(label, b.data());
    return b;
}
}  // namespace

TEST(Qam, AllZeroLabelIsCorner) {
    const auto s = map_bits({0, 0, 0, 0});
    ASSERT_EQ(s.size(), 1);
    EXPECT_NEAR(std::abs(s[0] - cplx(-3.0, -3.0) / std::sqrt(10.0)), 0.0, 1e-15);
}

TEST(Qam, UnitEnergyDistinctPoints) {
    const auto& pts = qam16().points();
    double e = 0.0;
    for (auto p : pts) e += std::norm(p);
    EXPECT_NEAR(e / 16.0, 1.0, 1e-12);
    for (int a = 0; a < 16; ++a)
        for (int b = a + 1; b < 16; ++b) EXPECT_GT(std::abs(pts[std::size_t(a)] - pts[std::size_t(b)]), 0.1);
}

TEST(Qam, GrayLabelling) {
    // Nearest neighbours (distance 2/sqrt(10)) differ in exactly one bit.
    const auto& pts = qam16().points();
    const double dmin = 2.0 / std::sqrt(10.0);
    int pairs = 0;
    for (int a = 0; a < 16; ++a)
        for (int b = a + 1; b < 16; ++b)
            if (std::abs(std::abs(pts[std::size_t(a)] - pts[std::size_t(b)]) - dmin) < 1e-12) {
                EXPECT_EQ(std::popcount(unsigned(a ^ b)), 1) << a << " " << b;
                ++pairs;
            }
    EXPECT_EQ(pairs, 24);
}

TEST(Qam, RoundTripAllLabels) {
    BitVector bits;
    for (int l = 0; l < 16; ++l) {
        auto b = label_bits(l);
        bits.insert(bits.end(), b.begin(), b.end());
    }
    EXPECT_EQ(hard_demap(map_bits(bits)), bits);
}

TEST(Qam, RejectsBadBitStreams) {
    EXPECT_THROW(map_bits({0, 1, 0}), DimensionError);
    EXPECT_THROW(map_bits({0, 2, 0, 0}), std::invalid_argument);
}

TEST(Qam, SmallPerturbationKeepsLabel) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double r = 0.99 / std::sqrt(10.0);  // just under half the minimum distance
    for (int l = 0; l < 16; ++l)
        for (int t = 0; t < 50; ++t) {
            const double ang = std::numbers::pi * u(rng);
            ComplexVector s(1);
            s[0] = qam16().point(l) + std::polar(r * std::abs(u(rng)), ang);
            EXPECT_EQ(hard_demap(s), label_bits(l));
        }
}

TEST(Qam, OriginTieGoesToLowestInnerLabel) {
    const auto b = hard_demap(ComplexVector::Zero(1));
    EXPECT_EQ(b, (BitVector{0, 1, 0, 1}));
}

TEST(Pilots, PaperDimensions) {
    LinkConfig cfg = paper_profile();
    const auto plan = build_pilot_plan(cfg);
    EXPECT_EQ(plan.M_p, 32);
    ASSERT_EQ(plan.tones.size(), 32);
    for (Index k = 0; k < 32; ++k) EXPECT_EQ(plan.tones[k], 4 * k);
}

TEST(Pilots, ConstantModulusAndOrthogonal) {
    for (double rho : {1.0, 2.5}) {
        LinkConfig cfg;
        cfg.rho = rho;
        const auto plan = build_pilot_plan(cfg);
        ASSERT_EQ(plan.sequences.size(), 2u);
        for (const auto& s : plan.sequences)
            for (Index k = 0; k < s.size(); ++k) EXPECT_NEAR(std::abs(s[k]), std::sqrt(rho), 1e-14);
        EXPECT_NEAR(std::abs(plan.sequences[0].dot(plan.sequences[1])), 0.0, 1e-12);
    }
    LinkConfig four;
    four.Nt = 4;
    four.L = 8;
    four.M_p = 32;
    const auto plan = build_pilot_plan(four);
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b)
            EXPECT_NEAR(std::abs(plan.sequences[std::size_t(a)].dot(plan.sequences[std::size_t(b)])), 0.0, 1e-12);
}

TEST(Pilots, RejectsBadDimensions) {
    LinkConfig cfg;
    cfg.M_p = 16;
    EXPECT_THROW(build_pilot_plan(cfg), DimensionError);
    cfg = LinkConfig{};
    cfg.M = 48;  // not divisible by M_p=32
    EXPECT_THROW(build_pilot_plan(cfg), DimensionError);
}

TEST(Frame, PilotSymbolZeroOffPilotTones) {
    LinkConfig cfg;
    const auto plan = build_pilot_plan(cfg);
    Rng rng(1);
    const auto f = build_frame(cfg, plan, random_bits(std::size_t(cfg.Nt * cfg.M * 4), rng));
    for (Index r = 0; r < cfg.Nt; ++r)
        for (Index m = 0; m < cfg.M; ++m) {
            const auto v = f.pilot_symbol[std::size_t(r)][m];
            if (m % 2 == 0)
                EXPECT_NEAR(std::abs(v), 1.0, 1e-14);
            else
                EXPECT_EQ(v, cplx(0.0));
        }
    EXPECT_EQ(hard_demap(f.data_symbol[1]), f.payload_bits[1]);
    EXPECT_THROW(build_frame(cfg, plan, BitVector(8)), DimensionError);
}

TEST(CyclicPrefix, Basics) {
    std::mt19937_64 rng(2);
    const auto x = oracle::random_vector(16, rng);
    EXPECT_EQ(add_cyclic_prefix(x, 0), x);
    const auto withcp = add_cyclic_prefix(x, 4);
    EXPECT_EQ(withcp.size(), 20);
    EXPECT_EQ(withcp.head(4), x.tail(4));
    EXPECT_EQ(remove_cyclic_prefix(withcp, 4), x);
    EXPECT_THROW(add_cyclic_prefix(x, 17), DimensionError);
}
