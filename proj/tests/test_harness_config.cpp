#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"

using namespace mimorx;
namespace fs = std::filesystem;

TEST(Config, ParseFormatRoundTrip) {
    auto c = paper_profile();
    c.snr_db = 12.25;
    c.train_snr_db = {0.5, 30};
    c.linear_pa = true;
    c.seed = 18446744073709551615ull;
    const auto back = parse_config(format_config(c));
    EXPECT_EQ(format_config(back), format_config(c));
    EXPECT_EQ(back.seed, c.seed);
    EXPECT_EQ(back.train_groups.size(), 32u);
}

TEST(Config, OverridesCommentsAndErrors) {
    const auto c = parse_config("# comment\nM = 128  # trailing\n\nNr=8\nclipping_db = 5\n", desk_profile());
    EXPECT_EQ(c.M, 128);
    EXPECT_EQ(c.Nr, 8);
    EXPECT_EQ(c.clipping_db, 5.0);
    EXPECT_EQ(c.Nt, 2);
    try {
        parse_config("bogus_key = 3\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bogus_key"), std::string::npos);
    }
    EXPECT_THROW(parse_config("M = abc\n"), ConfigError);
    EXPECT_THROW(parse_config("M 64\n"), ConfigError);
    EXPECT_THROW(parse_config("snr_mode = sometimes\n"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/cfg.txt"), ConfigError);
}

TEST(Config, Validation) {
    EXPECT_NO_THROW(desk_profile().validate());
    EXPECT_NO_THROW(paper_profile().validate());
    auto c = desk_profile();
    c.M_p = 16;
    EXPECT_THROW(c.validate(), DimensionError);
    c = desk_profile();
    c.L_cp = 10;
    EXPECT_THROW(c.validate(), DimensionError);
    c = desk_profile();
    c.train_groups = {16};
    EXPECT_THROW(c.validate(), DimensionError);
    c = desk_profile();
    c.K = 7;
    EXPECT_THROW(c.validate(), DimensionError);
    EXPECT_NEAR(desk_profile().sigma2(), 2.0 / std::pow(10.0, 1.5), 1e-15);
}

TEST(Wilson, KnownValues) {
    // 10 errors in 100 trials: standard Wilson 95% bounds.
    const auto ci = wilson_interval(10, 100);
    EXPECT_NEAR(ci.low, 0.0552, 1e-4);
    EXPECT_NEAR(ci.high, 0.1744, 1e-4);
    const auto zero = wilson_interval(0, 1000);
    EXPECT_EQ(zero.low, 0.0);
    EXPECT_NEAR(zero.high, 3.8267e-3, 1e-6);
    EXPECT_TRUE(ci.overlaps(wilson_interval(12, 100)));
    EXPECT_FALSE(wilson_interval(1, 1000).overlaps(wilson_interval(100, 1000)));
    // half-width shrinks with more trials at a fixed rate
    EXPECT_LT(wilson_interval(1000, 10000).half_width(), wilson_interval(100, 1000).half_width());
}

TEST(Csv, RoundTripAndReport) {
    std::vector<BerRecord> rows{{"ls_zf_linear", 5, 7, 100352, 22807, 22807.0 / 100352, 0.25, 42},
                                {"mld_lower", 25, 7, 100352, 3, 3.0 / 100352, 12.5, 18446744073709551615ull}};
    const auto path = (fs::temp_directory_path() / "mimorx_rows.csv").string();
    write_csv(path, rows);
    const auto back = read_csv(path);
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_TRUE(back[i].same_result(rows[i]));
        EXPECT_DOUBLE_EQ(back[i].wall_time_s, rows[i].wall_time_s);
    }
    const auto table = report_table(back);
    EXPECT_NE(table.find("ls_zf_linear,7,5,100352,22807,"), std::string::npos);
    EXPECT_NE(table.find(",yes\n"), std::string::npos);
    EXPECT_NE(table.find(",no\n"), std::string::npos);
    fs::remove(path);
    EXPECT_THROW(parse_csv_row("a,b"), std::runtime_error);
}

TEST(Sweep, NoiselessLinearIsErrorFree) {
    LinkConfig c;
    const auto r = run_cell("ls_zf_linear", std::numeric_limits<double>::infinity(), 3, c, 10000, {});
    EXPECT_EQ(r.bit_errors, 0);
    EXPECT_GE(r.bits_simulated, 10000);
    EXPECT_EQ(r.ber, 0.0);
}

TEST(Sweep, ReproducibleAndResumable) {
    SweepSpec spec;
    spec.min_bits = 10000;
    spec.snr_points = {5, 25};
    spec.receivers = {"ls_zf_linear", "ls_zf_nonlinear"};
    spec.seed = 17;
    const auto a = run_sweep(spec, {});
    const auto b = run_sweep(spec, {});
    ASSERT_EQ(a.size(), 4u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE(a[i].same_result(b[i]));
        EXPECT_EQ(a[i].ber, double(a[i].bit_errors) / double(a[i].bits_simulated));
        EXPECT_GE(a[i].bits_simulated, spec.min_bits);
        // a row regenerates from its own seed
        EXPECT_TRUE(run_cell(a[i].receiver, a[i].snr_db, a[i].seed, spec.cfg, spec.min_bits, {}).same_result(a[i]));
    }
    // receivers at the same SNR share a seed
    EXPECT_EQ(a[0].seed, a[2].seed);
    EXPECT_EQ(a[0].receiver, "ls_zf_linear");
    EXPECT_EQ(a[1].snr_db, 25.0);

    // resume: a fake completed cell is kept and not recomputed
    std::vector<BerRecord> done{a[0]};
    done[0].bit_errors = 123456;
    int computed = 0;
    const auto c = run_sweep(spec, {}, done, [&](const BerRecord&) { ++computed; });
    EXPECT_EQ(computed, 3);
    EXPECT_EQ(c[0].bit_errors, 123456);
    EXPECT_TRUE(c[3].same_result(a[3]));

    spec.workers = 3;
    const auto par = run_sweep(spec, {});
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(par[i].same_result(a[i]));
}

TEST(Sweep, RejectsBadSpecs) {
    SweepSpec spec;
    spec.min_bits = 100;
    EXPECT_THROW(run_sweep(spec, {}), std::invalid_argument);
    spec.min_bits = 10000;
    spec.receivers = {"type1"};
    EXPECT_THROW(run_sweep(spec, {}), std::invalid_argument);
    spec.receivers = {"nope"};
    EXPECT_THROW(run_sweep(spec, {}), std::invalid_argument);
    spec.receivers = {"ls_zf_linear"};
    spec.snr_points = {std::numeric_limits<double>::quiet_NaN()};
    EXPECT_THROW(run_sweep(spec, {}), std::invalid_argument);
}

TEST(Sweep, LinearBaselineImprovesWithSnrAtEightReceiveAntennas) {
    SweepSpec spec;
    spec.cfg.Nr = 8;
    spec.min_bits = 20000;
    spec.snr_points = {5, 25};
    spec.receivers = {"ls_zf_linear"};
    const auto rows = run_sweep(spec, {});
    EXPECT_LT(rows[1].ber, rows[0].ber);
}
