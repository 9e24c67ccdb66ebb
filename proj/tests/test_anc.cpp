#include <gtest/gtest.h>

#include <random>

#include "nkpsaf/anc.hpp"
#include "nkpsaf/noise.hpp"

using namespace nkpsaf;

namespace {

AlgoConfig small_cfg() {
    AlgoConfig cfg;
    cfg.D1 = 4;
    cfg.D2 = 4;
    cfg.Q = 2;
    cfg.mu = 0.005;
    return cfg;
}

AcousticScenario scenario(std::vector<double> p, std::vector<double> s) {
    return {ImpulseResponse(p), ImpulseResponse(s), ImpulseResponse(s)};
}

std::vector<double> ar_input(std::uint64_t seed, std::size_t n, double pole = 0.9) {
    GaussianSource g(1.0, make_stream(seed, 1));
    return sample_ar1(pole, n, g);
}

} // namespace

TEST(AncNames, ParseVariants) {
    EXPECT_TRUE(parse_anc_algorithm("fxlms").fxlms);
    EXPECT_TRUE(parse_anc_algorithm("mfxlms").fxlms);
    EXPECT_EQ(parse_anc_algorithm("fxnspn").law, Algorithm::nspn);
    EXPECT_EQ(parse_anc_algorithm("fxfonspn").law, Algorithm::fonspn);
    EXPECT_EQ(parse_anc_algorithm("nkp-fxnspn").law, Algorithm::nkp_nspn);
    EXPECT_EQ(parse_anc_algorithm("nkp-mfxfonspn").law, Algorithm::nkp_fonspn);
    EXPECT_EQ(parse_anc_algorithm("tnkp-mfxfonspn").law, Algorithm::tnkp_fonspn);
    EXPECT_FALSE(parse_anc_algorithm("tnkp-fxfonspn").fxlms);
    EXPECT_THROW(parse_anc_algorithm("nspn"), ParameterError);
    EXPECT_THROW(parse_anc_algorithm("fxnlms"), ParameterError);
    EXPECT_THROW(parse_anc_algorithm("nkpfxnspn"), ParameterError);
}

TEST(AncLoop, ZeroControllerLeavesDisturbance) {
    const auto cfg = small_cfg();
    const auto bank = design_bank(cfg.N, cfg.L);
    AncLoop loop({false, Algorithm::nspn}, cfg, bank, scenario({0, 1, 0.5}, {0, 0, 0, 1}));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int k = 0; k < 200; ++k) {
        const auto s = loop.step(0.0, g(rng));
        EXPECT_EQ(s.e, s.d);
    }
    for (double w : loop.weights())
        EXPECT_EQ(w, 0.0);
}

TEST(AncLoop, PureDelaySecondaryPathTrace) {
    const auto cfg = small_cfg();
    const auto bank = design_bank(cfg.N, cfg.L);
    AncLoop loop({false, Algorithm::nkp_fonspn}, cfg, bank, scenario({0, 0, 0, 0.8, 0.3}, {0, 0, 0, 1}));
    const auto x = ar_input(2, 3000);
    std::vector<double> ybar;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const auto s = loop.step(x[k]);
        ybar.push_back(s.ybar);
        EXPECT_EQ(s.y, k >= 3 ? ybar[k - 3] : 0.0) << k;
        EXPECT_EQ(s.e, s.d - s.y);
    }
}

TEST(AncLoop, FilteredReferenceUsesModel) {
    const auto cfg = small_cfg();
    const auto bank = design_bank(cfg.N, cfg.L);
    const auto x = ar_input(3, 500);
    AncLoop unit({false, Algorithm::nspn}, cfg, bank, scenario({1}, {1}));
    AncLoop path({false, Algorithm::nspn}, cfg, bank, {ImpulseResponse{1}, ImpulseResponse{0, 0, 0, 1, -1.4},
                                                       ImpulseResponse{0, 0, 0, 1, -1.4}});
    for (std::size_t k = 0; k < x.size(); ++k) {
        EXPECT_EQ(unit.step(x[k]).xf, x[k]);
        const double expect = (k >= 3 ? x[k - 3] : 0.0) - 1.4 * (k >= 4 ? x[k - 4] : 0.0);
        EXPECT_NEAR(path.step(x[k]).xf, expect, 1e-15);
    }
    AncLoop silent({false, Algorithm::nspn}, cfg, bank, scenario({1}, {0, 1}));
    for (int k = 0; k < 20; ++k)
        EXPECT_EQ(silent.step(0.0).xf, 0.0);
}

TEST(AncLoop, ModelMismatchIsVisible) {
    // Swapping true path and model changes the filtered reference but not the plant.
    const auto cfg = small_cfg();
    const auto bank = design_bank(cfg.N, cfg.L);
    AncLoop a({false, Algorithm::nspn}, cfg, bank, {ImpulseResponse{1}, ImpulseResponse{0, 0, 0, 1}, ImpulseResponse{0, 1}});
    const auto x = ar_input(4, 50);
    for (std::size_t k = 0; k < x.size(); ++k)
        EXPECT_EQ(a.step(x[k]).xf, k >= 1 ? x[k - 1] : 0.0);
}

TEST(AncLoop, FxlmsSingleTapStep) {
    AlgoConfig cfg;
    cfg.D1 = cfg.D2 = cfg.Q = 1;
    cfg.N = 1;
    cfg.L = 2;
    cfg.mu = 0.1;
    const auto bank = design_bank(1, 2);
    AncLoop loop({true, Algorithm::nlms}, cfg, bank, scenario({1}, {1}));
    const auto s = loop.step(3.0, -1.0);
    EXPECT_EQ(s.e, 2.0);
    EXPECT_NEAR(loop.weights()[0], 0.6, 1e-15);
    // Zero residual: with x=0 and no disturbance the weight stays put.
    AncLoop idle({true, Algorithm::nlms}, cfg, bank, scenario({1}, {1}));
    idle.step(0.0, 0.0);
    EXPECT_EQ(idle.weights()[0], 0.0);
}

TEST(AncLoop, FxlmsCancelsTone) {
    AlgoConfig cfg = small_cfg();
    cfg.mu = 0.01;
    const auto bank = design_bank(cfg.N, cfg.L);
    AncLoop loop({true, Algorithm::nlms}, cfg, bank, scenario({1}, {1}));
    double first = 0.0, last = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const auto s = loop.step(std::sin(0.3 * k));
        if (k < 1000) first += s.e * s.e;
        if (k >= 9000) last += s.e * s.e;
    }
    EXPECT_LT(last, 1e-3 * first);
    EXPECT_LT(loop.anr().db(), -20.0);
}

TEST(AncLoop, ZeroResidualWindowFreezesSubbandController) {
    const auto cfg = small_cfg();
    const auto bank = design_bank(cfg.N, cfg.L);
    AncLoop loop({false, Algorithm::nkp_fonspn}, cfg, bank, scenario({1}, {1}));
    const std::vector<double> w0(loop.weights().begin(), loop.weights().end());
    for (int k = 0; k < 100; ++k)
        EXPECT_TRUE(loop.step(0.0).updated == (k % cfg.r == 0));
    EXPECT_EQ(std::vector<double>(loop.weights().begin(), loop.weights().end()), w0);
}

TEST(AncLoop, WeightsFrozenBetweenUpdates) {
    const auto cfg = small_cfg();
    const auto bank = design_bank(cfg.N, cfg.L);
    AncLoop loop({false, Algorithm::fonspn}, cfg, bank, scenario({0, 0, 1, 0.4}, {0, 1}));
    const auto x = ar_input(5, 400);
    std::vector<double> prev;
    for (std::size_t k = 0; k < x.size(); ++k) {
        loop.step(x[k]);
        std::vector<double> w(loop.weights().begin(), loop.weights().end());
        if (k % cfg.r != 0 && !prev.empty()) {
            ASSERT_EQ(w, prev) << k;
        }
        prev = w;
    }
}

TEST(AncLoop, BetaOneDegeneratesToNspn) {
    auto cfg = small_cfg();
    cfg.beta = 1.0;
    const auto bank = design_bank(cfg.N, cfg.L);
    const auto sc = scenario({0, 0, 0, 0, 1.2, -0.3}, {0, 0, 1, -0.5});
    for (auto pair : {std::pair{Algorithm::nkp_nspn, Algorithm::nkp_fonspn}, std::pair{Algorithm::nspn, Algorithm::fonspn}}) {
        AncLoop a({false, pair.first}, cfg, bank, sc), b({false, pair.second}, cfg, bank, sc);
        const auto x = ar_input(6, 20000);
        for (double v : x) {
            a.step(v);
            b.step(v);
        }
        EXPECT_EQ(std::vector<double>(a.weights().begin(), a.weights().end()),
                  std::vector<double>(b.weights().begin(), b.weights().end()));
    }
}

TEST(AncLoop, UnreachableThresholdMatchesNkp) {
    const auto cfg = small_cfg();
    const auto bank = design_bank(cfg.N, cfg.L);
    const auto sc = scenario({0, 0, 0, 0, 1.2, -0.3}, {0, 0, 1, -0.5});
    AncLoop a({false, Algorithm::nkp_fonspn}, cfg, bank, sc), b({false, Algorithm::tnkp_fonspn}, cfg, bank, sc);
    for (double v : ar_input(7, 10000)) {
        const auto sa = a.step(v), sb = b.step(v);
        ASSERT_EQ(sa.e, sb.e);
    }
    EXPECT_EQ(b.filter().tnkp().switch_update, -1);
}

TEST(AncLoop, ThresholdSwitchUsesAnr) {
    auto cfg = small_cfg();
    cfg.rho = -3.0;
    const auto bank = design_bank(cfg.N, cfg.L);
    AncLoop loop({false, Algorithm::tnkp_fonspn}, cfg, bank, scenario({0, 0, 0, 0, 1.2, -0.3}, {0, 0, 1, -0.5}));
    bool seen = false;
    for (double v : ar_input(8, 30000)) {
        const auto s = loop.step(v);
        if (!s.updated || seen)
            continue;
        if (loop.filter().tnkp().latch) {
            EXPECT_LE(loop.anr().db(), cfg.rho);
            seen = true;
        } else {
            EXPECT_GT(loop.anr().db(), cfg.rho);
        }
    }
    EXPECT_TRUE(seen);
}

TEST(MultiAncLoop, SingleChannelMatchesScalarLoop) {
    const auto cfg = small_cfg();
    const auto bank = design_bank(cfg.N, cfg.L);
    const std::vector<double> p{0, 0, 0, 0, 1.2, -0.3}, s{0, 0, 1, -0.5};
    for (AncAlgorithm algo : {AncAlgorithm{true, Algorithm::nlms}, AncAlgorithm{false, Algorithm::nkp_fonspn}}) {
        AncLoop one(algo, cfg, bank, scenario(p, s));
        MultiScenario ms;
        ms.primary = {ImpulseResponse(p)};
        ms.secondary = {{ImpulseResponse(s)}};
        ms.secondary_model = ms.secondary;
        MultiAncLoop multi(algo, cfg, bank, ms);
        for (double v : ar_input(9, 5000)) {
            const auto a = one.step(v);
            const auto b = multi.step(v);
            ASSERT_EQ(a.e, b[0]);
        }
        EXPECT_EQ(one.anr().ratio(), multi.anr().ratio());
    }
}

TEST(MultiAncLoop, ZeroControllersPassDisturbance) {
    auto cfg = small_cfg();
    const auto bank = design_bank(cfg.N, cfg.L);
    MultiAncLoop loop({false, Algorithm::fonspn}, cfg, bank, five_channel_paths());
    std::vector<double> dist(5);
    for (int k = 0; k < 50; ++k) {
        for (std::size_t c = 0; c < 5; ++c)
            dist[c] = 0.1 * static_cast<double>(c + 1) * std::cos(k);
        const auto e = loop.step(0.0, dist);
        for (std::size_t c = 0; c < 5; ++c)
            EXPECT_EQ(e[c], loop.desired()[c]);
    }
}

TEST(MultiAncLoop, FiveChannelPaths) {
    const auto s = five_channel_paths();
    ASSERT_EQ(s.speakers(), 5u);
    ASSERT_EQ(s.mics(), 5u);
    EXPECT_EQ(s.secondary[0][0][3], 1.0);
    EXPECT_EQ(s.secondary[0][0][4], -1.4);
    EXPECT_EQ(s.primary[0].length(), 9u);
    EXPECT_EQ(s.primary[0][6], 1.5);
    EXPECT_NO_THROW(s.validate());
    MultiScenario bad = s;
    bad.secondary[2].pop_back();
    EXPECT_THROW(bad.validate(), DimensionError);
}

TEST(MultiAncLoop, FiveChannelNoiseReduction) {
    AlgoConfig cfg;
    cfg.D1 = 5;
    cfg.D2 = 4;
    cfg.Q = 4;
    cfg.p = 1.2;
    cfg.mu = 0.009;
    const auto bank = design_bank(cfg.N, cfg.L);
    MultiAncLoop loop({false, Algorithm::nkp_fonspn}, cfg, bank, five_channel_paths());
    const auto x = ar_input(10, 30000);
    std::vector<double> quarter(4, 0.0);
    for (std::size_t k = 0; k < x.size(); ++k) {
        loop.step(x[k]);
        quarter[k * 4 / x.size()] += loop.anr().db();
    }
    EXPECT_FALSE(loop.divergent());
    for (std::size_t i = 0; i < 4; ++i)
        EXPECT_LT(quarter[i] / 7500.0, -5.0) << "quarter " << i;
    EXPECT_LT(loop.anr().db(), -5.0);
}
