#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "nkpsaf/signal.hpp"

using namespace nkpsaf;
namespace fs = std::filesystem;

namespace {

TapDelayLine line_from(std::initializer_list<double> oldest_first, std::size_t cap) {
    TapDelayLine d(cap);
    for (double x : oldest_first)
        d.push(x);
    return d;
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "nkpsaf_signal";
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST(ImpulseResponse, RejectsEmptyAndNonFinite) {
    EXPECT_THROW(ImpulseResponse(std::vector<double>{}), DimensionError);
    EXPECT_THROW(ImpulseResponse({1.0, std::nan("")}), ParameterError);
    EXPECT_EQ(ImpulseResponse::impulse(3).length(), 4u);
    EXPECT_EQ(ImpulseResponse::impulse(3)[3], 1.0);
}

TEST(FirFilter, IdentityFilterPassesCurrentSample) {
    auto d = line_from({7.0, 5.0}, 4);
    EXPECT_EQ(fir_filter(ImpulseResponse{1.0}, d), 5.0);
}

TEST(FirFilter, SecondaryPathTapsOnDelayedSamples) {
    // x_{k-4}=1, x_{k-3}=2, then three more samples that the taps ignore.
    auto d = line_from({1.0, 2.0, 9.0, 9.0, 9.0}, 5);
    EXPECT_NEAR(fir_filter(ImpulseResponse{0, 0, 0, 1, -1.4}, d), 0.6, 1e-15);
}

TEST(FirFilter, HandConvolution) {
    auto d = line_from({4.0, 3.0}, 2);
    EXPECT_EQ(fir_filter(ImpulseResponse{1.0, 2.0}, d), 11.0);
}

TEST(FirFilter, LineShorterThanFilterThrows) {
    TapDelayLine d(2);
    EXPECT_THROW(fir_filter(ImpulseResponse{1, 2, 3}, d), DimensionError);
}

TEST(TapDelayLine, ZeroPreHistoryAndFifo) {
    TapDelayLine d(4);
    d.push(1.0);
    EXPECT_EQ(std::vector<double>(d.view().begin(), d.view().end()), (std::vector<double>{1, 0, 0, 0}));
    d.push(2.0);
    EXPECT_EQ(std::vector<double>(d.view().begin(), d.view().end()), (std::vector<double>{2, 1, 0, 0}));
}

TEST(TapDelayLine, CapacityDropsOldest) {
    auto d = line_from({1, 2, 3, 4, 5}, 4);
    EXPECT_EQ(std::vector<double>(d.view().begin(), d.view().end()), (std::vector<double>{5, 4, 3, 2}));
    d.clear();
    EXPECT_EQ(d[0], 0.0);
}

TEST(TapDelayLine, RejectsNonFiniteAndZeroCapacity) {
    TapDelayLine d(2);
    EXPECT_THROW(d.push(INFINITY), ParameterError);
    EXPECT_THROW(TapDelayLine(0), DimensionError);
}

TEST(TapDelayLine, MatchesNaiveShiftRegister) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    TapDelayLine d(7);
    std::vector<double> naive(7, 0.0);
    for (int k = 0; k < 100; ++k) {
        const double x = n(rng);
        d.push(x);
        naive.insert(naive.begin(), x);
        naive.pop_back();
        for (std::size_t i = 0; i < 7; ++i)
            ASSERT_EQ(d[i], naive[i]);
    }
}

TEST(SnapshotMatrix, SingleColumnIsCurrentState) {
    auto h = line_from({1, 2, 3}, 3);
    const auto m = snapshot_matrix(h, 3, 1);
    EXPECT_EQ(m(0, 0), 3.0);
    EXPECT_EQ(m(2, 0), 1.0);
}

TEST(SnapshotMatrix, ConstantInputFillsAfterWarmUp) {
    TapDelayLine h(6);
    for (int i = 0; i < 6; ++i)
        h.push(2.5);
    const auto m = snapshot_matrix(h, 3, 4);
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t i = 0; i < 3; ++i)
            EXPECT_EQ(m(i, j), 2.5);
}

TEST(SnapshotMatrix, RampColumns) {
    auto h = line_from({1, 2, 3}, 3);
    const auto m = snapshot_matrix(h, 2, 2);
    EXPECT_EQ(m(0, 0), 3.0);
    EXPECT_EQ(m(1, 0), 2.0);
    EXPECT_EQ(m(0, 1), 2.0);
    EXPECT_EQ(m(1, 1), 1.0);
}

TEST(SnapshotMatrix, ShortHistoryThrows) {
    TapDelayLine h(3);
    EXPECT_THROW(snapshot_matrix(h, 2, 3), DimensionError);
}

TEST(FirProperties, Linearity) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n;
    TapDelayLine d(16);
    for (int i = 0; i < 40; ++i)
        d.push(n(rng));
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(16), b(16), mix(16);
        const double ca = n(rng), cb = n(rng);
        for (std::size_t i = 0; i < 16; ++i) {
            a[i] = n(rng);
            b[i] = n(rng);
            mix[i] = ca * a[i] + cb * b[i];
        }
        const double lhs = fir_filter(mix, d);
        const double rhs = ca * fir_filter(a, d) + cb * fir_filter(b, d);
        EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
    }
}

TEST(FirProperties, ShiftInvariance) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    const std::vector<double> taps{0.3, -0.2, 0.7, 0.1};
    std::vector<double> x(50);
    for (auto& v : x)
        v = n(rng);
    const std::size_t delay = 3;
    TapDelayLine a(4), b(4);
    std::vector<double> ya, yb;
    for (std::size_t k = 0; k < x.size() + delay; ++k) {
        a.push(k < x.size() ? x[k] : 0.0);
        b.push(k < delay ? 0.0 : x[k - delay]);
        ya.push_back(fir_filter(taps, a));
        yb.push_back(fir_filter(taps, b));
    }
    for (std::size_t k = delay; k < yb.size(); ++k)
        EXPECT_EQ(yb[k], ya[k - delay]);
}

TEST(SampleFiles, TextAndBinaryRoundTrip) {
    const std::vector<double> v{0.1, -2.5e-300, 3.0, 1.0 / 3.0};
    for (const char* name : {"rt.txt", "rt.f64"}) {
        const auto p = scratch(name);
        write_samples(p, v);
        EXPECT_EQ(read_samples(p), v) << name;
    }
}

TEST(SampleFiles, RejectsBadInput) {
    EXPECT_THROW(read_samples(scratch("missing.txt")), IngestionError);
    const auto bad = scratch("bad.txt");
    std::ofstream(bad) << "1.0\nabc\n";
    EXPECT_THROW(read_samples(bad), IngestionError);
    const auto odd = scratch("odd.f64");
    std::ofstream(odd, std::ios::binary) << "12345";
    EXPECT_THROW(read_samples(odd), IngestionError);
    EXPECT_THROW(read_samples(scratch("x.wav")), IngestionError);
}

TEST(SampleFiles, ImpulseResponseLoad) {
    const auto p = scratch("ir.txt");
    std::ofstream(p) << "0\n0\n1\n-0.5\n";
    const auto ir = load_impulse_response(p);
    EXPECT_EQ(ir.length(), 4u);
    EXPECT_EQ(ir[3], -0.5);
}
