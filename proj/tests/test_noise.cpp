#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "nkpsaf/noise.hpp"

using namespace nkpsaf;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMillion = 1'000'000;

double mean_cos(const std::vector<double>& v, double t) {
    double acc = 0.0;
    for (double x : v)
        acc += std::cos(t * x);
    return acc / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v)
        acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size());
}

double exceed_fraction(const std::vector<double>& v, double level) {
    return static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return std::abs(x) > level; }))
           / static_cast<double>(v.size());
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "nkpsaf_noise";
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST(AlphaStable, ParameterValidation) {
    EXPECT_THROW(sample_alpha_stable({0.0, 1.0, 1}, 1), ParameterError);
    EXPECT_THROW(sample_alpha_stable({2.1, 1.0, 1}, 1), ParameterError);
    EXPECT_THROW(sample_alpha_stable({1.5, 0.0, 1}, 1), ParameterError);
    EXPECT_TRUE(sample_alpha_stable({1.5, 1.0, 1}, 0).empty());
}

TEST(AlphaStable, GaussianCaseVarianceIsTwiceGamma) {
    const auto v = sample_alpha_stable({2.0, 0.5, 21}, kMillion);
    EXPECT_NEAR(variance(v), 1.0, 0.02);
}

TEST(AlphaStable, CauchyMedianIsZero) {
    auto v = sample_alpha_stable({1.0, 1.0, 22}, kMillion);
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    EXPECT_NEAR(v[v.size() / 2], 0.0, 0.01);
}

class CharacteristicFunction : public ::testing::TestWithParam<double> {};

TEST_P(CharacteristicFunction, MatchesClosedForm) {
    const double alpha = GetParam();
    for (double gamma : {1.0, 0.3}) {
        const auto v = sample_alpha_stable({alpha, gamma, 100 + static_cast<std::uint64_t>(alpha * 4)}, kMillion);
        for (double t : {0.5, 1.0, 2.0})
            EXPECT_NEAR(mean_cos(v, t), std::exp(-gamma * std::pow(t, alpha)), 0.01)
                << "alpha=" << alpha << " gamma=" << gamma << " t=" << t;
    }
}

INSTANTIATE_TEST_SUITE_P(Alphas, CharacteristicFunction, ::testing::Values(0.5, 0.75, 1.0, 1.5, 2.0));

TEST(AlphaStable, GaussianCaseKurtosis) {
    const auto v = sample_alpha_stable({2.0, 1.0, 23}, kMillion);
    const double var = variance(v);
    double m4 = 0.0;
    for (double x : v)
        m4 += x * x * x * x;
    m4 /= static_cast<double>(v.size());
    // Standard error of the kurtosis estimate is sqrt(24/n) ~ 0.005.
    EXPECT_NEAR(m4 / (var * var), 3.0, 0.03);
}

TEST(AlphaStable, SmallerAlphaHasHeavierTails) {
    const double gamma = 0.2;
    const auto g = sample_alpha_stable({2.0, gamma, 24}, kMillion);
    double prev = exceed_fraction(g, 10.0 * std::pow(gamma, 0.5));
    for (double alpha : {1.5, 1.0, 0.75}) {
        const auto v = sample_alpha_stable({alpha, gamma, 24}, kMillion);
        const double frac = exceed_fraction(v, 10.0 * std::pow(gamma, 1.0 / alpha));
        EXPECT_GT(frac, prev) << "alpha=" << alpha;
        prev = frac;
    }
}

TEST(AlphaStable, SeedDeterminism) {
    EXPECT_EQ(sample_alpha_stable({1.2, 0.7, 9}, 1000), sample_alpha_stable({1.2, 0.7, 9}, 1000));
    EXPECT_NE(sample_alpha_stable({1.2, 0.7, 9}, 1000), sample_alpha_stable({1.2, 0.7, 10}, 1000));
}

TEST(Streams, DistinctStreamsDiffer) {
    auto a = make_stream(5, 1);
    auto b = make_stream(5, 2);
    auto c = make_stream(5, 1);
    const auto x = a();
    EXPECT_NE(x, b());
    EXPECT_EQ(x, c());
}

TEST(ArOne, ZeroPoleIsDriver) {
    AlphaStableSource s1({1.5, 1.0, 31}), s2({1.5, 1.0, 31});
    const auto u = sample_ar1(0.0, 500, s1);
    for (double v : u)
        EXPECT_EQ(v, s2());
}

TEST(ArOne, LagOneAutocorrelation) {
    const auto u = sample_ar1(ArOneParams{0.9, 1.0, 32}, kMillion);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 1; k < u.size(); ++k) {
        num += u[k] * u[k - 1];
        den += u[k] * u[k];
    }
    EXPECT_NEAR(num / den, 0.9, 0.02);
    // Stationary variance of the colored output is driver / (1 - pole^2).
    EXPECT_NEAR(variance(u), 1.0 / (1.0 - 0.81), 0.3);
}

TEST(ArOne, DeterministicAndValidated) {
    EXPECT_EQ(sample_ar1(ArOneParams{0.5, 2.0, 3}, 100), sample_ar1(ArOneParams{0.5, 2.0, 3}, 100));
    EXPECT_THROW(sample_ar1(ArOneParams{1.0, 1.0, 3}, 10), ParameterError);
    EXPECT_THROW(sample_ar1(ArOneParams{0.5, 0.0, 3}, 10), ParameterError);
}

TEST(Recording, PeakNormalization) {
    const auto a = scratch("a.txt");
    write_samples(a, std::vector<double>{0.5, -1.0});
    EXPECT_EQ(load_recording(a), (std::vector<double>{0.5, -1.0}));
    const auto b = scratch("b.txt");
    write_samples(b, std::vector<double>{2.0, -4.0});
    EXPECT_EQ(load_recording(b), (std::vector<double>{0.5, -1.0}));
    EXPECT_EQ(load_recording(b, false), (std::vector<double>{2.0, -4.0}));
}

TEST(Recording, EmptyOrSilentFileIsAnError) {
    const auto e = scratch("empty.txt");
    write_samples(e, std::vector<double>{});
    EXPECT_THROW(load_recording(e), IngestionError);
    const auto z = scratch("zero.txt");
    write_samples(z, std::vector<double>{0.0, 0.0});
    EXPECT_THROW(load_recording(z), IngestionError);
}
