#pragma once

// Stochastic inputs and disturbances: symmetric alpha-stable noise via the
// Chambers-Mallows-Stuck transform, AR(1)-colored sequences, and ingestion
// of recorded noise.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

#include "errors.hpp"
#include "signal.hpp"

namespace nkpsaf {

// Characteristic function exp(-gamma |t|^alpha).
struct AlphaStableParams {
    double alpha = 2.0;
    double gamma = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 2.0))
            throw ParameterError("alpha-stable: alpha must lie in (0, 2]");
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw ParameterError("alpha-stable: gamma must be positive");
    }
};

struct ArOneParams {
    double pole = 0.9;
    double variance = 1.0; // of the Gaussian driver, before coloring
    std::uint64_t seed = 0;

    void validate() const {
        if (!(std::abs(pole) < 1.0))
            throw ParameterError("AR(1): |pole| must be < 1");
        if (!(variance > 0.0))
            throw ParameterError("AR(1): driver variance must be positive");
    }
};

// Derives an independent engine for a named stream of a trial seed.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

class AlphaStableSource {
public:
    explicit AlphaStableSource(const AlphaStableParams& p) : AlphaStableSource(p, std::mt19937_64(p.seed)) {}

    AlphaStableSource(const AlphaStableParams& p, std::mt19937_64 engine)
        : alpha_(p.alpha), scale_(0.0), engine_(std::move(engine)) {
        p.validate();
        scale_ = std::pow(p.gamma, 1.0 / p.alpha);
    }

    double operator()() {
        // V uniform on the open interval (-pi/2, pi/2), W ~ Exp(1).
        double u;
        do {
            u = unit_(engine_);
        } while (u == 0.0);
        const double v = (u - 0.5) * std::numbers::pi;
        double w;
        do {
            w = expo_(engine_);
        } while (w == 0.0);

        double x;
        if (alpha_ == 1.0) {
            x = std::tan(v);
        } else {
            const double a = alpha_;
            x = std::sin(a * v) / std::pow(std::cos(v), 1.0 / a)
                * std::pow(std::cos(v - a * v) / w, (1.0 - a) / a);
        }
        return scale_ * x;
    }

private:
    double alpha_;
    double scale_;
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    std::exponential_distribution<double> expo_{1.0};
};

class GaussianSource {
public:
    GaussianSource(double variance, std::mt19937_64 engine)
        : engine_(std::move(engine)), dist_(0.0, std::sqrt(variance)) {
        if (!(variance > 0.0))
            throw ParameterError("Gaussian source: variance must be positive");
    }

    double operator()() { return dist_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_;
};

inline std::vector<double> sample_alpha_stable(const AlphaStableParams& params, std::size_t n) {
    AlphaStableSource src(params);
    std::vector<double> out(n);
    for (auto& v : out)
        v = src();
    return out;
}

// u_k = pole * u_{k-1} + w_k with w drawn from `driver`.
template <class Driver>
std::vector<double> sample_ar1(double pole, std::size_t n, Driver&& driver) {
    if (!(std::abs(pole) < 1.0))
        throw ParameterError("AR(1): |pole| must be < 1");
    std::vector<double> out(n);
    double prev = 0.0;
    for (auto& u : out) {
        u = pole * prev + driver();
        prev = u;
    }
    return out;
}

// Gaussian-driven AR(1).
inline std::vector<double> sample_ar1(const ArOneParams& params, std::size_t n) {
    params.validate();
    GaussianSource g(params.variance, std::mt19937_64(params.seed));
    return sample_ar1(params.pole, n, g);
}

// Loads a recording and scales it to unit peak magnitude unless told not to.
inline std::vector<double> load_recording(const std::filesystem::path& path, bool normalize = true) {
    auto x = read_samples(path);
    if (x.empty())
        throw IngestionError("recording is empty: " + path.string());
    if (normalize) {
        double peak = 0.0;
        for (double v : x)
            peak = std::max(peak, std::abs(v));
        if (peak == 0.0)
            throw IngestionError("recording is all zeros: " + path.string());
        for (auto& v : x)
            v /= peak;
    }
    return x;
}

} // namespace nkpsaf
