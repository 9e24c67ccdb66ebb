#pragma once

// System identification / echo cancellation trial: an unknown response m0
// driven by an input sequence, observed in additive disturbance, tracked by
// one adaptive filter. NMSD is recorded at every update instant.

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "adapt.hpp"
#include "errors.hpp"
#include "filterbank.hpp"
#include "metrics.hpp"
#include "signal.hpp"

namespace nkpsaf {

struct IdentifyTrial {
    std::span<const double> m0;
    std::span<const double> input;
    std::span<const double> noise;  // empty for a noise-free observation
    long flip_at = -1;              // sample index where m0 becomes -m0; < 0 disables
};

struct IdentifyResult {
    TrialCurve curve;
    std::vector<double> final_weights;
    long switch_update = -1;
};

// Called after every update instant with the update index and the filter.
using UpdateObserver = std::function<void(std::size_t, const AdaptiveFilter&)>;

inline IdentifyResult run_identification(Algorithm algo, const AlgoConfig& cfg, const AnalysisBank& bank,
                                         const IdentifyTrial& trial, const UpdateObserver& observe = {}) {
    const std::size_t D = cfg.D();
    if (trial.m0.size() != D)
        throw DimensionError("unknown response has " + std::to_string(trial.m0.size()) + " taps, filter has D1*D2 = "
                             + std::to_string(D));
    if (!trial.noise.empty() && trial.noise.size() < trial.input.size())
        throw DimensionError("disturbance sequence shorter than input");
    if (bank.subbands() != cfg.N || bank.taps() != cfg.L)
        throw DimensionError("analysis bank does not match N and L");

    AdaptiveFilter filter(algo, cfg);
    std::vector<double> m0(trial.m0.begin(), trial.m0.end());
    TapDelayLine xline(D);
    TapDelayLine dwin(cfg.L);
    SubbandAnalyzer analyzer(bank, D);

    SubbandFrame frame;
    frame.x.resize(cfg.N);
    frame.d.resize(cfg.N);

    IdentifyResult res;
    auto& curve = res.curve;
    curve.ratio.reserve(trial.input.size() / cfg.r + 1);
    double last_ratio = 1.0;
    std::size_t update_index = 0;

    for (std::size_t k = 0; k < trial.input.size(); ++k) {
        if (trial.flip_at >= 0 && k == static_cast<std::size_t>(trial.flip_at))
            for (auto& v : m0)
                v = -v;
        const double x = trial.input[k];
        xline.push(x);
        double d = dot(m0, xline.view());
        if (!trial.noise.empty())
            d += trial.noise[k];

        const bool instant = (k % cfg.r == 0);
        if (curve.divergent) {
            if (instant)
                curve.ratio.push_back(last_ratio);
            continue;
        }

        if (algo == Algorithm::nlms) {
            const double e = d - dot(filter.weights(), xline.view());
            filter.update_fullband(xline.view(), e);
        } else {
            analyzer.push(x);
            dwin.push_unchecked(d);
        }

        if (!instant)
            continue;

        if (algo != Algorithm::nlms) {
            for (std::size_t j = 0; j < cfg.N; ++j)
                frame.x[j] = analyzer.subband(j);
            const auto dsub = analyze_scalar_window(dwin.view(), bank);
            std::copy(dsub.begin(), dsub.end(), frame.d.begin());
            const double metric = algo == Algorithm::tnkp_fonspn ? nmsd_db(m0, filter.weights()) : 0.0;
            filter.step(frame, metric);
        }

        if (!filter.finite()) {
            curve.divergent = true;
            curve.ratio.push_back(last_ratio);
            continue;
        }
        last_ratio = nmsd_ratio(m0, filter.weights());
        curve.ratio.push_back(last_ratio);
        if (observe)
            observe(update_index, filter);
        ++update_index;
    }
    res.final_weights.assign(filter.weights().begin(), filter.weights().end());
    res.switch_update = filter.tnkp().switch_update;
    return res;
}

} // namespace nkpsaf
