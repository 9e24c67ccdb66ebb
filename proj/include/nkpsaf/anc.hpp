#pragma once

// Filtered-x active noise control: single-channel loop and the V x C
// multichannel extension. The residual always passes through the true
// secondary path; the reference is prefiltered by the modeled one.

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adapt.hpp"
#include "errors.hpp"
#include "filterbank.hpp"
#include "metrics.hpp"
#include "signal.hpp"

namespace nkpsaf {

// Controller law: plain FxLMS or one of the subband laws on filtered inputs.
struct AncAlgorithm {
    bool fxlms = false;
    Algorithm law = Algorithm::nspn;
};

// Accepts fxlms, fxnsaf, fxnspn, fxfonspn, nkp-fxnspn, nkp-fxfonspn,
// tnkp-fxfonspn; the multichannel spellings with "mfx" are equivalent.
inline AncAlgorithm parse_anc_algorithm(std::string_view name) {
    std::string n(name);
    if (auto pos = n.find("mfx"); pos != std::string::npos)
        n.erase(pos, 1);
    if (n == "fxlms" || n == "cfxlms")
        return {true, Algorithm::nlms};
    const auto pos = n.find("fx");
    if (pos == std::string::npos || (pos != 0 && n[pos - 1] != '-'))
        throw ParameterError("unknown ANC algorithm '" + std::string(name)
                             + "' (expected fxlms | fxnsaf | fxnspn | fxfonspn | nkp-fxnspn | nkp-fxfonspn | tnkp-fxfonspn)");
    n.erase(pos, 2);
    const Algorithm a = parse_algorithm(n);
    if (a == Algorithm::nlms)
        throw ParameterError("unknown ANC algorithm '" + std::string(name) + "'");
    return {false, a};
}

struct AcousticScenario {
    ImpulseResponse primary;
    ImpulseResponse secondary;
    ImpulseResponse secondary_model;
};

// One sample of the single-channel loop.
struct AncSample {
    double d = 0.0, y = 0.0, e = 0.0;
    double ybar = 0.0;  // controller output before the secondary path
    double xf = 0.0;    // reference filtered by the secondary-path model
    bool updated = false;
};

class AncLoop {
public:
    AncLoop(AncAlgorithm algo, const AlgoConfig& cfg, const AnalysisBank& bank, AcousticScenario scenario,
            double eta = 0.999)
        : algo_(algo), cfg_(cfg), bank_(&bank), sc_(std::move(scenario)),
          filter_(algo.fxlms ? Algorithm::nspn : algo.law, cfg),
          xline_(std::max({cfg.D(), sc_.primary.length(), sc_.secondary_model.length()})),
          yline_(sc_.secondary.length()), ewin_(cfg.L), xfline_(cfg.D()), analyzer_(bank, cfg.D()),
          anr_(eta) {
        if (bank.subbands() != cfg.N || bank.taps() != cfg.L)
            throw DimensionError("analysis bank does not match N and L");
        if (algo_.fxlms)
            lms_.assign(cfg.D(), 0.0);
        frame_.x.resize(cfg.N);
    }

    // Advances one sample with reference x and additive disturbance at the
    // error microphone.
    AncSample step(double x, double disturbance = 0.0) {
        AncSample s;
        xline_.push(x);
        s.d = fir_filter(sc_.primary, xline_) + disturbance;
        s.ybar = dot(weights(), xline_.view(cfg_.D()));
        yline_.push_unchecked(s.ybar);
        s.y = fir_filter(sc_.secondary, yline_);
        s.e = s.d - s.y;
        ewin_.push_unchecked(s.e);
        const double xf = fir_filter(sc_.secondary_model, xline_);
        s.xf = xf;
        anr_.push(s.e, s.d);

        if (divergent_) {
            ++k_;
            return s;
        }
        if (algo_.fxlms) {
            xfline_.push_unchecked(xf);
            const double coef = cfg_.mu * s.e;
            const auto v = xfline_.view();
            for (std::size_t i = 0; i < lms_.size(); ++i)
                lms_[i] += coef * v[i];
            s.updated = true;
            if (!all_finite(lms_))
                divergent_ = true;
        } else {
            analyzer_.push(xf);
            if (k_ % cfg_.r == 0) {
                for (std::size_t j = 0; j < cfg_.N; ++j)
                    frame_.x[j] = analyzer_.subband(j);
                frame_.e = analyze_scalar_window(ewin_.view(), *bank_);
                filter_.update(frame_, anr_.db());
                s.updated = true;
                if (!filter_.finite())
                    divergent_ = true;
            }
        }
        ++k_;
        return s;
    }

    std::span<const double> weights() const { return algo_.fxlms ? std::span<const double>(lms_) : filter_.weights(); }
    const AdaptiveFilter& filter() const noexcept { return filter_; }
    const AnrTracker& anr() const noexcept { return anr_; }
    bool divergent() const noexcept { return divergent_; }
    std::size_t samples() const noexcept { return k_; }

private:
    AncAlgorithm algo_;
    AlgoConfig cfg_;
    const AnalysisBank* bank_;
    AcousticScenario sc_;
    AdaptiveFilter filter_;
    std::vector<double> lms_;
    TapDelayLine xline_, yline_, ewin_, xfline_;
    SubbandAnalyzer analyzer_;
    SubbandFrame frame_;
    AnrTracker anr_;
    std::size_t k_ = 0;
    bool divergent_ = false;
};

// ---------------------------------------------------------------------------
// Multichannel

// V loudspeakers, C error microphones, one shared reference.
struct MultiScenario {
    std::vector<ImpulseResponse> primary;                       // C
    std::vector<std::vector<ImpulseResponse>> secondary;        // [v][c]
    std::vector<std::vector<ImpulseResponse>> secondary_model;  // [v][c]

    std::size_t speakers() const noexcept { return secondary.size(); }
    std::size_t mics() const noexcept { return primary.size(); }

    void validate() const {
        if (primary.empty() || secondary.empty())
            throw DimensionError("multichannel scenario needs at least one speaker and one microphone");
        if (secondary_model.size() != secondary.size())
            throw DimensionError("secondary model has a different speaker count than the true paths");
        for (std::size_t v = 0; v < secondary.size(); ++v)
            if (secondary[v].size() != primary.size() || secondary_model[v].size() != primary.size())
                throw DimensionError("secondary paths must form a V x C matrix matching the microphone count");
    }
};

// The five-speaker, five-microphone path set with S_vc = z^-3 - a_vc z^-4
// and three-tap primaries starting at z^-6.
inline MultiScenario five_channel_paths() {
    static constexpr double a[5][5] = {
        // rows: microphone c, columns: speaker v
        {1.4, 1.4, 1.6, 1.5, 1.3},
        {1.5, 1.5, 1.4, 1.3, 1.4},
        {1.3, 1.3, 1.5, 1.6, 1.5},
        {1.4, 1.4, 1.6, 1.5, 1.6},
        {1.5, 1.5, 1.4, 1.5, 1.4},
    };
    static constexpr double p[5][3] = {
        {1.5, -0.2, 0.3}, {1.4, -0.4, 0.1}, {1.6, -0.3, 0.2}, {1.4, -0.4, 0.1}, {1.5, -0.2, 0.3},
    };
    MultiScenario s;
    for (const auto& row : p)
        s.primary.emplace_back(std::vector<double>{0, 0, 0, 0, 0, 0, row[0], row[1], row[2]});
    s.secondary.resize(5);
    for (std::size_t v = 0; v < 5; ++v)
        for (std::size_t c = 0; c < 5; ++c)
            s.secondary[v].emplace_back(std::vector<double>{0, 0, 0, 1.0, -a[c][v]});
    s.secondary_model = s.secondary;
    return s;
}

class MultiAncLoop {
public:
    MultiAncLoop(AncAlgorithm algo, const AlgoConfig& cfg, const AnalysisBank& bank, MultiScenario scenario,
                 double eta = 0.999)
        : algo_(algo), cfg_(cfg), bank_(&bank), sc_((scenario.validate(), std::move(scenario))),
          xline_(reference_capacity(cfg, sc_)), anr_(sc_.mics(), eta) {
        if (bank.subbands() != cfg.N || bank.taps() != cfg.L)
            throw DimensionError("analysis bank does not match N and L");
        const std::size_t V = sc_.speakers(), C = sc_.mics();
        for (std::size_t v = 0; v < V; ++v) {
            std::size_t cap = 1;
            for (std::size_t c = 0; c < C; ++c)
                cap = std::max(cap, sc_.secondary[v][c].length());
            ylines_.emplace_back(cap);
            filters_.emplace_back(algo.fxlms ? Algorithm::nspn : algo.law, cfg);
            if (algo.fxlms)
                lms_.emplace_back(cfg.D(), 0.0);
            for (std::size_t c = 0; c < C; ++c) {
                if (algo.fxlms)
                    xflines_.emplace_back(cfg.D());
                else
                    analyzers_.emplace_back(bank, cfg.D());
            }
        }
        for (std::size_t c = 0; c < C; ++c)
            ewins_.emplace_back(cfg.L);
        d_.resize(C);
        e_.resize(C);
        esub_.resize(C);
        frame_.x.resize(C * cfg.N);
        frame_.e.resize(C * cfg.N);
    }

    // Advances one sample; returns the residual at every microphone.
    std::span<const double> step(double x, std::span<const double> disturbance = {}) {
        const std::size_t V = sc_.speakers(), C = sc_.mics();
        xline_.push(x);
        for (std::size_t v = 0; v < V; ++v)
            ylines_[v].push_unchecked(dot(weights(v), xline_.view(cfg_.D())));
        for (std::size_t c = 0; c < C; ++c) {
            d_[c] = fir_filter(sc_.primary[c], xline_) + (disturbance.empty() ? 0.0 : disturbance[c]);
            double y = 0.0;
            for (std::size_t v = 0; v < V; ++v)
                y += fir_filter(sc_.secondary[v][c], ylines_[v]);
            e_[c] = d_[c] - y;
            ewins_[c].push_unchecked(e_[c]);
        }
        anr_.push(e_, d_);

        if (divergent_) {
            ++k_;
            return e_;
        }
        for (std::size_t v = 0; v < V; ++v)
            for (std::size_t c = 0; c < C; ++c) {
                const double xf = fir_filter(sc_.secondary_model[v][c], xline_);
                if (algo_.fxlms)
                    xflines_[v * C + c].push_unchecked(xf);
                else
                    analyzers_[v * C + c].push(xf);
            }

        if (algo_.fxlms) {
            for (std::size_t v = 0; v < V; ++v) {
                auto& w = lms_[v];
                for (std::size_t c = 0; c < C; ++c) {
                    const double coef = cfg_.mu * e_[c];
                    const auto xv = xflines_[v * C + c].view();
                    for (std::size_t i = 0; i < w.size(); ++i)
                        w[i] += coef * xv[i];
                }
                if (!all_finite(w))
                    divergent_ = true;
            }
        } else if (k_ % cfg_.r == 0) {
            for (std::size_t c = 0; c < C; ++c)
                esub_[c] = analyze_scalar_window(ewins_[c].view(), *bank_);
            const double metric = anr_.db();
            for (std::size_t v = 0; v < V; ++v) {
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t j = 0; j < cfg_.N; ++j) {
                        frame_.x[c * cfg_.N + j] = analyzers_[v * C + c].subband(j);
                        frame_.e[c * cfg_.N + j] = esub_[c][j];
                    }
                filters_[v].update(frame_, metric);
                if (!filters_[v].finite())
                    divergent_ = true;
            }
        }
        ++k_;
        return e_;
    }

    std::span<const double> weights(std::size_t v) const {
        return algo_.fxlms ? std::span<const double>(lms_[v]) : filters_[v].weights();
    }
    std::span<const double> desired() const noexcept { return d_; }
    const AdaptiveFilter& filter(std::size_t v) const { return filters_[v]; }
    const MultiAnrTracker& anr() const noexcept { return anr_; }
    bool divergent() const noexcept { return divergent_; }
    std::size_t speakers() const noexcept { return sc_.speakers(); }
    std::size_t mics() const noexcept { return sc_.mics(); }

private:
    static std::size_t reference_capacity(const AlgoConfig& cfg, const MultiScenario& s) {
        std::size_t cap = cfg.D();
        for (const auto& p : s.primary)
            cap = std::max(cap, p.length());
        for (const auto& row : s.secondary_model)
            for (const auto& h : row)
                cap = std::max(cap, h.length());
        return cap;
    }

    AncAlgorithm algo_;
    AlgoConfig cfg_;
    const AnalysisBank* bank_;
    MultiScenario sc_;
    TapDelayLine xline_;
    std::vector<TapDelayLine> ylines_, ewins_, xflines_;
    std::vector<SubbandAnalyzer> analyzers_;
    std::vector<AdaptiveFilter> filters_;
    std::vector<std::vector<double>> lms_;
    std::vector<double> d_, e_;
    std::vector<std::vector<double>> esub_;
    SubbandFrame frame_;
    MultiAnrTracker anr_;
    std::size_t k_ = 0;
    bool divergent_ = false;
};

} // namespace nkpsaf
