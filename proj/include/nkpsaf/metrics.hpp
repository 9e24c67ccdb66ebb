#pragma once

// Learning-curve metrics: NMSD, ANR / multichannel ANR, and cross-trial
// aggregation (mean of linear ratios, then dB).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "nkp.hpp"

namespace nkpsaf {

inline constexpr double kRatioFloor = 1e-15;  // -300 dB

inline double ratio_to_db(double ratio) { return 20.0 * std::log10(std::max(ratio, kRatioFloor)); }

inline double nmsd_ratio(std::span<const double> m0, std::span<const double> estimate) {
    return misalignment(m0, estimate);
}

inline double nmsd_db(std::span<const double> m0, std::span<const double> estimate) {
    return ratio_to_db(nmsd_ratio(m0, estimate));
}

// Exponentially smoothed |e| / |d|.
class AnrTracker {
public:
    explicit AnrTracker(double eta = 0.999) : eta_(eta) {
        if (!(eta > 0.0 && eta < 1.0))
            throw ParameterError("ANR smoothing factor must lie in (0, 1)");
    }

    // Feeds one sample pair and returns the current linear ratio.
    double push(double e, double d) {
        ze_ = eta_ * ze_ + (1.0 - eta_) * std::abs(e);
        zd_ = eta_ * zd_ + (1.0 - eta_) * std::abs(d);
        if (zd_ >= kRatioFloor)
            ratio_ = ze_ / zd_;
        return ratio_;
    }

    double ratio() const noexcept { return ratio_; }
    double db() const { return ratio_to_db(ratio_); }

private:
    double eta_;
    double ze_ = 0.0, zd_ = 0.0;
    double ratio_ = 1.0;
};

// Mean over error channels of the per-channel ANR ratio.
class MultiAnrTracker {
public:
    MultiAnrTracker(std::size_t channels, double eta = 0.999) : trackers_(channels, AnrTracker(eta)) {
        if (channels == 0)
            throw DimensionError("multichannel ANR needs at least one channel");
    }

    double push(std::span<const double> e, std::span<const double> d) {
        if (e.size() != trackers_.size() || d.size() != trackers_.size())
            throw DimensionError("multichannel ANR: channel count mismatch");
        double acc = 0.0;
        for (std::size_t c = 0; c < trackers_.size(); ++c)
            acc += trackers_[c].push(e[c], d[c]);
        ratio_ = acc / static_cast<double>(trackers_.size());
        return ratio_;
    }

    double ratio() const noexcept { return ratio_; }
    double db() const { return ratio_to_db(ratio_); }
    std::size_t channels() const noexcept { return trackers_.size(); }

private:
    std::vector<AnrTracker> trackers_;
    double ratio_ = 1.0;
};

// Linear-ratio curve of one trial.
struct TrialCurve {
    std::vector<double> ratio;
    bool divergent = false;
};

struct LearningCurve {
    std::vector<double> values_db;
    std::size_t record_stride = 1;
    std::size_t trial_count = 0;
    std::size_t divergent_trials = 0;

    double final_db() const { return values_db.empty() ? 0.0 : values_db.back(); }

    // Mean of the last `n` values in dB.
    double tail_mean_db(std::size_t n) const {
        if (values_db.empty())
            return 0.0;
        n = std::clamp<std::size_t>(n, 1, values_db.size());
        double acc = 0.0;
        for (std::size_t i = values_db.size() - n; i < values_db.size(); ++i)
            acc += values_db[i];
        return acc / static_cast<double>(n);
    }
};

inline LearningCurve aggregate_trials(std::span<const TrialCurve> trials, std::size_t stride = 1) {
    if (trials.empty())
        throw ParameterError("aggregate_trials: no trials");
    const std::size_t n = trials.front().ratio.size();
    LearningCurve out;
    out.record_stride = stride;
    out.trial_count = trials.size();
    std::vector<double> acc(n, 0.0);
    for (const auto& t : trials) {
        if (t.ratio.size() != n)
            throw DimensionError("aggregate_trials: trial curves differ in length");
        for (std::size_t i = 0; i < n; ++i)
            acc[i] += t.ratio[i];
        if (t.divergent)
            ++out.divergent_trials;
    }
    out.values_db.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.values_db[i] = ratio_to_db(acc[i] / static_cast<double>(trials.size()));
    return out;
}

inline std::string format_sig9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// CSV with header `index,value_db,divergent_trials`. The index is the
// sample index of each recorded point.
inline void write_curve_csv(const std::filesystem::path& path, const LearningCurve& c) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IngestionError("cannot write " + path.string());
    out << "index,value_db,divergent_trials\n";
    for (std::size_t i = 0; i < c.values_db.size(); ++i)
        out << i * c.record_stride << ',' << format_sig9(c.values_db[i]) << ',' << c.divergent_trials << '\n';
    if (!out)
        throw IngestionError("write failed: " + path.string());
}

} // namespace nkpsaf
