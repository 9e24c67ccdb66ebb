#pragma once

// Seeded Monte Carlo orchestration: scenario assembly from a config,
// parallel trials, ordered aggregation, CSV and manifest persistence, and
// threshold calibration for the switching engines.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "adapt.hpp"
#include "anc.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "filterbank.hpp"
#include "identify.hpp"
#include "metrics.hpp"
#include "noise.hpp"
#include "signal.hpp"

namespace nkpsaf {

// ---------------------------------------------------------------------------
// Scenario assembly

// "[a, b, c]" (commas or spaces) or a path to a .txt/.f64 response file.
inline std::vector<double> parse_taps(const std::string& field, const std::string& spec) {
    if (spec.empty())
        throw ConfigError(field, "empty impulse response");
    if (spec.front() != '[') {
        try {
            const auto ir = load_impulse_response(spec);
            return {ir.taps().begin(), ir.taps().end()};
        } catch (const std::exception& e) {
            throw ConfigError(field, e.what());
        }
    }
    if (spec.back() != ']')
        throw ConfigError(field, "tap list must end with ']'");
    std::string body = spec.substr(1, spec.size() - 2);
    std::replace(body.begin(), body.end(), ',', ' ');
    std::istringstream ss(body);
    std::vector<double> taps;
    std::string tok;
    while (ss >> tok)
        taps.push_back(detail::parse_double(field, tok));
    if (taps.empty())
        throw ConfigError(field, "empty tap list");
    if (!all_finite(taps))
        throw ConfigError(field, "taps must be finite");
    return taps;
}

inline std::vector<std::string> split_bar(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto bar = s.find('|', start);
        out.push_back(detail::trim(s.substr(start, bar == std::string::npos ? std::string::npos : bar - start)));
        if (bar == std::string::npos)
            break;
        start = bar + 1;
    }
    return out;
}

// Unit-norm D1*D2 response of exact Kronecker rank `rank`: the leading
// component carries 1 - tail^2 of the energy and the remaining components
// share tail^2 equally. Factors are orthonormal random vectors under an
// exponential decay envelope, so the response looks like a decaying IR and
// its singular values are known exactly.
inline std::vector<double> make_lowrank_response(std::size_t d1, std::size_t d2, std::size_t rank, double tail,
                                                 std::uint64_t seed) {
    if (rank == 0 || rank > std::min(d1, d2))
        throw DimensionError("low-rank response: rank must lie in [1, min(D1, D2)]");
    std::mt19937_64 eng = make_stream(seed, 0x6d30);
    std::normal_distribution<double> n01;
    const auto basis = [&](std::size_t len) {
        std::vector<std::vector<double>> vs;
        const double tau = std::max(1.0, static_cast<double>(len) / 3.0);
        while (vs.size() < rank) {
            std::vector<double> v(len);
            for (std::size_t i = 0; i < len; ++i)
                v[i] = n01(eng) * std::exp(-static_cast<double>(i) / tau);
            for (const auto& u : vs) {
                const double c = dot(u, v);
                for (std::size_t i = 0; i < len; ++i)
                    v[i] -= c * u[i];
            }
            const double nv = norm2(v);
            if (nv < 1e-8)
                continue;
            for (auto& x : v)
                x /= nv;
            vs.push_back(std::move(v));
        }
        return vs;
    };
    const auto a = basis(d1);
    const auto b = basis(d2);
    std::vector<double> sv(rank, 1.0);
    if (rank > 1) {
        sv[0] = std::sqrt(1.0 - tail * tail);
        for (std::size_t q = 1; q < rank; ++q)
            sv[q] = tail / std::sqrt(static_cast<double>(rank - 1));
    }
    KronFactors f(d1, d2, rank);
    for (std::size_t q = 0; q < rank; ++q) {
        for (std::size_t i = 0; i < d1; ++i)
            f.left(q)[i] = sv[q] * a[q][i];
        for (std::size_t i = 0; i < d2; ++i)
            f.right(q)[i] = b[q][i];
    }
    return kron_synthesize(f);
}

inline std::vector<double> resolve_m0(const ExperimentConfig& c) {
    const auto& a = c.algo;
    std::vector<double> m0;
    if (c.m0.rfind("lowrank:", 0) == 0) {
        std::size_t rank = 0;
        try {
            rank = detail::parse_int<std::size_t>("m0", c.m0.substr(8));
            m0 = make_lowrank_response(a.D1, a.D2, rank, c.m0_tail, c.m0_seed);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("m0", e.what());
        }
    } else {
        m0 = parse_taps("m0", c.m0);
    }
    if (m0.size() != a.D())
        throw ConfigError("m0", "has " + std::to_string(m0.size()) + " taps but D1*D2 = " + std::to_string(a.D()));
    if (norm2(m0) == 0.0)
        throw ConfigError("m0", "response is identically zero");
    return m0;
}

inline AcousticScenario resolve_acoustics(const ExperimentConfig& c) {
    AcousticScenario s;
    s.primary = ImpulseResponse(parse_taps("primary", c.primary));
    s.secondary = ImpulseResponse(parse_taps("secondary", c.secondary));
    s.secondary_model = ImpulseResponse(
        parse_taps(c.secondary_model.empty() ? "secondary" : "secondary_model",
                   c.secondary_model.empty() ? c.secondary : c.secondary_model));
    return s;
}

inline MultiScenario resolve_multi(const ExperimentConfig& c) {
    if (c.paths == "five-channel")
        return five_channel_paths();
    if (c.paths != "explicit")
        throw ConfigError("paths", "expected five-channel or explicit, got '" + c.paths + "'");
    MultiScenario s;
    for (const auto& p : split_bar(c.primary))
        s.primary.emplace_back(parse_taps("primary", p));
    const std::size_t C = s.primary.size();
    const auto load_matrix = [&](const char* field, const std::string& spec) {
        const auto items = split_bar(spec);
        if (c.speakers == 0 || items.size() != c.speakers * C)
            throw ConfigError(field, "expected speakers * microphones = " + std::to_string(c.speakers) + " * "
                                         + std::to_string(C) + " '|'-separated responses, got "
                                         + std::to_string(items.size()));
        std::vector<std::vector<ImpulseResponse>> m(c.speakers);
        for (std::size_t v = 0; v < c.speakers; ++v)
            for (std::size_t ch = 0; ch < C; ++ch)
                m[v].emplace_back(parse_taps(field, items[v * C + ch]));
        return m;
    };
    s.secondary = load_matrix("secondary", c.secondary);
    s.secondary_model =
        c.secondary_model.empty() ? s.secondary : load_matrix("secondary_model", c.secondary_model);
    return s;
}

// ---------------------------------------------------------------------------
// Validation that depends on the algorithm family

inline bool is_anc_scenario(const ExperimentConfig& c) { return c.scenario == "anc" || c.scenario == "anc-multi"; }

// Law used by the subband controller (for ANC, the law behind the "fx" name).
inline std::optional<Algorithm> subband_law(const ExperimentConfig& c) {
    try {
        if (is_anc_scenario(c)) {
            const auto a = parse_anc_algorithm(c.algorithm);
            return a.fxlms ? std::nullopt : std::optional<Algorithm>(a.law);
        }
        return parse_algorithm(c.algorithm);
    } catch (const std::exception& e) {
        throw ConfigError("algorithm", e.what());
    }
}

inline bool is_fractional(Algorithm a) {
    return a == Algorithm::fonspn || a == Algorithm::nkp_fonspn || a == Algorithm::tnkp_fonspn;
}

// Characteristic exponent of the impulsive processes in the run, if any.
inline std::optional<double> governing_alpha(const ExperimentConfig& c) {
    std::optional<double> alpha;
    if (c.noise_gamma > 0.0)
        alpha = c.noise_alpha;
    if (is_anc_scenario(c) && c.input == "cauchy-ar1")
        alpha = std::min(alpha.value_or(2.0), 1.0);
    return alpha;
}

inline void check_beta_bound(const ExperimentConfig& c) {
    const auto law = subband_law(c);
    if (!law || !is_fractional(*law) || c.allow_unstable_beta)
        return;
    const auto alpha = governing_alpha(c);
    if (!alpha)
        return;
    const auto bound = beta_bound(c.algo.p, *alpha);
    if (!bound.contains(c.algo.beta)) {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "%g lies outside the stable interval %s for p=%g, alpha=%g (pass --allow-unstable-beta to run anyway)",
                      c.algo.beta, bound.str().c_str(), c.algo.p, *alpha);
        throw ConfigError("beta", buf);
    }
}

inline double read_rho_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("rho_file", "cannot open " + path.string());
    std::string tok;
    in >> tok;
    return detail::parse_double("rho_file", tok);
}

// Threshold for the switching engines; other engines ignore it.
inline double resolve_rho(const ExperimentConfig& c) {
    if (c.rho_set)
        return c.algo.rho;
    if (!c.rho_file.empty())
        return read_rho_file(c.rho_file);
    const auto law = subband_law(c);
    if (law && *law == Algorithm::tnkp_fonspn)
        throw ConfigError("rho", "the switching engine needs a threshold: set rho or rho_file (see calibrate-rho)");
    return c.algo.rho;
}

// ---------------------------------------------------------------------------
// Trial inputs

inline std::vector<double> make_input(const ExperimentConfig& c, std::uint64_t trial_seed,
                                      const std::vector<double>* recording) {
    if (c.input == "file") {
        const std::size_t n = std::min(c.samples, recording->size());
        return {recording->begin(), recording->begin() + static_cast<std::ptrdiff_t>(n)};
    }
    if (c.input == "cauchy-ar1") {
        AlphaStableSource src({1.0, c.input_gamma, trial_seed}, make_stream(trial_seed, 1));
        return sample_ar1(c.input_pole, c.samples, src);
    }
    GaussianSource src(c.input_variance, make_stream(trial_seed, 1));
    return sample_ar1(c.input_pole, c.samples, src);
}

inline std::vector<double> make_disturbance(const ExperimentConfig& c, std::uint64_t trial_seed,
                                            std::uint32_t channel, std::size_t n) {
    if (c.noise_gamma == 0.0)
        return {};
    AlphaStableSource src({c.noise_alpha, c.noise_gamma, trial_seed}, make_stream(trial_seed, 2 + channel));
    std::vector<double> out(n);
    for (auto& v : out)
        v = src();
    return out;
}

// ---------------------------------------------------------------------------
// Running

struct TrialRecord {
    TrialCurve curve;
    std::uint64_t seed = 0;
    long switch_update = -1;
};

struct ExperimentResult {
    LearningCurve curve;
    std::vector<TrialRecord> trials;
    double rho = -std::numeric_limits<double>::infinity();
    double wall_seconds = 0.0;

    bool all_divergent() const {
        return std::all_of(trials.begin(), trials.end(), [](const TrialRecord& t) { return t.curve.divergent; });
    }
};

namespace detail {

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// failure in trial order.
template <class Fn>
void parallel_trials(std::size_t n, std::size_t jobs, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t t = std::min(jobs, n);
    if (t <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < t; ++k)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

inline TrialRecord run_anc_trial(const ExperimentConfig& c, const AlgoConfig& a, const AnalysisBank& bank,
                                 const AcousticScenario& sc, std::span<const double> input,
                                 std::span<const double> noise) {
    AncLoop loop(parse_anc_algorithm(c.algorithm), a, bank, sc, c.anr_eta);
    TrialRecord rec;
    auto& curve = rec.curve;
    curve.ratio.reserve(input.size());
    double last = 1.0;
    for (std::size_t k = 0; k < input.size(); ++k) {
        if (curve.divergent) {
            curve.ratio.push_back(last);
            continue;
        }
        loop.step(input[k], noise.empty() ? 0.0 : noise[k]);
        last = loop.anr().ratio();
        curve.ratio.push_back(last);
        if (loop.divergent())
            curve.divergent = true;
    }
    rec.switch_update = loop.filter().tnkp().switch_update;
    return rec;
}

inline TrialRecord run_multi_trial(const ExperimentConfig& c, const AlgoConfig& a, const AnalysisBank& bank,
                                   const MultiScenario& sc, std::span<const double> input,
                                   const std::vector<std::vector<double>>& noise) {
    MultiAncLoop loop(parse_anc_algorithm(c.algorithm), a, bank, sc, c.anr_eta);
    TrialRecord rec;
    auto& curve = rec.curve;
    curve.ratio.reserve(input.size());
    std::vector<double> dist(sc.mics(), 0.0);
    double last = 1.0;
    for (std::size_t k = 0; k < input.size(); ++k) {
        if (curve.divergent) {
            curve.ratio.push_back(last);
            continue;
        }
        for (std::size_t ch = 0; ch < dist.size(); ++ch)
            dist[ch] = noise.empty() ? 0.0 : noise[ch][k];
        loop.step(input[k], dist);
        last = loop.anr().ratio();
        curve.ratio.push_back(last);
        if (loop.divergent())
            curve.divergent = true;
    }
    rec.switch_update = loop.filter(0).tnkp().switch_update;
    return rec;
}

} // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    validate_config(c);
    subband_law(c);
    check_beta_bound(c);

    AlgoConfig a = c.algo;
    a.rho = resolve_rho(c);
    AnalysisBank bank;
    try {
        bank = design_bank(a.N, a.L);
    } catch (const std::exception& e) {
        throw ConfigError("L", e.what());
    }

    std::vector<double> recording;
    if (c.input == "file") {
        try {
            recording = load_recording(c.input_file, c.normalize);
        } catch (const std::exception& e) {
            throw ConfigError("input_file", e.what());
        }
    }

    ExperimentResult res;
    res.rho = a.rho;
    res.trials.resize(c.trials);
    std::size_t stride = 1;

    if (c.scenario == "identify" || c.scenario == "aec") {
        const auto m0 = resolve_m0(c);
        const Algorithm algo = parse_algorithm(c.algorithm);
        stride = a.r;
        detail::parallel_trials(c.trials, c.jobs, [&](std::size_t i) {
            const std::uint64_t s = c.seed + i;
            const auto x = make_input(c, s, &recording);
            const auto v = make_disturbance(c, s, 0, x.size());
            IdentifyTrial t{m0, x, v, c.flip_at};
            auto r = run_identification(algo, a, bank, t);
            res.trials[i].curve = std::move(r.curve);
            res.trials[i].seed = s;
            res.trials[i].switch_update = r.switch_update;
        });
    } else if (c.scenario == "anc") {
        const auto sc = resolve_acoustics(c);
        detail::parallel_trials(c.trials, c.jobs, [&](std::size_t i) {
            const std::uint64_t s = c.seed + i;
            const auto x = make_input(c, s, &recording);
            const auto v = make_disturbance(c, s, 0, x.size());
            res.trials[i] = detail::run_anc_trial(c, a, bank, sc, x, v);
            res.trials[i].seed = s;
        });
    } else {
        const auto sc = resolve_multi(c);
        detail::parallel_trials(c.trials, c.jobs, [&](std::size_t i) {
            const std::uint64_t s = c.seed + i;
            const auto x = make_input(c, s, &recording);
            std::vector<std::vector<double>> v;
            if (c.noise_gamma > 0.0)
                for (std::size_t ch = 0; ch < sc.mics(); ++ch)
                    v.push_back(make_disturbance(c, s, static_cast<std::uint32_t>(ch), x.size()));
            res.trials[i] = detail::run_multi_trial(c, a, bank, sc, x, v);
            res.trials[i].seed = s;
        });
    }

    std::vector<TrialCurve> curves;
    curves.reserve(res.trials.size());
    for (const auto& t : res.trials)
        curves.push_back(t.curve);
    res.curve = aggregate_trials(curves, stride);
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

// ---------------------------------------------------------------------------
// Calibration

// The factored engine whose steady state sets the switch threshold.
inline std::string calibration_algorithm(const ExperimentConfig& c) {
    const std::string& n = c.algorithm;
    if (n.rfind("tnkp-", 0) == 0)
        return n.substr(1);
    if (n.rfind("nkp-", 0) == 0)
        return n;
    throw ConfigError("algorithm", "calibration needs a Kronecker-factored engine, got '" + n + "'");
}

struct CalibrationResult {
    ExperimentResult run;
    double rho = 0.0;
    std::size_t window_used = 0;
    std::string algorithm;
};

inline CalibrationResult run_calibration(const ExperimentConfig& c) {
    ExperimentConfig k = c;
    k.algorithm = calibration_algorithm(c);
    k.rho_set = false;
    k.rho_file.clear();
    CalibrationResult out;
    out.algorithm = k.algorithm;
    out.run = run_experiment(k);
    if (out.run.curve.divergent_trials > 0)
        throw ParameterError("calibration run diverged in " + std::to_string(out.run.curve.divergent_trials)
                             + " of " + std::to_string(c.trials) + " trials");
    const auto& v = out.run.curve.values_db;
    out.window_used = std::max<std::size_t>(1, std::min(c.calib_window, v.size() / 2));
    out.rho = calibrate_rho(v, c.calib_window);
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
    const auto& a = c.algo;
    nlohmann::ordered_json j;
    j["scenario"] = c.scenario;
    j["algorithm"] = c.algorithm;
    j["mu"] = a.mu;
    j["mu_b"] = a.mu_b;
    j["p"] = a.p;
    j["beta"] = a.beta;
    j["Q"] = a.Q;
    j["D1"] = a.D1;
    j["D2"] = a.D2;
    j["N"] = a.N;
    j["L"] = a.L;
    j["r"] = a.r;
    j["iota"] = a.iota;
    j["init"] = a.init == InitMethod::one ? "one" : "two";
    j["eps"] = a.eps;
    if (c.rho_set)
        j["rho"] = std::isfinite(a.rho) ? nlohmann::ordered_json(a.rho) : nlohmann::ordered_json(a.rho > 0 ? "inf" : "-inf");
    else
        j["rho"] = nullptr;
    j["rho_file"] = c.rho_file;
    j["calib_window"] = c.calib_window;
    j["input"] = c.input;
    j["input_pole"] = c.input_pole;
    j["input_variance"] = c.input_variance;
    j["input_gamma"] = c.input_gamma;
    j["input_file"] = c.input_file;
    j["normalize"] = c.normalize;
    j["noise_alpha"] = c.noise_alpha;
    j["noise_gamma"] = c.noise_gamma;
    j["m0"] = c.m0;
    j["m0_seed"] = c.m0_seed;
    j["m0_tail"] = c.m0_tail;
    j["primary"] = c.primary;
    j["secondary"] = c.secondary;
    j["secondary_model"] = c.secondary_model.empty() ? c.secondary : c.secondary_model;
    j["paths"] = c.paths;
    j["speakers"] = c.speakers;
    j["anr_eta"] = c.anr_eta;
    j["flip_at"] = c.flip_at;
    j["trials"] = c.trials;
    j["samples"] = c.samples;
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    j["allow_unstable_beta"] = c.allow_unstable_beta;
    return j;
}

inline void write_text_atomically(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw IngestionError("cannot write " + tmp.string());
        out << text;
        if (!out)
            throw IngestionError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::filesystem::path manifest_path(const std::filesystem::path& out) {
    auto p = out;
    p += ".manifest.json";
    return p;
}

inline std::filesystem::path rho_sidecar_path(const std::filesystem::path& out) {
    auto p = out;
    p += ".rho";
    return p;
}

inline void write_experiment(const std::filesystem::path& out, const ExperimentConfig& c, const ExperimentResult& r,
                             const nlohmann::ordered_json& extra = {}) {
    write_curve_csv(out, r.curve);
    nlohmann::ordered_json m;
    m["version"] = kVersion;
    m["output"] = out.string();
    m["config"] = config_to_json(c);
    if (std::isfinite(r.rho))
        m["rho_used"] = r.rho;
    m["record_stride"] = r.curve.record_stride;
    m["points"] = r.curve.values_db.size();
    m["divergent_trials"] = r.curve.divergent_trials;
    auto& trials = m["trials"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.trials.size(); ++i) {
        nlohmann::ordered_json t;
        t["index"] = i;
        t["seed"] = r.trials[i].seed;
        t["divergent"] = r.trials[i].curve.divergent;
        if (r.trials[i].switch_update >= 0)
            t["switch_update"] = r.trials[i].switch_update;
        trials.push_back(std::move(t));
    }
    if (!extra.is_null())
        for (auto it = extra.begin(); it != extra.end(); ++it)
            m[it.key()] = it.value();
    m["wall_time_s"] = r.wall_seconds;
    write_text_atomically(manifest_path(out), m.dump(2) + "\n");
}

inline void write_rho_sidecar(const std::filesystem::path& out, double rho) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g\n", rho);
    write_text_atomically(rho_sidecar_path(out), buf);
}

} // namespace nkpsaf
