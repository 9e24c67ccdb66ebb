#pragma once

// Flat `key: value` experiment configuration. One key per line, `#` starts
// a comment, blank lines are ignored. Unknown keys are rejected.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "adapt.hpp"
#include "errors.hpp"

namespace nkpsaf {

inline constexpr const char* kVersion = "nkpsaf 0.1.0";

struct ExperimentConfig {
    std::string scenario = "identify";  // identify | aec | anc | anc-multi
    std::string algorithm = "nkp-fonspn";
    AlgoConfig algo;

    std::string input = "gaussian-ar1";  // gaussian-ar1 | cauchy-ar1 | file
    double input_pole = 0.9;
    double input_variance = 1.0;
    double input_gamma = 0.1;
    std::string input_file;
    bool normalize = true;

    double noise_alpha = 1.5;
    double noise_gamma = 1.0 / 60.0;  // 0 disables the disturbance

    std::string m0 = "lowrank:2";
    std::uint64_t m0_seed = 7;
    double m0_tail = 0.1;

    std::string primary = "[1]";
    std::string secondary = "[1]";
    std::string secondary_model;  // empty: same as secondary
    std::string paths = "five-channel";
    std::size_t speakers = 0;  // for explicit multichannel path lists
    double anr_eta = 0.999;

    long flip_at = -1;
    std::size_t trials = 10;
    std::size_t samples = 50000;
    std::uint64_t seed = 1;

    bool rho_set = false;
    std::string rho_file;
    std::size_t calib_window = 5000;
    std::size_t jobs = 1;
    bool allow_unstable_beta = false;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& field, const std::string& v) {
    if (v == "inf" || v == "+inf")
        return std::numeric_limits<double>::infinity();
    if (v == "-inf")
        return -std::numeric_limits<double>::infinity();
    std::istringstream ss(v);
    double out;
    if (!(ss >> out) || !(ss >> std::ws).eof())
        throw ConfigError(field, "expected a number, got '" + v + "'");
    return out;
}

template <class Int>
Int parse_int(const std::string& field, const std::string& v) {
    Int out{};
    const auto* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc() || res.ptr != end)
        throw ConfigError(field, "expected an integer, got '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& field, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1")
        return true;
    if (v == "false" || v == "no" || v == "0")
        return false;
    throw ConfigError(field, "expected true or false, got '" + v + "'");
}

} // namespace detail

inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    auto& a = c.algo;
    const auto dbl = [&] { return parse_double(key, value); };
    const auto size = [&] { return parse_int<std::size_t>(key, value); };

    if (key == "scenario") {
        if (value != "identify" && value != "aec" && value != "anc" && value != "anc-multi")
            throw ConfigError(key, "expected identify | aec | anc | anc-multi, got '" + value + "'");
        c.scenario = value;
    } else if (key == "algorithm") c.algorithm = value;
    else if (key == "mu") a.mu = dbl();
    else if (key == "mu_b") a.mu_b = dbl();
    else if (key == "p") a.p = dbl();
    else if (key == "beta") a.beta = dbl();
    else if (key == "Q") a.Q = size();
    else if (key == "D1") a.D1 = size();
    else if (key == "D2") a.D2 = size();
    else if (key == "N") a.N = size();
    else if (key == "L") a.L = size();
    else if (key == "r") a.r = size();
    else if (key == "iota") a.iota = dbl();
    else if (key == "eps") a.eps = dbl();
    else if (key == "init") {
        if (value == "one" || value == "method-one" || value == "1") a.init = InitMethod::one;
        else if (value == "two" || value == "method-two" || value == "2") a.init = InitMethod::two;
        else throw ConfigError(key, "expected one or two, got '" + value + "'");
    } else if (key == "rho") {
        a.rho = dbl();
        c.rho_set = true;
    } else if (key == "rho_file") c.rho_file = value;
    else if (key == "calib_window") c.calib_window = size();
    else if (key == "input") {
        if (value != "gaussian-ar1" && value != "cauchy-ar1" && value != "file")
            throw ConfigError(key, "expected gaussian-ar1 | cauchy-ar1 | file, got '" + value + "'");
        c.input = value;
    } else if (key == "input_pole") c.input_pole = dbl();
    else if (key == "input_variance") c.input_variance = dbl();
    else if (key == "input_gamma") c.input_gamma = dbl();
    else if (key == "input_file") c.input_file = value;
    else if (key == "normalize") c.normalize = parse_bool(key, value);
    else if (key == "noise_alpha") c.noise_alpha = dbl();
    else if (key == "noise_gamma") c.noise_gamma = dbl();
    else if (key == "m0") c.m0 = value;
    else if (key == "m0_seed") c.m0_seed = parse_int<std::uint64_t>(key, value);
    else if (key == "m0_tail") c.m0_tail = dbl();
    else if (key == "primary") c.primary = value;
    else if (key == "secondary") c.secondary = value;
    else if (key == "secondary_model") c.secondary_model = value;
    else if (key == "paths") c.paths = value;
    else if (key == "speakers") c.speakers = size();
    else if (key == "anr_eta") c.anr_eta = dbl();
    else if (key == "flip_at") c.flip_at = parse_int<long>(key, value);
    else if (key == "trials") c.trials = size();
    else if (key == "samples") c.samples = size();
    else if (key == "seed") c.seed = parse_int<std::uint64_t>(key, value);
    else if (key == "jobs") c.jobs = size();
    else if (key == "allow_unstable_beta") c.allow_unstable_beta = parse_bool(key, value);
    else throw ConfigError(key, "unknown key");
}

inline ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno), "expected 'key: value'");
        const auto key = detail::trim(line.substr(0, colon));
        const auto value = detail::trim(line.substr(colon + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno), "missing key");
        set_config_value(c, key, value);
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IngestionError("cannot open config " + path.string());
    return parse_config(in);
}

// Structural checks that do not need any files.
inline void validate_config(const ExperimentConfig& c) {
    const auto wrap = [](const char* field, auto&& fn) {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(field, e.what());
        }
    };
    wrap("algo", [&] { c.algo.validate(); });
    if (c.trials == 0) throw ConfigError("trials", "must be at least 1");
    if (c.samples == 0) throw ConfigError("samples", "must be at least 1");
    if (c.jobs == 0) throw ConfigError("jobs", "must be at least 1");
    if (!(std::abs(c.input_pole) < 1.0)) throw ConfigError("input_pole", "|pole| must be < 1");
    if (!(c.input_variance > 0.0)) throw ConfigError("input_variance", "must be positive");
    if (!(c.input_gamma > 0.0)) throw ConfigError("input_gamma", "must be positive");
    if (!(c.noise_alpha > 0.0 && c.noise_alpha <= 2.0)) throw ConfigError("noise_alpha", "must lie in (0, 2]");
    if (!(c.noise_gamma >= 0.0)) throw ConfigError("noise_gamma", "must be non-negative");
    if (!(c.m0_tail >= 0.0 && c.m0_tail < 1.0)) throw ConfigError("m0_tail", "must lie in [0, 1)");
    if (!(c.anr_eta > 0.0 && c.anr_eta < 1.0)) throw ConfigError("anr_eta", "must lie in (0, 1)");
    if (c.calib_window == 0) throw ConfigError("calib_window", "must be at least 1");
    if (c.input == "file" && c.input_file.empty()) throw ConfigError("input_file", "required when input is 'file'");
    if (c.scenario == "aec" && c.input != "file")
        throw ConfigError("input", "the aec scenario needs a recorded far-end signal (input: file)");
}

} // namespace nkpsaf
