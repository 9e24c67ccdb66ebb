// nkpsaf: run seeded subband adaptive-filter experiments from a config file.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "nkpsaf/nkpsaf.hpp"

namespace fs = std::filesystem;
using namespace nkpsaf;

namespace {

constexpr int kAllDiverged = 3;
constexpr int kUsageError = 2;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::string out;
    bool allow_unstable_beta = false;
    bool no_normalize = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
    auto* opt = cmd->add_option("--config", c.config, "experiment config file");
    if (needs_config)
        opt->required();
    cmd->add_option("--seed", c.seed, "base seed (trial i uses seed + i)");
    cmd->add_option("--jobs", c.jobs, "concurrent trials");
    cmd->add_option("--out", c.out, "output CSV path")->required();
    cmd->add_flag("--allow-unstable-beta", c.allow_unstable_beta, "skip the fractional-order stability check");
    cmd->add_flag("--no-normalize", c.no_normalize, "keep recordings at their stored scale");
}

ExperimentConfig resolve(const Common& c, const std::string& scenario) {
    auto cfg = load_config(c.config);
    if (!scenario.empty())
        cfg.scenario = scenario;
    if (c.seed)
        cfg.seed = *c.seed;
    if (c.jobs)
        cfg.jobs = *c.jobs;
    if (c.allow_unstable_beta)
        cfg.allow_unstable_beta = true;
    if (c.no_normalize)
        cfg.normalize = false;
    return cfg;
}

int run(const Common& c, const std::string& scenario) {
    const auto cfg = resolve(c, scenario);
    const auto res = run_experiment(cfg);
    write_experiment(c.out, cfg, res);
    std::fprintf(stderr, "%s: %zu points, final %.2f dB, %zu/%zu divergent trials, %.2fs\n", c.out.c_str(),
                 res.curve.values_db.size(), res.curve.final_db(), res.curve.divergent_trials, res.trials.size(),
                 res.wall_seconds);
    return res.all_divergent() ? kAllDiverged : 0;
}

int calibrate(const Common& c) {
    const auto cfg = resolve(c, "");
    const auto cal = run_calibration(cfg);
    nlohmann::ordered_json extra;
    extra["calibration"] = {{"algorithm", cal.algorithm},
                            {"window_requested", cfg.calib_window},
                            {"window_used", cal.window_used},
                            {"rho", cal.rho},
                            {"sidecar", rho_sidecar_path(c.out).string()}};
    write_experiment(c.out, cfg, cal.run, extra);
    write_rho_sidecar(c.out, cal.rho);
    std::printf("%.17g\n", cal.rho);
    return 0;
}

struct DecomposeArgs {
    std::string ir, out;
    std::size_t d1 = 0, d2 = 0, rank = 0;
};

void write_factor_file(const fs::path& path, const KronFactors& f, bool left) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IngestionError("cannot write " + path.string());
    out.precision(17);
    const std::size_t rows = left ? f.d1 : f.d2;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t q = 0; q < f.rank; ++q)
            out << (q ? " " : "") << (left ? f.left(q)[i] : f.right(q)[i]);
        out << '\n';
    }
}

int decompose(const DecomposeArgs& a) {
    const auto ir = load_impulse_response(a.ir);
    if (a.d1 * a.d2 != ir.length())
        throw DimensionError("impulse response has " + std::to_string(ir.length()) + " taps, not D1*D2 = "
                             + std::to_string(a.d1) + "*" + std::to_string(a.d2));
    const std::size_t kmax = std::min(a.d1, a.d2);
    const auto full = nkp_decompose(ir, a.d1, a.d2, kmax);
    std::ofstream csv(a.out, std::ios::trunc);
    if (!csv)
        throw IngestionError("cannot write " + a.out);
    csv << "q,singular_value,omega\n";
    for (std::size_t q = 1; q <= kmax; ++q)
        csv << q << ',' << format_sig9(full.svd.singular_values[q - 1]) << ','
            << format_sig9(tail_ratio(full.svd, q)) << '\n';
    const std::size_t rank = a.rank ? a.rank : kmax;
    const auto chosen = nkp_decompose(ir, a.d1, a.d2, rank);
    write_factor_file(a.out + ".m1.txt", chosen.factors, true);
    write_factor_file(a.out + ".m2.txt", chosen.factors, false);
    return 0;
}

struct NoiseArgs {
    double alpha = 2.0, gamma = 1.0, pole = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 1;
    std::string out;
};

int noisegen(const NoiseArgs& a) {
    AlphaStableParams p{a.alpha, a.gamma, a.seed};
    std::vector<double> v;
    if (a.pole == 0.0) {
        v = sample_alpha_stable(p, a.n);
    } else {
        AlphaStableSource src(p);
        v = sample_ar1(a.pole, a.n, src);
    }
    write_samples(a.out, v);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subband p-norm adaptive filtering experiments"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Common common;
    for (const char* name : {"identify", "aec", "anc", "anc-multi"}) {
        auto* cmd = app.add_subcommand(name, std::string("run the ") + name + " scenario");
        add_common(cmd, common);
    }
    auto* cal = app.add_subcommand("calibrate-rho", "estimate the switch threshold from a factored run");
    add_common(cal, common);

    DecomposeArgs dec;
    auto* dcmd = app.add_subcommand("decompose", "singular spectrum and optimal Kronecker factors of a response");
    dcmd->add_option("--ir", dec.ir, "impulse response (.txt or .f64)")->required();
    dcmd->add_option("--d1", dec.d1, "rows of the reshaped response")->required();
    dcmd->add_option("--d2", dec.d2, "columns of the reshaped response")->required();
    dcmd->add_option("--rank", dec.rank, "rank of the written factors (default: full)");
    dcmd->add_option("--out", dec.out, "CSV of q, singular value and omega")->required();

    NoiseArgs ng;
    auto* ncmd = app.add_subcommand("noisegen", "write symmetric alpha-stable samples");
    ncmd->add_option("--alpha", ng.alpha, "characteristic exponent in (0, 2]");
    ncmd->add_option("--gamma", ng.gamma, "scale (dispersion)");
    ncmd->add_option("--ar-pole", ng.pole, "color through an AR(1) filter with this pole");
    ncmd->add_option("-n,--samples", ng.n, "sample count")->required();
    ncmd->add_option("--seed", ng.seed, "generator seed");
    ncmd->add_option("--out", ng.out, "output file (.txt or .f64)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        for (const char* name : {"identify", "aec", "anc", "anc-multi"})
            if (app.got_subcommand(name))
                return run(common, name);
        if (app.got_subcommand(cal))
            return calibrate(common);
        if (app.got_subcommand(dcmd))
            return decompose(dec);
        if (app.got_subcommand(ncmd))
            return noisegen(ng);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kUsageError;
}
