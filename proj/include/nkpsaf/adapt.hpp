#pragma once

// Subband p-norm update laws: NSAF, NSPN, FoNSPN, their Kronecker-factored
// forms and the one-shot TNKP switch from factored to fullband adaptation.
//
// Every *_update takes the subband errors as given (the ANC loops derive
// them from an error window); every *_step computes them from subband
// desired values first.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "nkp.hpp"
#include "signal.hpp"

namespace nkpsaf {

enum class Algorithm { nsaf, nspn, fonspn, nkp_nspn, nkp_fonspn, tnkp_fonspn, nlms };

inline Algorithm parse_algorithm(std::string_view name) {
    if (name == "nsaf") return Algorithm::nsaf;
    if (name == "nspn") return Algorithm::nspn;
    if (name == "fonspn") return Algorithm::fonspn;
    if (name == "nkp-nspn") return Algorithm::nkp_nspn;
    if (name == "nkp-fonspn") return Algorithm::nkp_fonspn;
    if (name == "tnkp-fonspn") return Algorithm::tnkp_fonspn;
    if (name == "nlms") return Algorithm::nlms;
    throw ParameterError("unknown algorithm '" + std::string(name)
                         + "' (expected nsaf | nspn | fonspn | nkp-nspn | nkp-fonspn | tnkp-fonspn | nlms)");
}

inline const char* algorithm_name(Algorithm a) {
    switch (a) {
    case Algorithm::nsaf: return "nsaf";
    case Algorithm::nspn: return "nspn";
    case Algorithm::fonspn: return "fonspn";
    case Algorithm::nkp_nspn: return "nkp-nspn";
    case Algorithm::nkp_fonspn: return "nkp-fonspn";
    case Algorithm::tnkp_fonspn: return "tnkp-fonspn";
    case Algorithm::nlms: return "nlms";
    }
    return "?";
}

inline bool is_factored(Algorithm a) {
    return a == Algorithm::nkp_nspn || a == Algorithm::nkp_fonspn || a == Algorithm::tnkp_fonspn;
}

enum class InitMethod { one, two };

struct AlgoConfig {
    double mu = 0.01;
    double mu_b = 0.002;
    double p = 1.4;
    double beta = 1.1;
    std::size_t Q = 2;
    std::size_t D1 = 8, D2 = 8;
    std::size_t N = 4, L = 33, r = 4;
    double rho = -std::numeric_limits<double>::infinity();
    double iota = 7e-4;
    InitMethod init = InitMethod::one;
    double eps = 1e-8;

    std::size_t D() const noexcept { return D1 * D2; }

    void validate() const {
        if (!(mu > 0.0)) throw ParameterError("mu must be positive");
        if (!(mu_b > 0.0)) throw ParameterError("mu_b must be positive");
        if (!(p >= 0.0)) throw ParameterError("p must be non-negative");
        if (!(beta > 0.0)) throw ParameterError("beta must be positive");
        if (D1 == 0 || D2 == 0) throw DimensionError("D1 and D2 must be positive");
        if (Q == 0 || Q > std::min(D1, D2)) throw DimensionError("Q must satisfy 1 <= Q <= min(D1, D2)");
        if (N == 0 || L == 0 || r == 0) throw DimensionError("N, L and r must be positive");
        if (!(eps >= 0.0)) throw ParameterError("eps must be non-negative");
    }
};

// ---------------------------------------------------------------------------
// Scalar pieces

// sgn(v) |v|^a with 0 -> 0.
inline double signed_power(double v, double a) {
    if (v == 0.0)
        return 0.0;
    const double m = std::pow(std::abs(v), a);
    return v > 0.0 ? m : -m;
}

inline double g_error(double e, double p, double beta) { return signed_power(e, p - beta); }

// Re{(-x)^beta} on the principal branch, with cos(pi beta) precomputed.
inline double frac_power_real(double x, double beta, double cos_pi_beta) {
    if (x == 0.0)
        return 0.0;
    if (x < 0.0)
        return std::pow(-x, beta);
    return std::pow(x, beta) * cos_pi_beta;
}

inline double frac_power_real(double x, double beta) {
    return frac_power_real(x, beta, std::cos(std::numbers::pi * beta));
}

inline double p_norm_p(std::span<const double> v, double p) {
    double acc = 0.0;
    for (double x : v)
        acc += std::pow(std::abs(x), p);
    return acc;
}

// Open-closed interval (lower, upper]. Endpoints are compared with a few ulps
// of slack so that p - alpha/2 rounding does not admit the excluded end.
struct BetaInterval {
    double lower, upper;
    bool contains(double beta) const noexcept {
        const double slack = 8.0 * std::numeric_limits<double>::epsilon();
        return beta > lower + slack * std::max(1.0, std::abs(lower)) && beta <= upper + slack * std::max(1.0, std::abs(upper));
    }
    std::string str() const {
        char buf[96];
        std::snprintf(buf, sizeof buf, "(%g, %g]", lower, upper);
        return buf;
    }
};

inline BetaInterval beta_bound(double p, double alpha) {
    if (!(alpha > 0.0 && alpha <= 2.0))
        throw ParameterError("beta_bound: alpha must lie in (0, 2]");
    if (!(p >= 0.0))
        throw ParameterError("beta_bound: p must be non-negative");
    return {p - alpha / 2.0, p};
}

// ---------------------------------------------------------------------------
// Frames

// Subband inputs x_{k,j} (each of length D) with matching desired values
// and errors. A frame may carry more rows than subbands: the multichannel
// controllers stack every (error channel, subband) pair.
struct SubbandFrame {
    std::vector<std::span<const double>> x;
    std::vector<double> d;
    std::vector<double> e;

    std::size_t rows() const noexcept { return x.size(); }
};

namespace detail {

inline void check_frame(const SubbandFrame& f, std::size_t D, bool need_d) {
    if (f.x.empty())
        throw DimensionError("subband frame has no rows");
    for (const auto& row : f.x)
        if (row.size() != D)
            throw DimensionError("subband input length " + std::to_string(row.size()) + " != filter length "
                                 + std::to_string(D));
    if (need_d ? f.d.size() != f.x.size() : f.e.size() != f.x.size())
        throw DimensionError("subband frame scalar count != row count");
}

inline void fill_errors(SubbandFrame& f, std::span<const double> w) {
    f.e.resize(f.x.size());
    for (std::size_t j = 0; j < f.x.size(); ++j)
        f.e[j] = f.d[j] - dot(w, f.x[j]);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Fullband-weight laws

inline void nsaf_update(std::span<double> w, const SubbandFrame& f, double mu, double eps) {
    detail::check_frame(f, w.size(), false);
    for (std::size_t j = 0; j < f.rows(); ++j) {
        if (f.e[j] == 0.0)
            continue;
        const auto x = f.x[j];
        const double coef = mu * f.e[j] / (dot(x, x) + eps);
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] += coef * x[i];
    }
}

inline void nspn_update(std::span<double> w, const SubbandFrame& f, double mu, const AlgoConfig& cfg) {
    detail::check_frame(f, w.size(), false);
    for (std::size_t j = 0; j < f.rows(); ++j) {
        if (f.e[j] == 0.0)
            continue;
        const auto x = f.x[j];
        const double coef = mu * signed_power(f.e[j], cfg.p - 1.0) / (p_norm_p(x, cfg.p) + cfg.eps);
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] += coef * x[i];
    }
}

inline void fonspn_update(std::span<double> w, const SubbandFrame& f, double mu, const AlgoConfig& cfg) {
    detail::check_frame(f, w.size(), false);
    const double cb = std::cos(std::numbers::pi * cfg.beta);
    for (std::size_t j = 0; j < f.rows(); ++j) {
        if (f.e[j] == 0.0)
            continue;
        const auto x = f.x[j];
        const double coef = mu * g_error(f.e[j], cfg.p, cfg.beta) / (p_norm_p(x, cfg.p) + cfg.eps);
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] -= coef * frac_power_real(x[i], cfg.beta, cb);
    }
}

inline void nsaf_step(std::span<double> w, SubbandFrame& f, const AlgoConfig& cfg) {
    detail::check_frame(f, w.size(), true);
    detail::fill_errors(f, w);
    nsaf_update(w, f, cfg.mu, cfg.eps);
}

inline void nspn_step(std::span<double> w, SubbandFrame& f, const AlgoConfig& cfg) {
    detail::check_frame(f, w.size(), true);
    detail::fill_errors(f, w);
    nspn_update(w, f, cfg.mu, cfg);
}

inline void fonspn_step(std::span<double> w, SubbandFrame& f, const AlgoConfig& cfg) {
    detail::check_frame(f, w.size(), true);
    detail::fill_errors(f, w);
    fonspn_update(w, f, cfg.mu, cfg);
}

// Fullband normalized LMS on a single regressor.
inline void nlms_update(std::span<double> w, std::span<const double> x, double e, double mu, double eps) {
    if (x.size() != w.size())
        throw DimensionError("nlms_update: regressor length mismatch");
    const double coef = mu * e / (dot(x, x) + eps);
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] += coef * x[i];
}

// ---------------------------------------------------------------------------
// Factored laws

// Structured products for every row of a frame, taken from the factors as
// they stand before the update.
struct FactoredInputs {
    std::vector<std::vector<double>> left;   // per row, Q*D1
    std::vector<std::vector<double>> right;  // per row, Q*D2

    void compute(const KronFactors& k, const SubbandFrame& f) {
        left.resize(f.rows());
        right.resize(f.rows());
        for (std::size_t j = 0; j < f.rows(); ++j) {
            left[j].resize(k.rank * k.d1);
            right[j].resize(k.rank * k.d2);
            filtered_input_left(f.x[j], k, left[j]);
            filtered_input_right(f.x[j], k, right[j]);
        }
    }
};

// e_j = d_j - m1^T (X_j m2) for every row.
inline void factored_errors(const KronFactors& k, SubbandFrame& f, const FactoredInputs& in) {
    f.e.resize(f.rows());
    for (std::size_t j = 0; j < f.rows(); ++j)
        f.e[j] = f.d[j] - dot(k.m1, in.left[j]);
}

inline void nkp_nspn_apply(KronFactors& k, const SubbandFrame& f, const FactoredInputs& in, double mu,
                           const AlgoConfig& cfg) {
    for (std::size_t j = 0; j < f.rows(); ++j) {
        if (f.e[j] == 0.0)
            continue;
        const double ge = signed_power(f.e[j], cfg.p - 1.0);
        const double c1 = mu * ge / (p_norm_p(in.left[j], cfg.p) + cfg.eps);
        for (std::size_t i = 0; i < k.m1.size(); ++i)
            k.m1[i] += c1 * in.left[j][i];
        const double c2 = mu * ge / (p_norm_p(in.right[j], cfg.p) + cfg.eps);
        for (std::size_t i = 0; i < k.m2.size(); ++i)
            k.m2[i] += c2 * in.right[j][i];
    }
}

inline void nkp_fonspn_apply(KronFactors& k, const SubbandFrame& f, const FactoredInputs& in, double mu,
                             const AlgoConfig& cfg) {
    const double cb = std::cos(std::numbers::pi * cfg.beta);
    for (std::size_t j = 0; j < f.rows(); ++j) {
        if (f.e[j] == 0.0)
            continue;
        const double ge = g_error(f.e[j], cfg.p, cfg.beta);
        const double c1 = mu * ge / (p_norm_p(in.left[j], cfg.p) + cfg.eps);
        for (std::size_t i = 0; i < k.m1.size(); ++i)
            k.m1[i] -= c1 * frac_power_real(in.left[j][i], cfg.beta, cb);
        const double c2 = mu * ge / (p_norm_p(in.right[j], cfg.p) + cfg.eps);
        for (std::size_t i = 0; i < k.m2.size(); ++i)
            k.m2[i] -= c2 * frac_power_real(in.right[j][i], cfg.beta, cb);
    }
}

inline void nkp_nspn_update(KronFactors& k, const SubbandFrame& f, const AlgoConfig& cfg) {
    detail::check_frame(f, k.length(), false);
    FactoredInputs in;
    in.compute(k, f);
    nkp_nspn_apply(k, f, in, cfg.mu, cfg);
}

inline void nkp_fonspn_update(KronFactors& k, const SubbandFrame& f, const AlgoConfig& cfg) {
    detail::check_frame(f, k.length(), false);
    FactoredInputs in;
    in.compute(k, f);
    nkp_fonspn_apply(k, f, in, cfg.mu, cfg);
}

inline void nkp_nspn_step(KronFactors& k, SubbandFrame& f, const AlgoConfig& cfg) {
    detail::check_frame(f, k.length(), true);
    FactoredInputs in;
    in.compute(k, f);
    factored_errors(k, f, in);
    nkp_nspn_apply(k, f, in, cfg.mu, cfg);
}

inline void nkp_fonspn_step(KronFactors& k, SubbandFrame& f, const AlgoConfig& cfg) {
    detail::check_frame(f, k.length(), true);
    FactoredInputs in;
    in.compute(k, f);
    factored_errors(k, f, in);
    nkp_fonspn_apply(k, f, in, cfg.mu, cfg);
}

// ---------------------------------------------------------------------------
// TNKP

struct TnkpState {
    KronFactors factors;
    std::vector<double> fullband;  // populated at the switch
    bool flag = false;             // running the fullband law
    bool latch = false;            // switch already happened; never cleared
    long switch_update = -1;       // index of the update instant that switched
    long updates = 0;

    bool switched() const noexcept { return latch; }
};

// Latches to the fullband law the first time metric_db <= rho, seeding it
// with the current synthesized filter. Returns true if this call switched.
inline bool tnkp_maybe_switch(TnkpState& s, double metric_db, double rho) {
    if (s.latch || !(metric_db <= rho))
        return false;
    s.fullband = kron_synthesize(s.factors);
    s.flag = true;
    s.latch = true;
    s.switch_update = s.updates;
    return true;
}

inline void tnkp_update(TnkpState& s, const SubbandFrame& f, const AlgoConfig& cfg, double metric_db) {
    tnkp_maybe_switch(s, metric_db, cfg.rho);
    if (s.flag)
        fonspn_update(s.fullband, f, cfg.mu_b, cfg);
    else
        nkp_fonspn_update(s.factors, f, cfg);
    ++s.updates;
}

inline void tnkp_step(TnkpState& s, SubbandFrame& f, const AlgoConfig& cfg, double metric_db) {
    tnkp_maybe_switch(s, metric_db, cfg.rho);
    if (s.flag) {
        detail::check_frame(f, s.fullband.size(), true);
        detail::fill_errors(f, s.fullband);
        fonspn_update(s.fullband, f, cfg.mu_b, cfg);
    } else {
        nkp_fonspn_step(s.factors, f, cfg);
    }
    ++s.updates;
}

// Mean of the last min(window, len/2) dB values of a steady-state curve.
inline double calibrate_rho(std::span<const double> curve_db, std::size_t window = 5000) {
    if (curve_db.empty())
        throw ParameterError("calibrate_rho: empty curve");
    if (window == 0)
        throw ParameterError("calibrate_rho: window must be positive");
    std::size_t n = std::min(window, curve_db.size() / 2);
    if (n == 0)
        n = curve_db.size();
    const auto tail = curve_db.subspan(curve_db.size() - n);
    return std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Engine wrapper

inline KronFactors initial_factors(const AlgoConfig& cfg) {
    return cfg.init == InitMethod::one ? KronFactors::method_one(cfg.D1, cfg.D2, cfg.Q, cfg.iota)
                                       : KronFactors::method_two(cfg.D1, cfg.D2, cfg.Q, cfg.iota);
}

// One adaptive filter of any supported law, with a synthesized cache of the
// effective fullband weights.
class AdaptiveFilter {
public:
    AdaptiveFilter(Algorithm algo, const AlgoConfig& cfg) : algo_(algo), cfg_(cfg) {
        cfg_.validate();
        if (is_factored(algo_)) {
            tnkp_.factors = initial_factors(cfg_);
            weights_ = kron_synthesize(tnkp_.factors);
        } else {
            weights_.assign(cfg_.D(), 0.0);
        }
    }

    Algorithm algorithm() const noexcept { return algo_; }
    const AlgoConfig& config() const noexcept { return cfg_; }
    std::span<const double> weights() const noexcept { return weights_; }
    const KronFactors& factors() const noexcept { return tnkp_.factors; }
    const TnkpState& tnkp() const noexcept { return tnkp_; }
    bool finite() const { return all_finite(weights_) && (!is_factored(algo_) || tnkp_.factors.finite()); }

    // Subband law with errors already in the frame.
    void update(const SubbandFrame& f, double metric_db = 0.0) {
        switch (algo_) {
        case Algorithm::nsaf: nsaf_update(weights_, f, cfg_.mu, cfg_.eps); break;
        case Algorithm::nspn: nspn_update(weights_, f, cfg_.mu, cfg_); break;
        case Algorithm::fonspn: fonspn_update(weights_, f, cfg_.mu, cfg_); break;
        case Algorithm::nkp_nspn: nkp_nspn_update(tnkp_.factors, f, cfg_); break;
        case Algorithm::nkp_fonspn: nkp_fonspn_update(tnkp_.factors, f, cfg_); break;
        case Algorithm::tnkp_fonspn: tnkp_update(tnkp_, f, cfg_, metric_db); break;
        case Algorithm::nlms: throw ParameterError("nlms is a fullband law; use update_fullband");
        }
        refresh();
    }

    // Subband law with errors computed from the frame's desired values.
    void step(SubbandFrame& f, double metric_db = 0.0) {
        switch (algo_) {
        case Algorithm::nsaf: nsaf_step(weights_, f, cfg_); break;
        case Algorithm::nspn: nspn_step(weights_, f, cfg_); break;
        case Algorithm::fonspn: fonspn_step(weights_, f, cfg_); break;
        case Algorithm::nkp_nspn: nkp_nspn_step(tnkp_.factors, f, cfg_); break;
        case Algorithm::nkp_fonspn: nkp_fonspn_step(tnkp_.factors, f, cfg_); break;
        case Algorithm::tnkp_fonspn: tnkp_step(tnkp_, f, cfg_, metric_db); break;
        case Algorithm::nlms: throw ParameterError("nlms is a fullband law; use update_fullband");
        }
        refresh();
    }

    void update_fullband(std::span<const double> x, double e) {
        if (algo_ != Algorithm::nlms)
            throw ParameterError(std::string(algorithm_name(algo_)) + " is a subband law");
        nlms_update(weights_, x, e, cfg_.mu, cfg_.eps);
    }

private:
    void refresh() {
        if (algo_ == Algorithm::tnkp_fonspn && tnkp_.flag)
            weights_ = tnkp_.fullband;
        else if (is_factored(algo_))
            kron_synthesize(tnkp_.factors, weights_);
    }

    Algorithm algo_;
    AlgoConfig cfg_;
    TnkpState tnkp_;
    std::vector<double> weights_;
};

} // namespace nkpsaf
