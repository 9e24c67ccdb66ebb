#pragma once

// Cosine-modulated analysis filter bank and subband decomposition.
//
// The prototype is a Kaiser-windowed linear-phase lowpass. Its cutoff is
// tuned around pi/(2N) so that sum_j |F_j(e^{iw})|^2 is as flat as possible;
// every analysis filter is then scaled to unit Euclidean norm.

#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "signal.hpp"

namespace nkpsaf {

// L x N analysis matrix F, column-major: column j is filter f_j.
class AnalysisBank {
public:
    AnalysisBank() = default;

    AnalysisBank(std::size_t taps, std::size_t subbands, std::vector<double> coeffs)
        : taps_(taps), subbands_(subbands), coeffs_(std::move(coeffs)) {
        if (taps_ == 0 || subbands_ == 0)
            throw DimensionError("analysis bank needs at least one tap and one subband");
        if (coeffs_.size() != taps_ * subbands_)
            throw DimensionError("analysis bank coefficient count != L * N");
    }

    static AnalysisBank from_columns(const std::vector<std::vector<double>>& columns) {
        if (columns.empty())
            throw DimensionError("analysis bank needs at least one column");
        const std::size_t L = columns.front().size();
        std::vector<double> c;
        c.reserve(L * columns.size());
        for (const auto& col : columns) {
            if (col.size() != L)
                throw DimensionError("analysis bank columns differ in length");
            c.insert(c.end(), col.begin(), col.end());
        }
        return AnalysisBank(L, columns.size(), std::move(c));
    }

    std::size_t taps() const noexcept { return taps_; }
    std::size_t subbands() const noexcept { return subbands_; }
    double operator()(std::size_t tap, std::size_t band) const { return coeffs_[band * taps_ + tap]; }
    std::span<const double> filter(std::size_t band) const { return {coeffs_.data() + band * taps_, taps_}; }

    // Frequency response of filter `band` at angular frequency w.
    std::complex<double> response(std::size_t band, double w) const {
        std::complex<double> acc{0.0, 0.0};
        const auto f = filter(band);
        for (std::size_t n = 0; n < taps_; ++n)
            acc += f[n] * std::polar(1.0, -w * static_cast<double>(n));
        return acc;
    }

private:
    std::size_t taps_ = 0;
    std::size_t subbands_ = 0;
    std::vector<double> coeffs_;
};

namespace detail {

inline double kaiser_beta(double attenuation_db) {
    if (attenuation_db > 50.0)
        return 0.1102 * (attenuation_db - 8.7);
    if (attenuation_db >= 21.0)
        return 0.5842 * std::pow(attenuation_db - 21.0, 0.4) + 0.07886 * (attenuation_db - 21.0);
    return 0.0;
}

inline std::vector<double> kaiser_lowpass(std::size_t L, double cutoff, double beta) {
    std::vector<double> h(L);
    const double mid = 0.5 * static_cast<double>(L - 1);
    const double i0b = std::cyl_bessel_i(0.0, beta);
    for (std::size_t n = 0; n < L; ++n) {
        const double t = static_cast<double>(n) - mid;
        const double sinc = (t == 0.0) ? cutoff / std::numbers::pi : std::sin(cutoff * t) / (std::numbers::pi * t);
        const double ratio = (L == 1) ? 0.0 : t / mid;
        const double win = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - ratio * ratio))) / i0b;
        h[n] = sinc * win;
    }
    return h;
}

inline AnalysisBank modulate(const std::vector<double>& proto, std::size_t N) {
    const std::size_t L = proto.size();
    const double mid = 0.5 * static_cast<double>(L - 1);
    std::vector<double> c(L * N);
    for (std::size_t j = 0; j < N; ++j) {
        const double phase = (j % 2 == 0 ? 1.0 : -1.0) * std::numbers::pi / 4.0;
        double energy = 0.0;
        for (std::size_t n = 0; n < L; ++n) {
            double v = proto[n];
            if (N > 1)
                v = 2.0 * proto[n]
                    * std::cos((2.0 * j + 1.0) * std::numbers::pi / (2.0 * N) * (static_cast<double>(n) - mid) + phase);
            c[j * L + n] = v;
            energy += v * v;
        }
        const double s = 1.0 / std::sqrt(energy);
        for (std::size_t n = 0; n < L; ++n)
            c[j * L + n] *= s;
    }
    return AnalysisBank(L, N, std::move(c));
}

// Peak-to-peak ripple (dB) of sum_j |F_j|^2 on a uniform grid over [0, pi].
inline double power_ripple_db(const AnalysisBank& bank, std::size_t grid = 512) {
    double lo = 1e300, hi = 0.0;
    for (std::size_t g = 0; g <= grid; ++g) {
        const double w = std::numbers::pi * static_cast<double>(g) / static_cast<double>(grid);
        double s = 0.0;
        for (std::size_t j = 0; j < bank.subbands(); ++j)
            s += std::norm(bank.response(j, w));
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    return 10.0 * std::log10(hi / lo);
}

} // namespace detail

inline constexpr double kPrototypeStopbandDb = 60.0;

// Designs an N-band cosine-modulated bank with length-L filters.
inline AnalysisBank design_bank(std::size_t N, std::size_t L) {
    if (N == 0)
        throw DimensionError("design_bank: N must be positive");
    if (L < 2 * N)
        throw DimensionError("design_bank: infeasible, need L >= 2N");
    const double beta = detail::kaiser_beta(kPrototypeStopbandDb);
    const double nominal = std::numbers::pi / (2.0 * static_cast<double>(N));
    if (N == 1)
        return detail::modulate(detail::kaiser_lowpass(L, nominal, beta), 1);

    // Golden-section search for the cutoff minimizing the power ripple.
    auto ripple = [&](double wc) { return detail::power_ripple_db(detail::modulate(detail::kaiser_lowpass(L, wc, beta), N), 256); };
    double a = 0.6 * nominal, b = 1.6 * nominal;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = ripple(c), fd = ripple(d);
    for (int it = 0; it < 60; ++it) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - g * (b - a); fc = ripple(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + g * (b - a); fd = ripple(d);
        }
    }
    return detail::modulate(detail::kaiser_lowpass(L, 0.5 * (a + b), beta), N);
}

// x_{k,j} = X_k f_j for every subband j.
inline std::vector<std::vector<double>> analyze_inputs(const SlidingMatrix& X, const AnalysisBank& bank) {
    if (X.cols() != bank.taps())
        throw DimensionError("analyze_inputs: sliding matrix has " + std::to_string(X.cols())
                             + " columns, bank has L=" + std::to_string(bank.taps()));
    std::vector<std::vector<double>> out(bank.subbands(), std::vector<double>(X.rows(), 0.0));
    for (std::size_t j = 0; j < bank.subbands(); ++j)
        for (std::size_t l = 0; l < X.cols(); ++l) {
            const double f = bank(l, j);
            const auto col = X.column(l);
            for (std::size_t i = 0; i < X.rows(); ++i)
                out[j][i] += f * col[i];
        }
    return out;
}

// Subband scalars d_{k,j} = sum_i window[i] F[i][j]; window is newest-first.
inline std::vector<double> analyze_scalar_window(std::span<const double> window, const AnalysisBank& bank) {
    if (window.size() != bank.taps())
        throw DimensionError("analyze_scalar_window: window length != L");
    std::vector<double> out(bank.subbands(), 0.0);
    for (std::size_t j = 0; j < bank.subbands(); ++j)
        out[j] = dot(window, bank.filter(j));
    return out;
}

// Streaming equivalent of X_k F: each fullband sample is filtered by every
// f_j and pushed into a per-subband delay line of length D, so
// line(j).view() == x_{k,j} without rebuilding the D x L matrix.
class SubbandAnalyzer {
public:
    SubbandAnalyzer(const AnalysisBank& bank, std::size_t length)
        : bank_(&bank), input_(bank.taps()), lines_(bank.subbands(), TapDelayLine(length)) {}

    void push(double x) {
        input_.push_unchecked(x);
        const auto w = input_.view();
        for (std::size_t j = 0; j < lines_.size(); ++j)
            lines_[j].push_unchecked(dot(w, bank_->filter(j)));
    }

    std::size_t subbands() const noexcept { return lines_.size(); }
    std::size_t length() const noexcept { return lines_.front().capacity(); }
    std::span<const double> subband(std::size_t j) const { return lines_[j].view(); }

private:
    const AnalysisBank* bank_;
    TapDelayLine input_;
    std::vector<TapDelayLine> lines_;
};

// Text matrix: one row per tap, whitespace-separated subband columns.
inline void save_bank(const std::filesystem::path& path, const AnalysisBank& bank) {
    std::ofstream out(path);
    if (!out)
        throw IngestionError("cannot write " + path.string());
    out.precision(17);
    for (std::size_t i = 0; i < bank.taps(); ++i) {
        for (std::size_t j = 0; j < bank.subbands(); ++j)
            out << (j ? " " : "") << bank(i, j);
        out << '\n';
    }
}

inline AnalysisBank load_bank(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IngestionError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::istringstream ss(line);
        std::vector<double> row;
        double v;
        while (ss >> v)
            row.push_back(v);
        if (!ss.eof())
            throw IngestionError("bank file has a non-numeric entry: " + path.string());
        if (!rows.empty() && row.size() != rows.front().size())
            throw IngestionError("bank file rows differ in width: " + path.string());
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().empty())
        throw IngestionError("bank file is empty: " + path.string());
    const std::size_t L = rows.size(), N = rows.front().size();
    std::vector<double> c(L * N);
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < N; ++j)
            c[j * L + i] = rows[i][j];
    return AnalysisBank(L, N, std::move(c));
}

} // namespace nkpsaf
