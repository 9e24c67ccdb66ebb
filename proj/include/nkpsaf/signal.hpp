#pragma once

// Shared signal primitives: impulse responses, tap-delay lines with
// newest-first reads, direct-form FIR evaluation and the D x L sliding
// input matrix used by the subband formulation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace nkpsaf {

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DimensionError("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += a[i] * b[i];
    return acc;
}

inline double norm2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v)
        acc += x * x;
    return std::sqrt(acc);
}

// A real, finite, non-empty impulse response.
class ImpulseResponse {
public:
    ImpulseResponse() = default;

    explicit ImpulseResponse(std::vector<double> taps) : taps_(std::move(taps)) {
        if (taps_.empty())
            throw DimensionError("impulse response must have at least one tap");
        if (!all_finite(taps_))
            throw ParameterError("impulse response taps must be finite");
    }

    ImpulseResponse(std::initializer_list<double> taps)
        : ImpulseResponse(std::vector<double>(taps)) {}

    std::size_t length() const noexcept { return taps_.size(); }
    std::span<const double> taps() const noexcept { return taps_; }
    double operator[](std::size_t i) const { return taps_[i]; }

    // Unit impulse delayed by `delay` samples.
    static ImpulseResponse impulse(std::size_t delay = 0) {
        std::vector<double> t(delay + 1, 0.0);
        t[delay] = 1.0;
        return ImpulseResponse(std::move(t));
    }

private:
    std::vector<double> taps_;
};

// Fixed-capacity shift register. Reads are newest-first:
// view()[i] == x_{k-i}, with zeros for samples before the first push.
//
// Storage is doubled so that the newest-first window is always contiguous.
class TapDelayLine {
public:
    TapDelayLine() = default;

    explicit TapDelayLine(std::size_t capacity) : cap_(capacity), buf_(2 * capacity, 0.0) {
        if (capacity == 0)
            throw DimensionError("tap delay line capacity must be positive");
    }

    std::size_t capacity() const noexcept { return cap_; }

    void push(double x) {
        if (!std::isfinite(x))
            throw ParameterError("tap delay line rejects non-finite samples");
        push_unchecked(x);
    }

    // For hot loops where the caller already guarantees finiteness.
    void push_unchecked(double x) noexcept {
        head_ = (head_ == 0 ? cap_ : head_) - 1;
        buf_[head_] = x;
        buf_[head_ + cap_] = x;
    }

    double operator[](std::size_t lag) const { return buf_[head_ + lag]; }

    std::span<const double> view() const noexcept { return {buf_.data() + head_, cap_}; }
    std::span<const double> view(std::size_t n) const noexcept {
        return {buf_.data() + head_, std::min(n, cap_)};
    }

    void clear() noexcept {
        std::fill(buf_.begin(), buf_.end(), 0.0);
        head_ = 0;
    }

private:
    std::size_t cap_ = 0;
    std::size_t head_ = 0;
    std::vector<double> buf_;
};

// Returns sum_i taps[i] * x_{k-i}.
inline double fir_filter(std::span<const double> taps, const TapDelayLine& delay) {
    if (delay.capacity() < taps.size())
        throw DimensionError("fir_filter: delay line shorter than impulse response");
    return dot(taps, delay.view(taps.size()));
}

inline double fir_filter(const ImpulseResponse& ir, const TapDelayLine& delay) {
    return fir_filter(ir.taps(), delay);
}

// D x L matrix [x_k, x_{k-1}, ..., x_{k-L+1}] of delay-line snapshots,
// stored column-major.
class SlidingMatrix {
public:
    SlidingMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
    std::span<const double> column(std::size_t j) const { return {data_.data() + j * rows_, rows_}; }

private:
    std::size_t rows_, cols_;
    std::vector<double> data_;
};

// Column j is the length-`rows` delay state j samples ago. The history line
// must hold at least rows + cols - 1 samples.
inline SlidingMatrix snapshot_matrix(const TapDelayLine& history, std::size_t rows, std::size_t cols) {
    if (cols == 0 || rows == 0)
        throw DimensionError("snapshot_matrix: L and D must be at least 1");
    if (history.capacity() < rows + cols - 1)
        throw DimensionError("snapshot_matrix: history shorter than D + L - 1");
    SlidingMatrix m(rows, cols);
    for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t i = 0; i < rows; ++i)
            m(i, j) = history[i + j];
    return m;
}

// ---------------------------------------------------------------------------
// Sample files: ".txt" holds one value per line, ".f64" holds raw
// little-endian IEEE-754 doubles.

namespace detail {

inline bool host_is_little_endian() {
    const std::uint16_t probe = 1;
    unsigned char first = 0;
    std::memcpy(&first, &probe, 1);
    return first == 1;
}

inline std::string extension_of(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

} // namespace detail

inline std::vector<double> read_samples(const std::filesystem::path& path) {
    const auto ext = detail::extension_of(path);
    if (ext != ".txt" && ext != ".f64")
        throw IngestionError("unsupported sample file extension '" + ext + "' (expected .txt or .f64): " + path.string());

    std::ifstream in(path, ext == ".f64" ? std::ios::binary : std::ios::in);
    if (!in)
        throw IngestionError("cannot open " + path.string());

    std::vector<double> out;
    if (ext == ".f64") {
        const bool swap = !detail::host_is_little_endian();
        unsigned char raw[8];
        while (in.read(reinterpret_cast<char*>(raw), 8)) {
            if (swap)
                std::reverse(raw, raw + 8);
            double v;
            std::memcpy(&v, raw, 8);
            out.push_back(v);
        }
        if (in.gcount() != 0)
            throw IngestionError("truncated .f64 file (size not a multiple of 8): " + path.string());
    } else {
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#')
                continue;
            std::istringstream ss(line);
            double v;
            if (!(ss >> v))
                throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": not a number");
            out.push_back(v);
        }
    }
    if (!all_finite(out))
        throw IngestionError("non-finite sample in " + path.string());
    return out;
}

inline void write_samples(const std::filesystem::path& path, std::span<const double> values) {
    const auto ext = detail::extension_of(path);
    if (ext != ".txt" && ext != ".f64")
        throw IngestionError("unsupported sample file extension '" + ext + "' (expected .txt or .f64): " + path.string());
    std::ofstream out(path, ext == ".f64" ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out)
        throw IngestionError("cannot write " + path.string());
    if (ext == ".f64") {
        const bool swap = !detail::host_is_little_endian();
        for (double v : values) {
            unsigned char raw[8];
            std::memcpy(raw, &v, 8);
            if (swap)
                std::reverse(raw, raw + 8);
            out.write(reinterpret_cast<const char*>(raw), 8);
        }
    } else {
        out.precision(17);
        for (double v : values)
            out << v << '\n';
    }
    if (!out)
        throw IngestionError("write failed: " + path.string());
}

inline ImpulseResponse load_impulse_response(const std::filesystem::path& path) {
    auto taps = read_samples(path);
    if (taps.empty())
        throw IngestionError("impulse response file is empty: " + path.string());
    return ImpulseResponse(std::move(taps));
}

} // namespace nkpsaf
