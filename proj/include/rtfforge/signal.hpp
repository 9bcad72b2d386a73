#pragma once

// Time/frequency primitives: radix-2 FFT, Hann-windowed STFT, linear
// convolution, seeded white noise and SNR-controlled mixing.

#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include "rtfforge/common.hpp"

namespace rtfforge {

inline constexpr std::size_t kFftSize = 1024;
inline constexpr std::size_t kNumBins = kFftSize / 2 + 1;  // 513
inline constexpr std::size_t kDefaultHop = 512;

struct TimeSeries {
    std::vector<double> samples;
    double sample_rate = 16000.0;
};

// One-sided spectrum of a real block (fft_size/2 + 1 bins).
struct Spectrum {
    std::vector<std::complex<double>> bins;
    double sample_rate = 16000.0;
};

struct StftFrames {
    std::size_t n_frames = 0;
    std::size_t n_bins = 0;
    std::vector<std::complex<double>> data;  // frame-major, n_frames x n_bins
    std::string window = "hann";
    std::size_t win_length = kFftSize;
    std::size_t hop = kDefaultHop;
    double sample_rate = 16000.0;

    const std::complex<double>* frame(std::size_t l) const { return data.data() + l * n_bins; }
    std::complex<double>* frame(std::size_t l) { return data.data() + l * n_bins; }
};

namespace detail {

// In-place iterative radix-2 FFT. sign = -1 forward, +1 inverse (unscaled).
inline void fft_in_place(std::vector<std::complex<double>>& a, int sign) {
    const std::size_t n = a.size();
    if (!is_power_of_two(n))
        throw SizeError("fft size must be a power of two, got " + std::to_string(n));

    // bit reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * kTwoPi / static_cast<double>(len);
        const std::complex<double> step(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= step;
            }
        }
    }
}

}  // namespace detail

// One-sided transform of a real block of any power-of-two length.
inline std::vector<std::complex<double>> rfft(const std::vector<double>& x) {
    std::vector<std::complex<double>> a(x.begin(), x.end());
    detail::fft_in_place(a, -1);
    std::vector<std::complex<double>> bins(x.size() / 2 + 1);
    std::copy(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(bins.size()), bins.begin());
    // DC and Nyquist of a real signal are real by symmetry.
    bins.front() = {bins.front().real(), 0.0};
    bins.back() = {bins.back().real(), 0.0};
    return bins;
}

// Inverse of rfft: reconstructs the real block from its one-sided bins.
inline std::vector<double> irfft(const std::vector<std::complex<double>>& bins) {
    if (bins.size() < 2) throw SizeError("irfft needs at least 2 bins");
    const std::size_t n = (bins.size() - 1) * 2;
    if (!is_power_of_two(n))
        throw SizeError("irfft bin count must be 2^k + 1, got " + std::to_string(bins.size()));
    std::vector<std::complex<double>> a(n);
    for (std::size_t k = 0; k < bins.size(); ++k) a[k] = bins[k];
    for (std::size_t k = 1; k + 1 < bins.size(); ++k) a[n - k] = std::conj(bins[k]);
    detail::fft_in_place(a, +1);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = a[i].real() / static_cast<double>(n);
    return x;
}

// 1024-point analysis block -> 513-bin one-sided spectrum.
inline Spectrum fft(const std::vector<double>& x, double sample_rate = 16000.0) {
    if (x.size() != kFftSize)
        throw SizeError("fft expects exactly " + std::to_string(kFftSize) +
                        " samples, got " + std::to_string(x.size()));
    return Spectrum{rfft(x), sample_rate};
}

inline std::vector<double> ifft(const Spectrum& s) {
    if (s.bins.size() != kNumBins)
        throw SizeError("ifft expects " + std::to_string(kNumBins) + " bins, got " +
                        std::to_string(s.bins.size()));
    return irfft(s.bins);
}

// Periodic Hann window.
inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

inline std::size_t stft_frame_count(std::size_t n_samples, std::size_t win, std::size_t hop) {
    if (n_samples < win) return 0;
    return (n_samples - win) / hop + 1;
}

inline StftFrames stft(const TimeSeries& x, std::size_t win = kFftSize,
                       std::size_t hop = kDefaultHop) {
    if (!is_power_of_two(win)) throw SizeError("stft window length must be a power of two");
    if (hop == 0) throw SizeError("stft hop must be positive");
    if (x.samples.size() < win)
        throw SizeError("signal shorter than one analysis window (" +
                        std::to_string(x.samples.size()) + " < " + std::to_string(win) + ")");
    const std::vector<double> w = hann_window(win);
    StftFrames out;
    out.n_frames = stft_frame_count(x.samples.size(), win, hop);
    out.n_bins = win / 2 + 1;
    out.data.resize(out.n_frames * out.n_bins);
    out.win_length = win;
    out.hop = hop;
    out.sample_rate = x.sample_rate;
    std::vector<double> block(win);
    for (std::size_t l = 0; l < out.n_frames; ++l) {
        const double* src = x.samples.data() + l * hop;
        for (std::size_t i = 0; i < win; ++i) block[i] = src[i] * w[i];
        const auto bins = rfft(block);
        std::copy(bins.begin(), bins.end(), out.frame(l));
    }
    return out;
}

// Full linear convolution of length len(x) + len(h) - 1, computed in the
// frequency domain. AirSignal tails are long, so this is the default path;
// tests check it against direct summation.
inline TimeSeries convolve(const TimeSeries& x, const TimeSeries& h) {
    if (x.sample_rate != h.sample_rate)
        throw RateError("convolve: sample rates differ (" + std::to_string(x.sample_rate) +
                        " vs " + std::to_string(h.sample_rate) + ")");
    if (x.samples.empty() || h.samples.empty()) throw SizeError("convolve: empty input");
    const std::size_t out_len = x.samples.size() + h.samples.size() - 1;
    const std::size_t n = next_power_of_two(out_len);
    std::vector<std::complex<double>> a(n), b(n);
    for (std::size_t i = 0; i < x.samples.size(); ++i) a[i] = x.samples[i];
    for (std::size_t i = 0; i < h.samples.size(); ++i) b[i] = h.samples[i];
    detail::fft_in_place(a, -1);
    detail::fft_in_place(b, -1);
    for (std::size_t i = 0; i < n; ++i) a[i] *= b[i];
    detail::fft_in_place(a, +1);
    TimeSeries out;
    out.sample_rate = x.sample_rate;
    out.samples.resize(out_len);
    for (std::size_t i = 0; i < out_len; ++i)
        out.samples[i] = a[i].real() / static_cast<double>(n);
    return out;
}

// Zero-mean unit-variance Gaussian noise; identical seed -> identical output.
inline TimeSeries white_noise(std::uint64_t seed, std::size_t n,
                              double sample_rate = 16000.0) {
    if (n == 0) throw SizeError("white_noise: sample count must be positive");
    GaussianRng rng(seed);
    TimeSeries out;
    out.sample_rate = sample_rate;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = rng.gaussian();
    return out;
}

inline double mean_power(const std::vector<double>& samples) {
    double acc = 0.0;
    for (double s : samples) acc += s * s;
    return samples.empty() ? 0.0 : acc / static_cast<double>(samples.size());
}

// Returns x + g*noise with g chosen so the mix hits the requested SNR.
inline TimeSeries add_noise_at_snr(const TimeSeries& x, const TimeSeries& noise,
                                   double snr_db) {
    if (x.sample_rate != noise.sample_rate)
        throw RateError("add_noise_at_snr: sample rates differ");
    if (x.samples.size() != noise.samples.size())
        throw SizeError("add_noise_at_snr: lengths differ");
    const double px = mean_power(x.samples);
    const double pn = mean_power(noise.samples);
    if (px <= 0.0) throw PowerError("add_noise_at_snr: signal has zero power");
    if (pn <= 0.0) throw PowerError("add_noise_at_snr: noise has zero power");
    const double gain = std::sqrt(px / (pn * std::pow(10.0, snr_db / 10.0)));
    TimeSeries out;
    out.sample_rate = x.sample_rate;
    out.samples.resize(x.samples.size());
    for (std::size_t i = 0; i < out.samples.size(); ++i)
        out.samples[i] = x.samples[i] + gain * noise.samples[i];
    return out;
}

}  // namespace rtfforge
