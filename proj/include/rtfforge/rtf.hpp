#pragma once

// Relative transfer functions and their ILD/IPD feature targets.
//
// The interchannel ratio H2(f)/H1(f) is computed either exactly from the two
// impulse responses or from noise-excited microphone signals via a Welch
// cross-spectral estimator. Targets concatenate [ILD | sin IPD | cos IPD]
// over the 513-bin grid.

#include <complex>
#include <vector>

#include "rtfforge/common.hpp"
#include "rtfforge/room.hpp"
#include "rtfforge/signal.hpp"

namespace rtfforge {

inline constexpr double kMagnitudeFloor = 1e-12;
inline constexpr std::size_t kFeatureDim = 3 * kNumBins;  // 1539

struct RtfVector {
    std::vector<std::complex<double>> h;  // kNumBins entries
    std::size_t floored_bins = 0;         // bins rescued by the magnitude floor
};

struct FeatureVector {
    std::vector<double> ild;      // dB, kNumBins
    std::vector<double> ipd_sin;  // kNumBins
    std::vector<double> ipd_cos;  // kNumBins
    std::size_t flagged_bins = 0;

    std::vector<double> flat() const {
        std::vector<double> v;
        v.reserve(kFeatureDim);
        v.insert(v.end(), ild.begin(), ild.end());
        v.insert(v.end(), ipd_sin.begin(), ipd_sin.end());
        v.insert(v.end(), ipd_cos.begin(), ipd_cos.end());
        return v;
    }

    static FeatureVector from_flat(const std::vector<double>& v) {
        if (v.size() != kFeatureDim)
            throw SizeError("feature vector must have " + std::to_string(kFeatureDim) +
                            " entries, got " + std::to_string(v.size()));
        FeatureVector f;
        f.ild.assign(v.begin(), v.begin() + kNumBins);
        f.ipd_sin.assign(v.begin() + kNumBins, v.begin() + 2 * kNumBins);
        f.ipd_cos.assign(v.begin() + 2 * kNumBins, v.end());
        return f;
    }
};

namespace detail {

// Full-length one-sided spectrum decimated to the 1024-point bin grid.
// Responses longer than 1024 are padded to the next power of two and the
// bins at frequencies k*fs/1024 are picked out, which avoids truncating
// reverberant tails while keeping the 513-bin layout.
inline std::vector<std::complex<double>> spectrum_on_bin_grid(
    const std::vector<double>& samples) {
    const std::size_t padded = next_power_of_two(std::max<std::size_t>(samples.size(), kFftSize));
    std::vector<double> block(padded, 0.0);
    std::copy(samples.begin(), samples.end(), block.begin());
    const auto bins = rfft(block);
    const std::size_t stride = padded / kFftSize;
    std::vector<std::complex<double>> out(kNumBins);
    for (std::size_t k = 0; k < kNumBins; ++k) out[k] = bins[k * stride];
    return out;
}

}  // namespace detail

// Exact RTF from the two impulse responses.
inline RtfVector rtf_from_airs(const AirSignal& h1, const AirSignal& h2) {
    if (h1.sample_rate != h2.sample_rate)
        throw RateError("rtf_from_airs: sample rates differ");
    if (h1.samples.empty() || h2.samples.empty())
        throw SizeError("rtf_from_airs: empty impulse response");
    const auto s1 = detail::spectrum_on_bin_grid(h1.samples);
    const auto s2 = detail::spectrum_on_bin_grid(h2.samples);

    double max_mag = 0.0;
    for (const auto& v : s1) max_mag = std::max(max_mag, std::abs(v));
    if (max_mag == 0.0)
        throw DataError("rtf_from_airs: reference response is identically zero");
    const double floor = kMagnitudeFloor * max_mag;

    RtfVector out;
    out.h.resize(kNumBins);
    for (std::size_t k = 0; k < kNumBins; ++k) {
        std::complex<double> ref = s1[k];
        const double mag = std::abs(ref);
        if (mag < floor) {
            const double phase = (mag == 0.0) ? 0.0 : std::arg(ref);
            ref = std::polar(floor, phase);
            ++out.floored_bins;
        }
        out.h[k] = s2[k] / ref;
    }
    return out;
}

// Welch-style cross-spectral estimate H(f) = sum A2*conj(A1) / sum |A1|^2.
inline RtfVector rtf_from_signals(const StftFrames& a1, const StftFrames& a2) {
    if (a1.n_bins != a2.n_bins || a1.n_frames != a2.n_frames)
        throw SizeError("rtf_from_signals: frame geometry differs");
    if (a1.n_bins != kNumBins)
        throw SizeError("rtf_from_signals: expected " + std::to_string(kNumBins) + " bins");
    if (a1.n_frames < 4)
        throw SizeError("rtf_from_signals: need at least 4 frames, got " +
                        std::to_string(a1.n_frames));

    std::vector<std::complex<double>> cross(kNumBins, {0.0, 0.0});
    std::vector<double> auto1(kNumBins, 0.0);
    for (std::size_t l = 0; l < a1.n_frames; ++l) {
        const auto* f1 = a1.frame(l);
        const auto* f2 = a2.frame(l);
        for (std::size_t k = 0; k < kNumBins; ++k) {
            cross[k] += f2[k] * std::conj(f1[k]);
            auto1[k] += std::norm(f1[k]);
        }
    }
    double max_auto = 0.0;
    for (double v : auto1) max_auto = std::max(max_auto, v);
    if (max_auto == 0.0)
        throw DataError("rtf_from_signals: reference channel is identically zero");
    const double floor = kMagnitudeFloor * max_auto;

    RtfVector out;
    out.h.resize(kNumBins);
    for (std::size_t k = 0; k < kNumBins; ++k) {
        double den = auto1[k];
        if (den < floor) {
            den = floor;
            ++out.floored_bins;
        }
        out.h[k] = cross[k] / den;
    }
    return out;
}

// Analytic direct-path RTF: magnitude d1/d2 and the linear phase of the
// interchannel delay, on the 1024-point bin grid. The phase sign matches the
// transform convention used throughout the measurement path (a longer path
// to mic 2 shows up as a negative phase slope), so anechoic simulations and
// this model agree bin by bin.
inline RtfVector free_field_rtf(const Pose& source, const MicArray& mics, double c,
                                double sample_rate = 16000.0) {
    mics.validate();
    const double d1 = distance(source.position, mics.mic_poses[0].position);
    const double d2 = distance(source.position, mics.mic_poses[1].position);
    if (d1 <= 0.0 || d2 <= 0.0)
        throw GeometryError("free_field_rtf: source coincides with a microphone");
    RtfVector out;
    out.h.resize(kNumBins);
    const double mag = d1 / d2;
    for (std::size_t k = 0; k < kNumBins; ++k) {
        const double f = static_cast<double>(k) * sample_rate / static_cast<double>(kFftSize);
        out.h[k] = std::polar(mag, -kTwoPi * f * (d2 - d1) / c);
    }
    return out;
}

inline FeatureVector features_from_rtf(const RtfVector& rtf) {
    if (rtf.h.size() != kNumBins)
        throw SizeError("features_from_rtf: expected " + std::to_string(kNumBins) + " bins");
    FeatureVector f;
    f.ild.resize(kNumBins);
    f.ipd_sin.resize(kNumBins);
    f.ipd_cos.resize(kNumBins);
    for (std::size_t k = 0; k < kNumBins; ++k) {
        double mag = std::abs(rtf.h[k]);
        if (!std::isfinite(mag)) throw NumericError("features_from_rtf: non-finite RTF bin");
        if (mag < kMagnitudeFloor) {
            mag = kMagnitudeFloor;
            ++f.flagged_bins;
        }
        f.ild[k] = 20.0 * std::log10(mag);
        const double phase = std::arg(rtf.h[k]);  // arg(0) == 0 -> (sin, cos) = (0, 1)
        f.ipd_sin[k] = std::sin(phase);
        f.ipd_cos[k] = std::cos(phase);
    }
    return f;
}

// Inverse of features_from_rtf on non-floored bins.
inline RtfVector rtf_from_features(const FeatureVector& f) {
    RtfVector out;
    out.h.resize(kNumBins);
    for (std::size_t k = 0; k < kNumBins; ++k) {
        const double mag = std::pow(10.0, f.ild[k] / 20.0);
        out.h[k] = {mag * f.ipd_cos[k], mag * f.ipd_sin[k]};
    }
    return out;
}

inline RtfVector normalize_by_direct(const RtfVector& h, const RtfVector& direct) {
    if (h.h.size() != kNumBins || direct.h.size() != kNumBins)
        throw SizeError("normalize_by_direct: expected " + std::to_string(kNumBins) + " bins");
    RtfVector out;
    out.h.resize(kNumBins);
    out.floored_bins = h.floored_bins;
    for (std::size_t k = 0; k < kNumBins; ++k) {
        if (std::abs(direct.h[k]) == 0.0)
            throw DataError("normalize_by_direct: zero bin in the normalizer");
        out.h[k] = h.h[k] / direct.h[k];
    }
    return out;
}

inline RtfVector denormalize_by_direct(const RtfVector& h, const RtfVector& direct) {
    if (h.h.size() != kNumBins || direct.h.size() != kNumBins)
        throw SizeError("denormalize_by_direct: expected " + std::to_string(kNumBins) + " bins");
    RtfVector out;
    out.h.resize(kNumBins);
    out.floored_bins = h.floored_bins;
    for (std::size_t k = 0; k < kNumBins; ++k) out.h[k] = h.h[k] * direct.h[k];
    return out;
}

// Scales each (sin, cos) pair back onto the unit circle. Degenerate pairs
// collapse to (0, 1) and are flagged rather than dropped.
inline FeatureVector ipd_renormalize(const FeatureVector& v) {
    FeatureVector out = v;
    out.flagged_bins = v.flagged_bins;
    for (std::size_t k = 0; k < kNumBins; ++k) {
        const double s = v.ipd_sin[k];
        const double c = v.ipd_cos[k];
        const double r = std::sqrt(s * s + c * c);
        if (r < kMagnitudeFloor) {
            out.ipd_sin[k] = 0.0;
            out.ipd_cos[k] = 1.0;
            ++out.flagged_bins;
        } else {
            out.ipd_sin[k] = s / r;
            out.ipd_cos[k] = c / r;
        }
    }
    return out;
}

inline bool ipd_block_is_unit(const FeatureVector& v, double tol = 1e-6) {
    for (std::size_t k = 0; k < kNumBins; ++k) {
        const double n = v.ipd_sin[k] * v.ipd_sin[k] + v.ipd_cos[k] * v.ipd_cos[k];
        if (std::abs(n - 1.0) > tol) return false;
    }
    return true;
}

// Per-bin wrapped angular distance between two renormalized IPD blocks.
inline std::vector<double> ipd_error(const FeatureVector& pred, const FeatureVector& target) {
    if (!ipd_block_is_unit(pred) || !ipd_block_is_unit(target))
        throw ContractError("ipd_error: inputs must carry renormalized IPD blocks");
    std::vector<double> err(kNumBins);
    for (std::size_t k = 0; k < kNumBins; ++k) {
        const double a = std::atan2(pred.ipd_sin[k], pred.ipd_cos[k]);
        const double b = std::atan2(target.ipd_sin[k], target.ipd_cos[k]);
        err[k] = std::abs(wrap_angle(a - b));
    }
    return err;
}

}  // namespace rtfforge
