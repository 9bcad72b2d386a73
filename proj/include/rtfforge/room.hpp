#pragma once

// Shoebox room acoustics via the image-source method. Every image source
// within the rendering radius contributes an attenuated, fractionally
// delayed copy of the excitation; fractional delays are rendered with a
// Hann-windowed sinc kernel so interchannel phase stays accurate.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "rtfforge/common.hpp"

namespace rtfforge {

// Half-width of the fractional-delay kernel, in taps (64-tap kernel).
inline constexpr int kDelayKernelHalfWidth = 32;

struct Pose {
    Vec3 position;
    double azimuth = 0.0;
    double elevation = 0.0;
    double rotation = 0.0;

    std::array<double, 6> as_input() const {
        return {position.x, position.y, position.z, azimuth, elevation, rotation};
    }
};

struct MicArray {
    std::array<Pose, 2> mic_poses;  // mic 0 is the reference channel

    double spacing() const {
        return distance(mic_poses[0].position, mic_poses[1].position);
    }

    void validate() const {
        if (spacing() <= 0.0)
            throw GeometryError("microphone positions must be distinct");
    }
};

// Builds the default array: two omni mics on the x axis centred on `center`.
inline MicArray mic_pair(const Vec3& center, double spacing = 0.18) {
    if (spacing <= 0.0) throw GeometryError("microphone spacing must be positive");
    MicArray m;
    m.mic_poses[0].position = {center.x - spacing / 2.0, center.y, center.z};
    m.mic_poses[1].position = {center.x + spacing / 2.0, center.y, center.z};
    return m;
}

struct AirSignal {
    std::vector<double> samples;
    double sample_rate = 16000.0;
};

// Sabine inversion: absorption from the requested decay time, clamped to the
// fully absorbing wall when rt60 is shorter than the room can support.
inline double reflection_from_rt60(const Vec3& dims, double rt60) {
    if (dims.x <= 0.0 || dims.y <= 0.0 || dims.z <= 0.0)
        throw RoomError("room dimensions must be strictly positive");
    if (rt60 < 0.0) throw RoomError("rt60 must be non-negative");
    if (rt60 == 0.0) return 0.0;
    const double volume = dims.x * dims.y * dims.z;
    const double surface = 2.0 * (dims.x * dims.y + dims.x * dims.z + dims.y * dims.z);
    const double absorption = 0.161 * volume / (surface * rt60);
    if (absorption >= 1.0) return 0.0;
    return std::sqrt(1.0 - absorption);
}

struct RoomSpec {
    Vec3 dims;
    double rt60 = 0.0;        // seconds
    double reflection = 0.0;  // per-wall amplitude coefficient, uniform
    double speed_of_sound = 343.0;
    double sample_rate = 16000.0;

    static RoomSpec from_rt60(const Vec3& dims, double rt60, double c = 343.0,
                              double fs = 16000.0) {
        RoomSpec r;
        r.dims = dims;
        r.rt60 = rt60;
        r.reflection = reflection_from_rt60(dims, rt60);
        r.speed_of_sound = c;
        r.sample_rate = fs;
        r.validate();
        return r;
    }

    static RoomSpec from_reflection(const Vec3& dims, double beta, double c = 343.0,
                                    double fs = 16000.0) {
        if (dims.x <= 0.0 || dims.y <= 0.0 || dims.z <= 0.0)
            throw RoomError("room dimensions must be strictly positive");
        if (beta < 0.0 || beta >= 1.0)
            throw RoomError("reflection coefficient must lie in [0, 1)");
        RoomSpec r;
        r.dims = dims;
        r.reflection = beta;
        const double volume = dims.x * dims.y * dims.z;
        const double surface = 2.0 * (dims.x * dims.y + dims.x * dims.z + dims.y * dims.z);
        const double absorption = 1.0 - beta * beta;
        r.rt60 = 0.161 * volume / (surface * absorption);
        r.speed_of_sound = c;
        r.sample_rate = fs;
        return r;
    }

    void validate() const {
        if (dims.x <= 0.0 || dims.y <= 0.0 || dims.z <= 0.0)
            throw RoomError("room dimensions must be strictly positive");
        if (reflection < 0.0 || reflection >= 1.0)
            throw RoomError("reflection coefficient must lie in [0, 1)");
        if (sample_rate <= 0.0) throw RoomError("sample rate must be positive");
        if (speed_of_sound <= 0.0) throw RoomError("speed of sound must be positive");
    }

    bool contains(const Vec3& p) const {
        return p.x > 0.0 && p.x < dims.x && p.y > 0.0 && p.y < dims.y && p.z > 0.0 &&
               p.z < dims.z;
    }

    double diagonal() const { return dims.norm(); }
};

inline double direct_delay(const Pose& source, const Pose& mic, double c) {
    const double d = distance(source.position, mic.position);
    if (d <= 0.0) throw GeometryError("direct_delay: coincident source and microphone");
    if (c <= 0.0) throw GeometryError("direct_delay: speed of sound must be positive");
    return d / c;
}

namespace detail {

// Adds a windowed-sinc arrival of amplitude `gain` at fractional sample
// position `delay` into `out`. Taps with |n - delay| > half-width vanish.
inline void add_arrival(std::vector<double>& out, double delay, double gain) {
    const int w = kDelayKernelHalfWidth;
    const int n0 = static_cast<int>(std::ceil(delay)) - w;
    const int n1 = static_cast<int>(std::floor(delay)) + w;
    // sin(pi*(n - delay)) alternates sign with n; one evaluation serves all taps.
    const double frac0 = static_cast<double>(n0) - delay;
    double sin_pi_t = std::sin(kPi * frac0);
    const int out_len = static_cast<int>(out.size());
    for (int n = n0; n <= n1; ++n, sin_pi_t = -sin_pi_t) {
        if (n < 0 || n >= out_len) continue;
        const double t = static_cast<double>(n) - delay;
        double kernel;
        if (std::abs(t) < 1e-9) {
            kernel = 1.0;
        } else {
            const double window = 0.5 * (1.0 + std::cos(kPi * t / static_cast<double>(w)));
            kernel = window * sin_pi_t / (kPi * t);
        }
        out[n] += gain * kernel;
    }
}

}  // namespace detail

// Image-source simulation of the source->microphone impulse response.
// Enumeration is pruned by the rendering radius c * length / fs rather than
// by reflection order.
inline AirSignal simulate_air(const RoomSpec& room, const Pose& source, const Pose& mic,
                              std::size_t length) {
    room.validate();
    if (!room.contains(source.position))
        throw BoundsError("simulate_air: source pose outside the room");
    if (!room.contains(mic.position))
        throw BoundsError("simulate_air: microphone pose outside the room");
    const double c = room.speed_of_sound;
    const double fs = room.sample_rate;
    const double direct = direct_delay(source, mic, c) * fs;
    if (static_cast<double>(length) <= direct)
        throw LengthError("simulate_air: requested length " + std::to_string(length) +
                          " samples does not cover the direct-path delay");

    AirSignal air;
    air.sample_rate = fs;
    air.samples.assign(length, 0.0);

    const double radius = c * static_cast<double>(length) / fs;
    const Vec3 L = room.dims;
    const Vec3 s = source.position;
    const Vec3 r = mic.position;
    const int nx = static_cast<int>(std::ceil((radius + L.x) / (2.0 * L.x)));
    const int ny = static_cast<int>(std::ceil((radius + L.y) / (2.0 * L.y)));
    const int nz = static_cast<int>(std::ceil((radius + L.z) / (2.0 * L.z)));

    const double beta = room.reflection;
    // beta^k table; exponents are bounded by the enumeration box.
    const int max_order = 2 * (nx + ny + nz) + 6;
    std::vector<double> beta_pow(static_cast<std::size_t>(max_order) + 1);
    beta_pow[0] = 1.0;
    for (int k = 1; k <= max_order; ++k) beta_pow[k] = beta_pow[k - 1] * beta;

    const double fs_over_c = fs / c;
    for (int ix = -nx; ix <= nx; ++ix) {
        for (int q = 0; q <= 1; ++q) {
            const double px = (1 - 2 * q) * s.x + 2.0 * ix * L.x - r.x;
            const int ox = std::abs(ix - q) + std::abs(ix);
            if (beta == 0.0 && ox > 0) continue;
            for (int iy = -ny; iy <= ny; ++iy) {
                for (int j = 0; j <= 1; ++j) {
                    const double py = (1 - 2 * j) * s.y + 2.0 * iy * L.y - r.y;
                    const int oy = std::abs(iy - j) + std::abs(iy);
                    if (beta == 0.0 && oy > 0) continue;
                    const double pxy2 = px * px + py * py;
                    for (int iz = -nz; iz <= nz; ++iz) {
                        for (int k = 0; k <= 1; ++k) {
                            const double pz = (1 - 2 * k) * s.z + 2.0 * iz * L.z - r.z;
                            const int oz = std::abs(iz - k) + std::abs(iz);
                            if (beta == 0.0 && oz > 0) continue;
                            const double dist = std::sqrt(pxy2 + pz * pz);
                            if (dist > radius || dist <= 0.0) continue;
                            const double gain =
                                beta_pow[ox + oy + oz] / (4.0 * kPi * dist);
                            detail::add_arrival(air.samples, dist * fs_over_c, gain);
                        }
                    }
                }
            }
        }
    }
    return air;
}

// Response length that covers the direct path, the reverberant decay and the
// delay kernel for any source/mic pair inside the room.
inline std::size_t default_air_length(const RoomSpec& room) {
    const double tail = room.rt60 * room.sample_rate;
    const double direct = room.diagonal() / room.speed_of_sound * room.sample_rate;
    return static_cast<std::size_t>(std::ceil(tail + direct)) + 2 * kDelayKernelHalfWidth + 1;
}

}  // namespace rtfforge
