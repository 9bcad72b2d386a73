#pragma once

// Shared plumbing for the rtf-forge library: error taxonomy, 3-vectors,
// seeded Gaussian noise, thread helpers and little-endian binary IO.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <mutex>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rtfforge {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// ---------------------------------------------------------------------------
// Errors.
//
// ValidationError and its children signal bad inputs (rejected up front);
// everything else deriving from Error is a runtime fault. The CLI maps
// ValidationError to exit code 2 and other Error types to exit code 3.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class SizeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class BoundsError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class GeometryError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class RoomError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class RateError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class LengthError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DataError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ContractError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class PowerError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Malformed file on disk; carries the byte offset where parsing failed.
class FormatError : public ValidationError {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : ValidationError(what + " (at byte " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::uint64_t offset() const { return offset_; }

private:
    std::uint64_t offset_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class EmptyRegionError : public Error {
public:
    using Error::Error;
};

class ExtrapolationError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Geometry.

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

// ---------------------------------------------------------------------------
// Random numbers.
//
// All stochastic steps in the library draw from this generator so a run is
// reproducible from its seed. Gaussians come from a Box-Muller transform on
// top of mt19937_64 rather than std::normal_distribution, whose output is
// implementation-defined.

class GaussianRng {
public:
    explicit GaussianRng(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t next_u64() { return engine_(); }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]; keeps the log finite
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = kTwoPi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Mixes a base seed with a stream index (pose index, repeat index, ...) so
// derived streams are decorrelated. The xor keeps the published contract
// "seed ^ index" visible while splitmix64 whitens it.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base ^ index;
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Parallel helpers.
//
// RTF_FORGE_THREADS caps the worker count. Work is split into contiguous
// index ranges; each index is processed by exactly one worker, so results
// that are written per-index are independent of the thread count.

inline unsigned max_threads() {
    if (const char* env = std::getenv("RTF_FORGE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? hc : 1;
}

template <typename F>
void parallel_for(std::size_t n, F&& body) {
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(max_threads(), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto run_range = [&](std::size_t lo, std::size_t hi) {
        try {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 1; w < workers; ++w) {
        const std::size_t lo = std::min<std::size_t>(w * chunk, n);
        const std::size_t hi = std::min<std::size_t>(lo + chunk, n);
        pool.emplace_back(run_range, lo, hi);
    }
    run_range(0, std::min<std::size_t>(chunk, n));
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Little-endian binary IO.

inline void write_bytes(std::ostream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw IoError("write failed");
}

inline void write_u32le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    write_bytes(out, b, 4);
}

inline void write_u64le(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    write_bytes(out, b, 8);
}

inline void write_f64le(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64le(out, bits);
}

inline void write_f32le(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32le(out, bits);
}

// Reader that tracks its byte offset so format errors can name the position.
class LeReader {
public:
    explicit LeReader(std::istream& in) : in_(in) {}

    std::uint64_t offset() const { return offset_; }

    void read_bytes(void* data, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw FormatError(std::string("truncated file while reading ") + what, offset_);
        offset_ += n;
    }

    std::uint32_t read_u32(const char* what) {
        unsigned char b[4];
        read_bytes(b, 4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }

    std::uint64_t read_u64(const char* what) {
        unsigned char b[8];
        read_bytes(b, 8, what);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }

    double read_f64(const char* what) {
        const std::uint64_t bits = read_u64(what);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    float read_f32(const char* what) {
        const std::uint32_t bits = read_u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

private:
    std::istream& in_;
    std::uint64_t offset_ = 0;
};

inline bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a <= -kPi) a += kTwoPi;
    if (a > kPi) a -= kTwoPi;
    return a;
}

}  // namespace rtfforge
