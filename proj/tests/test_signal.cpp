#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rtfforge/signal.hpp"
#include "support/oracles.hpp"

using namespace rtfforge;

TEST_CASE("fft of a unit impulse is flat", "[signal]") {
    std::vector<double> x(kFftSize, 0.0);
    x[0] = 1.0;
    const Spectrum s = fft(x);
    REQUIRE(s.bins.size() == kNumBins);
    for (const auto& b : s.bins) {
        CHECK(b.real() == Catch::Approx(1.0).margin(1e-12));
        CHECK(b.imag() == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("fft of a bin-aligned cosine concentrates at its bin", "[signal]") {
    std::vector<double> x(kFftSize);
    for (std::size_t n = 0; n < kFftSize; ++n)
        x[n] = std::cos(kTwoPi * 4.0 * static_cast<double>(n) / 1024.0);
    const Spectrum s = fft(x);

    // oracle: direct DFT summation at the peak bin
    const auto expected = oracles::dft_bin(x, 4);
    CHECK(std::abs(s.bins[4] - expected) < 1e-8);
    CHECK(std::abs(s.bins[4]) == Catch::Approx(512.0).epsilon(1e-10));
    for (std::size_t k = 0; k < kNumBins; ++k) {
        if (k == 4) continue;
        CHECK(std::abs(s.bins[k]) < 1e-9);
    }
}

TEST_CASE("fft round trip reconstructs the input", "[signal]") {
    GaussianRng rng(123);
    std::vector<double> x(kFftSize);
    for (double& v : x) v = rng.gaussian();
    const auto back = ifft(fft(x));
    double max_err = 0.0;
    for (std::size_t i = 0; i < kFftSize; ++i)
        max_err = std::max(max_err, std::abs(back[i] - x[i]));
    CHECK(max_err < 1e-10);
}

TEST_CASE("fft rejects wrong lengths", "[signal]") {
    CHECK_THROWS_AS(fft(std::vector<double>(1000, 0.0)), SizeError);
    CHECK_THROWS_AS(fft(std::vector<double>(2048, 0.0)), SizeError);
}

TEST_CASE("fft matches the direct DFT oracle on random input", "[signal]") {
    GaussianRng rng(77);
    std::vector<double> x(kFftSize);
    for (double& v : x) v = rng.gaussian();
    const Spectrum s = fft(x);
    for (std::size_t k : {0u, 1u, 17u, 256u, 511u, 512u}) {
        const auto expected = oracles::dft_bin(x, k);
        CHECK(std::abs(s.bins[k] - expected) < 1e-8);
    }
}

TEST_CASE("Parseval holds with one-sided double counting", "[signal]") {
    GaussianRng rng(99);
    std::vector<double> x(kFftSize);
    for (double& v : x) v = rng.gaussian();
    const Spectrum s = fft(x);
    double time_energy = 0.0;
    for (double v : x) time_energy += v * v;
    double spec_energy = std::norm(s.bins.front()) + std::norm(s.bins.back());
    for (std::size_t k = 1; k + 1 < kNumBins; ++k) spec_energy += 2.0 * std::norm(s.bins[k]);
    spec_energy /= static_cast<double>(kFftSize);
    CHECK(spec_energy == Catch::Approx(time_energy).epsilon(1e-10));
}

TEST_CASE("fft is linear", "[signal]") {
    GaussianRng rng(4);
    std::vector<double> x(kFftSize), y(kFftSize), mix(kFftSize);
    const double a = 2.5, b = -1.25;
    for (std::size_t i = 0; i < kFftSize; ++i) {
        x[i] = rng.gaussian();
        y[i] = rng.gaussian();
        mix[i] = a * x[i] + b * y[i];
    }
    const auto sx = fft(x), sy = fft(y), sm = fft(mix);
    for (std::size_t k = 0; k < kNumBins; ++k) {
        const auto expect = a * sx.bins[k] + b * sy.bins[k];
        CHECK(std::abs(sm.bins[k] - expect) < 1e-9 * (1.0 + std::abs(expect)));
    }
}

TEST_CASE("stft frame count and zero/constant content", "[signal]") {
    TimeSeries zeros{std::vector<double>(16000, 0.0), 16000.0};
    const StftFrames frames = stft(zeros, 1024, 512);
    CHECK(frames.n_frames == 30);  // floor((16000 - 1024)/512) + 1
    CHECK(frames.n_bins == kNumBins);
    for (const auto& v : frames.data) CHECK(std::abs(v) == 0.0);

    TimeSeries constant{std::vector<double>(4096, 3.0), 16000.0};
    const StftFrames cf = stft(constant, 1024, 512);
    const Spectrum window_spec = fft(hann_window(1024));
    for (std::size_t k = 0; k < kNumBins; ++k) {
        CHECK(std::abs(cf.frame(0)[k] - 3.0 * window_spec.bins[k]) < 1e-9);
    }
}

TEST_CASE("stft rejects short signals", "[signal]") {
    TimeSeries tiny{std::vector<double>(512, 1.0), 16000.0};
    CHECK_THROWS_AS(stft(tiny, 1024, 512), SizeError);
}

TEST_CASE("convolution identity and hand cases", "[signal]") {
    TimeSeries x{{1.0, 2.0, -1.0, 0.5}, 16000.0};
    TimeSeries delta{{1.0}, 16000.0};
    const TimeSeries xd = convolve(x, delta);
    REQUIRE(xd.samples.size() == x.samples.size());
    for (std::size_t i = 0; i < x.samples.size(); ++i)
        CHECK(xd.samples[i] == Catch::Approx(x.samples[i]).margin(1e-12));

    TimeSeries a{{1.0, 1.0}, 16000.0};
    const TimeSeries sq = convolve(a, a);
    REQUIRE(sq.samples.size() == 3);
    CHECK(sq.samples[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(sq.samples[1] == Catch::Approx(2.0).margin(1e-12));
    CHECK(sq.samples[2] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("convolution matches direct summation and commutes", "[signal]") {
    GaussianRng rng(31);
    std::vector<double> xs(64), hs(16);
    for (double& v : xs) v = rng.gaussian();
    for (double& v : hs) v = rng.gaussian();
    TimeSeries x{xs, 16000.0}, h{hs, 16000.0};

    const auto expected = oracles::convolve_direct(xs, hs);
    const TimeSeries got = convolve(x, h);
    const TimeSeries swapped = convolve(h, x);
    REQUIRE(got.samples.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(std::abs(got.samples[i] - expected[i]) < 1e-8);
        CHECK(std::abs(swapped.samples[i] - got.samples[i]) < 1e-8);
    }
}

TEST_CASE("convolution rejects rate mismatch", "[signal]") {
    TimeSeries x{{1.0, 2.0}, 16000.0};
    TimeSeries h{{1.0}, 8000.0};
    CHECK_THROWS_AS(convolve(x, h), RateError);
}

TEST_CASE("white noise is seeded and well scaled", "[signal]") {
    const TimeSeries a = white_noise(7, 4096);
    const TimeSeries b = white_noise(7, 4096);
    CHECK(a.samples == b.samples);

    const TimeSeries c = white_noise(1, 4096);
    const TimeSeries d = white_noise(2, 4096);
    CHECK(c.samples != d.samples);

    CHECK_THROWS_AS(white_noise(7, 0), SizeError);

    const TimeSeries big = white_noise(12345, 1000000);
    double mean = 0.0;
    for (double v : big.samples) mean += v;
    mean /= static_cast<double>(big.samples.size());
    double var = 0.0;
    for (double v : big.samples) var += (v - mean) * (v - mean);
    var /= static_cast<double>(big.samples.size());
    CHECK(std::abs(mean) < 0.01);
    CHECK(var > 0.99);
    CHECK(var < 1.01);
}

TEST_CASE("SNR mixing solves the gain equation", "[signal]") {
    // unit-power deterministic signals
    std::vector<double> sig(16000), noi(16000);
    for (std::size_t i = 0; i < sig.size(); ++i) {
        sig[i] = (i % 2 == 0) ? 1.0 : -1.0;
        noi[i] = (i % 4 < 2) ? 1.0 : -1.0;
    }
    TimeSeries x{sig, 16000.0}, n{noi, 16000.0};

    const TimeSeries at0 = add_noise_at_snr(x, n, 0.0);
    for (std::size_t i = 0; i < 8; ++i)
        CHECK(at0.samples[i] == Catch::Approx(sig[i] + noi[i]).margin(1e-12));

    const TimeSeries at20 = add_noise_at_snr(x, n, 20.0);
    for (std::size_t i = 0; i < 8; ++i)
        CHECK(at20.samples[i] == Catch::Approx(sig[i] + 0.1 * noi[i]).margin(1e-12));

    TimeSeries zero{std::vector<double>(16000, 0.0), 16000.0};
    CHECK_THROWS_AS(add_noise_at_snr(zero, n, 10.0), PowerError);
}

TEST_CASE("measured post-mix SNR matches the request", "[signal]") {
    const TimeSeries x = white_noise(11, 16000);
    const TimeSeries n = white_noise(22, 16000);
    for (double snr : {-5.0, 0.0, 12.5, 30.0}) {
        const TimeSeries mixed = add_noise_at_snr(x, n, snr);
        std::vector<double> added(mixed.samples.size());
        for (std::size_t i = 0; i < added.size(); ++i)
            added[i] = mixed.samples[i] - x.samples[i];
        const double measured =
            10.0 * std::log10(mean_power(x.samples) / mean_power(added));
        CHECK(measured == Catch::Approx(snr).margin(0.01));
    }
}
