#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "expfbf/dynamics.hpp"
#include "expfbf/errors.hpp"

using expfbf::InvalidInputError;
using expfbf::NumericFailureError;
using namespace expfbf::dynamics;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Independent transcription of the delayed RK4 scheme: ten substeps per
// sample, half-step delayed values linearly interpolated, constant history.
std::vector<double> reference_mg(const MgParams& p) {
    const double h = p.dt / 10.0;
    const long n_fine = static_cast<long>(p.samples - 1) * 10;
    std::vector<double> y(static_cast<std::size_t>(n_fine) + 1, p.y0);
    const double delay = p.tau / h;
    const auto delayed = [&](double q, long known) {
        const double j = q - delay;
        if (j <= 0.0) return p.y0;
        if (j >= static_cast<double>(known)) return y[static_cast<std::size_t>(known)];
        const auto j0 = static_cast<long>(std::floor(j));
        const double fr = j - static_cast<double>(j0);
        return (1.0 - fr) * y[static_cast<std::size_t>(j0)] +
               fr * y[static_cast<std::size_t>(j0) + 1];
    };
    const auto f = [&](double yv, double yd) {
        return p.beta * yd / (1.0 + std::pow(yd, p.n)) - p.gamma * yv;
    };
    for (long i = 0; i < n_fine; ++i) {
        const double q = static_cast<double>(i);
        const double k1 = f(y[i], delayed(q, i));
        const double k2 = f(y[i] + 0.5 * h * k1, delayed(q + 0.5, i));
        const double k3 = f(y[i] + 0.5 * h * k2, delayed(q + 0.5, i));
        const double k4 = f(y[i] + h * k3, delayed(q + 1.0, i));
        y[i + 1] = y[i] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

}  // namespace

TEST_CASE("before the delay kicks in the series follows its closed form") {
    // For t <= tau the delayed argument is the constant history, so the
    // equation is linear with constant forcing and solvable by hand.
    MgParams p;
    p.samples = 6;  // exactly covers t in [0, tau]
    const auto data = mackey_glass(p);
    const double c = p.beta * p.y0 / (1.0 + std::pow(p.y0, p.n));
    for (int i = 0; i < p.samples; ++i) {
        const double t = p.dt * i;
        const double expected =
            (p.y0 - c / p.gamma) * std::exp(-p.gamma * t) + c / p.gamma;
        CHECK(std::abs(data.clean(0, i).real() - expected) <= 1e-7);
        CHECK(data.times[i] == p.dt * i);
        CHECK(data.clean(0, i).imag() == 0.0);
    }
}

TEST_CASE("with zero production the series is pure exponential decay") {
    MgParams p;
    p.beta = 0.0;
    p.samples = 2;
    const auto data = mackey_glass(p);
    CHECK(std::abs(data.clean(0, 1).real() - p.y0 * std::exp(-p.gamma * p.dt)) <= 1e-6);
}

TEST_CASE("the unit fixed point stays put exactly") {
    MgParams p;
    p.y0 = 1.0;  // production and decay balance at this value
    p.samples = 50;
    const auto data = mackey_glass(p);
    for (int i = 0; i < p.samples; ++i) CHECK(data.clean(0, i).real() == 1.0);
}

TEST_CASE("the chaotic series matches an independent transcription of the scheme") {
    MgParams p;
    p.samples = 150;
    const auto data = mackey_glass(p);
    const auto ref = reference_mg(p);
    for (int i = 0; i < p.samples; ++i)
        CHECK(std::abs(data.clean(0, i).real() - ref[static_cast<std::size_t>(i) * 10]) <=
              1e-12);
}

TEST_CASE("the default chaotic series stays bounded and reruns bit for bit") {
    MgParams p;
    const auto a = mackey_glass(p);
    const auto b = mackey_glass(p);
    for (int i = 0; i < p.samples; ++i) {
        const double v = a.clean(0, i).real();
        CHECK(v > 0.0);
        CHECK(v < 1.5);
        CHECK(v == b.clean(0, i).real());
    }
}

TEST_CASE("delay series input validation and divergence reporting") {
    MgParams p;
    p.dt = 0.0;
    CHECK_THROWS_AS(mackey_glass(p), InvalidInputError);
    p = MgParams{};
    p.samples = 0;
    CHECK_THROWS_AS(mackey_glass(p), InvalidInputError);
    p = MgParams{};
    p.tau = -1.0;
    CHECK_THROWS_AS(mackey_glass(p), InvalidInputError);

    p = MgParams{};
    p.gamma = -1.0;  // negative decay feeds exponential growth
    p.samples = 100;
    CHECK_THROWS_AS(mackey_glass(p), NumericFailureError);
}

TEST_CASE("added noise hits the requested signal-to-noise ratio") {
    Matrix x = Matrix::Ones(1, 100000);
    const auto r = add_awgn(x, 10.0, 123);
    CHECK(std::abs(r.achieved_snr_db - 10.0) <= 0.1);
    const Matrix noise = r.noisy - x;
    CHECK(std::abs(noise.mean()) <= 0.02);
    const double variance = noise.squaredNorm() / static_cast<double>(noise.size());
    CHECK(std::abs(variance - 0.1) <= 0.005);
}

TEST_CASE("noise is seeded and the infinite-ratio path returns the input") {
    Matrix x(2, 3);
    x << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
    const auto a = add_awgn(x, 5.0, 7);
    const auto b = add_awgn(x, 5.0, 7);
    const auto c = add_awgn(x, 5.0, 8);
    CHECK((a.noisy.array() == b.noisy.array()).all());
    CHECK(!(a.noisy.array() == c.noisy.array()).all());

    const auto clean = add_awgn(x, std::numeric_limits<double>::infinity(), 7);
    CHECK((clean.noisy.array() == x.array()).all());
    CHECK(std::isinf(clean.achieved_snr_db));

    CHECK_THROWS_AS(add_awgn(Matrix::Zero(2, 2), 10.0, 1), InvalidInputError);
    CHECK_THROWS_AS(add_awgn(Matrix(), 10.0, 1), InvalidInputError);
}

TEST_CASE("the unit soliton keeps its shape and mass") {
    NlsConfig config;
    config.amplitude = 1.0;  // |u(x, t)| = sech(x) for all t
    config.snapshots = 5;
    config.output_grid = config.solver_grid;
    const auto data = nls_simulate(config);
    const int n = config.solver_grid;
    const double dx = (config.x_max - config.x_min) / n;

    double mass0 = 0.0;
    double worst_shape = 0.0;
    for (int snap = 0; snap < config.snapshots; ++snap) {
        double mass = 0.0;
        for (int j = 0; j < n; ++j) {
            const double x = config.x_min + j * dx;
            const double magnitude = std::abs(data.clean(j, snap));
            worst_shape = std::max(worst_shape,
                                   std::abs(magnitude - 1.0 / std::cosh(x)));
            mass += magnitude * magnitude * dx;
        }
        if (snap == 0) mass0 = mass;
        CHECK(std::abs(mass - mass0) / mass0 <= 1e-6);
    }
    CHECK(worst_shape <= 1e-6);
}

TEST_CASE("the default wave dataset has the documented shape and time axis") {
    const auto data = nls_simulate(NlsConfig{});
    CHECK(data.clean.rows() == 32);
    CHECK(data.clean.cols() == 21);
    CHECK(data.dt == doctest::Approx(M_PI / 20.0).epsilon(1e-15));
    for (int snap = 0; snap < 21; ++snap)
        CHECK(data.times[snap] == doctest::Approx(snap * M_PI / 20.0).epsilon(1e-15));
}

TEST_CASE("coarse output is an exact stride of the solver grid") {
    NlsConfig coarse;
    coarse.snapshots = 5;
    NlsConfig fine = coarse;
    fine.output_grid = fine.solver_grid;
    const auto a = nls_simulate(coarse);
    const auto b = nls_simulate(fine);
    const int stride = fine.solver_grid / coarse.output_grid;
    for (int snap = 0; snap < 5; ++snap)
        for (int j = 0; j < coarse.output_grid; ++j)
            CHECK(a.clean(j, snap) == b.clean(j * stride, snap));
}

TEST_CASE("wave simulation validation and the fixed-substep blowup path") {
    NlsConfig c;
    c.solver_grid = 100;
    CHECK_THROWS_AS(nls_simulate(c), InvalidInputError);
    c = NlsConfig{};
    c.output_grid = 33;
    CHECK_THROWS_AS(nls_simulate(c), InvalidInputError);
    c = NlsConfig{};
    c.snapshots = 0;
    CHECK_THROWS_AS(nls_simulate(c), InvalidInputError);
    c = NlsConfig{};
    c.horizon = 0.0;
    CHECK_THROWS_AS(nls_simulate(c), InvalidInputError);

    c = NlsConfig{};
    c.snapshots = 3;
    c.substeps_per_snapshot = 1;  // far too coarse, and fixed so no retry
    CHECK_THROWS_AS(nls_simulate(c), NumericFailureError);
}

TEST_CASE("series files round trip exactly and rewrite byte for byte") {
    Vector times(3);
    times << 0.0, 0.1, 0.2;
    Matrix states(2, 3);
    states << 1.0, 1.0 / 3.0, -2.5e-17, 4.0, 5.0, 0.1 + 0.2;
    const std::string path = "series_roundtrip.csv";
    write_series_csv(path, times, states);

    Vector back_times;
    const Matrix back = read_series_csv(path, back_times);
    CHECK((back.array() == states.array()).all());
    CHECK((back_times.array() == times.array()).all());

    const std::string first = read_file(path);
    write_series_csv(path, times, states);
    CHECK(read_file(path) == first);
    std::remove(path.c_str());

    CHECK_THROWS_AS(write_series_csv(path, Vector::Zero(2), states), InvalidInputError);
    CHECK_THROWS_AS(read_series_csv("no_such_series.csv", back_times), InvalidInputError);
}
