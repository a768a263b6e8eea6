#include "expfbf/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "expfbf/errors.hpp"
#include "expfbf/rng.hpp"

namespace expfbf::dynamics {

TrajectoryDataset mackey_glass(const MgParams& params) {
    if (params.dt <= 0.0 || params.tau < 0.0 || params.samples < 1)
        throw InvalidInputError("mackey_glass needs dt > 0, tau >= 0, samples >= 1");
    const double h = params.dt / 10.0;
    const long n_fine = static_cast<long>(params.samples - 1) * 10;
    std::vector<double> y(static_cast<std::size_t>(n_fine) + 1);
    y[0] = params.y0;
    const double delay_steps = params.tau / h;

    // Delayed value at fractional fine index q, linearly interpolated; the
    // constant-y0 history covers all negative times.
    const auto delayed = [&](double q, long known) {
        const double j = q - delay_steps;
        if (j <= 0.0) return params.y0;
        if (j >= static_cast<double>(known)) return y[static_cast<std::size_t>(known)];
        const long j0 = static_cast<long>(std::floor(j));
        const double fr = j - static_cast<double>(j0);
        return y[static_cast<std::size_t>(j0)] * (1.0 - fr) +
               y[static_cast<std::size_t>(j0) + 1] * fr;
    };
    const auto f = [&](double yv, double yd) {
        return params.beta * yd / (1.0 + std::pow(yd, params.n)) - params.gamma * yv;
    };
    for (long i = 0; i < n_fine; ++i) {
        const double qi = static_cast<double>(i);
        const double d0 = delayed(qi, i);
        const double dh = delayed(qi + 0.5, i);
        const double d1 = delayed(qi + 1.0, i);
        const double k1 = f(y[i], d0);
        const double k2 = f(y[i] + 0.5 * h * k1, dh);
        const double k3 = f(y[i] + 0.5 * h * k2, dh);
        const double k4 = f(y[i] + h * k3, d1);
        y[i + 1] = y[i] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (std::abs(y[i + 1]) > 1e6)
            throw NumericFailureError("mackey_glass diverged", i / 10);
    }

    TrajectoryDataset out;
    out.dt = params.dt;
    out.times.resize(params.samples);
    out.clean.resize(1, params.samples);
    for (int i = 0; i < params.samples; ++i) {
        out.times[i] = params.dt * i;
        out.clean(0, i) = y[static_cast<std::size_t>(i) * 10];
    }
    return out;
}

AwgnResult add_awgn(const Matrix& x, double snr_db, std::uint64_t seed) {
    if (x.size() == 0) throw InvalidInputError("add_awgn needs a nonempty signal");
    const double power = x.squaredNorm() / static_cast<double>(x.size());
    if (power <= 0.0) throw InvalidInputError("add_awgn needs nonzero signal power");
    if (std::isinf(snr_db)) return {x, std::numeric_limits<double>::infinity()};

    const double noise_std = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
    Rng rng(seed);
    Matrix noise(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < noise.size(); ++i)
        noise.data()[i] = rng.normal(0.0, noise_std);
    const double noise_power = noise.squaredNorm() / static_cast<double>(noise.size());
    return {x + noise, 10.0 * std::log10(power / noise_power)};
}

namespace {

using Field = std::vector<std::complex<double>>;

Field nls_rhs(const Field& u_hat, const std::vector<double>& k2_half) {
    const Field u = numerics::ifft(u_hat);
    Field nl(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) nl[j] = std::norm(u[j]) * u[j];
    Field nl_hat = numerics::fft(nl);
    Field out(u.size());
    const std::complex<double> i_unit(0.0, 1.0);
    for (std::size_t j = 0; j < u.size(); ++j)
        out[j] = i_unit * (nl_hat[j] - k2_half[j] * u_hat[j]);
    return out;
}

}  // namespace

TrajectoryDataset nls_simulate(const NlsConfig& config) {
    const int n = config.solver_grid;
    if (n < 2 || (n & (n - 1)) != 0)
        throw InvalidInputError("nls solver grid must be a power of two");
    if (config.output_grid < 1 || n % config.output_grid != 0)
        throw InvalidInputError("nls output grid must divide the solver grid");
    if (config.snapshots < 1 || config.horizon <= 0.0)
        throw InvalidInputError("nls needs snapshots >= 1 and horizon > 0");

    const double length = config.x_max - config.x_min;
    const double dx = length / n;
    std::vector<double> k2_half(n);
    for (int j = 0; j < n; ++j) {
        const int wave = j < n / 2 ? j : j - n;
        const double k = 2.0 * 3.14159265358979323846 * wave / length;
        k2_half[j] = 0.5 * k * k;
    }
    Field u0(n);
    for (int j = 0; j < n; ++j)
        u0[j] = config.amplitude / std::cosh(config.x_min + j * dx);
    double norm0 = 0.0;
    for (const auto& v : u0) norm0 += std::norm(v);
    norm0 = std::sqrt(norm0);

    const int intervals = std::max(config.snapshots - 1, 1);
    const double dt_snap = config.horizon / intervals;
    const bool automatic = config.substeps_per_snapshot <= 0;
    int substeps = automatic
                       ? std::max<int>(1, static_cast<int>(std::ceil(
                             2000.0 * config.horizon / 3.14159265358979323846 / intervals)))
                       : config.substeps_per_snapshot;

    for (int attempt = 0;; ++attempt) {
        const double h = dt_snap / substeps;
        Field u_hat = numerics::fft(u0);
        TrajectoryDataset out;
        out.dt = config.snapshots > 1 ? dt_snap : config.horizon;
        out.times.resize(config.snapshots);
        out.clean.resize(config.output_grid, config.snapshots);
        const int stride = n / config.output_grid;
        bool blew_up = false;
        for (int snap = 0; snap < config.snapshots && !blew_up; ++snap) {
            const Field u = numerics::ifft(u_hat);
            double norm = 0.0;
            for (const auto& v : u) norm += std::norm(v);
            if (std::sqrt(norm) > 10.0 * norm0) {
                blew_up = true;
                break;
            }
            out.times[snap] = snap * dt_snap;
            for (int j = 0; j < config.output_grid; ++j)
                out.clean(j, snap) = u[static_cast<std::size_t>(j) * stride];
            if (snap + 1 == config.snapshots) break;
            for (int step = 0; step < substeps; ++step) {
                const Field k1 = nls_rhs(u_hat, k2_half);
                Field stage(u_hat.size());
                for (std::size_t j = 0; j < stage.size(); ++j)
                    stage[j] = u_hat[j] + 0.5 * h * k1[j];
                const Field k2 = nls_rhs(stage, k2_half);
                for (std::size_t j = 0; j < stage.size(); ++j)
                    stage[j] = u_hat[j] + 0.5 * h * k2[j];
                const Field k3 = nls_rhs(stage, k2_half);
                for (std::size_t j = 0; j < stage.size(); ++j)
                    stage[j] = u_hat[j] + h * k3[j];
                const Field k4 = nls_rhs(stage, k2_half);
                for (std::size_t j = 0; j < u_hat.size(); ++j)
                    u_hat[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        if (!blew_up) return out;
        if (!automatic || attempt >= 5)
            throw NumericFailureError(
                "nls solution blew up; rerun with more substeps per snapshot");
        substeps *= 2;
    }
}

void write_series_csv(const std::string& path, const Vector& times, const Matrix& states) {
    if (times.size() != states.cols())
        throw InvalidInputError("time and snapshot counts differ");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InvalidInputError("cannot open '" + path + "' for writing");
    out << "time";
    for (Eigen::Index r = 0; r < states.rows(); ++r) out << ",s" << r;
    out << "\n";
    char buf[40];
    const auto emit = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (Eigen::Index c = 0; c < states.cols(); ++c) {
        emit(times[c]);
        for (Eigen::Index r = 0; r < states.rows(); ++r) {
            out << ',';
            emit(states(r, c));
        }
        out << "\n";
    }
    if (!out) throw NumericFailureError("failed writing '" + path + "'");
}

Matrix read_series_csv(const std::string& path, Vector& times) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw InvalidInputError("'" + path + "' is empty");
    Eigen::Index dim = 0;  // the header has one comma per state column
    for (char ch : line)
        if (ch == ',') ++dim;
    if (dim < 1) throw InvalidInputError("'" + path + "' has no state columns");

    std::vector<double> time_values;
    std::vector<double> state_values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        Eigen::Index col = 0;
        while (std::getline(row, cell, ',')) {
            const double v = std::strtod(cell.c_str(), nullptr);
            if (col == 0)
                time_values.push_back(v);
            else
                state_values.push_back(v);
            ++col;
        }
        if (col != dim + 1)
            throw InvalidInputError("'" + path + "' row has inconsistent column count");
    }
    const auto count = static_cast<Eigen::Index>(time_values.size());
    times.resize(count);
    Matrix states(dim, count);
    for (Eigen::Index c = 0; c < count; ++c) {
        times[c] = time_values[c];
        for (Eigen::Index r = 0; r < dim; ++r) states(r, c) = state_values[c * dim + r];
    }
    return states;
}

}  // namespace expfbf::dynamics
