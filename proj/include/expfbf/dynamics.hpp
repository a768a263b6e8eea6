#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "expfbf/numerics.hpp"

namespace expfbf::dynamics {

using numerics::ComplexMatrix;
using numerics::Matrix;
using numerics::Vector;

struct MgParams {
    double beta = 0.2;
    double gamma = 0.1;
    double tau = 30.0;
    double n = 10.0;
    double dt = 6.0;
    double y0 = 0.9;
    int samples = 1000;
};

struct NlsConfig {
    double x_min = -15.0;
    double x_max = 15.0;
    int solver_grid = 256;  // power of two
    int output_grid = 32;   // must divide solver_grid
    int snapshots = 21;
    double horizon = 3.14159265358979323846;
    double amplitude = 2.0;     // u(x, 0) = amplitude * sech(x)
    int substeps_per_snapshot = 0;  // 0: scaled so a [0, pi] horizon gets 2000 total
};

// Snapshots in columns. Real systems store zero imaginary parts; exports take
// the real part.
struct TrajectoryDataset {
    Vector times;
    ComplexMatrix clean;
    std::optional<ComplexMatrix> noisy;
    double snr_db = std::numeric_limits<double>::infinity();
    std::uint64_t noise_seed = 0;
    double dt = 0.0;

    Matrix real_clean() const { return clean.real(); }
    Matrix real_noisy() const { return noisy->real(); }
};

TrajectoryDataset mackey_glass(const MgParams& params);

struct AwgnResult {
    Matrix noisy;
    double achieved_snr_db = std::numeric_limits<double>::infinity();
};

// Adds zero-mean Gaussian noise sized so signal power / noise variance hits
// the target SNR; an infinite snr_db passes the input through.
AwgnResult add_awgn(const Matrix& x, double snr_db, std::uint64_t seed);

TrajectoryDataset nls_simulate(const NlsConfig& config);

// One row per snapshot: time, then the state coordinates, all %.17g so reruns
// are byte-identical.
void write_series_csv(const std::string& path, const Vector& times, const Matrix& states);

// Reads the write_series_csv layout; returns states (dim x count) and fills
// times.
Matrix read_series_csv(const std::string& path, Vector& times);

}  // namespace expfbf::dynamics
