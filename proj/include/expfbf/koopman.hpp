#pragma once

#include <optional>
#include <string>
#include <vector>

#include "expfbf/features.hpp"
#include "expfbf/numerics.hpp"

namespace expfbf::koopman {

using numerics::ComplexMatrix;
using numerics::ComplexVector;
using numerics::Matrix;
using numerics::Vector;

// Observable families for the Koopman baselines. Every lifted vector keeps
// the raw state as its leading block so the state reads back out by row
// selection.
enum class ObservableKind { identity, cubic, quadratic, gq };

struct ObservableSet {
    ObservableKind kind = ObservableKind::identity;
    int state_dim = 0;
    // Fourier quadrature map applied to the real part (gq kind only).
    std::optional<features::FourierFeatureMap> gq_map;

    static ObservableSet identity(int state_dim);
    static ObservableSet cubic(int state_dim);     // [x; |x|^2 x]
    static ObservableSet quadratic(int state_dim); // [x; |x|^2]
    static ObservableSet gq(int state_dim, features::FourierFeatureMap map);

    int lifted_dim() const;
    std::string name() const;
};

struct DmdModel {
    int rank = 0;
    ComplexMatrix modes;       // lifted_dim x rank
    ComplexVector eigenvalues; // rank
    ComplexVector amplitudes;  // rank
    double dt = 1.0;
    ObservableSet observables;
};

struct Spectra {
    ComplexVector eigenvalues;
    ComplexVector exponents;     // principal-branch log(lambda) / dt
    std::vector<bool> excluded;  // zero eigenvalues skipped by the log map
};

struct MseResult {
    Vector per_time;  // squared error summed over space, one entry per column
    double total = 0.0;
};

ComplexMatrix lift(const ComplexMatrix& x, const ObservableSet& obs);

// Largest r with singular value >= tol * s1; 0 for an all-zero matrix.
int numerical_rank(const ComplexMatrix& x, double tol = 1e-12);

// Exact DMD: rank-r truncated SVD of x, reduced operator from the shifted
// snapshots, modes projected through x', amplitudes fit to the first column.
DmdModel dmd_fit(const ComplexMatrix& x, const ComplexMatrix& x_next, int rank, double dt,
                 ObservableSet obs = {});

// Open-loop evolution: columns k = 0..steps of modes * diag(lambda^k) * b.
ComplexMatrix koopman_predict(const DmdModel& model, int steps);

// Real-part state block of a lifted trajectory.
Matrix read_out(const ComplexMatrix& lifted, int state_dim);

Spectra spectra(const DmdModel& model);

MseResult reconstruction_mse(const Matrix& predicted, const Matrix& truth);

}  // namespace expfbf::koopman
