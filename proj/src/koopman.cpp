#include "expfbf/koopman.hpp"

#include <cmath>
#include <limits>

#include "expfbf/errors.hpp"

namespace expfbf::koopman {

ObservableSet ObservableSet::identity(int state_dim) {
    return {ObservableKind::identity, state_dim, std::nullopt};
}

ObservableSet ObservableSet::cubic(int state_dim) {
    return {ObservableKind::cubic, state_dim, std::nullopt};
}

ObservableSet ObservableSet::quadratic(int state_dim) {
    return {ObservableKind::quadratic, state_dim, std::nullopt};
}

ObservableSet ObservableSet::gq(int state_dim, features::FourierFeatureMap map) {
    if (map.dim() != state_dim)
        throw InvalidInputError("gq observable map dimension must equal the state dimension");
    return {ObservableKind::gq, state_dim, std::move(map)};
}

int ObservableSet::lifted_dim() const {
    switch (kind) {
        case ObservableKind::identity: return state_dim;
        case ObservableKind::cubic: return 2 * state_dim;
        case ObservableKind::quadratic: return 2 * state_dim;
        case ObservableKind::gq: return state_dim + gq_map->feature_dim();
    }
    throw InvalidInputError("unknown observable kind");
}

std::string ObservableSet::name() const {
    switch (kind) {
        case ObservableKind::identity: return "dmd";
        case ObservableKind::cubic: return "koopman_k1";
        case ObservableKind::quadratic: return "koopman_k2";
        case ObservableKind::gq: return "koopman_gq";
    }
    throw InvalidInputError("unknown observable kind");
}

ComplexMatrix lift(const ComplexMatrix& x, const ObservableSet& obs) {
    if (!x.allFinite()) throw InvalidInputError("lift needs finite snapshots");
    if (x.rows() != obs.state_dim)
        throw InvalidInputError("snapshot rows do not match the observable state dimension");
    if (obs.kind == ObservableKind::identity) return x;

    ComplexMatrix out(obs.lifted_dim(), x.cols());
    out.topRows(obs.state_dim) = x;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const auto col = x.col(c);
        switch (obs.kind) {
            case ObservableKind::cubic:
                out.col(c).tail(obs.state_dim) =
                    col.cwiseAbs2().cast<std::complex<double>>().cwiseProduct(col);
                break;
            case ObservableKind::quadratic:
                out.col(c).tail(obs.state_dim) =
                    col.cwiseAbs2().cast<std::complex<double>>();
                break;
            case ObservableKind::gq:
                out.col(c).tail(obs.gq_map->feature_dim()) =
                    obs.gq_map->eval(col.real()).cast<std::complex<double>>();
                break;
            default: break;
        }
    }
    return out;
}

int numerical_rank(const ComplexMatrix& x, double tol) {
    const auto svd = numerics::svd_complex(x);
    if (svd.s.size() == 0 || svd.s[0] <= 0.0) return 0;
    int rank = 0;
    while (rank < svd.s.size() && svd.s[rank] >= tol * svd.s[0]) ++rank;
    return rank;
}

DmdModel dmd_fit(const ComplexMatrix& x, const ComplexMatrix& x_next, int rank, double dt,
                 ObservableSet obs) {
    if (x.cols() != x_next.cols() || x.rows() != x_next.rows())
        throw InvalidInputError("snapshot matrices must have equal shapes");
    if (x.cols() < 1) throw InvalidInputError("dmd_fit needs at least one snapshot pair");
    if (rank < 1 || rank > std::min(x.rows(), x.cols()))
        throw InvalidInputError("dmd_fit rank out of range");

    const auto svd = numerics::svd_complex(x);
    if (svd.s[rank - 1] < 1e-12 * svd.s[0])
        throw NumericFailureError("requested rank exceeds the numerical rank of the data",
                                  rank);
    const ComplexMatrix u_r = svd.u.leftCols(rank);
    const ComplexMatrix v_s = svd.v.leftCols(rank) *
                              svd.s.head(rank).cwiseInverse().asDiagonal();
    const ComplexMatrix reduced = u_r.adjoint() * x_next * v_s;
    const auto eig = numerics::eig_complex(reduced);

    DmdModel model;
    model.rank = rank;
    model.eigenvalues = eig.values;
    model.modes = x_next * v_s * eig.vectors;
    model.amplitudes = numerics::lstsq_complex(model.modes, x.col(0));
    model.dt = dt;
    if (obs.state_dim == 0) obs = ObservableSet::identity(static_cast<int>(x.rows()));
    model.observables = obs;
    return model;
}

ComplexMatrix koopman_predict(const DmdModel& model, int steps) {
    if (steps < 0) throw InvalidInputError("koopman_predict needs steps >= 0");
    ComplexMatrix out(model.modes.rows(), steps + 1);
    ComplexVector scaled = model.amplitudes;
    for (int k = 0; k <= steps; ++k) {
        out.col(k) = model.modes * scaled;
        scaled = scaled.cwiseProduct(model.eigenvalues);
    }
    return out;
}

Matrix read_out(const ComplexMatrix& lifted, int state_dim) {
    if (state_dim > lifted.rows())
        throw InvalidInputError("state dimension exceeds the lifted dimension");
    return lifted.topRows(state_dim).real();
}

Spectra spectra(const DmdModel& model) {
    Spectra out;
    out.eigenvalues = model.eigenvalues;
    out.exponents.resize(model.eigenvalues.size());
    out.excluded.assign(model.eigenvalues.size(), false);
    for (Eigen::Index k = 0; k < model.eigenvalues.size(); ++k) {
        const auto lambda = model.eigenvalues[k];
        if (lambda == std::complex<double>(0.0, 0.0)) {
            out.excluded[k] = true;
            out.exponents[k] = {std::numeric_limits<double>::quiet_NaN(),
                                std::numeric_limits<double>::quiet_NaN()};
            continue;
        }
        out.exponents[k] = std::log(lambda) / model.dt;
    }
    return out;
}

MseResult reconstruction_mse(const Matrix& predicted, const Matrix& truth) {
    if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols())
        throw InvalidInputError("reconstruction_mse needs equal shapes");
    MseResult out;
    out.per_time = (predicted - truth).cwiseAbs2().colwise().sum().transpose();
    out.total = out.per_time.sum();
    return out;
}

}  // namespace expfbf::koopman
