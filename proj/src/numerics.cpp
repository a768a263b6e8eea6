#include "expfbf/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "expfbf/errors.hpp"

namespace expfbf::numerics {

namespace {

void require_finite(const Matrix& a, const char* who) {
    if (!a.allFinite()) throw InvalidInputError(std::string(who) + ": non-finite input");
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

SvdResult svd(const Matrix& a) {
    require_finite(a, "svd");
    Eigen::JacobiSVD<Matrix> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (solver.info() != Eigen::Success) throw NumericFailureError("svd: did not converge");
    return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

EigResult eig_general(const Matrix& a) {
    require_finite(a, "eig_general");
    if (a.rows() != a.cols()) throw InvalidInputError("eig_general: matrix not square");
    Eigen::EigenSolver<Matrix> solver(a);
    if (solver.info() != Eigen::Success) throw NumericFailureError("eig_general: did not converge");
    ComplexMatrix vectors = solver.eigenvectors();
    for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
        const double norm = vectors.col(k).norm();
        if (norm > 0.0) vectors.col(k) /= norm;
    }
    return {solver.eigenvalues(), vectors};
}

Matrix spd_solve(const Matrix& m, const Matrix& b, double sym_tol, double pivot_tol) {
    require_finite(m, "spd_solve");
    require_finite(b, "spd_solve");
    if (m.rows() != m.cols()) throw InvalidInputError("spd_solve: matrix not square");
    if (m.rows() != b.rows()) throw InvalidInputError("spd_solve: dimension mismatch");

    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > sym_tol)
        throw InvalidInputError("spd_solve: asymmetry " + std::to_string(asym) +
                                " exceeds tolerance");

    const Eigen::Index n = m.rows();
    Matrix sym = 0.5 * (m + m.transpose());

    // Unpivoted Cholesky so the failing pivot index is well defined.
    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = sym(j, j) - l.row(j).head(j).squaredNorm();
        if (d < pivot_tol)
            throw NumericFailureError(
                "spd_solve: pivot " + std::to_string(d) + " below tolerance at index " +
                    std::to_string(j),
                j);
        l(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = sym(i, j) - l.row(i).head(j).dot(l.row(j).head(j));
            l(i, j) = s / l(j, j);
        }
    }

    Matrix x = l.triangularView<Eigen::Lower>().solve(b);
    return l.transpose().triangularView<Eigen::Upper>().solve(x);
}

Vector nnls(const Matrix& c, const Vector& d) {
    require_finite(c, "nnls");
    if (!d.allFinite()) throw InvalidInputError("nnls: non-finite rhs");
    if (c.rows() != d.size()) throw InvalidInputError("nnls: row count mismatch");

    const Eigen::Index n = c.cols();
    Vector x = Vector::Zero(n);
    std::vector<bool> passive(n, false);
    Eigen::Index n_passive = 0;

    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff() * d.cwiseAbs().maxCoeff());
    const double grad_tol = 1e-12 * scale;

    const int max_outer = static_cast<int>(3 * n) + 30;
    for (int outer = 0; outer < max_outer; ++outer) {
        Vector w = c.transpose() * (d - c * x);

        // Entering variable: largest gradient among active coordinates,
        // smallest index on ties.
        Eigen::Index enter = -1;
        double best = grad_tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[j] && w[j] > best) {
                best = w[j];
                enter = j;
            }
        }
        if (enter < 0) break;
        passive[enter] = true;
        ++n_passive;

        for (int inner = 0; inner < max_outer; ++inner) {
            // Least squares on the passive set.
            Matrix cp(c.rows(), n_passive);
            std::vector<Eigen::Index> cols;
            cols.reserve(n_passive);
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[j]) {
                    cp.col(static_cast<Eigen::Index>(cols.size())) = c.col(j);
                    cols.push_back(j);
                }
            Vector z = cp.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(d);

            bool all_positive = true;
            for (Eigen::Index k = 0; k < z.size(); ++k)
                if (z[k] <= 0.0) {
                    all_positive = false;
                    break;
                }
            if (all_positive) {
                x.setZero();
                for (std::size_t k = 0; k < cols.size(); ++k) x[cols[k]] = z[static_cast<Eigen::Index>(k)];
                break;
            }

            // Step toward z until the first passive coordinate hits zero.
            double alpha = 1.0;
            for (std::size_t k = 0; k < cols.size(); ++k) {
                const Eigen::Index j = cols[k];
                const double zk = z[static_cast<Eigen::Index>(k)];
                if (zk <= 0.0) {
                    const double denom = x[j] - zk;
                    if (denom > 0.0) alpha = std::min(alpha, x[j] / denom);
                }
            }
            for (std::size_t k = 0; k < cols.size(); ++k) {
                const Eigen::Index j = cols[k];
                x[j] += alpha * (z[static_cast<Eigen::Index>(k)] - x[j]);
            }
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[j] && x[j] <= 1e-14 * std::max(1.0, scale)) {
                    x[j] = 0.0;
                    passive[j] = false;
                    --n_passive;
                }
            }
            if (n_passive == 0) break;
        }
    }
    return x;
}

namespace {

// Iterative radix-2 Cooley-Tukey; sign = -1 forward, +1 inverse.
void fft_in_place(std::vector<std::complex<double>>& a, int sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = sign * 2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

}  // namespace

std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x) {
    if (!is_power_of_two(x.size()))
        throw InvalidInputError("fft: length " + std::to_string(x.size()) +
                                " is not a power of two");
    auto out = x;
    fft_in_place(out, -1);
    return out;
}

std::vector<std::complex<double>> ifft(const std::vector<std::complex<double>>& x) {
    if (!is_power_of_two(x.size()))
        throw InvalidInputError("ifft: length " + std::to_string(x.size()) +
                                " is not a power of two");
    auto out = x;
    fft_in_place(out, +1);
    const double inv = 1.0 / static_cast<double>(out.size());
    for (auto& v : out) v *= inv;
    return out;
}

ComplexSvdResult svd_complex(const ComplexMatrix& a) {
    if (!a.allFinite()) throw InvalidInputError("svd_complex: non-finite input");
    Eigen::JacobiSVD<ComplexMatrix> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (solver.info() != Eigen::Success) throw NumericFailureError("svd_complex: did not converge");
    return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

ComplexVector lstsq_complex(const ComplexMatrix& a, const ComplexVector& b) {
    if (!a.allFinite() || !b.allFinite())
        throw InvalidInputError("lstsq_complex: non-finite input");
    return a.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
}

EigResult eig_complex(const ComplexMatrix& a) {
    if (a.rows() != a.cols()) throw InvalidInputError("eig_complex: matrix must be square");
    if (!a.allFinite()) throw InvalidInputError("eig_complex: non-finite input");
    Eigen::ComplexEigenSolver<ComplexMatrix> solver(a);
    if (solver.info() != Eigen::Success)
        throw NumericFailureError("eig_complex: did not converge");
    EigResult out{solver.eigenvalues(), solver.eigenvectors()};
    for (Eigen::Index k = 0; k < out.vectors.cols(); ++k) {
        const double norm = out.vectors.col(k).norm();
        if (norm > 0.0) out.vectors.col(k) /= norm;
    }
    return out;
}

}  // namespace expfbf::numerics
