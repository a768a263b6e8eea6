#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace expfbf::numerics {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

struct SvdResult {
    Matrix u;       // orthonormal columns
    Vector s;       // nonnegative, descending
    Matrix v;       // orthonormal columns; A = u * s.asDiagonal() * v^T
};

struct EigResult {
    ComplexVector values;
    ComplexMatrix vectors;  // unit-norm columns, A v_k = lambda_k v_k
};

// Thin SVD. Throws InvalidInputError on non-finite input,
// NumericFailureError on non-convergence.
SvdResult svd(const Matrix& a);

// General (possibly complex) spectrum of a real square matrix.
EigResult eig_general(const Matrix& a);

// Solve M X = B for symmetric positive definite M. M is symmetrized before
// factorization; asymmetry beyond `sym_tol` (max-abs) is rejected. A Cholesky
// pivot below `pivot_tol` raises NumericFailureError carrying the pivot index.
Matrix spd_solve(const Matrix& m, const Matrix& b,
                 double sym_tol = 1e-9, double pivot_tol = 1e-12);

// min ||C a - d||_2 subject to a >= 0 (Lawson-Hanson active set).
// Ties in the entering-variable choice break toward the smallest index.
Vector nnls(const Matrix& c, const Vector& d);

// Radix-2 FFT; length must be a power of two. Forward is unnormalized,
// inverse carries the 1/N factor so ifft(fft(x)) == x.
std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x);
std::vector<std::complex<double>> ifft(const std::vector<std::complex<double>>& x);

// Complex helpers used by the Koopman fits; same contracts as the real svd.
struct ComplexSvdResult {
    ComplexMatrix u;
    Vector s;
    ComplexMatrix v;  // A = u * s.asDiagonal() * v.adjoint()
};
ComplexSvdResult svd_complex(const ComplexMatrix& a);

// Least-squares solve of A x = b (complex, possibly rank deficient).
ComplexVector lstsq_complex(const ComplexMatrix& a, const ComplexVector& b);

// Spectrum of a complex square matrix; unit-norm eigenvector columns.
EigResult eig_complex(const ComplexMatrix& a);

}  // namespace expfbf::numerics
