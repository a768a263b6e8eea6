#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <variant>
#include <vector>

#include <json.hpp>

namespace expfbf::features {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Exponent tuple of a monomial x^alpha.
using MultiIndex = std::vector<int>;

// All multi-indices of total degree <= order in `dim` variables, in graded
// lexicographic order: degree ascending, and within a degree the leading
// coordinate's exponent descending. Count is C(dim+order, order).
std::vector<MultiIndex> enumerate_multi_indices(int dim, int order,
                                                std::uint64_t count_cap = (1ull << 26));

std::uint64_t multi_index_count(int dim, int order);

// k(x, x') = exp(-a ||x - x'||^2), a = 1/(2 sigma^2).
double gaussian_kernel(const Vector& x, const Vector& y, double a);

// Truncation bound (||x|| ||x'|| / sigma^2)^(r+1) / (r+1)! dominating
// |k - k_tilde| for the degree-r Taylor features.
double taylor_bound(const Vector& x, const Vector& y, double sigma, int order);

// Truncated Taylor-series features of the Gaussian kernel:
// entry for alpha is exp(-||x||^2 / 2 sigma^2) * x^alpha / (sigma^|alpha| sqrt(alpha!)).
class TaylorFeatureMap {
public:
    TaylorFeatureMap() = default;
    TaylorFeatureMap(int dim, int order, double sigma);

    int dim() const { return dim_; }
    int order() const { return order_; }
    double sigma() const { return sigma_; }
    int feature_dim() const { return static_cast<int>(coeffs_.size()); }
    const Eigen::MatrixXi& exponents() const { return exponents_; }
    const Vector& coefficients() const { return coeffs_; }

    Vector eval(const Vector& x) const;
    Matrix jacobian(const Vector& x) const;

private:
    int dim_ = 0;
    int order_ = 0;
    double sigma_ = 1.0;
    Eigen::MatrixXi exponents_;  // feature_dim x dim
    Vector coeffs_;
};

// Frequency nodes with nonnegative weights for the standard normal spectral
// measure of the unit-width Gaussian kernel.
struct QuadratureRule {
    Matrix nodes;              // n x dim
    Vector weights;            // n, sum 1
    int degree = 0;            // polynomial exactness
    double moment_residual = 0.0;

    int dim() const { return static_cast<int>(nodes.cols()); }
    Eigen::Index size() const { return nodes.rows(); }
};

// Gaussian moment E[prod omega_l^{r_l}] for the standard normal: products of
// double factorials, zero when any exponent is odd.
double gaussian_moment(const MultiIndex& r);

// 1-D Gauss-Hermite rule for the standard normal, `points` nodes, exact for
// polynomials up to degree 2*points - 1. Nodes from the symmetric tridiagonal
// Jacobi matrix, then symmetrized so paired nodes are exact negatives.
QuadratureRule gauss_hermite_1d(int points);

// Tensor-product rule exact up to total degree R in d dimensions, built from
// ceil((R+1)/2)-point 1-D rules. Node count n1^d is capped.
QuadratureRule gauss_hermite_rule(int degree, int dim, std::uint64_t node_cap = 1000000);

// Draw `target` nodes with replacement proportionally to the rule weights;
// output weights are uniform 1/target.
QuadratureRule subsample_rule(const QuadratureRule& rule, Eigen::Index target,
                              std::uint64_t seed);

// Subsample a d-dimensional tensor product of a 1-D rule without materializing
// the grid: each coordinate is drawn independently from the 1-D weights.
QuadratureRule subsample_tensor_rule(const QuadratureRule& rule_1d, int dim,
                                     Eigen::Index target, std::uint64_t seed);

// Fit nonnegative weights on the given candidate nodes so all moment
// constraints of total degree <= R hold in least squares; zero-weight
// candidates are dropped. Throws RuleQualityError when the moment residual
// exceeds the threshold.
QuadratureRule nnls_rule(const Matrix& candidates, int degree,
                         double residual_threshold = 1e-8);

// Real cosine/sine features at frequency nodes, interleaved per node as
// (cos, sin) so that k_tilde(x, x) = sum of weights = 1 exactly. Nodes are for
// the unit-width measure; evaluation divides by sigma.
class FourierFeatureMap {
public:
    FourierFeatureMap() = default;
    FourierFeatureMap(QuadratureRule rule, double sigma, std::uint64_t seed = 0);

    // Random Fourier features: `nodes` standard normal frequency draws.
    static FourierFeatureMap random(int dim, Eigen::Index nodes, double sigma,
                                    std::uint64_t seed);

    int dim() const { return rule_.dim(); }
    int feature_dim() const { return static_cast<int>(2 * rule_.size()); }
    double sigma() const { return sigma_; }
    std::uint64_t seed() const { return seed_; }
    const QuadratureRule& rule() const { return rule_; }

    Vector eval(const Vector& x) const;
    Matrix jacobian(const Vector& x) const;

private:
    QuadratureRule rule_;
    double sigma_ = 1.0;
    std::uint64_t seed_ = 0;
    Vector sqrt_weights_;
};

// Tagged union of the map kinds with a common evaluation surface and the JSON
// descriptor used by filter checkpoints and experiment configs.
class FeatureMap {
public:
    FeatureMap() = default;
    explicit FeatureMap(TaylorFeatureMap map) : impl_(std::move(map)) {}
    explicit FeatureMap(FourierFeatureMap map) : impl_(std::move(map)) {}

    int dim() const;
    int feature_dim() const;
    Vector eval(const Vector& x) const;
    Matrix jacobian(const Vector& x) const;
    bool is_taylor() const { return std::holds_alternative<TaylorFeatureMap>(impl_); }

    nlohmann::json to_json() const;
    static FeatureMap from_json(const nlohmann::json& j);

private:
    std::variant<TaylorFeatureMap, FourierFeatureMap> impl_;
};

}  // namespace expfbf::features
