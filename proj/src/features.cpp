#include "expfbf/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "expfbf/errors.hpp"
#include "expfbf/numerics.hpp"
#include "expfbf/rng.hpp"

namespace expfbf::features {

namespace {

std::uint64_t checked_mul_div(std::uint64_t acc, std::uint64_t num, std::uint64_t den) {
    if (num != 0 && acc > std::numeric_limits<std::uint64_t>::max() / num)
        throw CapacityError("feature count overflows 64-bit range");
    return acc * num / den;
}

double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

}  // namespace

std::uint64_t multi_index_count(int dim, int order) {
    if (dim < 1 || order < 0)
        throw InvalidInputError("multi_index_count needs dim >= 1 and order >= 0");
    // C(dim + order, order) built incrementally so every prefix is an exact
    // binomial and the division stays integral.
    std::uint64_t count = 1;
    for (int k = 1; k <= order; ++k)
        count = checked_mul_div(count, static_cast<std::uint64_t>(dim + k), k);
    return count;
}

std::vector<MultiIndex> enumerate_multi_indices(int dim, int order, std::uint64_t count_cap) {
    const std::uint64_t count = multi_index_count(dim, order);
    if (count > count_cap)
        throw CapacityError("multi-index count " + std::to_string(count) +
                            " exceeds cap " + std::to_string(count_cap));
    std::vector<MultiIndex> out;
    out.reserve(count);
    MultiIndex alpha(dim, 0);
    for (int deg = 0; deg <= order; ++deg) {
        // Within a degree, walk exponents with the first coordinate descending:
        // start at (deg, 0, ..., 0) and repeatedly move one unit from the
        // rightmost positive non-terminal coordinate to its successor.
        std::fill(alpha.begin(), alpha.end(), 0);
        alpha[0] = deg;
        while (true) {
            out.push_back(alpha);
            int j = dim - 2;
            while (j >= 0 && alpha[j] == 0) --j;
            if (j < 0) break;
            --alpha[j];
            const int tail = alpha[dim - 1];
            alpha[dim - 1] = 0;
            alpha[j + 1] = tail + 1;
        }
    }
    return out;
}

double gaussian_kernel(const Vector& x, const Vector& y, double a) {
    if (x.size() != y.size())
        throw InvalidInputError("gaussian_kernel arguments differ in dimension");
    return std::exp(-a * (x - y).squaredNorm());
}

double taylor_bound(const Vector& x, const Vector& y, double sigma, int order) {
    const double t = x.norm() * y.norm() / (sigma * sigma);
    double bound = 1.0;
    for (int k = 1; k <= order + 1; ++k) bound *= t / k;
    return bound;
}

TaylorFeatureMap::TaylorFeatureMap(int dim, int order, double sigma)
    : dim_(dim), order_(order), sigma_(sigma) {
    if (sigma <= 0.0) throw InvalidInputError("taylor features need sigma > 0");
    const auto indices = enumerate_multi_indices(dim, order);
    const auto n = static_cast<Eigen::Index>(indices.size());
    exponents_.resize(n, dim);
    coeffs_.resize(n);
    for (Eigen::Index l = 0; l < n; ++l) {
        double fact = 1.0;
        int deg = 0;
        for (int j = 0; j < dim; ++j) {
            exponents_(l, j) = indices[l][j];
            fact *= factorial(indices[l][j]);
            deg += indices[l][j];
        }
        coeffs_[l] = 1.0 / (std::pow(sigma, deg) * std::sqrt(fact));
    }
}

Vector TaylorFeatureMap::eval(const Vector& x) const {
    if (x.size() != dim_) throw InvalidInputError("taylor eval dimension mismatch");
    if (!x.allFinite()) throw InvalidInputError("taylor eval needs finite input");
    // Powers of each coordinate up to the order, by repeated multiplication.
    Matrix pw(dim_, order_ + 1);
    pw.col(0).setOnes();
    for (int k = 1; k <= order_; ++k) pw.col(k) = pw.col(k - 1).cwiseProduct(x);
    const double pref = std::exp(-x.squaredNorm() / (2.0 * sigma_ * sigma_));
    Vector out(coeffs_.size());
    for (Eigen::Index l = 0; l < coeffs_.size(); ++l) {
        double mono = 1.0;
        for (int j = 0; j < dim_; ++j) mono *= pw(j, exponents_(l, j));
        out[l] = pref * coeffs_[l] * mono;
    }
    return out;
}

Matrix TaylorFeatureMap::jacobian(const Vector& x) const {
    if (x.size() != dim_) throw InvalidInputError("taylor jacobian dimension mismatch");
    Matrix pw(dim_, order_ + 1);
    pw.col(0).setOnes();
    for (int k = 1; k <= order_; ++k) pw.col(k) = pw.col(k - 1).cwiseProduct(x);
    const double inv_s2 = 1.0 / (sigma_ * sigma_);
    const double pref = std::exp(-x.squaredNorm() * 0.5 * inv_s2);
    Matrix jac(coeffs_.size(), dim_);
    for (Eigen::Index l = 0; l < coeffs_.size(); ++l) {
        double mono = 1.0;
        for (int j = 0; j < dim_; ++j) mono *= pw(j, exponents_(l, j));
        const double phi = pref * coeffs_[l] * mono;
        for (int m = 0; m < dim_; ++m) {
            const int e = exponents_(l, m);
            // Monomial with one exponent lowered, kept in product form so the
            // derivative is exactly zero when the exponent is zero.
            double dmono = 0.0;
            if (e > 0) {
                dmono = e * pw(m, e - 1);
                for (int j = 0; j < dim_; ++j)
                    if (j != m) dmono *= pw(j, exponents_(l, j));
            }
            jac(l, m) = pref * coeffs_[l] * dmono - phi * x[m] * inv_s2;
        }
    }
    return jac;
}

double gaussian_moment(const MultiIndex& r) {
    double moment = 1.0;
    for (int e : r) {
        if (e < 0) throw InvalidInputError("gaussian_moment needs nonnegative exponents");
        if (e % 2 == 1) return 0.0;
        for (int k = e - 1; k >= 1; k -= 2) moment *= k;
    }
    return moment;
}

QuadratureRule gauss_hermite_1d(int points) {
    if (points < 1) throw InvalidInputError("gauss_hermite_1d needs points >= 1");
    QuadratureRule rule;
    rule.degree = 2 * points - 1;
    rule.nodes.resize(points, 1);
    rule.weights.resize(points);
    if (points == 1) {
        rule.nodes(0, 0) = 0.0;
        rule.weights[0] = 1.0;
        return rule;
    }
    // Jacobi matrix of the probabilists' Hermite recurrence: zero diagonal,
    // off-diagonal sqrt(k). Eigenvalues are the nodes; weights come from the
    // first component of each eigenvector (measure has total mass one).
    Matrix jac = Matrix::Zero(points, points);
    for (int k = 1; k < points; ++k) {
        jac(k, k - 1) = std::sqrt(static_cast<double>(k));
        jac(k - 1, k) = jac(k, k - 1);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(jac);
    if (es.info() != Eigen::Success)
        throw NumericFailureError("gauss_hermite_1d eigendecomposition failed");
    for (int i = 0; i < points; ++i) {
        rule.nodes(i, 0) = es.eigenvalues()[i];
        const double v0 = es.eigenvectors()(0, i);
        rule.weights[i] = v0 * v0;
    }
    // Enforce the exact +/- symmetry the analytic rule has.
    for (int i = 0; i < points / 2; ++i) {
        const int j = points - 1 - i;
        const double node = 0.5 * (rule.nodes(j, 0) - rule.nodes(i, 0));
        rule.nodes(i, 0) = -node;
        rule.nodes(j, 0) = node;
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.weights[i] = w;
        rule.weights[j] = w;
    }
    if (points % 2 == 1) rule.nodes(points / 2, 0) = 0.0;
    rule.weights /= rule.weights.sum();
    return rule;
}

QuadratureRule gauss_hermite_rule(int degree, int dim, std::uint64_t node_cap) {
    if (degree < 1 || dim < 1)
        throw InvalidInputError("gauss_hermite_rule needs degree >= 1 and dim >= 1");
    const int n1 = (degree + 2) / 2;
    std::uint64_t total = 1;
    for (int j = 0; j < dim; ++j) {
        if (total > node_cap / static_cast<std::uint64_t>(n1))
            throw CapacityError("tensor rule would need more than " +
                                std::to_string(node_cap) + " nodes");
        total *= static_cast<std::uint64_t>(n1);
    }
    const QuadratureRule base = gauss_hermite_1d(n1);
    QuadratureRule rule;
    rule.degree = degree;
    rule.nodes.resize(static_cast<Eigen::Index>(total), dim);
    rule.weights.resize(static_cast<Eigen::Index>(total));
    std::vector<int> idx(dim, 0);
    for (Eigen::Index row = 0; row < rule.nodes.rows(); ++row) {
        double w = 1.0;
        for (int j = 0; j < dim; ++j) {
            rule.nodes(row, j) = base.nodes(idx[j], 0);
            w *= base.weights[idx[j]];
        }
        rule.weights[row] = w;
        for (int j = dim - 1; j >= 0; --j) {
            if (++idx[j] < n1) break;
            idx[j] = 0;
        }
    }
    return rule;
}

namespace {

// Inverse-CDF draw over a weight vector; cumulative sums are rebuilt by the
// caller once per rule.
Eigen::Index draw_index(const Vector& cumulative, double u) {
    const double target = u * cumulative[cumulative.size() - 1];
    Eigen::Index lo = 0, hi = cumulative.size() - 1;
    while (lo < hi) {
        const Eigen::Index mid = (lo + hi) / 2;
        if (cumulative[mid] < target)
            lo = mid + 1;
        else
            hi = mid;
    }
    return lo;
}

Vector cumulative_weights(const Vector& w) {
    Vector c(w.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w[i] < 0.0) throw InvalidInputError("subsampling needs nonnegative weights");
        acc += w[i];
        c[i] = acc;
    }
    if (acc <= 0.0) throw InvalidInputError("subsampling needs positive total weight");
    return c;
}

}  // namespace

QuadratureRule subsample_rule(const QuadratureRule& rule, Eigen::Index target,
                              std::uint64_t seed) {
    if (rule.size() == 0) throw InvalidInputError("cannot subsample an empty rule");
    if (target < 1) throw InvalidInputError("subsample target must be positive");
    const Vector cum = cumulative_weights(rule.weights);
    Rng rng(seed);
    QuadratureRule out;
    out.degree = rule.degree;
    out.nodes.resize(target, rule.dim());
    out.weights = Vector::Constant(target, 1.0 / static_cast<double>(target));
    for (Eigen::Index i = 0; i < target; ++i)
        out.nodes.row(i) = rule.nodes.row(draw_index(cum, rng.uniform01()));
    return out;
}

QuadratureRule subsample_tensor_rule(const QuadratureRule& rule_1d, int dim,
                                     Eigen::Index target, std::uint64_t seed) {
    if (rule_1d.dim() != 1)
        throw InvalidInputError("subsample_tensor_rule needs a 1-D base rule");
    if (dim < 1 || target < 1)
        throw InvalidInputError("subsample_tensor_rule needs dim >= 1 and target >= 1");
    const Vector cum = cumulative_weights(rule_1d.weights);
    Rng rng(seed);
    QuadratureRule out;
    out.degree = rule_1d.degree;
    out.nodes.resize(target, dim);
    out.weights = Vector::Constant(target, 1.0 / static_cast<double>(target));
    for (Eigen::Index i = 0; i < target; ++i)
        for (int j = 0; j < dim; ++j)
            out.nodes(i, j) = rule_1d.nodes(draw_index(cum, rng.uniform01()), 0);
    return out;
}

QuadratureRule nnls_rule(const Matrix& candidates, int degree, double residual_threshold) {
    if (candidates.rows() == 0) throw InvalidInputError("nnls_rule needs candidate nodes");
    const int dim = static_cast<int>(candidates.cols());
    const auto constraints = enumerate_multi_indices(dim, degree);
    const auto n_con = static_cast<Eigen::Index>(constraints.size());
    Matrix c(n_con, candidates.rows());
    Vector d(n_con);
    for (Eigen::Index row = 0; row < n_con; ++row) {
        for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
            double mono = 1.0;
            for (int j = 0; j < dim; ++j)
                mono *= std::pow(candidates(i, j), constraints[row][j]);
            c(row, i) = mono;
        }
        d[row] = gaussian_moment(constraints[row]);
    }
    const Vector w = numerics::nnls(c, d);
    const double residual = (c * w - d).norm();
    if (residual > residual_threshold)
        throw RuleQualityError("moment residual " + std::to_string(residual) +
                                   " exceeds threshold",
                               residual);
    QuadratureRule rule;
    rule.degree = degree;
    rule.moment_residual = residual;
    const auto kept = (w.array() > 0.0).count();
    rule.nodes.resize(kept, dim);
    rule.weights.resize(kept);
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) {
            rule.nodes.row(at) = candidates.row(i);
            rule.weights[at] = w[i];
            ++at;
        }
    }
    return rule;
}

FourierFeatureMap::FourierFeatureMap(QuadratureRule rule, double sigma, std::uint64_t seed)
    : rule_(std::move(rule)), sigma_(sigma), seed_(seed) {
    if (sigma <= 0.0) throw InvalidInputError("fourier features need sigma > 0");
    if (rule_.size() == 0) throw InvalidInputError("fourier features need nodes");
    sqrt_weights_ = rule_.weights.cwiseSqrt();
}

FourierFeatureMap FourierFeatureMap::random(int dim, Eigen::Index nodes, double sigma,
                                            std::uint64_t seed) {
    if (dim < 1 || nodes < 1)
        throw InvalidInputError("random fourier features need dim >= 1 and nodes >= 1");
    Rng rng(seed);
    QuadratureRule rule;
    rule.nodes.resize(nodes, dim);
    for (Eigen::Index i = 0; i < nodes; ++i)
        for (int j = 0; j < dim; ++j) rule.nodes(i, j) = rng.normal();
    rule.weights = Vector::Constant(nodes, 1.0 / static_cast<double>(nodes));
    return FourierFeatureMap(std::move(rule), sigma, seed);
}

Vector FourierFeatureMap::eval(const Vector& x) const {
    if (x.size() != rule_.dim())
        throw InvalidInputError("fourier eval dimension mismatch");
    const Vector phase = rule_.nodes * (x / sigma_);
    Vector out(2 * phase.size());
    for (Eigen::Index i = 0; i < phase.size(); ++i) {
        out[2 * i] = sqrt_weights_[i] * std::cos(phase[i]);
        out[2 * i + 1] = sqrt_weights_[i] * std::sin(phase[i]);
    }
    return out;
}

Matrix FourierFeatureMap::jacobian(const Vector& x) const {
    if (x.size() != rule_.dim())
        throw InvalidInputError("fourier jacobian dimension mismatch");
    const Vector phase = rule_.nodes * (x / sigma_);
    Matrix jac(2 * phase.size(), rule_.dim());
    for (Eigen::Index i = 0; i < phase.size(); ++i) {
        const double c = sqrt_weights_[i] * std::cos(phase[i]) / sigma_;
        const double s = sqrt_weights_[i] * std::sin(phase[i]) / sigma_;
        jac.row(2 * i) = -s * rule_.nodes.row(i);
        jac.row(2 * i + 1) = c * rule_.nodes.row(i);
    }
    return jac;
}

int FeatureMap::dim() const {
    return std::visit([](const auto& m) { return m.dim(); }, impl_);
}

int FeatureMap::feature_dim() const {
    return std::visit([](const auto& m) { return m.feature_dim(); }, impl_);
}

Vector FeatureMap::eval(const Vector& x) const {
    return std::visit([&](const auto& m) { return m.eval(x); }, impl_);
}

Matrix FeatureMap::jacobian(const Vector& x) const {
    return std::visit([&](const auto& m) { return m.jacobian(x); }, impl_);
}

nlohmann::json FeatureMap::to_json() const {
    nlohmann::json j;
    if (const auto* taylor = std::get_if<TaylorFeatureMap>(&impl_)) {
        j["type"] = "taylor";
        j["dim"] = taylor->dim();
        j["order"] = taylor->order();
        j["sigma"] = taylor->sigma();
        return j;
    }
    const auto& fourier = std::get<FourierFeatureMap>(impl_);
    j["type"] = "fourier";
    j["dim"] = fourier.dim();
    j["sigma"] = fourier.sigma();
    j["seed"] = fourier.seed();
    j["degree"] = fourier.rule().degree;
    std::vector<std::vector<double>> nodes(fourier.rule().size());
    for (Eigen::Index i = 0; i < fourier.rule().size(); ++i) {
        nodes[i].resize(fourier.dim());
        for (int k = 0; k < fourier.dim(); ++k) nodes[i][k] = fourier.rule().nodes(i, k);
    }
    j["nodes"] = nodes;
    j["weights"] = std::vector<double>(fourier.rule().weights.begin(),
                                      fourier.rule().weights.end());
    return j;
}

FeatureMap FeatureMap::from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "taylor")
        return FeatureMap(TaylorFeatureMap(j.at("dim").get<int>(), j.at("order").get<int>(),
                                           j.at("sigma").get<double>()));
    if (type != "fourier")
        throw InvalidInputError("unknown feature map type '" + type + "'");
    const auto nodes = j.at("nodes").get<std::vector<std::vector<double>>>();
    const auto weights = j.at("weights").get<std::vector<double>>();
    if (nodes.size() != weights.size())
        throw InvalidInputError("fourier descriptor node/weight count mismatch");
    const int dim = j.at("dim").get<int>();
    QuadratureRule rule;
    rule.degree = j.value("degree", 0);
    rule.nodes.resize(static_cast<Eigen::Index>(nodes.size()), dim);
    rule.weights.resize(static_cast<Eigen::Index>(weights.size()));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (static_cast<int>(nodes[i].size()) != dim)
            throw InvalidInputError("fourier descriptor node dimension mismatch");
        for (int k = 0; k < dim; ++k)
            rule.nodes(static_cast<Eigen::Index>(i), k) = nodes[i][k];
        rule.weights[static_cast<Eigen::Index>(i)] = weights[i];
    }
    return FeatureMap(
        FourierFeatureMap(std::move(rule), j.at("sigma").get<double>(),
                          j.value("seed", std::uint64_t{0})));
}

}  // namespace expfbf::features
