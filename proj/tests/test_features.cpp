#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "expfbf/errors.hpp"
#include "expfbf/features.hpp"
#include "expfbf/rng.hpp"

using expfbf::CapacityError;
using expfbf::InvalidInputError;
using expfbf::Rng;
using expfbf::RuleQualityError;
using namespace expfbf::features;

namespace {

Vector random_point(int dim, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Vector x(dim);
    for (int i = 0; i < dim; ++i) x[i] = rng.uniform(lo, hi);
    return x;
}

double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

// Central finite difference of a feature map column by column.
template <typename Map>
Matrix fd_jacobian(const Map& map, const Vector& x, double h = 1e-5) {
    Matrix j(map.feature_dim(), x.size());
    for (Eigen::Index l = 0; l < x.size(); ++l) {
        Vector hi = x, lo = x;
        hi[l] += h;
        lo[l] -= h;
        j.col(l) = (map.eval(hi) - map.eval(lo)) / (2.0 * h);
    }
    return j;
}

}  // namespace

TEST_CASE("multi-index enumeration in one variable lists the plain degrees") {
    const auto idx = enumerate_multi_indices(1, 2);
    REQUIRE(idx.size() == 3);
    CHECK(idx[0] == MultiIndex{0});
    CHECK(idx[1] == MultiIndex{1});
    CHECK(idx[2] == MultiIndex{2});
}

TEST_CASE("multi-index enumeration is graded with leading exponent descending") {
    const auto idx = enumerate_multi_indices(2, 2);
    const std::vector<MultiIndex> expected{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    CHECK(idx == expected);
}

TEST_CASE("multi-index counts match the binomial formula") {
    CHECK(multi_index_count(5, 4) == 126);
    CHECK(multi_index_count(7, 4) == 330);
    CHECK(enumerate_multi_indices(5, 4).size() == 126);
    CHECK(enumerate_multi_indices(7, 4).size() == 330);
}

TEST_CASE("multi-index enumeration respects the count cap") {
    CHECK_THROWS_AS(enumerate_multi_indices(7, 4, 100), CapacityError);
}

TEST_CASE("gaussian kernel at coincident points and at zero width parameter") {
    Rng rng(11);
    const Vector x = random_point(4, rng);
    const Vector y = random_point(4, rng);
    CHECK(gaussian_kernel(x, x, 0.7) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(gaussian_kernel(x, y, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    Vector a(1), b(1);
    a << 0.0;
    b << 1.0;
    CHECK(gaussian_kernel(a, b, 0.6) == doctest::Approx(std::exp(-0.6)).epsilon(1e-14));
}

TEST_CASE("taylor truncation bound at the origin and at unit-norm points") {
    const Vector zero = Vector::Zero(3);
    Vector e0 = Vector::Zero(3);
    e0[0] = 1.0;
    CHECK(taylor_bound(zero, e0, 1.0, 8) == 0.0);
    CHECK(taylor_bound(e0, e0, 1.0, 8) == doctest::Approx(1.0 / factorial(9)).epsilon(1e-12));
}

TEST_CASE("taylor features at the origin reduce to the constant feature") {
    const TaylorFeatureMap map(3, 4, 1.0);
    const Vector f = map.eval(Vector::Zero(3));
    CHECK(f[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f.tail(f.size() - 1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("taylor self inner product matches the truncated exponential series") {
    const TaylorFeatureMap map(2, 8, 1.0);
    Vector x(2);
    x << 1.0, 0.0;
    double series = 0.0;
    for (int n = 0; n <= 8; ++n) series += 1.0 / factorial(n);
    const Vector f = map.eval(x);
    CHECK(f.dot(f) == doctest::Approx(std::exp(-1.0) * series).epsilon(1e-12));
    CHECK(f.dot(f) <= 1.0 + 1e-12);
}

TEST_CASE("taylor feature inner products stay within the truncation bound") {
    const TaylorFeatureMap map(5, 8, 1.0);
    const double a = 0.5;  // 1 / (2 sigma^2)
    Rng rng(21);
    for (int trial = 0; trial < 300; ++trial) {
        const Vector x = random_point(5, rng);
        const Vector y = random_point(5, rng);
        const double k = gaussian_kernel(x, y, a);
        const double approx = map.eval(x).dot(map.eval(y));
        CHECK(std::abs(k - approx) <= taylor_bound(x, y, 1.0, 8) + 1e-15);
    }
}

TEST_CASE("gaussian moments are double factorial products") {
    CHECK(gaussian_moment({0}) == 1.0);
    CHECK(gaussian_moment({1}) == 0.0);
    CHECK(gaussian_moment({2}) == 1.0);
    CHECK(gaussian_moment({4}) == 3.0);
    CHECK(gaussian_moment({6}) == 15.0);
    CHECK(gaussian_moment({2, 2}) == 1.0);
    CHECK(gaussian_moment({4, 2, 0}) == 3.0);
    CHECK(gaussian_moment({3, 2}) == 0.0);
}

TEST_CASE("small gauss-hermite rules match their closed forms") {
    const auto one = gauss_hermite_1d(1);
    REQUIRE(one.size() == 1);
    CHECK(one.nodes(0, 0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(one.weights[0] == doctest::Approx(1.0).epsilon(1e-14));

    const auto two = gauss_hermite_1d(2);
    REQUIRE(two.size() == 2);
    std::vector<double> nodes{two.nodes(0, 0), two.nodes(1, 0)};
    std::sort(nodes.begin(), nodes.end());
    CHECK(nodes[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(nodes[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(two.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(two.nodes(0, 0) == -two.nodes(1, 0));  // exact negation after symmetrizing
}

TEST_CASE("tensor gauss-hermite rule reproduces all low moments") {
    const auto rule = gauss_hermite_rule(5, 2);
    CHECK(rule.weights.sum() == doctest::Approx(1.0).epsilon(1e-10));
    for (const auto& r : enumerate_multi_indices(2, 5)) {
        double estimate = 0.0;
        for (Eigen::Index j = 0; j < rule.size(); ++j) {
            double term = rule.weights[j];
            for (int l = 0; l < 2; ++l)
                term *= std::pow(rule.nodes(j, l), static_cast<double>(r[l]));
            estimate += term;
        }
        CHECK(std::abs(estimate - gaussian_moment(r)) <= 1e-8);
    }
}

TEST_CASE("tensor gauss-hermite rule refuses to materialize huge grids") {
    CHECK_THROWS_AS(gauss_hermite_rule(9, 10), CapacityError);
}

TEST_CASE("subsampling a rule is seeded and keeps single-node rules intact") {
    const auto rule = gauss_hermite_rule(9, 2);
    const auto a = subsample_rule(rule, 64, 5);
    const auto b = subsample_rule(rule, 64, 5);
    const auto c = subsample_rule(rule, 64, 6);
    CHECK((a.nodes.array() == b.nodes.array()).all());
    CHECK((a.weights.array() == b.weights.array()).all());
    CHECK(!(a.nodes.array() == c.nodes.array()).all());
    CHECK(a.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((a.weights.array() == 1.0 / 64.0).all());

    const auto single = gauss_hermite_1d(1);
    const auto resampled = subsample_rule(single, 4, 9);
    CHECK((resampled.nodes.array() == 0.0).all());
}

TEST_CASE("tensor subsampling draws coordinates from the 1-D node set") {
    const auto base = gauss_hermite_1d(3);
    const auto rule = subsample_tensor_rule(base, 4, 50, 17);
    REQUIRE(rule.size() == 50);
    REQUIRE(rule.dim() == 4);
    const double root3 = std::sqrt(3.0);
    for (Eigen::Index j = 0; j < rule.size(); ++j)
        for (int l = 0; l < 4; ++l) {
            const double v = rule.nodes(j, l);
            const bool known = std::abs(v) <= 1e-12 || std::abs(std::abs(v) - root3) <= 1e-12;
            CHECK(known);
        }
}

TEST_CASE("subsampled quadrature still approximates the kernel") {
    const auto rule = subsample_rule(gauss_hermite_rule(9, 2), 256, 3);
    const FourierFeatureMap map(rule, 1.0);
    Rng rng(31);
    double sq_sum = 0.0;
    const int pairs = 200;
    for (int trial = 0; trial < pairs; ++trial) {
        const Vector x = random_point(2, rng);
        const Vector y = random_point(2, rng);
        const double diff = map.eval(x).dot(map.eval(y)) - gaussian_kernel(x, y, 0.5);
        sq_sum += diff * diff;
    }
    CHECK(std::sqrt(sq_sum / pairs) <= 0.1);
}

TEST_CASE("nnls weights recover the symmetric two-point rule") {
    Matrix candidates(2, 1);
    candidates << -1.0, 1.0;
    const auto rule = nnls_rule(candidates, 3);
    REQUIRE(rule.size() == 2);
    CHECK(rule.weights[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(rule.weights[1] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(rule.moment_residual <= 1e-8);
}

TEST_CASE("nnls rule fits twenty random candidates to cubic exactness") {
    Rng rng(41);
    Matrix candidates(20, 1);
    for (int j = 0; j < 20; ++j) candidates(j, 0) = rng.uniform(-3.0, 3.0);
    const auto rule = nnls_rule(candidates, 3);
    CHECK(rule.moment_residual <= 1e-8);
    CHECK(rule.weights.minCoeff() > 0.0);  // zero-weight candidates are dropped
    CHECK(rule.size() <= 20);
}

TEST_CASE("nnls rule reports failure when the candidates cannot carry the moments") {
    const Matrix candidates = Matrix::Zero(1, 1);
    CHECK_THROWS_AS(nnls_rule(candidates, 2), RuleQualityError);
    try {
        nnls_rule(candidates, 2);
    } catch (const RuleQualityError& e) {
        CHECK(e.residual > 1e-8);
    }
}

TEST_CASE("fourier features have unit self inner product") {
    const FourierFeatureMap quad(gauss_hermite_rule(5, 2), 1.3);
    const FourierFeatureMap rff = FourierFeatureMap::random(3, 64, 1.0, 7);
    Rng rng(51);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector x2 = random_point(2, rng);
        const Vector x3 = random_point(3, rng);
        CHECK(quad.eval(x2).squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(rff.eval(x3).squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("random fourier features approximate the kernel in RMS") {
    const FourierFeatureMap map = FourierFeatureMap::random(3, 256, 1.0, 99);
    CHECK(map.feature_dim() == 512);
    Rng rng(61);
    double sq_sum = 0.0;
    const int pairs = 500;
    for (int trial = 0; trial < pairs; ++trial) {
        const Vector x = random_point(3, rng);
        const Vector y = random_point(3, rng);
        const double diff = map.eval(x).dot(map.eval(y)) - gaussian_kernel(x, y, 0.5);
        sq_sum += diff * diff;
    }
    CHECK(std::sqrt(sq_sum / pairs) <= 0.1);
}

TEST_CASE("taylor jacobian matches finite differences") {
    const TaylorFeatureMap map(3, 4, 0.9);
    Rng rng(71);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector x = random_point(3, rng);
        const Matrix analytic = map.jacobian(x);
        const Matrix numeric = fd_jacobian(map, x);
        const double scale = std::max(1.0, numeric.cwiseAbs().maxCoeff());
        CHECK((analytic - numeric).cwiseAbs().maxCoeff() <= 1e-4 * scale);
    }
}

TEST_CASE("taylor jacobian at the origin picks out the linear monomials") {
    const double sigma = 1.4;
    const TaylorFeatureMap map(2, 3, sigma);
    const Matrix j = map.jacobian(Vector::Zero(2));
    const auto idx = enumerate_multi_indices(2, 3);
    for (std::size_t row = 0; row < idx.size(); ++row) {
        const int degree = idx[row][0] + idx[row][1];
        for (int col = 0; col < 2; ++col) {
            const double expected =
                (degree == 1 && idx[row][col] == 1) ? 1.0 / sigma : 0.0;
            CHECK(j(static_cast<Eigen::Index>(row), col) ==
                  doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("fourier jacobian matches finite differences and vanishes for cosines at zero") {
    const FourierFeatureMap map = FourierFeatureMap::random(3, 16, 1.1, 13);
    Rng rng(81);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector x = random_point(3, rng);
        const Matrix analytic = map.jacobian(x);
        const Matrix numeric = fd_jacobian(map, x);
        const double scale = std::max(1.0, numeric.cwiseAbs().maxCoeff());
        CHECK((analytic - numeric).cwiseAbs().maxCoeff() <= 1e-4 * scale);
    }
    const Matrix j0 = map.jacobian(Vector::Zero(3));
    for (Eigen::Index node = 0; node < 16; ++node)
        CHECK(j0.row(2 * node).cwiseAbs().maxCoeff() <= 1e-14);  // cosine rows
}

TEST_CASE("feature map JSON descriptors round trip to identical evaluations") {
    Rng rng(91);
    const FeatureMap taylor{TaylorFeatureMap(3, 4, 0.8)};
    const FeatureMap fourier{FourierFeatureMap::random(3, 32, 1.2, 55)};
    for (const auto* map : {&taylor, &fourier}) {
        const FeatureMap back = FeatureMap::from_json(map->to_json());
        CHECK(back.dim() == map->dim());
        CHECK(back.feature_dim() == map->feature_dim());
        for (int trial = 0; trial < 5; ++trial) {
            const Vector x = random_point(3, rng);
            // Bitwise identical, not merely close.
            CHECK((back.eval(x).array() == map->eval(x).array()).all());
        }
    }
}
