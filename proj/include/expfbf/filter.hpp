#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "expfbf/features.hpp"

namespace expfbf::filter {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// How the state propagates through the learned operator:
//  input_state:   s' = A psi(s_head) + B phi(u), s = [x; y]
//  feature_state: the state lives in feature space, s' = A s (+ B phi(u))
//  concat:        s = [x; psi(x)] propagated linearly, originals recoverable
enum class StateMode { input_state, feature_state, concat };

// Full keeps the dense n_omega x n_omega weight covariance; per_state_block
// keeps one (D_psi + D_phi)-sized block per state coordinate under a shared
// state covariance; per_state_joint runs one exact joint (state, weight-row)
// covariance per state coordinate, which keeps every block positive
// semidefinite at any gain scale.
enum class CovarianceLayout { full, per_state_block, per_state_joint };

struct FilterConfig {
    int n_u = 0;
    int n_x = 1;
    int n_y = 1;
    StateMode mode = StateMode::input_state;
    features::FeatureMap psi;
    std::optional<features::FeatureMap> phi;
    double sigma_s = 0.1;
    double sigma_y = 0.1;
    double sigma_omega = 0.0;
    double p4_init = 1.0;
    double kappa1 = 1.0;
    double kappa2 = 1.0;
    CovarianceLayout layout = CovarianceLayout::per_state_block;
    // First measured coordinate; -1 resolves to the mode default (leading
    // block for concat, trailing block otherwise). Range length is n_y.
    int meas_begin = -1;
    bool relift = true;
    std::uint64_t seed = 0;
};

struct FilterModel {
    FilterConfig config;  // with meas_begin resolved
    int n_s = 0;
    int d_a = 0;     // regressor length for A (D_psi, or n_s in the linear modes)
    int d_b = 0;     // regressor length for B (0 without an input map)
    int d_zeta = 0;  // d_a + d_b
    int n_omega = 0;

    Vector s;
    Matrix a;  // n_s x d_a
    Matrix b;  // n_s x d_b
    Matrix p1;                      // shared state covariance (full, per-state-block)
    std::vector<Matrix> p1_blocks;  // per-state-joint, n_s blocks of n_s^2
    // Weight-block covariance columns. Per-state layouts: block k in columns
    // [k d_zeta, (k+1) d_zeta) covering (A row k, B row k). Full layout:
    // row-major A entries first, then row-major B entries.
    Matrix p2;
    std::vector<Matrix> p4_blocks;  // per-state layouts, n_s blocks of d_zeta^2
    Matrix p4;                      // full layout
    long step = 0;
};

struct StepReport {
    Vector prior_state;
    Vector prior_output;
    Vector innovation;
    Vector posterior_state;
    Vector posterior_output;
    double prior_sq_err = std::numeric_limits<double>::quiet_NaN();
    double posterior_sq_err = std::numeric_limits<double>::quiet_NaN();
};

struct CovarianceHealth {
    double p1_asymmetry = 0.0;
    double p4_asymmetry = 0.0;
    double p1_min_eigenvalue = 0.0;
};

FilterModel init_filter(const FilterConfig& config);

// Regressor fed to A: the lifted state head in input_state mode, the state
// itself in the linear modes.
Vector regressor(const FilterModel& model, const Vector& s);

// Joint regressor [regressor; phi(u)]; this row vector replicated per state
// coordinate is the structural form of the weight Jacobian. Pass an empty u
// when the config has no input map.
Vector joint_regressor(const FilterModel& model, const Vector& s, const Vector& u);

Vector state_transition(const FilterModel& model, const Vector& u);

Matrix jacobian_F1(const FilterModel& model);

// F2 P4 F2^T for the current weight covariance, computed without
// materializing F2.
Matrix weight_output_covariance(const FilterModel& model, const Vector& zeta);

// Advances state and covariances to the prior at the next step; returns the
// state Jacobian and the joint regressor used.
struct PredictResult {
    Matrix f1;
    Vector zeta;
};
PredictResult predict(FilterModel& model, const Vector& u);

StepReport update(FilterModel& model, const Vector& d,
                  const Vector* clean_reference = nullptr);

// Fold of predict + update over a measurement sequence. Inputs may be empty
// when the config has no input map; clean references are optional per step.
std::vector<StepReport> run_sequence(FilterModel& model,
                                     const std::vector<Vector>& inputs,
                                     const std::vector<Vector>& measurements,
                                     const std::vector<Vector>* clean = nullptr);

CovarianceHealth covariance_health(const FilterModel& model);

nlohmann::json config_to_json(const FilterConfig& config);
FilterConfig config_from_json(const nlohmann::json& j);

void save_model(const FilterModel& model, const std::string& path);
FilterModel load_model(const std::string& path);

}  // namespace expfbf::filter
