#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "expfbf/dynamics.hpp"
#include "expfbf/filter.hpp"
#include "expfbf/koopman.hpp"

namespace expfbf::harness {

using numerics::Matrix;
using numerics::Vector;

// Chaotic-series denoising: a delay-embedded noisy signal drives the filter,
// whose one-step output is scored against the clean signal.
struct MgExperimentConfig {
    dynamics::MgParams mg;  // samples must cover train + test
    double snr_db = 10.0;
    int train_samples = 1000;
    int test_samples = 100;
    int embed = 7;  // input delay-embedding length
    int n_x = 5;
    int taylor_order = 4;
    double a_s = 0.6;  // kernel parameter a = 1/(2 sigma^2) for the state map
    double a_u = 1.8;  // and for the input map
    double sigma_s2 = 0.09;
    double sigma_y2 = 0.09;
    double p4_init = 10.0;
    double kappa1 = 0.4;
    double kappa2 = 0.1;
    int batches = 10;
    int batch_steps = 100;
    int ensemble = 10;
    std::uint64_t data_seed = 777;
    std::uint64_t base_seed = 1;  // member k runs with seed base_seed + k
};

MgExperimentConfig mg_benchmark_config();

struct MgMemberStats {
    Vector batch_prior;  // mean squared prior error per batch
    Vector batch_post;
    double test_prior = 0.0;
    double test_post = 0.0;
};

struct MgResult {
    std::vector<MgMemberStats> members;
    Vector batch_prior_mean, batch_prior_std;
    Vector batch_post_mean, batch_post_std;
    double test_prior_mean = 0.0, test_prior_std = 0.0;
    double test_post_mean = 0.0, test_post_std = 0.0;
    double signal_power = 0.0;
    double noise_floor = 0.0;  // measured noisy-vs-clean MSE
    filter::FilterModel final_model;  // ensemble member 0 after training
};

MgResult run_mg_denoise(const MgExperimentConfig& config);

// Soliton reconstruction: DMD/Koopman baselines fit on snapshot pairs and
// evolved open loop; the filter runs online in concat mode over the same
// snapshots. Reconstructions are scored against the clean real-part field.
struct NlsExperimentConfig {
    dynamics::NlsConfig nls;
    int rank = 10;
    int gq_nodes = 64;      // node count of the shared quadrature feature map
    double gq_sigma = 2.0;
    int gq_points_1d = 3;   // 1-D rule size for the product-measure sampling
    std::uint64_t gq_seed = 123;
    double fbf_sigma_s = 0.01;
    double fbf_sigma_y = 0.01;
    double fbf_p4_init = 1.0;
    double fbf_kappa1 = 1.0;
    double fbf_kappa2 = 1.0;
    std::uint64_t fbf_seed = 1;
};

// Presets: "nls21" (c=2, 21 snapshots, rank 10), "nls101" (c=2, 101, 10),
// "nls31" (c=3.1, 101, 30).
NlsExperimentConfig nls_preset(const std::string& name);

struct NlsMethodResult {
    std::string name;
    int requested_rank = 0;   // 0 for the filter row
    int effective_rank = 0;
    double max_abs_eigenvalue = 0.0;
    koopman::Spectra spectra;
    Matrix reconstruction;  // state_dim x snapshots, real part
    koopman::MseResult mse;
};

struct NlsResult {
    dynamics::TrajectoryDataset data;
    std::vector<NlsMethodResult> methods;  // dmd, koopman_k1, koopman_k2, koopman_gq, expfbf
};

NlsResult run_nls_reconstruct(const NlsExperimentConfig& config);

nlohmann::json mg_config_to_json(const MgExperimentConfig& config);
MgExperimentConfig mg_config_from_json(const nlohmann::json& j);
nlohmann::json nls_config_to_json(const NlsExperimentConfig& config);
NlsExperimentConfig nls_config_from_json(const nlohmann::json& j);

std::uint64_t fnv1a(const std::string& text);

// Writes mse.csv / test.csv / members_*.csv, the member-0 checkpoint, and
// manifest.json (config echo, config hash, seeds, wall time) under out_dir.
void write_mg_outputs(const MgResult& result, const MgExperimentConfig& config,
                      const std::string& out_dir, double wall_seconds = 0.0);

// Writes mse.csv, spectra_<method>.csv, recon_<method>.csv, recon_truth.csv,
// and manifest.json under out_dir.
void write_nls_outputs(const NlsResult& result, const NlsExperimentConfig& config,
                       const std::string& out_dir, double wall_seconds = 0.0);

}  // namespace expfbf::harness
