#include "expfbf/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "expfbf/errors.hpp"
#include "expfbf/rng.hpp"

namespace expfbf::harness {

namespace {

// Decorrelates the batch-start stream from the weight-init stream that
// init_filter consumes from the same member seed.
constexpr std::uint64_t kStartStreamSalt = 0xb5ad4eceda1ce2a9ull;

void append_g17(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InvalidInputError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw NumericFailureError("failed writing '" + path + "'");
}

void population_stats(const Matrix& rows, Vector& mean, Vector& stddev) {
    const double n = static_cast<double>(rows.rows());
    mean = rows.colwise().mean().transpose();
    Vector var = (rows.rowwise() - mean.transpose()).cwiseAbs2().colwise().sum().transpose() / n;
    stddev = var.cwiseSqrt();
}

}  // namespace

MgExperimentConfig mg_benchmark_config() {
    MgExperimentConfig c;
    c.mg.samples = c.train_samples + c.test_samples;
    return c;
}

MgResult run_mg_denoise(const MgExperimentConfig& config) {
    if (config.train_samples + config.test_samples > config.mg.samples)
        throw InvalidInputError("mg series too short for the train/test split");
    if (config.embed < 1 || config.batches < 1 || config.batch_steps < 1 ||
        config.ensemble < 1)
        throw InvalidInputError("mg experiment counts must be positive");
    const int start_span =
        config.train_samples - config.batch_steps - config.embed + 1;
    if (start_span < 1)
        throw InvalidInputError("batch window does not fit in the training span");

    const auto data = dynamics::mackey_glass(config.mg);
    const Matrix clean_row = data.real_clean();
    const auto awgn = dynamics::add_awgn(clean_row, config.snr_db, config.data_seed);
    const Vector clean = clean_row.row(0).transpose();
    const Vector noisy = awgn.noisy.row(0).transpose();

    MgResult result;
    result.signal_power = clean.squaredNorm() / static_cast<double>(clean.size());
    result.noise_floor =
        (noisy - clean).squaredNorm() / static_cast<double>(clean.size());

    filter::FilterConfig fc;
    fc.n_u = config.embed;
    fc.n_x = config.n_x;
    fc.n_y = 1;
    fc.mode = filter::StateMode::input_state;
    fc.psi = features::FeatureMap(features::TaylorFeatureMap(
        config.n_x, config.taylor_order, 1.0 / std::sqrt(2.0 * config.a_s)));
    fc.phi = features::FeatureMap(features::TaylorFeatureMap(
        config.embed, config.taylor_order, 1.0 / std::sqrt(2.0 * config.a_u)));
    fc.sigma_s = std::sqrt(config.sigma_s2);
    fc.sigma_y = std::sqrt(config.sigma_y2);
    fc.sigma_omega = 0.0;
    fc.p4_init = config.p4_init;
    fc.kappa1 = config.kappa1;
    fc.kappa2 = config.kappa2;
    fc.layout = filter::CovarianceLayout::per_state_block;

    const auto run_span = [&](filter::FilterModel& model, int start, int steps,
                              double& prior_mse, double& post_mse) {
        std::vector<Vector> us(steps), ds(steps), refs(steps);
        for (int t = 0; t < steps; ++t) {
            const int i = start + t;
            Vector u(config.embed);
            for (int j = 0; j < config.embed; ++j) u[j] = noisy[i - j];
            us[t] = u;
            ds[t] = Vector::Constant(1, noisy[i]);
            refs[t] = Vector::Constant(1, clean[i]);
        }
        model.s.setZero();
        const auto reports = filter::run_sequence(model, us, ds, &refs);
        prior_mse = 0.0;
        post_mse = 0.0;
        for (const auto& r : reports) {
            prior_mse += r.prior_sq_err;
            post_mse += r.posterior_sq_err;
        }
        prior_mse /= steps;
        post_mse /= steps;
    };

    for (int member = 0; member < config.ensemble; ++member) {
        fc.seed = config.base_seed + static_cast<std::uint64_t>(member);
        auto model = filter::init_filter(fc);
        Rng starts(fc.seed ^ kStartStreamSalt);

        MgMemberStats stats;
        stats.batch_prior.resize(config.batches);
        stats.batch_post.resize(config.batches);
        for (int b = 0; b < config.batches; ++b) {
            const int start =
                config.embed - 1 + static_cast<int>(starts.below(start_span));
            run_span(model, start, config.batch_steps, stats.batch_prior[b],
                     stats.batch_post[b]);
        }
        if (member == 0) result.final_model = model;
        model.config.kappa2 = 0.0;  // weights frozen for evaluation
        run_span(model, config.train_samples, config.test_samples, stats.test_prior,
                 stats.test_post);
        result.members.push_back(std::move(stats));
    }

    Matrix prior_rows(config.ensemble, config.batches);
    Matrix post_rows(config.ensemble, config.batches);
    Matrix test_rows(config.ensemble, 2);
    for (int k = 0; k < config.ensemble; ++k) {
        prior_rows.row(k) = result.members[k].batch_prior.transpose();
        post_rows.row(k) = result.members[k].batch_post.transpose();
        test_rows(k, 0) = result.members[k].test_prior;
        test_rows(k, 1) = result.members[k].test_post;
    }
    population_stats(prior_rows, result.batch_prior_mean, result.batch_prior_std);
    population_stats(post_rows, result.batch_post_mean, result.batch_post_std);
    Vector test_mean, test_std;
    population_stats(test_rows, test_mean, test_std);
    result.test_prior_mean = test_mean[0];
    result.test_prior_std = test_std[0];
    result.test_post_mean = test_mean[1];
    result.test_post_std = test_std[1];
    return result;
}

NlsExperimentConfig nls_preset(const std::string& name) {
    NlsExperimentConfig c;
    if (name == "nls21") return c;
    if (name == "nls101") {
        c.nls.snapshots = 101;
        return c;
    }
    if (name == "nls31") {
        c.nls.amplitude = 3.1;
        c.nls.snapshots = 101;
        c.rank = 30;
        return c;
    }
    throw InvalidInputError("unknown experiment preset '" + name + "'");
}

NlsResult run_nls_reconstruct(const NlsExperimentConfig& config) {
    if (config.nls.snapshots < 2)
        throw InvalidInputError("nls reconstruction needs at least two snapshots");
    NlsResult result;
    result.data = dynamics::nls_simulate(config.nls);
    const int n = config.nls.output_grid;
    const int m = config.nls.snapshots;
    const Matrix truth = result.data.real_clean();

    const auto rule_1d = features::gauss_hermite_1d(config.gq_points_1d);
    const auto rule = features::subsample_tensor_rule(rule_1d, n, config.gq_nodes,
                                                      config.gq_seed);
    features::FourierFeatureMap gq_map(rule, config.gq_sigma, config.gq_seed);

    const std::vector<koopman::ObservableSet> observable_sets = {
        koopman::ObservableSet::identity(n), koopman::ObservableSet::cubic(n),
        koopman::ObservableSet::quadratic(n),
        koopman::ObservableSet::gq(n, gq_map)};
    for (const auto& obs : observable_sets) {
        const auto lifted = koopman::lift(result.data.clean, obs);
        const numerics::ComplexMatrix x = lifted.leftCols(m - 1);
        const numerics::ComplexMatrix x_next = lifted.rightCols(m - 1);
        NlsMethodResult method;
        method.name = obs.name();
        method.requested_rank = config.rank;
        method.effective_rank = std::min(config.rank, koopman::numerical_rank(x));
        if (method.effective_rank < 1)
            throw NumericFailureError("snapshot data for " + method.name +
                                      " is numerically rank zero");
        const auto model =
            koopman::dmd_fit(x, x_next, method.effective_rank, result.data.dt, obs);
        method.spectra = koopman::spectra(model);
        method.max_abs_eigenvalue = model.eigenvalues.cwiseAbs().maxCoeff();
        method.reconstruction = koopman::read_out(koopman::koopman_predict(model, m - 1), n);
        method.mse = koopman::reconstruction_mse(method.reconstruction, truth);
        result.methods.push_back(std::move(method));
    }

    filter::FilterConfig fc;
    fc.n_u = 0;
    fc.n_x = n;
    fc.n_y = n;
    fc.mode = filter::StateMode::concat;
    fc.psi = features::FeatureMap(gq_map);
    fc.sigma_s = config.fbf_sigma_s;
    fc.sigma_y = config.fbf_sigma_y;
    fc.p4_init = config.fbf_p4_init;
    fc.kappa1 = config.fbf_kappa1;
    fc.kappa2 = config.fbf_kappa2;
    fc.layout = filter::CovarianceLayout::per_state_joint;
    fc.seed = config.fbf_seed;
    auto fmodel = filter::init_filter(fc);
    const Vector x0 = truth.col(0);
    fmodel.s.head(n) = x0;
    fmodel.s.tail(gq_map.feature_dim()) = gq_map.eval(x0);

    NlsMethodResult fbf;
    fbf.name = "expfbf";
    fbf.reconstruction.resize(n, m);
    fbf.reconstruction.col(0) = x0;
    const Vector no_input;
    for (int i = 1; i < m; ++i) {
        filter::predict(fmodel, no_input);
        const Vector d = truth.col(i);
        fbf.reconstruction.col(i) = filter::update(fmodel, d).posterior_output;
    }
    fbf.mse = koopman::reconstruction_mse(fbf.reconstruction, truth);
    result.methods.push_back(std::move(fbf));
    return result;
}

nlohmann::json mg_config_to_json(const MgExperimentConfig& c) {
    nlohmann::json j;
    j["experiment"] = "mg-denoise";
    j["mg"] = {{"beta", c.mg.beta},   {"gamma", c.mg.gamma}, {"tau", c.mg.tau},
               {"n", c.mg.n},         {"dt", c.mg.dt},       {"y0", c.mg.y0},
               {"samples", c.mg.samples}};
    j["snr_db"] = c.snr_db;
    j["train_samples"] = c.train_samples;
    j["test_samples"] = c.test_samples;
    j["embed"] = c.embed;
    j["n_x"] = c.n_x;
    j["taylor_order"] = c.taylor_order;
    j["a_s"] = c.a_s;
    j["a_u"] = c.a_u;
    j["sigma_s2"] = c.sigma_s2;
    j["sigma_y2"] = c.sigma_y2;
    j["p4_init"] = c.p4_init;
    j["kappa1"] = c.kappa1;
    j["kappa2"] = c.kappa2;
    j["batches"] = c.batches;
    j["batch_steps"] = c.batch_steps;
    j["ensemble"] = c.ensemble;
    j["data_seed"] = c.data_seed;
    j["base_seed"] = c.base_seed;
    return j;
}

MgExperimentConfig mg_config_from_json(const nlohmann::json& j) {
    MgExperimentConfig c = mg_benchmark_config();
    if (j.contains("mg")) {
        const auto& m = j.at("mg");
        c.mg.beta = m.value("beta", c.mg.beta);
        c.mg.gamma = m.value("gamma", c.mg.gamma);
        c.mg.tau = m.value("tau", c.mg.tau);
        c.mg.n = m.value("n", c.mg.n);
        c.mg.dt = m.value("dt", c.mg.dt);
        c.mg.y0 = m.value("y0", c.mg.y0);
        c.mg.samples = m.value("samples", c.mg.samples);
    }
    c.snr_db = j.value("snr_db", c.snr_db);
    c.train_samples = j.value("train_samples", c.train_samples);
    c.test_samples = j.value("test_samples", c.test_samples);
    c.embed = j.value("embed", c.embed);
    c.n_x = j.value("n_x", c.n_x);
    c.taylor_order = j.value("taylor_order", c.taylor_order);
    c.a_s = j.value("a_s", c.a_s);
    c.a_u = j.value("a_u", c.a_u);
    c.sigma_s2 = j.value("sigma_s2", c.sigma_s2);
    c.sigma_y2 = j.value("sigma_y2", c.sigma_y2);
    c.p4_init = j.value("p4_init", c.p4_init);
    c.kappa1 = j.value("kappa1", c.kappa1);
    c.kappa2 = j.value("kappa2", c.kappa2);
    c.batches = j.value("batches", c.batches);
    c.batch_steps = j.value("batch_steps", c.batch_steps);
    c.ensemble = j.value("ensemble", c.ensemble);
    c.data_seed = j.value("data_seed", c.data_seed);
    c.base_seed = j.value("base_seed", c.base_seed);
    if (!j.contains("mg") || !j.at("mg").contains("samples"))
        c.mg.samples = c.train_samples + c.test_samples;
    return c;
}

nlohmann::json nls_config_to_json(const NlsExperimentConfig& c) {
    nlohmann::json j;
    j["experiment"] = "nls-reconstruct";
    j["nls"] = {{"x_min", c.nls.x_min},
                {"x_max", c.nls.x_max},
                {"solver_grid", c.nls.solver_grid},
                {"output_grid", c.nls.output_grid},
                {"snapshots", c.nls.snapshots},
                {"horizon", c.nls.horizon},
                {"amplitude", c.nls.amplitude},
                {"substeps_per_snapshot", c.nls.substeps_per_snapshot}};
    j["rank"] = c.rank;
    j["gq_nodes"] = c.gq_nodes;
    j["gq_sigma"] = c.gq_sigma;
    j["gq_points_1d"] = c.gq_points_1d;
    j["gq_seed"] = c.gq_seed;
    j["fbf_sigma_s"] = c.fbf_sigma_s;
    j["fbf_sigma_y"] = c.fbf_sigma_y;
    j["fbf_p4_init"] = c.fbf_p4_init;
    j["fbf_kappa1"] = c.fbf_kappa1;
    j["fbf_kappa2"] = c.fbf_kappa2;
    j["fbf_seed"] = c.fbf_seed;
    return j;
}

NlsExperimentConfig nls_config_from_json(const nlohmann::json& j) {
    NlsExperimentConfig c;
    if (j.contains("preset")) c = nls_preset(j.at("preset").get<std::string>());
    if (j.contains("nls")) {
        const auto& n = j.at("nls");
        c.nls.x_min = n.value("x_min", c.nls.x_min);
        c.nls.x_max = n.value("x_max", c.nls.x_max);
        c.nls.solver_grid = n.value("solver_grid", c.nls.solver_grid);
        c.nls.output_grid = n.value("output_grid", c.nls.output_grid);
        c.nls.snapshots = n.value("snapshots", c.nls.snapshots);
        c.nls.horizon = n.value("horizon", c.nls.horizon);
        c.nls.amplitude = n.value("amplitude", c.nls.amplitude);
        c.nls.substeps_per_snapshot =
            n.value("substeps_per_snapshot", c.nls.substeps_per_snapshot);
    }
    c.rank = j.value("rank", c.rank);
    c.gq_nodes = j.value("gq_nodes", c.gq_nodes);
    c.gq_sigma = j.value("gq_sigma", c.gq_sigma);
    c.gq_points_1d = j.value("gq_points_1d", c.gq_points_1d);
    c.gq_seed = j.value("gq_seed", c.gq_seed);
    c.fbf_sigma_s = j.value("fbf_sigma_s", c.fbf_sigma_s);
    c.fbf_sigma_y = j.value("fbf_sigma_y", c.fbf_sigma_y);
    c.fbf_p4_init = j.value("fbf_p4_init", c.fbf_p4_init);
    c.fbf_kappa1 = j.value("fbf_kappa1", c.fbf_kappa1);
    c.fbf_kappa2 = j.value("fbf_kappa2", c.fbf_kappa2);
    c.fbf_seed = j.value("fbf_seed", c.fbf_seed);
    return c;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 1099511628211ull;
    }
    return hash;
}

namespace {

std::string hash_hex(std::uint64_t value) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

nlohmann::json manifest_base(const nlohmann::json& config_echo, double wall_seconds) {
    nlohmann::json m;
    m["config"] = config_echo;
    m["config_hash"] = hash_hex(fnv1a(config_echo.dump()));
    m["version"] = "0.1.0";
    m["wall_time_s"] = wall_seconds;
    return m;
}

}  // namespace

void write_mg_outputs(const MgResult& result, const MgExperimentConfig& config,
                      const std::string& out_dir, double wall_seconds) {
    std::filesystem::create_directories(out_dir);
    const auto path = [&](const std::string& name) { return out_dir + "/" + name; };

    std::string mse = "batch,prior_mean,prior_std,post_mean,post_std\n";
    for (int b = 0; b < result.batch_prior_mean.size(); ++b) {
        mse += std::to_string(b + 1);
        for (double v : {result.batch_prior_mean[b], result.batch_prior_std[b],
                         result.batch_post_mean[b], result.batch_post_std[b]}) {
            mse += ',';
            append_g17(mse, v);
        }
        mse += '\n';
    }
    write_text(path("mse.csv"), mse);

    std::string test = "prior_mean,prior_std,post_mean,post_std\n";
    bool first = true;
    for (double v : {result.test_prior_mean, result.test_prior_std,
                     result.test_post_mean, result.test_post_std}) {
        if (!first) test += ',';
        first = false;
        append_g17(test, v);
    }
    test += '\n';
    write_text(path("test.csv"), test);

    std::string members = "member,batch,prior,post\n";
    for (std::size_t k = 0; k < result.members.size(); ++k)
        for (int b = 0; b < result.members[k].batch_prior.size(); ++b) {
            members += std::to_string(k) + ',' + std::to_string(b + 1) + ',';
            append_g17(members, result.members[k].batch_prior[b]);
            members += ',';
            append_g17(members, result.members[k].batch_post[b]);
            members += '\n';
        }
    write_text(path("members_mse.csv"), members);

    filter::save_model(result.final_model, path("model_member0.ckpt"));

    nlohmann::json manifest = manifest_base(mg_config_to_json(config), wall_seconds);
    manifest["experiment"] = "mg-denoise";
    manifest["signal_power"] = result.signal_power;
    manifest["noise_floor"] = result.noise_floor;
    manifest["test_prior_mean"] = result.test_prior_mean;
    manifest["test_post_mean"] = result.test_post_mean;
    manifest["outputs"] = {"mse.csv", "test.csv", "members_mse.csv", "model_member0.ckpt"};
    write_text(path("manifest.json"), manifest.dump(2) + "\n");
}

void write_nls_outputs(const NlsResult& result, const NlsExperimentConfig& config,
                       const std::string& out_dir, double wall_seconds) {
    std::filesystem::create_directories(out_dir);
    const auto path = [&](const std::string& name) { return out_dir + "/" + name; };

    std::string mse = "time";
    for (const auto& method : result.methods) mse += "," + method.name;
    mse += '\n';
    for (Eigen::Index t = 0; t < result.data.times.size(); ++t) {
        append_g17(mse, result.data.times[t]);
        for (const auto& method : result.methods) {
            mse += ',';
            append_g17(mse, method.mse.per_time[t]);
        }
        mse += '\n';
    }
    write_text(path("mse.csv"), mse);

    std::vector<std::string> outputs = {"mse.csv", "recon_truth.csv"};
    dynamics::write_series_csv(path("recon_truth.csv"), result.data.times,
                               result.data.real_clean());
    nlohmann::json method_meta = nlohmann::json::array();
    for (const auto& method : result.methods) {
        dynamics::write_series_csv(path("recon_" + method.name + ".csv"),
                                   result.data.times, method.reconstruction);
        outputs.push_back("recon_" + method.name + ".csv");
        nlohmann::json meta;
        meta["name"] = method.name;
        meta["total_mse"] = method.mse.total;
        if (method.requested_rank > 0) {
            meta["requested_rank"] = method.requested_rank;
            meta["effective_rank"] = method.effective_rank;
            meta["max_abs_eigenvalue"] = method.max_abs_eigenvalue;
            meta["unstable"] = method.max_abs_eigenvalue > 1.0;
            std::string spectra = "re,im,exponent_re,exponent_im\n";
            for (Eigen::Index k = 0; k < method.spectra.eigenvalues.size(); ++k) {
                append_g17(spectra, method.spectra.eigenvalues[k].real());
                spectra += ',';
                append_g17(spectra, method.spectra.eigenvalues[k].imag());
                spectra += ',';
                append_g17(spectra, method.spectra.exponents[k].real());
                spectra += ',';
                append_g17(spectra, method.spectra.exponents[k].imag());
                spectra += '\n';
            }
            write_text(path("spectra_" + method.name + ".csv"), spectra);
            outputs.push_back("spectra_" + method.name + ".csv");
        }
        method_meta.push_back(meta);
    }

    nlohmann::json manifest = manifest_base(nls_config_to_json(config), wall_seconds);
    manifest["experiment"] = "nls-reconstruct";
    manifest["methods"] = method_meta;
    manifest["outputs"] = outputs;
    write_text(path("manifest.json"), manifest.dump(2) + "\n");
}

}  // namespace expfbf::harness
