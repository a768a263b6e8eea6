#include <chrono>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "expfbf/errors.hpp"
#include "expfbf/harness.hpp"

namespace {

using expfbf::InvalidInputError;
using nlohmann::json;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("config file '" + path + "' not found");
    return json::parse(in);
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InvalidInputError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

expfbf::dynamics::MgParams mg_params_from_json(const json& j) {
    expfbf::dynamics::MgParams p;
    p.beta = j.value("beta", p.beta);
    p.gamma = j.value("gamma", p.gamma);
    p.tau = j.value("tau", p.tau);
    p.n = j.value("n", p.n);
    p.dt = j.value("dt", p.dt);
    p.y0 = j.value("y0", p.y0);
    p.samples = j.value("samples", p.samples);
    return p;
}

json mg_params_to_json(const expfbf::dynamics::MgParams& p) {
    return {{"beta", p.beta}, {"gamma", p.gamma}, {"tau", p.tau},     {"n", p.n},
            {"dt", p.dt},     {"y0", p.y0},       {"samples", p.samples}};
}

expfbf::koopman::ObservableSet make_observable(const std::string& kind, int state_dim,
                                               int gq_nodes, double gq_sigma,
                                               std::uint64_t gq_seed) {
    using expfbf::koopman::ObservableSet;
    if (kind == "dmd") return ObservableSet::identity(state_dim);
    if (kind == "k1") return ObservableSet::cubic(state_dim);
    if (kind == "k2") return ObservableSet::quadratic(state_dim);
    if (kind == "gq") {
        const auto rule_1d = expfbf::features::gauss_hermite_1d(3);
        const auto rule = expfbf::features::subsample_tensor_rule(rule_1d, state_dim,
                                                                  gq_nodes, gq_seed);
        return ObservableSet::gq(state_dim,
                                 expfbf::features::FourierFeatureMap(rule, gq_sigma, gq_seed));
    }
    throw InvalidInputError("unknown observable '" + kind +
                            "' (expected dmd, k1, k2, or gq)");
}

struct DmdFitOutput {
    expfbf::koopman::DmdModel model;
    Eigen::VectorXd times;
    Eigen::MatrixXd states;
};

DmdFitOutput fit_from_csv(const std::string& data_path, const std::string& observable,
                          int rank, int gq_nodes, double gq_sigma, std::uint64_t gq_seed) {
    Eigen::VectorXd times;
    const Eigen::MatrixXd states = expfbf::dynamics::read_series_csv(data_path, times);
    if (states.cols() < 2)
        throw InvalidInputError("'" + data_path + "' needs at least two snapshots");
    const double dt = times.size() > 1 ? times[1] - times[0] : 1.0;
    const auto obs = make_observable(observable, static_cast<int>(states.rows()), gq_nodes,
                                     gq_sigma, gq_seed);
    const Eigen::MatrixXcd lifted =
        expfbf::koopman::lift(states.cast<std::complex<double>>(), obs);
    const int effective =
        std::min(rank, expfbf::koopman::numerical_rank(lifted.leftCols(states.cols() - 1)));
    if (effective < 1) throw expfbf::NumericFailureError("data is numerically rank zero");
    auto model = expfbf::koopman::dmd_fit(lifted.leftCols(states.cols() - 1),
                                          lifted.rightCols(states.cols() - 1), effective,
                                          dt, obs);
    return {std::move(model), std::move(times), states};
}

void write_spectra_csv(const std::string& path, const expfbf::koopman::Spectra& spectra) {
    std::string text = "re,im,exponent_re,exponent_im\n";
    char buf[40];
    const auto emit = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        text += buf;
    };
    for (Eigen::Index k = 0; k < spectra.eigenvalues.size(); ++k) {
        emit(spectra.eigenvalues[k].real());
        text += ',';
        emit(spectra.eigenvalues[k].imag());
        text += ',';
        emit(spectra.exponents[k].real());
        text += ',';
        emit(spectra.exponents[k].imag());
        text += '\n';
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InvalidInputError("cannot open '" + path + "' for writing");
    out << text;
}

int run(int argc, char** argv) {
    CLI::App app{"explicit-feature-space functional Bayesian filtering toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", preset, data_path, inputs_path;
    std::string model_path, observable = "dmd", eval_point, map_type = "taylor";
    std::uint64_t seed = 0;
    bool seed_given = false, paper_scale = false;
    int rank = 10, steps = -1, gq_nodes = 64, dim = 1, order = 4, nodes = 64;
    double gq_sigma = 2.0, sigma = 1.0, snr_db = 10.0;

    auto* gen = app.add_subcommand("gen", "generate ground-truth datasets");
    auto* gen_mg = gen->add_subcommand("mg", "chaotic delay-differential series");
    gen_mg->add_option("--config", config_path, "JSON parameter overrides");
    gen_mg->add_option("--seed", seed, "noise seed")->each([&](const std::string&) {
        seed_given = true;
    });
    gen_mg->add_option("--snr-db", snr_db, "noise level (dB)");
    gen_mg->add_option("--out-dir", out_dir, "output directory");
    auto* gen_nls = gen->add_subcommand("nls", "soliton field snapshots");
    gen_nls->add_option("--config", config_path, "JSON parameter overrides");
    gen_nls->add_option("--preset", preset, "parameter preset (nls21, nls101, nls31)");
    gen_nls->add_option("--out-dir", out_dir, "output directory");

    auto* filter_cmd = app.add_subcommand("filter", "recursive filter operations");
    auto* filter_run = filter_cmd->add_subcommand("run", "run a filter over a measurement CSV");
    filter_run->add_option("--config", config_path, "filter config JSON");
    filter_run->add_option("--model", model_path, "checkpoint to resume");
    filter_run->add_option("--data", data_path, "measurement CSV")->required();
    filter_run->add_option("--inputs", inputs_path, "input CSV (when the filter has inputs)");
    filter_run->add_option("--out-dir", out_dir, "output directory");

    auto* dmd_cmd = app.add_subcommand("dmd", "dynamic mode decomposition");
    auto* dmd_fit_cmd = dmd_cmd->add_subcommand("fit", "fit on a snapshot CSV");
    dmd_fit_cmd->add_option("--data", data_path, "snapshot CSV")->required();
    dmd_fit_cmd->add_option("--rank", rank, "truncation rank");
    dmd_fit_cmd->add_option("--observable", observable, "dmd, k1, k2, or gq");
    dmd_fit_cmd->add_option("--gq-nodes", gq_nodes, "gq observable node count");
    dmd_fit_cmd->add_option("--gq-sigma", gq_sigma, "gq observable kernel width");
    dmd_fit_cmd->add_option("--out-dir", out_dir, "output directory");

    auto* koop_cmd = app.add_subcommand("koopman", "observable-lifted prediction");
    auto* koop_predict = koop_cmd->add_subcommand("predict", "fit then roll out open loop");
    koop_predict->add_option("--data", data_path, "snapshot CSV")->required();
    koop_predict->add_option("--rank", rank, "truncation rank");
    koop_predict->add_option("--observable", observable, "dmd, k1, k2, or gq");
    koop_predict->add_option("--steps", steps, "rollout length (default: snapshot count - 1)");
    koop_predict->add_option("--gq-nodes", gq_nodes, "gq observable node count");
    koop_predict->add_option("--gq-sigma", gq_sigma, "gq observable kernel width");
    koop_predict->add_option("--out-dir", out_dir, "output directory");

    auto* exp_cmd = app.add_subcommand("experiment", "full experiment drivers");
    auto* exp_mg = exp_cmd->add_subcommand("mg", "ensemble denoising study");
    exp_mg->add_option("--config", config_path, "experiment config JSON");
    exp_mg->add_option("--seed", seed, "override the ensemble base seed")
        ->each([&](const std::string&) { seed_given = true; });
    exp_mg->add_flag("--paper-scale", paper_scale, "ensemble of 50 instead of 10");
    exp_mg->add_option("--out-dir", out_dir, "output directory");
    auto* exp_nls = exp_cmd->add_subcommand("nls", "reconstruction method comparison");
    exp_nls->add_option("--config", config_path, "experiment config JSON");
    exp_nls->add_option("--preset", preset, "nls21, nls101, or nls31");
    exp_nls->add_option("--seed", seed, "override the filter seed")
        ->each([&](const std::string&) { seed_given = true; });
    exp_nls->add_option("--out-dir", out_dir, "output directory");

    auto* model_cmd = app.add_subcommand("model", "checkpoint utilities");
    auto* model_save = model_cmd->add_subcommand("save", "initialize from config and save");
    model_save->add_option("--config", config_path, "filter config JSON")->required();
    model_save->add_option("--out", model_path, "checkpoint path")->required();
    auto* model_load = model_cmd->add_subcommand("load", "load and summarize a checkpoint");
    model_load->add_option("--path", model_path, "checkpoint path")->required();
    std::string resave_path;
    model_load->add_option("--resave", resave_path, "write the loaded model back out");

    auto* feat_cmd = app.add_subcommand("features", "feature map utilities");
    auto* feat_inspect = feat_cmd->add_subcommand("inspect", "print a map descriptor");
    feat_inspect->add_option("--type", map_type, "taylor or fourier");
    feat_inspect->add_option("--dim", dim, "input dimension");
    feat_inspect->add_option("--order", order, "truncation order (taylor)");
    feat_inspect->add_option("--nodes", nodes, "node count (fourier)");
    feat_inspect->add_option("--sigma", sigma, "kernel width");
    feat_inspect->add_option("--seed", seed, "frequency seed (fourier)");
    feat_inspect->add_option("--eval", eval_point, "comma-separated point to evaluate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    const auto t0 = std::chrono::steady_clock::now();
    const auto wall = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    if (*gen_mg) {
        expfbf::dynamics::MgParams params;
        std::uint64_t noise_seed = 777;
        if (!config_path.empty()) {
            const json j = load_json(config_path);
            params = mg_params_from_json(j.contains("mg") ? j.at("mg") : j);
            snr_db = j.value("snr_db", snr_db);
            noise_seed = j.value("seed", noise_seed);
        }
        if (seed_given) noise_seed = seed;
        const auto data = expfbf::dynamics::mackey_glass(params);
        const auto noisy = expfbf::dynamics::add_awgn(data.real_clean(), snr_db, noise_seed);
        std::filesystem::create_directories(out_dir);
        expfbf::dynamics::write_series_csv(out_dir + "/mg_clean.csv", data.times,
                                           data.real_clean());
        expfbf::dynamics::write_series_csv(out_dir + "/mg_noisy.csv", data.times,
                                           noisy.noisy);
        json sidecar;
        sidecar["mg"] = mg_params_to_json(params);
        sidecar["snr_db"] = snr_db;
        sidecar["achieved_snr_db"] = noisy.achieved_snr_db;
        sidecar["seed"] = noise_seed;
        write_json(out_dir + "/mg.json", sidecar);
        std::cout << "wrote " << out_dir << "/mg_clean.csv (" << params.samples
                  << " samples)\n";
        return 0;
    }
    if (*gen_nls) {
        expfbf::harness::NlsExperimentConfig cfg;
        if (!preset.empty()) cfg = expfbf::harness::nls_preset(preset);
        if (!config_path.empty())
            cfg = expfbf::harness::nls_config_from_json(load_json(config_path));
        const auto data = expfbf::dynamics::nls_simulate(cfg.nls);
        std::filesystem::create_directories(out_dir);
        expfbf::dynamics::write_series_csv(out_dir + "/nls_real.csv", data.times,
                                           data.real_clean());
        expfbf::dynamics::write_series_csv(out_dir + "/nls_imag.csv", data.times,
                                           data.clean.imag());
        json sidecar = expfbf::harness::nls_config_to_json(cfg)["nls"];
        write_json(out_dir + "/nls.json", sidecar);
        std::cout << "wrote " << out_dir << "/nls_real.csv (" << cfg.nls.snapshots
                  << " snapshots)\n";
        return 0;
    }
    if (*filter_run) {
        if (config_path.empty() == model_path.empty())
            throw InvalidInputError("filter run needs exactly one of --config or --model");
        auto model = model_path.empty()
                         ? expfbf::filter::init_filter(
                               expfbf::filter::config_from_json(load_json(config_path)))
                         : expfbf::filter::load_model(model_path);
        Eigen::VectorXd times;
        const Eigen::MatrixXd meas = expfbf::dynamics::read_series_csv(data_path, times);
        std::vector<Eigen::VectorXd> ds(meas.cols()), us;
        for (Eigen::Index i = 0; i < meas.cols(); ++i) ds[i] = meas.col(i);
        if (!inputs_path.empty()) {
            Eigen::VectorXd in_times;
            const Eigen::MatrixXd ins = expfbf::dynamics::read_series_csv(inputs_path, in_times);
            if (ins.cols() != meas.cols())
                throw InvalidInputError("input and measurement files differ in length");
            us.resize(ins.cols());
            for (Eigen::Index i = 0; i < ins.cols(); ++i) us[i] = ins.col(i);
        }
        const auto reports = expfbf::filter::run_sequence(model, us, ds);
        std::filesystem::create_directories(out_dir);
        Eigen::MatrixXd table(3 * model.config.n_y, static_cast<Eigen::Index>(reports.size()));
        for (std::size_t i = 0; i < reports.size(); ++i) {
            table.col(static_cast<Eigen::Index>(i)) << reports[i].prior_output,
                reports[i].posterior_output, reports[i].innovation;
        }
        expfbf::dynamics::write_series_csv(out_dir + "/steps.csv", times, table);
        expfbf::filter::save_model(model, out_dir + "/model_final.ckpt");
        std::cout << "ran " << reports.size() << " steps; wrote " << out_dir
                  << "/steps.csv and model_final.ckpt\n";
        return 0;
    }
    if (*dmd_fit_cmd) {
        const auto fit = fit_from_csv(data_path, observable, rank, gq_nodes, gq_sigma, seed);
        std::filesystem::create_directories(out_dir);
        write_spectra_csv(out_dir + "/spectra_" + fit.model.observables.name() + ".csv",
                          expfbf::koopman::spectra(fit.model));
        const auto recon = expfbf::koopman::read_out(
            expfbf::koopman::koopman_predict(fit.model, static_cast<int>(fit.states.cols()) - 1),
            static_cast<int>(fit.states.rows()));
        expfbf::dynamics::write_series_csv(
            out_dir + "/recon_" + fit.model.observables.name() + ".csv", fit.times, recon);
        const auto mse = expfbf::koopman::reconstruction_mse(recon, fit.states);
        std::cout << "rank " << fit.model.rank << ", total reconstruction mse " << mse.total
                  << "\n";
        return 0;
    }
    if (*koop_predict) {
        const auto fit = fit_from_csv(data_path, observable, rank, gq_nodes, gq_sigma, seed);
        const int n_steps = steps >= 0 ? steps : static_cast<int>(fit.states.cols()) - 1;
        const auto recon = expfbf::koopman::read_out(
            expfbf::koopman::koopman_predict(fit.model, n_steps),
            static_cast<int>(fit.states.rows()));
        Eigen::VectorXd times(n_steps + 1);
        const double dt = fit.times.size() > 1 ? fit.times[1] - fit.times[0] : 1.0;
        for (int k = 0; k <= n_steps; ++k) times[k] = fit.times[0] + k * dt;
        std::filesystem::create_directories(out_dir);
        expfbf::dynamics::write_series_csv(
            out_dir + "/predict_" + fit.model.observables.name() + ".csv", times, recon);
        std::cout << "rolled out " << n_steps << " steps\n";
        return 0;
    }
    if (*exp_mg) {
        auto cfg = config_path.empty() ? expfbf::harness::mg_benchmark_config()
                                       : expfbf::harness::mg_config_from_json(
                                             load_json(config_path));
        if (paper_scale) cfg.ensemble = 50;
        if (seed_given) cfg.base_seed = seed;
        const auto result = expfbf::harness::run_mg_denoise(cfg);
        expfbf::harness::write_mg_outputs(result, cfg, out_dir, wall());
        std::cout << "final batch prior/post mse: "
                  << result.batch_prior_mean[result.batch_prior_mean.size() - 1] << " / "
                  << result.batch_post_mean[result.batch_post_mean.size() - 1]
                  << " (noise floor " << result.noise_floor << ")\n";
        return 0;
    }
    if (*exp_nls) {
        auto cfg = expfbf::harness::nls_preset(preset.empty() ? "nls21" : preset);
        if (!config_path.empty())
            cfg = expfbf::harness::nls_config_from_json(load_json(config_path));
        if (seed_given) cfg.fbf_seed = seed;
        const auto result = expfbf::harness::run_nls_reconstruct(cfg);
        expfbf::harness::write_nls_outputs(result, cfg, out_dir, wall());
        for (const auto& method : result.methods)
            std::cout << method.name << ": total mse " << method.mse.total << "\n";
        return 0;
    }
    if (*model_save) {
        const auto model = expfbf::filter::init_filter(
            expfbf::filter::config_from_json(load_json(config_path)));
        expfbf::filter::save_model(model, model_path);
        std::cout << "saved " << model_path << " (n_s=" << model.n_s
                  << ", n_omega=" << model.n_omega << ")\n";
        return 0;
    }
    if (*model_load) {
        const auto model = expfbf::filter::load_model(model_path);
        json summary;
        summary["n_s"] = model.n_s;
        summary["n_omega"] = model.n_omega;
        summary["step"] = model.step;
        summary["config"] = expfbf::filter::config_to_json(model.config);
        if (!resave_path.empty()) expfbf::filter::save_model(model, resave_path);
        std::cout << summary.dump(2) << "\n";
        return 0;
    }
    if (*feat_inspect) {
        expfbf::features::FeatureMap map;
        if (map_type == "taylor")
            map = expfbf::features::FeatureMap(
                expfbf::features::TaylorFeatureMap(dim, order, sigma));
        else if (map_type == "fourier")
            map = expfbf::features::FeatureMap(
                expfbf::features::FourierFeatureMap::random(dim, nodes, sigma, seed));
        else
            throw InvalidInputError("unknown map type '" + map_type + "'");
        json out;
        out["descriptor"] = map.to_json();
        out["feature_dim"] = map.feature_dim();
        if (!eval_point.empty()) {
            std::vector<double> coords;
            std::stringstream ss(eval_point);
            std::string cell;
            while (std::getline(ss, cell, ',')) coords.push_back(std::stod(cell));
            if (static_cast<int>(coords.size()) != map.dim())
                throw InvalidInputError("--eval point dimension mismatch");
            Eigen::VectorXd x =
                Eigen::Map<Eigen::VectorXd>(coords.data(), static_cast<Eigen::Index>(coords.size()));
            const Eigen::VectorXd value = map.eval(x);
            out["value"] = std::vector<double>(value.begin(), value.end());
        }
        std::cout << out.dump(2) << "\n";
        return 0;
    }
    std::cerr << "no action for the given subcommand\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const expfbf::NumericFailureError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    } catch (const expfbf::RuleQualityError& e) {
        std::cerr << "numeric failure: " << e.what() << " (residual " << e.residual << ")\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
