#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "expfbf/filter.hpp"

namespace {

std::string cli_binary;
const std::string kScratch = "cli_scratch";

// Runs the tool with a shell line, captures combined output, returns the
// exit code.
int run_cli(const std::string& args, std::string* output = nullptr) {
    const std::string cmd = "'" + cli_binary + "' " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string text;
    char buf[512];
    while (std::size_t got = std::fread(buf, 1, sizeof(buf), pipe)) text.append(buf, got);
    const int status = pclose(pipe);
    if (output) *output = text;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string scratch(const std::string& name) { return kScratch + "/" + name; }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    REQUIRE(out.good());
    out << text;
}

// A minimal linear-mode filter descriptor over scalar measurements.
std::string small_filter_config() {
    expfbf::filter::FilterConfig c;
    c.mode = expfbf::filter::StateMode::feature_state;
    c.psi = expfbf::features::FeatureMap(expfbf::features::TaylorFeatureMap(1, 2, 1.0));
    c.n_x = 1;
    c.n_y = 1;
    c.seed = 4;
    const std::string path = scratch("filter_config.json");
    write_text(path, expfbf::filter::config_to_json(c).dump(2) + "\n");
    return path;
}

}  // namespace

TEST_CASE("help succeeds and bad invocations fail with usage errors") {
    std::string out;
    CHECK(run_cli("--help", &out) == 0);
    CHECK(out.find("gen") != std::string::npos);
    CHECK(run_cli("gen mg --frobnicate") == 1);
    CHECK(run_cli("") == 1);  // a subcommand is required
    CHECK(run_cli("gen mg --config does_not_exist.json", &out) == 1);
    CHECK(out.find("does_not_exist.json") != std::string::npos);
}

TEST_CASE("dataset generation writes series files and a parameter sidecar") {
    write_text(scratch("mg_params.json"), R"({"samples": 60, "snr_db": 10})");
    std::string out;
    CHECK(run_cli("gen mg --config " + scratch("mg_params.json") + " --seed 5 --out-dir " +
                      scratch("mg"),
                  &out) == 0);
    CHECK(std::filesystem::exists(scratch("mg/mg_clean.csv")));
    CHECK(std::filesystem::exists(scratch("mg/mg_noisy.csv")));
    std::ifstream sidecar(scratch("mg/mg.json"));
    const auto meta = nlohmann::json::parse(sidecar);
    CHECK(meta.at("seed").get<std::uint64_t>() == 5);
    CHECK(meta.at("mg").at("samples").get<int>() == 60);
    CHECK(std::isfinite(meta.at("achieved_snr_db").get<double>()));

    write_text(scratch("nls_params.json"), R"({"nls": {"snapshots": 5}})");
    CHECK(run_cli("gen nls --config " + scratch("nls_params.json") + " --out-dir " +
                  scratch("nls")) == 0);
    CHECK(std::filesystem::exists(scratch("nls/nls_real.csv")));
    CHECK(std::filesystem::exists(scratch("nls/nls_imag.csv")));
    std::ifstream nls_sidecar(scratch("nls/nls.json"));
    CHECK(nlohmann::json::parse(nls_sidecar).at("snapshots").get<int>() == 5);
}

TEST_CASE("the filter pipeline runs from a config, resumes, and validates flags") {
    const std::string config = small_filter_config();
    std::string out;
    CHECK(run_cli("filter run --config " + config + " --data " + scratch("mg/mg_noisy.csv") +
                      " --out-dir " + scratch("frun"),
                  &out) == 0);
    CHECK(out.find("60 steps") != std::string::npos);
    CHECK(std::filesystem::exists(scratch("frun/steps.csv")));
    CHECK(std::filesystem::exists(scratch("frun/model_final.ckpt")));

    // steps.csv rows: header plus one line per measurement; each line has
    // time plus prior, posterior, and innovation slices.
    std::ifstream steps(scratch("frun/steps.csv"));
    std::string header;
    std::getline(steps, header);
    CHECK(header == "time,s0,s1,s2");

    CHECK(run_cli("filter run --model " + scratch("frun/model_final.ckpt") + " --data " +
                  scratch("mg/mg_noisy.csv") + " --out-dir " + scratch("frun2")) == 0);
    CHECK(run_cli("filter run --config " + config + " --model " +
                  scratch("frun/model_final.ckpt") + " --data " +
                  scratch("mg/mg_noisy.csv")) == 1);
    CHECK(run_cli("filter run --data " + scratch("mg/mg_noisy.csv")) == 1);
}

TEST_CASE("numeric blowups surface as the dedicated exit code") {
    const std::string config = small_filter_config();
    write_text(scratch("huge.csv"), "time,s0\n0,1e200\n1,1e200\n2,1e200\n");
    std::string out;
    CHECK(run_cli("filter run --config " + config + " --data " + scratch("huge.csv") +
                      " --out-dir " + scratch("blowup"),
                  &out) == 2);
    CHECK(out.find("numeric failure") != std::string::npos);
}

TEST_CASE("checkpoint utilities save, summarize, and resave") {
    const std::string config = small_filter_config();
    CHECK(run_cli("model save --config " + config + " --out " + scratch("m.ckpt")) == 0);
    std::string out;
    CHECK(run_cli("model load --path " + scratch("m.ckpt") + " --resave " +
                      scratch("m2.ckpt"),
                  &out) == 0);
    const auto summary = nlohmann::json::parse(out);
    CHECK(summary.at("n_s").get<int>() == 3);
    CHECK(summary.at("step").get<long>() == 0);
    CHECK(std::filesystem::exists(scratch("m2.ckpt")));
    CHECK(run_cli("model load --path " + scratch("nothere.ckpt")) == 1);
}

TEST_CASE("spectral fits and rollouts work from generated snapshot files") {
    std::string out;
    CHECK(run_cli("dmd fit --data " + scratch("nls/nls_real.csv") +
                      " --rank 3 --observable k2 --out-dir " + scratch("dmd"),
                  &out) == 0);
    CHECK(out.find("total reconstruction mse") != std::string::npos);
    CHECK(std::filesystem::exists(scratch("dmd/spectra_koopman_k2.csv")));
    CHECK(std::filesystem::exists(scratch("dmd/recon_koopman_k2.csv")));

    CHECK(run_cli("koopman predict --data " + scratch("nls/nls_real.csv") +
                  " --rank 3 --observable dmd --steps 6 --out-dir " + scratch("koop")) == 0);
    std::ifstream predict(scratch("koop/predict_dmd.csv"));
    int lines = 0;
    std::string line;
    while (std::getline(predict, line)) ++lines;
    CHECK(lines == 8);  // header plus steps + 1 rows

    CHECK(run_cli("dmd fit --data " + scratch("nls/nls_real.csv") +
                  " --observable banana") == 1);
}

TEST_CASE("experiment drivers run end to end from config files") {
    write_text(scratch("mg_exp.json"),
               R"({"train_samples": 40, "test_samples": 10, "batches": 1,
                   "batch_steps": 20, "ensemble": 1})");
    std::string out;
    CHECK(run_cli("experiment mg --config " + scratch("mg_exp.json") + " --out-dir " +
                      scratch("exp_mg"),
                  &out) == 0);
    CHECK(out.find("noise floor") != std::string::npos);
    for (const char* name : {"mse.csv", "test.csv", "members_mse.csv", "model_member0.ckpt",
                             "manifest.json"})
        CHECK(std::filesystem::exists(scratch("exp_mg/") + name));

    write_text(scratch("nls_exp.json"),
               R"({"nls": {"snapshots": 5}, "rank": 3, "gq_nodes": 8})");
    CHECK(run_cli("experiment nls --config " + scratch("nls_exp.json") + " --out-dir " +
                      scratch("exp_nls"),
                  &out) == 0);
    CHECK(out.find("expfbf: total mse") != std::string::npos);
    CHECK(std::filesystem::exists(scratch("exp_nls/mse.csv")));
    CHECK(std::filesystem::exists(scratch("exp_nls/recon_expfbf.csv")));
    CHECK(run_cli("experiment nls --preset nls99") == 1);
}

TEST_CASE("feature inspection prints a descriptor and evaluations") {
    std::string out;
    CHECK(run_cli("features inspect --type taylor --dim 2 --order 2 --eval 0.5,0.25",
                  &out) == 0);
    const auto j = nlohmann::json::parse(out);
    CHECK(j.at("feature_dim").get<int>() == 6);
    CHECK(j.at("value").size() == 6);
    CHECK(run_cli("features inspect --type banana") == 1);
    CHECK(run_cli("features inspect --type taylor --dim 2 --eval 0.5") == 1);
}

int main(int argc, char** argv) {
    std::vector<char*> args;
    args.push_back(argv[0]);
    for (int i = 1; i < argc; ++i) {
        if (cli_binary.empty() && argv[i][0] != '-')
            cli_binary = argv[i];
        else
            args.push_back(argv[i]);
    }
    if (cli_binary.empty()) {
        std::fprintf(stderr, "usage: test_cli <path-to-tool> [doctest options]\n");
        return 1;
    }
    std::filesystem::remove_all(kScratch);
    std::filesystem::create_directories(kScratch);
    doctest::Context context(static_cast<int>(args.size()), args.data());
    const int rc = context.run();
    std::filesystem::remove_all(kScratch);
    return rc;
}
