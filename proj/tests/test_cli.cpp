// End-to-end checks of the installed CLI binary.

#include "specssm/model.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

namespace {

namespace fs = std::filesystem;

struct temp_dir {
    fs::path path;
    temp_dir() {
        path = fs::temp_directory_path() /
               ("specssm_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~temp_dir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

int run_cli(const std::string & args) {
    const std::string cmd = std::string(SPECSSM_CLI_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path & p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const fs::path & p, const std::string & text) {
    std::ofstream os(p, std::ios::binary);
    os << text;
}

} // namespace

TEST_CASE("decode runs and is byte-deterministic") {
    temp_dir d;
    const auto out1 = d.path / "a";
    const auto out2 = d.path / "b";
    REQUIRE(run_cli("--seed 5 --out " + out1.string() +
                    " --set decode.max_new_tokens=8 decode") == 0);
    REQUIRE(run_cli("--seed 5 --out " + out2.string() +
                    " --set decode.max_new_tokens=8 decode") == 0);
    CHECK(slurp(out1 / "decode.json") == slurp(out2 / "decode.json"));
    CHECK(fs::exists(out1 / "manifest.json"));
    CHECK(fs::exists(out1 / "ledger.csv"));
}

TEST_CASE("cost command pins the worked example in its csv") {
    temp_dir d;
    REQUIRE(run_cli("--out " + d.path.string() +
                    " --set cost.blocks_b=4 --set cost.tiles_t=8 --set cost.tokens_l=8 cost") ==
            0);
    const std::string csv = slurp(d.path / "cost.csv");
    CHECK(csv.find("total_cycles") != std::string::npos);
    CHECK(csv.find(",40,") != std::string::npos);
}

TEST_CASE("ablation emits the cumulative toggle sweep") {
    temp_dir d;
    REQUIRE(run_cli("--out " + d.path.string() + " ablation") == 0);
    const std::string csv = slurp(d.path / "ablation.csv");
    CHECK(csv.find("none") != std::string::npos);
    CHECK(csv.find("T1+T2+T3") != std::string::npos);
    CHECK(fs::exists(d.path / "ablation.json"));
}

TEST_CASE("invalid config exits with status 2 and does not mutate the input") {
    temp_dir d;
    const auto cfg = d.path / "bad.json";
    write_file(cfg, R"({"bogus": true})");
    const std::string before = slurp(cfg);
    CHECK(run_cli("--config " + cfg.string() + " decode") == 2);
    CHECK(slurp(cfg) == before);

    write_file(cfg, "{");
    CHECK(run_cli("--config " + cfg.string() + " decode") == 2);
}

TEST_CASE("gen-weights produces a loadable file") {
    temp_dir d;
    const auto wfile = d.path / "w.bin";
    REQUIRE(run_cli("--out " + d.path.string() + " gen-weights --model draft --path " +
                    wfile.string()) == 0);
    const specssm::model_weights w = specssm::load_weights(wfile.string());
    CHECK(w.config.n_layers == 1);
    // deterministic given config and seed: regenerate and compare bytes
    const auto wfile2 = d.path / "w2.bin";
    REQUIRE(run_cli("--out " + d.path.string() + " gen-weights --model draft --path " +
                    wfile2.string()) == 0);
    CHECK(slurp(wfile) == slurp(wfile2));
}

TEST_CASE("quick oracle-check passes on a fresh build") {
    // the fast subset used as a smoke gate; the full suite runs in the
    // acceptance binary
    CHECK(run_cli("oracle-check --quick --only cost-model-equivalence --only "
                  "memory-ratio-sanity --only occupancy-bound") == 0);
}

TEST_CASE("accept-report writes both mode grids") {
    temp_dir d;
    REQUIRE(run_cli("--out " + d.path.string() +
                    " --set decode.prompt_len=12 accept-report --quick") == 0);
    const std::string greedy = slurp(d.path / "accept_report_greedy.csv");
    CHECK(greedy.rfind("topology,dataset,prediction_length,mean_accepted,rounds,tokens", 0) == 0);
    CHECK(fs::exists(d.path / "accept_report_stochastic.csv"));
}
