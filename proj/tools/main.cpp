#include "specssm/config.hpp"
#include "specssm/cost_model.hpp"
#include "specssm/engine.hpp"
#include "specssm/oracle_suite.hpp"
#include "specssm/report.hpp"
#include "specssm/version.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>

namespace {

using namespace specssm;

constexpr int exit_ok     = 0;
constexpr int exit_config = 2;
constexpr int exit_oracle = 3;
constexpr int exit_io     = 4;

struct common_args {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    int64_t seed = -1;
};

run_config load_config(const common_args & args) {
    std::vector<std::string> ov = args.overrides;
    if (args.seed >= 0) ov.push_back("seed=" + std::to_string(args.seed));
    run_config cfg = args.config_path.empty()
                         ? parse_run_config(run_config_to_json(default_run_config()), ov)
                         : load_run_config(args.config_path, ov);
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    return cfg;
}

std::string out_path(const run_config & cfg, const std::string & name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

int cmd_decode(const common_args & args) {
    run_config cfg = load_config(args);
    config_models m = materialize_models(cfg);
    decode_result r = decode(m.target, m.draft, m.prompt, cfg.decode);

    nlohmann::ordered_json j;
    j["prompt"]  = m.prompt;
    j["tokens"]  = r.tokens;
    j["metrics"] = nlohmann::ordered_json::parse(r.metrics.to_json());
    write_text_file(out_path(cfg, "decode.json"), j.dump(2) + "\n");
    write_text_file(out_path(cfg, "ledger.csv"), r.metrics.ledger_total.to_csv());
    write_manifest(cfg.out_dir, "decode", cfg.normalized_text, cfg.seed,
                   {"decode.json", "ledger.csv"});
    std::cout << "decoded " << r.tokens.size() << " tokens in " << r.metrics.rounds
              << " rounds (mean accepted " << r.metrics.mean_accepted << ")\n";
    return exit_ok;
}

int cmd_accept_report(const common_args & args, bool quick) {
    run_config cfg = load_config(args);
    config_models m = materialize_models(cfg);

    for (acceptance_mode mode : {acceptance_mode::greedy, acceptance_mode::stochastic}) {
        accept_report_options ro;
        ro.mode = mode;
        ro.seed = cfg.seed;
        if (quick) {
            ro.prompts_per_cell = 4;
            ro.max_new_tokens   = 16;
        }
        const auto cells = acceptance_report(m.target, m.draft, ro);
        std::vector<report_record> records;
        for (const auto & c : cells) {
            report_record rec;
            rec.add("topology", c.topology);
            rec.add("dataset", c.dataset);
            rec.add("prediction_length", c.prediction_length);
            rec.add("mean_accepted", c.mean_accepted);
            rec.add("rounds", c.rounds);
            rec.add("tokens", c.tokens);
            records.push_back(std::move(rec));
        }
        const std::string name = std::string("accept_report_") + to_string(mode) + ".csv";
        emit_report(records, report_format::csv, out_path(cfg, name));
        std::cout << "wrote " << out_path(cfg, name) << "\n";
    }
    write_manifest(cfg.out_dir, "accept-report", cfg.normalized_text, cfg.seed,
                   {"accept_report_greedy.csv", "accept_report_stochastic.csv"});
    return exit_ok;
}

int cmd_cost(const common_args & args) {
    run_config cfg = load_config(args);
    const cost_params & c = cfg.cost;

    std::vector<report_record> records;
    report_record rec;
    rec.add("blocks_b", c.blocks_b);
    rec.add("tiles_t", c.tiles_t);
    rec.add("tokens_l", c.tokens_l);
    rec.add("linear_cycles", linear_cycles(c.blocks_b, c.tiles_t));
    rec.add("ssm_cycles", ssm_cycles(c.tokens_l, c.blocks_b));
    rec.add("serialized_cycles",
            linear_cycles(c.blocks_b, c.tiles_t) + ssm_cycles(c.tokens_l, c.blocks_b));
    rec.add("total_cycles", overlapped_latency(c.blocks_b, c.tiles_t, c.tokens_l));
    rec.add("simulated_cycles", simulate_pipeline(c.blocks_b, c.tiles_t, c.tokens_l));
    records.push_back(std::move(rec));
    emit_report(records, report_format::csv, out_path(cfg, "cost.csv"));
    write_manifest(cfg.out_dir, "cost", cfg.normalized_text, cfg.seed, {"cost.csv"});
    std::cout << "wrote " << out_path(cfg, "cost.csv") << "\n";
    return exit_ok;
}

int cmd_ablation(const common_args & args) {
    run_config cfg = load_config(args);
    const std::vector<ablation_toggles> presets = {
        {false, false, false}, {true, false, false}, {true, true, false}, {true, true, true}};

    std::vector<report_record> records;
    nlohmann::ordered_json panels;
    for (const auto & tg : presets) {
        const cost_report rep = ablation_run(tg, cfg.ablation);
        report_record rec;
        rec.add("toggles", tg.label());
        rec.add("prefill_len", cfg.ablation.prefill_len);
        rec.add("decode_len", cfg.ablation.decode_len);
        rec.add("linear_cycles", rep.linear_cycles);
        rec.add("ssm_cycles", rep.ssm_cycles);
        rec.add("total_cycles", rep.total_cycles);
        rec.add("offchip_bytes", rep.offchip_bytes);
        records.push_back(std::move(rec));
        panels["transmission"][tg.label()] = rep.offchip_bytes;
        panels["latency"][tg.label()]      = rep.total_cycles;
    }
    // normalized transmission/latency panels for downstream plotting
    const double base_bytes  = static_cast<double>(panels["transmission"]["none"].get<uint64_t>());
    const double base_cycles = static_cast<double>(panels["latency"]["none"].get<uint64_t>());
    for (const auto & tg : presets) {
        panels["transmission_normalized"][tg.label()] =
            static_cast<double>(panels["transmission"][tg.label()].get<uint64_t>()) / base_bytes;
        panels["latency_normalized"][tg.label()] =
            static_cast<double>(panels["latency"][tg.label()].get<uint64_t>()) / base_cycles;
    }
    panels["baseline_note"] =
        "normalization baseline: no-toggle speculative run under the same cost parameters";

    emit_report(records, report_format::csv, out_path(cfg, "ablation.csv"));
    write_text_file(out_path(cfg, "ablation.json"), panels.dump(2) + "\n");
    write_manifest(cfg.out_dir, "ablation", cfg.normalized_text, cfg.seed,
                   {"ablation.csv", "ablation.json"});
    std::cout << "wrote " << out_path(cfg, "ablation.csv") << "\n";
    return exit_ok;
}

int cmd_gen_weights(const common_args & args, const std::string & which,
                    const std::string & path) {
    run_config cfg = load_config(args);
    if (which != "target" && which != "draft") {
        throw config_error("gen-weights: --model must be target or draft");
    }
    const model_weights w = which == "target"
                                ? init_weights(cfg.target_model, cfg.target_weight_seed)
                                : init_weights(cfg.draft_model, cfg.draft_weight_seed);
    const std::string p = path.empty() ? out_path(cfg, which + "_weights.bin") : path;
    if (std::filesystem::path(p).has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(std::filesystem::path(p).parent_path(), ec);
    }
    save_weights(w, p);
    write_manifest(cfg.out_dir, "gen-weights", cfg.normalized_text, cfg.seed, {p});
    std::cout << "wrote " << p << "\n";
    return exit_ok;
}

int cmd_oracle_check(const common_args & args, bool quick,
                     const std::vector<std::string> & only) {
    run_config cfg = load_config(args);
    oracle_options oo;
    oo.quick = quick;
    oo.seed  = cfg.seed;
    oo.only  = only;
    const auto outcomes = run_oracle_suite(oo, std::cout);
    int failed = 0;
    for (const auto & o : outcomes) failed += o.pass ? 0 : 1;
    std::cout << outcomes.size() - failed << "/" << outcomes.size() << " checks passed\n";
    return failed == 0 ? exit_ok : exit_oracle;
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"speculative decoding engine for state-space models"};
    app.set_version_flag("--version", SPECSSM_VERSION);
    app.require_subcommand(1);

    common_args args;
    app.add_option("--config", args.config_path, "JSON run configuration");
    app.add_option("--set", args.overrides, "dotted-path config overrides (key=value)");
    app.add_option("--out", args.out_dir, "output directory");
    app.add_option("--seed", args.seed, "top-level seed override");

    auto * c_decode = app.add_subcommand("decode", "run one speculative decode");
    auto * c_report = app.add_subcommand("accept-report",
                                         "acceptance-length grid over topologies and lengths");
    bool report_quick = false;
    c_report->add_flag("--quick", report_quick, "small grid for smoke runs");
    auto * c_oracle = app.add_subcommand("oracle-check", "run the oracle/property suite");
    bool oracle_quick = false;
    std::vector<std::string> oracle_only;
    c_oracle->add_flag("--quick", oracle_quick, "reduced iteration counts");
    c_oracle->add_option("--only", oracle_only, "run only the named checks");
    auto * c_cost     = app.add_subcommand("cost", "evaluate the dataflow latency model");
    auto * c_ablation = app.add_subcommand("ablation", "toggle sweep over T1/T2/T3");
    auto * c_gen      = app.add_subcommand("gen-weights", "write a deterministic weight file");
    std::string gen_model = "target";
    std::string gen_path;
    c_gen->add_option("--model", gen_model, "target or draft");
    c_gen->add_option("--path", gen_path, "output file (default <out>/<model>_weights.bin)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_decode->parsed()) return cmd_decode(args);
        if (c_report->parsed()) return cmd_accept_report(args, report_quick);
        if (c_oracle->parsed()) return cmd_oracle_check(args, oracle_quick, oracle_only);
        if (c_cost->parsed()) return cmd_cost(args);
        if (c_ablation->parsed()) return cmd_ablation(args);
        if (c_gen->parsed()) return cmd_gen_weights(args, gen_model, gen_path);
    } catch (const config_error & e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const io_error & e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_io;
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_ok;
}
