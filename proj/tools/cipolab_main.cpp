#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cipolab/config_io.hpp"
#include "cipolab/harness.hpp"

namespace {

using namespace cipolab;

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitDivergence = 2;

std::vector<int> parse_k_list(const std::string& spec) {
    std::vector<int> out;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        out.push_back(std::stoi(tok));
    }
    return out;
}

int cmd_run(const std::string& config_path, const std::string& preset,
            std::int64_t seed, const std::string& out_dir, int steps_override) {
    ExperimentConfig config =
        config_path.empty() ? ExperimentConfig{} : load_config_file(config_path);
    if (!preset.empty()) {
        config.preset = preset;
    }
    if (seed >= 0) {
        config.seed = static_cast<std::uint64_t>(seed);
    }
    if (steps_override > 0) {
        config.steps = steps_override;
    }

    RunResult result = run_experiment(config, out_dir);
    const StepMetrics& last = result.metrics.back();
    std::cout << "preset=" << config.preset << " seed=" << config.seed
              << " steps=" << config.steps
              << " final_base_mean_reward=" << last.base_mean_reward
              << " pass@1=" << result.report.aggregate_pass1 << '\n'
              << "artifacts written to " << out_dir << '\n';
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& bank_path,
             int samples, const std::string& k_spec, std::int64_t seed) {
    const PolicyParams params = load_params(checkpoint);
    const PromptBank bank = load_bank(bank_path);
    const EvalReport report =
        evaluate(params, bank, samples, parse_k_list(k_spec),
                 seed >= 0 ? static_cast<std::uint64_t>(seed) : bank.seed);
    std::cout << eval_report_to_json(report).dump(2) << '\n';
    return kExitOk;
}

int cmd_export(const std::string& run_dir, int step, const std::string& out_path) {
    namespace fs = std::filesystem;
    const PromptBank bank = load_bank((fs::path(run_dir) / "bank.txt").string());

    std::ifstream in(fs::path(run_dir) / "replay.jsonl");
    if (!in) {
        throw std::runtime_error("cannot open replay log in " + run_dir);
    }
    std::vector<ReplayCandidate> batch;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const nlohmann::json j = nlohmann::json::parse(line);
        if (j.at("step").get<int>() != step) {
            continue;
        }
        batch.push_back({PromptId{j.at("prompt").get<int>()},
                         Answer{j.at("answer").get<int>()},
                         j.at("verdict").get<int>(),
                         j.at("source_pass_rate").get<double>()});
    }
    if (batch.empty()) {
        std::cerr << "no replay candidates recorded for step " << step << '\n';
        return kExitConfigError;
    }
    export_correction_dataset(batch, bank, out_path);
    std::cout << "exported " << batch.size() << " correction records to " << out_path
              << '\n';
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, int num_seeds,
              const std::string& out_dir, const std::string& presets_spec) {
    ExperimentConfig config =
        config_path.empty() ? ExperimentConfig{} : load_config_file(config_path);

    std::vector<std::string> presets;
    if (presets_spec.empty()) {
        presets = kPresets;
    } else {
        std::stringstream ss(presets_spec);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            presets.push_back(tok);
        }
    }

    const std::vector<SweepRow> rows = run_sweep(config, presets, num_seeds, out_dir);
    std::printf("%-22s %10s %10s %14s %14s\n", "preset", "pass@1", "pass@8",
                "wrong->correct", "correct->wrong");
    for (const SweepRow& row : rows) {
        std::printf("%-22s %10.4f %10.4f %14s %14s\n", row.preset.c_str(),
                    row.median_pass1, row.median_pass8,
                    row.median_wrong_to_correct
                        ? std::to_string(*row.median_wrong_to_correct).c_str()
                        : "-",
                    row.median_correct_to_wrong
                        ? std::to_string(*row.median_correct_to_wrong).c_str()
                        : "-");
    }
    if (!out_dir.empty()) {
        std::cout << "comparison table written to " << out_dir << "/comparison.csv\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale CIPO / GRPO training laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string preset;
    std::int64_t seed = -1;
    std::string out_dir = "run";
    int steps = 0;
    auto* run = app.add_subcommand("run", "Train one preset and write artifacts");
    run->add_option("--config", config_path, "JSON config file");
    run->add_option("--preset", preset, "Preset name (overrides config)");
    run->add_option("--seed", seed, "Experiment seed (overrides config)");
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--steps", steps, "Step count (overrides config)");

    std::string checkpoint;
    std::string bank_path;
    int samples = 32;
    std::string k_spec = "1,8,32";
    std::int64_t eval_seed = -1;
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a bank");
    ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    ev->add_option("--bank", bank_path, "Bank file")->required();
    ev->add_option("--samples", samples, "Samples per prompt");
    ev->add_option("--k", k_spec, "Comma-separated k values");
    ev->add_option("--seed", eval_seed, "Evaluation seed (default: bank seed)");

    std::string export_run_dir;
    int export_step = 0;
    std::string export_out;
    auto* ex = app.add_subcommand("export-corrections",
                                  "Render the correction prompts of one step");
    ex->add_option("--run", export_run_dir, "Run directory")->required();
    ex->add_option("--step", export_step, "Step index (1-based)")->required();
    ex->add_option("--out", export_out, "Output JSONL path")->required();

    std::string sweep_config;
    int num_seeds = 5;
    std::string sweep_out = "sweep";
    std::string presets_spec;
    auto* sw = app.add_subcommand("sweep",
                                  "Run presets across seeds and compare medians");
    sw->add_option("--config", sweep_config, "JSON config file");
    sw->add_option("--seeds", num_seeds, "Number of seeds");
    sw->add_option("--out", sweep_out, "Output directory");
    sw->add_option("--presets", presets_spec, "Comma-separated preset list");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(config_path, preset, seed, out_dir, steps);
        }
        if (ev->parsed()) {
            return cmd_eval(checkpoint, bank_path, samples, k_spec, eval_seed);
        }
        if (ex->parsed()) {
            return cmd_export(export_run_dir, export_step, export_out);
        }
        if (sw->parsed()) {
            return cmd_sweep(sweep_config, num_seeds, sweep_out, presets_spec);
        }
    } catch (const DivergenceError& e) {
        std::cerr << "divergence abort: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfigError;
    }
    return kExitOk;
}
