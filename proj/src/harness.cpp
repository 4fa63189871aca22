#include "cipolab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cipolab/config_io.hpp"

namespace cipolab {

using nlohmann::json;

ExperimentConfig apply_preset(ExperimentConfig config, const std::string& preset) {
    config.preset = preset;
    if (preset == "grpo" || preset == "cipo") {
        return config;
    }
    if (preset == "cipo-fixed-ratio") {
        // Fixed 1:1 success/failure mix, controller disabled.
        config.controller_enabled = false;
        config.rho0 = 0.5;
        return config;
    }
    if (preset == "cipo-no-risk") {
        config.lambda_risk = 0.0;
        return config;
    }
    if (preset == "cipo-no-difficulty") {
        config.delta_low = 0.0;
        config.delta_high = 1.0;
        return config;
    }
    if (preset == "cipo-offline-replay") {
        config.freeze_replay_pool = true;
        return config;
    }
    throw std::invalid_argument("unknown preset: " + preset);
}

double pass_at_k(int n, int c, int k) {
    if (c < 0 || c > n) {
        throw std::invalid_argument("pass_at_k: require 0 <= c <= n");
    }
    if (k < 1 || k > n) {
        throw std::invalid_argument("pass_at_k: require 1 <= k <= n");
    }
    if (n - c < k) {
        return 1.0;
    }
    double prod = 1.0;
    for (int i = 0; i < k; ++i) {
        prod *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
    }
    return 1.0 - prod;
}

EvalReport evaluate(const PolicyParams& params, const PromptBank& bank,
                    int n_samples, const std::vector<int>& k_list,
                    std::uint64_t seed) {
    for (int k : k_list) {
        if (k < 1 || k > n_samples) {
            throw std::invalid_argument("evaluate: k out of [1, n_samples]");
        }
    }

    EvalReport report;
    report.k_values = k_list;
    report.pass_at_k_values.assign(k_list.size(), 0.0);

    int wrong_cond = 0, wrong_fixed = 0;
    int correct_cond = 0, correct_lost = 0;

    for (int x = 0; x < bank.prompt_count; ++x) {
        RngStream rng = substream(seed, StreamPurpose::evaluation,
                                  static_cast<std::uint64_t>(x));
        const Context base_context{PromptId{x}, std::nullopt};
        const FeatureVector feats =
            featurize(base_context, bank.prompt_count, bank.answer_count);
        const std::vector<double> dist = action_distribution(params, feats);

        int c = 0;
        std::optional<Answer> wrong_candidate;
        std::optional<Answer> correct_candidate;
        for (int i = 0; i < n_samples; ++i) {
            const SampledAction sampled = sample_action(dist, rng);
            const int r = verify(bank, base_context.prompt, sampled.answer);
            c += r;
            if (r == 0 && !wrong_candidate) {
                wrong_candidate = sampled.answer;
            }
            if (r == 1 && !correct_candidate) {
                correct_candidate = sampled.answer;
            }
        }

        report.per_prompt_pass1.push_back(static_cast<double>(c) / n_samples);
        for (std::size_t ki = 0; ki < k_list.size(); ++ki) {
            report.pass_at_k_values[ki] += pass_at_k(n_samples, c, k_list[ki]);
        }

        // One correction rollout per available candidate, drawn from the
        // same evaluation stream in a fixed order: wrong first, then correct.
        auto correction_outcome = [&](Answer candidate) {
            const Context ctx{PromptId{x}, candidate};
            const FeatureVector cf =
                featurize(ctx, bank.prompt_count, bank.answer_count);
            const std::vector<double> cd = action_distribution(params, cf);
            const SampledAction s = sample_action(cd, rng);
            return verify(bank, ctx.prompt, s.answer);
        };
        if (wrong_candidate) {
            ++wrong_cond;
            wrong_fixed += correction_outcome(*wrong_candidate);
        }
        if (correct_candidate) {
            ++correct_cond;
            correct_lost += 1 - correction_outcome(*correct_candidate);
        }
    }

    double pass1_sum = 0.0;
    for (double p : report.per_prompt_pass1) {
        pass1_sum += p;
    }
    report.aggregate_pass1 = pass1_sum / bank.prompt_count;
    for (double& v : report.pass_at_k_values) {
        v /= bank.prompt_count;
    }
    if (wrong_cond > 0) {
        report.wrong_to_correct = static_cast<double>(wrong_fixed) / wrong_cond;
    }
    if (correct_cond > 0) {
        report.correct_to_wrong = static_cast<double>(correct_lost) / correct_cond;
    }
    return report;
}

namespace {

json opt_to_json(const std::optional<double>& v) {
    if (v) {
        return *v;
    }
    return nullptr;
}

}  // namespace

json step_metrics_to_json(const StepMetrics& m) {
    return json{
        {"step", m.step},
        {"base_mean_reward", m.base_mean_reward},
        {"correction_mean_shaped", opt_to_json(m.correction_mean_shaped)},
        {"retention", opt_to_json(m.retention)},
        {"rho", m.rho},
        {"underperf_count", m.underperf_count},
        {"degenerate_groups", m.degenerate_groups},
        {"wrong_to_correct", opt_to_json(m.wrong_to_correct)},
        {"correct_to_wrong", opt_to_json(m.correct_to_wrong)},
        {"replay_pos", m.replay_pos},
        {"replay_neg", m.replay_neg},
        {"medium_pool_size", m.medium_pool_size},
        {"replay_short", m.replay_short},
    };
}

json eval_report_to_json(const EvalReport& r) {
    json passk = json::object();
    for (std::size_t i = 0; i < r.k_values.size(); ++i) {
        passk["pass@" + std::to_string(r.k_values[i])] = r.pass_at_k_values[i];
    }
    return json{
        {"aggregate_pass1", r.aggregate_pass1},
        {"pass_at_k", passk},
        {"wrong_to_correct", opt_to_json(r.wrong_to_correct)},
        {"correct_to_wrong", opt_to_json(r.correct_to_wrong)},
        {"per_prompt_pass1", r.per_prompt_pass1},
    };
}

RunResult run_preset(const ExperimentConfig& raw_config) {
    const ExperimentConfig config = apply_preset(raw_config, raw_config.preset);
    const std::vector<std::string> violations = validate_config(config);
    if (!violations.empty()) {
        std::ostringstream os;
        os << "invalid config:";
        for (const std::string& v : violations) {
            os << "\n  - " << v;
        }
        throw std::invalid_argument(os.str());
    }

    TrainerState state = init_trainer(config);

    RunResult result;
    result.bank = state.bank;
    for (int t = 0; t < config.steps; ++t) {
        const auto started = std::chrono::steady_clock::now();
        StepMetrics m;
        std::vector<ReplayCandidate> replay;
        if (config.preset == "grpo") {
            m = grpo_train_step(state, config);
        } else {
            CipoStepResult step = cipo_train_step(state, config);
            m = std::move(step.metrics);
            replay = std::move(step.replay_batch);
        }
        const auto ended = std::chrono::steady_clock::now();
        m.duration_ms =
            std::chrono::duration<double, std::milli>(ended - started).count();
        result.metrics.push_back(std::move(m));
        result.replay_batches.push_back(std::move(replay));
    }

    result.report = evaluate(state.params, state.bank, config.eval_samples,
                             config.eval_k, config.seed);
    result.final_params = std::move(state.params);
    return result;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt_double(*v) : std::string();
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    RunResult result = run_preset(config);

    {
        std::ofstream out(fs::path(out_dir) / "config.json");
        out << config_to_json(apply_preset(config, config.preset)).dump(2) << '\n';
    }
    save_bank(result.bank, (fs::path(out_dir) / "bank.txt").string());
    save_params(result.final_params, (fs::path(out_dir) / "checkpoint.txt").string());

    {
        std::ofstream out(fs::path(out_dir) / "metrics.jsonl");
        for (const StepMetrics& m : result.metrics) {
            out << step_metrics_to_json(m).dump() << '\n';
        }
    }
    {
        std::ofstream out(fs::path(out_dir) / "summary.csv");
        out << "step,base_mean_reward,correction_mean_shaped,retention,rho,"
               "underperf_count,degenerate_groups,wrong_to_correct,"
               "correct_to_wrong,replay_pos,replay_neg,medium_pool_size,"
               "replay_short\n";
        for (const StepMetrics& m : result.metrics) {
            out << m.step << ',' << fmt_double(m.base_mean_reward) << ','
                << fmt_opt(m.correction_mean_shaped) << ',' << fmt_opt(m.retention)
                << ',' << fmt_double(m.rho) << ',' << m.underperf_count << ','
                << m.degenerate_groups << ',' << fmt_opt(m.wrong_to_correct) << ','
                << fmt_opt(m.correct_to_wrong) << ',' << m.replay_pos << ','
                << m.replay_neg << ',' << m.medium_pool_size << ','
                << (m.replay_short ? 1 : 0) << '\n';
        }
    }
    {
        // Wall-clock sidecar; deliberately outside the deterministic set.
        std::ofstream out(fs::path(out_dir) / "timings.csv");
        out << "step,duration_ms\n";
        for (const StepMetrics& m : result.metrics) {
            out << m.step << ',' << fmt_double(m.duration_ms) << '\n';
        }
    }
    {
        std::ofstream out(fs::path(out_dir) / "replay.jsonl");
        for (std::size_t t = 0; t < result.replay_batches.size(); ++t) {
            for (const ReplayCandidate& c : result.replay_batches[t]) {
                out << json{{"step", static_cast<int>(t) + 1},
                            {"prompt", c.prompt.index},
                            {"answer", c.answer.index},
                            {"verdict", c.verdict},
                            {"source_pass_rate", c.source_pass_rate}}
                           .dump()
                    << '\n';
            }
        }
    }
    {
        std::ofstream out(fs::path(out_dir) / "eval.json");
        out << eval_report_to_json(result.report).dump(2) << '\n';
    }
    return result;
}

std::string render_correction_prompt(const ReplayCandidate& candidate) {
    std::ostringstream os;
    os << "Prompt #" << candidate.prompt.index << "\n\n"
       << "Below is a candidate solution from a large language model "
          "(correctness unknown):\n\n"
       << "<candidate_solution>\n"
       << "Answer #" << candidate.answer.index << "\n"
       << "</candidate_solution>\n\n"
       << "Please refer to this solution and provide your solution.\n";
    return os.str();
}

void export_correction_dataset(const std::vector<ReplayCandidate>& batch,
                               const PromptBank& bank, const std::string& path) {
    if (batch.empty()) {
        throw std::invalid_argument("export_correction_dataset: empty batch");
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("export_correction_dataset: cannot open " + path);
    }
    for (const ReplayCandidate& c : batch) {
        if (c.prompt.index < 0 || c.prompt.index >= bank.prompt_count) {
            throw std::out_of_range("export_correction_dataset: prompt out of range");
        }
        out << json{{"prompt_text", render_correction_prompt(c)},
                    {"metadata",
                     {{"prompt", c.prompt.index},
                      {"answer", c.answer.index},
                      {"verdict", c.verdict},
                      {"source_pass_rate", c.source_pass_rate}}}}
                   .dump()
            << '\n';
    }
}

double median(std::vector<double> values) {
    if (values.empty()) {
        throw std::invalid_argument("median: empty input");
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) {
        return values[n / 2];
    }
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& base_config,
                                const std::vector<std::string>& presets,
                                int num_seeds, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (num_seeds < 1) {
        throw std::invalid_argument("run_sweep: num_seeds must be >= 1");
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
    }

    std::vector<SweepRow> rows;
    for (const std::string& preset : presets) {
        std::vector<double> pass1, pass8, w2c, c2w;
        for (int i = 0; i < num_seeds; ++i) {
            ExperimentConfig config = base_config;
            config.preset = preset;
            config.seed = base_config.seed + static_cast<std::uint64_t>(i);

            RunResult run = run_preset(config);
            pass1.push_back(run.report.aggregate_pass1);
            for (std::size_t ki = 0; ki < run.report.k_values.size(); ++ki) {
                if (run.report.k_values[ki] == 8) {
                    pass8.push_back(run.report.pass_at_k_values[ki]);
                }
            }
            if (run.report.wrong_to_correct) {
                w2c.push_back(*run.report.wrong_to_correct);
            }
            if (run.report.correct_to_wrong) {
                c2w.push_back(*run.report.correct_to_wrong);
            }
        }

        SweepRow row;
        row.preset = preset;
        row.median_pass1 = median(pass1);
        row.median_pass8 = pass8.empty() ? 0.0 : median(pass8);
        if (!w2c.empty()) {
            row.median_wrong_to_correct = median(w2c);
        }
        if (!c2w.empty()) {
            row.median_correct_to_wrong = median(c2w);
        }
        rows.push_back(std::move(row));
    }

    if (!out_dir.empty()) {
        std::ofstream out(fs::path(out_dir) / "comparison.csv");
        out << "preset,median_pass1,median_pass8,median_wrong_to_correct,"
               "median_correct_to_wrong\n";
        for (const SweepRow& row : rows) {
            out << row.preset << ',' << fmt_double(row.median_pass1) << ','
                << fmt_double(row.median_pass8) << ','
                << fmt_opt(row.median_wrong_to_correct) << ','
                << fmt_opt(row.median_correct_to_wrong) << '\n';
        }
    }
    return rows;
}

}  // namespace cipolab
