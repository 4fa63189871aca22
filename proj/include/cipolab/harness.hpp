#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cipolab/cipo.hpp"
#include "cipolab/grpo.hpp"
#include "cipolab/metrics.hpp"

namespace cipolab {

inline const std::vector<std::string> kPresets = {
    "grpo",          "cipo",          "cipo-fixed-ratio",
    "cipo-no-risk",  "cipo-no-difficulty", "cipo-offline-replay"};

// Translates a preset name into config switches. Throws on unknown preset.
ExperimentConfig apply_preset(ExperimentConfig config, const std::string& preset);

// Unbiased estimator 1 - C(n-c, k)/C(n, k) in product form.
double pass_at_k(int n, int c, int k);

// Read-only evaluation: n_samples base rollouts per prompt, pass@1 and
// pass@k aggregates, plus one correction rollout for one wrong and one
// correct candidate per prompt where available.
EvalReport evaluate(const PolicyParams& params, const PromptBank& bank,
                    int n_samples, const std::vector<int>& k_list,
                    std::uint64_t seed);

nlohmann::json step_metrics_to_json(const StepMetrics& m);
nlohmann::json eval_report_to_json(const EvalReport& r);

struct RunResult {
    std::vector<StepMetrics> metrics;
    std::vector<std::vector<ReplayCandidate>> replay_batches;  // per step
    EvalReport report;
    PolicyParams final_params;
    PromptBank bank;
};

// In-memory run of one preset: training steps plus final evaluation.
RunResult run_preset(const ExperimentConfig& config);

// Full experiment: runs the preset, then writes under out_dir:
//   config.json, bank.txt, checkpoint.txt, metrics.jsonl, summary.csv,
//   eval.json, replay.jsonl (per-step replay candidates), timings.csv.
// timings.csv carries wall-clock durations and is the only
// non-deterministic output.
RunResult run_experiment(const ExperimentConfig& config, const std::string& out_dir);

// Renders the verdict-blind correction prompt for one candidate.
std::string render_correction_prompt(const ReplayCandidate& candidate);

// JSONL export: one record per candidate with the rendered prompt text and
// the verdict confined to a separate metadata object.
void export_correction_dataset(const std::vector<ReplayCandidate>& batch,
                               const PromptBank& bank, const std::string& path);

struct SweepRow {
    std::string preset;
    double median_pass1 = 0.0;
    double median_pass8 = 0.0;
    std::optional<double> median_wrong_to_correct;
    std::optional<double> median_correct_to_wrong;
};

// Runs each preset across `num_seeds` seeds (seed = base_seed + i) and
// aggregates medians of the final evaluation metrics.
std::vector<SweepRow> run_sweep(const ExperimentConfig& base_config,
                                const std::vector<std::string>& presets,
                                int num_seeds, const std::string& out_dir);

double median(std::vector<double> values);

}  // namespace cipolab
