#pragma once

#include <optional>
#include <vector>

namespace cipolab {

// One record per training step. Every preset emits the same field set;
// stream-specific quantities are null when the stream is inactive.
// Wall-clock duration is excluded from the deterministic metrics log and
// written to a separate timing sidecar.
struct StepMetrics {
    int step = 0;
    double base_mean_reward = 0.0;
    std::optional<double> correction_mean_shaped;
    std::optional<double> retention;  // R_t
    double rho = 0.0;
    int underperf_count = 0;
    int degenerate_groups = 0;
    std::optional<double> wrong_to_correct;
    std::optional<double> correct_to_wrong;
    int replay_pos = 0;          // N+
    int replay_neg = 0;          // N-
    int medium_pool_size = 0;
    bool replay_short = false;
    double duration_ms = 0.0;    // sidecar only
};

struct EvalReport {
    std::vector<double> per_prompt_pass1;
    double aggregate_pass1 = 0.0;
    std::vector<int> k_values;
    std::vector<double> pass_at_k_values;  // aggregate, aligned with k_values
    std::optional<double> wrong_to_correct;   // P(new correct | candidate wrong)
    std::optional<double> correct_to_wrong;   // P(new wrong | candidate correct)
};

}  // namespace cipolab
