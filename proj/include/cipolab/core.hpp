#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cipolab {

struct PromptId {
    int index = 0;
    friend bool operator==(PromptId a, PromptId b) { return a.index == b.index; }
};

struct Answer {
    int index = 0;
    friend bool operator==(Answer a, Answer b) { return a.index == b.index; }
};

// A rollout context: the prompt alone (base stream) or the prompt plus a
// previously sampled candidate answer (correction stream). The candidate's
// verdict is never part of the context; the policy must not see it.
struct Context {
    PromptId prompt;
    std::optional<Answer> candidate;

    bool is_correction() const { return candidate.has_value(); }

    friend bool operator==(const Context& a, const Context& b) {
        return a.prompt == b.prompt && a.candidate == b.candidate;
    }
};

struct Trajectory {
    Context context;
    Answer answer;
    double log_prob = 0.0;
    int reward = 0;  // binary verifier outcome
    std::optional<double> shaped_reward;       // correction stream only
    std::optional<int> conditioning_verdict;   // correction stream only

    bool invariants_ok() const {
        if (reward != 0 && reward != 1) return false;
        if (shaped_reward.has_value() != context.is_correction()) return false;
        if (conditioning_verdict.has_value() != context.is_correction()) return false;
        return true;
    }
};

struct RolloutGroup {
    Context context;
    std::vector<Trajectory> trajectories;
    std::vector<double> advantages;  // empty until computed
    bool degenerate = false;         // zero reward variance
};

struct ReplayControllerState {
    double rho = 0.0;
    std::optional<double> prev_retention;
    int underperf_count = 0;
};

struct ExperimentConfig {
    // environment
    int prompt_count = 200;  // P
    int answer_count = 10;   // A
    std::vector<std::pair<double, double>> difficulty_profile = {
        {0.3, 0.0}, {0.4, 2.0}, {0.3, 5.0}};  // (fraction, distractor strength)

    // rollout sizes
    int group_size = 8;                // G, base rollouts per prompt
    int base_batch = 32;               // B, prompts per step
    double replay_fraction = 1.0;      // gamma: correction batch = floor(gamma * B)
    int correction_group_size = 8;     // n, correction rollouts per candidate

    // adaptive replay controller
    double rho0 = 0.3;
    double rho_min = 0.2;
    double rho_max = 0.8;
    double w1 = 0.8;
    double w2 = 0.3;
    double w3 = 0.05;
    double target_retention = 0.80;  // R*

    // shaping and difficulty window
    double lambda_risk = 1.0;
    double delta_low = 3.0 / 8.0;
    double delta_high = 6.0 / 8.0;

    // joint objective and optimizer
    double correction_weight = 1.0;  // lambda
    // Tuned for the linear desk-scale policy: small enough to stay stable,
    // large enough to learn within 300 steps; the KL pull keeps groups
    // stochastic so group-relative advantages stay informative.
    double learning_rate = 3.0;
    double kl_coef = 0.6;

    int steps = 300;
    std::uint64_t seed = 1;
    std::string preset = "cipo";

    // behavior switches
    bool controller_enabled = true;
    bool freeze_replay_pool = false;       // offline-replay ablation
    std::string replay_mode = "lagged";    // "lagged" | "sync"
    bool normalize_shaped = true;          // advantages from shaped vs raw rewards
    std::string kl_reference = "initial";  // "initial" | "previous"

    // evaluation
    int eval_samples = 32;
    std::vector<int> eval_k = {1, 8, 32};
};

// Returns one human-readable message per violated invariant; empty means valid.
std::vector<std::string> validate_config(const ExperimentConfig& config);

}  // namespace cipolab
