#pragma once

#include <optional>
#include <vector>

#include "cipolab/grpo.hpp"

namespace cipolab {

struct ReplayCandidate {
    PromptId prompt;
    Answer answer;
    int verdict = 0;               // r_c
    double source_pass_rate = 0.0; // P^(x) of the source group
};

struct CorrectionGroup {
    ReplayCandidate candidate;
    RolloutGroup group;  // rollouts over the correction context, shaped rewards set
};

struct ReplayResult {
    std::vector<ReplayCandidate> candidates;
    int medium_pool_size = 0;  // trajectories from medium-difficulty prompts
    int num_pos = 0;           // N+
    int num_neg = 0;           // N-
    bool short_batch = false;  // pool could not supply N even after backfill
};

double empirical_pass_rate(const RolloutGroup& group);

// Closed-interval membership test for the medium-difficulty window.
bool medium_filter(double pass_rate, double delta_low, double delta_high);

// Difficulty-aware replay selection: shuffled medium-difficulty trajectories
// ahead of the shuffled rest, split by verdict, N+ = min(floor(rho*N), |B+|),
// N- = min(N - N+, |B-|), shortfall backfilled from B+.
ReplayResult rollout_replay(const std::vector<RolloutGroup>& base_groups,
                            double delta_low, double delta_high, int target_size,
                            double rho, RngStream& rng);

// Risk-averse shaping: new_reward minus lambda_risk when a correct
// conditioning trajectory led to an incorrect response.
double shaped_reward(int conditioning_verdict, int new_reward, double lambda_risk);

// Adaptive replay ratio controller step.
ReplayControllerState update_ratio(const ReplayControllerState& state,
                                   double retention, const ExperimentConfig& config);

// Mean shaped reward over corrections conditioned on successful trajectories;
// absent when no such trajectories exist.
std::optional<double> retention_reward(const std::vector<CorrectionGroup>& groups);

struct CipoStepResult {
    StepMetrics metrics;
    std::vector<ReplayCandidate> replay_batch;
};

CipoStepResult cipo_train_step(TrainerState& state, const ExperimentConfig& config);

}  // namespace cipolab
