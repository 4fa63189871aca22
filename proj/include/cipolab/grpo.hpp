#pragma once

#include <stdexcept>
#include <vector>

#include "cipolab/bank.hpp"
#include "cipolab/core.hpp"
#include "cipolab/metrics.hpp"
#include "cipolab/policy.hpp"
#include "cipolab/rng.hpp"

namespace cipolab {

// Raised when a gradient or updated parameter goes non-finite.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UpdateItem {
    FeatureVector features;
    Answer answer;
    double advantage = 0.0;
};

struct UpdateBatch {
    std::vector<UpdateItem> items;
    std::vector<FeatureVector> kl_contexts;
};

struct GroupAdvantages {
    std::vector<double> values;
    bool degenerate = false;
};

// G verified samples from the policy at one context; advantages left unset.
RolloutGroup rollout_group(const PolicyParams& params, const Context& context,
                           int group_size, RngStream& rng, const PromptBank& bank);

// Mean-centered rewards divided by the population standard deviation.
// Unanimous groups are flagged degenerate and get all-zero advantages.
GroupAdvantages group_advantages(const std::vector<double>& rewards);

// One ascent step along (1/|items|) sum advantage * grad log pi minus
// kl_coef * grad KL averaged over kl contexts. Accumulation order is the
// batch order.
PolicyParams policy_gradient_step(const PolicyParams& params,
                                  const PolicyParams& ref_params,
                                  const UpdateBatch& batch, double learning_rate,
                                  double kl_coef);

// Combined base + correction update: gradient is mean over base items plus
// correction_weight times the mean over correction items. Either item list
// may be empty.
PolicyParams combined_gradient_step(const PolicyParams& params,
                                    const PolicyParams& ref_params,
                                    const std::vector<UpdateItem>& base_items,
                                    const std::vector<UpdateItem>& correction_items,
                                    double correction_weight,
                                    const std::vector<FeatureVector>& kl_contexts,
                                    double learning_rate, double kl_coef);

// Mutable run state shared by the GRPO and CIPO trainers.
struct TrainerState {
    PromptBank bank;
    PolicyParams params;
    PolicyParams ref_params;
    ReplayControllerState controller;
    int step = 0;  // completed steps
    std::vector<RolloutGroup> prev_base_groups;   // lagged replay source
    std::vector<RolloutGroup> frozen_replay_pool; // offline-replay ablation
};

TrainerState init_trainer(const ExperimentConfig& config);

// Shared base-stream phase: samples B prompts, builds their rollout groups
// with advantages, and derives per-trajectory update items and KL contexts.
struct BasePhase {
    std::vector<RolloutGroup> groups;
    std::vector<UpdateItem> items;
    std::vector<FeatureVector> kl_contexts;
    double mean_reward = 0.0;
    int degenerate_groups = 0;
};
BasePhase run_base_phase(const TrainerState& state, const ExperimentConfig& config,
                         int step_index);

StepMetrics grpo_train_step(TrainerState& state, const ExperimentConfig& config);

}  // namespace cipolab
