#include "cipolab/grpo.hpp"

#include <cmath>

namespace cipolab {

RolloutGroup rollout_group(const PolicyParams& params, const Context& context,
                           int group_size, RngStream& rng, const PromptBank& bank) {
    if (group_size < 2) {
        throw std::invalid_argument("rollout_group: group_size must be >= 2");
    }
    RolloutGroup group;
    group.context = context;
    group.trajectories.reserve(group_size);

    const FeatureVector feats =
        featurize(context, bank.prompt_count, bank.answer_count);
    const std::vector<double> dist = action_distribution(params, feats);

    for (int i = 0; i < group_size; ++i) {
        const SampledAction sampled = sample_action(dist, rng);
        Trajectory traj;
        traj.context = context;
        traj.answer = sampled.answer;
        traj.log_prob = sampled.log_prob;
        traj.reward = verify(bank, context.prompt, sampled.answer);
        group.trajectories.push_back(std::move(traj));
    }
    return group;
}

GroupAdvantages group_advantages(const std::vector<double>& rewards) {
    const std::size_t g = rewards.size();
    if (g < 2) {
        throw std::invalid_argument("group_advantages: need at least 2 rewards");
    }
    double mean = 0.0;
    for (double r : rewards) {
        mean += r;
    }
    mean /= static_cast<double>(g);

    double var = 0.0;
    for (double r : rewards) {
        var += (r - mean) * (r - mean);
    }
    var /= static_cast<double>(g);
    const double sd = std::sqrt(var);

    GroupAdvantages out;
    out.values.assign(g, 0.0);
    if (sd == 0.0) {
        out.degenerate = true;
        return out;
    }
    for (std::size_t i = 0; i < g; ++i) {
        out.values[i] = (rewards[i] - mean) / sd;
    }
    return out;
}

namespace {

// Accumulates sum_i advantage_i * grad log pi into `acc` in item order.
void accumulate_policy_gradient(const PolicyParams& params,
                                const std::vector<UpdateItem>& items,
                                PolicyParams& acc) {
    for (const UpdateItem& item : items) {
        if (item.advantage == 0.0) {
            continue;
        }
        const std::vector<double> probs = action_distribution(params, item.features);
        for (int a = 0; a < params.num_answers; ++a) {
            const double coef =
                item.advantage * ((a == item.answer.index ? 1.0 : 0.0) - probs[a]);
            double* row =
                acc.weights.data() + static_cast<std::size_t>(a) * params.feature_dim;
            for (int d = 0; d < params.feature_dim; ++d) {
                row[d] += coef * item.features.values[d];
            }
        }
    }
}

}  // namespace

PolicyParams combined_gradient_step(const PolicyParams& params,
                                    const PolicyParams& ref_params,
                                    const std::vector<UpdateItem>& base_items,
                                    const std::vector<UpdateItem>& correction_items,
                                    double correction_weight,
                                    const std::vector<FeatureVector>& kl_contexts,
                                    double learning_rate, double kl_coef) {
    PolicyParams grad = zero_params(params.num_answers, params.feature_dim);

    if (!base_items.empty()) {
        PolicyParams acc = zero_params(params.num_answers, params.feature_dim);
        accumulate_policy_gradient(params, base_items, acc);
        const double scale = 1.0 / static_cast<double>(base_items.size());
        for (std::size_t i = 0; i < grad.weights.size(); ++i) {
            grad.weights[i] += scale * acc.weights[i];
        }
    }
    if (!correction_items.empty() && correction_weight != 0.0) {
        PolicyParams acc = zero_params(params.num_answers, params.feature_dim);
        accumulate_policy_gradient(params, correction_items, acc);
        const double scale =
            correction_weight / static_cast<double>(correction_items.size());
        for (std::size_t i = 0; i < grad.weights.size(); ++i) {
            grad.weights[i] += scale * acc.weights[i];
        }
    }
    if (kl_coef != 0.0 && !kl_contexts.empty()) {
        PolicyParams acc = zero_params(params.num_answers, params.feature_dim);
        for (const FeatureVector& feats : kl_contexts) {
            const PolicyParams g = kl_gradient(params, ref_params, feats);
            for (std::size_t i = 0; i < acc.weights.size(); ++i) {
                acc.weights[i] += g.weights[i];
            }
        }
        const double scale = kl_coef / static_cast<double>(kl_contexts.size());
        for (std::size_t i = 0; i < grad.weights.size(); ++i) {
            grad.weights[i] -= scale * acc.weights[i];
        }
    }

    PolicyParams next = params;
    for (std::size_t i = 0; i < next.weights.size(); ++i) {
        next.weights[i] += learning_rate * grad.weights[i];
        if (!std::isfinite(next.weights[i])) {
            throw DivergenceError("non-finite parameter after gradient step");
        }
    }
    return next;
}

PolicyParams policy_gradient_step(const PolicyParams& params,
                                  const PolicyParams& ref_params,
                                  const UpdateBatch& batch, double learning_rate,
                                  double kl_coef) {
    if (batch.items.empty()) {
        throw std::invalid_argument("policy_gradient_step: empty batch");
    }
    return combined_gradient_step(params, ref_params, batch.items, {}, 0.0,
                                  batch.kl_contexts, learning_rate, kl_coef);
}

TrainerState init_trainer(const ExperimentConfig& config) {
    TrainerState state;
    state.bank = generate_bank(config.prompt_count, config.answer_count,
                               config.difficulty_profile, config.seed);
    state.params = initial_policy_params(state.bank);
    state.ref_params = state.params;
    state.controller = ReplayControllerState{config.rho0, std::nullopt, 0};
    return state;
}

BasePhase run_base_phase(const TrainerState& state, const ExperimentConfig& config,
                         int step_index) {
    BasePhase phase;

    RngStream prompt_rng = substream(config.seed, StreamPurpose::prompt_sample,
                                     static_cast<std::uint64_t>(step_index));
    double reward_sum = 0.0;
    int reward_count = 0;

    for (int slot = 0; slot < config.base_batch; ++slot) {
        const int prompt =
            static_cast<int>(prompt_rng.next_below(state.bank.prompt_count));
        const Context context{PromptId{prompt}, std::nullopt};

        RngStream rollout_rng = substream(config.seed, StreamPurpose::base_rollout,
                                          static_cast<std::uint64_t>(step_index),
                                          static_cast<std::uint64_t>(slot));
        RolloutGroup group = rollout_group(state.params, context, config.group_size,
                                           rollout_rng, state.bank);

        std::vector<double> rewards;
        rewards.reserve(group.trajectories.size());
        for (const Trajectory& t : group.trajectories) {
            rewards.push_back(static_cast<double>(t.reward));
            reward_sum += t.reward;
            ++reward_count;
        }
        const GroupAdvantages adv = group_advantages(rewards);
        group.advantages = adv.values;
        group.degenerate = adv.degenerate;
        if (adv.degenerate) {
            ++phase.degenerate_groups;
        }

        const FeatureVector feats =
            featurize(context, state.bank.prompt_count, state.bank.answer_count);
        for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
            phase.items.push_back(
                {feats, group.trajectories[i].answer, group.advantages[i]});
        }
        phase.kl_contexts.push_back(feats);
        phase.groups.push_back(std::move(group));
    }

    phase.mean_reward = reward_count > 0 ? reward_sum / reward_count : 0.0;
    return phase;
}

StepMetrics grpo_train_step(TrainerState& state, const ExperimentConfig& config) {
    const int step_index = state.step + 1;
    BasePhase phase = run_base_phase(state, config, step_index);

    state.params = combined_gradient_step(state.params, state.ref_params, phase.items,
                                          {}, 0.0, phase.kl_contexts,
                                          config.learning_rate, config.kl_coef);
    if (config.kl_reference == "previous") {
        state.ref_params = state.params;
    }

    state.prev_base_groups = std::move(phase.groups);
    state.step = step_index;

    StepMetrics m;
    m.step = step_index;
    m.base_mean_reward = phase.mean_reward;
    m.degenerate_groups = phase.degenerate_groups;
    m.rho = state.controller.rho;
    m.underperf_count = state.controller.underperf_count;
    return m;
}

}  // namespace cipolab
