#include "cipolab/cipo.hpp"

#include <algorithm>
#include <cmath>

namespace cipolab {

double empirical_pass_rate(const RolloutGroup& group) {
    if (group.trajectories.empty()) {
        throw std::invalid_argument("empirical_pass_rate: empty group");
    }
    int passed = 0;
    for (const Trajectory& t : group.trajectories) {
        passed += t.reward;
    }
    return static_cast<double>(passed) / static_cast<double>(group.trajectories.size());
}

bool medium_filter(double pass_rate, double delta_low, double delta_high) {
    return pass_rate >= delta_low && pass_rate <= delta_high;
}

ReplayResult rollout_replay(const std::vector<RolloutGroup>& base_groups,
                            double delta_low, double delta_high, int target_size,
                            double rho, RngStream& rng) {
    std::vector<ReplayCandidate> medium;
    std::vector<ReplayCandidate> rest;
    for (const RolloutGroup& group : base_groups) {
        const double rate = empirical_pass_rate(group);
        auto& dest = medium_filter(rate, delta_low, delta_high) ? medium : rest;
        for (const Trajectory& t : group.trajectories) {
            dest.push_back({group.context.prompt, t.answer, t.reward, rate});
        }
    }

    ReplayResult result;
    result.medium_pool_size = static_cast<int>(medium.size());

    rng.shuffle(medium);
    rng.shuffle(rest);

    std::vector<ReplayCandidate> pos;
    std::vector<ReplayCandidate> neg;
    auto split = [&](const std::vector<ReplayCandidate>& src) {
        for (const ReplayCandidate& c : src) {
            (c.verdict == 1 ? pos : neg).push_back(c);
        }
    };
    split(medium);
    split(rest);

    const int n = target_size;
    int n_pos = std::min(static_cast<int>(std::floor(rho * n)),
                         static_cast<int>(pos.size()));
    const int n_neg =
        std::min(n - n_pos, static_cast<int>(neg.size()));
    if (n_pos + n_neg < n) {
        n_pos = std::min(static_cast<int>(pos.size()), n - n_neg);
    }

    result.num_pos = n_pos;
    result.num_neg = n_neg;
    result.short_batch = n_pos + n_neg < n;
    result.candidates.reserve(n_pos + n_neg);
    result.candidates.insert(result.candidates.end(), pos.begin(), pos.begin() + n_pos);
    result.candidates.insert(result.candidates.end(), neg.begin(), neg.begin() + n_neg);
    return result;
}

double shaped_reward(int conditioning_verdict, int new_reward, double lambda_risk) {
    const bool regression = conditioning_verdict == 1 && new_reward == 0;
    return static_cast<double>(new_reward) - (regression ? lambda_risk : 0.0);
}

ReplayControllerState update_ratio(const ReplayControllerState& state,
                                   double retention, const ExperimentConfig& config) {
    ReplayControllerState next;
    next.underperf_count =
        retention < config.target_retention ? state.underperf_count + 1 : 0;

    const double f1 = config.target_retention - retention;
    const double f2 = state.prev_retention
                          ? std::max(0.0, *state.prev_retention - retention)
                          : 0.0;
    const double f3 = static_cast<double>(std::min(next.underperf_count, 3));

    const double factor = 1.0 + config.w1 * f1 + config.w2 * f2 + config.w3 * f3;
    next.rho = std::clamp(state.rho * factor, config.rho_min, config.rho_max);
    next.prev_retention = retention;
    return next;
}

std::optional<double> retention_reward(const std::vector<CorrectionGroup>& groups) {
    double sum = 0.0;
    int count = 0;
    for (const CorrectionGroup& cg : groups) {
        for (const Trajectory& t : cg.group.trajectories) {
            if (t.conditioning_verdict && *t.conditioning_verdict == 1) {
                sum += *t.shaped_reward;
                ++count;
            }
        }
    }
    if (count == 0) {
        return std::nullopt;
    }
    return sum / count;
}

namespace {

struct CorrectionPhase {
    std::vector<CorrectionGroup> groups;
    std::vector<UpdateItem> items;
    std::vector<FeatureVector> kl_contexts;
    std::optional<double> mean_shaped;
    std::optional<double> wrong_to_correct;
    std::optional<double> correct_to_wrong;
};

CorrectionPhase run_correction_phase(const TrainerState& state,
                                     const ExperimentConfig& config, int step_index,
                                     const std::vector<ReplayCandidate>& candidates) {
    CorrectionPhase phase;
    double shaped_sum = 0.0;
    int shaped_count = 0;
    int wrong_cond = 0, wrong_fixed = 0;
    int correct_cond = 0, correct_lost = 0;

    for (std::size_t slot = 0; slot < candidates.size(); ++slot) {
        const ReplayCandidate& cand = candidates[slot];
        const Context context{cand.prompt, cand.answer};

        RngStream rng = substream(config.seed, StreamPurpose::correction_rollout,
                                  static_cast<std::uint64_t>(step_index),
                                  static_cast<std::uint64_t>(slot));
        RolloutGroup group = rollout_group(state.params, context,
                                           config.correction_group_size, rng,
                                           state.bank);

        std::vector<double> raw;
        std::vector<double> shaped;
        raw.reserve(group.trajectories.size());
        shaped.reserve(group.trajectories.size());
        for (Trajectory& t : group.trajectories) {
            t.conditioning_verdict = cand.verdict;
            t.shaped_reward = shaped_reward(cand.verdict, t.reward, config.lambda_risk);
            raw.push_back(static_cast<double>(t.reward));
            shaped.push_back(*t.shaped_reward);
            shaped_sum += *t.shaped_reward;
            ++shaped_count;
            if (cand.verdict == 0) {
                ++wrong_cond;
                wrong_fixed += t.reward;
            } else {
                ++correct_cond;
                correct_lost += 1 - t.reward;
            }
        }

        // Default: shaped values enter the normalization statistics. The
        // alternative normalizes with raw-reward statistics but keeps the
        // shaped value in the numerator.
        GroupAdvantages adv;
        if (config.normalize_shaped) {
            adv = group_advantages(shaped);
            group.advantages = adv.values;
        } else {
            adv = group_advantages(raw);
            group.advantages.assign(raw.size(), 0.0);
            if (!adv.degenerate) {
                double mean = 0.0, var = 0.0;
                for (double r : raw) mean += r;
                mean /= static_cast<double>(raw.size());
                for (double r : raw) var += (r - mean) * (r - mean);
                var /= static_cast<double>(raw.size());
                const double sd = std::sqrt(var);
                for (std::size_t i = 0; i < raw.size(); ++i) {
                    group.advantages[i] = (shaped[i] - mean) / sd;
                }
            }
        }
        group.degenerate = adv.degenerate;

        const FeatureVector feats =
            featurize(context, state.bank.prompt_count, state.bank.answer_count);
        for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
            phase.items.push_back(
                {feats, group.trajectories[i].answer, group.advantages[i]});
        }
        phase.kl_contexts.push_back(feats);
        phase.groups.push_back({cand, std::move(group)});
    }

    if (shaped_count > 0) {
        phase.mean_shaped = shaped_sum / shaped_count;
    }
    if (wrong_cond > 0) {
        phase.wrong_to_correct = static_cast<double>(wrong_fixed) / wrong_cond;
    }
    if (correct_cond > 0) {
        phase.correct_to_wrong = static_cast<double>(correct_lost) / correct_cond;
    }
    return phase;
}

}  // namespace

CipoStepResult cipo_train_step(TrainerState& state, const ExperimentConfig& config) {
    const int step_index = state.step + 1;
    BasePhase base = run_base_phase(state, config, step_index);

    // Replay pool: previous step's rollouts (lagged), this step's (sync), or
    // the frozen step-1 pool (offline ablation).
    const std::vector<RolloutGroup>* pool = nullptr;
    if (config.freeze_replay_pool && !state.frozen_replay_pool.empty()) {
        pool = &state.frozen_replay_pool;
    } else if (config.replay_mode == "sync") {
        pool = &base.groups;
    } else if (!state.prev_base_groups.empty()) {
        pool = &state.prev_base_groups;
    }

    const int replay_target =
        static_cast<int>(std::floor(config.replay_fraction * config.base_batch));

    ReplayResult replay;
    if (pool != nullptr && replay_target > 0) {
        RngStream shuffle_rng = substream(config.seed, StreamPurpose::replay_shuffle,
                                          static_cast<std::uint64_t>(step_index));
        replay = rollout_replay(*pool, config.delta_low, config.delta_high,
                                replay_target, state.controller.rho, shuffle_rng);
    }

    CorrectionPhase correction =
        run_correction_phase(state, config, step_index, replay.candidates);

    state.params = combined_gradient_step(
        state.params, state.ref_params, base.items, correction.items,
        config.correction_weight,
        [&] {
            std::vector<FeatureVector> kl = base.kl_contexts;
            kl.insert(kl.end(), correction.kl_contexts.begin(),
                      correction.kl_contexts.end());
            return kl;
        }(),
        config.learning_rate, config.kl_coef);
    if (config.kl_reference == "previous") {
        state.ref_params = state.params;
    }

    const std::optional<double> retention = retention_reward(correction.groups);
    if (retention && config.controller_enabled) {
        state.controller = update_ratio(state.controller, *retention, config);
    }

    if (config.freeze_replay_pool && state.frozen_replay_pool.empty()) {
        state.frozen_replay_pool = base.groups;
    }
    state.prev_base_groups = std::move(base.groups);
    state.step = step_index;

    CipoStepResult result;
    result.replay_batch = replay.candidates;
    StepMetrics& m = result.metrics;
    m.step = step_index;
    m.base_mean_reward = base.mean_reward;
    m.degenerate_groups = base.degenerate_groups;
    m.correction_mean_shaped = correction.mean_shaped;
    m.retention = retention;
    m.rho = state.controller.rho;
    m.underperf_count = state.controller.underperf_count;
    m.wrong_to_correct = correction.wrong_to_correct;
    m.correct_to_wrong = correction.correct_to_wrong;
    m.replay_pos = replay.num_pos;
    m.replay_neg = replay.num_neg;
    m.medium_pool_size = replay.medium_pool_size;
    m.replay_short = replay.short_batch;
    return result;
}

}  // namespace cipolab
