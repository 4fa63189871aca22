#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <set>

#include "cipolab/cipo.hpp"

using namespace cipolab;

namespace {

// Synthetic base group for a prompt with the given reward pattern.
RolloutGroup make_group(int prompt, const std::vector<int>& rewards) {
    RolloutGroup g;
    g.context = Context{PromptId{prompt}, std::nullopt};
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        Trajectory t;
        t.context = g.context;
        t.answer = Answer{static_cast<int>(i)};
        t.reward = rewards[i];
        g.trajectories.push_back(t);
    }
    return g;
}

std::vector<int> pattern(int passes, int total) {
    std::vector<int> r(total, 0);
    std::fill(r.begin(), r.begin() + passes, 1);
    return r;
}

// The 4-prompt fixture: pass counts 8/8, 5/8, 0/8, 3/8.
std::vector<RolloutGroup> fixture_groups() {
    return {make_group(0, pattern(8, 8)), make_group(1, pattern(5, 8)),
            make_group(2, pattern(0, 8)), make_group(3, pattern(3, 8))};
}

ExperimentConfig controller_defaults() {
    ExperimentConfig c;  // Table-5 values are the struct defaults
    return c;
}

}  // namespace

TEST_CASE("empirical_pass_rate arithmetic") {
    CHECK(empirical_pass_rate(make_group(0, {1, 0, 1, 0, 0, 0, 0, 0})) ==
          doctest::Approx(0.25));
    CHECK(empirical_pass_rate(make_group(0, pattern(8, 8))) == doctest::Approx(1.0));
    CHECK(empirical_pass_rate(make_group(0, pattern(0, 8))) == doctest::Approx(0.0));
    CHECK_THROWS_AS(empirical_pass_rate(RolloutGroup{}), std::invalid_argument);
}

TEST_CASE("medium_filter is boundary-inclusive") {
    const double lo = 3.0 / 8.0;
    const double hi = 6.0 / 8.0;
    CHECK(medium_filter(3.0 / 8.0, lo, hi));
    CHECK(medium_filter(6.0 / 8.0, lo, hi));
    CHECK_FALSE(medium_filter(7.0 / 8.0, lo, hi));
    CHECK_FALSE(medium_filter(2.0 / 8.0, lo, hi));
}

TEST_CASE("rollout_replay prioritizes the medium-difficulty prompts") {
    RngStream rng(1);
    const ReplayResult r =
        rollout_replay(fixture_groups(), 3.0 / 8.0, 6.0 / 8.0, 8, 0.5, rng);
    CHECK(r.medium_pool_size == 16);  // prompts 1 and 3, 8 trajectories each
    // With N=8 both medium verdict pools are ample, so every selected
    // candidate comes from the medium prompts.
    REQUIRE(static_cast<int>(r.candidates.size()) == 8);
    for (const ReplayCandidate& c : r.candidates) {
        CHECK((c.prompt.index == 1 || c.prompt.index == 3));
    }
}

TEST_CASE("rollout_replay splits by verdict with N+ = floor(rho N)") {
    RngStream rng(2);
    const ReplayResult r =
        rollout_replay(fixture_groups(), 3.0 / 8.0, 6.0 / 8.0, 4, 0.5, rng);
    CHECK(r.num_pos == 2);
    CHECK(r.num_neg == 2);
    CHECK_FALSE(r.short_batch);
    int pos = 0;
    for (const ReplayCandidate& c : r.candidates) {
        pos += c.verdict;
    }
    CHECK(pos == 2);
}

TEST_CASE("rollout_replay backfills from successes when failures run out") {
    // One failure in the whole pool: 8/8 and 7/8 prompts only.
    std::vector<RolloutGroup> groups = {make_group(0, pattern(8, 8)),
                                        make_group(1, pattern(7, 8))};
    RngStream rng(3);
    const ReplayResult r = rollout_replay(groups, 3.0 / 8.0, 6.0 / 8.0, 4, 0.5, rng);
    CHECK(r.num_pos == 3);
    CHECK(r.num_neg == 1);
    CHECK_FALSE(r.short_batch);
}

TEST_CASE("rollout_replay flags a short batch when the pool is exhausted") {
    std::vector<RolloutGroup> groups = {make_group(0, pattern(1, 2))};
    RngStream rng(4);
    const ReplayResult r = rollout_replay(groups, 0.0, 1.0, 5, 0.5, rng);
    CHECK(r.short_batch);
    CHECK(static_cast<int>(r.candidates.size()) == 2);
}

TEST_CASE("replay selection is reproducible under the same shuffle stream") {
    RngStream a(42);
    RngStream b(42);
    const ReplayResult ra =
        rollout_replay(fixture_groups(), 3.0 / 8.0, 6.0 / 8.0, 6, 0.4, a);
    const ReplayResult rb =
        rollout_replay(fixture_groups(), 3.0 / 8.0, 6.0 / 8.0, 6, 0.4, b);
    REQUIRE(ra.candidates.size() == rb.candidates.size());
    for (std::size_t i = 0; i < ra.candidates.size(); ++i) {
        CHECK(ra.candidates[i].prompt == rb.candidates[i].prompt);
        CHECK(ra.candidates[i].answer == rb.candidates[i].answer);
    }
}

TEST_CASE("shaped_reward truth table") {
    CHECK(shaped_reward(1, 0, 1.0) == doctest::Approx(-1.0));
    CHECK(shaped_reward(0, 0, 1.0) == doctest::Approx(0.0));
    CHECK(shaped_reward(1, 1, 1.0) == doctest::Approx(1.0));
    CHECK(shaped_reward(0, 1, 1.0) == doctest::Approx(1.0));

    RngStream rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const double lam = 5.0 * rng.next_unit();
        CHECK(shaped_reward(1, 1, lam) == 1.0);
        CHECK(shaped_reward(0, 1, lam) == 1.0);
        CHECK(shaped_reward(0, 0, lam) == 0.0);
        CHECK(shaped_reward(1, 0, lam) == -lam);
    }
}

TEST_CASE("update_ratio hand traces") {
    const ExperimentConfig config = controller_defaults();
    {
        const ReplayControllerState next =
            update_ratio({0.3, 0.7, 0}, 0.5, config);
        CHECK(next.underperf_count == 1);
        CHECK(next.rho == doctest::Approx(0.405).epsilon(1e-12));
        CHECK(*next.prev_retention == doctest::Approx(0.5));
    }
    {
        const ReplayControllerState next =
            update_ratio({0.5, 0.85, 0}, 0.9, config);
        CHECK(next.underperf_count == 0);
        CHECK(next.rho == doctest::Approx(0.46).epsilon(1e-12));
    }
    {
        const ReplayControllerState next =
            update_ratio({0.78, 0.9, 2}, 0.2, config);
        CHECK(next.underperf_count == 3);
        CHECK(next.rho == doctest::Approx(0.8).epsilon(1e-12));  // clipped
    }
}

TEST_CASE("update_ratio uses f2 = 0 when no previous retention exists") {
    const ExperimentConfig config = controller_defaults();
    const ReplayControllerState next =
        update_ratio({0.3, std::nullopt, 0}, 0.5, config);
    // factor = 1 + 0.8*0.3 + 0 + 0.05*1 = 1.29
    CHECK(next.rho == doctest::Approx(0.3 * 1.29).epsilon(1e-12));
}

TEST_CASE("controller counter semantics and clip safety") {
    const ExperimentConfig config = controller_defaults();
    ReplayControllerState state{config.rho0, std::nullopt, 0};
    RngStream rng(2025);

    int below_streak = 0;
    for (int i = 0; i < 20000; ++i) {
        const double retention = -1.0 + 2.0 * rng.next_unit();
        state = update_ratio(state, retention, config);
        if (retention < config.target_retention) {
            ++below_streak;
            CHECK(state.underperf_count == below_streak);
        } else {
            below_streak = 0;
            CHECK(state.underperf_count == 0);
        }
        CHECK(state.rho >= config.rho_min);
        CHECK(state.rho <= config.rho_max);
    }
}

TEST_CASE("retention_reward averages shaped rewards of successful conditions") {
    auto make_correction = [](int verdict, std::vector<double> shaped) {
        CorrectionGroup cg;
        cg.candidate = {PromptId{0}, Answer{0}, verdict, 0.5};
        cg.group.context = Context{PromptId{0}, Answer{0}};
        for (double s : shaped) {
            Trajectory t;
            t.context = cg.group.context;
            t.conditioning_verdict = verdict;
            t.shaped_reward = s;
            t.reward = s > 0 ? 1 : 0;
            cg.group.trajectories.push_back(t);
        }
        return cg;
    };

    {
        const std::vector<CorrectionGroup> groups = {
            make_correction(1, {1, -1, 1, 1}), make_correction(0, {0, 0})};
        const auto r = retention_reward(groups);
        REQUIRE(r.has_value());
        CHECK(*r == doctest::Approx(0.5));
    }
    {
        const std::vector<CorrectionGroup> groups = {make_correction(0, {1, 0})};
        CHECK_FALSE(retention_reward(groups).has_value());
    }
    {
        const std::vector<CorrectionGroup> groups = {make_correction(1, {1, 1, 1})};
        CHECK(*retention_reward(groups) == doctest::Approx(1.0));
    }
}

TEST_CASE("cipo step 1 has no correction stream in lagged mode") {
    ExperimentConfig config;
    config.prompt_count = 20;
    config.base_batch = 4;
    config.seed = 7;
    TrainerState state = init_trainer(config);
    const CipoStepResult r = cipo_train_step(state, config);
    CHECK(r.replay_batch.empty());
    CHECK_FALSE(r.metrics.retention.has_value());
    CHECK(state.controller.rho == doctest::Approx(config.rho0));
    CHECK(state.controller.underperf_count == 0);
    CHECK_FALSE(state.controller.prev_retention.has_value());
}

TEST_CASE("cipo with lambda=0, gamma=0 matches grpo step metrics") {
    ExperimentConfig config;
    config.prompt_count = 30;
    config.base_batch = 6;
    config.seed = 13;
    config.correction_weight = 0.0;
    config.replay_fraction = 0.0;

    TrainerState ga = init_trainer(config);
    TrainerState cb = init_trainer(config);
    for (int t = 0; t < 10; ++t) {
        const StepMetrics mg = grpo_train_step(ga, config);
        const StepMetrics mc = cipo_train_step(cb, config).metrics;
        CHECK(mg.base_mean_reward == mc.base_mean_reward);
        CHECK(mg.degenerate_groups == mc.degenerate_groups);
        CHECK(mg.rho == mc.rho);
        CHECK(ga.params.weights == cb.params.weights);
    }
}

TEST_CASE("base advantages are independent of the correction stream") {
    // Same seed, correction stream on vs off: the base stream statistics of
    // every step must coincide because advantages normalize per group.
    ExperimentConfig with;
    with.prompt_count = 30;
    with.base_batch = 6;
    with.seed = 29;
    with.correction_weight = 0.0;  // keep params identical across variants
    with.replay_fraction = 1.0;
    with.kl_coef = 0.0;

    ExperimentConfig without = with;
    without.replay_fraction = 0.0;

    TrainerState a = init_trainer(with);
    TrainerState b = init_trainer(without);
    for (int t = 0; t < 6; ++t) {
        const CipoStepResult ra = cipo_train_step(a, with);
        const CipoStepResult rb = cipo_train_step(b, without);
        CHECK(ra.metrics.base_mean_reward == rb.metrics.base_mean_reward);
        for (std::size_t g = 0; g < a.prev_base_groups.size(); ++g) {
            CHECK(a.prev_base_groups[g].advantages ==
                  b.prev_base_groups[g].advantages);
        }
    }
}

TEST_CASE("verdict-blindness: the verdict changes shaping, never the context") {
    const ReplayCandidate wrong{PromptId{2}, Answer{4}, 0, 0.5};
    const ReplayCandidate right{PromptId{2}, Answer{4}, 1, 0.5};

    const Context cw{wrong.prompt, wrong.answer};
    const Context cr{right.prompt, right.answer};
    CHECK(featurize(cw, 10, 6).values == featurize(cr, 10, 6).values);

    CHECK(shaped_reward(wrong.verdict, 0, 1.0) != shaped_reward(right.verdict, 0, 1.0));
}

TEST_CASE("controller rho stays within bounds over a full default run") {
    ExperimentConfig config;
    config.prompt_count = 40;
    config.base_batch = 8;
    config.steps = 60;
    config.seed = 3;
    TrainerState state = init_trainer(config);
    for (int t = 0; t < config.steps; ++t) {
        const CipoStepResult r = cipo_train_step(state, config);
        CHECK(r.metrics.rho >= config.rho_min);
        CHECK(r.metrics.rho <= config.rho_max);
    }
}
