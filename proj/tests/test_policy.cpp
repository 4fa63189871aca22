#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <vector>

#include "cipolab/policy.hpp"

using namespace cipolab;

namespace {

PolicyParams random_params(int num_answers, int dim, RngStream& rng, double scale) {
    PolicyParams p = zero_params(num_answers, dim);
    for (double& w : p.weights) {
        w = scale * (2.0 * rng.next_unit() - 1.0);
    }
    return p;
}

FeatureVector random_features(int prompt_count, int answer_count, RngStream& rng,
                              bool correction) {
    Context ctx{PromptId{static_cast<int>(rng.next_below(prompt_count))},
                std::nullopt};
    if (correction) {
        ctx.candidate = Answer{static_cast<int>(rng.next_below(answer_count))};
    }
    return featurize(ctx, prompt_count, answer_count);
}

// Central finite differences of log pi(answer) in every weight.
PolicyParams numeric_log_prob_gradient(const PolicyParams& params,
                                       const FeatureVector& features, Answer answer,
                                       double h) {
    PolicyParams grad = zero_params(params.num_answers, params.feature_dim);
    PolicyParams probe = params;
    for (std::size_t i = 0; i < params.weights.size(); ++i) {
        probe.weights[i] = params.weights[i] + h;
        const double up =
            std::log(action_distribution(probe, features)[answer.index]);
        probe.weights[i] = params.weights[i] - h;
        const double down =
            std::log(action_distribution(probe, features)[answer.index]);
        probe.weights[i] = params.weights[i];
        grad.weights[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

}  // namespace

TEST_CASE("featurize layout for base and correction contexts") {
    const FeatureVector base = featurize({PromptId{0}, std::nullopt}, 2, 2);
    CHECK(base.values == std::vector<double>{1, 0, 0, 0, 1});

    const FeatureVector corr = featurize({PromptId{1}, Answer{0}}, 2, 2);
    CHECK(corr.values == std::vector<double>{0, 1, 1, 0, 1});

    CHECK_THROWS_AS(featurize({PromptId{2}, std::nullopt}, 2, 2), std::out_of_range);
    CHECK_THROWS_AS(featurize({PromptId{0}, Answer{2}}, 2, 2), std::out_of_range);
}

TEST_CASE("features depend on (prompt, candidate) only") {
    // Verdicts live outside the context, so two trajectories that differ only
    // in verdict featurize identically by construction.
    const Context a{PromptId{4}, Answer{1}};
    const Context b{PromptId{4}, Answer{1}};
    CHECK(featurize(a, 8, 4).values == featurize(b, 8, 4).values);
}

TEST_CASE("action_distribution basics") {
    const PolicyParams zero = zero_params(4, 6);
    FeatureVector f;
    f.values = {1, 0, 0, 0, 0, 1};
    const std::vector<double> uniform = action_distribution(zero, f);
    for (double p : uniform) {
        CHECK(p == doctest::Approx(0.25).epsilon(1e-14));
    }

    // Adding a constant to every logit leaves the distribution unchanged.
    PolicyParams shifted = zero;
    for (int a = 0; a < 4; ++a) {
        shifted.at(a, 5) = 17.5;  // bias slot is active in f
    }
    const std::vector<double> same = action_distribution(shifted, f);
    for (int a = 0; a < 4; ++a) {
        CHECK(same[a] == doctest::Approx(uniform[a]).epsilon(1e-12));
    }

    FeatureVector wrong_dim;
    wrong_dim.values = {1, 0};
    CHECK_THROWS_AS(action_distribution(zero, wrong_dim), std::invalid_argument);
}

TEST_CASE("distribution validity for random finite weights") {
    RngStream rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const PolicyParams p = random_params(6, 11, rng, 10.0);
        const FeatureVector f = random_features(5, 5, rng, trial % 2 == 0);
        const std::vector<double> dist = action_distribution(p, f);
        double total = 0.0;
        for (double v : dist) {
            CHECK(v > 0.0);
            total += v;
        }
        CHECK(std::fabs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("sample_action point mass and determinism") {
    RngStream rng(1);
    const std::vector<double> point = {0.0, 1.0, 0.0};
    const SampledAction s = sample_action(point, rng);
    CHECK(s.answer.index == 1);
    CHECK(s.log_prob == doctest::Approx(0.0));

    RngStream a(77);
    RngStream b(77);
    const std::vector<double> dist = {0.25, 0.25, 0.25, 0.25};
    for (int i = 0; i < 100; ++i) {
        CHECK(sample_action(dist, a).answer.index ==
              sample_action(dist, b).answer.index);
    }
}

TEST_CASE("sample_action frequencies match a uniform distribution") {
    const int n = 100000;
    const std::vector<double> dist = {0.25, 0.25, 0.25, 0.25};
    RngStream rng(2024);
    std::vector<int> counts(4, 0);
    for (int i = 0; i < n; ++i) {
        ++counts[sample_action(dist, rng).answer.index];
    }
    const double se = std::sqrt(0.25 * 0.75 / n);
    for (int a = 0; a < 4; ++a) {
        CHECK(std::fabs(counts[a] / static_cast<double>(n) - 0.25) <= 3.0 * se);
    }
}

TEST_CASE("log_prob_gradient closed form at zero weights") {
    const PolicyParams zero = zero_params(2, 5);
    const FeatureVector f = featurize({PromptId{1}, std::nullopt}, 2, 2);
    const PolicyParams g = log_prob_gradient(zero, f, Answer{0});
    for (int d = 0; d < 5; ++d) {
        CHECK(g.at(0, d) == doctest::Approx(0.5 * f.values[d]));
        CHECK(g.at(1, d) == doctest::Approx(-0.5 * f.values[d]));
    }
}

TEST_CASE("log_prob_gradient vanishes outside the active feature blocks") {
    RngStream rng(9);
    const PolicyParams p = random_params(3, 4 + 3 + 1, rng, 1.0);
    const FeatureVector f = featurize({PromptId{2}, std::nullopt}, 4, 3);
    const PolicyParams g = log_prob_gradient(p, f, Answer{1});
    for (int a = 0; a < 3; ++a) {
        for (int d = 0; d < g.feature_dim; ++d) {
            if (f.values[d] == 0.0) {
                CHECK(g.at(a, d) == 0.0);
            }
        }
    }
}

TEST_CASE("log_prob_gradient agrees with central finite differences") {
    RngStream rng(31337);
    const int prompt_count = 3;
    const int answer_count = 4;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const PolicyParams p =
            random_params(answer_count, prompt_count + answer_count + 1, rng, 2.0);
        const FeatureVector f =
            random_features(prompt_count, answer_count, rng, trial % 2 == 0);
        const Answer answer{static_cast<int>(rng.next_below(answer_count))};

        const PolicyParams analytic = log_prob_gradient(p, f, answer);
        const PolicyParams numeric = numeric_log_prob_gradient(p, f, answer, 1e-5);
        for (std::size_t i = 0; i < analytic.weights.size(); ++i) {
            worst = std::max(worst,
                             std::fabs(analytic.weights[i] - numeric.weights[i]));
        }
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("kl_to_reference values") {
    RngStream rng(8);
    const FeatureVector f{{1.0}};

    PolicyParams p = zero_params(2, 1);
    CHECK(kl_to_reference(p, p, f) == doctest::Approx(0.0));

    // pi = (0.5, 0.5), ref = (0.9, 0.1)
    PolicyParams ref = zero_params(2, 1);
    ref.at(0, 0) = std::log(9.0);
    const double expected = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
    CHECK(kl_to_reference(p, ref, f) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.5108).epsilon(1e-3));

    for (int trial = 0; trial < 200; ++trial) {
        const PolicyParams a = random_params(5, 3, rng, 3.0);
        const PolicyParams b = random_params(5, 3, rng, 3.0);
        FeatureVector g{{1.0, rng.next_unit(), rng.next_unit()}};
        CHECK(kl_to_reference(a, b, g) >= 0.0);
    }
}

TEST_CASE("kl_gradient agrees with central finite differences") {
    RngStream rng(606);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const PolicyParams p = random_params(4, 5, rng, 1.5);
        const PolicyParams ref = random_params(4, 5, rng, 1.5);
        FeatureVector f{{1.0, rng.next_unit(), 0.0, rng.next_unit(), 1.0}};

        const PolicyParams analytic = kl_gradient(p, ref, f);
        PolicyParams probe = p;
        for (std::size_t i = 0; i < p.weights.size(); ++i) {
            const double h = 1e-5;
            probe.weights[i] = p.weights[i] + h;
            const double up = kl_to_reference(probe, ref, f);
            probe.weights[i] = p.weights[i] - h;
            const double down = kl_to_reference(probe, ref, f);
            probe.weights[i] = p.weights[i];
            worst = std::max(
                worst, std::fabs(analytic.weights[i] - (up - down) / (2.0 * h)));
        }
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("params checkpoint round trip") {
    RngStream rng(404);
    const PolicyParams p = random_params(3, 7, rng, 4.0);
    const std::string path = "test_params_roundtrip.txt";
    save_params(p, path);
    const PolicyParams back = load_params(path);
    CHECK(back.num_answers == 3);
    CHECK(back.feature_dim == 7);
    CHECK(back.weights == p.weights);
    std::remove(path.c_str());
}
