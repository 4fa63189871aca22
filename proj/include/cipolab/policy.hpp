#pragma once

#include <string>
#include <vector>

#include "cipolab/bank.hpp"
#include "cipolab/core.hpp"
#include "cipolab/rng.hpp"

namespace cipolab {

// Dense feature vector of dimension D = P + A + 1: one-hot prompt block,
// one-hot candidate-answer block (all zeros for base contexts), constant
// bias slot. A function of (prompt, candidate) only; verdicts never enter.
struct FeatureVector {
    std::vector<double> values;
    int dim() const { return static_cast<int>(values.size()); }
};

// Row-major A x D weight matrix of the linear-softmax policy. Shared across
// base and correction contexts, so correction gradients touch the same
// prompt columns the base stream uses.
struct PolicyParams {
    int num_answers = 0;  // A
    int feature_dim = 0;  // D
    std::vector<double> weights;  // row-major, num_answers * feature_dim

    double& at(int answer, int feature) {
        return weights[static_cast<std::size_t>(answer) * feature_dim + feature];
    }
    double at(int answer, int feature) const {
        return weights[static_cast<std::size_t>(answer) * feature_dim + feature];
    }
};

PolicyParams zero_params(int num_answers, int feature_dim);

// Zero weights except the distractor bias: for each prompt column, the
// distractor answer's weight equals the prompt's strength. Base-context
// probability of the correct answer is then 1 / (A - 1 + e^s).
PolicyParams initial_policy_params(const PromptBank& bank);

FeatureVector featurize(const Context& context, int prompt_count, int answer_count);

// Softmax over weights . features; positive entries summing to 1.
std::vector<double> action_distribution(const PolicyParams& params,
                                        const FeatureVector& features);

struct SampledAction {
    Answer answer;
    double log_prob = 0.0;
};

// Inverse-CDF over the fixed answer ordering.
SampledAction sample_action(const std::vector<double>& distribution, RngStream& rng);

// d log pi(answer | features) / d weights = (onehot(answer) - pi) (x) features.
PolicyParams log_prob_gradient(const PolicyParams& params,
                               const FeatureVector& features, Answer answer);

double kl_to_reference(const PolicyParams& params, const PolicyParams& ref_params,
                       const FeatureVector& features);

// Gradient of KL(pi_theta || pi_ref) at one context with respect to params.
PolicyParams kl_gradient(const PolicyParams& params, const PolicyParams& ref_params,
                         const FeatureVector& features);

// Checkpoint format: header line "A D", then one row of D values per answer.
void save_params(const PolicyParams& params, const std::string& path);
PolicyParams load_params(const std::string& path);

}  // namespace cipolab
