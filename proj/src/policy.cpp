#include "cipolab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cipolab {

PolicyParams zero_params(int num_answers, int feature_dim) {
    PolicyParams p;
    p.num_answers = num_answers;
    p.feature_dim = feature_dim;
    p.weights.assign(static_cast<std::size_t>(num_answers) * feature_dim, 0.0);
    return p;
}

PolicyParams initial_policy_params(const PromptBank& bank) {
    const int dim = bank.prompt_count + bank.answer_count + 1;
    PolicyParams p = zero_params(bank.answer_count, dim);
    for (int x = 0; x < bank.prompt_count; ++x) {
        p.at(bank.distractor[x], x) = bank.strength[x];
    }
    return p;
}

FeatureVector featurize(const Context& context, int prompt_count, int answer_count) {
    if (context.prompt.index < 0 || context.prompt.index >= prompt_count) {
        throw std::out_of_range("featurize: prompt index out of range");
    }
    if (context.candidate &&
        (context.candidate->index < 0 || context.candidate->index >= answer_count)) {
        throw std::out_of_range("featurize: candidate index out of range");
    }
    FeatureVector f;
    f.values.assign(prompt_count + answer_count + 1, 0.0);
    f.values[context.prompt.index] = 1.0;
    if (context.candidate) {
        f.values[prompt_count + context.candidate->index] = 1.0;
    }
    f.values.back() = 1.0;
    return f;
}

std::vector<double> action_distribution(const PolicyParams& params,
                                        const FeatureVector& features) {
    if (features.dim() != params.feature_dim) {
        throw std::invalid_argument("action_distribution: feature dimension mismatch");
    }
    std::vector<double> logits(params.num_answers, 0.0);
    for (int a = 0; a < params.num_answers; ++a) {
        double z = 0.0;
        const double* row = params.weights.data() +
                            static_cast<std::size_t>(a) * params.feature_dim;
        for (int d = 0; d < params.feature_dim; ++d) {
            z += row[d] * features.values[d];
        }
        if (!std::isfinite(z)) {
            throw std::runtime_error("action_distribution: non-finite logit");
        }
        logits[a] = z;
    }
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    std::vector<double> probs(params.num_answers, 0.0);
    for (int a = 0; a < params.num_answers; ++a) {
        probs[a] = std::exp(logits[a] - zmax);
        total += probs[a];
    }
    for (double& p : probs) {
        p /= total;
    }
    return probs;
}

SampledAction sample_action(const std::vector<double>& distribution, RngStream& rng) {
    const double u = rng.next_unit();
    double cum = 0.0;
    int chosen = static_cast<int>(distribution.size()) - 1;
    for (int a = 0; a < static_cast<int>(distribution.size()); ++a) {
        cum += distribution[a];
        if (u < cum) {
            chosen = a;
            break;
        }
    }
    return {Answer{chosen}, std::log(distribution[chosen])};
}

PolicyParams log_prob_gradient(const PolicyParams& params,
                               const FeatureVector& features, Answer answer) {
    const std::vector<double> probs = action_distribution(params, features);
    PolicyParams grad = zero_params(params.num_answers, params.feature_dim);
    for (int a = 0; a < params.num_answers; ++a) {
        const double coef = (a == answer.index ? 1.0 : 0.0) - probs[a];
        double* row = grad.weights.data() +
                      static_cast<std::size_t>(a) * params.feature_dim;
        for (int d = 0; d < params.feature_dim; ++d) {
            row[d] = coef * features.values[d];
        }
    }
    return grad;
}

double kl_to_reference(const PolicyParams& params, const PolicyParams& ref_params,
                       const FeatureVector& features) {
    const std::vector<double> p = action_distribution(params, features);
    const std::vector<double> q = action_distribution(ref_params, features);
    double kl = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
        kl += p[a] * (std::log(p[a]) - std::log(q[a]));
    }
    return kl;
}

PolicyParams kl_gradient(const PolicyParams& params, const PolicyParams& ref_params,
                         const FeatureVector& features) {
    const std::vector<double> p = action_distribution(params, features);
    const std::vector<double> q = action_distribution(ref_params, features);
    double kl = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
        kl += p[a] * (std::log(p[a]) - std::log(q[a]));
    }
    // dKL/dz_a = p_a (log(p_a/q_a) - KL) for softmax logits z.
    PolicyParams grad = zero_params(params.num_answers, params.feature_dim);
    for (int a = 0; a < params.num_answers; ++a) {
        const double coef = p[a] * (std::log(p[a]) - std::log(q[a]) - kl);
        double* row = grad.weights.data() +
                      static_cast<std::size_t>(a) * params.feature_dim;
        for (int d = 0; d < params.feature_dim; ++d) {
            row[d] = coef * features.values[d];
        }
    }
    return grad;
}

void save_params(const PolicyParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_params: cannot open " + path);
    }
    out << params.num_answers << ' ' << params.feature_dim << '\n';
    char buf[64];
    for (int a = 0; a < params.num_answers; ++a) {
        for (int d = 0; d < params.feature_dim; ++d) {
            std::snprintf(buf, sizeof(buf), "%.17g", params.at(a, d));
            out << buf << (d + 1 == params.feature_dim ? '\n' : ' ');
        }
    }
}

PolicyParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_params: cannot open " + path);
    }
    int a = 0;
    int d = 0;
    if (!(in >> a >> d) || a <= 0 || d <= 0) {
        throw std::runtime_error("load_params: malformed header in " + path);
    }
    PolicyParams params = zero_params(a, d);
    for (double& w : params.weights) {
        if (!(in >> w)) {
            throw std::runtime_error("load_params: truncated weights in " + path);
        }
    }
    return params;
}

}  // namespace cipolab
