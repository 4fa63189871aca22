#include "cipolab/core.hpp"

#include <cmath>
#include <sstream>

namespace cipolab {

namespace {

void check(std::vector<std::string>& out, bool ok, const std::string& msg) {
    if (!ok) {
        out.push_back(msg);
    }
}

}  // namespace

std::vector<std::string> validate_config(const ExperimentConfig& c) {
    std::vector<std::string> v;

    check(v, c.prompt_count >= 1, "prompt_count must be >= 1");
    check(v, c.answer_count >= 2, "answer_count must be >= 2");
    check(v, c.group_size >= 2, "group_size must be >= 2");
    check(v, c.correction_group_size >= 2, "correction_group_size must be >= 2");
    check(v, c.base_batch >= 1, "base_batch must be >= 1");
    check(v, c.replay_fraction >= 0.0, "replay_fraction must be >= 0");
    check(v, c.steps >= 1, "steps must be >= 1");

    check(v, c.rho_min > 0.0, "rho_min must be > 0");
    check(v, c.rho_max < 1.0, "rho_max must be < 1");
    check(v, c.rho_min <= c.rho_max, "rho_min must not exceed rho_max");
    check(v, c.rho0 >= c.rho_min && c.rho0 <= c.rho_max,
          "rho0 must lie within [rho_min, rho_max]");

    check(v, c.delta_low >= 0.0 && c.delta_high <= 1.0,
          "difficulty window must lie within [0, 1]");
    check(v, c.delta_low <= c.delta_high,
          "difficulty window ordering: delta_low must not exceed delta_high");

    check(v, c.correction_weight >= 0.0, "correction_weight must be >= 0");
    check(v, c.lambda_risk >= 0.0, "lambda_risk must be >= 0");
    check(v, c.learning_rate > 0.0, "learning_rate must be > 0");
    check(v, c.kl_coef >= 0.0, "kl_coef must be >= 0");
    check(v, c.eval_samples >= 1, "eval_samples must be >= 1");

    double frac_sum = 0.0;
    bool profile_ok = !c.difficulty_profile.empty();
    for (const auto& [frac, strength] : c.difficulty_profile) {
        frac_sum += frac;
        if (frac < 0.0 || !std::isfinite(strength) || strength < 0.0) {
            profile_ok = false;
        }
    }
    check(v, profile_ok, "difficulty_profile entries must have nonnegative "
                         "fractions and finite nonnegative strengths");
    check(v, std::fabs(frac_sum - 1.0) <= 1e-9,
          "difficulty_profile fractions must sum to 1");

    check(v, c.replay_mode == "lagged" || c.replay_mode == "sync",
          "replay_mode must be 'lagged' or 'sync'");
    check(v, c.kl_reference == "initial" || c.kl_reference == "previous",
          "kl_reference must be 'initial' or 'previous'");

    for (int k : c.eval_k) {
        if (k < 1 || k > c.eval_samples) {
            std::ostringstream os;
            os << "eval_k entry " << k << " must lie in [1, eval_samples]";
            v.push_back(os.str());
            break;
        }
    }

    return v;
}

}  // namespace cipolab
