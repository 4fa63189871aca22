#include "cipolab/config_io.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace cipolab {

using nlohmann::json;

void to_json(json& j, const Context& c) {
    j = json{{"prompt", c.prompt.index}};
    if (c.candidate) {
        j["candidate"] = c.candidate->index;
    } else {
        j["candidate"] = nullptr;
    }
}

json config_to_json(const ExperimentConfig& c) {
    json profile = json::array();
    for (const auto& [frac, strength] : c.difficulty_profile) {
        profile.push_back(json::array({frac, strength}));
    }
    return json{
        {"prompt_count", c.prompt_count},
        {"answer_count", c.answer_count},
        {"difficulty_profile", profile},
        {"group_size", c.group_size},
        {"base_batch", c.base_batch},
        {"replay_fraction", c.replay_fraction},
        {"correction_group_size", c.correction_group_size},
        {"rho0", c.rho0},
        {"rho_min", c.rho_min},
        {"rho_max", c.rho_max},
        {"w1", c.w1},
        {"w2", c.w2},
        {"w3", c.w3},
        {"target_retention", c.target_retention},
        {"lambda_risk", c.lambda_risk},
        {"delta_low", c.delta_low},
        {"delta_high", c.delta_high},
        {"correction_weight", c.correction_weight},
        {"learning_rate", c.learning_rate},
        {"kl_coef", c.kl_coef},
        {"steps", c.steps},
        {"seed", c.seed},
        {"preset", c.preset},
        {"controller_enabled", c.controller_enabled},
        {"freeze_replay_pool", c.freeze_replay_pool},
        {"replay_mode", c.replay_mode},
        {"normalize_shaped", c.normalize_shaped},
        {"kl_reference", c.kl_reference},
        {"eval_samples", c.eval_samples},
        {"eval_k", c.eval_k},
    };
}

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) {
        throw std::runtime_error("config root must be a JSON object");
    }

    ExperimentConfig c;
    const json defaults = config_to_json(c);

    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) {
            throw std::runtime_error("unknown config key: " + key);
        }
        (void)value;
    }

    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) {
            j.at(key).get_to(field);
        }
    };

    get("prompt_count", c.prompt_count);
    get("answer_count", c.answer_count);
    if (j.contains("difficulty_profile")) {
        c.difficulty_profile.clear();
        for (const auto& entry : j.at("difficulty_profile")) {
            if (!entry.is_array() || entry.size() != 2) {
                throw std::runtime_error(
                    "difficulty_profile entries must be [fraction, strength] pairs");
            }
            c.difficulty_profile.emplace_back(entry[0].get<double>(),
                                              entry[1].get<double>());
        }
    }
    get("group_size", c.group_size);
    get("base_batch", c.base_batch);
    get("replay_fraction", c.replay_fraction);
    get("correction_group_size", c.correction_group_size);
    get("rho0", c.rho0);
    get("rho_min", c.rho_min);
    get("rho_max", c.rho_max);
    get("w1", c.w1);
    get("w2", c.w2);
    get("w3", c.w3);
    get("target_retention", c.target_retention);
    get("lambda_risk", c.lambda_risk);
    get("delta_low", c.delta_low);
    get("delta_high", c.delta_high);
    get("correction_weight", c.correction_weight);
    get("learning_rate", c.learning_rate);
    get("kl_coef", c.kl_coef);
    get("steps", c.steps);
    get("seed", c.seed);
    get("preset", c.preset);
    get("controller_enabled", c.controller_enabled);
    get("freeze_replay_pool", c.freeze_replay_pool);
    get("replay_mode", c.replay_mode);
    get("normalize_shaped", c.normalize_shaped);
    get("kl_reference", c.kl_reference);
    get("eval_samples", c.eval_samples);
    get("eval_k", c.eval_k);

    return c;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file: " + path);
    }
    json j;
    in >> j;
    return config_from_json(j);
}

}  // namespace cipolab
