#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cipolab/core.hpp"

namespace cipolab {

// Synthetic verifiable-reward environment. Each prompt has one hidden correct
// answer and one distractor whose initial logit bias sets the prompt's
// difficulty. Immutable after generation; verify() is pure.
struct PromptBank {
    int prompt_count = 0;  // P
    int answer_count = 0;  // A
    std::uint64_t seed = 0;
    std::vector<int> correct;              // per prompt
    std::vector<int> distractor;           // per prompt, never equals correct
    std::vector<double> strength;          // distractor logit bias, >= 0
};

// Deterministic given (P, A, profile, seed). Each profile entry (fraction,
// strength) assigns that fraction of prompts a distractor of the given
// strength; correct answers and distractors are drawn uniformly from the
// bank substream, resampling the distractor until it differs from the
// correct answer.
PromptBank generate_bank(int prompt_count, int answer_count,
                         const std::vector<std::pair<double, double>>& profile,
                         std::uint64_t seed);

// Binary verifier: 1 iff answer is the prompt's correct answer.
// Throws std::out_of_range on out-of-range indices.
int verify(const PromptBank& bank, PromptId prompt, Answer answer);

// Line-oriented text export: header "P A seed", then one "id correct
// distractor strength" line per prompt.
void save_bank(const PromptBank& bank, const std::string& path);
PromptBank load_bank(const std::string& path);

}  // namespace cipolab
