#include "cipolab/bank.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cipolab/rng.hpp"

namespace cipolab {

PromptBank generate_bank(int prompt_count, int answer_count,
                         const std::vector<std::pair<double, double>>& profile,
                         std::uint64_t seed) {
    if (answer_count < 2) {
        throw std::invalid_argument("generate_bank: answer_count must be >= 2");
    }
    double frac_sum = 0.0;
    for (const auto& [frac, strength] : profile) {
        (void)strength;
        frac_sum += frac;
    }
    if (std::fabs(frac_sum - 1.0) > 1e-9) {
        throw std::invalid_argument("generate_bank: profile fractions must sum to 1");
    }

    PromptBank bank;
    bank.prompt_count = prompt_count;
    bank.answer_count = answer_count;
    bank.seed = seed;
    bank.correct.resize(prompt_count);
    bank.distractor.resize(prompt_count);
    bank.strength.assign(prompt_count, 0.0);

    // Profile entries claim contiguous prompt ranges via rounded cumulative
    // fractions, so counts are exact for e.g. (0.3, 0.4, 0.3) over P=200.
    double cum = 0.0;
    int start = 0;
    for (const auto& [frac, strength] : profile) {
        cum += frac;
        const int end = static_cast<int>(std::llround(cum * prompt_count));
        for (int x = start; x < end && x < prompt_count; ++x) {
            bank.strength[x] = strength;
        }
        start = end;
    }

    RngStream rng = substream(seed, StreamPurpose::bank);
    for (int x = 0; x < prompt_count; ++x) {
        bank.correct[x] = static_cast<int>(rng.next_below(answer_count));
        int d = static_cast<int>(rng.next_below(answer_count));
        while (d == bank.correct[x]) {
            d = static_cast<int>(rng.next_below(answer_count));
        }
        bank.distractor[x] = d;
    }
    return bank;
}

int verify(const PromptBank& bank, PromptId prompt, Answer answer) {
    if (prompt.index < 0 || prompt.index >= bank.prompt_count) {
        throw std::out_of_range("verify: prompt index out of range");
    }
    if (answer.index < 0 || answer.index >= bank.answer_count) {
        throw std::out_of_range("verify: answer index out of range");
    }
    return answer.index == bank.correct[prompt.index] ? 1 : 0;
}

void save_bank(const PromptBank& bank, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_bank: cannot open " + path);
    }
    out << bank.prompt_count << ' ' << bank.answer_count << ' ' << bank.seed << '\n';
    char buf[64];
    for (int x = 0; x < bank.prompt_count; ++x) {
        std::snprintf(buf, sizeof(buf), "%.17g", bank.strength[x]);
        out << x << ' ' << bank.correct[x] << ' ' << bank.distractor[x] << ' '
            << buf << '\n';
    }
}

PromptBank load_bank(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_bank: cannot open " + path);
    }
    PromptBank bank;
    if (!(in >> bank.prompt_count >> bank.answer_count >> bank.seed)) {
        throw std::runtime_error("load_bank: malformed header in " + path);
    }
    bank.correct.resize(bank.prompt_count);
    bank.distractor.resize(bank.prompt_count);
    bank.strength.resize(bank.prompt_count);
    for (int x = 0; x < bank.prompt_count; ++x) {
        int id = 0;
        if (!(in >> id >> bank.correct[x] >> bank.distractor[x] >> bank.strength[x]) ||
            id != x) {
            std::ostringstream os;
            os << "load_bank: malformed line for prompt " << x << " in " << path;
            throw std::runtime_error(os.str());
        }
    }
    return bank;
}

}  // namespace cipolab
