#ifndef BCD_RULES_HPP
#define BCD_RULES_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bcd/rng.hpp"

namespace bcd {

// Allocation counts for a sequential two-arm (or t-arm) trial.
struct TrialCounts {
    int n = 0;
    std::vector<int> counts;  // per-arm totals, length t >= 2

    explicit TrialCounts(int arms = 2) : counts(arms, 0) {}

    int arms() const { return static_cast<int>(counts.size()); }

    // Imbalance D_n = N_1 - N_2 (two-arm trials).
    int imbalance() const { return counts[0] - counts[1]; }

    void add(int arm) {
        counts.at(arm) += 1;
        n += 1;
    }
};

enum class RuleFamily {
    Random,
    Deterministic,
    Efron,
    Adjustable,
    ImbalanceTolerance,
    BigStick,
    PermutedBlock,
    Smith,
    Wei,
    Bayes,
};

// A rule family plus its parameters. Construction validates ranges.
struct RuleSpec {
    RuleFamily family = RuleFamily::Random;
    double p = 0.5;       // Efron / imbalance tolerance coin
    double a = 0.0;       // adjustable exponent
    double rho = 0.0;     // Smith exponent
    double gamma = 1.0;   // Bayes parameter
    int barrier = 0;      // imbalance tolerance / big stick
    int block_len = 0;    // permuted block length (even)
    std::string fixed_sequence;  // optional fixed block permutation, e.g. "AABABABB"

    static RuleSpec random();
    static RuleSpec deterministic();
    static RuleSpec efron(double p);
    static RuleSpec adjustable(double a);
    static RuleSpec imbalance_tolerance(double p, int barrier);
    static RuleSpec big_stick(int barrier);
    static RuleSpec permuted_block(int block_len, std::string fixed_sequence = {});
    static RuleSpec smith(double rho);
    static RuleSpec wei();
    static RuleSpec bayes(double gamma);

    // Parses the grammar "family:key=value[,key=value]", e.g. "efron:p=0.6667".
    static RuleSpec parse(const std::string& text);
    std::string to_string() const;

    // True if the allocation probability is a function of D_n alone.
    bool depends_only_on_imbalance() const;
};

// Allocation probabilities for treatment 1 (all pure functions).
double prob_efron(double p, int d);
double prob_adjustable(double a, int d);
double prob_imbalance_tolerance(double p, int barrier, int d);
double prob_smith(double rho, const TrialCounts& counts);
double prob_bayes(double gamma, const TrialCounts& counts);
double prob_deterministic(int d);

// Realized permutation of the current block for Rule P.
struct BlockContext {
    std::vector<int> sequence;  // arm index per position, balanced
    int position = 0;

    bool exhausted() const { return position >= static_cast<int>(sequence.size()); }
    // Counts of each arm already allocated within the block.
    int within_count(int arm) const;
};

// 1 or 0 according to the pre-drawn permutation entry at the current position.
double next_block_probability(const BlockContext& ctx);

// Draws a fresh uniformly random balanced permutation of length 2m.
BlockContext draw_block(int block_len, CounterRng& rng);
BlockContext block_from_sequence(const std::string& sequence);

// Stateful sampler: wraps a RuleSpec plus the block context Rule P needs.
class RuleEngine {
public:
    explicit RuleEngine(RuleSpec spec) : spec_(std::move(spec)) {}

    const RuleSpec& spec() const { return spec_; }

    // Probability of treatment 1 given the trial state. For Rule P this is the
    // realized 0/1 entry of the current block; rng is consumed only to draw a
    // fresh block permutation at block boundaries.
    double prob1(const TrialCounts& state, CounterRng& rng);

    // Marginal probability of treatment 1 as seen by a guesser who knows the
    // block structure but not the realized permutation. Equal to prob1 for
    // every family except PermutedBlock.
    double guess_prob1(const TrialCounts& state) const;

private:
    RuleSpec spec_;
    std::optional<BlockContext> block_;
};

// Samples one allocation: treatment 1 iff u < prob. Updates state in place
// and returns the chosen arm (0-based).
int allocate(const RuleSpec& rule, TrialCounts& state, double u);
int allocate(double prob1, TrialCounts& state, double u);

}  // namespace bcd

#endif  // BCD_RULES_HPP
