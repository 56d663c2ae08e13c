#include "bcd/rules.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <map>

namespace bcd {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

RuleSpec RuleSpec::random() {
    RuleSpec s;
    s.family = RuleFamily::Random;
    return s;
}

RuleSpec RuleSpec::deterministic() {
    RuleSpec s;
    s.family = RuleFamily::Deterministic;
    return s;
}

RuleSpec RuleSpec::efron(double p) {
    require(p >= 0.5 && p <= 1.0, "efron: p must lie in [0.5, 1]");
    RuleSpec s;
    s.family = RuleFamily::Efron;
    s.p = p;
    return s;
}

RuleSpec RuleSpec::adjustable(double a) {
    require(a >= 0.0, "adjustable: a must be nonnegative");
    RuleSpec s;
    s.family = RuleFamily::Adjustable;
    s.a = a;
    return s;
}

RuleSpec RuleSpec::imbalance_tolerance(double p, int barrier) {
    require(p >= 0.5 && p <= 1.0, "imbtol: p must lie in [0.5, 1]");
    require(barrier >= 1, "imbtol: barrier must be >= 1");
    RuleSpec s;
    s.family = RuleFamily::ImbalanceTolerance;
    s.p = p;
    s.barrier = barrier;
    return s;
}

RuleSpec RuleSpec::big_stick(int barrier) {
    require(barrier >= 1, "bigstick: barrier must be >= 1");
    RuleSpec s;
    s.family = RuleFamily::BigStick;
    s.p = 0.5;
    s.barrier = barrier;
    return s;
}

RuleSpec RuleSpec::permuted_block(int block_len, std::string fixed_sequence) {
    require(block_len >= 2 && block_len % 2 == 0,
            "block: length must be a positive even integer");
    if (!fixed_sequence.empty()) {
        require(static_cast<int>(fixed_sequence.size()) == block_len,
                "block: fixed sequence length must equal block length");
    }
    RuleSpec s;
    s.family = RuleFamily::PermutedBlock;
    s.block_len = block_len;
    s.fixed_sequence = std::move(fixed_sequence);
    return s;
}

RuleSpec RuleSpec::smith(double rho) {
    require(rho >= 0.0, "smith: rho must be nonnegative");
    RuleSpec s;
    s.family = RuleFamily::Smith;
    s.rho = rho;
    return s;
}

RuleSpec RuleSpec::wei() {
    RuleSpec s;
    s.family = RuleFamily::Wei;
    s.rho = 1.0;
    return s;
}

RuleSpec RuleSpec::bayes(double gamma) {
    require(gamma > 0.0 && gamma <= 1.0,
            "bayes: gamma must lie in (0, 1]; use 'deterministic' for gamma = 0");
    RuleSpec s;
    s.family = RuleFamily::Bayes;
    s.gamma = gamma;
    return s;
}

RuleSpec RuleSpec::parse(const std::string& text) {
    std::string name = text;
    std::map<std::string, std::string> kv;
    if (const auto colon = text.find(':'); colon != std::string::npos) {
        name = text.substr(0, colon);
        std::stringstream rest(text.substr(colon + 1));
        std::string item;
        while (std::getline(rest, item, ',')) {
            const auto eq = item.find('=');
            require(eq != std::string::npos, "rule grammar: expected key=value in '" + item + "'");
            kv[item.substr(0, eq)] = item.substr(eq + 1);
        }
    }
    auto num = [&](const std::string& key) {
        auto it = kv.find(key);
        require(it != kv.end(), "rule '" + name + "': missing parameter '" + key + "'");
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw std::invalid_argument("rule '" + name + "': bad value for '" + key + "'");
        }
    };

    if (name == "random") return random();
    if (name == "deterministic") return deterministic();
    if (name == "efron") return efron(num("p"));
    if (name == "adjustable") return adjustable(num("a"));
    if (name == "imbtol") return imbalance_tolerance(num("p"), static_cast<int>(num("b")));
    if (name == "bigstick") return big_stick(static_cast<int>(num("b")));
    if (name == "block") {
        std::string seq;
        if (auto it = kv.find("seq"); it != kv.end()) seq = it->second;
        return permuted_block(static_cast<int>(num("len")), seq);
    }
    if (name == "smith") return smith(num("rho"));
    if (name == "wei") return wei();
    if (name == "bayes") return bayes(num("gamma"));
    throw std::invalid_argument("unknown rule family '" + name + "'");
}

std::string RuleSpec::to_string() const {
    std::ostringstream out;
    switch (family) {
        case RuleFamily::Random: out << "random"; break;
        case RuleFamily::Deterministic: out << "deterministic"; break;
        case RuleFamily::Efron: out << "efron:p=" << p; break;
        case RuleFamily::Adjustable: out << "adjustable:a=" << a; break;
        case RuleFamily::ImbalanceTolerance:
            out << "imbtol:p=" << p << ",b=" << barrier;
            break;
        case RuleFamily::BigStick: out << "bigstick:b=" << barrier; break;
        case RuleFamily::PermutedBlock:
            out << "block:len=" << block_len;
            if (!fixed_sequence.empty()) out << ",seq=" << fixed_sequence;
            break;
        case RuleFamily::Smith: out << "smith:rho=" << rho; break;
        case RuleFamily::Wei: out << "wei"; break;
        case RuleFamily::Bayes: out << "bayes:gamma=" << gamma; break;
    }
    return out.str();
}

bool RuleSpec::depends_only_on_imbalance() const {
    switch (family) {
        case RuleFamily::Random:
        case RuleFamily::Deterministic:
        case RuleFamily::Efron:
        case RuleFamily::Adjustable:
        case RuleFamily::ImbalanceTolerance:
        case RuleFamily::BigStick:
            return true;
        default:
            return false;
    }
}

double prob_efron(double p, int d) {
    require(p >= 0.5 && p <= 1.0, "prob_efron: p must lie in [0.5, 1]");
    if (d < 0) return p;
    if (d > 0) return 1.0 - p;
    return 0.5;
}

double prob_adjustable(double a, int d) {
    require(a >= 0.0, "prob_adjustable: a must be nonnegative");
    if (std::abs(d) <= 1) return 0.5;  // |d|^a = 1 or the tie case
    // |d|^a/(1 + |d|^a) in log space so large |d| cannot overflow.
    const double e = a * std::log(std::abs(static_cast<double>(d)));
    const double toward_balance = 1.0 / (1.0 + std::exp(-e));
    return d < 0 ? toward_balance : 1.0 - toward_balance;
}

double prob_imbalance_tolerance(double p, int barrier, int d) {
    require(p >= 0.5 && p <= 1.0, "prob_imbalance_tolerance: p must lie in [0.5, 1]");
    require(barrier >= 1, "prob_imbalance_tolerance: barrier must be >= 1");
    if (std::abs(d) > barrier)
        throw std::domain_error("prob_imbalance_tolerance: |d| exceeds the barrier");
    if (d == -barrier) return 1.0;
    if (d == barrier) return 0.0;
    return prob_efron(p, d);
}

double prob_smith(double rho, const TrialCounts& counts) {
    require(rho >= 0.0, "prob_smith: rho must be nonnegative");
    const double n1 = counts.counts[0];
    const double n2 = counts.counts[1];
    if (rho == 0.0 || counts.n == 0) return 0.5;
    // 0^rho with one empty arm gives probability 1 for that arm, the limit of
    // the allocation function.
    const double a1 = std::pow(n1, rho);
    const double a2 = std::pow(n2, rho);
    return a2 / (a1 + a2);
}

double prob_bayes(double gamma, const TrialCounts& counts) {
    require(gamma > 0.0 && gamma <= 1.0, "prob_bayes: gamma must lie in (0, 1]");
    const double n1 = counts.counts[0];
    const double n2 = counts.counts[1];
    // Startup: the rule is indeterminate until both arms have a patient.
    if (n1 < 1.0 || n2 < 1.0) return 0.5;
    const double n = counts.n;
    const double l1 = std::log1p(n2 / (n * n1)) / gamma;
    const double l2 = std::log1p(n1 / (n * n2)) / gamma;
    return 1.0 / (1.0 + std::exp(l2 - l1));
}

double prob_deterministic(int d) {
    if (d < 0) return 1.0;
    if (d > 0) return 0.0;
    return 0.5;
}

int BlockContext::within_count(int arm) const {
    return static_cast<int>(std::count(sequence.begin(), sequence.begin() + position, arm));
}

double next_block_probability(const BlockContext& ctx) {
    if (ctx.exhausted())
        throw std::logic_error("next_block_probability: block exhausted without redraw");
    return ctx.sequence[ctx.position] == 0 ? 1.0 : 0.0;
}

BlockContext draw_block(int block_len, CounterRng& rng) {
    BlockContext ctx;
    ctx.sequence.assign(block_len, 1);
    std::fill(ctx.sequence.begin(), ctx.sequence.begin() + block_len / 2, 0);
    // Fisher-Yates over the balanced template.
    for (int i = block_len - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(i + 1));
        std::swap(ctx.sequence[i], ctx.sequence[j]);
    }
    return ctx;
}

BlockContext block_from_sequence(const std::string& sequence) {
    BlockContext ctx;
    ctx.sequence.reserve(sequence.size());
    for (char c : sequence) {
        if (c == 'A' || c == 'a' || c == '1')
            ctx.sequence.push_back(0);
        else if (c == 'B' || c == 'b' || c == '2')
            ctx.sequence.push_back(1);
        else
            throw std::invalid_argument("block sequence: expected A/B characters");
    }
    const auto ones = std::count(ctx.sequence.begin(), ctx.sequence.end(), 0);
    require(2 * ones == static_cast<long>(ctx.sequence.size()),
            "block sequence must be balanced");
    return ctx;
}

namespace {

double stateless_prob1(const RuleSpec& spec, const TrialCounts& state) {
    switch (spec.family) {
        case RuleFamily::Random: return 0.5;
        case RuleFamily::Deterministic: return prob_deterministic(state.imbalance());
        case RuleFamily::Efron: return prob_efron(spec.p, state.imbalance());
        case RuleFamily::Adjustable: return prob_adjustable(spec.a, state.imbalance());
        case RuleFamily::ImbalanceTolerance:
            return prob_imbalance_tolerance(spec.p, spec.barrier, state.imbalance());
        case RuleFamily::BigStick:
            return prob_imbalance_tolerance(0.5, spec.barrier, state.imbalance());
        case RuleFamily::Smith: return prob_smith(spec.rho, state);
        case RuleFamily::Wei: return prob_smith(1.0, state);
        case RuleFamily::Bayes: return prob_bayes(spec.gamma, state);
        case RuleFamily::PermutedBlock:
            throw std::logic_error("permuted blocks carry state; use RuleEngine");
    }
    throw std::logic_error("unreachable rule family");
}

}  // namespace

double RuleEngine::prob1(const TrialCounts& state, CounterRng& rng) {
    if (spec_.family != RuleFamily::PermutedBlock) return stateless_prob1(spec_, state);
    if (!block_ || block_->exhausted()) {
        block_ = spec_.fixed_sequence.empty()
                     ? draw_block(spec_.block_len, rng)
                     : block_from_sequence(spec_.fixed_sequence);
    }
    const double p = next_block_probability(*block_);
    block_->position += 1;
    return p;
}

double RuleEngine::guess_prob1(const TrialCounts& state) const {
    if (spec_.family != RuleFamily::PermutedBlock) {
        // Every other rule's allocation probability is known to the guesser.
        return stateless_prob1(spec_, state);
    }
    // The guesser sees the within-block counts but not the permutation: the
    // next allocation is a uniform draw from the block's remaining entries.
    if (!block_ || block_->exhausted()) return 0.5;
    const int half = spec_.block_len / 2;
    const int c1 = block_->within_count(0);
    const int c2 = block_->within_count(1);
    return static_cast<double>(half - c1) / static_cast<double>(2 * half - c1 - c2);
}

int allocate(double prob1, TrialCounts& state, double u) {
    require(u > 0.0 && u < 1.0, "allocate: u must lie in (0, 1)");
    const int arm = (u < prob1) ? 0 : 1;
    state.add(arm);
    return arm;
}

int allocate(const RuleSpec& rule, TrialCounts& state, double u) {
    require(rule.family != RuleFamily::PermutedBlock,
            "allocate: permuted blocks carry state; use RuleEngine");
    return allocate(stateless_prob1(rule, state), state, u);
}

}  // namespace bcd
