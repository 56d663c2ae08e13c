#include "bcd/markov.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bcd {

namespace {

double chain_prob1(const RuleSpec& rule, int d) {
    switch (rule.family) {
        case RuleFamily::Random: return 0.5;
        case RuleFamily::Deterministic: return prob_deterministic(d);
        case RuleFamily::Efron: return prob_efron(rule.p, d);
        case RuleFamily::Adjustable: return prob_adjustable(rule.a, d);
        case RuleFamily::ImbalanceTolerance:
            return prob_imbalance_tolerance(rule.p, rule.barrier, d);
        case RuleFamily::BigStick:
            return prob_imbalance_tolerance(0.5, rule.barrier, d);
        default:
            throw std::invalid_argument(
                "build_chain: rule state is not the imbalance alone: " + rule.to_string());
    }
}

// w = v T, exploiting the tridiagonal structure.
std::vector<double> step(const ImbalanceChain& chain, const std::vector<double>& v) {
    const int m = chain.size();
    std::vector<double> w(m, 0.0);
    for (int i = 0; i < m; ++i) {
        if (v[i] == 0.0) continue;
        w[i + 1 >= m ? i - 1 : i + 1] += v[i] * chain.up[i];
        w[i - 1 < 0 ? i + 1 : i - 1] += v[i] * (1.0 - chain.up[i]);
    }
    return w;
}

}  // namespace

std::vector<double> ImbalanceChain::transition_matrix() const {
    const int m = size();
    std::vector<double> t(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) {
        const int iu = i + 1 >= m ? i - 1 : i + 1;
        const int id = i - 1 < 0 ? i + 1 : i - 1;
        t[static_cast<std::size_t>(i) * m + iu] += up[i];
        t[static_cast<std::size_t>(i) * m + id] += 1.0 - up[i];
    }
    return t;
}

ImbalanceChain build_chain(const RuleSpec& rule, int K) {
    if (K < 1) throw std::invalid_argument("build_chain: K must be >= 1");
    if (rule.family == RuleFamily::ImbalanceTolerance ||
        rule.family == RuleFamily::BigStick) {
        if (K != rule.barrier)
            throw std::invalid_argument(
                "build_chain: truncation must coincide with the rule's barrier");
    }
    ImbalanceChain chain;
    chain.K = K;
    chain.up.resize(chain.size());
    for (int d = -K; d <= K; ++d) {
        double p1;
        if (d == -K)
            p1 = 1.0;  // reflection forced at the truncation boundary
        else if (d == K)
            p1 = 0.0;
        else
            p1 = chain_prob1(rule, d);
        chain.up[chain.index(d)] = p1;
    }
    return chain;
}

StationaryCycle stationary_cycle(const ImbalanceChain& chain) {
    constexpr double kTol = 1e-13;
    constexpr long kMaxIter = 1000000;
    const int m = chain.size();
    std::vector<double> v(m, 0.0);
    v[chain.index(0)] = 1.0;
    for (long iter = 0; iter < kMaxIter; ++iter) {
        std::vector<double> next = step(chain, step(chain, v));
        double diff = 0.0;
        for (int i = 0; i < m; ++i) diff = std::max(diff, std::abs(next[i] - v[i]));
        v = std::move(next);
        if (diff < kTol) {
            StationaryCycle cycle;
            cycle.K = chain.K;
            cycle.pi_even = v;
            cycle.pi_odd = step(chain, v);
            return cycle;
        }
    }
    throw std::runtime_error("stationary_cycle: power iteration did not converge");
}

std::vector<double> distribution_at(const ImbalanceChain& chain, int n) {
    std::vector<double> v(chain.size(), 0.0);
    v[chain.index(0)] = 1.0;
    for (int i = 0; i < n; ++i) v = step(chain, v);
    return v;
}

double chain_mean_square(const std::vector<double>& dist, int K) {
    double s = 0.0;
    for (int d = -K; d <= K; ++d) s += dist[d + K] * d * d;
    return s;
}

double chain_prob_zero(const std::vector<double>& dist, int K) { return dist[K]; }

double chain_expected_bias(const ImbalanceChain& chain, const std::vector<double>& dist) {
    double s = 0.0;
    for (int i = 0; i < chain.size(); ++i) {
        const double p1 = chain.up[i];
        s += dist[i] * (2.0 * std::max(p1, 1.0 - p1) - 1.0);
    }
    return s;
}

double steady_loss_at(const ImbalanceChain& chain, const StationaryCycle& cycle, int n) {
    if (n < 1) throw std::invalid_argument("steady_loss_at: n must be >= 1");
    const auto& dist = (n % 2 == 0) ? cycle.pi_even : cycle.pi_odd;
    return chain_mean_square(dist, chain.K) / n;
}

double steady_bias_at(const ImbalanceChain& chain, const StationaryCycle& cycle, int n) {
    if (n < 1) throw std::invalid_argument("steady_bias_at: n must be >= 1");
    // Bias at n is driven by D_{n-1}.
    const auto& dist = ((n - 1) % 2 == 0) ? cycle.pi_even : cycle.pi_odd;
    return chain_expected_bias(chain, dist);
}

double EfronSteadyState::loss_at(int n) const {
    return (n % 2 == 0 ? var_even : var_odd) / n;
}

double EfronSteadyState::bias_at(int n) const {
    return n % 2 == 0 ? bias_even : bias_odd;
}

EfronSteadyState efron_steady_state(double p) {
    if (!(p > 0.5 && p <= 1.0))
        throw std::invalid_argument(
            "efron_steady_state: requires 0.5 < p <= 1; p = 0.5 is random allocation");
    if (p == 1.0) return {1.0, 1.0, 0.0, 0.0, 1.0};
    const double r = p / (1.0 - p);
    const double denom = (r * r - 1.0) * (r * r - 1.0);
    EfronSteadyState s;
    s.p0_even = (2.0 * p - 1.0) / p;
    s.bias_even = 2.0 * p - 1.0;
    s.bias_odd = (2.0 * p - 1.0) * (1.0 - p) / p;
    s.var_even = 4.0 * r * (r * r + 1.0) / denom;
    s.var_odd = 8.0 * r * r / denom + 1.0;
    return s;
}

double AdjustableApprox::loss_at(int n) const {
    const auto& dist = (n % 2 == 0) ? cycle.pi_even : cycle.pi_odd;
    return chain_mean_square(dist, cycle.K) / n;
}

double AdjustableApprox::bias_at(int n) const {
    return n % 2 == 0 ? bias_even : bias_odd;
}

AdjustableApprox adjustable_approx(double a) {
    if (a < 1.0) throw std::invalid_argument("adjustable_approx: requires a >= 1");
    AdjustableApprox approx;
    approx.a = a;
    const double p = std::pow(2.0, a) / (1.0 + std::pow(2.0, a));
    approx.p_eff = p;

    // Stationary pair of the chain truncated at +/-3: the even distribution
    // lives on {0, +/-2}, the odd one on {+/-1, +/-3}.
    StationaryCycle cycle;
    cycle.K = 3;
    cycle.pi_even.assign(7, 0.0);
    cycle.pi_odd.assign(7, 0.0);
    cycle.pi_even[3] = p / (1.0 + p);
    cycle.pi_even[1] = cycle.pi_even[5] = 0.5 / (1.0 + p);
    cycle.pi_odd[2] = cycle.pi_odd[4] = p / (1.0 + p);
    cycle.pi_odd[0] = cycle.pi_odd[6] = 0.5 * (1.0 - p) / (1.0 + p);
    approx.cycle = cycle;

    const ImbalanceChain chain = build_chain(RuleSpec::adjustable(a), 3);
    approx.bias_even = chain_expected_bias(chain, cycle.pi_odd);
    approx.bias_odd = chain_expected_bias(chain, cycle.pi_even);
    return approx;
}

SmithAsymptotics smith_asymptotics(double rho, int n, int q) {
    if (rho < 0.0) throw std::invalid_argument("smith_asymptotics: rho must be >= 0");
    if (n < 1 || q < 1) throw std::invalid_argument("smith_asymptotics: need n >= 1, q >= 1");
    const double denom = 1.0 + 2.0 * rho;
    SmithAsymptotics s;
    s.loss_inf = 1.0 / denom;
    s.mean_loss_cov = q / denom;
    s.bias_n = rho * std::sqrt(2.0 / (n * std::numbers::pi * denom));
    s.ni_mean = 0.5;
    s.ni_var = 1.0 / (4.0 * denom);
    return s;
}

double t_treatment_variance(double rho, int t, int n) {
    if (t < 2) throw std::invalid_argument("t_treatment_variance: t must be >= 2");
    if (rho < 0.0) throw std::invalid_argument("t_treatment_variance: rho must be >= 0");
    return n * (t - 1.0) / (t * t * (1.0 + 2.0 * rho));
}

}  // namespace bcd
