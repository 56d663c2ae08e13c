#ifndef BCD_MARKOV_HPP
#define BCD_MARKOV_HPP

#include <vector>

#include "bcd/rules.hpp"

namespace bcd {

// Truncated Markov chain of the imbalance D_n on the states -K..K.
// Transitions move only to adjacent states; the boundary states reflect.
struct ImbalanceChain {
    int K = 0;
    // up[i] = P(D -> D+1 | D = i - K); the complement moves down.
    std::vector<double> up;

    int size() const { return 2 * K + 1; }
    int index(int d) const { return d + K; }
    int state(int i) const { return i - K; }

    // Dense row-stochastic transition matrix (row-major, size x size).
    std::vector<double> transition_matrix() const;
};

// Period-2 stationary pair: distributions of D_n over even and odd states,
// each stored over the full support -K..K.
struct StationaryCycle {
    int K = 0;
    std::vector<double> pi_even;
    std::vector<double> pi_odd;

    double at_even(int d) const { return pi_even[d + K]; }
    double at_odd(int d) const { return pi_odd[d + K]; }
};

// Builds the chain for a rule whose probability depends only on D_n.
// Smith, Bayes and permuted blocks are rejected.
ImbalanceChain build_chain(const RuleSpec& rule, int K);

// Dominant fixed point of the two-step transition matrix, found by power
// iteration (tolerance 1e-13, capped at 1e6 iterations).
StationaryCycle stationary_cycle(const ImbalanceChain& chain);

// Exact distribution of D_n obtained by iterating the chain from D_0 = 0.
std::vector<double> distribution_at(const ImbalanceChain& chain, int n);

// Moments and metric functionals of a distribution over -K..K.
double chain_mean_square(const std::vector<double>& dist, int K);
double chain_prob_zero(const std::vector<double>& dist, int K);
// E[2 max(pi1, 1-pi1) - 1] under dist, with pi1 from the chain's rows.
double chain_expected_bias(const ImbalanceChain& chain, const std::vector<double>& dist);

// Steady-state loss at patient n (distribution of D_n) and bias at patient n
// (distribution of D_{n-1}) for a chain rule.
double steady_loss_at(const ImbalanceChain& chain, const StationaryCycle& cycle, int n);
double steady_bias_at(const ImbalanceChain& chain, const StationaryCycle& cycle, int n);

// Closed forms for Efron's coin at steady state; requires 0.5 < p <= 1.
struct EfronSteadyState {
    double p0_even;    // lim P(D_2m = 0)
    double bias_even;  // 2p - 1
    double bias_odd;   // (2p - 1)(1 - p)/p
    double var_even;   // steady-state Var D_n, n even
    double var_odd;    // n odd
    double loss_at(int n) const;
    double bias_at(int n) const;
};
EfronSteadyState efron_steady_state(double p);

// Truncated-chain approximation to the adjustable rule: the stationary pair
// on -3..3 with effective coin p = 2^a/(1 + 2^a), and the bias/loss values
// it implies.
struct AdjustableApprox {
    double a;
    double p_eff;
    StationaryCycle cycle;  // K = 3
    double bias_even;       // bias at even n (from the odd-state distribution)
    double bias_odd;        // bias at odd n
    double loss_at(int n) const;
    double bias_at(int n) const;
};
AdjustableApprox adjustable_approx(double a);

// Asymptotics for Smith's rule with exponent rho and q nuisance parameters.
struct SmithAsymptotics {
    double loss_inf;       // 1/(1 + 2 rho), no covariates
    double mean_loss_cov;  // q/(1 + 2 rho), chi-square_q shape
    double bias_n;         // rho sqrt(2/{n pi (1 + 2 rho)})
    double ni_mean;        // 1/2 on the n^{-1/2} scale
    double ni_var;         // 1/{4(1 + 2 rho)}
};
SmithAsymptotics smith_asymptotics(double rho, int n, int q);

// Asymptotic Var D_{n,i} for t treatments: n(t-1)/{t^2 (1 + 2 rho)}.
double t_treatment_variance(double rho, int t, int n);

}  // namespace bcd

#endif  // BCD_MARKOV_HPP
