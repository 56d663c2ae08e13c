#ifndef BCD_METRICS_HPP
#define BCD_METRICS_HPP

#include <vector>

namespace bcd {

// Per-patient-index averages of loss and selection bias, with Monte Carlo
// standard errors (zero for exact values).
struct PerNMetrics {
    int n = 0;
    double loss_mean = 0.0;
    double bias_mean = 0.0;
    double loss_se = 0.0;
    double bias_se = 0.0;
};

// Loss D_n^2 / n, used for all n regardless of parity.
double loss_simple(int d, int n);

// Expected contribution to selection bias when treatment 1 is allocated with
// probability pi1 and the guesser picks the arm with probability >= 0.5.
double expected_bias_increment(double pi1);

// Design efficiency 1 - L_n / n.
double efficiency(double loss, int n);

// Mean of adjacent entries: out[i] = (x[i-1] + x[i]) / 2; out[0] is NaN since
// the average is undefined at the first index.
std::vector<double> adjacent_average(const std::vector<double>& series);

}  // namespace bcd

#endif  // BCD_METRICS_HPP
