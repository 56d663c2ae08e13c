#include "bcd/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bcd {

double loss_simple(int d, int n) {
    if (n < 1) throw std::invalid_argument("loss_simple: n must be >= 1");
    if (std::abs(d) > n) throw std::invalid_argument("loss_simple: |d| cannot exceed n");
    return static_cast<double>(d) * d / n;
}

double expected_bias_increment(double pi1) {
    if (pi1 < 0.0 || pi1 > 1.0)
        throw std::invalid_argument("expected_bias_increment: pi1 must lie in [0, 1]");
    return 2.0 * std::max(pi1, 1.0 - pi1) - 1.0;
}

double efficiency(double loss, int n) {
    if (loss < 0.0 || loss > n)
        throw std::invalid_argument("efficiency: loss must lie in [0, n]");
    return 1.0 - loss / n;
}

std::vector<double> adjacent_average(const std::vector<double>& series) {
    std::vector<double> out(series.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 1; i < series.size(); ++i)
        out[i] = 0.5 * (series[i - 1] + series[i]);
    return out;
}

}  // namespace bcd
