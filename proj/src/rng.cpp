#include "bcd/rng.hpp"

#include <cmath>
#include <numbers>

namespace bcd {

double CounterRng::next_normal() noexcept {
    const double u1 = next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace bcd
