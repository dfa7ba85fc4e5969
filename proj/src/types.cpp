#include "mergesim/types.hpp"

#include <algorithm>

namespace mergesim {

double beta_from_alpha(double alpha, double u_max, double u_min) {
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw ConfigError("controller.alpha: must lie in [0, 1), got " +
                          std::to_string(alpha));
    }
    const double peak = std::max(u_max * u_max, u_min * u_min);
    return alpha * peak / (2.0 * (1.0 - alpha));
}

}  // namespace mergesim
