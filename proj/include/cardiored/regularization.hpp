#pragma once

#include <array>

#include "cardiored/solve_config.hpp"

namespace cardiored {

// (alpha/2) R(sigma) with the Tikhonov choice R = |sigma - prior|^2. alpha = 0 disables it.
struct Regularization {
    double alpha = 0.0;
    Conductivity prior{};

    double value(const Conductivity& s) const {
        const double a = s.ml - prior.ml, b = s.mt - prior.mt;
        return 0.5 * alpha * (a * a + b * b);
    }
    std::array<double, 2> gradient(const Conductivity& s) const {
        return {alpha * (s.ml - prior.ml), alpha * (s.mt - prior.mt)};
    }
};

}  // namespace cardiored
