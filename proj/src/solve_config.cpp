#include "cardiored/solve_config.hpp"

#include "cardiored/error.hpp"

namespace cardiored {

void SolveConfig::validate() const {
    if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
    if (!(T >= dt)) throw InvalidArgument("final time must be at least one time step");
    if (bdf_order != 1 && bdf_order != 2) throw InvalidArgument("BDF order must be 1 or 2");
    if (stride < 1) throw InvalidArgument("recording stride must be at least 1");
    if (!(beta > 0.0)) throw InvalidArgument("surface-to-volume ratio must be positive");
}

BdfCoefficients bdf_coefficients(long step, int order) {
    if (order == 1 || step <= 1) return {1.0, 1.0, 0.0};
    return {1.5, 2.0, -0.5};
}

}  // namespace cardiored
