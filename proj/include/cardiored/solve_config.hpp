#pragma once

#include <cmath>

namespace cardiored {

// Longitudinal / transverse monodomain conductivities, mS/cm.
struct Conductivity {
    double ml = 0.0;
    double mt = 0.0;

    double rho() const { return std::hypot(ml, mt); }
    double theta() const { return std::atan2(mt, ml); }
    static Conductivity from_polar(double rho, double theta) {
        return {rho * std::cos(theta), rho * std::sin(theta)};
    }
    bool positive() const { return std::isfinite(ml) && std::isfinite(mt) && ml > 0.0 && mt > 0.0; }
    bool operator==(const Conductivity&) const = default;
};

enum class IonicEvaluation { nodal, exact };

struct SolveConfig {
    double dt = 0.05;   // ms
    double T = 30.0;    // ms
    int bdf_order = 2;
    double beta = 2000.0;        // membrane surface-to-volume ratio, 1/cm
    double linear_tol = 1e-10;   // CG relative residual
    int max_linear_iter = 0;     // 0 selects 10 * sqrt(n)
    int stride = 1;              // record every `stride` steps
    bool record_u = true;
    bool record_w = false;
    bool record_iion = false;
    IonicEvaluation ionic = IonicEvaluation::nodal;

    long steps() const { return std::lround(T / dt); }
    void validate() const;
};

// BDF weights: alpha0 multiplies u^{l+1}, alpha1/alpha2 the history.
struct BdfCoefficients {
    double alpha0, alpha1, alpha2;
};
// Step 1 bootstraps with BDF1 because u^{-1} does not exist.
BdfCoefficients bdf_coefficients(long step, int order);

}  // namespace cardiored
