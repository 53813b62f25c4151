#pragma once

#include <Eigen/Core>

namespace cardiored {

// Rogers-McCulloch membrane model. Potentials in mV, rates in 1/ms.
struct IonicParams {
    double C_m = 1.0;     // uF/cm^2
    double V_r = -85.0;
    double V_th = -72.0;
    double V_p = 15.0;
    double c1 = 11.54;
    double c2 = 4.4;
    double b = 0.012;
    double d = 1.0;

    double beta1() const { return c1 / ((V_p - V_r) * (V_p - V_r)); }
    double beta2() const { return b / (V_p - V_r); }

    // Throws InvalidArgument unless V_r < V_th < V_p and c1, c2, b > 0.
    void validate() const;
};

struct IonicPartials {
    double du_iion;
    double dw_iion;
    double du_g;
    double dw_g;
};

inline double i_ion(double u, double w, const IonicParams& p) {
    const double ur = u - p.V_r;
    return p.C_m * (p.beta1() * ur * (u - p.V_th) * (u - p.V_p) + p.c2 * ur * w);
}

inline double gating_rhs(double u, double w, const IonicParams& p) {
    return -p.beta2() * (u - p.V_r) + p.b * p.d * w;
}

// Backward-Euler step of dw/dt = -g(u, w). g is affine in w, so the implicit
// equation is solved in closed form.
inline double gating_update(double w_prev, double u_tilde, double dt, const IonicParams& p) {
    return (w_prev + dt * p.beta2() * (u_tilde - p.V_r)) / (1.0 + dt * p.b * p.d);
}

inline IonicPartials partials(double u, double w, const IonicParams& p) {
    const double ur = u - p.V_r;
    const double ut = u - p.V_th;
    const double up = u - p.V_p;
    const double b1 = p.beta1();
    return {
        p.C_m * (b1 * (ut * up + ur * up + ur * ut) + p.c2 * w),
        p.C_m * p.c2 * ur,
        -p.beta2(),
        p.b * p.d,
    };
}

// Component-wise vector forms.
Eigen::VectorXd i_ion(const Eigen::VectorXd& u, const Eigen::VectorXd& w, const IonicParams& p);
Eigen::VectorXd gating_rhs(const Eigen::VectorXd& u, const Eigen::VectorXd& w, const IonicParams& p);
Eigen::VectorXd gating_update(const Eigen::VectorXd& w_prev, const Eigen::VectorXd& u_tilde,
                              double dt, const IonicParams& p);
Eigen::VectorXd du_i_ion(const Eigen::VectorXd& u, const Eigen::VectorXd& w, const IonicParams& p);
Eigen::VectorXd dw_i_ion(const Eigen::VectorXd& u, const IonicParams& p);

}  // namespace cardiored
