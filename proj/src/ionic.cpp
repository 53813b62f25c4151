#include "cardiored/ionic.hpp"

#include "cardiored/error.hpp"

namespace cardiored {

void IonicParams::validate() const {
    if (!(V_r < V_th && V_th < V_p))
        throw InvalidArgument("ionic parameters need V_r < V_th < V_p");
    if (!(c1 > 0.0 && c2 > 0.0 && b > 0.0))
        throw InvalidArgument("ionic rates c1, c2, b must be positive");
    if (!(C_m > 0.0)) throw InvalidArgument("membrane capacitance must be positive");
}

Eigen::VectorXd i_ion(const Eigen::VectorXd& u, const Eigen::VectorXd& w, const IonicParams& p) {
    Eigen::VectorXd out(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) out[i] = i_ion(u[i], w[i], p);
    return out;
}

Eigen::VectorXd gating_rhs(const Eigen::VectorXd& u, const Eigen::VectorXd& w, const IonicParams& p) {
    Eigen::VectorXd out(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) out[i] = gating_rhs(u[i], w[i], p);
    return out;
}

Eigen::VectorXd gating_update(const Eigen::VectorXd& w_prev, const Eigen::VectorXd& u_tilde,
                              double dt, const IonicParams& p) {
    const double a = dt * p.beta2();
    const double inv = 1.0 / (1.0 + dt * p.b * p.d);
    return ((w_prev.array() + a * (u_tilde.array() - p.V_r)) * inv).matrix();
}

Eigen::VectorXd du_i_ion(const Eigen::VectorXd& u, const Eigen::VectorXd& w, const IonicParams& p) {
    Eigen::VectorXd out(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) out[i] = partials(u[i], w[i], p).du_iion;
    return out;
}

Eigen::VectorXd dw_i_ion(const Eigen::VectorXd& u, const IonicParams& p) {
    return (p.C_m * p.c2 * (u.array() - p.V_r)).matrix();
}

}  // namespace cardiored
