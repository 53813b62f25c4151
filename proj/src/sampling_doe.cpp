#include "cardiored/sampling_doe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

#include "cardiored/error.hpp"

namespace cardiored {

void PolarSamplingSpec::validate() const {
    if (!(theta_min < theta_max)) throw InvalidArgument("sampling needs theta_min < theta_max");
    if (!(rho_min < rho_max)) throw InvalidArgument("sampling needs rho_min < rho_max");
    if (n_theta < 2) throw InvalidArgument("sampling needs n_theta >= 2");
    for (int i = 1; i < n_theta; ++i)
        if (n_rho(i) < 2) throw InvalidArgument("every angular band needs at least 2 radial nodes");
}

std::vector<double> cosine_nodes(double lo, double hi, int count) {
    std::vector<double> out;
    for (int i = 1; i <= count; ++i)
        out.push_back(hi - (hi - lo) * std::cos((i - 1) * std::numbers::pi / (2.0 * (count - 1))));
    out.front() = lo;
    out.back() = hi;
    return out;
}

std::vector<Conductivity> polar_samples(const PolarSamplingSpec& spec, const Constraints& admissible) {
    spec.validate();
    const auto theta = cosine_nodes(spec.theta_min, spec.theta_max, spec.n_theta);
    std::vector<Conductivity> out;
    for (int i = 1; i < spec.n_theta; ++i) {
        const double th = 0.5 * (theta[i - 1] + theta[i]);
        const auto rho = cosine_nodes(spec.rho_min, spec.rho_max, spec.n_rho(i));
        for (std::size_t j = 0; j + 1 < rho.size(); ++j)
            out.push_back(Conductivity::from_polar(0.5 * (rho[j] + rho[j + 1]), th));
    }
    for (const auto& e : spec.extra) out.push_back(Conductivity::from_polar(e.rho, e.theta));

    std::string bad;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!admissible.feasible(out[i])) bad += fmt::format(" #{} [{:.4f}, {:.4f}]", i, out[i].ml, out[i].mt);
    if (!bad.empty()) spdlog::warn("polar samples outside the admissible set:{}", bad);
    return out;
}

std::vector<double> equiangular_partition(int k, double theta_min, double theta_max) {
    if (k < 1) throw InvalidArgument("partition needs k >= 1");
    if (!(theta_min < theta_max)) throw InvalidArgument("partition needs theta_min < theta_max");
    std::vector<double> b(static_cast<std::size_t>(k + 1));
    for (int i = 0; i <= k; ++i) b[static_cast<std::size_t>(i)] = theta_min + (theta_max - theta_min) * i / k;
    b.back() = theta_max;
    return b;
}

int angular_band(const std::vector<double>& boundaries, double theta) {
    const int k = static_cast<int>(boundaries.size()) - 1;
    for (int i = 0; i < k; ++i)
        if (theta < boundaries[static_cast<std::size_t>(i + 1)]) return i;
    return k - 1;
}

std::string to_string(DoeClass c) {
    switch (c) {
        case DoeClass::black: return "black";
        case DoeClass::cyan: return "cyan";
        case DoeClass::white: return "white";
    }
    return "white";
}

DoeClass classify(double e) {
    if (e <= 0.002) return DoeClass::black;
    if (e <= 0.005) return DoeClass::cyan;
    return DoeClass::white;
}

std::vector<Conductivity> doe_grid(double ml_lo, double ml_hi, double mt_lo, double mt_hi, int nx, int ny) {
    if (nx < 1 || ny < 1) throw InvalidArgument("DOE grid needs at least one point per axis");
    if (!(ml_lo > 0.0 && mt_lo > 0.0 && ml_lo <= ml_hi && mt_lo <= mt_hi))
        throw InvalidArgument("DOE grid must lie in the positive quadrant");
    std::vector<Conductivity> g;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            g.push_back({nx == 1 ? ml_lo : ml_lo + (ml_hi - ml_lo) * i / (nx - 1),
                         ny == 1 ? mt_lo : mt_lo + (mt_hi - mt_lo) * j / (ny - 1)});
    return g;
}

double relative_error(const TrajectoryRecord& full, const PodBasis& Zu, const ReducedTrajectory& reduced) {
    if (full.stride != 1 || full.u.cols() != reduced.a.cols() || full.u.rows() != Zu.size())
        throw InvalidArgument("relative error needs matching full and reduced trajectories");
    double num = 0.0, den = 0.0;
    for (Eigen::Index l = 0; l < full.u.cols(); ++l) {
        num += (Zu.lift(reduced.a.col(l)) - full.u.col(l)).squaredNorm();
        den += full.u.col(l).squaredNorm();
    }
    return num / den;
}

DoeMap doe_map(const ReducedBasis& basis, const std::vector<Conductivity>& grid, const ForwardContext& ctx) {
    if (!ctx.ops) throw InvalidArgument("DOE map needs assembled operators");
    SolveConfig cfg = ctx.cfg;
    cfg.stride = 1;
    cfg.record_u = true;
    const auto red = build_reduced_operators(*ctx.ops, basis, nullptr, ctx.stim, ctx.ionic);
    DoeMap map;
    map.sigma_gen = basis.sigma_gen;
    for (const auto& s : grid) {
        DoePoint pt;
        pt.sigma = s;
        try {
            const auto full = solve_monodomain(*ctx.ops, s, ctx.stim, cfg, ctx.ionic);
            const auto r = solve_reduced(red, s, cfg, ctx.ionic);
            pt.e = relative_error(full, basis.u, r);
            pt.cls = classify(pt.e);
        } catch (const std::exception& ex) {
            pt.ok = false;
            pt.e = std::numeric_limits<double>::quiet_NaN();
            pt.error = ex.what();
            spdlog::warn("DOE point [{}, {}] failed: {}", s.ml, s.mt, ex.what());
        }
        map.points.push_back(pt);
    }
    return map;
}

double band_confinement(const DoeMap& map, int k) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : map.points) {
        lo = std::min(lo, p.sigma.theta());
        hi = std::max(hi, p.sigma.theta());
    }
    const auto bounds = equiangular_partition(k, lo, hi);
    const int home = angular_band(bounds, map.sigma_gen.theta());
    int effective = 0, inside = 0;
    for (const auto& p : map.points)
        if (p.ok && p.e <= 0.005) {
            ++effective;
            inside += angular_band(bounds, p.sigma.theta()) == home;
        }
    return effective ? double(inside) / effective : 0.0;
}

}  // namespace cardiored
