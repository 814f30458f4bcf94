#pragma once

// Benchmark models: longitudinal drone (one and two uncertain parameters),
// a single decoupled room of a building temperature model, and a
// three-compartment anesthesia model.

#include "pacabs/pipeline.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace pacabs {

/// Bound on the coupling term sum_j (T_j - T_i) / R_ij when every zone
/// temperature ranges over an interval of width `width`, times `scale`
/// (e.g. step length over thermal capacitance). One resistance per neighbour.
inline HyperRectangle decouple_disturbance_set(double width, const std::vector<double>& resistances, double scale = 1.0) {
    require(width >= 0.0, "decouple_disturbance_set: negative temperature range width");
    double bound = 0.0;
    for (double R : resistances) {
        if (!(R > 0.0)) fail("decouple_disturbance_set: resistances must be positive");
        bound += width / R;
    }
    bound *= scale;
    return {Vector::Constant(1, -bound), Vector::Constant(1, bound)};
}

namespace detail {

inline Rows diag_rows(const std::vector<double>& d) {
    Rows r(d.size(), std::vector<double>(d.size(), 0.0));
    for (std::size_t i = 0; i < d.size(); ++i) r[i][i] = d[i];
    return r;
}

}  // namespace detail

// ---------------------------------------------------------------- drone

struct DroneParams {
    double tau = 1.0;
    double m_min = 0.75;
    double m_max = 1.25;
    double m_nominal = 1.0;
    double u_max = 5.0;
    double noise_std = 0.07;
    /// Targets are the grid cells enlarged around their centers; with
    /// cell-sized targets the image of a whole cell cannot fit inside one
    /// target, so no action would be enabled.
    std::vector<double> target_scale{2.0, 1.2};
};

/// Weights of the two mass vertices for mass m (the dynamics are affine in 1/m).
inline Vector drone_alpha(double m, const DroneParams& p = {}) {
    const double t = 1.0 / m, t1 = 1.0 / p.m_min, t2 = 1.0 / p.m_max;
    const double a = (t - t2) / (t1 - t2);
    Vector alpha(2);
    alpha << a, 1.0 - a;
    return alpha;
}

inline RunConfig drone_config(const DroneParams& p = {}) {
    RunConfig c;
    c.name = "drone";
    const double tau = p.tau;
    for (double m : {p.m_min, p.m_max}) {
        c.A.push_back({{1.0, tau}, {0.0, 1.0 - 0.1 * tau / m}});
        c.B.push_back({{tau * tau / (2.0 * m)}, {tau / m}});
    }
    c.alpha_hat = detail::to_std(drone_alpha(p.m_nominal, p));
    c.control_vertices = {{-p.u_max}, {p.u_max}};
    c.noise.mean = {0.0, 0.0};
    c.noise.covariance = detail::diag_rows({p.noise_std * p.noise_std, p.noise_std * p.noise_std});
    c.domain = {{-10.0, -10.0}, {14.0, 10.0}};
    c.counts = {24, 20};
    c.goal = BoxSpec{{8.0, -10.0}, {14.0, 10.0}};
    c.target_scale = p.target_scale;
    c.spec = "reach-avoid";
    c.horizon = 12;
    c.samples = 20000;
    c.confidence = 0.99;
    c.merge_radius = 0.01;
    c.seed = 1;
    c.extra = json{{"masses", {0.75, 0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2, 1.25}},
                   {"m_min", p.m_min},
                   {"m_max", p.m_max}};
    return c;
}

struct Drone2Params {
    double tau = 1.0;
    double m_min = 0.9, m_max = 1.1, m_nominal = 1.0;
    double zeta_min = 0.4, zeta_max = 0.6, zeta_nominal = 0.5;
    double u_max = 5.0;
    double noise_std = 0.07;
    std::vector<double> target_scale{2.0, 1.2};
};

/// Bilinear weights of the four (1/m, zeta) corners, ordered
/// (m_min, z_min), (m_max, z_min), (m_min, z_max), (m_max, z_max).
inline Vector drone2_alpha(double m, double zeta, const Drone2Params& p = {}) {
    const double t = 1.0 / m, t1 = 1.0 / p.m_min, t2 = 1.0 / p.m_max;
    const double a = (t1 - t) / (t1 - t2);  // 0 at m_min, 1 at m_max
    const double b = (zeta - p.zeta_min) / (p.zeta_max - p.zeta_min);
    Vector alpha(4);
    alpha << (1 - a) * (1 - b), a * (1 - b), (1 - a) * b, a * b;
    return alpha;
}

inline RunConfig drone2_config(const Drone2Params& p = {}) {
    RunConfig c;
    c.name = "drone-2param";
    const double tau = p.tau;
    for (double zeta : {p.zeta_min, p.zeta_max})
        for (double m : {p.m_min, p.m_max}) {
            c.A.push_back({{1.0, tau}, {-zeta / m, 1.0 - 0.1 * tau / m}});
            c.B.push_back({{tau * tau / (2.0 * m)}, {tau / m}});
        }
    c.alpha_hat = detail::to_std(drone2_alpha(p.m_nominal, p.zeta_nominal, p));
    c.control_vertices = {{-p.u_max}, {p.u_max}};
    c.noise.mean = {0.0, 0.0};
    c.noise.covariance = detail::diag_rows({p.noise_std * p.noise_std, p.noise_std * p.noise_std});
    c.domain = {{-10.0, -10.0}, {14.0, 10.0}};
    c.counts = {24, 20};
    c.goal = BoxSpec{{8.0, -10.0}, {14.0, 10.0}};
    c.target_scale = p.target_scale;
    c.spec = "reach-avoid";
    c.horizon = 12;
    c.samples = 20000;
    c.confidence = 0.99;
    c.merge_radius = 0.01;
    c.seed = 1;
    c.extra = json{{"masses", {0.9, 0.95, 1.0, 1.05, 1.1}}, {"zetas", {0.4, 0.5, 0.6}}};
    return c;
}

// ---------------------------------------------------------- temperature

/// One room of the building, decoupled from its neighbours. Rates are per
/// minute and already divided by the zone's thermal capacitance. The
/// constants are illustrative; the radiator output factor P is uncertain.
struct TemperatureParams {
    double step_minutes = 20.0;
    double a_wall = 0.0005;     // 1 / (C R_wall)
    double T_wall = 12.0;
    double a_ac = 0.003;        // m C_pa / C
    double a_rad = 0.0003;      // nominal radiator output / C
    double P_min = 0.8, P_max = 1.2, P_nominal = 1.0;
    double k1 = 0.005;          // radiator to zone exchange
    double k0w = 0.01;          // boiler water flow
    double T_boil = 60.0;
    double ac_min = 15.0, ac_max = 30.0;
    std::vector<double> neighbour_coupling{0.0004, 0.0004};  // 1 / (C R_ij)
    double zone_low = 18.5, zone_high = 23.5;
    double rad_low = 44.0, rad_high = 50.0;
    double zone_var = 0.002, rad_var = 0.01;
    std::vector<double> target_scale{1.2, 2.0};
};

inline RunConfig temperature_config(int zone_cells, int rad_cells, const TemperatureParams& p = {}) {
    RunConfig c;
    c.name = "temperature";
    const double h = p.step_minutes;
    for (double P : {p.P_min, p.P_max}) {
        const double aP = p.a_rad * P;
        c.A.push_back({{1.0 - h * (p.a_wall + p.a_ac + aP), h * aP}, {h * p.k1, 1.0 - h * (p.k1 + p.k0w)}});
        c.B.push_back({{h * p.a_ac}, {0.0}});
    }
    const double a = (p.P_nominal - p.P_max) / (p.P_min - p.P_max);
    c.alpha_hat = {a, 1.0 - a};
    c.offset = {h * p.a_wall * p.T_wall, h * p.k0w * p.T_boil};
    c.control_vertices = {{p.ac_min}, {p.ac_max}};
    // Neighbour zones may sit anywhere in the safe range.
    std::vector<double> R;
    for (double g : p.neighbour_coupling) R.push_back(1.0 / g);
    const auto q = decouple_disturbance_set(p.zone_high - p.zone_low, R, h);
    c.disturbance = BoxSpec{{q.lower()[0], 0.0}, {q.upper()[0], 0.0}};
    c.noise.mean = {0.0, 0.0};
    c.noise.covariance = detail::diag_rows({p.zone_var, p.rad_var});
    c.domain = {{p.zone_low, p.rad_low}, {p.zone_high, p.rad_high}};
    c.counts = {zone_cells, rad_cells};
    c.target_scale = p.target_scale;
    c.spec = "safety";
    c.horizon = 15;
    c.samples = 20000;
    c.confidence = 0.99;
    c.merge_radius = 0.01;
    c.seed = 1;
    c.extra = json{{"P_min", p.P_min}, {"P_max", p.P_max}};
    return c;
}

// ----------------------------------------------------------- anesthesia

/// Pharmacokinetic constants (per minute) and central volume. These are
/// patient data from prior work and must be supplied by the user.
struct AnesthesiaParams {
    double k10 = 0, k12 = 0, k13 = 0, k21 = 0, k31 = 0, V1 = 0;
    double uncertainty = 0.1;    // relative range of k10, k21 and V1
    double step_minutes = 1.0 / 3.0;
    double u_min = 0.0, u_max = 7.0;
    double noise_var = 1e-3;
    std::vector<double> target_scale{1.5, 2.0, 2.0};
    double merge_radius = 0.01;

    static AnesthesiaParams from_json(const json& j) {
        static const char* keys[] = {"k10", "k12", "k13", "k21", "k31", "V1"};
        std::string missing;
        for (const char* k : keys)
            if (!j.contains(k)) missing += std::string(missing.empty() ? "" : ", ") + k;
        if (!missing.empty())
            fail("anesthesia: missing pharmacokinetic parameters (" + missing +
                 "); these patient constants come from the pharmacokinetic literature and are not bundled, "
                 "supply them in the configuration");
        AnesthesiaParams p;
        p.k10 = j["k10"];
        p.k12 = j["k12"];
        p.k13 = j["k13"];
        p.k21 = j["k21"];
        p.k31 = j["k31"];
        p.V1 = j["V1"];
        p.uncertainty = j.value("uncertainty", p.uncertainty);
        p.step_minutes = j.value("step_minutes", p.step_minutes);
        p.u_min = j.value("u_min", p.u_min);
        p.u_max = j.value("u_max", p.u_max);
        p.noise_var = j.value("noise_var", p.noise_var);
        if (j.contains("target_scale")) p.target_scale = j["target_scale"].get<std::vector<double>>();
        p.merge_radius = j.value("merge_radius", p.merge_radius);
        require(p.V1 > 0 && p.k10 >= 0 && p.k12 >= 0 && p.k13 >= 0 && p.k21 >= 0 && p.k31 >= 0,
                "anesthesia: parameters must be nonnegative and V1 positive");
        return p;
    }
};

/// Zero-order-hold discretization of x' = Ac x + Bc u over step h, via the
/// exponential of the augmented matrix [[Ac, Bc], [0, 0]].
inline std::pair<Matrix, Matrix> zoh_discretize(const Matrix& Ac, const Matrix& Bc, double h) {
    const auto n = Ac.rows(), m = Bc.cols();
    Matrix aug = Matrix::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = Ac * h;
    aug.topRightCorner(n, m) = Bc * h;
    const Matrix E = aug.exp();
    return {E.topLeftCorner(n, n), E.topRightCorner(n, m)};
}

inline std::pair<Matrix, Matrix> anesthesia_continuous(double k10, double k12, double k13, double k21, double k31, double V1) {
    Matrix Ac(3, 3);
    Ac << -(k10 + k12 + k13), k12, k13,
          k21, -k21, 0.0,
          k31, 0.0, -k31;
    Matrix Bc(3, 1);
    Bc << 1.0 / V1, 0.0, 0.0;
    return {Ac, Bc};
}

/// Corner index bits: bit 0 selects k10, bit 1 k21, bit 2 V1 (0 = low).
inline RunConfig anesthesia_config(const AnesthesiaParams& p) {
    require(p.V1 > 0, "anesthesia: missing pharmacokinetic parameters; supply k10, k12, k13, k21, k31 and V1");
    RunConfig c;
    c.name = "anesthesia";
    const double lo = 1.0 - p.uncertainty, hi = 1.0 + p.uncertainty;
    for (int corner = 0; corner < 8; ++corner) {
        const double k10 = p.k10 * ((corner & 1) ? hi : lo);
        const double k21 = p.k21 * ((corner & 2) ? hi : lo);
        const double V1 = p.V1 * ((corner & 4) ? hi : lo);
        const auto [Ac, Bc] = anesthesia_continuous(k10, p.k12, p.k13, k21, p.k31, V1);
        const auto [A, B] = zoh_discretize(Ac, Bc, p.step_minutes);
        c.A.push_back(detail::to_rows(A));
        c.B.push_back(detail::to_rows(B));
    }
    c.control_vertices = {{p.u_min}, {p.u_max}};
    c.noise.mean = {0.0, 0.0, 0.0};
    c.noise.covariance = detail::diag_rows({p.noise_var, p.noise_var, p.noise_var});
    c.domain = {{1.0, 0.0, 0.0}, {6.0, 10.0, 10.0}};
    c.counts = {20, 20, 20};
    c.target_scale = p.target_scale;
    c.spec = "safety";
    c.horizon = 20;
    c.samples = 20000;
    c.confidence = 0.99;
    c.merge_radius = p.merge_radius;
    c.seed = 1;
    return c;
}

}  // namespace pacabs
