#include "oracles/lp.hpp"
#include "pacabs/benchmarks.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pacabs;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector x(Eigen::Index(v.size()));
    Eigen::Index i = 0;
    for (double d : v) x[i++] = d;
    return x;
}

ParametricLinearModel simple_model(const Matrix& A, const Matrix& B, std::vector<Vector> U) {
    return ParametricLinearModel({A}, {B}, VPolytope(std::move(U)), NoiseSource::zero(A.rows()), 1);
}

}  // namespace

TEST(Combine, VerticesAndAverage) {
    Matrix A1 = Matrix::Identity(2, 2), A2 = 3 * Matrix::Identity(2, 2);
    Matrix B1 = Matrix::Ones(2, 1), B2 = -Matrix::Ones(2, 1);
    ParametricLinearModel m({A1, A2}, {B1, B2}, VPolytope({vec({-1}), vec({1})}), NoiseSource::zero(2), 3);
    auto [A, B] = m.combine(vec({1, 0}));
    EXPECT_EQ(A, A1);
    EXPECT_EQ(B, B1);
    std::tie(A, B) = m.combine(vec({0.5, 0.5}));
    EXPECT_TRUE(A.isApprox(2 * Matrix::Identity(2, 2)));
    EXPECT_TRUE(B.isZero());
    EXPECT_THROW(m.combine(vec({0.7, 0.7})), Error);
    EXPECT_THROW(m.combine(vec({1.1, -0.1})), Error);
}

TEST(Combine, DroneLightVertex) {
    const auto m = build_model(drone_config());
    const auto [A, B] = m.combine(drone_alpha(0.75));
    EXPECT_NEAR(A(1, 1), 1 - 0.1 / 0.75, 1e-15);
    EXPECT_NEAR(B(0, 0), 1 / 1.5, 1e-15);
}

TEST(ModelConstruction, RejectsBadNominal) {
    Matrix S = Matrix::Zero(2, 2);
    S(0, 0) = 1;
    EXPECT_THROW(simple_model(S, Matrix::Identity(2, 2), {vec({0, 0})}), NumericalError);
    Matrix A = Matrix::Identity(2, 2);
    EXPECT_THROW(ParametricLinearModel({A, A}, {A, A}, VPolytope({vec({0, 0})}), NoiseSource::zero(2), 1, vec({0.6, 0.6})),
                 Error);
}

TEST(BackwardReachSet, IdentityFixedInput) {
    const auto m = simple_model(Matrix::Identity(2, 2), Matrix::Identity(2, 2), {vec({0, 0})});
    const HyperRectangle T(vec({-0.1, -0.1}), vec({0.1, 0.1}));
    const auto R = m.backward_reach_set(VPolytope::from_box(T));
    EXPECT_EQ(bounding_box(R), T);
}

TEST(BackwardReachSet, IdentityBoxInput) {
    const auto m = simple_model(Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                HyperRectangle(vec({-1, -1}), vec({1, 1})).vertices());
    const auto R = m.backward_reach_set(VPolytope::from_box({vec({-0.1, -0.1}), vec({0.1, 0.1})}));
    const auto b = bounding_box(R);
    EXPECT_TRUE(b.lower().isApprox(vec({-1.1, -1.1})));
    EXPECT_TRUE(b.upper().isApprox(vec({1.1, 1.1})));
}

TEST(BackwardReachSet, DroneHullPointsAreSteerable) {
    const auto c = drone_config();
    const auto m = build_model(c);
    const HyperRectangle T(vec({1.5, 4}), vec({3.5, 6}));
    const auto R = m.backward_reach_set(VPolytope::from_box(T));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U01(0, 1);
    std::vector<Vector> U{vec({-5}), vec({5})};
    for (int k = 0; k < 1000; ++k) {
        // Random convex combination of the hull vertices.
        Vector w(Eigen::Index(R.vertices().size()));
        for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = -std::log(U01(rng) + 1e-300);
        w /= w.sum();
        Vector x = Vector::Zero(2);
        for (Eigen::Index i = 0; i < w.size(); ++i) x += w[i] * R.vertices()[std::size_t(i)];
        ASSERT_TRUE(oracle::reach_feasible(m.A_hat(), m.B_hat(), m.offset(), x, U, T.lower(), T.upper()));
    }
}

TEST(EpistemicErrorHull, VanishesWithoutUncertainty) {
    const auto m = simple_model(2 * Matrix::Identity(2, 2), Matrix::Identity(2, 2), {vec({0, 0}), vec({1, 0}), vec({0, 1})});
    const auto H = m.epistemic_error_hull({vec({0, 0}), vec({1, 1})});
    for (const auto& v : H.vertices()) EXPECT_LT(v.norm(), 1e-15);
    Matrix A = Matrix::Identity(2, 2);
    ParametricLinearModel same({A, A}, {A, A}, VPolytope({vec({0, 0}), vec({1, 1}), vec({1, 0})}), NoiseSource::zero(2), 1);
    const auto H2 = same.epistemic_error_hull({vec({0, 0}), vec({1, 1})});
    for (const auto& v : H2.vertices()) EXPECT_LT(v.norm(), 1e-15);
}

TEST(EpistemicErrorHull, DroneDenseGridSoundness) {
    const auto m = build_model(drone_config());
    const HyperRectangle region(vec({0, 0}), vec({1, 1}));
    const auto hull = m.epistemic_error_hull(region);
    const auto H = vhull_to_hrep(hull);
    for (int a = 0; a <= 20; ++a) {
        Vector alpha(2);
        alpha << a / 20.0, 1 - a / 20.0;
        const auto [A, B] = m.combine(alpha);
        for (int i = 0; i <= 10; ++i)
            for (int j = 0; j <= 10; ++j)
                for (int k = 0; k <= 10; ++k) {
                    const Vector x = vec({i / 10.0, j / 10.0});
                    const Vector u = vec({-5 + k});
                    const Vector d = (A - m.A_hat()) * x + (B - m.B_hat()) * u;
                    ASSERT_LE(H.max_violation(d), 1e-9);
                }
    }
}

TEST(EpistemicErrorHull, DisturbanceExtendsHull) {
    auto c = drone_config();
    c.disturbance = BoxSpec{{-0.5, 0.0}, {0.5, 0.0}};
    const auto with_q = build_model(c);
    const auto without = build_model(drone_config());
    const HyperRectangle region(vec({0, 0}), vec({1, 1}));
    const auto a = with_q.epistemic_error_box(region);
    const auto b = without.epistemic_error_box(region);
    EXPECT_NEAR(a.lower()[0], b.lower()[0] - 0.5, 1e-12);
    EXPECT_NEAR(a.upper()[0], b.upper()[0] + 0.5, 1e-12);
    EXPECT_NEAR(a.lower()[1], b.lower()[1], 1e-12);
    EXPECT_EQ(bounding_box(with_q.epistemic_error_hull(region)), a);
}

TEST(Step, Examples) {
    const auto m = build_model(drone_config());
    EXPECT_TRUE(m.step(vec({0, 0}), vec({0}), drone_alpha(1.0), vec({0, 0})).isZero());
    const Vector x1 = m.step(vec({0, 0}), vec({5}), drone_alpha(1.0), vec({0, 0}));
    EXPECT_NEAR(x1[0], 2.5, 1e-12);
    EXPECT_NEAR(x1[1], 5.0, 1e-12);
    try {
        m.step(vec({0, 0}), vec({6}), drone_alpha(1.0), vec({0, 0}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("input outside control polytope"), std::string::npos);
    }
}

TEST(Step, DecompositionIdentity) {
    const auto m = build_model(drone2_config());
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(-1, 1);
    for (int k = 0; k < 1000; ++k) {
        Vector alpha = Vector::NullaryExpr(4, [&](Eigen::Index) { return std::abs(U(rng)) + 1e-3; });
        alpha /= alpha.sum();
        const Vector x = 10 * vec({U(rng), U(rng)});
        const Vector u = 5 * vec({U(rng)});
        const Vector eta = vec({U(rng), U(rng)});
        const auto [A, B] = m.combine(alpha);
        const Vector delta = (A - m.A_hat()) * x + (B - m.B_hat()) * u;
        const Vector lhs = m.step(x, u, alpha, eta);
        const Vector rhs = m.nominal_image(x, u) + delta + eta;
        ASSERT_LE((lhs - rhs).norm(), 1e-10 * (1 + lhs.norm()));
    }
}

TEST(NoiseSource, GaussianMomentsAndDeterminism) {
    Matrix cov(2, 2);
    cov << 1.0, 0.5, 0.5, 2.0;
    auto a = NoiseSource::gaussian(vec({1, -1}), cov, 42);
    auto b = NoiseSource::gaussian(vec({1, -1}), cov, 42);
    const auto s = a.draw(20000);
    const auto t = b.draw(20000);
    Vector mean = Vector::Zero(2);
    for (std::size_t k = 0; k < s.size(); ++k) {
        ASSERT_EQ(s[k], t[k]);
        mean += s[k];
    }
    mean /= double(s.size());
    Matrix C = Matrix::Zero(2, 2);
    for (const auto& v : s) C += (v - mean) * (v - mean).transpose();
    C /= double(s.size() - 1);
    EXPECT_NEAR(mean[0], 1, 0.03);
    EXPECT_NEAR(mean[1], -1, 0.04);
    EXPECT_NEAR(C(0, 1), 0.5, 0.05);
    EXPECT_NEAR(C(1, 1), 2.0, 0.08);
    // Forks are independent of the parent's position and of each other.
    EXPECT_NE(a.fork(1).draw_one(), a.fork(2).draw_one());
    EXPECT_EQ(a.fork(7).draw_one(), b.fork(7).draw_one());
}

TEST(NoiseSource, ReplayCycles) {
    auto r = NoiseSource::replay({vec({1}), vec({2})});
    EXPECT_EQ(r.draw_one()[0], 1);
    EXPECT_EQ(r.draw_one()[0], 2);
}
