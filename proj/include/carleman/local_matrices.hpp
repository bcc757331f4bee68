#pragma once

#include <Eigen/Dense>

#include "carleman/flow_field.hpp"

namespace carleman::lifted {

/// Coefficient tensors of the Euler-discretized polynomial Grad system,
///   V(t+1) = A V + B V^(2) + C V^(3),
/// with the one-step matrix split as A = A_loc (x) I_N + A_d1 (x) D1 + A_d2 (x) D2.
/// Tensor indices are row-major: V^(2) index (b,c) -> 6b + c, V^(3) index
/// (b,c,d) -> 36b + 6c + d.
struct LocalMatrices {
    Eigen::Matrix<double, 6, 6> a_loc;
    Eigen::Matrix<double, 6, 6> a_d1;
    Eigen::Matrix<double, 6, 6> a_d2;
    Eigen::Matrix<double, 6, 36> b;
    Eigen::Matrix<double, 6, 216> c;
};

/// Transport rows carry the divergence-form signs of the hyperbolic system
/// (-dt on every derivative term); the relaxation rows carry the 1 - omega*dt
/// diagonal, the omega*cs^2 density coupling, and the quadratic/cubic sources
/// from the polynomial inverse: B_{3,(1,1)} = B_{4,(1,2)} = B_{5,(2,2)} =
/// 2*dt*omega and C_{3,(1,1,0)} = C_{4,(1,2,0)} = C_{5,(2,2,0)} = -dt*omega.
inline LocalMatrices build_local_matrices(const grad::GradParams& params) {
    params.validate();
    const double dt = params.dt;
    const double omega = params.omega;
    const double c2 = params.cs * params.cs;

    LocalMatrices m;
    m.a_loc.setZero();
    m.a_d1.setZero();
    m.a_d2.setZero();
    m.b.setZero();
    m.c.setZero();

    using namespace grad;

    // Local part: identity on the conserved rows, relaxation on the P rows.
    m.a_loc(kRho, kRho) = 1.0;
    m.a_loc(kJ1, kJ1) = 1.0;
    m.a_loc(kJ2, kJ2) = 1.0;
    m.a_loc(kP11, kP11) = 1.0 - omega * dt;
    m.a_loc(kP12, kP12) = 1.0 - omega * dt;
    m.a_loc(kP22, kP22) = 1.0 - omega * dt;
    m.a_loc(kP11, kRho) = omega * dt * c2;
    m.a_loc(kP22, kRho) = omega * dt * c2;

    // Coefficients of D1.
    m.a_d1(kRho, kJ1) = -dt;
    m.a_d1(kJ1, kP11) = -dt;
    m.a_d1(kJ2, kP12) = -dt;
    m.a_d1(kP11, kJ1) = -3.0 * dt * c2;
    m.a_d1(kP12, kJ2) = -dt * c2;
    m.a_d1(kP22, kJ1) = -dt * c2;

    // Coefficients of D2.
    m.a_d2(kRho, kJ2) = -dt;
    m.a_d2(kJ1, kP12) = -dt;
    m.a_d2(kJ2, kP22) = -dt;
    m.a_d2(kP11, kJ2) = -dt * c2;
    m.a_d2(kP12, kJ1) = -dt * c2;
    m.a_d2(kP22, kJ2) = -3.0 * dt * c2;

    const auto idx2 = [](int b_, int c_) { return 6 * b_ + c_; };
    const auto idx3 = [](int b_, int c_, int d_) { return 36 * b_ + 6 * c_ + d_; };

    m.b(kP11, idx2(kJ1, kJ1)) = 2.0 * dt * omega;
    m.b(kP12, idx2(kJ1, kJ2)) = 2.0 * dt * omega;
    m.b(kP22, idx2(kJ2, kJ2)) = 2.0 * dt * omega;

    m.c(kP11, idx3(kJ1, kJ1, kRho)) = -dt * omega;
    m.c(kP12, idx3(kJ1, kJ2, kRho)) = -dt * omega;
    m.c(kP22, idx3(kJ2, kJ2, kRho)) = -dt * omega;

    return m;
}

}  // namespace carleman::lifted
