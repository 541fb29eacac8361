//! Lyapunov functions, ISS gains and bounds for the two loops of the cascade.
//!
//! Inner loop: `V_in = 2 K_p (1 − q̃0) + ½ xᵀ P x` with `x = [e; ω]`,
//! `P = [[4ηK_d I, 2ηJ], [2ηJ, J]]`, where `e = q_d* ⊗ q` is the vector part of
//! the error expressed as body-relative-to-desired. With `τ = K_p q̃_v − K_d ω`
//! (`q̃ = q* ⊗ q_d`) the error vector obeys `ė = ½(e0 I + e^)ω` and the torque
//! is `−K_p e − K_d ω`, which is the sign pattern under which the cross term
//! `2ηJ` makes `V̇_in` negative. Since `e = −q̃_v`, `V_in` is evaluated on `−q̃_v`.
//!
//! Outer loop: `V_out = ½ dist² + (h_p⁻¹/2)‖v‖² − ε dist ⟨v, t̂⟩` where
//! `h_p = K_p,t / m`, `h_d = K_d,t / m`.

mod audit;

pub use audit::{trajectory_audit, AuditConfig, AuditRecord, CertificateReport, PropertyId, PropertySummary};

use core::f64::consts::PI;

use nalgebra::{Matrix2, SymmetricEigen, Vector2, Vector6};
#[allow(unused_imports)]
use num_traits::Float;

use crate::outer::{geodesic_tangent, great_circle_dist};
use crate::so3::Quaternion;
use crate::{Error, Mat3, Result, Vec3};

/// `√6 · T · |ζ̃|`, the linear class-K bound on the attitude-induced disturbance.
pub fn lemma2_bound(thrust: f64, zeta_err: f64) -> f64 {
    6f64.sqrt() * thrust * zeta_err.abs()
}

/// Open interval `(0, upper)` of admissible `η` for the inner Lyapunov function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaInterval {
    pub upper: f64,
}

impl EtaInterval {
    pub fn midpoint(&self) -> f64 {
        0.5 * self.upper
    }

    pub fn contains(&self, eta: f64) -> bool {
        eta > 0.0 && eta < self.upper
    }
}

/// `η < min{K_d/λ_M(J), 2 K_p K_d / (4 λ_M(J) K_p + K_d²)}`.
///
/// The matrix bound `K_d J⁻¹` is read as the scalar `K_d / λ_M(J)`.
pub fn eta_interval(kp: f64, kd: f64, lambda_max: f64) -> EtaInterval {
    let first = kd / lambda_max;
    let second = 2.0 * kp * kd / (4.0 * lambda_max * kp + kd * kd);
    EtaInterval { upper: first.min(second) }
}

/// Largest eigenvalue of a symmetric inertia matrix.
pub fn lambda_max(inertia: &Mat3) -> f64 {
    inertia.symmetric_eigenvalues().max()
}

/// Inner-loop Lyapunov function.
pub fn lyapunov_inner(q_err: &Quaternion, omega: &Vec3, kp: f64, kd: f64, eta: f64, inertia: &Mat3) -> f64 {
    let e = -q_err.v;
    let mut p = nalgebra::Matrix6::zeros();
    p.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Mat3::identity() * (4.0 * eta * kd)));
    p.fixed_view_mut::<3, 3>(0, 3).copy_from(&(inertia * (2.0 * eta)));
    p.fixed_view_mut::<3, 3>(3, 0).copy_from(&(inertia * (2.0 * eta)));
    p.fixed_view_mut::<3, 3>(3, 3).copy_from(inertia);
    let x = Vector6::new(e.x, e.y, e.z, omega.x, omega.y, omega.z);
    // 1 − q̃₀ = ‖q̃_v‖² / (1 + q̃₀) for a unit quaternion, without cancellation.
    let one_minus_w = if q_err.w >= 0.0 {
        q_err.v.norm_squared() / (1.0 + q_err.w)
    } else {
        1.0 - q_err.w
    };
    2.0 * kp * one_minus_w + 0.5 * x.dot(&(p * x))
}

/// Constant matrices of the inner ISS bound and the asymptotic gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerCertificate {
    pub eta: f64,
    /// `Q̄_in = [[2ηK_p, ηK_d], [ηK_d, K_d − 2ηλ_M]]`.
    pub qbar: Matrix2<f64>,
    /// `D̄_in = [K_p + 2ηK_d, 2ηλ_M]`.
    pub dbar: Vector2<f64>,
    /// First component of `Q̄⁻¹ D̄`.
    pub gamma_in: f64,
    pub lambda_max: f64,
}

impl InnerCertificate {
    /// `Q̄⁻¹ D̄`, the ISS threshold direction per unit `‖ω_d‖∞`.
    pub fn gain_vector(&self) -> Vector2<f64> {
        solve2(&self.qbar, &self.dbar)
    }
}

pub fn inner_gain(kp: f64, kd: f64, eta: f64, lambda_max: f64) -> Result<InnerCertificate> {
    let qbar = Matrix2::new(2.0 * eta * kp, eta * kd, eta * kd, kd - 2.0 * eta * lambda_max);
    let dbar = Vector2::new(kp + 2.0 * eta * kd, 2.0 * eta * lambda_max);
    let (min_eig, _) = sym2_eigenvalues(&qbar);
    if !(min_eig > 0.0) {
        return Err(Error::NotPositiveDefinite {
            name: "Qbar_in",
            min_eigenvalue: min_eig,
        });
    }
    let gamma_in = solve2(&qbar, &dbar)[0];
    Ok(InnerCertificate {
        eta,
        qbar,
        dbar,
        gamma_in,
        lambda_max,
    })
}

/// Inner certificate with `η` at the midpoint of its admissible interval.
pub fn inner_gain_default(kp: f64, kd: f64, lambda_max: f64) -> Result<InnerCertificate> {
    inner_gain(kp, kd, eta_interval(kp, kd, lambda_max).midpoint(), lambda_max)
}

fn solve2(a: &Matrix2<f64>, b: &Vector2<f64>) -> Vector2<f64> {
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    Vector2::new((a[(1, 1)] * b[0] - a[(0, 1)] * b[1]) / det, (a[(0, 0)] * b[1] - a[(1, 0)] * b[0]) / det)
}

/// Closed-form eigenvalues `(min, max)` of a symmetric 2x2 matrix.
pub fn sym2_eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    let mean = 0.5 * (a + d);
    let radius = (0.5 * (a - d)).hypot(b);
    // Product form for the smaller root avoids cancellation when det ≪ mean².
    let hi = mean + radius.copysign(mean);
    let det = a * d - b * b;
    let lo = if hi != 0.0 { det / hi } else { 0.0 };
    if lo <= hi {
        (lo, hi)
    } else {
        (hi, lo)
    }
}

/// Eigenvalues of a symmetric 2x2 matrix by iterative QR (nalgebra).
pub fn sym2_eigenvalues_iterative(m: &Matrix2<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(*m).eigenvalues;
    (e.min(), e.max())
}

/// Admissible upper bound on `ε`: `min{√(h_p⁻¹), 16 h_d / (32 h_p + h_d² π²)}`.
pub fn epsilon_upper(h_pt: f64, h_dt: f64) -> f64 {
    (1.0 / h_pt).sqrt().min(epsilon_q_bound(h_pt, h_dt))
}

/// `16 h_d / (32 h_p + h_d² π²)`, the positive-definiteness bound of `Q`.
pub fn epsilon_q_bound(h_pt: f64, h_dt: f64) -> f64 {
    16.0 * h_dt / (32.0 * h_pt + h_dt * h_dt * PI * PI)
}

/// Outer-loop Lyapunov function. `v` must be tangent to the sphere at `p`.
pub fn lyapunov_outer(p: &Vec3, v: &Vec3, p_ref: &Vec3, h_pt: f64, epsilon: f64, l: f64, mu: f64) -> f64 {
    let dist = great_circle_dist(p, p_ref, l);
    let t_hat = geodesic_tangent(p, p_ref, mu);
    let cross = dist * v.dot(&t_hat);
    0.5 * dist * dist + 0.5 / h_pt * v.norm_squared() - epsilon * cross
}

/// Outer-loop ISS certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterCertificate {
    pub epsilon: f64,
    /// `Q = [[ε h_p, −ε h_d π/4], [−ε h_d π/4, h_p⁻¹ h_d − 2ε]]`.
    pub q: Matrix2<f64>,
    /// Smallest eigenvalue of `Q`.
    pub mu_q: f64,
    /// Largest tolerated `‖Δ_ζ̃‖`: `4 μ L² / √(ε² + h_p⁻²)`.
    pub delta_max: f64,
    pub h_pt: f64,
    pub h_dt: f64,
}

impl OuterCertificate {
    /// State-norm threshold above which `V̇_out < 0`: `μ⁻¹ ‖[ε; h_p⁻¹]‖ ‖Δ‖`.
    pub fn iss_radius(&self, delta_norm: f64) -> f64 {
        self.epsilon.hypot(1.0 / self.h_pt) * delta_norm / self.mu_q
    }
}

pub fn outer_certificate(h_pt: f64, h_dt: f64, epsilon: f64, l: f64) -> Result<OuterCertificate> {
    let off = -epsilon * h_dt * PI / 4.0;
    let q = Matrix2::new(epsilon * h_pt, off, off, h_dt / h_pt - 2.0 * epsilon);
    let (mu_q, _) = sym2_eigenvalues(&q);
    if !(mu_q > 0.0) {
        return Err(Error::NotPositiveDefinite {
            name: "Q_out",
            min_eigenvalue: mu_q,
        });
    }
    Ok(OuterCertificate {
        epsilon,
        q,
        mu_q,
        delta_max: 4.0 * mu_q * l * l / epsilon.hypot(1.0 / h_pt),
        h_pt,
        h_dt,
    })
}

/// Outer certificate with `ε` at half of its admissible upper bound.
pub fn outer_certificate_default(h_pt: f64, h_dt: f64, l: f64) -> Result<OuterCertificate> {
    outer_certificate(h_pt, h_dt, 0.5 * epsilon_upper(h_pt, h_dt), l)
}

/// Tangential projection of an acceleration-level disturbance at `p`.
pub fn tangential_projection(p: &Vec3, a: &Vec3) -> Vec3 {
    let r_hat = p.normalize();
    a - r_hat * a.dot(&r_hat)
}

/// Small-gain condition `γ_in γ_out < 1`.
pub fn small_gain_check(gamma_in: f64, gamma_out: f64) -> bool {
    gamma_in * gamma_out < 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lemma2_cases() {
        assert_eq!(lemma2_bound(5.0, 0.0), 0.0);
        assert_relative_eq!(lemma2_bound(10.0, 0.1), 6f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(lemma2_bound(10.0, -0.1), 2.449489742783178, epsilon = 1e-15);
    }

    #[test]
    fn eta_cases() {
        // min{20/0.02, 4000/408}
        let i = eta_interval(100.0, 20.0, 0.02);
        assert_relative_eq!(i.upper, 4000.0 / 408.0, epsilon = 1e-12);
        assert_relative_eq!(i.upper, 9.8039, epsilon = 1e-4);
        // K_d → 0: the upper end vanishes like K_d / (2 λ_max).
        assert_relative_eq!(eta_interval(100.0, 1e-12, 0.02).upper, 1e-12 / 0.04, max_relative = 1e-9);
        assert_eq!(lambda_max(&(Mat3::identity() * 0.03)), 0.03);
    }

    #[test]
    fn inner_lyapunov_cases() {
        let j = Mat3::identity() * 0.02;
        assert_eq!(lyapunov_inner(&Quaternion::identity(), &Vec3::zeros(), 100.0, 20.0, 1.0, &j), 0.0);
        // q̃ = identity: only ½ ωᵀJω survives.
        let v = lyapunov_inner(&Quaternion::identity(), &Vec3::x(), 100.0, 20.0, 1e-3, &j);
        assert_relative_eq!(v, 0.01, epsilon = 1e-15);
        // Frozen hand value: q̃ = (cos .1, sin .1 x̂), ω = ŷ, K_p=100, K_d=20, η=1, J=0.02 I.
        let q = Quaternion::from_angle_axis(0.2, &Vec3::x());
        let s = 0.1f64.sin();
        let expected = 200.0 * (1.0 - 0.1f64.cos()) + 0.5 * (80.0 * s * s + 0.02);
        assert_relative_eq!(lyapunov_inner(&q, &Vec3::y(), 100.0, 20.0, 1.0, &j), expected, epsilon = 1e-12);
    }

    #[test]
    fn inner_gain_hand_value() {
        // Q̄ = [[200, 20], [20, 19.96]], D̄ = [140, 0.04], det = 3592.
        let c = inner_gain(100.0, 20.0, 1.0, 0.02).unwrap();
        assert_eq!(c.qbar, Matrix2::new(200.0, 20.0, 20.0, 19.96));
        assert_relative_eq!(c.dbar, Vector2::new(140.0, 0.04), epsilon = 1e-15);
        assert_relative_eq!(c.gamma_in, 2793.6 / 3592.0, epsilon = 1e-12);
        assert_relative_eq!(c.gamma_in, 0.7777, epsilon = 1e-4);

        let c = inner_gain(100.0, 20.0, 1.0, 0.0).unwrap();
        assert_eq!(c.dbar[1], 0.0);

        assert!(matches!(inner_gain(100.0, 20.0, 20.0, 0.02), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn outer_cases() {
        assert_relative_eq!(epsilon_q_bound(10.0, 5.0), 80.0 / (320.0 + 25.0 * PI * PI), epsilon = 1e-15);
        assert_relative_eq!(epsilon_q_bound(10.0, 5.0), 0.14116, epsilon = 1e-5);

        let c = outer_certificate(10.0, 5.0, 0.1, 1.0).unwrap();
        assert_eq!(c.q, c.q.transpose());
        assert!(c.mu_q > 0.0 && c.delta_max > 0.0);

        let tiny = outer_certificate(10.0, 5.0, 1e-9, 1.0).unwrap();
        // ε → 0: μ and Δ_max vanish linearly in ε.
        assert!(tiny.mu_q > 0.0 && tiny.mu_q <= 1e-9 * 10.0);
        assert!(tiny.delta_max <= 4.0 * 1e-9 * 10.0 * 10.0);
        assert_relative_eq!(tiny.q[(1, 1)], 0.5, epsilon = 1e-8);

        assert!(outer_certificate(10.0, 5.0, 0.2, 1.0).is_err());
    }

    #[test]
    fn outer_lyapunov_cases() {
        let p_d = Vec3::z();
        assert_eq!(lyapunov_outer(&p_d, &Vec3::zeros(), &p_d, 10.0, 0.1, 1.0, 1e-6), 0.0);
        let p = Vec3::new(1.0, 0.0, 1.0).normalize();
        let v = lyapunov_outer(&p, &Vec3::zeros(), &p_d, 10.0, 0.1, 1.0, 1e-6);
        assert_relative_eq!(v, 0.5 * (PI / 4.0).powi(2), epsilon = 1e-15);
    }

    #[test]
    fn small_gain_cases() {
        assert!(small_gain_check(0.0, 1e300));
        assert!(small_gain_check(0.5, 1.9));
        assert!(!small_gain_check(0.5, 2.1));
    }

    #[test]
    fn eigenvalue_routes_agree() {
        let cases = [
            Matrix2::new(200.0, 20.0, 20.0, 19.96),
            Matrix2::new(1.0, 0.0, 0.0, 1.0),
            Matrix2::new(1e-9, -1e-9, -1e-9, 0.5),
            Matrix2::new(-3.0, 2.0, 2.0, 1.0),
            Matrix2::new(0.0, 0.0, 0.0, 0.0),
        ];
        for m in cases {
            let a = sym2_eigenvalues(&m);
            let b = sym2_eigenvalues_iterative(&m);
            assert!((a.0 - b.0).abs() <= 1e-12 * (1.0 + a.0.abs()), "{m} {a:?} {b:?}");
            assert!((a.1 - b.1).abs() <= 1e-12 * (1.0 + a.1.abs()), "{m} {a:?} {b:?}");
        }
    }
}
