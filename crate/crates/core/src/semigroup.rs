//! Exact per-mode flows of the linearized system and their decay rates.
//!
//! In the cosine basis the linearization about the constant state `M`
//! decouples mode by mode. Three flows are provided:
//!
//! - heat: `u_t = lap(u)`, multiplier `exp(-lambda_k t)`;
//! - gamma = 0: `u_t = L u` with `L = lap - M lap (I - lap)^{-1}`,
//!   multiplier `exp(-lambda_k (1 - M / (1 + lambda_k)) t)`, the
//!   chemoattractant being slaved through `(I - lap) v = u`;
//! - gamma = 1: the 2 x 2 mode system `(u_k, v_k)' = A_k (u_k, v_k)` with
//!
//!   ```text
//!   A_k = [ -lambda_k      M lambda_k     ]
//!         [  1            -lambda_k - 1   ].
//!   ```
//!
//! `A_k` has trace `-2 lambda_k - 1`, determinant
//! `lambda_k (lambda_k + 1 - M)` and discriminant `1 + 4 M lambda_k >= 1`,
//! so its eigenvalues are always real and separated; the matrix exponential
//! is evaluated in closed form. The slowest mode is `k = 1`, which gives the
//! sharp decay rates
//!
//! ```text
//! mu0 = lambda1 (1 - M / (1 + lambda1)),
//! mu1 = lambda1 - (sqrt(4 lambda1 M + 1) - 1) / 2,
//! ```
//!
//! both positive exactly when `M < 1 + lambda1`. The auxiliary weight
//! `delta0 = (sqrt(4 lambda1 M + 1) - 1) / (2 lambda1)` balances the two
//! characterizations of `mu1`: `lambda1 + 1 - M / delta0 = lambda1 (1 -
//! delta0)`. For gamma = 1 the energy `||u||^2 + M ||grad v||^2` decays
//! pathwise like `exp(-2 mu1 t)` for `M` below threshold.

use serde::Serialize;

use crate::domain::SpectralField;
use crate::error::Error;
use crate::norms;
use crate::Result;

/// Closed-form decay rates of the linearized system.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateTable {
    pub lambda1: f64,
    pub m: f64,
    /// Spectral gap of the gamma = 0 generator.
    pub mu0: f64,
    /// Negative slow eigenvalue of the gamma = 1 mode-1 matrix.
    pub mu1: f64,
    /// Energy weight realizing `mu1`; zero when `m = 0`.
    pub delta0: f64,
    /// Stability threshold `1 + lambda1` for the background mass density.
    pub threshold: f64,
}

/// Builds the rate table for a given smallest eigenvalue and mean `m`.
pub fn rate_table(lambda1: f64, m: f64) -> Result<RateTable> {
    if !(lambda1.is_finite() && lambda1 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda1",
            reason: format!("must be positive, got {lambda1}"),
        });
    }
    if !(m.is_finite() && m >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: format!("mean density must be nonnegative, got {m}"),
        });
    }
    let root = (4.0 * lambda1 * m + 1.0).sqrt();
    Ok(RateTable {
        lambda1,
        m,
        mu0: lambda1 * (1.0 - m / (1.0 + lambda1)),
        mu1: lambda1 - (root - 1.0) / 2.0,
        delta0: (root - 1.0) / (2.0 * lambda1),
        threshold: 1.0 + lambda1,
    })
}

impl RateTable {
    /// Decay rate of mode `lambda` under the gamma = 0 flow.
    pub fn gamma0_mode_rate(&self, lambda: f64) -> f64 {
        lambda * (1.0 - self.m / (1.0 + lambda))
    }

    /// Decay rate of the slow eigenvalue of `A_k` (gamma = 1); equals `mu1`
    /// at `lambda = lambda1`.
    pub fn gamma1_mode_rate(&self, lambda: f64) -> f64 {
        -ModeMatrix::new(lambda, self.m).eigenvalues().0
    }
}

/// The 2 x 2 mode matrix of the gamma = 1 linearization.
#[derive(Debug, Clone, Copy)]
pub struct ModeMatrix {
    pub lambda: f64,
    pub m: f64,
}

impl ModeMatrix {
    pub fn new(lambda: f64, m: f64) -> Self {
        ModeMatrix { lambda, m }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [
            [-self.lambda, self.m * self.lambda],
            [1.0, -self.lambda - 1.0],
        ]
    }

    pub fn trace(&self) -> f64 {
        -2.0 * self.lambda - 1.0
    }

    pub fn det(&self) -> f64 {
        self.lambda * (self.lambda + 1.0 - self.m)
    }

    /// `trace^2 - 4 det = 1 + 4 M lambda`; at least one for `M, lambda >= 0`.
    pub fn discriminant(&self) -> f64 {
        1.0 + 4.0 * self.m * self.lambda
    }

    /// `(slow, fast)` eigenvalues, `slow >= fast`, both real.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_gap = 0.5 * self.discriminant().sqrt();
        let center = 0.5 * self.trace();
        (center + half_gap, center - half_gap)
    }

    /// `exp(t A)` in closed form.
    ///
    /// With `mu = trace / 2` and `N = A - mu I` (so `N^2 = (gap/2)^2 I` by
    /// Cayley-Hamilton), `exp(tA) = s I + d t N` where `s` and `d` are the
    /// symmetric and divided-difference combinations of `exp(t mu_pm)`.
    /// Everything is expressed through `exp(t mu_pm)` directly, so nothing
    /// overflows even for large `t lambda`. The divided difference switches
    /// to its Taylor form when the eigenvalues nearly coincide; the
    /// discriminant keeps them separated by at least one here, so that
    /// branch only guards tiny `t`.
    pub fn exp(&self, t: f64) -> [[f64; 2]; 2] {
        let (mu_p, mu_m) = self.eigenvalues();
        self.func(t, (t * mu_p).exp(), (t * mu_m).exp(), |z| z.exp())
    }

    /// `phi1(tA) e1` and `phi2(tA) e1`: first columns of the integrator
    /// weights `phi1(z) = (e^z - 1)/z`, `phi2(z) = (e^z - 1 - z)/z^2`.
    pub(crate) fn phi_cols(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let (mu_p, mu_m) = self.eigenvalues();
        let p1 = self.func(t, phi1(t * mu_p), phi1(t * mu_m), phi1);
        let p2 = self.func(t, phi2(t * mu_p), phi2(t * mu_m), phi2);
        ([p1[0][0], p1[1][0]], [p2[0][0], p2[1][0]])
    }

    /// Assembles `f(tA) = s I + d t N` from the eigenvalue samples
    /// `fp = f(t mu_plus)`, `fm = f(t mu_minus)`; `f` is re-evaluated at the
    /// midpoint for the confluent fallback.
    fn func(&self, t: f64, fp: f64, fm: f64, f: impl Fn(f64) -> f64) -> [[f64; 2]; 2] {
        let (mu_p, mu_m) = self.eigenvalues();
        let gap = mu_p - mu_m;
        let s = 0.5 * (fp + fm);
        let d = if (t * gap).abs() > 1e-8 {
            (fp - fm) / (t * gap)
        } else {
            // Confluent limit: divided difference -> f'(t mu); a centered
            // difference at spacing 1e-6 keeps this branch generic in f.
            let z = 0.5 * t * (mu_p + mu_m);
            (f(z + 5e-7) - f(z - 5e-7)) / 1e-6
        };
        let mu = 0.5 * self.trace();
        let a = self.matrix();
        [
            [s + d * t * (a[0][0] - mu), d * t * a[0][1]],
            [d * t * a[1][0], s + d * t * (a[1][1] - mu)],
        ]
    }
}

/// `phi1(z) = (e^z - 1) / z`, continuous at zero.
pub(crate) fn phi1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// `phi2(z) = (e^z - 1 - z) / z^2`, continuous at zero.
pub(crate) fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        // Horner form of 1/2 + z/6 + z^2/24 + z^3/120 + z^4/720 + z^5/5040.
        0.5 + z * (1.0 / 6.0
            + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z * (1.0 / 720.0 + z / 5040.0))))
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

fn validate_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "t",
            reason: format!("semigroups run forward in time, got t = {t}"),
        })
    }
}

fn validate_m(m: f64) -> Result<()> {
    if m.is_finite() && m >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "m",
            reason: format!("mean density must be nonnegative, got {m}"),
        })
    }
}

/// Heat flow `exp(t lap) f`.
pub fn heat_apply(f: &SpectralField, t: f64) -> Result<SpectralField> {
    validate_time(t)?;
    let mut out = f.clone();
    out.scale_modes(|lambda| (-lambda * t).exp());
    Ok(out)
}

/// Gamma = 0 linearized flow `exp(t L) u` with
/// `L = lap - m lap (I - lap)^{-1}`.
pub fn semigroup_gamma0_apply(u: &SpectralField, m: f64, t: f64) -> Result<SpectralField> {
    validate_time(t)?;
    validate_m(m)?;
    let mut out = u.clone();
    out.scale_modes(|lambda| (-lambda * (1.0 - m / (1.0 + lambda)) * t).exp());
    Ok(out)
}

/// Mean-zero pair state `(u, v)` for the gamma = 1 linearized flow.
#[derive(Debug, Clone)]
pub struct LinearState {
    u: SpectralField,
    v: SpectralField,
}

impl LinearState {
    pub fn new(u: SpectralField, v: SpectralField) -> Result<Self> {
        u.same_domain(&v)?;
        for f in [&u, &v] {
            let scale = f.coeffs().iter().fold(0.0f64, |mx, c| mx.max(c.abs()));
            if f.coeffs()[0].abs() > 1e-12 * scale.max(1e-300) {
                return Err(Error::NonzeroMean(f.coeffs()[0]));
            }
        }
        Ok(LinearState { u, v })
    }

    /// State with `v` slaved through the Helmholtz solve `(I - lap) v = u`.
    pub fn slaved(u: SpectralField) -> Result<Self> {
        let v = u.inverse_helmholtz();
        LinearState::new(u, v)
    }

    pub fn u(&self) -> &SpectralField {
        &self.u
    }

    pub fn v(&self) -> &SpectralField {
        &self.v
    }

    /// Lyapunov energy `||u||^2 + m ||grad v||^2` (coefficient space, exact
    /// for the retained band).
    pub fn energy(&self, m: f64) -> f64 {
        norms::l2_sq_from_coeffs(&self.u) + m * norms::grad_l2_sq_from_coeffs(&self.v)
    }
}

/// Gamma = 1 linearized flow: applies `exp(t A_k)` to every mode pair.
pub fn semigroup_gamma1_apply(state: &LinearState, m: f64, t: f64) -> Result<LinearState> {
    validate_time(t)?;
    validate_m(m)?;
    let mut u = state.u.clone();
    let mut v = state.v.clone();
    let eigs = u.domain().eigenvalues().to_vec();
    {
        let (uc, vc) = (u.coeffs_mut(), v.coeffs_mut());
        for (k, &lambda) in eigs.iter().enumerate() {
            let e = ModeMatrix::new(lambda, m).exp(t);
            let (a, b) = (uc[k], vc[k]);
            uc[k] = e[0][0] * a + e[0][1] * b;
            vc[k] = e[1][0] * a + e[1][1] * b;
        }
    }
    LinearState::new(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, Domain, SpectralField};
    use crate::norms::lp_norm;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn interval(n: usize) -> Domain {
        build_domain(1, &[PI], &[n]).unwrap()
    }

    /// RK4 integration of a linear coefficient system `w' = F(w)`.
    fn rk4<F: Fn(&[f64]) -> Vec<f64>>(w0: &[f64], rhs: F, t: f64, dt: f64) -> Vec<f64> {
        let mut w = w0.to_vec();
        let steps = (t / dt).round() as usize;
        let h = t / steps as f64;
        for _ in 0..steps {
            let k1 = rhs(&w);
            let w2: Vec<f64> = w.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
            let k2 = rhs(&w2);
            let w3: Vec<f64> = w.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
            let k3 = rhs(&w3);
            let w4: Vec<f64> = w.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
            let k4 = rhs(&w4);
            for i in 0..w.len() {
                w[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        w
    }

    #[test]
    fn rate_table_frozen_examples() {
        let r = rate_table(1.0, 1.0).unwrap();
        assert_relative_eq!(r.mu0, 0.5, max_relative = 1e-15);
        // mu1 = 1 - (sqrt(5) - 1)/2 = (3 - sqrt(5))/2.
        assert_relative_eq!(r.mu1, 0.38196601125010515, max_relative = 1e-14);
        assert_relative_eq!(r.delta0, 0.6180339887498949, max_relative = 1e-14);
        assert_eq!(r.threshold, 2.0);

        let r0 = rate_table(1.0, 0.0).unwrap();
        assert_eq!(r0.mu0, 1.0);
        assert_eq!(r0.mu1, 1.0);
        assert_eq!(r0.delta0, 0.0);

        // At the threshold both rates vanish exactly:
        // sqrt(4 l (1+l) + 1) = 2l + 1.
        let rt = rate_table(1.0, 2.0).unwrap();
        assert_eq!(rt.mu0, 0.0);
        assert_eq!(rt.mu1, 0.0);
    }

    #[test]
    fn delta0_balances_the_two_rate_formulas() {
        for (l1, m) in [(1.0, 1.0), (0.25, 0.3), (PI * PI, 7.0), (1.0, 1.999)] {
            let r = rate_table(l1, m).unwrap();
            let lhs = l1 + 1.0 - m / r.delta0;
            let rhs = l1 * (1.0 - r.delta0);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(lhs, r.mu1, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn rate_table_rejects_bad_parameters() {
        assert!(rate_table(0.0, 1.0).is_err());
        assert!(rate_table(1.0, -0.5).is_err());
        assert!(rate_table(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn threshold_sharpness_just_above() {
        let l1 = 1.0;
        let m = (1.0 + l1) * (1.0 + 1e-3);
        let r = rate_table(l1, m).unwrap();
        // gamma = 0: the mode-1 multiplier rate turns negative (growth).
        assert!(r.gamma0_mode_rate(l1) < 0.0);
        // gamma = 1: the slow eigenvalue of A_1 turns positive.
        let (slow, _) = ModeMatrix::new(l1, m).eigenvalues();
        assert!(slow > 0.0);
        assert!(r.mu1 < 0.0);
    }

    #[test]
    fn spectral_gap_is_attained_at_mode_one() {
        // Brute force over 1000 analytic modes of the interval (0, pi).
        let r = rate_table(1.0, 1.0).unwrap();
        let g0 = (1..=1000)
            .map(|k| r.gamma0_mode_rate((k * k) as f64))
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(g0, r.mu0, max_relative = 1e-14);
        let g1 = (1..=1000)
            .map(|k| r.gamma1_mode_rate((k * k) as f64))
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(g1, r.mu1, max_relative = 1e-14);
    }

    #[test]
    fn mode_matrix_invariants() {
        for (lambda, m) in [(1.0, 1.0), (4.0, 0.5), (100.0, 3.0), (2.0, 0.0)] {
            let mm = ModeMatrix::new(lambda, m);
            let a = mm.matrix();
            assert_relative_eq!(a[0][0] + a[1][1], mm.trace(), max_relative = 1e-15);
            assert_relative_eq!(
                a[0][0] * a[1][1] - a[0][1] * a[1][0],
                mm.det(),
                max_relative = 1e-13,
                epsilon = 1e-13
            );
            assert!(mm.discriminant() >= 1.0);
            let (sp, sm) = mm.eigenvalues();
            assert_relative_eq!(sp + sm, mm.trace(), max_relative = 1e-13);
            assert_relative_eq!(sp * sm, mm.det(), max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn slow_eigenvalue_frozen_example() {
        let (slow, fast) = ModeMatrix::new(1.0, 1.0).eigenvalues();
        assert_relative_eq!(slow, -0.38196601125010515, max_relative = 1e-14);
        assert_relative_eq!(fast, -2.618033988749895, max_relative = 1e-14);
    }

    #[test]
    fn matrix_exponential_frozen_reference() {
        // exp(0.7 A) for lambda = 1, m = 1, cross-checked offline with a
        // Pade scaling-and-squaring implementation.
        let e = ModeMatrix::new(1.0, 1.0).exp(0.7);
        let expected = [
            [0.5980588825263968, 0.27073946404659577],
            [0.2707394640465959, 0.32731941847980095],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(e[i][j], expected[i][j], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn matrix_exponential_matches_rk4() {
        for (lambda, m) in [(1.0, 1.0), (4.0, 1.7), (0.25, 0.0), (9.0, 2.5)] {
            let mm = ModeMatrix::new(lambda, m);
            let a = mm.matrix();
            let rhs = |w: &[f64]| {
                vec![
                    a[0][0] * w[0] + a[0][1] * w[1],
                    a[1][0] * w[0] + a[1][1] * w[1],
                ]
            };
            let e = mm.exp(1.0);
            for (col, w0) in [[1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
                let w = rk4(w0, rhs, 1.0, 1e-5);
                assert!(
                    (e[0][col] - w[0]).abs() < 1e-8 && (e[1][col] - w[1]).abs() < 1e-8,
                    "lambda={lambda} m={m} col={col}: {:?} vs {:?}",
                    [e[0][col], e[1][col]],
                    w
                );
            }
        }
    }

    #[test]
    fn matrix_exponential_large_argument_stays_finite() {
        let e = ModeMatrix::new(80000.0, 1.0).exp(20.0);
        for row in e {
            for x in row {
                assert!(x.is_finite());
            }
        }
    }

    #[test]
    fn phi_functions_cross_their_series_boundary_smoothly() {
        for z in [-1e-2f64, 1e-2] {
            let direct = (z.exp_m1() - z) / (z * z);
            assert_relative_eq!(phi2(z), direct, max_relative = 1e-10);
        }
        assert_relative_eq!(phi1(-0.5), 0.7869386805747332, max_relative = 1e-14);
        assert_eq!(phi1(0.0), 1.0);
        assert_relative_eq!(phi2(0.0), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn heat_identity_and_single_mode_decay() {
        let d = interval(64);
        let f = SpectralField::mode(&d, &[3], 2.0).unwrap();
        let same = heat_apply(&f, 0.0).unwrap();
        assert_eq!(same.coeffs(), f.coeffs());
        let g = heat_apply(&f, 0.5).unwrap();
        assert_relative_eq!(g.coeffs()[3], 2.0 * (-4.5f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn heat_l2_contraction_on_mean_zero_fields() {
        let d = interval(64);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let f = SpectralField::random_smooth(&d, &mut rng);
            let n0 = lp_norm(&f, 2.0).unwrap();
            for t in [0.1, 1.0, 3.0] {
                let nt = lp_norm(&heat_apply(&f, t).unwrap(), 2.0).unwrap();
                assert!(nt <= (-t).exp() * n0 * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn semigroup_property_all_flows() {
        let d = interval(32);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = SpectralField::random_smooth(&d, &mut rng);
        let (s, t) = (0.3, 0.9);

        let one = heat_apply(&heat_apply(&f, s).unwrap(), t).unwrap();
        let two = heat_apply(&f, s + t).unwrap();
        for (a, b) in one.coeffs().iter().zip(two.coeffs()) {
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-15);
        }

        let one = semigroup_gamma0_apply(&semigroup_gamma0_apply(&f, 1.0, s).unwrap(), 1.0, t).unwrap();
        let two = semigroup_gamma0_apply(&f, 1.0, s + t).unwrap();
        for (a, b) in one.coeffs().iter().zip(two.coeffs()) {
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-15);
        }

        let g = SpectralField::random_smooth(&d, &mut rng);
        let st = LinearState::new(f, g).unwrap();
        let one = semigroup_gamma1_apply(&semigroup_gamma1_apply(&st, 1.0, s).unwrap(), 1.0, t).unwrap();
        let two = semigroup_gamma1_apply(&st, 1.0, s + t).unwrap();
        for (a, b) in one.u().coeffs().iter().zip(two.u().coeffs()) {
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-15);
        }
        for (a, b) in one.v().coeffs().iter().zip(two.v().coeffs()) {
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn gamma0_reduces_to_heat_at_m_zero() {
        let d = interval(32);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = SpectralField::random_smooth(&d, &mut rng);
        let a = semigroup_gamma0_apply(&f, 0.0, 0.7).unwrap();
        let b = heat_apply(&f, 0.7).unwrap();
        assert_eq!(a.coeffs(), b.coeffs());
    }

    #[test]
    fn gamma0_mode_one_frozen_factor() {
        // lambda1 = 1, m = 1: rate 1 - 1/2 = 1/2, factor e^{-0.5} at t = 1.
        let d = interval(64);
        let f = SpectralField::mode(&d, &[1], 1.0).unwrap();
        let g = semigroup_gamma0_apply(&f, 1.0, 1.0).unwrap();
        assert_relative_eq!(g.coeffs()[1], 0.6065306597126334, max_relative = 1e-14);
    }

    #[test]
    fn gamma0_matches_rk4_of_the_slaved_system() {
        // u' = lap u - m lap (I - lap)^{-1} u integrated mode-wise.
        let d = interval(32);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let f = SpectralField::random_smooth(&d, &mut rng);
        let m = 1.3;
        let eigs = d.eigenvalues().to_vec();
        let rhs = |w: &[f64]| {
            w.iter()
                .zip(&eigs)
                .map(|(&u, &l)| -l * u + m * l * (u / (1.0 + l)))
                .collect::<Vec<_>>()
        };
        let w = rk4(f.coeffs(), rhs, 0.5, 1e-4);
        let g = semigroup_gamma0_apply(&f, m, 0.5).unwrap();
        for (a, b) in g.coeffs().iter().zip(&w) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn gamma1_decoupled_closed_form_at_m_zero() {
        // With m = 0, mode 1 of (0, pi) from (1, 0): u = e^{-t},
        // v = e^{-t} - e^{-2t}.
        let d = interval(32);
        let u0 = SpectralField::mode(&d, &[1], 1.0).unwrap();
        let st = LinearState::new(u0, d.zero_field()).unwrap();
        let out = semigroup_gamma1_apply(&st, 0.0, 1.0).unwrap();
        assert_relative_eq!(out.u().coeffs()[1], (-1.0f64).exp(), max_relative = 1e-13);
        assert_relative_eq!(out.v().coeffs()[1], 0.23254415793482963, max_relative = 1e-12);
    }

    #[test]
    fn gamma1_matches_rk4_on_a_random_state() {
        let d = interval(16);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let u = SpectralField::random_smooth(&d, &mut rng);
        let v = SpectralField::random_smooth(&d, &mut rng);
        let st = LinearState::new(u.clone(), v.clone()).unwrap();
        let m = 1.0;
        let eigs = d.eigenvalues().to_vec();
        let n = eigs.len();
        // Stack (u, v) and integrate the block-diagonal system.
        let mut w0 = u.coeffs().to_vec();
        w0.extend_from_slice(v.coeffs());
        let rhs = |w: &[f64]| {
            let mut out = vec![0.0; 2 * n];
            for k in 0..n {
                let l = eigs[k];
                out[k] = -l * w[k] + m * l * w[n + k];
                out[n + k] = w[k] - (l + 1.0) * w[n + k];
            }
            out
        };
        let w = rk4(&w0, rhs, 1.0, 1e-5);
        let out = semigroup_gamma1_apply(&st, m, 1.0).unwrap();
        for k in 0..n {
            assert!((out.u().coeffs()[k] - w[k]).abs() < 1e-8);
            assert!((out.v().coeffs()[k] - w[n + k]).abs() < 1e-8);
        }
    }

    #[test]
    fn mean_stays_exactly_zero() {
        let d = interval(32);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let f = SpectralField::random_smooth(&d, &mut rng);
        let g = SpectralField::random_smooth(&d, &mut rng);
        let st = LinearState::new(f.clone(), g).unwrap();
        let out = semigroup_gamma1_apply(&st, 1.5, 2.0).unwrap();
        assert_eq!(out.u().coeffs()[0], 0.0);
        assert_eq!(out.v().coeffs()[0], 0.0);
        let h = semigroup_gamma0_apply(&f, 1.5, 2.0).unwrap();
        assert_eq!(h.coeffs()[0], 0.0);
    }

    #[test]
    fn energy_decays_pathwise_below_threshold() {
        let d = interval(32);
        let r = |m: f64| rate_table(d.lambda1(), m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for m in [0.1, 1.0, 0.99 * 2.0] {
            let mu1 = r(m).mu1;
            for _ in 0..50 {
                let u = SpectralField::random_smooth(&d, &mut rng);
                let v = SpectralField::random_smooth(&d, &mut rng);
                let st = LinearState::new(u, v).unwrap();
                let e0 = st.energy(m);
                for t in [0.05, 0.3, 1.0, 4.0] {
                    let e = semigroup_gamma1_apply(&st, m, t).unwrap().energy(m);
                    assert!(
                        e <= (-2.0 * mu1 * t).exp() * e0 * (1.0 + 1e-10),
                        "m={m} t={t}: {e} vs {}",
                        (-2.0 * mu1 * t).exp() * e0
                    );
                }
            }
        }
    }

    #[test]
    fn energy_decay_is_sharp_on_the_slow_mode_one_eigenvector() {
        let d = interval(32);
        let m = 1.0;
        let mm = ModeMatrix::new(d.lambda1(), m);
        let (slow, _) = mm.eigenvalues();
        // Eigenvector (m lambda, lambda + slow) of A_1.
        let u0 = SpectralField::mode(&d, &[1], m * d.lambda1()).unwrap();
        let v0 = SpectralField::mode(&d, &[1], d.lambda1() + slow).unwrap();
        let st = LinearState::new(u0, v0).unwrap();
        let mu1 = rate_table(d.lambda1(), m).unwrap().mu1;
        let e0 = st.energy(m);
        for t in [0.5, 2.0, 5.0] {
            let e = semigroup_gamma1_apply(&st, m, t).unwrap().energy(m);
            assert_relative_eq!(e, (-2.0 * mu1 * t).exp() * e0, max_relative = 1e-10);
        }
    }

    #[test]
    fn rejects_negative_time_and_mass() {
        let d = interval(32);
        let f = SpectralField::mode(&d, &[1], 1.0).unwrap();
        assert!(heat_apply(&f, -1.0).is_err());
        assert!(semigroup_gamma0_apply(&f, -1.0, 1.0).is_err());
        let st = LinearState::slaved(f).unwrap();
        assert!(semigroup_gamma1_apply(&st, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn linear_state_rejects_nonzero_mean() {
        let d = interval(32);
        let mut f = d.zero_field();
        f.coeffs_mut()[0] = 1.0;
        assert!(LinearState::new(f, d.zero_field()).is_err());
    }
}
