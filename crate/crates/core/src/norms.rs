//! Lebesgue norms, means, and the Poincare ratio.
//!
//! Finite-`p` norms use the uniform midpoint quadrature of the collocation
//! grid, which is exact for band-limited integrands (products of retained
//! modes stay below the discrete aliasing threshold). `p = infinity` is the
//! grid maximum; no subgrid search is attempted, so suprema of smooth fields
//! converge with the grid rather than being exact.

use serde::Serialize;

use crate::domain::SpectralField;
use crate::error::Error;
use crate::Result;

/// A single measured norm, tagged for reports and CSV columns.
#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub label: String,
    pub p: f64,
    pub value: f64,
}

fn validate_p(p: f64) -> Result<()> {
    if p >= 1.0 || p == f64::INFINITY {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "p",
            reason: format!("Lebesgue exponent must satisfy p >= 1, got {p}"),
        })
    }
}

fn quadrature_lp(values: &[f64], weight: f64, p: f64) -> f64 {
    if p == f64::INFINITY {
        return values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    let sum: f64 = if p == 1.0 {
        values.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        values.iter().map(|v| v * v).sum()
    } else {
        values.iter().map(|v| v.abs().powf(p)).sum()
    };
    (weight * sum).powf(1.0 / p)
}

/// `||f||_{L^p}` by midpoint quadrature (`p = inf`: grid max).
pub fn lp_norm(f: &SpectralField, p: f64) -> Result<f64> {
    validate_p(p)?;
    Ok(quadrature_lp(&f.to_grid(), f.domain().quad_weight(), p))
}

/// `|| |grad f| ||_{L^p}` with the Euclidean magnitude of the sampled
/// gradient.
pub fn grad_lp_norm(f: &SpectralField, p: f64) -> Result<f64> {
    validate_p(p)?;
    let comps = f.gradient();
    let n = comps[0].len();
    let mut mag = vec![0.0; n];
    for comp in &comps {
        for (m, g) in mag.iter_mut().zip(comp) {
            *m += g * g;
        }
    }
    for m in mag.iter_mut() {
        *m = m.sqrt();
    }
    Ok(quadrature_lp(&mag, f.domain().quad_weight(), p))
}

/// Mean value of the field (its `k = 0` cosine coefficient).
pub fn mean(f: &SpectralField) -> f64 {
    f.coeffs()[0]
}

/// Total integral, `mean * |Omega|`.
pub fn mass(f: &SpectralField) -> f64 {
    f.coeffs()[0] * f.domain().volume()
}

/// Returns the field with its `k = 0` coefficient removed.
pub fn mean_zero_project(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    out.coeffs_mut()[0] = 0.0;
    out
}

/// Squared L^2 norm from coefficients (Parseval; exact for the retained
/// band).
pub(crate) fn l2_sq_from_coeffs(f: &SpectralField) -> f64 {
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(flat, &a)| a * a * f.domain().mode_l2sq(flat))
        .sum()
}

/// Squared L^2 norm of the gradient from coefficients:
/// `||grad f||^2 = sum_k lambda_k c_k a_k^2` by integration by parts.
pub(crate) fn grad_l2_sq_from_coeffs(f: &SpectralField) -> f64 {
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(flat, &a)| f.domain().eigenvalues()[flat] * a * a * f.domain().mode_l2sq(flat))
        .sum()
}

/// Rayleigh quotient `||grad f||^2 / ||f||^2` for mean-zero `f`.
///
/// By the Poincare inequality on the box this is at least `lambda1`, with
/// equality exactly on the first cosine mode.
pub fn poincare_ratio(f: &SpectralField) -> Result<f64> {
    let scale = f.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Err(Error::ZeroField);
    }
    if f.coeffs()[0].abs() > 1e-12 * scale {
        return Err(Error::NonzeroMean(f.coeffs()[0]));
    }
    Ok(grad_l2_sq_from_coeffs(f) / l2_sq_from_coeffs(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, Domain, SpectralField};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn interval(n: usize) -> Domain {
        build_domain(1, &[PI], &[n]).unwrap()
    }

    #[test]
    fn constant_norms_are_exact() {
        let d = interval(64);
        let mut f = d.zero_field();
        f.coeffs_mut()[0] = 2.0;
        // |Omega| = pi: ||2||_2 = 2 sqrt(pi), ||2||_1 = 2 pi, ||2||_inf = 2.
        assert_relative_eq!(lp_norm(&f, 2.0).unwrap(), 2.0 * PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(lp_norm(&f, 1.0).unwrap(), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn cosine_mode_l2_matches_closed_form() {
        let l = 2.5;
        let d = build_domain(1, &[l], &[64]).unwrap();
        let f = SpectralField::mode(&d, &[3], 1.0).unwrap();
        assert_relative_eq!(lp_norm(&f, 2.0).unwrap(), (l / 2.0).sqrt(), max_relative = 1e-13);
        // Grid max of a cosine converges to 1 with the grid; at N = 256 the
        // midpoint offset costs about 2e-5.
        let d = build_domain(1, &[l], &[256]).unwrap();
        let f = SpectralField::mode(&d, &[1], 1.0).unwrap();
        assert!((lp_norm(&f, f64::INFINITY).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn quadrature_is_spectrally_accurate_for_smooth_positive_fields() {
        // f = 2 + cos + 0.3 cos(2 .): smooth, positive, Neumann-compatible.
        // Doubling the grid must leave every norm unchanged to 1e-8.
        for p in [1.0, 2.0, 3.5] {
            let mut values = Vec::new();
            for n in [64usize, 128] {
                let d = interval(n);
                let mut f = d.zero_field();
                f.coeffs_mut()[0] = 2.0;
                f.coeffs_mut()[1] = 1.0;
                f.coeffs_mut()[2] = 0.3;
                values.push(lp_norm(&f, p).unwrap());
            }
            assert!(
                (values[0] - values[1]).abs() <= 1e-8,
                "p={p}: {} vs {}",
                values[0],
                values[1]
            );
        }
    }

    #[test]
    fn parseval_l2_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [interval(64), build_domain(2, &[1.0, 1.5], &[16, 16]).unwrap()] {
            let f = SpectralField::random_smooth(&d, &mut rng);
            let by_quad = lp_norm(&f, 2.0).unwrap();
            let by_coeff = l2_sq_from_coeffs(&f).sqrt();
            assert_relative_eq!(by_quad, by_coeff, max_relative = 1e-12);
        }
    }

    #[test]
    fn gradient_l2_parseval_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for d in [interval(64), build_domain(2, &[2.0, 1.0], &[16, 24]).unwrap()] {
            let f = SpectralField::random_smooth(&d, &mut rng);
            let by_quad = grad_lp_norm(&f, 2.0).unwrap();
            let by_coeff = grad_l2_sq_from_coeffs(&f).sqrt();
            assert_relative_eq!(by_quad, by_coeff, max_relative = 1e-12);
        }
    }

    #[test]
    fn poincare_equality_on_first_mode_and_scaling() {
        let d = interval(64);
        let f = SpectralField::mode(&d, &[1], 0.7).unwrap();
        assert_relative_eq!(poincare_ratio(&f).unwrap(), 1.0, max_relative = 1e-12);
        let g = SpectralField::mode(&d, &[5], 0.7).unwrap();
        assert_relative_eq!(poincare_ratio(&g).unwrap(), 25.0, max_relative = 1e-12);
    }

    #[test]
    fn poincare_holds_on_many_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for d in [interval(32), build_domain(2, &[1.0, 3.0], &[12, 16]).unwrap()] {
            for _ in 0..1000 {
                let f = SpectralField::random_smooth(&d, &mut rng);
                let r = poincare_ratio(&f).unwrap();
                assert!(
                    r >= d.lambda1() * (1.0 - 1e-10),
                    "ratio {r} below lambda1 {}",
                    d.lambda1()
                );
            }
        }
    }

    #[test]
    fn poincare_rejects_bad_inputs() {
        let d = interval(32);
        assert!(matches!(poincare_ratio(&d.zero_field()), Err(Error::ZeroField)));
        let mut f = d.zero_field();
        f.coeffs_mut()[0] = 1.0;
        f.coeffs_mut()[1] = 1.0;
        assert!(matches!(poincare_ratio(&f), Err(Error::NonzeroMean(_))));
    }

    #[test]
    fn rejects_p_below_one() {
        let d = interval(32);
        let f = SpectralField::mode(&d, &[1], 1.0).unwrap();
        assert!(lp_norm(&f, 0.5).is_err());
        assert!(grad_lp_norm(&f, 0.0).is_err());
    }

    proptest! {
        // Hoelder monotonicity on the probability-normalized measure:
        // ||f||_p <= |Omega|^(1/p - 1/q) ||f||_q for p <= q.
        #[test]
        fn hoelder_consistency(seed in 0u64..500) {
            let d = interval(32);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = SpectralField::random_smooth(&d, &mut rng);
            let (p, q) = (1.5, 4.0);
            let np = lp_norm(&f, p).unwrap();
            let nq = lp_norm(&f, q).unwrap();
            let vol = d.volume();
            prop_assert!(np <= vol.powf(1.0 / p - 1.0 / q) * nq * (1.0 + 1e-12));
        }

        #[test]
        fn linf_dominates_normalized_l2(seed in 0u64..500) {
            let d = interval(32);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = SpectralField::random_smooth(&d, &mut rng);
            let l2 = lp_norm(&f, 2.0).unwrap();
            let linf = lp_norm(&f, f64::INFINITY).unwrap();
            prop_assert!(l2 <= d.volume().sqrt() * linf * (1.0 + 1e-12));
        }
    }
}
