//! Pseudo-spectral IMEX time stepping for the reduced system
//!
//! ```text
//! u_t = lap u - M lap v - div(u grad v),
//! gamma v_t = lap v - v + u,
//! ```
//!
//! with `u = rho - M` and `v = c - M` both mean-zero. The linear part is
//! diagonal per cosine mode (a scalar rate for gamma = 0 after slaving
//! `v = (I - lap)^{-1} u`, a 2x2 block for gamma = 1) and is propagated
//! exactly by the cached matrix exponential of each mode. Only the flux
//! nonlinearity `-div(u grad v)` is treated explicitly, with the
//! exponential two-step scheme
//!
//! ```text
//! u_{n+1} = e^{hA} u_n + h phi1(hA) N_n + (h^2/h_prev) phi2(hA) (N_n - N_{n-1}),
//! ```
//!
//! which is exact when `N = 0` and second order otherwise; the first step
//! uses the exponential Euler rule (drop the difference term). The ratio
//! `h/h_prev` keeps second order across step-size changes.
//!
//! The flux is formed in physical space at the midpoint grid: `grad v` is
//! synthesized as sine series, multiplied by `u`, analyzed back in the sine
//! basis along the differentiation axis, and differentiated there (sine
//! mode k maps to cosine mode k with factor k pi / L). The k = 0 output
//! coefficient is exactly zero by construction, so the solver conserves
//! mass to the last bit. Quadratic products are dealiased by the 2/3 rule,
//! which under midpoint collocation removes every aliased image of the
//! retained band.
//!
//! Step control is defensive, not adaptive: the explicit transport term is
//! kept under a CFL bound (`dt ||grad v||_inf / h <= cfl_safety`) by
//! halving `dt`, and a run is flagged, never resolved, when `||rho||_inf`
//! crosses the blow-up threshold or `dt` collapses below `dt_min`.

use serde::Serialize;

use crate::domain::{Basis, Domain, SpectralField};
use crate::error::Error;
use crate::norms::{grad_lp_norm, lp_norm};
use crate::semigroup::{phi1, phi2, ModeMatrix};
use crate::Result;

/// Dealiasing rule applied to quadratic products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dealias {
    /// Keep modes `k < floor(2N/3)` per axis before and after products.
    TwoThirds,
    /// No truncation (testing only; products then alias).
    None,
}

/// Time stepping scheme for the explicit nonlinear term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    /// Exponential two-step (Adams-Bashforth 2 in the phi calculus).
    ImexCnab2,
    /// Exponential Euler (first order; used for bootstrap and testing).
    ImexEuler,
}

/// Solver parameters. `blowup_linf_threshold = None` means the default
/// `1e6 * ||rho(0)||_inf`, resolved by [`simulate`] from the initial state.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub dt0: f64,
    pub dt_min: f64,
    pub t_end: f64,
    pub output_dt: f64,
    pub dealias: Dealias,
    pub scheme: Scheme,
    pub blowup_linf_threshold: Option<f64>,
    pub cfl_safety: f64,
    /// Freeze the nonlinear term at zero (diagnostic switch; the run then
    /// reproduces the exact linear semigroup).
    pub linear_only: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt0: 1e-3,
            dt_min: 1e-10,
            t_end: 10.0,
            output_dt: 0.05,
            dealias: Dealias::TwoThirds,
            scheme: Scheme::ImexCnab2,
            blowup_linf_threshold: None,
            cfl_safety: 0.5,
            linear_only: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool); 5] = [
            ("dt0", self.dt0, self.dt0.is_finite() && self.dt0 > 0.0),
            ("dt_min", self.dt_min, self.dt_min.is_finite() && self.dt_min > 0.0),
            ("t_end", self.t_end, self.t_end.is_finite() && self.t_end > 0.0),
            ("output_dt", self.output_dt, self.output_dt.is_finite() && self.output_dt > 0.0),
            ("cfl_safety", self.cfl_safety, self.cfl_safety.is_finite() && self.cfl_safety > 0.0),
        ];
        for (name, value, ok) in checks {
            if !ok {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {value}"),
                });
            }
        }
        if self.dt_min > self.dt0 {
            return Err(Error::InvalidParameter {
                name: "dt_min",
                reason: "must not exceed dt0".into(),
            });
        }
        if let Some(thr) = self.blowup_linf_threshold {
            if !(thr.is_finite() && thr > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "blowup_linf_threshold",
                    reason: format!("must be positive and finite, got {thr}"),
                });
            }
        }
        Ok(())
    }
}

/// Why a step or run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    Ok,
    DtCollapsed,
    LinfExceeded,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::DtCollapsed => "dt_collapsed",
            RunStatus::LinfExceeded => "linf_exceeded",
        }
    }
}

/// Diagnostics from a single step attempt.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepOutcome {
    pub status: RunStatus,
    /// Step size actually taken (0 when the step was refused).
    pub dt_used: f64,
    /// `max_j |rho(x_j)|` before the step.
    pub max_linf: f64,
    /// `min_j rho(x_j)` before the step (positivity monitor).
    pub min_rho: f64,
    /// `dt ||grad v||_inf / h_grid` after any halving.
    pub nonlinear_cfl: f64,
}

/// Cached per-mode propagator tables for one step size.
#[derive(Debug, Clone)]
enum PropCache {
    /// Per mode: `(e^{l h}, h phi1(l h), h phi2(l h))`.
    Gamma0(f64, Vec<[f64; 3]>),
    /// Per mode: `(e^{h A}, h phi1(h A) e1, h phi2(h A) e1)`.
    Gamma1(f64, Vec<([f64; 4], [f64; 2], [f64; 2])>),
}

/// Instantaneous solver state. `u` is mean-zero by construction and stays
/// so exactly; for gamma = 0 the field `v` is always the slaved
/// `(I - lap)^{-1} u`.
#[derive(Debug, Clone)]
pub struct SimState {
    u: SpectralField,
    v: SpectralField,
    m: f64,
    gamma: u8,
    t: f64,
    dt: f64,
    /// Previous nonlinear coefficients and the step that produced them.
    prev: Option<(Vec<f64>, f64)>,
    cache: Option<PropCache>,
}

fn validate_m(m: f64) -> Result<()> {
    if !(m.is_finite() && m >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: format!("mass level must be finite and nonnegative, got {m}"),
        });
    }
    Ok(())
}

fn require_mean_zero(f: &SpectralField) -> Result<()> {
    let scale = f.coeffs().iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    if f.coeffs()[0].abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::NonzeroMean(f.coeffs()[0]));
    }
    Ok(())
}

impl SimState {
    /// Parabolic-elliptic state (`gamma = 0`): `v` is slaved to `u`.
    pub fn gamma0(u: SpectralField, m: f64) -> Result<Self> {
        validate_m(m)?;
        require_mean_zero(&u)?;
        let v = u.inverse_helmholtz();
        Ok(SimState { u, v, m, gamma: 0, t: 0.0, dt: 0.0, prev: None, cache: None })
    }

    /// Fully parabolic state (`gamma = 1`). The mean of `v` relaxes
    /// independently and never feeds back, so it is projected out.
    pub fn gamma1(u: SpectralField, v: SpectralField, m: f64) -> Result<Self> {
        validate_m(m)?;
        require_mean_zero(&u)?;
        u.same_domain(&v)?;
        let mut v = v;
        v.coeffs_mut()[0] = 0.0;
        Ok(SimState { u, v, m, gamma: 1, t: 0.0, dt: 0.0, prev: None, cache: None })
    }

    /// Splits a density `rho` into its exact mean `M` and the mean-zero
    /// perturbation `u = rho - M`.
    pub fn from_density(gamma: u8, rho: &SpectralField, v0: Option<SpectralField>) -> Result<Self> {
        let m = rho.coeffs()[0];
        let mut u = rho.clone();
        u.coeffs_mut()[0] = 0.0;
        match gamma {
            0 => SimState::gamma0(u, m),
            1 => {
                let v = v0.unwrap_or_else(|| u.domain().zero_field());
                SimState::gamma1(u, v, m)
            }
            _ => Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("relaxation flag must be 0 or 1, got {gamma}"),
            }),
        }
    }

    pub fn u(&self) -> &SpectralField {
        &self.u
    }

    pub fn v(&self) -> &SpectralField {
        &self.v
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn gamma(&self) -> u8 {
        self.gamma
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Current step size (0 before the first step; set from `dt0` then).
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `max_j |rho(x_j)| = max_j |u(x_j) + M|` on the collocation grid.
    pub fn rho_linf(&self) -> f64 {
        self.u
            .to_grid()
            .iter()
            .fold(0.0f64, |a, &x| a.max((x + self.m).abs()))
    }
}

/// Per-axis dealias cutoffs: keep `k < 2n/3` (trivial axes untouched).
fn cutoffs(domain: &Domain, dealias: Dealias) -> [usize; 2] {
    let mut ks = [usize::MAX; 2];
    if dealias == Dealias::TwoThirds {
        for (axis, &n) in domain.grid().iter().enumerate() {
            ks[axis] = 2 * n / 3;
        }
    }
    ks
}

fn mask(coeffs: &mut [f64], domain: &Domain, ks: [usize; 2]) {
    if ks == [usize::MAX; 2] {
        return;
    }
    for (flat, c) in coeffs.iter_mut().enumerate() {
        let idx = domain.multi_index(flat);
        if idx[0] >= ks[0] || idx[1] >= ks[1] {
            *c = 0.0;
        }
    }
}

struct NlDiag {
    max_linf: f64,
    min_rho: f64,
    max_gradv: f64,
}

/// Dealiased flux nonlinearity `-div(u grad v)` plus grid diagnostics.
fn nonlinear_flux(
    u: &SpectralField,
    v: &SpectralField,
    dealias: Dealias,
    m: f64,
) -> Result<(Vec<f64>, NlDiag)> {
    u.same_domain(v)?;
    let domain = u.domain();
    let dim = domain.dim();
    let nm = domain.n_modes();
    let ks = cutoffs(domain, dealias);

    let mut du = u.coeffs().to_vec();
    let mut dv = v.coeffs().to_vec();
    mask(&mut du, domain, ks);
    mask(&mut dv, domain, ks);

    let u_grid = domain.synth(&du, [Basis::Cos, Basis::Cos]);
    let mut max_linf = 0.0f64;
    let mut min_rho = f64::INFINITY;
    for &x in &u_grid {
        let rho = x + m;
        max_linf = max_linf.max(rho.abs());
        min_rho = min_rho.min(rho);
    }

    // Sine-basis gradient components of v on the grid.
    let mut grad_grids = Vec::with_capacity(dim);
    for axis in 0..dim {
        let mut g = vec![0.0; nm];
        for (flat, slot) in g.iter_mut().enumerate() {
            let k = domain.multi_index(flat)[axis];
            if k > 0 {
                *slot = -dv[flat] * domain.wavenumber(axis, k);
            }
        }
        let mut bases = [Basis::Cos, Basis::Cos];
        bases[axis] = Basis::Sin;
        grad_grids.push(domain.synth(&g, bases));
    }
    let mut max_gradv = 0.0f64;
    for j in 0..u_grid.len() {
        let mut s = 0.0;
        for g in &grad_grids {
            s += g[j] * g[j];
        }
        max_gradv = max_gradv.max(s);
    }
    let max_gradv = max_gradv.sqrt();

    // Flux divergence, analyzed axis by axis in the sine basis; the sine
    // series has no k = 0 slot, so the output mean vanishes identically.
    let mut out = vec![0.0; nm];
    for (axis, grad) in grad_grids.iter().enumerate() {
        let flux: Vec<f64> = u_grid.iter().zip(grad).map(|(a, b)| a * b).collect();
        let mut bases = [Basis::Cos, Basis::Cos];
        bases[axis] = Basis::Sin;
        let mut fc = domain.analyze(&flux, bases);
        mask(&mut fc, domain, ks);
        for (flat, c) in fc.iter().enumerate() {
            let k = domain.multi_index(flat)[axis];
            if k > 0 {
                out[flat] -= c * domain.wavenumber(axis, k);
            }
        }
    }
    Ok((out, NlDiag { max_linf, min_rho, max_gradv }))
}

/// The nonlinear term `-div(u grad v)` as a spectral field. Its mean mode
/// is exactly zero.
pub fn nonlinear_term(u: &SpectralField, v: &SpectralField, dealias: Dealias) -> Result<SpectralField> {
    let (coeffs, _) = nonlinear_flux(u, v, dealias, 0.0)?;
    SpectralField::from_coeffs(u.domain(), coeffs)
}

fn build_cache(state: &SimState, h: f64) -> PropCache {
    let domain = state.u.domain();
    let m = state.m;
    if state.gamma == 0 {
        let rows = domain
            .eigenvalues()
            .iter()
            .map(|&lambda| {
                let l = -lambda * (1.0 - m / (1.0 + lambda));
                let z = l * h;
                [z.exp(), h * phi1(z), h * phi2(z)]
            })
            .collect();
        PropCache::Gamma0(h, rows)
    } else {
        let rows = domain
            .eigenvalues()
            .iter()
            .map(|&lambda| {
                let mm = ModeMatrix::new(lambda, m);
                let e = mm.exp(h);
                let (c1, c2) = mm.phi_cols(h);
                (
                    [e[0][0], e[0][1], e[1][0], e[1][1]],
                    [h * c1[0], h * c1[1]],
                    [h * c2[0], h * c2[1]],
                )
            })
            .collect();
        PropCache::Gamma1(h, rows)
    }
}

/// Attempts one IMEX step. On success advances `state` in place; when the
/// blow-up monitor trips or `dt` collapses the state is left untouched and
/// the outcome reports why.
pub fn step(state: &mut SimState, config: &SolverConfig) -> Result<StepOutcome> {
    config.validate()?;
    if state.dt == 0.0 {
        state.dt = config.dt0;
    }
    let threshold = config.blowup_linf_threshold.unwrap_or(f64::INFINITY);

    let (n_coeffs, diag) = if config.linear_only {
        let nm = state.u.domain().n_modes();
        let grid = state.u.to_grid();
        let mut max_linf = 0.0f64;
        let mut min_rho = f64::INFINITY;
        for &x in &grid {
            max_linf = max_linf.max((x + state.m).abs());
            min_rho = min_rho.min(x + state.m);
        }
        (vec![0.0; nm], NlDiag { max_linf, min_rho, max_gradv: 0.0 })
    } else {
        nonlinear_flux(&state.u, &state.v, config.dealias, state.m)?
    };

    if diag.max_linf > threshold {
        return Ok(StepOutcome {
            status: RunStatus::LinfExceeded,
            dt_used: 0.0,
            max_linf: diag.max_linf,
            min_rho: diag.min_rho,
            nonlinear_cfl: f64::NAN,
        });
    }

    // Transport CFL control: halve dt until the explicit term is safe.
    let h_grid = state.u.domain().min_spacing();
    while state.dt * diag.max_gradv / h_grid > config.cfl_safety {
        state.dt *= 0.5;
        if state.dt < config.dt_min {
            return Ok(StepOutcome {
                status: RunStatus::DtCollapsed,
                dt_used: 0.0,
                max_linf: diag.max_linf,
                min_rho: diag.min_rho,
                nonlinear_cfl: state.dt * diag.max_gradv / h_grid,
            });
        }
    }

    // Clip the final step to land exactly on t_end.
    let h = if config.t_end > state.t {
        state.dt.min(config.t_end - state.t)
    } else {
        state.dt
    };

    let rebuild = match &state.cache {
        Some(PropCache::Gamma0(ch, _)) | Some(PropCache::Gamma1(ch, _)) => *ch != h,
        None => true,
    };
    if rebuild {
        let cache = build_cache(state, h);
        state.cache = Some(cache);
    }

    let use_ab2 = config.scheme == Scheme::ImexCnab2 && state.prev.is_some();
    match state.cache.as_ref().expect("cache built above") {
        PropCache::Gamma0(_, rows) => {
            let uc = state.u.coeffs_mut();
            for (k, row) in rows.iter().enumerate() {
                let [e, a1, a2] = *row;
                let mut val = e * uc[k] + a1 * n_coeffs[k];
                if use_ab2 {
                    let (np, hp) = state.prev.as_ref().unwrap();
                    val += (h / hp) * a2 * (n_coeffs[k] - np[k]);
                }
                uc[k] = val;
            }
            state.v = state.u.inverse_helmholtz();
        }
        PropCache::Gamma1(_, rows) => {
            let prev = state.prev.take();
            let uc = state.u.coeffs_mut();
            let mut vc_new = vec![0.0; uc.len()];
            for (k, (e, p1, p2)) in rows.iter().enumerate() {
                let u0 = uc[k];
                let v0 = state.v.coeffs()[k];
                let mut nu = e[0] * u0 + e[1] * v0 + p1[0] * n_coeffs[k];
                let mut nv = e[2] * u0 + e[3] * v0 + p1[1] * n_coeffs[k];
                if use_ab2 {
                    let (np, hp) = prev.as_ref().unwrap();
                    let c = (h / hp) * (n_coeffs[k] - np[k]);
                    nu += p2[0] * c;
                    nv += p2[1] * c;
                }
                uc[k] = nu;
                vc_new[k] = nv;
            }
            state.v.coeffs_mut().copy_from_slice(&vc_new);
        }
    }

    let cfl = h * diag.max_gradv / h_grid;
    state.prev = Some((n_coeffs, h));
    state.t += h;
    Ok(StepOutcome {
        status: RunStatus::Ok,
        dt_used: h,
        max_linf: diag.max_linf,
        min_rho: diag.min_rho,
        nonlinear_cfl: cfl,
    })
}

/// Full record of a run: sampled norm series plus run-level diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub times: Vec<f64>,
    /// Column labels aligned with `series`.
    pub labels: Vec<String>,
    /// `series[col][row]` matches `labels[col]` and `times[row]`.
    pub series: Vec<Vec<f64>>,
    pub status: RunStatus,
    pub nan_detected: bool,
    /// `|mass(u)(t_final) - mass(u)(0)|` per unit time.
    pub mass_drift: f64,
    /// Smallest grid value of `rho` seen during the run.
    pub min_rho: f64,
    pub final_t: f64,
    pub steps: usize,
}

/// Runs the solver until `t_end`, a blow-up flag, or a NaN. Sampling
/// happens at `t = 0` and then at the first step crossing each multiple of
/// `output_dt` (recorded times are the actual step times).
pub fn simulate(state: &mut SimState, config: &SolverConfig) -> Result<RunRecord> {
    config.validate()?;
    let d = state.u.domain().dim();
    let labels: Vec<String> = vec![
        "u_L1".into(),
        "u_L2".into(),
        "u_Linf".into(),
        format!("grad_v_L{d}"),
        "grad_v_Linf".into(),
    ];
    let threshold = match config.blowup_linf_threshold {
        Some(thr) => thr,
        None => 1e6 * state.rho_linf().max(f64::MIN_POSITIVE),
    };
    let mut cfg = config.clone();
    cfg.blowup_linf_threshold = Some(threshold);

    let mut times = Vec::new();
    let mut series = vec![Vec::new(); labels.len()];
    let mut nan_detected = false;
    let record = |state: &SimState, times: &mut Vec<f64>, series: &mut Vec<Vec<f64>>| -> Result<bool> {
        let row = [
            lp_norm(&state.u, 1.0)?,
            lp_norm(&state.u, 2.0)?,
            lp_norm(&state.u, f64::INFINITY)?,
            grad_lp_norm(&state.v, d as f64)?,
            grad_lp_norm(&state.v, f64::INFINITY)?,
        ];
        times.push(state.t);
        for (col, val) in series.iter_mut().zip(row) {
            col.push(val);
        }
        Ok(row.iter().all(|x| x.is_finite()))
    };

    let mass0 = state.u.coeffs()[0];
    let mut status = RunStatus::Ok;
    let mut min_rho = f64::INFINITY;
    let mut steps = 0usize;
    if !record(state, &mut times, &mut series)? {
        nan_detected = true;
    }
    let mut next_out = cfg.output_dt;
    let end = cfg.t_end * (1.0 - 1e-12);
    while !nan_detected && state.t < end {
        let out = step(state, &cfg)?;
        min_rho = min_rho.min(out.min_rho);
        if out.status != RunStatus::Ok {
            status = out.status;
            break;
        }
        steps += 1;
        if state.t >= next_out - 1e-9 || state.t >= end {
            if !record(state, &mut times, &mut series)? {
                nan_detected = true;
            }
            while next_out <= state.t + 1e-9 {
                next_out += cfg.output_dt;
            }
        }
    }

    let elapsed = state.t.max(f64::MIN_POSITIVE);
    let mass_drift = (state.u.coeffs()[0] - mass0).abs() * state.u.domain().volume() / elapsed;
    Ok(RunRecord {
        times,
        labels,
        series,
        status,
        nan_detected,
        mass_drift,
        min_rho,
        final_t: state.t,
        steps,
    })
}

/// A normalized Gaussian density `rho` with `int rho = mass`, sampled on
/// the collocation grid and projected onto the cosine basis.
pub fn gaussian_bump(domain: &Domain, center: &[f64], sigma: f64, mass: f64) -> Result<SpectralField> {
    if center.len() != domain.dim() {
        return Err(Error::InvalidParameter {
            name: "center",
            reason: format!("expected {} coordinates, got {}", domain.dim(), center.len()),
        });
    }
    for (c, &l) in center.iter().zip(domain.lengths()) {
        if !(c.is_finite() && *c >= 0.0 && *c <= l) {
            return Err(Error::InvalidParameter {
                name: "center",
                reason: format!("coordinate {c} outside the box"),
            });
        }
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("width must be positive, got {sigma}"),
        });
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::InvalidParameter {
            name: "mass",
            reason: format!("mass must be positive, got {mass}"),
        });
    }
    let g = domain.grid();
    let dim = domain.dim();
    let n2 = if dim == 2 { g[1] } else { 1 };
    let mut values = vec![0.0; domain.n_modes()];
    for (flat, val) in values.iter_mut().enumerate() {
        let idx = [flat / n2, flat % n2];
        let mut r2 = 0.0;
        for axis in 0..dim {
            let x = (idx[axis] as f64 + 0.5) * domain.lengths()[axis] / g[axis] as f64;
            let dx = x - center[axis];
            r2 += dx * dx;
        }
        *val = (-0.5 * r2 / (sigma * sigma)).exp();
    }
    let mut rho = SpectralField::from_grid(domain, &values)?;
    let raw_mass = rho.coeffs()[0] * domain.volume();
    let scale = mass / raw_mass;
    for c in rho.coeffs_mut() {
        *c *= scale;
    }
    Ok(rho)
}
