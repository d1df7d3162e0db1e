//! Neumann boxes and their cosine spectral calculus.
//!
//! A domain is a box `(0, L1) x ... x (0, Ld)` with `d in {1, 2}`. The
//! Neumann Laplacian on a box diagonalizes in the pure cosine basis
//!
//! ```text
//! phi_k(x) = prod_i cos(k_i pi x_i / L_i),      lambda_k = sum_i (k_i pi / L_i)^2,
//! ```
//!
//! and every linear operator in this crate acts mode by mode through these
//! eigenvalues. Fields are represented by their cosine coefficients; grid
//! values live at the midpoint collocation nodes `x_j = (j + 1/2) L / N`,
//! where the discrete cosine analysis/synthesis pair is an exact inverse
//! (the classical DCT-II/DCT-III pairing). Midpoint nodes avoid placing
//! collocation points on the boundary and make the quadrature weights
//! uniform.
//!
//! Derivatives of cosine modes are sine modes, so gradients and flux
//! divergences internally use the companion sine tables; sine content never
//! leaks into the public cosine representation.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::Result;

/// Smallest admissible points-per-axis. Below this the 2/3-rule dealiased
/// band is too narrow to hold a quadratic interaction.
pub const MIN_GRID: usize = 8;

/// Collocation basis along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Cos,
    Sin,
}

/// Per-axis collocation tables at the midpoints `x_j = (j + 1/2) L / n`.
///
/// `cos_synth[k*n + j] = cos(k pi (j+1/2) / n)` and `cos_anal` carries the
/// inverse weights `c_k / n` (with `c_0 = 1`, `c_k = 2`), so that
/// analysis ∘ synthesis is the identity up to rounding. The sine tables are
/// the analogous DST pair on modes `1..n`; the `k = 0` sine row is zero.
struct AxisTables {
    n: usize,
    len: f64,
    cos_synth: Vec<f64>,
    sin_synth: Vec<f64>,
    cos_anal: Vec<f64>,
    sin_anal: Vec<f64>,
}

impl AxisTables {
    fn build(n: usize, len: f64) -> Self {
        let mut cos_synth = vec![0.0; n * n];
        let mut sin_synth = vec![0.0; n * n];
        let mut cos_anal = vec![0.0; n * n];
        let mut sin_anal = vec![0.0; n * n];
        for k in 0..n {
            let ck = if k == 0 { 1.0 } else { 2.0 };
            for j in 0..n {
                let arg = k as f64 * PI * (j as f64 + 0.5) / n as f64;
                let (s, c) = arg.sin_cos();
                // Synthesis rows are indexed by grid point, analysis rows
                // by mode; the midpoint matrices are not symmetric.
                cos_synth[j * n + k] = c;
                cos_anal[k * n + j] = ck / n as f64 * c;
                if k > 0 {
                    sin_synth[j * n + k] = s;
                    sin_anal[k * n + j] = 2.0 / n as f64 * s;
                }
            }
        }
        AxisTables {
            n,
            len,
            cos_synth,
            sin_synth,
            cos_anal,
            sin_anal,
        }
    }

    fn synth_table(&self, basis: Basis) -> &[f64] {
        match basis {
            Basis::Cos => &self.cos_synth,
            Basis::Sin => &self.sin_synth,
        }
    }

    fn anal_table(&self, basis: Basis) -> &[f64] {
        match basis {
            Basis::Cos => &self.cos_anal,
            Basis::Sin => &self.sin_anal,
        }
    }
}

struct DomainData {
    dim: usize,
    lengths: Vec<f64>,
    grid: Vec<usize>,
    axes: [AxisTables; 2],
    /// `eigs[k1 * n2 + k2] = (k1 pi / L1)^2 + (k2 pi / L2)^2`.
    eigs: Vec<f64>,
    lambda1: f64,
}

/// A Neumann box with precomputed collocation tables and eigenvalue table.
///
/// Cheap to clone (the tables sit behind an `Arc`). One-dimensional domains
/// are stored internally as `n x 1` so that all mode loops are uniform.
#[derive(Clone)]
pub struct Domain {
    data: Arc<DomainData>,
}

/// Builds a box domain of dimension `dim` with the given side lengths and
/// points per axis.
///
/// Grids must be even and at least [`MIN_GRID`] points per axis; lengths
/// must be positive and finite.
pub fn build_domain(dim: usize, lengths: &[f64], grid: &[usize]) -> Result<Domain> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidDomain(format!("dimension must be 1 or 2, got {dim}")));
    }
    if lengths.len() != dim || grid.len() != dim {
        return Err(Error::InvalidDomain(format!(
            "expected {dim} lengths and grid sizes, got {} and {}",
            lengths.len(),
            grid.len()
        )));
    }
    for &l in lengths {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidDomain(format!("side length {l} is not positive")));
        }
    }
    for &n in grid {
        if n < MIN_GRID || n % 2 != 0 {
            return Err(Error::InvalidDomain(format!(
                "grid size {n} must be even and at least {MIN_GRID}"
            )));
        }
    }

    // Trailing trivial axis for 1-D domains: one constant mode, length one.
    let (n1, n2) = (grid[0], if dim == 2 { grid[1] } else { 1 });
    let (l1, l2) = (lengths[0], if dim == 2 { lengths[1] } else { 1.0 });
    let axes = [AxisTables::build(n1, l1), AxisTables::build(n2, l2)];

    let mut eigs = vec![0.0; n1 * n2];
    for k1 in 0..n1 {
        let w1 = k1 as f64 * PI / l1;
        for k2 in 0..n2 {
            let w2 = k2 as f64 * PI / l2;
            eigs[k1 * n2 + k2] = w1 * w1 + w2 * w2;
        }
    }
    let mut lambda1 = (PI / l1) * (PI / l1);
    if dim == 2 {
        lambda1 = lambda1.min((PI / l2) * (PI / l2));
    }

    Ok(Domain {
        data: Arc::new(DomainData {
            dim,
            lengths: lengths.to_vec(),
            grid: grid.to_vec(),
            axes,
            eigs,
            lambda1,
        }),
    })
}

impl Domain {
    pub fn dim(&self) -> usize {
        self.data.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.data.lengths
    }

    pub fn grid(&self) -> &[usize] {
        &self.data.grid
    }

    pub fn volume(&self) -> f64 {
        self.data.lengths.iter().product()
    }

    /// Smallest positive Neumann eigenvalue, `min_i (pi / L_i)^2`.
    pub fn lambda1(&self) -> f64 {
        self.data.lambda1
    }

    /// Number of retained modes (= number of collocation points).
    pub fn n_modes(&self) -> usize {
        self.data.eigs.len()
    }

    /// Eigenvalue table aligned with the flat coefficient layout
    /// `k1 * n2 + k2`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.data.eigs
    }

    /// Uniform midpoint quadrature weight `|Omega| / (N1 N2)`.
    pub fn quad_weight(&self) -> f64 {
        self.volume() / self.n_modes() as f64
    }

    /// Smallest grid spacing `min_i L_i / N_i` (CFL length scale).
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.data.lengths[i] / self.data.grid[i] as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Multi-index of the flat coefficient position.
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        let n2 = self.data.axes[1].n;
        [flat / n2, flat % n2]
    }

    /// Wavenumber `k pi / L_axis`.
    pub(crate) fn wavenumber(&self, axis: usize, k: usize) -> f64 {
        k as f64 * PI / self.data.axes[axis].len
    }

    /// Squared L^2 normalization of mode `k`: `int phi_k^2 = |Omega| / 2^m`
    /// with `m` the number of nonzero index components.
    pub(crate) fn mode_l2sq(&self, flat: usize) -> f64 {
        let [k1, k2] = self.multi_index(flat);
        let mut c = self.volume();
        if k1 > 0 {
            c *= 0.5;
        }
        if k2 > 0 {
            c *= 0.5;
        }
        c
    }

    /// Full eigenvalue listing sorted ascending (ties by multi-index).
    pub fn spectrum(&self) -> EigenSpectrum {
        let mut entries: Vec<EigenPair> = self
            .data
            .eigs
            .iter()
            .enumerate()
            .map(|(flat, &lambda)| EigenPair {
                lambda,
                index: self.multi_index(flat),
            })
            .collect();
        entries.sort_by(|a, b| {
            a.lambda
                .total_cmp(&b.lambda)
                .then(a.index.cmp(&b.index))
        });
        EigenSpectrum {
            lambda1: self.data.lambda1,
            entries,
        }
    }

    pub fn zero_field(&self) -> SpectralField {
        SpectralField {
            domain: self.clone(),
            coeffs: vec![0.0; self.n_modes()],
        }
    }

    /// Applies the per-axis synthesis tables for the given bases and returns
    /// grid values at the midpoint nodes. Trivial axes (n = 1) are skipped.
    pub(crate) fn synth(&self, coeffs: &[f64], bases: [Basis; 2]) -> Vec<f64> {
        let (a0, a1) = (&self.data.axes[0], &self.data.axes[1]);
        let mut work = coeffs.to_vec();
        if a0.n > 1 {
            work = apply_axis0(a0.synth_table(bases[0]), a0.n, a1.n, &work);
        }
        if a1.n > 1 {
            work = apply_axis1(a1.synth_table(bases[1]), a1.n, a0.n, &work);
        }
        work
    }

    /// Inverse of [`Domain::synth`] for the same basis choice.
    pub(crate) fn analyze(&self, grid: &[f64], bases: [Basis; 2]) -> Vec<f64> {
        let (a0, a1) = (&self.data.axes[0], &self.data.axes[1]);
        let mut work = grid.to_vec();
        if a0.n > 1 {
            work = apply_axis0(a0.anal_table(bases[0]), a0.n, a1.n, &work);
        }
        if a1.n > 1 {
            work = apply_axis1(a1.anal_table(bases[1]), a1.n, a0.n, &work);
        }
        work
    }
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.data, &other.data)
            || (self.data.dim == other.data.dim
                && self.data.lengths == other.data.lengths
                && self.data.grid == other.data.grid)
    }
}

impl std::fmt::Debug for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Domain")
            .field("dim", &self.data.dim)
            .field("lengths", &self.data.lengths)
            .field("grid", &self.data.grid)
            .finish()
    }
}

/// `out[k*n2 + j2] = sum_j table[k*n + j] * data[j*n2 + j2]` (transform
/// along the slow axis).
fn apply_axis0(table: &[f64], n: usize, n2: usize, data: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n2];
    for k in 0..n {
        let row = &table[k * n..(k + 1) * n];
        let o = &mut out[k * n2..(k + 1) * n2];
        for (j, &w) in row.iter().enumerate() {
            let d = &data[j * n2..j * n2 + n2];
            for (oj, dj) in o.iter_mut().zip(d) {
                *oj += w * dj;
            }
        }
    }
    out
}

/// `out[j1*n + k] = sum_j table[k*n + j] * data[j1*n + j]` (transform along
/// the fast axis).
fn apply_axis1(table: &[f64], n: usize, n1: usize, data: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n1 * n];
    for j1 in 0..n1 {
        let d = &data[j1 * n..(j1 + 1) * n];
        let o = &mut out[j1 * n..(j1 + 1) * n];
        for (k, ok) in o.iter_mut().enumerate() {
            let row = &table[k * n..(k + 1) * n];
            let mut s = 0.0;
            for (w, dj) in row.iter().zip(d) {
                s += w * dj;
            }
            *ok = s;
        }
    }
    out
}

/// One eigenvalue with its cosine multi-index (second component 0 in 1-D).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    pub index: [usize; 2],
}

/// Sorted eigenvalue table of a domain.
#[derive(Debug, Clone)]
pub struct EigenSpectrum {
    pub lambda1: f64,
    pub entries: Vec<EigenPair>,
}

/// A scalar field in cosine representation on a fixed domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    domain: Domain,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn from_coeffs(domain: &Domain, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != domain.n_modes() {
            return Err(Error::ShapeMismatch {
                got: coeffs.len(),
                expected: domain.n_modes(),
            });
        }
        Ok(SpectralField {
            domain: domain.clone(),
            coeffs,
        })
    }

    /// Cosine analysis of midpoint grid values (row-major, axis 0 slow).
    pub fn from_grid(domain: &Domain, grid: &[f64]) -> Result<Self> {
        if grid.len() != domain.n_modes() {
            return Err(Error::ShapeMismatch {
                got: grid.len(),
                expected: domain.n_modes(),
            });
        }
        Ok(SpectralField {
            domain: domain.clone(),
            coeffs: domain.analyze(grid, [Basis::Cos, Basis::Cos]),
        })
    }

    /// A single cosine mode `amp * prod_i cos(k_i pi x_i / L_i)`.
    pub fn mode(domain: &Domain, index: &[usize], amp: f64) -> Result<Self> {
        if index.len() != domain.dim() {
            return Err(Error::InvalidParameter {
                name: "index",
                reason: format!("expected {} components", domain.dim()),
            });
        }
        let n2 = if domain.dim() == 2 { domain.grid()[1] } else { 1 };
        let (k1, k2) = (index[0], if domain.dim() == 2 { index[1] } else { 0 });
        if k1 >= domain.grid()[0] || (domain.dim() == 2 && k2 >= domain.grid()[1]) {
            return Err(Error::InvalidParameter {
                name: "index",
                reason: format!("mode {index:?} outside the retained band"),
            });
        }
        let mut f = domain.zero_field();
        f.coeffs[k1 * n2 + k2] = amp;
        Ok(f)
    }

    /// Random smooth field: independent Gaussian coefficients damped by
    /// `(1 + lambda_k)^{-2}`, then projected to zero mean.
    pub fn random_smooth<R: Rng>(domain: &Domain, rng: &mut R) -> Self {
        let mut coeffs = Vec::with_capacity(domain.n_modes());
        for &lambda in domain.eigenvalues() {
            let g: f64 = rng.sample(StandardNormal);
            coeffs.push(g / ((1.0 + lambda) * (1.0 + lambda)));
        }
        coeffs[0] = 0.0;
        SpectralField {
            domain: domain.clone(),
            coeffs,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Synthesis at the midpoint collocation nodes.
    pub fn to_grid(&self) -> Vec<f64> {
        self.domain.synth(&self.coeffs, [Basis::Cos, Basis::Cos])
    }

    /// Applies a diagonal operator given as a multiplier of the eigenvalue:
    /// `coeff_k *= m(lambda_k)`.
    pub fn scale_modes(&mut self, m: impl Fn(f64) -> f64) {
        for (c, &lambda) in self.coeffs.iter_mut().zip(self.domain.eigenvalues()) {
            *c *= m(lambda);
        }
    }

    /// `lap(f)`: multiplies mode `k` by `-lambda_k`.
    pub fn laplacian(&self) -> SpectralField {
        let mut out = self.clone();
        out.scale_modes(|lambda| -lambda);
        out
    }

    /// `(I - lap)^{-1} f`: multiplies mode `k` by `1 / (1 + lambda_k)`.
    /// Defined for every mode, including `k = 0`.
    pub fn inverse_helmholtz(&self) -> SpectralField {
        let mut out = self.clone();
        out.scale_modes(|lambda| 1.0 / (1.0 + lambda));
        out
    }

    /// Gradient components sampled on the grid (one vector per axis).
    ///
    /// Differentiating a cosine series yields a sine series, which is
    /// synthesized here and returned as grid values; the public coefficient
    /// representation stays purely cosine.
    pub fn gradient(&self) -> Vec<Vec<f64>> {
        let dim = self.domain.dim();
        let n2 = self.domain.data.axes[1].n;
        let mut out = Vec::with_capacity(dim);
        for axis in 0..dim {
            let mut sine = vec![0.0; self.coeffs.len()];
            for (flat, &a) in self.coeffs.iter().enumerate() {
                let k = if axis == 0 { flat / n2 } else { flat % n2 };
                if k > 0 {
                    sine[flat] = -a * self.domain.wavenumber(axis, k);
                }
            }
            let mut bases = [Basis::Cos, Basis::Cos];
            bases[axis] = Basis::Sin;
            out.push(self.domain.synth(&sine, bases));
        }
        out
    }

    /// Checks that `other` lives on the same domain.
    pub fn same_domain(&self, other: &SpectralField) -> Result<()> {
        if self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }
}
