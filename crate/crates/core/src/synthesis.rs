//! Gaussian field synthesis.
//!
//! Two paths share the [`FieldRealization`] output type:
//!
//! * [`CholeskyPlan`] factors the exact covariance Gram matrix over the grid. Exact
//!   in law up to quadrature error, limited to small grids.
//! * [`SpectralPlan`] discretizes the harmonizable integral on a [`FrequencyGrid`]
//!   of rectangular cells. Each cell carries the exact `φ⁻²` mass of the cell and a
//!   complex Gaussian weight, paired Hermitian so that the sum is real.
//!
//! Cells are tensor products of one-dimensional cells. Each axis holds a uniform
//! lattice `k·D`, evaluated by FFT, plus optional finer cells near zero frequency,
//! evaluated by direct sums. When the grid sits on the lattice `spacing·ℤ`, the mass
//! of each cell is folded over its aliases `ξ + m·2π/spacing`, which the grid cannot
//! distinguish from `ξ`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::grid::{FieldRealization, GridSpec, Method};
use crate::model::{covariance_with, increment_variance, FieldParams, QuadratureSpec};
use crate::quad::Estimate;
use crate::rng::{derive_stream, GaussianStream};

/// Largest grid accepted by the Cholesky path.
pub const CHOLESKY_MAX_POINTS: usize = 4096;

/// One axis of a [`FrequencyGrid`]: lattice cells followed by refined cells.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisCells {
    /// Lattice spacing `D`.
    pub step: f64,
    /// FFT length; lattice index `k` lives in bin `k mod fft_len`.
    pub fft_len: usize,
    /// Lattice indices of the first `lattice.len()` cells.
    pub lattice: Vec<i64>,
    /// Cell centers, lattice first.
    pub nodes: Vec<f64>,
    /// Cell bounds `(lo, hi)`, aligned with `nodes`.
    pub cells: Vec<(f64, f64)>,
    /// Index of the cell mirrored through zero frequency.
    pub mirror: Vec<usize>,
}

impl AxisCells {
    /// Lattice `k·D`, `0 < |k| ≤ fft_len/2 − 1` with `|k| ≤ skip` removed, then
    /// `levels` geometric cells below `D/2` and uniform cells of width `D/sub` over
    /// `[D/2, (skip + 1/2)·D]`, on both sides of zero.
    fn build(spacing: f64, oversample: usize, n: usize, skip: usize, sub: usize, levels: usize) -> Self {
        let fft_len = oversample * n;
        let step = 2.0 * PI / (fft_len as f64 * spacing);
        let kmax = (fft_len / 2) as i64 - 1;
        let mut lattice = Vec::new();
        let mut nodes = Vec::new();
        let mut cells = Vec::new();
        for k in -kmax..=kmax {
            if k.unsigned_abs() as usize <= skip {
                continue;
            }
            let c = k as f64 * step;
            lattice.push(k);
            nodes.push(c);
            cells.push((c - 0.5 * step, c + 0.5 * step));
        }
        let mut push_pair = |lo: f64, hi: f64, center: f64| {
            nodes.push(center);
            cells.push((lo, hi));
            nodes.push(-center);
            cells.push((-hi, -lo));
        };
        let mut hi = 0.5 * step;
        for _ in 0..levels {
            let lo = 0.5 * hi;
            push_pair(lo, hi, (lo * hi).sqrt());
            hi = lo;
        }
        if sub > 0 {
            let w = step / sub as f64;
            for i in 0..skip * sub {
                let lo = 0.5 * step + i as f64 * w;
                push_pair(lo, lo + w, lo + 0.5 * w);
            }
        }
        let mirror = mirror_map(&nodes);
        Self {
            step,
            fft_len,
            lattice,
            nodes,
            cells,
            mirror,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest |frequency| covered.
    pub fn cutoff(&self) -> f64 {
        self.cells.iter().fold(0.0f64, |m, c| m.max(c.1.abs()).max(c.0.abs()))
    }
}

fn mirror_map(nodes: &[f64]) -> Vec<usize> {
    let mut index: HashMap<u64, usize> = HashMap::with_capacity(nodes.len());
    for (i, &v) in nodes.iter().enumerate() {
        index.insert(v.to_bits(), i);
    }
    nodes
        .iter()
        .map(|&v| *index.get(&(-v).to_bits()).expect("axis cells are symmetric"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyLayout {
    /// Oversampled lattice with refined cells near the axes.
    Refined,
    /// Lattice of the grid's own DFT frequencies; realizations are periodic.
    Torus,
}

/// Symmetric cell decomposition of the truncated frequency plane.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub axis1: AxisCells,
    pub axis2: AxisCells,
    pub layout: FrequencyLayout,
    /// Alias images folded into each cell mass, per side.
    pub images: u32,
    /// Alias periods `2π/spacing` per axis.
    pub period: (f64, f64),
    /// Exact cell integrals of `φ⁻²` when true; midpoint value times cell area otherwise.
    pub exact_masses: bool,
}

/// Lattice oversampling of the refined layout.
pub const REFINED_OVERSAMPLE: usize = 4;
/// Lattice indices `|k| ≤ REFINED_SKIP` are replaced by refined cells.
pub const REFINED_SKIP: usize = 8;
/// Uniform sub-cells per lattice step in the refined band.
pub const REFINED_SUBCELLS: usize = 8;
/// Geometric cells below `D/2`.
pub const REFINED_LEVELS: usize = 14;
/// Alias images per side folded into masses on aligned grids.
pub const ALIAS_IMAGES: u32 = 3;

impl FrequencyGrid {
    /// Default layout for non-periodic synthesis.
    pub fn refined(grid: &GridSpec) -> Result<Self> {
        grid.validate()?;
        let (d1, d2) = grid.spacing();
        let build = |d: f64, n: usize| {
            AxisCells::build(d, REFINED_OVERSAMPLE, n, REFINED_SKIP, REFINED_SUBCELLS, REFINED_LEVELS)
        };
        let images = if grid.is_aligned() { ALIAS_IMAGES } else { 0 };
        Ok(Self {
            axis1: build(d1, grid.n1),
            axis2: build(d2, grid.n2),
            layout: FrequencyLayout::Refined,
            images,
            period: (2.0 * PI / d1, 2.0 * PI / d2),
            exact_masses: true,
        })
    }

    /// The grid's own DFT lattice with midpoint masses. With `fold` the masses include
    /// alias images, so grid samples carry the full-band variance; without it the
    /// field is band-limited.
    pub fn torus(grid: &GridSpec, fold: bool) -> Result<Self> {
        grid.validate()?;
        if grid.n1 < 4 || grid.n2 < 4 {
            return Err(invalid("grid", "torus layout needs at least 4 points per axis"));
        }
        if fold && !grid.is_aligned() {
            return Err(invalid("grid", "folding requires a grid aligned with its spacing"));
        }
        let (d1, d2) = grid.spacing();
        Ok(Self {
            axis1: AxisCells::build(d1, 1, grid.n1, 0, 0, 0),
            axis2: AxisCells::build(d2, 1, grid.n2, 0, 0, 0),
            layout: FrequencyLayout::Torus,
            images: if fold { ALIAS_IMAGES } else { 0 },
            period: (2.0 * PI / d1, 2.0 * PI / d2),
            exact_masses: false,
        })
    }

    pub fn len(&self) -> usize {
        self.axis1.len() * self.axis2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Truncation radius `Ξ` per axis.
    pub fn cutoff(&self) -> (f64, f64) {
        (self.axis1.cutoff(), self.axis2.cutoff())
    }
}

/// `∫ x^e dx` over `[lo, hi]`, `0 < lo ≤ hi`.
fn power_integral(e: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let l = (hi / lo).ln();
    let k = e + 1.0;
    if k.abs() < 1e-14 {
        return l;
    }
    lo.powf(k) * (k * l).exp_m1() / k
}

/// `∫∫ x^{-a} y^{-b}` over `[p, q] × [r, s]` restricted to `x ≤ y`, positive quadrant.
fn lower_half_mass(p: f64, q: f64, r: f64, s: f64, a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    if p < r {
        total += power_integral(-a, p, q.min(r)) * power_integral(-b, r, s);
    }
    let (lo, hi) = (p.max(r), q.min(s));
    if hi > lo {
        // ∫_lo^hi x^{-a} ∫_x^s y^{-b} dy dx
        total += (s.powf(1.0 - b) * power_integral(-a, lo, hi) - power_integral(1.0 - a - b, lo, hi)) / (1.0 - b);
    }
    total
}

/// Mass of `φ⁻² = min^{-a} max^{-b}` over a rectangle not meeting either axis.
fn rect_mass(c1: (f64, f64), c2: (f64, f64), a: f64, b: f64) -> f64 {
    let fold = |c: (f64, f64)| if c.1 <= 0.0 { (-c.1, -c.0) } else { c };
    let (p, q) = fold(c1);
    let (r, s) = fold(c2);
    (lower_half_mass(p, q, r, s, a, b) + lower_half_mass(r, s, p, q, a, b)).max(0.0)
}

fn midpoint_mass(c1: (f64, f64), c2: (f64, f64), a: f64, b: f64) -> f64 {
    let x = (0.5 * (c1.0 + c1.1)).abs();
    let y = (0.5 * (c2.0 + c2.1)).abs();
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    lo.powf(-a) * hi.powf(-b) * (c1.1 - c1.0) * (c2.1 - c2.0)
}

/// `φ⁻²` mass of every tensor cell, folded over alias images.
pub fn cell_masses(params: &FieldParams, freq: &FrequencyGrid) -> Array2<f64> {
    let (a, b) = (params.min_exponent(), params.max_exponent());
    let m = freq.images as i64;
    let (t1, t2) = freq.period;
    let n2 = freq.axis2.len();
    let rows: Vec<Vec<f64>> = freq
        .axis1
        .cells
        .par_iter()
        .map(|&c1| {
            (0..n2)
                .map(|i2| {
                    let c2 = freq.axis2.cells[i2];
                    let mut total = 0.0;
                    for m1 in -m..=m {
                        let s1 = m1 as f64 * t1;
                        for m2 in -m..=m {
                            let s2 = m2 as f64 * t2;
                            total += if freq.exact_masses {
                                rect_mass((c1.0 + s1, c1.1 + s1), (c2.0 + s2, c2.1 + s2), a, b)
                            } else {
                                midpoint_mass((c1.0 + s1, c1.1 + s1), (c2.0 + s2, c2.1 + s2), a, b)
                            };
                        }
                    }
                    total
                })
                .collect()
        })
        .collect();
    Array2::from_shape_fn((freq.axis1.len(), n2), |(i, j)| rows[i][j])
}

/// Evaluates `Σ_c a_c (e^{i x ν_c} − 1)` at the grid points of one axis.
#[derive(Clone)]
struct AxisTransform {
    n: usize,
    lattice_bins: Vec<usize>,
    lattice_phase: Vec<Complex64>,
    /// `e^{i x_i ν_r} − 1` for refined cells, row-major `n × refined`.
    refined: Vec<Complex64>,
    refined_count: usize,
    /// Grid indices whose coordinate is exactly zero.
    zero_points: Vec<usize>,
    fft: Arc<dyn Fft<f64>>,
}

/// `e^{iθ} − 1` without cancellation for small `θ`.
fn expm1_i(theta: f64) -> Complex64 {
    let s = (0.5 * theta).sin();
    Complex64::new(-2.0 * s * s, theta.sin())
}

impl AxisTransform {
    fn new(axis: &AxisCells, n: usize, x: impl Fn(usize) -> f64, planner: &mut FftPlanner<f64>) -> Self {
        let x0 = x(0);
        let nl = axis.lattice.len();
        let lattice_bins = axis
            .lattice
            .iter()
            .map(|&k| k.rem_euclid(axis.fft_len as i64) as usize)
            .collect();
        let lattice_phase = axis
            .lattice
            .iter()
            .map(|&k| Complex64::from_polar(1.0, x0 * k as f64 * axis.step))
            .collect();
        let refined_count = axis.len() - nl;
        let mut refined = Vec::with_capacity(n * refined_count);
        for i in 0..n {
            let xi = x(i);
            for r in 0..refined_count {
                refined.push(expm1_i(xi * axis.nodes[nl + r]));
            }
        }
        let zero_points = (0..n).filter(|&i| x(i) == 0.0).collect();
        Self {
            n,
            lattice_bins,
            lattice_phase,
            refined,
            refined_count,
            zero_points,
            fft: planner.plan_fft_inverse(axis.fft_len),
        }
    }

    /// Writes `n` values into `out`.
    fn apply(&self, coeffs: &[Complex64], buf: &mut [Complex64], scratch: &mut [Complex64], out: &mut [Complex64]) {
        let nl = self.lattice_bins.len();
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for ((&bin, &ph), &c) in self.lattice_bins.iter().zip(&self.lattice_phase).zip(&coeffs[..nl]) {
            buf[bin] += c * ph;
        }
        self.fft.process_with_scratch(buf, scratch);
        // Lattice frequencies are bounded away from zero, so subtracting their sum is benign.
        let lattice_sum: Complex64 = coeffs[..nl].iter().sum();
        let refined_coeffs = &coeffs[nl..];
        for i in 0..self.n {
            let row = &self.refined[i * self.refined_count..(i + 1) * self.refined_count];
            let mut acc = buf[i] - lattice_sum;
            for (e, c) in row.iter().zip(refined_coeffs) {
                acc += e * c;
            }
            out[i] = acc;
        }
        for &i in &self.zero_points {
            out[i] = Complex64::new(0.0, 0.0);
        }
    }

    fn fft_len(&self) -> usize {
        self.fft.len()
    }

    fn scratch_len(&self) -> usize {
        self.fft.get_inplace_scratch_len()
    }
}

/// Precomputed spectral synthesis for one `(params, grid, frequency grid)` triple.
#[derive(Clone)]
pub struct SpectralPlan {
    params: FieldParams,
    grid: GridSpec,
    freq: FrequencyGrid,
    root_mass: Array2<f64>,
    t1: AxisTransform,
    t2: AxisTransform,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan")
            .field("params", &self.params)
            .field("grid", &self.grid)
            .field("cells", &self.freq.len())
            .finish()
    }
}

/// A spectral realization together with its discarded imaginary part.
#[derive(Debug, Clone)]
pub struct SpectralSample {
    pub field: FieldRealization,
    /// `max |Im| / max |value|` of the assembled complex sum.
    pub imaginary_residue: f64,
}

impl SpectralPlan {
    pub fn new(params: &FieldParams, grid: &GridSpec, freq: &FrequencyGrid) -> Result<Self> {
        grid.validate()?;
        let (d1, d2) = grid.spacing();
        let expected = |a: &AxisCells, d: f64, n: usize| {
            (a.step * a.fft_len as f64 * d - 2.0 * PI).abs() < 1e-9 && a.fft_len >= n
        };
        if !expected(&freq.axis1, d1, grid.n1) || !expected(&freq.axis2, d2, grid.n2) {
            return Err(invalid("freq", "frequency grid was built for a different grid"));
        }
        let root_mass = cell_masses(params, freq).mapv(f64::sqrt);
        let mut planner = FftPlanner::new();
        let t1 = AxisTransform::new(&freq.axis1, grid.n1, |i| grid.x1(i), &mut planner);
        let t2 = AxisTransform::new(&freq.axis2, grid.n2, |j| grid.x2(j), &mut planner);
        Ok(Self {
            params: *params,
            grid: *grid,
            freq: freq.clone(),
            root_mass,
            t1,
            t2,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn frequency_grid(&self) -> &FrequencyGrid {
        &self.freq
    }

    /// Hermitian-paired complex Gaussian cell amplitudes `√mass · W_c`.
    fn amplitudes(&self, seed: u64) -> Array2<Complex64> {
        let (m1, m2) = self.root_mass.dim();
        let mir1 = &self.freq.axis1.mirror;
        let mir2 = &self.freq.axis2.mirror;
        let mut rng = GaussianStream::new(seed);
        let mut amp = Array2::from_elem((m1, m2), Complex64::new(0.0, 0.0));
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..m1 {
            for j in 0..m2 {
                let (pi, pj) = (mir1[i], mir2[j]);
                if (i, j) > (pi, pj) {
                    continue;
                }
                let w = Complex64::new(rng.normal(), rng.normal()) * scale;
                let s = self.root_mass[[i, j]];
                amp[[i, j]] = w * s;
                amp[[pi, pj]] = w.conj() * s;
            }
        }
        amp
    }

    pub fn sample(&self, seed: u64) -> SpectralSample {
        let amp = self.amplitudes(seed);
        let (m1, _) = amp.dim();
        let (n1, n2) = (self.grid.n1, self.grid.n2);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.t2.fft_len().max(self.t1.fft_len())];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.t2.scratch_len().max(self.t1.scratch_len())];
        // Rows: transform along the second axis.
        let mut stage = Array2::from_elem((m1, n2), Complex64::new(0.0, 0.0));
        let mut row_out = vec![Complex64::new(0.0, 0.0); n2];
        let l2 = self.t2.fft_len();
        for i in 0..m1 {
            let row: Vec<Complex64> = amp.row(i).to_vec();
            self.t2.apply(&row, &mut buf[..l2], &mut scratch, &mut row_out);
            stage.row_mut(i).assign(&ndarray::ArrayView1::from(&row_out));
        }
        // Columns: transform along the first axis.
        let mut col_out = vec![Complex64::new(0.0, 0.0); n1];
        let l1 = self.t1.fft_len();
        let mut max_im = 0.0f64;
        let mut max_mod = 0.0f64;
        let mut values = Array2::zeros((n1, n2));
        for j in 0..n2 {
            let col: Vec<Complex64> = stage.column(j).to_vec();
            self.t1.apply(&col, &mut buf[..l1], &mut scratch, &mut col_out);
            for (i, z) in col_out.iter().enumerate() {
                max_im = max_im.max(z.im.abs());
                max_mod = max_mod.max(z.norm());
                values[[i, j]] = z.re;
            }
        }
        let imaginary_residue = if max_mod > 0.0 { max_im / max_mod } else { 0.0 };
        SpectralSample {
            field: FieldRealization {
                values,
                grid: self.grid,
                params: Some(self.params),
                seed,
                method: Method::Spectral,
            },
            imaginary_residue,
        }
    }

    /// `count` realizations on streams `derive_stream(seed, i)`.
    pub fn ensemble(&self, seed: u64, count: usize) -> Vec<FieldRealization> {
        (0..count)
            .into_par_iter()
            .map(|i| self.sample(derive_stream(seed, i as u64)).field)
            .collect()
    }

    /// Covariance of the discretized field between two grid points, `Σ_c mass_c Re(N_x conj N_y)`.
    pub fn model_covariance(&self, x: (usize, usize), y: (usize, usize)) -> f64 {
        let kern = |i: usize, j: usize, a: &AxisCells, b: &AxisCells, k1: usize, k2: usize| {
            let p = Complex64::from_polar(1.0, self.grid.x1(i) * a.nodes[k1]) - 1.0;
            let q = Complex64::from_polar(1.0, self.grid.x2(j) * b.nodes[k2]) - 1.0;
            p * q
        };
        let (a, b) = (&self.freq.axis1, &self.freq.axis2);
        let mut total = 0.0;
        for k1 in 0..a.len() {
            for k2 in 0..b.len() {
                let m = self.root_mass[[k1, k2]].powi(2);
                let nx = kern(x.0, x.1, a, b, k1, k2);
                let ny = kern(y.0, y.1, a, b, k1, k2);
                total += m * (nx * ny.conj()).re;
            }
        }
        total
    }
}

pub fn spectral_synthesize(
    params: &FieldParams,
    grid: &GridSpec,
    freq: &FrequencyGrid,
    seed: u64,
) -> Result<FieldRealization> {
    Ok(SpectralPlan::new(params, grid, freq)?.sample(seed).field)
}

/// Cholesky factor of the grid covariance, restricted to off-axis points.
#[derive(Debug, Clone)]
pub struct CholeskyPlan {
    params: FieldParams,
    grid: GridSpec,
    /// Flat indices `i·n2 + j` of the off-axis points, in factor order.
    points: Vec<usize>,
    factor: DMatrix<f64>,
    /// Diagonal jitter that was added, absolute.
    pub jitter: f64,
}

impl CholeskyPlan {
    pub fn new(params: &FieldParams, grid: &GridSpec, quad: &QuadratureSpec) -> Result<Self> {
        grid.validate()?;
        quad.validate()?;
        if grid.len() > CHOLESKY_MAX_POINTS {
            return Err(invalid(
                "grid",
                format!("{} points exceed the Cholesky limit of {CHOLESKY_MAX_POINTS}", grid.len()),
            ));
        }
        let coords: Vec<(usize, (f64, f64))> = (0..grid.n1)
            .flat_map(|i| (0..grid.n2).map(move |j| (i, j)))
            .map(|(i, j)| (i * grid.n2 + j, (grid.x1(i), grid.x2(j))))
            .filter(|(_, x)| x.0 != 0.0 && x.1 != 0.0)
            .collect();
        let gram = gram_matrix(params, &coords.iter().map(|c| c.1).collect::<Vec<_>>(), quad)?;
        let (factor, jitter) = jittered_cholesky(gram)?;
        Ok(Self {
            params: *params,
            grid: *grid,
            points: coords.into_iter().map(|c| c.0).collect(),
            factor,
            jitter,
        })
    }

    pub fn sample(&self, seed: u64) -> FieldRealization {
        let mut rng = GaussianStream::new(seed);
        let z = DVector::from_fn(self.points.len(), |_, _| rng.normal());
        let x = &self.factor * z;
        let mut values = Array2::zeros((self.grid.n1, self.grid.n2));
        let n2 = self.grid.n2;
        for (&flat, &v) in self.points.iter().zip(x.iter()) {
            values[[flat / n2, flat % n2]] = v;
        }
        FieldRealization {
            values,
            grid: self.grid,
            params: Some(self.params),
            seed,
            method: Method::Cholesky,
        }
    }

    pub fn ensemble(&self, seed: u64, count: usize) -> Vec<FieldRealization> {
        (0..count)
            .into_par_iter()
            .map(|i| self.sample(derive_stream(seed, i as u64)))
            .collect()
    }
}

pub fn cholesky_synthesize(
    params: &FieldParams,
    grid: &GridSpec,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<FieldRealization> {
    Ok(CholeskyPlan::new(params, grid, quad)?.sample(seed))
}

/// Covariance matrix over `points`, with each distinct increment variance computed once.
pub fn gram_matrix(params: &FieldParams, points: &[(f64, f64)], quad: &QuadratureSpec) -> Result<DMatrix<f64>> {
    let key = |a: f64, b: f64| (a.abs().to_bits(), b.abs().to_bits());
    let mut needed: Vec<(u64, u64)> = Vec::new();
    {
        let mut seen = std::collections::HashSet::new();
        for (i, &x) in points.iter().enumerate() {
            for &y in &points[..=i] {
                covariance_with(x, y, |a, b| {
                    if seen.insert(key(a, b)) {
                        needed.push(key(a, b));
                    }
                    Ok(Estimate::ZERO)
                })?;
            }
        }
    }
    let values: Vec<((u64, u64), f64)> = needed
        .par_iter()
        .map(|&(a, b)| {
            increment_variance(params, f64::from_bits(a), f64::from_bits(b), quad).map(|e| ((a, b), e.value))
        })
        .collect::<Result<_>>()?;
    let table: HashMap<(u64, u64), f64> = values.into_iter().collect();
    let n = points.len();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let c = covariance_with(points[i], points[j], |a, b| {
                Ok(Estimate {
                    value: table[&key(a, b)],
                    error: 0.0,
                })
            })?
            .value;
            gram[(i, j)] = c;
            gram[(j, i)] = c;
        }
    }
    Ok(gram)
}

/// Lower Cholesky factor, adding `λ·I` with `λ` growing by decades from `1e-12·trace`
/// when the plain factorization fails.
pub fn jittered_cholesky(gram: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = gram.nrows();
    if n == 0 {
        return Ok((gram, 0.0));
    }
    if let Some(c) = Cholesky::new(gram.clone()) {
        return Ok((c.l(), 0.0));
    }
    let trace = gram.trace();
    let limit = 1e-6 * trace;
    if !(trace > 0.0 && trace.is_finite()) {
        return Err(Error::NotPositiveDefinite { limit });
    }
    let mut lambda = 1e-12 * trace;
    while lambda <= limit * (1.0 + 1e-9) {
        let mut m = gram.clone();
        for i in 0..n {
            m[(i, i)] += lambda;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c.l(), lambda));
        }
        lambda *= 10.0;
    }
    Err(Error::NotPositiveDefinite { limit })
}
