//! Periodic-box discretization: uniform grids, spectral Laplacian, quadrature,
//! norms and lattice translations.
//!
//! Values are stored row-major with axis order (x₁, x₂), so in two dimensions
//! the flat index of `(i₁, i₂)` is `i₁·n + i₂`. Grid point `i` sits at `i·h`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{NlsError, Result};

/// Resultant length below which a circular mean is considered meaningless.
pub const DEGENERATE_RESULTANT: f64 = 0.05;

/// Shape of the periodic box `[0, L)^dim` and the lattice period it is tiled by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub box_length: Vec<f64>,
    pub n: usize,
    pub period: f64,
}

impl GridSpec {
    pub fn new(dim: usize, box_length: f64, n: usize, period: f64) -> Self {
        GridSpec {
            dim,
            box_length: vec![box_length; dim],
            n,
            period,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(NlsError::InvalidGrid(format!(
                "dim must be 1 or 2, got {}",
                self.dim
            )));
        }
        if self.box_length.len() != self.dim {
            return Err(NlsError::InvalidGrid(format!(
                "expected {} box lengths, got {}",
                self.dim,
                self.box_length.len()
            )));
        }
        if self.n < 16 || !self.n.is_power_of_two() {
            return Err(NlsError::InvalidGrid(format!(
                "points per axis must be a power of two >= 16, got {}",
                self.n
            )));
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(NlsError::InvalidGrid(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        for &l in &self.box_length {
            if !(l.is_finite() && l > 0.0) {
                return Err(NlsError::InvalidGrid(format!(
                    "box length must be positive, got {l}"
                )));
            }
            let cells = l / self.period;
            if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) || cells.round() < 1.0 {
                return Err(NlsError::InvalidGrid(format!(
                    "box length {l} is not an integer multiple of the period {}",
                    self.period
                )));
            }
            let per = self.n as f64 * self.period / l;
            if (per - per.round()).abs() > 1e-9 * per.max(1.0) || per.round() < 1.0 {
                return Err(NlsError::InvalidGrid(format!(
                    "period {} spans {per} grid cells; it must span a whole number",
                    self.period
                )));
            }
        }
        Ok(())
    }
}

struct GridInner {
    spec: GridSpec,
    spacing: Vec<f64>,
    cells_per_period: usize,
    /// |k|² for every flat index, Nyquist mode included.
    k_squared: Vec<f64>,
    /// Per-axis wavenumbers with the Nyquist entry zeroed (first derivatives).
    k_axis: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

/// A validated grid with cached FFT plans. Cheap to clone.
#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Grid").field(&self.0.spec).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.spec == other.0.spec
    }
}

fn wavenumber(j: usize, n: usize, length: f64) -> f64 {
    let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
    2.0 * PI * m / length
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n;
        let spacing: Vec<f64> = spec.box_length.iter().map(|l| l / n as f64).collect();
        let cells_per_period = (spec.period / spacing[0]).round() as usize;

        let k_axis: Vec<Vec<f64>> = spec
            .box_length
            .iter()
            .map(|&l| {
                (0..n)
                    .map(|j| if j == n / 2 { 0.0 } else { wavenumber(j, n, l) })
                    .collect()
            })
            .collect();
        let k2_axis: Vec<Vec<f64>> = spec
            .box_length
            .iter()
            .map(|&l| (0..n).map(|j| wavenumber(j, n, l).powi(2)).collect())
            .collect();
        let k_squared = match spec.dim {
            1 => k2_axis[0].clone(),
            _ => {
                let mut out = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        out.push(k2_axis[0][i] + k2_axis[1][j]);
                    }
                }
                out
            }
        };

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        Ok(Grid(Arc::new(GridInner {
            spec,
            spacing,
            cells_per_period,
            k_squared,
            k_axis,
            fft,
            ifft,
        })))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.0.spec
    }

    pub fn dim(&self) -> usize {
        self.0.spec.dim
    }

    pub fn n(&self) -> usize {
        self.0.spec.n
    }

    pub fn len(&self) -> usize {
        self.n().pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn box_length(&self, axis: usize) -> f64 {
        self.0.spec.box_length[axis]
    }

    pub fn period(&self) -> f64 {
        self.0.spec.period
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.0.spacing[axis]
    }

    /// Grid cells spanned by one lattice period along each axis.
    pub fn cells_per_period(&self) -> usize {
        self.0.cells_per_period
    }

    /// Quadrature weight h^dim.
    pub fn cell_volume(&self) -> f64 {
        self.0.spacing.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.0.spec.box_length.iter().product()
    }

    pub fn k_squared(&self) -> &[f64] {
        &self.0.k_squared
    }

    /// Multi-index of a flat index.
    pub fn unravel(&self, idx: usize) -> [usize; 2] {
        let n = self.n();
        match self.dim() {
            1 => [idx, 0],
            _ => [idx / n, idx % n],
        }
    }

    pub fn ravel(&self, ix: [usize; 2]) -> usize {
        match self.dim() {
            1 => ix[0],
            _ => ix[0] * self.n() + ix[1],
        }
    }

    /// Physical coordinates of a flat index.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let ix = self.unravel(idx);
        let mut x = [0.0; 2];
        for (axis, xi) in x.iter_mut().enumerate().take(self.dim()) {
            *xi = ix[axis] as f64 * self.spacing(axis);
        }
        x
    }

    pub fn center(&self) -> [f64; 2] {
        let mut c = [0.0; 2];
        for (axis, ci) in c.iter_mut().enumerate().take(self.dim()) {
            *ci = 0.5 * self.box_length(axis);
        }
        c
    }

    /// Unnormalized forward DFT of real data.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.0.fft);
        buf
    }

    /// Inverse DFT (normalized by 1/n^dim) keeping the real part.
    pub fn inverse(&self, mut spectrum: Vec<Complex<f64>>) -> Vec<f64> {
        self.transform(&mut spectrum, &self.0.ifft);
        let scale = 1.0 / self.len() as f64;
        spectrum.into_iter().map(|c| c.re * scale).collect()
    }

    fn transform(&self, buf: &mut [Complex<f64>], plan: &Arc<dyn Fft<f64>>) {
        plan.process(buf);
        if self.dim() == 2 {
            let n = self.n();
            transpose_square(buf, n);
            plan.process(buf);
            transpose_square(buf, n);
        }
    }

    /// Applies a real Fourier multiplier given per flat spectral index.
    pub fn apply_multiplier(&self, values: &[f64], symbol: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut spec = self.forward(values);
        for (i, c) in spec.iter_mut().enumerate() {
            *c *= symbol(i);
        }
        self.inverse(spec)
    }
}

fn transpose_square(buf: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Real grid function on a periodic box.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(NlsError::InvalidField(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(NlsError::InvalidField(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(Field {
            grid: grid.clone(),
            values,
        })
    }

    /// Builds a field without the finiteness scan; callers guarantee validity.
    pub(crate) fn from_raw(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Field::from_raw(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Field::from_raw(grid, vec![c; grid.len()])
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                f(&x[..dim])
            })
            .collect();
        Field::new(grid, values)
    }

    /// Random trigonometric polynomial with modes |m| ≤ `max_mode` per axis
    /// and coefficients decaying like 1/(1+|m|²).
    pub fn random_smooth<R: Rng>(grid: &Grid, rng: &mut R, max_mode: usize) -> Self {
        let dim = grid.dim();
        let modes: Vec<[i64; 2]> = match dim {
            1 => (0..=max_mode as i64).map(|m| [m, 0]).collect(),
            _ => {
                let mm = max_mode as i64;
                let mut v = Vec::new();
                for a in -mm..=mm {
                    for b in 0..=mm {
                        v.push([a, b]);
                    }
                }
                v
            }
        };
        let terms: Vec<([i64; 2], f64, f64)> = modes
            .into_iter()
            .map(|m| {
                let w = 1.0 / (1.0 + (m[0] * m[0] + m[1] * m[1]) as f64);
                let a = rng.gen_range(-1.0..1.0) * w;
                let b = rng.gen_range(-1.0..1.0) * w;
                (m, a, b)
            })
            .collect();
        let lens = [grid.box_length(0), grid.box_length(dim - 1)];
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                terms
                    .iter()
                    .map(|(m, a, b)| {
                        let mut phase = 2.0 * PI * m[0] as f64 * x[0] / lens[0];
                        if dim == 2 {
                            phase += 2.0 * PI * m[1] as f64 * x[1] / lens[1];
                        }
                        a * phase.cos() + b * phase.sin()
                    })
                    .sum()
            })
            .collect();
        Field::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(NlsError::InvalidField(format!(
                "non-finite value at index {i}"
            ))),
            None => Ok(()),
        }
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(NlsError::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field::from_raw(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        ))
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field::from_raw(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Spectral Laplacian with symbol −|k|², k = 2πm/L, m ∈ {−n/2, …, n/2−1}.
pub fn laplacian(u: &Field) -> Result<Field> {
    u.check_finite()?;
    Ok(laplacian_unchecked(u))
}

pub(crate) fn laplacian_unchecked(u: &Field) -> Field {
    let g = u.grid();
    let k2 = g.k_squared();
    Field::from_raw(g, g.apply_multiplier(u.values(), |i| -k2[i]))
}

/// Spectral first derivatives, one field per axis, Nyquist mode zeroed.
pub fn gradient(u: &Field) -> Result<Vec<Field>> {
    u.check_finite()?;
    let g = u.grid();
    let n = g.n();
    let spec = g.forward(u.values());
    let out = (0..g.dim())
        .map(|axis| {
            let k = &g.0.k_axis[axis];
            let s: Vec<Complex<f64>> = spec
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let ix = g.unravel(i);
                    let j = if g.dim() == 1 { ix[0] } else { ix[axis] };
                    c * Complex::new(0.0, k[j % n])
                })
                .collect();
            Field::from_raw(g, g.inverse(s))
        })
        .collect();
    Ok(out)
}

/// ∫|∇u|² evaluated in Fourier space as Σ|k|²|û|² · h^dim / n^dim.
pub fn gradient_energy(u: &Field) -> f64 {
    let g = u.grid();
    let spec = g.forward(u.values());
    let s: f64 = spec
        .iter()
        .zip(g.k_squared())
        .map(|(c, k2)| k2 * c.norm_sqr())
        .sum();
    s * g.cell_volume() / g.len() as f64
}

/// Rectangle rule h^dim · Σ values.
pub fn integrate(u: &Field) -> f64 {
    u.grid().cell_volume() * u.values().iter().sum::<f64>()
}

/// ∫ u·v.
pub fn inner_l2(u: &Field, v: &Field) -> Result<f64> {
    u.same_grid(v)?;
    let s: f64 = u.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
    Ok(s * u.grid().cell_volume())
}

pub fn l2_norm(u: &Field) -> f64 {
    let s: f64 = u.values().iter().map(|a| a * a).sum();
    (s * u.grid().cell_volume()).sqrt()
}

/// The form ∫∇u·∇v + V u v, evaluated as ∫(−Δu)v + V u v so that it is
/// exactly the quadratic form of the discrete operator −Δ + V.
pub fn inner_h1v(u: &Field, v: &Field, vtot: &Field) -> Result<f64> {
    u.same_grid(v)?;
    u.same_grid(vtot)?;
    u.check_finite()?;
    v.check_finite()?;
    let lap = laplacian_unchecked(u);
    let s: f64 = lap
        .values()
        .iter()
        .zip(u.values())
        .zip(v.values().iter().zip(vtot.values()))
        .map(|((lu, uu), (vv, pot))| (-lu + pot * uu) * vv)
        .sum();
    Ok(s * u.grid().cell_volume())
}

/// (−Δ + V) u.
pub fn apply_operator(u: &Field, vtot: &Field) -> Result<Field> {
    u.same_grid(vtot)?;
    let lap = laplacian_unchecked(u);
    Ok(Field::from_raw(
        u.grid(),
        lap.values()
            .iter()
            .zip(u.values())
            .zip(vtot.values())
            .map(|((lu, uu), pot)| -lu + pot * uu)
            .collect(),
    ))
}

/// (∫|u|^s)^{1/s}.
pub fn lp_norm(u: &Field, s: f64) -> Result<f64> {
    if !(s >= 1.0) || !s.is_finite() {
        return Err(NlsError::InvalidArgument(format!(
            "L^s norm needs s >= 1, got {s}"
        )));
    }
    u.check_finite()?;
    let sum: f64 = u.values().iter().map(|v| v.abs().powf(s)).sum();
    Ok((sum * u.grid().cell_volume()).powf(1.0 / s))
}

/// Circular shift by whole grid cells: result(x) = u(x − offset·h).
pub fn shift_cells(u: &Field, offset: &[i64]) -> Field {
    let g = u.grid();
    let n = g.n() as i64;
    let dim = g.dim();
    let mut out = vec![0.0; g.len()];
    for (idx, &v) in u.values().iter().enumerate() {
        let ix = g.unravel(idx);
        let mut target = [0usize; 2];
        for axis in 0..dim {
            let o = offset.get(axis).copied().unwrap_or(0);
            target[axis] = (ix[axis] as i64 + o).rem_euclid(n) as usize;
        }
        out[g.ravel(target)] = v;
    }
    Field::from_raw(g, out)
}

/// Translation u(· − y) by a lattice vector y given in grid cells; every
/// component must be a multiple of the cells spanned by one period.
pub fn translate(u: &Field, offset: &[i64]) -> Result<Field> {
    let g = u.grid();
    if offset.len() != g.dim() {
        return Err(NlsError::InvalidArgument(format!(
            "offset has {} components on a {}-dimensional grid",
            offset.len(),
            g.dim()
        )));
    }
    let step = g.cells_per_period();
    if offset.iter().any(|o| o.rem_euclid(step as i64) != 0) {
        return Err(NlsError::NonLatticeShift {
            offset: offset.to_vec(),
            step,
        });
    }
    u.check_finite()?;
    Ok(shift_cells(u, offset))
}

/// |u|²-weighted circular mean per axis together with the resultant length
/// (1 for a point mass, 0 when the weight is spread symmetrically).
pub fn centroid_with_resultant(u: &Field) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = u.grid();
    let dim = g.dim();
    let total: f64 = u.values().iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Err(NlsError::ZeroField);
    }
    let mut pos = Vec::with_capacity(dim);
    let mut res = Vec::with_capacity(dim);
    for axis in 0..dim {
        let l = g.box_length(axis);
        let (mut c, mut s) = (0.0, 0.0);
        for (idx, v) in u.values().iter().enumerate() {
            let w = v * v;
            if w == 0.0 {
                continue;
            }
            let theta = 2.0 * PI * g.point(idx)[axis] / l;
            c += w * theta.cos();
            s += w * theta.sin();
        }
        let r = (c * c + s * s).sqrt() / total;
        let angle = s.atan2(c);
        pos.push((angle / (2.0 * PI) * l).rem_euclid(l));
        res.push(r);
    }
    Ok((pos, res))
}

/// Circular centroid; fails when any axis has a near-zero resultant.
pub fn centroid(u: &Field) -> Result<Vec<f64>> {
    let (pos, res) = centroid_with_resultant(u)?;
    for (axis, &r) in res.iter().enumerate() {
        if r < DEGENERATE_RESULTANT {
            return Err(NlsError::DegenerateCentroid { axis, resultant: r });
        }
    }
    Ok(pos)
}

/// Signed minimal-image difference a − b on a circle of length `l`.
pub fn periodic_delta(a: f64, b: f64, l: f64) -> f64 {
    let d = (a - b).rem_euclid(l);
    if d > 0.5 * l {
        d - l
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid1(l: f64, n: usize) -> Grid {
        Grid::new(GridSpec::new(1, l, n, l / 8.0)).unwrap()
    }

    fn grid2(l: f64, n: usize) -> Grid {
        Grid::new(GridSpec::new(2, l, n, l / 4.0)).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(Grid::new(GridSpec::new(3, 8.0, 16, 1.0)).is_err());
        assert!(Grid::new(GridSpec::new(1, 8.0, 24, 1.0)).is_err());
        assert!(Grid::new(GridSpec::new(1, 8.0, 8, 1.0)).is_err());
        // 40 is a multiple of 1, but one period would span 25.6 cells
        assert!(Grid::new(GridSpec::new(1, 40.0, 1024, 1.0)).is_err());
        assert!(Grid::new(GridSpec::new(1, 8.5, 64, 1.0)).is_err());
        assert!(Grid::new(GridSpec::new(1, 40.0, 1024, 1.25)).is_ok());
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = grid2(10.0, 32);
        let lap = laplacian(&Field::constant(&g, 3.7)).unwrap();
        assert!(lap.max_abs() < 1e-12);
    }

    #[test]
    fn laplacian_of_sine_is_exact() {
        let l = 12.0;
        let g = grid1(l, 64);
        let k = 2.0 * PI / l;
        let u = Field::from_fn(&g, |x| (k * x[0]).sin()).unwrap();
        let lap = laplacian(&u).unwrap();
        for (i, v) in lap.values().iter().enumerate() {
            let x = g.point(i)[0];
            assert!((v + k * k * (k * x).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_rejects_non_finite() {
        let g = grid1(8.0, 16);
        let mut u = Field::zeros(&g);
        u.values_mut()[3] = f64::NAN;
        assert!(matches!(laplacian(&u), Err(NlsError::InvalidField(_))));
    }

    #[test]
    fn two_dimensional_laplacian_matches_separable_mode() {
        let l = 6.0;
        let g = grid2(l, 32);
        let (k1, k2) = (2.0 * PI / l, 4.0 * PI / l);
        let u = Field::from_fn(&g, |x| (k1 * x[0]).cos() * (k2 * x[1]).sin()).unwrap();
        let lap = laplacian(&u).unwrap();
        for (a, b) in lap.values().iter().zip(u.values()) {
            assert!((a + (k1 * k1 + k2 * k2) * b).abs() < 1e-11);
        }
    }

    #[test]
    fn integrate_examples() {
        let g = grid1(40.0, 256);
        assert!((integrate(&Field::constant(&g, 1.0)) - 40.0).abs() < 1e-12);
        let s2 = Field::from_fn(&g, |x| (2.0 * PI * x[0] / 40.0).sin().powi(2)).unwrap();
        assert!((integrate(&s2) - 20.0).abs() < 1e-12);
        let g = grid1(40.0, 1024);
        let sech2 = Field::from_fn(&g, |x| 2.0 / (x[0] - 20.0).cosh().powi(2)).unwrap();
        assert!((integrate(&sech2) - 4.0).abs() < 1e-10);
    }

    #[test]
    fn h1v_examples() {
        let l = 16.0;
        let g = grid1(l, 64);
        let one = Field::constant(&g, 1.0);
        assert!((inner_h1v(&one, &one, &one).unwrap() - l).abs() < 1e-12);
        let k = 2.0 * PI / l;
        let s = Field::from_fn(&g, |x| (k * x[0]).sin()).unwrap();
        let expect = (k * k + 1.0) * l / 2.0;
        assert!((inner_h1v(&s, &s, &one).unwrap() - expect).abs() < 1e-12);
        let other = grid1(8.0, 64);
        assert_eq!(
            inner_h1v(&s, &Field::zeros(&other), &one),
            Err(NlsError::GridMismatch)
        );
    }

    #[test]
    fn lp_norm_examples() {
        let g = grid1(40.0, 1024);
        let one = Field::constant(&g, 1.0);
        assert!((lp_norm(&one, 3.0).unwrap() - 40f64.powf(1.0 / 3.0)).abs() < 1e-12);
        let u = Field::from_fn(&g, |x| 2f64.sqrt() / (x[0] - 20.0).cosh()).unwrap();
        let expect = (16.0f64 / 3.0).powf(0.25);
        assert!((lp_norm(&u, 4.0).unwrap() - expect).abs() < 1e-8);
        let scaled = lp_norm(&u.scaled(-3.0), 2.5).unwrap();
        assert!((scaled - 3.0 * lp_norm(&u, 2.5).unwrap()).abs() < 1e-12);
        assert!(lp_norm(&u, 0.5).is_err());
    }

    #[test]
    fn translate_examples() {
        let g = grid1(16.0, 64);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = Field::random_smooth(&g, &mut rng, 6);
        assert_eq!(translate(&u, &[0]).unwrap(), u);
        assert_eq!(translate(&u, &[64]).unwrap(), u);
        let step = g.cells_per_period() as i64;
        let t = translate(&u, &[3 * step]).unwrap();
        assert!((l2_norm(&t) - l2_norm(&u)).abs() < 1e-12);
        assert!(matches!(
            translate(&u, &[1]),
            Err(NlsError::NonLatticeShift { .. })
        ));
    }

    #[test]
    fn centroid_examples() {
        let l = 40.0;
        let g = grid1(l, 256);
        let bump = Field::from_fn(&g, |x| (-(x[0] - 20.0).powi(2)).exp()).unwrap();
        let c = centroid(&bump).unwrap();
        assert!((c[0] - 20.0).abs() < g.spacing(0));

        let step = g.cells_per_period() as i64;
        let moved = translate(&bump, &[2 * step]).unwrap();
        let c2 = centroid(&moved).unwrap();
        let dy = periodic_delta(c2[0], c[0], l);
        assert!((dy - 2.0 * g.period()).abs() < 1e-9);

        let two = Field::from_fn(&g, |x| {
            (-(x[0] - 10.0).powi(2)).exp() + (-(x[0] - 30.0).powi(2)).exp()
        })
        .unwrap();
        assert!(matches!(
            centroid(&two),
            Err(NlsError::DegenerateCentroid { .. })
        ));
        assert_eq!(centroid(&Field::zeros(&g)), Err(NlsError::ZeroField));
    }

    #[test]
    fn gradient_energy_matches_physical_quadrature() {
        let g = grid2(8.0, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = Field::random_smooth(&g, &mut rng, 5);
        let grads = gradient(&u).unwrap();
        let phys: f64 = grads.iter().map(|d| l2_norm(d).powi(2)).sum();
        let spec = gradient_energy(&u);
        assert!((phys - spec).abs() <= 1e-10 * spec);
    }
}
