//! Functions on `[0,1]^d` sampled by cell averages.
//!
//! A [`SampledField`] stores the averages of a function over the `2^{Md}`
//! generation-`M` cubes, in cube-index order, together with a Hölder exponent
//! and an estimate of the Hölder constant. Point values are recovered by
//! multilinear interpolation between cell centres (linear extrapolation in the
//! half-cell band along the boundary), which is exact for multilinear data.

use rayon::prelude::*;

use crate::dyadic::{check_dim, deinterleave, index_to_row_major, CubeId, MAX_INDEX_BITS};
use crate::error::{Error, Result};
use crate::sum::{block_sums, pairwise_sum};

/// Two-point Gauss-Legendre nodes on `[0,1]`.
const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    d: usize,
    m: u32,
    cells: Vec<f64>,
    beta: f64,
    lip: f64,
}

pub fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Exponent(format!("Hölder exponent {beta} outside (0, 1]")))
    }
}

fn check_resolution(d: usize, m: u32) -> Result<()> {
    check_dim(d)?;
    if m as usize * d > MAX_INDEX_BITS as usize || m as usize * d > 30 {
        return Err(Error::Resolution(format!(
            "resolution {m} too fine for dimension {d}"
        )));
    }
    Ok(())
}

impl SampledField {
    /// Builds a field from cell averages given in cube-index order.
    /// The Hölder constant is estimated from the data.
    pub fn from_cells(d: usize, m: u32, beta: f64, cells: Vec<f64>) -> Result<Self> {
        check_resolution(d, m)?;
        check_beta(beta)?;
        if cells.len() != 1usize << (m as usize * d) {
            return Err(Error::Resolution(format!(
                "expected {} cell averages, got {}",
                1usize << (m as usize * d),
                cells.len()
            )));
        }
        if cells.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite cell average".into()));
        }
        let mut f = SampledField {
            d,
            m,
            cells,
            beta,
            lip: 0.0,
        };
        f.lip = f.estimate_lip();
        Ok(f)
    }

    /// Builds a field from cell averages in row-major order (axis 0 fastest).
    pub fn from_row_major(d: usize, m: u32, beta: f64, values: &[f64]) -> Result<Self> {
        check_resolution(d, m)?;
        if values.len() != 1usize << (m as usize * d) {
            return Err(Error::Resolution(format!(
                "expected {} cell averages, got {}",
                1usize << (m as usize * d),
                values.len()
            )));
        }
        let map = index_to_row_major(d, m);
        let cells = map.iter().map(|&p| values[p]).collect();
        Self::from_cells(d, m, beta, cells)
    }

    /// Cell averages of `f`, by tensor two-point Gauss quadrature on each cell.
    pub fn from_fn<F>(d: usize, m: u32, beta: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        check_resolution(d, m)?;
        let h = (-(m as f64)).exp2();
        let q = 1usize << d;
        let cells = (0..1u64 << (m as usize * d))
            .into_par_iter()
            .map_init(
                || (vec![0u64; d], vec![0.0; d]),
                |(coords, x), k| {
                    deinterleave(k, m, coords);
                    let mut acc = 0.0;
                    for p in 0..q {
                        for i in 0..d {
                            x[i] = (coords[i] as f64 + GAUSS[(p >> i) & 1]) * h;
                        }
                        acc += f(x);
                    }
                    acc / q as f64
                },
            )
            .collect();
        Self::from_cells(d, m, beta, cells)
    }

    pub fn constant(d: usize, m: u32, c: f64) -> Result<Self> {
        check_resolution(d, m)?;
        Self::from_cells(d, m, 1.0, vec![c; 1usize << (m as usize * d)])
    }

    /// Replaces the estimated Hölder constant with a known one.
    pub fn with_lip(mut self, lip: f64) -> Self {
        self.lip = lip;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        self.beta = beta;
        self.lip = self.estimate_lip();
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> u32 {
        self.m
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lip(&self) -> f64 {
        self.lip
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn side_cells(&self) -> usize {
        1 << self.m
    }

    pub fn cell_width(&self) -> f64 {
        (-(self.m as f64)).exp2()
    }

    pub fn row_major(&self) -> Vec<f64> {
        let map = index_to_row_major(self.d, self.m);
        let mut out = vec![0.0; self.cells.len()];
        for (k, &p) in map.iter().enumerate() {
            out[p] = self.cells[k];
        }
        out
    }

    pub fn sup_norm(&self) -> f64 {
        self.cells.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// `∫ f` over `[0,1]^d`.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.cells) / self.cells.len() as f64
    }

    /// `∫_K f` for every generation-`n` cube `K`, in index order.
    pub fn cube_integrals(&self, n: u32) -> Result<Vec<f64>> {
        if n > self.m {
            return Err(Error::Resolution(format!(
                "generation {n} finer than field resolution {}",
                self.m
            )));
        }
        let width = 1usize << ((self.m - n) as usize * self.d);
        let vol = (-((self.m as usize * self.d) as f64)).exp2();
        Ok(block_sums(&self.cells, width)
            .into_iter()
            .map(|s| s * vol)
            .collect())
    }

    /// Average of `f` over a dyadic cube no finer than the sampling grid.
    pub fn cube_average(&self, c: &CubeId) -> Result<f64> {
        if c.dim() != self.d || c.generation() > self.m {
            return Err(Error::Resolution(format!(
                "cube {c:?} incompatible with field of resolution {}",
                self.m
            )));
        }
        let r = c.descendant_range(self.m);
        let s = &self.cells[r.start as usize..r.end as usize];
        Ok(pairwise_sum(s) / s.len() as f64)
    }

    /// Multilinear interpolation between cell centres.
    pub fn point(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.d);
        let side = self.side_cells();
        if side == 1 {
            return self.cells[0];
        }
        let mut base = vec![0u64; self.d];
        let mut w = vec![0.0; self.d];
        for i in 0..self.d {
            let t = x[i].clamp(0.0, 1.0) * side as f64 - 0.5;
            let i0 = (t.floor().max(0.0) as usize).min(side - 2);
            base[i] = i0 as u64;
            w[i] = t - i0 as f64;
        }
        let mut acc = 0.0;
        let mut c = vec![0u64; self.d];
        for corner in 0..1usize << self.d {
            let mut weight = 1.0;
            for i in 0..self.d {
                let up = (corner >> i) & 1 == 1;
                c[i] = base[i] + up as u64;
                weight *= if up { w[i] } else { 1.0 - w[i] };
            }
            if weight != 0.0 {
                acc += weight * self.cells[crate::dyadic::interleave(&c, self.m) as usize];
            }
        }
        acc
    }

    /// Upper estimate of `|f(x) - interpolant(x)|` and of the gap between
    /// point values and cell averages, from the Hölder constant.
    pub fn point_error_bound(&self) -> f64 {
        let diam = (self.d as f64).sqrt() * self.cell_width();
        2.0 * self.lip * (2.0 * diam).powf(self.beta)
    }

    /// Sup over dyadic offsets (axis-aligned and diagonal) of
    /// `|Δ cell average| / distance^β`.
    pub fn estimate_lip(&self) -> f64 {
        let d = self.d;
        let side = self.side_cells();
        if side == 1 {
            return 0.0;
        }
        let grid = self.row_major();
        let h = self.cell_width();
        let mut dirs: Vec<Vec<i64>> = (0..d)
            .map(|i| (0..d).map(|j| (i == j) as i64).collect())
            .collect();
        if d > 1 {
            for signs in 0..1usize << (d - 1) {
                dirs.push(
                    (0..d)
                        .map(|j| if j > 0 && (signs >> (j - 1)) & 1 == 1 { -1 } else { 1 })
                        .collect(),
                );
            }
        }
        let mut jobs = Vec::new();
        let mut step = 1usize;
        while step < side {
            for dir in &dirs {
                jobs.push((step, dir));
            }
            step *= 2;
        }
        let strides: Vec<usize> = (0..d).map(|i| side.pow(i as u32)).collect();
        jobs.par_iter()
            .map(|&(step, dir)| {
                let norm2: i64 = dir.iter().map(|v| v * v).sum();
                let dist = (norm2 as f64).sqrt() * step as f64 * h;
                let scale = dist.powf(-self.beta);
                let mut best = 0.0f64;
                let mut c = vec![0usize; d];
                for (p, &v) in grid.iter().enumerate() {
                    let mut rem = p;
                    for i in 0..d {
                        c[i] = rem % side;
                        rem /= side;
                    }
                    let mut q = 0usize;
                    let mut inside = true;
                    for i in 0..d {
                        let t = c[i] as i64 + dir[i] * step as i64;
                        if t < 0 || t >= side as i64 {
                            inside = false;
                            break;
                        }
                        q += t as usize * strides[i];
                    }
                    if inside {
                        best = best.max((grid[q] - v).abs());
                    }
                }
                best * scale
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Values at the `(2^M + 1)^d` grid nodes.
    pub fn node_grid(&self) -> NodeGrid {
        let side = self.side_cells();
        let mut cur = self.row_major();
        let mut dims = vec![side; self.d];
        for axis in 0..self.d {
            cur = expand_axis(&cur, &dims, axis);
            dims[axis] = side + 1;
        }
        NodeGrid {
            d: self.d,
            m: self.m,
            values: cur,
        }
    }

    /// Trace of `f` on a face of the cube `k`, rescaled to `[0,1]^{d-1}`.
    ///
    /// The face is orthogonal to `axis`; `upper` selects the side. The trace
    /// is taken from the interpolant, so slicing along distinct axes commutes.
    pub fn face_slice(&self, axis: usize, upper: bool, k: &CubeId) -> Result<SampledField> {
        if self.d < 2 {
            return Err(Error::Dimension(0));
        }
        if axis >= self.d || k.dim() != self.d {
            return Err(Error::Mismatch(format!("axis {axis} for dimension {}", self.d)));
        }
        if k.generation() > self.m {
            return Err(Error::Resolution(format!(
                "face of generation-{} cube is off the sampling grid of resolution {}",
                k.generation(),
                self.m
            )));
        }
        let side = self.side_cells();
        let grid = self.row_major();
        let dims = vec![side; self.d];
        let node = if upper { k.coords()[axis] + 1 } else { k.coords()[axis] } as usize
            * (side >> k.generation());
        let trace = trace_axis(&grid, &dims, axis, node);
        let sub = self.m - k.generation();
        let span = 1usize << sub;
        let lo: Vec<usize> = k
            .coords()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != axis)
            .map(|(_, &c)| c as usize * span)
            .collect();
        let dd = self.d - 1;
        let mut out = vec![0.0; span.pow(dd as u32)];
        for (p, v) in out.iter_mut().enumerate() {
            let mut rem = p;
            let mut q = 0;
            let mut stride = 1;
            for l in &lo {
                q += (l + rem % span) * stride;
                rem /= span;
                stride *= side;
            }
            *v = trace[q];
        }
        SampledField::from_row_major(dd, sub, self.beta, &out)
    }

    /// Pointwise linear combination `a f + b g` of cell averages.
    pub fn combine(&self, a: f64, other: &SampledField, b: f64) -> Result<SampledField> {
        if self.d != other.d || self.m != other.m {
            return Err(Error::Mismatch("fields on different grids".into()));
        }
        let cells = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(x, y)| a * x + b * y)
            .collect();
        SampledField::from_cells(self.d, self.m, self.beta.min(other.beta), cells)
    }

    pub fn scale(&self, c: f64) -> SampledField {
        SampledField {
            d: self.d,
            m: self.m,
            cells: self.cells.iter().map(|v| c * v).collect(),
            beta: self.beta,
            lip: self.lip * c.abs(),
        }
    }
}

/// Node values along `axis` from centre values, for a row-major array.
fn expand_axis(src: &[f64], dims: &[usize], axis: usize) -> Vec<f64> {
    let n = dims[axis];
    let inner: usize = dims[..axis].iter().product();
    let outer: usize = dims[axis + 1..].iter().product();
    let mut out = vec![0.0; inner * (n + 1) * outer];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| src[i + inner * (j + n * o)];
            for j in 0..=n {
                let v = if n == 1 {
                    at(0)
                } else if j == 0 {
                    1.5 * at(0) - 0.5 * at(1)
                } else if j == n {
                    1.5 * at(n - 1) - 0.5 * at(n - 2)
                } else {
                    0.5 * (at(j - 1) + at(j))
                };
                out[i + inner * (j + (n + 1) * o)] = v;
            }
        }
    }
    out
}

/// Centre values on the hyperplane through node `node` orthogonal to `axis`.
fn trace_axis(src: &[f64], dims: &[usize], axis: usize, node: usize) -> Vec<f64> {
    let n = dims[axis];
    let inner: usize = dims[..axis].iter().product();
    let outer: usize = dims[axis + 1..].iter().product();
    let mut out = vec![0.0; inner * outer];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| src[i + inner * (j + n * o)];
            out[i + inner * o] = if n == 1 {
                at(0)
            } else if node == 0 {
                1.5 * at(0) - 0.5 * at(1)
            } else if node == n {
                1.5 * at(n - 1) - 0.5 * at(n - 2)
            } else {
                0.5 * (at(node - 1) + at(node))
            };
        }
    }
    out
}

/// Values on the `(2^M + 1)^d` nodes of the generation-`M` grid, row-major
/// with axis 0 fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGrid {
    d: usize,
    m: u32,
    values: Vec<f64>,
}

impl NodeGrid {
    pub fn new(d: usize, m: u32, values: Vec<f64>) -> Result<Self> {
        let side = (1usize << m) + 1;
        if values.len() != side.pow(d as u32) {
            return Err(Error::Resolution(format!(
                "expected {} node values, got {}",
                side.pow(d as u32),
                values.len()
            )));
        }
        Ok(NodeGrid { d, m, values })
    }

    /// Exact node values of `f`.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(d: usize, m: u32, f: F) -> Self {
        let side = (1usize << m) + 1;
        let h = (-(m as f64)).exp2();
        let mut x = vec![0.0; d];
        let values = (0..side.pow(d as u32))
            .map(|p| {
                let mut rem = p;
                for xi in x.iter_mut() {
                    *xi = (rem % side) as f64 * h;
                    rem /= side;
                }
                f(&x)
            })
            .collect();
        NodeGrid { d, m, values }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> u32 {
        self.m
    }

    pub fn side(&self) -> usize {
        (1 << self.m) + 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        let side = self.side();
        let p = idx.iter().rev().fold(0, |acc, &i| acc * side + i);
        self.values[p]
    }

    /// Restriction to the hyperplane `x_axis = node * 2^{-M}`.
    pub fn slice(&self, axis: usize, node: usize) -> NodeGrid {
        assert!(axis < self.d && node < self.side());
        let side = self.side();
        let inner = side.pow(axis as u32);
        let outer = side.pow((self.d - 1 - axis) as u32);
        let mut values = Vec::with_capacity(inner * outer);
        for o in 0..outer {
            let start = inner * (node + side * o);
            values.extend_from_slice(&self.values[start..start + inner]);
        }
        NodeGrid {
            d: self.d - 1,
            m: self.m,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_cell_averages_and_points_exact() {
        let f = SampledField::from_fn(2, 4, 1.0, |x| 1.0 + 2.0 * x[0] - 3.0 * x[1]).unwrap();
        for x in [[0.0, 0.0], [1.0, 1.0], [0.3, 0.71], [0.99, 0.01]] {
            let want = 1.0 + 2.0 * x[0] - 3.0 * x[1];
            assert!((f.point(&x) - want).abs() < 1e-12);
        }
        assert!((f.integral() - 0.5).abs() < 1e-14);
        // Lipschitz constant of an affine map is its gradient norm
        assert!((f.lip() - 13f64.sqrt()).abs() < 1e-9 || f.lip() <= 13f64.sqrt() + 1e-9);
        let g = f.node_grid();
        assert_eq!(g.side(), 17);
        assert!((g.at(&[16, 0]) - 3.0).abs() < 1e-12);
        assert!((g.at(&[0, 16]) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_rule_exact_for_cubics() {
        let f = SampledField::from_fn(1, 2, 1.0, |x| x[0].powi(3)).unwrap();
        // ∫_{1/4}^{1/2} x^3 = (1/16 - 1/256)/4
        let want = (1.0 / 16.0 - 1.0 / 256.0) / 4.0 * 4.0;
        assert!((f.cells()[1] - want).abs() < 1e-15);
    }

    #[test]
    fn cube_integrals_density() {
        let g = SampledField::from_fn(1, 6, 1.0, |x| 2.0 * x[0]).unwrap();
        let ints = g.cube_integrals(2).unwrap();
        assert!((ints[1] - 3.0 / 16.0).abs() < 1e-15);
        assert!(g.cube_integrals(7).is_err());
    }

    #[test]
    fn slice_commutes_and_matches_examples() {
        let f = SampledField::from_fn(2, 3, 1.0, |x| x[0] + x[1]).unwrap();
        let s = f.face_slice(1, false, &CubeId::root(2)).unwrap();
        let x = SampledField::from_fn(1, 3, 1.0, |x| x[0]).unwrap();
        for (a, b) in s.cells().iter().zip(x.cells()) {
            assert!((a - b).abs() < 1e-14);
        }
        let c = SampledField::constant(2, 3, 4.0).unwrap();
        let sc = c.face_slice(0, true, &CubeId::new(2, 1, 2).unwrap()).unwrap();
        assert!(sc.cells().iter().all(|&v| v == 4.0));
        let g3 = SampledField::from_fn(3, 3, 1.0, |x| (x[0] * 3.0).sin() * x[1] + x[2].powi(2)).unwrap();
        let k = CubeId::root(3);
        // axis 0 then the former axis 2 (now 1), versus axis 2 then axis 0
        let ab = g3.face_slice(0, true, &k).unwrap();
        let ab = ab.face_slice(1, false, &CubeId::root(2)).unwrap();
        let ba = g3.face_slice(2, false, &k).unwrap();
        let ba = ba.face_slice(0, true, &CubeId::root(2)).unwrap();
        for (a, b) in ab.cells().iter().zip(ba.cells()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(g3.face_slice(0, true, &CubeId::new(3, 4, 0).unwrap()).is_err());
    }

    #[test]
    fn node_slices_commute_exactly() {
        let g = NodeGrid::from_fn(3, 2, |x| x[0] * 7.0 + x[1] * x[2] - x[0] * x[2]);
        for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
            for i in 0..g.side() {
                for j in 0..g.side() {
                    let ab = g.slice(b, j).slice(a, i);
                    let ba = g.slice(a, i).slice(b - 1, j);
                    assert_eq!(ab, ba);
                }
            }
        }
    }

    #[test]
    fn node_grid_matches_point_interpolation() {
        let f = SampledField::from_fn(2, 3, 0.5, |x| (x[0] * x[1]).sqrt()).unwrap();
        let g = f.node_grid();
        for i in 0..g.side() {
            for j in 0..g.side() {
                let x = [i as f64 / 8.0, j as f64 / 8.0];
                assert!((g.at(&[i, j]) - f.point(&x)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn holder_estimate_sqrt() {
        let f = SampledField::from_fn(1, 10, 0.5, |x| x[0].sqrt()).unwrap();
        assert!(f.lip() > 0.5 && f.lip() <= 1.0 + 1e-9, "lip {}", f.lip());
        assert_eq!(SampledField::constant(2, 3, 1.0).unwrap().lip(), 0.0);
    }

    #[test]
    fn validation() {
        assert!(SampledField::from_cells(1, 2, 0.5, vec![0.0; 3]).is_err());
        assert!(SampledField::from_cells(1, 2, 1.5, vec![0.0; 4]).is_err());
        assert!(SampledField::from_cells(1, 2, 0.5, vec![f64::NAN; 4]).is_err());
    }
}
