//! Dyadic cubes, Haar matrices and dyadic figures.
//!
//! A cube of generation `n` in `[0,1]^d` is addressed by an index `k` in
//! `0..2^(n d)`. The index is read as `n` base-`2^d` digits, most significant
//! first; the digit of refinement step `j` has `d` bits and bit `i` selects the
//! upper half along axis `i`. The children of `(n, k)` are therefore the
//! contiguous indices `2^d k .. 2^d k + 2^d - 1` of generation `n + 1`, and the
//! descendants of any cube at a finer generation form one contiguous block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 6;

/// Largest `n * d` for which cube indices are representable.
pub const MAX_INDEX_BITS: u32 = 62;

pub fn check_dim(d: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(Error::Dimension(d))
    }
}

/// Interleaves per-axis integer coordinates of a generation-`n` cube into its index.
pub fn interleave(coords: &[u64], n: u32) -> u64 {
    let d = coords.len();
    let mut k = 0u64;
    for b in 0..n as usize {
        for (i, &c) in coords.iter().enumerate() {
            k |= ((c >> b) & 1) << (b * d + i);
        }
    }
    k
}

/// Inverse of [`interleave`].
pub fn deinterleave(k: u64, n: u32, coords: &mut [u64]) {
    let d = coords.len();
    coords.iter_mut().for_each(|c| *c = 0);
    for b in 0..n as usize {
        for (i, c) in coords.iter_mut().enumerate() {
            *c |= ((k >> (b * d + i)) & 1) << b;
        }
    }
}

/// Row-major position (axis 0 fastest) of every generation-`n` cube, in index order.
pub fn index_to_row_major(d: usize, n: u32) -> Vec<usize> {
    let side = 1usize << n;
    let count = 1usize << (n as usize * d);
    let mut coords = vec![0u64; d];
    (0..count as u64)
        .map(|k| {
            deinterleave(k, n, &mut coords);
            coords
                .iter()
                .rev()
                .fold(0usize, |acc, &c| acc * side + c as usize)
        })
        .collect()
}

/// Address of a dyadic cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeId {
    d: usize,
    n: u32,
    k: u64,
}

impl CubeId {
    pub fn new(d: usize, n: u32, k: u64) -> Result<Self> {
        check_dim(d)?;
        if n as usize * d > MAX_INDEX_BITS as usize {
            return Err(Error::InvalidCube(format!(
                "generation {n} too deep for dimension {d}"
            )));
        }
        if k >= 1u64 << (n as usize * d) {
            return Err(Error::InvalidCube(format!(
                "index {k} out of range for generation {n}, dimension {d}"
            )));
        }
        Ok(CubeId { d, n, k })
    }

    pub fn root(d: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&d));
        CubeId { d, n: 0, k: 0 }
    }

    /// Cube of generation `n` with the given per-axis integer coordinates.
    pub fn from_coords(n: u32, coords: &[u64]) -> Result<Self> {
        let d = coords.len();
        check_dim(d)?;
        if let Some(c) = coords.iter().find(|&&c| c >= 1u64 << n) {
            return Err(Error::InvalidCube(format!(
                "coordinate {c} out of range for generation {n}"
            )));
        }
        CubeId::new(d, n, interleave(coords, n))
    }

    /// Smallest dyadic cube with exactly these bounds, if the bounds describe one.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let side = bounds
            .first()
            .map(|b| b.1 - b.0)
            .ok_or_else(|| Error::InvalidCube("empty bounds".into()))?;
        if !(side > 0.0) || side > 1.0 {
            return Err(Error::InvalidCube(format!("side {side} is not dyadic")));
        }
        let n = (-side.log2()).round();
        if (n.exp2() * side - 1.0).abs() > 0.0 || n as u32 > MAX_INDEX_BITS {
            return Err(Error::InvalidCube(format!("side {side} is not dyadic")));
        }
        let n = n as u32;
        let scale = (n as f64).exp2();
        let mut coords = Vec::with_capacity(bounds.len());
        for &(lo, hi) in bounds {
            let c = lo * scale;
            if (hi - lo) != side || c.fract() != 0.0 || c < 0.0 || c >= scale {
                return Err(Error::InvalidCube(format!(
                    "[{lo}, {hi}] is not a generation-{n} dyadic interval"
                )));
            }
            coords.push(c as u64);
        }
        CubeId::from_coords(n, &coords)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn generation(&self) -> u32 {
        self.n
    }

    pub fn index(&self) -> u64 {
        self.k
    }

    pub fn coords(&self) -> Vec<u64> {
        let mut c = vec![0; self.d];
        deinterleave(self.k, self.n, &mut c);
        c
    }

    pub fn children(&self) -> Vec<CubeId> {
        let m = 1u64 << self.d;
        (0..m)
            .map(|l| CubeId {
                d: self.d,
                n: self.n + 1,
                k: m * self.k + l,
            })
            .collect()
    }

    pub fn parent(&self) -> Option<CubeId> {
        (self.n > 0).then(|| CubeId {
            d: self.d,
            n: self.n - 1,
            k: self.k >> self.d,
        })
    }

    /// Index range of the descendants of this cube at generation `m >= n`.
    pub fn descendant_range(&self, m: u32) -> std::ops::Range<u64> {
        assert!(m >= self.n);
        let shift = (m - self.n) as usize * self.d;
        (self.k << shift)..((self.k + 1) << shift)
    }

    /// True when `other` is contained in `self` (possibly equal).
    pub fn contains_cube(&self, other: &CubeId) -> bool {
        other.d == self.d
            && other.n >= self.n
            && (other.k >> ((other.n - self.n) as usize * self.d)) == self.k
    }

    pub fn side(&self) -> f64 {
        (-(self.n as f64)).exp2()
    }

    pub fn volume(&self) -> f64 {
        (-((self.n as usize * self.d) as f64)).exp2()
    }

    pub fn diameter(&self) -> f64 {
        (self.d as f64).sqrt() * self.side()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let s = self.side();
        self.coords()
            .into_iter()
            .map(|c| (c as f64 * s, (c + 1) as f64 * s))
            .collect()
    }

    pub fn lower_corner(&self) -> Vec<f64> {
        let s = self.side();
        self.coords().into_iter().map(|c| c as f64 * s).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        let s = self.side();
        self.coords()
            .into_iter()
            .map(|c| (c as f64 + 0.5) * s)
            .collect()
    }

    /// Membership with lower-closed cells; the upper face of `[0,1]^d` is closed.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.d
            && locate(x, self.n)
                .map(|c| interleave(&c, self.n) == self.k)
                .unwrap_or(false)
    }

    /// Child number (`0..2^d`) of the child containing `x`.
    pub fn child_containing(&self, x: &[f64]) -> Option<usize> {
        if !self.contains_point(x) {
            return None;
        }
        let fine = locate(x, self.n + 1)?;
        Some(
            fine.iter()
                .enumerate()
                .map(|(i, &c)| ((c & 1) as usize) << i)
                .sum(),
        )
    }
}

/// Integer coordinates of the generation-`n` cube containing `x` under the
/// lower-closed convention, or `None` when `x` is outside `[0,1]^d`.
pub fn locate(x: &[f64], n: u32) -> Option<Vec<u64>> {
    let side = 1u64 << n;
    x.iter()
        .map(|&xi| {
            if !(0.0..=1.0).contains(&xi) {
                None
            } else {
                Some(((xi * side as f64).floor() as u64).min(side - 1))
            }
        })
        .collect()
}

/// The `2^d x 2^d` Haar matrix with entries `±1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaarMatrix {
    d: usize,
    entries: Vec<i8>,
}

impl HaarMatrix {
    /// Builds `A_d` by the block recursion `A_{d+1} = [[A_d, A_d], [A_d, -A_d]]`.
    pub fn new(d: usize) -> Result<Self> {
        check_dim(d)?;
        let mut entries = vec![1i8, 1, 1, -1];
        let mut size = 2;
        for _ in 1..d {
            let next = size * 2;
            let mut grown = vec![0i8; next * next];
            for r in 0..size {
                for c in 0..size {
                    let v = entries[r * size + c];
                    grown[r * next + c] = v;
                    grown[r * next + c + size] = v;
                    grown[(r + size) * next + c] = v;
                    grown[(r + size) * next + c + size] = -v;
                }
            }
            entries = grown;
            size = next;
        }
        Ok(HaarMatrix { d, entries })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        1 << self.d
    }

    pub fn entry(&self, r: usize, l: usize) -> i8 {
        self.entries[r * self.order() + l]
    }

    pub fn row(&self, r: usize) -> &[i8] {
        let m = self.order();
        &self.entries[r * m..(r + 1) * m]
    }

    /// Matrix product with another matrix of the same order, in exact integers.
    pub fn square(&self) -> Vec<i64> {
        let m = self.order();
        let mut out = vec![0i64; m * m];
        for r in 0..m {
            for c in 0..m {
                out[r * m + c] = (0..m)
                    .map(|l| self.entry(r, l) as i64 * self.entry(l, c) as i64)
                    .sum();
            }
        }
        out
    }
}

/// In-place multiplication by `A_d` (fast Walsh-Hadamard butterflies).
///
/// The butterfly over bit `j` realizes one level of the block recursion, so
/// the result equals the dense product with [`HaarMatrix`].
pub fn apply_haar(v: &mut [f64]) {
    let m = v.len();
    debug_assert!(m.is_power_of_two());
    let mut h = 1;
    while h < m {
        for block in (0..m).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Haar function `g_{n,k,r}` evaluated at `x`.
pub fn haar_value(cube: &CubeId, r: usize, x: &[f64]) -> Result<f64> {
    let m = 1usize << cube.dim();
    if r == 0 || r >= m {
        return Err(Error::InvalidCube(format!(
            "type index {r} outside 1..{}",
            m - 1
        )));
    }
    let Some(l) = cube.child_containing(x) else {
        return Ok(0.0);
    };
    let sign = if (r & l).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    let scale = ((cube.generation() as usize * cube.dim()) as f64 / 2.0).exp2();
    Ok(scale * sign)
}

/// A finite union of dyadic cubes, stored as sorted generation-`res` cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicFigure {
    d: usize,
    res: u32,
    cells: Vec<u64>,
}

/// Geometric measures of a dyadic figure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FigureMeasures {
    pub cell_count: u64,
    pub exposed_faces: u64,
    pub volume: f64,
    pub perimeter: f64,
    pub diameter: f64,
    /// `|F|^{(d-1)/d} / ||F||`; `None` for the empty figure.
    pub isop: Option<f64>,
    /// `|F| / (||F|| diam F)`; `None` for the empty figure.
    pub reg: Option<f64>,
}

impl DyadicFigure {
    pub fn new(d: usize, res: u32, cells: impl IntoIterator<Item = u64>) -> Result<Self> {
        check_dim(d)?;
        if res as usize * d > MAX_INDEX_BITS as usize {
            return Err(Error::Figure(format!("resolution {res} too fine")));
        }
        let limit = 1u64 << (res as usize * d);
        let mut cells: Vec<u64> = cells.into_iter().collect();
        if let Some(bad) = cells.iter().find(|&&c| c >= limit) {
            return Err(Error::Figure(format!(
                "cell {bad} out of range at resolution {res}"
            )));
        }
        cells.sort_unstable();
        let before = cells.len();
        cells.dedup();
        if cells.len() != before {
            return Err(Error::Figure("duplicate cells".into()));
        }
        Ok(DyadicFigure { d, res, cells })
    }

    pub fn empty(d: usize, res: u32) -> Result<Self> {
        Self::new(d, res, std::iter::empty())
    }

    pub fn full(d: usize, res: u32) -> Result<Self> {
        check_dim(d)?;
        Self::new(d, res, 0..1u64 << (res as usize * d))
    }

    /// Union of the given cubes, expanded to leaves at resolution `res`.
    pub fn from_cubes(d: usize, res: u32, cubes: &[CubeId]) -> Result<Self> {
        let mut cells = Vec::new();
        for c in cubes {
            if c.dim() != d || c.generation() > res {
                return Err(Error::Figure(format!(
                    "cube {c:?} does not fit resolution {res} in dimension {d}"
                )));
            }
            cells.extend(c.descendant_range(res));
        }
        cells.sort_unstable();
        cells.dedup();
        Self::new(d, res, cells)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> u32 {
        self.res
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains_cell(&self, k: u64) -> bool {
        self.cells.binary_search(&k).is_ok()
    }

    /// The same set described at a finer resolution.
    pub fn refine(&self, res: u32) -> Result<Self> {
        if res < self.res {
            return Err(Error::Figure(format!(
                "cannot coarsen from {} to {res}",
                self.res
            )));
        }
        let shift = (res - self.res) as usize * self.d;
        Self::new(
            self.d,
            res,
            self.cells
                .iter()
                .flat_map(|&c| (c << shift)..((c + 1) << shift)),
        )
    }

    fn aligned(&self, other: &Self) -> Result<(Self, Self)> {
        if self.d != other.d {
            return Err(Error::Mismatch("figure dimensions differ".into()));
        }
        let res = self.res.max(other.res);
        Ok((self.refine(res)?, other.refine(res)?))
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        let (a, b) = self.aligned(other)?;
        let mut cells = a.cells;
        cells.extend(b.cells);
        cells.sort_unstable();
        cells.dedup();
        Self::new(a.d, a.res, cells)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        let (a, b) = self.aligned(other)?;
        Self::new(
            a.d,
            a.res,
            a.cells.into_iter().filter(|c| b.contains_cell(*c)),
        )
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        let (a, b) = self.aligned(other)?;
        Self::new(
            a.d,
            a.res,
            a.cells.into_iter().filter(|c| !b.contains_cell(*c)),
        )
    }

    /// Counts faces of cells whose neighbor across the face is not in the figure.
    pub fn exposed_faces(&self) -> u64 {
        self.boundary_cells().1
    }

    /// Cells with at least one exposed face, and the total exposed-face count.
    fn boundary_cells(&self) -> (Vec<Vec<u64>>, u64) {
        let side = 1u64 << self.res;
        let mut coords = vec![0u64; self.d];
        let mut neighbor = vec![0u64; self.d];
        let mut exposed = 0u64;
        let mut boundary = Vec::new();
        for &k in &self.cells {
            deinterleave(k, self.res, &mut coords);
            let mut count = 0;
            for axis in 0..self.d {
                for up in [false, true] {
                    let c = coords[axis];
                    let inside = if up { c + 1 < side } else { c > 0 };
                    let present = inside && {
                        neighbor.copy_from_slice(&coords);
                        neighbor[axis] = if up { c + 1 } else { c - 1 };
                        self.contains_cell(interleave(&neighbor, self.res))
                    };
                    if !present {
                        count += 1;
                    }
                }
            }
            if count > 0 {
                boundary.push(coords.clone());
            }
            exposed += count;
        }
        (boundary, exposed)
    }

    pub fn measures(&self) -> FigureMeasures {
        let d = self.d;
        let h = (-(self.res as f64)).exp2();
        let cell_count = self.cells.len() as u64;
        let (boundary, exposed_faces) = self.boundary_cells();
        let volume = cell_count as f64 * (-((self.res as usize * d) as f64)).exp2();
        let perimeter = exposed_faces as f64 * (-((self.res as usize * (d - 1)) as f64)).exp2();
        // Farthest corners belong to cells with an exposed face.
        let mut best = 0u64;
        for (i, a) in boundary.iter().enumerate() {
            for b in &boundary[i..] {
                let s: u64 = a
                    .iter()
                    .zip(b)
                    .map(|(&x, &y)| {
                        let t = x.abs_diff(y) + 1;
                        t * t
                    })
                    .sum();
                best = best.max(s);
            }
        }
        let diameter = (best as f64).sqrt() * h;
        let (isop, reg) = if cell_count == 0 {
            (None, None)
        } else {
            (
                Some(volume.powf((d as f64 - 1.0) / d as f64) / perimeter),
                Some(volume / (perimeter * diameter)),
            )
        };
        FigureMeasures {
            cell_count,
            exposed_faces,
            volume,
            perimeter,
            diameter,
            isop,
            reg,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn haar_matrix_small_cases() {
        let a1 = HaarMatrix::new(1).unwrap();
        assert_eq!(a1.entries, vec![1, 1, 1, -1]);
        let a2 = HaarMatrix::new(2).unwrap();
        assert_eq!(
            a2.entries,
            vec![1, 1, 1, 1, 1, -1, 1, -1, 1, 1, -1, -1, 1, -1, -1, 1]
        );
        let sq = HaarMatrix::new(3).unwrap().square();
        for r in 0..8 {
            for c in 0..8 {
                assert_eq!(sq[r * 8 + c], if r == c { 8 } else { 0 });
            }
        }
        assert!(HaarMatrix::new(0).is_err());
        assert!(HaarMatrix::new(7).is_err());
    }

    #[test]
    fn haar_matrix_is_sylvester() {
        for d in 1..=6 {
            let a = HaarMatrix::new(d).unwrap();
            for r in 0..a.order() {
                for l in 0..a.order() {
                    let expect = if (r & l).count_ones().is_multiple_of(2) { 1 } else { -1 };
                    assert_eq!(a.entry(r, l), expect);
                }
            }
        }
    }

    #[test]
    fn butterflies_match_dense_product() {
        for d in 1..=4 {
            let a = HaarMatrix::new(d).unwrap();
            let m = a.order();
            let x: Vec<f64> = (0..m).map(|i| (i * i) as f64 - 3.0).collect();
            let mut y = x.clone();
            apply_haar(&mut y);
            for r in 0..m {
                let dense: f64 = (0..m).map(|l| a.entry(r, l) as f64 * x[l]).sum();
                assert_eq!(y[r], dense);
            }
        }
    }

    #[test]
    fn children_examples() {
        let c = CubeId::root(2);
        let ks: Vec<u64> = c.children().iter().map(|c| c.index()).collect();
        assert_eq!(ks, vec![0, 1, 2, 3]);
        assert!(c.children().iter().all(|c| c.generation() == 1));
        let c = CubeId::new(1, 1, 1).unwrap();
        let ks: Vec<u64> = c.children().iter().map(|c| c.index()).collect();
        assert_eq!(ks, vec![2, 3]);
    }

    #[test]
    fn bounds_examples() {
        assert_eq!(CubeId::new(1, 2, 1).unwrap().bounds(), vec![(0.25, 0.5)]);
        assert_eq!(
            CubeId::new(2, 1, 0).unwrap().bounds(),
            vec![(0.0, 0.5), (0.0, 0.5)]
        );
        assert_eq!(
            CubeId::new(2, 1, 3).unwrap().bounds(),
            vec![(0.5, 1.0), (0.5, 1.0)]
        );
        // bit 0 of the digit is axis 0
        assert_eq!(
            CubeId::new(2, 1, 1).unwrap().bounds(),
            vec![(0.5, 1.0), (0.0, 0.5)]
        );
        let c = CubeId::new(3, 2, 37).unwrap();
        assert_eq!(c.side(), 0.25);
        assert_eq!(c.volume(), 1.0 / 64.0);
        assert!((c.diameter() - 3f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_cubes_rejected() {
        assert!(CubeId::new(2, 1, 4).is_err());
        assert!(CubeId::new(0, 1, 0).is_err());
        assert!(CubeId::from_coords(2, &[4, 0]).is_err());
        assert!(CubeId::from_bounds(&[(0.0, 0.3)]).is_err());
        assert!(CubeId::from_bounds(&[(0.0, 0.5), (0.0, 0.25)]).is_err());
    }

    #[test]
    fn haar_value_examples() {
        let root = CubeId::root(2);
        assert_eq!(haar_value(&root, 1, &[0.1, 0.1]).unwrap(), 1.0);
        assert_eq!(haar_value(&root, 1, &[0.6, 0.1]).unwrap(), -1.0);
        assert_eq!(haar_value(&root, 3, &[0.6, 0.1]).unwrap(), -1.0);
        assert_eq!(haar_value(&root, 3, &[0.6, 0.6]).unwrap(), 1.0);
        assert!(haar_value(&root, 0, &[0.1, 0.1]).is_err());
        assert!(haar_value(&root, 4, &[0.1, 0.1]).is_err());
        let c = CubeId::new(2, 1, 0).unwrap();
        assert_eq!(haar_value(&c, 1, &[0.7, 0.7]).unwrap(), 0.0);
        assert_eq!(haar_value(&c, 1, &[0.1, 0.1]).unwrap(), 2.0);
        // boundary ties: lower-closed
        assert_eq!(haar_value(&root, 1, &[0.5, 0.2]).unwrap(), -1.0);
    }

    /// Integrates `g_{n,k,r} * g_{n,k,s}` by the midpoint rule on a grid two
    /// generations finer than the cube, which is exact for these step functions.
    fn haar_inner(cube: &CubeId, r: usize, s: usize) -> (f64, f64) {
        let d = cube.dim();
        let res = cube.generation() + 2;
        let h = (-(res as f64)).exp2();
        let count = 1u64 << (res as usize * d);
        let mut coords = vec![0; d];
        let (mut mean, mut prod) = (0.0, 0.0);
        for k in 0..count {
            deinterleave(k, res, &mut coords);
            let x: Vec<f64> = coords.iter().map(|&c| (c as f64 + 0.5) * h).collect();
            let a = haar_value(cube, r, &x).unwrap();
            let b = haar_value(cube, s, &x).unwrap();
            mean += a * h.powi(d as i32);
            prod += a * b * h.powi(d as i32);
        }
        (mean, prod)
    }

    #[test]
    fn haar_functions_orthonormal() {
        for d in 1..=3 {
            for cube in [CubeId::root(d), CubeId::new(d, 1, 1).unwrap()] {
                for r in 1..1 << d {
                    for s in 1..1 << d {
                        let (mean, prod) = haar_inner(&cube, r, s);
                        assert!(mean.abs() < 1e-12);
                        let expect = if r == s { 1.0 } else { 0.0 };
                        assert!((prod - expect).abs() < 1e-12, "d={d} r={r} s={s}");
                    }
                }
            }
        }
    }

    #[test]
    fn figure_measures_examples() {
        for d in 1..=3 {
            let m = DyadicFigure::full(d, 2).unwrap().measures();
            assert_eq!(m.volume, 1.0);
            assert_eq!(m.perimeter, 2.0 * d as f64);
            assert!((m.isop.unwrap() - 1.0 / (2.0 * d as f64)).abs() < 1e-15);
        }
        for n in 0..5 {
            let f = DyadicFigure::new(2, n, [0]).unwrap();
            let m = f.measures();
            assert_eq!(m.volume, 4f64.powi(-(n as i32)));
            assert_eq!(m.perimeter, 4.0 * 2f64.powi(-(n as i32)));
            let reg = 1.0 / (2.0 * 2.0 * 2f64.sqrt());
            assert!((m.reg.unwrap() - reg).abs() < 1e-15);
        }
        let two = DyadicFigure::new(2, 1, [0, 1]).unwrap().measures();
        assert_eq!(two.volume, 0.5);
        assert_eq!(two.perimeter, 3.0);
        let empty = DyadicFigure::empty(2, 3).unwrap().measures();
        assert_eq!((empty.volume, empty.perimeter), (0.0, 0.0));
        assert!(empty.isop.is_none() && empty.reg.is_none());
    }

    #[test]
    fn diagonal_figure_diameter() {
        // two cells touching at a corner
        let f = DyadicFigure::new(2, 1, [0, 3]).unwrap();
        let m = f.measures();
        assert!((m.diameter - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.perimeter, 4.0);
    }

    #[test]
    fn division_regularity_is_constant() {
        for d in 1..=3usize {
            for n in 0..4 {
                let m = DyadicFigure::new(d, n, [0]).unwrap().measures();
                let expect = 1.0 / (2.0 * d as f64 * (d as f64).sqrt());
                assert!((m.reg.unwrap() - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn figure_validation() {
        assert!(DyadicFigure::new(2, 1, [4]).is_err());
        assert!(DyadicFigure::new(2, 1, [1, 1]).is_err());
        let c = CubeId::new(2, 1, 2).unwrap();
        let f = DyadicFigure::from_cubes(2, 3, &[c]).unwrap();
        assert_eq!(f.cells().len(), 16);
        assert_eq!(f.measures().volume, 0.25);
    }

    fn arb_cube() -> impl Strategy<Value = CubeId> {
        (1usize..=4, 0u32..6).prop_flat_map(|(d, n)| {
            (0u64..(1u64 << (n as usize * d))).prop_map(move |k| CubeId::new(d, n, k).unwrap())
        })
    }

    fn arb_figure() -> impl Strategy<Value = DyadicFigure> {
        (1usize..=3, 1u32..4).prop_flat_map(|(d, res)| {
            proptest::collection::btree_set(0u64..(1u64 << (res as usize * d)), 0..20)
                .prop_map(move |cells| DyadicFigure::new(d, res, cells).unwrap())
        })
    }

    proptest! {
        #[test]
        fn children_nested_and_contiguous(c in arb_cube()) {
            let kids = c.children();
            let pb = c.bounds();
            let mut vol = 0.0;
            for (l, kid) in kids.iter().enumerate() {
                prop_assert_eq!(kid.index(), (c.index() << c.dim()) + l as u64);
                prop_assert_eq!(kid.parent(), Some(c));
                prop_assert!(c.contains_cube(kid));
                for (a, b) in kid.bounds().iter().zip(&pb) {
                    prop_assert!(a.0 >= b.0 && a.1 <= b.1);
                }
                vol += kid.volume();
                prop_assert!(c.contains_point(&kid.center()));
            }
            prop_assert_eq!(vol, c.volume());
        }

        #[test]
        fn bounds_round_trip(c in arb_cube()) {
            prop_assert_eq!(CubeId::from_bounds(&c.bounds()).unwrap(), c);
            prop_assert_eq!(CubeId::from_coords(c.generation(), &c.coords()).unwrap(), c);
        }

        #[test]
        fn volume_additive_perimeter_subadditive(a in arb_figure(), seed in 0u64..1000) {
            let d = a.dim();
            let res = a.resolution();
            let count = 1u64 << (res as usize * d);
            let other = DyadicFigure::new(d, res, (0..count).filter(|c| (c * 7 + seed) % 5 == 0)).unwrap();
            let b = other.difference(&a).unwrap();
            let u = a.union(&b).unwrap();
            let (ma, mb, mu) = (a.measures(), b.measures(), u.measures());
            prop_assert_eq!(mu.volume, ma.volume + mb.volume);
            prop_assert!(mu.perimeter <= ma.perimeter + mb.perimeter);
        }
    }
}
