//! The charge `dg_1 ∧ ... ∧ dg_d` of a tuple of Hölder functions.
//!
//! In dimension one the charge of an interval is the increment of `g_1`. In
//! dimension `d` the charge of a cube is the signed sum over its `2d` faces of
//! the Young integral of `g_1` against the `(d-1)`-dimensional charge of the
//! remaining components restricted to the face. Face integrals are evaluated
//! at the sampling resolution with the trapezoid tag (mean of the corner
//! values of `g_1`), then aggregated to the requested depth.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::charge::{density_charge, GridCharge};
use crate::dyadic::{check_dim, deinterleave, interleave};
use crate::error::{Error, Result};
use crate::field::{NodeGrid, SampledField};
use crate::sum::{block_sums, pairwise_sum};

/// Largest dimension handled by [`wedge_charge`].
pub const MAX_WEDGE_DIM: usize = 3;

/// Components `g_1, ..., g_d` sampled on a common grid.
#[derive(Debug, Clone)]
pub struct FunctionTuple {
    components: Vec<SampledField>,
}

impl FunctionTuple {
    pub fn new(components: Vec<SampledField>) -> Result<Self> {
        let d = components.len();
        check_dim(d)?;
        let m = components[0].resolution();
        if components.iter().any(|g| g.dim() != d || g.resolution() != m) {
            return Err(Error::Mismatch(format!(
                "a {d}-tuple needs {d}-dimensional components on one grid"
            )));
        }
        Ok(FunctionTuple { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn resolution(&self) -> u32 {
        self.components[0].resolution()
    }

    pub fn components(&self) -> &[SampledField] {
        &self.components
    }

    /// Mean of the component exponents.
    pub fn gamma(&self) -> f64 {
        self.components.iter().map(|g| g.beta()).sum::<f64>() / self.dim() as f64
    }

    /// Product of the component Hölder constants.
    pub fn lip_product(&self) -> f64 {
        self.components.iter().map(|g| g.lip()).product()
    }

    pub fn swapped(&self, i: usize, j: usize) -> FunctionTuple {
        let mut c = self.components.clone();
        c.swap(i, j);
        FunctionTuple { components: c }
    }
}

type Memo = Mutex<HashMap<(Vec<(usize, usize)>, usize), Arc<Vec<f64>>>>;

struct Wedge<'a> {
    m: u32,
    memo: &'a Memo,
}

impl Wedge<'_> {
    /// Leaves at depth `n` of the wedge charge of `grids` (k components on a
    /// k-dimensional node grid). `axes` maps local axes to original ones and
    /// `fixed` records the hyperplanes already sliced.
    fn leaves(&self, grids: &[NodeGrid], n: u32, axes: &[usize], fixed: &[(usize, usize)]) -> Vec<f64> {
        let k = grids.len();
        let stride = 1usize << (self.m - n);
        if k == 1 {
            let g = &grids[0];
            return (0..1usize << n)
                .map(|i| g.values()[(i + 1) * stride] - g.values()[i * stride])
                .collect();
        }
        let side = (1usize << n) + 1;
        let faces: Vec<Vec<Vec<f64>>> = (0..k)
            .map(|a| {
                (0..side)
                    .into_par_iter()
                    .map(|j| self.face(grids, n, a, j * stride, axes, fixed))
                    .collect()
            })
            .collect();
        let mut coords = vec![0u64; k];
        let mut proj = vec![0u64; k - 1];
        (0..1u64 << (n as usize * k))
            .map(|leaf| {
                deinterleave(leaf, n, &mut coords);
                let mut terms = [0.0; 2 * MAX_WEDGE_DIM];
                for a in 0..k {
                    let mut t = 0;
                    for (i, &c) in coords.iter().enumerate() {
                        if i != a {
                            proj[t] = c;
                            t += 1;
                        }
                    }
                    let p = interleave(&proj, n) as usize;
                    for s in 0..2 {
                        let sign = if (a + 1 + s) % 2 == 0 { 1.0 } else { -1.0 };
                        terms[2 * a + s] = sign * faces[a][coords[a] as usize + s][p];
                    }
                }
                pairwise_sum(&terms[..2 * k])
            })
            .collect()
    }

    /// Face integrals over the generation-`n` cells of the hyperplane
    /// `x_a = node` (node index on the sampling grid).
    fn face(
        &self,
        grids: &[NodeGrid],
        n: u32,
        a: usize,
        node: usize,
        axes: &[usize],
        fixed: &[(usize, usize)],
    ) -> Vec<f64> {
        let k = grids.len();
        let sliced: Vec<NodeGrid> = grids.iter().map(|g| g.slice(a, node)).collect();
        let mut key_fixed = fixed.to_vec();
        key_fixed.push((axes[a], node));
        key_fixed.sort_unstable();
        let sub_axes: Vec<usize> = axes.iter().enumerate().filter(|&(i, _)| i != a).map(|(_, &x)| x).collect();
        let offset = MAX_WEDGE_DIM + 1 - k;
        let key = (key_fixed.clone(), offset);
        let cached = self.memo.lock().expect("memo lock").get(&key).cloned();
        let inner = match cached {
            Some(v) => v,
            None => {
                let v = Arc::new(self.leaves(&sliced[1..], self.m, &sub_axes, &key_fixed));
                self.memo.lock().expect("memo lock").entry(key).or_insert(v).clone()
            }
        };
        let g1 = &sliced[0];
        let dd = k - 1;
        let fine_side = 1usize << self.m;
        let node_side = fine_side + 1;
        let mut c = vec![0u64; dd];
        let fine: Vec<f64> = (0..inner.len())
            .map(|cell| {
                deinterleave(cell as u64, self.m, &mut c);
                let mut mean = 0.0;
                for corner in 0..1usize << dd {
                    let mut p = 0;
                    let mut s = 1;
                    for (i, &ci) in c.iter().enumerate() {
                        p += (ci as usize + ((corner >> i) & 1)) * s;
                        s *= node_side;
                    }
                    mean += g1.values()[p];
                }
                mean / (1usize << dd) as f64 * inner[cell]
            })
            .collect();
        block_sums(&fine, 1usize << ((self.m - n) as usize * dd))
    }
}

/// The charge `dg_1 ∧ ... ∧ dg_d` at depth `n`.
pub fn wedge_charge(g: &FunctionTuple, n: u32) -> Result<GridCharge> {
    let d = g.dim();
    if d > MAX_WEDGE_DIM {
        return Err(Error::Dimension(d));
    }
    let sum: f64 = g.components.iter().map(|c| c.beta()).sum();
    if sum <= d as f64 - 1.0 {
        return Err(Error::ExponentCondition(format!(
            "exponents sum to {sum}, need more than {}",
            d - 1
        )));
    }
    let m = g.resolution();
    if n > m {
        return Err(Error::Resolution(format!(
            "depth {n} exceeds component resolution {m}"
        )));
    }
    let grids: Vec<NodeGrid> = g.components.iter().map(|c| c.node_grid()).collect();
    let memo = Memo::default();
    let w = Wedge { m, memo: &memo };
    let axes: Vec<usize> = (0..d).collect();
    let leaves = w.leaves(&grids, n, &axes, &[]);
    Ok(GridCharge::new(d, n, leaves)?.with_gamma_hint(Some(g.gamma())))
}

/// Derivative along `axis` of row-major centre values by central differences,
/// second-order one-sided at the boundary.
fn derivative(values: &[f64], side: usize, d: usize, axis: usize, h: f64) -> Vec<f64> {
    let stride = side.pow(axis as u32);
    (0..values.len())
        .map(|p| {
            let i = (p / stride) % side;
            let at = |j: usize| values[p - i * stride + j * stride];
            if side < 3 {
                (at(side - 1) - at(0)) / (h * (side - 1).max(1) as f64)
            } else if i == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if i == side - 1 {
                (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) / (2.0 * h)
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * h)
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .take(side.pow(d as u32))
        .collect()
}

fn determinant(m: &[f64], d: usize) -> f64 {
    match d {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        _ => nalgebra::DMatrix::from_row_slice(d, d, m).determinant(),
    }
}

/// Density charge of `det Dg`, with the Jacobian from finite differences of
/// the cell averages.
pub fn jacobian_density_charge(g: &FunctionTuple, n: u32) -> Result<GridCharge> {
    let d = g.dim();
    let m = g.resolution();
    if m < 2 || n > m {
        return Err(Error::Resolution(format!(
            "resolution {m} too coarse for depth {n}"
        )));
    }
    let side = 1usize << m;
    let h = (-(m as f64)).exp2();
    let rows: Vec<Vec<f64>> = g.components.iter().map(|c| c.row_major()).collect();
    let jac: Vec<Vec<Vec<f64>>> = rows
        .iter()
        .map(|r| (0..d).map(|a| derivative(r, side, d, a, h)).collect())
        .collect();
    let mut buf = vec![0.0; d * d];
    let det: Vec<f64> = (0..side.pow(d as u32))
        .map(|p| {
            for i in 0..d {
                for j in 0..d {
                    buf[i * d + j] = jac[i][j][p];
                }
            }
            determinant(&buf, d)
        })
        .collect();
    let field = SampledField::from_row_major(d, m, 1.0, &det)?;
    density_charge(&field, n)
}

/// Restriction of `g` to a face of the cube `k`; see [`SampledField::face_slice`].
pub fn face_slice(
    g: &SampledField,
    axis: usize,
    upper: bool,
    k: &crate::dyadic::CubeId,
) -> Result<SampledField> {
    g.face_slice(axis, upper, k)
}
