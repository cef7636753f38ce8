//! Charges on dyadic cubes and their Faber-Schauder coefficients.

pub mod io;

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{apply_haar, check_dim, CubeId, DyadicFigure, MAX_INDEX_BITS};
use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::sum::pairwise_sum;

/// A charge known through its values on the generation-`N` cubes.
///
/// Values on coarser cubes are sums over children, computed once and cached;
/// a parent's value is therefore exactly the floating-point sum of its
/// children in child order.
#[derive(Debug, Clone)]
pub struct GridCharge {
    d: usize,
    n: u32,
    leaves: Vec<f64>,
    gamma_hint: Option<f64>,
    levels: OnceLock<Vec<Vec<f64>>>,
}

impl PartialEq for GridCharge {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
            && self.n == other.n
            && self.leaves == other.leaves
            && self.gamma_hint.map(f64::to_bits) == other.gamma_hint.map(f64::to_bits)
    }
}

pub(crate) fn check_depth(d: usize, n: u32) -> Result<()> {
    check_dim(d)?;
    if n as usize * d > MAX_INDEX_BITS as usize || n as usize * d > 30 {
        return Err(Error::Depth(format!("depth {n} too deep for dimension {d}")));
    }
    Ok(())
}

/// Checks `(d-1)/d < γ <= 1`.
pub fn check_gamma(d: usize, gamma: f64) -> Result<()> {
    let lo = (d as f64 - 1.0) / d as f64;
    if gamma > lo && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::Exponent(format!(
            "charge exponent {gamma} outside ({lo}, 1] for dimension {d}"
        )))
    }
}

impl GridCharge {
    pub fn new(d: usize, n: u32, leaves: Vec<f64>) -> Result<Self> {
        check_depth(d, n)?;
        if leaves.len() != 1usize << (n as usize * d) {
            return Err(Error::Depth(format!(
                "expected {} leaves, got {}",
                1usize << (n as usize * d),
                leaves.len()
            )));
        }
        Ok(GridCharge {
            d,
            n,
            leaves,
            gamma_hint: None,
            levels: OnceLock::new(),
        })
    }

    pub fn with_gamma_hint(mut self, gamma: Option<f64>) -> Self {
        self.gamma_hint = gamma;
        self
    }

    pub fn zero(d: usize, n: u32) -> Result<Self> {
        check_depth(d, n)?;
        Self::new(d, n, vec![0.0; 1usize << (n as usize * d)])
    }

    /// Lebesgue measure.
    pub fn lebesgue(d: usize, n: u32) -> Result<Self> {
        check_depth(d, n)?;
        let v = (-((n as usize * d) as f64)).exp2();
        Ok(Self::new(d, n, vec![v; 1usize << (n as usize * d)])?.with_gamma_hint(Some(1.0)))
    }

    /// Leaf values from a function of the leaf cube.
    pub fn from_cube_fn<F>(d: usize, n: u32, f: F) -> Result<Self>
    where
        F: Fn(&CubeId) -> f64 + Sync,
    {
        check_depth(d, n)?;
        let leaves = (0..1u64 << (n as usize * d))
            .into_par_iter()
            .map(|k| f(&CubeId::new(d, n, k).expect("index in range")))
            .collect();
        Self::new(d, n, leaves)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> u32 {
        self.n
    }

    pub fn leaves(&self) -> &[f64] {
        &self.leaves
    }

    pub fn gamma_hint(&self) -> Option<f64> {
        self.gamma_hint
    }

    fn pyramid(&self) -> &Vec<Vec<f64>> {
        self.levels.get_or_init(|| {
            let m = 1usize << self.d;
            let mut levels: Vec<Vec<f64>> = Vec::with_capacity(self.n as usize);
            for g in (0..self.n).rev() {
                let finer: &[f64] = levels.last().map(|v| v.as_slice()).unwrap_or(&self.leaves);
                let coarse: Vec<f64> = finer
                    .par_chunks(m)
                    .map(|c| c.iter().sum::<f64>())
                    .collect();
                debug_assert_eq!(coarse.len(), 1usize << (g as usize * self.d));
                levels.push(coarse);
            }
            levels.reverse();
            levels
        })
    }

    /// Values on all generation-`g` cubes, in index order.
    pub fn level(&self, g: u32) -> &[f64] {
        assert!(g <= self.n, "generation {g} beyond depth {}", self.n);
        if g == self.n {
            &self.leaves
        } else {
            &self.pyramid()[g as usize]
        }
    }

    pub fn value(&self, c: &CubeId) -> Result<f64> {
        if c.dim() != self.d || c.generation() > self.n {
            return Err(Error::Depth(format!(
                "cube {c:?} not resolved by a depth-{} charge",
                self.n
            )));
        }
        Ok(self.level(c.generation())[c.index() as usize])
    }

    pub fn total(&self) -> f64 {
        self.level(0)[0]
    }

    /// Value on a figure, as the sum of its cells.
    pub fn value_figure(&self, f: &DyadicFigure) -> Result<f64> {
        if f.dim() != self.d || f.resolution() > self.n {
            return Err(Error::Resolution(format!(
                "figure at resolution {} not resolved by a depth-{} charge",
                f.resolution(),
                self.n
            )));
        }
        let lvl = self.level(f.resolution());
        Ok(pairwise_sum(
            &f.cells().iter().map(|&k| lvl[k as usize]).collect::<Vec<_>>(),
        ))
    }

    pub fn scale(&self, c: f64) -> GridCharge {
        GridCharge::new(self.d, self.n, self.leaves.iter().map(|v| c * v).collect())
            .expect("same shape")
    }

    pub fn add(&self, other: &GridCharge) -> Result<GridCharge> {
        if self.d != other.d || self.n != other.n {
            return Err(Error::Mismatch("charges of different shape".into()));
        }
        GridCharge::new(
            self.d,
            self.n,
            self.leaves.iter().zip(&other.leaves).map(|(a, b)| a + b).collect(),
        )
    }

    /// Same charge described at a coarser depth.
    pub fn coarsen(&self, n: u32) -> Result<GridCharge> {
        if n > self.n {
            return Err(Error::Depth(format!("cannot refine depth {} to {n}", self.n)));
        }
        Ok(GridCharge::new(self.d, n, self.level(n).to_vec())?.with_gamma_hint(self.gamma_hint))
    }

    /// `sup_K 2^{n(d-1)} |ω(K) - ν(K)|` over all cubes of generation `0..=N`.
    pub fn weighted_sup_distance(&self, other: &GridCharge) -> Result<f64> {
        if self.d != other.d || self.n != other.n {
            return Err(Error::Mismatch("charges of different shape".into()));
        }
        Ok((0..=self.n)
            .map(|g| {
                let w = ((g as usize * (self.d - 1)) as f64).exp2();
                self.level(g)
                    .iter()
                    .zip(other.level(g))
                    .fold(0.0f64, |m, (a, b)| m.max(w * (a - b).abs()))
            })
            .fold(0.0, f64::max))
    }

    /// `sup_B |ω(B)| / ||B||` over the given figures.
    pub fn figure_sup_ratio(&self, figures: &[DyadicFigure]) -> Result<f64> {
        let mut best = 0.0f64;
        for f in figures {
            let per = f.measures().perimeter;
            if per > 0.0 {
                best = best.max(self.value_figure(f)?.abs() / per);
            }
        }
        Ok(best)
    }
}

/// Faber-Schauder coefficients of a charge truncated at depth `N`.
///
/// `a[n]` holds `a_{n,k,r}` at position `k (2^d - 1) + r - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaberCoeffs {
    pub d: usize,
    pub depth: u32,
    pub mass: f64,
    pub a: Vec<Vec<f64>>,
}

impl FaberCoeffs {
    pub fn zeros(d: usize, depth: u32) -> Result<Self> {
        check_depth(d, depth)?;
        let types = (1usize << d) - 1;
        Ok(FaberCoeffs {
            d,
            depth,
            mass: 0.0,
            a: (0..depth)
                .map(|n| vec![0.0; types << (n as usize * d)])
                .collect(),
        })
    }

    pub fn types(&self) -> usize {
        (1 << self.d) - 1
    }

    pub fn get(&self, n: u32, k: u64, r: usize) -> f64 {
        self.a[n as usize][k as usize * self.types() + r - 1]
    }

    pub fn set(&mut self, n: u32, k: u64, r: usize, v: f64) {
        let t = self.types();
        self.a[n as usize][k as usize * t + r - 1] = v;
    }

    /// `max_{k,r} 2^{nd(γ-1/2)} |a_{n,k,r}|` for each generation.
    pub fn decay_profile(&self, gamma: f64) -> Vec<f64> {
        self.a
            .iter()
            .enumerate()
            .map(|(n, row)| {
                let w = ((n * self.d) as f64 * (gamma - 0.5)).exp2();
                w * row.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .collect()
    }

    /// `max(|mass|, sup_{n,k,r} 2^{nd(γ-1/2)} |a_{n,k,r}|)`.
    pub fn decay_sup(&self, gamma: f64) -> f64 {
        self.decay_profile(gamma)
            .into_iter()
            .fold(self.mass.abs(), f64::max)
    }

    pub fn linear_combination(&self, s: f64, other: &FaberCoeffs, t: f64) -> Result<FaberCoeffs> {
        if self.d != other.d || self.depth != other.depth {
            return Err(Error::Mismatch("coefficients of different shape".into()));
        }
        Ok(FaberCoeffs {
            d: self.d,
            depth: self.depth,
            mass: s * self.mass + t * other.mass,
            a: self
                .a
                .iter()
                .zip(&other.a)
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| s * p + t * q).collect())
                .collect(),
        })
    }
}

pub fn analyze(w: &GridCharge) -> FaberCoeffs {
    let d = w.d;
    let m = 1usize << d;
    let a = (0..w.n)
        .map(|n| {
            let scale = ((n as usize * d) as f64 / 2.0).exp2();
            let finer = w.level(n + 1);
            let mut row = vec![0.0; (m - 1) << (n as usize * d)];
            row.par_chunks_mut(m - 1)
                .zip(finer.par_chunks(m))
                .for_each_init(
                    || vec![0.0; m],
                    |buf, (out, kids)| {
                        buf.copy_from_slice(kids);
                        apply_haar(buf);
                        for (o, v) in out.iter_mut().zip(&buf[1..]) {
                            *o = scale * v;
                        }
                    },
                );
            row
        })
        .collect();
    FaberCoeffs {
        d,
        depth: w.n,
        mass: w.total(),
        a,
    }
}

pub fn synthesize(c: &FaberCoeffs) -> Result<GridCharge> {
    check_depth(c.d, c.depth)?;
    let d = c.d;
    let m = 1usize << d;
    let mut cur = vec![c.mass];
    for n in 0..c.depth {
        let up = ((n as usize * d) as f64 / 2.0).exp2();
        let down = 1.0 / (up * m as f64);
        let coeffs = &c.a[n as usize];
        if coeffs.len() != (m - 1) * cur.len() {
            return Err(Error::Mismatch(format!(
                "generation {n} has {} coefficients, expected {}",
                coeffs.len(),
                (m - 1) * cur.len()
            )));
        }
        let mut next = vec![0.0; cur.len() * m];
        next.par_chunks_mut(m)
            .zip(cur.par_iter().zip(coeffs.par_chunks(m - 1)))
            .for_each(|(kids, (&v, a))| {
                kids[0] = up * v;
                kids[1..].copy_from_slice(a);
                apply_haar(kids);
                kids.iter_mut().for_each(|x| *x *= down);
            });
        cur = next;
    }
    GridCharge::new(d, c.depth, cur)
}

/// Per-generation profile of `max_k |ω(K_{n,k})| / |K_{n,k}|^γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HolderProfile {
    pub gamma: f64,
    pub per_generation: Vec<f64>,
    pub norm: f64,
    pub argmax_generation: u32,
}

pub fn holder_profile(w: &GridCharge, gamma: f64) -> Result<HolderProfile> {
    check_gamma(w.d, gamma)?;
    let per_generation: Vec<f64> = (0..=w.n)
        .map(|g| {
            let scale = ((g as usize * w.d) as f64 * gamma).exp2();
            scale * w.level(g).iter().fold(0.0f64, |m, v| m.max(v.abs()))
        })
        .collect();
    let (argmax, norm) = per_generation
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(i, m), (j, &v)| if v > m { (j, v) } else { (i, m) });
    Ok(HolderProfile {
        gamma,
        per_generation,
        norm,
        argmax_generation: argmax as u32,
    })
}

/// Largest `|ω(K)| / |K|^γ` over dyadic cubes of generation `0..=N`; a lower
/// bound for the Hölder constant of the untruncated charge.
pub fn holder_norm(w: &GridCharge, gamma: f64) -> Result<f64> {
    Ok(holder_profile(w, gamma)?.norm)
}

/// The charge `g dL` truncated at depth `n`.
pub fn density_charge(g: &SampledField, n: u32) -> Result<GridCharge> {
    if n > g.resolution() {
        return Err(Error::Resolution(format!(
            "depth {n} exceeds field resolution {}",
            g.resolution()
        )));
    }
    GridCharge::new(g.dim(), n, g.cube_integrals(n)?)
}

/// `ω ⌐ K`: leaves inside `K` kept, all others zeroed.
pub fn restrict(w: &GridCharge, k: &CubeId) -> Result<GridCharge> {
    if k.dim() != w.d || k.generation() > w.n {
        return Err(Error::Depth(format!(
            "cube {k:?} not resolved by a depth-{} charge",
            w.n
        )));
    }
    let r = k.descendant_range(w.n);
    let leaves = w
        .leaves
        .iter()
        .enumerate()
        .map(|(i, &v)| if r.contains(&(i as u64)) { v } else { 0.0 })
        .collect();
    Ok(GridCharge::new(w.d, w.n, leaves)?.with_gamma_hint(w.gamma_hint))
}

/// `ω ∘ Φ` where `Φ` maps `[0,1]^d` affinely onto `K`; depth drops by the
/// generation of `K`.
pub fn pullback_affine(w: &GridCharge, k: &CubeId) -> Result<GridCharge> {
    if k.dim() != w.d || k.generation() > w.n {
        return Err(Error::Depth(format!(
            "cube {k:?} leaves no depth in a depth-{} charge",
            w.n
        )));
    }
    let r = k.descendant_range(w.n);
    GridCharge::new(
        w.d,
        w.n - k.generation(),
        w.leaves[r.start as usize..r.end as usize].to_vec(),
    )
}

/// Ratios `|ω(B)| (isop B)^{d(1-γ)} / (||ω||_γ |B|^γ)` over a family of figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IsoperimetricReport {
    pub holder_norm: f64,
    /// `None` for empty figures, which are excluded.
    pub ratios: Vec<Option<f64>>,
    pub max_ratio: f64,
}

pub fn isoperimetric_check(
    w: &GridCharge,
    gamma: f64,
    figures: &[DyadicFigure],
) -> Result<IsoperimetricReport> {
    if figures.is_empty() {
        return Err(Error::Precondition("no figures supplied".into()));
    }
    let h = holder_norm(w, gamma)?;
    let d = w.d as f64;
    let ratios = figures
        .iter()
        .map(|f| {
            let m = f.measures();
            Ok(match m.isop {
                Some(isop) if h > 0.0 => Some(
                    w.value_figure(f)?.abs() * isop.powf(d * (1.0 - gamma))
                        / (h * m.volume.powf(gamma)),
                ),
                Some(_) => Some(0.0),
                None => None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = ratios.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    Ok(IsoperimetricReport {
        holder_norm: h,
        ratios,
        max_ratio,
    })
}

/// Explicit constants relating the Hölder constant `H` of a charge to the
/// coefficient sup `D = max(|mass|, sup 2^{nd(γ-1/2)}|a_{n,k,r}|)`:
/// `D <= upper · H` and `H <= |mass| + lower · D` (the latter for `γ < 1`).
pub fn decay_constants(d: usize, gamma: f64) -> (f64, f64) {
    let e = d as f64 * (1.0 - gamma);
    let upper = e.exp2();
    let lower = ((1usize << d) - 1) as f64 / (e.exp2() - 1.0);
    (upper, lower)
}
