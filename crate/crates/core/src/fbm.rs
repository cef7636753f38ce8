//! Fractional Brownian sheets on dyadic corner grids and their increment charges.
//!
//! The sheet has covariance `Π_i R_{H_i}(s_i, t_i)` with
//! `R_H(s, t) = (s^{2H} + t^{2H} - |s - t|^{2H}) / 2`. Samples are drawn exactly
//! by applying the Cholesky factor of each one-dimensional covariance along its
//! axis to a field of independent standard normals.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charge::{check_depth, GridCharge};
use crate::dyadic::{check_dim, interleave};
use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::young::{check_exponents, young_integral, YoungResult};

/// Largest per-axis depth; the Cholesky factors are `2^N × 2^N`.
pub const MAX_SHEET_DEPTH: u32 = 11;
const JITTER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstVector(Vec<f64>);

impl HurstVector {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        check_dim(h.len())?;
        if let Some(&bad) = h.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::Exponent(format!("Hurst parameter {bad} outside (0, 1)")));
        }
        Ok(HurstVector(h))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Whether the mean exceeds `(d-1)/d`, the regime in which the increments
    /// extend to a Hölder charge.
    pub fn chargeable(&self) -> bool {
        let d = self.dim() as f64;
        self.mean() > (d - 1.0) / d
    }

    /// `E[Δ_W(R)^2] = Π (b_i - a_i)^{2H_i}`.
    pub fn variance(&self, r: &Rect) -> f64 {
        self.0
            .iter()
            .zip(r.lo.iter().zip(&r.hi))
            .map(|(h, (a, b))| (b - a).powf(2.0 * h))
            .product()
    }
}

/// Covariance of one-dimensional fBm at the grid points `j 2^{-n}`, `j = 1..=2^n`.
fn fbm_covariance(h: f64, n: u32) -> DMatrix<f64> {
    let s = 1usize << n;
    let t = |j: usize| j as f64 / s as f64;
    DMatrix::from_fn(s, s, |i, j| {
        let (a, b) = (t(i + 1), t(j + 1));
        0.5 * (a.powf(2.0 * h) + b.powf(2.0 * h) - (a - b).abs().powf(2.0 * h))
    })
}

/// Per-axis Cholesky factors for one Hurst vector and depth.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    hurst: HurstVector,
    depth: u32,
    factors: Vec<DMatrix<f64>>,
    jitter: Vec<f64>,
}

impl FbmSampler {
    pub fn new(hurst: HurstVector, depth: u32) -> Result<Self> {
        let d = hurst.dim();
        check_depth(d, depth)?;
        if depth == 0 || depth > MAX_SHEET_DEPTH {
            return Err(Error::Depth(format!(
                "sheet depth must lie in 1..={MAX_SHEET_DEPTH}, got {depth}"
            )));
        }
        let mut factors = Vec::with_capacity(d);
        let mut jitter = Vec::with_capacity(d);
        for &h in hurst.values() {
            let cov = fbm_covariance(h, depth);
            let (l, j) = match cov.clone().cholesky() {
                Some(c) => (c.l(), 0.0),
                None => {
                    let shifted = cov + DMatrix::identity(1 << depth, 1 << depth) * JITTER;
                    match shifted.cholesky() {
                        Some(c) => (c.l(), JITTER),
                        None => {
                            return Err(Error::Numerical(format!(
                                "fBm covariance for H = {h} not positive definite after jitter {JITTER:e}"
                            )))
                        }
                    }
                }
            };
            factors.push(l);
            jitter.push(j);
        }
        Ok(FbmSampler { hurst, depth, factors, jitter })
    }

    pub fn hurst(&self) -> &HurstVector {
        &self.hurst
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Diagonal jitter added per axis (zero when the plain factorization worked).
    pub fn jitter(&self) -> &[f64] {
        &self.jitter
    }

    /// One sample; replicate `trial` of `seed` uses its own stream.
    pub fn sample(&self, seed: u64, trial: u64) -> SheetSample {
        let d = self.hurst.dim();
        let s = 1usize << self.depth;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let mut z: Vec<f64> = (0..s.pow(d as u32))
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let mut fiber = vec![0.0; s];
        for (a, l) in self.factors.iter().enumerate() {
            let stride = s.pow(a as u32);
            for base in 0..z.len() {
                if !(base / stride).is_multiple_of(s) {
                    continue;
                }
                for (i, f) in fiber.iter_mut().enumerate() {
                    *f = z[base + i * stride];
                }
                for i in (0..s).rev() {
                    let mut acc = 0.0;
                    for (j, f) in fiber.iter().enumerate().take(i + 1) {
                        acc += l[(i, j)] * f;
                    }
                    z[base + i * stride] = acc;
                }
            }
        }
        let side = s + 1;
        let mut values = vec![0.0; side.pow(d as u32)];
        for (p, v) in z.into_iter().enumerate() {
            let (mut q, mut rest, mut mul) = (0, p, 1);
            for _ in 0..d {
                q += (rest % s + 1) * mul;
                rest /= s;
                mul *= side;
            }
            values[q] = v;
        }
        SheetSample {
            hurst: self.hurst.clone(),
            depth: self.depth,
            seed,
            trial,
            values,
        }
    }
}

/// Sheet values on the `(2^N + 1)^d` corner grid, row-major with axis 0 fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetSample {
    pub hurst: HurstVector,
    pub depth: u32,
    pub seed: u64,
    pub trial: u64,
    pub values: Vec<f64>,
}

impl SheetSample {
    pub fn dim(&self) -> usize {
        self.hurst.dim()
    }

    pub fn side(&self) -> usize {
        (1usize << self.depth) + 1
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        let side = self.side();
        let p = idx.iter().rev().fold(0, |acc, &i| acc * side + i);
        self.values[p]
    }

    /// Alternating corner sum over a grid-aligned rectangle.
    pub fn increment(&self, r: &Rect) -> Result<f64> {
        let d = self.dim();
        let scale = (1u64 << self.depth) as f64;
        let mut lo = vec![0usize; d];
        let mut hi = vec![0usize; d];
        for i in 0..d {
            for (x, out) in [(r.lo[i], &mut lo[i]), (r.hi[i], &mut hi[i])] {
                let j = x * scale;
                if j.fract() != 0.0 {
                    return Err(Error::Resolution(format!(
                        "rectangle corner {x} is not on the depth-{} grid",
                        self.depth
                    )));
                }
                *out = j as usize;
            }
        }
        let mut idx = vec![0usize; d];
        let mut acc = 0.0;
        for corner in 0..1usize << d {
            let mut sign = 1.0;
            for i in 0..d {
                if (corner >> i) & 1 == 1 {
                    idx[i] = hi[i];
                } else {
                    idx[i] = lo[i];
                    sign = -sign;
                }
            }
            acc += sign * self.at(&idx);
        }
        Ok(acc)
    }
}

/// The charge `Δ_W` at the sample's depth: differences along every axis,
/// reordered by cube index.
pub fn increment_charge(s: &SheetSample) -> Result<GridCharge> {
    let d = s.dim();
    let n = s.depth;
    let side = s.side();
    let mut cur = s.values.clone();
    let mut shape = vec![side; d];
    for a in 0..d {
        let mut next_shape = shape.clone();
        next_shape[a] -= 1;
        let stride: usize = shape[..a].iter().product();
        let total: usize = next_shape.iter().product();
        let mut next = vec![0.0; total];
        let mut idx = vec![0usize; d];
        for (q, out) in next.iter_mut().enumerate() {
            let mut rest = q;
            for (i, v) in idx.iter_mut().enumerate() {
                *v = rest % next_shape[i];
                rest /= next_shape[i];
            }
            let mut p = 0;
            let mut mul = 1;
            for i in 0..d {
                p += idx[i] * mul;
                mul *= shape[i];
            }
            *out = cur[p + stride] - cur[p];
        }
        cur = next;
        shape = next_shape;
    }
    let cells = 1usize << n;
    let mut leaves = vec![0.0; cur.len()];
    let mut coords = vec![0u64; d];
    for (p, v) in cur.into_iter().enumerate() {
        let mut rest = p;
        for c in coords.iter_mut() {
            *c = (rest % cells) as u64;
            rest /= cells;
        }
        leaves[interleave(&coords, n) as usize] = v;
    }
    GridCharge::new(d, n, leaves)
}

/// An axis-parallel rectangle `Π [lo_i, hi_i]` inside the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Rect {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Mismatch("corner dimensions differ".into()));
        }
        check_dim(lo.len())?;
        if lo.iter().zip(&hi).any(|(a, b)| !(0.0 <= *a && a < b && *b <= 1.0)) {
            return Err(Error::Precondition(format!(
                "rectangle {lo:?}..{hi:?} is empty or leaves the unit cube"
            )));
        }
        Ok(Rect { lo, hi })
    }

    pub fn from_cube(c: &crate::dyadic::CubeId) -> Self {
        let (lo, hi) = c.bounds().into_iter().unzip();
        Rect { lo, hi }
    }

    /// Smallest depth whose grid contains all corners, if one exists up to
    /// [`MAX_SHEET_DEPTH`].
    pub fn depth(&self) -> Option<u32> {
        (1..=MAX_SHEET_DEPTH).find(|&n| {
            let s = (1u64 << n) as f64;
            self.lo.iter().chain(&self.hi).all(|x| (x * s).fract() == 0.0)
        })
    }
}

/// `∫ X dΔ_W` through the series construction; the bound uses the sample's
/// empirical Hölder constant.
pub fn pathwise_integral(x: &SampledField, s: &SheetSample, gamma: f64) -> Result<YoungResult> {
    check_exponents(s.dim(), x.beta(), gamma)?;
    young_integral(x, &increment_charge(s)?, gamma)
}

/// `2^{ndγ} max_k |Δ_W(K_{n,k})|` for each generation.
pub fn increment_profile(w: &GridCharge, gamma: f64) -> Vec<f64> {
    let d = w.dim() as f64;
    (0..=w.depth())
        .map(|n| {
            let m = w.level(n).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            (n as f64 * d * gamma).exp2() * m
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VarianceCheck {
    pub rect: Rect,
    pub trials: u64,
    pub empirical: f64,
    pub target: f64,
    /// `(empirical - target) / (target √(2/T))`: the variance of a mean of `T`
    /// squared centred Gaussians with variance `σ^2` is `2σ^4/T`.
    pub z: f64,
}

/// Monte-Carlo variance of `Δ_W(r)` over `trials` replicates.
pub fn variance_check(h: &HurstVector, r: &Rect, trials: u64, seed: u64) -> Result<VarianceCheck> {
    if trials < 100 {
        return Err(Error::Precondition(format!("need at least 100 trials, got {trials}")));
    }
    if r.lo.len() != h.dim() {
        return Err(Error::Mismatch("rectangle and Hurst vector dimensions differ".into()));
    }
    let n = r
        .depth()
        .ok_or_else(|| Error::Resolution(format!("rectangle {r:?} not dyadic")))?;
    let sampler = FbmSampler::new(h.clone(), n)?;
    let squares: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| sampler.sample(seed, t).increment(r).map(|v| v * v))
        .collect::<Result<_>>()?;
    let empirical = crate::sum::pairwise_sum(&squares) / trials as f64;
    let target = h.variance(r);
    let z = (empirical - target) / (target * (2.0 / trials as f64).sqrt());
    Ok(VarianceCheck {
        rect: r.clone(),
        trials,
        empirical,
        target,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::CubeId;

    fn hv(h: &[f64]) -> HurstVector {
        HurstVector::new(h.to_vec()).unwrap()
    }

    #[test]
    fn zero_on_lower_faces_and_deterministic() {
        let s = FbmSampler::new(hv(&[0.7, 0.8]), 3).unwrap();
        let a = s.sample(11, 2);
        for i in 0..9 {
            assert_eq!(a.at(&[0, i]), 0.0);
            assert_eq!(a.at(&[i, 0]), 0.0);
        }
        assert_eq!(a, s.sample(11, 2));
        assert_ne!(a, s.sample(11, 3));
    }

    #[test]
    fn increment_charge_telescopes() {
        let s = FbmSampler::new(hv(&[0.6, 0.9]), 4).unwrap().sample(3, 0);
        let w = increment_charge(&s).unwrap();
        assert!((w.total() - s.at(&[16, 16])).abs() < 1e-12);
        let r = Rect::new(vec![0.25, 0.5], vec![0.5, 0.75]).unwrap();
        let c = CubeId::from_coords(2, &[1, 2]).unwrap();
        assert!((w.value(&c).unwrap() - s.increment(&r).unwrap()).abs() < 1e-12);
        let four: f64 = w.level(1).iter().sum();
        assert!((four - w.level(0)[0]).abs() < 1e-12);
        let d = [
            s.at(&[8, 12]) - s.at(&[4, 12]) - s.at(&[8, 8]) + s.at(&[4, 8]),
            s.increment(&r).unwrap(),
        ];
        assert!((d[0] - d[1]).abs() < 1e-15);
    }

    #[test]
    fn three_dim_increment_matches_charge() {
        let s = FbmSampler::new(hv(&[0.8, 0.8, 0.9]), 2).unwrap().sample(5, 1);
        let w = increment_charge(&s).unwrap();
        for k in 0..64 {
            let c = CubeId::new(3, 2, k).unwrap();
            let v = s.increment(&Rect::from_cube(&c)).unwrap();
            assert!((w.value(&c).unwrap() - v).abs() < 1e-12);
        }
    }

    #[test]
    fn targets() {
        let h = hv(&[0.9, 0.9]);
        let k = Rect::new(vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
        assert!((h.variance(&k) - 2f64.powf(-3.6)).abs() < 1e-15);
        let h = hv(&[0.7, 0.8]);
        let k = Rect::new(vec![0.0, 0.0], vec![0.25, 0.5]).unwrap();
        assert!((h.variance(&k) - 0.25f64.powf(1.4) * 0.5f64.powf(1.6)).abs() < 1e-15);
        assert!(hv(&[0.7, 0.8]).chargeable());
        assert!(!hv(&[0.3, 0.5]).chargeable());
        assert!(HurstVector::new(vec![0.5, 1.0]).is_err());
    }

    #[test]
    fn brownian_sheet_variance() {
        let h = hv(&[0.5, 0.5]);
        let unit = Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let v = variance_check(&h, &unit, 1000, 4).unwrap();
        assert_eq!(v.target, 1.0);
        assert!(v.z.abs() < 4.0, "{v:?}");
        let r = Rect::new(vec![0.25, 0.5], vec![0.75, 0.75]).unwrap();
        let v = variance_check(&h, &r, 1000, 5).unwrap();
        assert!((v.target - 0.125).abs() < 1e-15);
        assert!(v.z.abs() < 4.0, "{v:?}");
    }

    #[test]
    fn corner_covariances() {
        let h = hv(&[0.7, 0.8]);
        let s = FbmSampler::new(h.clone(), 2).unwrap();
        let trials = 4000;
        let samples: Vec<SheetSample> = (0..trials).map(|t| s.sample(9, t)).collect();
        let r = |hh: f64, a: f64, b: f64| {
            0.5 * (a.powf(2.0 * hh) + b.powf(2.0 * hh) - (a - b).abs().powf(2.0 * hh))
        };
        for (p, q) in [([4, 4], [4, 4]), ([1, 3], [2, 2]), ([4, 1], [3, 4]), ([2, 4], [2, 1])] {
            let target = r(0.7, p[0] as f64 / 4.0, q[0] as f64 / 4.0)
                * r(0.8, p[1] as f64 / 4.0, q[1] as f64 / 4.0);
            let prods: Vec<f64> = samples.iter().map(|x| x.at(&p) * x.at(&q)).collect();
            let mean = prods.iter().sum::<f64>() / trials as f64;
            let var = prods.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
            let se = (var / trials as f64).sqrt();
            assert!((mean - target).abs() < 5.0 * se, "{p:?} {q:?}: {mean} vs {target}");
        }
    }

    #[test]
    fn holder_regime_profiles() {
        let h = hv(&[0.8, 0.8]);
        let s = FbmSampler::new(h, 7).unwrap();
        let profiles: Vec<(Vec<f64>, Vec<f64>)> = (0..50)
            .into_par_iter()
            .map(|t| {
                let w = increment_charge(&s.sample(21, t)).unwrap();
                (increment_profile(&w, 0.6), increment_profile(&w, 0.95))
            })
            .collect();
        let median = |n: usize, hi: bool| {
            let mut v: Vec<f64> = profiles
                .iter()
                .map(|(a, b)| if hi { b[n] } else { a[n] })
                .collect();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        for n in 3..7 {
            assert!(median(n + 1, false) <= median(n, false));
            assert!(median(n + 1, true) > median(n, true));
        }
    }

    #[test]
    fn pathwise_integrals() {
        let h = hv(&[0.5, 0.5]);
        let s = FbmSampler::new(h, 4).unwrap();
        let one = SampledField::constant(2, 4, 1.0).unwrap();
        let x = SampledField::from_fn(2, 4, 1.0, |p| p[0] * p[1] + 1.0).unwrap();
        let y = SampledField::from_fn(2, 4, 1.0, |p| (p[0] - p[1]).abs()).unwrap();
        let xy = x.combine(2.0, &y, -3.0).unwrap();
        let mut vals = Vec::new();
        for t in 0..300 {
            let sample = s.sample(2, t);
            let r = pathwise_integral(&one, &sample, 0.51).unwrap();
            assert!((r.value - sample.at(&[16, 16])).abs() < 1e-12);
            let a = pathwise_integral(&x, &sample, 0.51).unwrap().value;
            let b = pathwise_integral(&y, &sample, 0.51).unwrap().value;
            let c = pathwise_integral(&xy, &sample, 0.51).unwrap().value;
            assert!((c - (2.0 * a - 3.0 * b)).abs() < 1e-12);
            vals.push(a);
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 299.0).sqrt();
        assert!(mean.abs() < 4.0 * sd / 300f64.sqrt());
        assert!(pathwise_integral(&x.with_beta(0.5).unwrap(), &s.sample(0, 0), 0.6).is_err());
    }

    #[test]
    fn zero_sheet_gives_zero_charge() {
        let s = SheetSample {
            hurst: hv(&[0.7, 0.7]),
            depth: 2,
            seed: 0,
            trial: 0,
            values: vec![0.0; 25],
        };
        assert!(increment_charge(&s).unwrap().leaves().iter().all(|&v| v == 0.0));
    }
}
