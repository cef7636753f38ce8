//! Functions of bounded fractional variation through their Haar coefficients.
//!
//! With `g_{n,k,r}` the `L^2`-normalized Haar functions, the coefficients are
//! `b_{n,k,r}(f) = 2^{-nd(γ-1/2)} ∫ f g_{n,k,r}`. Their `ℓ^1` norm (plus `|∫f|`)
//! is equivalent to the fractional variation, and pairing them with the Faber
//! coefficients of a charge gives the duality bracket.

use serde::{Deserialize, Serialize};

use crate::charge::{analyze, check_depth, decay_constants, density_charge, holder_norm, synthesize};
use crate::charge::{FaberCoeffs, GridCharge};
use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::sum::{fit_slope, pairwise_sum, pairwise_sum_by};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarCoeffsF {
    pub d: usize,
    pub depth: u32,
    pub gamma: f64,
    /// `∫ f`.
    pub mean: f64,
    /// `b[n][k (2^d - 1) + r - 1]`.
    pub b: Vec<Vec<f64>>,
}

fn check_open_gamma(d: usize, gamma: f64) -> Result<()> {
    let lo = (d as f64 - 1.0) / d as f64;
    if gamma > lo && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::Exponent(format!("γ = {gamma} outside ({lo}, 1)")))
    }
}

fn level_scale(d: usize, n: usize, gamma: f64) -> f64 {
    ((n * d) as f64 * (gamma - 0.5)).exp2()
}

pub fn analyze_f(f: &SampledField, gamma: f64, n: u32) -> Result<HaarCoeffsF> {
    let d = f.dim();
    check_open_gamma(d, gamma)?;
    let c = analyze(&density_charge(f, n)?);
    let b = c
        .a
        .into_iter()
        .enumerate()
        .map(|(g, row)| {
            let s = level_scale(d, g, gamma);
            row.into_iter().map(|v| v / s).collect()
        })
        .collect();
    Ok(HaarCoeffsF { d, depth: n, gamma, mean: c.mass, b })
}

impl HaarCoeffsF {
    pub fn per_generation_l1(&self) -> Vec<f64> {
        self.b
            .iter()
            .map(|row| pairwise_sum_by(row.len(), |i| row[i].abs()))
            .collect()
    }

    /// Least-squares slope of `log2` of the per-generation `ℓ^1` mass over the
    /// second half of the generations; `None` when fewer than two are nonzero.
    pub fn tail_slope(&self) -> Option<f64> {
        let l1 = self.per_generation_l1();
        let (xs, ys): (Vec<f64>, Vec<f64>) = l1
            .iter()
            .enumerate()
            .skip(l1.len() / 2)
            .filter(|(_, v)| **v > 0.0)
            .map(|(n, v)| (n as f64, v.log2()))
            .unzip();
        (xs.len() >= 2).then(|| fit_slope(&xs, &ys))
    }

    pub fn report(&self) -> BvReport {
        BvReport {
            mean: self.mean,
            per_generation_l1: self.per_generation_l1(),
            total: bv_alpha_norm(self),
            tail_slope: self.tail_slope(),
        }
    }

    /// The piecewise-constant function on generation-`depth` cells with these
    /// coefficients.
    pub fn reconstruct(&self) -> Result<SampledField> {
        check_depth(self.d, self.depth)?;
        let mut c = FaberCoeffs::zeros(self.d, self.depth)?;
        c.mass = self.mean;
        for (n, row) in self.b.iter().enumerate() {
            let s = level_scale(self.d, n, self.gamma);
            for (a, v) in c.a[n].iter_mut().zip(row) {
                *a = v * s;
            }
        }
        let vol = ((self.depth as usize * self.d) as f64).exp2();
        let cells = synthesize(&c)?.leaves().iter().map(|v| v * vol).collect();
        SampledField::from_cells(self.d, self.depth, 1.0, cells)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BvReport {
    pub mean: f64,
    pub per_generation_l1: Vec<f64>,
    pub total: f64,
    pub tail_slope: Option<f64>,
}

/// `|∫f| + Σ |b_{n,k,r}|`.
pub fn bv_alpha_norm(c: &HaarCoeffsF) -> f64 {
    c.mean.abs() + pairwise_sum(&c.per_generation_l1())
}

/// `⟨f, ω⟩ = ω([0,1]^d) ∫f + Σ 2^{nd(γ-1/2)} b_{n,k,r}(f) a_{n,k,r}(ω)`.
pub fn duality_bracket(c: &HaarCoeffsF, w: &FaberCoeffs) -> Result<f64> {
    if c.d != w.d || c.depth != w.depth {
        return Err(Error::Mismatch(format!(
            "coefficients of dimension {} depth {} against a charge of dimension {} depth {}",
            c.d, c.depth, w.d, w.depth
        )));
    }
    let mut terms = vec![w.mass * c.mean];
    for (n, (b, a)) in c.b.iter().zip(&w.a).enumerate() {
        let s = level_scale(c.d, n, c.gamma);
        terms.push(s * pairwise_sum_by(b.len(), |i| b[i] * a[i]));
    }
    Ok(pairwise_sum(&terms))
}

/// Constant `C` in `|⟨f, ω⟩| <= bv_alpha_norm(f) C ||ω||_γ`: the mass is at
/// most `||ω||_γ` and `2^{nd(γ-1/2)} |a_{n,k,r}| <= 2^{d(1-γ)} ||ω||_γ`.
pub fn bracket_constant(d: usize, gamma: f64) -> f64 {
    decay_constants(d, gamma).0.max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BracketReport {
    pub value: f64,
    pub bv_alpha_norm: f64,
    pub holder_norm: f64,
    pub constant: f64,
    pub bound: f64,
}

pub fn bracket_report(c: &HaarCoeffsF, w: &GridCharge) -> Result<BracketReport> {
    let value = duality_bracket(c, &analyze(w))?;
    let bv = bv_alpha_norm(c);
    let h = holder_norm(w, c.gamma)?;
    let constant = bracket_constant(c.d, c.gamma);
    Ok(BracketReport {
        value,
        bv_alpha_norm: bv,
        holder_norm: h,
        constant,
        bound: bv * constant * h,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GagliardoReport {
    /// Discrete `||f||_{1/γ}`.
    pub lhs: f64,
    /// `C · bv_alpha_norm(f)`.
    pub rhs: f64,
    pub constant: f64,
}

/// Each term `2^{nd(γ-1/2)} b g_{n,k,r}` has `L^{1/γ}` norm `|b|` and the mean
/// term has norm `|∫f|`, so the triangle inequality gives the embedding with
/// constant one for the coefficient norm.
pub const GAGLIARDO_CONSTANT: f64 = 1.0;

pub fn gagliardo_check(f: &SampledField, gamma: f64) -> Result<GagliardoReport> {
    let c = analyze_f(f, gamma, f.resolution())?;
    let vol = ((f.resolution() as usize * f.dim()) as f64).exp2().recip();
    let p = 1.0 / gamma;
    let s = pairwise_sum_by(f.cells().len(), |i| f.cells()[i].abs().powf(p) * vol);
    Ok(GagliardoReport {
        lhs: s.powf(gamma),
        rhs: GAGLIARDO_CONSTANT * bv_alpha_norm(&c),
        constant: GAGLIARDO_CONSTANT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{random_holder_charge, random_piecewise_constant};
    use crate::young::{truncation_bound, young_integral};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn haar_one(d: usize, m: u32) -> SampledField {
        SampledField::from_fn(d, m, 1.0, |x| if x[0] < 0.5 { 1.0 } else { -1.0 }).unwrap()
    }

    #[test]
    fn constants_and_single_haar_function() {
        let one = SampledField::constant(2, 4, 1.0).unwrap();
        let c = analyze_f(&one, 0.9, 4).unwrap();
        assert_eq!(c.mean, 1.0);
        assert!(c.b.iter().flatten().all(|&v| v.abs() < 1e-15));
        assert!((bv_alpha_norm(&c) - 1.0).abs() < 1e-15);

        let g = haar_one(2, 4);
        let c = analyze_f(&g, 0.9, 4).unwrap();
        assert!((c.b[0][0] - 1.0).abs() < 1e-15);
        let rest: f64 = c.b.iter().flatten().map(|v| v.abs()).sum::<f64>() - 1.0;
        assert!(rest.abs() < 1e-13 && c.mean.abs() < 1e-15);
        assert!((bv_alpha_norm(&c) - 1.0).abs() < 1e-13);
        let gg = gagliardo_check(&g, 0.9).unwrap();
        assert!((gg.lhs - 1.0).abs() < 1e-13 && gg.rhs >= 1.0 - 1e-13);
        let gg = gagliardo_check(&one, 0.9).unwrap();
        assert!((gg.lhs - 1.0).abs() < 1e-13 && gg.rhs >= 1.0);
    }

    #[test]
    fn indicator_has_finite_norm() {
        let f = SampledField::from_fn(2, 8, 1.0, |x| {
            if x[0] < 0.5 && x[1] < 0.5 { 1.0 } else { 0.0 }
        })
        .unwrap();
        let c = analyze_f(&f, 0.8, 8).unwrap();
        let l1 = c.per_generation_l1();
        assert!(l1[1..].iter().all(|&v| v < 1e-13));
        // the three gen-0 coefficients are each 1/4
        assert!((bv_alpha_norm(&c) - 1.0).abs() < 1e-13);
        assert!(c.tail_slope().is_none());
    }

    #[test]
    fn linearity_and_bilinearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in 0..5 {
            let f = random_piecewise_constant(2, 5, 5, s).unwrap();
            let g = random_piecewise_constant(2, 5, 3, s + 100).unwrap();
            let (x, y): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let fg = f.combine(x, &g, y).unwrap();
            let (cf, cg, cfg) = (
                analyze_f(&f, 0.9, 5).unwrap(),
                analyze_f(&g, 0.9, 5).unwrap(),
                analyze_f(&fg, 0.9, 5).unwrap(),
            );
            for ((a, b), c) in cf.b.iter().flatten().zip(cg.b.iter().flatten()).zip(cfg.b.iter().flatten()) {
                assert!((x * a + y * b - c).abs() < 1e-12);
            }
            let w1 = analyze(&random_holder_charge(2, 5, 0.9, s).unwrap());
            let w2 = analyze(&random_holder_charge(2, 5, 0.9, s + 7).unwrap());
            let w12 = w1.linear_combination(x, &w2, y).unwrap();
            let lhs = duality_bracket(&cf, &w12).unwrap();
            let rhs = x * duality_bracket(&cf, &w1).unwrap() + y * duality_bracket(&cf, &w2).unwrap();
            assert!((lhs - rhs).abs() < 1e-11);
            let lhs = duality_bracket(&cfg, &w1).unwrap();
            let rhs = x * duality_bracket(&cf, &w1).unwrap() + y * duality_bracket(&cg, &w1).unwrap();
            assert!((lhs - rhs).abs() < 1e-11);
        }
    }

    #[test]
    fn bracket_examples() {
        let f = random_piecewise_constant(2, 6, 4, 1).unwrap();
        let g = random_piecewise_constant(2, 6, 6, 2).unwrap();
        let c = analyze_f(&f, 0.9, 6).unwrap();
        let gl = density_charge(&g, 6).unwrap();
        let exact: f64 = f.cells().iter().zip(g.cells()).map(|(a, b)| a * b).sum::<f64>() / 4096.0;
        assert!((duality_bracket(&c, &analyze(&gl)).unwrap() - exact).abs() < 1e-13);

        let w = random_holder_charge(2, 6, 0.9, 4).unwrap();
        let one = analyze_f(&SampledField::constant(2, 6, 1.0).unwrap(), 0.9, 6).unwrap();
        assert!((duality_bracket(&one, &analyze(&w)).unwrap() - w.total()).abs() < 1e-13);
        let r = bracket_report(&c, &w).unwrap();
        assert!(r.value.abs() <= r.bound);
        assert!(duality_bracket(&c, &analyze(&random_holder_charge(2, 5, 0.9, 4).unwrap())).is_err());
        assert!(analyze_f(&f, 1.0, 6).is_err());
    }

    #[test]
    fn bracket_matches_young_integral() {
        let f = SampledField::from_fn(2, 8, 0.9, |x| (x[0] * 5.0).sin() * x[1].powf(0.9)).unwrap();
        for seed in 0..4 {
            let w = random_holder_charge(2, 7, 0.92, seed).unwrap();
            let y = young_integral(&f, &w, 0.92).unwrap();
            let b = duality_bracket(&analyze_f(&f, 0.92, 7).unwrap(), &analyze(&w)).unwrap();
            let h = holder_norm(&w, 0.92).unwrap();
            let tail = truncation_bound(2, 0.9, 0.92, f.lip(), h, 7);
            assert!((y.value - b).abs() <= y.truncation_bound + tail + y.discretization_bound);
            assert!((y.value - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_slope_of_smooth_function() {
        let f = SampledField::from_fn(2, 9, 1.0, |x| (3.0 * x[0] + x[1]).sin() + x[0] * x[1]).unwrap();
        let gamma = 0.9;
        let totals: Vec<f64> = (5..=9)
            .map(|n| bv_alpha_norm(&analyze_f(&f, gamma, n).unwrap()))
            .collect();
        for w in totals.windows(3) {
            assert!((w[2] - w[1]) < 0.7 * (w[1] - w[0]));
        }
        let slope = analyze_f(&f, gamma, 9).unwrap().tail_slope().unwrap();
        // 1-Hölder: per-generation mass ~ 2^{-n(1 + d(γ - 1))}
        assert!((slope + 0.8).abs() < 0.1, "{slope}");
    }

    #[test]
    fn gagliardo_refinement() {
        let f = random_piecewise_constant(2, 3, 3, 8).unwrap();
        let mut last: Option<f64> = None;
        for m in 3..7 {
            let fine = SampledField::from_fn(2, m, 1.0, |x| {
                let i = ((x[0] * 8.0) as usize).min(7);
                let j = ((x[1] * 8.0) as usize).min(7);
                f.point(&[(i as f64 + 0.5) / 8.0, (j as f64 + 0.5) / 8.0])
            })
            .unwrap();
            let g = gagliardo_check(&fine, 0.85).unwrap();
            assert!(g.lhs <= g.rhs * (1.0 + 1e-12));
            if let Some(prev) = last {
                assert!((g.lhs - prev).abs() < 1e-12);
            }
            last = Some(g.lhs);
        }
    }

    #[test]
    fn reconstruction_and_compactness() {
        let f = random_piecewise_constant(2, 4, 4, 5).unwrap();
        let c = analyze_f(&f, 0.8, 4).unwrap();
        let back = c.reconstruct().unwrap();
        for (a, b) in f.cells().iter().zip(back.cells()) {
            assert!((a - b).abs() < 1e-12);
        }
        // a bounded sequence with convergent coordinates has L^1-convergent
        // reconstructions
        let mut prev = f64::INFINITY;
        for p in 1..6 {
            let mut cp = c.clone();
            for row in cp.b.iter_mut() {
                for v in row.iter_mut() {
                    *v *= 1.0 + (-(p as f64)).exp2();
                }
            }
            let r = cp.reconstruct().unwrap();
            let l1: f64 = r.cells().iter().zip(back.cells()).map(|(a, b)| (a - b).abs()).sum::<f64>() / 256.0;
            assert!(l1 < prev);
            prev = l1;
        }
    }
}
