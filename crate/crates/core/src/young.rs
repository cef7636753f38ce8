//! The Young integral of a Hölder function against a Hölder charge.
//!
//! Three constructions are provided: the Faber-Schauder series
//! ([`young_integral`]), sewing of an almost additive cube function ([`sew`],
//! [`indefinite`]) and Riemann sums over dyadic divisions ([`riemann_sum`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charge::{analyze, check_gamma, holder_norm, GridCharge};
use crate::dyadic::{apply_haar, locate, CubeId, DyadicFigure};
use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::sum::{pairwise_sum, pairwise_sum_by};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct YoungResult {
    pub value: f64,
    /// Bound on the series tail beyond the charge depth.
    pub truncation_bound: f64,
    /// Bound on the effect of replacing `f` by its cell averages.
    pub discretization_bound: f64,
    pub generations_used: u32,
}

/// `ε` in the sewing hypothesis: `1 + ε = γ + β/d`.
pub fn sewing_epsilon(d: usize, beta: f64, gamma: f64) -> f64 {
    gamma + beta / d as f64 - 1.0
}

pub fn check_exponents(d: usize, beta: f64, gamma: f64) -> Result<()> {
    check_gamma(d, gamma)?;
    if beta + d as f64 * gamma > d as f64 {
        Ok(())
    } else {
        Err(Error::ExponentCondition(format!(
            "β + dγ = {} must exceed d = {d}",
            beta + d as f64 * gamma
        )))
    }
}

fn check_pair(f: &SampledField, w: &GridCharge, gamma: f64) -> Result<()> {
    if f.dim() != w.dim() {
        return Err(Error::Mismatch(format!(
            "field dimension {} and charge dimension {}",
            f.dim(),
            w.dim()
        )));
    }
    check_exponents(w.dim(), f.beta(), gamma)?;
    if f.resolution() < w.depth() {
        return Err(Error::Resolution(format!(
            "field resolution {} below charge depth {}",
            f.resolution(),
            w.depth()
        )));
    }
    Ok(())
}

/// Constant in the tail estimate
/// `C_tail Lip^β(f) ||ω||_γ Σ_{n>=N} 2^{n(d - dγ - β)}`.
///
/// Pairing each `+1` child of a Haar row with a `-1` child moves points by at
/// most `√d 2^{-n}`, so `|∫ f g_{n,k,r}| <= 2^{-nd/2} Lip^β(f) (√d 2^{-n})^β / 2`;
/// the coefficients obey `|a_{n,k,r}| <= 2^{d(1-γ)} ||ω||_γ 2^{nd(1/2-γ)}`, and
/// there are `2^d - 1` types per cube.
pub fn tail_constant(d: usize, beta: f64, gamma: f64) -> f64 {
    let d_f = d as f64;
    ((1usize << d) - 1) as f64 * (d_f * (1.0 - gamma)).exp2() * d_f.powf(beta / 2.0) / 2.0
}

/// Bound on `Σ_{n>=N}` of the series terms.
pub fn truncation_bound(d: usize, beta: f64, gamma: f64, lip: f64, h: f64, n: u32) -> f64 {
    let e = d as f64 * (1.0 - gamma) - beta;
    tail_constant(d, beta, gamma) * lip * h * (n as f64 * e).exp2() / (1.0 - e.exp2())
}

/// Constant `C` with `|∫ f ω| <= C (||f||_∞ + Lip^β f) ||ω||_γ`.
pub fn uniform_constant(d: usize, beta: f64, gamma: f64) -> f64 {
    let e = d as f64 * (1.0 - gamma) - beta;
    1.0f64.max(tail_constant(d, beta, gamma) / (1.0 - e.exp2()))
}

/// `∫ f g_{n,k,r}` for every `k` and `r >= 1` of generation `n`, laid out as
/// the coefficients of a charge.
fn haar_moments(child_integrals: &[f64], d: usize, n: u32) -> Vec<f64> {
    let m = 1usize << d;
    let scale = ((n as usize * d) as f64 / 2.0).exp2();
    let mut out = vec![0.0; child_integrals.len() / m * (m - 1)];
    out.par_chunks_mut(m - 1)
        .zip(child_integrals.par_chunks(m))
        .for_each_init(
            || vec![0.0; m],
            |buf, (o, kids)| {
                buf.copy_from_slice(kids);
                apply_haar(buf);
                for (x, v) in o.iter_mut().zip(&buf[1..]) {
                    *x = scale * v;
                }
            },
        );
    out
}

/// Series form `mass(ω) ∫f + Σ_{n<N} Σ_{k,r} a_{n,k,r}(ω) ∫ f g_{n,k,r}`.
pub fn young_integral(f: &SampledField, w: &GridCharge, gamma: f64) -> Result<YoungResult> {
    check_pair(f, w, gamma)?;
    let d = w.dim();
    let coeffs = analyze(w);
    let mut terms = vec![coeffs.mass * f.integral()];
    for n in 0..w.depth() {
        let moments = haar_moments(&f.cube_integrals(n + 1)?, d, n);
        let a = &coeffs.a[n as usize];
        terms.push(pairwise_sum_by(a.len(), |i| a[i] * moments[i]));
    }
    let value = pairwise_sum(&terms);
    let h = holder_norm(w, gamma)?;
    let lip = f.lip();
    let constant = f.lip() == 0.0;
    let truncation_bound = if constant {
        0.0
    } else {
        truncation_bound(d, f.beta(), gamma, lip, h, w.depth())
    };
    let leaf_mass: f64 = pairwise_sum(&w.leaves().iter().map(|v| v.abs()).collect::<Vec<_>>());
    let discretization_bound =
        lip * ((d as f64).sqrt() * f.cell_width()).powf(f.beta()) * leaf_mass;
    Ok(YoungResult {
        value,
        truncation_bound,
        discretization_bound,
        generations_used: w.depth(),
    })
}

/// Choice of the point (or value) of `f` attached to a cube in Riemann sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TagRule {
    #[default]
    LowerLeft,
    Center,
    /// The mean of `f` over the cube, a value `f` attains inside the cube.
    Average,
}

impl std::str::FromStr for TagRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower-left" | "lowerleft" | "corner" => Ok(TagRule::LowerLeft),
            "center" | "centre" => Ok(TagRule::Center),
            "average" | "mean" => Ok(TagRule::Average),
            _ => Err(Error::Precondition(format!("unknown tag rule {s:?}"))),
        }
    }
}

/// Value of `f` at the tag of `c`.
pub fn tag_value(f: &SampledField, c: &CubeId, tag: TagRule) -> f64 {
    match tag {
        TagRule::LowerLeft => f.point(&c.lower_corner()),
        TagRule::Center => f.point(&c.center()),
        TagRule::Average => f.cube_average(c).expect("cube resolved by field"),
    }
}

/// Per-cube tag values at generation `m`, in index order.
fn tag_values(f: &SampledField, d: usize, m: u32, tag: TagRule) -> Result<Vec<f64>> {
    if tag == TagRule::Average {
        let vol = (-((m as usize * d) as f64)).exp2();
        return Ok(f.cube_integrals(m)?.into_iter().map(|v| v / vol).collect());
    }
    Ok((0..1u64 << (m as usize * d))
        .into_par_iter()
        .map(|k| tag_value(f, &CubeId::new(d, m, k).expect("in range"), tag))
        .collect())
}

/// `Σ_K f(tag K) ω(K)` over the generation-`m` dyadic division.
pub fn riemann_sum(f: &SampledField, w: &GridCharge, m: u32, tag: TagRule) -> Result<f64> {
    if f.dim() != w.dim() {
        return Err(Error::Mismatch("field and charge dimensions differ".into()));
    }
    if m > w.depth() || m > f.resolution() {
        return Err(Error::Depth(format!(
            "generation {m} beyond charge depth {} or field resolution {}",
            w.depth(),
            f.resolution()
        )));
    }
    let tags = tag_values(f, w.dim(), m, tag)?;
    let lvl = w.level(m);
    Ok(pairwise_sum_by(tags.len(), |i| tags[i] * lvl[i]))
}

/// Constant `C` in `|∫_K f ω - f(x) ω(K)| <= C Lip^β(f) ||ω||_γ |K|^γ
/// (diam K)^β / (isop K)^{d(1-γ)}` for dyadic cubes `K` and `x ∈ K`, read
/// off the sewing gap `2^d Lip^β(f) d^{β/2} ||ω||_γ |K|^{1+ε} / (1 - 2^{-dε})`.
pub fn young_loeve_constant(d: usize, beta: f64, gamma: f64) -> f64 {
    let d_f = d as f64;
    let de = d_f * sewing_epsilon(d, beta, gamma);
    d_f.exp2() / ((1.0 - (-de).exp2()) * (2.0 * d_f).powf(d_f * (1.0 - gamma)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct YoungLoeve {
    pub bound: f64,
    /// The point actually used: `x` if it lies in the figure, otherwise the
    /// centre of the nearest cell of the figure.
    pub point: Vec<f64>,
}

pub fn young_loeve_bound(
    f: &SampledField,
    w: &GridCharge,
    gamma: f64,
    fig: &DyadicFigure,
    x: &[f64],
) -> Result<YoungLoeve> {
    check_pair(f, w, gamma)?;
    if fig.is_empty() {
        return Err(Error::Figure("empty figure".into()));
    }
    let d = w.dim();
    let res = fig.resolution();
    let inside = locate(x, res)
        .map(|c| fig.contains_cell(crate::dyadic::interleave(&c, res)))
        .unwrap_or(false);
    let point = if inside && x.len() == d {
        x.to_vec()
    } else {
        let dist = |k: u64| {
            let c = CubeId::new(d, res, k).expect("cell in range").center();
            c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        };
        let best = fig
            .cells()
            .iter()
            .copied()
            .min_by(|&a, &b| dist(a).total_cmp(&dist(b)))
            .expect("non-empty");
        CubeId::new(d, res, best).expect("cell in range").center()
    };
    let m = fig.measures();
    let h = holder_norm(w, gamma)?;
    let bound = young_loeve_constant(d, f.beta(), gamma)
        * f.lip()
        * h
        * m.volume.powf(gamma)
        * m.diameter.powf(f.beta())
        / m.isop.expect("non-empty").powf(d as f64 * (1.0 - gamma));
    Ok(YoungLoeve { bound, point })
}

/// Sum over the generation-`m` division of the per-cube Young-Loeve bounds:
/// `2^d Lip^β(f) d^{β/2} ||ω||_γ 2^{-m dε} / (1 - 2^{-dε})`.
pub fn riemann_bound(d: usize, beta: f64, gamma: f64, lip: f64, h: f64, m: u32) -> f64 {
    let de = d as f64 * sewing_epsilon(d, beta, gamma);
    (d as f64).exp2() * lip * (d as f64).powf(beta / 2.0) * h * (-(m as f64) * de).exp2()
        / (1.0 - (-de).exp2())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RiemannRow {
    pub m: u32,
    pub sum: f64,
    pub error: f64,
    pub bound: f64,
}

/// Riemann sums at generations `0..=depth` against a reference value.
/// `bound` combines the Young-Loeve envelope with the interpolation error of
/// the tags (zero for [`TagRule::Average`]).
pub fn riemann_table(
    f: &SampledField,
    w: &GridCharge,
    gamma: f64,
    tag: TagRule,
    reference: f64,
) -> Result<Vec<RiemannRow>> {
    check_pair(f, w, gamma)?;
    let h = holder_norm(w, gamma)?;
    let tag_err = if tag == TagRule::Average { 0.0 } else { f.point_error_bound() };
    (0..=w.depth())
        .map(|m| {
            let sum = riemann_sum(f, w, m, tag)?;
            let mass: f64 = w.level(m).iter().map(|v| v.abs()).sum();
            Ok(RiemannRow {
                m,
                sum,
                error: (sum - reference).abs(),
                bound: riemann_bound(w.dim(), f.beta(), gamma, f.lip(), h, m) + tag_err * mass,
            })
        })
        .collect()
}

/// A cube function with declared almost-additivity constants: for every cube
/// `|η(K) - Σ_children η(L)| <= κ |K|^{1+ε}` and `|η(K)| <= κ |K|^γ`.
pub trait SeedFunction: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, c: &CubeId) -> f64;
    fn kappa(&self) -> f64;
    fn epsilon(&self) -> f64;
}

/// An additive seed: the charge itself.
pub struct ChargeSeed<'a> {
    pub charge: &'a GridCharge,
    pub epsilon: f64,
}

impl SeedFunction for ChargeSeed<'_> {
    fn dim(&self) -> usize {
        self.charge.dim()
    }
    fn eval(&self, c: &CubeId) -> f64 {
        self.charge.value(c).expect("cube within charge depth")
    }
    fn kappa(&self) -> f64 {
        0.0
    }
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// `η(K) = f(x_K) ω(K)`.
pub struct RiemannSeed<'a> {
    f: &'a SampledField,
    w: &'a GridCharge,
    tag: TagRule,
    kappa: f64,
    epsilon: f64,
}

impl<'a> RiemannSeed<'a> {
    /// Constants `κ = ||ω||_γ max(2^d Lip^β(f) d^{β/2}, sup |f|)` and `1 + ε = γ + β/d`.
    pub fn new(f: &'a SampledField, w: &'a GridCharge, gamma: f64, tag: TagRule) -> Result<Self> {
        check_pair(f, w, gamma)?;
        let d = w.dim() as f64;
        let h = holder_norm(w, gamma)?;
        let sup = f.sup_norm() + f.point_error_bound();
        let kappa = h * (d.exp2() * f.lip() * d.powf(f.beta() / 2.0)).max(sup);
        Ok(RiemannSeed {
            f,
            w,
            tag,
            kappa,
            epsilon: sewing_epsilon(w.dim(), f.beta(), gamma),
        })
    }
}

impl SeedFunction for RiemannSeed<'_> {
    fn dim(&self) -> usize {
        self.w.dim()
    }
    fn eval(&self, c: &CubeId) -> f64 {
        tag_value(self.f, c, self.tag) * self.w.value(c).expect("cube within charge depth")
    }
    fn kappa(&self) -> f64 {
        self.kappa
    }
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

#[derive(Debug, Clone)]
pub struct SewResult {
    pub charge: GridCharge,
    /// `κ / (1 - 2^{-dε})`: the a-priori bound on `|η(K) - θ(K)| / |K|^{1+ε}`.
    pub defect: f64,
    pub kappa: f64,
    pub epsilon: f64,
}

impl SewResult {
    /// `|η(K) - θ(K)|` bound for the limit charge `θ`.
    pub fn gap_bound(&self, c: &CubeId) -> f64 {
        self.defect * c.volume().powf(1.0 + self.epsilon)
    }

    /// Bound on `|θ(K) - θ_{N-n}(K)|`: the distance between the sewn value
    /// at depth `N` and the limit charge.
    pub fn remainder_bound(&self, c: &CubeId) -> f64 {
        let d = self.charge.dim() as f64;
        let p = (self.charge.depth() - c.generation()) as f64;
        self.gap_bound(c) * (-(p * d * self.epsilon)).exp2()
    }
}

/// Leaves `θ(K_{N,k}) = η(K_{N,k})`, coarser cubes by summation.
pub fn sew(eta: &dyn SeedFunction, gamma: f64, n: u32) -> Result<SewResult> {
    let d = eta.dim();
    check_gamma(d, gamma)?;
    let eps = eta.epsilon();
    if !(eps > 0.0) {
        return Err(Error::ExponentCondition(format!("ε = {eps} must be positive")));
    }
    let charge = GridCharge::from_cube_fn(d, n, |c| eta.eval(c))?.with_gamma_hint(Some(gamma));
    let kappa = eta.kappa();
    Ok(SewResult {
        charge,
        defect: kappa / (1.0 - (-(d as f64) * eps).exp2()),
        kappa,
        epsilon: eps,
    })
}

/// Observed constants of a seed on all cubes of generation `0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SeedDiagnostics {
    /// `max |η(K) - Σ_children η(L)| / |K|^{1+ε}` over generations `< N`.
    pub additivity: f64,
    /// `max |η(K)| / |K|^γ`.
    pub growth: f64,
}

pub fn seed_diagnostics(eta: &dyn SeedFunction, gamma: f64, n: u32) -> Result<SeedDiagnostics> {
    let d = eta.dim();
    let levels: Vec<Vec<f64>> = (0..=n)
        .map(|g| {
            (0..1u64 << (g as usize * d))
                .into_par_iter()
                .map(|k| eta.eval(&CubeId::new(d, g, k).expect("in range")))
                .collect()
        })
        .collect();
    let m = 1usize << d;
    let eps = eta.epsilon();
    let mut additivity = 0.0f64;
    let mut growth = 0.0f64;
    for (g, lvl) in levels.iter().enumerate() {
        let vol = (-((g * d) as f64)).exp2();
        let vmax = lvl.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        growth = growth.max(vmax / vol.powf(gamma));
        if g < n as usize {
            let kids = &levels[g + 1];
            let worst = lvl
                .iter()
                .enumerate()
                .map(|(k, v)| (v - kids[k * m..(k + 1) * m].iter().sum::<f64>()).abs())
                .fold(0.0f64, f64::max);
            additivity = additivity.max(worst / vol.powf(1.0 + eps));
        }
    }
    Ok(SeedDiagnostics { additivity, growth })
}

/// The indefinite integral `f · ω` at the depth of `ω`, sewn from the seeds
/// `η(K) = (mean of f over K) ω(K)`.
pub fn indefinite(f: &SampledField, w: &GridCharge, gamma: f64) -> Result<SewResult> {
    let seed = RiemannSeed::new(f, w, gamma, TagRule::Average)?;
    sew(&seed, gamma, w.depth())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LocalityReport {
    pub value: f64,
    pub tolerance: f64,
    pub within: bool,
}

/// Checks `(f · ω)(F) ≈ 0` when `f` vanishes on `F` or `ω` vanishes on `F`.
pub fn locality_check(
    f: &SampledField,
    w: &GridCharge,
    gamma: f64,
    fig: &DyadicFigure,
) -> Result<LocalityReport> {
    check_pair(f, w, gamma)?;
    if fig.dim() != w.dim() || fig.resolution() > w.depth() {
        return Err(Error::Resolution(format!(
            "figure resolution {} beyond charge depth {}",
            fig.resolution(),
            w.depth()
        )));
    }
    if fig.is_empty() {
        return Ok(LocalityReport {
            value: 0.0,
            tolerance: 0.0,
            within: true,
        });
    }
    let fine = fig.refine(w.depth())?;
    let omega_zero = fine.cells().iter().all(|&k| w.leaves()[k as usize] == 0.0);
    let f_zero = fig.refine(f.resolution())?.cells().iter().all(|&k| f.cells()[k as usize] == 0.0);
    if !omega_zero && !f_zero {
        return Err(Error::Precondition(
            "neither the field nor the charge vanishes on the figure".into(),
        ));
    }
    let sewn = indefinite(f, w, gamma)?;
    let value = sewn.charge.value_figure(fig)?;
    let tolerance: f64 = fig
        .cells()
        .iter()
        .map(|&k| sewn.remainder_bound(&CubeId::new(w.dim(), fig.resolution(), k).expect("cell")))
        .sum();
    Ok(LocalityReport {
        value,
        tolerance,
        within: value.abs() <= tolerance,
    })
}
