//! Reproducible random Hölder functions and charges for tests and demos.
//!
//! [`LacunaryPair`] couples a function and a charge through shared random
//! signs, so that the Riemann sums of their Young integral converge at the
//! worst-case rate rather than benefiting from cancellations. The signs are
//! drawn per generation: with per-cube signs the pairing of coarse layers of
//! the function with fine coefficients of the charge adds a random term that
//! blurs the rate at small generations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::charge::{synthesize, FaberCoeffs, GridCharge};
use crate::dyadic::{CubeId, DyadicFigure};
use crate::error::Result;
use crate::field::SampledField;

fn signs(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Shared random signs `s_n` for generations `n < levels`.
#[derive(Debug, Clone)]
pub struct LacunaryPair {
    d: usize,
    seed: u64,
    signs: Vec<f64>,
}

impl LacunaryPair {
    pub fn new(d: usize, levels: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signs = signs(&mut rng, levels as usize);
        LacunaryPair { d, seed, signs }
    }

    pub fn levels(&self) -> u32 {
        self.signs.len() as u32
    }

    /// `f(x) = Σ_n 2^{-nβ} s_n ψ(2^n x)` with `ψ(y) = Π_i sin(2π y_i)`.
    /// Each layer is Lipschitz with constant `O(2^{n(1-β)})`, so `f` is `β`-Hölder.
    pub fn field(&self, m: u32, beta: f64) -> Result<SampledField> {
        let d = self.d;
        let signs = &self.signs;
        SampledField::from_fn(d, m, beta, |x| {
            let mut acc = 0.0;
            for (n, s) in signs.iter().enumerate() {
                let scale = (n as f64).exp2();
                let psi: f64 = x
                    .iter()
                    .map(|&xi| (std::f64::consts::TAU * (xi * scale).fract()).sin())
                    .product();
                acc += (-(n as f64) * beta).exp2() * s * psi;
            }
            acc
        })
    }

    /// Charge with zero mass and coefficients
    /// `a_{n,k,2^d-1} = 2^{nd(1/2-γ)} s_n` plus `noise` times uniform
    /// random values of the same scale on the other types. Coefficients are
    /// drawn generation by generation, so charges of different depths built
    /// from one pair agree on their common generations.
    pub fn charge(&self, depth: u32, gamma: f64, noise: f64) -> Result<GridCharge> {
        let d = self.d;
        let mut c = FaberCoeffs::zeros(d, depth)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        let types = (1usize << d) - 1;
        for n in 0..depth {
            let scale = ((n as usize * d) as f64 * (0.5 - gamma)).exp2();
            let s = match self.signs.get(n as usize) {
                Some(&s) => s,
                None => signs(&mut rng, 1)[0],
            };
            for k in 0..1u64 << (n as usize * d) {
                for r in 1..types {
                    c.set(n, k, r, noise * scale * rng.random_range(-1.0..1.0));
                }
                c.set(n, k, types, scale * s);
            }
        }
        Ok(synthesize(&c)?.with_gamma_hint(Some(gamma)))
    }
}

/// Charge with uniform random mass and coefficients
/// `a_{n,k,r} = 2^{nd(1/2-γ)} u_{n,k,r}`, `u` uniform on `[-1, 1]`.
/// The random stream is consumed generation by generation, so a deeper charge
/// with the same seed refines a shallower one.
pub fn random_holder_charge(d: usize, depth: u32, gamma: f64, seed: u64) -> Result<GridCharge> {
    let mut c = FaberCoeffs::zeros(d, depth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    c.mass = rng.random_range(-1.0..1.0);
    for (n, row) in c.a.iter_mut().enumerate() {
        let scale = ((n * d) as f64 * (0.5 - gamma)).exp2();
        for v in row.iter_mut() {
            *v = scale * rng.random_range(-1.0..1.0);
        }
    }
    Ok(synthesize(&c)?.with_gamma_hint(Some(gamma)))
}

/// Function constant on each generation-`g` cube with values uniform in `[-1, 1]`,
/// sampled at resolution `m >= g`.
pub fn random_piecewise_constant(d: usize, m: u32, g: u32, seed: u64) -> Result<SampledField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..1usize << (g as usize * d))
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let width = 1usize << ((m - g) as usize * d);
    let cells = (0..1usize << (m as usize * d))
        .map(|i| values[i / width])
        .collect();
    SampledField::from_cells(d, m, 1.0, cells)
}

/// `count` figures at resolution `res`, each a union of one to six dyadic
/// cubes with generations drawn uniformly from `1..=res`.
pub fn random_figures(d: usize, res: u32, count: usize, seed: u64) -> Result<Vec<DyadicFigure>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let cubes = (0..rng.random_range(1..=6))
                .map(|_| {
                    let g = rng.random_range(1..=res);
                    CubeId::new(d, g, rng.random_range(0..1u64 << (g as usize * d)))
                })
                .collect::<Result<Vec<_>>>()?;
            DyadicFigure::from_cubes(d, res, &cubes)
        })
        .collect()
}
