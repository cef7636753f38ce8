//! Resolution of the textual field and charge arguments.
//!
//! Fields: an expression in the coordinates, `lacunary`, or `@path` for a file
//! of raw cell averages (row-major, axis 0 fastest, separated by whitespace or
//! commas). Charges: `lebesgue`, `density:FIELD`, `random`, `lacunary[:noise]`,
//! `haar:n:k:r`, or the path of a `.hchg` file.

use std::fs;
use std::path::Path;

use dyadic_young::charge::io::read_charge;
use dyadic_young::charge::{density_charge, synthesize, FaberCoeffs};
use dyadic_young::synthetic::{random_holder_charge, LacunaryPair};
use dyadic_young::{GridCharge, SampledField};

use crate::expr;
use crate::CliError;

/// Parameters shared by every generator.
#[derive(Debug, Clone, Copy)]
pub struct Params {
    pub d: usize,
    pub depth: u32,
    pub resolution: u32,
    pub gamma: f64,
    pub beta: f64,
    pub seed: u64,
}

pub fn is_file_charge(src: &str) -> bool {
    src.ends_with(".hchg") || Path::new(src).is_file()
}

pub fn load_file_charge(src: &str) -> Result<GridCharge, CliError> {
    read_charge(Path::new(src)).map_err(|e| match e {
        dyadic_young::Error::Io(io) => {
            CliError::Io(std::io::Error::new(io.kind(), format!("{src}: {io}")))
        }
        e => e.into(),
    })
}

pub fn field(src: &str, p: &Params) -> Result<SampledField, CliError> {
    let src = src.trim();
    if src == "lacunary" {
        return Ok(LacunaryPair::new(p.d, p.resolution, p.seed).field(p.resolution, p.beta)?);
    }
    if let Some(path) = src.strip_prefix('@') {
        let text = fs::read_to_string(path)?;
        let values = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad number '{t}' in {path}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(SampledField::from_row_major(p.d, p.resolution, p.beta, &values)?);
    }
    let e = expr::parse(src)?;
    if e.arity() > p.d {
        return Err(CliError::Usage(format!(
            "expression '{src}' uses coordinate {} in dimension {}",
            e.arity(),
            p.d
        )));
    }
    Ok(SampledField::from_fn(p.d, p.resolution, p.beta, |x| e.eval(x))?)
}

/// Charges of a given depth; files are coarsened when `depth` is below their own.
pub fn charge(src: &str, p: &Params, depth: u32) -> Result<GridCharge, CliError> {
    let src = src.trim();
    if is_file_charge(src) {
        let w = load_file_charge(src)?;
        return Ok(if depth < w.depth() { w.coarsen(depth)? } else { w });
    }
    let hint = Some(p.gamma);
    let (head, arg) = match src.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (src, None),
    };
    let w = match (head, arg) {
        ("lebesgue", None) => GridCharge::lebesgue(p.d, depth)?,
        ("density", Some(f)) => {
            let q = Params { resolution: p.resolution.max(depth), ..*p };
            density_charge(&field(f, &q)?, depth)?.with_gamma_hint(Some(1.0))
        }
        ("random", None) => random_holder_charge(p.d, depth, p.gamma, p.seed)?,
        ("lacunary", noise) => {
            let noise = match noise {
                Some(t) => t
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad noise level '{t}'")))?,
                None => 0.0,
            };
            LacunaryPair::new(p.d, depth, p.seed).charge(depth, p.gamma, noise)?
        }
        ("haar", Some(idx)) => {
            let parts: Vec<&str> = idx.split(':').collect();
            let bad = || CliError::Usage(format!("expected haar:n:k:r, got '{src}'"));
            if parts.len() != 3 {
                return Err(bad());
            }
            let n: u32 = parts[0].parse().map_err(|_| bad())?;
            let k: u64 = parts[1].parse().map_err(|_| bad())?;
            let r: usize = parts[2].parse().map_err(|_| bad())?;
            let mut c = FaberCoeffs::zeros(p.d, depth)?;
            if n >= depth || k >= 1u64 << (n as usize * p.d) || r == 0 || r >= 1 << p.d {
                return Err(CliError::Usage(format!(
                    "haar index ({n}, {k}, {r}) outside depth {depth} in dimension {}",
                    p.d
                )));
            }
            c.set(n, k, r, 1.0);
            synthesize(&c)?.with_gamma_hint(hint)
        }
        _ => {
            return Err(CliError::Usage(format!(
                "unknown charge '{src}' (lebesgue, density:EXPR, random, lacunary[:noise], haar:n:k:r or a .hchg file)"
            )))
        }
    };
    Ok(w)
}
