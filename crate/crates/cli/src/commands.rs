use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use dyadic_young::bvalpha::{analyze_f, bracket_report};
use dyadic_young::charge::io::write_charge;
use dyadic_young::charge::{analyze, holder_profile};
use dyadic_young::fbm::{increment_charge, increment_profile, variance_check, FbmSampler, HurstVector, Rect};
use dyadic_young::forms::{jacobian_density_charge, wedge_charge, FunctionTuple};
use dyadic_young::young::{indefinite, riemann_table, young_integral, TagRule};
use dyadic_young::{CubeId, SampledField};

use crate::inputs::{self, Params};
use crate::output::{emit, num, opt, Report, Table};
use crate::{Cli, CliError, Command};

const DEFAULT_DEPTH: u32 = 6;
const DEFAULT_WEDGE_DEPTH: u32 = 5;

/// Finer than the depth where memory allows (about `2^22` cells).
fn default_resolution(d: usize, depth: u32) -> u32 {
    (depth + 2).min(depth.max(22 / d as u32))
}

fn params(cli: &Cli, d: usize, depth: u32, extra: u32) -> Result<Params, CliError> {
    let resolution = cli
        .resolution
        .unwrap_or_else(|| default_resolution(d, depth).max(depth + extra));
    if resolution < depth {
        return Err(CliError::Usage(format!(
            "resolution {resolution} is below depth {depth}"
        )));
    }
    Ok(Params {
        d,
        depth,
        resolution,
        gamma: cli.gamma,
        beta: cli.beta,
        seed: cli.seed,
    })
}

/// Dimension and depth, read from the charge file when there is one.
fn shape(cli: &Cli, charge: &str) -> Result<(usize, u32), CliError> {
    if inputs::is_file_charge(charge) {
        let w = inputs::load_file_charge(charge)?;
        if cli.d.is_some_and(|d| d != w.dim()) {
            return Err(CliError::Usage(format!(
                "--d {} conflicts with the {}-dimensional charge file",
                cli.d.unwrap_or_default(),
                w.dim()
            )));
        }
        let depth = cli.depth.unwrap_or(w.depth());
        if depth > w.depth() {
            return Err(CliError::Usage(format!(
                "depth {depth} exceeds the file's depth {}",
                w.depth()
            )));
        }
        Ok((w.dim(), depth))
    } else {
        Ok((cli.d.unwrap_or(2), cli.depth.unwrap_or(DEFAULT_DEPTH)))
    }
}

fn config(cli: &Cli, p: &Params) -> Value {
    json!({
        "command": cli.command,
        "d": p.d,
        "depth": p.depth,
        "resolution": p.resolution,
        "gamma": p.gamma,
        "beta": p.beta,
        "seed": p.seed,
        "trials": cli.trials,
        "tag": cli.tag,
        "format": cli.format,
        "threads": cli.threads,
        "report": cli.report,
    })
}

fn tag(cli: &Cli) -> Result<TagRule, CliError> {
    Ok(cli.tag.parse()?)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (p, report) = match &cli.command {
        Command::Analyze { charge } => {
            let (d, n) = shape(cli, charge)?;
            let p = params(cli, d, n, 0)?;
            (p, analyze_cmd(charge, &p)?)
        }
        Command::Synth { charge, out } => {
            let (d, n) = shape(cli, charge)?;
            let p = params(cli, d, n, 0)?;
            let cfg = config(cli, &p);
            (p, synth_cmd(charge, out, &p, cfg)?)
        }
        Command::Integrate { field, charge } => {
            let (d, n) = shape(cli, charge)?;
            let p = params(cli, d, n, 0)?;
            (p, integrate_cmd(field, charge, &p, tag(cli)?)?)
        }
        Command::Indefinite { field, charge, out } => {
            let (d, n) = shape(cli, charge)?;
            let p = params(cli, d, n, 0)?;
            let cfg = config(cli, &p);
            (p, indefinite_cmd(field, charge, out.as_deref(), &p, cfg)?)
        }
        Command::Wedge { g, out } => {
            let d = g.len();
            if cli.d.is_some_and(|x| x != d) {
                return Err(CliError::Usage(format!("--d conflicts with {d} components")));
            }
            let n = cli.depth.unwrap_or(DEFAULT_WEDGE_DEPTH);
            let p = params(cli, d, n, 4)?;
            let cfg = config(cli, &p);
            (p, wedge_cmd(g, out, &p, cfg)?)
        }
        Command::Fbm { hurst, out } => {
            let h = parse_hurst(hurst)?;
            if cli.d.is_some_and(|x| x != h.dim()) {
                return Err(CliError::Usage("--d conflicts with the Hurst vector".into()));
            }
            let n = cli.depth.unwrap_or(DEFAULT_DEPTH);
            let p = params(cli, h.dim(), n, 0)?;
            let cfg = config(cli, &p);
            (p, fbm_cmd(h, out, &p, cli.trials, cfg)?)
        }
        Command::Bracket { field, charge } => {
            let (d, n) = shape(cli, charge)?;
            let p = params(cli, d, n, 0)?;
            (p, bracket_cmd(field, charge, &p)?)
        }
        Command::Convergence { field, charge, from, to } => {
            let (d, n) = shape(cli, charge)?;
            let to = to.unwrap_or(n);
            if *from > to {
                return Err(CliError::Usage(format!("empty depth range {from}..={to}")));
            }
            if inputs::is_file_charge(charge) && to > n {
                return Err(CliError::Usage(format!("depth {to} exceeds the charge file")));
            }
            let p = params(cli, d, to, 0)?;
            (p, convergence_cmd(field, charge, &p, *from, to)?)
        }
    };
    emit(&config(cli, &p), report, cli.format, cli.report.as_deref())
}

fn analyze_cmd(charge: &str, p: &Params) -> Result<Report, CliError> {
    let w = inputs::charge(charge, p, p.depth)?;
    let c = analyze(&w);
    let prof = holder_profile(&w, p.gamma)?;
    let decay = c.decay_profile(p.gamma);
    let mut table = Table::new(&["generation", "holderRatio", "decayProfile"]);
    for (g, h) in prof.per_generation.iter().enumerate() {
        table.push([g.to_string(), num(*h), opt(decay.get(g).copied())]);
    }
    Ok(Report {
        result: json!({
            "d": w.dim(),
            "depth": w.depth(),
            "total": w.total(),
            "mass": c.mass,
            "gammaHint": w.gamma_hint(),
            "holderProfile": prof,
            "decayProfile": decay,
            "decaySup": c.decay_sup(p.gamma),
        }),
        table,
    })
}

fn synth_cmd(charge: &str, out: &Path, p: &Params, cfg: Value) -> Result<Report, CliError> {
    let w = inputs::charge(charge, p, p.depth)?;
    let side = write_charge(out, &w, cfg)?;
    let mut table = Table::new(&["path", "d", "depth", "total", "sha256"]);
    table.push([
        out.display().to_string(),
        w.dim().to_string(),
        w.depth().to_string(),
        num(w.total()),
        side.sha256.clone(),
    ]);
    Ok(Report {
        result: json!({"path": out, "total": w.total(), "sidecar": side}),
        table,
    })
}

fn integrate_cmd(field: &str, charge: &str, p: &Params, tag: TagRule) -> Result<Report, CliError> {
    let f = inputs::field(field, p)?;
    let w = inputs::charge(charge, p, p.depth)?;
    let y = young_integral(&f, &w, p.gamma)?;
    let rows = riemann_table(&f, &w, p.gamma, tag, y.value)?;
    let mut table = Table::new(&["m", "sum", "error", "bound"]);
    for r in &rows {
        table.push([r.m.to_string(), num(r.sum), num(r.error), num(r.bound)]);
    }
    Ok(Report {
        result: json!({
            "value": y.value,
            "truncationBound": y.truncation_bound,
            "discretizationBound": y.discretization_bound,
            "generationsUsed": y.generations_used,
            "lip": f.lip(),
            "tag": tag,
            "riemannTable": rows,
        }),
        table,
    })
}

fn indefinite_cmd(
    field: &str,
    charge: &str,
    out: Option<&Path>,
    p: &Params,
    cfg: Value,
) -> Result<Report, CliError> {
    let f = inputs::field(field, p)?;
    let w = inputs::charge(charge, p, p.depth)?;
    let s = indefinite(&f, &w, p.gamma)?;
    let d = w.dim();
    let mut table = Table::new(&["generation", "maxAbs", "gapBound", "remainderBound"]);
    for g in 0..=w.depth() {
        let c = CubeId::new(d, g, 0)?;
        let m = s.charge.level(g).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        table.push([g.to_string(), num(m), num(s.gap_bound(&c)), num(s.remainder_bound(&c))]);
    }
    let root = CubeId::root(d);
    let summary = json!({
        "total": s.charge.total(),
        "defect": s.defect,
        "kappa": s.kappa,
        "epsilon": s.epsilon,
        "remainderBound": s.remainder_bound(&root),
    });
    if let Some(path) = out {
        write_charge(path, &s.charge, json!({"config": cfg, "sewing": summary}))?;
    }
    Ok(Report {
        result: json!({"path": out, "sewing": summary}),
        table,
    })
}

fn wedge_cmd(g: &[String], out: &Path, p: &Params, cfg: Value) -> Result<Report, CliError> {
    let comps = g
        .iter()
        .map(|e| inputs::field(e, p))
        .collect::<Result<Vec<SampledField>, _>>()?;
    let tuple = FunctionTuple::new(comps)?;
    let w = wedge_charge(&tuple, p.depth)?;
    let prof = holder_profile(&w, tuple.gamma())?;
    let oracle = if p.resolution >= 2 {
        let j = jacobian_density_charge(&tuple, p.depth)?;
        let vol = (-((p.depth as usize * p.d) as f64)).exp2();
        let max_abs = w
            .leaves()
            .iter()
            .zip(j.leaves())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        json!({"maxLeafDeviation": max_abs, "maxDensityDeviation": max_abs / vol})
    } else {
        Value::Null
    };
    let diagnostics = json!({"holderProfile": prof, "jacobianOracle": oracle});
    let side = write_charge(out, &w, json!({"config": cfg, "diagnostics": diagnostics}))?;
    let mut table = Table::new(&["generation", "holderRatio"]);
    for (i, h) in prof.per_generation.iter().enumerate() {
        table.push([i.to_string(), num(*h)]);
    }
    Ok(Report {
        result: json!({
            "path": out,
            "sha256": side.sha256,
            "total": w.total(),
            "diagnostics": diagnostics,
        }),
        table,
    })
}

fn parse_hurst(s: &str) -> Result<HurstVector, CliError> {
    let h = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad Hurst parameter '{t}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(HurstVector::new(h)?)
}

/// Five grid-aligned rectangles of varied shape.
fn probes(d: usize) -> Vec<Rect> {
    let mk = |lo: Vec<f64>, hi: Vec<f64>| Rect::new(lo, hi).expect("valid probe");
    vec![
        mk(vec![0.0; d], vec![1.0; d]),
        mk(vec![0.0; d], (0..d).map(|i| if i % 2 == 0 { 0.25 } else { 0.5 }).collect()),
        mk(vec![0.5; d], vec![1.0; d]),
        mk(vec![0.25; d], vec![0.75; d]),
        mk((0..d).map(|i| (i + 1) as f64 / 8.0).collect(), (0..d).map(|i| (i + 3) as f64 / 8.0).collect()),
    ]
}

fn fbm_cmd(h: HurstVector, out: &Path, p: &Params, trials: u64, cfg: Value) -> Result<Report, CliError> {
    if !h.chargeable() {
        eprintln!(
            "warning: mean Hurst parameter {} does not exceed (d-1)/d = {}; the increments need not extend to a Hölder charge",
            h.mean(),
            (p.d as f64 - 1.0) / p.d as f64
        );
    }
    if trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    let sampler = FbmSampler::new(h.clone(), p.depth)?;
    fs::create_dir_all(out)?;

    let first = sampler.sample(p.seed, 0);
    fs::write(out.join("sample.json"), serde_json::to_vec(&first)?)?;
    let w = increment_charge(&first)?;
    write_charge(
        &out.join("charge.hchg"),
        &w,
        json!({"config": cfg, "jitter": sampler.jitter(), "trial": 0}),
    )?;

    let profiles: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| Ok(increment_profile(&increment_charge(&sampler.sample(p.seed, t))?, p.gamma)))
        .collect::<Result<_, CliError>>()?;
    let mut trials_table = Table::new(&["seed", "trial", "generation", "maxScaledIncrement"]);
    for (t, prof) in profiles.iter().enumerate() {
        for (g, v) in prof.iter().enumerate() {
            trials_table.push([p.seed.to_string(), t.to_string(), g.to_string(), num(*v)]);
        }
    }
    trials_table.write(&out.join("trials.csv"))?;

    let mut variance = Table::new(&["probe", "lo", "hi", "trials", "empirical", "target", "z"]);
    let mut checks = Vec::new();
    if trials >= 100 {
        for (i, r) in probes(p.d).iter().enumerate() {
            let v = variance_check(&h, r, trials, p.seed)?;
            let coords = |x: &[f64]| x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ");
            variance.push([
                i.to_string(),
                coords(&r.lo),
                coords(&r.hi),
                trials.to_string(),
                num(v.empirical),
                num(v.target),
                num(v.z),
            ]);
            checks.push(v);
        }
    } else {
        eprintln!("warning: variance table skipped (needs at least 100 trials)");
    }
    variance.write(&out.join("variance.csv"))?;

    Ok(Report {
        result: json!({
            "hurst": h.values(),
            "mean": h.mean(),
            "chargeable": h.chargeable(),
            "jitter": sampler.jitter(),
            "files": ["sample.json", "charge.hchg", "trials.csv", "variance.csv"],
            "variance": checks,
        }),
        table: variance,
    })
}

fn bracket_cmd(field: &str, charge: &str, p: &Params) -> Result<Report, CliError> {
    let f = inputs::field(field, p)?;
    let w = inputs::charge(charge, p, p.depth)?;
    let c = analyze_f(&f, p.gamma, p.depth)?;
    let b = bracket_report(&c, &w)?;
    let bv = c.report();
    let young = young_integral(&f, &w, p.gamma).ok();
    let mut table = Table::new(&["generation", "l1"]);
    for (g, v) in bv.per_generation_l1.iter().enumerate() {
        table.push([g.to_string(), num(*v)]);
    }
    Ok(Report {
        result: json!({"bracket": b, "bv": bv, "young": young}),
        table,
    })
}

fn convergence_cmd(field: &str, charge: &str, p: &Params, from: u32, to: u32) -> Result<Report, CliError> {
    let f = inputs::field(field, p)?;
    let mut table = Table::new(&["depth", "value", "truncationBound", "discretizationBound", "change"]);
    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    for n in from..=to {
        let w = inputs::charge(charge, p, n)?;
        let y = young_integral(&f, &w, p.gamma)?;
        let change = prev.map(|v| y.value - v);
        table.push([
            n.to_string(),
            num(y.value),
            num(y.truncation_bound),
            num(y.discretization_bound),
            opt(change),
        ]);
        rows.push(json!({
            "depth": n,
            "value": y.value,
            "truncationBound": y.truncation_bound,
            "discretizationBound": y.discretization_bound,
            "change": change,
        }));
        prev = Some(y.value);
    }
    Ok(Report { result: json!({"rows": rows}), table })
}
