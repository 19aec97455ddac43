//! One function per subcommand; each returns an [`Outcome`] for the report writer.

use std::collections::BTreeMap;

use levy_liouville::functions::SmoothFn;
use levy_liouville::generator::{
    apply_generator_direct, apply_generator_spectral, weighted_decay_norm, DecayVerdict, SpectralOptions,
};
use levy_liouville::liouville::{
    classify_harmonic, fixed_point_residual, hoelder_estimate, weak_residual, ClassifyOptions,
    FixedPointVerdict, HoelderReport, VerdictKind, WeakInput,
};
use levy_liouville::montecarlo::{compare, dynkin_residual, mc_semigroup, sample_increments, SampleBatch};
use levy_liouville::semigroup::{
    apply_semigroup, density_moment, density_regularity_report, radial_dimension_walk, transition_density,
    DensityTable, SemigroupInput,
};
use levy_liouville::symbols::{hartman_wintner_diagnostic, symbol_zero_set, GrowthVerdict};
use levy_liouville::{GridFunction, LevyError};
use serde_json::{json, Value};

use crate::config::{Command, Route, RunConfig};
use crate::CliError;

pub enum Artifact {
    Table { name: String, header: Vec<String>, rows: Vec<Vec<f64>> },
    Grid { name: String, data: GridFunction },
    Hoelder(HoelderReport),
    Density(DensityTable),
    Batch(SampleBatch),
}

#[derive(Default)]
pub struct Outcome {
    pub residuals: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, String>,
    pub results: Value,
    /// Computed a negative verdict (exit code 2).
    pub negative: bool,
    pub artifacts: Vec<Artifact>,
}

fn verdict_name<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => "unknown".into(),
    }
}

fn complex_rows(points: &[Vec<f64>], values: &[levy_liouville::Complex64]) -> Vec<Vec<f64>> {
    points
        .iter()
        .zip(values)
        .map(|(x, v)| x.iter().cloned().chain([v.re, v.im]).collect())
        .collect()
}

fn coord_header(d: usize, tail: &[&str]) -> Vec<String> {
    (1..=d)
        .map(|a| format!("x{a}"))
        .chain(tail.iter().map(|s| s.to_string()))
        .collect()
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cmd {
        Command::SymbolEval => symbol_eval(cfg),
        Command::Moments => moments(cfg),
        Command::HwCheck => hw_check(cfg),
        Command::ZeroSet => zero_set(cfg),
        Command::GeneratorApply => generator_apply(cfg),
        Command::DecayNorm => decay_norm(cfg),
        Command::Density => density(cfg),
        Command::SemigroupApply => semigroup_apply(cfg),
        Command::DimensionWalk => dimension_walk(cfg),
        Command::WeakResidual => weak(cfg),
        Command::FixedPoint => fixed_point(cfg),
        Command::Hoelder => hoelder(cfg),
        Command::Classify => classify(cfg),
        Command::Simulate => simulate(cfg),
        Command::Dynkin => dynkin(cfg),
    }
}

fn symbol_eval(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let xis = cfg.frequencies.clone().unwrap_or_default();
    if xis.iter().any(|x| x.len() != spec.dimension) {
        return Err(CliError::Config("frequencies have the wrong dimension".into()));
    }
    let values = spec.eval_many(&xis)?;
    let min_re = values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    let mut out = Outcome {
        results: json!({
            "family": spec.name(),
            "frequencies": xis,
            "psi": values.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>(),
        }),
        ..Outcome::default()
    };
    if !values.is_empty() {
        out.residuals.insert("min_re_psi".into(), min_re);
    }
    out.artifacts.push(Artifact::Table {
        name: "symbol".into(),
        header: (1..=spec.dimension)
            .map(|a| format!("xi{a}"))
            .chain(["re".into(), "im".into()])
            .collect(),
        rows: complex_rows(&xis, &values),
    });
    Ok(out)
}

fn moments(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let beta = cfg.beta()?;
    let jump = spec.jump_moment(beta, &cfg.tolerances)?;
    let mut out = Outcome::default();
    out.verdicts.insert(
        "levy_measure_moment".into(),
        if jump.finite { "finite" } else { "diverges" }.into(),
    );
    out.negative = !jump.finite;
    let mut results = json!({ "levy_measure_moment": jump });
    if let (Some(_), Some(t)) = (cfg.grid, cfg.t) {
        let table = transition_density(&spec, t, cfg.grid()?)?;
        let dm = density_moment(&table, beta)?;
        out.verdicts.insert(
            "density_moment".into(),
            if dm.finite { "finite" } else { "diverges" }.into(),
        );
        out.residuals.insert("density_moment_tail".into(), dm.tail_estimate);
        out.negative |= !dm.finite;
        results["density_moment"] = json!(dm);
    }
    out.results = results;
    Ok(out)
}

fn hw_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let report = hartman_wintner_diagnostic(&spec, cfg.radii()?)?;
    let mut out = Outcome::default();
    out.verdicts.insert("hartman_wintner".into(), verdict_name(&report.verdict));
    out.negative = report.verdict == GrowthVerdict::Fails;
    out.artifacts.push(Artifact::Table {
        name: "hw".into(),
        header: vec!["R".into(), "min_re_psi".into(), "ratio".into()],
        rows: report.rows.iter().map(|r| vec![r.radius, r.min_re_psi, r.ratio]).collect(),
    });
    out.results = json!(report);
    Ok(out)
}

fn zero_set(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let report = symbol_zero_set(&spec, &cfg.grid()?, &cfg.tolerances)?;
    let mut out = Outcome::default();
    out.verdicts.insert(
        "zero_set".into(),
        if report.non_liouville_warning { "nontrivial" } else { "origin_only" }.into(),
    );
    out.negative = report.non_liouville_warning;
    out.results = json!(report);
    Ok(out)
}

fn generator_apply(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let grid = cfg.grid()?;
    let f = cfg.function(spec.dimension)?;
    let route = cfg.route.unwrap_or_default();
    let mut out = Outcome::default();
    let mut results = json!({ "route": route });
    let spectral = if route != Route::Direct {
        let sampled = GridFunction::sample(grid, f, cfg.envelope_for(f))?;
        let opts = SpectralOptions {
            padding: cfg.padding,
            tolerances: cfg.tolerances,
        };
        let r = apply_generator_spectral(&spec, &sampled, &opts)?;
        out.residuals.insert("imag_residue".into(), r.imag_residue);
        out.residuals.insert("boundary_ratio".into(), r.boundary_ratio);
        results["padding"] = json!(r.padding);
        results["sup_abs"] = json!(r.output.sup_abs());
        Some(r.output)
    } else {
        None
    };
    if route != Route::Spectral {
        let window = cfg.window.unwrap_or(0.25 * grid.period());
        let xs: Vec<Vec<f64>> = match &cfg.points {
            Some(p) => p.clone(),
            None => (0..grid.len())
                .filter(|&i| grid.in_box(i, window))
                .map(|i| grid.point(i))
                .collect(),
        };
        let direct = apply_generator_direct(&spec.triplet()?, f, &xs, cfg.tolerances.quadrature)?;
        if let Some(s) = &spectral {
            let mut scale: f64 = 0.0;
            let mut err: f64 = 0.0;
            for (x, v) in xs.iter().zip(&direct) {
                let sv = s
                    .at(x)
                    .ok_or_else(|| LevyError::Window(format!("{x:?} is not a lattice point")))?;
                err = err.max((sv - v).norm());
                scale = scale.max(v.norm());
            }
            out.residuals
                .insert("route_agreement".into(), if scale > 0.0 { err / scale } else { err });
        }
        out.artifacts.push(Artifact::Table {
            name: "direct".into(),
            header: coord_header(spec.dimension, &["re", "im"]),
            rows: complex_rows(&xs, &direct),
        });
    }
    if let Some(s) = spectral {
        out.artifacts.push(Artifact::Grid { name: "spectral".into(), data: s });
    }
    out.results = results;
    Ok(out)
}

fn decay_norm(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let grid = cfg.grid()?;
    let f = cfg.function(spec.dimension)?;
    let beta = cfg.beta()?;
    let sampled = GridFunction::sample(grid, f, cfg.envelope_for(f))?;
    let af = apply_generator_spectral(
        &spec,
        &sampled,
        &SpectralOptions {
            padding: cfg.padding,
            tolerances: cfg.tolerances,
        },
    )?
    .output;
    let moment = spec.jump_moment(beta, &cfg.tolerances).ok().map(|m| m.finite);
    let report = weighted_decay_norm(&af, beta, cfg.window.unwrap_or(0.5 * grid.period()), moment)?;
    let mut out = Outcome::default();
    out.verdicts.insert("decay_norm".into(), verdict_name(&report.verdict));
    out.residuals.insert("partial".into(), report.partial);
    out.negative = report.verdict == DecayVerdict::Diverges;
    out.results = json!(report);
    Ok(out)
}

fn density(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let mut table = transition_density(&spec, cfg.time()?, cfg.grid()?)?;
    if let Some(beta) = cfg.beta {
        table.record_moment(beta)?;
    }
    let reg = density_regularity_report(&table)?;
    let origin = vec![0.0; spec.dimension];
    let mut out = Outcome::default();
    out.residuals.insert("tail_mass".into(), table.tail_mass);
    out.residuals.insert("clip_mass".into(), table.clip_mass);
    out.verdicts.insert(
        "regularity".into(),
        if reg.consistent_with_c1 { "consistent_with_c1" } else { "not_resolved" }.into(),
    );
    out.results = json!({
        "p_at_origin": table.eval(&origin),
        "mass": table.mass(),
        "sidecar": table.sidecar(),
        "regularity": reg,
    });
    let g = table.grid;
    out.artifacts.push(Artifact::Table {
        name: "density".into(),
        header: coord_header(spec.dimension, &["p"]),
        rows: (0..g.len())
            .map(|i| g.point(i).into_iter().chain([table.values[i]]).collect())
            .collect(),
    });
    if cfg.outputs.binary {
        out.artifacts.push(Artifact::Density(table));
    }
    Ok(out)
}

fn semigroup_apply(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let table = transition_density(&spec, cfg.time()?, cfg.grid()?)?;
    let f = cfg.function(spec.dimension)?;
    let env = cfg.envelope_for(f);
    let beta = cfg.beta.unwrap_or(1.0);
    let xs = cfg.points()?;
    let r = apply_semigroup(&table, SemigroupInput::Callable { f, envelope: env }, xs, beta)?;
    let mut out = Outcome::default();
    out.residuals.insert(
        "max_truncation_bound".into(),
        r.truncation_bound.iter().cloned().fold(0.0, f64::max),
    );
    out.residuals.insert("tail_mass".into(), r.tail_mass);
    out.artifacts.push(Artifact::Table {
        name: "semigroup".into(),
        header: coord_header(spec.dimension, &["re", "im", "truncation_bound"]),
        rows: xs
            .iter()
            .zip(&r.values)
            .zip(&r.truncation_bound)
            .map(|((x, v), b)| x.iter().cloned().chain([v.re, v.im, *b]).collect())
            .collect(),
    });
    out.results = json!({
        "points": xs,
        "values": r.values.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>(),
        "truncation_bound": r.truncation_bound,
        "box_radius": r.box_radius,
        "method": format!("{:?}", r.method),
    });
    Ok(out)
}

fn dimension_walk(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sub = cfg
        .subordinator
        .as_ref()
        .ok_or_else(|| CliError::Config("missing required key `subordinator`".into()))?
        .to_subordinator();
    let k = cfg.k.unwrap_or(1);
    let report = radial_dimension_walk(&sub, cfg.time()?, k, cfg.radii()?)?;
    let mut out = Outcome::default();
    out.residuals.insert("r_factor".into(), report.max_residual_r_factor);
    out.residuals.insert("r_free".into(), report.max_residual_r_free);
    out.artifacts.push(Artifact::Table {
        name: "dimension_walk".into(),
        header: ["r", "profile", "derivative", "companion", "residual_r_factor", "residual_r_free"]
            .map(String::from)
            .to_vec(),
        rows: (0..report.radii.len())
            .map(|i| {
                vec![
                    report.radii[i],
                    report.profile[i],
                    report.derivative[i],
                    report.companion[i],
                    report.residual_r_factor[i],
                    report.residual_r_free[i],
                ]
            })
            .collect(),
    });
    out.results = json!(report);
    Ok(out)
}

fn weak(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let f = cfg.function(spec.dimension)?;
    let env = cfg.envelope_for(f);
    let beta = cfg.beta()?;
    let report = weak_residual(WeakInput::Callable { f, envelope: env }, &spec, None, beta, &cfg.tolerances)?;
    let mut out = Outcome::default();
    out.residuals.insert("weak".into(), report.max_residual);
    out.verdicts.insert(
        "weak".into(),
        if report.weakly_harmonic { "weakly_harmonic" } else { "not_weakly_harmonic" }.into(),
    );
    out.negative = !report.weakly_harmonic;
    out.results = json!(report);
    Ok(out)
}

fn fixed_point(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let grid = cfg.grid()?;
    let f = cfg.function(spec.dimension)?;
    let env = cfg.envelope_for(f);
    let table = transition_density(&spec, cfg.t.unwrap_or(1.0), grid)?;
    let u = GridFunction::sample(grid, f, env)?;
    let window = cfg.window.unwrap_or(0.25 * grid.period());
    let (report, _) = fixed_point_residual(&u, &table, window, cfg.beta()?)?;
    let mut out = Outcome::default();
    out.residuals.insert("fixed_point".into(), report.residual);
    out.residuals.insert("truncation_bound".into(), report.truncation_bound);
    out.verdicts.insert("fixed_point".into(), verdict_name(&report.verdict));
    out.negative = report.verdict == FixedPointVerdict::NotFixedPoint;
    out.results = json!(report);
    Ok(out)
}

fn hoelder(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let table = transition_density(&spec, cfg.t.unwrap_or(1.0), cfg.grid()?)?;
    let f = cfg.function(spec.dimension)?;
    let probes = cfg.probes.clone().unwrap_or_default();
    let report = hoelder_estimate(&table, f, cfg.envelope_for(f), cfg.beta()?, &probes)?;
    let mut out = Outcome::default();
    out.residuals.insert("constant_ratio".into(), report.constant_ratio);
    out.residuals.insert("ratio_spread".into(), report.ratio_spread);
    if let Some(r) = report.empirical_rho {
        out.residuals.insert("empirical_rho".into(), r);
    }
    out.verdicts.insert("hoelder".into(), if report.pass { "pass" } else { "fail" }.into());
    out.negative = !report.pass;
    out.results = json!(report);
    out.artifacts.push(Artifact::Hoelder(report));
    Ok(out)
}

fn classify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let f = cfg.function(spec.dimension)?;
    let opts = ClassifyOptions {
        grid: cfg.grid_opt()?,
        eps: cfg.eps.unwrap_or(0.1),
        window: cfg.window,
        t: cfg.t.unwrap_or(1.0),
        tolerances: cfg.tolerances,
    };
    let verdict = classify_harmonic(f, cfg.envelope_for(f), &spec, cfg.beta()?, &opts)?;
    let mut out = Outcome {
        residuals: verdict.residuals.clone(),
        ..Outcome::default()
    };
    out.verdicts.insert("classification".into(), verdict_name(&verdict.kind));
    out.negative = verdict.kind == VerdictKind::NotHarmonic;
    out.results = json!(verdict);
    Ok(out)
}

fn simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let t = cfg.time()?;
    let n = cfg.samples.unwrap_or(100_000);
    let batch = sample_increments(&spec, t, n, cfg.seed)?;
    let d = spec.dimension;
    let mut out = Outcome::default();
    let means: Vec<f64> = (0..d)
        .map(|a| (0..n).map(|i| batch.increments[i * d + a]).sum::<f64>() / n as f64)
        .collect();
    let mut results = json!({ "samples": n, "mean": means });
    if let (Some(f), Some(xs)) = (&cfg.function, &cfg.points) {
        f.validate(d)?;
        let est = mc_semigroup(&batch, f, xs)?;
        if cfg.grid.is_some() {
            let table = transition_density(&spec, t, cfg.grid()?)?;
            let det = apply_semigroup(
                &table,
                SemigroupInput::Callable { f, envelope: cfg.envelope_for(f) },
                xs,
                cfg.beta.unwrap_or(1.0),
            )?;
            let agreement = compare(&est, &det.values, &det.truncation_bound);
            out.residuals.insert("fraction_within".into(), agreement.fraction_within);
            out.verdicts.insert(
                "agreement".into(),
                if agreement.fraction_within >= 0.95 { "agree" } else { "disagree" }.into(),
            );
            out.negative = agreement.fraction_within < 0.95;
            results["deterministic"] = json!(det.values.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>());
            results["agreement"] = json!(agreement);
        }
        out.artifacts.push(Artifact::Table {
            name: "simulate".into(),
            header: coord_header(d, &["re", "im", "se"]),
            rows: est
                .iter()
                .map(|e| e.x.iter().cloned().chain([e.mean.re, e.mean.im, e.standard_error]).collect())
                .collect(),
        });
        results["estimates"] = json!(est);
    }
    out.results = results;
    if cfg.outputs.binary {
        out.artifacts.push(Artifact::Batch(batch));
    }
    Ok(out)
}

fn dynkin(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let f = cfg.function(spec.dimension)?;
    let x = match &cfg.points {
        Some(p) if !p.is_empty() => p[0].clone(),
        _ => vec![0.0; spec.dimension],
    };
    let report = dynkin_residual(&spec, f as &dyn SmoothFn, &x, cfg.time()?, cfg.quad_points.unwrap_or(16), cfg.grid_opt()?)?;
    let mut out = Outcome::default();
    out.residuals.insert("dynkin".into(), report.residual);
    out.results = json!(report);
    Ok(out)
}
