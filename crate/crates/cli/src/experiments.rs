//! One function per experiment kind. Each reads its parameters, runs the
//! library calls and returns the outputs in memory.

use crate::config::{ExperimentConfig, Kind};
use crate::svg::{line_chart, Series};
use crate::{CliError, Outcome};
use rand::Rng;
use serde_json::{json, Value};
use simplexlab::estimators::{
    decay_regression, estimate_t_graph, estimate_t_simplex, lambda_scan, predicted_exponent, superlevel_set,
    telescoping_ladder, write_estimates_csv, CountEstimate,
};
use simplexlab::euclid_config::{omega_check, random_sphere_instance, Simplex};
use simplexlab::graph_config::DistanceGraph;
use simplexlab::linalg::{apply, random_rotation, Point};
use simplexlab::measure_forge::{
    build_cantor_dust, estimate_frostman_constant, geometric_radii, read_measure_csv, renormalize, write_measure_csv,
    IteratedFunctionSystem, PointMassMeasure, DEFAULT_TAU,
};
use simplexlab::mollify::{mollify, truncate, GridSpec, MollifierSpec, RESOLUTION_FACTOR};
use simplexlab::patternscan::{find_similar_copy, Cloud, ScanParams};
use simplexlab::rng::Streams;
use simplexlab::sampler::ChainSampler;
use simplexlab::spectral::{i_lambda_decay, measure_spectrum, spectral_identity_check, FrequencyGrid};
use simplexlab::stats::loglog_fit;

/// Stream tags, one per experiment family, so runs of different kinds
/// with the same seed do not share random numbers.
mod tag {
    pub const FROSTMAN: u64 = 1;
    pub const ESTIMATE: u64 = 2;
    pub const TELESCOPE: u64 = 3;
    pub const LAMBDA: u64 = 4;
    pub const SPECTRAL: u64 = 5;
    pub const OMEGA: u64 = 6;
    pub const SEARCH: u64 = 7;
}

pub(crate) fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match cfg.kind {
        Kind::GenMeasure => gen_measure(cfg),
        Kind::Frostman => frostman(cfg),
        Kind::Mollify => mollify_scan(cfg),
        Kind::Estimate => estimate(cfg),
        Kind::Telescope => telescope(cfg),
        Kind::LambdaScan => lambda(cfg),
        Kind::Spectral => spectral(cfg),
        Kind::OmegaVerify => omega(cfg),
        Kind::Search => search(cfg),
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn csv_bytes<F>(f: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> simplexlab::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Header plus rows of preformatted fields.
fn table(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn num(x: f64) -> String {
    format!("{x:.17e}")
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(bad(format!("{name} must be positive and finite, got {x}")))
    }
}

fn measure(cfg: &ExperimentConfig) -> Result<PointMassMeasure, CliError> {
    let kind: String = cfg.get_or("measure", "kind", "sierpinski".to_string())?;
    let depth: usize = cfg.get_or("measure", "depth", 6)?;
    if depth == 0 {
        return Err(bad("[measure] depth must be at least 1"));
    }
    let mu = match kind.as_str() {
        "cantor" => build_cantor_dust(&IteratedFunctionSystem::cantor_1d(depth))?,
        "sierpinski" => build_cantor_dust(&IteratedFunctionSystem::sierpinski_2d(depth))?,
        "full-grid" => {
            let dim: usize = cfg.get_or("measure", "dim", 2)?;
            if !(1..=4).contains(&dim) {
                return Err(bad("[measure] dim must lie in 1..=4 for full-grid"));
            }
            build_cantor_dust(&IteratedFunctionSystem::full_grid(dim, depth))?
        }
        "dirac" => PointMassMeasure::dirac(vec![0.0; cfg.get_or("measure", "dim", 2usize)?.max(1)]),
        "two-atom" => {
            let dim: usize = cfg.get_or("measure", "dim", 1usize)?.max(1);
            let mut a = vec![0.0; dim];
            let mut b = vec![0.0; dim];
            a[0] = -0.5;
            b[0] = 0.5;
            PointMassMeasure::new(dim, &[a, b], vec![0.5, 0.5], 0.0)?
        }
        "csv" => {
            let path: String = cfg.required("measure", "path")?;
            let s: f64 = cfg.required("measure", "s")?;
            let file = std::fs::File::open(&path).map_err(|e| bad(format!("cannot open {path}: {e}")))?;
            read_measure_csv(file, s)?
        }
        other => return Err(bad(format!("unknown measure kind `{other}`"))),
    };
    if cfg.get_or("measure", "center", true)? {
        let (lo, hi) = mu.bounding_box();
        let shift: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| -0.5 * (a + b)).collect();
        Ok(mu.affine_image(1.0, &shift))
    } else {
        Ok(mu)
    }
}

fn epsilons(cfg: &ExperimentConfig) -> Result<Vec<f64>, CliError> {
    let list = match cfg.list::<f64>("mollify", "epsilons")? {
        Some(l) => l,
        None => vec![cfg.get_or("mollify", "epsilon", 0.125)?],
    };
    for &e in &list {
        if !(e > 0.0 && e <= 1.0) {
            return Err(bad(format!("ε = {e} must lie in (0, 1]")));
        }
    }
    Ok(list)
}

fn grid(cfg: &ExperimentConfig, dim: usize) -> Result<GridSpec, CliError> {
    let halfwidth = positive("[mollify] halfwidth", cfg.get_or("mollify", "halfwidth", 3.0)?)?;
    let n: usize = cfg.get_or("mollify", "grid", 256)?;
    Ok(GridSpec::new(dim, halfwidth, n)?)
}

enum Pattern {
    Simplex(Simplex),
    Graph(DistanceGraph, f64),
}

fn pattern(cfg: &ExperimentConfig, dim: usize) -> Result<Pattern, CliError> {
    let kind: String = cfg.get_or("pattern", "kind", "equilateral".to_string())?;
    let d: usize = cfg.get_or("pattern", "dim", dim)?;
    Ok(match kind.as_str() {
        "equilateral" => Pattern::Simplex(Simplex::equilateral_triangle(d)?),
        "regular" => Pattern::Simplex(Simplex::regular(cfg.get_or("pattern", "count", 3usize)?, d)?),
        "vertices" => {
            let pts = cfg
                .points("pattern", "vertices")?
                .ok_or_else(|| bad("[pattern] vertices is required"))?;
            Pattern::Simplex(Simplex::new(pts)?)
        }
        "graph" => {
            let pts = cfg
                .points("pattern", "vertices")?
                .ok_or_else(|| bad("[pattern] vertices is required"))?;
            let edges = cfg
                .list::<String>("pattern", "edges")?
                .ok_or_else(|| bad("[pattern] edges is required"))?
                .iter()
                .map(|e| {
                    let (a, b) = e.split_once('-').ok_or_else(|| bad(format!("edge `{e}` is not i-j")))?;
                    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(format!("edge `{e}` is not i-j")));
                    Ok((parse(a)?, parse(b)?))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let eta: f64 = cfg.get_or("pattern", "eta", f64::INFINITY)?;
            if !(eta > 0.0) {
                return Err(bad(format!("[pattern] eta must be positive, got {eta}")));
            }
            Pattern::Graph(DistanceGraph::new(pts, edges)?, eta)
        }
        other => return Err(bad(format!("unknown pattern kind `{other}`"))),
    })
}

fn pattern_dim(p: &Pattern) -> usize {
    match p {
        Pattern::Simplex(s) => s.ambient_dim(),
        Pattern::Graph(g, _) => g.ambient_dim(),
    }
}

fn simplex_pattern(cfg: &ExperimentConfig, dim: usize) -> Result<Simplex, CliError> {
    match pattern(cfg, dim)? {
        Pattern::Simplex(s) => Ok(s),
        Pattern::Graph(..) => Err(bad("this experiment needs a simplex pattern")),
    }
}

fn samples(cfg: &ExperimentConfig, section: &str, default: usize) -> Result<usize, CliError> {
    let n: usize = cfg.get_or(section, "samples", default)?;
    if n == 0 {
        return Err(bad(format!("[{section}] samples must be positive")));
    }
    Ok(n)
}

fn lambdas(cfg: &ExperimentConfig) -> Result<Vec<f64>, CliError> {
    let list = match cfg.list::<f64>("estimate", "lambdas")? {
        Some(l) => l,
        None => vec![cfg.get_or("estimate", "lambda", 0.3)?],
    };
    for &l in &list {
        if !(l > 0.0 && l <= 1.0) {
            return Err(bad(format!("λ = {l} must lie in (0, 1]")));
        }
    }
    Ok(list)
}

fn gen_measure(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mu = measure(cfg)?;
    let mut out = Outcome::default();
    out.file("measure.csv", csv_bytes(|w| write_measure_csv(&mu, w))?);
    out.result("atoms", json!(mu.len()));
    out.result("dimension_s", json!(mu.dimension_s()));
    out.result("resolution", json!(mu.resolution()));
    out.report.push(format!("{} atoms, s = {:.6}", mu.len(), mu.dimension_s()));
    Ok(out)
}

fn frostman(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mu = measure(cfg)?;
    let s = mu.dimension_s();
    let r_min = positive("[frostman] r_min", cfg.get_or("frostman", "r_min", 4.0 * mu.resolution())?)?;
    let r_max = positive("[frostman] r_max", cfg.get_or("frostman", "r_max", 1.0)?)?;
    let count: usize = cfg.get_or("frostman", "radii", 16)?;
    let centers: usize = cfg.get_or("frostman", "centers", 256)?;
    let tau = positive("[frostman] tau", cfg.get_or("frostman", "tau", DEFAULT_TAU)?)?;
    if r_min > r_max {
        return Err(bad("[frostman] r_min exceeds r_max"));
    }
    let streams = Streams::new(cfg.seed).derive(tag::FROSTMAN);
    let radii = geometric_radii(r_min, r_max, count);
    let report = estimate_frostman_constant(&mu, s, centers, &radii, &streams.derive(0))?;
    let renorm = renormalize(&mu, &report)?;
    let mut out = Outcome::default();
    let rescan = match renorm.verify(centers, tau, &streams.derive(1)) {
        Ok(r) => r,
        Err(simplexlab::Error::InvariantViolation(msg)) => {
            out.violations.push(msg);
            estimate_frostman_constant(
                &renorm.measure,
                s,
                centers,
                &renorm.rescan_radii,
                &streams.derive(1),
            )?
        }
        Err(e) => return Err(e.into()),
    };
    let rows = vec![
        vec!["source".into(), num(report.constant_k), num(report.witness_radius), report.diverged.to_string()],
        vec!["renormalized".into(), num(rescan.constant_k), num(rescan.witness_radius), rescan.diverged.to_string()],
    ];
    out.file("frostman.csv", table(&["stage", "constant", "witness_radius", "diverged"], &rows));
    out.file("renormalized.csv", csv_bytes(|w| write_measure_csv(&renorm.measure, w))?);
    out.result("constant", json!(report.constant_k));
    out.result("renormalized_constant", json!(rescan.constant_k));
    out.result("bound", json!(4.0 * (1.0 + tau)));
    out.result("retained_mass", json!(renorm.retained_mass));
    out.report.push(format!(
        "Frostman constant {:.4}; after renormalization {:.4} (bound {:.2})",
        report.constant_k,
        rescan.constant_k,
        4.0 * (1.0 + tau)
    ));
    Ok(out)
}

fn mollify_scan(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mu = measure(cfg)?;
    let eps = epsilons(cfg)?;
    let g = grid(cfg, mu.dim())?;
    let c = positive("[mollify] truncation", cfg.get_or("mollify", "truncation", 0.25)?)?;
    let write_density: bool = cfg.get_or("mollify", "write_density", false)?;
    let s = mu.dimension_s();
    let floor = RESOLUTION_FACTOR * mu.resolution();
    if let Some(e) = eps.iter().find(|&&e| e < floor * (1.0 - 1e-12)) {
        return Err(bad(format!("ε = {e} is below the resolution floor {floor} of the measure")));
    }
    let mut out = Outcome::default();
    let mut sup_rows = Vec::new();
    let mut level_rows = Vec::new();
    let mut sups = Vec::new();
    for &e in &eps {
        let spec = MollifierSpec::new(e).with_truncation(c);
        let f = mollify(&mu, &spec, &g)?;
        let t = truncate(&f, &mu, &spec)?;
        let level = superlevel_set(&t, s, e)?;
        sup_rows.push(vec![num(e), num(f.sup())]);
        level_rows.push(vec![num(e), num(level.alpha), num(level.measure), num(0.5 * level.alpha), num(level.c)]);
        sups.push((e, f.sup()));
        if write_density && e == eps[eps.len() - 1] {
            out.file("density.csv", csv_bytes(|w| f.write_csv(w))?);
        }
    }
    out.file("sup_norm.csv", table(&["epsilon", "sup"], &sup_rows));
    out.file("superlevel.csv", table(&["epsilon", "alpha", "measure", "half_alpha", "c"], &level_rows));
    if eps.len() >= 2 {
        let xs: Vec<f64> = sups.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = sups.iter().map(|p| p.1).collect();
        let fit = loglog_fit(&xs, &ys)?;
        let predicted = s - mu.dim() as f64;
        out.result("slope", json!(fit.slope));
        out.result("predicted_slope", json!(predicted));
        out.report.push(format!("sup-norm slope {:.4} (s − k = {predicted:.4})", fit.slope));
    }
    if cfg.svg {
        let svg = line_chart(
            "sup norm of the mollified measure",
            "epsilon",
            "sup",
            &[Series {
                name: "sup".into(),
                points: sups,
            }],
            true,
        );
        out.file("sup_norm.svg", svg.into_bytes());
    }
    Ok(out)
}

fn estimate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mu = measure(cfg)?;
    let pat = pattern(cfg, mu.dim())?;
    if pattern_dim(&pat) != mu.dim() {
        return Err(bad("pattern and measure dimensions differ"));
    }
    let eps = epsilons(cfg)?;
    let lams = lambdas(cfg)?;
    let g = grid(cfg, mu.dim())?;
    let n = samples(cfg, "estimate", 100_000)?;
    let streams = Streams::new(cfg.seed).derive(tag::ESTIMATE);
    let mut rows: Vec<CountEstimate> = Vec::new();
    let mut masses = Vec::new();
    for (i, &e) in eps.iter().enumerate() {
        let f = mollify(&mu, &MollifierSpec::new(e), &g)?;
        for (j, &l) in lams.iter().enumerate() {
            let st = streams.derive((i * lams.len() + j) as u64);
            match &pat {
                Pattern::Simplex(v) => rows.push(estimate_t_simplex(&f, e, v, l, n, &st)?),
                Pattern::Graph(gr, eta) => {
                    let r = estimate_t_graph(&f, e, gr, l, *eta, n, &st)?;
                    masses.push(r.reference_mass);
                    rows.push(r.estimate);
                }
            }
        }
    }
    let mut out = Outcome::default();
    out.file("estimates.csv", csv_bytes(|w| write_estimates_csv(&rows, w))?);
    out.result(
        "estimates",
        Value::Array(rows.iter().map(|r| json!({"lambda": r.lambda, "epsilon": r.epsilon, "T": r.value, "std_err": r.std_error})).collect()),
    );
    if !masses.is_empty() {
        out.result("reference_mass", json!(masses));
    }
    for r in &rows {
        out.report.push(format!("λ = {}, ε = {}: T = {:.6} ± {:.6}", r.lambda, r.epsilon, r.value, r.std_error));
    }
    if cfg.svg {
        let series: Vec<Series> = eps
            .iter()
            .map(|&e| Series {
                name: format!("ε = {e}"),
                points: rows.iter().filter(|r| r.epsilon == e).map(|r| (r.lambda, r.value)).collect(),
            })
            .collect();
        out.file("estimates.svg", line_chart("counting functional", "lambda", "T", &series, false).into_bytes());
    }
    Ok(out)
}

fn telescope(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mu = measure(cfg)?;
    let v = simplex_pattern(cfg, mu.dim())?;
    let eps = epsilons(cfg)?;
    let lambda = lambdas(cfg)?[0];
    let g = grid(cfg, mu.dim())?;
    let n = samples(cfg, "estimate", 1_000_000)?;
    let streams = Streams::new(cfg.seed).derive(tag::TELESCOPE);
    let ladder = telescoping_ladder(&mu, &v, lambda, &eps, &g, n, &streams)?;
    let rows: Vec<Vec<String>> = ladder
        .iter()
        .map(|t| {
            vec![
                num(t.fine.epsilon),
                num(t.coarse.value),
                num(t.fine.value),
                num(t.difference),
                num(t.std_error),
            ]
        })
        .collect();
    let mut out = Outcome::default();
    out.file("telescope.csv", table(&["epsilon", "T_coarse", "T_fine", "difference", "std_err"], &rows));
    let k = mu.dim();
    let s = mu.dimension_s();
    let pairs: Vec<(f64, f64)> = ladder.iter().map(|t| (t.fine.epsilon, t.abs_difference())).collect();
    out.result("predicted_exponent", json!(predicted_exponent(k, s)));
    if pairs.len() >= 2 && pairs.iter().all(|p| p.1 > 0.0) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let fit = loglog_fit(&xs, &ys)?;
        out.result("slope", json!(fit.slope));
        out.report.push(format!(
            "telescoping slope {:.4}; bound exponent {:.4}",
            fit.slope,
            predicted_exponent(k, s)
        ));
        if let Ok(d) = decay_regression(&pairs, k, s) {
            out.result("consistent_with_bound", json!(d.consistent_with_bound));
        }
    }
    if cfg.svg {
        let svg = line_chart(
            "telescoping differences",
            "epsilon",
            "|T(2ε) − T(ε)|",
            &[Series {
                name: format!("λ = {lambda}"),
                points: pairs,
            }],
            true,
        );
        out.file("telescope.svg", svg.into_bytes());
    }
    Ok(out)
}

fn lambda(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mu = measure(cfg)?;
    let v = simplex_pattern(cfg, mu.dim())?;
    let e = epsilons(cfg)?[0];
    let lams = lambdas(cfg)?;
    let g = grid(cfg, mu.dim())?;
    let n = samples(cfg, "estimate", 100_000)?;
    let f = mollify(&mu, &MollifierSpec::new(e), &g)?;
    let scan = lambda_scan(&f, e, &ChainSampler::simplex(&v), &lams, n, &Streams::new(cfg.seed).derive(tag::LAMBDA))?;
    let mut out = Outcome::default();
    out.file("estimates.csv", csv_bytes(|w| write_estimates_csv(&scan.estimates, w))?);
    out.result("integral", json!(scan.integral));
    out.result("integral_std_error", json!(scan.integral_std_error));
    out.result("zero_width", json!(scan.zero_width));
    out.report.push(format!("∫ λ^(1/2) T dλ = {:.6} ± {:.6}", scan.integral, scan.integral_std_error));
    if cfg.svg {
        let pts = scan.estimates.iter().map(|r| (r.lambda, r.value)).collect();
        let svg = line_chart("lambda scan", "lambda", "T", &[Series { name: format!("ε = {e}"), points: pts }], false);
        out.file("estimates.svg", svg.into_bytes());
    }
    Ok(out)
}

fn spectral(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mu = measure(cfg)?;
    let eps = epsilons(cfg)?;
    let mut out = Outcome::default();
    let fgrid = match (cfg.get::<f64>("spectral", "spacing")?, cfg.get::<usize>("spectral", "half_count")?) {
        (Some(sp), Some(m)) => FrequencyGrid::new(mu.dim(), positive("[spectral] spacing", sp)?, m)?,
        (None, None) => FrequencyGrid::for_identity(&mu, eps[eps.len() - 1])?,
        _ => return Err(bad("[spectral] spacing and half_count go together")),
    };
    let spectrum = measure_spectrum(&mu, &fgrid)?;
    out.file("spectrum.csv", csv_bytes(|w| spectrum.write_csv(w))?);
    let mut rows = Vec::new();
    for &e in &eps {
        let chk = spectral_identity_check(&mu, &MollifierSpec::new(e), None)?;
        rows.push(vec![num(e), num(chk.lhs), num(chk.rhs), num(chk.relative_gap)]);
        out.report.push(format!(
            "ε = {e}: frequency side {:.6}, measure side {:.6}, gap {:.2e}",
            chk.lhs, chk.rhs, chk.relative_gap
        ));
        if chk.relative_gap > 0.01 {
            out.violations.push(format!("spectral identity gap {:.3e} at ε = {e}", chk.relative_gap));
        }
    }
    out.file("identity.csv", table(&["epsilon", "lhs", "rhs", "relative_gap"], &rows));
    if cfg.has_section("pattern") {
        let v = simplex_pattern(cfg, mu.dim())?;
        let lo = positive("[spectral] xi_min", cfg.get_or("spectral", "xi_min", 1.0)?)?;
        let hi = positive("[spectral] xi_max", cfg.get_or("spectral", "xi_max", 64.0)?)?;
        let count: usize = cfg.get_or("spectral", "xi_count", 7)?;
        let lam = positive("[spectral] lambda", cfg.get_or("spectral", "lambda", 1.0)?)?;
        let n = samples(cfg, "spectral", 100_000)?;
        if count < 2 || lo >= hi {
            return Err(bad("[spectral] needs xi_min < xi_max and at least two radii"));
        }
        let radii = geometric_radii(lo, hi, count);
        let mut dir = vec![0.0; v.ambient_dim()];
        dir[0] = 1.0;
        let decay = i_lambda_decay(&v, lam, &dir, &radii, n, &Streams::new(cfg.seed).derive(tag::SPECTRAL))?;
        let rows: Vec<Vec<String>> = decay
            .estimates
            .iter()
            .zip(&radii)
            .map(|(e, r)| vec![num(*r), num(e.value), num(e.std_error), e.n_samples.to_string()])
            .collect();
        out.file("i_lambda.csv", table(&["xi", "I", "std_err", "n_samples"], &rows));
        out.result("i_lambda_slope", json!(decay.fit.slope));
        out.result("bound_exponent", json!(decay.bound_exponent));
        out.report.push(format!("I_λ log-log slope {:.4} (bound exponent −1)", decay.fit.slope));
        if cfg.svg {
            let pts = decay.estimates.iter().zip(&radii).map(|(e, r)| (*r, e.value)).collect();
            let svg = line_chart("sphere-measure decay", "|xi|", "I", &[Series { name: "I".into(), points: pts }], true);
            out.file("i_lambda.svg", svg.into_bytes());
        }
    }
    Ok(out)
}

fn omega(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let case: String = cfg.get_or("omega", "case", "circle".to_string())?;
    let nodes: usize = cfg.get_or("omega", "nodes", 24)?;
    let tol = positive("[omega] tolerance", cfg.get_or("omega", "tolerance", 1e-4)?)?;
    let instances: Vec<(Vec<Point>, Vec<f64>)> = match case.as_str() {
        "circle" => vec![(vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]], vec![1.0, 1.0])],
        "random" => {
            let count: usize = cfg.get_or("omega", "instances", 20)?;
            let dims = cfg.list::<usize>("omega", "dims")?.unwrap_or_else(|| vec![3, 4, 5]);
            cfg.record_resolved("omega", "dims", dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", "));
            if dims.iter().any(|&d| !(2..=6).contains(&d)) {
                return Err(bad("[omega] dims must lie in 2..=6"));
            }
            let mut rng = Streams::new(cfg.seed).derive(tag::OMEGA).rng(0);
            (0..count)
                .map(|i| {
                    let d = dims[i % dims.len()];
                    let m = 1 + (i / dims.len()) % (d - 1);
                    random_sphere_instance(d, m, &mut rng).map_err(CliError::from)
                })
                .collect::<Result<_, _>>()?
        }
        other => return Err(bad(format!("unknown omega case `{other}`"))),
    };
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut worst_alt: f64 = 0.0;
    for (i, (c, t)) in instances.iter().enumerate() {
        let chk = omega_check(c, t, nodes)?;
        worst = worst.max(chk.relative_error);
        let (alt, gap) = match &chk.alternate {
            Some((_, v, g)) => {
                worst_alt = worst_alt.max(*g);
                (num(*v), num(*g))
            }
            None => (String::new(), String::new()),
        };
        rows.push(vec![
            i.to_string(),
            c[0].len().to_string(),
            c.len().to_string(),
            chk.chart.coordinates.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(" "),
            num(chk.chart.value),
            num(chk.closed_form),
            num(chk.relative_error),
            alt,
            gap,
        ]);
    }
    let mut out = Outcome::default();
    out.file(
        "omega.csv",
        table(
            &["instance", "d", "m", "coordinates", "chart", "closed_form", "relative_error", "alternate_chart", "alternate_gap"],
            &rows,
        ),
    );
    out.result("max_relative_error", json!(worst));
    out.result("max_alternate_gap", json!(worst_alt));
    out.report.push(format!(
        "chart measure vs c_T·area: max relative error {worst:.3e} over {} instance(s) (tolerance {tol:.0e})",
        instances.len()
    ));
    if worst > tol {
        out.violations.push(format!("chart measure disagrees with c_T·area by {worst:.3e}"));
    }
    Ok(out)
}

fn search(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let params = ScanParams {
        lambda_min: positive("[search] lambda_min", cfg.get_or("search", "lambda_min", 0.1)?)?,
        lambda_max: positive("[search] lambda_max", cfg.get_or("search", "lambda_max", 0.5)?)?,
        tolerance: positive("[search] tolerance", cfg.get_or("search", "tolerance", 1e-3)?)?,
        budget: cfg.get_or("search", "budget", 100)?,
    };
    let plant: bool = cfg.get_or("search", "plant", false)?;
    let noise: usize = cfg.get_or("search", "noise", 0)?;
    let mut rng = Streams::new(cfg.seed).derive(tag::SEARCH).rng(0);
    let source = if cfg.has_section("measure") { Some(measure(cfg)?) } else { None };
    let dim = match &source {
        Some(mu) => mu.dim(),
        None => cfg.get_or("pattern", "dim", 2usize)?,
    };
    let mut points: Vec<Point> = source.iter().flat_map(|mu| mu.atoms().map(|(a, _)| a.to_vec())).collect();
    let pat = pattern(cfg, dim)?;
    let graph = match &pat {
        Pattern::Simplex(s) => DistanceGraph::complete(s),
        Pattern::Graph(g, _) => g.clone(),
    };
    if graph.ambient_dim() != dim {
        return Err(bad("pattern and cloud dimensions differ"));
    }
    points.extend((0..noise).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect::<Point>()));
    let mut planted = None;
    if plant {
        let lam = rng.random_range(params.lambda_min..=params.lambda_max);
        let u = random_rotation(dim, &mut rng);
        let x: Point = (0..dim).map(|_| rng.random_range(0.25..0.75)).collect();
        let copy: Vec<Point> = graph
            .vertices()
            .iter()
            .map(|v| apply(&u, v).iter().zip(&x).map(|(a, b)| lam * a + b).collect())
            .collect();
        points.extend(copy.iter().cloned());
        planted = Some((lam, copy));
    }
    let cloud = match &source {
        Some(mu) if noise == 0 && !plant => Cloud::from_measure(mu),
        _ => Cloud::new(points)?,
    };
    let scan = find_similar_copy(&cloud, &graph, &params)?;
    let mut out = Outcome::default();
    out.file("matches.csv", csv_bytes(|w| scan.write_csv(w))?);
    out.result("matches", json!(scan.matches.len()));
    out.result("truncated", json!(scan.truncated));
    out.result("below_resolution", json!(scan.below_resolution));
    if let Some(best) = scan.matches.first() {
        out.result("best_residual", json!(best.residual));
    }
    if let Some((lam, copy)) = planted {
        let found = scan.matches.iter().any(|m| {
            m.residual <= 1e-9 && m.vertices.iter().zip(&copy).all(|(a, b)| simplexlab::linalg::dist(a, b) < 1e-9)
        });
        out.result("planted_lambda", json!(lam));
        out.result("planted_recovered", json!(found));
        out.report.push(format!("planted copy at λ = {lam:.4} recovered: {found}"));
    }
    out.report.push(format!("{} match(es)", scan.matches.len()));
    Ok(out)
}
