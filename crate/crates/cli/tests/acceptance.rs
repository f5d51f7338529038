//! End-to-end acceptance checks. Runs without the libtest harness so the
//! PASS/FAIL table is always printed; exits nonzero if any check fails.
//!
//! `cargo test --test acceptance -- 3 9` runs only checks 3 and 9.

use simplexlab::estimators::{
    estimate_t_graph, estimate_t_simplex, predicted_exponent, superlevel_set, telescoping_ladder,
};
use simplexlab::euclid_config::{omega_check, random_sphere_instance, Simplex};
use simplexlab::graph_config::DistanceGraph;
use simplexlab::linalg::{apply, dist, random_rotation, Point};
use simplexlab::measure_forge::{
    build_cantor_dust, estimate_frostman_constant, geometric_radii, renormalize, IteratedFunctionSystem,
    PointMassMeasure, DEFAULT_TAU,
};
use simplexlab::mollify::{mollify, truncate, GridFunction, GridSpec, MollifierSpec};
use simplexlab::patternscan::{find_similar_simplex, Cloud, ScanParams};
use simplexlab::rng::Streams;
use simplexlab::sampler::{fubini_check, rotation_invariance_check, ChainSampler, Statistic};
use simplexlab::spectral::{i_lambda_decay, spectral_identity_check};
use simplexlab::stats::{loglog_fit, z_score};
use simplexlab_cli::{run, ExperimentConfig};

use rand::Rng;
use std::collections::BTreeMap;
use std::error::Error;
use std::time::{Duration, Instant};

type Check = Result<Verdict, Box<dyn Error>>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Check {
    Ok(Verdict {
        pass,
        detail: detail.into(),
    })
}

fn centered(mu: PointMassMeasure) -> PointMassMeasure {
    let (lo, hi) = mu.bounding_box();
    let shift: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| -0.5 * (a + b)).collect();
    mu.affine_image(1.0, &shift)
}

fn sierpinski(depth: usize) -> PointMassMeasure {
    centered(build_cantor_dust(&IteratedFunctionSystem::sierpinski_2d(depth)).unwrap())
}

fn uniform_square(depth: usize) -> PointMassMeasure {
    centered(build_cantor_dust(&IteratedFunctionSystem::full_grid(2, depth)).unwrap())
}

fn cantor_line(depth: usize) -> PointMassMeasure {
    centered(build_cantor_dust(&IteratedFunctionSystem::cantor_1d(depth)).unwrap())
}

const SCALES: [f64; 4] = [0.125, 0.0625, 0.03125, 0.015625];

/// (d, m) pairs cycled through for the sphere-intersection instances.
fn sphere_shapes() -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for d in 3..=5 {
        for m in 1..d {
            v.push((d, m));
        }
    }
    v
}

fn sphere_instances(count: usize) -> Vec<(Vec<Point>, Vec<f64>)> {
    let mut rng = Streams::new(1).rng(0);
    let shapes = sphere_shapes();
    (0..count)
        .map(|i| {
            let (d, m) = shapes[i % shapes.len()];
            random_sphere_instance(d, m, &mut rng).unwrap()
        })
        .collect()
}

fn omega_weight_formula() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (c, t) in sphere_instances(20) {
        worst = worst.max(omega_check(&c, &t, 24)?.relative_error);
    }
    let took = start.elapsed();
    verdict(
        worst <= 1e-4 && took < Duration::from_secs(60),
        format!("20 instances, max relative error {worst:.2e}, {:.1}s", took.as_secs_f64()),
    )
}

fn chart_independence() -> Check {
    let mut gaps = Vec::new();
    for (c, t) in sphere_instances(20) {
        if let Some((_, _, gap)) = omega_check(&c, &t, 24)?.alternate {
            gaps.push(gap);
        }
        if gaps.len() == 10 {
            break;
        }
    }
    let worst = gaps.iter().cloned().fold(0.0f64, f64::max);
    verdict(
        gaps.len() == 10 && worst <= 1e-6,
        format!("{} instances with two charts, max gap {worst:.2e}", gaps.len()),
    )
}

fn fubini() -> Check {
    let start = Instant::now();
    let path = DistanceGraph::path(vec![vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![1.0, 0.8, 0.0]])?;
    let tri = DistanceGraph::complete(&Simplex::new(vec![vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.4, 0.8, 0.0]])?);
    // flat layout: vertex 1 then vertex 2
    let g = |x: &[f64]| x[3] * x[3] + x[1] + 0.5 * x[0] * x[5];
    let mut zs = Vec::new();
    for (i, graph) in [path, tri].iter().enumerate() {
        let r = fubini_check(graph, &[2], f64::INFINITY, g, 1_000_000, 4, &Streams::new(30 + i as u64))?;
        zs.push(r.z);
    }
    let took = start.elapsed();
    verdict(
        zs.iter().all(|z| z.abs() < 3.0) && took < Duration::from_secs(120),
        format!("z = {:.2} (path), {:.2} (triangle), {:.1}s", zs[0], zs[1], took.as_secs_f64()),
    )
}

fn rotation_invariance() -> Check {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for d in [2usize, 3] {
        let v = Simplex::new(match d {
            2 => vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.3, 0.7]],
            _ => vec![vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.3, 0.7, 0.0], vec![0.2, 0.3, 0.6]],
        })?;
        let sampler = ChainSampler::simplex(&v);
        let first = |x: &[f64]| x[0];
        let square = |x: &[f64]| x[0] * x[0];
        let mixed = move |x: &[f64]| x[0] * x[d + 1] + x[1];
        let stats: [Statistic; 3] = [&first, &square, &mixed];
        let mut rng = Streams::new(40 + d as u64).rng(0);
        for r in 0..5u64 {
            let u = random_rotation(d, &mut rng);
            let rep = rotation_invariance_check(&sampler, &u, &stats, 200_000, &Streams::new(400 + 10 * d as u64 + r))?;
            worst = worst.max(rep.max_abs_z());
            count += stats.len();
        }
    }
    verdict(worst < 3.0, format!("{count} comparisons, max |z| = {worst:.2}"))
}

fn frostman_renormalization() -> Check {
    let mut details = Vec::new();
    let mut pass = true;
    for (name, mu) in [("Cantor line", cantor_line(8)), ("Sierpinski", sierpinski(7))] {
        let s = mu.dimension_s();
        let radii = geometric_radii(4.0 * mu.resolution(), 1.0, 16);
        let streams = Streams::new(5);
        let report = estimate_frostman_constant(&mu, s, 256, &radii, &streams.derive(0))?;
        let renorm = renormalize(&mu, &report)?;
        let k = renorm.verify(256, DEFAULT_TAU, &streams.derive(1)).map(|r| r.constant_k);
        match k {
            Ok(k) => details.push(format!("{name} K' = {k:.3}")),
            Err(e) => {
                pass = false;
                details.push(format!("{name}: {e}"));
            }
        }
    }
    verdict(pass, format!("{} (bound {:.1})", details.join(", "), 4.0 * (1.0 + DEFAULT_TAU)))
}

fn sup_norm_scaling() -> Check {
    let start = Instant::now();
    let grid = GridSpec::new(2, 1.5, 768)?;
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, mu) in [("uniform", uniform_square(8)), ("Sierpinski", sierpinski(8))] {
        let sups: Vec<f64> = SCALES
            .iter()
            .map(|&e| mollify(&mu, &MollifierSpec::new(e), &grid).map(|f| f.sup()))
            .collect::<Result<_, _>>()?;
        let slope = loglog_fit(&SCALES, &sups)?.slope;
        let predicted = mu.dimension_s() - 2.0;
        pass &= (slope - predicted).abs() <= 0.15;
        parts.push(format!("{name} slope {slope:.3} vs {predicted:.3}"));
    }
    let took = start.elapsed();
    pass &= took < Duration::from_secs(300);
    verdict(pass, format!("{}, {:.1}s", parts.join(", "), took.as_secs_f64()))
}

fn spectral_identity() -> Check {
    let two = PointMassMeasure::new(1, &[vec![-0.5], vec![0.5]], vec![0.5, 0.5], 0.0)?;
    let cases = [
        ("two atoms ε=1/4", two.clone(), 0.25),
        ("two atoms ε=1/8", two, 0.125),
        ("Cantor ε=1/16", cantor_line(6), 0.0625),
        ("Sierpinski ε=1/8", sierpinski(4), 0.125),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, mu, eps) in cases {
        let c = spectral_identity_check(&mu, &MollifierSpec::new(eps), None)?;
        worst = worst.max(c.relative_gap);
        parts.push(format!("{name} {:.1e}", c.relative_gap));
    }
    verdict(worst <= 0.01, format!("relative gaps: {}", parts.join(", ")))
}

fn sphere_decay() -> Check {
    let start = Instant::now();
    let v = Simplex::equilateral_triangle(3)?;
    let radii = geometric_radii(1.0, 64.0, 7);
    let fit = i_lambda_decay(&v, 1.0, &[1.0, 0.0, 0.0], &radii, 100_000, &Streams::new(8))?;
    let took = start.elapsed();
    verdict(
        fit.fit.slope <= -0.8 && took < Duration::from_secs(120),
        format!(
            "slope {:.3} (bound exponent {}), {:.1}s",
            fit.fit.slope,
            fit.bound_exponent,
            took.as_secs_f64()
        ),
    )
}

fn telescoping() -> Check {
    let mu = sierpinski(7);
    let v = Simplex::equilateral_triangle(2)?;
    let grid = GridSpec::new(2, 3.0, 768)?;
    let eps = [0.125, 0.0625, 0.03125];
    let ladder = telescoping_ladder(&mu, &v, 0.3, &eps, &grid, 8_000_000, &Streams::new(7))?;
    let d: Vec<f64> = ladder.iter().map(|t| t.abs_difference()).collect();
    let se: Vec<f64> = ladder.iter().map(|t| t.std_error).collect();
    let positive = d.iter().zip(&se).all(|(d, s)| *d > 3.0 * s);
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    let slope = loglog_fit(&eps, &d)?.slope;
    let predicted = predicted_exponent(2, mu.dimension_s());
    let rows: Vec<String> = d.iter().zip(&se).map(|(d, s)| format!("{d:.4}±{s:.4}")).collect();
    verdict(
        positive && decreasing && slope >= 0.0,
        format!("|D| = {}; slope {slope:.3}, bound exponent {predicted:.3}", rows.join(", ")),
    )
}

/// T_{λV}(f) for a planar triangle with v₀ = 0, v₁ = e₁ by deterministic
/// quadrature: midpoint rule in x, trapezoid rule over the rotation angle,
/// both mirror images of v₂ with weight ½.
fn triangle_count_quadrature(f: &GridFunction, v2: [f64; 2], lambda: f64, half: f64, step: f64, angles: usize) -> f64 {
    let nx = (2.0 * half / step).round() as usize;
    let rot: Vec<(f64, f64)> = (0..angles)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / angles as f64;
            (t.cos(), t.sin())
        })
        .collect();
    let mut total = 0.0;
    for i in 0..nx {
        let x0 = -half + (i as f64 + 0.5) * step;
        let mut row = 0.0;
        for j in 0..nx {
            let x1 = -half + (j as f64 + 0.5) * step;
            let fx = f.interpolate(&[x0, x1]);
            if fx == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for &(c, s) in &rot {
                let a = f.interpolate(&[x0 - lambda * c, x1 - lambda * s]);
                if a == 0.0 {
                    continue;
                }
                for sign in [1.0, -1.0] {
                    let (p, q) = (v2[0], sign * v2[1]);
                    let y = [x0 - lambda * (c * p - s * q), x1 - lambda * (s * p + c * q)];
                    acc += 0.5 * a * f.interpolate(&y);
                }
            }
            row += fx * acc / angles as f64;
        }
        total += row;
    }
    total * step * step
}

fn estimator_cross_validation() -> Check {
    let lambda = 0.3;
    let eps = 0.125;
    let v = Simplex::equilateral_triangle(2)?;

    let mu = sierpinski(7);
    let f = mollify(&mu, &MollifierSpec::new(eps), &GridSpec::new(2, 3.0, 768)?)?;
    let streams = Streams::new(10);
    let a = estimate_t_simplex(&f, eps, &v, lambda, 400_000, &streams)?;
    let b = estimate_t_graph(&f, eps, &DistanceGraph::complete(&v), lambda, f64::INFINITY, 400_000, &streams)?.normalized();
    let z_graph = z_score(a.value, a.std_error, b.value, b.std_error);

    let uni = uniform_square(5);
    let g = mollify(&uni, &MollifierSpec::new(eps), &GridSpec::new(2, 3.0, 384)?)?;
    let mc = estimate_t_simplex(&g, eps, &v, lambda, 1_000_000, &Streams::new(11))?;
    let v2 = [v.vertices()[2][0], v.vertices()[2][1]];
    let quad = triangle_count_quadrature(&g, v2, lambda, 1.5, 1.0 / 128.0, 128);
    let z_quad = (mc.value - quad) / mc.std_error;
    verdict(
        z_graph.abs() < 3.0 && z_quad.abs() < 3.0,
        format!(
            "simplex {:.5} vs graph {:.5} (z {z_graph:.2}); uniform MC {:.5}±{:.5} vs quadrature {quad:.5} (z {z_quad:.2})",
            a.value, b.value, mc.value, mc.std_error
        ),
    )
}

fn superlevel() -> Check {
    let small = GridSpec::new(2, 1.5, 768)?;
    let wide = GridSpec::new(2, 3.0, 768)?;
    let cases: Vec<(&str, PointMassMeasure, GridSpec, Vec<f64>)> = vec![
        ("Sierpinski d8", sierpinski(8), small, SCALES.to_vec()),
        ("uniform d8", uniform_square(8), small, SCALES.to_vec()),
        ("Sierpinski d7 wide", sierpinski(7), wide, vec![0.25, 0.125, 0.0625, 0.03125]),
        ("uniform d5 wide", uniform_square(5), GridSpec::new(2, 3.0, 384)?, vec![0.125]),
        ("Cantor line d8", cantor_line(8), GridSpec::new(1, 1.5, 4096)?, SCALES.to_vec()),
    ];
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    let mut failures = Vec::new();
    for (name, mu, grid, eps) in cases {
        for e in eps {
            let spec = MollifierSpec::new(e);
            let f = mollify(&mu, &spec, &grid)?;
            let t = truncate(&f, &mu, &spec)?;
            match superlevel_set(&t, mu.dimension_s(), e) {
                Ok(a) => {
                    let margin = a.measure - 0.5 * a.alpha;
                    worst = worst.min(margin);
                    if margin < -1e-3 {
                        failures.push(format!("{name} ε={e}"));
                    }
                }
                Err(err) => failures.push(format!("{name} ε={e}: {err}")),
            }
            checked += 1;
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{checked} (measure, ε) pairs, min |A| − α/2 = {worst:.3}{}",
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
        ),
    )
}

fn search_soundness() -> Check {
    let start = Instant::now();
    let params = ScanParams {
        lambda_min: 0.1,
        lambda_max: 0.5,
        tolerance: 1e-6,
        budget: 100,
    };
    let mut recovered = 0;
    let mut reverified = 0;
    let mut bad = 0;
    for trial in 0..10u64 {
        let mut rng = Streams::new(12).derive(trial).rng(0);
        let d = 2 + (trial % 2) as usize;
        let v = loop {
            let pts: Vec<Point> = (0..=d).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
            if let Ok(s) = Simplex::new(pts) {
                if s.invariants().delta >= 0.15 {
                    break s;
                }
            }
        };
        let mut points: Vec<Point> = (0..10_000 - v.len()).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let lambda = rng.random_range(0.1..0.5);
        let u = random_rotation(d, &mut rng);
        let shift: Point = (0..d).map(|_| rng.random_range(0.25..0.75)).collect();
        let planted: Vec<usize> = (points.len()..points.len() + v.len()).collect();
        for p in v.vertices() {
            points.push(apply(&u, p).iter().zip(&shift).map(|(a, b)| lambda * a + b).collect());
        }
        let cloud = Cloud::new(points)?;
        let out = find_similar_simplex(&cloud, &v, &params)?;
        if out.matches.iter().any(|m| m.atoms == planted && m.residual <= 1e-9) {
            recovered += 1;
        }
        for m in &out.matches {
            // recomputed from the cloud, not from the match's own fields
            let mut worst: f64 = 0.0;
            for i in 0..v.len() {
                for j in (i + 1)..v.len() {
                    let got = dist(&cloud.points()[m.atoms[i]], &cloud.points()[m.atoms[j]]);
                    worst = worst.max((got - m.lambda * dist(&v.vertices()[i], &v.vertices()[j])).abs());
                }
            }
            let distinct = m.atoms.iter().collect::<std::collections::BTreeSet<_>>().len() == v.len();
            if worst <= params.tolerance && distinct && (params.lambda_min..=params.lambda_max).contains(&m.lambda) {
                reverified += 1;
            } else {
                bad += 1;
            }
        }
    }
    verdict(
        recovered == 10 && bad == 0,
        format!(
            "{recovered}/10 planted copies recovered, {reverified} matches re-verified, {bad} rejected, {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

const DETERMINISM_CONFIGS: &[&str] = &[
    "[experiment]\nkind = gen-measure\n[measure]\nkind = sierpinski\ndepth = 5\n",
    "[experiment]\nkind = frostman\n[measure]\nkind = cantor\ndepth = 7\n[frostman]\ncenters = 64\n",
    "[experiment]\nkind = mollify\n[measure]\nkind = sierpinski\ndepth = 7\n[mollify]\nepsilons = 0.125, 0.0625, 0.03125\nhalfwidth = 1.5\ngrid = 384\n",
    "[experiment]\nkind = estimate\n[measure]\nkind = sierpinski\ndepth = 6\n[mollify]\nepsilons = 0.125\nhalfwidth = 3.0\ngrid = 384\n[estimate]\nlambdas = 0.2, 0.3\nsamples = 100000\n",
    "[experiment]\nkind = estimate\n[measure]\nkind = sierpinski\ndepth = 6\n[mollify]\nepsilon = 0.125\nhalfwidth = 3.0\ngrid = 384\n[pattern]\nkind = graph\nvertices = 0 0; 1 0; 1 0.8\nedges = 0-1, 1-2\neta = 0.5\n[estimate]\nsamples = 100000\n",
    "[experiment]\nkind = telescope\n[measure]\nkind = sierpinski\ndepth = 6\n[mollify]\nepsilons = 0.125, 0.0625\nhalfwidth = 3.0\ngrid = 384\n[estimate]\nsamples = 200000\n",
    "[experiment]\nkind = lambda-scan\n[measure]\nkind = sierpinski\ndepth = 6\n[mollify]\nepsilon = 0.125\nhalfwidth = 3.0\ngrid = 384\n[estimate]\nlambdas = 0.1, 0.3, 0.5\nsamples = 50000\n",
    "[experiment]\nkind = spectral\n[measure]\nkind = cantor\ndepth = 5\n[mollify]\nepsilons = 0.125\n[pattern]\nkind = equilateral\ndim = 3\n[spectral]\nxi_count = 4\nsamples = 20000\n",
    "[experiment]\nkind = omega-verify\n[omega]\ncase = random\ninstances = 6\nnodes = 16\n",
    "[experiment]\nkind = search\n[pattern]\nkind = equilateral\ndim = 2\n[search]\nnoise = 2000\nplant = true\ntolerance = 1e-6\n",
];

fn csv_outputs(dir: &std::path::Path) -> Result<BTreeMap<String, Vec<u8>>, Box<dyn Error>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path)?);
        }
    }
    Ok(out)
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir()?;
    let mut mismatches = Vec::new();
    let mut files = 0;
    for (i, text) in DETERMINISM_CONFIGS.iter().enumerate() {
        let mut reference: Option<BTreeMap<String, Vec<u8>>> = None;
        for (run_index, threads) in [1usize, 8, 1, 8].into_iter().enumerate() {
            let mut cfg = ExperimentConfig::parse(text)?;
            cfg.seed = 13;
            cfg.threads = Some(threads);
            let dir = tmp.path().join(format!("{i}-{run_index}"));
            cfg.out = Some(dir.clone());
            run(&cfg)?;
            let got = csv_outputs(&dir)?;
            match &reference {
                None => {
                    files += got.len();
                    reference = Some(got);
                }
                Some(r) if *r != got => mismatches.push(format!("{} run {run_index}", cfg.kind.name())),
                Some(_) => {}
            }
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "{} configs × 2 runs × {{1, 8}} workers, {files} CSV files{}",
            DETERMINISM_CONFIGS.len(),
            if mismatches.is_empty() { String::new() } else { format!("; differing: {}", mismatches.join(", ")) }
        ),
    )
}

type CheckFn = fn() -> Check;

fn main() {
    let checks: [(u32, &str, CheckFn); 13] = [
        (1, "chart weight formula", omega_weight_formula),
        (2, "chart independence", chart_independence),
        (3, "Fubini nested vs joint", fubini),
        (4, "rotation invariance", rotation_invariance),
        (5, "Frostman renormalization", frostman_renormalization),
        (6, "sup-norm scaling", sup_norm_scaling),
        (7, "spectral identity", spectral_identity),
        (8, "sphere-measure decay", sphere_decay),
        (9, "telescoping decay", telescoping),
        (10, "estimator cross-validation", estimator_cross_validation),
        (11, "superlevel property", superlevel),
        (12, "search soundness", search_soundness),
        (13, "determinism", determinism),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check) in checks {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let (pass, detail) = match check() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{:>2} {name:<28} {}  {detail}", id, if pass { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
