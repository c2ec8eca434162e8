//! Experiment orchestration: orbit acquisition with caching, the named
//! experiment pipelines, and report assembly.
//!
//! Each experiment transcribes one family of the library's asymptotic
//! identities into finite-resolution checks with pinned tolerances; the
//! acceptance suite drives these same entry points over the built-in
//! fixtures.

use crate::config::{config_hash, ExperimentConfig, ExperimentParams};
use crate::report::{CriterionResult, Report, Table};
use anyhow::{anyhow, bail, Context};
use dirlim::boundary::{
    covering_family, sample_directional, sample_limit_set, CapProduct, ProductBoundaryPoint,
    SampleMode,
};
use dirlim::cone::{
    concavity_violations, cone_directions, growth_indicator_auto, growth_surface,
    maximal_growth_direction, tangent_form, DirectionHull, GrowthPoint, MaxGrowth, TangentForm,
};
use dirlim::dimension::{box_dimension, geometric_scales, local_dimension_profile};
use dirlim::exponents::{delta_min, factor_exponent, joint_delta, staircase, ExponentEstimate};
use dirlim::group::{enumerate_reduced, word_fixed_data, Word};
use dirlim::hyperbolic::{
    angle, axis_translation, busemann, dist, geodesic_point, shadow_cap, BoundaryDir, Cap,
    HPoint, Isometry,
};
use dirlim::joining::{enumerate_orbit, zariski_necessary_report, Orbit, OrbitOptions, SelfJoining};
use dirlim::psmeasure::{build_ps, conformality_check, default_s, shadow_lemma_check};
use dirlim::reference;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::collections::BTreeMap;
use std::path::PathBuf;

pub struct RunEnv {
    pub out_dir: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

#[derive(Default)]
pub struct ExperimentOutcome {
    pub criteria: Vec<CriterionResult>,
    pub estimates: BTreeMap<String, serde_json::Value>,
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
}

impl ExperimentOutcome {
    fn put(&mut self, key: &str, value: impl serde::Serialize) {
        self.estimates.insert(key.to_string(), json!(value));
    }
}

/// Run the configured experiment end to end and assemble the report.
/// Artifact files (report.json, tables/*.csv, orbit cache) are written when
/// the environment provides the destinations.
pub fn run(config: &ExperimentConfig, env: &RunEnv) -> anyhow::Result<Report> {
    let hash = config_hash(config);
    let joining = crate::config::build_joining(config)?;
    let mut warnings = Vec::new();

    let needs_orbit = config.experiment.name != "geometry";
    let orbit = if needs_orbit {
        Some(acquire_orbit(config, &joining, &hash, env, &mut warnings)?)
    } else {
        None
    };

    if let Some(orbit) = &orbit {
        // necessary conditions for Zariski density; F2-style conjugate
        // fixtures intentionally trip these, so they are warnings
        if orbit.k() > 1 {
            match zariski_necessary_report(&joining, 20) {
                Ok(z) => {
                    if !z.all_pairs_differ() {
                        warnings.push(
                            "translation-length spectra coincide across factors; the joining is \
                             conjugate-degenerate"
                                .to_string(),
                        );
                    }
                    if z.spanning.iter().any(|s| !s) {
                        warnings.push("fixed points lie near a proper subsphere".to_string());
                    }
                }
                Err(e) => warnings.push(format!("zariski checks failed: {e}")),
            }
        }
    }

    let params = &config.experiment.params;
    let mut outcome = match config.experiment.name.as_str() {
        "geometry" => exp_geometry(config, &joining, params)?,
        "pingpong" => exp_pingpong(config, &joining)?,
        "theorem-m0" => exp_theorem_m0(&joining, orbit.as_ref().unwrap(), params)?,
        "conjugacy" => exp_conjugacy(orbit.as_ref().unwrap(), params)?,
        "limit-cone" => exp_limit_cone(orbit.as_ref().unwrap())?,
        "growth-indicator" => exp_growth_indicator(orbit.as_ref().unwrap(), params)?,
        "symmetry" => exp_symmetry(orbit.as_ref().unwrap(), params)?,
        "tangent-form" => exp_tangent_form(orbit.as_ref().unwrap(), params)?,
        "ps-measure" => exp_ps_measure(&joining, orbit.as_ref().unwrap(), params)?,
        "local-scaling" => exp_local_scaling(orbit.as_ref().unwrap(), params)?,
        "directional-dimension" => exp_directional_dimension(orbit.as_ref().unwrap(), params)?,
        "covering" => exp_covering(orbit.as_ref().unwrap(), params)?,
        "determinism" => exp_determinism(config, &joining)?,
        other => bail!("unknown experiment {other:?}"),
    };
    warnings.append(&mut outcome.warnings);

    let pass = outcome.criteria.iter().all(|c| c.pass);
    let report = Report {
        experiment: config.experiment.name.clone(),
        config_name: config.name.clone(),
        config_hash: hash,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        generated_unix_ms: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
        cache_file: env.cache.as_ref().map(|p| p.display().to_string()),
        warnings,
        estimates: outcome.estimates,
        criteria: outcome.criteria,
        pass,
        inputs: serde_json::to_value(config).expect("config serializes"),
    };

    if let Some(out_dir) = &env.out_dir {
        std::fs::create_dir_all(out_dir)
            .with_context(|| format!("creating {}", out_dir.display()))?;
        report.write_json(&out_dir.join("report.json"))?;
        crate::report::write_tables(&outcome.tables, out_dir)?;
    }
    Ok(report)
}

fn acquire_orbit(
    config: &ExperimentConfig,
    joining: &SelfJoining,
    hash: &str,
    env: &RunEnv,
    warnings: &mut Vec<String>,
) -> anyhow::Result<Orbit> {
    let depth = config.run.max_word_length;
    let options = OrbitOptions { jordan: config.run.jordan, ..Default::default() };
    if let Some(path) = &env.cache {
        if path.exists() {
            let orbit = Orbit::read_cache(path, hash)
                .map_err(|e| anyhow!("refusing cache {}: {e}", path.display()))?;
            if orbit.max_len() != depth || orbit.has_jordan() != config.run.jordan {
                bail!(
                    "refusing stale cache {}: depth {} / jordan {} but run wants {} / {}",
                    path.display(),
                    orbit.max_len(),
                    orbit.has_jordan(),
                    depth,
                    config.run.jordan
                );
            }
            return Ok(orbit);
        }
    }
    let orbit = enumerate_in_pool(joining, depth, &options, config.run.workers)?;
    if let Some(path) = &env.cache {
        orbit.write_cache(path, hash)?;
        warnings.push(format!("orbit cache written to {}", path.display()));
    }
    Ok(orbit)
}

fn enumerate_in_pool(
    joining: &SelfJoining,
    depth: usize,
    options: &OrbitOptions,
    workers: usize,
) -> anyhow::Result<Orbit> {
    if workers == 0 {
        return Ok(enumerate_orbit(joining, depth, options)?);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    Ok(pool.install(|| enumerate_orbit(joining, depth, options))?)
}

fn scales_from(params: &ExperimentParams, max: f64, ratio: f64, count: usize) -> Vec<f64> {
    geometric_scales(
        params.scale_max.unwrap_or(max),
        params.scale_ratio.unwrap_or(ratio),
        params.scale_count.unwrap_or(count),
    )
}

fn growth_context(orbit: &Orbit, params: &ExperimentParams) -> anyhow::Result<(MaxGrowth, TangentForm)> {
    let res = params.grid_resolution.unwrap_or(if orbit.k() >= 3 { 60 } else { 24 });
    let mg = maximal_growth_direction(orbit, res)?;
    let tf = tangent_form(orbit, &mg.direction)?;
    Ok((mg, tf))
}

fn exponent_json(e: &ExponentEstimate) -> serde_json::Value {
    json!({ "value": e.value, "stderr": e.stderr, "window": e.window, "samples": e.samples })
}

// ---------------------------------------------------------------------------
// geometry: randomized kernel checks against the reference oracles
// ---------------------------------------------------------------------------

fn exp_geometry(
    config: &ExperimentConfig,
    joining: &SelfJoining,
    params: &ExperimentParams,
) -> anyhow::Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::default();
    let n = joining.factor(0).factor_dim();
    let cases = params.cases.unwrap_or(10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);

    let random_dir = |rng: &mut ChaCha8Rng| loop {
        let v = nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(-1.0f64..1.0));
        if v.norm() > 0.1 {
            return BoundaryDir::new(v).expect("nonzero");
        }
    };
    // moderate displacements keep the Lorentz pairings well conditioned;
    // see the scale-noise notes in the geometry module
    let random_isometry = |rng: &mut ChaCha8Rng| {
        let mut g = Isometry::identity(n);
        for _ in 0..2 {
            let a = random_dir(rng);
            let mut b = random_dir(rng);
            while angle(&a, &b) < 0.3 {
                b = random_dir(rng);
            }
            let t = rng.gen_range(0.2..1.2);
            g = g.compose(&axis_translation(&a, &b, t).expect("separated endpoints"));
        }
        g
    };
    let random_point = |rng: &mut ChaCha8Rng| {
        let xi = random_dir(rng);
        let t = rng.gen_range(0.0..2.0);
        geodesic_point(&xi, t).expect("t >= 0")
    };
    let o = HPoint::basepoint(n);

    let mut worst_cocycle: f64 = 0.0;
    let mut worst_dist: f64 = 0.0;
    let mut worst_busemann: f64 = 0.0;
    let mut worst_speed: f64 = 0.0;
    for _ in 0..cases {
        let xi = random_dir(&mut rng);
        let g = random_isometry(&mut rng);
        let x = random_point(&mut rng);
        let mut y = random_point(&mut rng);
        while dist(&x, &y) < 0.2 {
            y = random_point(&mut rng);
        }
        let z = random_point(&mut rng);
        let c = busemann(&xi, &x, &y) + busemann(&xi, &y, &z) - busemann(&xi, &x, &z);
        worst_cocycle = worst_cocycle.max(c.abs());
        let di = (dist(&g.apply(&x), &g.apply(&y)) - dist(&x, &y)).abs();
        worst_dist = worst_dist.max(di);
        let bi = (busemann(&g.apply_boundary(&xi), &g.apply(&x), &g.apply(&y))
            - busemann(&xi, &x, &y))
        .abs();
        worst_busemann = worst_busemann.max(bi);
        let t = rng.gen_range(0.1..6.0);
        let sp = (dist(&o, &geodesic_point(&xi, t).expect("t >= 0")) - t).abs();
        worst_speed = worst_speed.max(sp);
    }
    out.criteria.push(CriterionResult::le(
        "busemann-cocycle",
        worst_cocycle,
        1e-9,
        format!("{cases} randomized cases"),
    ));
    out.criteria.push(CriterionResult::le(
        "dist-invariance",
        worst_dist,
        1e-9,
        format!("{cases} randomized cases"),
    ));
    out.criteria.push(CriterionResult::le(
        "busemann-invariance",
        worst_busemann,
        1e-9,
        format!("{cases} randomized cases"),
    ));
    out.criteria.push(CriterionResult::le(
        "geodesic-unit-speed",
        worst_speed,
        1e-9,
        format!("{cases} randomized cases"),
    ));

    // shadow membership against the ray-marching oracle
    let rays = 1000;
    let d = 5.0;
    let r = 1.0;
    let center = random_dir(&mut rng);
    let x = geodesic_point(&center, d).expect("t >= 0");
    let cap = shadow_cap(&x, r)?;
    let collar = 1e-3;
    let mut disagreements = 0usize;
    let mut off_collar = 0usize;
    for _ in 0..rays {
        let eta = random_dir(&mut rng);
        let in_cap = cap.contains(&eta);
        let min_d = reference::ray_min_distance(&eta, &x, 2.0 * d);
        if in_cap != (min_d <= r) {
            disagreements += 1;
            if (angle(&cap.center, &eta) - cap.angular_radius).abs() >= collar {
                off_collar += 1;
            }
        }
    }
    let fraction = disagreements as f64 / rays as f64;
    out.criteria.push(CriterionResult {
        name: "shadow-ray-oracle".to_string(),
        pass: fraction <= 0.01 && off_collar == 0,
        observed: fraction,
        bound: 0.01,
        detail: format!("{disagreements}/{rays} disagreements, {off_collar} outside the rim collar"),
    });
    out.put("cases", cases);
    Ok(out)
}

// ---------------------------------------------------------------------------
// pingpong: certification margins and exhaustive loxodromy to depth 6
// ---------------------------------------------------------------------------

fn exp_pingpong(
    config: &ExperimentConfig,
    joining: &SelfJoining,
) -> anyhow::Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::default();
    let margin_min = config.joining.caps.margin_min;
    let mut worst_margin = f64::INFINITY;
    for (i, rep) in joining.factors().iter().enumerate() {
        let report = dirlim::group::verify_ping_pong(rep, 256);
        out.put(&format!("factor{}_margin", i + 1), report.min_margin());
        out.put(&format!("factor{}_pass", i + 1), report.pass);
        worst_margin = worst_margin.min(report.min_margin());
    }
    out.criteria.push(CriterionResult::ge(
        "cap-margins",
        worst_margin,
        margin_min,
        format!("{} factors, 256 samples per cap", joining.k()),
    ));

    let mut failures = 0usize;
    let mut words = 0usize;
    for w in enumerate_reduced(joining.generators(), 6) {
        words += 1;
        for i in 0..joining.k() {
            if word_fixed_data(joining.factor(i), &w, None).is_err() {
                failures += 1;
            }
        }
    }
    out.criteria.push(CriterionResult::le(
        "loxodromy-depth-6",
        failures as f64,
        0.0,
        format!("{words} words x {} factors", joining.k()),
    ));
    Ok(out)
}

// ---------------------------------------------------------------------------
// theorem-m0: dim(limit set) = delta_min = max factor exponent
// ---------------------------------------------------------------------------

fn exp_theorem_m0(
    joining: &SelfJoining,
    orbit: &Orbit,
    params: &ExperimentParams,
) -> anyhow::Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::default();
    let k = joining.k();
    let mut factor_estimates = Vec::with_capacity(k);
    for i in 0..k {
        let est = factor_exponent(orbit, i)?;
        out.put(&format!("delta_rho{}", i + 1), exponent_json(&est));
        let values: Vec<f64> = orbit.records().skip(1).map(|r| r.mu()[i]).collect();
        out.tables.push(staircase_table(&format!("staircase_factor{}", i + 1), &values));
        factor_estimates.push(est);
    }
    let max_factor =
        factor_estimates.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max);
    let dmin = delta_min(orbit)?;
    out.put("delta_min", exponent_json(&dmin));
    out.put("max_factor_exponent", max_factor);

    let count = params.sample_count.unwrap_or(120_000);
    let sample = sample_limit_set(orbit, SampleMode::Fixed, count)?;
    let scales = scales_from(params, 0.25, 0.4, 12);
    let dim = box_dimension(&sample.points, &scales, true)?;
    out.put(
        "dim_limit_set",
        json!({ "value": dim.value, "stderr": dim.stderr, "window": dim.window,
                "saturated": dim.saturated, "points": dim.points }),
    );
    out.tables.push(Table {
        name: "box_counts_limit_set".into(),
        header: vec!["eps".into(), "count".into()],
        rows: dim.counts.iter().map(|(e, c)| vec![format!("{e}"), format!("{c}")]).collect(),
    });
    out.tables.push(sample_table(orbit, &sample.points, &sample.sources));
    out.put("gap_dim_vs_delta_min", dim.value - dmin.value);
    out.put("gap_dim_vs_max_factor", dim.value - max_factor);
    out.put("gap_delta_min_vs_max_factor", dmin.value - max_factor);

    out.criteria.push(CriterionResult::within(
        "dim-vs-max-factor",
        dim.value,
        max_factor,
        0.10,
        format!("box dim {:.4} +- {:.4}", dim.value, dim.stderr),
    ));
    out.criteria.push(CriterionResult::within(
        "delta-min-vs-max-factor",
        dmin.value,
        max_factor,
        0.05,
        format!("delta_min {:.4} +- {:.4}", dmin.value, dmin.stderr),
    ));
    Ok(out)
}

fn staircase_table(name: &str, values: &[f64]) -> Table {
    Table {
        name: name.to_string(),
        header: vec!["T".into(), "N".into()],
        rows: staircase(values, 120)
            .into_iter()
            .map(|(t, n)| vec![format!("{t}"), format!("{n}")])
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// conjugacy: sqrt(k) delta vs delta_min dichotomy
// ---------------------------------------------------------------------------

fn exp_conjugacy(orbit: &Orbit, params: &ExperimentParams) -> anyhow::Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::default();
    let k = orbit.k() as f64;
    let jd = joint_delta(orbit)?;
    let dmin = delta_min(orbit)?;
    out.put("joint_delta", exponent_json(&jd));
    out.put("delta_min", exponent_json(&dmin));
    let lhs = k.sqrt() * jd.value;
    out.put("sqrt_k_joint_delta", lhs);
    out.criteria.push(CriterionResult::le(
        "sqrt-k-delta-bound",
        lhs,
        dmin.value + 0.05,
        format!("sqrt(k) delta = {lhs:.4} vs delta_min = {:.4}", dmin.value),
    ));
    match params.dichotomy.as_deref().unwrap_or("generic") {
        "conjugate" => out.criteria.push(CriterionResult::within(
            "conjugate-equality",
            lhs,
            dmin.value,
            0.05,
            "conjugate factors force equality",
        )),
        "strict-gap" => out.criteria.push(CriterionResult::le(
            "strict-gap",
            lhs,
            dmin.value - 0.03,
            "non-conjugate factors force a strict gap",
        )),
        _ => {}
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// limit-cone: interiority of deep Cartan directions
// ---------------------------------------------------------------------------

fn exp_limit_cone(orbit: &Orbit) -> anyhow::Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::default();
    let max_norm = orbit.records().skip(1).map(|r| r.mu_norm()).fold(0.0, f64::max);
    let mut worst_top: f64 = f64::INFINITY;
    for r in orbit.records().skip(1) {
        if r.mu_norm() >= 0.8 * max_norm {
            worst_top = worst_top.min(r.min_mu() / r.mu_norm());
        }
    }
    out.put("min_interior_ratio_top20", worst_top);
    out.criteria.push(CriterionResult::ge(
        "interior-ratio-top20",
        worst_top,
        0.1,
        "min_i mu_i / |mu| over records with |mu| in the top 20%",
    ));

    let envelope = dirlim::cone::interior_cone_envelope(orbit, 12);
    out.tables.push(Table {
        name: "interior_cone_envelope".into(),
        header: vec!["norm_hi".into(), "min_ratio".into(), "count".into()],
        rows: envelope
            .iter()
            .map(|(h, r, c)| vec![format!("{h}"), format!("{r}"), format!("{c}")])
            .collect(),
    });
    // fitted envelope: slope of the per-bin minima beyond the small-word
    // regime must be nonnegative
    let deep: Vec<(f64, f64)> = envelope
        .iter()
        .filter(|&&(h, _, _)| h >= 0.5 * max_norm)
        .map(|&(h, r, _)| (h, r))
        .collect();
    let xs: Vec<f64> = deep.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = deep.iter().map(|p| p.1).collect();
    let slope = dirlim::fit::line_fit(&xs, &ys).map(|l| l.slope).unwrap_or(f64::NAN);
    out.put("envelope_slope", slope);
    out.criteria.push(CriterionResult::ge(
        "envelope-nondecreasing",
        slope,
        -0.001,
        format!("fitted envelope slope over {} bins above half depth", deep.len()),
    ));
    Ok(out)
}

// ---------------------------------------------------------------------------
// growth-indicator: concavity, nonnegativity, maximal direction
// ---------------------------------------------------------------------------

fn exp_growth_indicator(
    orbit: &Orbit,
    params: &ExperimentParams,
) -> anyhow::Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::default();
    let (mg, _tf) = growth_context(orbit, params)?;
    let jd = joint_delta(orbit)?;

    let floor = 0.5 * orbit.records().map(|r| r.mu_norm()).fold(0.0, f64::max);
    let hull = DirectionHull::build(&cone_directions(orbit, floor)?)?;
    let grid = hull.sample_directions(
        params.grid_resolution.unwrap_or(15),
        0.02 * hull.angular_diameter().max(1e-6),
    );
    let surface = growth_surface(orbit, &grid)?;
    out.tables.push(surface_table("growth_surface", &surface.points));

    if orbit.k() == 2 {
        let violations = concavity_violations(&surface.points, 2.0);
        out.put("concavity_violations", violations.len());
        out.criteria.push(CriterionResult::le(
            "concavity",
            violations.len() as f64,
            0.0,
            format!("midpoint checks over {} grid directions at 2 sigma", surface.points.len()),
        ));
    } else {
        out.warnings.push("concavity grid check implemented for k = 2 only".into());
    }

    let worst_negative = surface
        .points
        .iter()
        .map(|p| p.value + p.stderr)
        .fold(f64::INFINITY, f64::min);
    out.criteria.push(CriterionResult::ge(
        "nonnegative-on-hull",
        worst_negative,
        0.0,
        "min over grid of psi + stderr",
    ));

    out.put(
        "max_growth",
        json!({ "direction": mg.direction, "value": mg.value, "stderr": mg.stderr,
                "interior_margin": mg.interior_margin }),
    );
    out.put("joint_delta", exponent_json(&jd));
    out.criteria.push(CriterionResult::within(
        "psi-max-vs-delta",
        mg.value,
        jd.value,
        0.07,
        format!("psi(u_max) {:.4} vs joint delta {:.4}", mg.value, jd.value),
    ));
    out.criteria.push(CriterionResult {
        name: "u-max-interior".to_string(),
        pass: !mg.boundary_warning,
        observed: mg.interior_margin,
        bound: 0.0,
        detail: "argmax must sit inside the empirical cone hull".to_string(),
    });
    Ok(out)
}

fn surface_table(name: &str, points: &[GrowthPoint]) -> Table {
    Table {
        name: name.to_string(),
        header: vec![
            "direction".into(),
            "psi".into(),
            "stderr".into(),
            "aperture".into(),
            "records".into(),
        ],
        rows: points
            .iter()
            .map(|p| {
                vec![
                    p.direction.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" "),
                    format!("{}", p.value),
                    format!("{}", p.stderr),
                    format!("{}", p.aperture),
                    format!("{}", p.records),
                ]
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// symmetry: swap-symmetric growth indicator (F4-style fixtures)
// ---------------------------------------------------------------------------

fn exp_symmetry(orbit: &Orbit, params: &ExperimentParams) -> anyhow::Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::default();
    if orbit.k() != 2 {
        bail!("symmetry experiment expects k = 2");
    }
    let (mg, _) = growth_context(orbit, params)?;
    let diag = [std::f64::consts::FRAC_1_SQRT_2; 2];
    let off = angle_2d(&mg.direction, &diag);
    out.put("u_max", mg.direction.clone());
    out.put("angle_to_diagonal_deg", off.to_degrees());
    out.criteria.push(CriterionResult::le(
        "u-max-on-diagonal",
        off.to_degrees(),
        5.0,
        "maximal growth direction within 5 degrees of the diagonal",
    ));

    // symmetric stencil: psi(u1, u2) vs psi(u2, u1)
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for &offset in &[0.04f64, 0.08, 0.12] {
        let th = std::f64::consts::FRAC_PI_4 + offset;
        let u = [th.cos(), th.sin()];
        let v = [th.sin(), th.cos()];
        let a = growth_indicator_auto(orbit, &u)?;
        let b = growth_indicator_auto(orbit, &v)?;
        let gap = (a.value - b.value).abs();
        let sigma = a.stderr.max(b.stderr);
        worst = worst.max(gap - 2.0 * sigma);
        rows.push(vec![
            format!("{offset}"),
            format!("{}", a.value),
            format!("{}", b.value),
            format!("{}", a.stderr),
            format!("{}", b.stderr),
        ]);
    }
    out.tables.push(Table {
        name: "symmetry_stencil".into(),
        header: vec![
            "offset".into(),
            "psi_uv".into(),
            "psi_vu".into(),
            "stderr_uv".into(),
            "stderr_vu".into(),
        ],
        rows,
    });
    out.criteria.push(CriterionResult::le(
        "swap-symmetry",
        worst,
        0.0,
        "max over stencil of |psi(u1,u2) - psi(u2,u1)| - 2 stderr",
    ));
    Ok(out)
}

fn angle_2d(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}

// ---------------------------------------------------------------------------
// tangent-form: supporting hyperplanes at and off the maximal direction
// ---------------------------------------------------------------------------

fn exp_tangent_form(orbit: &Orbit, params: &ExperimentParams) -> anyhow::Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::default();
    let (mg, _) = growth_context(orbit, params)?;
    let floor = 0.5 * orbit.records().map(|r| r.mu_norm()).fold(0.0, f64::max);
    let hull = DirectionHull::build(&cone_directions(orbit, floor)?)?;
    let margin = mg.interior_margin;
    let offset = (0.5 * margin).min(0.08);

    let mut directions = vec![("u_max".to_string(), mg.direction.clone())];
    if orbit.k() == 2 {
        for (label, sign) in [("u_plus", 1.0), ("u_minus", -1.0)] {
            let th = mg.direction[1].atan2(mg.direction[0]) + sign * offset;
            let u = vec![th.cos(), th.sin()];
            if hull.contains(&u, 1e-6) {
                directions.push((label.to_string(), u));
            }
        }
    }
    if directions.len() < 3 && orbit.k() == 2 {
        out.warnings.push("fewer than two off-maximal interior directions available".into());
    }

    for (label, u) in &directions {
        let tf = tangent_form(orbit, u)?;
        out.put(
            &format!("tangent_{label}"),
            json!({ "direction": u, "coeffs": tf.form.coeffs, "value_at_u": tf.value_at_u,
                    "abscissa": tf.abscissa.value, "abscissa_stderr": tf.abscissa.stderr }),
        );
        out.criteria.push(CriterionResult {
            name: format!("abscissa-{label}"),
            pass: (0.9..=1.1).contains(&tf.abscissa.value),
            observed: tf.abscissa.value,
            bound: 1.1,
            detail: "abscissa of sum exp(-s psi_u(mu)) must sit in [0.9, 1.1]".to_string(),
        });
        let worst_dip = tf
            .stencil
            .iter()
            .map(|s| tf.form.apply(&s.direction) - (s.value - 2.0 * s.stderr))
            .fold(f64::INFINITY, f64::min);
        out.criteria.push(CriterionResult::ge(
            &format!("tangency-{label}"),
            worst_dip,
            0.0,
            "psi_u >= psi_hat - 2 stderr on the stencil",
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// ps-measure: normalization, conformality battery, shadow lemma
// ---------------------------------------------------------------------------

fn exp_ps_measure(
    joining: &SelfJoining,
    orbit: &Orbit,
    params: &ExperimentParams,
) -> anyhow::Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::default();
    let (mg, tf) = growth_context(orbit, params)?;
    let s = params.s.unwrap_or_else(|| default_s(orbit));
    let measure = build_ps(orbit, &mg.direction, &tf.form, s)?;
    out.put("s", s);
    out.put("psi_u", tf.form.coeffs.clone());
    out.put("atoms", measure.len());

    {
        let mut rows = Vec::new();
        for a in (0..measure.len()).step_by((measure.len() / 10_000).max(1)) {
            let p = measure.point(a);
            let mut row: Vec<String> = p
                .dirs
                .iter()
                .map(|d| d.iter().map(|x| format!("{x:.9}")).collect::<Vec<_>>().join(" "))
                .collect();
            row.push(format!("{}", measure.weight(a)));
            rows.push(row);
        }
        let mut header: Vec<String> =
            (0..joining.k()).map(|i| format!("dir{}", i + 1)).collect();
        header.push("weight".into());
        out.tables.push(Table { name: "measure_atoms".into(), header, rows });
    }
    let norm_defect = (measure.total() - 1.0).abs();
    out.criteria.push(CriterionResult::le(
        "normalization",
        norm_defect,
        1e-12,
        "relative mass defect after build",
    ));

    // conformality battery: generator transports on caps around the
    // generator fixed-point tuples. Radius 0.3 cells contain whole
    // one-letter cylinders, the scale the depth-L truncation resolves;
    // finer cells probe sub-cylinder structure the finite measure has not
    // converged on (the refinement behavior is covered by unit tests).
    let mut errors = Vec::new();
    let mut rows = Vec::new();
    let g_count = joining.generators() as i16;
    for letter in (1..=g_count).flat_map(|i| [i, -i]) {
        let word = Word::reduce(&[letter], joining.generators()).expect("single letter");
        for radius in [0.3] {
            let mut caps = Vec::with_capacity(joining.k());
            for i in 0..joining.k() {
                let (fp, _) = word_fixed_data(joining.factor(i), &word, None)?;
                caps.push(Cap::new(fp, radius)?);
            }
            let cell = CapProduct { caps };
            match conformality_check(&measure, joining, &word, &cell) {
                Ok(rep) => {
                    rows.push(vec![
                        format!("{word}"),
                        format!("{radius}"),
                        format!("{}", rep.measured_ratio),
                        format!("{}", rep.predicted_ratio),
                        format!("{}", rep.mult_error),
                        format!("{}", rep.atoms_in_cell),
                    ]);
                    errors.push(rep.mult_error);
                }
                Err(dirlim::psmeasure::MeasureError::SkippedCell { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    out.tables.push(Table {
        name: "conformality".into(),
        header: vec![
            "word".into(),
            "radius".into(),
            "measured".into(),
            "predicted".into(),
            "mult_error".into(),
            "atoms".into(),
        ],
        rows,
    });
    if errors.is_empty() {
        bail!("conformality battery: every cell was skipped");
    }
    let median_error = dirlim::fit::median(&errors);
    out.put("conformality_cells", errors.len());
    out.criteria.push(CriterionResult::le(
        "conformality-median",
        median_error,
        1.3,
        format!("median multiplicative error over {} cells", errors.len()),
    ));

    // shadow lemma on cyclically reduced records whose mu-direction lies in
    // a thin cone around u_max. Off the tangency direction the truncated
    // measure overweights edge cylinders by e^{(psi_u - psi_Gamma)(v) t},
    // which grows with depth for any fixed v != u; within the contact cone
    // the two-sided law is the faithful finite-depth rendition of the lemma.
    let r = params.shadow_r.unwrap_or(3.0);
    let cone = params.tol_angle.unwrap_or(0.04);
    let cos_cone = cone.cos() - 1e-14;
    let battery: Vec<usize> = orbit
        .records()
        .filter(|rec| {
            let l = rec.word().len();
            if !(3..=5).contains(&l) || !rec.word().cyclic_reduce().0.is_empty() {
                return false;
            }
            let n = rec.mu_norm();
            let c: f64 =
                rec.mu().iter().zip(&mg.direction).map(|(m, ui)| m / n * ui).sum();
            c >= cos_cone
        })
        .map(|rec| rec.index)
        .step_by(3)
        .take(300)
        .collect();
    let report = shadow_lemma_check(&measure, orbit, &battery, r)?;
    out.put("shadow_records", report.ratios.len());
    out.put("shadow_c_hat", report.c_hat);
    out.criteria.push(CriterionResult::le(
        "shadow-lemma-c",
        report.c_hat,
        10.0,
        format!("R = {r}, {} qualifying records", report.ratios.len()),
    ));

    // two-depth stability: the length-lex order makes shallow-orbit indices
    // agree with the deep orbit's prefix
    let shallow_orbit = enumerate_orbit(joining, orbit.max_len() - 2, &OrbitOptions::default())?;
    let shallow_measure =
        build_ps(&shallow_orbit, &mg.direction, &tf.form, default_s(&shallow_orbit))?;
    let shallow = shadow_lemma_check(&shallow_measure, &shallow_orbit, &battery, r)?;
    let by_rec: std::collections::HashMap<usize, f64> =
        shallow.ratios.iter().map(|e| (e.record, e.ratio)).collect();
    let mut worst_drift: f64 = 1.0;
    let mut compared = 0usize;
    for e in &report.ratios {
        if let Some(&other) = by_rec.get(&e.record) {
            worst_drift = worst_drift.max((e.ratio / other).max(other / e.ratio));
            compared += 1;
        }
    }
    out.put("two_depth_compared", compared);
    out.criteria.push(CriterionResult::le(
        "shadow-two-depth",
        worst_drift,
        2.0,
        format!("per-record ratio drift between depths over {compared} records"),
    ));
    Ok(out)
}

// ---------------------------------------------------------------------------
// local-scaling: median ball-mass slope vs psi_u(u)
// ---------------------------------------------------------------------------

fn exp_local_scaling(orbit: &Orbit, params: &ExperimentParams) -> anyhow::Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::default();
    let (mg, tf) = growth_context(orbit, params)?;
    let s = params.s.unwrap_or_else(|| default_s(orbit));
    let measure = build_ps(orbit, &mg.direction, &tf.form, s)?;
    let target = tf.form.apply(&mg.direction);
    out.put("psi_u_at_u", target);

    // 50 probe atoms spread deterministically over the deepest records
    let mut by_depth: Vec<usize> = (0..measure.len()).collect();
    by_depth.sort_by(|&a, &b| {
        let da = orbit.record(measure.sources[a]).min_mu();
        let db = orbit.record(measure.sources[b]).min_mu();
        db.total_cmp(&da).then(a.cmp(&b))
    });
    let pool = &by_depth[..by_depth.len().min(5000)];
    let t_lo = params.t_lo.unwrap_or(2.0);
    let t_hi = params.t_hi.unwrap_or(9.0);
    let mut slopes = Vec::new();
    let mut rows = Vec::new();
    for idx in pool.iter().step_by((pool.len() / 50).max(1)).take(50) {
        let xi = measure.point(*idx);
        match local_dimension_profile(&measure, &xi, &mg.direction, (t_lo, t_hi), 8) {
            Ok(profile) => {
                for (t, mass, atoms) in &profile.table {
                    rows.push(vec![
                        format!("{idx}"),
                        format!("{t}"),
                        format!("{}", -mass.ln()),
                        format!("{atoms}"),
                    ]);
                }
                slopes.push(profile.slope);
            }
            Err(_) => continue,
        }
    }
    out.tables.push(Table {
        name: "local_profiles".into(),
        header: vec!["atom".into(), "t".into(), "neg_log_mass".into(), "atoms_in_ball".into()],
        rows,
    });
    if slopes.len() < 30 {
        bail!("only {} usable local profiles", slopes.len());
    }
    let median_slope = dirlim::fit::median(&slopes);
    out.put("median_slope", median_slope);
    out.put("profiles", slopes.len());
    out.criteria.push(CriterionResult::within(
        "local-scaling-slope",
        median_slope,
        target,
        0.10,
        format!("median over {} atoms vs psi_u(u)", slopes.len()),
    ));
    Ok(out)
}

// ---------------------------------------------------------------------------
// directional-dimension: dim of directional samples vs psi bounds
// ---------------------------------------------------------------------------

fn exp_directional_dimension(
    orbit: &Orbit,
    params: &ExperimentParams,
) -> anyhow::Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::default();
    let (mg, _) = growth_context(orbit, params)?;
    let tol = params.tol_angle.unwrap_or(0.05);
    let scales = scales_from(params, 0.25, 0.4, 11);

    let floor = 0.5 * orbit.records().map(|r| r.mu_norm()).fold(0.0, f64::max);
    let hull = DirectionHull::build(&cone_directions(orbit, floor)?)?;

    let mut directions = vec![("u_max".to_string(), mg.direction.clone())];
    if let Some(u2) = &params.u_second {
        directions.push(("u_second".to_string(), u2.clone()));
    } else if orbit.k() == 2 {
        // an off-maximal interior direction toward the hull edge
        let th = mg.direction[1].atan2(mg.direction[0]) + 0.6 * mg.interior_margin;
        let u = vec![th.cos(), th.sin()];
        if hull.contains(&u, 1e-6) {
            directions.push(("u_second".to_string(), u));
        }
    }

    for (label, u) in &directions {
        let sample = sample_directional(orbit, u, tol)?;
        if sample.insufficient {
            out.criteria.push(CriterionResult {
                name: format!("directional-bounds-{label}"),
                pass: false,
                observed: sample.points.len() as f64,
                bound: 100.0,
                detail: "insufficient directional samples".to_string(),
            });
            continue;
        }
        let psi = growth_indicator_auto(orbit, u)?;
        let dim = box_dimension(&sample.points, &scales, true)?;
        let u_max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let u_min = u.iter().copied().fold(f64::INFINITY, f64::min);
        let lo = psi.value / u_max - 0.12;
        let hi = psi.value / u_min + 0.12;
        out.put(
            &format!("directional_{label}"),
            json!({ "direction": u, "samples": sample.points.len(), "dim": dim.value,
                    "dim_stderr": dim.stderr, "psi": psi.value, "psi_stderr": psi.stderr,
                    "lower": lo, "upper": hi }),
        );
        out.criteria.push(CriterionResult {
            name: format!("directional-bounds-{label}"),
            pass: dim.value >= lo && dim.value <= hi,
            observed: dim.value,
            bound: hi,
            detail: format!("dim in [{lo:.4}, {hi:.4}] from psi = {:.4}", psi.value),
        });
    }

    // diagonal identity dim(Lambda_(1,..,1)) = psi_Gamma(1,..,1), checked
    // when the diagonal is interior to the empirical cone
    let k = orbit.k();
    let diag_unit = vec![1.0 / (k as f64).sqrt(); k];
    if hull.contains(&diag_unit, 1e-6) {
        let sample = sample_directional(orbit, &diag_unit, tol)?;
        if !sample.insufficient {
            let psi = growth_indicator_auto(orbit, &diag_unit)?;
            let psi_ones = (k as f64).sqrt() * psi.value; // homogeneity
            let dim = box_dimension(&sample.points, &scales, true)?;
            out.put(
                "directional_diagonal",
                json!({ "samples": sample.points.len(), "dim": dim.value,
                        "psi_at_ones": psi_ones }),
            );
            out.criteria.push(CriterionResult::within(
                "diagonal-identity",
                dim.value,
                psi_ones,
                0.12,
                "dim of the diagonal directional set vs psi(1,...,1)",
            ));
        } else {
            out.warnings.push("diagonal directional sample insufficient".into());
        }
    } else {
        out.warnings.push("diagonal not interior to the empirical cone; identity skipped".into());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// covering: shadow cover of the directional sample
// ---------------------------------------------------------------------------

fn exp_covering(orbit: &Orbit, params: &ExperimentParams) -> anyhow::Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::default();
    let (mg, _) = growth_context(orbit, params)?;
    let u = params.u.clone().unwrap_or_else(|| mg.direction.clone());
    let n_bound = params.n_bound.unwrap_or(3.0);
    let r = params.shadow_r.unwrap_or(3.0);
    let tol = params.tol_angle.unwrap_or(0.05);
    let sample = sample_directional(orbit, &u, tol)?;
    if sample.insufficient {
        bail!("insufficient directional samples for the covering check");
    }
    let report = covering_family(orbit, &u, n_bound, r, &sample)?;
    out.put("coverage_fraction", report.coverage_fraction);
    out.put("caps", report.caps.len());
    out.put("sample_points", sample.points.len());
    out.criteria.push(CriterionResult::ge(
        "coverage",
        report.coverage_fraction,
        0.99,
        format!("N = {n_bound}, R = {r}, {} cap products", report.caps.len()),
    ));
    let mut rows = Vec::new();
    for rr in &report.radius_regressions {
        rows.push(vec![
            format!("{}", rr.factor),
            format!("{}", rr.slope),
            format!("{}", rr.samples),
        ]);
        out.criteria.push(CriterionResult::within(
            &format!("radius-slope-factor{}", rr.factor + 1),
            rr.slope,
            -u[rr.factor],
            0.05,
            "log cap radius against t_gamma",
        ));
    }
    out.tables.push(Table {
        name: "covering_radius_slopes".into(),
        header: vec!["factor".into(), "slope".into(), "members".into()],
        rows,
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// determinism: identical orbits and estimates across reruns and workers
// ---------------------------------------------------------------------------

fn exp_determinism(
    config: &ExperimentConfig,
    joining: &SelfJoining,
) -> anyhow::Result<ExperimentOutcome> {
    let mut out = ExperimentOutcome::default();
    let depth = config.run.max_word_length.min(9);
    let options = OrbitOptions { jordan: true, ..Default::default() };

    let serial = enumerate_in_pool(joining, depth, &options, 1)?;
    let parallel = enumerate_in_pool(joining, depth, &options, 8)?;
    let rerun = enumerate_in_pool(joining, depth, &options, 8)?;
    let orbit_identical = serial == parallel && parallel == rerun;
    out.criteria.push(CriterionResult {
        name: "orbit-identical".to_string(),
        pass: orbit_identical,
        observed: if orbit_identical { 0.0 } else { 1.0 },
        bound: 0.0,
        detail: format!("depth {depth}, workers 1 vs 8 vs rerun"),
    });

    let battery = |orbit: &Orbit| -> anyhow::Result<Vec<f64>> {
        let mut vals = vec![delta_min(orbit)?.value, joint_delta(orbit)?.value];
        for i in 0..orbit.k() {
            vals.push(factor_exponent(orbit, i)?.value);
        }
        if orbit.k() >= 2 {
            let mg = maximal_growth_direction(orbit, 16)?;
            vals.extend(mg.direction.iter());
            vals.push(mg.value);
        }
        Ok(vals)
    };
    let a = battery(&serial)?;
    let b = battery(&parallel)?;
    let identical = a
        .iter()
        .zip(&b)
        .all(|(x, y)| x.to_bits() == y.to_bits());
    out.put("battery", a.clone());
    out.criteria.push(CriterionResult {
        name: "estimates-identical".to_string(),
        pass: identical,
        observed: if identical { 0.0 } else { 1.0 },
        bound: 0.0,
        detail: "bit-identical estimator battery across worker counts".to_string(),
    });
    Ok(out)
}

// ---------------------------------------------------------------------------

/// Export a limit-set sample as a CSV table with the source words.
pub fn sample_table(orbit: &Orbit, sample: &[ProductBoundaryPoint], sources: &[usize]) -> Table {
    let rows = sample
        .iter()
        .zip(sources)
        .take(20_000)
        .map(|(p, &src)| {
            let mut row = vec![format!("{}", orbit.record(src).word())];
            for d in &p.dirs {
                row.push(d.iter().map(|x| format!("{x:.9}")).collect::<Vec<_>>().join(" "));
            }
            row
        })
        .collect();
    let mut header = vec!["word".to_string()];
    for i in 0..orbit.k() {
        header.push(format!("dir{}", i + 1));
    }
    Table { name: "boundary_sample".into(), header, rows }
}
