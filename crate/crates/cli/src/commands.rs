//! The subcommands. Each writes its resolved config and its reports into the
//! output directory and returns the process exit code.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use vortex_core::dynamics::{
    m_zero, modulate_with, orbital_stability_experiment_with, EvolutionConfig, EvolutionRun, StepConfig,
    DEFAULT_CONDITION_CAP,
};
use vortex_core::fields::{
    b_form, d_e, h_norm, p_r, renormalized_energy_decomposed, renormalized_energy_direct, Field2D, FieldSpace,
};
use vortex_core::io::{profile_hash, read_profile, write_profile, write_snapshot};
use vortex_core::profile::{solve_profile, VortexProfile};
use vortex_core::sector::{
    coercivity_scan, min_eig_constrained, q0_identity_check, Block, EigenMethod, RadialFunction, RadialGrid,
    SectorData, SectorFamily, SectorReport,
};
use vortex_core::{Result, VortexError};

use crate::config::ExperimentConfig;

/// Upper end of the interval on which the profile residual is reported.
const RESIDUAL_WINDOW: f64 = 30.0;

pub fn run(cfg: &ExperimentConfig) -> Result<u8> {
    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("config.json"), cfg)?;
    let hash = cfg.hash();
    match cfg.command.as_str() {
        "profile" => profile(cfg, &hash),
        "energy" => energy(cfg, &hash),
        "coercivity" => coercivity(cfg, &hash),
        "evolve" => evolve(cfg, &hash),
        "modulate" => modulate(cfg, &hash),
        other => Err(VortexError::Usage(format!("unknown command '{other}'"))),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Adds the config and profile hashes to a JSON object.
fn cited(mut body: Value, config_hash: &str, profile: &str) -> Value {
    if let Some(map) = body.as_object_mut() {
        map.insert("config_hash".into(), json!(config_hash));
        map.insert("profile_hash".into(), json!(profile));
    }
    body
}

fn load_profile(cfg: &ExperimentConfig) -> Result<Arc<VortexProfile>> {
    let p = match &cfg.profile {
        Some(path) => read_profile(path)?,
        None => solve_profile(cfg.rmax, cfg.tol)?,
    };
    for w in p.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(Arc::new(p))
}

fn space(cfg: &ExperimentConfig, p: &Arc<VortexProfile>) -> Result<Arc<FieldSpace>> {
    FieldSpace::new(Arc::clone(p), cfg.half_width, cfg.n)
}

fn initial_field(cfg: &ExperimentConfig, space: &Arc<FieldSpace>, amplitude: f64) -> Result<Field2D> {
    let mut recipe = cfg.recipe();
    recipe.amplitude = amplitude;
    recipe.build(space, cfg.phase, cfg.shift)
}

fn profile(cfg: &ExperimentConfig, hash: &str) -> Result<u8> {
    let p = solve_profile(cfg.rmax, cfg.tol)?;
    for w in p.warnings() {
        eprintln!("warning: {w}");
    }
    let header = write_profile(&p, &cfg.out, Some(hash))?;
    let hi = cfg.rmax.min(RESIDUAL_WINDOW);
    println!("A1 = {:.16e}", p.slope_at_origin());
    println!("ODE residual sup on [0.01, {hi}] = {:.3e}", p.ode_residual_sup(0.01, hi));
    println!("stitch error = {:.3e}", p.stitch_error());
    println!("wrote {}", header.display());
    Ok(0)
}

fn energy(cfg: &ExperimentConfig, hash: &str) -> Result<u8> {
    let p = load_profile(cfg)?;
    let space = space(cfg, &p)?;
    let f = initial_field(cfg, &space, cfg.amplitude)?;
    let direct = renormalized_energy_direct(&f, cfg.energy_tol);
    let decomposed = renormalized_energy_decomposed(&f, cfg.r_scale, cfg.energy_tol)?;
    let mut p_table = Vec::new();
    let mut r = 1.0;
    while r <= cfg.half_width / 4.0 {
        let s = p_r(&f, r, cfg.energy_tol)?;
        p_table.push(json!({ "R": r, "P_R": s.value(), "error_bar": s.error_bar, "flagged": s.flagged }));
        r *= 2.0;
    }
    let eps = f.deviation();
    let vortex = Field2D::vortex(&space);
    let difference = (direct.value() - decomposed.total).abs();
    let report = json!({
        "L": cfg.half_width,
        "N": cfg.n,
        "direct": direct,
        "decomposed": decomposed,
        "agreement": {
            "direct": direct.value(),
            "decomposed": decomposed.total,
            "difference": difference,
        },
        "p_r_table": p_table,
        "b_form": b_form(&space, &eps),
        "h_norm": h_norm(&space, &eps),
        "d_e": d_e(&vortex, &f)?,
    });
    write_json(&cfg.out.join("energy.json"), &cited(report, hash, &profile_hash(&p)))?;
    if direct.flagged {
        eprintln!("warning: direct truncation sweep did not settle (error bar {:.3e})", direct.error_bar);
    }
    println!("energy direct = {:.16e}", direct.value());
    println!("energy decomposed = {:.16e}", decomposed.total);
    println!("difference = {difference:.3e}");
    Ok(0)
}

/// Fixed smooth radial test functions vanishing at the origin, unit in `H₀`.
fn suite(grid: &Arc<RadialGrid>) -> Result<Vec<RadialFunction>> {
    const TERMS: [(f64, f64); 5] = [(0.0, 1.0), (1.5, 2.0), (3.0, 0.8), (5.0, 3.0), (8.0, 1.5)];
    TERMS
        .iter()
        .map(|&(c, w)| {
            let f = RadialFunction::from_fn(grid, 0, |r| r / (1.0 + r) * (-((r - c) / w).powi(2)).exp())?;
            let n = f.h_norm_sq().sqrt();
            Ok(f.scaled(1.0 / n))
        })
        .collect()
}

fn identity_residuals(
    j: i32,
    family: &SectorFamily,
    suite: &[RadialFunction],
    warnings: &mut Vec<String>,
) -> Result<BTreeMap<String, f64>> {
    let b = family.bundle(j);
    let (mut fact, mut far, mut gap, mut slack) = (0.0f64, 0.0f64, f64::INFINITY, f64::INFINITY);
    for e in suite {
        let ej = RadialFunction::new(e.grid(), j, e.values().to_vec())?;
        let id = q0_identity_check(&ej, b)?;
        if let Some(d) = &id.diagnostic {
            warnings.push(d.clone());
        }
        fact = fact.max(id.residual());
        if j == -1 {
            continue;
        }
        let diff = b.q_form(&ej)? - id.form;
        gap = gap.min(diff);
        if j == -2 {
            far = far.max((diff - b.far_field_term(&ej)).abs());
        } else {
            let jj = f64::from(j * j);
            slack = slack.min(diff - b.weighted(&ej, |r| jj / (3.0 * r * r)));
        }
    }
    let mut m = BTreeMap::new();
    m.insert("q0_factorization".to_string(), fact);
    if j != -1 {
        m.insert("sector_minus_q0_min".to_string(), gap);
    }
    if j == -2 {
        m.insert("far_field_equality".to_string(), far);
    } else if j != -1 {
        m.insert("angular_bound_slack".to_string(), slack);
    }
    Ok(m)
}

/// `⟨x, y⟩_G / (‖x‖_G ‖y‖_G)` for a tridiagonal Gram form.
fn gram_correlation(gram: &vortex_core::sector::Tridiag, x: &[f64], y: &[f64]) -> f64 {
    let (gx, gy) = (gram.quad(x), gram.quad(y));
    let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    0.5 * (gram.quad(&sum) - gx - gy) / (gx * gy).sqrt()
}

fn coercivity(cfg: &ExperimentConfig, hash: &str) -> Result<u8> {
    let p = load_profile(cfg)?;
    let grid = Arc::new(RadialGrid::graded_refined(cfg.refine));
    let family = SectorFamily::new(&grid, &p, cfg.r_scale, cfg.j_max)?;
    let constrained = !cfg.no_constraint;
    let blocks = family.blocks(constrained);
    let mut block_table = BTreeMap::new();
    for b in &blocks {
        block_table.insert(b.label.clone(), min_eig_constrained(b, EigenMethod::Banded)?.lambda);
    }
    let suite = suite(&grid)?;
    let sectors: Vec<i32> = match cfg.j {
        Some(j) => vec![j],
        None => (-cfg.j_max..=cfg.j_max).collect(),
    };
    let mut reports = Vec::new();
    for &j in &sectors {
        let bundle = family.bundle(j);
        let cons = if j == 0 && constrained { vec![&bundle.constraints[0]] } else { vec![] };
        let single = Block::single(&format!("j{j}"), bundle, 0.0, 0.0, &cons);
        let lambda_min = min_eig_constrained(&single, EigenMethod::Banded)?.lambda;
        let k = j.abs();
        let kappa_estimate = block_table[&format!("a{k}")].min(block_table[&format!("b{k}")]);
        let mut warnings = bundle.warnings.clone();
        let identity_residuals = identity_residuals(j, &family, &suite, &mut warnings)?;
        reports.push(SectorReport {
            j,
            r: cfg.r_scale,
            grid_meta: grid.meta(),
            lambda_min,
            kappa_estimate,
            identity_residuals,
            warnings,
        });
    }
    let zero_mode = if sectors.contains(&0) {
        let b0 = family.bundle(0);
        let block = Block::single("q0", b0, 0.0, 0.0, &[]);
        let eig = min_eig_constrained(&block, EigenMethod::Banded)?;
        let w = &eig.witness(&block)[0];
        let rho = RadialFunction::from_fn(&grid, 0, |r| p.rho(r))?;
        json!({ "lambda_min": eig.lambda, "witness_rho_correlation": gram_correlation(&b0.gram, w.values(), rho.values()) })
    } else {
        Value::Null
    };
    let mut scans = Vec::new();
    if cfg.j.is_none() {
        for seed in cfg.seed..cfg.seed + cfg.scan_samples {
            let mut data = SectorData::random(&grid, cfg.j_max, 1.0, seed);
            if constrained {
                data.enforce_orthogonality(&p);
            }
            scans.push(json!({ "seed": seed, "outcome": coercivity_scan(cfg.scan_r0, cfg.scan_n0, &data, &p)? }));
        }
    }
    let min_block = block_table.values().copied().fold(f64::INFINITY, f64::min);
    let report = json!({
        "R": cfg.r_scale,
        "constrained": constrained,
        "grid_meta": grid.meta(),
        "block_lambda_min": block_table,
        "min_block_lambda": min_block,
        "sectors": reports,
        "phase_zero_mode": zero_mode,
        "window_scan": scans,
    });
    write_json(&cfg.out.join("coercivity.json"), &cited(report, hash, &profile_hash(&p)))?;
    println!("smallest block eigenvalue = {min_block:.16e} ({})", if constrained { "constrained" } else { "unconstrained" });
    for r in &reports {
        println!("j = {:>2}: lambda_min = {:.10e}", r.j, r.lambda_min);
    }
    if let Some(c) = zero_mode.get("witness_rho_correlation") {
        println!("phase zero mode: witness correlation with rho = {c}");
    }
    Ok(0)
}

fn modulate(cfg: &ExperimentConfig, hash: &str) -> Result<u8> {
    let p = load_profile(cfg)?;
    let space = space(cfg, &p)?;
    let f = initial_field(cfg, &space, cfg.amplitude)?;
    let guess = match cfg.guess {
        Some([bx, by, phi]) => ([bx, by], phi),
        None => (cfg.shift, cfg.phase),
    };
    let (state, modulated) = modulate_with(&f, guess, cfg.alpha)?;
    for w in &state.warnings {
        eprintln!("warning: {w}");
    }
    let distance = d_e(&Field2D::vortex(&space), &modulated)?;
    let report = json!({
        "state": state,
        "modulated_distance": distance,
        "m_zero": m_zero(&space)?,
    });
    write_json(&cfg.out.join("modulation.json"), &cited(report, hash, &profile_hash(&p)))?;
    println!("a = ({:.16e}, {:.16e}), phi = {:.16e}", state.a[0], state.a[1], state.phi);
    println!("Newton iterations = {}, |Xi| = {:.3e}, d_E = {distance:.6e}", state.iterations, state.xi_norm());
    Ok(0)
}

const CSV_HEADER: &str = "t,energy,box_energy,d_e,ratio,a1,a2,phi,rate,ode_a1,ode_a2,ode_phi,xi_norm";

fn diagnostics_csv(run: &EvolutionRun, config_hash: &str, profile: &str) -> String {
    let mut s = format!("# config_hash={config_hash}\n# profile_hash={profile}\n{CSV_HEADER}\n");
    for r in &run.rows {
        let vals = [
            r.t, r.energy, r.box_energy, r.d_e, r.ratio, r.a[0], r.a[1], r.phi, r.rate, r.ode_a[0], r.ode_a[1], r.ode_phi,
            r.xi_norm,
        ];
        let line: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(s, "{}", line.join(","));
    }
    s
}

fn evolve_one(
    cfg: &ExperimentConfig,
    space: &Arc<FieldSpace>,
    amplitude: f64,
    dir: &Path,
    config_hash: &str,
    phash: &str,
) -> Result<EvolutionRun> {
    fs::create_dir_all(dir)?;
    let f0 = initial_field(cfg, space, amplitude)?;
    let ecfg = EvolutionConfig {
        dt: cfg.dt,
        t_final: cfg.t_final,
        snapshot_every: cfg.snapshot_every,
        step: StepConfig { scheme: cfg.scheme, ..StepConfig::default() },
        delta: cfg.delta,
        alpha: cfg.alpha,
        condition_cap: DEFAULT_CONDITION_CAP,
        track_ode: cfg.track_ode,
    };
    let mut index = 0usize;
    let mut snapshots = Vec::new();
    let run = orbital_stability_experiment_with(&f0, &ecfg, |row, field| {
        if cfg.snapshot_stride > 0 && index % cfg.snapshot_stride == 0 {
            let name = format!("snap_{index:04}");
            write_snapshot(field, &dir.join("snapshots").join(&name), row.t, phash, Some(config_hash))?;
            snapshots.push(format!("snapshots/{name}.json"));
        }
        index += 1;
        Ok(())
    })?;
    fs::write(dir.join("diagnostics.csv"), diagnostics_csv(&run, config_hash, phash))?;
    let mut manifest = serde_json::to_value(&run)?;
    if let Some(map) = manifest.as_object_mut() {
        map.remove("rows");
        map.insert("amplitude".into(), json!(amplitude));
        map.insert("relative_drift".into(), json!(run.relative_drift()));
        map.insert("diagnostics".into(), json!("diagnostics.csv"));
        map.insert("snapshots".into(), json!(snapshots));
    }
    write_json(&dir.join("manifest.json"), &cited(manifest, config_hash, phash))?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(why) = &run.truncated {
        eprintln!("run truncated at t = {}: {why}", run.rows.last().map_or(0.0, |r| r.t));
    }
    println!(
        "amplitude {amplitude}: max d_E ratio = {:.6e}, relative energy drift = {:.3e}, rate constant = {:.6e}, track gap = {:.3e}",
        run.max_ratio,
        run.relative_drift(),
        run.rate_constant,
        run.track_gap
    );
    Ok(run)
}

fn evolve(cfg: &ExperimentConfig, hash: &str) -> Result<u8> {
    let p = load_profile(cfg)?;
    let phash = profile_hash(&p);
    let space = space(cfg, &p)?;
    if cfg.amp_sweep.is_empty() {
        let run = evolve_one(cfg, &space, cfg.amplitude, &cfg.out, hash, &phash)?;
        return Ok(if run.truncated.is_some() { 3 } else { 0 });
    }
    let mut table = format!(
        "# config_hash={hash}\n# profile_hash={phash}\n\
         amplitude,initial_distance,distance_per_amplitude,max_ratio,rate_constant,relative_drift,track_gap,truncated\n"
    );
    let mut truncated = false;
    for (k, &amp) in cfg.amp_sweep.iter().enumerate() {
        let run = evolve_one(cfg, &space, amp, &cfg.out.join(format!("amp_{k:02}")), hash, &phash)?;
        truncated |= run.truncated.is_some();
        let per = if amp == 0.0 { 0.0 } else { run.initial_distance / amp.abs() };
        let _ = writeln!(
            table,
            "{amp:.16e},{:.16e},{per:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            run.initial_distance,
            run.max_ratio,
            run.rate_constant,
            run.relative_drift(),
            run.track_gap,
            u8::from(run.truncated.is_some())
        );
    }
    fs::write(cfg.out.join("sweep.csv"), table)?;
    Ok(if truncated { 3 } else { 0 })
}
