use std::fs;
use std::path::Path;

use quasiherm::acceptance::{run_suite, AcceptanceOptions};
use quasiherm::basis::{
    build_basis, build_charge, build_k, build_l, build_metrics, projector_residual, two_level_fixture,
};
use quasiherm::closed_form::{spectrum_minus, spectrum_plus, HoParams, NUMERIC_CONVENTION_FACTOR};
use quasiherm::evolution::{conservation_report, evolve as run_evolution, fv_positive_metric, pseudo_norm, FvState};
use quasiherm::fixedpoint::{collect_physical, FrozenFamily, ModelFamily, PhysicalLevel, ProblemKind};
use quasiherm::format::{fmt_f64, to_json_string, write_matrix_dump};
use quasiherm::frozen::{classify_spectrum, decompose, decompose_with};
use quasiherm::operators::{assemble_fv, build_parity};
use quasiherm::{c64, OperatorMatrix};
use serde_json::{json, Map, Value};

use crate::config::{InitialState, LevelSource, MetricChoice, ModelSection, RunConfig};
use crate::CliError;

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// Writes `<command>.json` with the config echo and tool version merged into `body`.
fn write_report(cfg: &RunConfig, command: &str, mut body: Map<String, Value>) -> Result<(), CliError> {
    let echo = serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    body.insert("command".into(), json!(command));
    body.insert("config".into(), echo);
    body.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    let text = to_json_string(&Value::Object(body))?;
    write_file(&cfg.output.dir, &format!("{command}.json"), &text)
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = format!("{header}\n");
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn family(cfg: &RunConfig) -> Result<ModelFamily, CliError> {
    Ok(ModelFamily::new(cfg.model()?, cfg.grid()?, cfg.problem.kind))
}

fn object(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(map) => map,
        _ => unreachable!("json! object literal"),
    }
}

pub fn spectrum(cfg: &RunConfig) -> Result<(), CliError> {
    let z = cfg
        .problem
        .z
        .ok_or_else(|| CliError::Config("spectrum needs problem.z".into()))?;
    let h = family(cfg)?.hamiltonian(z)?;
    let mut dec = decompose_with(&h, &cfg.decompose_options())?;
    dec.z = Some(z);
    let classification = classify_spectrum(&dec, cfg.tolerances.tol_real);

    let rows = dec
        .eigenvalues()
        .iter()
        .zip(&dec.reality_flags)
        .enumerate()
        .map(|(k, (e, real))| vec![k.to_string(), fmt_f64(e.re), fmt_f64(e.im), real.to_string()]);
    write_file(&cfg.output.dir, "spectrum.csv", &csv("index,re,im,reality_flag", rows))?;

    let body = json!({
        "z": z,
        "dimension": h.dim(),
        "hermitian": dec.is_hermitian(),
        "operator_norm": dec.operator_norm(),
        "biorth_residual": dec.biorth_residual,
        "completeness_residual": dec.completeness_residual,
        "reconstruction_residual": (&dec.reconstruct() - &h).norm(),
        "all_real": dec.all_real(),
        "classification": classification,
    });
    write_report(cfg, "spectrum", object(body))
}

/// Nearest closed-form value (both families of branch `n`) in the full-line
/// convention of the numeric pipeline.
fn closed_form_row(params: &HoParams, level: &PhysicalLevel) -> Value {
    let n = level.n as u64;
    let mut candidates = vec![("plus", spectrum_plus(params, n))];
    if let Some((upper, lower)) = spectrum_minus(params, n) {
        candidates.push(("minus_upper", upper));
        candidates.push(("minus_lower", lower));
    }
    let (family, closed) = candidates
        .into_iter()
        .min_by(|a, b| {
            let da = (a.1 / NUMERIC_CONVENTION_FACTOR - level.energy).abs();
            let db = (b.1 / NUMERIC_CONVENTION_FACTOR - level.energy).abs();
            da.total_cmp(&db)
        })
        .expect("plus family always present");
    let scaled = closed / NUMERIC_CONVENTION_FACTOR;
    let abs_error = (level.energy - scaled).abs();
    json!({
        "n": level.n,
        "j": level.j,
        "family": family,
        "numeric": level.energy,
        "closed_form": closed,
        "closed_form_full_line": scaled,
        "abs_error": abs_error,
        "rel_error": abs_error / scaled.abs(),
    })
}

fn collect_levels(cfg: &RunConfig) -> Result<(quasiherm::fixedpoint::CollectedLevels, ModelFamily), CliError> {
    let windows = cfg.windows()?;
    let family = family(cfg)?;
    let collected = collect_physical(&family, &cfg.fixedpoint.branches, &windows, &cfg.fixedpoint_options());
    Ok((collected, family))
}

pub fn fixedpoint(cfg: &RunConfig) -> Result<(), CliError> {
    let (collected, _) = collect_levels(cfg)?;
    let rows = collected.levels.iter().map(|l| {
        vec![
            l.n.to_string(),
            l.j.to_string(),
            fmt_f64(l.energy),
            fmt_f64(l.residual.unwrap_or(f64::NAN)),
        ]
    });
    write_file(&cfg.output.dir, "levels.csv", &csv("n,j,E_alpha,residual", rows))?;

    let levels: Vec<Value> = collected
        .levels
        .iter()
        .map(|l| {
            json!({
                "n": l.n,
                "j": l.j,
                "energy": l.energy,
                "residual": l.residual,
                "operator_norm": l.operator_norm,
                "self_overlap_defect": l.self_overlap_defect(),
            })
        })
        .collect();
    let failures: Vec<Value> = collected
        .extraction_failures
        .iter()
        .map(|(n, z, msg)| json!({"n": n, "z": z, "error": msg}))
        .collect();
    let mut body = object(json!({
        "level_count": collected.levels.len(),
        "levels": levels,
        "windows": collected.windows,
        "extraction_failures": failures,
    }));
    if let (Some(ModelSection::HoQuadratic { a, e0 }), ProblemKind::Schrodinger) = (&cfg.model, cfg.problem.kind) {
        let params = HoParams::new(*a, *e0)?;
        let rows: Vec<Value> = collected.levels.iter().map(|l| closed_form_row(&params, l)).collect();
        body.insert(
            "closed_form_comparison".into(),
            json!({"convention_factor": NUMERIC_CONVENTION_FACTOR, "rows": rows}),
        );
    }
    write_report(cfg, "fixedpoint", body)?;
    if collected.levels.is_empty() {
        return Err(CliError::NoLevels(format!(
            "{} branch/window pairs searched",
            collected.windows.len()
        )));
    }
    Ok(())
}

pub fn metric(cfg: &RunConfig) -> Result<(), CliError> {
    let m = &cfg.metric;
    let (mut levels, parity) = match m.source {
        LevelSource::Fixture => {
            let c = c64::new(m.fixture_overlap[0], m.fixture_overlap[1]);
            (two_level_fixture(c, m.fixture_energies, m.fixture_dim)?, None)
        }
        LevelSource::Fixedpoint => {
            let (collected, family) = collect_levels(cfg)?;
            let parity = build_parity(&family.grid).ok();
            (collected.levels, parity)
        }
    };
    if levels.is_empty() {
        return Err(CliError::NoLevels("the fixed-point search returned no levels".into()));
    }
    if m.duplicate_level {
        let mut copy = levels[0].clone();
        copy.n = levels.iter().map(|l| l.n).max().unwrap_or(0) + 1;
        levels.push(copy);
    }

    let basis = build_basis(levels)?;
    let k = build_k(&basis);
    let l = build_l(&basis);
    let suite = build_metrics(&basis, &k, &l)?;
    let (duality_bra, duality_ket) = basis.duality_residuals();

    let mut notes = Vec::new();
    let mut eta_plus = None;
    let mut charge = None;
    if basis.len() == basis.dim() {
        match decompose(&k).and_then(|d| d.eta_plus()) {
            Ok(eta) => {
                if let Some(p) = &parity {
                    match build_charge(&eta, p) {
                        Ok(c) => charge = Some(c),
                        Err(e) => notes.push(format!("charge: {e}")),
                    }
                }
                eta_plus = Some(eta);
            }
            Err(e) => notes.push(format!("eta_plus of K: {e}")),
        }
    } else {
        notes.push("incomplete level set: eta_plus and C are not formed".into());
    }

    let body = json!({
        "level_count": basis.len(),
        "dimension": basis.dim(),
        "energies": basis.energies(),
        "condition_R": basis.condition_r(),
        "diagonal_defect": basis.diagonal_defect(),
        "duality_residuals": [duality_bra, duality_ket],
        "projector_residual": projector_residual(&basis),
        "residual_K": suite.residual_k,
        "residual_L": suite.residual_l,
        "k_minus_l": (&k - &l).norm(),
        "min_eig_mu": suite.min_eig_mu,
        "min_eig_nu": suite.min_eig_nu,
        "mu_inverse_residual": suite.mu_inverse_residual,
        "nu_inverse_residual": suite.nu_inverse_residual,
        "hermiticity_mu": suite.hermiticity_mu,
        "hermiticity_nu": suite.hermiticity_nu,
        "eta_plus_formed": eta_plus.is_some(),
        "charge_involution_defect": charge.as_ref().map(|c| c.involution_defect),
        "notes": notes,
    });

    if m.dump_matrices {
        let dir = cfg.output.dir.join("matrices");
        let r = OperatorMatrix::from_mat(basis.overlap().to_owned())?;
        let r_inv = OperatorMatrix::from_mat(basis.overlap_inverse().to_owned())?;
        let mut dumps = vec![
            ("R", &r),
            ("R_inv", &r_inv),
            ("K", &k),
            ("L", &l),
            ("mu", &suite.mu),
            ("mu_inv", &suite.mu_inv),
            ("nu", &suite.nu),
            ("nu_inv", &suite.nu_inv),
        ];
        if let Some(eta) = &eta_plus {
            dumps.push(("eta_plus", eta));
        }
        if let Some(c) = &charge {
            dumps.push(("C", &c.c));
        }
        for (name, matrix) in dumps {
            write_file(&dir, &format!("{name}.txt"), &write_matrix_dump(matrix.as_ref()))?;
        }
    }
    write_report(cfg, "metric", object(body))
}

pub fn evolve(cfg: &RunConfig) -> Result<(), CliError> {
    let e = &cfg.evolve;
    if !(e.t_final >= 0.0 && e.t_final.is_finite()) {
        return Err(CliError::Config(format!(
            "evolve.t_final must be non-negative, got {}",
            e.t_final
        )));
    }
    let family = family(cfg)?;
    let h = family.hamiltonian(e.z)?;
    let mut system = assemble_fv(&h);
    let n = h.dim();
    let metric = match e.metric {
        MetricChoice::Block => {
            let eta = if h.hermiticity_defect() == 0.0 {
                OperatorMatrix::identity(n)
            } else {
                decompose(&h)?.eta_plus()?
            };
            system = system.with_metric(&eta)?;
            system.eta_sr.clone().expect("metric attached above")
        }
        MetricChoice::Identity => OperatorMatrix::identity(2 * n),
        MetricChoice::Positive => fv_positive_metric(&system)?,
    };
    let state = match e.initial {
        InitialState::Gaussian {
            center,
            width,
            momentum,
        } => FvState::gaussian(&family.grid, &h, center, width, momentum)?,
        InitialState::Eigenstate { index } => FvState::eigenstate(&system, index)?,
    };
    let trajectory = run_evolution(&system, &state, e.t_final, e.steps)?;
    let report = conservation_report(&trajectory, &metric)?;

    let mut rows = Vec::with_capacity(trajectory.states.len());
    for s in &trajectory.states {
        let value = pseudo_norm(s, &metric)?.value;
        rows.push(vec![fmt_f64(s.t), fmt_f64(value), fmt_f64(s.euclidean_norm())]);
    }
    write_file(
        &cfg.output.dir,
        "trajectory.csv",
        &csv("t,pseudo_norm,euclidean_norm", rows),
    )?;

    let body = json!({
        "metric": e.metric,
        "dimension": 2 * n,
        "samples": trajectory.states.len(),
        "generator_classification": trajectory.classification,
        "conservation": report,
        "status": if report.pass { "PASS" } else { "FAIL" },
    });
    write_report(cfg, "evolve", object(body))
}

pub fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let opts = AcceptanceOptions {
        seed: cfg.validate.seed,
        base_grid: cfg.validate.base_grid,
    };
    let report = run_suite(&opts);
    println!("{:<4} {:<6} name", "id", "result");
    for c in &report.criteria {
        println!("{:<4} {:<6} {}", c.id, if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    let mut body = Map::new();
    body.insert(
        "report".into(),
        serde_json::to_value(&report).map_err(|e| CliError::Solver(e.to_string()))?,
    );
    write_report(cfg, "validate", body)?;
    if report.all_pass {
        Ok(())
    } else {
        Err(CliError::ValidationFailed)
    }
}
