use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use dps_core::decomp::{decompose, decomposition_json, strategy_json};
use dps_core::hierarchy::{Hierarchy, HierarchyLevel, MembershipVerdict, Verdict};
use dps_core::jacobi::{bessel_first_zero, epsilon_asymptotic, epsilon_n};
use dps_core::sdp::ClarabelBackend;
use dps_core::states::{
    datta_state, haar_unitary, negativity, reference_state, special_unitary_u, DattaCut, ReferenceState,
};
use dps_core::tasks::{
    assemble_se_instance, fidelity_inner, fidelity_outer, fidelity_strategy, qubit_two_design_ensemble,
    robustness_lower, robustness_upper, EnsembleMember,
};
use dps_core::BipartiteOp;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::io::{self, csv_cell, num, JsonMatrix, Manifest};
use crate::{Cli, Command, CutArg, SideArg, StateKind, Status};

struct Ctx<'a> {
    cli: &'a Cli,
    hierarchy: Hierarchy<ClarabelBackend>,
}

impl Ctx<'_> {
    fn manifest(&self, command: &'static str) -> Manifest {
        let config = serde_json::to_value(self.cli).expect("config serializes");
        let g = &self.cli.global;
        let mut m = Manifest::new(command, config, g.tolerance, g.margin_factor);
        m.seeds.push(g.seed);
        m
    }

    fn out(&self, name: &str) -> std::path::PathBuf {
        self.cli.global.output_dir.join(name)
    }
}

pub fn run(cli: &Cli) -> Result<Status> {
    let g = &cli.global;
    if !(g.tolerance > 0.0) || !(g.margin_factor > 0.0) {
        bail!("tolerance and margin factor must be positive");
    }
    let mut hierarchy = Hierarchy::default().with_tolerance(g.tolerance);
    hierarchy.margin_factor = g.margin_factor;
    let ctx = Ctx { cli, hierarchy };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.jobs.unwrap_or(0))
        .build()
        .context("building worker pool")?;
    pool.install(|| dispatch(&ctx))
}

fn dispatch(ctx: &Ctx) -> Result<Status> {
    match &ctx.cli.command {
        Command::Epsilon { d, n } => epsilon(ctx, *d, *n),
        Command::Membership { state, n, ppt, inner } => membership(ctx, state, *n, *ppt, *inner),
        Command::Robustness { state, n, ppt, side } => robustness(ctx, state, *n, *ppt, *side),
        Command::Fidelity {
            ensemble,
            qubit_two_design,
            n,
            ppt,
            outer_reference,
            emit_strategy,
            samples,
        } => {
            let members = match (ensemble, qubit_two_design) {
                (Some(path), _) => io::load_ensemble(path)?,
                (None, Some(copies)) => qubit_two_design_ensemble(*copies),
                (None, None) => bail!("either --ensemble or --qubit-two-design is required"),
            };
            fidelity(ctx, &members, n, *ppt, *outer_reference, emit_strategy.as_deref(), *samples)
        }
        Command::Decompose { state, n, ppt, samples, out } => decompose_cmd(ctx, state, *n, *ppt, *samples, out.as_deref()),
        Command::DattaScan {
            alpha_start,
            alpha_stop,
            alpha_step,
            n_lower,
            n_upper,
            with_n15,
        } => datta_scan(ctx, *alpha_start, *alpha_stop, *alpha_step, *n_lower, *n_upper, *with_n15),
        Command::RandomSweep {
            samples,
            alpha,
            n,
            ppt,
            include_swap,
        } => random_sweep(ctx, *samples, *alpha, *n, *ppt, *include_swap),
        Command::MakeState {
            kind,
            d,
            p,
            alpha,
            cut,
            out,
        } => make_state(ctx, *kind, *d, *p, *alpha, *cut, out),
    }
}

fn emit(ctx: &Ctx, file: &str, value: serde_json::Value) -> Result<()> {
    let path = io::write_json(&ctx.out(file), &value)?;
    let mut shown = value;
    shown["artifact"] = json!(path.display().to_string());
    // A closed stdout (e.g. piped into `head`) is not an error; the artifact is on disk.
    match writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&shown)?) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn epsilon(ctx: &Ctx, d: usize, n: usize) -> Result<Status> {
    if d < 2 {
        bail!("d must be at least 2");
    }
    let eps = epsilon_n::<f64>(d, n)?;
    let asym = epsilon_asymptotic::<f64>(d, n);
    let value = json!({
        "manifest": ctx.manifest("epsilon"),
        "result": eps,
        "asymptotic": asym,
        "asymptoticRatio": eps.epsilon / asym,
        "besselZero": bessel_first_zero::<f64>((d - 2) as u32),
    });
    emit(ctx, "epsilon.json", value)?;
    Ok(Status::Ok)
}

fn verdict_json(v: &MembershipVerdict) -> serde_json::Value {
    json!({
        "verdict": v.verdict,
        "margin": num(v.margin),
        "status": v.status,
        "tStar": num(v.t_star),
        "reconstructionResidual": num(v.reconstruction_residual),
    })
}

fn membership(ctx: &Ctx, state: &Path, n: usize, ppt: bool, inner: bool) -> Result<Status> {
    let rho = io::load_state(state)?;
    let level = if inner {
        HierarchyLevel::inner(n, ppt)
    } else {
        HierarchyLevel::outer(n, ppt)
    };
    let v = if inner {
        ctx.hierarchy.membership_inner(&rho, &level)?
    } else {
        ctx.hierarchy.membership_outer(&rho, &level)?
    };
    let mut out = verdict_json(&v);
    if let Some(ext) = &v.extension {
        let path = io::write_json(&ctx.out("membership_extension.json"), &JsonMatrix::from(ext))?;
        out["certificate"] = json!(path.display().to_string());
    }
    if let Some(w) = &v.witness {
        let path = io::save_state(w, &ctx.out("membership_witness.json"))?;
        out["certificate"] = json!(path.display().to_string());
    }
    out["level"] = json!(level);
    out["manifest"] = serde_json::to_value(ctx.manifest("membership"))?;
    emit(ctx, "membership.json", out)?;
    Ok(if v.verdict == Verdict::Indeterminate {
        Status::Indeterminate
    } else {
        Status::Ok
    })
}

fn robustness(ctx: &Ctx, state: &Path, n: usize, ppt: bool, side: SideArg) -> Result<Status> {
    let rho = io::load_state(state)?;
    let (level, result) = match side {
        SideArg::Outer => {
            let level = HierarchyLevel::outer(n, ppt);
            (level, robustness_lower(&ctx.hierarchy, &rho, &level))
        }
        SideArg::Inner => {
            let level = HierarchyLevel::inner(n, ppt);
            (level, robustness_upper(&ctx.hierarchy, &rho, &level))
        }
    };
    let mut out = json!({ "level": level, "manifest": ctx.manifest("robustness") });
    let status = match result {
        Ok(r) => {
            out["value"] = num(r.value);
            out["infeasible"] = json!(r.value.is_infinite());
            out["status"] = json!(r.status);
            if let Some(s) = &r.sigma {
                let path = io::save_state(s, &ctx.out("robustness_sigma.json"))?;
                out["certificate"] = json!(path.display().to_string());
            }
            Status::Ok
        }
        Err(dps_core::Error::Indeterminate(status)) => {
            out["value"] = serde_json::Value::Null;
            out["status"] = json!(status);
            Status::Indeterminate
        }
        Err(e) => return Err(e.into()),
    };
    emit(ctx, "robustness.json", out)?;
    Ok(status)
}

fn fidelity(
    ctx: &Ctx,
    members: &[EnsembleMember],
    levels: &[usize],
    ppt: bool,
    outer_reference: bool,
    emit_strategy: Option<&Path>,
    samples: usize,
) -> Result<Status> {
    let rho = assemble_se_instance(members)?;
    let mut rows = Vec::new();
    let mut best = None;
    let mut failed = 0;
    for &n in levels {
        let level = HierarchyLevel::inner(n, ppt);
        match fidelity_inner(&ctx.hierarchy, &rho, &level) {
            Ok(f) => {
                rows.push(json!({ "n": n, "ppt": ppt, "fTilde": f.f_tilde, "fUpper": f.f_upper }));
                if best.as_ref().is_none_or(|b: &dps_core::tasks::FidelityBounds| n >= b.level.n) {
                    best = Some(f);
                }
            }
            Err(dps_core::Error::Indeterminate(status)) => {
                failed += 1;
                rows.push(json!({ "n": n, "ppt": ppt, "fTilde": null, "fUpper": null, "status": status }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    let mut out = json!({
        "manifest": ctx.manifest("fidelity"),
        "ensemble": io::ensemble_json(members),
        "levels": rows,
    });
    if outer_reference {
        out["outerN1Ppt"] = num(fidelity_outer(&ctx.hierarchy, &rho, &HierarchyLevel::outer(1, true))?);
    }
    if let (Some(path), Some(f)) = (emit_strategy, &best) {
        let (dec, strategy) = fidelity_strategy(&ctx.hierarchy, f, samples, ctx.cli.global.seed, 1e-3)?;
        let value = json!({
            "manifest": ctx.manifest("fidelity"),
            "level": f.level,
            "samples": samples,
            "residualTraceNorm": dec.residual_trace_norm,
            "strategy": strategy_json(&strategy),
        });
        io::write_json(path, &value)?;
        out["strategy"] = json!(path.display().to_string());
        out["strategyCompletenessError"] = json!(strategy.completeness_error());
    }
    emit(ctx, "fidelity.json", out)?;
    Ok(if 2 * failed >= levels.len().max(1) {
        Status::Indeterminate
    } else {
        Status::Ok
    })
}

fn decompose_cmd(ctx: &Ctx, state: &Path, n: usize, ppt: bool, samples: usize, out: Option<&Path>) -> Result<Status> {
    let rho = io::load_state(state)?;
    let level = HierarchyLevel::inner(n, ppt);
    let v = ctx.hierarchy.membership_inner(&rho, &level)?;
    match v.verdict {
        Verdict::Inside => {}
        Verdict::Indeterminate => {
            let value = json!({ "manifest": ctx.manifest("decompose"), "membership": verdict_json(&v) });
            emit(ctx, "decompose.json", value)?;
            return Ok(Status::Indeterminate);
        }
        Verdict::Outside => bail!("state is outside the inner set at N={n}; no decomposition available"),
    }
    let ext = v.extension.as_ref().expect("INSIDE carries an extension");
    let maps = ctx.hierarchy.level_maps(rho.da(), rho.db(), n, ppt)?;
    let dec = decompose(ext, &maps.sym, rho.da(), &level, samples, ctx.cli.global.seed)?;
    dec.check_terms()?;
    let path = out.map_or_else(|| ctx.out("decomposition.json"), Path::to_path_buf);
    let mut manifest = ctx.manifest("decompose");
    if ppt {
        manifest.warnings.push(
            "PPT level: the sampled terms reconstruct the non-PPT image of the extension, \
             so the residual has a systematic part"
                .into(),
        );
    }
    let decomposition = json!({
        "manifest": manifest,
        "level": level,
        "residualTraceNorm": dec.residual_trace_norm,
        "terms": decomposition_json(&dec),
    });
    io::write_json(&path, &decomposition)?;
    let value = json!({
        "manifest": manifest,
        "membership": verdict_json(&v),
        "samples": samples,
        "terms": dec.terms.len(),
        "residualTraceNorm": dec.residual_trace_norm,
        "decomposition": path.display().to_string(),
    });
    emit(ctx, "decompose.json", value)?;
    Ok(Status::Ok)
}

fn swap_datta(alpha: f64) -> Result<BipartiteOp> {
    Ok(datta_state(&special_unitary_u::<f64>(), alpha, DattaCut::Cut12_3)?.as_bipartite)
}

/// Grid `start, start + step, ...` up to `stop` inclusive, rounded to suppress drift.
fn alpha_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        bail!("alpha grid needs step > 0 and stop >= start");
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12).collect())
}

struct ScanRow {
    alpha: f64,
    cells: Vec<f64>,
    warnings: Vec<String>,
}

fn datta_scan(
    ctx: &Ctx,
    start: f64,
    stop: f64,
    step: f64,
    n_lower: usize,
    n_upper: usize,
    with_n15: bool,
) -> Result<Status> {
    let grid = alpha_grid(start, stop, step)?;
    let lower_level = HierarchyLevel::outer(n_lower, true);
    let mut upper_levels = vec![HierarchyLevel::inner(n_upper, false)];
    if with_n15 {
        upper_levels.push(HierarchyLevel::inner(15, false));
    }
    let h = &ctx.hierarchy;
    let rows: Vec<ScanRow> = grid
        .par_iter()
        .map(|&alpha| {
            let mut row = ScanRow {
                alpha,
                cells: Vec::new(),
                warnings: Vec::new(),
            };
            let rho = match swap_datta(alpha) {
                Ok(r) => r,
                Err(e) => {
                    row.warnings.push(format!("alpha={alpha}: {e}"));
                    row.cells = vec![f64::NAN; 1 + upper_levels.len()];
                    return row;
                }
            };
            let mut record = |label: String, r: dps_core::Result<dps_core::tasks::RobustnessSolve>| match r {
                Ok(s) => row.cells.push(s.value),
                Err(e) => {
                    row.warnings.push(format!("alpha={alpha} {label}: {e}"));
                    row.cells.push(f64::NAN);
                }
            };
            record(format!("lower N={n_lower} ppt"), robustness_lower(h, &rho, &lower_level));
            for level in &upper_levels {
                record(format!("upper N={}", level.n), robustness_upper(h, &rho, level));
            }
            row
        })
        .collect();

    let mut manifest = ctx.manifest("datta-scan");
    let csv_path = ctx.out("datta_scan.csv");
    io::ensure_dir(&ctx.cli.global.output_dir)?;
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    let mut header = vec!["alpha".to_string(), format!("lower_S{n_lower}p"), format!("upper_S{n_upper}tilde")];
    header.push("upper_S15tilde".into());
    w.write_record(&header)?;
    let mut nan_cells = 0;
    let mut total_cells = 0;
    let mut json_rows = Vec::new();
    for row in &rows {
        let mut record = vec![format!("{:.4}", row.alpha)];
        record.extend(row.cells.iter().map(|&x| csv_cell(x)));
        if !with_n15 {
            record.push(String::new());
        }
        w.write_record(&record)?;
        nan_cells += row.cells.iter().filter(|x| x.is_nan()).count();
        total_cells += row.cells.len();
        manifest.warnings.extend(row.warnings.iter().cloned());
        json_rows.push(json!({
            "alpha": row.alpha,
            "lowerS3p": num(row.cells[0]),
            "upperS3tilde": num(row.cells[1]),
            "upperS15tilde": row.cells.get(2).map_or(serde_json::Value::Null, |&x| num(x)),
        }));
    }
    w.flush()?;
    for warning in &manifest.warnings {
        eprintln!("warning: {warning}");
    }
    let value = json!({
        "manifest": manifest,
        "levels": { "lower": lower_level, "upper": upper_levels },
        "csv": csv_path.display().to_string(),
        "rows": json_rows,
    });
    emit(ctx, "datta_scan.json", value)?;
    Ok(if total_cells > 0 && 2 * nan_cells >= total_cells {
        Status::Indeterminate
    } else {
        Status::Ok
    })
}

fn random_sweep(ctx: &Ctx, samples: usize, alpha: f64, n: usize, ppt: bool, include_swap: bool) -> Result<Status> {
    if samples == 0 && !include_swap {
        bail!("need at least one sample");
    }
    let seed = ctx.cli.global.seed;
    let level = HierarchyLevel::inner(n, ppt);
    let h = &ctx.hierarchy;
    let mut jobs: Vec<Option<usize>> = (0..samples).map(Some).collect();
    if include_swap {
        jobs.push(None);
    }
    let results: Vec<serde_json::Value> = jobs
        .par_iter()
        .map(|&job| {
            let (label, v) = match job {
                Some(k) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k as u64);
                    (format!("haar-{k}"), haar_unitary::<f64>(4, &mut rng))
                }
                None => ("swap".to_string(), special_unitary_u::<f64>()),
            };
            let verdict = datta_state(&v, alpha, DattaCut::Cut12_3)
                .and_then(|s| h.membership_inner(&s.as_bipartite, &level));
            match verdict {
                Ok(v) => {
                    let mut j = verdict_json(&v);
                    j["unitary"] = json!(label);
                    j
                }
                Err(e) => json!({ "unitary": label, "verdict": Verdict::Indeterminate, "error": e.to_string() }),
            }
        })
        .collect();
    let count = |v: Verdict| results.iter().filter(|r| r["verdict"] == json!(v)).count();
    let (inside, outside, indeterminate) = (count(Verdict::Inside), count(Verdict::Outside), count(Verdict::Indeterminate));
    let value = json!({
        "manifest": ctx.manifest("random-sweep"),
        "level": level,
        "alpha": alpha,
        "results": results,
        "summary": { "total": results.len(), "inside": inside, "outside": outside, "indeterminate": indeterminate },
    });
    emit(ctx, "random_sweep.json", value)?;
    Ok(if 2 * indeterminate >= results.len() {
        Status::Indeterminate
    } else {
        Status::Ok
    })
}

fn make_state(ctx: &Ctx, kind: StateKind, d: usize, p: f64, alpha: f64, cut: CutArg, out: &Path) -> Result<Status> {
    let seed = ctx.cli.global.seed;
    let cut = match cut {
        CutArg::Cut12_3 => DattaCut::Cut12_3,
        CutArg::Cut1_23 => DattaCut::Cut1_23,
    };
    let rho = match kind {
        StateKind::Bell => reference_state(ReferenceState::Bell)?,
        StateKind::Isotropic => reference_state(ReferenceState::Isotropic { d, p })?,
        StateKind::Werner => reference_state(ReferenceState::Werner { d, p })?,
        StateKind::ProductRandom => reference_state(ReferenceState::ProductRandom { da: d, db: d, seed })?,
        StateKind::DattaSwap => datta_state(&special_unitary_u::<f64>(), alpha, cut)?.as_bipartite,
        StateKind::DattaHaar => {
            let v = haar_unitary::<f64>(4, &mut ChaCha8Rng::seed_from_u64(seed));
            datta_state(&v, alpha, cut)?.as_bipartite
        }
    };
    let path = io::save_state(&rho, out)?;
    println!("{}", json!({ "state": path.display().to_string(), "dA": rho.da(), "dB": rho.db(), "negativity": negativity(&rho) }));
    Ok(Status::Ok)
}
