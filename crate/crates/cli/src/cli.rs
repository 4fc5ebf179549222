use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dualsep_core::conjugation::{
    conjugacy_test, conjugate_ifs, ConjugacyConfig, ConjugacyKind, ConjugacyVerdict, ExprChange,
};
use dualsep_core::dimension::{
    dimension_report, pressure_curve, summarize, ChaosConfig, ProbabilityVector,
};
use dualsep_core::dual::{choose_envelope, tight_envelope, DualScan, DualSscVerdict, Envelope};
use dualsep_core::enclose::EncloseConfig;
use dualsep_core::ifs::Ifs;
use dualsep_core::map::{validate_map, CheckStatus, PropertyCheck};
use dualsep_core::perturbation::{delta_for_depth, minimal_depth, perturb_to_dual_ssc};
use dualsep_core::separation::{
    separation_row, series_from_rows, sesc_certify_with, SescVerdict, ALPHA_GRID,
};
use dualsep_core::{parse_expr, Error};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::report::{claim, Claim, InputDigest, Method, RunReport};
use crate::spec::{read_spec, IfsSpecFile, SpecError, SpecSource};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "dualsep",
    version,
    about = "Separation, dimension and conjugacy checks for analytic IFS on [0,1]"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print the report as JSON.
    #[arg(long, global = true, conflicts_with_all = ["csv", "text"])]
    json: bool,
    /// Print series (or the evidence table) as CSV.
    #[arg(long, global = true, conflicts_with_all = ["json", "text"])]
    csv: bool,
    /// Print a plain text summary (default).
    #[arg(long, global = true, conflicts_with_all = ["json", "csv"])]
    text: bool,
    /// Record wall time in the report.
    #[arg(long, global = true)]
    timing: bool,
    /// Worker threads for scans; 0 uses all cores.
    #[arg(long, global = true, env = "DUALSEP_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check properties (B) and (C) for every map.
    Validate(SpecArg),
    /// Sufficient criterion for the strong exponential separation condition.
    SescCertify {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = ALPHA_GRID)]
        grid: usize,
    },
    /// Disjointness of dual cylinders at one depth.
    DualSsc {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        depth: usize,
        /// Use the iterated (tighter) envelope.
        #[arg(long)]
        tight: bool,
    },
    /// Minimal sup distance between distinct compositions per depth.
    SeparationScan {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        max_depth: usize,
        #[arg(long, default_value_t = 257)]
        grid: usize,
    },
    /// Conformality dimension, entropy, Lyapunov exponent and bounds.
    Dimension {
        #[command(flatten)]
        spec: SpecArg,
        /// Comma separated probabilities; overrides the spec.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pressure curve range for CSV output.
        #[arg(long, default_value_t = 2.0)]
        t_max: f64,
        #[arg(long, default_value_t = 41)]
        t_points: usize,
    },
    /// Test for conjugacy to a self-similar system.
    Conjugacy {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 4)]
        max_word_len: usize,
        #[arg(long, default_value_t = 33)]
        grid: usize,
        /// Test g ∘ f_i ∘ g^-1 instead, for an increasing g on [0,1].
        #[arg(long, value_name = "EXPR")]
        conjugate_by: Option<String>,
    },
    /// Analytic perturbation that makes the dual cylinders disjoint.
    Perturb {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        /// Tail budget; defaults to delta.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Write the perturbed system as a spec file.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SpecArg {
    /// IFS specification (JSON).
    spec: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Text,
    Json,
    Csv,
}

/// Failure before a verdict exists.
#[derive(Debug)]
enum Failure {
    Input(String),
    Numeric(String),
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_)
            | Error::InvalidMap { .. }
            | Error::LetterOutOfRange { .. }
            | Error::ArityMismatch(..)
            | Error::NotMonotone
            | Error::SingletonAttractor
            | Error::InvalidProbability(_)
            | Error::InvalidArgument(_)
            | Error::Domain(_)
            | Error::EtaTooLarge => Failure::Input(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

/// What a command produced: a report, plus an optional CSV series.
struct Outcome {
    report: RunReport,
    series: Option<String>,
    /// Printed to stderr, e.g. the reason a map is invalid.
    message: Option<String>,
}

fn base_report(src: &SpecSource, command: &str, parameters: Value) -> RunReport {
    RunReport {
        command: command.to_owned(),
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        input: InputDigest {
            path: src.path.clone(),
            sha256: src.digest.clone(),
        },
        parameters,
        verdict: String::new(),
        exit_code: EXIT_OK,
        evidence: Vec::new(),
        detail: Value::Null,
        wall_time: None,
    }
}

fn detail<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report detail serializes")
}

fn interval_claims(out: &mut Vec<Claim>, name: &str, lo: f64, hi: f64) {
    out.push(claim(&format!("{name}.lo"), lo, hi - lo, Method::Enclosure));
    out.push(claim(&format!("{name}.hi"), hi, hi - lo, Method::Enclosure));
}

// Ends of a range enclosure; each overestimates the true extreme by at most
// the enclosure tolerance.
fn range_claims(out: &mut Vec<Claim>, name: &str, lo: f64, hi: f64) {
    let tol = EncloseConfig::default().tolerance;
    out.push(claim(
        &format!("{name}.lo"),
        lo,
        tol * lo.abs().max(1.0),
        Method::Enclosure,
    ));
    out.push(claim(
        &format!("{name}.hi"),
        hi,
        tol * hi.abs().max(1.0),
        Method::Enclosure,
    ));
}

fn write_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("CSV is UTF-8")
}

fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_label(name: &str) -> &'static str {
    match name {
        "contraction" => "(C)",
        _ => "(B)",
    }
}

fn cmd_validate(src: &SpecSource) -> Result<Outcome, Failure> {
    let maps = src.spec.parse_maps()?;
    let mut report = base_report(src, "validate", json!({}));
    let mut worst = CheckStatus::Pass;
    let mut messages = Vec::new();
    let mut details = Vec::new();
    for (k, m) in maps.iter().enumerate() {
        let v = validate_map(m);
        let checks: [(&str, &PropertyCheck); 3] = [
            ("invariance", &v.invariance),
            ("extended_invariance", &v.extended_invariance),
            ("contraction", &v.contraction),
        ];
        for (name, c) in checks {
            if let Some(e) = c.enclosure {
                let what = if name == "contraction" { "f'" } else { "f" };
                range_claims(
                    &mut report.evidence,
                    &format!("maps[{k}].{name}.{what}"),
                    e.lo(),
                    e.hi(),
                );
            }
            if c.status != CheckStatus::Pass {
                messages.push(format!(
                    "maps[{k}]: property {} {}: requires {}; {}",
                    check_label(name),
                    if c.status == CheckStatus::Fail {
                        "violated"
                    } else {
                        "undecided"
                    },
                    c.requirement,
                    c.detail
                ));
            }
            worst = match (worst, c.status) {
                (CheckStatus::Fail, _) | (_, CheckStatus::Fail) => CheckStatus::Fail,
                (CheckStatus::Inconclusive, _) | (_, CheckStatus::Inconclusive) => {
                    CheckStatus::Inconclusive
                }
                _ => CheckStatus::Pass,
            };
        }
        details.push(v);
    }
    let (verdict, code) = match worst {
        CheckStatus::Pass => ("VALID", EXIT_OK),
        CheckStatus::Fail => ("INVALID", EXIT_INPUT),
        CheckStatus::Inconclusive => ("INCONCLUSIVE", EXIT_INCONCLUSIVE),
    };
    report.verdict = verdict.to_owned();
    report.exit_code = code;
    report.detail = detail(&details);
    Ok(Outcome {
        report,
        series: None,
        message: (!messages.is_empty()).then(|| messages.join("\n")),
    })
}

fn cmd_sesc(src: &SpecSource, ifs: &Ifs, grid: usize) -> Result<Outcome, Failure> {
    let cert = sesc_certify_with(ifs, grid)?;
    let mut report = base_report(src, "sesc-certify", json!({ "grid": grid }));
    let ev = &mut report.evidence;
    interval_claims(ev, "c_max", cert.c_max.lo(), cert.c_max.hi());
    interval_claims(ev, "c_min", cert.c_min.lo(), cert.c_min.hi());
    ev.push(claim("beta.upper", cert.beta, 0.0, Method::Enclosure));
    ev.push(claim("alpha.lower", cert.alpha, 0.0, Method::Enclosure));
    ev.push(claim("margin.lower", cert.margin, 0.0, Method::Enclosure));
    ev.push(claim(
        "margin.estimate",
        cert.margin_estimate,
        (cert.margin_estimate - cert.margin).abs(),
        Method::Grid,
    ));
    for w in &cert.witnesses {
        ev.push(claim(
            &format!("alpha[{},{}].x", w.i, w.j),
            w.x,
            0.0,
            Method::Exact,
        ));
    }
    let (verdict, code) = match cert.verdict {
        SescVerdict::Accept => ("ACCEPT", EXIT_OK),
        SescVerdict::RejectCriterion => ("REJECT_CRITERION", EXIT_NEGATIVE),
        SescVerdict::Inconclusive => ("INCONCLUSIVE", EXIT_INCONCLUSIVE),
    };
    report.verdict = verdict.to_owned();
    report.exit_code = code;
    report.detail = detail(&cert);
    Ok(Outcome {
        report,
        series: None,
        message: cert.reason.clone(),
    })
}

fn dual_verdict(v: DualSscVerdict) -> (&'static str, i32) {
    match v {
        DualSscVerdict::Pass => ("PASS", EXIT_OK),
        DualSscVerdict::Fail => ("FAIL", EXIT_NEGATIVE),
        DualSscVerdict::Inconclusive => ("INCONCLUSIVE", EXIT_INCONCLUSIVE),
    }
}

fn envelope_claims(ev: &mut Vec<Claim>, name: &str, env: &Envelope) {
    ev.push(claim(
        &format!("{name}.k"),
        env.lower,
        0.0,
        Method::Enclosure,
    ));
    ev.push(claim(
        &format!("{name}.K"),
        env.upper,
        0.0,
        Method::Enclosure,
    ));
}

fn cmd_dual_ssc(
    src: &SpecSource,
    ifs: &Ifs,
    depth: usize,
    tight: bool,
) -> Result<Outcome, Failure> {
    let env = if tight {
        tight_envelope(ifs)?
    } else {
        choose_envelope(ifs)?
    };
    let scan = DualScan::new(ifs, depth, env, &[])?;
    let blocks = scan
        .blocks()
        .into_par_iter()
        .map(|(p, q)| scan.block(p, q))
        .collect::<Result<Vec<_>, _>>()?;
    let r = scan.merge(blocks);
    let mut report = base_report(
        src,
        "dual-ssc",
        json!({ "depth": depth, "envelope": if tight { "tight" } else { "default" } }),
    );
    envelope_claims(&mut report.evidence, "envelope", &r.envelope);
    if let Some(g) = r.min_gap {
        report
            .evidence
            .push(claim("min_gap.lower", g, 0.0, Method::Enclosure));
    }
    let (verdict, code) = dual_verdict(r.verdict);
    report.verdict = verdict.to_owned();
    report.exit_code = code;
    report.detail = detail(&r);
    Ok(Outcome {
        report,
        series: None,
        message: None,
    })
}

fn cmd_scan(
    src: &SpecSource,
    ifs: &Ifs,
    max_depth: usize,
    grid: usize,
) -> Result<Outcome, Failure> {
    let rows = (1..=max_depth)
        .into_par_iter()
        .map(|n| separation_row(ifs, n, grid))
        .collect::<Result<Vec<_>, _>>()?;
    let series = series_from_rows(grid, rows);
    let mut report = base_report(
        src,
        "separation-scan",
        json!({ "max_depth": max_depth, "grid": grid }),
    );
    for r in &series.rows {
        report.evidence.push(claim(
            &format!("delta[{}]", r.depth),
            r.delta,
            r.delta_upper - r.delta,
            Method::Grid,
        ));
    }
    report
        .evidence
        .push(claim("c_emp", series.c_emp, 0.0, Method::Grid));
    let overlap = series.rows.iter().find(|r| r.exact_overlap);
    let (verdict, code) = match overlap {
        Some(_) => ("EXACT_OVERLAP", EXIT_NEGATIVE),
        None => ("SEPARATED", EXIT_OK),
    };
    let message = overlap.map(|r| {
        format!(
            "depth {}: {} and {} agree on the grid (delta {:e})",
            r.depth, r.witness_i, r.witness_j, r.delta
        )
    });
    let csv = write_csv(
        &[
            "depth",
            "delta",
            "log_delta_over_n",
            "pairs_scanned",
            "witness_i",
            "witness_j",
        ],
        series.rows.iter().map(|r| {
            vec![
                r.depth.to_string(),
                f17(r.delta),
                f17(r.log_delta_over_n),
                r.pairs_scanned.to_string(),
                r.witness_i.to_string(),
                r.witness_j.to_string(),
            ]
        }),
    );
    report.verdict = verdict.to_owned();
    report.exit_code = code;
    report.detail = detail(&series);
    Ok(Outcome {
        report,
        series: Some(csv),
        message,
    })
}

struct DimensionArgs {
    weights: Option<Vec<f64>>,
    depth: usize,
    tol: f64,
    chaos: ChaosConfig,
    t_max: f64,
    t_points: usize,
}

const LYAPUNOV_CHUNK: u64 = 4096;

fn cmd_dimension(src: &SpecSource, ifs: &Ifs, a: &DimensionArgs) -> Result<Outcome, Failure> {
    let p = match &a.weights {
        Some(w) => ProbabilityVector::new(w.clone())?,
        None => src.spec.weights()?,
    };
    let n = a.chaos.samples as u64;
    let chunks: Vec<u64> = (0..n.div_ceil(LYAPUNOV_CHUNK)).collect();
    let values = chunks
        .into_par_iter()
        .map(|c| {
            let r = c * LYAPUNOV_CHUNK..((c + 1) * LYAPUNOV_CHUNK).min(n);
            dualsep_core::dimension::lyapunov_samples(ifs, &p, r, a.chaos.horizon, a.chaos.seed)
        })
        .collect::<Result<Vec<_>, _>>()?
        .concat();
    let chi = summarize(&values);
    let d = dimension_report(ifs, &p, a.depth, a.tol, chi)?;
    let steps = a.t_points.max(2);
    let ts: Vec<f64> = (0..steps)
        .map(|k| a.t_max * k as f64 / (steps - 1) as f64)
        .collect();
    let curve = pressure_curve(ifs, a.depth, &ts)?;
    let mut report = base_report(
        src,
        "dimension",
        json!({
            "weights": p.as_slice(),
            "depth": a.depth,
            "tol": a.tol,
            "samples": a.chaos.samples,
            "horizon": a.chaos.horizon,
            "seed": a.chaos.seed,
        }),
    );
    let c = &d.conformality;
    let ev = &mut report.evidence;
    ev.push(claim(
        "conformality_dimension",
        c.value,
        c.spread.max(c.hi - c.lo),
        Method::Grid,
    ));
    ev.push(claim(
        "pressure_at_root",
        c.pressure_at_root,
        0.0,
        Method::Grid,
    ));
    ev.push(claim("entropy", d.entropy, 0.0, Method::Exact));
    ev.push(claim(
        "lyapunov",
        d.lyapunov.mean,
        d.lyapunov.stderr,
        Method::MonteCarlo,
    ));
    ev.push(claim(
        "set_bound",
        d.set_bound,
        c.spread.max(c.hi - c.lo),
        Method::Grid,
    ));
    ev.push(claim(
        "measure_bound",
        d.measure_bound,
        d.measure_bound * d.lyapunov.stderr / d.lyapunov.mean.abs(),
        Method::MonteCarlo,
    ));
    report.verdict = if d.bounds_attained {
        "DIMENSION_EQUALS_BOUNDS"
    } else {
        "UPPER_BOUNDS"
    }
    .to_owned();
    report.detail = json!({ "report": detail(&d), "pressure": detail(&curve) });
    let csv = write_csv(
        &["t", "P"],
        curve.iter().map(|&(t, v)| vec![f17(t), f17(v)]),
    );
    Ok(Outcome {
        report,
        series: Some(csv),
        message: None,
    })
}

fn conjugacy_claims(ev: &mut Vec<Claim>, v: &ConjugacyVerdict) {
    for (i, p) in v.params.iter().enumerate() {
        ev.push(claim(
            &format!("lambda[{}]", i + 1),
            p.lambda,
            p.residual,
            Method::Grid,
        ));
        ev.push(claim(
            &format!("multiplier[{}]", i + 1),
            p.multiplier,
            0.0,
            Method::Grid,
        ));
    }
    ev.push(claim(
        "max_generator_discrepancy",
        v.max_generator_discrepancy,
        v.tol,
        Method::Grid,
    ));
    ev.push(claim(
        "min_discrepancy",
        v.min_discrepancy,
        v.tol,
        Method::Grid,
    ));
    if v.h_hat.len() >= 2 && !v.h_hat[0].is_empty() {
        ev.push(claim(
            "h_hat_gap_at_0",
            (v.h_hat[0][0] - v.h_hat[1][0]).abs(),
            v.tol,
            Method::Grid,
        ));
    }
}

fn cmd_conjugacy(
    src: &SpecSource,
    ifs: &Ifs,
    cfg: ConjugacyConfig,
    by: Option<&str>,
) -> Result<Outcome, Failure> {
    let v = match by {
        None => conjugacy_test(ifs, &cfg)?,
        Some(e) => {
            let g = ExprChange::new(
                parse_expr(e).map_err(|e| Failure::Input(format!("--conjugate-by: {e}")))?,
            );
            conjugacy_test(&conjugate_ifs(ifs, g)?, &cfg)?
        }
    };
    let mut report = base_report(
        src,
        "conjugacy",
        json!({
            "tol": cfg.tol,
            "max_word_len": cfg.max_word_len,
            "grid": cfg.grid,
            "conjugate_by": by,
        }),
    );
    conjugacy_claims(&mut report.evidence, &v);
    let (verdict, code) = match v.kind {
        ConjugacyKind::Conjugate => ("CONJUGATE", EXIT_OK),
        ConjugacyKind::SubConjugate => ("SUB_CONJUGATE", EXIT_OK),
        ConjugacyKind::NotDetected => ("NOT_DETECTED", EXIT_NEGATIVE),
    };
    report.verdict = verdict.to_owned();
    report.exit_code = code;
    report.detail = detail(&v);
    Ok(Outcome {
        report,
        series: None,
        message: None,
    })
}

fn cmd_perturb(
    src: &SpecSource,
    ifs: &Ifs,
    depth: Option<usize>,
    delta: Option<f64>,
    epsilon: Option<f64>,
    output: Option<&PathBuf>,
) -> Result<Outcome, Failure> {
    let env = tight_envelope(ifs)?;
    let (depth, delta) = match (depth, delta) {
        (Some(n), Some(d)) => (n, d),
        (Some(n), None) => (n, delta_for_depth(ifs, &env, n)),
        (None, Some(d)) => {
            let n = minimal_depth(ifs, &env, d)
                .ok_or_else(|| Failure::Input(format!("no depth up to 200 reaches delta {d:e}")))?;
            (n, d)
        }
        (None, None) => {
            return Err(Failure::Input(
                "perturb needs --depth, --delta or both".to_owned(),
            ))
        }
    };
    if !(delta > 0.0) {
        return Err(Failure::Input(format!(
            "--delta must be positive, got {delta}"
        )));
    }
    let eps = epsilon.unwrap_or(delta);
    let p = perturb_to_dual_ssc(ifs, depth, delta, eps)?;
    let r = &p.report;
    let mut report = base_report(
        src,
        "perturb",
        json!({ "depth": depth, "delta": delta, "epsilon": eps }),
    );
    let ev = &mut report.evidence;
    envelope_claims(ev, "envelope", &r.envelope);
    ev.push(claim(
        "min_point_gap",
        r.observed_point_gap,
        0.0,
        Method::Exact,
    ));
    if let Some(g) = r.min_repaired_gap {
        ev.push(claim("min_repaired_gap.lower", g, 0.0, Method::Enclosure));
    }
    for g in &r.generators {
        let i = g.generator;
        if let Some(eta) = g.spec.eta.iter().copied().reduce(f64::min) {
            ev.push(claim(&format!("min_eta[{i}]"), eta, 0.0, Method::Exact));
        }
        ev.push(claim(
            &format!("interpolation_residual[{i}]"),
            g.residuals.interpolation,
            0.0,
            Method::Exact,
        ));
        if let Some(k) = g.residuals.min_kick {
            ev.push(claim(&format!("min_kick[{i}]"), k, 0.0, Method::Exact));
        }
    }
    ev.push(claim(
        "d2",
        r.d2.value,
        r.d2.upper - r.d2.value,
        Method::Grid,
    ));
    ev.push(claim("constant_C", r.constant, 0.0, Method::Grid));
    ev.push(claim("d2_bound", r.d2_bound, 0.0, Method::Grid));
    if let Some(g) = r.dual_ssc.min_gap {
        ev.push(claim("perturbed_min_gap.lower", g, 0.0, Method::Enclosure));
    }
    let (verdict, code) = dual_verdict(r.dual_ssc.verdict);
    report.verdict = verdict.to_owned();
    report.exit_code = code;
    let maps: Vec<String> = p
        .system
        .maps()
        .iter()
        .map(|m| m.expr().to_string())
        .collect();
    report.detail = json!({ "report": detail(r), "maps": maps });
    if let Some(path) = output {
        let out = IfsSpecFile {
            name: Some(format!(
                "{} (perturbed, depth {depth}, delta {delta:e})",
                src.spec.name.as_deref().unwrap_or("system")
            )),
            description: src.spec.description.clone(),
            epsilon: src.spec.epsilon,
            maps,
            weights: src.spec.weights.clone(),
        };
        std::fs::write(path, out.to_json())
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(Outcome {
        report,
        series: None,
        message: None,
    })
}

fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    let spec_path = match &cli.command {
        Command::Validate(s) => &s.spec,
        Command::SescCertify { spec, .. }
        | Command::DualSsc { spec, .. }
        | Command::SeparationScan { spec, .. }
        | Command::Dimension { spec, .. }
        | Command::Conjugacy { spec, .. }
        | Command::Perturb { spec, .. } => &spec.spec,
    };
    let src = read_spec(spec_path)?;
    if let Command::Validate(_) = cli.command {
        return cmd_validate(&src);
    }
    let ifs = src.spec.build()?;
    match &cli.command {
        Command::Validate(_) => unreachable!(),
        Command::SescCertify { grid, .. } => cmd_sesc(&src, &ifs, *grid),
        Command::DualSsc { depth, tight, .. } => cmd_dual_ssc(&src, &ifs, *depth, *tight),
        Command::SeparationScan {
            max_depth, grid, ..
        } => cmd_scan(&src, &ifs, *max_depth, *grid),
        Command::Dimension {
            weights,
            depth,
            tol,
            samples,
            horizon,
            seed,
            t_max,
            t_points,
            ..
        } => cmd_dimension(
            &src,
            &ifs,
            &DimensionArgs {
                weights: weights.clone(),
                depth: *depth,
                tol: *tol,
                chaos: ChaosConfig {
                    samples: *samples,
                    horizon: *horizon,
                    seed: *seed,
                },
                t_max: *t_max,
                t_points: *t_points,
            },
        ),
        Command::Conjugacy {
            tol,
            max_word_len,
            grid,
            conjugate_by,
            ..
        } => cmd_conjugacy(
            &src,
            &ifs,
            ConjugacyConfig {
                grid: *grid,
                tol: *tol,
                max_word_len: *max_word_len,
            },
            conjugate_by.as_deref(),
        ),
        Command::Perturb {
            depth,
            delta,
            epsilon,
            output,
            ..
        } => cmd_perturb(&src, &ifs, *depth, *delta, *epsilon, output.as_ref()),
    }
}

/// Run the command line `args` (including the program name) and return the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_INPUT
                }
            };
        }
    };
    let format = if cli.json {
        Format::Json
    } else if cli.csv {
        Format::Csv
    } else {
        Format::Text
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: thread pool: {e}");
            return EXIT_INPUT;
        }
    };
    let start = Instant::now();
    let result = pool.install(|| dispatch(&cli));
    match result {
        Err(Failure::Input(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_INPUT
        }
        Err(Failure::Numeric(m)) => {
            let _ = writeln!(err, "inconclusive: {m}");
            EXIT_INCONCLUSIVE
        }
        Ok(mut o) => {
            if cli.timing {
                o.report.wall_time = Some(start.elapsed().as_secs_f64());
            }
            if let Some(m) = &o.message {
                let _ = writeln!(err, "{m}");
            }
            let text = match format {
                Format::Json => o.report.to_json(),
                Format::Text => o.report.to_text(),
                Format::Csv => o.series.take().unwrap_or_else(|| o.report.to_csv()),
            };
            let _ = out.write_all(text.as_bytes());
            o.report.exit_code
        }
    }
}
