//! Experiment commands: each builds its report, its checks and its files.

use std::io::Write as _;
use std::time::Instant;

use anyhow::{bail, Result};
use flatcusp_core::corner::*;
use flatcusp_core::geometry::{construct_table, GeometryError, TableReport};
use flatcusp_core::induced::*;
use flatcusp_core::stats::cells::{cell_chunk, CellStatistics};
use flatcusp_core::stats::correlation::*;
use flatcusp_core::stats::fit::{median, power_law_fit};
use flatcusp_core::stats::transitions::*;
use flatcusp_core::stats::{tail_and_cells, FitResult, Stream, TailReport};
use flatcusp_core::Table;
use serde::Serialize;

use crate::config::{ExperimentConfig, Precision};
use crate::output::{checks_table, fmt, text_table, Check, Output};
use crate::runner::{split, Runner};

pub const COMMANDS: [&str; 6] = ["table", "corner", "tail", "expansion", "transitions", "correlations"];

/// `a = 1/(β − 1)`.
pub fn tail_a(beta: f64) -> f64 {
    1.0 / (beta - 1.0)
}

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub runner: &'a Runner,
}

impl Context<'_> {
    fn table(&self) -> Result<Table> {
        let t = construct_table(&self.cfg.table)?;
        if !t.report.passed() {
            return Err(GeometryError::Invariant(Box::new(t.report)).into());
        }
        Ok(t)
    }
}

/// A finished command: its checks, the JSON report and any CSV tables.
pub struct Outcome<R> {
    pub report: R,
    pub checks: Vec<Check>,
}

impl<R> Outcome<R> {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn opt_exponent(f: &Option<FitResult>) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| f.exponent)
}

// --- table ---------------------------------------------------------------

pub fn table(ctx: &Context) -> Result<Outcome<TableReport>> {
    let t = construct_table(&ctx.cfg.table)?;
    let r = t.report.clone();
    let checks = vec![
        Check::at_most("perpendicularity_residual", r.perpendicularity_residual, 1e-10),
        Check::at_most("c1_max_mismatch", r.c1_max_mismatch, 1e-10),
        Check::holds("non_cusp_curvature_positive", r.k_min, r.k_min > 0.0),
        Check::holds("invariants", r.failures.len() as f64, r.passed()),
    ];
    Ok(Outcome { report: r, checks })
}

fn write_table(o: &Outcome<TableReport>, ctx: &Context, out: &mut Output) -> Result<()> {
    out.json("table", ctx.cfg, &o.checks, &o.report)?;
    let rows: Vec<Vec<String>> = o
        .report
        .junctions
        .iter()
        .map(|j| {
            vec![
                format!("{:?}", j.from),
                format!("{:?}", j.to),
                format!("{:?}", j.kind),
                j.r.to_string(),
                j.position_gap.to_string(),
                j.tangent_turn.to_string(),
                j.interior_angle.to_string(),
            ]
        })
        .collect();
    out.csv("table_junctions", &["from", "to", "kind", "r", "position_gap", "tangent_turn", "interior_angle"], &rows)?;
    let r = &o.report;
    println!(
        "{}",
        text_table(
            &["quantity", "value"],
            &[
                vec!["beta".into(), fmt(r.beta)],
                vec!["|dQ|".into(), fmt(r.total_length)],
                vec!["r_f".into(), fmt(r.r_f)],
                vec!["r_D".into(), fmt(r.r_d)],
                vec!["l_D".into(), fmt(r.l_d)],
                vec!["K_min (non-cusp arcs)".into(), fmt(r.k_min)],
                vec!["K_max".into(), fmt(r.k_max)],
                vec!["tau_min (configured)".into(), fmt(r.tau_min)],
                vec!["tau_max".into(), fmt(r.tau_max)],
            ]
        )
    );
    for f in &r.failures {
        println!("invariant failure: {f}");
    }
    Ok(())
}

// --- corner --------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CornerReport {
    pub mode: SeriesMode,
    pub drawn: usize,
    pub records: usize,
    /// Draws rejected as invalid or outside `n_range`.
    pub rejected: usize,
    pub asymptotics: AsymptoticsReport,
    /// Largest geometric-identity residuals over the records (exact mode).
    pub gamma_residual_max: f64,
    pub tau_residual_max: f64,
    /// Flight-time sums over the entering period and over `[N₁, N̄]`
    /// against `N`.
    pub entering_flight_sum: Option<FitResult>,
    pub turning_flight_sum: Option<FitResult>,
    /// Median over records with `N ≥ 1000` of the entering-period slope of
    /// `|Hₙ − C_N|`.
    pub entering_drift_slope: f64,
    pub comparison: Vec<SeriesComparison>,
    pub comparison_max_rel_s: Option<f64>,
}

pub struct CornerRun {
    pub outcome: Outcome<CornerReport>,
    pub records: Vec<CornerSeriesRecord>,
    pub drift: Vec<DriftReport>,
}

/// Records from the configured ensemble in stream order.
pub fn corner_records(ctx: &Context, table: &Table, mode: SeriesMode, count: usize, stream_base: u64) -> (Vec<CornerSeriesRecord>, usize) {
    let c = &ctx.cfg.corner;
    let sizes = split(count as u64, count.div_ceil(c.chunk));
    let parts = ctx.runner.run_plain(sizes.len(), |i| {
        corner_ensemble(table, &c.corner(), &c.ensemble(), mode, sizes[i] as usize, ctx.cfg.seed, stream_base + i as u64)
    });
    let mut recs = Vec::new();
    let mut rejected = 0;
    for (r, k) in parts {
        recs.extend(r);
        rejected += k;
    }
    (recs, rejected)
}

pub fn corner(ctx: &Context) -> Result<CornerRun> {
    let t = ctx.table()?;
    let c = &ctx.cfg.corner;
    let mode = c.series_mode(ctx.cfg.precision);
    let (records, rejected) = corner_records(ctx, &t, mode, c.count, 0);
    let asym = match asymptotics_report(&records) {
        Ok(a) => a,
        Err(e) => bail!("{e}; drawn {}, kept {}, rejected {rejected} (invalid or outside n_range {:?})", c.count, records.len(), c.n_range),
    };
    let exact = mode == SeriesMode::Exact;
    let res = |f: fn(&CornerSeriesRecord) -> f64| if exact { records.iter().map(f).fold(0.0, f64::max) } else { f64::NAN };
    let gamma_residual_max = res(|r| r.gamma_residual());
    let tau_residual_max = res(|r| r.tau_residual());

    let (mut na, mut a, mut nb, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    if exact {
        for r in &records {
            let s1: f64 = r.tau[..r.n1].iter().sum();
            let s2: f64 = r.tau[r.n1.max(1) - 1..r.n_bar].iter().sum();
            if s1 > 0.0 {
                na.push(r.len as f64);
                a.push(s1);
            }
            nb.push(r.len as f64);
            b.push(s2);
        }
    }
    let drift: Vec<DriftReport> = records.iter().map(adiabatic_invariant).collect();
    let slopes: Vec<f64> = drift.iter().filter(|d| d.len >= 1000 && d.entering_h_slope.is_finite()).map(|d| d.entering_h_slope).collect();

    let mut comparison = Vec::new();
    if c.compare {
        let extended = ctx.cfg.precision == Precision::Extended;
        let pool: Vec<CornerSeriesRecord> = if exact {
            records.iter().take(c.compare_count).cloned().collect()
        } else {
            corner_records(ctx, &t, SeriesMode::Exact, c.compare_count, 1 << 32).0
        };
        for r in pool.iter().take(c.compare_count) {
            comparison.push(compare_series(r, &c.corner(), t.eps0, extended)?);
        }
    }
    let comparison_max_rel_s = (!comparison.is_empty()).then(|| comparison.iter().map(|s| s.max_rel_s).fold(0.0, f64::max));

    let beta = t.beta;
    let q = 2.0 * beta - 1.0;
    let mut checks = vec![
        Check::band("alpha_n_slope", asym.alpha_n.exponent, -(beta - 1.0) / q, 0.04),
        Check::band("gamma_n_slope", asym.gamma_n.exponent, beta / q, 0.05),
        Check::band("tau_n_slope", asym.tau_n.exponent, -2.0 * beta / q, 0.1),
        Check::band("alpha1_vs_n_slope", asym.alpha1_vs_n.exponent, -beta / q, 0.06),
        Check::at_most("n1_over_n_variation", asym.n1_over_n_variation, 0.15),
        Check::band("median_h_vs_n_slope", asym.median_h_vs_n.exponent, -beta / (beta - 1.0), 0.08),
        Check::at_most("drift_vs_n_slope", asym.drift_vs_n.exponent, -0.8),
    ];
    let entering_flight_sum = power_law_fit(&na, &a, None, None).ok();
    let turning_flight_sum = power_law_fit(&nb, &b, None, None).ok();
    let ta = tail_a(beta);
    if exact {
        checks.push(Check::at_most("gamma_recursion_residual", gamma_residual_max, 1e-9));
        checks.push(Check::at_most("free_path_residual", tau_residual_max, 1e-9));
        checks.push(Check::band("entering_flight_sum_slope", opt_exponent(&entering_flight_sum), -ta, 0.1 * ta));
        checks.push(Check::band("turning_flight_sum_slope", opt_exponent(&turning_flight_sum), -ta, 0.1 * ta));
        checks.push(Check::band("entering_drift_slope", median(&slopes), -1.0, 0.2));
    }
    if let Some(m) = comparison_max_rel_s {
        checks.push(Check::at_most("exact_vs_reduced_max_rel_s", m, 1e-4));
    }
    let report = CornerReport {
        mode,
        drawn: c.count,
        records: records.len(),
        rejected,
        asymptotics: asym,
        gamma_residual_max,
        tau_residual_max,
        entering_flight_sum,
        turning_flight_sum,
        entering_drift_slope: median(&slopes),
        comparison,
        comparison_max_rel_s,
    };
    Ok(CornerRun { outcome: Outcome { report, checks }, records, drift })
}

fn write_corner(run: &CornerRun, ctx: &Context, out: &mut Output) -> Result<()> {
    let o = &run.outcome;
    out.json("corner", ctx.cfg, &o.checks, &o.report)?;
    let rows: Vec<Vec<String>> = run
        .records
        .iter()
        .zip(&run.drift)
        .map(|(r, d)| {
            vec![
                r.len.to_string(),
                r.n_bar.to_string(),
                r.n1.to_string(),
                r.n3.to_string(),
                r.s[0].to_string(),
                r.v[0].to_string(),
                r.alpha[0].to_string(),
                r.tau_entry.to_string(),
                r.expansion.to_string(),
                d.c_n.to_string(),
                d.max_drift.to_string(),
                d.entering_h_slope.to_string(),
            ]
        })
        .collect();
    out.csv(
        "corner_series",
        &["n", "n_bar", "n1", "n3", "s1", "v1", "alpha1", "tau_entry", "expansion", "c_n", "max_drift", "entering_h_slope"],
        &rows,
    )?;
    if !o.report.comparison.is_empty() {
        let rows: Vec<Vec<String>> = o
            .report
            .comparison
            .iter()
            .map(|c| {
                vec![
                    c.s1.to_string(),
                    c.v1.to_string(),
                    c.len_exact.to_string(),
                    c.len_reduced.to_string(),
                    c.compared.to_string(),
                    c.max_rel_s.to_string(),
                    c.max_abs_v.to_string(),
                ]
            })
            .collect();
        out.csv("corner_compare", &["s1", "v1", "len_exact", "len_reduced", "compared", "max_rel_s", "max_abs_v"], &rows)?;
        println!(
            "{}",
            text_table(
                &["s1", "N exact", "N reduced", "compared", "max rel s"],
                &o.report
                    .comparison
                    .iter()
                    .map(|c| vec![fmt(c.s1), c.len_exact.to_string(), c.len_reduced.to_string(), c.compared.to_string(), fmt(c.max_rel_s)])
                    .collect::<Vec<_>>()
            )
        );
    }
    let a = &o.report.asymptotics;
    let fits = [
        ("alpha_1 vs N", &a.alpha1_vs_n),
        ("alpha_n vs n", &a.alpha_n),
        ("gamma_n vs n", &a.gamma_n),
        ("tau_n vs n", &a.tau_n),
        ("median H vs N", &a.median_h_vs_n),
        ("drift vs N", &a.drift_vs_n),
    ];
    let rows: Vec<Vec<String>> =
        fits.iter().map(|(n, f)| vec![n.to_string(), fmt(f.exponent), fmt(f.stderr), f.points.to_string()]).collect();
    println!("{} records kept of {} ({} rejected), mode {:?}", o.report.records, o.report.drawn, o.report.rejected, o.report.mode);
    println!("{}", text_table(&["fit", "exponent", "stderr", "points"], &rows));
    Ok(())
}

// --- expansion -----------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionOut {
    pub expansion: ExpansionReport,
    pub one_step: Option<OneStepReport>,
    pub records: Vec<(usize, f64)>,
}

pub fn expansion(ctx: &Context) -> Result<Outcome<ExpansionOut>> {
    let t = ctx.table()?;
    let e = &ctx.cfg.expansion;
    let (records, _) = corner_records(ctx, &t, SeriesMode::Exact, ctx.cfg.corner.count, 0);
    let rep = expansion_report(&t, &records, e.alt_seed_extra, e.matrix_checks)?;
    let beta = t.beta;
    let (a, b) = (entering_constant(beta), exiting_constant(beta));
    let mut checks = vec![
        Check::band("lambda_vs_n_slope", rep.lambda_vs_n.exponent, 1.0 + beta / ((2.0 * beta - 1.0) * (beta - 1.0)), 0.1),
        Check::band("entering_n_lambda", rep.entering_a, a, 0.15 * a),
        Check::band("exiting_n_lambda", rep.exiting_b, b, 0.15 * b),
        Check::at_most("matrix_product_max_rel", rep.matrix_product_max_rel, 1e-6),
        Check::holds("seed_insensitive", (rep.lambda_vs_n.exponent - rep.lambda_vs_n_alt.exponent).abs(), rep.seed_insensitive),
    ];
    let one_step = if e.one_step_n0.is_empty() {
        None
    } else {
        let curve = singular_fan_curve(&t);
        let os = one_step_expansion_sum(&t, &curve, &e.one_step_n0, &e.one_step(), &ctx.cfg.induced);
        let last = os.sums.iter().max_by_key(|s| s.n0).unwrap();
        checks.push(Check::at_most(&format!("one_step_sum_n0_{}", last.n0), last.total, 1.0));
        checks.push(Check::holds("one_step_monotone", os.sums.len() as f64, os.monotone));
        Some(os)
    };
    let records = records.iter().map(|r| (r.len, r.expansion)).collect();
    Ok(Outcome { report: ExpansionOut { expansion: rep, one_step, records }, checks })
}

fn write_expansion(o: &Outcome<ExpansionOut>, ctx: &Context, out: &mut Output) -> Result<()> {
    let r = &o.report;
    out.json(
        "expansion",
        ctx.cfg,
        &o.checks,
        &ExpansionJson { expansion: &r.expansion, one_step: r.one_step.as_ref().map(OneStepJson::from) },
    )?;
    out.csv(
        "expansion_records",
        &["n", "expansion"],
        &r.records.iter().map(|(n, l)| vec![n.to_string(), l.to_string()]).collect::<Vec<_>>(),
    )?;
    if let Some(os) = &r.one_step {
        let rows: Vec<Vec<String>> = os
            .sums
            .iter()
            .map(|s| vec![s.n0.to_string(), s.resolved.to_string(), s.tail.to_string(), s.total.to_string(), s.pieces.to_string()])
            .collect();
        out.csv("one_step", &["n0", "resolved", "tail", "total", "pieces"], &rows)?;
        println!(
            "{}",
            text_table(
                &["n0", "resolved", "tail", "total", "pieces"],
                &os.sums
                    .iter()
                    .map(|s| vec![s.n0.to_string(), fmt(s.resolved), fmt(s.tail), fmt(s.total), s.pieces.to_string()])
                    .collect::<Vec<_>>()
            )
        );
    }
    let e = &r.expansion;
    println!(
        "Lambda ~ N^{} ± {} (alt seed {}), A = {}, B = {}, C3 = {}, C4 = {}",
        fmt(e.lambda_vs_n.exponent),
        fmt(e.lambda_vs_n.stderr),
        fmt(e.lambda_vs_n_alt.exponent),
        fmt(e.entering_a),
        fmt(e.exiting_b),
        fmt(e.c3),
        fmt(e.c4)
    );
    Ok(())
}

#[derive(Serialize)]
struct ExpansionJson<'a> {
    expansion: &'a ExpansionReport,
    one_step: Option<OneStepJson<'a>>,
}

/// The one-step report without its piece list.
#[derive(Serialize)]
struct OneStepJson<'a> {
    n_cap: usize,
    pieces: usize,
    sums: &'a [OneStepSum],
    tail_cells: &'a [(usize, f64)],
    tail_exponent: f64,
    tail_exponent_stderr: f64,
    unresolved: usize,
    inconclusive: bool,
    monotone: bool,
}

impl<'a> From<&'a OneStepReport> for OneStepJson<'a> {
    fn from(r: &'a OneStepReport) -> Self {
        OneStepJson {
            n_cap: r.n_cap,
            pieces: r.pieces.len(),
            sums: &r.sums,
            tail_cells: &r.tail_cells,
            tail_exponent: r.tail_exponent,
            tail_exponent_stderr: r.tail_exponent_stderr,
            unresolved: r.unresolved,
            inconclusive: r.inconclusive,
            monotone: r.monotone,
        }
    }
}

// --- tail ----------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TailOut {
    pub a_target: f64,
    /// `−` the full-space tail exponent.
    pub a_fitted: f64,
    pub rejected: u64,
    pub discarded: u64,
    pub full_censored: u64,
    pub full_discarded: u64,
    pub tail: TailReport,
}

pub fn tail(ctx: &Context) -> Result<Outcome<TailOut>> {
    let t = ctx.table()?;
    let c = &ctx.cfg.tail;
    let n = c.returns.div_ceil(c.chunk);
    let ret = split(c.returns as u64, n);
    let full = split(c.full_samples as u64, n);
    let parts: Vec<CellStatistics> = ctx
        .runner
        .run("tail", n, |i| cell_chunk(&t, &ctx.cfg.induced, ret[i] as usize, full[i] as usize, c.full_cap, ctx.cfg.seed, i as u64))?;
    let mut st = CellStatistics { full_cap: c.full_cap, ..Default::default() };
    for p in &parts {
        st.merge(p);
    }
    ctx.runner.finish("tail")?;
    let rep = tail_and_cells(&st, &ctx.cfg.induced);
    let a = tail_a(t.beta);
    let full = opt_exponent(&rep.full_tail_fit);
    let mut checks = vec![
        Check::band("cell_measure_exponent", opt_exponent(&rep.cell_fit), -2.0 - a, 0.2),
        Check::band("m_tail_exponent", opt_exponent(&rep.m_tail_fit), -1.0 - a, 0.15),
        Check::band("full_tail_exponent", full, -a, 0.2 * a),
    ];
    if let Some(z) = rep.spacing_z {
        checks.push(Check::band("spacing_cell_to_m_tail_z", z[0], 0.0, 3.0));
        checks.push(Check::band("spacing_m_tail_to_full_z", z[1], 0.0, 3.0));
    }
    let report = TailOut {
        a_target: a,
        a_fitted: -full,
        rejected: st.rejected,
        discarded: st.discarded,
        full_censored: st.full_censored,
        full_discarded: st.full_discarded,
        tail: rep,
    };
    Ok(Outcome { report, checks })
}

fn write_tail(o: &Outcome<TailOut>, ctx: &Context, out: &mut Output) -> Result<()> {
    out.json("tail", ctx.cfg, &o.checks, &o.report)?;
    let r = &o.report.tail;
    let mut rows = Vec::new();
    for (name, curve) in [("cell", &r.cell_curve), ("m_tail", &r.m_tail_curve), ("full_tail", &r.full_tail_curve)] {
        for p in curve {
            rows.push(vec![name.to_string(), p.n.to_string(), p.value.to_string(), p.stderr.to_string(), p.count.to_string()]);
        }
    }
    out.csv("tail_curves", &["curve", "n", "value", "stderr", "count"], &rows)?;
    let fits =
        [("mu_M(M_N)", &r.cell_fit), ("mu_M(R >= N)", &r.m_tail_fit), ("mu(R >= N)", &r.full_tail_fit), ("Hill, mu_M", &r.m_tail_hill)];
    let rows: Vec<Vec<String>> = fits
        .iter()
        .map(|(n, f)| match f {
            Some(f) => vec![
                n.to_string(),
                fmt(f.exponent),
                fmt(f.stderr),
                format!("[{}, {}]", fmt(f.window[0]), fmt(f.window[1])),
                f.warning.clone().unwrap_or_default(),
            ],
            None => vec![n.to_string(), "-".into(), "-".into(), "-".into(), "too few populated bins".into()],
        })
        .collect();
    println!("{} returns, {} full-space draws", r.ensemble, r.full_ensemble);
    println!("{}", text_table(&["curve", "exponent", "stderr", "window", "note"], &rows));
    Ok(())
}

// --- transitions ---------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TransitionsOut {
    pub returns: u64,
    pub collisions: u64,
    pub restarts: u64,
    pub segments: usize,
    pub m_exponent_target: f64,
    pub report: TransitionReport,
}

pub fn transitions(ctx: &Context) -> Result<Outcome<TransitionsOut>> {
    let t = ctx.table()?;
    let c = &ctx.cfg.transitions;
    let n = c.returns.div_ceil(c.chunk) as usize;
    let sizes = split(c.returns, n);
    let parts: Vec<CellSequences> =
        ctx.runner.run("transitions", n, |i| collect_cell_sequences(&t, &ctx.cfg.induced, sizes[i], c.burn_in, ctx.cfg.seed, i as u64))?;
    let mut seqs = CellSequences::default();
    for p in &parts {
        seqs.merge(p);
    }
    ctx.runner.finish("transitions")?;
    let rep = transition_stats(&seqs, t.beta, &ctx.cfg.induced, &c.transitions());
    let beta = t.beta;
    let target = -1.0 - beta * beta / ((beta - 1.0) * (2.0 * beta - 1.0));
    let checks = vec![
        Check::band("m_exponent", opt_exponent(&rep.m_exponent), target, 0.2),
        Check::holds("c2_stable", opt_exponent(&rep.c2_trend), rep.c2_stable),
        Check::holds("c2_bounds_all_pairs", rep.c2_global, rep.c2_global.is_finite()),
        Check::at_most("escape_fraction_slope", opt_exponent(&rep.escape_fit), 0.0),
    ];
    let report = TransitionsOut {
        returns: seqs.returns,
        collisions: seqs.collisions,
        restarts: seqs.restarts,
        segments: seqs.segments.len(),
        m_exponent_target: target,
        report: rep,
    };
    Ok(Outcome { report, checks })
}

fn write_transitions(o: &Outcome<TransitionsOut>, ctx: &Context, out: &mut Output) -> Result<()> {
    out.json("transitions", ctx.cfg, &o.checks, &o.report)?;
    let rows: Vec<Vec<String>> = o
        .report
        .report
        .bands
        .iter()
        .map(|b| {
            vec![
                b.lo.to_string(),
                b.hi.to_string(),
                b.sources.to_string(),
                b.long_targets.to_string(),
                b.c1.to_string(),
                b.c2.to_string(),
                b.escape_fraction.to_string(),
                b.mean_next_return.to_string(),
            ]
        })
        .collect();
    let header = ["lo", "hi", "sources", "long_targets", "c1", "c2", "escape_fraction", "mean_next_return"];
    out.csv("transition_bands", &header, &rows)?;
    println!(
        "{}",
        text_table(
            &header,
            &rows
                .iter()
                .map(|r| r
                    .iter()
                    .map(|c| if c.parse::<u64>().is_ok() { c.clone() } else { c.parse::<f64>().map(fmt).unwrap_or(c.clone()) })
                    .collect())
                .collect::<Vec<_>>()
        )
    );
    Ok(())
}

// --- correlations --------------------------------------------------------

pub fn correlations(ctx: &Context) -> Result<Outcome<CorrelationCurve>> {
    let t = ctx.table()?;
    let c = &ctx.cfg.correlations;
    let cc = c.correlation();
    let pair = ObservablePair { f: c.f.clone(), g: c.g.clone() };
    let n = c.orbits as usize;
    let lengths = split(c.orbit_length, n);
    let parts: Vec<(CorrelationAccumulator, u64)> = ctx.runner.run("correlations", n, |i| {
        let mut rng = Stream::new(ctx.cfg.seed, i as u64);
        let mut acc = CorrelationAccumulator::new(cc.n_max, cc.block_factor * cc.n_max);
        let restarts = accumulate_orbit(&t, &pair, lengths[i], cc.burn_in, &mut rng, &mut acc);
        (acc, restarts)
    })?;
    ctx.runner.finish("correlations")?;
    let mut acc = parts[0].0.clone();
    for p in &parts[1..] {
        acc.merge(&p.0);
    }
    let mut rng = Stream::new(ctx.cfg.seed, n as u64);
    let mut curve = acc.finish(cc.bootstrap_reps, &mut rng);
    curve.restarts = parts.iter().map(|p| p.1).sum();
    curve.envelope_fit = curve.fit_envelope(cc.fit_lo, cc.fit_hi);
    let bound = -0.7 * tail_a(t.beta);
    let checks = vec![Check::at_most("envelope_exponent", opt_exponent(&curve.envelope_fit), bound)];
    Ok(Outcome { report: curve, checks })
}

fn write_correlations(o: &Outcome<CorrelationCurve>, ctx: &Context, out: &mut Output) -> Result<()> {
    out.json("correlations", ctx.cfg, &o.checks, &o.report)?;
    let c = &o.report;
    let env = c.envelope();
    let rows: Vec<Vec<String>> =
        (0..c.c.len()).map(|n| vec![n.to_string(), c.c[n].to_string(), c.stderr[n].to_string(), env[n].to_string()]).collect();
    out.csv("correlations", &["n", "c_n", "stderr", "envelope"], &rows)?;
    let show: Vec<Vec<String>> = [0usize, 1, 2, 5, 10, 20, 50, 100, 200]
        .iter()
        .filter(|&&n| n < c.c.len())
        .map(|&n| vec![n.to_string(), fmt(c.c[n]), fmt(c.stderr[n])])
        .collect();
    println!("{} samples, {} restarts", c.samples, c.restarts);
    println!("{}", text_table(&["n", "C_n", "stderr"], &show));
    Ok(())
}

// --- dispatch ------------------------------------------------------------

/// Runs one command, writes its files and prints its summary. Returns
/// whether the command's hard requirements held (table invariants); check
/// results are reported but do not fail other commands.
pub fn run_command(name: &str, ctx: &Context, out: &mut Output) -> Result<bool> {
    let start = Instant::now();
    eprintln!("[{name}] running with {} worker(s)", ctx.runner.workers());
    println!("== {name} ==");
    let (ok, checks) = match name {
        "table" => {
            let o = table(ctx)?;
            write_table(&o, ctx, out)?;
            (o.report.passed(), o.checks)
        }
        "corner" => {
            let r = corner(ctx)?;
            write_corner(&r, ctx, out)?;
            (true, r.outcome.checks)
        }
        "tail" => {
            let o = tail(ctx)?;
            write_tail(&o, ctx, out)?;
            (true, o.checks)
        }
        "expansion" => {
            let o = expansion(ctx)?;
            write_expansion(&o, ctx, out)?;
            (true, o.checks)
        }
        "transitions" => {
            let o = transitions(ctx)?;
            write_transitions(&o, ctx, out)?;
            (true, o.checks)
        }
        "correlations" => {
            let o = correlations(ctx)?;
            write_correlations(&o, ctx, out)?;
            (true, o.checks)
        }
        other => bail!("unknown command `{other}`"),
    };
    println!("{}", checks_table(&checks));
    let secs = start.elapsed().as_secs_f64();
    eprintln!("[{name}] finished in {secs:.1} s");
    let mut log = std::fs::OpenOptions::new().create(true).append(true).open(out.dir().join("run.log"))?;
    writeln!(log, "{name}\tseed {}\tconfig {}\t{secs:.3} s", ctx.cfg.seed, ctx.cfg.hash())?;
    Ok(ok)
}
