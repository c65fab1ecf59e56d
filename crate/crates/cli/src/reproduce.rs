use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use wiener_fb::bank::{elt_bank, Bank};
use wiener_fb::experiments::*;
use wiener_fb::pr::{certify, pr_feasibility, pr_solution, DEFAULT_TOLERANCE};
use wiener_fb::runtime::{ensemble, modulated_noise, realization_rng, run_pipeline};
use wiener_fb::stochastic::correlation_bundle;
use wiener_fb::to_db;
use wiener_fb::wiener::{evaluate_mse, mse_vs_delay, solve, WienerProblem};

use crate::output::{ensure_dir, num, report_written, write_csv, write_text};
use crate::ReproduceArgs;

pub fn run(args: ReproduceArgs) -> Result<()> {
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("reproduce-{}", args.experiment)));
    ensure_dir(&dir)?;
    match args.experiment {
        1 => experiment1(&args, &dir),
        2 => experiment2(&args, &dir),
        _ => experiment3(&args, &dir),
    }
}

fn finish(dir: &Path, summary: &str, mut written: Vec<PathBuf>) -> Result<()> {
    print!("{summary}");
    written.push(write_text(&dir.join("summary.txt"), summary)?);
    report_written(&written);
    Ok(())
}

fn experiment1(args: &ReproduceArgs, dir: &Path) -> Result<()> {
    let (lp_len, hp_len) = match args.filter_lengths.as_deref() {
        Some([a, b]) => (*a, *b),
        _ => (EXP1_LOWPASS_LEN, EXP1_HIGHPASS_LEN),
    };
    let runs = args.runs.unwrap_or(EXP1_RUNS);
    let samples = args.samples.unwrap_or(EXP1_RUN_LEN);
    let bank = exp1_bank(lp_len, hp_len)?;
    let model = exp1_model();
    let k = bank.build_k(EXP1_SYNTHESIS_LEN)?;
    let scan = mse_vs_delay(&k, &model, &EXP1_DELAYS)?;

    let mut summary = String::new();
    writeln!(
        summary,
        "experiment 1: two-channel windowed-sinc bank, M = {EXP1_DECIMATION}"
    )?;
    writeln!(
        summary,
        "config: lowpass cutoff {EXP1_LOWPASS_CUTOFF} length {lp_len}, highpass cutoff {EXP1_HIGHPASS_CUTOFF} length {hp_len}, AR{EXP1_AR:?} unit variance, P = {EXP1_SYNTHESIS_LEN}"
    )?;
    writeln!(
        summary,
        "ensemble: {runs} runs x {samples} samples, seed {}, transient {}",
        args.seed,
        if args.include_transient {
            "included"
        } else {
            "excluded"
        }
    )?;
    writeln!(
        summary,
        "{:>4} {:>10} {:>10} {:>10} | {:>10} {:>10} | {:>10}",
        "d", "J_0 (dB)", "J_1 (dB)", "J (dB)", "J_0 emp", "J_1 emp", "J ref"
    )?;

    let mut table = Vec::new();
    let mut curves: Vec<Vec<Vec<f64>>> = Vec::new();
    for (entry, reference) in scan.entries.iter().zip(EXP1_REFERENCE_DB) {
        let d = entry.delay;
        let sol = solve(&WienerProblem::new(k.clone(), &model, d)?, None)?;
        let ens = ensemble(
            &bank,
            &sol,
            &model,
            runs,
            samples,
            args.seed,
            args.include_transient,
        )?;
        let cells = [
            ("J_0", entry.channel_mse[0], "analytic"),
            ("J_1", entry.channel_mse[1], "analytic"),
            ("J", entry.total, "analytic"),
            ("J_0", ens.mse.channel[0], "empirical"),
            ("J_1", ens.mse.channel[1], "empirical"),
            ("J", ens.mse.total, "empirical"),
        ];
        for (q, v, source) in cells {
            table.push(vec![d.to_string(), q.into(), num(to_db(v)), source.into()]);
        }
        for (q, v) in [
            ("J_0", reference.1),
            ("J_1", reference.2),
            ("J", reference.3),
        ] {
            table.push(vec![d.to_string(), q.into(), num(v), "reference".into()]);
        }
        writeln!(
            summary,
            "{d:>4} {:>10.4} {:>10.4} {:>10.4} | {:>10.4} {:>10.4} | {:>10.4}",
            to_db(entry.channel_mse[0]),
            to_db(entry.channel_mse[1]),
            to_db(entry.total),
            to_db(ens.mse.channel[0]),
            to_db(ens.mse.channel[1]),
            reference.3
        )?;
        curves.push(ens.squared_error);
    }
    writeln!(summary, "best delay (analytic total): {}", scan.best_delay)?;

    let mut written = vec![write_csv(
        &dir.join("table1.csv"),
        &["delay", "quantity", "value_db", "source"],
        table,
    )?];
    for ch in 0..EXP1_DECIMATION {
        let mut header = vec!["n".to_string()];
        header.extend(EXP1_DELAYS.iter().map(|d| format!("d{d}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let blocks = curves[0][ch].len();
        let rows = (0..blocks).map(|n| {
            let mut row = vec![n.to_string()];
            row.extend(curves.iter().map(|c| num(c[ch][n])));
            row
        });
        written.push(write_csv(
            &dir.join(format!("ensemble_channel{ch}.csv")),
            &header,
            rows,
        )?);
    }
    finish(dir, &summary, written)
}

fn load_prototype(path: &Path) -> Result<Vec<f64>> {
    let bank =
        Bank::from_file(path).with_context(|| format!("reading prototype {}", path.display()))?;
    Ok(bank.channels()[0].taps.clone())
}

fn subset_label(s: &[usize]) -> String {
    s.iter()
        .map(|i| format!("h{i}"))
        .collect::<Vec<_>>()
        .join("+")
}

fn experiment2(args: &ReproduceArgs, dir: &Path) -> Result<()> {
    let (bank, prototype) = match &args.prototype {
        Some(path) => (
            elt_bank(&load_prototype(path)?, EXP2_DECIMATION)?,
            format!("file {}", path.display()),
        ),
        None => {
            eprintln!(
                "warning: no ELT prototype given (--prototype); using the closed-form overlap-2 window. \
                 Tables are marked \"derived prototype\"."
            );
            (
                elt_bank_default(),
                "derived prototype (closed-form K'=2 window)".to_string(),
            )
        }
    };
    let tol = args.tol.unwrap_or(DEFAULT_TOLERANCE);
    let model = exp2_model();

    let mut summary = String::new();
    writeln!(
        summary,
        "experiment 2: ELT bank, M = {EXP2_DECIMATION}, prototype: {prototype}"
    )?;
    writeln!(summary, "config: AR{EXP2_AR:?} unit variance, P = {EXP2_SYNTHESIS_LEN}, d = {EXP2_DELAY}, tol {tol:e}")?;
    writeln!(
        summary,
        "{:<12} {:>9} {:>9} {:>9} {:>9} {:>9} | {:>9}",
        "subset", "J_0", "J_1", "J_2", "J_3", "J", "J ref"
    )?;

    let mut table = Vec::new();
    for (subset, reference) in exp2_subsets().iter().zip(EXP2_REFERENCE_TOTAL_DB) {
        let k = bank.subset(subset)?.build_k(EXP2_SYNTHESIS_LEN)?;
        let sol = solve(&WienerProblem::new(k, &model, EXP2_DELAY)?, None)?;
        let mse = sol.channel_mse.clone().expect("Wiener MSE");
        let total = sol.total_mse.expect("Wiener MSE");
        let label = subset_label(subset);
        let mut line = format!("{label:<12}");
        for (i, j) in mse.iter().enumerate() {
            table.push(row2(
                &label,
                subset.len(),
                EXP2_DELAY,
                &format!("J_{i}"),
                to_db(*j),
                "analytic",
                &prototype,
            ));
            write!(line, " {:>9.4}", to_db(*j))?;
        }
        table.push(row2(
            &label,
            subset.len(),
            EXP2_DELAY,
            "J",
            to_db(total),
            "analytic",
            &prototype,
        ));
        table.push(row2(
            &label,
            subset.len(),
            EXP2_DELAY,
            "J",
            reference,
            "reference",
            &prototype,
        ));
        writeln!(summary, "{line} {:>9.4} | {reference:>9.4}", to_db(total))?;
    }

    let k = bank.build_k(EXP2_SYNTHESIS_LEN)?;
    let cert = pr_feasibility(&k, tol)?;
    writeln!(
        summary,
        "full bank: PR feasible = {}, delay ranges {:?}",
        cert.feasible, cert.delay_ranges
    )?;
    let mut sweep = Vec::new();
    for (d, reference) in EXP2_PR_SWEEP.iter().zip(EXP2_REFERENCE_SWEEP_DB) {
        let wiener = solve(&WienerProblem::new(k.clone(), &model, *d)?, None)?
            .total_mse
            .expect("Wiener MSE");
        let pr = match pr_solution(&k, *d, 1.0, None, tol) {
            Ok(sol) => {
                let corr = correlation_bundle(
                    &model,
                    EXP2_DECIMATION,
                    EXP2_SYNTHESIS_LEN,
                    k.filter_len(),
                    &[*d],
                )?;
                Some(evaluate_mse(&k, &corr, *d, &sol.rows)?.iter().sum::<f64>())
            }
            Err(_) => None,
        };
        writeln!(
            summary,
            "d = {d:>2}: Wiener J = {:>9.4} dB, PR design {} (reference J {reference:.4} dB)",
            to_db(wiener),
            pr.map_or("rejected (delay outside range)".to_string(), |j| format!(
                "J = {:.4} dB",
                to_db(j)
            ))
        )?;
        sweep.push(vec![
            d.to_string(),
            pr.is_some().to_string(),
            num(to_db(wiener)),
            pr.map_or(String::new(), |j| num(to_db(j))),
            num(reference),
            prototype.clone(),
        ]);
    }
    let written = vec![
        write_csv(
            &dir.join("table2.csv"),
            &[
                "subset",
                "channels",
                "delay",
                "quantity",
                "value_db",
                "source",
                "prototype",
            ],
            table,
        )?,
        write_csv(
            &dir.join("pr_sweep.csv"),
            &[
                "delay",
                "pr_admissible",
                "wiener_total_db",
                "pr_total_db",
                "reference_total_db",
                "prototype",
            ],
            sweep,
        )?,
        write_text(&dir.join("certificate.toml"), &cert.to_toml())?,
    ];
    finish(dir, &summary, written)
}

fn row2(
    label: &str,
    l: usize,
    d: usize,
    q: &str,
    v: f64,
    source: &str,
    prototype: &str,
) -> Vec<String> {
    vec![
        label.into(),
        l.to_string(),
        d.to_string(),
        q.into(),
        num(v),
        source.into(),
        prototype.into(),
    ]
}

fn experiment3(args: &ReproduceArgs, dir: &Path) -> Result<()> {
    let tol = args.tol.unwrap_or(DEFAULT_TOLERANCE);
    let samples = args.samples.unwrap_or(EXP3_INPUT_LEN);
    let bank = exp3_blocked();
    let k = bank.build_k(EXP3_SYNTHESIS_LEN)?;
    let cert = certify(&k, Some(EXP3_DELAY), 1.0, tol)?;
    let sol = pr_solution(&k, EXP3_DELAY, 1.0, None, tol)?;
    let u = modulated_noise(samples, &mut realization_rng(args.seed, 0));
    let run = run_pipeline(&bank, &sol, &u)?;

    let mut summary = String::new();
    writeln!(summary, "experiment 3: non-uniform bank M_i = {EXP3_DECIMATIONS:?}, blocked to M = 6 with {} channels", bank.len())?;
    writeln!(
        summary,
        "config: P = {EXP3_SYNTHESIS_LEN}, d = {EXP3_DELAY}, w = 0, c = 1, input randn(n) sin(0.1 n^2), {samples} samples, seed {}",
        args.seed
    )?;
    summary.push_str(&cert.summary());
    writeln!(summary, "end-to-end delay: {} samples", run.overall_delay())?;
    writeln!(
        summary,
        "max |e(n)|: {:.3e} after the {}-sample transient, {:.3e} overall",
        run.max_error(false),
        run.transient_samples(),
        run.max_error(true)
    )?;
    let csv_path = dir.join("error.csv");
    let out = if args.include_transient {
        run
    } else {
        let skip = run.transient_samples();
        let mut trimmed = run.clone();
        trimmed.reconstructed.drain(..skip);
        trimmed.error.drain(..skip);
        writeln!(
            summary,
            "error.csv starts after the transient (use --include-transient for all samples)"
        )?;
        trimmed
    };
    out.write_csv(File::create(&csv_path)?)?;
    let written = vec![
        csv_path,
        write_text(&dir.join("certificate.toml"), &cert.to_toml())?,
    ];
    finish(dir, &summary, written)
}
