use std::fmt::Write as _;
use std::fs::File;

use anyhow::{bail, Result};
use serde::Serialize;
use wiener_fb::pr::{certify, pr_solution};
use wiener_fb::runtime::{
    empirical_mse, ensemble, modulated_noise, realization_rng, run_pipeline, PipelineRun,
};
use wiener_fb::stochastic::{
    correlation_bundle, simulate as simulate_model, ModelKind, SignalModel,
};
use wiener_fb::wiener::{
    default_delays, evaluate_mse, mse_vs_delay, solve, SynthesisSolution, WienerProblem,
};
use wiener_fb::{to_db, Matrix};

use crate::config::{free_vector, parse_delays, Settings};
use crate::output::{ensure_dir, num, report_written, write_csv, write_text};
use crate::{CheckPrArgs, DesignKind, InputKind, ProblemArgs, SimulateArgs};

const ANALYTIC: &str = "analytic: J_i = r(0) - b_i' A^+ b_i";
const EVALUATED: &str = "analytic: r(0) - 2 a_i' b_i + a_i' A a_i";
const EMPIRICAL: &str = "empirical: mean of e_i(n)^2";

#[derive(Serialize)]
struct DesignReport {
    bank: String,
    model: String,
    decimation: usize,
    channels: usize,
    synthesis_len: usize,
    filter_len: usize,
    block_len: usize,
    stacked_len: usize,
    delay: usize,
    rank: usize,
    nullspace_dim: usize,
    w: String,
    seed: u64,
    max_residual: f64,
    total_mse: f64,
    total_mse_db: f64,
}

/// `output,channel,tap_0..tap_{P-1}`, one row per (i, r) filter.
fn taps_rows(rows: &Matrix, channels: usize, p: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for i in 0..rows.nrows() {
        for r in 0..channels {
            let mut row = vec![i.to_string(), r.to_string()];
            row.extend((0..p).map(|l| num(rows[(i, r * p + l)])));
            out.push(row);
        }
    }
    out
}

fn taps_header(p: usize) -> Vec<String> {
    let mut h = vec!["output".to_string(), "channel".to_string()];
    h.extend((0..p).map(|l| format!("tap_{l}")));
    h
}

pub fn design(args: ProblemArgs) -> Result<()> {
    let s = Settings::resolve(&args)?;
    let loaded = s.bank()?;
    let p = s.length()?;
    let delay = s.delay()?;
    let model = s.model()?;
    let k = loaded.bank.build_k(p)?;
    let (w, w_desc) = free_vector(s.w.as_deref(), k.stacked_len(), s.seed())?;
    let sol = solve(&WienerProblem::new(k.clone(), &model, delay)?, w.as_ref())?;
    let mse = sol
        .channel_mse
        .clone()
        .expect("Wiener designs carry their MSE");
    let total = sol.total_mse.expect("Wiener designs carry their MSE");

    let dir = s.out_dir();
    ensure_dir(&dir)?;
    let header = taps_header(p);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let taps = write_csv(
        &dir.join("synthesis_taps.csv"),
        &header,
        taps_rows(&sol.rows, k.channels(), p),
    )?;
    let mut mse_rows: Vec<Vec<String>> = mse
        .iter()
        .enumerate()
        .map(|(i, j)| vec![i.to_string(), num(*j), num(to_db(*j)), ANALYTIC.into()])
        .collect();
    mse_rows.push(vec![
        "total".into(),
        num(total),
        num(to_db(total)),
        ANALYTIC.into(),
    ]);
    let report = write_csv(
        &dir.join("mse_report.csv"),
        &["channel", "mse", "mse_db", "formula"],
        mse_rows,
    )?;
    let meta = DesignReport {
        bank: loaded.source.clone(),
        model: s.model.clone().unwrap_or_default(),
        decimation: k.decimation(),
        channels: k.channels(),
        synthesis_len: p,
        filter_len: k.filter_len(),
        block_len: k.block_len(),
        stacked_len: k.stacked_len(),
        delay,
        rank: sol.rank,
        nullspace_dim: sol.nullspace_dim(),
        w: w_desc,
        seed: s.seed(),
        max_residual: sol.max_residual(),
        total_mse: total,
        total_mse_db: to_db(total),
    };
    let meta_path = write_text(&dir.join("solution.toml"), &toml::to_string(&meta)?)?;

    println!("{}", loaded.describe());
    println!(
        "P = {p}, d = {delay}, rank(A) = {}, null-space dimension = {}",
        sol.rank,
        sol.nullspace_dim()
    );
    for (i, j) in mse.iter().enumerate() {
        println!("J_{i} = {:>10.4} dB", to_db(*j));
    }
    println!("J   = {:>10.4} dB", to_db(total));
    report_written(&[taps, report, meta_path]);
    Ok(())
}

pub fn check_pr(args: CheckPrArgs) -> Result<()> {
    let s = Settings::resolve(&args.problem)?;
    let loaded = s.bank()?;
    let k = loaded.bank.build_k(s.length()?)?;
    let cert = certify(&k, s.delay, args.scale, s.tol())?;
    if args.toml {
        print!("{}", cert.to_toml());
    } else {
        println!("{}", loaded.describe());
        print!("{}", cert.summary());
    }
    if let Some(dir) = &s.out {
        ensure_dir(dir)?;
        let path = write_text(&dir.join("certificate.toml"), &cert.to_toml())?;
        if !args.toml {
            report_written(&[path]);
        }
    }
    Ok(())
}

pub fn mse_scan(args: ProblemArgs) -> Result<()> {
    let s = Settings::resolve(&args)?;
    let loaded = s.bank()?;
    let model = s.model()?;
    let k = loaded.bank.build_k(s.length()?)?;
    let delays = match &s.delays {
        Some(spec) => parse_delays(spec)?,
        None => default_delays(&k),
    };
    let scan = mse_vs_delay(&k, &model, &delays)?;
    let m = k.decimation();

    println!("{}", loaded.describe());
    let mut line = format!("{:>5}", "d");
    for i in 0..m {
        write!(line, " {:>11}", format!("J_{i} (dB)"))?;
    }
    write!(line, " {:>11}", "J (dB)")?;
    println!("{line}");
    for e in &scan.entries {
        let mut line = format!("{:>5}", e.delay);
        for j in &e.channel_mse {
            write!(line, " {:>11.4}", to_db(*j))?;
        }
        write!(line, " {:>11.4}", to_db(e.total))?;
        if e.delay == scan.best_delay {
            line.push_str("  <- best");
        }
        println!("{line}");
    }

    if let Some(dir) = &s.out {
        ensure_dir(dir)?;
        let mut header = vec!["delay".to_string()];
        header.extend((0..m).map(|i| format!("J_{i}_db")));
        header.push("total_db".into());
        header.push("formula".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = scan.entries.iter().map(|e| {
            let mut row = vec![e.delay.to_string()];
            row.extend(e.channel_mse.iter().map(|j| num(to_db(*j))));
            row.push(num(to_db(e.total)));
            row.push(ANALYTIC.into());
            row
        });
        let path = write_csv(&dir.join("mse_scan.csv"), &header, rows)?;
        report_written(&[path]);
    }
    Ok(())
}

fn analytic_mse(
    s: &Settings,
    sol: &SynthesisSolution,
    k: &wiener_fb::bank::KMatrix,
) -> Result<Option<Vec<f64>>> {
    if let Some(mse) = &sol.channel_mse {
        return Ok(Some(mse.clone()));
    }
    let Some(_) = &s.model else { return Ok(None) };
    let model = s.model()?;
    let corr = correlation_bundle(
        &model,
        k.decimation(),
        k.synthesis_len(),
        k.filter_len(),
        &[sol.delay],
    )?;
    Ok(Some(evaluate_mse(k, &corr, sol.delay, &sol.rows)?))
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let mut s = Settings::resolve(&args.problem)?;
    if args.samples.is_some() {
        s.samples = args.samples;
    }
    if args.runs.is_some() {
        s.runs = args.runs;
    }
    let loaded = s.bank()?;
    let p = s.length()?;
    let delay = s.delay()?;
    let k = loaded.bank.build_k(p)?;
    let (w, w_desc) = free_vector(s.w.as_deref(), k.stacked_len(), s.seed())?;
    let sol = match args.design {
        DesignKind::Wiener => solve(
            &WienerProblem::new(k.clone(), &s.model()?, delay)?,
            w.as_ref(),
        )?,
        DesignKind::Pr => pr_solution(&k, delay, args.scale, w.as_ref(), s.tol())?,
    };
    let samples = s.samples.unwrap_or(4000);
    let runs = s.runs.unwrap_or(1).max(1);
    let seed = s.seed();
    let model: Option<SignalModel> = match args.input {
        InputKind::Model => {
            let m = s.model()?;
            if !matches!(m.kind(), ModelKind::Ar { .. }) {
                bail!("--input model needs an AR or white model; use --input modulated otherwise");
            }
            Some(m)
        }
        InputKind::Modulated => None,
    };
    let draw = |index: u64| -> Result<Vec<f64>> {
        let mut rng = realization_rng(seed, index);
        Ok(match &model {
            Some(m) => simulate_model(m, samples, &mut rng)?,
            None => modulated_noise(samples, &mut rng),
        })
    };

    let first: PipelineRun = run_pipeline(&loaded.bank, &sol, &draw(0)?)?;
    let (channel, squared) = match &model {
        Some(m) if runs > 1 => {
            let ens = ensemble(
                &loaded.bank,
                &sol,
                m,
                runs,
                samples,
                seed,
                s.include_transient,
            )?;
            (ens.mse.channel, Some(ens.squared_error))
        }
        _ if runs > 1 => {
            let mut acc = vec![vec![0.0; first.blocks()]; k.decimation()];
            for index in 0..runs as u64 {
                let run = if index == 0 {
                    first.clone()
                } else {
                    run_pipeline(&loaded.bank, &sol, &draw(index)?)?
                };
                for (a, e) in acc.iter_mut().zip(run.channel_errors()) {
                    a.iter_mut()
                        .zip(e)
                        .for_each(|(a, e)| *a += e * e / runs as f64);
                }
            }
            let start = if s.include_transient {
                0
            } else {
                first.transient_blocks.min(first.blocks())
            };
            if start >= first.blocks() {
                bail!("no samples left after the transient; increase --samples");
            }
            let channel = acc
                .iter()
                .map(|a| a[start..].iter().sum::<f64>() / (a.len() - start) as f64)
                .collect();
            (channel, Some(acc))
        }
        _ => (empirical_mse(&first, s.include_transient)?.channel, None),
    };
    let analytic = analytic_mse(&s, &sol, &k)?;

    let dir = s.out_dir();
    ensure_dir(&dir)?;
    let mut written = Vec::new();
    let run_path = dir.join("run.csv");
    first.write_csv(File::create(&run_path)?)?;
    written.push(run_path);
    if let Some(sq) = &squared {
        let mut header = vec!["n".to_string()];
        header.extend((0..sq.len()).map(|i| format!("e{i}_sq")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = (0..sq[0].len()).map(|n| {
            let mut row = vec![n.to_string()];
            row.extend(sq.iter().map(|c| num(c[n])));
            row
        });
        written.push(write_csv(&dir.join("ensemble.csv"), &header, rows)?);
    }

    let mut summary = String::new();
    writeln!(summary, "bank        : {}", loaded.describe())?;
    writeln!(
        summary,
        "design      : {} (P = {p}, d = {delay}, w = {w_desc})",
        match args.design {
            DesignKind::Wiener => "wiener",
            DesignKind::Pr => "perfect reconstruction",
        }
    )?;
    writeln!(
        summary,
        "input       : {} x {samples} samples, seed {seed}",
        runs
    )?;
    writeln!(
        summary,
        "transient   : {} blocks {}",
        first.transient_blocks,
        if s.include_transient {
            "included"
        } else {
            "excluded"
        }
    )?;
    writeln!(
        summary,
        "max |e(n)|  : {:.3e} (after transient), {:.3e} (all)",
        first.max_error(false),
        first.max_error(true)
    )?;
    for (i, e) in channel.iter().enumerate() {
        let a = analytic
            .as_ref()
            .map_or(String::from("n/a"), |a| format!("{:.4} dB", to_db(a[i])));
        writeln!(
            summary,
            "J_{i}         : {:.4} dB ({EMPIRICAL}), {a} (analytic)",
            to_db(*e)
        )?;
    }
    if analytic.is_some() && sol.channel_mse.is_none() {
        writeln!(summary, "analytic    : {EVALUATED}")?;
    }
    print!("{summary}");
    written.push(write_text(&dir.join("summary.txt"), &summary)?);
    report_written(&written);
    Ok(())
}
