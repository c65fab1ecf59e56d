use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use wiener_fb::bank::{read_taps_csv, Bank, BankKind};
use wiener_fb::stochastic::SignalModel;
use wiener_fb::Vector;

use crate::ProblemArgs;

/// Contents of a `--config` file. Relative paths resolve against the
/// file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    bank: Option<PathBuf>,
    decimation: Option<usize>,
    model: Option<String>,
    length: Option<usize>,
    delay: Option<usize>,
    delays: Option<String>,
    w: Option<String>,
    tol: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    include_transient: Option<bool>,
    runs: Option<usize>,
    samples: Option<usize>,
}

/// Fully merged settings for one command.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub bank: Option<PathBuf>,
    pub decimation: Option<usize>,
    pub model: Option<String>,
    pub length: Option<usize>,
    pub delay: Option<usize>,
    pub delays: Option<String>,
    pub w: Option<String>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub include_transient: bool,
    pub runs: Option<usize>,
    pub samples: Option<usize>,
}

impl Settings {
    pub fn resolve(args: &ProblemArgs) -> Result<Self> {
        let mut s = match &args.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => { $( if args.$f.is_some() { s.$f = args.$f.clone(); } )* };
        }
        take!(bank, decimation, model, length, delay, delays, w, tol, seed, out);
        s.include_transient |= args.include_transient;
        Ok(s)
    }

    fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: ConfigFile =
            toml::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rel = |p: Option<PathBuf>| p.map(|p| base.join(p));
        let model = file.model.map(|m| match m.strip_prefix("samples:") {
            Some(f) => format!("samples:{}", base.join(f).display()),
            None => m,
        });
        Ok(Self {
            bank: rel(file.bank),
            decimation: file.decimation,
            model,
            length: file.length,
            delay: file.delay,
            delays: file.delays,
            w: file.w,
            tol: file.tol,
            seed: file.seed,
            out: rel(file.out),
            include_transient: file.include_transient.unwrap_or(false),
            runs: file.runs,
            samples: file.samples,
        })
    }

    pub fn length(&self) -> Result<usize> {
        self.length
            .ok_or_else(|| anyhow!("synthesis length missing (--length P)"))
    }

    pub fn delay(&self) -> Result<usize> {
        self.delay
            .ok_or_else(|| anyhow!("delay missing (--delay d)"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(wiener_fb::pr::DEFAULT_TOLERANCE)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn model(&self) -> Result<SignalModel> {
        parse_model(
            self.model
                .as_deref()
                .ok_or_else(|| anyhow!("signal model missing (--model)"))?,
        )
    }

    /// Loads the bank; non-uniform banks are blocked into uniform ones.
    pub fn bank(&self) -> Result<LoadedBank> {
        let path = self
            .bank
            .as_ref()
            .ok_or_else(|| anyhow!("analysis bank missing (--bank)"))?;
        let original = if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        {
            let m = self
                .decimation
                .ok_or_else(|| anyhow!("CSV banks need --decimation"))?;
            Bank::from_csv(path, m)?
        } else {
            Bank::from_file(path)?
        };
        let blocked = original.kind() == BankKind::NonUniform;
        let bank = if blocked {
            original.nufb_to_ufb()
        } else {
            original
        };
        Ok(LoadedBank {
            source: path.display().to_string(),
            bank,
            blocked,
        })
    }
}

pub struct LoadedBank {
    pub source: String,
    pub bank: Bank,
    /// Set when the file described a non-uniform bank.
    pub blocked: bool,
}

impl LoadedBank {
    pub fn describe(&self) -> String {
        let m = self.bank.decimation().expect("uniform");
        let note = if self.blocked {
            " (non-uniform bank, blocked)"
        } else {
            ""
        };
        format!(
            "{}: L = {}, M = {m}, Q = {}{note}",
            self.source,
            self.bank.len(),
            self.bank.filter_len()
        )
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("`{t}` is not a number"))
        })
        .collect()
}

pub fn parse_model(spec: &str) -> Result<SignalModel> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let model = match kind {
        "white" if rest.is_empty() => SignalModel::white(1.0),
        "white" => SignalModel::white(rest.parse().with_context(|| format!("bad variance `{rest}`"))?),
        "ar" => SignalModel::ar_unit_variance(parse_list(rest)?)?,
        "ar-noise" => {
            let (var, coefs) = rest
                .split_once(':')
                .ok_or_else(|| anyhow!("expected `ar-noise:<variance>:<a1>,<a2>,...`"))?;
            SignalModel::ar(parse_list(coefs)?, var.parse().with_context(|| format!("bad variance `{var}`"))?)?
        }
        "acf" => SignalModel::explicit(parse_list(rest)?)?,
        "samples" => {
            let rows = read_taps_csv(Path::new(rest))?;
            SignalModel::empirical(rows.into_iter().flatten().collect())?
        }
        _ => bail!("unknown model `{spec}`; use white[:var], ar:..., ar-noise:var:..., acf:..., samples:file"),
    };
    Ok(model)
}

pub fn parse_delays(spec: &str) -> Result<Vec<usize>> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .with_context(|| format!("bad delay `{t}`"))
    };
    let delays: Vec<usize> = if let Some((a, b)) = spec.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = spec.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        spec.split(',').map(num).collect::<Result<_>>()?
    };
    if delays.is_empty() {
        bail!("delay range `{spec}` is empty");
    }
    Ok(delays)
}

/// Resolves `--w` to a vector of length `lp` and a description for reports.
pub fn free_vector(spec: Option<&str>, lp: usize, seed: u64) -> Result<(Option<Vector>, String)> {
    match spec.unwrap_or("zero") {
        "zero" => Ok((None, "zero".into())),
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = Vector::from_fn(lp, |_, _| rng.random_range(-1.0..1.0));
            Ok((Some(w), format!("random (uniform [-1, 1), seed {seed})")))
        }
        path => {
            let values: Vec<f64> = read_taps_csv(Path::new(path))?
                .into_iter()
                .flatten()
                .collect();
            if values.len() != lp {
                bail!("{path}: w needs LP = {lp} values, found {}", values.len());
            }
            Ok((Some(Vector::from_vec(values)), format!("file {path}")))
        }
    }
}
