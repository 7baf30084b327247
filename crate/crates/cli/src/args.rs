//! Command-line arguments and `key = value` config files.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use radial_hmhf::stepper::Scheme;
use radial_hmhf::verify::Suite;

pub const CACHE_ENV: &str = "HMHF_REF_CACHE";

#[derive(Debug, Parser)]
#[command(name = "hmhf", version, about = "Radially symmetric harmonic map heat flow solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one evolution and write solution profiles.
    Run(RunArgs),
    /// Temporal or spatial convergence study against a reference solution.
    Convergence(ConvergenceArgs),
    /// Run the stability check suite.
    Verify(VerifyArgs),
    /// Record a scalar trace (energy, weighted norm, blow-up indicator).
    Trace(TraceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IcArg {
    Smooth,
    Blowup,
    Zero,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Euler,
    Bdf2,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Euler => Scheme::EulerSi,
            SchemeArg::Bdf2 => Scheme::Bdf2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Time,
    Space,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Energy,
    Weighted,
    Blowup,
    Solution,
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to the subcommand defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Interior grid nodes; repeat for a spatial ladder.
    #[arg(long = "N", value_name = "N")]
    pub n: Vec<usize>,
    /// Time step; repeat for a temporal ladder.
    #[arg(long)]
    pub dt: Vec<f64>,
    /// Final time.
    #[arg(long = "T", value_name = "T")]
    pub final_time: Option<f64>,
    #[arg(long, value_enum)]
    pub ic: Option<IcArg>,
    /// Amplitude A of `--ic custom`, u0 = A (1 - x) x.
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reference cache directory (default from HMHF_REF_CACHE).
    #[arg(long)]
    pub ref_cache: Option<PathBuf>,
    /// Worker threads for independent study rows.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
    /// Record every k-th step.
    #[arg(long)]
    pub stride: Option<usize>,
    /// `key = value` file mirroring the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Interior nodes of the reference grid.
    #[arg(long = "ref-N", value_name = "N")]
    pub ref_n: Option<usize>,
    /// Time step of the reference run.
    #[arg(long)]
    pub ref_dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// all, resolvent, mproperty, symbol, fbound, lipschitz or dcspd.
    #[arg(long, value_parser = parse_suite)]
    pub suite: Option<Suite>,
    /// Resolvent shift for `--suite resolvent`.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Weight exponent for `--suite symbol` and `--suite fbound`.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Weight exponent of the weighted kind; defaults to sqrt(2/pi).
    #[arg(long)]
    pub alpha: Option<f64>,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: radial_hmhf::Error| e.to_string())
}

/// Parsed `key = value` pairs; `#` starts a comment.
#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: HashMap<String, String>,
    path: PathBuf,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self, String> {
        let mut entries = HashMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| format!("{}:{}: expected `key = value`", path.display(), k + 1))?;
            entries.insert(key.trim().trim_start_matches("--").to_string(), value.trim().to_string());
        }
        Ok(Self { entries, path: path.to_path_buf() })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text, path)
    }

    /// Errors on keys not in `known`.
    pub fn check_keys(&self, known: &[&str]) -> Result<(), String> {
        let mut unknown: Vec<&str> = self.entries.keys().map(String::as_str).filter(|k| !known.contains(k)).collect();
        unknown.sort_unstable();
        match unknown.first() {
            None => Ok(()),
            Some(k) => Err(format!("{}: unknown key '{k}'", self.path.display())),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Fills `slot` from the file when the flag was not given.
    pub fn fill<T: FromStr>(&self, slot: &mut Option<T>, key: &str) -> Result<(), String> {
        if slot.is_none() {
            if let Some(v) = self.raw(key) {
                *slot = Some(v.parse().map_err(|_| format!("{}: bad value '{v}' for {key}", self.path.display()))?);
            }
        }
        Ok(())
    }

    /// Like [`fill`](Self::fill) for `ValueEnum` types.
    pub fn fill_enum<T: ValueEnum>(&self, slot: &mut Option<T>, key: &str) -> Result<(), String> {
        if slot.is_none() {
            if let Some(v) = self.raw(key) {
                *slot = Some(
                    T::from_str(v, false).map_err(|_| format!("{}: bad value '{v}' for {key}", self.path.display()))?,
                );
            }
        }
        Ok(())
    }

    /// Comma- or whitespace-separated list for repeatable flags.
    pub fn fill_list<T: FromStr>(&self, slot: &mut Vec<T>, key: &str) -> Result<(), String> {
        if slot.is_empty() {
            if let Some(v) = self.raw(key) {
                for item in v.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()) {
                    slot.push(
                        item.parse().map_err(|_| format!("{}: bad value '{item}' for {key}", self.path.display()))?,
                    );
                }
            }
        }
        Ok(())
    }

    pub fn flag(&self, key: &str) -> Result<bool, String> {
        match self.raw(key) {
            None => Ok(false),
            Some(v) => v.parse().map_err(|_| format!("{}: bad value '{v}' for {key}", self.path.display())),
        }
    }
}

pub const COMMON_KEYS: [&str; 12] =
    ["N", "dt", "T", "ic", "amplitude", "scheme", "out", "ref-cache", "jobs", "seed", "force", "stride"];

impl Common {
    /// Loads `--config` (if any), fills unset flags from it and returns it
    /// for subcommand-specific keys. The cache directory falls back to
    /// the environment.
    pub fn resolve(&mut self, extra_keys: &[&str]) -> Result<ConfigFile, String> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let known: Vec<&str> = COMMON_KEYS.iter().chain(extra_keys).copied().collect();
        file.check_keys(&known)?;
        file.fill_list(&mut self.n, "N")?;
        file.fill_list(&mut self.dt, "dt")?;
        file.fill(&mut self.final_time, "T")?;
        file.fill_enum(&mut self.ic, "ic")?;
        file.fill(&mut self.amplitude, "amplitude")?;
        file.fill_enum(&mut self.scheme, "scheme")?;
        file.fill(&mut self.out, "out")?;
        file.fill(&mut self.ref_cache, "ref-cache")?;
        file.fill(&mut self.jobs, "jobs")?;
        file.fill(&mut self.seed, "seed")?;
        file.fill(&mut self.stride, "stride")?;
        self.force |= file.flag("force")?;
        if self.ref_cache.is_none() {
            self.ref_cache = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        }
        Ok(file)
    }

    pub fn single_n(&self, default: usize) -> Result<usize, String> {
        match self.n.as_slice() {
            [] => Ok(default),
            [n] => Ok(*n),
            _ => Err("--N given more than once".into()),
        }
    }

    pub fn single_dt(&self, default: f64) -> Result<f64, String> {
        match self.dt.as_slice() {
            [] => Ok(default),
            [dt] => Ok(*dt),
            _ => Err("--dt given more than once".into()),
        }
    }
}
