//! Flags, config files and their resolution into one experiment config.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use prodsv::ensemble::{DimensionProfile, EntryLaw};
use prodsv::experiment::Truncation;
use prodsv::limitlaw::density::{DEFAULT_GRID_POINTS, DEFAULT_V_MIN};
use prodsv::limitlaw::Variant;

/// Bad flags, bad config file, or an inconsistent combination. Exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn config_err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "prodsv", version, about = "Singular value spectra of products of rectangular random matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Moments,
    Limit,
    Simulate,
    Convergence,
    Residual,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact limit moments M_0..M_K
    Moments(Flags),
    /// Density, CDF and support edges of the limit law
    Limit(Flags),
    /// Monte Carlo run at one size
    Simulate(Flags),
    /// Kolmogorov distance over a list of sizes
    Convergence(Flags),
    /// Residual of the limit equation at the empirical transform
    Residual(Flags),
}

impl Command {
    pub fn split(self) -> (CommandKind, Flags) {
        match self {
            Command::Moments(f) => (CommandKind::Moments, f),
            Command::Limit(f) => (CommandKind::Limit, f),
            Command::Simulate(f) => (CommandKind::Simulate, f),
            Command::Convergence(f) => (CommandKind::Convergence, f),
            Command::Residual(f) => (CommandKind::Residual, f),
        }
    }
}

/// Every flag is optional; a config file fills the gaps.
#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Flags {
    /// Number of factors
    #[arg(long)]
    pub m: Option<usize>,
    /// Row count of the product
    #[arg(long)]
    pub n: Option<usize>,
    /// Aspect ratios y_1..y_m, comma separated (decimals or fractions)
    #[arg(long)]
    pub y: Option<String>,
    /// Explicit sizes p_0..p_m, comma separated; overrides --y and --n
    #[arg(long)]
    pub p: Option<String>,
    /// Entry law: gaussian, cgaussian, rademacher, threepoint[:a]
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Highest moment order
    #[arg(long)]
    pub k: Option<usize>,
    /// squares or symmetrized
    #[arg(long)]
    pub variant: Option<String>,
    /// Inversion height for the density
    #[arg(long)]
    pub vmin: Option<f64>,
    /// Uniform points in the x-grid (edge clusters are added)
    #[arg(long)]
    pub grid: Option<usize>,
    /// off, auto, or c:tau
    #[arg(long)]
    pub truncate: Option<String>,
    /// Directory for CSV and JSON files
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with the same keys as the flags
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Sizes for the convergence command, comma separated
    #[arg(long = "n-list")]
    pub n_list: Option<String>,
}

impl Flags {
    /// Fills unset flags from `file`.
    fn or(self, file: Flags) -> Flags {
        Flags {
            m: self.m.or(file.m),
            n: self.n.or(file.n),
            y: self.y.or(file.y),
            p: self.p.or(file.p),
            dist: self.dist.or(file.dist),
            seed: self.seed.or(file.seed),
            trials: self.trials.or(file.trials),
            k: self.k.or(file.k),
            variant: self.variant.or(file.variant),
            vmin: self.vmin.or(file.vmin),
            grid: self.grid.or(file.grid),
            truncate: self.truncate.or(file.truncate),
            out: self.out.or(file.out),
            config: self.config,
            threads: self.threads.or(file.threads),
            n_list: self.n_list.or(file.n_list),
        }
    }
}

pub fn read_config_file(path: &Path) -> Result<Flags, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config file {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("bad config file {}: {e}", path.display())))
}

/// Fully resolved settings, echoed into every JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub m: usize,
    /// Ratios as given (`--y`) or implied by `--p`, as text.
    pub y: Vec<String>,
    /// Sizes `p_0..p_m`; absent for commands that need no matrices.
    pub p: Option<Vec<usize>>,
    pub dist: EntryLaw,
    pub seed: u64,
    pub trials: usize,
    pub k: usize,
    pub variant: Variant,
    pub vmin: f64,
    pub grid: usize,
    pub truncate: Truncation,
    pub n_list: Vec<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub threads: Option<usize>,
}

fn split_list(text: &str) -> impl Iterator<Item = &str> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_sizes(text: &str, what: &str) -> Result<Vec<usize>, ConfigError> {
    split_list(text)
        .map(|s| s.parse::<usize>().map_err(|_| config_err(format!("{what}: '{s}' is not a positive integer"))))
        .collect()
}

fn parse_dist(text: &str) -> Result<EntryLaw, ConfigError> {
    let law = match text.trim() {
        "gaussian" => EntryLaw::RealGaussian,
        "cgaussian" => EntryLaw::ComplexGaussian,
        "rademacher" => EntryLaw::Rademacher,
        "threepoint" => EntryLaw::three_point(),
        other => match other.strip_prefix("threepoint:") {
            Some(a) => EntryLaw::ThreePointHeavy {
                a: a.parse().map_err(|_| config_err(format!("dist: bad three-point parameter '{a}'")))?,
            },
            None => return Err(config_err(format!("dist: unknown entry law '{other}'"))),
        },
    };
    law.validate().map_err(|e| config_err(format!("dist: {e}")))?;
    Ok(law)
}

/// Merges flags with the optional config file and checks consistency.
pub fn resolve(kind: CommandKind, flags: Flags) -> Result<ExperimentConfig, ConfigError> {
    let flags = match &flags.config {
        Some(path) => {
            let file = read_config_file(path)?;
            flags.or(file)
        }
        None => flags,
    };
    let needs_matrices = matches!(kind, CommandKind::Simulate | CommandKind::Residual);

    let p = flags.p.as_deref().map(|t| parse_sizes(t, "p")).transpose()?;
    if let Some(p) = &p {
        if p.len() < 2 {
            return Err(config_err("p: need at least two sizes p_0, p_1"));
        }
        if flags.n.is_some_and(|n| n != p[0]) {
            return Err(config_err("n disagrees with p_0"));
        }
        if kind == CommandKind::Convergence {
            return Err(config_err("convergence scales n; give ratios with --y instead of --p"));
        }
    }
    let m = match (flags.m, &p, &flags.y) {
        (Some(m), _, _) => m,
        (None, Some(p), _) => p.len() - 1,
        (None, None, Some(y)) => split_list(y).count(),
        (None, None, None) => return Err(config_err("m is required (or give --y / --p)")),
    };
    if m == 0 {
        return Err(config_err("m must be at least 1"));
    }
    let y: Vec<String> = match (&p, &flags.y) {
        (Some(p), _) => (1..=m).map(|l| format!("{}/{}", p[0], p[l])).collect(),
        (None, Some(text)) => split_list(text).map(str::to_string).collect(),
        (None, None) => vec!["1".to_string(); m],
    };
    if y.len() != m {
        return Err(config_err(format!("expected {m} ratios, got {}", y.len())));
    }
    if p.as_ref().is_some_and(|p| p.len() != m + 1) {
        return Err(config_err(format!("expected {} sizes for m = {m}", m + 1)));
    }
    for text in &y {
        let v = prodsv::moments::parse_rational(text).map_err(|e| config_err(format!("y: {e}")))?;
        let f = prodsv::moments::rational_to_f64(&v);
        if !(f > 0.0 && f <= 1.0) {
            return Err(config_err(format!("y: ratio {text} is outside (0, 1]")));
        }
    }

    let sizes = match (&p, flags.n) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(n)) => {
            let ratios: Vec<f64> = y
                .iter()
                .map(|t| prodsv::moments::rational_to_f64(&prodsv::moments::parse_rational(t).expect("checked")))
                .collect();
            let profile = DimensionProfile::from_ratios(n, &ratios).map_err(|e| config_err(e.to_string()))?;
            Some(profile.sizes().to_vec())
        }
        (None, None) if needs_matrices => return Err(config_err("n is required (or give --p)")),
        (None, None) => None,
    };
    if let Some(sizes) = &sizes {
        DimensionProfile::new(sizes.clone()).map_err(|e| config_err(e.to_string()))?;
    }

    let dist = parse_dist(flags.dist.as_deref().unwrap_or("gaussian"))?;
    let variant = match &flags.variant {
        Some(v) => v.parse().map_err(|e: prodsv::Error| config_err(e.to_string()))?,
        None => Variant::Squares,
    };
    let vmin = flags.vmin.unwrap_or(DEFAULT_V_MIN);
    if !(vmin > 0.0 && vmin <= 0.1) {
        return Err(config_err(format!("vmin = {vmin} must lie in (0, 0.1]")));
    }
    let grid = flags.grid.unwrap_or(DEFAULT_GRID_POINTS);
    if grid < 2 {
        return Err(config_err("grid needs at least 2 points"));
    }
    let truncate = match &flags.truncate {
        Some(t) => t.parse().map_err(|e: prodsv::Error| config_err(e.to_string()))?,
        None => Truncation::default_for(dist),
    };
    let trials = flags.trials.unwrap_or(10);
    if trials == 0 {
        return Err(config_err("trials must be at least 1"));
    }
    let n_list = match &flags.n_list {
        Some(text) => parse_sizes(text, "n-list")?,
        None if kind == CommandKind::Convergence => match flags.n {
            Some(n) => vec![n],
            None => vec![100, 200, 400, 800],
        },
        None => Vec::new(),
    };
    if kind == CommandKind::Convergence && n_list.is_empty() {
        return Err(config_err("n-list is empty"));
    }
    if n_list.contains(&0) {
        return Err(config_err("n-list entries must be positive"));
    }
    if flags.threads == Some(0) {
        return Err(config_err("threads must be at least 1"));
    }
    Ok(ExperimentConfig {
        m,
        y,
        p: sizes,
        dist,
        seed: flags.seed.unwrap_or(0),
        trials,
        k: flags.k.unwrap_or(6),
        variant,
        vmin,
        grid,
        truncate,
        n_list,
        out: flags.out,
        threads: flags.threads,
    })
}

impl ExperimentConfig {
    pub fn profile(&self) -> Result<DimensionProfile, ConfigError> {
        let p = self.p.clone().ok_or_else(|| config_err("sizes are required (--n or --p)"))?;
        DimensionProfile::new(p).map_err(|e| config_err(e.to_string()))
    }

    /// Ratios as floats.
    pub fn ratios(&self) -> Vec<f64> {
        self.y
            .iter()
            .map(|t| prodsv::moments::rational_to_f64(&prodsv::moments::parse_rational(t).expect("validated")))
            .collect()
    }

    pub fn ratios_exact(&self) -> Vec<num_rational::BigRational> {
        self.y.iter().map(|t| prodsv::moments::parse_rational(t).expect("validated")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags() -> Flags {
        Flags::default()
    }

    #[test]
    fn ratios_become_sizes() {
        let f = Flags { n: Some(800), y: Some("0.5,0.8".into()), ..flags() };
        let c = resolve(CommandKind::Simulate, f).unwrap();
        assert_eq!(c.m, 2);
        assert_eq!(c.p, Some(vec![800, 1600, 1000]));
        assert_eq!(c.truncate, Truncation::Auto { c: 1.0 });
    }

    #[test]
    fn sizes_override_ratios() {
        let f = Flags { p: Some("3,4,6".into()), y: Some("1,1".into()), ..flags() };
        let c = resolve(CommandKind::Simulate, f).unwrap();
        assert_eq!(c.y, vec!["3/4", "3/6"]);
        assert_eq!(c.ratios(), vec![0.75, 0.5]);
    }

    #[test]
    fn rejects_inconsistent_input() {
        let cases = [
            Flags { m: Some(2), y: Some("1".into()), ..flags() },
            Flags { y: Some("1.5".into()), ..flags() },
            Flags { m: Some(1), n: Some(10), dist: Some("cauchy".into()), ..flags() },
            Flags { m: Some(1), truncate: Some("sometimes".into()), ..flags() },
            Flags { m: Some(1), vmin: Some(0.5), ..flags() },
            Flags { p: Some("4,3".into()), ..flags() },
            Flags { p: Some("3,4".into()), n: Some(5), ..flags() },
        ];
        for f in cases {
            assert!(resolve(CommandKind::Limit, f.clone()).is_err(), "{f:?}");
        }
        assert!(resolve(CommandKind::Simulate, Flags { m: Some(2), ..flags() }).is_err());
        assert!(resolve(CommandKind::Limit, Flags { ..flags() }).is_err());
        assert!(resolve(CommandKind::Convergence, Flags { m: Some(1), n_list: Some(",".into()), ..flags() }).is_err());
    }

    #[test]
    fn convergence_defaults() {
        let c = resolve(CommandKind::Convergence, Flags { m: Some(2), ..flags() }).unwrap();
        assert_eq!(c.n_list, vec![100, 200, 400, 800]);
        let c = resolve(CommandKind::Convergence, Flags { m: Some(2), n: Some(50), ..flags() }).unwrap();
        assert_eq!(c.n_list, vec![50]);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "m = 2\nn = 40\ny = \"1,0.5\"\nseed = 9\ntrials = 3\nn-list = \"10,20\"\n").unwrap();
        let f = Flags { seed: Some(4), config: Some(path.clone()), ..flags() };
        let c = resolve(CommandKind::Simulate, f).unwrap();
        assert_eq!((c.seed, c.trials, c.m), (4, 3, 2));
        assert_eq!(c.p, Some(vec![40, 40, 80]));
        assert_eq!(c.n_list, vec![10, 20]);
        std::fs::write(&path, "colour = 3\n").unwrap();
        assert!(resolve(CommandKind::Simulate, Flags { config: Some(path), ..flags() }).is_err());
    }
}
