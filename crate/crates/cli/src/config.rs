use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use skewcorr::correlations::{EnsembleSpec, NormalizationMode};
use skewcorr::kernels::KernelOptions;
use skewcorr::measures::Measure;
use skewcorr::montecarlo::{Binning, WalkerConfig};
use skewcorr::skewproduct::SkewKernel;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Command {
    Density,
    Correlate,
    Skewpoly,
    Verify,
    Mc,
    EmCheck,
    Walkers,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Correlate => "correlate",
            Command::Skewpoly => "skewpoly",
            Command::Verify => "verify",
            Command::Mc => "mc",
            Command::EmCheck => "em-check",
            Command::Walkers => "walkers",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Family {
    #[default]
    Hermite,
    Gaussian,
    Laguerre,
    Jacobi,
    SymHahn,
    DiscreteChebyshev,
    DiscreteExp,
}

/// Which skew kernel couples the eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Case {
    /// Orthogonal-type ensembles.
    #[default]
    Sign,
    /// Symplectic-type ensembles; `n` counts eigenvalues.
    Derivative,
    DiscreteExp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Chain {
    #[default]
    Single,
    Dyson,
    Separable,
    Walkers,
}

/// Reference measure for reported densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Wrt {
    /// Densities with respect to Lebesgue (or counting) measure.
    #[default]
    Dx,
    /// Densities with respect to the slice measure.
    Mu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub family: Family,
    pub case: Case,
    pub n: usize,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub l: Option<u32>,
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub variance: Option<f64>,
    pub chain: Chain,
    /// Dyson times, separable steps or walker times, depending on `chain`.
    pub times: Vec<f64>,
    pub horizon: Option<f64>,
    pub jmax: Option<usize>,
    pub mode: NormalizationMode,
    pub wrt: Wrt,
    pub gauge: Vec<f64>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            family: Family::Hermite,
            case: Case::Sign,
            n: 2,
            a: None,
            b: None,
            l: None,
            q: None,
            alpha: None,
            variance: None,
            chain: Chain::Single,
            times: Vec::new(),
            horizon: None,
            jmax: None,
            mode: NormalizationMode::Rho,
            wrt: Wrt::Dx,
            gauge: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub slice: usize,
    /// Explicit points; takes precedence over `lo`, `hi`, `points`.
    pub xs: Vec<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub count: usize,
    /// Euler step for Dyson paths.
    pub step: f64,
    /// Slice compared for multi-slice chains; defaults to the last.
    pub slice: Option<usize>,
    pub binning: Binning,
}

impl Default for McSection {
    fn default() -> Self {
        Self { count: 100_000, step: 0.002, slice: None, binning: Binning::FreedmanDiaconis }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkersSection {
    pub n: usize,
    pub horizon: usize,
    pub starts: Option<Vec<i64>>,
    pub scaling: f64,
    pub count: usize,
}

impl Default for WalkersSection {
    fn default() -> Self {
        Self { n: 2, horizon: 6, starts: None, scaling: 1.0, count: 100_000 }
    }
}

impl WalkersSection {
    pub fn config(&self) -> Result<WalkerConfig, CliError> {
        let cfg = WalkerConfig::new(self.n, self.horizon, vec![self.horizon], self.scaling)?;
        Ok(match &self.starts {
            Some(s) => cfg.with_starts(s.clone())?,
            None => cfg,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Destination file; standard output when absent.
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub residual: f64,
    pub table: f64,
    pub sum_rule: f64,
    pub gauge: f64,
    pub pfaffian: f64,
    pub em: f64,
    pub zscore: f64,
    pub pass_fraction: f64,
    pub tv_sigmas: f64,
    pub enumeration: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-8,
            table: 1e-8,
            sum_rule: 1e-6,
            gauge: 1e-9,
            pfaffian: 1e-10,
            em: 1e-8,
            zscore: 4.0,
            pass_fraction: 0.95,
            tv_sigmas: 3.0,
            enumeration: 1e-12,
        }
    }
}

/// Everything one run needs, read from a TOML file and patched by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub ensemble: EnsembleSection,
    pub grid: GridSection,
    /// Point tuples for `correlate` and `em-check`, as `[slice, x]` pairs.
    pub points: Vec<Vec<(usize, f64)>>,
    pub mc: McSection,
    pub walkers: WalkersSection,
    pub output: OutputSection,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 1,
            threads: None,
            ensemble: EnsembleSection::default(),
            grid: GridSection::default(),
            points: Vec::new(),
            mc: McSection::default(),
            walkers: WalkersSection::default(),
            output: OutputSection::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    /// Rejects inconsistent settings before any numerical work.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.command.is_none() {
            return Err(CliError::Config("no command given".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be positive".into()));
        }
        if self.ensemble.n == 0 {
            return Err(CliError::Config("ensemble.n must be positive".into()));
        }
        if let (Some(lo), Some(hi)) = (self.grid.lo, self.grid.hi) {
            if hi < lo || hi.is_nan() || lo.is_nan() {
                return Err(CliError::Config(format!("grid.hi = {hi} below grid.lo = {lo}")));
            }
        }
        if self.mc.count < 2 || self.mc.step.is_nan() || self.mc.step <= 0.0 {
            return Err(CliError::Config("mc.count must be at least 2 and mc.step positive".into()));
        }
        Ok(())
    }

    pub fn measure(&self) -> Result<Measure, CliError> {
        let e = &self.ensemble;
        let missing = |key: &str| CliError::Config(format!("ensemble.{key} is required for {:?}", e.family));
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| missing(key));
        let m = match e.family {
            Family::Hermite => Measure::Hermite,
            Family::Gaussian => Measure::Gaussian { variance: e.variance.unwrap_or(1.0) },
            Family::Laguerre => Measure::Laguerre { a: need(e.a, "a")? },
            Family::Jacobi => Measure::Jacobi { a: need(e.a, "a")?, b: need(e.b, "b")? },
            Family::SymHahn => Measure::SymHahn { l: e.l.ok_or_else(|| missing("l"))? },
            Family::DiscreteChebyshev => Measure::DiscreteChebyshev { l: e.l.ok_or_else(|| missing("l"))? },
            Family::DiscreteExp => Measure::DiscreteExp { q: need(e.q, "q")? },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn kernel(&self) -> Result<SkewKernel, CliError> {
        Ok(match self.ensemble.case {
            Case::Sign => SkewKernel::SignType,
            Case::Derivative => SkewKernel::DerivativeType,
            Case::DiscreteExp => SkewKernel::DiscreteExpType {
                alpha: self
                    .ensemble
                    .alpha
                    .ok_or_else(|| CliError::Config("ensemble.alpha is required for case discrete_exp".into()))?,
            },
        })
    }

    /// Pfaffian size: twice the eigenvalue count in the derivative case.
    pub fn pfaffian_size(&self) -> usize {
        match self.ensemble.case {
            Case::Derivative => 2 * self.ensemble.n,
            _ => self.ensemble.n,
        }
    }

    pub fn spec(&self) -> Result<EnsembleSpec, CliError> {
        let e = &self.ensemble;
        let measure = self.measure()?;
        let kernel = self.kernel()?;
        let only_hermite_sign = |what: &str| {
            if e.family != Family::Hermite || e.case != Case::Sign {
                Err(CliError::Config(format!("chain {what} needs family hermite with case sign")))
            } else {
                Ok(())
            }
        };
        let spec = match e.chain {
            Chain::Single => match e.case {
                Case::Derivative => EnsembleSpec::symplectic(measure, e.n)?,
                _ => EnsembleSpec::new(skewcorr::kernels::SliceChain::single(measure, kernel)?, e.n),
            },
            Chain::Dyson => {
                only_hermite_sign("dyson")?;
                EnsembleSpec::dyson(e.n, &e.times)?
            }
            Chain::Separable => EnsembleSpec::separable(measure, kernel, self.pfaffian_size(), &e.times)?,
            Chain::Walkers => {
                only_hermite_sign("walkers")?;
                let horizon = e
                    .horizon
                    .ok_or_else(|| CliError::Config("ensemble.horizon is required for chain walkers".into()))?;
                EnsembleSpec::walkers(e.n, &e.times, horizon)?.0
            }
        };
        let spec = spec.with_mode(e.mode).with_options(KernelOptions { gauge: e.gauge.clone(), ..Default::default() });
        Ok(match e.jmax {
            Some(j) => spec.with_jmax(j),
            None => spec,
        })
    }

    /// Evaluation grid for `density`.
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let g = &self.grid;
        if !g.xs.is_empty() {
            return Ok(g.xs.clone());
        }
        let (lo, hi) = match (g.lo, g.hi) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => return Err(CliError::Config("grid needs xs or both lo and hi".into())),
        };
        let points = g.points.unwrap_or(41);
        Ok(match points {
            0 => Vec::new(),
            1 => vec![lo],
            p => (0..p).map(|i| lo + (hi - lo) * i as f64 / (p - 1) as f64).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_sections() {
        let c = RunConfig::parse("command = \"density\"\n[grid]\nxs = [0.0]\n").unwrap();
        assert_eq!(c.command, Some(Command::Density));
        assert_eq!(c.ensemble.n, 2);
        assert_eq!(c.tolerances.zscore, 4.0);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::parse("comand = \"density\""), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::parse("[ensemble]\nfamly = \"hermite\""), Err(CliError::Config(_))));
    }

    #[test]
    fn point_tuples_parse() {
        let c = RunConfig::parse("points = [[[0, -0.5], [0, 0.5]], []]").unwrap();
        assert_eq!(c.points, vec![vec![(0, -0.5), (0, 0.5)], vec![]]);
    }

    #[test]
    fn measure_parameters_are_required() {
        let c = RunConfig::parse("[ensemble]\nfamily = \"laguerre\"").unwrap();
        assert!(matches!(c.measure(), Err(CliError::Config(_))));
        let c = RunConfig::parse("[ensemble]\nfamily = \"jacobi\"\na = 0.5\nb = 1.0").unwrap();
        assert_eq!(c.measure().unwrap(), Measure::Jacobi { a: 0.5, b: 1.0 });
    }

    #[test]
    fn derivative_case_doubles_the_pfaffian() {
        let c = RunConfig::parse("[ensemble]\ncase = \"derivative\"\nn = 3").unwrap();
        assert_eq!(c.pfaffian_size(), 6);
        assert_eq!(c.spec().unwrap().n, 6);
    }

    #[test]
    fn linear_grid() {
        let c = RunConfig::parse("[grid]\nlo = -1.0\nhi = 1.0\npoints = 5").unwrap();
        assert_eq!(c.grid().unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }
}
