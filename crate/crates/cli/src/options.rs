use std::path::{Path, PathBuf};

use clap::Args;
use gbs_core::density::NormalizationConvention;
use gbs_core::elliptic::KernelFamily;
use gbs_core::fit::{FitFamily, FitOptions, DEFAULT_S_GRID};
use gbs_core::linalg::SpdMatrix;
use gbs_core::transform::GbsParams;
use serde::Deserialize;

use crate::UsageError;

/// Flags shared by every subcommand. A `--config` JSON file uses the same
/// names (`"s-grid": [0.5, 1]`); flags given on the command line win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Options {
    /// JSON file with default values for any of the flags below
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Input matrices (.csv, or .json for an array of matrices)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output file; a .json extension selects JSON, anything else text/CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Degrees n
    #[arg(long)]
    pub n: Option<usize>,
    /// Matrix order m (otherwise inferred from --xi or the data)
    #[arg(long)]
    pub m: Option<usize>,
    /// Kernel family: gaussian or kotz
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    /// Scale: one value for beta*I, or the upper triangle of beta
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub beta: Option<Vec<f64>>,
    /// Upper triangle of Xi, row-major
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub xi: Option<Vec<f64>>,
    /// Normalizing constant: as-published or branch
    #[arg(long)]
    pub convention: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of matrices to sample
    #[arg(long)]
    pub count: Option<usize>,
    /// Kotz powers s for compare
    #[arg(long, value_delimiter = ',')]
    pub s_grid: Option<Vec<f64>>,
    /// Worker threads for compare
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Relative perturbation applied to tied draws in sample
    #[arg(long)]
    pub jitter: Option<f64>,
}

impl Options {
    /// Fills unset flags from the `--config` file, if any.
    pub fn resolve(self) -> anyhow::Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let file: Options =
            serde_json::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        Ok(Options {
            config: self.config,
            data: self.data.or(file.data),
            out: self.out.or(file.out),
            n: self.n.or(file.n),
            m: self.m.or(file.m),
            family: self.family.or(file.family),
            q: self.q.or(file.q),
            r: self.r.or(file.r),
            s: self.s.or(file.s),
            beta: self.beta.or(file.beta),
            xi: self.xi.or(file.xi),
            convention: self.convention.or(file.convention),
            seed: self.seed.or(file.seed),
            count: self.count.or(file.count),
            s_grid: self.s_grid.or(file.s_grid),
            jobs: self.jobs.or(file.jobs),
            jitter: self.jitter.or(file.jitter),
        })
    }

    pub fn data(&self) -> anyhow::Result<&Path> {
        Ok(self
            .data
            .as_deref()
            .ok_or_else(|| UsageError("--data is required".into()))?)
    }

    pub fn n(&self) -> anyhow::Result<usize> {
        let n = self.n.ok_or_else(|| UsageError("--n is required".into()))?;
        if n == 0 {
            return Err(UsageError("--n must be at least 1".into()).into());
        }
        Ok(n)
    }

    pub fn seed(&self) -> anyhow::Result<u64> {
        Ok(self.seed.ok_or_else(|| UsageError("--seed is required".into()))?)
    }

    pub fn convention(&self) -> anyhow::Result<NormalizationConvention> {
        match &self.convention {
            None => Ok(NormalizationConvention::default()),
            Some(c) => Ok(c
                .parse()
                .map_err(|e: gbs_core::Error| UsageError(format!("--convention: {e}")))?),
        }
    }

    fn family_name(&self) -> anyhow::Result<&str> {
        match self.family.as_deref().unwrap_or("gaussian") {
            f @ ("gaussian" | "kotz") => Ok(f),
            other => Err(UsageError(format!("--family must be gaussian or kotz, got {other:?}")).into()),
        }
    }

    /// Fully specified kernel, for density and sample.
    pub fn kernel(&self) -> anyhow::Result<KernelFamily> {
        if self.family_name()? == "gaussian" {
            return Ok(KernelFamily::Gaussian);
        }
        let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| UsageError(format!("--family kotz needs --{flag}")));
        Ok(KernelFamily::Kotz {
            q: need(self.q, "q")?,
            r: need(self.r, "r")?,
            s: need(self.s, "s")?,
        })
    }

    /// Family to fit; Kotz needs the fixed power `s`.
    pub fn fit_family(&self) -> anyhow::Result<FitFamily> {
        if self.family_name()? == "gaussian" {
            return Ok(FitFamily::Gaussian);
        }
        let s = self
            .s
            .ok_or_else(|| UsageError("fitting --family kotz needs --s".into()))?;
        Ok(FitFamily::Kotz { s })
    }

    pub fn fit_options(&self) -> anyhow::Result<FitOptions> {
        Ok(FitOptions {
            seed: self.seed.unwrap_or(0),
            convention: self.convention()?,
            ..FitOptions::default()
        })
    }

    pub fn s_grid(&self) -> anyhow::Result<Vec<f64>> {
        let grid = self.s_grid.clone().unwrap_or_else(|| DEFAULT_S_GRID.to_vec());
        if grid.is_empty() || grid.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(UsageError(format!("--s-grid values must be positive, got {grid:?}")).into());
        }
        Ok(grid)
    }

    pub fn jobs(&self) -> anyhow::Result<usize> {
        match self.jobs {
            Some(0) => Err(UsageError("--jobs must be at least 1".into()).into()),
            Some(j) => Ok(j),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    /// `GbsParams` from `--n`, `--xi` and `--beta`.
    pub fn params(&self) -> anyhow::Result<GbsParams> {
        let n = self.n()?;
        let xi_upper = self
            .xi
            .as_deref()
            .ok_or_else(|| UsageError("--xi is required".into()))?;
        let m = order_of(xi_upper.len()).ok_or_else(|| {
            UsageError(format!(
                "--xi has {} values, not the upper triangle of a square matrix",
                xi_upper.len()
            ))
        })?;
        if let Some(declared) = self.m {
            if declared != m {
                return Err(UsageError(format!("--m {declared} disagrees with --xi, which is {m}x{m}")).into());
            }
        }
        let xi = SpdMatrix::from_upper(m, xi_upper).map_err(|e| UsageError(format!("--xi: {e}")))?;
        let beta = match self.beta.as_deref() {
            None => return Err(UsageError("--beta is required".into()).into()),
            Some([b]) => SpdMatrix::scalar(m, *b).map_err(|e| UsageError(format!("--beta: {e}")))?,
            Some(upper) => {
                if order_of(upper.len()) != Some(m) {
                    return Err(UsageError(format!(
                        "--beta needs 1 value or the {} upper-triangle values of an {m}x{m} matrix",
                        m * (m + 1) / 2
                    ))
                    .into());
                }
                SpdMatrix::from_upper(m, upper).map_err(|e| UsageError(format!("--beta: {e}")))?
            }
        };
        Ok(GbsParams::new(n, xi, beta).map_err(|e| UsageError(e.to_string()))?)
    }
}

/// `m` with `m(m+1)/2 = len`.
pub fn order_of(len: usize) -> Option<usize> {
    (1..=len).find(|m| m * (m + 1) / 2 == len)
}
