//! JSON run configurations.

use std::path::{Path, PathBuf};

use modnls::dispersion::{EquationCoeffs, RecipExponent};
use modnls::harness::{CheckSetup, EmbeddingExponents, EnsembleSpec, FieldLaw, HoelderMode};
use modnls::modspace::{ModNormSpec, PartitionKind, PartitionSpec};
use modnls::nonlinear::Pattern;
use modnls::solver::{SolveConfig, TimeWindow};
use modnls::spectral::{Exponent, GridSpec, SpectralField};
use modnls::Complex64 as C64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Parse `text` as `T`, reporting the offending field path and position.
pub fn parse<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let text = inner.to_string();
        let message = text.rsplit_once(" at line ").map_or(text.as_str(), |(m, _)| m);
        CliError::Config(format!("{origin}: line {}, column {}, at `{path}`: {message}", inner.line(), inner.column()))
    })
}

/// Initial data of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    /// `A·exp(-|x - c|²/(2w²))·e^{i v·x}`.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default)]
        velocity: Vec<f64>,
    },
    /// A binary field file, relative to the config file.
    File { path: PathBuf },
    /// One draw from an ensemble law, seeded by `--seed`.
    Random { law: FieldLaw, amplitude: f64, band: f64 },
}

impl InitialData {
    pub fn realize(&self, grid: GridSpec, seed: u64, base: &Path) -> Result<SpectralField, CliError> {
        match self {
            InitialData::Gaussian { amplitude, width, center, velocity } => {
                let d = grid.dim();
                for (name, v) in [("center", center), ("velocity", velocity)] {
                    if !v.is_empty() && v.len() != d {
                        return Err(CliError::Config(format!("initial.{name} must have {d} entries")));
                    }
                }
                if !(*width > 0.0) {
                    return Err(CliError::Config(format!("initial.width = {width} must be positive")));
                }
                let c = |a: usize| center.get(a).copied().unwrap_or(0.0);
                let v = |a: usize| velocity.get(a).copied().unwrap_or(0.0);
                Ok(SpectralField::from_fn(grid, |x| {
                    let r2: f64 = x.iter().enumerate().map(|(a, xa)| (xa - c(a)).powi(2)).sum();
                    let phase: f64 = x.iter().enumerate().map(|(a, xa)| v(a) * xa).sum();
                    C64::from_polar(amplitude * (-r2 / (2.0 * width * width)).exp(), phase)
                }))
            }
            InitialData::File { path } => {
                let f = modnls::io::read_field(&base.join(path))?;
                if *f.grid() != grid {
                    return Err(CliError::Config(format!("{} lives on a different grid", path.display())));
                }
                Ok(f)
            }
            InitialData::Random { law, amplitude, band } => {
                let e = EnsembleSpec { count: 1, seed, law: *law, amplitude: *amplitude, band: *band };
                Ok(e.draw(0, 0, grid)?)
            }
        }
    }
}

/// Config of `evolve`, `picard` and `scatter`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub solver: SolveConfig,
    pub initial: InitialData,
    /// `picard`: also run the split-step oracle and report the deviation.
    #[serde(default)]
    pub oracle: bool,
    /// Write the whole trajectory as a binary file.
    #[serde(default)]
    pub save_trajectory: bool,
    /// `picard`: scale the initial data by the largest contracting amplitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<DeltaSearchConfig>,
}

/// Bisection over multiples of the initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaSearchConfig {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_bisections")]
    pub bisections: usize,
    /// Largest accepted contraction factor.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_bisections() -> usize {
    6
}

fn default_threshold() -> f64 {
    0.9
}

/// Config of `norm`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    pub grid: GridSpec,
    #[serde(default)]
    pub partition: PartitionSpec,
    pub norm: ModNormSpec,
    pub initial: InitialData,
}

/// Config of `params`; command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub d: Option<i64>,
    pub m: Option<i64>,
    pub gamma_nonzero: Option<bool>,
    pub r: Option<RecipExponent>,
    pub p: Option<RecipExponent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrichartzExponents {
    pub p: RecipExponent,
    pub r: RecipExponent,
    /// Admissible pair `(p̃', r̃')` of the forcing.
    pub dual_p: RecipExponent,
    pub dual_r: RecipExponent,
}

impl Default for StrichartzExponents {
    fn default() -> Self {
        StrichartzExponents {
            p: RecipExponent::integer(6),
            r: RecipExponent::integer(4),
            dual_p: RecipExponent::integer(2),
            dual_r: RecipExponent::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoelderExponents {
    /// Factor counts to run.
    pub factors: Vec<usize>,
    /// Exponents `(p̃_j, r̃_j)` of every factor, per factor count.
    pub p: Vec<RecipExponent>,
    pub r: Vec<RecipExponent>,
    pub modes: Vec<HoelderMode>,
    /// Box counts of the growth probe.
    pub probe_boxes: Vec<usize>,
}

impl Default for HoelderExponents {
    fn default() -> Self {
        HoelderExponents {
            factors: vec![2, 3],
            p: vec![RecipExponent::integer(4), RecipExponent::integer(6)],
            r: vec![RecipExponent::integer(8), RecipExponent::integer(6)],
            modes: vec![HoelderMode::Planchon, HoelderMode::Modulation],
            probe_boxes: vec![1, 2, 4, 8],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LipschitzConfig {
    pub pattern: Pattern,
    pub p_tilde: Exponent,
    pub r_tilde: Exponent,
    pub l: usize,
}

impl Default for LipschitzConfig {
    fn default() -> Self {
        LipschitzConfig {
            pattern: "u,conj,u,u".parse().expect("static pattern"),
            p_tilde: Exponent::Finite(2.0),
            r_tilde: Exponent::Finite(1.0),
            l: 3,
        }
    }
}

/// Config of `verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub setup: CheckSetup,
    pub ensemble: EnsembleSpec,
    pub strichartz: StrichartzExponents,
    pub hoelder: HoelderExponents,
    pub lipschitz: LipschitzConfig,
    pub embeddings: EmbeddingExponents,
    /// Rerun every check on the doubled grid.
    pub refine: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            setup: CheckSetup {
                coeffs: EquationCoeffs::new(1.0, 0.0, 1.0).expect("static coefficients"),
                grid: GridSpec::with_periods(2, 4, 64).expect("static grid"),
                partition: PartitionSpec { kind: PartitionKind::PiecewiseSmoothBump, k_max: 3 },
                window: TimeWindow { t_minus: 0.0, t_plus: 8.0, steps: 256 },
                s: 0.0,
                q: Exponent::Finite(1.0),
            },
            ensemble: EnsembleSpec {
                count: 100,
                seed: 0,
                law: FieldLaw::GaussianSpectrum { decay: 1.0 },
                amplitude: 1.0,
                band: 2.0,
            },
            strichartz: StrichartzExponents::default(),
            hoelder: HoelderExponents::default(),
            lipschitz: LipschitzConfig::default(),
            embeddings: EmbeddingExponents {
                s: 0.0,
                q: Exponent::Finite(1.0),
                r: Exponent::Finite(4.0),
                p1: Exponent::Finite(2.0),
                p2: Exponent::Finite(6.0),
            },
            refine: false,
        }
    }
}
