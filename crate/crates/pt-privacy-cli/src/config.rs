//! JSON run configuration: one file describes the market, the experiment
//! parameters and the seed; command-line flags override individual fields.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pt_privacy::collector::MarketConfig;
use pt_privacy::experiments::{self, HeteroWhich};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub market: MarketConfig,
    pub experiment: ExperimentConfig,
    /// Master seed; all randomness anywhere in a run derives from it.
    pub seed: u64,
    /// Directory sweeps write their CSV and summary into (flag `--out`
    /// overrides). Defaults to the current directory.
    pub output_path: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            market: experiments::default_market_config(),
            experiment: ExperimentConfig::default(),
            seed: 0,
            output_path: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub solve: SolveParams,
    pub gap: GapParams,
    pub pt: PtSweepParams,
    pub refpoint: RefpointParams,
    pub mismatch: MismatchParams,
    pub hetero: HeteroParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveParams {
    pub grid_points: u32,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { grid_points: 4000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapParams {
    pub n_values: Vec<u64>,
    pub grid_points: u32,
}

impl Default for GapParams {
    fn default() -> Self {
        GapParams {
            n_values: experiments::default_gap_populations(),
            grid_points: 4000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PtSweepParams {
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
    pub grid_points: u32,
}

impl Default for PtSweepParams {
    fn default() -> Self {
        PtSweepParams {
            lambdas: experiments::default_lambda_grid(),
            betas: experiments::default_beta_grid(),
            grid_points: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefpointParams {
    pub eps_ref: f64,
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
    pub grid_points: u32,
    /// Gain/loss weighting for this sweep. Defaults to `uniform`: under the
    /// block-share weighting the participation threshold jumps at block
    /// boundaries, the derivative-numerator polynomial picks up extra sign
    /// changes, and its first root no longer tracks the exact optimum that
    /// the sweep cross-validates against.
    pub weighting: pt_privacy::pt::RefWeighting,
}

impl Default for RefpointParams {
    fn default() -> Self {
        RefpointParams {
            eps_ref: 0.01,
            lambdas: experiments::default_refpoint_lambdas(),
            betas: experiments::default_refpoint_betas(),
            grid_points: 1500,
            weighting: pt_privacy::pt::RefWeighting::Uniform,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MismatchParams {
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
    pub grid_points: u32,
}

impl Default for MismatchParams {
    fn default() -> Self {
        MismatchParams {
            lambdas: experiments::default_mismatch_lambdas(),
            betas: experiments::default_mismatch_betas(),
            grid_points: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeteroParams {
    /// Variance grid; when absent the per-parameter defaults apply
    /// ([0.05, 3.0] for lambda, [0.005, 0.1] for beta, 8 points each).
    pub variances: Option<Vec<f64>>,
    pub reps: u32,
    pub grid_points: u32,
    /// Market used by the heterogeneity sweep. The homogeneous-figure
    /// defaults put the optimum where the variance effect decouples, so
    /// this sweep carries its own regime; omit to use the shipped
    /// per-parameter defaults.
    pub market: Option<MarketConfig>,
}

impl Default for HeteroParams {
    fn default() -> Self {
        HeteroParams {
            variances: None,
            reps: 50,
            grid_points: 300,
            market: None,
        }
    }
}

impl HeteroParams {
    pub fn resolved_market(&self, which: HeteroWhich) -> MarketConfig {
        self.market
            .unwrap_or_else(|| experiments::hetero_default_config(which))
    }

    pub fn resolved_variances(&self, which: HeteroWhich) -> Vec<f64> {
        self.variances.clone().unwrap_or_else(|| match which {
            HeteroWhich::Lambda => experiments::default_lambda_variances(),
            HeteroWhich::Beta => experiments::default_beta_variances(),
        })
    }
}

fn positive_grid(name: &'static str, grid_points: u32) -> Result<(), CliError> {
    if grid_points < 100 {
        return Err(CliError::Config(format!(
            "invalid {name}: grid_points must be >= 100, got {grid_points}"
        )));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Full range validation before any computation; the message names the
    /// offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        self.market
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(market) = &self.experiment.hetero.market {
            market
                .validate()
                .map_err(|e| CliError::Config(format!("hetero market: {e}")))?;
        }
        positive_grid("solve", self.experiment.solve.grid_points)?;
        positive_grid("gap", self.experiment.gap.grid_points)?;
        positive_grid("pt", self.experiment.pt.grid_points)?;
        positive_grid("refpoint", self.experiment.refpoint.grid_points)?;
        positive_grid("mismatch", self.experiment.mismatch.grid_points)?;
        positive_grid("hetero", self.experiment.hetero.grid_points)?;
        if self.experiment.gap.n_values.is_empty() {
            return Err(CliError::Config(
                "invalid gap.n_values: must not be empty".into(),
            ));
        }
        let refpoint_eps = self.experiment.refpoint.eps_ref;
        if refpoint_eps.is_nan() || refpoint_eps <= 0.0 {
            return Err(CliError::Config(format!(
                "invalid refpoint.eps_ref: must be > 0, got {}",
                self.experiment.refpoint.eps_ref
            )));
        }
        if self.experiment.hetero.reps == 0 {
            return Err(CliError::Config("invalid hetero.reps: must be >= 1".into()));
        }
        if let Some(vs) = &self.experiment.hetero.variances {
            if vs.is_empty() || vs.iter().any(|v| v.is_nan() || *v <= 0.0) {
                return Err(CliError::Config(
                    "invalid hetero.variances: need a non-empty list of positive values".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, stamped into every summary.
    /// `output_path` is excluded: where the artifacts land does not change
    /// what was computed.
    pub fn digest(&self) -> String {
        let canonical = RunConfig {
            output_path: None,
            ..self.clone()
        };
        let canonical = serde_json::to_string(&canonical).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}
