//! The crowd side of the game: reward-valuation distributions, the
//! participation rule, participant counting (expected and exact), and
//! heterogeneous rosters with Gamma-distributed behavioral parameters.

use std::io::{BufRead, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Gamma as GammaDist, Normal};

use crate::pt::{self, PtParams, RefWeighting};
use crate::{Error, Result};

/// Distribution of an individual's valuation of the participation reward,
/// supported on `[0, w_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValuationDist {
    Uniform {
        w_max: f64,
    },
    /// Normal(mu, sigma) conditioned on `[0, w_max]`.
    TruncatedNormal {
        w_max: f64,
        mu: f64,
        sigma: f64,
    },
}

impl ValuationDist {
    pub fn w_max(&self) -> f64 {
        match *self {
            ValuationDist::Uniform { w_max } => w_max,
            ValuationDist::TruncatedNormal { w_max, .. } => w_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w_max = self.w_max();
        if !w_max.is_finite() || w_max <= 0.0 {
            return Err(Error::invalid(
                "w_max",
                format!("must be finite and > 0, got {w_max}"),
            ));
        }
        if let ValuationDist::TruncatedNormal { mu, sigma, .. } = *self {
            if !mu.is_finite() {
                return Err(Error::invalid("mu", format!("must be finite, got {mu}")));
            }
            if !sigma.is_finite() || sigma <= 0.0 {
                return Err(Error::invalid(
                    "sigma",
                    format!("must be finite and > 0, got {sigma}"),
                ));
            }
        }
        Ok(())
    }

    /// `Pr(W >= t)` for a draw from this distribution.
    pub fn survival(&self, t: f64) -> f64 {
        let w_max = self.w_max();
        if t <= 0.0 {
            return 1.0;
        }
        if t >= w_max {
            return 0.0;
        }
        match *self {
            ValuationDist::Uniform { w_max } => (w_max - t) / w_max,
            ValuationDist::TruncatedNormal { w_max, mu, sigma } => {
                let n = Normal::new(0.0, 1.0).expect("unit normal");
                let lo = n.cdf(-mu / sigma);
                let hi = n.cdf((w_max - mu) / sigma);
                ((hi - n.cdf((t - mu) / sigma)) / (hi - lo)).clamp(0.0, 1.0)
            }
        }
    }

    /// Draws one reward valuation. Truncated-normal draws go through the
    /// inverse CDF so cost per draw is seed-count independent.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ValuationDist::Uniform { w_max } => w_max * rng.random::<f64>(),
            ValuationDist::TruncatedNormal { w_max, mu, sigma } => {
                let n = Normal::new(0.0, 1.0).expect("unit normal");
                let lo = n.cdf(-mu / sigma);
                let hi = n.cdf((w_max - mu) / sigma);
                let u = lo + (hi - lo) * rng.random::<f64>();
                (mu + sigma * n.inverse_cdf(u)).clamp(0.0, w_max)
            }
        }
    }
}

/// One member of the population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    /// Reward valuation, same units as the privacy cost.
    pub w: f64,
    pub pt: PtParams,
}

/// A materialized population. `seed` records the generator seed used to
/// draw it (0 for rosters imported from CSV).
#[derive(Debug, Clone, PartialEq)]
pub struct Roster {
    pub individuals: Vec<Individual>,
    pub seed: u64,
}

impl Roster {
    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }
}

/// Shape/scale parameterization of a Gamma distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSpec {
    pub shape: f64,
    pub scale: f64,
}

impl GammaSpec {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !shape.is_finite() || shape <= 0.0 {
            return Err(Error::invalid(
                "shape",
                format!("must be finite and > 0, got {shape}"),
            ));
        }
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::invalid(
                "scale",
                format!("must be finite and > 0, got {scale}"),
            ));
        }
        Ok(GammaSpec { shape, scale })
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rand_distr::Gamma::new(self.shape, self.scale)
            .expect("validated gamma parameters")
            .sample(rng)
    }
}

/// Inverts (mean, variance) to Gamma shape/scale:
/// `shape = mean^2 / variance`, `scale = variance / mean`.
pub fn gamma_from_mean_var(mean: f64, variance: f64) -> Result<GammaSpec> {
    if !mean.is_finite() || mean <= 0.0 {
        return Err(Error::Domain(format!("gamma mean must be > 0, got {mean}")));
    }
    if !variance.is_finite() || variance <= 0.0 {
        return Err(Error::Domain(format!(
            "gamma variance must be > 0, got {variance}"
        )));
    }
    GammaSpec::new(mean * mean / variance, variance / mean)
}

/// How to assign behavioral parameters when drawing a roster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PtModel {
    /// Every individual shares the same parameters.
    Fixed(PtParams),
    /// `lambda` and `beta` are drawn per individual from Gamma distributions
    /// and clamped into the admissible ranges (`lambda` to `[1, inf)`,
    /// `beta` to `(0, 1]`); `eps_ref` and `m` are shared.
    GammaHetero {
        lambda: GammaSpec,
        beta: GammaSpec,
        eps_ref: f64,
        m: u32,
    },
}

/// Participation rule: join iff the reward valuation covers the perceived
/// privacy cost difference, `w >= c * (nonparticipation - participation)`
/// prospect levels. Ties resolve to participation.
pub fn participate(ind: &Individual, eps: f64, c: f64, weighting: RefWeighting) -> Result<bool> {
    let threshold = pt::participation_threshold(eps, &ind.pt, c, weighting)?;
    Ok(ind.w >= threshold)
}

/// Expected number of participants among `n_total` individuals whose reward
/// valuations follow `dist`: `n_total * Pr(W >= threshold(eps))`. Returned
/// as a real number, never rounded.
pub fn participation_count(
    eps: f64,
    dist: &ValuationDist,
    pt_params: &PtParams,
    n_total: u64,
    c: f64,
    weighting: RefWeighting,
) -> Result<f64> {
    let threshold = pt::participation_threshold(eps, pt_params, c, weighting)?;
    Ok(n_total as f64 * dist.survival(threshold))
}

/// Exact participant count for a materialized roster.
pub fn count_roster(roster: &Roster, eps: f64, c: f64, weighting: RefWeighting) -> Result<usize> {
    let mut n = 0;
    for ind in &roster.individuals {
        if participate(ind, eps, c, weighting)? {
            n += 1;
        }
    }
    Ok(n)
}

/// Largest loss-aversion `lambda` among participants at `eps`, or `None`
/// when nobody participates.
pub fn max_participating_lambda(
    roster: &Roster,
    eps: f64,
    c: f64,
    weighting: RefWeighting,
) -> Result<Option<f64>> {
    let mut max = None;
    for ind in &roster.individuals {
        if participate(ind, eps, c, weighting)? {
            max = Some(match max {
                None => ind.pt.lambda,
                Some(cur) => ind.pt.lambda.max(cur),
            });
        }
    }
    Ok(max)
}

/// Smallest risk parameter `beta` among participants at `eps`, or `None`
/// when nobody participates.
pub fn min_participating_beta(
    roster: &Roster,
    eps: f64,
    c: f64,
    weighting: RefWeighting,
) -> Result<Option<f64>> {
    let mut min = None;
    for ind in &roster.individuals {
        if participate(ind, eps, c, weighting)? {
            min = Some(match min {
                None => ind.pt.beta,
                Some(cur) => ind.pt.beta.min(cur),
            });
        }
    }
    Ok(min)
}

const BETA_FLOOR: f64 = 1e-12;

/// Draws a roster of `n` individuals. Deterministic in (`dist`, `pt_model`,
/// `n`, `seed`).
pub fn sample_roster(
    dist: &ValuationDist,
    pt_model: &PtModel,
    n: u64,
    seed: u64,
) -> Result<Roster> {
    if n == 0 {
        return Err(Error::Domain("roster size must be >= 1".into()));
    }
    dist.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut individuals = Vec::with_capacity(n as usize);
    match pt_model {
        PtModel::Fixed(pt_params) => {
            pt_params.validate()?;
            for _ in 0..n {
                individuals.push(Individual {
                    w: dist.sample(&mut rng),
                    pt: *pt_params,
                });
            }
        }
        PtModel::GammaHetero {
            lambda,
            beta,
            eps_ref,
            m,
        } => {
            GammaSpec::new(lambda.shape, lambda.scale)?;
            GammaSpec::new(beta.shape, beta.scale)?;
            // validate the shared fields once via a representative parameter set
            PtParams::new(1.0, 1.0, *eps_ref, *m)?;
            for _ in 0..n {
                let lam = lambda.sample(&mut rng).max(1.0);
                let bet = beta.sample(&mut rng).clamp(BETA_FLOOR, 1.0);
                individuals.push(Individual {
                    w: dist.sample(&mut rng),
                    pt: PtParams {
                        lambda: lam,
                        beta: bet,
                        eps_ref: *eps_ref,
                        m: *m,
                    },
                });
            }
        }
    }
    Ok(Roster { individuals, seed })
}

/// Pearson chi-squared goodness of fit against a Gamma law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: u32,
    /// Set when any expected bin count falls below 5; the p-value is then
    /// only indicative.
    pub low_expected: bool,
}

/// Chi-squared test of `samples` against `spec` using `bins`
/// equal-probability bins. Degrees of freedom are `bins - 1 - 2` (two fitted
/// parameters), so `bins >= 4` is required.
pub fn chi_squared_gof(samples: &[f64], spec: &GammaSpec, bins: u32) -> Result<GofResult> {
    if samples.is_empty() {
        return Err(Error::Domain("chi-squared test needs samples".into()));
    }
    if bins < 4 {
        return Err(Error::Domain(format!(
            "need bins >= 4 for bins-3 degrees of freedom, got {bins}"
        )));
    }
    GammaSpec::new(spec.shape, spec.scale)?;
    let gamma = GammaDist::new(spec.shape, 1.0 / spec.scale)
        .map_err(|e| Error::Domain(format!("gamma distribution: {e}")))?;
    let mut edges = Vec::with_capacity(bins as usize - 1);
    for j in 1..bins {
        edges.push(gamma.inverse_cdf(f64::from(j) / f64::from(bins)));
    }
    let mut observed = vec![0u64; bins as usize];
    for &s in samples {
        let bin = edges.partition_point(|&e| e < s);
        observed[bin] += 1;
    }
    let expected = samples.len() as f64 / f64::from(bins);
    let statistic = observed
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum::<f64>();
    let dof = bins - 3;
    let chi2 = ChiSquared::new(f64::from(dof))
        .map_err(|e| Error::Domain(format!("chi-squared distribution: {e}")))?;
    Ok(GofResult {
        statistic,
        p_value: chi2.sf(statistic),
        degrees_of_freedom: dof,
        low_expected: expected < 5.0,
    })
}

const ROSTER_HEADER: &str = "w,lambda,beta,eps_ref";

/// Writes a roster as CSV with header `w,lambda,beta,eps_ref`, one row per
/// individual, LF line endings, shortest round-trip float formatting.
pub fn write_roster_csv<W: Write>(roster: &Roster, mut out: W) -> Result<()> {
    out.write_all(ROSTER_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    for ind in &roster.individuals {
        writeln!(
            out,
            "{},{},{},{}",
            ind.w, ind.pt.lambda, ind.pt.beta, ind.pt.eps_ref
        )?;
    }
    Ok(())
}

/// Reads a roster written by [`write_roster_csv`] (or produced externally
/// with the same header). The discretization granularity `m` is not part of
/// the interchange format and is stamped on every imported individual.
pub fn read_roster_csv<R: BufRead>(input: R, m: u32) -> Result<Roster> {
    let mut individuals = Vec::new();
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or(Error::Csv {
            line: 1,
            message: "empty file".into(),
        })?
        .map_err(Error::Io)?;
    if header.trim_end_matches('\r') != ROSTER_HEADER {
        return Err(Error::Csv {
            line: 1,
            message: format!("expected header `{ROSTER_HEADER}`, got `{header}`"),
        });
    }
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(Error::Io)?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Csv {
                line: line_no,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str, name: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::Csv {
                line: line_no,
                message: format!("bad {name} `{s}`: {e}"),
            })
        };
        let w = parse(fields[0], "w")?;
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Csv {
                line: line_no,
                message: format!("w must be finite and >= 0, got {w}"),
            });
        }
        let pt = PtParams::new(
            parse(fields[1], "lambda")?,
            parse(fields[2], "beta")?,
            parse(fields[3], "eps_ref")?,
            m,
        )
        .map_err(|e| Error::Csv {
            line: line_no,
            message: e.to_string(),
        })?;
        individuals.push(Individual { w, pt });
    }
    Ok(Roster {
        individuals,
        seed: 0,
    })
}
