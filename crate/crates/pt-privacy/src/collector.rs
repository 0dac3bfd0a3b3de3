//! The collector side: benefit from data volume, Laplace accuracy penalty,
//! utility and its analytic derivative, the approximated root polynomials
//! `f` and `f_pos` whose zeros locate the optimal privacy level, and a
//! Laplace-mechanism sampler for end-to-end noise validation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::population::{self, ValuationDist};
use crate::pt::{self, PtParams, RefWeighting};
use crate::{Error, Result};

/// Collector-side and population-side constants for the homogeneous
/// analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    /// Total number of individuals `N`.
    pub n_total: u64,
    /// Privacy cost per unit prospect level, `c > 0`.
    pub c: f64,
    /// Benefit shape, `0 < k <= 1`; the empty-collection benefit is `1 - k`.
    pub k: f64,
    /// Benefit scale, `l > 0`.
    pub l: f64,
    /// Reward-valuation distribution.
    pub dist: ValuationDist,
    /// Shared behavioral parameters of the (homogeneous) population.
    pub pt: PtParams,
    /// Gain/loss block weighting used whenever `pt.eps_ref > 0`.
    #[serde(default)]
    pub ref_weighting: RefWeighting,
}

impl MarketConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_total == 0 {
            return Err(Error::invalid("n_total", "must be >= 1"));
        }
        if !self.c.is_finite() || self.c <= 0.0 {
            return Err(Error::invalid(
                "c",
                format!("must be finite and > 0, got {}", self.c),
            ));
        }
        if !self.k.is_finite() || self.k <= 0.0 || self.k > 1.0 {
            return Err(Error::invalid(
                "k",
                format!("must lie in (0, 1], got {}", self.k),
            ));
        }
        if !self.l.is_finite() || self.l <= 0.0 {
            return Err(Error::invalid(
                "l",
                format!("must be finite and > 0, got {}", self.l),
            ));
        }
        self.dist.validate()?;
        self.pt.validate()
    }

    pub fn w_max(&self) -> f64 {
        self.dist.w_max()
    }

    /// Expected participants at `eps` under this configuration.
    pub fn participants(&self, eps: f64) -> Result<f64> {
        population::participation_count(
            eps,
            &self.dist,
            &self.pt,
            self.n_total,
            self.c,
            self.ref_weighting,
        )
    }

    fn require_uniform(&self, op: &str) -> Result<()> {
        match self.dist {
            ValuationDist::Uniform { .. } => Ok(()),
            ValuationDist::TruncatedNormal { .. } => Err(Error::Domain(format!(
                "{op} requires a Uniform reward-valuation distribution"
            ))),
        }
    }

    fn require_zero_reference(&self, op: &str) -> Result<()> {
        if self.pt.eps_ref != 0.0 {
            return Err(Error::Domain(format!(
                "{op} requires eps_ref == 0, got {}",
                self.pt.eps_ref
            )));
        }
        Ok(())
    }
}

/// The pieces of the collector's objective at one privacy level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityBreakdown {
    pub benefit: f64,
    pub penalty: f64,
    /// `benefit - penalty`; `-inf` when no one participates.
    pub utility: f64,
    pub participants: f64,
}

/// Benefit of collecting from `n` participants: `1 - k / (1 + l*n)`.
/// Strictly increasing, strictly concave, bounded above by 1.
pub fn benefit(n: f64, k: f64, l: f64) -> f64 {
    1.0 - k / (1.0 + l * n)
}

/// Expected accuracy penalty of the Laplace mechanism on a normalized mean
/// query over `n` entries: `2 / (n^2 eps^2)` (the noise variance at
/// sensitivity `1/n`). `n == 0` yields `+inf` by convention.
pub fn accuracy_penalty(eps: f64, n: f64) -> Result<f64> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::Domain(format!(
            "accuracy_penalty requires eps > 0, got {eps}"
        )));
    }
    if !n.is_finite() || n < 0.0 {
        return Err(Error::Domain(format!(
            "accuracy_penalty requires n >= 0, got {n}"
        )));
    }
    if n == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 / (n * n * eps * eps))
}

/// Collector utility at `eps`: benefit of the expected participant count
/// minus the accuracy penalty. Total over `eps > 0`: infeasible levels
/// (no participants) return a `-inf` utility sentinel instead of an error
/// so search routines can traverse the whole domain.
pub fn collector_utility(eps: f64, cfg: &MarketConfig) -> Result<UtilityBreakdown> {
    let n = cfg.participants(eps)?;
    let benefit = benefit(n, cfg.k, cfg.l);
    let penalty = accuracy_penalty(eps, n)?;
    Ok(UtilityBreakdown {
        benefit,
        penalty,
        utility: if penalty.is_finite() {
            benefit - penalty
        } else {
            f64::NEG_INFINITY
        },
        participants: n,
    })
}

/// Analytic derivative of the uniform-reward, zero-reference collector
/// utility in `eps`:
///
/// ```text
/// k l N (G'/W) / (1 + l N q)^2  +  (4/N^2) (q + eps G'/W) / (q^3 eps^3)
/// ```
///
/// with `q = (W + G)/W`, `G = -M eps^beta` the composite participation
/// cost and `G' = -M beta eps^(beta-1)` its derivative.
pub fn utility_derivative(eps: f64, cfg: &MarketConfig) -> Result<f64> {
    cfg.require_uniform("utility_derivative")?;
    cfg.require_zero_reference("utility_derivative")?;
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::Domain(format!(
            "utility_derivative requires eps > 0, got {eps}"
        )));
    }
    let w = cfg.w_max();
    let slope = pt::cost_slope(&cfg.pt, cfg.c)?;
    let threshold = slope * eps.powf(cfg.pt.beta);
    if threshold >= w {
        return Err(Error::Domain(format!(
            "eps {eps} is outside the feasible set (threshold {threshold} >= w_max {w})"
        )));
    }
    let n_total = cfg.n_total as f64;
    let q = (w - threshold) / w;
    let g_prime = -slope * cfg.pt.beta * eps.powf(cfg.pt.beta - 1.0);
    let first = cfg.k * cfg.l * n_total * (g_prime / w) / (1.0 + cfg.l * n_total * q).powi(2);
    let second = 4.0 / (n_total * n_total) * (q + eps * g_prime / w) / (q.powi(3) * eps.powi(3));
    Ok(first + second)
}

/// Shared polynomial shape of the approximated derivative numerator:
/// `q (1 + (kN/4l) eps^3 s') + eps s'` with `q = 1 - T/W`, `s' = -T'/W`.
fn poly_from_threshold(eps: f64, threshold: f64, threshold_slope: f64, cfg: &MarketConfig) -> f64 {
    let w = cfg.w_max();
    let q = 1.0 - threshold / w;
    let s_prime = -threshold_slope / w;
    let big_c = cfg.k * cfg.n_total as f64 / (4.0 * cfg.l);
    q * (1.0 + big_c * eps.powi(3) * s_prime) + eps * s_prime
}

/// Polynomial numerator of the large-population approximated derivative in
/// the zero-reference case. Its unique root in the feasible set is the
/// approximated optimal privacy level; for `beta == 1` it expands to the
/// quartic `C a^2 eps^4 - C a eps^3 - 2 a eps + 1` with `a = M/W`,
/// `C = kN/(4l)`.
pub fn poly_f(eps: f64, cfg: &MarketConfig) -> Result<f64> {
    cfg.require_uniform("poly_f")?;
    cfg.require_zero_reference("poly_f")?;
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::Domain(format!("poly_f requires eps > 0, got {eps}")));
    }
    let slope = pt::cost_slope(&cfg.pt, cfg.c)?;
    let threshold = slope * eps.powf(cfg.pt.beta);
    let threshold_slope = slope * cfg.pt.beta * eps.powf(cfg.pt.beta - 1.0);
    Ok(poly_from_threshold(eps, threshold, threshold_slope, cfg))
}

/// [`poly_f`] with the cost slope hoisted out: returns a closure computing
/// identical values without redoing the `O(m)` slope summation per call.
/// Search loops evaluate the polynomial thousands of times per solve.
pub fn poly_f_evaluator(cfg: &MarketConfig) -> Result<impl Fn(f64) -> f64 + '_> {
    cfg.require_uniform("poly_f")?;
    cfg.require_zero_reference("poly_f")?;
    let slope = pt::cost_slope(&cfg.pt, cfg.c)?;
    Ok(move |eps: f64| {
        let threshold = slope * eps.powf(cfg.pt.beta);
        let threshold_slope = slope * cfg.pt.beta * eps.powf(cfg.pt.beta - 1.0);
        poly_from_threshold(eps, threshold, threshold_slope, cfg)
    })
}

/// Positive-reference counterpart of [`poly_f`], built from the gain/loss
/// split prospect level under `cfg.ref_weighting`. The non-participation
/// level is constant in `eps`, so only the participation side contributes a
/// derivative. Coincides with [`poly_f`] when `eps_ref == 0`.
pub fn poly_f_pos(eps: f64, cfg: &MarketConfig) -> Result<f64> {
    cfg.require_uniform("poly_f_pos")?;
    if cfg.pt.eps_ref == 0.0 {
        return poly_f(eps, cfg);
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::Domain(format!(
            "poly_f_pos requires eps > 0, got {eps}"
        )));
    }
    let threshold = pt::participation_threshold(eps, &cfg.pt, cfg.c, cfg.ref_weighting)?;
    let threshold_slope =
        pt::participation_threshold_slope(eps, &cfg.pt, cfg.c, cfg.ref_weighting)?;
    Ok(poly_from_threshold(eps, threshold, threshold_slope, cfg))
}

/// Supremum of the feasible set `{eps > 0 : at least one participant}`.
///
/// Zero reference: `(W/M)^(1/beta)` in closed form. Positive reference: the
/// participation threshold is increasing in `eps`, so the boundary where it
/// crosses `w_max` is located by monotone bisection.
pub fn feasible_upper(cfg: &MarketConfig) -> Result<f64> {
    cfg.validate()?;
    let w = cfg.w_max();
    if cfg.pt.eps_ref == 0.0 {
        let slope = pt::cost_slope(&cfg.pt, cfg.c)?;
        return Ok((w / slope).powf(1.0 / cfg.pt.beta));
    }
    let below = |eps: f64| -> Result<bool> {
        Ok(pt::participation_threshold(eps, &cfg.pt, cfg.c, cfg.ref_weighting)? < w)
    };
    let mut lo = 1e-12;
    if !below(lo)? {
        return Err(Error::Infeasible(
            "no privacy level admits a participant".into(),
        ));
    }
    let mut hi = lo;
    while below(hi)? {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::Infeasible(
                "participation threshold never reaches w_max".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(lo)
}

/// One Laplace draw with the given scale, via inverse-CDF sampling.
pub fn laplace_sample<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    loop {
        let u = rng.random::<f64>() - 0.5;
        if u > -0.5 {
            return -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }
    }
}

/// Outcome of one run of the Laplace mechanism on a normalized data column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseDemo {
    pub true_mean: f64,
    pub noisy_mean: f64,
    /// Laplace scale `1 / (n * eps)` that was applied.
    pub scale: f64,
}

/// Runs the Laplace mechanism once on `data` (each value in `[0, 1]`):
/// publishes `mean(data) + Lap(1/(n*eps))`. Deterministic given `seed`.
pub fn laplace_noise_demo(data: &[f64], eps: f64, seed: u64) -> Result<NoiseDemo> {
    if data.is_empty() {
        return Err(Error::Domain("noise demo requires non-empty data".into()));
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::Domain(format!(
            "noise demo requires eps > 0, got {eps}"
        )));
    }
    for (i, &v) in data.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!(
                "data value {v} at index {i} lies outside [0, 1]"
            )));
        }
    }
    let n = data.len() as f64;
    let true_mean = data.iter().sum::<f64>() / n;
    let scale = 1.0 / (n * eps);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok(NoiseDemo {
        true_mean,
        noisy_mean: true_mean + laplace_sample(&mut rng, scale),
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    pub(crate) fn default_cfg() -> MarketConfig {
        MarketConfig {
            n_total: 10_000,
            c: 1.0,
            k: 0.8,
            l: 0.001,
            dist: ValuationDist::Uniform { w_max: 1.0 },
            pt: PtParams::new(1.95, 1.0, 0.0, 10).unwrap(),
            ref_weighting: RefWeighting::default(),
        }
    }

    #[test]
    fn benefit_examples_and_concavity() {
        assert_relative_eq!(benefit(0.0, 0.8, 0.001), 0.2);
        assert_relative_eq!(benefit(1.0, 1.0, 1.0), 0.5);
        assert!(benefit(1e12, 0.8, 0.001) < 1.0);
        assert!(1.0 - benefit(1e12, 0.8, 0.001) < 1e-9);
        // strictly increasing, strictly concave second difference
        let h = 10.0;
        for n in [0.0, 5.0, 50.0, 500.0, 5000.0] {
            let (a, b, c) = (
                benefit(n, 0.8, 0.001),
                benefit(n + h, 0.8, 0.001),
                benefit(n + 2.0 * h, 0.8, 0.001),
            );
            assert!(b > a);
            assert!(c - 2.0 * b + a < 0.0);
        }
    }

    #[test]
    fn penalty_examples() {
        assert_relative_eq!(accuracy_penalty(1.0, 1.0).unwrap(), 2.0);
        assert_relative_eq!(accuracy_penalty(2.0, 1.0).unwrap(), 0.5);
        let single = accuracy_penalty(0.3, 7.0).unwrap();
        let doubled = accuracy_penalty(0.3, 14.0).unwrap();
        assert_relative_eq!(single / doubled, 4.0, max_relative = 1e-12);
        assert!(accuracy_penalty(0.1, 0.0).unwrap().is_infinite());
        assert!(accuracy_penalty(0.0, 1.0).is_err());
        assert!(accuracy_penalty(1.0, -1.0).is_err());
    }

    #[test]
    fn penalty_identity() {
        for (eps, n) in [(0.01, 3.0), (0.6, 250.0), (2.5, 9999.0)] {
            let p = accuracy_penalty(eps, n).unwrap();
            assert_relative_eq!(p * n * n * eps * eps, 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn utility_matches_direct_closed_form() {
        // independent transcription of the uniform zero-reference utility
        let cfg = default_cfg();
        let w = cfg.w_max();
        let slope = pt::cost_slope(&cfg.pt, cfg.c).unwrap();
        let n_total = cfg.n_total as f64;
        for k in 1..50 {
            let eps = w / slope * f64::from(k) / 51.0;
            let q = (w - slope * eps) / w;
            let direct = 1.0
                - cfg.k / (1.0 + cfg.l * n_total * q)
                - 2.0 / (n_total * n_total * eps * eps * q * q);
            let breakdown = collector_utility(eps, &cfg).unwrap();
            assert_relative_eq!(breakdown.utility, direct, max_relative = 1e-12);
            assert_relative_eq!(
                breakdown.utility,
                breakdown.benefit - breakdown.penalty,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn infeasible_eps_returns_sentinel() {
        let cfg = default_cfg();
        let slope = pt::cost_slope(&cfg.pt, cfg.c).unwrap();
        let beyond = cfg.w_max() / slope * 1.01;
        let breakdown = collector_utility(beyond, &cfg).unwrap();
        assert_eq!(breakdown.participants, 0.0);
        assert!(breakdown.utility.is_infinite() && breakdown.utility < 0.0);
        // penalty blows up as the boundary is approached from below
        let near = cfg.w_max() / slope * (1.0 - 1e-9);
        assert!(collector_utility(near, &cfg).unwrap().penalty > 1e6);
    }

    #[test]
    fn eut_population_yields_weakly_higher_utility() {
        let cfg_pt = MarketConfig {
            pt: PtParams::new(2.5, 0.8, 0.0, 10).unwrap(),
            ..default_cfg()
        };
        let cfg_eut = MarketConfig {
            pt: PtParams::new(1.0, 1.0, 0.0, 10).unwrap(),
            ..default_cfg()
        };
        for eps in [0.001, 0.01, 0.05, 0.2] {
            let u_pt = collector_utility(eps, &cfg_pt).unwrap().utility;
            let u_eut = collector_utility(eps, &cfg_eut).unwrap().utility;
            assert!(u_eut >= u_pt, "eps={eps}: eut {u_eut} < pt {u_pt}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for beta in [1.0, 0.75, 0.5] {
            let cfg = MarketConfig {
                pt: PtParams::new(1.95, beta, 0.0, 10).unwrap(),
                ..default_cfg()
            };
            let upper = feasible_upper(&cfg).unwrap();
            for t in 1..12 {
                let eps = upper * f64::from(t) / 14.0;
                let h = 1e-6 * eps;
                let up = collector_utility(eps + h, &cfg).unwrap().utility;
                let dn = collector_utility(eps - h, &cfg).unwrap().utility;
                let fd = (up - dn) / (2.0 * h);
                let an = utility_derivative(eps, &cfg).unwrap();
                assert_relative_eq!(an, fd, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
        let tn_cfg = MarketConfig {
            dist: ValuationDist::TruncatedNormal {
                w_max: 1.0,
                mu: 0.5,
                sigma: 0.25,
            },
            ..default_cfg()
        };
        assert!(utility_derivative(0.01, &tn_cfg).is_err());
    }

    #[test]
    fn derivative_changes_sign_with_the_finite_difference() {
        // same bracketing intervals: wherever the analytic derivative is
        // resolvable, its sign agrees with the numeric slope
        let cfg = MarketConfig {
            pt: PtParams::new(2.3, 0.85, 0.0, 10).unwrap(),
            ..default_cfg()
        };
        let upper = feasible_upper(&cfg).unwrap();
        let mut signs = Vec::new();
        for i in 1..200 {
            let eps = upper * f64::from(i) / 201.0;
            let an = utility_derivative(eps, &cfg).unwrap();
            let h = 1e-4 * eps;
            let fd = (collector_utility(eps + h, &cfg).unwrap().utility
                - collector_utility(eps - h, &cfg).unwrap().utility)
                / (2.0 * h);
            if an.abs() > 1e-9 {
                assert_eq!(an.signum(), fd.signum(), "eps {eps}: {an} vs {fd}");
            }
            signs.push(an.signum());
        }
        // one maximum inside the feasible set: exactly one + to - flip
        let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(flips, 1);
    }

    #[test]
    fn derivative_positive_near_zero() {
        // penalty divergence as eps -> 0+ forces an increasing utility there
        let cfg = default_cfg();
        assert!(utility_derivative(1e-5, &cfg).unwrap() > 0.0);
    }

    #[test]
    fn poly_f_endpoints() {
        let cfg = default_cfg();
        assert_relative_eq!(poly_f(1e-12, &cfg).unwrap(), 1.0, max_relative = 1e-6);
        let slope = pt::cost_slope(&cfg.pt, cfg.c).unwrap();
        assert_relative_eq!(
            poly_f(cfg.w_max() / slope, &cfg).unwrap(),
            -1.0,
            max_relative = 1e-9
        );
        // sign change inside the feasible set
        let upper = feasible_upper(&cfg).unwrap();
        let mut flips = 0;
        let mut prev = poly_f(upper * 1e-9, &cfg).unwrap();
        for i in 1..2000 {
            let eps = upper * f64::from(i) / 2000.0;
            let v = poly_f(eps, &cfg).unwrap();
            if prev.signum() != v.signum() {
                flips += 1;
            }
            prev = v;
        }
        assert_eq!(flips, 1);
    }

    #[test]
    fn poly_f_pos_reduces_to_poly_f() {
        let mut cfg = default_cfg();
        for eps in [0.002, 0.01, 0.3] {
            assert_eq!(poly_f_pos(eps, &cfg).unwrap(), poly_f(eps, &cfg).unwrap());
        }
        // continuity of the uniform-weighting variant as eps_ref -> 0+
        cfg.ref_weighting = RefWeighting::Uniform;
        for beta in [1.0, 0.75] {
            let zero = MarketConfig {
                pt: PtParams::new(2.0, beta, 0.0, 10).unwrap(),
                ..cfg
            };
            let tiny = MarketConfig {
                pt: PtParams::new(2.0, beta, 1e-15, 10).unwrap(),
                ..cfg
            };
            for eps in [0.003, 0.02, 0.1] {
                let a = poly_f(eps, &zero).unwrap();
                let b = poly_f_pos(eps, &tiny).unwrap();
                assert!(
                    (a - b).abs() < 1e-9 * a.abs().max(1.0),
                    "beta={beta} eps={eps}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn poly_f_pos_all_gain_region() {
        // for eps below eps_ref every outcome is a gain: the participation
        // level is positive and f_pos(0+) > 0
        let cfg = MarketConfig {
            pt: PtParams::new(2.0, 0.7, 0.01, 10).unwrap(),
            ..default_cfg()
        };
        for weighting in [RefWeighting::BlockShare, RefWeighting::Uniform] {
            let cfg = MarketConfig {
                ref_weighting: weighting,
                ..cfg
            };
            let lvl = pt::prospect_participation_level(1e-4, &cfg.pt, weighting).unwrap();
            assert!(lvl > 0.0);
            assert!(poly_f_pos(1e-6, &cfg).unwrap() > 0.0);
        }
    }

    #[test]
    fn feasible_upper_examples() {
        let cfg = default_cfg();
        let slope = pt::cost_slope(&cfg.pt, cfg.c).unwrap();
        assert_relative_eq!(
            feasible_upper(&cfg).unwrap(),
            cfg.w_max() / slope,
            max_relative = 1e-12
        );

        // (beta=0.5, M=1, W=2) -> 4 ; built from lambda=2, m=1, c=0.5:
        // M = 0.5 * 2 * 1 = 1
        let cfg = MarketConfig {
            c: 0.5,
            dist: ValuationDist::Uniform { w_max: 2.0 },
            pt: PtParams::new(2.0, 0.5, 0.0, 1).unwrap(),
            ..default_cfg()
        };
        assert_relative_eq!(feasible_upper(&cfg).unwrap(), 4.0, max_relative = 1e-12);

        // positive reference: boundary pinched between feasible and not
        let cfg = MarketConfig {
            pt: PtParams::new(2.0, 0.8, 0.01, 10).unwrap(),
            ..default_cfg()
        };
        let upper = feasible_upper(&cfg).unwrap();
        assert!(cfg.participants(upper * (1.0 - 1e-9)).unwrap() > 0.0);
        assert_eq!(cfg.participants(upper * (1.0 + 1e-9)).unwrap(), 0.0);
    }

    #[test]
    fn laplace_demo_behaviour() {
        let demo = laplace_noise_demo(&[0.5], 1.0, 1).unwrap();
        assert_relative_eq!(demo.scale, 1.0);
        assert_relative_eq!(demo.true_mean, 0.5);

        let data: Vec<f64> = (0..100).map(|i| f64::from(i) / 99.0).collect();
        let huge_eps = laplace_noise_demo(&data, 1e12, 2).unwrap();
        assert!((huge_eps.noisy_mean - huge_eps.true_mean).abs() < 1e-9);

        let again = laplace_noise_demo(&data, 1e12, 2).unwrap();
        assert_eq!(huge_eps, again);

        assert!(laplace_noise_demo(&[], 1.0, 0).is_err());
        assert!(laplace_noise_demo(&[1.5], 1.0, 0).is_err());
        assert!(laplace_noise_demo(&[0.5], 0.0, 0).is_err());
    }

    #[test]
    fn laplace_sample_mean_is_centered() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let trials = 200_000;
        let scale = 0.7;
        let mean = (0..trials)
            .map(|_| laplace_sample(&mut rng, scale))
            .sum::<f64>()
            / f64::from(trials);
        let sd = (2.0 * scale * scale / f64::from(trials)).sqrt();
        assert!(mean.abs() < 3.0 * sd, "mean {mean}, 3sd {}", 3.0 * sd);
    }

    proptest! {
        #[test]
        fn quartic_expansion_matches_factored_form(
            lambda in 1.0f64..4.5,
            m in 1u32..60,
            c in 0.5f64..2.0,
            k in 0.1f64..1.0,
            l in 1e-4f64..1e-2,
            n_total in 4_000u64..40_000,
            w_max in 0.5f64..2.0,
            frac in 1e-3f64..0.999,
        ) {
            let cfg = MarketConfig {
                n_total, c, k, l,
                dist: ValuationDist::Uniform { w_max },
                pt: PtParams::new(lambda, 1.0, 0.0, m).unwrap(),
                ref_weighting: RefWeighting::default(),
            };
            let slope = pt::cost_slope(&cfg.pt, c).unwrap();
            let a = slope / w_max;
            let big_c = k * n_total as f64 / (4.0 * l);
            let eps = frac * w_max / slope;
            let t4 = big_c * a * a * eps.powi(4);
            let t3 = big_c * a * eps.powi(3);
            let t1 = 2.0 * a * eps;
            let expanded = t4 - t3 - t1 + 1.0;
            let scale = t4.abs() + t3.abs() + t1.abs() + 1.0;
            let factored = poly_f(eps, &cfg).unwrap();
            prop_assert!(
                (expanded - factored).abs() <= 1e-12 * scale,
                "expanded {} vs factored {} at scale {}", expanded, factored, scale
            );
        }
    }
}
