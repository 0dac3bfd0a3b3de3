//! Prospect-theoretic valuation of privacy levels.
//!
//! An individual judges an actual privacy level `eps` against a reference
//! level `eps_ref`: better-than-reference protection is a gain, worse is a
//! loss, losses are amplified by `lambda` and both sides are curved by
//! `beta`. Because the realized privacy level under an `eps`-private
//! mechanism is uncertain, the perceived ("prospect") privacy level averages
//! the valuation over `m` equally likely discrete outcomes `i*eps/m`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One individual's behavioral profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtParams {
    /// Loss aversion multiplier, `lambda >= 1`.
    pub lambda: f64,
    /// Risk curvature exponent, `0 < beta <= 1`. `lambda == beta == 1`
    /// recovers the expected-utility (linear) special case.
    pub beta: f64,
    /// Reference privacy level treated as neutral, `eps_ref >= 0`.
    pub eps_ref: f64,
    /// Number of discrete outcomes the continuous privacy level is split
    /// into when forming the prospect level, `m >= 1`.
    pub m: u32,
}

impl PtParams {
    pub fn new(lambda: f64, beta: f64, eps_ref: f64, m: u32) -> Result<Self> {
        let pt = PtParams {
            lambda,
            beta,
            eps_ref,
            m,
        };
        pt.validate()?;
        Ok(pt)
    }

    /// Range constraints are rejected, never clamped.
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 1.0 {
            return Err(Error::invalid(
                "lambda",
                format!("must be finite and >= 1, got {}", self.lambda),
            ));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 || self.beta > 1.0 {
            return Err(Error::invalid(
                "beta",
                format!("must lie in (0, 1], got {}", self.beta),
            ));
        }
        if !self.eps_ref.is_finite() || self.eps_ref < 0.0 {
            return Err(Error::invalid(
                "eps_ref",
                format!("must be finite and >= 0, got {}", self.eps_ref),
            ));
        }
        if self.m == 0 {
            return Err(Error::invalid("m", "must be >= 1"));
        }
        Ok(())
    }
}

/// How the discretized outcomes are weighted when the reference point is
/// positive and the outcomes split into a gain block and a loss block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefWeighting {
    /// The gain block is scaled by `t/m` and the loss block by `1 - t/m`,
    /// where `t` is the number of gain outcomes. Default.
    #[default]
    BlockShare,
    /// Every outcome carries weight `1/m`, the same weighting used when the
    /// reference point is zero.
    Uniform,
}

/// Subjective value of an actual privacy level `eps`.
///
/// Returns `(eps_ref - eps)^beta` when `eps <= eps_ref` (a gain: protection
/// beat the reference) and `-lambda * (eps - eps_ref)^beta` otherwise.
/// Continuous at `eps == eps_ref` with value 0.
pub fn valuation(eps: f64, pt: &PtParams) -> Result<f64> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::Domain(format!(
            "valuation requires eps >= 0, got {eps}"
        )));
    }
    if eps <= pt.eps_ref {
        Ok((pt.eps_ref - eps).powf(pt.beta))
    } else {
        Ok(-pt.lambda * (eps - pt.eps_ref).powf(pt.beta))
    }
}

/// Number of gain outcomes among `i*eps/m, i = 1..=m`: the largest `t` with
/// `t*eps/m <= eps_ref`, clamped to `[0, m]`. An outcome exactly at the
/// reference contributes 0 either way; ties go to the gain block.
fn gain_count(eps: f64, pt: &PtParams) -> u32 {
    let m = f64::from(pt.m);
    let t = (m * pt.eps_ref / eps).floor();
    if t < 0.0 {
        0
    } else if t >= m {
        pt.m
    } else {
        t as u32
    }
}

/// Prospect privacy level of participation under an `eps`-private mechanism.
///
/// With a zero reference every outcome is a loss and the level is the plain
/// average `(1/m) * sum_i valuation(i*eps/m)`. With a positive reference the
/// outcomes split into gains and losses and `weighting` selects how the two
/// blocks are scaled. Strictly decreasing in `eps` under [`RefWeighting::Uniform`];
/// piecewise decreasing with downward jumps at block boundaries under
/// [`RefWeighting::BlockShare`].
pub fn prospect_participation_level(
    eps: f64,
    pt: &PtParams,
    weighting: RefWeighting,
) -> Result<f64> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::Domain(format!(
            "prospect_participation_level requires eps > 0, got {eps}"
        )));
    }
    let m = f64::from(pt.m);
    if pt.eps_ref == 0.0 {
        let mut sum = 0.0;
        for i in 1..=pt.m {
            sum += (f64::from(i) * eps / m).powf(pt.beta);
        }
        return Ok(-pt.lambda / m * sum);
    }

    let t = gain_count(eps, pt);
    let mut gains = 0.0;
    for i in 1..=t {
        gains += (pt.eps_ref - f64::from(i) * eps / m).max(0.0).powf(pt.beta);
    }
    let mut losses = 0.0;
    for i in (t + 1)..=pt.m {
        losses += (f64::from(i) * eps / m - pt.eps_ref).max(0.0).powf(pt.beta);
    }
    match weighting {
        RefWeighting::BlockShare => {
            let share = f64::from(t) / m;
            Ok(share * gains - (1.0 - share) * pt.lambda * losses)
        }
        RefWeighting::Uniform => Ok((gains - pt.lambda * losses) / m),
    }
}

/// Derivative of [`prospect_participation_level`] in `eps`, on the interior
/// of a constant-gain-count piece. Terms whose base vanishes are skipped for
/// `beta < 1` (the one-sided derivative is unbounded there; the skipped set
/// has measure zero).
pub fn prospect_participation_slope(
    eps: f64,
    pt: &PtParams,
    weighting: RefWeighting,
) -> Result<f64> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::Domain(format!(
            "prospect_participation_slope requires eps > 0, got {eps}"
        )));
    }
    let m = f64::from(pt.m);
    let pow_dm1 = |base: f64| -> f64 {
        if base > 0.0 {
            base.powf(pt.beta - 1.0)
        } else if pt.beta == 1.0 {
            1.0
        } else {
            0.0
        }
    };
    if pt.eps_ref == 0.0 {
        let mut sum = 0.0;
        for i in 1..=pt.m {
            let w = f64::from(i) / m;
            sum += w * pow_dm1(w * eps);
        }
        return Ok(-pt.lambda * pt.beta / m * sum);
    }

    let t = gain_count(eps, pt);
    let mut d_gains = 0.0;
    for i in 1..=t {
        let w = f64::from(i) / m;
        d_gains -= pt.beta * w * pow_dm1(pt.eps_ref - w * eps);
    }
    let mut d_losses = 0.0;
    for i in (t + 1)..=pt.m {
        let w = f64::from(i) / m;
        d_losses += pt.beta * w * pow_dm1(w * eps - pt.eps_ref);
    }
    match weighting {
        RefWeighting::BlockShare => {
            let share = f64::from(t) / m;
            Ok(share * d_gains - (1.0 - share) * pt.lambda * d_losses)
        }
        RefWeighting::Uniform => Ok((d_gains - pt.lambda * d_losses) / m),
    }
}

/// Prospect privacy level of staying out: the non-participant's level is
/// exactly zero, a pure gain of `eps_ref^beta` (0 when the reference is 0).
pub fn prospect_nonparticipation_level(pt: &PtParams) -> f64 {
    if pt.eps_ref == 0.0 {
        0.0
    } else {
        pt.eps_ref.powf(pt.beta)
    }
}

/// Linear privacy cost `c * level`; negative levels map to negative cost.
pub fn privacy_cost(level: f64, c: f64) -> f64 {
    c * level
}

/// Slope `M` of the zero-reference participation cost: with `eps_ref == 0`,
/// `privacy_cost(prospect_participation_level(eps)) == -M * eps^beta`
/// exactly, with `M = c * lambda * (1/m)^(1+beta) * sum_{i=1..m} i^beta`.
/// For `beta == 1` this reduces to `c * lambda * (m+1) / (2m)`.
pub fn cost_slope(pt: &PtParams, c: f64) -> Result<f64> {
    if pt.eps_ref != 0.0 {
        return Err(Error::Domain(format!(
            "cost_slope is only defined for eps_ref == 0, got {}",
            pt.eps_ref
        )));
    }
    let m = f64::from(pt.m);
    let mut sum = 0.0;
    for i in 1..=pt.m {
        sum += f64::from(i).powf(pt.beta);
    }
    Ok(c * pt.lambda * (1.0 / m).powf(1.0 + pt.beta) * sum)
}

/// Participation reward threshold: an individual joins iff their reward
/// valuation `w` is at least
/// `c * (nonparticipation level - participation level)`.
pub fn participation_threshold(
    eps: f64,
    pt: &PtParams,
    c: f64,
    weighting: RefWeighting,
) -> Result<f64> {
    let part = prospect_participation_level(eps, pt, weighting)?;
    Ok(privacy_cost(prospect_nonparticipation_level(pt) - part, c))
}

/// Derivative of [`participation_threshold`] in `eps`. The non-participation
/// level is constant in `eps`, so only the participation side contributes.
pub fn participation_threshold_slope(
    eps: f64,
    pt: &PtParams,
    c: f64,
    weighting: RefWeighting,
) -> Result<f64> {
    Ok(-c * prospect_participation_slope(eps, pt, weighting)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pt(lambda: f64, beta: f64, eps_ref: f64, m: u32) -> PtParams {
        PtParams::new(lambda, beta, eps_ref, m).unwrap()
    }

    #[test]
    fn validation_rejects_out_of_range() {
        assert!(PtParams::new(0.5, 1.0, 0.0, 1).is_err());
        assert!(PtParams::new(1.0, 0.0, 0.0, 1).is_err());
        assert!(PtParams::new(1.0, 1.2, 0.0, 1).is_err());
        assert!(PtParams::new(1.0, 1.0, -0.1, 1).is_err());
        assert!(PtParams::new(1.0, 1.0, 0.0, 0).is_err());
        assert!(PtParams::new(1.0, 1.0, 0.0, 1).is_ok());
    }

    #[test]
    fn valuation_known_values() {
        assert_relative_eq!(valuation(0.5, &pt(1.0, 1.0, 0.0, 1)).unwrap(), -0.5);
        assert_eq!(valuation(0.01, &pt(2.0, 0.5, 0.01, 1)).unwrap(), 0.0);
        // -2 * 0.04^0.5 = -0.4
        assert_relative_eq!(
            valuation(0.04, &pt(2.0, 0.5, 0.0, 1)).unwrap(),
            -0.4,
            max_relative = 1e-15
        );
        assert!(valuation(-1e-9, &pt(1.0, 1.0, 0.0, 1)).is_err());
    }

    #[test]
    fn valuation_is_continuous_at_reference() {
        let p = pt(2.5, 0.7, 0.3, 1);
        for h in [1e-4, 1e-6, 1e-8] {
            let gap = (valuation(0.3 - h, &p).unwrap() - valuation(0.3 + h, &p).unwrap()).abs();
            assert!(gap < 4.0 * h.powf(0.7), "gap {gap} at h {h}");
        }
    }

    #[test]
    fn participation_level_known_values() {
        // (v(0.5) + v(1)) / 2 = (-0.5 - 1) / 2
        let lvl = prospect_participation_level(1.0, &pt(1.0, 1.0, 0.0, 2), RefWeighting::default())
            .unwrap();
        assert_relative_eq!(lvl, -0.75);
        // -lambda (m+1) eps / (2m) = -2 * 5 / 8
        let lvl = prospect_participation_level(1.0, &pt(2.0, 1.0, 0.0, 4), RefWeighting::default())
            .unwrap();
        assert_relative_eq!(lvl, -1.25);
        // all outcomes vanish as eps -> 0+
        let lvl =
            prospect_participation_level(1e-12, &pt(3.0, 0.5, 0.0, 7), RefWeighting::default())
                .unwrap();
        assert!(lvl.abs() < 1e-5);
        assert!(
            prospect_participation_level(0.0, &pt(1.0, 1.0, 0.0, 1), RefWeighting::default())
                .is_err()
        );
    }

    #[test]
    fn positive_reference_split_by_hand() {
        // m = 3, eps = 1, eps_ref = 0.5, beta = 1, lambda = 2:
        // outcomes 1/3 (gain), 2/3 and 1 (losses), t = 1.
        let p = pt(2.0, 1.0, 0.5, 3);
        let block = prospect_participation_level(1.0, &p, RefWeighting::BlockShare).unwrap();
        assert_relative_eq!(block, -5.0 / 6.0, max_relative = 1e-14);
        let unif = prospect_participation_level(1.0, &p, RefWeighting::Uniform).unwrap();
        assert_relative_eq!(unif, -7.0 / 18.0, max_relative = 1e-14);
    }

    #[test]
    fn uniform_weighting_matches_termwise_valuations() {
        // The uniform variant must equal the plain mean of valuations for any
        // reference point.
        let p = pt(1.8, 0.6, 0.02, 9);
        for eps in [0.001, 0.015, 0.02, 0.18, 2.0] {
            let lvl = prospect_participation_level(eps, &p, RefWeighting::Uniform).unwrap();
            let mean = (1..=9)
                .map(|i| valuation(f64::from(i) * eps / 9.0, &p).unwrap())
                .sum::<f64>()
                / 9.0;
            assert_relative_eq!(lvl, mean, max_relative = 1e-13, epsilon = 1e-15);
        }
    }

    #[test]
    fn nonparticipation_level_known_values() {
        assert_eq!(prospect_nonparticipation_level(&pt(2.0, 0.7, 0.0, 3)), 0.0);
        assert_relative_eq!(
            prospect_nonparticipation_level(&pt(2.0, 1.0, 0.01, 3)),
            0.01
        );
        assert_relative_eq!(
            prospect_nonparticipation_level(&pt(2.0, 0.5, 0.04, 3)),
            0.2,
            max_relative = 1e-15
        );
    }

    #[test]
    fn privacy_cost_is_linear() {
        assert_relative_eq!(privacy_cost(-0.75, 2.0), -1.5);
        assert_eq!(privacy_cost(0.0, 5.0), 0.0);
        assert_relative_eq!(privacy_cost(0.2, 1.0), 0.2);
    }

    #[test]
    fn cost_slope_known_values() {
        assert_relative_eq!(cost_slope(&pt(1.0, 1.0, 0.0, 1), 1.0).unwrap(), 1.0);
        assert_relative_eq!(
            cost_slope(&pt(2.0, 1.0, 0.0, 3), 1.0).unwrap(),
            4.0 / 3.0,
            max_relative = 1e-15
        );
        // direct summation: (1/2) * (1/2)^0.5 * (1 + 2^0.5)
        assert_relative_eq!(
            cost_slope(&pt(1.0, 0.5, 0.0, 2), 1.0).unwrap(),
            0.5 * 0.5f64.sqrt() * (1.0 + 2.0f64.sqrt()),
            max_relative = 1e-15
        );
        assert!(cost_slope(&pt(1.0, 1.0, 0.01, 2), 1.0).is_err());
    }

    #[test]
    fn threshold_slope_matches_finite_difference() {
        for (p, weighting) in [
            (pt(2.2, 0.8, 0.0, 6), RefWeighting::Uniform),
            (pt(2.2, 0.8, 0.01, 6), RefWeighting::Uniform),
            (pt(1.4, 0.6, 0.01, 6), RefWeighting::BlockShare),
        ] {
            // pick eps away from block boundaries i*eps/m == eps_ref
            for eps in [0.004_3, 0.031_7, 0.217_9] {
                let h = 1e-7 * eps;
                let t0 = participation_threshold(eps - h, &p, 1.3, weighting).unwrap();
                let t1 = participation_threshold(eps + h, &p, 1.3, weighting).unwrap();
                let fd = (t1 - t0) / (2.0 * h);
                let an = participation_threshold_slope(eps, &p, 1.3, weighting).unwrap();
                assert_relative_eq!(an, fd, max_relative = 1e-5);
            }
        }
    }

    proptest! {
        #[test]
        fn eut_degenerates_to_negated_eps(eps in 1e-9f64..10.0) {
            let p = pt(1.0, 1.0, 0.0, 1);
            prop_assert_eq!(valuation(eps, &p).unwrap(), -eps);
        }

        #[test]
        fn valuation_non_increasing_in_eps(
            lambda in 1.0f64..5.0,
            beta in 0.05f64..1.0,
            eps_ref in 0.0f64..0.5,
            a in 0.0f64..2.0,
            b in 0.0f64..2.0,
        ) {
            let p = pt(lambda, beta, eps_ref, 1);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(valuation(lo, &p).unwrap() >= valuation(hi, &p).unwrap());
        }

        #[test]
        fn level_cost_matches_slope_form(
            lambda in 1.0f64..5.0,
            beta in 0.05f64..1.0,
            m in 1u32..40,
            eps in 1e-6f64..5.0,
            c in 0.1f64..4.0,
        ) {
            let p = pt(lambda, beta, 0.0, m);
            let lhs = privacy_cost(
                prospect_participation_level(eps, &p, RefWeighting::default()).unwrap(),
                c,
            );
            let rhs = -cost_slope(&p, c).unwrap() * eps.powf(beta);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
        }

        #[test]
        fn summands_move_with_lambda_and_beta(
            lambda in 1.0f64..4.0,
            beta_lo in 0.2f64..0.9,
            eps in 1e-4f64..0.9,
            m in 1u32..20,
        ) {
            // each summand -lambda (i eps/m)^beta decreases in lambda and,
            // for outcomes below 1, increases in beta
            let beta_hi = (beta_lo + 0.1).min(1.0);
            let w = RefWeighting::default();
            let base = prospect_participation_level(eps, &pt(lambda, beta_lo, 0.0, m), w).unwrap();
            let more_averse =
                prospect_participation_level(eps, &pt(lambda + 0.5, beta_lo, 0.0, m), w).unwrap();
            prop_assert!(more_averse < base);
            let less_curved =
                prospect_participation_level(eps, &pt(lambda, beta_hi, 0.0, m), w).unwrap();
            prop_assert!(less_curved >= base);
        }

        #[test]
        fn participation_level_decreasing_in_eps(
            lambda in 1.0f64..4.0,
            beta in 0.1f64..1.0,
            eps_ref in prop::sample::select(vec![0.0, 0.01, 0.3]),
            eps in 1e-5f64..2.0,
            m in 1u32..25,
        ) {
            let p = pt(lambda, beta, eps_ref, m);
            let lvl = prospect_participation_level(eps, &p, RefWeighting::Uniform).unwrap();
            let lvl_hi =
                prospect_participation_level(eps * 1.05, &p, RefWeighting::Uniform).unwrap();
            prop_assert!(lvl_hi < lvl);
        }
    }
}
