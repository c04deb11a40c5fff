//! Liquidation-free lending: health factors, the put/call hedge-sizing
//! formulas with their limits, strike-adjusted requirement surfaces, and
//! the exercise-rebalance procedure.
//!
//! Hedge options are valued by the Black-Scholes module with one shared
//! implied volatility and tenor across legs. Option values are denominated
//! in a cash asset; the conversion factors are carried through verbatim and
//! default to one (stablecoin numeraire).

use serde::{Deserialize, Serialize};

use crate::blackscholes::{self, OptionSpec};
use crate::numerics::{find_max_1d, Tolerance};
use crate::{Error, Result};

/// One side of a borrow position: a reserve of some asset and its price at
/// the time of entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetLeg {
    pub asset: String,
    pub reserve: f64,
    pub entry_price: f64,
}

impl AssetLeg {
    pub fn new(asset: impl Into<String>, reserve: f64, entry_price: f64) -> Result<Self> {
        if !(reserve.is_finite() && reserve > 0.0) {
            return Err(Error::domain(format!("reserve must be positive, got {reserve}")));
        }
        if !(entry_price.is_finite() && entry_price > 0.0) {
            return Err(Error::domain(format!("entry price must be positive, got {entry_price}")));
        }
        Ok(AssetLeg { asset: asset.into(), reserve, entry_price })
    }
}

/// A borrow position with `n` collateral legs and `m` debt legs, valued in
/// a common numeraire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LendingPosition {
    pub collateral: Vec<AssetLeg>,
    pub debt: Vec<AssetLeg>,
    pub numeraire: String,
}

/// The two health factors: collateral ratio `C = V_c / V_debt` and its
/// reciprocal loan-to-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HealthFactor {
    pub collateral_ratio: f64,
    pub ltv: f64,
}

fn weighted_value(legs: &[AssetLeg], prices: &[f64]) -> Result<f64> {
    if legs.len() != prices.len() {
        return Err(Error::domain(format!(
            "expected {} prices, got {}",
            legs.len(),
            prices.len()
        )));
    }
    let mut total = 0.0;
    for (leg, &p) in legs.iter().zip(prices) {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::domain(format!("price must be positive, got {p}")));
        }
        total += p * leg.reserve;
    }
    Ok(total)
}

/// Health factor at the given current prices (parallel to the legs). A
/// position with no debt value reports infinite health and zero LTV.
pub fn health_factor(
    position: &LendingPosition,
    collateral_prices: &[f64],
    debt_prices: &[f64],
) -> Result<HealthFactor> {
    let vc = weighted_value(&position.collateral, collateral_prices)?;
    let vd = weighted_value(&position.debt, debt_prices)?;
    if vd == 0.0 {
        return Ok(HealthFactor { collateral_ratio: f64::INFINITY, ltv: 0.0 });
    }
    Ok(HealthFactor { collateral_ratio: vc / vd, ltv: vd / vc })
}

fn check_hedge_inputs(reserve: f64, sigma: f64, tau: f64, prices: &[f64]) -> Result<()> {
    if !(reserve.is_finite() && reserve > 0.0) {
        return Err(Error::domain(format!("reserve must be positive, got {reserve}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::domain(format!("tau must be positive, got {tau}")));
    }
    for &p in prices {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::domain(format!("price must be positive, got {p}")));
        }
    }
    Ok(())
}

/// Puts needed to restore `entry_price * reserve` after a down-move:
///
/// ```text
/// alpha = reserve * (P0/Pt - 1) / (CDF(-d2) P0/Pc0 - CDF(-d1) Pt/Pct) * Pt/Pct
/// ```
///
/// with the put struck at the entry price and valued in the cash asset.
/// A non-negative move needs no hedge and returns zero. Monotone
/// decreasing in the current price, with limit `reserve` as it goes to 0.
pub fn put_hedge_quantity(
    reserve: f64,
    entry_price: f64,
    current_price: f64,
    cash_entry_price: f64,
    cash_current_price: f64,
    sigma: f64,
    tau: f64,
) -> Result<f64> {
    check_hedge_inputs(
        reserve,
        sigma,
        tau,
        &[entry_price, current_price, cash_entry_price, cash_current_price],
    )?;
    if current_price >= entry_price {
        return Ok(0.0);
    }
    let s = current_price / cash_current_price;
    let strike = entry_price / cash_entry_price;
    let spec = OptionSpec::new(strike, sigma, tau)?;
    let put_cash = blackscholes::vanilla_values(s, &spec)?.put_cash;
    if put_cash <= 0.0 {
        return Err(Error::DegenerateOption(put_cash));
    }
    Ok(reserve * (entry_price / current_price - 1.0) * s / put_cash)
}

/// Calls needed to source the debt gap after an up-move:
///
/// ```text
/// beta = reserve * (1 - P0/Pt) / (CDF(d1) Pt/Pct - CDF(d2) P0/Pc0) * Pt/Pct
/// ```
///
/// Monotone increasing in the current price, with limit `reserve` at
/// infinity.
pub fn call_hedge_quantity(
    reserve: f64,
    entry_price: f64,
    current_price: f64,
    cash_entry_price: f64,
    cash_current_price: f64,
    sigma: f64,
    tau: f64,
) -> Result<f64> {
    check_hedge_inputs(
        reserve,
        sigma,
        tau,
        &[entry_price, current_price, cash_entry_price, cash_current_price],
    )?;
    if current_price <= entry_price {
        return Ok(0.0);
    }
    let s = current_price / cash_current_price;
    let strike = entry_price / cash_entry_price;
    let spec = OptionSpec::new(strike, sigma, tau)?;
    let call_cash = blackscholes::vanilla_values(s, &spec)?.call_cash;
    if call_cash <= 0.0 {
        return Err(Error::DegenerateOption(call_cash));
    }
    Ok(reserve * (1.0 - entry_price / current_price) * s / call_cash)
}

/// Which hedge family a requirement scan belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegKind {
    CollateralPut,
    DebtCall,
}

/// Option count needed at one price when the hedge is struck away from the
/// entry price (unit cash prices). Zero on the unbreached side.
pub fn strike_adjusted_quantity(
    kind: LegKind,
    reserve: f64,
    entry_price: f64,
    strike: f64,
    sigma: f64,
    tau: f64,
    price: f64,
) -> Result<f64> {
    check_hedge_inputs(reserve, sigma, tau, &[entry_price, strike, price])?;
    let spec = OptionSpec::new(strike, sigma, tau)?;
    match kind {
        LegKind::CollateralPut => {
            if price >= entry_price {
                return Ok(0.0);
            }
            let put_cash = blackscholes::vanilla_values(price, &spec)?.put_cash;
            if put_cash <= 0.0 {
                return Err(Error::DegenerateOption(put_cash));
            }
            Ok(reserve * (entry_price - price) / put_cash)
        }
        LegKind::DebtCall => {
            if price <= entry_price {
                return Ok(0.0);
            }
            let call_cash = blackscholes::vanilla_values(price, &spec)?.call_cash;
            if call_cash <= 0.0 {
                return Err(Error::DegenerateOption(call_cash));
            }
            Ok(reserve * (price - entry_price) / call_cash)
        }
    }
}

/// Worst-case requirement for one strike: the global maximum of the
/// adjusted quantity over the scanned price range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrikeRequirement {
    pub strike: f64,
    pub worst_price: f64,
    pub max_quantity: f64,
    /// Set when the option value was non-positive or non-finite somewhere
    /// on the scan; the cell carries no quantities in that case.
    pub flagged: bool,
}

/// Price scan bounds as multiples of the entry price. Puts scan down to
/// `lo_factor * entry`, calls up to `hi_factor * entry`, both in log space
/// so the boundary limits and the near-the-money shoulder get comparable
/// resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRange {
    pub lo_factor: f64,
    pub hi_factor: f64,
}

impl Default for ScanRange {
    fn default() -> Self {
        ScanRange { lo_factor: 1e-6, hi_factor: 1e6 }
    }
}

/// Sweeps the strike grid and finds, per strike, the price at which the
/// required option count peaks. At-the-money strikes peak at the scan
/// boundary (recovering the reserve limits); out-of-the-money strikes
/// develop an interior maximum above both boundary levels.
pub fn strike_adjusted_requirement(
    kind: LegKind,
    reserve: f64,
    entry_price: f64,
    strikes: &[f64],
    sigma: f64,
    tau: f64,
    range: ScanRange,
) -> Result<Vec<StrikeRequirement>> {
    if strikes.is_empty() {
        return Err(Error::domain("strike grid must not be empty"));
    }
    check_hedge_inputs(reserve, sigma, tau, &[entry_price])?;
    let (u_lo, u_hi) = match kind {
        LegKind::CollateralPut => (range.lo_factor.ln(), -1e-9),
        LegKind::DebtCall => (1e-9, range.hi_factor.ln()),
    };
    let tol = Tolerance { abs_tol: 1e-10, rel_tol: 1e-10, max_iter: 200 };
    let mut out = Vec::with_capacity(strikes.len());
    for &strike in strikes {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(Error::domain(format!("strike must be positive, got {strike}")));
        }
        let curve = |u: f64| {
            strike_adjusted_quantity(
                kind,
                reserve,
                entry_price,
                strike,
                sigma,
                tau,
                entry_price * u.exp(),
            )
            .unwrap_or(f64::NAN)
        };
        match find_max_1d(curve, u_lo, u_hi, &tol) {
            Ok((u_star, q_star)) => out.push(StrikeRequirement {
                strike,
                worst_price: entry_price * u_star.exp(),
                max_quantity: q_star,
                flagged: false,
            }),
            Err(Error::NonFiniteEvaluation { .. }) => out.push(StrikeRequirement {
                strike,
                worst_price: f64::NAN,
                max_quantity: f64::NAN,
                flagged: true,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// The standing hedge: at-the-money puts matching each collateral reserve
/// and at-the-money calls matching each debt reserve, one shared tenor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanLeg {
    pub asset: String,
    pub quantity: f64,
    pub strike: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgePlan {
    pub puts: Vec<PlanLeg>,
    pub calls: Vec<PlanLeg>,
    pub sigma: f64,
    pub tau: f64,
}

pub fn build_hedge_plan(position: &LendingPosition, sigma: f64, tau: f64) -> Result<HedgePlan> {
    if !(sigma.is_finite() && sigma > 0.0 && tau.is_finite() && tau > 0.0) {
        return Err(Error::domain("sigma and tau must be positive"));
    }
    let leg = |l: &AssetLeg| PlanLeg {
        asset: l.asset.clone(),
        quantity: l.reserve,
        strike: l.entry_price,
    };
    Ok(HedgePlan {
        puts: position.collateral.iter().map(leg).collect(),
        calls: position.debt.iter().map(leg).collect(),
        sigma,
        tau,
    })
}

/// Result of exercising the plan against adverse prices: the restored
/// position, the thinned plan, and what was consumed (the refill
/// requirement equals the consumed counts; funding it is reported, not
/// enforced).
#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceOutcome {
    pub position: LendingPosition,
    pub plan: HedgePlan,
    pub consumed_puts: Vec<f64>,
    pub consumed_calls: Vec<f64>,
    pub refill_puts: Vec<f64>,
    pub refill_calls: Vec<f64>,
}

/// Liquidates just enough hedge options, at their Black-Scholes value, to
/// restore every breached `price * reserve` term to its entry level.
/// Collateral legs below entry gain `reserve * (P0/Pt - 1)` units; debt
/// legs above entry shed the symmetric amount. Unbreached legs are left
/// alone. A plan short of options signals a logic bug upstream, since the
/// at-the-money quantities always suffice.
pub fn rebalance_on_exercise(
    position: &LendingPosition,
    plan: &HedgePlan,
    collateral_prices: &[f64],
    debt_prices: &[f64],
) -> Result<RebalanceOutcome> {
    if plan.puts.len() != position.collateral.len() || plan.calls.len() != position.debt.len() {
        return Err(Error::domain("plan legs do not match position legs"));
    }
    weighted_value(&position.collateral, collateral_prices)?;
    weighted_value(&position.debt, debt_prices)?;

    let mut new_position = position.clone();
    let mut new_plan = plan.clone();
    let mut consumed_puts = vec![0.0; plan.puts.len()];
    let mut consumed_calls = vec![0.0; plan.calls.len()];

    for (i, leg) in position.collateral.iter().enumerate() {
        let pt = collateral_prices[i];
        if pt >= leg.entry_price {
            continue;
        }
        let alpha =
            put_hedge_quantity(leg.reserve, leg.entry_price, pt, 1.0, 1.0, plan.sigma, plan.tau)?;
        let available = new_plan.puts[i].quantity;
        if alpha > available * (1.0 + 1e-12) {
            return Err(Error::InsufficientPlan { needed: alpha, available });
        }
        new_position.collateral[i].reserve = leg.reserve * leg.entry_price / pt;
        new_plan.puts[i].quantity = (available - alpha).max(0.0);
        consumed_puts[i] = alpha;
    }

    for (j, leg) in position.debt.iter().enumerate() {
        let pt = debt_prices[j];
        if pt <= leg.entry_price {
            continue;
        }
        let beta =
            call_hedge_quantity(leg.reserve, leg.entry_price, pt, 1.0, 1.0, plan.sigma, plan.tau)?;
        let available = new_plan.calls[j].quantity;
        if beta > available * (1.0 + 1e-12) {
            return Err(Error::InsufficientPlan { needed: beta, available });
        }
        new_position.debt[j].reserve = leg.reserve * leg.entry_price / pt;
        new_plan.calls[j].quantity = (available - beta).max(0.0);
        consumed_calls[j] = beta;
    }

    Ok(RebalanceOutcome {
        position: new_position,
        plan: new_plan,
        refill_puts: consumed_puts.clone(),
        refill_calls: consumed_calls.clone(),
        consumed_puts,
        consumed_calls,
    })
}

/// Formats requirement rows as the surface-export CSV: header
/// `price,strike,quantity_ratio`, decimal-point reals, no locale.
pub fn format_requirement_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("price,strike,quantity_ratio\n");
    for &(price, strike, ratio) in rows {
        out.push_str(&format!("{price},{strike},{ratio}\n"));
    }
    out
}

/// Parses the surface-export CSV back into rows.
pub fn parse_requirement_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("price,strike,quantity_ratio") => {}
        other => return Err(Error::domain(format!("bad CSV header: {other:?}"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut cols = l.split(',');
            let mut next = || -> Result<f64> {
                cols.next()
                    .ok_or_else(|| Error::domain(format!("short CSV row: {l:?}")))?
                    .parse::<f64>()
                    .map_err(|_| Error::domain(format!("bad CSV number in row {l:?}")))
            };
            Ok((next()?, next()?, next()?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIGMA: f64 = 0.85;
    const TAU: f64 = 8.0 / 12.0;

    fn two_one_position() -> LendingPosition {
        LendingPosition {
            collateral: vec![
                AssetLeg::new("abc", 5.0, 10.0).unwrap(),
                AssetLeg::new("def", 2.0, 40.0).unwrap(),
            ],
            debt: vec![AssetLeg::new("usd-x", 60.0, 1.0).unwrap()],
            numeraire: "usd".into(),
        }
    }

    #[test]
    fn health_factor_symmetric_position() {
        let pos = LendingPosition {
            collateral: vec![AssetLeg::new("abc", 2.0, 50.0).unwrap()],
            debt: vec![AssetLeg::new("xyz", 100.0, 1.0).unwrap()],
            numeraire: "usd".into(),
        };
        let h = health_factor(&pos, &[50.0], &[1.0]).unwrap();
        assert_eq!(h.collateral_ratio, 1.0);
        assert_eq!(h.ltv, 1.0);
    }

    #[test]
    fn health_factor_is_price_scale_invariant() {
        let pos = two_one_position();
        let a = health_factor(&pos, &[8.0, 50.0], &[1.1]).unwrap();
        let b = health_factor(&pos, &[16.0, 100.0], &[2.2]).unwrap();
        assert!((a.collateral_ratio - b.collateral_ratio).abs() < 1e-12);
    }

    #[test]
    fn health_factor_matches_weighted_sums() {
        let pos = two_one_position();
        let h = health_factor(&pos, &[9.0, 44.0], &[1.05]).unwrap();
        let expected = (9.0 * 5.0 + 44.0 * 2.0) / (1.05 * 60.0);
        assert!((h.collateral_ratio - expected).abs() < 1e-12);
        assert!((h.ltv - 1.0 / expected).abs() < 1e-12);
    }

    #[test]
    fn health_factor_zero_debt_is_infinite() {
        let pos = LendingPosition {
            collateral: vec![AssetLeg::new("abc", 1.0, 10.0).unwrap()],
            debt: vec![],
            numeraire: "usd".into(),
        };
        let h = health_factor(&pos, &[10.0], &[]).unwrap();
        assert!(h.collateral_ratio.is_infinite());
        assert_eq!(h.ltv, 0.0);
    }

    #[test]
    fn alpha_limit_at_zero_price() {
        let a = put_hedge_quantity(3.0, 1.0, 1e-6, 1.0, 1.0, SIGMA, TAU).unwrap();
        assert!((a / 3.0 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn alpha_vanishes_at_entry_from_below() {
        // Two-sided limit: continuous, no singularity, tending to zero.
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6] {
            let a = put_hedge_quantity(1.0, 1.0, 1.0 - eps, 1.0, 1.0, SIGMA, TAU).unwrap();
            assert!(a < prev);
            prev = a;
        }
        assert!(prev < 1e-4);
        assert_eq!(put_hedge_quantity(1.0, 1.0, 1.0, 1.0, 1.0, SIGMA, TAU).unwrap(), 0.0);
        assert_eq!(put_hedge_quantity(1.0, 1.0, 1.5, 1.0, 1.0, SIGMA, TAU).unwrap(), 0.0);
    }

    #[test]
    fn alpha_frozen_point() {
        // 40-digit reference at Pt = 0.6 P0.
        let a = put_hedge_quantity(1.0, 1.0, 0.6, 1.0, 1.0, SIGMA, TAU).unwrap();
        assert!((a - 0.8514559783247179).abs() < 1e-12);
    }

    #[test]
    fn alpha_monotone_decreasing() {
        // Non-strict near zero, where the curve saturates to its limit
        // within machine precision.
        let mut prev = f64::INFINITY;
        for i in 1..1000 {
            let pt = i as f64 / 1000.0;
            let a = put_hedge_quantity(1.0, 1.0, pt, 1.0, 1.0, SIGMA, TAU).unwrap();
            assert!(a <= prev + 1e-12, "alpha not decreasing at {pt}");
            prev = a;
        }
        let lo = put_hedge_quantity(1.0, 1.0, 0.001, 1.0, 1.0, SIGMA, TAU).unwrap();
        assert!(prev < lo);
    }

    #[test]
    fn beta_limit_at_infinity() {
        let b = call_hedge_quantity(4.0, 1.0, 1e6, 1.0, 1.0, SIGMA, TAU).unwrap();
        assert!((b / 4.0 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn beta_frozen_point() {
        let b = call_hedge_quantity(1.0, 1.0, 1.5, 1.0, 1.0, SIGMA, TAU).unwrap();
        assert!((b - 0.7782745595856783).abs() < 1e-12);
    }

    #[test]
    fn beta_monotone_increasing() {
        let mut prev = 0.0;
        for i in 1..1000 {
            let pt = 1.0 + i as f64 / 100.0;
            let b = call_hedge_quantity(1.0, 1.0, pt, 1.0, 1.0, SIGMA, TAU).unwrap();
            assert!(b > prev, "beta not increasing at {pt}");
            prev = b;
        }
        assert_eq!(call_hedge_quantity(1.0, 1.0, 0.8, 1.0, 1.0, SIGMA, TAU).unwrap(), 0.0);
    }

    #[test]
    fn hedges_source_exact_deltas() {
        // alpha * put value (asset units) recovers reserve * (P0/Pt - 1).
        for &pt in &[0.2, 0.5, 0.8, 0.95] {
            let alpha = put_hedge_quantity(2.5, 1.0, pt, 1.0, 1.0, SIGMA, TAU).unwrap();
            let spec = OptionSpec::new(1.0, SIGMA, TAU).unwrap();
            let put = blackscholes::vanilla_values(pt, &spec).unwrap().put_cash;
            let delta = 2.5 * (1.0 / pt - 1.0);
            assert!((alpha * put / pt - delta).abs() < 1e-10);
        }
        for &pt in &[1.05, 1.5, 3.0] {
            let beta = call_hedge_quantity(2.5, 1.0, pt, 1.0, 1.0, SIGMA, TAU).unwrap();
            let spec = OptionSpec::new(1.0, SIGMA, TAU).unwrap();
            let call = blackscholes::vanilla_values(pt, &spec).unwrap().call_cash;
            let delta = 2.5 * (1.0 - 1.0 / pt);
            assert!((beta * call / pt - delta).abs() < 1e-10);
        }
    }

    #[test]
    fn cash_price_factors_carry_through() {
        // Unit cash prices must agree with the strike-adjusted helper.
        let a = put_hedge_quantity(1.0, 1.0, 0.7, 1.0, 1.0, SIGMA, TAU).unwrap();
        let q = strike_adjusted_quantity(LegKind::CollateralPut, 1.0, 1.0, 1.0, SIGMA, TAU, 0.7)
            .unwrap();
        assert!((a - q).abs() < 1e-14);
        // A common cash rescale of all prices leaves the count unchanged.
        let b = put_hedge_quantity(1.0, 2.0, 1.4, 2.0, 2.0, SIGMA, TAU).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn atm_strike_recovers_reserve_limit() {
        let cells = strike_adjusted_requirement(
            LegKind::CollateralPut,
            1.0,
            1.0,
            &[1.0],
            SIGMA,
            TAU,
            ScanRange::default(),
        )
        .unwrap();
        assert!(!cells[0].flagged);
        assert!((cells[0].max_quantity - 1.0).abs() < 1e-4);
        // The peak sits on the saturated low-price shoulder, where the
        // curve is flat at the reserve limit to machine precision.
        assert!(cells[0].worst_price < 0.1);
    }

    #[test]
    fn otm_strikes_have_interior_maxima() {
        for kind in [LegKind::CollateralPut, LegKind::DebtCall] {
            let strikes: Vec<f64> = match kind {
                LegKind::CollateralPut => vec![0.9, 0.8, 0.7],
                LegKind::DebtCall => vec![1.1, 1.2, 1.3],
            };
            let cells = strike_adjusted_requirement(
                kind,
                1.0,
                1.0,
                &strikes,
                SIGMA,
                TAU,
                ScanRange::default(),
            )
            .unwrap();
            for cell in cells {
                assert!(!cell.flagged);
                // Interior peak, away from both scan boundaries.
                assert!(cell.worst_price > 1e-5 && cell.worst_price < 1e5);
                let lo = strike_adjusted_quantity(kind, 1.0, 1.0, cell.strike, SIGMA, TAU, 2e-6)
                    .unwrap();
                let hi =
                    strike_adjusted_quantity(kind, 1.0, 1.0, cell.strike, SIGMA, TAU, 0.5e6)
                        .unwrap();
                assert!(cell.max_quantity > lo && cell.max_quantity > hi, "{kind:?} {cell:?}");
            }
        }
    }

    #[test]
    fn surface_matches_dense_grid_scan() {
        let strikes = [0.8, 0.9, 1.0, 1.1, 1.2];
        for &strike in &strikes {
            let kind = if strike <= 1.0 { LegKind::CollateralPut } else { LegKind::DebtCall };
            let cell = strike_adjusted_requirement(
                kind,
                1.0,
                1.0,
                &[strike],
                SIGMA,
                TAU,
                ScanRange::default(),
            )
            .unwrap()[0];
            let (u_lo, u_hi) = match kind {
                LegKind::CollateralPut => ((1e-6f64).ln(), -1e-9),
                LegKind::DebtCall => (1e-9, (1e6f64).ln()),
            };
            let n = 1_000_000;
            let mut best = f64::NEG_INFINITY;
            for i in 0..=n {
                let u = u_lo + (u_hi - u_lo) * i as f64 / n as f64;
                let q = strike_adjusted_quantity(kind, 1.0, 1.0, strike, SIGMA, TAU, u.exp())
                    .unwrap();
                best = best.max(q);
            }
            assert!(
                (cell.max_quantity - best).abs() / best < 1e-6,
                "strike {strike}: {} vs grid {best}",
                cell.max_quantity
            );
        }
    }

    #[test]
    fn degenerate_option_values_flag_cells() {
        // A strike a dozen orders of magnitude below the scanned prices
        // leaves the put worthless to machine precision somewhere on the
        // scan, which must flag the cell instead of fabricating a surface.
        let cells = strike_adjusted_requirement(
            LegKind::CollateralPut,
            1.0,
            1.0,
            &[1e-15],
            SIGMA,
            TAU,
            ScanRange::default(),
        )
        .unwrap();
        assert!(cells[0].flagged);
    }

    #[test]
    fn plan_holds_reserve_quantities_at_entry_strikes() {
        let pos = two_one_position();
        let plan = build_hedge_plan(&pos, SIGMA, TAU).unwrap();
        assert_eq!(plan.puts.len(), 2);
        assert_eq!(plan.calls.len(), 1);
        assert_eq!(plan.puts[0].quantity, 5.0);
        assert_eq!(plan.puts[0].strike, 10.0);
        assert_eq!(plan.calls[0].quantity, 60.0);

        let no_debt = LendingPosition { debt: vec![], ..pos };
        let plan = build_hedge_plan(&no_debt, SIGMA, TAU).unwrap();
        assert!(plan.calls.is_empty());
    }

    #[test]
    fn rebalance_without_breach_is_identity() {
        let pos = two_one_position();
        let plan = build_hedge_plan(&pos, SIGMA, TAU).unwrap();
        let out = rebalance_on_exercise(&pos, &plan, &[10.0, 41.0], &[0.99]).unwrap();
        assert_eq!(out.position, pos);
        assert_eq!(out.consumed_puts, vec![0.0, 0.0]);
        assert_eq!(out.consumed_calls, vec![0.0]);
    }

    #[test]
    fn rebalance_restores_breached_terms() {
        let pos = two_one_position();
        let plan = build_hedge_plan(&pos, SIGMA, TAU).unwrap();
        // First collateral leg down 25%, debt up 50%.
        let coll = [7.5, 40.0];
        let debt = [1.5];
        let out = rebalance_on_exercise(&pos, &plan, &coll, &debt).unwrap();
        let restored = out.position.collateral[0].reserve * coll[0];
        assert!((restored - 5.0 * 10.0).abs() < 1e-9);
        let debt_term = out.position.debt[0].reserve * debt[0];
        assert!((debt_term - 60.0 * 1.0).abs() < 1e-9);
        // Consumed counts match the sizing formulas.
        let alpha = put_hedge_quantity(5.0, 10.0, 7.5, 1.0, 1.0, SIGMA, TAU).unwrap();
        let beta = call_hedge_quantity(60.0, 1.0, 1.5, 1.0, 1.0, SIGMA, TAU).unwrap();
        assert!((out.consumed_puts[0] - alpha).abs() < 1e-12);
        assert!((out.consumed_calls[0] - beta).abs() < 1e-12);
        assert_eq!(out.refill_puts, out.consumed_puts);
        // Untouched leg kept whole.
        assert_eq!(out.position.collateral[1].reserve, 2.0);
        assert_eq!(out.consumed_puts[1], 0.0);
        // Health factor cannot fall below entry.
        let entry = health_factor(&pos, &[10.0, 40.0], &[1.0]).unwrap();
        let after = health_factor(&out.position, &coll, &debt).unwrap();
        assert!(after.collateral_ratio >= entry.collateral_ratio - 1e-9);
    }

    #[test]
    fn csv_round_trips_bitwise() {
        let rows = vec![(0.5, 1.0, 0.851455978), (0.25, 0.9, 1.1504793)];
        let text = format_requirement_csv(&rows);
        assert!(text.starts_with("price,strike,quantity_ratio\n"));
        let back = parse_requirement_csv(&text).unwrap();
        assert_eq!(rows, back);
    }
}
