//! Derivative constructions on the pool's liquidity tokens: long calls and
//! puts via borrow-and-short flows, binary options via reserve splitting and
//! paired shorts, and the composed straddle and fully collateralized long
//! future.
//!
//! Repayment amounts exclude the invariant `k`: the borrower's debt is
//! capped at the covered-call value (`K` worth on the stable side, one unit
//! on the risky side), so positions record `k_at_open` only for reporting
//! the lender's forgone fees. Close-time settlement uses the pool's
//! reported price, never an external feed.

use serde::{Deserialize, Serialize};

use crate::blackscholes::{self, OptionSpec};
use crate::pool::{PoolParams, PoolState};
use crate::{Error, Result};

/// Which asset a quantity is denominated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denomination {
    Risky,
    Stable,
}

impl Denomination {
    pub fn other(self) -> Self {
        match self {
            Denomination::Risky => Denomination::Stable,
            Denomination::Stable => Denomination::Risky,
        }
    }
}

/// The four borrow-flow position kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositionSide {
    LongCall,
    LongPut,
    ShortConc,
    ShortAonp,
}

impl PositionSide {
    /// Denomination of the position's collateral, repayment, and net payoff.
    pub fn denomination(self) -> Denomination {
        match self {
            PositionSide::LongCall | PositionSide::ShortAonp => Denomination::Risky,
            PositionSide::LongPut | PositionSide::ShortConc => Denomination::Stable,
        }
    }
}

/// A long-option or binary-short position built by borrowing liquidity
/// tokens. All amounts are totals for the recorded `qty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BorrowPosition {
    pub side: PositionSide,
    #[serde(with = "crate::decimal")]
    pub qty: f64,
    #[serde(with = "crate::decimal")]
    pub open_time: f64,
    /// Pool price at open.
    #[serde(with = "crate::decimal")]
    pub open_price: f64,
    /// Total collateral posted at open, in `collateral_denom`.
    #[serde(with = "crate::decimal")]
    pub collateral: f64,
    pub collateral_denom: Denomination,
    /// Debt cap per unit: `K` on the stable side, 1 on the risky side.
    #[serde(with = "crate::decimal")]
    pub repayment_cap: f64,
    /// Invariant at open; excluded from repayment, reported so the lender's
    /// forgone fees stay visible.
    #[serde(with = "crate::decimal")]
    pub k_at_open: f64,
}

fn check_qty(qty: f64) -> Result<()> {
    if !(qty.is_finite() && qty > 0.0) {
        return Err(Error::domain(format!("quantity must be positive, got {qty}")));
    }
    Ok(())
}

/// Borrow `qty` liquidity tokens and denominate them in the risky asset,
/// yielding `qty` calls. Collateral per unit is
/// `1 - covered_call(S0) / S0` risky; repayment is the covered-call value
/// in risky terms at close, the invariant excluded.
pub fn open_long_call(state: &PoolState, params: &PoolParams, qty: f64) -> Result<BorrowPosition> {
    check_qty(qty)?;
    let s0 = state.report_price(params)?;
    let spec = params.option_spec(state.t)?;
    let cc = blackscholes::covered_call_value(s0, &spec)?;
    Ok(BorrowPosition {
        side: PositionSide::LongCall,
        qty,
        open_time: state.t,
        open_price: s0,
        collateral: qty * (1.0 - cc / s0),
        collateral_denom: Denomination::Risky,
        repayment_cap: 1.0,
        k_at_open: state.k,
    })
}

/// Borrow `qty` liquidity tokens and denominate them in the stable asset,
/// yielding `qty` puts. Collateral per unit is `K - covered_call(S0)`
/// stable.
pub fn open_long_put(state: &PoolState, params: &PoolParams, qty: f64) -> Result<BorrowPosition> {
    check_qty(qty)?;
    let s0 = state.report_price(params)?;
    let spec = params.option_spec(state.t)?;
    let cc = blackscholes::covered_call_value(s0, &spec)?;
    Ok(BorrowPosition {
        side: PositionSide::LongPut,
        qty,
        open_time: state.t,
        open_price: s0,
        collateral: qty * (params.strike - cc),
        collateral_denom: Denomination::Stable,
        repayment_cap: params.strike,
        k_at_open: state.k,
    })
}

impl BorrowPosition {
    /// Repayment owed per unit at the given price and remaining tenor.
    pub fn repayment_per_unit(&self, params: &PoolParams, price: f64, tau: f64) -> Result<f64> {
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::domain(format!("price must be positive, got {price}")));
        }
        if tau > 0.0 {
            let spec = OptionSpec::new(params.strike, params.sigma, tau)?;
            match self.side {
                PositionSide::LongCall => {
                    Ok(blackscholes::covered_call_value(price, &spec)? / price)
                }
                PositionSide::LongPut => blackscholes::covered_call_value(price, &spec),
                PositionSide::ShortConc => {
                    Ok(params.strike * blackscholes::binary_values(price, &spec)?.conc)
                }
                PositionSide::ShortAonp => {
                    Ok(blackscholes::binary_values(price, &spec)?.aonp_cash / price)
                }
            }
        } else {
            let b = blackscholes::terminal_binary_values(price, params.strike);
            match self.side {
                PositionSide::LongCall => Ok(price.min(params.strike) / price),
                PositionSide::LongPut => Ok(price.min(params.strike)),
                PositionSide::ShortConc => Ok(params.strike * b.conc),
                PositionSide::ShortAonp => Ok(b.aonp_cash / price),
            }
        }
    }

    /// Total net payoff at the given price and tenor: the per-unit cap minus
    /// the repayment, in the side's denomination.
    pub fn net_payoff(&self, params: &PoolParams, price: f64, tau: f64) -> Result<f64> {
        Ok(self.qty * (self.repayment_cap - self.repayment_per_unit(params, price, tau)?))
    }
}

/// Net payoff of closing against the pool's reported price at the pool's
/// current time. For closes at expiry use [`close_at_expiry`].
pub fn close_position(
    position: &BorrowPosition,
    state: &PoolState,
    params: &PoolParams,
) -> Result<f64> {
    if state.t < position.open_time {
        return Err(Error::domain("cannot close before the position was opened"));
    }
    let price = state.report_price(params)?;
    position.net_payoff(params, price, params.tau(state.t))
}

/// Net payoff at expiry from the terminal limits of the repayment rule.
pub fn close_at_expiry(
    position: &BorrowPosition,
    params: &PoolParams,
    terminal_price: f64,
) -> Result<f64> {
    position.net_payoff(params, terminal_price, 0.0)
}

/// One side of a reserve sale: selling the rights to `sold_leg` of `qty`
/// liquidity tokens for an upfront premium equal to the reserve, leaving
/// the seller the other leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinarySplit {
    pub sold_leg: Denomination,
    #[serde(with = "crate::decimal")]
    pub qty: f64,
    /// Premium received at sale, denominated in the sold leg's asset.
    #[serde(with = "crate::decimal")]
    pub premium: f64,
    #[serde(with = "crate::decimal")]
    pub split_time: f64,
    #[serde(with = "crate::decimal")]
    pub k_at_split: f64,
}

/// Cash value of one reserve leg of a single liquidity token. The risky
/// leg tracks the asset-or-nothing put, the stable leg the cash-or-nothing
/// call scaled by the strike plus the current invariant.
pub fn binary_leg_value(
    leg: Denomination,
    price: f64,
    params: &PoolParams,
    tau: f64,
    k: f64,
) -> Result<f64> {
    if !(price.is_finite() && price > 0.0) {
        return Err(Error::domain(format!("price must be positive, got {price}")));
    }
    let b = if tau > 0.0 {
        let spec = OptionSpec::new(params.strike, params.sigma, tau)?;
        blackscholes::binary_values(price, &spec)?
    } else {
        blackscholes::terminal_binary_values(price, params.strike)
    };
    Ok(match leg {
        Denomination::Risky => b.aonp_cash,
        Denomination::Stable => params.strike * b.conc + k,
    })
}

impl BinarySplit {
    pub fn retained_leg(&self) -> Denomination {
        self.sold_leg.other()
    }

    /// Current cash value of the retained leg, given the pool's invariant.
    pub fn retained_value(&self, price: f64, params: &PoolParams, tau: f64, k: f64) -> Result<f64> {
        Ok(self.qty * binary_leg_value(self.retained_leg(), price, params, tau, k)?)
    }

    /// Current cash value of the leg that was sold.
    pub fn sold_value(&self, price: f64, params: &PoolParams, tau: f64, k: f64) -> Result<f64> {
        Ok(self.qty * binary_leg_value(self.sold_leg, price, params, tau, k)?)
    }
}

/// Sells the rights to each reserve of `qty` liquidity tokens, creating an
/// asset-or-nothing put (the risky leg) and a cash-or-nothing call (the
/// stable leg). Returns the risky-leg sale and the stable-leg sale; the
/// premium of each equals the current reserve.
pub fn split_binaries(
    state: &PoolState,
    params: &PoolParams,
    qty: f64,
) -> Result<(BinarySplit, BinarySplit)> {
    check_qty(qty)?;
    if state.is_expired(params) {
        return Err(Error::Expired);
    }
    if qty > state.liquidity {
        return Err(Error::domain(format!(
            "cannot split {qty} tokens out of {} outstanding",
            state.liquidity
        )));
    }
    let mk = |leg: Denomination, reserve: f64| BinarySplit {
        sold_leg: leg,
        qty,
        premium: qty * reserve,
        split_time: state.t,
        k_at_split: state.k,
    };
    Ok((mk(Denomination::Risky, state.rx), mk(Denomination::Stable, state.ry)))
}

/// Shorts one reserve leg of a lent liquidity token. Requires the opposite
/// leg to be shorted in the same transaction (a coincidence of wants);
/// unpaired attempts are rejected rather than queued.
///
/// Shorting the stable leg creates a cash-or-nothing put; shorting the
/// risky leg creates an asset-or-nothing call. The premium paid equals the
/// gap between the leg's cap and the current reserve, and doubles as the
/// collateral for the capped repayment.
pub fn short_binary(
    state: &PoolState,
    params: &PoolParams,
    leg: Denomination,
    paired_with: Option<Denomination>,
    qty: f64,
) -> Result<BorrowPosition> {
    check_qty(qty)?;
    if paired_with != Some(leg.other()) {
        return Err(Error::UnpairedShort);
    }
    if state.is_expired(params) {
        return Err(Error::Expired);
    }
    let s0 = state.report_price(params)?;
    Ok(match leg {
        Denomination::Stable => BorrowPosition {
            side: PositionSide::ShortConc,
            qty,
            open_time: state.t,
            open_price: s0,
            collateral: qty * (params.strike - state.ry),
            collateral_denom: Denomination::Stable,
            repayment_cap: params.strike,
            k_at_open: state.k,
        },
        Denomination::Risky => BorrowPosition {
            side: PositionSide::ShortAonp,
            qty,
            open_time: state.t,
            open_price: s0,
            collateral: qty * (1.0 - state.rx),
            collateral_denom: Denomination::Risky,
            repayment_cap: 1.0,
            k_at_open: state.k,
        },
    })
}

/// Both binary shorts as one atomic paired transaction.
pub fn short_binary_pair(
    state: &PoolState,
    params: &PoolParams,
    qty: f64,
) -> Result<(BorrowPosition, BorrowPosition)> {
    let stable = short_binary(state, params, Denomination::Stable, Some(Denomination::Risky), qty)?;
    let risky = short_binary(state, params, Denomination::Risky, Some(Denomination::Stable), qty)?;
    Ok((stable, risky))
}

/// Cost breakdown of a symmetric straddle funded with a risky budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StraddleQuote {
    /// Straddles obtained: the budget divided by the per-straddle cost.
    pub straddles: f64,
    /// Per-straddle call collateral, risky units.
    pub call_cost_risky: f64,
    /// Per-straddle put collateral, stable units.
    pub put_cost_stable: f64,
    /// Per-straddle total with the put leg converted at the current price.
    pub unit_cost_risky: f64,
    /// Pool price used for the conversion.
    pub price: f64,
}

/// Maximum straddles for a risky budget `x`:
/// `m = x / (1 - V/S + (K - V)/S)` with `V` the liquidity-token value at
/// the pool's reported price. Both cost terms are risky-denominated; the
/// stable put collateral `K - V` is converted at `S`. A non-positive
/// denominator (possible only for strongly positive `k`) is surfaced as an
/// infeasibility error.
pub fn compose_straddle(
    state: &PoolState,
    params: &PoolParams,
    risky_budget: f64,
) -> Result<StraddleQuote> {
    if !(risky_budget.is_finite() && risky_budget > 0.0) {
        return Err(Error::domain(format!("budget must be positive, got {risky_budget}")));
    }
    let s = state.report_price(params)?;
    let v = state.lpt_value(params, s)?;
    let call_cost = 1.0 - v / s;
    let put_cost = params.strike - v;
    let denom = call_cost + put_cost / s;
    if denom <= 0.0 {
        return Err(Error::InfeasibleBudget(denom));
    }
    Ok(StraddleQuote {
        straddles: risky_budget / denom,
        call_cost_risky: call_cost,
        put_cost_stable: put_cost,
        unit_cost_risky: denom,
        price: s,
    })
}

/// Cost breakdown of a directionally skewed straddle with independent call
/// and put counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewedStraddleQuote {
    pub calls: f64,
    pub puts: f64,
    pub call_cost_risky: f64,
    pub put_cost_stable: f64,
    pub total_cost_risky: f64,
    pub price: f64,
}

pub fn compose_skewed_straddle(
    state: &PoolState,
    params: &PoolParams,
    calls: f64,
    puts: f64,
) -> Result<SkewedStraddleQuote> {
    if !(calls.is_finite() && puts.is_finite() && calls >= 0.0 && puts >= 0.0)
        || calls + puts == 0.0
    {
        return Err(Error::domain("call and put counts must be non-negative and not both zero"));
    }
    let s = state.report_price(params)?;
    let v = state.lpt_value(params, s)?;
    let call_cost = calls * (1.0 - v / s);
    let put_cost = puts * (params.strike - v);
    Ok(SkewedStraddleQuote {
        calls,
        puts,
        call_cost_risky: call_cost,
        put_cost_stable: put_cost,
        total_cost_risky: call_cost + put_cost / s,
        price: s,
    })
}

/// Cost breakdown of a fully collateralized long future: one unit of pool
/// liquidity (the covered-call leg) plus one long call on the same
/// configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FutureQuote {
    /// Risky deposited into the pool per liquidity unit.
    pub covered_call_risky: f64,
    /// Stable deposited into the pool per liquidity unit.
    pub covered_call_stable: f64,
    /// Call-leg collateral, risky units.
    pub call_cost_risky: f64,
    /// Net cost in risky units; identically one by construction.
    pub net_cost_risky: f64,
    pub price: f64,
}

/// The covered-call leg costs the current reserves; the call leg costs
/// `1 - V/S`. Marking the token at its reserve value makes the sum
/// collapse: `Rx + Ry/S + 1 - (S Rx + Ry)/S = 1`, full collateralization.
pub fn compose_long_future(state: &PoolState, params: &PoolParams) -> Result<FutureQuote> {
    let s = state.report_price(params)?;
    let mark = s * state.rx + state.ry;
    let call_cost = 1.0 - mark / s;
    Ok(FutureQuote {
        covered_call_risky: state.rx,
        covered_call_stable: state.ry,
        call_cost_risky: call_cost,
        net_cost_risky: state.rx + state.ry / s + call_cost,
        price: s,
    })
}

/// Serializes positions as JSON lines, one position per line.
pub fn ledger_to_json_lines(positions: &[BorrowPosition]) -> Result<String> {
    let mut out = String::new();
    for p in positions {
        out.push_str(
            &serde_json::to_string(p).map_err(|e| Error::domain(format!("serialize: {e}")))?,
        );
        out.push('\n');
    }
    Ok(out)
}

pub fn ledger_from_json_lines(text: &str) -> Result<Vec<BorrowPosition>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::domain(format!("parse ledger: {e}"))))
        .collect()
}
