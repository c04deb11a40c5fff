//! Name-keyed registry of the derivative constructions. Each construction
//! sits behind a common trait so front ends can select one at runtime,
//! print its collateral/premium/repayment summary, and tabulate its net
//! payoff over a terminal-price grid.

use crate::decimal;
use crate::derivatives::{
    self, binary_leg_value, close_at_expiry, compose_long_future, compose_straddle,
    open_long_call, open_long_put, short_binary_pair, split_binaries, Denomination,
};
use crate::pool::{PoolParams, PoolState};
use crate::{Error, Result};

/// Options shared by all constructions; each uses what it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructOpts {
    /// Position size in liquidity tokens (long options, splits, shorts).
    pub qty: f64,
    /// Risky budget for the straddle composition.
    pub risky_budget: f64,
    /// Terminal prices for the payoff table.
    pub terminal_grid: Vec<f64>,
}

impl Default for ConstructOpts {
    fn default() -> Self {
        ConstructOpts { qty: 1.0, risky_budget: 1.0, terminal_grid: Vec::new() }
    }
}

/// Summary fields plus a per-terminal-price payoff table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionReport {
    pub construction: String,
    pub fields: Vec<(String, String)>,
    pub payoff_columns: Vec<String>,
    pub payoff: Vec<(f64, Vec<f64>)>,
}

/// One derivative construction, selectable by name.
pub trait Construction: Sync + Send {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn construct(
        &self,
        state: &PoolState,
        params: &PoolParams,
        opts: &ConstructOpts,
    ) -> Result<ConstructionReport>;
}

fn field(name: &str, v: f64) -> (String, String) {
    (name.to_string(), decimal::to_string(v))
}

fn check_grid(grid: &[f64]) -> Result<()> {
    for &s in grid {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::domain(format!("terminal price must be positive, got {s}")));
        }
    }
    Ok(())
}

struct LongCall;

impl Construction for LongCall {
    fn name(&self) -> &'static str {
        "long-call"
    }

    fn summary(&self) -> &'static str {
        "borrow tokens, denominate in risky: a vanilla call"
    }

    fn construct(
        &self,
        state: &PoolState,
        params: &PoolParams,
        opts: &ConstructOpts,
    ) -> Result<ConstructionReport> {
        check_grid(&opts.terminal_grid)?;
        let pos = open_long_call(state, params, opts.qty)?;
        let payoff = opts
            .terminal_grid
            .iter()
            .map(|&s| {
                let net = close_at_expiry(&pos, params, s)?;
                Ok((s, vec![net, net * s]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConstructionReport {
            construction: self.name().into(),
            fields: vec![
                field("qty", pos.qty),
                field("open_price", pos.open_price),
                field("collateral_risky", pos.collateral),
                field("repayment_cap_risky", pos.qty * pos.repayment_cap),
                (
                    "repayment_rule".into(),
                    "qty * covered_call(S, tau) / S risky at close, invariant excluded".into(),
                ),
                field("k_at_open", pos.k_at_open),
            ],
            payoff_columns: vec!["net_risky".into(), "net_cash".into()],
            payoff,
        })
    }
}

struct LongPut;

impl Construction for LongPut {
    fn name(&self) -> &'static str {
        "long-put"
    }

    fn summary(&self) -> &'static str {
        "borrow tokens, denominate in stable: a vanilla put"
    }

    fn construct(
        &self,
        state: &PoolState,
        params: &PoolParams,
        opts: &ConstructOpts,
    ) -> Result<ConstructionReport> {
        check_grid(&opts.terminal_grid)?;
        let pos = open_long_put(state, params, opts.qty)?;
        let payoff = opts
            .terminal_grid
            .iter()
            .map(|&s| Ok((s, vec![close_at_expiry(&pos, params, s)?])))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConstructionReport {
            construction: self.name().into(),
            fields: vec![
                field("qty", pos.qty),
                field("open_price", pos.open_price),
                field("collateral_stable", pos.collateral),
                field("repayment_cap_stable", pos.qty * pos.repayment_cap),
                (
                    "repayment_rule".into(),
                    "qty * covered_call(S, tau) stable at close, invariant excluded".into(),
                ),
                field("k_at_open", pos.k_at_open),
            ],
            payoff_columns: vec!["net_stable".into()],
            payoff,
        })
    }
}

struct SplitBinaries;

impl Construction for SplitBinaries {
    fn name(&self) -> &'static str {
        "split-binaries"
    }

    fn summary(&self) -> &'static str {
        "sell the rights to each reserve: an asset-or-nothing put plus a cash-or-nothing call"
    }

    fn construct(
        &self,
        state: &PoolState,
        params: &PoolParams,
        opts: &ConstructOpts,
    ) -> Result<ConstructionReport> {
        check_grid(&opts.terminal_grid)?;
        let (risky_leg, stable_leg) = split_binaries(state, params, opts.qty)?;
        let payoff = opts
            .terminal_grid
            .iter()
            .map(|&s| {
                let rv = risky_leg.qty
                    * binary_leg_value(Denomination::Risky, s, params, 0.0, state.k)?;
                let sv = stable_leg.qty
                    * binary_leg_value(Denomination::Stable, s, params, 0.0, state.k)?;
                Ok((s, vec![rv, sv]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConstructionReport {
            construction: self.name().into(),
            fields: vec![
                field("qty", opts.qty),
                field("risky_leg_premium_risky", risky_leg.premium),
                field("stable_leg_premium_stable", stable_leg.premium),
                field("k_at_split", risky_leg.k_at_split),
            ],
            payoff_columns: vec!["risky_leg_cash".into(), "stable_leg_cash".into()],
            payoff,
        })
    }
}

struct ShortBinary;

impl Construction for ShortBinary {
    fn name(&self) -> &'static str {
        "short-binary"
    }

    fn summary(&self) -> &'static str {
        "paired reserve shorts: a cash-or-nothing put plus an asset-or-nothing call"
    }

    fn construct(
        &self,
        state: &PoolState,
        params: &PoolParams,
        opts: &ConstructOpts,
    ) -> Result<ConstructionReport> {
        check_grid(&opts.terminal_grid)?;
        let (stable_short, risky_short) = short_binary_pair(state, params, opts.qty)?;
        let payoff = opts
            .terminal_grid
            .iter()
            .map(|&s| {
                Ok((
                    s,
                    vec![
                        close_at_expiry(&stable_short, params, s)?,
                        close_at_expiry(&risky_short, params, s)?,
                    ],
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConstructionReport {
            construction: self.name().into(),
            fields: vec![
                field("qty", opts.qty),
                field("stable_short_premium_stable", stable_short.collateral),
                field("risky_short_premium_risky", risky_short.collateral),
                field("stable_short_repayment_cap", stable_short.qty * stable_short.repayment_cap),
                field("risky_short_repayment_cap", risky_short.qty * risky_short.repayment_cap),
                field("k_at_open", stable_short.k_at_open),
            ],
            payoff_columns: vec!["short_conc_net_stable".into(), "short_aonp_net_risky".into()],
            payoff,
        })
    }
}

struct Straddle;

impl Construction for Straddle {
    fn name(&self) -> &'static str {
        "straddle"
    }

    fn summary(&self) -> &'static str {
        "equal calls and puts from one risky budget"
    }

    fn construct(
        &self,
        state: &PoolState,
        params: &PoolParams,
        opts: &ConstructOpts,
    ) -> Result<ConstructionReport> {
        check_grid(&opts.terminal_grid)?;
        let q = compose_straddle(state, params, opts.risky_budget)?;
        let m = q.straddles;
        let payoff = opts
            .terminal_grid
            .iter()
            .map(|&s| {
                let call_risky = m * (s - params.strike).max(0.0) / s;
                let put_stable = m * (params.strike - s).max(0.0);
                Ok((s, vec![call_risky, put_stable, m * (s - params.strike).abs()]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConstructionReport {
            construction: self.name().into(),
            fields: vec![
                field("risky_budget", opts.risky_budget),
                field("straddles", m),
                field("price", q.price),
                field("call_cost_risky_per_straddle", q.call_cost_risky),
                field("put_cost_stable_per_straddle", q.put_cost_stable),
                field("unit_cost_risky", q.unit_cost_risky),
            ],
            payoff_columns: vec!["net_risky".into(), "net_stable".into(), "net_cash".into()],
            payoff,
        })
    }
}

struct LongFuture;

impl Construction for LongFuture {
    fn name(&self) -> &'static str {
        "future"
    }

    fn summary(&self) -> &'static str {
        "covered call plus call: holds one risky unit to expiry at net cost one"
    }

    fn construct(
        &self,
        state: &PoolState,
        params: &PoolParams,
        opts: &ConstructOpts,
    ) -> Result<ConstructionReport> {
        check_grid(&opts.terminal_grid)?;
        let q = compose_long_future(state, params)?;
        let payoff = opts
            .terminal_grid
            .iter()
            .map(|&s| {
                // Token settles to min(S, K) + k, the call adds max(S - K, 0).
                let v = s.min(params.strike) + state.k + (s - params.strike).max(0.0);
                Ok((s, vec![v]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConstructionReport {
            construction: self.name().into(),
            fields: vec![
                field("price", q.price),
                field("covered_call_leg_risky", q.covered_call_risky),
                field("covered_call_leg_stable", q.covered_call_stable),
                field("call_leg_risky", q.call_cost_risky),
                field("net_cost_risky", q.net_cost_risky),
            ],
            payoff_columns: vec!["payoff_cash".into()],
            payoff,
        })
    }
}

/// Every registered construction.
pub fn catalog() -> Vec<Box<dyn Construction>> {
    vec![
        Box::new(LongCall),
        Box::new(LongPut),
        Box::new(SplitBinaries),
        Box::new(ShortBinary),
        Box::new(Straddle),
        Box::new(LongFuture),
    ]
}

/// Looks a construction up by its registry name.
pub fn find(name: &str) -> Option<Box<dyn Construction>> {
    catalog().into_iter().find(|c| c.name() == name)
}

pub fn names() -> Vec<&'static str> {
    catalog().iter().map(|c| c.name()).collect()
}
