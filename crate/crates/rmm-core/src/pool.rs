//! The covered-call replicating pool: trading function, invariant
//! bookkeeping, swaps with fees, reported price, time decay, settlement, and
//! closed-form arbitrage alignment.
//!
//! Reserves are tracked per unit of liquidity; total amounts scale linearly
//! with `liquidity`. The trading curve fixes the stable reserve as an
//! explicit function of the risky reserve,
//!
//! ```text
//! Ry = K * CDF(CDF^-1(1 - Rx) - sigma * sqrt(tau)) + k
//! ```
//!
//! so swap outputs come in closed form from the level set; no iterative
//! solving is needed. The reported price
//!
//! ```text
//! S(Rx) = K * exp(CDF^-1(1 - Rx) * sigma * sqrt(tau) - sigma^2 * tau / 2)
//! ```
//!
//! equals the marginal price -dRy/dRx along the curve.

use serde::{Deserialize, Serialize};

use crate::blackscholes::OptionSpec;
use crate::numerics::{std_normal_cdf, std_normal_inv_cdf};
use crate::{blackscholes, Error, Result};

/// Risky reserves are clamped into this band before any quantile call;
/// trades that would exit it fail loudly.
pub const RX_MIN: f64 = 1e-9;
pub const RX_MAX: f64 = 1.0 - 1e-9;

/// Probabilities fed to the quantile are clamped into this band.
const P_MIN: f64 = 1e-12;
const P_MAX: f64 = 1.0 - 1e-12;

/// Absolute slack for reserve-band checks. Trades that target the band
/// edge itself reconstruct the boundary through a quantile round-trip,
/// which can land an ulp outside; anything further out still fails loudly.
const BAND_SLACK: f64 = 1e-12;

/// Static configuration of one pool: strike, implied volatility, expiry
/// time (years), and the fraction of each trade's input retained after the
/// fee (`gamma = 1` means fee-free, `gamma < 1` withholds `1 - gamma`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolParams {
    pub strike: f64,
    pub sigma: f64,
    pub expiry: f64,
    pub gamma: f64,
}

/// Default fee retention; the optimal regime is external to this crate, so
/// the fee stays a configurable parameter.
pub const DEFAULT_GAMMA: f64 = 0.997;

impl PoolParams {
    pub fn new(strike: f64, sigma: f64, expiry: f64, gamma: f64) -> Result<Self> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(Error::domain(format!("strike must be positive, got {strike}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        if !(expiry.is_finite() && expiry > 0.0) {
            return Err(Error::domain(format!("expiry must be positive, got {expiry}")));
        }
        if !(gamma.is_finite() && gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::domain(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        Ok(PoolParams { strike, sigma, expiry, gamma })
    }

    /// Remaining time to expiry at `t`, floored at zero.
    pub fn tau(&self, t: f64) -> f64 {
        (self.expiry - t).max(0.0)
    }

    /// Option parameters as seen from time `t`.
    pub fn option_spec(&self, t: f64) -> Result<OptionSpec> {
        OptionSpec::new(self.strike, self.sigma, self.tau(t))
    }
}

/// Evolving pool state. `rx` and `ry` are reserves per unit liquidity, `k`
/// is the trading-function value (the replication error of the pool), `t`
/// the current time in years, `liquidity` the outstanding liquidity units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolState {
    pub rx: f64,
    pub ry: f64,
    pub k: f64,
    pub t: f64,
    pub liquidity: f64,
}

/// Trade direction: which asset goes in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwapDirection {
    RiskyIn,
    StableIn,
}

/// Record of one executed swap. Amounts are totals (scaled by liquidity);
/// the invariant values are per unit liquidity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapReceipt {
    pub direction: SwapDirection,
    pub amount_in: f64,
    pub fee_paid: f64,
    pub amount_out: f64,
    pub k_before: f64,
    pub k_after: f64,
    pub price_after: f64,
}

/// Terminal payout per unit liquidity in the pool's promised denomination,
/// plus the signed gap between the physical reserve value and that payout
/// (the terminal replication error, logged rather than hidden).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settlement {
    pub risky_out: f64,
    pub stable_out: f64,
    pub terminal_error: f64,
}

fn clamp_rx(rx: f64) -> f64 {
    rx.clamp(RX_MIN, RX_MAX)
}

/// Risky reserve per unit liquidity that reports the given price:
/// Rx = CDF(-ln(S/K)/(sigma sqrt(tau)) - sigma sqrt(tau)/2), clamped into
/// the supported band.
pub fn risky_from_price(price: f64, params: &PoolParams, t: f64) -> Result<f64> {
    if !(price.is_finite() && price > 0.0) {
        return Err(Error::domain(format!("price must be positive, got {price}")));
    }
    if t >= params.expiry {
        return Err(Error::Expired);
    }
    let vol = params.sigma * params.tau(t).sqrt();
    let rx = std_normal_cdf(-(price / params.strike).ln() / vol - 0.5 * vol)?;
    Ok(clamp_rx(rx))
}

/// Stable reserve on the level set `k` at the given risky reserve:
/// Ry = K * CDF(CDF^-1(1 - Rx) - sigma sqrt(tau)) + k.
pub fn stable_from_risky(rx: f64, k: f64, params: &PoolParams, t: f64) -> Result<f64> {
    if !(rx.is_finite() && rx > 0.0 && rx < 1.0) {
        return Err(Error::domain(format!("risky reserve must lie in (0, 1), got {rx}")));
    }
    if t > params.expiry {
        return Err(Error::Expired);
    }
    let tau = params.tau(t);
    if tau == 0.0 {
        return Ok(params.strike * (1.0 - rx) + k);
    }
    let rx = clamp_rx(rx);
    let u = std_normal_inv_cdf(1.0 - rx)?;
    Ok(params.strike * std_normal_cdf(u - params.sigma * tau.sqrt())? + k)
}

impl PoolState {
    /// Pool initialized on the zero-invariant curve at the given price.
    pub fn new_aligned(params: &PoolParams, price: f64, t: f64, liquidity: f64) -> Result<Self> {
        if !(liquidity.is_finite() && liquidity > 0.0) {
            return Err(Error::domain(format!("liquidity must be positive, got {liquidity}")));
        }
        let rx = risky_from_price(price, params, t)?;
        let ry = stable_from_risky(rx, 0.0, params, t)?;
        Ok(PoolState { rx, ry, k: 0.0, t, liquidity })
    }

    /// Pool initialized at explicit per-unit reserves; the invariant is
    /// derived from the trading function, not forced to zero.
    pub fn from_reserves(
        params: &PoolParams,
        rx: f64,
        ry: f64,
        t: f64,
        liquidity: f64,
    ) -> Result<Self> {
        if !(liquidity.is_finite() && liquidity > 0.0) {
            return Err(Error::domain(format!("liquidity must be positive, got {liquidity}")));
        }
        if !(rx >= RX_MIN && rx <= RX_MAX) {
            return Err(Error::LiquidityBound);
        }
        if !(ry.is_finite() && ry >= 0.0) {
            return Err(Error::domain(format!("stable reserve must be non-negative, got {ry}")));
        }
        if t >= params.expiry {
            return Err(Error::Expired);
        }
        let k = ry - stable_from_risky(rx, 0.0, params, t)?;
        Ok(PoolState { rx, ry, k, t, liquidity })
    }

    pub fn is_expired(&self, params: &PoolParams) -> bool {
        self.t >= params.expiry
    }

    /// Re-derives the invariant from the stored reserves. The stored `k` is
    /// maintained by every mutation; this is the consistency check.
    pub fn invariant(&self, params: &PoolParams) -> Result<f64> {
        Ok(self.ry - stable_from_risky(self.rx, 0.0, params, self.t)?)
    }

    /// Reported (marginal) price of the pool.
    pub fn report_price(&self, params: &PoolParams) -> Result<f64> {
        if self.is_expired(params) {
            return Err(Error::Expired);
        }
        let vol = params.sigma * params.tau(self.t).sqrt();
        let u = std_normal_inv_cdf(1.0 - clamp_rx(self.rx))?;
        Ok(params.strike * (u * vol - 0.5 * vol * vol).exp())
    }

    /// Mark of one liquidity unit at an external price: the covered-call
    /// value plus the invariant.
    pub fn lpt_value(&self, params: &PoolParams, price: f64) -> Result<f64> {
        if self.is_expired(params) {
            return Err(Error::Expired);
        }
        let spec = params.option_spec(self.t)?;
        Ok(blackscholes::covered_call_value(price, &spec)? + self.k)
    }

    /// Executes a swap of `amount_in` total units of the input asset.
    ///
    /// The fee `(1 - gamma) * amount_in` is withheld from the input and
    /// left in the reserves, so the invariant grows by the fee's marginal
    /// contribution. Output per unit liquidity, with `dx = amount_in /
    /// liquidity` credited at `gamma * dx`:
    ///
    /// * risky in:  `out = ry - curve(rx + gamma * dx)`, reserves move to
    ///   `(rx + dx, ry - out)`;
    /// * stable in: `out = rx - curve_inv(ry + gamma * dy)`, reserves move
    ///   to `(rx - out, ry + dy)`, where
    ///   `curve_inv(y) = 1 - CDF(CDF^-1((y - k)/K) + sigma sqrt(tau))`.
    pub fn swap(
        &self,
        params: &PoolParams,
        direction: SwapDirection,
        amount_in: f64,
    ) -> Result<(PoolState, SwapReceipt)> {
        if self.is_expired(params) {
            return Err(Error::Expired);
        }
        if !(amount_in.is_finite() && amount_in > 0.0) {
            return Err(Error::domain(format!("amount_in must be positive, got {amount_in}")));
        }
        let gamma = params.gamma;
        let din = amount_in / self.liquidity;
        let (rx_post, ry_post, out_per) = match direction {
            SwapDirection::RiskyIn => {
                let rx_post = self.rx + din;
                let rx_credit = self.rx + gamma * din;
                if rx_post > RX_MAX + BAND_SLACK || rx_credit > RX_MAX + BAND_SLACK {
                    return Err(Error::LiquidityBound);
                }
                let rx_post = rx_post.min(RX_MAX);
                let rx_credit = rx_credit.min(RX_MAX);
                let ry_target = stable_from_risky(rx_credit, self.k, params, self.t)?;
                let out = self.ry - ry_target;
                if out < 0.0 {
                    return Err(Error::LiquidityBound);
                }
                (rx_post, self.ry - out, out)
            }
            SwapDirection::StableIn => {
                let ry_credit = self.ry + gamma * din;
                let p = (ry_credit - self.k) / params.strike;
                if !(P_MIN..=P_MAX).contains(&p) {
                    return Err(Error::LiquidityBound);
                }
                let vol = params.sigma * params.tau(self.t).sqrt();
                let rx_target = 1.0 - std_normal_cdf(std_normal_inv_cdf(p)? + vol)?;
                if !(RX_MIN - BAND_SLACK..=RX_MAX + BAND_SLACK).contains(&rx_target) {
                    return Err(Error::LiquidityBound);
                }
                let rx_target = rx_target.clamp(RX_MIN, RX_MAX);
                let out = self.rx - rx_target;
                if out < 0.0 {
                    return Err(Error::LiquidityBound);
                }
                (rx_target, self.ry + din, out)
            }
        };
        let k_after = ry_post - stable_from_risky(rx_post, 0.0, params, self.t)?;
        let post = PoolState { rx: rx_post, ry: ry_post, k: k_after, t: self.t, liquidity: self.liquidity };
        let receipt = SwapReceipt {
            direction,
            amount_in,
            fee_paid: (1.0 - gamma) * amount_in,
            amount_out: out_per * self.liquidity,
            k_before: self.k,
            k_after,
            price_after: post.report_price(params)?,
        };
        Ok((post, receipt))
    }

    /// Advances pool time with reserves fixed, re-deriving the invariant at
    /// the shorter tenor (it never increases under this operation).
    /// Stepping past the expiry clamps to it and marks the pool expired.
    pub fn advance_time(&self, params: &PoolParams, dt: f64) -> Result<PoolState> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::domain(format!("dt must be positive, got {dt}")));
        }
        if self.is_expired(params) {
            return Err(Error::Expired);
        }
        let t = (self.t + dt).min(params.expiry);
        let k = self.ry - stable_from_risky(self.rx, 0.0, params, t)?;
        Ok(PoolState { rx: self.rx, ry: self.ry, k, t, liquidity: self.liquidity })
    }

    /// Trades the pool to the edge of the fee-adjusted no-arbitrage band
    /// around `market_price`, using the closed-form reserve target. Returns
    /// `None` for the receipt when the pool already sits inside the band
    /// `[gamma * market, market / gamma]` and no profitable trade exists.
    pub fn arbitrage_align(
        &self,
        params: &PoolParams,
        market_price: f64,
    ) -> Result<(PoolState, Option<SwapReceipt>)> {
        if !(market_price.is_finite() && market_price > 0.0) {
            return Err(Error::domain(format!("market price must be positive, got {market_price}")));
        }
        if self.is_expired(params) {
            return Err(Error::Expired);
        }
        let gamma = params.gamma;
        let pool_price = self.report_price(params)?;
        // The reported price round-trips the reserve inversion to about
        // 1e-9 relative, so the band check carries the same slack.
        let band_lo = gamma * market_price * (1.0 - 1e-9);
        let band_hi = market_price / gamma * (1.0 + 1e-9);
        if pool_price >= band_lo && pool_price <= band_hi {
            return Ok((*self, None));
        }
        if pool_price > band_hi {
            // Pool overpriced: the arbitrageur sells risky until the
            // credited marginal rate gamma * S equals the market price.
            let rx_credit_target = risky_from_price(market_price / gamma, params, self.t)?;
            let mut din = (rx_credit_target - self.rx) / gamma;
            // With extreme fees the uncredited remainder can overshoot the
            // band's far edge; cap the input so the post price stays inside.
            let rx_floor_target = risky_from_price(gamma * market_price, params, self.t)?;
            if self.rx + din > rx_floor_target {
                din = rx_floor_target - self.rx;
            }
            if din * self.liquidity <= 0.0 {
                return Ok((*self, None));
            }
            let (post, receipt) = self.swap(params, SwapDirection::RiskyIn, din * self.liquidity)?;
            Ok((post, Some(receipt)))
        } else {
            // Pool underpriced: the arbitrageur buys risky; the credited
            // stable target leaves the post price at the band's lower edge.
            let rx_target = risky_from_price(gamma * market_price, params, self.t)?;
            let ry_credit_target = stable_from_risky(rx_target, self.k, params, self.t)?;
            let din = (ry_credit_target - self.ry) / gamma;
            if din * self.liquidity <= 0.0 {
                return Ok((*self, None));
            }
            let (post, receipt) = self.swap(params, SwapDirection::StableIn, din * self.liquidity)?;
            Ok((post, Some(receipt)))
        }
    }

    /// Terminal payout per unit liquidity. Above the strike (ties included)
    /// the token denominates in stable as `K + k`; below it, in risky with
    /// the invariant reported as a signed stable adjustment floored at the
    /// physical stable reserve. The discrepancy between the reserve value
    /// and the payout at the terminal price is returned, not hidden.
    pub fn settle(&self, params: &PoolParams, terminal_price: f64) -> Result<Settlement> {
        if !self.is_expired(params) {
            return Err(Error::NotExpired);
        }
        if !(terminal_price.is_finite() && terminal_price > 0.0) {
            return Err(Error::domain(format!(
                "terminal price must be positive, got {terminal_price}"
            )));
        }
        let reserve_value = terminal_price * self.rx + self.ry;
        let (risky_out, stable_out) = if terminal_price >= params.strike {
            (0.0, params.strike + self.k)
        } else {
            (1.0, self.k.max(-self.ry))
        };
        let payout_value = terminal_price * risky_out + stable_out;
        Ok(Settlement { risky_out, stable_out, terminal_error: reserve_value - payout_value })
    }

    /// Bit-stable snapshot of params plus state.
    pub fn snapshot(&self, params: &PoolParams) -> PoolSnapshot {
        PoolSnapshot {
            strike: params.strike,
            sigma: params.sigma,
            expiry: params.expiry,
            gamma: params.gamma,
            rx: self.rx,
            ry: self.ry,
            k: self.k,
            t: self.t,
            liquidity: self.liquidity,
        }
    }
}

/// JSON snapshot of one pool; every real is encoded as a decimal string so
/// snapshots are bit-stable across platforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSnapshot {
    #[serde(rename = "K", with = "crate::decimal")]
    pub strike: f64,
    #[serde(with = "crate::decimal")]
    pub sigma: f64,
    #[serde(rename = "T", with = "crate::decimal")]
    pub expiry: f64,
    #[serde(with = "crate::decimal")]
    pub gamma: f64,
    #[serde(rename = "Rx", with = "crate::decimal")]
    pub rx: f64,
    #[serde(rename = "Ry", with = "crate::decimal")]
    pub ry: f64,
    #[serde(with = "crate::decimal")]
    pub k: f64,
    #[serde(with = "crate::decimal")]
    pub t: f64,
    #[serde(rename = "L", with = "crate::decimal")]
    pub liquidity: f64,
}

impl PoolSnapshot {
    pub fn into_parts(self) -> Result<(PoolParams, PoolState)> {
        let params = PoolParams::new(self.strike, self.sigma, self.expiry, self.gamma)?;
        let state = PoolState {
            rx: self.rx,
            ry: self.ry,
            k: self.k,
            t: self.t,
            liquidity: self.liquidity,
        };
        Ok((params, state))
    }
}
