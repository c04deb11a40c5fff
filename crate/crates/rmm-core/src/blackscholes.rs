//! Black-Scholes valuation of every payoff the pool replicates: the covered
//! call, vanilla calls and puts in both denominations, and all four binary
//! options. The risk-free rate is zero throughout; no discount factors
//! appear anywhere.
//!
//! Values are returned in explicitly named denominations (risky vs cash)
//! because the constructions switch denomination between legs; mixing them
//! silently is the most likely implementation bug. Expiry is handled by
//! explicit terminal limits instead of letting `d1`/`d2` diverge.

use crate::numerics::std_normal_cdf;
use crate::{Error, Result};

/// Static option parameters: strike (stable per risky), annualized implied
/// volatility, and years to expiry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub strike: f64,
    pub sigma: f64,
    pub tau: f64,
}

impl OptionSpec {
    pub fn new(strike: f64, sigma: f64, tau: f64) -> Result<Self> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(Error::domain(format!("strike must be positive, got {strike}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::domain(format!("tau must be non-negative, got {tau}")));
        }
        Ok(OptionSpec { strike, sigma, tau })
    }

    /// Total standard deviation over the remaining life, sigma * sqrt(tau).
    pub fn vol_sqrt_tau(&self) -> f64 {
        self.sigma * self.tau.sqrt()
    }
}

/// The two moneyness arguments, with `d2 = d1 - sigma * sqrt(tau)` exactly
/// as computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moneyness {
    pub d1: f64,
    pub d2: f64,
}

/// d1 = (ln(S/K) + sigma^2 tau / 2) / (sigma sqrt(tau)), d2 = d1 - sigma sqrt(tau).
pub fn d1_d2(s: f64, spec: &OptionSpec) -> Result<Moneyness> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::domain(format!("spot must be positive, got {s}")));
    }
    if spec.tau <= 0.0 {
        return Err(Error::Expired);
    }
    let vol = spec.vol_sqrt_tau();
    let d1 = ((s / spec.strike).ln() + 0.5 * vol * vol) / vol;
    Ok(Moneyness { d1, d2: d1 - vol })
}

/// Covered call: long one risky unit plus short one call. Cash value
/// S * CDF(-d1) + K * CDF(d2) for tau > 0, min(S, K) at expiry.
pub fn covered_call_value(s: f64, spec: &OptionSpec) -> Result<f64> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::domain(format!("spot must be positive, got {s}")));
    }
    if spec.tau <= 0.0 {
        return Ok(s.min(spec.strike));
    }
    let m = d1_d2(s, spec)?;
    Ok(s * std_normal_cdf(-m.d1)? + spec.strike * std_normal_cdf(m.d2)?)
}

/// Vanilla option values. `call_risky` is the call denominated in the risky
/// asset; `call_cash` and `put_cash` are stable-asset values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanillaValues {
    pub call_risky: f64,
    pub call_cash: f64,
    pub put_cash: f64,
}

pub fn vanilla_values(s: f64, spec: &OptionSpec) -> Result<VanillaValues> {
    let m = d1_d2(s, spec)?;
    let call_risky = std_normal_cdf(m.d1)? - (spec.strike / s) * std_normal_cdf(m.d2)?;
    let put_cash = spec.strike * std_normal_cdf(-m.d2)? - s * std_normal_cdf(-m.d1)?;
    Ok(VanillaValues { call_risky, call_cash: s * call_risky, put_cash })
}

/// Terminal (tau = 0) vanilla payoffs.
pub fn terminal_vanilla_values(s: f64, strike: f64) -> VanillaValues {
    let call_cash = (s - strike).max(0.0);
    VanillaValues { call_risky: call_cash / s, call_cash, put_cash: (strike - s).max(0.0) }
}

/// Binary option values. `conc`/`conp` pay one stable unit; the
/// asset-or-nothing legs are quoted in cash.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryValues {
    pub conc: f64,
    pub conp: f64,
    pub aonp_cash: f64,
    pub aonc_cash: f64,
}

pub fn binary_values(s: f64, spec: &OptionSpec) -> Result<BinaryValues> {
    let m = d1_d2(s, spec)?;
    let conc = std_normal_cdf(m.d2)?;
    let aonc_cash = s * std_normal_cdf(m.d1)?;
    Ok(BinaryValues { conc, conp: 1.0 - conc, aonp_cash: s - aonc_cash, aonc_cash })
}

/// Terminal binary payoffs. The tie at S = K pays the cash legs, matching
/// the pool's settlement convention of denominating in stable at the strike.
pub fn terminal_binary_values(s: f64, strike: f64) -> BinaryValues {
    let above = s >= strike;
    BinaryValues {
        conc: if above { 1.0 } else { 0.0 },
        conp: if above { 0.0 } else { 1.0 },
        aonp_cash: if above { 0.0 } else { s },
        aonc_cash: if above { s } else { 0.0 },
    }
}
