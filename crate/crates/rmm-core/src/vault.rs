//! Theta-vault simulation: seeded geometric Brownian price paths, an
//! arbitrageur that realigns the pool at every step, per-epoch fee and
//! loss accounting, and the two rebalance strategies (external swap vs
//! intentional mispricing) whose losses scale differently with size.
//!
//! Every run is deterministic given its seed and configuration. Epoch
//! accounting closes exactly: initial mark + price drift + fees - losses =
//! terminal mark, where drift is the exogenous re-marking of held inventory
//! and losses are the arbitrageurs' extraction net of fees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::pool::{self, PoolParams, PoolState, SwapDirection, SwapReceipt};
use crate::{Error, Result};

/// Timestamped exogenous market prices plus the model that generated them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePath {
    pub times: Vec<f64>,
    pub prices: Vec<f64>,
    pub seed: u64,
    pub s0: f64,
    pub drift: f64,
    pub sigma_market: f64,
    pub steps: usize,
}

/// Geometric Brownian motion path on `[0, horizon]` with `steps` uniform
/// increments. Log-increments are i.i.d. normal with mean
/// `(mu - sigma^2/2) dt` and variance `sigma^2 dt`; the same seed always
/// reproduces the same path.
pub fn simulate_gbm(
    s0: f64,
    drift: f64,
    sigma_market: f64,
    horizon: f64,
    steps: usize,
    seed: u64,
) -> Result<PricePath> {
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(Error::domain(format!("initial price must be positive, got {s0}")));
    }
    if !(sigma_market.is_finite() && sigma_market >= 0.0) {
        return Err(Error::domain(format!("market volatility must be non-negative, got {sigma_market}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    if steps == 0 {
        return Err(Error::domain("steps must be at least 1"));
    }
    let dt = horizon / steps as f64;
    let loc = (drift - 0.5 * sigma_market * sigma_market) * dt;
    let scale = sigma_market * dt.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::with_capacity(steps + 1);
    let mut prices = Vec::with_capacity(steps + 1);
    let mut price = s0;
    times.push(0.0);
    prices.push(price);
    for i in 1..=steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        price *= (loc + scale * z).exp();
        times.push(horizon * i as f64 / steps as f64);
        prices.push(price);
    }
    Ok(PricePath { times, prices, seed, s0, drift, sigma_market, steps })
}

/// External-market price impact for the swap-rebalance strategy. A trade
/// of stable-denominated value `v` receives `v / (1 + (v / depth)^e)`;
/// the loss is superlinear in size, zero at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlippageModel {
    pub depth: f64,
    pub exponent: f64,
}

impl SlippageModel {
    pub fn new(depth: f64, exponent: f64) -> Result<Self> {
        if !(depth.is_finite() && depth > 0.0) {
            return Err(Error::domain(format!("depth must be positive, got {depth}")));
        }
        if !(exponent.is_finite() && exponent >= 1.0) {
            return Err(Error::domain(format!("impact exponent must be >= 1, got {exponent}")));
        }
        Ok(SlippageModel { depth, exponent })
    }

    /// Value received for an input of value `v`.
    pub fn received(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        v / (1.0 + (v / self.depth).powf(self.exponent))
    }

    /// Value lost to impact for an input of value `v`.
    pub fn loss(&self, v: f64) -> f64 {
        v - self.received(v)
    }
}

impl Default for SlippageModel {
    fn default() -> Self {
        SlippageModel { depth: 1e6, exponent: 1.0 }
    }
}

/// Idle vault inventory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaultHoldings {
    pub risky: f64,
    pub stable: f64,
}

impl VaultHoldings {
    pub fn new(risky: f64, stable: f64) -> Result<Self> {
        if !(risky.is_finite() && stable.is_finite() && risky >= 0.0 && stable >= 0.0) {
            return Err(Error::domain("holdings must be finite and non-negative"));
        }
        Ok(VaultHoldings { risky, stable })
    }

    pub fn value_at(&self, price: f64) -> f64 {
        price * self.risky + self.stable
    }

    pub fn scaled(&self, factor: f64) -> VaultHoldings {
        VaultHoldings { risky: self.risky * factor, stable: self.stable * factor }
    }
}

/// Per-epoch report. The schema-named fields come first; the remaining
/// fields expose the accounting identity and the settlement detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub seed: u64,
    #[serde(with = "crate::decimal")]
    pub gamma: f64,
    #[serde(with = "crate::decimal")]
    pub fees: f64,
    #[serde(with = "crate::decimal")]
    pub loss: f64,
    #[serde(with = "crate::decimal")]
    pub terminal_k: f64,
    #[serde(with = "crate::decimal")]
    pub replication_gap: f64,
    #[serde(with = "crate::decimal::vec")]
    pub k_trace: Vec<f64>,
    #[serde(with = "crate::decimal")]
    pub mark_initial: f64,
    #[serde(with = "crate::decimal")]
    pub mark_terminal: f64,
    #[serde(with = "crate::decimal")]
    pub price_drift: f64,
    pub trades: u32,
    #[serde(with = "crate::decimal")]
    pub settle_risky: f64,
    #[serde(with = "crate::decimal")]
    pub settle_stable: f64,
    #[serde(with = "crate::decimal")]
    pub terminal_error: f64,
    #[serde(with = "crate::decimal")]
    pub minted_liquidity: f64,
}

fn fee_and_loss_at_market(receipt: &SwapReceipt, market_price: f64) -> (f64, f64) {
    let (in_value, out_value) = match receipt.direction {
        SwapDirection::RiskyIn => (receipt.amount_in * market_price, receipt.amount_out),
        SwapDirection::StableIn => (receipt.amount_in, receipt.amount_out * market_price),
    };
    let fee = in_value * (receipt.fee_paid / receipt.amount_in);
    // loss = value paid out beyond the credited (post-fee) input value;
    // together with the fee this makes the pool's value change exactly
    // fee - loss, so epoch accounting telescopes.
    let loss = out_value - (in_value - fee);
    (fee, loss)
}

/// Runs one covered-call epoch: mint on the zero-invariant curve at the
/// path's first price, then at every step advance time and let the
/// arbitrageur realign against the path price, and finally withdraw the
/// reserves at expiry. The report carries the invariant trace, the fee and
/// loss totals marked at trade-time prices, the idealized settlement, and
/// the replication gap (terminal token value minus the terminal
/// covered-call payoff, per liquidity unit).
pub fn run_epoch(
    holdings: &VaultHoldings,
    params: &PoolParams,
    path: &PricePath,
) -> Result<(VaultHoldings, EpochReport)> {
    if path.times.len() < 2 || path.times.len() != path.prices.len() {
        return Err(Error::TimeMismatch);
    }
    let t0 = path.times[0];
    if t0 >= params.expiry || (path.times[path.times.len() - 1] - params.expiry).abs() > 1e-9 {
        return Err(Error::TimeMismatch);
    }

    let s0 = path.prices[0];
    let rx0 = pool::risky_from_price(s0, params, t0)?;
    let ry0 = pool::stable_from_risky(rx0, 0.0, params, t0)?;
    let liquidity = (holdings.risky / rx0).min(holdings.stable / ry0);
    if !(liquidity.is_finite() && liquidity > 0.0) {
        return Err(Error::domain("vault needs both assets to mint liquidity"));
    }
    let idle = VaultHoldings {
        risky: (holdings.risky - liquidity * rx0).max(0.0),
        stable: (holdings.stable - liquidity * ry0).max(0.0),
    };
    let mut state = PoolState { rx: rx0, ry: ry0, k: 0.0, t: t0, liquidity };

    let mark_initial = holdings.value_at(s0);
    let mut fees = 0.0;
    let mut losses = 0.0;
    let mut drift = 0.0;
    let mut trades = 0u32;
    let mut k_trace = Vec::with_capacity(path.times.len());
    k_trace.push(state.k);

    for i in 1..path.times.len() {
        let price = path.prices[i];
        drift += (state.liquidity * state.rx + idle.risky) * (price - path.prices[i - 1]);
        let dt = path.times[i] - path.times[i - 1];
        if dt <= 0.0 {
            return Err(Error::TimeMismatch);
        }
        state = state.advance_time(params, dt)?;
        if !state.is_expired(params) {
            let (next, receipt) = state.arbitrage_align(params, price)?;
            state = next;
            if let Some(r) = receipt {
                let (fee, loss) = fee_and_loss_at_market(&r, price);
                fees += fee;
                losses += loss;
                trades += 1;
            }
        }
        k_trace.push(state.k);
    }

    let terminal_price = *path.prices.last().unwrap();
    let settlement = state.settle(params, terminal_price)?;
    let replication_gap =
        terminal_price * state.rx + state.ry - terminal_price.min(params.strike);

    // The vault owns the whole pool, so it withdraws the physical reserves;
    // the idealized settlement is reported alongside the terminal error.
    let out = VaultHoldings {
        risky: idle.risky + state.liquidity * state.rx,
        stable: idle.stable + state.liquidity * state.ry,
    };
    let report = EpochReport {
        seed: path.seed,
        gamma: params.gamma,
        fees,
        loss: losses,
        terminal_k: state.k,
        replication_gap,
        k_trace,
        mark_initial,
        mark_terminal: out.value_at(terminal_price),
        price_drift: drift,
        trades,
        settle_risky: settlement.risky_out,
        settle_stable: settlement.stable_out,
        terminal_error: settlement.terminal_error,
        minted_liquidity: liquidity,
    };
    Ok((out, report))
}

/// Outcome of one rebalance into a fresh pool.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloverReport {
    /// Holdings value before minus pool value after, both at the market
    /// price.
    pub loss: f64,
    pub minted_liquidity: f64,
    /// Pool price immediately after minting, before any arbitrage.
    pub initial_price: f64,
    /// The aligning trade, when one was needed.
    pub receipt: Option<SwapReceipt>,
}

fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, iterations: usize) -> f64 {
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Rebalances by intentionally mispricing the next pool: the initial
/// reserves are placed on its zero-invariant curve at the unique point
/// whose reserve ratio equals the vault's holdings ratio, so every unit of
/// inventory mints. The arbitrageur then realigns the price; the loss is
/// their extraction, and it scales linearly with the holdings.
pub fn rollover_mispricing(
    holdings: &VaultHoldings,
    params: &PoolParams,
    market_price: f64,
    t: f64,
) -> Result<(PoolState, RolloverReport)> {
    if holdings.risky <= 0.0 || holdings.stable <= 0.0 {
        return Err(Error::domain("mispricing rollover needs both assets"));
    }
    if t >= params.expiry {
        return Err(Error::Expired);
    }
    let ratio = holdings.stable / holdings.risky;
    let curve_ratio = |rx: f64| -> f64 {
        let ry = pool::stable_from_risky(rx, 0.0, params, t).unwrap_or(f64::NAN);
        ry / rx
    };
    // The curve ratio is strictly decreasing in rx; reject ratios outside
    // the representable reserve band instead of clamping silently.
    if !(ratio < curve_ratio(pool::RX_MIN) && ratio > curve_ratio(pool::RX_MAX)) {
        return Err(Error::domain(format!(
            "holdings ratio {ratio} outside the representable reserve domain"
        )));
    }
    let rx = bisect(|x| curve_ratio(x) - ratio, pool::RX_MIN, pool::RX_MAX, 100);
    let liquidity = holdings.risky / rx;
    let state = PoolState::from_reserves(params, rx, holdings.stable / liquidity, t, liquidity)?;
    let initial_price = state.report_price(params)?;

    let value_before = holdings.value_at(market_price);
    let (aligned, receipt) = state.arbitrage_align(params, market_price)?;
    let value_after =
        aligned.liquidity * (market_price * aligned.rx + aligned.ry);
    Ok((
        aligned,
        RolloverReport {
            loss: value_before - value_after,
            minted_liquidity: liquidity,
            initial_price,
            receipt,
        },
    ))
}

/// Rebalances by swapping on the external market to the exact mint ratio
/// at the market price, then minting on the zero-invariant curve. The loss
/// is the slippage, which grows superlinearly with trade size.
pub fn rollover_swap(
    holdings: &VaultHoldings,
    params: &PoolParams,
    market_price: f64,
    t: f64,
    slippage: &SlippageModel,
) -> Result<(PoolState, RolloverReport)> {
    if !(market_price.is_finite() && market_price > 0.0) {
        return Err(Error::domain(format!("market price must be positive, got {market_price}")));
    }
    if t >= params.expiry {
        return Err(Error::Expired);
    }
    if holdings.value_at(market_price) <= 0.0 {
        return Err(Error::domain("vault holds no value to roll"));
    }
    let rx_target = pool::risky_from_price(market_price, params, t)?;
    let ry_target = pool::stable_from_risky(rx_target, 0.0, params, t)?;
    let target_ratio = ry_target / rx_target;

    let (x, y) = (holdings.risky, holdings.stable);
    let ratio = y / x;
    let (x_post, y_post) = if !ratio.is_finite() || (ratio - target_ratio).abs() > 1e-14 * target_ratio {
        if y < target_ratio * x {
            // Too much risky: sell `a` risky for stable.
            let a = bisect(
                |a| target_ratio * (x - a) - (y + slippage.received(a * market_price)),
                0.0,
                x,
                100,
            );
            (x - a, y + slippage.received(a * market_price))
        } else {
            // Too much stable: sell `b` stable for risky.
            let b = bisect(
                |b| (y - b) - target_ratio * (x + slippage.received(b) / market_price),
                0.0,
                y,
                100,
            );
            (x + slippage.received(b) / market_price, y - b)
        }
    } else {
        (x, y)
    };

    let liquidity = x_post / rx_target;
    let state =
        PoolState::from_reserves(params, rx_target, y_post / liquidity, t, liquidity)?;
    let value_before = holdings.value_at(market_price);
    let value_after = liquidity * (market_price * state.rx + state.ry);
    Ok((
        state,
        RolloverReport {
            loss: value_before - value_after,
            minted_liquidity: liquidity,
            initial_price: state.report_price(params)?,
            receipt: None,
        },
    ))
}

/// A rebalance strategy selectable by name at runtime.
pub trait RolloverStrategy: Sync + Send {
    fn name(&self) -> &'static str;
    fn rollover(
        &self,
        holdings: &VaultHoldings,
        params: &PoolParams,
        market_price: f64,
        t: f64,
    ) -> Result<(PoolState, RolloverReport)>;
}

pub struct MispricingRollover;

impl RolloverStrategy for MispricingRollover {
    fn name(&self) -> &'static str {
        "mispricing"
    }

    fn rollover(
        &self,
        holdings: &VaultHoldings,
        params: &PoolParams,
        market_price: f64,
        t: f64,
    ) -> Result<(PoolState, RolloverReport)> {
        rollover_mispricing(holdings, params, market_price, t)
    }
}

pub struct SwapRollover {
    pub slippage: SlippageModel,
}

impl RolloverStrategy for SwapRollover {
    fn name(&self) -> &'static str {
        "swap"
    }

    fn rollover(
        &self,
        holdings: &VaultHoldings,
        params: &PoolParams,
        market_price: f64,
        t: f64,
    ) -> Result<(PoolState, RolloverReport)> {
        rollover_swap(holdings, params, market_price, t, &self.slippage)
    }
}

pub const ROLLOVER_STRATEGY_NAMES: [&str; 2] = ["mispricing", "swap"];

/// Looks a strategy up by name; the swap strategy binds the given slippage
/// model.
pub fn rollover_strategy(name: &str, slippage: SlippageModel) -> Option<Box<dyn RolloverStrategy>> {
    match name {
        "mispricing" => Some(Box::new(MispricingRollover)),
        "swap" => Some(Box::new(SwapRollover { slippage })),
        _ => None,
    }
}

/// Rolling vault bookkeeping across epochs. The reconciliation invariant
/// `start mark + price drift + fees - losses = current mark` is exposed so
/// simulations can assert closure after every epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct VaultState {
    pub holdings: VaultHoldings,
    pub pool: Option<(PoolParams, PoolState)>,
    pub epoch: u32,
    pub fees_captured: f64,
    pub rebalance_loss: f64,
    pub price_drift: f64,
    pub start_mark: Option<f64>,
}

impl VaultState {
    pub fn new(holdings: VaultHoldings) -> Self {
        VaultState {
            holdings,
            pool: None,
            epoch: 0,
            fees_captured: 0.0,
            rebalance_loss: 0.0,
            price_drift: 0.0,
            start_mark: None,
        }
    }

    /// Runs one epoch from the current idle holdings.
    pub fn run_epoch(&mut self, params: &PoolParams, path: &PricePath) -> Result<EpochReport> {
        if self.pool.is_some() {
            return Err(Error::domain("vault is already deployed in a pool"));
        }
        if self.start_mark.is_none() {
            self.start_mark = Some(self.holdings.value_at(path.prices[0]));
        }
        let (out, report) = run_epoch(&self.holdings, params, path)?;
        self.holdings = out;
        self.epoch += 1;
        self.fees_captured += report.fees;
        self.rebalance_loss += report.loss;
        self.price_drift += report.price_drift;
        Ok(report)
    }

    /// Deploys the idle holdings into a fresh pool with the given strategy.
    pub fn rollover(
        &mut self,
        strategy: &dyn RolloverStrategy,
        params: &PoolParams,
        market_price: f64,
        t: f64,
    ) -> Result<RolloverReport> {
        if self.pool.is_some() {
            return Err(Error::domain("vault is already deployed in a pool"));
        }
        let (state, report) = strategy.rollover(&self.holdings, params, market_price, t)?;
        self.rebalance_loss += report.loss;
        self.holdings = VaultHoldings { risky: 0.0, stable: 0.0 };
        self.pool = Some((*params, state));
        Ok(report)
    }

    /// Withdraws the pool reserves back into idle holdings.
    pub fn dissolve_pool(&mut self) {
        if let Some((_, state)) = self.pool.take() {
            self.holdings.risky += state.liquidity * state.rx;
            self.holdings.stable += state.liquidity * state.ry;
        }
    }

    /// Mark of everything the vault owns at an external price.
    pub fn mark(&self, price: f64) -> f64 {
        let pool_value = self
            .pool
            .as_ref()
            .map(|(_, s)| s.liquidity * (price * s.rx + s.ry))
            .unwrap_or(0.0);
        self.holdings.value_at(price) + pool_value
    }

    /// Checks the loss-accounting identity at the given mark price.
    pub fn reconciles(&self, price: f64, rel_tol: f64) -> bool {
        match self.start_mark {
            None => true,
            Some(start) => {
                let lhs = start + self.price_drift + self.fees_captured - self.rebalance_loss;
                let mark = self.mark(price);
                (lhs - mark).abs() <= rel_tol * mark.abs().max(1.0)
            }
        }
    }
}
