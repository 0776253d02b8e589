//! Bid-ladder mechanics and the imbalance price formula.
//!
//! A [`BidLadder`] holds the merged aFRR/mFRR activation bids for one quarter
//! hour. Both sides are stored in activation order: the first bid of a side is
//! the cheapest for the TSO, so incremental prices rise along the list and
//! decremental prices fall.
//!
//! Sign conventions: NRV > 0 activates incremental bids, NRV < 0 activates
//! decremental bids, and SI is approximated as `-NRV`.

use serde::{Deserialize, Serialize};

use crate::error::MarketError;

/// Regulation direction of a ladder side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Incremental,
    Decremental,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Incremental => Side::Decremental,
            Side::Decremental => Side::Incremental,
        }
    }

    /// Side activated by a given NRV sign. Zero maps to incremental.
    pub fn for_nrv(nrv: f64) -> Side {
        if nrv < 0.0 {
            Side::Decremental
        } else {
            Side::Incremental
        }
    }
}

/// One balancing bid: price in €/MWh, volume in MW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub price: f64,
    pub volume: f64,
}

impl Bid {
    pub fn new(price: f64, volume: f64) -> Self {
        Self { price, volume }
    }
}

/// Merged activation ladder for one quarter hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLadder", into = "RawLadder")]
pub struct BidLadder {
    incremental: Vec<Bid>,
    decremental: Vec<Bid>,
    quarter_id: u64,
}

#[derive(Serialize, Deserialize)]
struct RawLadder {
    incremental: Vec<Bid>,
    decremental: Vec<Bid>,
    quarter_id: u64,
}

impl TryFrom<RawLadder> for BidLadder {
    type Error = MarketError;

    fn try_from(raw: RawLadder) -> Result<Self, Self::Error> {
        BidLadder::new(raw.incremental, raw.decremental, raw.quarter_id)
    }
}

impl From<BidLadder> for RawLadder {
    fn from(l: BidLadder) -> Self {
        RawLadder {
            incremental: l.incremental,
            decremental: l.decremental,
            quarter_id: l.quarter_id,
        }
    }
}

/// Result of a marginal price lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalPrice {
    pub price: f64,
    /// Index of the marginal bid within its side.
    pub index: usize,
    /// Requested volume exceeded the side's total capacity.
    pub saturated: bool,
}

impl BidLadder {
    /// Builds a ladder, checking that both sides are non-empty, volumes are
    /// strictly positive, and prices are monotone in activation order.
    pub fn new(
        incremental: Vec<Bid>,
        decremental: Vec<Bid>,
        quarter_id: u64,
    ) -> Result<Self, MarketError> {
        validate_side(Side::Incremental, &incremental)?;
        validate_side(Side::Decremental, &decremental)?;
        Ok(Self {
            incremental,
            decremental,
            quarter_id,
        })
    }

    pub fn quarter_id(&self) -> u64 {
        self.quarter_id
    }

    pub fn incremental(&self) -> &[Bid] {
        &self.incremental
    }

    pub fn decremental(&self) -> &[Bid] {
        &self.decremental
    }

    pub fn side(&self, side: Side) -> &[Bid] {
        match side {
            Side::Incremental => &self.incremental,
            Side::Decremental => &self.decremental,
        }
    }

    pub fn capacity(&self, side: Side) -> f64 {
        self.side(side).iter().map(|b| b.volume).sum()
    }

    /// Price of the bid containing the cumulative activated `volume`.
    pub fn marginal_price(&self, side: Side, volume: f64) -> MarginalPrice {
        // Sides are non-empty by construction.
        marginal_on(self.side(side), volume).expect("ladder side validated non-empty")
    }

    /// Bids activated to cover `nrv`, in activation order. The last bid is
    /// clipped so volumes sum to `min(|nrv|, capacity)`.
    pub fn activated_bids(&self, nrv: f64) -> Vec<Bid> {
        if nrv == 0.0 {
            return Vec::new();
        }
        let mut remaining = nrv.abs();
        let mut out = Vec::new();
        for bid in self.side(Side::for_nrv(nrv)) {
            if remaining <= 0.0 {
                break;
            }
            let take = bid.volume.min(remaining);
            out.push(Bid::new(bid.price, take));
            remaining -= take;
        }
        out
    }

    /// Per-minute balancing cost in €: Σ price·volume / 60 over activated bids.
    pub fn balancing_cost(&self, nrv: f64) -> f64 {
        self.activated_bids(nrv)
            .iter()
            .map(|b| b.price * b.volume / 60.0)
            .sum()
    }
}

fn validate_side(side: Side, bids: &[Bid]) -> Result<(), MarketError> {
    if bids.is_empty() {
        return Err(MarketError::EmptySide(side));
    }
    for (i, b) in bids.iter().enumerate() {
        if !(b.volume > 0.0) || !b.volume.is_finite() || !b.price.is_finite() {
            return Err(MarketError::InvalidBid { side, index: i });
        }
    }
    for (i, w) in bids.windows(2).enumerate() {
        let ordered = match side {
            Side::Incremental => w[1].price >= w[0].price,
            Side::Decremental => w[1].price <= w[0].price,
        };
        if !ordered {
            return Err(MarketError::Unsorted { side, index: i + 1 });
        }
    }
    Ok(())
}

/// Marginal price walk over a raw list of bids in activation order.
///
/// Bid `i` covers the cumulative volume interval `(cum[i-1], cum[i]]`; a zero
/// volume maps to the first bid.
pub fn marginal_on(bids: &[Bid], volume: f64) -> Result<MarginalPrice, MarketError> {
    let last = bids.len().checked_sub(1).ok_or(MarketError::EmptyBids)?;
    let mut cumulative = 0.0;
    for (i, b) in bids.iter().enumerate() {
        cumulative += b.volume;
        if volume <= cumulative {
            return Ok(MarginalPrice {
                price: b.price,
                index: i,
                saturated: false,
            });
        }
    }
    Ok(MarginalPrice {
        price: bids[last].price,
        index: last,
        saturated: true,
    })
}

/// Correction parameters for the α addend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for AlphaParams {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 200.0,
            c: 450.0,
            d: 65.0,
        }
    }
}

impl AlphaParams {
    /// No correction at all.
    pub fn zero() -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            c: 450.0,
            d: 65.0,
        }
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if self.d == 0.0 || !self.d.is_finite() {
            return Err(MarketError::InvalidAlpha);
        }
        Ok(())
    }
}

/// Piecewise participation factor `cp`.
///
/// `si <= 0` uses the marginal incremental price, `si > 0` the marginal
/// decremental price.
pub fn cp_factor(si: f64, mip: f64, mdp: f64) -> f64 {
    if si <= 0.0 {
        if mip > 400.0 {
            0.0
        } else if mip >= 200.0 {
            (400.0 - mip) / 200.0
        } else {
            1.0
        }
    } else if mdp < -200.0 {
        0.0
    } else if mdp <= 0.0 {
        (mdp + 200.0) / 200.0
    } else {
        1.0
    }
}

/// `a + b / (1 + exp((c - x) / d)) · cp`.
pub fn alpha_correction(params: &AlphaParams, x: f64, cp: f64) -> f64 {
    params.a + params.b / (1.0 + ((params.c - x) / params.d).exp()) * cp
}

/// Imbalance price for a given averaged SI and instantaneous NRV.
///
/// Marginal prices are read at the instantaneous activation volume on each
/// side. At exactly zero average SI the two branches are averaged.
pub fn imbalance_price(avg_si: f64, inst_nrv: f64, ladder: &BidLadder, alpha: f64) -> f64 {
    let (mip, mdp) = marginal_pair(ladder, inst_nrv);
    price_from_marginals(avg_si, mip, mdp, alpha)
}

fn price_from_marginals(avg_si: f64, mip: f64, mdp: f64, alpha: f64) -> f64 {
    if avg_si > 0.0 {
        mdp - alpha
    } else if avg_si < 0.0 {
        mip + alpha
    } else {
        ((mdp - alpha) + (mip + alpha)) / 2.0
    }
}

/// `(MIP, MDP)` evaluated at the instantaneous activation volumes.
pub fn marginal_pair(ladder: &BidLadder, inst_nrv: f64) -> (f64, f64) {
    let mip = ladder
        .marginal_price(Side::Incremental, inst_nrv.max(0.0))
        .price;
    let mdp = ladder
        .marginal_price(Side::Decremental, (-inst_nrv).max(0.0))
        .price;
    (mip, mdp)
}

/// Full settlement price: derives `cp` and α from the ladder and the sliding
/// SI average `x`, then applies the price formula.
pub fn settlement_price(
    ladder: &BidLadder,
    params: &AlphaParams,
    avg_si: f64,
    inst_nrv: f64,
    sliding_si: f64,
) -> f64 {
    let (mip, mdp) = marginal_pair(ladder, inst_nrv);
    let cp = cp_factor(avg_si, mip, mdp);
    let alpha = alpha_correction(params, sliding_si, cp);
    price_from_marginals(avg_si, mip, mdp, alpha)
}

/// Arithmetic mean of the SI values observed since the quarter start.
pub fn cumulative_avg_si(si_series: &[f64]) -> Result<f64, MarketError> {
    if si_series.is_empty() {
        return Err(MarketError::EmptySeries);
    }
    Ok(si_series.iter().sum::<f64>() / si_series.len() as f64)
}
