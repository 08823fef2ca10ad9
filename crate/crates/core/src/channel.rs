//! Per-block iid fading realizations and achievable link rates.
//!
//! Gains are exponentially distributed with configurable per-link means and
//! the achievable rate of a link in a block is log(1 + P h) in the configured
//! base. Each link draws from its own stream derived from the run seed and
//! the link name, so the sequence of a link is invariant under topology edits
//! elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{derive_seed, fnv1a64};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    /// Rates in bits/channel-use.
    Two,
    /// Rates in nats/channel-use.
    Natural,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.log2(),
            LogBase::Natural => x.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelParams {
    /// Block fading: h ~ Exponential(mean gain), R = log(1 + P h).
    Shannon {
        power: f64,
        log_base: LogBase,
        /// One mean power gain per link, in topology link order.
        mean_gains: Vec<f64>,
    },
    /// Wired mode: fixed per-link rates, no randomness.
    Constant { rates: Vec<f64> },
}

impl ChannelParams {
    pub fn validate(&self, topo: &Topology) -> Result<()> {
        match self {
            ChannelParams::Shannon {
                power, mean_gains, ..
            } => {
                if !(power.is_finite() && *power > 0.0) {
                    return Err(Error::BadChannelParam(format!(
                        "transmit power must be positive, got {power}"
                    )));
                }
                if mean_gains.len() != topo.links().len() {
                    return Err(Error::ChannelLinkMismatch {
                        got: mean_gains.len(),
                        want: topo.links().len(),
                    });
                }
                for (i, g) in mean_gains.iter().enumerate() {
                    if !(g.is_finite() && *g > 0.0) {
                        return Err(Error::BadChannelParam(format!(
                            "mean gain of link {} must be positive, got {g}",
                            topo.link_name(i)
                        )));
                    }
                }
            }
            ChannelParams::Constant { rates } => {
                if rates.len() != topo.links().len() {
                    return Err(Error::ChannelLinkMismatch {
                        got: rates.len(),
                        want: topo.links().len(),
                    });
                }
                for (i, r) in rates.iter().enumerate() {
                    if !(r.is_finite() && *r >= 0.0) {
                        return Err(Error::BadChannelParam(format!(
                            "fixed rate of link {} must be nonnegative, got {r}",
                            topo.link_name(i)
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, ChannelParams::Constant { .. })
    }
}

/// Realized gains and rates of one fading block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBlock {
    pub t: u64,
    pub gains: Vec<f64>,
    /// Achievable rate per link, nonnegative and finite.
    pub rates: Vec<f64>,
}

/// Draws the iid block sequence for one run.
pub struct ChannelSampler {
    params: ChannelParams,
    streams: Vec<(ChaCha8Rng, Exp<f64>)>,
    t: u64,
}

impl ChannelSampler {
    pub fn new(topo: &Topology, params: &ChannelParams, seed: u64) -> Result<Self> {
        params.validate(topo)?;
        let mut streams = Vec::new();
        if let ChannelParams::Shannon { mean_gains, .. } = params {
            for (li, &g) in mean_gains.iter().enumerate() {
                let label = fnv1a64(topo.link_name(li).as_bytes());
                let rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, label, 0x6368_616e));
                let exp = Exp::new(1.0 / g)
                    .map_err(|e| Error::BadChannelParam(format!("exp({g}): {e}")))?;
                streams.push((rng, exp));
            }
        }
        Ok(ChannelSampler {
            params: params.clone(),
            streams,
            t: 0,
        })
    }

    /// Realizes the next block. Gains are independent across links and
    /// blocks; rates are log(1 + P h) in the configured base.
    pub fn sample_block(&mut self) -> ChannelBlock {
        let t = self.t;
        self.t += 1;
        match &self.params {
            ChannelParams::Constant { rates } => ChannelBlock {
                t,
                gains: vec![0.0; rates.len()],
                rates: rates.clone(),
            },
            ChannelParams::Shannon {
                power, log_base, ..
            } => {
                let mut gains = Vec::with_capacity(self.streams.len());
                let mut rates = Vec::with_capacity(self.streams.len());
                for (rng, exp) in &mut self.streams {
                    let h: f64 = exp.sample(rng);
                    gains.push(h);
                    rates.push(shannon_rate(*power, h, *log_base));
                }
                ChannelBlock { t, gains, rates }
            }
        }
    }
}

pub fn shannon_rate(power: f64, gain: f64, base: LogBase) -> f64 {
    base.log(1.0 + power * gain)
}

/// Expected achievable rate of a link.
///
/// For the fading model this evaluates E[log(1 + P h)] over the exponential
/// gain density by adaptive quadrature to a relative error below 1e-6.
pub fn mean_rate(params: &ChannelParams, link: usize) -> Result<f64> {
    match params {
        ChannelParams::Constant { rates } => Ok(rates[link]),
        ChannelParams::Shannon {
            power,
            log_base,
            mean_gains,
        } => {
            let g = mean_gains[link];
            if !(g.is_finite() && power.is_finite()) {
                return Err(Error::BadChannelParam(
                    "non-finite integrand parameters".into(),
                ));
            }
            Ok(expected_shannon_rate(g, *power, *log_base))
        }
    }
}

/// E[log(1 + P h)] for h ~ Exponential(mean g).
pub fn expected_shannon_rate(mean_gain: f64, power: f64, base: LogBase) -> f64 {
    if mean_gain <= 0.0 {
        return 0.0;
    }
    let f = |x: f64| base.log(1.0 + power * x) * (-x / mean_gain).exp() / mean_gain;
    // Beyond 50 mean gains the integrand mass is ~1e-20 of the total.
    let cut = mean_gain * 50.0;
    adaptive_simpson(&f, 0.0, cut, 1e-12, 60)
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let whole = simpson(f, a, b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_simpson(f, a, m, 0.5 * tol, depth - 1)
            + adaptive_simpson(f, m, b, 0.5 * tol, depth - 1)
    }
}
