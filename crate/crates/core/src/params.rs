//! Problem parameters and the constants derived from `(d, p, eps)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension, exponent and scale together with every derived constant.
///
/// The derived fields are pure functions of `(d, p, eps)`; constructing twice
/// from the same inputs yields bit-identical values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub d: usize,
    pub p: f64,
    pub eps: f64,
    /// Weight of the small-ball extremum, `(p-2)/(p-1)`.
    pub alpha: f64,
    /// Weight of `sup + inf` inside the tug-of-war average, `(p-2)/(p+d)`.
    pub beta: f64,
    /// Ball scaling of the tug-of-war average, `sqrt(2(p+d))`.
    pub gamma: f64,
    /// Time step `eps^2 / 2`.
    pub tau: f64,
    pub m_eps: f64,
    pub big_m_eps: f64,
    /// Width of the exterior shell where data must be prescribed:
    /// `max(eps^2 M^(1-alpha), eps m^(-alpha/2))`.
    pub band_width: f64,
    /// Largest radius any ball of the operator reaches:
    /// `max(eps^2 M^(1-alpha), gamma eps m^(-alpha/2))`.
    pub reach: f64,
}

impl Params {
    pub fn new(d: usize, p: f64, eps: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(p > 2.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("p must be finite and > 2, got {p}")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0,1), got {eps}")));
        }
        let df = d as f64;
        let alpha = (p - 2.0) / (p - 1.0);
        let beta = (p - 2.0) / (p + df);
        let gamma = (2.0 * (p + df)).sqrt();
        let tau = eps * eps / 2.0;
        let m_eps = eps.powf(2.0 * (p - 1.0) / (3.0 * p - 4.0));
        let big_m_eps = eps.powf(-2.0 + 2.0 / p);
        let small_max = eps * eps * big_m_eps.powf(1.0 - alpha);
        let tug_max = eps * m_eps.powf(-alpha / 2.0);
        Ok(Self {
            d,
            p,
            eps,
            alpha,
            beta,
            gamma,
            tau,
            m_eps,
            big_m_eps,
            band_width: small_max.max(tug_max),
            reach: small_max.max(gamma * tug_max),
        })
    }

    /// Same `(d, p)` at a different scale.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.d, self.p, eps)
    }

    /// Radius of the ball where a player picks the next position.
    pub fn small_radius(&self, c: f64) -> f64 {
        self.eps * self.eps * c.powf(1.0 - self.alpha)
    }

    /// `rho = eps c^(-alpha/2)` of the tug-of-war average.
    pub fn tug_rho(&self, c: f64) -> f64 {
        self.eps * c.powf(-self.alpha / 2.0)
    }

    /// Radius `gamma rho` of the tug-of-war ball.
    pub fn tug_radius(&self, c: f64) -> f64 {
        self.gamma * self.tug_rho(c)
    }

    /// Smallest ball radius used by the operator, `eps^2 m^(1-alpha)`.
    pub fn min_radius(&self) -> f64 {
        self.small_radius(self.m_eps)
    }

    /// Default lattice spacing: a quarter of the smallest ball radius.
    pub fn default_h(&self) -> f64 {
        self.min_radius() / 4.0
    }

    /// `min(2 - 4/p, 2/(3p-4))`, the exponent of the expansion error bound.
    pub fn reference_order(&self) -> f64 {
        (2.0 - 4.0 / self.p).min(2.0 / (3.0 * self.p - 4.0))
    }

    /// Number of mesh steps needed to reach `t`, rounding up.
    pub fn steps_to(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let j = (t / self.tau).ceil();
        // guard against t being an exact multiple that rounded up by one ulp
        if ((j - 1.0) * self.tau - t).abs() <= 1e-12 * t.max(1.0) {
            (j - 1.0) as usize
        } else {
            j as usize
        }
    }

    /// Rate `L = 2 (p-1)^(1/(p-1))` of the exponential supersolution.
    pub fn decay_rate(&self) -> f64 {
        2.0 * (self.p - 1.0).powf(1.0 / (self.p - 1.0))
    }

    pub fn same_problem(&self, other: &Params) -> bool {
        self.d == other.d && self.p == other.p && self.eps == other.eps
    }
}
