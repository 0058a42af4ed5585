//! The averaging operator `A_eps` built from small-ball extrema and the
//! tug-of-war average `M_rho`, plus the expansion-error harness.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calculus::{analytic_p_laplacian, signed_pow};
use crate::error::{Error, Result};
use crate::field::{SamplingSpec, Sampler, ScalarField};
use crate::functions::TestFunction;
use crate::params::Params;

/// Log-uniform nodes on `[m_eps, M_eps]` discretizing the inner optimization
/// over `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CGrid {
    nodes: Vec<f64>,
}

impl CGrid {
    pub const DEFAULT_COUNT: usize = 48;

    pub fn new(params: &Params, n_c: usize) -> Result<Self> {
        if n_c == 0 {
            return Err(Error::EmptyCGrid);
        }
        if n_c == 1 {
            return Err(Error::InvalidParameter("a c-grid needs both endpoints (n_c >= 2)".into()));
        }
        let (m, big_m) = (params.m_eps, params.big_m_eps);
        let span = (big_m / m).ln();
        let mut nodes: Vec<f64> =
            (0..n_c).map(|k| m * (span * k as f64 / (n_c - 1) as f64).exp()).collect();
        nodes[0] = m;
        nodes[n_c - 1] = big_m;
        Self::from_nodes(nodes)
    }

    pub fn default_for(params: &Params) -> Result<Self> {
        Self::new(params, Self::DEFAULT_COUNT)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptyCGrid);
        }
        if nodes.iter().any(|&c| !(c > 0.0) || !c.is_finite()) || nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("c-grid nodes must be positive, finite and increasing".into()));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Inserts the geometric midpoint of every gap; the old nodes are kept.
    pub fn refine(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push((w[0] * w[1]).sqrt());
        }
        nodes.push(*self.nodes.last().unwrap());
        Self { nodes }
    }
}

/// Full result of one operator evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorEval {
    pub value: f64,
    /// Field value at the evaluation point.
    pub center: f64,
    /// `min_c { alpha sup_small + (1 - alpha) M_rho }`.
    pub first_inner: f64,
    /// `max_c { alpha inf_small + (1 - alpha) M_rho }`.
    pub second_inner: f64,
    /// c-grid index attaining `first_inner`.
    pub first_c: usize,
    /// c-grid index attaining `second_inner`.
    pub second_c: usize,
    /// Balls that fell below lattice resolution.
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub params: Params,
    pub cgrid: CGrid,
    pub sampling: SamplingSpec,
}

impl Operator {
    pub fn new(params: Params, cgrid: CGrid) -> Self {
        Self { params, cgrid, sampling: SamplingSpec::default() }
    }

    pub fn with_sampling(mut self, sampling: SamplingSpec) -> Self {
        self.sampling = sampling;
        self
    }

    /// Ball radii in the order used by [`Operator::eval`]: all small radii,
    /// then all tug radii.
    pub fn radii(&self) -> Vec<f64> {
        let c = self.cgrid.nodes();
        c.iter()
            .map(|&c| self.params.small_radius(c))
            .chain(c.iter().map(|&c| self.params.tug_radius(c)))
            .collect()
    }

    pub fn m_rho(&self, sampler: &Sampler, x: &[f64], rho: f64) -> Result<f64> {
        let prof = sampler.profile(x, &[self.params.gamma * rho])?;
        let s = prof.stats[0];
        let b = self.params.beta;
        Ok(b / 2.0 * (s.sup + s.inf) + (1.0 - b) * s.mean)
    }

    pub fn eval(&self, sampler: &Sampler, x: &[f64]) -> Result<OperatorEval> {
        let n = self.cgrid.len();
        if n == 0 {
            return Err(Error::EmptyCGrid);
        }
        let prof = sampler.profile(x, &self.radii())?;
        let (a, b) = (self.params.alpha, self.params.beta);
        let mut first = (f64::INFINITY, 0);
        let mut second = (f64::NEG_INFINITY, 0);
        for k in 0..n {
            let small = prof.stats[k];
            let tug = prof.stats[n + k];
            let m = b / 2.0 * (tug.sup + tug.inf) + (1.0 - b) * tug.mean;
            let up = a * small.sup + (1.0 - a) * m;
            let down = a * small.inf + (1.0 - a) * m;
            if up < first.0 {
                first = (up, k);
            }
            if down > second.0 {
                second = (down, k);
            }
        }
        let phi = prof.center_value;
        let value = 0.5 * first.0.max(phi) + 0.5 * second.0.min(phi);
        Ok(OperatorEval {
            value,
            center: phi,
            first_inner: first.0,
            second_inner: second.0,
            first_c: first.1,
            second_c: second.1,
            fallbacks: prof.fallback_count(),
        })
    }

    pub fn apply(&self, phi: &ScalarField, x: &[f64]) -> Result<f64> {
        Ok(self.eval(&Sampler::new(phi, self.sampling), x)?.value)
    }

    /// `(A_eps[phi](x) - phi(x)) 2 / eps^2 - (Delta_p phi(x))^{1/(p-1)}`.
    pub fn expansion_error(&self, phi: &TestFunction, x: &[f64]) -> Result<f64> {
        let p = self.params.p;
        let lap = analytic_p_laplacian(phi, x, p)?;
        Ok(self.quotient(phi, x)? - signed_pow(lap, 1.0 / (p - 1.0)))
    }

    /// `(A_eps[phi](x) - phi(x)) 2 / eps^2`.
    pub fn quotient(&self, phi: &TestFunction, x: &[f64]) -> Result<f64> {
        let field = ScalarField::Analytic(phi.clone());
        let a = self.apply(&field, x)?;
        let eps = self.params.eps;
        Ok((a - phi.value(x)) * 2.0 / (eps * eps))
    }

    /// Parabolic consistency defect for `u(x, t) = phi(x) + t dt`:
    /// `(u(x, t + eps^2/2) - A_eps[u(., t)](x)) 2 / eps^2`, which tends to
    /// `dt - (Delta_p phi(x))^{1/(p-1)}`.
    pub fn parabolic_defect(&self, phi: &TestFunction, x: &[f64], dt: f64) -> Result<f64> {
        Ok(dt - self.quotient(phi, x)?)
    }
}

/// `M_rho[phi](x)` with default sampling.
pub fn m_rho(phi: &ScalarField, x: &[f64], rho: f64, params: &Params) -> Result<f64> {
    let op = Operator { params: *params, cgrid: CGrid::from_nodes(vec![1.0])?, sampling: SamplingSpec::default() };
    op.m_rho(&Sampler::new(phi, op.sampling), x, rho)
}

/// `A_eps[phi](x)` with default sampling.
pub fn a_eps(phi: &ScalarField, x: &[f64], params: &Params, cgrid: &CGrid) -> Result<f64> {
    Operator::new(*params, cgrid.clone()).apply(phi, x)
}

pub fn expansion_error(phi: &TestFunction, x: &[f64], params: &Params, cgrid: &CGrid) -> Result<f64> {
    Operator::new(*params, cgrid.clone()).expansion_error(phi, x)
}

/// Errors along an eps ladder and their fitted log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub eps: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub reference_slope: f64,
    /// Ladder entries left out of the fit because their error was zero.
    pub excluded: Vec<f64>,
}

impl ExpansionReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["eps", "abs_error"])?;
        for (e, err) in self.eps.iter().zip(&self.errors) {
            out.write_record([e.to_string(), err.abs().to_string()])?;
        }
        out.write_record([self.slope.to_string(), self.reference_slope.to_string()])?;
        out.flush()?;
        Ok(())
    }
}

/// Least-squares slope of `log |E|` against `log eps`.
pub fn order_fit(eps: &[f64], errors: &[f64], p: f64) -> Result<ExpansionReport> {
    if eps.len() != errors.len() {
        return Err(Error::DimensionMismatch { expected: eps.len(), got: errors.len() });
    }
    if eps.len() < 3 {
        return Err(Error::DegenerateFit("need at least three ladder entries".into()));
    }
    if eps.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidParameter("eps ladder must be strictly decreasing".into()));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::DegenerateFit("non-finite error".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    for (&e, &err) in eps.iter().zip(errors) {
        if err == 0.0 {
            excluded.push(e);
        } else {
            xs.push(e.ln());
            ys.push(err.abs().ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::DegenerateFit("fewer than three nonzero errors".into()));
    }
    if errors.iter().all(|e| e.abs() < 1e-12) {
        return Err(Error::DegenerateFit("errors at float noise floor".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let reference_slope = (2.0 - 4.0 / p).min(2.0 / (3.0 * p - 4.0));
    Ok(ExpansionReport {
        eps: eps.to_vec(),
        errors: errors.to_vec(),
        slope: sxy / sxx,
        reference_slope,
        excluded,
    })
}

/// Evaluates `expansion_error` along a ladder and fits its order.
pub fn expansion_ladder(phi: &TestFunction, x: &[f64], base: &Params, ladder: &[f64], n_c: usize) -> Result<ExpansionReport> {
    let mut errors = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let params = base.with_eps(eps)?;
        let op = Operator::new(params, CGrid::new(&params, n_c)?);
        errors.push(op.expansion_error(phi, x)?.abs());
    }
    order_fit(ladder, &errors, base.p)
}
