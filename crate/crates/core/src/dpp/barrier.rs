//! Closed-form sub- and supersolutions used to bracket DPP solutions near the
//! boundary, near the initial time, and at spatial infinity.

use serde::{Deserialize, Serialize};

use crate::calculus::analytic_p_laplacian;
use crate::dpp::{DirichletProblem, SpaceTimeSolution};
use crate::error::{Error, Result};
use crate::functions::TestFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    BoundaryLower,
    BoundaryUpper,
    InitialLower,
    InitialUpper,
    Exponential,
}

/// Whether the barrier should lie below or above the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Below,
    Above,
}

impl BarrierKind {
    pub fn sense(self) -> Sense {
        match self {
            BarrierKind::BoundaryLower | BarrierKind::InitialLower => Sense::Below,
            _ => Sense::Above,
        }
    }
}

/// Inputs to [`build_barrier`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub kind: BarrierKind,
    /// Point of `Omega` (initial kinds) or of its boundary (boundary kinds).
    /// Ignored by the exponential kind.
    #[serde(default)]
    pub anchor: Vec<f64>,
    pub eta: f64,
    /// Exterior ball radius `R` for boundary kinds; defaults to a quarter of
    /// the domain diameter.
    #[serde(default)]
    pub exterior_radius: Option<f64>,
    /// Unit direction `z` of the exponential kind; defaults to `e_1`.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    /// `C` of the exponential kind; defaults to 1.
    #[serde(default)]
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Barrier {
    /// `-+ k1 (e^t - 1) -+ k2 N |x - x0|^beta + u0(x0) -+ eta`
    Initial {
        upper: bool,
        anchor: Vec<f64>,
        eta: f64,
        k1: f64,
        k2: f64,
        norm: f64,
        exponent: f64,
        anchor_value: f64,
        continuity_radius: f64,
    },
    /// `+- k (|x - z0|^-a - R^-a) + g(x0) -+ eta -+ (1 - t/T)^2 N`
    Boundary {
        upper: bool,
        anchor: Vec<f64>,
        eta: f64,
        k: f64,
        center: Vec<f64>,
        radius: f64,
        exponent: f64,
        norm: f64,
        anchor_value: f64,
        horizon: f64,
    },
    /// `C e^{L t} e^{<x, z>}`
    Exponential { amplitude: f64, rate: f64, direction: Vec<f64> },
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl Barrier {
    pub fn kind(&self) -> BarrierKind {
        match self {
            Barrier::Initial { upper: false, .. } => BarrierKind::InitialLower,
            Barrier::Initial { upper: true, .. } => BarrierKind::InitialUpper,
            Barrier::Boundary { upper: false, .. } => BarrierKind::BoundaryLower,
            Barrier::Boundary { upper: true, .. } => BarrierKind::BoundaryUpper,
            Barrier::Exponential { .. } => BarrierKind::Exponential,
        }
    }

    pub fn sense(&self) -> Sense {
        self.kind().sense()
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Barrier::Initial { upper, anchor, eta, k1, k2, norm, exponent, anchor_value, .. } => {
                let s = if *upper { 1.0 } else { -1.0 };
                s * k1 * (t.exp() - 1.0) + s * k2 * norm * dist(x, anchor).powf(*exponent) + anchor_value + s * eta
            }
            Barrier::Boundary { upper, eta, k, center, radius, exponent, norm, anchor_value, horizon, .. } => {
                let s = if *upper { 1.0 } else { -1.0 };
                let well = dist(x, center).powf(-exponent) - radius.powf(-exponent);
                let q = 1.0 - t / horizon;
                -s * k * well + anchor_value + s * eta + s * q * q * norm
            }
            Barrier::Exponential { amplitude, rate, direction } => {
                let ip: f64 = x.iter().zip(direction).map(|(a, b)| a * b).sum();
                amplitude * (rate * t + ip).exp()
            }
        }
    }

    /// `U_t - (Delta_p U)^{1/(p-1)} - (L - (p-1)^{1/(p-1)}) U` for the
    /// exponential kind, computed from the analytic p-Laplacian.
    pub fn exponential_identity_residual(&self, x: &[f64], t: f64, p: f64) -> Result<f64> {
        let Barrier::Exponential { amplitude, rate, direction } = self else {
            return Err(Error::Unsupported("identity residual is defined for the exponential barrier only".into()));
        };
        let slice = TestFunction::Exp { direction: direction.clone(), amplitude: amplitude * (rate * t).exp() };
        let u = slice.value(x);
        let lap = analytic_p_laplacian(&slice, x, p)?;
        let q = 1.0 / (p - 1.0);
        Ok(rate * u - crate::calculus::signed_pow(lap, q) - (rate - (p - 1.0).powf(q)) * u)
    }
}

/// `(||u0||, ||g||)` over the problem lattice: `u0` at domain nodes, `g` at
/// the others.
pub fn data_norms(problem: &DirichletProblem) -> Result<(f64, f64)> {
    let grid = problem.grid()?;
    let mut nu = 0.0f64;
    let mut ng = 0.0f64;
    for i in 0..grid.len() {
        let x = grid.node(i);
        if problem.domain.contains(&x) {
            nu = nu.max(problem.u0.value(&x).abs());
        } else {
            ng = ng.max(problem.g.value(&x).abs());
        }
    }
    Ok((nu, ng))
}

pub fn build_barrier(spec: &BarrierSpec, problem: &DirichletProblem) -> Result<Barrier> {
    if !(spec.eta > 0.0) {
        return Err(Error::InvalidParameter("eta must be positive".into()));
    }
    let params = &problem.params;
    let (p, d) = (params.p, params.d as f64);
    match spec.kind {
        BarrierKind::Exponential => {
            let mut z = spec.direction.clone().unwrap_or_else(|| {
                let mut e = vec![0.0; params.d];
                e[0] = 1.0;
                e
            });
            let n = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            if z.len() != params.d || n == 0.0 {
                return Err(Error::InvalidParameter("exponential direction must be a nonzero vector of the problem dimension".into()));
            }
            z.iter_mut().for_each(|v| *v /= n);
            let amplitude = spec.amplitude.unwrap_or(1.0);
            if !(amplitude > 0.0) {
                return Err(Error::InvalidParameter("amplitude must be positive".into()));
            }
            Ok(Barrier::Exponential { amplitude, rate: params.decay_rate(), direction: z })
        }
        BarrierKind::InitialLower | BarrierKind::InitialUpper => {
            let x0 = &spec.anchor;
            if x0.len() != params.d || !problem.domain.contains(x0) {
                return Err(Error::BadAnchor(format!("{x0:?} is not a point of the domain")));
            }
            let (nu, ng) = data_norms(problem)?;
            let norm = nu + ng;
            let u_x0 = problem.u0.value(x0);
            let dist0 = problem.domain.distance_to_boundary(x0);
            // largest r with |u0 - u0(x0)| <= eta/2 on the lattice nodes of B_r(x0)
            let grid = problem.grid()?;
            let mut r = dist0;
            for i in 0..grid.len() {
                let x = grid.node(i);
                if problem.domain.contains(&x) && (problem.u0.value(&x) - u_x0).abs() > spec.eta / 2.0 {
                    r = r.min(dist(&x, x0));
                }
            }
            let beta = (3.0 * p - 2.0) / (p - 1.0);
            let k2 = 2.0 * (2.0 * r.powf(-beta)).max((2.0 / dist0).powf(beta));
            let c_dp = beta * (2.0 * p - 2.0 + d).powf(1.0 / (p - 1.0));
            let diam = problem.domain.diameter();
            let k1 = c_dp * diam * diam * k2 * norm + 2.0;
            Ok(Barrier::Initial {
                upper: spec.kind == BarrierKind::InitialUpper,
                anchor: x0.clone(),
                eta: spec.eta,
                k1,
                k2,
                norm,
                exponent: beta,
                anchor_value: u_x0,
                continuity_radius: r,
            })
        }
        BarrierKind::BoundaryLower | BarrierKind::BoundaryUpper => {
            let x0 = &spec.anchor;
            if x0.len() != params.d {
                return Err(Error::BadAnchor(format!("{x0:?} has the wrong dimension")));
            }
            if problem.domain.contains(x0) || problem.domain.distance_outside(x0) > 1e-9 {
                return Err(Error::BadAnchor(format!("{x0:?} is not on the boundary")));
            }
            let normal = problem
                .domain
                .outward_normal(x0)
                .ok_or_else(|| Error::BadAnchor(format!("no exterior ball at {x0:?} (corner or edge)")))?;
            if !(problem.horizon > 0.0) {
                return Err(Error::InvalidParameter("boundary barriers need a positive horizon".into()));
            }
            let diam = problem.domain.diameter();
            let big_r = spec.exterior_radius.unwrap_or(diam / 4.0);
            if !(big_r > 0.0) {
                return Err(Error::InvalidParameter("exterior radius must be positive".into()));
            }
            let z0: Vec<f64> = x0.iter().zip(&normal).map(|(a, n)| a + big_r * n).collect();
            let grid = problem.grid()?;
            for i in 0..grid.len() {
                let x = grid.node(i);
                if problem.domain.contains(&x) && dist(&x, &z0) < big_r * (1.0 - 1e-12) {
                    return Err(Error::BadAnchor(format!("exterior ball at {x0:?} meets the domain at {x:?}")));
                }
            }
            let (nu, ng) = data_norms(problem)?;
            let norm = nu + ng;
            let a = (p + d - 2.0) / (p - 1.0);
            let g_x0 = problem.g.value(x0);
            let slope = a * (a * (p - 1.0) + p - d).powf(1.0 / (p - 1.0)) * (diam + big_r).powf(-a - p / (p - 1.0));
            let mut k = (2.0 + 2.0 * norm / problem.horizon) / slope;
            // away from x0 the well must absorb the oscillation of g
            let samples = problem.domain.boundary_samples(64);
            let r_g = samples
                .iter()
                .filter(|y| (problem.g.value(y) - g_x0).abs() > spec.eta / 2.0)
                .map(|y| dist(y, x0))
                .fold(f64::INFINITY, f64::min);
            let r_far = samples.iter().filter(|y| dist(y, x0) >= r_g).map(|y| dist(y, &z0)).fold(f64::INFINITY, f64::min);
            if r_far.is_finite() {
                let gap = big_r.powf(-a) - r_far.powf(-a);
                if gap > 0.0 {
                    k = k.max((2.0 * ng + spec.eta) / gap);
                }
            }
            Ok(Barrier::Boundary {
                upper: spec.kind == BarrierKind::BoundaryUpper,
                anchor: x0.clone(),
                eta: spec.eta,
                k,
                center: z0,
                radius: big_r,
                exponent: a,
                norm,
                anchor_value: g_x0,
                horizon: problem.horizon,
            })
        }
    }
}

/// Worst ordering violation between a solution and a barrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub checked: usize,
    pub violations: usize,
    /// Largest amount by which the barrier crossed the solution (<= 0 when
    /// ordered).
    pub worst_excess: f64,
    /// `(step, node)` of the worst excess.
    pub worst_at: Option<(usize, usize)>,
}

/// Compares `barrier` with the solution at every domain node and mesh time;
/// a crossing larger than `tolerance` counts as a violation.
pub fn check_barrier_ordering(solution: &SpaceTimeSolution, barrier: &Barrier, sense: Sense, tolerance: f64) -> OrderingReport {
    let grid = solution.grid();
    let domain = &solution.problem.domain;
    let nodes: Vec<(usize, Vec<f64>)> =
        (0..grid.len()).map(|i| (i, grid.node(i))).filter(|(_, x)| domain.contains(x)).collect();
    let mut rep = OrderingReport { checked: 0, violations: 0, worst_excess: f64::NEG_INFINITY, worst_at: None };
    for (j, field) in solution.fields.iter().enumerate() {
        let t = solution.times[j];
        for (i, x) in &nodes {
            let w = barrier.value(x, t);
            let u = field.values[*i];
            let excess = match sense {
                Sense::Below => w - u,
                Sense::Above => u - w,
            };
            rep.checked += 1;
            if excess > tolerance {
                rep.violations += 1;
            }
            if excess > rep.worst_excess {
                rep.worst_excess = excess;
                rep.worst_at = Some((j, *i));
            }
        }
    }
    rep
}
