//! Structural properties of DPP iterates: comparison, L-infinity
//! contraction, sup bounds, translation and time regularity.

use serde::{Deserialize, Serialize};

use crate::dpp::SpaceTimeSolution;
use crate::error::{Error, Result};

fn same_mesh(a: &SpaceTimeSolution, b: &SpaceTimeSolution) -> Result<()> {
    if a.grid() != b.grid() || a.steps() != b.steps() {
        return Err(Error::InvalidParameter("solutions live on different meshes".into()));
    }
    Ok(())
}

fn domain_nodes(sol: &SpaceTimeSolution) -> Vec<usize> {
    let g = sol.grid();
    (0..g.len()).filter(|&i| sol.problem.domain.contains(&g.node(i))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub checked: usize,
    pub violations: usize,
    /// `max (lower - upper)` over all nodes and steps.
    pub worst_gap: f64,
}

/// Counts nodes and steps where `lower > upper`.
pub fn comparison_report(lower: &SpaceTimeSolution, upper: &SpaceTimeSolution) -> Result<ComparisonReport> {
    same_mesh(lower, upper)?;
    let mut rep = ComparisonReport { checked: 0, violations: 0, worst_gap: f64::NEG_INFINITY };
    for (a, b) in lower.fields.iter().zip(&upper.fields) {
        for (x, y) in a.values.iter().zip(&b.values) {
            rep.checked += 1;
            if x > y {
                rep.violations += 1;
            }
            rep.worst_gap = rep.worst_gap.max(x - y);
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `||u^j - v^j||` over all lattice nodes, per step.
    pub differences: Vec<f64>,
    /// `max(||u0 - v0||, ||g1 - g2||)` on the lattice.
    pub data_bound: f64,
    /// Steps where the difference grew by more than the tolerance.
    pub step_violations: usize,
    /// Steps whose difference exceeds the data bound by more than the tolerance.
    pub bound_violations: usize,
}

pub fn contraction_report(u: &SpaceTimeSolution, v: &SpaceTimeSolution, tolerance: f64) -> Result<ContractionReport> {
    same_mesh(u, v)?;
    let differences: Vec<f64> = u
        .fields
        .iter()
        .zip(&v.fields)
        .map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
        .collect();
    let data_bound = differences[0];
    let step_violations = differences.windows(2).filter(|w| w[1] > w[0] + tolerance).count();
    let bound_violations = differences.iter().filter(|&&d| d > data_bound + tolerance).count();
    Ok(ContractionReport { differences, data_bound, step_violations, bound_violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupBoundReport {
    pub norms: Vec<f64>,
    /// `max(||u0||, ||g||)` read off the initial lattice field.
    pub bound: f64,
    pub violations: usize,
}

pub fn sup_bound_report(sol: &SpaceTimeSolution, tolerance: f64) -> SupBoundReport {
    let bound = sol.sup_norms[0];
    let violations = sol.sup_norms.iter().filter(|&&n| n > bound + tolerance).count();
    SupBoundReport { norms: sol.sup_norms.clone(), bound, violations }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub shift: Vec<f64>,
    /// `max |u^j(x + y) - u^j(x)|` over nodes with both points in the domain.
    pub translation: Vec<f64>,
    pub initial_translation: f64,
    /// Allowed slack on top of `initial_translation`.
    pub translation_tolerance: f64,
    pub translation_violations: usize,
    pub lambda: f64,
    /// For each lag `l`, `max_k ||u^{k+l} - u^k|| / (l tau)^{lambda/2}`.
    pub time_ratios: Vec<f64>,
    /// `max |U(x, t) - u_left(x, t)|` between the piecewise linear and the
    /// left-constant time interpolants at mid-step times.
    pub interpolant_gap: f64,
}

/// Translation differences for a lattice shift `y`, time-Holder ratios with
/// exponent `lambda`, and the distance between the two time interpolants.
///
/// On a truncated box the exterior datum breaks translation invariance near
/// the box; the slack `eta e^{|y|}` bounds that effect through the
/// exponential envelope.
pub fn regularity_report(sol: &SpaceTimeSolution, shift: &[f64], lambda: f64) -> Result<RegularityReport> {
    let grid = sol.grid();
    let d = grid.dim();
    if shift.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: shift.len() });
    }
    let mut offset = vec![0i64; d];
    for k in 0..d {
        let q = shift[k] / grid.h;
        if (q - q.round()).abs() > 1e-9 * (1.0 + q.abs()) {
            return Err(Error::NonLatticeShift(shift.to_vec()));
        }
        offset[k] = q.round() as i64;
    }
    let nodes = domain_nodes(sol);
    let mut pairs = Vec::new();
    for &i in &nodes {
        let idx = grid.multi_index(i);
        let mut jdx = Vec::with_capacity(d);
        let mut ok = true;
        for k in 0..d {
            let t = idx[k] as i64 + offset[k];
            if t < 0 || t >= grid.counts[k] as i64 {
                ok = false;
                break;
            }
            jdx.push(t as usize);
        }
        if !ok {
            continue;
        }
        let j = grid.flat_index(&jdx);
        if sol.problem.domain.contains(&grid.node(j)) {
            pairs.push((i, j));
        }
    }
    let translation: Vec<f64> = sol
        .fields
        .iter()
        .map(|f| pairs.iter().map(|&(i, j)| (f.values[j] - f.values[i]).abs()).fold(0.0, f64::max))
        .collect();
    // the initial datum itself, on the whole lattice
    let u0 = &sol.problem.u0;
    let initial_translation = (0..grid.len())
        .map(|i| {
            let x = grid.node(i);
            let y: Vec<f64> = x.iter().zip(shift).map(|(a, b)| a + b).collect();
            (u0.value(&y) - u0.value(&x)).abs()
        })
        .fold(0.0, f64::max);
    let ynorm = shift.iter().map(|v| v * v).sum::<f64>().sqrt();
    let translation_tolerance = sol.truncation_eta.map_or(0.0, |eta| eta * ynorm.exp()) + 1e-12;
    let translation_violations = translation.iter().filter(|&&t| t > initial_translation + translation_tolerance).count();

    let tau = sol.params().tau;
    let steps = sol.steps();
    let mut time_ratios = Vec::with_capacity(steps);
    for lag in 1..=steps {
        let mut worst = 0.0f64;
        for k in 0..=(steps - lag) {
            let a = &sol.fields[k];
            let b = &sol.fields[k + lag];
            let diff = nodes.iter().map(|&i| (b.values[i] - a.values[i]).abs()).fold(0.0, f64::max);
            worst = worst.max(diff);
        }
        time_ratios.push(worst / (lag as f64 * tau).powf(lambda / 2.0));
    }

    let mut interpolant_gap = 0.0f64;
    for k in 0..steps {
        let t = (k as f64 + 0.5) * tau;
        for &i in &nodes {
            let x = grid.node(i);
            interpolant_gap = interpolant_gap.max((sol.interpolant_linear(&x, t) - sol.interpolant_left_constant(&x, t)).abs());
        }
    }

    Ok(RegularityReport {
        shift: shift.to_vec(),
        translation,
        initial_translation,
        translation_tolerance,
        translation_violations,
        lambda,
        time_ratios,
        interpolant_gap,
    })
}

/// `J max_j max_i |second difference of u^j| / 8` over stencils inside the
/// domain: the linear interpolation error `h^2 |u''| / 8` per read, summed
/// over the `J` rounds of a game. Stencils reaching exterior nodes are left
/// out since the scheme's solution may jump across the boundary, and a game
/// that leaves the domain is paid `g` exactly.
pub fn interpolation_tolerance(sol: &SpaceTimeSolution) -> f64 {
    let grid = sol.grid();
    let d = grid.dim();
    let domain = &sol.problem.domain;
    let nodes = domain_nodes(sol);
    let mut worst = 0.0f64;
    for &i in &nodes {
        let idx = grid.multi_index(i);
        for k in 0..d {
            if idx[k] == 0 || idx[k] + 1 >= grid.counts[k] {
                continue;
            }
            let s = grid.stride(k);
            if !domain.contains(&grid.node(i + s)) || !domain.contains(&grid.node(i - s)) {
                continue;
            }
            for f in &sol.fields {
                worst = worst.max((f.values[i + s] - 2.0 * f.values[i] + f.values[i - s]).abs());
            }
        }
    }
    sol.steps() as f64 * worst / 8.0
}
