//! Scalar fields and the ball queries (sup, inf, mean) behind every operator
//! evaluation.
//!
//! Sup and inf are taken over a finite sample set: the ball center, every
//! lattice node in the closed ball, and a deterministic set of points on the
//! bounding sphere. Sampled extrema never exceed the true ones, so they are
//! inner approximations. Sphere samples come in antipodal pairs placed by the
//! golden-angle sequence in every axis plane, so a larger count always
//! contains a smaller one.

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::functions::TestFunction;
use crate::grid::LatticeField;

/// A real function of a spatial point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarField {
    Analytic(TestFunction),
    Lattice(LatticeField),
}

impl ScalarField {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Analytic(f) => f.value(x),
            ScalarField::Lattice(l) => l.interpolate(x),
        }
    }

    pub fn as_lattice(&self) -> Option<&LatticeField> {
        match self {
            ScalarField::Lattice(l) => Some(l),
            ScalarField::Analytic(_) => None,
        }
    }

    pub fn as_analytic(&self) -> Option<&TestFunction> {
        match self {
            ScalarField::Analytic(f) => Some(f),
            ScalarField::Lattice(_) => None,
        }
    }
}

impl From<TestFunction> for ScalarField {
    fn from(f: TestFunction) -> Self {
        ScalarField::Analytic(f)
    }
}

impl From<LatticeField> for ScalarField {
    fn from(l: LatticeField) -> Self {
        ScalarField::Lattice(l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallStats {
    pub sup: f64,
    pub inf: f64,
    pub mean: f64,
}

/// Controls the sample set used for sup/inf and the mean quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    /// Sphere points per axis-plane family: `max(min_boundary, boundary_factor d ceil(r/h))`.
    pub boundary_factor: usize,
    pub min_boundary: usize,
    /// Resolution for analytic fields; lattice fields use their own spacing.
    pub h: Option<f64>,
    /// Analytic interior samples per radius along each axis.
    pub interior_per_radius: usize,
    /// Gauss-Legendre order for analytic means.
    pub gauss_order: usize,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self { boundary_factor: 2, min_boundary: 16, h: None, interior_per_radius: 8, gauss_order: 16 }
    }
}

impl SamplingSpec {
    /// A spec whose sample sets contain those of `self`.
    pub fn refine(&self) -> Self {
        Self {
            boundary_factor: self.boundary_factor * 2,
            min_boundary: self.min_boundary * 2,
            h: self.h.map(|h| h / 2.0),
            interior_per_radius: self.interior_per_radius * 2,
            gauss_order: self.gauss_order,
        }
    }

    fn boundary_count(&self, d: usize, radius: f64, h: Option<f64>) -> usize {
        let by_res = match h {
            Some(h) if h > 0.0 => self.boundary_factor * d * (radius / h).ceil() as usize,
            _ => 0,
        };
        by_res.max(self.min_boundary)
    }
}

const GOLDEN_FRAC: f64 = 0.618_033_988_749_894_9;

/// Unit directions: `+-e_1` in one dimension, otherwise antipodal pairs on the
/// great circle of every axis plane at golden-angle positions. `count` is the
/// number of points per plane; the first pairs are the axis directions.
pub fn sphere_directions(d: usize, count: usize) -> Vec<Vec<f64>> {
    if d == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    let pairs = count.div_ceil(2).max(1);
    let mut out = Vec::with_capacity(pairs * 2 * d * (d - 1) / 2);
    for i in 0..d {
        for j in (i + 1)..d {
            for k in 0..pairs {
                let theta = std::f64::consts::TAU * ((k as f64 * GOLDEN_FRAC).fract());
                let (s, c) = theta.sin_cos();
                let mut u = vec![0.0; d];
                u[i] = c;
                u[j] = s;
                let v: Vec<f64> = u.iter().map(|x| -x).collect();
                out.push(u);
                out.push(v);
            }
        }
    }
    out
}

/// Exterior data consulted for points outside the domain.
#[derive(Debug, Clone, Copy)]
pub struct Exterior<'a> {
    pub domain: &'a Domain,
    pub g: &'a ScalarField,
}

/// Per-radius output of [`Sampler::profile`].
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub center_value: f64,
    pub stats: Vec<BallStats>,
    /// Radius was below half the lattice spacing; the ball was reduced to its
    /// center plus sphere points, and its mean to the center value.
    pub fallback: Vec<bool>,
}

impl Profile {
    pub fn fallback_count(&self) -> usize {
        self.fallback.iter().filter(|&&f| f).count()
    }
}

/// Read-only ball queries on a field, optionally overriding values outside a
/// domain by exterior data.
#[derive(Debug, Clone, Copy)]
pub struct Sampler<'a> {
    pub field: &'a ScalarField,
    pub exterior: Option<Exterior<'a>>,
    pub spec: SamplingSpec,
}

impl<'a> Sampler<'a> {
    pub fn new(field: &'a ScalarField, spec: SamplingSpec) -> Self {
        Self { field, exterior: None, spec }
    }

    pub fn with_exterior(field: &'a ScalarField, domain: &'a Domain, g: &'a ScalarField, spec: SamplingSpec) -> Self {
        Self { field, exterior: Some(Exterior { domain, g }), spec }
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        if let Some(ext) = &self.exterior {
            if !ext.domain.contains(x) {
                return ext.g.value(x);
            }
        }
        self.field.value(x)
    }

    /// Resolution used to size the sphere sample sets.
    pub fn resolution(&self) -> Option<f64> {
        match self.field {
            ScalarField::Lattice(l) => Some(l.h()),
            ScalarField::Analytic(_) => self.spec.h,
        }
    }

    fn sphere_points(&self, center: &[f64], radius: f64) -> impl Iterator<Item = Vec<f64>> + '_ {
        let d = center.len();
        let count = self.spec.boundary_count(d, radius, self.resolution());
        let c = center.to_vec();
        sphere_directions(d, count)
            .into_iter()
            .map(move |u| c.iter().zip(&u).map(|(a, b)| a + radius * b).collect())
    }

    /// Ball statistics for several radii around one center in a single pass.
    pub fn profile(&self, center: &[f64], radii: &[f64]) -> Result<Profile> {
        if radii.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidParameter("ball radii must be positive".into()));
        }
        match self.field {
            ScalarField::Lattice(l) => self.lattice_profile(l, center, radii),
            ScalarField::Analytic(_) => self.analytic_profile(center, radii),
        }
    }

    /// Nodes of the closed box around `center` of half-width `reach`, as
    /// `(distance, flat index)` sorted by distance (ties by index).
    fn nodes_by_distance(&self, lat: &LatticeField, frac: &[f64], center: &[f64], reach: f64) -> Result<Vec<(f64, usize)>> {
        let grid = &lat.grid;
        let d = grid.dim();
        let rr = reach / grid.h;
        let mut lo = vec![0usize; d];
        let mut hi = vec![0usize; d];
        for k in 0..d {
            let a = (frac[k] - rr).ceil();
            let b = (frac[k] + rr).floor();
            if a < 0.0 || b > (grid.counts[k] - 1) as f64 {
                return Err(Error::OutsideRegion { x: center.to_vec(), radius: reach });
            }
            lo[k] = a as usize;
            hi[k] = b as usize;
        }
        let mut out = Vec::new();
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Ok(out);
        }
        let strides: Vec<usize> = (0..d).map(|k| grid.stride(k)).collect();
        let mut idx = lo.clone();
        'outer: loop {
            let mut dist2 = 0.0;
            let mut flat = 0usize;
            for k in 0..d {
                let t = idx[k] as f64 - frac[k];
                dist2 += t * t;
                flat += idx[k] * strides[k];
            }
            if dist2 <= rr * rr {
                out.push((dist2.sqrt() * grid.h, flat));
            }
            let mut k = 0;
            loop {
                if idx[k] < hi[k] {
                    idx[k] += 1;
                    break;
                }
                idx[k] = lo[k];
                k += 1;
                if k == d {
                    break 'outer;
                }
            }
        }
        out.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(out)
    }

    /// Fraction of the cell of node `flat` lying inside `B_r(center)`, using a
    /// linear ramp across the cell's width along the radial direction.
    fn cell_weight(lat: &LatticeField, flat: usize, dist: f64, center: &[f64], r: f64) -> f64 {
        let h = lat.grid.h;
        if dist == 0.0 {
            return if r >= h / 2.0 { 1.0 } else { 0.0 };
        }
        let node = lat.grid.node(flat);
        let l1: f64 = node.iter().zip(center).map(|(a, b)| (a - b).abs()).sum::<f64>() / dist;
        (0.5 + (r - dist) / (h * l1)).clamp(0.0, 1.0)
    }

    fn lattice_profile(&self, lat: &LatticeField, center: &[f64], radii: &[f64]) -> Result<Profile> {
        let grid = &lat.grid;
        let d = grid.dim();
        if center.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: center.len() });
        }
        let h = grid.h;
        let snapped = grid.snap(center);
        let frac: Vec<f64> = match snapped {
            Some(flat) => grid.multi_index(flat).iter().map(|&i| i as f64).collect(),
            None => grid.frac_index(center),
        };
        let center_value = match snapped {
            Some(flat) => lat.values[flat],
            None => self.value_at(center),
        };
        // cells cut by the sphere extend at most half a cell diagonal past it
        let shell = 0.5 * h * (d as f64).sqrt();
        let r_max = radii.iter().cloned().fold(0.0, f64::max);
        let nodes = self.nodes_by_distance(lat, &frac, center, r_max + shell)?;

        let n = nodes.len();
        let mut sum = vec![0.0; n + 1];
        let mut max = vec![f64::NEG_INFINITY; n + 1];
        let mut min = vec![f64::INFINITY; n + 1];
        for (k, &(_, flat)) in nodes.iter().enumerate() {
            let v = lat.values[flat];
            sum[k + 1] = sum[k] + v;
            max[k + 1] = max[k].max(v);
            min[k + 1] = min[k].min(v);
        }

        let mut stats = Vec::with_capacity(radii.len());
        let mut fallback = vec![false; radii.len()];
        for (i, &r) in radii.iter().enumerate() {
            let mut sup = center_value;
            let mut inf = center_value;
            for y in self.sphere_points(center, r) {
                let v = self.value_at(&y);
                sup = sup.max(v);
                inf = inf.min(v);
            }
            if r < h / 2.0 {
                fallback[i] = true;
                stats.push(BallStats { sup, inf, mean: center_value });
                continue;
            }
            let closed = nodes.partition_point(|&(dd, _)| dd <= r);
            sup = sup.max(max[closed]);
            inf = inf.min(min[closed]);
            let full = nodes.partition_point(|&(dd, _)| dd <= r - shell);
            let outer = nodes.partition_point(|&(dd, _)| dd <= r + shell);
            let mut acc = sum[full];
            let mut weight = full as f64;
            for &(dd, flat) in &nodes[full..outer] {
                let w = Self::cell_weight(lat, flat, dd, center, r);
                acc += w * lat.values[flat];
                weight += w;
            }
            let mean = if weight > 0.0 { acc / weight } else { center_value };
            stats.push(BallStats { sup, inf, mean: mean.clamp(inf, sup) });
        }
        Ok(Profile { center_value, stats, fallback })
    }

    fn analytic_profile(&self, center: &[f64], radii: &[f64]) -> Result<Profile> {
        let d = center.len();
        let center_value = self.value_at(center);
        let rule = GaussLegendre::new(self.spec.gauss_order.max(2))
            .map_err(|e| Error::InvalidParameter(format!("gauss rule: {e}")))?;
        let mut stats = Vec::with_capacity(radii.len());
        for &r in radii {
            let mut sup = center_value;
            let mut inf = center_value;
            for y in self.sphere_points(center, r) {
                let v = self.value_at(&y);
                sup = sup.max(v);
                inf = inf.min(v);
            }
            let per = self.spec.interior_per_radius.max(1) as f64;
            let s = match self.spec.h {
                Some(h) => h.max(r / per),
                None => r / per,
            };
            let m = (r / s).floor() as i64;
            let mut off = vec![-m; d];
            let mut y = vec![0.0; d];
            'grid: loop {
                let mut n2 = 0.0;
                for k in 0..d {
                    let t = off[k] as f64 * s;
                    n2 += t * t;
                    y[k] = center[k] + t;
                }
                if n2 <= r * r {
                    let v = self.value_at(&y);
                    sup = sup.max(v);
                    inf = inf.min(v);
                }
                let mut k = 0;
                loop {
                    if off[k] < m {
                        off[k] += 1;
                        break;
                    }
                    off[k] = -m;
                    k += 1;
                    if k == d {
                        break 'grid;
                    }
                }
            }
            let mean = self.gauss_mean(&rule, center, r)?.clamp(inf, sup);
            stats.push(BallStats { sup, inf, mean });
        }
        Ok(Profile { center_value, fallback: vec![false; radii.len()], stats })
    }

    fn gauss_mean(&self, rule: &GaussLegendre, center: &[f64], r: f64) -> Result<f64> {
        let pairs = rule.as_node_weight_pairs();
        let d = center.len();
        match d {
            1 => {
                let mut acc = 0.0;
                for &(xi, w) in pairs {
                    acc += w * self.value_at(&[center[0] + r * xi]);
                }
                Ok(acc / 2.0)
            }
            2 => {
                let n_theta = 2 * pairs.len();
                let mut acc = 0.0;
                for &(xi, w) in pairs {
                    let rho = r * (1.0 + xi) / 2.0;
                    let mut ring = 0.0;
                    for j in 0..n_theta {
                        let th = std::f64::consts::TAU * j as f64 / n_theta as f64;
                        ring += self.value_at(&[center[0] + rho * th.cos(), center[1] + rho * th.sin()]);
                    }
                    acc += w * rho * ring / n_theta as f64;
                }
                // (r/2) * sum w rho * avg_ring * 2 pi / (pi r^2)
                Ok(acc / r)
            }
            3 => {
                let n_phi = 2 * pairs.len();
                let mut acc = 0.0;
                for &(xi, w) in pairs {
                    let rho = r * (1.0 + xi) / 2.0;
                    let mut shell = 0.0;
                    for &(mu, wm) in pairs {
                        let st = (1.0 - mu * mu).sqrt();
                        let mut ring = 0.0;
                        for j in 0..n_phi {
                            let ph = std::f64::consts::TAU * j as f64 / n_phi as f64;
                            ring += self.value_at(&[
                                center[0] + rho * st * ph.cos(),
                                center[1] + rho * st * ph.sin(),
                                center[2] + rho * mu,
                            ]);
                        }
                        shell += wm * ring / n_phi as f64;
                    }
                    // shell is the sphere average times 2
                    acc += w * rho * rho * shell / 2.0;
                }
                // (r/2) sum w rho^2 avg * 4 pi / (4/3 pi r^3)
                Ok(acc * 1.5 / (r * r))
            }
            _ => Err(Error::Unsupported(format!("analytic ball mean in dimension {d}"))),
        }
    }

    /// Sampled maximizer (or minimizer) of the field over a closed ball.
    pub fn extreme_point(&self, center: &[f64], radius: f64, maximize: bool) -> Result<(Vec<f64>, f64)> {
        let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
        let mut best_x = center.to_vec();
        let mut best_v = self.value_at(center);
        for y in self.sphere_points(center, radius) {
            let v = self.value_at(&y);
            if better(v, best_v) {
                best_v = v;
                best_x = y;
            }
        }
        match self.field {
            ScalarField::Lattice(lat) => {
                let grid = &lat.grid;
                if radius < grid.h / 2.0 {
                    return Ok((best_x, best_v));
                }
                let frac: Vec<f64> = match grid.snap(center) {
                    Some(flat) => grid.multi_index(flat).iter().map(|&i| i as f64).collect(),
                    None => grid.frac_index(center),
                };
                for (_, flat) in self.nodes_by_distance(lat, &frac, center, radius)? {
                    let v = lat.values[flat];
                    if better(v, best_v) {
                        best_v = v;
                        best_x = grid.node(flat);
                    }
                }
                Ok((best_x, best_v))
            }
            ScalarField::Analytic(_) => {
                let d = center.len();
                let per = self.spec.interior_per_radius.max(1) as f64;
                let s = self.spec.h.map_or(radius / per, |h| h.max(radius / per));
                let m = (radius / s).floor() as i64;
                let mut off = vec![-m; d];
                'grid: loop {
                    let y: Vec<f64> = (0..d).map(|k| center[k] + off[k] as f64 * s).collect();
                    let n2: f64 = (0..d).map(|k| (off[k] as f64 * s).powi(2)).sum();
                    if n2 <= radius * radius {
                        let v = self.value_at(&y);
                        if better(v, best_v) {
                            best_v = v;
                            best_x = y;
                        }
                    }
                    let mut k = 0;
                    loop {
                        if off[k] < m {
                            off[k] += 1;
                            break;
                        }
                        off[k] = -m;
                        k += 1;
                        if k == d {
                            break 'grid;
                        }
                    }
                }
                Ok((best_x, best_v))
            }
        }
    }
}

/// Sup, inf and mean of `phi` over the closed ball `B_radius(center)`.
///
/// Lattice fields reject radii below half the spacing; callers that can live
/// with the center-value fallback use [`Sampler::profile`] directly.
pub fn ball_stats(phi: &ScalarField, center: &[f64], radius: f64, sampling: SamplingSpec) -> Result<BallStats> {
    if let ScalarField::Lattice(l) = phi {
        if radius < l.h() / 2.0 {
            return Err(Error::RadiusBelowResolution { radius, h: l.h() });
        }
    }
    let prof = Sampler::new(phi, sampling).profile(center, &[radius])?;
    Ok(prof.stats[0])
}
