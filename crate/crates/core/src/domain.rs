//! Spatial domains: axis-aligned boxes and balls.

use serde::{Deserialize, Serialize};

/// An open bounded set. Balls satisfy the uniform exterior ball condition for
/// any radius; boxes satisfy it at face points, which is where barriers are
/// anchored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Domain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Domain::Box { lo: vec![lo], hi: vec![hi] }
    }

    pub fn cube(d: usize, half_width: f64) -> Self {
        Domain::Box { lo: vec![-half_width; d], hi: vec![half_width; d] }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(&v, (&a, &b))| v > a && v < b),
            Domain::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                r2 < radius * radius
            }
        }
    }

    /// Euclidean distance to the closure; 0 inside.
    pub fn distance_outside(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&v, (&a, &b))| {
                    let e = (a - v).max(v - b).max(0.0);
                    e * e
                })
                .sum::<f64>()
                .sqrt(),
            Domain::Ball { center, radius } => {
                let r: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                (r - radius).max(0.0)
            }
        }
    }

    /// Distance from an interior point to the boundary.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Box { lo, hi } => {
                if self.contains(x) {
                    x.iter()
                        .zip(lo.iter().zip(hi))
                        .map(|(&v, (&a, &b))| (v - a).min(b - v))
                        .fold(f64::INFINITY, f64::min)
                } else {
                    self.distance_outside(x)
                }
            }
            Domain::Ball { center, radius } => {
                let r: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                (radius - r).abs()
            }
        }
    }

    /// Membership in the exterior shell `{x not in domain, dist(x, domain) < width}`.
    pub fn in_exterior_band(&self, x: &[f64], width: f64) -> bool {
        !self.contains(x) && self.distance_outside(x) < width
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt(),
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Outward unit normal at a boundary point, if the point is a face point
    /// of a box (not an edge or corner) or lies on the sphere.
    pub fn outward_normal(&self, x: &[f64]) -> Option<Vec<f64>> {
        let tol = 1e-9;
        match self {
            Domain::Box { lo, hi } => {
                let mut normal = vec![0.0; x.len()];
                let mut faces = 0;
                for k in 0..x.len() {
                    if x[k] < lo[k] - tol || x[k] > hi[k] + tol {
                        return None;
                    }
                    if (x[k] - lo[k]).abs() <= tol {
                        normal[k] = -1.0;
                        faces += 1;
                    } else if (x[k] - hi[k]).abs() <= tol {
                        normal[k] = 1.0;
                        faces += 1;
                    }
                }
                (faces == 1).then_some(normal)
            }
            Domain::Ball { center, radius } => {
                let r: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if (r - radius).abs() > tol * radius.max(1.0) {
                    return None;
                }
                Some(x.iter().zip(center).map(|(a, b)| (a - b) / r).collect())
            }
        }
    }

    /// Deterministic sample of boundary points (exact for d = 1).
    pub fn boundary_samples(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let n = per_axis.max(2);
        match self {
            Domain::Box { lo, hi } => {
                if d == 1 {
                    return vec![vec![lo[0]], vec![hi[0]]];
                }
                let mut out = Vec::new();
                for face_axis in 0..d {
                    for &side in &[lo[face_axis], hi[face_axis]] {
                        let m = d - 1;
                        let total = n.pow(m as u32);
                        for t in 0..total {
                            let mut rem = t;
                            let mut p = vec![0.0; d];
                            let mut slot = 0;
                            for k in 0..d {
                                if k == face_axis {
                                    p[k] = side;
                                } else {
                                    let i = rem % n;
                                    rem /= n;
                                    p[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (n - 1) as f64;
                                    slot += 1;
                                }
                            }
                            let _ = slot;
                            out.push(p);
                        }
                    }
                }
                out
            }
            Domain::Ball { center, radius } => crate::field::sphere_directions(d, 4 * n)
                .into_iter()
                .map(|u| center.iter().zip(&u).map(|(c, v)| c + radius * v).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contains_and_band_are_disjoint() {
        let doms = [Domain::interval(-1.0, 1.0), Domain::Ball { center: vec![0.0, 0.0], radius: 1.0 }];
        for dom in &doms {
            let d = dom.dim();
            for i in 0..400 {
                let t = -2.0 + 4.0 * i as f64 / 399.0;
                let x = vec![t; d];
                assert!(!(dom.contains(&x) && dom.in_exterior_band(&x, 0.5)));
            }
        }
    }

    #[test]
    fn distances() {
        let b = Domain::interval(-1.0, 1.0);
        assert_eq!(b.distance_outside(&[1.5]), 0.5);
        assert_eq!(b.distance_to_boundary(&[0.25]), 0.75);
        assert!(b.in_exterior_band(&[1.2], 0.3));
        assert!(!b.in_exterior_band(&[1.4], 0.3));
        assert!(!b.in_exterior_band(&[0.0], 0.3));
        let ball = Domain::Ball { center: vec![0.0, 0.0], radius: 1.0 };
        assert!((ball.distance_outside(&[3.0, 4.0]) - 4.0).abs() < 1e-15);
        assert_eq!(ball.outward_normal(&[0.0, 1.0]), Some(vec![0.0, 1.0]));
    }

    #[test]
    fn box_corner_has_no_normal() {
        let b = Domain::cube(2, 1.0);
        assert_eq!(b.outward_normal(&[1.0, 0.0]), Some(vec![1.0, 0.0]));
        assert_eq!(b.outward_normal(&[1.0, 1.0]), None);
    }
}
