//! Registered closed-form test functions with analytic derivatives.

use serde::{Deserialize, Serialize};

use crate::calculus::{p_laplacian_radial, RadialKind};

fn default_one() -> f64 {
    1.0
}

/// A closed-form scalar function of a spatial point.
///
/// Every variant except [`TestFunction::Bump`] carries an analytic gradient and
/// Hessian, which the verification oracles rely on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant {
        value: f64,
    },
    /// `<coef, x> + offset`
    Affine {
        coef: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `scale |x - center|^2`
    Quadratic {
        center: Vec<f64>,
        #[serde(default = "default_one")]
        scale: f64,
    },
    /// `amplitude exp(<direction, x>)`
    Exp {
        direction: Vec<f64>,
        #[serde(default = "default_one")]
        amplitude: f64,
    },
    /// `scale |x - center|^(-exponent)`
    NegPower {
        center: Vec<f64>,
        exponent: f64,
        #[serde(default = "default_one")]
        scale: f64,
    },
    /// `scale |x - center|^exponent`
    PosPower {
        center: Vec<f64>,
        exponent: f64,
        #[serde(default = "default_one")]
        scale: f64,
    },
    /// `height max(0, 1 - |x - center| / radius)`; Lipschitz, no derivatives.
    Bump {
        center: Vec<f64>,
        #[serde(default = "default_one")]
        radius: f64,
        #[serde(default = "default_one")]
        height: f64,
    },
    /// `amplitude exp(-|x - center|^2 / (2 sigma^2))`
    Gaussian {
        center: Vec<f64>,
        sigma: f64,
        #[serde(default = "default_one")]
        amplitude: f64,
    },
}

/// Names accepted in configuration files, with a one-line description.
pub const REGISTRY: &[(&str, &str)] = &[
    ("constant", "value"),
    ("affine", "<coef, x> + offset"),
    ("quadratic", "scale |x - center|^2"),
    ("exp", "amplitude exp(<direction, x>)"),
    ("neg_power", "scale |x - center|^(-exponent); barrier exponent (p+d-2)/(p-1)"),
    ("pos_power", "scale |x - center|^exponent; barrier exponent (3p-2)/(p-1)"),
    ("bump", "height max(0, 1 - |x - center|/radius)"),
    ("gaussian", "amplitude exp(-|x - center|^2 / (2 sigma^2))"),
];

fn dist(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

impl TestFunction {
    /// `|x - z|^(-(p+d-2)/(p-1))`, the boundary barrier profile.
    pub fn neg_radial_barrier(center: Vec<f64>, p: f64) -> Self {
        let d = center.len() as f64;
        TestFunction::NegPower { center, exponent: (p + d - 2.0) / (p - 1.0), scale: 1.0 }
    }

    /// `|x - z|^((3p-2)/(p-1))`, whose p-Laplacian vanishes at `z`.
    pub fn pos_radial_barrier(center: Vec<f64>, p: f64) -> Self {
        TestFunction::PosPower { center, exponent: (3.0 * p - 2.0) / (p - 1.0), scale: 1.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::Constant { .. } => "constant",
            TestFunction::Affine { .. } => "affine",
            TestFunction::Quadratic { .. } => "quadratic",
            TestFunction::Exp { .. } => "exp",
            TestFunction::NegPower { .. } => "neg_power",
            TestFunction::PosPower { .. } => "pos_power",
            TestFunction::Bump { .. } => "bump",
            TestFunction::Gaussian { .. } => "gaussian",
        }
    }

    /// Dimension fixed by the parameters, if any (constants work everywhere).
    pub fn dim(&self) -> Option<usize> {
        match self {
            TestFunction::Constant { .. } => None,
            TestFunction::Affine { coef, .. } => Some(coef.len()),
            TestFunction::Exp { direction, .. } => Some(direction.len()),
            TestFunction::Quadratic { center, .. }
            | TestFunction::NegPower { center, .. }
            | TestFunction::PosPower { center, .. }
            | TestFunction::Bump { center, .. }
            | TestFunction::Gaussian { center, .. } => Some(center.len()),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Affine { coef, offset } => {
                coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + offset
            }
            TestFunction::Quadratic { center, scale } => {
                let r = dist(x, center);
                scale * r * r
            }
            TestFunction::Exp { direction, amplitude } => {
                amplitude * direction.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().exp()
            }
            TestFunction::NegPower { center, exponent, scale } => {
                scale * dist(x, center).powf(-exponent)
            }
            TestFunction::PosPower { center, exponent, scale } => {
                scale * dist(x, center).powf(*exponent)
            }
            TestFunction::Bump { center, radius, height } => {
                height * (1.0 - dist(x, center) / radius).max(0.0)
            }
            TestFunction::Gaussian { center, sigma, amplitude } => {
                let r = dist(x, center);
                amplitude * (-r * r / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    /// Radial profile `(f'(r), f''(r))` for the radial families.
    fn radial_derivs(&self, r: f64) -> Option<(f64, f64)> {
        match self {
            TestFunction::Quadratic { scale, .. } => Some((2.0 * scale * r, 2.0 * scale)),
            TestFunction::NegPower { exponent: a, scale, .. } => {
                Some((-scale * a * r.powf(-a - 1.0), scale * a * (a + 1.0) * r.powf(-a - 2.0)))
            }
            TestFunction::PosPower { exponent: b, scale, .. } => {
                Some((scale * b * r.powf(b - 1.0), scale * b * (b - 1.0) * r.powf(b - 2.0)))
            }
            TestFunction::Gaussian { sigma, amplitude, .. } => {
                let s2 = sigma * sigma;
                let f = amplitude * (-r * r / (2.0 * s2)).exp();
                Some((-f * r / s2, f * (r * r / (s2 * s2) - 1.0 / s2)))
            }
            _ => None,
        }
    }

    fn center(&self) -> Option<&[f64]> {
        match self {
            TestFunction::Quadratic { center, .. }
            | TestFunction::NegPower { center, .. }
            | TestFunction::PosPower { center, .. }
            | TestFunction::Bump { center, .. }
            | TestFunction::Gaussian { center, .. } => Some(center),
            _ => None,
        }
    }

    /// Analytic gradient, `None` for the Lipschitz bump.
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let d = x.len();
        match self {
            TestFunction::Constant { .. } => Some(vec![0.0; d]),
            TestFunction::Affine { coef, .. } => Some(coef.clone()),
            TestFunction::Exp { direction, .. } => {
                let f = self.value(x);
                Some(direction.iter().map(|a| f * a).collect())
            }
            TestFunction::Bump { .. } => None,
            _ => {
                let z = self.center()?;
                let r = dist(x, z);
                if r == 0.0 {
                    return match self {
                        TestFunction::NegPower { .. } => None,
                        TestFunction::PosPower { exponent, .. } if *exponent < 1.0 => None,
                        _ => Some(vec![0.0; d]),
                    };
                }
                let (f1, _) = self.radial_derivs(r)?;
                Some(x.iter().zip(z).map(|(a, b)| f1 * (a - b) / r).collect())
            }
        }
    }

    /// Analytic Hessian as a dense row-major `d x d` matrix.
    pub fn hessian(&self, x: &[f64]) -> Option<Vec<f64>> {
        let d = x.len();
        match self {
            TestFunction::Constant { .. } | TestFunction::Affine { .. } => Some(vec![0.0; d * d]),
            TestFunction::Exp { direction, .. } => {
                let f = self.value(x);
                let mut h = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        h[i * d + j] = f * direction[i] * direction[j];
                    }
                }
                Some(h)
            }
            TestFunction::Bump { .. } => None,
            _ => {
                let z = self.center()?;
                let r = dist(x, z);
                let mut h = vec![0.0; d * d];
                if r == 0.0 {
                    let diag = match self {
                        TestFunction::Quadratic { scale, .. } => 2.0 * scale,
                        TestFunction::Gaussian { sigma, amplitude, .. } => -amplitude / (sigma * sigma),
                        TestFunction::PosPower { exponent, scale, .. } => {
                            if *exponent > 2.0 {
                                0.0
                            } else if *exponent == 2.0 {
                                2.0 * scale
                            } else {
                                return None;
                            }
                        }
                        _ => return None,
                    };
                    for i in 0..d {
                        h[i * d + i] = diag;
                    }
                    return Some(h);
                }
                let (f1, f2) = self.radial_derivs(r)?;
                let n: Vec<f64> = x.iter().zip(z).map(|(a, b)| (a - b) / r).collect();
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[i * d + j] = f2 * n[i] * n[j] + f1 / r * (delta - n[i] * n[j]);
                    }
                }
                Some(h)
            }
        }
    }

    /// Closed-form p-Laplacian for the radial power families, valid at the
    /// center as well (by continuous extension).
    pub fn closed_form_p_laplacian(&self, x: &[f64], p: f64) -> Option<f64> {
        let d = x.len();
        match self {
            TestFunction::Constant { .. } => Some(0.0),
            TestFunction::Affine { .. } => Some(0.0),
            TestFunction::PosPower { center, exponent, scale } => {
                let r = dist(x, center);
                p_laplacian_radial(RadialKind::PosPower, *exponent, r, p, d)
                    .ok()
                    .map(|v| scale.abs().powf(p - 2.0) * scale * v)
            }
            TestFunction::NegPower { center, exponent, scale } => {
                let r = dist(x, center);
                p_laplacian_radial(RadialKind::NegPower, *exponent, r, p, d)
                    .ok()
                    // |x|^-a has f' < 0; the sign of the radial formula already
                    // accounts for that, scale enters as a signed power.
                    .map(|v| scale.abs().powf(p - 2.0) * scale * v)
            }
            _ => None,
        }
    }
}
