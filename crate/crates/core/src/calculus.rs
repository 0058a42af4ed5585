//! Signed powers, the truncated geometric-mean identity and closed-form
//! p-Laplacians used as verification oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::TestFunction;

/// `sgn(a) |a|^q`.
pub fn signed_pow(a: f64, q: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a.signum() * a.abs().powf(q)
    }
}

/// `inf` over `c` in `[m, big_m]` of `alpha c^(1-alpha) a + (1-alpha) c^(-alpha) b`.
///
/// The objective is unimodal in `c` with stationary point `c* = b / a`, so the
/// infimum is attained at `c*` clamped to the interval. With `m = 0` and
/// `big_m = inf` this is `a^alpha b^(1-alpha)`.
pub fn geometric_mean_inf(a: f64, b: f64, alpha: f64, m: f64, big_m: f64) -> Result<f64> {
    if a < 0.0 || b < 0.0 || a.is_nan() || b.is_nan() {
        return Err(Error::NegativeInput { a, b });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if !(m >= 0.0 && m < big_m) {
        return Err(Error::InvalidParameter(format!("need 0 <= m < M, got m = {m}, M = {big_m}")));
    }
    let objective = |c: f64| alpha * c.powf(1.0 - alpha) * a + (1.0 - alpha) * c.powf(-alpha) * b;
    if a == 0.0 {
        // decreasing in c
        return Ok(if big_m.is_infinite() { 0.0 } else { (1.0 - alpha) * big_m.powf(-alpha) * b });
    }
    if b == 0.0 {
        // increasing in c
        return Ok(alpha * m.powf(1.0 - alpha) * a);
    }
    let c_star = b / a;
    if c_star < m {
        Ok(objective(m))
    } else if c_star > big_m {
        Ok(objective(big_m))
    } else {
        Ok(a.powf(alpha) * b.powf(1.0 - alpha))
    }
}

/// Upper bound on the truncation excess `alpha a m^(1-alpha) + (1-alpha) b M^(-alpha)`.
pub fn truncation_bound(a: f64, b: f64, alpha: f64, m: f64, big_m: f64) -> f64 {
    let upper = if big_m.is_infinite() { 0.0 } else { (1.0 - alpha) * b * big_m.powf(-alpha) };
    alpha * a * m.powf(1.0 - alpha) + upper
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialKind {
    /// `|x|^(-a)`
    NegPower,
    /// `|x|^b`
    PosPower,
}

/// p-Laplacian of `|x|^(-a)` or `|x|^b` in `R^d` as a function of `r = |x|`.
///
/// `|x|^b` with `b (p-1) > p` extends continuously by 0 to the origin.
pub fn p_laplacian_radial(kind: RadialKind, exponent: f64, r: f64, p: f64, d: usize) -> Result<f64> {
    if !(exponent > 0.0) {
        return Err(Error::InvalidParameter(format!("exponent must be positive, got {exponent}")));
    }
    if r < 0.0 {
        return Err(Error::InvalidParameter(format!("radius must be nonnegative, got {r}")));
    }
    let d = d as f64;
    match kind {
        RadialKind::NegPower => {
            if r == 0.0 {
                return Err(Error::InvalidParameter("neg_power is singular at r = 0".into()));
            }
            let a = exponent;
            Ok(a.powf(p - 1.0) * (a * (p - 1.0) + p - d) * r.powf(-a * (p - 1.0) - p))
        }
        RadialKind::PosPower => {
            let b = exponent;
            let power = b * (p - 1.0) - p;
            if r == 0.0 {
                if power > 0.0 {
                    return Ok(0.0);
                }
                if power < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "pos_power with b(p-1) <= p is singular at r = 0 (b = {b})"
                    )));
                }
            }
            Ok(b.powf(p - 1.0) * (b * (p - 1.0) + d - p) * r.powf(power))
        }
    }
}

/// Critical-point threshold on `|grad phi|`.
pub fn critical_tolerance(scale: f64) -> f64 {
    1e-12 * (1.0 + scale.abs())
}

/// `|grad phi|^(p-2) (lap phi + (p-2) <D^2 phi n, n>)` with `n = grad phi / |grad phi|`.
///
/// At a critical point the value comes from a known closed form, or is 0 when
/// the Hessian vanishes there; otherwise the point is reported as critical.
pub fn analytic_p_laplacian(phi: &TestFunction, x: &[f64], p: f64) -> Result<f64> {
    let d = x.len();
    let grad = phi.gradient(x).ok_or(Error::NoDerivatives)?;
    let hess = phi.hessian(x).ok_or(Error::NoDerivatives)?;
    let g2: f64 = grad.iter().map(|v| v * v).sum();
    let g = g2.sqrt();
    if g <= critical_tolerance(phi.value(x)) {
        if let Some(v) = phi.closed_form_p_laplacian(x, p) {
            return Ok(v);
        }
        if hess.iter().all(|&h| h == 0.0) {
            return Ok(0.0);
        }
        return Err(Error::CriticalPoint { grad_norm: g, x: x.to_vec() });
    }
    let laplacian: f64 = (0..d).map(|i| hess[i * d + i]).sum();
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += hess[i * d + j] * grad[i] * grad[j];
        }
    }
    let normalized = laplacian + (p - 2.0) * quad / g2;
    Ok(g.powf(p - 2.0) * normalized)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense log-spaced scan over `c`; the independent oracle for the closed form.
    fn scan_inf(a: f64, b: f64, alpha: f64, m: f64, big_m: f64) -> f64 {
        let lo = if m > 0.0 { m } else { 1e-12 };
        let hi = if big_m.is_finite() { big_m } else { 1e12 };
        let n = 200_000;
        let (la, lb) = (lo.ln(), hi.ln());
        let f = |c: f64| alpha * c.powf(1.0 - alpha) * a + (1.0 - alpha) * c.powf(-alpha) * b;
        let mut best = f(lo).min(f(hi));
        for i in 0..=n {
            let c = (la + (lb - la) * i as f64 / n as f64).exp();
            best = best.min(f(c));
        }
        best
    }

    #[test]
    fn signed_pow_examples() {
        assert_eq!(signed_pow(-4.0, 0.5), -2.0);
        assert_eq!(signed_pow(0.0, 0.37), 0.0);
        assert!((signed_pow(8.0, 1.0 / 3.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_mean_examples() {
        let inf = f64::INFINITY;
        let v = geometric_mean_inf(4.0, 9.0, 0.5, 0.0, inf).unwrap();
        assert!((v - 6.0).abs() < 1e-14);
        assert!((scan_inf(4.0, 9.0, 0.5, 0.0, inf) - 6.0).abs() < 1e-8);
        assert_eq!(geometric_mean_inf(0.0, 5.0, 0.5, 0.0, inf).unwrap(), 0.0);
        let v = geometric_mean_inf(1.0, 1.0, 2.0 / 3.0, 0.5, 2.0).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        assert!((scan_inf(1.0, 1.0, 2.0 / 3.0, 0.5, 2.0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn geometric_mean_clamped_matches_scan() {
        // c* = 100 lies above M = 2
        let v = geometric_mean_inf(0.01, 1.0, 0.4, 0.5, 2.0).unwrap();
        let s = scan_inf(0.01, 1.0, 0.4, 0.5, 2.0);
        assert!((v - s).abs() <= 1e-10 * s);
        // c* = 0.01 lies below m = 0.5
        let v = geometric_mean_inf(1.0, 0.01, 0.4, 0.5, 2.0).unwrap();
        let s = scan_inf(1.0, 0.01, 0.4, 0.5, 2.0);
        assert!((v - s).abs() <= 1e-10 * s);
    }

    #[test]
    fn geometric_mean_rejects_negative() {
        assert!(matches!(
            geometric_mean_inf(-1.0, 1.0, 0.5, 0.0, 1.0),
            Err(Error::NegativeInput { .. })
        ));
    }

    #[test]
    fn radial_examples() {
        let v = p_laplacian_radial(RadialKind::PosPower, 3.5, 1.0, 3.0, 2).unwrap();
        assert!((v - 73.5).abs() < 1e-12);
        let v = p_laplacian_radial(RadialKind::NegPower, 1.5, 1.0, 3.0, 2).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        for &p in &[2.2, 3.0, 5.0] {
            let b = (3.0 * p - 2.0) / (p - 1.0);
            for d in 1..4 {
                assert_eq!(p_laplacian_radial(RadialKind::PosPower, b, 0.0, p, d).unwrap(), 0.0);
            }
        }
        assert!(p_laplacian_radial(RadialKind::NegPower, 1.0, 0.0, 3.0, 2).is_err());
    }

    #[test]
    fn analytic_examples() {
        let q = TestFunction::Quadratic { center: vec![0.0], scale: 1.0 };
        assert!((analytic_p_laplacian(&q, &[1.0], 3.0).unwrap() - 8.0).abs() < 1e-12);
        let aff = TestFunction::Affine { coef: vec![2.0, -1.0], offset: 3.0 };
        assert_eq!(analytic_p_laplacian(&aff, &[0.3, 0.4], 3.0).unwrap(), 0.0);
        let pw = TestFunction::PosPower { center: vec![0.0, 0.0], exponent: 3.5, scale: 1.0 };
        let v = analytic_p_laplacian(&pw, &[0.6, 0.8], 3.0).unwrap();
        assert!((v - 73.5).abs() < 1e-9 * 73.5);
        // at its center the closed form answers
        assert_eq!(analytic_p_laplacian(&pw, &[0.0, 0.0], 3.0).unwrap(), 0.0);
        // quadratic at its minimum has nonzero Hessian and no closed form
        assert!(matches!(analytic_p_laplacian(&q, &[0.0], 3.0), Err(Error::CriticalPoint { .. })));
    }
}
