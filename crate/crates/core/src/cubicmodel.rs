//! Cubic-weight orthogonal polynomials on Gamma = a0 L0 + a1 L1 + a2 L2:
//! moments in closed Airy form, moment determinants D_n(t; N), recurrence
//! coefficients and their exact relation to q_n, p_n, sigma_n.
//!
//! Convention at the API boundary: z = -(sqrt(2) N)^{2/3} t.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airy::{seed_jet, seed_jet_dd, AiryError, Lambda, SeedWeights};
use crate::hankel::{hankel_jet, max_entry, solve};
use crate::num::{c, Scaled, C64, I};
use crate::taufun::{Precision, TauOptions, PIVOT_WARN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CubicError {
    #[error("index {n} exceeds n_max = {n_max}")]
    Capacity { n: usize, n_max: usize },
    #[error(transparent)]
    Airy(#[from] AiryError),
    /// D_{index} vanishes; the polynomial degree drops.
    #[error("degenerate moment determinant D_{index} at t = {t}")]
    Degenerate { index: i64, t: C64 },
    #[error("N must be positive, got {0}")]
    BadN(f64),
}

/// Weights of the three rays L_k = {r e^{(-1 + 2k/3) pi i}}, oriented toward 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourWeights {
    pub lambda: Lambda,
    pub alpha0: C64,
    pub alpha1: C64,
    pub alpha2: C64,
}

impl ContourWeights {
    pub fn new(lambda: Lambda) -> Self {
        match lambda {
            Lambda::Finite(l) => {
                let a0 = l / PI;
                let a1 = -l / (2.0 * PI) + 1.0 / (2.0 * PI * I);
                // a2 = -a0 - a1 keeps the sum exactly zero
                ContourWeights { lambda, alpha0: a0, alpha1: a1, alpha2: -a0 - a1 }
            }
            Lambda::Infinity => ContourWeights {
                lambda,
                alpha0: c(1.0 / PI, 0.0),
                alpha1: c(-0.5 / PI, 0.0),
                alpha2: c(-0.5 / PI, 0.0),
            },
        }
    }

    pub fn alphas(&self) -> [C64; 3] {
        [self.alpha0, self.alpha1, self.alpha2]
    }

    /// Seed weights (C1, C2) = ((a1 - a2) pi i, a0 pi).
    pub fn seed(&self) -> SeedWeights {
        SeedWeights::raw((self.alpha1 - self.alpha2) * PI * I, self.alpha0 * PI)
    }

    /// Direction angle of L_k.
    pub fn ray_angle(k: usize) -> f64 {
        (-1.0 + 2.0 * k as f64 / 3.0) * PI
    }
}

/// z = -(sqrt(2) N)^{2/3} t.
pub fn t_to_z(t: C64, big_n: f64) -> C64 {
    -(2f64.sqrt() * big_n).powf(2.0 / 3.0) * t
}

/// t = -(sqrt(2) N)^{-2/3} z.
pub fn z_to_t(z: C64, big_n: f64) -> C64 {
    -z / (2f64.sqrt() * big_n).powf(2.0 / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub t: C64,
    pub big_n: f64,
    pub weights: ContourWeights,
    /// m[k] = int_Gamma s^k e^{-N V(s;t)} ds, V(s;t) = -s^3/3 + s t
    pub m: Vec<Scaled>,
}

fn moment_factor(k: usize, big_n: f64) -> f64 {
    2f64.powf(k as f64 / 3.0) * big_n.powf(-((k + 1) as f64) / 3.0)
}

pub fn moments(t: C64, big_n: f64, weights: &ContourWeights, count: usize) -> Result<MomentTable, CubicError> {
    if big_n.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(CubicError::BadN(big_n));
    }
    let z = t_to_z(t, big_n);
    let jet = seed_jet(z, &weights.seed(), count.max(2) - 1)?;
    let m = (0..count).map(|k| Scaled::from_c64(jet.values[k] * moment_factor(k, big_n))).collect();
    Ok(MomentTable { t, big_n, weights: *weights, m })
}

/// D_n and its t-derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DEval {
    pub n: i64,
    pub t: C64,
    pub value: Scaled,
    pub dvals: Vec<Scaled>,
    pub precision_warning: bool,
}

/// D_n = det[m_{i+j}]_{i,j=0..n} with `deriv` exact t-derivatives (d/dt m_k = -N m_{k+1}).
/// D_{-1} = 1.
pub fn hankel_d_with(n: i64, t: C64, big_n: f64, weights: &ContourWeights, deriv: usize, opts: &TauOptions) -> Result<DEval, CubicError> {
    if n < 0 {
        let mut dvals = vec![Scaled::ZERO; deriv];
        dvals.truncate(deriv);
        return Ok(DEval { n, t, value: Scaled::ONE, dvals, precision_warning: false });
    }
    let size = n as usize + 1;
    if size > opts.n_max + 1 {
        return Err(CubicError::Capacity { n: n as usize, n_max: opts.n_max });
    }
    if big_n <= 0.0 {
        return Err(CubicError::BadN(big_n));
    }
    let need = max_entry(size, deriv);
    let z = t_to_z(t, big_n);
    let s = c(-big_n, 0.0);
    let jet = match opts.precision {
        Precision::Double => {
            let j = seed_jet(z, &weights.seed(), need)?;
            let e: Vec<C64> = (0..=need).map(|k| j.values[k] * moment_factor(k, big_n)).collect();
            hankel_jet(&e, size, deriv, s)
        }
        Precision::Extended => {
            let j = seed_jet_dd(z, &weights.seed(), need)?;
            let e: Vec<_> = (0..=need)
                .map(|k| {
                    let f = crate::num::Dd::from_f64(moment_factor(k, big_n));
                    num_complex::Complex::new(j[k].re * f, j[k].im * f)
                })
                .collect();
            hankel_jet(&e, size, deriv, s)
        }
    };
    Ok(DEval {
        n,
        t,
        value: jet.vals[0],
        dvals: jet.vals[1..].to_vec(),
        precision_warning: jet.min_pivot < PIVOT_WARN,
    })
}

/// D_n with its first t-derivative.
pub fn hankel_d(n: i64, t: C64, big_n: f64, weights: &ContourWeights) -> Result<DEval, CubicError> {
    hankel_d_with(n, t, big_n, weights, 1, &TauOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecCoeffs {
    pub beta: C64,
    pub gamma2: C64,
    pub p_sub: C64,
}

fn nonzero(d: &DEval) -> Result<(), CubicError> {
    if d.value.is_zero() {
        Err(CubicError::Degenerate { index: d.n, t: d.t })
    } else {
        Ok(())
    }
}

/// beta_n, gamma_n^2 and p_{n,n-1} from D_{n-2}, D_{n-1}, D_n. gamma_0^2 is reported as 0.
pub fn recurrence_coeffs(n: usize, t: C64, big_n: f64, weights: &ContourWeights) -> Result<RecCoeffs, CubicError> {
    let n = n as i64;
    let d0 = hankel_d(n, t, big_n, weights)?;
    let d1 = hankel_d(n - 1, t, big_n, weights)?;
    let d2 = hankel_d(n - 2, t, big_n, weights)?;
    nonzero(&d0)?;
    nonzero(&d1)?;
    nonzero(&d2)?;
    let l1 = d1.dvals[0].ratio(&d1.value);
    let l0 = d0.dvals[0].ratio(&d0.value);
    let gamma2 = if n == 0 { C64::new(0.0, 0.0) } else { d0.value.mul(&d2.value).ratio(&d1.value.mul(&d1.value)) };
    Ok(RecCoeffs { beta: (l1 - l0) / big_n, gamma2, p_sub: l1 / big_n })
}

/// Coefficients c_0..c_n (ascending, c_n = 1) of the monic orthogonal polynomial P_n.
pub fn orthopoly(n: usize, t: C64, big_n: f64, weights: &ContourWeights) -> Result<Vec<C64>, CubicError> {
    if n == 0 {
        return Ok(vec![c(1.0, 0.0)]);
    }
    let dn = hankel_d(n as i64 - 1, t, big_n, weights)?;
    nonzero(&dn)?;
    let mt = moments(t, big_n, weights, 2 * n)?;
    let m: Vec<C64> = mt.m.iter().map(|s| s.to_c64()).collect();
    let mut a = Vec::with_capacity(n * n);
    for k in 0..n {
        for j in 0..n {
            a.push(m[k + j]);
        }
    }
    let b: Vec<C64> = (0..n).map(|k| -m[k + n]).collect();
    let mut x = solve(a, b, n).ok_or(CubicError::Degenerate { index: n as i64 - 1, t })?;
    x.push(c(1.0, 0.0));
    Ok(x)
}

/// Orthogonality residuals sum_j c_j m_{k+j}, k < n, relative to the largest term.
pub fn orthogonality_residual(coeffs: &[C64], t: C64, big_n: f64, weights: &ContourWeights) -> Result<f64, CubicError> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(0.0);
    }
    let mt = moments(t, big_n, weights, 2 * n)?;
    let m: Vec<C64> = mt.m.iter().map(|s| s.to_c64()).collect();
    let mut worst = 0.0f64;
    for k in 0..n {
        let terms: Vec<C64> = (0..=n).map(|j| coeffs[j] * m[k + j]).collect();
        let s: C64 = terms.iter().sum();
        let scale = terms.iter().map(|v| v.norm()).fold(0.0, f64::max);
        worst = worst.max(s.norm() / scale);
    }
    Ok(worst)
}

/// Identity check data at one (n, t, N): each tuple is (cubic side, Painleve side).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeCheck {
    pub n: usize,
    pub t: C64,
    pub big_n: f64,
    pub beta: (C64, C64),
    pub gamma2: (C64, C64),
    pub p_sub: (C64, C64),
}

impl BridgeCheck {
    pub fn max_rel(&self) -> f64 {
        [self.beta, self.gamma2, self.p_sub]
            .iter()
            .map(|(a, b)| crate::num::rel_err(*a, *b, 1e-300))
            .fold(0.0, f64::max)
    }
}

/// beta_{n-1}(t) = -(2/N)^{1/3} q_n(z), gamma2_n(t) = -(1/2)(2/N)^{2/3} p_n(z),
/// p_{n,n-1}(t) = -(2/N)^{1/3} sigma_n(z), with z = -(sqrt 2 N)^{2/3} t. n >= 1.
pub fn bridge_check(n: usize, t: C64, big_n: f64, lambda: Lambda) -> Result<BridgeCheck, BridgeError> {
    let w = ContourWeights::new(lambda);
    let z = t_to_z(t, big_n);
    let tri = crate::taufun::painleve_triple(n, z, &SeedWeights::new(lambda))?;
    let rc = recurrence_coeffs(n, t, big_n, &w)?;
    let rp = recurrence_coeffs(n - 1, t, big_n, &w)?;
    let k1 = (2.0 / big_n).cbrt();
    Ok(BridgeCheck {
        n,
        t,
        big_n,
        beta: (rp.beta, -k1 * tri.q),
        gamma2: (rc.gamma2, -0.5 * k1 * k1 * tri.p),
        p_sub: (rc.p_sub, -k1 * tri.sigma),
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BridgeError {
    #[error(transparent)]
    Cubic(#[from] CubicError),
    #[error(transparent)]
    Tau(#[from] crate::taufun::TauError),
}

/// Both sides of D_n(-t; N) N^{(n+1)^2/3} / 2^{n(n+1)/3} = tau_{n+1}((sqrt 2 N)^{2/3} t),
/// and the left side evaluated with a caller-chosen N exponent (to test alternatives).
pub fn d_tau_sides(n: usize, t: C64, big_n: f64, lambda: Lambda, n_exponent: f64) -> Result<(C64, C64), BridgeError> {
    let w = ContourWeights::new(lambda);
    let d = hankel_d(n as i64, -t, big_n, &w)?;
    let z = (2f64.sqrt() * big_n).powf(2.0 / 3.0) * t;
    let tau = crate::taufun::tau(n + 1, z, &w.seed())?;
    let nf = n as f64;
    let lhs = d.value.scale(c(big_n.powf(n_exponent) / 2f64.powf(nf * (nf + 1.0) / 3.0), 0.0));
    Ok((lhs.to_c64(), tau.value.to_c64()))
}

/// The N exponent that makes the scaling identity exact: (n+1)^2/3.
pub fn d_tau_exponent(n: usize) -> f64 {
    ((n + 1) * (n + 1)) as f64 / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rel_err;
    use crate::quad::integrate_composite;
    use proptest::prelude::*;

    const AI0: f64 = 0.355_028_053_887_817_24;
    const BI0: f64 = 0.614_926_627_446_000_7;

    /// int_Gamma s^k e^{-N V(s; t)} ds by Gauss-Legendre on the truncated rays.
    fn moment_by_quadrature(k: usize, t: C64, big_n: f64, w: &ContourWeights) -> C64 {
        let a = w.alphas();
        let mut total = C64::new(0.0, 0.0);
        for (j, alpha) in a.iter().enumerate() {
            let e = C64::from_polar(1.0, ContourWeights::ray_angle(j));
            // oriented from infinity to 0
            let f = |r: f64| {
                let s = r * e;
                s.powu(k as u32) * (big_n * (s.powu(3) / 3.0 - s * t)).exp() * e
            };
            total -= alpha * integrate_composite(0.0, 12.0, 48, 20, f);
        }
        total
    }

    #[test]
    fn weights_sum_to_zero() {
        for l in [Lambda::real(0.0), Lambda::Finite(c(2.0, -1.0)), Lambda::Infinity] {
            let w = ContourWeights::new(l);
            assert_eq!(w.alpha0 + w.alpha1 + w.alpha2, C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn first_moment_examples() {
        let m = moments(C64::new(0.0, 0.0), 1.0, &ContourWeights::new(Lambda::real(0.0)), 1).unwrap();
        assert!(rel_err(m.m[0].to_c64(), c(AI0, 0.0), 0.0) < 1e-14);
        let l = c(0.7, -0.4);
        let m = moments(C64::new(0.0, 0.0), 1.0, &ContourWeights::new(Lambda::Finite(l)), 1).unwrap();
        assert!(rel_err(m.m[0].to_c64(), l * BI0 + AI0, 0.0) < 1e-14);
    }

    #[test]
    fn moments_match_ray_quadrature() {
        for l in [Lambda::real(1.0), Lambda::Finite(c(0.5, 2.0)), Lambda::Infinity] {
            let w = ContourWeights::new(l);
            for t in [c(0.0, 0.0), c(0.6, -0.3), c(-0.8, 0.5)] {
                let m = moments(t, 1.0, &w, 6).unwrap();
                for k in 0..6 {
                    let q = moment_by_quadrature(k, t, 1.0, &w);
                    // m_2 vanishes at t = 0, so compare on a unit scale
                    assert!(rel_err(m.m[k].to_c64(), q, 1.0) < 1e-10, "k={k} t={t}");
                }
            }
        }
    }

    #[test]
    fn moments_scale_with_n() {
        // the overall power of N is invisible at N = 1; pin it by quadrature
        let w = ContourWeights::new(Lambda::Finite(c(1.0, 1.0)));
        for nn in [2.0, 5.0] {
            let t = c(0.4, -0.3);
            let m = moments(t, nn, &w, 4).unwrap();
            for k in 0..4 {
                let q = moment_by_quadrature(k, t, nn, &w);
                assert!(rel_err(m.m[k].to_c64(), q, 1e-3) < 1e-10, "N={nn} k={k}");
            }
        }
    }

    #[test]
    fn moment_t_derivative() {
        let w = ContourWeights::new(Lambda::Finite(c(1.0, 1.0)));
        let (t, nn, h) = (c(0.3, 0.2), 2.0, 1e-4);
        let f = |s: f64| moments(t + c(s, 0.0), nn, &w, 6).unwrap();
        let (a, b, m) = (f(-h), f(h), f(0.0));
        for k in 0..5 {
            let fd = (b.m[k].to_c64() - a.m[k].to_c64()) / (2.0 * h);
            assert!(rel_err(fd, -nn * m.m[k + 1].to_c64(), 0.0) < 1e-6);
        }
    }

    #[test]
    fn small_determinants() {
        let w = ContourWeights::new(Lambda::real(2.0));
        let t = c(0.1, -0.4);
        assert_eq!(hankel_d(-1, t, 1.0, &w).unwrap().value, Scaled::ONE);
        let d0 = hankel_d(0, t, 1.0, &w).unwrap().value.to_c64();
        let m = moments(t, 1.0, &w, 1).unwrap();
        assert!(rel_err(d0, m.m[0].to_c64(), 0.0) < 1e-15);
    }

    #[test]
    fn first_polynomial() {
        let w = ContourWeights::new(Lambda::Infinity);
        let t = c(0.2, 0.1);
        let p = orthopoly(1, t, 1.0, &w).unwrap();
        let m = moments(t, 1.0, &w, 2).unwrap();
        assert!(rel_err(p[0], -m.m[1].to_c64() / m.m[0].to_c64(), 0.0) < 1e-14);
        assert_eq!(orthopoly(0, t, 1.0, &w).unwrap(), vec![c(1.0, 0.0)]);
    }

    #[test]
    fn three_term_recurrence() {
        let w = ContourWeights::new(Lambda::Finite(c(1.0, 1.0)));
        let (t, nn) = (c(0.4, -0.2), 3.0);
        for n in 1..=5 {
            let pm = orthopoly(n - 1, t, nn, &w).unwrap();
            let p0 = orthopoly(n, t, nn, &w).unwrap();
            let pp = orthopoly(n + 1, t, nn, &w).unwrap();
            let rc = recurrence_coeffs(n, t, nn, &w).unwrap();
            assert!(orthogonality_residual(&p0, t, nn, &w).unwrap() < 1e-9);
            // s P_n - P_{n+1} - beta_n P_n - gamma_n^2 P_{n-1}
            for k in 0..=n + 1 {
                let sp = if k >= 1 { p0[k - 1] } else { C64::new(0.0, 0.0) };
                let a = if k <= n { p0[k] } else { C64::new(0.0, 0.0) };
                let b = if k < n { pm[k] } else { C64::new(0.0, 0.0) };
                let r = sp - pp[k] - rc.beta * a - rc.gamma2 * b;
                let scale = sp.norm().max(pp[k].norm()).max((rc.beta * a).norm()).max((rc.gamma2 * b).norm()).max(1.0);
                assert!(r.norm() / scale < 1e-8, "n={n} k={k}");
            }
            assert!(rel_err(p0[n - 1], rc.p_sub, 1e-12) < 1e-8);
        }
    }

    #[test]
    fn toda_for_determinants() {
        let w = ContourWeights::new(Lambda::real(1.0));
        let (t, nn) = (c(0.2, 0.3), 2.0);
        for n in 0..=5i64 {
            let d = hankel_d_with(n, t, nn, &w, 2, &TauOptions::default()).unwrap();
            let up = hankel_d(n + 1, t, nn, &w).unwrap().value;
            let dn = hankel_d(n - 1, t, nn, &w).unwrap().value;
            let lhs = d.dvals[1].mul(&d.value).sub(&d.dvals[0].mul(&d.dvals[0]));
            let rhs = up.mul(&dn).scale(c(nn * nn, 0.0));
            assert!(rel_err(lhs.ratio(&rhs), c(1.0, 0.0), 0.0) < 1e-7, "n={n}");
        }
    }

    #[test]
    fn d_tau_scaling_needs_squared_exponent() {
        let l = Lambda::Finite(c(1.0, 1.0));
        for n in 0..=4 {
            let (a, b) = d_tau_sides(n, c(0.3, 0.1), 2.0, l, d_tau_exponent(n)).unwrap();
            assert!(rel_err(a, b, 0.0) < 1e-9);
        }
        // the exponent (n+1)(n+2)/3 only agrees when N = 1
        let (a, b) = d_tau_sides(2, c(0.3, 0.1), 2.0, l, 4.0).unwrap();
        assert!(rel_err(a, b, 0.0) > 0.1);
        let (a, b) = d_tau_sides(2, c(0.3, 0.1), 1.0, l, 4.0).unwrap();
        assert!(rel_err(a, b, 0.0) < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn bridge_identities(n in 1usize..=6, tr in -1.0f64..1.0, ti in -1.0f64..1.0,
                             nn in prop::sample::select(vec![1.0, 2.0, 5.0]),
                             l in prop::sample::select(vec![Lambda::real(1.0), Lambda::Finite(c(1.0, 1.0)), Lambda::Infinity])) {
            match bridge_check(n, c(tr, ti), nn, l) {
                Ok(b) => prop_assert!(b.max_rel() <= 1e-7, "{:?}", b),
                Err(BridgeError::Tau(crate::taufun::TauError::Pole { .. })) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
