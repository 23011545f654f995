//! Hankel determinants det[e_{r_j + k}] and their exact derivative jets.
//!
//! If the entries satisfy e_k' = s e_{k+1}, the derivative of a determinant
//! whose rows carry orders r_0 < r_1 < ... is s times the sum over rows of the
//! determinant with that row order raised by one. Raising r_j onto r_{j+1}
//! duplicates a row and the term vanishes, so only "free" raises survive.
//! Iterating gives every derivative as an integer combination of such
//! determinants.

use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::num::{to_c64, Real, Scaled, C64};

/// Row-order set -> integer multiplicity.
pub type Combo = BTreeMap<Vec<usize>, i64>;

/// d/dz of a combination of row-order sets.
pub fn differentiate(combo: &Combo) -> Combo {
    let mut out = Combo::new();
    for (rows, &k) in combo {
        for j in 0..rows.len() {
            let raised = rows[j] + 1;
            if j + 1 < rows.len() && rows[j + 1] == raised {
                continue;
            }
            let mut r = rows.clone();
            r[j] = raised;
            *out.entry(r).or_insert(0) += k;
        }
    }
    out.retain(|_, v| *v != 0);
    out
}

/// Combinations for derivative orders 0..=deriv of the n x n Hankel determinant.
pub fn derivative_combos(n: usize, deriv: usize) -> Vec<Combo> {
    let mut c0 = Combo::new();
    c0.insert((0..n).collect(), 1);
    let mut out = vec![c0];
    for d in 0..deriv {
        let next = differentiate(&out[d]);
        out.push(next);
    }
    out
}

/// Largest entry index touched by `derivative_combos(n, deriv)`.
pub fn max_entry(n: usize, deriv: usize) -> usize {
    if n == 0 {
        0
    } else {
        2 * (n - 1) + deriv
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DetOut {
    pub value: Scaled,
    /// Smallest pivot relative to its (unit-scaled) row.
    pub min_pivot: f64,
}

fn approx_abs<R: Real>(z: &Complex<R>) -> f64 {
    let a = z.re.to_f64();
    let b = z.im.to_f64();
    a.abs().max(b.abs())
}

fn pow2<R: Real>(e: i32) -> R {
    R::from_f64(2f64.powi(e))
}

/// Determinant of an arbitrary square matrix (row-major) by LU with partial pivoting.
/// Rows are first scaled by exact powers of two so that the result never overflows.
pub fn det_lu<R: Real>(mut a: Vec<Complex<R>>, n: usize) -> DetOut {
    if n == 0 {
        return DetOut { value: Scaled::ONE, min_pivot: 1.0 };
    }
    let mut e2: i64 = 0;
    for i in 0..n {
        let m = (0..n).map(|k| approx_abs(&a[i * n + k])).fold(0.0, f64::max);
        if m == 0.0 {
            return DetOut { value: Scaled::ZERO, min_pivot: 0.0 };
        }
        let e = m.log2().floor() as i32;
        let f: R = pow2(-e);
        for k in 0..n {
            let v = a[i * n + k];
            a[i * n + k] = Complex::new(v.re * f, v.im * f);
        }
        e2 += e as i64;
    }
    let mut det: Complex<R> = Complex::one();
    let mut min_pivot = f64::INFINITY;
    let mut neg = false;
    for k in 0..n {
        let mut p = k;
        let mut best = approx_abs(&a[k * n + k]);
        for i in k + 1..n {
            let v = approx_abs(&a[i * n + k]);
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return DetOut { value: Scaled::ZERO, min_pivot: 0.0 };
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            neg = !neg;
        }
        let piv = a[k * n + k];
        min_pivot = min_pivot.min(best);
        let inv = Complex::<R>::one() / piv;
        for i in k + 1..n {
            let f = a[i * n + k] * inv;
            if f.is_zero() {
                continue;
            }
            for j in k + 1..n {
                let t = a[k * n + j];
                a[i * n + j] = a[i * n + j] - f * t;
            }
        }
        det = det * piv;
        // keep the running product near unit size
        let m = approx_abs(&det);
        if m != 0.0 {
            let e = m.log2().floor() as i32;
            if e.abs() > 64 {
                let f: R = pow2(-e);
                det = Complex::new(det.re * f, det.im * f);
                e2 += e as i64;
            }
        }
    }
    if neg {
        det = -det;
    }
    // fold the residual binary exponent of det itself
    let m = approx_abs(&det);
    let e = if m > 0.0 { m.log2().floor() as i32 } else { 0 };
    let f: R = pow2(-e);
    let d = to_c64(Complex::new(det.re * f, det.im * f));
    DetOut { value: Scaled::from_binary(d, e2 + e as i64), min_pivot }
}

/// Determinant of [e_{rows[j] + k}]_{j,k}.
pub fn det_rows<R: Real>(entries: &[Complex<R>], rows: &[usize]) -> DetOut {
    let n = rows.len();
    let mut a = Vec::with_capacity(n * n);
    for &r in rows {
        for k in 0..n {
            a.push(entries[r + k]);
        }
    }
    det_lu(a, n)
}

#[derive(Debug, Clone)]
pub struct HankelJet {
    /// value and derivatives 1..=deriv, each carrying the factor s^d
    pub vals: Vec<Scaled>,
    pub min_pivot: f64,
}

/// Jet of det[e_{j+k}]_{j,k<n} where d/dx e_k = s e_{k+1}.
pub fn hankel_jet<R: Real>(entries: &[Complex<R>], n: usize, deriv: usize, s: C64) -> HankelJet {
    if n == 0 {
        let mut vals = vec![Scaled::ONE];
        vals.extend(std::iter::repeat_n(Scaled::ZERO, deriv));
        return HankelJet { vals, min_pivot: 1.0 };
    }
    assert!(entries.len() > max_entry(n, deriv), "hankel_jet: not enough entries");
    let combos = derivative_combos(n, deriv);
    let mut cache: BTreeMap<Vec<usize>, DetOut> = BTreeMap::new();
    let mut min_pivot = f64::INFINITY;
    let mut vals = Vec::with_capacity(deriv + 1);
    let mut sp = C64::new(1.0, 0.0);
    for combo in &combos {
        let mut acc = Scaled::ZERO;
        for (rows, &k) in combo {
            let d = *cache.entry(rows.clone()).or_insert_with(|| det_rows(entries, rows));
            min_pivot = min_pivot.min(d.min_pivot);
            acc = acc.add(&d.value.scale(C64::new(k as f64, 0.0)));
        }
        vals.push(acc.scale(sp));
        sp *= s;
    }
    HankelJet { vals, min_pivot }
}

/// Solve A x = b (row-major A) by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<C64>, mut b: Vec<C64>, n: usize) -> Option<Vec<C64>> {
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm()))?;
        if a[p * n + k].norm() == 0.0 {
            return None;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        let inv = 1.0 / a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] * inv;
            for j in k..n {
                let t = a[k * n + j];
                a[i * n + j] -= f * t;
            }
            let t = b[k];
            b[i] -= f * t;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k * n + j] * x[j];
        }
        x[k] = s / a[k * n + k];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{c, cdd, rel_err, Dd};

    #[test]
    fn first_derivative_is_last_row_raise() {
        let d = derivative_combos(3, 1);
        assert_eq!(d[1].len(), 1);
        assert_eq!(d[1].get(&vec![0, 1, 3]), Some(&1));
    }

    #[test]
    fn second_derivative_terms() {
        // (0,1,2)'' = (0,1,4) + (0,2,3)
        let d = derivative_combos(3, 2);
        assert_eq!(d[2].len(), 2);
        assert_eq!(d[2].get(&vec![0, 1, 4]), Some(&1));
        assert_eq!(d[2].get(&vec![0, 2, 3]), Some(&1));
    }

    #[test]
    fn lu_matches_cofactor_3x3() {
        let m = vec![c(1.0, 2.0), c(0.5, 0.0), c(-1.0, 1.0), c(3.0, 0.0), c(0.0, -2.0), c(1.0, 1.0), c(2.0, 2.0), c(1.0, 0.0), c(0.0, 4.0)];
        let det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) + m[2] * (m[3] * m[7] - m[4] * m[6]);
        let got = det_lu(m.clone(), 3).value.to_c64();
        assert!(rel_err(got, det, 0.0) < 1e-15);
        let md: Vec<_> = m.iter().map(|z| cdd(*z)).collect();
        let got = det_lu::<Dd>(md, 3).value.to_c64();
        assert!(rel_err(got, det, 0.0) < 1e-15);
    }

    #[test]
    fn solve_small_system() {
        let a = vec![c(2.0, 0.0), c(1.0, 1.0), c(0.0, 1.0), c(3.0, 0.0)];
        let x = vec![c(1.0, -1.0), c(0.5, 2.0)];
        let b = vec![a[0] * x[0] + a[1] * x[1], a[2] * x[0] + a[3] * x[1]];
        let got = solve(a, b, 2).unwrap();
        assert!((got[0] - x[0]).norm() < 1e-15 && (got[1] - x[1]).norm() < 1e-15);
    }

    #[test]
    fn huge_entries_do_not_overflow() {
        let m: Vec<C64> = (0..16).map(|k| c(1e300 * (k as f64 + 1.0).sqrt(), 1e299 * k as f64)).collect();
        let d = det_lu(m, 4).value;
        assert!(d.mant.norm().is_finite());
        assert!(d.exp10 > 1000 || d.is_zero());
    }

    #[test]
    fn exponential_entries_jet() {
        // e_k = x^k e^{x}: Hankel det of rank one for n >= 2 is zero; n = 1 jet is e^x.
        let x = 0.7f64;
        let e: Vec<C64> = (0..8).map(|_| c(x.exp(), 0.0)).collect();
        let j = hankel_jet(&e, 1, 3, c(1.0, 0.0));
        for v in &j.vals {
            assert!(rel_err(v.to_c64(), c(x.exp(), 0.0), 0.0) < 1e-15);
        }
    }
}
