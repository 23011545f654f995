//! Gauss-Legendre rules on [-1, 1], cached per degree, and complex line integrals.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussLegendre;

use crate::num::C64;

type Rule = Arc<Vec<(f64, f64)>>;

/// Nodes and weights of the n-point rule, sorted by node.
pub fn legendre(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut g = cache.lock().expect("quadrature cache");
    g.entry(n)
        .or_insert_with(|| {
            let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("degree >= 1"));
            let mut v: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            Arc::new(v)
        })
        .clone()
}

/// Integral of f over [a, b] with the n-point rule.
pub fn integrate_real<F: FnMut(f64) -> C64>(a: f64, b: f64, n: usize, mut f: F) -> C64 {
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    legendre(n).iter().map(|&(x, w)| w * f(m + h * x)).sum::<C64>() * h
}

/// Composite rule: `panels` equal panels of `n` points each.
pub fn integrate_composite<F: FnMut(f64) -> C64>(a: f64, b: f64, panels: usize, n: usize, mut f: F) -> C64 {
    let d = (b - a) / panels as f64;
    (0..panels).map(|k| integrate_real(a + k as f64 * d, a + (k + 1) as f64 * d, n, &mut f)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let v = integrate_real(-1.0, 2.0, 5, |x| C64::new(x.powi(9), 0.0));
        assert!((v.re - (2f64.powi(10) - 1.0) / 10.0).abs() < 1e-12);
    }

    #[test]
    fn composite_exp() {
        let v = integrate_composite(0.0, 3.0, 6, 16, |x| C64::new(x.exp(), 0.0));
        assert!((v.re - (3f64.exp() - 1.0)).abs() < 1e-13);
    }
}
