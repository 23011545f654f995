//! Zeros of entire functions in rectangles: argument-principle counts by
//! boundary phase continuation, quadtree subdivision, Newton polish, and the
//! pole/zero maps of q_n built from three such searches.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airy::{Lambda, SeedWeights};
use crate::cubicmodel::{hankel_d_with, ContourWeights, CubicError};
use crate::exec::Exec;
use crate::num::{lex_cmp, C64};
use crate::taufun::{q_numerator, tau_with, TauError, TauOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZeroError {
    #[error("invalid window {lo} .. {hi}")]
    BadWindow { lo: C64, hi: C64 },
    #[error("zero on the boundary of {lo} .. {hi} after {tries} jitters")]
    BoundaryZero { lo: C64, hi: C64, tries: usize },
    #[error("winding number did not settle to an integer ({0})")]
    Winding(f64),
    #[error("non-finite value at z = {0}")]
    NonFinite(C64),
    #[error(transparent)]
    Tau(#[from] TauError),
    #[error(transparent)]
    Cubic(#[from] CubicError),
}

/// An analytic function with its derivative. Both values may carry a common
/// positive real factor (only f'/f and the phase of f are used).
pub trait Analytic: Sync {
    fn eval(&self, z: C64) -> Result<(C64, C64), ZeroError>;
}

/// Wraps a closure returning (f, f').
pub struct FnAnalytic<F>(pub F);

impl<F: Fn(C64) -> (C64, C64) + Sync> Analytic for FnAnalytic<F> {
    fn eval(&self, z: C64) -> Result<(C64, C64), ZeroError> {
        Ok((self.0)(z))
    }
}

/// Monic polynomial with the given roots (test fixtures, planted zeros).
#[derive(Debug, Clone)]
pub struct RootPoly(pub Vec<C64>);

impl Analytic for RootPoly {
    fn eval(&self, z: C64) -> Result<(C64, C64), ZeroError> {
        let mut f = C64::new(1.0, 0.0);
        let mut df = C64::new(0.0, 0.0);
        for r in &self.0 {
            df = df * (z - r) + f;
            f *= z - r;
        }
        Ok((f, df))
    }
}

fn scaled_pair(v: crate::num::Scaled, d: crate::num::Scaled) -> (C64, C64) {
    if v.is_zero() {
        return (C64::new(0.0, 0.0), d.mant);
    }
    (v.mant, d.mant * 10f64.powi(d.exp10 - v.exp10))
}

/// tau_n(z).
#[derive(Debug, Clone)]
pub struct TauFn {
    pub n: usize,
    pub weights: SeedWeights,
    pub opts: TauOptions,
}

impl Analytic for TauFn {
    fn eval(&self, z: C64) -> Result<(C64, C64), ZeroError> {
        let t = tau_with(self.n, z, &self.weights, &self.opts, 1)?;
        Ok(scaled_pair(t.value, t.dvals[0]))
    }
}

/// tau_{n-1}' tau_n - tau_n' tau_{n-1}, whose zeros are the zeros of q_n.
#[derive(Debug, Clone)]
pub struct QNumeratorFn {
    pub n: usize,
    pub weights: SeedWeights,
    pub opts: TauOptions,
}

impl Analytic for QNumeratorFn {
    fn eval(&self, z: C64) -> Result<(C64, C64), ZeroError> {
        let (a, b) = q_numerator(self.n, z, &self.weights, &self.opts)?;
        Ok(scaled_pair(a, b))
    }
}

/// D_n(t; N) as a function of t.
#[derive(Debug, Clone)]
pub struct HankelDFn {
    pub n: i64,
    pub big_n: f64,
    pub weights: ContourWeights,
    pub opts: TauOptions,
}

impl Analytic for HankelDFn {
    fn eval(&self, t: C64) -> Result<(C64, C64), ZeroError> {
        let d = hankel_d_with(self.n, t, self.big_n, &self.weights, 1, &self.opts)?;
        Ok(scaled_pair(d.value, d.dvals[0]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: C64,
    pub hi: C64,
}

impl Window {
    pub fn new(lo: C64, hi: C64) -> Result<Self, ZeroError> {
        if !(hi.re > lo.re && hi.im > lo.im) || !(lo.norm().is_finite() && hi.norm().is_finite()) {
            return Err(ZeroError::BadWindow { lo, hi });
        }
        Ok(Window { lo, hi })
    }

    /// Square of half-width `r` centered at `c`.
    pub fn square(center: C64, r: f64) -> Self {
        Window { lo: center - C64::new(r, r), hi: center + C64::new(r, r) }
    }

    pub fn diag(&self) -> f64 {
        (self.hi - self.lo).norm()
    }

    pub fn center(&self) -> C64 {
        (self.lo + self.hi) * 0.5
    }

    pub fn contains(&self, z: C64, slack: f64) -> bool {
        z.re >= self.lo.re - slack && z.re <= self.hi.re + slack && z.im >= self.lo.im - slack && z.im <= self.hi.im + slack
    }

    /// Corners counterclockwise from `lo`.
    pub fn corners(&self) -> [C64; 4] {
        [self.lo, C64::new(self.hi.re, self.lo.im), self.hi, C64::new(self.lo.re, self.hi.im)]
    }

    fn split(&self, at: C64) -> [Window; 4] {
        let (l, h) = (self.lo, self.hi);
        [
            Window { lo: l, hi: at },
            Window { lo: C64::new(at.re, l.im), hi: C64::new(h.re, at.im) },
            Window { lo: at, hi: h },
            Window { lo: C64::new(l.re, at.im), hi: C64::new(at.re, h.im) },
        ]
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        let mut s = salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        for v in [self.lo.re, self.lo.im, self.hi.re, self.hi.im] {
            s = (s ^ v.to_bits()).rotate_left(17).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        }
        ChaCha8Rng::seed_from_u64(s)
    }
}

#[derive(Clone, Copy)]
struct Sample {
    z: C64,
    f: C64,
    df: C64,
}

impl Sample {
    fn g(&self) -> C64 {
        self.df / self.f
    }
}

enum Fail {
    /// a boundary sample landed on (or extremely near) a zero
    Hit,
    Err(ZeroError),
}

impl From<ZeroError> for Fail {
    fn from(e: ZeroError) -> Self {
        Fail::Err(e)
    }
}

const EDGE_SAMPLES: usize = 16;
const MAX_BISECT: usize = 40;
const NEAR_ZERO: f64 = 1e-7;

fn sample<F: Analytic + ?Sized>(f: &F, z: C64, diag: f64) -> Result<Sample, Fail> {
    let (v, d) = f.eval(z)?;
    if !(v.norm().is_finite() && d.norm().is_finite()) {
        return Err(Fail::Err(ZeroError::NonFinite(z)));
    }
    if v.norm() == 0.0 || v.norm() < NEAR_ZERO * diag * d.norm() {
        return Err(Fail::Hit);
    }
    Ok(Sample { z, f: v, df: d })
}

fn segment<F: Analytic + ?Sized>(f: &F, p: &Sample, q: &Sample, diag: f64, depth: usize) -> Result<f64, Fail> {
    let d = (q.f / p.f).arg();
    let trap = ((q.z - p.z) * (p.g() + q.g()) * 0.5).im;
    if d.abs() <= PI / 4.0 && (d - trap).abs() <= 0.1 {
        return Ok(d);
    }
    if depth >= MAX_BISECT || (q.z - p.z).norm() < 1e-13 * diag {
        return Err(Fail::Hit);
    }
    let m = sample(f, (p.z + q.z) * 0.5, diag)?;
    Ok(segment(f, p, &m, diag, depth + 1)? + segment(f, &m, q, diag, depth + 1)?)
}

/// Winding number of f around the boundary of w.
fn winding<F: Analytic + ?Sized>(f: &F, w: &Window) -> Result<i64, Fail> {
    let diag = w.diag();
    let cs = w.corners();
    let mut total = 0.0;
    let first = sample(f, cs[0], diag)?;
    let mut prev = first;
    for e in 0..4 {
        let (a, b) = (cs[e], cs[(e + 1) % 4]);
        for k in 1..=EDGE_SAMPLES {
            let cur = if e == 3 && k == EDGE_SAMPLES { first } else { sample(f, a + (b - a) * (k as f64 / EDGE_SAMPLES as f64), diag)? };
            total += segment(f, &prev, &cur, diag, 0)?;
            prev = cur;
        }
    }
    let turns = total / (2.0 * PI);
    let r = turns.round();
    if (turns - r).abs() > 0.1 {
        return Err(Fail::Err(ZeroError::Winding(turns)));
    }
    Ok(r as i64)
}

const JITTER_TRIES: usize = 5;
const JITTER: f64 = 1e-3;

/// Zero count in `w` and the window actually used (jittered if a zero sat on the boundary).
pub fn count_zeros_in<F: Analytic + ?Sized>(f: &F, w: &Window) -> Result<(usize, Window), ZeroError> {
    let mut rng = w.rng(0);
    let mut cur = *w;
    for _ in 0..=JITTER_TRIES {
        match winding(f, &cur) {
            Ok(k) => return Ok((k.max(0) as usize, cur)),
            Err(Fail::Err(e)) => return Err(e),
            Err(Fail::Hit) => {
                let s = JITTER * w.diag();
                let mut j = || C64::new(rng.gen_range(-s..s), rng.gen_range(-s..s));
                cur = Window { lo: w.lo + j(), hi: w.hi + j() };
            }
        }
    }
    Err(ZeroError::BoundaryZero { lo: w.lo, hi: w.hi, tries: JITTER_TRIES })
}

/// Number of zeros (with multiplicity) inside `w`.
pub fn count_zeros<F: Analytic + ?Sized>(f: &F, w: &Window) -> Result<usize, ZeroError> {
    count_zeros_in(f, w).map(|r| r.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub z: C64,
    pub multiplicity: usize,
    /// Last Newton step length.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unresolved {
    pub window: Window,
    pub count: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    pub window: Window,
    pub counted: usize,
    pub zeros: Vec<Zero>,
    pub unresolved: Vec<Unresolved>,
}

impl ZeroReport {
    /// Located zeros, each repeated by multiplicity.
    pub fn points(&self) -> Vec<C64> {
        self.zeros.iter().flat_map(|z| std::iter::repeat_n(z.z, z.multiplicity)).collect()
    }

    /// Located plus unresolved count; equals `counted` when the search is consistent.
    pub fn accounted(&self) -> usize {
        self.zeros.iter().map(|z| z.multiplicity).sum::<usize>() + self.unresolved.iter().map(|u| u.count).sum::<usize>()
    }

    pub fn is_complete(&self) -> bool {
        self.unresolved.is_empty() && self.accounted() == self.counted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocateOptions {
    pub tol: f64,
    pub max_depth: usize,
    pub max_newton: usize,
    pub exec: Exec,
}

impl Default for LocateOptions {
    fn default() -> Self {
        LocateOptions { tol: 1e-12, max_depth: 12, max_newton: 50, exec: Exec::default() }
    }
}

/// Newton with multiplicity m from z0; Some((z, last step)) on convergence.
/// When rounding noise stalls the iteration short of `tol`, the best iterate is
/// returned if its step is below `STALL_ACCEPT` (relative).
pub fn newton<F: Analytic + ?Sized>(f: &F, z0: C64, m: usize, tol: f64, max_iter: usize) -> Option<(C64, f64)> {
    let mut z = z0;
    let mut best: Option<(C64, f64)> = None;
    for _ in 0..max_iter {
        let (v, d) = f.eval(z).ok()?;
        if v.norm() == 0.0 {
            return Some((z, 0.0));
        }
        if d.norm() == 0.0 {
            break;
        }
        let step = m as f64 * v / d;
        if !step.norm().is_finite() {
            break;
        }
        let scale = z.norm().max(1.0);
        if best.is_none_or(|b| step.norm() < b.1) {
            best = Some((z - step, step.norm()));
        }
        z -= step;
        if step.norm() <= tol * scale {
            return Some((z, step.norm()));
        }
    }
    best.filter(|b| b.1 <= STALL_ACCEPT * b.0.norm().max(1.0))
}

const STALL_ACCEPT: f64 = 1e-8;

struct Found {
    zeros: Vec<Zero>,
    unresolved: Vec<Unresolved>,
}

fn solve_box<F: Analytic + ?Sized>(f: &F, w: Window, count: usize, depth: usize, o: &LocateOptions) -> Found {
    let mut out = Found { zeros: vec![], unresolved: vec![] };
    if count == 0 {
        return out;
    }
    let slack = 1e-9 * w.diag();
    let at_cap = depth >= o.max_depth;
    if count == 1 || at_cap {
        if let Some((z, step)) = newton(f, w.center(), count, o.tol, o.max_newton) {
            if w.contains(z, slack) {
                out.zeros.push(Zero { z, multiplicity: count, step });
                return out;
            }
        }
        if at_cap {
            out.unresolved.push(Unresolved { window: w, count, reason: "newton did not converge inside the leaf".into() });
            return out;
        }
    }
    // split near the center; the offset moves internal edges off any zero
    let mut rng = w.rng(depth as u64 + 1);
    let size = w.hi - w.lo;
    for _ in 0..JITTER_TRIES {
        let at = w.center() + C64::new(size.re * rng.gen_range(-0.05..0.05), size.im * rng.gen_range(-0.05..0.05));
        let kids = w.split(at);
        let counts: Vec<Result<i64, Fail>> = o.exec.map(&kids, |k| winding(f, k));
        let mut ok = Vec::with_capacity(4);
        for r in counts {
            match r {
                Ok(k) if k >= 0 => ok.push(k as usize),
                _ => break,
            }
        }
        if ok.len() != 4 || ok.iter().sum::<usize>() != count {
            continue;
        }
        let jobs: Vec<(Window, usize)> = kids.into_iter().zip(ok).collect();
        let parts = o.exec.map(&jobs, |(k, n)| solve_box(f, *k, *n, depth + 1, o));
        for p in parts {
            out.zeros.extend(p.zeros);
            out.unresolved.extend(p.unresolved);
        }
        return out;
    }
    out.unresolved.push(Unresolved { window: w, count, reason: "subdivision counts inconsistent".into() });
    out
}

/// Locate all zeros in `w` (with multiplicities), sorted lexicographically.
pub fn locate_zeros_with<F: Analytic + ?Sized>(f: &F, w: &Window, o: &LocateOptions) -> Result<ZeroReport, ZeroError> {
    let (counted, used) = count_zeros_in(f, w)?;
    let found = solve_box(f, used, counted, 0, o);
    let mut zeros = found.zeros;
    zeros.sort_by(|a, b| lex_cmp(&a.z, &b.z));
    let mut unresolved = found.unresolved;
    unresolved.sort_by(|a, b| lex_cmp(&a.window.lo, &b.window.lo));
    Ok(ZeroReport { window: used, counted, zeros, unresolved })
}

pub fn locate_zeros<F: Analytic + ?Sized>(f: &F, w: &Window, tol: f64) -> Result<ZeroReport, ZeroError> {
    locate_zeros_with(f, w, &LocateOptions { tol, ..Default::default() })
}

/// (1/2 pi i) times the contour integral of f'/f over |z - z0| = r, trapezoid rule.
pub fn log_residue<F: Analytic + ?Sized>(f: &F, z0: C64, r: f64, m: usize) -> Result<C64, ZeroError> {
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..m {
        let e = C64::from_polar(r, 2.0 * PI * k as f64 / m as f64);
        let (v, d) = f.eval(z0 + e)?;
        acc += d / v * e;
    }
    Ok(acc / m as f64)
}

/// Residue of q_n = sigma_{n-1} - sigma_n at z0 over the circle of radius r.
pub fn q_residue(n: usize, weights: &SeedWeights, opts: &TauOptions, z0: C64, r: f64, m: usize) -> Result<C64, ZeroError> {
    let a = TauFn { n: n - 1, weights: *weights, opts: *opts };
    let b = TauFn { n, weights: *weights, opts: *opts };
    Ok(log_residue(&a, z0, r, m)? - log_residue(&b, z0, r, m)?)
}

pub const RESIDUE_NODES: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleMap {
    pub n: usize,
    pub lambda: Lambda,
    pub window: Window,
    /// zeros of tau_{n-1}: q_n has residue +1
    pub poles_plus: Vec<C64>,
    /// zeros of tau_n: q_n has residue -1
    pub poles_minus: Vec<C64>,
    pub zeros_q: Vec<C64>,
    pub residues_plus: Vec<C64>,
    pub residues_minus: Vec<C64>,
    pub unresolved: Vec<Unresolved>,
    /// False when some search could not account for every counted zero.
    pub complete: bool,
}

impl PoleMap {
    /// Smallest distance between a + pole and a - pole.
    pub fn min_separation(&self) -> f64 {
        let mut d = f64::INFINITY;
        for a in &self.poles_plus {
            for b in &self.poles_minus {
                d = d.min((a - b).norm());
            }
        }
        d
    }

    pub fn all_poles(&self) -> Vec<C64> {
        let mut v = self.poles_plus.clone();
        v.extend(&self.poles_minus);
        v
    }
}

/// Half the distance from z to the nearest other point of `pts`, capped at `cap`.
pub fn isolation_radius(z: C64, pts: &[C64], cap: f64) -> f64 {
    let d = pts.iter().map(|p| (p - z).norm()).filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
    (0.5 * d).min(cap)
}

/// Poles and zeros of q_n(z; lambda) in `w`. n >= 1.
pub fn pole_map(n: usize, weights: &SeedWeights, w: &Window, tol: f64) -> Result<PoleMap, ZeroError> {
    pole_map_with(n, weights, w, &LocateOptions { tol, ..Default::default() }, &TauOptions::default())
}

pub fn pole_map_with(n: usize, weights: &SeedWeights, w: &Window, o: &LocateOptions, topts: &TauOptions) -> Result<PoleMap, ZeroError> {
    assert!(n >= 1, "pole_map needs n >= 1");
    let plus = if n == 1 {
        ZeroReport { window: *w, counted: 0, zeros: vec![], unresolved: vec![] }
    } else {
        locate_zeros_with(&TauFn { n: n - 1, weights: *weights, opts: *topts }, w, o)?
    };
    let minus = locate_zeros_with(&TauFn { n, weights: *weights, opts: *topts }, w, o)?;
    let zq = locate_zeros_with(&QNumeratorFn { n, weights: *weights, opts: *topts }, w, o)?;
    let poles_plus = plus.points();
    let poles_minus = minus.points();
    let mut everything = poles_plus.clone();
    everything.extend(&poles_minus);
    everything.extend(zq.points());
    let res = |z: &C64| -> Result<C64, ZeroError> {
        let r = isolation_radius(*z, &everything, 0.5);
        q_residue(n, weights, topts, *z, r, RESIDUE_NODES)
    };
    let residues_plus = poles_plus.iter().map(res).collect::<Result<Vec<_>, _>>()?;
    let residues_minus = poles_minus.iter().map(res).collect::<Result<Vec<_>, _>>()?;
    let complete = plus.is_complete() && minus.is_complete() && zq.is_complete();
    let zeros_q = zq.points();
    let mut unresolved = plus.unresolved;
    unresolved.extend(minus.unresolved);
    unresolved.extend(zq.unresolved);
    Ok(PoleMap {
        n,
        lambda: weights.lambda,
        window: *w,
        poles_plus,
        poles_minus,
        zeros_q,
        residues_plus,
        residues_minus,
        unresolved,
        complete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::c;
    use proptest::prelude::*;

    // first zeros of Ai and Ai' (mpmath)
    const AI_ZEROS: [f64; 3] = [-2.338_107_410_459_767, -4.087_949_444_130_970_6, -5.520_559_828_095_551];
    const AIP_ZEROS: [f64; 3] = [-1.018_792_971_647_471, -3.248_197_582_179_836_5, -4.820_099_211_178_736];

    #[test]
    fn identity_and_double_zero() {
        let w = Window::square(c(0.1, -0.2), 1.0);
        assert_eq!(count_zeros(&FnAnalytic(|z| (z, c(1.0, 0.0))), &w).unwrap(), 1);
        let f = RootPoly(vec![c(0.3, 0.1), c(0.3, 0.1)]);
        assert_eq!(count_zeros(&f, &w).unwrap(), 2);
        let r = locate_zeros(&f, &w, 1e-10).unwrap();
        assert_eq!(r.points().len(), 2);
        assert!((r.points()[0] - c(0.3, 0.1)).norm() < 1e-6);
    }

    #[test]
    fn empty_window() {
        let f = RootPoly(vec![c(5.0, 5.0)]);
        let r = locate_zeros(&f, &Window::square(c(0.0, 0.0), 1.0), 1e-12).unwrap();
        assert!(r.zeros.is_empty() && r.counted == 0 && r.is_complete());
    }

    #[test]
    fn boundary_zero_is_jittered() {
        let f = RootPoly(vec![c(1.0, 0.0), c(-0.2, 0.3)]);
        let w = Window::new(c(-1.0, -1.0), c(1.0, 1.0)).unwrap();
        let (k, used) = count_zeros_in(&f, &w).unwrap();
        assert_ne!(used, w);
        assert_eq!(k, if used.contains(c(1.0, 0.0), 0.0) { 2 } else { 1 });
    }

    #[test]
    fn bad_window_rejected() {
        assert!(Window::new(c(1.0, 0.0), c(0.0, 1.0)).is_err());
    }

    #[test]
    fn tau1_counts_first_airy_zero() {
        let f = TauFn { n: 1, weights: SeedWeights::new(Lambda::real(0.0)), opts: TauOptions::default() };
        let z1 = -2f64.cbrt() * AI_ZEROS[0];
        let w = Window::square(c(z1, 0.0), 1.0);
        assert_eq!(count_zeros(&f, &w).unwrap(), 1);
        let r = locate_zeros(&f, &w, 1e-13).unwrap();
        assert!((r.points()[0] - c(z1, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn n1_lambda0_pole_map_is_airy() {
        let wts = SeedWeights::new(Lambda::real(0.0));
        let w = Window::new(c(-3.0, -2.0), c(7.5, 2.0)).unwrap();
        let pm = pole_map(1, &wts, &w, 1e-13).unwrap();
        assert!(pm.complete && pm.poles_plus.is_empty());
        let k = 2f64.cbrt();
        let want: Vec<f64> = AI_ZEROS.iter().map(|a| -k * a).collect();
        assert_eq!(pm.poles_minus.len(), 3);
        for (p, a) in pm.poles_minus.iter().zip(&want) {
            assert!((p - c(*a, 0.0)).norm() < 1e-11, "{p} vs {a}");
        }
        let wantq: Vec<f64> = AIP_ZEROS.iter().map(|a| -k * a).filter(|x| *x < 7.5).collect();
        assert_eq!(pm.zeros_q.len(), wantq.len());
        for (p, a) in pm.zeros_q.iter().zip(&wantq) {
            assert!((p - c(*a, 0.0)).norm() < 1e-11);
        }
        for r in &pm.residues_minus {
            assert!((r - c(-1.0, 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn pole_map_residues_and_disjointness() {
        let wts = SeedWeights::new(Lambda::Finite(c(1.0, 1.0)));
        let pm = pole_map(3, &wts, &Window::square(c(0.0, 0.0), 5.0), 1e-12).unwrap();
        assert!(pm.complete);
        assert!(!pm.poles_plus.is_empty() && !pm.poles_minus.is_empty());
        assert!(pm.min_separation() > 1e-6);
        for r in &pm.residues_plus {
            assert!((r - c(1.0, 0.0)).norm() < 1e-6);
        }
        for r in &pm.residues_minus {
            assert!((r - c(-1.0, 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let f = TauFn { n: 2, weights: SeedWeights::new(Lambda::Infinity), opts: TauOptions::default() };
        let w = Window::square(c(0.0, 0.0), 6.0);
        let a = locate_zeros_with(&f, &w, &LocateOptions { exec: Exec::Sequential, ..Default::default() }).unwrap();
        let b = locate_zeros_with(&f, &w, &LocateOptions { exec: Exec::Parallel, ..Default::default() }).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn planted_roots_are_found(roots in prop::collection::vec((-0.95f64..0.95, -0.95f64..0.95), 0..7)) {
            let rs: Vec<C64> = roots.iter().map(|(a, b)| c(*a, *b)).collect();
            // keep planted roots apart so the fixture is well conditioned
            let apart = rs.iter().enumerate().all(|(i, a)| rs[..i].iter().all(|b| (a - b).norm() > 1e-2));
            prop_assume!(apart);
            let f = RootPoly(rs.clone());
            let w = Window::square(c(0.0, 0.0), 1.0);
            let r = locate_zeros(&f, &w, 1e-12).unwrap();
            prop_assert_eq!(r.counted, rs.len());
            prop_assert!(r.is_complete());
            for z in &rs {
                prop_assert!(r.points().iter().any(|p| (p - z).norm() < 1e-9));
            }
            // re-polishing is stable
            for p in r.points() {
                let (q, _) = newton(&f, p, 1, 1e-12, 50).unwrap();
                prop_assert!((q - p).norm() < 1e-10);
            }
        }
    }
}
