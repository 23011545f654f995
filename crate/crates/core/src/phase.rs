//! Phase diagram of the cubic model in the t-plane: the cubic x^3 - t x - 1 = 0,
//! one-cut endpoints a, b, c, the region atlas traced from the auxiliary
//! differential -(1 + 1/s)^3 ds^2, classification, and the Boutroux system for
//! K(t) in the two-cut and trefoil regimes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::num::{eta, lex_cmp, C64, I};
use crate::quad::legendre;
use crate::quaddiff::{self, chain_from_graph, critical_graph, CriticalGraph, Endpoint, Kind, QDiff, QdError, SCurveChain, TraceOptions, TrajectoryArc};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("t = {0} is outside the closure of the branch domain")]
    Domain(C64),
    #[error("roots of the cubic collide near t = {0}")]
    Collision(C64),
    #[error("auxiliary trajectory {arc} did not end as expected ({end:?})")]
    Trace { arc: usize, end: Endpoint },
    #[error("zeros of Q collide at t = {t} (gap {gap:e})")]
    BoundaryReached { t: C64, gap: f64 },
    #[error("Newton for the Boutroux system diverged at t = {t}: last K = {k}, residual {residual:e}")]
    Diverged { t: C64, k: C64, residual: f64 },
    #[error("continuation stalled at t = {0}")]
    Stalled(C64),
    #[error(transparent)]
    Graph(#[from] QdError),
}

/// Branch tag: the three one-cut branches of x(t).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tau {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "i")]
    PlusI,
    #[serde(rename = "-i")]
    MinusI,
}

impl Tau {
    pub const ALL: [Tau; 3] = [Tau::Zero, Tau::PlusI, Tau::MinusI];

    /// Label after multiplying the plane by eta: -i -> 0 -> i -> -i.
    pub fn rotate(self) -> Tau {
        match self {
            Tau::MinusI => Tau::Zero,
            Tau::Zero => Tau::PlusI,
            Tau::PlusI => Tau::MinusI,
        }
    }

    pub fn rotate_by(self, j: usize) -> Tau {
        (0..j % 3).fold(self, |t, _| t.rotate())
    }

    pub fn name(self) -> &'static str {
        match self {
            Tau::Zero => "0",
            Tau::PlusI => "i",
            Tau::MinusI => "-i",
        }
    }

    /// Number of eta-rotations taking the -i branch to this one.
    fn steps_from_minus_i(self) -> usize {
        match self {
            Tau::MinusI => 0,
            Tau::Zero => 1,
            Tau::PlusI => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseLabel {
    OneCut(Tau),
    TwoCut(Tau),
    Trefoil,
    BoundaryOneCut,
    Corner,
}

impl PhaseLabel {
    pub fn name(&self) -> String {
        match self {
            PhaseLabel::OneCut(t) => format!("one-cut({})", t.name()),
            PhaseLabel::TwoCut(t) => format!("two-cut({})", t.name()),
            PhaseLabel::Trefoil => "trefoil".into(),
            PhaseLabel::BoundaryOneCut => "boundary".into(),
            PhaseLabel::Corner => "corner".into(),
        }
    }

    pub fn rotate_by(self, j: usize) -> PhaseLabel {
        match self {
            PhaseLabel::OneCut(t) => PhaseLabel::OneCut(t.rotate_by(j)),
            PhaseLabel::TwoCut(t) => PhaseLabel::TwoCut(t.rotate_by(j)),
            l => l,
        }
    }
}

pub fn t_cr() -> f64 {
    3.0 * 2f64.powf(-2.0 / 3.0)
}

fn t_of_x(x: C64) -> C64 {
    x * x - 1.0 / x
}

/// Roots of x^3 - t x - 1, lexicographically sorted.
pub fn cubic_roots(t: C64) -> [C64; 3] {
    let disc = (0.25 - t * t * t / 27.0).sqrt();
    let (u1, u2) = (0.5 + disc, 0.5 - disc);
    let u3 = if u1.norm() >= u2.norm() { u1 } else { u2 };
    let u = u3.cbrt();
    let mut r = [C64::new(0.0, 0.0); 3];
    let mut w = C64::new(1.0, 0.0);
    for x in r.iter_mut() {
        let uk = u * w;
        *x = uk + t / (3.0 * uk);
        w *= eta();
    }
    for x in r.iter_mut() {
        let d = 3.0 * *x * *x - t;
        if d.norm() > 1e-8 {
            *x -= (*x * *x * *x - t * *x - 1.0) / d;
        }
    }
    r.sort_by(lex_cmp);
    r
}

/// Roots of a polynomial with ascending coefficients (Aberth iteration, then Newton).
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let p = |z: C64| coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c);
    let dp = |z: C64| {
        coeffs.iter().enumerate().skip(1).rev().fold(C64::new(0.0, 0.0), |acc, (k, c)| acc * z + c * k as f64)
    };
    let bound = 1.0 + coeffs[..n].iter().map(|c| (c / lead).norm()).fold(0.0, f64::max);
    let mut z: Vec<C64> = (0..n).map(|k| C64::from_polar(0.5 * bound, 0.4 + 2.0 * PI * k as f64 / n as f64)).collect();
    for _ in 0..500 {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let d = dp(z[i]);
            let v = p(z[i]);
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            let ratio = v / d;
            let s: C64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let w = ratio / (1.0 - ratio * s);
            z[i] -= w;
            worst = worst.max(w.norm() / z[i].norm().max(1.0));
        }
        if worst < 1e-16 {
            break;
        }
    }
    for x in z.iter_mut() {
        for _ in 0..2 {
            let d = dp(*x);
            if d.norm() > 1e-12 {
                *x -= p(*x) / d;
            }
        }
    }
    z.sort_by(lex_cmp);
    z
}

/// Q(z; t) = 1/4 (z^2 - t)^2 + z + K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarticQ {
    pub t: C64,
    pub big_k: C64,
    /// ascending
    pub coeffs: [C64; 5],
    pub zeros: [C64; 4],
}

impl QuarticQ {
    fn coeffs_for(t: C64, k: C64) -> [C64; 5] {
        [t * t / 4.0 + k, C64::new(1.0, 0.0), -t / 2.0, C64::new(0.0, 0.0), C64::new(0.25, 0.0)]
    }

    pub fn new(t: C64, k: C64) -> Self {
        let coeffs = Self::coeffs_for(t, k);
        let z = poly_roots(&coeffs);
        QuarticQ { t, big_k: k, coeffs, zeros: [z[0], z[1], z[2], z[3]] }
    }

    /// One-cut form 1/4 (z - a)(z - b)(z - c)^2.
    pub fn one_cut(t: C64, a: C64, b: C64, c: C64) -> Self {
        let k = a * b * c * c / 4.0 - t * t / 4.0;
        QuarticQ { t, big_k: k, coeffs: Self::coeffs_for(t, k), zeros: [a, b, c, c] }
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Largest coefficient mismatch between 1/4 prod (z - z_i) and the coefficients.
    pub fn reconstruction_error(&self) -> f64 {
        let mut p = vec![C64::new(0.25, 0.0)];
        for r in &self.zeros {
            let mut q = vec![C64::new(0.0, 0.0); p.len() + 1];
            for (k, c) in p.iter().enumerate() {
                q[k + 1] += c;
                q[k] -= c * r;
            }
            p = q;
        }
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
        p.iter().zip(&self.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale
    }

    pub fn qdiff(&self) -> QDiff {
        QDiff::polynomial(C64::new(0.25, 0.0), self.zeros.to_vec())
    }

    pub fn min_gap(&self) -> f64 {
        let mut g = f64::INFINITY;
        for i in 0..4 {
            for j in i + 1..4 {
                g = g.min((self.zeros[i] - self.zeros[j]).norm());
            }
        }
        g
    }
}

// ---------------------------------------------------------------------------
// atlas

/// Closed polygon with a y-slab index for point location and distance queries.
#[derive(Debug, Clone, Default)]
struct PolyIndex {
    pts: Vec<C64>,
    cuts: Vec<f64>,
    slabs: Vec<Vec<u32>>,
}

impl PolyIndex {
    fn new(pts: Vec<C64>) -> Self {
        let mut ys: Vec<f64> = pts.iter().map(|p| p.im).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        let step = (ys.len() / 512).max(1);
        let cuts: Vec<f64> = ys.iter().step_by(step).cloned().collect();
        let mut slabs = vec![vec![]; cuts.len() + 1];
        let n = pts.len();
        for k in 0..n {
            let (a, b) = (pts[k], pts[(k + 1) % n]);
            let (lo, hi) = (a.im.min(b.im), a.im.max(b.im));
            let s0 = cuts.partition_point(|c| *c <= lo);
            let s1 = cuts.partition_point(|c| *c <= hi);
            for s in slabs.iter_mut().take(s1 + 1).skip(s0.saturating_sub(1)) {
                s.push(k as u32);
            }
        }
        PolyIndex { pts, cuts, slabs }
    }

    fn slab(&self, y: f64) -> usize {
        self.cuts.partition_point(|c| *c <= y)
    }

    fn seg(&self, k: u32) -> (C64, C64) {
        let n = self.pts.len();
        (self.pts[k as usize], self.pts[(k as usize + 1) % n])
    }

    fn contains(&self, z: C64) -> bool {
        let mut inside = false;
        for &k in &self.slabs[self.slab(z.im)] {
            let (a, b) = self.seg(k);
            if (a.im > z.im) != (b.im > z.im) {
                let x = a.re + (z.im - a.im) / (b.im - a.im) * (b.re - a.re);
                if x > z.re {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance to the boundary if it is below `tol`, else infinity.
    fn near(&self, z: C64, tol: f64) -> f64 {
        let (s0, s1) = (self.slab(z.im - tol), self.slab(z.im + tol));
        let mut best = f64::INFINITY;
        for s in s0..=s1 {
            for &k in &self.slabs[s] {
                let (a, b) = self.seg(k);
                best = best.min(seg_dist(a, b, z));
            }
        }
        if best <= tol {
            best
        } else {
            f64::INFINITY
        }
    }

    fn distance(&self, z: C64) -> f64 {
        let n = self.pts.len();
        (0..n).map(|k| seg_dist(self.pts[k], self.pts[(k + 1) % n], z)).fold(f64::INFINITY, f64::min)
    }
}

fn seg_dist(a: C64, b: C64, p: C64) -> f64 {
    let ab = b - a;
    let l = ab.norm_sqr();
    if l == 0.0 {
        return (p - a).norm();
    }
    let s = (((p - a) * ab.conj()).re / l).clamp(0.0, 1.0);
    (a + ab * s - p).norm()
}

fn segments_intersect(a: C64, b: C64, c: C64, d: C64) -> bool {
    let cross = |o: C64, p: C64, r: C64| ((p - o).conj() * (r - o)).im;
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0)
}

const FAR: f64 = 1e6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionAtlas {
    pub atlas_version: u32,
    pub t_cr: f64,
    /// t_cr * {1, eta, eta^2}
    pub corners: [C64; 3],
    /// where the loop of the auxiliary critical graph crosses the positive axis
    pub loop_crossing: f64,
    /// the five critical trajectories of the auxiliary differential (s-plane)
    pub aux: Vec<Vec<C64>>,
    /// their preimages under s = 2 x^3 (x-plane), three branches each
    pub delta: Vec<Vec<C64>>,
    /// boundary of O_(0) from far lower-left, past eta^2 t_cr, -1.0009, eta t_cr, to far upper-left
    pub boundary_o0: Vec<C64>,
    /// the side of the bounded region between eta^2 t_cr and eta t_cr
    pub side: Vec<C64>,
    /// closed polygons of the two-cut regions O_{1,0}, O_{1,i}, O_{1,-i}
    pub two_cut: [Vec<C64>; 3],
    /// closed polygon of O_{1,-}
    pub triangle: Vec<C64>,
    #[serde(skip)]
    index: Option<Box<AtlasIndex>>,
}

#[derive(Debug, Clone)]
struct AtlasIndex {
    two_cut: [PolyIndex; 3],
    triangle: PolyIndex,
}

/// Index of two_cut polygons by branch.
fn tau_slot(t: Tau) -> usize {
    match t {
        Tau::Zero => 0,
        Tau::PlusI => 1,
        Tau::MinusI => 2,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AtlasOptions {
    /// relative step of the auxiliary tracer (smaller is finer)
    pub max_step: f64,
    /// |s| at which the arms stop (|t| about (s/2)^{2/3})
    pub arm_reach: f64,
}

impl Default for AtlasOptions {
    fn default() -> Self {
        AtlasOptions { max_step: 0.01, arm_reach: 2e6 }
    }
}

impl AtlasOptions {
    pub fn with_resolution(resolution: usize) -> Self {
        AtlasOptions { max_step: (1.0 / resolution.max(1) as f64).min(0.05), ..Default::default() }
    }
}

/// The auxiliary differential (1 + 1/s)^3.
pub fn aux_qdiff() -> QDiff {
    QDiff { lead: C64::new(1.0, 0.0), zeros: vec![C64::new(-1.0, 0.0); 3], poles: vec![C64::new(0.0, 0.0); 3] }
}

/// The five critical trajectories from s = -1, in launch order 2 pi k / 5.
pub fn aux_trajectories(o: &AtlasOptions, exec: Exec) -> Result<Vec<TrajectoryArc>, PhaseError> {
    let q = aux_qdiff();
    let angles = quaddiff::launch_from_zero(&q, 0, Kind::Trajectory).map_err(|_| PhaseError::Trace { arc: 0, end: Endpoint::Truncated })?;
    let topt = TraceOptions {
        r_out: o.arm_reach,
        max_length: 10.0 * o.arm_reach,
        max_step: o.max_step,
        rel_step: 0.05,
        ..Default::default()
    };
    let arcs = exec.map(&angles, |a| quaddiff::trace_from_zero(&q, 0, *a, Kind::Trajectory, &topt));
    // 0 -> pole, 1 and 4 -> the loop, 2 and 3 -> the arms
    for (k, a) in arcs.iter().enumerate() {
        let ok = match k {
            0 => matches!(a.end, Endpoint::Pole(_)),
            1 | 4 => a.end == Endpoint::Zero(0),
            _ => matches!(a.end, Endpoint::Infinity(_)),
        };
        if !ok {
            return Err(PhaseError::Trace { arc: k, end: a.end });
        }
    }
    Ok(arcs)
}

fn cbrt_continued(pts: &[C64], branch: usize) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::with_capacity(pts.len());
    for (k, s) in pts.iter().enumerate() {
        let base = (s / 2.0).cbrt();
        let cands = [base, base * eta(), base * eta() * eta()];
        let x = if k == 0 {
            cands[branch]
        } else {
            let prev = out[k - 1];
            *cands.iter().min_by(|a, b| (*a - prev).norm().total_cmp(&(*b - prev).norm())).unwrap()
        };
        out.push(x);
    }
    out
}

fn rotate(pts: &[C64], r: C64) -> Vec<C64> {
    pts.iter().map(|p| p * r).collect()
}

fn conj_all(pts: &[C64]) -> Vec<C64> {
    pts.iter().map(|p| p.conj()).collect()
}

fn reversed(pts: &[C64]) -> Vec<C64> {
    pts.iter().rev().cloned().collect()
}

/// Build the atlas by tracing the auxiliary critical graph.
pub fn build_atlas(o: &AtlasOptions, exec: Exec) -> Result<RegionAtlas, PhaseError> {
    let arcs = aux_trajectories(o, exec)?;
    let up = &arcs[1].points;
    // upper half of the loop, ending on the positive real axis
    let k = up.windows(2).position(|w| w[0].im > 0.0 && w[1].im <= 0.0).ok_or(PhaseError::Trace { arc: 1, end: arcs[1].end })?;
    let (p, q) = (up[k], up[k + 1]);
    let cross = p.re + (q.re - p.re) * p.im / (p.im - q.im);
    let mut a1: Vec<C64> = up[..=k].to_vec();
    a1.push(C64::new(cross, 0.0));
    // principal cube root: arg in (0, pi/3] on the upper half plane
    let l0_half: Vec<C64> = a1.iter().map(|s| t_of_x((s / 2.0).cbrt())).collect();
    // arm from eta t_cr: x = eta conj(cbrt(s/2)) along the upper arm
    let b_up: Vec<C64> = arcs[2].points.iter().map(|s| t_of_x(eta() * (s / 2.0).cbrt().conj())).collect();

    let mut side = conj_all(&l0_half);
    side.extend(reversed(&l0_half).into_iter().skip(1));
    let mut boundary = reversed(&conj_all(&b_up));
    boundary.pop();
    boundary.extend(side.iter().cloned());
    boundary.extend(b_up.iter().skip(1).cloned());

    // close O_{1,0}: radial to FAR, then the far arc through pi
    let first = boundary[0];
    let last = *boundary.last().unwrap();
    let mut wedge = vec![C64::from_polar(FAR, first.arg())];
    wedge.extend(boundary.iter().cloned());
    wedge.push(C64::from_polar(FAR, last.arg()));
    let (a_up, a_lo) = (last.arg(), first.arg().rem_euclid(2.0 * PI));
    let nfar = 64;
    for j in 1..nfar {
        let a = a_up + (a_lo - a_up) * j as f64 / nfar as f64;
        wedge.push(C64::from_polar(FAR, a));
    }
    let e = eta();
    let eb = e.conj();
    // O_(i) = eta O_(0), O_(-i) = eta^2 O_(0)
    let two_cut = [wedge.clone(), rotate(&wedge, e), rotate(&wedge, eb)];
    let mut triangle = side.clone();
    triangle.extend(rotate(&side, eb).into_iter().skip(1));
    triangle.extend(rotate(&side, e).into_iter().skip(1));
    triangle.pop();

    let mut delta = vec![];
    for a in &arcs {
        for b in 0..3 {
            delta.push(cbrt_continued(&a.points, b));
        }
    }
    let tc = side[side.len() - 1] * eb;
    let mut atlas = RegionAtlas {
        atlas_version: 1,
        t_cr: tc.re,
        corners: [tc, tc * e, tc * eb],
        loop_crossing: cross,
        aux: arcs.iter().map(|a| a.points.clone()).collect(),
        delta,
        boundary_o0: boundary,
        side,
        two_cut,
        triangle,
        index: None,
    };
    atlas.reindex();
    Ok(atlas)
}

impl RegionAtlas {
    fn reindex(&mut self) {
        self.index = Some(Box::new(AtlasIndex {
            two_cut: [
                PolyIndex::new(self.two_cut[0].clone()),
                PolyIndex::new(self.two_cut[1].clone()),
                PolyIndex::new(self.two_cut[2].clone()),
            ],
            triangle: PolyIndex::new(self.triangle.clone()),
        }));
    }

    fn idx(&self) -> &AtlasIndex {
        self.index.as_ref().expect("atlas index")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("atlas serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        let mut a: RegionAtlas = serde_json::from_str(s)?;
        a.reindex();
        Ok(a)
    }

    /// Is t strictly inside O_{1,tau} (complement of the closure of O_(tau))?
    pub fn in_two_cut(&self, tau: Tau, t: C64) -> bool {
        self.idx().two_cut[tau_slot(tau)].contains(t)
    }

    pub fn in_triangle(&self, t: C64) -> bool {
        self.idx().triangle.contains(t)
    }

    /// Is t in the closure of O_(tau), up to `tol`?
    pub fn in_branch_domain(&self, tau: Tau, t: C64, tol: f64) -> bool {
        let p = &self.idx().two_cut[tau_slot(tau)];
        !p.contains(t) || p.near(t, tol).is_finite()
    }

    /// Distance from t to the union of the region boundaries.
    pub fn boundary_distance(&self, t: C64) -> f64 {
        let ix = self.idx();
        ix.two_cut.iter().map(|p| p.distance(t)).fold(f64::INFINITY, f64::min)
    }

    /// Is t in O_1 (two-cut regions and the trefoil triangle)?
    /// Distance from t to the closure of O_1 (zero inside).
    pub fn o1_distance(&self, t: C64) -> f64 {
        if self.in_o1(t) {
            return 0.0;
        }
        let ix = self.idx();
        self.boundary_distance(t).min(ix.triangle.distance(t))
    }

    pub fn in_o1(&self, t: C64) -> bool {
        let ix = self.idx();
        ix.triangle.contains(t) || ix.two_cut.iter().any(|p| p.contains(t))
    }

    /// Arm of the boundary of O_{1,-i} starting at t_cr (shared with O_{0,-i}).
    pub fn arm_from_t_cr(&self) -> Vec<C64> {
        let n = self.side.len();
        let b_up_len = (self.boundary_o0.len() - n) / 2 + 1;
        let b_up = &self.boundary_o0[self.boundary_o0.len() - b_up_len..];
        rotate(b_up, eta().conj())
    }

    /// Arm of the boundary of O_{1,-i} starting at eta t_cr (shared with O_{0,0}).
    pub fn arm_from_eta_t_cr(&self) -> Vec<C64> {
        let n = self.side.len();
        let b_up_len = (self.boundary_o0.len() - n) / 2 + 1;
        let b_lo = reversed(&self.boundary_o0[..b_up_len]);
        rotate(&b_lo, eta().conj())
    }

    /// Side [t_cr, eta t_cr] shared by O_{1,-i} and O_{1,-}.
    pub fn side_minus_i(&self) -> Vec<C64> {
        rotate(&self.side, eta().conj())
    }

    pub fn classify(&self, t: C64) -> PhaseLabel {
        const TOL: f64 = 1e-6;
        // reduce to the sector [-pi/3, pi/3)
        let mut j = 0;
        let mut tr = t;
        while !(-PI / 3.0..PI / 3.0).contains(&tr.arg()) && j < 3 {
            tr *= eta();
            j += 1;
        }
        // labels at tr; t = eta^{-j} tr, so rotate labels back by -j
        let back = (3 - j % 3) % 3;
        if self.corners.iter().any(|c| (tr - c).norm() <= TOL) {
            return PhaseLabel::Corner;
        }
        let ix = self.idx();
        if ix.two_cut.iter().any(|p| p.near(tr, TOL).is_finite()) {
            return PhaseLabel::BoundaryOneCut;
        }
        let label = if ix.triangle.contains(tr) {
            PhaseLabel::Trefoil
        } else if let Some(tau) = Tau::ALL.iter().find(|&&tau| ix.two_cut[tau_slot(tau)].contains(tr)) {
            PhaseLabel::TwoCut(*tau)
        } else {
            // the one-cut sector around direction 0 lies clockwise of O_{1,-i}
            PhaseLabel::OneCut(Tau::MinusI)
        };
        label.rotate_by(back)
    }

    /// Classification over a grid, row-major from the top row (largest Im).
    pub fn classify_grid(&self, lo: C64, hi: C64, nx: usize, ny: usize, exec: Exec) -> Vec<(C64, PhaseLabel)> {
        let pts: Vec<C64> = (0..ny)
            .flat_map(|r| {
                (0..nx).map(move |c| {
                    let fx = if nx > 1 { c as f64 / (nx - 1) as f64 } else { 0.5 };
                    let fy = if ny > 1 { 1.0 - r as f64 / (ny - 1) as f64 } else { 0.5 };
                    C64::new(lo.re + (hi.re - lo.re) * fx, lo.im + (hi.im - lo.im) * fy)
                })
            })
            .collect();
        exec.map(&pts, |t| (*t, self.classify(*t)))
    }

    /// Does the segment [a, b] stay out of O_{1,tau} and away from the corners?
    /// Endpoints may sit on the boundary.
    fn segment_clear(&self, tau: Tau, a: C64, b: C64) -> bool {
        let poly = &self.two_cut[tau_slot(tau)];
        if a == b {
            return true;
        }
        let d = (b - a) * 1e-7;
        let (a, b) = (a + d, b - d);
        let tcr = self.t_cr;
        // only the corners of this wedge are branch points of x_tau
        let ix = &self.idx().two_cut[tau_slot(tau)];
        for cnr in self.corners.iter().filter(|c| ix.near(**c, 1e-9).is_finite()) {
            let keep = (0.05 * tcr).min(0.5 * (b - cnr).norm()).min(0.5 * (a - cnr).norm());
            if seg_dist(a, b, *cnr) < keep {
                return false;
            }
        }
        if self.in_two_cut(tau, a) || self.in_two_cut(tau, b) {
            return false;
        }
        let n = poly.len();
        !(0..n).any(|k| segments_intersect(a, b, poly[k], poly[(k + 1) % n]))
    }
}

/// Symmetric Hausdorff distance between two point sets (polyline vertices).
pub fn hausdorff(a: &[C64], b: &[Vec<C64>]) -> f64 {
    let pb: Vec<C64> = b.iter().flatten().cloned().collect();
    let one = |x: &[C64], y: &[C64]| x.iter().map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    one(a, &pb).max(one(&pb, a))
}

// ---------------------------------------------------------------------------
// branches

/// Continue x_0 along a polyline path starting at t = 0, x = 1.
fn continue_x0(path: &[C64]) -> Result<C64, PhaseError> {
    continue_root(C64::new(1.0, 0.0), path)
}

/// Follow the root of x^3 - t x - 1 that equals `x` at `path[0]` along the polyline,
/// with no regard to the region atlas.
pub fn continue_root(x: C64, path: &[C64]) -> Result<C64, PhaseError> {
    let mut x = x;
    let mut t = path[0];
    for &target in &path[1..] {
        let mut h: f64 = 0.05;
        let mut s: f64 = 0.0;
        let span = target - t;
        let start = t;
        while s < 1.0 {
            let s_new = (s + h).min(1.0);
            let tn = start + span * s_new;
            let d = 3.0 * x * x - t;
            let pred = if d.norm() > 1e-12 { x + x / d * (tn - t) } else { x };
            let roots = cubic_roots(tn);
            let mut ds: Vec<(f64, C64)> = roots.iter().map(|r| ((r - pred).norm(), *r)).collect();
            ds.sort_by(|a, b| a.0.total_cmp(&b.0));
            let sep = (ds[1].1 - ds[0].1).norm();
            if ds[0].0 < 0.25 * sep {
                x = ds[0].1;
                t = tn;
                s = s_new;
                h = (h * 1.5).min(0.2);
            } else {
                h *= 0.5;
                if h < 1e-12 {
                    return Err(PhaseError::Collision(tn));
                }
                if sep < 1e-10 {
                    return Err(PhaseError::Collision(tn));
                }
            }
        }
    }
    Ok(x)
}

fn arc_points(r: f64, a0: f64, a1: f64) -> Vec<C64> {
    let n = ((a1 - a0).abs() / 0.05).ceil().max(1.0) as usize;
    (0..=n).map(|k| C64::from_polar(r, a0 + (a1 - a0) * k as f64 / n as f64)).collect()
}

/// Path from 0 to t inside the closure of O_(0).
fn path_x0(t: C64, atlas: &RegionAtlas) -> Result<Vec<C64>, PhaseError> {
    let zero = C64::new(0.0, 0.0);
    if t.norm() == 0.0 {
        return Ok(vec![zero]);
    }
    if atlas.segment_clear(Tau::Zero, zero, t) {
        return Ok(vec![zero, t]);
    }
    let sgn = if t.im >= 0.0 { 1.0 } else { -1.0 };
    let a0 = sgn * (2.0 * PI / 3.0 - 0.15);
    let at = t.arg();
    for mult in [1.0, 1.5, 2.0, 3.0, 5.0, 10.0] {
        let r = t.norm().max(2.5) * mult;
        let mut p = vec![zero];
        p.extend(arc_points(r, a0, at));
        p.push(t);
        if p.windows(2).all(|w| atlas.segment_clear(Tau::Zero, w[0], w[1])) {
            return Ok(p);
        }
    }
    Err(PhaseError::Domain(t))
}

/// The analytic branch x_tau(t) of x^3 - t x - 1 = 0.
pub fn branch_x(tau: Tau, t: C64, atlas: &RegionAtlas) -> Result<C64, PhaseError> {
    // x_{-i}(t) = eta x_0(eta t), x_i(t) = eta^2 x_0(eta^2 t)
    let r = match tau {
        Tau::Zero => C64::new(1.0, 0.0),
        Tau::MinusI => eta(),
        Tau::PlusI => eta().conj(),
    };
    let s = t * r;
    if !atlas.in_branch_domain(Tau::Zero, s, 1e-9) {
        return Err(PhaseError::Domain(t));
    }
    Ok(r * continue_x0(&path_x0(s, atlas)?)?)
}

/// One-cut endpoints (a, b, c) on branch tau, with sqrt continued from the anchor.
pub fn abc(tau: Tau, t: C64, atlas: &RegionAtlas) -> Result<(C64, C64, C64), PhaseError> {
    // (a, b, c)_tau(t) = r (a, b, c)_{-i}(r t), r = eta^{-j}, j steps from -i to tau
    let j = tau.steps_from_minus_i();
    let rot = eta().conj().powi(j as i32);
    let s = t * rot;
    let x0 = branch_x(Tau::Zero, s * eta(), atlas)?;
    let x = eta() * x0;
    let sx = C64::from_polar(1.0, PI / 3.0) * x0.sqrt();
    let k = I * 2f64.sqrt() / sx;
    let (a, b, c) = (x - k, x + k, -x);
    Ok((a * rot, b * rot, c * rot))
}

/// Residuals of a + b + 2c = 0 and the two remaining equations of the one-cut system.
pub fn abc_residuals(t: C64, a: C64, b: C64, c: C64) -> [f64; 3] {
    // expanding 1/4 (z-a)(z-b)(z-c)^2 must give z^3 coefficient 0, z^2 -t/2, z 1
    let s1 = a + b + 2.0 * c;
    let e2 = a * b + 2.0 * c * (a + b) + c * c;
    let e3 = a * b * 2.0 * c + c * c * (a + b);
    [(s1).norm(), (e2 / 4.0 + t / 2.0).norm(), (-e3 / 4.0 - 1.0).norm()]
}

/// One-cut Q on branch tau.
pub fn one_cut_q(tau: Tau, t: C64, atlas: &RegionAtlas) -> Result<QuarticQ, PhaseError> {
    let (a, b, c) = abc(tau, t, atlas)?;
    Ok(QuarticQ::one_cut(t, a, b, c))
}

// ---------------------------------------------------------------------------
// Boutroux system

/// Integral of sqrt(Q) and of 1/(2 sqrt(Q)) over the straight segment [zi, zj],
/// with the branch fixed by sqrt((z - zk)(z - zl)) continued from the midpoint.
fn seg_periods(zi: C64, zj: C64, zk: C64, zl: C64, n: usize) -> (C64, C64, C64) {
    let m = (zi + zj) * 0.5;
    let h = (zj - zi) * 0.5;
    let nodes = legendre(n);
    let mut th: Vec<(f64, f64)> = nodes.iter().map(|(x, w)| (x * PI / 2.0, w * PI / 2.0)).collect();
    th.sort_by(|a, b| a.0.total_cmp(&b.0));
    let r: Vec<C64> = th.iter().map(|(t, _)| {
        let z = m + h * t.sin();
        ((z - zk) * (z - zl)).sqrt()
    }).collect();
    let mut r = r;
    let mid = th.len() / 2;
    for k in mid + 1..r.len() {
        if (r[k] - r[k - 1]).norm() > (r[k] + r[k - 1]).norm() {
            r[k] = -r[k];
        }
    }
    for k in (0..mid).rev() {
        if (r[k] - r[k + 1]).norm() > (r[k] + r[k + 1]).norm() {
            r[k] = -r[k];
        }
    }
    let mut ia = C64::new(0.0, 0.0);
    let mut ip = C64::new(0.0, 0.0);
    for ((t, w), rr) in th.iter().zip(&r) {
        let c = t.cos();
        ia += *w * 0.5 * I * h * h * c * c * rr;
        ip += *w / (I * rr);
    }
    // w near the zi end
    let w_end = 0.5 * I * h * th[0].0.cos() * r[0];
    (ia, ip, w_end)
}

fn seg_periods_stable(zi: C64, zj: C64, zk: C64, zl: C64) -> (C64, C64, C64) {
    let mut n = 64;
    let mut prev = seg_periods(zi, zj, zk, zl, n);
    while n < 1024 {
        n *= 2;
        let next = seg_periods(zi, zj, zk, zl, n);
        let d = (next.0 - prev.0).norm() + (next.1 - prev.1).norm();
        prev = next;
        if d < 1e-10 * (1.0 + prev.1.norm()) {
            break;
        }
    }
    prev
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoutrouxSystem {
    pub residual: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
}

/// (B_alpha, B_beta) and the Jacobian in (Re K, Im K).
pub fn boutroux_system(t: C64, k: C64) -> (BoutrouxSystem, QuarticQ) {
    let q = QuarticQ::new(t, k);
    let z = q.zeros;
    // alpha: closest pair; beta: first of alpha with the nearer remaining zero
    let mut best = (0, 1, f64::INFINITY);
    for i in 0..4 {
        for j in i + 1..4 {
            let g = (z[i] - z[j]).norm();
            if g < best.2 {
                best = (i, j, g);
            }
        }
    }
    let (i0, i1) = (best.0, best.1);
    let rest: Vec<usize> = (0..4).filter(|&x| x != i0 && x != i1).collect();
    let i2 = if (z[rest[0]] - z[i0]).norm() <= (z[rest[1]] - z[i0]).norm() { rest[0] } else { rest[1] };
    let i3 = rest.iter().cloned().find(|&x| x != i2).unwrap();
    let (ia, ipa, wa) = seg_periods_stable(z[i0], z[i1], z[i2], z[i3]);
    let (ib, ipb, wb) = seg_periods_stable(z[i0], z[i2], z[i1], z[i3]);
    // orientation of beta relative to alpha from the local picture at z[i0]
    let c = 0.5 * ((z[i0] - z[i1]) * (z[i0] - z[i2]) * (z[i0] - z[i3])).sqrt();
    let (ua, ub) = (wa / c, wb / c);
    let s = (ua.conj() * ub).im.signum();
    let jac = [[ipa.re, -ipa.im], [s * ipb.re, -s * ipb.im]];
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    (BoutrouxSystem { residual: [ia.re, s * ib.re], jacobian: jac, det }, q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoutrouxSolution {
    pub t: C64,
    pub k: C64,
    pub q: QuarticQ,
    pub iterations: usize,
    /// Jacobian determinant at every iterate
    pub dets: Vec<f64>,
    pub residual: f64,
}

pub const BOUTROUX_TOL: f64 = 1e-10;

pub fn boutroux_solve(t: C64, k_start: C64) -> Result<BoutrouxSolution, PhaseError> {
    boutroux_solve_with(t, k_start, 30)
}

pub fn boutroux_solve_with(t: C64, k_start: C64, max_iter: usize) -> Result<BoutrouxSolution, PhaseError> {
    let mut k = k_start;
    let mut dets = vec![];
    for it in 0..=max_iter {
        let (sys, q) = boutroux_system(t, k);
        let gap = q.min_gap();
        if gap < 1e-10 {
            return Err(PhaseError::BoundaryReached { t, gap });
        }
        dets.push(sys.det);
        let res = sys.residual[0].abs() + sys.residual[1].abs();
        if res <= BOUTROUX_TOL {
            return Ok(BoutrouxSolution { t, k, q, iterations: it, dets, residual: res });
        }
        if it == max_iter || !res.is_finite() {
            return Err(PhaseError::Diverged { t, k, residual: res });
        }
        let j = sys.jacobian;
        let b = sys.residual;
        let du = (-b[0] * j[1][1] + b[1] * j[0][1]) / sys.det;
        let dv = (-b[1] * j[0][0] + b[0] * j[1][0]) / sys.det;
        let step = C64::new(du, dv);
        // damp until the residual drops
        let mut lam = 1.0;
        loop {
            let kn = k + step * lam;
            let (sn, qn) = boutroux_system(t, kn);
            let rn = sn.residual[0].abs() + sn.residual[1].abs();
            if (rn < res && qn.min_gap() > 1e-10) || lam < 1e-3 {
                k = kn;
                break;
            }
            lam *= 0.5;
        }
    }
    unreachable!()
}

/// Largest |Re int sqrt(Q)| over the six straight segments between zeros.
pub fn pair_periods(q: &QuarticQ) -> f64 {
    let z = q.zeros;
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            let o: Vec<usize> = (0..4).filter(|&x| x != i && x != j).collect();
            let (ia, _, _) = seg_periods_stable(z[i], z[j], z[o[0]], z[o[1]]);
            worst = worst.max(ia.re.abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: C64,
    pub k: C64,
    pub iterations: usize,
    pub min_gap: f64,
}

const MAX_NEWTON: usize = 8;

/// Walk from (t0, k0) to t1 along the segment, halving steps so that each Newton
/// solve takes at most 8 iterations and K moves by less than 0.1.
pub fn walk(t0: C64, k0: C64, t1: C64, out: &mut Vec<Waypoint>) -> Result<C64, PhaseError> {
    let mut s = 0.0;
    let mut h: f64 = 0.1;
    let mut k = k0;
    let mut dk = C64::new(0.0, 0.0);
    let mut prev_s = 0.0;
    while s < 1.0 {
        let sn = (s + h).min(1.0);
        let t = t0 + (t1 - t0) * sn;
        // linear predictor from the last step
        let guess = if s > 0.0 { k + dk * ((sn - s) / (s - prev_s).max(1e-300)) } else { k };
        match boutroux_solve_with(t, guess, MAX_NEWTON) {
            Ok(sol) if (sol.k - k).norm() < 0.1 => {
                dk = sol.k - k;
                prev_s = s;
                k = sol.k;
                s = sn;
                out.push(Waypoint { t, k, iterations: sol.iterations, min_gap: sol.q.min_gap() });
                if sol.iterations <= 3 {
                    h = (h * 1.5).min(0.1);
                }
            }
            Err(e @ PhaseError::BoundaryReached { .. }) if h < 1e-9 => return Err(e),
            _ => {
                h *= 0.5;
                if h < 1e-9 {
                    return Err(PhaseError::Stalled(t));
                }
            }
        }
    }
    Ok(k)
}

/// Nearest point on a polyline.
fn nearest_on(poly: &[C64], t: C64) -> (C64, f64) {
    let mut best = (poly[0], f64::INFINITY);
    for w in poly.windows(2) {
        let ab = w[1] - w[0];
        let l = ab.norm_sqr();
        let s = if l == 0.0 { 0.0 } else { (((t - w[0]) * ab.conj()).re / l).clamp(0.0, 1.0) };
        let p = w[0] + ab * s;
        let d = (p - t).norm();
        if d < best.1 {
            best = (p, d);
        }
    }
    best
}

pub const ENTRY_EPS: f64 = 1e-3;

/// Waypoints (t, K) from a known solution to `t_target`.
pub fn continuation_path(t_target: C64, atlas: &RegionAtlas) -> Result<Vec<Waypoint>, PhaseError> {
    match atlas.classify(t_target) {
        PhaseLabel::Trefoil => {
            let mut out = vec![Waypoint { t: C64::new(0.0, 0.0), k: C64::new(0.0, 0.0), iterations: 0, min_gap: QuarticQ::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0)).min_gap() }];
            if t_target.norm() > 0.0 {
                walk(C64::new(0.0, 0.0), C64::new(0.0, 0.0), t_target, &mut out)?;
            }
            Ok(out)
        }
        PhaseLabel::TwoCut(tau) => {
            // rotate so the target sits in O_{1,-i}; K(eta^{-j} s) = eta^j K(s)
            let j = match tau {
                Tau::MinusI => 0,
                Tau::PlusI => 1,
                Tau::Zero => 2,
            };
            let r = eta().powi(j);
            let s = t_target * r;
            let path = two_cut_path(s, atlas)?;
            let back = r.conj();
            Ok(path.into_iter().map(|w| Waypoint { t: w.t * back, k: w.k * r, ..w }).collect())
        }
        _ => Err(PhaseError::Domain(t_target)),
    }
}

/// Continuation into O_{1,-i}, entering from the nearest boundary point.
fn two_cut_path(s: C64, atlas: &RegionAtlas) -> Result<Vec<Waypoint>, PhaseError> {
    let pieces = [
        (atlas.side_minus_i(), Tau::MinusI),
        (atlas.arm_from_t_cr(), Tau::MinusI),
        (atlas.arm_from_eta_t_cr(), Tau::Zero),
    ];
    let (tb, _, tau) = pieces
        .iter()
        .map(|(p, tau)| {
            let (q, d) = nearest_on(p, s);
            (q, d, *tau)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let qb = one_cut_q(tau, tb, atlas)?;
    let dir = if (s - tb).norm() > 0.0 { (s - tb) / (s - tb).norm() } else { C64::new(1.0, 0.0) };
    let t1 = tb + dir * ENTRY_EPS.min((s - tb).norm());
    let mut out = vec![Waypoint { t: tb, k: qb.big_k, iterations: 0, min_gap: 0.0 }];
    let sol = boutroux_solve_with(t1, qb.big_k, 30)?;
    out.push(Waypoint { t: t1, k: sol.k, iterations: sol.iterations, min_gap: sol.q.min_gap() });
    if (s - t1).norm() > 0.0 {
        walk(t1, sol.k, s, &mut out)?;
    }
    Ok(out)
}

/// K(t) for a two-cut or trefoil t by continuation, with Q.
pub fn solve_k(t: C64, atlas: &RegionAtlas) -> Result<BoutrouxSolution, PhaseError> {
    let path = continuation_path(t, atlas)?;
    let last = path.last().unwrap();
    boutroux_solve(t, last.k)
}

/// Q(z;t) for any classified t: one-cut formula or Boutroux solution.
pub fn q_for(t: C64, atlas: &RegionAtlas) -> Result<QuarticQ, PhaseError> {
    match atlas.classify(t) {
        PhaseLabel::OneCut(tau) => one_cut_q(tau, t, atlas),
        PhaseLabel::TwoCut(_) | PhaseLabel::Trefoil => Ok(solve_k(t, atlas)?.q),
        _ => {
            // on a boundary: any adjacent one-cut branch defined there
            for tau in Tau::ALL {
                if let Ok(q) = one_cut_q(tau, t, atlas) {
                    return Ok(q);
                }
            }
            Err(PhaseError::Domain(t))
        }
    }
}

/// Re int_b^c sqrt(Q) for a one-cut Q = 1/4 (z-a)(z-b)(z-c)^2, along the segment,
/// with the sign of sqrt((z-a)(z-b)) at c given by `r_c_hint` (continuity).
/// Critical graph and preferred S-curve chain of Q(z; t).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SCurve {
    pub t: C64,
    pub label: PhaseLabel,
    pub q: QuarticQ,
    pub graph: CriticalGraph,
    pub chain: SCurveChain,
}

pub fn s_curve(t: C64, atlas: &RegionAtlas, o: &TraceOptions, exec: Exec) -> Result<SCurve, PhaseError> {
    let label = atlas.classify(t);
    let case = match label {
        PhaseLabel::OneCut(_) | PhaseLabel::BoundaryOneCut | PhaseLabel::Corner => "one-cut",
        PhaseLabel::TwoCut(_) => "two-cut",
        PhaseLabel::Trefoil => "trefoil",
    };
    let q = q_for(t, atlas)?;
    let qd = q.qdiff();
    let graph = critical_graph(&qd, o, exec)?;
    let chain = chain_from_graph(&qd, &graph, case)?;
    Ok(SCurve { t, label, q, graph, chain })
}

pub fn one_cut_gap_integral(a: C64, b: C64, c: C64, r_c_hint: C64) -> (f64, C64) {
    let mut rc = ((c - a) * (c - b)).sqrt();
    if (rc - r_c_hint).norm() > (rc + r_c_hint).norm() {
        rc = -rc;
    }
    let nodes = legendre(48);
    let d = c - b;
    let mut prev = rc;
    let mut acc = C64::new(0.0, 0.0);
    for (x, w) in nodes.iter().rev() {
        let u = 0.5 * (x + 1.0);
        let z = b + d * u * u;
        let mut r = ((z - a) * (z - b)).sqrt();
        if (r - prev).norm() > (r + prev).norm() {
            r = -r;
        }
        prev = r;
        acc += 0.5 * (z - c) * r * (2.0 * u) * (0.5 * w);
    }
    ((acc * d).re, rc)
}
