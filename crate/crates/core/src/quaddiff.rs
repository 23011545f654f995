//! Trajectories of -Q(z) dz^2 (where -Q (dz)^2 > 0) and orthogonal
//! trajectories (-Q (dz)^2 < 0), critical graphs of quartic Q, the function
//! U(z) = Re 2 int_e^z Q^{1/2}, S-curve chains and equilibrium-measure checks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::num::{lex_cmp, C64, I};
use crate::quad::legendre;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QdError {
    #[error("near-double zero at {0}: |Q'| too small to launch simple-zero directions")]
    NearDoubleZero(C64),
    #[error("zero index {0} out of range")]
    NoSuchZero(usize),
    #[error("zeros not separated (min gap {0:e})")]
    Coincident(f64),
    #[error("critical graph is not admissible: {0}")]
    Inadmissible(String),
    #[error("evaluation point {0} sits on a zero")]
    OnZero(C64),
    #[error("chain selection failed: {0}")]
    Chain(String),
}

/// Q(z) = lead * prod (z - zeros) / prod (z - poles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QDiff {
    pub lead: C64,
    pub zeros: Vec<C64>,
    pub poles: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    Trajectory,
    Orthogonal,
}

impl Kind {
    pub fn swapped(self) -> Kind {
        match self {
            Kind::Trajectory => Kind::Orthogonal,
            Kind::Orthogonal => Kind::Trajectory,
        }
    }
}

/// Distinct critical point with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Critical {
    pub z: C64,
    pub order: usize,
}

impl QDiff {
    pub fn polynomial(lead: C64, zeros: Vec<C64>) -> Self {
        QDiff { lead, zeros, poles: vec![] }
    }

    pub fn eval(&self, z: C64) -> C64 {
        let mut v = self.lead;
        for r in &self.zeros {
            v *= z - r;
        }
        for p in &self.poles {
            v /= z - p;
        }
        v
    }

    pub fn negated(&self) -> QDiff {
        QDiff { lead: -self.lead, ..self.clone() }
    }

    pub fn degree(&self) -> i64 {
        self.zeros.len() as i64 - self.poles.len() as i64
    }

    /// Distinct zeros (exactly equal entries merged), in input order.
    pub fn criticals(&self) -> Vec<Critical> {
        let mut out: Vec<Critical> = vec![];
        for z in &self.zeros {
            match out.iter_mut().find(|c| c.z == *z) {
                Some(c) => c.order += 1,
                None => out.push(Critical { z: *z, order: 1 }),
            }
        }
        out
    }

    /// Product of (z - c)^(m/2) over zeros c of multiplicity m >= 2.
    pub fn even_part(&self, z: C64) -> C64 {
        let mut v = C64::new(1.0, 0.0);
        for c in self.criticals() {
            for _ in 0..c.order / 2 {
                v *= z - c.z;
            }
        }
        v
    }

    fn distinct_poles(&self) -> Vec<C64> {
        let mut out: Vec<C64> = vec![];
        for p in &self.poles {
            if !out.contains(p) {
                out.push(*p);
            }
        }
        out
    }

    /// Q^{(m)}(z0)/m! at a zero of order m.
    pub fn local_coefficient(&self, z0: C64) -> C64 {
        let mut v = self.lead;
        for r in &self.zeros {
            if *r != z0 {
                v *= z0 - r;
            }
        }
        for p in &self.poles {
            v /= z0 - p;
        }
        v
    }

    /// Distance to the nearest zero or pole.
    pub fn crit_dist(&self, z: C64) -> f64 {
        self.zeros.iter().chain(&self.poles).map(|c| (z - c).norm()).fold(f64::INFINITY, f64::min)
    }

    fn crit_radius(&self) -> f64 {
        self.zeros.iter().chain(&self.poles).map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Asymptotic directions at infinity: angle of direction k.
    pub fn infinity_angle(&self, kind: Kind, k: usize) -> f64 {
        let m = (self.degree() + 2) as f64;
        let base = match kind {
            Kind::Trajectory => (PI - self.lead.arg()) / m - PI,
            Kind::Orthogonal => -self.lead.arg() / m,
        };
        base + 2.0 * PI * k as f64 / m
    }

    pub fn infinity_directions(&self) -> usize {
        (self.degree() + 2).max(0) as usize
    }

    /// Nearest asymptotic direction index to angle `a`.
    pub fn bin_direction(&self, kind: Kind, a: f64) -> usize {
        let m = self.infinity_directions();
        let step = 2.0 * PI / m as f64;
        let x = (a - self.infinity_angle(kind, 0)) / step;
        (x.round() as i64).rem_euclid(m as i64) as usize
    }

    /// sqrt(Q) on the branch that behaves like sqrt(lead) z^{deg/2} at infinity (even degree).
    pub fn far_sqrt(&self, z: C64) -> C64 {
        let mut ratio = C64::new(1.0, 0.0);
        for r in &self.zeros {
            ratio *= 1.0 - r / z;
        }
        for p in &self.poles {
            ratio /= 1.0 - p / z;
        }
        self.lead.sqrt() * z.powi((self.degree() / 2) as i32) * ratio.sqrt()
    }
}

/// sqrt(Q(z)) with the sign nearest `prev`.
/// sqrt(Q(z)) on the branch continued from `prev = sqrt(Q(zp))`. The comparison is made
/// after dividing out the double zeros, where sqrt(Q) vanishes but does not branch.
fn continued_sqrt(q: &QDiff, z: C64, zp: C64, prev: C64) -> C64 {
    let s = q.eval(z).sqrt();
    let (e, ep) = (q.even_part(z), q.even_part(zp));
    let (r, rp) = if e.norm() > 0.0 && ep.norm() > 0.0 { (s / e, prev / ep) } else { (s, prev) };
    if (r - rp).norm() <= (r + rp).norm() {
        s
    } else {
        -s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    Zero(usize),
    Pole(usize),
    /// asymptotic direction index (see `QDiff::infinity_angle`)
    Infinity(usize),
    Point,
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryArc {
    pub kind: Kind,
    pub points: Vec<C64>,
    pub start: Endpoint,
    pub end: Endpoint,
    pub length: f64,
    /// launch angle when started at a zero
    pub angle: f64,
}

impl TrajectoryArc {
    pub fn is_short(&self) -> bool {
        matches!((self.start, self.end), (Endpoint::Zero(_), Endpoint::Zero(_)))
    }

    pub fn reversed(&self) -> TrajectoryArc {
        let mut p = self.points.clone();
        p.reverse();
        TrajectoryArc { points: p, start: self.end, end: self.start, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub capture: f64,
    pub launch_offset: f64,
    pub r_out: f64,
    pub max_length: f64,
    /// step <= rel_step * distance to the nearest critical point
    pub rel_step: f64,
    /// step <= max_step * max(1, |z|)
    pub max_step: f64,
    /// re-project each step onto the level set of Re/Im int sqrt(Q)
    pub corrector: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            capture: 1e-4,
            launch_offset: 1e-5,
            r_out: 20.0,
            max_length: 200.0,
            rel_step: 0.2,
            max_step: 0.05,
            corrector: true,
        }
    }
}

fn direction(q: &QDiff, z: C64, kind: Kind, prev: C64) -> C64 {
    let qz = q.eval(z);
    let s = match kind {
        Kind::Trajectory => -1.0,
        Kind::Orthogonal => 1.0,
    };
    let v = (s / qz).sqrt();
    let v = v / v.norm();
    if (v * prev.conj()).re < 0.0 {
        -v
    } else {
        v
    }
}

/// int_a^b sqrt(Q) dz along the chord, sign continued from `w_a` (the value at a).
fn chord_integral(q: &QDiff, a: C64, b: C64, w_a: C64) -> (C64, C64) {
    let nodes = legendre(6);
    let mut prev = w_a;
    let mut zp = a;
    let mut acc = C64::new(0.0, 0.0);
    let h = (b - a) * 0.5;
    for (x, wt) in nodes.iter() {
        let z = a + h * (x + 1.0);
        let w = continued_sqrt(q, z, zp, prev);
        prev = w;
        zp = z;
        acc += w * *wt;
    }
    let w_b = continued_sqrt(q, b, zp, prev);
    (acc * h, w_b)
}

/// int_{z0}^{p} sqrt(Q) dz for a zero z0 of order m, by the substitution z = z0 + (p - z0) u^2.
/// `w_p` fixes the branch at p.
fn from_zero_integral(q: &QDiff, z0: C64, p: C64, w_p: C64) -> C64 {
    let nodes = legendre(24);
    let d = p - z0;
    let mut prev = w_p;
    let mut zp = p;
    let mut acc = C64::new(0.0, 0.0);
    // walk from u = 1 down to 0 so the branch is continued from p
    for (x, wt) in nodes.iter().rev() {
        let u = 0.5 * (x + 1.0);
        let z = z0 + d * u * u;
        let w = continued_sqrt(q, z, zp, prev);
        prev = w;
        zp = z;
        acc += w * (2.0 * u) * (0.5 * wt);
    }
    acc * d
}

/// Launch directions at zero `idx` of `q.criticals()`, in [0, 2 pi) ascending.
pub fn launch_from_zero(q: &QDiff, idx: usize, kind: Kind) -> Result<Vec<f64>, QdError> {
    let cs = q.criticals();
    let c = cs.get(idx).ok_or(QdError::NoSuchZero(idx))?;
    let lc = q.local_coefficient(c.z);
    let scale = q.lead.norm() * q.crit_radius().max(1.0).powi(q.zeros.len() as i32 - 1);
    if lc.norm() < 1e-10 * scale {
        return Err(QdError::NearDoubleZero(c.z));
    }
    let m = (c.order + 2) as f64;
    let base = match kind {
        Kind::Trajectory => PI - lc.arg(),
        Kind::Orthogonal => -lc.arg(),
    };
    let mut v: Vec<f64> = (0..c.order + 2).map(|j| ((base + 2.0 * PI * j as f64) / m).rem_euclid(2.0 * PI)).collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Trace from a zero of `q.criticals()` at launch angle `theta`.
pub fn trace_from_zero(q: &QDiff, idx: usize, theta: f64, kind: Kind, o: &TraceOptions) -> TrajectoryArc {
    let z0 = q.criticals()[idx].z;
    let v0 = C64::from_polar(1.0, theta);
    let p = z0 + v0 * o.launch_offset;
    let w_p = q.eval(p).sqrt();
    let phi0 = from_zero_integral(q, z0, p, w_p);
    let mut arc = trace_inner(q, p, v0, kind, o, Some(idx), phi0, w_p, C64::new(0.0, 0.0));
    arc.points.insert(0, z0);
    arc.start = Endpoint::Zero(idx);
    arc.angle = theta;
    arc
}

/// Trace from an ordinary point in the initial direction `dir` (flipped if needed
/// so that it is a valid direction of the field).
pub fn trace(q: &QDiff, start: C64, dir: C64, kind: Kind, o: &TraceOptions) -> TrajectoryArc {
    let v0 = direction(q, start, kind, dir);
    let w = q.eval(start).sqrt();
    let mut arc = trace_inner(q, start, v0, kind, o, None, C64::new(0.0, 0.0), w, C64::new(0.0, 0.0));
    arc.points.insert(0, start);
    arc.angle = v0.arg();
    arc
}

#[allow(clippy::too_many_arguments)]
fn trace_inner(q: &QDiff, start: C64, v0: C64, kind: Kind, o: &TraceOptions, from: Option<usize>, phi0: C64, w0: C64, target: C64) -> TrajectoryArc {
    let crits = q.criticals();
    let poles = q.distinct_poles();
    let r_out = o.r_out.max(5.0 * q.crit_radius());
    let level = |phi: C64| match kind {
        Kind::Trajectory => phi.re - target.re,
        Kind::Orthogonal => phi.im - target.im,
    };
    let mut z = start;
    let mut v = v0;
    let mut w = w0;
    let mut phi = phi0;
    let mut len = 0.0;
    let mut pts = vec![];
    let mut end = Endpoint::Truncated;
    let guard = 50.0 * o.capture;
    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > 2_000_000 {
            break;
        }
        let d = q.crit_dist(z);
        let h = (o.rel_step * d).min(o.max_step * z.norm().max(1.0)).max(1e-14);
        let k1 = direction(q, z, kind, v);
        let k2 = direction(q, z + k1 * (h / 2.0), kind, k1);
        let k3 = direction(q, z + k2 * (h / 2.0), kind, k2);
        let k4 = direction(q, z + k3 * h, kind, k3);
        let mut zn = z + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
        let (mut dphi, mut wn) = chord_integral(q, z, zn, w);
        if o.corrector {
            for _ in 0..2 {
                let e = level(phi + dphi);
                let n = I * k4;
                let wnn = wn * n;
                let rate = match kind {
                    Kind::Trajectory => wnn.re,
                    Kind::Orthogonal => wnn.im,
                };
                if rate.abs() < 1e-10 || e.abs() < 1e-15 * phi.norm().max(1.0) {
                    break;
                }
                let delta = -e / rate;
                if delta.abs() > 0.1 * h {
                    break;
                }
                zn += n * delta;
                let r = chord_integral(q, z, zn, w);
                dphi = r.0;
                wn = r.1;
            }
        }
        len += (zn - z).norm();
        phi += dphi;
        w = wn;
        v = direction(q, zn, kind, k4);
        z = zn;
        pts.push(z);
        if let Some((j, c)) = crits.iter().enumerate().find(|(_, c)| (z - c.z).norm() < o.capture) {
            if Some(j) != from || len > guard {
                pts.push(c.z);
                end = Endpoint::Zero(j);
                break;
            }
        }
        if let Some(j) = poles.iter().position(|p| (z - p).norm() < o.capture) {
            end = Endpoint::Pole(j);
            break;
        }
        if z.norm() > r_out && (v * z.conj()).re > 0.0 {
            end = Endpoint::Infinity(q.bin_direction(kind, z.arg()));
            break;
        }
        if len > o.max_length {
            break;
        }
    }
    TrajectoryArc { kind, points: pts, start: Endpoint::Point, end, length: len, angle: 0.0 }
}

/// Largest deviation of arg(-Q dz^2) (trajectory) or arg(Q dz^2) (orthogonal) from 0,
/// measured per chord as the phase of (int sqrt(Q) dz)^2 along the chord: by Cauchy
/// this equals the integral along the true arc, so the check does not depend on how
/// finely the polyline samples a curved arc. Chords touching a zero are skipped.
pub fn phase_defect(q: &QDiff, arc: &TrajectoryArc) -> f64 {
    let mut worst: f64 = 0.0;
    for p in arc.points.windows(2) {
        if q.crit_dist(p[0]).min(q.crit_dist(p[1])) < 1e-6 || p[0] == p[1] {
            continue;
        }
        let (int, _) = chord_integral(q, p[0], p[1], q.eval(p[0]).sqrt());
        let v = int * int;
        let a = match arc.kind {
            Kind::Trajectory => (-v).arg(),
            Kind::Orthogonal => v.arg(),
        };
        worst = worst.max(a.abs());
    }
    worst
}

/// Arcs from every launch direction of every zero.
pub fn trace_all(q: &QDiff, kind: Kind, o: &TraceOptions, exec: Exec) -> Result<Vec<TrajectoryArc>, QdError> {
    let cs = q.criticals();
    let mut jobs = vec![];
    for i in 0..cs.len() {
        for a in launch_from_zero(q, i, kind)? {
            jobs.push((i, a));
        }
    }
    Ok(exec.map(&jobs, |(i, a)| trace_from_zero(q, *i, *a, kind, o)))
}

/// A short trajectory after merging the two traces that find it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortArc {
    pub from: usize,
    pub to: usize,
    pub arc: usize,
    /// departure angles at `from` and at `to`
    pub angle_from: f64,
    pub angle_to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    /// orthogonal direction index at infinity inside the face (end domains)
    pub infinity: Vec<usize>,
    /// indices into `shorts` whose sides bound this face
    pub shorts: Vec<usize>,
    pub zeros: Vec<usize>,
    /// sign of U at a far sample (end domains) or 0
    pub u_sign: f64,
    /// the face outside the circle at infinity
    pub outer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalGraph {
    pub zeros: Vec<C64>,
    pub orders: Vec<usize>,
    pub arcs: Vec<TrajectoryArc>,
    pub orth: Vec<TrajectoryArc>,
    pub shorts: Vec<ShortArc>,
    /// per zero: sorted trajectory directions at infinity it connects to
    pub adjacency: Vec<Vec<usize>>,
    pub faces: Vec<Face>,
    /// indices into `shorts` forming the support J
    pub support: Vec<usize>,
    pub admissible: bool,
    pub diagnostics: Vec<String>,
}

impl CriticalGraph {
    pub fn short_list(&self) -> Vec<(usize, usize)> {
        self.shorts.iter().map(|s| (s.from.min(s.to), s.from.max(s.to))).collect()
    }

    pub fn support_polylines(&self) -> Vec<Vec<C64>> {
        self.support.iter().map(|&k| self.arcs[self.shorts[k].arc].points.clone()).collect()
    }

    /// Zeros that are endpoints of support arcs.
    pub fn support_endpoints(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.support.iter().flat_map(|&k| [self.shorts[k].from, self.shorts[k].to]).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Orthogonal arcs from zeros to infinity: (zero, orthogonal direction, arc index).
    pub fn orth_to_infinity(&self) -> Vec<(usize, usize, usize)> {
        self.orth
            .iter()
            .enumerate()
            .filter_map(|(k, a)| match (a.start, a.end) {
                (Endpoint::Zero(i), Endpoint::Infinity(d)) => Some((i, d, k)),
                _ => None,
            })
            .collect()
    }
}

/// Default far radius for sampling U in end domains.
fn far_radius(q: &QDiff, o: &TraceOptions) -> f64 {
    2.0 * o.r_out.max(5.0 * q.crit_radius())
}

#[derive(Clone, Copy, Debug)]
struct Half {
    node: usize,
    angle: f64,
    /// 2 * edge id + side, side 0 being the stored orientation
    edge: usize,
}

/// Build the critical graph of a polynomial Q (degree 4 in this crate).
pub fn critical_graph(q: &QDiff, o: &TraceOptions, exec: Exec) -> Result<CriticalGraph, QdError> {
    let cs = q.criticals();
    let nz = cs.len();
    for i in 0..nz {
        for j in 0..i {
            let g = (cs[i].z - cs[j].z).norm();
            if g < 1e-8 {
                return Err(QdError::Coincident(g));
            }
        }
    }
    let (arcs, orth) = exec.join(|| trace_all(q, Kind::Trajectory, o, exec), || trace_all(q, Kind::Orthogonal, o, exec));
    let arcs = arcs?;
    let orth = orth?;
    let mut diagnostics = vec![];
    let ndir = q.infinity_directions();

    // merge short trajectories found from both ends
    let mut shorts: Vec<ShortArc> = vec![];
    for (k, a) in arcs.iter().enumerate() {
        if let (Endpoint::Zero(i), Endpoint::Zero(j)) = (a.start, a.end) {
            if i == j {
                diagnostics.push(format!("trajectory from zero {i} returns to it"));
                continue;
            }
            let n = a.points.len();
            let back = (a.points[n - 2] - a.points[n - 1]).arg();
            if let Some(s) = shorts.iter_mut().find(|s| s.from == j && s.to == i) {
                // keep the launch angle from the other end
                s.angle_to = a.angle;
                continue;
            }
            if shorts.iter().any(|s| s.from == i && s.to == j) {
                diagnostics.push(format!("two short trajectories between {i} and {j}"));
                continue;
            }
            shorts.push(ShortArc { from: i, to: j, arc: k, angle_from: a.angle, angle_to: back });
        }
    }
    if arcs.iter().any(|a| a.end == Endpoint::Truncated) {
        diagnostics.push("truncated trajectory".into());
    }

    let mut adjacency = vec![vec![]; nz];
    for a in &arcs {
        if let (Endpoint::Zero(i), Endpoint::Infinity(d)) = (a.start, a.end) {
            adjacency[i].push(d);
        }
    }
    for v in adjacency.iter_mut() {
        v.sort();
    }

    // planar embedding: zeros, then infinity nodes; edges are shorts, rays, circle pieces
    let inf_node = |d: usize| nz + d;
    let mut halves: Vec<Half> = vec![];
    let mut edge_kind: Vec<(char, usize)> = vec![];
    for (k, s) in shorts.iter().enumerate() {
        let e = edge_kind.len();
        edge_kind.push(('s', k));
        halves.push(Half { node: s.from, angle: s.angle_from, edge: 2 * e });
        halves.push(Half { node: s.to, angle: s.angle_to, edge: 2 * e + 1 });
    }
    for (k, a) in arcs.iter().enumerate() {
        if let (Endpoint::Zero(i), Endpoint::Infinity(d)) = (a.start, a.end) {
            let e = edge_kind.len();
            edge_kind.push(('r', k));
            let phi = q.infinity_angle(Kind::Trajectory, d);
            // several arcs may share a direction; order them by their level of Re int sqrt(Q),
            // which tends to the lateral position at infinity
            let p = a.points[a.points.len() - 1];
            let p_ref = arcs.iter().find(|b| b.end == a.end).map(|b| b.points[b.points.len() - 1]).unwrap();
            let w_ref = q.far_sqrt(p_ref);
            let level = if p == p_ref { 0.0 } else { chord_integral(q, p_ref, p, w_ref).0.re };
            let off = level / (I * w_ref * C64::from_polar(1.0, phi)).re;
            halves.push(Half { node: i, angle: a.angle, edge: 2 * e });
            halves.push(Half { node: inf_node(d), angle: phi + PI - 1e-6 * off / (1.0 + off.abs()), edge: 2 * e + 1 });
        }
    }
    for d in 0..ndir {
        let e = edge_kind.len();
        edge_kind.push(('c', d));
        let d1 = (d + 1) % ndir;
        let phi0 = q.infinity_angle(Kind::Trajectory, d);
        let phi1 = q.infinity_angle(Kind::Trajectory, d1);
        halves.push(Half { node: inf_node(d), angle: phi0 + PI / 2.0, edge: 2 * e });
        halves.push(Half { node: inf_node(d1), angle: phi1 - PI / 2.0, edge: 2 * e + 1 });
    }
    let nn = nz + ndir;
    let mut around: Vec<Vec<usize>> = vec![vec![]; nn];
    for (h, hf) in halves.iter().enumerate() {
        around[hf.node].push(h);
    }
    for v in around.iter_mut() {
        v.sort_by(|&a, &b| halves[a].angle.rem_euclid(2.0 * PI).total_cmp(&halves[b].angle.rem_euclid(2.0 * PI)));
    }
    let by_edge: std::collections::HashMap<usize, usize> = halves.iter().enumerate().map(|(h, hf)| (hf.edge, h)).collect();
    let twin = |h: usize| by_edge[&(halves[h].edge ^ 1)];

    let mut face_of = vec![usize::MAX; halves.len()];
    let mut faces = vec![];
    let mut face_corners: Vec<Vec<C64>> = vec![];
    let rfar = far_radius(q, o);
    for start in 0..halves.len() {
        if face_of[start] != usize::MAX {
            continue;
        }
        let fi = faces.len();
        let mut f = Face { infinity: vec![], shorts: vec![], zeros: vec![], u_sign: 0.0, outer: false };
        let mut h = start;
        let mut guard = 0;
        let mut corners = vec![];
        loop {
            face_of[h] = fi;
            let hf = halves[h];
            if let ('r', k) = edge_kind[hf.edge / 2] {
                if hf.edge % 2 == 0 {
                    // corner at infinity between two arcs: a strip end
                    let t = twin(h);
                    let ring = &around[halves[t].node];
                    let pos = ring.iter().position(|&x| x == t).unwrap();
                    let nx = halves[ring[(pos + ring.len() - 1) % ring.len()]];
                    if let ('r', k2) = edge_kind[nx.edge / 2] {
                        let (p1, p2) = (&arcs[k].points, &arcs[k2].points);
                        corners.push(0.5 * (p1[p1.len() - 1] + p2[p2.len() - 1]));
                    }
                }
            }
            if hf.node < nz && !f.zeros.contains(&hf.node) {
                f.zeros.push(hf.node);
            }
            match edge_kind[hf.edge / 2] {
                ('s', k) => f.shorts.push(k),
                ('c', d) if hf.edge % 2 == 0 => f.infinity.push(d),
                ('c', _) => f.outer = true,
                _ => {}
            }
            // next: clockwise neighbour of the twin around the head node
            let t = twin(h);
            let ring = &around[halves[t].node];
            let pos = ring.iter().position(|&x| x == t).unwrap();
            h = ring[(pos + ring.len() - 1) % ring.len()];
            guard += 1;
            if h == start || guard > 10 * halves.len() {
                break;
            }
        }
        faces.push(f);
        face_corners.push(corners);
    }
    // U vanishes at simple zeros only; a double zero may sit off the level set
    let anchors: Vec<C64> = cs.iter().filter(|c| c.order == 1).map(|c| c.z).collect();
    for (f, corners) in faces.iter_mut().zip(&face_corners) {
        if f.outer || anchors.is_empty() {
            continue;
        }
        if f.infinity.len() == 1 {
            let d = f.infinity[0];
            let phi = q.infinity_angle(Kind::Trajectory, d) + PI / ndir as f64;
            let zs = C64::from_polar(rfar, phi);
            f.u_sign = far_u(q, zs, &anchors).signum();
        } else if let Some(&zs) = corners.first() {
            f.u_sign = far_u(q, zs, &anchors).signum();
        }
    }
    let simple = cs.iter().all(|c| c.order == 1);
    let strips = faces.iter().zip(&face_corners).filter(|(f, c)| f.infinity.is_empty() && !c.is_empty()).count();
    // with a double zero, strips of width |Re int_e^c sqrt(Q)| are expected
    if strips > 0 && simple {
        diagnostics.push(format!("{strips} strip domain(s)"));
    }
    if faces.iter().any(|f| f.infinity.len() > 1) {
        diagnostics.push("face spanning several directions".into());
    }
    if faces.iter().zip(&face_corners).any(|(f, c)| f.infinity.is_empty() && c.is_empty() && !f.outer) {
        diagnostics.push("bounded face".into());
    }

    let mut support = vec![];
    for (k, s) in shorts.iter().enumerate() {
        let sides: Vec<usize> = (0..2).map(|side| face_of[by_edge[&(2 * edge_index(&edge_kind, 's', k) + side)]]).collect();
        if sides.iter().all(|&f| faces[f].u_sign > 0.0) {
            support.push(k);
        }
        let _ = s;
    }
    if support.is_empty() {
        diagnostics.push("empty support".into());
    }
    if simple && shorts.len() + 1 != nz {
        diagnostics.push(format!("{} short trajectories for {} zeros", shorts.len(), nz));
    }
    let admissible = diagnostics.is_empty();
    Ok(CriticalGraph {
        zeros: cs.iter().map(|c| c.z).collect(),
        orders: cs.iter().map(|c| c.order).collect(),
        arcs,
        orth,
        shorts,
        adjacency,
        faces,
        support,
        admissible,
        diagnostics,
    })
}

fn edge_index(kinds: &[(char, usize)], c: char, k: usize) -> usize {
    kinds.iter().position(|&e| e == (c, k)).unwrap()
}

/// U at a far point: far-field branch, integrated straight back to the nearest zero.
fn far_u(q: &QDiff, z: C64, zeros: &[C64]) -> f64 {
    let e = *zeros.iter().min_by(|a, b| (*a - z).norm().total_cmp(&(*b - z).norm())).unwrap();
    let w = q.far_sqrt(z);
    2.0 * segment_from_zero(q, e, z, w).re
}

/// int_e^z sqrt(Q) along the straight segment, e a zero, branch fixed by `w_z` at z.
/// Composite Gauss-Legendre in u with z(u) = e + (z - e) u^2.
fn segment_from_zero(q: &QDiff, e: C64, z: C64, w_z: C64) -> C64 {
    let nodes = legendre(16);
    let panels = 24;
    let d = z - e;
    let mut prev = w_z;
    let mut zp = z;
    let mut acc = C64::new(0.0, 0.0);
    for p in (0..panels).rev() {
        let (a, b) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
        for (x, wt) in nodes.iter().rev() {
            let u = a + (b - a) * 0.5 * (x + 1.0);
            let zz = e + d * u * u;
            let w = continued_sqrt(q, zz, zp, prev);
            prev = w;
            zp = zz;
            acc += w * (2.0 * u) * (0.5 * (b - a) * wt);
        }
    }
    acc * d
}

fn segments_cross(a: C64, b: C64, c: C64, d: C64) -> bool {
    let cross = |o: C64, p: C64, r: C64| ((p - o).conj() * (r - o)).im;
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0)
}

/// Branch of sqrt(Q) at z that has cuts on `cuts` and grows like the far-field branch.
pub fn branch_at(q: &QDiff, cuts: &[Vec<C64>], z: C64) -> Result<C64, QdError> {
    if q.crit_dist(z) == 0.0 {
        return Err(QdError::OnZero(z));
    }
    let centre: C64 = q.zeros.iter().sum::<C64>() / q.zeros.len().max(1) as f64;
    let mut base = z - centre;
    if base.norm() < 1e-12 {
        base = C64::new(1.0, 0.0);
    }
    let reach = 4.0 * q.crit_radius().max(1.0) + 10.0;
    // a fan of rays around (never exactly along) the outward direction, which
    // can be collinear with a cut; keep the one clearing the zeros best
    let far = (0..9)
        .map(|k| {
            let a = base.arg() + 0.23 * (k as f64 - 4.0) + 0.0713;
            let f = z + C64::from_polar(reach, a);
            let clear = q.zeros.iter().map(|r| seg_point_dist(z + (f - z) * 1e-3, f, *r)).fold(f64::INFINITY, f64::min);
            (f, clear)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0;
    // continue from the far end back to z
    let mut w = q.far_sqrt(far);
    let mut p = far;
    while (p - z).norm() > 0.0 {
        let rem = (z - p).norm();
        let h = (0.1 * q.crit_dist(p)).max(1e-6).min(rem);
        let np = if h >= rem { z } else { p + (z - p) / rem * h };
        w = continued_sqrt(q, np, p, w);
        p = np;
    }
    let mut flips = 0usize;
    for cut in cuts {
        for s in cut.windows(2) {
            if segments_cross(z, far, s[0], s[1]) {
                flips += 1;
            }
        }
    }
    Ok(if flips % 2 == 1 { -w } else { w })
}

/// U(z) = Re 2 int_e^z Q^{1/2} with cuts on `cuts` (the support) and e one of `anchors`.
pub fn u_function(q: &QDiff, cuts: &[Vec<C64>], anchors: &[C64], z: C64) -> Result<f64, QdError> {
    let w = branch_at(q, cuts, z)?;
    // anchor whose segment keeps furthest from the other zeros
    let best = anchors
        .iter()
        .map(|&e| {
            let clear = q
                .zeros
                .iter()
                .filter(|r| **r != e)
                .map(|r| seg_point_dist(z, e, *r))
                .fold(f64::INFINITY, f64::min);
            (e, clear)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(QdError::Chain("no anchor".into()))?;
    Ok(2.0 * segment_from_zero(q, best.0, z, w).re)
}

fn seg_point_dist(a: C64, b: C64, p: C64) -> f64 {
    let ab = b - a;
    let l = ab.norm_sqr();
    if l == 0.0 {
        return (p - a).norm();
    }
    let s = (((p - a) * ab.conj()).re / l).clamp(0.0, 1.0);
    (a + ab * s - p).norm()
}

/// Integral of sqrt(Q) along a polyline whose first and last points may be zeros;
/// branch fixed by the value `w1` at points[1].
pub fn polyline_integral(q: &QDiff, pts: &[C64], w1: C64) -> C64 {
    let n = pts.len();
    assert!(n >= 2);
    let is_zero = |z: C64| q.crit_dist(z) == 0.0;
    let mut acc = C64::new(0.0, 0.0);
    let mut w = w1;
    // first chord
    if is_zero(pts[0]) {
        acc += from_zero_integral(q, pts[0], pts[1], w1);
    } else {
        let (v, _) = chord_integral(q, pts[1], pts[0], w1);
        acc -= v;
    }
    let last = if is_zero(pts[n - 1]) && n > 2 { n - 2 } else { n - 1 };
    for k in 1..last {
        let (v, wn) = chord_integral(q, pts[k], pts[k + 1], w);
        acc += v;
        w = wn;
    }
    if last == n - 2 {
        let wz = continued_sqrt(q, pts[n - 2], pts[n - 2], w);
        acc -= from_zero_integral(q, pts[n - 1], pts[n - 2], wz);
    }
    acc
}

/// Chain of arcs with integer coefficient vectors in the basis (alpha0, alpha1, alpha2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainArc {
    pub coeff: [i64; 3],
    pub points: Vec<C64>,
    pub kind: Kind,
    /// node labels: zero index or 100 + k for infinity along L_k
    pub from: usize,
    pub to: usize,
    pub support: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCurveChain {
    pub case: String,
    pub arcs: Vec<ChainArc>,
    /// max of U sampled along non-support arcs (should be <= 0)
    pub max_u_off_support: f64,
}

pub const INF_NODE: usize = 100;

/// Orthogonal direction index (k pi/3) of the ray L_k, k = 0, 1, 2.
pub fn ray_orth_direction(q: &QDiff, k: usize) -> usize {
    let ang = crate::cubicmodel::ContourWeights::ray_angle(k);
    q.bin_direction(Kind::Orthogonal, ang)
}

/// Flow-balance of a chain: net outflow at each infinity node L_k in the alpha basis,
/// and the largest imbalance at a finite node, all modulo (1,1,1).
pub fn chain_homology(chain: &SCurveChain) -> ([[i64; 3]; 3], i64) {
    let norm = |v: [i64; 3]| [v[0] - v[2], v[1] - v[2], 0];
    let mut inf = [[0i64; 3]; 3];
    let mut fin: std::collections::BTreeMap<usize, [i64; 3]> = Default::default();
    for a in &chain.arcs {
        for (node, s) in [(a.from, 1i64), (a.to, -1i64)] {
            let tgt = if (INF_NODE..INF_NODE + 3).contains(&node) { &mut inf[node - INF_NODE] } else { fin.entry(node).or_insert([0; 3]) };
            for k in 0..3 {
                tgt[k] += s * a.coeff[k];
            }
        }
    }
    let worst = fin.values().map(|v| norm(*v).iter().map(|x| x.abs()).max().unwrap()).max().unwrap_or(0);
    (inf.map(norm), worst)
}

/// Select the preferred S-curve chain from a critical graph: the unique tree of
/// support/short trajectories and orthogonal rays to L_0, L_1, L_2 carrying flow
/// alpha_k out of infinity along L_k, with all support arcs included.
pub fn chain_from_graph(q: &QDiff, g: &CriticalGraph, case: &str) -> Result<SCurveChain, QdError> {
    #[derive(Clone)]
    struct E {
        a: usize,
        b: usize,
        pts: Vec<C64>,
        kind: Kind,
        support: bool,
    }
    let mut edges: Vec<E> = vec![];
    for (k, s) in g.shorts.iter().enumerate() {
        edges.push(E { a: s.from, b: s.to, pts: g.arcs[s.arc].points.clone(), kind: Kind::Trajectory, support: g.support.contains(&k) });
    }
    let anchors: Vec<C64> = g.support_endpoints().iter().map(|&i| g.zeros[i]).collect();
    let cuts = g.support_polylines();
    let max_u = |pts: &[C64]| {
        let n = pts.len();
        let mut worst = f64::NEG_INFINITY;
        for k in (1..n.saturating_sub(1)).step_by((n / 12).max(1)) {
            if let Ok(u) = u_function(q, &cuts, &anchors, pts[k]) {
                worst = worst.max(u);
            }
        }
        worst
    };
    // rays into other directions serve as junctions inside a shaded end domain
    let dirs: Vec<usize> = (0..3).map(|k| ray_orth_direction(q, k)).collect();
    for (i, d, k) in g.orth_to_infinity() {
        let pts = &g.orth[k].points;
        if max_u(pts) > 1e-6 {
            continue;
        }
        let b = match dirs.iter().position(|&x| x == d) {
            Some(l) => INF_NODE + l,
            None => INF_NODE + 3 + d,
        };
        edges.push(E { a: i, b, pts: pts.clone(), kind: Kind::Orthogonal, support: false });
    }
    // orthogonal arcs between zeros, found once from each end
    for a in &g.orth {
        if let (Endpoint::Zero(i), Endpoint::Zero(j)) = (a.start, a.end) {
            if i == j || edges.iter().any(|e| e.kind == Kind::Orthogonal && e.a.min(e.b) == i.min(j) && e.a.max(e.b) == i.max(j)) {
                continue;
            }
            if max_u(&a.points) <= 1e-6 {
                edges.push(E { a: i, b: j, pts: a.points.clone(), kind: Kind::Orthogonal, support: false });
            }
        }
    }
    let m = edges.len();
    if m > 20 {
        return Err(QdError::Chain(format!("{m} candidate edges")));
    }
    let must: u32 = edges.iter().enumerate().filter(|(_, e)| e.support).map(|(k, _)| 1u32 << k).sum();
    let mut best: Option<u32> = None;
    for mask in 0u32..(1u32 << m) {
        if mask & must != must {
            continue;
        }
        if best.is_some_and(|b| b.count_ones() < mask.count_ones()) {
            continue;
        }
        let chosen: Vec<&E> = (0..m).filter(|k| mask >> k & 1 == 1).map(|k| &edges[k]).collect();
        // tree on the touched nodes containing all three infinity nodes, leaves only at infinity
        let mut touched: Vec<usize> = chosen.iter().flat_map(|e| [e.a, e.b]).collect();
        touched.sort();
        touched.dedup();
        if !(0..3).all(|k| touched.contains(&(INF_NODE + k))) || chosen.len() + 1 != touched.len() {
            continue;
        }
        let mut parent: std::collections::HashMap<usize, usize> = touched.iter().map(|&n| (n, n)).collect();
        fn find(p: &mut std::collections::HashMap<usize, usize>, x: usize) -> usize {
            let mut r = x;
            while p[&r] != r {
                r = p[&r];
            }
            p.insert(x, r);
            r
        }
        let mut ok = true;
        for e in &chosen {
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            if ra == rb {
                ok = false;
                break;
            }
            parent.insert(ra, rb);
        }
        if !ok {
            continue;
        }
        let leaf_ok = touched.iter().all(|&n| (INF_NODE..INF_NODE + 3).contains(&n) || chosen.iter().filter(|e| e.a == n || e.b == n).count() >= 2);
        if !leaf_ok {
            continue;
        }
        if best.is_none_or(|b| mask.count_ones() < b.count_ones()) {
            best = Some(mask);
        }
    }
    let mask = best.ok_or(QdError::Chain("no tree joins L_0, L_1, L_2 through the graph".into()))?;
    let chosen: Vec<E> = (0..m).filter(|k| mask >> k & 1 == 1).map(|k| edges[k].clone()).collect();
    // flow: send alpha_k from infinity node k to infinity node 2 along the tree path
    let mut arcs: Vec<ChainArc> = chosen
        .iter()
        .map(|e| ChainArc { coeff: [0; 3], points: e.pts.clone(), kind: e.kind, from: e.a, to: e.b, support: e.support })
        .collect();
    for k in 0..2 {
        let path = tree_path(&arcs, INF_NODE + k, INF_NODE + 2).ok_or(QdError::Chain("disconnected".into()))?;
        for (idx, forward) in path {
            arcs[idx].coeff[k] += if forward { 1 } else { -1 };
        }
    }
    // orient each arc so its coefficient reads as a flow from `from` to `to`, and
    // rays run from infinity inward
    for a in arcs.iter_mut() {
        if a.to >= INF_NODE {
            *a = ChainArc {
                coeff: a.coeff.map(|x| -x),
                points: a.points.iter().rev().cloned().collect(),
                from: a.to,
                to: a.from,
                ..a.clone()
            };
        }
    }
    // express coefficients with alpha_2 = -(alpha_0 + alpha_1) when that is shorter
    for a in arcs.iter_mut() {
        if a.coeff == [1, 1, 0] {
            a.coeff = [0, 0, -1];
        } else if a.coeff == [-1, -1, 0] {
            a.coeff = [0, 0, 1];
        }
    }
    let worst = arcs.iter().filter(|a| !a.support).map(|a| max_u(&a.points)).fold(f64::NEG_INFINITY, f64::max);
    Ok(SCurveChain { case: case.to_string(), arcs, max_u_off_support: worst })
}

fn tree_path(arcs: &[ChainArc], from: usize, to: usize) -> Option<Vec<(usize, bool)>> {
    // depth-first search on a small tree
    fn go(arcs: &[ChainArc], cur: usize, to: usize, seen: &mut Vec<usize>, acc: &mut Vec<(usize, bool)>) -> bool {
        if cur == to {
            return true;
        }
        for (k, a) in arcs.iter().enumerate() {
            if seen.contains(&k) {
                continue;
            }
            let next = if a.from == cur {
                Some((a.to, true))
            } else if a.to == cur {
                Some((a.from, false))
            } else {
                None
            };
            if let Some((n, fwd)) = next {
                seen.push(k);
                acc.push((k, fwd));
                if go(arcs, n, to, seen, acc) {
                    return true;
                }
                acc.pop();
            }
        }
        false
    }
    let mut acc = vec![];
    go(arcs, from, to, &mut vec![], &mut acc).then_some(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub mass: f64,
    /// largest |Re(w dz)| / |w dz| over support chords (0 for a real measure)
    pub max_imag_density: f64,
    /// smallest signed density over support samples, relative to its maximum
    pub min_density: f64,
    /// largest |U| over support samples
    pub u_flatness: f64,
    /// largest |dU/dn+ - dU/dn-| over support samples
    pub s_property: f64,
    pub samples: usize,
}

impl EquilibriumReport {
    pub fn passes(&self, mass_tol: f64, s_tol: f64) -> bool {
        (self.mass - 1.0).abs() <= mass_tol && self.min_density >= -1e-9 && self.s_property <= s_tol
    }
}

/// Mass, positivity, flatness of U and the S-property on the support of a graph.
pub fn equilibrium_check(q: &QDiff, g: &CriticalGraph) -> Result<EquilibriumReport, QdError> {
    let cuts = g.support_polylines();
    let anchors: Vec<C64> = g.support_endpoints().iter().map(|&i| g.zeros[i]).collect();
    let mut mass = 0.0;
    let mut max_imag: f64 = 0.0;
    let mut min_dens = f64::INFINITY;
    let mut flat: f64 = 0.0;
    let mut s_prop: f64 = 0.0;
    let mut samples = 0;
    let h = 1e-5;
    for pts in &cuts {
        let w1 = q.eval(pts[1]).sqrt();
        let total = polyline_integral(q, pts, w1);
        mass += total.norm() / PI;
        // density along the arc with the orientation making the total positive
        let orient = if (total / I).re >= 0.0 { 1.0 } else { -1.0 };
        let mut w = w1;
        let mut dmax: f64 = 0.0;
        let mut dmin = f64::INFINITY;
        let n = pts.len();
        for k in 1..n - 2 {
            let (v, wn) = chord_integral(q, pts[k], pts[k + 1], w);
            w = wn;
            let dens = orient * (v / I).re;
            max_imag = max_imag.max(v.re.abs() / v.norm().max(1e-300));
            dmax = dmax.max(dens.abs());
            dmin = dmin.min(dens);
        }
        if dmax > 0.0 {
            min_dens = min_dens.min(dmin / dmax);
        }
        for k in (n / 10..n - n / 10).step_by((n / 8).max(1)) {
            if k == 0 || k + 1 >= n {
                continue;
            }
            let p = project_to_level(q, pts, k, &anchors);
            let t = pts[k + 1] - pts[k - 1];
            let nrm = I * t / t.norm();
            let u = |z: C64| u_function(q, &cuts, &anchors, z);
            let u0 = u(p)?;
            let dp = (-3.0 * u0 + 4.0 * u(p + nrm * h)? - u(p + nrm * (2.0 * h))?) / (2.0 * h);
            let dm = (-3.0 * u0 + 4.0 * u(p - nrm * h)? - u(p - nrm * (2.0 * h))?) / (2.0 * h);
            flat = flat.max(u0.abs());
            s_prop = s_prop.max((dp - dm).abs());
            samples += 1;
        }
    }
    Ok(EquilibriumReport { mass, max_imag_density: max_imag, min_density: min_dens, u_flatness: flat, s_property: s_prop, samples })
}

/// Move pts[k] along the normal onto Re int_e^z sqrt(Q) = 0 (e an anchor zero).
fn project_to_level(q: &QDiff, pts: &[C64], k: usize, anchors: &[C64]) -> C64 {
    let mut p = pts[k];
    let t = pts[k + 1] - pts[k - 1];
    let n = I * t / t.norm();
    let e = *anchors.iter().min_by(|a, b| (*a - p).norm().total_cmp(&(*b - p).norm())).unwrap();
    for _ in 0..4 {
        let w = q.eval(p).sqrt();
        let f = segment_from_zero(q, e, p, w).re;
        let rate = (w * n).re;
        if rate.abs() < 1e-14 {
            break;
        }
        let d = f / rate;
        if d.abs() > 1e-3 {
            break;
        }
        p -= n * d;
        if d.abs() < 1e-15 {
            break;
        }
    }
    p
}

/// Largest |Re int_{z_i}^{z_j} sqrt(Q)| over straight segments between zeros.
pub fn max_pair_period(q: &QDiff) -> f64 {
    let cs = q.criticals();
    let mut worst: f64 = 0.0;
    for i in 0..cs.len() {
        for j in i + 1..cs.len() {
            let z = cs[j].z;
            let w = q.eval(z + (cs[i].z - z) * 1e-9).sqrt();
            let v = segment_from_zero(q, cs[i].z, z, w);
            worst = worst.max(v.re.abs());
        }
    }
    worst
}

/// Stable order for zeros: lexicographic.
pub fn sorted_zeros(mut z: Vec<C64>) -> Vec<C64> {
    z.sort_by(lex_cmp);
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::c;

    fn trefoil_q() -> QDiff {
        let r = 4f64.cbrt();
        QDiff::polynomial(c(0.25, 0.0), vec![c(0.0, 0.0), c(-r, 0.0), -r * crate::num::eta(), -r * crate::num::eta().conj()])
    }

    #[test]
    fn airy_model_launch_angles() {
        let q = QDiff::polynomial(c(1.0, 0.0), vec![c(0.0, 0.0)]);
        let a = launch_from_zero(&q, 0, Kind::Trajectory).unwrap();
        for (j, x) in a.iter().enumerate() {
            assert!((x - (PI / 3.0 + 2.0 * PI * j as f64 / 3.0)).abs() < 1e-15);
        }
        // -z dz^2 > 0 along each launch direction
        for x in a {
            let v = C64::from_polar(1.0, x);
            assert!((-v * v * v - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_covariance_of_launch() {
        let zs = vec![c(0.3, 0.1), c(-1.0, 0.5), c(0.2, -0.7)];
        let q = QDiff::polynomial(c(1.0, 0.0), zs.clone());
        let rot = C64::from_polar(1.0, 0.4);
        // with lead rot^-5 the differential is invariant under z -> rot z
        let qr = QDiff::polynomial(rot.powi(-5), zs.iter().map(|z| z * rot).collect());
        let a = launch_from_zero(&q, 0, Kind::Trajectory).unwrap();
        let b = launch_from_zero(&qr, 0, Kind::Trajectory).unwrap();
        for x in &a {
            let hit = b.iter().any(|y| (C64::from_polar(1.0, x + 0.4) - C64::from_polar(1.0, *y)).norm() < 1e-12);
            assert!(hit, "{x} {b:?}");
        }
    }

    #[test]
    fn near_double_zero_signal() {
        let q = QDiff::polynomial(c(1.0, 0.0), vec![c(0.5, 0.0), c(0.5 + 1e-12, 0.0), c(-1.0, 0.0), c(0.0, 1.0)]);
        assert!(matches!(launch_from_zero(&q, 0, Kind::Trajectory), Err(QdError::NearDoubleZero(_))));
    }

    #[test]
    fn trefoil_short_trajectories() {
        let q = trefoil_q();
        let o = TraceOptions::default();
        let dirs = launch_from_zero(&q, 0, Kind::Trajectory).unwrap();
        for a in dirs {
            let arc = trace_from_zero(&q, 0, a, Kind::Trajectory, &o);
            assert!(matches!(arc.end, Endpoint::Zero(j) if j != 0));
            assert!(phase_defect(&q, &arc) < 1e-3);
            let end = *arc.points.last().unwrap();
            assert!((end.powi(3) + 4.0).norm() < 1e-9);
        }
    }

    #[test]
    fn duality_of_kinds() {
        let q = trefoil_q();
        let o = TraceOptions::default();
        let a = trace(&q, c(0.4, 0.9), c(1.0, 0.0), Kind::Trajectory, &o);
        let b = trace(&q.negated(), c(0.4, 0.9), c(1.0, 0.0), Kind::Orthogonal, &o);
        assert_eq!(a.points.len(), b.points.len());
        for (x, y) in a.points.iter().zip(&b.points) {
            assert!((x - y).norm() < 1e-6);
        }
    }

    #[test]
    fn trefoil_graph_and_measure() {
        let q = trefoil_q();
        let g = critical_graph(&q, &TraceOptions::default(), Exec::default()).unwrap();
        assert!(g.admissible, "{:?}", g.diagnostics);
        assert_eq!(g.shorts.len(), 3);
        assert_eq!(g.support.len(), 3);
        let centre = g.zeros.iter().position(|z| z.norm() < 1e-12).unwrap();
        assert!(g.adjacency[centre].is_empty());
        for (i, a) in g.adjacency.iter().enumerate() {
            if i != centre {
                assert_eq!(a.len(), 2);
            }
        }
        let r = equilibrium_check(&q, &g).unwrap();
        assert!((r.mass - 1.0).abs() < 1e-6, "{r:?}");
        assert!(r.s_property < 1e-5 && r.min_density >= -1e-9, "{r:?}");
        let ch = chain_from_graph(&q, &g, "trefoil").unwrap();
        assert_eq!(ch.arcs.len(), 6);
        assert!(ch.max_u_off_support <= 1e-6, "{}", ch.max_u_off_support);
        let (inf, worst) = chain_homology(&ch);
        assert_eq!(worst, 0);
        assert_eq!(inf, [[1, 0, 0], [0, 1, 0], [-1, -1, 0]]);
    }

    #[test]
    fn u_signs_around_trefoil() {
        let q = trefoil_q();
        let g = critical_graph(&q, &TraceOptions::default(), Exec::Sequential).unwrap();
        let cuts = g.support_polylines();
        let anchors = g.zeros.clone();
        // positive on both sides of the support arc along the negative axis
        let s = -0.8;
        assert!(u_function(&q, &cuts, &anchors, c(s, 0.05)).unwrap() > 0.0);
        assert!(u_function(&q, &cuts, &anchors, c(s, -0.05)).unwrap() > 0.0);
        // negative on the chain tail towards e^{i pi} infinity
        assert!(u_function(&q, &cuts, &anchors, c(-3.0, 0.0)).unwrap() < 0.0);
        // path independence: same value from two anchors
        let z = c(0.7, 1.3);
        let a = u_function(&q, &cuts, &anchors[..1], z).unwrap();
        let b = u_function(&q, &cuts, &anchors[1..2], z).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} {b}");
    }

    #[test]
    fn non_boutroux_fixture_has_strip() {
        let q = QDiff::polynomial(c(0.25, 0.0), vec![c(0.0, 0.0), c(-1.5, 0.1), c(1.0, 1.4), c(0.8, -1.2)]);
        assert!(max_pair_period(&q) > 1e-3);
        let g = critical_graph(&q, &TraceOptions::default(), Exec::Sequential).unwrap();
        assert!(!g.admissible);
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn arcs_keep_their_phase(tr in -3.0f64..3.0, ti in -3.0f64..3.0, kr in -1.0f64..1.0, ki in -1.0f64..1.0) {
            let q = crate::phase::QuarticQ::new(c(tr, ti), c(kr, ki)).qdiff();
            prop_assume!(q.criticals().len() == 4);
            for kind in [Kind::Trajectory, Kind::Orthogonal] {
                for arc in trace_all(&q, kind, &TraceOptions::default(), Exec::Sequential).unwrap() {
                    prop_assert!(phase_defect(&q, &arc) <= 1e-3);
                }
            }
        }
    }
}
