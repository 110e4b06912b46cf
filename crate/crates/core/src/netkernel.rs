//! Core linear algebra for ideal TEM transmission-line networks.
//!
//! Lines are non-dispersive: a section specified with electrical length
//! `theta0` at the design frequency `f0` has length `theta0 * f / f0` at
//! frequency `f`. Loss is a single scalar knob, dB per 360 degrees of
//! electrical length, default zero.
//!
//! Networks are assembled by sub-network growth on S-matrices at a fixed
//! real reference impedance. This avoids the cot/csc poles that plague
//! nodal-admittance assembly at half-wave resonances, which the comparator
//! is full of.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::netlist::{ComponentKind, NetworkGraph, StubTermination};

/// Decibel-to-neper scale: 20/ln(10).
const DB_PER_NEPER: f64 = 8.685889638065035;

/// Denominator magnitude below which a conversion or junction is treated
/// as singular.
pub const SINGULAR_TOL: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("stub admittance has a pole at frequency index {freq_index} (theta = {theta_deg:.3} deg)")]
    PoleAtFrequency { freq_index: usize, theta_deg: f64 },
    #[error("ABCD to S conversion denominator below {SINGULAR_TOL} (degenerate network)")]
    DegenerateNetwork,
    #[error("frequency grids or reference impedances differ")]
    GridMismatch,
    #[error("port index {port} out of range for a {ports}-port network")]
    PortOutOfRange { port: usize, ports: usize },
    #[error("interconnection is singular at frequency index {freq_index} ({freq_hz:.6e} Hz)")]
    SingularJunction { freq_index: usize, freq_hz: f64 },
    #[error("joined port {port} referenced more than once")]
    DuplicateJoin { port: usize },
    #[error("interconnection leaves no external port")]
    NoExternalPorts,
}

/// One ideal TEM line section: characteristic impedance, electrical length
/// at the design frequency, and a per-wavelength attenuation knob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TLineSection {
    /// Characteristic impedance in ohms.
    pub z_char: f64,
    /// Electrical length in degrees at the design frequency.
    pub theta0_deg: f64,
    /// Attenuation in dB per 360 degrees of electrical length.
    pub loss_db: f64,
}

impl TLineSection {
    pub fn new(z_char: f64, theta0_deg: f64) -> Self {
        Self { z_char, theta0_deg, loss_db: 0.0 }
    }

    pub fn with_loss(z_char: f64, theta0_deg: f64, loss_db: f64) -> Self {
        Self { z_char, theta0_deg, loss_db }
    }

    /// Complex propagation argument `alpha + j*theta` at frequency `f`.
    pub fn gamma(&self, f: f64, f0: f64) -> Complex64 {
        let theta = self.theta0_deg.to_radians() * f / f0;
        let alpha = self.loss_db * (theta / std::f64::consts::TAU) / DB_PER_NEPER;
        Complex64::new(alpha, theta)
    }
}

/// Two-port chain matrix. `b` is in ohms, `c` in siemens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbcdMatrix {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl AbcdMatrix {
    pub fn identity() -> Self {
        Self {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        }
    }

    /// Shunt admittance `Y` as a two-port: [[1, 0], [Y, 1]].
    pub fn shunt(y: Complex64) -> Self {
        Self {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: y,
            d: Complex64::new(1.0, 0.0),
        }
    }

    /// Series impedance `Z` as a two-port: [[1, Z], [0, 1]].
    pub fn series(z: Complex64) -> Self {
        Self {
            a: Complex64::new(1.0, 0.0),
            b: z,
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        }
    }

    pub fn determinant(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// Negated matrix; equivalent to cascading with an ideal phase inverter.
    pub fn negated(&self) -> Self {
        Self { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
    }
}

/// Chain matrix of a transmission-line section at frequency `f`.
///
/// Lossless sections give [[cos t, jZ sin t], [j sin t / Z, cos t]] with
/// t = theta0 * f / f0; `loss_db > 0` replaces jt by (alpha + jt).
pub fn tline_abcd(section: &TLineSection, f: f64, f0: f64) -> AbcdMatrix {
    let g = section.gamma(f, f0);
    let ch = g.cosh();
    let sh = g.sinh();
    let z = Complex64::new(section.z_char, 0.0);
    AbcdMatrix { a: ch, b: z * sh, c: sh / z, d: ch }
}

/// Stub termination at the far end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Open,
    Short,
}

/// Input admittance of a stub; `Y = j tan(t)/Z` open, `-j cot(t)/Z` short
/// in the lossless case, the tanh/coth generalization with loss.
pub fn stub_admittance(section: &TLineSection, term: Termination, f: f64, f0: f64) -> Complex64 {
    let g = section.gamma(f, f0);
    // Complex tanh degenerates to 0/0 at quarter-wave resonance when the
    // line is lossless; the real tangent stays representable there.
    let t = if g.re == 0.0 {
        Complex64::new(0.0, g.im.tan())
    } else {
        g.tanh()
    };
    let z = Complex64::new(section.z_char, 0.0);
    match term {
        Termination::Open => t / z,
        Termination::Short => 1.0 / (t * z),
    }
}

/// Shunt-stub chain matrix [[1, 0], [Y, 1]].
///
/// Errors with `PoleAtFrequency` when the requested electrical length sits
/// on a tan/cot singularity; the caller is expected to offset the sample.
pub fn shunt_stub_abcd(
    stub: &TLineSection,
    term: Termination,
    f: f64,
    f0: f64,
) -> Result<AbcdMatrix, NetError> {
    let theta_deg = stub.theta0_deg * f / f0;
    let theta = theta_deg.to_radians();
    let near_pole = match term {
        Termination::Open => theta.cos().abs() < 1e-9,
        Termination::Short => theta.sin().abs() < 1e-9,
    };
    if stub.loss_db == 0.0 && near_pole {
        return Err(NetError::PoleAtFrequency { freq_index: 0, theta_deg });
    }
    Ok(AbcdMatrix::shunt(stub_admittance(stub, term, f, f0)))
}

/// Matrix product `left * right` (left network seen first from port 1).
pub fn cascade(left: &AbcdMatrix, right: &AbcdMatrix) -> AbcdMatrix {
    AbcdMatrix {
        a: left.a * right.a + left.b * right.c,
        b: left.a * right.b + left.b * right.d,
        c: left.c * right.a + left.d * right.c,
        d: left.c * right.b + left.d * right.d,
    }
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    /// Largest |S_ij - S_ji| over all entries.
    pub fn reciprocity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).norm());
            }
        }
        worst
    }

    /// Largest deviation of conj(S)^T S from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..self.n {
                    acc += self.get(k, i).conj() * self.get(k, j);
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).norm());
            }
        }
        worst
    }
}

/// Convert a two-port ABCD matrix to its S-matrix at a real reference
/// impedance.
pub fn abcd_to_s(m: &AbcdMatrix, z_ref: f64) -> Result<CMat, NetError> {
    let b_over = m.b / z_ref;
    let c_z = m.c * z_ref;
    let den = m.a + b_over + c_z + m.d;
    if den.norm() < SINGULAR_TOL {
        return Err(NetError::DegenerateNetwork);
    }
    let det = m.determinant();
    let mut s = CMat::zeros(2);
    s.set(0, 0, (m.a + b_over - c_z - m.d) / den);
    s.set(0, 1, 2.0 * det / den);
    s.set(1, 0, Complex64::new(2.0, 0.0) / den);
    s.set(1, 1, (-m.a + b_over - c_z + m.d) / den);
    Ok(s)
}

/// Uniformly spaced frequency grid around a design frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub f0: f64,
    pub f_start: f64,
    pub f_stop: f64,
    pub n_points: usize,
}

impl FrequencyGrid {
    pub fn new(f0: f64, f_start: f64, f_stop: f64, n_points: usize) -> Self {
        assert!(f_start < f_stop, "f_start must be below f_stop");
        assert!(n_points >= 2, "a grid needs at least two points");
        Self { f0, f_start, f_stop, n_points }
    }

    /// Single-frequency "grid" used for spot evaluations.
    pub fn spot(f0: f64, f: f64) -> Self {
        Self { f0, f_start: f, f_stop: f, n_points: 1 }
    }

    pub fn freqs(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.f_start];
        }
        let step = (self.f_stop - self.f_start) / (self.n_points - 1) as f64;
        (0..self.n_points).map(|i| self.f_start + step * i as f64).collect()
    }
}

/// N-port S-parameters sampled over a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSParams {
    pub ports: usize,
    pub z_ref: f64,
    pub freqs: Vec<f64>,
    pub matrices: Vec<CMat>,
}

impl SweepSParams {
    /// Index of the grid point equal to `f` (relative tolerance 1e-9).
    pub fn freq_index(&self, f: f64) -> Option<usize> {
        self.freqs
            .iter()
            .position(|&g| (g - f).abs() <= 1e-9 * f.abs().max(1.0))
    }
}

/// Join two sweeps by connecting the listed `(port_of_a, port_of_b)` pairs.
///
/// Remaining external ports keep a deterministic order: the unjoined ports
/// of `a` in ascending index order, then the unjoined ports of `b`.
pub fn connect(
    a: &SweepSParams,
    b: &SweepSParams,
    joins: &[(usize, usize)],
) -> Result<SweepSParams, NetError> {
    if a.z_ref != b.z_ref || a.freqs != b.freqs {
        return Err(NetError::GridMismatch);
    }
    let mut seen_a = vec![false; a.ports];
    let mut seen_b = vec![false; b.ports];
    for &(pa, pb) in joins {
        if pa >= a.ports {
            return Err(NetError::PortOutOfRange { port: pa, ports: a.ports });
        }
        if pb >= b.ports {
            return Err(NetError::PortOutOfRange { port: pb, ports: b.ports });
        }
        if std::mem::replace(&mut seen_a[pa], true) {
            return Err(NetError::DuplicateJoin { port: pa });
        }
        if std::mem::replace(&mut seen_b[pb], true) {
            return Err(NetError::DuplicateJoin { port: pb });
        }
    }
    if a.ports + b.ports == 2 * joins.len() {
        return Err(NetError::NoExternalPorts);
    }

    let n = a.ports + b.ports;
    let mut matrices = Vec::with_capacity(a.freqs.len());
    for (fi, (ma, mb)) in a.matrices.iter().zip(&b.matrices).enumerate() {
        // Block-diagonal stack, then eliminate each joined pair in turn.
        let mut s = CMat::zeros(n);
        for i in 0..a.ports {
            for j in 0..a.ports {
                s.set(i, j, ma.get(i, j));
            }
        }
        for i in 0..b.ports {
            for j in 0..b.ports {
                s.set(a.ports + i, a.ports + j, mb.get(i, j));
            }
        }
        // Live port -> current index; joined pairs in stacked numbering.
        let mut pairs: Vec<(usize, usize)> =
            joins.iter().map(|&(pa, pb)| (pa, a.ports + pb)).collect();
        let mut live: Vec<usize> = (0..n).collect();
        for k in 0..pairs.len() {
            let (gp, gq) = pairs[k];
            let p = live.iter().position(|&x| x == gp).expect("join port vanished");
            let q = live.iter().position(|&x| x == gq).expect("join port vanished");
            s = innerconnect_once(&s, p, q).map_err(|e| match e {
                NetError::SingularJunction { .. } => NetError::SingularJunction {
                    freq_index: fi,
                    freq_hz: a.freqs[fi],
                },
                other => other,
            })?;
            live.remove(live.iter().position(|&x| x == gp).unwrap());
            live.remove(live.iter().position(|&x| x == gq).unwrap());
            let _ = &mut pairs;
        }
        matrices.push(s);
    }
    Ok(SweepSParams {
        ports: n - 2 * joins.len(),
        z_ref: a.z_ref,
        freqs: a.freqs.clone(),
        matrices,
    })
}

/// Connect two ports of the same network, removing both from the port list.
/// Remaining ports keep their relative order.
pub fn innerconnect(s: &SweepSParams, p: usize, q: usize) -> Result<SweepSParams, NetError> {
    if p >= s.ports {
        return Err(NetError::PortOutOfRange { port: p, ports: s.ports });
    }
    if q >= s.ports {
        return Err(NetError::PortOutOfRange { port: q, ports: s.ports });
    }
    if p == q {
        return Err(NetError::DuplicateJoin { port: p });
    }
    if s.ports == 2 {
        return Err(NetError::NoExternalPorts);
    }
    let mut matrices = Vec::with_capacity(s.freqs.len());
    for (fi, m) in s.matrices.iter().enumerate() {
        matrices.push(innerconnect_once(m, p, q).map_err(|e| match e {
            NetError::SingularJunction { .. } => NetError::SingularJunction {
                freq_index: fi,
                freq_hz: s.freqs[fi],
            },
            other => other,
        })?);
    }
    Ok(SweepSParams {
        ports: s.ports - 2,
        z_ref: s.z_ref,
        freqs: s.freqs.clone(),
        matrices,
    })
}

/// Single-frequency self-connection of ports `p` and `q`.
fn innerconnect_once(s: &CMat, p: usize, q: usize) -> Result<CMat, NetError> {
    let n = s.n;
    let one = Complex64::new(1.0, 0.0);
    let den = (one - s.get(p, q)) * (one - s.get(q, p)) - s.get(p, p) * s.get(q, q);
    if den.norm() < SINGULAR_TOL {
        return Err(NetError::SingularJunction { freq_index: 0, freq_hz: 0.0 });
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != p && i != q).collect();
    let mut out = CMat::zeros(keep.len());
    for (oi, &i) in keep.iter().enumerate() {
        for (oj, &j) in keep.iter().enumerate() {
            let num = s.get(p, j) * s.get(i, q) * (one - s.get(q, p))
                + s.get(q, j) * s.get(i, p) * (one - s.get(p, q))
                + s.get(p, j) * s.get(q, q) * s.get(i, p)
                + s.get(q, j) * s.get(p, p) * s.get(i, q);
            out.set(oi, oj, s.get(i, j) + num / den);
        }
    }
    Ok(out)
}

/// Ideal lossless parallel junction of `m` identical ports at the reference
/// impedance: S = (2/m) J - I.
fn junction_s(m: usize) -> CMat {
    let mut s = CMat::zeros(m);
    let off = 2.0 / m as f64;
    for i in 0..m {
        for j in 0..m {
            let v = if i == j { off - 1.0 } else { off };
            s.set(i, j, Complex64::new(v, 0.0));
        }
    }
    s
}

/// One evaluable block of the assembly plan: either a graph component or a
/// node junction.
enum Block {
    Line(TLineSection),
    Stub(TLineSection, Termination),
    Junction(usize),
}

impl Block {
    fn ports(&self) -> usize {
        match self {
            Block::Line(_) => 2,
            Block::Stub(..) => 1,
            Block::Junction(m) => *m,
        }
    }

    fn eval(&self, f: f64, f0: f64, z_ref: f64) -> Result<CMat, NetError> {
        match self {
            Block::Line(sec) => abcd_to_s(&tline_abcd(sec, f, f0), z_ref),
            Block::Stub(sec, term) => {
                // One-port reflection written as (1 - Z0 Y)/(1 + Z0 Y); stays
                // finite through tan/cot poles, where it tends to -1.
                let y = stub_admittance(sec, *term, f, f0);
                let mut s = CMat::zeros(1);
                s.set(0, 0, (1.0 - z_ref * y) / (1.0 + z_ref * y));
                Ok(s)
            }
            Block::Junction(m) => Ok(junction_s(*m)),
        }
    }
}

/// Precomputed interconnection plan for a validated graph.
struct AssemblyPlan {
    blocks: Vec<Block>,
    /// Pairs of (block, local port) to join.
    joins: Vec<((usize, usize), (usize, usize))>,
    /// External ports as (block, local port), in graph port order.
    externals: Vec<(usize, usize)>,
}

fn build_plan(graph: &NetworkGraph) -> AssemblyPlan {
    let mut blocks = Vec::new();
    let mut joins = Vec::new();

    // Attachment lists per node, in component order then port order.
    let mut node_attach: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graph.nodes.len()];
    for comp in &graph.components {
        match &comp.kind {
            ComponentKind::Line(sec) => {
                let b = blocks.len();
                blocks.push(Block::Line(*sec));
                node_attach[comp.node_from].push((b, 0));
                node_attach[comp.node_to.expect("line has two nodes")].push((b, 1));
            }
            ComponentKind::Stub(sec, term) => {
                let b = blocks.len();
                let t = match term {
                    StubTermination::Open => Termination::Open,
                    StubTermination::Short => Termination::Short,
                };
                blocks.push(Block::Stub(*sec, t));
                node_attach[comp.node_from].push((b, 0));
            }
        }
    }

    let mut externals = vec![(usize::MAX, usize::MAX); graph.external_ports.len()];
    for (node, attach) in node_attach.iter().enumerate() {
        let ext: Vec<usize> = graph
            .external_ports
            .iter()
            .enumerate()
            .filter(|(_, p)| p.node == node)
            .map(|(i, _)| i)
            .collect();
        let m = attach.len() + ext.len();
        if m == 0 {
            continue;
        }
        let jb = blocks.len();
        blocks.push(Block::Junction(m));
        for (slot, &(eb, ep)) in attach.iter().enumerate() {
            joins.push(((jb, slot), (eb, ep)));
        }
        for (k, &pi) in ext.iter().enumerate() {
            externals[pi] = (jb, attach.len() + k);
        }
    }
    AssemblyPlan { blocks, joins, externals }
}

/// Evaluate the plan at one frequency. Returns the S-matrix with ports in
/// graph port order.
fn eval_plan(plan: &AssemblyPlan, f: f64, f0: f64, z_ref: f64) -> Result<CMat, NetError> {
    // Net id per block (union-find by rewriting), each net holds its matrix
    // and the surviving (block, local port) list in order.
    let mut net_of: Vec<usize> = (0..plan.blocks.len()).collect();
    let mut nets: Vec<Option<(CMat, Vec<(usize, usize)>)>> = Vec::with_capacity(plan.blocks.len());
    for (i, b) in plan.blocks.iter().enumerate() {
        let m = b.eval(f, f0, z_ref)?;
        let ports = (0..b.ports()).map(|p| (i, p)).collect();
        nets.push(Some((m, ports)));
    }

    for &(pa, pb) in &plan.joins {
        let na = net_of[pa.0];
        let nb = net_of[pb.0];
        if na != nb {
            let (ma, la) = nets[na].take().expect("net consumed");
            let (mb, lb) = nets[nb].take().expect("net consumed");
            let ia = la.iter().position(|&x| x == pa).expect("port consumed");
            let ib = lb.iter().position(|&x| x == pb).expect("port consumed");
            // Stack then self-connect the single pair.
            let n = ma.n + mb.n;
            let mut s = CMat::zeros(n);
            for i in 0..ma.n {
                for j in 0..ma.n {
                    s.set(i, j, ma.get(i, j));
                }
            }
            for i in 0..mb.n {
                for j in 0..mb.n {
                    s.set(ma.n + i, ma.n + j, mb.get(i, j));
                }
            }
            let s = innerconnect_once(&s, ia, ma.n + ib)?;
            let mut ports: Vec<(usize, usize)> = Vec::with_capacity(n - 2);
            ports.extend(la.iter().filter(|&&x| x != pa));
            ports.extend(lb.iter().filter(|&&x| x != pb));
            let target = na.min(nb);
            nets[target] = Some((s, ports));
            for v in net_of.iter_mut() {
                if *v == na || *v == nb {
                    *v = target;
                }
            }
        } else {
            let (m, l) = nets[na].take().expect("net consumed");
            let ia = l.iter().position(|&x| x == pa).expect("port consumed");
            let ib = l.iter().position(|&x| x == pb).expect("port consumed");
            let s = innerconnect_once(&m, ia, ib)?;
            let ports = l.into_iter().filter(|&x| x != pa && x != pb).collect();
            nets[na] = Some((s, ports));
        }
    }

    // All externals must have landed in one net (validate guarantees a
    // connected graph); reorder to the graph port order.
    let net = net_of[plan.externals[0].0];
    let (m, l) = nets[net].take().expect("final net consumed");
    let mut out = CMat::zeros(plan.externals.len());
    let index_of = |want: (usize, usize)| {
        l.iter().position(|&x| x == want).expect("external port lost in assembly")
    };
    for (i, &pi) in plan.externals.iter().enumerate() {
        for (j, &pj) in plan.externals.iter().enumerate() {
            out.set(i, j, m.get(index_of(pi), index_of(pj)));
        }
    }
    Ok(out)
}

/// Full multiport frequency sweep of a validated network graph.
///
/// Frequency points are independent and evaluated in parallel; the result
/// is assembled in grid order and identical to sequential evaluation.
pub fn sweep(graph: &NetworkGraph, grid: &FrequencyGrid) -> Result<SweepSParams, NetError> {
    let plan = build_plan(graph);
    let freqs = grid.freqs();
    let matrices: Result<Vec<CMat>, NetError> = freqs
        .par_iter()
        .enumerate()
        .map(|(fi, &f)| {
            eval_plan(&plan, f, grid.f0, graph.z_ref).map_err(|e| match e {
                NetError::SingularJunction { .. } => {
                    NetError::SingularJunction { freq_index: fi, freq_hz: f }
                }
                NetError::PoleAtFrequency { theta_deg, .. } => {
                    NetError::PoleAtFrequency { freq_index: fi, theta_deg }
                }
                other => other,
            })
        })
        .collect();
    Ok(SweepSParams {
        ports: graph.external_ports.len(),
        z_ref: graph.z_ref,
        freqs,
        matrices: matrices?,
    })
}

/// Magnitude in dB, floored so an exact null stays representable.
pub fn db20(x: f64) -> f64 {
    20.0 * x.max(1e-30).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist;

    const Z1: f64 = 70.71067811865476; // sqrt(2) * 50

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_close(a: Complex64, b: Complex64, tol: f64) {
        assert!((a - b).norm() < tol, "{a} vs {b}");
    }

    #[test]
    fn quarter_wave_line_abcd() {
        let m = tline_abcd(&TLineSection::new(Z1, 90.0), 2e9, 2e9);
        assert_close(m.a, c(0.0, 0.0), 1e-12);
        assert_close(m.b, c(0.0, Z1), 1e-9);
        assert_close(m.c, c(0.0, 1.0 / Z1), 1e-12);
        assert_close(m.d, c(0.0, 0.0), 1e-12);
    }

    #[test]
    fn zero_length_line_is_identity() {
        let m = tline_abcd(&TLineSection::new(35.0, 0.0), 1e9, 2e9);
        assert_close(m.a, c(1.0, 0.0), 1e-15);
        assert_close(m.b, c(0.0, 0.0), 1e-15);
        assert_close(m.c, c(0.0, 0.0), 1e-15);
        assert_close(m.d, c(1.0, 0.0), 1e-15);
    }

    #[test]
    fn half_wave_line_is_negated_identity() {
        let m = tline_abcd(&TLineSection::new(120.0, 180.0), 2e9, 2e9);
        assert_close(m.a, c(-1.0, 0.0), 1e-12);
        assert_close(m.b, c(0.0, 0.0), 1e-9);
        assert_close(m.c, c(0.0, 0.0), 1e-12);
        assert_close(m.d, c(-1.0, 0.0), 1e-12);
    }

    #[test]
    fn lossless_reciprocal_determinant_is_one() {
        let m = tline_abcd(&TLineSection::new(63.0, 137.0), 1.7e9, 2e9);
        assert_close(m.determinant(), c(1.0, 0.0), 1e-12);
    }

    #[test]
    fn open_stub_admittance_45_deg() {
        let y = stub_admittance(&TLineSection::new(Z1, 45.0), Termination::Open, 2e9, 2e9);
        assert_close(y, c(0.0, 0.014142135623730951), 1e-12);
    }

    #[test]
    fn short_stub_admittance_45_deg() {
        let y = stub_admittance(&TLineSection::new(Z1, 45.0), Termination::Short, 2e9, 2e9);
        assert_close(y, c(0.0, -0.014142135623730951), 1e-12);
    }

    #[test]
    fn short_stub_near_zero_length_is_pole() {
        let err = shunt_stub_abcd(
            &TLineSection::new(50.0, 180.0),
            Termination::Short,
            2e9,
            2e9,
        )
        .unwrap_err();
        assert!(matches!(err, NetError::PoleAtFrequency { .. }));
    }

    #[test]
    fn open_stub_zero_length_is_identity() {
        let m = shunt_stub_abcd(&TLineSection::new(50.0, 90.0), Termination::Open, 1e3, 2e9)
            .unwrap();
        assert!(m.c.norm() < 1e-7);
    }

    #[test]
    fn cascade_identity() {
        let m = tline_abcd(&TLineSection::new(70.0, 60.0), 2e9, 2e9);
        let c1 = cascade(&AbcdMatrix::identity(), &m);
        assert_eq!(c1, m);
    }

    #[test]
    fn cascade_two_quarter_waves_gives_half_wave() {
        let q = tline_abcd(&TLineSection::new(50.0, 90.0), 2e9, 2e9);
        let h = cascade(&q, &q);
        assert_close(h.a, c(-1.0, 0.0), 1e-12);
        assert_close(h.b, c(0.0, 0.0), 1e-9);
        assert_close(h.d, c(-1.0, 0.0), 1e-12);
    }

    #[test]
    fn printed_triple_product_family() {
        // shunt(+j/Z1) . quarter-wave(Z1) . shunt(+j/Z1) collapses to
        // [[-1, jZ1], [0, -1]].
        let stub = AbcdMatrix::shunt(c(0.0, 1.0 / Z1));
        let line = tline_abcd(&TLineSection::new(Z1, 90.0), 2e9, 2e9);
        let m = cascade(&cascade(&stub, &line), &stub);
        assert_close(m.a, c(-1.0, 0.0), 1e-12);
        assert_close(m.b, c(0.0, Z1), 1e-9);
        assert_close(m.c, c(0.0, 0.0), 1e-12);
        assert_close(m.d, c(-1.0, 0.0), 1e-12);
    }

    #[test]
    fn thru_s_params() {
        let s = abcd_to_s(&AbcdMatrix::identity(), 50.0).unwrap();
        assert_close(s.get(0, 0), c(0.0, 0.0), 1e-15);
        assert_close(s.get(0, 1), c(1.0, 0.0), 1e-15);
        assert_close(s.get(1, 0), c(1.0, 0.0), 1e-15);
    }

    #[test]
    fn matched_quarter_wave_s() {
        let m = tline_abcd(&TLineSection::new(50.0, 90.0), 2e9, 2e9);
        let s = abcd_to_s(&m, 50.0).unwrap();
        assert!(s.get(0, 0).norm() < 1e-12);
        assert_close(s.get(1, 0), c(0.0, -1.0), 1e-12);
    }

    #[test]
    fn quarter_wave_transformer_s() {
        // Z = 100 ohm quarter-wave in a 50 ohm system transforms the far
        // load to 200 ohm: S11 = 0.6, S21 = -j0.8.
        let m = tline_abcd(&TLineSection::new(100.0, 90.0), 2e9, 2e9);
        let s = abcd_to_s(&m, 50.0).unwrap();
        assert_close(s.get(0, 0), c(0.6, 0.0), 1e-12);
        assert_close(s.get(1, 0), c(0.0, -0.8), 1e-12);
    }

    fn line_sweep(z: f64, theta: f64, grid: &FrequencyGrid) -> SweepSParams {
        let text = format!(
            "node n1\nnode n2\nport P1 n1\nport P2 n2\ntline t1 n1 n2 z={z} theta={theta}\n"
        );
        let graph = netlist::parse(&text).expect("valid netlist");
        sweep(&graph, grid).unwrap()
    }

    fn thru_sweep(grid: &FrequencyGrid) -> SweepSParams {
        let freqs = grid.freqs();
        let matrices = freqs
            .iter()
            .map(|_| {
                let mut m = CMat::zeros(2);
                m.set(0, 1, c(1.0, 0.0));
                m.set(1, 0, c(1.0, 0.0));
                m
            })
            .collect();
        SweepSParams { ports: 2, z_ref: 50.0, freqs, matrices }
    }

    #[test]
    fn sweep_single_line_phase_scales_with_frequency() {
        let grid = FrequencyGrid::new(2e9, 1e9, 3e9, 3);
        let s = line_sweep(50.0, 90.0, &grid);
        for (i, &f) in s.freqs.iter().enumerate() {
            let expected = -90.0f64.to_radians() * f / 2e9;
            let got = s.matrices[i].get(1, 0).arg();
            assert!((got - expected).abs() < 1e-12, "f = {f}");
        }
    }

    #[test]
    fn connect_two_thrus_is_thru() {
        let grid = FrequencyGrid::new(2e9, 1e9, 3e9, 5);
        let thru = thru_sweep(&grid);
        let joined = connect(&thru, &thru.clone(), &[(1, 0)]).unwrap();
        assert_eq!(joined.ports, 2);
        for m in &joined.matrices {
            assert_close(m.get(1, 0), c(1.0, 0.0), 1e-12);
            assert!(m.get(0, 0).norm() < 1e-12);
        }
    }

    #[test]
    fn connect_matches_abcd_cascade_oracle() {
        // Two matched quarter-wave lines joined port-to-port equal one
        // half-wave line computed by the independent ABCD route.
        let grid = FrequencyGrid::new(2e9, 1.2e9, 2.8e9, 21);
        let q = line_sweep(50.0, 90.0, &grid);
        let joined = connect(&q, &q.clone(), &[(1, 0)]).unwrap();
        for (i, &f) in grid.freqs().iter().enumerate() {
            let half = tline_abcd(&TLineSection::new(50.0, 180.0), f, 2e9);
            let oracle = abcd_to_s(&half, 50.0).unwrap();
            for r in 0..2 {
                for cidx in 0..2 {
                    assert_close(
                        joined.matrices[i].get(r, cidx),
                        oracle.get(r, cidx),
                        1e-12,
                    );
                }
            }
        }
    }

    #[test]
    fn connect_rejects_grid_mismatch() {
        let g1 = FrequencyGrid::new(2e9, 1e9, 3e9, 3);
        let g2 = FrequencyGrid::new(2e9, 1e9, 3e9, 5);
        let a = thru_sweep(&g1);
        let b = thru_sweep(&g2);
        assert!(matches!(connect(&a, &b, &[(1, 0)]), Err(NetError::GridMismatch)));
    }

    #[test]
    fn connect_rejects_bad_port() {
        let grid = FrequencyGrid::new(2e9, 1e9, 3e9, 3);
        let a = thru_sweep(&grid);
        let b = a.clone();
        assert!(matches!(
            connect(&a, &b, &[(7, 0)]),
            Err(NetError::PortOutOfRange { port: 7, .. })
        ));
    }

    #[test]
    fn sweep_is_reciprocal_and_lossless() {
        // A small asymmetric two-port: mismatched line plus an open stub.
        let text = "node n1\nnode n2\nnode n3\nport P1 n1\nport P2 n3\n\
                    tline t1 n1 n2 z=80 theta=70\n\
                    tline t2 n2 n3 z=50 theta=110\n\
                    stub s1 n2 z=60 theta=30 term=open\n";
        let graph = netlist::parse(text).unwrap();
        let s = sweep(&graph, &FrequencyGrid::new(2e9, 1e9, 3e9, 31)).unwrap();
        for m in &s.matrices {
            assert!(m.reciprocity_error() < 1e-9);
            assert!(m.unitarity_error() < 1e-9);
        }
    }

    #[test]
    fn reflection_column_consistency() {
        // Terminating nothing: the sweep's first column at a matched thru
        // equals the direct two-port result.
        let grid = FrequencyGrid::new(2e9, 1.5e9, 2.5e9, 3);
        let s = line_sweep(65.0, 45.0, &grid);
        for (i, &f) in grid.freqs().iter().enumerate() {
            let m = tline_abcd(&TLineSection::new(65.0, 45.0), f, 2e9);
            let oracle = abcd_to_s(&m, 50.0).unwrap();
            assert_close(s.matrices[i].get(0, 0), oracle.get(0, 0), 1e-12);
            assert_close(s.matrices[i].get(1, 0), oracle.get(1, 0), 1e-12);
        }
    }
}
