//! Parametric circuit generators, analytic mode-decomposition oracles, the
//! crossover design-condition solver, and S-parameter metric reports.
//!
//! Two independent computation routes exist for every generated circuit:
//! the netlist graph evaluated by the generic interconnection solver in
//! [`crate::netkernel`], and closed-form mode analysis (`evenodd_ratrace_s`,
//! `fourmode_crossover_s`). Tests hold them to 1e-9 of each other.
//!
//! Topology conventions:
//!
//! * The coupler ring is `Pa -90- Pb -90- Pc -90- Pd -270- Pa` (impedance
//!   sqrt(2) z0 everywhere). `Pa` is the difference input (outputs 180 deg
//!   apart), `Pc` the sum input (outputs in phase), `Pb`/`Pd` the outputs.
//! * The crossover is a square of four outer branch lines with ports at the
//!   corners, plus two crossed inner paths joining opposite corners. The two
//!   inner paths pass each other without contact; each is two identical
//!   sections in series. A matched quarter-wave access line feeds every
//!   port, which brings the through path to one full wavelength at the
//!   design frequency.
//! * The port-transformation coupler re-routes both the `Pb` and `Pc` feeds
//!   through one embedded crossover (one inner path each), with the access
//!   lines playing the role of the half-wave phase shifter whose impedance
//!   drops out at the design frequency. The resulting network is exactly
//!   mirror symmetric (Pa<->Pd, Pb<->Pc), which is what makes the even/odd
//!   bisection an exact oracle at every frequency.

use num_complex::Complex64;
use thiserror::Error;

use crate::netkernel::{
    abcd_to_s, cascade, db20, stub_admittance, tline_abcd, AbcdMatrix, CMat, NetError,
    SweepSParams, TLineSection, Termination, SINGULAR_TOL,
};
use crate::netlist::NetworkGraph;

#[derive(Debug, Error)]
pub enum ComponentsError {
    #[error("design-condition scan found no verified candidate")]
    NoSolutionFound,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Parameters of the port-transformation coupler. The ring sections are
/// fixed by the design: impedance sqrt(2) z0, 90 degrees each, with the
/// re-routed arc totalling 270 degrees; the phase-shifter halves are 90
/// degrees of impedance `z_eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplerParams {
    pub f0: f64,
    pub z0: f64,
    /// Phase-shifter impedance. Free parameter; the S-matrix at `f0` does
    /// not depend on it.
    pub z_eta: f64,
    /// Attenuation knob, dB per 360 degrees of line, applied to every
    /// section.
    pub loss_db: f64,
}

impl CouplerParams {
    pub fn new(f0: f64, z0: f64) -> Self {
        Self { f0, z0, z_eta: z0, loss_db: 0.0 }
    }

    pub fn ring_impedance(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.z0
    }
}

/// Crossover line parameters: outer branch lines `(z_x, theta_x)` and inner
/// crossed lines `(z_y, theta_y)`, angles in degrees at the design
/// frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverParams {
    pub z_x: f64,
    pub z_y: f64,
    pub theta_x_deg: f64,
    pub theta_y_deg: f64,
}

impl CrossoverParams {
    /// Reference design scaled to the system impedance (57 ohm outer and
    /// 50 ohm inner lines in a 50 ohm system, both angles 90 degrees).
    pub fn scaled_reference(z0: f64) -> Self {
        Self { z_x: 1.14 * z0, z_y: z0, theta_x_deg: 90.0, theta_y_deg: 90.0 }
    }
}

// ---------------------------------------------------------------------------
// Graph generators
// ---------------------------------------------------------------------------

/// Conventional 180-degree ring hybrid: six quarter-wave sections, ports
/// `Pa`..`Pd`, the 270-degree arc written as three sections.
pub fn gen_conventional_ratrace(f0: f64, z0: f64) -> NetworkGraph {
    assert!(f0 > 0.0 && z0 > 0.0);
    let z1 = std::f64::consts::SQRT_2 * z0;
    let mut g = NetworkGraph::new(z0);
    for n in ["pa", "pb", "pc", "pd", "r1", "r2"] {
        g.node(n);
    }
    g.add_port("Pa", "pa");
    g.add_port("Pb", "pb");
    g.add_port("Pc", "pc");
    g.add_port("Pd", "pd");
    g.add_line("s1", "pa", "pb", TLineSection::new(z1, 90.0));
    g.add_line("s2", "pb", "pc", TLineSection::new(z1, 90.0));
    g.add_line("s3", "pc", "pd", TLineSection::new(z1, 90.0));
    g.add_line("s4", "pd", "r1", TLineSection::new(z1, 90.0));
    g.add_line("s5", "r1", "r2", TLineSection::new(z1, 90.0));
    g.add_line("s6", "r2", "pa", TLineSection::new(z1, 90.0));
    g
}

/// Add the crossover body (no ports) to `g`. `attach` lists the four nodes
/// the access lines start from, in port order (x, y, x', y'). Node names
/// are prefixed to keep multi-instance graphs collision free.
fn add_crossover_body(
    g: &mut NetworkGraph,
    prefix: &str,
    p: &CrossoverParams,
    feed_z: f64,
    loss_db: f64,
    attach: [&str; 4],
) {
    let n = |s: &str| format!("{prefix}{s}");
    for s in ["cx", "cy", "cxp", "cyp", "m1", "m2"] {
        g.node(&n(s));
    }
    let feed = TLineSection::with_loss(feed_z, 90.0, loss_db);
    let outer = TLineSection::with_loss(p.z_x, p.theta_x_deg, loss_db);
    let inner = TLineSection::with_loss(p.z_y, p.theta_y_deg, loss_db);
    g.add_line(&n("f1"), attach[0], &n("cx"), feed);
    g.add_line(&n("f2"), attach[1], &n("cy"), feed);
    g.add_line(&n("f3"), attach[2], &n("cxp"), feed);
    g.add_line(&n("f4"), attach[3], &n("cyp"), feed);
    g.add_line(&n("o1"), &n("cx"), &n("cy"), outer);
    g.add_line(&n("o2"), &n("cy"), &n("cxp"), outer);
    g.add_line(&n("o3"), &n("cxp"), &n("cyp"), outer);
    g.add_line(&n("o4"), &n("cyp"), &n("cx"), outer);
    g.add_line(&n("i1"), &n("cx"), &n("m1"), inner);
    g.add_line(&n("i2"), &n("m1"), &n("cxp"), inner);
    g.add_line(&n("i3"), &n("cy"), &n("m2"), inner);
    g.add_line(&n("i4"), &n("m2"), &n("cyp"), inner);
}

/// Standalone crossover with matched quarter-wave access lines. Ports in
/// order `Px`, `Py`, `Pxp`, `Pyp`; the through pairs are (Px, Pxp) and
/// (Py, Pyp).
pub fn gen_crossover(p: &CrossoverParams, _f0: f64, z0: f64) -> NetworkGraph {
    let mut g = NetworkGraph::new(z0);
    for s in ["fx", "fy", "fxp", "fyp"] {
        g.node(s);
    }
    g.add_port("Px", "fx");
    g.add_port("Py", "fy");
    g.add_port("Pxp", "fxp");
    g.add_port("Pyp", "fyp");
    add_crossover_body(&mut g, "x_", p, z0, 0.0, ["fx", "fy", "fxp", "fyp"]);
    g
}

/// Matched delay-equalizer length on the `Pa` and `Pd` ports, degrees.
///
/// The crossover re-route adds one full turn plus a resonant excess to the
/// `Pb` and `Pc` group delays; a full-turn matched line on the other two
/// ports cancels the bulk of the difference without touching the f0
/// response (any multiple of 360 degrees is transparent there).
pub const DELAY_EQUALIZER_DEG: f64 = 360.0;

/// Add a full port-transformation coupler (no ports). Returns the node
/// names where the four ports (Pa, Pb, Pc, Pd) attach.
fn add_pt_coupler_body(
    g: &mut NetworkGraph,
    prefix: &str,
    p: &CouplerParams,
    xo: &CrossoverParams,
    eq_deg: f64,
) -> [String; 4] {
    let n = |s: &str| format!("{prefix}{s}");
    for s in ["pa", "pb", "pc", "pd", "nb", "n1"] {
        g.node(&n(s));
    }
    let z1 = p.ring_impedance();
    let ring = |theta: f64| TLineSection::with_loss(z1, theta, p.loss_db);
    g.add_line(&n("t1"), &n("pa"), &n("nb"), ring(90.0));
    g.add_line(&n("t2"), &n("nb"), &n("n1"), ring(90.0));
    g.add_line(&n("t3"), &n("n1"), &n("pd"), ring(90.0));
    g.add_line(&n("t4"), &n("pd"), &n("pa"), ring(270.0));
    let (a_node, d_node) = if eq_deg > 0.0 {
        let eq = TLineSection::with_loss(p.z0, eq_deg, p.loss_db);
        g.node(&n("ea"));
        g.node(&n("ed"));
        g.add_line(&n("q1"), &n("ea"), &n("pa"), eq);
        g.add_line(&n("q2"), &n("ed"), &n("pd"), eq);
        (n("ea"), n("ed"))
    } else {
        (n("pa"), n("pd"))
    };
    let pa_attach = n("nb");
    let py_attach = n("n1");
    let pxp_attach = n("pb");
    let pyp_attach = n("pc");
    add_crossover_body(
        g,
        &n(""),
        xo,
        p.z_eta,
        p.loss_db,
        [&pa_attach, &py_attach, &pxp_attach, &pyp_attach],
    );
    [a_node, n("pb"), n("pc"), d_node]
}

/// Port-transformation rat-race coupler with the reference crossover
/// embedded. Ports `Pa`..`Pd`; `Pa` and `Pc` are the two inputs, now on the
/// same side of the layout.
pub fn gen_pt_coupler(p: &CouplerParams) -> NetworkGraph {
    gen_pt_coupler_with_crossover(p, &CrossoverParams::scaled_reference(p.z0))
}

/// Same with an explicit crossover design.
pub fn gen_pt_coupler_with_crossover(p: &CouplerParams, xo: &CrossoverParams) -> NetworkGraph {
    gen_pt_coupler_custom(p, xo, DELAY_EQUALIZER_DEG)
}

/// Fully parameterized variant, used for design-space exploration.
pub fn gen_pt_coupler_custom(
    p: &CouplerParams,
    xo: &CrossoverParams,
    eq_deg: f64,
) -> NetworkGraph {
    let mut g = NetworkGraph::new(p.z0);
    let nodes = add_pt_coupler_body(&mut g, "", p, xo, eq_deg);
    for (label, node) in ["Pa", "Pb", "Pc", "Pd"].iter().zip(&nodes) {
        g.add_port(label, node);
    }
    g
}

/// Full 8-port comparator: four port-transformation couplers in two stages,
/// one interconnection crossover on the crossing pair of stage links, and
/// full-wave equalizing lines on the straight pair.
///
/// Ports: inputs `P1`..`P4` (antenna quadrants A..D), outputs `P5`..`P8`
/// (sum, azimuth difference, elevation difference, diagonal difference).
pub fn gen_comparator(f0: f64, z0: f64, z_eta: f64, loss_db: f64) -> NetworkGraph {
    gen_comparator_custom(
        f0,
        z0,
        z_eta,
        loss_db,
        &CrossoverParams::scaled_reference(z0),
        DELAY_EQUALIZER_DEG,
        STAGE_LINK_DEG,
    )
}

/// Straight stage-link length, degrees. One full turn matches the f0
/// transparency of the crossed links through the interconnection
/// crossover.
pub const STAGE_LINK_DEG: f64 = 360.0;

/// Fully parameterized comparator, used for design-space exploration.
pub fn gen_comparator_custom(
    f0: f64,
    z0: f64,
    z_eta: f64,
    loss_db: f64,
    xo: &CrossoverParams,
    eq_deg: f64,
    straight_deg: f64,
) -> NetworkGraph {
    let p = CouplerParams { f0, z0, z_eta, loss_db };
    let mut g = NetworkGraph::new(z0);
    let c1 = add_pt_coupler_body(&mut g, "c1_", &p, xo, eq_deg);
    let c2 = add_pt_coupler_body(&mut g, "c2_", &p, xo, eq_deg);
    let c3 = add_pt_coupler_body(&mut g, "c3_", &p, xo, eq_deg);
    let c4 = add_pt_coupler_body(&mut g, "c4_", &p, xo, eq_deg);
    // Stage links: sum outputs of the first stage feed c3, difference
    // outputs feed c4. The c2->c3 and c1->c4 links cross through the
    // interconnection crossover; the other two are straight lines of the
    // same nominal electrical length.
    add_crossover_body(&mut g, "ix_", xo, z0, loss_db, [&c1[0], &c2[2], &c4[1], &c3[3]]);
    let straight = TLineSection::with_loss(z0, straight_deg, loss_db);
    g.add_line("l1", &c1[2], &c3[1], straight);
    g.add_line("l2", &c2[0], &c4[3], straight);

    g.add_port("P1", &c1[1]);
    g.add_port("P2", &c2[1]);
    g.add_port("P3", &c1[3]);
    g.add_port("P4", &c2[3]);
    g.add_port("P5", &c3[2]);
    g.add_port("P6", &c3[0]);
    g.add_port("P7", &c4[2]);
    g.add_port("P8", &c4[0]);
    g
}

/// The +/-1 channel-combination matrix, rows (sum, d_az, d_el, d_del) by
/// columns (A, B, C, D).
pub const SIGN_MATRIX: [[f64; 4]; 4] = [
    [1.0, 1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0, -1.0],
    [1.0, 1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0, 1.0],
];

// ---------------------------------------------------------------------------
// Analytic oracles
// ---------------------------------------------------------------------------

/// Exact ABCD of two two-ports sharing both terminal pairs (parallel
/// connection). Singular only when the B entries cancel.
pub fn parallel_two_port(p: &AbcdMatrix, q: &AbcdMatrix) -> Result<AbcdMatrix, NetError> {
    let bsum = p.b + q.b;
    if bsum.norm() < SINGULAR_TOL {
        return Err(NetError::DegenerateNetwork);
    }
    Ok(AbcdMatrix {
        a: (p.a * q.b + q.a * p.b) / bsum,
        b: p.b * q.b / bsum,
        c: p.c + q.c + (q.a - p.a) * (p.d - q.d) / bsum,
        d: (p.b * q.d + q.b * p.d) / bsum,
    })
}

fn mode_sign(term: Termination) -> f64 {
    match term {
        Termination::Open => 1.0,
        Termination::Short => -1.0,
    }
}

/// One bisection half of the port-transformation coupler as a two-port from
/// the `Pa` end to the `Pb` end, for one symmetry-plane termination.
fn pt_half_abcd(
    p: &CouplerParams,
    xo: &CrossoverParams,
    eq_deg: f64,
    term: Termination,
    f: f64,
) -> Result<AbcdMatrix, NetError> {
    let f0 = p.f0;
    let z1 = p.ring_impedance();
    let loss = p.loss_db;
    let sec = |z: f64, th: f64| TLineSection::with_loss(z, th, loss);

    let y_arc = stub_admittance(&sec(z1, 135.0), term, f, f0);
    let y_mid = stub_admittance(&sec(z1, 45.0), term, f, f0);
    let y_branch = stub_admittance(&sec(xo.z_x, xo.theta_x_deg / 2.0), term, f, f0);

    let ring_line = tline_abcd(&sec(z1, 90.0), f, f0);
    let shifter = tline_abcd(&sec(p.z_eta, 90.0), f, f0);
    let inner = tline_abcd(&sec(xo.z_y, xo.theta_y_deg), f, f0);
    let diagonal = cascade(&inner, &inner);
    let crossed = tline_abcd(&sec(xo.z_x, xo.theta_x_deg), f, f0);
    let folded = if mode_sign(term) > 0.0 { crossed } else { crossed.negated() };
    let middle = parallel_two_port(&diagonal, &folded)?;

    let mut m = if eq_deg > 0.0 {
        cascade(&tline_abcd(&sec(p.z0, eq_deg), f, f0), &AbcdMatrix::shunt(y_arc))
    } else {
        AbcdMatrix::shunt(y_arc)
    };
    m = cascade(&m, &ring_line);
    m = cascade(&m, &AbcdMatrix::shunt(y_mid));
    m = cascade(&m, &shifter);
    m = cascade(&m, &AbcdMatrix::shunt(y_branch));
    m = cascade(&m, &middle);
    m = cascade(&m, &AbcdMatrix::shunt(y_branch));
    m = cascade(&m, &shifter);
    Ok(m)
}

/// Analytic 4x4 S-matrix of the port-transformation coupler from its two
/// bisection half-circuits and the standard even/odd recombination.
///
/// Acts as the independent oracle for `gen_pt_coupler` + `sweep`: the two
/// must agree to 1e-9 at every non-singular frequency.
pub fn evenodd_ratrace_s(p: &CouplerParams, f: f64) -> Result<CMat, NetError> {
    evenodd_ratrace_s_with_crossover(p, &CrossoverParams::scaled_reference(p.z0), f)
}

pub fn evenodd_ratrace_s_with_crossover(
    p: &CouplerParams,
    xo: &CrossoverParams,
    f: f64,
) -> Result<CMat, NetError> {
    let se = abcd_to_s(&pt_half_abcd(p, xo, Termination::Open, f)?, p.z0)?;
    let so = abcd_to_s(&pt_half_abcd(p, xo, Termination::Short, f)?, p.z0)?;
    let half = Complex64::new(0.5, 0.0);
    let gp = (se.get(0, 0) + so.get(0, 0)) * half;
    let gm = (se.get(0, 0) - so.get(0, 0)) * half;
    let tp = (se.get(1, 0) + so.get(1, 0)) * half;
    let tm = (se.get(1, 0) - so.get(1, 0)) * half;
    let hp = (se.get(1, 1) + so.get(1, 1)) * half;
    let hm = (se.get(1, 1) - so.get(1, 1)) * half;

    let mut s = CMat::zeros(4);
    let rows = [
        [gp, tp, tm, gm], // Pa
        [tp, hp, hm, tm], // Pb
        [tm, hm, hp, tp], // Pc
        [gm, tm, tp, gp], // Pd
    ];
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            s.set(i, j, v);
        }
    }
    Ok(s)
}

/// Quarter-circuit input admittance of the crossover for one excitation
/// pattern: both outer half-branches plus the inner line, each terminated
/// open or short by the two symmetry planes.
fn crossover_mode_admittance(
    p: &CrossoverParams,
    v: Termination,
    h: Termination,
    f: f64,
    f0: f64,
) -> Complex64 {
    let outer = TLineSection::new(p.z_x, p.theta_x_deg / 2.0);
    let inner = TLineSection::new(p.z_y, p.theta_y_deg);
    // The inner line ends where the two planes intersect: it sees an open
    // when the excitation is symmetric under the half-turn (both planes the
    // same parity), a short otherwise.
    let c2 = if v == h { Termination::Open } else { Termination::Short };
    stub_admittance(&outer, v, f, f0)
        + stub_admittance(&outer, h, f, f0)
        + stub_admittance(&inner, c2, f, f0)
}

/// Analytic 4x4 S-matrix of the crossover (with its matched access lines)
/// from the four reduced one-port excitations. Port order matches
/// `gen_crossover`.
pub fn fourmode_crossover_s(p: &CrossoverParams, f: f64, f0: f64, z0: f64) -> CMat {
    use Termination::{Open as E, Short as O};
    let modes = [(E, E), (E, O), (O, E), (O, O)];
    // Sign patterns on (x, y, x', y') for each plane-parity combination.
    let patterns: [[f64; 4]; 4] = [
        [1.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0],
        [1.0, -1.0, 1.0, -1.0],
    ];
    let theta_feed = std::f64::consts::FRAC_PI_2 * f / f0;
    let feed_rot = Complex64::from_polar(1.0, -2.0 * theta_feed);
    let mut s = CMat::zeros(4);
    for (m, &(v, h)) in modes.iter().enumerate() {
        let y = crossover_mode_admittance(p, v, h, f, f0);
        // Reflection written to stay finite through admittance poles.
        let gamma = (1.0 - z0 * y) / (1.0 + z0 * y) * feed_rot;
        for i in 0..4 {
            for j in 0..4 {
                let w = 0.25 * patterns[m][i] * patterns[m][j];
                s.set(i, j, s.get(i, j) + gamma * w);
            }
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Design-condition solver
// ---------------------------------------------------------------------------

/// Residual of the closed-form branch-matching condition printed alongside
/// the design, in the pole-free normalized form
/// `sin^2(theta_x) + 2 cos(2 theta_x) z0/z_x`. The four-mode verification is
/// authoritative; this is reported for cross-checking only.
pub fn matching_condition_residual(theta_x_deg: f64, z_x: f64, z0: f64) -> f64 {
    let t = theta_x_deg.to_radians();
    t.sin().powi(2) + 2.0 * (2.0 * t).cos() * z0 / z_x
}

/// Residual of the closed-form isolation condition,
/// `2 sqrt(2 tan^4 - 2 tan^2) / (tan^3 - 3 tan)` evaluated literally (NaN
/// where the radicand is negative). Reported for cross-checking only.
pub fn isolation_condition_residual(theta_x_deg: f64) -> f64 {
    let t = theta_x_deg.to_radians().tan();
    let radicand = 2.0 * t.powi(4) - 2.0 * t.powi(2);
    2.0 * radicand.sqrt() / (t.powi(3) - 3.0 * t)
}

/// Worst f0 magnitude among reflection and the two coupled paths, driving
/// port x. Zero for a perfect crossover.
pub fn crossover_residual(p: &CrossoverParams, z0: f64) -> f64 {
    let s = fourmode_crossover_s(p, 1.0, 1.0, z0);
    s.get(0, 0)
        .norm()
        .max(s.get(1, 0).norm())
        .max(s.get(3, 0).norm())
}

/// Pass/fail verification used by the solver: reflections and coupled paths
/// at or below -40 dB, through path within 0.01 dB of lossless.
pub fn verify_crossover(p: &CrossoverParams, z0: f64) -> bool {
    let s = fourmode_crossover_s(p, 1.0, 1.0, z0);
    let worst_leak = db20(crossover_residual(p, z0));
    let thru = db20(s.get(2, 0).norm());
    worst_leak <= -40.0 && thru >= -0.01
}

/// Scan the `(theta_x, z_x)` design plane with the inner line fixed at a
/// quarter wave, refine each bracketed minimum of the full-model residual,
/// and return every candidate that passes `verify_crossover`.
///
/// The scan is grid-based and seed free, so the candidate list is
/// deterministic.
pub fn solve_crossover_conditions(z0: f64) -> Result<Vec<CrossoverParams>, ComponentsError> {
    assert!(z0 > 0.0);
    let mut out = Vec::new();
    let mut zx = 20.0;
    while zx <= 150.0 + 1e-9 {
        let residual = |theta: f64| {
            crossover_residual(
                &CrossoverParams { z_x: zx, z_y: z0, theta_x_deg: theta, theta_y_deg: 90.0 },
                z0,
            )
        };
        // Coarse bracket, then golden-section refinement.
        let mut best: Option<(f64, f64)> = None;
        let steps = 340;
        for k in 1..steps {
            let th = 5.0 + (175.0 - 5.0) * k as f64 / steps as f64;
            let r = residual(th);
            if best.map_or(true, |(_, rb)| r < rb) {
                best = Some((th, r));
            }
        }
        let (mut lo, mut hi) = {
            let center = best.expect("scan grid is non-empty").0;
            (center - 1.0, center + 1.0)
        };
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let mut f1 = residual(x1);
        let mut f2 = residual(x2);
        for _ in 0..80 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = residual(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = residual(x2);
            }
        }
        let theta = 0.5 * (lo + hi);
        let cand = CrossoverParams { z_x: zx, z_y: z0, theta_x_deg: theta, theta_y_deg: 90.0 };
        if verify_crossover(&cand, z0) {
            out.push(cand);
        }
        zx += 5.0;
    }
    if out.is_empty() {
        Err(ComponentsError::NoSolutionFound)
    } else {
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Pass/fail thresholds for the bandwidth report. Return and isolation
/// requirements are optional; amplitude and phase windows always apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriteriaSet {
    /// Minimum return loss in dB at every listed port, when present.
    pub min_return_db: Option<f64>,
    /// Minimum isolation in dB across every listed pair, when present.
    pub min_isolation_db: Option<f64>,
    /// Largest allowed deviation of each transmission from its nominal dB.
    pub max_amp_imbalance_db: f64,
    /// Largest allowed deviation of each phase relation from nominal.
    pub max_phase_imbalance_deg: f64,
}

impl CriteriaSet {
    /// Amplitude/phase window only (the coupler criteria set).
    pub fn amp_phase(amp_db: f64, phase_deg: f64) -> Self {
        Self {
            min_return_db: None,
            min_isolation_db: None,
            max_amp_imbalance_db: amp_db,
            max_phase_imbalance_deg: phase_deg,
        }
    }

    /// Return/isolation floor plus amplitude/phase window (the comparator
    /// criteria set).
    pub fn full(return_iso_db: f64, amp_db: f64, phase_deg: f64) -> Self {
        Self {
            min_return_db: Some(return_iso_db),
            min_isolation_db: Some(return_iso_db),
            max_amp_imbalance_db: amp_db,
            max_phase_imbalance_deg: phase_deg,
        }
    }
}

/// One nominal transmission magnitude to track.
#[derive(Debug, Clone, Copy)]
pub struct AmpCheck {
    pub output: usize,
    pub input: usize,
    pub nominal_db: f64,
}

/// One nominal phase relation: arg S[a] - arg S[b] compared against
/// `nominal_deg`, entries given as (row, column).
#[derive(Debug, Clone, Copy)]
pub struct PhaseCheck {
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub nominal_deg: f64,
}

/// What to measure on a given network: which ports to check for return
/// loss, which pairs for isolation, and the nominal transmissions and phase
/// relations.
#[derive(Debug, Clone)]
pub struct PortRoles {
    pub returns: Vec<usize>,
    pub isolations: Vec<(usize, usize)>,
    pub transmissions: Vec<AmpCheck>,
    pub phase_checks: Vec<PhaseCheck>,
}

/// Roles for a 4-port hybrid in `Pa`..`Pd` order.
pub fn coupler_roles() -> PortRoles {
    let nominal = -3.0102999566398120; // 10 log10(1/2)
    PortRoles {
        returns: vec![0, 1, 2, 3],
        isolations: vec![(2, 0), (3, 1)],
        transmissions: vec![
            AmpCheck { output: 1, input: 0, nominal_db: nominal },
            AmpCheck { output: 3, input: 0, nominal_db: nominal },
            AmpCheck { output: 1, input: 2, nominal_db: nominal },
            AmpCheck { output: 3, input: 2, nominal_db: nominal },
        ],
        phase_checks: vec![
            PhaseCheck { a: (3, 0), b: (1, 0), nominal_deg: 180.0 },
            PhaseCheck { a: (3, 2), b: (1, 2), nominal_deg: 0.0 },
        ],
    }
}

/// Roles for the 8-port comparator in `P1`..`P8` order.
pub fn comparator_roles() -> PortRoles {
    let nominal = -6.0205999132796240; // 10 log10(1/4)
    let mut transmissions = Vec::new();
    let mut phase_checks = Vec::new();
    for out in 0..4 {
        for inp in 0..4 {
            transmissions.push(AmpCheck { output: 4 + out, input: inp, nominal_db: nominal });
            if inp > 0 {
                let nominal_deg =
                    if SIGN_MATRIX[out][inp] * SIGN_MATRIX[out][0] > 0.0 { 0.0 } else { 180.0 };
                phase_checks.push(PhaseCheck {
                    a: (4 + out, inp),
                    b: (4 + out, 0),
                    nominal_deg,
                });
            }
        }
    }
    let mut isolations = Vec::new();
    for i in 0..4 {
        for j in (i + 1)..4 {
            isolations.push((i, j));
            isolations.push((4 + i, 4 + j));
        }
    }
    PortRoles { returns: (0..8).collect(), isolations, transmissions, phase_checks }
}

/// Wrap an angle difference to (-180, 180] degrees.
pub fn wrap_deg(x: f64) -> f64 {
    let mut y = x % 360.0;
    if y > 180.0 {
        y -= 360.0;
    } else if y <= -180.0 {
        y += 360.0;
    }
    y
}

/// Per-frequency pass/fail against a criteria set plus spot values at f0.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub freqs: Vec<f64>,
    pub f0: f64,
    /// Positive return loss in dB per checked port, at f0.
    pub return_loss_db: Vec<(usize, f64)>,
    /// Positive isolation in dB per checked pair, at f0.
    pub isolation_db: Vec<((usize, usize), f64)>,
    /// Transmission magnitude (dB) and phase (deg) per check, at f0.
    pub transmissions: Vec<((usize, usize), f64, f64)>,
    /// Per-frequency aggregate pass.
    pub pass: Vec<bool>,
    /// Per-frequency worst amplitude deviation from nominal, dB.
    pub amp_dev_db: Vec<f64>,
    /// Per-frequency worst phase deviation from nominal, deg.
    pub phase_dev_deg: Vec<f64>,
    /// Widest contiguous passing interval containing f0, if any.
    pub band: Option<(f64, f64)>,
    /// 100 * band width / f0, clamped to [0, 100].
    pub fractional_bandwidth_pct: f64,
}

/// Evaluate a criteria set over a sweep. The grid must contain f0.
pub fn metrics(
    s: &SweepSParams,
    f0: f64,
    criteria: &CriteriaSet,
    roles: &PortRoles,
) -> MetricsReport {
    let f0_idx = s
        .freq_index(f0)
        .expect("metrics requires the sweep grid to contain the design frequency");
    let nf = s.freqs.len();
    let mut pass = vec![true; nf];
    let mut amp_dev = vec![0.0f64; nf];
    let mut phase_dev = vec![0.0f64; nf];

    for (fi, m) in s.matrices.iter().enumerate() {
        let mut ok = true;
        if let Some(floor) = criteria.min_return_db {
            for &p in &roles.returns {
                ok &= db20(m.get(p, p).norm()) <= -floor;
            }
        }
        if let Some(floor) = criteria.min_isolation_db {
            for &(i, j) in &roles.isolations {
                ok &= db20(m.get(i, j).norm()) <= -floor;
            }
        }
        for t in &roles.transmissions {
            let dev = (db20(m.get(t.output, t.input).norm()) - t.nominal_db).abs();
            amp_dev[fi] = amp_dev[fi].max(dev);
        }
        for pcheck in &roles.phase_checks {
            let diff = (m.get(pcheck.a.0, pcheck.a.1) / m.get(pcheck.b.0, pcheck.b.1))
                .arg()
                .to_degrees();
            let dev = wrap_deg(diff - pcheck.nominal_deg).abs();
            phase_dev[fi] = phase_dev[fi].max(dev);
        }
        ok &= amp_dev[fi] <= criteria.max_amp_imbalance_db;
        ok &= phase_dev[fi] <= criteria.max_phase_imbalance_deg;
        pass[fi] = ok;
    }

    let m0 = &s.matrices[f0_idx];
    let return_loss_db =
        roles.returns.iter().map(|&p| (p, -db20(m0.get(p, p).norm()))).collect();
    let isolation_db = roles
        .isolations
        .iter()
        .map(|&(i, j)| ((i, j), -db20(m0.get(i, j).norm())))
        .collect();
    let transmissions = roles
        .transmissions
        .iter()
        .map(|t| {
            let v = m0.get(t.output, t.input);
            ((t.output, t.input), db20(v.norm()), v.arg().to_degrees())
        })
        .collect();

    let (band, pct) = if pass[f0_idx] {
        let mut lo = f0_idx;
        while lo > 0 && pass[lo - 1] {
            lo -= 1;
        }
        let mut hi = f0_idx;
        while hi + 1 < nf && pass[hi + 1] {
            hi += 1;
        }
        let width = s.freqs[hi] - s.freqs[lo];
        (Some((s.freqs[lo], s.freqs[hi])), (100.0 * width / f0).clamp(0.0, 100.0))
    } else {
        (None, 0.0)
    };

    MetricsReport {
        freqs: s.freqs.clone(),
        f0,
        return_loss_db,
        isolation_db,
        transmissions,
        pass,
        amp_dev_db: amp_dev,
        phase_dev_deg: phase_dev,
        band,
        fractional_bandwidth_pct: pct,
    }
}

impl MetricsReport {
    /// Per-frequency CSV: frequency, per-criterion worst deviations,
    /// aggregate pass flag.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,amp_dev_db,phase_dev_deg,pass\n");
        for i in 0..self.freqs.len() {
            out.push_str(&format!(
                "{:.9e},{:.6},{:.6},{}\n",
                self.freqs[i],
                self.amp_dev_db[i],
                self.phase_dev_deg[i],
                u8::from(self.pass[i]),
            ));
        }
        out
    }

    /// One-page text summary of the f0 figures and the band.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("design frequency: {:.6e} Hz\n", self.f0));
        out.push_str("return loss at f0 (dB):\n");
        for (p, v) in &self.return_loss_db {
            out.push_str(&format!("  port {}: {:.2}\n", p + 1, v));
        }
        out.push_str("isolation at f0 (dB):\n");
        for ((i, j), v) in &self.isolation_db {
            out.push_str(&format!("  ports {}-{}: {:.2}\n", i + 1, j + 1, v));
        }
        out.push_str("transmissions at f0 (dB, deg):\n");
        for ((o, i), mag, ph) in &self.transmissions {
            out.push_str(&format!("  {} <- {}: {:.3} dB, {:.2} deg\n", o + 1, i + 1, mag, ph));
        }
        match self.band {
            Some((lo, hi)) => out.push_str(&format!(
                "passing band: {:.6e} .. {:.6e} Hz ({:.2}% fractional)\n",
                lo, hi, self.fractional_bandwidth_pct
            )),
            None => out.push_str("passing band: none (f0 itself fails the criteria)\n"),
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netkernel::{sweep, FrequencyGrid};
    use crate::netlist;

    const F0: f64 = 2e9;

    fn f0_matrix(g: &NetworkGraph) -> CMat {
        sweep(g, &FrequencyGrid::spot(F0, F0)).unwrap().matrices.remove(0)
    }

    #[test]
    fn conventional_ratrace_f0_split_and_isolation() {
        let g = gen_conventional_ratrace(F0, 50.0);
        assert!(netlist::validate(&g).is_empty());
        let s = f0_matrix(&g);
        let target = 1.0 / 2.0f64.sqrt();
        assert!((s.get(1, 0).norm() - target).abs() < 1e-9);
        assert!((s.get(3, 0).norm() - target).abs() < 1e-9);
        assert!(db20(s.get(0, 0).norm()) <= -60.0);
        assert!(db20(s.get(2, 0).norm()) <= -60.0);
        // Difference drive: outputs 180 deg apart. Sum drive: in phase.
        let d = wrap_deg((s.get(3, 0) / s.get(1, 0)).arg().to_degrees());
        assert!((d.abs() - 180.0).abs() < 1e-6);
        let e = wrap_deg((s.get(3, 2) / s.get(1, 2)).arg().to_degrees());
        assert!(e.abs() < 1e-6);
    }

    #[test]
    fn pt_coupler_matches_conventional_at_f0() {
        let p = CouplerParams::new(F0, 50.0);
        let conv = f0_matrix(&gen_conventional_ratrace(F0, 50.0));
        let pt = f0_matrix(&gen_pt_coupler(&p));
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (conv.get(i, j) - pt.get(i, j)).norm() < 1e-9,
                    "entry {i}{j}: {} vs {}",
                    conv.get(i, j),
                    pt.get(i, j)
                );
            }
        }
    }

    #[test]
    fn pt_coupler_is_z_eta_invariant_at_f0() {
        let mut p = CouplerParams::new(F0, 50.0);
        p.z_eta = 50.0;
        let a = f0_matrix(&gen_pt_coupler(&p));
        p.z_eta = 80.0;
        let b = f0_matrix(&gen_pt_coupler(&p));
        for k in 0..16 {
            assert!((a.data[k] - b.data[k]).norm() < 1e-9);
        }
    }

    #[test]
    fn pt_coupler_graph_validates_clean() {
        let g = gen_pt_coupler(&CouplerParams::new(F0, 50.0));
        assert!(netlist::validate(&g).is_empty());
    }

    #[test]
    fn evenodd_oracle_matches_sweep_at_spot_frequencies() {
        let p = CouplerParams::new(F0, 50.0);
        let g = gen_pt_coupler(&p);
        for scale in [0.9, 1.0, 1.1] {
            let f = scale * F0;
            let s = sweep(&g, &FrequencyGrid::spot(F0, f)).unwrap().matrices.remove(0);
            let o = evenodd_ratrace_s(&p, f).unwrap();
            for k in 0..16 {
                assert!(
                    (s.data[k] - o.data[k]).norm() < 1e-9,
                    "f scale {scale}, entry {k}: {} vs {}",
                    s.data[k],
                    o.data[k]
                );
            }
        }
    }

    #[test]
    fn crossover_is_ideal_at_f0() {
        let p = CrossoverParams::scaled_reference(50.0);
        let g = gen_crossover(&p, F0, 50.0);
        assert!(netlist::validate(&g).is_empty());
        let s = f0_matrix(&g);
        assert!(db20(s.get(2, 0).norm()) > -0.01);
        assert!(db20(s.get(3, 1).norm()) > -0.01);
        for (i, j) in [(0, 0), (1, 0), (3, 0), (1, 1), (2, 1)] {
            assert!(db20(s.get(i, j).norm()) <= -40.0, "leak at {i}{j}");
        }
    }

    #[test]
    fn crossover_port_relabel_symmetry() {
        // Swapping x<->x' and y<->y' leaves the matrix unchanged.
        let p = CrossoverParams::scaled_reference(50.0);
        let s = f0_matrix(&gen_crossover(&p, F0, 50.0));
        let perm = [2usize, 3, 0, 1];
        for i in 0..4 {
            for j in 0..4 {
                assert!((s.get(i, j) - s.get(perm[i], perm[j])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fourmode_oracle_matches_sweep() {
        let p = CrossoverParams::scaled_reference(50.0);
        let g = gen_crossover(&p, F0, 50.0);
        for scale in [0.6, 0.85, 1.0, 1.2] {
            let f = scale * F0;
            let s = sweep(&g, &FrequencyGrid::spot(F0, f)).unwrap().matrices.remove(0);
            let o = fourmode_crossover_s(&p, f, F0, 50.0);
            for k in 0..16 {
                assert!(
                    (s.data[k] - o.data[k]).norm() < 1e-9,
                    "f scale {scale}, entry {k}: {} vs {}",
                    s.data[k],
                    o.data[k]
                );
            }
        }
    }

    #[test]
    fn matched_mode_impedance_reflects_nothing() {
        // A mode impedance equal to the reference gives zero reflection.
        let y = Complex64::new(1.0 / 50.0, 0.0);
        let gamma = (1.0 - 50.0 * y) / (1.0 + 50.0 * y);
        assert!(gamma.norm() < 1e-15);
    }

    #[test]
    fn comparator_is_quarter_split_with_sign_structure() {
        let g = gen_comparator(F0, 50.0, 50.0, 0.0);
        assert!(netlist::validate(&g).is_empty());
        let s = f0_matrix(&g);
        for out in 0..4 {
            for inp in 0..4 {
                let v = s.get(4 + out, inp);
                assert!(
                    (db20(v.norm()) + 6.0206).abs() < 0.05,
                    "transmission {out}{inp} = {} dB",
                    db20(v.norm())
                );
            }
        }
        // One common unit phase u with S = (u/2) M.
        let u = s.get(4, 0) * 2.0;
        assert!((u.norm() - 1.0).abs() < 1e-6);
        for out in 0..4 {
            for inp in 0..4 {
                let want = u * 0.5 * SIGN_MATRIX[out][inp];
                let got = s.get(4 + out, inp);
                assert!((got - want).norm() < 1e-6, "entry {out}{inp}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn solver_finds_the_reference_design_family() {
        let cands = solve_crossover_conditions(50.0).unwrap();
        assert!(!cands.is_empty());
        for c in &cands {
            assert!(verify_crossover(c, 50.0));
            assert!((c.theta_x_deg - 90.0).abs() < 0.5, "theta_x = {}", c.theta_x_deg);
        }
        // Deterministic scan.
        let again = solve_crossover_conditions(50.0).unwrap();
        assert_eq!(cands.len(), again.len());
        for (a, b) in cands.iter().zip(&again) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn reference_point_verifies_and_closed_forms_disagree() {
        let p = CrossoverParams::scaled_reference(50.0);
        assert!(verify_crossover(&p, 50.0));
        // The printed closed form prefers z_x = 2 z0 at a quarter-wave
        // branch, which the full model does not confirm.
        let r57 = matching_condition_residual(90.0, 57.0, 50.0);
        let r100 = matching_condition_residual(90.0, 100.0, 50.0);
        assert!(r57.abs() > 0.5);
        assert!(r100.abs() < 1e-12);
    }

    #[test]
    fn metrics_all_pass_thru_spans_the_sweep() {
        let text = "node a\nnode b\nport P1 a\nport P2 b\ntline t a b z=50 theta=90\n";
        let g = netlist::parse(text).unwrap();
        let s = sweep(&g, &FrequencyGrid::new(F0, 1.5e9, 2.5e9, 101)).unwrap();
        let roles = PortRoles {
            returns: vec![0, 1],
            isolations: vec![],
            transmissions: vec![AmpCheck { output: 1, input: 0, nominal_db: 0.0 }],
            phase_checks: vec![],
        };
        let report = metrics(&s, F0, &CriteriaSet::full(10.0, 0.5, 10.0), &roles);
        assert!(report.pass.iter().all(|&p| p));
        assert!((report.fractional_bandwidth_pct - 50.0).abs() < 1e-9);
    }

    #[test]
    fn coupler_bandwidth_interval_contains_f0() {
        let p = CouplerParams::new(F0, 50.0);
        let g = gen_pt_coupler(&p);
        let s = sweep(&g, &FrequencyGrid::new(F0, 1.6e9, 2.4e9, 201)).unwrap();
        let report = metrics(&s, F0, &CriteriaSet::amp_phase(0.5, 10.0), &coupler_roles());
        let (lo, hi) = report.band.expect("f0 must pass");
        assert!(lo <= F0 && F0 <= hi);
        assert!(report.fractional_bandwidth_pct > 0.0);
    }
}
