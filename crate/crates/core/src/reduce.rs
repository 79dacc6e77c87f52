//! Virtual-chain reductions.
//!
//! A [`SiteUnitary`] re-labels the one-particle site basis. For each
//! [`ReductionScheme`] the rows are chosen so that, at the scheme's matching
//! condition, `U H U^dag` splits into homogeneous virtual chains, possibly with
//! end potentials and a few predicted junction bonds. [`reduce_network`]
//! conjugates the Hamiltonian, compares it with the explicitly constructed
//! target and reports how far the network is from that ideal.
//!
//! Row convention: `U[r][s]` is the complex conjugate of the coefficient of
//! `a_s^dag` in the virtual creation operator `~a_r^dag`, so `~H = U H U^dag`
//! and virtual amplitudes are `U psi`.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::{self, Write as _};
use std::io::Write;

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::dynamics::{eigendecompose, StateVector};
use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;
use crate::net::{Gauge, Network};
use crate::topology;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Entries below this magnitude are treated as absent in reports.
const REPORT_FLOOR: f64 = 1e-12;

/// Largest defect at which a decomposition counts as exact.
pub const DECOUPLED_TOLERANCE: f64 = 1e-12;

/// A site of a virtual chain, `chain:index` with a 1-based index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VirtualSite {
    pub chain: String,
    pub index: usize,
}

impl VirtualSite {
    pub fn new(chain: impl Into<String>, index: usize) -> Self {
        Self {
            chain: chain.into(),
            index,
        }
    }
}

impl fmt::Display for VirtualSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.chain, self.index)
    }
}

/// A unitary change of the one-particle site basis with labeled rows.
#[derive(Clone, Debug)]
pub struct SiteUnitary {
    matrix: Mat<C64>,
    labels: Vec<VirtualSite>,
}

impl SiteUnitary {
    /// Validates shape, label uniqueness and `U^dag U = I` within `1e-12`.
    pub fn new(matrix: Mat<C64>, labels: Vec<VirtualSite>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.ncols(),
            });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(Error::InvalidParameter(format!("duplicate virtual site {l}")));
            }
        }
        let u = Self { matrix, labels };
        let defect = u.unitarity_defect();
        if defect > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "site transformation is not unitary (defect {defect:e})"
            )));
        }
        Ok(u)
    }

    pub fn identity(net: &Network) -> Result<Self> {
        let n = net.dim();
        let labels = (0..n)
            .map(|g| net.site_label(g).map(|s| VirtualSite::new(s.chain, s.site)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(Mat::identity(n, n), labels)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[VirtualSite] {
        &self.labels
    }

    pub fn row_of(&self, site: &VirtualSite) -> Option<usize> {
        self.labels.iter().position(|l| l == site)
    }

    /// `max |U^dag U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.matrix.adjoint() * &self.matrix;
        let n = self.dim();
        let mut d = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                d = d.max((p[(i, j)] - target).norm());
            }
        }
        d
    }

    /// `U v`: real-space amplitudes to virtual amplitudes.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.dim(), v.len())?;
        let n = self.dim();
        Ok((0..n)
            .map(|r| (0..n).map(|s| self.matrix[(r, s)] * v[s]).sum())
            .collect())
    }

    /// `U^dag w`: virtual amplitudes back to real space.
    pub fn apply_adjoint(&self, w: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.dim(), w.len())?;
        let n = self.dim();
        let mut out = vec![ZERO; n];
        for (r, &wr) in w.iter().enumerate() {
            if wr == ZERO {
                continue;
            }
            for (s, o) in out.iter_mut().enumerate() {
                *o += self.matrix[(r, s)].conj() * wr;
            }
        }
        Ok(out)
    }

    /// The inverse transformation, with real-space rows labeled by `net`.
    pub fn adjoint(&self, net: &Network) -> Result<SiteUnitary> {
        let n = self.dim();
        check_dim(n, net.dim())?;
        let labels = (0..n)
            .map(|g| net.site_label(g).map(|s| VirtualSite::new(s.chain, s.site)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.matrix.adjoint().to_owned(), labels)
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `U H U^dag`.
pub fn conjugate(h: &HermitianMatrix, u: &SiteUnitary) -> Result<HermitianMatrix> {
    check_dim(u.dim(), h.dim())?;
    let uh = &u.matrix * h.as_mat();
    let raw = &uh * u.matrix.adjoint();
    let n = h.dim();
    let sym = Mat::from_fn(n, n, |i, j| (raw[(i, j)] + raw[(j, i)].conj()) * 0.5);
    Ok(HermitianMatrix::from_mat_unchecked(sym))
}

/// Largest entry of `h` connecting two different blocks of consecutive
/// indices with the given lengths.
pub fn coupling_residual(h: &HermitianMatrix, partition: &[usize]) -> Result<f64> {
    let block = block_ids(partition, h.dim())?;
    Ok(inter_block_max(h, &block, &HashMap::new()))
}

fn block_ids(partition: &[usize], n: usize) -> Result<Vec<usize>> {
    if partition.contains(&0) {
        return Err(Error::InvalidParameter("partition blocks must be non-empty".into()));
    }
    let total: usize = partition.iter().sum();
    check_dim(n, total)?;
    Ok(partition
        .iter()
        .enumerate()
        .flat_map(|(b, &len)| std::iter::repeat_n(b, len))
        .collect())
}

fn inter_block_max(h: &HermitianMatrix, block: &[usize], predicted: &HashMap<(usize, usize), C64>) -> f64 {
    let n = h.dim();
    let mut m = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            if block[i] != block[j] {
                let expect = predicted.get(&(i, j)).copied().unwrap_or(ZERO);
                m = m.max((h.get(i, j) - expect).norm());
            }
        }
    }
    m
}

/// One analytic reduction with its geometry.
///
/// Lengths: `input` is the input chain `A`, `arm` the arms `B`/`C` (or `B1..Bm`),
/// `output` the output chain `D`. Angles `theta` set the joint mixing
/// `t cos(theta)`, `t sin(theta)`; `phi_total` is a loop phase in radians.
#[derive(Clone, Debug, PartialEq)]
pub enum ReductionScheme {
    /// Star splitter with `m` identical arms, matched at `t_n = t / sqrt(m)`.
    Star { m: usize, input: usize, arm: usize },
    /// Y beam with joints `t cos(theta)`, `t sin(theta)`.
    Y { theta: f64, input: usize, arm: usize },
    /// Q ring at flux `n/2` with joints `t / sqrt(2)`.
    QHalfFlux { n: i64, input: usize, arm: usize },
    /// Q ring at flux `n/2 + 1/4` with joints `t cos(theta)`, `t sin(theta)`.
    QQuarterFlux { n: i64, theta: f64, input: usize, arm: usize },
    /// Q ring at any loop phase with joints `t / sqrt(2)`.
    QFilm { phi_total: f64, input: usize, arm: usize },
    /// The two-chain transmission-reflection junction.
    Film { phi_total: f64, sites: usize },
    /// Interferometer at half-integer flux, `t_AB = t_CD = t cos`, `t_AC = t_BD = t sin`.
    IferomHalf { theta: f64, input: usize, arm: usize, output: usize },
    /// Interferometer at integer flux, `t_AB = t_BD = t cos`, `t_AC = t_CD = t sin`.
    IferomInt { theta: f64, input: usize, arm: usize, output: usize },
    /// Interferometer at any loop phase with all joints `t / sqrt(2)`.
    IferomEqual { phi_total: f64, input: usize, arm: usize, output: usize },
    /// Y beam with the complex joints produced by the flux-threaded interferometer.
    YComplex { phi_total: f64, input: usize, arm: usize },
}

impl ReductionScheme {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Star { .. } => "star",
            Self::Y { .. } => "y",
            Self::QHalfFlux { .. } => "q-half-flux",
            Self::QQuarterFlux { .. } => "q-quarter-flux",
            Self::QFilm { .. } => "q-film",
            Self::Film { .. } => "film",
            Self::IferomHalf { .. } => "iferom-half",
            Self::IferomInt { .. } => "iferom-int",
            Self::IferomEqual { .. } => "iferom-equal",
            Self::YComplex { .. } => "y-complex",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(self.mismatch(reason));
        let lengths: &[usize] = match self {
            Self::Star { m, input, arm } => {
                if *m < 2 {
                    return bad(format!("m = {m} < 2"));
                }
                &[*input, *arm]
            }
            Self::Y { input, arm, .. }
            | Self::QHalfFlux { input, arm, .. }
            | Self::QQuarterFlux { input, arm, .. }
            | Self::QFilm { input, arm, .. }
            | Self::YComplex { input, arm, .. } => &[*input, *arm],
            Self::Film { sites, .. } => {
                if *sites < 2 {
                    return bad(format!("film needs at least 2 sites per side, got {sites}"));
                }
                &[*sites]
            }
            Self::IferomHalf { input, arm, output, .. }
            | Self::IferomInt { input, arm, output, .. }
            | Self::IferomEqual { input, arm, output, .. } => &[*input, *arm, *output],
        };
        if lengths.contains(&0) {
            return bad("chain lengths must be at least 1".into());
        }
        match self {
            Self::Y { theta, .. }
            | Self::QQuarterFlux { theta, .. }
            | Self::IferomHalf { theta, .. }
            | Self::IferomInt { theta, .. }
                if !(0.0..=PI / 2.0).contains(theta) =>
            {
                bad(format!("theta = {theta} outside [0, pi/2]"))
            }
            Self::QFilm { phi_total, .. }
            | Self::Film { phi_total, .. }
            | Self::IferomEqual { phi_total, .. }
            | Self::YComplex { phi_total, .. }
                if !phi_total.is_finite() =>
            {
                bad("loop phase must be finite".into())
            }
            _ => Ok(()),
        }
    }

    fn mismatch(&self, reason: impl Into<String>) -> Error {
        Error::SchemeMismatch {
            scheme: self.name().to_string(),
            reason: reason.into(),
        }
    }

    /// Builds the network on which this scheme is exact, threading any flux
    /// in the requested gauge. Uses unit hopping.
    pub fn matched_network(&self, gauge: Gauge) -> Result<Network> {
        self.validate()?;
        let s2 = FRAC_1_SQRT_2;
        match *self {
            Self::Star { m, input, arm } => topology::star(m, input, arm, 1.0 / (m as f64).sqrt()),
            Self::Y { theta, input, arm } => {
                topology::ybeam(input, arm, arm, theta.cos(), theta.sin())
            }
            Self::QHalfFlux { n, input, arm } => {
                let net = topology::qring(input, arm, s2, s2)?;
                let lp = topology::qring_loop(&net)?;
                net.thread_loop_flux(&lp, n as f64 / 2.0, gauge)
            }
            Self::QQuarterFlux { n, theta, input, arm } => {
                let net = topology::qring(input, arm, theta.cos(), theta.sin())?;
                let lp = topology::qring_loop(&net)?;
                net.thread_loop_flux(&lp, n as f64 / 2.0 + 0.25, gauge)
            }
            Self::QFilm { phi_total, input, arm } => {
                let net = topology::qring(input, arm, s2, s2)?;
                let lp = topology::qring_loop(&net)?;
                net.thread_loop_flux(&lp, phi_total / (2.0 * PI), gauge)
            }
            Self::Film { phi_total, sites } => topology::film_network(sites, phi_total),
            Self::IferomHalf { theta, input, arm, output } => {
                let (c, s) = (theta.cos(), theta.sin());
                let net = topology::interferometer(
                    input,
                    arm,
                    arm,
                    output,
                    topology::RingCouplings { ab: c, ac: s, bd: s, cd: c },
                )?;
                let lp = topology::interferometer_loop(&net)?;
                net.thread_loop_flux(&lp, 0.5, gauge)
            }
            Self::IferomInt { theta, input, arm, output } => {
                let (c, s) = (theta.cos(), theta.sin());
                topology::interferometer(
                    input,
                    arm,
                    arm,
                    output,
                    topology::RingCouplings { ab: c, ac: s, bd: c, cd: s },
                )
            }
            Self::IferomEqual { phi_total, input, arm, output } => {
                let net = topology::interferometer(
                    input,
                    arm,
                    arm,
                    output,
                    topology::RingCouplings::uniform(s2),
                )?;
                let lp = topology::interferometer_loop(&net)?;
                net.thread_loop_flux(&lp, phi_total / (2.0 * PI), gauge)
            }
            Self::YComplex { phi_total, input, arm } => topology::ycomplex(input, arm, phi_total),
        }
    }
}

impl fmt::Display for ReductionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Star { m, input, arm } => write!(f, "star(m={m}, M={input}, N={arm})"),
            Self::Y { theta, input, arm } => write!(f, "y(theta={theta}, M={input}, N={arm})"),
            Self::QHalfFlux { n, input, arm } => {
                write!(f, "q-half-flux(n={n}, M={input}, N={arm})")
            }
            Self::QQuarterFlux { n, theta, input, arm } => {
                write!(f, "q-quarter-flux(n={n}, theta={theta}, M={input}, N={arm})")
            }
            Self::QFilm { phi_total, input, arm } => {
                write!(f, "q-film(Phi={phi_total}, M={input}, N={arm})")
            }
            Self::Film { phi_total, sites } => write!(f, "film(Phi={phi_total}, N={sites})"),
            Self::IferomHalf { theta, input, arm, output } => {
                write!(f, "iferom-half(theta={theta}, M={input}, N={arm}, L={output})")
            }
            Self::IferomInt { theta, input, arm, output } => {
                write!(f, "iferom-int(theta={theta}, M={input}, N={arm}, L={output})")
            }
            Self::IferomEqual { phi_total, input, arm, output } => {
                write!(f, "iferom-equal(Phi={phi_total}, M={input}, N={arm}, L={output})")
            }
            Self::YComplex { phi_total, input, arm } => {
                write!(f, "y-complex(Phi={phi_total}, L={input}, N={arm})")
            }
        }
    }
}

/// A virtual chain of the partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VirtualBlock {
    pub label: String,
    pub len: usize,
}

/// An off-diagonal entry `~H[from][to]` of the conjugated Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualBond {
    pub from: VirtualSite,
    pub to: VirtualSite,
    pub value: C64,
}

/// Rows of a site unitary in creation-coefficient form, plus the analytic target.
struct Plan {
    labels: Vec<VirtualSite>,
    coeffs: Vec<Vec<(usize, C64)>>,
    blocks: Vec<VirtualBlock>,
    potentials: Vec<(VirtualSite, f64)>,
    junctions: Vec<(VirtualSite, VirtualSite, C64)>,
    t: f64,
}

impl Plan {
    fn new(t: f64) -> Self {
        Self {
            labels: Vec::new(),
            coeffs: Vec::new(),
            blocks: Vec::new(),
            potentials: Vec::new(),
            junctions: Vec::new(),
            t,
        }
    }

    fn row(&mut self, chain: &str, index: usize, coeffs: Vec<(usize, C64)>) {
        self.labels.push(VirtualSite::new(chain, index));
        self.coeffs.push(coeffs);
    }

    fn block(&mut self, label: &str, len: usize) {
        self.blocks.push(VirtualBlock {
            label: label.to_string(),
            len,
        });
    }

    fn unitary(&self, n: usize) -> Result<SiteUnitary> {
        check_dim(n, self.labels.len())?;
        let mut m = Mat::<C64>::zeros(n, n);
        for (r, row) in self.coeffs.iter().enumerate() {
            for &(s, c) in row {
                m[(r, s)] += c.conj();
            }
        }
        SiteUnitary::new(m, self.labels.clone())
    }

    fn index(&self) -> HashMap<&VirtualSite, usize> {
        self.labels.iter().enumerate().map(|(i, l)| (l, i)).collect()
    }

    /// Junctions as `(row, col) -> value` with `row < col`.
    fn junction_map(&self) -> HashMap<(usize, usize), C64> {
        let idx = self.index();
        self.junctions
            .iter()
            .map(|(a, b, v)| {
                let (i, j) = (idx[a], idx[b]);
                if i < j {
                    ((i, j), *v)
                } else {
                    ((j, i), v.conj())
                }
            })
            .collect()
    }

    fn target(&self) -> HermitianMatrix {
        let n = self.labels.len();
        let mut h = Mat::<C64>::zeros(n, n);
        let mut start = 0;
        for b in &self.blocks {
            for i in start..start + b.len - 1 {
                h[(i, i + 1)] = C64::new(-self.t, 0.0);
                h[(i + 1, i)] = C64::new(-self.t, 0.0);
            }
            start += b.len;
        }
        let idx = self.index();
        for (site, mu) in &self.potentials {
            let i = idx[site];
            h[(i, i)] = C64::new(*mu, 0.0);
        }
        for ((i, j), v) in self.junction_map() {
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
        HermitianMatrix::from_mat_unchecked(h)
    }
}

fn expect_chain(net: &Network, scheme: &ReductionScheme, label: &str, len: usize) -> Result<Vec<usize>> {
    let chain = net
        .chain(label)
        .map_err(|_| scheme.mismatch(format!("network has no chain `{label}`")))?;
    if chain.n_sites != len {
        return Err(scheme.mismatch(format!(
            "chain `{label}` has {} sites, scheme expects {len}",
            chain.n_sites
        )));
    }
    net.chain_sites(label)
}

/// Sites and cumulative link phases of the two ring arms as seen from `A`'s last site.
struct Arms {
    a: Vec<usize>,
    b: Vec<usize>,
    c: Vec<usize>,
    /// `phase_b[l-1]`: phase accumulated from `A:M` to `B:l`.
    phase_b: Vec<f64>,
    /// `phase_c[l-1]`: phase accumulated from `C:l` back to `A:M`.
    phase_c: Vec<f64>,
}

impl Arms {
    fn read(net: &Network, scheme: &ReductionScheme, input: usize, arm: usize) -> Result<Self> {
        let a = expect_chain(net, scheme, "A", input)?;
        let b = expect_chain(net, scheme, "B", arm)?;
        let c = expect_chain(net, scheme, "C", arm)?;
        let node = a[input - 1];
        let cumulative = |arm_sites: &[usize]| -> Vec<f64> {
            let mut path = vec![node];
            arm_sites
                .iter()
                .map(|&s| {
                    path.push(s);
                    net.path_phase(&path)
                })
                .collect()
        };
        let phase_b = cumulative(&b);
        let phase_c = cumulative(&c).into_iter().map(|p| -p).collect();
        Ok(Self {
            a,
            b,
            c,
            phase_b,
            phase_c,
        })
    }

    /// `cos e^{-i phase_b} B_l + sin e^{i phase_c} C_l`.
    fn bright(&self, l: usize, cos: f64, sin: f64) -> Vec<(usize, C64)> {
        vec![
            (self.b[l - 1], C64::from_polar(cos, -self.phase_b[l - 1])),
            (self.c[l - 1], C64::from_polar(sin, self.phase_c[l - 1])),
        ]
    }

    /// `pre (sin e^{-i phase_b} B_l - cos e^{i phase_c} C_l)`.
    fn dark(&self, l: usize, cos: f64, sin: f64, pre: C64) -> Vec<(usize, C64)> {
        vec![
            (self.b[l - 1], pre * C64::from_polar(sin, -self.phase_b[l - 1])),
            (self.c[l - 1], -pre * C64::from_polar(cos, self.phase_c[l - 1])),
        ]
    }

    fn input_rows(&self, plan: &mut Plan) {
        for (j, &s) in self.a.iter().enumerate() {
            plan.row("a", j + 1, vec![(s, C64::new(1.0, 0.0))]);
        }
    }
}

fn input_hopping(net: &Network) -> Result<f64> {
    Ok(net.chain("A")?.hopping)
}

fn plan(net: &Network, scheme: &ReductionScheme) -> Result<Plan> {
    scheme.validate()?;
    let one = C64::new(1.0, 0.0);
    let plan = match *scheme {
        ReductionScheme::Star { m, input, arm } => {
            let a = expect_chain(net, scheme, "A", input)?;
            let arms = (1..=m)
                .map(|p| expect_chain(net, scheme, &format!("B{p}"), arm))
                .collect::<Result<Vec<_>>>()?;
            let mut plan = Plan::new(input_hopping(net)?);
            let norm = 1.0 / (m as f64).sqrt();
            for (j, &s) in a.iter().enumerate() {
                plan.row("a", j + 1, vec![(s, one)]);
            }
            for l in 0..arm {
                let row = arms.iter().map(|sites| (sites[l], C64::new(norm, 0.0))).collect();
                plan.row("a", input + l + 1, row);
            }
            plan.block("a", input + arm);
            for q in 1..m {
                let label = format!("b{q}");
                for l in 0..arm {
                    let row = arms
                        .iter()
                        .enumerate()
                        .map(|(p, sites)| {
                            let angle = -2.0 * PI * ((p + 1) * q) as f64 / m as f64;
                            (sites[l], C64::from_polar(norm, angle))
                        })
                        .collect();
                    plan.row(&label, l + 1, row);
                }
                plan.block(&label, arm);
            }
            plan
        }
        ReductionScheme::Y { theta, input, arm } => {
            let arms = Arms::read(net, scheme, input, arm)?;
            let (c, s) = (theta.cos(), theta.sin());
            let mut plan = Plan::new(input_hopping(net)?);
            arms.input_rows(&mut plan);
            for l in 1..=arm {
                plan.row("a", input + l, arms.bright(l, c, s));
            }
            plan.block("a", input + arm);
            for l in 1..=arm {
                plan.row("b", l, arms.dark(l, c, s, one));
            }
            plan.block("b", arm);
            plan
        }
        ReductionScheme::QHalfFlux { n, input, arm } => {
            let arms = Arms::read(net, scheme, input, arm)?;
            ring_closed(net, scheme, &arms)?;
            let s = FRAC_1_SQRT_2;
            let t = input_hopping(net)?;
            let mut plan = Plan::new(t);
            arms.input_rows(&mut plan);
            for l in 1..=arm {
                plan.row("a", input + l, arms.bright(l, s, s));
            }
            plan.block("a", input + arm);
            for l in 1..=arm {
                plan.row("b", l, arms.dark(l, s, s, one));
            }
            plan.block("b", arm);
            let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            plan.potentials.push((VirtualSite::new("a", input + arm), -t * sign));
            plan.potentials.push((VirtualSite::new("b", arm), t * sign));
            plan
        }
        ReductionScheme::QQuarterFlux { n, theta, input, arm } => {
            let arms = Arms::read(net, scheme, input, arm)?;
            ring_closed(net, scheme, &arms)?;
            let (c, s) = (theta.cos(), theta.sin());
            let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let pre = C64::new(0.0, sign);
            let mut plan = Plan::new(input_hopping(net)?);
            arms.input_rows(&mut plan);
            for l in 1..=arm {
                plan.row("a", input + l, arms.bright(l, c, s));
            }
            for l in 1..=arm {
                plan.row("a", input + arm + l, arms.dark(arm + 1 - l, c, s, pre));
            }
            plan.block("a", input + 2 * arm);
            plan
        }
        ReductionScheme::QFilm { phi_total, input, arm } => {
            let arms = Arms::read(net, scheme, input, arm)?;
            ring_closed(net, scheme, &arms)?;
            let s = FRAC_1_SQRT_2;
            let t = input_hopping(net)?;
            let mut plan = Plan::new(t);
            arms.input_rows(&mut plan);
            for l in 1..=arm {
                plan.row("a", input + l, arms.bright(l, s, s));
            }
            plan.block("a", input + arm);
            for l in 1..=arm {
                plan.row("b", l, arms.dark(l, s, s, C64::new(0.0, 1.0)));
            }
            plan.block("b", arm);
            let end_a = VirtualSite::new("a", input + arm);
            let end_b = VirtualSite::new("b", arm);
            plan.potentials.push((end_a.clone(), -t * phi_total.cos()));
            plan.potentials.push((end_b.clone(), t * phi_total.cos()));
            plan.junctions
                .push((end_a, end_b, C64::new(-t * phi_total.sin(), 0.0)));
            plan
        }
        ReductionScheme::Film { phi_total, sites } => {
            let a = expect_chain(net, scheme, "A", sites)?;
            let b = expect_chain(net, scheme, "B", sites)?;
            let half = phi_total / 2.0;
            let fp = (half.cos() + half.sin()) * FRAC_1_SQRT_2;
            let fm = (half.cos() - half.sin()) * FRAC_1_SQRT_2;
            let mut plan = Plan::new(input_hopping(net)?);
            for j in 0..sites {
                plan.row(
                    "a",
                    j + 1,
                    vec![(a[j], C64::new(fp, 0.0)), (b[j], C64::new(-fm, 0.0))],
                );
            }
            for j in (0..sites).rev() {
                plan.row(
                    "b",
                    j + 1,
                    vec![(a[j], C64::new(fm, 0.0)), (b[j], C64::new(fp, 0.0))],
                );
            }
            plan.block("ab", 2 * sites);
            plan
        }
        ReductionScheme::IferomHalf { theta, input, arm, output }
        | ReductionScheme::IferomInt { theta, input, arm, output } => {
            let arms = Arms::read(net, scheme, input, arm)?;
            let d = expect_chain(net, scheme, "D", output)?;
            let out_phase = output_phase(net, scheme, &arms, &d)?;
            let (c, s) = (theta.cos(), theta.sin());
            let mut plan = Plan::new(input_hopping(net)?);
            arms.input_rows(&mut plan);
            for l in 1..=arm {
                plan.row("a", input + l, arms.bright(l, c, s));
            }
            let half = matches!(scheme, ReductionScheme::IferomHalf { .. });
            let dout = |plan: &mut Plan, chain: &str, offset: usize| {
                for (k, &site) in d.iter().enumerate() {
                    plan.row(chain, offset + k + 1, vec![(site, C64::from_polar(1.0, out_phase))]);
                }
            };
            if half {
                plan.block("a", input + arm);
                for l in 1..=arm {
                    plan.row("b", l, arms.dark(l, c, s, -one));
                }
                dout(&mut plan, "b", arm);
                plan.block("b", arm + output);
            } else {
                dout(&mut plan, "a", input + arm);
                plan.block("a", input + arm + output);
                for l in 1..=arm {
                    plan.row("b", l, arms.dark(l, c, s, -one));
                }
                plan.block("b", arm);
            }
            plan
        }
        ReductionScheme::IferomEqual { phi_total, input, arm, output } => {
            let arms = Arms::read(net, scheme, input, arm)?;
            let d = expect_chain(net, scheme, "D", output)?;
            let out_phase = output_phase(net, scheme, &arms, &d)?;
            let s = FRAC_1_SQRT_2;
            let t = input_hopping(net)?;
            let mut plan = Plan::new(t);
            arms.input_rows(&mut plan);
            for l in 1..=arm {
                plan.row("a", input + l, arms.bright(l, s, s));
            }
            plan.block("a", input + arm);
            for l in 1..=arm {
                plan.row("b", l, arms.dark(l, s, s, -one));
            }
            plan.block("b", arm);
            for (k, &site) in d.iter().enumerate() {
                plan.row("c", k + 1, vec![(site, C64::from_polar(1.0, out_phase))]);
            }
            plan.block("c", output);
            let half = phi_total / 2.0;
            let pre = C64::from_polar(t, half);
            plan.junctions.push((
                VirtualSite::new("a", input + arm),
                VirtualSite::new("c", 1),
                -pre * half.cos(),
            ));
            plan.junctions.push((
                VirtualSite::new("b", arm),
                VirtualSite::new("c", 1),
                C64::new(0.0, 1.0) * pre * half.sin(),
            ));
            plan
        }
        ReductionScheme::YComplex { phi_total, input, arm } => {
            let a = expect_chain(net, scheme, "A", input)?;
            let b = expect_chain(net, scheme, "B", arm)?;
            let c = expect_chain(net, scheme, "C", arm)?;
            let half = phi_total / 2.0;
            let (ch, sh) = (half.cos(), half.sin());
            let up = C64::from_polar(1.0, half);
            let down = C64::from_polar(1.0, -half);
            let i = C64::new(0.0, 1.0);
            let mut plan = Plan::new(input_hopping(net)?);
            for (j, &s) in a.iter().enumerate() {
                plan.row("a", j + 1, vec![(s, one)]);
            }
            for l in 0..arm {
                plan.row("a", input + l + 1, vec![(b[l], up * ch), (c[l], -up * i * sh)]);
            }
            plan.block("a", input + arm);
            for l in 0..arm {
                plan.row("b", l + 1, vec![(b[l], -down * i * sh), (c[l], down * ch)]);
            }
            plan.block("b", arm);
            plan
        }
    };
    let total: usize = plan.blocks.iter().map(|b| b.len).sum();
    if total != net.dim() {
        return Err(scheme.mismatch(format!(
            "network has {} sites, scheme covers {total}",
            net.dim()
        )));
    }
    Ok(plan)
}

fn ring_closed(net: &Network, scheme: &ReductionScheme, arms: &Arms) -> Result<()> {
    let (bn, cn) = (*arms.b.last().unwrap(), *arms.c.last().unwrap());
    if !net.has_bond(bn, cn) {
        return Err(scheme.mismatch("arms B and C are not joined at their far ends"));
    }
    Ok(())
}

/// Phase carried into the output chain along arm `C`: minus the phase from
/// `A:M` through `C` to `D:1`.
fn output_phase(net: &Network, scheme: &ReductionScheme, arms: &Arms, d: &[usize]) -> Result<f64> {
    let cn = *arms.c.last().unwrap();
    if !net.has_bond(cn, d[0]) {
        return Err(scheme.mismatch("arm C does not feed the output chain"));
    }
    let node = *arms.a.last().unwrap();
    let mut path = vec![node];
    path.extend(&arms.c);
    path.push(d[0]);
    Ok(-net.path_phase(&path))
}

/// Builds the site unitary of `scheme` for `net`.
pub fn build_unitary(scheme: &ReductionScheme, net: &Network) -> Result<SiteUnitary> {
    plan(net, scheme)?.unitary(net.dim())
}

/// A network rewritten in a scheme's virtual basis, with its certificates.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub scheme: ReductionScheme,
    pub unitary: SiteUnitary,
    /// `U H U^dag`.
    pub conjugated: HermitianMatrix,
    /// The analytic virtual Hamiltonian: homogeneous chains plus predicted
    /// end potentials and junctions.
    pub target: HermitianMatrix,
    pub partition: Vec<VirtualBlock>,
    /// Largest inter-block entry of `~H` after removing the predicted junctions.
    pub residual: f64,
    /// `max |~H - target|` over all entries.
    pub target_deviation: f64,
    /// Nonzero diagonal entries of `~H`.
    pub end_potentials: Vec<(VirtualSite, f64)>,
    /// Inter-block bonds that the scheme predicts, with their analytic values.
    pub junctions: Vec<VirtualBond>,
}

impl Decomposition {
    /// `max(residual, target_deviation)`: zero exactly when the network is the
    /// predicted set of virtual chains.
    pub fn defect(&self) -> f64 {
        self.residual.max(self.target_deviation)
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.partition.iter().map(|b| b.len).collect()
    }

    /// Nonzero off-diagonal entries `~H[r][s]`, `r < s`, in row order.
    pub fn virtual_bonds(&self) -> Vec<VirtualBond> {
        let n = self.conjugated.dim();
        let labels = self.unitary.labels();
        let mut out = Vec::new();
        for r in 0..n {
            for s in (r + 1)..n {
                let v = self.conjugated.get(r, s);
                if v.norm() > REPORT_FLOOR {
                    out.push(VirtualBond {
                        from: labels[r].clone(),
                        to: labels[s].clone(),
                        value: v,
                    });
                }
            }
        }
        out
    }

    /// Plain-text summary: partition, certificates, potentials, junctions and
    /// the virtual bond table.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scheme: {}", self.scheme);
        let _ = writeln!(s, "dimension: {}", self.conjugated.dim());
        let parts: Vec<String> = self
            .partition
            .iter()
            .map(|b| format!("{}({})", b.label, b.len))
            .collect();
        let _ = writeln!(s, "partition: {}", parts.join(" "));
        let _ = writeln!(s, "unitarity_defect: {:e}", self.unitary.unitarity_defect());
        let _ = writeln!(s, "residual: {:e}", self.residual);
        let _ = writeln!(s, "target_deviation: {:e}", self.target_deviation);
        let _ = writeln!(s, "end_potentials:");
        for (site, mu) in &self.end_potentials {
            let _ = writeln!(s, "  {site} {mu:+.15}");
        }
        let _ = writeln!(s, "junctions:");
        for j in &self.junctions {
            let _ = writeln!(s, "  {} {} {:+.15} {:+.15}i", j.from, j.to, j.value.re, j.value.im);
        }
        let _ = writeln!(s, "bonds:");
        for b in self.virtual_bonds() {
            let _ = writeln!(s, "  {} {} {:+.15} {:+.15}i", b.from, b.to, b.value.re, b.value.im);
        }
        s
    }

    /// Writes the nonzero entries of `~H` as `row,col,row_site,col_site,re,im`.
    pub fn write_conjugated_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["row", "col", "row_site", "col_site", "re", "im"])?;
        let labels = self.unitary.labels();
        let n = self.conjugated.dim();
        for r in 0..n {
            for c in 0..n {
                let v = self.conjugated.get(r, c);
                if v.norm() > REPORT_FLOOR {
                    w.write_record([
                        r.to_string(),
                        c.to_string(),
                        labels[r].to_string(),
                        labels[c].to_string(),
                        v.re.to_string(),
                        v.im.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Conjugates `net` into the virtual basis of `scheme` and measures the
/// decoupling.
pub fn reduce_network(net: &Network, scheme: &ReductionScheme) -> Result<Decomposition> {
    let plan = plan(net, scheme)?;
    let unitary = plan.unitary(net.dim())?;
    let conjugated = conjugate(&net.hamiltonian(), &unitary)?;
    let target = plan.target();
    let lengths: Vec<usize> = plan.blocks.iter().map(|b| b.len).collect();
    let block = block_ids(&lengths, net.dim())?;
    let residual = inter_block_max(&conjugated, &block, &plan.junction_map());
    let target_deviation = conjugated.max_abs_diff(&target)?;
    let end_potentials = (0..conjugated.dim())
        .filter_map(|i| {
            let mu = conjugated.get(i, i).re;
            (mu.abs() > REPORT_FLOOR).then(|| (unitary.labels()[i].clone(), mu))
        })
        .collect();
    let junctions = plan
        .junctions
        .iter()
        .map(|(a, b, v)| VirtualBond {
            from: a.clone(),
            to: b.clone(),
            value: *v,
        })
        .collect();
    Ok(Decomposition {
        scheme: scheme.clone(),
        unitary,
        conjugated,
        target,
        partition: plan.blocks,
        residual,
        target_deviation,
        end_potentials,
        junctions,
    })
}

fn joint_modulus(net: &Network, scheme: &ReductionScheme, a: (&str, usize), b: (&str, usize)) -> Result<f64> {
    let u = net.site_index(a.0, a.1)?;
    let v = net.site_index(b.0, b.1)?;
    net.bond_amplitude(u, v)
        .map(|x| x.norm())
        .ok_or_else(|| scheme.mismatch(format!("no joint {}:{} - {}:{}", a.0, a.1, b.0, b.1)))
}

/// Distance of the network's joint couplings from the scheme's matching
/// condition; zero exactly when the condition holds.
///
/// Mixing-angle schemes use `| sqrt(sum |t_j|^2) - t |` over each node's
/// joints; equal-split schemes use `max |t_j - t / sqrt(m)|`.
pub fn matching_residual(net: &Network, scheme: &ReductionScheme) -> Result<f64> {
    scheme.validate()?;
    let t = input_hopping(net)?;
    let node = |input: usize| ("A", input);
    let quadrature = |xs: &[f64]| (xs.iter().map(|x| x * x).sum::<f64>().sqrt() - t).abs();
    let equal = |xs: &[f64], target: f64| xs.iter().map(|x| (x - target).abs()).fold(0.0, f64::max);
    match *scheme {
        ReductionScheme::Star { m, input, .. } => {
            let js = (1..=m)
                .map(|p| joint_modulus(net, scheme, node(input), (&format!("B{p}"), 1)))
                .collect::<Result<Vec<_>>>()?;
            Ok(equal(&js, t / (m as f64).sqrt()))
        }
        ReductionScheme::Y { input, .. }
        | ReductionScheme::QQuarterFlux { input, .. }
        | ReductionScheme::YComplex { input, .. } => {
            let jb = joint_modulus(net, scheme, node(input), ("B", 1))?;
            let jc = joint_modulus(net, scheme, node(input), ("C", 1))?;
            Ok(quadrature(&[jb, jc]))
        }
        ReductionScheme::QHalfFlux { input, .. } | ReductionScheme::QFilm { input, .. } => {
            let jb = joint_modulus(net, scheme, node(input), ("B", 1))?;
            let jc = joint_modulus(net, scheme, node(input), ("C", 1))?;
            Ok(equal(&[jb, jc], t * FRAC_1_SQRT_2))
        }
        ReductionScheme::Film { sites, .. } => {
            let bond = joint_modulus(net, scheme, ("A", sites), ("B", sites)).unwrap_or(0.0);
            let a_end = net.site_index("A", sites)?;
            let mu = net
                .onsite()
                .find(|&(u, _)| u == a_end)
                .map(|(_, v)| v)
                .unwrap_or(0.0);
            Ok(quadrature(&[bond, mu]))
        }
        ReductionScheme::IferomHalf { input, arm, .. }
        | ReductionScheme::IferomInt { input, arm, .. } => {
            let ab = joint_modulus(net, scheme, node(input), ("B", 1))?;
            let ac = joint_modulus(net, scheme, node(input), ("C", 1))?;
            let bd = joint_modulus(net, scheme, ("B", arm), ("D", 1))?;
            let cd = joint_modulus(net, scheme, ("C", arm), ("D", 1))?;
            Ok(quadrature(&[ab, ac]).max(quadrature(&[bd, cd])))
        }
        ReductionScheme::IferomEqual { input, arm, .. } => {
            let js = [
                joint_modulus(net, scheme, node(input), ("B", 1))?,
                joint_modulus(net, scheme, node(input), ("C", 1))?,
                joint_modulus(net, scheme, ("B", arm), ("D", 1))?,
                joint_modulus(net, scheme, ("C", arm), ("D", 1))?,
            ];
            Ok(equal(&js, t * FRAC_1_SQRT_2))
        }
    }
}

/// Result of propagating one state two ways.
#[derive(Clone, Debug)]
pub struct OracleOutcome {
    /// `exp(-i H tau) psi0` in the site basis.
    pub full: StateVector,
    /// `U^dag exp(-i ~H_target tau) U psi0`, evolved independently on each
    /// connected group of virtual chains.
    pub via_virtual: StateVector,
    pub deviation: f64,
}

/// Evolves `psi0` directly and through the scheme's analytic virtual chains,
/// returning both results and their distance. Requires an exact decomposition.
pub fn virtual_evolution_oracle(
    net: &Network,
    scheme: &ReductionScheme,
    psi0: &StateVector,
    tau: f64,
) -> Result<OracleOutcome> {
    let dec = reduce_network(net, scheme)?;
    if dec.defect() > DECOUPLED_TOLERANCE {
        return Err(Error::NotDecoupled {
            scheme: scheme.name().to_string(),
            residual: dec.defect(),
        });
    }
    check_dim(net.dim(), psi0.dim())?;
    let full = eigendecompose(&net.hamiltonian())?.evolve(psi0, tau)?;

    let virt = dec.unitary.apply(psi0.amplitudes())?;
    let mut evolved = vec![ZERO; virt.len()];
    for group in connected_groups(&dec.target) {
        let k = group.len();
        let sub = Mat::from_fn(k, k, |i, j| dec.target.get(group[i], group[j]));
        let spec = eigendecompose(&HermitianMatrix::from_mat_unchecked(sub))?;
        let local: Vec<C64> = group.iter().map(|&g| virt[g]).collect();
        for (&g, v) in group.iter().zip(spec.propagate(&local, tau)?) {
            evolved[g] = v;
        }
    }
    let back = dec.unitary.apply_adjoint(&evolved)?;
    let via_virtual = StateVector::normalized(back)?;
    let deviation = full.distance(&via_virtual)?;
    Ok(OracleOutcome {
        full,
        via_virtual,
        deviation,
    })
}

/// Connected components of the nonzero pattern of `h`, each sorted.
fn connected_groups(h: &HermitianMatrix) -> Vec<Vec<usize>> {
    let n = h.dim();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if h.get(i, j) != ZERO {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}
