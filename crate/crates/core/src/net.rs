//! Tight-binding networks: chains of sites joined at nodes, with Peierls link
//! phases, and the one-particle Hamiltonian they induce.
//!
//! Sites are addressed either by a [`SiteRef`] (chain label plus 1-based local
//! index) or by a global index. Global indices enumerate chains in declaration
//! order and sites in ascending local order, starting at 0.
//!
//! Every bond `(u, v)` with amplitude `A` and link phase `Phi(u -> v)` enters the
//! Hamiltonian as `H[u][v] = -A exp(i Phi(u -> v))`, `H[v][u] = conj(H[u][v])`.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;

/// A homogeneous linear chain of `n_sites` sites with nearest-neighbour hopping.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSpec {
    pub label: String,
    pub n_sites: usize,
    /// Hopping magnitude on every internal bond, in units of `t`.
    pub hopping: f64,
}

impl ChainSpec {
    pub fn new(label: impl Into<String>, n_sites: usize) -> Self {
        Self {
            label: label.into(),
            n_sites,
            hopping: 1.0,
        }
    }

    pub fn with_hopping(mut self, hopping: f64) -> Self {
        self.hopping = hopping;
        self
    }
}

/// A site named by chain label and 1-based local index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteRef {
    pub chain: String,
    pub site: usize,
}

impl SiteRef {
    pub fn new(chain: impl Into<String>, site: usize) -> Self {
        Self {
            chain: chain.into(),
            site,
        }
    }
}

impl fmt::Display for SiteRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.chain, self.site)
    }
}

impl FromStr for SiteRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (chain, site) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("expected `label:index`, got `{s}`")))?;
        let site = site
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidParameter(format!("bad site index in `{s}`")))?;
        Ok(SiteRef::new(chain.trim(), site))
    }
}

/// A hopping term between two chain sites, `-amplitude a_a^dag a_b + H.c.`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub a: SiteRef,
    pub b: SiteRef,
    pub amplitude: C64,
}

impl JointSpec {
    pub fn new(a: SiteRef, b: SiteRef, amplitude: C64) -> Self {
        Self { a, b, amplitude }
    }

    pub fn real(a: SiteRef, b: SiteRef, amplitude: f64) -> Self {
        Self::new(a, b, C64::new(amplitude, 0.0))
    }
}

/// Peierls phase on the directed link `from -> to`; the reverse link carries the
/// negated phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkPhase {
    pub from: usize,
    pub to: usize,
    pub phase: f64,
}

/// How a loop flux is distributed over the links of its loop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Gauge {
    /// Whole loop phase on the loop's lexicographically first link.
    #[default]
    Single,
    /// Loop phase split evenly over all links of the loop.
    Uniform,
}

impl FromStr for Gauge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "single" => Ok(Gauge::Single),
            "uniform" => Ok(Gauge::Uniform),
            other => Err(Error::InvalidParameter(format!(
                "unknown gauge `{other}` (expected `single` or `uniform`)"
            ))),
        }
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gauge::Single => "single",
            Gauge::Uniform => "uniform",
        })
    }
}

/// A bond of the network in its declared orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub u: usize,
    pub v: usize,
    /// Hopping amplitude for `u <- v` before the link phase is applied.
    pub amplitude: C64,
}

/// A closed directed cycle of links, given as global site pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Loop {
    links: Vec<(usize, usize)>,
}

impl Loop {
    /// Validates that the links form a simple closed cycle of length >= 3.
    pub fn new(links: Vec<(usize, usize)>) -> Result<Self> {
        if links.len() < 3 {
            return Err(Error::InvalidLoop(format!(
                "a loop needs at least 3 links, got {}",
                links.len()
            )));
        }
        for w in 0..links.len() {
            let (_, to) = links[w];
            let (next_from, _) = links[(w + 1) % links.len()];
            if to != next_from {
                return Err(Error::InvalidLoop(format!(
                    "link {} ends at site {to} but the next link starts at {next_from}",
                    w + 1
                )));
            }
            if links[w].0 == links[w].1 {
                return Err(Error::InvalidLoop(format!("link {} is a self-loop", w + 1)));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for &(from, _) in &links {
            if !seen.insert(from) {
                return Err(Error::InvalidLoop(format!("site {from} is visited twice")));
            }
        }
        Ok(Self { links })
    }

    /// Closed loop through the given sites in order; the last site links back to the first.
    pub fn through(sites: &[usize]) -> Result<Self> {
        let n = sites.len();
        Self::new((0..n).map(|i| (sites[i], sites[(i + 1) % n])).collect())
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }
}

/// A tight-binding network with its link phases and on-site potentials.
#[derive(Clone, Debug)]
pub struct Network {
    chains: Vec<ChainSpec>,
    joints: Vec<JointSpec>,
    offsets: Vec<usize>,
    n_sites: usize,
    bonds: Vec<Bond>,
    bond_lookup: HashMap<(usize, usize), usize>,
    /// Phase on the `min -> max` orientation of each link carrying one.
    phases: BTreeMap<(usize, usize), f64>,
    onsite: BTreeMap<usize, f64>,
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn unordered(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl Network {
    /// Assembles a network from chains and joints.
    ///
    /// Fails on duplicate or malformed labels, empty chains, vanishing or
    /// non-finite hopping, dangling joint endpoints, zero joint amplitudes and
    /// bonds declared twice (including a joint that duplicates a chain bond).
    pub fn build(chains: Vec<ChainSpec>, joints: Vec<JointSpec>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(chains.len());
        let mut n_sites = 0;
        for (i, c) in chains.iter().enumerate() {
            if !valid_label(&c.label) {
                return Err(Error::InvalidChain {
                    label: c.label.clone(),
                    reason: "labels must be non-empty and use only [A-Za-z0-9_-]".into(),
                });
            }
            if chains[..i].iter().any(|o| o.label == c.label) {
                return Err(Error::DuplicateLabel(c.label.clone()));
            }
            if c.n_sites == 0 {
                return Err(Error::InvalidChain {
                    label: c.label.clone(),
                    reason: "a chain needs at least one site".into(),
                });
            }
            if !c.hopping.is_finite() || c.hopping == 0.0 {
                return Err(Error::InvalidChain {
                    label: c.label.clone(),
                    reason: format!("hopping must be finite and nonzero, got {}", c.hopping),
                });
            }
            offsets.push(n_sites);
            n_sites += c.n_sites;
        }

        let mut net = Network {
            chains,
            joints: Vec::new(),
            offsets,
            n_sites,
            bonds: Vec::new(),
            bond_lookup: HashMap::new(),
            phases: BTreeMap::new(),
            onsite: BTreeMap::new(),
        };

        for ci in 0..net.chains.len() {
            let off = net.offsets[ci];
            let t = net.chains[ci].hopping;
            for j in 0..net.chains[ci].n_sites.saturating_sub(1) {
                net.push_bond(off + j, off + j + 1, C64::new(t, 0.0))?;
            }
        }
        for joint in joints {
            if joint.amplitude == C64::new(0.0, 0.0) || !joint.amplitude.is_finite() {
                return Err(Error::ZeroAmplitude(format!("{}-{}", joint.a, joint.b)));
            }
            let u = net.site_index(&joint.a.chain, joint.a.site)?;
            let v = net.site_index(&joint.b.chain, joint.b.site)?;
            if u == v {
                return Err(Error::DuplicateBond(u, v));
            }
            net.push_bond(u, v, joint.amplitude)?;
            net.joints.push(joint);
        }
        Ok(net)
    }

    fn push_bond(&mut self, u: usize, v: usize, amplitude: C64) -> Result<()> {
        let key = unordered(u, v);
        if self.bond_lookup.contains_key(&key) {
            return Err(Error::DuplicateBond(key.0, key.1));
        }
        self.bond_lookup.insert(key, self.bonds.len());
        self.bonds.push(Bond { u, v, amplitude });
        Ok(())
    }

    pub fn chains(&self) -> &[ChainSpec] {
        &self.chains
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// Number of sites (the Hilbert-space dimension).
    pub fn dim(&self) -> usize {
        self.n_sites
    }

    pub fn chain(&self, label: &str) -> Result<&ChainSpec> {
        self.chains
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| Error::UnknownChain(label.to_string()))
    }

    fn chain_position(&self, label: &str) -> Result<usize> {
        self.chains
            .iter()
            .position(|c| c.label == label)
            .ok_or_else(|| Error::UnknownChain(label.to_string()))
    }

    /// Global index of the 1-based `local` site of chain `label`.
    pub fn site_index(&self, label: &str, local: usize) -> Result<usize> {
        let ci = self.chain_position(label)?;
        let len = self.chains[ci].n_sites;
        if local == 0 || local > len {
            return Err(Error::SiteOutOfRange {
                chain: label.to_string(),
                index: local,
                len,
            });
        }
        Ok(self.offsets[ci] + local - 1)
    }

    pub fn site(&self, site: &SiteRef) -> Result<usize> {
        self.site_index(&site.chain, site.site)
    }

    /// Inverse of [`Network::site_index`].
    pub fn site_label(&self, global: usize) -> Result<SiteRef> {
        if global >= self.n_sites {
            return Err(Error::GlobalSiteOutOfRange(global));
        }
        let ci = match self.offsets.binary_search(&global) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        Ok(SiteRef::new(
            self.chains[ci].label.clone(),
            global - self.offsets[ci] + 1,
        ))
    }

    /// Global indices of all sites of a chain, in local order.
    pub fn chain_sites(&self, label: &str) -> Result<Vec<usize>> {
        let ci = self.chain_position(label)?;
        let off = self.offsets[ci];
        Ok((off..off + self.chains[ci].n_sites).collect())
    }

    /// Bond amplitude in the `u <- v` orientation, without its link phase.
    pub fn bond_amplitude(&self, u: usize, v: usize) -> Option<C64> {
        let b = self.bonds[*self.bond_lookup.get(&unordered(u, v))?];
        Some(if b.u == u { b.amplitude } else { b.amplitude.conj() })
    }

    pub fn has_bond(&self, u: usize, v: usize) -> bool {
        self.bond_lookup.contains_key(&unordered(u, v))
    }

    /// Peierls phase on the directed link `from -> to` (zero when none is set).
    pub fn link_phase(&self, from: usize, to: usize) -> f64 {
        if from < to {
            self.phases.get(&(from, to)).copied().unwrap_or(0.0)
        } else {
            -self.phases.get(&(to, from)).copied().unwrap_or(0.0)
        }
    }

    /// All nonzero link phases, each reported once on its `min -> max` orientation.
    pub fn link_phases(&self) -> Vec<LinkPhase> {
        self.phases
            .iter()
            .filter(|(_, &p)| p != 0.0)
            .map(|(&(from, to), &phase)| LinkPhase { from, to, phase })
            .collect()
    }

    /// Adds `delta` to the phase of an existing link.
    pub fn add_link_phase(&mut self, from: usize, to: usize, delta: f64) -> Result<()> {
        if !self.has_bond(from, to) {
            return Err(Error::InvalidLoop(format!(
                "no bond between sites {from} and {to}"
            )));
        }
        let (key, d) = if from < to {
            ((from, to), delta)
        } else {
            ((to, from), -delta)
        };
        *self.phases.entry(key).or_insert(0.0) += d;
        Ok(())
    }

    /// Sum of directed link phases along a sequence of sites.
    pub fn path_phase(&self, sites: &[usize]) -> f64 {
        sites.windows(2).map(|w| self.link_phase(w[0], w[1])).sum()
    }

    /// Sum of directed link phases around a loop.
    pub fn loop_phase(&self, lp: &Loop) -> f64 {
        lp.links().iter().map(|&(u, v)| self.link_phase(u, v)).sum()
    }

    /// Threads `phi` flux quanta through `lp`, adding `2 pi phi` to the loop
    /// phase. Only link phases change; bond magnitudes are untouched.
    pub fn thread_loop_flux(&self, lp: &Loop, phi: f64, gauge: Gauge) -> Result<Network> {
        if !phi.is_finite() {
            return Err(Error::InvalidParameter(format!("flux must be finite, got {phi}")));
        }
        for &(u, v) in lp.links() {
            if u >= self.n_sites || v >= self.n_sites || !self.has_bond(u, v) {
                return Err(Error::InvalidLoop(format!(
                    "link {u} -> {v} is not a bond of the network"
                )));
            }
        }
        let total = 2.0 * PI * phi;
        let mut out = self.clone();
        match gauge {
            Gauge::Single => {
                let &(u, v) = lp.links().iter().min().expect("loop is non-empty");
                out.add_link_phase(u, v, total)?;
            }
            Gauge::Uniform => {
                let share = total / lp.len() as f64;
                for &(u, v) in lp.links() {
                    out.add_link_phase(u, v, share)?;
                }
            }
        }
        Ok(out)
    }

    /// Adds an on-site potential `value * n_site`.
    pub fn with_onsite(mut self, site: &SiteRef, value: f64) -> Result<Network> {
        let u = self.site(site)?;
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "on-site potential must be finite, got {value}"
            )));
        }
        *self.onsite.entry(u).or_insert(0.0) += value;
        Ok(self)
    }

    pub fn onsite(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.onsite.iter().map(|(&u, &v)| (u, v))
    }

    /// Hamiltonian matrix element `H[u][v]` including the link phase.
    pub fn hopping_entry(&self, u: usize, v: usize) -> Option<C64> {
        let a = self.bond_amplitude(u, v)?;
        Some(-a * C64::from_polar(1.0, self.link_phase(u, v)))
    }

    /// The one-particle Hamiltonian.
    pub fn hamiltonian(&self) -> HermitianMatrix {
        let n = self.n_sites;
        let mut h = Mat::<C64>::zeros(n, n);
        for b in &self.bonds {
            let entry = -b.amplitude * C64::from_polar(1.0, self.link_phase(b.u, b.v));
            h[(b.u, b.v)] = entry;
            h[(b.v, b.u)] = entry.conj();
        }
        for (&u, &mu) in &self.onsite {
            h[(u, u)] = C64::new(mu, 0.0);
        }
        HermitianMatrix::from_mat_unchecked(h)
    }

    /// Neighbours of a site in the bond graph.
    pub fn neighbours(&self, u: usize) -> Vec<usize> {
        self.bonds
            .iter()
            .filter_map(|b| {
                if b.u == u {
                    Some(b.v)
                } else if b.v == u {
                    Some(b.u)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Number of bonds on the shortest path between two sites, if connected.
    pub fn graph_distance(&self, from: usize, to: usize) -> Option<usize> {
        if from >= self.n_sites || to >= self.n_sites {
            return None;
        }
        let mut adj = vec![Vec::new(); self.n_sites];
        for b in &self.bonds {
            adj[b.u].push(b.v);
            adj[b.v].push(b.u);
        }
        let mut dist = vec![usize::MAX; self.n_sites];
        dist[from] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            if u == to {
                return Some(dist[u]);
            }
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn single_bond_matrix() {
        let net = Network::build(vec![ChainSpec::new("A", 2)], vec![]).unwrap();
        let h = net.hamiltonian();
        assert_eq!(h.to_rows(), vec![vec![c(0.0), c(-1.0)], vec![c(-1.0), c(0.0)]]);
    }

    #[test]
    fn site_indexing_is_a_bijection() {
        let net = Network::build(
            vec![ChainSpec::new("A", 50), ChainSpec::new("B", 7)],
            vec![],
        )
        .unwrap();
        assert_eq!(net.site_index("A", 1).unwrap(), 0);
        assert_eq!(net.site_index("B", 1).unwrap(), 50);
        for g in 0..net.dim() {
            let s = net.site_label(g).unwrap();
            assert_eq!(net.site(&s).unwrap(), g);
        }
        assert!(matches!(
            net.site_index("B", 8),
            Err(Error::SiteOutOfRange { .. })
        ));
        assert!(matches!(net.site_index("Z", 1), Err(Error::UnknownChain(_))));
        assert!(net.site_label(57).is_err());
    }

    #[test]
    fn build_errors() {
        let dup = Network::build(vec![ChainSpec::new("A", 2), ChainSpec::new("A", 3)], vec![]);
        assert!(matches!(dup, Err(Error::DuplicateLabel(_))));

        let dangling = Network::build(
            vec![ChainSpec::new("A", 2)],
            vec![JointSpec::real(SiteRef::new("A", 2), SiteRef::new("B", 1), 1.0)],
        );
        assert!(matches!(dangling, Err(Error::UnknownChain(_))));

        let zero = Network::build(
            vec![ChainSpec::new("A", 2), ChainSpec::new("B", 2)],
            vec![JointSpec::real(SiteRef::new("A", 2), SiteRef::new("B", 1), 0.0)],
        );
        assert!(matches!(zero, Err(Error::ZeroAmplitude(_))));

        let twice = Network::build(
            vec![ChainSpec::new("A", 2), ChainSpec::new("B", 2)],
            vec![
                JointSpec::real(SiteRef::new("A", 2), SiteRef::new("B", 1), 1.0),
                JointSpec::real(SiteRef::new("B", 1), SiteRef::new("A", 2), 0.5),
            ],
        );
        assert!(matches!(twice, Err(Error::DuplicateBond(..))));

        let shadow = Network::build(
            vec![ChainSpec::new("A", 3)],
            vec![JointSpec::real(SiteRef::new("A", 1), SiteRef::new("A", 2), 1.0)],
        );
        assert!(matches!(shadow, Err(Error::DuplicateBond(..))));

        let empty = Network::build(vec![ChainSpec::new("A", 0)], vec![]);
        assert!(matches!(empty, Err(Error::InvalidChain { .. })));
    }

    #[test]
    fn complex_joint_orientation() {
        let amp = C64::new(0.3, 0.4);
        let net = Network::build(
            vec![ChainSpec::new("A", 1), ChainSpec::new("B", 1)],
            vec![JointSpec::new(SiteRef::new("B", 1), SiteRef::new("A", 1), amp)],
        )
        .unwrap();
        let h = net.hamiltonian();
        assert_eq!(h.get(1, 0), -amp);
        assert_eq!(h.get(0, 1), -amp.conj());
    }

    #[test]
    fn loop_validation() {
        assert!(Loop::new(vec![(0, 1), (1, 0)]).is_err());
        assert!(Loop::new(vec![(0, 1), (1, 2), (3, 0)]).is_err());
        assert!(Loop::new(vec![(0, 1), (1, 2), (2, 0)]).is_ok());
        assert!(Loop::new(vec![(0, 1), (1, 2), (2, 1), (1, 0)]).is_err());

        let ring = Network::build(
            vec![ChainSpec::new("R", 4)],
            vec![JointSpec::real(SiteRef::new("R", 4), SiteRef::new("R", 1), 1.0)],
        )
        .unwrap();
        let open = Loop::through(&[0, 1, 3]).unwrap();
        assert!(matches!(
            ring.thread_loop_flux(&open, 0.1, Gauge::Single),
            Err(Error::InvalidLoop(_))
        ));
    }

    #[test]
    fn flux_sets_loop_sum_and_keeps_moduli() {
        let ring = Network::build(
            vec![ChainSpec::new("R", 5)],
            vec![JointSpec::real(SiteRef::new("R", 5), SiteRef::new("R", 1), 1.0)],
        )
        .unwrap();
        let lp = Loop::through(&[0, 1, 2, 3, 4]).unwrap();
        for gauge in [Gauge::Single, Gauge::Uniform] {
            let threaded = ring.thread_loop_flux(&lp, 0.25, gauge).unwrap();
            assert!((threaded.loop_phase(&lp) - PI / 2.0).abs() < 1e-14);
            let h0 = ring.hamiltonian();
            let h1 = threaded.hamiltonian();
            for i in 0..5 {
                for j in 0..5 {
                    assert!((h0.get(i, j).norm() - h1.get(i, j).norm()).abs() < 1e-15);
                }
            }
        }
        let single = ring.thread_loop_flux(&lp, 0.25, Gauge::Single).unwrap();
        assert_eq!(single.link_phases().len(), 1);
        assert_eq!(single.link_phases()[0].from, 0);
        assert!(ring.thread_loop_flux(&lp, 0.0, Gauge::Single).unwrap().hamiltonian().is_real());
    }

    #[test]
    fn graph_distance_bfs() {
        let net = Network::build(
            vec![ChainSpec::new("A", 5), ChainSpec::new("B", 3)],
            vec![JointSpec::real(SiteRef::new("A", 5), SiteRef::new("B", 1), 1.0)],
        )
        .unwrap();
        assert_eq!(net.graph_distance(0, 7), Some(7));
        assert_eq!(net.graph_distance(3, 3), Some(0));
    }
}
