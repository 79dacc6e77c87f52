//! One-magnon XY spin networks as tight-binding networks.
//!
//! `H = sum J (S+_u S-_v + h.c.)` restricted to states with a single flipped
//! spin acts on the flip position like a hopping matrix with entries `+J`.
//! The mapped network therefore uses hopping `t = -J` on every bond so that
//! its matrix equals the one-magnon block entrywise. Matching conditions
//! carry over with `|J|` in place of `t`.

use crate::error::{Error, Result};
use crate::net::{ChainSpec, JointSpec, Network, SiteRef};

/// A spin chain with uniform exchange `coupling` between neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinChain {
    pub label: String,
    pub n_sites: usize,
    pub coupling: f64,
}

/// An exchange bond between two chain sites.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinJoint {
    pub a: SiteRef,
    pub b: SiteRef,
    pub coupling: f64,
}

/// XY spin network: chains joined by exchange bonds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpinNetworkSpec {
    pub chains: Vec<SpinChain>,
    pub joints: Vec<SpinJoint>,
}

impl SpinNetworkSpec {
    pub fn new(chains: Vec<SpinChain>, joints: Vec<SpinJoint>) -> Self {
        Self { chains, joints }
    }

    pub fn n_spins(&self) -> usize {
        self.chains.iter().map(|c| c.n_sites).sum()
    }
}

/// Maps the one-magnon sector of `spec` onto a tight-binding network with
/// `t = -J` on every bond.
pub fn magnon_to_tbn(spec: &SpinNetworkSpec) -> Result<Network> {
    let chains = spec
        .chains
        .iter()
        .map(|c| {
            if c.n_sites > 1 && c.coupling == 0.0 {
                return Err(Error::InvalidChain {
                    label: c.label.clone(),
                    reason: "exchange coupling must be nonzero".into(),
                });
            }
            let hopping = if c.n_sites > 1 { -c.coupling } else { 1.0 };
            Ok(ChainSpec::new(c.label.clone(), c.n_sites).with_hopping(hopping))
        })
        .collect::<Result<Vec<_>>>()?;
    let joints = spec
        .joints
        .iter()
        .map(|j| JointSpec::real(j.a.clone(), j.b.clone(), -j.coupling))
        .collect();
    Network::build(chains, joints)
}
