//! Single-particle quantum dynamics on tight-binding networks.
//!
//! Networks are assembled from labeled chains and joints ([`net`]), may carry
//! magnetic flux through their loops, and are evolved exactly from a dense
//! eigendecomposition ([`dynamics`]). [`reduce`] rewrites a network in a rotated
//! site basis where it splits into independent virtual chains and measures how
//! well that split holds. [`observe`] computes reflection, concurrence,
//! interference and flux-response observables, and [`spinmap`] maps
//! one-magnon XY spin networks onto the same machinery.

pub mod dynamics;
pub mod error;
pub mod matrix;
pub mod net;
pub mod netfile;
pub mod observe;
pub mod reduce;
pub mod spinmap;
pub mod topology;

pub use num_complex::Complex64 as C64;

pub use dynamics::{
    eigendecompose, evolve, gaussian_packet, half_width, site_probability, track_packet,
    Evolution, PacketSpec, PacketTrack, Spectrum, StateVector,
};
pub use error::{Error, Result};
pub use matrix::HermitianMatrix;
pub use net::{Bond, ChainSpec, Gauge, JointSpec, LinkPhase, Loop, Network, SiteRef};
pub use netfile::{describe, parse_network, write_network, NetworkDescription};
pub use spinmap::{magnon_to_tbn, SpinChain, SpinJoint, SpinNetworkSpec};
pub use topology::film_network;
pub use reduce::{
    build_unitary, conjugate, coupling_residual, matching_residual, reduce_network,
    virtual_evolution_oracle, Decomposition, ReductionScheme, SiteUnitary, VirtualSite,
};
