//! Builders for the standard network shapes: star and Y beams, the Q-shaped
//! ring, the two-arm interferometer, and the transmission-reflection film.
//!
//! All builders use unit intra-chain hopping. Chain labels are fixed per shape
//! (`A` input, `B`/`C` arms, `D` output, `B1..Bm` for star arms) so that the
//! reduction schemes can find them.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::net::{ChainSpec, JointSpec, Loop, Network, SiteRef};

fn positive(name: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter(format!("{name} must be at least 1")));
    }
    Ok(())
}

/// Input chain `A` (length `input_len`) whose last site couples with `t_n` to
/// the first site of `m` arms `B1..Bm` of length `arm_len`.
pub fn star(m: usize, input_len: usize, arm_len: usize, t_n: f64) -> Result<Network> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("a star needs m >= 2 arms, got {m}")));
    }
    positive("input_len", input_len)?;
    positive("arm_len", arm_len)?;
    let mut chains = vec![ChainSpec::new("A", input_len)];
    let mut joints = Vec::new();
    for p in 1..=m {
        let label = format!("B{p}");
        chains.push(ChainSpec::new(label.clone(), arm_len));
        joints.push(JointSpec::real(
            SiteRef::new("A", input_len),
            SiteRef::new(label, 1),
            t_n,
        ));
    }
    Network::build(chains, joints)
}

/// Y-shaped beam: input `A` joined to arms `B` and `C` with couplings `t_nb`, `t_nc`.
/// A zero coupling leaves that arm disconnected.
pub fn ybeam(input_len: usize, arm_b: usize, arm_c: usize, t_nb: f64, t_nc: f64) -> Result<Network> {
    positive("input_len", input_len)?;
    positive("arm_b", arm_b)?;
    positive("arm_c", arm_c)?;
    let chains = vec![
        ChainSpec::new("A", input_len),
        ChainSpec::new("B", arm_b),
        ChainSpec::new("C", arm_c),
    ];
    let mut joints = Vec::new();
    if t_nb != 0.0 {
        joints.push(JointSpec::real(SiteRef::new("A", input_len), SiteRef::new("B", 1), t_nb));
    }
    if t_nc != 0.0 {
        joints.push(JointSpec::real(SiteRef::new("A", input_len), SiteRef::new("C", 1), t_nc));
    }
    Network::build(chains, joints)
}

/// Q-shaped network: a Y beam whose equal-length arms are closed into a ring by
/// a unit bond between their last sites.
pub fn qring(input_len: usize, arm_len: usize, t_nb: f64, t_nc: f64) -> Result<Network> {
    positive("input_len", input_len)?;
    positive("arm_len", arm_len)?;
    let chains = vec![
        ChainSpec::new("A", input_len),
        ChainSpec::new("B", arm_len),
        ChainSpec::new("C", arm_len),
    ];
    let joints = vec![
        JointSpec::real(SiteRef::new("A", input_len), SiteRef::new("B", 1), t_nb),
        JointSpec::real(SiteRef::new("A", input_len), SiteRef::new("C", 1), t_nc),
        JointSpec::real(SiteRef::new("B", arm_len), SiteRef::new("C", arm_len), 1.0),
    ];
    Network::build(chains, joints)
}

/// The ring loop of a Q-shaped network: `A:M > B:1 .. B:N > C:N .. C:1 > A:M`.
pub fn qring_loop(net: &Network) -> Result<Loop> {
    let node = net.site_index("A", net.chain("A")?.n_sites)?;
    let mut sites = vec![node];
    sites.extend(net.chain_sites("B")?);
    sites.extend(net.chain_sites("C")?.into_iter().rev());
    Loop::through(&sites)
}

/// Couplings of the interferometer's four joints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RingCouplings {
    pub ab: f64,
    pub ac: f64,
    pub bd: f64,
    pub cd: f64,
}

impl RingCouplings {
    pub fn uniform(value: f64) -> Self {
        Self { ab: value, ac: value, bd: value, cd: value }
    }
}

/// Interferometer: input `A`, ring arms `B` (length `arm_b`) and `C` (length
/// `arm_c`), output `D`. `A`'s last site feeds the arms' first sites; the arms'
/// last sites feed `D`'s first site.
pub fn interferometer(
    input_len: usize,
    arm_b: usize,
    arm_c: usize,
    output_len: usize,
    couplings: RingCouplings,
) -> Result<Network> {
    positive("input_len", input_len)?;
    positive("arm_b", arm_b)?;
    positive("arm_c", arm_c)?;
    positive("output_len", output_len)?;
    let chains = vec![
        ChainSpec::new("A", input_len),
        ChainSpec::new("B", arm_b),
        ChainSpec::new("C", arm_c),
        ChainSpec::new("D", output_len),
    ];
    let mut joints = Vec::new();
    let mut push = |a: SiteRef, b: SiteRef, t: f64| {
        if t != 0.0 {
            joints.push(JointSpec::real(a, b, t));
        }
    };
    push(SiteRef::new("A", input_len), SiteRef::new("B", 1), couplings.ab);
    push(SiteRef::new("A", input_len), SiteRef::new("C", 1), couplings.ac);
    push(SiteRef::new("B", arm_b), SiteRef::new("D", 1), couplings.bd);
    push(SiteRef::new("C", arm_c), SiteRef::new("D", 1), couplings.cd);
    Network::build(chains, joints)
}

/// The ring loop of an interferometer: `A:M > B:1 .. B:N > D:1 > C:N .. C:1 > A:M`.
pub fn interferometer_loop(net: &Network) -> Result<Loop> {
    let node = net.site_index("A", net.chain("A")?.n_sites)?;
    let mut sites = vec![node];
    sites.extend(net.chain_sites("B")?);
    sites.push(net.site_index("D", 1)?);
    sites.extend(net.chain_sites("C")?.into_iter().rev());
    Loop::through(&sites)
}

/// Y beam with the complex joint couplings `t e^{-i Phi/2} cos(Phi/2)` and
/// `i t e^{-i Phi/2} sin(Phi/2)` that the flux-threaded interferometer reduces to.
pub fn ycomplex(input_len: usize, arm_len: usize, phi_total: f64) -> Result<Network> {
    positive("input_len", input_len)?;
    positive("arm_len", arm_len)?;
    let half = phi_total / 2.0;
    let pre = C64::from_polar(1.0, -half);
    let t_ab = pre * half.cos();
    let t_ac = C64::i() * pre * half.sin();
    let chains = vec![
        ChainSpec::new("A", input_len),
        ChainSpec::new("B", arm_len),
        ChainSpec::new("C", arm_len),
    ];
    let mut joints = Vec::new();
    if t_ab.norm() > 0.0 {
        joints.push(JointSpec::new(SiteRef::new("A", input_len), SiteRef::new("B", 1), t_ab));
    }
    if t_ac.norm() > 0.0 {
        joints.push(JointSpec::new(SiteRef::new("A", input_len), SiteRef::new("C", 1), t_ac));
    }
    Network::build(chains, joints)
}

/// Transmission-reflection film: two `n`-site chains `A`, `B` whose last sites
/// share a bond `t sin(Phi)` and carry potentials `-t cos(Phi)` (on `A`) and
/// `+t cos(Phi)` (on `B`).
pub fn film_network(n: usize, phi: f64) -> Result<Network> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("film chains need n >= 2, got {n}")));
    }
    let chains = vec![ChainSpec::new("A", n), ChainSpec::new("B", n)];
    let bond = phi.sin();
    let joints = if bond != 0.0 {
        vec![JointSpec::real(SiteRef::new("A", n), SiteRef::new("B", n), bond)]
    } else {
        Vec::new()
    };
    let mu = phi.cos();
    let net = Network::build(chains, joints)?;
    let net = if mu != 0.0 {
        net.with_onsite(&SiteRef::new("A", n), -mu)?
            .with_onsite(&SiteRef::new("B", n), mu)?
    } else {
        net
    };
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Gauge;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    #[test]
    fn ybeam_with_matching_couplings() {
        let net = ybeam(2, 1, 1, FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap();
        let h = net.hamiltonian();
        assert_eq!(net.dim(), 4);
        assert!((h.get(1, 2).re + FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((h.get(1, 3).re + FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(h.get(0, 1).re, -1.0);
    }

    #[test]
    fn qring_topology_and_loop() {
        let net = qring(3, 4, 0.6, 0.8).unwrap();
        assert_eq!(net.dim(), 11);
        let lp = qring_loop(&net).unwrap();
        assert_eq!(lp.len(), 9);
        let b4 = net.site_index("B", 4).unwrap();
        let c4 = net.site_index("C", 4).unwrap();
        assert!(net.has_bond(b4, c4));
        let threaded = net.thread_loop_flux(&lp, 0.25, Gauge::Uniform).unwrap();
        assert!((threaded.loop_phase(&lp) - FRAC_PI_2).abs() < 1e-13);
    }

    #[test]
    fn film_limits() {
        let open = film_network(4, FRAC_PI_2).unwrap();
        let h = open.hamiltonian();
        let a4 = open.site_index("A", 4).unwrap();
        let b4 = open.site_index("B", 4).unwrap();
        assert!((h.get(a4, b4).re + 1.0).abs() < 1e-15);
        assert!(h.get(a4, a4).norm() < 1e-15);

        let shut = film_network(4, 0.0).unwrap();
        let h = shut.hamiltonian();
        assert_eq!(h.get(a4, b4).norm(), 0.0);
        assert_eq!(h.get(a4, a4).re, -1.0);
        assert_eq!(h.get(b4, b4).re, 1.0);

        for phi in [0.3, 1.1, 2.0, PI] {
            let net = film_network(3, phi).unwrap();
            let h = net.hamiltonian();
            let (a, b) = (net.site_index("A", 3).unwrap(), net.site_index("B", 3).unwrap());
            let mu = h.get(b, b).re;
            let tt = h.get(a, b).norm();
            assert!((mu * mu + tt * tt - 1.0).abs() < 1e-14);
        }
        assert!(film_network(1, 0.2).is_err());
    }

    #[test]
    fn interferometer_loop_closes() {
        let net = interferometer(3, 3, 5, 2, RingCouplings::uniform(FRAC_1_SQRT_2)).unwrap();
        let lp = interferometer_loop(&net).unwrap();
        assert_eq!(lp.len(), 3 + 5 + 2);
    }
}
