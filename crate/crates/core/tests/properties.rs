use std::f64::consts::{FRAC_1_SQRT_2, PI};

use blochnet::topology::{self, RingCouplings};
use blochnet::{
    eigendecompose, reduce_network, ChainSpec, Gauge, JointSpec, Network, ReductionScheme,
    SiteRef, StateVector, C64,
};
use proptest::prelude::*;

fn sorted_spectrum(net: &Network) -> Vec<f64> {
    let mut e = eigendecompose(&net.hamiltonian()).unwrap().eigenvalues().to_vec();
    e.sort_by(f64::total_cmp);
    e
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A Q ring with joints `t_nb`, `t_nc` threaded by flux `phi`.
fn flux_ring(input: usize, arm: usize, t_nb: f64, t_nc: f64, phi: f64, gauge: Gauge) -> Network {
    let net = topology::qring(input, arm, t_nb, t_nc).unwrap();
    let lp = topology::qring_loop(&net).unwrap();
    net.thread_loop_flux(&lp, phi, gauge).unwrap()
}

fn ring_strategy() -> impl Strategy<Value = (usize, usize, f64, f64)> {
    (1usize..8, 1usize..8, 0.2f64..1.5, 0.2f64..1.5)
}

fn state_strategy(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_filter_map("zero state", |v| {
            StateVector::normalized(v.into_iter().map(|(a, b)| C64::new(a, b)).collect()).ok()
        })
}

/// Chains joined in a tree by joints with random complex amplitudes.
fn network_strategy() -> impl Strategy<Value = Network> {
    (
        prop::collection::vec((1usize..12, 0.3f64..1.7), 1..5),
        prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>(), 0.2f64..1.5, -PI..PI), 5),
    )
        .prop_filter_map("invalid network", |(chains, picks)| {
            let specs: Vec<ChainSpec> = chains
                .iter()
                .enumerate()
                .map(|(i, &(n, h))| ChainSpec::new(format!("C{i}"), n).with_hopping(h))
                .collect();
            let mut joints = Vec::new();
            for (c, (pa, pb, r, th)) in (1..specs.len()).zip(&picks) {
                let other = pa.index(c);
                joints.push(JointSpec::new(
                    SiteRef::new(format!("C{other}"), pb.index(specs[other].n_sites) + 1),
                    SiteRef::new(format!("C{c}"), pb.index(specs[c].n_sites) + 1),
                    C64::from_polar(*r, *th),
                ));
            }
            Network::build(specs, joints).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hamiltonian_is_hermitian(net in network_strategy()) {
        let h = net.hamiltonian();
        prop_assert!(h.hermiticity_defect() <= 1e-14 * h.max_abs().max(1.0));
    }

    #[test]
    fn flux_keeps_moduli((m, n, b, c) in ring_strategy(), phi in -2.0f64..2.0) {
        let plain = topology::qring(m, n, b, c).unwrap();
        let threaded = flux_ring(m, n, b, c, phi, Gauge::Single);
        let (h0, h1) = (plain.hamiltonian(), threaded.hamiltonian());
        for u in 0..h0.dim() {
            for v in 0..h0.dim() {
                prop_assert!((h0.get(u, v).norm() - h1.get(u, v).norm()).abs() < 1e-14);
            }
        }
        let lp = topology::qring_loop(&plain).unwrap();
        let sum = threaded.loop_phase(&lp);
        let want = 2.0 * PI * phi;
        let turns = (sum - want) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-12);
    }

    #[test]
    fn gauges_share_spectrum_and_site_probabilities(
        (m, n, b, c) in ring_strategy(),
        phi in prop::sample::select(vec![0.0, 0.25, 0.37, 0.5]),
        tau in 0.0f64..20.0,
    ) {
        let single = flux_ring(m, n, b, c, phi, Gauge::Single);
        let uniform = flux_ring(m, n, b, c, phi, Gauge::Uniform);
        prop_assert!(max_diff(&sorted_spectrum(&single), &sorted_spectrum(&uniform)) <= 1e-12);
        // Site-to-site transition probabilities are invariant under any
        // diagonal gauge transformation.
        let s1 = eigendecompose(&single.hamiltonian()).unwrap();
        let s2 = eigendecompose(&uniform.hamiltonian()).unwrap();
        for start in [0, single.dim() - 1] {
            let psi = StateVector::basis(single.dim(), start).unwrap();
            let p1 = s1.evolve(&psi, tau).unwrap().probabilities();
            let p2 = s2.evolve(&psi, tau).unwrap().probabilities();
            prop_assert!(max_diff(&p1, &p2) <= 1e-10);
        }
    }

    #[test]
    fn flux_is_periodic((m, n, b, c) in ring_strategy(), phi in -2.0f64..1.0) {
        let a = flux_ring(m, n, b, c, phi, Gauge::Uniform);
        let z = flux_ring(m, n, b, c, phi + 1.0, Gauge::Uniform);
        prop_assert!(max_diff(&sorted_spectrum(&a), &sorted_spectrum(&z)) <= 1e-12);
    }

    #[test]
    fn evolution_is_unitary_and_composes(
        (net, psi) in network_strategy().prop_flat_map(|net| {
            let n = net.dim();
            (Just(net), state_strategy(n))
        }),
        t1 in -100.0f64..100.0,
        t2 in -100.0f64..100.0,
    ) {
        let h = net.hamiltonian();
        let spec = eigendecompose(&h).unwrap();
        prop_assert!(spec.orthonormality_defect() <= 1e-12);
        prop_assert!(spec.reconstruction_error(&h).unwrap() <= 1e-10 * h.max_abs().max(1.0));
        let a = spec.evolve(&psi, t1).unwrap();
        let ab = spec.evolve(&a, t2).unwrap();
        prop_assert!((a.norm() - 1.0).abs() <= 1e-12);
        let e0 = h.expectation(psi.amplitudes()).unwrap();
        prop_assert!((h.expectation(a.amplitudes()).unwrap() - e0).abs() <= 1e-10);
        prop_assert!(ab.distance(&spec.evolve(&psi, t1 + t2).unwrap()).unwrap() <= 1e-10);
        prop_assert!(spec.evolve(&a, -t1).unwrap().distance(&psi).unwrap() <= 1e-10);
    }

    #[test]
    fn film_is_a_homogeneous_chain(phi in 0.0f64..(2.0 * PI), n in 2usize..9) {
        let scheme = ReductionScheme::Film { phi_total: phi, sites: n };
        let net = scheme.matched_network(Gauge::Single).unwrap();
        let dec = reduce_network(&net, &scheme).unwrap();
        prop_assert!(dec.defect() <= 1e-13);
        let h = &dec.conjugated;
        for i in 0..h.dim() {
            prop_assert!(h.get(i, i).norm() <= 1e-13);
            if i + 1 < h.dim() {
                prop_assert!((h.get(i, i + 1).norm() - 1.0).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn qfilm_potential_and_bond_are_complementary(phi in -PI..PI, m in 1usize..6, n in 1usize..6) {
        let scheme = ReductionScheme::QFilm { phi_total: phi, input: m, arm: n };
        let net = scheme.matched_network(Gauge::Single).unwrap();
        let dec = reduce_network(&net, &scheme).unwrap();
        prop_assert!(dec.defect() <= 1e-13);
        let mu = dec.end_potentials.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
        let bond = dec.junctions.iter().map(|j| j.value.norm()).fold(0.0, f64::max);
        prop_assert!((mu * mu + bond * bond - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn decompositions_repeat_with_unit_flux(phi in -PI..PI, m in 1usize..6, n in 1usize..6) {
        let residual = |p: f64| {
            let scheme = ReductionScheme::IferomEqual { phi_total: p, input: m, arm: n, output: 3 };
            let net = scheme.matched_network(Gauge::Uniform).unwrap();
            reduce_network(&net, &scheme).unwrap().defect()
        };
        prop_assert!((residual(phi) - residual(phi + 2.0 * PI)).abs() <= 1e-12);
    }
}

#[test]
fn perturbed_joints_break_the_reduction() {
    let d = 0.05;
    let (c, s) = (0.6f64.cos(), 0.6f64.sin());

    let y = ReductionScheme::Y { theta: 0.6, input: 5, arm: 4 };
    for (b, cc) in [(c + d, s), (c, s + d), (c - d, s)] {
        let dec = reduce_network(&topology::ybeam(5, 4, 4, b, cc).unwrap(), &y).unwrap();
        assert!(dec.defect() >= 0.01, "Y {b} {cc}: {}", dec.defect());
    }

    let star = ReductionScheme::Star { m: 3, input: 4, arm: 4 };
    let matched = star.matched_network(Gauge::Single).unwrap();
    let mut joints = matched.joints().to_vec();
    joints[1].amplitude += d;
    let net = Network::build(matched.chains().to_vec(), joints).unwrap();
    assert!(reduce_network(&net, &star).unwrap().defect() >= 0.01);

    let quarter = ReductionScheme::QQuarterFlux { n: 0, theta: 0.6, input: 4, arm: 4 };
    let net = flux_ring(4, 4, c + d, s, 0.25, Gauge::Single);
    assert!(reduce_network(&net, &quarter).unwrap().defect() >= 0.01);

    let equal = ReductionScheme::IferomEqual { phi_total: 1.0, input: 4, arm: 4, output: 4 };
    let couplings = RingCouplings { ab: FRAC_1_SQRT_2 + d, ..RingCouplings::uniform(FRAC_1_SQRT_2) };
    let net = topology::interferometer(4, 4, 4, 4, couplings).unwrap();
    let lp = topology::interferometer_loop(&net).unwrap();
    let net = net.thread_loop_flux(&lp, 1.0 / (2.0 * PI), Gauge::Single).unwrap();
    assert!(reduce_network(&net, &equal).unwrap().defect() >= 0.01);
}
