use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use blochnet::dynamics::time_grid;
use blochnet::observe::{
    film_coefficients, flux_sweep_q, interference_pattern, reflection_factor, AbSetup,
    InterferometerGeometry, YGeometry,
};
use blochnet::{
    eigendecompose, gaussian_packet, half_width, magnon_to_tbn, reduce_network, site_probability,
    topology, track_packet, virtual_evolution_oracle, ChainSpec, Gauge, JointSpec, Loop, Network,
    PacketSpec, ReductionScheme, SiteRef, SpinChain, SpinJoint, SpinNetworkSpec, StateVector,
};

fn chain(n: usize) -> Network {
    Network::build(vec![ChainSpec::new("A", n)], vec![]).unwrap()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn ring(n: usize, phi: f64) -> Network {
    let net = Network::build(
        vec![ChainSpec::new("A", n)],
        vec![JointSpec::real(SiteRef::new("A", n), SiteRef::new("A", 1), 1.0)],
    )
    .unwrap();
    let sites: Vec<usize> = (0..n).collect();
    net.thread_loop_flux(&Loop::through(&sites).unwrap(), phi, Gauge::Uniform)
        .unwrap()
}

#[test]
fn small_spectra() {
    let e = sorted(eigendecompose(&chain(3).hamiltonian()).unwrap().eigenvalues().to_vec());
    let s2 = 2f64.sqrt();
    for (a, b) in e.iter().zip([-s2, 0.0, s2]) {
        assert!((a - b).abs() < 1e-12);
    }
    let e = sorted(eigendecompose(&ring(4, 0.0).hamiltonian()).unwrap().eigenvalues().to_vec());
    for (a, b) in e.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn ring_spectrum_shifts_with_flux() {
    for n in [5usize, 8, 13] {
        for phi in [0.0, 0.1, 0.25, 0.37, 0.5, 0.9] {
            let got = sorted(eigendecompose(&ring(n, phi).hamiltonian()).unwrap().eigenvalues().to_vec());
            let want = sorted(
                (0..n)
                    .map(|m| -2.0 * (2.0 * PI * m as f64 / n as f64 + 2.0 * PI * phi / n as f64).cos())
                    .collect(),
            );
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "n={n} phi={phi}");
            }
        }
    }
}

#[test]
fn packet_shapes() {
    let net = chain(20);
    let delta = gaussian_packet(&net, "A", 7.0, 1e6, FRAC_PI_2).unwrap();
    assert!((delta.amplitude(6).norm() - 1.0).abs() < 1e-12);
    assert!((half_width(0.1) - 16.65).abs() < 0.01);
    assert!((half_width(0.3) - 5.55).abs() < 0.01);
    assert!((half_width(2.0 * 2f64.ln().sqrt()) - 1.0).abs() < 1e-15);

    let net = chain(100);
    let psi = gaussian_packet(&net, "A", 50.0, 0.3, FRAC_PI_2).unwrap();
    assert!((psi.norm() - 1.0).abs() < 1e-12);
    // Probability density has standard deviation 1 / (sqrt(2) alpha).
    let sigma = 1.0 / (2f64.sqrt() * 0.3);
    let far: Vec<usize> = (0..100).filter(|&g| ((g + 1) as f64 - 50.0).abs() > 4.0 * sigma).collect();
    assert!(site_probability(&psi, &far).unwrap() < 1e-3);
    assert!(gaussian_packet(&chain(30), "A", 15.0, 0.1, FRAC_PI_2).is_err());
}

#[test]
fn packet_moves_at_group_velocity_without_spreading() {
    let net = chain(200);
    let spec = eigendecompose(&net.hamiltonian()).unwrap();
    let psi = gaussian_packet(&net, "A", 70.0, 0.1, FRAC_PI_2).unwrap();
    let times = time_grid(0.0, 50.0, 1.0).unwrap();
    let track = track_packet(&net, &spec, &psi, &times, "A").unwrap();
    let at30 = times.iter().position(|&t| t == 30.0).unwrap();
    assert!((track.center[at30] - 130.0).abs() < 1.0);
    assert!(track.weight[at30] >= 0.99);
    assert!((track.velocity().unwrap() - 2.0).abs() < 0.04);

    let spread = |tau: f64| {
        let p = spec.evolve(&psi, tau).unwrap().probabilities();
        let mean: f64 = p.iter().enumerate().map(|(j, x)| j as f64 * x).sum();
        p.iter().enumerate().map(|(j, x)| (j as f64 - mean).powi(2) * x).sum::<f64>()
    };
    assert!(spread(50.0) < 1.1 * spread(0.0));

    let back = gaussian_packet(&net, "A", 130.0, 0.1, -FRAC_PI_2).unwrap();
    let v_back = track_packet(&net, &spec, &back, &times, "A").unwrap().velocity().unwrap();
    let v_fwd = track.velocity().unwrap();
    assert!((v_fwd + v_back).abs() < 0.01 * v_fwd);

    let still = gaussian_packet(&net, "A", 100.0, 0.1, 0.0).unwrap();
    let t10 = time_grid(0.0, 10.0, 1.0).unwrap();
    let c = track_packet(&net, &spec, &still, &t10, "A").unwrap().center;
    assert!((c[10] - c[0]).abs() < 0.5);
}

#[test]
fn y_splitter_clones_the_packet() {
    let theta = 0.6;
    let scheme = ReductionScheme::Y { theta, input: 50, arm: 60 };
    let net = scheme.matched_network(Gauge::Single).unwrap();
    let psi = gaussian_packet(&net, "A", 25.0, 0.3, FRAC_PI_2).unwrap();
    let out = virtual_evolution_oracle(&net, &scheme, &psi, 45.0).unwrap();
    assert!(out.deviation < 1e-10);
    let fin = &out.full;
    let b = net.chain_sites("B").unwrap();
    let c = net.chain_sites("C").unwrap();
    // Ideal clones: cos(theta) g_B + sin(theta) g_C with g the common shape.
    let g: Vec<_> = b
        .iter()
        .zip(&c)
        .map(|(&sb, &sc)| fin.amplitude(sb) * theta.cos() + fin.amplitude(sc) * theta.sin())
        .collect();
    let mut ideal = vec![blochnet::C64::new(0.0, 0.0); net.dim()];
    for (j, gj) in g.iter().enumerate() {
        ideal[b[j]] = gj * theta.cos();
        ideal[c[j]] = gj * theta.sin();
    }
    let ideal = StateVector::normalized(ideal).unwrap();
    assert!(fin.inner(&ideal).unwrap().norm() >= 0.99);
    assert!(virtual_evolution_oracle(&net, &scheme, &psi, 0.0).unwrap().deviation < 1e-14);
}

#[test]
fn y_reflection_extremes() {
    let geom = YGeometry { input: 50, arm_b: 50, arm_c: 50 };
    let packet = PacketSpec { chain: "A".into(), n0: 25.0, alpha: 0.3, k: FRAC_PI_2 };
    let tau0 = geom.return_time(&packet).unwrap();
    let r = |b: f64, c: f64| {
        let net = geom.network(b, c).unwrap();
        reflection_factor(&net, &packet.build(&net).unwrap(), tau0, "A").unwrap()
    };
    assert!(r(FRAC_1_SQRT_2, FRAC_1_SQRT_2) <= 0.01);
    assert!(r(0.1, 0.1) >= 0.5);
    assert!(r(0.0, 0.0) > 0.99);
}

#[test]
fn film_limits() {
    let f = film_coefficients(200, FRAC_PI_2, 0.1).unwrap();
    assert!(f.transmission >= 0.98 && f.reflection <= 0.02);
    let f = film_coefficients(200, 0.0, 0.1).unwrap();
    assert!(f.transmission <= 1e-6);
    let f = film_coefficients(200, PI / 4.0, 0.1).unwrap();
    assert!((f.transmission - 0.5).abs() <= 0.02);
}

#[test]
fn flux_response_is_even_in_flux() {
    let setup = AbSetup { input: 40, arm: 20, output: 80, coupling: FRAC_1_SQRT_2, n0: 20.0 };
    let det = setup.detector_at(60).unwrap();
    let phis = [-0.75, -0.4, -0.1, 0.1, 0.4, 0.75];
    let resp = flux_sweep_q(&setup, &phis, 0.3, det, Gauge::Single).unwrap();
    for i in 0..3 {
        assert!((resp.q[i] - resp.q[5 - i]).abs() < 1e-6);
    }
    assert!(resp.q.iter().all(|&q| (0.0..=1.0 + 1e-6).contains(&q)));
    assert_eq!(resp.path_length, 60);
    assert!(flux_sweep_q(&setup, &[0.2, 0.1], 0.3, det, Gauge::Single).is_err());
}

/// The detection instant is where the equal-path intensity at `r0` peaks;
/// at that instant the equal-path configuration is the brightest.
#[test]
fn equal_paths_interfere_brightest_at_arrival() {
    let geom = InterferometerGeometry { input: 50, arm: 50, output: 50, coupling: FRAC_1_SQRT_2 };
    let packet = PacketSpec { chain: "A".into(), n0: 25.0, alpha: 0.3, k: FRAC_PI_2 };
    let net = geom.network(0).unwrap();
    let spec = eigendecompose(&net.hamiltonian()).unwrap();
    let evo = spec.evolution(&packet.build(&net).unwrap()).unwrap();
    let r0 = net.site_index("D", 50).unwrap();
    let (tau0, _) = time_grid(0.0, 112.5, 0.25)
        .unwrap()
        .into_iter()
        .map(|t| (t, evo.probability(r0, t)))
        .fold((0.0, 0.0), |b, p| if p.1 > b.1 { p } else { b });
    let deltas: Vec<i64> = (-25..=25).collect();
    let i = interference_pattern(&geom, &deltas, &packet, 50, tau0).unwrap();
    let best = (0..i.len()).max_by(|&a, &b| i[a].total_cmp(&i[b])).unwrap();
    assert_eq!(deltas[best], 0, "tau0 {tau0}");
}

#[test]
fn spin_chain_spectra() {
    let j = 0.8;
    let two = SpinNetworkSpec::new(
        vec![SpinChain { label: "S".into(), n_sites: 2, coupling: j }],
        vec![],
    );
    let e = sorted(eigendecompose(&magnon_to_tbn(&two).unwrap().hamiltonian()).unwrap().eigenvalues().to_vec());
    assert!((e[0] + j).abs() < 1e-14 && (e[1] - j).abs() < 1e-14);

    let six = SpinNetworkSpec::new(
        vec![SpinChain { label: "S".into(), n_sites: 6, coupling: j }],
        vec![],
    );
    let e = sorted(eigendecompose(&magnon_to_tbn(&six).unwrap().hamiltonian()).unwrap().eigenvalues().to_vec());
    let want = sorted((1..=6).map(|k| 2.0 * j * (k as f64 * PI / 7.0).cos()).collect());
    for (a, b) in e.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn spin_y_beam_does_not_reflect() {
    let (jb, jc) = (0.6, 0.8);
    let spec = SpinNetworkSpec::new(
        ["A", "B", "C"]
            .iter()
            .map(|l| SpinChain { label: l.to_string(), n_sites: 50, coupling: 1.0 })
            .collect(),
        vec![
            SpinJoint { a: SiteRef::new("A", 50), b: SiteRef::new("B", 1), coupling: jb },
            SpinJoint { a: SiteRef::new("A", 50), b: SiteRef::new("C", 1), coupling: jc },
        ],
    );
    let net = magnon_to_tbn(&spec).unwrap();
    // With t = -J the band is inverted, so k = -pi/2 moves toward the node.
    let psi = gaussian_packet(&net, "A", 25.0, 0.3, -FRAC_PI_2).unwrap();
    assert!(reflection_factor(&net, &psi, 25.0, "A").unwrap() <= 0.01);
}

#[test]
fn reduce_report_for_quarter_flux_ring() {
    let scheme = ReductionScheme::QQuarterFlux { n: 0, theta: 0.6, input: 3, arm: 4 };
    let net = topology::qring(3, 4, 0.6f64.cos(), 0.6f64.sin()).unwrap();
    let lp = topology::qring_loop(&net).unwrap();
    let net = net.thread_loop_flux(&lp, 0.25, Gauge::Single).unwrap();
    let dec = reduce_network(&net, &scheme).unwrap();
    assert_eq!(dec.lengths(), vec![11]);
    assert!(dec.residual <= 1e-14);
    let report = dec.report();
    assert!(report.contains("partition: a(11)"), "{report}");
    let mut csv = Vec::new();
    dec.write_conjugated_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("row,col,row_site,col_site,re,im\n"));
}
