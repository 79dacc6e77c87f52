use std::path::Path;

use blochnet::dynamics::time_grid;
use blochnet::observe::{
    ballistic_time, film_coefficients, interference_pattern, max_concurrence_scan,
    reflection_scan, relative_probability_q, AbSetup, FluxResponse, InterferometerGeometry,
    YGeometry, TIME_STEP, WINDOW_FACTOR,
};
use blochnet::{
    eigendecompose, parse_network, reduce_network, topology, Gauge, Network, PacketSpec, SiteRef,
};
use rayon::prelude::*;

use crate::config::{self, Packet};
use crate::output::{OutputDir, RunInfo};
use crate::CliError;

trait Context<T> {
    fn ctx(self, what: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for blochnet::Result<T> {
    fn ctx(self, what: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Numerical(format!("{what}: {e}")))
    }
}

fn f(x: f64) -> String {
    x.to_string()
}

fn spec(packet: &Packet, chain: &str) -> PacketSpec {
    PacketSpec {
        chain: chain.to_string(),
        n0: packet.n0,
        alpha: packet.alpha,
        k: packet.k,
    }
}

fn read_network(path: &Path, gauge: Gauge) -> Result<Network, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read network {}: {e}", path.display())))?;
    let desc = parse_network(&text)
        .map_err(|e| CliError::Config(format!("network {}: {e}", path.display())))?;
    desc.network(gauge)
        .map_err(|e| CliError::Config(format!("network {}: {e}", path.display())))
}

/// Probability on every chain at each time, as `tau,chain,weight` rows.
fn chain_weight_rows(net: &Network, psi: &blochnet::StateVector, times: &[f64]) -> Result<Vec<[String; 3]>, CliError> {
    let spectrum = eigendecompose(&net.hamiltonian()).ctx("dynamics::eigendecompose")?;
    let evo = spectrum.evolution(psi).ctx("dynamics::evolution")?;
    let chains: Vec<(String, Vec<usize>)> = net
        .chains()
        .iter()
        .map(|c| Ok((c.label.clone(), net.chain_sites(&c.label)?)))
        .collect::<blochnet::Result<_>>()
        .ctx("net::chain_sites")?;
    let mut rows = Vec::new();
    for &tau in times {
        let w = evo.weights(tau);
        for (label, sites) in &chains {
            let p: f64 = sites.iter().map(|&s| evo.amplitude_with(&w, s).norm_sqr()).sum();
            rows.push([f(tau), label.clone(), f(p)]);
        }
    }
    Ok(rows)
}

pub fn star(path: &Path, run: RunInfo<'_>, out: &mut OutputDir) -> Result<impl serde::Serialize, CliError> {
    let mut cfg = config::load::<config::StarConfig>(path, run.experiment)?.resolve()?;
    let net = topology::star(cfg.m, cfg.input, cfg.arm, cfg.coupling).ctx("topology::star")?;
    let packet = spec(&cfg.packet, "A");
    let psi = packet.build(&net).ctx("dynamics::gaussian_packet")?;
    let t_end = match cfg.t_end {
        Some(t) => t,
        None => ballistic_time(cfg.input as f64 - cfg.packet.n0 + cfg.arm as f64, 1.0, cfg.packet.k)
            .ctx("observe::ballistic_time")?,
    };
    cfg.t_end = Some(t_end);
    let times = time_grid(0.0, t_end, cfg.time_step).ctx("dynamics::time_grid")?;
    let rows = chain_weight_rows(&net, &psi, &times)?;
    out.csv("arm_weights.csv", &["tau", "chain", "weight"], rows)?;
    Ok(cfg)
}

fn y_geometry(cfg: &config::YScan) -> YGeometry {
    YGeometry {
        input: cfg.input,
        arm_b: cfg.arm_b,
        arm_c: cfg.arm_c,
    }
}

fn write_scan(out: &mut OutputDir, stem: &str, scan: &blochnet::observe::ScanGrid2D, gnuplot: bool) -> Result<(), CliError> {
    out.write(&format!("{stem}.csv"), |w| scan.write_csv(w).ctx("observe::ScanGrid2D"))?;
    out.write(&format!("{stem}.dat"), |w| scan.write_gnuplot(w).ctx("observe::ScanGrid2D"))?;
    if gnuplot {
        out.gnuplot_map(&format!("{stem}.dat"), "t_nB / t", "t_nC / t")?;
    }
    Ok(())
}

pub fn ybeam(path: &Path, run: RunInfo<'_>, out: &mut OutputDir) -> Result<impl serde::Serialize, CliError> {
    let mut cfg = config::load::<config::YConfig>(path, run.experiment)?.resolve();
    let (xs, ys) = (cfg.t_nb.values("t_nb")?, cfg.t_nc.values("t_nc")?);
    let geom = y_geometry(&cfg);
    let packet = spec(&cfg.packet, "A");
    let tau = match cfg.tau {
        Some(t) => t,
        None => geom.return_time(&packet).ctx("observe::YGeometry")?,
    };
    cfg.tau = Some(tau);
    let scan = reflection_scan(&geom, &xs, &ys, &packet, tau).ctx("observe::reflection_scan")?;
    write_scan(out, "reflection_scan", &scan, cfg.gnuplot)?;
    Ok(cfg)
}

pub fn entangler(path: &Path, run: RunInfo<'_>, out: &mut OutputDir) -> Result<impl serde::Serialize, CliError> {
    let mut cfg = config::load::<config::YConfig>(path, run.experiment)?.resolve();
    let (xs, ys) = (cfg.t_nb.values("t_nb")?, cfg.t_nc.values("t_nc")?);
    let geom = y_geometry(&cfg);
    let packet = spec(&cfg.packet, "A");
    let end = match cfg.tau {
        Some(t) => t,
        None => geom.arm_end_time(&packet).ctx("observe::YGeometry")?,
    };
    cfg.tau = Some(end);
    let times = time_grid(0.0, end, cfg.time_step).ctx("dynamics::time_grid")?;
    let scan = max_concurrence_scan(&geom, &xs, &ys, &packet, &times).ctx("observe::max_concurrence_scan")?;
    write_scan(out, "max_concurrence", &scan, cfg.gnuplot)?;
    Ok(cfg)
}

pub fn interferometer(path: &Path, run: RunInfo<'_>, out: &mut OutputDir) -> Result<impl serde::Serialize, CliError> {
    let cfg = config::load::<config::InterferometerConfig>(path, run.experiment)?.resolve()?;
    let geom = InterferometerGeometry {
        input: cfg.input,
        arm: cfg.arm,
        output: cfg.output,
        coupling: cfg.coupling,
    };
    let deltas: Vec<i64> = (cfg.delta_min..=cfg.delta_max).collect();
    let packet = spec(&cfg.packet, "A");
    let intensity = interference_pattern(&geom, &deltas, &packet, cfg.r0, cfg.tau0)
        .ctx("observe::interference_pattern")?;
    let rows = deltas.iter().zip(&intensity).map(|(d, i)| [d.to_string(), f(*i)]);
    out.csv("interference.csv", &["delta", "I"], rows)?;
    if cfg.gnuplot {
        out.gnuplot_curve("interference.csv", 1, 2, "path difference", "I(r0, tau0)")?;
    }
    Ok(cfg)
}

pub fn qring(path: &Path, run: RunInfo<'_>, out: &mut OutputDir) -> Result<impl serde::Serialize, CliError> {
    let cfg = config::load::<config::QringConfig>(path, run.experiment)?.resolve(path)?;
    let net = match &cfg.network {
        Some(file) => read_network(file, run.gauge)?,
        None => {
            let net = topology::qring(cfg.input, cfg.arm, cfg.t_nb, cfg.t_nc).ctx("topology::qring")?;
            let lp = topology::qring_loop(&net).ctx("topology::qring_loop")?;
            net.thread_loop_flux(&lp, cfg.phi, run.gauge).ctx("net::thread_loop_flux")?
        }
    };
    let psi = spec(&cfg.packet, &cfg.input_chain)
        .build(&net)
        .ctx("dynamics::gaussian_packet")?;
    let times = time_grid(0.0, cfg.t_end, cfg.time_step).ctx("dynamics::time_grid")?;
    let rows = chain_weight_rows(&net, &psi, &times)?;
    out.csv("chain_weights.csv", &["tau", "chain", "weight"], rows)?;
    Ok(cfg)
}

pub fn film(path: &Path, run: RunInfo<'_>, out: &mut OutputDir) -> Result<impl serde::Serialize, CliError> {
    let mut cfg = config::load::<config::FilmConfig>(path, run.experiment)?.resolve()?;
    let coeffs = cfg
        .phi
        .par_iter()
        .map(|&phi| film_coefficients(cfg.sites, phi, cfg.alpha))
        .collect::<blochnet::Result<Vec<_>>>()
        .ctx("observe::film_coefficients")?;
    cfg.tau = coeffs.first().map(|c| c.tau);
    let t_rows = cfg.phi.iter().zip(&coeffs).map(|(p, c)| [f(*p), f(c.transmission)]);
    out.csv("film_T.csv", &["phi", "T"], t_rows)?;
    let r_rows = cfg.phi.iter().zip(&coeffs).map(|(p, c)| [f(*p), f(c.reflection)]);
    out.csv("film_R.csv", &["phi", "R"], r_rows)?;
    if cfg.gnuplot {
        out.gnuplot_curve("film_T.csv", 1, 2, "Phi", "T")?;
        out.gnuplot_curve("film_R.csv", 1, 2, "Phi", "R")?;
    }
    Ok(cfg)
}

pub fn ab(path: &Path, run: RunInfo<'_>, out: &mut OutputDir) -> Result<impl serde::Serialize, CliError> {
    let cfg = config::load::<config::AbConfig>(path, run.experiment)?.resolve()?;
    let phis = cfg.phi.values("phi")?;
    let setup = AbSetup {
        input: cfg.input,
        arm: cfg.arm,
        output: cfg.output,
        coupling: cfg.coupling,
        n0: cfg.n0,
    };
    let detectors = cfg
        .path
        .iter()
        .map(|&l| setup.detector_at(l))
        .collect::<blochnet::Result<Vec<_>>>()
        .ctx("observe::AbSetup::detector_at")?;
    let q = phis
        .par_iter()
        .map(|&phi| setup.q_values(phi, run.gauge, &cfg.alpha, &detectors))
        .collect::<blochnet::Result<Vec<_>>>()
        .ctx("observe::AbSetup::q_values")?;
    let mut rows = Vec::new();
    for (ia, alpha) in cfg.alpha.iter().enumerate() {
        for (id, l) in cfg.path.iter().enumerate() {
            for (ip, phi) in phis.iter().enumerate() {
                rows.push([f(*alpha), l.to_string(), f(*phi), f(q[ip][ia][id])]);
            }
        }
    }
    out.csv("flux_Q.csv", &["alpha", "path", "phi", "Q"], rows)?;
    if cfg.gnuplot {
        out.gnuplot_curve("flux_Q.csv", 3, 4, "phi", "Q")?;
    }
    Ok(cfg)
}

pub fn sweep(path: &Path, run: RunInfo<'_>, out: &mut OutputDir) -> Result<impl serde::Serialize, CliError> {
    let mut cfg = config::load::<config::SweepConfig>(path, run.experiment)?.resolve(path)?;
    let phis = cfg.phi.values("phi")?;
    let text = std::fs::read_to_string(&cfg.network)
        .map_err(|e| CliError::Config(format!("cannot read network {}: {e}", cfg.network.display())))?;
    let desc = parse_network(&text)
        .map_err(|e| CliError::Config(format!("network {}: {e}", cfg.network.display())))?;
    if cfg.flux >= desc.fluxes.len() {
        return Err(CliError::Config(format!(
            "key `flux`: network has {} [flux] sections, index {} requested",
            desc.fluxes.len(),
            cfg.flux
        )));
    }
    let detector: SiteRef = cfg
        .detector
        .parse()
        .map_err(|e| CliError::Config(format!("key `detector`: {e}")))?;
    let packet = spec(&cfg.packet, &cfg.input_chain);
    let base = desc.network(run.gauge).ctx("net")?;
    let det = base
        .site(&detector)
        .map_err(|e| CliError::Config(format!("key `detector`: {e}")))?;
    let window = match cfg.window {
        Some(w) => w,
        None => {
            let start = base
                .site_index(&packet.chain, packet.n0.round() as usize)
                .map_err(|e| CliError::Config(format!("key `packet.n0`: {e}")))?;
            let distance = base.graph_distance(start, det).ok_or_else(|| {
                CliError::Config("key `detector`: unreachable from the packet".into())
            })?;
            let hopping = base.chain(&packet.chain).ctx("net")?.hopping;
            let t = ballistic_time(distance as f64, hopping, packet.k).ctx("observe::ballistic_time")?;
            (WINDOW_FACTOR * t / TIME_STEP).ceil() * TIME_STEP
        }
    };
    cfg.window = Some(window);
    let q = phis
        .par_iter()
        .map(|&phi| {
            let mut d = desc.clone();
            d.fluxes[cfg.flux].phi = phi;
            let net = d.network(run.gauge)?;
            relative_probability_q(&net, &packet, det, window)
        })
        .collect::<blochnet::Result<Vec<_>>>()
        .ctx("observe::relative_probability_q")?;
    let start = base.site_index(&packet.chain, packet.n0.round() as usize).ctx("net")?;
    let response = FluxResponse {
        phi: phis,
        q,
        alpha: packet.alpha,
        path_length: base.graph_distance(start, det).unwrap_or(0),
    };
    out.write("flux_Q.csv", |w| response.write_csv(w).ctx("observe::FluxResponse"))?;
    if cfg.gnuplot {
        out.gnuplot_curve("flux_Q.csv", 1, 2, "phi", "Q")?;
    }
    Ok(cfg)
}

pub fn reduce_report(path: &Path, run: RunInfo<'_>, out: &mut OutputDir) -> Result<impl serde::Serialize, CliError> {
    let cfg = config::load::<config::ReduceConfig>(path, run.experiment)?.resolve(path)?;
    let scheme = cfg.scheme()?;
    let net = match &cfg.network {
        Some(file) => read_network(file, run.gauge)?,
        None => scheme.matched_network(run.gauge).ctx("reduce::matched_network")?,
    };
    let dec = reduce_network(&net, &scheme).ctx("reduce::reduce_network")?;
    let matching = blochnet::matching_residual(&net, &scheme).ctx("reduce::matching_residual")?;
    let mut report = dec.report();
    report.push_str(&format!("matching_residual: {matching:e}\n"));
    out.text("report.txt", &report)?;
    out.write("conjugated.csv", |w| dec.write_conjugated_csv(w).ctx("reduce::Decomposition"))?;
    Ok(cfg)
}
