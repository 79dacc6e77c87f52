//! Observables: reflection factor, mode concurrence, interference intensity,
//! film transmission and the flux-dependent relative probability `Q`.
//!
//! Quantities that take a maximum over time sample a uniform grid with step
//! [`TIME_STEP`]. Scans evaluate their points in parallel and return them in
//! grid order.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::dynamics::{eigendecompose, gaussian_packet, time_grid, PacketSpec, Spectrum, StateVector};
use crate::error::{Error, Result};
use crate::net::{Gauge, Network};
use crate::topology::{self, RingCouplings};

/// Sampling step for maxima over time.
pub const TIME_STEP: f64 = 0.25;

/// Required ratio of a detection window to the ballistic arrival time.
pub const WINDOW_FACTOR: f64 = 1.5;

/// Time for a packet of momentum `k` to cover `distance` sites at group
/// velocity `2 t |sin k|`.
pub fn ballistic_time(distance: f64, hopping: f64, k: f64) -> Result<f64> {
    let v = 2.0 * hopping.abs() * k.sin().abs();
    if v.is_nan() || v <= 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "momentum {k} has no group velocity"
        )));
    }
    Ok(distance / v)
}

/// Observable values on a rectangular `(x, y)` grid; `z[iy][ix]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanGrid2D {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<Vec<f64>>,
}

impl ScanGrid2D {
    /// Evaluates `f(x, y)` at every grid point in parallel.
    pub fn evaluate<F>(x: &[f64], y: &[f64], f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<f64> + Sync,
    {
        if x.is_empty() || y.is_empty() {
            return Err(Error::InvalidParameter("scan grid must be non-empty".into()));
        }
        let points: Vec<(usize, usize)> = (0..y.len())
            .flat_map(|iy| (0..x.len()).map(move |ix| (iy, ix)))
            .collect();
        let values = points
            .par_iter()
            .map(|&(iy, ix)| f(x[ix], y[iy]))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("scan produced non-finite value {bad}")));
        }
        let z = values.chunks(x.len()).map(|r| r.to_vec()).collect();
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            z,
        })
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.z[iy][ix]
    }

    /// `(x, y, z)` of the largest value; the first one in row order on ties.
    pub fn argmax(&self) -> (f64, f64, f64) {
        let mut best = (self.x[0], self.y[0], f64::NEG_INFINITY);
        for (iy, row) in self.z.iter().enumerate() {
            for (ix, &v) in row.iter().enumerate() {
                if v > best.2 {
                    best = (self.x[ix], self.y[iy], v);
                }
            }
        }
        best
    }

    /// `max |z(x, y) - z(y, x)|` for a square grid with `x == y`.
    pub fn swap_asymmetry(&self) -> Result<f64> {
        if self.x != self.y {
            return Err(Error::InvalidParameter("swap symmetry needs identical axes".into()));
        }
        let n = self.x.len();
        let mut d = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                d = d.max((self.z[i][j] - self.z[j][i]).abs());
            }
        }
        Ok(d)
    }

    /// Long format `x,y,z` with a header, x varying fastest.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "y", "z"])?;
        for (iy, row) in self.z.iter().enumerate() {
            for (ix, v) in row.iter().enumerate() {
                w.write_record([self.x[ix].to_string(), self.y[iy].to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Gnuplot grid data: `x y z` lines with a blank line after each `y` row,
    /// suitable for `splot ... with pm3d`.
    pub fn write_gnuplot<W: Write>(&self, mut w: W) -> Result<()> {
        for (iy, row) in self.z.iter().enumerate() {
            for (ix, v) in row.iter().enumerate() {
                writeln!(w, "{} {} {}", self.x[ix], self.y[iy], v)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// `Q` against flux for one packet width and detector.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxResponse {
    pub phi: Vec<f64>,
    pub q: Vec<f64>,
    pub alpha: f64,
    /// Graph distance from the input site to the detector.
    pub path_length: usize,
}

impl FluxResponse {
    /// `phi,Q` with a header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["phi", "Q"])?;
        for (p, q) in self.phi.iter().zip(&self.q) {
            w.write_record([p.to_string(), q.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Local sites `1..len-1` of the input chain as global indices; the node site
/// `len` is excluded.
fn reflection_sites(net: &Network, input_chain: &str) -> Result<Vec<usize>> {
    let mut sites = net.chain_sites(input_chain)?;
    sites.pop();
    Ok(sites)
}

/// Probability left on the input chain, excluding its node site, at `tau`.
pub fn reflection_factor(net: &Network, psi0: &StateVector, tau: f64, input_chain: &str) -> Result<f64> {
    let spec = eigendecompose(&net.hamiltonian())?;
    reflection_factor_with(net, &spec, psi0, tau, input_chain)
}

/// [`reflection_factor`] with a precomputed spectrum.
pub fn reflection_factor_with(
    net: &Network,
    spec: &Spectrum,
    psi0: &StateVector,
    tau: f64,
    input_chain: &str,
) -> Result<f64> {
    let sites = reflection_sites(net, input_chain)?;
    Ok(spec.evolution(psi0)?.probability_on(&sites, tau))
}

/// Y beam shape: input `A` and arms `B`, `C`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YGeometry {
    pub input: usize,
    pub arm_b: usize,
    pub arm_c: usize,
}

impl YGeometry {
    pub fn network(&self, t_nb: f64, t_nc: f64) -> Result<Network> {
        topology::ybeam(self.input, self.arm_b, self.arm_c, t_nb, t_nc)
    }

    /// Time for a packet at `n0` to reach the node and come back to `n0`.
    pub fn return_time(&self, packet: &PacketSpec) -> Result<f64> {
        ballistic_time(2.0 * (self.input as f64 - packet.n0), 1.0, packet.k)
    }

    /// Time for a packet at `n0` to reach the far end of the shorter arm.
    pub fn arm_end_time(&self, packet: &PacketSpec) -> Result<f64> {
        let d = self.input as f64 - packet.n0 + self.arm_b.min(self.arm_c) as f64;
        ballistic_time(d, 1.0, packet.k)
    }
}

/// Reflection factor at `tau0` over a grid of joint couplings `(t_nB, t_nC)`.
pub fn reflection_scan(
    geom: &YGeometry,
    t_nb: &[f64],
    t_nc: &[f64],
    packet: &PacketSpec,
    tau0: f64,
) -> Result<ScanGrid2D> {
    ScanGrid2D::evaluate(t_nb, t_nc, |x, y| {
        let net = geom.network(x, y)?;
        let psi = packet.build(&net)?;
        reflection_factor(&net, &psi, tau0, &packet.chain)
    })
}

/// Mode concurrence `sum_j |2 Re(conj(psi_B,j) psi_C,j)|` between two chains
/// of equal length.
pub fn concurrence(net: &Network, psi: &StateVector, chain_b: &str, chain_c: &str) -> Result<f64> {
    let b = net.chain_sites(chain_b)?;
    let c = net.chain_sites(chain_c)?;
    if b.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            got: c.len(),
        });
    }
    Ok(concurrence_of(|s| psi.amplitude(s), &b, &c))
}

fn concurrence_of(amp: impl Fn(usize) -> C64, b: &[usize], c: &[usize]) -> f64 {
    b.iter()
        .zip(c)
        .map(|(&sb, &sc)| (2.0 * (amp(sb).conj() * amp(sc)).re).abs())
        .sum()
}

/// Largest concurrence between `B` and `C` over `times`.
pub fn max_concurrence(net: &Network, spec: &Spectrum, psi0: &StateVector, times: &[f64]) -> Result<f64> {
    let b = net.chain_sites("B")?;
    let c = net.chain_sites("C")?;
    if b.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            got: c.len(),
        });
    }
    let evo = spec.evolution(psi0)?;
    let mut best = 0.0_f64;
    for &tau in times {
        let w = evo.weights(tau);
        best = best.max(concurrence_of(|s| evo.amplitude_with(&w, s), &b, &c));
    }
    Ok(best)
}

/// Maximal concurrence over `times` on a grid of joint couplings.
pub fn max_concurrence_scan(
    geom: &YGeometry,
    t_nb: &[f64],
    t_nc: &[f64],
    packet: &PacketSpec,
    times: &[f64],
) -> Result<ScanGrid2D> {
    ScanGrid2D::evaluate(t_nb, t_nc, |x, y| {
        let net = geom.network(x, y)?;
        let psi = packet.build(&net)?;
        let spec = eigendecompose(&net.hamiltonian())?;
        max_concurrence(&net, &spec, &psi, times)
    })
}

/// `|<r0| exp(-i H tau0) |psi0>|^2`.
pub fn interference_intensity(net: &Network, psi0: &StateVector, r0: usize, tau0: f64) -> Result<f64> {
    if r0 >= net.dim() {
        return Err(Error::GlobalSiteOutOfRange(r0));
    }
    let spec = eigendecompose(&net.hamiltonian())?;
    Ok(spec.evolution(psi0)?.probability(r0, tau0))
}

/// Two Y beams back to back: input `A`, arms `B` (length `arm`) and `C`
/// (length `arm + delta`), output `D`, all joints `coupling`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterferometerGeometry {
    pub input: usize,
    pub arm: usize,
    pub output: usize,
    pub coupling: f64,
}

impl InterferometerGeometry {
    pub fn network(&self, delta: i64) -> Result<Network> {
        let arm_c = self.arm as i64 + delta;
        if arm_c < 1 {
            return Err(Error::InvalidParameter(format!(
                "path difference {delta} leaves arm C empty"
            )));
        }
        topology::interferometer(
            self.input,
            self.arm,
            arm_c as usize,
            self.output,
            RingCouplings::uniform(self.coupling),
        )
    }
}

/// Interference intensity at output site `r0` (local index on `D`) and time
/// `tau0`, for each path difference.
pub fn interference_pattern(
    geom: &InterferometerGeometry,
    deltas: &[i64],
    packet: &PacketSpec,
    r0: usize,
    tau0: f64,
) -> Result<Vec<f64>> {
    deltas
        .par_iter()
        .map(|&d| {
            let net = geom.network(d)?;
            let psi = packet.build(&net)?;
            interference_intensity(&net, &psi, net.site_index("D", r0)?, tau0)
        })
        .collect()
}

/// Transmission and reflection of a packet through the two-chain film.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilmCoefficients {
    pub transmission: f64,
    pub reflection: f64,
    /// Detection time.
    pub tau: f64,
}

/// Sends a `k = pi/2` packet from the middle of chain `A` of a film of `n`
/// sites per side and measures the probability on each side once the
/// scattered packets are as far from the junction as the source was.
pub fn film_coefficients(n: usize, phi_total: f64, alpha: f64) -> Result<FilmCoefficients> {
    let net = topology::film_network(n, phi_total)?;
    let n0 = (n / 2) as f64;
    let psi = gaussian_packet(&net, "A", n0, alpha, FRAC_PI_2)?;
    let tau = ballistic_time(2.0 * (n as f64 - n0) + 1.0, 1.0, FRAC_PI_2)?;
    let spec = eigendecompose(&net.hamiltonian())?;
    let evo = spec.evolution(&psi)?;
    Ok(FilmCoefficients {
        transmission: evo.probability_on(&net.chain_sites("B")?, tau),
        reflection: evo.probability_on(&net.chain_sites("A")?, tau),
        tau,
    })
}

/// The same measurement on a flux-threaded Q ring with `t/sqrt(2)` joints:
/// `reflection` is the probability back on the input chain after one round
/// trip through the ring, `transmission` the probability still in the ring.
pub fn ring_film_coefficients(
    input: usize,
    arm: usize,
    phi_total: f64,
    alpha: f64,
    gauge: Gauge,
) -> Result<FilmCoefficients> {
    let net = topology::qring(input, arm, FRAC_1_SQRT_2, FRAC_1_SQRT_2)?;
    let lp = topology::qring_loop(&net)?;
    let net = net.thread_loop_flux(&lp, phi_total / (2.0 * std::f64::consts::PI), gauge)?;
    let n0 = (input / 2) as f64;
    let psi = gaussian_packet(&net, "A", n0, alpha, FRAC_PI_2)?;
    let tau = ballistic_time(2.0 * (input as f64 - n0 + arm as f64), 1.0, FRAC_PI_2)?;
    let spec = eigendecompose(&net.hamiltonian())?;
    let evo = spec.evolution(&psi)?;
    let mut ring = net.chain_sites("B")?;
    ring.extend(net.chain_sites("C")?);
    Ok(FilmCoefficients {
        transmission: evo.probability_on(&ring, tau),
        reflection: evo.probability_on(&net.chain_sites("A")?, tau),
        tau,
    })
}

/// Largest site probability over `times`.
fn peak_probability(spec: &Spectrum, psi0: &StateVector, site: usize, times: &[f64]) -> Result<f64> {
    let evo = spec.evolution(psi0)?;
    Ok(times
        .iter()
        .map(|&tau| evo.probability(site, tau))
        .fold(0.0, f64::max))
}

/// Detection window and the site where the input peak is read.
struct QProbe {
    input_site: usize,
    times: Vec<f64>,
}

fn q_probe(net: &Network, packet: &PacketSpec, detector: usize, window: f64) -> Result<QProbe> {
    let input_site = net.site_index(&packet.chain, packet.n0.round() as usize)?;
    let distance = net.graph_distance(input_site, detector).ok_or_else(|| {
        Error::InvalidParameter(format!("detector {detector} is unreachable from the input"))
    })?;
    let hopping = net.chain(&packet.chain)?.hopping;
    let required = WINDOW_FACTOR * ballistic_time(distance as f64, hopping, packet.k)?;
    if window < required {
        return Err(Error::WindowTooShort { window, required });
    }
    Ok(QProbe {
        input_site,
        times: time_grid(0.0, window, TIME_STEP)?,
    })
}

/// `Q`: peak probability at `detector` over the window divided by the peak
/// probability at the packet's input site.
///
/// Fails with [`Error::WindowTooShort`] unless `window` is at least
/// [`WINDOW_FACTOR`] times the ballistic arrival time at the detector.
pub fn relative_probability_q(net: &Network, packet: &PacketSpec, detector: usize, window: f64) -> Result<f64> {
    let probe = q_probe(net, packet, detector, window)?;
    let spec = eigendecompose(&net.hamiltonian())?;
    q_with(&spec, net, packet, detector, &probe)
}

fn q_with(spec: &Spectrum, net: &Network, packet: &PacketSpec, detector: usize, probe: &QProbe) -> Result<f64> {
    let psi = packet.build(net)?;
    let at_input = peak_probability(spec, &psi, probe.input_site, &probe.times)?;
    let at_detector = peak_probability(spec, &psi, detector, &probe.times)?;
    Ok(at_detector / at_input)
}

/// Aharonov-Bohm ring: input `A`, equal arms `B`, `C`, output `D`, all joints
/// `coupling`. The packet starts at `A:n0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbSetup {
    pub input: usize,
    pub arm: usize,
    pub output: usize,
    pub coupling: f64,
    pub n0: f64,
}

impl AbSetup {
    /// Threads `phi` flux quanta through the ring.
    pub fn network(&self, phi: f64, gauge: Gauge) -> Result<Network> {
        let net = topology::interferometer(
            self.input,
            self.arm,
            self.arm,
            self.output,
            RingCouplings::uniform(self.coupling),
        )?;
        let lp = topology::interferometer_loop(&net)?;
        net.thread_loop_flux(&lp, phi, gauge)
    }

    pub fn packet(&self, alpha: f64) -> PacketSpec {
        PacketSpec {
            chain: "A".into(),
            n0: self.n0,
            alpha,
            k: FRAC_PI_2,
        }
    }

    /// The output site whose graph distance from the input site is `path`.
    pub fn detector_at(&self, path: usize) -> Result<usize> {
        let net = self.network(0.0, Gauge::Single)?;
        let input = net.site_index("A", self.n0.round() as usize)?;
        for local in 1..=self.output {
            let site = net.site_index("D", local)?;
            if net.graph_distance(input, site) == Some(path) {
                return Ok(site);
            }
        }
        Err(Error::InvalidParameter(format!(
            "no output site at path length {path}"
        )))
    }

    /// `Q[ia][id]` at one flux for every packet width and detector, sharing
    /// one eigendecomposition. Each detector uses a window of
    /// [`WINDOW_FACTOR`] times its ballistic time.
    pub fn q_values(&self, phi: f64, gauge: Gauge, alphas: &[f64], detectors: &[usize]) -> Result<Vec<Vec<f64>>> {
        let net = self.network(phi, gauge)?;
        let spec = eigendecompose(&net.hamiltonian())?;
        alphas
            .iter()
            .map(|&alpha| {
                let packet = self.packet(alpha);
                detectors
                    .iter()
                    .map(|&d| {
                        let window = self.window(&net, d)?;
                        let probe = q_probe(&net, &packet, d, window)?;
                        q_with(&spec, &net, &packet, d, &probe)
                    })
                    .collect()
            })
            .collect()
    }

    /// The shortest admissible window for a detector, rounded up to the time step.
    pub fn window(&self, net: &Network, detector: usize) -> Result<f64> {
        let input = net.site_index("A", self.n0.round() as usize)?;
        let distance = net
            .graph_distance(input, detector)
            .ok_or_else(|| Error::InvalidParameter("detector unreachable".into()))?;
        let t = ballistic_time(distance as f64, net.chain("A")?.hopping, FRAC_PI_2)?;
        Ok((WINDOW_FACTOR * t / TIME_STEP).ceil() * TIME_STEP)
    }
}

/// `Q(phi)` over a list of fluxes for one packet width and detector.
pub fn flux_sweep_q(setup: &AbSetup, phis: &[f64], alpha: f64, detector: usize, gauge: Gauge) -> Result<FluxResponse> {
    if phis.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::InvalidParameter("flux values must be strictly increasing".into()));
    }
    let q = phis
        .par_iter()
        .map(|&phi| Ok(setup.q_values(phi, gauge, &[alpha], &[detector])?[0][0]))
        .collect::<Result<Vec<f64>>>()?;
    let net = setup.network(0.0, gauge)?;
    let input = net.site_index("A", setup.n0.round() as usize)?;
    let path_length = net.graph_distance(input, detector).unwrap_or(0);
    Ok(FluxResponse {
        phi: phis.to_vec(),
        q,
        alpha,
        path_length,
    })
}
