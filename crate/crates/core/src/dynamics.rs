//! Exact time evolution of one-particle states.
//!
//! A Hamiltonian is diagonalized once into a [`Spectrum`]; states are then
//! propagated as `V exp(-i eps tau) V^dag psi` at any number of times without
//! time-step error. [`Evolution`] caches the eigenbasis coefficients of an
//! initial state so that single-site amplitudes cost `O(n)` per time.

use std::f64::consts::LN_2;
use std::io::{Read, Write};

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;
use crate::net::Network;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Largest tail mass a packet may lose to the ends of its chain.
pub const PACKET_TAIL_TOLERANCE: f64 = 1e-6;

/// Normalized complex amplitudes over the global sites of a network.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    /// Rescales `amps` to unit norm.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let norm = l2(&amps);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cannot normalize a state of norm {norm}"
            )));
        }
        Ok(Self {
            amps: amps.into_iter().map(|a| a / norm).collect(),
        })
    }

    /// Accepts `amps` if already normalized to within `1e-12`.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let norm = l2(&amps);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "state norm is {norm}, expected 1"
            )));
        }
        Ok(Self { amps })
    }

    /// A particle localized on one site.
    pub fn basis(n: usize, site: usize) -> Result<Self> {
        if site >= n {
            return Err(Error::GlobalSiteOutOfRange(site));
        }
        let mut amps = vec![ZERO; n];
        amps[site] = C64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, site: usize) -> C64 {
        self.amps[site]
    }

    pub fn norm(&self) -> f64 {
        l2(&self.amps)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Euclidean distance `||self - other||`.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Writes `site,re,im` rows with a header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (site, a) in self.amps.iter().enumerate() {
            w.serialize(AmplitudeRow {
                site,
                re: a.re,
                im: a.im,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`StateVector::write_csv`]. Rows may come
    /// in any order but must cover `0..n` exactly once.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rows: Vec<AmplitudeRow> = csv::Reader::from_reader(reader)
            .deserialize()
            .collect::<std::result::Result<_, _>>()?;
        rows.sort_by_key(|r| r.site);
        for (i, r) in rows.iter().enumerate() {
            if r.site != i {
                return Err(Error::InvalidParameter(format!(
                    "state file: expected site {i}, found {}",
                    r.site
                )));
            }
        }
        Self::new(rows.into_iter().map(|r| C64::new(r.re, r.im)).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct AmplitudeRow {
    site: usize,
    re: f64,
    im: f64,
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct Spectrum {
    values: Vec<f64>,
    /// Row-major `V[j][k]`: component of eigenvector `k` on site `j`.
    vectors: Vec<C64>,
    n: usize,
}

/// Diagonalizes `h`. Real matrices take a real symmetric solver.
pub fn eigendecompose(h: &HermitianMatrix) -> Result<Spectrum> {
    let n = h.dim();
    let m = h.as_mat();
    let mut vectors = vec![ZERO; n * n];
    let values: Vec<f64>;
    if h.is_real() {
        let re = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = re
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::EigenFailure)?;
        let s = evd.S().column_vector();
        values = (0..n).map(|k| s[k]).collect();
        let u = evd.U();
        for j in 0..n {
            for k in 0..n {
                vectors[j * n + k] = C64::new(u[(j, k)], 0.0);
            }
        }
    } else {
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::EigenFailure)?;
        let s = evd.S().column_vector();
        values = (0..n).map(|k| s[k].re).collect();
        let u = evd.U();
        for j in 0..n {
            for k in 0..n {
                vectors[j * n + k] = u[(j, k)];
            }
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }
    Ok(Spectrum { values, vectors, n })
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// Component of eigenvector `k` on site `j`.
    pub fn vector_entry(&self, j: usize, k: usize) -> C64 {
        self.vectors[j * self.n + k]
    }

    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        (0..self.n).map(|j| self.vector_entry(j, k)).collect()
    }

    /// The eigenvector matrix with eigenvectors as columns.
    pub fn vectors(&self) -> Mat<C64> {
        Mat::from_fn(self.n, self.n, |j, k| self.vector_entry(j, k))
    }

    /// `max |V^dag V - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.n;
        let mut d = 0.0_f64;
        for a in 0..n {
            for b in a..n {
                let mut s = ZERO;
                for j in 0..n {
                    s += self.vector_entry(j, a).conj() * self.vector_entry(j, b);
                }
                let target = if a == b { 1.0 } else { 0.0 };
                d = d.max((s - target).norm());
            }
        }
        d
    }

    /// `max |V diag(eps) V^dag - H|`.
    pub fn reconstruction_error(&self, h: &HermitianMatrix) -> Result<f64> {
        check_dim(self.n, h.dim())?;
        let n = self.n;
        let mut d = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let mut s = ZERO;
                for k in 0..n {
                    s += self.vector_entry(i, k) * self.values[k] * self.vector_entry(j, k).conj();
                }
                d = d.max((s - h.get(i, j)).norm());
            }
        }
        Ok(d)
    }

    /// Eigenbasis coefficients `V^dag psi`.
    pub fn project(&self, psi: &StateVector) -> Result<Vec<C64>> {
        check_dim(self.n, psi.dim())?;
        let n = self.n;
        let mut c = vec![ZERO; n];
        for (j, &a) in psi.amplitudes().iter().enumerate() {
            if a == ZERO {
                continue;
            }
            let row = &self.vectors[j * n..(j + 1) * n];
            for (ck, v) in c.iter_mut().zip(row) {
                *ck += v.conj() * a;
            }
        }
        Ok(c)
    }

    /// `exp(-i H tau) psi`.
    pub fn evolve(&self, psi0: &StateVector, tau: f64) -> Result<StateVector> {
        Ok(self.evolution(psi0)?.state(tau))
    }

    /// `exp(-i H tau) v` for an arbitrary, not necessarily normalized, vector.
    pub fn propagate(&self, v: &[C64], tau: f64) -> Result<Vec<C64>> {
        check_dim(self.n, v.len())?;
        let n = self.n;
        let mut c = vec![ZERO; n];
        for (j, &a) in v.iter().enumerate() {
            let row = &self.vectors[j * n..(j + 1) * n];
            for (ck, vk) in c.iter_mut().zip(row) {
                *ck += vk.conj() * a;
            }
        }
        for (ck, &e) in c.iter_mut().zip(&self.values) {
            *ck *= C64::from_polar(1.0, -e * tau);
        }
        Ok((0..n)
            .map(|j| {
                self.vectors[j * n..(j + 1) * n]
                    .iter()
                    .zip(&c)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// Prepares repeated evolution of `psi0`.
    pub fn evolution(&self, psi0: &StateVector) -> Result<Evolution<'_>> {
        let coeffs = self.project(psi0)?;
        Ok(Evolution { spec: self, coeffs })
    }
}

/// Free-function form of [`Spectrum::evolve`].
pub fn evolve(spec: &Spectrum, psi0: &StateVector, tau: f64) -> Result<StateVector> {
    spec.evolve(psi0, tau)
}

/// An initial state expressed in an eigenbasis, ready to be read out at any time.
#[derive(Clone, Debug)]
pub struct Evolution<'a> {
    spec: &'a Spectrum,
    coeffs: Vec<C64>,
}

impl<'a> Evolution<'a> {
    /// Phased eigenbasis weights `exp(-i eps_k tau) c_k`.
    pub fn weights(&self, tau: f64) -> Vec<C64> {
        self.spec
            .values
            .iter()
            .zip(&self.coeffs)
            .map(|(&e, &c)| C64::from_polar(1.0, -e * tau) * c)
            .collect()
    }

    /// Amplitude on `site` given precomputed [`Evolution::weights`].
    pub fn amplitude_with(&self, weights: &[C64], site: usize) -> C64 {
        let n = self.spec.n;
        self.spec.vectors[site * n..(site + 1) * n]
            .iter()
            .zip(weights)
            .map(|(v, w)| v * w)
            .sum()
    }

    pub fn amplitude(&self, site: usize, tau: f64) -> C64 {
        self.amplitude_with(&self.weights(tau), site)
    }

    pub fn probability(&self, site: usize, tau: f64) -> f64 {
        self.amplitude(site, tau).norm_sqr()
    }

    /// Total probability on `sites` at time `tau`.
    pub fn probability_on(&self, sites: &[usize], tau: f64) -> f64 {
        let w = self.weights(tau);
        sites
            .iter()
            .map(|&s| self.amplitude_with(&w, s).norm_sqr())
            .sum()
    }

    pub fn state(&self, tau: f64) -> StateVector {
        let w = self.weights(tau);
        StateVector {
            amps: (0..self.spec.n).map(|j| self.amplitude_with(&w, j)).collect(),
        }
    }
}

/// Placement and shape of a Gaussian wave packet on one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub chain: String,
    /// Center, in local site units (1-based).
    pub n0: f64,
    pub alpha: f64,
    /// Momentum per site.
    pub k: f64,
}

impl PacketSpec {
    pub fn build(&self, net: &Network) -> Result<StateVector> {
        gaussian_packet(net, &self.chain, self.n0, self.alpha, self.k)
    }
}

/// Gaussian wave packet `exp(-alpha^2 (j - n0)^2 / 2) exp(i k j)` on the sites
/// `j = 1..=len` of `chain`, zero elsewhere, normalized.
///
/// Fails with [`Error::PacketOverflow`] when more than
/// [`PACKET_TAIL_TOLERANCE`] of the infinite-lattice packet mass would fall
/// beyond the chain ends.
pub fn gaussian_packet(net: &Network, chain: &str, n0: f64, alpha: f64, k: f64) -> Result<StateVector> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if !k.is_finite() {
        return Err(Error::InvalidParameter(format!("momentum must be finite, got {k}")));
    }
    let len = net.chain(chain)?.n_sites;
    if !(n0 >= 1.0 && n0 <= len as f64) {
        return Err(Error::InvalidParameter(format!(
            "packet center {n0} lies outside chain `{chain}` (1..={len})"
        )));
    }
    let a2 = alpha * alpha;
    // exp(-a2 d^2) < 1e-18 beyond this distance.
    let reach = (41.5 / a2).sqrt().ceil() + 1.0;
    let lo = (n0 - reach).floor() as i64;
    let hi = (n0 + reach).ceil() as i64;
    let mut inside = 0.0;
    let mut outside = 0.0;
    for j in lo..=hi {
        let w = (-a2 * (j as f64 - n0).powi(2)).exp();
        if j >= 1 && j <= len as i64 {
            inside += w;
        } else {
            outside += w;
        }
    }
    if inside.is_nan() || inside <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "packet at {n0} with alpha {alpha} has no weight on any site"
        )));
    }
    let tail = outside / (inside + outside);
    if tail > PACKET_TAIL_TOLERANCE {
        return Err(Error::PacketOverflow {
            chain: chain.to_string(),
            tail,
        });
    }
    let norm = inside.sqrt();
    let mut amps = vec![ZERO; net.dim()];
    for (local, global) in net.chain_sites(chain)?.into_iter().enumerate() {
        let j = (local + 1) as f64;
        let env = (-a2 * (j - n0).powi(2) / 2.0).exp() / norm;
        amps[global] = C64::from_polar(env, k * j);
    }
    StateVector::normalized(amps)
}

/// Full width at half maximum of the packet probability, `2 sqrt(ln 2) / alpha`.
pub fn half_width(alpha: f64) -> f64 {
    2.0 * LN_2.sqrt() / alpha
}

/// Total probability on a set of global sites.
pub fn site_probability(psi: &StateVector, sites: &[usize]) -> Result<f64> {
    sites
        .iter()
        .map(|&s| {
            if s < psi.dim() {
                Ok(psi.amps[s].norm_sqr())
            } else {
                Err(Error::GlobalSiteOutOfRange(s))
            }
        })
        .sum()
}

/// Center and weight of a packet on one chain, sampled over time.
#[derive(Clone, Debug, PartialEq)]
pub struct PacketTrack {
    pub chain: String,
    pub times: Vec<f64>,
    /// Probability-weighted mean local index (1-based); NaN where the weight is zero.
    pub center: Vec<f64>,
    pub weight: Vec<f64>,
}

/// Follows the packet center and weight on `chain` for `psi0` evolved under `spec`.
pub fn track_packet(
    net: &Network,
    spec: &Spectrum,
    psi0: &StateVector,
    times: &[f64],
    chain: &str,
) -> Result<PacketTrack> {
    if times.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::InvalidParameter("track times must be strictly increasing".into()));
    }
    let sites = net.chain_sites(chain)?;
    let evo = spec.evolution(psi0)?;
    let mut center = Vec::with_capacity(times.len());
    let mut weight = Vec::with_capacity(times.len());
    for &tau in times {
        let w = evo.weights(tau);
        let (mut total, mut moment) = (0.0, 0.0);
        for (local, &g) in sites.iter().enumerate() {
            let p = evo.amplitude_with(&w, g).norm_sqr();
            total += p;
            moment += p * (local + 1) as f64;
        }
        weight.push(total.min(1.0));
        center.push(if total > 0.0 { moment / total } else { f64::NAN });
    }
    Ok(PacketTrack {
        chain: chain.to_string(),
        times: times.to_vec(),
        center,
        weight,
    })
}

impl PacketTrack {
    /// Least-squares slope of the center against time.
    pub fn velocity(&self) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.center)
            .filter(|(_, c)| c.is_finite())
            .map(|(&t, &c)| (t, c))
            .collect();
        if pts.len() < 2 {
            return Err(Error::InvalidParameter("need two tracked points for a velocity".into()));
        }
        let m = pts.len() as f64;
        let (st, sc) = pts.iter().fold((0.0, 0.0), |(a, b), &(t, c)| (a + t, b + c));
        let (mt, mc) = (st / m, sc / m);
        let (mut num, mut den) = (0.0, 0.0);
        for &(t, c) in &pts {
            num += (t - mt) * (c - mc);
            den += (t - mt) * (t - mt);
        }
        Ok(num / den)
    }

    /// Writes `tau,center,weight` rows with a header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["tau", "center", "weight"])?;
        for i in 0..self.times.len() {
            w.write_record([
                self.times[i].to_string(),
                self.center[i].to_string(),
                self.weight[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evenly spaced times `start, start + step, ...` up to and including `end`.
pub fn time_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || !start.is_finite() || !end.is_finite() || end < start {
        return Err(Error::InvalidParameter(format!(
            "bad time grid start={start} end={end} step={step}"
        )));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::ChainSpec;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn chain(n: usize) -> Network {
        Network::build(vec![ChainSpec::new("A", n)], vec![]).unwrap()
    }

    #[test]
    fn two_site_spectrum() {
        let spec = eigendecompose(&chain(2).hamiltonian()).unwrap();
        assert!((spec.eigenvalues()[0] + 1.0).abs() < 1e-14);
        assert!((spec.eigenvalues()[1] - 1.0).abs() < 1e-14);
        let v = spec.eigenvector(0);
        assert!((v[0].norm() - FRAC_1_SQRT_2).abs() < 1e-14);
        assert!((v[0] - v[1]).norm() < 1e-14 || (v[0] + v[1]).norm() > 1.0);
    }

    #[test]
    fn three_site_chain() {
        let spec = eigendecompose(&chain(3).hamiltonian()).unwrap();
        let want = [-2f64.sqrt(), 0.0, 2f64.sqrt()];
        for (a, b) in spec.eigenvalues().iter().zip(want) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn delta_packet() {
        let net = chain(20);
        let psi = gaussian_packet(&net, "A", 7.0, 1e6, FRAC_PI_2).unwrap();
        assert!((psi.amplitude(6).norm() - 1.0).abs() < 1e-15);
        assert_eq!(psi.probabilities().iter().filter(|&&p| p > 0.0).count(), 1);
    }

    #[test]
    fn packet_overflow_detected() {
        let net = chain(20);
        let err = gaussian_packet(&net, "A", 3.0, 0.1, 0.0).unwrap_err();
        assert!(matches!(err, Error::PacketOverflow { .. }));
        assert!(gaussian_packet(&net, "A", 0.5, 1.0, 0.0).is_err());
        assert!(gaussian_packet(&net, "A", 5.0, -1.0, 0.0).is_err());
        assert!(gaussian_packet(&net, "Z", 5.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn half_widths() {
        assert!((half_width(0.1) - 16.65).abs() < 0.01);
        assert!((half_width(0.3) - 5.55).abs() < 0.01);
        assert!((half_width(2.0 * LN_2.sqrt()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn evolve_zero_and_back() {
        let net = chain(30);
        let spec = eigendecompose(&net.hamiltonian()).unwrap();
        let psi = gaussian_packet(&net, "A", 15.0, 0.5, FRAC_PI_2).unwrap();
        assert!(spec.evolve(&psi, 0.0).unwrap().distance(&psi).unwrap() < 1e-13);
        let fwd = spec.evolve(&psi, 4.3).unwrap();
        let back = spec.evolve(&fwd, -4.3).unwrap();
        assert!(back.distance(&psi).unwrap() < 1e-10);
    }

    #[test]
    fn site_probability_edges() {
        let net = chain(10);
        let psi = gaussian_packet(&net, "A", 5.0, 1.0, 0.0).unwrap();
        let all: Vec<usize> = (0..10).collect();
        assert!((site_probability(&psi, &all).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(site_probability(&psi, &[]).unwrap(), 0.0);
        assert!(site_probability(&psi, &[10]).is_err());
    }

    #[test]
    fn state_csv_round_trip() {
        let net = chain(12);
        let psi = gaussian_packet(&net, "A", 6.0, 0.9, 1.3).unwrap();
        let mut buf = Vec::new();
        psi.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"site,re,im\n"));
        let back = StateVector::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, psi);
    }

    #[test]
    fn time_grid_inclusive() {
        let g = time_grid(0.0, 1.0, 0.25).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(time_grid(0.0, 1.0, 0.0).is_err());
    }
}
