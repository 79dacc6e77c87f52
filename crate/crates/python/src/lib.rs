//! Python bindings: networks, wave packets, exact evolution, reductions and
//! the main observables. States cross the boundary as lists of complex numbers.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use blochnet_core as bn;
use blochnet_core::observe;
use blochnet_core::topology::{self, RingCouplings};
use pyo3::exceptions::PyValueError;
use blochnet_core::C64;
use pyo3::prelude::*;

fn err(e: bn::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn gauge(name: &str) -> PyResult<bn::Gauge> {
    name.parse().map_err(err)
}

fn state(net: &bn::Network, amps: Vec<C64>) -> PyResult<bn::StateVector> {
    if amps.len() != net.dim() {
        return Err(PyValueError::new_err(format!(
            "state has {} amplitudes, network has {} sites",
            amps.len(),
            net.dim()
        )));
    }
    bn::StateVector::new(amps).map_err(err)
}

/// A tight-binding network of labeled chains joined at sites.
#[pyclass(name = "Network", module = "blochnet", frozen)]
struct PyNetwork {
    inner: bn::Network,
}

#[pymethods]
impl PyNetwork {
    /// Parses a network description (`[chain]`, `[joint]`, `[potential]`,
    /// `[flux]` and `[spin]` sections).
    #[staticmethod]
    #[pyo3(signature = (text, gauge_name = "single"))]
    fn from_text(text: &str, gauge_name: &str) -> PyResult<Self> {
        let desc = bn::parse_network(text).map_err(err)?;
        Ok(Self { inner: desc.network(gauge(gauge_name)?).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (n, hopping = 1.0))]
    fn chain(n: usize, hopping: f64) -> PyResult<Self> {
        let inner = bn::Network::build(vec![bn::ChainSpec::new("A", n).with_hopping(hopping)], vec![])
            .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn ybeam(input: usize, arm_b: usize, arm_c: usize, t_nb: f64, t_nc: f64) -> PyResult<Self> {
        Ok(Self { inner: topology::ybeam(input, arm_b, arm_c, t_nb, t_nc).map_err(err)? })
    }

    /// Q ring with flux `phi` (in flux quanta) through the loop.
    #[staticmethod]
    #[pyo3(signature = (input, arm, t_nb, t_nc, phi = 0.0, gauge_name = "single"))]
    fn qring(input: usize, arm: usize, t_nb: f64, t_nc: f64, phi: f64, gauge_name: &str) -> PyResult<Self> {
        let net = topology::qring(input, arm, t_nb, t_nc).map_err(err)?;
        let lp = topology::qring_loop(&net).map_err(err)?;
        let inner = net.thread_loop_flux(&lp, phi, gauge(gauge_name)?).map_err(err)?;
        Ok(Self { inner })
    }

    /// Two Y beams back to back with all joints equal to `coupling`.
    #[staticmethod]
    #[pyo3(signature = (input, arm_b, arm_c, output, coupling, phi = 0.0, gauge_name = "single"))]
    fn interferometer(
        input: usize,
        arm_b: usize,
        arm_c: usize,
        output: usize,
        coupling: f64,
        phi: f64,
        gauge_name: &str,
    ) -> PyResult<Self> {
        let net = topology::interferometer(input, arm_b, arm_c, output, RingCouplings::uniform(coupling))
            .map_err(err)?;
        let lp = topology::interferometer_loop(&net).map_err(err)?;
        let inner = net.thread_loop_flux(&lp, phi, gauge(gauge_name)?).map_err(err)?;
        Ok(Self { inner })
    }

    /// Transmission-reflection junction of two `n`-site chains at angle `phi`.
    #[staticmethod]
    fn film(n: usize, phi: f64) -> PyResult<Self> {
        Ok(Self { inner: bn::film_network(n, phi).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn chain_labels(&self) -> Vec<String> {
        self.inner.chains().iter().map(|c| c.label.clone()).collect()
    }

    /// Global index of site `local` (1-based) on `chain`.
    fn site_index(&self, chain: &str, local: usize) -> PyResult<usize> {
        self.inner.site_index(chain, local).map_err(err)
    }

    fn chain_sites(&self, chain: &str) -> PyResult<Vec<usize>> {
        self.inner.chain_sites(chain).map_err(err)
    }

    /// Dense Hamiltonian as a list of rows.
    fn hamiltonian(&self) -> Vec<Vec<C64>> {
        self.inner.hamiltonian().to_rows()
    }

    /// Eigenvalues in ascending order.
    fn eigenvalues(&self) -> PyResult<Vec<f64>> {
        let spec = bn::eigendecompose(&self.inner.hamiltonian()).map_err(err)?;
        let mut e = spec.eigenvalues().to_vec();
        e.sort_by(f64::total_cmp);
        Ok(e)
    }

    fn __repr__(&self) -> String {
        let parts: Vec<String> = self
            .inner
            .chains()
            .iter()
            .map(|c| format!("{}({})", c.label, c.n_sites))
            .collect();
        format!("Network({})", parts.join(", "))
    }
}

/// Result of rewriting a network in a scheme's virtual-chain basis.
#[pyclass(name = "Decomposition", module = "blochnet", frozen)]
struct PyDecomposition {
    inner: bn::Decomposition,
}

#[pymethods]
impl PyDecomposition {
    /// Largest inter-block coupling not predicted by the scheme.
    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }

    #[getter]
    fn target_deviation(&self) -> f64 {
        self.inner.target_deviation
    }

    #[getter]
    fn lengths(&self) -> Vec<usize> {
        self.inner.lengths()
    }

    fn end_potentials(&self) -> Vec<(String, f64)> {
        self.inner
            .end_potentials
            .iter()
            .map(|(s, v)| (s.to_string(), *v))
            .collect()
    }

    fn report(&self) -> String {
        self.inner.report()
    }
}

#[allow(clippy::too_many_arguments)]
fn scheme(
    name: &str,
    m: usize,
    n: i64,
    theta: f64,
    phi_total: f64,
    input: usize,
    arm: usize,
    output: usize,
    sites: usize,
) -> PyResult<bn::ReductionScheme> {
    use bn::ReductionScheme as S;
    Ok(match name {
        "star" => S::Star { m, input, arm },
        "y" => S::Y { theta, input, arm },
        "q-half-flux" => S::QHalfFlux { n, input, arm },
        "q-quarter-flux" => S::QQuarterFlux { n, theta, input, arm },
        "q-film" => S::QFilm { phi_total, input, arm },
        "film" => S::Film { phi_total, sites },
        "iferom-half" => S::IferomHalf { theta, input, arm, output },
        "iferom-int" => S::IferomInt { theta, input, arm, output },
        "iferom-equal" => S::IferomEqual { phi_total, input, arm, output },
        "y-complex" => S::YComplex { phi_total, input, arm },
        other => return Err(PyValueError::new_err(format!("unknown scheme `{other}`"))),
    })
}

/// Reduces `net` with the named scheme.
#[pyfunction]
#[pyo3(signature = (net, name, *, m = 2, n = 0, theta = FRAC_PI_4, phi_total = 0.0, input = 1, arm = 1, output = 1, sites = 2))]
#[allow(clippy::too_many_arguments)]
fn reduce(
    net: &PyNetwork,
    name: &str,
    m: usize,
    n: i64,
    theta: f64,
    phi_total: f64,
    input: usize,
    arm: usize,
    output: usize,
    sites: usize,
) -> PyResult<PyDecomposition> {
    let s = scheme(name, m, n, theta, phi_total, input, arm, output, sites)?;
    Ok(PyDecomposition { inner: bn::reduce_network(&net.inner, &s).map_err(err)? })
}

/// The network on which the named scheme is exact.
#[pyfunction]
#[pyo3(signature = (name, *, m = 2, n = 0, theta = FRAC_PI_4, phi_total = 0.0, input = 1, arm = 1, output = 1, sites = 2, gauge_name = "single"))]
#[allow(clippy::too_many_arguments)]
fn matched_network(
    name: &str,
    m: usize,
    n: i64,
    theta: f64,
    phi_total: f64,
    input: usize,
    arm: usize,
    output: usize,
    sites: usize,
    gauge_name: &str,
) -> PyResult<PyNetwork> {
    let s = scheme(name, m, n, theta, phi_total, input, arm, output, sites)?;
    Ok(PyNetwork { inner: s.matched_network(gauge(gauge_name)?).map_err(err)? })
}

/// Normalized Gaussian packet centered at `n0` on `chain`.
#[pyfunction]
#[pyo3(signature = (net, chain, n0, alpha, k = FRAC_PI_2))]
fn gaussian_packet(net: &PyNetwork, chain: &str, n0: f64, alpha: f64, k: f64) -> PyResult<Vec<C64>> {
    let psi = bn::gaussian_packet(&net.inner, chain, n0, alpha, k).map_err(err)?;
    Ok(psi.amplitudes().to_vec())
}

/// `exp(-i H tau) psi` for each time in `taus`.
#[pyfunction]
fn evolve(py: Python<'_>, net: &PyNetwork, psi: Vec<C64>, taus: Vec<f64>) -> PyResult<Vec<Vec<C64>>> {
    let psi = state(&net.inner, psi)?;
    py.detach(|| {
        let spec = bn::eigendecompose(&net.inner.hamiltonian()).map_err(err)?;
        taus.iter()
            .map(|&t| spec.evolve(&psi, t).map(|s| s.amplitudes().to_vec()).map_err(err))
            .collect()
    })
}

#[pyfunction]
fn half_width(alpha: f64) -> f64 {
    bn::half_width(alpha)
}

/// Probability left on `chain`, excluding its last (node) site, at `tau`.
#[pyfunction]
#[pyo3(signature = (net, psi, tau, chain = "A"))]
fn reflection_factor(net: &PyNetwork, psi: Vec<C64>, tau: f64, chain: &str) -> PyResult<f64> {
    let psi = state(&net.inner, psi)?;
    observe::reflection_factor(&net.inner, &psi, tau, chain).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (net, psi, chain_b = "B", chain_c = "C"))]
fn concurrence(net: &PyNetwork, psi: Vec<C64>, chain_b: &str, chain_c: &str) -> PyResult<f64> {
    let psi = state(&net.inner, psi)?;
    observe::concurrence(&net.inner, &psi, chain_b, chain_c).map_err(err)
}

/// `(T, R)` of a packet through the two-chain film.
#[pyfunction]
fn film_coefficients(n: usize, phi: f64, alpha: f64) -> PyResult<(f64, f64)> {
    let f = observe::film_coefficients(n, phi, alpha).map_err(err)?;
    Ok((f.transmission, f.reflection))
}

/// Peak detector probability over the window divided by the peak at the
/// packet's starting site.
#[pyfunction]
#[pyo3(signature = (net, chain, n0, alpha, detector, window, k = FRAC_PI_2))]
#[allow(clippy::too_many_arguments)]
fn relative_probability_q(
    py: Python<'_>,
    net: &PyNetwork,
    chain: &str,
    n0: f64,
    alpha: f64,
    detector: usize,
    window: f64,
    k: f64,
) -> PyResult<f64> {
    let packet = bn::PacketSpec { chain: chain.to_string(), n0, alpha, k };
    py.detach(|| observe::relative_probability_q(&net.inner, &packet, detector, window).map_err(err))
}

#[pymodule(name = "blochnet")]
fn blochnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyDecomposition>()?;
    m.add_function(wrap_pyfunction!(reduce, m)?)?;
    m.add_function(wrap_pyfunction!(matched_network, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_packet, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(half_width, m)?)?;
    m.add_function(wrap_pyfunction!(reflection_factor, m)?)?;
    m.add_function(wrap_pyfunction!(concurrence, m)?)?;
    m.add_function(wrap_pyfunction!(film_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(relative_probability_q, m)?)?;
    Ok(())
}
