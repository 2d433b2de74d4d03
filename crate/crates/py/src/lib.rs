//! Python bindings: the PKE over any multiplication backend, the crossbar
//! engine, the cost model and the experiment runners.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use saber_xbar::backend::MulBackend;
use saber_xbar::cost::{estimate as estimate_cost, ArchConfig, ComponentCatalog, CostReport};
use saber_xbar::experiments::{self, BackendKind, ExperimentConfig, VerifyOptions};
use saber_xbar::noise::NoiseSpec;
use saber_xbar::pke::{check_frame, frame_message, message_from_bytes, message_to_bytes, SaberPke};
use saber_xbar::polymult::{multiply as multiply_poly, MultAlgorithm};
use saber_xbar::ring::{Poly, SecretPoly};
use saber_xbar::sac::SacVariant;
use saber_xbar::xbar::{CrossbarConfig, CrossbarEngine, Readout, RootAdcPolicy};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn seed(bytes: &[u8]) -> PyResult<[u8; 32]> {
    bytes.try_into().map_err(|_| err(format!("seed must be 32 bytes, got {}", bytes.len())))
}

fn backend(name: &str) -> PyResult<Box<dyn MulBackend + Send>> {
    Ok(name.parse::<BackendKind>().map_err(err)?.instance())
}

fn policy(name: &str) -> PyResult<RootAdcPolicy> {
    match name.to_ascii_lowercase().as_str() {
        "full-width" | "full" => Ok(RootAdcPolicy::FullWidth),
        "modulo" => Ok(RootAdcPolicy::Modulo),
        other => Err(err(format!("unknown root policy '{other}'"))),
    }
}

/// SABER public-key encryption. Keys and ciphertexts travel as bytes.
#[pyclass(name = "Pke")]
struct PyPke {
    inner: SaberPke,
}

#[pymethods]
impl PyPke {
    #[new]
    fn new() -> Self {
        PyPke {
            inner: SaberPke::default(),
        }
    }

    /// Returns `(public_key, secret_key)`.
    #[pyo3(signature = (seed_a, r, backend_name = "sb"))]
    fn keygen<'py>(
        &self,
        py: Python<'py>,
        seed_a: &[u8],
        r: &[u8],
        backend_name: &str,
    ) -> PyResult<(Bound<'py, PyBytes>, Bound<'py, PyBytes>)> {
        let mut b = backend(backend_name)?;
        let (pk, sk) = self.inner.keygen(&seed(seed_a)?, &seed(r)?, &mut b).map_err(err)?;
        Ok((
            PyBytes::new(py, &self.inner.encode_public_key(&pk)),
            PyBytes::new(py, &self.inner.encode_secret_key(&sk)),
        ))
    }

    /// Encrypts a 32-byte message.
    #[pyo3(signature = (public_key, message, r_prime, backend_name = "sb"))]
    fn encrypt<'py>(
        &self,
        py: Python<'py>,
        public_key: &[u8],
        message: &[u8],
        r_prime: &[u8],
        backend_name: &str,
    ) -> PyResult<Bound<'py, PyBytes>> {
        let mut b = backend(backend_name)?;
        let pk = self.inner.decode_public_key(public_key).map_err(err)?;
        let m = message_from_bytes(message, self.inner.params.n).map_err(err)?;
        let ct = self.inner.encrypt(&pk, &m, &seed(r_prime)?, &mut b).map_err(err)?;
        Ok(PyBytes::new(py, &self.inner.encode_ciphertext(&ct)))
    }

    #[pyo3(signature = (secret_key, ciphertext, backend_name = "sb"))]
    fn decrypt<'py>(
        &self,
        py: Python<'py>,
        secret_key: &[u8],
        ciphertext: &[u8],
        backend_name: &str,
    ) -> PyResult<Bound<'py, PyBytes>> {
        let mut b = backend(backend_name)?;
        let sk = self.inner.decode_secret_key(secret_key).map_err(err)?;
        let ct = self.inner.decode_ciphertext(ciphertext).map_err(err)?;
        let m = self.inner.decrypt(&sk, &ct, &mut b).map_err(err)?;
        Ok(PyBytes::new(py, &message_to_bytes(&m)))
    }

    /// Message block holding a 28-byte payload and its CRC-32.
    fn frame<'py>(&self, py: Python<'py>, payload: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
        let m = frame_message(payload, self.inner.params.n).map_err(err)?;
        Ok(PyBytes::new(py, &message_to_bytes(&m)))
    }

    /// Payload of a framed message, or `None` when the CRC does not match.
    fn unframe<'py>(&self, py: Python<'py>, message: &[u8]) -> PyResult<Option<Bound<'py, PyBytes>>> {
        let m = message_from_bytes(message, self.inner.params.n).map_err(err)?;
        Ok(check_frame(&m).map(|p| PyBytes::new(py, &p)))
    }
}

/// Functional crossbar multiplier for `a * s` with a small secret `s`.
#[pyclass(name = "CrossbarEngine")]
struct PyCrossbar {
    inner: CrossbarEngine,
}

#[pymethods]
impl PyCrossbar {
    #[new]
    #[pyo3(signature = (readout = "digital", root_policy = "full-width", cell_variance = 0.0, tia_variance = 0.0, seed = 0, truncate = false, stagger = false))]
    fn new(
        readout: &str,
        root_policy: &str,
        cell_variance: f64,
        tia_variance: f64,
        seed: u64,
        truncate: bool,
        stagger: bool,
    ) -> PyResult<Self> {
        let cfg = CrossbarConfig {
            readout: experiments::parse_readout(readout).map_err(err)?,
            root_policy: policy(root_policy)?,
            noise: NoiseSpec::new(cell_variance, tia_variance, seed).map_err(err)?,
            truncate,
            stagger,
            ..CrossbarConfig::default()
        };
        Ok(PyCrossbar {
            inner: CrossbarEngine::new(cfg).map_err(err)?,
        })
    }

    /// `a * s` in the ring of modulus `2^bits`; `a` holds residues.
    fn mul(&mut self, a: Vec<u32>, bits: u32, s: Vec<i32>) -> PyResult<Vec<u32>> {
        let a = Poly::new(a, bits).map_err(err)?;
        Ok(self.inner.mul(&a, &SecretPoly::new(s)).map_err(err)?.coeffs().to_vec())
    }

    fn reseed(&mut self, seed: u64) {
        self.inner.reseed_noise(seed);
    }

    fn reset_stats(&mut self) {
        self.inner.reset_stats();
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.stats();
        let d = PyDict::new(py);
        d.set_item("mults", s.mults)?;
        d.set_item("programs", s.programs)?;
        d.set_item("operand_cell_bits", s.operand_cell_bits)?;
        d.set_item("physical_cell_writes", s.physical_cell_writes)?;
        d.set_item("cycles", s.cycles)?;
        d.set_item("samples", s.samples)?;
        d.set_item("skipped_samples", s.skipped_samples)?;
        d.set_item("saturations", s.saturations)?;
        Ok(d)
    }
}

/// Negacyclic product of two residue vectors modulo `2^bits`.
#[pyfunction]
fn multiply(algorithm: &str, a: Vec<u32>, b: Vec<u32>, bits: u32) -> PyResult<Vec<u32>> {
    let alg: MultAlgorithm = algorithm.to_ascii_uppercase().parse().map_err(err)?;
    let p = multiply_poly(alg, &Poly::new(a, bits).map_err(err)?, &Poly::new(b, bits).map_err(err)?).map_err(err)?;
    Ok(p.coeffs().to_vec())
}

fn report_dict<'py>(py: Python<'py>, r: &CostReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("label", &r.label)?;
    d.set_item("latency_ns", r.latency_ns)?;
    d.set_item("energy_pj", r.energy_total_pj())?;
    d.set_item("adc_energy_pj", r.energy_pj.adc)?;
    d.set_item("area_mm2", r.area_mm2())?;
    d.set_item("arrays", r.arrays)?;
    d.set_item("samples", r.samples_converted)?;
    d.set_item("cells_written", r.cells_written)?;
    d.set_item("operand_cell_bits", r.operand_cell_bits)?;
    d.set_item("ce", r.ce())?;
    d.set_item("ee", r.ee())?;
    Ok(d)
}

/// Cost-model report for one design point.
#[pyfunction]
#[pyo3(signature = (operation, algorithm, architecture, root_policy = "full-width"))]
fn estimate<'py>(
    py: Python<'py>,
    operation: &str,
    algorithm: &str,
    architecture: &str,
    root_policy: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ArchConfig::new(
        operation.parse().map_err(err)?,
        algorithm.to_ascii_uppercase().parse().map_err(err)?,
        architecture.parse().map_err(err)?,
    )
    .with_root_policy(policy(root_policy)?);
    let r = estimate_cost(&cfg, &ComponentCatalog::default()).map_err(err)?;
    report_dict(py, &r)
}

/// `(failures, census)` for `trials` CRC-framed roundtrips.
#[pyfunction]
#[pyo3(signature = (backend_name, trials, seed = 1))]
fn roundtrip(py: Python<'_>, backend_name: &str, trials: usize, seed: u64) -> PyResult<(u64, [u64; 3])> {
    let kind: BackendKind = backend_name.parse().map_err(err)?;
    let r = py.detach(|| experiments::run_roundtrip(kind, trials, seed)).map_err(err)?;
    Ok((r.failures, r.census))
}

/// Failure curve as JSON, configured with the key-value text schema.
#[pyfunction]
#[pyo3(signature = (config_text = ""))]
fn noise_curve(py: Python<'_>, config_text: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::parse(config_text).map_err(err)?;
    let curve = py
        .detach(|| experiments::run_noise(&cfg, &cfg.variance_grid, &cfg.retries_grid))
        .map_err(err)?;
    serde_json::to_string(&curve).map_err(err)
}

/// `(all_passed, report_text)` of the oracle suites.
#[pyfunction]
#[pyo3(signature = (trials = 20, seed = 1))]
fn verify(py: Python<'_>, trials: usize, seed: u64) -> PyResult<(bool, String)> {
    let cfg = ExperimentConfig {
        trials,
        seed,
        ..ExperimentConfig::default()
    };
    let report = py
        .detach(|| experiments::run_verify(&cfg, &VerifyOptions::default()))
        .map_err(err)?;
    Ok((report.passed(), report.to_string()))
}

/// SAC variant names accepted as readouts.
#[pyfunction]
fn sac_variants() -> Vec<String> {
    SacVariant::ALL.iter().map(|v| experiments::readout_name(Readout::Sac(*v))).collect()
}

#[pymodule]
fn saber_xbar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPke>()?;
    m.add_class::<PyCrossbar>()?;
    m.add_function(wrap_pyfunction!(multiply, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(roundtrip, m)?)?;
    m.add_function(wrap_pyfunction!(noise_curve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(sac_variants, m)?)?;
    Ok(())
}
