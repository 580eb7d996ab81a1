//! Python bindings: a `Simulation` owning the qubit store, the mint and the
//! randomness, plus the note and signature types it hands out.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use otm::banknote::{self, wire, Banknote, Mint, NoteParams};
use otm::harness::{self, ScenarioConfig};
use otm::otm::OtmParams;
use otm::qsim::{self, Basis, Party};
use otm::qtds::{self, TokenSignature};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_basis(name: &str) -> PyResult<Basis> {
    match name {
        "Z" | "z" => Ok(Basis::Z),
        "X" | "x" => Ok(Basis::X),
        other => Err(PyValueError::new_err(format!(
            "basis must be 'Z' or 'X', got {other:?}"
        ))),
    }
}

/// A note's classical record plus the qubits its holder has.
#[pyclass(name = "Banknote", module = "otm_money")]
struct PyBanknote {
    inner: Option<Banknote>,
}

impl PyBanknote {
    fn wrap(note: Banknote) -> Self {
        Self { inner: Some(note) }
    }

    fn get(&self) -> PyResult<&Banknote> {
        self.inner
            .as_ref()
            .ok_or_else(|| runtime_err("note was handed to the mint"))
    }

    fn get_mut(&mut self) -> PyResult<&mut Banknote> {
        self.inner
            .as_mut()
            .ok_or_else(|| runtime_err("note was handed to the mint"))
    }
}

#[pymethods]
impl PyBanknote {
    #[getter]
    fn note_id(&self) -> PyResult<String> {
        Ok(self.get()?.note_id().to_hex())
    }

    #[getter]
    fn zeta(&self) -> PyResult<usize> {
        Ok(self.get()?.zeta())
    }

    /// Indices of the still-sealed OTMs.
    #[getter]
    fn unopened(&self) -> PyResult<Vec<usize>> {
        Ok(self.get()?.classical().unopened().iter().copied().collect())
    }

    /// `(index, bit)` pairs of the opened OTMs.
    #[getter]
    fn revealed(&self) -> PyResult<Vec<(usize, bool)>> {
        Ok(self
            .get()?
            .classical()
            .revealed()
            .iter()
            .map(|(k, (b, _))| (*k, *b))
            .collect())
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        Ok(PyBytes::new(py, &self.get()?.to_wire()))
    }

    /// Decodes a classical record. The result carries no qubits.
    #[staticmethod]
    #[pyo3(signature = (data, kappa_len = 128))]
    fn from_bytes(data: &[u8], kappa_len: usize) -> PyResult<Self> {
        let classical = wire::decode(data, kappa_len).map_err(value_err)?;
        Ok(Self::wrap(Banknote::from_parts(classical, Default::default())))
    }

    /// Copy of the classical record without any qubits.
    fn classical_copy(&self) -> PyResult<Self> {
        Ok(Self::wrap(self.get()?.classical_copy()))
    }

    fn __repr__(&self) -> String {
        match &self.inner {
            Some(n) => format!(
                "Banknote(id={}, zeta={}, unopened={})",
                &n.note_id().to_hex()[..12],
                n.zeta(),
                n.unopened_count()
            ),
            None => "Banknote(<redeemed>)".into(),
        }
    }
}

/// A signed bit produced by a token.
#[pyclass(name = "TokenSignature", module = "otm_money", skip_from_py_object)]
#[derive(Clone)]
struct PyTokenSignature {
    inner: TokenSignature,
}

#[pymethods]
impl PyTokenSignature {
    #[getter]
    fn beta(&self) -> bool {
        self.inner.beta
    }

    #[getter]
    fn note_id(&self) -> String {
        self.inner.note_id.to_hex()
    }

    /// Rows opened at signing time.
    #[getter]
    fn rows(&self) -> Vec<usize> {
        self.inner.opened.keys().copied().collect()
    }

    /// Copy of this signature claiming the other bit.
    fn flipped(&self) -> Self {
        let mut inner = self.inner.clone();
        inner.beta = !inner.beta;
        Self { inner }
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        TokenSignature::from_bytes(data)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "TokenSignature(beta={}, id={}, rows={})",
            u8::from(self.inner.beta),
            &self.inner.note_id.to_hex()[..12],
            self.inner.opened.len()
        )
    }
}

/// Handle to one simulated qubit.
#[pyclass(name = "Qubit", module = "otm_money")]
struct PyQubit {
    handle: qsim::StateHandle,
}

#[pymethods]
impl PyQubit {
    #[getter]
    fn id(&self) -> u64 {
        self.handle.id()
    }
}

/// Bare qubit store for experimenting with conjugate coding.
#[pyclass(name = "QubitStore", module = "otm_money")]
struct PyQubitStore {
    inner: qsim::QubitStore,
}

#[pymethods]
impl PyQubitStore {
    #[new]
    #[pyo3(signature = (seed = 0, noise_p = 0.0))]
    fn new(seed: u64, noise_p: f64) -> PyResult<Self> {
        Ok(Self {
            inner: qsim::QubitStore::new(seed, noise_p).map_err(value_err)?,
        })
    }

    #[pyo3(signature = (bit, basis, holder = 0))]
    fn prepare(&mut self, bit: bool, basis: &str, holder: u32) -> PyResult<PyQubit> {
        let basis = parse_basis(basis)?;
        Ok(PyQubit {
            handle: self.inner.prepare(Party(holder), bit, basis),
        })
    }

    #[pyo3(signature = (qubit, basis, party = 0))]
    fn measure(&mut self, qubit: &PyQubit, basis: &str, party: u32) -> PyResult<bool> {
        let basis = parse_basis(basis)?;
        self.inner
            .measure(Party(party), &qubit.handle, basis)
            .map_err(value_err)
    }

    #[getter]
    fn live_count(&self) -> usize {
        self.inner.live_count()
    }
}

/// One mint, one qubit store and one seeded random stream. Parties are
/// plain integers; party 0 is the mint.
#[pyclass(name = "Simulation", module = "otm_money")]
struct PySimulation {
    store: qsim::QubitStore,
    mint: Mint,
    rng: ChaCha12Rng,
}

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (seed = 1, zeta = 128, xi = 16, n_otm = 256, delta = 0.2, noise_p = 0.05, kappa_len = 128, notes = 16))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        seed: u64,
        zeta: usize,
        xi: usize,
        n_otm: usize,
        delta: f64,
        noise_p: f64,
        kappa_len: usize,
        notes: u64,
    ) -> PyResult<Self> {
        let params = NoteParams {
            zeta,
            xi,
            kappa_len,
            otm: OtmParams {
                n_otm,
                delta,
                secret_len: kappa_len,
            },
        };
        params.otm.validate_for_noise(noise_p).map_err(value_err)?;
        Ok(Self {
            store: qsim::QubitStore::new(seed, noise_p).map_err(value_err)?,
            mint: Mint::with_capacity(&seed.to_be_bytes(), params, notes).map_err(value_err)?,
            rng: ChaCha12Rng::seed_from_u64(seed),
        })
    }

    /// Hex Merkle root of the mint's signing key.
    #[getter]
    fn mint_public_key(&self) -> String {
        self.mint.public_key().root.to_hex()
    }

    #[getter]
    fn live_qubits(&self) -> usize {
        self.store.live_count()
    }

    #[getter]
    fn notes_remaining(&self) -> u64 {
        self.mint.notes_remaining()
    }

    fn issue(&mut self, holder: u32) -> PyResult<PyBanknote> {
        self.mint
            .issue(&mut self.store, Party(holder), &mut self.rng)
            .map(PyBanknote::wrap)
            .map_err(runtime_err)
    }

    /// Cut-and-choose verification; returns the verdict name and the
    /// opened `(index, bit)` pairs.
    #[pyo3(signature = (note, verifier, xi = None))]
    fn verify(
        &mut self,
        note: &mut PyBanknote,
        verifier: u32,
        xi: Option<usize>,
    ) -> PyResult<(String, Vec<(usize, bool)>)> {
        let xi = xi.unwrap_or(self.mint.params().xi);
        let pk = self.mint.public_key();
        let out = banknote::verify(
            &mut self.store,
            Party(verifier),
            note.get_mut()?,
            xi,
            &pk,
            &mut self.rng,
        );
        Ok((out.verdict.to_string(), out.opened))
    }

    /// Verification under the token majority rule.
    #[pyo3(signature = (note, verifier, xi = None))]
    fn qtds_verify(&mut self, note: &mut PyBanknote, verifier: u32, xi: Option<usize>) -> PyResult<String> {
        let xi = xi.unwrap_or(self.mint.params().xi);
        let pk = self.mint.public_key();
        let out = qtds::qtds_verify_note(
            &mut self.store,
            Party(verifier),
            note.get_mut()?,
            xi,
            &pk,
            &mut self.rng,
        );
        Ok(out.verdict.to_string())
    }

    /// Moves the note's qubits from `sender` to `receiver`; `note` keeps
    /// only its classical record.
    fn transfer(&mut self, note: &mut PyBanknote, sender: u32, receiver: u32) -> PyResult<PyBanknote> {
        banknote::transfer(&mut self.store, note.get_mut()?, Party(sender), Party(receiver))
            .map(PyBanknote::wrap)
            .map_err(runtime_err)
    }

    /// Hands the note to the mint and returns a fresh one.
    fn redeem(&mut self, note: &mut PyBanknote, holder: u32) -> PyResult<PyBanknote> {
        let taken = note
            .inner
            .take()
            .ok_or_else(|| runtime_err("note was handed to the mint"))?;
        self.mint
            .redeem(&mut self.store, taken, Party(holder), &mut self.rng)
            .map(PyBanknote::wrap)
            .map_err(runtime_err)
    }

    fn sign_bit(&mut self, note: &mut PyBanknote, signer: u32, beta: bool) -> PyResult<PyTokenSignature> {
        qtds::sign_bit(&mut self.store, Party(signer), note.get_mut()?, beta)
            .map(|inner| PyTokenSignature { inner })
            .map_err(runtime_err)
    }

    /// Signs the bits of `message` (most significant first), one note per
    /// bit. Nothing is consumed unless every note can sign.
    fn sign_message(
        &mut self,
        mut notes: Vec<PyRefMut<'_, PyBanknote>>,
        signer: u32,
        message: &[u8],
    ) -> PyResult<Vec<PyTokenSignature>> {
        let bits = qtds::message_bits(message);
        let mut taken = Vec::with_capacity(notes.len());
        for n in notes.iter_mut() {
            taken.push(n.inner.take());
        }
        if taken.iter().any(Option::is_none) {
            for (n, t) in notes.iter_mut().zip(taken) {
                n.inner = t;
            }
            return Err(runtime_err("note was handed to the mint"));
        }
        let mut owned: Vec<Banknote> = taken.into_iter().flatten().collect();
        let result = qtds::sign_message(&mut self.store, Party(signer), &mut owned, &bits);
        for (n, note) in notes.iter_mut().zip(owned) {
            n.inner = Some(note);
        }
        result
            .map(|sigs| sigs.into_iter().map(|inner| PyTokenSignature { inner }).collect())
            .map_err(runtime_err)
    }

    fn verify_sig(&self, sig: &PyTokenSignature) -> bool {
        qtds::verify_sig(&sig.inner, &self.mint.public_key(), self.mint.params().zeta)
    }
}

#[pyfunction]
fn list_scenarios() -> Vec<&'static str> {
    harness::list_scenarios()
}

/// Runs a named scenario and returns its JSON report.
#[pyfunction]
#[pyo3(signature = (scenario, seed = None, trials = None, zeta = None, xi = None, n_otm = None, delta = None, noise_p = None))]
#[allow(clippy::too_many_arguments)]
fn run_scenario(
    py: Python<'_>,
    scenario: &str,
    seed: Option<u64>,
    trials: Option<u64>,
    zeta: Option<usize>,
    xi: Option<usize>,
    n_otm: Option<usize>,
    delta: Option<f64>,
    noise_p: Option<f64>,
) -> PyResult<String> {
    let mut config = ScenarioConfig::for_scenario(scenario);
    config.seed = seed.unwrap_or(config.seed);
    config.trials = trials;
    config.zeta = zeta.unwrap_or(config.zeta);
    config.xi = xi.unwrap_or(config.xi);
    config.n_otm = n_otm.unwrap_or(config.n_otm);
    config.delta = delta.unwrap_or(config.delta);
    config.noise_p = noise_p.unwrap_or(config.noise_p);
    let report = py.detach(|| harness::run_scenario(&config)).map_err(value_err)?;
    Ok(report.to_json())
}

#[pymodule]
fn otm_money(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySimulation>()?;
    m.add_class::<PyBanknote>()?;
    m.add_class::<PyTokenSignature>()?;
    m.add_class::<PyQubitStore>()?;
    m.add_class::<PyQubit>()?;
    m.add_function(wrap_pyfunction!(list_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
