//! One-time memories from conjugate coding plus a stateless hardware token.
//!
//! The sender picks random strings `b` and `theta` of length `n_otm`, hands the
//! receiver qubits `|b_i>_{theta_i}` and a token that knows `(b, theta, s0,
//! s1)`. To learn `s_c`, the receiver measures every qubit in basis `c` and
//! submits the outcomes. The token only looks at the positions whose encoding
//! basis matches `c` and releases `s_c` if at most a `delta` fraction of
//! them disagree with `b`.
//!
//! The token never counts queries: security comes from the fact that a
//! measured qubit is gone.

use rand::Rng;
use thiserror::Error;

use crate::codec::{DecodeError, Reader, Writer};
use crate::qsim::{Basis, Party, QsimError, QubitStore, StateHandle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtmError {
    #[error("secrets must both be {expected} bytes, got {s0} and {s1}")]
    SecretLengthMismatch { expected: usize, s0: usize, s1: usize },
    #[error("expected {expected} measurement outcomes, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("token rejected the measurement outcomes")]
    TokenReject,
    #[error("one-time memory already executed")]
    AlreadyExecuted,
    #[error("invalid OTM parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error("malformed hardware blob: {0}")]
    Blob(#[from] DecodeError),
}

/// Shape of every OTM in a deployment.
#[derive(Clone, Debug, PartialEq)]
pub struct OtmParams {
    /// Qubits per OTM.
    pub n_otm: usize,
    /// Largest tolerated mismatch fraction over the checked positions.
    pub delta: f64,
    /// Byte length of each secret.
    pub secret_len: usize,
}

impl Default for OtmParams {
    fn default() -> Self {
        Self {
            n_otm: 256,
            delta: 0.2,
            secret_len: 128,
        }
    }
}

impl OtmParams {
    pub const MIN_QUBITS: usize = 8;

    pub fn validate(&self) -> Result<(), OtmError> {
        if self.n_otm < Self::MIN_QUBITS {
            return Err(OtmError::InvalidParams(format!(
                "n_otm = {} below minimum {}",
                self.n_otm,
                Self::MIN_QUBITS
            )));
        }
        if !(0.0..0.5).contains(&self.delta) {
            return Err(OtmError::InvalidParams(format!(
                "delta = {} outside [0, 0.5)",
                self.delta
            )));
        }
        Ok(())
    }

    /// Checks that honest parties have room to absorb channel noise.
    pub fn validate_for_noise(&self, noise_p: f64) -> Result<(), OtmError> {
        self.validate()?;
        if noise_p >= self.delta && !(noise_p == 0.0 && self.delta == 0.0) {
            return Err(OtmError::InvalidParams(format!(
                "noise_p = {noise_p} must stay below delta = {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// The stateless check function hard-coded into secure hardware.
#[derive(Clone, Debug, PartialEq)]
pub struct OtmToken {
    bits: Vec<bool>,
    bases: Vec<Basis>,
    secrets: [Vec<u8>; 2],
    delta: f64,
}

impl OtmToken {
    pub fn new(bits: Vec<bool>, bases: Vec<Basis>, s0: Vec<u8>, s1: Vec<u8>, delta: f64) -> Result<Self, OtmError> {
        if bits.len() != bases.len() {
            return Err(OtmError::LengthMismatch {
                expected: bits.len(),
                got: bases.len(),
            });
        }
        if s0.len() != s1.len() {
            return Err(OtmError::SecretLengthMismatch {
                expected: s0.len(),
                s0: s0.len(),
                s1: s1.len(),
            });
        }
        Ok(Self {
            bits,
            bases,
            secrets: [s0, s1],
            delta,
        })
    }

    pub fn n_otm(&self) -> usize {
        self.bits.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Releases `s_choice` if the outcomes agree with `b` on the positions
    /// encoded in basis `choice`, up to the `delta` tolerance.
    pub fn check(&self, choice: bool, outcomes: &[bool]) -> Result<&[u8], OtmError> {
        if outcomes.len() != self.bits.len() {
            return Err(OtmError::LengthMismatch {
                expected: self.bits.len(),
                got: outcomes.len(),
            });
        }
        let basis = Basis::from_bit(choice);
        let (checked, mismatched) = self
            .bases
            .iter()
            .zip(&self.bits)
            .zip(outcomes)
            .filter(|((&theta, _), _)| theta == basis)
            .fold((0usize, 0usize), |(n, bad), ((_, &b), &o)| {
                (n + 1, bad + usize::from(b != o))
            });
        // An empty checked set carries no evidence of a correct measurement.
        if checked == 0 || mismatched as f64 / checked as f64 > self.delta {
            return Err(OtmError::TokenReject);
        }
        Ok(&self.secrets[usize::from(choice)])
    }

    /// Sealed hardware image. Protocol code carries it around but never
    /// looks inside.
    pub fn to_blob(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.bits.len() as u32)
            .u32(self.secrets[0].len() as u32)
            .u64(self.delta.to_bits())
            .bits(self.bits.iter().copied())
            .bits(self.bases.iter().map(|b| b.bit()))
            .bytes(&self.secrets[0])
            .bytes(&self.secrets[1]);
        w.finish()
    }

    pub fn from_blob(blob: &[u8]) -> Result<Self, OtmError> {
        let mut r = Reader::new(blob);
        let n = r.u32()? as usize;
        let secret_len = r.u32()? as usize;
        let delta = f64::from_bits(r.u64()?);
        let bits = r.bits(n)?;
        let bases = r.bits(n)?.into_iter().map(Basis::from_bit).collect();
        let s0 = r.take(secret_len)?.to_vec();
        let s1 = r.take(secret_len)?.to_vec();
        r.finish()?;
        Self::new(bits, bases, s0, s1, delta)
    }
}

/// Free-function form of [`OtmToken::check`].
pub fn token_check<'t>(token: &'t OtmToken, choice: bool, outcomes: &[bool]) -> Result<&'t [u8], OtmError> {
    token.check(choice, outcomes)
}

/// The qubit half of an OTM.
#[derive(Debug)]
pub struct OtmPayload {
    handles: Vec<StateHandle>,
}

impl OtmPayload {
    pub fn new(handles: Vec<StateHandle>) -> Self {
        Self { handles }
    }

    pub fn len(&self) -> usize {
        self.handles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.handles.is_empty()
    }

    pub fn handles(&self) -> &[StateHandle] {
        &self.handles
    }

    pub fn into_handles(self) -> Vec<StateHandle> {
        self.handles
    }
}

/// Builds a fresh OTM holding `(s0, s1)`; the payload qubits belong to
/// `holder`.
pub fn otm_create<R: Rng + ?Sized>(
    store: &mut QubitStore,
    holder: Party,
    rng: &mut R,
    s0: &[u8],
    s1: &[u8],
    params: &OtmParams,
) -> Result<(OtmToken, OtmPayload), OtmError> {
    if s0.len() != params.secret_len || s1.len() != params.secret_len {
        return Err(OtmError::SecretLengthMismatch {
            expected: params.secret_len,
            s0: s0.len(),
            s1: s1.len(),
        });
    }
    let bits: Vec<bool> = (0..params.n_otm).map(|_| rng.random()).collect();
    let bases: Vec<Basis> = (0..params.n_otm).map(|_| Basis::from_bit(rng.random())).collect();
    let handles = bits
        .iter()
        .zip(&bases)
        .map(|(&b, &theta)| store.prepare(holder, b, theta))
        .collect();
    let token = OtmToken::new(bits, bases, s0.to_vec(), s1.to_vec(), params.delta)?;
    Ok((token, OtmPayload::new(handles)))
}

/// Measures qubit `i` of the payload in `bases[i]`. Fails without touching
/// any qubit if one of them is dead or held by someone else.
pub fn measure_payload(
    store: &mut QubitStore,
    party: Party,
    payload: &OtmPayload,
    bases: &[Basis],
) -> Result<Vec<bool>, OtmError> {
    if bases.len() != payload.len() {
        return Err(OtmError::LengthMismatch {
            expected: payload.len(),
            got: bases.len(),
        });
    }
    for h in payload.handles() {
        store.check_held(party, h)?;
    }
    payload
        .handles()
        .iter()
        .zip(bases)
        .map(|(h, &basis)| store.measure(party, h, basis).map_err(OtmError::from))
        .collect()
}

/// Honest retrieval of `s_choice`: measure everything in basis `choice` and
/// ask the token.
pub fn otm_retrieve(
    store: &mut QubitStore,
    party: Party,
    token: &OtmToken,
    payload: &OtmPayload,
    choice: bool,
) -> Result<Vec<u8>, OtmError> {
    if payload.len() != token.n_otm() {
        return Err(OtmError::LengthMismatch {
            expected: token.n_otm(),
            got: payload.len(),
        });
    }
    let bases = vec![Basis::from_bit(choice); payload.len()];
    let outcomes = measure_payload(store, party, payload, &bases)?;
    token.check(choice, &outcomes).map(<[u8]>::to_vec)
}

/// Measurement strategies for trying to pull both secrets out of one OTM.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtractStrategy {
    AllZ,
    AllX,
    /// Independent uniform basis per qubit.
    RandomBasis,
}

impl ExtractStrategy {
    pub const ALL: [ExtractStrategy; 3] = [
        ExtractStrategy::AllZ,
        ExtractStrategy::AllX,
        ExtractStrategy::RandomBasis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExtractStrategy::AllZ => "all-z",
            ExtractStrategy::AllX => "all-x",
            ExtractStrategy::RandomBasis => "random-basis",
        }
    }
}

/// Measures the payload once according to `strategy` and queries the token
/// for both choices with the same outcomes.
pub fn extract_both<R: Rng + ?Sized>(
    store: &mut QubitStore,
    party: Party,
    token: &OtmToken,
    payload: &OtmPayload,
    strategy: ExtractStrategy,
    rng: &mut R,
) -> Result<[Option<Vec<u8>>; 2], OtmError> {
    let bases: Vec<Basis> = match strategy {
        ExtractStrategy::AllZ => vec![Basis::Z; payload.len()],
        ExtractStrategy::AllX => vec![Basis::X; payload.len()],
        ExtractStrategy::RandomBasis => (0..payload.len()).map(|_| Basis::from_bit(rng.random())).collect(),
    };
    let outcomes = measure_payload(store, party, payload, &bases)?;
    Ok([false, true].map(|c| token.check(c, &outcomes).ok().map(<[u8]>::to_vec)))
}

/// Ideal one-time memory: answers a single query, then forgets everything.
#[derive(Debug)]
pub struct IdealOtm {
    secrets: Option<[Vec<u8>; 2]>,
}

impl IdealOtm {
    pub fn new(s0: Vec<u8>, s1: Vec<u8>) -> Self {
        Self {
            secrets: Some([s0, s1]),
        }
    }

    pub fn is_executed(&self) -> bool {
        self.secrets.is_none()
    }

    pub fn execute(&mut self, choice: bool) -> Result<Vec<u8>, OtmError> {
        let [s0, s1] = self.secrets.take().ok_or(OtmError::AlreadyExecuted)?;
        Ok(if choice { s1 } else { s0 })
    }
}
