//! Quantum banknotes.
//!
//! A note is a table of `2 * zeta` pre-image hashes, each signed by the mint,
//! plus one OTM per row `i` that releases either `kappa_{0,i}` or
//! `kappa_{1,i}`. Rows are split into the still-sealed set `J` and the opened
//! set `K` whose revealed pre-images travel with the note.
//!
//! Verification samples `xi` sealed rows and a random bit for each, opens
//! those OTMs and compares hashes. Opened rows move from `J` to `K`, so a
//! note supports `floor(zeta / xi)` verifications before it must be redeemed.

mod game;
mod mint;
pub mod wire;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use crate::codec::DecodeError;
use crate::hashsig::{
    self, hash, hash_tagged, Digest, HashSigError, MintKeypair, MintPublicKey, MintSignature, PreImage, DIGEST_LEN,
};
use crate::otm::{otm_create, otm_retrieve, OtmError, OtmParams, OtmPayload, OtmToken};
use crate::qsim::{Party, QsimError, QubitStore, StateHandle};

pub use game::{
    adversary_suite, forgery_game, premeasure_strip, premeasure_trial, Adversary, AdversaryContext, ForgeryOutcome,
    IdentityCopy, PreMeasureZ, SplitCopy, ADVERSARY, VERIFIER_A, VERIFIER_B,
};
pub use mint::Mint;

const TAG_NOTE_ID: u8 = 0x10;
const TAG_SLOT: u8 = 0x53;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BanknoteError {
    #[error("invalid note parameters: {0}")]
    InvalidParams(String),
    #[error("mint key has {remaining} one-time keys left, note needs {needed}")]
    KeysExhausted { needed: u64, remaining: u64 },
    #[error("sender does not hold the qubits of OTM {0}")]
    HandleNotHeld(usize),
    #[error("redemption rejected: {0}")]
    RedemptionRejected(Verdict),
    #[error("note {0} was already redeemed")]
    DoubleRedemption(Digest),
    #[error(transparent)]
    Signature(#[from] HashSigError),
    #[error(transparent)]
    Otm(#[from] OtmError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error("wire format: {0}")]
    Wire(#[from] DecodeError),
}

/// Per-note parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NoteParams {
    /// OTMs per note.
    pub zeta: usize,
    /// OTMs opened per verification.
    pub xi: usize,
    /// Pre-image length in bytes.
    pub kappa_len: usize,
    pub otm: OtmParams,
}

impl Default for NoteParams {
    fn default() -> Self {
        Self {
            zeta: 128,
            xi: 16,
            kappa_len: 128,
            otm: OtmParams::default(),
        }
    }
}

impl NoteParams {
    pub fn new(zeta: usize, xi: usize, otm: OtmParams) -> Self {
        Self {
            zeta,
            xi,
            kappa_len: otm.secret_len,
            otm,
        }
    }

    pub fn validate(&self) -> Result<(), BanknoteError> {
        if self.xi == 0 || self.xi >= self.zeta {
            return Err(BanknoteError::InvalidParams(format!(
                "need 0 < xi < zeta, got xi = {}, zeta = {}",
                self.xi, self.zeta
            )));
        }
        if self.zeta > u32::MAX as usize / 2 {
            return Err(BanknoteError::InvalidParams("zeta too large".into()));
        }
        if self.kappa_len < 4 * DIGEST_LEN {
            return Err(BanknoteError::InvalidParams(format!(
                "kappa_len = {} must be at least {} (4 digest lengths)",
                self.kappa_len,
                4 * DIGEST_LEN
            )));
        }
        if self.otm.secret_len != self.kappa_len {
            return Err(BanknoteError::InvalidParams(
                "OTM secret length must equal kappa_len".into(),
            ));
        }
        self.otm.validate()?;
        Ok(())
    }

    pub fn signatures_per_note(&self) -> u64 {
        2 * self.zeta as u64
    }

    /// Smallest Merkle depth whose capacity covers `notes` notes.
    pub fn required_depth(&self, notes: u64) -> u8 {
        let needed = self.signatures_per_note().saturating_mul(notes).max(2);
        (64 - (needed - 1).leading_zeros()) as u8
    }

    /// Verifications a fresh note survives under the cut-and-choose rule.
    pub fn lifetime(&self) -> usize {
        self.zeta / self.xi
    }
}

/// Result of one verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    Pass,
    FailUsedUp,
    FailBadSignature,
    FailBadPreimage,
    /// Inconsistent classical record (broken partition, wrong table sizes,
    /// unusable verifier parameters).
    FailMalformed,
    /// The OTM at this row could not produce the challenged pre-image.
    FailChallenge(usize),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    /// Stable label without the challenge index, for tallies.
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::FailUsedUp => "fail-used-up",
            Verdict::FailBadSignature => "fail-bad-signature",
            Verdict::FailBadPreimage => "fail-bad-preimage",
            Verdict::FailMalformed => "fail-malformed",
            Verdict::FailChallenge(_) => "fail-challenge",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::FailChallenge(i) => write!(f, "fail-challenge({i})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyOutcome {
    pub verdict: Verdict,
    /// Rows opened by this verification with their challenge bits; empty
    /// unless the verdict is `Pass`.
    pub opened: Vec<(usize, bool)>,
}

impl VerifyOutcome {
    fn fail(verdict: Verdict) -> Self {
        Self {
            verdict,
            opened: Vec::new(),
        }
    }
}

/// Which remaining-OTM rule gates a verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UsedUpRule {
    /// Fail when fewer than `xi` sealed OTMs remain.
    CutAndChoose,
    /// Fail unless `|J| - xi > zeta / 2 + 1` (signature tokens).
    Majority,
}

impl UsedUpRule {
    pub fn allows(self, zeta: usize, unopened: usize, xi: usize) -> bool {
        match self {
            UsedUpRule::CutAndChoose => unopened >= xi,
            UsedUpRule::Majority => unopened >= xi && 2 * (unopened - xi) > zeta + 2,
        }
    }
}

/// Everything about a note that can be copied.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalNote {
    note_id: Digest,
    hashes: Vec<[Digest; 2]>,
    sigs: Vec<[MintSignature; 2]>,
    unopened: BTreeSet<usize>,
    tokens: BTreeMap<usize, OtmToken>,
    revealed: BTreeMap<usize, (bool, PreImage)>,
}

impl ClassicalNote {
    pub fn note_id(&self) -> Digest {
        self.note_id
    }

    pub fn zeta(&self) -> usize {
        self.hashes.len()
    }

    pub fn hashes(&self) -> &[[Digest; 2]] {
        &self.hashes
    }

    pub fn signatures(&self) -> &[[MintSignature; 2]] {
        &self.sigs
    }

    /// The sealed set `J`.
    pub fn unopened(&self) -> &BTreeSet<usize> {
        &self.unopened
    }

    pub fn token(&self, j: usize) -> Option<&OtmToken> {
        self.tokens.get(&j)
    }

    /// The opened set `K` with revealed `(bit, kappa)`.
    pub fn revealed(&self) -> &BTreeMap<usize, (bool, PreImage)> {
        &self.revealed
    }

    pub fn kappa_len(&self) -> Option<usize> {
        self.revealed.values().next().map(|(_, k)| k.len())
    }

    /// `J` and `K` partition `[zeta]` and tokens sit exactly on `J`.
    pub fn partition_ok(&self) -> bool {
        let zeta = self.zeta();
        self.sigs.len() == zeta
            && self.unopened.len() + self.revealed.len() == zeta
            && self
                .unopened
                .iter()
                .all(|j| *j < zeta && !self.revealed.contains_key(j))
            && self.revealed.keys().all(|k| *k < zeta)
            && self.tokens.len() == self.unopened.len()
            && self.tokens.keys().all(|j| self.unopened.contains(j))
    }

    /// Overwrites a revealed entry. Intended for building tampered records.
    pub fn set_revealed(&mut self, k: usize, bit: bool, kappa: PreImage) {
        self.revealed.insert(k, (bit, kappa));
    }

    /// Replaces the hardware token of a sealed row.
    pub fn replace_token(&mut self, j: usize, token: OtmToken) {
        if self.unopened.contains(&j) {
            self.tokens.insert(j, token);
        }
    }

    pub(crate) fn from_raw(
        note_id: Digest,
        hashes: Vec<[Digest; 2]>,
        sigs: Vec<[MintSignature; 2]>,
        unopened: BTreeSet<usize>,
        tokens: BTreeMap<usize, OtmToken>,
        revealed: BTreeMap<usize, (bool, PreImage)>,
    ) -> Self {
        Self {
            note_id,
            hashes,
            sigs,
            unopened,
            tokens,
            revealed,
        }
    }

    /// Signatures, note id and revealed pre-images; the checks that need no
    /// qubits.
    pub fn check_static(&self, pk: &MintPublicKey) -> Result<(), Verdict> {
        if !self.partition_ok() || compute_note_id(&self.hashes) != self.note_id {
            return Err(Verdict::FailMalformed);
        }
        if !self.signatures_valid(pk) {
            return Err(Verdict::FailBadSignature);
        }
        let preimages_ok = self
            .revealed
            .iter()
            .all(|(&k, (bit, kappa))| kappa.digest() == self.hashes[k][usize::from(*bit)]);
        if !preimages_ok {
            return Err(Verdict::FailBadPreimage);
        }
        Ok(())
    }

    pub fn signatures_valid(&self, pk: &MintPublicKey) -> bool {
        self.hashes.iter().zip(&self.sigs).enumerate().all(|(i, (row, sigs))| {
            (0..2).all(|b| {
                let msg = slot_message(&self.note_id, i, b == 1, &row[b]);
                hashsig::verify(pk, &msg, &sigs[b])
            })
        })
    }
}

/// A classical record plus whatever qubits its holder actually has.
#[derive(Debug)]
pub struct Banknote {
    classical: ClassicalNote,
    payloads: BTreeMap<usize, OtmPayload>,
}

impl Banknote {
    pub fn from_parts(classical: ClassicalNote, payloads: BTreeMap<usize, OtmPayload>) -> Self {
        Self { classical, payloads }
    }

    pub fn into_parts(self) -> (ClassicalNote, BTreeMap<usize, OtmPayload>) {
        (self.classical, self.payloads)
    }

    pub fn classical(&self) -> &ClassicalNote {
        &self.classical
    }

    pub fn classical_mut(&mut self) -> &mut ClassicalNote {
        &mut self.classical
    }

    /// The classical data alone; the copy has no qubits.
    pub fn classical_copy(&self) -> Banknote {
        Banknote::from_parts(self.classical.clone(), BTreeMap::new())
    }

    pub fn note_id(&self) -> Digest {
        self.classical.note_id
    }

    pub fn zeta(&self) -> usize {
        self.classical.zeta()
    }

    pub fn unopened_count(&self) -> usize {
        self.classical.unopened.len()
    }

    pub fn revealed_count(&self) -> usize {
        self.classical.revealed.len()
    }

    pub fn payload(&self, j: usize) -> Option<&OtmPayload> {
        self.payloads.get(&j)
    }

    pub fn take_payload(&mut self, j: usize) -> Option<OtmPayload> {
        self.payloads.remove(&j)
    }

    /// Installs a token and payload in sealed row `j`, replacing what was
    /// there.
    pub fn insert_otm(&mut self, j: usize, token: OtmToken, payload: OtmPayload) {
        if self.classical.unopened.contains(&j) {
            self.classical.tokens.insert(j, token);
            self.payloads.insert(j, payload);
        }
    }

    pub fn handles(&self) -> impl Iterator<Item = &StateHandle> {
        self.payloads.values().flat_map(|p| p.handles())
    }

    /// Serialized classical record.
    pub fn to_wire(&self) -> Vec<u8> {
        wire::encode(&self.classical)
    }
}

pub fn compute_note_id(hashes: &[[Digest; 2]]) -> Digest {
    let flat: Vec<u8> = hashes.iter().flat_map(|row| row.iter().flat_map(|d| d.0)).collect();
    hash_tagged(TAG_NOTE_ID, &[&(hashes.len() as u32).to_be_bytes(), &flat])
}

/// Bytes the mint signs for slot `(i, b)`: tag, note id, row, bit, digest.
pub fn slot_message(note_id: &Digest, i: usize, b: bool, digest: &Digest) -> Vec<u8> {
    let mut msg = Vec::with_capacity(1 + 2 * DIGEST_LEN + 5);
    msg.push(TAG_SLOT);
    msg.extend_from_slice(note_id.as_bytes());
    msg.extend_from_slice(&(i as u32).to_be_bytes());
    msg.push(u8::from(b));
    msg.extend_from_slice(digest.as_bytes());
    msg
}

/// Mints a fresh note whose qubits are held by [`Party::MINT`].
pub fn mint_note<R: Rng + ?Sized>(
    store: &mut QubitStore,
    params: &NoteParams,
    keypair: &mut MintKeypair,
    rng: &mut R,
) -> Result<Banknote, BanknoteError> {
    params.validate()?;
    let needed = params.signatures_per_note();
    if keypair.remaining() < needed {
        return Err(BanknoteError::KeysExhausted {
            needed,
            remaining: keypair.remaining(),
        });
    }
    let kappas: Vec<[Vec<u8>; 2]> = (0..params.zeta)
        .map(|_| {
            [0, 1].map(|_| {
                let mut k = vec![0u8; params.kappa_len];
                rng.fill(k.as_mut_slice());
                k
            })
        })
        .collect();
    let hashes: Vec<[Digest; 2]> = kappas.iter().map(|[k0, k1]| [hash(k0), hash(k1)]).collect();
    let note_id = compute_note_id(&hashes);
    let mut sigs = Vec::with_capacity(params.zeta);
    for (i, row) in hashes.iter().enumerate() {
        let s0 = keypair.sign(&slot_message(&note_id, i, false, &row[0]))?;
        let s1 = keypair.sign(&slot_message(&note_id, i, true, &row[1]))?;
        sigs.push([s0, s1]);
    }
    let mut tokens = BTreeMap::new();
    let mut payloads = BTreeMap::new();
    for (i, [k0, k1]) in kappas.iter().enumerate() {
        let (token, payload) = otm_create(store, Party::MINT, rng, k0, k1, &params.otm)?;
        tokens.insert(i, token);
        payloads.insert(i, payload);
    }
    let classical = ClassicalNote {
        note_id,
        hashes,
        sigs,
        unopened: (0..params.zeta).collect(),
        tokens,
        revealed: BTreeMap::new(),
    };
    Ok(Banknote::from_parts(classical, payloads))
}

/// Uniform `xi`-subset of the sealed rows, each with a uniform challenge bit.
pub fn sample_challenge<R: Rng + ?Sized>(unopened: &BTreeSet<usize>, xi: usize, rng: &mut R) -> Vec<(usize, bool)> {
    let rows: Vec<usize> = unopened.iter().copied().collect();
    let picked: Vec<usize> = sample(rng, rows.len(), xi).into_iter().map(|k| rows[k]).collect();
    picked.into_iter().map(|row| (row, rng.random())).collect()
}

/// Cut-and-choose verification on behalf of `verifier`.
pub fn verify<R: Rng + ?Sized>(
    store: &mut QubitStore,
    verifier: Party,
    note: &mut Banknote,
    xi: usize,
    pk: &MintPublicKey,
    rng: &mut R,
) -> VerifyOutcome {
    verify_with_rule(store, verifier, note, xi, pk, rng, UsedUpRule::CutAndChoose)
}

/// Verification with an explicit used-up rule. On anything but `Pass` the
/// note's classical record is left as it was (opened qubits stay dead).
pub fn verify_with_rule<R: Rng + ?Sized>(
    store: &mut QubitStore,
    verifier: Party,
    note: &mut Banknote,
    xi: usize,
    pk: &MintPublicKey,
    rng: &mut R,
    rule: UsedUpRule,
) -> VerifyOutcome {
    let zeta = note.zeta();
    if xi == 0 || xi >= zeta {
        return VerifyOutcome::fail(Verdict::FailMalformed);
    }
    if let Err(verdict) = note.classical.check_static(pk) {
        return VerifyOutcome::fail(verdict);
    }
    if !rule.allows(zeta, note.unopened_count(), xi) {
        return VerifyOutcome::fail(Verdict::FailUsedUp);
    }

    let challenge = sample_challenge(&note.classical.unopened, xi, rng);
    let mut opened = Vec::with_capacity(xi);
    for &(row, bit) in &challenge {
        let answer = match (note.classical.tokens.get(&row), note.payloads.get(&row)) {
            (Some(token), Some(payload)) => otm_retrieve(store, verifier, token, payload, bit).ok(),
            _ => None,
        };
        match answer {
            Some(kappa) if hash(&kappa) == note.classical.hashes[row][usize::from(bit)] => {
                opened.push((row, bit, PreImage::new(kappa)));
            }
            _ => return VerifyOutcome::fail(Verdict::FailChallenge(row)),
        }
    }

    for (row, bit, kappa) in opened.iter().cloned() {
        note.classical.unopened.remove(&row);
        note.classical.tokens.remove(&row);
        note.payloads.remove(&row);
        note.classical.revealed.insert(row, (bit, kappa));
    }
    VerifyOutcome {
        verdict: Verdict::Pass,
        opened: opened.into_iter().map(|(r, b, _)| (r, b)).collect(),
    }
}

/// Hands a note from `from` to `to`: the classical record travels through the
/// wire format and every sealed OTM's qubits change holder. The sender's
/// `note` keeps only its classical data.
pub fn transfer(
    store: &mut QubitStore,
    note: &mut Banknote,
    from: Party,
    to: Party,
) -> Result<Banknote, BanknoteError> {
    for &j in &note.classical.unopened {
        let payload = note.payloads.get(&j).ok_or(BanknoteError::HandleNotHeld(j))?;
        if payload.handles().iter().any(|h| store.check_held(from, h).is_err()) {
            return Err(BanknoteError::HandleNotHeld(j));
        }
    }
    let received = wire::decode(&note.to_wire(), note.classical.kappa_len().unwrap_or(0))?;
    let payloads = std::mem::take(&mut note.payloads);
    store.move_handles(from, to, payloads.values().flat_map(|p| p.handles()))?;
    Ok(Banknote::from_parts(received, payloads))
}

/// Lenient hand-over: whatever qubits `from` still holds go to `to`; the
/// rest are dropped. Models an untrusted sender.
pub(crate) fn deliver(store: &mut QubitStore, note: Banknote, from: Party, to: Party) -> Banknote {
    let (classical, payloads) = note.into_parts();
    let kept = payloads
        .into_iter()
        .filter(|(_, p)| store.move_handles(from, to, p.handles()).is_ok())
        .collect();
    Banknote::from_parts(classical, kept)
}
