//! Signature tokens: a banknote whose holder signs one bit on the mint's
//! behalf by opening every sealed OTM at that bit.
//!
//! Token verification keeps a strict majority of rows sealed so that a
//! signature's matching majority can never be assembled from pre-images
//! revealed by earlier verifications.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::Rng;
use thiserror::Error;

use crate::banknote::{compute_note_id, slot_message, verify_with_rule, Banknote, UsedUpRule, VerifyOutcome};
use crate::codec::{DecodeError, Reader, Writer};
use crate::hashsig::{self, hash, Digest, MintPublicKey, MintSignature, DIGEST_LEN};
use crate::otm::measure_payload;
use crate::qsim::{Basis, Party, QsimError, QubitStore};

pub const SIG_VERSION: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QtdsError {
    #[error("token has {unopened} sealed OTMs out of {zeta}; signing needs more than zeta/2 + 1")]
    MajorityViolated { unopened: usize, zeta: usize },
    #[error("signer does not hold the qubits of OTM {0}")]
    HandleNotHeld(usize),
    #[error("OTM {0} was already opened")]
    Consumed(usize),
    #[error("{notes} notes for {bits} message bits")]
    LengthMismatch { notes: usize, bits: usize },
    #[error("notes {first} and {second} are the same token")]
    DuplicateNote { first: usize, second: usize },
    #[error("note {index}: {source}")]
    Note {
        index: usize,
        #[source]
        source: Box<QtdsError>,
    },
}

/// How [`verify_sig_with`] matches opened values against the hash table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MajorityMode {
    /// `hash(opened_i)` must equal the hash in row `i`, column `beta`.
    #[default]
    Indexed,
    /// `hash(opened_i)` may equal any of the `2 * zeta` hashes. Accepts
    /// signatures for `1 - beta` built from a `beta` signature.
    Membership,
}

/// A signed bit: the opened OTM values together with the note's signed hash
/// table. The key set of `opened` is the sealed set at signing time.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenSignature {
    pub beta: bool,
    pub note_id: Digest,
    pub hashes: Vec<[Digest; 2]>,
    pub sigs: Vec<[MintSignature; 2]>,
    /// `OTM_i(beta)` for each sealed row; empty where the token refused.
    pub opened: BTreeMap<usize, Vec<u8>>,
}

impl TokenSignature {
    pub fn zeta(&self) -> usize {
        self.hashes.len()
    }

    pub fn unopened(&self) -> BTreeSet<usize> {
        self.opened.keys().copied().collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let zeta = self.zeta();
        let mut w = Writer::new();
        w.u8(SIG_VERSION)
            .bytes(self.note_id.as_bytes())
            .u32(zeta as u32)
            .u8(u8::from(self.beta));
        for row in &self.hashes {
            w.bytes(row[0].as_bytes()).bytes(row[1].as_bytes());
        }
        for row in &self.sigs {
            w.prefixed(&row[0].to_bytes()).prefixed(&row[1].to_bytes());
        }
        w.bits((0..zeta).map(|i| self.opened.contains_key(&i)));
        for value in self.opened.values() {
            w.prefixed(value);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let version = r.u8()?;
        if version != SIG_VERSION {
            return Err(DecodeError::BadVersion(version));
        }
        let note_id = digest(&mut r)?;
        let zeta = r.u32()? as usize;
        let beta = match r.u8()? {
            0 => false,
            1 => true,
            _ => return Err(DecodeError::Invalid("beta out of range")),
        };
        if zeta.saturating_mul(2 * DIGEST_LEN) > r.remaining() {
            return Err(DecodeError::Truncated {
                offset: bytes.len() - r.remaining(),
                needed: zeta.saturating_mul(2 * DIGEST_LEN),
            });
        }
        let hashes = (0..zeta)
            .map(|_| Ok([digest(&mut r)?, digest(&mut r)?]))
            .collect::<Result<Vec<_>, DecodeError>>()?;
        let sigs = (0..zeta)
            .map(|_| {
                Ok([
                    MintSignature::from_bytes(r.prefixed()?)?,
                    MintSignature::from_bytes(r.prefixed()?)?,
                ])
            })
            .collect::<Result<Vec<_>, DecodeError>>()?;
        let rows: Vec<usize> = r
            .bits(zeta)?
            .into_iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
            .collect();
        let mut opened = BTreeMap::new();
        for i in rows {
            opened.insert(i, r.prefixed()?.to_vec());
        }
        r.finish()?;
        Ok(Self {
            beta,
            note_id,
            hashes,
            sigs,
            opened,
        })
    }
}

fn digest(r: &mut Reader<'_>) -> Result<Digest, DecodeError> {
    Ok(Digest::from_slice(r.take(DIGEST_LEN)?).expect("exact length"))
}

fn majority_holds(zeta: usize, unopened: usize) -> bool {
    2 * unopened > zeta + 2
}

/// Banknote verification under the majority rule.
pub fn qtds_verify_note<R: Rng + ?Sized>(
    store: &mut QubitStore,
    verifier: Party,
    note: &mut Banknote,
    xi: usize,
    pk: &MintPublicKey,
    rng: &mut R,
) -> VerifyOutcome {
    verify_with_rule(store, verifier, note, xi, pk, rng, UsedUpRule::Majority)
}

fn check_signable(store: &QubitStore, signer: Party, note: &Banknote) -> Result<(), QtdsError> {
    let zeta = note.zeta();
    let unopened = note.unopened_count();
    if !majority_holds(zeta, unopened) {
        return Err(QtdsError::MajorityViolated { unopened, zeta });
    }
    for &j in note.classical().unopened() {
        let payload = note.payload(j).ok_or(QtdsError::HandleNotHeld(j))?;
        for h in payload.handles() {
            match store.check_held(signer, h) {
                Ok(()) => {}
                Err(QsimError::MeasuredDeadHandle(_)) => return Err(QtdsError::Consumed(j)),
                Err(_) => return Err(QtdsError::HandleNotHeld(j)),
            }
        }
        if note.classical().token(j).is_none() {
            return Err(QtdsError::HandleNotHeld(j));
        }
    }
    Ok(())
}

/// Signs `beta` by opening every sealed OTM at `beta`. The payload qubits
/// are consumed but stay attached to the note, so a second signature fails.
pub fn sign_bit(
    store: &mut QubitStore,
    signer: Party,
    note: &mut Banknote,
    beta: bool,
) -> Result<TokenSignature, QtdsError> {
    check_signable(store, signer, note)?;
    let classical = note.classical();
    let mut opened = BTreeMap::new();
    for &j in classical.unopened() {
        let payload = note.payload(j).expect("checked");
        let token = classical.token(j).expect("checked");
        let bases = vec![Basis::from_bit(beta); payload.len()];
        let value = measure_payload(store, signer, payload, &bases)
            .ok()
            .and_then(|outcomes| token.check(beta, &outcomes).ok().map(<[u8]>::to_vec))
            .unwrap_or_default();
        opened.insert(j, value);
    }
    Ok(TokenSignature {
        beta,
        note_id: classical.note_id(),
        hashes: classical.hashes().to_vec(),
        sigs: classical.signatures().to_vec(),
        opened,
    })
}

pub fn verify_sig(sig: &TokenSignature, pk: &MintPublicKey, zeta: usize) -> bool {
    verify_sig_with(sig, pk, zeta, MajorityMode::Indexed)
}

pub fn verify_sig_with(sig: &TokenSignature, pk: &MintPublicKey, zeta: usize, mode: MajorityMode) -> bool {
    let unopened = sig.opened.len();
    if sig.hashes.len() != zeta
        || sig.sigs.len() != zeta
        || sig.opened.keys().any(|&i| i >= zeta)
        || !majority_holds(zeta, unopened)
        || compute_note_id(&sig.hashes) != sig.note_id
    {
        return false;
    }
    let signed = sig.hashes.iter().zip(&sig.sigs).enumerate().all(|(i, (row, pair))| {
        (0..2).all(|b| hashsig::verify(pk, &slot_message(&sig.note_id, i, b == 1, &row[b]), &pair[b]))
    });
    if !signed {
        return false;
    }
    let all: HashSet<Digest> = match mode {
        MajorityMode::Indexed => HashSet::new(),
        MajorityMode::Membership => sig.hashes.iter().flatten().copied().collect(),
    };
    let matching = sig
        .opened
        .iter()
        .filter(|(&i, value)| {
            let h = hash(value);
            match mode {
                MajorityMode::Indexed => h == sig.hashes[i][usize::from(sig.beta)],
                MajorityMode::Membership => all.contains(&h),
            }
        })
        .count();
    2 * matching > unopened
}

/// Signs `msg_bits[k]` with `notes[k]`. Either every note signs or none is
/// touched.
pub fn sign_message(
    store: &mut QubitStore,
    signer: Party,
    notes: &mut [Banknote],
    msg_bits: &[bool],
) -> Result<Vec<TokenSignature>, QtdsError> {
    if notes.len() != msg_bits.len() {
        return Err(QtdsError::LengthMismatch {
            notes: notes.len(),
            bits: msg_bits.len(),
        });
    }
    let mut seen: BTreeMap<Digest, usize> = BTreeMap::new();
    for (index, note) in notes.iter().enumerate() {
        if let Some(&first) = seen.get(&note.note_id()) {
            return Err(QtdsError::DuplicateNote { first, second: index });
        }
        seen.insert(note.note_id(), index);
        check_signable(store, signer, note).map_err(|e| QtdsError::Note {
            index,
            source: Box::new(e),
        })?;
    }
    notes
        .iter_mut()
        .zip(msg_bits)
        .map(|(note, &bit)| sign_bit(store, signer, note, bit))
        .collect()
}

/// Bits of `bytes`, most significant first.
pub fn message_bits(bytes: &[u8]) -> Vec<bool> {
    bytes
        .iter()
        .flat_map(|b| (0..8).rev().map(move |k| (b >> k) & 1 == 1))
        .collect()
}

/// Strategies for signing `1 - beta` after the token signed `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForgeStrategy {
    /// Resubmit the `beta` openings, topped up with pre-images revealed
    /// by earlier verifications.
    ReuseOpened,
    /// Random values in every row.
    RandomGuess,
    /// Measure each qubit in a random basis before signing and query the
    /// hardware for both bits.
    RandomBasisPremeasure,
}

impl ForgeStrategy {
    pub const ALL: [ForgeStrategy; 3] = [
        ForgeStrategy::ReuseOpened,
        ForgeStrategy::RandomGuess,
        ForgeStrategy::RandomBasisPremeasure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ForgeStrategy::ReuseOpened => "reuse-opened",
            ForgeStrategy::RandomGuess => "random-guess",
            ForgeStrategy::RandomBasisPremeasure => "random-basis-premeasure",
        }
    }
}

/// Produces a signature pair `(beta, 1 - beta)` from one token. The first
/// is the legitimate signature where the strategy has one.
pub fn forge_pair<R: Rng + ?Sized>(
    store: &mut QubitStore,
    holder: Party,
    note: &mut Banknote,
    beta: bool,
    strategy: ForgeStrategy,
    rng: &mut R,
) -> Result<(TokenSignature, TokenSignature), QtdsError> {
    match strategy {
        ForgeStrategy::ReuseOpened | ForgeStrategy::RandomGuess => {
            let honest = sign_bit(store, holder, note, beta)?;
            let mut forged = honest.clone();
            forged.beta = !beta;
            if strategy == ForgeStrategy::ReuseOpened {
                for (&k, (bit, kappa)) in note.classical().revealed() {
                    if *bit != beta {
                        forged.opened.insert(k, kappa.as_bytes().to_vec());
                    }
                }
            } else {
                let len = honest.opened.values().map(Vec::len).max().unwrap_or(0);
                for value in forged.opened.values_mut() {
                    let mut v = vec![0u8; len];
                    rng.fill(v.as_mut_slice());
                    *value = v;
                }
            }
            Ok((honest, forged))
        }
        ForgeStrategy::RandomBasisPremeasure => {
            check_signable(store, holder, note)?;
            let classical = note.classical();
            let mut pair = [BTreeMap::new(), BTreeMap::new()];
            for &j in classical.unopened() {
                let payload = note.payload(j).expect("checked");
                let token = classical.token(j).expect("checked");
                let bases: Vec<Basis> = (0..payload.len()).map(|_| Basis::from_bit(rng.random())).collect();
                let outcomes = measure_payload(store, holder, payload, &bases).unwrap_or_default();
                for (c, map) in pair.iter_mut().enumerate() {
                    let value = token.check(c == 1, &outcomes).map(<[u8]>::to_vec).unwrap_or_default();
                    map.insert(j, value);
                }
            }
            let [zero, one] = pair;
            let make = |bit: bool, opened| TokenSignature {
                beta: bit,
                note_id: classical.note_id(),
                hashes: classical.hashes().to_vec(),
                sigs: classical.signatures().to_vec(),
                opened,
            };
            let (honest, forged) = if beta {
                (make(true, one), make(false, zero))
            } else {
                (make(false, zero), make(true, one))
            };
            Ok((honest, forged))
        }
    }
}
