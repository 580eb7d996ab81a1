use std::collections::BTreeSet;

use rand::Rng;

use super::{mint_note, transfer, Banknote, BanknoteError, NoteParams, Verdict};
use crate::hashsig::{hash, keygen, Digest, MintKeypair, MintPublicKey};
use crate::otm::otm_retrieve;
use crate::qsim::{Party, QubitStore};

/// The issuing bank: signing key, note parameters and the set of note ids
/// already redeemed.
#[derive(Debug)]
pub struct Mint {
    keypair: MintKeypair,
    params: NoteParams,
    retired: BTreeSet<Digest>,
}

impl Mint {
    pub fn new(keypair: MintKeypair, params: NoteParams) -> Result<Self, BanknoteError> {
        params.validate()?;
        Ok(Self {
            keypair,
            params,
            retired: BTreeSet::new(),
        })
    }

    /// A mint whose key can sign at least `notes` notes (issued plus
    /// reissued on redemption).
    pub fn with_capacity(seed: &[u8], params: NoteParams, notes: u64) -> Result<Self, BanknoteError> {
        params.validate()?;
        let keypair = keygen(seed, params.required_depth(notes))?;
        Self::new(keypair, params)
    }

    pub fn public_key(&self) -> MintPublicKey {
        self.keypair.public_key()
    }

    pub fn params(&self) -> &NoteParams {
        &self.params
    }

    pub fn notes_remaining(&self) -> u64 {
        self.keypair.remaining() / self.params.signatures_per_note()
    }

    pub fn is_retired(&self, note_id: &Digest) -> bool {
        self.retired.contains(note_id)
    }

    pub fn retired_count(&self) -> usize {
        self.retired.len()
    }

    /// Mints a note and hands it to `to`.
    pub fn issue<R: Rng + ?Sized>(
        &mut self,
        store: &mut QubitStore,
        to: Party,
        rng: &mut R,
    ) -> Result<Banknote, BanknoteError> {
        let mut note = mint_note(store, &self.params, &mut self.keypair, rng)?;
        if to == Party::MINT {
            return Ok(note);
        }
        transfer(store, &mut note, Party::MINT, to)
    }

    /// Takes a note from `holder`, challenges every sealed OTM and, if all
    /// answer, retires the note and issues a fresh one to `holder`.
    pub fn redeem<R: Rng + ?Sized>(
        &mut self,
        store: &mut QubitStore,
        note: Banknote,
        holder: Party,
        rng: &mut R,
    ) -> Result<Banknote, BanknoteError> {
        let note_id = note.note_id();
        if self.retired.contains(&note_id) {
            return Err(BanknoteError::DoubleRedemption(note_id));
        }
        let pk = self.public_key();
        note.classical()
            .check_static(&pk)
            .map_err(BanknoteError::RedemptionRejected)?;

        let unopened: Vec<usize> = note.classical().unopened().iter().copied().collect();
        for &j in &unopened {
            let held = note
                .payload(j)
                .is_some_and(|p| p.handles().iter().all(|h| store.check_held(holder, h).is_ok()));
            if !held {
                return Err(BanknoteError::RedemptionRejected(Verdict::FailChallenge(j)));
            }
        }
        store.move_handles(holder, Party::MINT, note.handles())?;

        for &j in &unopened {
            let bit: bool = rng.random();
            let token = note.classical().token(j).expect("partition checked");
            let payload = note.payload(j).expect("presence checked");
            let ok = otm_retrieve(store, Party::MINT, token, payload, bit)
                .is_ok_and(|kappa| hash(&kappa) == note.classical().hashes()[j][usize::from(bit)]);
            if !ok {
                return Err(BanknoteError::RedemptionRejected(Verdict::FailChallenge(j)));
            }
        }
        self.retired.insert(note_id);
        self.issue(store, holder, rng)
    }
}
