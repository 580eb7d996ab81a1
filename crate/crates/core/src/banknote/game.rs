//! Double-spending experiments: an adversary receives one honest note and
//! tries to hand two verifiers something each of them accepts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{deliver, mint_note, transfer, verify, Banknote, BanknoteError, NoteParams, Verdict};
use crate::hashsig::keygen;
use crate::otm::{measure_payload, otm_create};
use crate::qsim::{Basis, Party, QubitStore};

pub const ADVERSARY: Party = Party(100);
pub const VERIFIER_A: Party = Party(101);
pub const VERIFIER_B: Party = Party(102);

/// What an adversary can touch while it holds the note.
pub struct AdversaryContext<'a> {
    pub store: &'a mut QubitStore,
    pub me: Party,
    pub params: &'a NoteParams,
    pub rng: &'a mut ChaCha12Rng,
}

pub trait Adversary {
    fn name(&self) -> &'static str;

    /// Turns one note into two candidates for two independent verifiers.
    fn duplicate(&mut self, ctx: &mut AdversaryContext<'_>, note: Banknote) -> (Banknote, Banknote);
}

/// Copies the classical record and deals each sealed OTM's qubits to one of
/// the two copies at random.
pub struct SplitCopy;

impl Adversary for SplitCopy {
    fn name(&self) -> &'static str {
        "split-copy"
    }

    fn duplicate(&mut self, ctx: &mut AdversaryContext<'_>, note: Banknote) -> (Banknote, Banknote) {
        let mut a = note.classical_copy();
        let mut b = note.classical_copy();
        let (classical, payloads) = note.into_parts();
        for (j, payload) in payloads {
            let token = classical.token(j).expect("sealed row").clone();
            if ctx.rng.random() {
                a.insert_otm(j, token, payload);
            } else {
                b.insert_otm(j, token, payload);
            }
        }
        (a, b)
    }
}

/// Keeps the genuine note and offers a bare classical copy as the second.
pub struct IdentityCopy;

impl Adversary for IdentityCopy {
    fn name(&self) -> &'static str {
        "identity-copy"
    }

    fn duplicate(&mut self, _ctx: &mut AdversaryContext<'_>, note: Banknote) -> (Banknote, Banknote) {
        let copy = note.classical_copy();
        (note, copy)
    }
}

/// Opens every OTM in the Z basis to learn all `kappa_0`, then sends two
/// notes built from fresh OTMs that can only answer challenge bit 0.
pub struct PreMeasureZ;

impl Adversary for PreMeasureZ {
    fn name(&self) -> &'static str {
        "premeasure-z"
    }

    fn duplicate(&mut self, ctx: &mut AdversaryContext<'_>, note: Banknote) -> (Banknote, Banknote) {
        let learned = learn_kappa0(ctx, note);
        let a = rebuild(ctx, &learned);
        let b = rebuild(ctx, &learned);
        (a, b)
    }
}

pub fn adversary_suite() -> Vec<Box<dyn Adversary>> {
    vec![Box::new(SplitCopy), Box::new(IdentityCopy), Box::new(PreMeasureZ)]
}

struct Learned {
    template: Banknote,
    kappa0: Vec<(usize, Vec<u8>)>,
}

fn learn_kappa0(ctx: &mut AdversaryContext<'_>, note: Banknote) -> Learned {
    let template = note.classical_copy();
    let (classical, payloads) = note.into_parts();
    let kappa0 = payloads
        .iter()
        .map(|(&j, payload)| {
            let token = classical.token(j).expect("sealed row");
            let bases = vec![Basis::Z; payload.len()];
            let secret = measure_payload(ctx.store, ctx.me, payload, &bases)
                .ok()
                .and_then(|outcomes| token.check(false, &outcomes).ok().map(<[u8]>::to_vec))
                .unwrap_or_else(|| random_bytes(ctx.rng, ctx.params.kappa_len));
            (j, secret)
        })
        .collect();
    Learned { template, kappa0 }
}

fn rebuild(ctx: &mut AdversaryContext<'_>, learned: &Learned) -> Banknote {
    let mut note = learned.template.classical_copy();
    for (j, kappa0) in &learned.kappa0 {
        let junk = random_bytes(ctx.rng, ctx.params.kappa_len);
        let (token, payload) = otm_create(ctx.store, ctx.me, ctx.rng, kappa0, &junk, &ctx.params.otm)
            .expect("lengths match the note parameters");
        note.insert_otm(*j, token, payload);
    }
    note
}

fn random_bytes(rng: &mut ChaCha12Rng, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    rng.fill(v.as_mut_slice());
    v
}

/// Replaces every sealed OTM of `note` by one that answers only bit 0 with
/// the genuine `kappa_0`. The original qubits are consumed.
pub fn premeasure_strip(ctx: &mut AdversaryContext<'_>, note: Banknote) -> Banknote {
    let learned = learn_kappa0(ctx, note);
    rebuild(ctx, &learned)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForgeryOutcome {
    pub first: Verdict,
    pub second: Verdict,
}

impl ForgeryOutcome {
    pub fn success(&self) -> bool {
        self.first.is_pass() && self.second.is_pass()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

struct Trial {
    store: QubitStore,
    pk: crate::hashsig::MintPublicKey,
    note: Banknote,
    adv_rng: ChaCha12Rng,
}

fn setup_trial(params: &NoteParams, noise_p: f64, seed: u64) -> Result<Trial, BanknoteError> {
    let mut store = QubitStore::new(seed, noise_p)?;
    let mut keypair = keygen(&seed.to_be_bytes(), params.required_depth(1))?;
    let mut mint_rng = stream(seed, 1);
    let mut fresh = mint_note(&mut store, params, &mut keypair, &mut mint_rng)?;
    let note = transfer(&mut store, &mut fresh, Party::MINT, ADVERSARY)?;
    Ok(Trial {
        store,
        pk: keypair.public_key(),
        note,
        adv_rng: stream(seed, 2),
    })
}

/// One run of the double-spending game with a fresh mint key.
pub fn forgery_game(
    adversary: &mut dyn Adversary,
    params: &NoteParams,
    noise_p: f64,
    seed: u64,
) -> Result<ForgeryOutcome, BanknoteError> {
    let Trial {
        mut store,
        pk,
        note,
        mut adv_rng,
    } = setup_trial(params, noise_p, seed)?;
    let (a, b) = {
        let mut ctx = AdversaryContext {
            store: &mut store,
            me: ADVERSARY,
            params,
            rng: &mut adv_rng,
        };
        adversary.duplicate(&mut ctx, note)
    };
    let mut a = deliver(&mut store, a, ADVERSARY, VERIFIER_A);
    let mut b = deliver(&mut store, b, ADVERSARY, VERIFIER_B);
    let first = verify(&mut store, VERIFIER_A, &mut a, params.xi, &pk, &mut stream(seed, 3)).verdict;
    let second = verify(&mut store, VERIFIER_B, &mut b, params.xi, &pk, &mut stream(seed, 4)).verdict;
    Ok(ForgeryOutcome { first, second })
}

/// Strips one honest note with [`premeasure_strip`] and verifies the result
/// once.
pub fn premeasure_trial(params: &NoteParams, noise_p: f64, seed: u64) -> Result<Verdict, BanknoteError> {
    let Trial {
        mut store,
        pk,
        note,
        mut adv_rng,
    } = setup_trial(params, noise_p, seed)?;
    let stripped = {
        let mut ctx = AdversaryContext {
            store: &mut store,
            me: ADVERSARY,
            params,
            rng: &mut adv_rng,
        };
        premeasure_strip(&mut ctx, note)
    };
    let mut delivered = deliver(&mut store, stripped, ADVERSARY, VERIFIER_A);
    Ok(verify(
        &mut store,
        VERIFIER_A,
        &mut delivered,
        params.xi,
        &pk,
        &mut stream(seed, 3),
    )
    .verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banknote::tests::small_params;

    #[test]
    fn identity_copy_passes_once() {
        let params = small_params(6, 2);
        for seed in 0..10 {
            let out = forgery_game(&mut IdentityCopy, &params, 0.0, seed).unwrap();
            assert!(out.first.is_pass());
            assert!(matches!(out.second, Verdict::FailChallenge(_)));
        }
    }

    #[test]
    fn split_copy_rarely_wins() {
        // Both copies win only if every challenged row lands on the right
        // side: (1/2)^(2 xi) when the challenged rows are disjoint.
        let params = small_params(6, 2);
        let wins = (0..200)
            .filter(|&s| forgery_game(&mut SplitCopy, &params, 0.0, s).unwrap().success())
            .count();
        assert!(wins < 20, "{wins}");
    }

    #[test]
    fn stripped_note_answers_only_bit_zero() {
        let params = small_params(4, 1);
        let passes = (0..400)
            .filter(|&s| premeasure_trial(&params, 0.0, s).unwrap().is_pass())
            .count();
        assert!((150..=250).contains(&passes), "{passes}");
    }

    #[test]
    fn games_are_deterministic() {
        let params = small_params(4, 1);
        let a = forgery_game(&mut PreMeasureZ, &params, 0.05, 7).unwrap();
        let b = forgery_game(&mut PreMeasureZ, &params, 0.05, 7).unwrap();
        assert_eq!(a, b);
    }
}
