use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use otm_money::banknote::{transfer, verify, BanknoteError, Mint, NoteParams, Verdict};
use otm_money::otm::OtmParams;
use otm_money::qsim::{Party, QubitStore};
use otm_money::qtds::{qtds_verify_note, sign_bit, verify_sig};

#[test]
fn honest_payment_chains_succeed_under_noise() {
    // zeta = 32, xi = 4: eight hops per note, then redemption.
    let params = NoteParams::new(32, 4, OtmParams::default());
    let notes = 20;
    let mut mint = Mint::with_capacity(b"chain", params.clone(), 2 * notes).unwrap();
    let pk = mint.public_key();
    let mut store = QubitStore::new(1, 0.05).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let mut passes = 0;
    let mut attempts = 0;
    for n in 0..notes {
        let mut holder = Party(1 + 100 * n as u32);
        let mut note = mint.issue(&mut store, holder, &mut rng).unwrap();
        for _ in 0..params.lifetime() {
            let next = Party(holder.0 + 1);
            let mut received = transfer(&mut store, &mut note, holder, next).unwrap();
            attempts += 1;
            passes += usize::from(
                verify(&mut store, next, &mut received, 4, &pk, &mut rng)
                    .verdict
                    .is_pass(),
            );
            note = received;
            holder = next;
        }
        assert_eq!(
            verify(&mut store, holder, &mut note, 4, &pk, &mut rng).verdict,
            Verdict::FailUsedUp
        );
        mint.redeem(&mut store, note, holder, &mut rng).unwrap();
    }
    assert!(passes as f64 / attempts as f64 >= 0.99, "{passes} / {attempts}");
    assert_eq!(mint.retired_count(), notes as usize);
}

#[test]
fn spending_the_same_note_twice_fails() {
    let params = NoteParams::new(16, 4, OtmParams::default());
    let mut mint = Mint::with_capacity(b"twice", params, 2).unwrap();
    let pk = mint.public_key();
    let mut store = QubitStore::new(3, 0.05).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let (alice, bob, carol) = (Party(1), Party(2), Party(3));
    let mut note = mint.issue(&mut store, alice, &mut rng).unwrap();
    let mut at_bob = transfer(&mut store, &mut note, alice, bob).unwrap();
    assert!(matches!(
        transfer(&mut store, &mut note, alice, carol),
        Err(BanknoteError::HandleNotHeld(_))
    ));
    let mut copy_for_carol = note.classical_copy();
    assert!(verify(&mut store, bob, &mut at_bob, 4, &pk, &mut rng).verdict.is_pass());
    assert!(matches!(
        verify(&mut store, carol, &mut copy_for_carol, 4, &pk, &mut rng).verdict,
        Verdict::FailChallenge(_)
    ));
}

#[test]
fn tokens_can_be_spent_as_money_then_sign() {
    let params = NoteParams::new(64, 8, OtmParams::default());
    let mut mint = Mint::with_capacity(b"token", params, 1).unwrap();
    let pk = mint.public_key();
    let mut store = QubitStore::new(5, 0.05).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let (alice, bob) = (Party(1), Party(2));
    let mut note = mint.issue(&mut store, alice, &mut rng).unwrap();
    let mut verdicts = Vec::new();
    for _ in 0..4 {
        verdicts.push(qtds_verify_note(&mut store, alice, &mut note, 8, &pk, &mut rng).verdict);
    }
    // |J| - 8 > 33 holds at |J| = 64, 56, 48 and fails at 40.
    assert_eq!(
        verdicts,
        vec![Verdict::Pass, Verdict::Pass, Verdict::Pass, Verdict::FailUsedUp]
    );
    let mut at_bob = transfer(&mut store, &mut note, alice, bob).unwrap();
    let beta: bool = rng.random();
    let sig = sign_bit(&mut store, bob, &mut at_bob, beta).unwrap();
    assert_eq!(sig.opened.len(), 40);
    assert!(verify_sig(&sig, &pk, 64));
    assert!(sign_bit(&mut store, bob, &mut at_bob, !beta).is_err());
}
