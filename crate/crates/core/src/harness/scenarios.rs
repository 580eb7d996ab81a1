use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{trial_seed, HarnessError, Report, ScenarioConfig};
use crate::banknote::{adversary_suite, forgery_game, premeasure_trial, transfer, verify, IdentityCopy, Mint, Verdict};
use crate::hashsig::{hash, keygen};
use crate::otm::{extract_both, otm_create, otm_retrieve, ExtractStrategy, OtmParams};
use crate::qsim::{Basis, Party, QubitStore};
use crate::qtds::{message_bits, qtds_verify_note, sign_message, verify_sig, QtdsError};
use crate::stats::{otm_honest_failure, Frequency};

pub(super) const NOTARY_TOKENS: usize = 16;
const NOISE_GRID: [f64; 7] = [0.0, 0.01, 0.025, 0.05, 0.075, 0.1, 0.15];

pub(super) fn default_trials(scenario: &str) -> u64 {
    match scenario {
        "honest-chain" | "qtds-notary" => 1,
        "double-spend-classical-copy" => 100,
        "premeasure-adversary" => 200,
        "otm-both-secrets" => 100_000,
        "forgery-game" => 100,
        "qtds-bet" => 4,
        "conjugate-coding-stat" => 100_000,
        "noise-sweep" => 10_000,
        _ => 1,
    }
}

pub(super) fn run(config: &ScenarioConfig, report: &mut Report) -> Result<(), HarnessError> {
    match config.scenario.as_str() {
        "honest-chain" => honest_chain(config, report),
        "double-spend-classical-copy" => classical_copy(config, report),
        "premeasure-adversary" => premeasure(config, report),
        "otm-both-secrets" => both_secrets(config, report),
        "forgery-game" => forgery(config, report),
        "qtds-notary" => notary(config, report),
        "qtds-bet" => bet(config, report),
        "conjugate-coding-stat" => conjugate_coding(config, report),
        "noise-sweep" => noise_sweep(config, report),
        other => Err(HarnessError::UnknownScenario(other.into())),
    }
}

fn abort(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Protocol(e.to_string())
}

fn stream(seed: u64, id: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn store(config: &ScenarioConfig, seed: u64) -> Result<QubitStore, HarnessError> {
    QubitStore::new(seed, config.noise_p).map_err(abort)
}

fn mint(config: &ScenarioConfig, seed: u64) -> Result<Mint, HarnessError> {
    let keypair = keygen(&seed.to_be_bytes(), config.merkle_depth).map_err(abort)?;
    Mint::new(keypair, config.note_params()).map_err(abort)
}

/// `|observed - expected|` fits inside a 4-sigma Wilson interval.
fn consistent(f: Frequency, expected: f64) -> bool {
    let (lo, hi) = f.wilson(4.0);
    lo <= expected && expected <= hi
}

/// Mint to a chain of holders, each paying the next, until the note is used
/// up; the last holder redeems it.
fn honest_chain(config: &ScenarioConfig, report: &mut Report) -> Result<(), HarnessError> {
    let params = config.note_params();
    let expected = params.lifetime() as u64;
    let mut chains_ok = 0;
    for t in 0..config.trials() {
        let seed = trial_seed(config.seed, t);
        let mut store = store(config, seed)?;
        let mut mint = mint(config, seed)?;
        let pk = mint.public_key();
        let mut rng = stream(seed, 1);
        if t == 0 {
            report.value("mint_root", pk.root.as_bytes());
        }

        let mut holder = Party(1);
        let mut note = mint.issue(&mut store, holder, &mut rng).map_err(abort)?;
        let mut passes = 0u64;
        let last = loop {
            let next = Party(holder.0 + 1);
            let mut received = transfer(&mut store, &mut note, holder, next).map_err(abort)?;
            let outcome = verify(&mut store, next, &mut received, params.xi, &pk, &mut rng);
            report.count(format!("verdict/{}", outcome.verdict.label()), 1);
            holder = next;
            note = received;
            if !outcome.verdict.is_pass() {
                break outcome.verdict;
            }
            passes += 1;
            report.count("otms_opened", outcome.opened.len() as u64);
        };
        report.count("verifications_passed", passes);

        let redeemed = mint.redeem(&mut store, note, holder, &mut rng);
        report.count(
            if redeemed.is_ok() {
                "redeemed"
            } else {
                "redemption_failed"
            },
            1,
        );
        let fresh_ok = match redeemed {
            Ok(mut fresh) => verify(&mut store, holder, &mut fresh, params.xi, &pk, &mut rng)
                .verdict
                .is_pass(),
            Err(_) => false,
        };
        if passes == expected && last == Verdict::FailUsedUp && fresh_ok {
            chains_ok += 1;
        }
        report.absorb(&store);
    }
    report.check(
        "every chain passes floor(zeta/xi) times, is used up, then redeems",
        chains_ok == config.trials(),
        format!("{chains_ok} of {} chains, lifetime {expected}", config.trials()),
    );
    Ok(())
}

fn classical_copy(config: &ScenarioConfig, report: &mut Report) -> Result<(), HarnessError> {
    let params = config.note_params();
    let mut success = Frequency::default();
    let mut copy_refused = 0;
    for t in 0..config.trials() {
        let out =
            forgery_game(&mut IdentityCopy, &params, config.noise_p, trial_seed(config.seed, t)).map_err(abort)?;
        report.count(format!("original/{}", out.first.label()), 1);
        report.count(format!("copy/{}", out.second.label()), 1);
        success.record(out.success());
        copy_refused += u64::from(matches!(out.second, Verdict::FailChallenge(_)));
    }
    report.frequency("double_spend", success, Some(0.0));
    report.check(
        "no classical copy passes",
        success.hits == 0 && copy_refused == config.trials(),
        format!("{} double spends, {copy_refused} copies refused", success.hits),
    );
    Ok(())
}

fn premeasure(config: &ScenarioConfig, report: &mut Report) -> Result<(), HarnessError> {
    let params = config.note_params();
    let expected = 0.5f64.powi(params.xi as i32);
    let mut pass = Frequency::default();
    for t in 0..config.trials() {
        let verdict = premeasure_trial(&params, config.noise_p, trial_seed(config.seed, t)).map_err(abort)?;
        report.count(format!("verdict/{}", verdict.label()), 1);
        pass.record(verdict.is_pass());
    }
    report.frequency("stripped_copy_pass", pass, Some(expected));
    report.check(
        "stripped copy passes with probability 2^-xi",
        consistent(pass, expected),
        format!("observed {:.5}, expected {expected:.5}", pass.rate()),
    );
    Ok(())
}

fn both_secrets(config: &ScenarioConfig, report: &mut Report) -> Result<(), HarnessError> {
    let params = config.note_params().otm;
    let adversary = Party(7);
    for (k, strategy) in ExtractStrategy::ALL.into_iter().enumerate() {
        let seed = trial_seed(config.seed, k as u64);
        let mut store = store(config, seed)?;
        let mut rng = stream(seed, 1);
        let mut both = Frequency::default();
        let mut one = Frequency::default();
        for _ in 0..config.trials() {
            let mut s = [vec![0u8; params.secret_len], vec![0u8; params.secret_len]];
            rng.fill(s[0].as_mut_slice());
            rng.fill(s[1].as_mut_slice());
            let (token, payload) = otm_create(&mut store, adversary, &mut rng, &s[0], &s[1], &params).map_err(abort)?;
            let got = extract_both(&mut store, adversary, &token, &payload, strategy, &mut rng).map_err(abort)?;
            let correct = [0, 1].map(|c| got[c].as_deref() == Some(s[c].as_slice()));
            both.record(correct[0] && correct[1]);
            one.record(correct[0] || correct[1]);
        }
        report.absorb(&store);
        report.frequency(format!("{}/both", strategy.name()), both, None);
        report.frequency(format!("{}/at_least_one", strategy.name()), one, None);
        report.check(
            format!("{} extracts both secrets at most 1e-3 of the time", strategy.name()),
            both.rate() <= 1e-3,
            format!("{} of {}", both.hits, both.trials),
        );
    }
    Ok(())
}

fn forgery(config: &ScenarioConfig, report: &mut Report) -> Result<(), HarnessError> {
    let params = config.note_params();
    for (k, mut adversary) in adversary_suite().into_iter().enumerate() {
        let mut dual = Frequency::default();
        for t in 0..config.trials() {
            let seed = trial_seed(trial_seed(config.seed, k as u64), t);
            let out = forgery_game(adversary.as_mut(), &params, config.noise_p, seed).map_err(abort)?;
            dual.record(out.success());
        }
        report.frequency(format!("{}/dual_pass", adversary.name()), dual, None);
        report.check(
            format!("{} rarely passes twice", adversary.name()),
            dual.rate() <= 1e-2,
            format!("{} of {}", dual.hits, dual.trials),
        );
    }
    Ok(())
}

/// A holder commits funds to a document by signing bits of its digest with
/// one token per bit; anyone with the mint key checks the signatures.
fn notary(config: &ScenarioConfig, report: &mut Report) -> Result<(), HarnessError> {
    let params = config.note_params();
    let alice = Party(1);
    let mut all_ok = true;
    for t in 0..config.trials() {
        let seed = trial_seed(config.seed, t);
        let mut store = store(config, seed)?;
        let mut mint = mint(config, seed)?;
        let pk = mint.public_key();
        let mut rng = stream(seed, 1);

        let mut tokens = Vec::with_capacity(NOTARY_TOKENS);
        for _ in 0..NOTARY_TOKENS {
            let mut token = mint.issue(&mut store, alice, &mut rng).map_err(abort)?;
            let check = qtds_verify_note(&mut store, alice, &mut token, params.xi, &pk, &mut rng);
            report.count(format!("token_check/{}", check.verdict.label()), 1);
            all_ok &= check.verdict.is_pass();
            tokens.push(token);
        }

        let mut document = b"receipt: 1200 units, account 7".to_vec();
        document.extend_from_slice(&seed.to_be_bytes());
        let digest = hash(&document);
        if t == 0 {
            report.value("document_digest", digest.as_bytes());
        }
        let bits = message_bits(&digest.0[..NOTARY_TOKENS / 8]);
        let sigs = sign_message(&mut store, alice, &mut tokens, &bits).map_err(abort)?;
        let valid = sigs.iter().filter(|s| verify_sig(s, &pk, params.zeta)).count();
        report.count("signatures_valid", valid as u64);
        all_ok &= valid == NOTARY_TOKENS;

        let other = message_bits(&hash(b"a different document").0[..NOTARY_TOKENS / 8]);
        let reuse = sign_message(&mut store, alice, &mut tokens, &other);
        let refused = matches!(reuse, Err(QtdsError::Note { .. }));
        report.count(if refused { "reuse_refused" } else { "reuse_allowed" }, 1);
        all_ok &= refused;

        let flipped = sigs
            .iter()
            .filter(|s| {
                let mut f = (*s).clone();
                f.beta = !f.beta;
                verify_sig(&f, &pk, params.zeta)
            })
            .count();
        report.count("flipped_bits_accepted", flipped as u64);
        all_ok &= flipped == 0;
        report.absorb(&store);
    }
    report.check(
        "signatures verify, tokens cannot sign twice, flipped bits are rejected",
        all_ok,
        String::new(),
    );
    Ok(())
}

/// The mint runs a book: each bettor signs a prediction with a token, the
/// house checks it, and winners are paid in fresh tokens.
fn bet(config: &ScenarioConfig, report: &mut Report) -> Result<(), HarnessError> {
    let params = config.note_params();
    let seed = trial_seed(config.seed, 0);
    let mut store = store(config, seed)?;
    let mut mint = mint(config, seed)?;
    let pk = mint.public_key();
    let mut rng = stream(seed, 1);
    let outcome: bool = stream(seed, 2).random();
    let mut paid = BTreeSet::new();
    let mut ok = true;

    for k in 0..config.trials() {
        let bettor = Party(10 + k as u32);
        let mut stake = mint.issue(&mut store, bettor, &mut rng).map_err(abort)?;
        ok &= qtds_verify_note(&mut store, bettor, &mut stake, params.xi, &pk, &mut rng)
            .verdict
            .is_pass();
        let prediction: bool = rng.random();
        let mut slip = vec![stake];
        let sig = sign_message(&mut store, bettor, &mut slip, &[prediction])
            .map_err(abort)?
            .remove(0);
        let accepted = verify_sig(&sig, &pk, params.zeta);
        report.count(if accepted { "bets_accepted" } else { "bets_rejected" }, 1);
        ok &= accepted;

        let mut hedge = sig.clone();
        hedge.beta = !prediction;
        for (&i, (bit, kappa)) in slip[0].classical().revealed() {
            if *bit != prediction {
                hedge.opened.insert(i, kappa.as_bytes().to_vec());
            }
        }
        let hedge_accepted = verify_sig(&hedge, &pk, params.zeta);
        report.count("hedges_accepted", u64::from(hedge_accepted));
        ok &= !hedge_accepted;
        ok &= sign_message(&mut store, bettor, &mut slip, &[!prediction]).is_err();

        if accepted && sig.beta == outcome && paid.insert(sig.note_id) {
            let mut winnings = mint.issue(&mut store, bettor, &mut rng).map_err(abort)?;
            ok &= qtds_verify_note(&mut store, bettor, &mut winnings, params.xi, &pk, &mut rng)
                .verdict
                .is_pass();
            report.count("winners_paid", 1);
        }
    }
    report.count("outcome", u64::from(outcome));
    report.absorb(&store);
    report.check(
        "bets verify, hedges and second signatures fail, winners are paid once",
        ok,
        String::new(),
    );
    Ok(())
}

fn conjugate_coding(config: &ScenarioConfig, report: &mut Report) -> Result<(), HarnessError> {
    let seed = trial_seed(config.seed, 0);
    let holder = Party(1);
    let mut rng = stream(seed, 1);
    for (label, noise) in [("ideal", 0.0), ("noisy", config.noise_p)] {
        let mut store = QubitStore::new(seed, noise).map_err(abort)?;
        let mut hits = Frequency::default();
        for _ in 0..config.trials() {
            let b: bool = rng.random();
            let b_prime: bool = rng.random();
            let theta = Basis::from_bit(rng.random());
            let (first, second) = store.encode_pair(holder, b, b_prime, theta);
            let guess = store.measure(holder, &first, Basis::Z).map_err(abort)?;
            store.measure(holder, &second, Basis::Z).map_err(abort)?;
            hits.record(guess == b);
        }
        let expected = 0.75 - 0.5 * noise;
        report.frequency(format!("recovery/{label}"), hits, Some(expected));
        report.check(
            format!("{label} recovery of the targeted bit"),
            consistent(hits, expected),
            format!("observed {:.4}, expected {expected:.4}", hits.rate()),
        );
        report.absorb(&store);
    }

    let mut store = QubitStore::new(seed, 0.0).map_err(abort)?;
    let mut zeros = Frequency::default();
    for _ in 0..config.trials() {
        let plus = store.prepare(holder, false, Basis::X);
        zeros.record(!store.measure(holder, &plus, Basis::Z).map_err(abort)?);
    }
    report.frequency("plus_in_z/zero", zeros, Some(0.5));
    report.check(
        "measuring |+> in Z is a fair coin",
        consistent(zeros, 0.5),
        format!("observed {:.4}", zeros.rate()),
    );
    report.absorb(&store);
    Ok(())
}

fn noise_sweep(config: &ScenarioConfig, report: &mut Report) -> Result<(), HarnessError> {
    let base = config.note_params().otm;
    let mut grid: Vec<f64> = NOISE_GRID.into_iter().filter(|&p| p < config.delta).collect();
    if !grid.contains(&config.noise_p) {
        grid.push(config.noise_p);
        grid.sort_by(f64::total_cmp);
    }
    let holder = Party(1);
    for (k, &noise) in grid.iter().enumerate() {
        let seed = trial_seed(config.seed, k as u64);
        let mut store = QubitStore::new(seed, noise).map_err(abort)?;
        let mut rng = stream(seed, 1);
        let params: &OtmParams = &base;
        let mut honest = Frequency::default();
        for _ in 0..config.trials() {
            let mut s = [vec![0u8; params.secret_len], vec![0u8; params.secret_len]];
            rng.fill(s[0].as_mut_slice());
            rng.fill(s[1].as_mut_slice());
            let (token, payload) = otm_create(&mut store, holder, &mut rng, &s[0], &s[1], params).map_err(abort)?;
            let choice: bool = rng.random();
            let got = otm_retrieve(&mut store, holder, &token, &payload, choice);
            honest.record(got.as_deref().ok() == Some(s[usize::from(choice)].as_slice()));
        }
        let expected = 1.0 - otm_honest_failure(params.n_otm, params.delta, noise);
        report.frequency(format!("retrieval/noise={noise:.3}"), honest, Some(expected));
        if noise == config.noise_p {
            report.check(
                "honest retrieval at the configured noise succeeds at least 99% of the time",
                honest.rate() >= 0.99,
                format!("observed {:.5}, exact {expected:.6}", honest.rate()),
            );
        }
        report.absorb(&store);
    }
    Ok(())
}
