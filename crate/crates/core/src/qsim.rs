//! Single-qubit conjugate-coding substrate.
//!
//! Qubits are restricted to the Z and X bases, so a state is fully described
//! by the classical pair `(bit, basis)` plus the sampling rule for
//! measurement: a matching basis returns the encoded bit, a mismatched basis
//! returns a fair coin. Every outcome is then flipped with probability
//! `noise_p` to model a noisy channel.
//!
//! The store is the only place where the encoded pair lives. A
//! [`StateHandle`] is an opaque ticket that cannot be cloned, and the store
//! removes a qubit from its registry the moment it is measured, so reusing a
//! handle is always detected. Each live qubit has exactly one holding
//! [`Party`]; only the holder may measure it.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

/// Measurement / preparation basis. `Z` is the computational basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Basis::X
        } else {
            Basis::Z
        }
    }

    pub fn bit(self) -> bool {
        self == Basis::X
    }

    pub fn flipped(self) -> Self {
        Basis::from_bit(!self.bit())
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Z => f.write_str("Z"),
            Basis::X => f.write_str("X"),
        }
    }
}

/// A participant's view onto the store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Party(pub u32);

impl Party {
    /// The issuer; prepares every genuine banknote qubit.
    pub const MINT: Party = Party(0);
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "party#{}", self.0)
    }
}

/// Opaque reference to one simulated qubit. Not `Clone`.
#[derive(Debug, PartialEq, Eq, Hash)]
pub struct StateHandle {
    id: u64,
}

impl StateHandle {
    pub fn id(&self) -> u64 {
        self.id
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("qubit {0} is no longer alive (already measured)")]
    MeasuredDeadHandle(u64),
    #[error("qubit {id} is not held by {party}")]
    HandleNotHeld { id: u64, party: Party },
    #[error("noise probability {0} outside [0, 0.5)")]
    InvalidNoise(f64),
}

#[derive(Debug)]
struct Qubit {
    bit: bool,
    basis: Basis,
    holder: Party,
}

/// Registry of live qubits with its own seeded randomness for collapse and
/// noise.
#[derive(Debug)]
pub struct QubitStore {
    live: HashMap<u64, Qubit>,
    next_id: u64,
    rng: ChaCha12Rng,
    noise_p: f64,
    measurements: u64,
}

impl QubitStore {
    pub fn new(seed: u64, noise_p: f64) -> Result<Self, QsimError> {
        if !(0.0..0.5).contains(&noise_p) {
            return Err(QsimError::InvalidNoise(noise_p));
        }
        Ok(Self {
            live: HashMap::new(),
            next_id: 0,
            rng: ChaCha12Rng::seed_from_u64(seed),
            noise_p,
            measurements: 0,
        })
    }

    pub fn noise_p(&self) -> f64 {
        self.noise_p
    }

    /// Number of qubits that have been prepared and not yet measured.
    pub fn live_count(&self) -> usize {
        self.live.len()
    }

    /// Total qubits prepared over the store's lifetime.
    pub fn prepared_count(&self) -> u64 {
        self.next_id
    }

    /// Total measurements performed over the store's lifetime.
    pub fn measurement_count(&self) -> u64 {
        self.measurements
    }

    /// Prepares `|bit>_basis` held by `holder`.
    pub fn prepare(&mut self, holder: Party, bit: bool, basis: Basis) -> StateHandle {
        let id = self.next_id;
        self.next_id += 1;
        self.live.insert(id, Qubit { bit, basis, holder });
        StateHandle { id }
    }

    /// Destructively measures `handle` in `basis` on behalf of `party`.
    pub fn measure(&mut self, party: Party, handle: &StateHandle, basis: Basis) -> Result<bool, QsimError> {
        self.check_held(party, handle)?;
        let qubit = self.live.remove(&handle.id).expect("checked live above");
        self.measurements += 1;
        let raw = if qubit.basis == basis {
            qubit.bit
        } else {
            self.rng.random::<bool>()
        };
        let flip = self.noise_p > 0.0 && self.rng.random_bool(self.noise_p);
        Ok(raw ^ flip)
    }

    pub fn is_alive(&self, handle: &StateHandle) -> bool {
        self.live.contains_key(&handle.id)
    }

    pub fn holder(&self, handle: &StateHandle) -> Option<Party> {
        self.live.get(&handle.id).map(|q| q.holder)
    }

    pub fn check_held(&self, party: Party, handle: &StateHandle) -> Result<(), QsimError> {
        match self.live.get(&handle.id) {
            None => Err(QsimError::MeasuredDeadHandle(handle.id)),
            Some(q) if q.holder != party => Err(QsimError::HandleNotHeld { id: handle.id, party }),
            Some(_) => Ok(()),
        }
    }

    /// Conjugate coding of two bits: `b` goes to a Z-basis qubit and `b_prime`
    /// to an X-basis qubit; for `theta = X` the two qubits are swapped.
    pub fn encode_pair(&mut self, holder: Party, b: bool, b_prime: bool, theta: Basis) -> (StateHandle, StateHandle) {
        let z = self.prepare(holder, b, Basis::Z);
        let x = self.prepare(holder, b_prime, Basis::X);
        match theta {
            Basis::Z => (z, x),
            Basis::X => (x, z),
        }
    }

    /// Hands every qubit in `handles` from `from` to `to`. Either all move or
    /// none do.
    pub fn move_handles<'h>(
        &mut self,
        from: Party,
        to: Party,
        handles: impl IntoIterator<Item = &'h StateHandle>,
    ) -> Result<(), QsimError> {
        let ids: Vec<u64> = handles.into_iter().map(|h| h.id).collect();
        for &id in &ids {
            match self.live.get(&id) {
                None => return Err(QsimError::MeasuredDeadHandle(id)),
                Some(q) if q.holder != from => return Err(QsimError::HandleNotHeld { id, party: from }),
                Some(_) => {}
            }
        }
        for id in ids {
            if let Some(q) = self.live.get_mut(&id) {
                q.holder = to;
            }
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn peek(&self, handle: &StateHandle) -> Option<(bool, Basis)> {
        self.live.get(&handle.id).map(|q| (q.bit, q.basis))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const N: usize = 100_000;

    fn four_sigma(p: f64) -> f64 {
        4.0 * (p * (1.0 - p) / N as f64).sqrt()
    }

    #[test]
    fn prepare_encodes_requested_state() {
        let mut store = QubitStore::new(1, 0.0).unwrap();
        let zero = store.prepare(Party::MINT, false, Basis::Z);
        let minus = store.prepare(Party::MINT, true, Basis::X);
        assert_eq!(store.peek(&zero), Some((false, Basis::Z)));
        assert_eq!(store.peek(&minus), Some((true, Basis::X)));
        assert_eq!(store.live_count(), 2);
    }

    #[test]
    fn handle_ids_are_unique() {
        let mut store = QubitStore::new(1, 0.0).unwrap();
        let a = store.prepare(Party::MINT, false, Basis::Z);
        let b = store.prepare(Party::MINT, false, Basis::Z);
        assert_ne!(a.id(), b.id());
    }

    #[test]
    fn matching_basis_is_deterministic() {
        let mut store = QubitStore::new(7, 0.0).unwrap();
        for bit in [false, true] {
            for basis in [Basis::Z, Basis::X] {
                for _ in 0..50 {
                    let h = store.prepare(Party::MINT, bit, basis);
                    assert_eq!(store.measure(Party::MINT, &h, basis).unwrap(), bit);
                }
            }
        }
    }

    #[test]
    fn measuring_twice_is_rejected() {
        let mut store = QubitStore::new(7, 0.0).unwrap();
        let h = store.prepare(Party::MINT, true, Basis::Z);
        store.measure(Party::MINT, &h, Basis::Z).unwrap();
        assert_eq!(
            store.measure(Party::MINT, &h, Basis::Z),
            Err(QsimError::MeasuredDeadHandle(h.id()))
        );
        assert_eq!(store.live_count(), 0);
    }

    #[test]
    fn mismatched_basis_is_uniform() {
        let mut store = QubitStore::new(11, 0.0).unwrap();
        let zeros = (0..N)
            .filter(|_| {
                let h = store.prepare(Party::MINT, false, Basis::X);
                !store.measure(Party::MINT, &h, Basis::Z).unwrap()
            })
            .count();
        let freq = zeros as f64 / N as f64;
        assert!((freq - 0.5).abs() <= four_sigma(0.5), "freq {freq}");
        assert!((freq - 0.5).abs() <= 0.01);
    }

    #[test]
    fn noise_flips_matching_outcomes() {
        let mut store = QubitStore::new(13, 0.1).unwrap();
        let ones = (0..N)
            .filter(|_| {
                let h = store.prepare(Party::MINT, true, Basis::Z);
                store.measure(Party::MINT, &h, Basis::Z).unwrap()
            })
            .count();
        let freq = ones as f64 / N as f64;
        assert!((freq - 0.9).abs() <= 0.01, "freq {freq}");
    }

    #[test]
    fn encode_pair_swaps_for_x() {
        let mut store = QubitStore::new(3, 0.0).unwrap();
        let (a, b) = store.encode_pair(Party::MINT, false, true, Basis::Z);
        assert_eq!(store.peek(&a), Some((false, Basis::Z)));
        assert_eq!(store.peek(&b), Some((true, Basis::X)));
        let (a, b) = store.encode_pair(Party::MINT, false, true, Basis::X);
        assert_eq!(store.peek(&a), Some((true, Basis::X)));
        assert_eq!(store.peek(&b), Some((false, Basis::Z)));
    }

    #[test]
    fn conjugate_pair_recovers_three_quarters() {
        let mut store = QubitStore::new(17, 0.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let hits = (0..N)
            .filter(|_| {
                let b: bool = rng.random();
                let b_prime: bool = rng.random();
                let theta = Basis::from_bit(rng.random());
                let (first, second) = store.encode_pair(Party::MINT, b, b_prime, theta);
                let guess = store.measure(Party::MINT, &first, Basis::Z).unwrap();
                store.measure(Party::MINT, &second, Basis::Z).unwrap();
                guess == b
            })
            .count();
        let freq = hits as f64 / N as f64;
        assert!((freq - 0.75).abs() <= four_sigma(0.75), "freq {freq}");
    }

    #[test]
    fn moved_handles_leave_the_sender() {
        let alice = Party(1);
        let bob = Party(2);
        let mut store = QubitStore::new(5, 0.0).unwrap();
        let hs: Vec<_> = (0..3).map(|_| store.prepare(alice, false, Basis::Z)).collect();
        store.move_handles(alice, bob, &hs).unwrap();
        assert!(matches!(
            store.measure(alice, &hs[0], Basis::Z),
            Err(QsimError::HandleNotHeld { .. })
        ));
        store.move_handles(bob, alice, &hs).unwrap();
        assert!(hs.iter().all(|h| store.holder(h) == Some(alice)));
        assert!(matches!(
            store.move_handles(bob, alice, &hs),
            Err(QsimError::HandleNotHeld { .. })
        ));
        store.move_handles(alice, bob, std::iter::empty()).unwrap();
    }

    #[test]
    fn failed_move_is_atomic() {
        let alice = Party(1);
        let bob = Party(2);
        let mut store = QubitStore::new(5, 0.0).unwrap();
        let mine = store.prepare(alice, false, Basis::Z);
        let theirs = store.prepare(bob, false, Basis::Z);
        assert!(store.move_handles(alice, bob, [&mine, &theirs]).is_err());
        assert_eq!(store.holder(&mine), Some(alice));
    }

    #[test]
    fn same_seed_same_outcomes() {
        let run = |seed| {
            let mut store = QubitStore::new(seed, 0.05).unwrap();
            (0..256)
                .map(|i| {
                    let h = store.prepare(Party::MINT, i % 3 == 0, Basis::from_bit(i % 2 == 0));
                    store.measure(Party::MINT, &h, Basis::Z).unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn noise_bounds_checked() {
        assert!(QubitStore::new(0, 0.5).is_err());
        assert!(QubitStore::new(0, -0.1).is_err());
    }
}
