//! Hashing and the mint's hash-based signatures.
//!
//! Each leaf of a depth-`d` Merkle tree is a Lamport one-time key over
//! SHA-256 digests: 256 pairs of secret strings, each committed by its hash.
//! A signature reveals one secret per digest bit, carries the hashes of the
//! unrevealed halves, and proves the leaf's membership with `d` sibling
//! digests. The public key is the tree root.

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::codec::{DecodeError, Reader, Writer};

/// Digest length in bytes.
pub const DIGEST_LEN: usize = 32;
/// Bits signed per one-time key.
pub const OTS_BITS: usize = DIGEST_LEN * 8;
pub const MAX_DEPTH: u8 = 20;

const TAG_LEAF_SEED: u8 = 0x01;
const TAG_OTS_PUBLIC: u8 = 0x02;
const TAG_OTS_MESSAGE: u8 = 0x03;
const TAG_LEAF: u8 = 0x04;
const TAG_NODE: u8 = 0x05;
const TAG_MASTER: u8 = 0x06;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(Digest)
    }

    fn bit(&self, i: usize) -> bool {
        self.0[i / 8] >> (7 - i % 8) & 1 == 1
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// SHA-256.
pub fn hash(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

pub(crate) fn hash_tagged(tag: u8, parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    h.update([tag]);
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// A long random tag whose short hash is published.
#[derive(Clone, PartialEq, Eq)]
pub struct PreImage(Vec<u8>);

impl PreImage {
    pub fn new(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn digest(&self) -> Digest {
        hash(&self.0)
    }
}

impl fmt::Debug for PreImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PreImage({} bytes, h={})", self.0.len(), self.digest())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HashSigError {
    #[error("tree depth {0} outside 1..={MAX_DEPTH}")]
    DepthOutOfRange(u8),
    #[error("all {0} one-time keys have been used")]
    KeysExhausted(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MintPublicKey {
    pub root: Digest,
    pub depth: u8,
}

impl MintPublicKey {
    pub fn capacity(&self) -> u64 {
        1u64 << self.depth
    }
}

/// Secret material of one leaf: `secrets[2 * bit_index + bit]`.
struct OneTimeKey {
    secrets: Vec<Digest>,
}

impl OneTimeKey {
    fn derive(master: &Digest, leaf: u32) -> Self {
        let seed = hash_tagged(TAG_LEAF_SEED, &[master.as_bytes(), &leaf.to_be_bytes()]);
        let mut rng = ChaCha12Rng::from_seed(seed.0);
        let secrets = (0..2 * OTS_BITS)
            .map(|_| {
                let mut s = [0u8; DIGEST_LEN];
                rng.fill_bytes(&mut s);
                Digest(s)
            })
            .collect();
        Self { secrets }
    }

    fn public_halves(&self) -> Vec<Digest> {
        self.secrets.iter().map(ots_public).collect()
    }
}

fn ots_public(secret: &Digest) -> Digest {
    hash_tagged(TAG_OTS_PUBLIC, &[secret.as_bytes()])
}

fn ots_message(msg: &[u8]) -> Digest {
    hash_tagged(TAG_OTS_MESSAGE, &[msg])
}

fn leaf_commitment(public_halves: &[Digest]) -> Digest {
    let mut h = Sha256::new();
    h.update([TAG_LEAF]);
    for p in public_halves {
        h.update(p.as_bytes());
    }
    Digest(h.finalize().into())
}

fn node(left: &Digest, right: &Digest) -> Digest {
    hash_tagged(TAG_NODE, &[left.as_bytes(), right.as_bytes()])
}

/// Signing key plus the full Merkle tree; `levels[0]` holds the leaves.
pub struct MintKeypair {
    master: Digest,
    depth: u8,
    next_index: u32,
    levels: Vec<Vec<Digest>>,
}

impl fmt::Debug for MintKeypair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MintKeypair")
            .field("root", &self.public_key().root)
            .field("depth", &self.depth)
            .field("next_index", &self.next_index)
            .finish_non_exhaustive()
    }
}

/// Deterministically derives a keypair with `2^depth` one-time keys.
pub fn keygen(seed: &[u8], depth: u8) -> Result<MintKeypair, HashSigError> {
    if !(1..=MAX_DEPTH).contains(&depth) {
        return Err(HashSigError::DepthOutOfRange(depth));
    }
    let master = hash_tagged(TAG_MASTER, &[seed]);
    let leaves: Vec<Digest> = (0..1u32 << depth)
        .map(|i| leaf_commitment(&OneTimeKey::derive(&master, i).public_halves()))
        .collect();
    let mut levels = vec![leaves];
    while levels.last().map_or(0, Vec::len) > 1 {
        let next = levels
            .last()
            .unwrap()
            .chunks_exact(2)
            .map(|pair| node(&pair[0], &pair[1]))
            .collect();
        levels.push(next);
    }
    Ok(MintKeypair {
        master,
        depth,
        next_index: 0,
        levels,
    })
}

impl MintKeypair {
    pub fn public_key(&self) -> MintPublicKey {
        MintPublicKey {
            root: self.levels[self.depth as usize][0],
            depth: self.depth,
        }
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn capacity(&self) -> u64 {
        1u64 << self.depth
    }

    pub fn remaining(&self) -> u64 {
        self.capacity() - u64::from(self.next_index)
    }

    /// Root recomputed from the stored leaves.
    pub fn recompute_root(&self) -> Digest {
        let mut level = self.levels[0].clone();
        while level.len() > 1 {
            level = level.chunks_exact(2).map(|p| node(&p[0], &p[1])).collect();
        }
        level[0]
    }

    /// Signs with the next unused leaf.
    pub fn sign(&mut self, msg: &[u8]) -> Result<MintSignature, HashSigError> {
        if self.remaining() == 0 {
            return Err(HashSigError::KeysExhausted(self.capacity()));
        }
        let index = self.next_index;
        self.next_index += 1;

        let key = OneTimeKey::derive(&self.master, index);
        let digest = ots_message(msg);
        let mut reveals = Vec::with_capacity(OTS_BITS);
        let mut complements = Vec::with_capacity(OTS_BITS);
        for j in 0..OTS_BITS {
            let bit = usize::from(digest.bit(j));
            reveals.push(key.secrets[2 * j + bit]);
            complements.push(ots_public(&key.secrets[2 * j + 1 - bit]));
        }
        let auth_path = (0..self.depth as usize)
            .map(|level| self.levels[level][(index as usize >> level) ^ 1])
            .collect();
        Ok(MintSignature {
            index,
            reveals,
            complements,
            auth_path,
        })
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct MintSignature {
    pub index: u32,
    /// One revealed secret per message-digest bit.
    pub reveals: Vec<Digest>,
    /// Public halves of the secrets that were not revealed.
    pub complements: Vec<Digest>,
    /// Sibling digests from leaf to root.
    pub auth_path: Vec<Digest>,
}

impl fmt::Debug for MintSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MintSignature")
            .field("index", &self.index)
            .field("depth", &self.auth_path.len())
            .finish_non_exhaustive()
    }
}

impl MintSignature {
    /// `index` (u32 BE), reveals, complements, then the auth path; the
    /// depth is implied by the total length.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.index);
        for d in self.reveals.iter().chain(&self.complements).chain(&self.auth_path) {
            w.bytes(d.as_bytes());
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let index = r.u32()?;
        let mut digests = |n: usize| -> Result<Vec<Digest>, DecodeError> {
            (0..n)
                .map(|_| Ok(Digest::from_slice(r.take(DIGEST_LEN)?).unwrap()))
                .collect()
        };
        let reveals = digests(OTS_BITS)?;
        let complements = digests(OTS_BITS)?;
        let rest = r.remaining();
        if !rest.is_multiple_of(DIGEST_LEN) {
            return Err(DecodeError::Invalid("auth path not a whole number of digests"));
        }
        let auth_path = (0..rest / DIGEST_LEN)
            .map(|_| Ok(Digest::from_slice(r.take(DIGEST_LEN)?).unwrap()))
            .collect::<Result<_, DecodeError>>()?;
        r.finish()?;
        Ok(Self {
            index,
            reveals,
            complements,
            auth_path,
        })
    }
}

/// Checks `sig` on `msg` against the mint's public key. Malformed input
/// yields `false`.
pub fn verify(pk: &MintPublicKey, msg: &[u8], sig: &MintSignature) -> bool {
    if sig.reveals.len() != OTS_BITS
        || sig.complements.len() != OTS_BITS
        || sig.auth_path.len() != pk.depth as usize
        || u64::from(sig.index) >= pk.capacity()
    {
        return false;
    }
    let digest = ots_message(msg);
    let mut halves = Vec::with_capacity(2 * OTS_BITS);
    for j in 0..OTS_BITS {
        let revealed = ots_public(&sig.reveals[j]);
        let other = sig.complements[j];
        if digest.bit(j) {
            halves.extend([other, revealed]);
        } else {
            halves.extend([revealed, other]);
        }
    }
    let mut acc = leaf_commitment(&halves);
    for (level, sibling) in sig.auth_path.iter().enumerate() {
        acc = if sig.index >> level & 1 == 0 {
            node(&acc, sibling)
        } else {
            node(sibling, &acc)
        };
    }
    acc == pk.root
}
