//! Byte encoding of a note's classical record.
//!
//! Layout, all integers big-endian:
//!
//! ```text
//! version u8 (=1) | note_id [32] | zeta u32
//! | 2*zeta digests, row-major (i, b)
//! | 2*zeta signatures, each u32 length + bytes
//! | J bitmap, ceil(zeta/8) bytes, LSB first
//! | revealed count u32, then (index u32, bit u8, kappa) with strictly
//!   increasing index
//! | for each j in J ascending: token blob, u32 length + bytes
//! ```
//!
//! The pre-image length is not encoded; decoders are told it.

use std::collections::{BTreeMap, BTreeSet};

use super::ClassicalNote;
use crate::codec::{DecodeError, Reader, Writer};
use crate::hashsig::{Digest, MintSignature, PreImage, DIGEST_LEN};
use crate::otm::OtmToken;

pub const VERSION: u8 = 1;

pub fn encode(note: &ClassicalNote) -> Vec<u8> {
    let zeta = note.zeta();
    let mut w = Writer::new();
    w.u8(VERSION).bytes(note.note_id().as_bytes()).u32(zeta as u32);
    for row in note.hashes() {
        w.bytes(row[0].as_bytes()).bytes(row[1].as_bytes());
    }
    for row in note.signatures() {
        w.prefixed(&row[0].to_bytes()).prefixed(&row[1].to_bytes());
    }
    w.bits((0..zeta).map(|i| note.unopened().contains(&i)));
    w.u32(note.revealed().len() as u32);
    for (&k, (bit, kappa)) in note.revealed() {
        w.u32(k as u32).u8(u8::from(*bit)).bytes(kappa.as_bytes());
    }
    for j in note.unopened() {
        let blob = note.token(*j).map(OtmToken::to_blob).unwrap_or_default();
        w.prefixed(&blob);
    }
    w.finish()
}

pub fn decode(bytes: &[u8], kappa_len: usize) -> Result<ClassicalNote, DecodeError> {
    let mut r = Reader::new(bytes);
    let version = r.u8()?;
    if version != VERSION {
        return Err(DecodeError::BadVersion(version));
    }
    let note_id = digest(&mut r)?;
    let zeta = r.u32()? as usize;
    // Every row needs at least two digests; bail before allocating.
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
    let unopened: BTreeSet<usize> = r
        .bits(zeta)?
        .into_iter()
        .enumerate()
        .filter_map(|(i, b)| b.then_some(i))
        .collect();

    let count = r.u32()? as usize;
    let mut revealed = BTreeMap::new();
    let mut last = None;
    for _ in 0..count {
        let k = r.u32()? as usize;
        if last.is_some_and(|prev| k <= prev) {
            return Err(DecodeError::NonCanonical("revealed indices not increasing"));
        }
        last = Some(k);
        let bit = match r.u8()? {
            0 => false,
            1 => true,
            _ => return Err(DecodeError::Invalid("challenge bit out of range")),
        };
        let kappa = PreImage::new(r.take(kappa_len)?.to_vec());
        revealed.insert(k, (bit, kappa));
    }
    if unopened.len() + revealed.len() != zeta || revealed.keys().any(|k| *k >= zeta || unopened.contains(k)) {
        return Err(DecodeError::Invalid("J and K do not partition the rows"));
    }

    let mut tokens = BTreeMap::new();
    for &j in &unopened {
        let token = OtmToken::from_blob(r.prefixed()?).map_err(|_| DecodeError::Invalid("unreadable token blob"))?;
        tokens.insert(j, token);
    }
    r.finish()?;
    Ok(ClassicalNote::from_raw(
        note_id, hashes, sigs, unopened, tokens, revealed,
    ))
}

fn digest(r: &mut Reader<'_>) -> Result<Digest, DecodeError> {
    Ok(Digest::from_slice(r.take(DIGEST_LEN)?).expect("exact length"))
}
