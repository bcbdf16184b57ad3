//! Mock threshold homomorphic encryption.
//!
//! Ciphertexts are opaque handles into a sealed plaintext table owned by the
//! scheme. Evaluation supports addition, scalar multiplication, absolute
//! value and division; decryption needs every share of the key.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{Signed, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rational::{to_canonical, Rational};
use crate::rng::{SimRng, Stream};

/// Smallest number of parties of a joint key.
pub const MIN_PARTIES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KeyId(pub u64);

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointPublicKey {
    pub key_id: KeyId,
    /// Party ids holding a share.
    pub parties: Vec<usize>,
}

/// One party's secret share.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyShare {
    key_id: KeyId,
    holder: usize,
    secret: [u8; 32],
}

impl KeyShare {
    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    pub fn holder(&self) -> usize {
        self.holder
    }

    /// Bytes a party sends as its decryption share.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.key_id.0.to_be_bytes().to_vec();
        out.extend_from_slice(&(self.holder as u64).to_be_bytes());
        out.extend_from_slice(&self.secret);
        out
    }
}

impl fmt::Debug for KeyShare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyShare")
            .field("key_id", &self.key_id)
            .field("holder", &self.holder)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    pub joint_public_key: JointPublicKey,
    pub shares: Vec<KeyShare>,
}

/// Handle to a sealed plaintext.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext {
    key_id: KeyId,
    handle: u64,
    nonce: [u8; 16],
}

impl Ciphertext {
    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    /// Wire bytes; they carry no plaintext.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.key_id.0.to_be_bytes().to_vec();
        out.extend_from_slice(&self.handle.to_be_bytes());
        out.extend_from_slice(&self.nonce);
        out
    }
}

/// Wire bytes of a ciphertext vector.
pub fn ciphertexts_bytes(cts: &[Ciphertext]) -> Vec<u8> {
    cts.iter().flat_map(Ciphertext::to_bytes).collect()
}

/// Binding commitment to a plaintext vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Commitment(pub [u8; 32]);

impl Commitment {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeError {
    #[error("a joint key needs at least {MIN_PARTIES} parties, got {0}")]
    TooFewParties(usize),
    #[error("duplicate party {0}")]
    DuplicateParty(usize),
    #[error("unknown key {0}")]
    UnknownKey(KeyId),
    #[error("key mismatch: expected {expected}, found {found}")]
    KeyMismatch { expected: KeyId, found: KeyId },
    #[error("ciphertext handle not issued by this scheme")]
    ForeignCiphertext,
    #[error("decryption needs all {need} shares, got {have}")]
    Quorum { have: usize, need: usize },
    #[error("share of party {0} does not belong to this key")]
    ForeignShare(usize),
    #[error("division by an encrypted zero")]
    DivisionByZero,
}

/// Operations a threshold scheme offers the protocol.
pub trait ThresholdScheme {
    fn encrypt(
        &mut self,
        key: &JointPublicKey,
        plaintext: &Rational,
    ) -> Result<Ciphertext, HeError>;
    fn add(&mut self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError>;
    fn scale(&mut self, a: &Ciphertext, k: &Rational) -> Result<Ciphertext, HeError>;
    fn abs(&mut self, a: &Ciphertext) -> Result<Ciphertext, HeError>;
    fn div(&mut self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError>;
    fn decrypt(
        &self,
        shares: &[KeyShare],
        ciphertexts: &[Ciphertext],
    ) -> Result<Vec<Rational>, HeError>;
}

#[derive(Debug, Clone)]
struct KeyRecord {
    parties: Vec<usize>,
    share_digests: BTreeMap<usize, [u8; 32]>,
}

#[derive(Debug, Clone)]
struct Sealed {
    key_id: KeyId,
    nonce: [u8; 16],
    value: Rational,
}

/// In-memory threshold scheme with a sealed plaintext table.
#[derive(Debug, Clone)]
pub struct MockThresholdHe {
    rng: ChaCha8Rng,
    keys: BTreeMap<KeyId, KeyRecord>,
    table: Vec<Sealed>,
    commit_secret: [u8; 32],
}

fn sha(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_be_bytes());
        h.update(p);
    }
    h.finalize().into()
}

impl MockThresholdHe {
    pub fn new(rng: &mut SimRng) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(rng.stream(Stream::Crypto).gen());
        let mut commit_secret = [0u8; 32];
        inner.fill_bytes(&mut commit_secret);
        Self {
            rng: inner,
            keys: BTreeMap::new(),
            table: Vec::new(),
            commit_secret,
        }
    }

    /// Joint key over `parties`, one share each.
    pub fn keygen(&mut self, parties: &[usize]) -> Result<KeyMaterial, HeError> {
        if parties.len() < MIN_PARTIES {
            return Err(HeError::TooFewParties(parties.len()));
        }
        self.generate(parties)
    }

    /// Key held by a single party, for point-to-point encryption.
    pub fn personal_key(&mut self, holder: usize) -> KeyMaterial {
        self.generate(&[holder])
            .expect("a single party is always distinct")
    }

    fn generate(&mut self, parties: &[usize]) -> Result<KeyMaterial, HeError> {
        let mut seen = BTreeSet::new();
        for &p in parties {
            if !seen.insert(p) {
                return Err(HeError::DuplicateParty(p));
            }
        }
        let key_id = loop {
            let id = KeyId(self.rng.gen());
            if !self.keys.contains_key(&id) {
                break id;
            }
        };
        let mut shares = Vec::with_capacity(parties.len());
        let mut share_digests = BTreeMap::new();
        for &holder in parties {
            let mut secret = [0u8; 32];
            self.rng.fill_bytes(&mut secret);
            share_digests.insert(holder, sha(&[&secret]));
            shares.push(KeyShare {
                key_id,
                holder,
                secret,
            });
        }
        self.keys.insert(
            key_id,
            KeyRecord {
                parties: parties.to_vec(),
                share_digests,
            },
        );
        Ok(KeyMaterial {
            joint_public_key: JointPublicKey {
                key_id,
                parties: parties.to_vec(),
            },
            shares,
        })
    }

    fn seal(&mut self, key_id: KeyId, value: Rational) -> Ciphertext {
        let mut nonce = [0u8; 16];
        self.rng.fill_bytes(&mut nonce);
        let handle = self.table.len() as u64;
        self.table.push(Sealed {
            key_id,
            nonce,
            value,
        });
        Ciphertext {
            key_id,
            handle,
            nonce,
        }
    }

    fn open(&self, c: &Ciphertext) -> Result<&Rational, HeError> {
        let sealed = self
            .table
            .get(c.handle as usize)
            .ok_or(HeError::ForeignCiphertext)?;
        if sealed.key_id != c.key_id || sealed.nonce != c.nonce {
            return Err(HeError::ForeignCiphertext);
        }
        Ok(&sealed.value)
    }

    fn same_key(a: &Ciphertext, b: &Ciphertext) -> Result<KeyId, HeError> {
        if a.key_id != b.key_id {
            return Err(HeError::KeyMismatch {
                expected: a.key_id,
                found: b.key_id,
            });
        }
        Ok(a.key_id)
    }

    fn plaintext_digest(
        &self,
        ciphertexts: &[Ciphertext],
        binding: &[u8],
    ) -> Result<[u8; 32], HeError> {
        let mut text = String::new();
        for c in ciphertexts {
            text.push_str(&to_canonical(self.open(c)?));
            text.push(',');
        }
        Ok(sha(&[&self.commit_secret, binding, text.as_bytes()]))
    }

    /// Commitment to the plaintexts behind `ciphertexts`, bound to
    /// `binding` (sender and round). Equal plaintext vectors under
    /// different keys commit identically.
    pub fn commit(
        &self,
        ciphertexts: &[Ciphertext],
        binding: &[u8],
    ) -> Result<Commitment, HeError> {
        Ok(Commitment(self.plaintext_digest(ciphertexts, binding)?))
    }

    /// Verifier side of the commitment: does `commitment` open to the
    /// plaintexts behind `ciphertexts`?
    pub fn verify_commitment(
        &self,
        ciphertexts: &[Ciphertext],
        binding: &[u8],
        commitment: &Commitment,
    ) -> Result<bool, HeError> {
        Ok(self.plaintext_digest(ciphertexts, binding)? == commitment.0)
    }

    /// Number of sealed plaintexts.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl ThresholdScheme for MockThresholdHe {
    fn encrypt(
        &mut self,
        key: &JointPublicKey,
        plaintext: &Rational,
    ) -> Result<Ciphertext, HeError> {
        if !self.keys.contains_key(&key.key_id) {
            return Err(HeError::UnknownKey(key.key_id));
        }
        Ok(self.seal(key.key_id, plaintext.clone()))
    }

    fn add(&mut self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        let key = Self::same_key(a, b)?;
        let v = self.open(a)? + self.open(b)?;
        Ok(self.seal(key, v))
    }

    fn scale(&mut self, a: &Ciphertext, k: &Rational) -> Result<Ciphertext, HeError> {
        let v = self.open(a)? * k;
        Ok(self.seal(a.key_id, v))
    }

    fn abs(&mut self, a: &Ciphertext) -> Result<Ciphertext, HeError> {
        let v = self.open(a)?.abs();
        Ok(self.seal(a.key_id, v))
    }

    fn div(&mut self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        let key = Self::same_key(a, b)?;
        let d = self.open(b)?;
        if d.is_zero() {
            return Err(HeError::DivisionByZero);
        }
        let v = self.open(a)? / d;
        Ok(self.seal(key, v))
    }

    fn decrypt(
        &self,
        shares: &[KeyShare],
        ciphertexts: &[Ciphertext],
    ) -> Result<Vec<Rational>, HeError> {
        let Some(first) = ciphertexts.first() else {
            return Ok(Vec::new());
        };
        let key_id = first.key_id;
        let record = self.keys.get(&key_id).ok_or(HeError::UnknownKey(key_id))?;
        let mut present = BTreeSet::new();
        for share in shares {
            if share.key_id != key_id {
                return Err(HeError::KeyMismatch {
                    expected: key_id,
                    found: share.key_id,
                });
            }
            match record.share_digests.get(&share.holder) {
                Some(d) if *d == sha(&[&share.secret]) => {
                    present.insert(share.holder);
                }
                _ => return Err(HeError::ForeignShare(share.holder)),
            }
        }
        if present.len() < record.parties.len() {
            return Err(HeError::Quorum {
                have: present.len(),
                need: record.parties.len(),
            });
        }
        ciphertexts
            .iter()
            .map(|c| {
                if c.key_id != key_id {
                    return Err(HeError::KeyMismatch {
                        expected: key_id,
                        found: c.key_id,
                    });
                }
                self.open(c).cloned()
            })
            .collect()
    }
}

/// Fresh scheme seeded from `rng` plus a joint key over `parties`.
pub fn keygen(
    parties: &[usize],
    rng: &mut SimRng,
) -> Result<(MockThresholdHe, KeyMaterial), HeError> {
    let mut he = MockThresholdHe::new(rng);
    let key = he.keygen(parties)?;
    Ok((he, key))
}

/// Decrypts with a complete share set; any proper subset is an error.
pub fn threshold_decrypt(
    he: &impl ThresholdScheme,
    shares: &[KeyShare],
    ciphertexts: &[Ciphertext],
) -> Result<Vec<Rational>, HeError> {
    he.decrypt(shares, ciphertexts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn full_quorum_round_trip() {
        let (mut he, key) = keygen(&[0, 1, 2], &mut SimRng::new(3)).unwrap();
        assert_eq!(key.shares.len(), 3);
        let c = he.encrypt(&key.joint_public_key, &ratio(1, 2)).unwrap();
        assert_eq!(
            threshold_decrypt(&he, &key.shares, &[c.clone()]).unwrap(),
            vec![ratio(1, 2)]
        );
        assert!(matches!(
            threshold_decrypt(&he, &key.shares[..2], &[c]),
            Err(HeError::Quorum { have: 2, need: 3 })
        ));
    }

    #[test]
    fn needs_three_parties() {
        assert_eq!(
            keygen(&[0, 1], &mut SimRng::new(0)).unwrap_err(),
            HeError::TooFewParties(2)
        );
        assert_eq!(
            keygen(&[0, 1, 1], &mut SimRng::new(0)).unwrap_err(),
            HeError::DuplicateParty(1)
        );
    }

    #[test]
    fn keys_do_not_mix() {
        let (mut a, ka) = keygen(&[0, 1, 2], &mut SimRng::new(1)).unwrap();
        let (b, kb) = keygen(&[0, 1, 2], &mut SimRng::new(2)).unwrap();
        assert_ne!(ka.joint_public_key.key_id, kb.joint_public_key.key_id);
        let c = a.encrypt(&ka.joint_public_key, &int(1)).unwrap();
        assert!(b.decrypt(&kb.shares, &[c.clone()]).is_err());
        assert!(matches!(
            a.decrypt(&kb.shares, &[c]),
            Err(HeError::KeyMismatch { .. })
        ));
        let k2 = a.keygen(&[0, 1, 2]).unwrap();
        let x = a.encrypt(&ka.joint_public_key, &int(1)).unwrap();
        let y = a.encrypt(&k2.joint_public_key, &int(1)).unwrap();
        assert!(matches!(a.add(&x, &y), Err(HeError::KeyMismatch { .. })));
    }

    #[test]
    fn equal_plaintexts_distinct_ciphertexts() {
        let (mut he, key) = keygen(&[0, 1, 2], &mut SimRng::new(5)).unwrap();
        let a = he.encrypt(&key.joint_public_key, &int(1)).unwrap();
        let b = he.encrypt(&key.joint_public_key, &int(1)).unwrap();
        assert_ne!(a, b);
        assert_ne!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn evaluation_ops() {
        let (mut he, key) = keygen(&[0, 1, 2], &mut SimRng::new(5)).unwrap();
        let pk = key.joint_public_key.clone();
        let a = he.encrypt(&pk, &int(-3)).unwrap();
        let b = he.encrypt(&pk, &int(2)).unwrap();
        let sum = he.add(&a, &b).unwrap();
        let abs = he.abs(&a).unwrap();
        let half = he.scale(&b, &ratio(1, 2)).unwrap();
        let q = he.div(&a, &b).unwrap();
        let out = he.decrypt(&key.shares, &[sum, abs, half, q]).unwrap();
        assert_eq!(out, vec![int(-1), int(3), int(1), ratio(-3, 2)]);
        let z = he.encrypt(&pk, &int(0)).unwrap();
        assert_eq!(he.div(&a, &z).unwrap_err(), HeError::DivisionByZero);
    }

    #[test]
    fn commitments_bind_plaintexts() {
        let (mut he, key) = keygen(&[0, 1, 2], &mut SimRng::new(5)).unwrap();
        let monitor = he.personal_key(7);
        let a = he.encrypt(&key.joint_public_key, &int(1)).unwrap();
        let b = he.encrypt(&monitor.joint_public_key, &int(1)).unwrap();
        let c = he.encrypt(&monitor.joint_public_key, &int(-1)).unwrap();
        let ca = he.commit(&[a.clone()], b"b0/1").unwrap();
        assert_eq!(ca, he.commit(&[b], b"b0/1").unwrap());
        assert_ne!(ca, he.commit(&[c], b"b0/1").unwrap());
        let mut tampered = ca;
        tampered.0[0] ^= 1;
        assert!(he.verify_commitment(&[a.clone()], b"b0/1", &ca).unwrap());
        assert!(!he.verify_commitment(&[a], b"b0/1", &tampered).unwrap());
    }
}
