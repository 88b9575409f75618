//! Signing backends for endorsements: digital signatures and the HMAC-vector
//! authenticator scheme, behind one interface so broadcast code does not care
//! which is in use.
//!
//! Key material is provisioned deterministically from the run seed. Signature
//! mode uses real Ed25519, so unforgeability holds outright. Authenticator
//! mode derives one pairwise secret per node pair; an authenticator is a
//! vector of n MACs, one per receiving node, which keeps certificates
//! transferable: any third node can check its own entry.

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::types::{NodeId, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProofMode {
    #[default]
    Signature,
    Authenticator,
}

/// A node's long-lived key pair.
#[derive(Debug, Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    pub fn public_bytes(&self) -> [u8; 32] {
        self.signing.verifying_key().to_bytes()
    }

    pub fn public(&self) -> VerifyingKey {
        self.signing.verifying_key()
    }
}

/// Deterministic key generation: the same `(node, seed)` always yields the
/// same pair, distinct nodes yield distinct pairs.
pub fn keygen(node: NodeId, seed: u64) -> KeyPair {
    let mut h = Sha256::new();
    h.update(b"icsim-keygen");
    h.update(seed.to_le_bytes());
    h.update([node.0]);
    let digest: [u8; 32] = h.finalize().into();
    KeyPair { signing: SigningKey::from_bytes(&digest) }
}

pub fn sign(key: &KeyPair, message: &[u8]) -> Vec<u8> {
    key.signing.sign(message).to_bytes().to_vec()
}

/// Verification never panics: malformed signature bytes simply fail.
pub fn verify(public: &VerifyingKey, message: &[u8], signature: &[u8]) -> bool {
    let Ok(bytes) = <[u8; 64]>::try_from(signature) else {
        return false;
    };
    public.verify(message, &Signature::from_bytes(&bytes)).is_ok()
}

const MAC_LEN: usize = 32;

fn hmac_sha256(key: &[u8; 32], message: &[u8]) -> [u8; MAC_LEN] {
    let mut ipad = [0x36u8; 64];
    let mut opad = [0x5cu8; 64];
    for i in 0..32 {
        ipad[i] ^= key[i];
        opad[i] ^= key[i];
    }
    let inner: [u8; 32] = {
        let mut h = Sha256::new();
        h.update(ipad);
        h.update(message);
        h.finalize().into()
    };
    let mut h = Sha256::new();
    h.update(opad);
    h.update(inner);
    h.finalize().into()
}

/// A vector of n MACs over one message, entry `j` keyed by the pairwise
/// secret shared between the composer and node `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Authenticator {
    pub entries: Vec<[u8; MAC_LEN]>,
}

/// Proof attached to an endorsement: a signature or a full authenticator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Proof {
    Signature(Vec<u8>),
    Authenticator(Authenticator),
}

/// One node vouching that `subject` broadcast `value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endorsement {
    pub endorser: NodeId,
    pub subject: NodeId,
    pub value: Value,
    pub proof: Proof,
}

/// The byte string an endorsement proof covers.
pub fn endorsement_message(subject: NodeId, value: &Value) -> Vec<u8> {
    let mut m = Vec::with_capacity(16);
    m.extend_from_slice(b"c-ready");
    m.push(subject.0);
    value.encode(&mut m);
    m
}

/// All key material for one run: per-node signing keys and the pairwise
/// secrets backing authenticators. Honest private parts stay inside; the
/// modeled adversary is handed only the corrupted rows.
pub struct Keyring {
    mode: ProofMode,
    n: usize,
    keys: Vec<KeyPair>,
    publics: Vec<VerifyingKey>,
    pairwise: Vec<Vec<[u8; 32]>>,
}

impl Keyring {
    pub fn new(n: usize, seed: u64, mode: ProofMode) -> Keyring {
        let keys: Vec<KeyPair> = NodeId::all(n).map(|id| keygen(id, seed)).collect();
        let publics = keys.iter().map(|k| k.public()).collect();
        let mut pairwise = vec![vec![[0u8; 32]; n]; n];
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (i.min(j) as u8, i.max(j) as u8);
                let mut h = Sha256::new();
                h.update(b"icsim-pairwise");
                h.update(seed.to_le_bytes());
                h.update([a, b]);
                pairwise[i][j] = h.finalize().into();
            }
        }
        Keyring { mode, n, keys, publics, pairwise }
    }

    pub fn mode(&self) -> ProofMode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn keypair(&self, node: NodeId) -> &KeyPair {
        &self.keys[node.pos()]
    }

    pub fn public(&self, node: NodeId) -> &VerifyingKey {
        &self.publics[node.pos()]
    }

    /// Pairwise secrets of one node, for handing to the adversary when that
    /// node is corrupted.
    pub fn pairwise_row(&self, node: NodeId) -> &[[u8; 32]] {
        &self.pairwise[node.pos()]
    }

    pub fn make_authenticator(&self, sender: NodeId, message: &[u8]) -> Authenticator {
        let entries = (0..self.n)
            .map(|j| hmac_sha256(&self.pairwise[sender.pos()][j], message))
            .collect();
        Authenticator { entries }
    }

    /// Checks the `receiver` entry of an authenticator composed by `sender`.
    pub fn verify_authenticator_entry(
        &self,
        sender: NodeId,
        receiver: NodeId,
        message: &[u8],
        auth: &Authenticator,
    ) -> bool {
        if auth.entries.len() != self.n {
            return false;
        }
        let expected = hmac_sha256(&self.pairwise[sender.pos()][receiver.pos()], message);
        auth.entries[receiver.pos()] == expected
    }

    /// Produces an endorsement for `(subject, value)` signed by `endorser`.
    pub fn endorse(&self, endorser: NodeId, subject: NodeId, value: &Value) -> Endorsement {
        let message = endorsement_message(subject, value);
        let proof = match self.mode {
            ProofMode::Signature => Proof::Signature(sign(&self.keys[endorser.pos()], &message)),
            ProofMode::Authenticator => {
                Proof::Authenticator(self.make_authenticator(endorser, &message))
            }
        };
        Endorsement { endorser, subject, value: value.clone(), proof }
    }

    /// Verifies one endorsement from `verifier`'s point of view. In
    /// authenticator mode only the verifier's own entry can be checked.
    pub fn verify_endorsement(&self, verifier: NodeId, e: &Endorsement) -> bool {
        let message = endorsement_message(e.subject, &e.value);
        match &e.proof {
            Proof::Signature(sig) => verify(&self.publics[e.endorser.pos()], &message, sig),
            Proof::Authenticator(auth) => {
                self.verify_authenticator_entry(e.endorser, verifier, &message, auth)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keygen_is_deterministic_and_distinct() {
        let a = keygen(NodeId(1), 7);
        let b = keygen(NodeId(1), 7);
        assert_eq!(a.public_bytes(), b.public_bytes());
        let c = keygen(NodeId(2), 7);
        assert_ne!(a.public_bytes(), c.public_bytes());
        let d = keygen(NodeId(1), 8);
        assert_ne!(a.public_bytes(), d.public_bytes());
    }

    #[test]
    fn sign_verify_round_trip_including_empty() {
        let k = keygen(NodeId(1), 7);
        for msg in [&b""[..], b"m", b"a longer message body"] {
            let sig = sign(&k, msg);
            assert!(verify(&k.public(), msg, &sig));
        }
    }

    #[test]
    fn flipped_message_bit_fails() {
        let k = keygen(NodeId(1), 7);
        let sig = sign(&k, b"payload");
        let mut bad = b"payload".to_vec();
        *bad.last_mut().unwrap() ^= 1;
        assert!(!verify(&k.public(), &bad, &sig));
    }

    #[test]
    fn wrong_key_fails() {
        let k1 = keygen(NodeId(1), 7);
        let k2 = keygen(NodeId(2), 7);
        let sig = sign(&k2, b"m");
        assert!(!verify(&k1.public(), b"m", &sig));
        let other_seed = keygen(NodeId(1), 9);
        let sig = sign(&other_seed, b"m");
        assert!(!verify(&k1.public(), b"m", &sig));
    }

    #[test]
    fn malformed_signature_bytes_fail_without_panic() {
        let k = keygen(NodeId(1), 7);
        assert!(!verify(&k.public(), b"m", b""));
        assert!(!verify(&k.public(), b"m", &[0u8; 63]));
        assert!(!verify(&k.public(), b"m", &[0xffu8; 64]));
        assert!(!verify(&k.public(), b"m", &[7u8; 65]));
    }

    #[test]
    fn authenticator_entries_verify_only_at_their_owner() {
        let ring = Keyring::new(4, 11, ProofMode::Authenticator);
        let msg = b"announce";
        let auth = ring.make_authenticator(NodeId(1), msg);
        assert_eq!(auth.entries.len(), 4);
        for j in NodeId::all(4) {
            assert!(ring.verify_authenticator_entry(NodeId(1), j, msg, &auth));
        }
        // Entry 2 presented as if it were node 3's.
        let mut spliced = auth.clone();
        spliced.entries[2] = auth.entries[1];
        assert!(!ring.verify_authenticator_entry(NodeId(1), NodeId(3), msg, &spliced));
    }

    #[test]
    fn tampered_message_fails_every_entry() {
        let ring = Keyring::new(4, 11, ProofMode::Authenticator);
        let auth = ring.make_authenticator(NodeId(1), b"announce");
        for j in NodeId::all(4) {
            assert!(!ring.verify_authenticator_entry(NodeId(1), j, b"announcX", &auth));
        }
    }

    #[test]
    fn endorsements_verify_in_both_modes() {
        for mode in [ProofMode::Signature, ProofMode::Authenticator] {
            let ring = Keyring::new(4, 3, mode);
            let e = ring.endorse(NodeId(2), NodeId(1), &Value::bytes("v"));
            for verifier in NodeId::all(4) {
                assert!(ring.verify_endorsement(verifier, &e));
            }
            // Rebinding the proof to a different value must fail.
            let mut rebound = e.clone();
            rebound.value = Value::bytes("w");
            assert!(!ring.verify_endorsement(NodeId(3), &rebound));
            // Or to a different subject.
            let mut rebound = e.clone();
            rebound.subject = NodeId(3);
            assert!(!ring.verify_endorsement(NodeId(3), &rebound));
            // Or claiming a different endorser.
            let mut rebound = e;
            rebound.endorser = NodeId(4);
            assert!(!ring.verify_endorsement(NodeId(3), &rebound));
        }
    }

    // The modeled adversary holds the corrupted node's keys and a transcript
    // of honest endorsements, and tries to fabricate an endorsement that
    // verifies as an honest node's over a new value.
    #[test]
    fn corrupt_keys_cannot_forge_honest_endorsements() {
        for mode in [ProofMode::Signature, ProofMode::Authenticator] {
            let ring = Keyring::new(4, 5, mode);
            let corrupt = NodeId(4);
            let honest = NodeId(2);
            let observed = ring.endorse(honest, NodeId(1), &Value::bytes("a"));

            // Replay the honest proof over a different value.
            let replay = Endorsement {
                endorser: honest,
                subject: NodeId(1),
                value: Value::bytes("b"),
                proof: observed.proof.clone(),
            };
            assert!(!ring.verify_endorsement(NodeId(3), &replay));

            // Sign with the corrupt key but claim the honest identity.
            let spliced = Endorsement {
                endorser: honest,
                ..ring.endorse(corrupt, NodeId(1), &Value::bytes("b"))
            };
            assert!(!ring.verify_endorsement(NodeId(3), &spliced));
        }
    }
}
