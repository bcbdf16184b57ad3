use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::he::{
    Ciphertext, Commitment, HeError, JointPublicKey, MockThresholdHe, ThresholdScheme,
};
use super::RegulationError;
use crate::framework::Quality;
use crate::rational::{int, Rational};

/// One buyer's round feedback: `1` for high, `-1` for low, `0` elsewhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct FeedbackVector(Vec<i8>);

impl FeedbackVector {
    pub fn zeros(n_sellers: usize) -> Self {
        Self(vec![0; n_sellers])
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The purchase the vector reports, if any.
    pub fn purchase(&self) -> Option<(usize, Quality)> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, &x)| x != 0)
            .map(|(s, &x)| (s, if x > 0 { Quality::High } else { Quality::Low }))
    }

    pub fn from_plaintexts(values: &[Rational]) -> Result<Self, RegulationError> {
        let entries = values
            .iter()
            .map(|v| {
                v.is_integer()
                    .then(|| v.to_integer().to_i8())
                    .flatten()
                    .ok_or_else(|| {
                        RegulationError::InvalidFeedback(format!(
                            "entry {v} is not in {{-1, 0, 1}}"
                        ))
                    })
            })
            .collect::<Result<Vec<i8>, _>>()?;
        Self::try_from(entries)
    }

    pub fn encrypt(
        &self,
        he: &mut MockThresholdHe,
        key: &JointPublicKey,
    ) -> Result<Vec<Ciphertext>, HeError> {
        self.0
            .iter()
            .map(|&x| he.encrypt(key, &int(x as i64)))
            .collect()
    }
}

impl TryFrom<Vec<i8>> for FeedbackVector {
    type Error = RegulationError;

    fn try_from(entries: Vec<i8>) -> Result<Self, Self::Error> {
        if entries.iter().any(|x| !(-1..=1).contains(x)) {
            return Err(RegulationError::InvalidFeedback(
                "entries must lie in {-1, 0, 1}".into(),
            ));
        }
        if entries.iter().filter(|&&x| x != 0).count() > 1 {
            return Err(RegulationError::InvalidFeedback(
                "at most one purchase per round".into(),
            ));
        }
        Ok(Self(entries))
    }
}

impl From<FeedbackVector> for Vec<i8> {
    fn from(v: FeedbackVector) -> Self {
        v.0
    }
}

pub fn encode_feedback(
    purchase: Option<(usize, Quality)>,
    n_sellers: usize,
) -> Result<FeedbackVector, RegulationError> {
    let mut v = vec![0i8; n_sellers];
    if let Some((s, quality)) = purchase {
        let slot = v.get_mut(s).ok_or(RegulationError::UnknownSeller(s))?;
        *slot = match quality {
            Quality::High => 1,
            Quality::Low => -1,
        };
    }
    Ok(FeedbackVector(v))
}

/// One encrypted copy of a buyer's feedback with its commitment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submission {
    pub ciphertexts: Vec<Ciphertext>,
    pub commitment: Commitment,
}

impl Submission {
    pub fn seal(
        he: &mut MockThresholdHe,
        key: &JointPublicKey,
        vector: &FeedbackVector,
        binding: &[u8],
    ) -> Result<Self, HeError> {
        let ciphertexts = vector.encrypt(he, key)?;
        let commitment = he.commit(&ciphertexts, binding)?;
        Ok(Self {
            ciphertexts,
            commitment,
        })
    }
}

/// Accepts iff both copies are present, each opens to its commitment and
/// the commitments agree.
pub fn consistency_check(
    he: &MockThresholdHe,
    binding: &[u8],
    mpc_copy: Option<&Submission>,
    monitor_copy: Option<&Submission>,
) -> Result<bool, RegulationError> {
    let (Some(mpc), Some(monitor)) = (mpc_copy, monitor_copy) else {
        return Err(RegulationError::MissingSubmission);
    };
    if mpc.ciphertexts.len() != monitor.ciphertexts.len() {
        return Ok(false);
    }
    Ok(mpc.commitment == monitor.commitment
        && he.verify_commitment(&mpc.ciphertexts, binding, &mpc.commitment)?
        && he.verify_commitment(&monitor.ciphertexts, binding, &monitor.commitment)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    #[test]
    fn encoding_examples() {
        assert_eq!(
            encode_feedback(Some((1, Quality::High)), 3)
                .unwrap()
                .entries(),
            &[0, 1, 0]
        );
        assert_eq!(
            encode_feedback(Some((0, Quality::Low)), 3)
                .unwrap()
                .entries(),
            &[-1, 0, 0]
        );
        assert_eq!(encode_feedback(None, 3).unwrap().entries(), &[0, 0, 0]);
        assert!(encode_feedback(Some((3, Quality::Low)), 3).is_err());
        assert!(FeedbackVector::try_from(vec![1, -1, 0]).is_err());
        assert!(FeedbackVector::try_from(vec![2, 0, 0]).is_err());
    }

    #[test]
    fn purchase_round_trip() {
        for p in [None, Some((2, Quality::High)), Some((0, Quality::Low))] {
            assert_eq!(encode_feedback(p, 3).unwrap().purchase(), p);
        }
    }

    fn copies(mpc: &[i8], monitor: &[i8]) -> (MockThresholdHe, Submission, Submission) {
        let mut he = MockThresholdHe::new(&mut SimRng::new(9));
        let joint = he.keygen(&[0, 1, 2]).unwrap();
        let personal = he.personal_key(0);
        let a = FeedbackVector::try_from(mpc.to_vec()).unwrap();
        let b = FeedbackVector::try_from(monitor.to_vec()).unwrap();
        let sa = Submission::seal(&mut he, &joint.joint_public_key, &a, b"b0/1").unwrap();
        let sb = Submission::seal(&mut he, &personal.joint_public_key, &b, b"b0/1").unwrap();
        (he, sa, sb)
    }

    #[test]
    fn consistency_examples() {
        let (he, a, b) = copies(&[1, 0, 0], &[1, 0, 0]);
        assert!(consistency_check(&he, b"b0/1", Some(&a), Some(&b)).unwrap());
        let (he, a, b) = copies(&[1, 0, 0], &[-1, 0, 0]);
        assert!(!consistency_check(&he, b"b0/1", Some(&a), Some(&b)).unwrap());
        let (he, a, mut b) = copies(&[1, 0, 0], &[1, 0, 0]);
        b.commitment.0[5] ^= 0x80;
        assert!(!consistency_check(&he, b"b0/1", Some(&a), Some(&b)).unwrap());
        assert!(consistency_check(&he, b"b0/1", Some(&a), None).is_err());
    }
}
