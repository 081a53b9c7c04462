//! Verifiable Shamir secret sharing: dealing, per-share verification,
//! robust reconstruction, and dispute evidence.
//!
//! A dealing binds each party's share pair `(value, randomness)` to a public
//! commitment, so receivers can verify what they were sent and third parties
//! can judge opened values. Shares always travel together with their
//! randomness share; there is no separate randomness channel.

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::commit::{Commitment, CommitmentParams};
use crate::field::{lagrange_interpolate, Field, FieldElement, FieldError, Polynomial};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SssError {
    #[error("party count {n} below 3t+1 for threshold {t}")]
    PartyCountTooSmall { n: usize, t: usize },
    #[error("only {valid} shares verified, need {needed}")]
    InsufficientValidShares { valid: usize, needed: usize },
    #[error("dispute references party {0} outside the commitment list")]
    UnknownCommitmentReference(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// One party's point on the dealer's `(f_value, f_randomness)` pair.
/// `party_index` is 1-based; index 0 is the secret itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    pub party_index: usize,
    pub value: FieldElement,
    pub randomness: FieldElement,
}

/// Everything a dealer emits when sharing one secret: per-party shares and
/// the matching public commitments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dealing {
    pub shares: Vec<Share>,
    pub commitments: Vec<Commitment>,
    pub threshold: usize,
    pub party_count: usize,
}

/// Shares a secret among `n` parties with reconstruction threshold `t + 1`.
/// Deterministic in the rng seed.
pub fn deal(
    field: &Field,
    params: &CommitmentParams,
    secret: FieldElement,
    t: usize,
    n: usize,
    rng: &mut impl RngCore,
) -> Result<Dealing, SssError> {
    if n < 3 * t + 1 {
        return Err(SssError::PartyCountTooSmall { n, t });
    }
    let r = field.random(rng);
    let f_value = Polynomial::random_with_secret(field, secret, t, rng);
    let f_rand = Polynomial::random_with_secret(field, r, t, rng);
    let mut shares = Vec::with_capacity(n);
    let mut commitments = Vec::with_capacity(n);
    for i in 1..=n {
        let x = field.elem(i as u64);
        let value = f_value.eval(field, x);
        let randomness = f_rand.eval(field, x);
        shares.push(Share { party_index: i, value, randomness });
        commitments.push(params.commit(value, randomness));
    }
    Ok(Dealing { shares, commitments, threshold: t, party_count: n })
}

/// True iff the share opens the commitment published for its index.
pub fn verify_share(params: &CommitmentParams, commitments: &[Commitment], share: &Share) -> bool {
    match commitments.get(share.party_index.checked_sub(1).unwrap_or(usize::MAX)) {
        Some(c) => params.verify_opening(*c, share.value, share.randomness),
        None => false,
    }
}

/// A per-party commitment vector is well formed when it interpolates as a
/// degree-`t` commitment polynomial: the first `t + 1` entries determine
/// every other one. This is a public check — every observer reaches the
/// same verdict from broadcast data alone.
pub fn commitments_degree_consistent(
    field: &Field,
    params: &CommitmentParams,
    commitments: &[Commitment],
    t: usize,
) -> bool {
    if commitments.len() <= t + 1 {
        return !commitments.is_empty();
    }
    let base: Vec<(FieldElement, Commitment)> =
        commitments.iter().take(t + 1).enumerate().map(|(i, c)| (field.elem(i as u64 + 1), *c)).collect();
    for (j, expected) in commitments.iter().enumerate().skip(t + 1) {
        let at = field.elem(j as u64 + 1);
        match params.interpolate(field, &base, at) {
            Ok(c) if c == *expected => {}
            _ => return false,
        }
    }
    true
}

/// Discards shares that fail commitment verification, then interpolates the
/// rest at zero. Errors when fewer than `t + 1` shares survive.
pub fn reconstruct(
    field: &Field,
    params: &CommitmentParams,
    shares: &[Share],
    commitments: &[Commitment],
    t: usize,
) -> Result<FieldElement, SssError> {
    let valid: Vec<&Share> =
        shares.iter().filter(|s| verify_share(params, commitments, s)).collect();
    if valid.len() < t + 1 {
        return Err(SssError::InsufficientValidShares { valid: valid.len(), needed: t + 1 });
    }
    let points: Vec<(FieldElement, FieldElement)> =
        valid.iter().take(t + 1).map(|s| (field.elem(s.party_index as u64), s.value)).collect();
    Ok(lagrange_interpolate(field, &points, FieldElement::ZERO)?)
}

/// Outcome of judging a dispute against published commitments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisputeOutcome {
    /// The opening matches the commitment; the opened values stand.
    Valid,
    /// Mismatch or no response: the accused party is excluded.
    Cheater,
}

/// Evidence for one dispute: which share was challenged and what, if
/// anything, the accused revealed. `opened: None` is the explicit
/// non-response marker the simulator produces after the timeout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisputeRecord {
    pub accused_party: usize,
    pub disputed_index: usize,
    pub disputing_party: usize,
    pub opened: Option<(FieldElement, FieldElement)>,
}

/// Judges a dispute: VALID iff the accused opened values matching the
/// referenced commitment.
pub fn open_dispute(
    params: &CommitmentParams,
    record: &DisputeRecord,
    commitments: &[Commitment],
) -> Result<DisputeOutcome, SssError> {
    let c = commitments
        .get(record.disputed_index.checked_sub(1).unwrap_or(usize::MAX))
        .ok_or(SssError::UnknownCommitmentReference(record.disputed_index))?;
    match record.opened {
        Some((m, r)) if params.verify_opening(*c, m, r) => Ok(DisputeOutcome::Valid),
        _ => Ok(DisputeOutcome::Cheater),
    }
}
