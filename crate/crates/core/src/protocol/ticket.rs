use serde::Serialize;

use crate::crypto::{self, Digest32, KeyPair, PublicKey, Signature, SIGNATURE_LEN};

use super::params::ProtocolParams;

/// Length of the signed part of a ticket.
pub const TICKET_SIGNED_LEN: usize = 1 + 8 + 32 + 32;
/// Signed part plus the 64-byte signature.
pub const TICKET_WIRE_LEN: usize = TICKET_SIGNED_LEN + SIGNATURE_LEN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(into = "u8")]
pub enum TicketType {
    One = 1,
    Two = 2,
    Three = 3,
}

impl TicketType {
    pub const ALL: [TicketType; 3] = [TicketType::One, TicketType::Two, TicketType::Three];

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(TicketType::One),
            2 => Some(TicketType::Two),
            3 => Some(TicketType::Three),
            _ => None,
        }
    }

    /// Position of this type's lottery byte within `digest(seed || pk)`.
    pub fn byte_index(self) -> usize {
        self as usize - 1
    }

    /// How many blocks below the target height the source seed sits.
    ///
    /// Ticket1 draws from the seed at `h - 3`, Ticket2 from `h - 2`,
    /// Ticket3 from `h - 1`.
    pub fn seed_offset(self) -> u64 {
        4 - self as u64
    }
}

impl From<TicketType> for u8 {
    fn from(t: TicketType) -> u8 {
        t as u8
    }
}

/// How ticket bytes are turned into scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// `m * log2(balance)` when `1 <= m <= R`, else 0.
    Normal,
    /// Hanging fallback: `R = 255` and the score is `m` itself.
    Fallback,
}

/// The three lottery bytes an account draws from one seed.
pub fn derive_ticket_bytes(source_seed: &Digest32, public_key: &PublicKey) -> [u8; 3] {
    let d = crypto::digest_concat(&[source_seed.as_bytes(), public_key.as_bytes()]);
    [d.0[0], d.0[1], d.0[2]]
}

pub fn ticket_score(m: u8, balance: u64, params: &ProtocolParams, mode: ScoreMode) -> f64 {
    match mode {
        ScoreMode::Normal => {
            if m == 0 || u16::from(m) > params.lottery_range || balance < 2 {
                0.0
            } else {
                f64::from(m) * (balance as f64).log2()
            }
        }
        ScoreMode::Fallback => f64::from(m),
    }
}

/// Same as [`ticket_score`] with `log2(balance)` already computed.
///
/// `log2_balance` must be 0 for balances below 2.
#[inline]
pub(crate) fn score_with_log(m: u8, log2_balance: f64, lottery_range: u16, mode: ScoreMode) -> f64 {
    match mode {
        ScoreMode::Normal => {
            if m == 0 || u16::from(m) > lottery_range {
                0.0
            } else {
                f64::from(m) * log2_balance
            }
        }
        ScoreMode::Fallback => f64::from(m),
    }
}

pub(crate) fn log2_balance(balance: u64) -> f64 {
    if balance < 2 {
        0.0
    } else {
        (balance as f64).log2()
    }
}

/// A signed lottery win for one block slot.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ticket {
    pub ticket_type: TicketType,
    pub target_height: u64,
    pub source_seed: Digest32,
    pub public_key: PublicKey,
    pub lottery_byte: u8,
    pub score: f64,
    #[serde(skip)]
    pub signature: Signature,
}

/// `type(1) || target_height(8, BE) || source_seed(32) || public_key(32)`.
pub fn ticket_signed_bytes(
    ticket_type: TicketType,
    target_height: u64,
    source_seed: &Digest32,
    public_key: &PublicKey,
) -> [u8; TICKET_SIGNED_LEN] {
    let mut out = [0u8; TICKET_SIGNED_LEN];
    out[0] = ticket_type as u8;
    out[1..9].copy_from_slice(&target_height.to_be_bytes());
    out[9..41].copy_from_slice(source_seed.as_bytes());
    out[41..73].copy_from_slice(public_key.as_bytes());
    out
}

impl Ticket {
    /// Builds and signs a ticket. Returns `None` when the score is zero.
    pub fn issue(
        key: &KeyPair,
        balance: u64,
        ticket_type: TicketType,
        target_height: u64,
        source_seed: Digest32,
        params: &ProtocolParams,
        mode: ScoreMode,
    ) -> Option<Ticket> {
        let public_key = key.public_key();
        let m = derive_ticket_bytes(&source_seed, &public_key)[ticket_type.byte_index()];
        let score = ticket_score(m, balance, params, mode);
        if score <= 0.0 {
            return None;
        }
        let signature = key.sign(&ticket_signed_bytes(ticket_type, target_height, &source_seed, &public_key));
        Some(Ticket { ticket_type, target_height, source_seed, public_key, lottery_byte: m, score, signature })
    }

    pub fn signed_bytes(&self) -> [u8; TICKET_SIGNED_LEN] {
        ticket_signed_bytes(self.ticket_type, self.target_height, &self.source_seed, &self.public_key)
    }

    /// Signed bytes followed by the signature: 137 bytes.
    pub fn to_bytes(&self) -> [u8; TICKET_WIRE_LEN] {
        let mut out = [0u8; TICKET_WIRE_LEN];
        out[..TICKET_SIGNED_LEN].copy_from_slice(&self.signed_bytes());
        out[TICKET_SIGNED_LEN..].copy_from_slice(self.signature.as_bytes());
        out
    }

    pub fn verify_signature(&self) -> bool {
        crypto::verify(&self.public_key, &self.signed_bytes(), &self.signature)
    }
}
