use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of tickets in every non-genesis block.
pub const TICKETS_PER_BLOCK: u8 = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamsError {
    #[error("tickets_per_block must be 3, got {0}")]
    TicketsPerBlock(u8),
    #[error("lottery_range must be in 1..=255, got {0}")]
    LotteryRange(u16),
    #[error("exclusion_window must be at least 1, got {0}")]
    ExclusionWindow(u64),
}

impl ParamsError {
    /// Name of the offending config field.
    pub fn field(&self) -> &'static str {
        match self {
            ParamsError::TicketsPerBlock(_) => "tickets_per_block",
            ParamsError::LotteryRange(_) => "lottery_range",
            ParamsError::ExclusionWindow(_) => "exclusion_window",
        }
    }
}

/// Constants read by every consensus rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    #[serde(default = "default_tickets_per_block")]
    pub tickets_per_block: u8,
    /// R: a ticket byte `m` wins when `1 <= m <= R`.
    pub lottery_range: u16,
    /// l: an account may be included at most once per `l` consecutive blocks.
    pub exclusion_window: u64,
    /// Whether a hanging chain may fall back to `R = 255, score = m`.
    #[serde(default = "default_true")]
    pub hanging_fallback_enabled: bool,
    #[serde(default)]
    pub block_reward: u64,
}

fn default_tickets_per_block() -> u8 {
    TICKETS_PER_BLOCK
}

fn default_true() -> bool {
    true
}

impl ProtocolParams {
    pub fn new(lottery_range: u16, exclusion_window: u64) -> Self {
        ProtocolParams {
            tickets_per_block: TICKETS_PER_BLOCK,
            lottery_range,
            exclusion_window,
            hanging_fallback_enabled: true,
            block_reward: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.tickets_per_block != TICKETS_PER_BLOCK {
            return Err(ParamsError::TicketsPerBlock(self.tickets_per_block));
        }
        if !(1..=255).contains(&self.lottery_range) {
            return Err(ParamsError::LotteryRange(self.lottery_range));
        }
        if self.exclusion_window < 1 {
            return Err(ParamsError::ExclusionWindow(self.exclusion_window));
        }
        Ok(())
    }
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams::new(16, 10)
    }
}
