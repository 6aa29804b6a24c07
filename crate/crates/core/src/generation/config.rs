use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::GenError;
use crate::timestamp::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenMode {
    #[default]
    Tdgg,
    Idgg,
}

/// How TDGG picks each round's active sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSelection {
    /// Replay the sources of the ground-truth continuation, S per round.
    #[default]
    ReplayGroundTruth,
    /// Uniform sample over source-capable nodes.
    Uniform,
}

/// How timestamps are shown to (and read back from) language models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeCodec {
    /// The dataset's own numbers.
    #[default]
    Numeric,
    /// Unix seconds shown as `yyyy-mm-dd`.
    EpochSecondsDate,
    /// Unix seconds shown as `yyyy-mm-dd hh-mm-ss`.
    EpochSecondsDateTime,
    /// Days since 1970-01-01 shown as `yyyy-mm-dd`.
    EpochDaysDate,
}

impl TimeCodec {
    pub fn render(self, t: Timestamp) -> String {
        let secs = match self {
            TimeCodec::Numeric => return t.to_string(),
            TimeCodec::EpochSecondsDate | TimeCodec::EpochSecondsDateTime => t.as_f64().floor() as i64,
            TimeCodec::EpochDaysDate => (t.as_f64().floor() as i64).saturating_mul(86_400),
        };
        match DateTime::from_timestamp(secs, 0) {
            Some(dt) if self == TimeCodec::EpochSecondsDateTime => dt.format("%Y-%m-%d %H-%M-%S").to_string(),
            Some(dt) => dt.format("%Y-%m-%d").to_string(),
            None => t.to_string(),
        }
    }

    /// Parse model output back into the representation of `like`.
    pub fn parse(self, raw: &str, like: Timestamp) -> Option<Timestamp> {
        let s = raw.trim();
        let numeric = Timestamp::parse(s).map(|t| Timestamp::like(like, t.as_f64()));
        if self == TimeCodec::Numeric {
            return numeric;
        }
        let secs = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H-%M-%S")
            .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
            .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S"))
            .map(|dt| dt.and_utc().timestamp())
            .or_else(|_| {
                NaiveDate::parse_from_str(s, "%Y-%m-%d").map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp())
            })
            .ok();
        match (secs, self) {
            (Some(s), TimeCodec::EpochDaysDate) => Some(Timestamp::like(like, s.div_euclid(86_400) as f64)),
            (Some(s), _) => Some(Timestamp::like(like, s as f64)),
            (None, _) => numeric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Number of rounds K.
    pub rounds: usize,
    /// Edges per round S.
    pub edges_per_round: usize,
    pub seed_edges: usize,
    pub recall_k: usize,
    pub walks: usize,
    pub walk_len: usize,
    pub memory_cap_chars: usize,
    pub reflection: bool,
    /// When false, agents see no interaction memory.
    pub use_memory: bool,
    pub mode: GenMode,
    pub r_src: Option<usize>,
    pub r_dst: Option<usize>,
    pub rng_seed: u64,
    pub source_selection: SourceSelection,
    /// Extra attempts when a policy fails or picks outside the recall list.
    pub max_policy_retries: usize,
    /// Agent interactions run concurrently within a round.
    pub parallelism: usize,
    pub time_format: TimeCodec,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            rounds: 20,
            edges_per_round: 50,
            seed_edges: 1000,
            recall_k: 10,
            walks: 10,
            walk_len: 10,
            memory_cap_chars: 1000,
            reflection: false,
            use_memory: true,
            mode: GenMode::Tdgg,
            r_src: None,
            r_dst: None,
            rng_seed: 0,
            source_selection: SourceSelection::ReplayGroundTruth,
            max_policy_retries: 3,
            parallelism: 4,
            time_format: TimeCodec::Numeric,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let positive = [
            ("edges_per_round", self.edges_per_round),
            ("recall_k", self.recall_k),
            ("walks", self.walks),
            ("walk_len", self.walk_len),
            ("memory_cap_chars", self.memory_cap_chars),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(GenError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if matches!(self.r_src, Some(0)) || matches!(self.r_dst, Some(0)) {
            return Err(GenError::InvalidConfig("r_src and r_dst must be at least 1".into()));
        }
        Ok(())
    }

    /// K · S.
    pub fn target_new_edges(&self) -> usize {
        self.rounds * self.edges_per_round
    }
}
