use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PersonaError {
    #[error("malformed persona: {0}")]
    Format(String),
    #[error("`{0}` must lie in [0, 1]")]
    Probability(&'static str),
    #[error("max_slots_per_turn must be at least 1")]
    MaxSlots,
}

/// Behaviour knobs for the simulated user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Persona {
    pub p_multi_slot: f64,
    pub max_slots_per_turn: usize,
    pub p_mistake: f64,
    pub p_refer: f64,
    pub p_ignore_agent: f64,
    pub p_early_end: f64,
}

impl Default for Persona {
    fn default() -> Self {
        Persona {
            p_multi_slot: 0.3,
            max_slots_per_turn: 2,
            p_mistake: 0.1,
            p_refer: 0.3,
            p_ignore_agent: 0.2,
            p_early_end: 0.02,
        }
    }
}

impl Persona {
    /// Never deviates: one slot per turn, no mistakes, references, ignored
    /// questions or early exits.
    pub fn degenerate() -> Self {
        Persona {
            p_multi_slot: 0.0,
            max_slots_per_turn: 1,
            p_mistake: 0.0,
            p_refer: 0.0,
            p_ignore_agent: 0.0,
            p_early_end: 0.0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PersonaError> {
        let p: Persona = serde_json::from_str(text).map_err(|e| PersonaError::Format(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PersonaError> {
        let probs = [
            ("p_multi_slot", self.p_multi_slot),
            ("p_mistake", self.p_mistake),
            ("p_refer", self.p_refer),
            ("p_ignore_agent", self.p_ignore_agent),
            ("p_early_end", self.p_early_end),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(PersonaError::Probability(name));
            }
        }
        if self.max_slots_per_turn == 0 {
            return Err(PersonaError::MaxSlots);
        }
        Ok(())
    }
}
