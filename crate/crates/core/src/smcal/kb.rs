//! The calendar knowledge base: people, reporting lines, friendships and
//! scheduled events.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub subject: String,
    pub start: NaiveDateTime,
    pub duration_minutes: i64,
    pub location: String,
    pub attendees: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub persons: Vec<String>,
    #[serde(default)]
    pub manager_of: BTreeMap<String, String>,
    #[serde(default)]
    pub friends_of: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub events: Vec<Event>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KbError {
    #[error("malformed knowledge base: {0}")]
    Format(String),
    #[error("unknown person `{0}`")]
    UnknownPerson(String),
    #[error("`{0}` is their own manager")]
    SelfManager(String),
    #[error("management cycle through `{0}`")]
    ManagerCycle(String),
}

pub const FIXTURE_KB: &str = include_str!("../../data/kb.json");

impl KnowledgeBase {
    pub fn from_json(text: &str) -> Result<Self, KbError> {
        let kb: KnowledgeBase =
            serde_json::from_str(text).map_err(|e| KbError::Format(e.to_string()))?;
        kb.validate()?;
        Ok(kb)
    }

    pub fn fixture() -> Self {
        Self::from_json(FIXTURE_KB).expect("embedded knowledge base is valid")
    }

    pub fn validate(&self) -> Result<(), KbError> {
        let persons: BTreeSet<&str> = self.persons.iter().map(String::as_str).collect();
        let known = |p: &str| {
            if persons.contains(p) {
                Ok(())
            } else {
                Err(KbError::UnknownPerson(p.to_string()))
            }
        };
        for (p, m) in &self.manager_of {
            known(p)?;
            known(m)?;
            if p == m {
                return Err(KbError::SelfManager(p.clone()));
            }
        }
        for start in self.manager_of.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = Some(start);
            while let Some(p) = cur {
                if !seen.insert(p) {
                    return Err(KbError::ManagerCycle(start.clone()));
                }
                cur = self.manager_of.get(p);
            }
        }
        for (p, fs) in &self.friends_of {
            known(p)?;
            for f in fs {
                known(f)?;
            }
        }
        for e in &self.events {
            for a in &e.attendees {
                known(a)?;
            }
        }
        Ok(())
    }

    pub fn manager(&self, person: &str) -> Option<&str> {
        self.manager_of.get(person).map(String::as_str)
    }

    pub fn friends(&self, person: &str) -> &[String] {
        self.friends_of.get(person).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Everyone `person` manages, in name order.
    pub fn reports(&self, person: &str) -> Vec<&str> {
        self.manager_of
            .iter()
            .filter(|(_, m)| m.as_str() == person)
            .map(|(p, _)| p.as_str())
            .collect()
    }

    /// Distinct event locations in first-seen order.
    pub fn locations(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.events {
            if !out.contains(&e.location.as_str()) {
                out.push(&e.location);
            }
        }
        out
    }

    pub fn subjects(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.events {
            if !out.contains(&e.subject.as_str()) {
                out.push(&e.subject);
            }
        }
        out
    }
}
