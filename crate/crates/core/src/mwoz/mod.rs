//! Restaurant-booking domain: registry, fixture database, shipped agendas,
//! slot alternatives for simulated mistakes, and the rule-based agent.

mod agent;

pub use agent::{agent_respond, AgentReply, DialogueState, GREETING};

use std::collections::BTreeSet;

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::DfError;
use crate::eval::{parse_weekday, Args, Domain, Value};
use crate::graph::DataflowGraph;
use crate::mapping::TablePolicy;
use crate::parse::parse_expression;
use crate::registry::{parse_clock, Registry, TypeName, WEEKDAYS};

pub const REGISTRY_JSON: &str = include_str!("../../data/mwoz_registry.json");
pub const RESTAURANTS_JSON: &str = include_str!("../../data/restaurants.json");
pub const AGENDAS_TXT: &str = include_str!("../../data/agendas.txt");

pub const CONVERSATION: &str = "MwozConversation";
pub const TASK: &str = "FindRestaurant";
pub const BOOK_INFO: &str = "RestaurantBookInfo";
pub const RESTAURANT_INFO: &str = "RestaurantInfo";
pub const BOOKING: &str = "Booking";

/// Searchable columns, in the order the agent lists them.
pub const CONSTRAINT_FIELDS: [&str; 4] = ["name", "food", "area", "pricerange"];
pub const FIELDS: [&str; 6] = ["name", "address", "phone", "food", "area", "pricerange"];
pub const AREAS: [&str; 5] = ["centre", "north", "south", "east", "west"];
pub const PRICE_RANGES: [&str; 3] = ["cheap", "moderate", "expensive"];
/// The agent asks for missing booking details in this order.
pub const BOOKING_ORDER: [&str; 3] = ["people", "day", "time"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MwozError {
    #[error("unknown restaurant field `{0}`")]
    UnknownField(String),
    #[error("no alternatives known for slot `{0}`")]
    UnknownSlot(String),
    #[error("malformed restaurant database: {0}")]
    Db(String),
    #[error("agenda line {line}: {source}")]
    Agenda { line: usize, source: DfError },
    #[error("nothing earlier in the dialogue matches refer( {0} )")]
    ReferTargetAbsent(String),
    #[error("no `{0}` task in the conversation")]
    NoTask(String),
    #[error("cannot execute `{0}`")]
    Unsupported(String),
    #[error(transparent)]
    Graph(#[from] DfError),
}

pub fn registry() -> Registry {
    Registry::from_json(REGISTRY_JSON).expect("embedded restaurant registry is valid")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestaurantRow {
    pub name: String,
    pub address: String,
    pub phone: String,
    pub food: String,
    pub area: String,
    pub pricerange: String,
}

impl RestaurantRow {
    pub fn field(&self, field: &str) -> Option<&str> {
        Some(match field {
            "name" => &self.name,
            "address" => &self.address,
            "phone" => &self.phone,
            "food" => &self.food,
            "area" => &self.area,
            "pricerange" => &self.pricerange,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestaurantDb {
    rows: Vec<RestaurantRow>,
}

impl RestaurantDb {
    pub fn new(rows: Vec<RestaurantRow>) -> Result<Self, MwozError> {
        let mut names = BTreeSet::new();
        for r in &rows {
            if !names.insert(r.name.as_str()) {
                return Err(MwozError::Db(format!("duplicate name `{}`", r.name)));
            }
            if !AREAS.contains(&r.area.as_str()) {
                return Err(MwozError::Db(format!("`{}` has unknown area `{}`", r.name, r.area)));
            }
            if !PRICE_RANGES.contains(&r.pricerange.as_str()) {
                return Err(MwozError::Db(format!(
                    "`{}` has unknown price range `{}`",
                    r.name, r.pricerange
                )));
            }
        }
        Ok(RestaurantDb { rows })
    }

    pub fn from_json(text: &str) -> Result<Self, MwozError> {
        let rows: Vec<RestaurantRow> = serde_json::from_str(text).map_err(|e| MwozError::Db(e.to_string()))?;
        Self::new(rows)
    }

    pub fn fixture() -> Self {
        Self::from_json(RESTAURANTS_JSON).expect("embedded restaurant database is valid")
    }

    pub fn rows(&self) -> &[RestaurantRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<&RestaurantRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Distinct values of a column, in first-seen order.
    pub fn values(&self, field: &str) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if let Some(v) = r.field(field) {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

/// Exact-match filter over every constrained field.
pub fn db_query<'a, S: AsRef<str>>(
    constraints: &[(S, S)],
    db: &'a RestaurantDb,
) -> Result<Vec<&'a RestaurantRow>, MwozError> {
    for (f, _) in constraints {
        if !FIELDS.contains(&f.as_ref()) {
            return Err(MwozError::UnknownField(f.as_ref().to_string()));
        }
    }
    Ok(db
        .rows
        .iter()
        .filter(|r| constraints.iter().all(|(f, v)| r.field(f.as_ref()) == Some(v.as_ref())))
        .collect())
}

/// Legal values for `slot` other than `target`.
pub fn alternatives(slot: &str, target: &str, db: &RestaurantDb) -> Result<Vec<String>, MwozError> {
    let all: Vec<String> = match slot {
        "time" => (20..=44)
            .map(|half_hours: u32| format!("{:02}:{:02}", half_hours / 2, (half_hours % 2) * 30))
            .collect(),
        "day" => WEEKDAYS.iter().map(|d| d.to_string()).collect(),
        "people" => (1..=8).map(|n: u32| n.to_string()).collect(),
        "area" => AREAS.iter().map(|a| a.to_string()).collect(),
        "pricerange" => PRICE_RANGES.iter().map(|p| p.to_string()).collect(),
        "name" | "food" => db.values(slot).into_iter().map(str::to_string).collect(),
        other => return Err(MwozError::UnknownSlot(other.to_string())),
    };
    Ok(all.into_iter().filter(|v| v != target).collect())
}

/// Parses an agenda file: one expression per line; blank lines and lines
/// starting with `#` are skipped.
pub fn load_agendas(text: &str, reg: &Registry) -> Result<Vec<DataflowGraph>, MwozError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| parse_expression(l, reg).map_err(|source| MwozError::Agenda { line: i + 1, source }))
        .collect()
}

pub fn fixture_agendas(reg: &Registry) -> Vec<DataflowGraph> {
    load_agendas(AGENDAS_TXT, reg).expect("embedded agendas parse")
}

/// Which nodes the simulated user may extend, and which carry agent-found
/// information the user can ask about.
pub fn extension_policy() -> TablePolicy {
    TablePolicy::new([TASK, BOOK_INFO, "FindHotel", "FindTrain"], [TASK])
}

/// Evaluation semantics for standalone expressions: searches return the
/// matching rows, constructors return records. Dialogue-level operations
/// (`revise`, `refer`, `GetInfo`) need history and go through
/// [`DialogueState::apply`] instead.
pub struct RestaurantDomain<'a> {
    pub db: &'a RestaurantDb,
}

impl Domain for RestaurantDomain<'_> {
    fn literal(&self, ty: &TypeName, text: &str) -> Result<Value, String> {
        let bad = || format!("`{text}` is not a {ty} literal");
        match ty.as_str() {
            "Count" => text.parse().map(Value::Int).map_err(|_| bad()),
            "Time" => parse_clock(text)
                .map(|(h, m)| Value::Time(NaiveTime::from_hms_opt(h, m, 0).unwrap()))
                .ok_or_else(bad),
            "BookDay" | "DayOfWeek" => parse_weekday(text).map(Value::Weekday).ok_or_else(bad),
            _ => Ok(Value::Text(text.to_string())),
        }
    }

    fn call(&self, function: &str, args: &Args) -> Result<Value, String> {
        let record = |args: &Args, names: &[&str]| {
            Value::Record(
                names
                    .iter()
                    .filter_map(|n| args.get(n).map(|v| (n.to_string(), v.to_string())))
                    .collect(),
            )
        };
        match function {
            TASK => {
                let mut cons = Vec::new();
                for f in CONSTRAINT_FIELDS {
                    if let Some(v) = args.get(f) {
                        cons.push((f.to_string(), v.to_string()));
                    }
                }
                let rows = db_query(&cons, self.db).map_err(|e| e.to_string())?;
                Ok(Value::List(
                    rows.into_iter()
                        .map(|r| Value::Record(FIELDS.iter().map(|f| (f.to_string(), r.field(f).unwrap().to_string())).collect()))
                        .collect(),
                ))
            }
            CONVERSATION => Ok(args.first().cloned().unwrap_or(Value::Unit)),
            BOOK_INFO => Ok(record(args, &["day", "time", "people"])),
            RESTAURANT_INFO => Ok(record(args, &FIELDS)),
            BOOKING => Ok(record(args, &["day", "time", "people", "confirmed", "reference"])),
            "FindHotel" | "FindTrain" => Ok(Value::List(Vec::new())),
            other => Err(format!("`{other}` needs dialogue context")),
        }
    }
}
