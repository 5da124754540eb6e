//! Calendar domain: function registry, knowledge base and evaluation
//! semantics for the event-creation vocabulary.

mod kb;

pub use kb::{Event, KbError, KnowledgeBase, FIXTURE_KB};

use chrono::{Datelike, Days, NaiveDate, NaiveTime, Timelike, Weekday};
use thiserror::Error;

use crate::eval::{parse_weekday, Args, Domain, Value};
use crate::registry::{parse_clock, Registry, TypeName};

pub const REGISTRY_JSON: &str = include_str!("../../data/smcal_registry.json");

pub fn registry() -> Registry {
    Registry::from_json(REGISTRY_JSON).expect("embedded calendar registry is valid")
}

/// The fixed "now" used unless overridden.
pub fn default_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 5, 16).unwrap()
}

pub const MINUTES_PER: [(&str, i64); 6] = [
    ("toMinutes", 1),
    ("toHours", 60),
    ("toDays", 1440),
    ("toWeeks", 10080),
    ("toMonths", 43200),
    ("toYears", 525600),
];

/// One conjunct of an event constraint.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Predicate {
    Subject(String),
    Duration(i64),
    StartDate(NaiveDate),
    StartTime(NaiveTime),
    Location(String),
    Attendee(String),
}

impl Predicate {
    pub fn matches(&self, e: &Event) -> bool {
        match self {
            Predicate::Subject(s) => &e.subject == s,
            Predicate::Duration(m) => e.duration_minutes == *m,
            Predicate::StartDate(d) => e.start.date() == *d,
            Predicate::StartTime(t) => e.start.time() == *t,
            Predicate::Location(l) => &e.location == l,
            Predicate::Attendee(p) => e.attendees.iter().any(|a| a == p),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KbLookupError {
    #[error("no match: {0}")]
    NoMatch(String),
    #[error("ambiguous: {0}")]
    Ambiguous(String),
    #[error("bad argument to `{0}`")]
    BadArgument(String),
    #[error("`{0}` is not a knowledge-base function")]
    NotKbFunction(String),
}

/// Indices of events matching every predicate, earliest start first.
pub fn find_events(kb: &KnowledgeBase, preds: &[Predicate]) -> Vec<usize> {
    let mut out: Vec<usize> = (0..kb.events.len())
        .filter(|&i| preds.iter().all(|p| p.matches(&kb.events[i])))
        .collect();
    out.sort_by_key(|&i| (kb.events[i].start, i));
    out
}

/// Relational lookups against the knowledge base.
pub fn kb_eval(function: &str, args: &[Value], kb: &KnowledgeBase) -> Result<Value, KbLookupError> {
    let bad = || KbLookupError::BadArgument(function.to_string());
    match function {
        "FindManager" => {
            let Some(Value::Person(p)) = args.first() else {
                return Err(bad());
            };
            kb.manager(p)
                .map(|m| Value::Person(m.to_string()))
                .ok_or_else(|| KbLookupError::NoMatch(format!("{p} has no manager")))
        }
        "FindFriends" => {
            let Some(Value::Person(p)) = args.first() else {
                return Err(bad());
            };
            let fs = kb.friends(p);
            if fs.is_empty() {
                return Err(KbLookupError::NoMatch(format!("{p} has no friends listed")));
            }
            Ok(Value::List(fs.iter().map(|f| Value::Person(f.clone())).collect()))
        }
        "FindEvents" => {
            let Some(Value::Constraints(preds)) = args.first() else {
                return Err(bad());
            };
            let hits = find_events(kb, preds);
            if hits.is_empty() {
                return Err(KbLookupError::NoMatch("no matching event".into()));
            }
            Ok(Value::List(hits.into_iter().map(Value::Event).collect()))
        }
        "singleton" => match args.first() {
            Some(Value::List(xs)) if xs.len() == 1 => Ok(xs[0].clone()),
            Some(Value::List(xs)) if xs.is_empty() => Err(KbLookupError::NoMatch("empty set".into())),
            Some(Value::List(xs)) => Err(KbLookupError::Ambiguous(format!("{} elements", xs.len()))),
            _ => Err(bad()),
        },
        other => Err(KbLookupError::NotKbFunction(other.to_string())),
    }
}

/// Next date on or after `from` falling on `w`.
pub fn on_or_after(from: NaiveDate, w: Weekday) -> NaiveDate {
    let delta = (7 + w.num_days_from_monday() as i64 - from.weekday().num_days_from_monday() as i64) % 7;
    from + Days::new(delta as u64)
}

/// Next date strictly after `from` falling on `w`.
pub fn strictly_after(from: NaiveDate, w: Weekday) -> NaiveDate {
    on_or_after(from + Days::new(1), w)
}

/// Evaluation context: knowledge base plus the injected current date.
#[derive(Clone, Debug)]
pub struct CalendarDomain<'a> {
    pub kb: &'a KnowledgeBase,
    pub epoch: NaiveDate,
}

impl<'a> CalendarDomain<'a> {
    pub fn new(kb: &'a KnowledgeBase, epoch: NaiveDate) -> Self {
        CalendarDomain { kb, epoch }
    }

    fn first_event(&self, v: &Value) -> Result<usize, String> {
        match v {
            Value::Event(i) => Ok(*i),
            Value::List(xs) => match xs.first() {
                Some(Value::Event(i)) => Ok(*i),
                _ => Err("expected an event".into()),
            },
            _ => Err("expected an event".into()),
        }
    }
}

impl Domain for CalendarDomain<'_> {
    fn literal(&self, ty: &TypeName, text: &str) -> Result<Value, String> {
        let weekday_date = |t: &str| parse_weekday(t).map(|w| Value::Date(on_or_after(self.epoch, w)));
        let clock = |t: &str| {
            parse_clock(t).map(|(h, m)| Value::Time(NaiveTime::from_hms_opt(h, m, 0).unwrap()))
        };
        let v = match ty.as_str() {
            "Person" => Some(Value::Person(text.to_string())),
            "Location" => Some(Value::Location(text.to_string())),
            "Int" => text.parse().ok().map(Value::Int),
            "Date" => weekday_date(text),
            "Time" => clock(text),
            "DateTimeSpec" => weekday_date(text).or_else(|| clock(text)),
            "DayOfWeek" => parse_weekday(text).map(Value::Weekday),
            _ => Some(Value::Text(text.to_string())),
        };
        v.ok_or_else(|| format!("`{text}` is not a {ty} literal"))
    }

    fn call(&self, function: &str, args: &Args) -> Result<Value, String> {
        let arg = || args.first().ok_or_else(|| format!("`{function}` needs an argument"));
        let pred = |p: Predicate| Ok(Value::Constraints(vec![p]));
        let int = |v: &Value| match v {
            Value::Int(n) => Ok(*n),
            _ => Err("expected a number".to_string()),
        };
        if let Some((_, per)) = MINUTES_PER.iter().find(|(n, _)| *n == function) {
            return Ok(Value::Duration(int(arg()?)? * per));
        }
        match function {
            "CreateEvent" => match arg()? {
                Value::Constraints(c) => Ok(Value::Constraints(c.clone())),
                _ => Err("expected a constraint".into()),
            },
            "AND" => {
                let mut all = Vec::new();
                for v in args.all("arg") {
                    match v {
                        Value::Constraints(c) => all.extend(c.iter().cloned()),
                        _ => return Err("AND expects constraints".into()),
                    }
                }
                Ok(Value::Constraints(all))
            }
            "with_attendee" => match arg()? {
                Value::Person(p) => pred(Predicate::Attendee(p.clone())),
                _ => Err("expected a person".into()),
            },
            "has_duration" => match arg()? {
                Value::Duration(m) => pred(Predicate::Duration(*m)),
                _ => Err("expected a duration".into()),
            },
            "has_subject" => match arg()? {
                Value::Text(s) => pred(Predicate::Subject(s.clone())),
                _ => Err("expected a subject".into()),
            },
            "at_location" => match arg()? {
                Value::Location(l) => pred(Predicate::Location(l.clone())),
                _ => Err("expected a location".into()),
            },
            "starts_at" => match arg()? {
                Value::Date(d) => pred(Predicate::StartDate(*d)),
                Value::Time(t) => pred(Predicate::StartTime(*t)),
                _ => Err("expected a date or time".into()),
            },
            "Today" => Ok(Value::Date(self.epoch)),
            "Yesterday" => Ok(Value::Date(self.epoch - Days::new(1))),
            "NextWeekend" => Ok(Value::Date(strictly_after(self.epoch, Weekday::Sat))),
            "NextDOW" => match arg()? {
                Value::Weekday(w) => Ok(Value::Date(strictly_after(self.epoch, *w))),
                _ => Err("expected a weekday".into()),
            },
            "AddDays" => match (args.get("date"), args.get("days")) {
                (Some(Value::Date(d)), Some(Value::Int(k))) => {
                    let moved = if *k >= 0 {
                        d.checked_add_days(Days::new(*k as u64))
                    } else {
                        d.checked_sub_days(Days::new(k.unsigned_abs()))
                    };
                    moved.map(Value::Date).ok_or_else(|| "date out of range".into())
                }
                _ => Err("AddDays expects a date and a number".into()),
            },
            "NumberAM" => match arg()? {
                Value::Time(t) => Ok(Value::Time(
                    NaiveTime::from_hms_opt(t.hour() % 12, t.minute(), 0).unwrap(),
                )),
                _ => Err("expected a time".into()),
            },
            "GetTemperature" => match arg()? {
                Value::Location(l) => {
                    let h = l.bytes().fold(0i64, |acc, b| (acc * 31 + b as i64) % 1000);
                    Ok(Value::Temperature(h % 35))
                }
                _ => Err("expected a location".into()),
            },
            ":location" => Ok(Value::Location(self.kb.events[self.first_event(arg()?)?].location.clone())),
            ":start" => Ok(Value::DateTime(self.kb.events[self.first_event(arg()?)?].start)),
            ":attendees" => Ok(Value::List(
                self.kb.events[self.first_event(arg()?)?]
                    .attendees
                    .iter()
                    .map(|a| Value::Person(a.clone()))
                    .collect(),
            )),
            ":dow" => match arg()? {
                Value::DateTime(t) => Ok(Value::Weekday(t.weekday())),
                _ => Err("expected a date-time".into()),
            },
            ":time" => match arg()? {
                Value::DateTime(t) => Ok(Value::Time(t.time())),
                _ => Err("expected a date-time".into()),
            },
            ":recipient" => match arg()? {
                Value::List(xs) if xs.len() == 1 => Ok(xs[0].clone()),
                Value::List(xs) if xs.is_empty() => Err("no attendees".into()),
                Value::List(_) => Err("ambiguous: several attendees".into()),
                _ => Err("expected attendees".into()),
            },
            "FindManager" | "FindFriends" | "FindEvents" | "singleton" => {
                let vals: Vec<Value> = args.first().cloned().into_iter().collect();
                kb_eval(function, &vals, self.kb).map_err(|e| e.to_string())
            }
            other => Err(format!("no semantics for `{other}`")),
        }
    }

    fn admits(&self, ty: &TypeName, v: &Value) -> bool {
        let all = |xs: &[Value], f: fn(&Value) -> bool| xs.iter().all(f);
        match ty.as_str() {
            "Person" => matches!(v, Value::Person(_)),
            "PersonSet" | "Attendees" => {
                matches!(v, Value::List(xs) if all(xs, |x| matches!(x, Value::Person(_))))
            }
            "Location" => matches!(v, Value::Location(_)),
            "Subject" | "Str" => matches!(v, Value::Text(_)),
            "Int" => matches!(v, Value::Int(_)),
            "Date" => matches!(v, Value::Date(_)),
            "Time" => matches!(v, Value::Time(_)),
            "DateTimeSpec" => matches!(v, Value::Date(_) | Value::Time(_)),
            "DateTime" => matches!(v, Value::DateTime(_)),
            "DayOfWeek" => matches!(v, Value::Weekday(_)),
            "Duration" => matches!(v, Value::Duration(_)),
            "Event" => match v {
                Value::Event(_) => true,
                Value::List(xs) => !xs.is_empty() && all(xs, |x| matches!(x, Value::Event(_))),
                _ => false,
            },
            "EventConstraint" | "EventCreation" => matches!(v, Value::Constraints(_)),
            "Temperature" => matches!(v, Value::Temperature(_)),
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::evaluate;
    use crate::parse::parse_expression;

    fn eval_text(text: &str, kb: &KnowledgeBase) -> Result<Value, String> {
        let reg = registry();
        let mut g = parse_expression(text, &reg).map_err(|e| e.to_string())?;
        evaluate(&mut g, &reg, &CalendarDomain::new(kb, default_epoch())).map_err(|e| e.reason())
    }

    #[test]
    fn epoch_is_a_thursday() {
        assert_eq!(default_epoch().weekday(), Weekday::Thu);
    }

    #[test]
    fn duration_constructor() {
        let kb = KnowledgeBase::fixture();
        assert_eq!(eval_text("toMinutes( 25 )", &kb), Ok(Value::Duration(25)));
        assert_eq!(eval_text("toWeeks( 1 )", &kb), Ok(Value::Duration(10080)));
    }

    #[test]
    fn find_manager_lookup() {
        let kb = KnowledgeBase::fixture();
        assert_eq!(
            eval_text("FindManager( recipient=Dan )", &kb),
            Ok(Value::Person("Erin".into()))
        );
        assert_eq!(
            kb_eval("FindManager", &[Value::Person("Dan".into())], &kb),
            Ok(Value::Person("Erin".into()))
        );
        assert!(matches!(
            kb_eval("FindManager", &[Value::Person("Erin".into())], &kb),
            Err(KbLookupError::NoMatch(_))
        ));
    }

    #[test]
    fn find_friends_empty_is_an_error() {
        let mut kb = KnowledgeBase::fixture();
        kb.friends_of.remove("Adam");
        assert!(eval_text("FindFriends( Adam )", &kb).is_err());
    }

    #[test]
    fn singleton_ambiguity() {
        let kb = KnowledgeBase::fixture();
        let two = Value::List(vec![Value::Person("a".into()), Value::Person("b".into())]);
        assert!(matches!(kb_eval("singleton", &[two], &kb), Err(KbLookupError::Ambiguous(_))));
        assert_eq!(
            eval_text("singleton( FindFriends( Jill ) )", &kb),
            Ok(Value::Person("John".into()))
        );
    }

    #[test]
    fn find_events_matches_brute_force_filter() {
        let kb = KnowledgeBase::fixture();
        let got = eval_text("FindEvents( AND( has_subject( meeting ) , starts_at( Today( ) ) ) )", &kb).unwrap();
        // Oracle: direct scan of the fixture list.
        let expected: Vec<usize> = kb
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.subject == "meeting" && e.start.date() == default_epoch())
            .map(|(i, _)| i)
            .collect();
        assert_eq!(expected.len(), 1);
        assert_eq!(got, Value::List(vec![Value::Event(expected[0])]));
    }

    #[test]
    fn weekday_helpers() {
        let thu = default_epoch();
        assert_eq!(on_or_after(thu, Weekday::Thu), thu);
        assert_eq!(strictly_after(thu, Weekday::Thu), thu + Days::new(7));
        assert_eq!(strictly_after(thu, Weekday::Sat), thu + Days::new(2));
    }
}
