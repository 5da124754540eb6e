#![allow(dead_code)]

/// Four published calendar compositions, as (expression, rendering). The
/// expressions are transcribed with the original typesetting escapes
/// (`\_`, `\ `) so the parser's escape handling is exercised too.
pub const CALENDAR_EXAMPLES: [(&str, &str); 4] = [
    (
        r"CreateEvent(AND(has\_duration(toMinutes(25)), at\_location(:location(FindEvents(AND(at\_location(:location(FindEvents(AND( with\_attendee(Dan) , with\_attendee(John))))), starts\_at(NextWeekend( ))))))))",
        "create an event lasting 25 minutes at the location of the event next weekend at the location of the event with Dan and John",
    ),
    (
        r"CreateEvent( starts\_at( NextDOW( :dow( :start( FindEvents( AND( with\_attendee( singleton( FindFriends( Adam ) ) ) , has\_duration( toWeeks( 3 ) ) , has\_subject( get together ) ) ) ) ) ) ) )",
        "create an event the day of starting of the get together lasting 3 weeks with the friend of Adam",
    ),
    (
        r"CreateEvent( AND( with\_attendee( FindManager( :recipient( :attendees( FindEvents( AND( has\_duration( toYears( 3 ) ) , starts\_at( NextWeekend( ) ) , has\_subject( meeting ) ) ) ) ) ) ) , has\_duration( toWeeks( 1 ) ) ) )",
        "create an event lasting 1 week with the manager of the person who attended the meeting lasting 3 years next weekend",
    ),
    (
        r"CreateEvent( AND( at\_location( :location( FindEvents( AND( starts\_at( NumberAM( :time( :start( FindEvents( AND( has\_duration( toWeeks( 1 ) ) , starts\_at( Today( ) ) ) ) ) ) ) ) , has\_duration( toMonths( 2 ) ) ) ) ) ) , has\_subject( get \ together ) ) )",
        "create a get together at the location of the event lasting 2 months at the time of starting of the event lasting 1 week today",
    ),
];

use dfgen::serialize::escape_terminal;
use rand::seq::SliceRandom;
use rand::Rng;

const PERSONS: [&str; 5] = ["Dan", "John", "Adam", "Jill", "Erin"];
const SUBJECTS: [&str; 4] = ["meeting", "get together", "lunch (team)", "a=b, c"];
const LOCATIONS: [&str; 3] = ["Room 101", "Cafe Nero", "Hall \\ B"];
const WEEKDAYS: [&str; 7] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];
const UNITS: [&str; 6] = ["toMinutes", "toHours", "toDays", "toWeeks", "toMonths", "toYears"];

fn leaf<R: Rng>(rng: &mut R, pool: &[&str]) -> String {
    escape_terminal(pool.choose(rng).unwrap())
}

fn clock<R: Rng>(rng: &mut R) -> String {
    format!("{:02}:{:02}", rng.gen_range(0..24), [0, 15, 30, 45].choose(rng).unwrap())
}

fn call(f: &str, args: &[String]) -> String {
    if args.is_empty() {
        format!("{f}( )")
    } else {
        format!("{f}( {} )", args.join(" , "))
    }
}

/// Random well-typed calendar expression of type `ty`; `depth` bounds the
/// nesting of non-literal alternatives.
pub fn calendar_expr<R: Rng>(rng: &mut R, ty: &str, depth: u32) -> String {
    let deeper = depth > 0 && rng.gen_bool(0.5);
    let d = depth.saturating_sub(1);
    match ty {
        "Person" if deeper => match rng.gen_range(0..3) {
            0 => call("FindManager", &[calendar_expr(rng, "Person", d)]),
            1 => call("singleton", &[call("FindFriends", &[calendar_expr(rng, "Person", d)])]),
            _ => call(":recipient", &[call(":attendees", &[calendar_expr(rng, "Event", d)])]),
        },
        "Person" => leaf(rng, &PERSONS),
        "Event" => call("FindEvents", &[calendar_expr(rng, "EventConstraint", d)]),
        "Location" if deeper => call(":location", &[calendar_expr(rng, "Event", d)]),
        "Location" => leaf(rng, &LOCATIONS),
        "Date" if deeper => match rng.gen_range(0..5) {
            0 => call("Today", &[]),
            1 => call("Yesterday", &[]),
            2 => call("NextWeekend", &[]),
            3 => call("NextDOW", &[calendar_expr(rng, "DayOfWeek", d)]),
            _ => call("AddDays", &[calendar_expr(rng, "Date", d), rng.gen_range(-3..10).to_string()]),
        },
        "Date" | "DayOfWeek" if !deeper => leaf(rng, &WEEKDAYS),
        "DayOfWeek" => call(":dow", &[call(":start", &[calendar_expr(rng, "Event", d)])]),
        "Time" if deeper => match rng.gen_range(0..2) {
            0 => call("NumberAM", &[calendar_expr(rng, "Time", d)]),
            _ => call(":time", &[call(":start", &[calendar_expr(rng, "Event", d)])]),
        },
        "Time" => clock(rng),
        "DateTimeSpec" => {
            let t = if rng.gen_bool(0.5) { "Date" } else { "Time" };
            calendar_expr(rng, t, depth)
        }
        "Duration" => call(UNITS.choose(rng).unwrap(), &[rng.gen_range(1..60).to_string()]),
        "EventConstraint" => {
            let k = if depth > 0 { rng.gen_range(0..6) } else { rng.gen_range(0..5) };
            match k {
                0 => call("with_attendee", &[calendar_expr(rng, "Person", depth)]),
                1 => call("has_duration", &[calendar_expr(rng, "Duration", depth)]),
                2 => call("has_subject", &[leaf(rng, &SUBJECTS)]),
                3 => call("starts_at", &[calendar_expr(rng, "DateTimeSpec", depth)]),
                4 => call("at_location", &[calendar_expr(rng, "Location", depth)]),
                _ => {
                    let n = rng.gen_range(2..=3);
                    let parts: Vec<String> = (0..n).map(|_| calendar_expr(rng, "EventConstraint", d)).collect();
                    call("AND", &parts)
                }
            }
        }
        "EventCreation" => call("CreateEvent", &[calendar_expr(rng, "EventConstraint", depth)]),
        other => panic!("no generator for {other}"),
    }
}

/// A random `CreateEvent` request.
pub fn calendar_request(seed: u64, depth: u32) -> String {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    calendar_expr(&mut rng, "EventCreation", depth)
}
