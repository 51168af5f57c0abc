#![allow(dead_code)]

use std::collections::BTreeMap;

use sqlog_core::ast::Value;
use sqlog_core::backend::{Backend, SqliteConnector};
use sqlog_core::directives::{ConnectionSpec, DirectiveSet};
use sqlog_core::engine::{Collect, Engine, EvaluationResult, RunOptions};
use sqlog_core::parser::parse_program;

pub const FLIGHTS_PROGRAM: &str = "\
destinations(FromX, ToY, Comp) :- flight(Id, FromX, ToY, Comp).
destinations(FromX, ToY, Comp) :- flight(Id, FromX, ToY, C2), codeshare(C2, Comp, Id).
destinations(FromX, ToY, Comp) :- destinations(FromX, T2, Comp), destinations(T2, ToY, Comp).
";

pub const FLIGHTS_DIRECTIVES: &str = "\
USEDB dlvdb:myname:mypasswd.
USE flight_rel (Id, FromX, ToY, Company) FROM dbAirports:airportUser:airportPasswd
MAPTO flight (integer, varchar(255), varchar(255), varchar(255)).
USE codeshare_rel (Company1, Company2, FlightId) FROM dbCommercial:commUser:commPasswd
MAPTO codeshare (varchar(255), varchar(255), integer).
CREATE destinations_rel (FromX, ToY, Company)
MAPTO destinations (varchar(255), varchar(255), varchar(255)) KEEP_AFTER_EXECUTION.
OUTPUT  destinations AS composedCompanyRoutes IN dbTravelAgency:agencyName:agencyPasswd.
";

pub const FLIGHTS: [(i64, &str, &str, &str); 5] = [
    (1, "rome", "paris", "AZ"),
    (2, "paris", "london", "AF"),
    (3, "london", "newyork", "BA"),
    (4, "paris", "berlin", "AF"),
    (5, "newyork", "boston", "BA"),
];

pub const CODESHARES: [(&str, &str, i64); 2] = [("AZ", "AF", 1), ("AF", "BA", 2)];

/// Creates the two external databases of the flights example, filled with
/// the toy instance unless `empty`.
pub fn flight_databases(connector: &SqliteConnector, empty: bool) {
    let airports = connector.sqlite(&ConnectionSpec::local("dbAirports")).unwrap();
    airports
        .execute("CREATE TABLE flight_rel (Id INTEGER, FromX VARCHAR(255), ToY VARCHAR(255), Company VARCHAR(255))")
        .unwrap();
    let commercial = connector.sqlite(&ConnectionSpec::local("dbCommercial")).unwrap();
    commercial
        .execute("CREATE TABLE codeshare_rel (Company1 VARCHAR(255), Company2 VARCHAR(255), FlightId INTEGER)")
        .unwrap();
    if empty {
        return;
    }
    for (id, from, to, c) in FLIGHTS {
        airports
            .execute(&format!("INSERT INTO flight_rel VALUES ({id}, '{from}', '{to}', '{c}')"))
            .unwrap();
    }
    for (c1, c2, id) in CODESHARES {
        commercial
            .execute(&format!("INSERT INTO codeshare_rel VALUES ('{c1}', '{c2}', {id})"))
            .unwrap();
    }
}

/// The toy instance as program facts, for the oracle.
pub fn flight_facts() -> String {
    let mut s = String::new();
    for (id, from, to, c) in FLIGHTS {
        s.push_str(&format!("flight({id}, \"{from}\", \"{to}\", \"{c}\").\n"));
    }
    for (c1, c2, id) in CODESHARES {
        s.push_str(&format!("codeshare(\"{c1}\", \"{c2}\", {id}).\n"));
    }
    s
}

pub fn working() -> DirectiveSet {
    DirectiveSet::working(ConnectionSpec::local("work"))
}

/// Runs `text` in a fresh in-memory database with the given options,
/// collecting every derived predicate.
pub fn run_with(text: &str, options: RunOptions) -> EvaluationResult {
    let program = parse_program(text).unwrap_or_else(|d| panic!("{d:?}\n{text}"));
    let connector = SqliteConnector::in_memory();
    let options = RunOptions {
        collect: Collect::Derived,
        ..options
    };
    Engine::new(&connector)
        .run(&program, &working(), &options)
        .unwrap_or_else(|e| panic!("{e}\n{text}"))
}

pub fn run(text: &str) -> EvaluationResult {
    run_with(
        text,
        RunOptions {
            verify: true,
            ..Default::default()
        },
    )
}

/// The oracle's extension of every predicate the engine reported.
pub fn oracle_for(text: &str, engine: &EvaluationResult) -> BTreeMap<String, Vec<Vec<Value>>> {
    let program = parse_program(text).unwrap();
    let model = sqlog_oracle::evaluate(&program).unwrap_or_else(|e| panic!("{e}\n{text}"));
    engine
        .relations
        .keys()
        .map(|p| {
            let rows = model.get(p).map(|r| r.iter().cloned().collect()).unwrap_or_default();
            (p.clone(), rows)
        })
        .collect()
}

/// Asserts that the engine and the oracle agree on every derived predicate.
pub fn assert_matches_oracle(text: &str) -> EvaluationResult {
    let result = run(text);
    let expected = oracle_for(text, &result);
    assert!(!result.relations.is_empty() || expected.is_empty());
    for (p, rows) in &result.relations {
        assert_eq!(rows, &expected[p], "predicate `{p}` differs from the oracle\n{text}");
    }
    result
}

pub fn int_rows(rows: &[Vec<Value>]) -> Vec<Vec<i64>> {
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|v| match v {
                    Value::Int(n) => *n,
                    Value::Str(s) => panic!("string {s} in an integer relation"),
                })
                .collect()
        })
        .collect()
}
