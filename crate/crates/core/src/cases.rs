//! IEEE test cases bundled with the crate (MATPOWER distribution files) and
//! a two-bus toy network.

use crate::error::Result;
use crate::matpower::{parse_case, GridCase};

pub const CASE14: &str = include_str!("../cases/case14.m");
pub const CASE30: &str = include_str!("../cases/case30.m");
pub const CASE118: &str = include_str!("../cases/case118.m");
/// Two buses joined by one branch with x = 1.0 pu; bus 2 is the slack.
pub const TOY2: &str = include_str!("../cases/toy2.m");

pub const BUNDLED: [&str; 4] = ["toy2", "case14", "case30", "case118"];

/// Source text of a bundled case by name.
pub fn source(name: &str) -> Option<&'static str> {
    match name {
        "case14" => Some(CASE14),
        "case30" => Some(CASE30),
        "case118" => Some(CASE118),
        "toy2" => Some(TOY2),
        _ => None,
    }
}

/// Parse a bundled case by name. Panics on an unknown name.
pub fn load(name: &str) -> Result<GridCase> {
    let text = source(name).unwrap_or_else(|| panic!("no bundled case named `{name}`"));
    parse_case(text)
}
