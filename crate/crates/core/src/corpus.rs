//! Litmus and lock-client programs shipped with the crate.

use crate::ir::{parse_program, ConcurrentProgram};

macro_rules! corpus {
    ($($name:literal),* $(,)?) => {
        /// `(name, source)` for every bundled program.
        pub const CORPUS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../corpus/", $name, ".lit")))),*
        ];
    };
}

corpus!(
    "sb",
    "mp",
    "2rmw",
    "sb_rmws",
    "rloop",
    "spinloop",
    "wwrloop",
    "hb_acyclic",
    "spinlock_client",
    "spinlock_client3",
    "ticketlock_client",
    "mcs_client",
    "mcs_client_nofence",
);

pub fn source(name: &str) -> Option<&'static str> {
    CORPUS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parse the bundled program `name`.
pub fn load(name: &str) -> Option<ConcurrentProgram> {
    source(name).map(|src| parse_program(src).expect("bundled programs parse"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_program_parses() {
        for (name, _) in CORPUS {
            parse_program(source(name).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
