//! Bundled contract programs, shipped as assembly text and parsed once at
//! startup. Scenario files reference these by name; external `.ir` files
//! can extend the library through the scenario loader.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::vm::asm::parse_program;
use crate::vm::Program;

pub const MPC_VOTE: &str = include_str!("../fixtures/mpc_vote.ir");
pub const MPC_AUCTION: &str = include_str!("../fixtures/mpc_auction.ir");
pub const LOCK_C1: &str = include_str!("../fixtures/lock_c1.ir");
pub const LOCK_C2: &str = include_str!("../fixtures/lock_c2.ir");
pub const LOCK_C3: &str = include_str!("../fixtures/lock_c3.ir");
pub const TOKEN: &str = include_str!("../fixtures/token.ir");
pub const DOUBLE_MPC: &str = include_str!("../fixtures/double_mpc.ir");

pub fn bundled_sources() -> Vec<(&'static str, &'static str)> {
    vec![
        ("mpc_vote", MPC_VOTE),
        ("mpc_auction", MPC_AUCTION),
        ("lock_c1", LOCK_C1),
        ("lock_c2", LOCK_C2),
        ("lock_c3", LOCK_C3),
        ("token", TOKEN),
        ("double_mpc", DOUBLE_MPC),
    ]
}

/// The full bundled code library. Panics only if a bundled fixture fails to
/// parse, which the test suite rules out.
pub fn bundled_library() -> BTreeMap<String, Arc<Program>> {
    bundled_sources()
        .into_iter()
        .map(|(name, src)| {
            let program = parse_program(src)
                .unwrap_or_else(|e| panic!("bundled fixture {name} failed to parse: {e}"));
            (name.to_string(), Arc::new(program))
        })
        .collect()
}

/// Storage key of the deposits/balances mapping for an address-keyed map
/// laid out at `2^32 + address`.
pub fn mapping_key(addr: crate::types::Address) -> u64 {
    (1u64 << 32) + addr.0
}
