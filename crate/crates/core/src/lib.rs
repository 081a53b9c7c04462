//! Deterministic single-process simulator for a blockchain whose virtual
//! machine can suspend a transaction at a secure-multiparty-computation
//! invocation, run the committee protocol over simulated parties, and
//! resume the transaction with the attested result — while a contract-level
//! access policy keeps concurrent regular transactions sequentially
//! consistent.
//!
//! The crate is organised bottom-up:
//!
//! - [`field`], [`commit`], [`sss`]: prime-field arithmetic, homomorphic
//!   commitments, and verifiable Shamir secret sharing.
//! - [`circuit`]: arithmetic circuits and the registered-circuit catalog.
//! - [`engine`]: the per-party MPC executor (re-share multiplication,
//!   masked-opening comparison, dispute handling, fault injection).
//! - [`vm`], [`txmgr`], [`ledger`]: the contract VM with suspend/resume,
//!   the built-in MPC transaction manager, and the block state machine.
//! - [`netsim`]: the discrete-event loop tying parties and chain together.
//! - [`scenario`], [`report`], [`audit`], [`fixtures`]: declarative runs,
//!   deterministic reports, serializability auditing, bundled contracts.

pub mod audit;
pub mod circuit;
pub mod commit;
pub mod engine;
pub mod field;
pub mod fixtures;
pub mod ledger;
pub mod netsim;
pub mod report;
pub mod scenario;
pub mod sss;
pub mod txmgr;
pub mod types;
pub mod vm;

pub use field::{Field, FieldElement};
pub use types::{Address, TxHash};
