//! Acceptance checks for `cchr-core` live in `tests/acceptance.rs`:
//!
//! ```text
//! cargo test --release -p cchr-validation --test acceptance
//! ```
//!
//! Set `CCHR_CRITERIA=1,2,7` to run a subset and `CCHR_FULL=1` for the
//! full 100-start optimiser in the Monte Carlo criteria.
