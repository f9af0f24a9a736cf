//! Holds the `acceptance` test target, kept in its own package so it runs
//! after every other test binary in the workspace.
//!
//! `cargo test -p d2dprice-validation --test acceptance`
