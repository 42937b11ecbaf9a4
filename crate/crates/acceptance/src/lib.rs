//! End-to-end acceptance checks for the workspace. Everything lives in
//! `tests/acceptance.rs`; run it with `cargo test -p workspace-acceptance`.
