//! Holds the workspace acceptance test target; see `tests/acceptance.rs`.
