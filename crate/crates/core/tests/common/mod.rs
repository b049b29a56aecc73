// oracles spell out every index on purpose
#![allow(dead_code, clippy::needless_range_loop)]

pub mod oracle;
