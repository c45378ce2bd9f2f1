//! The five-job, 100-node / 100 TB example used throughout the tests.

use crate::model::{Job, SystemConfig};

/// Gigabytes per terabyte.
pub const TB: u64 = 1024;

pub fn example_config() -> SystemConfig {
    SystemConfig::new(100, 100 * TB)
}

/// J1..J5 all submitted at t=0. Runtimes are arbitrary but fixed so the
/// simulated timeline can be traced by hand.
pub fn example_window() -> Vec<Job> {
    [
        ("J1", 80, 20, 3600),
        ("J2", 10, 85, 3600),
        ("J3", 40, 5, 7200),
        ("J4", 10, 0, 1800),
        ("J5", 20, 0, 5400),
    ]
    .into_iter()
    .map(|(id, nodes, bb_tb, runtime)| Job::new(id, 0, nodes, runtime).with_bb(bb_tb * TB))
    .collect()
}
