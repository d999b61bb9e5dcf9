//! Fixed instances shared by the benchmarks.

use sca_kit::ee::EeInstance;
use sca_kit::lasso::{LassoInstance, LassoSetup};
use sca_kit::mimo::MimoBcInstance;

pub fn lasso(n: usize, k: usize) -> LassoInstance {
    LassoSetup::new(n, k).generate(0).expect("valid setup").0
}

pub fn mimo_bc(users: usize, antennas: usize) -> MimoBcInstance {
    MimoBcInstance::random(users, antennas, antennas, 10.0, 0).expect("valid setup")
}

pub fn ee(users: usize) -> EeInstance {
    EeInstance::random(users, 8, 0.01, 0).expect("valid setup")
}
