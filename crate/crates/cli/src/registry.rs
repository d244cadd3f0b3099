//! Named configurations shipped with the binary.
//!
//! Each one is also a file under `configs/`, so `szego run --config` on the
//! file and a sweep member naming it behave identically.

use std::path::Path;

use crate::config::{Config, ConfigResult};

pub const NAMED: &[(&str, &str)] = &[
    ("criterion-01-lax-identity", include_str!("../configs/criterion-01-lax-identity.toml")),
    ("criterion-02-isospectrality", include_str!("../configs/criterion-02-isospectrality.toml")),
    ("criterion-03-rank-one-orbit", include_str!("../configs/criterion-03-rank-one-orbit.toml")),
    ("criterion-04-oscillation-law", include_str!("../configs/criterion-04-oscillation-law.toml")),
    ("criterion-05-hs-growth", include_str!("../configs/criterion-05-hs-growth.toml")),
    ("criterion-06-sharp-inequality", include_str!("../configs/criterion-06-sharp-inequality.toml")),
    ("criterion-07-hierarchy", include_str!("../configs/criterion-07-hierarchy.toml")),
    ("criterion-08-traveling-waves", include_str!("../configs/criterion-08-traveling-waves.toml")),
    ("criterion-09-kronecker", include_str!("../configs/criterion-09-kronecker.toml")),
    ("criterion-10-genericity", include_str!("../configs/criterion-10-genericity.toml")),
    ("criterion-11-torus-stability", include_str!("../configs/criterion-11-torus-stability.toml")),
    ("acceptance", include_str!("../configs/acceptance.toml")),
];

pub fn named(name: &str) -> Option<&'static str> {
    NAMED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// A registry name, or else a path relative to `base_dir`.
pub fn resolve(name: &str, base_dir: &Path) -> ConfigResult<Config> {
    match named(name) {
        Some(text) => Config::parse(text, &format!("{name}.toml"), base_dir),
        None => Config::load(&base_dir.join(name)),
    }
}
