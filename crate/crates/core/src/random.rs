//! Seeded generators for randomized test suites.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hardy::{FourierSymbol, C64};

pub type SuiteRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SuiteRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex number with both parts uniform in `[-scale, scale]`.
pub fn random_complex<R: Rng>(rng: &mut R, scale: f64) -> C64 {
    C64::new(rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale))
}

/// Point uniformly distributed in the disc of radius `radius`.
pub fn random_in_disc<R: Rng>(rng: &mut R, radius: f64) -> C64 {
    let r = radius * rng.gen::<f64>().sqrt();
    C64::from_polar(r, rng.gen_range(0.0..2.0 * PI))
}

pub fn random_symbol<R: Rng>(rng: &mut R, cutoff: usize, scale: f64) -> FourierSymbol {
    FourierSymbol::new((0..cutoff).map(|_| random_complex(rng, scale)).collect())
        .expect("finite by construction")
}

/// Polynomial of exact degree `degree` (leading coefficient bounded away from 0).
pub fn random_polynomial<R: Rng>(rng: &mut R, degree: usize, scale: f64) -> FourierSymbol {
    let mut coeffs: Vec<C64> = (0..=degree).map(|_| random_complex(rng, scale)).collect();
    let lead = C64::from_polar(scale * rng.gen_range(0.5..=1.0), rng.gen_range(0.0..2.0 * PI));
    coeffs[degree] = lead;
    FourierSymbol::new(coeffs).expect("finite by construction")
}

/// `n` points in the disc of radius `max_modulus` with pairwise distance at
/// least `min_separation`, by rejection sampling.
pub fn random_poles<R: Rng>(rng: &mut R, n: usize, max_modulus: f64, min_separation: f64) -> Vec<C64> {
    let mut poles: Vec<C64> = Vec::with_capacity(n);
    while poles.len() < n {
        let p = random_in_disc(rng, max_modulus);
        if poles.iter().all(|q| (p - q).norm() >= min_separation) {
            poles.push(p);
        }
    }
    poles
}

/// Residues with moduli in `[0.2, 1]` and uniform phases.
pub fn random_residues<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::from_polar(rng.gen_range(0.2..=1.0), rng.gen_range(0.0..2.0 * PI))).collect()
}
