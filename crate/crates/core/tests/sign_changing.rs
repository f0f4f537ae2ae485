//! Sign-changing data: Newton iterates must not get stuck at nodes where W crosses zero.

use fracpme::evolution::{evolve, EvolutionConfig};
use fracpme::fractional::HalfLaplacian;
use fracpme::resolvent::SolverSettings;
use fracpme::{Field, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_signed_data_converge_for_all_exponents() {
    let g = GridSpec::new(1, 10.0, 128).unwrap();
    let op = HalfLaplacian::spectral_default(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    for m in [0.7, 1.5, 2.0, 3.0] {
        for trial in 0..60 {
            let bumps: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| (rng.gen_range(-3.3..3.3), rng.gen_range(0.3..1.5), rng.gen_range(-1.0..1.0)))
                .collect();
            let f = Field::from_fn(g, |x| {
                bumps.iter().map(|(c, s, a)| a * (-(x[0] - c).powi(2) / (2.0 * s * s)).exp()).sum()
            })
            .unwrap();
            let cfg = EvolutionConfig::new(m, 0.4, 8).with_solver(SolverSettings::default().with_tol(1e-10));
            if let Err(e) = evolve(&f, &cfg, &op) {
                panic!("m = {m}, trial {trial}: {e}");
            }
        }
    }
}
