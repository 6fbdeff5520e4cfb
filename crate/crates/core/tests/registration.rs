use std::time::Instant;

use morphoscope::phantom::{ellipsoid_image, random_smooth_field, PhantomGenerator, PhantomSpec};
use morphoscope::register::{lncc, register, register_masked, RegistrationConfig};
use morphoscope::svf::{self, exp, Svf};
use morphoscope::volume::{warp, Grid3, ScalarVolume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mean_endpoint_error(a: &Svf, b: &Svf, mask: &[bool]) -> f64 {
    let pa = exp(a).unwrap();
    let pb = exp(b).unwrap();
    let mut total = 0.0;
    let mut n = 0;
    for i in 0..mask.len() {
        if mask[i] {
            let (p, q) = (pa.vectors[i], pb.vectors[i]);
            total += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
            n += 1;
        }
    }
    total / n as f64
}

fn phantom(n: usize) -> PhantomGenerator {
    PhantomGenerator::new(PhantomSpec { dims: [n; 3], seed: 3, ..Default::default() })
}

#[test]
fn independent_noise_has_low_similarity() {
    let g = Grid3::cube(32);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = ScalarVolume::from_fn(g.clone(), |_| rng.random::<f64>());
        let b = ScalarVolume::from_fn(g.clone(), |_| rng.random::<f64>());
        let s = lncc(&a, &b, 9).unwrap();
        assert!(s < 0.2, "seed {seed}: {s}");
    }
}

#[test]
fn recovers_synthetic_warp() {
    let gen = phantom(64);
    let fixed = &gen.base.image;
    let truth = Svf::new(random_smooth_field(&fixed.grid, 17, 2.0, 8.0)).unwrap();
    let moving = warp(fixed, &svf::inverse_deformation(&truth).unwrap()).unwrap();
    let start = Instant::now();
    let res = register(fixed, &moving, &RegistrationConfig::default()).unwrap();
    let mask = gen.base.labels.foreground();
    let err = mean_endpoint_error(&res.svf, &truth, &mask);
    println!("recovery: mean endpoint error {err:.4} in {:.1?}, levels {:?}", start.elapsed(), res.energy_trace.iter().map(Vec::len).collect::<Vec<_>>());
    assert!(err < 0.5, "{err}");
    assert!(res.min_jacobian > 0.0);
    for level in &res.energy_trace {
        assert!(level.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn identity_pair_on_phantom() {
    let gen = phantom(32);
    let res = register(&gen.base.image, &gen.base.image, &RegistrationConfig::default()).unwrap();
    assert!(res.svf.max_norm() < 0.05);
}

#[test]
fn ellipsoid_size_change_is_aligned() {
    let g = Grid3::cube(48);
    let semi = [14.4, 12.0, 9.6];
    let fixed = ellipsoid_image(&g, semi, 0.5);
    let moving = ellipsoid_image(&g, semi.map(|s| 1.1 * s), 0.55);
    let res = register(&fixed, &moving, &RegistrationConfig::default()).unwrap();
    let warped = warp(&moving, &exp(&res.svf).unwrap()).unwrap();
    let s = lncc(&fixed, &warped, 9).unwrap();
    println!("ellipsoid pair lncc {s:.4} (before {:.4})", lncc(&fixed, &moving, 9).unwrap());
    assert!(s > 0.95, "{s}");
}

#[test]
fn intensity_affine_invariance() {
    let gen = phantom(32);
    let fixed = &gen.base.image;
    let truth = Svf::new(random_smooth_field(&fixed.grid, 5, 1.5, 5.0)).unwrap();
    let moving = warp(fixed, &svf::inverse_deformation(&truth).unwrap()).unwrap();
    let scaled = ScalarVolume { grid: moving.grid.clone(), values: moving.values.iter().map(|v| 2.0 * v + 0.1).collect() };
    let cfg = RegistrationConfig::default();
    let a = register(fixed, &moving, &cfg).unwrap().svf;
    let b = register(fixed, &scaled, &cfg).unwrap().svf;
    let diff: f64 = a
        .vectors()
        .iter()
        .zip(b.vectors())
        .map(|(p, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
        .sum::<f64>()
        / a.vectors().len() as f64;
    assert!(diff < 0.1, "{diff}");
}

#[test]
fn mask_restricts_similarity() {
    let gen = phantom(32);
    let mask = vec![false; gen.base.image.grid.len()];
    let moved = gen.reference(80.0).unwrap().image;
    // an empty mask leaves nothing to match, so the field stays at zero
    let res = register_masked(&gen.base.image, &moved, Some(&mask), &RegistrationConfig::default()).unwrap();
    assert_eq!(res.svf.max_norm(), 0.0);
    assert!(register_masked(&gen.base.image, &moved, Some(&mask[1..]), &RegistrationConfig::default()).is_err());
}
