use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rbig::flow::{fit, FitConfig, RotationKind};
use rbig::infotheory::multi_information;

fn cube45(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let mut data = Array2::zeros((n, 2));
    for mut row in data.outer_iter_mut() {
        let a: f64 = rng.gen();
        let b: f64 = rng.gen();
        row[0] = c * a - c * b;
        row[1] = c * a + c * b;
    }
    data
}

// d-dimensional correlated Gaussian with a known random correlation matrix;
// returns (data, true multi-information in bits).
fn gg_data(n: usize, d: usize, seed: u64) -> (Array2<f64>, f64) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xabcd);
    // C = A A^T normalized to unit diagonal, A random with dominant diag.
    let mut a = nalgebra::DMatrix::<f64>::from_fn(d, d, |i, j| {
        let z: f64 = rng.sample(StandardNormal);
        0.22 * z + if i == j { 1.35 } else { 0.0 }
    });
    let c = &a * a.transpose();
    let dinv = nalgebra::DMatrix::from_diagonal(&c.diagonal().map(|v| 1.0 / v.sqrt()));
    let corr = &dinv * c * &dinv;
    let chol = corr.clone().cholesky().expect("spd");
    let l = chol.l();
    let mut data = Array2::zeros((n, d));
    let mut zbuf = vec![0.0; d];
    for mut row in data.outer_iter_mut() {
        for z in zbuf.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += l[(i, j)] * zbuf[j];
            }
            row[i] = acc;
        }
    }
    let true_mi = -0.5 * corr.determinant().log2();
    a.fill(0.0);
    (data, true_mi)
}

fn main() {
    let map_bins = std::env::var("RBIG_DEBUG_MAP_BINS").unwrap_or_else(|_| "policy".into());
    println!("== map_bins={map_bins}");
    for kind in [RotationKind::Pca, RotationKind::Random] {
        let mut cums = Vec::new();
        let mut mis = Vec::new();
        let mut lays = Vec::new();
        for seed in 0..6u64 {
            let data = cube45(10_000, 40 + seed);
            let config = FitConfig {
                rotation: kind,
                seed: 40 + seed,
                ..FitConfig::default()
            };
            let model = fit(&data, &config).unwrap();
            cums.push(model.trace().cumulative_delta_j_bits());
            mis.push(model.trace().multi_information_bits());
            lays.push(model.layers().len());
        }
        println!("cube45 {kind:?}: layers={lays:?}");
        println!("  cum={cums:.3?}  (want [0.449,0.569])");
        println!("  mi ={mis:.3?}  (want [0.30,0.45], ideally [0.38,0.45])");
    }

    for d in [4usize, 6, 10] {
        let mut errs = Vec::new();
        let mut lays = Vec::new();
        for seed in 0..4u64 {
            let (data, truth) = gg_data(10_000, d, 700 + seed);
            let config = FitConfig {
                seed: 700 + seed,
                ..FitConfig::default()
            };
            let model = fit(&data, &config).unwrap();
            errs.push(model.trace().multi_information_bits() - truth);
            lays.push(model.layers().len());
        }
        println!("GG d={d}: mi errors={errs:.3?} layers={lays:?}");
    }
}
