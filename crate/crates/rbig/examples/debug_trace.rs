use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rbig::flow::{fit, FitConfig};

fn gg_data(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xabcd);
    let a = nalgebra::DMatrix::<f64>::from_fn(d, d, |i, j| {
        let z: f64 = rng.sample(StandardNormal);
        0.45 * z + if i == j { 1.2 } else { 0.0 }
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
    data
}

fn main() {
    let d = 6;
    let data = gg_data(10_000, d, 700);
    let config = FitConfig { seed: 700, ..FitConfig::default() };
    let model = fit(&data, &config).unwrap();
    println!("layers={} tol={}", model.layers().len(), config.resolved_stop_tolerance_bits(d));
    for r in &model.trace().rows {
        println!(
            "it={:2} jm={:+.4} stat={:8.3} accept={}",
            r.iteration, r.jm_bits, r.gauss_stat, r.gauss_accept
        );
    }
}
