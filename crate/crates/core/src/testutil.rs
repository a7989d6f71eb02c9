use rand::Rng;

use crate::gaussmc::RngSpec;
use crate::kernels::KernelSpec;
use crate::sample::Sample;

pub fn random_sample(n: usize, p: usize, seed: u64) -> Sample {
    let mut rng = RngSpec::new(seed, 999).rng();
    let data = (0..n * p).map(|_| rng.random_range(-3.0..3.0)).collect();
    Sample::new(data, n, p).unwrap()
}

/// U-statistic of the first `k` rows by direct double loop.
pub fn brute_ustat(s: &Sample, spec: &KernelSpec, k: usize) -> Vec<f64> {
    let mut acc = vec![0.0; spec.dimension(s.p())];
    for i in 0..k {
        for j in i + 1..k {
            let h = spec.eval(s.row(i), s.row(j)).unwrap();
            acc.iter_mut().zip(&h).for_each(|(a, v)| *a += v);
        }
    }
    let pairs = (k * (k - 1) / 2) as f64;
    acc.iter().map(|a| a / pairs).collect()
}
