//! Fixtures shared by the benchmarks.

use hdustat::{simulate_dataset, Design, Marginal, RngSpec, Sample};

/// Standard Gaussian `n x p` sample from a fixed stream.
pub fn gaussian_sample(n: usize, p: usize) -> Sample {
    simulate_dataset(
        &Design::iid(n, Marginal::normal(0.0, 1.0), p),
        RngSpec::new(7, 0),
    )
    .expect("valid design")
}
