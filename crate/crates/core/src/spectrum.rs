//! Real-input DFT magnitude spectra.

use rustfft::{num_complex::Complex, FftPlanner};

/// Magnitudes of the `n/2 + 1` non-negative frequency bins of `x`
/// (DC included, unnormalised).
pub fn magnitude_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf.truncate(n / 2 + 1);
    buf.iter().map(|c| c.norm()).collect()
}
