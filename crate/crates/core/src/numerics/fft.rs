use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result};

fn check_len(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        Err(Error::NotPowerOfTwo(n))
    } else {
        Ok(())
    }
}

/// Unnormalized forward DFT of a power-of-two length vector.
pub fn fft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len(x.len())?;
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    Ok(buf)
}

/// Inverse DFT scaled by `1/n`, so `ifft(fft(x)) == x`.
pub fn ifft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len(x.len())?;
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    Ok(buf)
}
