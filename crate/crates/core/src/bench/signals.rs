use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::vecops::norm2_sq;

/// Piecewise-constant signal with `pieces` plateaus at random levels in `[0, 1]`.
pub fn blocks(n: usize, pieces: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 || pieces == 0 || pieces > n {
        return Err(Error::Config(format!("blocks needs 1 <= pieces <= n, got pieces = {pieces}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cuts: Vec<usize> = Vec::with_capacity(pieces + 1);
    cuts.push(0);
    // distinct interior breakpoints
    let mut pool: Vec<usize> = (1..n).collect();
    for k in 0..pieces - 1 {
        let pick = rng.random_range(k..pool.len());
        pool.swap(k, pick);
    }
    let mut inner: Vec<usize> = pool[..pieces - 1].to_vec();
    inner.sort_unstable();
    cuts.extend(inner);
    cuts.push(n);
    let mut x = vec![0.0; n];
    let mut prev = f64::NAN;
    for w in cuts.windows(2) {
        let mut level: f64 = rng.random_range(0.0..1.0);
        // keep neighbouring plateaus visibly different
        while (level - prev).abs() < 0.1 {
            level = rng.random_range(0.0..1.0);
        }
        prev = level;
        x[w[0]..w[1]].fill(level);
    }
    Ok(x)
}

/// Deterministic piecewise-constant image in `[0, 1]`: background, two rectangles, a disc.
pub fn cartoon(height: usize, width: usize) -> Result<Vec<f64>> {
    if height < 4 || width < 4 {
        return Err(Error::Config(format!("cartoon needs at least 4x4 pixels, got {height}x{width}")));
    }
    let (h, w) = (height as f64, width as f64);
    let mut img = vec![0.2; height * width];
    for r in 0..height {
        for c in 0..width {
            let (y, x) = ((r as f64 + 0.5) / h, (c as f64 + 0.5) / w);
            let v = &mut img[r * width + c];
            if (0.1..0.45).contains(&y) && (0.1..0.6).contains(&x) {
                *v = 0.85;
            }
            if (0.55..0.9).contains(&y) && (0.15..0.4).contains(&x) {
                *v = 0.55;
            }
            if (x - 0.7).powi(2) + (y - 0.62).powi(2) < 0.2f64.powi(2) {
                *v = 0.4;
            }
        }
    }
    Ok(img)
}

/// Standard normal vector drawn from `seed`.
pub fn gaussian_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        })
        .collect()
}

/// `10·log10(peak²·n / ‖a − b‖²)` with `peak = max(reference)`.
pub fn psnr(reference: &[f64], other: &[f64]) -> f64 {
    let peak = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let err: f64 = reference.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum();
    10.0 * (peak * peak * reference.len() as f64 / err).log10()
}

/// Noise level at which `reference + σ·noise` has the target PSNR.
///
/// PSNR is exactly affine in `log σ` for a fixed noise draw, so the closed
/// form is used and then checked.
pub fn sigma_for_psnr(reference: &[f64], noise: &[f64], target_db: f64) -> Result<f64> {
    let peak = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let nn = norm2_sq(noise);
    if !(peak > 0.0) || !(nn > 0.0) || !target_db.is_finite() {
        return Err(Error::Config(format!(
            "PSNR target {target_db} dB is unsatisfiable (peak {peak}, noise energy {nn})"
        )));
    }
    let sigma = peak * (reference.len() as f64 / nn).sqrt() * 10f64.powf(-target_db / 20.0);
    let y: Vec<f64> = reference.iter().zip(noise).map(|(r, w)| r + sigma * w).collect();
    let got = psnr(reference, &y);
    if (got - target_db).abs() > 1e-6 {
        return Err(Error::NumericalFailure(format!("PSNR calibration landed at {got} dB for target {target_db}")));
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_has_requested_plateaus() {
        let x = blocks(64, 5, 3).unwrap();
        let jumps = x.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(jumps, 4);
        assert!(x.iter().all(|v| (0.0..1.0).contains(v)));
        assert_eq!(x, blocks(64, 5, 3).unwrap());
    }

    #[test]
    fn cartoon_is_piecewise_constant() {
        let img = cartoon(32, 32).unwrap();
        let mut levels: Vec<f64> = img.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert_eq!(levels, vec![0.2, 0.4, 0.55, 0.85]);
    }

    #[test]
    fn calibrated_sigma_hits_target() {
        let r = cartoon(16, 16).unwrap();
        let w = gaussian_noise(r.len(), 9);
        let s = sigma_for_psnr(&r, &w, 27.78).unwrap();
        let y: Vec<f64> = r.iter().zip(&w).map(|(a, b)| a + s * b).collect();
        assert!((psnr(&r, &y) - 27.78).abs() < 1e-9);
    }

    #[test]
    fn unsatisfiable_target() {
        assert!(sigma_for_psnr(&[0.0, -1.0], &[1.0, 1.0], 20.0).is_err());
        assert!(sigma_for_psnr(&[1.0, 1.0], &[0.0, 0.0], 20.0).is_err());
    }
}
