//! Full-image similarity metrics: PSNR and SSIM.
//!
//! PSNR runs on whatever value range the caller supplies (`max_val` is the
//! peak). SSIM follows the standard configuration — 11x11 Gaussian window,
//! sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1.0 — computed on the
//! Rec. 709 luma of gamma-encoded pixels.

use crate::image::Image;
use crate::math::Vec3;
use serde::Serialize;
use thiserror::Error;

/// Identical inputs report this PSNR instead of infinity.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("image dimensions differ: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch { a_w: u32, a_h: u32, b_w: u32, b_h: u32 },
    #[error("images must be at least {0}x{0} for SSIM")]
    TooSmall(usize),
}

/// One-line metric output of the `metrics` CLI subcommand. LPIPS is
/// deliberately absent from the schema (it would require a pretrained
/// network).
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub mse: f64,
}

/// Whether pixel values are linear radiance (gamma-encode before luma) or
/// already display-encoded (8-bit imports).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelEncoding {
    Linear,
    Encoded,
}

fn check_dims(a: &Image<Vec3>, b: &Image<Vec3>) -> Result<(), MetricsError> {
    if !a.same_dims(b) {
        return Err(MetricsError::DimensionMismatch {
            a_w: a.width(),
            a_h: a.height(),
            b_w: b.width(),
            b_h: b.height(),
        });
    }
    Ok(())
}

/// Mean squared error over all pixels and channels.
pub fn mse(a: &Image<Vec3>, b: &Image<Vec3>) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let mut acc = 0.0;
    for (pa, pb) in a.pixels().zip(b.pixels()) {
        let d = *pa - *pb;
        acc += d.dot(d);
    }
    Ok(acc / (a.pixel_count() as f64 * 3.0))
}

/// `10 log10(max_val^2 / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &Image<Vec3>, b: &Image<Vec3>, max_val: f64) -> Result<f64, MetricsError> {
    let err = mse(a, b)?;
    if err <= 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (max_val * max_val / err).log10()).min(PSNR_CAP_DB))
}

fn luma_plane(img: &Image<Vec3>, encoding: PixelEncoding) -> Image<f64> {
    img.map(|p| {
        let v = match encoding {
            PixelEncoding::Linear => Vec3::new(
                p.x.max(0.0).powf(1.0 / 2.2),
                p.y.max(0.0).powf(1.0 / 2.2),
                p.z.max(0.0).powf(1.0 / 2.2),
            ),
            PixelEncoding::Encoded => *p,
        };
        // Rec. 709 luma.
        0.2126 * v.x + 0.7152 * v.y + 0.0722 * v.z
    })
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            let dx = x as f64 - c;
            let dy = y as f64 - c;
            let w = (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            k[y * SSIM_WINDOW + x] = w;
            sum += w;
        }
    }
    for w in k.iter_mut() {
        *w /= sum;
    }
    k
}

/// Mean local SSIM over all fully interior 11x11 windows.
pub fn ssim(
    a: &Image<Vec3>,
    b: &Image<Vec3>,
    encoding: PixelEncoding,
) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    if (a.width() as usize) < SSIM_WINDOW || (a.height() as usize) < SSIM_WINDOW {
        return Err(MetricsError::TooSmall(SSIM_WINDOW));
    }
    let la = luma_plane(a, encoding);
    let lb = luma_plane(b, encoding);
    let kernel = gaussian_kernel();
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);

    let w = a.width() as usize;
    let h = a.height() as usize;
    let mut total = 0.0;
    let mut windows = 0u64;
    for wy in 0..=(h - SSIM_WINDOW) {
        for wx in 0..=(w - SSIM_WINDOW) {
            let mut mu_a = 0.0;
            let mut mu_b = 0.0;
            for ky in 0..SSIM_WINDOW {
                for kx in 0..SSIM_WINDOW {
                    let g = kernel[ky * SSIM_WINDOW + kx];
                    mu_a += g * la.get((wx + kx) as u32, (wy + ky) as u32);
                    mu_b += g * lb.get((wx + kx) as u32, (wy + ky) as u32);
                }
            }
            let mut var_a = 0.0;
            let mut var_b = 0.0;
            let mut cov = 0.0;
            for ky in 0..SSIM_WINDOW {
                for kx in 0..SSIM_WINDOW {
                    let g = kernel[ky * SSIM_WINDOW + kx];
                    let da = la.get((wx + kx) as u32, (wy + ky) as u32) - mu_a;
                    let db = lb.get((wx + kx) as u32, (wy + ky) as u32) - mu_b;
                    var_a += g * da * da;
                    var_b += g * db * db;
                    cov += g * da * db;
                }
            }
            let s = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            total += s;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// Computes the full report for one image pair.
pub fn metric_report(
    a: &Image<Vec3>,
    b: &Image<Vec3>,
    max_val: f64,
    encoding: PixelEncoding,
) -> Result<MetricReport, MetricsError> {
    Ok(MetricReport {
        psnr_db: psnr(a, b, max_val)?,
        ssim: ssim(a, b, encoding)?,
        mse: mse(a, b)?,
    })
}
