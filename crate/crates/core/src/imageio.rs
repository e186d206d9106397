//! Image file formats: PFM for float passes, PPM (P6) for 8-bit RGB
//! export, PGM (P5) for binary masks.
//!
//! PFM layout: header `PF\n{width} {height}\n-1.0\n` (color) or `Pf` (single
//! channel), then rows bottom-to-top as little-endian 32-bit floats. 8-bit
//! export applies gamma and clamps to [0, 1]; masks use values {0, 255}.

use crate::image::Image;
use crate::math::Vec3;
use crate::scene::EntityId;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {format} file {path}: {reason}")]
    Malformed { format: &'static str, path: String, reason: String },
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> ImageIoError + '_ {
    move |source| ImageIoError::Write { path: path.display().to_string(), source }
}

fn read_file(path: &Path) -> Result<Vec<u8>, ImageIoError> {
    std::fs::read(path)
        .map_err(|source| ImageIoError::Read { path: path.display().to_string(), source })
}

fn malformed(format: &'static str, path: &Path, reason: impl Into<String>) -> ImageIoError {
    ImageIoError::Malformed { format, path: path.display().to_string(), reason: reason.into() }
}

/// Either flavor of PFM.
#[derive(Debug, Clone)]
pub enum PfmImage {
    Rgb(Image<Vec3>),
    Gray(Image<f64>),
}

pub fn write_pfm_rgb(path: &Path, img: &Image<Vec3>) -> Result<(), ImageIoError> {
    let mut buf = Vec::with_capacity(img.pixel_count() * 12 + 32);
    write!(buf, "PF\n{} {}\n-1.0\n", img.width(), img.height()).expect("vec write");
    for y in (0..img.height()).rev() {
        for x in 0..img.width() {
            let p = img.get(x, y);
            buf.extend((p.x as f32).to_le_bytes());
            buf.extend((p.y as f32).to_le_bytes());
            buf.extend((p.z as f32).to_le_bytes());
        }
    }
    std::fs::write(path, buf).map_err(write_err(path))
}

pub fn write_pfm_gray(path: &Path, img: &Image<f64>) -> Result<(), ImageIoError> {
    let mut buf = Vec::with_capacity(img.pixel_count() * 4 + 32);
    write!(buf, "Pf\n{} {}\n-1.0\n", img.width(), img.height()).expect("vec write");
    for y in (0..img.height()).rev() {
        for x in 0..img.width() {
            buf.extend((*img.get(x, y) as f32).to_le_bytes());
        }
    }
    std::fs::write(path, buf).map_err(write_err(path))
}

pub fn read_pfm(path: &Path) -> Result<PfmImage, ImageIoError> {
    let bytes = read_file(path)?;
    let mf = |reason: &str| malformed("PFM", path, reason);

    let mut header_end = 0;
    let mut newlines = 0;
    for (i, b) in bytes.iter().enumerate() {
        if *b == b'\n' {
            newlines += 1;
            if newlines == 3 {
                header_end = i + 1;
                break;
            }
        }
    }
    if newlines != 3 {
        return Err(mf("truncated header"));
    }
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| mf("non-UTF8 header"))?;
    let mut lines = header.lines();
    let magic = lines.next().ok_or_else(|| mf("missing magic"))?;
    let color = match magic {
        "PF" => true,
        "Pf" => false,
        other => return Err(mf(&format!("bad magic {other:?}"))),
    };
    let dims = lines.next().ok_or_else(|| mf("missing dimensions"))?;
    let mut it = dims.split_whitespace();
    let width: u32 = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| mf("bad width"))?;
    let height: u32 = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| mf("bad height"))?;
    let scale: f64 = lines
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| mf("bad scale"))?;
    if scale >= 0.0 {
        return Err(mf("big-endian PFM not supported"));
    }

    let channels = if color { 3usize } else { 1 };
    let expected = (width as usize) * (height as usize) * channels * 4;
    let data = &bytes[header_end..];
    if data.len() != expected {
        return Err(mf(&format!("payload of {} bytes, expected {expected}", data.len())));
    }
    let mut floats = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    let mut rows_rgb: Vec<Vec<Vec3>> = Vec::new();
    let mut rows_gray: Vec<Vec<f64>> = Vec::new();
    for _ in 0..height {
        if color {
            let mut row = Vec::with_capacity(width as usize);
            for _ in 0..width {
                let r = floats.next().unwrap();
                let g = floats.next().unwrap();
                let b = floats.next().unwrap();
                row.push(Vec3::new(r, g, b));
            }
            rows_rgb.push(row);
        } else {
            rows_gray.push((0..width).map(|_| floats.next().unwrap()).collect());
        }
    }
    // Stored bottom-to-top.
    if color {
        rows_rgb.reverse();
        Ok(PfmImage::Rgb(Image::from_rows(width, height, rows_rgb)))
    } else {
        rows_gray.reverse();
        Ok(PfmImage::Gray(Image::from_rows(width, height, rows_gray)))
    }
}

/// Gamma-encodes one linear value to an 8-bit level.
pub fn encode_8bit(linear: f64, gamma: f64) -> u8 {
    let v = linear.clamp(0.0, 1.0).powf(1.0 / gamma);
    (v * 255.0).round() as u8
}

/// Binary PPM (P6, maxval 255), gamma-encoded top-to-bottom rows.
pub fn write_ppm(path: &Path, img: &Image<Vec3>, gamma: f64) -> Result<(), ImageIoError> {
    let mut buf = Vec::with_capacity(img.pixel_count() * 3 + 32);
    write!(buf, "P6\n{} {}\n255\n", img.width(), img.height()).expect("vec write");
    for y in 0..img.height() {
        for x in 0..img.width() {
            let p = img.get(x, y);
            buf.push(encode_8bit(p.x, gamma));
            buf.push(encode_8bit(p.y, gamma));
            buf.push(encode_8bit(p.z, gamma));
        }
    }
    std::fs::write(path, buf).map_err(write_err(path))
}

/// Reads a binary PPM into [0, 1] values (levels divided by maxval, no
/// gamma decode).
pub fn read_ppm(path: &Path) -> Result<Image<Vec3>, ImageIoError> {
    let bytes = read_file(path)?;
    let (width, height, maxval, start) = parse_netpbm_header(&bytes, b"P6", "PPM", path)?;
    let expected = (width as usize) * (height as usize) * 3;
    let data = &bytes[start..];
    if data.len() != expected {
        return Err(malformed("PPM", path, format!("payload {} != {expected}", data.len())));
    }
    let scale = 1.0 / maxval as f64;
    let mut rows = Vec::with_capacity(height as usize);
    let mut i = 0;
    for _ in 0..height {
        let mut row = Vec::with_capacity(width as usize);
        for _ in 0..width {
            row.push(Vec3::new(
                data[i] as f64 * scale,
                data[i + 1] as f64 * scale,
                data[i + 2] as f64 * scale,
            ));
            i += 3;
        }
        rows.push(row);
    }
    Ok(Image::from_rows(width, height, rows))
}

/// Binary PGM (P5) mask with values {0, 255}.
pub fn write_pgm_mask(path: &Path, mask: &Image<bool>) -> Result<(), ImageIoError> {
    let mut buf = Vec::with_capacity(mask.pixel_count() + 32);
    write!(buf, "P5\n{} {}\n255\n", mask.width(), mask.height()).expect("vec write");
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            buf.push(if *mask.get(x, y) { 255 } else { 0 });
        }
    }
    std::fs::write(path, buf).map_err(write_err(path))
}

pub fn read_pgm_mask(path: &Path) -> Result<Image<bool>, ImageIoError> {
    let bytes = read_file(path)?;
    let (width, height, _maxval, start) = parse_netpbm_header(&bytes, b"P5", "PGM", path)?;
    let expected = (width as usize) * (height as usize);
    let data = &bytes[start..];
    if data.len() != expected {
        return Err(malformed("PGM", path, format!("payload {} != {expected}", data.len())));
    }
    let mut rows = Vec::with_capacity(height as usize);
    let mut i = 0;
    for _ in 0..height {
        let mut row = Vec::with_capacity(width as usize);
        for _ in 0..width {
            row.push(data[i] >= 128);
            i += 1;
        }
        rows.push(row);
    }
    Ok(Image::from_rows(width, height, rows))
}

fn parse_netpbm_header(
    bytes: &[u8],
    magic: &[u8],
    format: &'static str,
    path: &Path,
) -> Result<(u32, u32, u32, usize), ImageIoError> {
    let mf = |reason: String| malformed(format, path, reason);
    if !bytes.starts_with(magic) {
        return Err(mf("bad magic".into()));
    }
    let mut pos = magic.len();
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| mf("bad header field".into()))?;
    }
    // Single whitespace byte after maxval.
    pos += 1;
    if pos > bytes.len() {
        return Err(mf("truncated".into()));
    }
    Ok((fields[0], fields[1], fields[2], pos))
}

/// Instance map export: a single-channel PFM of entity indices plus a JSON
/// sidecar listing the index -> entity-id table.
pub fn write_instance_map(
    pfm_path: &Path,
    sidecar_path: &Path,
    instance: &Image<u32>,
    entity_index: &[EntityId],
) -> Result<(), ImageIoError> {
    write_pfm_gray(pfm_path, &instance.map(|i| *i as f64))?;
    let json = serde_json::to_string_pretty(entity_index).expect("entity ids serialize");
    std::fs::write(sidecar_path, json).map_err(write_err(sidecar_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn pfm_rgb_roundtrip_exact_at_f32() {
        let dir = tmp();
        let mut img = Image::<Vec3>::new(5, 4);
        for (i, p) in (0u32..).zip(img.pixels_mut()) {
            *p = Vec3::new(i as f64 * 0.25, -(i as f64), 1.0 / (i + 1) as f64);
        }
        // Quantize to f32 first so the roundtrip is exact.
        let quantized = img.map(|p| Vec3::new(p.x as f32 as f64, p.y as f32 as f64, p.z as f32 as f64));
        let path = dir.path().join("x.pfm");
        write_pfm_rgb(&path, &quantized).unwrap();
        match read_pfm(&path).unwrap() {
            PfmImage::Rgb(back) => assert!(back.bits_eq(&quantized)),
            _ => panic!("expected color PFM"),
        }
    }

    #[test]
    fn pfm_gray_roundtrip_and_header() {
        let dir = tmp();
        let mut img = Image::<f64>::new(3, 2);
        img.set(2, 1, 7.5);
        let path = dir.path().join("d.pfm");
        write_pfm_gray(&path, &img).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"Pf\n3 2\n-1.0\n"));
        match read_pfm(&path).unwrap() {
            PfmImage::Gray(back) => assert_eq!(*back.get(2, 1), 7.5),
            _ => panic!("expected gray PFM"),
        }
    }

    #[test]
    fn ppm_gamma_and_levels() {
        let dir = tmp();
        let mut img = Image::<Vec3>::new(2, 1);
        img.set(0, 0, Vec3::new(0.0, 1.0, 2.0)); // 2.0 clamps to 1.0
        img.set(1, 0, Vec3::splat(0.5));
        let path = dir.path().join("x.ppm");
        write_ppm(&path, &img, 2.2).unwrap();
        let back = read_ppm(&path).unwrap();
        assert_eq!(*back.get(0, 0), Vec3::new(0.0, 1.0, 1.0));
        let mid = (0.5f64.powf(1.0 / 2.2) * 255.0).round() / 255.0;
        assert!((back.get(1, 0).x - mid).abs() < 1e-12);
    }

    #[test]
    fn pgm_mask_roundtrip() {
        let dir = tmp();
        let mut mask = Image::<bool>::new(4, 3);
        mask.set(1, 2, true);
        mask.set(3, 0, true);
        let path = dir.path().join("m.pgm");
        write_pgm_mask(&path, &mask).unwrap();
        let back = read_pgm_mask(&path).unwrap();
        assert!(back.bits_eq(&mask));
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.ends_with(&[0, 255]) || bytes.iter().any(|b| *b == 255));
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tmp();
        let path = dir.path().join("bad.pfm");
        std::fs::write(&path, b"PF\n4 4\n-1.0\nshort").unwrap();
        assert!(matches!(read_pfm(&path), Err(ImageIoError::Malformed { .. })));
        let path2 = dir.path().join("bad.ppm");
        std::fs::write(&path2, b"P3\n1 1\n255\n0 0 0").unwrap();
        assert!(matches!(read_ppm(&path2), Err(ImageIoError::Malformed { .. })));
    }
}
