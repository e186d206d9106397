//! In-memory image buffers.
//!
//! Render passes stay in `f64` until export; bit-level equality between
//! buffers is part of the renderer's contract, so comparisons go through
//! [`BitPattern`] rather than `==` (NaN-safe, -0.0 distinct from 0.0).

use crate::math::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: u32,
    height: u32,
    data: Vec<T>,
}

impl<T: Clone + Default> Image<T> {
    pub fn new(width: u32, height: u32) -> Self {
        Image { width, height, data: vec![T::default(); (width as usize) * (height as usize)] }
    }
}

impl<T: Clone> Image<T> {
    pub fn from_fill(width: u32, height: u32, fill: T) -> Self {
        Image { width, height, data: vec![fill; (width as usize) * (height as usize)] }
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Image<U> {
        Image { width: self.width, height: self.height, data: self.data.iter().map(f).collect() }
    }
}

impl<T> Image<T> {
    pub fn from_rows(width: u32, height: u32, rows: Vec<Vec<T>>) -> Self {
        debug_assert_eq!(rows.len(), height as usize);
        let mut data = Vec::with_capacity((width as usize) * (height as usize));
        for row in rows {
            debug_assert_eq!(row.len(), width as usize);
            data.extend(row);
        }
        Image { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> &T {
        &self.data[self.idx(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: T) {
        let i = self.idx(x, y);
        self.data[i] = v;
    }

    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y as usize) * (self.width as usize) + (x as usize)
    }

    pub fn pixels(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    pub fn pixels_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.data.iter_mut()
    }

    /// Row-major (x, y, value) iteration.
    pub fn enumerate(&self) -> impl Iterator<Item = (u32, u32, &T)> {
        let w = self.width;
        self.data.iter().enumerate().map(move |(i, v)| ((i as u32) % w, (i as u32) / w, v))
    }

    pub fn same_dims<U>(&self, other: &Image<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// RGBA pixel for cutout / amodal layers. Alpha is binary in practice
/// ({0, 1}) because there is no antialiasing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rgba {
    pub rgb: Vec3,
    pub alpha: f64,
}

/// Exact bit-pattern equality, the currency of the determinism contracts.
pub trait BitPattern {
    fn bits_eq(&self, other: &Self) -> bool;
}

impl BitPattern for f64 {
    fn bits_eq(&self, other: &Self) -> bool {
        self.to_bits() == other.to_bits()
    }
}

impl BitPattern for u32 {
    fn bits_eq(&self, other: &Self) -> bool {
        self == other
    }
}

impl BitPattern for bool {
    fn bits_eq(&self, other: &Self) -> bool {
        self == other
    }
}

impl BitPattern for Vec3 {
    fn bits_eq(&self, other: &Self) -> bool {
        self.x.bits_eq(&other.x) && self.y.bits_eq(&other.y) && self.z.bits_eq(&other.z)
    }
}

impl BitPattern for Rgba {
    fn bits_eq(&self, other: &Self) -> bool {
        self.rgb.bits_eq(&other.rgb) && self.alpha.bits_eq(&other.alpha)
    }
}

impl<T: BitPattern> Image<T> {
    pub fn bits_eq(&self, other: &Image<T>) -> bool {
        self.same_dims(other) && self.data.iter().zip(&other.data).all(|(a, b)| a.bits_eq(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_eq_distinguishes_negative_zero() {
        let mut a = Image::<f64>::new(2, 2);
        let b = a.clone();
        assert!(a.bits_eq(&b));
        a.set(0, 0, -0.0);
        assert!(!a.bits_eq(&b));
    }

    #[test]
    fn enumerate_is_row_major() {
        let mut img = Image::<u32>::new(3, 2);
        img.set(2, 1, 7);
        let coords: Vec<_> = img.enumerate().map(|(x, y, v)| (x, y, *v)).collect();
        assert_eq!(coords[5], (2, 1, 7));
    }
}
