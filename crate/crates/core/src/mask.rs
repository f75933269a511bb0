//! Binary raster masks.
//!
//! A [`Mask`] is stored as packed rows of 64-bit words (bit `x % 64` of word
//! `x / 64` holds column `x`). Padding bits past `width` are always zero, so
//! whole-word operations and popcounts never need to special-case the last
//! word of a row.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    stride: usize,
    words: Vec<u64>,
}

impl fmt::Debug for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mask {}x{} (area {})", self.width, self.height, self.area())?;
        if self.width * self.height <= 64 * 64 {
            for y in 0..self.height {
                let row: String = (0..self.width)
                    .map(|x| if self.get(x, y) { '#' } else { '.' })
                    .collect();
                writeln!(f, "{row}")?;
            }
        }
        Ok(())
    }
}

impl Mask {
    /// An empty mask. Dimensions must be at least 1×1.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("mask dimensions must be positive, got {width}x{height}")));
        }
        let stride = width.div_ceil(64);
        Ok(Mask { width, height, stride, words: vec![0; stride * height] })
    }

    /// Same as [`Mask::new`] for dimensions known to be valid.
    pub fn empty(width: usize, height: usize) -> Self {
        Self::new(width, height).expect("mask dimensions must be positive")
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    /// Builds a mask from a row-major boolean grid.
    pub fn from_bools(width: usize, height: usize, bits: &[bool]) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Shape(format!(
                "expected {} bits for {width}x{height}, got {}",
                width * height,
                bits.len()
            )));
        }
        let mut m = Self::new(width, height)?;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                m.set(i % width, i / width, true);
            }
        }
        Ok(m)
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.get_index(i)).collect()
    }

    /// Axis-aligned filled rectangle `[x0, x0+w) × [y0, y0+h)`, clipped.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self::from_fn(width, height, |x, y| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels.
    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.words[y * self.stride + x / 64] >> (x % 64) & 1 == 1
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> bool {
        self.get(i % self.width, i / self.width)
    }

    /// Like [`Mask::get`] but treats out-of-image coordinates as background.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        let w = &mut self.words[y * self.stride + x / 64];
        if value {
            *w |= 1 << (x % 64);
        } else {
            *w &= !(1 << (x % 64));
        }
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, value: bool) {
        self.set(i % self.width, i / self.width, value)
    }

    pub fn area(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn same_shape(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_shape(&self, other: &Mask) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    /// Row-major indices of set pixels, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.height).flat_map(move |y| {
            (0..self.stride).flat_map(move |wi| {
                let mut w = self.words[y * self.stride + wi];
                std::iter::from_fn(move || {
                    if w == 0 {
                        return None;
                    }
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(y * self.width + wi * 64 + b)
                })
            })
        })
    }

    fn zip_words(&self, other: &Mask, f: impl Fn(u64, u64) -> u64) -> Mask {
        assert!(self.same_shape(other), "mask shape mismatch");
        Mask {
            width: self.width,
            height: self.height,
            stride: self.stride,
            words: self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn and(&self, other: &Mask) -> Mask {
        self.zip_words(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Mask) -> Mask {
        self.zip_words(other, |a, b| a | b)
    }

    pub fn xor(&self, other: &Mask) -> Mask {
        self.zip_words(other, |a, b| a ^ b)
    }

    pub fn and_not(&self, other: &Mask) -> Mask {
        self.zip_words(other, |a, b| a & !b)
    }

    pub fn intersection_area(&self, other: &Mask) -> usize {
        assert!(self.same_shape(other), "mask shape mismatch");
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    pub fn union_area(&self, other: &Mask) -> usize {
        assert!(self.same_shape(other), "mask shape mismatch");
        self.words.iter().zip(&other.words).map(|(a, b)| (a | b).count_ones() as usize).sum()
    }

    fn tail_mask(&self) -> u64 {
        match self.width % 64 {
            0 => u64::MAX,
            r => (1u64 << r) - 1,
        }
    }

    /// Translates the mask by `(dx, dy)` pixels; pixels leaving the image are
    /// dropped.
    pub fn shifted(&self, dx: isize, dy: isize) -> Mask {
        let mut out = Mask { words: vec![0; self.words.len()], ..*self };
        if dx.unsigned_abs() >= self.width || dy.unsigned_abs() >= self.height {
            return out;
        }
        let tail = self.tail_mask();
        for y in 0..self.height {
            let sy = y as isize - dy;
            if sy < 0 || sy as usize >= self.height {
                continue;
            }
            let src = &self.words[sy as usize * self.stride..(sy as usize + 1) * self.stride];
            let dst = &mut out.words[y * self.stride..(y + 1) * self.stride];
            shift_row(src, dst, dx);
            dst[self.stride - 1] &= tail;
        }
        out
    }

    /// 4-neighbourhood erosion; pixels outside the image count as background.
    pub fn erode4(&self) -> Mask {
        let mut out = self.clone();
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let s = self.shifted(dx, dy);
            for (o, w) in out.words.iter_mut().zip(&s.words) {
                *o &= w;
            }
        }
        out
    }

    /// 4-neighbourhood dilation.
    pub fn dilate4(&self) -> Mask {
        let mut out = self.clone();
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let s = self.shifted(dx, dy);
            for (o, w) in out.words.iter_mut().zip(&s.words) {
                *o |= w;
            }
        }
        out
    }

    /// Dilation by the discrete Euclidean disc `dx² + dy² ≤ radius²`.
    pub fn dilate_disc(&self, radius: f64) -> Mask {
        let r = radius.max(0.0);
        let ri = r.floor() as isize;
        let r2 = r * r;
        let mut out = self.clone();
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                if (dx == 0 && dy == 0) || ((dx * dx + dy * dy) as f64) > r2 {
                    continue;
                }
                let s = self.shifted(dx, dy);
                for (o, w) in out.words.iter_mut().zip(&s.words) {
                    *o |= w;
                }
            }
        }
        out
    }

    /// Mask pixels with at least one 4-neighbour outside the mask.
    pub fn boundary(&self) -> Mask {
        self.xor(&self.erode4())
    }

    /// Background pixels 4-adjacent to the mask.
    pub fn outer_ring(&self) -> Mask {
        self.dilate4().and_not(self)
    }

    /// 4-connected components as lists of row-major pixel indices. Components
    /// are ordered by their first pixel in row-major order; pixels within a
    /// component are in discovery (BFS) order.
    pub fn components4(&self) -> Vec<Vec<usize>> {
        let (w, h) = (self.width, self.height);
        let mut seen = vec![false; w * h];
        let mut comps = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        for start in self.ones() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut comp = Vec::new();
            while let Some(p) = queue.pop_front() {
                comp.push(p);
                let (x, y) = (p % w, p / w);
                let mut visit = |q: usize| {
                    if !seen[q] && self.get_index(q) {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                };
                if x > 0 {
                    visit(p - 1);
                }
                if x + 1 < w {
                    visit(p + 1);
                }
                if y > 0 {
                    visit(p - w);
                }
                if y + 1 < h {
                    visit(p + w);
                }
            }
            comps.push(comp);
        }
        comps
    }

    /// Squared Euclidean distance from every pixel to the nearest pixel not
    /// in the mask, with everything outside the image counted as background.
    /// Background pixels get 0.
    pub fn distance_to_background_sq(&self) -> Vec<f64> {
        // Exact separable transform on an image padded by one background
        // pixel on every side.
        let (w, h) = (self.width + 2, self.height + 2);
        // Large enough to dominate any in-image distance, small enough that
        // parabola intersections stay exact.
        let inf = 1e12;
        let mut grid = vec![0.0; w * h];
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    grid[(y + 1) * w + x + 1] = inf;
                }
            }
        }
        let mut buf = vec![0.0; w.max(h)];
        let mut out = vec![0.0; w.max(h)];
        for x in 0..w {
            for y in 0..h {
                buf[y] = grid[y * w + x];
            }
            edt_1d(&buf[..h], &mut out[..h]);
            for y in 0..h {
                grid[y * w + x] = out[y];
            }
        }
        for y in 0..h {
            buf[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
            edt_1d(&buf[..w], &mut out[..w]);
            grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
        }
        let mut res = Vec::with_capacity(self.len());
        for y in 0..self.height {
            for x in 0..self.width {
                res.push(grid[(y + 1) * w + x + 1]);
            }
        }
        res
    }

    /// Mean position `(x, y)` of set pixels, or `None` for an empty mask.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut n = 0usize;
        let (mut sx, mut sy) = (0.0, 0.0);
        for i in self.ones() {
            n += 1;
            sx += (i % self.width) as f64;
            sy += (i / self.width) as f64;
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }
}

/// Writes `src` shifted by `dx` columns into `dst` (positive = rightwards).
fn shift_row(src: &[u64], dst: &mut [u64], dx: isize) {
    let n = src.len() as isize;
    let word_shift = dx.div_euclid(64);
    let bit_shift = dx.rem_euclid(64) as u32;
    for (i, d) in dst.iter_mut().enumerate() {
        let i = i as isize;
        let lo_idx = i - word_shift;
        let hi_idx = lo_idx - 1;
        let lo = if (0..n).contains(&lo_idx) { src[lo_idx as usize] } else { 0 };
        let hi = if bit_shift > 0 && (0..n).contains(&hi_idx) { src[hi_idx as usize] } else { 0 };
        *d = if bit_shift == 0 { lo } else { (lo << bit_shift) | (hi >> (64 - bit_shift)) };
    }
}

/// One-dimensional squared distance transform of a sampled function
/// (lower envelope of parabolas).
fn edt_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let meet = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    for q in 1..n {
        let mut s = meet(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = meet(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *dq = diff * diff + f[p];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_mask(max_w: usize, max_h: usize) -> impl Strategy<Value = Mask> {
        (1..=max_w, 1..=max_h).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), w * h)
                .prop_map(move |bits| Mask::from_bools(w, h, &bits).unwrap())
        })
    }

    #[test]
    fn zero_dimensions_rejected() {
        assert!(Mask::new(0, 3).is_err());
        assert!(Mask::new(3, 0).is_err());
    }

    #[test]
    fn wide_rows_shift_across_words() {
        let mut m = Mask::empty(130, 2);
        m.set(63, 0, true);
        m.set(126, 1, true);
        let s = m.shifted(1, 0);
        assert!(s.get(64, 0) && s.get(127, 1));
        assert_eq!(s.area(), 2);
        let s = m.shifted(3, 0);
        assert!(s.get(66, 0) && s.get(129, 1));
        let s = m.shifted(-64, 0);
        assert!(s.get(62, 1) && !s.get(63, 0));
        assert_eq!(s.area(), 1);
    }

    #[test]
    fn edt_of_square() {
        let m = Mask::rect(9, 9, 2, 2, 5, 5);
        let d = m.distance_to_background_sq();
        assert_eq!(d[4 * 9 + 4], 9.0);
        assert_eq!(d[2 * 9 + 2], 1.0);
        assert_eq!(d[0], 0.0);
    }

    proptest! {
        #[test]
        fn shift_matches_pixelwise(m in arb_mask(70, 6), dx in -72isize..72, dy in -7isize..7) {
            let s = m.shifted(dx, dy);
            for y in 0..m.height() {
                for x in 0..m.width() {
                    let expect = m.get_signed(x as isize - dx, y as isize - dy);
                    prop_assert_eq!(s.get(x, y), expect);
                }
            }
        }

        #[test]
        fn erosion_matches_pixelwise(m in arb_mask(12, 12)) {
            let e = m.erode4();
            for y in 0..m.height() as isize {
                for x in 0..m.width() as isize {
                    let expect = m.get_signed(x, y) && m.get_signed(x - 1, y) && m.get_signed(x + 1, y)
                        && m.get_signed(x, y - 1) && m.get_signed(x, y + 1);
                    prop_assert_eq!(e.get(x as usize, y as usize), expect);
                }
            }
        }

        #[test]
        fn edt_matches_brute_force(m in arb_mask(10, 10)) {
            let d = m.distance_to_background_sq();
            let (w, h) = (m.width() as isize, m.height() as isize);
            for y in 0..h {
                for x in 0..w {
                    let mut best = f64::INFINITY;
                    for by in -1..=h {
                        for bx in -1..=w {
                            if !m.get_signed(bx, by) {
                                best = best.min(((bx - x).pow(2) + (by - y).pow(2)) as f64);
                            }
                        }
                    }
                    prop_assert_eq!(d[(y * w + x) as usize], best);
                }
            }
        }

        #[test]
        fn components_partition_the_mask(m in arb_mask(10, 10)) {
            let comps = m.components4();
            let total: usize = comps.iter().map(Vec::len).sum();
            prop_assert_eq!(total, m.area());
        }
    }
}
