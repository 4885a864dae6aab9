//! Raster grid types, thresholding, morphological skeletonization and PGM I/O.
//!
//! Pixel (0,0) is the top-left corner; x grows rightward, y downward.
//! Coordinates denote integer pixel centers.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported magic number {0:?} (only binary P5 is supported)")]
    UnsupportedMagic(String),
    #[error("truncated PGM payload: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("unsupported maxval {0} (must be 255 or 65535)")]
    UnsupportedMaxval(u32),
    #[error("value {0} outside [0,1]")]
    ValueOutOfRange(f64),
    #[error("dimensions {0}x{1} invalid")]
    BadDimensions(usize, usize),
}

/// 2D raster of tubularity probabilities, row-major, each value in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(RasterError::BadDimensions(width, height));
        }
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(RasterError::ValueOutOfRange(v));
            }
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        Self::new(width, height, vec![v; width * height]).expect("constant grid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Pixel foreground iff value >= t.
    pub fn threshold(&self, t: f64) -> BinaryMask {
        let bits = self.values.iter().map(|&v| v >= t).collect();
        BinaryMask { width: self.width, height: self.height, bits }
    }

    /// Reads a binary (P5) PGM file, maxval 255 or 65535. Values are raw/maxval.
    pub fn load_pgm<P: AsRef<Path>>(path: P) -> Result<Self, RasterError> {
        let file = std::fs::File::open(path)?;
        let mut reader = BufReader::new(file);
        Self::read_pgm(&mut reader)
    }

    pub fn read_pgm<R: BufRead>(reader: &mut R) -> Result<Self, RasterError> {
        let magic = read_header_token(reader)?;
        if magic != "P5" {
            return Err(RasterError::UnsupportedMagic(magic));
        }
        let width: usize = parse_header_number(reader, "width")?;
        let height: usize = parse_header_number(reader, "height")?;
        let maxval: u32 = parse_header_number(reader, "maxval")?;
        if width == 0 || height == 0 {
            return Err(RasterError::BadDimensions(width, height));
        }
        if maxval != 255 && maxval != 65535 {
            return Err(RasterError::UnsupportedMaxval(maxval));
        }
        let npix = width * height;
        let bytes_per = if maxval == 255 { 1 } else { 2 };
        let mut payload = vec![0u8; npix * bytes_per];
        let got = read_fully(reader, &mut payload)?;
        if got != payload.len() {
            return Err(RasterError::TruncatedPayload { expected: payload.len(), got });
        }
        let scale = f64::from(maxval);
        let values = if maxval == 255 {
            payload.iter().map(|&b| f64::from(b) / scale).collect()
        } else {
            payload
                .chunks_exact(2)
                .map(|w| f64::from(u16::from_be_bytes([w[0], w[1]])) / scale)
                .collect()
        };
        Self::new(width, height, values)
    }

    /// Writes a binary (P5) PGM file; each value is stored as round(v * maxval).
    pub fn save_pgm<P: AsRef<Path>>(&self, path: P, maxval: u32) -> Result<(), RasterError> {
        if maxval != 255 && maxval != 65535 {
            return Err(RasterError::UnsupportedMaxval(maxval));
        }
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        write!(w, "P5\n{} {}\n{}\n", self.width, self.height, maxval)?;
        let scale = f64::from(maxval);
        if maxval == 255 {
            let bytes: Vec<u8> = self.values.iter().map(|&v| (v * scale).round() as u8).collect();
            w.write_all(&bytes)?;
        } else {
            let mut bytes = Vec::with_capacity(self.values.len() * 2);
            for &v in &self.values {
                let word = (v * scale).round() as u16;
                bytes.extend_from_slice(&word.to_be_bytes());
            }
            w.write_all(&bytes)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn read_fully<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<usize, RasterError> {
    let mut got = 0;
    while got < buf.len() {
        let n = reader.read(&mut buf[got..])?;
        if n == 0 {
            break;
        }
        got += n;
    }
    Ok(got)
}

/// Reads one whitespace-delimited header token, skipping `#` comments.
fn read_header_token<R: BufRead>(reader: &mut R) -> Result<String, RasterError> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = reader.read(&mut byte)?;
        if n == 0 {
            if token.is_empty() {
                return Err(RasterError::MalformedHeader("unexpected end of file".into()));
            }
            break;
        }
        let b = byte[0];
        if b == b'#' && token.is_empty() {
            // comment runs to end of line
            let mut line = String::new();
            reader.read_line(&mut line)?;
            continue;
        }
        if b.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(b);
    }
    String::from_utf8(token).map_err(|_| RasterError::MalformedHeader("non-ascii token".into()))
}

fn parse_header_number<R: BufRead, T: std::str::FromStr>(
    reader: &mut R,
    what: &str,
) -> Result<T, RasterError> {
    let tok = read_header_token(reader)?;
    tok.parse()
        .map_err(|_| RasterError::MalformedHeader(format!("bad {what}: {tok:?}")))
}

/// Binary image mask, row-major booleans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask dimensions mismatch");
        Self { width, height, bits }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    /// True when (x,y) is inside the mask and foreground; out-of-bounds reads as background.
    #[inline]
    pub fn get_checked(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.get(x as usize, y as usize)
    }

    pub fn count_foreground(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn foreground_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Euclidean dilation: foreground becomes all pixels within distance `r`
    /// of an original foreground pixel.
    pub fn dilate(&self, r: f64) -> BinaryMask {
        assert!(r >= 0.0, "dilation radius must be non-negative");
        if r == 0.0 {
            return self.clone();
        }
        let ri = r.floor() as i64;
        let r2 = r * r;
        let mut offsets = Vec::new();
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                if (dx * dx + dy * dy) as f64 <= r2 {
                    offsets.push((dx, dy));
                }
            }
        }
        let mut out = BinaryMask::empty(self.width, self.height);
        for (x, y) in self.foreground_pixels() {
            for &(dx, dy) in &offsets {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                    out.set(nx as usize, ny as usize, true);
                }
            }
        }
        out
    }

    /// 8-connectivity component labeling. Labels are contiguous from 1 in
    /// raster-scan discovery order; returns (label grid, component count).
    pub fn connected_components(&self) -> (Vec<u32>, u32) {
        let mut labels = vec![0u32; self.bits.len()];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) || labels[y * self.width + x] != 0 {
                    continue;
                }
                next += 1;
                labels[y * self.width + x] = next;
                stack.push((x, y));
                while let Some((cx, cy)) = stack.pop() {
                    for (nx, ny) in neighbors8(cx, cy, self.width, self.height) {
                        let idx = ny * self.width + nx;
                        if self.bits[idx] && labels[idx] == 0 {
                            labels[idx] = next;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
        }
        (labels, next)
    }

    /// Guo-Hall thinning followed by spur pruning; see [`Skeleton`].
    pub fn skeletonize(&self, min_spur: usize) -> Skeleton {
        let mut mask = self.clone();
        guo_hall_thin(&mut mask);
        prune_spurs(&mut mask, min_spur);
        Skeleton { mask }
    }
}

/// In-bounds 8-neighbors of (x,y).
pub fn neighbors8(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
) -> impl Iterator<Item = (usize, usize)> {
    const OFF: [(i64, i64); 8] = [
        (-1, -1),
        (0, -1),
        (1, -1),
        (-1, 0),
        (1, 0),
        (-1, 1),
        (0, 1),
        (1, 1),
    ];
    OFF.iter().filter_map(move |&(dx, dy)| {
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height {
            Some((nx as usize, ny as usize))
        } else {
            None
        }
    })
}

/// One-pixel-wide medial representation of a mask, with per-pixel 8-degree.
#[derive(Debug, Clone)]
pub struct Skeleton {
    mask: BinaryMask,
}

impl Skeleton {
    pub fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    pub fn width(&self) -> usize {
        self.mask.width
    }

    pub fn height(&self) -> usize {
        self.mask.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask.get(x, y)
    }

    /// Number of foreground 8-neighbors of a foreground pixel.
    pub fn degree(&self, x: usize, y: usize) -> usize {
        neighbors8(x, y, self.mask.width, self.mask.height)
            .filter(|&(nx, ny)| self.mask.get(nx, ny))
            .count()
    }

    pub fn foreground_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask.foreground_pixels()
    }
}

/// Guo-Hall two-subiteration thinning; deletions within a subiteration are
/// applied simultaneously. Iterates to a fixed point.
fn guo_hall_thin(mask: &mut BinaryMask) {
    let w = mask.width;
    let h = mask.height;
    let mut to_delete: Vec<(usize, usize)> = Vec::new();
    loop {
        let mut changed = false;
        for sub in 0..2 {
            to_delete.clear();
            for y in 0..h {
                for x in 0..w {
                    if mask.get(x, y) && guo_hall_deletable(mask, x as i64, y as i64, sub) {
                        to_delete.push((x, y));
                    }
                }
            }
            if !to_delete.is_empty() {
                changed = true;
                for &(x, y) in &to_delete {
                    mask.set(x, y, false);
                }
            }
        }
        if !changed {
            break;
        }
    }
}

#[inline]
fn guo_hall_deletable(mask: &BinaryMask, x: i64, y: i64, sub: usize) -> bool {
    // Neighbors clockwise from north, per the standard Guo-Hall formulation.
    let p2 = mask.get_checked(x, y - 1) as u32;
    let p3 = mask.get_checked(x + 1, y - 1) as u32;
    let p4 = mask.get_checked(x + 1, y) as u32;
    let p5 = mask.get_checked(x + 1, y + 1) as u32;
    let p6 = mask.get_checked(x, y + 1) as u32;
    let p7 = mask.get_checked(x - 1, y + 1) as u32;
    let p8 = mask.get_checked(x - 1, y) as u32;
    let p9 = mask.get_checked(x - 1, y - 1) as u32;

    let c = (1 - p2) * (p3 | p4) + (1 - p4) * (p5 | p6) + (1 - p6) * (p7 | p8) + (1 - p8) * (p9 | p2);
    let n1 = (p9 | p2) + (p3 | p4) + (p5 | p6) + (p7 | p8);
    let n2 = (p2 | p3) + (p4 | p5) + (p6 | p7) + (p8 | p9);
    let n = n1.min(n2);
    let m = if sub == 0 {
        (p6 | p7 | (1 - p9)) & p8
    } else {
        (p2 | p3 | (1 - p5)) & p4
    };
    c == 1 && (2..=3).contains(&n) && m == 0
}

/// Removes skeleton branches shorter than `min_spur` pixels that hang off a
/// junction. Isolated chains are kept so component counts are preserved.
fn prune_spurs(mask: &mut BinaryMask, min_spur: usize) {
    if min_spur < 2 {
        return;
    }
    let w = mask.width;
    let h = mask.height;
    loop {
        let degree = |m: &BinaryMask, x: usize, y: usize| -> usize {
            neighbors8(x, y, w, h).filter(|&(nx, ny)| m.get(nx, ny)).count()
        };
        let mut removed_any = false;
        let endpoints: Vec<(usize, usize)> = mask
            .foreground_pixels()
            .filter(|&(x, y)| degree(mask, x, y) == 1)
            .collect();
        for (ex, ey) in endpoints {
            if !mask.get(ex, ey) || degree(mask, ex, ey) != 1 {
                continue;
            }
            // Walk from the endpoint along degree-2 pixels until a junction.
            let mut branch = vec![(ex, ey)];
            let mut prev = (ex, ey);
            let mut cur = (ex, ey);
            let mut hit_junction = false;
            while branch.len() < min_spur {
                let next: Vec<(usize, usize)> = neighbors8(cur.0, cur.1, w, h)
                    .filter(|&(nx, ny)| mask.get(nx, ny) && (nx, ny) != prev)
                    .collect();
                match next.len() {
                    0 => break, // isolated chain, keep
                    1 => {
                        let n = next[0];
                        if degree(mask, n.0, n.1) >= 3 {
                            hit_junction = true;
                            break;
                        }
                        branch.push(n);
                        prev = cur;
                        cur = n;
                    }
                    _ => {
                        hit_junction = true;
                        break;
                    }
                }
            }
            if hit_junction && branch.len() < min_spur {
                for &(x, y) in &branch {
                    mask.set(x, y, false);
                }
                removed_any = true;
            }
        }
        if !removed_any {
            break;
        }
    }
}
