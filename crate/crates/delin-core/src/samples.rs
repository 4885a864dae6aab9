//! Labeled path-sample generation for external classifier training.
//!
//! Candidate paths come from the overcomplete graph built on the tubularity
//! map, not from the ground truth, so the samples resemble what scoring sees
//! at inference time. A path is positive iff strictly more than 90% of its
//! pixels lie on the (tolerance-dilated) ground-truth mask.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::astar::Pixel;
use crate::graph::{build_overcomplete_graph, fmt_f64, ExtractParams, GraphError};
use crate::raster::{BinaryMask, RasterError, ScalarGrid};

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("empty polyline")]
    EmptyPolyline,
    #[error("polyline pixel ({0}, {1}) out of bounds")]
    OutOfBounds(i64, i64),
    #[error("polyline bounding box {0}x{1} exceeds patch size {2}; split first")]
    TooLargeForPatch(i64, i64, usize),
    #[error("grid {0}x{1} and ground truth {2}x{3} dimensions differ")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Strictly-greater-than overlap fraction separating positive from negative.
pub const POSITIVE_OVERLAP: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleLabel {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    /// Path in image coordinates.
    pub polyline: Vec<Pixel>,
    pub label: SampleLabel,
    /// Fraction of path pixels on the dilated ground truth.
    pub overlap: f64,
    /// Top-left corner of the written patch in image coordinates.
    pub patch_origin: Pixel,
    /// Patch file path, relative to the output directory.
    pub patch_path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleParams {
    pub extract: ExtractParams,
    /// Ground-truth dilation tolerance in pixels.
    pub rho: f64,
    /// Patch side length for cropping.
    pub patch_size: usize,
}

impl SampleParams {
    pub fn new(extract: ExtractParams) -> Self {
        Self { extract, rho: 1.0, patch_size: 256 }
    }
}

/// Fraction of polyline pixels on the foreground of `gt` dilated by `rho`.
pub fn overlap_fraction(polyline: &[Pixel], gt: &BinaryMask, rho: f64) -> Result<f64, SampleError> {
    let dilated = gt.dilate(rho);
    overlap_fraction_pre_dilated(polyline, &dilated)
}

/// As [`overlap_fraction`] but against an already-dilated mask, so callers
/// labeling many paths dilate once.
pub fn overlap_fraction_pre_dilated(
    polyline: &[Pixel],
    dilated_gt: &BinaryMask,
) -> Result<f64, SampleError> {
    if polyline.is_empty() {
        return Err(SampleError::EmptyPolyline);
    }
    let mut on = 0usize;
    for &(x, y) in polyline {
        if x < 0 || y < 0 || x as usize >= dilated_gt.width() || y as usize >= dilated_gt.height() {
            return Err(SampleError::OutOfBounds(x, y));
        }
        if dilated_gt.get(x as usize, y as usize) {
            on += 1;
        }
    }
    Ok(on as f64 / polyline.len() as f64)
}

/// Positive iff overlap fraction is strictly greater than 0.9.
pub fn label_path(polyline: &[Pixel], gt: &BinaryMask, rho: f64) -> Result<SampleLabel, SampleError> {
    let f = overlap_fraction(polyline, gt, rho)?;
    Ok(label_for_overlap(f))
}

pub fn label_for_overlap(overlap: f64) -> SampleLabel {
    if overlap > POSITIVE_OVERLAP {
        SampleLabel::Positive
    } else {
        SampleLabel::Negative
    }
}

fn bbox(polyline: &[Pixel]) -> (i64, i64, i64, i64) {
    let x0 = polyline.iter().map(|p| p.0).min().unwrap();
    let x1 = polyline.iter().map(|p| p.0).max().unwrap();
    let y0 = polyline.iter().map(|p| p.1).min().unwrap();
    let y1 = polyline.iter().map(|p| p.1).max().unwrap();
    (x0, y0, x1, y1)
}

/// Greedy left-to-right split into contiguous pieces whose bounding-box side
/// length (coordinate extent) stays <= max_span. Consecutive pieces share
/// their junction pixel, so concatenation reproduces the original.
pub fn split_path(polyline: &[Pixel], max_span: i64) -> Vec<Vec<Pixel>> {
    assert!(max_span >= 2, "max_span must be >= 2");
    if polyline.is_empty() {
        return Vec::new();
    }
    let mut pieces = Vec::new();
    let mut start = 0usize;
    while start < polyline.len() - 1 || (start == 0 && polyline.len() == 1) {
        let (mut x0, mut y0, mut x1, mut y1) =
            (polyline[start].0, polyline[start].1, polyline[start].0, polyline[start].1);
        let mut end = start;
        while end + 1 < polyline.len() {
            let p = polyline[end + 1];
            let nx0 = x0.min(p.0);
            let nx1 = x1.max(p.0);
            let ny0 = y0.min(p.1);
            let ny1 = y1.max(p.1);
            if (nx1 - nx0) > max_span || (ny1 - ny0) > max_span {
                break;
            }
            x0 = nx0;
            x1 = nx1;
            y0 = ny0;
            y1 = ny1;
            end += 1;
        }
        pieces.push(polyline[start..=end].to_vec());
        if end == polyline.len() - 1 {
            break;
        }
        start = end; // shared junction pixel
    }
    pieces
}

/// Crops a size x size patch centered on the polyline's bounding-box center.
/// Pixels outside the image read as zero. Returns the patch, the polyline in
/// patch-local coordinates, and the patch origin in image coordinates.
pub fn crop_patch(
    grid: &ScalarGrid,
    polyline: &[Pixel],
    size: usize,
) -> Result<(ScalarGrid, Vec<Pixel>, Pixel), SampleError> {
    if polyline.is_empty() {
        return Err(SampleError::EmptyPolyline);
    }
    for &(x, y) in polyline {
        if !grid.in_bounds(x, y) {
            return Err(SampleError::OutOfBounds(x, y));
        }
    }
    let (x0, y0, x1, y1) = bbox(polyline);
    if (x1 - x0) >= size as i64 || (y1 - y0) >= size as i64 {
        return Err(SampleError::TooLargeForPatch(x1 - x0 + 1, y1 - y0 + 1, size));
    }
    let cx = (x0 + x1) / 2;
    let cy = (y0 + y1) / 2;
    let ox = cx - size as i64 / 2;
    let oy = cy - size as i64 / 2;
    let mut values = vec![0.0; size * size];
    for py in 0..size as i64 {
        for px in 0..size as i64 {
            let ix = ox + px;
            let iy = oy + py;
            if grid.in_bounds(ix, iy) {
                values[(py as usize) * size + px as usize] = grid.get(ix as usize, iy as usize);
            }
        }
    }
    let patch = ScalarGrid::new(size, size, values)?;
    let local = polyline.iter().map(|&(x, y)| (x - ox, y - oy)).collect();
    Ok((patch, local, (ox, oy)))
}

/// Builds the overcomplete graph on the tubularity map, labels every edge
/// path against the ground truth, splits paths to patch span, writes patch
/// PGMs under `outdir/patches/` and returns the manifest in (u,v) order.
pub fn generate_samples(
    grid: &ScalarGrid,
    gt: &BinaryMask,
    params: &SampleParams,
    outdir: &Path,
) -> Result<Vec<PathSample>, SampleError> {
    if grid.width() != gt.width() || grid.height() != gt.height() {
        return Err(SampleError::DimensionMismatch(
            grid.width(),
            grid.height(),
            gt.width(),
            gt.height(),
        ));
    }
    let graph = build_overcomplete_graph(grid, &params.extract)?;
    let dilated = gt.dilate(params.rho);
    let patches_dir = outdir.join("patches");
    std::fs::create_dir_all(&patches_dir)?;

    let mut edges: Vec<_> = graph.edges.iter().collect();
    edges.sort_by_key(|e| (e.u.min(e.v), e.u.max(e.v)));

    let mut samples = Vec::new();
    for edge in edges {
        for piece in split_path(&edge.polyline, params.patch_size as i64 - 1) {
            let overlap = overlap_fraction_pre_dilated(&piece, &dilated)?;
            let (patch, _local, origin) = crop_patch(grid, &piece, params.patch_size)?;
            let rel = PathBuf::from(format!("patches/{:06}.pgm", samples.len()));
            patch.save_pgm(outdir.join(&rel), 255)?;
            samples.push(PathSample {
                polyline: piece,
                label: label_for_overlap(overlap),
                overlap,
                patch_origin: origin,
                patch_path: rel,
            });
        }
    }
    Ok(samples)
}

/// Writes the JSON-lines manifest, one sample object per line.
pub fn write_manifest<W: Write>(samples: &[PathSample], w: &mut W) -> Result<(), SampleError> {
    for s in samples {
        write!(w, "{{\"polyline\":[")?;
        for (i, p) in s.polyline.iter().enumerate() {
            if i > 0 {
                write!(w, ",")?;
            }
            write!(w, "[{},{}]", p.0, p.1)?;
        }
        writeln!(
            w,
            "],\"label\":{},\"overlap\":{},\"patch\":\"{}\",\"origin\":[{},{}]}}",
            if s.label == SampleLabel::Positive { 1 } else { 0 },
            fmt_f64(s.overlap),
            s.patch_path.display(),
            s.patch_origin.0,
            s.patch_origin.1
        )?;
    }
    Ok(())
}

pub fn save_manifest(samples: &[PathSample], path: &Path) -> Result<(), SampleError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write_manifest(samples, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_trivial_cases() {
        let mut gt = BinaryMask::empty(20, 5);
        for x in 0..20 {
            gt.set(x, 2, true);
        }
        let inside: Vec<Pixel> = (0..20).map(|x| (x, 2)).collect();
        assert_eq!(overlap_fraction(&inside, &gt, 0.0).unwrap(), 1.0);
        let outside: Vec<Pixel> = (0..20).map(|x| (x, 4)).collect();
        assert_eq!(overlap_fraction(&outside, &gt, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn overlap_boundary_is_strict() {
        // 10-pixel path with 9 on ground truth: exactly 0.9 -> negative
        let mut gt = BinaryMask::empty(12, 3);
        for x in 0..9 {
            gt.set(x, 1, true);
        }
        let path: Vec<Pixel> = (0..10).map(|x| (x, 1)).collect();
        let f = overlap_fraction(&path, &gt, 0.0).unwrap();
        assert_eq!(f, 0.9);
        assert_eq!(label_for_overlap(f), SampleLabel::Negative);
        assert_eq!(label_for_overlap(0.91), SampleLabel::Positive);
    }

    #[test]
    fn off_centerline_path_is_positive() {
        // 5-pixel-wide band; a path offset by one pixel stays positive
        let mut gt = BinaryMask::empty(40, 11);
        for y in 3..8 {
            for x in 0..40 {
                gt.set(x, y, true);
            }
        }
        let offset: Vec<Pixel> = (0..40).map(|x| (x, 4)).collect();
        assert_eq!(label_path(&offset, &gt, 0.0).unwrap(), SampleLabel::Positive);
    }

    #[test]
    fn chord_between_structures_is_negative() {
        // two parallel lanes; a straight chord crossing between them is mostly
        // off ground truth
        let mut gt = BinaryMask::empty(40, 30);
        for x in 0..40 {
            gt.set(x, 5, true);
            gt.set(x, 25, true);
        }
        let chord: Vec<Pixel> = (0..21).map(|i| (10 + i / 2, 5 + i)).collect();
        assert_eq!(label_path(&chord, &gt, 1.0).unwrap(), SampleLabel::Negative);
    }

    #[test]
    fn split_identity_when_fitting() {
        let path: Vec<Pixel> = (0..10).map(|x| (x, 0)).collect();
        let pieces = split_path(&path, 20);
        assert_eq!(pieces, vec![path]);
    }

    #[test]
    fn split_straight_path_into_three() {
        // span 2.5 * max_span: coordinate extent 250 with max_span 100
        let path: Vec<Pixel> = (0..=250).map(|x| (x, 0)).collect();
        let pieces = split_path(&path, 100);
        assert_eq!(pieces.len(), 3);
        for p in &pieces {
            let (x0, _, x1, _) = super::bbox(p);
            assert!(x1 - x0 <= 100);
        }
    }

    #[test]
    fn split_concatenation_identity() {
        let path: Vec<Pixel> = (0..200)
            .map(|i| (i, ((i as f64 / 10.0).sin() * 20.0) as i64 + 30))
            .collect();
        // not 8-adjacent everywhere, but split only cares about spans
        let pieces = split_path(&path, 37);
        let mut rebuilt = pieces[0].clone();
        for p in &pieces[1..] {
            assert_eq!(rebuilt.last(), p.first(), "pieces share junction pixel");
            rebuilt.extend_from_slice(&p[1..]);
        }
        assert_eq!(rebuilt, path);
    }

    #[test]
    fn crop_center_no_padding() {
        let grid = ScalarGrid::filled(100, 100, 0.25);
        let path: Vec<Pixel> = (45..56).map(|x| (x, 50)).collect();
        let (patch, local, origin) = crop_patch(&grid, &path, 32).unwrap();
        assert_eq!(origin, (50 - 16, 50 - 16));
        assert!(patch.values().iter().all(|&v| v == 0.25));
        for (l, p) in local.iter().zip(&path) {
            assert_eq!((l.0 + origin.0, l.1 + origin.1), *p);
        }
    }

    #[test]
    fn crop_corner_zero_padded() {
        let grid = ScalarGrid::filled(50, 50, 1.0);
        let path: Vec<Pixel> = vec![(0, 0), (1, 0), (2, 0)];
        let (patch, _local, origin) = crop_patch(&grid, &path, 32).unwrap();
        assert!(origin.0 < 0 && origin.1 < 0);
        // the out-of-image area is exactly zero
        assert_eq!(patch.get(0, 0), 0.0);
        let in_x = (-origin.0) as usize;
        let in_y = (-origin.1) as usize;
        assert_eq!(patch.get(in_x, in_y), 1.0);
    }

    #[test]
    fn crop_rejects_oversized() {
        let grid = ScalarGrid::filled(100, 100, 0.5);
        let path: Vec<Pixel> = (0..90).map(|x| (x, 0)).collect();
        assert!(matches!(
            crop_patch(&grid, &path, 32),
            Err(SampleError::TooLargeForPatch(..))
        ));
    }

    #[test]
    fn generate_from_zero_tubularity_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let grid = ScalarGrid::filled(64, 64, 0.0);
        let gt = BinaryMask::empty(64, 64);
        let params = SampleParams::new(ExtractParams::with_d_k(30, 1.5));
        let samples = generate_samples(&grid, &gt, &params, dir.path()).unwrap();
        assert!(samples.is_empty());
    }

    #[test]
    fn generated_samples_satisfy_label_invariant() {
        let dir = tempfile::tempdir().unwrap();
        // straight bar as both tubularity and ground truth
        let mut values = vec![0.0; 96 * 32];
        let mut gt = BinaryMask::empty(96, 32);
        for x in 4..92usize {
            for y in 14..19usize {
                values[y * 96 + x] = 1.0;
                gt.set(x, y, true);
            }
        }
        let grid = ScalarGrid::new(96, 32, values).unwrap();
        let mut params = SampleParams::new(ExtractParams::with_d_k(30, 1.5));
        params.patch_size = 64;
        let samples = generate_samples(&grid, &gt, &params, dir.path()).unwrap();
        assert!(!samples.is_empty());
        let dilated = gt.dilate(params.rho);
        for s in &samples {
            let f = overlap_fraction_pre_dilated(&s.polyline, &dilated).unwrap();
            assert_eq!(f, s.overlap);
            assert_eq!(s.label, label_for_overlap(f));
            assert!(dir.path().join(&s.patch_path).exists());
        }
        // the bar renders perfectly, so on-structure samples are all positive
        assert!(samples.iter().any(|s| s.label == SampleLabel::Positive));
    }

    #[test]
    fn manifest_format() {
        let samples = vec![PathSample {
            polyline: vec![(1, 2), (2, 2)],
            label: SampleLabel::Positive,
            overlap: 0.97,
            patch_origin: (0, 0),
            patch_path: PathBuf::from("patches/000000.pgm"),
        }];
        let mut buf = Vec::new();
        write_manifest(&samples, &mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        let expected_overlap = crate::graph::fmt_f64(0.97);
        assert!(line.starts_with(&format!(
            "{{\"polyline\":[[1,2],[2,2]],\"label\":1,\"overlap\":{expected_overlap}"
        )));
        assert_eq!(expected_overlap.parse::<f64>().unwrap(), 0.97);
        assert!(line.trim_end().ends_with("\"patch\":\"patches/000000.pgm\",\"origin\":[0,0]}"));
    }
}
