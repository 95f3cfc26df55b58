//! Binary-image primitives: phase grids, 4-connected cluster extraction,
//! interfaces, the Moore-ring wall count and the shape index.
//!
//! Black pixels (`true`) are the inclusion phase, white pixels the matrix.
//! Everything outside the domain is treated as white.

use std::collections::VecDeque;

use crate::error::{Result, TsrError};

/// Row/column pixel coordinate.
pub type Pixel = (usize, usize);

const FOUR: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

/// The Moore ring as a cycle of edge-adjacent cells: corner, side, corner, ...
pub(crate) const RING: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
];

/// Square two-phase image.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    side: usize,
    cells: Vec<bool>,
}

impl BinaryImage {
    /// All-white image of side `side`.
    pub fn new(side: usize) -> Result<Self> {
        if side == 0 {
            return Err(TsrError::EmptyImage);
        }
        Ok(Self {
            side,
            cells: vec![false; side * side],
        })
    }

    /// Builds an image from row-major cells; `cells.len()` must equal `side²`.
    pub fn from_cells(side: usize, cells: Vec<bool>) -> Result<Self> {
        if side == 0 {
            return Err(TsrError::EmptyImage);
        }
        if cells.len() != side * side {
            return Err(TsrError::SizeMismatch(cells.len(), side * side));
        }
        Ok(Self { side, cells })
    }

    /// Parses rows of `#`/`1` (black) and `.`/`0` (white). Handy for fixtures.
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let side = rows.len();
        let mut cells = Vec::with_capacity(side * side);
        for row in rows {
            let row: Vec<bool> = row
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| c == '#' || c == '1')
                .collect();
            if row.len() != side {
                return Err(TsrError::SizeMismatch(row.len(), side));
            }
            cells.extend(row);
        }
        Self::from_cells(side, cells)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.side + col]
    }

    /// Signed lookup; anything outside the domain is white.
    #[inline]
    pub fn get_signed(&self, row: isize, col: isize) -> bool {
        let side = self.side as isize;
        if row < 0 || col < 0 || row >= side || col >= side {
            false
        } else {
            self.cells[row as usize * self.side + col as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, black: bool) {
        self.cells[row * self.side + col] = black;
    }

    pub fn black_count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    /// Black-phase volume fraction φ.
    pub fn volume_fraction(&self) -> f64 {
        self.black_count() as f64 / self.cells.len() as f64
    }

    /// Paints `shape` black with its offset origin at `anchor`.
    /// Panics if the shape does not fit.
    pub fn stamp(&mut self, shape: &ClusterShape, anchor: Pixel) {
        for &(r, c) in shape.offsets() {
            self.set(anchor.0 + r, anchor.1 + c, true);
        }
    }

    /// Quarter turn clockwise.
    pub fn rotate90(&self) -> Self {
        let n = self.side;
        let mut out = vec![false; n * n];
        for r in 0..n {
            for c in 0..n {
                out[c * n + (n - 1 - r)] = self.get(r, c);
            }
        }
        Self { side: n, cells: out }
    }

    /// Left-right mirror.
    pub fn mirror(&self) -> Self {
        let n = self.side;
        let mut out = vec![false; n * n];
        for r in 0..n {
            for c in 0..n {
                out[r * n + (n - 1 - c)] = self.get(r, c);
            }
        }
        Self { side: n, cells: out }
    }
}

/// A compact cluster: pixel offsets normalized so that min row = min col = 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterShape {
    offsets: Vec<Pixel>,
    height: usize,
    width: usize,
    interface: usize,
    edge_pixels: Vec<Pixel>,
}

impl ClusterShape {
    /// Normalizes and validates a pixel set. Duplicates are ignored; the set
    /// must be non-empty and 4-connected (pores are allowed).
    pub fn from_pixels<I>(pixels: I) -> Result<Self>
    where
        I: IntoIterator<Item = (isize, isize)>,
    {
        let mut pts: Vec<(isize, isize)> = pixels.into_iter().collect();
        if pts.is_empty() {
            return Err(TsrError::EmptyPixelSet);
        }
        let min_r = pts.iter().map(|p| p.0).min().unwrap();
        let min_c = pts.iter().map(|p| p.1).min().unwrap();
        for p in &mut pts {
            p.0 -= min_r;
            p.1 -= min_c;
        }
        let mut offsets: Vec<Pixel> = pts.iter().map(|&(r, c)| (r as usize, c as usize)).collect();
        offsets.sort_unstable();
        offsets.dedup();
        let mask = Mask::new(&offsets);
        if !mask.is_connected() {
            return Err(TsrError::Disconnected);
        }
        let interface = mask.interface();
        let edge_pixels = mask.edge_pixels();
        Ok(Self {
            height: mask.height - 2,
            width: mask.width - 2,
            offsets,
            interface,
            edge_pixels,
        })
    }

    /// Full `height × width` rectangle.
    pub fn rectangle(height: usize, width: usize) -> Result<Self> {
        Self::from_pixels(
            (0..height as isize).flat_map(|r| (0..width as isize).map(move |c| (r, c))),
        )
    }

    /// Offsets in row-major order.
    pub fn offsets(&self) -> &[Pixel] {
        &self.offsets
    }

    pub fn area(&self) -> usize {
        self.offsets.len()
    }

    pub fn interface(&self) -> usize {
        self.interface
    }

    /// Pixels with at least one white 4-neighbor, row-major.
    pub fn edge_pixels(&self) -> &[Pixel] {
        &self.edge_pixels
    }

    /// Bounding-box height.
    pub fn height(&self) -> usize {
        self.height
    }

    /// Bounding-box width.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape_index(&self) -> f64 {
        // interface ≥ 4 for any non-empty set
        (self.area() as f64).sqrt() / self.interface as f64
    }

    pub fn distance_histogram(&self, bins: usize) -> Vec<u64> {
        distance_histogram(&self.edge_pixels, bins)
    }

    /// Number of white pixels enclosed by the cluster (not 8-connected to
    /// the exterior).
    pub fn pore_count(&self) -> usize {
        Mask::new(&self.offsets).pore_count()
    }
}

/// Padded bounding-box mask used for one-off shape computations.
struct Mask {
    height: usize,
    width: usize,
    cells: Vec<bool>,
}

impl Mask {
    fn new(offsets: &[Pixel]) -> Self {
        let height = offsets.iter().map(|p| p.0).max().unwrap_or(0) + 3;
        let width = offsets.iter().map(|p| p.1).max().unwrap_or(0) + 3;
        let mut cells = vec![false; height * width];
        for &(r, c) in offsets {
            cells[(r + 1) * width + c + 1] = true;
        }
        Self {
            height,
            width,
            cells,
        }
    }

    fn at(&self, r: usize, c: usize) -> bool {
        self.cells[r * self.width + c]
    }

    fn white_sides(&self, r: usize, c: usize) -> usize {
        FOUR.iter()
            .filter(|&&(dr, dc)| {
                !self.at((r as isize + dr) as usize, (c as isize + dc) as usize)
            })
            .count()
    }

    fn interface(&self) -> usize {
        let mut total = 0;
        for r in 1..self.height - 1 {
            for c in 1..self.width - 1 {
                if self.at(r, c) {
                    total += self.white_sides(r, c);
                }
            }
        }
        total
    }

    fn edge_pixels(&self) -> Vec<Pixel> {
        let mut out = Vec::new();
        for r in 1..self.height - 1 {
            for c in 1..self.width - 1 {
                if self.at(r, c) && self.white_sides(r, c) > 0 {
                    out.push((r - 1, c - 1));
                }
            }
        }
        out
    }

    fn flood(&self, start: usize, phase: bool, eight: bool) -> Vec<bool> {
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            let (r, c) = ((i / self.width) as isize, (i % self.width) as isize);
            for (dr, dc) in RING {
                if !eight && dr != 0 && dc != 0 {
                    continue;
                }
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= self.height as isize || nc >= self.width as isize {
                    continue;
                }
                let j = nr as usize * self.width + nc as usize;
                if !seen[j] && self.cells[j] == phase {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }

    fn is_connected(&self) -> bool {
        let Some(start) = self.cells.iter().position(|&b| b) else {
            return false;
        };
        let seen = self.flood(start, true, false);
        self.cells.iter().zip(&seen).all(|(&b, &s)| !b || s)
    }

    fn pore_count(&self) -> usize {
        // the padding ring is white and reaches the exterior
        let seen = self.flood(0, false, true);
        self.cells
            .iter()
            .zip(&seen)
            .filter(|(&b, &s)| !b && !s)
            .count()
    }
}

/// Extracts every maximal 4-connected black component, in order of first
/// discovery by a row-major scan. The anchor is the bounding-box origin.
pub fn label_clusters(image: &BinaryImage) -> Vec<(ClusterShape, Pixel)> {
    let n = image.side();
    let mut seen = vec![false; n * n];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n * n {
        if !image.cells[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / n, i % n);
            pixels.push((r as isize, c as isize));
            for (dr, dc) in FOUR {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if image.get_signed(nr, nc) {
                    let j = nr as usize * n + nc as usize;
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        let anchor = (
            pixels.iter().map(|p| p.0).min().unwrap() as usize,
            pixels.iter().map(|p| p.1).min().unwrap() as usize,
        );
        let shape = ClusterShape::from_pixels(pixels).expect("component is connected");
        out.push((shape, anchor));
    }
    out
}

/// Number of unit sides of member pixels facing a non-member.
pub fn interface_of(pixels: &[Pixel]) -> Result<usize> {
    if pixels.is_empty() {
        return Err(TsrError::EmptyPixelSet);
    }
    let min_r = pixels.iter().map(|p| p.0).min().unwrap();
    let min_c = pixels.iter().map(|p| p.1).min().unwrap();
    let shifted: Vec<Pixel> = pixels.iter().map(|&(r, c)| (r - min_r, c - min_c)).collect();
    Ok(Mask::new(&shifted).interface())
}

/// Black/white walls along the Moore ring of `pixel`, walked as a cycle.
/// Always even.
pub fn wall_count(image: &BinaryImage, pixel: Pixel) -> usize {
    let (r, c) = (pixel.0 as isize, pixel.1 as isize);
    ring_walls(|dr, dc| image.get_signed(r + dr, c + dc))
}

pub(crate) fn ring_walls(mut black: impl FnMut(isize, isize) -> bool) -> usize {
    let ring: [bool; 8] = RING.map(|(dr, dc)| black(dr, dc));
    (0..8).filter(|&i| ring[i] != ring[(i + 1) % 8]).count()
}

/// Histogram of edge-pixel center distances binned into `[i, i+1)`, with
/// everything ≥ `bins - 1` in the last bin. Bin 0 holds one self-count per
/// edge pixel.
pub fn distance_histogram(edges: &[Pixel], bins: usize) -> Vec<u64> {
    let bins = bins.max(1);
    let mut h = vec![0u64; bins];
    h[0] = edges.len() as u64;
    for (i, a) in edges.iter().enumerate() {
        for b in &edges[i + 1..] {
            let dr = a.0.abs_diff(b.0) as u64;
            let dc = a.1.abs_diff(b.1) as u64;
            let bin = (dr * dr + dc * dc).isqrt() as usize;
            h[bin.min(bins - 1)] += 1;
        }
    }
    h
}

/// q = sqrt(area) / interface.
pub fn shape_index(area: usize, interface: usize) -> Result<f64> {
    if interface == 0 {
        return Err(TsrError::ZeroInterface);
    }
    Ok((area as f64).sqrt() / interface as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring_image(ring: [bool; 8]) -> BinaryImage {
        let mut img = BinaryImage::new(3).unwrap();
        for (i, (dr, dc)) in RING.iter().enumerate() {
            img.set((1 + dr) as usize, (1 + dc) as usize, ring[i]);
        }
        img
    }

    #[test]
    fn empty_image_has_no_clusters() {
        let img = BinaryImage::new(4).unwrap();
        assert!(label_clusters(&img).is_empty());
    }

    #[test]
    fn zero_side_rejected() {
        assert!(matches!(BinaryImage::new(0), Err(TsrError::EmptyImage)));
    }

    #[test]
    fn single_pixel_cluster() {
        let mut img = BinaryImage::new(3).unwrap();
        img.set(1, 1, true);
        let clusters = label_clusters(&img);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].0.area(), 1);
        assert_eq!(clusters[0].0.interface(), 4);
        assert_eq!(clusters[0].1, (1, 1));
    }

    #[test]
    fn diagonal_contact_is_two_clusters() {
        let img = BinaryImage::from_ascii(&["#..", ".#.", "..."]).unwrap();
        assert_eq!(label_clusters(&img).len(), 2);
    }

    #[test]
    fn anchor_is_bbox_origin() {
        let img = BinaryImage::from_ascii(&["..#.", ".##.", "....", "...."]).unwrap();
        let clusters = label_clusters(&img);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].1, (0, 1));
        assert_eq!(clusters[0].0.offsets(), &[(0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn interface_examples() {
        assert_eq!(interface_of(&[(0, 0)]).unwrap(), 4);
        assert_eq!(interface_of(&[(0, 0), (0, 1)]).unwrap(), 6);
        assert_eq!(interface_of(&[(5, 7), (5, 8)]).unwrap(), 6);
        assert!(matches!(interface_of(&[]), Err(TsrError::EmptyPixelSet)));
    }

    #[test]
    fn interface_counts_pore_sides() {
        let ring = ClusterShape::from_pixels(
            (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).filter(|&p| p != (1, 1)),
        )
        .unwrap();
        assert_eq!(ring.interface(), 16);
        assert_eq!(ring.pore_count(), 1);
        assert_eq!(ring.edge_pixels().len(), 8);
    }

    #[test]
    fn disconnected_set_rejected() {
        let r = ClusterShape::from_pixels([(0, 0), (1, 1)]);
        assert!(matches!(r, Err(TsrError::Disconnected)));
    }

    #[test]
    fn wall_count_examples() {
        assert_eq!(wall_count(&ring_image([true; 8]), (1, 1)), 0);
        assert_eq!(wall_count(&ring_image([false; 8]), (1, 1)), 0);
        // one contiguous arc of three cells
        let arc = [true, true, true, false, false, false, false, false];
        assert_eq!(wall_count(&ring_image(arc), (1, 1)), 2);
        // two opposite side cells: the bar middle pixel
        let bar = [false, false, false, true, false, false, false, true];
        assert_eq!(wall_count(&ring_image(bar), (1, 1)), 4);
    }

    #[test]
    fn wall_count_outside_domain_is_white() {
        let img = BinaryImage::from_ascii(&["##", "##"]).unwrap();
        // ring of (0,0): only (0,1),(1,1),(1,0) are inside and black
        assert_eq!(wall_count(&img, (0, 0)), 2);
    }

    #[test]
    fn histogram_examples() {
        assert_eq!(distance_histogram(&[(3, 3)], 4), vec![1, 0, 0, 0]);
        let sq = ClusterShape::rectangle(2, 2).unwrap();
        assert_eq!(sq.edge_pixels().len(), 4);
        assert_eq!(sq.distance_histogram(3), vec![4, 6, 0]);
    }

    #[test]
    fn histogram_clamps_into_last_bin() {
        let h = distance_histogram(&[(0, 0), (0, 10)], 3);
        assert_eq!(h, vec![2, 0, 1]);
    }

    #[test]
    fn shape_index_examples() {
        for side in 1..=20 {
            let sq = ClusterShape::rectangle(side, side).unwrap();
            assert_eq!(sq.shape_index(), 0.25);
        }
        // continuous circle of radius 50: area πr², perimeter 2πr
        let q = shape_index(7854, 314).unwrap();
        assert!((q - 1.0 / (2.0 * std::f64::consts::PI.sqrt())).abs() < 1e-3);
        assert!((shape_index(143, 76).unwrap() - 0.157).abs() < 5e-4);
        assert!(matches!(shape_index(1, 0), Err(TsrError::ZeroInterface)));
    }

    #[test]
    fn rotation_and_mirror_roundtrip() {
        let img = BinaryImage::from_ascii(&["#..", "##.", "..#"]).unwrap();
        assert_eq!(img.rotate90().rotate90().rotate90().rotate90(), img);
        assert_eq!(img.mirror().mirror(), img);
        assert_ne!(img.rotate90(), img);
    }
}
