//! Gaze heatmaps: a 2D histogram over normalized screen space, separable
//! Gaussian smoothing, and highest-density-region (HDR) contour levels.
//!
//! Cells are stored row-major with row = y bin, so row 0 is the top of the
//! screen and images need no flipping.

use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::telemetry::SessionTimeline;

pub const DEFAULT_BINS: usize = 64;
pub const DEFAULT_BANDWIDTH: f64 = 2.0;
pub const DEFAULT_LEVELS: [f64; 4] = [0.25, 0.5, 0.75, 0.9];

/// Tolerance on cumulative mass when locating HDR thresholds.
const HDR_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub bins_x: usize,
    pub bins_y: usize,
    pub cells: Vec<f64>,
    pub normalized: bool,
}

impl DensityGrid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.bins_x + col]
    }

    pub fn mass(&self) -> f64 {
        self.cells.iter().sum()
    }

    fn normalize(&mut self) {
        let total = self.mass();
        if total > 0.0 {
            for c in &mut self.cells {
                *c /= total;
            }
        }
        self.normalized = true;
    }
}

fn bin(v: f64, n: usize) -> usize {
    ((v * n as f64) as usize).min(n - 1)
}

/// Normalized 2D histogram of `points` (x, y in `[0, 1]`).
pub fn histogram2d(points: &[(f64, f64)], bins_x: usize, bins_y: usize) -> Result<DensityGrid> {
    if bins_x == 0 || bins_y == 0 {
        return Err(Error::InvalidParams("histogram needs at least one bin per axis".into()));
    }
    if points.is_empty() {
        return Err(Error::NoValidGaze);
    }
    // integer counts keep the result independent of point order
    let mut counts = vec![0u64; bins_x * bins_y];
    for &(x, y) in points {
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return Err(Error::InvalidParams(format!("gaze point ({x}, {y}) outside [0,1]²")));
        }
        counts[bin(y, bins_y) * bins_x + bin(x, bins_x)] += 1;
    }
    let n = points.len() as f64;
    Ok(DensityGrid {
        bins_x,
        bins_y,
        cells: counts.into_iter().map(|c| c as f64 / n).collect(),
        normalized: true,
    })
}

/// Gaze positions of every gaze-valid tick.
pub fn gaze_points(tl: &SessionTimeline) -> Vec<(f64, f64)> {
    tl.ticks
        .iter()
        .filter(|t| t.gaze_valid)
        .map(|t| (t.gaze_x, t.gaze_y))
        .collect()
}

fn kernel(bandwidth: f64) -> Vec<f64> {
    let radius = (4.0 * bandwidth).ceil() as i64;
    let mut w: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * bandwidth * bandwidth)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Reflects an out-of-range index back into `0..n` (edge cell repeated).
fn reflect(mut j: i64, n: i64) -> usize {
    loop {
        if j < 0 {
            j = -1 - j;
        } else if j >= n {
            j = 2 * n - 1 - j;
        } else {
            return j as usize;
        }
    }
}

/// Scatters each line of `src` through `w`; `stride` walks along the line,
/// `lines` enumerates line starts.
fn convolve_axis(src: &[f64], dst: &mut [f64], len: usize, stride: usize, starts: impl Iterator<Item = usize>, w: &[f64]) {
    let radius = (w.len() / 2) as i64;
    for start in starts {
        for i in 0..len {
            let v = src[start + i * stride];
            if v == 0.0 {
                continue;
            }
            for (k, wk) in w.iter().enumerate() {
                let j = reflect(i as i64 + k as i64 - radius, len as i64);
                dst[start + j * stride] += v * wk;
            }
        }
    }
}

/// Separable Gaussian smoothing with the kernel truncated at four
/// bandwidths. Mass that would leave the grid is reflected back in, and the
/// result is renormalized to sum 1.
pub fn gaussian_smooth(grid: &DensityGrid, bandwidth_cells: f64) -> Result<DensityGrid> {
    if !(bandwidth_cells > 0.0 && bandwidth_cells.is_finite()) {
        return Err(Error::InvalidParams(format!("bandwidth {bandwidth_cells} must be positive")));
    }
    let (bx, by) = (grid.bins_x, grid.bins_y);
    let w = kernel(bandwidth_cells);
    let mut horiz = vec![0.0; bx * by];
    convolve_axis(&grid.cells, &mut horiz, bx, 1, (0..by).map(|r| r * bx), &w);
    let mut out = vec![0.0; bx * by];
    convolve_axis(&horiz, &mut out, by, bx, 0..bx, &w);
    let mut smoothed = DensityGrid { bins_x: bx, bins_y: by, cells: out, normalized: false };
    smoothed.normalize();
    Ok(smoothed)
}

/// For each `p`, the largest density `t` such that cells with density
/// `>= t` hold at least `p` of the mass.
pub fn hdr_thresholds(grid: &DensityGrid, probabilities: &[f64]) -> Result<Vec<f64>> {
    let mut sorted: Vec<f64> = grid.cells.iter().copied().filter(|&c| c > 0.0).collect();
    if sorted.is_empty() {
        return Err(Error::NoValidGaze);
    }
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    for &c in &sorted {
        acc += c;
        cumulative.push(acc);
    }
    probabilities
        .iter()
        .map(|&p| {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParams(format!("HDR probability {p} outside (0,1]")));
            }
            let i = cumulative.partition_point(|&m| m < p - HDR_EPS).min(sorted.len() - 1);
            Ok(sorted[i])
        })
        .collect()
}

/// Number of cells inside the HDR for `threshold`.
pub fn hdr_cell_count(grid: &DensityGrid, threshold: f64) -> usize {
    grid.cells.iter().filter(|&&c| c >= threshold).count()
}

/// Band of a density: how many thresholds it reaches.
pub fn band_index(density: f64, thresholds: &[f64]) -> usize {
    thresholds.iter().filter(|&&t| t <= density).count()
}

/// Binary PGM (P5), one pixel per cell. Gray level rises with band index;
/// cells outside every region are black.
pub fn render_pgm(grid: &DensityGrid, thresholds: &[f64]) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.bins_x, grid.bins_y).into_bytes();
    let bands = thresholds.len().max(1);
    out.extend(grid.cells.iter().map(|&d| {
        let b = band_index(d, thresholds);
        ((b * 255) / bands) as u8
    }));
    out
}

/// `row,col,density` with densities at nine significant digits.
pub fn density_csv(grid: &DensityGrid) -> String {
    let mut s = String::from("row,col,density\n");
    for r in 0..grid.bins_y {
        for c in 0..grid.bins_x {
            s.push_str(&format!("{r},{c},{}\n", sig9(grid.get(r, c))));
        }
    }
    s
}

pub fn parse_density_csv(text: &str) -> Result<DensityGrid> {
    let mut entries = Vec::new();
    for rec in crate::telemetry::parse_records(text, &["row", "col", "density"])? {
        let (line, fields) = rec?;
        let bad = |what: &str| Error::MalformedLine { line, reason: format!("bad {what}") };
        let r: usize = fields[0].parse().map_err(|_| bad("row"))?;
        let c: usize = fields[1].parse().map_err(|_| bad("col"))?;
        let d: f64 = fields[2].parse().map_err(|_| bad("density"))?;
        entries.push((r, c, d));
    }
    let bins_y = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let bins_x = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    if entries.len() != bins_x * bins_y {
        return Err(Error::MalformedLine { line: 1, reason: "density grid is not rectangular".into() });
    }
    let mut cells = vec![0.0; bins_x * bins_y];
    for (r, c, d) in entries {
        cells[r * bins_x + c] = d;
    }
    Ok(DensityGrid { bins_x, bins_y, cells, normalized: true })
}

/// Histogram, smoothing and HDR thresholds in one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub grid: DensityGrid,
    pub levels: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl Heatmap {
    pub fn build(points: &[(f64, f64)], bins: usize, bandwidth: f64, levels: &[f64]) -> Result<Heatmap> {
        let grid = gaussian_smooth(&histogram2d(points, bins, bins)?, bandwidth)?;
        let thresholds = hdr_thresholds(&grid, levels)?;
        Ok(Heatmap { grid, levels: levels.to_vec(), thresholds })
    }

    /// Cells in the HDR of `levels[i]`.
    pub fn region_cells(&self, i: usize) -> usize {
        hdr_cell_count(&self.grid, self.thresholds[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn delta(bins: usize, row: usize, col: usize) -> DensityGrid {
        let mut cells = vec![0.0; bins * bins];
        cells[row * bins + col] = 1.0;
        DensityGrid { bins_x: bins, bins_y: bins, cells, normalized: true }
    }

    fn random_grid(seed: u64, bins: usize) -> DensityGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = DensityGrid {
            bins_x: bins,
            bins_y: bins,
            cells: (0..bins * bins).map(|_| rng.random::<f64>().powi(3)).collect(),
            normalized: false,
        };
        g.normalize();
        g
    }

    #[test]
    fn single_point_is_a_delta() {
        let g = histogram2d(&[(0.5, 0.5)], 64, 64).unwrap();
        assert_eq!(g.get(32, 32), 1.0);
        assert_eq!(g.cells.iter().filter(|&&c| c > 0.0).count(), 1);
    }

    #[test]
    fn unit_coordinates_land_in_last_cell() {
        let g = histogram2d(&[(1.0, 1.0), (0.0, 0.0)], 4, 4).unwrap();
        assert_eq!(g.get(3, 3), 0.5);
        assert_eq!(g.get(0, 0), 0.5);
    }

    #[test]
    fn histogram_errors() {
        assert!(matches!(histogram2d(&[], 8, 8), Err(Error::NoValidGaze)));
        assert!(histogram2d(&[(1.2, 0.0)], 8, 8).is_err());
    }

    #[test]
    fn uniform_points_stay_near_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<(f64, f64)> = (0..1_000_000).map(|_| (rng.random(), rng.random())).collect();
        let g = histogram2d(&pts, 64, 64).unwrap();
        let mean = 1.0 / 4096.0;
        assert!(g.cells.iter().all(|&c| c < 3.0 * mean));
        assert!((g.mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn smoothing_a_delta_is_symmetric() {
        let s = gaussian_smooth(&delta(64, 32, 32), 2.0).unwrap();
        let center = s.get(32, 32);
        assert!(center < 1.0);
        for d in 1..6 {
            let up = s.get(32 - d, 32);
            assert!(up < s.get(32 - d + 1, 32));
            for v in [s.get(32 + d, 32), s.get(32, 32 - d), s.get(32, 32 + d)] {
                assert!((v - up).abs() < 1e-15);
            }
        }
        assert!((s.mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn corner_mass_is_reflected_not_lost() {
        let s = gaussian_smooth(&delta(16, 0, 0), 3.0).unwrap();
        assert!((s.mass() - 1.0).abs() < 1e-12);
        assert_eq!(s.get(0, 0), s.cells.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn smoothing_twice_matches_wider_kernel() {
        let b = 2.0;
        let blob = gaussian_smooth(&delta(64, 32, 32), 1.0).unwrap();
        let twice = gaussian_smooth(&gaussian_smooth(&blob, b).unwrap(), b).unwrap();
        let once = gaussian_smooth(&blob, b * 2f64.sqrt()).unwrap();
        for r in 16..48 {
            for c in 16..48 {
                assert!((twice.get(r, c) - once.get(r, c)).abs() < 1e-6, "({r},{c})");
            }
        }
    }

    #[test]
    fn full_mass_threshold_covers_every_positive_cell() {
        let g = random_grid(3, 8);
        let t = hdr_thresholds(&g, &[1.0]).unwrap()[0];
        let min_pos = g.cells.iter().copied().filter(|&c| c > 0.0).fold(f64::INFINITY, f64::min);
        assert!(t <= min_pos);
    }

    #[test]
    fn two_cell_hdr() {
        let g = DensityGrid { bins_x: 2, bins_y: 1, cells: vec![0.8, 0.2], normalized: true };
        assert_eq!(hdr_thresholds(&g, &[0.5]).unwrap(), vec![0.8]);
        assert_eq!(hdr_thresholds(&g, &[0.9]).unwrap(), vec![0.2]);
    }

    /// Tries every cell value as a threshold, largest first.
    fn brute_force_hdr(g: &DensityGrid, p: f64) -> f64 {
        let mut candidates = g.cells.clone();
        candidates.sort_by(|a, b| b.total_cmp(a));
        candidates.dedup();
        for t in candidates {
            let mass: f64 = g.cells.iter().filter(|&&c| c >= t).sum();
            if mass >= p - HDR_EPS {
                return t;
            }
        }
        unreachable!()
    }

    #[test]
    fn hdr_matches_exhaustive_scan() {
        for seed in 0..20 {
            let g = random_grid(seed, 12);
            let got = hdr_thresholds(&g, &DEFAULT_LEVELS).unwrap();
            for (&p, &t) in DEFAULT_LEVELS.iter().zip(&got) {
                assert_eq!(t, brute_force_hdr(&g, p));
                let mass: f64 = g.cells.iter().filter(|&&c| c >= t).sum();
                assert!(mass >= p - HDR_EPS);
            }
            assert!(got.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn pgm_geometry_and_monotone_bands() {
        let g = gaussian_smooth(&delta(64, 20, 40), 2.0).unwrap();
        let t = hdr_thresholds(&g, &DEFAULT_LEVELS).unwrap();
        let img = render_pgm(&g, &t);
        let header = b"P5\n64 64\n255\n";
        assert_eq!(&img[..header.len()], header);
        let pixels = &img[header.len()..];
        assert_eq!(pixels.len(), 64 * 64);
        let mut pairs: Vec<(f64, u8)> = g.cells.iter().copied().zip(pixels.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(pixels[20 * 64 + 40], 255);
    }

    #[test]
    fn single_level_gives_single_band() {
        let g = gaussian_smooth(&delta(16, 8, 8), 2.0).unwrap();
        let t = hdr_thresholds(&g, &[0.5]).unwrap();
        let img = render_pgm(&g, &t);
        let mut levels: Vec<u8> = img[b"P5\n16 16\n255\n".len()..].to_vec();
        levels.sort();
        levels.dedup();
        assert_eq!(levels, vec![0, 255]);
    }

    #[test]
    fn density_csv_round_trip() {
        let g = random_grid(9, 10);
        let back = parse_density_csv(&density_csv(&g)).unwrap();
        assert_eq!((back.bins_x, back.bins_y), (10, 10));
        for (a, b) in g.cells.iter().zip(&back.cells) {
            assert!(((a - b) / a).abs() < 5e-9);
        }
    }

    proptest! {
        #[test]
        fn histogram_ignores_point_order(pts in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 1..200), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = pts.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let a = histogram2d(&pts, 16, 16).unwrap();
            let b = histogram2d(&shuffled, 16, 16).unwrap();
            prop_assert!(a.cells.iter().zip(&b.cells).all(|(x, y)| x.to_bits() == y.to_bits()));
        }

        #[test]
        fn pipeline_conserves_mass(pts in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 1..200), bw in 0.3..6.0f64) {
            let g = gaussian_smooth(&histogram2d(&pts, 32, 32).unwrap(), bw).unwrap();
            prop_assert!((g.mass() - 1.0).abs() < 1e-6);
            prop_assert!(g.cells.iter().all(|&c| c >= 0.0));
        }

        #[test]
        fn hdr_regions_nest(seed in any::<u64>(), p1 in 0.01..1.0f64, p2 in 0.01..1.0f64) {
            let g = random_grid(seed, 10);
            let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
            let t = hdr_thresholds(&g, &[lo, hi]).unwrap();
            for &c in &g.cells {
                prop_assert!(c < t[0] || c >= t[1]);
            }
        }
    }
}
