use crate::error::{Error, Result};
use crate::grid::{AodGrid, Source};
use crate::Date;

/// AOD summary of the 3×3 window around a location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSample {
    pub source: Source,
    pub date: Date,
    pub east: f64,
    pub north: f64,
    pub mean_aod: f64,
    /// Population standard deviation of the valid pixels.
    pub std_aod: f64,
    /// Share of the nine window slots holding a QA==3 pixel.
    pub weight: f64,
    pub n_valid: u8,
    /// Whether the center pixel itself holds a retrieval.
    pub center_valid: bool,
    pub valid: bool,
}

/// Window around the pixel containing `(east, north)`.
pub fn extract_window(
    grid: &AodGrid,
    east: f64,
    north: f64,
    std_threshold: f64,
) -> Result<WindowSample> {
    let (row, col) = grid
        .geometry()
        .locate(east, north)
        .ok_or(Error::OutsideGrid { east, north })?;
    let mut s = extract_window_at(grid, row, col, std_threshold);
    s.east = east;
    s.north = north;
    Ok(s)
}

/// Window centered on a pixel. Slots falling off the grid count as missing;
/// the quality weight keeps its denominator of nine.
pub fn extract_window_at(
    grid: &AodGrid,
    row: usize,
    col: usize,
    std_threshold: f64,
) -> WindowSample {
    let (nrows, ncols) = (grid.nrows() as isize, grid.ncols() as isize);
    let mut vals = [0.0f64; 9];
    let mut n = 0usize;
    let mut n_best = 0u32;
    for dr in -1isize..=1 {
        for dc in -1isize..=1 {
            let (r, c) = (row as isize + dr, col as isize + dc);
            if r < 0 || c < 0 || r >= nrows || c >= ncols {
                continue;
            }
            if let Some(v) = grid.value(r as usize, c as usize) {
                vals[n] = v as f64;
                n += 1;
                if grid.qa_at(r as usize, c as usize) == 3 {
                    n_best += 1;
                }
            }
        }
    }
    let (mean, std) = if n == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let mean = vals[..n].iter().sum::<f64>() / n as f64;
        let var = vals[..n]
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n as f64;
        (mean, libm::sqrt(var))
    };
    let (east, north) = grid.geometry().cell_center(row, col);
    WindowSample {
        source: grid.source(),
        date: grid.date(),
        east,
        north,
        mean_aod: mean,
        std_aod: std,
        weight: n_best as f64 / 9.0,
        n_valid: n as u8,
        center_valid: grid.is_valid(row, col),
        valid: n > 0 && std <= std_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{geometry, Algorithm, Sensor, DEFAULT_NODATA};
    use alloc::vec;
    use alloc::vec::Vec;

    fn grid3(values: Vec<f32>, qa: Vec<u8>) -> AodGrid {
        AodGrid::new(
            geometry(3, 3, 0.0, 0.0, 1000.0),
            DEFAULT_NODATA,
            values,
            qa,
            Source::new(Sensor::ViirsSnpp, Algorithm::DeepBlue),
            Date::from_ymd_opt(2015, 4, 1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_window() {
        let g = grid3(vec![0.30; 9], vec![3; 9]);
        let s = extract_window(&g, 1500.0, 1500.0, 0.02).unwrap();
        assert!((s.mean_aod - 0.30).abs() < 1e-7);
        assert!(s.std_aod < 1e-7);
        assert_eq!(s.weight, 1.0);
        assert_eq!(s.n_valid, 9);
        assert!(s.valid);
    }

    #[test]
    fn dispersed_window_is_unreliable() {
        let g = grid3(
            vec![0.10, 0.50, 0.10, 0.50, 0.30, 0.20, 0.40, 0.15, 0.45],
            vec![3; 9],
        );
        let s = extract_window(&g, 1500.0, 1500.0, 0.02).unwrap();
        assert!(s.std_aod > 0.1);
        assert!(!s.valid);
        assert_eq!(s.weight, 1.0);
    }

    #[test]
    fn empty_window() {
        let g = grid3(vec![DEFAULT_NODATA; 9], vec![3; 9]);
        let s = extract_window(&g, 1500.0, 1500.0, 0.02).unwrap();
        assert_eq!(s.n_valid, 0);
        assert!(!s.valid);
        assert_eq!(s.weight, 0.0);
    }

    #[test]
    fn edge_window_keeps_denominator_nine() {
        let g = grid3(vec![0.2; 9], vec![3; 9]);
        let s = extract_window(&g, 10.0, 10.0, 0.02).unwrap();
        assert_eq!(s.n_valid, 4);
        assert_eq!(s.weight, 4.0 / 9.0);
    }

    #[test]
    fn outside_grid_errors() {
        let g = grid3(vec![0.2; 9], vec![3; 9]);
        assert!(matches!(
            extract_window(&g, -1.0, 10.0, 0.02),
            Err(Error::OutsideGrid { .. })
        ));
    }

    #[test]
    fn weight_counts_only_valid_best_pixels() {
        let mut vals = vec![0.2f32; 9];
        vals[0] = DEFAULT_NODATA;
        let g = grid3(vals, vec![3, 3, 3, 0, 1, 2, 0, 1, 2]);
        let s = extract_window_at(&g, 1, 1, 0.02);
        assert_eq!(s.weight, 2.0 / 9.0);
    }
}
