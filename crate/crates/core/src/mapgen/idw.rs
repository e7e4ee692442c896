use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::grid::GridGeometry;
use crate::Date;

pub const DEFAULT_POWER: f64 = 2.0;
/// Points closer than this are treated as the same location, in meters.
pub const COINCIDENCE_M: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Pm25Map {
    pub geometry: GridGeometry,
    pub date: Date,
    /// Row-major, row 0 at the north edge.
    pub values: Vec<f64>,
    pub n_ground: usize,
    pub n_quasi: usize,
}

/// Collapses coincident points to one point carrying their mean value.
/// Output is sorted by (east, north).
pub fn dedup_points(points: &[(f64, f64, f64)]) -> Vec<(f64, f64, f64)> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    });
    // (east, north, sum, count) per group.
    let mut groups: Vec<(f64, f64, f64, usize)> = Vec::new();
    for (e, n, v) in sorted {
        let mut hit = None;
        for (gi, g) in groups.iter().enumerate().rev() {
            if e - g.0 >= COINCIDENCE_M {
                break;
            }
            if libm::hypot(e - g.0, n - g.1) < COINCIDENCE_M {
                hit = Some(gi);
                break;
            }
        }
        match hit {
            Some(gi) => {
                groups[gi].2 += v;
                groups[gi].3 += 1;
            }
            None => groups.push((e, n, v, 1)),
        }
    }
    groups
        .into_iter()
        .map(|(e, n, s, c)| (e, n, s / c as f64))
        .collect()
}

/// Inverse-distance-weighted value at one location over deduplicated points.
pub fn idw_at(points: &[(f64, f64, f64)], east: f64, north: f64, power: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(e, n, v) in points {
        let d = libm::hypot(east - e, north - n);
        if d < COINCIDENCE_M {
            return v;
        }
        let w = libm::pow(d, -power);
        num += w * v;
        den += w;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (num / den).clamp(lo, hi)
}

/// IDW surface at every cell center.
pub fn idw_interpolate<E: Executor>(
    points: &[(f64, f64, f64)],
    geometry: &GridGeometry,
    power: f64,
    exec: &E,
) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::Empty("IDW needs at least one point".into()));
    }
    if points
        .iter()
        .any(|p| !(p.0.is_finite() && p.1.is_finite() && p.2.is_finite()))
    {
        return Err(Error::validation(
            "points",
            "non-finite coordinate or value",
        ));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::validation("idw power", "must be positive"));
    }
    let pts = dedup_points(points);
    let ncols = geometry.ncols;
    let rows: Vec<Vec<f64>> = exec.map(geometry.nrows, |r| {
        (0..ncols)
            .map(|c| {
                let (e, n) = geometry.cell_center(r, c);
                idw_at(&pts, e, n, power)
            })
            .collect()
    });
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::grid::geometry;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn single_point_is_constant() {
        let g = geometry(4, 5, 0.0, 0.0, 10.0);
        let m = idw_interpolate(&[(3.0, 7.0, 12.5)], &g, 2.0, &Sequential).unwrap();
        assert!(m.iter().all(|&v| v == 12.5));
    }

    #[test]
    fn hand_worked_weights() {
        let pts = [(1.0, 0.0, 10.0), (-2.0, 0.0, 40.0)];
        assert!((idw_at(&pts, 0.0, 0.0, 2.0) - 16.0).abs() < 1e-12);
        let sym = [(-3.0, 0.0, 10.0), (3.0, 0.0, 30.0)];
        assert_eq!(idw_at(&sym, 0.0, 5.0, 2.0), 20.0);
    }

    #[test]
    fn exact_at_points_and_duplicates_are_neutral() {
        let pts = vec![(5.0, 5.0, 1.0), (15.0, 25.0, 9.0), (35.0, 15.0, 4.0)];
        let g = geometry(4, 4, 0.0, 0.0, 10.0);
        let base = idw_interpolate(&pts, &g, 2.0, &Sequential).unwrap();
        assert_eq!(base[3 * 4], 1.0);
        let mut dup = pts.clone();
        dup.push(pts[1]);
        let again = idw_interpolate(&dup, &g, 2.0, &Sequential).unwrap();
        for (a, b) in base.iter().zip(&again) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn empty_input() {
        assert!(idw_interpolate(&[], &geometry(2, 2, 0.0, 0.0, 1.0), 2.0, &Sequential).is_err());
    }

    proptest! {
        #[test]
        fn bounded_by_inputs(pts in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0, -50.0f64..50.0), 1..12),
                             q in (0.0f64..100.0, 0.0f64..100.0)) {
            let d = dedup_points(&pts);
            let v = idw_at(&d, q.0, q.1, 2.0);
            let lo = pts.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo && v <= hi);
        }
    }
}
