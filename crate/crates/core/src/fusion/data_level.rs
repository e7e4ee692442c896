use alloc::vec::Vec;

use crate::preprocess::WindowSample;

/// Share of the nine window slots holding a QA==3 retrieval; missing slots
/// count as non-3.
pub fn quality_weight(codes: &[Option<u8>; 9]) -> f64 {
    codes.iter().filter(|c| **c == Some(3)).count() as f64 / 9.0
}

/// Weighted mean of `(value, weight)` pairs with positive weight, or `None`
/// when no weight is positive. Terms are summed in sorted order so the result
/// does not depend on input order, and clamped to the contributing range.
pub fn fuse_weighted(items: &[(f64, f64)]) -> Option<f64> {
    let mut terms: Vec<(f64, f64)> = items.iter().copied().filter(|&(_, w)| w > 0.0).collect();
    if terms.is_empty() {
        return None;
    }
    terms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (mut num, mut den) = (0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (v, w) in terms {
        num += w * v;
        den += w;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Some((num / den).clamp(lo, hi))
}

/// Quality-weighted AOD over the valid windows of one (location, date).
pub fn fuse_data_level(samples: &[WindowSample]) -> Option<f64> {
    let items: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.valid)
        .map(|s| (s.mean_aod, s.weight))
        .collect();
    fuse_weighted(&items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weights() {
        assert_eq!(quality_weight(&[Some(3); 9]), 1.0);
        let mut c = [Some(1); 9];
        c[0] = Some(3);
        c[4] = Some(3);
        c[8] = Some(3);
        assert_eq!(quality_weight(&c), 1.0 / 3.0);
        c[1] = None;
        assert_eq!(quality_weight(&c), 1.0 / 3.0);
        assert_eq!(quality_weight(&[None; 9]), 0.0);
    }

    #[test]
    fn examples() {
        assert_eq!(fuse_weighted(&[(0.5, 1.0), (0.9, 0.0)]), Some(0.5));
        let w = 4.0 / 9.0;
        assert!((fuse_weighted(&[(0.4, w), (0.6, w)]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(fuse_weighted(&[(0.4, 0.0), (0.6, 0.0)]), None);
        assert_eq!(fuse_weighted(&[]), None);
    }

    proptest! {
        #[test]
        fn convex_and_order_free(items in proptest::collection::vec((0.0f64..5.0, 0u8..=9), 1..8)) {
            let items: Vec<(f64, f64)> = items.into_iter().map(|(v, k)| (v, k as f64 / 9.0)).collect();
            let fused = fuse_weighted(&items);
            let contributing: Vec<f64> = items.iter().filter(|i| i.1 > 0.0).map(|i| i.0).collect();
            prop_assert_eq!(fused.is_some(), !contributing.is_empty());
            if let Some(f) = fused {
                let lo = contributing.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = contributing.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(f >= lo && f <= hi);
                let mut rev = items.clone();
                rev.reverse();
                prop_assert_eq!(fuse_weighted(&rev), fused);
            }
        }
    }
}
