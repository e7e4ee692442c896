use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `100 · valid / domain`.
pub fn coverage_percent(valid: usize, domain: usize) -> Result<f64> {
    if domain == 0 {
        return Err(Error::Empty("coverage domain is empty".into()));
    }
    Ok(100.0 * valid as f64 / domain as f64)
}

pub fn mask_coverage(mask: &[bool]) -> Result<f64> {
    coverage_percent(mask.iter().filter(|&&v| v).count(), mask.len())
}

/// Element-wise OR of equally sized masks.
pub fn union_mask(masks: &[&[bool]]) -> Result<Vec<bool>> {
    let first = masks
        .first()
        .ok_or_else(|| Error::Empty("no masks to unite".into()))?;
    let mut out = first.to_vec();
    for m in &masks[1..] {
        if m.len() != out.len() {
            return Err(Error::LengthMismatch {
                left: out.len(),
                right: m.len(),
            });
        }
        for (o, &v) in out.iter_mut().zip(m.iter()) {
            *o |= v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn simple_percentages() {
        assert_eq!(coverage_percent(69, 100).unwrap(), 69.0);
        assert!(coverage_percent(0, 0).is_err());
    }

    #[test]
    fn complementary_halves() {
        let a: Vec<bool> = (0..100).map(|i| i < 50).collect();
        let b: Vec<bool> = (0..100).map(|i| i >= 50).collect();
        assert_eq!(
            mask_coverage(&union_mask(&[&a, &b]).unwrap()).unwrap(),
            100.0
        );
    }

    #[test]
    fn independent_union() {
        let mut rng = Rng::new(3);
        let a: Vec<bool> = (0..10_000).map(|_| rng.uniform() < 0.6).collect();
        let b: Vec<bool> = (0..10_000).map(|_| rng.uniform() < 0.7).collect();
        let u = mask_coverage(&union_mask(&[&a, &b]).unwrap()).unwrap();
        assert!((u - 88.0).abs() <= 2.0, "{u}");
        assert!(u >= mask_coverage(&a).unwrap() && u >= mask_coverage(&b).unwrap());
    }

    #[test]
    fn mismatched_masks() {
        assert!(union_mask(&[&[true], &[true, false]]).is_err());
        assert!(union_mask(&[]).is_err());
    }
}
