use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Product, ProductSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct FusionScenario {
    pub id: u8,
    pub products: ProductSet,
}

const CANONICAL: [&[Product]; 11] = {
    use Product::*;
    [
        &[Mdb, Vdb],
        &[Mdb, Mdt, Vdb],
        &[Mdb, Vdb, Vdt],
        &[Mdb, Mdt, Vdb, Vdt],
        &[Mdt, Vdt],
        &[Mdb, Mdt, Vdt],
        &[Mdt, Vdb, Vdt],
        &[Mdb, Mdt],
        &[Vdb, Vdt],
        &[Mdb, Vdt],
        &[Mdt, Vdb],
    ]
};

/// The eleven product combinations, ids 1..=11.
pub fn canonical_scenarios() -> Vec<FusionScenario> {
    CANONICAL
        .iter()
        .enumerate()
        .map(|(i, ps)| FusionScenario {
            id: i as u8 + 1,
            products: ps.iter().copied().collect(),
        })
        .collect()
}

impl FusionScenario {
    pub fn canonical(id: u8) -> Option<FusionScenario> {
        canonical_scenarios().into_iter().find(|s| s.id == id)
    }
}

/// Parses a comma-separated id list such as `1,3,8`, keeping the given order.
pub fn parse_scenario_ids(list: &str) -> Result<Vec<FusionScenario>> {
    let mut out: Vec<FusionScenario> = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let id: u8 = part
            .parse()
            .map_err(|_| Error::Config(format!("scenario id `{part}` is not a number")))?;
        let s = FusionScenario::canonical(id)
            .ok_or_else(|| Error::Config(format!("no scenario {id} (valid: 1-11)")))?;
        if out.contains(&s) {
            return Err(Error::Config(format!("scenario {id} listed twice")));
        }
        out.push(s);
    }
    if out.is_empty() {
        return Err(Error::Config("empty scenario list".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn eleven_distinct_scenarios() {
        let all = canonical_scenarios();
        assert_eq!(all.len(), 11);
        assert_eq!(all[0].products.to_string(), "MDB+VDB");
        assert_eq!(all[3].products.len(), 4);
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert_ne!(a.products, b.products);
            }
        }
    }

    #[test]
    fn parse_ids() {
        let s = parse_scenario_ids("1, 3,8").unwrap();
        assert_eq!(s.iter().map(|s| s.id).collect::<Vec<_>>(), [1, 3, 8]);
        assert!(parse_scenario_ids("12").is_err());
        assert!(parse_scenario_ids("1,1").is_err());
        assert!(parse_scenario_ids("x").is_err());
        assert!(parse_scenario_ids("").is_err());
    }
}
