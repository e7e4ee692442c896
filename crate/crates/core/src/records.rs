//! Ground station and meteorological records.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::Date;

/// Join key for everything measured at a station on a day.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SampleKey {
    pub station_id: String,
    pub date: Date,
}

impl SampleKey {
    pub fn new(station_id: impl Into<String>, date: Date) -> Self {
        SampleKey {
            station_id: station_id.into(),
            date,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationRecord {
    pub station_id: String,
    pub east: f64,
    pub north: f64,
    pub date: Date,
    /// Reported dry-mass PM2.5, µg/m³.
    pub pm25_raw: f64,
    /// Humidity-corrected PM2.5, filled by preprocessing.
    pub pm25_corrected: Option<f64>,
}

impl StationRecord {
    pub fn key(&self) -> SampleKey {
        SampleKey::new(self.station_id.clone(), self.date)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.east.is_finite() || !self.north.is_finite() {
            return Err(Error::validation(
                "east/north",
                format!("station {} has non-finite coordinates", self.station_id),
            ));
        }
        if !(self.pm25_raw.is_finite() && self.pm25_raw >= 0.0) {
            return Err(Error::validation(
                "pm25",
                format!(
                    "station {} on {}: {} must be finite and >= 0",
                    self.station_id, self.date, self.pm25_raw
                ),
            ));
        }
        if let Some(c) = self.pm25_corrected {
            if !(c >= self.pm25_raw) {
                return Err(Error::validation(
                    "pm25_corrected",
                    "corrected PM2.5 below raw value",
                ));
            }
        }
        Ok(())
    }
}

/// Validates each record and rejects duplicate (station_id, date) pairs.
pub fn validate_stations(records: &[StationRecord]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for r in records {
        r.validate()?;
        if !seen.insert((r.station_id.as_str(), r.date)) {
            return Err(Error::DuplicateKey(format!(
                "station {} on {}",
                r.station_id, r.date
            )));
        }
    }
    Ok(())
}

/// Meteorological covariates in the fixed feature order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetValues {
    /// Dewpoint temperature, K.
    pub dpt: f64,
    /// Air temperature, K.
    pub t: f64,
    /// Planetary boundary layer height, m.
    pub blh: f64,
    /// Surface pressure, Pa.
    pub sp: f64,
    pub lai_hv: f64,
    pub lai_lv: f64,
    /// Wind speed, m/s.
    pub ws: f64,
    /// Wind direction, radians.
    pub wd: f64,
    /// Clear-sky direct solar radiation at the surface, J/m².
    pub cdir: f64,
    /// Downward UV radiation at the surface, J/m².
    pub uvb: f64,
    /// Relative humidity, percent.
    pub rh: f64,
}

impl MetValues {
    pub const COUNT: usize = 11;
    pub const NAMES: [&'static str; 11] = [
        "dpt", "t", "blh", "sp", "lai_hv", "lai_lv", "ws", "wd", "cdir", "uvb", "rh",
    ];

    pub fn to_array(&self) -> [f64; 11] {
        [
            self.dpt,
            self.t,
            self.blh,
            self.sp,
            self.lai_hv,
            self.lai_lv,
            self.ws,
            self.wd,
            self.cdir,
            self.uvb,
            self.rh,
        ]
    }

    pub fn from_array(a: [f64; 11]) -> Self {
        MetValues {
            dpt: a[0],
            t: a[1],
            blh: a[2],
            sp: a[3],
            lai_hv: a[4],
            lai_lv: a[5],
            ws: a[6],
            wd: a[7],
            cdir: a[8],
            uvb: a[9],
            rh: a[10],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.to_array().iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(Self::NAMES[i], "non-finite value"));
        }
        if !(self.blh > 0.0) {
            return Err(Error::validation(
                "blh",
                format!("{} must be > 0", self.blh),
            ));
        }
        if !(0.0..=100.0).contains(&self.rh) {
            return Err(Error::validation(
                "rh",
                format!("{} outside [0, 100]", self.rh),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetRecord {
    pub east: f64,
    pub north: f64,
    pub date: Date,
    pub values: MetValues,
}

/// Validates each record and rejects duplicate (location, date) entries.
pub fn validate_met(records: &[MetRecord]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for r in records {
        if !r.east.is_finite() || !r.north.is_finite() {
            return Err(Error::validation("east/north", "non-finite met location"));
        }
        r.values.validate()?;
        if !seen.insert((r.east.to_bits(), r.north.to_bits(), r.date)) {
            return Err(Error::DuplicateKey(format!(
                "met record at ({}, {}) on {}",
                r.east, r.north, r.date
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    fn rec(id: &str, pm: f64) -> StationRecord {
        StationRecord {
            station_id: id.into(),
            east: 1.0,
            north: 2.0,
            date: Date::from_ymd_opt(2014, 3, 1).unwrap(),
            pm25_raw: pm,
            pm25_corrected: None,
        }
    }

    #[test]
    fn duplicate_station_day_rejected() {
        assert!(validate_stations(&[rec("A", 1.0), rec("B", 2.0)]).is_ok());
        assert!(matches!(
            validate_stations(&[rec("A", 1.0), rec("A", 2.0)]),
            Err(Error::DuplicateKey(_))
        ));
        assert!(validate_stations(&[rec("A", -1.0)]).is_err());
    }

    #[test]
    fn rh_out_of_range_rejected() {
        let mut v = MetValues::from_array([
            270.0, 280.0, 500.0, 87000.0, 0.5, 1.0, 2.0, 1.0, 1e7, 5e5, 50.0,
        ]);
        assert!(v.validate().is_ok());
        v.rh = 101.0;
        assert!(v.validate().is_err());
        v.rh = 50.0;
        v.blh = 0.0;
        assert!(v.validate().is_err());
    }
}
