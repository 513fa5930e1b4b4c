//! Energy time-series: the simulation clock, kWh-per-period series,
//! CSV ingestion, synthetic profile generation and pseudo-predictions.
//!
//! Everything downstream works in kWh per period. CSV inputs in kW are
//! converted once at ingestion so no later formula needs to carry the
//! period width around.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("series length {got} does not match grid ({expected} periods)")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{kind} series must be non-negative, got {value} at period {index}")]
    NegativeValue {
        kind: SeriesKind,
        index: usize,
        value: f64,
    },
    #[error("series are on different grids")]
    GridMismatch,
    #[error("unknown profile preset `{0}` (expected household_diurnal, pv_bell or flat)")]
    UnknownPreset(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {msg}")]
    Csv {
        path: String,
        row: usize,
        msg: String,
    },
    #[error("{path}: expected header `period,{expected}`, found `{found}`")]
    BadHeader {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path}: {got} data rows, grid expects {expected}")]
    RowCount {
        path: String,
        expected: usize,
        got: usize,
    },
}

/// Discrete simulation clock: `num_periods` slots of `delta_minutes` each,
/// starting at the absolute period ordinal `start_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start_index: i64,
    pub delta_minutes: u32,
    pub num_periods: usize,
}

impl TimeGrid {
    /// A zero-length grid is allowed (empty series are a valid degenerate
    /// case); run configurations reject it separately.
    pub fn new(start_index: i64, delta_minutes: u32, num_periods: usize) -> Result<Self, SeriesError> {
        if delta_minutes == 0 {
            return Err(SeriesError::InvalidGrid("delta_minutes must be > 0".into()));
        }
        Ok(TimeGrid {
            start_index,
            delta_minutes,
            num_periods,
        })
    }

    pub fn dt_hours(&self) -> f64 {
        f64::from(self.delta_minutes) / 60.0
    }

    /// Clock time of a period, in fractional hours of day [0, 24).
    pub fn hour_of_day(&self, index: usize) -> f64 {
        let abs = self.start_index + index as i64;
        let minutes = abs * i64::from(self.delta_minutes);
        let day_minutes = minutes.rem_euclid(24 * 60);
        day_minutes as f64 / 60.0
    }
}

/// What a series measures. Load and PV are physical magnitudes and must be
/// non-negative; the others are signed balances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Load,
    Pv,
    Net,
    Residual,
    Dispatch,
    Exchange,
}

impl SeriesKind {
    fn requires_non_negative(self) -> bool {
        matches!(self, SeriesKind::Load | SeriesKind::Pv)
    }
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SeriesKind::Load => "load",
            SeriesKind::Pv => "pv",
            SeriesKind::Net => "net",
            SeriesKind::Residual => "residual",
            SeriesKind::Dispatch => "dispatch",
            SeriesKind::Exchange => "exchange",
        };
        f.write_str(s)
    }
}

/// Per-period energy values in kWh, pinned to a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    grid: TimeGrid,
    kind: SeriesKind,
    values: Vec<f64>,
}

impl PowerSeries {
    pub fn new(grid: TimeGrid, kind: SeriesKind, values: Vec<f64>) -> Result<Self, SeriesError> {
        if values.len() != grid.num_periods {
            return Err(SeriesError::LengthMismatch {
                expected: grid.num_periods,
                got: values.len(),
            });
        }
        if kind.requires_non_negative() {
            if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| **v < 0.0) {
                return Err(SeriesError::NegativeValue { kind, index, value });
            }
        }
        Ok(PowerSeries { grid, kind, values })
    }

    pub fn zeros(grid: TimeGrid, kind: SeriesKind) -> Self {
        PowerSeries {
            grid,
            kind,
            values: vec![0.0; grid.num_periods],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same values, different label. Validates the target kind's constraints.
    pub fn with_kind(self, kind: SeriesKind) -> Result<Self, SeriesError> {
        PowerSeries::new(self.grid, kind, self.values)
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn abs_sum(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    /// Window `[start, start + len)` as a new series on a sub-grid.
    pub fn window(&self, start: usize, len: usize) -> Result<PowerSeries, SeriesError> {
        if start + len > self.values.len() {
            return Err(SeriesError::LengthMismatch {
                expected: start + len,
                got: self.values.len(),
            });
        }
        let grid = TimeGrid {
            start_index: self.grid.start_index + start as i64,
            delta_minutes: self.grid.delta_minutes,
            num_periods: len,
        };
        Ok(PowerSeries {
            grid,
            kind: self.kind,
            values: self.values[start..start + len].to_vec(),
        })
    }
}

/// Magnitude of the additive Gaussian error used to fake a forecast from
/// the realized signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionNoise {
    pub sigma_abs: f64,
    pub seed: u64,
}

/// Net demand after self-consumption: load minus PV, per period.
pub fn net_demand(load: &PowerSeries, pv: &PowerSeries) -> Result<PowerSeries, SeriesError> {
    if load.grid != pv.grid {
        return Err(SeriesError::GridMismatch);
    }
    let values = load
        .values
        .iter()
        .zip(&pv.values)
        .map(|(l, p)| l - p)
        .collect();
    Ok(PowerSeries {
        grid: load.grid,
        kind: SeriesKind::Net,
        values,
    })
}

/// Turn a realized net-demand signal into a pseudo-prediction by adding
/// i.i.d. Gaussian noise. `sigma_abs = 0` returns the input unchanged.
pub fn pseudo_predict(real_net: &PowerSeries, noise: &PredictionNoise) -> PowerSeries {
    if noise.sigma_abs == 0.0 {
        return real_net.clone();
    }
    let mut rng = stream_rng(noise.seed, &[]);
    let normal = Normal::new(0.0, noise.sigma_abs).expect("sigma_abs must be finite and >= 0");
    let values = real_net
        .values
        .iter()
        .map(|v| v + normal.sample(&mut rng))
        .collect();
    PowerSeries {
        grid: real_net.grid,
        kind: real_net.kind,
        values,
    }
}

/// Built-in profile shapes used when no measured dataset is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticPreset {
    /// Morning and evening consumption peaks over a small base load.
    HouseholdDiurnal,
    /// Solar bell between 06:00 and 18:00, zero at night.
    PvBell,
    /// Constant value every period.
    Flat,
}

impl FromStr for SyntheticPreset {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "household_diurnal" => Ok(SyntheticPreset::HouseholdDiurnal),
            "pv_bell" => Ok(SyntheticPreset::PvBell),
            "flat" => Ok(SyntheticPreset::Flat),
            other => Err(SeriesError::UnknownPreset(other.to_string())),
        }
    }
}

impl fmt::Display for SyntheticPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SyntheticPreset::HouseholdDiurnal => "household_diurnal",
            SyntheticPreset::PvBell => "pv_bell",
            SyntheticPreset::Flat => "flat",
        };
        f.write_str(s)
    }
}

fn gaussian_bump(hour: f64, center: f64, width: f64) -> f64 {
    let z = (hour - center) / width;
    (-0.5 * z * z).exp()
}

/// Generate a synthetic profile. `scale_kwh` is the nominal per-period peak
/// (for `flat`, the constant value). Deterministic for a fixed seed.
pub fn generate_synthetic(
    grid: TimeGrid,
    preset: SyntheticPreset,
    scale_kwh: f64,
    seed: u64,
) -> PowerSeries {
    let n = grid.num_periods;
    let periods_per_day = ((24 * 60) as f64 / f64::from(grid.delta_minutes)).ceil() as usize;
    let mut values = Vec::with_capacity(n);
    match preset {
        SyntheticPreset::Flat => {
            values.resize(n, scale_kwh);
        }
        SyntheticPreset::PvBell => {
            // One weather factor per day keeps consecutive periods coherent.
            let mut rng = stream_rng(seed, &[1]);
            let mut day_factor = 1.0;
            for i in 0..n {
                if i % periods_per_day == 0 {
                    day_factor = 0.7 + 0.3 * rand::Rng::random::<f64>(&mut rng);
                }
                let h = grid.hour_of_day(i);
                let v = if (6.0..18.0).contains(&h) {
                    let x = (h - 6.0) / 12.0 * std::f64::consts::PI;
                    scale_kwh * day_factor * x.sin().powi(2)
                } else {
                    0.0
                };
                values.push(v);
            }
        }
        SyntheticPreset::HouseholdDiurnal => {
            let mut rng = stream_rng(seed, &[2]);
            let normal = Normal::new(0.0, 0.08).expect("fixed sigma");
            for i in 0..n {
                let h = grid.hour_of_day(i);
                let shape = 0.2
                    + 0.45 * gaussian_bump(h, 7.5, 1.3)
                    + 0.8 * gaussian_bump(h, 19.0, 1.8);
                let jitter = 1.0 + normal.sample(&mut rng);
                values.push((scale_kwh * shape * jitter).max(0.0));
            }
        }
    }
    let kind = match preset {
        SyntheticPreset::PvBell => SeriesKind::Pv,
        _ => SeriesKind::Load,
    };
    PowerSeries { grid, kind, values }
}

const HEADER_KW: &str = "value_kw";
const HEADER_KWH: &str = "value_kwh";

/// Read a `period,value_kw` profile CSV and convert to kWh per period.
/// Files with a `value_kwh` header are taken as-is.
pub fn load_profiles_csv(
    path: &Path,
    grid: TimeGrid,
    kind: SeriesKind,
) -> Result<PowerSeries, SeriesError> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => SeriesError::Io {
                path: display.clone(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => SeriesError::Csv {
                path: display.clone(),
                row: 0,
                msg: e.to_string(),
            },
        })?;

    let headers = reader.headers().map_err(|e| SeriesError::Csv {
        path: display.clone(),
        row: 0,
        msg: e.to_string(),
    })?;
    let header_fields: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    let unit = match header_fields.as_slice() {
        [p, v] if p == "period" && v == HEADER_KW => HEADER_KW,
        [p, v] if p == "period" && v == HEADER_KWH => HEADER_KWH,
        _ => {
            return Err(SeriesError::BadHeader {
                path: display,
                expected: format!("{HEADER_KW}` or `period,{HEADER_KWH}"),
                found: header_fields.join(","),
            })
        }
    };

    let to_kwh = if unit == HEADER_KW { grid.dt_hours() } else { 1.0 };
    let mut values = Vec::with_capacity(grid.num_periods);
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // 1-based, after the header line
        let record = record.map_err(|e| SeriesError::Csv {
            path: display.clone(),
            row,
            msg: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(SeriesError::Csv {
                path: display.clone(),
                row,
                msg: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let period: i64 = record[0].parse().map_err(|_| SeriesError::Csv {
            path: display.clone(),
            row,
            msg: format!("non-numeric period `{}`", &record[0]),
        })?;
        let expected_period = grid.start_index + i as i64;
        if period != expected_period {
            return Err(SeriesError::Csv {
                path: display.clone(),
                row,
                msg: format!("period {period}, expected {expected_period}"),
            });
        }
        let value: f64 = record[1].parse().map_err(|_| SeriesError::Csv {
            path: display.clone(),
            row,
            msg: format!("non-numeric value `{}`", &record[1]),
        })?;
        values.push(value * to_kwh);
    }
    if values.len() != grid.num_periods {
        return Err(SeriesError::RowCount {
            path: display,
            expected: grid.num_periods,
            got: values.len(),
        });
    }
    PowerSeries::new(grid, kind, values)
}

/// Write a series as `period,value_kwh`.
pub fn write_series_csv(series: &PowerSeries, path: &Path) -> Result<(), SeriesError> {
    let display = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|e| SeriesError::Io {
        path: display.clone(),
        source: std::io::Error::other(e.to_string()),
    })?;
    writer
        .write_record(["period", HEADER_KWH])
        .and_then(|()| {
            for (i, v) in series.values.iter().enumerate() {
                let period = series.grid.start_index + i as i64;
                writer.write_record([period.to_string(), format!("{v}")])?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| SeriesError::Io {
            path: display,
            source: std::io::Error::other(e.to_string()),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write as _;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(0, 15, n).unwrap()
    }

    fn series(kind: SeriesKind, values: Vec<f64>) -> PowerSeries {
        PowerSeries::new(grid(values.len()), kind, values).unwrap()
    }

    #[test]
    fn kw_rows_convert_to_kwh_per_period() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "period,value_kw\n0,2.0\n1,4.0").unwrap();
        let s = load_profiles_csv(f.path(), grid(2), SeriesKind::Load).unwrap();
        assert!((s.values()[0] - 0.5).abs() < 1e-12);
        assert!((s.values()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_file_on_empty_grid_gives_empty_series() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "period,value_kw").unwrap();
        let s = load_profiles_csv(f.path(), grid(0), SeriesKind::Load).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn row_count_mismatch_is_an_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "period,value_kw\n").unwrap();
        for i in 0..95 {
            writeln!(f, "{i},1.0").unwrap();
        }
        let err = load_profiles_csv(f.path(), grid(96), SeriesKind::Load).unwrap_err();
        assert!(matches!(
            err,
            SeriesError::RowCount {
                expected: 96,
                got: 95,
                ..
            }
        ));
    }

    #[test]
    fn non_numeric_cell_names_the_row() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "period,value_kw\n0,1.0\n1,oops").unwrap();
        let err = load_profiles_csv(f.path(), grid(2), SeriesKind::Load).unwrap_err();
        match err {
            SeriesError::Csv { row, .. } => assert_eq!(row, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_an_io_error_naming_the_path() {
        let err = load_profiles_csv(Path::new("/no/such/file.csv"), grid(4), SeriesKind::Load)
            .unwrap_err();
        assert!(err.to_string().contains("/no/such/file.csv"));
    }

    #[test]
    fn net_demand_subtracts_pv() {
        let load = series(SeriesKind::Load, vec![0.5]);
        let pv = series(SeriesKind::Pv, vec![0.125]);
        let net = net_demand(&load, &pv).unwrap();
        assert!((net.values()[0] - 0.375).abs() < 1e-12);
        assert_eq!(net.kind(), SeriesKind::Net);
    }

    #[test]
    fn net_demand_of_equal_profiles_is_zero() {
        let load = series(SeriesKind::Load, vec![0.3, 0.7, 1.0]);
        let pv = series(SeriesKind::Pv, vec![0.3, 0.7, 1.0]);
        let net = net_demand(&load, &pv).unwrap();
        assert!(net.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn net_demand_with_zero_pv_is_the_load() {
        let load = series(SeriesKind::Load, vec![0.3, 0.7]);
        let pv = series(SeriesKind::Pv, vec![0.0, 0.0]);
        let net = net_demand(&load, &pv).unwrap();
        assert_eq!(net.values(), load.values());
    }

    #[test]
    fn net_demand_rejects_grid_mismatch() {
        let load = series(SeriesKind::Load, vec![0.3]);
        let pv = PowerSeries::new(grid(2), SeriesKind::Pv, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            net_demand(&load, &pv),
            Err(SeriesError::GridMismatch)
        ));
    }

    #[test]
    fn zero_noise_prediction_is_identity() {
        let net = series(SeriesKind::Net, vec![0.1, -0.4, 2.0]);
        let out = pseudo_predict(
            &net,
            &PredictionNoise {
                sigma_abs: 0.0,
                seed: 7,
            },
        );
        assert_eq!(out.values(), net.values());
    }

    #[test]
    fn same_seed_gives_identical_predictions() {
        let net = series(SeriesKind::Net, vec![0.1; 64]);
        let noise = PredictionNoise {
            sigma_abs: 0.2,
            seed: 99,
        };
        assert_eq!(
            pseudo_predict(&net, &noise).values(),
            pseudo_predict(&net, &noise).values()
        );
    }

    #[test]
    fn prediction_noise_has_near_zero_mean() {
        let n = 10_000;
        let net = PowerSeries::new(grid(n), SeriesKind::Net, vec![1.0; n]).unwrap();
        let noise = PredictionNoise {
            sigma_abs: 0.1,
            seed: 3,
        };
        let out = pseudo_predict(&net, &noise);
        let mean: f64 = out
            .values()
            .iter()
            .zip(net.values())
            .map(|(o, i)| o - i)
            .sum::<f64>()
            / n as f64;
        // 3 sigma of the sample mean: 3 * 0.1 / sqrt(10^4)
        assert!(mean.abs() < 3.0 * 0.1 / 100.0, "mean {mean}");
    }

    #[test]
    fn flat_preset_is_constant() {
        let s = generate_synthetic(grid(4), SyntheticPreset::Flat, 1.0, 0);
        assert_eq!(s.values(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn pv_bell_is_zero_at_night() {
        // 96 periods of 15 min: midnight..06:00 is index 0..24
        let s = generate_synthetic(grid(96), SyntheticPreset::PvBell, 1.0, 5);
        for i in 0..24 {
            assert_eq!(s.values()[i], 0.0, "period {i}");
        }
        for i in 72..96 {
            assert_eq!(s.values()[i], 0.0, "period {i}");
        }
        assert!(s.values()[48] > 0.0, "noon should produce energy");
    }

    #[test]
    fn household_preset_is_deterministic_per_seed() {
        let a = generate_synthetic(grid(96), SyntheticPreset::HouseholdDiurnal, 0.5, 11);
        let b = generate_synthetic(grid(96), SyntheticPreset::HouseholdDiurnal, 0.5, 11);
        let c = generate_synthetic(grid(96), SyntheticPreset::HouseholdDiurnal, 0.5, 12);
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn load_series_rejects_negative_values() {
        let err = PowerSeries::new(grid(2), SeriesKind::Load, vec![0.1, -0.1]).unwrap_err();
        assert!(matches!(err, SeriesError::NegativeValue { index: 1, .. }));
    }

    proptest! {
        #[test]
        fn net_demand_is_linear(values in proptest::collection::vec(0.0f64..5.0, 1..40), a in 0.0f64..4.0) {
            let n = values.len();
            let load = PowerSeries::new(grid(n), SeriesKind::Load, values.clone()).unwrap();
            let pv_vals: Vec<f64> = values.iter().map(|v| v * 0.5).collect();
            let pv = PowerSeries::new(grid(n), SeriesKind::Pv, pv_vals.clone()).unwrap();
            let scaled_load = PowerSeries::new(grid(n), SeriesKind::Load, values.iter().map(|v| a * v).collect()).unwrap();
            let scaled_pv = PowerSeries::new(grid(n), SeriesKind::Pv, pv_vals.iter().map(|v| a * v).collect()).unwrap();

            let base = net_demand(&load, &pv).unwrap();
            let scaled = net_demand(&scaled_load, &scaled_pv).unwrap();
            for (s, b) in scaled.values().iter().zip(base.values()) {
                prop_assert!((s - a * b).abs() < 1e-9);
            }
        }

        #[test]
        fn csv_round_trip_preserves_values(values in proptest::collection::vec(-10.0f64..10.0, 0..50)) {
            let n = values.len();
            let s = PowerSeries::new(grid(n), SeriesKind::Net, values).unwrap();
            let f = tempfile::NamedTempFile::new().unwrap();
            write_series_csv(&s, f.path()).unwrap();
            let back = load_profiles_csv(f.path(), *s.grid(), SeriesKind::Net).unwrap();
            for (a, b) in back.values().iter().zip(s.values()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
