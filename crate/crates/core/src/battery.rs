//! Battery state-of-charge dynamics, greedy dispatch, and the SOC
//! restoration offset used by the flexibility-loss criterion.
//!
//! Sign convention: dispatch is the energy drawn at the battery terminals,
//! charging positive, discharging negative. Charging stores
//! `eta_charge * dispatch`, discharging removes `|dispatch| / eta_discharge`
//! from the store, and a constant `degradation_kwh_per_period` drains the
//! store every period regardless of activity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiles::{PowerSeries, SeriesError, SeriesKind};

#[derive(Debug, Error)]
pub enum BatteryError {
    #[error("invalid battery spec: {0}")]
    InvalidSpec(String),
    #[error("state of charge {soc_kwh} kWh outside [{min_kwh}, {max_kwh}]")]
    SocOutOfBounds {
        soc_kwh: f64,
        min_kwh: f64,
        max_kwh: f64,
    },
    #[error("dispatch {dispatch_kwh} kWh exceeds the per-period limit {limit_kwh}")]
    RateExceeded { dispatch_kwh: f64, limit_kwh: f64 },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Physical battery parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    pub capacity_kwh: f64,
    pub charge_rate_kw: f64,
    pub discharge_rate_kw: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    pub soc_min_frac: f64,
    pub soc_max_frac: f64,
    pub degradation_kwh_per_period: f64,
}

impl BatterySpec {
    pub fn validate(&self) -> Result<(), BatteryError> {
        let fail = |msg: String| Err(BatteryError::InvalidSpec(msg));
        if !(self.capacity_kwh > 0.0) {
            return fail(format!("capacity_kwh must be > 0, got {}", self.capacity_kwh));
        }
        if !(self.charge_rate_kw > 0.0) || !(self.discharge_rate_kw > 0.0) {
            return fail("charge and discharge rates must be > 0".into());
        }
        if !(self.eta_charge > 0.0 && self.eta_charge <= 1.0) {
            return fail(format!("eta_charge must be in (0, 1], got {}", self.eta_charge));
        }
        if !(self.eta_discharge > 0.0 && self.eta_discharge <= 1.0) {
            return fail(format!(
                "eta_discharge must be in (0, 1], got {}",
                self.eta_discharge
            ));
        }
        if !(0.0..1.0).contains(&self.soc_min_frac) {
            return fail(format!("soc_min_frac must be in [0, 1), got {}", self.soc_min_frac));
        }
        if !(self.soc_max_frac > 0.0 && self.soc_max_frac <= 1.0) {
            return fail(format!("soc_max_frac must be in (0, 1], got {}", self.soc_max_frac));
        }
        if self.soc_min_frac >= self.soc_max_frac {
            return fail(format!(
                "soc_min_frac {} must be < soc_max_frac {}",
                self.soc_min_frac, self.soc_max_frac
            ));
        }
        if self.degradation_kwh_per_period < 0.0 {
            return fail(format!(
                "degradation_kwh_per_period must be >= 0, got {}",
                self.degradation_kwh_per_period
            ));
        }
        Ok(())
    }

    pub fn soc_min_kwh(&self) -> f64 {
        self.capacity_kwh * self.soc_min_frac
    }

    pub fn soc_max_kwh(&self) -> f64 {
        self.capacity_kwh * self.soc_max_frac
    }

    pub fn max_charge_kwh(&self, dt_hours: f64) -> f64 {
        self.charge_rate_kw * dt_hours
    }

    pub fn max_discharge_kwh(&self, dt_hours: f64) -> f64 {
        self.discharge_rate_kw * dt_hours
    }

    /// Post-step state of charge for a dispatch, before any bounds check.
    fn post_soc(&self, soc_kwh: f64, dispatch_kwh: f64) -> f64 {
        let stored = if dispatch_kwh >= 0.0 {
            self.eta_charge * dispatch_kwh
        } else {
            dispatch_kwh / self.eta_discharge
        };
        soc_kwh + stored - self.degradation_kwh_per_period
    }
}

/// Battery state of charge in kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub soc_kwh: f64,
}

/// Result of rolling dispatch over a series: per-period dispatch energy,
/// the post-period SOC trajectory and the final state.
#[derive(Debug, Clone)]
pub struct DispatchResult {
    pub dispatch: PowerSeries,
    pub soc_trajectory: Vec<f64>,
    pub final_state: BatteryState,
}

const SOC_SLACK_KWH: f64 = 1e-9;

/// One state-of-charge update. Errors when the dispatch exceeds the rate
/// limit for the series' period width or the resulting SOC leaves the
/// operating band.
pub fn step_soc(
    state: BatteryState,
    dispatch_kwh: f64,
    spec: &BatterySpec,
    dt_hours: f64,
) -> Result<BatteryState, BatteryError> {
    let limit = if dispatch_kwh >= 0.0 {
        spec.max_charge_kwh(dt_hours)
    } else {
        spec.max_discharge_kwh(dt_hours)
    };
    if dispatch_kwh.abs() > limit + SOC_SLACK_KWH {
        return Err(BatteryError::RateExceeded {
            dispatch_kwh,
            limit_kwh: limit,
        });
    }
    let soc = spec.post_soc(state.soc_kwh, dispatch_kwh);
    if soc < spec.soc_min_kwh() - SOC_SLACK_KWH || soc > spec.soc_max_kwh() + SOC_SLACK_KWH {
        return Err(BatteryError::SocOutOfBounds {
            soc_kwh: soc,
            min_kwh: spec.soc_min_kwh(),
            max_kwh: spec.soc_max_kwh(),
        });
    }
    Ok(BatteryState { soc_kwh: soc })
}

/// Clamp a desired dispatch into the feasible interval given rates, SOC
/// bounds and per-period degradation. When degradation alone would drag the
/// SOC below its floor, the lower clamp turns into a forced charge.
pub fn clamp_dispatch(spec: &BatterySpec, soc_kwh: f64, desired_kwh: f64, dt_hours: f64) -> f64 {
    let eps = spec.degradation_kwh_per_period;
    let idle = soc_kwh - eps;
    let lo_soc = if idle >= spec.soc_min_kwh() {
        (spec.soc_min_kwh() - idle) * spec.eta_discharge
    } else {
        (spec.soc_min_kwh() - idle) / spec.eta_charge
    };
    let hi_soc = (spec.soc_max_kwh() - idle) / spec.eta_charge;
    let lo = lo_soc.max(-spec.max_discharge_kwh(dt_hours));
    let hi = hi_soc.min(spec.max_charge_kwh(dt_hours));
    if lo > hi {
        // Degradation outruns the charge rate; get as close to the floor
        // as the rate allows.
        return hi;
    }
    desired_kwh.clamp(lo, hi)
}

/// Greedy dispatch: per period, counteract the pre-battery residual as far
/// as rate and SOC limits allow. Infeasibility is absorbed by clamping, so
/// this never fails.
pub fn greedy_dispatch(
    pre_battery_residual: &PowerSeries,
    initial: BatteryState,
    spec: &BatterySpec,
) -> DispatchResult {
    let dt_hours = pre_battery_residual.grid().dt_hours();
    let mut soc = initial.soc_kwh;
    let mut dispatch = Vec::with_capacity(pre_battery_residual.len());
    let mut trajectory = Vec::with_capacity(pre_battery_residual.len());
    for &residual in pre_battery_residual.values() {
        let d = clamp_dispatch(spec, soc, -residual, dt_hours);
        soc = spec.post_soc(soc, d);
        dispatch.push(d);
        trajectory.push(soc);
    }
    let dispatch =
        PowerSeries::new(*pre_battery_residual.grid(), SeriesKind::Dispatch, dispatch)
            .expect("dispatch length matches input grid");
    DispatchResult {
        dispatch,
        soc_trajectory: trajectory,
        final_state: BatteryState { soc_kwh: soc },
    }
}

/// Charging energy needed to lift the final SOC back to the reference.
/// Zero when the final SOC already meets or exceeds it.
pub fn soc_offset(final_state: BatteryState, reference: BatteryState, spec: &BatterySpec) -> f64 {
    (reference.soc_kwh - final_state.soc_kwh).max(0.0) / spec.eta_charge
}
