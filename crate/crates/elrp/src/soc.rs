//! Temperature-dependent state-of-charge model.
//!
//! Charging at a DC fast charger is modeled by the linear ODE
//!
//! ```text
//! d soc / dt = lambda0 + lambda1 * c + lambda2 * soc
//! ```
//!
//! whose solution after charging for `t` minutes at ambient temperature `c`
//! (Celsius) is affine in the initial charge:
//!
//! ```text
//! soc_after = mu1 * soc_i + mu2,
//! mu1 = exp(lambda2 * t),
//! mu2 = (lambda0 + lambda1 * c) * (exp(lambda2 * t) - 1) / lambda2.
//! ```
//!
//! With `lambda2 < 0` the charge rate tapers as the battery fills, and with
//! `lambda1 > 0` cold weather slows charging. Post-charge SOC is clamped to
//! `[soc_i, 100]`: plugging in never drains the battery and never exceeds a
//! full charge.

use serde::{Deserialize, Serialize};

/// Frozen default calibration (version-pinned; see also `calibration_hash`).
///
/// Chosen so that (a) an 80-minute charge from 20% SOC gains strictly more
/// range at 30 C than at 10 C than at -10 C, and (b) the charging steady
/// state `-(lambda0 + lambda1*c)/lambda2 = 110 + c` stays at or above 100%
/// for c >= -10 C, so the affine map never drains a battery in the tested
/// temperature band.
pub const DEFAULT_LAMBDA0: f64 = 1.1;
pub const DEFAULT_LAMBDA1: f64 = 0.01;
pub const DEFAULT_LAMBDA2: f64 = -0.01;

/// Default charging time per station visit, in minutes.
pub const DEFAULT_CHARGE_TIME: f64 = 80.0;

/// Affine recharge map coefficients.
///
/// `mu1 = exp(lambda2 * t)` exactly; `mu2` uses `expm1` so the
/// `lambda2 -> 0` limit `(lambda0 + lambda1*c) * t` is reached smoothly.
pub fn mu_params(lambda0: f64, lambda1: f64, lambda2: f64, t: f64, c: f64) -> (f64, f64) {
    let mu1 = (lambda2 * t).exp();
    let rate = lambda0 + lambda1 * c;
    let mu2 = if lambda2 == 0.0 {
        rate * t
    } else {
        rate * (lambda2 * t).exp_m1() / lambda2
    };
    (mu1, mu2)
}

/// The uncorrected affine form `exp(lambda2*t) * soc_i + (lambda0 + lambda1)/lambda2`,
/// which ignores ambient temperature and does not reduce to the identity at
/// `t = 0`. Kept behind a flag for comparison studies only.
pub fn mu_params_uncorrected(lambda0: f64, lambda1: f64, lambda2: f64, t: f64) -> (f64, f64) {
    ((lambda2 * t).exp(), (lambda0 + lambda1) / lambda2)
}

/// Post-charge SOC: `mu1 * soc_i + mu2` clamped to `[soc_i, 100]`.
pub fn soc_after_charge(soc_i: f64, mu1: f64, mu2: f64) -> f64 {
    (mu1 * soc_i + mu2).max(soc_i).min(100.0)
}

/// Which affine recharge map to derive from the lambda coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SocFormula {
    /// ODE-integrated form with the temperature term (the default).
    #[default]
    Integrated,
    /// The uncorrected temperature-free form, for comparison studies.
    Uncorrected,
}

/// A charging model bound to a concrete charging time and temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingModel {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Charging time per station visit, minutes.
    pub charge_time: f64,
    /// Ambient temperature, Celsius.
    pub temperature: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl ChargingModel {
    pub fn new(lambda0: f64, lambda1: f64, lambda2: f64, charge_time: f64, temperature: f64) -> Self {
        let (mu1, mu2) = mu_params(lambda0, lambda1, lambda2, charge_time, temperature);
        Self {
            lambda0,
            lambda1,
            lambda2,
            charge_time,
            temperature,
            mu1,
            mu2,
        }
    }

    pub fn with_formula(
        formula: SocFormula,
        lambda0: f64,
        lambda1: f64,
        lambda2: f64,
        charge_time: f64,
        temperature: f64,
    ) -> Self {
        match formula {
            SocFormula::Integrated => Self::new(lambda0, lambda1, lambda2, charge_time, temperature),
            SocFormula::Uncorrected => {
                let (mu1, mu2) = mu_params_uncorrected(lambda0, lambda1, lambda2, charge_time);
                Self {
                    lambda0,
                    lambda1,
                    lambda2,
                    charge_time,
                    temperature,
                    mu1,
                    mu2,
                }
            }
        }
    }

    /// Fixed-recharge behavior of the base model: every station visit tops
    /// the battery up to `soc_full` regardless of arrival charge
    /// (`mu1 = 0`, `mu2 = soc_full`).
    pub fn full_recharge(soc_full: f64) -> Self {
        Self {
            lambda0: 0.0,
            lambda1: 0.0,
            lambda2: 0.0,
            charge_time: 0.0,
            temperature: 0.0,
            mu1: 0.0,
            mu2: soc_full,
        }
    }

    /// SOC after one charging stop, clamped to `[soc_i, 100]`.
    pub fn soc_after(&self, soc_i: f64) -> f64 {
        soc_after_charge(soc_i, self.mu1, self.mu2)
    }

    /// Driving range (km) after one charging stop, given arrival range and
    /// the km-per-SOC conversion rate.
    pub fn range_after(&self, arrival_range: f64, phi: f64) -> f64 {
        phi * self.soc_after(arrival_range / phi)
    }
}

/// The repo's frozen default calibration bound to `(temperature, charge_time)`.
pub fn default_calibration(temperature: f64, charge_time: f64) -> ChargingModel {
    ChargingModel::new(
        DEFAULT_LAMBDA0,
        DEFAULT_LAMBDA1,
        DEFAULT_LAMBDA2,
        charge_time,
        temperature,
    )
}

/// FNV-1a hash of the canonical calibration string; printed by
/// `elrp --version` so experiment logs pin the calibration they used.
pub fn calibration_hash() -> String {
    let canon = format!(
        "lambda0={DEFAULT_LAMBDA0:.6};lambda1={DEFAULT_LAMBDA1:.6};lambda2={DEFAULT_LAMBDA2:.6}"
    );
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in canon.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Fourth-order Runge-Kutta integration of
    /// `d soc/dt = lambda0 + lambda1*c + lambda2*soc`, used as the
    /// independent oracle for the closed-form map.
    pub fn rk4_soc(lambda0: f64, lambda1: f64, lambda2: f64, t: f64, c: f64, soc_i: f64) -> f64 {
        let steps = 20_000;
        let h = t / steps as f64;
        let f = |soc: f64| lambda0 + lambda1 * c + lambda2 * soc;
        let mut soc = soc_i;
        for _ in 0..steps {
            let k1 = f(soc);
            let k2 = f(soc + 0.5 * h * k1);
            let k3 = f(soc + 0.5 * h * k2);
            let k4 = f(soc + h * k3);
            soc += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        soc
    }

    #[test]
    fn zero_time_is_identity() {
        let (mu1, mu2) = mu_params(1.2, 0.02, -0.02, 0.0, 10.0);
        assert_eq!(mu1, 1.0);
        assert_eq!(mu2, 0.0);
        let m = default_calibration(25.0, 0.0);
        assert_eq!(m.soc_after(37.5), 37.5);
    }

    #[test]
    fn closed_form_matches_ode_integration() {
        // lambda2 = -0.02, lambda0 = 1.2, lambda1 = 0.02, t = 80, c = 10.
        let (mu1, mu2) = mu_params(1.2, 0.02, -0.02, 80.0, 10.0);
        for &soc_i in &[0.0, 20.0, 55.0, 90.0] {
            let closed = mu1 * soc_i + mu2;
            let ode = rk4_soc(1.2, 0.02, -0.02, 80.0, 10.0, soc_i);
            let rel = (closed - ode).abs() / ode.abs().max(1.0);
            assert!(rel < 1e-6, "soc_i={soc_i}: closed={closed} ode={ode}");
        }
    }

    #[test]
    fn mu2_ignores_temperature_when_lambda1_is_zero() {
        let (_, a) = mu_params(1.2, 0.0, -0.02, 80.0, -10.0);
        let (_, b) = mu_params(1.2, 0.0, -0.02, 80.0, 30.0);
        assert_eq!(a, b);
    }

    #[test]
    fn lambda2_zero_limit() {
        let (mu1, mu2) = mu_params(1.2, 0.02, 0.0, 50.0, 10.0);
        assert_eq!(mu1, 1.0);
        assert!((mu2 - (1.2 + 0.02 * 10.0) * 50.0).abs() < 1e-12);
        // A tiny lambda2 stays numerically close to the limit.
        let (_, near) = mu_params(1.2, 0.02, -1e-10, 50.0, 10.0);
        assert!((near - mu2).abs() / mu2 < 1e-6);
    }

    #[test]
    fn soc_after_charge_cases() {
        assert_eq!(soc_after_charge(40.0, 1.0, 0.0), 40.0);
        assert_eq!(soc_after_charge(40.0, 0.5, 60.0), 80.0);
        assert_eq!(soc_after_charge(40.0, 1.0, 80.0), 100.0);
        // Never below the arrival charge, even for a draining map.
        assert_eq!(soc_after_charge(70.0, 0.5, 10.0), 70.0);
    }

    #[test]
    fn default_calibration_orders_temperatures() {
        let phi = 2.0;
        let cold = default_calibration(-10.0, 80.0).range_after(phi * 20.0, phi);
        let mild = default_calibration(10.0, 80.0).range_after(phi * 20.0, phi);
        let warm = default_calibration(30.0, 80.0).range_after(phi * 20.0, phi);
        assert!(cold < mild && mild < warm, "{cold} {mild} {warm}");
    }

    #[test]
    fn default_calibration_monotone_over_grid() {
        // Exhaustive sweep: post-charge range is nondecreasing in both
        // charging time and temperature over the tested grid.
        let phi = 2.0;
        let temps = [-10.0, 10.0, 30.0];
        let times: Vec<f64> = (1..=6).map(|k| 20.0 * k as f64).collect();
        for &soc_i in &[0.0, 20.0, 50.0, 80.0] {
            for &c in &temps {
                let mut prev = f64::NEG_INFINITY;
                for &t in &times {
                    let r = default_calibration(c, t).range_after(phi * soc_i, phi);
                    assert!(r >= prev - 1e-12, "t-monotonicity broke at c={c} t={t}");
                    prev = r;
                }
            }
            for &t in &times {
                let mut prev = f64::NEG_INFINITY;
                for &c in &temps {
                    let r = default_calibration(c, t).range_after(phi * soc_i, phi);
                    assert!(r >= prev - 1e-12, "c-monotonicity broke at c={c} t={t}");
                    prev = r;
                }
            }
        }
    }

    #[test]
    fn full_recharge_matches_fixed_rule() {
        let m = ChargingModel::full_recharge(90.0);
        assert_eq!(m.soc_after(10.0), 90.0);
        assert_eq!(m.soc_after(95.0), 95.0); // never drains
    }

    #[test]
    fn uncorrected_form_is_temperature_free() {
        let (mu1, mu2) = mu_params_uncorrected(1.2, 0.02, -0.02, 0.0);
        assert_eq!(mu1, 1.0);
        assert_eq!(mu2, (1.2 + 0.02) / -0.02);
    }

    #[test]
    fn calibration_hash_is_stable() {
        assert_eq!(calibration_hash(), calibration_hash());
        assert_eq!(calibration_hash().len(), 16);
    }

    proptest! {
        // soc_after_charge is monotone nondecreasing in soc_i when mu1 >= 0.
        #[test]
        fn monotone_in_initial_soc(a in 0.0f64..100.0, b in 0.0f64..100.0,
                                   mu1 in 0.0f64..2.0, mu2 in -50.0f64..120.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(soc_after_charge(lo, mu1, mu2) <= soc_after_charge(hi, mu1, mu2) + 1e-12);
        }

        // Closed form agrees with RK4 integration across a random grid.
        #[test]
        fn closed_form_vs_rk4(l0 in 0.2f64..2.0, l1 in 0.0f64..0.05,
                              l2 in -0.05f64..-0.001, t in 1.0f64..150.0,
                              c in -20.0f64..40.0, soc_i in 0.0f64..100.0) {
            let (mu1, mu2) = mu_params(l0, l1, l2, t, c);
            let closed = mu1 * soc_i + mu2;
            let ode = rk4_soc(l0, l1, l2, t, c, soc_i);
            prop_assert!((closed - ode).abs() / ode.abs().max(1.0) < 1e-6);
        }
    }
}
