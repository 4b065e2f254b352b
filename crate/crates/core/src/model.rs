//! Pre-copy live-migration arithmetic.
//!
//! A migration of `M` bytes at bandwidth `L` while the guest dirties pages at
//! rate `R` copies all memory once, then repeatedly re-sends what was dirtied
//! during the previous round. Round `i` moves `V_i = M·λ^i` bytes with
//! `λ = R/L`; the loop stops once the residue fits under the stop-and-copy
//! threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("migration does not converge: bandwidth {bandwidth} B/s does not exceed dirty rate {dirty_rate} B/s")]
    NonConvergent { bandwidth: f64, dirty_rate: f64 },
    #[error("invalid migration input: {0}")]
    InvalidInput(String),
}

/// Stop-and-copy threshold and resume time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Bytes left for the final stop-and-copy round.
    pub v_thd: f64,
    /// Seconds to resume the guest on the target host.
    pub t_r: f64,
}

impl ModelParams {
    pub fn new(v_thd: f64, t_r: f64) -> Result<Self, ModelError> {
        if !(v_thd.is_finite() && v_thd > 0.0) {
            return Err(ModelError::InvalidInput(format!(
                "v_thd must be positive, got {v_thd}"
            )));
        }
        if !(t_r.is_finite() && t_r >= 0.0) {
            return Err(ModelError::InvalidInput(format!(
                "t_r must be non-negative, got {t_r}"
            )));
        }
        Ok(Self { v_thd, t_r })
    }
}

impl Default for ModelParams {
    /// 100 MB threshold, 20 ms resume.
    fn default() -> Self {
        Self {
            v_thd: 1e8,
            t_r: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecopyBreakdown {
    /// Index of the last pre-copy round.
    pub rounds: u32,
    /// Bytes sent in rounds `0..=rounds`.
    pub volumes: Vec<f64>,
    /// Seconds spent in rounds `0..=rounds`.
    pub times: Vec<f64>,
    pub total: f64,
    pub lambda: f64,
}

// Relative slack when comparing a round volume with the threshold, so that
// exact boundary cases are not pushed over by rounding.
const BOUNDARY_RTOL: f64 = 1e-12;

fn check_inputs(memory: f64, dirty_rate: f64, bandwidth: f64) -> Result<(), ModelError> {
    if !(memory.is_finite() && memory > 0.0) {
        return Err(ModelError::InvalidInput(format!(
            "memory must be positive, got {memory}"
        )));
    }
    if !(dirty_rate.is_finite() && dirty_rate >= 0.0) {
        return Err(ModelError::InvalidInput(format!(
            "dirty rate must be non-negative, got {dirty_rate}"
        )));
    }
    if !(bandwidth.is_finite() && bandwidth > dirty_rate) {
        return Err(ModelError::NonConvergent {
            bandwidth,
            dirty_rate,
        });
    }
    Ok(())
}

/// Number of pre-copy rounds `n = ceil(log_λ(v_thd / M))`.
///
/// With no dirtying one full copy is followed by an empty stop-and-copy
/// (`n = 1`). When the whole memory already fits under the threshold the
/// migration is a single stop-and-copy (`n = 0`).
pub fn round_count(
    memory: f64,
    dirty_rate: f64,
    bandwidth: f64,
    v_thd: f64,
) -> Result<u32, ModelError> {
    check_inputs(memory, dirty_rate, bandwidth)?;
    if !(v_thd.is_finite() && v_thd > 0.0) {
        return Err(ModelError::InvalidInput(format!(
            "v_thd must be positive, got {v_thd}"
        )));
    }
    if memory <= v_thd {
        return Ok(0);
    }
    if dirty_rate == 0.0 {
        return Ok(1);
    }
    let lambda = dirty_rate / bandwidth;
    let mut n = ((v_thd / memory).ln() / lambda.ln()).ceil().max(1.0) as i32;
    let volume = |i: i32| memory * lambda.powi(i);
    let fits = |i: i32| volume(i) <= v_thd * (1.0 + BOUNDARY_RTOL);
    while n > 1 && fits(n - 1) {
        n -= 1;
    }
    while !fits(n) {
        n += 1;
    }
    Ok(n as u32)
}

/// Total pre-copy time `(M/L)·(1 − λ^{n+1})/(1 − λ)` with its per-round terms.
pub fn precopy_time(
    memory: f64,
    dirty_rate: f64,
    bandwidth: f64,
    v_thd: f64,
) -> Result<PrecopyBreakdown, ModelError> {
    let n = round_count(memory, dirty_rate, bandwidth, v_thd)?;
    let lambda = dirty_rate / bandwidth;
    let volumes: Vec<f64> = (0..=n as i32).map(|i| memory * lambda.powi(i)).collect();
    let times = volumes.iter().map(|v| v / bandwidth).collect();
    let total = memory / bandwidth * (1.0 - lambda.powi(n as i32 + 1)) / (1.0 - lambda);
    Ok(PrecopyBreakdown {
        rounds: n,
        volumes,
        times,
        total,
        lambda,
    })
}

/// Migration time when the residual `λ^n` term is ignored: `M / (L − R)`.
/// The denominator is the migration's net transmission rate.
pub fn approx_time(memory: f64, dirty_rate: f64, bandwidth: f64) -> Result<f64, ModelError> {
    check_inputs(memory, dirty_rate, bandwidth)?;
    Ok(memory / (bandwidth - dirty_rate))
}

/// Downtime: sending the last `v_thd` bytes plus resuming the guest.
pub fn downtime(v_thd: f64, bandwidth: f64, t_r: f64) -> f64 {
    debug_assert!(bandwidth > 0.0);
    v_thd / bandwidth + t_r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{GB, MB};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    /// Round volumes by direct recursion V_0 = M, V_i = R·T_{i-1}, T_i = V_i/L,
    /// stopping at the first V_i under the threshold.
    fn recursion(memory: f64, dirty: f64, bw: f64, v_thd: f64) -> (u32, Vec<f64>) {
        let mut volumes = vec![memory];
        let mut i = 0;
        while volumes[i] > v_thd {
            let t_prev = volumes[i] / bw;
            volumes.push(dirty * t_prev);
            i += 1;
        }
        (i as u32, volumes)
    }

    #[test]
    fn reference_round_count() {
        // λ = 0.1, v_thd/M = 0.01 → exactly two rounds
        assert_eq!(
            round_count(10.0 * GB, 100.0 * MB, 1.0 * GB, 100.0 * MB).unwrap(),
            2
        );
    }

    #[test]
    fn zero_dirty_rate_is_one_round() {
        assert_eq!(
            round_count(10.0 * GB, 0.0, 1.0 * GB, 100.0 * MB).unwrap(),
            1
        );
    }

    #[test]
    fn non_convergent() {
        assert!(matches!(
            round_count(10.0 * GB, 100.0 * MB, 100.0 * MB, 100.0 * MB),
            Err(ModelError::NonConvergent { .. })
        ));
        assert!(matches!(
            approx_time(1.0, 5.0, 4.0),
            Err(ModelError::NonConvergent { .. })
        ));
    }

    #[test]
    fn threshold_above_memory_is_immediate_stop_and_copy() {
        assert_eq!(
            round_count(50.0 * MB, 10.0 * MB, 1.0 * GB, 100.0 * MB).unwrap(),
            0
        );
        let b = precopy_time(50.0 * MB, 10.0 * MB, 1.0 * GB, 100.0 * MB).unwrap();
        assert!(rel(b.total, 0.05) < 1e-12);
    }

    #[test]
    fn memory_equal_to_threshold() {
        let b = precopy_time(100.0 * MB, 10.0 * MB, 1.0 * GB, 100.0 * MB).unwrap();
        assert_eq!(b.rounds, 0);
        assert!(rel(b.total, 0.1) < 1e-12);
    }

    #[test]
    fn reference_precopy_time() {
        let b = precopy_time(10.0 * GB, 100.0 * MB, 1.0 * GB, 100.0 * MB).unwrap();
        // 10·(1 − 0.001)/0.9
        assert!(rel(b.total, 11.1) < 1e-12);
        assert_eq!(b.volumes.len(), 3);
        assert!(rel(b.times.iter().sum::<f64>(), b.total) < 1e-12);
        assert!(b.lambda < 1.0);
    }

    #[test]
    fn two_switch_single_round() {
        let b = precopy_time(500.0 * MB, 0.0, 100.0 * MB, 100.0 * MB).unwrap();
        assert!(rel(b.total, 5.0) < 1e-12);
    }

    #[test]
    fn reference_approx_time_and_tail_bound() {
        let approx = approx_time(10.0 * GB, 100.0 * MB, 1.0 * GB).unwrap();
        assert!(rel(approx, 100.0 / 9.0) < 1e-12);
        assert_eq!(approx_time(5.0 * GB, 0.0, 1.0 * GB).unwrap(), 5.0);
        let exact = precopy_time(10.0 * GB, 100.0 * MB, 1.0 * GB, 100.0 * MB)
            .unwrap()
            .total;
        // (M/L)·λ^{n+1}/(1−λ) with n = 2
        let tail = 10.0 * 0.001 / 0.9;
        assert!(approx - exact <= tail * (1.0 + 1e-9));
        assert!(approx >= exact);
    }

    #[test]
    fn reference_downtimes() {
        assert!(rel(downtime(100.0 * MB, 1.0 * GB, 0.02), 0.12) < 1e-12);
        assert!(rel(downtime(100.0 * MB, 100.0 * MB, 0.02), 1.02) < 1e-12);
        assert_eq!(downtime(0.0, 1.0 * GB, 0.0), 0.0);
    }

    #[test]
    fn boundary_where_log_is_integral() {
        // λ = 0.5, v_thd/M = 1/8 → log is exactly 3; V_3 equals the threshold.
        assert_eq!(round_count(8.0, 1.0, 2.0, 1.0).unwrap(), 3);
        // just above the boundary needs one more round
        assert_eq!(round_count(8.0, 1.0, 2.0, 0.999).unwrap(), 4);
        // λ = 0.1 with power-of-ten ratios is inexact in binary
        for k in 1..8 {
            let memory = 10f64.powi(k + 2);
            assert_eq!(round_count(memory, 1.0, 10.0, 100.0).unwrap(), k as u32);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(round_count(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(round_count(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(round_count(1.0, 0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(0.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, -0.1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn inputs() -> impl Strategy<Value = (f64, f64, f64, f64)> {
            (1e6f64..1e11, 0.01f64..0.95, 1e6f64..1e10, 1e-4f64..0.5)
                .prop_map(|(m, lambda, l, frac)| (m, lambda * l, l, m * frac))
        }

        proptest! {
            #[test]
            fn round_count_matches_recursion((m, r, l, v) in inputs()) {
                let n = round_count(m, r, l, v).unwrap();
                let lambda = r / l;
                prop_assert!(m * lambda.powi(n as i32) <= v * (1.0 + 1e-9));
                if n > 0 {
                    prop_assert!(m * lambda.powi(n as i32 - 1) > v * (1.0 - 1e-9));
                }
                let (n_rec, _) = recursion(m, r, l, v);
                // recursion and closed form agree except within rounding of the boundary
                prop_assert!((n as i64 - n_rec as i64).abs() <= 1);
                if (m * lambda.powi(n as i32) - v).abs() > 1e-9 * v {
                    prop_assert_eq!(n, n_rec);
                }
            }

            #[test]
            fn closed_form_matches_round_sum((m, r, l, v) in inputs()) {
                let b = precopy_time(m, r, l, v).unwrap();
                // accumulate T_i = V_i / L with V_{i+1} = R·T_i
                let mut sum = 0.0;
                let mut volume = m;
                for _ in 0..=b.rounds {
                    let t = volume / l;
                    sum += t;
                    volume = r * t;
                }
                prop_assert!(rel(b.total, sum) < 1e-9);
            }

            #[test]
            fn approx_dominates_minus_tail((m, r, l, v) in inputs()) {
                let b = precopy_time(m, r, l, v).unwrap();
                let approx = approx_time(m, r, l).unwrap();
                let tail = m / l * b.lambda.powi(b.rounds as i32 + 1) / (1.0 - b.lambda);
                prop_assert!(approx >= b.total * (1.0 - 1e-12));
                prop_assert!(approx - b.total <= tail * (1.0 + 1e-9) + 1e-12 * approx);
            }

            #[test]
            fn monotone_in_each_argument((m, r, l, v) in inputs(), bump in 1.01f64..2.0) {
                let t = precopy_time(m, r, l, v).unwrap().total;
                // faster link: strictly less time
                prop_assert!(precopy_time(m, r, l * bump, v).unwrap().total < t);
                // larger memory: strictly more time
                prop_assert!(precopy_time(m * bump, r, l, v).unwrap().total > t);
                // heavier dirtying (still convergent): strictly more time
                let r2 = (r * bump).min(0.99 * l);
                if r2 > r {
                    prop_assert!(precopy_time(m, r2, l, v).unwrap().total > t);
                }
            }
        }
    }
}
