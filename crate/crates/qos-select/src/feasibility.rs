//! Exact QoS feasibility oracle for a fixed sensor subset.
//!
//! With every subset sensor forced to meet its threshold with equality, the
//! QoS constraints become the linear interference system `(I − F) p = u`
//! with `F_ij = θ_i h_j / h_i` (zero diagonal) and `u_i = θ_i σ² / h_i`.
//! Classical power-control theory: a positive solution exists iff the
//! spectral radius of `F` is below one, and that solution is the
//! componentwise-minimal power vector serving the subset. The oracle solves
//! the system directly and double-checks the spectral radius by power
//! iteration.

use nalgebra::{DMatrix, DVector};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};

/// Why a subset was (in)feasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityReason {
    /// Feasible; minimal powers fit under the caps.
    Ok,
    /// The interference system has no positive solution: the subset cannot
    /// be served at any power level.
    SpectralRadiusGeOne,
    /// Minimal powers exist but at least one exceeds its cap (a dead link,
    /// `h_i = 0`, counts as an infinite requirement).
    PowerCapExceeded,
}

/// Outcome of the minimum-power computation for one subset.
#[derive(Debug, Clone)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    /// Minimal powers indexed like the queried subset; present whenever the
    /// interference system is solvable, even if a cap is exceeded.
    pub p_min: Option<Vec<f64>>,
    pub reason: FeasibilityReason,
}

/// Slack for the power-cap comparison, absorbing solve rounding.
const CAP_TOL: f64 = 1e-9;
/// Margin below one that the spectral-radius estimate must respect.
const RHO_MARGIN: f64 = 1e-9;

/// Computes the componentwise-minimal power vector serving `subset`, or the
/// reason none exists. Indices must be in range and distinct; `p_min` in the
/// verdict follows the order of `subset`.
pub fn min_power_vector(subset: &[usize], real: &ChannelRealization) -> Result<FeasibilityVerdict> {
    if subset.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    let n = real.sensor_count();
    let mut seen = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::Dimension(format!(
                "sensor index {i} out of range for fleet of {n}"
            )));
        }
        if seen[i] {
            return Err(Error::Domain(format!("sensor index {i} repeated in subset")));
        }
        seen[i] = true;
    }

    let k = subset.len();
    let h: Vec<f64> = subset.iter().map(|&i| real.h()[i]).collect();
    let theta: Vec<f64> = subset.iter().map(|&i| real.theta()[i]).collect();
    if h.iter().any(|&hi| hi <= 0.0) {
        // No finite power reaches a positive SINR over a dead link.
        return Ok(FeasibilityVerdict {
            feasible: false,
            p_min: None,
            reason: FeasibilityReason::PowerCapExceeded,
        });
    }

    let f = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            0.0
        } else {
            theta[i] * h[j] / h[i]
        }
    });
    let u = DVector::from_fn(k, |i, _| theta[i] * real.sigma2() / h[i]);

    let i_minus_f = DMatrix::identity(k, k) - &f;
    let p = match nalgebra::LU::new(i_minus_f).solve(&u) {
        Some(p) => p,
        None => {
            return Ok(FeasibilityVerdict {
                feasible: false,
                p_min: None,
                reason: FeasibilityReason::SpectralRadiusGeOne,
            })
        }
    };
    if p.iter().any(|&pi| pi <= 0.0) || spectral_radius_estimate(&f) >= 1.0 - RHO_MARGIN {
        return Ok(FeasibilityVerdict {
            feasible: false,
            p_min: None,
            reason: FeasibilityReason::SpectralRadiusGeOne,
        });
    }

    let p_min: Vec<f64> = p.iter().cloned().collect();
    let within_caps = subset
        .iter()
        .zip(&p_min)
        .all(|(&i, &pi)| pi <= real.p_max()[i] + CAP_TOL);
    Ok(FeasibilityVerdict {
        feasible: within_caps,
        p_min: Some(p_min),
        reason: if within_caps { FeasibilityReason::Ok } else { FeasibilityReason::PowerCapExceeded },
    })
}

/// True iff the subset can be served within the power caps; the empty
/// subset is vacuously feasible.
pub fn is_feasible(subset: &[usize], real: &ChannelRealization) -> bool {
    if subset.is_empty() {
        return true;
    }
    min_power_vector(subset, real)
        .expect("subset indices validated by caller")
        .feasible
}

/// Perron-root estimate for the nonnegative matrix `f` by power iteration.
/// Iterates on `F + I` so eigenvalues of equal magnitude and opposite sign
/// cannot stall the iteration, then shifts back.
fn spectral_radius_estimate(f: &DMatrix<f64>) -> f64 {
    let k = f.nrows();
    let g = f + DMatrix::<f64>::identity(k, k);
    let mut v = DVector::from_element(k, 1.0 / (k as f64).sqrt());
    for _ in 0..200 {
        let gv = &g * &v;
        let norm = gv.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = gv / norm;
    }
    let rayleigh = v.dot(&(&g * &v)) / v.dot(&v);
    rayleigh - 1.0
}
