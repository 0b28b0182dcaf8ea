//! Log-barrier Newton solver for one convex surrogate problem.
//!
//! Variables are stacked as `z = [γ(0..s), p(s..2s), η(2s..3s)]` over the
//! candidate set. Constraints, all written `c(z) ≤ 0`:
//! interference bounds `Σ_{j≠i} h_j p_j + σ² − η_i`, the convex surrogate
//! of the bilinear QoS coupling `bound(η_i, γ_i, b_i) − h_i p_i / θ_i`, and
//! the γ/p boxes. η needs no explicit bounds: the interference constraint
//! keeps it above σ² and the surrogate keeps it finite.
//!
//! Phase II is the classic barrier ladder (minimize `t·f + φ`, multiply
//! `t`); Phase I minimizes an infeasibility slack `w` over the same
//! constraint system when the warm start is not strictly interior.

use nalgebra::{DMatrix, DVector};

use super::{surrogate_bound, ScaConfig};
use crate::error::{Error, Result};

/// Clamp margin pulling warm starts off the γ/p box boundaries.
const BOX_MARGIN: f64 = 1e-9;
/// Relative slack below which a warm start is handed to Phase I.
const INTERIOR_FLOOR: f64 = 1e-14;

/// One surrogate problem over the candidate set, with borrowed objective data.
pub(super) struct SurrogateProblem<'a> {
    pub s: usize,
    pub h: Vec<f64>,
    pub theta: Vec<f64>,
    pub p_max: Vec<f64>,
    pub sigma2: f64,
    pub b: Vec<f64>,
    pub p0_inv: &'a DMatrix<f64>,
    pub g_mats: &'a [DMatrix<f64>],
}

impl SurrogateProblem<'_> {
    /// Interference bound residual: `Σ_{j≠i} h_j p_j + σ² − η_i`.
    fn lin(&self, z: &[f64], i: usize) -> f64 {
        let s = self.s;
        let mut acc = self.sigma2 - z[2 * s + i];
        for j in 0..s {
            if j != i {
                acc += self.h[j] * z[s + j];
            }
        }
        acc
    }

    /// Surrogate QoS residual: `bound(η_i, γ_i, b_i) − h_i p_i / θ_i`.
    fn quad(&self, z: &[f64], i: usize) -> f64 {
        let s = self.s;
        surrogate_bound(z[2 * s + i], z[i], self.b[i]) - self.h[i] * z[s + i] / self.theta[i]
    }

    /// All constraint values; feasible iff every entry is negative.
    fn constraints(&self, z: &[f64]) -> Vec<f64> {
        let s = self.s;
        let mut c = Vec::with_capacity(6 * s);
        for i in 0..s {
            c.push(self.lin(z, i));
        }
        for i in 0..s {
            c.push(self.quad(z, i));
        }
        for i in 0..s {
            c.push(-z[i]);
        }
        for i in 0..s {
            c.push(z[i] - 1.0);
        }
        for i in 0..s {
            c.push(-z[s + i]);
        }
        for i in 0..s {
            c.push(z[s + i] - self.p_max[i]);
        }
        c
    }

    /// Magnitude scale of the coupling constraints, for relative margins.
    fn constraint_scale(&self) -> f64 {
        let mut scale = 1.0 + self.sigma2;
        for i in 0..self.s {
            scale += self.h[i] * self.p_max[i];
            scale = scale.max(self.h[i] * self.p_max[i] / self.theta[i]);
        }
        scale
    }

    /// Objective `Tr{(P0⁻¹ + Σ γ_i G_i)⁻¹}`; `None` if the information
    /// matrix loses positive definiteness (cannot happen for γ > 0).
    fn objective(&self, gamma: &[f64]) -> Option<f64> {
        let mut m = self.p0_inv.clone();
        for (i, g) in self.g_mats.iter().enumerate() {
            m += g * gamma[i];
        }
        let chol = nalgebra::Cholesky::new(m)?;
        Some(chol.inverse().trace())
    }

    /// Objective value, gradient, and Hessian in γ.
    fn objective_derivs(&self, gamma: &[f64]) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let s = self.s;
        let mut m = self.p0_inv.clone();
        for (i, g) in self.g_mats.iter().enumerate() {
            m += g * gamma[i];
        }
        let w = nalgebra::Cholesky::new(m)?.inverse();
        let value = w.trace();
        // K_i = W·G_i, L_i = K_i·W; ∇f_i = −Tr{L_i}, H_ij = 2 Tr{K_i L_j}.
        let k_mats: Vec<DMatrix<f64>> = self.g_mats.iter().map(|g| &w * g).collect();
        let l_mats: Vec<DMatrix<f64>> = k_mats.iter().map(|k| k * &w).collect();
        let mut grad = DVector::zeros(s);
        for i in 0..s {
            grad[i] = -l_mats[i].trace();
        }
        let mut hess = DMatrix::zeros(s, s);
        for i in 0..s {
            for j in i..s {
                let v = 2.0 * (&k_mats[i] * &l_mats[j]).trace();
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        Some((value, grad, hess))
    }
}

/// Pulls a warm start strictly inside the boxes and lifts η above the
/// interference it must dominate. Does not guarantee the surrogate coupling
/// constraints; check with [`strictly_interior`] afterwards.
pub(super) fn nudge_into_box(prob: &SurrogateProblem, z: &mut [f64]) {
    let s = prob.s;
    for i in 0..s {
        z[i] = z[i].clamp(BOX_MARGIN, 1.0 - BOX_MARGIN);
        let pm = prob.p_max[i];
        z[s + i] = z[s + i].clamp(BOX_MARGIN * pm, (1.0 - BOX_MARGIN) * pm);
    }
    for i in 0..s {
        // lin(z,i) = interference − η_i, so interference = lin + η.
        let inter = prob.lin(z, i) + z[2 * s + i];
        let margin = BOX_MARGIN * inter.max(prob.sigma2);
        if z[2 * s + i] < inter + margin {
            z[2 * s + i] = inter + margin;
        }
    }
}

/// True iff the coupling constraints hold with slack above the floor and
/// the boxes hold strictly (the nudge already guarantees box margins).
pub(super) fn strictly_interior(prob: &SurrogateProblem, z: &[f64]) -> bool {
    let s = prob.s;
    let floor = INTERIOR_FLOOR * prob.constraint_scale();
    for i in 0..s {
        if prob.lin(z, i) >= -floor || prob.quad(z, i) >= -floor {
            return false;
        }
        if z[i] <= 0.0 || z[i] >= 1.0 || z[s + i] <= 0.0 || z[s + i] >= prob.p_max[i] {
            return false;
        }
    }
    true
}

/// Barrier objective `t·f + φ`; `None` when `z` is not strictly feasible.
fn psi(prob: &SurrogateProblem, z: &[f64], t: f64) -> Option<f64> {
    let c = prob.constraints(z);
    if c.iter().any(|&v| v >= 0.0) {
        return None;
    }
    let f = prob.objective(&z[0..prob.s])?;
    Some(t * f + c.iter().map(|&v| -(-v).ln()).sum::<f64>())
}

/// Solves the Newton system for the barrier function at weight `t`,
/// returning the step and the squared Newton decrement.
fn newton_system(prob: &SurrogateProblem, z: &[f64], t: f64) -> Result<(DVector<f64>, f64)> {
    let s = prob.s;
    let dim = 3 * s;
    let (_, gf, hf) = prob
        .objective_derivs(&z[0..s])
        .ok_or(Error::Solver("information matrix lost positive definiteness".into()))?;

    let mut g = DVector::<f64>::zeros(dim);
    let mut hm = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..s {
        g[i] = t * gf[i];
        for j in 0..s {
            hm[(i, j)] = t * hf[(i, j)];
        }
    }

    for i in 0..s {
        let v = prob.lin(z, i);
        if v >= 0.0 {
            return Err(Error::Solver("iterate left the feasible region".into()));
        }
        let d = -1.0 / v;
        let d2 = d * d;
        for j in 0..s {
            if j == i {
                continue;
            }
            g[s + j] += d * prob.h[j];
            for k in 0..s {
                if k != i {
                    hm[(s + j, s + k)] += d2 * prob.h[j] * prob.h[k];
                }
            }
            hm[(s + j, 2 * s + i)] -= d2 * prob.h[j];
            hm[(2 * s + i, s + j)] -= d2 * prob.h[j];
        }
        g[2 * s + i] -= d;
        hm[(2 * s + i, 2 * s + i)] += d2;
    }

    for i in 0..s {
        let v = prob.quad(z, i);
        if v >= 0.0 {
            return Err(Error::Solver("iterate left the feasible region".into()));
        }
        let d = -1.0 / v;
        let d2 = d * d;
        let gg = (z[2 * s + i] + z[i] + prob.b[i]) / 2.0;
        let ge = (z[2 * s + i] + z[i] - prob.b[i]) / 2.0;
        let gp = -prob.h[i] / prob.theta[i];
        let idx = [i, s + i, 2 * s + i];
        let val = [gg, gp, ge];
        for a in 0..3 {
            g[idx[a]] += d * val[a];
            for c in 0..3 {
                hm[(idx[a], idx[c])] += d2 * val[a] * val[c];
            }
        }
        hm[(i, i)] += d * 0.5;
        hm[(i, 2 * s + i)] += d * 0.5;
        hm[(2 * s + i, i)] += d * 0.5;
        hm[(2 * s + i, 2 * s + i)] += d * 0.5;
    }

    for i in 0..s {
        let dg0 = 1.0 / z[i];
        let dg1 = 1.0 / (1.0 - z[i]);
        g[i] += dg1 - dg0;
        hm[(i, i)] += dg0 * dg0 + dg1 * dg1;
        let dp0 = 1.0 / z[s + i];
        let dp1 = 1.0 / (prob.p_max[i] - z[s + i]);
        g[s + i] += dp1 - dp0;
        hm[(s + i, s + i)] += dp0 * dp0 + dp1 * dp1;
    }

    let dz = solve_spd(hm, -&g)?;
    let lambda2 = -g.dot(&dz);
    Ok((dz, lambda2.max(0.0)))
}

/// Cholesky solve with an escalating ridge fallback.
fn solve_spd(h: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let scale = h.diagonal().amax().max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..7 {
        let trial = if ridge == 0.0 {
            h.clone()
        } else {
            &h + DMatrix::identity(h.nrows(), h.ncols()) * ridge
        };
        if let Some(chol) = nalgebra::Cholesky::new(trial) {
            return Ok(chol.solve(&rhs));
        }
        ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 100.0 };
    }
    Err(Error::Solver("Newton system is not positive definite".into()))
}

/// Backtracking line search on the barrier function (feasibility first,
/// then an Armijo decrease test). Updates `z` in place.
fn line_search(
    prob: &SurrogateProblem,
    z: &mut Vec<f64>,
    dz: &DVector<f64>,
    lambda2: f64,
    t: f64,
) -> Result<()> {
    let psi0 = psi(prob, z, t)
        .ok_or(Error::Solver("line search started outside the feasible region".into()))?;
    let slope = -lambda2;
    // Decreases below the rounding noise of ψ cannot be verified; accept
    // a feasible step whenever the predicted decrease is that small.
    let noise = 1e-12 * psi0.abs();
    let mut alpha = 1.0f64;
    for _ in 0..120 {
        let trial: Vec<f64> = z.iter().zip(dz.iter()).map(|(&zi, &di)| zi + alpha * di).collect();
        if let Some(v) = psi(prob, &trial, t) {
            if v <= psi0 + 0.25 * alpha * slope + noise {
                *z = trial;
                return Ok(());
            }
        }
        alpha *= 0.5;
    }
    Err(Error::Solver("barrier line search stalled".into()))
}

/// Newton iterations at fixed barrier weight until the decrement is small.
fn center(prob: &SurrogateProblem, z: &mut Vec<f64>, t: f64, cfg: &ScaConfig) -> Result<()> {
    let mut prev_lambda2 = f64::INFINITY;
    for _ in 0..cfg.max_newton {
        let (dz, lambda2) = newton_system(prob, z, t)?;
        if lambda2 / 2.0 <= cfg.newton_tol {
            return Ok(());
        }
        // Deep in the quadratic phase a true Newton step at least halves
        // the decrement; a tiny decrement that refuses to shrink means the
        // iterate is centered to float resolution, so accept it.
        if lambda2 <= 1e-4 && lambda2 > 0.5 * prev_lambda2 {
            return Ok(());
        }
        prev_lambda2 = lambda2;
        line_search(prob, z, &dz, lambda2, t)?;
    }
    Err(Error::Solver("Newton centering did not converge".into()))
}

/// Full barrier ladder from a strictly feasible start.
pub(super) fn minimize(prob: &SurrogateProblem, z0: Vec<f64>, cfg: &ScaConfig) -> Result<Vec<f64>> {
    if prob.constraints(&z0).iter().any(|&c| c >= 0.0) {
        return Err(Error::Solver("barrier start is not strictly feasible".into()));
    }
    let m = (6 * prob.s) as f64;
    let mut z = z0;
    let mut t = cfg.barrier_t0;
    loop {
        center(prob, &mut z, t, cfg)?;
        if m / t <= cfg.barrier_gap {
            return Ok(z);
        }
        t *= cfg.barrier_mu;
    }
}

/// Phase-I barrier: minimizes a shared infeasibility slack `w` over the
/// coupling constraints (boxes stay hard) and returns as soon as a strictly
/// interior point appears. The start must be strictly inside the boxes.
pub(super) fn find_interior_point(
    prob: &SurrogateProblem,
    z0: Vec<f64>,
    cfg: &ScaConfig,
) -> Result<Vec<f64>> {
    let s = prob.s;
    let dim = 3 * s + 1;
    let scale = prob.constraint_scale();
    let exit_margin = 1e-9 * scale;

    let coupling_max = |z: &[f64]| -> f64 {
        (0..s)
            .map(|i| prob.lin(z, i).max(prob.quad(z, i)))
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let mut zw = z0;
    let w0 = coupling_max(&zw).max(0.0) + scale.max(1.0);
    zw.push(w0);

    // Barrier pieces over (z, w): coupling rows acquire ∂/∂w = −1.
    let psi1 = |zw: &[f64], t: f64| -> Option<f64> {
        let (z, w) = (&zw[..3 * s], zw[3 * s]);
        let mut acc = t * w;
        for i in 0..s {
            let c1 = prob.lin(z, i) - w;
            let c2 = prob.quad(z, i) - w;
            if c1 >= 0.0 || c2 >= 0.0 {
                return None;
            }
            acc -= (-c1).ln() + (-c2).ln();
        }
        for i in 0..s {
            let (g, p) = (z[i], z[s + i]);
            if g <= 0.0 || g >= 1.0 || p <= 0.0 || p >= prob.p_max[i] {
                return None;
            }
            acc -= g.ln() + (1.0 - g).ln() + p.ln() + (prob.p_max[i] - p).ln();
        }
        Some(acc)
    };

    let newton1 = |zw: &[f64], t: f64| -> Result<(DVector<f64>, f64)> {
        let (z, w) = (&zw[..3 * s], zw[3 * s]);
        let mut g = DVector::<f64>::zeros(dim);
        let mut hm = DMatrix::<f64>::zeros(dim, dim);
        g[3 * s] = t;

        for i in 0..s {
            // lin_i − w: gradient has h_j on p_j (j≠i), −1 on η_i, −1 on w.
            let v = prob.lin(z, i) - w;
            if v >= 0.0 {
                return Err(Error::Solver("phase-1 iterate left the feasible region".into()));
            }
            let d = -1.0 / v;
            let d2 = d * d;
            let mut sparse: Vec<(usize, f64)> = Vec::with_capacity(s + 1);
            for j in 0..s {
                if j != i {
                    sparse.push((s + j, prob.h[j]));
                }
            }
            sparse.push((2 * s + i, -1.0));
            sparse.push((3 * s, -1.0));
            for &(a, va) in &sparse {
                g[a] += d * va;
                for &(c, vc) in &sparse {
                    hm[(a, c)] += d2 * va * vc;
                }
            }

            // quad_i − w.
            let v = prob.quad(z, i) - w;
            if v >= 0.0 {
                return Err(Error::Solver("phase-1 iterate left the feasible region".into()));
            }
            let d = -1.0 / v;
            let d2 = d * d;
            let gg = (z[2 * s + i] + z[i] + prob.b[i]) / 2.0;
            let ge = (z[2 * s + i] + z[i] - prob.b[i]) / 2.0;
            let gp = -prob.h[i] / prob.theta[i];
            let idx = [i, s + i, 2 * s + i, 3 * s];
            let val = [gg, gp, ge, -1.0];
            for a in 0..4 {
                g[idx[a]] += d * val[a];
                for c in 0..4 {
                    hm[(idx[a], idx[c])] += d2 * val[a] * val[c];
                }
            }
            hm[(i, i)] += d * 0.5;
            hm[(i, 2 * s + i)] += d * 0.5;
            hm[(2 * s + i, i)] += d * 0.5;
            hm[(2 * s + i, 2 * s + i)] += d * 0.5;
        }

        for i in 0..s {
            let dg0 = 1.0 / z[i];
            let dg1 = 1.0 / (1.0 - z[i]);
            g[i] += dg1 - dg0;
            hm[(i, i)] += dg0 * dg0 + dg1 * dg1;
            let dp0 = 1.0 / z[s + i];
            let dp1 = 1.0 / (prob.p_max[i] - z[s + i]);
            g[s + i] += dp1 - dp0;
            hm[(s + i, s + i)] += dp0 * dp0 + dp1 * dp1;
        }

        let dz = solve_spd(hm, -&g)?;
        let lambda2 = -g.dot(&dz);
        Ok((dz, lambda2.max(0.0)))
    };

    let m = (6 * s) as f64;
    let mut t = cfg.barrier_t0;
    loop {
        for _ in 0..cfg.max_newton {
            if coupling_max(&zw[..3 * s]) <= -exit_margin {
                zw.pop();
                return Ok(zw);
            }
            let (dz, lambda2) = newton1(&zw, t)?;
            if lambda2 / 2.0 <= cfg.newton_tol {
                break;
            }
            // Backtracking identical to Phase II, on the Phase-I barrier.
            let psi0 = psi1(&zw, t)
                .ok_or(Error::Solver("phase-1 start is not strictly feasible".into()))?;
            let slope = -lambda2;
            let mut alpha = 1.0f64;
            let mut moved = false;
            for _ in 0..120 {
                let trial: Vec<f64> =
                    zw.iter().zip(dz.iter()).map(|(&a, &d)| a + alpha * d).collect();
                if let Some(v) = psi1(&trial, t) {
                    if v <= psi0 + 0.25 * alpha * slope {
                        zw = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                return Err(Error::Solver("phase-1 line search stalled".into()));
            }
        }
        if m / t <= cfg.barrier_gap {
            break;
        }
        t *= cfg.barrier_mu;
    }

    if coupling_max(&zw[..3 * s]) < 0.0 {
        zw.pop();
        Ok(zw)
    } else {
        Err(Error::Solver("surrogate problem has no strictly feasible point".into()))
    }
}
