//! Sensor-selection strategies: the removal heuristic driven by the convex
//! relaxation, two greedy baselines (largest feasible subset, most precise
//! sensors first), and exhaustive enumeration as ground truth.

use crate::channel::{check_qos, interference_plus_noise, ChannelRealization};
use crate::error::{Error, Result};
use crate::estimation::{posterior_info_form, predict, Covariance, LtiInstance, SensorModel};
use crate::feasibility::{is_feasible, min_power_vector};
use crate::sca::{sca_solve, RelaxedInstance, ScaConfig};

/// Fractional selections this close to 1 count as selected when testing the
/// heuristic's termination condition.
const GAMMA_SNAP: f64 = 1e-4;
/// Fleet size limit for the strategies that enumerate subsets.
const MAX_ENUM_SENSORS: usize = 20;

/// One round of the removal heuristic: the relaxation's state over the
/// candidate set it was solved on, and the sensor removed as a consequence
/// (`None` on the terminal round).
#[derive(Debug, Clone)]
pub struct RemovalRecord {
    /// 1-based round counter.
    pub iteration: usize,
    pub candidate_set: Vec<usize>,
    /// Relaxed selections over the full fleet, exactly as the solver
    /// returned them (removed sensors sit at 0).
    pub gamma: Vec<f64>,
    /// The solver's powers, likewise untouched.
    pub p: Vec<f64>,
    /// Relaxed objective at this round.
    pub objective: f64,
    /// Outer iterations the round's solve took.
    pub sca_iterations: usize,
    pub removed: Option<usize>,
}

/// Final output of any selection strategy: the chosen sensors, a power
/// assignment meeting their QoS thresholds, and the posterior the choice
/// implies. `objective` is `Tr{posterior}`.
#[derive(Debug, Clone)]
pub struct SelectionDecision {
    /// Selected sensor indices, ascending.
    pub selected: Vec<usize>,
    /// Binary selection vector over the full fleet.
    pub gamma: Vec<f64>,
    /// Transmit powers over the full fleet (0 for unselected sensors).
    pub p: Vec<f64>,
    pub posterior: Covariance,
    pub objective: f64,
    /// Per-round log; empty for the single-shot baselines.
    pub removals: Vec<RemovalRecord>,
}

/// Removal metric: trace of the sensor's information contribution weighted
/// by its fractional selection, `γ_i · Tr{C_iᵀR_i⁻¹C_i}`.
pub fn selection_metric(gamma_i: f64, sensor: &SensorModel) -> f64 {
    gamma_i * sensor.information_matrix().trace()
}

/// Removal heuristic: solve the relaxation over the candidate set, stop
/// when every candidate's fractional selection snaps to 1 and the set
/// passes the exact feasibility oracle, otherwise drop the candidate with
/// the smallest [`selection_metric`] (ties to the smallest index) and
/// repeat. Candidates whose channel gain is zero can never transmit and are
/// excluded up front. If no remaining candidate could meet its threshold
/// even alone at full power, no nonempty selection is feasible and the
/// empty decision is returned.
pub fn heuristic_select(
    inst: &LtiInstance,
    p_prev: &Covariance,
    real: &ChannelRealization,
    cfg: &ScaConfig,
) -> Result<SelectionDecision> {
    check_pair(inst, real)?;
    cfg.validate()?;
    let n = inst.sensor_count();
    let mut cands: Vec<usize> = (0..n).filter(|&i| real.h()[i] > 0.0).collect();
    let mut removals = Vec::new();
    let mut iteration = 0;

    while !cands.is_empty() {
        iteration += 1;
        let attainable = cands
            .iter()
            .any(|&i| real.h()[i] * real.p_max()[i] / real.sigma2() >= real.theta()[i]);
        if !attainable {
            break;
        }
        let rinst = RelaxedInstance::new(inst, p_prev, real, cands.clone())?;
        let run = sca_solve(&rinst, cfg)?;
        let snapped = cands.iter().all(|&i| run.state.gamma[i] >= 1.0 - GAMMA_SNAP);
        if snapped && is_feasible(&cands, real) {
            removals.push(RemovalRecord {
                iteration,
                candidate_set: cands.clone(),
                gamma: run.state.gamma.clone(),
                p: run.state.p.clone(),
                objective: run.state.objective,
                sca_iterations: run.iterations,
                removed: None,
            });
            let p = qos_powers(&cands, &run.state.p, real)?;
            return finish(inst, p_prev, real, cands, p, removals);
        }
        let removed = argmin_metric(&cands, &run.state.gamma, inst.sensors());
        removals.push(RemovalRecord {
            iteration,
            candidate_set: cands.clone(),
            gamma: run.state.gamma.clone(),
            p: run.state.p.clone(),
            objective: run.state.objective,
            sca_iterations: run.iterations,
            removed: Some(removed),
        });
        cands.retain(|&i| i != removed);
    }
    finish(inst, p_prev, real, Vec::new(), vec![0.0; n], removals)
}

/// Largest-feasible-subset baseline: the maximum-cardinality subset the
/// feasibility oracle accepts, ties broken by smallest total minimal power,
/// then lexicographically. Powers are the subset's minimal powers. Ignores
/// estimation quality entirely.
pub fn snm_select(
    inst: &LtiInstance,
    p_prev: &Covariance,
    real: &ChannelRealization,
) -> Result<SelectionDecision> {
    check_pair(inst, real)?;
    let n = inst.sensor_count();
    check_enumerable(n)?;
    for k in (1..=n).rev() {
        let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
        for_each_combination(n, k, |subset| {
            let verdict = min_power_vector(subset, real)?;
            if verdict.feasible {
                let pm = verdict.p_min.expect("feasible verdict carries powers");
                let total: f64 = pm.iter().sum();
                // Strict comparison keeps the lexicographically first
                // subset among exact ties.
                if best.as_ref().is_none_or(|(t, _, _)| total < *t) {
                    best = Some((total, subset.to_vec(), pm));
                }
            }
            Ok(())
        })?;
        if let Some((_, subset, pm)) = best {
            let p = scatter_powers(n, &subset, &pm);
            return finish(inst, p_prev, real, subset, p, Vec::new());
        }
    }
    finish(inst, p_prev, real, Vec::new(), vec![0.0; n], Vec::new())
}

/// Precision-first baseline: visit sensors by descending information trace
/// (ties to the smallest index) and accept each one whose addition keeps
/// the set feasible. Powers are the final set's minimal powers.
pub fn pmf_select(
    inst: &LtiInstance,
    p_prev: &Covariance,
    real: &ChannelRealization,
) -> Result<SelectionDecision> {
    check_pair(inst, real)?;
    let n = inst.sensor_count();
    let traces: Vec<f64> =
        inst.sensors().iter().map(|s| s.information_matrix().trace()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| traces[b].total_cmp(&traces[a]).then(a.cmp(&b)));

    let mut chosen: Vec<usize> = Vec::new();
    for &s in &order {
        let mut trial = chosen.clone();
        trial.push(s);
        trial.sort_unstable();
        if is_feasible(&trial, real) {
            chosen = trial;
        }
    }
    let p = if chosen.is_empty() {
        vec![0.0; n]
    } else {
        let verdict = min_power_vector(&chosen, real)?;
        let pm = verdict.p_min.expect("accepted subset is feasible");
        scatter_powers(n, &chosen, &pm)
    };
    finish(inst, p_prev, real, chosen, p, Vec::new())
}

/// Exhaustive optimum: evaluate every feasible subset (the empty one
/// included) and return the one with the smallest posterior trace, ties
/// broken by smaller cardinality, then lexicographically.
pub fn brute_force_select(
    inst: &LtiInstance,
    p_prev: &Covariance,
    real: &ChannelRealization,
) -> Result<SelectionDecision> {
    check_pair(inst, real)?;
    let n = inst.sensor_count();
    check_enumerable(n)?;
    let prior = predict(p_prev, inst)?;

    let mut best_subset: Vec<usize> = Vec::new();
    let mut best_p: Vec<f64> = vec![0.0; n];
    let mut best_obj = prior.trace();
    let mut gamma = vec![0.0; n];
    for mask in 1usize..(1 << n) {
        let subset: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let verdict = min_power_vector(&subset, real)?;
        if !verdict.feasible {
            continue;
        }
        gamma.fill(0.0);
        for &i in &subset {
            gamma[i] = 1.0;
        }
        let obj = posterior_info_form(&prior, &gamma, inst)?.trace();
        let better = match obj.total_cmp(&best_obj) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Equal => {
                (subset.len(), &subset) < (best_subset.len(), &best_subset)
            }
            std::cmp::Ordering::Greater => false,
        };
        if better {
            let pm = verdict.p_min.expect("feasible verdict carries powers");
            best_p = scatter_powers(n, &subset, &pm);
            best_subset = subset;
            best_obj = obj;
        }
    }
    finish(inst, p_prev, real, best_subset, best_p, Vec::new())
}

/// Smallest-metric candidate, ties to the smallest index. Interchangeable
/// sensors come out of the solver with metrics equal only up to float
/// noise, so anything within a whisker of the minimum counts as tied.
fn argmin_metric(cands: &[usize], gamma: &[f64], sensors: &[SensorModel]) -> usize {
    let mut best = f64::INFINITY;
    for &i in cands {
        best = best.min(selection_metric(gamma[i], &sensors[i]));
    }
    let cutoff = best + 1e-6 * (1.0 + best.abs());
    for &i in cands {
        if selection_metric(gamma[i], &sensors[i]) <= cutoff {
            return i;
        }
    }
    cands[0]
}

/// Powers meeting QoS for the selected set, staying as close to the
/// solver's converged powers as possible: the raw powers usually pass
/// outright (the snap gap is far below the check's tolerance); otherwise a
/// monotone fixed-point lift raises each power to its exact requirement,
/// and if a cap blocks the lift the subset's minimal powers are used.
fn qos_powers(
    selected: &[usize],
    solver_p: &[f64],
    real: &ChannelRealization,
) -> Result<Vec<f64>> {
    let n = real.sensor_count();
    let mut p = vec![0.0; n];
    for &i in selected {
        p[i] = solver_p[i].clamp(0.0, real.p_max()[i]);
    }
    if let Some(p) = top_up(selected, p.clone(), real) {
        return Ok(p);
    }
    let verdict = min_power_vector(selected, real)?;
    if !verdict.feasible {
        return Err(Error::Solver("selected subset failed the feasibility oracle".into()));
    }
    let pm = verdict.p_min.expect("feasible verdict carries powers");
    Ok(scatter_powers(n, selected, &pm))
}

fn top_up(selected: &[usize], mut p: Vec<f64>, real: &ChannelRealization) -> Option<Vec<f64>> {
    for _ in 0..500 {
        if check_qos(selected, &p, real) {
            return Some(p);
        }
        for &i in selected {
            let need = real.theta()[i] * interference_plus_noise(i, &p, real) / real.h()[i];
            if need > real.p_max()[i] {
                return None;
            }
            if need > p[i] {
                p[i] = need;
            }
        }
    }
    None
}

fn scatter_powers(n: usize, subset: &[usize], powers: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; n];
    for (k, &i) in subset.iter().enumerate() {
        p[i] = powers[k];
    }
    p
}

fn check_pair(inst: &LtiInstance, real: &ChannelRealization) -> Result<()> {
    if real.sensor_count() != inst.sensor_count() {
        return Err(Error::Dimension(format!(
            "channel has {} sensors, plant has {}",
            real.sensor_count(),
            inst.sensor_count()
        )));
    }
    Ok(())
}

fn check_enumerable(n: usize) -> Result<()> {
    if n > MAX_ENUM_SENSORS {
        return Err(Error::TooManySensors { limit: MAX_ENUM_SENSORS, got: n });
    }
    Ok(())
}

/// All k-subsets of {0..n} in lexicographic order.
fn for_each_combination(
    n: usize,
    k: usize,
    mut f: impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    debug_assert!(k >= 1 && k <= n);
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        f(&c)?;
        let Some(i) = (0..k).rev().find(|&i| c[i] < n - k + i) else {
            return Ok(());
        };
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

fn finish(
    inst: &LtiInstance,
    p_prev: &Covariance,
    real: &ChannelRealization,
    selected: Vec<usize>,
    p: Vec<f64>,
    removals: Vec<RemovalRecord>,
) -> Result<SelectionDecision> {
    let prior = predict(p_prev, inst)?;
    let mut gamma = vec![0.0; inst.sensor_count()];
    for &i in &selected {
        gamma[i] = 1.0;
    }
    let posterior = posterior_info_form(&prior, &gamma, inst)?;
    let objective = posterior.trace();
    debug_assert!(check_qos(&selected, &p, real), "decision must satisfy QoS");
    Ok(SelectionDecision { selected, gamma, p, posterior, objective, removals })
}
