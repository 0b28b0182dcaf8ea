//! System model and covariance arithmetic for the remote estimator.
//!
//! The plant is `x_{k+1} = A x_k + w_k` with `w ~ N(0, Q)`; sensor `i`
//! measures `y^i = C_i x + v^i` with `v^i ~ N(0, R_i)`. Only scheduled
//! sensors deliver measurements, so every posterior here takes a selection
//! vector `gamma`; the information form also accepts fractional entries,
//! which is what the relaxed scheduling problem optimizes over.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative floor for symmetry / positive-semidefiniteness checks.
const PSD_TOL: f64 = 1e-9;

/// Measurement model of one sensor: `y = C x + v`, `v ~ N(0, R)`.
#[derive(Debug, Clone)]
pub struct SensorModel {
    c: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl SensorModel {
    pub fn new(c: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        if !r.is_square() || r.nrows() != c.nrows() {
            return Err(Error::Dimension(format!(
                "sensor noise covariance is {}x{}, observation matrix has {} rows",
                r.nrows(),
                r.ncols(),
                c.nrows()
            )));
        }
        let sym = symmetrized(&r);
        if (&r - &sym).norm() > PSD_TOL * r.norm().max(1.0) {
            return Err(Error::NotPositiveDefinite("sensor noise covariance"));
        }
        if nalgebra::Cholesky::new(sym.clone()).is_none() {
            return Err(Error::NotPositiveDefinite("sensor noise covariance"));
        }
        Ok(Self { c, r: sym })
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn measurement_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Information contributed when fully selected: `Cᵀ R⁻¹ C`.
    pub fn information_matrix(&self) -> DMatrix<f64> {
        let chol = nalgebra::Cholesky::new(self.r.clone())
            .expect("R is PD by construction");
        let rinv_c = chol.solve(&self.c);
        symmetrized(&(self.c.transpose() * rinv_c))
    }
}

/// The LTI plant plus the ordered sensor fleet observing it.
#[derive(Debug, Clone)]
pub struct LtiInstance {
    a: DMatrix<f64>,
    q: DMatrix<f64>,
    sensors: Vec<SensorModel>,
}

impl LtiInstance {
    pub fn new(a: DMatrix<f64>, q: DMatrix<f64>, sensors: Vec<SensorModel>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "state matrix is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::Dimension(format!(
                "process noise covariance is {}x{}, state dimension is {}",
                q.nrows(),
                q.ncols(),
                n
            )));
        }
        let q = symmetrized(&q);
        if min_eigenvalue(&q) < -1e-10 * spectral_scale(&q) {
            return Err(Error::NotPsd("process noise covariance"));
        }
        for (i, s) in sensors.iter().enumerate() {
            if s.c.ncols() != n {
                return Err(Error::Dimension(format!(
                    "sensor {} observes {} states, plant has {}",
                    i,
                    s.c.ncols(),
                    n
                )));
            }
        }
        Ok(Self { a, q, sensors })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn sensors(&self) -> &[SensorModel] {
        &self.sensors
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors.len()
    }
}

/// Symmetric PSD matrix; every covariance-producing operation returns one.
#[derive(Debug, Clone)]
pub struct Covariance {
    m: DMatrix<f64>,
}

impl Covariance {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "covariance is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let sym = symmetrized(&m);
        if (&m - &sym).norm() > PSD_TOL * m.norm().max(1.0) {
            return Err(Error::NotPsd("covariance (asymmetric)"));
        }
        if min_eigenvalue(&sym) < -PSD_TOL * spectral_scale(&sym) {
            return Err(Error::NotPsd("covariance"));
        }
        Ok(Self { m: sym })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }
}

/// Filter state: mean estimate and its error covariance.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    pub x_hat: DVector<f64>,
    pub p: Covariance,
}

/// One-step covariance prediction `A P Aᵀ + Q`.
pub fn predict(p_prev: &Covariance, inst: &LtiInstance) -> Result<Covariance> {
    if p_prev.dim() != inst.state_dim() {
        return Err(Error::Dimension(format!(
            "covariance dimension {} vs state dimension {}",
            p_prev.dim(),
            inst.state_dim()
        )));
    }
    let p = &inst.a * p_prev.matrix() * inst.a.transpose() + &inst.q;
    Covariance::new(symmetrized(&p))
}

/// Posterior covariance in information form:
/// `(P_prior⁻¹ + Σ γ_i C_iᵀR_i⁻¹C_i)⁻¹`. Accepts fractional `gamma`.
pub fn posterior_info_form(
    p_prior: &Covariance,
    gamma: &[f64],
    inst: &LtiInstance,
) -> Result<Covariance> {
    let m = information_matrix_at(p_prior, gamma, inst)?;
    let chol = nalgebra::Cholesky::new(m)
        .ok_or(Error::NotPositiveDefinite("posterior information matrix"))?;
    Covariance::new(symmetrized(&chol.inverse()))
}

/// Posterior covariance in gain form with the selection mask applied to the
/// stacked observation model: unselected sensors contribute zero blocks to
/// `C̃` and `R̃`, making the innovation covariance singular, hence the
/// pseudo-inverse.
pub fn posterior_gain_form(
    p_prior: &Covariance,
    gamma: &[bool],
    inst: &LtiInstance,
) -> Result<Covariance> {
    check_sensor_count(gamma.len(), inst)?;
    let n = inst.state_dim();
    if p_prior.dim() != n {
        return Err(Error::Dimension("prior covariance vs state".into()));
    }
    let total_m: usize = inst.sensors.iter().map(|s| s.measurement_dim()).sum();
    let mut c_stack = DMatrix::<f64>::zeros(total_m, n);
    let mut r_stack = DMatrix::<f64>::zeros(total_m, total_m);
    let mut row = 0;
    for (i, s) in inst.sensors.iter().enumerate() {
        let m_i = s.measurement_dim();
        if gamma[i] {
            c_stack.view_mut((row, 0), (m_i, n)).copy_from(&s.c);
            r_stack.view_mut((row, row), (m_i, m_i)).copy_from(&s.r);
        }
        row += m_i;
    }
    let p = p_prior.matrix();
    let s_innov = symmetrized(&(&c_stack * p * c_stack.transpose() + r_stack));
    let s_pinv = pseudo_inverse_sym(&s_innov);
    let k = p * c_stack.transpose() * s_pinv;
    let post = p - k * &c_stack * p;
    Covariance::new(symmetrized(&post))
}

/// Full predict/update step. Measurements must be present exactly for the
/// selected sensors; unselected entries are ignored (their packets never
/// reach the estimator).
pub fn kalman_step(
    state: &EstimatorState,
    measurements: &[Option<DVector<f64>>],
    gamma: &[bool],
    inst: &LtiInstance,
) -> Result<EstimatorState> {
    check_sensor_count(gamma.len(), inst)?;
    if measurements.len() != inst.sensor_count() {
        return Err(Error::Dimension(
            "one measurement slot per sensor required".into(),
        ));
    }
    let x_pred = &inst.a * &state.x_hat;
    let p_pred = predict(&state.p, inst)?;

    let selected: Vec<usize> = (0..gamma.len()).filter(|&i| gamma[i]).collect();
    if selected.is_empty() {
        return Ok(EstimatorState { x_hat: x_pred, p: p_pred });
    }
    for &i in &selected {
        if measurements[i].is_none() {
            return Err(Error::MissingMeasurement(i));
        }
    }

    let n = inst.state_dim();
    let sel_m: usize = selected.iter().map(|&i| inst.sensors[i].measurement_dim()).sum();
    let mut c_sel = DMatrix::<f64>::zeros(sel_m, n);
    let mut r_sel = DMatrix::<f64>::zeros(sel_m, sel_m);
    let mut y_sel = DVector::<f64>::zeros(sel_m);
    let mut row = 0;
    for &i in &selected {
        let s = &inst.sensors[i];
        let m_i = s.measurement_dim();
        let y = measurements[i].as_ref().unwrap();
        if y.len() != m_i {
            return Err(Error::Dimension(format!(
                "measurement {} has {} entries, sensor expects {}",
                i,
                y.len(),
                m_i
            )));
        }
        c_sel.view_mut((row, 0), (m_i, n)).copy_from(&s.c);
        r_sel.view_mut((row, row), (m_i, m_i)).copy_from(&s.r);
        y_sel.rows_mut(row, m_i).copy_from(y);
        row += m_i;
    }

    let p = p_pred.matrix();
    let s_innov = symmetrized(&(&c_sel * p * c_sel.transpose() + r_sel));
    let chol = nalgebra::Cholesky::new(s_innov)
        .ok_or(Error::NotPositiveDefinite("innovation covariance"))?;
    let k = p * c_sel.transpose() * chol.inverse();
    let x_post = &x_pred + &k * (&y_sel - &c_sel * &x_pred);
    let p_post = Covariance::new(symmetrized(&(p - &k * &c_sel * p)))?;
    Ok(EstimatorState { x_hat: x_post, p: p_post })
}

/// Relaxed objective: trace of the posterior that prediction from `P_prev`
/// followed by fractional selection `gamma` would produce.
pub fn objective_trace(gamma: &[f64], p_prev: &Covariance, inst: &LtiInstance) -> Result<f64> {
    let p_prior = predict(p_prev, inst)?;
    Ok(posterior_info_form(&p_prior, gamma, inst)?.trace())
}

/// Gradient of [`objective_trace`] in `gamma`:
/// component `i` is `−Tr{M⁻¹ C_iᵀR_i⁻¹C_i M⁻¹}` with `M` the information
/// matrix at `gamma`. Always componentwise nonpositive.
pub fn objective_gradient(
    gamma: &[f64],
    p_prev: &Covariance,
    inst: &LtiInstance,
) -> Result<DVector<f64>> {
    let p_prior = predict(p_prev, inst)?;
    let m = information_matrix_at(&p_prior, gamma, inst)?;
    let w = nalgebra::Cholesky::new(m)
        .ok_or(Error::NotPositiveDefinite("posterior information matrix"))?
        .inverse();
    let ww = &w * &w;
    let mut grad = DVector::zeros(inst.sensor_count());
    for (i, s) in inst.sensors.iter().enumerate() {
        grad[i] = -(s.information_matrix() * &ww).trace();
    }
    Ok(grad)
}

fn information_matrix_at(
    p_prior: &Covariance,
    gamma: &[f64],
    inst: &LtiInstance,
) -> Result<DMatrix<f64>> {
    check_sensor_count(gamma.len(), inst)?;
    if p_prior.dim() != inst.state_dim() {
        return Err(Error::Dimension("prior covariance vs state".into()));
    }
    for (i, &g) in gamma.iter().enumerate() {
        if !(-1e-12..=1.0 + 1e-12).contains(&g) {
            return Err(Error::GammaRange { index: i, value: g });
        }
    }
    let chol = nalgebra::Cholesky::new(p_prior.matrix().clone())
        .ok_or(Error::NotPositiveDefinite("prior covariance"))?;
    let mut m = chol.inverse();
    for (i, s) in inst.sensors.iter().enumerate() {
        if gamma[i] != 0.0 {
            m += s.information_matrix() * gamma[i];
        }
    }
    Ok(symmetrized(&m))
}

fn check_sensor_count(got: usize, inst: &LtiInstance) -> Result<()> {
    if got != inst.sensor_count() {
        return Err(Error::Dimension(format!(
            "selection vector has {} entries, instance has {} sensors",
            got,
            inst.sensor_count()
        )));
    }
    Ok(())
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    nalgebra::SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn spectral_scale(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    nalgebra::SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l.abs()))
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix via eigendecomposition;
/// eigenvalues below `1e-12` of the largest magnitude are treated as zero.
fn pseudo_inverse_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |acc, &l| acc.max(l.abs()));
    let cutoff = 1e-12 * scale;
    let n = m.nrows();
    let mut inv_diag = DMatrix::<f64>::zeros(n, n);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l.abs() > cutoff {
            inv_diag[(i, i)] = 1.0 / l;
        }
    }
    &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn scalar_instance(r_values: &[f64]) -> LtiInstance {
        let sensors = r_values
            .iter()
            .map(|&r| {
                SensorModel::new(
                    DMatrix::from_element(1, 1, 1.0),
                    DMatrix::from_element(1, 1, r),
                )
                .unwrap()
            })
            .collect();
        LtiInstance::new(
            DMatrix::from_element(1, 1, 1.005),
            DMatrix::from_element(1, 1, 1.0),
            sensors,
        )
        .unwrap()
    }

    fn cov(v: f64) -> Covariance {
        Covariance::new(DMatrix::from_element(1, 1, v)).unwrap()
    }

    fn random_spd(rng: &mut impl Rng, n: usize, ridge: f64) -> DMatrix<f64> {
        let d = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &d * d.transpose() + DMatrix::identity(n, n) * ridge
    }

    fn random_instance(rng: &mut impl Rng, n: usize, n_sensors: usize) -> LtiInstance {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let q = random_spd(rng, n, 0.2);
        let sensors = (0..n_sensors)
            .map(|_| {
                let m = rng.random_range(1..=n);
                let c = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
                let r = random_spd(rng, m, 0.3);
                SensorModel::new(c, r).unwrap()
            })
            .collect();
        LtiInstance::new(a, q, sensors).unwrap()
    }

    // Element-wise triple-product oracle, no matrix library involved.
    fn naive_predict(a: &DMatrix<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut out = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = q[(i, j)];
                for k in 0..n {
                    for l in 0..n {
                        acc += a[(i, k)] * p[(k, l)] * a[(j, l)];
                    }
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    #[test]
    fn predict_scalar_demo_value() {
        let inst = scalar_instance(&[0.5]);
        let p = predict(&cov(1.0), &inst).unwrap();
        assert_relative_eq!(p.trace(), 2.010025, max_relative = 1e-12);
    }

    #[test]
    fn predict_identity_dynamics_is_noop() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let p0 = random_spd(&mut rng, 3, 0.5);
        let inst = LtiInstance::new(DMatrix::identity(3, 3), DMatrix::zeros(3, 3), vec![]).unwrap();
        let p = predict(&Covariance::new(p0.clone()).unwrap(), &inst).unwrap();
        assert!((p.matrix() - &p0).norm() < 1e-12);
    }

    #[test]
    fn predict_matches_naive_triple_product() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, 4, 0);
            let p0 = random_spd(&mut rng, 4, 0.4);
            let got = predict(&Covariance::new(p0.clone()).unwrap(), &inst).unwrap();
            let want = naive_predict(inst.a(), &p0, inst.q());
            assert!((got.matrix() - want).norm() < 1e-12);
        }
    }

    #[test]
    fn info_form_demo_subsets() {
        // Case-1 parameters, subset {2,4,5} (1-based): closed scalar form.
        let inst = scalar_instance(&[0.5, 0.2, 0.15, 0.2, 0.2]);
        let p_prior = predict(&cov(1.0), &inst).unwrap();
        let post = posterior_info_form(&p_prior, &[0.0, 1.0, 0.0, 1.0, 1.0], &inst).unwrap();
        assert_relative_eq!(post.trace(), 1.0 / (1.0 / 2.010025 + 15.0), max_relative = 1e-12);
        assert!((post.trace() - 0.0645).abs() < 5e-4);

        // Case-2 parameters, subset {1,3}.
        let inst2 = scalar_instance(&[0.5, 1.0, 0.15, 1.0, 1.0]);
        let t = objective_trace(&[1.0, 0.0, 1.0, 0.0, 0.0], &cov(1.0), &inst2).unwrap();
        assert_relative_eq!(
            t,
            1.0 / (1.0 / 2.010025 + 2.0 + 1.0 / 0.15),
            max_relative = 1e-12
        );
        assert!((t - 0.1091).abs() < 5e-4);
    }

    #[test]
    fn info_form_no_selection_returns_prior() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let inst = random_instance(&mut rng, 3, 4);
        let p_prior = Covariance::new(random_spd(&mut rng, 3, 0.5)).unwrap();
        let post = posterior_info_form(&p_prior, &[0.0; 4], &inst).unwrap();
        assert!((post.matrix() - p_prior.matrix()).norm() < 1e-10);
    }

    #[test]
    fn gain_form_matches_info_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..100 {
            let n = rng.random_range(1..=4);
            let n_sensors = rng.random_range(1..=5);
            let inst = random_instance(&mut rng, n, n_sensors);
            let p_prior = Covariance::new(random_spd(&mut rng, n, 0.5)).unwrap();
            let mask: Vec<bool> = (0..n_sensors).map(|_| rng.random_bool(0.5)).collect();
            let gamma: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let gain = posterior_gain_form(&p_prior, &mask, &inst).unwrap();
            let info = posterior_info_form(&p_prior, &gamma, &inst).unwrap();
            let diff = (gain.matrix() - info.matrix()).amax();
            assert!(diff <= 1e-8, "gain/info mismatch {diff}");
        }
    }

    #[test]
    fn gain_form_nothing_selected_returns_prior() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let inst = random_instance(&mut rng, 3, 3);
        let p_prior = Covariance::new(random_spd(&mut rng, 3, 0.5)).unwrap();
        let post = posterior_gain_form(&p_prior, &[false; 3], &inst).unwrap();
        assert!((post.matrix() - p_prior.matrix()).norm() < 1e-10);
    }

    #[test]
    fn kalman_step_scalar_hand_gain() {
        let inst = scalar_instance(&[0.5]);
        let state = EstimatorState { x_hat: DVector::from_element(1, 2.0), p: cov(1.0) };
        let y = DVector::from_element(1, 3.0);
        let next = kalman_step(&state, &[Some(y)], &[true], &inst).unwrap();

        let p_pred = 2.010025;
        let x_pred = 1.005 * 2.0;
        let k = p_pred / (p_pred + 0.5);
        assert_relative_eq!(next.x_hat[0], x_pred + k * (3.0 - x_pred), max_relative = 1e-12);
        assert_relative_eq!(next.p.trace(), p_pred - k * p_pred, max_relative = 1e-12);
        // And the covariance agrees with the information form.
        let info = objective_trace(&[1.0], &cov(1.0), &inst).unwrap();
        assert_relative_eq!(next.p.trace(), info, max_relative = 1e-10);
    }

    #[test]
    fn kalman_step_open_loop_when_nothing_selected() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let inst = random_instance(&mut rng, 3, 2);
        let state = EstimatorState {
            x_hat: DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0)),
            p: Covariance::new(random_spd(&mut rng, 3, 0.5)).unwrap(),
        };
        let next = kalman_step(&state, &[None, None], &[false, false], &inst).unwrap();
        assert!((next.x_hat.clone() - inst.a() * &state.x_hat).norm() < 1e-14);
        let want = predict(&state.p, &inst).unwrap();
        assert!((next.p.matrix() - want.matrix()).norm() < 1e-14);
    }

    #[test]
    fn kalman_step_missing_measurement_is_an_error() {
        let inst = scalar_instance(&[0.5, 0.5]);
        let state = EstimatorState { x_hat: DVector::zeros(1), p: cov(1.0) };
        let err = kalman_step(&state, &[None, None], &[true, false], &inst).unwrap_err();
        assert!(matches!(err, Error::MissingMeasurement(0)));
    }

    #[test]
    fn near_noiseless_measurement_collapses_posterior() {
        let n = 3;
        let c = DMatrix::identity(n, n);
        for eps in [1e-4, 1e-8] {
            let sensor = SensorModel::new(c.clone(), DMatrix::identity(n, n) * eps).unwrap();
            let inst =
                LtiInstance::new(DMatrix::identity(n, n), DMatrix::identity(n, n), vec![sensor])
                    .unwrap();
            let p_prior = Covariance::new(DMatrix::identity(n, n) * 2.0).unwrap();
            let post = posterior_info_form(&p_prior, &[1.0], &inst).unwrap();
            assert!(post.trace() < 2.0 * (n as f64) * eps);
        }
    }

    #[test]
    fn gradient_scalar_closed_form() {
        let inst = scalar_instance(&[0.5, 0.2, 0.15, 0.2, 0.2]);
        let g = objective_gradient(&[0.0; 5], &cov(1.0), &inst).unwrap();
        assert_relative_eq!(g[1], -(1.0 / 0.2) * 2.010025 * 2.010025, max_relative = 1e-12);
        assert!((g[1] + 20.2010).abs() < 1e-3);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let h = 1e-5;
        for _ in 0..25 {
            let n = rng.random_range(1..=4);
            let n_sensors = rng.random_range(1..=5);
            let inst = random_instance(&mut rng, n, n_sensors);
            let p_prev = Covariance::new(random_spd(&mut rng, n, 0.5)).unwrap();
            let gamma: Vec<f64> =
                (0..n_sensors).map(|_| rng.random_range(0.1..0.9)).collect();
            let grad = objective_gradient(&gamma, &p_prev, &inst).unwrap();
            for i in 0..n_sensors {
                let mut up = gamma.clone();
                let mut dn = gamma.clone();
                up[i] += h;
                dn[i] -= h;
                let fd = (objective_trace(&up, &p_prev, &inst).unwrap()
                    - objective_trace(&dn, &p_prev, &inst).unwrap())
                    / (2.0 * h);
                let rel = (grad[i] - fd).abs() / grad[i].abs().max(1e-8);
                assert!(rel <= 1e-5, "component {i}: analytic {} vs fd {fd}", grad[i]);
                assert!(grad[i] <= 0.0);
            }
        }
    }

    #[test]
    fn objective_is_midpoint_convex() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let n = rng.random_range(1..=3);
            let n_sensors = rng.random_range(1..=5);
            let inst = random_instance(&mut rng, n, n_sensors);
            let p_prev = Covariance::new(random_spd(&mut rng, n, 0.5)).unwrap();
            let ga: Vec<f64> = (0..n_sensors).map(|_| rng.random_range(0.0..1.0)).collect();
            let gb: Vec<f64> = (0..n_sensors).map(|_| rng.random_range(0.0..1.0)).collect();
            let mid: Vec<f64> = ga.iter().zip(&gb).map(|(a, b)| 0.5 * (a + b)).collect();
            let fa = objective_trace(&ga, &p_prev, &inst).unwrap();
            let fb = objective_trace(&gb, &p_prev, &inst).unwrap();
            let fm = objective_trace(&mid, &p_prev, &inst).unwrap();
            assert!(fm <= 0.5 * (fa + fb) + 1e-10);
        }
    }

    #[test]
    fn more_information_never_hurts() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.random_range(1..=4);
            let n_sensors = rng.random_range(1..=6);
            let inst = random_instance(&mut rng, n, n_sensors);
            let p_prev = Covariance::new(random_spd(&mut rng, n, 0.5)).unwrap();
            let small: Vec<f64> =
                (0..n_sensors).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
            let mut big = small.clone();
            for g in big.iter_mut() {
                if *g == 0.0 && rng.random_bool(0.5) {
                    *g = 1.0;
                }
            }
            let f_small = objective_trace(&small, &p_prev, &inst).unwrap();
            let f_big = objective_trace(&big, &p_prev, &inst).unwrap();
            assert!(f_big <= f_small + 1e-12);
            // Posterior never exceeds the prior.
            let p_prior = predict(&p_prev, &inst).unwrap();
            assert!(f_small <= p_prior.trace() + 1e-12);
        }
    }

    #[test]
    fn covariance_rejects_bad_inputs() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(Covariance::new(asym).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Covariance::new(indef).is_err());
        let psd = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(Covariance::new(psd).is_ok());
    }

    #[test]
    fn sensor_model_rejects_semidefinite_noise() {
        let c = DMatrix::identity(2, 2);
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(SensorModel::new(c, r).is_err());
    }

    #[test]
    fn gamma_outside_unit_interval_is_rejected() {
        let inst = scalar_instance(&[0.5]);
        let err = objective_trace(&[1.5], &cov(1.0), &inst).unwrap_err();
        assert!(matches!(err, Error::GammaRange { index: 0, .. }));
    }
}
