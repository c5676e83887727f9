//! Linear time-varying MPC over the vehicle model.
//!
//! The model is linearised along the zero-input rollout from the current
//! state, condensed into a box-constrained convex problem in the input
//! sequence and solved by accelerated projected gradient with a fixed
//! iteration count.

use nalgebra::{DMatrix, DVector};

use super::vehicle::{
    idx, linearize, model_derivative, ControlInput, StateJacobian, StateVector, VehicleParams, VehicleState,
    INPUT_DIM, STATE_DIM,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    pub dt: f64,
    /// Euler substeps per control interval in the prediction model.
    pub substeps: usize,
    /// Weight on consecutive steering-angle changes.
    pub w_u: f64,
    pub w_epsi: f64,
    pub w_ey: f64,
    /// Weight on the squared corridor slack.
    pub w_sh: f64,
    /// Half-width of the soft lateral corridor.
    pub corridor: f64,
    /// Largest slack tolerated before the problem is declared infeasible.
    pub slack_max: f64,
    pub w_speed: f64,
    pub w_zeta: f64,
    pub w_jerk: f64,
    /// Penalty on predicted steering angle or acceleration beyond their bounds.
    pub w_bounds: f64,
    pub iterations: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 20,
            dt: 0.05,
            substeps: 5,
            w_u: 20.0,
            w_epsi: 2.0,
            w_ey: 4.0,
            w_sh: 200.0,
            corridor: 0.8,
            slack_max: 1.6,
            w_speed: 1.0,
            w_zeta: 0.02,
            w_jerk: 1e-3,
            w_bounds: 1e4,
            iterations: 200,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            self.w_u,
            self.w_epsi,
            self.w_ey,
            self.w_sh,
            self.w_speed,
            self.w_zeta,
            self.w_jerk,
            self.w_bounds,
        ];
        if self.horizon == 0 || !(self.dt > 0.0) || self.substeps == 0 {
            return Err(Error::InvalidConfig("mpc horizon, dt and substeps must be positive".into()));
        }
        if !weights.iter().all(|w| w.is_finite() && *w >= 0.0) || !(self.corridor >= 0.0) || !(self.slack_max >= 0.0)
        {
            return Err(Error::InvalidConfig("mpc weights and corridor must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-step reference curvature and target speed over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceHorizon {
    pub curvature: Vec<f64>,
    pub speed: Vec<f64>,
}

impl ReferenceHorizon {
    pub fn constant(n: usize, curvature: f64, speed: f64) -> Self {
        Self { curvature: vec![curvature; n], speed: vec![speed; n] }
    }

    pub fn len(&self) -> usize {
        self.curvature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curvature.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    /// Command to apply now.
    pub command: ControlInput,
    pub sequence: Vec<ControlInput>,
    /// Predicted states after each step of `sequence`.
    pub predicted: Vec<VehicleState>,
    pub cost: f64,
    pub zero_input_cost: f64,
    pub iterations: usize,
    /// False when the corridor cannot be held even with the largest slack;
    /// `command` is then a safe stop.
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy)]
struct Hinge {
    weight: f64,
    limit: f64,
    row: usize,
}

/// The condensed problem for one state and reference.
pub struct MpcProblem {
    cfg: MpcConfig,
    params: VehicleParams,
    /// Nominal (zero-input) states at each substep, with the derivative and
    /// linearisation there.
    sub_nominal: Vec<(StateVector, StateVector, StateJacobian, super::vehicle::InputJacobian)>,
    nominal: Vec<StateVector>,
    /// Sensitivity of the state after step k+1 to the stacked inputs.
    sens: Vec<DMatrix<f64>>,
    speed_ref: Vec<f64>,
    delta0: f64,
    // quadratic part: v'Hv + 2g'v + c
    h: DMatrix<f64>,
    g: DVector<f64>,
    c: f64,
    // rows for hinge terms: value = a.v + b
    hinge_a: DMatrix<f64>,
    hinge_b: DVector<f64>,
    hinges: Vec<Hinge>,
    bounds: DVector<f64>,
}

impl MpcProblem {
    pub fn new(
        state: &VehicleState,
        reference: &ReferenceHorizon,
        cfg: &MpcConfig,
        params: &VehicleParams,
    ) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        if reference.curvature.len() != cfg.horizon || reference.speed.len() != cfg.horizon {
            return Err(Error::InvalidInput(format!("reference horizon must have {} entries", cfg.horizon)));
        }
        let n = cfg.horizon;
        let nv = n * INPUT_DIM;
        let hstep = cfg.dt / cfg.substeps as f64;
        let mut x = state.to_vector();
        let mut nominal = vec![x];
        let mut sub_nominal = Vec::with_capacity(n * cfg.substeps);
        let mut sens = Vec::with_capacity(n);
        let mut s = DMatrix::<f64>::zeros(STATE_DIM, nv);
        for k in 0..n {
            let kappa = reference.curvature[k];
            for _ in 0..cfg.substeps {
                let vs = VehicleState::from_vector(&x);
                let f = model_derivative(&vs, &ControlInput::ZERO, kappa, params);
                let lin = linearize(&vs, &ControlInput::ZERO, kappa, params);
                // S <- (I + hA) S + h B E_k
                let phi = StateJacobian::identity() + lin.a * hstep;
                s = DMatrix::from_fn(STATE_DIM, STATE_DIM, |i, j| phi[(i, j)]) * &s;
                for i in 0..STATE_DIM {
                    for j in 0..INPUT_DIM {
                        s[(i, k * INPUT_DIM + j)] += hstep * lin.b[(i, j)];
                    }
                }
                sub_nominal.push((x, f, lin.a, lin.b));
                x += f * hstep;
            }
            nominal.push(x);
            sens.push(s.clone());
        }

        let mut rows: Vec<(f64, DVector<f64>, f64)> = Vec::new();
        let mut hinge_rows: Vec<(DVector<f64>, f64)> = Vec::new();
        let mut hinges = Vec::new();
        let zero = DVector::<f64>::zeros(nv);
        for k in 0..n {
            let sk = &sens[k];
            let xk = &nominal[k + 1];
            let row_of = |i: usize| DVector::from_iterator(nv, sk.row(i).iter().copied());
            let prev_delta_row = if k == 0 {
                zero.clone()
            } else {
                DVector::from_iterator(nv, sens[k - 1].row(idx::DELTA).iter().copied())
            };
            let prev_delta = nominal[k][idx::DELTA];
            rows.push((cfg.w_u, row_of(idx::DELTA) - prev_delta_row, xk[idx::DELTA] - prev_delta));
            rows.push((cfg.w_epsi, row_of(idx::EPSI), xk[idx::EPSI]));
            rows.push((cfg.w_ey, row_of(idx::EY), xk[idx::EY]));
            rows.push((cfg.w_speed, row_of(idx::U), xk[idx::U] - reference.speed[k]));
            for (j, w) in [cfg.w_zeta, cfg.w_jerk].into_iter().enumerate() {
                let mut e = zero.clone();
                e[k * INPUT_DIM + j] = 1.0;
                rows.push((w, e, 0.0));
            }
            for (i, w, limit) in [
                (idx::EY, cfg.w_sh, cfg.corridor),
                (idx::DELTA, cfg.w_bounds, params.delta_max),
                (idx::AX, cfg.w_bounds, params.a_max),
            ] {
                hinges.push(Hinge { weight: w, limit, row: hinge_rows.len() });
                hinge_rows.push((row_of(i), xk[i]));
            }
        }
        let mut h = DMatrix::<f64>::zeros(nv, nv);
        let mut g = DVector::<f64>::zeros(nv);
        let mut c = 0.0;
        for (w, a, b) in &rows {
            if *w == 0.0 {
                continue;
            }
            h.ger(*w, a, a, 1.0);
            g.axpy(w * b, a, 1.0);
            c += w * b * b;
        }
        let hinge_a = DMatrix::from_fn(hinge_rows.len(), nv, |r, j| hinge_rows[r].0[j]);
        let hinge_b = DVector::from_iterator(hinge_rows.len(), hinge_rows.iter().map(|r| r.1));
        let bounds = DVector::from_fn(nv, |i, _| if i % 2 == 0 { params.zeta_max } else { params.jerk_max });
        Ok(Self {
            cfg: *cfg,
            params: *params,
            sub_nominal,
            nominal,
            sens,
            speed_ref: reference.speed.clone(),
            delta0: state.delta,
            h,
            g,
            c,
            hinge_a,
            hinge_b,
            hinges,
            bounds,
        })
    }

    pub fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    fn stack(inputs: &[ControlInput]) -> DVector<f64> {
        DVector::from_iterator(inputs.len() * 2, inputs.iter().flat_map(|u| [u.zeta, u.jerk]))
    }

    fn unstack(v: &DVector<f64>) -> Vec<ControlInput> {
        v.as_slice().chunks(2).map(|c| ControlInput::new(c[0], c[1])).collect()
    }

    fn cost_and_grad(&self, v: &DVector<f64>, grad: Option<&mut DVector<f64>>) -> f64 {
        let hv = &self.h * v;
        let mut cost = v.dot(&hv) + 2.0 * self.g.dot(v) + self.c;
        let vals = &self.hinge_a * v + &self.hinge_b;
        let mut coef = DVector::<f64>::zeros(vals.len());
        for hg in &self.hinges {
            let r = vals[hg.row];
            let excess = r.abs() - hg.limit;
            if excess > 0.0 {
                cost += hg.weight * excess * excess;
                coef[hg.row] = 2.0 * hg.weight * excess * r.signum();
            }
        }
        if let Some(gr) = grad {
            *gr = hv * 2.0 + &self.g * 2.0 + self.hinge_a.tr_mul(&coef);
        }
        cost
    }

    /// Objective of an input sequence through the condensed form.
    pub fn cost(&self, inputs: &[ControlInput]) -> f64 {
        self.cost_and_grad(&Self::stack(inputs), None)
    }

    /// Objective evaluated by stepping the linearised model forward one
    /// substep at a time; independent of the condensation.
    pub fn rollout_cost(&self, inputs: &[ControlInput]) -> f64 {
        let cfg = &self.cfg;
        let hstep = cfg.dt / cfg.substeps as f64;
        let mut x = self.sub_nominal[0].0;
        let mut prev_delta = self.delta0;
        let mut cost = 0.0;
        let sq = |e: f64| if e > 0.0 { e * e } else { 0.0 };
        for (k, u) in inputs.iter().enumerate() {
            for j in 0..cfg.substeps {
                let (xn, f, a, b) = &self.sub_nominal[k * cfg.substeps + j];
                x += (f + a * (x - xn) + b * u.to_vector()) * hstep;
            }
            cost += cfg.w_u * (x[idx::DELTA] - prev_delta).powi(2)
                + cfg.w_epsi * x[idx::EPSI].powi(2)
                + cfg.w_ey * x[idx::EY].powi(2)
                + cfg.w_speed * (x[idx::U] - self.speed_ref[k]).powi(2)
                + cfg.w_zeta * u.zeta.powi(2)
                + cfg.w_jerk * u.jerk.powi(2)
                + cfg.w_sh * sq(x[idx::EY].abs() - cfg.corridor)
                + cfg.w_bounds * sq(x[idx::DELTA].abs() - self.params.delta_max)
                + cfg.w_bounds * sq(x[idx::AX].abs() - self.params.a_max);
            prev_delta = x[idx::DELTA];
        }
        cost
    }

    /// Predicted states of the linearised model.
    pub fn predict(&self, inputs: &[ControlInput]) -> Vec<VehicleState> {
        let v = Self::stack(inputs);
        self.sens
            .iter()
            .zip(&self.nominal[1..])
            .map(|(s, xn)| {
                let dx = s * &v;
                VehicleState::from_vector(&(xn + StateVector::from_iterator(dx.iter().copied()))).normalized()
            })
            .collect()
    }

    /// Generalised Hessian at `v`: the quadratic part plus every active hinge.
    fn hessian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.h.clone();
        let vals = &self.hinge_a * v + &self.hinge_b;
        for hg in &self.hinges {
            if vals[hg.row].abs() > hg.limit {
                let a = self.hinge_a.row(hg.row).transpose();
                m.ger(hg.weight, &a, &a, 1.0);
            }
        }
        m * 2.0
    }

    fn project(&self, v: &mut DVector<f64>) {
        for i in 0..v.len() {
            v[i] = v[i].clamp(-self.bounds[i], self.bounds[i]);
        }
    }

    /// Box-projected gradient iteration scaled by the Hessian on the free
    /// variables (projected Newton) with an Armijo search along the
    /// projection arc. Runs at most `iterations` steps and never returns a
    /// point worse than the zero sequence or the warm start.
    pub fn solve(&self, warm: Option<&[ControlInput]>) -> (Vec<ControlInput>, f64, usize) {
        let nv = self.bounds.len();
        let mut v = DVector::<f64>::zeros(nv);
        let mut cost = self.cost_and_grad(&v, None);
        if let Some(w) = warm {
            if w.len() == self.cfg.horizon {
                let mut cand = Self::stack(w);
                self.project(&mut cand);
                let c = self.cost_and_grad(&cand, None);
                if c < cost {
                    cost = c;
                    v = cand;
                }
            }
        }
        let mut grad = DVector::<f64>::zeros(nv);
        let mut used = 0;
        for it in 0..self.cfg.iterations {
            used = it + 1;
            self.cost_and_grad(&v, Some(&mut grad));
            let mut pg = &v - &grad;
            self.project(&mut pg);
            let stationarity = (&pg - &v).amax();
            if stationarity <= 1e-13 * (1.0 + v.amax()) {
                break;
            }
            let eps = stationarity.min(1e-6);
            let binding: Vec<bool> = (0..nv)
                .map(|i| {
                    (v[i] <= -self.bounds[i] + eps && grad[i] > 0.0) || (v[i] >= self.bounds[i] - eps && grad[i] < 0.0)
                })
                .collect();
            let hess = self.hessian(&v);
            let free: Vec<usize> = (0..nv).filter(|&i| !binding[i]).collect();
            let mut dir = DVector::<f64>::zeros(nv);
            for i in 0..nv {
                if binding[i] {
                    dir[i] = -grad[i] / hess[(i, i)].max(1e-12);
                }
            }
            if !free.is_empty() {
                let nf = free.len();
                let hf = DMatrix::from_fn(nf, nf, |a, b| hess[(free[a], free[b])] + if a == b { 1e-12 } else { 0.0 });
                let gf = DVector::from_fn(nf, |a, _| grad[free[a]]);
                let step = match hf.cholesky() {
                    Some(ch) => ch.solve(&gf),
                    None => gf.clone(),
                };
                for (a, &i) in free.iter().enumerate() {
                    dir[i] = -step[a];
                }
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let mut cand = &v + &dir * alpha;
                self.project(&mut cand);
                let c = self.cost_and_grad(&cand, None);
                let decrease = grad.dot(&(&v - &cand));
                if c < cost && cost - c >= 1e-4 * decrease {
                    v = cand;
                    cost = c;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (Self::unstack(&v), cost, used)
    }
}

/// Largest deceleration with the wheel held straight.
pub fn safe_stop(state: &VehicleState, params: &VehicleParams, dt: f64) -> ControlInput {
    let jerk = ((-params.a_max - state.ax) / dt).clamp(-params.jerk_max, params.jerk_max);
    ControlInput::new(0.0, jerk)
}

/// Limit a command so that one interval cannot push the steering angle or
/// acceleration past their bounds.
pub fn limit_command(u: &ControlInput, state: &VehicleState, params: &VehicleParams, dt: f64) -> ControlInput {
    let zlo = ((-params.delta_max - state.delta) / dt).max(-params.zeta_max);
    let zhi = ((params.delta_max - state.delta) / dt).min(params.zeta_max);
    let jlo = ((-params.a_max - state.ax) / dt).max(-params.jerk_max);
    let jhi = ((params.a_max - state.ax) / dt).min(params.jerk_max);
    let clip = |x: f64, lo: f64, hi: f64| if lo > hi { 0.5 * (lo + hi) } else { x.clamp(lo, hi) };
    ControlInput::new(clip(u.zeta, zlo, zhi), clip(u.jerk, jlo, jhi)).clamped(params)
}

/// One receding-horizon solve.
pub fn mpc_step(
    state: &VehicleState,
    reference: &ReferenceHorizon,
    cfg: &MpcConfig,
    params: &VehicleParams,
    prev_input: &ControlInput,
) -> Result<MpcSolution> {
    let warm = vec![*prev_input; cfg.horizon];
    solve_with_warm(state, reference, cfg, params, Some(&warm))
}

fn solve_with_warm(
    state: &VehicleState,
    reference: &ReferenceHorizon,
    cfg: &MpcConfig,
    params: &VehicleParams,
    warm: Option<&[ControlInput]>,
) -> Result<MpcSolution> {
    let problem = MpcProblem::new(state, reference, cfg, params)?;
    let zero_input_cost = problem.cost(&vec![ControlInput::ZERO; cfg.horizon]);
    let (sequence, cost, iterations) = problem.solve(warm);
    let predicted = problem.predict(&sequence);
    let limit = cfg.corridor + cfg.slack_max;
    let feasible = state.ey.abs() <= limit && predicted.iter().all(|p| p.ey.abs() <= limit);
    let command = if feasible {
        limit_command(&sequence[0], state, params, cfg.dt)
    } else {
        safe_stop(state, params, cfg.dt)
    };
    Ok(MpcSolution { command, sequence, predicted, cost, zero_input_cost, iterations, feasible })
}

/// MPC with a shifted warm start carried between calls.
#[derive(Debug, Clone)]
pub struct MpcController {
    pub config: MpcConfig,
    pub params: VehicleParams,
    warm: Vec<ControlInput>,
}

impl MpcController {
    pub fn new(config: MpcConfig, params: VehicleParams) -> Result<Self> {
        config.validate()?;
        params.validate()?;
        Ok(Self { config, params, warm: Vec::new() })
    }

    pub fn reset(&mut self) {
        self.warm.clear();
    }

    pub fn step(&mut self, state: &VehicleState, reference: &ReferenceHorizon) -> Result<MpcSolution> {
        let warm = if self.warm.len() == self.config.horizon { Some(self.warm.as_slice()) } else { None };
        let sol = solve_with_warm(state, reference, &self.config, &self.params, warm)?;
        let mut next: Vec<ControlInput> = sol.sequence.iter().skip(1).copied().collect();
        next.push(*sol.sequence.last().expect("horizon is nonempty"));
        self.warm = next;
        Ok(sol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn straight(n: usize, speed: f64) -> ReferenceHorizon {
        ReferenceHorizon::constant(n, 0.0, speed)
    }

    #[test]
    fn zero_error_gives_zero_steering() {
        let cfg = MpcConfig::default();
        let p = VehicleParams::default();
        let s = VehicleState { u: 3.0, ..Default::default() };
        let sol = mpc_step(&s, &straight(cfg.horizon, 5.0), &cfg, &p, &ControlInput::ZERO).unwrap();
        assert_eq!(sol.command.zeta, 0.0);
        assert!(sol.command.jerk > 0.0);
        let sol = mpc_step(&s, &straight(cfg.horizon, 3.0), &cfg, &p, &ControlInput::ZERO).unwrap();
        assert_eq!(sol.command, ControlInput::ZERO);
        let fast = VehicleState { u: 4.0, ..s };
        let sol = mpc_step(&fast, &straight(cfg.horizon, 3.0), &cfg, &p, &ControlInput::ZERO).unwrap();
        assert!(sol.command.jerk < 0.0);
    }

    #[test]
    fn offset_left_steers_right() {
        let cfg = MpcConfig::default();
        let p = VehicleParams::default();
        let s = VehicleState { u: 3.0, ey: 0.5, ..Default::default() };
        let sol = mpc_step(&s, &straight(cfg.horizon, 3.0), &cfg, &p, &ControlInput::ZERO).unwrap();
        assert!(sol.command.zeta < 0.0, "{:?}", sol.command);
        let s = VehicleState { ey: -0.5, ..s };
        let sol = mpc_step(&s, &straight(cfg.horizon, 3.0), &cfg, &p, &ControlInput::ZERO).unwrap();
        assert!(sol.command.zeta > 0.0);
    }

    #[test]
    fn condensed_and_rollout_costs_agree() {
        let cfg = MpcConfig { horizon: 6, ..Default::default() };
        let p = VehicleParams::default();
        let s = VehicleState { u: 4.0, v: 0.1, r: 0.2, delta: 0.1, ey: 0.9, epsi: 0.1, ..Default::default() };
        let reference = ReferenceHorizon::constant(6, 0.05, 4.5);
        let prob = MpcProblem::new(&s, &reference, &cfg, &p).unwrap();
        let mut rng = crate::rng::stream(3, 0, 0);
        for _ in 0..20 {
            let seq: Vec<_> =
                (0..6).map(|_| ControlInput::new(rng.random_range(-1.5..1.5), rng.random_range(-20.0..20.0))).collect();
            let a = prob.cost(&seq);
            let b = prob.rollout_cost(&seq);
            assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn solution_is_boxed_and_no_worse_than_zero() {
        let cfg = MpcConfig::default();
        let p = VehicleParams::default();
        let mut rng = crate::rng::stream(5, 0, 0);
        for _ in 0..20 {
            let s = VehicleState {
                u: rng.random_range(0.0..8.0),
                v: rng.random_range(-0.3..0.3),
                r: rng.random_range(-0.5..0.5),
                delta: rng.random_range(-0.4..0.4),
                ax: rng.random_range(-3.0..3.0),
                ey: rng.random_range(-1.5..1.5),
                epsi: rng.random_range(-0.4..0.4),
                ..Default::default()
            };
            let reference = ReferenceHorizon::constant(cfg.horizon, rng.random_range(-0.1..0.1), 5.0);
            let sol = mpc_step(&s, &reference, &cfg, &p, &ControlInput::ZERO).unwrap();
            assert!(sol.cost <= sol.zero_input_cost);
            for u in sol.sequence.iter().chain([&sol.command]) {
                assert!(u.zeta.abs() <= p.zeta_max && u.jerk.abs() <= p.jerk_max);
            }
            assert!((s.delta + cfg.dt * sol.command.zeta).abs() <= p.delta_max + 1e-12);
        }
    }

    #[test]
    fn leaving_the_corridor_triggers_safe_stop() {
        let cfg = MpcConfig::default();
        let p = VehicleParams::default();
        let s = VehicleState { u: 5.0, ey: 3.0, ..Default::default() };
        let sol = mpc_step(&s, &straight(cfg.horizon, 5.0), &cfg, &p, &ControlInput::ZERO).unwrap();
        assert!(!sol.feasible);
        assert_eq!(sol.command.zeta, 0.0);
        assert!(sol.command.jerk < 0.0);
    }

    #[test]
    fn deterministic() {
        let cfg = MpcConfig::default();
        let p = VehicleParams::default();
        let s = VehicleState { u: 3.0, ey: 0.3, epsi: -0.05, ..Default::default() };
        let r = ReferenceHorizon::constant(cfg.horizon, 0.08, 4.0);
        let a = mpc_step(&s, &r, &cfg, &p, &ControlInput::ZERO).unwrap();
        let b = mpc_step(&s, &r, &cfg, &p, &ControlInput::ZERO).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_reference() {
        let cfg = MpcConfig::default();
        let s = VehicleState::default();
        let r = ReferenceHorizon::constant(3, 0.0, 1.0);
        assert!(mpc_step(&s, &r, &cfg, &VehicleParams::default(), &ControlInput::ZERO).is_err());
        let bad = MpcConfig { horizon: 0, ..cfg };
        assert!(bad.validate().is_err());
    }
}
