//! Contact vector field, fixed-step RK4 orbits, the energy-decay identity and
//! omega-limit estimation.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::model::{torus_delta, wrap, ContactModel, LagrangianForm, Sample, Vec2};
use crate::real::{DoubleDouble, Real};

/// Orbits stop once `|p|` or `|u|` exceeds this.
pub const BLOW_UP: f64 = 1e6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FlowError {
    #[error("time step {0} outside (0, 0.1]")]
    BadStep(f64),
    #[error("t_end = {t_end} is not a whole number of steps of {dt}")]
    NotWholeSteps { t_end: f64, dt: f64 },
    #[error("trailing window of {0} time units is shorter than 10")]
    WindowTooShort(f64),
    #[error("orbit blew up; no limit set")]
    BlownUp,
    #[error("extended-precision integration needs a mechanical model")]
    NeedsMechanical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: Vec2,
    pub p: Vec2,
    pub u: f64,
}

impl State {
    pub fn new(x: Vec2, p: Vec2, u: f64) -> Self {
        Self {
            x: [wrap(x[0]), wrap(x[1])],
            p,
            u,
        }
    }

    pub fn scalar(x: f64, p: f64, u: f64) -> Self {
        Self::new([x, 0.0], [p, 0.0], u)
    }

    pub fn as_sample(&self) -> Sample {
        Sample::new(self.x, self.p, self.u)
    }
}

/// Torus metric in x, Euclidean in (p, u).
pub fn phase_distance(dim: usize, a: &Sample, b: &Sample) -> f64 {
    let mut s = (a.u - b.u).powi(2);
    for i in 0..dim {
        s += torus_delta(a.x[i], b.x[i]).powi(2) + (a.p[i] - b.p[i]).powi(2);
    }
    s.sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Orbit {
    pub model: String,
    pub dim: usize,
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<State>,
    pub blown_up: bool,
}

impl Orbit {
    pub fn duration(&self) -> f64 {
        self.dt * (self.states.len().saturating_sub(1)) as f64
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("orbit has at least the initial state")
    }

    /// State at time `t` (nearest sample).
    pub fn at_time(&self, t: f64) -> &State {
        let k = ((t - self.t0) / self.dt).round().max(0.0) as usize;
        &self.states[k.min(self.states.len() - 1)]
    }

    pub fn write_csv<W: Write>(&self, model: &ContactModel, mut w: W) -> io::Result<()> {
        if self.dim == 1 {
            writeln!(w, "t,x,p,u,H")?;
        } else {
            writeln!(w, "t,x,y,p,q,u,H")?;
        }
        for (k, s) in self.states.iter().enumerate() {
            let t = self.t0 + self.dt * k as f64;
            let h = model.hamiltonian(&s.x, &s.p, s.u);
            if self.dim == 1 {
                writeln!(w, "{t},{},{},{},{h}", s.x[0], s.p[0], s.u)?;
            } else {
                writeln!(w, "{t},{},{},{},{},{},{h}", s.x[0], s.x[1], s.p[0], s.p[1], s.u)?;
            }
        }
        Ok(())
    }
}

/// Right-hand side of the contact system:
/// `x' = H_p`, `p' = -H_x - H_u p`, `u' = p.H_p - H`.
pub fn contact_vector_field(model: &ContactModel, s: &State) -> (Vec2, Vec2, f64) {
    match &model.form {
        LagrangianForm::Mechanical(m) => m.vector_field(model.dim, s.x, s.p, s.u),
        LagrangianForm::Generic(_) => {
            let hp = model.grad_p(&s.x, &s.p, s.u);
            let hx = model.grad_x(&s.x, &s.p, s.u);
            let hu = model.grad_u(&s.x, &s.p, s.u);
            let h = model.hamiltonian(&s.x, &s.p, s.u);
            let mut dp = [0.0; 2];
            let mut php = 0.0;
            for i in 0..model.dim {
                dp[i] = -hx[i] - hu * s.p[i];
                php += s.p[i] * hp[i];
            }
            (hp, dp, php - h)
        }
    }
}

type Field<'a, T> = dyn Fn(&[T; 2], &[T; 2], T) -> ([T; 2], [T; 2], T) + 'a;

/// One classical RK4 step for a field over any scalar type; x is left unwrapped.
pub(crate) fn rk4_step<T: Real>(
    f: &Field<'_, T>,
    dim: usize,
    x: [T; 2],
    p: [T; 2],
    u: T,
    dt: T,
) -> ([T; 2], [T; 2], T) {
    let half = T::from_f64(0.5) * dt;
    let axpy = |a: [T; 2], s: T, b: [T; 2]| {
        let mut out = a;
        for i in 0..dim {
            out[i] = a[i] + s * b[i];
        }
        out
    };
    let (k1x, k1p, k1u) = f(&x, &p, u);
    let (k2x, k2p, k2u) = f(&axpy(x, half, k1x), &axpy(p, half, k1p), u + half * k1u);
    let (k3x, k3p, k3u) = f(&axpy(x, half, k2x), &axpy(p, half, k2p), u + half * k2u);
    let (k4x, k4p, k4u) = f(&axpy(x, dt, k3x), &axpy(p, dt, k3p), u + dt * k3u);
    let sixth = dt / T::from_f64(6.0);
    let two = T::from_f64(2.0);
    let mut nx = x;
    let mut np = p;
    for i in 0..dim {
        nx[i] = x[i] + sixth * (k1x[i] + two * k2x[i] + two * k3x[i] + k4x[i]);
        np[i] = p[i] + sixth * (k1p[i] + two * k2p[i] + two * k3p[i] + k4p[i]);
    }
    let nu = u + sixth * (k1u + two * k2u + two * k3u + k4u);
    (nx, np, nu)
}

fn step_count(t_end: f64, dt: f64) -> Result<usize, FlowError> {
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(FlowError::BadStep(dt));
    }
    let steps = t_end / dt;
    let rounded = steps.round();
    if t_end < 0.0 || (steps - rounded).abs() > 1e-6 * rounded.max(1.0) {
        return Err(FlowError::NotWholeSteps { t_end, dt });
    }
    Ok(rounded as usize)
}

pub fn integrate_orbit(
    model: &ContactModel,
    s0: State,
    t_end: f64,
    dt: f64,
) -> Result<Orbit, FlowError> {
    let steps = step_count(t_end, dt)?;
    let dim = model.dim;
    let field = |x: &Vec2, p: &Vec2, u: f64| contact_vector_field(model, &State { x: *x, p: *p, u });
    let mut states = Vec::with_capacity(steps + 1);
    let s0 = State::new(s0.x, s0.p, s0.u);
    states.push(s0);
    let mut blown_up = false;
    let (mut x, mut p, mut u) = (s0.x, s0.p, s0.u);
    for _ in 0..steps {
        let (nx, np, nu) = rk4_step(&field, dim, x, p, u, dt);
        x = [wrap(nx[0]), if dim == 2 { wrap(nx[1]) } else { 0.0 }];
        p = np;
        u = nu;
        let p_norm = p[0].abs().max(p[1].abs());
        if !(p_norm <= BLOW_UP && u.abs() <= BLOW_UP) {
            blown_up = true;
            break;
        }
        states.push(State { x, p, u });
    }
    Ok(Orbit {
        model: model.name.clone(),
        dim,
        t0: 0.0,
        dt,
        states,
        blown_up,
    })
}

/// Final state after `t_end` in double-double arithmetic (mechanical models only).
///
/// Used where an orbit must shadow a hyperbolic saddle for long times.
pub fn integrate_extended(
    model: &ContactModel,
    s0: &PreciseState,
    t_end: f64,
    dt: f64,
) -> Result<PreciseState, FlowError> {
    let steps = step_count(t_end, dt)?;
    let m = model.mechanical_form().ok_or(FlowError::NeedsMechanical)?;
    let dim = model.dim;
    let field = |x: &[DoubleDouble; 2], p: &[DoubleDouble; 2], u: DoubleDouble| {
        m.vector_field(dim, *x, *p, u)
    };
    let dt = DoubleDouble::from(dt);
    let mut s = *s0;
    for _ in 0..steps {
        let (x, p, u) = rk4_step(&field, dim, s.x, s.p, s.u, dt);
        s = PreciseState { x, p, u };
        if s.p[0].to_f64().abs() > BLOW_UP || s.u.to_f64().abs() > BLOW_UP {
            break;
        }
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreciseState {
    pub x: [DoubleDouble; 2],
    pub p: [DoubleDouble; 2],
    pub u: DoubleDouble,
}

impl PreciseState {
    pub fn from_parts(x: [DoubleDouble; 2], p: [DoubleDouble; 2], u: f64) -> Self {
        Self {
            x,
            p,
            u: DoubleDouble::from(u),
        }
    }

    /// Rounded to f64 with x reduced to the fundamental domain.
    pub fn to_state(&self) -> State {
        State::new(
            [self.x[0].to_f64(), self.x[1].to_f64()],
            [self.p[0].to_f64(), self.p[1].to_f64()],
            self.u.to_f64(),
        )
    }
}

/// `max_t |H(t) - H(0) exp(-int_0^t H_u ds)|` with a trapezoid integral.
pub fn energy_deviation(model: &ContactModel, orbit: &Orbit) -> f64 {
    let energy = |s: &State| model.hamiltonian(&s.x, &s.p, s.u);
    let hu = |s: &State| model.grad_u(&s.x, &s.p, s.u);
    let first = &orbit.states[0];
    let h0 = energy(first);
    let mut integral = 0.0;
    let mut prev_hu = hu(first);
    let mut worst: f64 = 0.0;
    for s in &orbit.states[1..] {
        let cur = hu(s);
        integral += 0.5 * orbit.dt * (prev_hu + cur);
        prev_hu = cur;
        worst = worst.max((energy(s) - h0 * (-integral).exp()).abs());
    }
    worst
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointSet {
    pub dim: usize,
    pub points: Vec<Sample>,
    /// Cluster radius or extraction tolerance the points were built with.
    pub radius: f64,
}

impl PointSet {
    pub fn distance_to(&self, s: &Sample) -> f64 {
        self.points
            .iter()
            .map(|q| phase_distance(self.dim, q, s))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Greedy farthest-point clustering; centers are torus-aware cluster means.
pub fn cluster_samples(dim: usize, samples: &[Sample], eps: f64) -> Vec<Sample> {
    if samples.is_empty() {
        return Vec::new();
    }
    let mut seeds = vec![samples[0]];
    let mut nearest: Vec<f64> = samples
        .iter()
        .map(|s| phase_distance(dim, s, &samples[0]))
        .collect();
    loop {
        let (far, dist) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &d)| if d > best.1 { (k, d) } else { best });
        if dist <= eps {
            break;
        }
        let seed = samples[far];
        seeds.push(seed);
        for (k, s) in samples.iter().enumerate() {
            nearest[k] = nearest[k].min(phase_distance(dim, s, &seed));
        }
    }
    let mut sums = vec![(Sample::new([0.0; 2], [0.0; 2], 0.0), 0usize); seeds.len()];
    for s in samples {
        let (c, _) = seeds
            .iter()
            .enumerate()
            .map(|(c, seed)| (c, phase_distance(dim, s, seed)))
            .fold((0, f64::INFINITY), |b, (c, d)| if d < b.1 { (c, d) } else { b });
        let seed = &seeds[c];
        let acc = &mut sums[c];
        for i in 0..dim {
            // accumulate x relative to the seed so clusters straddling 0 average correctly
            acc.0.x[i] += torus_delta(s.x[i], seed.x[i]);
            acc.0.p[i] += s.p[i];
        }
        acc.0.u += s.u;
        acc.1 += 1;
    }
    seeds
        .iter()
        .zip(sums)
        .map(|(seed, (sum, count))| {
            let w = 1.0 / count as f64;
            let mut x = [0.0; 2];
            let mut p = [0.0; 2];
            for i in 0..dim {
                x[i] = wrap(seed.x[i] + sum.x[i] * w);
                p[i] = sum.p[i] * w;
            }
            Sample::new(x, p, sum.u * w)
        })
        .collect()
}

pub fn omega_limit(
    orbit: &Orbit,
    window_fraction: f64,
    cluster_eps: f64,
) -> Result<PointSet, FlowError> {
    if orbit.blown_up {
        return Err(FlowError::BlownUp);
    }
    let window = window_fraction * orbit.duration();
    if window < 10.0 - 1e-9 {
        return Err(FlowError::WindowTooShort(window));
    }
    let keep = ((window / orbit.dt).round() as usize + 1).min(orbit.states.len());
    let tail = &orbit.states[orbit.states.len() - keep..];
    // Thinning keeps clustering cost bounded; spacing well below any sane eps.
    let stride = (keep / 20_000).max(1);
    let samples: Vec<Sample> = tail.iter().step_by(stride).map(State::as_sample).collect();
    Ok(PointSet {
        dim: orbit.dim,
        points: cluster_samples(orbit.dim, &samples, cluster_eps),
        radius: cluster_eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn pendulum() -> ContactModel {
        ContactModel::pendulum()
    }

    #[test]
    fn vector_field_examples() {
        let m = pendulum();
        let (dx, dp, du) = contact_vector_field(&m, &State::scalar(0.0, 0.0, 0.0));
        assert_eq!((dx[0], dp[0], du), (0.0, 0.0, 0.0));
        for &(x, p, u) in &[(0.4, 1.2, -0.3), (2.0, -0.7, 1.5)] {
            let (dx, dp, _) = contact_vector_field(&m, &State::scalar(x, p, u));
            assert!((dx[0] - p).abs() < 1e-15);
            assert!((dp[0] - (x.sin() - p)).abs() < 1e-14);
        }
        let lin = ContactModel::linear_discount(1);
        let (dx, dp, du) = contact_vector_field(&lin, &State::scalar(1.3, 0.0, 0.8));
        assert_eq!((dx[0], dp[0], du), (0.0, 0.0, -0.8));
    }

    #[test]
    fn generic_field_matches_mechanical() {
        let m = pendulum();
        let g = ContactModel::generic("g", 1, |x, p, u| 0.5 * p[0] * p[0] - 1.0 + x[0].cos() + u, 10.0, 4.0, None);
        let s = State::scalar(0.9, -0.4, 0.3);
        let (a, b, c) = contact_vector_field(&m, &s);
        let (d, e, f) = contact_vector_field(&g, &s);
        assert!((a[0] - d[0]).abs() < 1e-8 && (b[0] - e[0]).abs() < 1e-8 && (c - f).abs() < 1e-8);
    }

    #[test]
    fn fixed_point_orbit_stays_put() {
        let o = integrate_orbit(&pendulum(), State::scalar(0.0, 0.0, 0.0), 30.0, 1e-2).unwrap();
        assert_eq!(o.states.len(), 3_001);
        assert!(o.states.iter().all(|s| s.x[0].abs() < 1e-10 && s.p[0].abs() < 1e-10 && s.u.abs() < 1e-10));
        assert_eq!(energy_deviation(&pendulum(), &o), 0.0);
        let om = omega_limit(&o, 0.5, 1e-2).unwrap();
        assert_eq!(om.points.len(), 1);
        assert!(phase_distance(1, &om.points[0], &Sample::new([0.0; 2], [0.0; 2], 0.0)) < 1e-10);
    }

    #[test]
    fn spiral_into_focus() {
        let m = pendulum();
        let o = integrate_orbit(&m, State::scalar(1.0, 0.0, 0.0), 100.0, 1e-3).unwrap();
        let last = o.last();
        assert!((last.x[0] - PI).abs() < 1e-3 && last.p[0].abs() < 1e-3 && (last.u - 2.0).abs() < 1e-3);
    }

    #[test]
    fn discounted_decay_closed_form() {
        let lin = ContactModel::linear_discount(1);
        let o = integrate_orbit(&lin, State::scalar(2.0, 0.0, 1.0), 1.0, 1e-3).unwrap();
        assert!((o.last().u - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn step_validation() {
        let m = pendulum();
        let s = State::scalar(0.0, 0.0, 0.0);
        assert_eq!(integrate_orbit(&m, s, 1.0, 0.2).unwrap_err(), FlowError::BadStep(0.2));
        assert!(matches!(integrate_orbit(&m, s, 1.00005, 0.01), Err(FlowError::NotWholeSteps { .. })));
    }

    #[test]
    fn blow_up_is_flagged() {
        // H = p^2/2 - u at p = 0 gives u' = u
        let m = ContactModel::free_discount(1, -1.0, 0.0);
        let o = integrate_orbit(&m, State::scalar(0.0, 0.0, 1.0), 10.0, 0.01).unwrap();
        assert!(!o.blown_up);
        let o = integrate_orbit(&m, State::scalar(0.0, 0.0, 1.0), 20.0, 0.01).unwrap();
        assert!(o.blown_up);
        assert!(o.states.len() < 1500);
        assert_eq!(omega_limit(&o, 0.5, 1e-2).unwrap_err(), FlowError::BlownUp);
    }

    #[test]
    fn energy_identity_on_and_off_shell() {
        let m = pendulum();
        let x0: f64 = PI / 2.0;
        let u0 = -(0.5 - 1.0 + x0.cos());
        let o = integrate_orbit(&m, State::scalar(x0, 1.0, u0), 10.0, 1e-3).unwrap();
        assert!(energy_deviation(&m, &o) <= 1e-7);
        let o = integrate_orbit(&m, State::scalar(1.0, 0.0, 0.0), 5.0, 1e-3).unwrap();
        let h0 = -1.0 + 1.0f64.cos();
        assert!(energy_deviation(&m, &o) <= 1e-6);
        for (k, s) in o.states.iter().enumerate().step_by(500) {
            let t = k as f64 * 1e-3;
            assert!((m.hamiltonian(&s.x, &s.p, s.u) - h0 * (-t).exp()).abs() <= 1e-6);
        }
    }

    #[test]
    fn energy_shell_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let models = [pendulum(), ContactModel::free_discount(2, 0.8, 0.3)];
        for m in &models {
            for _ in 0..3 {
                let mut x = [0.0; 2];
                let mut p = [0.0; 2];
                for i in 0..m.dim {
                    x[i] = rng.gen_range(0.0..2.0 * PI);
                    p[i] = rng.gen_range(-1.5..1.5);
                }
                let u_guess = 0.0;
                let h = m.hamiltonian(&x, &p, u_guess);
                let u0 = u_guess - h / m.grad_u(&x, &p, u_guess);
                assert!(m.hamiltonian(&x, &p, u0).abs() <= 1e-12);
                let o = integrate_orbit(m, State::new(x, p, u0), 10.0, 1e-3).unwrap();
                let worst = o.states.iter().map(|s| m.hamiltonian(&s.x, &s.p, s.u).abs()).fold(0.0, f64::max);
                assert!(worst <= 1e-7, "{} {worst}", m.name);
            }
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let m = pendulum();
        let s0 = State::scalar(1.0, 0.5, 0.2);
        let final_at = |dt: f64| *integrate_orbit(&m, s0, 1.0, dt).unwrap().last();
        let reference = final_at(0.1 / 160.0 / 10.0);
        let err = |dt: f64| {
            let s = final_at(dt);
            (torus_delta(s.x[0], reference.x[0]).powi(2) + (s.p[0] - reference.p[0]).powi(2) + (s.u - reference.u).powi(2)).sqrt()
        };
        for dt in [0.1, 0.05, 0.025] {
            let ratio = err(dt) / err(dt / 2.0);
            assert!((12.0..=20.0).contains(&ratio), "dt={dt} ratio={ratio}");
        }
    }

    #[test]
    fn energy_deviation_regression_bound() {
        // deviation <= C dt^4 t_end with C fitted once at dt = 0.05
        let m = pendulum();
        let s0 = State::scalar(2.0, 1.0, 0.5);
        let dev = |dt: f64| energy_deviation(&m, &integrate_orbit(&m, s0, 5.0, dt).unwrap());
        let c = dev(0.05) / (0.05f64.powi(4) * 5.0);
        for dt in [0.025, 0.0125] {
            assert!(dev(dt) <= 1.5 * c * dt.powi(4) * 5.0);
        }
    }

    #[test]
    fn omega_limit_of_spiral() {
        let m = pendulum();
        let o = integrate_orbit(&m, State::scalar(1.0, 0.0, 0.0), 200.0, 1e-3).unwrap();
        let om = omega_limit(&o, 0.25, 1e-2).unwrap();
        assert_eq!(om.points.len(), 1);
        let c = om.points[0];
        assert!(phase_distance(1, &c, &Sample::new([PI, 0.0], [0.0; 2], 2.0)) < 1e-3);
        assert_eq!(omega_limit(&o, 0.04, 1e-2).unwrap_err(), FlowError::WindowTooShort(0.04 * 200.0));
    }

    #[test]
    fn clustering_handles_wraparound_and_separation() {
        let pts = vec![
            Sample::new([0.001, 0.0], [0.0; 2], 0.0),
            Sample::new([2.0 * PI - 0.001, 0.0], [0.0; 2], 0.0),
            Sample::new([3.0, 0.0], [0.0; 2], 1.0),
        ];
        let c = cluster_samples(1, &pts, 0.1);
        assert_eq!(c.len(), 2);
        assert!(c.iter().any(|s| torus_delta(s.x[0], 0.0).abs() < 1e-12));
    }

    #[test]
    fn extended_precision_agrees_with_f64_short_term() {
        let m = pendulum();
        let s0 = State::scalar(1.0, -1.2, 0.3);
        let o = integrate_orbit(&m, s0, 2.0, 0.01).unwrap();
        let dd = |v: f64| DoubleDouble::from(v);
        let p = integrate_extended(
            &m,
            &PreciseState::from_parts([dd(1.0), dd(0.0)], [dd(-1.2), dd(0.0)], 0.3),
            2.0,
            0.01,
        )
        .unwrap()
        .to_state();
        let f = o.last();
        assert!(torus_delta(p.x[0], f.x[0]).abs() < 1e-12 && (p.p[0] - f.p[0]).abs() < 1e-12 && (p.u - f.u).abs() < 1e-12);
        let g = ContactModel::generic("g", 1, |_, p, u| 0.5 * p[0] * p[0] + u, 10.0, 4.0, None);
        assert_eq!(
            integrate_extended(&g, &PreciseState::from_parts([dd(0.0); 2], [dd(0.0); 2], 0.0), 1.0, 0.1).unwrap_err(),
            FlowError::NeedsMechanical
        );
    }
}
