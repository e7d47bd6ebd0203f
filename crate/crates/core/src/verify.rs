//! The acceptance suite: twelve pass/fail checks with measured values.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::implicit_action;
use crate::flow::{energy_deviation, integrate_orbit, omega_limit, phase_distance, State};
use crate::grid::{GridFunction, PeriodicGrid};
use crate::minimizer::{
    check_globally_minimizing, initial_momentum, land_precise, linearize_saddle, polish_p0,
    saddle_stable_manifold, shoot_p0, DEFAULT_CAUCHY_TOL, DEFAULT_SEED, DEFAULT_T_BACK,
};
use crate::model::{torus_delta, ContactModel, Sample};
use crate::oracle::{brute_force_evolve, TinyModel, TinyProblem};
use crate::semigroup::{backends_agree, evolve, scheme_tolerance, Direction, EvolveSettings};
use crate::weakkam::{
    conjugate_forward_limit, default_mane_epsilon, mane_set, solve_stationary, ConvergenceTrace,
    WeakKamError,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Grid and step of the Mane, uniqueness and collapse checks.
    pub mane_n: usize,
    pub mane_delta: f64,
    pub tol: f64,
    pub t_max: f64,
    /// Grid and step of the semigroup property and comparison checks.
    pub property_n: usize,
    pub property_delta: f64,
    /// Grid of the backend, action and minimizer checks.
    pub table_n: usize,
    pub table_delta: f64,
    /// Criterion 1 runs in a one-thread pool when set.
    pub single_thread_mane: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            mane_n: 512,
            mane_delta: 1e-3,
            tol: 1e-4,
            t_max: 60.0,
            property_n: 128,
            property_delta: 1e-2,
            table_n: 256,
            table_delta: 1e-2,
            single_thread_mane: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: value {:.4e} (threshold {:.4e}) {} [{:.1}s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.value,
            self.threshold,
            self.detail,
            self.seconds
        )
    }
}

struct Stationary {
    u_minus: GridFunction,
    trace: ConvergenceTrace,
    u_plus: GridFunction,
    seconds: f64,
}

/// Runs the criteria, sharing the expensive pendulum solves between them.
pub struct Verifier {
    pub config: VerifyConfig,
    pendulum: ContactModel,
    stationary: OnceLock<Result<Stationary, String>>,
    property_u_minus: OnceLock<Result<GridFunction, String>>,
}

type Outcome = Result<(bool, f64, f64, String), String>;

fn timed(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> CriterionResult {
    let start = Instant::now();
    let outcome = f();
    let seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok((passed, value, threshold, detail)) => CriterionResult {
            id,
            name: name.into(),
            passed,
            value,
            threshold,
            detail,
            seconds,
        },
        Err(e) => CriterionResult {
            id,
            name: name.into(),
            passed: false,
            value: f64::NAN,
            threshold: f64::NAN,
            detail: format!("error: {e}"),
            seconds,
        },
    }
}

fn smooth_random(rng: &mut ChaCha8Rng, grid: PeriodicGrid, amp: f64) -> GridFunction {
    let modes: Vec<(f64, f64, f64)> = (1..=4)
        .map(|k| (f64::from(k), rng.gen_range(-amp..amp) / f64::from(k), rng.gen_range(0.0..6.3)))
        .collect();
    let offset = rng.gen_range(-amp..amp);
    GridFunction::from_fn(grid, |x| {
        offset + modes.iter().map(|(k, a, ph)| a * (k * x[0] + ph).sin()).sum::<f64>()
    })
}

const NAMES: [&str; 12] = [
    "pendulum Mane set",
    "uniqueness of the stationary solution",
    "exponential convergence rate",
    "forward collapse below u_-",
    "semigroup properties",
    "comparison with barrier pair",
    "backend cross-check",
    "brute-force oracle equivalence",
    "omega-limit inclusion for minimizers",
    "stable manifold and shooting",
    "action identity",
    "energy identity",
];

impl Verifier {
    pub fn new(config: VerifyConfig) -> Self {
        Self {
            config,
            pendulum: ContactModel::pendulum(),
            stationary: OnceLock::new(),
            property_u_minus: OnceLock::new(),
        }
    }

    pub fn name(id: u32) -> &'static str {
        NAMES[(id - 1) as usize]
    }

    pub fn run(&self, id: u32) -> CriterionResult {
        let name = Self::name(id);
        match id {
            1 => timed(id, name, || self.mane()),
            2 => timed(id, name, || self.uniqueness()),
            3 => timed(id, name, || self.rate()),
            4 => timed(id, name, || self.collapse()),
            5 => timed(id, name, || self.semigroup_properties()),
            6 => timed(id, name, || self.comparison()),
            7 => timed(id, name, || self.backends()),
            8 => timed(id, name, || self.oracle()),
            9 => timed(id, name, || self.omega_inclusion()),
            10 => timed(id, name, || self.manifold()),
            11 => timed(id, name, || self.action_identity()),
            12 => timed(id, name, || self.energy()),
            _ => panic!("criterion ids run from 1 to 12"),
        }
    }

    pub fn run_all(&self) -> Vec<CriterionResult> {
        (1..=12).map(|id| self.run(id)).collect()
    }

    fn mane_grid(&self) -> PeriodicGrid {
        PeriodicGrid::new(1, self.config.mane_n).expect("valid grid")
    }

    fn mane_settings(&self) -> EvolveSettings {
        EvolveSettings::variational(&self.pendulum, self.config.mane_delta)
    }

    fn stationary(&self) -> Result<&Stationary, String> {
        self.stationary
            .get_or_init(|| {
                let work = || -> Result<Stationary, String> {
                    let start = Instant::now();
                    let s = self.mane_settings();
                    let zero = GridFunction::constant(self.mane_grid(), 0.0);
                    let c = &self.config;
                    let (u_minus, trace) = solve_stationary(&self.pendulum, &zero, c.tol, c.t_max, &s)
                        .map_err(|e| e.to_string())?;
                    let (u_plus, _) = conjugate_forward_limit(&self.pendulum, &u_minus, c.tol, c.t_max, &s)
                        .map_err(|e| e.to_string())?;
                    Ok(Stationary {
                        u_minus,
                        trace,
                        u_plus,
                        seconds: start.elapsed().as_secs_f64(),
                    })
                };
                if self.config.single_thread_mane {
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(1)
                        .build()
                        .map_err(|e| e.to_string())?
                        .install(work)
                } else {
                    work()
                }
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn property_u_minus(&self) -> Result<&GridFunction, String> {
        self.property_u_minus
            .get_or_init(|| {
                let g = PeriodicGrid::new(1, self.config.property_n).map_err(|e| e.to_string())?;
                let s = EvolveSettings::variational(&self.pendulum, self.config.property_delta);
                solve_stationary(&self.pendulum, &GridFunction::constant(g, 0.0), self.config.tol, self.config.t_max, &s)
                    .map(|r| r.0)
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn mane(&self) -> Outcome {
        let st = self.stationary()?;
        let eps = default_mane_epsilon(st.u_minus.grid.spacing, self.config.tol);
        let mane = mane_set(&st.u_minus, &st.u_plus, eps).map_err(|e| e.to_string())?;
        let origin = Sample::new([0.0; 2], [0.0; 2], 0.0);
        let dist = mane
            .clusters
            .iter()
            .map(|c| phase_distance(1, c, &origin))
            .fold(0.0, f64::max);
        let passed = mane.clusters.len() == 1 && dist <= 3e-2 && st.seconds <= 120.0;
        Ok((
            passed,
            dist,
            3e-2,
            format!("{} cluster(s), solve time {:.1}s (limit 120s)", mane.clusters.len(), st.seconds),
        ))
    }

    fn uniqueness(&self) -> Outcome {
        let st = self.stationary()?;
        let g = self.mane_grid();
        let s = self.mane_settings();
        let inits = [
            GridFunction::constant(g, 1.0),
            GridFunction::from_fn(g, |x| x[0].sin()),
            GridFunction::from_fn(g, |x| -0.5 + (2.0 * x[0]).cos()),
            GridFunction::from_fn(g, |x| 2.0 * (x[0] - 3.0).abs().min(1.0)),
        ];
        let start = Instant::now();
        let mut sols = inits
            .par_iter()
            .map(|phi| solve_stationary(&self.pendulum, phi, self.config.tol, self.config.t_max, &s).map(|r| r.0))
            .collect::<Result<Vec<_>, WeakKamError>>()
            .map_err(|e| e.to_string())?;
        let seconds = start.elapsed().as_secs_f64() + st.seconds;
        sols.push(st.u_minus.clone());
        let mut worst: f64 = 0.0;
        for i in 0..sols.len() {
            for j in i + 1..sols.len() {
                worst = worst.max(sols[i].sup_norm_diff(&sols[j]).map_err(|e| e.to_string())?);
            }
        }
        Ok((
            worst <= 2e-4 && seconds <= 600.0,
            worst,
            2e-4,
            format!("5 initial data, total solve time {seconds:.1}s (limit 600s)"),
        ))
    }

    fn rate(&self) -> Outcome {
        let st = self.stationary()?;
        let m = st.trace.m_obs.ok_or("too few probes for a rate fit")?;
        Ok((m >= 0.4, m, 0.4, format!("{} probes", st.trace.samples.len())))
    }

    fn collapse(&self) -> Outcome {
        let st = self.stationary()?;
        let below = st.u_minus.shifted(-0.05);
        let s = self.mane_settings();
        match conjugate_forward_limit(&self.pendulum, &below, self.config.tol, self.config.t_max, &s) {
            Err(WeakKamError::Diverged(trace)) => {
                let run = trace.longest_decreasing_run();
                Ok((run >= 10, run as f64, 10.0, "diverged; value is the decreasing probe run".into()))
            }
            Err(e) => Ok((false, f64::NAN, 10.0, format!("unexpected outcome: {e}"))),
            Ok(_) => Ok((false, f64::NAN, 10.0, "converged instead of diverging".into())),
        }
    }

    fn semigroup_properties(&self) -> Outcome {
        let p = &self.pendulum;
        let c = &self.config;
        let g = PeriodicGrid::new(1, c.property_n).map_err(|e| e.to_string())?;
        let sv = EvolveSettings::variational(p, c.property_delta);
        let slf = EvolveSettings::lax_friedrichs(2e-3);
        let t = 1.0;
        let tol = scheme_tolerance(&sv, g.spacing, t);
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let pairs: Vec<(GridFunction, GridFunction)> = (0..50)
            .map(|_| {
                let lo = smooth_random(&mut rng, g, 1.0);
                let gap = smooth_random(&mut rng, g, 0.5).map(f64::abs);
                let hi = GridFunction::new(g, lo.values.iter().zip(&gap.values).map(|(a, b)| a + b).collect())
                    .expect("same grid");
                (lo, hi)
            })
            .collect();
        let err = |e: crate::semigroup::SemigroupError| e.to_string();
        let order_failures = pairs
            .par_iter()
            .map(|(lo, hi)| -> Result<usize, String> {
                let mut fails = 0;
                for (s, dir) in [(&sv, Direction::Backward), (&sv, Direction::Forward), (&slf, Direction::Backward)] {
                    let a = evolve(p, lo, t, s, dir).map_err(err)?;
                    let b = evolve(p, hi, t, s, dir).map_err(err)?;
                    fails += usize::from(a.max_excess_over(&b).map_err(|e| e.to_string())? > 1e-12);
                }
                Ok(fails)
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .sum::<usize>();
        let conj_failures = pairs[..10]
            .par_iter()
            .map(|(phi, _)| -> Result<usize, String> {
                let fwd = evolve(p, phi, t, &sv, Direction::Forward).map_err(err)?;
                let back_fwd = evolve(p, &fwd, t, &sv, Direction::Backward).map_err(err)?;
                let bwd = evolve(p, phi, t, &sv, Direction::Backward).map_err(err)?;
                let fwd_back = evolve(p, &bwd, t, &sv, Direction::Forward).map_err(err)?;
                let a = phi.max_excess_over(&back_fwd).map_err(|e| e.to_string())? > tol;
                let b = fwd_back.max_excess_over(phi).map_err(|e| e.to_string())? > tol;
                Ok(usize::from(a) + usize::from(b))
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .sum::<usize>();
        let u_minus = self.property_u_minus()?;
        let sub = u_minus.shifted(-0.1);
        let mut sub_failures = 0;
        for t in [1.0, 2.0, 5.0] {
            let out = evolve(p, &sub, t, &sv, Direction::Backward).map_err(err)?;
            let tol = scheme_tolerance(&sv, g.spacing, t);
            sub_failures += usize::from(sub.max_excess_over(&out).map_err(|e| e.to_string())? > tol);
        }
        let total = order_failures + conj_failures + sub_failures;
        Ok((
            total == 0,
            total as f64,
            0.0,
            format!("failures: order {order_failures}/150, conjugate {conj_failures}/20, subsolution {sub_failures}/3"),
        ))
    }

    fn comparison(&self) -> Outcome {
        let p = &self.pendulum;
        let u_minus = self.property_u_minus()?;
        let s = EvolveSettings::variational(p, self.config.property_delta);
        let (d0, m) = (0.1, 0.5);
        let mut worst = f64::NEG_INFINITY;
        let mut violations = 0;
        for t in [1.0, 2.0, 5.0] {
            let tol = scheme_tolerance(&s, u_minus.grid.spacing, t);
            let barrier = d0 * (-m * t).exp();
            let low = evolve(p, &u_minus.shifted(-d0), t, &s, Direction::Backward).map_err(|e| e.to_string())?;
            let high = evolve(p, &u_minus.shifted(d0), t, &s, Direction::Backward).map_err(|e| e.to_string())?;
            let below = u_minus.shifted(-barrier).max_excess_over(&low).map_err(|e| e.to_string())?;
            let above = high.max_excess_over(&u_minus.shifted(barrier)).map_err(|e| e.to_string())?;
            for excess in [below, above] {
                worst = worst.max(excess - tol);
                violations += usize::from(excess > tol);
            }
        }
        Ok((
            violations == 0,
            worst,
            0.0,
            format!("{violations} violations; value is the worst excess beyond tolerance"),
        ))
    }

    fn backends(&self) -> Outcome {
        let g = PeriodicGrid::new(1, self.config.table_n).map_err(|e| e.to_string())?;
        let slf = EvolveSettings::lax_friedrichs(1e-3);
        let lin = ContactModel::linear_discount(1);
        let cases = [
            (&self.pendulum, GridFunction::constant(g, 0.0)),
            (&lin, GridFunction::from_fn(g, |x| 0.5 * x[0].cos())),
        ];
        let gaps = cases
            .par_iter()
            .map(|(m, phi)| backends_agree(m, phi, 2.0, &EvolveSettings::variational(m, 1e-3), &slf))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let worst = gaps.iter().copied().fold(0.0, f64::max);
        Ok((worst <= 5e-2, worst, 5e-2, format!("pendulum {:.3e}, linear discount {:.3e}", gaps[0], gaps[1])))
    }

    fn oracle(&self) -> Outcome {
        let mut problems = Vec::new();
        for model in [
            TinyModel::Pendulum,
            TinyModel::LinearDiscount,
            TinyModel::FreeDiscount { lambda: 0.8, amp: 0.5 },
            TinyModel::NoSolution,
        ] {
            for (n, steps, delta) in [(16, 1, 0.25), (16, 4, 0.25), (12, 6, 0.2), (8, 8, 0.25)] {
                problems.push(TinyProblem::new(model, 1, n, steps, delta, 4.0 * delta).map_err(|e| e.to_string())?);
            }
            if model == TinyModel::Pendulum {
                continue;
            }
            for (n, steps) in [(8, 2), (8, 4), (8, 5)] {
                problems.push(TinyProblem::new(model, 2, n, steps, 0.25, 1.0).map_err(|e| e.to_string())?);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let inputs: Vec<(TinyProblem, GridFunction)> = problems
            .into_iter()
            .map(|pr| {
                let values = (0..pr.grid().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (pr, GridFunction::new(pr.grid(), values).expect("sizes match"))
            })
            .collect();
        let count = inputs.len();
        let worst = inputs
            .par_iter()
            .map(|(pr, phi)| -> Result<f64, String> {
                let model = pr.contact_model();
                let t = pr.delta * pr.steps as f64;
                let dp = evolve(&model, phi, t, &pr.settings(), Direction::Backward).map_err(|e| e.to_string())?;
                let brute = brute_force_evolve(pr, phi).map_err(|e| e.to_string())?;
                dp.sup_norm_diff(&brute).map_err(|e| e.to_string())
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok((worst <= 1e-12, worst, 1e-12, format!("{count} tiny problems")))
    }

    fn omega_inclusion(&self) -> Outcome {
        let p = &self.pendulum;
        let g = PeriodicGrid::new(1, self.config.table_n).map_err(|e| e.to_string())?;
        let s = EvolveSettings::variational(p, self.config.table_delta);
        let (a, b) = saddle_stable_manifold(p, DEFAULT_SEED, DEFAULT_T_BACK).map_err(|e| e.to_string())?;
        let origin = Sample::new([0.0; 2], [0.0; 2], 0.0);
        let starts: Vec<(f64, f64)> = [0.5, 1.0, 1.5, 2.0]
            .iter()
            .flat_map(|&x| [(x, -0.5), (x, 0.5)])
            .collect();
        let results = starts
            .par_iter()
            .map(|&(x0, u0)| -> Result<(f64, f64), String> {
                let (p0, _) = initial_momentum(p, g, [x0, 0.0], u0, &[4.0, 8.0, 16.0], &s, DEFAULT_CAUCHY_TOL)
                    .map_err(|e| e.to_string())?;
                let shots = shoot_p0(&[&a, &b], x0).map_err(|e| e.to_string())?;
                let nearest = shots
                    .iter()
                    .copied()
                    .min_by(|x, y| (x - p0[0]).abs().total_cmp(&(y - p0[0]).abs()))
                    .expect("non-empty");
                let polished = polish_p0(p, x0, nearest, u0).map_err(|e| e.to_string())?;
                let orbit = integrate_orbit(p, State::scalar(x0, polished.hi, u0), 40.0, 1e-2)
                    .map_err(|e| e.to_string())?;
                let omega = omega_limit(&orbit, 0.25, 5e-2).map_err(|e| e.to_string())?;
                let dist = omega
                    .points
                    .iter()
                    .map(|c| phase_distance(1, c, &origin))
                    .fold(0.0, f64::max);
                Ok(((nearest - p0[0]).abs(), dist))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let consistency = results.iter().map(|r| r.0).fold(0.0, f64::max);
        let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);

        let control = integrate_orbit(p, State::scalar(1.0, 0.0, 0.0), 60.0, 1e-2).map_err(|e| e.to_string())?;
        let omega = omega_limit(&control, 0.25, 5e-2).map_err(|e| e.to_string())?;
        let focus = Sample::new([std::f64::consts::PI, 0.0], [0.0; 2], 2.0);
        let focus_dist = omega.points.iter().map(|c| phase_distance(1, c, &focus)).fold(0.0, f64::max);
        let defect = check_globally_minimizing(p, g, &control, &s, &[(0.0, 10.0)]).map_err(|e| e.to_string())?;
        let passed = worst <= 5e-2 && consistency <= 5e-2 && focus_dist <= 5e-2 && defect > 0.1;
        Ok((
            passed,
            worst,
            5e-2,
            format!(
                "8 starts; max |p0 - shot| {consistency:.2e}; control orbit: distance to (pi,0,2) {focus_dist:.2e}, defect {defect:.3} (> 0.1)"
            ),
        ))
    }

    fn manifold(&self) -> Outcome {
        let p = &self.pendulum;
        let lin = linearize_saddle(p).map_err(|e| e.to_string())?;
        let root5 = 5f64.sqrt();
        let (stable, unstable) = ((-1.0 - root5) / 2.0, (-1.0 + root5) / 2.0);
        let (a, b) = saddle_stable_manifold(p, DEFAULT_SEED, DEFAULT_T_BACK).map_err(|e| e.to_string())?;
        let mut slope_err = (lin.stable_slope() - stable).abs().max((lin.unstable_slope() - unstable).abs());
        for branch in [&a, &b] {
            // secant slope from the saddle to the first sample at distance 1e-3
            let z = branch
                .points
                .iter()
                .find(|z| z[0].hypot(z[1]) >= 1e-3)
                .ok_or("branch never leaves the seed neighbourhood")?;
            slope_err = slope_err.max((z[1] / z[0] - stable).abs());
        }
        let shots = shoot_p0(&[&a, &b], 1.0).map_err(|e| e.to_string())?;
        let landings = shots
            .par_iter()
            .map(|&q| -> Result<f64, String> {
                let polished = polish_p0(p, 1.0, q, 0.0).map_err(|e| e.to_string())?;
                let end = land_precise(p, 1.0, polished, 0.0, 100.0).map_err(|e| e.to_string())?;
                Ok(torus_delta(end.x[0], 0.0).abs().max(end.p[0].abs()).max(end.u.abs()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let landing = landings.iter().copied().fold(0.0, f64::max);
        Ok((
            slope_err <= 1e-3 && landing <= 1e-2,
            landing,
            1e-2,
            format!("{} crossing(s) at x0 = 1; worst eigen-slope error {slope_err:.2e} (<= 1e-3)", shots.len()),
        ))
    }

    fn action_identity(&self) -> Outcome {
        let p = &self.pendulum;
        let g = PeriodicGrid::new(1, self.config.table_n).map_err(|e| e.to_string())?;
        let s = EvolveSettings::variational(p, self.config.table_delta);
        let table = implicit_action(p, g, [1.0, 0.0], 0.0, 6.0, &s, Direction::Backward).map_err(|e| e.to_string())?;
        let h1 = table.layer(1.0).ok_or("layer t = 1 missing")?;
        let mut worst: f64 = 0.0;
        for t in [1.0, 2.0, 5.0] {
            let evolved = evolve(p, h1, t, &s, Direction::Backward).map_err(|e| e.to_string())?;
            let layer = table.layer(t + 1.0).ok_or("layer missing")?;
            worst = worst.max(layer.sup_norm_diff(&evolved).map_err(|e| e.to_string())?);
        }
        Ok((worst <= 8e-2, worst, 8e-2, "t in {1, 2, 5}".into()))
    }

    fn energy(&self) -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let starts: Vec<State> = (0..20)
            .map(|_| State::scalar(rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let worst = starts
            .par_iter()
            .map(|s| integrate_orbit(&self.pendulum, *s, 5.0, 1e-3).map(|o| energy_deviation(&self.pendulum, &o)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?
            .into_iter()
            .fold(0.0, f64::max);
        Ok((worst <= 1e-6, worst, 1e-6, "20 random orbits".into()))
    }
}

pub fn all_passed(results: &[CriterionResult]) -> bool {
    results.iter().all(|r| r.passed)
}
