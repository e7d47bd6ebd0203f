//! Contact Hamiltonians `H(x, p, u)` on the flat torus, their Legendre duals,
//! the built-in catalog, and sampled checks of the structural conditions.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::expr::{Expr, ParseError, Var};
use crate::real::Real;

/// Torus point, covector or velocity. Only the first `dim` entries are used.
pub type Vec2 = [f64; 2];

/// Step for central-difference fallbacks.
pub const FD_STEP: f64 = 1e-5;
/// Half-width of the sampled slab around `{H = 0}`.
pub const ENERGY_SLAB: f64 = 1e-2;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("legendre sup for v = {v:?} attained on the p-box boundary (half-width {p_box})")]
    DualRangeExceeded { v: Vec2, p_box: f64 },
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("bad parameter {name}: {reason}")]
    BadParameter { name: String, reason: String },
    #[error("expression error in {field}: {source}")]
    Expression {
        field: String,
        #[source]
        source: ParseError,
    },
}

/// Reduce a coordinate to `[0, 2*pi)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

/// Signed shortest representative of `a - b` on the circle.
#[inline]
pub fn torus_delta(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        d - 2.0 * PI
    } else {
        d
    }
}

/// `H = a(x)|p|^2/2 + b(x).p + V(x) + f(x,u)` with closed-form dual.
#[derive(Clone, Debug)]
pub struct MechanicalContact {
    pub kinetic: Expr,
    pub drift: [Expr; 2],
    pub potential: Expr,
    pub coupling: Expr,
    d_kinetic: [Expr; 2],
    d_drift: [[Expr; 2]; 2],
    d_potential: [Expr; 2],
    d_coupling: [Expr; 2],
    d_coupling_u: Expr,
}

impl MechanicalContact {
    pub fn new(kinetic: Expr, drift: [Expr; 2], potential: Expr, coupling: Expr) -> Self {
        let axes = [Var::X, Var::Y];
        let d_kinetic = axes.map(|v| kinetic.derivative(v));
        let d_drift = [
            axes.map(|v| drift[0].derivative(v)),
            axes.map(|v| drift[1].derivative(v)),
        ];
        let d_potential = axes.map(|v| potential.derivative(v));
        let d_coupling = axes.map(|v| coupling.derivative(v));
        let d_coupling_u = coupling.derivative(Var::U);
        Self {
            kinetic,
            drift,
            potential,
            coupling,
            d_kinetic,
            d_drift,
            d_potential,
            d_coupling,
            d_coupling_u,
        }
    }

    #[inline]
    fn eval_h<T: Real>(&self, dim: usize, x: [T; 2], p: [T; 2], u: T) -> T {
        let a = self.kinetic.eval(x[0], x[1], u);
        let mut p2 = T::zero();
        let mut bp = T::zero();
        for i in 0..dim {
            p2 = p2 + p[i] * p[i];
            bp = bp + self.drift[i].eval(x[0], x[1], u) * p[i];
        }
        T::from_f64(0.5) * a * p2
            + bp
            + self.potential.eval(x[0], x[1], u)
            + self.coupling.eval(x[0], x[1], u)
    }

    /// Contact vector field evaluated in any scalar type.
    pub(crate) fn vector_field<T: Real>(
        &self,
        dim: usize,
        x: [T; 2],
        p: [T; 2],
        u: T,
    ) -> ([T; 2], [T; 2], T) {
        let a = self.kinetic.eval(x[0], x[1], u);
        let b = [
            self.drift[0].eval(x[0], x[1], u),
            self.drift[1].eval(x[0], x[1], u),
        ];
        let mut p2 = T::zero();
        for i in 0..dim {
            p2 = p2 + p[i] * p[i];
        }
        let mut hp = [T::zero(); 2];
        for i in 0..dim {
            hp[i] = a * p[i] + b[i];
        }
        let hu = self.d_coupling_u.eval(x[0], x[1], u);
        let mut dp = [T::zero(); 2];
        for i in 0..dim {
            let mut hx = T::from_f64(0.5) * self.d_kinetic[i].eval(x[0], x[1], u) * p2
                + self.d_potential[i].eval(x[0], x[1], u)
                + self.d_coupling[i].eval(x[0], x[1], u);
            for j in 0..dim {
                hx = hx + self.d_drift[j][i].eval(x[0], x[1], u) * p[j];
            }
            dp[i] = -hx - hu * p[i];
        }
        let h = self.eval_h(dim, x, p, u);
        let mut php = T::zero();
        for i in 0..dim {
            php = php + p[i] * hp[i];
        }
        (hp, dp, php - h)
    }
}

/// Hamiltonian given only as a function; duals and gradients are numeric.
#[derive(Clone)]
pub struct GenericHamiltonian {
    pub func: Arc<dyn Fn(&Vec2, &Vec2, f64) -> f64 + Send + Sync>,
    /// Half-width of the momentum box searched by the numeric Legendre transform.
    pub p_box: f64,
}

impl fmt::Debug for GenericHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericHamiltonian")
            .field("p_box", &self.p_box)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum LagrangianForm {
    Mechanical(MechanicalContact),
    Generic(GenericHamiltonian),
}

#[derive(Clone, Debug)]
pub struct ContactModel {
    pub name: String,
    pub dim: usize,
    pub form: LagrangianForm,
    /// Bound on `|dH/du|`.
    pub kappa: f64,
    /// Velocity bound used to truncate variational searches.
    pub v_max: f64,
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn dim_param(params: &BTreeMap<String, f64>) -> Result<usize, ModelError> {
    match param(params, "dim", 1.0) {
        d if d == 1.0 => Ok(1),
        d if d == 2.0 => Ok(2),
        d => Err(ModelError::BadParameter {
            name: "dim".into(),
            reason: format!("must be 1 or 2, got {d}"),
        }),
    }
}

impl ContactModel {
    pub const CATALOG: [&'static str; 4] =
        ["pendulum", "linear_discount", "free_discount", "no_solution"];

    /// `H = p^2/2 - 1 + cos x + u`.
    pub fn pendulum() -> Self {
        Self::mechanical_exprs(
            "pendulum",
            1,
            Expr::c(1.0),
            [Expr::c(0.0), Expr::c(0.0)],
            Expr::parse("-1 + cos(x)").expect("static expression"),
            Expr::u(),
            4.0,
            Some(1.0),
        )
    }

    /// `H = |p|^2/2 + u`.
    pub fn linear_discount(dim: usize) -> Self {
        Self::mechanical_exprs(
            "linear_discount",
            dim,
            Expr::c(1.0),
            [Expr::c(0.0), Expr::c(0.0)],
            Expr::c(0.0),
            Expr::u(),
            4.0,
            Some(1.0),
        )
    }

    /// `H = |p|^2/2 + lambda u + amp (cos x [+ cos y])`.
    pub fn free_discount(dim: usize, lambda: f64, amp: f64) -> Self {
        let pot = if dim == 2 {
            Expr::parse("cos(x) + cos(y)").expect("static expression")
        } else {
            Expr::parse("cos(x)").expect("static expression")
        };
        let pot = Expr::Mul(Box::new(Expr::c(amp)), Box::new(pot)).simplify();
        let coupling = Expr::Mul(Box::new(Expr::c(lambda)), Box::new(Expr::u())).simplify();
        Self::mechanical_exprs(
            "free_discount",
            dim,
            Expr::c(1.0),
            [Expr::c(0.0), Expr::c(0.0)],
            pot,
            coupling,
            4.0,
            Some(lambda.abs()),
        )
    }

    /// `H = |p|^2/2 - 1`; no stationary solution exists.
    pub fn no_solution(dim: usize) -> Self {
        Self::mechanical_exprs(
            "no_solution",
            dim,
            Expr::c(1.0),
            [Expr::c(0.0), Expr::c(0.0)],
            Expr::c(-1.0),
            Expr::c(0.0),
            4.0,
            Some(0.0),
        )
    }

    pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<Self, ModelError> {
        let mut model = match name {
            "pendulum" if dim_param(params)? == 1 => Self::pendulum(),
            "pendulum" => {
                return Err(ModelError::BadParameter {
                    name: "dim".into(),
                    reason: "the pendulum is one-dimensional".into(),
                })
            }
            "linear_discount" => Self::linear_discount(dim_param(params)?),
            "free_discount" => Self::free_discount(
                dim_param(params)?,
                param(params, "lambda", 1.0),
                param(params, "amp", 0.5),
            ),
            "no_solution" => Self::no_solution(dim_param(params)?),
            other => return Err(ModelError::UnknownModel(other.to_string())),
        };
        if let Some(v) = params.get("v_max") {
            if !(*v > 0.0) {
                return Err(ModelError::BadParameter {
                    name: "v_max".into(),
                    reason: "must be positive".into(),
                });
            }
            model.v_max = *v;
        }
        Ok(model)
    }

    /// Mechanical model from coefficient source strings.
    #[allow(clippy::too_many_arguments)]
    pub fn mechanical(
        name: &str,
        dim: usize,
        kinetic: &str,
        drift: [&str; 2],
        potential: &str,
        coupling: &str,
        v_max: f64,
        kappa: Option<f64>,
    ) -> Result<Self, ModelError> {
        let parse = |field: &str, src: &str| {
            Expr::parse(src).map_err(|source| ModelError::Expression {
                field: field.to_string(),
                source,
            })
        };
        let kinetic = parse("kinetic", kinetic)?;
        let drift = [parse("drift_x", drift[0])?, parse("drift_y", drift[1])?];
        let potential = parse("potential", potential)?;
        let coupling = parse("coupling", coupling)?;
        if dim == 1 {
            for (f, e) in [
                ("kinetic", &kinetic),
                ("drift_x", &drift[0]),
                ("potential", &potential),
                ("coupling", &coupling),
            ] {
                if e.depends_on(Var::Y) {
                    return Err(ModelError::BadParameter {
                        name: f.into(),
                        reason: "one-dimensional model may not depend on y".into(),
                    });
                }
            }
        }
        for (f, e) in [("kinetic", &kinetic), ("drift_x", &drift[0]), ("drift_y", &drift[1])] {
            if e.depends_on(Var::U) {
                return Err(ModelError::BadParameter {
                    name: f.into(),
                    reason: "only the coupling term may depend on u".into(),
                });
            }
        }
        Ok(Self::mechanical_exprs(
            name, dim, kinetic, drift, potential, coupling, v_max, kappa,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn mechanical_exprs(
        name: &str,
        dim: usize,
        kinetic: Expr,
        drift: [Expr; 2],
        potential: Expr,
        coupling: Expr,
        v_max: f64,
        kappa: Option<f64>,
    ) -> Self {
        let mech = MechanicalContact::new(kinetic, drift, potential, coupling);
        let mut model = Self {
            name: name.to_string(),
            dim,
            form: LagrangianForm::Mechanical(mech),
            kappa: 0.0,
            v_max,
        };
        model.kappa = kappa.unwrap_or_else(|| model.estimate_kappa(-10.0, 10.0, 32));
        model
    }

    pub fn generic(
        name: &str,
        dim: usize,
        func: impl Fn(&Vec2, &Vec2, f64) -> f64 + Send + Sync + 'static,
        p_box: f64,
        v_max: f64,
        kappa: Option<f64>,
    ) -> Self {
        let mut model = Self {
            name: name.to_string(),
            dim,
            form: LagrangianForm::Generic(GenericHamiltonian {
                func: Arc::new(func),
                p_box,
            }),
            kappa: 0.0,
            v_max,
        };
        model.kappa = kappa.unwrap_or_else(|| model.estimate_kappa(-10.0, 10.0, 32));
        model
    }

    fn estimate_kappa(&self, u_lo: f64, u_hi: f64, n: usize) -> f64 {
        let mut kappa: f64 = 0.0;
        for_each_sample(self.dim, n, 2.0, 5, u_lo, u_hi, n, |x, p, u| {
            kappa = kappa.max(self.grad_u(&x, &p, u).abs());
        });
        kappa
    }

    pub fn mechanical_form(&self) -> Option<&MechanicalContact> {
        match &self.form {
            LagrangianForm::Mechanical(m) => Some(m),
            LagrangianForm::Generic(_) => None,
        }
    }

    #[inline]
    pub fn hamiltonian(&self, x: &Vec2, p: &Vec2, u: f64) -> f64 {
        match &self.form {
            LagrangianForm::Mechanical(m) => m.eval_h(self.dim, *x, *p, u),
            LagrangianForm::Generic(g) => (g.func)(x, p, u),
        }
    }

    fn fd<F: Fn(f64) -> f64>(f: F, at: f64) -> f64 {
        (f(at + FD_STEP) - f(at - FD_STEP)) / (2.0 * FD_STEP)
    }

    pub fn grad_p(&self, x: &Vec2, p: &Vec2, u: f64) -> Vec2 {
        let mut g = [0.0; 2];
        match &self.form {
            LagrangianForm::Mechanical(m) => {
                let a = m.kinetic.eval(x[0], x[1], u);
                for i in 0..self.dim {
                    g[i] = a * p[i] + m.drift[i].eval(x[0], x[1], u);
                }
            }
            LagrangianForm::Generic(_) => {
                for i in 0..self.dim {
                    g[i] = Self::fd(
                        |s| {
                            let mut q = *p;
                            q[i] = s;
                            self.hamiltonian(x, &q, u)
                        },
                        p[i],
                    );
                }
            }
        }
        g
    }

    pub fn grad_x(&self, x: &Vec2, p: &Vec2, u: f64) -> Vec2 {
        let mut g = [0.0; 2];
        match &self.form {
            LagrangianForm::Mechanical(m) => {
                let (_, dp, _) = m.vector_field(self.dim, *x, *p, u);
                let hu = m.d_coupling_u.eval(x[0], x[1], u);
                for i in 0..self.dim {
                    g[i] = -dp[i] - hu * p[i];
                }
            }
            LagrangianForm::Generic(_) => {
                for i in 0..self.dim {
                    g[i] = Self::fd(
                        |s| {
                            let mut y = *x;
                            y[i] = s;
                            self.hamiltonian(&y, p, u)
                        },
                        x[i],
                    );
                }
            }
        }
        g
    }

    pub fn grad_u(&self, x: &Vec2, p: &Vec2, u: f64) -> f64 {
        match &self.form {
            LagrangianForm::Mechanical(m) => m.d_coupling_u.eval(x[0], x[1], u),
            LagrangianForm::Generic(_) => Self::fd(|s| self.hamiltonian(x, p, s), u),
        }
    }

    /// `L(x, v, u) = sup_p (p.v - H(x, p, u))`.
    pub fn lagrangian(&self, x: &Vec2, v: &Vec2, u: f64) -> Result<f64, ModelError> {
        match &self.form {
            LagrangianForm::Mechanical(m) => Ok(self.mechanical_lagrangian(m, x, v, u)),
            LagrangianForm::Generic(g) => {
                let (p, val) = self.numeric_legendre(g, x, v, u)?;
                let _ = p;
                Ok(val)
            }
        }
    }

    #[inline]
    pub(crate) fn mechanical_lagrangian(
        &self,
        m: &MechanicalContact,
        x: &Vec2,
        v: &Vec2,
        u: f64,
    ) -> f64 {
        let a = m.kinetic.eval(x[0], x[1], u);
        let mut kin = 0.0;
        for i in 0..self.dim {
            let w = v[i] - m.drift[i].eval(x[0], x[1], u);
            kin += w * w;
        }
        kin / (2.0 * a) - m.potential.eval(x[0], x[1], u) - m.coupling.eval(x[0], x[1], u)
    }

    /// `dL/dv(x, v, u)`, the momentum conjugate to velocity `v`.
    pub fn momentum(&self, x: &Vec2, v: &Vec2, u: f64) -> Result<Vec2, ModelError> {
        match &self.form {
            LagrangianForm::Mechanical(m) => {
                let a = m.kinetic.eval(x[0], x[1], u);
                let mut p = [0.0; 2];
                for i in 0..self.dim {
                    p[i] = (v[i] - m.drift[i].eval(x[0], x[1], u)) / a;
                }
                Ok(p)
            }
            LagrangianForm::Generic(g) => Ok(self.numeric_legendre(g, x, v, u)?.0),
        }
    }

    /// Coarse grid over the p-box followed by coordinate ternary refinement.
    fn numeric_legendre(
        &self,
        g: &GenericHamiltonian,
        x: &Vec2,
        v: &Vec2,
        u: f64,
    ) -> Result<(Vec2, f64), ModelError> {
        let objective = |p: &Vec2| {
            let mut pv = 0.0;
            for i in 0..self.dim {
                pv += p[i] * v[i];
            }
            pv - (g.func)(x, p, u)
        };
        let coarse = if self.dim == 1 { 401 } else { 81 };
        let step = 2.0 * g.p_box / (coarse - 1) as f64;
        let mut best = [0.0; 2];
        let mut best_val = f64::NEG_INFINITY;
        let mut idx = [0usize; 2];
        let total = if self.dim == 1 { coarse } else { coarse * coarse };
        for k in 0..total {
            let p = [
                -g.p_box + step * (k % coarse) as f64,
                if self.dim == 2 {
                    -g.p_box + step * (k / coarse) as f64
                } else {
                    0.0
                },
            ];
            let val = objective(&p);
            if val > best_val {
                best_val = val;
                best = p;
                idx = [k % coarse, k / coarse];
            }
        }
        for i in 0..self.dim {
            if idx[i] == 0 || idx[i] == coarse - 1 {
                return Err(ModelError::DualRangeExceeded { v: *v, p_box: g.p_box });
            }
        }
        // Objective is strictly concave in p, so each coordinate slice is unimodal.
        let rounds = if self.dim == 1 { 1 } else { 12 };
        for _ in 0..rounds {
            for i in 0..self.dim {
                let mut lo = best[i] - step;
                let mut hi = best[i] + step;
                for _ in 0..100 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    let mut q1 = best;
                    q1[i] = m1;
                    let mut q2 = best;
                    q2[i] = m2;
                    if objective(&q1) < objective(&q2) {
                        lo = m1;
                    } else {
                        hi = m2;
                    }
                    if hi - lo < 1e-13 {
                        break;
                    }
                }
                best[i] = 0.5 * (lo + hi);
            }
        }
        Ok((best, objective(&best)))
    }

    /// Scan the structural conditions on a sample lattice.
    pub fn check_conditions(&self, u_range: (f64, f64), n_scan: usize) -> ConditionReport {
        let n_scan = n_scan.max(16);
        let (u_lo, u_hi) = u_range;
        let p_span = 3.0;
        let n_p = if self.dim == 1 { 13 } else { 7 };
        let mut report = ConditionReport {
            h1_ok: true,
            h3_ok: true,
            a1_ok: true,
            a2_ok: true,
            b_ok: false,
            witnesses: BTreeMap::new(),
            kappa0: f64::INFINITY,
            u1: None,
            u2: None,
            energy_samples: 0,
        };
        let hs = 1e-4;
        for_each_sample(self.dim, n_scan, p_span, n_p, u_lo, u_hi, n_scan, |x, p, u| {
            // (H1): Hessian in p by second differences.
            let h0 = self.hamiltonian(&x, &p, u);
            let mut hess = [[0.0; 2]; 2];
            for i in 0..self.dim {
                for j in 0..self.dim {
                    let at = |si: f64, sj: f64| {
                        let mut q = p;
                        q[i] += si;
                        q[j] += sj;
                        self.hamiltonian(&x, &q, u)
                    };
                    hess[i][j] = if i == j {
                        (at(hs, 0.0) - 2.0 * h0 + at(-hs, 0.0)) / (hs * hs)
                    } else {
                        (at(hs, hs) - at(hs, -hs) - at(-hs, hs) + at(-hs, -hs)) / (4.0 * hs * hs)
                    };
                }
            }
            let pd = if self.dim == 1 {
                hess[0][0] > 0.0
            } else {
                hess[0][0] > 0.0 && hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0] > 0.0
            };
            if !pd && report.h1_ok {
                report.h1_ok = false;
                report.witnesses.insert("h1".into(), Sample::new(x, p, u));
            }
            let hu = self.grad_u(&x, &p, u);
            if hu.abs() > self.kappa + 1e-9 && report.h3_ok {
                report.h3_ok = false;
                report.witnesses.insert("h3".into(), Sample::new(x, p, u));
            }
            if hu < -1e-12 && report.a2_ok {
                report.a2_ok = false;
                report.witnesses.insert("a2".into(), Sample::new(x, p, u));
            }
            if h0.abs() <= ENERGY_SLAB {
                report.energy_samples += 1;
                if hu < report.kappa0 {
                    report.kappa0 = hu;
                    if hu <= 0.0 {
                        report.witnesses.insert("a1".into(), Sample::new(x, p, u));
                    }
                }
            }
        });
        // Also place points exactly on E by bisecting sign changes along u and p.
        let mut on_shell = |x: Vec2, p: Vec2, u: f64| {
            let hu = self.grad_u(&x, &p, u);
            report.energy_samples += 1;
            if hu < report.kappa0 {
                report.kappa0 = hu;
                if hu <= 0.0 {
                    report.witnesses.insert("a1".into(), Sample::new(x, p, u));
                }
            }
        };
        for_each_sample(self.dim, n_scan, p_span, n_p, 0.0, 0.0, 1, |x, p, _| {
            let at = |s: f64| self.hamiltonian(&x, &p, s);
            for root in bracket_roots(at, u_lo, u_hi, n_scan) {
                on_shell(x, p, root);
            }
        });
        for_each_sample(self.dim, n_scan, p_span, n_p, u_lo, u_hi, n_scan, |x, p, u| {
            if p[0] != -p_span {
                return;
            }
            let at = |s: f64| {
                let mut q = p;
                q[0] = s;
                self.hamiltonian(&x, &q, u)
            };
            for root in bracket_roots(at, -p_span, p_span, 4 * n_p) {
                let mut q = p;
                q[0] = root;
                on_shell(x, q, u);
            }
        });
        if report.kappa0 <= 0.0 {
            report.a1_ok = false;
        }

        // (B): scan u for max_x H(x,0,u) < 0 < min_x H(x,0,u).
        let zero = [0.0; 2];
        let xs = torus_lattice(self.dim, n_scan);
        let n_b = n_scan.max(11);
        let du = (u_hi - u_lo) / (n_b - 1) as f64;
        for k in 0..n_b {
            let u = u_lo + du * k as f64;
            let (mut hmin, mut hmax) = (f64::INFINITY, f64::NEG_INFINITY);
            for x in &xs {
                let h = self.hamiltonian(x, &zero, u);
                hmin = hmin.min(h);
                hmax = hmax.max(h);
            }
            if hmax < 0.0 {
                report.u1 = Some(u);
            }
            if hmin > 0.0 && report.u2.is_none() {
                report.u2 = Some(u);
            }
        }
        report.b_ok = report.u1.is_some() && report.u2.is_some();
        if !report.b_ok {
            report
                .witnesses
                .insert("b".into(), Sample::new([0.0; 2], [0.0; 2], u_lo));
        }
        report
    }
}

/// Roots of `f` on `[lo, hi]` located by sign changes on `n` samples and bisection.
fn bracket_roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let step = (hi - lo) / (n.max(2) - 1) as f64;
    let mut a = lo;
    let mut fa = f(a);
    for k in 1..n.max(2) {
        let b = lo + step * k as f64;
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            let (mut l, mut r, mut fl) = (a, b, fa);
            for _ in 0..60 {
                let m = 0.5 * (l + r);
                let fm = f(m);
                if (fm > 0.0) == (fl > 0.0) {
                    l = m;
                    fl = fm;
                } else {
                    r = m;
                }
            }
            roots.push(0.5 * (l + r));
        }
        a = b;
        fa = fb;
    }
    roots
}

/// Uniform lattice on the torus with `n` points per axis.
pub fn torus_lattice(dim: usize, n: usize) -> Vec<Vec2> {
    let h = 2.0 * PI / n as f64;
    if dim == 1 {
        (0..n).map(|i| [h * i as f64, 0.0]).collect()
    } else {
        (0..n * n)
            .map(|k| [h * (k % n) as f64, h * (k / n) as f64])
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn for_each_sample(
    dim: usize,
    n_x: usize,
    p_span: f64,
    n_p: usize,
    u_lo: f64,
    u_hi: f64,
    n_u: usize,
    mut f: impl FnMut(Vec2, Vec2, f64),
) {
    let xs = torus_lattice(dim, n_x);
    let p_axis: Vec<f64> = (0..n_p)
        .map(|k| -p_span + 2.0 * p_span * k as f64 / (n_p.max(2) - 1) as f64)
        .collect();
    let ps: Vec<Vec2> = if dim == 1 {
        p_axis.iter().map(|&p| [p, 0.0]).collect()
    } else {
        p_axis
            .iter()
            .flat_map(|&a| p_axis.iter().map(move |&b| [a, b]))
            .collect()
    };
    for x in &xs {
        for p in &ps {
            for k in 0..n_u {
                let u = if n_u == 1 {
                    u_lo
                } else {
                    u_lo + (u_hi - u_lo) * k as f64 / (n_u - 1) as f64
                };
                f(*x, *p, u);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec2,
    pub p: Vec2,
    pub u: f64,
}

impl Sample {
    pub fn new(x: Vec2, p: Vec2, u: f64) -> Self {
        Self { x, p, u }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    pub h1_ok: bool,
    pub h3_ok: bool,
    pub a1_ok: bool,
    pub a2_ok: bool,
    pub b_ok: bool,
    /// Keyed by condition name (`h1`, `h3`, `a1`, `a2`, `b`).
    pub witnesses: BTreeMap<String, Sample>,
    /// Smallest `dH/du` seen on the sampled energy shell.
    pub kappa0: f64,
    pub u1: Option<f64>,
    pub u2: Option<f64>,
    pub energy_samples: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_sample(rng: &mut ChaCha8Rng, dim: usize) -> (Vec2, Vec2, f64) {
        let mut x = [0.0; 2];
        let mut p = [0.0; 2];
        for i in 0..dim {
            x[i] = rng.gen_range(0.0..2.0 * PI);
            p[i] = rng.gen_range(-3.0..3.0);
        }
        (x, p, rng.gen_range(-3.0..3.0))
    }

    fn catalog() -> Vec<ContactModel> {
        vec![
            ContactModel::pendulum(),
            ContactModel::linear_discount(1),
            ContactModel::linear_discount(2),
            ContactModel::free_discount(1, 0.7, 0.5),
            ContactModel::free_discount(2, 1.3, 0.4),
            ContactModel::no_solution(1),
            ContactModel::mechanical(
                "custom",
                2,
                "1.5 + 0.5*cos(x)",
                ["0.2*sin(y)", "0.1"],
                "cos(x)*sin(y)",
                "u + 0.1*sin(u)",
                4.0,
                Some(1.1),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn pendulum_values() {
        let m = ContactModel::pendulum();
        assert_eq!(m.hamiltonian(&[0.0, 0.0], &[0.0, 0.0], 0.0), 0.0);
        assert!((m.hamiltonian(&[PI, 0.0], &[0.0, 0.0], 0.0) + 2.0).abs() < 1e-15);
        let lin = ContactModel::linear_discount(1);
        for x in [0.0, 1.0, 4.0] {
            assert_eq!(lin.hamiltonian(&[x, 0.0], &[2.0, 0.0], 3.0), 5.0);
        }
    }

    #[test]
    fn pendulum_lagrangian_closed_form_and_numeric_sup() {
        let m = ContactModel::pendulum();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let x = rng.gen_range(0.0..2.0 * PI);
            let v = rng.gen_range(-3.0..3.0);
            let u = rng.gen_range(-2.0..2.0);
            let l = m.lagrangian(&[x, 0.0], &[v, 0.0], u).unwrap();
            assert!((l - (0.5 * v * v + 1.0 - x.cos() - u)).abs() < 1e-12);
            // oracle: sup over a fine p grid
            let sup = (0..=200_000)
                .map(|k| -10.0 + 1e-4 * k as f64)
                .map(|p| p * v - m.hamiltonian(&[x, 0.0], &[p, 0.0], u))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((l - sup).abs() < 1e-7);
        }
        let lin = ContactModel::linear_discount(1);
        assert_eq!(lin.lagrangian(&[1.0, 0.0], &[0.0, 0.0], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn generic_backend_matches_closed_form() {
        let closed = ContactModel::pendulum();
        let generic = ContactModel::generic(
            "pendulum_generic",
            1,
            |x, p, u| 0.5 * p[0] * p[0] - 1.0 + x[0].cos() + u,
            10.0,
            4.0,
            None,
        );
        assert!((generic.kappa - 1.0).abs() < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x = [rng.gen_range(0.0..2.0 * PI), 0.0];
            let v = [rng.gen_range(-4.0..4.0), 0.0];
            let u = rng.gen_range(-3.0..3.0);
            let a = closed.lagrangian(&x, &v, u).unwrap();
            let b = generic.lagrangian(&x, &v, u).unwrap();
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            let p = generic.momentum(&x, &v, u).unwrap();
            assert!((p[0] - v[0]).abs() < 1e-5);
        }
        let err = generic.lagrangian(&[0.0, 0.0], &[20.0, 0.0], 0.0);
        assert!(matches!(err, Err(ModelError::DualRangeExceeded { .. })));
    }

    #[test]
    fn generic_two_dimensional_legendre() {
        let closed = ContactModel::free_discount(2, 1.0, 0.5);
        let generic = ContactModel::generic(
            "fd2",
            2,
            |x, p, u| 0.5 * (p[0] * p[0] + p[1] * p[1]) + u + 0.5 * (x[0].cos() + x[1].cos()),
            6.0,
            4.0,
            Some(1.0),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (x, v, u) = rand_sample(&mut rng, 2);
            let a = closed.lagrangian(&x, &v, u).unwrap();
            let b = generic.lagrangian(&x, &v, u).unwrap();
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-5;
        for m in catalog() {
            for _ in 0..1000 {
                let (x, p, u) = rand_sample(&mut rng, m.dim);
                let gp = m.grad_p(&x, &p, u);
                let gx = m.grad_x(&x, &p, u);
                let gu = m.grad_u(&x, &p, u);
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + b.abs());
                for i in 0..m.dim {
                    let mut q = p;
                    q[i] += h;
                    let mut r = p;
                    r[i] -= h;
                    let fd = (m.hamiltonian(&x, &q, u) - m.hamiltonian(&x, &r, u)) / (2.0 * h);
                    assert!(close(gp[i], fd), "{} grad_p", m.name);
                    assert!((gp[i] - fd).abs() <= 10.0 * FD_STEP * FD_STEP + 1e-9);
                    let mut y = x;
                    y[i] += h;
                    let mut z = x;
                    z[i] -= h;
                    let fd = (m.hamiltonian(&y, &p, u) - m.hamiltonian(&z, &p, u)) / (2.0 * h);
                    assert!(close(gx[i], fd), "{} grad_x {} vs {fd}", m.name, gx[i]);
                }
                let fd = (m.hamiltonian(&x, &p, u + h) - m.hamiltonian(&x, &p, u - h)) / (2.0 * h);
                assert!(close(gu, fd), "{} grad_u", m.name);
                assert!(gu.abs() <= m.kappa + 1e-9, "{} kappa", m.name);
            }
        }
    }

    #[test]
    fn fenchel_young_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in catalog() {
            for _ in 0..200 {
                let (x, p, u) = rand_sample(&mut rng, m.dim);
                let (_, v, _) = rand_sample(&mut rng, m.dim);
                let l = m.lagrangian(&x, &v, u).unwrap();
                let h = m.hamiltonian(&x, &p, u);
                let pv: f64 = (0..m.dim).map(|i| p[i] * v[i]).sum();
                assert!(pv <= l + h + 1e-9, "{}", m.name);
                // equality at v = dH/dp
                let v_star = m.grad_p(&x, &p, u);
                let l_star = m.lagrangian(&x, &v_star, u).unwrap();
                let pv_star: f64 = (0..m.dim).map(|i| p[i] * v_star[i]).sum();
                assert!((l_star + h - pv_star).abs() < 1e-8, "{}", m.name);
                let back = m.momentum(&x, &v_star, u).unwrap();
                for i in 0..m.dim {
                    assert!((back[i] - p[i]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn pendulum_conditions() {
        let m = ContactModel::pendulum();
        for n in [16, 24, 40] {
            let r = m.check_conditions((-5.0, 5.0), n);
            assert!(r.h1_ok && r.h3_ok && r.a1_ok && r.a2_ok && r.b_ok, "{r:?}");
            assert!((0.99..=1.0).contains(&r.kappa0), "{}", r.kappa0);
            let (u1, u2) = (r.u1.unwrap(), r.u2.unwrap());
            assert!(u1 < 0.0 && u2 > 2.0);
            let xs = torus_lattice(1, n);
            let zero = [0.0; 2];
            assert!(xs.iter().all(|x| m.hamiltonian(x, &zero, u1) < 0.0));
            assert!(xs.iter().all(|x| m.hamiltonian(x, &zero, u2) > 0.0));
        }
    }

    #[test]
    fn no_solution_conditions_fail_b_and_a1() {
        let r = ContactModel::no_solution(1).check_conditions((-5.0, 5.0), 16);
        assert!(!r.b_ok && !r.a1_ok);
        assert!(r.h1_ok && r.h3_ok && r.a2_ok);
        assert!(r.witnesses.contains_key("a1") && r.witnesses.contains_key("b"));
        assert_eq!(r.kappa0, 0.0);
    }

    #[test]
    fn linear_discount_conditions() {
        let r = ContactModel::linear_discount(1).check_conditions((-5.0, 5.0), 16);
        assert!(r.h1_ok && r.h3_ok && r.a1_ok && r.a2_ok && r.b_ok);
        assert_eq!(r.kappa0, 1.0);
        assert!(r.u1.unwrap() < 0.0 && r.u2.unwrap() > 0.0);
        let r2 = ContactModel::linear_discount(2).check_conditions((-5.0, 5.0), 16);
        assert!(r2.a1_ok && r2.b_ok);
    }

    #[test]
    fn builtin_lookup() {
        let mut params = BTreeMap::new();
        params.insert("dim".to_string(), 2.0);
        params.insert("lambda".to_string(), 0.5);
        let m = ContactModel::builtin("free_discount", &params).unwrap();
        assert_eq!(m.dim, 2);
        assert_eq!(m.kappa, 0.5);
        assert!(ContactModel::builtin("nope", &params).is_err());
        assert!(ContactModel::builtin("pendulum", &params).is_err());
        params.insert("dim".to_string(), 3.0);
        assert!(ContactModel::builtin("linear_discount", &params).is_err());
    }

    #[test]
    fn torus_helpers() {
        assert_eq!(wrap(-0.5), 2.0 * PI - 0.5);
        assert!((torus_delta(0.1, 2.0 * PI - 0.1) - 0.2).abs() < 1e-12);
        assert!((torus_delta(2.0 * PI - 0.1, 0.1) + 0.2).abs() < 1e-12);
    }
}
