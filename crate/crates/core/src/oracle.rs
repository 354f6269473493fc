//! Independent numeric verification: evaluation on analytic and sampled
//! sections, finite-difference gradients of discretized actions, and
//! adaptive integration of Jacobi equations.

use crate::bundle::{BundleSpec, MultiIndex};
use crate::error::{Error, Result};
use crate::expr::{Atom, Expr, Family};
use crate::variational::{euler_lagrange, Lagrangian};

/// Tolerances used by the numeric checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Evaluation on analytic sections.
    pub analytic: f64,
    /// Central-difference evaluation on grids.
    pub stencil: f64,
    /// Action-gradient check for first-order Lagrangians (relative).
    pub gradient_first_order: f64,
    /// Action-gradient check for higher-order Lagrangians (relative).
    pub gradient_higher_order: f64,
    /// Action-gradient check when the Euler–Lagrange expressions vanish
    /// (absolute).
    pub gradient_null: f64,
    /// Residual of the field equations on a background.
    pub background: f64,
    /// Symbolic versus numeric derivatives on analytic sections.
    pub derivative: f64,
    /// Local error tolerance of the ODE integrator.
    pub ode: f64,
    /// Location of conjugate points.
    pub conjugate_point: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            analytic: 1e-10,
            stencil: 1e-6,
            gradient_first_order: 1e-5,
            gradient_higher_order: 1e-4,
            gradient_null: 1e-7,
            background: 1e-8,
            derivative: 1e-8,
            ode: 1e-10,
            conjugate_point: 1e-6,
        }
    }
}

/// Deterministic sample points in `[0.1, 2.9]^n`.
pub fn sample_points(n: usize) -> Vec<Vec<f64>> {
    const ONE_D: [f64; 5] = [0.1, 0.73, 1.29, 2.11, 2.9];
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..n {
        out = out.into_iter().flat_map(|p| ONE_D.iter().map(move |&x| [p.clone(), vec![x]].concat())).collect();
    }
    out
}

/// Evaluates an expression of the base coordinates only.
pub fn eval_at(e: &Expr, point: &[f64]) -> Result<f64> {
    e.eval(&mut |a| match a {
        Atom::Coord(s) => point.get(*s as usize).copied(),
        _ => None,
    })
}

/// A section used as test data.
#[derive(Clone, Debug)]
pub enum TestSection {
    /// Closed-form components in the base coordinates.
    Analytic(Vec<Expr>),
    Grid(GridSection),
}

/// Nodal values of every field on a rectangular lattice.
#[derive(Clone, Debug)]
pub struct GridSection {
    pub lo: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
    /// `values[i][flat node]`.
    pub values: Vec<Vec<f64>>,
    /// Formal order of accuracy of the central stencils (even).
    pub accuracy: usize,
}

impl GridSection {
    /// Samples analytic components on `shape` nodes starting at `lo`.
    pub fn sample(components: &[Expr], lo: Vec<f64>, h: f64, shape: Vec<usize>, accuracy: usize) -> Result<Self> {
        let total: usize = shape.iter().product();
        let mut values = vec![Vec::with_capacity(total); components.len()];
        let mut g = GridSection { lo, h, shape, values: Vec::new(), accuracy };
        for flat in 0..total {
            let x = g.coords(&g.unflatten(flat));
            for (i, c) in components.iter().enumerate() {
                values[i].push(eval_at(c, &x)?);
            }
        }
        g.values = values;
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = flat % self.shape[d];
            flat /= self.shape[d];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, s)| acc * s + i)
    }

    pub fn coords(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().zip(&self.lo).map(|(&i, lo)| lo + self.h * i as f64).collect()
    }

    /// Half-width of the central stencil for a derivative of order `k`.
    pub fn radius(&self, k: usize) -> usize {
        if k == 0 {
            0
        } else {
            (2 * k.div_ceil(2) - 1 + self.accuracy) / 2
        }
    }

    /// `∂_α y^i` at a node by tensor-product central differences.
    pub fn derivative(&self, field: usize, alpha: &MultiIndex, node: &[usize]) -> Result<f64> {
        let mut stencils = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            let k = alpha.get(d) as usize;
            let r = self.radius(k);
            if node[d] < r || node[d] + r >= self.shape[d] {
                return Err(Error::StencilOutOfRange { node: self.flatten(node), radius: r });
            }
            let offsets: Vec<f64> = (-(r as i64)..=r as i64).map(|o| o as f64).collect();
            let w = fornberg_weights(0.0, &offsets, k);
            let scale = self.h.powi(k as i32);
            stencils.push((r, w[k].iter().map(|c| c / scale).collect::<Vec<f64>>()));
        }
        let mut total = 0.0;
        let mut offset = vec![0usize; self.dim()];
        loop {
            let mut weight = 1.0;
            let mut at = Vec::with_capacity(self.dim());
            for d in 0..self.dim() {
                let (r, w) = &stencils[d];
                weight *= w[offset[d]];
                at.push(node[d] + offset[d] - r);
            }
            if weight != 0.0 {
                total += weight * self.values[field][self.flatten(&at)];
            }
            // Advance the mixed-radix counter.
            let mut d = 0;
            loop {
                if d == self.dim() {
                    return Ok(total);
                }
                offset[d] += 1;
                if offset[d] < stencils[d].1.len() {
                    break;
                }
                offset[d] = 0;
                d += 1;
            }
        }
    }
}

/// Finite-difference weights (Fornberg): `c[k][j]` approximates the k-th
/// derivative at `z` from values at `x[j]`.
pub fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Evaluates `e` (in coordinates and field jets) on a test section.
/// Analytic sections take a coordinate point; grid sections take a node.
pub fn eval_on_section(spec: &BundleSpec, e: &Expr, section: &TestSection, point: &[f64]) -> Result<f64> {
    match section {
        TestSection::Analytic(components) => eval_at(&spec.substitute_section(e, components)?, point),
        TestSection::Grid(g) => {
            let node: Vec<usize> = point.iter().map(|&p| p as usize).collect();
            eval_on_grid(e, g, &node)
        }
    }
}

fn eval_on_grid(e: &Expr, g: &GridSection, node: &[usize]) -> Result<f64> {
    let x = g.coords(node);
    let mut failure = None;
    let v = e.eval(&mut |a| match a {
        Atom::Coord(s) => x.get(*s as usize).copied(),
        Atom::Jet(v) if v.family == Family::Field => match g.derivative(v.index as usize, &v.alpha, node) {
            Ok(d) => Some(d),
            Err(err) => {
                failure = Some(err);
                None
            }
        },
        _ => None,
    });
    match failure {
        Some(err) => Err(err),
        None => v,
    }
}

/// Result of comparing symbolic Euler–Lagrange expressions with the
/// finite-difference gradient of the discretized action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheck {
    /// `max |g − E| / max |E|` over the checked nodes.
    pub max_relative_error: f64,
    pub max_abs_error: f64,
    pub max_abs_euler: f64,
    pub nodes_checked: usize,
}

impl GradientCheck {
    /// Applies the relative tolerance, or the absolute one when the
    /// Euler–Lagrange expressions vanish on the data.
    pub fn passes(&self, relative: f64, absolute: f64) -> bool {
        if self.max_abs_euler < absolute {
            self.max_abs_error < absolute
        } else {
            self.max_relative_error < relative
        }
    }
}

/// Compares `E_i` at interior nodes with `(1/h^n) ∂S/∂y^i_p`, where
/// `S = h^n Σ_q L(q)` is the Riemann-sum action and the derivative is a
/// central difference in the nodal value. The symbolic side is evaluated
/// on `reference` when given (exact jets), otherwise by stencils.
pub fn fd_gradient_check(
    spec: &BundleSpec,
    lagrangian: &Lagrangian,
    grid: &GridSection,
    reference: Option<&[Expr]>,
    max_nodes: usize,
) -> Result<GradientCheck> {
    let n = grid.dim();
    if n != spec.n() {
        return Err(Error::Precondition("grid dimension differs from the base dimension".into()));
    }
    let order = lagrangian.density.jet_order();
    let radius = grid.radius(order.max(1)).max(grid.radius(1));
    let margin = 2 * radius;
    if grid.shape.iter().any(|&s| s <= 2 * margin) {
        return Err(Error::Precondition("grid too small for the stencil margin".into()));
    }
    let source = euler_lagrange(spec, lagrangian)?.0;
    let reference_source = match reference {
        Some(r) => Some(source.iter().map(|e| spec.substitute_section(e, r)).collect::<Result<Vec<_>>>()?),
        None => None,
    };
    let interior: Vec<Vec<usize>> = (0..grid.values[0].len())
        .map(|f| grid.unflatten(f))
        .filter(|idx| idx.iter().zip(&grid.shape).all(|(&i, &s)| i >= margin && i + margin < s))
        .collect();
    let stride = interior.len().div_ceil(max_nodes.max(1)).max(1);
    let volume = grid.h.powi(n as i32);
    let mut work = grid.clone();
    let (mut max_err, mut max_e) = (0.0f64, 0.0f64);
    let mut checked = 0;
    for node in interior.iter().step_by(stride) {
        spec.cancel.check()?;
        let x = grid.coords(node);
        // Nodes whose stencils see `node`.
        let neighbours = neighbourhood(node, radius, &grid.shape);
        for field in 0..spec.m() {
            let flat = grid.flatten(node);
            let original = grid.values[field][flat];
            let delta = 1e-4 * original.abs().max(1.0);
            let local = |value: f64, work: &mut GridSection| -> Result<f64> {
                work.values[field][flat] = value;
                let mut s = 0.0;
                for q in &neighbours {
                    s += eval_on_grid(&lagrangian.density, work, q)?;
                }
                Ok(s * volume)
            };
            let plus = local(original + delta, &mut work)?;
            let minus = local(original - delta, &mut work)?;
            work.values[field][flat] = original;
            let gradient = (plus - minus) / (2.0 * delta) / volume;
            let symbolic = match &reference_source {
                Some(r) => eval_at(&r[field], &x)?,
                None => eval_on_grid(&source[field], grid, node)?,
            };
            max_err = max_err.max((gradient - symbolic).abs());
            max_e = max_e.max(symbolic.abs());
        }
        checked += 1;
    }
    Ok(GradientCheck {
        max_relative_error: if max_e > 0.0 { max_err / max_e } else { f64::INFINITY },
        max_abs_error: max_err,
        max_abs_euler: max_e,
        nodes_checked: checked,
    })
}

fn neighbourhood(node: &[usize], radius: usize, shape: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for (d, &c) in node.iter().enumerate() {
        let lo = c.saturating_sub(radius);
        let hi = (c + radius).min(shape[d] - 1);
        out = out.into_iter().flat_map(|p| (lo..=hi).map(move |i| [p.clone(), vec![i]].concat())).collect();
    }
    out
}

/// Fourth-order central difference of `f` along direction `sigma`.
pub fn numeric_partial(f: &dyn Fn(&[f64]) -> Result<f64>, point: &[f64], sigma: usize, h: f64) -> Result<f64> {
    let at = |k: f64| {
        let mut p = point.to_vec();
        p[sigma] += k * h;
        f(&p)
    };
    Ok((-at(2.0)? + 8.0 * at(1.0)? - 8.0 * at(-1.0)? + at(-2.0)?) / (12.0 * h))
}

/// State of a second-order scalar ODE `w'' = f(t, w, w')`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeState {
    pub t: f64,
    pub w: f64,
    pub dw: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<OdeState>,
    /// Interior zeros of `w` after the initial point.
    pub conjugate_points: Vec<f64>,
}

type Rhs<'a> = dyn Fn(f64, f64, f64) -> Result<f64> + 'a;

/// One Dormand–Prince 5(4) step; returns the new state and the error
/// estimate.
fn dopri_step(f: &Rhs, s: OdeState, h: f64) -> Result<(OdeState, f64)> {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] =
        [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];
    let mut k = [[0.0f64; 2]; 7];
    for i in 0..7 {
        let (mut w, mut dw) = (s.w, s.dw);
        for j in 0..i {
            w += h * A[i][j] * k[j][0];
            dw += h * A[i][j] * k[j][1];
        }
        k[i] = [dw, f(s.t + C[i] * h, w, dw)?];
    }
    let mut next = OdeState { t: s.t + h, w: s.w, dw: s.dw };
    let (mut ew, mut edw) = (0.0, 0.0);
    for i in 0..7 {
        next.w += h * B5[i] * k[i][0];
        next.dw += h * B5[i] * k[i][1];
        ew += h * (B5[i] - B4[i]) * k[i][0];
        edw += h * (B5[i] - B4[i]) * k[i][1];
    }
    let scale_w = 1.0 + s.w.abs().max(next.w.abs());
    let scale_dw = 1.0 + s.dw.abs().max(next.dw.abs());
    Ok((next, (ew / scale_w).abs().max((edw / scale_dw).abs())))
}

/// Adaptive integration from `start` to `t_end`.
pub fn integrate(f: &Rhs, start: OdeState, t_end: f64, tol: f64) -> Result<Vec<OdeState>> {
    let mut states = vec![start];
    let mut s = start;
    let mut h = ((t_end - s.t) / 100.0).abs().max(1e-6) * (t_end - s.t).signum();
    let mut steps = 0usize;
    while (t_end - s.t) * h.signum() > 1e-14 {
        steps += 1;
        if steps > 1_000_000 || h.abs() < 1e-14 {
            return Err(Error::IntegrationFailure(format!("step size collapsed near t = {}", s.t)));
        }
        if (s.t + h - t_end) * h.signum() > 0.0 {
            h = t_end - s.t;
        }
        let (next, err) = dopri_step(f, s, h)?;
        if !next.w.is_finite() || !next.dw.is_finite() || next.w.abs() > 1e12 {
            return Err(Error::IntegrationFailure(format!("solution blew up near t = {}", s.t)));
        }
        if err <= tol {
            s = next;
            states.push(s);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(states)
}

/// Solves `w'' = f(t, w, w')` on `[start.t, t_end]` and locates zeros of
/// `w` after the start by sign-change bisection to `locate_tol`.
pub fn jacobi_ode_solve(f: &Rhs, start: OdeState, t_end: f64, tol: Tolerances) -> Result<Trajectory> {
    let states = integrate(f, start, t_end, tol.ode)?;
    let mut conjugate_points = Vec::new();
    for pair in states.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.t <= start.t && a.w == 0.0 {
            continue;
        }
        if b.w == 0.0 {
            conjugate_points.push(b.t);
            continue;
        }
        if a.w.signum() != b.w.signum() && a.w != 0.0 {
            let (mut lo, mut hi) = (a.t, b.t);
            while hi - lo > tol.conjugate_point * 1e-3 {
                let mid = 0.5 * (lo + hi);
                let at_mid = *integrate(f, a, mid, tol.ode)?.last().expect("non-empty trajectory");
                if at_mid.w.signum() == a.w.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            conjugate_points.push(0.5 * (lo + hi));
        }
    }
    Ok(Trajectory { states, conjugate_points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_central_second_derivative() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[2][0] - 1.0).abs() < 1e-14 && (w[2][1] + 2.0).abs() < 1e-14 && (w[2][2] - 1.0).abs() < 1e-14);
        assert!((w[1][0] + 0.5).abs() < 1e-14 && (w[1][2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn analytic_evaluation() {
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap();
        let sec = TestSection::Analytic(vec![Expr::coord(0).powi(2)]);
        let v = eval_on_section(&s, &s.field_jet(0, &[1]), &sec, &[1.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
        assert_eq!(eval_on_section(&s, &Expr::zero(), &sec, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn grid_second_derivative() {
        let h = 1e-2;
        let g = GridSection::sample(&[Expr::sin(Expr::coord(0))], vec![-10.0 * h], h, vec![21], 4).unwrap();
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap();
        let v = eval_on_section(&s, &s.field_jet(0, &[2]), &TestSection::Grid(g.clone()), &[10.0]).unwrap();
        assert!(v.abs() < 1e-6);
        assert!(matches!(g.derivative(0, &MultiIndex::from_slice(&[2]), &[0]), Err(Error::StencilOutOfRange { .. })));
    }

    #[test]
    fn ode_examples() {
        let tol = Tolerances::default();
        let start = OdeState { t: 0.0, w: 0.0, dw: 1.0 };
        let harmonic = jacobi_ode_solve(&|_, w, _| Ok(-w), start, 4.0, tol).unwrap();
        assert!((harmonic.conjugate_points[0] - std::f64::consts::PI).abs() < 1e-6);
        let flat = jacobi_ode_solve(&|_, _, _| Ok(0.0), start, 10.0, tol).unwrap();
        assert!(flat.conjugate_points.is_empty());
        let hyper = jacobi_ode_solve(&|_, w, _| Ok(w), start, 10.0, tol).unwrap();
        assert!(hyper.conjugate_points.is_empty());
    }
}
