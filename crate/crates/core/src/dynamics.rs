//! Nonlinear geodesics of a semi-spray: D^α x = y, D^α y = −2G(x, y).

use crate::caputo::FractionalOrder;
use crate::error::{Error, Result};
use crate::gamma::gamma;
use crate::lagrange::SemiSpray;
use crate::point::Point;

/// Fewest steps accepted by the integrators.
pub const MIN_STEPS: usize = 16;

/// Any state component beyond this magnitude aborts the integration.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Right-hand side G(x, y) of the geodesic system.
pub trait Spray {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>>;
}

impl Spray for SemiSpray {
    fn dim(&self) -> usize {
        self.field().len()
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        SemiSpray::eval(self, &Point::from_xy(x, y)?)
    }
}

/// A spray given by a closure, for analytic test problems.
pub struct FnSpray<F> {
    n: usize,
    f: F,
}

impl<F> FnSpray<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    pub fn new(n: usize, f: F) -> Self {
        FnSpray { n, f }
    }
}

impl<F> Spray for FnSpray<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(x, y))
    }
}

/// Samples (τ_k, x_k, y_k) on a uniform grid starting at τ = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    tau: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(n: usize, tau: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        if tau.len() != states.len() || states.iter().any(|s| s.len() != 2 * n) {
            return Err(Error::DimensionMismatch(format!(
                "{} times, {} states, state width must be {}",
                tau.len(),
                states.len(),
                2 * n
            )));
        }
        Ok(Trajectory { n, tau, states })
    }

    pub fn h_dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    pub fn x(&self, k: usize) -> &[f64] {
        &self.states[k][..self.n]
    }

    pub fn y(&self, k: usize) -> &[f64] {
        &self.states[k][self.n..]
    }

    pub fn point(&self, k: usize) -> Point {
        Point::new(self.n, self.n, self.states[k].clone()).expect("state width checked on construction")
    }

    /// Uniform step, or an error when the grid is not uniform.
    pub fn step(&self) -> Result<f64> {
        if self.tau.len() < 2 {
            return Err(Error::GridTooCoarse(self.tau.len()));
        }
        let h = self.tau[1] - self.tau[0];
        let uniform = self
            .tau
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0));
        if !uniform || h <= 0.0 {
            return Err(Error::DimensionMismatch(
                "trajectory grid is not uniform and increasing".into(),
            ));
        }
        Ok(h)
    }
}

fn guard(state: &[f64]) -> Result<()> {
    match state.iter().find(|v| !v.is_finite() || v.abs() > OVERFLOW_GUARD) {
        Some(&v) => Err(Error::BlowUp(v)),
        None => Ok(()),
    }
}

fn check_inputs(spray: &dyn Spray, x0: &[f64], v0: &[f64], t_end: f64, steps: usize) -> Result<()> {
    if steps < MIN_STEPS {
        return Err(Error::StepCountTooSmall(steps));
    }
    let n = spray.dim();
    if x0.len() != n || v0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial data of length {} and {} for a spray of dimension {n}",
            x0.len(),
            v0.len()
        )));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::DimensionMismatch(format!(
            "end time must be positive, got {t_end}"
        )));
    }
    Ok(())
}

/// z = (x, y) with D^α x = y and D^α y = −2G(x, y).
fn rhs(spray: &dyn Spray, z: &[f64]) -> Result<Vec<f64>> {
    let n = spray.dim();
    let (x, y) = z.split_at(n);
    let g = spray.eval(x, y)?;
    let mut out = Vec::with_capacity(2 * n);
    out.extend_from_slice(y);
    out.extend(g.iter().map(|v| -2.0 * v));
    Ok(out)
}

/// Fractional Adams–Bashforth–Moulton integration on `steps` uniform steps
/// over [0, T]. The trajectory includes τ = 0.
pub fn solve_semi_spray(
    spray: &dyn Spray,
    order: FractionalOrder,
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<Trajectory> {
    solve_with_memory(spray, order, x0, v0, t_end, steps, None)
}

/// As [`solve_semi_spray`], but history sums only reach back `window` steps
/// when a window is given.
pub fn solve_with_memory(
    spray: &dyn Spray,
    order: FractionalOrder,
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    steps: usize,
    window: Option<usize>,
) -> Result<Trajectory> {
    check_inputs(spray, x0, v0, t_end, steps)?;
    let n = spray.dim();
    let alpha = order.value();
    let h = t_end / steps as f64;
    let ha = h.powf(alpha);
    // Predictor weights depend on k − j only: b_i = (i+1)^α − i^α.
    let pred_scale = ha / gamma(alpha + 1.0);
    let corr_scale = ha / gamma(alpha + 2.0);
    let pw = |i: usize| ((i + 1) as f64).powf(alpha) - (i as f64).powf(alpha);
    let a1 = alpha + 1.0;
    let cw = |i: usize| ((i + 2) as f64).powf(a1) + (i as f64).powf(a1) - 2.0 * ((i + 1) as f64).powf(a1);

    let z0: Vec<f64> = x0.iter().chain(v0).copied().collect();
    let mut states = vec![z0.clone()];
    let mut f_hist = vec![rhs(spray, &z0)?];
    for k in 0..steps {
        let kf = k as f64;
        let start = window.map_or(0, |w| (k + 1).saturating_sub(w));
        let mut pred = z0.clone();
        let mut corr = z0.clone();
        for (j, f) in f_hist.iter().enumerate().skip(start) {
            let b = pred_scale * pw(k - j);
            let a = if j == 0 {
                corr_scale * (kf.powf(a1) - (kf - alpha) * (kf + 1.0).powf(alpha))
            } else {
                corr_scale * cw(k - j)
            };
            for c in 0..2 * n {
                pred[c] += b * f[c];
                corr[c] += a * f[c];
            }
        }
        guard(&pred)?;
        let fp = rhs(spray, &pred)?;
        for c in 0..2 * n {
            corr[c] += corr_scale * fp[c];
        }
        guard(&corr)?;
        f_hist.push(rhs(spray, &corr)?);
        states.push(corr);
    }
    let tau = (0..=steps).map(|k| k as f64 * h).collect();
    Trajectory::new(n, tau, states)
}

/// Classical fourth-order Runge–Kutta for ẍ + 2G(x, ẋ) = 0.
pub fn reference_classical_solve(
    spray: &dyn Spray,
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<Trajectory> {
    check_inputs(spray, x0, v0, t_end, steps)?;
    let n = spray.dim();
    let h = t_end / steps as f64;
    let axpy = |z: &[f64], k: &[f64], s: f64| -> Vec<f64> { z.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let mut z: Vec<f64> = x0.iter().chain(v0).copied().collect();
    let mut states = vec![z.clone()];
    for _ in 0..steps {
        let k1 = rhs(spray, &z)?;
        let k2 = rhs(spray, &axpy(&z, &k1, 0.5 * h))?;
        let k3 = rhs(spray, &axpy(&z, &k2, 0.5 * h))?;
        let k4 = rhs(spray, &axpy(&z, &k3, h))?;
        for c in 0..2 * n {
            z[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        guard(&z)?;
        states.push(z.clone());
    }
    let tau = (0..=steps).map(|k| k as f64 * h).collect();
    Trajectory::new(n, tau, states)
}

/// Largest componentwise difference between two trajectories on one grid.
pub fn sup_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.tau() != b.tau() || a.h_dim() != b.h_dim() {
        return Err(Error::DimensionMismatch("trajectories on different grids".into()));
    }
    Ok((0..a.len())
        .flat_map(|k| a.state(k).iter().zip(b.state(k)).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caputo::CaputoConfig;
    use crate::lagrange::LagrangeModel;

    fn free(n: usize) -> FnSpray<impl Fn(&[f64], &[f64]) -> Vec<f64>> {
        FnSpray::new(n, move |_, _| vec![0.0; n])
    }

    #[test]
    fn free_motion_classical() {
        let tr = solve_semi_spray(&free(1), FractionalOrder::one(), &[0.0], &[1.0], 1.0, 64).unwrap();
        for k in 0..tr.len() {
            assert!((tr.x(k)[0] - tr.tau()[k]).abs() < 1e-12);
        }
        let rk = reference_classical_solve(&free(2), &[0.5, 1.0], &[1.0, -2.0], 2.0, 32).unwrap();
        let last = rk.len() - 1;
        assert!((rk.x(last)[0] - 2.5).abs() < 1e-12 && (rk.x(last)[1] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn free_motion_fractional() {
        let alpha = 0.5;
        let tr = solve_semi_spray(&free(1), FractionalOrder::new(alpha).unwrap(), &[0.2], &[1.5], 1.0, 200).unwrap();
        let worst = (0..tr.len())
            .map(|k| {
                let exact = 0.2 + 1.5 * tr.tau()[k].powf(alpha) / gamma(1.0 + alpha);
                (tr.x(k)[0] - exact).abs().max((tr.y(k)[0] - 1.5).abs())
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn truncated_memory_changes_the_answer() {
        let order = FractionalOrder::new(0.5).unwrap();
        let full = solve_semi_spray(&free(1), order, &[0.0], &[1.0], 1.0, 64).unwrap();
        let cut = solve_with_memory(&free(1), order, &[0.0], &[1.0], 1.0, 64, Some(32)).unwrap();
        assert!((full.x(64)[0] - cut.x(64)[0]).abs() > 1e-3);
    }

    #[test]
    fn harmonic_reference() {
        let osc = FnSpray::new(1, |x: &[f64], _: &[f64]| vec![0.5 * x[0]]);
        let tr = reference_classical_solve(&osc, &[1.0], &[0.0], 2.0, 400).unwrap();
        for k in 0..tr.len() {
            assert!((tr.x(k)[0] - tr.tau()[k].cos()).abs() < 1e-8);
            assert!((tr.y(k)[0] + tr.tau()[k].sin()).abs() < 1e-8);
        }
        let err = |m: usize| {
            let tr = reference_classical_solve(&osc, &[1.0], &[0.0], 2.0, m).unwrap();
            (tr.x(m)[0] - 2.0f64.cos()).abs()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn abm_agrees_with_rk4_classically() {
        let m = LagrangeModel::new(
            2,
            "exp(x1)*(y1^2+y2^2)",
            FractionalOrder::one(),
            CaputoConfig::default(),
        )
        .unwrap();
        let spray = m.semi_spray();
        let (x0, v0) = ([0.1, 0.2], [0.5, 0.3]);
        let abm = solve_semi_spray(&spray, FractionalOrder::one(), &x0, &v0, 1.0, 1000).unwrap();
        let rk = reference_classical_solve(&spray, &x0, &v0, 1.0, 1000).unwrap();
        assert!(sup_distance(&abm, &rk).unwrap() < 1e-6);
    }

    #[test]
    fn errors() {
        assert_eq!(
            solve_semi_spray(&free(1), FractionalOrder::one(), &[0.0], &[1.0], 1.0, 8).unwrap_err(),
            Error::StepCountTooSmall(8)
        );
        let wild = FnSpray::new(1, |x: &[f64], _: &[f64]| vec![-x[0] * x[0] * 1e3]);
        assert!(matches!(
            reference_classical_solve(&wild, &[1.0], &[1.0], 10.0, 100),
            Err(Error::BlowUp(_))
        ));
        assert!(matches!(
            solve_semi_spray(&wild, FractionalOrder::new(0.7).unwrap(), &[1.0], &[1.0], 10.0, 100),
            Err(Error::BlowUp(_))
        ));
    }
}
