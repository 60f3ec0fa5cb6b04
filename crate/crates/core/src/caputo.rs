//! One-dimensional Caputo calculus with lower terminal 0.
//!
//! The quadrature is the L1 scheme: f is replaced by its piecewise-linear
//! interpolant on a uniform grid and the weakly singular kernel is integrated
//! exactly on every cell. For smooth f the error decays like N^-(2-α).
//! Order α = 1 never goes through the quadrature; it is the ordinary
//! derivative, taken by a five-point central stencil.

use crate::error::{Error, Result};
use crate::gamma::{gamma, gamma_ratio};

/// Order α of a Caputo derivative, 0 < α ≤ 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(FractionalOrder(alpha))
        } else {
            Err(Error::InvalidOrder(alpha))
        }
    }

    /// The classical order α = 1.
    pub const fn one() -> Self {
        FractionalOrder(1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_classical(self) -> bool {
        self.0 == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    L1,
}

/// Quadrature settings shared by every fractional evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaputoConfig {
    grid_points: usize,
    pub scheme: Scheme,
}

impl CaputoConfig {
    pub const MIN_GRID_POINTS: usize = 8;

    pub fn new(grid_points: usize) -> Result<Self> {
        if grid_points < Self::MIN_GRID_POINTS {
            return Err(Error::DegenerateGrid(grid_points));
        }
        Ok(CaputoConfig {
            grid_points,
            scheme: Scheme::L1,
        })
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    /// Lower terminal of every left derivative.
    pub fn lower_terminal(&self) -> f64 {
        0.0
    }
}

impl Default for CaputoConfig {
    fn default() -> Self {
        CaputoConfig {
            grid_points: 256,
            scheme: Scheme::L1,
        }
    }
}

/// The monomial c·x^p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PowerTerm {
    pub fn new(coefficient: f64, exponent: f64) -> Self {
        PowerTerm { coefficient, exponent }
    }
}

/// Γ(p+1)/Γ(p+1-α), the factor the Caputo derivative puts in front of x^(p-α).
pub fn power_rule_factor(exponent: f64, order: FractionalOrder) -> f64 {
    if exponent == 0.0 {
        return 0.0;
    }
    gamma_ratio(exponent + 1.0, exponent + 1.0 - order.value())
}

/// Closed-form Caputo derivative of a monomial.
pub fn caputo_power_rule(term: PowerTerm, order: FractionalOrder, x: f64) -> Result<f64> {
    if term.exponent == 0.0 || term.coefficient == 0.0 {
        return Ok(0.0);
    }
    if !order.is_classical() && x <= 0.0 {
        return Err(Error::NonPositiveAbscissa(x));
    }
    let alpha = order.value();
    if order.is_classical() {
        return Ok(term.coefficient * term.exponent * x.powf(term.exponent - 1.0));
    }
    Ok(term.coefficient * power_rule_factor(term.exponent, order) * x.powf(term.exponent - alpha))
}

/// d^α x = (dx)^α · x^(1-α)/Γ(2-α): the factor relating the fractional
/// differential of a coordinate to the power of its ordinary differential.
pub fn coordinate_differential_factor(x: f64, order: FractionalOrder) -> Result<f64> {
    if order.is_classical() {
        return Ok(1.0);
    }
    if x <= 0.0 {
        return Err(Error::NonPositiveAbscissa(x));
    }
    let alpha = order.value();
    Ok(x.powf(1.0 - alpha) / gamma(2.0 - alpha))
}

/// Step used by the five-point stencil around `x`.
pub(crate) fn stencil_step(x: f64) -> f64 {
    1e-3 * x.abs().max(1.0)
}

/// Fourth-order central difference f'(x).
pub fn central_derivative<F>(f: F, x: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let h = stencil_step(x);
    let fm2 = f(x - 2.0 * h)?;
    let fm1 = f(x - h)?;
    let fp1 = f(x + h)?;
    let fp2 = f(x + 2.0 * h)?;
    Ok((fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h))
}

/// L1 weights b_j = (j+1)^(1-α) - j^(1-α), j = 0..n.
pub fn l1_weights(n: usize, order: FractionalOrder) -> Vec<f64> {
    let e = 1.0 - order.value();
    (0..n).map(|j| ((j + 1) as f64).powf(e) - (j as f64).powf(e)).collect()
}

/// L1 Caputo derivative at the last node of uniformly spaced samples
/// `values[0..=k]` taken from the lower terminal with spacing `h`.
pub fn l1_from_samples(values: &[f64], h: f64, order: FractionalOrder) -> f64 {
    let n = values.len() - 1;
    if n == 0 {
        return 0.0;
    }
    let alpha = order.value();
    let w = l1_weights(n, order);
    let mut acc = 0.0;
    for (j, wj) in w.iter().enumerate() {
        acc += wj * (values[n - j] - values[n - j - 1]);
    }
    acc * h.powf(-alpha) / gamma(2.0 - alpha)
}

/// Vector-valued L1 at the last node; `values[k]` is the sample at node k.
pub(crate) fn l1_from_vector_samples(values: &[Vec<f64>], h: f64, order: FractionalOrder) -> Vec<f64> {
    let n = values.len() - 1;
    let len = values[0].len();
    let mut acc = vec![0.0; len];
    if n == 0 {
        return acc;
    }
    let alpha = order.value();
    let w = l1_weights(n, order);
    for (j, wj) in w.iter().enumerate() {
        let (hi, lo) = (&values[n - j], &values[n - j - 1]);
        for c in 0..len {
            acc[c] += wj * (hi[c] - lo[c]);
        }
    }
    let scale = h.powf(-alpha) / gamma(2.0 - alpha);
    acc.iter_mut().for_each(|v| *v *= scale);
    acc
}

/// Left Caputo derivative (1/Γ(1-α)) ∫₀ˣ (x-s)^(-α) f'(s) ds.
pub fn caputo_left<F>(f: F, order: FractionalOrder, x: f64, cfg: &CaputoConfig) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if cfg.grid_points < CaputoConfig::MIN_GRID_POINTS {
        return Err(Error::DegenerateGrid(cfg.grid_points));
    }
    if order.is_classical() {
        return central_derivative(f, x);
    }
    if x <= cfg.lower_terminal() {
        return Err(Error::NonPositiveAbscissa(x));
    }
    let n = cfg.grid_points;
    let h = x / n as f64;
    let values = (0..=n).map(|k| f(k as f64 * h)).collect::<Result<Vec<_>>>()?;
    Ok(l1_from_samples(&values, h, order))
}

/// Right Caputo derivative (1/Γ(1-α)) ∫ₓ^X (s-x)^(-α) (-f'(s)) ds.
///
/// At α = 1 this is -f'(x), the limit of the integral as α → 1.
pub fn caputo_right<F>(f: F, order: FractionalOrder, x: f64, upper_terminal: f64, cfg: &CaputoConfig) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if cfg.grid_points < CaputoConfig::MIN_GRID_POINTS {
        return Err(Error::DegenerateGrid(cfg.grid_points));
    }
    if x >= upper_terminal {
        return Err(Error::InvertedInterval {
            x,
            upper: upper_terminal,
        });
    }
    if order.is_classical() {
        return Ok(-central_derivative(f, x)?);
    }
    // Mirror t = X - s turns the right derivative into a left one.
    let g = |t: f64| f(upper_terminal - t);
    let n = cfg.grid_points;
    let span = upper_terminal - x;
    let h = span / n as f64;
    let values = (0..=n).map(|k| g(k as f64 * h)).collect::<Result<Vec<_>>>()?;
    Ok(l1_from_samples(&values, h, order))
}

/// Observed convergence of the L1 quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub resolutions: Vec<usize>,
    pub errors: Vec<f64>,
    /// Least-squares slope of -log(error) against log(N); infinite when every
    /// error is already at round-off level.
    pub order: f64,
}

/// Estimates the empirical order of `caputo_left` for `f` at `x`.
///
/// With `exact` the errors are measured against it; otherwise against the
/// finest resolution, which is then dropped from the fit.
pub fn convergence_order_probe<F>(
    f: F,
    order: FractionalOrder,
    x: f64,
    resolutions: &[usize],
    exact: Option<f64>,
) -> Result<ConvergenceReport>
where
    F: Fn(f64) -> Result<f64>,
{
    if resolutions.len() < 3 {
        return Err(Error::InsufficientResolutions(format!(
            "{} resolutions given, at least 3 required",
            resolutions.len()
        )));
    }
    if resolutions.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::InsufficientResolutions(
            "resolutions must double at every step".into(),
        ));
    }
    let estimates = resolutions
        .iter()
        .map(|&n| caputo_left(&f, order, x, &CaputoConfig::new(n)?))
        .collect::<Result<Vec<_>>>()?;

    let (ns, errors): (Vec<usize>, Vec<f64>) = match exact {
        Some(v) => resolutions
            .iter()
            .zip(&estimates)
            .map(|(&n, e)| (n, (e - v).abs()))
            .unzip(),
        None => {
            let finest = *estimates.last().unwrap();
            resolutions[..resolutions.len() - 1]
                .iter()
                .zip(&estimates)
                .map(|(&n, e)| (n, (e - finest).abs()))
                .unzip()
        }
    };

    let scale = estimates.iter().fold(1.0_f64, |m, e| m.max(e.abs()));
    let floor = 1e-13 * scale;
    let order_est = if errors.iter().all(|&e| e <= floor) {
        f64::INFINITY
    } else {
        let pts: Vec<(f64, f64)> = ns
            .iter()
            .zip(&errors)
            .filter(|(_, &e)| e > floor)
            .map(|(&n, &e)| ((n as f64).ln(), e.ln()))
            .collect();
        if pts.len() < 2 {
            f64::INFINITY
        } else {
            let k = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            -sxy / sxx
        }
    };
    Ok(ConvergenceReport {
        resolutions: resolutions.to_vec(),
        errors,
        order: order_est,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ord(a: f64) -> FractionalOrder {
        FractionalOrder::new(a).unwrap()
    }

    #[test]
    fn order_and_grid_validation() {
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(1.2).is_err());
        assert!(FractionalOrder::new(1.0).unwrap().is_classical());
        assert_eq!(CaputoConfig::new(7), Err(Error::DegenerateGrid(7)));
        assert!(CaputoConfig::new(8).is_ok());
    }

    #[test]
    fn constants_are_annihilated_exactly() {
        let cfg = CaputoConfig::new(64).unwrap();
        let v = caputo_left(|_| Ok(5.0), ord(0.5), 0.7, &cfg).unwrap();
        assert_eq!(v, 0.0);
        let r = caputo_right(|_| Ok(-3.25), ord(0.3), 0.2, 1.9, &cfg).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(caputo_power_rule(PowerTerm::new(3.0, 0.0), ord(0.3), 2.0).unwrap(), 0.0);
    }

    #[test]
    fn classical_limit_is_ordinary_derivative() {
        let cfg = CaputoConfig::default();
        let v = caputo_left(|x| Ok(x), FractionalOrder::one(), 2.0, &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = caputo_left(|x| Ok(x.powi(3) - 2.0 * x), FractionalOrder::one(), 1.5, &cfg).unwrap();
        assert!((v - (3.0 * 2.25 - 2.0)).abs() / 4.75 < 1e-10);
        assert_eq!(
            caputo_power_rule(PowerTerm::new(1.0, 1.0), FractionalOrder::one(), 5.0).unwrap(),
            1.0
        );
    }

    #[test]
    fn right_derivative_classical_limit_carries_minus_sign() {
        let cfg = CaputoConfig::default();
        let v = caputo_right(|x| Ok(x), FractionalOrder::one(), 0.5, 2.0, &cfg).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_rule_half_order_square() {
        // Γ(3)/Γ(2.5) = 1.5045055561273500985...
        let expected = 1.504_505_556_127_350_1;
        let v = caputo_power_rule(PowerTerm::new(1.0, 2.0), ord(0.5), 1.0).unwrap();
        assert!((v - expected).abs() < 1e-14);
        let cfg = CaputoConfig::new(4096).unwrap();
        let q = caputo_left(|x| Ok(x * x), ord(0.5), 1.0, &cfg).unwrap();
        assert!((q - expected).abs() / expected < 1e-4);
    }

    #[test]
    fn right_derivative_mirrors_left() {
        let cfg = CaputoConfig::new(4096).unwrap();
        let upper = 3.0;
        let v = caputo_right(|x| Ok((upper - x).powi(2)), ord(0.5), upper - 1.0, upper, &cfg).unwrap();
        let expected = 1.504_505_556_127_350_1;
        assert!((v - expected).abs() / expected < 1e-4);
        assert!(matches!(
            caputo_right(|x| Ok(x), ord(0.5), 2.0, 2.0, &cfg),
            Err(Error::InvertedInterval { .. })
        ));
    }

    #[test]
    fn coordinate_factor_values() {
        let g15 = 0.886_226_925_452_758; // Γ(3/2)
        assert_eq!(
            coordinate_differential_factor(17.0, FractionalOrder::one()).unwrap(),
            1.0
        );
        assert!((coordinate_differential_factor(1.0, ord(0.5)).unwrap() - 1.0 / g15).abs() < 1e-14);
        assert!((coordinate_differential_factor(4.0, ord(0.5)).unwrap() - 2.0 / g15).abs() < 1e-14);
        assert_eq!(
            coordinate_differential_factor(0.0, ord(0.5)),
            Err(Error::NonPositiveAbscissa(0.0))
        );
    }

    #[test]
    fn error_paths() {
        let cfg = CaputoConfig::default();
        assert_eq!(
            caputo_left(|x| Ok(x), ord(0.5), 0.0, &cfg),
            Err(Error::NonPositiveAbscissa(0.0))
        );
        let bad = CaputoConfig {
            grid_points: 4,
            scheme: Scheme::L1,
        };
        assert_eq!(
            caputo_left(|x| Ok(x), ord(0.5), 1.0, &bad),
            Err(Error::DegenerateGrid(4))
        );
        assert!(matches!(
            convergence_order_probe(|x| Ok(x), ord(0.5), 1.0, &[64, 128], None),
            Err(Error::InsufficientResolutions(_))
        ));
        assert!(matches!(
            convergence_order_probe(|x| Ok(x), ord(0.5), 1.0, &[64, 100, 200], None),
            Err(Error::InsufficientResolutions(_))
        ));
    }

    #[test]
    fn observed_orders() {
        let exact = caputo_power_rule(PowerTerm::new(1.0, 2.0), ord(0.5), 1.0).unwrap();
        let rep = convergence_order_probe(|x| Ok(x * x), ord(0.5), 1.0, &[64, 128, 256, 512], Some(exact)).unwrap();
        assert!((rep.order - 1.5).abs() < 0.15, "{rep:?}");

        let exact = caputo_power_rule(PowerTerm::new(1.0, 3.0), ord(0.25), 1.0).unwrap();
        let rep =
            convergence_order_probe(|x| Ok(x.powi(3)), ord(0.25), 1.0, &[64, 128, 256, 512], Some(exact)).unwrap();
        assert!((rep.order - 1.75).abs() < 0.15, "{rep:?}");

        let rep = convergence_order_probe(|x| Ok(x), FractionalOrder::one(), 1.0, &[64, 128, 256], Some(1.0)).unwrap();
        assert!(rep.errors.iter().all(|&e| e < 1e-12));
        assert!(rep.order.is_infinite());
    }
}
