//! Erasure-probability recursion on the binary image, thresholds and the
//! convergence-speed metrics built on it.

use std::io::Write;

use log::warn;

use crate::ensemble::{uniform_label_profile, BinaryDegreeConverter, DegreeDistribution};
use crate::error::{Error, Result};

/// Stopping tolerance used by threshold probes.
pub const THRESHOLD_TOL: f64 = 1e-10;
/// Iteration cap used by threshold probes.
pub const THRESHOLD_MAX_ITER: usize = 5000;
/// Grid size for the iteration-count integral.
pub const INTEGRAL_POINTS: usize = 2000;
/// Smallest admissible `ln(γ / f(γ))` inside the integral.
pub const LOG_RATIO_FLOOR: f64 = 1e-12;

/// Recursion parameters on the binary image.
#[derive(Clone, Debug, PartialEq)]
pub struct DeParams {
    pub p: u32,
    pub lambda_hat: DegreeDistribution,
    pub rho_hat: DegreeDistribution,
    pub d_m: f64,
    pub eps0: f64,
    lam: Vec<(i32, f64)>,
    rho: Vec<(f64, f64)>,
}

impl DeParams {
    pub fn new(
        p: u32,
        lambda_hat: DegreeDistribution,
        rho_hat: DegreeDistribution,
        d_m: f64,
        eps0: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps0) {
            return Err(Error::Config(format!("eps0 = {eps0} outside [0, 1]")));
        }
        if !(1.0..=f64::from(p)).contains(&d_m) {
            return Err(Error::Config(format!("d_m = {d_m} outside [1, {p}]")));
        }
        let lam = lambda_hat
            .iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|(i, w)| (i as i32 - 1, w))
            .collect();
        let rho = rho_hat
            .iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|(j, w)| (j as f64 - d_m, w))
            .collect();
        Ok(DeParams {
            p,
            lambda_hat,
            rho_hat,
            d_m,
            eps0,
            lam,
            rho,
        })
    }

    /// Converts q-ary distributions with the uniform label profile.
    pub fn from_code(
        lambda: &DegreeDistribution,
        rho: &DegreeDistribution,
        p: u32,
        eps0: f64,
    ) -> Result<Self> {
        let mut conv = BinaryDegreeConverter::new(uniform_label_profile(p));
        Self::with_converter(&mut conv, lambda, rho, eps0)
    }

    pub fn with_converter(
        conv: &mut BinaryDegreeConverter,
        lambda: &DegreeDistribution,
        rho: &DegreeDistribution,
        eps0: f64,
    ) -> Result<Self> {
        let profile = conv.profile().clone();
        let lambda_hat = conv.convert(lambda);
        let rho_hat = conv.convert(rho);
        Self::new(profile.p(), lambda_hat, rho_hat, profile.d_m(), eps0)
    }

    /// Same distributions at another channel erasure probability.
    pub fn at(&self, eps0: f64) -> Self {
        DeParams {
            eps0,
            ..self.clone()
        }
    }

    /// Channel erasure probability mapped to the symbol domain.
    pub fn gamma0(&self) -> f64 {
        bit_to_symbol(self.eps0, self.p)
    }
}

/// Symbol erasure probability of `p` independent bits erased with `eps`.
pub fn bit_to_symbol(eps: f64, p: u32) -> f64 {
    1.0 - (1.0 - eps).powi(p as i32)
}

/// Inverse of [`bit_to_symbol`].
pub fn symbol_to_bit(gamma: f64, p: u32) -> f64 {
    1.0 - (1.0 - gamma).max(0.0).powf(1.0 / f64::from(p))
}

/// `ξ(ε) = ε₀ Σ λ̂_i (1 − Σ ρ̂_j (1 − ε)^{j − d_m})^{i − 1}`.
///
/// The inner sum is clamped to 1; at `ε = 1` it is taken as 0.
pub fn bit_step(eps: f64, params: &DeParams) -> f64 {
    let base = 1.0 - eps;
    let inner = if base <= 0.0 {
        0.0
    } else {
        let ln = base.ln();
        params
            .rho
            .iter()
            .map(|&(e, w)| w * (e * ln).exp())
            .sum::<f64>()
            .min(1.0)
    };
    let out = 1.0 - inner;
    params.eps0 * params.lam.iter().map(|&(e, w)| w * out.powi(e)).sum::<f64>()
}

/// `f(γ) = 1 − (1 − ξ(1 − (1 − γ)^{1/p}))^p`.
pub fn symbol_step(gamma: f64, params: &DeParams) -> f64 {
    let eps = symbol_to_bit(gamma.clamp(0.0, 1.0), params.p);
    bit_to_symbol(bit_step(eps, params), params.p).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeTrajectory {
    pub bit_eps: Vec<f64>,
    pub sym_gamma: Vec<f64>,
    pub converged: bool,
    /// Last value of γ.
    pub fixed_point: f64,
    /// True when the run ended on a step below `tol · γ` without reaching zero.
    pub stalled: bool,
}

impl DeTrajectory {
    pub fn iterations(&self) -> usize {
        self.sym_gamma.len() - 1
    }

    /// CSV with header `iter,gamma,bit_eps`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["iter", "gamma", "bit_eps"])?;
        for (l, (g, e)) in self.sym_gamma.iter().zip(&self.bit_eps).enumerate() {
            wtr.write_record([l.to_string(), g.to_string(), e.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Iterates [`symbol_step`] from `gamma0` (default `1 − (1 − ε₀)^p`) until
/// `γ < tol`, a relative step below `tol`, or `max_iter` steps.
pub fn run_de(params: &DeParams, gamma0: Option<f64>, tol: f64, max_iter: usize) -> DeTrajectory {
    assert!(tol > 0.0, "tolerance must be positive");
    let mut gamma = gamma0.unwrap_or_else(|| params.gamma0()).clamp(0.0, 1.0);
    let mut sym_gamma = vec![gamma];
    let mut stalled = false;
    while gamma >= tol && sym_gamma.len() <= max_iter {
        let next = symbol_step(gamma, params);
        sym_gamma.push(next);
        // Relative, so geometric tails just above `tol` are not mistaken
        // for a fixed point.
        let step = (gamma - next).abs();
        gamma = next;
        if step <= tol * gamma && gamma >= tol {
            stalled = true;
            break;
        }
    }
    DeTrajectory {
        bit_eps: sym_gamma.iter().map(|&g| symbol_to_bit(g, params.p)).collect(),
        converged: gamma < tol,
        fixed_point: gamma,
        stalled,
        sym_gamma,
    }
}

/// Whether the recursion drives γ to zero at `params.eps0`.
///
/// A run that hits the iteration cap still counts when `f(γ) < γ` holds on
/// a log grid between its last value and 1e-12, so slow linear tails near
/// the stability limit do not look like failures.
pub fn decodable(params: &DeParams) -> bool {
    let traj = run_de(params, None, THRESHOLD_TOL, THRESHOLD_MAX_ITER);
    if traj.converged {
        return true;
    }
    if traj.stalled {
        return false;
    }
    let top = traj.fixed_point;
    if top >= 1e-3 {
        return false;
    }
    log_grid(1e-12, top, 400).all(|g| symbol_step(g, params) < g)
}

/// Largest channel erasure probability the recursion still decodes,
/// bracketed by bisection to width `tol`.
pub fn find_threshold(
    lambda: &DegreeDistribution,
    rho: &DegreeDistribution,
    p: u32,
    tol: f64,
) -> Result<f64> {
    if !(tol >= 1e-5) {
        return Err(Error::Config(format!("threshold tolerance {tol} below 1e-5")));
    }
    let params = DeParams::from_code(lambda, rho, p, 0.0)?;
    Ok(threshold_of(&params, tol))
}

/// As [`find_threshold`] for prepared parameters; `params.eps0` is ignored.
pub fn threshold_of(params: &DeParams, tol: f64) -> f64 {
    assert!(tol > 0.0, "tolerance must be positive");
    let (mut lo, mut hi) = (0.0, 1.0);
    if decodable(&params.at(hi)) {
        return hi;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if decodable(&params.at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let step = if n > 1 { (b - a) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |k| if k + 1 == n { hi } else { (a + step * k as f64).exp() })
}

/// Result of the iteration-count integral.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct IterationCount {
    pub value: f64,
    /// Grid points where `ln(γ / f(γ))` was raised to [`LOG_RATIO_FLOOR`].
    pub clamped: usize,
}

/// `L = ∫_{γL}^{γ0} dγ / (γ ln(γ / f(γ)))` for an arbitrary map `f`.
///
/// Trapezoid rule in `ln γ` on [`INTEGRAL_POINTS`] log-spaced points.
pub fn iteration_count_with(
    f: impl Fn(f64) -> f64,
    gamma0: f64,
    gamma_l: f64,
) -> Result<IterationCount> {
    if !(gamma_l > 0.0 && gamma_l < gamma0 && gamma0 <= 1.0) {
        return Err(Error::Config(format!(
            "need 0 < gammaL < gamma0 <= 1, got [{gamma_l}, {gamma0}]"
        )));
    }
    let mut clamped = 0;
    let mut values = Vec::with_capacity(INTEGRAL_POINTS);
    for g in log_grid(gamma_l, gamma0, INTEGRAL_POINTS) {
        let fg = f(g);
        if fg >= g {
            return Err(Error::Infeasible(format!(
                "f(γ) = {fg:e} is not below γ = {g:e}"
            )));
        }
        let ratio = if fg <= 0.0 { f64::INFINITY } else { (g / fg).ln() };
        let ratio = if ratio < LOG_RATIO_FLOOR {
            clamped += 1;
            LOG_RATIO_FLOOR
        } else {
            ratio
        };
        values.push(1.0 / ratio);
    }
    if clamped > 0 {
        warn!("iteration count clamped at {clamped} grid points; L is unreliable");
    }
    let h = (gamma0.ln() - gamma_l.ln()) / (INTEGRAL_POINTS - 1) as f64;
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    let value = h * (inner + 0.5 * (values[0] + values[values.len() - 1]));
    Ok(IterationCount { value, clamped })
}

/// Iteration count of the symbol recursion between `gamma0` and `gamma_l`.
pub fn iteration_count(params: &DeParams, gamma0: f64, gamma_l: f64) -> Result<f64> {
    iteration_count_with(|g| symbol_step(g, params), gamma0, gamma_l).map(|c| c.value)
}

/// `g = ((1 − γL)^{1/p} − (1 − ε₀)) N p / L`.
pub fn ops_per_iteration(gamma_l: f64, eps0: f64, n: usize, p: u32, l: f64) -> f64 {
    normalized_ops_per_iteration(gamma_l, eps0, p, l) * (n as f64 * f64::from(p))
}

/// [`ops_per_iteration`] divided by the block length `N p`.
pub fn normalized_ops_per_iteration(gamma_l: f64, eps0: f64, p: u32, l: f64) -> f64 {
    ((1.0 - gamma_l).powf(1.0 / f64::from(p)) - (1.0 - eps0)) / l
}
