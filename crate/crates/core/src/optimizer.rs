//! Local search for degree distributions that recover more bits per
//! iteration, under rate, simplex and trust-region constraints.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::devolution::{
    iteration_count, log_grid, ops_per_iteration, symbol_step, threshold_of, DeParams,
};
use crate::ensemble::{uniform_label_profile, BinaryDegreeConverter, DegreeDistribution};
use crate::error::{Error, Result};
use crate::gfield::MAX_DEGREE;

/// Points of the contraction check grid.
pub const CONTRACTION_POINTS: usize = 500;
/// Largest variable degree offered by the default support.
pub const MAX_VARIABLE_DEGREE: usize = 16;

const SUM_TOL: f64 = 1e-9;
const BATCH: usize = 32;
const MIN_STEP: f64 = 1e-4;
/// Outer steps without improvement before the search stops.
const PATIENCE: usize = 3;

fn default_zeta() -> f64 {
    0.05
}

fn default_budget() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationProblem {
    pub anchor_lambda: DegreeDistribution,
    pub anchor_rho: DegreeDistribution,
    #[serde(alias = "R0")]
    pub r0: f64,
    pub eps0: f64,
    /// Start of the symbol-erasure range.
    pub gamma0: f64,
    /// End of the symbol-erasure range.
    #[serde(alias = "gammaL")]
    pub gamma_l: f64,
    #[serde(default = "default_zeta")]
    pub zeta1: f64,
    #[serde(default = "default_zeta")]
    pub zeta2: f64,
    #[serde(alias = "N")]
    pub n: usize,
    pub p: u32,
    #[serde(default)]
    pub lambda_support: Option<Vec<usize>>,
    #[serde(default)]
    pub rho_support: Option<Vec<usize>>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
}

impl OptimizationProblem {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.r0 > 0.0 && self.r0 < 1.0) {
            return bad(format!("R0 = {} outside (0, 1)", self.r0));
        }
        for (name, z) in [("zeta1", self.zeta1), ("zeta2", self.zeta2)] {
            if !(z > 0.0 && z <= 0.2) {
                return bad(format!("{name} = {z} outside (0, 0.2]"));
            }
        }
        if !(self.gamma_l > 0.0 && self.gamma_l < self.gamma0 && self.gamma0 <= 1.0) {
            return bad(format!(
                "need 0 < gamma_l < gamma0 <= 1, got [{}, {}]",
                self.gamma_l, self.gamma0
            ));
        }
        if !(0.0..=1.0).contains(&self.eps0) {
            return bad(format!("eps0 = {} outside [0, 1]", self.eps0));
        }
        if self.p == 0 || self.p > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(self.p));
        }
        if self.n == 0 {
            return bad("N must be positive".into());
        }
        self.anchor_lambda.require_min_degree(2)?;
        self.anchor_rho.require_min_degree(2)?;
        let (ls, rs) = (self.lambda_degrees(), self.rho_degrees());
        if !self.anchor_lambda.degrees().all(|d| ls.contains(&d))
            || !self.anchor_rho.degrees().all(|d| rs.contains(&d))
        {
            return bad("anchor uses degrees outside the declared support".into());
        }
        Ok(())
    }

    /// Candidate variable degrees: the given support, or the anchor's
    /// degrees together with `2..=16`.
    pub fn lambda_degrees(&self) -> BTreeSet<usize> {
        match &self.lambda_support {
            Some(s) => s.iter().copied().collect(),
            None => self
                .anchor_lambda
                .degrees()
                .chain(2..=MAX_VARIABLE_DEGREE)
                .collect(),
        }
    }

    /// Candidate check degrees: the given support, or every anchor degree
    /// and its neighbors.
    pub fn rho_degrees(&self) -> BTreeSet<usize> {
        match &self.rho_support {
            Some(s) => s.iter().copied().collect(),
            None => self
                .anchor_rho
                .degrees()
                .flat_map(|d| [d - 1, d, d + 1])
                .filter(|&d| d >= 2)
                .collect(),
        }
    }

    fn with_anchors(&self, lambda: &DegreeDistribution, rho: &DegreeDistribution) -> Self {
        OptimizationProblem {
            anchor_lambda: lambda.clone(),
            anchor_rho: rho.clone(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub outer_iter: usize,
    pub g: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub feasible: bool,
    pub lambda: DegreeDistribution,
    pub rho: DegreeDistribution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub lambda_star: DegreeDistribution,
    pub rho_star: DegreeDistribution,
    pub g_star: f64,
    #[serde(rename = "L_star")]
    pub l_star: f64,
    pub threshold: f64,
    pub history: Vec<HistoryEntry>,
}

impl OptimizationResult {
    /// CSV with header `outer_iter,g,L,feasible`.
    pub fn write_history_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["outer_iter", "g", "L", "feasible"])?;
        for h in &self.history {
            wtr.write_record([
                h.outer_iter.to_string(),
                h.g.to_string(),
                h.l.to_string(),
                h.feasible.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Objective value and the iteration count it came from.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Objective {
    pub g: f64,
    pub l: f64,
}

/// Holds the binary-image expansions shared by every evaluation.
pub struct Evaluator {
    converter: BinaryDegreeConverter,
}

impl Evaluator {
    pub fn new(prob: &OptimizationProblem) -> Self {
        let max = prob
            .lambda_degrees()
            .into_iter()
            .chain(prob.rho_degrees())
            .chain(prob.anchor_lambda.degrees())
            .chain(prob.anchor_rho.degrees())
            .max()
            .unwrap_or(2);
        Evaluator {
            converter: BinaryDegreeConverter::with_max_degree(uniform_label_profile(prob.p), max),
        }
    }

    fn params(
        &self,
        lambda: &DegreeDistribution,
        rho: &DegreeDistribution,
        eps0: f64,
    ) -> Option<Result<DeParams>> {
        let lh = self.converter.convert_cached(lambda)?;
        let rh = self.converter.convert_cached(rho)?;
        let profile = self.converter.profile();
        Some(DeParams::new(profile.p(), lh, rh, profile.d_m(), eps0))
    }

    fn de_params(
        &self,
        lambda: &DegreeDistribution,
        rho: &DegreeDistribution,
        eps0: f64,
    ) -> Result<DeParams> {
        self.params(lambda, rho, eps0).unwrap_or_else(|| {
            let mut conv = self.converter.clone();
            DeParams::with_converter(&mut conv, lambda, rho, eps0)
        })
    }

    pub fn feasible(
        &self,
        lambda: &DegreeDistribution,
        rho: &DegreeDistribution,
        prob: &OptimizationProblem,
    ) -> bool {
        let simplex = |d: &DegreeDistribution| {
            d.iter().all(|(_, w)| w >= 0.0) && (d.sum() - 1.0).abs() <= SUM_TOL
        };
        if !simplex(lambda) || !simplex(rho) {
            return false;
        }
        let (ls, rs) = (prob.lambda_degrees(), prob.rho_degrees());
        if !lambda.iter().all(|(d, w)| w == 0.0 || ls.contains(&d))
            || !rho.iter().all(|(d, w)| w == 0.0 || rs.contains(&d))
        {
            return false;
        }
        if lambda.inverse_mean_degree() < rho.inverse_mean_degree() / (1.0 - prob.r0) {
            return false;
        }
        if lambda.linf_distance(&prob.anchor_lambda) >= prob.zeta1
            || rho.linf_distance(&prob.anchor_rho) >= prob.zeta2
        {
            return false;
        }
        let Ok(params) = self.de_params(lambda, rho, prob.eps0) else {
            return false;
        };
        log_grid(prob.gamma_l, prob.gamma0, CONTRACTION_POINTS)
            .all(|g| symbol_step(g, &params) < g)
    }

    pub fn objective(
        &self,
        lambda: &DegreeDistribution,
        rho: &DegreeDistribution,
        prob: &OptimizationProblem,
    ) -> Result<Objective> {
        let params = self.de_params(lambda, rho, prob.eps0)?;
        let l = iteration_count(&params, prob.gamma0, prob.gamma_l)?;
        Ok(Objective {
            g: ops_per_iteration(prob.gamma_l, prob.eps0, prob.n, prob.p, l),
            l,
        })
    }
}

/// All constraints, checked against the problem's anchors.
pub fn feasible(
    lambda: &DegreeDistribution,
    rho: &DegreeDistribution,
    prob: &OptimizationProblem,
) -> bool {
    Evaluator::new(prob).feasible(lambda, rho, prob)
}

/// Bits recovered per iteration over the problem's range.
pub fn objective(
    lambda: &DegreeDistribution,
    rho: &DegreeDistribution,
    prob: &OptimizationProblem,
) -> Result<Objective> {
    Evaluator::new(prob).objective(lambda, rho, prob)
}

/// Moves `delta` of mass from degree `from` to degree `to`.
fn transfer(d: &DegreeDistribution, from: usize, to: usize, delta: f64) -> Option<DegreeDistribution> {
    let have = d.get(from);
    if have < delta || from == to {
        return None;
    }
    let mut coeffs: std::collections::BTreeMap<usize, f64> = d.iter().collect();
    if have - delta <= 1e-15 {
        coeffs.remove(&from);
    } else {
        coeffs.insert(from, have - delta);
    }
    *coeffs.entry(to).or_insert(0.0) += delta;
    Some(DegreeDistribution::with_weights(coeffs))
}

/// Maximizes the objective by repeated trust-region local searches, each
/// re-anchored at the previous optimum.
pub fn optimize(prob: &OptimizationProblem) -> Result<OptimizationResult> {
    prob.validate()?;
    let eval = Evaluator::new(prob);
    if !eval.feasible(&prob.anchor_lambda, &prob.anchor_rho, prob) {
        return Err(Error::Infeasible("anchor distributions violate the constraints".into()));
    }
    let start = eval.objective(&prob.anchor_lambda, &prob.anchor_rho, prob)?;
    let mut rng = ChaCha8Rng::seed_from_u64(prob.seed);
    let lambda_support: Vec<usize> = prob.lambda_degrees().into_iter().collect();
    let rho_support: Vec<usize> = prob.rho_degrees().into_iter().collect();

    let mut best = (prob.anchor_lambda.clone(), prob.anchor_rho.clone(), start);
    let mut history = vec![HistoryEntry {
        outer_iter: 0,
        g: start.g,
        l: start.l,
        feasible: true,
        lambda: prob.anchor_lambda.clone(),
        rho: prob.anchor_rho.clone(),
    }];

    let mut stale = 0;
    for outer in 1..=prob.budget {
        let local = prob.with_anchors(&best.0, &best.1);
        let mut current = best.clone();
        let mut delta = 0.5 * local.zeta1.min(local.zeta2);
        while delta >= MIN_STEP {
            let candidates: Vec<_> = (0..BATCH)
                .filter_map(|_| {
                    let pick = |rng: &mut ChaCha8Rng, support: &[usize]| {
                        let from = *support.choose(rng)?;
                        let to = *support.choose(rng)?;
                        (from != to).then_some((from, to))
                    };
                    let step = delta * rng.random_range(0.5..=1.0);
                    let (l, r) = match rng.random_range(0..3) {
                        0 => {
                            let (a, b) = pick(&mut rng, &lambda_support)?;
                            (transfer(&current.0, a, b, step)?, current.1.clone())
                        }
                        1 => {
                            let (a, b) = pick(&mut rng, &rho_support)?;
                            (current.0.clone(), transfer(&current.1, a, b, step)?)
                        }
                        _ => {
                            // The check-side amount keeps the rate slack
                            // unchanged, so the move slides along the rate
                            // boundary where one-sided moves are infeasible.
                            let (a, b) = pick(&mut rng, &lambda_support)?;
                            let (c, d) = pick(&mut rng, &rho_support)?;
                            let inv = |k: usize| 1.0 / k as f64;
                            let amount =
                                step * (inv(b) - inv(a)) * (1.0 - local.r0) / (inv(d) - inv(c));
                            if !(amount > 0.0) {
                                return None;
                            }
                            (
                                transfer(&current.0, a, b, step)?,
                                transfer(&current.1, c, d, amount)?,
                            )
                        }
                    };
                    Some((l, r))
                })
                .collect();
            let scored: Vec<Option<Objective>> = candidates
                .par_iter()
                .map(|(l, r)| {
                    if eval.feasible(l, r, &local) {
                        eval.objective(l, r, &local).ok()
                    } else {
                        None
                    }
                })
                .collect();
            let winner = scored
                .iter()
                .enumerate()
                .filter_map(|(k, s)| s.map(|s| (k, s)))
                .filter(|(_, s)| s.g > current.2.g)
                .fold(None::<(usize, Objective)>, |acc, (k, s)| match acc {
                    Some((_, b)) if b.g >= s.g => acc,
                    _ => Some((k, s)),
                });
            match winner {
                Some((k, s)) => {
                    let (l, r) = candidates[k].clone();
                    current = (l, r, s);
                }
                None => delta *= 0.5,
            }
        }
        let improved = current.2.g > best.2.g;
        if improved {
            best = current;
            stale = 0;
        } else {
            stale += 1;
        }
        history.push(HistoryEntry {
            outer_iter: outer,
            g: best.2.g,
            l: best.2.l,
            feasible: eval.feasible(&best.0, &best.1, &local),
            lambda: best.0.clone(),
            rho: best.1.clone(),
        });
        if stale >= PATIENCE {
            break;
        }
    }

    let (lambda_star, rho_star, obj) = best;
    let final_prob = match history.len() {
        1 => prob.clone(),
        _ => prob.with_anchors(&lambda_star, &rho_star),
    };
    if !eval.feasible(&lambda_star, &rho_star, &final_prob) {
        return Err(Error::Infeasible("optimum failed re-validation".into()));
    }
    let params = eval.de_params(&lambda_star, &rho_star, prob.eps0)?;
    Ok(OptimizationResult {
        threshold: threshold_of(&params, 1e-4),
        lambda_star,
        rho_star,
        g_star: obj.g,
        l_star: obj.l,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devolution::{bit_to_symbol, iteration_count_with};

    fn dist(c: &[(usize, f64)]) -> DegreeDistribution {
        DegreeDistribution::new(c.iter().copied()).unwrap()
    }

    fn c375() -> (DegreeDistribution, DegreeDistribution) {
        (
            dist(&[(2, 0.71), (4, 0.23), (5, 0.03), (8, 0.01), (12, 0.02)]),
            dist(&[(5, 0.32), (6, 0.68)]),
        )
    }

    fn c5() -> (DegreeDistribution, DegreeDistribution) {
        (
            dist(&[(2, 0.45), (3, 0.18), (4, 0.15), (6, 0.03), (9, 0.08), (14, 0.11)]),
            dist(&[(5, 0.27), (6, 0.73)]),
        )
    }

    fn problem(anchor: (DegreeDistribution, DegreeDistribution), r0: f64, budget: usize) -> OptimizationProblem {
        OptimizationProblem {
            anchor_lambda: anchor.0,
            anchor_rho: anchor.1,
            r0,
            eps0: 0.3,
            gamma0: bit_to_symbol(1e-3, 3),
            gamma_l: bit_to_symbol(1e-7, 3),
            zeta1: 0.05,
            zeta2: 0.05,
            n: 10_000,
            p: 3,
            lambda_support: None,
            rho_support: None,
            budget,
            seed: 7,
        }
    }

    #[test]
    fn anchors_are_feasible() {
        let prob = problem(c375(), 0.5, 0);
        assert!(feasible(&prob.anchor_lambda, &prob.anchor_rho, &prob));
    }

    #[test]
    fn trust_region_violation() {
        let prob = problem(c375(), 0.5, 0);
        let moved = transfer(&prob.anchor_lambda, 2, 3, 2.0 * prob.zeta1).unwrap();
        assert!(!feasible(&moved, &prob.anchor_rho, &prob));
        let small = transfer(&prob.anchor_lambda, 2, 3, 0.5 * prob.zeta1).unwrap();
        assert!((small.sum() - 1.0).abs() < 1e-15);
        assert!(feasible(&small, &prob.anchor_rho, &prob));
    }

    #[test]
    fn rate_constraint() {
        let (l, r) = c5();
        let rate = crate::ensemble::design_rate(&l, &r).unwrap();
        assert!(rate > 0.48 && rate < 0.5);
        assert!(feasible(&l, &r, &problem(c5(), 0.48, 0)));
        assert!(!feasible(&l, &r, &problem(c5(), 0.5, 0)));
    }

    #[test]
    fn contraction_constraint() {
        let mut prob = problem(c375(), 0.5, 0);
        prob.eps0 = 0.45;
        prob.gamma0 = 0.9;
        assert!(!feasible(&prob.anchor_lambda, &prob.anchor_rho, &prob));
    }

    #[test]
    fn objective_tracks_iteration_count() {
        let prob = problem(c375(), 0.5, 0);
        let obj = objective(&prob.anchor_lambda, &prob.anchor_rho, &prob).unwrap();
        let params = DeParams::from_code(&prob.anchor_lambda, &prob.anchor_rho, 3, 0.3).unwrap();
        let l = iteration_count(&params, prob.gamma0, prob.gamma_l).unwrap();
        assert_eq!(obj.l, l);
        assert_eq!(obj.g, ops_per_iteration(prob.gamma_l, 0.3, 10_000, 3, l));
    }

    #[test]
    fn halving_map_objective() {
        let l = iteration_count_with(|g| g / 2.0, 1e-3, 1e-7).unwrap().value;
        let g = ops_per_iteration(1e-7, 1e-3, 10_000, 1, l);
        let exact = (1e-3 - 1e-7) * 1e4 / (1e4f64.ln() / 2f64.ln());
        assert!((g - exact).abs() < 1e-9);
    }

    #[test]
    fn zero_budget_returns_anchor() {
        let prob = problem(c375(), 0.5, 0);
        let res = optimize(&prob).unwrap();
        assert_eq!(res.lambda_star, prob.anchor_lambda);
        assert_eq!(res.rho_star, prob.anchor_rho);
        assert_eq!(res.history.len(), 1);
        let obj = objective(&prob.anchor_lambda, &prob.anchor_rho, &prob).unwrap();
        assert_eq!(res.g_star, obj.g);
    }

    #[test]
    fn infeasible_anchor_rejected() {
        let prob = problem(c5(), 0.5, 3);
        assert!(matches!(optimize(&prob), Err(Error::Infeasible(_))));
        let mut bad = problem(c375(), 0.5, 3);
        bad.zeta1 = 0.5;
        assert!(matches!(optimize(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn short_run_improves_and_is_deterministic() {
        let prob = problem(c375(), 0.5, 3);
        let a = optimize(&prob).unwrap();
        let b = optimize(&prob).unwrap();
        assert_eq!(a, b);
        assert!(a.history.windows(2).all(|w| w[1].g >= w[0].g));
        assert!(a.g_star > a.history[0].g);
        assert!((a.lambda_star.sum() - 1.0).abs() < 1e-9);
        assert!(a.threshold > prob.eps0);
    }

    #[test]
    fn problem_json() {
        let prob = problem(c375(), 0.5, 10);
        let text = serde_json::to_string(&prob).unwrap();
        let back: OptimizationProblem = serde_json::from_str(&text).unwrap();
        assert_eq!(back, prob);
        let minimal = r#"{"anchor_lambda":{"2":1.0},"anchor_rho":{"4":1.0},"R0":0.4,
            "eps0":0.3,"gamma0":0.01,"gammaL":1e-6,"N":100,"p":2}"#;
        let prob: OptimizationProblem = serde_json::from_str(minimal).unwrap();
        assert_eq!(prob.zeta1, 0.05);
        assert_eq!(prob.budget, 50);
        assert_eq!(prob.rho_degrees().into_iter().collect::<Vec<_>>(), vec![3, 4, 5]);
        assert_eq!(prob.lambda_degrees().len(), 15);
    }
}
