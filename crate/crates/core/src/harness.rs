//! Channel simulation, Monte-Carlo campaigns and result tables.

use std::io::Write;
use std::path::PathBuf;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codegraph::{assign_labels, sample_code, BinaryImage, TannerGraph};
use crate::decoders::{decode, DecodeResult, DecoderKind, ErasurePattern, DEFAULT_MAX_ITER};
use crate::devolution::{run_de, DeParams};
use crate::ensemble::{uniform_label_profile, BinaryDegreeConverter, DegreeDistribution};
use crate::error::{Error, Result};
use crate::gfield::Field;

/// Seed of an independent stream, mixed from a master seed and two indices.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GRAPH_STREAM: u64 = 1;
const LABEL_STREAM: u64 = 2;
const CHANNEL_STREAM: u64 = 3;

/// All-zero codeword through a BEC: each bit erased independently.
pub fn transmit_bec(bit_count: usize, p: u32, eps0: f64, seed: u64) -> Result<ErasurePattern> {
    if !(0.0..=1.0).contains(&eps0) {
        return Err(Error::Config(format!("eps0 = {eps0} outside [0, 1]")));
    }
    if p == 0 || bit_count % p as usize != 0 {
        return Err(Error::Config(format!(
            "{bit_count} bits do not split into symbols of {p} bits"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let known = (0..bit_count / p as usize)
        .map(|_| {
            (0..p).fold(0u32, |acc, s| {
                if rng.random_bool(eps0) {
                    acc
                } else {
                    acc | (1 << s)
                }
            })
        })
        .collect::<Vec<_>>();
    let values = vec![0; known.len()];
    ErasurePattern::from_masks(p, known, values)
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_decoder() -> DecoderKind {
    DecoderKind::Hybrid
}

fn default_trials() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub p: u32,
    pub lambda: DegreeDistribution,
    pub rho: DegreeDistribution,
    /// Block length in bits, `N p`.
    pub n_bits: usize,
    pub eps0: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_decoder")]
    pub decoder: DecoderKind,
    #[serde(default)]
    pub seed: u64,
    /// Decode every trial on one graph instead of drawing a fresh one.
    #[serde(default)]
    pub fixed_graph: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.p == 0 || self.n_bits == 0 || self.n_bits % self.p as usize != 0 {
            return bad(format!("n_bits = {} is not a multiple of p = {}", self.n_bits, self.p));
        }
        if let Some(e) = self.eps0.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return bad(format!("eps0 = {e} outside [0, 1]"));
        }
        if self.decoder == DecoderKind::Binary && self.p != 1 {
            return bad("the binary decoder needs p = 1".into());
        }
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.n_bits / self.p as usize
    }
}

/// Draws the code of trial `index`.
pub fn build_code(
    lambda: &DegreeDistribution,
    rho: &DegreeDistribution,
    field: &Field,
    n_vars: usize,
    master: u64,
    index: u64,
) -> Result<TannerGraph> {
    let base = sample_code(lambda, rho, n_vars, derive_seed(master, GRAPH_STREAM, index))?;
    Ok(assign_labels(&base, field, derive_seed(master, LABEL_STREAM, index)))
}

/// Per-trial summary.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub ber: f64,
    pub ser: f64,
    pub success: bool,
    pub iterations: usize,
    pub ops_per_iter: f64,
}

impl TrialOutcome {
    fn from_result(r: &DecodeResult, bits: usize, symbols: usize) -> Self {
        TrialOutcome {
            ber: r.unrecovered_bits as f64 / bits as f64,
            ser: r.unrecovered_symbols as f64 / symbols as f64,
            success: r.success,
            iterations: r.iterations_used,
            ops_per_iter: if r.iterations_used == 0 {
                0.0
            } else {
                r.recovered_bits as f64 / r.iterations_used as f64
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub eps0: f64,
    pub trials: usize,
    pub ber: f64,
    pub ser: f64,
    pub success_rate: f64,
    pub mean_iters: f64,
    pub mean_ops_per_iter: f64,
    /// Half-width of the normal 95% interval on `ber`.
    pub ci95_ber: f64,
    #[serde(skip)]
    pub ber_samples: Vec<f64>,
}

impl SimRow {
    fn aggregate(eps0: f64, outcomes: &[TrialOutcome]) -> Self {
        let t = outcomes.len() as f64;
        let mean = |f: &dyn Fn(&TrialOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / t;
        let ber = mean(&|o| o.ber);
        let var = if outcomes.len() > 1 {
            outcomes.iter().map(|o| (o.ber - ber).powi(2)).sum::<f64>() / (t - 1.0)
        } else {
            0.0
        };
        SimRow {
            eps0,
            trials: outcomes.len(),
            ber,
            ser: mean(&|o| o.ser),
            success_rate: mean(&|o| f64::from(u8::from(o.success))),
            mean_iters: mean(&|o| o.iterations as f64),
            mean_ops_per_iter: mean(&|o| o.ops_per_iter),
            ci95_ber: 1.96 * (var / t).sqrt(),
            ber_samples: outcomes.iter().map(|o| o.ber).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub rows: Vec<SimRow>,
}

impl SimReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "eps0",
            "trials",
            "ber",
            "ser",
            "success_rate",
            "mean_iters",
            "mean_ops_per_iter",
            "ci95_ber",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                r.eps0.to_string(),
                r.trials.to_string(),
                r.ber.to_string(),
                r.ser.to_string(),
                r.success_rate.to_string(),
                r.mean_iters.to_string(),
                r.mean_ops_per_iter.to_string(),
                r.ci95_ber.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Runs every `(eps0, trial)` pair. Trials run in parallel; each draws its
/// graph and channel from seeds derived from the master seed and its index,
/// so the report does not depend on scheduling.
pub fn run_campaign(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let field = Field::new(config.p)?;
    let n_vars = config.n_vars();
    let graph_count = if config.fixed_graph { 1 } else { config.trials };
    let graphs: Vec<TannerGraph> = (0..graph_count as u64)
        .into_par_iter()
        .map(|t| build_code(&config.lambda, &config.rho, &field, n_vars, config.seed, t))
        .collect::<Result<_>>()?;

    let mut points: Vec<(usize, f64)> = config.eps0.iter().copied().enumerate().collect();
    points.sort_by(|a, b| a.1.total_cmp(&b.1));

    let rows = points
        .iter()
        .map(|&(k, eps0)| {
            let outcomes = (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let graph = &graphs[if config.fixed_graph { 0 } else { t }];
                    let big = BinaryImage::new(graph, &field)?;
                    let seed = derive_seed(config.seed, CHANNEL_STREAM, (k as u64) << 32 | t as u64);
                    let pattern = transmit_bec(config.n_bits, config.p, eps0, seed)?;
                    let r = decode(config.decoder, &big, &pattern, config.max_iter)?;
                    let o = TrialOutcome::from_result(&r, config.n_bits, n_vars);
                    debug!(
                        "eps0={eps0} trial={t} erased={} unrecovered={} iters={}",
                        pattern.erased_bits(),
                        r.unrecovered_bits,
                        r.iterations_used
                    );
                    Ok(o)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SimRow::aggregate(eps0, &outcomes))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimReport { rows })
}

/// Estimated and sampled binary-image distribution, per degree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeComparison {
    /// `(degree, estimated, mean empirical)` rows.
    pub rows: Vec<(usize, f64, f64)>,
    /// L∞ gap of each sampled graph.
    pub gaps: Vec<f64>,
}

impl DegreeComparison {
    pub fn mean_gap(&self) -> f64 {
        self.gaps.iter().sum::<f64>() / self.gaps.len() as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["degree", "estimated", "empirical"])?;
        for (d, e, m) in &self.rows {
            wtr.write_record([d.to_string(), e.to_string(), m.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Variable-side and check-side comparisons.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub variable: DegreeComparison,
    pub check: DegreeComparison,
}

/// Compares the converted distributions against graphs sampled with each seed.
pub fn estimate_vs_empirical(
    lambda: &DegreeDistribution,
    rho: &DegreeDistribution,
    p: u32,
    n_bits: usize,
    seeds: &[u64],
) -> Result<EstimateReport> {
    if p == 0 || n_bits % p as usize != 0 {
        return Err(Error::Config(format!("n_bits = {n_bits} is not a multiple of p = {p}")));
    }
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is needed".into()));
    }
    let field = Field::new(p)?;
    let mut conv = BinaryDegreeConverter::new(uniform_label_profile(p));
    let est = (conv.convert(lambda), conv.convert(rho));
    let samples: Vec<(DegreeDistribution, DegreeDistribution)> = seeds
        .par_iter()
        .map(|&s| {
            let g = build_code(lambda, rho, &field, n_bits / p as usize, s, 0)?;
            BinaryImage::new(&g, &field)?.empirical_binary_degrees()
        })
        .collect::<Result<_>>()?;
    let side = |est: &DegreeDistribution, emp: Vec<&DegreeDistribution>| {
        let degrees: std::collections::BTreeSet<usize> =
            est.degrees().chain(emp.iter().flat_map(|d| d.degrees())).collect();
        let k = emp.len() as f64;
        DegreeComparison {
            rows: degrees
                .into_iter()
                .map(|d| (d, est.get(d), emp.iter().map(|e| e.get(d)).sum::<f64>() / k))
                .collect(),
            gaps: emp.iter().map(|e| e.linf_distance(est)).collect(),
        }
    };
    Ok(EstimateReport {
        variable: side(&est.0, samples.iter().map(|s| &s.0).collect()),
        check: side(&est.1, samples.iter().map(|s| &s.1).collect()),
    })
}

/// Per-iteration bit-erasure fraction: recursion vs simulation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryComparison {
    /// `(iteration, recursion, mean simulated)` rows, iteration 0 first.
    pub rows: Vec<(usize, f64, f64)>,
}

impl TrajectoryComparison {
    pub fn max_gap(&self) -> f64 {
        self.rows.iter().map(|(_, a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Runs a hybrid decode per seed and averages the fraction of erased bits
/// after each sweep; runs that stop early keep their last value.
pub fn de_vs_simulation(
    lambda: &DegreeDistribution,
    rho: &DegreeDistribution,
    p: u32,
    n_bits: usize,
    eps0: f64,
    seeds: &[u64],
    iterations: usize,
) -> Result<TrajectoryComparison> {
    if p == 0 || n_bits % p as usize != 0 {
        return Err(Error::Config(format!("n_bits = {n_bits} is not a multiple of p = {p}")));
    }
    let field = Field::new(p)?;
    let params = DeParams::from_code(lambda, rho, p, eps0)?;
    let de = run_de(&params, None, 1e-12, iterations).bit_eps;
    let sims: Vec<Vec<usize>> = seeds
        .par_iter()
        .map(|&s| {
            let g = build_code(lambda, rho, &field, n_bits / p as usize, s, 0)?;
            let big = BinaryImage::new(&g, &field)?;
            let pattern = transmit_bec(n_bits, p, eps0, derive_seed(s, CHANNEL_STREAM, 0))?;
            Ok(crate::decoders::decode_hybrid(&big, &pattern, iterations)?.erasure_trajectory())
        })
        .collect::<Result<_>>()?;
    let at = |v: &[f64], l: usize| v[l.min(v.len() - 1)];
    let rows = (0..=iterations)
        .map(|l| {
            let sim = sims
                .iter()
                .map(|t| t[l.min(t.len() - 1)] as f64 / n_bits as f64)
                .sum::<f64>()
                / sims.len() as f64;
            (l, at(&de, l), sim)
        })
        .collect();
    Ok(TrajectoryComparison { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(c: &[(usize, f64)]) -> DegreeDistribution {
        DegreeDistribution::new(c.iter().copied()).unwrap()
    }

    fn config() -> SimConfig {
        SimConfig {
            p: 2,
            lambda: dist(&[(2, 0.5), (3, 0.5)]),
            rho: dist(&[(5, 1.0)]),
            n_bits: 2000,
            eps0: vec![0.3, 0.0, 0.1],
            trials: 6,
            max_iter: 60,
            decoder: DecoderKind::Hybrid,
            seed: 11,
            fixed_graph: false,
            output: None,
        }
    }

    #[test]
    fn channel_extremes() {
        let none = transmit_bec(300, 3, 0.0, 1).unwrap();
        assert_eq!(none.erased_bits(), 0);
        let all = transmit_bec(300, 3, 1.0, 1).unwrap();
        assert_eq!(all.erased_bits(), 300);
        assert!(all.value_masks().iter().all(|&v| v == 0));
        assert!(transmit_bec(301, 3, 0.5, 1).is_err());
        assert!(transmit_bec(300, 3, 1.5, 1).is_err());
    }

    #[test]
    fn channel_rate() {
        let n = 1_000_000;
        let pat = transmit_bec(n, 4, 0.3, 99).unwrap();
        let frac = pat.erased_bits() as f64 / n as f64;
        let sigma = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((frac - 0.3).abs() < 3.0 * sigma, "{frac}");
        assert_eq!(pat, transmit_bec(n, 4, 0.3, 99).unwrap());
        assert_ne!(pat, transmit_bec(n, 4, 0.3, 100).unwrap());
    }

    #[test]
    fn noiseless_point() {
        let mut c = config();
        c.eps0 = vec![0.0];
        c.trials = 1;
        let r = run_campaign(&c).unwrap();
        assert_eq!(r.rows[0].ber, 0.0);
        assert_eq!(r.rows[0].success_rate, 1.0);
        assert_eq!(r.rows[0].mean_iters, 0.0);
    }

    #[test]
    fn campaign_sorted_and_reproducible() {
        let c = config();
        let a = run_campaign(&c).unwrap();
        let eps: Vec<f64> = a.rows.iter().map(|r| r.eps0).collect();
        assert_eq!(eps, vec![0.0, 0.1, 0.3]);
        let mut x = Vec::new();
        let mut y = Vec::new();
        a.write_csv(&mut x).unwrap();
        run_campaign(&c).unwrap().write_csv(&mut y).unwrap();
        assert_eq!(x, y);
        let text = String::from_utf8(x).unwrap();
        assert!(text.starts_with(
            "eps0,trials,ber,ser,success_rate,mean_iters,mean_ops_per_iter,ci95_ber\n"
        ));
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = serial.install(|| run_campaign(&c)).unwrap();
        assert_eq!(a, b);
        for r in &a.rows {
            assert!((0.0..=1.0).contains(&r.ber) && (0.0..=1.0).contains(&r.ser));
            let mean = r.ber_samples.iter().sum::<f64>() / r.trials as f64;
            assert!((mean - r.ber).abs() < 1e-15);
        }
    }

    #[test]
    fn fixed_graph_and_config_errors() {
        let mut c = config();
        c.fixed_graph = true;
        assert!(run_campaign(&c).is_ok());
        c.trials = 0;
        assert!(matches!(run_campaign(&c), Err(Error::Config(_))));
        let mut c = config();
        c.n_bits = 2001;
        assert!(matches!(run_campaign(&c), Err(Error::Config(_))));
        let mut c = config();
        c.decoder = DecoderKind::Binary;
        assert!(matches!(run_campaign(&c), Err(Error::Config(_))));
    }

    #[test]
    fn config_json_defaults() {
        let text = r#"{"p":3,"lambda":{"2":1.0},"rho":{"4":1.0},"n_bits":300,"eps0":[0.2]}"#;
        let c: SimConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.max_iter, 60);
        assert_eq!(c.trials, 100);
        assert_eq!(c.decoder, DecoderKind::Hybrid);
        assert!(!c.fixed_graph);
        let back: SimConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn binary_estimate_is_exact() {
        let l = dist(&[(2, 0.4), (3, 0.6)]);
        let r = dist(&[(6, 1.0)]);
        let rep = estimate_vs_empirical(&l, &r, 1, 3000, &[1, 2]).unwrap();
        for (_, est, emp) in &rep.variable.rows {
            // Integer socket counts put the sample within one node of the target.
            assert!((est - emp).abs() < 2e-3);
        }
        assert!(rep.check.gaps.iter().all(|&g| g < 1e-12));
    }

    #[test]
    fn single_degree_estimate() {
        // λ(x) = x: the estimate is the normalized i=2 expansion weighted by j.
        let l = dist(&[(2, 1.0)]);
        let r = dist(&[(4, 1.0)]);
        let rep = estimate_vs_empirical(&l, &r, 3, 3000, &[5]).unwrap();
        let coeffs = crate::ensemble::expand_weight_polynomial(&uniform_label_profile(3), 2);
        let total: f64 = coeffs.iter().map(|(&j, &b)| b * j as f64).sum();
        for (d, est, _) in &rep.variable.rows {
            let want = coeffs.get(d).map_or(0.0, |&b| b * *d as f64 / total);
            assert!((est - want).abs() < 1e-12);
        }
        assert!(rep.variable.mean_gap() < 0.02);
    }

    #[test]
    fn trajectory_comparison_shape() {
        let l = dist(&[(3, 1.0)]);
        let r = dist(&[(6, 1.0)]);
        let cmp = de_vs_simulation(&l, &r, 1, 4000, 0.3, &[1, 2], 5).unwrap();
        assert_eq!(cmp.rows.len(), 6);
        assert!((cmp.rows[0].1 - 0.3).abs() < 1e-12);
        assert!((cmp.rows[0].2 - 0.3).abs() < 0.03);
        assert!(cmp.rows.windows(2).all(|w| w[1].2 <= w[0].2));
    }

    #[test]
    fn seeds_are_spread() {
        let a = derive_seed(1, 2, 3);
        assert_ne!(a, derive_seed(1, 2, 4));
        assert_ne!(a, derive_seed(1, 3, 3));
        assert_ne!(a, derive_seed(2, 2, 3));
    }
}
