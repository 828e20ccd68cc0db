//! Labeled q-ary Tanner graphs and their binary images.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{design_rate, DegreeDistribution};
use crate::error::{Error, Result};
use crate::gfield::Field;

/// An edge `h_{m,n} = α^label` between variable `var` and check `check`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub check: u32,
    pub var: u32,
    pub label: u32,
}

/// Sparse parity-check matrix over GF(2^p) with both adjacency directions.
///
/// Edges are kept sorted by `(check, var)`, so a check's edges are contiguous.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TannerGraph {
    n_vars: usize,
    n_checks: usize,
    p: u32,
    seed: u64,
    edges: Vec<Edge>,
    check_offsets: Vec<u32>,
    var_offsets: Vec<u32>,
    var_edge_ids: Vec<u32>,
}

impl TannerGraph {
    /// Builds a graph from an explicit edge list, rejecting out-of-range
    /// indices and parallel edges. Labels are exponents in GF(2^p).
    pub fn from_edges(n_vars: usize, n_checks: usize, p: u32, mut edges: Vec<Edge>) -> Result<Self> {
        let order = (1u64 << p) - 1;
        for e in &edges {
            if e.var as usize >= n_vars || e.check as usize >= n_checks {
                return Err(Error::Config(format!("edge {e:?} out of range")));
            }
            if u64::from(e.label) >= order {
                return Err(Error::Config(format!(
                    "label exponent {} out of range for p = {p}",
                    e.label
                )));
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges
            .windows(2)
            .find(|w| w[0].check == w[1].check && w[0].var == w[1].var)
        {
            return Err(Error::Config(format!(
                "parallel edge between variable {} and check {}",
                w[0].var, w[0].check
            )));
        }
        Ok(Self::build(n_vars, n_checks, p, 0, edges))
    }

    fn build(n_vars: usize, n_checks: usize, p: u32, seed: u64, edges: Vec<Edge>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        let mut check_offsets = vec![0u32; n_checks + 1];
        let mut var_offsets = vec![0u32; n_vars + 1];
        for e in &edges {
            check_offsets[e.check as usize + 1] += 1;
            var_offsets[e.var as usize + 1] += 1;
        }
        for i in 0..n_checks {
            check_offsets[i + 1] += check_offsets[i];
        }
        for i in 0..n_vars {
            var_offsets[i + 1] += var_offsets[i];
        }
        let mut fill = var_offsets.clone();
        let mut var_edge_ids = vec![0u32; edges.len()];
        for (id, e) in edges.iter().enumerate() {
            let slot = &mut fill[e.var as usize];
            var_edge_ids[*slot as usize] = id as u32;
            *slot += 1;
        }
        TannerGraph {
            n_vars,
            n_checks,
            p,
            seed,
            edges,
            check_offsets,
            var_offsets,
            var_edge_ids,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_checks(&self) -> usize {
        self.n_checks
    }

    /// Extension degree the labels refer to (1 for an unlabeled graph).
    pub fn p(&self) -> u32 {
        self.p
    }

    /// Seed the graph structure was sampled with (0 for explicit graphs).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges of check `m`, i.e. the variables in `H(m)` with their labels.
    #[inline]
    pub fn check_edges(&self, m: usize) -> &[Edge] {
        let lo = self.check_offsets[m] as usize;
        let hi = self.check_offsets[m + 1] as usize;
        &self.edges[lo..hi]
    }

    /// Edge indices of variable `n`, i.e. the checks in `N(n)`.
    #[inline]
    pub fn var_edge_ids(&self, n: usize) -> &[u32] {
        let lo = self.var_offsets[n] as usize;
        let hi = self.var_offsets[n + 1] as usize;
        &self.var_edge_ids[lo..hi]
    }

    /// Checks adjacent to variable `n`.
    pub fn var_checks(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.var_edge_ids(n)
            .iter()
            .map(|&id| self.edges[id as usize].check as usize)
    }

    pub fn var_degree(&self, n: usize) -> usize {
        (self.var_offsets[n + 1] - self.var_offsets[n]) as usize
    }

    pub fn check_degree(&self, m: usize) -> usize {
        (self.check_offsets[m + 1] - self.check_offsets[m]) as usize
    }

    /// Edge-perspective variable and check degree distributions.
    pub fn degree_distributions(&self) -> Result<(DegreeDistribution, DegreeDistribution)> {
        let edge_hist = |degrees: &mut dyn Iterator<Item = usize>| {
            let mut hist: HashMap<usize, f64> = HashMap::new();
            for d in degrees.filter(|&d| d > 0) {
                *hist.entry(d).or_insert(0.0) += d as f64;
            }
            DegreeDistribution::normalized(hist)
        };
        let lambda = edge_hist(&mut (0..self.n_vars).map(|n| self.var_degree(n)))?;
        let rho = edge_hist(&mut (0..self.n_checks).map(|m| self.check_degree(m)))?;
        Ok((lambda, rho))
    }

    /// `Σ_n h_{m,n} x_n = 0` for every check, with symbols given as packed
    /// field elements and products taken through log tables.
    pub fn is_codeword(&self, field: &Field, symbols: &[u32]) -> bool {
        assert_eq!(symbols.len(), self.n_vars);
        (0..self.n_checks).all(|m| {
            self.check_edges(m).iter().fold(0u32, |acc, e| {
                acc ^ field.mul(field.element(i64::from(e.label)).bits(), symbols[e.var as usize])
            }) == 0
        })
    }

    /// Serializes as `N M p seed` followed by one `n m k` line per edge.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {} {}", self.n_vars, self.n_checks, self.p, self.seed)?;
        for e in &self.edges {
            writeln!(w, "{} {} {}", e.var, e.check, e.label)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let parse_err = |line: usize, msg: &str| Error::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let (_, header) = lines.next().ok_or_else(|| parse_err(0, "missing header"))?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [n, m, p, seed] = fields[..] else {
            return Err(parse_err(0, "header must be `N M p seed`"));
        };
        let num = |s: &str| s.parse::<u64>().map_err(|_| parse_err(0, "bad header value"));
        let (n, m, p, seed) = (num(n)? as usize, num(m)? as usize, num(p)? as u32, num(seed)?);
        if !(1..=crate::gfield::MAX_DEGREE).contains(&p) {
            return Err(parse_err(0, "p out of range"));
        }
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<u32> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| parse_err(idx, "bad edge field")))
                .collect::<Result<_>>()?;
            let [var, check, label] = v[..] else {
                return Err(parse_err(idx, "edge must be `n m k`"));
            };
            edges.push(Edge { check, var, label });
        }
        let mut g = Self::from_edges(n, m, p, edges)?;
        g.seed = seed;
        Ok(g)
    }
}

/// Splits `total` items across categories by largest-remainder apportionment.
fn apportion(total: usize, fractions: &[(usize, f64)]) -> Vec<(usize, usize)> {
    let exact: Vec<f64> = fractions.iter().map(|&(_, f)| f * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    // Ties resolved toward lower degrees for determinism.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    fractions
        .iter()
        .zip(counts)
        .map(|(&(d, _), c)| (d, c))
        .collect()
}

/// Node degree sequence for checks whose sockets sum to `sockets` exactly.
///
/// One node of the highest-degree bucket absorbs the rounding residue.
fn check_degrees(rho: &DegreeDistribution, sockets: usize, n_vars: usize) -> Vec<usize> {
    let n_checks = (sockets as f64 * rho.inverse_mean_degree()).round().max(1.0) as usize;
    let mut degrees: Vec<usize> = apportion(n_checks, &rho.node_fractions())
        .into_iter()
        .flat_map(|(d, c)| std::iter::repeat_n(d, c))
        .collect();
    let mut diff = sockets as i64 - degrees.iter().sum::<usize>() as i64;
    while diff != 0 {
        let Some(top) = degrees.iter().copied().enumerate().max_by_key(|&(i, d)| (d, i)) else {
            degrees.push(diff as usize);
            break;
        };
        let (idx, d) = top;
        let target = d as i64 + diff;
        if diff > 0 {
            if target as usize <= n_vars {
                degrees[idx] = target as usize;
                diff = 0;
            } else {
                let extra = (diff as usize).min(n_vars);
                degrees.push(extra);
                diff -= extra as i64;
            }
        } else if target >= 2 {
            degrees[idx] = target as usize;
            diff = 0;
        } else {
            degrees.swap_remove(idx);
            diff += d as i64;
        }
    }
    degrees.sort_unstable();
    degrees
}

/// Samples a Tanner graph from the configuration model: node counts per
/// degree from `(λ, ρ)` by apportionment, sockets matched by a random
/// permutation, parallel edges repaired with random socket swaps.
///
/// All labels are exponent 0; see [`assign_labels`].
pub fn sample_code(
    lambda: &DegreeDistribution,
    rho: &DegreeDistribution,
    n_vars: usize,
    seed: u64,
) -> Result<TannerGraph> {
    let construction = |reason: String| Error::Construction { seed, reason };
    if n_vars == 0 {
        return Err(construction("no variable nodes".into()));
    }
    rho.require_min_degree(2)?;
    let rate = design_rate(lambda, rho)?;
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidDistribution(format!(
            "design rate {rate} outside [0, 1)"
        )));
    }

    let var_degrees: Vec<usize> = apportion(n_vars, &lambda.node_fractions())
        .into_iter()
        .flat_map(|(d, c)| std::iter::repeat_n(d, c))
        .collect();
    let sockets: usize = var_degrees.iter().sum();
    let chk_degrees = check_degrees(rho, sockets, n_vars);
    let n_checks = chk_degrees.len();
    if chk_degrees.iter().any(|&d| d > n_vars) {
        return Err(construction("check degree exceeds number of variables".into()));
    }

    let var_sockets: Vec<u32> = var_degrees
        .iter()
        .enumerate()
        .flat_map(|(v, &d)| std::iter::repeat_n(v as u32, d))
        .collect();
    let mut chk_sockets: Vec<u32> = chk_degrees
        .iter()
        .enumerate()
        .flat_map(|(c, &d)| std::iter::repeat_n(c as u32, d))
        .collect();
    debug_assert_eq!(var_sockets.len(), chk_sockets.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    chk_sockets.shuffle(&mut rng);

    let mut multiplicity: HashMap<(u32, u32), u32> = HashMap::with_capacity(sockets);
    for (&v, &c) in var_sockets.iter().zip(&chk_sockets) {
        *multiplicity.entry((v, c)).or_insert(0) += 1;
    }
    let mut conflicts: Vec<usize> = (0..sockets)
        .filter(|&i| multiplicity[&(var_sockets[i], chk_sockets[i])] > 1)
        .collect();

    let budget = 1000 + 200 * sockets;
    let mut attempts = 0;
    while let Some(i) = conflicts.pop() {
        let (vi, ci) = (var_sockets[i], chk_sockets[i]);
        if multiplicity[&(vi, ci)] <= 1 {
            continue;
        }
        loop {
            attempts += 1;
            if attempts > budget {
                return Err(construction(format!(
                    "could not remove parallel edges after {budget} swaps"
                )));
            }
            let j = rng.random_range(0..sockets);
            let (vj, cj) = (var_sockets[j], chk_sockets[j]);
            if vi == vj || ci == cj {
                continue;
            }
            let fresh = |key: (u32, u32)| multiplicity.get(&key).copied().unwrap_or(0) == 0;
            if !fresh((vi, cj)) || !fresh((vj, ci)) {
                continue;
            }
            *multiplicity.get_mut(&(vi, ci)).unwrap() -= 1;
            let mj = multiplicity.get_mut(&(vj, cj)).unwrap();
            *mj -= 1;
            *multiplicity.entry((vi, cj)).or_insert(0) += 1;
            *multiplicity.entry((vj, ci)).or_insert(0) += 1;
            chk_sockets.swap(i, j);
            break;
        }
    }

    let mut edges: Vec<Edge> = var_sockets
        .iter()
        .zip(&chk_sockets)
        .map(|(&var, &check)| Edge {
            check,
            var,
            label: 0,
        })
        .collect();
    edges.sort_unstable();
    Ok(TannerGraph::build(n_vars, n_checks, 1, seed, edges))
}

/// Draws every label exponent independently and uniformly from `0..q-1`.
pub fn assign_labels(graph: &TannerGraph, field: &Field, seed: u64) -> TannerGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = field.order();
    let edges = graph
        .edges
        .iter()
        .map(|e| Edge {
            label: rng.random_range(0..order),
            ..*e
        })
        .collect();
    TannerGraph::build(graph.n_vars, graph.n_checks, field.p(), graph.seed, edges)
}

/// The binary code `ker(H̄)` obtained by replacing each label `α^k` with the
/// block `A^k`. Bit `s` of symbol `n` is bit `n·p + s` of the image.
#[derive(Clone, Copy, Debug)]
pub struct BinaryImage<'a> {
    graph: &'a TannerGraph,
    field: &'a Field,
}

impl<'a> BinaryImage<'a> {
    pub fn new(graph: &'a TannerGraph, field: &'a Field) -> Result<Self> {
        if graph.p() != field.p() {
            return Err(Error::Config(format!(
                "graph labels are over GF(2^{}), field is GF(2^{})",
                graph.p(),
                field.p()
            )));
        }
        Ok(BinaryImage { graph, field })
    }

    pub fn graph(&self) -> &'a TannerGraph {
        self.graph
    }

    pub fn field(&self) -> &'a Field {
        self.field
    }

    pub fn p(&self) -> u32 {
        self.field.p()
    }

    pub fn bit_count(&self) -> usize {
        self.graph.n_vars() * self.field.p() as usize
    }

    /// `Σ_n A^{k_{m,n}} x̄_n = 0` for every check; `words[n]` packs `x̄_n`.
    pub fn is_codeword(&self, words: &[u32]) -> bool {
        assert_eq!(words.len(), self.graph.n_vars());
        (0..self.graph.n_checks()).all(|m| {
            self.graph.check_edges(m).iter().fold(0u32, |acc, e| {
                acc ^ self.field.powers()[e.label as usize].apply(words[e.var as usize])
            }) == 0
        })
    }

    /// Scalar row `t` of block row `m`: `(variable, mask)` pairs where bit `s`
    /// of the mask selects bit `s` of that variable.
    pub fn row(&self, m: usize, t: u32) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.graph
            .check_edges(m)
            .iter()
            .map(move |e| (e.var as usize, self.field.powers()[e.label as usize].row(t)))
    }

    /// Edge-perspective (bit node, binary check) degree distributions of `H̄`.
    pub fn empirical_binary_degrees(&self) -> Result<(DegreeDistribution, DegreeDistribution)> {
        let p = self.field.p();
        let powers = self.field.powers();
        let col_weights: Vec<Vec<u32>> = powers
            .iter()
            .map(|m| (0..p).map(|s| m.column(s).count_ones()).collect())
            .collect();
        let row_weights: Vec<Vec<u32>> = powers
            .iter()
            .map(|m| m.rows().iter().map(|r| r.count_ones()).collect())
            .collect();

        let mut var_hist: HashMap<usize, f64> = HashMap::new();
        for n in 0..self.graph.n_vars() {
            for s in 0..p as usize {
                let deg: u32 = self
                    .graph
                    .var_edge_ids(n)
                    .iter()
                    .map(|&id| col_weights[self.graph.edges()[id as usize].label as usize][s])
                    .sum();
                if deg > 0 {
                    *var_hist.entry(deg as usize).or_insert(0.0) += f64::from(deg);
                }
            }
        }
        let mut chk_hist: HashMap<usize, f64> = HashMap::new();
        for m in 0..self.graph.n_checks() {
            for t in 0..p as usize {
                let deg: u32 = self
                    .graph
                    .check_edges(m)
                    .iter()
                    .map(|e| row_weights[e.label as usize][t])
                    .sum();
                if deg > 0 {
                    *chk_hist.entry(deg as usize).or_insert(0.0) += f64::from(deg);
                }
            }
        }
        Ok((
            DegreeDistribution::normalized(var_hist)?,
            DegreeDistribution::normalized(chk_hist)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{convert_distribution, uniform_label_profile};

    fn dist(pairs: &[(usize, f64)]) -> DegreeDistribution {
        DegreeDistribution::new(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn smallest_regular_case() {
        let g = sample_code(&dist(&[(2, 1.0)]), &dist(&[(2, 1.0)]), 2, 1).unwrap();
        assert_eq!(g.n_vars(), 2);
        // Four variable sockets need two degree-2 checks without parallel edges.
        assert_eq!(g.n_checks(), 2);
        assert!((0..2).all(|m| g.check_degree(m) == 2));
    }

    #[test]
    fn regular_2_4() {
        let g = sample_code(&dist(&[(2, 1.0)]), &dist(&[(4, 1.0)]), 1000, 3).unwrap();
        assert_eq!(g.n_checks(), 500);
        assert!((0..1000).all(|n| g.var_degree(n) == 2));
        assert!((0..500).all(|m| g.check_degree(m) == 4));
        assert_eq!(g.edges().len(), 2000);
    }

    #[test]
    fn irregular_histograms_and_sockets() {
        let lambda = dist(&[(2, 0.72), (3, 0.21), (5, 0.06), (10, 0.01)]);
        let rho = dist(&[(4, 0.43), (5, 0.57)]);
        let n = 6000;
        let g = sample_code(&lambda, &rho, n, 11).unwrap();
        let var_sockets: usize = (0..n).map(|v| g.var_degree(v)).sum();
        let chk_sockets: usize = (0..g.n_checks()).map(|m| g.check_degree(m)).sum();
        assert_eq!(var_sockets, g.edges().len());
        assert_eq!(chk_sockets, g.edges().len());
        for (d, frac) in lambda.node_fractions() {
            let count = (0..n).filter(|&v| g.var_degree(v) == d).count();
            assert!((count as f64 - frac * n as f64).abs() <= 1.0, "degree {d}");
        }
        let m = g.n_checks();
        for (d, frac) in rho.node_fractions() {
            let count = (0..m).filter(|&c| g.check_degree(c) == d).count();
            assert!((count as f64 - frac * m as f64).abs() <= 2.0, "degree {d}");
        }
        let rate = design_rate(&lambda, &rho).unwrap();
        assert!((m as f64 - n as f64 * (1.0 - rate)).abs() <= 2.0);
    }

    #[test]
    fn no_parallel_edges_and_deterministic() {
        let lambda = dist(&[(3, 1.0)]);
        let rho = dist(&[(6, 1.0)]);
        let a = sample_code(&lambda, &rho, 40, 5).unwrap();
        let b = sample_code(&lambda, &rho, 40, 5).unwrap();
        assert_eq!(a, b);
        let mut pairs: Vec<(u32, u32)> = a.edges().iter().map(|e| (e.var, e.check)).collect();
        pairs.sort_unstable();
        pairs.dedup();
        assert_eq!(pairs.len(), a.edges().len());
        let c = sample_code(&lambda, &rho, 40, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn labels_uniform() {
        let field = Field::new(3).unwrap();
        let g = sample_code(&dist(&[(4, 1.0)]), &dist(&[(8, 1.0)]), 25_000, 2).unwrap();
        let g = assign_labels(&g, &field, 9);
        assert_eq!(g.edges().len(), 100_000);
        let mut counts = [0f64; 7];
        for e in g.edges() {
            counts[e.label as usize] += 1.0;
        }
        let expected = 100_000.0 / 7.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 99.9% quantile of chi-square with 6 degrees of freedom.
        assert!(chi2 < 22.46, "chi2 = {chi2}");
        assert_eq!(assign_labels(&g, &field, 9), g);

        let gf2 = Field::new(1).unwrap();
        assert!(assign_labels(&g, &gf2, 1).edges().iter().all(|e| e.label == 0));
    }

    fn example_check(field: &Field) -> TannerGraph {
        // α^7·u + α^5·v + α^4·w = 0 over GF(8), with α^7 = α^0.
        let labels = [field.reduce(7), 5, 4];
        let edges = labels
            .iter()
            .enumerate()
            .map(|(n, &label)| Edge {
                check: 0,
                var: n as u32,
                label,
            })
            .collect();
        TannerGraph::from_edges(3, 1, 3, edges).unwrap()
    }

    #[test]
    fn example_block_row() {
        let field = Field::new(3).unwrap();
        let g = example_check(&field);
        assert_eq!(
            g.check_edges(0).iter().map(|e| e.label).collect::<Vec<_>>(),
            vec![0, 5, 4]
        );
        let big = BinaryImage::new(&g, &field).unwrap();
        for t in 0..3 {
            let row: Vec<(usize, u32)> = big.row(0, t).collect();
            assert_eq!(row[0].1, field.companion_power(0).row(t));
            assert_eq!(row[1].1, field.companion_power(5).row(t));
            assert_eq!(row[2].1, field.companion_power(4).row(t));
        }
        assert!(big.is_codeword(&[0, 0, 0]));
    }

    #[test]
    fn membership_equivalence_small_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for p in 1..=3u32 {
            let field = Field::new(p).unwrap();
            for trial in 0..20u64 {
                let n = rng.random_range(8..=64);
                let g = sample_code(&dist(&[(2, 0.5), (3, 0.5)]), &dist(&[(4, 1.0)]), n, trial)
                    .unwrap();
                let g = assign_labels(&g, &field, trial + 100);
                let big = BinaryImage::new(&g, &field).unwrap();
                for _ in 0..10 {
                    let word: Vec<u32> = (0..n).map(|_| rng.random_range(0..field.q())).collect();
                    assert_eq!(g.is_codeword(&field, &word), big.is_codeword(&word));
                }
                for _ in 0..10 {
                    let word = random_kernel_word(&big, &mut rng);
                    assert!(big.is_codeword(&word));
                    assert!(g.is_codeword(&field, &word));
                }
            }
        }
    }

    /// Uniform element of `ker(H̄)` by dense elimination: random free bits,
    /// pivots solved by back substitution.
    fn random_kernel_word(big: &BinaryImage<'_>, rng: &mut ChaCha8Rng) -> Vec<u32> {
        let p = big.p() as usize;
        let nbits = big.bit_count();
        let mut rows: Vec<Vec<bool>> = Vec::new();
        for m in 0..big.graph().n_checks() {
            for t in 0..p as u32 {
                let mut row = vec![false; nbits];
                for (n, mask) in big.row(m, t) {
                    for s in 0..p {
                        row[n * p + s] ^= (mask >> s) & 1 == 1;
                    }
                }
                rows.push(row);
            }
        }
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..nbits {
            let Some(k) = (r..rows.len()).find(|&k| rows[k][c]) else {
                continue;
            };
            rows.swap(r, k);
            for k in 0..rows.len() {
                if k != r && rows[k][c] {
                    let pr = rows[r].clone();
                    rows[k].iter_mut().zip(pr).for_each(|(x, y)| *x ^= y);
                }
            }
            pivots.push(c);
            r += 1;
        }
        let mut x: Vec<bool> = (0..nbits).map(|_| rng.random_bool(0.5)).collect();
        for (i, &c) in pivots.iter().enumerate() {
            x[c] = false;
            x[c] = rows[i]
                .iter()
                .zip(&x)
                .filter(|(&a, _)| a)
                .fold(false, |acc, (_, &b)| acc ^ b);
        }
        (0..big.graph().n_vars())
            .map(|n| (0..p).fold(0u32, |acc, s| acc | (u32::from(x[n * p + s]) << s)))
            .collect()
    }

    #[test]
    fn binary_image_of_gf2_graph_is_itself() {
        let field = Field::new(1).unwrap();
        let g = sample_code(&dist(&[(2, 1.0)]), &dist(&[(4, 1.0)]), 400, 4).unwrap();
        let big = BinaryImage::new(&g, &field).unwrap();
        let (l, r) = big.empirical_binary_degrees().unwrap();
        assert_eq!(l, dist(&[(2, 1.0)]));
        assert_eq!(r, dist(&[(4, 1.0)]));
        for m in 0..g.n_checks() {
            let row: Vec<(usize, u32)> = big.row(m, 0).collect();
            assert_eq!(row.len(), 4);
            assert!(row.iter().all(|&(_, mask)| mask == 1));
        }
    }

    #[test]
    fn empirical_degrees_track_conversion() {
        let field = Field::new(3).unwrap();
        let lambda = dist(&[(2, 0.5), (4, 0.5)]);
        let rho = dist(&[(5, 0.3), (6, 0.7)]);
        let est = convert_distribution(&lambda, &uniform_label_profile(3));
        let g = sample_code(&lambda, &rho, 20_000, 1).unwrap();
        let g = assign_labels(&g, &field, 2);
        let (emp, _) = BinaryImage::new(&g, &field)
            .unwrap()
            .empirical_binary_degrees()
            .unwrap();
        assert!(emp.linf_distance(&est) < 5e-3);
    }

    #[test]
    fn text_round_trip() {
        let field = Field::new(2).unwrap();
        let g = sample_code(&dist(&[(2, 0.6), (3, 0.4)]), &dist(&[(5, 1.0)]), 50, 77).unwrap();
        let g = assign_labels(&g, &field, 78);
        let mut buf = Vec::new();
        g.write_text(&mut buf).unwrap();
        let back = TannerGraph::read_text(buf.as_slice()).unwrap();
        assert_eq!(back, g);
        let mut again = Vec::new();
        back.write_text(&mut again).unwrap();
        assert_eq!(again, buf);
        assert!(TannerGraph::read_text("3 1 2\n".as_bytes()).is_err());
        assert!(TannerGraph::read_text("3 1 2 0\n0 0 5\n".as_bytes()).is_err());
    }

    #[test]
    fn rejects_parallel_edges() {
        let e = Edge {
            check: 0,
            var: 1,
            label: 0,
        };
        assert!(TannerGraph::from_edges(2, 1, 1, vec![e, e]).is_err());
    }
}
