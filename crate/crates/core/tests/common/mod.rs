#![allow(dead_code)]

use contagion::{LossRule, Topology, TopologyKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense re-computation of the whole model from the adjacency matrix.
pub struct Dense {
    pub n: usize,
    pub w: Vec<Vec<f64>>,
    pub loans: Vec<f64>,
    pub borrowings: Vec<f64>,
    pub external: Vec<f64>,
    pub net_worth: Vec<f64>,
}

fn pow0(base: f64, exp: f64) -> f64 {
    if exp == 0.0 {
        1.0
    } else {
        base.powf(exp)
    }
}

impl Dense {
    pub fn new(n: usize, edges: &[(usize, usize)], s: f64, t: f64, q: f64, r: f64, e: f64) -> Self {
        let mut l = vec![vec![false; n]; n];
        for &(i, j) in edges {
            l[i][j] = true;
        }
        let g: Vec<f64> = (0..n)
            .map(|i| (0..n).filter(|&j| l[i][j]).count() as f64)
            .collect();
        let c: Vec<f64> = (0..n)
            .map(|j| (0..n).filter(|&i| l[i][j]).count() as f64)
            .collect();

        let mut score = vec![vec![0.0; n]; n];
        let mut denom = 0.0;
        for i in 0..n {
            for j in 0..n {
                if l[i][j] {
                    score[i][j] = pow0(g[i], s) * pow0(c[j], t);
                    denom += score[i][j];
                }
            }
        }
        let total = q / (1.0 - q) * e;
        let w: Vec<Vec<f64>> = score
            .iter()
            .map(|row| row.iter().map(|&x| x / denom * total).collect())
            .collect();

        let loans: Vec<f64> = (0..n)
            .map(|i| (0..n).fold(0.0, |a, j| a + w[i][j]))
            .collect();
        let borrowings: Vec<f64> = (0..n)
            .map(|j| (0..n).fold(0.0, |a, i| a + w[i][j]))
            .collect();
        let excess: Vec<f64> = (0..n)
            .map(|i| (borrowings[i] - loans[i]).max(0.0))
            .collect();
        let spare = (e - excess.iter().fold(0.0, |a, &x| a + x)) / n as f64;
        let external: Vec<f64> = excess.iter().map(|x| x + spare).collect();
        let net_worth = (0..n).map(|i| r * (external[i] + loans[i])).collect();
        Self {
            n,
            w,
            loans,
            borrowings,
            external,
            net_worth,
        }
    }

    /// Defaulted flags after shocking `bank`.
    pub fn cascade(&self, bank: usize, rule: LossRule) -> Vec<bool> {
        let n = self.n;
        let mut distress = vec![0.0; n];
        let mut dead = vec![false; n];
        distress[bank] = self.external[bank];
        loop {
            let fresh: Vec<usize> = (0..n)
                .filter(|&j| !dead[j] && self.net_worth[j] <= distress[j])
                .collect();
            if fresh.is_empty() {
                return dead;
            }
            for &d in &fresh {
                dead[d] = true;
            }
            for &d in &fresh {
                let b = self.borrowings[d];
                if b <= 0.0 {
                    continue;
                }
                let residual = distress[d] - self.net_worth[d];
                let sent = match rule {
                    LossRule::PaperMax => residual.max(b),
                    LossRule::CappedMin => residual.min(b),
                };
                for j in 0..n {
                    if self.w[j][d] > 0.0 && !dead[j] {
                        distress[j] += self.w[j][d] / b * sent;
                    }
                }
            }
        }
    }
}

/// Random directed graph on `n` vertices with edge probability `p`.
pub fn random_topology<R: Rng>(n: usize, p: f64, rng: &mut R) -> Topology {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Topology::new(n, edges, TopologyKind::External).unwrap()
}

pub fn gini(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    let sum: f64 = v.iter().sum();
    let weighted: f64 = v
        .iter()
        .enumerate()
        .map(|(k, x)| (k as f64 + 1.0) * x)
        .sum();
    2.0 * weighted / (n * sum) - (n + 1.0) / n
}

/// Least-squares slope of `log P(G ≥ g)` against `log g`, over the distinct
/// degrees within two decades of the largest one.
pub fn ccdf_slope(degrees: &[usize]) -> f64 {
    let mut d: Vec<usize> = degrees.iter().copied().filter(|&g| g > 0).collect();
    d.sort_unstable();
    let n = d.len() as f64;
    let top = *d.last().unwrap() as f64;
    let mut pts = Vec::new();
    let mut k = 0;
    while k < d.len() {
        let g = d[k];
        if g as f64 >= top / 100.0 {
            pts.push(((g as f64).ln(), ((d.len() - k) as f64 / n).ln()));
        }
        while k < d.len() && d[k] == g {
            k += 1;
        }
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
