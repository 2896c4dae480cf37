//! Random credit-network topologies and degree statistics.
//!
//! An edge `(i, j)` means bank `j` borrows from bank `i`: edges point from
//! creditor to debtor. The out-degree `g_i` counts debtors, the in-degree
//! `c_i` counts creditors.

use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    /// Erdős–Rényi: every ordered pair independently with probability `p`.
    Homogeneous,
    /// Growth with preferential attachment, bidirectionalized.
    Heterogeneous,
    /// Loaded from an edge-list file.
    External,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopologyKind::Homogeneous => "homogeneous",
            TopologyKind::Heterogeneous => "heterogeneous",
            TopologyKind::External => "external",
        })
    }
}

/// Directed credit network: a simple digraph on `n` banks.
///
/// Edges are kept sorted lexicographically and unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
    kind: TopologyKind,
}

impl Topology {
    /// Builds a topology from arbitrary edges, rejecting self-loops,
    /// out-of-range endpoints and duplicates.
    pub fn new(n: usize, mut edges: Vec<(usize, usize)>, kind: TopologyKind) -> Result<Self> {
        for &(i, j) in &edges {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { index: i.max(j), n });
            }
            if i == j {
                return Err(Error::invalid("edges", format!("self-loop at bank {i}")));
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(
                "edges",
                format!("duplicate edge ({}, {})", w[0].0, w[0].1),
            ));
        }
        Ok(Self { n, edges, kind })
    }

    /// Caller guarantees sorted, unique, loop-free, in-range edges.
    fn from_sorted(n: usize, edges: Vec<(usize, usize)>, kind: TopologyKind) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(edges.iter().all(|&(i, j)| i != j && i < n && j < n));
        Self { n, edges, kind }
    }

    pub fn complete(n: usize, kind: TopologyKind) -> Self {
        let edges = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        Self::from_sorted(n, edges, kind)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn has_edge(&self, creditor: usize, debtor: usize) -> bool {
        self.edges.binary_search(&(creditor, debtor)).is_ok()
    }

    /// Writes the edge-list format: `N <n>` then one `creditor debtor` pair per line.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "N {}", self.n)?;
        for &(i, j) in &self.edges {
            writeln!(out, "{i} {j}")?;
        }
        out.flush()
    }

    /// Parses the edge-list format. Blank lines and lines starting with `#`
    /// are ignored. The result is tagged [`TopologyKind::External`].
    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| Error::EdgeList {
                line: line_no,
                reason,
            };
            let mut parts = line.split_whitespace();
            match n {
                None => {
                    if parts.next() != Some("N") {
                        return Err(bad("expected header `N <n>`".into()));
                    }
                    let value = parts
                        .next()
                        .ok_or_else(|| bad("missing bank count".into()))?;
                    let count: usize = value
                        .parse()
                        .map_err(|_| bad(format!("bad bank count `{value}`")))?;
                    if parts.next().is_some() {
                        return Err(bad("trailing tokens after header".into()));
                    }
                    n = Some(count);
                }
                Some(count) => {
                    let mut endpoint = || -> Result<usize> {
                        let tok = parts
                            .next()
                            .ok_or_else(|| bad("expected `creditor debtor`".into()))?;
                        let v: usize = tok
                            .parse()
                            .map_err(|_| bad(format!("bad bank index `{tok}`")))?;
                        if v >= count {
                            return Err(bad(format!("bank {v} out of range for N = {count}")));
                        }
                        Ok(v)
                    };
                    let i = endpoint()?;
                    let j = endpoint()?;
                    if parts.next().is_some() {
                        return Err(bad("trailing tokens after edge".into()));
                    }
                    if i == j {
                        return Err(bad(format!("self-loop at bank {i}")));
                    }
                    edges.push(((i, j), line_no));
                }
            }
        }
        let n = n.ok_or(Error::EdgeList {
            line: 0,
            reason: "empty input, expected header `N <n>`".into(),
        })?;
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::EdgeList {
                line: w[1].1,
                reason: format!("duplicate edge ({}, {})", w[1].0 .0, w[1].0 .1),
            });
        }
        let edges = edges.into_iter().map(|(e, _)| e).collect();
        Ok(Self::from_sorted(n, edges, TopologyKind::External))
    }
}

/// Nodal degrees and density of a topology.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    /// `g_i`: number of debtor banks of bank `i`.
    pub out_degree: Vec<usize>,
    /// `c_i`: number of creditor banks of bank `i`.
    pub in_degree: Vec<usize>,
    /// Fraction of the `N(N-1)` ordered pairs that carry a loan.
    pub density: f64,
}

impl DegreeStats {
    /// Mean out-degree, which always equals the mean in-degree.
    pub fn mean_degree(&self) -> f64 {
        let n = self.out_degree.len();
        if n == 0 {
            return 0.0;
        }
        self.out_degree.iter().sum::<usize>() as f64 / n as f64
    }

    pub fn max_out_degree(&self) -> usize {
        self.out_degree.iter().copied().max().unwrap_or(0)
    }

    pub fn max_in_degree(&self) -> usize {
        self.in_degree.iter().copied().max().unwrap_or(0)
    }

    /// Lower median of the out-degrees.
    pub fn median_out_degree(&self) -> usize {
        let mut g = self.out_degree.clone();
        g.sort_unstable();
        g.get((g.len().max(1) - 1) / 2).copied().unwrap_or(0)
    }
}

pub fn degree_stats(t: &Topology) -> DegreeStats {
    let mut out_degree = vec![0; t.n];
    let mut in_degree = vec![0; t.n];
    for &(i, j) in &t.edges {
        out_degree[i] += 1;
        in_degree[j] += 1;
    }
    let mut stats = DegreeStats {
        out_degree,
        in_degree,
        density: 0.0,
    };
    // mean degree / (N - 1), computed the same way the identity is checked
    if t.n >= 2 {
        stats.density = stats.mean_degree() / (t.n - 1) as f64;
    }
    stats
}

/// Directed Erdős–Rényi graph: each of the `n(n-1)` ordered pairs is present
/// independently with probability `p`.
///
/// Uses geometric skipping over the pair index, so the cost is proportional to
/// the number of edges rather than `n^2`.
pub fn gen_erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Topology> {
    if n < 2 {
        return Err(Error::invalid(
            "n",
            format!("need at least 2 banks, got {n}"),
        ));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", format!("{p} is not a probability")));
    }
    if p == 1.0 {
        return Ok(Topology::complete(n, TopologyKind::Homogeneous));
    }
    let mut edges = Vec::new();
    if p > 0.0 {
        let pairs = n * (n - 1);
        let log_q = (-p).ln_1p();
        let mut k: usize = 0;
        loop {
            // u in (0, 1]
            let u: f64 = 1.0 - rng.random::<f64>();
            let skip = (u.ln() / log_q).floor();
            if skip >= (pairs - k) as f64 {
                break;
            }
            k += skip as usize;
            let i = k / (n - 1);
            let r = k % (n - 1);
            let j = if r >= i { r + 1 } else { r };
            edges.push((i, j));
            k += 1;
            if k >= pairs {
                break;
            }
        }
    }
    Ok(Topology::from_sorted(n, edges, TopologyKind::Homogeneous))
}

/// Attachment kernel for the heterogeneous generator.
///
/// An existing bank is chosen as a new bank's counterparty with probability
/// proportional to its kernel weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttachmentKernel {
    /// Weight = current degree (classic linear growth model, degree exponent 3).
    Degree,
    /// Weight = links received so far + `attractiveness * m̄`, where `m̄` is
    /// the mean number of links each arriving bank makes. The degree exponent
    /// is `2 + attractiveness`.
    Received { attractiveness: f64 },
}

impl Default for AttachmentKernel {
    /// Degree exponent 2.2, close to the `P(g) ~ g^-2` tail of real interbank
    /// payment networks.
    fn default() -> Self {
        AttachmentKernel::Received {
            attractiveness: 0.2,
        }
    }
}

/// Heterogeneous (scale-free) credit network with target density `p`, using
/// the default [`AttachmentKernel`].
pub fn gen_preferential_attachment<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    rng: &mut R,
) -> Result<Topology> {
    gen_preferential_attachment_with(n, p, AttachmentKernel::default(), rng)
}

/// Grows an undirected graph by preferential attachment, then turns every
/// undirected link into the two directed edges `(i, j)` and `(j, i)`.
///
/// Each arriving bank makes `m ∈ {⌊m̄⌋, ⌈m̄⌉}` links with `E[m] = m̄ = p(n-1)/2`,
/// so the directed density matches `p` in expectation. Growth starts from a
/// clique on `max(2, ⌈m̄⌉ + 1)` banks. Repeated targets are redrawn.
pub fn gen_preferential_attachment_with<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    kernel: AttachmentKernel,
    rng: &mut R,
) -> Result<Topology> {
    if n < 3 {
        return Err(Error::invalid(
            "n",
            format!("need at least 3 banks, got {n}"),
        ));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid("p", format!("density {p} outside (0, 1]")));
    }
    let m_bar = p * (n - 1) as f64 / 2.0;
    if m_bar < 0.5 {
        return Err(Error::invalid(
            "p",
            format!("density {p} infeasible for {n} banks: mean attachment {m_bar:.4} below 0.5"),
        ));
    }
    if let AttachmentKernel::Received { attractiveness } = kernel {
        if !(attractiveness > 0.0 && attractiveness.is_finite()) {
            return Err(Error::invalid(
                "attractiveness",
                format!("{attractiveness} must be positive"),
            ));
        }
    }
    if p == 1.0 {
        return Ok(Topology::complete(n, TopologyKind::Heterogeneous));
    }

    let m_lo = m_bar.floor() as usize;
    let p_hi = m_bar - m_lo as f64;
    let seed_size = (m_bar.ceil() as usize + 1).max(2).min(n);

    let mut links: Vec<(usize, usize)> = Vec::new();
    // One entry per unit of kernel weight carried by link endpoints.
    let mut urn: Vec<usize> = Vec::new();
    let mut degree = vec![0usize; n];
    for i in 0..seed_size {
        for j in (i + 1)..seed_size {
            links.push((i, j));
            urn.push(i);
            urn.push(j);
            degree[i] += 1;
            degree[j] += 1;
        }
    }

    let mut chosen: Vec<usize> = Vec::new();
    for v in seed_size..n {
        let m = if p_hi > 0.0 && rng.random_bool(p_hi) {
            m_lo + 1
        } else {
            m_lo
        };
        chosen.clear();
        if m >= v {
            chosen.extend(0..v);
        } else {
            while chosen.len() < m {
                let target = match kernel {
                    AttachmentKernel::Degree => {
                        if urn.is_empty() {
                            rng.random_range(0..v)
                        } else {
                            urn[rng.random_range(0..urn.len())]
                        }
                    }
                    AttachmentKernel::Received { attractiveness } => {
                        let base = attractiveness * m_bar * v as f64;
                        let total = urn.len() as f64 + base;
                        if rng.random::<f64>() * total < urn.len() as f64 {
                            urn[rng.random_range(0..urn.len())]
                        } else {
                            rng.random_range(0..v)
                        }
                    }
                };
                if !chosen.contains(&target) {
                    chosen.push(target);
                }
            }
        }
        for &u in &chosen {
            links.push((u, v));
            degree[u] += 1;
            degree[v] += 1;
            urn.push(u);
            if kernel == AttachmentKernel::Degree {
                urn.push(v);
            }
        }
    }

    let mut edges: Vec<(usize, usize)> =
        links.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
    edges.sort_unstable();
    Ok(Topology::from_sorted(n, edges, TopologyKind::Heterogeneous))
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::rng::RngStream;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        RngStream::new(seed, 0).rng()
    }

    #[test]
    fn erdos_renyi_zero_probability_is_empty() {
        let t = gen_erdos_renyi(5, 0.0, &mut rng(1)).unwrap();
        assert_eq!(t.edge_count(), 0);
        assert_eq!(t.kind(), TopologyKind::Homogeneous);
    }

    #[test]
    fn erdos_renyi_certain_edge_is_complete() {
        let t = gen_erdos_renyi(4, 1.0, &mut rng(1)).unwrap();
        assert_eq!(t.edge_count(), 12);
        assert!(t.edges().iter().all(|&(i, j)| i != j));
    }

    #[test]
    fn erdos_renyi_rejects_bad_parameters() {
        assert!(matches!(
            gen_erdos_renyi(1, 0.5, &mut rng(1)),
            Err(Error::InvalidParameter { name: "n", .. })
        ));
        assert!(gen_erdos_renyi(10, -0.1, &mut rng(1)).is_err());
        assert!(gen_erdos_renyi(10, 1.5, &mut rng(1)).is_err());
        assert!(gen_erdos_renyi(10, f64::NAN, &mut rng(1)).is_err());
    }

    #[test]
    fn erdos_renyi_edges_are_sorted_unique_loop_free() {
        let t = gen_erdos_renyi(60, 0.3, &mut rng(9)).unwrap();
        assert!(t.edges().windows(2).all(|w| w[0] < w[1]));
        assert!(t.edges().iter().all(|&(i, j)| i != j && i < 60 && j < 60));
    }

    #[test]
    fn preferential_attachment_saturated_is_complete() {
        let t = gen_preferential_attachment(3, 1.0, &mut rng(1)).unwrap();
        assert_eq!(t.edge_count(), 6);
        assert_eq!(t.kind(), TopologyKind::Heterogeneous);
    }

    #[test]
    fn preferential_attachment_rejects_infeasible_density() {
        // m̄ = 0.001 * 99 / 2 < 0.5
        assert!(matches!(
            gen_preferential_attachment(100, 0.001, &mut rng(1)),
            Err(Error::InvalidParameter { name: "p", .. })
        ));
        assert!(gen_preferential_attachment(100, 0.0, &mut rng(1)).is_err());
        assert!(gen_preferential_attachment(2, 1.0, &mut rng(1)).is_err());
    }

    #[test]
    fn preferential_attachment_is_reciprocal() {
        for kernel in [AttachmentKernel::Degree, AttachmentKernel::default()] {
            let t = gen_preferential_attachment_with(300, 0.02, kernel, &mut rng(4)).unwrap();
            for &(i, j) in t.edges() {
                assert!(t.has_edge(j, i));
            }
            let d = degree_stats(&t);
            assert_eq!(d.out_degree, d.in_degree);
        }
    }

    #[test]
    fn degree_stats_complete_graph() {
        let d = degree_stats(&Topology::complete(4, TopologyKind::External));
        assert_eq!(d.out_degree, vec![3; 4]);
        assert_eq!(d.in_degree, vec![3; 4]);
        assert_eq!(d.density, 1.0);
    }

    #[test]
    fn degree_stats_empty_graph() {
        let t = Topology::new(4, vec![], TopologyKind::External).unwrap();
        let d = degree_stats(&t);
        assert_eq!(d.out_degree, vec![0; 4]);
        assert_eq!(d.in_degree, vec![0; 4]);
        assert_eq!(d.density, 0.0);
    }

    #[test]
    fn degree_stats_single_edge() {
        let t = Topology::new(3, vec![(0, 1)], TopologyKind::External).unwrap();
        let d = degree_stats(&t);
        assert_eq!(d.out_degree, vec![1, 0, 0]);
        assert_eq!(d.in_degree, vec![0, 1, 0]);
        assert!((d.density - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn topology_new_rejects_loops_and_duplicates() {
        assert!(Topology::new(3, vec![(1, 1)], TopologyKind::External).is_err());
        assert!(Topology::new(3, vec![(0, 1), (0, 1)], TopologyKind::External).is_err());
        assert!(Topology::new(3, vec![(0, 3)], TopologyKind::External).is_err());
        let t = Topology::new(3, vec![(1, 0), (0, 1)], TopologyKind::External).unwrap();
        assert_eq!(t.edges(), &[(0, 1), (1, 0)]);
    }

    #[test]
    fn edge_list_round_trip() {
        let t = gen_erdos_renyi(30, 0.1, &mut rng(3)).unwrap();
        let mut buf = Vec::new();
        t.write_edge_list(&mut buf).unwrap();
        let back = Topology::read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(back.n(), t.n());
        assert_eq!(back.edges(), t.edges());
        assert_eq!(back.kind(), TopologyKind::External);
    }

    #[test]
    fn edge_list_errors_carry_line_numbers() {
        let err = Topology::read_edge_list("N 3\n0 1\n2 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EdgeList { line: 3, .. }), "{err}");
        let err = Topology::read_edge_list("N 3\n0 1\n\n0 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EdgeList { line: 4, .. }), "{err}");
        let err = Topology::read_edge_list("0 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EdgeList { line: 1, .. }), "{err}");
        let err = Topology::read_edge_list("N 3\n0 1\n0 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EdgeList { line: 3, .. }), "{err}");
        let err = Topology::read_edge_list("N 3\n0 5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EdgeList { line: 2, .. }), "{err}");
        assert!(Topology::read_edge_list("".as_bytes()).is_err());
    }
}
