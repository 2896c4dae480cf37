//! Interbank loan weights and per-bank balance sheets.
//!
//! Assets of bank `i` are its external asset `E_i` plus its interbank loans
//! `I_i`; liabilities are net worth `C_i`, interbank borrowing `B_i` and
//! customer deposits `D_i`. Given a topology, the loan fraction `Q`, the
//! equity capital ratio `R`, the heterogeneity powers `s, t` and the total
//! external asset `E`, every one of these is determined.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::netgen::{degree_stats, Topology};
use crate::scalar::{rel_diff, Scalar};

/// Loan amounts on the edges of a topology.
///
/// `w_ij` is the amount bank `j` borrows from bank `i`.
#[derive(Debug, Clone)]
pub struct WeightMatrix<T> {
    n: usize,
    /// Sorted creditor/debtor pairs, aligned with `weights`.
    edges: Vec<(usize, usize)>,
    weights: Vec<T>,
    /// `I_i = Σ_j w_ij`
    pub loans: Vec<T>,
    /// `B_i = Σ_j w_ji`
    pub borrowings: Vec<T>,
    pub out_degree: Vec<usize>,
    pub in_degree: Vec<usize>,
    /// Creditors of each debtor in CSR form: `(creditor, w_creditor,debtor)`.
    creditor_offsets: Vec<usize>,
    creditor_entries: Vec<(usize, T)>,
    total: T,
}

impl<T: Scalar> WeightMatrix<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Sum of all loan amounts, `Q/(1-Q)·E` by construction.
    pub fn total(&self) -> T {
        self.total
    }

    /// `w_ij`, zero where there is no loan.
    pub fn weight(&self, creditor: usize, debtor: usize) -> T {
        match self.edges.binary_search(&(creditor, debtor)) {
            Ok(k) => self.weights[k],
            Err(_) => T::zero(),
        }
    }

    /// Iterates `((creditor, debtor), w)` in lexicographic edge order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), T)> + '_ {
        self.edges.iter().copied().zip(self.weights.iter().copied())
    }

    /// Banks that lent to `debtor`, with the amounts lent.
    pub fn creditors_of(&self, debtor: usize) -> &[(usize, T)] {
        &self.creditor_entries[self.creditor_offsets[debtor]..self.creditor_offsets[debtor + 1]]
    }
}

/// Computes `w_ij ∝ l_ij · g_i^s · c_j^t`, normalized over all ordered pairs so
/// that the loans add up to `Q/(1-Q)·E`.
///
/// `0^0` is taken as 1, so `s = t = 0` spreads the loans evenly over edges.
pub fn compute_weights<T: Scalar>(
    topology: &Topology,
    s: T,
    t: T,
    q: T,
    e_total: T,
) -> Result<WeightMatrix<T>> {
    check_loan_fraction(q)?;
    if !(e_total > T::zero() && e_total.is_finite()) {
        return Err(Error::invalid("E", format!("{e_total} must be positive")));
    }
    if !(s >= T::zero() && s.is_finite()) {
        return Err(Error::invalid("s", format!("{s} must be non-negative")));
    }
    if !(t >= T::zero() && t.is_finite()) {
        return Err(Error::invalid("t", format!("{t} must be non-negative")));
    }
    if topology.edge_count() == 0 {
        return Err(Error::NoInterbankMarket);
    }

    let n = topology.n();
    let degrees = degree_stats(topology);
    let edges = topology.edges().to_vec();
    let scores: Vec<T> = edges
        .iter()
        .map(|&(i, j)| {
            T::pow_or_one(T::of_usize(degrees.out_degree[i]), s)
                * T::pow_or_one(T::of_usize(degrees.in_degree[j]), t)
        })
        .collect();
    let norm = scores.iter().fold(T::zero(), |acc, &x| acc + x);
    let total = q / (T::one() - q) * e_total;
    let weights: Vec<T> = scores.iter().map(|&x| x / norm * total).collect();

    let mut loans = vec![T::zero(); n];
    let mut borrowings = vec![T::zero(); n];
    for (&(i, j), &w) in edges.iter().zip(&weights) {
        loans[i] = loans[i] + w;
        borrowings[j] = borrowings[j] + w;
    }

    let mut creditor_offsets = vec![0usize; n + 1];
    for &(_, j) in &edges {
        creditor_offsets[j + 1] += 1;
    }
    for k in 0..n {
        creditor_offsets[k + 1] += creditor_offsets[k];
    }
    let mut fill = creditor_offsets.clone();
    let mut creditor_entries = vec![(0usize, T::zero()); edges.len()];
    // edges are sorted by creditor, so each debtor's list comes out sorted too
    for (&(i, j), &w) in edges.iter().zip(&weights) {
        creditor_entries[fill[j]] = (i, w);
        fill[j] += 1;
    }

    Ok(WeightMatrix {
        n,
        edges,
        weights,
        loans,
        borrowings,
        out_degree: degrees.out_degree,
        in_degree: degrees.in_degree,
        creditor_offsets,
        creditor_entries,
        total,
    })
}

fn check_loan_fraction<T: Scalar>(q: T) -> Result<()> {
    if q > T::zero() && q < T::of(0.5) {
        Ok(())
    } else {
        Err(Error::invalid("Q", format!("{q} outside (0, 0.5)")))
    }
}

/// Global constants a balance-sheet set was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants<T> {
    /// Interbank loans as a fraction of total assets.
    pub q: T,
    /// Equity capital ratio.
    pub r: T,
    /// Total external assets.
    pub e_total: T,
    /// Additional capital ratio imposed on the biggest banks (zero if none).
    pub surcharge_ratio: T,
    pub s: T,
    pub t: T,
}

/// Balance sheets of all banks, one entry per bank in every vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceSheetSet<T> {
    pub external: Vec<T>,
    pub loans: Vec<T>,
    pub borrowings: Vec<T>,
    pub net_worth: Vec<T>,
    pub deposits: Vec<T>,
    pub assets: Vec<T>,
    pub liabilities: Vec<T>,
    /// Capital added by the surcharge, `C'_i`.
    pub surcharge: Vec<T>,
    /// `g_i + c_i`, used to rank banks of equal size.
    pub total_degree: Vec<usize>,
    pub constants: Constants<T>,
}

impl<T: Scalar> BalanceSheetSet<T> {
    pub fn n(&self) -> usize {
        self.external.len()
    }

    /// Writes the balance dump: `bank,E,I,B,C,D,A,surcharge`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bank,E,I,B,C,D,A,surcharge")?;
        for i in 0..self.n() {
            writeln!(
                out,
                "{i},{},{},{},{},{},{},{}",
                self.external[i],
                self.loans[i],
                self.borrowings[i],
                self.net_worth[i],
                self.deposits[i],
                self.assets[i],
                self.surcharge[i],
            )?;
        }
        out.flush()
    }
}

/// Builds balance sheets from loan weights.
///
/// External assets follow
/// `E_i = max(B_i - I_i, 0) + (E - Σ_k max(B_k - I_k, 0)) / N`,
/// which keeps every bank's external asset above its net interbank borrowing.
/// Then `A_i = L_i = E_i + I_i`, `C_i = R·L_i` and `D_i = L_i - C_i - B_i`.
/// Negative deposits are allowed; [`validate`] reports them.
pub fn build_balance_sheets<T: Scalar>(
    wm: &WeightMatrix<T>,
    q: T,
    r: T,
    e_total: T,
) -> Result<BalanceSheetSet<T>> {
    check_loan_fraction(q)?;
    if !(r > T::zero() && r < T::one()) {
        return Err(Error::invalid("R", format!("{r} outside (0, 1)")));
    }
    let expected = q / (T::one() - q) * e_total;
    if rel_diff(wm.total(), expected) > tolerance::<T>() {
        return Err(Error::invalid(
            "Q",
            format!(
                "weights total {} but Q = {q}, E = {e_total} imply {expected}",
                wm.total()
            ),
        ));
    }

    let n = wm.n();
    let excess: Vec<T> = (0..n)
        .map(|i| (wm.borrowings[i] - wm.loans[i]).max(T::zero()))
        .collect();
    let excess_sum = excess.iter().fold(T::zero(), |a, &x| a + x);
    if e_total <= excess_sum {
        return Err(Error::InfeasibleBalance {
            total: e_total.as_f64(),
            net_borrowing: excess_sum.as_f64(),
        });
    }
    let even_share = (e_total - excess_sum) / T::of_usize(n);

    let external: Vec<T> = excess.iter().map(|&x| x + even_share).collect();
    let assets: Vec<T> = external
        .iter()
        .zip(&wm.loans)
        .map(|(&e, &i)| e + i)
        .collect();
    let net_worth: Vec<T> = assets.iter().map(|&a| r * a).collect();
    let deposits: Vec<T> = (0..n)
        .map(|i| assets[i] - net_worth[i] - wm.borrowings[i])
        .collect();
    let total_degree = wm
        .out_degree
        .iter()
        .zip(&wm.in_degree)
        .map(|(g, c)| g + c)
        .collect();

    Ok(BalanceSheetSet {
        external,
        loans: wm.loans.clone(),
        borrowings: wm.borrowings.clone(),
        net_worth,
        deposits,
        liabilities: assets.clone(),
        assets,
        surcharge: vec![T::zero(); n],
        total_degree,
        constants: Constants {
            q,
            r,
            e_total,
            surcharge_ratio: T::zero(),
            s: T::zero(),
            t: T::zero(),
        },
    })
}

/// Convenience: weights and balance sheets in one go, recording `s` and `t`
/// in the constants.
pub fn build_from_topology<T: Scalar>(
    topology: &Topology,
    s: T,
    t: T,
    q: T,
    r: T,
    e_total: T,
) -> Result<(WeightMatrix<T>, BalanceSheetSet<T>)> {
    let wm = compute_weights(topology, s, t, q, e_total)?;
    let mut bs = build_balance_sheets(&wm, q, r, e_total)?;
    bs.constants.s = s;
    bs.constants.t = t;
    Ok((wm, bs))
}

/// Indices of the `count` biggest banks: largest total asset first, ties
/// broken by larger total degree, then lower index.
pub fn biggest_banks<T: Scalar>(bs: &BalanceSheetSet<T>, count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..bs.n()).collect();
    order.sort_by(|&a, &b| {
        bs.assets[b]
            .partial_cmp(&bs.assets[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(bs.total_degree[b].cmp(&bs.total_degree[a]))
            .then(a.cmp(&b))
    });
    order.truncate(count);
    order
}

/// Imposes the additional capital ratio `R_s` on the `⌊fraction·N⌋` biggest
/// banks.
///
/// Each selected bank raises `C'_i = R_s / (1 - R - R_s) · A_i` of new capital,
/// held as external asset, so its net worth, external asset, asset and
/// liability all grow by `C'_i`. Deposits and interbank positions are fixed.
/// Only pristine (not yet surcharged) sheets are accepted.
pub fn apply_surcharge<T: Scalar>(
    bs: &BalanceSheetSet<T>,
    surcharge_ratio: T,
    biggest_fraction: T,
) -> Result<BalanceSheetSet<T>> {
    let r = bs.constants.r;
    if !(surcharge_ratio >= T::zero()) {
        return Err(Error::invalid(
            "R_s",
            format!("{surcharge_ratio} must be non-negative"),
        ));
    }
    if r + surcharge_ratio >= T::one() {
        return Err(Error::invalid(
            "R_s",
            format!("R + R_s = {} must stay below 1", r + surcharge_ratio),
        ));
    }
    if !(biggest_fraction >= T::zero() && biggest_fraction <= T::one()) {
        return Err(Error::invalid(
            "biggest_fraction",
            format!("{biggest_fraction} outside [0, 1]"),
        ));
    }
    if bs.surcharge.iter().any(|&c| c != T::zero()) {
        return Err(Error::invalid(
            "R_s",
            "balance sheets already carry a surcharge",
        ));
    }

    let mut out = bs.clone();
    out.constants.surcharge_ratio = surcharge_ratio;
    if surcharge_ratio == T::zero() {
        return Ok(out);
    }
    // the epsilon keeps e.g. 0.29 * 100 from flooring to 28
    let count = (biggest_fraction.as_f64() * bs.n() as f64 + 1e-9).floor() as usize;
    let factor = surcharge_ratio / (T::one() - r - surcharge_ratio);
    for i in biggest_banks(bs, count.min(bs.n())) {
        let extra = factor * bs.assets[i];
        out.surcharge[i] = extra;
        out.net_worth[i] = out.net_worth[i] + extra;
        out.external[i] = out.external[i] + extra;
        out.assets[i] = out.assets[i] + extra;
        out.liabilities[i] = out.liabilities[i] + extra;
    }
    Ok(out)
}

/// Relative tolerance used by [`validate`]: `1e-9`, or a few hundred ulps for
/// scalars too coarse for that.
pub fn tolerance<T: Scalar>() -> T {
    T::of(1e-9).max(T::epsilon() * T::of(256.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// `A_i = E_i + I_i`
    AssetComposition,
    /// `L_i = A_i`
    LiabilityEqualsAsset,
    /// `L_i = C_i + B_i + D_i`
    LiabilityComposition,
    /// `C_i / L_i = R` (banks without surcharge)
    CapitalRatio,
    /// `E_i > B_i - I_i`
    ExternalCoversNetBorrowing,
    /// `Σ E_i = E` (net of surcharge capital)
    ExternalTotal,
    /// `Σ I_i = Σ B_i = Q/(1-Q)·E`
    LoanTotal,
    /// `I / A = Q` (net of surcharge capital)
    LoanFraction,
    NonFinite,
    /// `D_i < 0`; a warning, the cascade does not use deposits.
    NegativeDeposit,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            Check::AssetComposition => "A = E + I",
            Check::LiabilityEqualsAsset => "L = A",
            Check::LiabilityComposition => "L = C + B + D",
            Check::CapitalRatio => "C / L = R",
            Check::ExternalCoversNetBorrowing => "E > B - I",
            Check::ExternalTotal => "sum E = E_total",
            Check::LoanTotal => "sum I = sum B = Q/(1-Q) E",
            Check::LoanFraction => "I / A = Q",
            Check::NonFinite => "finite values",
            Check::NegativeDeposit => "D >= 0",
        };
        f.write_str(text)
    }
}

/// One failed check. `bank` is `None` for aggregate identities; `magnitude`
/// is the relative deviation (or the offending amount for sign checks).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: Check,
    pub bank: Option<usize>,
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bank {
            Some(b) => write!(f, "bank {b}: {} off by {:e}", self.check, self.magnitude),
            None => write!(f, "total: {} off by {:e}", self.check, self.magnitude),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty() && self.warnings.is_empty()
    }

    /// No identity is violated; warnings are allowed.
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, check: Check, bank: Option<usize>) -> bool {
        self.violations
            .iter()
            .chain(&self.warnings)
            .any(|v| v.check == check && v.bank == bank)
    }
}

/// Checks every balance-sheet identity within [`tolerance`].
pub fn validate<T: Scalar>(bs: &BalanceSheetSet<T>) -> ValidationReport {
    let tol = tolerance::<T>();
    let mut report = ValidationReport::default();
    let mut fail = |check, bank, magnitude: T| {
        report.violations.push(Violation {
            check,
            bank,
            magnitude: magnitude.as_f64(),
        })
    };
    let c = bs.constants;
    let zero = T::zero();

    for i in 0..bs.n() {
        let values = [
            bs.external[i],
            bs.loans[i],
            bs.borrowings[i],
            bs.net_worth[i],
            bs.deposits[i],
            bs.assets[i],
            bs.liabilities[i],
            bs.surcharge[i],
        ];
        if values.iter().any(|v| !v.is_finite()) {
            fail(Check::NonFinite, Some(i), T::nan());
            continue;
        }
        let d = rel_diff(bs.assets[i], bs.external[i] + bs.loans[i]);
        if d > tol {
            fail(Check::AssetComposition, Some(i), d);
        }
        let d = rel_diff(bs.liabilities[i], bs.assets[i]);
        if d > tol {
            fail(Check::LiabilityEqualsAsset, Some(i), d);
        }
        let d = rel_diff(
            bs.liabilities[i],
            bs.net_worth[i] + bs.borrowings[i] + bs.deposits[i],
        );
        if d > tol {
            fail(Check::LiabilityComposition, Some(i), d);
        }
        if bs.surcharge[i] == zero {
            let d = rel_diff(bs.net_worth[i] / bs.liabilities[i], c.r);
            if d > tol {
                fail(Check::CapitalRatio, Some(i), d);
            }
        }
        let margin = bs.external[i] - (bs.borrowings[i] - bs.loans[i]);
        if !(margin > zero) {
            fail(Check::ExternalCoversNetBorrowing, Some(i), margin);
        }
    }

    let sum = |v: &[T]| v.iter().fold(zero, |a, &x| a + x);
    let surcharge_total = sum(&bs.surcharge);
    let d = rel_diff(sum(&bs.external) - surcharge_total, c.e_total);
    if d > tol {
        fail(Check::ExternalTotal, None, d);
    }
    let loans = sum(&bs.loans);
    let expected = c.q / (T::one() - c.q) * c.e_total;
    let d = rel_diff(loans, expected).max(rel_diff(sum(&bs.borrowings), expected));
    if d > tol {
        fail(Check::LoanTotal, None, d);
    }
    let d = rel_diff(loans / (sum(&bs.assets) - surcharge_total), c.q);
    if d > tol {
        fail(Check::LoanFraction, None, d);
    }

    for (i, &dep) in bs.deposits.iter().enumerate() {
        if dep < zero {
            report.warnings.push(Violation {
                check: Check::NegativeDeposit,
                bank: Some(i),
                magnitude: dep.as_f64(),
            });
        }
    }
    report
}
