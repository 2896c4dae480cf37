//! Knock-on default process.
//!
//! One bank is struck by distress equal to its whole external asset. A bank
//! whose net worth cannot absorb the distress accumulated on it (`C ≤ S`)
//! defaults and passes distress on to its creditors in proportion to what
//! each of them lent it. Rounds are synchronous: every bank that crosses the
//! threshold in a round defaults together, then all of them transmit.
//! Distress aimed at a bank that has already defaulted is discarded.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::balance::{BalanceSheetSet, WeightMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How much distress a defaulted bank passes on, given its residual
/// distress `S - C` and its interbank borrowing `B`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossRule {
    /// `max(S - C, B)`: creditors lose at least everything they lent.
    #[default]
    PaperMax,
    /// `min(S - C, B)`: creditors lose at most what they lent.
    CappedMin,
}

impl LossRule {
    pub fn transmitted<T: Scalar>(self, residual: T, borrowing: T) -> T {
        match self {
            LossRule::PaperMax => residual.max(borrowing),
            LossRule::CappedMin => residual.min(borrowing),
        }
    }
}

impl fmt::Display for LossRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossRule::PaperMax => "paper_max",
            LossRule::CappedMin => "capped_min",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockState<T> {
    /// Distress accumulated on each bank, `S_j`.
    pub distress: Vec<T>,
    pub defaulted: Vec<bool>,
    /// Rounds in which at least one bank defaulted.
    pub round: u32,
    pub initial_bank: usize,
}

/// One default, in the order it happened. Doubles as a trace record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefaultEvent<T> {
    pub round: u32,
    pub bank: usize,
    /// Distress on the bank when it defaulted.
    pub distress: T,
    /// Total it passed on to its creditors under the loss rule (zero when it
    /// had no interbank borrowing).
    pub transmitted: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeResult<T> {
    /// `N_d`, including the initially shocked bank. Zero if it survived.
    pub n_defaults: usize,
    pub defaults: Vec<DefaultEvent<T>>,
    pub initial_bank: usize,
    pub rounds: u32,
    /// Distress actually delivered to surviving creditors.
    pub total_loss_transmitted: T,
    pub final_state: ShockState<T>,
}

/// Strikes `bank` with distress equal to its external asset (surcharge
/// capital included).
pub fn initial_shock<T: Scalar>(bs: &BalanceSheetSet<T>, bank: usize) -> Result<ShockState<T>> {
    let n = bs.n();
    if bank >= n {
        return Err(Error::IndexOutOfRange { index: bank, n });
    }
    let mut distress = vec![T::zero(); n];
    distress[bank] = bs.external[bank];
    Ok(ShockState {
        distress,
        defaulted: vec![false; n],
        round: 0,
        initial_bank: bank,
    })
}

/// Splits `residual` over the creditors of `debtor` pro rata to
/// `w_creditor,debtor / B_debtor`. Empty when the debtor borrowed nothing.
pub fn transmit_shares<T: Scalar>(
    wm: &WeightMatrix<T>,
    debtor: usize,
    residual: T,
) -> Vec<(usize, T)> {
    let borrowing = wm.borrowings[debtor];
    if !(borrowing > T::zero()) {
        return Vec::new();
    }
    wm.creditors_of(debtor)
        .iter()
        .map(|&(creditor, w)| (creditor, w / borrowing * residual))
        .collect()
}

/// Runs the cascade to quiescence.
pub fn propagate<T: Scalar>(
    bs: &BalanceSheetSet<T>,
    wm: &WeightMatrix<T>,
    state: ShockState<T>,
    rule: LossRule,
) -> CascadeResult<T> {
    let n = bs.n();
    debug_assert_eq!(wm.n(), n);
    let mut state = state;
    let mut defaults = Vec::new();
    let mut delivered = T::zero();

    // every bank is a candidate at first, so a quiescent state stays quiescent
    let mut candidates: Vec<usize> = (0..n).collect();
    let mut touched = vec![false; n];
    let mut newly: Vec<usize> = Vec::new();

    loop {
        newly.clear();
        newly.extend(
            candidates
                .iter()
                .copied()
                .filter(|&j| !state.defaulted[j] && bs.net_worth[j] <= state.distress[j]),
        );
        if newly.is_empty() {
            break;
        }
        newly.sort_unstable();
        state.round += 1;
        for &d in &newly {
            state.defaulted[d] = true;
        }

        candidates.clear();
        for &d in &newly {
            let residual = state.distress[d] - bs.net_worth[d];
            let borrowing = wm.borrowings[d];
            let mut sent = T::zero();
            if borrowing > T::zero() {
                sent = rule.transmitted(residual, borrowing);
                for &(creditor, w) in wm.creditors_of(d) {
                    if state.defaulted[creditor] {
                        continue;
                    }
                    let share = w / borrowing * sent;
                    state.distress[creditor] = state.distress[creditor] + share;
                    delivered = delivered + share;
                    if !touched[creditor] {
                        touched[creditor] = true;
                        candidates.push(creditor);
                    }
                }
            }
            defaults.push(DefaultEvent {
                round: state.round,
                bank: d,
                distress: state.distress[d],
                transmitted: sent,
            });
        }
        for &c in &candidates {
            touched[c] = false;
        }
    }

    CascadeResult {
        n_defaults: defaults.len(),
        initial_bank: state.initial_bank,
        rounds: state.round,
        defaults,
        total_loss_transmitted: delivered,
        final_state: state,
    }
}

/// Shocks `bank` and runs the cascade; returns `N_d`.
pub fn cascade_from<T: Scalar>(
    bs: &BalanceSheetSet<T>,
    wm: &WeightMatrix<T>,
    bank: usize,
    rule: LossRule,
) -> Result<usize> {
    let state = initial_shock(bs, bank)?;
    Ok(propagate(bs, wm, state, rule).n_defaults)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::{apply_surcharge, build_from_topology, compute_weights};
    use crate::netgen::{Topology, TopologyKind};

    fn two_bank(r: f64) -> (WeightMatrix<f64>, BalanceSheetSet<f64>) {
        let t = Topology::new(2, vec![(0, 1)], TopologyKind::External).unwrap();
        build_from_topology(&t, 0.0, 0.0, 0.1, r, 1.8).unwrap()
    }

    #[test]
    fn initial_shock_is_external_asset() {
        let (_, bs) = two_bank(0.05);
        let s = initial_shock(&bs, 1).unwrap();
        assert_eq!(s.distress, vec![0.0, bs.external[1]]);
        assert!((s.distress[1] - 1.0).abs() < 1e-12);
        assert!(s.defaulted.iter().all(|d| !d));
        let s = initial_shock(&bs, 0).unwrap();
        assert_eq!(s.distress[0], bs.external[0]);
        assert_eq!(s.distress[1], 0.0);
        assert!(matches!(
            initial_shock(&bs, 2),
            Err(Error::IndexOutOfRange { index: 2, n: 2 })
        ));
    }

    #[test]
    fn initial_shock_includes_surcharge_capital() {
        let (_, bs) = two_bank(0.05);
        let sur = apply_surcharge(&bs, 0.025, 1.0).unwrap();
        let s = initial_shock(&sur, 1).unwrap();
        assert!((s.distress[1] - (1.0 + 0.025 / 0.925)).abs() < 1e-12);
    }

    #[test]
    fn two_bank_cascade_knocks_on() {
        let (wm, bs) = two_bank(0.05);
        let res = propagate(&bs, &wm, initial_shock(&bs, 1).unwrap(), LossRule::PaperMax);
        assert_eq!(res.n_defaults, 2);
        assert_eq!(res.rounds, 2);
        assert_eq!(res.defaults[0].bank, 1);
        assert_eq!(res.defaults[1].bank, 0);
        assert!((res.defaults[0].transmitted - 0.95).abs() < 1e-12);
        assert!((res.final_state.distress[0] - 0.95).abs() < 1e-12);
        assert!((res.total_loss_transmitted - 0.95).abs() < 1e-12);
    }

    #[test]
    fn two_bank_cascade_absorbed_by_high_capital() {
        let (wm, bs) = two_bank(0.85);
        let res = propagate(&bs, &wm, initial_shock(&bs, 1).unwrap(), LossRule::PaperMax);
        assert_eq!(res.n_defaults, 1);
        assert_eq!(res.rounds, 1);
        assert!((res.final_state.distress[0] - 0.2).abs() < 1e-12);
        assert!(!res.final_state.defaulted[0]);
    }

    #[test]
    fn survival_requires_strictly_more_capital() {
        let (wm, mut bs) = two_bank(0.05);
        bs.net_worth[1] = bs.external[1];
        let res = propagate(
            &bs,
            &wm,
            initial_shock(&bs, 1).unwrap(),
            LossRule::CappedMin,
        );
        assert!(res.final_state.defaulted[1]);

        bs.net_worth[1] = bs.external[1] * 1.000001;
        let res = propagate(
            &bs,
            &wm,
            initial_shock(&bs, 1).unwrap(),
            LossRule::CappedMin,
        );
        assert_eq!(res.n_defaults, 0);
        assert!(res.defaults.is_empty());
        assert_eq!(res.rounds, 0);
    }

    #[test]
    fn edgeless_bank_defaults_alone() {
        // bank 2 is isolated in an otherwise connected network
        let t = Topology::new(3, vec![(0, 1), (1, 0)], TopologyKind::External).unwrap();
        let (wm, bs) = build_from_topology(&t, 0.0, 0.0, 0.1, 0.3, 1.0).unwrap();
        let res = propagate(&bs, &wm, initial_shock(&bs, 2).unwrap(), LossRule::PaperMax);
        assert_eq!(res.n_defaults, 1);
        assert_eq!(res.defaults[0].transmitted, 0.0);
        assert_eq!(res.total_loss_transmitted, 0.0);
    }

    #[test]
    fn shares_sum_to_residual() {
        let t = Topology::new(3, vec![(0, 2), (1, 2), (1, 0)], TopologyKind::External).unwrap();
        // g = [1, 2, 0]: with s = 1, bank 1 lends twice as much per loan
        let wm = compute_weights::<f64>(&t, 1.0, 0.0, 0.2, 1.0).unwrap();
        let shares = transmit_shares(&wm, 2, 1.0);
        let total: f64 = shares.iter().map(|s| s.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((shares[0].1 - 1.0 / 3.0).abs() < 1e-12);
        assert!((shares[1].1 - 2.0 / 3.0).abs() < 1e-12);

        assert!(transmit_shares(&wm, 1, 1.0).is_empty());
        assert_eq!(transmit_shares(&wm, 0, 0.7), vec![(1, 0.7)]);
    }

    #[test]
    fn quarter_three_quarter_split() {
        // creditors 0 and 1 of debtor 3 with out-degrees 1 and 3, s = 1
        let t = Topology::new(
            4,
            vec![(0, 3), (1, 3), (1, 0), (1, 2)],
            TopologyKind::External,
        )
        .unwrap();
        let wm = compute_weights::<f64>(&t, 1.0, 0.0, 0.2, 1.0).unwrap();
        let shares = transmit_shares(&wm, 3, 1.0);
        assert_eq!(shares.iter().map(|s| s.0).collect::<Vec<_>>(), vec![0, 1]);
        assert!((shares[0].1 - 0.25).abs() < 1e-12);
        assert!((shares[1].1 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn quiescent_state_stays_quiescent() {
        let t = Topology::complete(6, TopologyKind::External);
        let (wm, bs) = build_from_topology(&t, 0.0, 0.0, 0.3, 0.02, 1.0).unwrap();
        let first = propagate(&bs, &wm, initial_shock(&bs, 0).unwrap(), LossRule::PaperMax);
        let again = propagate(&bs, &wm, first.final_state.clone(), LossRule::PaperMax);
        assert!(again.defaults.is_empty());
        assert_eq!(again.final_state.distress, first.final_state.distress);
    }

    #[test]
    fn same_round_defaults_do_not_feed_each_other() {
        // 3 borrows from 1 and 2, which also lend to each other; 1 borrows
        // from 0. Shocking 3 takes down 1 and 2 in the same round, so their
        // mutual shares are discarded.
        let t = Topology::new(
            4,
            vec![(1, 3), (2, 3), (1, 2), (2, 1), (0, 1)],
            TopologyKind::External,
        )
        .unwrap();
        let (wm, bs) = build_from_topology::<f64>(&t, 0.0, 0.0, 0.2, 0.01, 1.0).unwrap();
        let res = propagate(&bs, &wm, initial_shock(&bs, 3).unwrap(), LossRule::PaperMax);
        let round_two: Vec<usize> = res
            .defaults
            .iter()
            .filter(|e| e.round == 2)
            .map(|e| e.bank)
            .collect();
        assert_eq!(round_two, vec![1, 2]);
        // bank 1 owes bank 0 and bank 2; only bank 0's share lands
        let e1 = res.defaults.iter().find(|e| e.bank == 1).unwrap();
        let to_zero = wm.weight(0, 1) / wm.borrowings[1] * e1.transmitted;
        assert!(res.defaults.iter().any(|e| e.bank == 0));
        let e0 = res.defaults.iter().find(|e| e.bank == 0).unwrap();
        assert!((e0.distress - to_zero).abs() < 1e-15);
    }
}
