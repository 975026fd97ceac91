//! Next-solution selection with strategic oscillation.
//!
//! From a feasible incumbent the search may step into infeasible space if
//! that is cheaper; from an infeasible incumbent it heads back, preferring
//! any feasible candidate and otherwise the least capacity excess.

use std::cmp::Ordering;

use crate::scalar::Scalar;

/// What selection needs to know about a candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateView<T = f64> {
    pub cost: T,
    pub excess: u64,
    /// Expiry of the latest active tabu attribute, `None` if not tabu.
    pub tabu_until: Option<u64>,
}

impl<T: Scalar> CandidateView<T> {
    pub fn feasible(&self) -> bool {
        self.excess == 0
    }

    pub fn is_tabu(&self) -> bool {
        self.tabu_until.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pick {
    /// Best admissible feasible candidate.
    Feasible,
    /// Best admissible infeasible candidate.
    Infeasible,
    /// Every candidate tabu: the one whose tabu status ends first.
    SoonestExpiry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub chosen: usize,
    pub pick: Pick,
    /// The chosen candidate is tabu but beats the global best.
    pub aspiration: bool,
    /// Cheapest feasible candidate strictly better than the global best,
    /// tabu or not. It may differ from `chosen` when an infeasible
    /// candidate is cheaper still.
    pub new_best: Option<usize>,
}

fn lt<T: Scalar>(a: T, b: T) -> bool {
    a.partial_cmp(&b) == Some(Ordering::Less)
}

/// Chooses among `candidates` (nonempty) given the incumbent's feasibility
/// and the global best cost (`None` before any feasible solution is known).
///
/// Feasible incumbent: the cheapest admissible feasible candidate (`sbfs`)
/// and the cheapest admissible infeasible one (`sbis`) are tracked; `sbis`
/// wins only if strictly cheaper. Infeasible incumbent: the same with
/// infeasibility as the primary key, so any admissible feasible candidate
/// wins; ties on infeasibility fall back to cost. A candidate is admissible
/// if it is not tabu, or if it is feasible and strictly cheaper than the
/// best feasible cost seen so far (aspiration). Earlier candidates win
/// exact ties.
///
/// # Panics
///
/// Panics if `candidates` is empty.
pub fn select_next<T: Scalar>(
    incumbent_feasible: bool,
    global_best: Option<T>,
    candidates: &[CandidateView<T>],
) -> Selection {
    assert!(!candidates.is_empty(), "select_next needs at least one candidate");
    let mut cbs = global_best.unwrap_or_else(T::infinity);
    let mut new_best = None;
    let mut sbfs: Option<(usize, bool)> = None;
    let mut sbis: Option<usize> = None;

    let key = |c: &CandidateView<T>| -> (u64, T) {
        if incumbent_feasible {
            (0, c.cost)
        } else {
            (c.excess, c.cost)
        }
    };
    let better = |a: &CandidateView<T>, b: Option<&CandidateView<T>>| -> bool {
        let Some(b) = b else { return true };
        let (ka, kb) = (key(a), key(b));
        ka.0 < kb.0 || (ka.0 == kb.0 && lt(ka.1, kb.1))
    };

    for (i, c) in candidates.iter().enumerate() {
        if c.feasible() {
            if better(c, sbfs.map(|(k, _)| &candidates[k])) {
                let beats_best = lt(c.cost, cbs);
                if beats_best {
                    cbs = c.cost;
                    new_best = Some(i);
                }
                if !c.is_tabu() || beats_best {
                    sbfs = Some((i, c.is_tabu()));
                }
            }
        } else if !c.is_tabu() && better(c, sbis.map(|k| &candidates[k])) {
            sbis = Some(i);
        }
    }

    let pick = match (sbfs, sbis) {
        (Some((f, asp)), Some(s)) => {
            let (cf, cs) = (&candidates[f], &candidates[s]);
            let infeasible_wins = if incumbent_feasible {
                lt(cs.cost, cf.cost)
            } else {
                cs.excess < cf.excess
            };
            if infeasible_wins {
                (s, Pick::Infeasible, false)
            } else {
                (f, Pick::Feasible, asp)
            }
        }
        (Some((f, asp)), None) => (f, Pick::Feasible, asp),
        (None, Some(s)) => (s, Pick::Infeasible, false),
        (None, None) => {
            let soonest = candidates
                .iter()
                .enumerate()
                .min_by_key(|(_, c)| c.tabu_until.unwrap_or(0))
                .map(|(i, _)| i)
                .expect("nonempty");
            (soonest, Pick::SoonestExpiry, false)
        }
    };
    Selection {
        chosen: pick.0,
        pick: pick.1,
        aspiration: pick.2,
        new_best,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(cost: f64, excess: u64, tabu: Option<u64>) -> CandidateView {
        CandidateView { cost, excess, tabu_until: tabu }
    }

    #[test]
    fn cheaper_infeasible_wins_from_feasible_incumbent() {
        let s = select_next(true, Some(50.0), &[c(100.0, 0, None), c(90.0, 3, None)]);
        assert_eq!((s.chosen, s.pick), (1, Pick::Infeasible));
        assert_eq!(s.new_best, None);
    }

    #[test]
    fn tabu_candidate_beating_best_aspirates() {
        let s = select_next(true, Some(95.0), &[c(100.0, 0, None), c(93.0, 0, Some(7))]);
        assert_eq!(s.chosen, 1);
        assert!(s.aspiration);
        assert_eq!(s.new_best, Some(1));
    }

    #[test]
    fn least_excess_preferred_when_infeasible() {
        let s = select_next(false, None, &[c(10.0, 5, None), c(30.0, 2, None), c(5.0, 7, None)]);
        assert_eq!((s.chosen, s.pick), (1, Pick::Infeasible));
    }

    #[test]
    fn all_tabu_picks_soonest_expiry() {
        let s = select_next(true, Some(1.0), &[c(10.0, 0, Some(9)), c(20.0, 0, Some(4)), c(5.0, 2, Some(4))]);
        assert_eq!((s.chosen, s.pick), (1, Pick::SoonestExpiry));
    }
}
