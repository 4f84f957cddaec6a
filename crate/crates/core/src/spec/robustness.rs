//! Bottom-up robustness computation.
//!
//! Every subformula is turned into a robustness signal over the whole (prefix of the)
//! trace, children first, so each operator costs O(n) (bounded until: O(n·b)).
//! Windows are clipped to the trace: an empty `sup` is `-inf`, an empty `inf` is `+inf`.

use std::collections::VecDeque;

use super::ast::{Formula, Interval};
use crate::trace::Scene;

/// Robustness of `f` at every step of `scenes`.
pub fn signal(f: &Formula, scenes: &[Scene], dt: f64) -> Vec<f64> {
    let mut atoms = |p: &Formula| match p {
        Formula::Prop { expr, cmp } => scenes.iter().map(|s| cmp.robustness(expr.eval(s))).collect(),
        _ => unreachable!("only atoms are looked up"),
    };
    eval(f, scenes.len(), dt, &mut atoms)
}

/// Same as [`signal`] restricted to the first `len` steps, reading atomic values from a
/// precomputed full-length table (`atoms[i]` holds the i-th `Prop` in pre-order).
pub(crate) fn signal_with_atoms(f: &Formula, atoms: &[Vec<f64>], len: usize, dt: f64) -> Vec<f64> {
    let mut next = 0usize;
    let mut lookup = |_: &Formula| {
        let v = atoms[next][..len].to_vec();
        next += 1;
        v
    };
    eval(f, len, dt, &mut lookup)
}

/// Atomic robustness signals of every `Prop` in `f`, in pre-order.
pub(crate) fn atom_table(f: &Formula, scenes: &[Scene]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    collect_atoms(f, scenes, &mut out);
    out
}

fn collect_atoms(f: &Formula, scenes: &[Scene], out: &mut Vec<Vec<f64>>) {
    match f {
        Formula::Const(_) => {}
        Formula::Prop { expr, cmp } => {
            out.push(scenes.iter().map(|s| cmp.robustness(expr.eval(s))).collect())
        }
        Formula::Not(a) | Formula::Eventually(_, a) | Formula::Always(_, a) | Formula::Next(a) => {
            collect_atoms(a, scenes, out)
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
            collect_atoms(a, scenes, out);
            collect_atoms(b, scenes, out);
        }
    }
}

/// Children are always visited left to right so that atom lookups follow pre-order.
fn eval(f: &Formula, n: usize, dt: f64, atoms: &mut dyn FnMut(&Formula) -> Vec<f64>) -> Vec<f64> {
    match f {
        Formula::Const(b) => vec![if *b { f64::INFINITY } else { f64::NEG_INFINITY }; n],
        Formula::Prop { .. } => atoms(f),
        Formula::Not(a) => negate(eval(a, n, dt, atoms)),
        Formula::And(a, b) => {
            let x = eval(a, n, dt, atoms);
            let y = eval(b, n, dt, atoms);
            x.iter().zip(&y).map(|(p, q)| p.min(*q)).collect()
        }
        Formula::Or(a, b) => {
            let x = eval(a, n, dt, atoms);
            let y = eval(b, n, dt, atoms);
            x.iter().zip(&y).map(|(p, q)| p.max(*q)).collect()
        }
        Formula::Next(a) => {
            let x = eval(a, n, dt, atoms);
            (0..n).map(|t| x.get(t + 1).copied().unwrap_or(f64::INFINITY)).collect()
        }
        Formula::Eventually(i, a) => window_max(&eval(a, n, dt, atoms), *i, dt),
        Formula::Always(i, a) => negate(window_max(&negate(eval(a, n, dt, atoms)), *i, dt)),
        Formula::Until(i, a, b) => {
            let x = eval(a, n, dt, atoms);
            let y = eval(b, n, dt, atoms);
            until(&x, &y, *i, dt)
        }
    }
}

fn negate(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| -x).collect()
}

/// `out[t] = max s[t+lo ..= t+hi]` clipped to the signal, `-inf` when empty.
fn window_max(s: &[f64], i: Interval, dt: f64) -> Vec<f64> {
    let n = s.len();
    let (lo, hi) = i.steps(dt);
    let mut out = vec![f64::NEG_INFINITY; n];
    match hi {
        None => {
            let mut suffix = f64::NEG_INFINITY;
            let mut suf = vec![f64::NEG_INFINITY; n + 1];
            for t in (0..n).rev() {
                suffix = suffix.max(s[t]);
                suf[t] = suffix;
            }
            for (t, o) in out.iter_mut().enumerate() {
                if let Some(v) = t.checked_add(lo).filter(|&k| k < n) {
                    *o = suf[v];
                }
            }
        }
        Some(hi) if hi < lo => {}
        Some(hi) => {
            // Monotone deque of indices with decreasing values.
            let mut dq: VecDeque<usize> = VecDeque::new();
            let mut pushed = 0usize;
            for (t, o) in out.iter_mut().enumerate() {
                let right = t.saturating_add(hi).min(n.saturating_sub(1));
                while pushed <= right && pushed < n {
                    while dq.back().is_some_and(|&j| s[j] <= s[pushed]) {
                        dq.pop_back();
                    }
                    dq.push_back(pushed);
                    pushed += 1;
                }
                let left = t.saturating_add(lo);
                while dq.front().is_some_and(|&j| j < left) {
                    dq.pop_front();
                }
                if left < n {
                    if let Some(&j) = dq.front() {
                        *o = s[j];
                    }
                }
            }
        }
    }
    out
}

fn until(s1: &[f64], s2: &[f64], i: Interval, dt: f64) -> Vec<f64> {
    let n = s1.len();
    let (lo, hi) = i.steps(dt);
    let mut out = vec![f64::NEG_INFINITY; n];
    match hi {
        None => {
            // u[t] = sup_{t1 >= t} min(s2[t1], inf s1[t..=t1])
            let mut u = vec![f64::NEG_INFINITY; n + 1];
            for t in (0..n).rev() {
                u[t] = s1[t].min(s2[t].max(u[t + 1]));
            }
            // Running minimum of s1 over [t, t+lo) via a sliding window.
            let prefix_min = if lo == 0 {
                vec![f64::INFINITY; n]
            } else {
                let w = Interval {
                    lo: 0.0,
                    hi: (lo - 1) as f64 * dt,
                };
                negate(window_max(&negate(s1.to_vec()), w, dt))
            };
            for t in 0..n {
                if t + lo < n {
                    out[t] = prefix_min[t].min(u[t + lo]);
                }
            }
        }
        Some(hi) => {
            for t in 0..n {
                let mut run = f64::INFINITY;
                let mut best = f64::NEG_INFINITY;
                let end = t.saturating_add(hi).min(n - 1);
                for t1 in t..=end {
                    run = run.min(s1[t1]);
                    if t1 >= t + lo {
                        best = best.max(s2[t1].min(run));
                    }
                }
                out[t] = best;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::ast::{Cmp, LinExpr};
    use crate::trace::{Signal, Trace};

    fn speed_trace(v: &[f64]) -> Trace {
        Trace::from_signal(Signal::Speed, v, 1.0).unwrap()
    }

    fn gt(c: f64) -> Formula {
        Formula::prop(LinExpr::signal(Signal::Speed).minus(LinExpr::constant(c)), Cmp::Gt)
    }

    #[test]
    fn window_max_matches_brute_force() {
        let s = [3.0, -1.0, 4.0, 1.0, -5.0, 9.0, 2.0];
        for lo in 0..8 {
            for hi in lo..9 {
                let got = window_max(&s, Interval::new(lo as f64, hi as f64).unwrap(), 1.0);
                for t in 0..s.len() {
                    let want = (t + lo..=t + hi)
                        .filter(|&k| k < s.len())
                        .map(|k| s[k])
                        .fold(f64::NEG_INFINITY, f64::max);
                    assert_eq!(got[t], want, "lo={lo} hi={hi} t={t}");
                }
            }
        }
    }

    #[test]
    fn unbounded_until_with_offset() {
        let tr = speed_trace(&[5.0, 4.0, 3.0, 2.0, 1.0]);
        let f = Formula::until(Interval::new(2.0, f64::INFINITY).unwrap(), gt(0.0), gt(2.5));
        let got = signal(&f, tr.scenes(), 1.0);
        // t=0: t1 in {2,3,4}; best is t1=2: min(3-2.5, min(5,4,3)) = 0.5
        assert_eq!(got[0], 0.5);
        assert_eq!(got[3], f64::NEG_INFINITY);
    }

    #[test]
    fn next_at_end_is_vacuous() {
        let tr = speed_trace(&[1.0, 2.0]);
        let got = signal(&Formula::next(gt(0.0)), tr.scenes(), 1.0);
        assert_eq!(got, vec![2.0, f64::INFINITY]);
    }

    #[test]
    fn indexed_atoms_match_direct() {
        let tr = speed_trace(&[1.0, 7.0, 3.0, 0.0, 6.0]);
        let f = Formula::or(
            Formula::always(Interval::new(0.0, 2.0).unwrap(), gt(2.0)),
            Formula::until(Interval::UNBOUNDED, gt(0.5), Formula::not(gt(4.0))),
        );
        let atoms = atom_table(&f, tr.scenes());
        for len in 1..=tr.len() {
            let direct = signal(&f, &tr.scenes()[..len], 1.0);
            assert_eq!(signal_with_atoms(&f, &atoms, len, 1.0), direct);
        }
    }
}
