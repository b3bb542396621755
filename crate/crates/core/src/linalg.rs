//! Dense solves and support-graph queries shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::chain::StochasticMatrix;
use crate::error::{Error, Result};

/// Solves `a · x = b` by LU with partial pivoting.
pub(crate) fn solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidArgument("singular linear system".into()))
}

/// `reach[x][y]` is true when `y` is reachable from `x` in zero or more steps.
pub(crate) fn reachability(p: &StochasticMatrix) -> Vec<Vec<bool>> {
    let n = p.n();
    (0..n)
        .map(|start| {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(x) = stack.pop() {
                for y in p.successors(x) {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Closed communicating classes of the support graph, each sorted ascending.
pub(crate) fn closed_classes(p: &StochasticMatrix) -> Vec<Vec<usize>> {
    let reach = reachability(p);
    let n = p.n();
    let mut assigned = vec![false; n];
    let mut classes = Vec::new();
    for x in 0..n {
        if assigned[x] {
            continue;
        }
        // x is recurrent iff every state it reaches reaches it back
        let closed = (0..n).all(|y| !reach[x][y] || reach[y][x]);
        if closed {
            let class: Vec<usize> = (0..n).filter(|&y| reach[x][y]).collect();
            for &y in &class {
                assigned[y] = true;
            }
            classes.push(class);
        }
    }
    classes
}

/// States from which `targets` is reached with probability one.
///
/// On a finite chain this holds exactly when every state reachable from
/// the start (along paths stopped at `targets`) can itself reach `targets`.
pub(crate) fn surely_reaches(p: &StochasticMatrix, targets: &[bool]) -> Vec<bool> {
    let n = p.n();
    let mut can = targets.to_vec();
    let mut changed = true;
    while changed {
        changed = false;
        for x in 0..n {
            if !can[x] && p.successors(x).any(|y| can[y]) {
                can[x] = true;
                changed = true;
            }
        }
    }
    (0..n)
        .map(|x| {
            let mut seen = vec![false; n];
            let mut stack = vec![x];
            seen[x] = true;
            while let Some(z) = stack.pop() {
                if !can[z] {
                    return false;
                }
                if targets[z] {
                    continue;
                }
                for w in p.successors(z) {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            true
        })
        .collect()
}

/// Expected hitting-time style solve: `(I − Q) h = rhs` on the states in `free`,
/// with `Q` the restriction of `p` to `free`.
pub(crate) fn solve_on_subset(p: &StochasticMatrix, free: &[usize], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = free.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let a = DMatrix::from_fn(m, m, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - p.get(free[i], free[j])
    });
    let x = solve(a, DVector::from_column_slice(rhs))?;
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: Vec<Vec<f64>>) -> StochasticMatrix {
        StochasticMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn classes_of_identity() {
        let p = m(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(closed_classes(&p), vec![vec![0], vec![1]]);
    }

    #[test]
    fn transient_state_is_not_a_class() {
        let p = m(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]);
        assert_eq!(closed_classes(&p), vec![vec![1, 2]]);
    }

    #[test]
    fn sure_reachability_detects_traps() {
        // 0 -> {1, 2}; 1 absorbing trap; 2 target
        let p = m(vec![vec![0.0, 0.5, 0.5], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let ok = surely_reaches(&p, &[false, false, true]);
        assert_eq!(ok, vec![false, false, true]);
    }
}
