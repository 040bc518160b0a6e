//! Thin wrapper over `microlp` for the small dense LPs the geometry needs.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpFailure {
    Infeasible,
    Unbounded,
    Other,
}

/// Variables are boxed to `±BOX_SCALE · max(1, |rhs|∞)`; an optimum on that
/// box is reported as unbounded (the solver does not terminate on genuinely
/// unbounded input, and a much larger box costs precision).
const BOX_SCALE: f64 = 1e3;

/// Maximizes `objective · x` subject to `rows[i] · x <= rhs[i]`, all
/// variables free.
pub(crate) fn maximize(
    objective: &[f64],
    rows: &[Vec<f64>],
    rhs: &[f64],
) -> Result<(f64, Vec<f64>), LpFailure> {
    let bound = BOX_SCALE * rhs.iter().fold(1.0f64, |m, b| m.max(b.abs()));
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = objective
        .iter()
        .map(|&c| p.add_var(c, (-bound, bound)))
        .collect();
    for (row, &b) in rows.iter().zip(rhs) {
        let terms: Vec<_> = vars
            .iter()
            .zip(row)
            .filter(|(_, &a)| a != 0.0)
            .map(|(v, &a)| (*v, a))
            .collect();
        if terms.is_empty() {
            if b < 0.0 {
                return Err(LpFailure::Infeasible);
            }
            continue;
        }
        p.add_constraint(terms.as_slice(), ComparisonOp::Le, b);
    }
    match p.solve() {
        Ok(SolveOutcome::Solution(sol)) => {
            let x: Vec<f64> = vars.iter().map(|v| sol[*v]).collect();
            if x.iter().any(|v| v.abs() >= bound * (1.0 - 1e-9)) {
                return Err(LpFailure::Unbounded);
            }
            Ok((sol.objective(), x))
        }
        Ok(SolveOutcome::Interrupted(_)) => Err(LpFailure::Other),
        Err(microlp::Error::Infeasible) => Err(LpFailure::Infeasible),
        Err(microlp::Error::Unbounded) => Err(LpFailure::Unbounded),
        Err(_) => Err(LpFailure::Other),
    }
}
