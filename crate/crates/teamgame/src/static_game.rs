//! The lifted game in disturbance-feedforward coordinates.
//!
//! Strategies here are matrices `Q1`, `Q2` acting on the free state response:
//! `u = Q1 (P11 w)`, `v = Q2 (P11 w)`. In these coordinates each team's cost
//! is jointly quadratic, so structured equilibria reduce to one square linear
//! system over the supported entries of both strategy matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lifting::{assumption1_static, assumption1_zerosum, CheckReport, LiftedGame};
use crate::model::Team;
use crate::scalar::{matrix_rows, scalar, to_f64, Real};
use crate::structure::Pattern;

/// Structured feedforward equilibrium with its solve diagnostics.
#[derive(Clone, Debug)]
pub struct NashSolution<T> {
    pub q1: DMatrix<T>,
    pub q2: DMatrix<T>,
    pub j1: T,
    pub j2: T,
    /// Largest supported stationarity-residual entry at the solution.
    pub residual_max: f64,
    /// 2-norm condition estimate of the stationarity system.
    pub condition_estimate: f64,
    /// Positive-definiteness assumption report (saddle form for zero-sum
    /// instances, coupled form otherwise). The solve proceeds either way.
    pub assumption1: CheckReport,
}

impl<T: Real> NashSolution<T> {
    pub fn json(&self) -> serde_json::Value {
        serde_json::json!({
            "Q1": matrix_rows(&self.q1),
            "Q2": matrix_rows(&self.q2),
            "J1": to_f64(self.j1),
            "J2": to_f64(self.j2),
            "residual_max": self.residual_max,
            "condition_estimate": self.condition_estimate,
            "assumption1": self.assumption1,
        })
    }
}

fn check_strategy_shapes<T: Real>(
    lifted: &LiftedGame<T>,
    q1: &DMatrix<T>,
    q2: &DMatrix<T>,
) -> Result<()> {
    let dim_x = lifted.state_dim();
    for (name, q, rows) in [
        ("Q1", q1, lifted.input_dim(Team::One)),
        ("Q2", q2, lifted.input_dim(Team::Two)),
    ] {
        if q.nrows() != rows || q.ncols() != dim_x {
            return Err(Error::Dimension(format!(
                "{name} must be {rows}x{dim_x}, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
    }
    Ok(())
}

/// Expected cost of the pair `(Q1, Q2)` for one team.
///
/// With `X = I + P12 Q1 + P13 Q2` mapping the free response to the closed
/// loop and `W` its second moment, the cost is
/// `tr(M X W X') + tr(R Q1 W Q1') + tr(V Q2 W Q2')`.
pub fn cost_ff<T: Real>(
    lifted: &LiftedGame<T>,
    q1: &DMatrix<T>,
    q2: &DMatrix<T>,
    team: Team,
) -> Result<T> {
    check_strategy_shapes(lifted, q1, q2)?;
    let x = closed_loop(lifted, q1, q2);
    let w = &lifted.free_moment;
    let state = (lifted.state_cost(team) * &x * w * x.transpose()).trace();
    let input_u = (lifted.u_cost(team) * q1 * w * q1.transpose()).trace();
    let input_v = (lifted.v_cost(team) * q2 * w * q2.transpose()).trace();
    Ok(state + input_u + input_v)
}

fn closed_loop<T: Real>(lifted: &LiftedGame<T>, q1: &DMatrix<T>, q2: &DMatrix<T>) -> DMatrix<T> {
    let dim_x = lifted.state_dim();
    DMatrix::identity(dim_x, dim_x) + &lifted.p12 * q1 + &lifted.p13 * q2
}

/// Gradient of `team`'s cost in its own strategy matrix.
pub fn stationarity_residual<T: Real>(
    lifted: &LiftedGame<T>,
    q1: &DMatrix<T>,
    q2: &DMatrix<T>,
    team: Team,
) -> Result<DMatrix<T>> {
    check_strategy_shapes(lifted, q1, q2)?;
    let x = closed_loop(lifted, q1, q2);
    let own_q = match team {
        Team::One => q1,
        Team::Two => q2,
    };
    let p = lifted.input_map(team);
    let grad = (lifted.own_input_cost(team) * own_q + p.transpose() * lifted.state_cost(team) * x)
        * &lifted.free_moment;
    Ok(grad.scale(scalar(2.0)))
}

struct UnknownLayout {
    entries: Vec<(Team, usize, usize)>,
}

impl UnknownLayout {
    fn new(s1: &Pattern, s2: &Pattern) -> UnknownLayout {
        let mut entries = Vec::with_capacity(s1.count_ones() + s2.count_ones());
        for (j, k) in s1.support_entries() {
            entries.push((Team::One, j, k));
        }
        for (j, k) in s2.support_entries() {
            entries.push((Team::Two, j, k));
        }
        UnknownLayout { entries }
    }

    fn len(&self) -> usize {
        self.entries.len()
    }

    fn pack<T: Real>(&self, r1: &DMatrix<T>, r2: &DMatrix<T>) -> Vec<T> {
        self.entries
            .iter()
            .map(|&(team, j, k)| match team {
                Team::One => r1[(j, k)],
                Team::Two => r2[(j, k)],
            })
            .collect()
    }

    fn unpack<T: Real>(&self, lifted: &LiftedGame<T>, values: &[T]) -> (DMatrix<T>, DMatrix<T>) {
        let dim_x = lifted.state_dim();
        let mut q1 = DMatrix::zeros(lifted.input_dim(Team::One), dim_x);
        let mut q2 = DMatrix::zeros(lifted.input_dim(Team::Two), dim_x);
        for (&(team, j, k), &v) in self.entries.iter().zip(values) {
            match team {
                Team::One => q1[(j, k)] = v,
                Team::Two => q2[(j, k)] = v,
            }
        }
        (q1, q2)
    }
}

fn check_pattern_shapes<T: Real>(lifted: &LiftedGame<T>, s1: &Pattern, s2: &Pattern) -> Result<()> {
    let dim_x = lifted.state_dim();
    for (name, s, rows) in [
        ("team 1 pattern", s1, lifted.input_dim(Team::One)),
        ("team 2 pattern", s2, lifted.input_dim(Team::Two)),
    ] {
        if s.nrows() != rows || s.ncols() != dim_x {
            return Err(Error::Dimension(format!(
                "{name} must be {rows}x{dim_x}, got {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
        if let Some((j, k)) = s.causality_violation() {
            return Err(Error::Structure(format!(
                "{name} is not causal: entry ({j},{k}) reads a future state"
            )));
        }
    }
    Ok(())
}

/// Condition estimate, solve, and residual acceptance for one assembled
/// stationarity system.
fn solve_linear_system<T: Real>(
    matrix: DMatrix<T>,
    rhs: &[T],
) -> Result<(Vec<T>, f64)> {
    let dim = rhs.len();
    if dim == 0 {
        return Ok((Vec::new(), 1.0));
    }
    let sv = matrix.clone().svd(false, false).singular_values;
    let s_max = sv.iter().fold(T::zero(), |a, &b| a.max(b));
    let s_min = sv.iter().fold(s_max, |a, &b| a.min(b));
    let condition = if s_min > T::zero() {
        to_f64(s_max / s_min)
    } else {
        f64::INFINITY
    };
    let rhs_vec = nalgebra::DVector::from_column_slice(rhs);
    let solution = matrix
        .lu()
        .solve(&rhs_vec)
        .ok_or_else(|| {
            Error::Numerical(
                "stationarity system is singular: equilibrium nonexistent or non-unique under the given structure"
                    .into(),
            )
        })?;
    Ok((solution.iter().copied().collect(), condition))
}

/// Computes the structured feedforward Nash equilibrium.
///
/// The supported entries of `(Q1, Q2)` are the unknowns; each column of the
/// linear system is the pair of projected stationarity residuals at a unit
/// basis strategy, which makes the assembly directly cross-checkable against
/// [`stationarity_residual`].
pub fn solve_nash_ff<T: Real>(
    lifted: &LiftedGame<T>,
    s1: &Pattern,
    s2: &Pattern,
) -> Result<NashSolution<T>> {
    check_pattern_shapes(lifted, s1, s2)?;
    let assumption1 = if lifted.zero_sum {
        assumption1_zerosum(lifted)
    } else {
        assumption1_static(lifted)
    };

    let layout = UnknownLayout::new(s1, s2);
    let dim = layout.len();
    let zero = layout.unpack(lifted, &vec![T::zero(); dim]);
    let r0_1 = stationarity_residual(lifted, &zero.0, &zero.1, Team::One)?;
    let r0_2 = stationarity_residual(lifted, &zero.0, &zero.1, Team::Two)?;
    let rhs: Vec<T> = layout
        .pack(&r0_1, &r0_2)
        .into_iter()
        .map(|v| -v)
        .collect();

    let mut matrix = DMatrix::<T>::zeros(dim, dim);
    for col in 0..dim {
        let mut basis = vec![T::zero(); dim];
        basis[col] = T::one();
        let (e1, e2) = layout.unpack(lifted, &basis);
        let res1 = stationarity_residual(lifted, &e1, &e2, Team::One)?;
        let res2 = stationarity_residual(lifted, &e1, &e2, Team::Two)?;
        let column = layout.pack(&(res1 - &r0_1), &(res2 - &r0_2));
        for (row, v) in column.into_iter().enumerate() {
            matrix[(row, col)] = v;
        }
    }

    let rhs_inf = rhs.iter().fold(0.0f64, |a, &b| a.max(to_f64(b.abs())));
    let (solution, condition_estimate) = solve_linear_system(matrix, &rhs)?;
    let (q1, q2) = layout.unpack(lifted, &solution);

    let res1 = stationarity_residual(lifted, &q1, &q2, Team::One)?;
    let res2 = stationarity_residual(lifted, &q1, &q2, Team::Two)?;
    let residual_max = layout
        .pack(&res1, &res2)
        .iter()
        .fold(0.0f64, |a, &b| a.max(to_f64(b.abs())));
    let accept = 1e-6 * (1.0 + rhs_inf);
    if residual_max > accept {
        return Err(Error::Numerical(format!(
            "stationarity system ill-conditioned: residual {residual_max:e} exceeds {accept:e} \
             (condition estimate {condition_estimate:e})"
        )));
    }

    let j1 = cost_ff(lifted, &q1, &q2, Team::One)?;
    let j2 = cost_ff(lifted, &q1, &q2, Team::Two)?;
    Ok(NashSolution {
        q1,
        q2,
        j1,
        j2,
        residual_max,
        condition_estimate,
        assumption1,
    })
}

/// Optimal structured reply of one team with the other team's feedforward
/// strategy frozen.
///
/// This is the convex single-team subproblem; the curvature of the cost on
/// the support subspace must be positive definite or the reply is unbounded.
pub fn best_response_ff<T: Real>(
    lifted: &LiftedGame<T>,
    own_pattern: &Pattern,
    other_q: &DMatrix<T>,
    team: Team,
) -> Result<DMatrix<T>> {
    let dim_x = lifted.state_dim();
    let own_rows = lifted.input_dim(team);
    if own_pattern.nrows() != own_rows || own_pattern.ncols() != dim_x {
        return Err(Error::Dimension(format!(
            "pattern must be {own_rows}x{dim_x}, got {}x{}",
            own_pattern.nrows(),
            own_pattern.ncols()
        )));
    }
    if let Some((j, k)) = own_pattern.causality_violation() {
        return Err(Error::Structure(format!(
            "pattern is not causal: entry ({j},{k}) reads a future state"
        )));
    }

    let pair = |own: &DMatrix<T>| -> (DMatrix<T>, DMatrix<T>) {
        match team {
            Team::One => (own.clone(), other_q.clone()),
            Team::Two => (other_q.clone(), own.clone()),
        }
    };

    let entries = own_pattern.support_entries();
    let dim = entries.len();
    let zero_own = DMatrix::<T>::zeros(own_rows, dim_x);
    let (z1, z2) = pair(&zero_own);
    let r0 = stationarity_residual(lifted, &z1, &z2, team)?;

    let mut matrix = DMatrix::<T>::zeros(dim, dim);
    for (col, &(j, k)) in entries.iter().enumerate() {
        let mut basis = zero_own.clone();
        basis[(j, k)] = T::one();
        let (b1, b2) = pair(&basis);
        // Subtracting the affine offset isolates the curvature in the team's
        // own strategy; the frozen opponent contributes only to the offset.
        let lin = stationarity_residual(lifted, &b1, &b2, team)? - &r0;
        for (row, &(rj, rk)) in entries.iter().enumerate() {
            matrix[(row, col)] = lin[(rj, rk)];
        }
    }

    // The assembled matrix is the cost Hessian on the support subspace, so it
    // is symmetric up to rounding; symmetrize and check definiteness.
    let sym = (&matrix + matrix.transpose()).scale(scalar(0.5));
    let eig = sym.clone().symmetric_eigen();
    let max_abs = sym.iter().map(|e| to_f64(e.abs())).fold(0.0, f64::max);
    let min_eig = eig
        .eigenvalues
        .iter()
        .map(|&e| to_f64(e))
        .fold(f64::INFINITY, f64::min);
    if dim > 0 && min_eig <= 1e-10 * (1.0 + max_abs) {
        return Err(Error::Numerical(format!(
            "best response unbounded: curvature on the support subspace is not positive definite \
             (min eigenvalue {min_eig:e})"
        )));
    }

    let rhs: Vec<T> = entries.iter().map(|&(j, k)| -r0[(j, k)]).collect();
    let (solution, _) = solve_linear_system(sym, &rhs)?;
    let mut own = zero_own;
    for (&(j, k), &v) in entries.iter().zip(&solution) {
        own[(j, k)] = v;
    }
    Ok(own)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::lift;
    use crate::model::parse_instance;
    use approx::assert_relative_eq;

    fn counterexample() -> LiftedGame<f64> {
        lift(&parse_instance(crate::model::counterexample_json()).unwrap())
    }

    fn fi_patterns() -> (Pattern, Pattern) {
        (
            Pattern::full_information(1, 1, 2),
            Pattern::full_information(1, 1, 2),
        )
    }

    #[test]
    fn zero_strategies_cost_the_free_response() {
        let lifted = counterexample();
        let q = DMatrix::zeros(2, 3);
        let j1 = cost_ff(&lifted, &q, &q, Team::One).unwrap();
        assert_relative_eq!(j1, 26.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_costs_give_zero_cost_and_gradient() {
        let mut inst = parse_instance::<f64>(crate::model::counterexample_json()).unwrap();
        for cost in [&mut inst.cost1, &mut inst.cost2] {
            for m in cost
                .state
                .iter_mut()
                .chain(cost.input_u.iter_mut())
                .chain(cost.input_v.iter_mut())
            {
                m.fill(0.0);
            }
        }
        let lifted = lift(&inst);
        let q1 = DMatrix::from_row_slice(2, 3, &[0.3, 0.0, 0.0, -1.2, 0.7, 0.0]);
        let q2 = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.4, -0.9, 0.0]);
        assert_eq!(cost_ff(&lifted, &q1, &q2, Team::One).unwrap(), 0.0);
        let grad = stationarity_residual(&lifted, &q1, &q2, Team::Two).unwrap();
        assert_eq!(grad.abs().max(), 0.0);
    }

    #[test]
    fn counterexample_equilibrium_strategies() {
        let lifted = counterexample();
        let (s1, s2) = fi_patterns();
        let sol = solve_nash_ff(&lifted, &s1, &s2).unwrap();
        assert_relative_eq!(sol.q1[(0, 0)], -0.6794596788219546, max_relative = 1e-12);
        assert_relative_eq!(sol.q1[(1, 0)], 0.6283175524590202, max_relative = 1e-12);
        assert_relative_eq!(sol.q1[(1, 1)], -0.43010752688172044, max_relative = 1e-12);
        assert_relative_eq!(sol.q2[(0, 0)], -11.890544379384352, max_relative = 1e-12);
        assert_relative_eq!(sol.q2[(1, 0)], 10.995557168032883, max_relative = 1e-12);
        assert_relative_eq!(sol.q2[(1, 1)], -7.526881720430147, max_relative = 1e-12);
        // entries outside the causal support stay exactly zero
        for (j, k) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(sol.q1[(j, k)], 0.0);
            assert_eq!(sol.q2[(j, k)], 0.0);
        }
        assert_relative_eq!(sol.j1, 218.99146779244174, max_relative = 1e-10);
        assert_relative_eq!(sol.j2, 480.01854902167827, max_relative = 1e-10);
        assert_relative_eq!(sol.condition_estimate, 313.2442834890027, max_relative = 1e-6);
        assert!(sol.residual_max <= 1e-6 * (1.0 + 220.0));
        assert!(sol.assumption1.passed);
    }

    #[test]
    fn equilibrium_residual_projection_is_tiny() {
        let lifted = counterexample();
        let (s1, s2) = fi_patterns();
        let sol = solve_nash_ff(&lifted, &s1, &s2).unwrap();
        for team in [Team::One, Team::Two] {
            let res = stationarity_residual(&lifted, &sol.q1, &sol.q2, team).unwrap();
            let pattern = if team == Team::One { &s1 } else { &s2 };
            for (j, k) in pattern.support_entries() {
                assert!(res[(j, k)].abs() <= 1e-6, "residual {}", res[(j, k)]);
            }
        }
    }

    #[test]
    fn single_team_reduction() {
        let inst = parse_instance::<f64>(
            r#"{
                "n": 1, "m1": 1, "m2": 1, "N": 1,
                "A": [[2.0]], "B1": [[0.4]], "B2": [[0.0]],
                "Sigma0": [[1.0]], "SigmaT": [[1.0]],
                "cost1": {"M": [[1.0]], "R": [[1.0]], "V": [[1.0]]},
                "cost2": {"M": [[0.0]], "R": [[1.0]], "V": [[1.0]]},
                "structure1": "FI", "structure2": "FI"
            }"#,
        )
        .unwrap();
        let lifted = lift(&inst);
        let s1 = Pattern::full_information(1, 1, 1);
        let s2 = Pattern::explicit(1, 1, 1, &[vec![0, 0]]).unwrap();
        let sol = solve_nash_ff(&lifted, &s1, &s2).unwrap();
        assert_relative_eq!(sol.q1[(0, 0)], -1.6 / 2.32, max_relative = 1e-12);
        assert_eq!(sol.q2.abs().max(), 0.0);
    }

    #[test]
    fn best_response_recovers_equilibrium() {
        let lifted = counterexample();
        let (s1, s2) = fi_patterns();
        let sol = solve_nash_ff(&lifted, &s1, &s2).unwrap();
        let br1 = best_response_ff(&lifted, &s1, &sol.q2, Team::One).unwrap();
        let br2 = best_response_ff(&lifted, &s2, &sol.q1, Team::Two).unwrap();
        assert_relative_eq!(br1, sol.q1, epsilon = 1e-8);
        assert_relative_eq!(br2, sol.q2, epsilon = 1e-8);
    }

    #[test]
    fn best_response_with_only_input_cost_is_zero() {
        let mut inst = parse_instance::<f64>(crate::model::counterexample_json()).unwrap();
        for m in inst.cost1.state.iter_mut().chain(inst.cost1.input_v.iter_mut()) {
            m.fill(0.0);
        }
        let lifted = lift(&inst);
        let (s1, _) = fi_patterns();
        let q2 = DMatrix::from_row_slice(2, 3, &[0.5, 0.0, 0.0, -0.2, 0.8, 0.0]);
        let br = best_response_ff(&lifted, &s1, &q2, Team::One).unwrap();
        assert_eq!(br.abs().max(), 0.0);
    }

    #[test]
    fn best_response_rejects_concave_cost() {
        let mut inst = parse_instance::<f64>(crate::model::counterexample_json()).unwrap();
        for m in inst.cost1.state.iter_mut() {
            m.fill(0.0);
        }
        for r in inst.cost1.input_u.iter_mut() {
            r.fill(-1.0);
        }
        let lifted = lift(&inst);
        let (s1, _) = fi_patterns();
        let q2 = DMatrix::zeros(2, 3);
        let err = best_response_ff(&lifted, &s1, &q2, Team::One).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        assert!(err.to_string().contains("unbounded"), "got: {err}");
    }

    #[test]
    fn acausal_pattern_is_rejected() {
        let lifted = counterexample();
        let acausal = Pattern::explicit(1, 1, 2, &[vec![0, 1, 0], vec![0, 0, 0]]).unwrap();
        let fi = Pattern::full_information(1, 1, 2);
        let err = solve_nash_ff(&lifted, &acausal, &fi).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
    }

    #[test]
    fn solution_json_shape() {
        let lifted = counterexample();
        let (s1, s2) = fi_patterns();
        let sol = solve_nash_ff(&lifted, &s1, &s2).unwrap();
        let json = sol.json();
        for key in ["Q1", "Q2", "J1", "J2", "residual_max", "condition_estimate", "assumption1"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["Q1"].as_array().unwrap().len(), 2);
    }
}
