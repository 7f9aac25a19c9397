//! Stacked-trajectory form of the game.
//!
//! Stacking states `x(0..N)`, inputs `u(0..N-1)`, `v(0..N-1)`, and the free
//! disturbance vector `(x(0), w(0..N-1))` turns the dynamics into
//! `x = P11 w + P12 u + P13 v` and each team's cost into a quadratic form in
//! `(w, u, v)`. Everything downstream (stationarity systems, strategy-space
//! bijections, covariance propagation checks) works on this representation.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::model::{ProblemInstance, Team};
use crate::scalar::{scalar, to_f64, Real};

/// The lifted plant and cost data of one instance.
///
/// `p11` is block lower triangular with identity diagonal blocks; `p12` and
/// `p13` are strictly block lower triangular, so an input at time `t` only
/// reaches states strictly after `t`.
#[derive(Clone, Debug)]
pub struct LiftedGame<T> {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    pub horizon: usize,
    pub zero_sum: bool,
    /// Disturbance-to-state map `(I - Z A)^{-1}`, exact via the finite
    /// Neumann sum (the shifted dynamics are nilpotent).
    pub p11: DMatrix<T>,
    /// Input-to-state map of team 1, `P11 Z B1`.
    pub p12: DMatrix<T>,
    /// Input-to-state map of team 2, `P11 Z B2`.
    pub p13: DMatrix<T>,
    /// Block-diagonal lifted state costs; the leading block (time 0) is zero.
    pub state_cost1: DMatrix<T>,
    pub state_cost2: DMatrix<T>,
    /// Block-diagonal lifted weights on team 1's input, per team.
    pub u_cost1: DMatrix<T>,
    pub u_cost2: DMatrix<T>,
    /// Block-diagonal lifted weights on team 2's input, per team.
    pub v_cost1: DMatrix<T>,
    pub v_cost2: DMatrix<T>,
    /// Covariance of the stacked disturbance `(x(0), w(0..N-1))`.
    pub disturbance_cov: DMatrix<T>,
    /// Second moment `P11 disturbance_cov P11'` of the free state response,
    /// symmetrized.
    pub free_moment: DMatrix<T>,
}

impl<T: Real> LiftedGame<T> {
    pub fn state_dim(&self) -> usize {
        self.n * (self.horizon + 1)
    }

    pub fn input_dim(&self, team: Team) -> usize {
        match team {
            Team::One => self.m1 * self.horizon,
            Team::Two => self.m2 * self.horizon,
        }
    }

    /// Input-to-state map of the given team.
    pub fn input_map(&self, team: Team) -> &DMatrix<T> {
        match team {
            Team::One => &self.p12,
            Team::Two => &self.p13,
        }
    }

    pub fn state_cost(&self, team: Team) -> &DMatrix<T> {
        match team {
            Team::One => &self.state_cost1,
            Team::Two => &self.state_cost2,
        }
    }

    /// Lifted weight that `team` places on team 1's input.
    pub fn u_cost(&self, team: Team) -> &DMatrix<T> {
        match team {
            Team::One => &self.u_cost1,
            Team::Two => &self.u_cost2,
        }
    }

    /// Lifted weight that `team` places on team 2's input.
    pub fn v_cost(&self, team: Team) -> &DMatrix<T> {
        match team {
            Team::One => &self.v_cost1,
            Team::Two => &self.v_cost2,
        }
    }

    /// Weight `team` places on its own input.
    pub fn own_input_cost(&self, team: Team) -> &DMatrix<T> {
        match team {
            Team::One => &self.u_cost1,
            Team::Two => &self.v_cost2,
        }
    }
}

/// Block-diagonal matrix from square blocks.
pub(crate) fn block_diag<T: Real>(blocks: &[DMatrix<T>]) -> DMatrix<T> {
    let dim: usize = blocks.iter().map(DMatrix::nrows).sum();
    let mut out = DMatrix::zeros(dim, dim);
    let mut offset = 0;
    for b in blocks {
        assert_eq!(b.nrows(), b.ncols(), "block-diagonal blocks must be square");
        out.view_mut((offset, offset), (b.nrows(), b.nrows())).copy_from(b);
        offset += b.nrows();
    }
    out
}

/// Builds the lifted representation of a validated instance.
pub fn lift<T: Real>(instance: &ProblemInstance<T>) -> LiftedGame<T> {
    let n = instance.n;
    let big_n = instance.horizon;
    let dim_x = n * (big_n + 1);

    // Z A: copy of A in each subdiagonal block (state t feeds state t+1).
    let mut za = DMatrix::<T>::zeros(dim_x, dim_x);
    for t in 0..big_n {
        za.view_mut(((t + 1) * n, t * n), (n, n)).copy_from(&instance.a);
    }
    // (I - Z A)^{-1} = I + (ZA) + ... + (ZA)^N, exact since ZA is nilpotent.
    let mut p11 = DMatrix::<T>::identity(dim_x, dim_x);
    let mut power = DMatrix::<T>::identity(dim_x, dim_x);
    for _ in 0..big_n {
        power = &za * &power;
        p11 += &power;
    }

    let lifted_input = |b: &DMatrix<T>, m: usize| -> DMatrix<T> {
        let mut zb = DMatrix::<T>::zeros(dim_x, m * big_n);
        for t in 0..big_n {
            zb.view_mut(((t + 1) * n, t * m), (n, m)).copy_from(b);
        }
        &p11 * zb
    };
    let p12 = lifted_input(&instance.b1, instance.m1);
    let p13 = lifted_input(&instance.b2, instance.m2);

    let state_cost = |team: Team| -> DMatrix<T> {
        let mut blocks = vec![DMatrix::<T>::zeros(n, n)];
        blocks.extend(instance.costs(team).state.iter().cloned());
        block_diag(&blocks)
    };
    let mut cov_blocks = vec![instance.sigma0.clone()];
    cov_blocks.extend(instance.sigma_w.iter().cloned());
    let disturbance_cov = block_diag(&cov_blocks);

    let raw = &p11 * &disturbance_cov * p11.transpose();
    let free_moment = (&raw + raw.transpose()).scale(scalar(0.5));

    LiftedGame {
        n,
        m1: instance.m1,
        m2: instance.m2,
        horizon: big_n,
        zero_sum: instance.zero_sum,
        p11,
        p12,
        p13,
        state_cost1: state_cost(Team::One),
        state_cost2: state_cost(Team::Two),
        u_cost1: block_diag(&instance.cost1.input_u),
        u_cost2: block_diag(&instance.cost2.input_u),
        v_cost1: block_diag(&instance.cost1.input_v),
        v_cost2: block_diag(&instance.cost2.input_v),
        disturbance_cov,
        free_moment,
    }
}

/// Full cost Hessians of both teams over the stacked variables `(w, u, v)`,
/// explicitly symmetrized.
pub fn hessians<T: Real>(lifted: &LiftedGame<T>) -> (DMatrix<T>, DMatrix<T>) {
    let one = |team: Team| -> DMatrix<T> {
        let m = lifted.state_cost(team);
        let (p11, p12, p13) = (&lifted.p11, &lifted.p12, &lifted.p13);
        let (dw, du, dv) = (p11.ncols(), p12.ncols(), p13.ncols());
        let mut h = DMatrix::<T>::zeros(dw + du + dv, dw + du + dv);
        let m_p11 = m * p11;
        let m_p12 = m * p12;
        let m_p13 = m * p13;
        h.view_mut((0, 0), (dw, dw)).copy_from(&(p11.transpose() * &m_p11));
        h.view_mut((0, dw), (dw, du)).copy_from(&(p11.transpose() * &m_p12));
        h.view_mut((0, dw + du), (dw, dv)).copy_from(&(p11.transpose() * &m_p13));
        h.view_mut((dw, dw), (du, du))
            .copy_from(&(p12.transpose() * &m_p12 + lifted.u_cost(team)));
        h.view_mut((dw, dw + du), (du, dv)).copy_from(&(p12.transpose() * &m_p13));
        h.view_mut((dw + du, dw + du), (dv, dv))
            .copy_from(&(p13.transpose() * &m_p13 + lifted.v_cost(team)));
        let h_t = h.transpose();
        for i in 0..h.nrows() {
            for j in 0..i {
                h[(i, j)] = h_t[(i, j)];
            }
        }
        (&h + h.transpose()).scale(scalar(0.5))
    };
    (one(Team::One), one(Team::Two))
}

/// Smallest eigenvalue of one assembled matrix against the margin it must
/// clear for the check to pass.
#[derive(Clone, Debug, Serialize)]
pub struct EigCheck {
    pub matrix: String,
    pub min_eigenvalue: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Outcome of a positive-definiteness assumption check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub checks: Vec<EigCheck>,
}

fn eig_check<T: Real>(name: &str, m: &DMatrix<T>) -> EigCheck {
    let sym = (m + m.transpose()).scale(scalar(0.5));
    let max_abs = sym.iter().map(|e| to_f64(e.abs())).fold(0.0, f64::max);
    let min_eigenvalue = sym
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&e| to_f64(e))
        .fold(f64::INFINITY, f64::min);
    let tolerance = 1e-10 * (1.0 + max_abs);
    EigCheck {
        matrix: name.to_string(),
        min_eigenvalue,
        tolerance,
        passed: min_eigenvalue > tolerance,
    }
}

fn two_by_two<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    d: &DMatrix<T>,
) -> DMatrix<T> {
    let (du, dv) = (a.nrows(), d.nrows());
    let mut out = DMatrix::<T>::zeros(du + dv, du + dv);
    out.view_mut((0, 0), (du, du)).copy_from(a);
    out.view_mut((0, du), (du, dv)).copy_from(b);
    out.view_mut((du, 0), (dv, du)).copy_from(c);
    out.view_mut((du, du), (dv, dv)).copy_from(d);
    out
}

/// Joint convexity check for general (nonzero-sum) games.
///
/// Both cross matrices pair team 1's curvature in `u` with team 2's curvature
/// in `v`; the off-diagonal coupling comes once from each team's cost. Each
/// must be positive definite for the stationarity system to characterize an
/// equilibrium.
pub fn assumption1_static<T: Real>(lifted: &LiftedGame<T>) -> CheckReport {
    let (p12, p13) = (&lifted.p12, &lifted.p13);
    let h_uu = p12.transpose() * &lifted.state_cost1 * p12 + &lifted.u_cost1;
    let h_vv = p13.transpose() * &lifted.state_cost2 * p13 + &lifted.v_cost2;
    let cross1 = p12.transpose() * &lifted.state_cost1 * p13;
    let cross2 = p12.transpose() * &lifted.state_cost2 * p13;
    let m1 = two_by_two(&h_uu, &cross1, &cross1.transpose(), &h_vv);
    let m2 = two_by_two(&h_uu, &cross2, &cross2.transpose(), &h_vv);
    let checks = vec![
        eig_check("team1-coupling", &m1),
        eig_check("team2-coupling", &m2),
    ];
    CheckReport { passed: checks.iter().all(|c| c.passed), checks }
}

/// Saddle curvature check for zero-sum games, built from team 1's cost alone:
/// convex in `u`, concave in `v`, jointly definite after negating the `v`
/// block.
pub fn assumption1_zerosum<T: Real>(lifted: &LiftedGame<T>) -> CheckReport {
    let (p12, p13) = (&lifted.p12, &lifted.p13);
    let m = &lifted.state_cost1;
    let h_uu = p12.transpose() * m * p12 + &lifted.u_cost1;
    let h_vv = -(p13.transpose() * m * p13 + &lifted.v_cost1);
    let cross = p12.transpose() * m * p13;
    let matrix = two_by_two(&h_uu, &cross, &cross.transpose(), &h_vv);
    let checks = vec![eig_check("saddle", &matrix)];
    CheckReport { passed: checks[0].passed, checks }
}

/// Writes one lifted matrix as row-major CSV with full round-trip precision.
pub fn matrix_to_csv<T: Real>(m: &DMatrix<T>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:.16e}", to_f64(m[(i, j)])))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_instance;
    use approx::assert_relative_eq;

    fn single_stage() -> ProblemInstance<f64> {
        parse_instance(
            r#"{
                "n": 1, "m1": 1, "m2": 1, "N": 1,
                "A": [[2.0]], "B1": [[0.4]], "B2": [[0.1]],
                "Sigma0": [[1.0]], "SigmaT": [[1.0]],
                "cost1": {"M": [[1.0]], "R": [[1.0]], "V": [[1.0]]},
                "cost2": {"M": [[1.0]], "R": [[1.0]], "V": [[1.0]]},
                "structure1": "FI", "structure2": "FI"
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn single_stage_maps() {
        let lifted = lift(&single_stage());
        assert_eq!(lifted.p11, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 1.0]));
        assert_eq!(lifted.p12, DMatrix::from_row_slice(2, 1, &[0.0, 0.4]));
        assert_eq!(lifted.p13, DMatrix::from_row_slice(2, 1, &[0.0, 0.1]));
    }

    #[test]
    fn free_response_cost_of_counterexample() {
        let inst = parse_instance::<f64>(crate::model::counterexample_json()).unwrap();
        let lifted = lift(&inst);
        // Var x(0) = 1, Var x(1) = 4 + 1 = 5, Var x(2) = 20 + 1 = 21; the
        // time-0 weight is zero, so only 5 + 21 count.
        let value = (&lifted.state_cost1 * &lifted.free_moment).trace();
        assert_relative_eq!(value, 26.0, max_relative = 1e-12);
    }

    #[test]
    fn input_maps_are_strictly_causal() {
        let inst = parse_instance::<f64>(crate::model::counterexample_json()).unwrap();
        let lifted = lift(&inst);
        for (p, m) in [(&lifted.p12, lifted.m1), (&lifted.p13, lifted.m2)] {
            for i in 0..p.nrows() {
                for j in 0..p.ncols() {
                    let (t_x, t_u) = (i / lifted.n, j / m);
                    if t_x <= t_u {
                        assert_eq!(p[(i, j)], 0.0, "entry ({i},{j}) must vanish");
                    }
                }
            }
        }
    }

    #[test]
    fn hessian_blocks_and_symmetry() {
        let inst = parse_instance::<f64>(crate::model::counterexample_json()).unwrap();
        let lifted = lift(&inst);
        let (h1, h2) = hessians(&lifted);
        for h in [&h1, &h2] {
            assert_eq!((h - h.transpose()).abs().max(), 0.0);
        }
        let dw = lifted.state_dim();
        let top_left = h1.view((0, 0), (dw, dw)).clone_owned();
        let direct = lifted.p11.transpose() * &lifted.state_cost1 * &lifted.p11;
        assert_relative_eq!(top_left, direct, max_relative = 1e-14);
    }

    #[test]
    fn zero_state_cost_makes_hessian_block_diagonal() {
        let mut inst = single_stage();
        inst.cost1.state[0][(0, 0)] = 0.0;
        let lifted = lift(&inst);
        let (h1, _) = hessians(&lifted);
        let dw = lifted.state_dim();
        assert_eq!(h1.view((0, 0), (dw, dw)).abs().max(), 0.0);
        assert_eq!(h1[(dw, dw)], 1.0);
        assert_eq!(h1[(dw + 1, dw + 1)], 1.0);
        assert_eq!(h1[(dw, dw + 1)], 0.0);
    }

    #[test]
    fn counterexample_satisfies_joint_convexity() {
        let inst = parse_instance::<f64>(crate::model::counterexample_json()).unwrap();
        let report = assumption1_static(&lift(&inst));
        assert!(report.passed, "{:?}", report.checks);
        assert_eq!(report.checks.len(), 2);
    }

    #[test]
    fn negative_input_weight_fails_joint_convexity() {
        let mut inst = single_stage();
        inst.cost1.state[0][(0, 0)] = 0.0;
        inst.cost2.state[0][(0, 0)] = 0.0;
        inst.cost1.input_u[0][(0, 0)] = -1.0;
        let report = assumption1_static(&lift(&inst));
        assert!(!report.passed);
        assert!(report.checks.iter().all(|c| !c.passed));
    }

    #[test]
    fn zerosum_saddle_check_signs() {
        let mut inst = single_stage();
        inst.cost1.state[0][(0, 0)] = 0.0;
        inst.cost1.input_v[0][(0, 0)] = -1.0;
        let report = assumption1_zerosum(&lift(&inst));
        assert!(report.passed, "{:?}", report.checks);

        inst.cost1.input_v[0][(0, 0)] = 1.0;
        let report = assumption1_zerosum(&lift(&inst));
        assert!(!report.passed);
    }

    #[test]
    fn csv_round_trips_exactly() {
        let lifted = lift(&single_stage());
        let csv = matrix_to_csv(&lifted.free_moment);
        for (i, line) in csv.lines().enumerate() {
            for (j, field) in line.split(',').enumerate() {
                let parsed: f64 = field.parse().unwrap();
                assert_eq!(parsed, lifted.free_moment[(i, j)]);
            }
        }
    }
}
