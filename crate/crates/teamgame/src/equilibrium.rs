//! End-to-end equilibrium computation and verification.
//!
//! The pipeline: check mutual quadratic invariance, solve the structured
//! stationarity system in feedforward coordinates, convert to state feedback.
//! Verification closes the loop by computing each team's best response, in
//! feedforward form directly or in feedback form through the modified-plant
//! reduction, and measuring how much either team could still improve.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lifting::{lift, CheckReport, LiftedGame};
use crate::model::{ProblemInstance, Team};
use crate::scalar::{matrix_rows, scalar, to_f64, Real};
use crate::static_game::{best_response_ff, cost_ff, solve_nash_ff, stationarity_residual};
use crate::strategy_maps::{cost_fb, to_feedback, to_feedback_structured, to_feedforward};
use crate::structure::{is_mqi, structural_plant, BoolMat, MqiReport, Pattern};

/// Structured equilibrium in both strategy coordinates.
#[derive(Clone, Debug)]
pub struct EquilibriumResult<T> {
    pub q1: DMatrix<T>,
    pub q2: DMatrix<T>,
    pub k1: DMatrix<T>,
    pub k2: DMatrix<T>,
    pub j1: T,
    pub j2: T,
    pub residual_max: f64,
    pub condition_estimate: f64,
    pub assumption1: CheckReport,
    pub mqi: MqiReport,
}

impl<T: Real> EquilibriumResult<T> {
    pub fn json(&self) -> serde_json::Value {
        serde_json::json!({
            "Q1": matrix_rows(&self.q1),
            "Q2": matrix_rows(&self.q2),
            "K1": matrix_rows(&self.k1),
            "K2": matrix_rows(&self.k2),
            "J1": to_f64(self.j1),
            "J2": to_f64(self.j2),
            "residual_max": self.residual_max,
            "condition_estimate": self.condition_estimate,
            "assumption1": self.assumption1,
            "mqi": self.mqi.json(),
        })
    }
}

/// Which strategy coordinates a verification runs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategySpace {
    Feedforward,
    Feedback,
}

impl std::fmt::Display for StrategySpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StrategySpace::Feedforward => write!(f, "feedforward"),
            StrategySpace::Feedback => write!(f, "feedback"),
        }
    }
}

/// One team's optimal structured feedback reply and its cost.
#[derive(Clone, Debug)]
pub struct FeedbackResponse<T> {
    pub k: DMatrix<T>,
    pub cost: T,
}

/// Outcome of a Nash check: each team's best response and the improvement it
/// would gain by deviating to it.
#[derive(Clone, Debug)]
pub struct NashVerification<T> {
    pub space: StrategySpace,
    pub is_nash: bool,
    /// Cost decrease team 1 gains by switching to `br1`.
    pub delta1: f64,
    pub delta2: f64,
    /// Costs of the given pair.
    pub j1: T,
    pub j2: T,
    pub br1: DMatrix<T>,
    pub br2: DMatrix<T>,
    /// Per-team absolute improvement tolerances, `1e-6 * (1 + |J_i|)`.
    pub tolerance1: f64,
    pub tolerance2: f64,
}

impl<T: Real> NashVerification<T> {
    pub fn json(&self) -> serde_json::Value {
        serde_json::json!({
            "space": self.space.to_string(),
            "is_nash": self.is_nash,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "br1": matrix_rows(&self.br1),
            "br2": matrix_rows(&self.br2),
            "tolerance": {"team1": self.tolerance1, "team2": self.tolerance2},
        })
    }
}

/// Stationarity measured in both strategy coordinates at one feedback pair.
#[derive(Clone, Debug)]
pub struct Lemma1Report<T> {
    /// Largest supported entry of either team's feedforward-space gradient.
    pub q_residual_max: f64,
    /// Largest central-difference directional derivative of the feedback-space
    /// cost along supported unit directions.
    pub k_directional_max: f64,
    pub j1: T,
    pub j2: T,
}

impl<T: Real> Lemma1Report<T> {
    pub fn json(&self) -> serde_json::Value {
        serde_json::json!({
            "q_residual_max": self.q_residual_max,
            "k_directional_max": self.k_directional_max,
            "J1": to_f64(self.j1),
            "J2": to_f64(self.j2),
        })
    }
}

fn team_patterns<T: Real>(instance: &ProblemInstance<T>) -> Result<(Pattern, Pattern)> {
    Ok((
        Pattern::from_instance(instance, Team::One)?,
        Pattern::from_instance(instance, Team::Two)?,
    ))
}

/// Computes the structured equilibrium of an instance in feedforward form and
/// converts it to state feedback.
///
/// Errors if the declared information structures are not mutually
/// quadratically invariant: without MQI the feedback conversion leaves the
/// structure class, so no structured feedback pair exists to report.
pub fn solve_game<T: Real>(instance: &ProblemInstance<T>) -> Result<EquilibriumResult<T>> {
    let (s1, s2) = team_patterns(instance)?;
    let (p12_hat, p13_hat) = structural_plant(instance);
    let mqi = is_mqi(&s1, &s2, &p12_hat, &p13_hat)?;
    if !mqi.holds {
        let detail = mqi
            .violations
            .first()
            .map(|v| format!(" (e.g. {})", mqi.describe(v)))
            .unwrap_or_default();
        return Err(Error::Structure(format!(
            "information structures are not mutually quadratically invariant{detail}; \
             feedback strategies would leave the declared patterns"
        )));
    }
    let lifted = lift(instance);
    let sol = solve_nash_ff(&lifted, &s1, &s2)?;
    let (k1, k2) = to_feedback_structured(&lifted, &sol.q1, &sol.q2, &s1, &s2, &mqi)?;
    Ok(EquilibriumResult {
        q1: sol.q1,
        q2: sol.q2,
        k1,
        k2,
        j1: sol.j1,
        j2: sol.j2,
        residual_max: sol.residual_max,
        condition_estimate: sol.condition_estimate,
        assumption1: sol.assumption1,
        mqi,
    })
}

/// Boolean closure of the modified input-to-state map after folding the
/// opponent's feedback into the plant: union of `(P_other K_other)^k P_own`
/// over all powers.
fn modified_input_support(
    p_own: &BoolMat,
    p_other: &BoolMat,
    k_other: &BoolMat,
    horizon: usize,
) -> BoolMat {
    let loop_map = p_other.mul(k_other);
    let mut image = p_own.clone();
    let mut result = p_own.clone();
    for _ in 0..horizon {
        image = loop_map.mul(&image);
        result.or_assign(&image);
    }
    result
}

fn check_single_team_qi(pattern: &Pattern, plant_hat: &BoolMat, team: Team) -> Result<()> {
    let s = pattern.mask();
    let closure = s.mul(plant_hat).mul(s);
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            if closure.get(i, j) && !s.get(i, j) {
                return Err(Error::Structure(format!(
                    "{team}'s pattern is not quadratically invariant under the plant \
                     modified by the opponent's feedback (closure adds entry ({i},{j})); \
                     the structured best response is not computable by this reduction"
                )));
            }
        }
    }
    Ok(())
}

fn check_feedback_shape<T: Real>(
    lifted: &LiftedGame<T>,
    name: &str,
    k: &DMatrix<T>,
    team: Team,
) -> Result<()> {
    let rows = lifted.input_dim(team);
    let dim_x = lifted.state_dim();
    if k.nrows() != rows || k.ncols() != dim_x {
        return Err(Error::Dimension(format!(
            "{name} must be {rows}x{dim_x}, got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    Ok(())
}

fn best_response_fb_inner<T: Real>(
    instance: &ProblemInstance<T>,
    lifted: &LiftedGame<T>,
    own_pattern: &Pattern,
    other_k: &DMatrix<T>,
    team: Team,
) -> Result<FeedbackResponse<T>> {
    let other = team.other();
    check_feedback_shape(lifted, "opponent feedback strategy", other_k, other)?;
    let dim_x = lifted.state_dim();

    // Fold the opponent into the plant: with v = K2 x fixed, the dynamics
    // seen by team 1 are x = F P11 w + F P12 u, F = (I - P13 K2)^{-1}, and
    // the opponent's input cost moves into the state weight.
    let p_other = lifted.input_map(other);
    let loop_map = p_other * other_k;
    for i in 0..dim_x {
        for j in 0..dim_x {
            if loop_map[(i, j)] != T::zero() && j / lifted.n >= i / lifted.n {
                return Err(Error::Structure(format!(
                    "opponent feedback strategy is not causal: closed-loop entry ({i},{j}) \
                     feeds a state back into its own or an earlier stage"
                )));
            }
        }
    }
    let f = (DMatrix::<T>::identity(dim_x, dim_x) - loop_map)
        .lu()
        .try_inverse()
        .expect("I - P*K is unit triangular after the causality check");

    let p11_mod = &f * &lifted.p11;
    let p_own_mod = &f * lifted.input_map(team);
    let w_raw = &p11_mod * &lifted.disturbance_cov * p11_mod.transpose();
    let w_mod = (&w_raw + w_raw.transpose()).scale(scalar(0.5));
    let opp_weight = match team {
        Team::One => lifted.v_cost1.clone(),
        Team::Two => lifted.u_cost2.clone(),
    };
    let state_mod = lifted.state_cost(team) + other_k.transpose() * opp_weight * other_k;

    // Quadratic invariance of the team's own pattern under the modified
    // plant, on worst-case supports: the opponent contributes its numeric
    // support, the plant its structural closure.
    let (p12_hat, p13_hat) = structural_plant(instance);
    let k_other_hat = BoolMat::support(other_k);
    let plant_mod_hat = match team {
        Team::One => modified_input_support(&p12_hat, &p13_hat, &k_other_hat, lifted.horizon),
        Team::Two => modified_input_support(&p13_hat, &p12_hat, &k_other_hat, lifted.horizon),
    };
    check_single_team_qi(own_pattern, &plant_mod_hat, team)?;

    let mut modified = lifted.clone();
    modified.p11 = p11_mod;
    modified.free_moment = w_mod;
    match team {
        Team::One => {
            modified.p12 = p_own_mod;
            modified.state_cost1 = state_mod;
            // the opponent plays zero in the modified game, so its weight in
            // team 1's cost no longer contributes
        }
        Team::Two => {
            modified.p13 = p_own_mod;
            modified.state_cost2 = state_mod;
        }
    }

    let zero_other = DMatrix::<T>::zeros(lifted.input_dim(other), dim_x);
    let q_opt = best_response_ff(&modified, own_pattern, &zero_other, team)?;
    let (pair1, pair2) = match team {
        Team::One => (q_opt.clone(), zero_other.clone()),
        Team::Two => (zero_other.clone(), q_opt.clone()),
    };
    let cost = cost_ff(&modified, &pair1, &pair2, team)?;
    let (k1_raw, k2_raw) = to_feedback(&modified, &pair1, &pair2)?;
    let k_raw = match team {
        Team::One => k1_raw,
        Team::Two => k2_raw,
    };

    // Quadratic invariance guarantees the reply is structured in exact
    // arithmetic; snap rounding-level leakage, refuse anything larger.
    let threshold = scalar::<T>(1e-12) * k_raw.abs().max();
    let leak = own_pattern.off_support_max(&k_raw);
    if leak > threshold {
        return Err(Error::Numerical(format!(
            "structured feedback reply leaked outside its pattern by {:e} despite quadratic \
             invariance; this indicates numerical breakdown",
            to_f64(leak)
        )));
    }
    Ok(FeedbackResponse { k: own_pattern.project(&k_raw), cost })
}

/// Optimal structured state-feedback reply of one team against a fixed
/// opponent feedback strategy.
///
/// Works by folding the opponent into the plant and solving the resulting
/// single-team feedforward problem, which is only valid when the team's
/// pattern is quadratically invariant under the modified plant; that is
/// checked structurally and the operation refuses otherwise.
pub fn best_response_fb<T: Real>(
    instance: &ProblemInstance<T>,
    own_pattern: &Pattern,
    other_k: &DMatrix<T>,
    team: Team,
) -> Result<FeedbackResponse<T>> {
    let lifted = lift(instance);
    best_response_fb_inner(instance, &lifted, own_pattern, other_k, team)
}

fn check_structured_pair<T: Real>(
    s1: &Pattern,
    s2: &Pattern,
    first: &DMatrix<T>,
    second: &DMatrix<T>,
) -> Result<()> {
    for (name, s, m) in [("team 1 strategy", s1, first), ("team 2 strategy", s2, second)] {
        if let Some((j, k)) = s.causality_violation() {
            return Err(Error::Structure(format!(
                "{name} pattern is not causal at ({j},{k})"
            )));
        }
        let leak = to_f64(s.off_support_max(m));
        if leak > 0.0 {
            return Err(Error::Structure(format!(
                "{name} has a nonzero entry (magnitude {leak:e}) outside its declared pattern"
            )));
        }
    }
    Ok(())
}

/// Checks whether a structured strategy pair is a Nash point of the game in
/// the requested strategy space by computing both teams' best responses.
pub fn verify_nash<T: Real>(
    instance: &ProblemInstance<T>,
    first: &DMatrix<T>,
    second: &DMatrix<T>,
    space: StrategySpace,
) -> Result<NashVerification<T>> {
    let (s1, s2) = team_patterns(instance)?;
    let lifted = lift(instance);
    check_feedback_shape(&lifted, "team 1 strategy", first, Team::One)?;
    check_feedback_shape(&lifted, "team 2 strategy", second, Team::Two)?;
    check_structured_pair(&s1, &s2, first, second)?;

    let (j1, j2, br1, br2, br_cost1, br_cost2) = match space {
        StrategySpace::Feedforward => {
            let j1 = cost_ff(&lifted, first, second, Team::One)?;
            let j2 = cost_ff(&lifted, first, second, Team::Two)?;
            let br1 = best_response_ff(&lifted, &s1, second, Team::One)?;
            let br2 = best_response_ff(&lifted, &s2, first, Team::Two)?;
            let c1 = cost_ff(&lifted, &br1, second, Team::One)?;
            let c2 = cost_ff(&lifted, first, &br2, Team::Two)?;
            (j1, j2, br1, br2, c1, c2)
        }
        StrategySpace::Feedback => {
            let j1 = cost_fb(&lifted, first, second, Team::One)?;
            let j2 = cost_fb(&lifted, first, second, Team::Two)?;
            let r1 = best_response_fb_inner(instance, &lifted, &s1, second, Team::One)?;
            let r2 = best_response_fb_inner(instance, &lifted, &s2, first, Team::Two)?;
            (j1, j2, r1.k, r2.k, r1.cost, r2.cost)
        }
    };

    let delta1 = to_f64(j1 - br_cost1);
    let delta2 = to_f64(j2 - br_cost2);
    let tolerance1 = 1e-6 * (1.0 + to_f64(j1.abs()));
    let tolerance2 = 1e-6 * (1.0 + to_f64(j2.abs()));
    Ok(NashVerification {
        space,
        is_nash: delta1 <= tolerance1 && delta2 <= tolerance2,
        delta1,
        delta2,
        j1,
        j2,
        br1,
        br2,
        tolerance1,
        tolerance2,
    })
}

/// Measures stationarity of a feedback pair in both coordinate systems: the
/// supported feedforward-space gradient at the equivalent feedforward pair,
/// and finite-difference directional derivatives of the feedback-space cost.
/// At an equilibrium both vanish together; away from one, neither does.
pub fn check_lemma1<T: Real>(
    instance: &ProblemInstance<T>,
    k1: &DMatrix<T>,
    k2: &DMatrix<T>,
) -> Result<Lemma1Report<T>> {
    let (s1, s2) = team_patterns(instance)?;
    let lifted = lift(instance);
    check_feedback_shape(&lifted, "K1", k1, Team::One)?;
    check_feedback_shape(&lifted, "K2", k2, Team::Two)?;
    let (q1, q2) = to_feedforward(&lifted, k1, k2)?;

    let mut q_residual_max = 0.0f64;
    for (team, s) in [(Team::One, &s1), (Team::Two, &s2)] {
        let res = stationarity_residual(&lifted, &q1, &q2, team)?;
        for (j, k) in s.support_entries() {
            q_residual_max = q_residual_max.max(to_f64(res[(j, k)].abs()));
        }
    }

    let scale_k = to_f64(k1.abs().max().max(k2.abs().max()));
    let h = scalar::<T>(1e-6 * (1.0 + scale_k));
    let two_h = h + h;
    let mut k_directional_max = 0.0f64;
    for (team, s, own) in [(Team::One, &s1, k1), (Team::Two, &s2, k2)] {
        for (j, k) in s.support_entries() {
            let mut plus = own.clone();
            plus[(j, k)] += h;
            let mut minus = own.clone();
            minus[(j, k)] -= h;
            let (cp, cm) = match team {
                Team::One => (
                    cost_fb(&lifted, &plus, k2, team)?,
                    cost_fb(&lifted, &minus, k2, team)?,
                ),
                Team::Two => (
                    cost_fb(&lifted, k1, &plus, team)?,
                    cost_fb(&lifted, k1, &minus, team)?,
                ),
            };
            k_directional_max = k_directional_max.max(to_f64(((cp - cm) / two_h).abs()));
        }
    }

    Ok(Lemma1Report {
        q_residual_max,
        k_directional_max,
        j1: cost_fb(&lifted, k1, k2, Team::One)?,
        j2: cost_fb(&lifted, k1, k2, Team::Two)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_instance;
    use approx::assert_relative_eq;

    fn counterexample() -> ProblemInstance<f64> {
        parse_instance(crate::model::counterexample_json()).unwrap()
    }

    fn zerosum() -> ProblemInstance<f64> {
        parse_instance(crate::model::zerosum_json()).unwrap()
    }

    #[test]
    fn solve_game_counterexample() {
        let eq = solve_game(&counterexample()).unwrap();
        assert!(eq.mqi.holds);
        assert!(eq.assumption1.passed);
        assert_relative_eq!(eq.q1[(0, 0)], -0.6794596788219546, max_relative = 1e-12);
        assert_relative_eq!(eq.k2[(1, 1)], -7.526881720430146, max_relative = 1e-12);
        assert_relative_eq!(eq.j1, 218.99146779244174, max_relative = 1e-10);
        assert_relative_eq!(eq.j2, 480.01854902167827, max_relative = 1e-10);
        // converting the feedback pair back reproduces the feedforward costs
        let lifted = lift(&counterexample());
        let j1_fb = cost_fb(&lifted, &eq.k1, &eq.k2, Team::One).unwrap();
        assert_relative_eq!(j1_fb, eq.j1, max_relative = 1e-10);
    }

    #[test]
    fn solve_game_refuses_non_mqi_structures() {
        let doc = crate::model::counterexample_json().replace(
            r#""structure1": "FI""#,
            r#""structure1": {"kind": "explicit", "mask": [[1,0,0],[0,1,0]]}"#,
        );
        let inst: ProblemInstance<f64> = parse_instance(&doc).unwrap();
        let err = solve_game(&inst).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
        assert!(
            err.to_string().contains("mutually quadratically invariant"),
            "got: {err}"
        );
    }

    #[test]
    fn feedback_best_response_beats_equilibrium_strategy() {
        let inst = counterexample();
        let eq = solve_game(&inst).unwrap();
        let s1 = Pattern::from_instance(&inst, Team::One).unwrap();
        let reply = best_response_fb(&inst, &s1, &eq.k2, Team::One).unwrap();
        assert_relative_eq!(reply.k[(0, 0)], -1.8331575069359685, max_relative = 1e-9);
        assert_relative_eq!(reply.k[(1, 1)], -0.43010752688171905, max_relative = 1e-9);
        assert!(reply.k[(1, 0)].abs() < 1e-10);
        assert_relative_eq!(reply.cost, 205.09666694741037, max_relative = 1e-10);
    }

    #[test]
    fn feedback_best_response_trivial_case() {
        let doc = r#"{
            "n": 1, "m1": 1, "m2": 1, "N": 2,
            "A": [[2.0]], "B1": [[0.4]], "B2": [[0.1]],
            "Sigma0": [[1.0]], "SigmaT": [[1.0]],
            "cost1": {"M": [[0.0]], "R": [[1.0]], "V": [[0.0]]},
            "cost2": {"M": [[1.0]], "R": [[1.0]], "V": [[1.0]]},
            "structure1": "FI", "structure2": "FI"
        }"#;
        let inst: ProblemInstance<f64> = parse_instance(doc).unwrap();
        let s1 = Pattern::from_instance(&inst, Team::One).unwrap();
        let k2 = DMatrix::zeros(2, 3);
        let reply = best_response_fb(&inst, &s1, &k2, Team::One).unwrap();
        assert_eq!(reply.k.abs().max(), 0.0);
        assert_relative_eq!(reply.cost, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn counterexample_is_nash_in_feedforward_but_not_feedback() {
        let inst = counterexample();
        let eq = solve_game(&inst).unwrap();

        let ff = verify_nash(&inst, &eq.q1, &eq.q2, StrategySpace::Feedforward).unwrap();
        assert!(ff.is_nash, "delta1={} delta2={}", ff.delta1, ff.delta2);

        let fb = verify_nash(&inst, &eq.k1, &eq.k2, StrategySpace::Feedback).unwrap();
        assert!(!fb.is_nash);
        assert_relative_eq!(fb.delta1, 13.89480084503137, max_relative = 1e-8);
        assert!(fb.delta2 <= fb.tolerance2, "delta2={}", fb.delta2);
    }

    #[test]
    fn zerosum_equilibrium_value_and_saddle_property() {
        let inst = zerosum();
        let eq = solve_game(&inst).unwrap();
        assert_relative_eq!(eq.j1, -1.5846527940089707, max_relative = 1e-9);
        assert_relative_eq!(eq.j2, 1.5846527940089707, max_relative = 1e-9);
        assert!(eq.assumption1.passed);
        assert_relative_eq!(
            eq.assumption1.checks[0].min_eigenvalue,
            1.1940996140520246,
            max_relative = 1e-9
        );

        let fb = verify_nash(&inst, &eq.k1, &eq.k2, StrategySpace::Feedback).unwrap();
        assert!(fb.is_nash, "delta1={} delta2={}", fb.delta1, fb.delta2);
    }

    #[test]
    fn lemma_stationarity_at_equilibrium_and_away_from_it() {
        let inst = zerosum();
        let eq = solve_game(&inst).unwrap();
        let at_eq = check_lemma1(&inst, &eq.k1, &eq.k2).unwrap();
        let scale = 1e-5 * (1.0 + at_eq.j1.abs());
        assert!(at_eq.q_residual_max <= scale, "{}", at_eq.q_residual_max);
        assert!(at_eq.k_directional_max <= scale, "{}", at_eq.k_directional_max);

        let mut k1 = eq.k1.clone();
        k1[(0, 0)] += 0.5;
        let off = check_lemma1(&inst, &k1, &eq.k2).unwrap();
        assert!(off.q_residual_max > 1e-3, "{}", off.q_residual_max);
        assert!(off.k_directional_max > 1e-3, "{}", off.k_directional_max);
    }

    #[test]
    fn lemma_report_is_zero_for_zero_cost_game() {
        let doc = r#"{
            "n": 1, "m1": 1, "m2": 1, "N": 2,
            "A": [[1.0]], "B1": [[1.0]], "B2": [[1.0]],
            "Sigma0": [[1.0]], "SigmaT": [[1.0]],
            "cost1": {"M": [[0.0]], "R": [[0.0]], "V": [[0.0]]},
            "cost2": {"M": [[0.0]], "R": [[0.0]], "V": [[0.0]]},
            "structure1": "FI", "structure2": "FI"
        }"#;
        let inst: ProblemInstance<f64> = parse_instance(doc).unwrap();
        let z = DMatrix::zeros(2, 3);
        let report = check_lemma1(&inst, &z, &z).unwrap();
        assert_eq!(report.q_residual_max, 0.0);
        assert_eq!(report.k_directional_max, 0.0);
    }

    #[test]
    fn verification_rejects_unstructured_pairs() {
        let inst = zerosum();
        let eq = solve_game(&inst).unwrap();
        let mut q1 = eq.q1.clone();
        q1[(0, 2)] = 0.25; // u(0) reading a state outside the causal pattern
        let err = verify_nash(&inst, &q1, &eq.q2, StrategySpace::Feedforward).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
    }

    #[test]
    fn verification_json_shape() {
        let inst = counterexample();
        let eq = solve_game(&inst).unwrap();
        let ff = verify_nash(&inst, &eq.q1, &eq.q2, StrategySpace::Feedforward).unwrap();
        let json = ff.json();
        for key in ["space", "is_nash", "delta1", "delta2", "br1", "br2", "tolerance"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["space"], "feedforward");
    }
}
