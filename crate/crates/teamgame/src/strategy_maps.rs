//! Bijection between disturbance-feedforward and state-feedback strategies.
//!
//! For the stacked pair `Q = [Q1; Q2]` and plant `P = [P12 P13]`, the maps
//! are `K = (I + Q P)^{-1} Q` and `Q = K (I - P K)^{-1}`. For causal
//! strategies both `Q P` and `P K` are strictly block lower triangular in
//! time (an input can only reach strictly later states), so the inverses
//! always exist; this strict causality is asserted before inverting rather
//! than assumed.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::LiftedGame;
use crate::model::Team;
use crate::scalar::{matrix_from_rows, matrix_rows, scalar, to_f64, Real};
use crate::structure::{MqiReport, Pattern};

fn stack<T: Real>(lifted: &LiftedGame<T>, a1: &DMatrix<T>, a2: &DMatrix<T>) -> DMatrix<T> {
    let dim_x = lifted.state_dim();
    let (r1, r2) = (a1.nrows(), a2.nrows());
    let mut out = DMatrix::zeros(r1 + r2, dim_x);
    out.view_mut((0, 0), (r1, dim_x)).copy_from(a1);
    out.view_mut((r1, 0), (r2, dim_x)).copy_from(a2);
    out
}

fn split<T: Real>(lifted: &LiftedGame<T>, stacked: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let dim_x = lifted.state_dim();
    let r1 = lifted.input_dim(Team::One);
    let r2 = lifted.input_dim(Team::Two);
    (
        stacked.view((0, 0), (r1, dim_x)).clone_owned(),
        stacked.view((r1, 0), (r2, dim_x)).clone_owned(),
    )
}

fn plant<T: Real>(lifted: &LiftedGame<T>) -> DMatrix<T> {
    let dim_x = lifted.state_dim();
    let (c1, c2) = (lifted.p12.ncols(), lifted.p13.ncols());
    let mut out = DMatrix::zeros(dim_x, c1 + c2);
    out.view_mut((0, 0), (dim_x, c1)).copy_from(&lifted.p12);
    out.view_mut((0, c1), (dim_x, c2)).copy_from(&lifted.p13);
    out
}

/// Stage of a stacked input index (team 1 rows first, then team 2).
fn input_stage(lifted_m1: usize, m1: usize, m2: usize, idx: usize) -> usize {
    if idx < lifted_m1 {
        idx / m1
    } else {
        (idx - lifted_m1) / m2
    }
}

/// Asserts that a square time-indexed composition is strictly block lower
/// triangular, i.e. its Neumann series terminates. `stage` maps a row or
/// column index to its time stage.
fn check_nilpotent<T: Real>(
    product: &DMatrix<T>,
    stage: impl Fn(usize) -> usize,
    what: &str,
) -> Result<()> {
    for i in 0..product.nrows() {
        for j in 0..product.ncols() {
            if product[(i, j)] != T::zero() && stage(j) >= stage(i) {
                return Err(Error::Structure(format!(
                    "{what} is not strictly causal at entry ({i},{j}); \
                     the strategy-space maps are only defined for causal strategies"
                )));
            }
        }
    }
    Ok(())
}

fn check_pair_shapes<T: Real>(
    lifted: &LiftedGame<T>,
    first: &DMatrix<T>,
    second: &DMatrix<T>,
    names: (&str, &str),
) -> Result<()> {
    let dim_x = lifted.state_dim();
    for (name, m, rows) in [
        (names.0, first, lifted.input_dim(Team::One)),
        (names.1, second, lifted.input_dim(Team::Two)),
    ] {
        if m.nrows() != rows || m.ncols() != dim_x {
            return Err(Error::Dimension(format!(
                "{name} must be {rows}x{dim_x}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    Ok(())
}

/// Feedforward pair to the state-feedback pair producing the same closed
/// loop: `K = (I + Q P)^{-1} Q`.
pub fn to_feedback<T: Real>(
    lifted: &LiftedGame<T>,
    q1: &DMatrix<T>,
    q2: &DMatrix<T>,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    check_pair_shapes(lifted, q1, q2, ("Q1", "Q2"))?;
    let q = stack(lifted, q1, q2);
    let qp = &q * plant(lifted);
    let (r1, m1, m2) = (q1.nrows(), lifted.m1, lifted.m2);
    check_nilpotent(&qp, |idx| input_stage(r1, m1, m2, idx), "Q*P")?;
    let dim = qp.nrows();
    let k = (DMatrix::identity(dim, dim) + qp)
        .lu()
        .solve(&q)
        .expect("I + Q*P is unit lower triangular after the causality check");
    Ok(split(lifted, &k))
}

/// State-feedback pair back to feedforward form: `Q = K (I - P K)^{-1}`.
pub fn to_feedforward<T: Real>(
    lifted: &LiftedGame<T>,
    k1: &DMatrix<T>,
    k2: &DMatrix<T>,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    check_pair_shapes(lifted, k1, k2, ("K1", "K2"))?;
    let k = stack(lifted, k1, k2);
    let pk = plant(lifted) * &k;
    let n = lifted.n;
    check_nilpotent(&pk, |idx| idx / n, "P*K")?;
    let dim = pk.nrows();
    // Q = K (I - P K)^{-1}, computed through the transposed system to keep a
    // single factorization call: (I - P K)' Q' = K'.
    let q_t = (DMatrix::identity(dim, dim) - pk)
        .transpose()
        .lu()
        .solve(&k.transpose())
        .expect("I - P*K is unit upper triangular after the causality check");
    Ok(split(lifted, &q_t.transpose()))
}

/// Feedforward-to-feedback conversion with the structure policy applied.
///
/// When the declared pair is mutually quadratically invariant the result is
/// structured in exact arithmetic, so off-support entries below
/// `1e-12 * max|K|` are snapped to exact zero. Without MQI nothing is
/// snapped: an off-support entry above the threshold is reported as an error
/// instead of being hidden.
pub fn to_feedback_structured<T: Real>(
    lifted: &LiftedGame<T>,
    q1: &DMatrix<T>,
    q2: &DMatrix<T>,
    s1: &Pattern,
    s2: &Pattern,
    mqi: &MqiReport,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let (k1, k2) = to_feedback(lifted, q1, q2)?;
    let k_max = k1.abs().max().max(k2.abs().max());
    let threshold = scalar::<T>(1e-12) * k_max;
    let mut worst: Option<(Team, usize, usize, T)> = None;
    for (team, k, s) in [(Team::One, &k1, s1), (Team::Two, &k2, s2)] {
        for i in 0..k.nrows() {
            for j in 0..k.ncols() {
                let v = k[(i, j)].abs();
                if !s.get(i, j) && v > threshold && worst.map_or(true, |w| v > w.3) {
                    worst = Some((team, i, j, v));
                }
            }
        }
    }
    if let Some((team, i, j, v)) = worst {
        return Err(Error::Structure(format!(
            "feedback strategy leaves the declared pattern: {team} entry ({i},{j}) \
             has magnitude {:e}{}",
            to_f64(v),
            if mqi.holds {
                " despite mutual quadratic invariance; this indicates numerical breakdown"
            } else {
                "; the declared pair is not mutually quadratically invariant"
            }
        )));
    }
    if mqi.holds {
        Ok((s1.project(&k1), s2.project(&k2)))
    } else {
        Ok((k1, k2))
    }
}

/// Cost of a feedback pair, evaluated through the equivalent feedforward
/// strategies.
pub fn cost_fb<T: Real>(
    lifted: &LiftedGame<T>,
    k1: &DMatrix<T>,
    k2: &DMatrix<T>,
    team: Team,
) -> Result<T> {
    let (q1, q2) = to_feedforward(lifted, k1, k2)?;
    crate::static_game::cost_ff(lifted, &q1, &q2, team)
}

/// Which way [`check_structure_preservation`] maps the given pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapDirection {
    /// Treat the pair as feedforward and map through [`to_feedback`].
    ToFeedback,
    /// Treat the pair as feedback and map through [`to_feedforward`].
    ToFeedforward,
}

/// Off-support leakage of a mapped strategy pair.
#[derive(Clone, Debug, Serialize)]
pub struct StructureReport {
    pub team1_max: f64,
    pub team2_max: f64,
    pub off_support_max: f64,
}

/// Maps the pair through the requested direction and measures how far the
/// image leaves the declared patterns. Under mutual quadratic invariance the
/// leakage is rounding-level; without it, generically large.
pub fn check_structure_preservation<T: Real>(
    lifted: &LiftedGame<T>,
    s1: &Pattern,
    s2: &Pattern,
    first: &DMatrix<T>,
    second: &DMatrix<T>,
    direction: MapDirection,
) -> Result<StructureReport> {
    let (image1, image2) = match direction {
        MapDirection::ToFeedback => to_feedback(lifted, first, second)?,
        MapDirection::ToFeedforward => to_feedforward(lifted, first, second)?,
    };
    let team1_max = to_f64(s1.off_support_max(&image1));
    let team2_max = to_f64(s2.off_support_max(&image2));
    Ok(StructureReport {
        team1_max,
        team2_max,
        off_support_max: team1_max.max(team2_max),
    })
}

/// Strategy representation tag used in strategy JSON documents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyForm {
    Feedforward,
    Feedback,
}

impl std::fmt::Display for StrategyForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StrategyForm::Feedforward => write!(f, "feedforward"),
            StrategyForm::Feedback => write!(f, "feedback"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStrategy {
    form: String,
    #[serde(rename = "Q1", default, skip_serializing_if = "Option::is_none")]
    q1: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Q2", default, skip_serializing_if = "Option::is_none")]
    q2: Option<Vec<Vec<f64>>>,
    #[serde(rename = "K1", default, skip_serializing_if = "Option::is_none")]
    k1: Option<Vec<Vec<f64>>>,
    #[serde(rename = "K2", default, skip_serializing_if = "Option::is_none")]
    k2: Option<Vec<Vec<f64>>>,
}

/// Serializes a strategy pair with its form tag.
pub fn strategy_to_json<T: Real>(
    form: StrategyForm,
    first: &DMatrix<T>,
    second: &DMatrix<T>,
) -> String {
    let raw = match form {
        StrategyForm::Feedforward => RawStrategy {
            form: form.to_string(),
            q1: Some(matrix_rows(first)),
            q2: Some(matrix_rows(second)),
            k1: None,
            k2: None,
        },
        StrategyForm::Feedback => RawStrategy {
            form: form.to_string(),
            q1: None,
            q2: None,
            k1: Some(matrix_rows(first)),
            k2: Some(matrix_rows(second)),
        },
    };
    serde_json::to_string_pretty(&raw).expect("strategy serialization cannot fail")
}

/// Parses a strategy document, checking the matrices against the dimensions
/// of the game the strategies will be used with.
pub fn strategy_from_json<T: Real>(
    text: &str,
    lifted: &LiftedGame<T>,
) -> Result<(StrategyForm, DMatrix<T>, DMatrix<T>)> {
    let RawStrategy { form, q1, q2, k1, k2 } =
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let dim_x = lifted.state_dim();
    let (r1, r2) = (
        lifted.input_dim(Team::One),
        lifted.input_dim(Team::Two),
    );
    let need = |field: Option<Vec<Vec<f64>>>, name: &str, rows: usize| -> Result<DMatrix<T>> {
        let rows_data = field.ok_or_else(|| {
            Error::Schema(format!("strategy document with form \"{form}\" needs {name}"))
        })?;
        matrix_from_rows(name, &rows_data, rows, dim_x)
    };
    match form.as_str() {
        "feedforward" => {
            if k1.is_some() || k2.is_some() {
                return Err(Error::Schema(
                    "feedforward strategy document must not contain K1/K2".into(),
                ));
            }
            let first = need(q1, "Q1", r1)?;
            let second = need(q2, "Q2", r2)?;
            Ok((StrategyForm::Feedforward, first, second))
        }
        "feedback" => {
            if q1.is_some() || q2.is_some() {
                return Err(Error::Schema(
                    "feedback strategy document must not contain Q1/Q2".into(),
                ));
            }
            let first = need(k1, "K1", r1)?;
            let second = need(k2, "K2", r2)?;
            Ok((StrategyForm::Feedback, first, second))
        }
        other => Err(Error::Schema(format!(
            "unknown strategy form {other:?} (expected \"feedforward\" or \"feedback\")"
        ))),
    }
}
