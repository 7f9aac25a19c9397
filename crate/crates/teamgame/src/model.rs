//! Problem data: dynamics, stage costs, information structures, and the JSON
//! schema they travel in.
//!
//! Time indexing follows the cost
//! `E[sum_t x(t)' M(t) x(t) + u(t)' R(t) u(t) + v(t)' V(t) v(t)]`:
//! state weights `M` run over `t = 1..=N` (the weight on `x(0)` is identically
//! zero, since no strategy can influence the initial state), while input
//! weights `R` and `V` run over `t = 0..N-1`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{scalar, to_f64, Real};

/// Selects which team's cost or strategy an operation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Team {
    One,
    Two,
}

impl Team {
    pub fn other(self) -> Team {
        match self {
            Team::One => Team::Two,
            Team::Two => Team::One,
        }
    }
}

impl std::fmt::Display for Team {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Team::One => write!(f, "team 1"),
            Team::Two => write!(f, "team 2"),
        }
    }
}

/// Per-team stage cost weights.
///
/// `state[k]` is the weight on `x(k+1)` (so the list covers `t = 1..=N`),
/// `input_u[t]` and `input_v[t]` weight `u(t)` and `v(t)` for `t = 0..N-1`.
/// Signs are unconstrained: zero-sum games put negative weights here.
#[derive(Clone, Debug, PartialEq)]
pub struct StageCosts<T> {
    pub state: Vec<DMatrix<T>>,
    pub input_u: Vec<DMatrix<T>>,
    pub input_v: Vec<DMatrix<T>>,
}

impl<T: Real> StageCosts<T> {
    /// Weight on `x(t)` for `t` in `1..=N`.
    pub fn state_at(&self, t: usize) -> &DMatrix<T> {
        assert!(t >= 1, "state cost at t=0 is identically zero and not stored");
        &self.state[t - 1]
    }

    fn negated(&self) -> StageCosts<T> {
        let neg = |ms: &[DMatrix<T>]| ms.iter().map(|m| -m).collect();
        StageCosts {
            state: neg(&self.state),
            input_u: neg(&self.input_u),
            input_v: neg(&self.input_v),
        }
    }
}

/// Information structure of one team, either a named builder or an explicit
/// boolean mask of shape `(m * N) x (n * (N + 1))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StructureSpec {
    /// Access to all past and present state coordinates.
    FullInformation,
    /// Full access to strictly past states; only the team's own coordinates
    /// (`own`) of the current state.
    DelayedSharing { own: Vec<usize> },
    /// Access restricted to the team's own coordinates at all times.
    Decentralized { own: Vec<usize> },
    /// Arbitrary mask, row `j` = input coordinate, column `k` = state
    /// coordinate, in the same time-major layout the named builders produce.
    Explicit { mask: Vec<Vec<u8>> },
}

/// A fully specified two-team game over a finite horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance<T> {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    /// Number of stages `N`; states run `t = 0..=N`, inputs `t = 0..N-1`.
    pub horizon: usize,
    pub a: DMatrix<T>,
    pub b1: DMatrix<T>,
    pub b2: DMatrix<T>,
    /// Covariance of the initial state `x(0)`.
    pub sigma0: DMatrix<T>,
    /// Covariances of the process noise `w(t)`, `t = 0..N-1`.
    pub sigma_w: Vec<DMatrix<T>>,
    pub zero_sum: bool,
    pub cost1: StageCosts<T>,
    pub cost2: StageCosts<T>,
    pub structure1: StructureSpec,
    pub structure2: StructureSpec,
}

impl<T: Real> ProblemInstance<T> {
    /// Dimension of the stacked state trajectory `(x(0), .., x(N))`.
    pub fn lifted_state_dim(&self) -> usize {
        self.n * (self.horizon + 1)
    }

    /// Dimension of the stacked input trajectory of the given team.
    pub fn lifted_input_dim(&self, team: Team) -> usize {
        match team {
            Team::One => self.m1 * self.horizon,
            Team::Two => self.m2 * self.horizon,
        }
    }

    pub fn costs(&self, team: Team) -> &StageCosts<T> {
        match team {
            Team::One => &self.cost1,
            Team::Two => &self.cost2,
        }
    }

    pub fn structure(&self, team: Team) -> &StructureSpec {
        match team {
            Team::One => &self.structure1,
            Team::Two => &self.structure2,
        }
    }

    pub fn input_dim(&self, team: Team) -> usize {
        match team {
            Team::One => self.m1,
            Team::Two => self.m2,
        }
    }
}

/// Outcome of [`validate`]: the list of violated invariants, empty when the
/// instance is well formed.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

// ---------------------------------------------------------------------------
// JSON schema (raw serde layer)
// ---------------------------------------------------------------------------

type RawMatrix = Vec<Vec<f64>>;

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixOrSeq {
    One(RawMatrix),
    Seq(Vec<RawMatrix>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCost {
    #[serde(rename = "M")]
    m: MatrixOrSeq,
    #[serde(rename = "R")]
    r: MatrixOrSeq,
    #[serde(rename = "V")]
    v: MatrixOrSeq,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawStructure {
    Name(String),
    Detailed(RawDetailedStructure),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind")]
enum RawDetailedStructure {
    #[serde(rename = "1SDIS")]
    DelayedSharing { own: Vec<usize> },
    #[serde(rename = "DP1")]
    Decentralized { own: Vec<usize> },
    #[serde(rename = "explicit")]
    Explicit { mask: Vec<Vec<u8>> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    n: usize,
    m1: usize,
    m2: usize,
    #[serde(rename = "N")]
    horizon: usize,
    #[serde(rename = "A")]
    a: RawMatrix,
    #[serde(rename = "B1")]
    b1: RawMatrix,
    #[serde(rename = "B2")]
    b2: RawMatrix,
    #[serde(rename = "Sigma0")]
    sigma0: RawMatrix,
    #[serde(rename = "SigmaT")]
    sigma_t: MatrixOrSeq,
    #[serde(default)]
    zero_sum: bool,
    cost1: RawCost,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost2: Option<RawCost>,
    structure1: RawStructure,
    structure2: RawStructure,
}

fn matrix_from_raw<T: Real>(name: &str, raw: &RawMatrix, rows: usize, cols: usize) -> Result<DMatrix<T>> {
    if raw.len() != rows || raw.iter().any(|r| r.len() != cols) {
        let got_rows = raw.len();
        let got_cols = raw.first().map_or(0, Vec::len);
        return Err(Error::Dimension(format!(
            "{name} must be {rows}x{cols}, got {got_rows}x{got_cols}"
        )));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| scalar(raw[i][j])))
}

fn broadcast<T: Real>(
    name: &str,
    raw: &MatrixOrSeq,
    stages: usize,
    rows: usize,
    cols: usize,
) -> Result<Vec<DMatrix<T>>> {
    match raw {
        MatrixOrSeq::One(m) => {
            let m = matrix_from_raw(name, m, rows, cols)?;
            Ok(vec![m; stages])
        }
        MatrixOrSeq::Seq(ms) => {
            if ms.len() != stages {
                return Err(Error::Dimension(format!(
                    "{name} must list {stages} stage matrices, got {}",
                    ms.len()
                )));
            }
            ms.iter()
                .enumerate()
                .map(|(t, m)| matrix_from_raw(&format!("{name}[{t}]"), m, rows, cols))
                .collect()
        }
    }
}

fn cost_from_raw<T: Real>(
    label: &str,
    raw: &RawCost,
    horizon: usize,
    n: usize,
    m1: usize,
    m2: usize,
) -> Result<StageCosts<T>> {
    Ok(StageCosts {
        state: broadcast(&format!("{label}.M"), &raw.m, horizon, n, n)?,
        input_u: broadcast(&format!("{label}.R"), &raw.r, horizon, m1, m1)?,
        input_v: broadcast(&format!("{label}.V"), &raw.v, horizon, m2, m2)?,
    })
}

fn structure_from_raw(label: &str, raw: &RawStructure, n: usize) -> Result<StructureSpec> {
    let mut check_own = |own: &[usize], kind: &str| -> Result<Vec<usize>> {
        if own.is_empty() {
            return Err(Error::Schema(format!(
                "{label}: {kind} needs a nonempty `own` coordinate set"
            )));
        }
        if let Some(&bad) = own.iter().find(|&&c| c >= n) {
            return Err(Error::Schema(format!(
                "{label}: own coordinate {bad} out of range for state dimension {n}"
            )));
        }
        let mut own = own.to_vec();
        own.sort_unstable();
        own.dedup();
        Ok(own)
    };
    match raw {
        RawStructure::Name(name) if name == "FI" => Ok(StructureSpec::FullInformation),
        RawStructure::Name(name) => Err(Error::Schema(format!(
            "{label}: unknown structure name {name:?} (expected \"FI\" or a tagged object)"
        ))),
        RawStructure::Detailed(RawDetailedStructure::DelayedSharing { own }) => {
            Ok(StructureSpec::DelayedSharing { own: check_own(own, "1SDIS")? })
        }
        RawStructure::Detailed(RawDetailedStructure::Decentralized { own }) => {
            Ok(StructureSpec::Decentralized { own: check_own(own, "DP1")? })
        }
        RawStructure::Detailed(RawDetailedStructure::Explicit { mask }) => {
            if mask.iter().flatten().any(|&e| e > 1) {
                return Err(Error::Schema(format!(
                    "{label}: explicit mask entries must be 0 or 1"
                )));
            }
            Ok(StructureSpec::Explicit { mask: mask.clone() })
        }
    }
}

/// Parses and fully validates a JSON instance document.
pub fn parse_instance<T: Real>(text: &str) -> Result<ProblemInstance<T>> {
    let raw: RawInstance =
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let (n, m1, m2, horizon) = (raw.n, raw.m1, raw.m2, raw.horizon);
    if n == 0 || m1 == 0 || m2 == 0 {
        return Err(Error::Schema(
            "dimensions n, m1, m2 must all be at least 1".into(),
        ));
    }
    if horizon == 0 {
        return Err(Error::Validation("horizon must be >= 1".into()));
    }

    let cost1 = cost_from_raw("cost1", &raw.cost1, horizon, n, m1, m2)?;
    let cost2 = match (&raw.cost2, raw.zero_sum) {
        (Some(_), true) => {
            return Err(Error::Schema(
                "cost2 must be omitted when zero_sum is set (it is derived as -cost1)".into(),
            ))
        }
        (Some(c), false) => cost_from_raw("cost2", c, horizon, n, m1, m2)?,
        (None, true) => cost1.negated(),
        (None, false) => {
            return Err(Error::Schema(
                "missing field `cost2` (required unless zero_sum is set)".into(),
            ))
        }
    };

    let instance = ProblemInstance {
        n,
        m1,
        m2,
        horizon,
        a: matrix_from_raw("A", &raw.a, n, n)?,
        b1: matrix_from_raw("B1", &raw.b1, n, m1)?,
        b2: matrix_from_raw("B2", &raw.b2, n, m2)?,
        sigma0: matrix_from_raw("Sigma0", &raw.sigma0, n, n)?,
        sigma_w: broadcast("SigmaT", &raw.sigma_t, horizon, n, n)?,
        zero_sum: raw.zero_sum,
        cost1,
        cost2,
        structure1: structure_from_raw("structure1", &raw.structure1, n)?,
        structure2: structure_from_raw("structure2", &raw.structure2, n)?,
    };

    match first_violation(&instance) {
        None => Ok(instance),
        Some(v) => Err(v.into_error()),
    }
}

/// Reports every violated instance invariant; an empty report means valid.
pub fn validate<T: Real>(instance: &ProblemInstance<T>) -> ValidationReport {
    ValidationReport {
        violations: violations(instance).iter().map(Violation::to_string).collect(),
    }
}

/// Serializes a validated instance back to its JSON document form.
///
/// Stage lists whose matrices all coincide are written in the scalar shorthand
/// (a single matrix); re-parsing the output reproduces the instance exactly.
pub fn serialize_instance<T: Real>(instance: &ProblemInstance<T>) -> String {
    let mat = |m: &DMatrix<T>| -> RawMatrix {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| to_f64(m[(i, j)])).collect())
            .collect()
    };
    let seq = |ms: &[DMatrix<T>]| -> MatrixOrSeq {
        if ms.windows(2).all(|w| w[0] == w[1]) && !ms.is_empty() {
            MatrixOrSeq::One(mat(&ms[0]))
        } else {
            MatrixOrSeq::Seq(ms.iter().map(mat).collect())
        }
    };
    let cost = |c: &StageCosts<T>| RawCost {
        m: seq(&c.state),
        r: seq(&c.input_u),
        v: seq(&c.input_v),
    };
    let structure = |s: &StructureSpec| match s {
        StructureSpec::FullInformation => RawStructure::Name("FI".into()),
        StructureSpec::DelayedSharing { own } => {
            RawStructure::Detailed(RawDetailedStructure::DelayedSharing { own: own.clone() })
        }
        StructureSpec::Decentralized { own } => {
            RawStructure::Detailed(RawDetailedStructure::Decentralized { own: own.clone() })
        }
        StructureSpec::Explicit { mask } => {
            RawStructure::Detailed(RawDetailedStructure::Explicit { mask: mask.clone() })
        }
    };
    let raw = RawInstance {
        n: instance.n,
        m1: instance.m1,
        m2: instance.m2,
        horizon: instance.horizon,
        a: mat(&instance.a),
        b1: mat(&instance.b1),
        b2: mat(&instance.b2),
        sigma0: mat(&instance.sigma0),
        sigma_t: seq(&instance.sigma_w),
        zero_sum: instance.zero_sum,
        cost1: cost(&instance.cost1),
        cost2: if instance.zero_sum {
            None
        } else {
            Some(cost(&instance.cost2))
        },
        structure1: structure(&instance.structure1),
        structure2: structure(&instance.structure2),
    };
    serde_json::to_string_pretty(&raw).expect("instance serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Invariant checking
// ---------------------------------------------------------------------------

enum Violation {
    BadHorizon,
    NotPd { name: String, min_eig: f64, max_eig: f64 },
    Asymmetric { name: String },
    BadMaskShape { name: String, rows: usize, cols: usize, want_rows: usize, want_cols: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::BadHorizon => write!(f, "horizon must be >= 1"),
            Violation::NotPd { name, min_eig, max_eig } => write!(
                f,
                "{name} is not positive definite (min eigenvalue {min_eig:e}, max eigenvalue {max_eig:e})"
            ),
            Violation::Asymmetric { name } => write!(f, "{name} is not symmetric"),
            Violation::BadMaskShape { name, rows, cols, want_rows, want_cols } => write!(
                f,
                "{name} explicit mask must be {want_rows}x{want_cols}, got {rows}x{cols}"
            ),
        }
    }
}

impl Violation {
    fn into_error(self) -> Error {
        match self {
            Violation::NotPd { name, min_eig, max_eig } => {
                Error::NotPositiveDefinite { name, min_eig, max_eig }
            }
            other => Error::Validation(other.to_string()),
        }
    }
}

/// Relative eigenvalue floor below which a covariance counts as degenerate.
const PD_RELATIVE_FLOOR: f64 = 1e-12;

fn is_symmetric<T: Real>(m: &DMatrix<T>) -> bool {
    (0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

fn pd_violation<T: Real>(name: &str, m: &DMatrix<T>) -> Option<Violation> {
    let sym = (m + m.transpose()).scale(scalar(0.5));
    let eigs = sym.symmetric_eigen().eigenvalues;
    let min_eig = to_f64(eigs.iter().copied().fold(T::max_value().unwrap(), T::min));
    let max_eig = to_f64(eigs.iter().copied().fold(T::min_value().unwrap(), T::max));
    if min_eig <= PD_RELATIVE_FLOOR * max_eig.abs() || max_eig <= 0.0 {
        Some(Violation::NotPd { name: name.into(), min_eig, max_eig })
    } else {
        None
    }
}

fn violations<T: Real>(instance: &ProblemInstance<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    if instance.horizon == 0 {
        out.push(Violation::BadHorizon);
        return out;
    }
    if !is_symmetric(&instance.sigma0) {
        out.push(Violation::Asymmetric { name: "Sigma0".into() });
    } else if let Some(v) = pd_violation("Sigma0", &instance.sigma0) {
        out.push(v);
    }
    for (t, s) in instance.sigma_w.iter().enumerate() {
        let name = format!("SigmaT[{t}]");
        if !is_symmetric(s) {
            out.push(Violation::Asymmetric { name });
        } else if let Some(v) = pd_violation(&name, s) {
            out.push(v);
        }
    }
    for (label, cost) in [("cost1", &instance.cost1), ("cost2", &instance.cost2)] {
        for (k, m) in cost.state.iter().enumerate() {
            if !is_symmetric(m) {
                out.push(Violation::Asymmetric { name: format!("{label}.M({})", k + 1) });
            }
        }
        for (t, r) in cost.input_u.iter().enumerate() {
            if !is_symmetric(r) {
                out.push(Violation::Asymmetric { name: format!("{label}.R({t})") });
            }
        }
        for (t, v) in cost.input_v.iter().enumerate() {
            if !is_symmetric(v) {
                out.push(Violation::Asymmetric { name: format!("{label}.V({t})") });
            }
        }
    }
    for (label, spec, m) in [
        ("structure1", &instance.structure1, instance.m1),
        ("structure2", &instance.structure2, instance.m2),
    ] {
        if let StructureSpec::Explicit { mask } = spec {
            let want_rows = m * instance.horizon;
            let want_cols = instance.n * (instance.horizon + 1);
            let rows = mask.len();
            let cols = mask.first().map_or(0, Vec::len);
            if rows != want_rows || mask.iter().any(|r| r.len() != want_cols) {
                out.push(Violation::BadMaskShape {
                    name: label.into(),
                    rows,
                    cols,
                    want_rows,
                    want_cols,
                });
            }
        }
    }
    out
}

fn first_violation<T: Real>(instance: &ProblemInstance<T>) -> Option<Violation> {
    violations(instance).into_iter().next()
}

/// Two-buffer zero-sum transfer game over ten stages, used across the unit
/// tests.
#[cfg(test)]
pub(crate) fn zerosum_json() -> &'static str {
    r#"{
        "n": 2, "m1": 1, "m2": 1, "N": 10,
        "A": [[1.0, 0.0], [0.0, 1.0]],
        "B1": [[-1.0], [1.0]],
        "B2": [[0.0], [-1.0]],
        "Sigma0": [[1.0, 0.0], [0.0, 1.0]],
        "SigmaT": [[1.0, 0.0], [0.0, 1.0]],
        "zero_sum": true,
        "cost1": {"M": [[2.0, 0.0], [0.0, -1.0]], "R": [[1.0]], "V": [[-2.0]]},
        "structure1": "FI",
        "structure2": "FI"
    }"#
}

/// Single-state two-stage instance used across the unit tests.
#[cfg(test)]
pub(crate) fn counterexample_json() -> &'static str {
    r#"{
        "n": 1, "m1": 1, "m2": 1, "N": 2,
        "A": [[2.0]], "B1": [[0.4]], "B2": [[0.1]],
        "Sigma0": [[1.0]], "SigmaT": [[1.0]],
        "zero_sum": false,
        "cost1": {"M": [[1.0]], "R": [[1.0]], "V": [[1.0]]},
        "cost2": {"M": [[70.0]], "R": [[1.0]], "V": [[1.0]]},
        "structure1": "FI",
        "structure2": "FI"
    }"#
}
