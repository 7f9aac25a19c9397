//! Information structures as boolean sparsity patterns, plus the structural
//! tests the equilibrium theory rests on: causality, quadratic invariance of a
//! single team, and mutual quadratic invariance of the pair.
//!
//! Everything here works over the boolean semiring on worst-case supports, so
//! a verdict never depends on lucky numeric cancellation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{ProblemInstance, StructureSpec, Team};
use crate::scalar::Real;

/// Dense boolean matrix with the semiring (or, and) product.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoolMat {
    nrows: usize,
    ncols: usize,
    data: Vec<bool>,
}

impl BoolMat {
    pub fn zeros(nrows: usize, ncols: usize) -> BoolMat {
        BoolMat { nrows, ncols, data: vec![false; nrows * ncols] }
    }

    pub fn identity(dim: usize) -> BoolMat {
        let mut out = BoolMat::zeros(dim, dim);
        for i in 0..dim {
            out.set(i, i, true);
        }
        out
    }

    /// Support of a numeric matrix: true wherever the entry is nonzero.
    pub fn support<T: Real>(m: &DMatrix<T>) -> BoolMat {
        let mut out = BoolMat::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, m[(i, j)] != T::zero());
            }
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.ncols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.data[i * self.ncols + j] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn or_assign(&mut self, other: &BoolMat) {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a |= *b;
        }
    }

    /// Boolean matrix product: out[i,j] = OR_k self[i,k] AND other[k,j].
    pub fn mul(&self, other: &BoolMat) -> BoolMat {
        assert_eq!(self.ncols, other.nrows, "boolean product shape mismatch");
        let mut out = BoolMat::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                if self.get(i, k) {
                    for j in 0..other.ncols {
                        if other.get(k, j) {
                            out.set(i, j, true);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn subset_of(&self, other: &BoolMat) -> bool {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// Rows of `self` stacked above rows of `other`.
    pub fn vstack(&self, other: &BoolMat) -> BoolMat {
        assert_eq!(self.ncols, other.ncols);
        let mut out = BoolMat::zeros(self.nrows + other.nrows, self.ncols);
        out.data[..self.data.len()].copy_from_slice(&self.data);
        out.data[self.data.len()..].copy_from_slice(&other.data);
        out
    }

    /// Columns of `self` followed by columns of `other`.
    pub fn hstack(&self, other: &BoolMat) -> BoolMat {
        assert_eq!(self.nrows, other.nrows);
        let mut out = BoolMat::zeros(self.nrows, self.ncols + other.ncols);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                out.set(i, j, self.get(i, j));
            }
            for j in 0..other.ncols {
                out.set(i, self.ncols + j, other.get(i, j));
            }
        }
        out
    }
}

/// Sparsity pattern of one team's strategy map.
///
/// Row `j` is input coordinate `j % m` at stage `floor(j / m)`; column `k` is
/// state coordinate `k % n` at stage `floor(k / n)`. A set entry means the
/// input coordinate may depend on that state coordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    mask: BoolMat,
    n: usize,
    m: usize,
    horizon: usize,
}

impl Pattern {
    fn build(n: usize, m: usize, horizon: usize, f: impl Fn(usize, usize, usize, usize) -> bool) -> Pattern {
        let mut mask = BoolMat::zeros(m * horizon, n * (horizon + 1));
        for j in 0..m * horizon {
            let (t_u, cu) = (j / m, j % m);
            for k in 0..n * (horizon + 1) {
                let (t_x, cx) = (k / n, k % n);
                mask.set(j, k, f(t_u, cu, t_x, cx));
            }
        }
        Pattern { mask, n, m, horizon }
    }

    /// Inputs may depend on every past and present state coordinate.
    pub fn full_information(n: usize, m: usize, horizon: usize) -> Pattern {
        Pattern::build(n, m, horizon, |t_u, _, t_x, _| t_x <= t_u)
    }

    /// Full access to strictly past states; at the current time only the
    /// `own` coordinates are visible (one-step-delayed sharing of the rest).
    pub fn delayed_sharing(n: usize, m: usize, horizon: usize, own: &[usize]) -> Result<Pattern> {
        check_own(n, own)?;
        Ok(Pattern::build(n, m, horizon, |t_u, _, t_x, cx| {
            t_x < t_u || (t_x == t_u && own.contains(&cx))
        }))
    }

    /// Inputs may depend only on the `own` state coordinates, at any past or
    /// present time.
    pub fn decentralized(n: usize, m: usize, horizon: usize, own: &[usize]) -> Result<Pattern> {
        check_own(n, own)?;
        Ok(Pattern::build(n, m, horizon, |t_u, _, t_x, cx| {
            t_x <= t_u && own.contains(&cx)
        }))
    }

    /// Pattern from an explicit 0/1 mask in the same row/column layout.
    pub fn explicit(n: usize, m: usize, horizon: usize, rows: &[Vec<u8>]) -> Result<Pattern> {
        let (want_rows, want_cols) = (m * horizon, n * (horizon + 1));
        if rows.len() != want_rows || rows.iter().any(|r| r.len() != want_cols) {
            return Err(Error::Dimension(format!(
                "explicit mask must be {want_rows}x{want_cols}, got {}x{}",
                rows.len(),
                rows.first().map_or(0, Vec::len)
            )));
        }
        let mut mask = BoolMat::zeros(want_rows, want_cols);
        for (j, row) in rows.iter().enumerate() {
            for (k, &e) in row.iter().enumerate() {
                if e > 1 {
                    return Err(Error::Structure(format!(
                        "explicit mask entry at ({j},{k}) must be 0 or 1, got {e}"
                    )));
                }
                mask.set(j, k, e == 1);
            }
        }
        Ok(Pattern { mask, n, m, horizon })
    }

    /// Realizes a declared information structure as a concrete pattern.
    pub fn from_spec(spec: &StructureSpec, n: usize, m: usize, horizon: usize) -> Result<Pattern> {
        match spec {
            StructureSpec::FullInformation => Ok(Pattern::full_information(n, m, horizon)),
            StructureSpec::DelayedSharing { own } => Pattern::delayed_sharing(n, m, horizon, own),
            StructureSpec::Decentralized { own } => Pattern::decentralized(n, m, horizon, own),
            StructureSpec::Explicit { mask } => Pattern::explicit(n, m, horizon, mask),
        }
    }

    /// The pattern a team declares in the given instance.
    pub fn from_instance<T: Real>(instance: &ProblemInstance<T>, team: Team) -> Result<Pattern> {
        Pattern::from_spec(
            instance.structure(team),
            instance.n,
            instance.input_dim(team),
            instance.horizon,
        )
    }

    /// Numeric support of a strategy matrix, tagged with the block layout.
    pub fn from_support<T: Real>(m: &DMatrix<T>, n: usize, inputs: usize, horizon: usize) -> Pattern {
        assert_eq!(m.nrows(), inputs * horizon);
        assert_eq!(m.ncols(), n * (horizon + 1));
        Pattern { mask: BoolMat::support(m), n, m: inputs, horizon }
    }

    pub fn mask(&self) -> &BoolMat {
        &self.mask
    }

    pub fn nrows(&self) -> usize {
        self.mask.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.mask.ncols()
    }

    pub fn get(&self, j: usize, k: usize) -> bool {
        self.mask.get(j, k)
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Stage of the input a row belongs to.
    pub fn input_stage(&self, row: usize) -> usize {
        row / self.m
    }

    /// Stage of the state a column belongs to.
    pub fn state_stage(&self, col: usize) -> usize {
        col / self.n
    }

    /// Set entries in row-major order.
    pub fn support_entries(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.mask.count_ones());
        for j in 0..self.nrows() {
            for k in 0..self.ncols() {
                if self.get(j, k) {
                    out.push((j, k));
                }
            }
        }
        out
    }

    pub fn count_ones(&self) -> usize {
        self.mask.count_ones()
    }

    /// Copy of `m` with every off-support entry forced to exact zero.
    pub fn project<T: Real>(&self, m: &DMatrix<T>) -> DMatrix<T> {
        assert_eq!((m.nrows(), m.ncols()), (self.nrows(), self.ncols()));
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            if self.get(i, j) { m[(i, j)] } else { T::zero() }
        })
    }

    /// Largest magnitude among off-support entries of `m`.
    pub fn off_support_max<T: Real>(&self, m: &DMatrix<T>) -> T {
        assert_eq!((m.nrows(), m.ncols()), (self.nrows(), self.ncols()));
        let mut worst = T::zero();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if !self.get(i, j) {
                    worst = worst.max(m[(i, j)].abs());
                }
            }
        }
        worst
    }

    /// First entry letting an input read a future state, if any.
    pub fn causality_violation(&self) -> Option<(usize, usize)> {
        for j in 0..self.nrows() {
            for k in 0..self.ncols() {
                if self.get(j, k) && self.state_stage(k) > self.input_stage(j) {
                    return Some((j, k));
                }
            }
        }
        None
    }

    pub fn is_causal(&self) -> bool {
        self.causality_violation().is_none()
    }

    pub fn is_subset_of(&self, other: &Pattern) -> bool {
        self.mask.subset_of(&other.mask)
    }

    /// Star/dot grid, one text row per input coordinate.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for j in 0..self.nrows() {
            for k in 0..self.ncols() {
                out.push(if self.get(j, k) { '*' } else { '0' });
                if k + 1 < self.ncols() && (k + 1) % self.n == 0 {
                    out.push(' ');
                }
            }
            out.push('\n');
        }
        out
    }
}

fn check_own(n: usize, own: &[usize]) -> Result<()> {
    if own.is_empty() {
        return Err(Error::Structure(
            "own coordinate set must be nonempty".into(),
        ));
    }
    if let Some(&bad) = own.iter().find(|&&c| c >= n) {
        return Err(Error::Structure(format!(
            "own coordinate {bad} out of range for state dimension {n}"
        )));
    }
    Ok(())
}

/// Worst-case supports of the disturbance-to-state and input-to-state maps of
/// the lifted plant, computed from the supports of `A`, `B1`, `B2` alone.
///
/// Returns `(p12, p13)`, each of shape `n(N+1) x (m_i N)` with rows indexing
/// lifted states and columns indexing lifted inputs.
pub fn structural_plant<T: Real>(instance: &ProblemInstance<T>) -> (BoolMat, BoolMat) {
    let n = instance.n;
    let big_n = instance.horizon;
    let dim_x = n * (big_n + 1);
    let a_hat = BoolMat::support(&instance.a);

    // Support of (I - ZA)^{-1} as the finite Neumann sum of powers of the
    // block-subdiagonal shift-times-A map.
    let mut za = BoolMat::zeros(dim_x, dim_x);
    for t in 0..big_n {
        for i in 0..n {
            for j in 0..n {
                if a_hat.get(i, j) {
                    za.set((t + 1) * n + i, t * n + j, true);
                }
            }
        }
    }
    let mut p11 = BoolMat::identity(dim_x);
    let mut power = BoolMat::identity(dim_x);
    for _ in 0..big_n {
        power = za.mul(&power);
        p11.or_assign(&power);
    }

    let lifted_input = |b: &DMatrix<T>, m: usize| -> BoolMat {
        let b_hat = BoolMat::support(b);
        // Z*B places B's support at row block t+1, column block t.
        let mut zb = BoolMat::zeros(dim_x, m * big_n);
        for t in 0..big_n {
            for i in 0..n {
                for j in 0..m {
                    if b_hat.get(i, j) {
                        zb.set((t + 1) * n + i, t * m + j, true);
                    }
                }
            }
        }
        p11.mul(&zb)
    };

    (
        lifted_input(&instance.b1, instance.m1),
        lifted_input(&instance.b2, instance.m2),
    )
}

/// One entry the closure adds outside the declared pattern, together with a
/// path that produces it: the input `input_row` reads state `via_state`, which
/// is driven by input `via_input`, which in turn reads state `state_col`.
///
/// Row indices refer to the stacked pattern (team 1 rows first, then team 2).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MqiViolation {
    pub input_row: usize,
    pub state_col: usize,
    pub via_state: usize,
    pub via_input: usize,
}

/// Verdict of the mutual quadratic invariance test.
#[derive(Clone, Debug)]
pub struct MqiReport {
    pub holds: bool,
    /// At most [`MqiReport::MAX_VIOLATIONS`] offending entries.
    pub violations: Vec<MqiViolation>,
    /// True when more violations exist than were listed.
    pub truncated: bool,
    // Block layout, kept so describe() can translate stacked indices back to
    // coordinate/stage names.
    n: usize,
    m1: usize,
    m2: usize,
    horizon: usize,
}

impl MqiReport {
    pub const MAX_VIOLATIONS: usize = 20;

    /// Human-readable rendering of one violation's dependency path.
    pub fn describe(&self, v: &MqiViolation) -> String {
        let team1_rows = self.m1 * self.horizon;
        let input = |row: usize| -> String {
            if row < team1_rows {
                let (t, c) = (row / self.m1, row % self.m1);
                if self.m1 == 1 { format!("u({t})") } else { format!("u{c}({t})") }
            } else {
                let row = row - team1_rows;
                let (t, c) = (row / self.m2, row % self.m2);
                if self.m2 == 1 { format!("v({t})") } else { format!("v{c}({t})") }
            }
        };
        let state = |col: usize| -> String {
            let (t, c) = (col / self.n, col % self.n);
            if self.n == 1 { format!("x({t})") } else { format!("x{c}({t})") }
        };
        format!(
            "{} <- {} <- {} <- {}",
            input(v.input_row),
            state(v.via_state),
            input(v.via_input),
            state(v.state_col)
        )
    }

    fn new(n: usize, m1: usize, m2: usize, horizon: usize) -> MqiReport {
        MqiReport {
            holds: true,
            violations: Vec::new(),
            truncated: false,
            n,
            m1,
            m2,
            horizon,
        }
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::json!({
            "holds": self.holds,
            "truncated": self.truncated,
            "violations": self
                .violations
                .iter()
                .map(|v| {
                    serde_json::json!({
                        "input_row": v.input_row,
                        "state_col": v.state_col,
                        "via_state": v.via_state,
                        "via_input": v.via_input,
                        "path": self.describe(v),
                    })
                })
                .collect::<Vec<_>>(),
        })
    }
}

/// Tests mutual quadratic invariance of the pair `(s1, s2)` with respect to
/// the structural plant `(p12, p13)`.
///
/// The stacked pattern `S = [S1; S2]` and stacked plant `P = [P12 P13]` must
/// satisfy `S P S` inside `S` over the boolean semiring; any entry the closure
/// adds outside `S` is reported with a witnessing dependency path.
pub fn is_mqi(s1: &Pattern, s2: &Pattern, p12: &BoolMat, p13: &BoolMat) -> Result<MqiReport> {
    let dim_x = s1.ncols();
    if s2.ncols() != dim_x {
        return Err(Error::Dimension(format!(
            "pattern column counts disagree: {} vs {}",
            dim_x,
            s2.ncols()
        )));
    }
    if p12.nrows() != dim_x || p13.nrows() != dim_x {
        return Err(Error::Dimension(format!(
            "plant supports must have {dim_x} rows, got {} and {}",
            p12.nrows(),
            p13.nrows()
        )));
    }
    if p12.ncols() != s1.nrows() || p13.ncols() != s2.nrows() {
        return Err(Error::Dimension(format!(
            "plant supports must have {}/{} columns, got {}/{}",
            s1.nrows(),
            s2.nrows(),
            p12.ncols(),
            p13.ncols()
        )));
    }

    let s = s1.mask().vstack(s2.mask());
    let p = p12.hstack(p13);
    let closure = s.mul(&p).mul(&s);

    let mut report = MqiReport::new(s1.state_dim(), s1.input_dim(), s2.input_dim(), s1.horizon());
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            if closure.get(i, j) && !s.get(i, j) {
                report.holds = false;
                if report.violations.len() == MqiReport::MAX_VIOLATIONS {
                    report.truncated = true;
                    return Ok(report);
                }
                let witness = find_witness(&s, &p, i, j)
                    .expect("closure entry must have a generating path");
                report.violations.push(MqiViolation {
                    input_row: i,
                    state_col: j,
                    via_state: witness.0,
                    via_input: witness.1,
                });
            }
        }
    }
    Ok(report)
}

fn find_witness(s: &BoolMat, p: &BoolMat, i: usize, j: usize) -> Option<(usize, usize)> {
    for l in 0..p.nrows() {
        if !s.get(i, l) {
            continue;
        }
        for k in 0..p.ncols() {
            if p.get(l, k) && s.get(k, j) {
                return Some((l, k));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_instance;

    fn rows(p: &Pattern) -> Vec<String> {
        (0..p.nrows())
            .map(|j| {
                (0..p.ncols())
                    .map(|k| if p.get(j, k) { '1' } else { '0' })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn full_information_blocks() {
        let p = Pattern::full_information(2, 1, 2);
        assert_eq!(rows(&p), vec!["110000", "111100"]);
        assert!(p.is_causal());
        let scalar = Pattern::full_information(1, 1, 1);
        assert_eq!(rows(&scalar), vec!["10"]);
    }

    #[test]
    fn delayed_sharing_masks_current_foreign_coordinates() {
        let p = Pattern::delayed_sharing(2, 1, 2, &[0]).unwrap();
        assert_eq!(rows(&p), vec!["100000", "111000"]);
        let q = Pattern::delayed_sharing(2, 1, 2, &[1]).unwrap();
        assert_eq!(rows(&q), vec!["010000", "110100"]);
        let all = Pattern::delayed_sharing(2, 1, 2, &[0, 1]).unwrap();
        assert_eq!(all, Pattern::full_information(2, 1, 2));
        assert!(Pattern::delayed_sharing(2, 1, 2, &[]).is_err());
    }

    #[test]
    fn decentralized_keeps_own_coordinates_only() {
        let p = Pattern::decentralized(2, 1, 2, &[0]).unwrap();
        assert_eq!(rows(&p), vec!["100000", "101000"]);
        assert!(p.is_causal());
        let all = Pattern::decentralized(2, 1, 2, &[0, 1]).unwrap();
        assert_eq!(all, Pattern::full_information(2, 1, 2));
    }

    #[test]
    fn builders_nest() {
        let dp = Pattern::decentralized(3, 2, 3, &[1]).unwrap();
        let ds = Pattern::delayed_sharing(3, 2, 3, &[1]).unwrap();
        let fi = Pattern::full_information(3, 2, 3);
        assert!(dp.is_subset_of(&ds));
        assert!(ds.is_subset_of(&fi));
    }

    #[test]
    fn causality_violation_location() {
        // u(0) reading x(1)
        let p = Pattern::explicit(1, 1, 1, &[vec![0, 1]]).unwrap();
        assert_eq!(p.causality_violation(), Some((0, 1)));
        let zero = Pattern::explicit(1, 1, 1, &[vec![0, 0]]).unwrap();
        assert!(zero.is_causal());
        let wrong_width = Pattern::explicit(1, 1, 1, &[vec![0, 0, 0]]);
        assert!(matches!(wrong_width, Err(Error::Dimension(_))));
    }

    fn chain_instance(a: f64, b1: f64, b2: f64, n_stages: usize) -> crate::model::ProblemInstance<f64> {
        let doc = format!(
            r#"{{
                "n": 1, "m1": 1, "m2": 1, "N": {n_stages},
                "A": [[{a}]], "B1": [[{b1}]], "B2": [[{b2}]],
                "Sigma0": [[1.0]], "SigmaT": [[1.0]],
                "cost1": {{"M": [[1.0]], "R": [[1.0]], "V": [[1.0]]}},
                "cost2": {{"M": [[1.0]], "R": [[1.0]], "V": [[1.0]]}},
                "structure1": "FI", "structure2": "FI"
            }}"#
        );
        parse_instance(&doc).unwrap()
    }

    #[test]
    fn structural_plant_of_scalar_chain() {
        let (p12, _) = structural_plant(&chain_instance(1.0, 1.0, 1.0, 2));
        let want = [[false, false], [true, false], [true, true]];
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(p12.get(i, j), want[i][j], "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn zero_input_matrix_gives_empty_support() {
        let (p12, p13) = structural_plant(&chain_instance(1.0, 0.0, 1.0, 2));
        assert_eq!(p12.count_ones(), 0);
        assert!(p13.count_ones() > 0);
    }

    #[test]
    fn counterexample_plant_is_dense_below_diagonal() {
        let inst = parse_instance::<f64>(crate::model::counterexample_json()).unwrap();
        let (p12, p13) = structural_plant(&inst);
        for p in [&p12, &p13] {
            for i in 0..3 {
                for j in 0..2 {
                    assert_eq!(p.get(i, j), i > j, "entry ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn full_information_pair_is_mqi() {
        let inst = chain_instance(1.0, 1.0, 1.0, 3);
        let (p12, p13) = structural_plant(&inst);
        let fi = Pattern::full_information(1, 1, 3);
        let report = is_mqi(&fi, &fi, &p12, &p13).unwrap();
        assert!(report.holds);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn memoryless_pair_fails_with_witness_path() {
        let inst = chain_instance(1.0, 1.0, 1.0, 2);
        let (p12, p13) = structural_plant(&inst);
        // u(t) and v(t) may read x(t) only.
        let memoryless = Pattern::explicit(1, 1, 2, &[vec![1, 0, 0], vec![0, 1, 0]]).unwrap();
        let report = is_mqi(&memoryless, &memoryless, &p12, &p13).unwrap();
        assert!(!report.holds);
        let v = &report.violations[0];
        assert_eq!((v.input_row, v.state_col), (1, 0));
        assert_eq!(report.describe(v), "u(1) <- x(1) <- u(0) <- x(0)");
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let inst = chain_instance(1.0, 1.0, 1.0, 2);
        let (p12, p13) = structural_plant(&inst);
        let fi = Pattern::full_information(1, 1, 3);
        assert!(matches!(
            is_mqi(&fi, &fi, &p12, &p13),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn render_groups_stage_blocks() {
        let p = Pattern::full_information(2, 1, 1);
        assert_eq!(p.render(), "** 00\n");
    }
}
