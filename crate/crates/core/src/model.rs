//! The blendshape rig function and the matrices derived from it.
//!
//! Vertex coordinates are laid out as `[x_0, y_0, z_0, x_1, y_1, z_1, ...]`,
//! so vertex `l` owns rows `3l..3l + 3` of every mesh-sized vector.
//!
//! A rig evaluates as
//!
//! ```text
//! f(w) = b0 + sum_i w_i b_i + sum_{ids} (prod_{j in ids} w_j) b^{ids}
//! ```
//!
//! where the second sum runs over corrective terms of 2, 3 or 4 controllers.

use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// A corrective blendshape activated by the product of 2 to 4 controller weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectiveTerm {
    pub ids: Vec<usize>,
    pub offset: Vec<f64>,
}

impl CorrectiveTerm {
    pub fn new(mut ids: Vec<usize>, offset: Vec<f64>) -> Self {
        ids.sort_unstable();
        Self { ids, offset }
    }

    pub fn level(&self) -> usize {
        self.ids.len()
    }

    /// Product of the weights of every controller in the term except `skip`.
    #[inline]
    fn partner_product(&self, w: &[f64], skip: usize) -> f64 {
        self.ids
            .iter()
            .filter(|&&j| j != skip)
            .map(|&j| w[j])
            .product()
    }

    #[inline]
    fn activation(&self, w: &[f64]) -> f64 {
        self.ids.iter().map(|&j| w[j]).product()
    }
}

/// Neutral mesh, linear basis and corrective terms of a facial rig.
///
/// Immutable once built; every method is a pure function of the model data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct BlendshapeModel {
    n: usize,
    m: usize,
    neutral: Vec<f64>,
    /// Column-major `3n x m`.
    basis: Vec<f64>,
    correctives: Vec<CorrectiveTerm>,
    /// For every controller, the corrective terms that contain it.
    by_controller: Vec<Vec<usize>>,
    column_norms_sq: Vec<f64>,
}

impl BlendshapeModel {
    /// Builds a model from the neutral mesh, one vector per blendshape and
    /// the corrective terms. Validates every invariant.
    pub fn new(
        neutral: Vec<f64>,
        blendshapes: Vec<Vec<f64>>,
        correctives: Vec<CorrectiveTerm>,
    ) -> Result<Self> {
        if !neutral.len().is_multiple_of(3) {
            return Err(Error::InvalidModel(format!(
                "neutral length {} is not a multiple of 3",
                neutral.len()
            )));
        }
        let rows = neutral.len();
        let m = blendshapes.len();
        let mut basis = Vec::with_capacity(rows * m);
        for (i, b) in blendshapes.iter().enumerate() {
            if b.len() != rows {
                return Err(Error::InvalidModel(format!(
                    "blendshape {i} has length {}, expected {rows}",
                    b.len()
                )));
            }
            basis.extend_from_slice(b);
        }
        Self::from_columns(rows / 3, m, neutral, basis, correctives)
    }

    /// Builds a model from a column-major `3n x m` basis.
    pub fn from_columns(
        n: usize,
        m: usize,
        neutral: Vec<f64>,
        basis: Vec<f64>,
        correctives: Vec<CorrectiveTerm>,
    ) -> Result<Self> {
        let rows = 3 * n;
        check_len("neutral", rows, neutral.len())?;
        check_len("basis", rows * m, basis.len())?;
        if neutral.iter().chain(basis.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite mesh entry".into()));
        }

        let mut seen = BTreeSet::new();
        let mut by_controller = vec![Vec::new(); m];
        for (t, term) in correctives.iter().enumerate() {
            if !(2..=4).contains(&term.ids.len()) {
                return Err(Error::InvalidModel(format!(
                    "corrective {t} has {} ids, expected 2 to 4",
                    term.ids.len()
                )));
            }
            if term.ids.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::InvalidModel(format!(
                    "corrective {t} ids {:?} are not strictly increasing",
                    term.ids
                )));
            }
            if let Some(&bad) = term.ids.iter().find(|&&j| j >= m) {
                return Err(Error::InvalidModel(format!(
                    "corrective {t} references controller {bad} but m = {m}"
                )));
            }
            if term.offset.len() != rows {
                return Err(Error::InvalidModel(format!(
                    "corrective {t} offset has length {}, expected {rows}",
                    term.offset.len()
                )));
            }
            if term.offset.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "corrective {t} has a non-finite entry"
                )));
            }
            if !seen.insert(term.ids.clone()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate corrective tuple {:?}",
                    term.ids
                )));
            }
            for &j in &term.ids {
                by_controller[j].push(t);
            }
        }

        let column_norms_sq = (0..m)
            .map(|i| basis[i * rows..(i + 1) * rows].iter().map(|v| v * v).sum())
            .collect();

        Ok(Self {
            n,
            m,
            neutral,
            basis,
            correctives,
            by_controller,
            column_norms_sq,
        })
    }

    /// Vertex count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Controller count.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Length of every mesh vector, `3n`.
    pub fn rows(&self) -> usize {
        3 * self.n
    }

    pub fn neutral(&self) -> &[f64] {
        &self.neutral
    }

    /// Blendshape `i` as a `3n` slice.
    pub fn blendshape(&self, i: usize) -> &[f64] {
        let rows = self.rows();
        &self.basis[i * rows..(i + 1) * rows]
    }

    pub fn correctives(&self) -> &[CorrectiveTerm] {
        &self.correctives
    }

    /// Indices into [`Self::correctives`] of the terms containing controller `i`.
    pub fn correctives_of(&self, i: usize) -> &[usize] {
        &self.by_controller[i]
    }

    pub(crate) fn column_norm_sq(&self, i: usize) -> f64 {
        self.column_norms_sq[i]
    }

    /// Evaluates the rig at `w`. Weights are used as given; clamping them to
    /// the unit box is the caller's concern.
    pub fn evaluate(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("weights", self.m, w.len())?;
        let mut out = self.neutral.clone();
        self.accumulate(w, &mut out);
        Ok(out)
    }

    /// Adds every weighted term of the rig (everything except the neutral).
    pub(crate) fn accumulate(&self, w: &[f64], out: &mut [f64]) {
        for (i, &wi) in w.iter().enumerate() {
            if wi != 0.0 {
                axpy(wi, self.blendshape(i), out);
            }
        }
        for term in &self.correctives {
            let a = term.activation(w);
            if a != 0.0 {
                axpy(a, &term.offset, out);
            }
        }
    }

    /// Returns `g` with `f(w) = f(w with w_i = 0) + w_i * g`.
    ///
    /// Since every corrective tuple holds distinct controllers, the rig is
    /// affine in each single weight and `g` does not depend on `w_i`.
    pub fn controller_gradient(&self, w: &[f64], i: usize) -> Result<Vec<f64>> {
        check_len("weights", self.m, w.len())?;
        if i >= self.m {
            return Err(Error::IndexOutOfRange {
                what: "controller",
                index: i,
                len: self.m,
            });
        }
        let mut g = self.blendshape(i).to_vec();
        self.add_corrective_gradient(w, i, &mut g);
        Ok(g)
    }

    /// Adds the corrective contribution to the gradient of controller `i`;
    /// returns false when every term containing `i` is inactive.
    #[inline]
    pub(crate) fn add_corrective_gradient(&self, w: &[f64], i: usize, g: &mut [f64]) -> bool {
        let mut any = false;
        for &t in &self.by_controller[i] {
            let term = &self.correctives[t];
            let coef = term.partner_product(w, i);
            if coef != 0.0 {
                axpy(coef, &term.offset, g);
                any = true;
            }
        }
        any
    }

    #[inline]
    pub(crate) fn has_active_correctives(&self, w: &[f64], i: usize) -> bool {
        self.by_controller[i]
            .iter()
            .any(|&t| self.correctives[t].partner_product(w, i) != 0.0)
    }

    /// Offset matrix `D` (`n x m`): squared displacement norm of vertex `l`
    /// in blendshape `i`. Only the linear basis contributes.
    pub fn offset_matrix(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n, self.m));
        for i in 0..self.m {
            let b = self.blendshape(i);
            for (l, xyz) in b.chunks_exact(3).enumerate() {
                d[[l, i]] = xyz[0] * xyz[0] + xyz[1] * xyz[1] + xyz[2] * xyz[2];
            }
        }
        d
    }

    /// The basis rearranged into `n x 3m`: row `l` holds `(x, y, z)` of vertex
    /// `l` for each controller in turn.
    pub fn delta_matrix(&self) -> Array2<f64> {
        let mut delta = Array2::zeros((self.n, 3 * self.m));
        for i in 0..self.m {
            let b = self.blendshape(i);
            for (l, xyz) in b.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    delta[[l, 3 * i + c]] = xyz[c];
                }
            }
        }
        delta
    }

    /// Restricts the rig to a set of vertices and controllers.
    ///
    /// Corrective terms survive only when all of their controllers are
    /// retained; a term straddling two controller sets is dropped.
    pub fn restrict(&self, mesh_vertices: &[usize], controllers: &[usize]) -> Result<SubModel> {
        check_sorted_unique("vertex", mesh_vertices, self.n)?;
        check_sorted_unique("controller", controllers, self.m)?;

        let rows = 3 * mesh_vertices.len();
        let gather = |src: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(rows);
            for &l in mesh_vertices {
                out.extend_from_slice(&src[3 * l..3 * l + 3]);
            }
            out
        };

        let neutral = gather(&self.neutral);
        let mut basis = Vec::with_capacity(rows * controllers.len());
        for &j in controllers {
            basis.extend(gather(self.blendshape(j)));
        }

        let mut local_of = vec![usize::MAX; self.m];
        for (local, &j) in controllers.iter().enumerate() {
            local_of[j] = local;
        }
        let correctives = self
            .correctives
            .iter()
            .filter(|t| t.ids.iter().all(|&j| local_of[j] != usize::MAX))
            .map(|t| CorrectiveTerm {
                ids: t.ids.iter().map(|&j| local_of[j]).collect(),
                offset: gather(&t.offset),
            })
            .collect();

        let model = BlendshapeModel::from_columns(
            mesh_vertices.len(),
            controllers.len(),
            neutral,
            basis,
            correctives,
        )?;
        Ok(SubModel {
            parent_n: self.n,
            parent_m: self.m,
            mesh_vertices: mesh_vertices.to_vec(),
            controllers: controllers.to_vec(),
            model,
        })
    }
}

/// A rig restricted to one cluster's vertices and controllers.
#[derive(Debug, Clone, PartialEq)]
pub struct SubModel {
    pub parent_n: usize,
    pub parent_m: usize,
    pub mesh_vertices: Vec<usize>,
    pub controllers: Vec<usize>,
    pub model: BlendshapeModel,
}

impl SubModel {
    /// Selects the rows of a full-size mesh vector that belong to this cluster.
    pub fn restrict_target(&self, target: &[f64]) -> Result<Vec<f64>> {
        check_len("target", 3 * self.parent_n, target.len())?;
        let mut out = Vec::with_capacity(3 * self.mesh_vertices.len());
        for &l in &self.mesh_vertices {
            out.extend_from_slice(&target[3 * l..3 * l + 3]);
        }
        Ok(out)
    }

    /// Selects this cluster's controllers from a global weight vector.
    pub fn restrict_weights(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("weights", self.parent_m, w.len())?;
        Ok(self.controllers.iter().map(|&j| w[j]).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    m: usize,
    neutral: Vec<f64>,
    blendshapes: Vec<Vec<f64>>,
    #[serde(default)]
    correctives: Vec<CorrectiveTerm>,
}

impl TryFrom<ModelFile> for BlendshapeModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        check_len("neutral", 3 * file.n, file.neutral.len())?;
        check_len("blendshapes", file.m, file.blendshapes.len())?;
        BlendshapeModel::new(file.neutral, file.blendshapes, file.correctives)
    }
}

impl From<BlendshapeModel> for ModelFile {
    fn from(model: BlendshapeModel) -> Self {
        let blendshapes = (0..model.m).map(|i| model.blendshape(i).to_vec()).collect();
        ModelFile {
            n: model.n,
            m: model.m,
            neutral: model.neutral,
            blendshapes,
            correctives: model.correctives,
        }
    }
}

fn check_sorted_unique(what: &'static str, idx: &[usize], len: usize) -> Result<()> {
    if let Some(&bad) = idx.iter().find(|&&v| v >= len) {
        return Err(Error::IndexOutOfRange {
            what,
            index: bad,
            len,
        });
    }
    if idx.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::InvalidArgument(format!(
            "{what} indices must be sorted and unique"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_model() -> BlendshapeModel {
        BlendshapeModel::new(
            vec![0.0; 3],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            vec![CorrectiveTerm::new(vec![0, 1], vec![0.0, 0.0, 1.0])],
        )
        .unwrap()
    }

    /// Term-by-term expansion, independent of `accumulate`.
    #[allow(clippy::needless_range_loop)]
    fn brute_force_eval(model: &BlendshapeModel, w: &[f64]) -> Vec<f64> {
        let mut out = model.neutral().to_vec();
        for r in 0..model.rows() {
            for i in 0..model.m() {
                out[r] += w[i] * model.blendshape(i)[r];
            }
            for t in model.correctives() {
                let mut p = 1.0;
                for &j in &t.ids {
                    p *= w[j];
                }
                out[r] += p * t.offset[r];
            }
        }
        out
    }

    #[test]
    fn zero_weights_give_neutral() {
        let m = pair_model();
        assert_eq!(m.evaluate(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn full_activation_sums_all_terms() {
        let m = pair_model();
        assert_eq!(m.evaluate(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn half_activation_matches_brute_force() {
        let m = pair_model();
        let w = [0.5, 0.5];
        let expected = brute_force_eval(&m, &w);
        assert_eq!(expected, vec![0.5, 0.5, 0.25]);
        assert_eq!(m.evaluate(&w).unwrap(), expected);
    }

    #[test]
    fn evaluate_rejects_wrong_length() {
        let err = pair_model().evaluate(&[1.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn gradient_examples() {
        let m = pair_model();
        assert_eq!(m.controller_gradient(&[0.3, 0.0], 0).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(m.controller_gradient(&[0.3, 1.0], 0).unwrap(), vec![1.0, 0.0, 1.0]);
        assert!(matches!(
            m.controller_gradient(&[0.0, 0.0], 2),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn gradient_matches_finite_difference_on_grid() {
        let m = pair_model();
        for &a in &[0.0, 0.25, 0.5, 1.0] {
            for &b in &[0.0, 0.5, 1.0] {
                let w = [a, b];
                let g = m.controller_gradient(&w, 0).unwrap();
                let f = m.evaluate(&w).unwrap();
                let c = m.evaluate(&[0.0, b]).unwrap();
                for r in 0..3 {
                    assert!((f[r] - c[r] - a * g[r]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn offset_matrix_squares_vertex_norms() {
        let m = BlendshapeModel::new(vec![0.0; 3], vec![vec![1.0, 2.0, 2.0]], vec![]).unwrap();
        assert_eq!(m.offset_matrix()[[0, 0]], 9.0);
        let z = BlendshapeModel::new(vec![0.0; 6], vec![vec![0.0; 6]], vec![]).unwrap();
        assert!(z.offset_matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn delta_matrix_single_vertex() {
        let m = BlendshapeModel::new(vec![0.0; 3], vec![vec![1.0, 2.0, 3.0]], vec![]).unwrap();
        let d = m.delta_matrix();
        assert_eq!(d.shape(), &[1, 3]);
        assert_eq!(d.row(0).to_vec(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn restrict_drops_straddling_corrective() {
        let m = BlendshapeModel::new(
            vec![0.0; 3],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![CorrectiveTerm::new(vec![1, 2], vec![1.0, 1.0, 1.0])],
        )
        .unwrap();
        let sub = m.restrict(&[0], &[1]).unwrap();
        assert!(sub.model.correctives().is_empty());
        assert_eq!(sub.model.m(), 1);
        let kept = m.restrict(&[0], &[1, 2]).unwrap();
        assert_eq!(kept.model.correctives()[0].ids, vec![0, 1]);
    }

    #[test]
    fn restrict_full_is_identity() {
        let m = pair_model();
        let sub = m.restrict(&[0], &[0, 1]).unwrap();
        assert_eq!(sub.model, m);
    }

    #[test]
    fn restrict_rejects_bad_indices() {
        let m = pair_model();
        assert!(matches!(m.restrict(&[1], &[0]), Err(Error::IndexOutOfRange { .. })));
        assert!(m.restrict(&[0], &[1, 1]).is_err());
        assert!(m.restrict(&[0], &[1, 0]).is_err());
    }

    #[test]
    fn invalid_correctives_rejected() {
        let single = CorrectiveTerm { ids: vec![0], offset: vec![0.0; 3] };
        assert!(BlendshapeModel::new(vec![0.0; 3], vec![vec![0.0; 3]; 2], vec![single]).is_err());
        let dup = vec![
            CorrectiveTerm::new(vec![0, 1], vec![0.0; 3]),
            CorrectiveTerm::new(vec![1, 0], vec![0.0; 3]),
        ];
        assert!(BlendshapeModel::new(vec![0.0; 3], vec![vec![0.0; 3]; 2], dup).is_err());
        let unsorted = CorrectiveTerm { ids: vec![1, 0], offset: vec![0.0; 3] };
        assert!(BlendshapeModel::new(vec![0.0; 3], vec![vec![0.0; 3]; 2], vec![unsorted]).is_err());
        let range = CorrectiveTerm::new(vec![0, 5], vec![0.0; 3]);
        assert!(BlendshapeModel::new(vec![0.0; 3], vec![vec![0.0; 3]; 2], vec![range]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = pair_model();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"blendshapes\""));
        let back: BlendshapeModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_rejects_inconsistent_header() {
        let s = r#"{"n":2,"m":1,"neutral":[0,0,0],"blendshapes":[[0,0,0]],"correctives":[]}"#;
        assert!(serde_json::from_str::<BlendshapeModel>(s).is_err());
    }
}
