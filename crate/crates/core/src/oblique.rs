//! Oblique projectors onto a span of reconstruction atoms along a known
//! background subspace.
//!
//! With background basis `{psi_i}` the atoms `v` are first mapped to
//! `u = v - P v`, where `P` is the orthogonal projector onto the background.
//! The measurement (dual) vectors `w_i` are kept biorthogonal to the selected
//! `u`'s and are extended one atom at a time:
//!
//! ```text
//! q      = u_new - P_W u_new            (P_W: projector onto span of selected u's)
//! w_new  = q / |q|^2
//! w_i   <- w_i - w_new <u_new, w_i>     for the previously selected i
//! ```
//!
//! The projection is then `E f = sum_i v_i <w_i, f>`. It fixes every
//! selected atom and annihilates the background.
//!
//! [`oracle_duals`] and [`oracle_oblique_projection`] compute the same
//! objects from the Gram matrix with a pivoted dense factorization. They
//! share no code with the recursive path and serve as its cross-check.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, inner, mgs_orthonormalize, norm, OrthonormalSet, Signal};

/// Relative threshold below which a new atom counts as dependent on the
/// already selected ones.
pub const DEPENDENT_ATOM_RTOL: f64 = 1e-10;

/// Largest Gram condition number the dense oracle accepts.
pub const ORACLE_MAX_CONDITION: f64 = 1e15;

/// Orthonormal basis of the background subspace to be annihilated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundModel {
    psi: OrthonormalSet,
    source_count: usize,
}

impl BackgroundModel {
    /// No background: the oblique projector degenerates to an orthogonal one.
    pub fn empty() -> Self {
        BackgroundModel {
            psi: OrthonormalSet::empty(),
            source_count: 0,
        }
    }

    /// Builds the background basis from a (possibly redundant) spanning set.
    pub fn from_sources(sources: &[Signal], tol: f64, m_cap: Option<usize>) -> Result<Self> {
        let psi = mgs_orthonormalize(sources, tol, m_cap)?;
        Ok(BackgroundModel {
            psi,
            source_count: sources.len(),
        })
    }

    pub fn from_orthonormal(psi: OrthonormalSet) -> Self {
        let source_count = psi.len();
        BackgroundModel { psi, source_count }
    }

    pub fn psi(&self) -> &OrthonormalSet {
        &self.psi
    }

    /// Number of orthonormal background vectors.
    pub fn m(&self) -> usize {
        self.psi.len()
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    fn check_dim(&self, f: &Signal) -> Result<()> {
        match self.psi.dim() {
            Some(d) if d != f.dim() => Err(Error::DimensionMismatch {
                expected: d,
                found: f.dim(),
            }),
            _ => Ok(()),
        }
    }

    /// `f - P f`: the part of `f` orthogonal to the background.
    ///
    /// Applies the projector twice, which keeps the result orthogonal to
    /// every `psi_i` to working precision even when `f` lies mostly in the
    /// background.
    pub fn remove_from(&self, f: &Signal) -> Result<Signal> {
        self.check_dim(f)?;
        let mut u = f.clone();
        for _pass in 0..2 {
            for psi in self.psi.vectors() {
                let c = dot(psi.coords(), u.coords());
                u.axpy(-c, psi);
            }
        }
        Ok(u)
    }
}

/// `u_l = v_l - P v_l` for every atom.
pub fn subtract_background(atoms: &[Signal], bg: &BackgroundModel) -> Result<Vec<Signal>> {
    atoms.iter().map(|v| bg.remove_from(v)).collect()
}

/// Dual vectors of the oblique projector onto the span of the selected atoms.
///
/// Values are immutable: [`DualSet::extend`] returns a new set.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSet {
    dim: usize,
    selected: Vec<usize>,
    u_sel: Vec<Signal>,
    q: Vec<Signal>,
    w: Vec<Signal>,
    dependence_tol: f64,
}

/// Mutation hook used by the verification suite: flips the sign of the
/// correction term in the update of the previous duals.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    FlipDualUpdateSign,
}

impl DualSet {
    /// Set with no selected atoms. `dependence_tol` is the absolute norm
    /// below which the orthogonal remainder of a new atom is rejected.
    pub fn empty(dim: usize, dependence_tol: f64) -> Self {
        DualSet {
            dim,
            selected: Vec::new(),
            u_sel: Vec::new(),
            q: Vec::new(),
            w: Vec::new(),
            dependence_tol,
        }
    }

    /// Starts from a single atom: `w_1 = u_1 / |u_1|^2`, `q_1 = u_1 / |u_1|`.
    ///
    /// The dependence threshold is taken relative to `|u_1|`.
    pub fn init(u1: &Signal) -> Result<Self> {
        let n = norm(u1);
        if n == 0.0 {
            return Err(Error::DegenerateAtom { norm: n });
        }
        DualSet::empty(u1.dim(), DEPENDENT_ATOM_RTOL * n).extend(0, u1)
    }

    pub fn k(&self) -> usize {
        self.w.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn u_selected(&self) -> &[Signal] {
        &self.u_sel
    }

    pub fn q(&self) -> &[Signal] {
        &self.q
    }

    pub fn w(&self) -> &[Signal] {
        &self.w
    }

    pub fn dependence_tol(&self) -> f64 {
        self.dependence_tol
    }

    /// Adds the atom with dictionary index `index` and background-free
    /// version `u_new`, updating all previous duals.
    pub fn extend(&self, index: usize, u_new: &Signal) -> Result<DualSet> {
        self.extend_with_fault(index, u_new, Fault::None)
    }

    #[doc(hidden)]
    pub fn extend_with_fault(&self, index: usize, u_new: &Signal, fault: Fault) -> Result<DualSet> {
        if u_new.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: u_new.dim(),
            });
        }
        if self.k() == 0 && norm(u_new) == 0.0 {
            return Err(Error::DegenerateAtom { norm: 0.0 });
        }
        let mut q = u_new.clone();
        for _pass in 0..2 {
            for qj in &self.q {
                let c = dot(qj.coords(), q.coords());
                q.axpy(-c, qj);
            }
        }
        let remainder = norm(&q);
        if remainder <= self.dependence_tol {
            return Err(Error::DependentAtom {
                remainder,
                threshold: self.dependence_tol,
            });
        }
        let w_new = q.scaled(1.0 / (remainder * remainder));
        let sign = match fault {
            Fault::None => -1.0,
            Fault::FlipDualUpdateSign => 1.0,
        };
        let mut w: Vec<Signal> = self
            .w
            .iter()
            .map(|wi| {
                let mut wi = wi.clone();
                let c = dot(u_new.coords(), wi.coords());
                wi.axpy(sign * c, &w_new);
                wi
            })
            .collect();
        w.push(w_new);
        q.scale(1.0 / remainder);

        let mut next = self.clone();
        next.selected.push(index);
        next.u_sel.push(u_new.clone());
        next.q.push(q);
        next.w = w;
        Ok(next)
    }

    /// The most recently added dual `w_k^k`.
    pub fn last_w(&self) -> Option<&Signal> {
        self.w.last()
    }

    /// The most recently added orthonormal vector `q_k`.
    pub fn last_q(&self) -> Option<&Signal> {
        self.q.last()
    }
}

/// `sum_i v_i <w_i, f>`: oblique projection of `f` onto the span of the
/// reconstruction atoms along the background.
pub fn apply_oblique(ds: &DualSet, recon_atoms: &[Signal], f: &Signal) -> Result<Signal> {
    if recon_atoms.len() != ds.k() {
        return Err(Error::LengthMismatch {
            what: "reconstruction atoms",
            expected: ds.k(),
            found: recon_atoms.len(),
        });
    }
    if f.dim() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            found: f.dim(),
        });
    }
    let mut out = f.zeros_like();
    for (v, w) in recon_atoms.iter().zip(ds.w()) {
        let c = inner(w, f)?;
        out.axpy(c, v);
    }
    Ok(out)
}

fn columns(vs: &[Signal]) -> Result<DMatrix<f64>> {
    let Some(first) = vs.first() else {
        return Err(Error::EmptyDictionary);
    };
    let n = first.dim();
    for v in vs {
        if v.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.dim(),
            });
        }
    }
    Ok(DMatrix::from_fn(n, vs.len(), |r, c| vs[c].coords()[r]))
}

/// 2-norm condition number of a symmetric positive semidefinite matrix.
pub fn gram_condition(gram: &DMatrix<f64>) -> f64 {
    scaled_condition(gram, 0.0)
}

/// Like [`gram_condition`], but the largest singular value is taken to be at
/// least `scale`. With `scale` set to the largest squared norm of the atoms
/// before background removal, atoms that vanish under the removal show up as
/// ill-conditioned even when the Gram matrix is `1 x 1`.
pub fn scaled_condition(gram: &DMatrix<f64>, scale: f64) -> f64 {
    let sv = gram.singular_values();
    let max = sv.max().max(scale);
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Condition number of `U^T U` from the singular values of `U`, which stays
/// finite far beyond the point where the Gram matrix itself is numerically
/// singular. The largest singular value is taken to be at least
/// `sqrt(scale)`, as in [`scaled_condition`].
pub fn gram_condition_from_columns(u: &DMatrix<f64>, scale: f64) -> f64 {
    let sv = u.singular_values();
    let max = sv.max().max(scale.sqrt());
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        (max / min).powi(2)
    }
}

/// Solves `G X = B` with full pivoting, refusing when `condition` exceeds
/// `max_condition`.
fn solve_gram(
    gram: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    condition: f64,
    max_condition: f64,
) -> Result<DMatrix<f64>> {
    if !(condition <= max_condition) {
        return Err(Error::SingularGram { condition });
    }
    let lu = gram.clone().full_piv_lu();
    lu.solve(rhs).ok_or(Error::SingularGram { condition })
}

/// Closed-form duals: the columns of `U (U^T U)^{-1}`.
pub fn oracle_duals(u_sel: &[Signal]) -> Result<Vec<Signal>> {
    let u = columns(u_sel)?;
    let gram = u.transpose() * &u;
    let k = gram.nrows();
    let condition = gram_condition_from_columns(&u, 0.0);
    let inv = solve_gram(&gram, &DMatrix::identity(k, k), condition, ORACLE_MAX_CONDITION)?;
    let w = &u * inv;
    w.column_iter()
        .map(|c| Signal::new(c.iter().copied().collect()))
        .collect()
}

/// Result of the dense oblique projection.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleProjection {
    pub signal: Signal,
    pub coefficients: Vec<f64>,
    pub gram_condition: f64,
}

/// `V (U^T U)^{-1} U^T f` by a dense solve, where `U` holds the
/// background-subtracted atoms.
pub fn oracle_oblique_projection(
    recon_atoms: &[Signal],
    bg: &BackgroundModel,
    f: &Signal,
) -> Result<OracleProjection> {
    oracle_oblique_projection_with_limit(recon_atoms, bg, f, ORACLE_MAX_CONDITION)
}

/// [`oracle_oblique_projection`] with a caller-chosen condition limit. Pass
/// `f64::INFINITY` to attempt the solve however badly conditioned it is.
pub fn oracle_oblique_projection_with_limit(
    recon_atoms: &[Signal],
    bg: &BackgroundModel,
    f: &Signal,
    max_condition: f64,
) -> Result<OracleProjection> {
    let v = columns(recon_atoms)?;
    if f.dim() != v.nrows() {
        return Err(Error::DimensionMismatch {
            expected: v.nrows(),
            found: f.dim(),
        });
    }
    let u = columns(&subtract_background(recon_atoms, bg)?)?;
    let gram = u.transpose() * &u;
    let fv = DVector::from_column_slice(f.coords());
    let rhs = u.transpose() * fv;
    let rhs = DMatrix::from_column_slice(rhs.nrows(), 1, rhs.as_slice());
    let scale = v.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max);
    let gram_condition = gram_condition_from_columns(&u, scale);
    let c = solve_gram(&gram, &rhs, gram_condition, max_condition)?;
    let recon = &v * &c;
    Ok(OracleProjection {
        signal: Signal::new(recon.as_slice().to_vec())?.with_grid(f.grid().copied()),
        coefficients: c.as_slice().to_vec(),
        gram_condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2 as S;

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec()).unwrap()
    }

    fn diag_bg() -> BackgroundModel {
        BackgroundModel::from_orthonormal(
            OrthonormalSet::from_orthonormal(vec![sig(&[S, S, 0.])]).unwrap(),
        )
    }

    fn assert_close(a: &Signal, b: &[f64], tol: f64) {
        for (x, y) in a.coords().iter().zip(b) {
            assert!((x - y).abs() <= tol, "{:?} vs {:?}", a.coords(), b);
        }
    }

    #[test]
    fn subtract_background_examples() {
        let bg = diag_bg();
        let u = subtract_background(&[Signal::unit(3, 0), sig(&[1., 1., 0.])], &bg).unwrap();
        assert_close(&u[0], &[0.5, -0.5, 0.], 1e-15);
        assert_close(&u[1], &[0., 0., 0.], 1e-15);
        let v = sig(&[3., -2., 7.]);
        let u = subtract_background(&[v.clone()], &BackgroundModel::empty()).unwrap();
        assert_eq!(u[0], v);
        assert!(subtract_background(&[sig(&[1., 0.])], &bg).is_err());
    }

    #[test]
    fn init_dual_examples() {
        let ds = DualSet::init(&sig(&[0.5, -0.5, 0.])).unwrap();
        assert_close(&ds.w()[0], &[1., -1., 0.], 1e-15);
        assert_close(&ds.q()[0], &[S, -S, 0.], 1e-15);
        let ds = DualSet::init(&Signal::unit(3, 2)).unwrap();
        assert_eq!(ds.w()[0].coords(), &[0., 0., 1.]);
        assert_eq!(ds.q()[0].coords(), &[0., 0., 1.]);
        let ds = DualSet::init(&sig(&[2., 0.])).unwrap();
        assert_eq!(ds.w()[0].coords(), &[0.5, 0.]);
        assert_eq!(ds.q()[0].coords(), &[1., 0.]);
        assert!(matches!(
            DualSet::init(&sig(&[0., 0.])),
            Err(Error::DegenerateAtom { .. })
        ));
    }

    #[test]
    fn extend_duals_examples() {
        let ds = DualSet::init(&sig(&[0.5, -0.5, 0.])).unwrap();
        let ds2 = ds.extend(2, &Signal::unit(3, 2)).unwrap();
        assert_eq!(ds2.k(), 2);
        assert_close(&ds2.q()[1], &[0., 0., 1.], 1e-15);
        assert_close(&ds2.w()[1], &[0., 0., 1.], 1e-15);
        assert_close(&ds2.w()[0], &[1., -1., 0.], 1e-15);
        // the original value is untouched
        assert_eq!(ds.k(), 1);

        let ds = DualSet::init(&Signal::unit(3, 0)).unwrap();
        assert!(matches!(
            ds.extend(1, &Signal::unit(3, 0)),
            Err(Error::DependentAtom { .. })
        ));
    }

    #[test]
    fn apply_oblique_examples() {
        let ds = DualSet::init(&sig(&[0.5, -0.5, 0.])).unwrap();
        let v = [Signal::unit(3, 0)];
        let ef = apply_oblique(&ds, &v, &sig(&[3., 1., 4.])).unwrap();
        assert_close(&ef, &[2., 0., 0.], 1e-14);
        let ew = apply_oblique(&ds, &v, &sig(&[S, S, 0.])).unwrap();
        assert_close(&ew, &[0., 0., 0.], 1e-15);
        let ev = apply_oblique(&ds, &v, &v[0]).unwrap();
        assert_close(&ev, &[1., 0., 0.], 1e-15);
        assert!(apply_oblique(&ds, &[], &v[0]).is_err());
    }

    #[test]
    fn oracle_duals_examples() {
        let w = oracle_duals(&[sig(&[0.5, -0.5, 0.])]).unwrap();
        assert_close(&w[0], &[1., -1., 0.], 1e-14);
        let w = oracle_duals(&[Signal::unit(3, 0), Signal::unit(3, 1)]).unwrap();
        assert_close(&w[0], &[1., 0., 0.], 1e-15);
        assert_close(&w[1], &[0., 1., 0.], 1e-15);
        let err = oracle_duals(&[sig(&[1., 1., 0.]), sig(&[2., 2., 0.])]).unwrap_err();
        assert!(matches!(err, Error::SingularGram { .. }));
    }

    #[test]
    fn oracle_projection_examples() {
        let bg = diag_bg();
        let f = sig(&[3., 1., 4.]);
        let p = oracle_oblique_projection(&[Signal::unit(3, 0)], &bg, &f).unwrap();
        assert_close(&p.signal, &[2., 0., 0.], 1e-14);
        let p =
            oracle_oblique_projection(&[Signal::unit(3, 0), Signal::unit(3, 2)], &bg, &f).unwrap();
        assert_close(&p.signal, &[2., 0., 4.], 1e-14);
        let resid = f.sub(&p.signal).unwrap();
        assert_close(&resid, &[1., 1., 0.], 1e-14);
        // an atom inside the background has no background-free part
        assert!(oracle_oblique_projection(&[sig(&[1., 1., 0.])], &bg, &f).is_err());
    }

    #[test]
    fn remove_from_is_orthogonal_to_background() {
        let bg = BackgroundModel::from_sources(
            &[sig(&[1., 2., 3., 4.]), sig(&[1., 0., 1., 0.])],
            1e-8,
            None,
        )
        .unwrap();
        let u = bg.remove_from(&sig(&[5., 1., 7., 2.])).unwrap();
        for psi in bg.psi().vectors() {
            assert!(inner(psi, &u).unwrap().abs() < 1e-12);
        }
    }
}
