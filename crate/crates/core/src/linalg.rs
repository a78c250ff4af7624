//! Inner-product-space primitives.
//!
//! Signals are real coordinate vectors. The inner product is the plain
//! coordinate dot product, also for sampled functions: a positive global
//! scale such as the grid step changes no projector and no argmax.
//!
//! The inner product is antilinear in its *first* argument,
//! `<c f, g> = conj(c) <f, g>`. Only real signals are used by the pursuit
//! code, but [`inner_slices`] is generic over [`Scalar`] and carries the
//! convention for complex data.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling metadata attached to a signal that represents a function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    pub h: f64,
}

impl Grid {
    /// Grid with `n_points` uniformly spaced samples on `[a, b]`, endpoints included.
    pub fn uniform(a: f64, b: f64, n_points: usize) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidGrid(format!("need a < b, got [{a}, {b}]")));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {n_points}"
            )));
        }
        Ok(Grid {
            a,
            b,
            h: (b - a) / (n_points - 1) as f64,
        })
    }

    pub fn n_points(&self) -> usize {
        ((self.b - self.a) / self.h).round() as usize + 1
    }

    pub fn point(&self, i: usize) -> f64 {
        self.a + i as f64 * self.h
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points()).map(|i| self.point(i)).collect()
    }
}

/// A vector of a finite-dimensional real inner-product space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    coords: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<Grid>,
}

impl Signal {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptySignal);
        }
        Ok(Signal { coords, grid: None })
    }

    /// Signal holding samples of a function on `grid`.
    pub fn sampled(coords: Vec<f64>, grid: Grid) -> Result<Self> {
        if !(grid.h > 0.0) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {}", grid.h)));
        }
        if coords.len() != grid.n_points() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_points(),
                found: coords.len(),
            });
        }
        Ok(Signal {
            coords,
            grid: Some(grid),
        })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "signal dimension must be positive");
        Signal {
            coords: vec![0.0; dim],
            grid: None,
        }
    }

    /// Unit coordinate vector `e_{index}` (zero-based) of dimension `dim`.
    pub fn unit(dim: usize, index: usize) -> Self {
        let mut s = Signal::zeros(dim);
        s.coords[index] = 1.0;
        s
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub fn with_grid(mut self, grid: Option<Grid>) -> Self {
        self.grid = grid;
        self
    }

    /// Zero signal with the same dimension and grid as `self`.
    pub fn zeros_like(&self) -> Self {
        Signal {
            coords: vec![0.0; self.dim()],
            grid: self.grid,
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Signal) {
        debug_assert_eq!(self.dim(), other.dim());
        for (s, o) in self.coords.iter_mut().zip(&other.coords) {
            *s += alpha * o;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.coords.iter_mut().for_each(|c| *c *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> Signal {
        let mut s = self.clone();
        s.scale(alpha);
        s
    }

    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        check_dims(self, other)?;
        let mut s = self.clone();
        s.axpy(-1.0, other);
        Ok(s)
    }

    pub fn add(&self, other: &Signal) -> Result<Signal> {
        check_dims(self, other)?;
        let mut s = self.clone();
        s.axpy(1.0, other);
        Ok(s)
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0.0)
    }
}

fn check_dims(f: &Signal, g: &Signal) -> Result<()> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: g.dim(),
        });
    }
    Ok(())
}

/// Scalar field of an inner-product space.
pub trait Scalar: Copy + std::ops::Mul<Output = Self> + std::ops::Add<Output = Self> {
    fn zero() -> Self;
    fn conj(self) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn conj(self) -> Self {
        self
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
}

/// `sum_i conj(f_i) g_i`; conjugation acts on the first argument.
pub fn inner_slices<T: Scalar>(f: &[T], g: &[T]) -> Result<T> {
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            found: g.len(),
        });
    }
    Ok(f
        .iter()
        .zip(g)
        .fold(T::zero(), |acc, (&a, &b)| acc + a.conj() * b))
}

pub(crate) fn dot(f: &[f64], g: &[f64]) -> f64 {
    debug_assert_eq!(f.len(), g.len());
    f.iter().zip(g).map(|(a, b)| a * b).sum()
}

pub fn inner(f: &Signal, g: &Signal) -> Result<f64> {
    check_dims(f, g)?;
    Ok(dot(&f.coords, &g.coords))
}

pub fn norm(f: &Signal) -> f64 {
    dot(&f.coords, &f.coords).sqrt()
}

/// Orthonormal vectors together with the absolute discard threshold used to build them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalSet {
    vectors: Vec<Signal>,
    tol_used: f64,
}

impl OrthonormalSet {
    pub fn empty() -> Self {
        OrthonormalSet {
            vectors: Vec::new(),
            tol_used: 0.0,
        }
    }

    /// Wraps vectors that are already orthonormal. Fails if the Gram matrix
    /// deviates from the identity by more than `1e-10` in any entry.
    pub fn from_orthonormal(vectors: Vec<Signal>) -> Result<Self> {
        let set = OrthonormalSet {
            vectors,
            tol_used: 0.0,
        };
        let dev = set.max_gram_deviation()?;
        if dev > ORTHONORMAL_TOL {
            return Err(Error::InvalidParameter(format!(
                "vectors are not orthonormal (max gram deviation {dev:e})"
            )));
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Signal] {
        &self.vectors
    }

    pub fn tol_used(&self) -> f64 {
        self.tol_used
    }

    pub fn dim(&self) -> Option<usize> {
        self.vectors.first().map(Signal::dim)
    }

    /// Largest entrywise deviation of the Gram matrix from the identity.
    pub fn max_gram_deviation(&self) -> Result<f64> {
        let mut dev = 0.0f64;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((inner(a, b)? - target).abs());
            }
        }
        Ok(dev)
    }
}

/// Tolerance of the orthonormality invariant.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Default relative discard tolerance for redundancy elimination.
pub const DEFAULT_REDUNDANCY_TOL: f64 = 1e-8;

/// Redundancy elimination by modified Gram-Schmidt with one reorthogonalization pass.
///
/// Candidates are processed in order. A candidate is dropped when the norm
/// of what remains after both passes is at most `tol * max_input_norm`.
/// `max_out` caps the number of vectors kept.
pub fn mgs_orthonormalize(
    vs: &[Signal],
    tol: f64,
    max_out: Option<usize>,
) -> Result<OrthonormalSet> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let Some(first) = vs.first() else {
        return Ok(OrthonormalSet::empty());
    };
    for v in vs {
        check_dims(first, v)?;
    }
    let max_norm = vs.iter().map(norm).fold(0.0, f64::max);
    let threshold = tol * max_norm;
    let cap = max_out.unwrap_or(usize::MAX);
    let mut out: Vec<Signal> = Vec::new();
    if max_norm == 0.0 {
        return Ok(OrthonormalSet {
            vectors: out,
            tol_used: threshold,
        });
    }
    for v in vs {
        if out.len() >= cap {
            break;
        }
        let mut r = v.clone();
        for _pass in 0..2 {
            for q in &out {
                let c = dot(&q.coords, &r.coords);
                r.axpy(-c, q);
            }
        }
        let rn = norm(&r);
        if rn > threshold {
            r.scale(1.0 / rn);
            out.push(r);
        }
    }
    Ok(OrthonormalSet {
        vectors: out,
        tol_used: threshold,
    })
}

/// Orthogonal projection `sum_i psi_i <psi_i, f>` onto the span of `basis`.
pub fn orthogonal_project(basis: &OrthonormalSet, f: &Signal) -> Result<Signal> {
    let mut out = f.zeros_like();
    for psi in basis.vectors() {
        let c = inner(psi, f)?;
        out.axpy(c, psi);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec()).unwrap()
    }

    #[test]
    fn inner_examples() {
        assert_eq!(inner(&sig(&[1., 0., 0.]), &sig(&[1., 0., 0.])).unwrap(), 1.0);
        assert_eq!(inner(&sig(&[1., -1., 0.]), &sig(&[3., 1., 4.])).unwrap(), 2.0);
        assert!(matches!(
            inner(&sig(&[1., 0.]), &sig(&[1., 0., 0.])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn complex_inner_conjugates_first_argument() {
        let i = Complex64::new(0.0, 1.0);
        let f = [Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25)];
        let g = [Complex64::new(3.0, -1.0), Complex64::new(2.0, 4.0)];
        let fi: Vec<_> = f.iter().map(|&z| i * z).collect();
        let lhs = inner_slices(&fi, &g).unwrap();
        let rhs = -i * inner_slices(&f, &g).unwrap();
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&sig(&[3., 4.])), 5.0);
        assert_eq!(norm(&sig(&[0., 0., 0.])), 0.0);
        assert!((norm(&sig(&[0.5, -0.5, 0.])) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn empty_signal_rejected() {
        assert!(matches!(Signal::new(vec![]), Err(Error::EmptySignal)));
    }

    #[test]
    fn sampled_signal_checks_grid() {
        let g = Grid::uniform(0.0, 4.0, 5).unwrap();
        assert_eq!(g.h, 1.0);
        assert!(Signal::sampled(vec![0.0; 5], g).is_ok());
        assert!(Signal::sampled(vec![0.0; 4], g).is_err());
        assert!(Grid::uniform(1.0, 1.0, 5).is_err());
        assert!(Grid::uniform(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn mgs_drops_exactly_dependent_vectors() {
        let vs = [sig(&[1., 0., 0.]), sig(&[2., 0., 0.]), sig(&[0., 0., 5.])];
        let set = mgs_orthonormalize(&vs, 1e-8, None).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.vectors()[0].coords(), &[1., 0., 0.]);
        assert_eq!(set.vectors()[1].coords(), &[0., 0., 1.]);
    }

    #[test]
    fn mgs_identity_on_orthonormal_input() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let set = mgs_orthonormalize(&[sig(&[s, s])], 1e-8, None).unwrap();
        assert_eq!(set.len(), 1);
        for (a, b) in set.vectors()[0].coords().iter().zip([s, s]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn mgs_empty_and_zero_inputs() {
        assert!(mgs_orthonormalize(&[], 1e-8, None).unwrap().is_empty());
        let z = [sig(&[0., 0.]), sig(&[0., 0.])];
        assert!(mgs_orthonormalize(&z, 1e-8, None).unwrap().is_empty());
        assert!(mgs_orthonormalize(&z, 0.0, None).is_err());
    }

    #[test]
    fn mgs_respects_cap() {
        let vs: Vec<_> = (0..4).map(|i| Signal::unit(4, i)).collect();
        assert_eq!(mgs_orthonormalize(&vs, 1e-8, Some(3)).unwrap().len(), 3);
    }

    #[test]
    fn projection_examples() {
        let e3 = OrthonormalSet::from_orthonormal(vec![Signal::unit(3, 2)]).unwrap();
        assert_eq!(
            orthogonal_project(&e3, &sig(&[3., 1., 4.])).unwrap().coords(),
            &[0., 0., 4.]
        );
        let p = orthogonal_project(&OrthonormalSet::empty(), &sig(&[3., 1., 4.])).unwrap();
        assert!(p.is_zero());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let d = OrthonormalSet::from_orthonormal(vec![sig(&[s, s, 0.])]).unwrap();
        let p = orthogonal_project(&d, &sig(&[1., 0., 0.])).unwrap();
        for (a, b) in p.coords().iter().zip([0.5, 0.5, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(orthogonal_project(&d, &sig(&[1., 0.])).is_err());
    }

    #[test]
    fn from_orthonormal_rejects_non_orthonormal() {
        assert!(OrthonormalSet::from_orthonormal(vec![sig(&[1., 1.])]).is_err());
    }
}
