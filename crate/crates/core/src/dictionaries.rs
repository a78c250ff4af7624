//! Sampled spline dictionaries, the power-law background family and random
//! test signals.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm, Grid, Signal};

/// Uniform sampling of `[a, b]` with `n_points` points, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub const DEFAULT_POINTS: usize = 2049;

    pub fn grid(&self) -> Result<Grid> {
        Grid::uniform(self.a, self.b, self.n_points)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            a: 0.0,
            b: 4.0,
            n_points: Self::DEFAULT_POINTS,
        }
    }
}

/// Cubic B-spline atoms with uniform knots.
///
/// `support_scale = 1` gives the B-spline basis with knot distance
/// `knot_step`. `support_scale = 2` gives atoms whose knots are
/// `2 * knot_step` apart, translated by `knot_step`: every atom of the
/// scale-2 family lies in the scale-1 spline space, and neighbouring atoms
/// overlap strongly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplineSpec {
    pub knot_step: f64,
    pub support_scale: u32,
}

impl SplineSpec {
    pub const DEGREE: usize = 3;

    pub fn basis(knot_step: f64) -> Self {
        SplineSpec {
            knot_step,
            support_scale: 1,
        }
    }

    pub fn double_support(knot_step: f64) -> Self {
        SplineSpec {
            knot_step,
            support_scale: 2,
        }
    }

    /// Length of each atom's support: `(degree + 1) * knot_step * scale`.
    pub fn support_len(&self) -> f64 {
        (Self::DEGREE + 1) as f64 * self.knot_step * self.support_scale as f64
    }
}

/// An ordered set of sampled atoms on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Vec<Signal>,
    grid: Grid,
    /// Left end of each atom's support, when the atoms come from splines.
    support_starts: Vec<f64>,
    label: String,
}

impl Dictionary {
    pub fn new(atoms: Vec<Signal>, grid: Grid, label: impl Into<String>) -> Result<Self> {
        let n = grid.n_points();
        for a in &atoms {
            if a.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: a.dim(),
                });
            }
        }
        Ok(Dictionary {
            atoms,
            grid,
            support_starts: Vec::new(),
            label: label.into(),
        })
    }

    pub fn atoms(&self) -> &[Signal] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn support_starts(&self) -> &[f64] {
        &self.support_starts
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The same atoms scaled to unit norm. Zero atoms are left alone.
    pub fn normalized(&self) -> Dictionary {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let n = norm(a);
                if n > 0.0 {
                    a.scaled(1.0 / n)
                } else {
                    a.clone()
                }
            })
            .collect();
        Dictionary {
            atoms,
            grid: self.grid,
            support_starts: self.support_starts.clone(),
            label: self.label.clone(),
        }
    }

    /// Numerical rank of the atom matrix: singular values above
    /// `rtol * sigma_max`.
    pub fn rank(&self, rtol: f64) -> usize {
        if self.atoms.is_empty() {
            return 0;
        }
        let m = nalgebra::DMatrix::from_fn(self.grid.n_points(), self.atoms.len(), |r, c| {
            self.atoms[c].coords()[r]
        });
        let sv = m.singular_values();
        let max = sv.max();
        sv.iter().filter(|&&s| s > rtol * max).count()
    }

    /// Largest `|<a_i, a_j>| / (|a_i| |a_j|)` over distinct atoms.
    pub fn coherence(&self) -> f64 {
        coherence(&self.atoms)
    }
}

/// Largest normalized absolute inner product between distinct vectors.
pub fn coherence(atoms: &[Signal]) -> f64 {
    let norms: Vec<f64> = atoms.iter().map(norm).collect();
    let mut mu = 0.0f64;
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                continue;
            }
            let ip: f64 = atoms[i]
                .coords()
                .iter()
                .zip(atoms[j].coords())
                .map(|(a, b)| a * b)
                .sum();
            mu = mu.max(ip.abs() / (norms[i] * norms[j]));
        }
    }
    mu
}

/// Cox-de Boor recursion for the `i`-th B-spline of degree `degree` on
/// `knots`, with half-open knot intervals `[t_j, t_{j+1})`.
pub fn cox_de_boor(knots: &[f64], i: usize, degree: usize, x: f64) -> f64 {
    if degree == 0 {
        return if knots[i] <= x && x < knots[i + 1] {
            1.0
        } else {
            0.0
        };
    }
    let mut value = 0.0;
    let left = knots[i + degree] - knots[i];
    if left > 0.0 {
        value += (x - knots[i]) / left * cox_de_boor(knots, i, degree - 1, x);
    }
    let right = knots[i + degree + 1] - knots[i + 1];
    if right > 0.0 {
        value += (knots[i + degree + 1] - x) / right * cox_de_boor(knots, i + 1, degree - 1, x);
    }
    value
}

/// Sampled cubic B-spline atoms on `[a, b]`.
///
/// The knot distance `s = knot_step * support_scale` and the atoms start at
/// `a + j * knot_step` for every `j` whose support `[start, start + 4 s)`
/// reaches into `[a, b)`. With `J = ceil((b - a) / knot_step)` intervals
/// this yields `J + 4 * support_scale - 1` atoms; for the basis that is
/// `J + 3`. Atoms running past `b` are truncated there.
pub fn bspline_dictionary(grid: &GridSpec, spec: &SplineSpec) -> Result<Dictionary> {
    let g = grid.grid()?;
    if !(spec.knot_step > 0.0) || spec.support_scale == 0 {
        return Err(Error::InvalidParameter(format!(
            "knot step and support scale must be positive, got {} and {}",
            spec.knot_step, spec.support_scale
        )));
    }
    let width = g.b - g.a;
    if !(spec.knot_step * (spec.support_scale as f64) < width) {
        return Err(Error::InvalidGrid(format!(
            "knot distance {} does not fit in [{}, {}]",
            spec.knot_step * spec.support_scale as f64,
            g.a,
            g.b
        )));
    }
    let intervals = (width / spec.knot_step - 1e-9).ceil() as i64;
    let scale = spec.support_scale as i64;
    let s = spec.knot_step * spec.support_scale as f64;
    let xs = g.points();
    let first = -(4 * scale - 1);
    let mut atoms = Vec::new();
    let mut starts = Vec::new();
    for j in first..intervals {
        let start = g.a + j as f64 * spec.knot_step;
        let knots: Vec<f64> = (0..=4).map(|m| start + m as f64 * s).collect();
        let coords: Vec<f64> = xs.iter().map(|&x| cox_de_boor(&knots, 0, 3, x)).collect();
        atoms.push(Signal::sampled(coords, g)?);
        starts.push(start);
    }
    let label = match spec.support_scale {
        1 => "bspline".to_string(),
        2 => "bspline2x".to_string(),
        k => format!("bspline{k}x"),
    };
    Ok(Dictionary {
        atoms,
        grid: g,
        support_starts: starts,
        label,
    })
}

/// `eta_i(x) = (x + 1)^(-exponent_step * i)` for `i = 1..=n`.
pub fn background_family(grid: &GridSpec, n: usize, exponent_step: f64) -> Result<Vec<Signal>> {
    if n == 0 {
        return Err(Error::InvalidParameter("background family needs n >= 1".into()));
    }
    let g = grid.grid()?;
    let xs = g.points();
    (1..=n)
        .map(|i| {
            let p = -exponent_step * i as f64;
            Signal::sampled(xs.iter().map(|&x| (x + 1.0).powf(p)).collect(), g)
        })
        .collect()
}

/// Which coefficients a random sparse signal gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientMode {
    /// Standard normal, redrawn while `|c| < MIN_COEFFICIENT`.
    #[default]
    Gaussian,
    /// All ones.
    Ones,
}

/// Coefficients smaller than this in magnitude are redrawn.
pub const MIN_COEFFICIENT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseTruth {
    /// Ascending dictionary indices.
    pub indices: Vec<usize>,
    pub coeffs: Vec<f64>,
}

/// Deterministic random generator for signal `index` of a run seeded with `seed`.
pub fn signal_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A combination of `n_atoms` distinct atoms chosen uniformly at random.
pub fn random_sparse_signal(
    dict: &Dictionary,
    n_atoms: usize,
    rng: &mut ChaCha8Rng,
    mode: CoefficientMode,
) -> Result<(Signal, SparseTruth)> {
    if n_atoms > dict.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot pick {n_atoms} atoms from a dictionary of {}",
            dict.len()
        )));
    }
    let mut indices = sample(rng, dict.len(), n_atoms).into_vec();
    indices.sort_unstable();
    let coeffs: Vec<f64> = indices
        .iter()
        .map(|_| match mode {
            CoefficientMode::Ones => 1.0,
            CoefficientMode::Gaussian => loop {
                let c: f64 = StandardNormal.sample(rng);
                if c.abs() >= MIN_COEFFICIENT {
                    break c;
                }
            },
        })
        .collect();
    let mut f = Signal::zeros(dict.grid().n_points()).with_grid(Some(*dict.grid()));
    for (&i, &c) in indices.iter().zip(&coeffs) {
        f.axpy(c, &dict.atoms()[i]);
    }
    Ok((f, SparseTruth { indices, coeffs }))
}

/// Random standard-normal combination of `sources`, scaled to norm
/// `amplitude * reference_norm`.
pub fn random_background_component(
    sources: &[Signal],
    rng: &mut ChaCha8Rng,
    amplitude: f64,
    reference_norm: f64,
) -> Result<Signal> {
    let Some(first) = sources.first() else {
        return Err(Error::InvalidParameter("no background sources".into()));
    };
    let mut f2 = first.zeros_like();
    for s in sources {
        if s.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                found: s.dim(),
            });
        }
        let c: f64 = StandardNormal.sample(rng);
        f2.axpy(c, s);
    }
    let n = norm(&f2);
    let target = amplitude * reference_norm;
    if target == 0.0 || n == 0.0 {
        return Ok(f2.zeros_like());
    }
    f2.scale(target / n);
    Ok(f2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_atom_count() {
        let d = bspline_dictionary(&GridSpec::default(), &SplineSpec::basis(0.065)).unwrap();
        assert_eq!(d.len(), 65);
        assert_eq!(d.atoms()[0].dim(), 2049);
        assert!(d
            .atoms()
            .iter()
            .all(|a| a.coords().iter().all(|&c| c >= 0.0)));
    }

    #[test]
    fn double_support_atom_count() {
        let d =
            bspline_dictionary(&GridSpec::default(), &SplineSpec::double_support(0.065)).unwrap();
        assert_eq!(d.len(), 69);
        assert!(d.atoms().iter().all(|a| norm(a) > 0.0));
    }

    #[test]
    fn cardinal_cubic_values_at_knots() {
        let knots = [0.0, 1.0, 2.0, 3.0, 4.0];
        let vals: Vec<f64> = (1..=3).map(|x| cox_de_boor(&knots, 0, 3, x as f64)).collect();
        let expect = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];
        for (v, e) in vals.iter().zip(expect) {
            assert!((v - e).abs() < 1e-15);
        }
        assert_eq!(cox_de_boor(&knots, 0, 3, 0.0), 0.0);
        assert_eq!(cox_de_boor(&knots, 0, 3, 4.0), 0.0);
    }

    #[test]
    fn degenerate_parameters_rejected() {
        let g = GridSpec::default();
        assert!(bspline_dictionary(&g, &SplineSpec::basis(4.0)).is_err());
        assert!(bspline_dictionary(&g, &SplineSpec::basis(0.0)).is_err());
        let bad = GridSpec {
            a: 1.0,
            b: 0.0,
            n_points: 10,
        };
        assert!(bspline_dictionary(&bad, &SplineSpec::basis(0.1)).is_err());
        assert!(background_family(&g, 0, 0.05).is_err());
    }

    #[test]
    fn background_family_values() {
        let eta = background_family(&GridSpec::default(), 50, 0.05).unwrap();
        assert_eq!(eta.len(), 50);
        assert_eq!(eta[0].coords()[0], 1.0);
        assert!((eta[0].coords()[2048] - 0.922_680_2).abs() < 1e-6);
        assert!((eta[49].coords()[2048] - 0.017_888_54).abs() < 1e-8);
    }

    #[test]
    fn sparse_signal_is_deterministic() {
        let d = bspline_dictionary(&GridSpec::default(), &SplineSpec::basis(0.065)).unwrap();
        let a = random_sparse_signal(&d, 20, &mut signal_rng(7, 3), CoefficientMode::Gaussian)
            .unwrap();
        let b = random_sparse_signal(&d, 20, &mut signal_rng(7, 3), CoefficientMode::Gaussian)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.indices.len(), 20);
        assert!(a.1.indices.windows(2).all(|w| w[0] < w[1]));
        assert!(a.1.coeffs.iter().all(|c| c.abs() >= MIN_COEFFICIENT));
        let c = random_sparse_signal(&d, 20, &mut signal_rng(7, 4), CoefficientMode::Gaussian)
            .unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn all_atoms_with_unit_coefficients() {
        let g = GridSpec {
            a: 0.0,
            b: 1.0,
            n_points: 101,
        };
        let d = bspline_dictionary(&g, &SplineSpec::basis(0.25)).unwrap();
        let (f, truth) =
            random_sparse_signal(&d, d.len(), &mut signal_rng(1, 0), CoefficientMode::Ones)
                .unwrap();
        let mut sum = Signal::zeros(101);
        for a in d.atoms() {
            sum.axpy(1.0, a);
        }
        assert_eq!(truth.indices, (0..d.len()).collect::<Vec<_>>());
        for (x, y) in f.coords().iter().zip(sum.coords()) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!(random_sparse_signal(&d, d.len() + 1, &mut signal_rng(1, 0), CoefficientMode::Ones)
            .is_err());
    }

    #[test]
    fn background_component_amplitude() {
        let eta = background_family(&GridSpec::default(), 50, 0.05).unwrap();
        let z = random_background_component(&eta, &mut signal_rng(1, 0), 0.0, 3.0).unwrap();
        assert!(z.is_zero());
        let f2 = random_background_component(&eta, &mut signal_rng(1, 0), 0.5, 3.0).unwrap();
        assert!((norm(&f2) - 1.5).abs() < 1e-12);
        assert!(random_background_component(&[], &mut signal_rng(1, 0), 1.0, 1.0).is_err());
    }

    #[test]
    fn coherence_of_orthogonal_and_parallel_sets() {
        assert_eq!(coherence(&[Signal::unit(3, 0), Signal::unit(3, 1)]), 0.0);
        let a = Signal::new(vec![1.0, 2.0]).unwrap();
        assert!((coherence(&[a.clone(), a.scaled(-3.0)]) - 1.0).abs() < 1e-15);
    }
}
