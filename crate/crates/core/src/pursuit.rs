//! Oblique matching pursuit.
//!
//! Each step scores every unselected atom by
//!
//! ```text
//! |<gamma_l, f>| / |gamma_l|^2
//! ```
//!
//! where `gamma_l` is the background-free atom `u_l` with its components
//! along the already selected `q_1..q_k` removed. The score is the magnitude
//! of the coefficient the atom would receive, `|<w_l^{k+1}, f>|`, and since
//! the candidate duals are orthogonal to the selected reconstruction atoms
//! it also equals the consistency error `|<w_l^{k+1}, f - E_k f>|`.
//!
//! Worked trace in three dimensions, background spanned by `(1,1,0)/sqrt(2)`,
//! dictionary `{e1, e2, e3}`, `f = (3,1,4)`:
//!
//! ```text
//! u = (.5,-.5,0), (-.5,.5,0), (0,0,1)
//! step 1: scores 2, 2, 4          -> pick e3, c = [4]
//! step 2: scores 2, 2             -> tie, pick e1, c = [4, 2]
//! step 3: gamma_2 = 0             -> dictionary exhausted
//! f^2 = (2,0,4), f - f^2 = (1,1,0) lies in the background
//! ```
//!
//! With an empty background `u = v` and the same recursion is the
//! optimized orthogonal matching pursuit; see [`oomp`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, inner, norm, Signal};
use crate::oblique::{subtract_background, BackgroundModel, DualSet, DEPENDENT_ATOM_RTOL};

/// A threshold given either absolutely or relative to a reference scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Threshold {
    Absolute(f64),
    Relative(f64),
}

impl Threshold {
    pub fn resolve(&self, reference: f64) -> f64 {
        match *self {
            Threshold::Absolute(t) => t,
            Threshold::Relative(r) => r * reference,
        }
    }

    fn value(&self) -> f64 {
        match *self {
            Threshold::Absolute(t) | Threshold::Relative(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    SmallestIndex,
    LargestIndex,
}

/// Relative stopping tolerance on the selection functional (reference: the
/// largest score at the first step).
pub const DEFAULT_DELTA_RTOL: f64 = 1e-8;
/// Candidates with `|gamma| <= GAMMA_ZERO_RTOL * max |u|` are never selected.
pub const DEFAULT_GAMMA_ZERO_RTOL: f64 = 1e-10;
/// If no candidate direction correlates with the signal above this cosine,
/// the signal has nothing left outside the background and selection stops.
pub const DEFAULT_SIGNAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PursuitConfig {
    /// Stop once the best score falls below this; relative thresholds
    /// refer to the best score of the first step.
    pub delta: Threshold,
    /// Defaults to the dictionary size.
    pub max_iters: Option<usize>,
    /// Exclusion threshold on `|gamma_l|`; relative thresholds refer to
    /// the largest `|u_l|`.
    pub gamma_zero_tol: Threshold,
    /// Cosine between `f` and the best candidate direction below which the
    /// run stops immediately.
    pub signal_floor: f64,
    pub tie_break: TieBreak,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        PursuitConfig {
            delta: Threshold::Relative(DEFAULT_DELTA_RTOL),
            max_iters: None,
            gamma_zero_tol: Threshold::Relative(DEFAULT_GAMMA_ZERO_RTOL),
            signal_floor: DEFAULT_SIGNAL_FLOOR,
            tie_break: TieBreak::SmallestIndex,
        }
    }
}

impl PursuitConfig {
    fn validate(&self, dict_size: usize) -> Result<()> {
        if !(self.delta.value() > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta.value()
            )));
        }
        if !(self.gamma_zero_tol.value() > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma zero tolerance must be positive, got {}",
                self.gamma_zero_tol.value()
            )));
        }
        if !(self.signal_floor >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "signal floor must be non-negative, got {}",
                self.signal_floor
            )));
        }
        match self.max_iters {
            Some(0) => Err(Error::InvalidParameter("max_iters must be positive".into())),
            Some(m) if m > dict_size => Err(Error::InvalidParameter(format!(
                "max_iters {m} exceeds dictionary size {dict_size}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ToleranceReached,
    MaxIters,
    DictionaryExhausted,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::ToleranceReached => "tolerance_reached",
            StopReason::MaxIters => "max_iters",
            StopReason::DictionaryExhausted => "dictionary_exhausted",
        })
    }
}

/// Outcome of scoring the remaining candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Candidate {
        index: usize,
        value: f64,
        /// Largest `|<gamma_l, f>| / (|gamma_l| |f|)` over the candidates.
        max_cosine: f64,
    },
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub value: f64,
    pub gamma_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub delta_used: Option<f64>,
    pub gamma_zero_tol_used: f64,
    pub steps: Vec<StepRecord>,
    /// Best score among the candidates left when the run stopped.
    pub final_max_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationResult {
    pub reconstruction: Signal,
    pub selected_indices: Vec<usize>,
    pub coeffs: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub diagnostics: Diagnostics,
}

/// Candidate bookkeeping of a pursuit run.
#[derive(Debug, Clone)]
pub struct PursuitState {
    u: Vec<Signal>,
    gammas: Vec<Signal>,
    gamma_norms: Vec<f64>,
    remaining: Vec<bool>,
    duals: DualSet,
    coeffs: Vec<f64>,
    gamma_zero_tol: f64,
}

impl PursuitState {
    /// State before the first selection; `u` are the background-free atoms.
    pub fn new(u: Vec<Signal>, gamma_zero_tol: Threshold) -> Result<Self> {
        let Some(first) = u.first() else {
            return Err(Error::EmptyDictionary);
        };
        let dim = first.dim();
        for ul in &u {
            if ul.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: ul.dim(),
                });
            }
        }
        let norms: Vec<f64> = u.iter().map(norm).collect();
        let max_norm = norms.iter().copied().fold(0.0, f64::max);
        Ok(PursuitState {
            gammas: u.clone(),
            remaining: vec![true; u.len()],
            duals: DualSet::empty(dim, DEPENDENT_ATOM_RTOL * max_norm),
            coeffs: Vec::new(),
            gamma_zero_tol: gamma_zero_tol.resolve(max_norm),
            gamma_norms: norms,
            u,
        })
    }

    pub fn duals(&self) -> &DualSet {
        &self.duals
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn u(&self) -> &[Signal] {
        &self.u
    }

    pub fn gamma(&self, index: usize) -> &Signal {
        &self.gammas[index]
    }

    pub fn gamma_zero_tol(&self) -> f64 {
        self.gamma_zero_tol
    }

    pub fn is_remaining(&self, index: usize) -> bool {
        self.remaining[index]
    }

    /// Unselected indices, ascending.
    pub fn remaining(&self) -> impl Iterator<Item = usize> + '_ {
        self.remaining
            .iter()
            .enumerate()
            .filter_map(|(i, &r)| r.then_some(i))
    }

    /// Scores the remaining candidates against `f` and picks the best.
    pub fn select_next(&self, f: &Signal, tie_break: TieBreak) -> Result<Selection> {
        if f.dim() != self.duals.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.duals.dim(),
                found: f.dim(),
            });
        }
        let f_norm = norm(f);
        let scores: Vec<(usize, f64, f64)> = self
            .remaining()
            .filter(|&l| self.gamma_norms[l] > self.gamma_zero_tol)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|l| {
                let ip = dot(self.gammas[l].coords(), f.coords()).abs();
                let gn = self.gamma_norms[l];
                let cosine = if f_norm > 0.0 { ip / (gn * f_norm) } else { 0.0 };
                (l, ip / (gn * gn), cosine)
            })
            .collect();
        let max_cosine = scores.iter().map(|s| s.2).fold(0.0, f64::max);
        let best = pick_best(scores.iter().map(|&(l, v, _)| (l, v)), tie_break);
        Ok(match best {
            Some((index, value)) => Selection::Candidate {
                index,
                value,
                max_cosine,
            },
            None => Selection::Exhausted,
        })
    }

    /// Adds atom `index`: extends the duals, updates the coefficients of
    /// `f` and removes the new direction from the remaining candidates.
    pub fn advance(&mut self, index: usize, f: &Signal) -> Result<()> {
        if !self.remaining[index] {
            return Err(Error::InvalidParameter(format!(
                "atom {index} is already selected"
            )));
        }
        let u_new = &self.u[index];
        let next = self.duals.extend(index, u_new)?;
        let w_new = next.last_w().expect("extended dual set is non-empty");
        let c_new = inner(w_new, f)?;
        self.coeffs = update_coefficients(&self.coeffs, c_new, &self.duals, u_new)?;
        self.duals = next;
        self.remaining[index] = false;
        self.orthogonalize_candidates();
        Ok(())
    }

    /// Removes the newest `q` from every remaining candidate, then
    /// reorthogonalizes against all `q`'s once.
    pub fn orthogonalize_candidates(&mut self) {
        let Some(q_new) = self.duals.last_q() else {
            return;
        };
        let qs = self.duals.q();
        let remaining = &self.remaining;
        self.gammas
            .par_iter_mut()
            .zip(self.gamma_norms.par_iter_mut())
            .enumerate()
            .filter(|(l, _)| remaining[*l])
            .for_each(|(_, (gamma, gn))| {
                orthogonalize_against(gamma, q_new, qs);
                *gn = norm(gamma);
            });
    }
}

/// Scores within this relative distance of the maximum count as ties.
pub const TIE_RTOL: f64 = 1e-12;

/// Index of the best `(index, value)` pair; ties within [`TIE_RTOL`] go to
/// the smallest or largest index.
fn pick_best(
    scores: impl Iterator<Item = (usize, f64)> + Clone,
    tie_break: TieBreak,
) -> Option<(usize, f64)> {
    let max = scores.clone().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let floor = max - TIE_RTOL * max.abs();
    let tied = scores.filter(|s| s.1 >= floor);
    match tie_break {
        TieBreak::SmallestIndex => tied.min_by_key(|s| s.0),
        TieBreak::LargestIndex => tied.max_by_key(|s| s.0),
    }
}

fn orthogonalize_against(gamma: &mut Signal, q_new: &Signal, qs: &[Signal]) {
    let c = dot(q_new.coords(), gamma.coords());
    gamma.axpy(-c, q_new);
    for q in qs {
        let c = dot(q.coords(), gamma.coords());
        gamma.axpy(-c, q);
    }
}

/// Coefficient update when atom `u_new` with coefficient `c_new` joins:
/// `c_i <- c_i - c_new <w_i, u_new>` using the duals before the extension.
pub fn update_coefficients(
    coeffs: &[f64],
    c_new: f64,
    ds_before: &DualSet,
    u_new: &Signal,
) -> Result<Vec<f64>> {
    if coeffs.len() != ds_before.k() {
        return Err(Error::LengthMismatch {
            what: "coefficients",
            expected: ds_before.k(),
            found: coeffs.len(),
        });
    }
    let mut out = Vec::with_capacity(coeffs.len() + 1);
    for (c, w) in coeffs.iter().zip(ds_before.w()) {
        out.push(c - c_new * inner(w, u_new)?);
    }
    out.push(c_new);
    Ok(out)
}

/// Step-by-step driver of an oblique matching pursuit run.
pub struct Pursuit<'a> {
    atoms: &'a [Signal],
    f: &'a Signal,
    cfg: PursuitConfig,
    max_iters: usize,
    state: PursuitState,
    delta: Option<f64>,
    steps: Vec<StepRecord>,
    final_max_value: Option<f64>,
    stop: Option<StopReason>,
}

impl<'a> Pursuit<'a> {
    pub fn new(
        atoms: &'a [Signal],
        bg: &BackgroundModel,
        f: &'a Signal,
        cfg: PursuitConfig,
    ) -> Result<Self> {
        let u = subtract_background(atoms, bg)?;
        Self::from_u(atoms, u, f, cfg)
    }

    fn from_u(
        atoms: &'a [Signal],
        u: Vec<Signal>,
        f: &'a Signal,
        cfg: PursuitConfig,
    ) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyDictionary);
        }
        cfg.validate(atoms.len())?;
        let state = PursuitState::new(u, cfg.gamma_zero_tol)?;
        if f.dim() != state.duals.dim() {
            return Err(Error::DimensionMismatch {
                expected: state.duals.dim(),
                found: f.dim(),
            });
        }
        Ok(Pursuit {
            atoms,
            f,
            max_iters: cfg.max_iters.unwrap_or(atoms.len()),
            cfg,
            state,
            delta: match cfg.delta {
                Threshold::Absolute(d) => Some(d),
                Threshold::Relative(_) => None,
            },
            steps: Vec::new(),
            final_max_value: None,
            stop: None,
        })
    }

    pub fn state(&self) -> &PursuitState {
        &self.state
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    /// Performs one selection. Returns the stop reason once the run is over.
    pub fn step(&mut self) -> Result<Option<StopReason>> {
        if self.stop.is_some() {
            return Ok(self.stop);
        }
        if self.steps.len() >= self.max_iters {
            return Ok(self.finish_with(StopReason::MaxIters));
        }
        let (index, value, max_cosine) = match self.state.select_next(self.f, self.cfg.tie_break)? {
            Selection::Exhausted => return Ok(self.finish_with(StopReason::DictionaryExhausted)),
            Selection::Candidate {
                index,
                value,
                max_cosine,
            } => (index, value, max_cosine),
        };
        self.final_max_value = Some(value);
        if max_cosine <= self.cfg.signal_floor {
            return Ok(self.finish_with(StopReason::ToleranceReached));
        }
        let delta = *self.delta.get_or_insert_with(|| self.cfg.delta.resolve(value));
        if value < delta {
            return Ok(self.finish_with(StopReason::ToleranceReached));
        }
        let gamma_norm = self.state.gamma_norms[index];
        self.state.advance(index, self.f)?;
        self.steps.push(StepRecord {
            index,
            value,
            gamma_norm,
        });
        self.final_max_value = None;
        Ok(None)
    }

    fn finish_with(&mut self, reason: StopReason) -> Option<StopReason> {
        self.stop = Some(reason);
        self.stop
    }

    pub fn run(mut self) -> Result<SeparationResult> {
        while self.step()?.is_none() {}
        Ok(self.into_result())
    }

    /// Current reconstruction `sum_i c_i v_{l_i}`.
    pub fn reconstruction(&self) -> Signal {
        let mut out = self.f.zeros_like();
        for (c, &l) in self.state.coeffs.iter().zip(self.state.duals.selected()) {
            out.axpy(*c, &self.atoms[l]);
        }
        out
    }

    pub fn into_result(self) -> SeparationResult {
        let reconstruction = self.reconstruction();
        SeparationResult {
            reconstruction,
            selected_indices: self.state.duals.selected().to_vec(),
            coeffs: self.state.coeffs.clone(),
            iterations: self.steps.len(),
            stop_reason: self.stop.unwrap_or(StopReason::MaxIters),
            diagnostics: Diagnostics {
                delta_used: self.delta,
                gamma_zero_tol_used: self.state.gamma_zero_tol,
                steps: self.steps,
                final_max_value: self.final_max_value,
            },
        }
    }
}

/// Recovers the component of `f` outside the background by greedily
/// selecting dictionary atoms and projecting obliquely along the background.
pub fn oblmp(
    atoms: &[Signal],
    bg: &BackgroundModel,
    f: &Signal,
    cfg: &PursuitConfig,
) -> Result<SeparationResult> {
    Pursuit::new(atoms, bg, f, *cfg)?.run()
}

/// Optimized orthogonal matching pursuit with the same selection functional,
/// written directly on the atoms without any background handling.
///
/// Candidates are scored against the running residual `f - f^k`, and the
/// new dual is built from the already orthogonalized candidate. The result
/// is the orthogonal projection of `f` onto the selected atoms.
pub fn oomp(atoms: &[Signal], f: &Signal, cfg: &PursuitConfig) -> Result<SeparationResult> {
    let Some(first) = atoms.first() else {
        return Err(Error::EmptyDictionary);
    };
    cfg.validate(atoms.len())?;
    let dim = first.dim();
    for a in atoms.iter().chain(std::iter::once(f)) {
        if a.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: a.dim(),
            });
        }
    }
    let max_norm = atoms.iter().map(norm).fold(0.0, f64::max);
    let zero_tol = cfg.gamma_zero_tol.resolve(max_norm);
    let max_iters = cfg.max_iters.unwrap_or(atoms.len());
    let f_norm = norm(f);

    let mut gammas: Vec<Option<Signal>> = atoms.iter().cloned().map(Some).collect();
    let mut qs: Vec<Signal> = Vec::new();
    let mut ws: Vec<Signal> = Vec::new();
    let mut selected: Vec<usize> = Vec::new();
    let mut coeffs: Vec<f64> = Vec::new();
    let mut residual = f.clone();
    let mut steps = Vec::new();
    let mut delta = match cfg.delta {
        Threshold::Absolute(d) => Some(d),
        Threshold::Relative(_) => None,
    };
    let mut final_max_value = None;

    let stop_reason = loop {
        if selected.len() >= max_iters {
            break StopReason::MaxIters;
        }
        let mut scores = Vec::new();
        let mut max_cosine = 0.0f64;
        for (l, g) in gammas.iter().enumerate() {
            let Some(g) = g else { continue };
            let gn = norm(g);
            if gn <= zero_tol {
                continue;
            }
            let ip = dot(g.coords(), residual.coords()).abs();
            if f_norm > 0.0 {
                max_cosine = max_cosine.max(ip / (gn * f_norm));
            }
            scores.push((l, ip / (gn * gn), gn));
        }
        let Some((l, value)) = pick_best(scores.iter().map(|s| (s.0, s.1)), cfg.tie_break) else {
            break StopReason::DictionaryExhausted;
        };
        let gn = scores.iter().find(|s| s.0 == l).expect("picked from scores").2;
        final_max_value = Some(value);
        if max_cosine <= cfg.signal_floor {
            break StopReason::ToleranceReached;
        }
        let d = *delta.get_or_insert_with(|| cfg.delta.resolve(value));
        if value < d {
            break StopReason::ToleranceReached;
        }
        final_max_value = None;

        let gamma = gammas[l].take().expect("candidate present");
        let q = gamma.scaled(1.0 / gn);
        let w_new = q.scaled(1.0 / gn);
        let v_new = &atoms[l];
        let c_new = dot(w_new.coords(), f.coords());
        for (c, w) in coeffs.iter_mut().zip(&ws) {
            *c -= c_new * dot(w.coords(), v_new.coords());
        }
        for w in ws.iter_mut() {
            let c = dot(v_new.coords(), w.coords());
            w.axpy(-c, &w_new);
        }
        coeffs.push(c_new);
        ws.push(w_new);
        selected.push(l);
        residual.axpy(-dot(q.coords(), residual.coords()), &q);
        qs.push(q);
        let q = qs.last().expect("just pushed");
        for g in gammas.iter_mut().flatten() {
            orthogonalize_against(g, q, &qs);
        }
        steps.push(StepRecord {
            index: l,
            value,
            gamma_norm: gn,
        });
    };

    let mut reconstruction = f.zeros_like();
    for (c, &l) in coeffs.iter().zip(&selected) {
        reconstruction.axpy(*c, &atoms[l]);
    }
    Ok(SeparationResult {
        reconstruction,
        iterations: selected.len(),
        selected_indices: selected,
        coeffs,
        stop_reason,
        diagnostics: Diagnostics {
            delta_used: delta,
            gamma_zero_tol_used: zero_tol,
            steps,
            final_max_value,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::OrthonormalSet;
    use std::f64::consts::FRAC_1_SQRT_2 as S;

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec()).unwrap()
    }

    fn trace_setup() -> (Vec<Signal>, BackgroundModel, Signal) {
        let atoms = (0..3).map(|i| Signal::unit(3, i)).collect();
        let bg = BackgroundModel::from_orthonormal(
            OrthonormalSet::from_orthonormal(vec![sig(&[S, S, 0.])]).unwrap(),
        );
        (atoms, bg, sig(&[3., 1., 4.]))
    }

    #[test]
    fn three_dim_trace_step_by_step() {
        let (atoms, bg, f) = trace_setup();
        let mut p = Pursuit::new(&atoms, &bg, &f, PursuitConfig::default()).unwrap();
        match p.state().select_next(&f, TieBreak::SmallestIndex).unwrap() {
            Selection::Candidate { index, value, .. } => {
                assert_eq!(index, 2);
                assert!((value - 4.0).abs() < 1e-14);
            }
            Selection::Exhausted => panic!("expected a candidate"),
        }
        assert_eq!(p.step().unwrap(), None);
        assert_eq!(p.state().coeffs(), &[4.0]);
        match p.state().select_next(&f, TieBreak::SmallestIndex).unwrap() {
            Selection::Candidate { index, value, .. } => {
                assert_eq!(index, 0);
                assert!((value - 2.0).abs() < 1e-14);
            }
            Selection::Exhausted => panic!("expected a candidate"),
        }
        match p.state().select_next(&f, TieBreak::LargestIndex).unwrap() {
            Selection::Candidate { index, .. } => assert_eq!(index, 1),
            Selection::Exhausted => panic!("expected a candidate"),
        }
        assert_eq!(p.step().unwrap(), None);
        let c = p.state().coeffs();
        assert!((c[0] - 4.0).abs() < 1e-14 && (c[1] - 2.0).abs() < 1e-14);
        // the remaining candidate collapsed to zero
        assert!(norm(p.state().gamma(1)) < 1e-15);
        assert_eq!(p.step().unwrap(), Some(StopReason::DictionaryExhausted));
    }

    #[test]
    fn three_dim_trace_result() {
        let (atoms, bg, f) = trace_setup();
        let r = oblmp(&atoms, &bg, &f, &PursuitConfig::default()).unwrap();
        assert_eq!(r.selected_indices, vec![2, 0]);
        assert_eq!(r.stop_reason, StopReason::DictionaryExhausted);
        for (a, b) in r.reconstruction.coords().iter().zip([2., 0., 4.]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn signal_in_background_stops_immediately() {
        let (atoms, bg, _) = trace_setup();
        let f = sig(&[2.5, 2.5, 0.]);
        let r = oblmp(&atoms, &bg, &f, &PursuitConfig::default()).unwrap();
        assert!(r.selected_indices.is_empty());
        assert_eq!(r.stop_reason, StopReason::ToleranceReached);
        assert!(r.reconstruction.is_zero());
        assert!(r.diagnostics.final_max_value.unwrap() <= 1e-12);
    }

    #[test]
    fn zero_signal_stops_immediately() {
        let (atoms, bg, _) = trace_setup();
        let r = oblmp(&atoms, &bg, &Signal::zeros(3), &PursuitConfig::default()).unwrap();
        assert!(r.selected_indices.is_empty());
        assert_eq!(r.stop_reason, StopReason::ToleranceReached);
    }

    #[test]
    fn coefficient_update_examples() {
        let ds = DualSet::empty(3, 1e-12);
        let u3 = Signal::unit(3, 2);
        let c = update_coefficients(&[], 4.0, &ds, &u3).unwrap();
        assert_eq!(c, vec![4.0]);
        let ds = ds.extend(2, &u3).unwrap();
        let c = update_coefficients(&c, 2.0, &ds, &sig(&[0.5, -0.5, 0.])).unwrap();
        assert_eq!(c, vec![4.0, 2.0]);
        assert!(update_coefficients(&[], 1.0, &ds, &u3).is_err());
    }

    #[test]
    fn orthonormal_dictionary_coefficients_are_inner_products() {
        let atoms: Vec<_> = (0..4).map(|i| Signal::unit(4, i)).collect();
        let f = sig(&[1.0, -3.0, 0.5, 2.0]);
        let r = oblmp(&atoms, &BackgroundModel::empty(), &f, &PursuitConfig::default()).unwrap();
        assert_eq!(r.selected_indices, vec![1, 3, 0, 2]);
        for (c, &l) in r.coeffs.iter().zip(&r.selected_indices) {
            assert_eq!(*c, f.coords()[l]);
        }
        assert_eq!(r.reconstruction, f);
    }

    #[test]
    fn orthogonalize_candidates_examples() {
        let u = vec![sig(&[0.5, -0.5, 0.]), sig(&[1., 0., 1.]), Signal::unit(3, 2)];
        let mut st = PursuitState::new(u, Threshold::Relative(1e-10)).unwrap();
        st.advance(2, &sig(&[0., 0., 1.])).unwrap();
        assert_eq!(st.gamma(0).coords(), &[0.5, -0.5, 0.]);
        assert_eq!(st.gamma(1).coords(), &[1., 0., 0.]);
        let mut st = PursuitState::new(
            vec![Signal::unit(2, 0), Signal::unit(2, 0)],
            Threshold::Relative(1e-10),
        )
        .unwrap();
        st.advance(0, &Signal::unit(2, 0)).unwrap();
        assert!(norm(st.gamma(1)) <= st.gamma_zero_tol());
        assert_eq!(
            st.select_next(&sig(&[1., 1.]), TieBreak::SmallestIndex).unwrap(),
            Selection::Exhausted
        );
    }

    #[test]
    fn oomp_examples() {
        let atoms = vec![Signal::unit(3, 0), Signal::unit(3, 1)];
        let f = sig(&[3., 1., 0.]);
        let r = oomp(&atoms, &f, &PursuitConfig::default()).unwrap();
        assert_eq!(r.selected_indices, vec![0, 1]);
        assert_eq!(r.reconstruction.coords(), &[3., 1., 0.]);
        let f = sig(&[3., 1., 2.]);
        let r = oomp(&atoms, &f, &PursuitConfig::default()).unwrap();
        let resid = f.sub(&r.reconstruction).unwrap();
        assert_eq!(resid.coords(), &[0., 0., 2.]);
    }

    #[test]
    fn config_validation() {
        let (atoms, bg, f) = trace_setup();
        let bad = PursuitConfig {
            max_iters: Some(4),
            ..Default::default()
        };
        assert!(oblmp(&atoms, &bg, &f, &bad).is_err());
        let bad = PursuitConfig {
            delta: Threshold::Absolute(0.0),
            ..Default::default()
        };
        assert!(oblmp(&atoms, &bg, &f, &bad).is_err());
        assert!(matches!(
            oblmp(&[], &bg, &f, &PursuitConfig::default()),
            Err(Error::EmptyDictionary)
        ));
        let capped = PursuitConfig {
            max_iters: Some(1),
            ..Default::default()
        };
        let r = oblmp(&atoms, &bg, &f, &capped).unwrap();
        assert_eq!(r.stop_reason, StopReason::MaxIters);
        assert_eq!(r.selected_indices, vec![2]);
    }
}
