//! The two separation experiments on `[0, 4]`: a sparse spline signal on
//! top of a background from the power-law family `(x + 1)^(-0.05 i)`.
//!
//! Test 1 uses the cubic B-spline basis with knot distance 0.065, test 2 the
//! coherent family with double support. Every signal is separated by OBLMP
//! and, as a baseline, by the oblique projection onto the span of the whole
//! dictionary.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionaries::{
    background_family, bspline_dictionary, random_background_component, random_sparse_signal,
    signal_rng, CoefficientMode, Dictionary, GridSpec, SplineSpec,
};
use crate::error::{Error, Result};
use crate::linalg::{norm, orthogonal_project, Signal, DEFAULT_REDUNDANCY_TOL};
use crate::oblique::{oracle_oblique_projection_with_limit, BackgroundModel};
use crate::pursuit::{oblmp, Pursuit, PursuitConfig, SeparationResult, StopReason, Threshold};
use crate::verify::{PropositionSummary, PropositionTracker};

pub const KNOT_STEP: f64 = 0.065;
pub const ATOMS_PER_SIGNAL: usize = 20;
pub const BACKGROUND_SOURCES: usize = 50;
pub const BACKGROUND_EXPONENT_STEP: f64 = 0.05;
pub const BACKGROUND_CAP: usize = 3;
pub const SUCCESS_THRESHOLD: f64 = 1e-2;
/// Exclusion threshold on candidate directions used by the experiments,
/// relative to the largest background-free atom.
pub const EXPERIMENT_GAMMA_ZERO_RTOL: f64 = 1e-4;
/// Signal floor used by the experiments.
pub const EXPERIMENT_SIGNAL_FLOOR: f64 = 1e-8;
/// Relative rank tolerance for the span checks.
pub const RANK_RTOL: f64 = 1e-10;

/// Where the background component of the test signals comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundMode {
    /// Random combination of the orthonormal functions kept by the
    /// background model, so the model captures it exactly.
    #[default]
    Modeled,
    /// Random combination of all source functions; whatever the capped
    /// model misses stays in the signal.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub test_id: u8,
    pub n_signals: usize,
    pub seed: u64,
    pub grid: GridSpec,
    pub knot_step: f64,
    pub atoms_per_signal: usize,
    pub background_sources: usize,
    pub background_exponent_step: f64,
    /// Largest number of orthonormal background functions kept.
    pub m_cap: Option<usize>,
    pub redundancy_tol: f64,
    pub background_mode: BackgroundMode,
    /// Norm of the background component relative to the sparse component.
    pub background_amplitude: f64,
    /// Scale dictionary atoms to unit norm.
    pub normalize_atoms: bool,
    pub pursuit: PursuitConfig,
    pub success_threshold: f64,
    /// Check the propositions after every selection (slower).
    pub check_propositions: bool,
    pub run_baseline: bool,
}

impl ExperimentConfig {
    /// Settings of test 1 or 2.
    pub fn standard(test_id: u8) -> Result<Self> {
        if !(1..=2).contains(&test_id) {
            return Err(Error::InvalidParameter(format!(
                "test id must be 1 or 2, got {test_id}"
            )));
        }
        Ok(ExperimentConfig {
            test_id,
            n_signals: 100,
            seed: 0,
            grid: GridSpec::default(),
            knot_step: KNOT_STEP,
            atoms_per_signal: ATOMS_PER_SIGNAL,
            background_sources: BACKGROUND_SOURCES,
            background_exponent_step: BACKGROUND_EXPONENT_STEP,
            m_cap: Some(BACKGROUND_CAP),
            redundancy_tol: DEFAULT_REDUNDANCY_TOL,
            background_mode: BackgroundMode::Modeled,
            background_amplitude: 1.0,
            normalize_atoms: true,
            pursuit: PursuitConfig {
                gamma_zero_tol: Threshold::Relative(EXPERIMENT_GAMMA_ZERO_RTOL),
                signal_floor: EXPERIMENT_SIGNAL_FLOOR,
                ..PursuitConfig::default()
            },
            success_threshold: SUCCESS_THRESHOLD,
            check_propositions: false,
            run_baseline: true,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.test_id) {
            return Err(Error::InvalidParameter(format!(
                "test id must be 1 or 2, got {}",
                self.test_id
            )));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "success threshold must be positive, got {}",
                self.success_threshold
            )));
        }
        if !(self.background_amplitude >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "background amplitude must be non-negative, got {}",
                self.background_amplitude
            )));
        }
        Ok(())
    }
}

/// Dictionary and background shared by all signals of a run.
#[derive(Debug, Clone)]
pub struct Setup {
    pub dictionary: Dictionary,
    pub sources: Vec<Signal>,
    pub background: BackgroundModel,
}

pub fn build_setup(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.validate()?;
    let spec = if cfg.test_id == 1 {
        SplineSpec::basis(cfg.knot_step)
    } else {
        SplineSpec::double_support(cfg.knot_step)
    };
    let mut dictionary = bspline_dictionary(&cfg.grid, &spec)?;
    if cfg.normalize_atoms {
        dictionary = dictionary.normalized();
    }
    let sources = background_family(
        &cfg.grid,
        cfg.background_sources,
        cfg.background_exponent_step,
    )?;
    let background = BackgroundModel::from_sources(&sources, cfg.redundancy_tol, cfg.m_cap)?;
    Ok(Setup {
        dictionary,
        sources,
        background,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryInfo {
    pub label: String,
    pub atoms: usize,
    pub rank: usize,
    /// Rank of the B-spline basis on the same grid, for the span check.
    pub basis_rank: usize,
    pub coherence: f64,
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    /// `None` when the dense solve broke down.
    pub relative_error: Option<f64>,
    pub gram_condition: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub index: u64,
    /// Replay with `signal_rng(seed, index)`.
    pub seed: u64,
    pub true_support: Vec<usize>,
    pub selected: Vec<usize>,
    pub selected_count: usize,
    pub relative_error: f64,
    pub success: bool,
    pub stop_reason: StopReason,
    /// Part of the background component outside the modeled span, relative
    /// to the background component.
    pub unmodeled_background: f64,
    pub baseline: Option<BaselineRecord>,
    pub propositions: Option<PropositionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub test_id: u8,
    pub n_signals: usize,
    pub n_success: usize,
    pub success_threshold: f64,
    pub baseline_failures: Option<usize>,
    /// Whether every step of every run satisfied the propositions, when checked.
    pub propositions_hold: Option<bool>,
    pub dictionary: DictionaryInfo,
    /// Orthonormal background functions used by the projector.
    pub background_m: usize,
    pub config: ExperimentConfig,
    pub records: Vec<SignalRecord>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Columns of one signal's plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotTrace {
    pub index: u64,
    pub x: Vec<f64>,
    pub mixture: Signal,
    pub truth: Signal,
    pub oblmp: Signal,
    pub baseline: Option<Signal>,
}

/// Test signal `index`: sparse part, background part and their sum.
pub fn test_signal(
    cfg: &ExperimentConfig,
    setup: &Setup,
    index: u64,
) -> Result<(Signal, Signal, Vec<usize>)> {
    let mut rng = signal_rng(cfg.seed, index);
    let (f1, truth) = random_sparse_signal(
        &setup.dictionary,
        cfg.atoms_per_signal,
        &mut rng,
        CoefficientMode::Gaussian,
    )?;
    let sources = match cfg.background_mode {
        BackgroundMode::Modeled if !setup.background.is_empty() => setup.background.psi().vectors(),
        _ => setup.sources.as_slice(),
    };
    let f2 = random_background_component(sources, &mut rng, cfg.background_amplitude, norm(&f1))?;
    Ok((f1, f2, truth.indices))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run(cfg, None)
}

/// Runs the experiment and writes one CSV per signal into `dir`.
pub fn run_experiment_with_plots(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentReport> {
    std::fs::create_dir_all(dir)?;
    run(cfg, Some(dir))
}

fn run(cfg: &ExperimentConfig, plot_dir: Option<&Path>) -> Result<ExperimentReport> {
    let setup = build_setup(cfg)?;
    let basis = bspline_dictionary(&cfg.grid, &SplineSpec::basis(cfg.knot_step))?;
    let dictionary = DictionaryInfo {
        label: setup.dictionary.label().to_string(),
        atoms: setup.dictionary.len(),
        rank: setup.dictionary.rank(RANK_RTOL),
        basis_rank: basis.rank(RANK_RTOL),
        coherence: setup.dictionary.coherence(),
        normalized: cfg.normalize_atoms,
    };

    let mut records: Vec<SignalRecord> = (0..cfg.n_signals as u64)
        .into_par_iter()
        .map(|i| {
            let (record, trace) = run_signal(cfg, &setup, i, plot_dir.is_some())?;
            if let (Some(dir), Some(trace)) = (plot_dir, trace) {
                crate::io::write_plot_csv(&dir.join(format!("signal_{i:03}.csv")), &trace)?;
            }
            Ok(record)
        })
        .collect::<Result<_>>()?;
    records.sort_by_key(|r| r.index);

    let n_success = records.iter().filter(|r| r.success).count();
    let baseline_failures = cfg.run_baseline.then(|| {
        records
            .iter()
            .filter(|r| r.baseline.as_ref().is_some_and(|b| !b.success))
            .count()
    });
    let propositions_hold = cfg.check_propositions.then(|| {
        records
            .iter()
            .all(|r| r.propositions.is_some_and(|p| p.pass()))
    });
    Ok(ExperimentReport {
        test_id: cfg.test_id,
        n_signals: cfg.n_signals,
        n_success,
        success_threshold: cfg.success_threshold,
        baseline_failures,
        propositions_hold,
        dictionary,
        background_m: setup.background.m(),
        config: cfg.clone(),
        records,
    })
}

fn relative_error(x: &Signal, truth: &Signal) -> Result<f64> {
    Ok(norm(&x.sub(truth)?) / norm(truth))
}

/// Separates signal `index` and scores it against the ground truth.
pub fn run_signal(
    cfg: &ExperimentConfig,
    setup: &Setup,
    index: u64,
    want_trace: bool,
) -> Result<(SignalRecord, Option<PlotTrace>)> {
    let (f1, f2, true_support) = test_signal(cfg, setup, index)?;
    let f = f1.add(&f2)?;
    let atoms = setup.dictionary.atoms();

    let (result, propositions): (SeparationResult, _) = if cfg.check_propositions {
        let mut p = Pursuit::new(atoms, &setup.background, &f, cfg.pursuit)?;
        let mut tracker = PropositionTracker::new(&setup.background);
        while p.step()?.is_none() {
            tracker.observe(atoms, p.state())?;
        }
        (p.into_result(), Some(tracker.summary()))
    } else {
        (oblmp(atoms, &setup.background, &f, &cfg.pursuit)?, None)
    };
    let err = relative_error(&result.reconstruction, &f1)?;

    let unmodeled_background = {
        let n2 = norm(&f2);
        if n2 == 0.0 {
            0.0
        } else {
            let inside = orthogonal_project(setup.background.psi(), &f2)?;
            norm(&f2.sub(&inside)?) / n2
        }
    };

    let mut baseline_signal = None;
    let baseline = if cfg.run_baseline {
        Some(
            match oracle_oblique_projection_with_limit(atoms, &setup.background, &f, f64::INFINITY) {
                Ok(p) => {
                    let e = relative_error(&p.signal, &f1)?;
                    baseline_signal = Some(p.signal);
                    BaselineRecord {
                        relative_error: Some(e),
                        gram_condition: p.gram_condition,
                        success: e <= cfg.success_threshold,
                    }
                }
                Err(Error::SingularGram { condition }) => BaselineRecord {
                    relative_error: None,
                    gram_condition: condition,
                    success: false,
                },
                Err(e) => return Err(e),
            },
        )
    } else {
        None
    };

    let trace = want_trace.then(|| PlotTrace {
        index,
        x: setup.dictionary.grid().points(),
        mixture: f.clone(),
        truth: f1.clone(),
        oblmp: result.reconstruction.clone(),
        baseline: baseline_signal,
    });
    let record = SignalRecord {
        index,
        seed: cfg.seed,
        true_support,
        selected_count: result.selected_indices.len(),
        selected: result.selected_indices,
        relative_error: err,
        success: err <= cfg.success_threshold,
        stop_reason: result.stop_reason,
        unmodeled_background,
        baseline,
        propositions,
    };
    Ok((record, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(test_id: u8) -> ExperimentConfig {
        ExperimentConfig {
            n_signals: 3,
            seed: 5,
            ..ExperimentConfig::standard(test_id).unwrap()
        }
    }

    #[test]
    fn rejects_unknown_test() {
        assert!(ExperimentConfig::standard(3).is_err());
        let mut cfg = small(1);
        cfg.test_id = 0;
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn basis_run_separates() {
        let mut cfg = small(1);
        cfg.run_baseline = false;
        cfg.check_propositions = true;
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.n_success, 3);
        assert_eq!(r.dictionary.atoms, 65);
        assert_eq!(r.background_m, 3);
        assert_eq!(r.propositions_hold, Some(true));
        for rec in &r.records {
            assert!(rec.unmodeled_background < 1e-12);
            assert_eq!(rec.success, rec.relative_error <= cfg.success_threshold);
        }
    }

    #[test]
    fn success_is_scale_invariant() {
        let cfg = small(1);
        let setup = build_setup(&cfg).unwrap();
        for i in 0..2 {
            let (f1, f2, _) = test_signal(&cfg, &setup, i).unwrap();
            let run = |s: f64| {
                let f = f1.add(&f2).unwrap().scaled(s);
                let r = oblmp(setup.dictionary.atoms(), &setup.background, &f, &cfg.pursuit).unwrap();
                relative_error(&r.reconstruction, &f1.scaled(s)).unwrap() <= cfg.success_threshold
            };
            assert_eq!(run(1.0), run(1e3));
            assert_eq!(run(1.0), run(1e-3));
        }
    }

    #[test]
    fn report_is_deterministic() {
        let mut cfg = small(2);
        cfg.run_baseline = false;
        let a = run_experiment(&cfg).unwrap().to_json().unwrap();
        let b = run_experiment(&cfg).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn raw_background_leaves_residual() {
        let mut cfg = small(1);
        cfg.background_mode = BackgroundMode::Raw;
        let setup = build_setup(&cfg).unwrap();
        let (rec, _) = run_signal(&cfg, &setup, 0, false).unwrap();
        assert!(rec.unmodeled_background > 1e-6);
    }
}
