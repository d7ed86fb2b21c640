//! Multiple testing with generalized error rates.
//!
//! Stepdown procedures that control the k-FWER (the chance of `k` or more
//! false rejections) and the false discovery proportion, the Holm and
//! Benjamini-Hochberg baselines, exact samplers for the joint p-value laws
//! that make those guarantees tight, and a seeded Monte Carlo harness that
//! checks every guarantee empirically.
//!
//! ```
//! use stepdown::{order_pvalues, constants_kfwer_stepdown, stepdown, PValueVector};
//!
//! let pv = PValueVector::from_values(&[0.001, 0.012, 0.021, 0.2, 0.03]).unwrap();
//! let c = constants_kfwer_stepdown(5, 2, 0.05).unwrap();
//! let rejected = stepdown(&order_pvalues(&pv), &c).unwrap();
//! assert_eq!(rejected.count(), 4);
//! ```

pub mod adversarial;
pub mod error;
pub mod gamma;
pub mod procedures;
pub mod pvalues;
pub mod sharpness;
pub mod simulation;
pub mod table;

pub use adversarial::{
    hommel_bound, sample_lemma21, sample_lemma31, sample_theorem21, sample_theorem23, AdversarialDraw, LabeledDraw,
};
pub use error::{Error, Result};
pub use gamma::Gamma;
pub use procedures::{
    adjusted_pvalues, automatic_k_minus_1_option, constants_fdp_hommel, constants_fdp_stepdown, constants_holm,
    constants_kfwer_stepdown, constants_singlestep, harmonic, singlestep_kfwer, stepdown, stepup_bh, AdjustmentReport,
    Method, Procedure, ProcedureSpec, StepdownConstants,
};
pub use pvalues::{fdp, false_rejection_count, order_pvalues, OrderedPValues, PValueVector, RejectionSet, TruthAssignment};
pub use table::parse_table;
pub use sharpness::{run_sharpness, SharpnessReport, SharpnessSetup};
pub use simulation::{
    check_markov_sandwich, generate, run_experiment, theorem31_j_oracle, theorem32_bound_check, ExperimentConfig, Metric,
    Scenario, SimulationReport,
};
