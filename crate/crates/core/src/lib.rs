//! Core of the machine-teaching workbench: annotations, the rule language,
//! rule synthesis with a linear label model, counterfactual generation,
//! word-level alignment and agreement metrics.

pub mod annotation;
pub mod counterfactual;
pub mod diff;
pub mod metrics;
pub mod par;
pub mod pattern;
pub mod synthesis;
