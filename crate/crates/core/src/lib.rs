//! Security-relevant method (SRM) detection and taint analysis for a Java
//! subset.
//!
//! The crate is organised as a pipeline: [`program`] parses and indexes Java
//! sources, [`features`] turns methods into fixed-width feature vectors,
//! [`dataset`] stores labelled method records, [`ml`] trains multi-label
//! classifiers, [`specgen`] derives taint specifications from labelled
//! records, [`taint`] runs the analysis and [`sarif`] reports the findings.

pub mod dataset;
pub mod features;
pub mod labels;
pub mod ml;
pub mod program;
pub mod sarif;
pub mod specgen;
pub mod taint;
