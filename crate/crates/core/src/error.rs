use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("energy {energy} is below the potential value {potential}: point lies outside the domain of possible motions")]
    OutsideHillRegion { energy: f64, potential: f64 },
    #[error("velocity is not tangent to the sphere (|<x,v>| = {0:e})")]
    NotTangent(f64),
    #[error("band limit must be at least 1")]
    ZeroBandLimit,
    #[error("wave vector outside the band or zero")]
    InvalidWaveVector,
    #[error("relative energy drift {drift:e} exceeds tolerance {tolerance:e} at step {step}")]
    DriftExceeded {
        step: usize,
        drift: f64,
        tolerance: f64,
    },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("vector field vanishes at the section base point")]
    SingularBasePoint,
    #[error("no transversal section found after {halvings} radius halvings")]
    TransversalityFailed { halvings: u32 },
    #[error("energy {energy} does not exceed the potential bound {bound}")]
    EnergyBelowPotentialMax { energy: f64, bound: f64 },
    #[error("no closed orbit detected for family parameter s = {s}")]
    DetectionFailed { s: f64 },
    #[error("all {0} samples were dropped (speed below threshold)")]
    AllSamplesDropped(usize),
}
