//! Locally minimax-optimal identity testing for discrete models.
//!
//! Given a known parameter vector `p` and `n` observations from an unknown
//! `q`, decide `q = p` against `‖p − q‖_t ≥ ρ` for `t ∈ [1, 2]`, under three
//! models: independent Bernoulli coordinates ([`ModelKind::Binomial`]),
//! independent Poisson coordinates ([`ModelKind::Poisson`]) and a single
//! categorical draw per observation ([`ModelKind::Multinomial`]).
//!
//! The crate is organised by capability:
//!
//! - [`model`]: the null specification, canonical (flipped, sorted) view of
//!   `p`, and ingestion of raw observations into split counts.
//! - [`rates`]: the exponents `(r, b)`, the cut indices `I`, `A`, `U`, the
//!   local minimax separation radius and the comparison fixed-point bounds.
//! - [`statistics`]: the weighted χ² bulk test, the tail mass and collision
//!   tests, their aggregate, and closed-form moments.
//! - [`sampling`]: data generation and Poissonization reductions.
//! - [`adversary`]: the lower-bound priors and the χ² certificate.
//! - [`oracle`]: brute-force enumeration used as ground truth.
//! - [`montecarlo`]: parallel, reproducible risk estimation.
//! - [`cli`]: the `minitest` command-line front end.
//!
//! Every capability has a runnable example under `examples/`:
//!
//! ```bash
//! cargo run -p minitest --example rate_profile
//! cargo run -p minitest --example run_test
//! cargo run -p minitest --example lower_bound_priors
//! cargo run -p minitest --example poissonization
//! cargo run -p minitest --example risk_simulation --release
//! cargo run -p minitest --example oracle_battery
//! cargo run -p minitest --example frobenius
//! ```

pub mod adversary;
pub mod cli;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod oracle;
pub mod rates;
pub mod sampling;
pub mod statistics;

pub use error::{Error, Result};
pub use model::{
    canonicalize, ingest_samples, AdversarialDraw, CanonicalNull, ConstantLedger, IndexProfile,
    ModelKind, NullSpec, PriorKind, RateBreakdown, RawSamples, SampleSet, TestVerdict,
};
