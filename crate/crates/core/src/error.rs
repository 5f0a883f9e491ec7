use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("matrix must be square of dimension 2 or 3, got {0}")]
    BadDimension(String),

    #[error("not a toral automorphism: det = {0}")]
    NotAutomorphism(i128),

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("spectrum is not real")]
    ComplexSpectrum,

    #[error("repeated eigenvalue {0}")]
    RepeatedEigenvalue(f64),

    #[error("splitting is not partially hyperbolic")]
    NotPartiallyHyperbolic,

    #[error("matrix is not hyperbolic")]
    NotHyperbolic,

    #[error("M^n - I is singular")]
    SingularSystem,

    #[error("periodic point count {count} exceeds cap {cap}")]
    CountOverflow { count: u128, cap: u128 },

    #[error("reality violated: imaginary residue {0:e}")]
    RealityViolation(f64),

    #[error("grid of size {n} cannot resolve cutoff {cutoff}")]
    AliasingRisk { n: usize, cutoff: usize },

    #[error("leaf rate {0} does not contract")]
    NonConvergent(f64),

    #[error("tolerance {tol:e} needs more than {cap} iterates")]
    TolUnreachable { tol: f64, cap: usize },

    #[error("points are not on a common su-leaf: center gap {0:e}")]
    NotOnSuLeaf(f64),

    #[error("delta leaves its eigenspace by {0:e}")]
    OffLeaf(f64),

    #[error("malformed accessible sequence: {0}")]
    MalformedSequence(String),

    #[error("periodic cycle functional is not trivial: path gap {gap:e} exceeds {limit:e}")]
    TrivialPcfViolated { gap: f64, limit: f64 },

    #[error("rational number {p}/{q} detected at continued-fraction depth {depth}")]
    RationalDetected { p: i128, q: i128, depth: usize },

    #[error("l*alpha within 1e-15 of an integer at l = {0}")]
    ResonanceHit(u64),

    #[error("resonance at l = {l}: |e^(2 pi i l alpha) - 1| = {denominator:e}, |coefficient| = {coefficient:e}")]
    Resonance { l: i64, denominator: f64, coefficient: f64 },

    #[error("center projection of e_1 vanishes ({0:e})")]
    DegenerateProjection(f64),

    #[error("endpoint gap has center component {0:e}")]
    CenterLeakage(f64),

    #[error("periodized cocycle is not 1-periodic: residual {residual:e} above {limit:e}")]
    PeriodicityViolated { residual: f64, limit: f64 },

    #[error("A and B do not commute")]
    NonCommuting,

    #[error("cannot parse {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// Rejections of well-formed input that violates a solvability
    /// hypothesis, as opposed to malformed input.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            Error::Resonance { .. }
                | Error::ResonanceHit(_)
                | Error::RationalDetected { .. }
                | Error::TrivialPcfViolated { .. }
                | Error::PeriodicityViolated { .. }
                | Error::NonCommuting
                | Error::NotHyperbolic
                | Error::NotPartiallyHyperbolic
                | Error::ComplexSpectrum
        )
    }
}
