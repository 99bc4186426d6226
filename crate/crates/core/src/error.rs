use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Fock cutoff {0}: a mode needs at least 2 levels")]
    InvalidCutoff(usize),

    #[error(
        "cutoff {cutoff} too small for amplitude {amplitude:.4}: truncated tail mass {tail:.3e} \
         exceeds 1e-8, need at least {required} levels"
    )]
    CutoffTooSmall {
        amplitude: f64,
        cutoff: usize,
        tail: f64,
        required: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("no steady state: {0}")]
    NoSteadyState(String),

    #[error("steady state did not converge: residual {residual:.3e} after t = {time}")]
    SteadyStateNotConverged { residual: f64, time: f64 },

    #[error("positivity lost at t = {time}: minimum eigenvalue {min_eigenvalue:.3e}, reduce dt")]
    StepSize { time: f64, min_eigenvalue: f64 },

    #[error("integration failed at step {step}: {reason}")]
    Integration { step: usize, reason: String },

    #[error("classical trajectory diverged at step {step} (|alpha| = {magnitude:.3e})")]
    Divergence { step: usize, magnitude: f64 },

    #[error("{file}:{line}: {message}")]
    EdgeList { file: String, line: usize, message: String },

    #[error("eigenvalue iteration did not converge for a {0}x{0} matrix")]
    EigenNotConverged(usize),

    #[error("exhaustive spin seeding limited to 12 modes, got {0}")]
    TooManyModes(usize),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
