use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArmError {
    #[error("joint {joint} velocity {velocity:.4} rad/s exceeds limit {limit:.4} at step {step}")]
    VelocityLimit {
        joint: usize,
        step: usize,
        velocity: f64,
        limit: f64,
    },
    #[error("target unreachable: wrist point at distance {wrist_distance:.4} m outside 2-link annulus [{min:.4}, {max:.4}]")]
    Unreachable {
        wrist_distance: f64,
        min: f64,
        max: f64,
    },
    #[error("trajectory shape {rows}x{cols} does not match configured {t}x{m}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        t: usize,
        m: usize,
    },
    #[error("duration {duration:.3} s exceeds horizon {horizon:.3} s")]
    DurationTooLong { duration: f64, horizon: f64 },
    #[error("dataset generation: giving up on record {record} after {attempts} attempts: {source}")]
    Generation {
        record: usize,
        attempts: usize,
        #[source]
        source: Box<ArmError>,
    },
    #[error("dataset file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ArmError>;
