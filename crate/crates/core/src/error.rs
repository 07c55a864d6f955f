use alloc::string::String;

/// Errors raised by the simulation and evaluation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("`{entity}` lies outside the scene bounds")]
    OutOfBounds { entity: String },
    #[error("malformed polygon for `{entity}`: {reason}")]
    MalformedPolygon {
        entity: String,
        reason: &'static str,
    },
    #[error("invalid value for `{entity}`: {reason}")]
    InvalidParameter {
        entity: String,
        reason: &'static str,
    },

    #[error("timestamp {t} is outside the trajectory span [{start}, {end}]")]
    OutsideTrajectory { t: f64, start: f64, end: f64 },
    #[error("region is too small to hold the trajectory")]
    RegionTooSmall,

    #[error("point is not in front of the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("target projects fully outside the image")]
    OutsideImage,
    #[error("box is clipped at the image border; depth is not recoverable")]
    ClippedBox,

    #[error("target carries no RF device")]
    RfInvisible,
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("need ranges from at least {need} transmitters, got {have}")]
    InsufficientRanges { need: usize, have: usize },
    #[error("transmitter geometry is degenerate")]
    DegenerateGeometry,
    #[error("two-transmitter solution is ambiguous within the prior region")]
    AmbiguousSolution,
    #[error("least-squares solver diverged")]
    SolverDiverged,
    #[error("error configuration `{0}` has no calibrated gamma parameters")]
    Uncalibrated(String),
    #[error(
        "quantile targets median={median}, p95={p95} are not achievable by a gamma distribution"
    )]
    InfeasibleQuantiles { median: f64, p95: f64 },

    #[error("need at least {need} fixes spanning {window} s for activity classification")]
    InsufficientFixes { need: usize, window: f64 },

    #[error("series of {len} samples spanning {span} s is too short for a {window} s window")]
    SeriesTooShort { len: usize, span: f64, window: f64 },
    #[error("ground truth contains no labels")]
    EmptyGroundTruth,
    #[error("frame ({camera_id}, {frame_id}) has no ground-truth counterpart")]
    MisalignedFrames { camera_id: String, frame_id: u64 },
}

/// Coarse classification used by front-ends to map failures to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The input description violates a schema or invariant.
    Config,
    /// The inputs are well-formed but the requested computation has no answer.
    Infeasible,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::DuplicateId(_)
            | Error::OutOfBounds { .. }
            | Error::MalformedPolygon { .. }
            | Error::InvalidParameter { .. }
            | Error::Uncalibrated(_)
            | Error::MisalignedFrames { .. }
            | Error::EmptyGroundTruth => ErrorClass::Config,
            _ => ErrorClass::Infeasible,
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
