use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// More than 999 instances of one class in a scene.
    #[error("instance capacity exceeded for class {class_id}: index {index} > {max}", max = crate::model::MAX_INSTANCE)]
    InstanceCapacity { class_id: u16, index: u32 },

    #[error("invalid panoptic label {packed}: {reason}")]
    InvalidLabel { packed: u32, reason: &'static str },

    #[error("class id {class_id} outside [0, {num_classes}]")]
    InvalidClass { class_id: u32, num_classes: u16 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("pillar ({a}, {b}) out of bounds for {h}x{w} grid")]
    IndexOutOfBounds { a: usize, b: usize, h: usize, w: usize },

    #[error("oracle refuses {pillars} pillars (limit {limit})")]
    OracleScale { pillars: usize, limit: usize },

    #[error("raster shape mismatch: expected {expected_h}x{expected_w}, found {found_h}x{found_w}")]
    ShapeMismatch {
        expected_h: usize,
        expected_w: usize,
        found_h: usize,
        found_w: usize,
    },

    #[error("length mismatch: {what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid config at `{path}`: {reason}")]
    InvalidConfig { path: String, reason: String },

    #[error("could not place {archetype} after {attempts} attempts")]
    Placement { archetype: &'static str, attempts: usize },

    #[error("bad magic at byte 0: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },

    #[error("unsupported version {found} at byte 4 (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("unknown raster kind {code} at byte 8")]
    UnknownRasterKind { code: u8 },

    #[error("truncated {what}: expected {expected} bytes, found {actual}")]
    Truncated {
        what: &'static str,
        expected: u64,
        actual: u64,
    },

    #[error("trailing data in {what}: expected {expected} bytes, found {actual}")]
    TrailingData {
        what: &'static str,
        expected: u64,
        actual: u64,
    },

    #[error("ingestion failed: {0}")]
    Ingestion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
