//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building layouts and plans.
///
/// Input rejections (bad device, oversized field, missing link, guard
/// violations) are distinguished from I/O and serialization failures so
/// callers can map them to different exit statuses.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("device '{device}' is not allowed for section '{section}'")]
    DeviceNotAllowed { section: String, device: String },

    #[error("unknown device '{device}'")]
    UnknownDevice { device: String },

    #[error("unknown field '{field}'")]
    UnknownField { field: String },

    #[error("unknown section '{section}'")]
    UnknownSection { section: String },

    #[error("field '{field}' ({elem_bytes} B) does not fit the cluster capacity of {capacity} B")]
    FieldExceedsCapacity {
        field: String,
        elem_bytes: u64,
        capacity: u64,
    },

    #[error("sections '{sections}' share no allowed device")]
    NoCommonDevice { sections: String },

    #[error("section '{section}' has no allowed device in this architecture")]
    NoAllowedDevice { section: String },

    #[error("no link between devices '{from}' and '{to}'")]
    MissingLink { from: String, to: String },

    #[error("layout does not span the program fields: {detail}")]
    LayoutSpanMismatch { detail: String },

    #[error("invalid layout string '{input}': {reason}")]
    InvalidLayoutString { input: String, reason: String },

    #[error("{count} fields exceed the exhaustive-search bound of {limit}")]
    TooManyFields { count: usize, limit: usize },

    #[error("{count} sections exceed the exhaustive-search bound of {limit}")]
    TooManySections { count: usize, limit: usize },

    #[error("duplicate profile entry for ({section}, {device}, {layout})")]
    DuplicateProfileEntry {
        section: String,
        device: String,
        layout: String,
    },

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of reading or decoding input files, as opposed
    /// to semantically invalid inputs.
    pub fn is_io_or_parse(&self) -> bool {
        matches!(
            self,
            Error::Io(_) | Error::Json(_) | Error::SchemaVersion { .. }
        )
    }
}
