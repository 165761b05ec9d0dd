use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate grid: inter-site distance {isd_m} m exceeds the {region} extent of {extent_m} m")]
    DegenerateGrid {
        region: &'static str,
        isd_m: f64,
        extent_m: f64,
    },

    #[error("invalid area: {0}")]
    InvalidArea(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("coincident points: elevation angle undefined")]
    CoincidentPoints,

    #[error("satellite at {sat_z_km} km is not above the UE at {ue_z_km} km")]
    SatelliteBelowUe { sat_z_km: f64, ue_z_km: f64 },

    #[error("orphan UE {ue}: association row has no positive weight")]
    OrphanUe { ue: usize },

    #[error("non-positive rate {rate} for UE {ue}")]
    NonPositiveRate { ue: usize, rate: f64 },

    #[error("uncoverable UE {ue}: no MBS reaches the RSRP threshold at maximum power")]
    UncoverableUe { ue: usize },

    #[error("infeasible coverage at MBS {mbs}: floor {floor_mw} mW exceeds maximum {max_mw} mW")]
    InfeasibleCoverage {
        mbs: usize,
        floor_mw: f64,
        max_mw: f64,
    },

    #[error("zero baseline for relative gain")]
    ZeroBaseline,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
