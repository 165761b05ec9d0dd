//! Decibel helpers. Power quantities are linear milliwatts unless a name
//! says otherwise.

/// dB (or dBm) to linear ratio (or mW).
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

#[inline]
pub fn mw_to_dbm(mw: f64) -> f64 {
    linear_to_db(mw)
}

/// Thermal noise power in mW over `bandwidth_hz` for a density in dBm/Hz.
pub fn noise_power_mw(density_dbm_per_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_mw(density_dbm_per_hz + linear_to_db(bandwidth_hz))
}
