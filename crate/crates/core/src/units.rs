//! Decibel and photon arithmetic shared by the link models.

/// Planck constant, J*s (exact, SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// dBm to watts. `f64::NEG_INFINITY` maps to 0 W.
pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

/// Linear power ratio for a loss of `db` decibels.
pub fn db_to_ratio(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// dB/km to nepers (power) per km.
pub fn db_per_km_to_per_km(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 10.0
}

pub fn photon_energy_j(wavelength_nm: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}
