//! Urban pollution sensor-network benchmark: two latent pollutant
//! concentrations observed by sensors placed on concentric squares, each
//! square's noise coupled to the average noise of the square before it.

use crate::error::{Error, Result};
use crate::model::{truncate, FactorDynamics, LoadingGenerator, NoiseModel, TruncatedModel};
use crate::scalar::{mat_from_f64, Scalar};

/// Hidden-factor dynamics of the two pollutant concentrations (hourly
/// sampling), identified from a year of monitoring-station data.
pub fn dynamics<T: Scalar>() -> FactorDynamics<T> {
    let a = mat_from_f64::<T>(2, 2, &[0.9692, -0.0442, 0.2582, 0.7707]);
    let q = mat_from_f64::<T>(2, 2, &[0.1682, 0.2806, 0.2806, 0.7531]);
    FactorDynamics::new(a, q).expect("benchmark dynamics are stable and reachable")
}

/// Loading generator: sensors alternate between the two pollutants, so the
/// rows cycle `(1,0), (0,1), (1,0), ...`.
pub fn loading() -> LoadingGenerator {
    LoadingGenerator::cyclic_identity(2)
}

/// Noise generator: each sensor sees unit white noise plus half the average
/// noise of the four sensors on the preceding square.
pub fn noise() -> NoiseModel {
    NoiseModel::square_cascade(0.5, 4)
}

/// The truncated benchmark model with `n_sensors` outputs.
///
/// The sensor count must be a positive multiple of 4 (one complete square at
/// a time).
pub fn model<T: Scalar>(n_sensors: usize) -> Result<TruncatedModel<T>> {
    if n_sensors < 4 || !n_sensors.is_multiple_of(4) {
        return Err(Error::InvalidDimension(format!(
            "sensor count must be a positive multiple of 4, got {n_sensors}"
        )));
    }
    truncate(&dynamics::<T>(), &loading(), &noise(), n_sensors)
}
