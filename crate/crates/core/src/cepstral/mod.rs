//! The cepstral spectral model: coefficient grid, spectrum evaluation and the
//! two routes from coefficients to autocovariances.

mod acf;
mod coefficients;
mod recursion;
mod spectrum;

pub use acf::{acf_exact, acf_mesh, acf_mesh_with, AcfMethod, AcfTable};
pub use coefficients::{canonical_positions, CepstralGrid, CoefficientMask, FreeParamVector};
pub use recursion::{cepstral_to_ma, ma_acf, ComponentAcfs, MaCoefficients, DEFAULT_TRUNCATION, TAIL_TOLERANCE};
pub use spectrum::{
    log_spectrum, log_spectrum_matrix_form, log_spectrum_separable, spectrum_on_mesh, FrequencyGrid, MeshRule,
    SpectralMesh,
};

pub(crate) use spectrum::trig_poly_on_mesh;

/// Coefficients of the reciprocal spectrum `1/F`.
pub fn negate(grid: &CepstralGrid) -> CepstralGrid {
    grid.negate()
}
