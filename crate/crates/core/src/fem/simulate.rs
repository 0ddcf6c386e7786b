use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use super::solve::forward_voltages;
use super::{ConductivityField, ContactImpedances, NoiseSpec, StimulationProtocol};
use crate::geometry::Mesh2D;
use crate::Result;

/// Synthetic measurement data with its noise realization.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    /// Noisy measurements `V + e₁ + e₂`.
    pub voltages: DVector<f64>,
    /// Noiseless forward voltages on the data mesh.
    pub noiseless: DVector<f64>,
    /// The realized additive noise.
    pub noise: DVector<f64>,
}

/// Draw one realization of the two-component additive noise for the given
/// noiseless voltages: per-component std `relative · |V_i|` plus an i.i.d.
/// component with std `spread · (max V - min V)`. Deterministic per seed.
pub fn draw_noise(noiseless: &DVector<f64>, spec: &NoiseSpec, rng_seed: u64) -> DVector<f64> {
    let n = noiseless.len();
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let range = noiseless.max() - noiseless.min();
    let mut noise = DVector::zeros(n);
    for i in 0..n {
        let w: f64 = StandardNormal.sample(&mut rng);
        noise[i] = spec.relative * noiseless[i].abs() * w;
    }
    for i in 0..n {
        let w: f64 = StandardNormal.sample(&mut rng);
        noise[i] += spec.spread * range * w;
    }
    noise
}

/// Simulate measurements on a (fine) data mesh.
///
/// The data mesh should be strictly finer than any reconstruction mesh;
/// reusing the inversion mesh commits an inverse crime. This function does
/// not see the reconstruction mesh, so that check belongs to the caller.
pub fn simulate_measurements(
    mesh_fine: &Mesh2D,
    sigma_true: &ConductivityField,
    z: &ContactImpedances,
    protocol: &StimulationProtocol,
    noise: &NoiseSpec,
    rng_seed: u64,
) -> Result<SimulatedData> {
    let noiseless = forward_voltages(mesh_fine, sigma_true, z, protocol)?;
    let noise_vec = draw_noise(&noiseless, noise, rng_seed);
    let voltages = &noiseless + &noise_vec;
    Ok(SimulatedData {
        voltages,
        noiseless,
        noise: noise_vec,
    })
}
