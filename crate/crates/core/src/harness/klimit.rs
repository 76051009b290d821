use std::sync::Arc;

use rayon::prelude::*;

use super::{HarnessError, Settings};
use crate::assembly::{CoefficientField, ScalarField};
use crate::functionals::energy;
use crate::geometry::{BoundaryData, Configuration};
use crate::mesh::{generate_mesh, MeshParams, Region};
use crate::solvers::{solve_finite_k, solve_perfect_constrained};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KLimitRow {
    pub k: f64,
    /// `I_k[u_k] = ½ (k ∫_ω |∇u_k|² + ∫_{Ω∖ω} |∇u_k|²)`
    pub i_k: f64,
    /// `I_∞[u_∞] - I_k[u_k]`
    pub gap: f64,
    /// `‖∇(u_k - u_∞)‖_{L²(Ω)}`
    pub h1_distance: f64,
    /// `∫_ω |∇u_k|²`
    pub interior_energy: f64,
    /// inclusion part of `I_k[u_k]`, `½ k ∫_ω |∇u_k|²`
    pub interior_term: f64,
}

#[derive(Debug, Clone)]
pub struct KLimitTable {
    pub i_inf: f64,
    pub nodes: usize,
    pub rows: Vec<KLimitRow>,
}

/// Finite-k transmission solutions against the perfect conductor on one
/// mesh with meshed inclusion interiors.
pub fn klimit_experiment(
    config: &Configuration,
    phi: &BoundaryData,
    k_list: &[f64],
    params: &MeshParams,
    settings: &Settings,
) -> Result<KLimitTable, HarnessError> {
    if k_list.len() < 2 || k_list.iter().any(|k| !(*k > 0.0)) || k_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::InvalidInput("k values must be positive and strictly increasing".into()));
    }
    if k_list[k_list.len() - 1] / k_list[0] < 1e4 * (1.0 - 1e-12) {
        return Err(HarnessError::InvalidInput("k values must span at least four decades".into()));
    }
    let params = MeshParams { include_interiors: true, ..params.clone() };
    let mesh = Arc::new(generate_mesh(config, &params)?);
    let n = config.ambient_dim;
    let coeff = &settings.coeff;
    let perfect = solve_perfect_constrained(config, &mesh, phi, coeff, settings.solve)?;
    let i_inf = 0.5 * energy(&perfect.u, coeff, n, Region::is_matrix)?;

    let rows = k_list
        .par_iter()
        .map(|&k| -> Result<KLimitRow, HarnessError> {
            let u = solve_finite_k(config, &mesh, phi, k, coeff, settings.solve)?;
            let interior_energy = energy(&u, coeff, n, Region::is_inclusion)?;
            let outside = energy(&u, coeff, n, Region::is_matrix)?;
            let interior_term = 0.5 * k * interior_energy;
            let i_k = interior_term + 0.5 * outside;
            let diff: ScalarField = u.combine(1.0, &perfect.u, -1.0);
            let h1_distance = energy(&diff, &CoefficientField::Identity, n, |_| true)?.sqrt();
            Ok(KLimitRow { k, i_k, gap: i_inf - i_k, h1_distance, interior_energy, interior_term })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(KLimitTable { i_inf, nodes: mesh.num_nodes(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{OuterDomain, Shape};

    #[test]
    fn energies_increase_towards_the_limit() {
        let c = Configuration::place(
            OuterDomain::disk([0.0, 0.0], 3.0),
            Shape::Disk { radius: 1.0 },
            Shape::Disk { radius: 1.0 },
            0.1,
            2,
        )
        .unwrap();
        let params = MeshParams { h_bulk: 0.4, ..Default::default() };
        let t = klimit_experiment(&c, &BoundaryData::Linear([1.0, 0.0]), &[1.0, 1e2, 1e4], &params, &Settings::default())
            .unwrap();
        assert!(t.rows.windows(2).all(|w| w[1].i_k >= w[0].i_k && w[1].h1_distance < w[0].h1_distance));
        assert!(t.rows.iter().all(|r| r.i_k <= t.i_inf * (1.0 + 1e-9)));
    }

    #[test]
    fn rejects_short_k_range() {
        let c = Configuration::place(
            OuterDomain::disk([0.0, 0.0], 3.0),
            Shape::Disk { radius: 1.0 },
            Shape::Disk { radius: 1.0 },
            0.1,
            2,
        )
        .unwrap();
        let r = klimit_experiment(
            &c,
            &BoundaryData::Linear([1.0, 0.0]),
            &[1.0, 10.0, 100.0],
            &MeshParams::default(),
            &Settings::default(),
        );
        assert!(matches!(r, Err(HarnessError::InvalidInput(_))));
    }
}
