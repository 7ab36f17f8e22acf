//! Characterization of prepared states: entanglement between the modes,
//! overlap with benchmark states, photon-number populations and
//! power-law fits of Fisher-information sweeps.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[allow(unused_imports)] // std, when linked, shadows these methods
use num_traits::Float;

use crate::circuits::{CircuitSpec, ParamKind};
use crate::error::{Error, Result};
use crate::fock::{
    noon_state, partial_trace, twin_fock_state, DensityOperator, PureState, Subsystem,
};
use crate::metrics::{after_first_beamsplitter, fidelity};

/// Eigenvalues below this contribute nothing to the entropy.
pub const ENTROPY_CUTOFF: f64 = 1e-14;

/// Reduced state of `mode`, every other subsystem traced out.
pub fn reduced_mode(state: &PureState, mode: Subsystem) -> Result<DensityOperator> {
    state.layout().require_mode(mode)?;
    partial_trace(&state.to_density(), &[mode])
}

/// Von Neumann entropy in bits.
pub fn entanglement_entropy(rho: &DensityOperator) -> f64 {
    let s: f64 = rho
        .eigenvalues()
        .into_iter()
        .filter(|&l| l > ENTROPY_CUTOFF)
        .map(|l| -l * l.log2())
        .sum();
    s.max(0.0)
}

/// `Tr ρ²`.
pub fn purity(rho: &DensityOperator) -> f64 {
    rho.matrix().iter().map(|z| z.norm_sqr()).sum()
}

pub fn diagonal_populations(rho: &DensityOperator) -> Vec<f64> {
    rho.matrix().diagonal().iter().map(|z| z.re).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkFidelities {
    /// Overlap of the state after the first beamsplitter with NOON.
    pub noon: f64,
    /// Overlap with the twin-Fock state after the same beamsplitter;
    /// `None` for odd photon numbers.
    pub tfs_bs: Option<f64>,
}

/// Fidelities of `prepared`, after the first beamsplitter and with
/// emitters traced out, to NOON and to beamsplit twin-Fock states of
/// `photons` photons.
pub fn benchmark_fidelities(prepared: &PureState, photons: usize) -> Result<BenchmarkFidelities> {
    let layout = prepared.layout();
    let photonic = layout.without_emitters();
    let split = after_first_beamsplitter(prepared);
    let noon = noon_state(photons, photonic)?;
    let tfs = if photons % 2 == 0 {
        Some(after_first_beamsplitter(&twin_fock_state(
            photons, photonic,
        )?))
    } else {
        None
    };
    if layout.has_emitters() {
        let rho = partial_trace(&split.to_density(), &[Subsystem::Mode1, Subsystem::Mode2])?;
        Ok(BenchmarkFidelities {
            noon: fidelity(&noon, &rho)?,
            tfs_bs: tfs.map(|t| fidelity(&t, &rho)).transpose()?,
        })
    } else {
        Ok(BenchmarkFidelities {
            noon: fidelity(&noon, &split)?,
            tfs_bs: tfs.map(|t| fidelity(&t, &split)).transpose()?,
        })
    }
}

/// `F⁻¹ ≈ e^{intercept} N^{-β}` from a least-squares line in log–log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub beta: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `(N, F⁻¹)` pairs; needs at least three points with positive values.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InvalidConfig(
            "scaling fit needs at least three points".into(),
        ));
    }
    if points
        .iter()
        .any(|&(n, f)| !(n > 0.0 && f > 0.0) || !n.is_finite() || !f.is_finite())
    {
        return Err(Error::InvalidConfig(
            "scaling fit needs positive finite points".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig(
            "scaling fit needs distinct N values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok(ScalingFit {
        beta: -slope,
        intercept,
        r_squared,
    })
}

/// Largest `|value|` per parameter kind.
pub fn max_abs_params(spec: &CircuitSpec, params: &[f64]) -> Result<BTreeMap<ParamKind, f64>> {
    if params.len() != spec.param_count() {
        return Err(Error::ParamCount {
            expected: spec.param_count(),
            found: params.len(),
        });
    }
    let mut out = BTreeMap::new();
    for (k, v) in spec.param_kinds().into_iter().zip(params) {
        let e = out.entry(k).or_insert(0.0f64);
        *e = e.max(v.abs());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateReport {
    pub entropy_mode1: f64,
    pub purity_mode1: f64,
    pub fidelity_noon: f64,
    pub fidelity_tfs_bs: Option<f64>,
    pub diagonal_mode1: Vec<f64>,
    pub max_abs_params: BTreeMap<ParamKind, f64>,
}

impl StateReport {
    pub fn new(
        prepared: &PureState,
        photons: usize,
        spec: &CircuitSpec,
        params: &[f64],
    ) -> Result<Self> {
        let rho1 = reduced_mode(prepared, Subsystem::Mode1)?;
        let bench = benchmark_fidelities(prepared, photons)?;
        Ok(StateReport {
            entropy_mode1: entanglement_entropy(&rho1),
            purity_mode1: purity(&rho1),
            fidelity_noon: bench.noon,
            fidelity_tfs_bs: bench.tfs_bs,
            diagonal_mode1: diagonal_populations(&rho1),
            max_abs_params: max_abs_params(spec, params)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::AnsatzKind;
    use crate::fock::{coherent_amplitudes, SystemLayout};
    use crate::linalg::{CMat, C64};
    use alloc::vec;

    fn maximally_mixed(k: usize) -> DensityOperator {
        let layout = SystemLayout::photonic(k - 1).unwrap();
        let full = CMat::from_diagonal_element(k * k, k * k, C64::new(1.0 / (k * k) as f64, 0.0));
        partial_trace(
            &DensityOperator::new(layout, full).unwrap(),
            &[Subsystem::Mode1],
        )
        .unwrap()
    }

    #[test]
    fn benchmark_state_anchors() {
        let layout = SystemLayout::photonic(6).unwrap();
        for n in [2, 4, 6] {
            let noon = reduced_mode(&noon_state(n, layout).unwrap(), Subsystem::Mode1).unwrap();
            assert!((entanglement_entropy(&noon) - 1.0).abs() < 1e-8);
            assert!((purity(&noon) - 0.5).abs() < 1e-8);
            let tfs = reduced_mode(&twin_fock_state(n, layout).unwrap(), Subsystem::Mode1).unwrap();
            assert!(entanglement_entropy(&tfs).abs() < 1e-8);
            assert!((purity(&tfs) - 1.0).abs() < 1e-8);
        }
        for k in [2, 3, 5] {
            let r = maximally_mixed(k);
            assert!((entanglement_entropy(&r) - (k as f64).log2()).abs() < 1e-10);
            assert!((purity(&r) - 1.0 / k as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn populations_of_product_states() {
        let layout = SystemLayout::photonic(12).unwrap();
        let a = coherent_amplitudes(C64::new(1.3, 0.0), 12);
        let psi = PureState::product(layout, &a, &[C64::new(1.0, 0.0)]).unwrap();
        let p = diagonal_populations(&reduced_mode(&psi, Subsystem::Mode1).unwrap());
        for (n, z) in a.iter().enumerate() {
            assert!((p[n] - z.norm_sqr()).abs() < 1e-12);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let fock = PureState::fock(layout, 3, 1).unwrap();
        let p = diagonal_populations(&reduced_mode(&fock, Subsystem::Mode1).unwrap());
        assert_eq!(p[3], 1.0);
        assert_eq!(p.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn benchmark_fidelity_anchors() {
        let layout = SystemLayout::capped(8, false).unwrap();
        let tfs = twin_fock_state(4, layout).unwrap();
        let b = benchmark_fidelities(&tfs, 4).unwrap();
        assert!((b.tfs_bs.unwrap() - 1.0).abs() < 1e-12);
        let vac = PureState::fock(layout, 0, 0).unwrap();
        let b = benchmark_fidelities(&vac, 4).unwrap();
        assert!(b.noon.abs() < 1e-12 && b.tfs_bs.unwrap().abs() < 1e-12);
        assert!(benchmark_fidelities(&vac, 3).unwrap().tfs_bs.is_none());

        let with_e = SystemLayout::capped(8, true).unwrap();
        let tfs = twin_fock_state(4, with_e).unwrap();
        let b = benchmark_fidelities(&tfs, 4).unwrap();
        assert!((b.tfs_bs.unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn scaling_fits() {
        let hl: Vec<(f64, f64)> = (2..8).map(|n| (n as f64, 1.0 / (n * n) as f64)).collect();
        let f = fit_scaling(&hl).unwrap();
        assert!((f.beta - 2.0).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let sql: Vec<(f64, f64)> = (2..8).map(|n| (n as f64, 1.0 / n as f64)).collect();
        assert!((fit_scaling(&sql).unwrap().beta - 1.0).abs() < 1e-10);
        assert!(fit_scaling(&hl[..2]).is_err());
        assert!(fit_scaling(&[(1.0, 1.0), (2.0, -1.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn report_lists_parameter_maxima() {
        let layout = SystemLayout::capped(4, true).unwrap();
        let spec = CircuitSpec::new(AnsatzKind::Emitter, 2).unwrap();
        let psi = twin_fock_state(2, layout).unwrap();
        let r = StateReport::new(&psi, 2, &spec, &[0.1, -2.0, 0.3, -0.4, 1.0, -5.0]).unwrap();
        assert_eq!(r.max_abs_params[&ParamKind::Tunneling], 0.4);
        assert_eq!(r.max_abs_params[&ParamKind::Detuning], 2.0);
        assert_eq!(r.max_abs_params[&ParamKind::Coupling], 5.0);
        assert!(r.entropy_mode1.abs() < 1e-8);
        assert_eq!(r.diagonal_mode1.len(), 5);
        assert!(max_abs_params(&spec, &vec![0.0; 3]).is_err());
    }
}
