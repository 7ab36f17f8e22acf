//! Photon loss and dephasing on the photonic modes.
//!
//! Both channels are applied in closed form: amplitude damping through its
//! Kraus operators `⟨n-k|K_k|n⟩ = √(C(n,k) (1-η)^k η^{n-k})` with
//! `η = e^{-κ̃}`, phase damping as the elementwise factor
//! `e^{-κ̃ (m-n)²/2}`. Emitters are never damped. The maps are linear and
//! also accept non-physical inputs such as φ-derivatives of a state.
//!
//! [`superoperator_oracle`] exponentiates the vectorized Lindbladian
//! directly; it is slow and only meant to cross-check the closed forms.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // std, when linked, shadows these methods
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fock::{mode_operator, DensityOperator, OperatorKind, Subsystem, SystemLayout};
use crate::linalg::{self, CMat, CVec, C64};

/// Dimensionless noise strength `κ̃ = κ T_κ`, applied as amplitude damping
/// on both modes followed by phase damping on both modes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseConfig {
    kappa_tilde: f64,
}

impl NoiseConfig {
    pub fn new(kappa_tilde: f64) -> Result<Self> {
        if kappa_tilde.is_nan() || kappa_tilde < 0.0 {
            return Err(Error::NegativeRate(kappa_tilde));
        }
        Ok(NoiseConfig { kappa_tilde })
    }

    pub fn noiseless() -> Self {
        NoiseConfig { kappa_tilde: 0.0 }
    }

    pub fn kappa_tilde(&self) -> f64 {
        self.kappa_tilde
    }

    pub fn is_noiseless(&self) -> bool {
        self.kappa_tilde == 0.0
    }
}

/// Precomputed channel coefficients for one layout and noise strength.
#[derive(Debug, Clone)]
pub struct NoiseChannel {
    layout: SystemLayout,
    kappa_tilde: f64,
    /// `kraus[n][k]` = `⟨n-k|K_k|n⟩`.
    kraus: Vec<Vec<f64>>,
    /// `dephasing[d]` = `e^{-κ̃ d²/2}`.
    dephasing: Vec<f64>,
}

impl NoiseChannel {
    pub fn new(layout: SystemLayout, kappa_tilde: f64) -> Result<Self> {
        NoiseConfig::new(kappa_tilde)?;
        let eta = (-kappa_tilde).exp();
        let levels = layout.levels();
        let kraus = (0..levels)
            .map(|n| {
                let mut binom = 1.0f64;
                (0..=n)
                    .map(|k| {
                        if k > 0 {
                            binom = binom * (n - k + 1) as f64 / k as f64;
                        }
                        let loss = (1.0 - eta).powi(k as i32);
                        let keep = eta.powi((n - k) as i32);
                        (binom * loss * keep).sqrt()
                    })
                    .collect()
            })
            .collect();
        let dephasing = (0..levels)
            .map(|d| {
                if d == 0 {
                    1.0
                } else {
                    (-kappa_tilde * (d * d) as f64 / 2.0).exp()
                }
            })
            .collect();
        Ok(NoiseChannel {
            layout,
            kappa_tilde,
            kraus,
            dephasing,
        })
    }

    pub fn kappa_tilde(&self) -> f64 {
        self.kappa_tilde
    }

    fn levels_of(&self, mode: Subsystem) -> Vec<usize> {
        self.layout.basis().map(|lv| lv[mode.index()]).collect()
    }

    /// `lowered[i][k]`: index of basis state `i` with `k` photons removed
    /// from `mode`.
    fn lowered(&self, mode: Subsystem) -> Vec<Vec<usize>> {
        let l = self.layout;
        l.basis()
            .map(|[n1, n2, e1, e2]| {
                let n = if mode == Subsystem::Mode1 { n1 } else { n2 };
                (0..=n)
                    .map(|k| match mode {
                        Subsystem::Mode1 => l.index(n1 - k, n2, e1, e2),
                        _ => l.index(n1, n2 - k, e1, e2),
                    })
                    .collect()
            })
            .collect()
    }

    fn check(&self, m: &CMat, mode: Subsystem) -> Result<()> {
        self.layout.require_mode(mode)?;
        let dim = self.layout.dim();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.nrows(),
            });
        }
        Ok(())
    }

    /// `Σ_k K_k M K_k†` on one mode.
    pub fn amplitude_damping(&self, m: &CMat, mode: Subsystem) -> Result<CMat> {
        self.check(m, mode)?;
        if self.kappa_tilde == 0.0 {
            return Ok(m.clone());
        }
        let dim = self.layout.dim();
        let levels = self.levels_of(mode);
        let lowered = self.lowered(mode);
        let mut out = CMat::zeros(dim, dim);
        for j in 0..dim {
            let nj = levels[j];
            let kj = &self.kraus[nj];
            for i in 0..dim {
                let v = m[(i, j)];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                let ni = levels[i];
                let ki = &self.kraus[ni];
                for k in 0..=ni.min(nj) {
                    out[(lowered[i][k], lowered[j][k])] += v * (ki[k] * kj[k]);
                }
            }
        }
        Ok(out)
    }

    /// Elementwise dephasing on one mode; the diagonal is left untouched.
    pub fn phase_damping(&self, m: &CMat, mode: Subsystem) -> Result<CMat> {
        self.check(m, mode)?;
        let mut out = m.clone();
        if self.kappa_tilde == 0.0 {
            return Ok(out);
        }
        let dim = self.layout.dim();
        let levels = self.levels_of(mode);
        for j in 0..dim {
            for i in 0..dim {
                let d = levels[i].abs_diff(levels[j]);
                if d != 0 {
                    out[(i, j)] *= self.dephasing[d];
                }
            }
        }
        Ok(out)
    }

    /// Amplitude damping on both modes, then phase damping on both modes.
    pub fn apply(&self, m: &CMat) -> Result<CMat> {
        if self.kappa_tilde == 0.0 {
            self.check(m, Subsystem::Mode1)?;
            return Ok(m.clone());
        }
        let mut out = self.amplitude_damping(m, Subsystem::Mode1)?;
        out = self.amplitude_damping(&out, Subsystem::Mode2)?;
        out = self.phase_damping(&out, Subsystem::Mode1)?;
        self.phase_damping(&out, Subsystem::Mode2)
    }
}

fn full_state(rho: &DensityOperator) -> Result<()> {
    if rho.is_full() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(
            "noise channels act on full-layout density operators".into(),
        ))
    }
}

pub fn amplitude_damping(
    rho: &DensityOperator,
    kappa_tilde: f64,
    mode: Subsystem,
) -> Result<DensityOperator> {
    full_state(rho)?;
    let ch = NoiseChannel::new(rho.layout(), kappa_tilde)?;
    Ok(rho.with_matrix(ch.amplitude_damping(rho.matrix(), mode)?))
}

pub fn phase_damping(
    rho: &DensityOperator,
    kappa_tilde: f64,
    mode: Subsystem,
) -> Result<DensityOperator> {
    full_state(rho)?;
    let ch = NoiseChannel::new(rho.layout(), kappa_tilde)?;
    Ok(rho.with_matrix(ch.phase_damping(rho.matrix(), mode)?))
}

pub fn apply_noise(rho: &DensityOperator, config: &NoiseConfig) -> Result<DensityOperator> {
    full_state(rho)?;
    let ch = NoiseChannel::new(rho.layout(), config.kappa_tilde())?;
    Ok(rho.with_matrix(ch.apply(rho.matrix())?))
}

/// Largest layout dimension the superoperator oracle accepts.
pub const ORACLE_DIM_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleChannel {
    /// Jump operators `{a1, a2}`.
    AmplitudeDamping,
    /// Jump operators `{n1, n2}`.
    PhaseDamping,
    /// `e^{L_pd κ̃} e^{L_ad κ̃}`, the order used by [`apply_noise`].
    Sequential,
    /// `e^{(L_ad + L_pd) κ̃}`.
    Simultaneous,
}

/// Row-major vectorized Lindbladian `Σ L⊗L̄ - ½(L†L⊗I + I⊗(L†L)ᵀ)`.
fn vectorized_lindbladian(jumps: &[CMat]) -> CMat {
    let d = jumps[0].nrows();
    let id = CMat::identity(d, d);
    let mut gen = CMat::zeros(d * d, d * d);
    for l in jumps {
        let ldl = l.adjoint() * l;
        gen += l.kronecker(&l.map(|z| z.conj()));
        gen -= (ldl.kronecker(&id) + id.kronecker(&ldl.transpose())) * C64::new(0.5, 0.0);
    }
    gen
}

/// Applies a channel by exponentiating its vectorized Lindbladian for time
/// `κ̃` (unit rate). Linear; accepts any square matrix over the layout.
pub fn superoperator_oracle_matrix(
    m: &CMat,
    layout: SystemLayout,
    kappa_tilde: f64,
    channel: OracleChannel,
) -> Result<CMat> {
    NoiseConfig::new(kappa_tilde)?;
    let d = layout.dim();
    if d > ORACLE_DIM_LIMIT {
        return Err(Error::OracleTooLarge {
            dim: d,
            limit: ORACLE_DIM_LIMIT,
        });
    }
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.nrows(),
        });
    }
    let modes = [Subsystem::Mode1, Subsystem::Mode2];
    let jumps = |kind: OperatorKind| -> Result<Vec<CMat>> {
        modes
            .iter()
            .map(|&s| mode_operator(kind, s, layout))
            .collect()
    };
    let ad = vectorized_lindbladian(&jumps(OperatorKind::Annihilation)?);
    let pd = vectorized_lindbladian(&jumps(OperatorKind::Number)?);
    let t = C64::new(kappa_tilde, 0.0);
    let propagator = match channel {
        OracleChannel::AmplitudeDamping => linalg::expm(&(ad * t)),
        OracleChannel::PhaseDamping => linalg::expm(&(pd * t)),
        OracleChannel::Sequential => linalg::expm(&(pd * t)) * linalg::expm(&(ad * t)),
        OracleChannel::Simultaneous => linalg::expm(&((ad + pd) * t)),
    };
    let mut v = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        for j in 0..d {
            v[i * d + j] = m[(i, j)];
        }
    }
    let out = propagator * CVec::from_vec(v);
    Ok(CMat::from_fn(d, d, |i, j| out[i * d + j]))
}

pub fn superoperator_oracle(
    rho: &DensityOperator,
    kappa_tilde: f64,
    channel: OracleChannel,
) -> Result<DensityOperator> {
    full_state(rho)?;
    let m = superoperator_oracle_matrix(rho.matrix(), rho.layout(), kappa_tilde, channel)?;
    Ok(rho.with_matrix(m))
}
