//! Fidelities, Fisher information estimators and phase derivatives.
//!
//! The prepared state `ψ_P` is sent through `U_BS U_E(φ) U_BS`, then through
//! the noise channels when `κ̃ > 0`. The QFI is estimated from the fidelity
//! of two copies encoded at `φ` and `φ + δ`; exact pure-state and SLD forms
//! are available as oracles. The CFI is taken in the photon-number basis
//! after an optional measurement circuit.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_3, FRAC_PI_4};
#[allow(unused_imports)] // std, when linked, shadows these methods
use num_traits::Float;

use crate::circuits::{Circuit, Optics};
use crate::error::{Error, Result};
use crate::fock::{DensityOperator, PureState, Subsystem, SystemLayout};
use crate::linalg::{self, CMat, CVec, C64};
use crate::noise::{NoiseChannel, NoiseConfig};

/// Working point of the phase estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingPoint {
    pub phi: f64,
    pub delta: f64,
}

impl EncodingPoint {
    pub fn new(phi: f64, delta: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::NonFinite);
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::NotPositive(delta));
        }
        Ok(EncodingPoint { phi, delta })
    }
}

impl Default for EncodingPoint {
    fn default() -> Self {
        EncodingPoint {
            phi: FRAC_PI_3,
            delta: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherMethod {
    DeltaFidelity,
    ExactPure,
    ExactSld,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherResult {
    pub qfi: f64,
    pub cfi: Option<f64>,
    pub method: FisherMethod,
}

/// Which outcomes the photon-counting measurement distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Readout {
    /// Emitters are traced out; outcomes are `(n1, n2)`.
    #[default]
    PhotonsOnly,
    /// Emitter levels are read out together with the photon numbers.
    Joint,
}

/// Either a state vector or a density operator.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a PureState),
    Mixed(&'a DensityOperator),
}

impl<'a> From<&'a PureState> for StateRef<'a> {
    fn from(s: &'a PureState) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityOperator> for StateRef<'a> {
    fn from(r: &'a DensityOperator) -> Self {
        StateRef::Mixed(r)
    }
}

impl StateRef<'_> {
    pub fn layout(&self) -> SystemLayout {
        match self {
            StateRef::Pure(s) => s.layout(),
            StateRef::Mixed(r) => r.layout(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            StateRef::Pure(s) => s.layout().dim(),
            StateRef::Mixed(r) => r.dim(),
        }
    }

    fn require_full(&self) -> Result<()> {
        match self {
            StateRef::Mixed(r) if !r.is_full() => Err(Error::InvalidConfig(
                "encoding needs a density operator over the full layout".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Eigenvalue magnitude below which negative eigenvalues are clipped.
pub const NEGATIVITY_CLIP: f64 = 1e-9;
/// Populations below this are skipped in the CFI sum.
pub const CFI_THRESHOLD: f64 = 1e-12;
/// Denominator cutoff of the SLD sum.
pub const SLD_THRESHOLD: f64 = 1e-12;

/// Relative eigenvalue cutoff for the square-root factors in
/// [`uhlmann_fidelity`].
pub const SPECTRAL_TOL: f64 = 1e-14;

/// `Tr √(√ρ σ √ρ)`, evaluated as the nuclear norm of `√ρ √σ` built from
/// truncated spectral factors so that roundoff eigenvalues are never
/// square-rooted.
pub fn uhlmann_fidelity(rho: &CMat, sigma: &CMat) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            found: sigma.nrows(),
        });
    }
    let a = linalg::psd_factor(rho, NEGATIVITY_CLIP, SPECTRAL_TOL)?;
    let b = linalg::psd_factor(sigma, NEGATIVITY_CLIP, SPECTRAL_TOL)?;
    Ok(linalg::nuclear_norm(&(a.adjoint() * b)))
}

/// `√⟨ψ|ρ|ψ⟩`.
fn pure_mixed_fidelity(psi: &[C64], rho: &CMat) -> f64 {
    let v = CVec::from_column_slice(psi);
    let x = (v.adjoint() * rho * &v)[(0, 0)].re;
    x.max(0.0).sqrt()
}

/// State fidelity `|⟨a|b⟩|` or its Uhlmann generalization.
pub fn fidelity<'a, 'b>(a: impl Into<StateRef<'a>>, b: impl Into<StateRef<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let f = match (a, b) {
        (StateRef::Pure(x), StateRef::Pure(y)) => x.inner(y).norm(),
        (StateRef::Pure(x), StateRef::Mixed(r)) | (StateRef::Mixed(r), StateRef::Pure(x)) => {
            pure_mixed_fidelity(x.as_slice(), r.matrix())
        }
        (StateRef::Mixed(r), StateRef::Mixed(s)) => uhlmann_fidelity(r.matrix(), s.matrix())?,
    };
    Ok(f.min(1.0))
}

/// Output of the encoding stage together with its φ-derivative.
#[derive(Debug, Clone)]
pub enum EncodedOutput {
    Pure {
        psi: CVec,
        dpsi: CVec,
    },
    /// Spectral data of `ρ_E` and `∂ρ_E`: `Σ w_k |v_k⟩⟨v_k|`.
    Mixed {
        rho: Vec<(f64, CVec)>,
        drho: Vec<(f64, CVec)>,
    },
}

const SPECTRAL_CUTOFF: f64 = 1e-15;

fn spectral_terms(m: &CMat) -> Vec<(f64, CVec)> {
    let (vals, vecs) = linalg::eigh(m);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    vals.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > SPECTRAL_CUTOFF * scale.max(1.0))
        .map(|(k, &v)| (v, vecs.column(k).into_owned()))
        .collect()
}

impl EncodedOutput {
    fn from_mixed(rho: &CMat, drho: &CMat) -> Self {
        EncodedOutput::Mixed {
            rho: spectral_terms(rho),
            drho: spectral_terms(drho),
        }
    }

    /// Outcome probabilities and their φ-derivatives after `circuit`.
    pub fn probabilities(
        &self,
        optics: &Optics,
        circuit: Option<&Circuit>,
        readout: Readout,
    ) -> (Vec<f64>, Vec<f64>) {
        let layout = optics.layout();
        let run = |v: &CVec| -> Vec<C64> {
            let mut x = v.as_slice().to_vec();
            if let Some(c) = circuit {
                c.apply(optics, &mut x);
            }
            x
        };
        let dim = layout.dim();
        let (mut p, mut dp) = (vec![0.0; dim], vec![0.0; dim]);
        match self {
            EncodedOutput::Pure { psi, dpsi } => {
                let (a, b) = (run(psi), run(dpsi));
                for i in 0..dim {
                    p[i] = a[i].norm_sqr();
                    dp[i] = 2.0 * (a[i].conj() * b[i]).re;
                }
            }
            EncodedOutput::Mixed { rho, drho } => {
                for (target, terms) in [(&mut p, rho), (&mut dp, drho)] {
                    for (w, v) in terms {
                        for (t, z) in target.iter_mut().zip(run(v)) {
                            *t += w * z.norm_sqr();
                        }
                    }
                }
            }
        }
        match readout {
            Readout::Joint => (p, dp),
            Readout::PhotonsOnly => (
                group_photon_outcomes(layout, &p),
                group_photon_outcomes(layout, &dp),
            ),
        }
    }

    /// CFI of photon counting after `circuit`.
    pub fn cfi(&self, optics: &Optics, circuit: Option<&Circuit>, readout: Readout) -> Result<f64> {
        let (p, dp) = self.probabilities(optics, circuit, readout);
        cfi_from_probabilities(&p, &dp)
    }

    /// Dense `(ρ_E, ∂ρ_E)`.
    pub fn to_matrices(&self) -> (CMat, CMat) {
        match self {
            EncodedOutput::Pure { psi, dpsi } => {
                let rho = linalg::outer(psi.as_slice(), psi.as_slice());
                let d = linalg::outer(dpsi.as_slice(), psi.as_slice());
                let drho = &d + d.adjoint();
                (rho, drho)
            }
            EncodedOutput::Mixed { rho, drho } => {
                let build = |terms: &Vec<(f64, CVec)>| {
                    let n = terms.first().map_or(0, |t| t.1.len());
                    let mut m = CMat::zeros(n, n);
                    for (w, v) in terms {
                        m += linalg::outer(v.as_slice(), v.as_slice()) * C64::new(*w, 0.0);
                    }
                    m
                };
                (build(rho), build(drho))
            }
        }
    }
}

/// Sums full-layout outcome weights over emitter levels.
pub fn group_photon_outcomes(layout: SystemLayout, weights: &[f64]) -> Vec<f64> {
    let ed = layout.emitter_dim();
    weights.chunks(ed).map(|c| c.iter().sum()).collect()
}

/// `Σ (∂p)² / p`, skipping `p` below [`CFI_THRESHOLD`].
pub fn cfi_from_probabilities(p: &[f64], dp: &[f64]) -> Result<f64> {
    if p.len() != dp.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: dp.len(),
        });
    }
    let mut total = 0.0;
    for (&pn, &dn) in p.iter().zip(dp) {
        if pn < -1e-10 {
            return Err(Error::NotPositive(pn));
        }
        if pn < CFI_THRESHOLD {
            if dn.abs() > 1e-9 {
                log::warn!("skipping outcome with p = {pn:e} but dp = {dn:e}");
            }
            continue;
        }
        total += dn * dn / pn;
    }
    Ok(total)
}

/// Photon-counting CFI of an already measured state.
pub fn cfi(rho_measured: &DensityOperator, drho: &CMat, readout: Readout) -> Result<f64> {
    let dim = rho_measured.dim();
    if drho.nrows() != dim || drho.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: drho.nrows(),
        });
    }
    let p: Vec<f64> = (0..dim).map(|i| rho_measured.matrix()[(i, i)].re).collect();
    let dp: Vec<f64> = (0..dim).map(|i| drho[(i, i)].re).collect();
    let layout = rho_measured.layout();
    let full = rho_measured.is_full();
    if readout == Readout::PhotonsOnly && full && layout.has_emitters() {
        cfi_from_probabilities(
            &group_photon_outcomes(layout, &p),
            &group_photon_outcomes(layout, &dp),
        )
    } else {
        cfi_from_probabilities(&p, &dp)
    }
}

/// `2 Σ |⟨i|∂ρ|j⟩|² / (λ_i + λ_j)` over pairs with `λ_i + λ_j` above
/// [`SLD_THRESHOLD`].
pub fn qfi_sld(rho: &CMat, drho: &CMat) -> Result<f64> {
    if rho.shape() != drho.shape() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            found: drho.nrows(),
        });
    }
    let (vals, vecs) = linalg::eigh(rho);
    let d = vecs.adjoint() * drho * &vecs;
    let n = vals.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s = vals[i] + vals[j];
            if s > SLD_THRESHOLD {
                total += 2.0 * d[(i, j)].norm_sqr() / s;
            }
        }
    }
    Ok(total)
}

/// `4 (⟨∂ψ|∂ψ⟩ - |⟨ψ|∂ψ⟩|²)`.
pub fn pure_qfi_from_derivative(psi: &[C64], dpsi: &[C64]) -> f64 {
    let overlap = linalg::vdot(psi, dpsi);
    4.0 * (linalg::norm_sqr(dpsi) - overlap.norm_sqr())
}

/// Encoding stage for one layout, working point and noise strength.
#[derive(Debug, Clone)]
pub struct Encoder {
    optics: Optics,
    noise: NoiseChannel,
    point: EncodingPoint,
}

impl Encoder {
    pub fn new(layout: SystemLayout, point: EncodingPoint, noise: NoiseConfig) -> Result<Self> {
        Ok(Encoder {
            optics: Optics::new(layout),
            noise: NoiseChannel::new(layout, noise.kappa_tilde())?,
            point,
        })
    }

    pub fn from_optics(optics: Optics, point: EncodingPoint, noise: NoiseConfig) -> Result<Self> {
        let noise = NoiseChannel::new(optics.layout(), noise.kappa_tilde())?;
        Ok(Encoder {
            optics,
            noise,
            point,
        })
    }

    pub fn optics(&self) -> &Optics {
        &self.optics
    }

    pub fn layout(&self) -> SystemLayout {
        self.optics.layout()
    }

    pub fn point(&self) -> EncodingPoint {
        self.point
    }

    pub fn is_noiseless(&self) -> bool {
        self.noise.kappa_tilde() == 0.0
    }

    fn check(&self, prep: &StateRef<'_>) -> Result<()> {
        prep.require_full()?;
        if prep.layout() != self.layout() {
            return Err(Error::DimensionMismatch {
                expected: self.layout().dim(),
                found: prep.dim(),
            });
        }
        Ok(())
    }

    fn encode_vector(&self, psi: &[C64], phi: f64) -> Vec<C64> {
        let mut x = psi.to_vec();
        self.optics.apply_mzi(&mut x, phi);
        x
    }

    fn encode_matrix(&self, rho: &CMat, phi: f64) -> CMat {
        linalg::conjugate_with(rho, |x| self.optics.apply_mzi(x, phi))
    }

    /// `ρ_E(φ)` including noise, or `|ψ_E(φ)⟩` when pure and noiseless.
    fn encoded_at(&self, prep: StateRef<'_>, phi: f64) -> Result<Encoded> {
        Ok(match prep {
            StateRef::Pure(s) if self.is_noiseless() => {
                Encoded::Vector(self.encode_vector(s.as_slice(), phi))
            }
            StateRef::Pure(s) => {
                let v = self.encode_vector(s.as_slice(), phi);
                Encoded::Matrix(self.noise.apply(&linalg::outer(&v, &v))?)
            }
            StateRef::Mixed(r) => {
                Encoded::Matrix(self.noise.apply(&self.encode_matrix(r.matrix(), phi))?)
            }
        })
    }

    /// Encoded density operator `ρ_E(φ)` after noise.
    pub fn encoded_density<'a>(&self, prep: impl Into<StateRef<'a>>) -> Result<CMat> {
        let prep = prep.into();
        self.check(&prep)?;
        Ok(match self.encoded_at(prep, self.point.phi)? {
            Encoded::Vector(v) => linalg::outer(&v, &v),
            Encoded::Matrix(m) => m,
        })
    }

    /// `8 (1 - F(φ, φ+δ)) / δ²`.
    pub fn qfi_delta<'a>(&self, prep: impl Into<StateRef<'a>>) -> Result<f64> {
        let prep = prep.into();
        self.check(&prep)?;
        let EncodingPoint { phi, delta } = self.point;
        let a = self.encoded_at(prep, phi)?;
        let b = self.encoded_at(prep, phi + delta)?;
        let f = match (&a, &b) {
            (Encoded::Vector(x), Encoded::Vector(y)) => linalg::vdot(x, y).norm(),
            (Encoded::Matrix(r), Encoded::Matrix(s)) => uhlmann_fidelity(r, s)?,
            _ => unreachable!("both copies share one encoding path"),
        };
        Ok((8.0 * (1.0 - f) / (delta * delta)).max(0.0))
    }

    /// Exact QFI of the noiseless pure encoded state.
    pub fn qfi_exact_pure(&self, prep: &PureState) -> Result<f64> {
        self.check(&StateRef::Pure(prep))?;
        let (psi, dpsi) = self
            .optics
            .mzi_with_derivative(prep.as_slice(), self.point.phi);
        Ok(pure_qfi_from_derivative(psi.as_slice(), dpsi.as_slice()))
    }

    /// Encoded output and its φ-derivative, noise included.
    pub fn encode_with_derivative<'a>(
        &self,
        prep: impl Into<StateRef<'a>>,
    ) -> Result<EncodedOutput> {
        let prep = prep.into();
        self.check(&prep)?;
        let phi = self.point.phi;
        match prep {
            StateRef::Pure(s) => {
                let (psi, dpsi) = self.optics.mzi_with_derivative(s.as_slice(), phi);
                if self.is_noiseless() {
                    return Ok(EncodedOutput::Pure { psi, dpsi });
                }
                let rho = linalg::outer(psi.as_slice(), psi.as_slice());
                let d = linalg::outer(dpsi.as_slice(), psi.as_slice());
                let drho = &d + d.adjoint();
                Ok(EncodedOutput::from_mixed(
                    &self.noise.apply(&rho)?,
                    &self.noise.apply(&drho)?,
                ))
            }
            StateRef::Mixed(r) => {
                let (rho, drho) = self.mixed_derivative(r.matrix());
                Ok(EncodedOutput::from_mixed(
                    &self.noise.apply(&rho)?,
                    &self.noise.apply(&drho)?,
                ))
            }
        }
    }

    /// Noise-free `(ρ_E, ∂ρ_E)` for a mixed prepared state.
    fn mixed_derivative(&self, rho: &CMat) -> (CMat, CMat) {
        let optics = &self.optics;
        let bs = optics.beamsplitter_gate();
        let phase = optics.phase_gate(self.point.phi);
        let inner = linalg::conjugate_with(rho, |x| {
            bs.apply(optics, x);
            phase.apply(optics, x);
        });
        let mut g_rho = inner.clone();
        linalg::map_columns(&mut g_rho, |x| optics.apply_phase_generator(x));
        // G ρ - ρ G with G anti-Hermitian equals G ρ + (G ρ)†.
        let d_inner = &g_rho + g_rho.adjoint();
        let outer_bs = |m: &CMat| linalg::conjugate_with(m, |x| bs.apply(optics, x));
        (outer_bs(&inner), outer_bs(&d_inner))
    }

    /// Dense `∂ρ_E/∂φ` after noise.
    pub fn phase_derivative<'a>(&self, prep: impl Into<StateRef<'a>>) -> Result<CMat> {
        Ok(self.encode_with_derivative(prep)?.to_matrices().1)
    }
}

enum Encoded {
    Vector(Vec<C64>),
    Matrix(CMat),
}

pub fn qfi_delta<'a>(
    prep: impl Into<StateRef<'a>>,
    point: EncodingPoint,
    noise: NoiseConfig,
) -> Result<f64> {
    let prep = prep.into();
    Encoder::new(prep.layout(), point, noise)?.qfi_delta(prep)
}

pub fn qfi_exact_pure(prep: &PureState, point: EncodingPoint) -> Result<f64> {
    Encoder::new(prep.layout(), point, NoiseConfig::noiseless())?.qfi_exact_pure(prep)
}

pub fn phase_derivative<'a>(
    prep: impl Into<StateRef<'a>>,
    point: EncodingPoint,
    noise: NoiseConfig,
) -> Result<CMat> {
    let prep = prep.into();
    Encoder::new(prep.layout(), point, noise)?.phase_derivative(prep)
}

/// Exact QFI of the encoded state: pure formula when possible, SLD otherwise.
pub fn qfi_exact<'a>(
    prep: impl Into<StateRef<'a>>,
    point: EncodingPoint,
    noise: NoiseConfig,
) -> Result<FisherResult> {
    let prep = prep.into();
    let enc = Encoder::new(prep.layout(), point, noise)?;
    let out = enc.encode_with_derivative(prep)?;
    Ok(match &out {
        EncodedOutput::Pure { psi, dpsi } => FisherResult {
            qfi: pure_qfi_from_derivative(psi.as_slice(), dpsi.as_slice()),
            cfi: None,
            method: FisherMethod::ExactPure,
        },
        EncodedOutput::Mixed { .. } => {
            let (rho, drho) = out.to_matrices();
            FisherResult {
                qfi: qfi_sld(&rho, &drho)?,
                cfi: None,
                method: FisherMethod::ExactSld,
            }
        }
    })
}

/// Undoes the first beamsplitter so that `state` itself reaches the phase
/// gate. Feeding the result to the encoder probes `state` directly.
pub fn bypass_first_beamsplitter(state: &PureState) -> PureState {
    let optics = Optics::new(state.layout());
    let inv = optics.tunneling_gate(-FRAC_PI_4);
    state.map(|x| inv.apply(&optics, x))
}

/// State after the first beamsplitter of the interferometer.
pub fn after_first_beamsplitter(state: &PureState) -> PureState {
    let optics = Optics::new(state.layout());
    let bs = optics.beamsplitter_gate();
    state.map(|x| bs.apply(&optics, x))
}

/// Mean photon number in `mode`, for reporting.
pub fn mean_photons(state: StateRef<'_>, mode: Subsystem) -> Result<f64> {
    match state {
        StateRef::Pure(s) => s.mean_photons(mode),
        StateRef::Mixed(r) => {
            let layout = r.layout();
            layout.require_mode(mode)?;
            if !r.is_full() {
                return Err(Error::InvalidConfig(
                    "mean photons need a full-layout state".into(),
                ));
            }
            Ok((0..r.dim())
                .map(|i| layout.level(i, mode) as f64 * r.matrix()[(i, i)].re)
                .sum())
        }
    }
}
