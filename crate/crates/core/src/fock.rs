//! Truncated two-mode Fock spaces, optionally carrying one two-level
//! emitter per mode.
//!
//! The tensor ordering is fixed as `mode1 ⊗ mode2 ⊗ emitter1 ⊗ emitter2`
//! with the last factor varying fastest. Emitter level 0 is `|g⟩`, level 1
//! is `|e⟩`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // std, when linked, shadows these methods
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};

/// Tolerance on the norm of every constructed pure state.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subsystem {
    Mode1,
    Mode2,
    Emitter1,
    Emitter2,
}

impl Subsystem {
    pub const ALL: [Subsystem; 4] = [
        Subsystem::Mode1,
        Subsystem::Mode2,
        Subsystem::Emitter1,
        Subsystem::Emitter2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_mode(self) -> bool {
        matches!(self, Subsystem::Mode1 | Subsystem::Mode2)
    }

    /// The emitter coupled to a photonic mode, and vice versa.
    pub fn partner(self) -> Subsystem {
        match self {
            Subsystem::Mode1 => Subsystem::Emitter1,
            Subsystem::Mode2 => Subsystem::Emitter2,
            Subsystem::Emitter1 => Subsystem::Mode1,
            Subsystem::Emitter2 => Subsystem::Mode2,
        }
    }
}

/// A set of subsystems, kept in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubsystemSet(u8);

impl SubsystemSet {
    pub const EMPTY: SubsystemSet = SubsystemSet(0);

    pub fn of(items: &[Subsystem]) -> Self {
        SubsystemSet(items.iter().fold(0, |acc, s| acc | (1 << s.index())))
    }

    pub fn contains(self, s: Subsystem) -> bool {
        self.0 & (1 << s.index()) != 0
    }

    pub fn is_subset_of(self, other: SubsystemSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Subsystem> {
        Subsystem::ALL
            .into_iter()
            .filter(move |s| self.contains(*s))
    }
}

/// Hilbert-space layout of the simulated system.
///
/// A square layout allows `0..=truncation` photons in each mode. A capped
/// layout additionally restricts the photonic basis to `n1 + n2 ≤
/// truncation`; every circuit in this crate conserves the total excitation
/// number, so a capped layout is exact for inputs inside the cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemLayout {
    truncation: usize,
    capped: bool,
    with_emitters: bool,
}

impl SystemLayout {
    pub fn new(truncation: usize, with_emitters: bool) -> Result<Self> {
        if truncation < 1 {
            return Err(Error::InvalidTruncation(truncation));
        }
        Ok(SystemLayout {
            truncation,
            capped: false,
            with_emitters,
        })
    }

    pub fn photonic(truncation: usize) -> Result<Self> {
        Self::new(truncation, false)
    }

    pub fn with_emitters(truncation: usize) -> Result<Self> {
        Self::new(truncation, true)
    }

    /// Layout restricted to at most `max_total` photons in both modes together.
    pub fn capped(max_total: usize, with_emitters: bool) -> Result<Self> {
        let mut l = Self::new(max_total, with_emitters)?;
        l.capped = true;
        Ok(l)
    }

    /// The same photonic space without emitters.
    pub fn without_emitters(&self) -> Self {
        SystemLayout {
            with_emitters: false,
            ..*self
        }
    }

    /// Maximum Fock level per mode.
    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn is_capped(&self) -> bool {
        self.capped
    }

    /// Largest total photon number in the basis.
    pub fn max_total(&self) -> usize {
        if self.capped {
            self.truncation
        } else {
            2 * self.truncation
        }
    }

    pub fn has_emitters(&self) -> bool {
        self.with_emitters
    }

    /// Fock levels per mode, `truncation + 1`.
    pub fn levels(&self) -> usize {
        self.truncation + 1
    }

    /// Dimension of the joint emitter factor (1 or 4).
    pub fn emitter_dim(&self) -> usize {
        if self.with_emitters {
            4
        } else {
            1
        }
    }

    pub fn dim(&self) -> usize {
        self.photonic_dim() * self.emitter_dim()
    }

    pub fn photonic_dim(&self) -> usize {
        let l = self.levels();
        if self.capped {
            l * (l + 1) / 2
        } else {
            l * l
        }
    }

    pub fn subsystems(&self) -> SubsystemSet {
        if self.with_emitters {
            SubsystemSet::of(&Subsystem::ALL)
        } else {
            SubsystemSet::of(&[Subsystem::Mode1, Subsystem::Mode2])
        }
    }

    pub fn contains(&self, s: Subsystem) -> bool {
        self.subsystems().contains(s)
    }

    pub fn subsystem_dim(&self, s: Subsystem) -> usize {
        if s.is_mode() {
            self.levels()
        } else {
            2
        }
    }

    /// Photonic index of the first state with `n1` photons in mode 1.
    fn row_offset(&self, n1: usize) -> usize {
        if self.capped {
            n1 * (2 * self.truncation + 3 - n1) / 2
        } else {
            n1 * self.levels()
        }
    }

    fn row_len(&self, n1: usize) -> usize {
        if self.capped {
            self.truncation + 1 - n1
        } else {
            self.levels()
        }
    }

    pub fn contains_photons(&self, n1: usize, n2: usize) -> bool {
        n1 <= self.truncation && n2 <= self.truncation && n1 + n2 <= self.max_total()
    }

    pub fn photonic_index(&self, n1: usize, n2: usize) -> Option<usize> {
        self.contains_photons(n1, n2)
            .then(|| self.row_offset(n1) + n2)
    }

    /// Flat index of `|n1, n2, e1, e2⟩`, if it is part of the basis.
    pub fn try_index(&self, n1: usize, n2: usize, e1: usize, e2: usize) -> Option<usize> {
        if e1 > 1 || e2 > 1 || (!self.with_emitters && (e1 | e2) != 0) {
            return None;
        }
        let p = self.photonic_index(n1, n2)?;
        Some(p * self.emitter_dim() + if self.with_emitters { e1 * 2 + e2 } else { 0 })
    }

    /// Flat index of `|n1, n2, e1, e2⟩`.
    ///
    /// # Panics
    /// If the state is outside the basis.
    pub fn index(&self, n1: usize, n2: usize, e1: usize, e2: usize) -> usize {
        self.try_index(n1, n2, e1, e2)
            .unwrap_or_else(|| panic!("|{n1},{n2},{e1},{e2}> is outside the layout"))
    }

    /// `[n1, n2, e1, e2]` of a flat index.
    pub fn levels_of(&self, index: usize) -> [usize; 4] {
        let ed = self.emitter_dim();
        let (p, e) = (index / ed, index % ed);
        let (e1, e2) = if self.with_emitters {
            (e / 2, e % 2)
        } else {
            (0, 0)
        };
        let mut n1 = if self.capped { 0 } else { p / self.levels() };
        while self.capped && self.row_offset(n1 + 1) <= p {
            n1 += 1;
        }
        [n1, p - self.row_offset(n1), e1, e2]
    }

    /// Local level of subsystem `s` in the basis state with flat index `index`.
    pub fn level(&self, index: usize, s: Subsystem) -> usize {
        self.levels_of(index)[s.index()]
    }

    /// All basis labels in flat-index order.
    pub fn basis(&self) -> impl Iterator<Item = [usize; 4]> + '_ {
        let ed = self.emitter_dim();
        (0..self.levels()).flat_map(move |n1| {
            (0..self.row_len(n1)).flat_map(move |n2| {
                (0..ed).map(move |e| {
                    if ed == 4 {
                        [n1, n2, e / 2, e % 2]
                    } else {
                        [n1, n2, 0, 0]
                    }
                })
            })
        })
    }

    /// Index of the basis state with the level of `s` changed by `delta`.
    pub fn shifted(&self, index: usize, s: Subsystem, delta: isize) -> Option<usize> {
        let mut lv = self.levels_of(index);
        let k = s.index();
        lv[k] = lv[k].checked_add_signed(delta)?;
        self.try_index(lv[0], lv[1], lv[2], lv[3])
    }

    pub(crate) fn require(&self, s: Subsystem) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(Error::InvalidSubsystem {
                subsystem: s,
                reason: "layout has no emitters",
            })
        }
    }

    pub fn require_mode(&self, s: Subsystem) -> Result<()> {
        if s.is_mode() {
            Ok(())
        } else {
            Err(Error::InvalidSubsystem {
                subsystem: s,
                reason: "expected a photonic mode",
            })
        }
    }

    pub(crate) fn require_fits(&self, photons: usize) -> Result<()> {
        if photons > self.truncation {
            Err(Error::PhotonNumberTooLarge {
                requested: photons,
                truncation: self.truncation,
            })
        } else {
            Ok(())
        }
    }

    /// Dimension of the space spanned by the subsystems in `kept`.
    pub fn reduced_dim(&self, kept: SubsystemSet) -> usize {
        let both = kept.contains(Subsystem::Mode1) && kept.contains(Subsystem::Mode2);
        let emitters: usize = [Subsystem::Emitter1, Subsystem::Emitter2]
            .iter()
            .filter(|s| kept.contains(**s))
            .map(|_| 2)
            .product();
        if both {
            self.photonic_dim() * emitters
        } else {
            kept.iter()
                .filter(|s| s.is_mode())
                .map(|_| self.levels())
                .product::<usize>()
                * emitters
        }
    }

    /// Index of `levels` in the space spanned by `kept`.
    pub(crate) fn reduced_index(&self, kept: SubsystemSet, levels: [usize; 4]) -> usize {
        let both = kept.contains(Subsystem::Mode1) && kept.contains(Subsystem::Mode2);
        let mut idx = 0;
        if both {
            idx = self.row_offset(levels[0]) + levels[1];
        } else {
            for s in [Subsystem::Mode1, Subsystem::Mode2] {
                if kept.contains(s) {
                    idx = idx * self.levels() + levels[s.index()];
                }
            }
        }
        for s in [Subsystem::Emitter1, Subsystem::Emitter2] {
            if kept.contains(s) {
                idx = idx * 2 + levels[s.index()];
            }
        }
        idx
    }

    /// Basis labels of the space spanned by `kept`, in index order; traced
    /// subsystems read as level 0.
    pub(crate) fn reduced_basis(&self, kept: SubsystemSet) -> Vec<[usize; 4]> {
        let mut out = vec![[0usize; 4]; self.reduced_dim(kept)];
        let mut seen = vec![false; out.len()];
        for mut lv in self.basis() {
            for s in Subsystem::ALL {
                if !kept.contains(s) {
                    lv[s.index()] = 0;
                }
            }
            let i = self.reduced_index(kept, lv);
            if !seen[i] {
                seen[i] = true;
                out[i] = lv;
            }
        }
        out
    }
}

/// A normalized state vector over a [`SystemLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    layout: SystemLayout,
    amplitudes: CVec,
}

impl PureState {
    /// Builds a state, normalizing the amplitudes.
    pub fn new(layout: SystemLayout, amplitudes: CVec) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite);
        }
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(PureState {
            layout,
            amplitudes: amplitudes.unscale(norm),
        })
    }

    /// Basis state `|n1, n2⟩ ⊗ |g, g⟩`.
    pub fn fock(layout: SystemLayout, n1: usize, n2: usize) -> Result<Self> {
        let i = layout
            .try_index(n1, n2, 0, 0)
            .ok_or(Error::PhotonNumberTooLarge {
                requested: n1 + n2,
                truncation: layout.truncation(),
            })?;
        let mut amps = CVec::zeros(layout.dim());
        amps[i] = C64::new(1.0, 0.0);
        Ok(PureState {
            layout,
            amplitudes: amps,
        })
    }

    /// Product of single-mode amplitude vectors, emitters in the ground state.
    /// Vectors shorter than the mode dimension are zero-padded; on a capped
    /// layout the product is projected below the cap and renormalized.
    pub fn product(layout: SystemLayout, mode1: &[C64], mode2: &[C64]) -> Result<Self> {
        for m in [mode1, mode2] {
            if m.is_empty() || m.len() > layout.levels() {
                return Err(Error::DimensionMismatch {
                    expected: layout.levels(),
                    found: m.len(),
                });
            }
        }
        let mut amps = CVec::zeros(layout.dim());
        for (n1, a) in mode1.iter().enumerate() {
            for (n2, b) in mode2.iter().enumerate() {
                if let Some(i) = layout.try_index(n1, n2, 0, 0) {
                    amps[i] = a * b;
                }
            }
        }
        Self::new(layout, amps)
    }

    pub fn layout(&self) -> SystemLayout {
        self.layout
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn as_slice(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    pub fn into_amplitudes(self) -> CVec {
        self.amplitudes
    }

    pub(crate) fn from_normalized(layout: SystemLayout, amplitudes: CVec) -> Self {
        PureState { layout, amplitudes }
    }

    /// Applies an in-place linear action and keeps the result as a state.
    /// The action must be unitary.
    pub(crate) fn map(&self, f: impl Fn(&mut [C64])) -> PureState {
        let mut amps = self.amplitudes.clone();
        f(amps.as_mut_slice());
        PureState::from_normalized(self.layout, amps)
    }

    pub fn apply(&self, op: &CMat) -> Result<PureState> {
        if op.ncols() != self.layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.layout.dim(),
                found: op.ncols(),
            });
        }
        Self::new(self.layout, op * &self.amplitudes)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        linalg::vdot(self.as_slice(), other.as_slice())
    }

    pub fn mean_photons(&self, mode: Subsystem) -> Result<f64> {
        self.layout.require_mode(mode)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(self.layout.basis())
            .map(|(a, lv)| lv[mode.index()] as f64 * a.norm_sqr())
            .sum())
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            layout: self.layout,
            kept: self.layout.subsystems(),
            matrix: linalg::outer(self.as_slice(), self.as_slice()),
        }
    }
}

/// Density operator over a layout, or over a subset of its subsystems
/// after a partial trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    layout: SystemLayout,
    kept: SubsystemSet,
    matrix: CMat,
}

impl DensityOperator {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const EIGEN_TOL: f64 = 1e-10;

    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(layout: SystemLayout, matrix: CMat) -> Result<Self> {
        let rho = Self::new_unchecked(layout, layout.subsystems(), matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn new_unchecked(
        layout: SystemLayout,
        kept: SubsystemSet,
        matrix: CMat,
    ) -> Result<Self> {
        let dim = layout.reduced_dim(kept);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows(),
            });
        }
        Ok(DensityOperator {
            layout,
            kept,
            matrix,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let defect = linalg::hermiticity_defect(&self.matrix);
        if defect > Self::HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > Self::TRACE_TOL {
            return Err(Error::BadTrace(tr));
        }
        let (values, _) = linalg::eigh(&self.matrix);
        linalg::check_nonnegative(&values, Self::EIGEN_TOL)
    }

    pub fn layout(&self) -> SystemLayout {
        self.layout
    }

    /// Subsystems this operator lives on.
    pub fn kept(&self) -> SubsystemSet {
        self.kept
    }

    pub fn is_full(&self) -> bool {
        self.kept == self.layout.subsystems()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigh(&self.matrix).0
    }

    pub(crate) fn with_matrix(&self, matrix: CMat) -> DensityOperator {
        DensityOperator {
            layout: self.layout,
            kept: self.kept,
            matrix,
        }
    }
}

/// Truncated coherent-state amplitudes `c_0..=c_truncation`, renormalized.
pub fn coherent_amplitudes(alpha: C64, truncation: usize) -> Vec<C64> {
    if alpha.norm_sqr() > truncation as f64 {
        log::warn!(
            "coherent amplitude |alpha|^2 = {} exceeds truncation {}",
            alpha.norm_sqr(),
            truncation
        );
    }
    let mut amps = Vec::with_capacity(truncation + 1);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amps.push(c);
    for n in 1..=truncation {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    renormalize(&mut amps);
    amps
}

/// Truncated squeezed coherent state `D(α)S(r)|0⟩` amplitudes, renormalized.
///
/// Uses the Hermite three-term recurrence on `(tanh r / 2)^{n/2} H_n(z) / √n!`,
/// which stays finite as `r → 0`, with a running log scale so large `n·r`
/// cannot overflow.
pub fn squeezed_coherent_amplitudes(alpha: C64, r: f64, truncation: usize) -> Result<Vec<C64>> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::NegativeSqueezing(r));
    }
    let (cosh, tanh) = (r.cosh(), r.tanh());
    let gamma = alpha * cosh + alpha.conj() * r.sinh();
    let lead = gamma / cosh;

    let mut values = Vec::with_capacity(truncation + 1);
    let mut log_scale = Vec::with_capacity(truncation + 1);
    let (mut prev, mut cur) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    let mut scale = 0.0;
    values.push(cur);
    log_scale.push(scale);
    for n in 0..truncation {
        let next = (lead * cur - prev * ((n as f64).sqrt() * tanh)) / ((n + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        let mag = cur.norm();
        if mag > 1e150 {
            cur /= mag;
            prev /= mag;
            scale += mag.ln();
        }
        values.push(cur);
        log_scale.push(scale);
    }

    let peak = values
        .iter()
        .zip(&log_scale)
        .filter(|(v, _)| v.norm() > 0.0)
        .map(|(v, s)| v.norm().ln() + s)
        .fold(f64::NEG_INFINITY, f64::max);
    let prefactor =
        (-0.5 * alpha.norm_sqr() - 0.5 * alpha.conj() * alpha.conj() * tanh).exp() / cosh.sqrt();
    let phase = if prefactor.norm() > 0.0 {
        prefactor / prefactor.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let mut amps: Vec<C64> = values
        .iter()
        .zip(&log_scale)
        .map(|(v, s)| {
            let shift = s - peak;
            if shift < -700.0 {
                C64::new(0.0, 0.0)
            } else {
                v * phase * shift.exp()
            }
        })
        .collect();
    renormalize(&mut amps);
    Ok(amps)
}

/// Squeezing parameter `r` for a squeezing level in dB (`10·log10(e^{2r})`).
pub fn squeezing_from_db(db: f64) -> f64 {
    db * core::f64::consts::LN_10 / 20.0
}

fn renormalize(amps: &mut [C64]) {
    let norm = linalg::norm_sqr(amps).sqrt();
    if norm > 0.0 {
        amps.iter_mut().for_each(|a| *a /= norm);
    }
}

fn embed_single_mode(layout: SystemLayout, mode: Subsystem, amps: &[C64]) -> Result<PureState> {
    layout.require_mode(mode)?;
    let mut vacuum = vec![C64::new(0.0, 0.0); layout.levels()];
    vacuum[0] = C64::new(1.0, 0.0);
    match mode {
        Subsystem::Mode1 => PureState::product(layout, amps, &vacuum),
        _ => PureState::product(layout, &vacuum, amps),
    }
}

/// Coherent state on one mode; the other mode in vacuum, emitters in `|g⟩`.
pub fn coherent_state(alpha: C64, layout: SystemLayout, mode: Subsystem) -> Result<PureState> {
    layout.require_mode(mode)?;
    embed_single_mode(
        layout,
        mode,
        &coherent_amplitudes(alpha, layout.truncation()),
    )
}

pub fn squeezed_coherent_state(
    alpha: C64,
    r: f64,
    layout: SystemLayout,
    mode: Subsystem,
) -> Result<PureState> {
    layout.require_mode(mode)?;
    let amps = squeezed_coherent_amplitudes(alpha, r, layout.truncation())?;
    embed_single_mode(layout, mode, &amps)
}

/// `(|N,0⟩ + |0,N⟩)/√2`.
pub fn noon_state(photons: usize, layout: SystemLayout) -> Result<PureState> {
    layout.require_fits(photons)?;
    let mut amps = CVec::zeros(layout.dim());
    amps[layout.index(photons, 0, 0, 0)] += C64::new(1.0, 0.0);
    amps[layout.index(0, photons, 0, 0)] += C64::new(1.0, 0.0);
    PureState::new(layout, amps)
}

/// `|N/2⟩ ⊗ |N/2⟩`.
pub fn twin_fock_state(photons: usize, layout: SystemLayout) -> Result<PureState> {
    if photons % 2 != 0 {
        return Err(Error::OddPhotonNumber(photons));
    }
    layout.require_fits(photons)?;
    PureState::fock(layout, photons / 2, photons / 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `a` on a photonic mode.
    Annihilation,
    /// `a†a` on a photonic mode.
    Number,
    /// `σ = |g⟩⟨e|` on an emitter.
    LowerEmitter,
    /// `σ†σ` on an emitter.
    EmitterExcitation,
}

/// A local operator embedded in the full space by identity factors.
pub fn mode_operator(
    kind: OperatorKind,
    subsystem: Subsystem,
    layout: SystemLayout,
) -> Result<CMat> {
    layout.require(subsystem)?;
    let photonic = matches!(kind, OperatorKind::Annihilation | OperatorKind::Number);
    if photonic != subsystem.is_mode() {
        return Err(Error::InvalidSubsystem {
            subsystem,
            reason: "operator kind does not act on this subsystem",
        });
    }
    let dim = layout.dim();
    let mut op = CMat::zeros(dim, dim);
    for (col, lv) in layout.basis().enumerate() {
        let level = lv[subsystem.index()];
        match kind {
            OperatorKind::Annihilation | OperatorKind::LowerEmitter => {
                if let Some(row) = layout.shifted(col, subsystem, -1) {
                    op[(row, col)] = C64::new((level as f64).sqrt(), 0.0);
                }
            }
            OperatorKind::Number | OperatorKind::EmitterExcitation => {
                op[(col, col)] = C64::new(level as f64, 0.0);
            }
        }
    }
    Ok(op)
}

/// Traces out every subsystem not in `keep`.
pub fn partial_trace(rho: &DensityOperator, keep: &[Subsystem]) -> Result<DensityOperator> {
    let layout = rho.layout();
    let keep_set = SubsystemSet::of(keep);
    if keep_set.is_empty() {
        return Err(Error::InvalidConfig(
            "partial trace must keep a subsystem".into(),
        ));
    }
    for &s in keep {
        if !rho.kept().contains(s) {
            return Err(Error::InvalidSubsystem {
                subsystem: s,
                reason: "not present in this density operator",
            });
        }
    }
    let present = layout.reduced_basis(rho.kept());
    let kept_dim = layout.reduced_dim(keep_set);
    let traced_key = |lv: &[usize; 4]| {
        Subsystem::ALL
            .iter()
            .filter(|s| !keep_set.contains(**s))
            .fold(0, |acc, s| acc * layout.subsystem_dim(*s) + lv[s.index()])
    };
    let mut groups: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (flat, lv) in present.iter().enumerate() {
        let kept = layout.reduced_index(keep_set, *lv);
        groups.entry(traced_key(lv)).or_default().push((flat, kept));
    }
    let m = rho.matrix();
    let mut out = CMat::zeros(kept_dim, kept_dim);
    for group in groups.values() {
        for &(fi, ki) in group {
            for &(fj, kj) in group {
                out[(ki, kj)] += m[(fi, fj)];
            }
        }
    }
    DensityOperator::new_unchecked(layout, keep_set, out)
}

/// Photonic reduced state (emitters traced out when present).
pub fn photonic_part(rho: &DensityOperator) -> Result<DensityOperator> {
    if rho.kept() == SubsystemSet::of(&[Subsystem::Mode1, Subsystem::Mode2]) {
        return Ok(rho.clone());
    }
    partial_trace(rho, &[Subsystem::Mode1, Subsystem::Mode2])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn layout(n: usize) -> SystemLayout {
        SystemLayout::photonic(n).unwrap()
    }

    #[test]
    fn capped_layout_indexing() {
        let l = SystemLayout::capped(4, true).unwrap();
        assert_eq!(l.dim(), 15 * 4);
        let all: Vec<[usize; 4]> = l.basis().collect();
        assert_eq!(all.len(), l.dim());
        for (i, lv) in all.iter().enumerate() {
            assert_eq!(l.levels_of(i), *lv);
            assert_eq!(l.index(lv[0], lv[1], lv[2], lv[3]), i);
            assert!(lv[0] + lv[1] <= 4);
        }
        assert!(l.try_index(3, 2, 0, 0).is_none());
        let i = l.index(2, 2, 1, 0);
        assert_eq!(l.shifted(i, Subsystem::Mode1, 1), None);
        assert_eq!(
            l.shifted(i, Subsystem::Mode2, -1),
            Some(l.index(2, 1, 1, 0))
        );
        assert_eq!(l.shifted(i, Subsystem::Emitter1, 1), None);
    }

    #[test]
    fn capped_partial_trace() {
        let l = SystemLayout::capped(3, true).unwrap();
        let mut amps = CVec::zeros(l.dim());
        amps[l.index(3, 0, 0, 1)] = C64::new(0.6, 0.0);
        amps[l.index(0, 2, 1, 0)] = C64::new(0.0, 0.8);
        let rho = PureState::new(l, amps).unwrap().to_density();
        let photonic = photonic_part(&rho).unwrap();
        assert_eq!(photonic.dim(), 10);
        let p = l.photonic_index(3, 0).unwrap();
        assert!(close(photonic.matrix()[(p, p)].re, 0.36, 1e-15));
        let m1 = partial_trace(&rho, &[Subsystem::Mode1]).unwrap();
        assert_eq!(m1.dim(), 4);
        assert!(close(m1.matrix()[(3, 3)].re, 0.36, 1e-15));
        assert!(close(m1.matrix()[(0, 0)].re, 0.64, 1e-15));
        let m1e = partial_trace(&photonic, &[Subsystem::Mode1]).unwrap();
        assert!(linalg::max_abs_diff(m1.matrix(), m1e.matrix()) < 1e-15);
        let e = partial_trace(&rho, &[Subsystem::Mode2, Subsystem::Emitter1]).unwrap();
        assert_eq!(e.dim(), 8);
        assert!(close(e.matrix()[(2 * 2 + 1, 2 * 2 + 1)].re, 0.64, 1e-15));
    }

    #[test]
    fn layout_dimensions() {
        assert_eq!(layout(3).dim(), 16);
        assert_eq!(SystemLayout::with_emitters(3).unwrap().dim(), 64);
        assert!(SystemLayout::photonic(0).is_err());
        let l = SystemLayout::with_emitters(2).unwrap();
        let idx = l.index(2, 1, 1, 0);
        assert_eq!(l.level(idx, Subsystem::Mode1), 2);
        assert_eq!(l.level(idx, Subsystem::Mode2), 1);
        assert_eq!(l.level(idx, Subsystem::Emitter1), 1);
        assert_eq!(l.level(idx, Subsystem::Emitter2), 0);
    }

    #[test]
    fn coherent_vacuum_is_exact() {
        let amps = coherent_amplitudes(C64::new(0.0, 0.0), 5);
        assert_eq!(amps[0], C64::new(1.0, 0.0));
        assert!(amps[1..].iter().all(|a| *a == C64::new(0.0, 0.0)));
    }

    #[test]
    fn coherent_state_rejects_emitter_mode() {
        let l = SystemLayout::with_emitters(3).unwrap();
        assert!(coherent_state(C64::new(1.0, 0.0), l, Subsystem::Emitter1).is_err());
    }

    #[test]
    fn squeezed_vacuum_has_even_parity() {
        let amps = squeezed_coherent_amplitudes(C64::new(0.0, 0.0), 0.5, 20).unwrap();
        for (n, a) in amps.iter().enumerate() {
            if n % 2 == 1 {
                assert!(a.norm() < 1e-15, "odd amplitude {n} = {a}");
            }
        }
        assert!(squeezed_coherent_amplitudes(C64::new(0.0, 0.0), -0.1, 4).is_err());
    }

    #[test]
    fn squeezed_large_cutoff_stays_finite() {
        let amps = squeezed_coherent_amplitudes(C64::new(3.0, 0.5), 2.5, 400).unwrap();
        assert!(amps.iter().all(|a| a.re.is_finite() && a.im.is_finite()));
        assert!(close(linalg::norm_sqr(&amps), 1.0, 1e-12));
    }

    #[test]
    fn db_conversion() {
        assert!(close(squeezing_from_db(10.0), 1.151_292_546_497_023, 1e-12));
    }

    #[test]
    fn noon_and_twin_fock() {
        let l = layout(4);
        let n0 = noon_state(0, l).unwrap();
        assert!(close(n0.amplitudes()[l.index(0, 0, 0, 0)].re, 1.0, 1e-15));
        let n2 = noon_state(2, l).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!(close(n2.amplitudes()[l.index(2, 0, 0, 0)].re, h, 1e-15));
        assert!(close(n2.amplitudes()[l.index(0, 2, 0, 0)].re, h, 1e-15));
        let total =
            n2.mean_photons(Subsystem::Mode1).unwrap() + n2.mean_photons(Subsystem::Mode2).unwrap();
        assert!(close(total, 2.0, 1e-14));
        assert!(noon_state(5, l).is_err());

        let t4 = twin_fock_state(4, l).unwrap();
        assert_eq!(t4.amplitudes()[l.index(2, 2, 0, 0)], C64::new(1.0, 0.0));
        assert!(matches!(
            twin_fock_state(3, l),
            Err(Error::OddPhotonNumber(3))
        ));
        assert!(twin_fock_state(6, l).is_err());
    }

    #[test]
    fn number_operator_eigenvalue() {
        let l = layout(4);
        let n = mode_operator(OperatorKind::Number, Subsystem::Mode1, l).unwrap();
        let s = PureState::fock(l, 3, 1).unwrap();
        let out = &n * s.amplitudes();
        assert!((out - s.amplitudes() * C64::new(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn canonical_commutator_below_cutoff() {
        let l = layout(5);
        let a = mode_operator(OperatorKind::Annihilation, Subsystem::Mode2, l).unwrap();
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        for i in 0..l.dim() {
            for j in 0..l.dim() {
                let expected = if i == j && l.level(i, Subsystem::Mode2) < l.truncation() {
                    1.0
                } else if i == j {
                    // a a† - a† a on |N_cut⟩ gives -N_cut
                    -(l.truncation() as f64)
                } else {
                    0.0
                };
                assert!((comm[(i, j)] - C64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn emitter_lowering() {
        let l = SystemLayout::with_emitters(2).unwrap();
        let sigma = mode_operator(OperatorKind::LowerEmitter, Subsystem::Emitter1, l).unwrap();
        let mut e = CVec::zeros(l.dim());
        e[l.index(1, 0, 1, 0)] = C64::new(1.0, 0.0);
        let out = &sigma * &e;
        assert_eq!(out[l.index(1, 0, 0, 0)], C64::new(1.0, 0.0));
        assert!((&sigma * &out).norm() == 0.0);

        let photonic = layout(2);
        assert!(mode_operator(OperatorKind::LowerEmitter, Subsystem::Emitter1, photonic).is_err());
        assert!(mode_operator(OperatorKind::Number, Subsystem::Emitter2, l).is_err());
    }

    #[test]
    fn noon_reduction() {
        let l = layout(2);
        let rho = noon_state(2, l).unwrap().to_density();
        let r1 = partial_trace(&rho, &[Subsystem::Mode1]).unwrap();
        let expected = [0.5, 0.0, 0.5];
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { expected[i] } else { 0.0 };
                assert!((r1.matrix()[(i, j)] - C64::new(e, 0.0)).norm() < 1e-15);
            }
        }
        assert!(partial_trace(&rho, &[]).is_err());
        assert!(partial_trace(&r1, &[Subsystem::Mode2]).is_err());
    }

    #[test]
    fn density_validation() {
        let l = layout(1);
        let mut m = CMat::identity(4, 4);
        assert!(matches!(
            DensityOperator::new(l, m.clone()),
            Err(Error::BadTrace(_))
        ));
        m *= C64::new(0.25, 0.0);
        assert!(DensityOperator::new(l, m.clone()).is_ok());
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(matches!(
            DensityOperator::new(l, m),
            Err(Error::NotHermitian(_))
        ));
    }
}
