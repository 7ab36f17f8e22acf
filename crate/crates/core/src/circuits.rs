//! Layered parametrized circuits, the symmetric beamsplitter and the
//! Mach–Zehnder phase encoder.
//!
//! Every gate is applied as an in-place action on state vectors. Tunneling
//! conserves `n1 + n2`, so [`Optics`] diagonalizes the hopping generator
//! once per fixed-photon-number block and a tunneling gate only needs the
//! phases `e^{-i J λ}`. Jaynes–Cummings gates act on 2×2 blocks
//! `{|n, g⟩, |n-1, e⟩}` and Kerr/detuning gates are diagonal. The dense
//! matrix constructors at the bottom of the module are built from the same
//! actions and are mainly used for inspection and tests.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_4, TAU};
#[allow(unused_imports)] // std, when linked, shadows these methods
use num_traits::Float;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{PureState, Subsystem, SystemLayout};
use crate::linalg::{CMat, CVec, C64};

/// Circuit family for one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnsatzKind {
    /// Tunneling, emitter detuning and light–matter coupling: `(J, Δ, g)`.
    Emitter,
    /// Tunneling and tunable Kerr strength: `(J, U)`.
    Kerr,
    /// Tunneling only, the Kerr strength frozen at the stored value.
    KerrFixedU(f64),
}

impl AnsatzKind {
    /// The fixed-non-linearity baseline, `U = 2π`.
    pub const FIXED_BASELINE: AnsatzKind = AnsatzKind::KerrFixedU(TAU);

    pub fn params_per_layer(&self) -> usize {
        match self {
            AnsatzKind::Emitter => 3,
            AnsatzKind::Kerr => 2,
            AnsatzKind::KerrFixedU(_) => 1,
        }
    }

    pub fn needs_emitters(&self) -> bool {
        matches!(self, AnsatzKind::Emitter)
    }

    pub fn layer_kinds(&self) -> &'static [ParamKind] {
        match self {
            AnsatzKind::Emitter => &[
                ParamKind::Tunneling,
                ParamKind::Detuning,
                ParamKind::Coupling,
            ],
            AnsatzKind::Kerr => &[ParamKind::Tunneling, ParamKind::Kerr],
            AnsatzKind::KerrFixedU(_) => &[ParamKind::Tunneling],
        }
    }
}

/// Physical role of a variational parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamKind {
    Tunneling,
    Detuning,
    Coupling,
    Kerr,
}

impl ParamKind {
    pub fn name(&self) -> &'static str {
        match self {
            ParamKind::Tunneling => "tunneling",
            ParamKind::Detuning => "detuning",
            ParamKind::Coupling => "coupling",
            ParamKind::Kerr => "kerr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitSpec {
    pub kind: AnsatzKind,
    pub depth: usize,
}

impl CircuitSpec {
    pub fn new(kind: AnsatzKind, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidConfig(
                "circuit depth must be at least 1".into(),
            ));
        }
        Ok(CircuitSpec { kind, depth })
    }

    pub fn param_count(&self) -> usize {
        self.depth * self.kind.params_per_layer()
    }

    pub fn param_kinds(&self) -> Vec<ParamKind> {
        (0..self.depth)
            .flat_map(|_| self.kind.layer_kinds().iter().copied())
            .collect()
    }

    /// Box bounds with the Kerr entries limited to `[-u_bound, u_bound]`.
    pub fn bounds(&self, u_bound: Option<f64>) -> Vec<Option<Interval>> {
        self.param_kinds()
            .into_iter()
            .map(|k| match (k, u_bound) {
                (ParamKind::Kerr, Some(b)) => Some(Interval::symmetric(b)),
                _ => None,
            })
            .collect()
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidConfig(
                "interval lower end exceeds upper end".into(),
            ));
        }
        Ok(Interval { lo, hi })
    }

    pub fn symmetric(half_width: f64) -> Self {
        let h = half_width.abs();
        Interval { lo: -h, hi: h }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Variational parameters (dimensionless rate × time products) with
/// optional per-entry bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    bounds: Vec<Option<Interval>>,
}

impl ParamVector {
    pub fn unbounded(values: Vec<f64>) -> Self {
        let bounds = vec![None; values.len()];
        ParamVector { values, bounds }
    }

    pub fn with_bounds(values: Vec<f64>, bounds: Vec<Option<Interval>>) -> Result<Self> {
        if values.len() != bounds.len() {
            return Err(Error::ParamCount {
                expected: bounds.len(),
                found: values.len(),
            });
        }
        for (index, (v, b)) in values.iter().zip(&bounds).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            if let Some(b) = b {
                if !b.contains(*v) {
                    return Err(Error::OutOfBounds { index, value: *v });
                }
            }
        }
        Ok(ParamVector { values, bounds })
    }

    /// Clamps `values` into `bounds` instead of rejecting them.
    pub fn clamped(mut values: Vec<f64>, bounds: Vec<Option<Interval>>) -> Result<Self> {
        for (v, b) in values.iter_mut().zip(&bounds) {
            if let Some(b) = b {
                *v = b.clamp(*v);
            }
        }
        Self::with_bounds(values, bounds)
    }

    pub fn zeros(spec: &CircuitSpec, u_bound: Option<f64>) -> Self {
        ParamVector {
            values: vec![0.0; spec.param_count()],
            bounds: spec.bounds(u_bound),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> &[Option<Interval>] {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `e^{-2πi·turns}` with the argument reduced in turns, so integer turns
/// give exactly one.
fn exp_turns(turns: f64) -> C64 {
    C64::from_polar(1.0, -TAU * turns.fract())
}

/// Kerr phase `e^{-i U/2 · n(n-1)}`.
pub fn kerr_phase(u_tilde: f64, n: usize) -> C64 {
    let pairs = (n * n.saturating_sub(1) / 2) as f64;
    exp_turns(u_tilde / TAU * pairs)
}

/// One fixed-photon-number block of the hopping generator
/// `a2†a1 + a1†a2`, diagonalized.
#[derive(Debug, Clone)]
struct HoppingBlock {
    /// Photonic indices `k·(N_cut+1) + n - k` of `|k, n-k⟩`.
    indices: Vec<usize>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

/// Precomputed structure for fast gate application on one layout.
#[derive(Debug, Clone)]
pub struct Optics {
    layout: SystemLayout,
    hopping: Vec<HoppingBlock>,
    /// `(|n, g⟩, |n-1, e⟩, n)` index pairs for the Jaynes–Cummings
    /// coupling of each mode with its emitter.
    jc_pairs: [Vec<(usize, usize, usize)>; 2],
}

impl Optics {
    pub fn new(layout: SystemLayout) -> Self {
        let nc = layout.truncation();
        let mut hopping = Vec::new();
        for total in 1..=layout.max_total() {
            let lo = total.saturating_sub(nc);
            let hi = total.min(nc);
            let size = hi - lo + 1;
            if size < 2 {
                continue;
            }
            let mut gen = DMatrix::<f64>::zeros(size, size);
            for r in 0..size - 1 {
                let k = lo + r;
                let amp = (((k + 1) * (total - k)) as f64).sqrt();
                gen[(r + 1, r)] = amp;
                gen[(r, r + 1)] = amp;
            }
            let eig = gen.symmetric_eigen();
            let indices = (lo..=hi)
                .map(|k| {
                    layout
                        .photonic_index(k, total - k)
                        .expect("block inside layout")
                })
                .collect();
            hopping.push(HoppingBlock {
                indices,
                eigenvalues: eig.eigenvalues.iter().copied().collect(),
                eigenvectors: eig.eigenvectors,
            });
        }

        let mut jc_pairs = [Vec::new(), Vec::new()];
        if layout.has_emitters() {
            for (slot, mode) in [Subsystem::Mode1, Subsystem::Mode2].into_iter().enumerate() {
                let emitter = mode.partner();
                for (i, lv) in layout.basis().enumerate() {
                    let n = lv[mode.index()];
                    if n >= 1 && lv[emitter.index()] == 0 {
                        let j = layout
                            .shifted(i, mode, -1)
                            .and_then(|j| layout.shifted(j, emitter, 1))
                            .expect("lowering a mode keeps the state inside the layout");
                        jc_pairs[slot].push((i, j, n));
                    }
                }
            }
        }
        Optics {
            layout,
            hopping,
            jc_pairs,
        }
    }

    pub fn layout(&self) -> SystemLayout {
        self.layout
    }

    pub fn tunneling_gate(&self, j_tilde: f64) -> Gate {
        let blocks = self
            .hopping
            .iter()
            .map(|b| {
                let v = &b.eigenvectors;
                let m = v.nrows();
                let phases: Vec<C64> = b
                    .eigenvalues
                    .iter()
                    .map(|l| C64::from_polar(1.0, -j_tilde * l))
                    .collect();
                CMat::from_fn(m, m, |r, c| {
                    (0..m)
                        .map(|k| phases[k] * (v[(r, k)] * v[(c, k)]))
                        .sum::<C64>()
                })
            })
            .collect();
        Gate::Tunneling(blocks)
    }

    /// Diagonal gate from a function of `(n1, n2, e1, e2)`.
    fn diagonal_gate(&self, f: impl Fn(usize, usize, usize, usize) -> C64) -> Gate {
        let phases = self
            .layout
            .basis()
            .map(|[n1, n2, e1, e2]| f(n1, n2, e1, e2))
            .collect();
        Gate::Diagonal(phases)
    }

    /// `U_Kerr^(2) U_Kerr^(1)`.
    pub fn kerr_gate(&self, u_tilde: f64) -> Gate {
        let per_level: Vec<C64> = (0..self.layout.levels())
            .map(|n| kerr_phase(u_tilde, n))
            .collect();
        self.diagonal_gate(|n1, n2, _, _| per_level[n1] * per_level[n2])
    }

    /// `U_e^(2) U_e^(1)` with `U_e = e^{-iΔ σ†σ}`.
    pub fn detuning_gate(&self, delta_tilde: f64) -> Result<Gate> {
        self.layout.require(Subsystem::Emitter1)?;
        Ok(
            self.diagonal_gate(|_, _, e1, e2| {
                C64::from_polar(1.0, -delta_tilde * (e1 + e2) as f64)
            }),
        )
    }

    /// `e^{-i g (σ†a + σa†)}` for one mode and its emitter.
    pub fn coupling_gate(&self, g_tilde: f64, mode: Subsystem) -> Result<Gate> {
        self.layout.require(Subsystem::Emitter1)?;
        self.layout.require_mode(mode)?;
        let slot = mode.index();
        let rotations = self.jc_pairs[slot]
            .iter()
            .map(|&(a, b, n)| {
                let angle = g_tilde * (n as f64).sqrt();
                (a, b, angle.cos(), angle.sin())
            })
            .collect();
        Ok(Gate::PairRotation(rotations))
    }

    /// `e^{iφ(n1 - n2)/2}`.
    pub fn phase_gate(&self, phi: f64) -> Gate {
        self.diagonal_gate(|n1, n2, _, _| C64::from_polar(1.0, phi * (n1 as f64 - n2 as f64) / 2.0))
    }

    /// Multiplies by the generator `i(n1 - n2)/2` of the phase gate.
    pub fn apply_phase_generator(&self, psi: &mut [C64]) {
        let l = self.layout;
        for (z, lv) in psi.iter_mut().zip(l.basis()) {
            let d = lv[0] as f64 - lv[1] as f64;
            *z *= C64::new(0.0, d / 2.0);
        }
    }

    pub fn beamsplitter_gate(&self) -> Gate {
        self.tunneling_gate(FRAC_PI_4)
    }

    /// Gates of one circuit layer, in application order.
    pub fn layer_gates(&self, kind: AnsatzKind, params: &[f64]) -> Result<Vec<Gate>> {
        if params.len() != kind.params_per_layer() {
            return Err(Error::ParamCount {
                expected: kind.params_per_layer(),
                found: params.len(),
            });
        }
        Ok(match kind {
            AnsatzKind::Emitter => vec![
                self.tunneling_gate(params[0]),
                self.detuning_gate(params[1])?,
                self.coupling_gate(params[2], Subsystem::Mode1)?,
                self.coupling_gate(params[2], Subsystem::Mode2)?,
            ],
            AnsatzKind::Kerr => vec![self.tunneling_gate(params[0]), self.kerr_gate(params[1])],
            AnsatzKind::KerrFixedU(u) => {
                vec![self.tunneling_gate(params[0]), self.kerr_gate(u)]
            }
        })
    }

    /// Compiles the full layered circuit; layer 1 acts first.
    pub fn compile(&self, spec: &CircuitSpec, params: &[f64]) -> Result<Circuit> {
        if params.len() != spec.param_count() {
            return Err(Error::ParamCount {
                expected: spec.param_count(),
                found: params.len(),
            });
        }
        if spec.kind.needs_emitters() && !self.layout.has_emitters() {
            return Err(Error::InvalidSubsystem {
                subsystem: Subsystem::Emitter1,
                reason: "emitter ansatz needs a layout with emitters",
            });
        }
        let mut gates = Vec::new();
        for layer in params.chunks(spec.kind.params_per_layer()) {
            gates.extend(self.layer_gates(spec.kind, layer)?);
        }
        Ok(Circuit { gates })
    }

    pub fn apply_gate(&self, gate: &Gate, psi: &mut [C64]) {
        gate.apply(self, psi)
    }

    /// `U_BS U_E(φ) U_BS` applied in place.
    pub fn apply_mzi(&self, psi: &mut [C64], phi: f64) {
        let bs = self.beamsplitter_gate();
        bs.apply(self, psi);
        self.phase_gate(phi).apply(self, psi);
        bs.apply(self, psi);
    }

    /// Encoded state and its φ-derivative `U_BS G U_E U_BS ψ`.
    pub fn mzi_with_derivative(&self, psi: &[C64], phi: f64) -> (CVec, CVec) {
        let bs = self.beamsplitter_gate();
        let mut a = psi.to_vec();
        bs.apply(self, &mut a);
        self.phase_gate(phi).apply(self, &mut a);
        let mut d = a.clone();
        self.apply_phase_generator(&mut d);
        bs.apply(self, &mut a);
        bs.apply(self, &mut d);
        (CVec::from_vec(a), CVec::from_vec(d))
    }

    /// Dense matrix of an in-place action.
    pub fn to_matrix(&self, apply: impl Fn(&mut [C64])) -> CMat {
        let dim = self.layout.dim();
        let mut m = CMat::identity(dim, dim);
        for col in m.as_mut_slice().chunks_mut(dim) {
            apply(col);
        }
        m
    }
}

/// A single compiled gate.
#[derive(Debug, Clone)]
pub enum Gate {
    /// Block unitaries aligned with the hopping blocks of [`Optics`].
    Tunneling(Vec<CMat>),
    Diagonal(Vec<C64>),
    /// `(a, b, cos θ, sin θ)`: `a → cos a - i sin b`, `b → -i sin a + cos b`.
    PairRotation(Vec<(usize, usize, f64, f64)>),
}

impl Gate {
    pub fn apply(&self, optics: &Optics, psi: &mut [C64]) {
        match self {
            Gate::Tunneling(blocks) => {
                let ed = optics.layout.emitter_dim();
                let mut buf = Vec::new();
                for (block, u) in optics.hopping.iter().zip(blocks) {
                    let m = block.indices.len();
                    for e in 0..ed {
                        buf.clear();
                        buf.extend(block.indices.iter().map(|&i| psi[i * ed + e]));
                        for (r, &i) in block.indices.iter().enumerate() {
                            let mut acc = C64::new(0.0, 0.0);
                            for c in 0..m {
                                acc += u[(r, c)] * buf[c];
                            }
                            psi[i * ed + e] = acc;
                        }
                    }
                }
            }
            Gate::Diagonal(phases) => {
                for (z, p) in psi.iter_mut().zip(phases) {
                    *z *= p;
                }
            }
            Gate::PairRotation(rots) => {
                for &(a, b, c, s) in rots {
                    let (x, y) = (psi[a], psi[b]);
                    let is = C64::new(0.0, s);
                    psi[a] = x * c - is * y;
                    psi[b] = y * c - is * x;
                }
            }
        }
    }
}

/// A compiled parametrized circuit.
#[derive(Debug, Clone)]
pub struct Circuit {
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn apply(&self, optics: &Optics, psi: &mut [C64]) {
        for g in &self.gates {
            g.apply(optics, psi);
        }
    }

    pub fn apply_to_state(&self, optics: &Optics, state: &PureState) -> PureState {
        state.map(|psi| self.apply(optics, psi))
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }
}

/// `exp(-i J (a2†a1 + a1†a2))`.
pub fn tunneling_unitary(j_tilde: f64, layout: SystemLayout) -> CMat {
    let optics = Optics::new(layout);
    let g = optics.tunneling_gate(j_tilde);
    optics.to_matrix(|psi| g.apply(&optics, psi))
}

/// One emitter layer `U_int^(2) U_int^(1) U_e^(2) U_e^(1) U_t`.
pub fn emitter_layer(
    j_tilde: f64,
    delta_tilde: f64,
    g_tilde: f64,
    layout: SystemLayout,
) -> Result<CMat> {
    let optics = Optics::new(layout);
    let gates = optics.layer_gates(AnsatzKind::Emitter, &[j_tilde, delta_tilde, g_tilde])?;
    Ok(optics.to_matrix(|psi| gates.iter().for_each(|g| g.apply(&optics, psi))))
}

/// One Kerr layer `U_Kerr^(2) U_Kerr^(1) U_t`.
pub fn kerr_layer(j_tilde: f64, u_tilde: f64, layout: SystemLayout) -> CMat {
    let optics = Optics::new(layout);
    let t = optics.tunneling_gate(j_tilde);
    let k = optics.kerr_gate(u_tilde);
    optics.to_matrix(|psi| {
        t.apply(&optics, psi);
        k.apply(&optics, psi);
    })
}

/// Diagonal of the two-mode Kerr factor.
pub fn kerr_factor(u_tilde: f64, layout: SystemLayout) -> Vec<C64> {
    match Optics::new(layout).kerr_gate(u_tilde) {
        Gate::Diagonal(d) => d,
        _ => unreachable!("kerr gate is diagonal"),
    }
}

pub fn build_circuit(
    spec: &CircuitSpec,
    params: &ParamVector,
    layout: SystemLayout,
) -> Result<CMat> {
    let optics = Optics::new(layout);
    let circuit = optics.compile(spec, params.values())?;
    Ok(optics.to_matrix(|psi| circuit.apply(&optics, psi)))
}

/// Symmetric beamsplitter, `tunneling_unitary(π/4)`.
pub fn beamsplitter_unitary(layout: SystemLayout) -> CMat {
    tunneling_unitary(FRAC_PI_4, layout)
}

/// `exp(iφ(n1 - n2)/2)`.
pub fn phase_encoder(phi: f64, layout: SystemLayout) -> CMat {
    let optics = Optics::new(layout);
    match optics.phase_gate(phi) {
        Gate::Diagonal(d) => CMat::from_diagonal(&CVec::from_vec(d)),
        _ => unreachable!("phase gate is diagonal"),
    }
}

/// Beamsplitter, phase, beamsplitter.
pub fn mzi_encode(state: &PureState, phi: f64) -> PureState {
    let optics = Optics::new(state.layout());
    state.map(|psi| optics.apply_mzi(psi, phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{mode_operator, OperatorKind};
    use crate::linalg::{hermitian_exp, max_abs_diff, unitarity_defect};
    use core::f64::consts::{FRAC_PI_2, PI};

    fn photonic(n: usize) -> SystemLayout {
        SystemLayout::photonic(n).unwrap()
    }

    fn hopping_generator(layout: SystemLayout) -> CMat {
        let a1 = mode_operator(OperatorKind::Annihilation, Subsystem::Mode1, layout).unwrap();
        let a2 = mode_operator(OperatorKind::Annihilation, Subsystem::Mode2, layout).unwrap();
        a2.adjoint() * &a1 + a1.adjoint() * &a2
    }

    #[test]
    fn tunneling_matches_dense_exponential() {
        for layout in [photonic(4), SystemLayout::with_emitters(3).unwrap()] {
            let h = hopping_generator(layout);
            for j in [0.0, 0.3, -1.7, FRAC_PI_4] {
                let dense = hermitian_exp(&h, j);
                assert!(max_abs_diff(&dense, &tunneling_unitary(j, layout)) < 1e-10);
            }
        }
    }

    #[test]
    fn tunneling_zero_is_identity() {
        let l = photonic(3);
        assert!(max_abs_diff(&tunneling_unitary(0.0, l), &CMat::identity(16, 16)) < 1e-14);
    }

    #[test]
    fn half_pi_tunneling_swaps_single_photon() {
        let l = photonic(2);
        let u = tunneling_unitary(FRAC_PI_2, l);
        let out = &u * PureState::fock(l, 1, 0).unwrap().amplitudes();
        let expected = l.index(0, 1, 0, 0);
        assert!((out[expected] - C64::new(0.0, -1.0)).norm() < 1e-10);
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beamsplitter_twice_is_half_pi_tunneling() {
        let l = photonic(3);
        let bs = beamsplitter_unitary(l);
        assert!(max_abs_diff(&(&bs * &bs), &tunneling_unitary(FRAC_PI_2, l)) < 1e-12);
        assert!(max_abs_diff(&bs, &tunneling_unitary(FRAC_PI_4, l)) == 0.0);
    }

    #[test]
    fn coupling_matches_dense_exponential() {
        let l = SystemLayout::with_emitters(3).unwrap();
        let mut gen = CMat::zeros(l.dim(), l.dim());
        for (mode, em) in [
            (Subsystem::Mode1, Subsystem::Emitter1),
            (Subsystem::Mode2, Subsystem::Emitter2),
        ] {
            let a = mode_operator(OperatorKind::Annihilation, mode, l).unwrap();
            let s = mode_operator(OperatorKind::LowerEmitter, em, l).unwrap();
            gen += s.adjoint() * &a + &s * a.adjoint();
        }
        let optics = Optics::new(l);
        let g = 0.83;
        let gates = [
            optics.coupling_gate(g, Subsystem::Mode1).unwrap(),
            optics.coupling_gate(g, Subsystem::Mode2).unwrap(),
        ];
        let fast = optics.to_matrix(|psi| gates.iter().for_each(|x| x.apply(&optics, psi)));
        assert!(max_abs_diff(&fast, &hermitian_exp(&gen, g)) < 1e-10);
    }

    #[test]
    fn rabi_swap_single_excitation() {
        let l = SystemLayout::with_emitters(2).unwrap();
        let u = emitter_layer(0.0, 0.0, FRAC_PI_2, l).unwrap();
        let mut psi = CVec::zeros(l.dim());
        psi[l.index(1, 0, 0, 0)] = C64::new(1.0, 0.0);
        let out = &u * &psi;
        assert!((out[l.index(0, 0, 1, 0)] - C64::new(0.0, -1.0)).norm() < 1e-10);
    }

    #[test]
    fn emitter_layer_needs_emitters() {
        assert!(emitter_layer(0.1, 0.2, 0.3, photonic(2)).is_err());
        let l = SystemLayout::with_emitters(2).unwrap();
        let id = emitter_layer(0.0, 0.0, 0.0, l).unwrap();
        assert!(max_abs_diff(&id, &CMat::identity(l.dim(), l.dim())) < 1e-14);
    }

    #[test]
    fn kerr_two_pi_is_exact_identity() {
        let l = photonic(40);
        assert!(kerr_factor(TAU, l).iter().all(|z| *z == C64::new(1.0, 0.0)));
        assert!(kerr_factor(-2.0 * TAU, l)
            .iter()
            .all(|z| *z == C64::new(1.0, 0.0)));
    }

    #[test]
    fn kerr_pi_flips_two_photon_level() {
        assert!((kerr_phase(PI, 2) - C64::new(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(kerr_phase(PI, 0), C64::new(1.0, 0.0));
        assert_eq!(kerr_phase(PI, 1), C64::new(1.0, 0.0));
        let l = photonic(3);
        let k = kerr_layer(0.0, 0.0, l);
        assert!(max_abs_diff(&k, &CMat::identity(16, 16)) < 1e-14);
    }

    #[test]
    fn circuit_composition_order() {
        let l = photonic(3);
        let spec = CircuitSpec::new(AnsatzKind::Kerr, 2).unwrap();
        let p = ParamVector::unbounded(vec![0.3, 0.7, -0.4, 1.1]);
        let full = build_circuit(&spec, &p, l).unwrap();
        let expected = kerr_layer(-0.4, 1.1, l) * kerr_layer(0.3, 0.7, l);
        assert!(max_abs_diff(&full, &expected) < 1e-12);
        assert!(build_circuit(&spec, &ParamVector::unbounded(vec![0.0; 3]), l).is_err());
        let zero = build_circuit(
            &CircuitSpec::new(AnsatzKind::Kerr, 3).unwrap(),
            &ParamVector::unbounded(vec![0.0; 6]),
            l,
        )
        .unwrap();
        assert!(max_abs_diff(&zero, &CMat::identity(16, 16)) < 1e-14);
    }

    #[test]
    fn phase_encoder_on_noon_component() {
        let l = photonic(4);
        let phi = 0.37;
        let u = phase_encoder(phi, l);
        let i = l.index(4, 0, 0, 0);
        assert!((u[(i, i)] - C64::from_polar(1.0, phi * 2.0)).norm() < 1e-15);
        assert!(max_abs_diff(&phase_encoder(0.0, l), &CMat::identity(25, 25)) == 0.0);
    }

    #[test]
    fn mzi_at_zero_phase_is_half_pi_tunneling() {
        let l = photonic(3);
        let s = PureState::fock(l, 2, 1).unwrap();
        let out = mzi_encode(&s, 0.0);
        let expected = tunneling_unitary(FRAC_PI_2, l) * s.amplitudes();
        assert!((out.amplitudes() - expected).norm() < 1e-12);
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bounds_apply_to_kerr_entries_only() {
        let spec = CircuitSpec::new(AnsatzKind::Kerr, 2).unwrap();
        let b = spec.bounds(Some(0.5));
        assert_eq!(b[0], None);
        assert_eq!(b[1], Some(Interval::symmetric(0.5)));
        assert!(ParamVector::with_bounds(vec![0.0, 0.6, 0.0, 0.0], b.clone()).is_err());
        let c = ParamVector::clamped(vec![0.0, 0.6, 0.0, -0.9], b).unwrap();
        assert_eq!(c.values(), &[0.0, 0.5, 0.0, -0.5]);
        assert_eq!(
            CircuitSpec::new(AnsatzKind::Emitter, 4)
                .unwrap()
                .param_count(),
            12
        );
        assert!(CircuitSpec::new(AnsatzKind::Kerr, 0).is_err());
    }

    #[test]
    fn random_circuits_are_unitary() {
        let l = SystemLayout::with_emitters(4).unwrap();
        let spec = CircuitSpec::new(AnsatzKind::Emitter, 5).unwrap();
        let p: Vec<f64> = (0..15).map(|k| ((k as f64) * 1.37).sin() * 2.0).collect();
        let u = build_circuit(&spec, &ParamVector::unbounded(p), l).unwrap();
        assert!(unitarity_defect(&u) < 1e-9);
    }
}
