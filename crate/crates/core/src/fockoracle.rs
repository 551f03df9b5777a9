//! Exact many-body propagation on a small mode set, used to cross-check the
//! determinant formulas of [`crate::multipair`].
//!
//! Single-particle mode i maps to c_i = a_e for an electron mode and
//! c_i = b†_p for a positron mode. The field operator Hamiltonian is
//! Σ h_ij c†_i c_j; applied literally it carries the c-number Σ_p h_pp from
//! b_p b†_p = 1 − b†_p b_p, so the vacuum phase agrees with det G(−|−).
//!
//! Occupation patterns are bit strings: bits 0..M_p hold positrons, bits
//! M_p.. hold electrons. Operators anticommute with every occupied mode on a
//! lower bit (Jordan–Wigner order).

use std::collections::HashMap;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dynamics::{extract_g_blocks, propagate, HamiltonianMatrix, Integrator};
use crate::error::{Error, Result};
use crate::modebasis::{Band, ModeBasis};
use crate::multipair::{multi_pair_amplitude, pair_amplitudes, vacuum_amplitude};
use crate::physconfig::RunConfig;

/// Largest single-particle basis accepted.
pub const MAX_MODES: usize = 20;

/// Bound on |‖ψ‖ − 1| after propagation.
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;

/// Charge-zero Fock sector over the electron and positron modes of a basis.
#[derive(Clone, Debug)]
pub struct FockBasis {
    electrons: usize,
    positrons: usize,
    patterns: Vec<u32>,
    index: HashMap<u32, usize>,
    /// Fermion bit of each single-particle basis index.
    mode_bit: Vec<u32>,
    mode_band: Vec<Band>,
}

impl FockBasis {
    pub fn new(basis: &ModeBasis) -> Result<Self> {
        if basis.len() > MAX_MODES {
            return Err(Error::OracleTooLarge { modes: basis.len(), max: MAX_MODES });
        }
        let half = basis.half_len();
        let mut mode_bit = vec![0; basis.len()];
        let mut mode_band = vec![Band::Plus; basis.len()];
        for l in 0..half {
            mode_bit[basis.positron_index(l)] = l as u32;
            mode_band[basis.positron_index(l)] = Band::Minus;
            mode_bit[basis.electron_index(l)] = (half + l) as u32;
        }
        let positron_mask = (1u32 << half) - 1;
        let mut patterns: Vec<u32> = (0u32..1 << (2 * half))
            .filter(|&p| (p & positron_mask).count_ones() == (p >> half).count_ones())
            .collect();
        // order by pair number, then by pattern
        patterns.sort_by_key(|&p| ((p >> half).count_ones(), p));
        let index = patterns.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        Ok(Self { electrons: half, positrons: half, patterns, index, mode_bit, mode_band })
    }

    pub fn dim(&self) -> usize {
        self.patterns.len()
    }

    pub fn electron_modes(&self) -> usize {
        self.electrons
    }

    pub fn positron_modes(&self) -> usize {
        self.positrons
    }

    pub fn pattern(&self, i: usize) -> u32 {
        self.patterns[i]
    }

    pub fn index_of(&self, pattern: u32) -> Option<usize> {
        self.index.get(&pattern).copied()
    }

    pub fn electron_bit(&self, e: usize) -> u32 {
        (self.positrons + e) as u32
    }

    pub fn positron_bit(&self, p: usize) -> u32 {
        p as u32
    }

    /// Number of pairs in a pattern.
    pub fn pairs(&self, pattern: u32) -> usize {
        (pattern >> self.positrons).count_ones() as usize
    }

    /// Occupied electron and positron labels, ascending.
    pub fn labels(&self, pattern: u32) -> (Vec<usize>, Vec<usize>) {
        let e = (0..self.electrons).filter(|&e| pattern >> self.electron_bit(e) & 1 == 1).collect();
        let p = (0..self.positrons).filter(|&p| pattern >> self.positron_bit(p) & 1 == 1).collect();
        (e, p)
    }
}

/// Creation (`create`) or annihilation of the fermion on `bit`; `None` when
/// the result vanishes.
fn apply_op(pattern: u32, bit: u32, create: bool) -> Option<(u32, f64)> {
    let occupied = pattern >> bit & 1 == 1;
    if occupied == create {
        return None;
    }
    let below = pattern & ((1u32 << bit) - 1);
    let sign = if below.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((pattern ^ (1 << bit), sign))
}

/// c_i applied to a pattern: annihilates an electron or creates a positron.
fn apply_c(fock: &FockBasis, pattern: u32, i: usize, dagger: bool) -> Option<(u32, f64)> {
    let bit = fock.mode_bit[i];
    match fock.mode_band[i] {
        Band::Plus => apply_op(pattern, bit, dagger),
        Band::Minus => apply_op(pattern, bit, !dagger),
    }
}

/// Matrix elements of c†_i c_j: (source, target, sign) for every pattern it
/// does not annihilate.
fn hopping(fock: &FockBasis, i: usize, j: usize) -> Transitions {
    let mut out = Vec::new();
    for (src, &p) in fock.patterns.iter().enumerate() {
        if let Some((q, s1)) = apply_c(fock, p, j, false) {
            if let Some((r, s2)) = apply_c(fock, q, i, true) {
                let dst = fock.index_of(r).expect("c†c left the charge-zero sector");
                out.push((src as u32, dst as u32, s1 * s2));
            }
        }
    }
    out
}

/// Σ h_ij c†_i c_j as a sparse operator over a [`FockBasis`].
#[derive(Clone, Debug)]
pub struct FockOperator {
    dim: usize,
    /// (target, source, value), targets ascending.
    entries: Vec<(u32, u32, C64)>,
    /// Σ over positron modes of h_pp, the vacuum c-number.
    pub constant: C64,
}

impl FockOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, psi: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for &(t, s, v) in &self.entries {
            out[t as usize] += v * psi[s as usize];
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(t, s, v) in &self.entries {
            m[(t as usize, s as usize)] += v;
        }
        m
    }

    /// The operator with the vacuum c-number removed.
    pub fn normal_ordered_dense(&self) -> DMatrix<C64> {
        let mut m = self.to_dense();
        for i in 0..self.dim {
            m[(i, i)] -= self.constant;
        }
        m
    }
}

/// (source index, target index, sign) triples of one c†_i c_j.
type Transitions = Vec<(u32, u32, f64)>;

/// Reusable sparsity structure of c†_i c_j for every (i, j).
struct HoppingTable {
    dim: usize,
    terms: HashMap<(usize, usize), Transitions>,
}

impl HoppingTable {
    fn new(fock: &FockBasis) -> Self {
        Self { dim: fock.dim(), terms: HashMap::new() }
    }

    fn operator(&mut self, fock: &FockBasis, h: &HamiltonianMatrix, basis: &ModeBasis) -> FockOperator {
        let m = &h.matrix;
        let mut accum: HashMap<(u32, u32), C64> = HashMap::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                let term = self.terms.entry((i, j)).or_insert_with(|| hopping(fock, i, j));
                for &(s, t, sign) in term.iter() {
                    *accum.entry((t, s)).or_insert(C64::new(0.0, 0.0)) += v * sign;
                }
            }
        }
        let mut entries: Vec<(u32, u32, C64)> = accum.into_iter().map(|((t, s), v)| (t, s, v)).collect();
        entries.sort_by_key(|&(t, s, _)| (t, s));
        let constant = basis.band_indices(Band::Minus).iter().map(|&i| m[(i, i)]).sum();
        FockOperator { dim: self.dim, entries, constant }
    }
}

pub fn second_quantize(h: &HamiltonianMatrix, basis: &ModeBasis) -> Result<FockOperator> {
    if h.dim() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), found: h.dim() });
    }
    let fock = FockBasis::new(basis)?;
    Ok(HoppingTable::new(&fock).operator(&fock, h, basis))
}

#[derive(Clone, Debug)]
pub struct ManyBodyState {
    pub fock: FockBasis,
    pub amplitudes: Vec<C64>,
}

impl ManyBodyState {
    pub fn vacuum(basis: &ModeBasis) -> Result<Self> {
        let fock = FockBasis::new(basis)?;
        let mut amplitudes = vec![C64::new(0.0, 0.0); fock.dim()];
        amplitudes[fock.index_of(0).unwrap()] = C64::new(1.0, 0.0);
        Ok(Self { fock, amplitudes })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨0|ψ⟩.
    pub fn vacuum_amplitude(&self) -> C64 {
        self.amplitudes[self.fock.index_of(0).unwrap()]
    }

    /// Σ |amplitude|² over patterns with N pairs, N = 0..=n_max.
    pub fn sector_probabilities(&self, n_max: usize) -> Vec<f64> {
        let mut c = vec![0.0; n_max + 1];
        for (i, z) in self.amplitudes.iter().enumerate() {
            let n = self.fock.pairs(self.fock.pattern(i));
            if n <= n_max {
                c[n] += z.norm_sqr();
            }
        }
        c
    }

    /// Amplitude table: N, electron labels, positron labels, Re, Im, |c|² for
    /// every canonical ket with |c|² at or above `threshold`.
    pub fn write_csv<W: Write>(&self, threshold: f64, mut w: W) -> std::io::Result<()> {
        writeln!(w, "N,electrons,positrons,re,im,probability")?;
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        for i in 0..self.fock.dim() {
            let (e, p) = self.fock.labels(self.fock.pattern(i));
            let c = read_amplitude(self, &e, &p).expect("labels decoded from the basis");
            if c.norm_sqr() >= threshold {
                writeln!(w, "{},{},{},{},{},{}", e.len(), join(&e), join(&p), c.re, c.im, c.norm_sqr())?;
            }
        }
        Ok(())
    }
}

/// exp(−iH dt)ψ by Taylor series, summed until the terms drop below roundoff.
fn taylor_step(op: &FockOperator, psi: &mut [C64], dt: f64, work: &mut [Vec<C64>; 2]) {
    let [term, next] = work;
    term.copy_from_slice(psi);
    let scale = C64::new(0.0, -dt);
    for k in 1..200 {
        op.apply(term, next);
        let f = scale / k as f64;
        let mut size = 0.0f64;
        for (t, n) in term.iter_mut().zip(next.iter()) {
            *t = *n * f;
            size = size.max(t.norm());
        }
        for (p, t) in psi.iter_mut().zip(term.iter()) {
            *p += *t;
        }
        if size < 1e-18 {
            break;
        }
    }
}

/// Evolves `state` through every step of the run window with the same
/// midpoint Hamiltonians and step length as the single-particle path.
pub fn propagate_state(config: &RunConfig, basis: &ModeBasis, state: &mut ManyBodyState) -> Result<()> {
    let integrator = Integrator::new(config, basis);
    let dt = integrator.dt();
    let mut table = HoppingTable::new(&state.fock);
    let dim = state.fock.dim();
    let mut work = [vec![C64::new(0.0, 0.0); dim], vec![C64::new(0.0, 0.0); dim]];
    let start_norm = state.norm();
    for step in 0..integrator.total_steps() {
        let h = integrator.hamiltonian_at_step(step);
        let op = table.operator(&state.fock, &h, basis);
        taylor_step(&op, &mut state.amplitudes, dt, &mut work);
    }
    let drift = (state.norm() - start_norm).abs();
    if drift > NORM_DRIFT_LIMIT {
        return Err(Error::NormDrift { drift, limit: NORM_DRIFT_LIMIT });
    }
    Ok(())
}

pub fn propagate_vacuum(config: &RunConfig, basis: &ModeBasis) -> Result<ManyBodyState> {
    let mut state = ManyBodyState::vacuum(basis)?;
    propagate_state(config, basis, &mut state)?;
    Ok(state)
}

/// ⟨N|ψ⟩ for |N⟩ = b†_{n1}…b†_{nN} a†_{mN}…a†_{m1}|0⟩, labels taken in the
/// order given. Repeated labels give exactly zero.
pub fn read_amplitude(state: &ManyBodyState, electrons: &[usize], positrons: &[usize]) -> Result<C64> {
    let fock = &state.fock;
    if electrons.len() != positrons.len() {
        return Err(Error::InvalidInput(format!(
            "{} electron labels but {} positron labels",
            electrons.len(),
            positrons.len()
        )));
    }
    if let Some(&bad) = electrons.iter().find(|&&e| e >= fock.electrons) {
        return Err(Error::UnknownLabel(bad));
    }
    if let Some(&bad) = positrons.iter().find(|&&p| p >= fock.positrons) {
        return Err(Error::UnknownLabel(bad));
    }
    let mut pattern = 0u32;
    let mut sign = 1.0;
    let bits = electrons
        .iter()
        .map(|&e| fock.electron_bit(e))
        .chain(positrons.iter().rev().map(|&p| fock.positron_bit(p)));
    for bit in bits {
        match apply_op(pattern, bit, true) {
            Some((q, s)) => {
                pattern = q;
                sign *= s;
            }
            None => return Ok(C64::new(0.0, 0.0)),
        }
    }
    let idx = fock.index_of(pattern).expect("equal counts stay in the charge-zero sector");
    Ok(state.amplitudes[idx] * sign)
}

/// Determinant path against exact Fock propagation on the same run.
#[derive(Clone, Debug, Serialize)]
pub struct CrossCheck {
    pub c_v_determinant: C64,
    pub c_v_fock: C64,
    /// Largest |c_det − c_fock| over every canonical ket with 1 ≤ N ≤ n_max.
    pub amplitude_max_diff: f64,
    pub amplitudes_compared: usize,
    /// Σ_N c_N from the Fock state, all sectors.
    pub sector_fock: Vec<f64>,
    pub fock_norm: f64,
}

impl CrossCheck {
    pub fn max_difference(&self) -> f64 {
        self.amplitude_max_diff.max((self.c_v_determinant - self.c_v_fock).norm())
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
        .collect()
}

/// Compares C_v and every amplitude with up to `n_max` pairs between the
/// two routes.
pub fn cross_check(config: &RunConfig, basis: &ModeBasis, n_max: usize) -> Result<CrossCheck> {
    let state = propagate_vacuum(config, basis)?;
    let u = propagate(config, basis)?;
    let g = extract_g_blocks(&u, basis)?;
    let w = pair_amplitudes(&g)?;
    let cv = vacuum_amplitude(&g);
    let half = basis.half_len();
    let mut worst = 0.0f64;
    let mut compared = 0;
    for n in 1..=n_max.min(half) {
        let sets = subsets(half, n);
        for e in &sets {
            for p in &sets {
                let det = multi_pair_amplitude(&w, &cv, e, p)?.amplitude;
                let fock = read_amplitude(&state, e, p)?;
                worst = worst.max((det - fock).norm());
                compared += 1;
            }
        }
    }
    Ok(CrossCheck {
        c_v_determinant: cv.c_v,
        c_v_fock: state.vacuum_amplitude(),
        amplitude_max_diff: worst,
        amplitudes_compared: compared,
        sector_fock: state.sector_probabilities(half),
        fock_norm: state.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::assemble_hamiltonian;
    use crate::fieldmodel::FourierPotential;
    use crate::physconfig::{FieldParams, HelicityRelation, NumericsParams, WindowParams};
    use proptest::prelude::*;

    fn basis1() -> ModeBasis {
        ModeBasis::build(&NumericsParams::with_cutoff(1), &FieldParams::new(0.746, 0.3, 0.2, HelicityRelation::Same))
    }

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn sector_dimension() {
        let b = basis1();
        let f = FockBasis::new(&b).unwrap();
        assert_eq!(f.dim(), (0..=6).map(|n| binom(6, n) * binom(6, n)).sum::<usize>());
        assert_eq!(f.dim(), 924);
        assert_eq!(f.pattern(0), 0);
        for i in 0..f.dim() {
            assert_eq!(f.index_of(f.pattern(i)), Some(i));
        }
    }

    #[test]
    fn oversized_basis_is_rejected() {
        let b = ModeBasis::build(&NumericsParams::with_cutoff(3), &FieldParams::new(0.746, 0.3, 0.2, HelicityRelation::Same));
        assert!(matches!(FockBasis::new(&b), Err(Error::OracleTooLarge { modes: 28, max: 20 })));
    }

    #[test]
    fn free_hamiltonian_energies() {
        let b = basis1();
        let h = assemble_hamiltonian(&b, &FourierPotential::zero());
        let op = second_quantize(&h, &b).unwrap();
        let fock = FockBasis::new(&b).unwrap();
        let m = op.normal_ordered_dense();
        let sea: f64 = (0..6).map(|p| b.positron(p).energy).sum();
        assert!((op.constant.re - sea).abs() < 1e-14);
        for i in 0..fock.dim() {
            let (e, p) = fock.labels(fock.pattern(i));
            let expected: f64 =
                e.iter().map(|&x| b.electron(x).energy.abs()).sum::<f64>() + p.iter().map(|&x| b.positron(x).energy.abs()).sum::<f64>();
            assert!((m[(i, i)].re - expected).abs() < 1e-13);
            for j in 0..fock.dim() {
                if i != j {
                    assert_eq!(m[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn free_vacuum_is_stationary() {
        let b = basis1();
        let config = RunConfig {
            field: FieldParams::new(0.746, 0.0, 0.2, HelicityRelation::Same),
            window: WindowParams { ramp_cycles: 1, plateau_cycles: 0 },
            numerics: NumericsParams { steps_per_cycle: 64, ..NumericsParams::with_cutoff(1) },
        };
        let s = propagate_vacuum(&config, &b).unwrap();
        let v = s.vacuum_amplitude();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        let sea: f64 = (0..6).map(|p| b.positron(p).energy).sum();
        let t = 2.0 * config.field.period();
        let expected = C64::from_polar(1.0, -sea * t);
        assert!((v - expected).norm() < 1e-10);
    }

    #[test]
    fn pair_coupling_only_creates_and_annihilates_pairs() {
        let b = basis1();
        let fock = FockBasis::new(&b).unwrap();
        let (ei, pi) = (b.electron_index(2), b.positron_index(4));
        let mut m = DMatrix::zeros(b.len(), b.len());
        m[(ei, pi)] = C64::new(0.3, 0.7);
        m[(pi, ei)] = C64::new(0.3, -0.7);
        let op = second_quantize(&HamiltonianMatrix { matrix: m }, &b).unwrap();
        assert_eq!(op.constant, C64::new(0.0, 0.0));
        let pair = (1u32 << fock.electron_bit(2)) | (1u32 << fock.positron_bit(4));
        let dense = op.to_dense();
        let mut count = 0;
        for i in 0..fock.dim() {
            for j in 0..fock.dim() {
                if dense[(i, j)].norm() > 0.0 {
                    let (pi_, pj) = (fock.pattern(i), fock.pattern(j));
                    assert_eq!(pi_ ^ pj, pair);
                    assert_eq!(fock.pairs(pi_).abs_diff(fock.pairs(pj)), 1);
                    count += 1;
                }
            }
        }
        assert!(count > 0);
    }

    #[test]
    fn vacuum_queries() {
        let b = basis1();
        let s = ManyBodyState::vacuum(&b).unwrap();
        assert_eq!(read_amplitude(&s, &[0], &[1]).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(read_amplitude(&s, &[], &[]).unwrap(), C64::new(1.0, 0.0));
        assert!(matches!(read_amplitude(&s, &[9], &[1]), Err(Error::UnknownLabel(9))));
        assert!(read_amplitude(&s, &[0, 1], &[1]).is_err());
    }

    #[test]
    fn repeated_label_reads_zero() {
        let b = basis1();
        let mut s = ManyBodyState::vacuum(&b).unwrap();
        s.amplitudes.iter_mut().for_each(|z| *z = C64::new(0.1, 0.2));
        let z = read_amplitude(&s, &[1, 1], &[0, 2]).unwrap();
        assert_eq!((z.re.to_bits(), z.im.to_bits()), (0, 0));
    }

    #[test]
    fn ket_ordering_sign() {
        let b = basis1();
        let mut s = ManyBodyState::vacuum(&b).unwrap();
        s.amplitudes.iter_mut().enumerate().for_each(|(i, z)| *z = C64::new(i as f64, 0.0));
        let a = read_amplitude(&s, &[0, 3], &[1, 5]).unwrap();
        assert_eq!(read_amplitude(&s, &[3, 0], &[1, 5]).unwrap(), -a);
        assert_eq!(read_amplitude(&s, &[0, 3], &[5, 1]).unwrap(), -a);
        assert_eq!(read_amplitude(&s, &[3, 0], &[5, 1]).unwrap(), a);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn many_body_operator_is_hermitian(entries in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 144)) {
            let b = basis1();
            let mut m = DMatrix::from_fn(12, 12, |i, j| C64::new(entries[12 * i + j].0, entries[12 * i + j].1));
            m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            let op = second_quantize(&HamiltonianMatrix { matrix: m }, &b).unwrap();
            let d = op.to_dense();
            let r = (&d - d.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(r < 1e-12);
        }
    }
}
