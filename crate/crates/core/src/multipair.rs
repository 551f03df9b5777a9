//! Pair content of the out state: relative pair amplitudes ω, vacuum
//! persistence C_v, multi-pair amplitudes, sector probabilities c_N and the
//! spin/helicity averages per sector.
//!
//! The out state is C_v·exp(Σ ω_mn b†_n a†_m)|0⟩. Projecting on the ket
//! b†_{n1}…b†_{nN} a†_{mN}…a†_{m1}|0⟩ collects every pairing of the listed
//! electrons with the listed positrons with the sign of the pairing
//! permutation, i.e. C_v·det ω[{m},{n}]. Reordering either label list
//! multiplies both the ket and the determinant by the same parity.
//!
//! Electron labels index the positive-energy half of the mode basis and
//! positron labels the negative-energy half, both in basis order.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::GBlocks;
use crate::error::{Error, Result};
use crate::modebasis::ModeBasis;
use crate::physconfig::NumericsParams;

/// Default cap on the 1-norm condition number of G(−|−).
pub const CONDITION_CAP: f64 = 1e12;

/// Default bound on the number of (electron set, positron set) pairs visited.
pub const ENUMERATION_BUDGET: u128 = 50_000_000;

/// Relative deficit of an enumerated sector against the full-spectrum value
/// above which the sector is flagged as affected by pruning.
pub const SECTOR_DEFICIT_FLAG: f64 = 1e-4;

const TOP_STATES: usize = 16;

#[derive(Clone, Debug)]
pub struct PairAmplitudeMatrix {
    /// ω = −G(+|−)·G(−|−)⁻¹; rows electrons, columns positrons.
    pub omega: DMatrix<C64>,
    /// 1-norm condition number of G(−|−).
    pub cond_mm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VacuumAmplitude {
    /// det G(−|−), phase included.
    pub c_v: C64,
    /// log|det G(−|−)|.
    pub log_abs: f64,
}

impl VacuumAmplitude {
    /// |C_v|², evaluated from the logarithm.
    pub fn probability(&self) -> f64 {
        (2.0 * self.log_abs).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiPairAmplitude {
    /// Canonical (ascending) electron labels.
    pub electrons: Vec<usize>,
    /// Canonical (ascending) positron labels.
    pub positrons: Vec<usize>,
    /// Amplitude of the canonically ordered ket.
    pub amplitude: C64,
    /// Product of the parities of the two input orderings.
    pub ordering_sign: f64,
    /// A label appeared twice; the amplitude is exactly zero.
    pub pauli_excluded: bool,
}

impl MultiPairAmplitude {
    /// Amplitude of the ket built from the labels in the order they were given.
    pub fn amplitude_as_given(&self) -> C64 {
        self.amplitude * self.ordering_sign
    }

    pub fn probability(&self) -> f64 {
        self.amplitude.norm_sqr()
    }
}

/// Determinant by Gaussian elimination with partial pivoting, returned as
/// (log|det|, det/|det|). A singular matrix gives (−∞, 0).
pub fn log_det(m: &DMatrix<C64>) -> (f64, C64) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "determinant of a non-square matrix");
    let mut a: Vec<C64> = (0..n * n).map(|k| m[(k / n, k % n)]).collect();
    log_det_in_place(&mut a, n)
}

fn log_det_in_place(a: &mut [C64], n: usize) -> (f64, C64) {
    let mut log_abs = 0.0;
    let mut phase = C64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x * n + col].norm().partial_cmp(&a[y * n + col].norm()).unwrap())
            .unwrap();
        let p = a[pivot * n + col];
        if p.norm() == 0.0 {
            return (f64::NEG_INFINITY, C64::new(0.0, 0.0));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            phase = -phase;
        }
        log_abs += p.norm().ln();
        phase *= p / p.norm();
        for row in col + 1..n {
            let f = a[row * n + col] / p;
            if f.re != 0.0 || f.im != 0.0 {
                for k in col + 1..n {
                    let v = a[col * n + k];
                    a[row * n + k] -= f * v;
                }
            }
        }
    }
    (log_abs, phase)
}

/// Plain determinant of a small row-major matrix.
fn det_small(a: &mut [C64], n: usize) -> C64 {
    match n {
        0 => C64::new(1.0, 0.0),
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => {
            let (log_abs, phase) = log_det_in_place(a, n);
            if log_abs == f64::NEG_INFINITY {
                C64::new(0.0, 0.0)
            } else {
                phase * log_abs.exp()
            }
        }
    }
}

fn one_norm(m: &DMatrix<C64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn pair_amplitudes(g: &GBlocks) -> Result<PairAmplitudeMatrix> {
    pair_amplitudes_with_cap(g, CONDITION_CAP)
}

/// ω = −G(+|−)·G(−|−)⁻¹, failing when G(−|−) is too close to singular.
pub fn pair_amplitudes_with_cap(g: &GBlocks, cap: f64) -> Result<PairAmplitudeMatrix> {
    let inv = g.g_mm.clone().try_inverse().ok_or(Error::IllConditioned { cond: f64::INFINITY, cap })?;
    let cond = one_norm(&g.g_mm) * one_norm(&inv);
    if !(cond.is_finite() && cond <= cap) {
        return Err(Error::IllConditioned { cond, cap });
    }
    let omega = -(&g.g_pm * inv);
    Ok(PairAmplitudeMatrix { omega, cond_mm: cond })
}

pub fn vacuum_amplitude(g: &GBlocks) -> VacuumAmplitude {
    let (log_abs, phase) = log_det(&g.g_mm);
    let c_v = if log_abs == f64::NEG_INFINITY { C64::new(0.0, 0.0) } else { phase * log_abs.exp() };
    VacuumAmplitude { c_v, log_abs }
}

fn permutation_parity(labels: &[usize]) -> f64 {
    let mut sign = 1.0;
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            if labels[i] > labels[j] {
                sign = -sign;
            }
        }
    }
    sign
}

fn has_repeats(sorted: &[usize]) -> bool {
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Amplitude ⟨N_{m,n}|out⟩ = C_v·det ω[{m},{n}].
pub fn multi_pair_amplitude(
    omega: &PairAmplitudeMatrix,
    c_v: &VacuumAmplitude,
    electrons: &[usize],
    positrons: &[usize],
) -> Result<MultiPairAmplitude> {
    if electrons.len() != positrons.len() {
        return Err(Error::InvalidInput(format!(
            "{} electron labels but {} positron labels",
            electrons.len(),
            positrons.len()
        )));
    }
    if electrons.is_empty() {
        return Err(Error::InvalidInput("a multi-pair state needs at least one pair".into()));
    }
    let (rows, cols) = omega.omega.shape();
    if let Some(&bad) = electrons.iter().find(|&&m| m >= rows) {
        return Err(Error::UnknownLabel(bad));
    }
    if let Some(&bad) = positrons.iter().find(|&&n| n >= cols) {
        return Err(Error::UnknownLabel(bad));
    }
    let mut e = electrons.to_vec();
    let mut p = positrons.to_vec();
    e.sort_unstable();
    p.sort_unstable();
    if has_repeats(&e) || has_repeats(&p) {
        return Ok(MultiPairAmplitude {
            electrons: e,
            positrons: p,
            amplitude: C64::new(0.0, 0.0),
            ordering_sign: 1.0,
            pauli_excluded: true,
        });
    }
    let ordering_sign = permutation_parity(electrons) * permutation_parity(positrons);
    let n = e.len();
    let mut buf: Vec<C64> = Vec::with_capacity(n * n);
    for &m in &e {
        for &q in &p {
            buf.push(omega.omega[(m, q)]);
        }
    }
    let amplitude = c_v.c_v * det_small(&mut buf, n);
    Ok(MultiPairAmplitude { electrons: e, positrons: p, amplitude, ordering_sign, pauli_excluded: false })
}

#[derive(Clone, Debug, Serialize)]
pub struct SinglePair {
    pub electron: usize,
    pub positron: usize,
    pub omega: C64,
    /// |C_v·ω_mn|².
    pub probability: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StateProbability {
    pub electrons: Vec<usize>,
    pub positrons: Vec<usize>,
    pub probability: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SectorObservables {
    /// s⁺_N: summed electron spin, averaged over the sector.
    pub spin_electron: f64,
    /// s⁻_N.
    pub spin_positron: f64,
    /// h⁺_N.
    pub helicity_electron: f64,
    /// h⁻_N.
    pub helicity_positron: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sector {
    pub n: usize,
    /// c_N from the enumeration over retained labels.
    pub probability: f64,
    /// c_N from the full ω spectrum, |C_v|²·e_N(eig ω†ω).
    pub full_probability: f64,
    /// Pruning changed c_N by more than the flag threshold.
    pub pruning_flag: bool,
    /// Σ |c|²·Σᵢ s⁺ᵢ etc. over the enumerated states.
    weighted: [f64; 4],
    pub observables: Option<SectorObservables>,
    pub top_states: Vec<StateProbability>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SectorReport {
    pub sectors: Vec<Sector>,
    /// Single pairs with |ω|² at or above the threshold, most probable first.
    pub retained_pairs: Vec<SinglePair>,
    pub retained_electrons: Vec<usize>,
    pub retained_positrons: Vec<usize>,
    /// 1 − Σ_N c_N over the enumerated sectors: an upper bound on the
    /// probability left out by pruning and by the sector cut.
    pub discarded_mass: f64,
    pub states_enumerated: u64,
}

impl SectorReport {
    pub fn probabilities(&self) -> Vec<f64> {
        self.sectors.iter().map(|s| s.probability).collect()
    }

    pub fn total_probability(&self) -> f64 {
        self.sectors.iter().map(|s| s.probability).sum()
    }

    /// CSV with columns N, c_N, s+_N, s-_N, h+_N, h-_N; undefined observables are empty.
    pub fn write_sectors_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "N,c_N,s+_N,s-_N,h+_N,h-_N")?;
        for s in &self.sectors {
            let obs = |f: fn(&SectorObservables) -> f64| s.observables.as_ref().map(f).map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.n,
                s.probability,
                obs(|o| o.spin_electron),
                obs(|o| o.spin_positron),
                obs(|o| o.helicity_electron),
                obs(|o| o.helicity_positron)
            )?;
        }
        Ok(())
    }

    /// CSV of the retained single pairs and the top multi-pair states:
    /// N, electrons, positrons, |amplitude|².
    pub fn write_states_csv<W: Write>(&self, basis: &ModeBasis, mut w: W) -> std::io::Result<()> {
        writeln!(w, "N,electrons,positrons,probability")?;
        let names = |labels: &[usize], electron: bool| {
            labels
                .iter()
                .map(|&l| if electron { basis.electron(l).label } else { basis.positron(l).label }.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        for p in &self.retained_pairs {
            writeln!(w, "1,{},{},{}", names(&[p.electron], true), names(&[p.positron], false), p.probability)?;
        }
        for s in self.sectors.iter().filter(|s| s.n >= 2) {
            for st in &s.top_states {
                writeln!(w, "{},{},{},{}", s.n, names(&st.electrons, true), names(&st.positrons, false), st.probability)?;
            }
        }
        Ok(())
    }
}

/// Lexicographic k-subsets of `items`.
fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Elementary symmetric polynomials e_0..e_max of `values`.
fn elementary_symmetric(values: &[f64], max: usize) -> Vec<f64> {
    let mut e = vec![0.0; max + 1];
    e[0] = 1.0;
    for &v in values {
        for k in (1..=max).rev() {
            e[k] += v * e[k - 1];
        }
    }
    e
}

#[derive(Default)]
struct Partial {
    probability: f64,
    weighted: [f64; 4],
    top: Vec<(f64, Vec<usize>, Vec<usize>)>,
}

impl Partial {
    fn top_floor(&self) -> f64 {
        if self.top.len() < TOP_STATES {
            0.0
        } else {
            self.top.last().map_or(0.0, |l| l.0)
        }
    }
}

fn push_top(top: &mut Vec<(f64, Vec<usize>, Vec<usize>)>, entry: (f64, Vec<usize>, Vec<usize>)) {
    if top.len() == TOP_STATES && top.last().is_some_and(|l| l.0 >= entry.0) {
        return;
    }
    let pos = top.partition_point(|x| x.0 >= entry.0);
    top.insert(pos, entry);
    top.truncate(TOP_STATES);
}

const MAX_N: usize = 8;

/// Walks all positron subsets T for one electron subset S, computing
/// |det ω\[S,T\]|² by Gaussian elimination one column at a time so that
/// subsets sharing a prefix share the elimination work.
struct SubsetWalker<'a> {
    n: usize,
    /// ω[S, retained positrons], row-major n × cols.
    rows: Vec<C64>,
    cols: usize,
    positrons: &'a [usize],
    spin_p: &'a [f64],
    hel_p: &'a [f64],
    vacuum: f64,
    /// Multipliers of each elimination step, indexed by row.
    mult: [[C64; MAX_N]; MAX_N],
    pivot: [usize; MAX_N],
    used: [bool; MAX_N],
    chosen: [usize; MAX_N],
    electrons: Vec<usize>,
    spin_e: f64,
    hel_e: f64,
    out: Partial,
}

impl SubsetWalker<'_> {
    fn run(&mut self) {
        self.walk(0, 0, 1.0, 0.0, 0.0);
    }

    #[allow(clippy::needless_range_loop)]
    fn walk(&mut self, depth: usize, start: usize, det2: f64, sp: f64, hp: f64) {
        let n = self.n;
        let zero = C64::new(0.0, 0.0);
        for c in start..=self.cols - (n - depth) {
            let mut x = [zero; MAX_N];
            for i in 0..n {
                x[i] = self.rows[i * self.cols + c];
            }
            for k in 0..depth {
                let p = x[self.pivot[k]];
                if p != zero {
                    for i in 0..n {
                        x[i] -= self.mult[k][i] * p;
                    }
                }
            }
            let mut r = usize::MAX;
            let mut best = 0.0;
            for i in 0..n {
                if !self.used[i] && x[i].norm_sqr() > best {
                    best = x[i].norm_sqr();
                    r = i;
                }
            }
            if r == usize::MAX {
                // column dependent on the chosen ones: every completion vanishes
                continue;
            }
            let d2 = det2 * best;
            let q = self.positrons[c];
            let (sp, hp) = (sp + self.spin_p[q], hp + self.hel_p[q]);
            self.chosen[depth] = c;
            if depth + 1 == n {
                let prob = self.vacuum * d2;
                let o = &mut self.out;
                o.probability += prob;
                o.weighted[0] += prob * self.spin_e;
                o.weighted[1] += prob * sp;
                o.weighted[2] += prob * self.hel_e;
                o.weighted[3] += prob * hp;
                if prob > o.top_floor() {
                    let t = self.chosen[..n].iter().map(|&j| self.positrons[j]).collect();
                    push_top(&mut o.top, (prob, self.electrons.clone(), t));
                }
            } else {
                let inv = x[r].inv();
                for i in 0..n {
                    self.mult[depth][i] = if self.used[i] || i == r { zero } else { x[i] * inv };
                }
                self.pivot[depth] = r;
                self.used[r] = true;
                self.walk(depth + 1, c + 1, d2, sp, hp);
                self.used[r] = false;
            }
        }
    }
}

pub fn sector_probabilities(
    omega: &PairAmplitudeMatrix,
    c_v: &VacuumAmplitude,
    basis: &ModeBasis,
    numerics: &NumericsParams,
) -> Result<SectorReport> {
    sector_probabilities_with_budget(omega, c_v, basis, numerics, ENUMERATION_BUDGET)
}

/// Sums |C_v·det ω\[S,T\]|² over equal-size subsets S, T of the retained
/// electron and positron labels, for N up to `numerics.n_sector_max`.
#[allow(clippy::needless_range_loop)]
pub fn sector_probabilities_with_budget(
    omega: &PairAmplitudeMatrix,
    c_v: &VacuumAmplitude,
    basis: &ModeBasis,
    numerics: &NumericsParams,
    budget: u128,
) -> Result<SectorReport> {
    let w = &omega.omega;
    let (rows, cols) = w.shape();
    if rows != basis.half_len() || cols != basis.half_len() {
        return Err(Error::DimensionMismatch { expected: basis.half_len(), found: rows.max(cols) });
    }
    let threshold = numerics.prune_threshold;
    let vacuum = c_v.probability();

    let mut retained_pairs = Vec::new();
    for m in 0..rows {
        for n in 0..cols {
            let p = w[(m, n)].norm_sqr();
            if p >= threshold {
                retained_pairs.push(SinglePair { electron: m, positron: n, omega: w[(m, n)], probability: vacuum * p });
            }
        }
    }
    retained_pairs.sort_by(|a, b| {
        b.probability
            .partial_cmp(&a.probability)
            .unwrap()
            .then((a.electron, a.positron).cmp(&(b.electron, b.positron)))
    });
    let mut electrons: Vec<usize> = retained_pairs.iter().map(|p| p.electron).collect();
    let mut positrons: Vec<usize> = retained_pairs.iter().map(|p| p.positron).collect();
    electrons.sort_unstable();
    electrons.dedup();
    positrons.sort_unstable();
    positrons.dedup();

    let n_max = numerics.n_sector_max;
    if n_max > MAX_N {
        return Err(Error::InvalidInput(format!("n_sector_max {n_max} exceeds {MAX_N}")));
    }
    let needed: u128 = (1..=n_max).map(|k| binomial(electrons.len(), k) * binomial(positrons.len(), k)).sum();
    if needed > budget {
        return Err(Error::EnumerationBudget { needed, budget });
    }

    let spin_e: Vec<f64> = (0..rows).map(|m| basis.electron(m).particle_spin_z()).collect();
    let hel_e: Vec<f64> = (0..rows).map(|m| basis.electron(m).particle_helicity()).collect();
    let spin_p: Vec<f64> = (0..cols).map(|n| basis.positron(n).particle_spin_z()).collect();
    let hel_p: Vec<f64> = (0..cols).map(|n| basis.positron(n).particle_helicity()).collect();

    let full = full_spectrum_probabilities(w, vacuum, n_max);

    let mut sectors = Vec::with_capacity(n_max + 1);
    sectors.push(Sector {
        n: 0,
        probability: vacuum,
        full_probability: vacuum,
        pruning_flag: false,
        weighted: [0.0; 4],
        observables: None,
        top_states: Vec::new(),
    });
    let mut states_enumerated = 0u64;
    for n in 1..=n_max {
        let electron_sets = combinations(&electrons, n);
        let partials: Vec<Partial> = electron_sets
            .par_iter()
            .map(|s| {
                let rows = s.iter().flat_map(|&m| positrons.iter().map(move |&q| w[(m, q)])).collect();
                let mut walker = SubsetWalker {
                    n,
                    rows,
                    cols: positrons.len(),
                    positrons: &positrons,
                    spin_p: &spin_p,
                    hel_p: &hel_p,
                    vacuum,
                    mult: [[C64::new(0.0, 0.0); MAX_N]; MAX_N],
                    pivot: [0; MAX_N],
                    used: [false; MAX_N],
                    chosen: [0; MAX_N],
                    electrons: s.clone(),
                    spin_e: s.iter().map(|&m| spin_e[m]).sum(),
                    hel_e: s.iter().map(|&m| hel_e[m]).sum(),
                    out: Partial::default(),
                };
                if n <= positrons.len() {
                    walker.run();
                }
                walker.out
            })
            .collect();
        // fixed-order reduction keeps results bit-reproducible
        let mut total = Partial::default();
        for p in partials {
            total.probability += p.probability;
            for k in 0..4 {
                total.weighted[k] += p.weighted[k];
            }
            for entry in p.top {
                push_top(&mut total.top, entry);
            }
        }
        states_enumerated += (binomial(electrons.len(), n) * binomial(positrons.len(), n)) as u64;
        let full_probability = full[n];
        let deficit = full_probability - total.probability;
        sectors.push(Sector {
            n,
            probability: total.probability,
            full_probability,
            pruning_flag: deficit > SECTOR_DEFICIT_FLAG * full_probability.max(f64::MIN_POSITIVE),
            weighted: total.weighted,
            observables: None,
            top_states: total
                .top
                .into_iter()
                .map(|(probability, electrons, positrons)| StateProbability { electrons, positrons, probability })
                .collect(),
        });
    }
    let discarded_mass = (1.0 - sectors.iter().map(|s| s.probability).sum::<f64>()).max(0.0);
    Ok(SectorReport {
        sectors,
        retained_pairs,
        retained_electrons: electrons,
        retained_positrons: positrons,
        discarded_mass,
        states_enumerated,
    })
}

/// c_N = |C_v|²·e_N(σ²) with σ² the eigenvalues of ω†ω, by Cauchy–Binet.
fn full_spectrum_probabilities(omega: &DMatrix<C64>, vacuum: f64, n_max: usize) -> Vec<f64> {
    let gram = omega.adjoint() * omega;
    let eig = SymmetricEigen::new(gram);
    let values: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    elementary_symmetric(&values, n_max).into_iter().map(|e| vacuum * e).collect()
}

/// Fills s±_N and h±_N for every sector with c_N > 0; sectors with zero
/// probability keep `None`.
pub fn sector_observables(report: &mut SectorReport) {
    for s in &mut report.sectors {
        s.observables = if s.probability > 0.0 {
            let c = s.probability;
            Some(SectorObservables {
                spin_electron: s.weighted[0] / c,
                spin_positron: s.weighted[1] / c,
                helicity_electron: s.weighted[2] / c,
                helicity_positron: s.weighted[3] / c,
            })
        } else {
            None
        };
    }
}
