//! Single-particle Hamiltonian in the mode basis, unitary propagation and
//! extraction of the G-blocks.
//!
//! The interaction −qα·A with q = −e couples momentum index n only to n ± 1:
//! the e^{+ikz} harmonic raises n, its conjugate lowers it. Propagation uses
//! the exponential midpoint rule U_step = exp(−i H(t_mid) dt), so every step
//! is unitary up to roundoff.

use std::io::{Read, Write};

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::fieldmodel::{envelope, potential_at, FourierPotential};
use crate::modebasis::{dirac_alpha, Band, ModeBasis};
use crate::physconfig::{FieldParams, RunConfig, WindowParams};

/// Default bound on ‖U†U − I‖_max.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

/// Additional unitarity slack per composed cycle.
pub const PER_CYCLE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianMatrix {
    pub matrix: DMatrix<C64>,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// max |H − H†|.
    pub fn hermiticity_residual(&self) -> f64 {
        let h = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_diagonal(&self) -> bool {
        let h = &self.matrix;
        (0..h.nrows()).all(|i| (0..h.ncols()).all(|j| i == j || h[(i, j)] == C64::new(0.0, 0.0)))
    }
}

/// Precomputed spinor-space matrices S_{n+1}† α_i S_n for the transverse axes.
#[derive(Clone, Debug)]
pub struct HamiltonianAssembler {
    n_cut: usize,
    energies: Vec<f64>,
    raise: Vec<[Matrix4<C64>; 3]>,
}

impl HamiltonianAssembler {
    pub fn new(basis: &ModeBasis) -> Self {
        let n_cut = basis.n_cut() as i32;
        let alpha = dirac_alpha();
        let raise = (-n_cut..n_cut)
            .map(|n| {
                let lower = basis.spinor_block(n);
                let upper_adj = basis.spinor_block(n + 1).adjoint();
                alpha.map(|a| upper_adj * a * lower)
            })
            .collect();
        Self {
            n_cut: basis.n_cut(),
            energies: basis.modes().iter().map(|m| m.energy).collect(),
            raise,
        }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn assemble(&self, pot: &FourierPotential) -> HamiltonianMatrix {
        let d = self.dim();
        let mut h = DMatrix::<C64>::zeros(d, d);
        for (i, e) in self.energies.iter().enumerate() {
            h[(i, i)] = C64::new(*e, 0.0);
        }
        if pot.is_zero() {
            return HamiltonianMatrix { matrix: h };
        }
        let b = pot.raising_harmonic();
        for (block, m) in self.raise.iter().enumerate() {
            let coupling = m[0] * b[0] + m[1] * b[1] + m[2] * b[2];
            let (lo, hi) = (4 * block, 4 * (block + 1));
            for r in 0..4 {
                for c in 0..4 {
                    h[(hi + r, lo + c)] = coupling[(r, c)];
                    h[(lo + c, hi + r)] = coupling[(r, c)].conj();
                }
            }
        }
        debug_assert_eq!(self.raise.len(), 2 * self.n_cut);
        HamiltonianMatrix { matrix: h }
    }
}

/// H = free energies + α·A in the mode basis.
pub fn assemble_hamiltonian(basis: &ModeBasis, pot: &FourierPotential) -> HamiltonianMatrix {
    HamiltonianAssembler::new(basis).assemble(pot)
}

/// exp(−i·H·dt) for Hermitian H by scaling and squaring of a Taylor
/// polynomial, evaluated in Paterson–Stockmeyer form on powers A, A², A³.
/// The constant term is added last so that U − I carries its own roundoff.
pub fn exp_minus_i_hermitian(h: &HamiltonianMatrix, dt: f64) -> DMatrix<C64> {
    let d = h.dim();
    if h.is_diagonal() {
        let angles: Vec<f64> = (0..d).map(|i| -h.matrix[(i, i)].re * dt).collect();
        return diagonal_phases(&angles);
    }
    let theta = one_norm(&h.matrix) * dt.abs();
    let squarings = if theta > 0.5 { (theta / 0.5).log2().ceil() as u32 } else { 0 };
    let theta = theta / f64::from(1u32 << squarings);
    // smallest degree 3q whose remainder θ^{3q+1}/(3q+1)! is below 1e-18
    let mut degree = 3;
    let mut remainder = theta.powi(4) / 24.0;
    while remainder > 1e-18 && degree < 30 {
        for k in degree + 2..=degree + 4 {
            remainder *= theta / k as f64;
        }
        degree += 3;
    }
    let a = h.matrix.map(|z| z * C64::new(0.0, -dt / f64::from(1u32 << squarings)));
    let a2 = linalg::mul(&a, &a);
    let a3 = linalg::mul(&a2, &a);
    let mut inv_fact = vec![1.0; degree + 1];
    for k in 1..=degree {
        inv_fact[k] = inv_fact[k - 1] / k as f64;
    }
    let block = |j: usize| {
        let c = |k: usize| C64::new(inv_fact[3 * j + k], 0.0);
        &a * c(1) + &a2 * c(2) + &a3 * c(3)
    };
    // X = Σ_{k=1}^{degree} A^k/k! = P₀ + A³(P₁ + A³(P₂ + …))
    let groups = degree / 3;
    let mut x = block(groups - 1);
    let mut tmp = DMatrix::<C64>::zeros(d, d);
    for j in (0..groups - 1).rev() {
        linalg::mul_into(&a3, &x, &mut tmp);
        x = block(j) + &tmp;
    }
    // (I + X)² = I + (2X + X²)
    for _ in 0..squarings {
        linalg::mul_into(&x, &x, &mut tmp);
        x = &x * C64::new(2.0, 0.0) + &tmp;
    }
    for i in 0..d {
        x[(i, i)] += C64::new(1.0, 0.0);
    }
    x
}

fn diagonal_phases(angles: &[f64]) -> DMatrix<C64> {
    let d = angles.len();
    DMatrix::from_fn(d, d, |i, j| if i == j { C64::from_polar(1.0, angles[i]) } else { C64::new(0.0, 0.0) })
}

fn one_norm(m: &DMatrix<C64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// ‖U†U − I‖_max.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let g = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Time stepper over a fixed grid of `steps_per_cycle` steps per laser cycle.
/// Step `i` covers [i, i+1]·dt and samples H at its midpoint.
pub struct Integrator<'a> {
    basis: &'a ModeBasis,
    field: FieldParams,
    window: WindowParams,
    steps_per_cycle: usize,
    assembler: HamiltonianAssembler,
}

impl<'a> Integrator<'a> {
    pub fn new(config: &RunConfig, basis: &'a ModeBasis) -> Self {
        Self::with_window(config, config.window, basis)
    }

    pub fn with_window(config: &RunConfig, window: WindowParams, basis: &'a ModeBasis) -> Self {
        Self {
            basis,
            field: config.field.clone(),
            window,
            steps_per_cycle: config.numerics.steps_per_cycle,
            assembler: HamiltonianAssembler::new(basis),
        }
    }

    pub fn basis(&self) -> &ModeBasis {
        self.basis
    }

    pub fn window(&self) -> &WindowParams {
        &self.window
    }

    /// Step length in natural units.
    pub fn dt(&self) -> f64 {
        self.field.period() / self.steps_per_cycle as f64
    }

    pub fn steps_per_cycle(&self) -> usize {
        self.steps_per_cycle
    }

    pub fn total_steps(&self) -> u64 {
        self.window.total_cycles() as u64 * self.steps_per_cycle as u64
    }

    pub fn midpoint_cycles(&self, step: u64) -> f64 {
        (step as f64 + 0.5) / self.steps_per_cycle as f64
    }

    pub fn hamiltonian_at_step(&self, step: u64) -> HamiltonianMatrix {
        let pot = potential_at(self.midpoint_cycles(step), &self.field, &self.window);
        self.assembler.assemble(&pot)
    }

    /// Product of steps `start .. start + count`, later steps to the left.
    pub fn evolve(&self, start: u64, count: u64) -> DMatrix<C64> {
        self.product(start..start + count, self.dt())
    }

    /// Inverse of [`Integrator::evolve`] over the same steps, stepping
    /// backwards in time with −dt.
    pub fn evolve_reversed(&self, start: u64, count: u64) -> DMatrix<C64> {
        self.product((start..start + count).rev(), -self.dt())
    }

    // While every step so far is diagonal the product is kept as summed
    // phase angles, so field-free stretches stay unitary to rounding.
    fn product(&self, steps: impl Iterator<Item = u64>, dt: f64) -> DMatrix<C64> {
        let d = self.assembler.dim();
        let mut angles = Some(vec![0.0f64; d]);
        let mut u = DMatrix::<C64>::identity(d, d);
        let mut tmp = DMatrix::<C64>::zeros(d, d);
        for step in steps {
            let h = self.hamiltonian_at_step(step);
            if let (Some(a), true) = (angles.as_mut(), h.is_diagonal()) {
                for (i, x) in a.iter_mut().enumerate() {
                    *x -= h.matrix[(i, i)].re * dt;
                }
                continue;
            }
            if let Some(a) = angles.take() {
                u = diagonal_phases(&a);
            }
            let s = exp_minus_i_hermitian(&h, dt);
            linalg::mul_into(&s, &u, &mut tmp);
            std::mem::swap(&mut u, &mut tmp);
        }
        match angles {
            Some(a) => diagonal_phases(&a),
            None => u,
        }
    }

    fn envelope_at_step_boundary(&self, step: u64) -> f64 {
        envelope(step as f64 / self.steps_per_cycle as f64, &self.window)
    }
}

/// Propagator U(t_out, t_in) over the mode basis with run metadata.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub matrix: DMatrix<C64>,
    pub config_hash: String,
    pub steps: u64,
    pub unitarity_defect: f64,
    pub t_start_cycles: f64,
    pub t_end_cycles: f64,
    /// Window value at the start and end time.
    pub endpoint_envelope: [f64; 2],
}

impl Propagator {
    fn from_segment(integrator: &Integrator<'_>, hash: &str, start: u64, count: u64) -> Self {
        let matrix = integrator.evolve(start, count);
        let spc = integrator.steps_per_cycle as f64;
        Self {
            unitarity_defect: unitarity_defect(&matrix),
            matrix,
            config_hash: hash.to_string(),
            steps: count,
            t_start_cycles: start as f64 / spc,
            t_end_cycles: (start + count) as f64 / spc,
            endpoint_envelope: [
                integrator.envelope_at_step_boundary(start),
                integrator.envelope_at_step_boundary(start + count),
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn check_unitarity(&self, tolerance: f64, steps_per_cycle: usize) -> Result<()> {
        if self.unitarity_defect > tolerance || !self.unitarity_defect.is_finite() {
            return Err(Error::Unitarity {
                defect: self.unitarity_defect,
                tolerance,
                steps: self.steps,
                retry_steps_per_cycle: 2 * steps_per_cycle,
            });
        }
        Ok(())
    }

    /// Binary dump; see [`write_matrix`].
    pub fn write_binary<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_matrix(w, &self.matrix)
    }
}

/// Propagates every basis vector from t_in = 0 to t_out = 2ΔT + T.
pub fn propagate(config: &RunConfig, basis: &ModeBasis) -> Result<Propagator> {
    let integrator = Integrator::new(config, basis);
    let u = Propagator::from_segment(&integrator, &config.hash_hex(), 0, integrator.total_steps());
    u.check_unitarity(UNITARITY_TOLERANCE, config.numerics.steps_per_cycle)?;
    Ok(u)
}

/// Turn-on ramp, one plateau cycle and turn-off ramp, from which any
/// integer plateau length can be composed.
#[derive(Clone, Debug)]
pub struct CycleSegments {
    pub u_on: Propagator,
    pub u_cycle: Propagator,
    pub u_off: Propagator,
}

impl CycleSegments {
    pub fn compose(&self, plateau_cycles: u32) -> Result<Propagator> {
        cycle_compose(&self.u_on, &self.u_cycle, &self.u_off, plateau_cycles as i64)
    }
}

/// Segment propagators for a plateau sweep. The carrier phase is zero at
/// t = 0 and the ramp spans whole cycles, so the plateau starts at phase zero
/// and every integer plateau reuses the same three segments.
pub fn propagate_segments(config: &RunConfig, basis: &ModeBasis) -> Result<CycleSegments> {
    let window = WindowParams { ramp_cycles: config.window.ramp_cycles, plateau_cycles: 1 };
    let integrator = Integrator::with_window(config, window, basis);
    let spc = config.numerics.steps_per_cycle as u64;
    let ramp = window.ramp_cycles as u64 * spc;
    let mut seg_config = config.clone();
    seg_config.window = window;
    let hash = seg_config.hash_hex();
    let segments = CycleSegments {
        u_on: Propagator::from_segment(&integrator, &hash, 0, ramp),
        u_cycle: Propagator::from_segment(&integrator, &hash, ramp, spc),
        u_off: Propagator::from_segment(&integrator, &hash, ramp + spc, ramp),
    };
    for s in [&segments.u_on, &segments.u_cycle, &segments.u_off] {
        s.check_unitarity(UNITARITY_TOLERANCE, config.numerics.steps_per_cycle)?;
    }
    Ok(segments)
}

/// u_off · u_cycleʲ · u_on by binary exponentiation.
pub fn cycle_compose(u_on: &Propagator, u_cycle: &Propagator, u_off: &Propagator, j: i64) -> Result<Propagator> {
    if j < 0 {
        return Err(Error::InvalidInput(format!("plateau cycle count must be non-negative, got {j}")));
    }
    let d = u_on.dim();
    for m in [u_cycle, u_off] {
        if m.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
        }
    }
    let power = matrix_power(&u_cycle.matrix, j as u64);
    let matrix = linalg::mul(&linalg::mul(&u_off.matrix, &power), &u_on.matrix);
    let cycle_len = u_cycle.t_end_cycles - u_cycle.t_start_cycles;
    let t_end = u_on.t_end_cycles + j as f64 * cycle_len + (u_off.t_end_cycles - u_off.t_start_cycles);
    let result = Propagator {
        unitarity_defect: unitarity_defect(&matrix),
        matrix,
        config_hash: format!("{}+{}cycles", u_on.config_hash, j),
        steps: u_on.steps + j as u64 * u_cycle.steps + u_off.steps,
        t_start_cycles: u_on.t_start_cycles,
        t_end_cycles: t_end,
        endpoint_envelope: [u_on.endpoint_envelope[0], u_off.endpoint_envelope[1]],
    };
    let tolerance = UNITARITY_TOLERANCE + j as f64 * PER_CYCLE_TOLERANCE;
    result.check_unitarity(tolerance, u_cycle.steps as usize)?;
    Ok(result)
}

fn matrix_power(m: &DMatrix<C64>, mut exp: u64) -> DMatrix<C64> {
    let d = m.nrows();
    let mut result = DMatrix::<C64>::identity(d, d);
    let mut base = m.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result = linalg::mul(&result, &base);
        }
        exp >>= 1;
        if exp > 0 {
            base = linalg::mul(&base, &base);
        }
    }
    result
}

/// Blocks of the propagator between free in- and out-modes. Rows are out
/// modes, columns in modes, both in basis order within their band.
#[derive(Clone, Debug)]
pub struct GBlocks {
    /// G(+|−): out electron rows, in negative-energy columns.
    pub g_pm: DMatrix<C64>,
    /// G(−|−).
    pub g_mm: DMatrix<C64>,
    pub g_pp: DMatrix<C64>,
    pub g_mp: DMatrix<C64>,
}

impl GBlocks {
    /// max_n |‖G(+|−)e_n‖² + ‖G(−|−)e_n‖² − 1|.
    pub fn column_norm_defect(&self) -> f64 {
        (0..self.g_mm.ncols())
            .map(|n| {
                let s = self.g_pm.column(n).norm_squared() + self.g_mm.column(n).norm_squared();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// G(+|−) followed by G(−|−), each in the [`write_matrix`] layout.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_matrix(&mut w, &self.g_pm)?;
        write_matrix(&mut w, &self.g_mm)
    }
}

/// Selects the G-blocks. With the field off at both endpoints the in/out
/// eigenbases are the free basis itself, so this is submatrix selection.
pub fn extract_g_blocks(u: &Propagator, basis: &ModeBasis) -> Result<GBlocks> {
    if u.endpoint_envelope != [0.0, 0.0] {
        return Err(Error::FieldOnAtEndpoints(u.endpoint_envelope));
    }
    if u.dim() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), found: u.dim() });
    }
    let plus = basis.band_indices(Band::Plus);
    let minus = basis.band_indices(Band::Minus);
    let pick = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| u.matrix[(rows[i], cols[j])])
    };
    Ok(GBlocks {
        g_pm: pick(&plus, &minus),
        g_mm: pick(&minus, &minus),
        g_pp: pick(&plus, &plus),
        g_mp: pick(&minus, &plus),
    })
}

/// Writes `rows: u64`, `cols: u64` (little endian), then the entries in
/// row-major order as (re, im) little-endian f64 pairs.
pub fn write_matrix<W: Write>(mut w: W, m: &DMatrix<C64>) -> std::io::Result<()> {
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> std::io::Result<DMatrix<C64>> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut m = DMatrix::<C64>::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            let im = f64::from_le_bytes(word);
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(m)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldmodel::jones_left;
    use crate::modebasis::{free_phase, Spin};
    use crate::physconfig::{HelicityRelation, NumericsParams};
    use std::f64::consts::FRAC_PI_4;

    fn fig2_like(n_cut: usize, ramp: u32, plateau: u32, spc: usize) -> RunConfig {
        RunConfig {
            field: FieldParams::new(0.746, 4.9e17 / 1.3e18, 0.2 * FRAC_PI_4, HelicityRelation::Same),
            window: WindowParams { ramp_cycles: ramp, plateau_cycles: plateau },
            numerics: NumericsParams { steps_per_cycle: spc, ..NumericsParams::with_cutoff(n_cut) },
        }
    }

    fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_potential_gives_free_diagonal() {
        let cfg = fig2_like(2, 1, 1, 64);
        let basis = ModeBasis::build(&cfg.numerics, &cfg.field);
        let h = assemble_hamiltonian(&basis, &FourierPotential::zero());
        assert!(h.is_diagonal());
        for (i, m) in basis.modes().iter().enumerate() {
            assert_eq!(h.matrix[(i, i)], C64::new(m.energy, 0.0));
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_nearest_neighbour() {
        let cfg = fig2_like(3, 2, 2, 64);
        let basis = ModeBasis::build(&cfg.numerics, &cfg.field);
        let asm = HamiltonianAssembler::new(&basis);
        for i in 0..100 {
            let t = 6.0 * (i as f64 + 0.37) / 100.0;
            let h = asm.assemble(&potential_at(t, &cfg.field, &cfg.window));
            assert!(h.hermiticity_residual() < 1e-13);
            for r in 0..basis.len() {
                for c in 0..basis.len() {
                    let dn = (basis.mode(r).label.n - basis.mode(c).label.n).abs();
                    if dn >= 2 {
                        assert_eq!(h.matrix[(r, c)], C64::new(0.0, 0.0));
                    }
                    if dn == 0 && r != c {
                        assert_eq!(h.matrix[(r, c)], C64::new(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn circular_photon_raises_spin() {
        // α·|l⟩ ∝ α_x + iα_y only connects spin down to spin up
        let cfg = fig2_like(2, 1, 1, 64);
        let basis = ModeBasis::build(&cfg.numerics, &cfg.field);
        let l = jones_left();
        let pot = FourierPotential {
            c_plus_k: l.map(|x| x * 0.1),
            c_minus_k: [C64::new(0.0, 0.0); 3],
        };
        let h = assemble_hamiltonian(&basis, &pot);
        let mut nonzero = 0;
        for r in 0..basis.len() {
            for c in 0..basis.len() {
                let (mr, mc) = (basis.mode(r).label, basis.mode(c).label);
                if mr.n == mc.n + 1 {
                    let v = h.matrix[(r, c)];
                    if mr.spin == Spin::Up && mc.spin == Spin::Down {
                        nonzero += (v.norm() > 1e-3) as usize;
                    } else {
                        assert!(v.norm() < 1e-15, "{mr:?} <- {mc:?}: {v}");
                    }
                }
            }
        }
        assert!(nonzero > 0);
    }

    #[test]
    fn zero_field_propagator_is_free_phases() {
        let cfg = fig2_like(2, 1, 2, 32).field_free();
        let basis = ModeBasis::build(&cfg.numerics, &cfg.field);
        let u = propagate(&cfg, &basis).unwrap();
        let duration = cfg.window.total_cycles() as f64 * cfg.field.period();
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                if i == j {
                    let expected = free_phase(basis.mode(i), duration);
                    assert!((u.matrix[(i, i)] - expected).norm() < 1e-12);
                } else {
                    assert_eq!(u.matrix[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
        let g = extract_g_blocks(&u, &basis).unwrap();
        assert!(g.g_pm.iter().all(|z| *z == C64::new(0.0, 0.0)));
        for n in 0..g.g_mm.ncols() {
            assert!((g.g_mm[(n, n)] - free_phase(basis.positron(n), duration)).norm() < 1e-12);
        }
    }

    #[test]
    fn second_order_convergence() {
        let base = fig2_like(2, 1, 0, 32);
        let basis = ModeBasis::build(&base.numerics, &base.field);
        let run = |spc: usize| {
            let mut c = base.clone();
            c.numerics.steps_per_cycle = spc;
            propagate(&c, &basis).unwrap().matrix
        };
        let (u1, u2, u4, u8) = (run(32), run(64), run(128), run(256));
        // Richardson extrapolation of the two finest runs
        let reference = (&u8 * C64::new(4.0, 0.0) - &u4) / C64::new(3.0, 0.0);
        let e1 = max_abs_diff(&u1, &reference);
        let e2 = max_abs_diff(&u2, &reference);
        let e4 = max_abs_diff(&u4, &reference);
        let (r1, r2) = (e1 / e2, e2 / e4);
        assert!(r1 > 3.5 && r1 < 4.5, "ratio {r1}");
        assert!(r2 > 3.5 && r2 < 4.5, "ratio {r2}");
    }

    #[test]
    fn reversed_steps_invert_forward_steps() {
        let cfg = fig2_like(2, 1, 1, 64);
        let basis = ModeBasis::build(&cfg.numerics, &cfg.field);
        let integ = Integrator::new(&cfg, &basis);
        let fwd = integ.evolve(10, 150);
        let back = integ.evolve_reversed(10, 150);
        let id = DMatrix::<C64>::identity(basis.len(), basis.len());
        assert!(max_abs_diff(&(back * fwd), &id) < 1e-9);
    }

    #[test]
    fn composition_matches_direct_propagation() {
        let mut cfg = fig2_like(2, 1, 3, 64);
        let basis = ModeBasis::build(&cfg.numerics, &cfg.field);
        let segs = propagate_segments(&cfg, &basis).unwrap();
        for j in [0u32, 1, 3] {
            cfg.window.plateau_cycles = j;
            let direct = propagate(&cfg, &basis).unwrap();
            let composed = segs.compose(j).unwrap();
            assert!(max_abs_diff(&direct.matrix, &composed.matrix) < 1e-10, "j={j}");
            assert_eq!(direct.steps, composed.steps);
            assert_eq!(composed.endpoint_envelope, [0.0, 0.0]);
        }
        assert!(cycle_compose(&segs.u_on, &segs.u_cycle, &segs.u_off, -1).is_err());
        let j0 = cycle_compose(&segs.u_on, &segs.u_cycle, &segs.u_off, 0).unwrap();
        assert!(max_abs_diff(&j0.matrix, &(&segs.u_off.matrix * &segs.u_on.matrix)) < 1e-15);
    }

    #[test]
    fn g_blocks_column_unitarity() {
        let cfg = fig2_like(2, 1, 2, 128);
        let basis = ModeBasis::build(&cfg.numerics, &cfg.field);
        let u = propagate(&cfg, &basis).unwrap();
        assert!(u.unitarity_defect < 1e-12);
        let g = extract_g_blocks(&u, &basis).unwrap();
        assert_eq!(g.g_pm.shape(), (10, 10));
        assert!(g.column_norm_defect() < 1e-10);
        assert!(g.g_pm.iter().any(|z| z.norm() > 1e-6));
    }

    #[test]
    fn extraction_rejects_field_on_at_endpoint() {
        let cfg = fig2_like(1, 1, 1, 32);
        let basis = ModeBasis::build(&cfg.numerics, &cfg.field);
        let integ = Integrator::new(&cfg, &basis);
        let u = Propagator::from_segment(&integ, "x", 0, 40);
        assert!(matches!(extract_g_blocks(&u, &basis), Err(Error::FieldOnAtEndpoints(_))));
    }

    #[test]
    fn binary_dump_round_trips() {
        let m = DMatrix::from_fn(3, 2, |i, j| C64::new(i as f64 + 0.5, -(j as f64) * 1.25));
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(buf.len(), 16 + 3 * 2 * 16);
        assert_eq!(&buf[..8], &3u64.to_le_bytes());
        // first entry row-major: (0,0)
        assert_eq!(&buf[16..24], &0.5f64.to_le_bytes());
        let back = read_matrix(&buf[..]).unwrap();
        assert_eq!(back, m);
    }
}
