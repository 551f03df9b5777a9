//! Free Dirac eigenmodes on the momentum lattice p = n·k·e_z + k₀.
//!
//! Dirac representation: β = diag(1, 1, −1, −1), α_i = [[0, σ_i], [σ_i, 0]].
//! Spinors are the standard analytic u/v-type solutions built on spin-z
//! two-spinors, so that the first nonzero upper (positive energy) or lower
//! (negative energy) component is real and positive.

use std::io::Write;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::physconfig::{FieldParams, NumericsParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    fn two_spinor(self) -> [C64; 2] {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        match self {
            Spin::Up => [one, zero],
            Spin::Down => [zero, one],
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeLabel {
    pub n: i32,
    pub band: Band,
    pub spin: Spin,
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self.spin {
            Spin::Up => "up",
            Spin::Down => "down",
        };
        write!(f, "n={:+}:{}", self.n, s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreeMode {
    pub label: ModeLabel,
    pub momentum: [f64; 3],
    /// Signed energy ±√(1 + |p|²).
    pub energy: f64,
    pub spinor: Vector4<C64>,
    /// ⟨½Σ_z⟩ of the spinor.
    pub spin_z: f64,
    /// ⟨½Σ·p̂⟩ of the spinor, zero at p = 0.
    pub helicity: f64,
}

/// Ordered mode table: n ascending, then band plus before minus, then spin
/// up before down.
#[derive(Clone, Debug)]
pub struct ModeBasis {
    n_cut: usize,
    k: f64,
    k0: [f64; 3],
    modes: Vec<FreeMode>,
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Pauli matrices σ_x, σ_y, σ_z as 2×2 row-major arrays.
fn pauli() -> [[[C64; 2]; 2]; 3] {
    let z = c(0.0);
    let one = c(1.0);
    let i = C64::new(0.0, 1.0);
    [[[z, one], [one, z]], [[z, -i], [i, z]], [[one, z], [z, -one]]]
}

/// Dirac α matrices in the Dirac representation.
pub fn dirac_alpha() -> [Matrix4<C64>; 3] {
    pauli().map(|s| {
        let mut m = Matrix4::zeros();
        for r in 0..2 {
            for col in 0..2 {
                m[(r, col + 2)] = s[r][col];
                m[(r + 2, col)] = s[r][col];
            }
        }
        m
    })
}

pub fn dirac_beta() -> Matrix4<C64> {
    Matrix4::from_diagonal(&Vector4::new(c(1.0), c(1.0), c(-1.0), c(-1.0)))
}

/// Spin operators Σ_i = diag(σ_i, σ_i).
pub fn dirac_sigma() -> [Matrix4<C64>; 3] {
    pauli().map(|s| {
        let mut m = Matrix4::zeros();
        for r in 0..2 {
            for col in 0..2 {
                m[(r, col)] = s[r][col];
                m[(r + 2, col + 2)] = s[r][col];
            }
        }
        m
    })
}

/// Free Hamiltonian α·p + β for a particle of unit mass.
pub fn free_hamiltonian(p: [f64; 3]) -> Matrix4<C64> {
    let a = dirac_alpha();
    dirac_beta() + a[0] * c(p[0]) + a[1] * c(p[1]) + a[2] * c(p[2])
}

fn sigma_dot(p: [f64; 3], v: [C64; 2]) -> [C64; 2] {
    let s = pauli();
    let mut out = [c(0.0); 2];
    for (axis, sm) in s.iter().enumerate() {
        for r in 0..2 {
            out[r] += sm[r][0] * v[0] * p[axis] + sm[r][1] * v[1] * p[axis];
        }
    }
    out
}

fn spinor_for(p: [f64; 3], band: Band, spin: Spin) -> (f64, Vector4<C64>) {
    let p2: f64 = p.iter().map(|x| x * x).sum();
    let e = (1.0 + p2).sqrt();
    let norm = ((e + 1.0) / (2.0 * e)).sqrt();
    let chi = spin.two_spinor();
    let small = sigma_dot(p, chi).map(|x| x / (e + 1.0));
    match band {
        Band::Plus => (
            e,
            Vector4::new(chi[0], chi[1], small[0], small[1]) * c(norm),
        ),
        Band::Minus => (
            -e,
            Vector4::new(-small[0], -small[1], chi[0], chi[1]) * c(norm),
        ),
    }
}

fn expectation(op: &Matrix4<C64>, v: &Vector4<C64>) -> f64 {
    (v.adjoint() * op * v)[(0, 0)].re / v.norm_squared()
}

impl FreeMode {
    fn new(label: ModeLabel, momentum: [f64; 3]) -> Self {
        let (energy, spinor) = spinor_for(momentum, label.band, label.spin);
        let sigma = dirac_sigma();
        let spin = sigma.map(|op| expectation(&op, &spinor));
        let pnorm = momentum.iter().map(|x| x * x).sum::<f64>().sqrt();
        let spin_z = 0.5 * spin[2];
        let helicity = if pnorm == 0.0 {
            0.0
        } else {
            0.5 * (0..3).map(|i| momentum[i] * spin[i]).sum::<f64>() / pnorm
        };
        Self { label, momentum, energy, spinor, spin_z, helicity }
    }

    /// Spin of the physical particle this mode describes. A negative-energy
    /// mode stands for a positron with reversed spin and momentum.
    pub fn particle_spin_z(&self) -> f64 {
        match self.label.band {
            Band::Plus => self.spin_z,
            Band::Minus => -self.spin_z,
        }
    }

    /// Helicity of the physical particle. Reversing both spin and momentum
    /// leaves it unchanged for positrons.
    pub fn particle_helicity(&self) -> f64 {
        self.helicity
    }
}

impl ModeBasis {
    pub fn build(numerics: &NumericsParams, field: &FieldParams) -> Self {
        let n_cut = numerics.n_cut;
        let k = field.wavenumber();
        let k0 = numerics.k0_offset;
        let mut modes = Vec::with_capacity(numerics.basis_len());
        for n in -(n_cut as i32)..=(n_cut as i32) {
            let p = [k0[0], k0[1], k0[2] + n as f64 * k];
            for band in [Band::Plus, Band::Minus] {
                for spin in [Spin::Up, Spin::Down] {
                    modes.push(FreeMode::new(ModeLabel { n, band, spin }, p));
                }
            }
        }
        Self { n_cut, k, k0, modes }
    }

    pub fn n_cut(&self) -> usize {
        self.n_cut
    }

    pub fn wavenumber(&self) -> f64 {
        self.k
    }

    pub fn k0(&self) -> [f64; 3] {
        self.k0
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Number of electron (equivalently positron) labels, 2·(2·n_cut + 1).
    pub fn half_len(&self) -> usize {
        self.modes.len() / 2
    }

    pub fn modes(&self) -> &[FreeMode] {
        &self.modes
    }

    pub fn mode(&self, index: usize) -> &FreeMode {
        &self.modes[index]
    }

    /// Flattened index of a label, if it lies inside the truncation.
    pub fn index_of(&self, label: ModeLabel) -> Option<usize> {
        let shifted = label.n + self.n_cut as i32;
        if shifted < 0 || shifted > 2 * self.n_cut as i32 {
            return None;
        }
        let band = match label.band {
            Band::Plus => 0,
            Band::Minus => 2,
        };
        let spin = match label.spin {
            Spin::Up => 0,
            Spin::Down => 1,
        };
        Some(4 * shifted as usize + band + spin)
    }

    /// Basis index of electron label `e` (e-th positive-energy mode).
    pub fn electron_index(&self, e: usize) -> usize {
        4 * (e / 2) + e % 2
    }

    /// Basis index of positron label `p` (p-th negative-energy mode).
    pub fn positron_index(&self, p: usize) -> usize {
        4 * (p / 2) + 2 + p % 2
    }

    pub fn electron(&self, e: usize) -> &FreeMode {
        &self.modes[self.electron_index(e)]
    }

    pub fn positron(&self, p: usize) -> &FreeMode {
        &self.modes[self.positron_index(p)]
    }

    /// Basis indices of all modes in `band`, in basis order.
    pub fn band_indices(&self, band: Band) -> Vec<usize> {
        (0..self.half_len())
            .map(|i| match band {
                Band::Plus => self.electron_index(i),
                Band::Minus => self.positron_index(i),
            })
            .collect()
    }

    /// The four spinors at momentum index `n` as matrix columns, in basis order.
    pub fn spinor_block(&self, n: i32) -> Matrix4<C64> {
        let base = 4 * (n + self.n_cut as i32) as usize;
        Matrix4::from_columns(&[
            self.modes[base].spinor,
            self.modes[base + 1].spinor,
            self.modes[base + 2].spinor,
            self.modes[base + 3].spinor,
        ])
    }

    /// CSV dump: index, n, band, spin, energy, spin_z, helicity.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,n,band,spin,energy,spin_z,helicity")?;
        for (i, m) in self.modes.iter().enumerate() {
            let band = match m.label.band {
                Band::Plus => "plus",
                Band::Minus => "minus",
            };
            let spin = match m.label.spin {
                Spin::Up => "up",
                Spin::Down => "down",
            };
            writeln!(w, "{i},{},{band},{spin},{},{},{}", m.label.n, m.energy, m.spin_z, m.helicity)?;
        }
        Ok(())
    }
}

pub fn build_basis(numerics: &NumericsParams, field: &FieldParams) -> ModeBasis {
    ModeBasis::build(numerics, field)
}

/// e^{−i·energy·duration}.
pub fn free_phase(mode: &FreeMode, duration: f64) -> C64 {
    C64::from_polar(1.0, -mode.energy * duration)
}
