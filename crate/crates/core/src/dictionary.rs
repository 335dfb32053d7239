//! Dictionaries of unit-ball-bounded atoms.

use crate::error::{Error, Result};

/// `m x p` matrix of atoms stored column-major, plus the number of training
/// samples it was fitted to (which fixes its quantization step `n^{-1/2}`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    dim: usize,
    atom_count: usize,
    atoms: Vec<f64>,
    sample_count: usize,
}

/// Precision of stored dictionary elements for `n` training samples.
pub fn element_step(sample_count: usize) -> f64 {
    1.0 / (sample_count.max(1) as f64).sqrt()
}

impl Dictionary {
    /// Builds a dictionary and projects it onto the feasible set.
    pub fn new(
        dim: usize,
        atom_count: usize,
        atoms: Vec<f64>,
        sample_count: usize,
    ) -> Result<Self> {
        if dim == 0 || atom_count == 0 {
            return Err(Error::Dimension(
                "dictionary needs at least one atom of positive dimension".into(),
            ));
        }
        if atoms.len() != dim * atom_count {
            return Err(Error::Dimension(format!(
                "{dim}x{atom_count} dictionary needs {} elements, got {}",
                dim * atom_count,
                atoms.len()
            )));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite dictionary element".into()));
        }
        let mut d = Self {
            dim,
            atom_count,
            atoms,
            sample_count,
        };
        d.project();
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn set_sample_count(&mut self, n: usize) {
        self.sample_count = n;
    }

    pub fn elements(&self) -> &[f64] {
        &self.atoms
    }

    #[inline]
    pub fn atom(&self, k: usize) -> &[f64] {
        &self.atoms[k * self.dim..(k + 1) * self.dim]
    }

    pub fn atom_norm(&self, k: usize) -> f64 {
        self.atom(k).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rescales each column into the unit ball, then clips elements to [-1, 1].
    pub fn project(&mut self) {
        project_columns(&mut self.atoms, self.dim);
    }

    /// `D^T x`.
    pub fn correlate(&self, x: &[f64]) -> Vec<f64> {
        self.atoms
            .chunks_exact(self.dim)
            .map(|a| a.iter().zip(x).map(|(u, v)| u * v).sum())
            .collect()
    }

    /// `D^T D`, row-major `p x p`.
    pub fn gram(&self) -> Vec<f64> {
        let p = self.atom_count;
        let mut g = vec![0.0; p * p];
        for i in 0..p {
            for j in i..p {
                let v: f64 = self
                    .atom(i)
                    .iter()
                    .zip(self.atom(j))
                    .map(|(a, b)| a * b)
                    .sum();
                g[i * p + j] = v;
                g[j * p + i] = v;
            }
        }
        g
    }

    pub fn without_atom(&self, k: usize) -> Result<Self> {
        if self.atom_count <= 1 {
            return Err(Error::Domain("cannot remove the last atom".into()));
        }
        let mut atoms = self.atoms.clone();
        atoms.drain(k * self.dim..(k + 1) * self.dim);
        Ok(Self {
            dim: self.dim,
            atom_count: self.atom_count - 1,
            atoms,
            sample_count: self.sample_count,
        })
    }

    /// Integer levels of every element on the `n^{-1/2}` grid, rounded to
    /// nearest and nudged toward zero where needed to keep column norms <= 1.
    pub fn quantized_levels(&self) -> Vec<i32> {
        let step = element_step(self.sample_count);
        let mut levels: Vec<i32> = self
            .atoms
            .iter()
            .map(|&v| (v / step).round() as i32)
            .collect();
        for col in levels.chunks_exact_mut(self.dim) {
            loop {
                let norm2: f64 = col.iter().map(|&k| (f64::from(k) * step).powi(2)).sum();
                if norm2 <= 1.0 {
                    break;
                }
                let (idx, _) = col
                    .iter()
                    .enumerate()
                    .max_by_key(|(i, k)| (k.unsigned_abs(), std::cmp::Reverse(*i)))
                    .expect("non-empty column");
                col[idx] -= col[idx].signum();
            }
        }
        levels
    }

    pub fn from_levels(
        dim: usize,
        atom_count: usize,
        levels: &[i32],
        sample_count: usize,
    ) -> Result<Self> {
        let step = element_step(sample_count);
        let atoms = levels.iter().map(|&k| f64::from(k) * step).collect();
        Self::new(dim, atom_count, atoms, sample_count)
    }

    /// Copy with every element snapped to the stored precision.
    pub fn quantized(&self) -> Self {
        Self::from_levels(
            self.dim,
            self.atom_count,
            &self.quantized_levels(),
            self.sample_count,
        )
        .expect("quantized dictionary stays feasible")
    }
}

pub(crate) fn project_columns(atoms: &mut [f64], dim: usize) {
    for col in atoms.chunks_exact_mut(dim) {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 {
            col.iter_mut().for_each(|v| *v /= norm);
        }
        col.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    }
}
