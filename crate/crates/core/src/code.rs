//! Sparse codes in (support, sign, shifted magnitude) form.

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};

/// A coefficient vector `a_k = z_k * s_k * (v_k + delta_a)` split into its
/// support indicators `z`, signs `s` and shifted magnitudes `v`.
///
/// Magnitudes are held as integer levels of `delta_a`, so they are always
/// exact multiples of the coefficient step.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    delta_a: f64,
    support: Vec<bool>,
    signs: Vec<i8>,
    levels: Vec<u32>,
}

impl SparseCode {
    pub fn empty(atom_count: usize, delta_a: f64) -> Self {
        Self {
            delta_a,
            support: vec![false; atom_count],
            signs: vec![0; atom_count],
            levels: vec![0; atom_count],
        }
    }

    /// Assembles a code from its three parts, checking the invariants that
    /// tie them together.
    pub fn from_parts(
        support: Vec<bool>,
        signs: Vec<i8>,
        magnitudes: &[f64],
        delta_a: f64,
    ) -> Result<Self> {
        let p = support.len();
        if signs.len() != p || magnitudes.len() != p {
            return Err(Error::Dimension(
                "support, signs and magnitudes differ in length".into(),
            ));
        }
        let mut levels = vec![0u32; p];
        for k in 0..p {
            if support[k] != (signs[k] != 0) || signs[k].abs() > 1 {
                return Err(Error::Contract(format!(
                    "sign {} inconsistent with support at atom {k}",
                    signs[k]
                )));
            }
            let mag = magnitudes[k];
            if !support[k] {
                if mag != 0.0 {
                    return Err(Error::Contract(format!(
                        "magnitude outside the support at atom {k}"
                    )));
                }
                continue;
            }
            let q = mag / delta_a;
            if !(mag >= 0.0) || (q - q.round()).abs() > 1e-9 * q.max(1.0) {
                return Err(Error::Contract(format!(
                    "magnitude {mag} at atom {k} is not a non-negative multiple of {delta_a}"
                )));
            }
            levels[k] = q.round() as u32;
        }
        Ok(Self {
            delta_a,
            support,
            signs,
            levels,
        })
    }

    /// Code for an integer coefficient vector in units of `delta_a`.
    pub fn from_steps(steps: &[i64], delta_a: f64) -> Self {
        let mut code = Self::empty(steps.len(), delta_a);
        for (k, &q) in steps.iter().enumerate() {
            if q != 0 {
                code.set_step(k, q);
            }
        }
        code
    }

    pub(crate) fn set_step(&mut self, k: usize, step: i64) {
        debug_assert!(step != 0);
        self.support[k] = true;
        self.signs[k] = step.signum() as i8;
        self.levels[k] = (step.unsigned_abs() - 1) as u32;
    }

    pub fn atom_count(&self) -> usize {
        self.support.len()
    }

    pub fn delta_a(&self) -> f64 {
        self.delta_a
    }

    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Shifted magnitude `v_k` in coefficient units.
    pub fn magnitude(&self, k: usize) -> f64 {
        f64::from(self.levels[k]) * self.delta_a
    }

    /// Shifted magnitude of atom `k` in units of `delta_a`.
    pub fn level(&self, k: usize) -> u32 {
        self.levels[k]
    }

    /// Support size.
    pub fn gamma(&self) -> usize {
        self.support.iter().filter(|&&z| z).count()
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.support
            .iter()
            .enumerate()
            .filter_map(|(k, &z)| z.then_some(k))
    }

    /// Coefficient `a_k` in units of `delta_a`.
    pub fn step(&self, k: usize) -> i64 {
        if self.support[k] {
            i64::from(self.signs[k]) * (i64::from(self.levels[k]) + 1)
        } else {
            0
        }
    }

    pub fn coefficient(&self, k: usize) -> f64 {
        self.step(k) as f64 * self.delta_a
    }

    pub fn coefficients(&self) -> Vec<f64> {
        (0..self.atom_count())
            .map(|k| self.coefficient(k))
            .collect()
    }

    /// Drops atom `k`; only valid when the atom is unused.
    pub(crate) fn without_atom(&self, k: usize) -> Self {
        let mut c = self.clone();
        c.support.remove(k);
        c.signs.remove(k);
        c.levels.remove(k);
        c
    }
}

/// `D a` for the coefficient vector carried by `code`.
pub fn reconstruct(code: &SparseCode, dict: &Dictionary) -> Result<Vec<f64>> {
    if code.atom_count() != dict.atom_count() {
        return Err(Error::Dimension(format!(
            "code has {} atoms, dictionary has {}",
            code.atom_count(),
            dict.atom_count()
        )));
    }
    let mut out = vec![0.0; dict.dim()];
    for k in code.active() {
        let a = code.coefficient(k);
        out.iter_mut()
            .zip(dict.atom(k))
            .for_each(|(o, d)| *o += a * d);
    }
    Ok(out)
}
