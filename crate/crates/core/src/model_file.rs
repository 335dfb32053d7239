//! Binary model files: dictionary at storage precision, codelength
//! hyperparameters and optional Markov support tables.
//!
//! Layout (little endian):
//!
//! ```text
//! magic    [u8; 8]  "MDLSDICT"
//! version  u32
//! w        u32      patch side, m = w * w
//! p        u32
//! n        u64      training sample count, element step n^-1/2
//! hyper    7 x f64  delta_a, delta_e, sigma2, kappa_nu, beta_nu, kappa_eps, beta_eps
//! levels   m*p x i32, atom by atom, column-major within the patch
//! markov   u8 flag, then p x 8 x {absent, present} u64 counts when set
//! ```

use std::path::Path;

use crate::codelen::markov::CONTEXTS;
use crate::codelen::{CodelengthModel, Hyperparams, MarkovSupportModel};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"MDLSDICT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    patch_side: usize,
    hyper: Hyperparams,
    dictionary: Dictionary,
    markov: Option<MarkovSupportModel>,
}

impl ModelFile {
    /// Snaps `dictionary` to its storage precision.
    pub fn new(
        patch_side: usize,
        hyper: Hyperparams,
        dictionary: &Dictionary,
        markov: Option<MarkovSupportModel>,
    ) -> Result<Self> {
        if patch_side * patch_side != dictionary.dim() {
            return Err(Error::Dimension(format!(
                "atoms have {} elements, patch side {patch_side} needs {}",
                dictionary.dim(),
                patch_side * patch_side
            )));
        }
        if markov
            .as_ref()
            .is_some_and(|m| m.atom_count() != dictionary.atom_count())
        {
            return Err(Error::Dimension(
                "Markov table does not match the dictionary".into(),
            ));
        }
        CodelengthModel::new(hyper)?;
        Ok(Self {
            patch_side,
            hyper,
            dictionary: dictionary.quantized(),
            markov,
        })
    }

    pub fn patch_side(&self) -> usize {
        self.patch_side
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn markov(&self) -> Option<&MarkovSupportModel> {
        self.markov.as_ref()
    }

    pub fn codelength_model(&self) -> Result<CodelengthModel> {
        CodelengthModel::new(self.hyper)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let d = &self.dictionary;
        let mut out = Vec::with_capacity(64 + 4 * d.elements().len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.patch_side as u32).to_le_bytes());
        out.extend_from_slice(&(d.atom_count() as u32).to_le_bytes());
        out.extend_from_slice(&(d.sample_count() as u64).to_le_bytes());
        let h = &self.hyper;
        for v in [
            h.delta_a,
            h.delta_e,
            h.sigma2,
            h.kappa_nu,
            h.beta_nu,
            h.kappa_eps,
            h.beta_eps,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for l in d.quantized_levels() {
            out.extend_from_slice(&l.to_le_bytes());
        }
        match &self.markov {
            None => out.push(0),
            Some(mk) => {
                out.push(1);
                for row in mk.counts() {
                    for pair in row {
                        for c in pair {
                            out.extend_from_slice(&c.to_le_bytes());
                        }
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "model file version {version}, expected {VERSION}"
            )));
        }
        let w = r.u32()? as usize;
        let p = r.u32()? as usize;
        let n = usize::try_from(r.u64()?)
            .map_err(|_| Error::Format("sample count too large".into()))?;
        if w == 0 || p == 0 {
            return Err(Error::Format("empty dictionary".into()));
        }
        let hyper = Hyperparams {
            delta_a: r.f64()?,
            delta_e: r.f64()?,
            sigma2: r.f64()?,
            kappa_nu: r.f64()?,
            beta_nu: r.f64()?,
            kappa_eps: r.f64()?,
            beta_eps: r.f64()?,
        };
        let m = w
            .checked_mul(w)
            .ok_or_else(|| Error::Format("patch side too large".into()))?;
        let count = m
            .checked_mul(p)
            .ok_or_else(|| Error::Format("dictionary too large".into()))?;
        if count.saturating_mul(4) > bytes.len() {
            return Err(Error::Format("truncated dictionary".into()));
        }
        let levels = (0..count).map(|_| r.i32()).collect::<Result<Vec<_>>>()?;
        let dictionary = Dictionary::from_levels(m, p, &levels, n)?;
        if dictionary.quantized_levels() != levels {
            return Err(Error::Format(
                "dictionary levels outside the unit ball".into(),
            ));
        }
        let markov = match r.u8()? {
            0 => None,
            1 => {
                let mut counts = Vec::with_capacity(p);
                for _ in 0..p {
                    let mut row = [[0u64; 2]; CONTEXTS];
                    for pair in row.iter_mut() {
                        pair[0] = r.u64()?;
                        pair[1] = r.u64()?;
                    }
                    counts.push(row);
                }
                Some(MarkovSupportModel::from_counts(counts))
            }
            f => return Err(Error::Format(format!("bad Markov flag {f}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after model".into()));
        }
        CodelengthModel::new(hyper)
            .map_err(|e| Error::Format(format!("bad hyperparameters: {e}")))?;
        Ok(Self {
            patch_side: w,
            hyper,
            dictionary,
            markov,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated model file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn i32(&mut self) -> Result<i32> {
        self.array().map(i32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }
}
