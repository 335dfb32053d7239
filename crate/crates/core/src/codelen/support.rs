//! Support and sign codelengths.

use statrs::function::gamma::ln_gamma;

/// `log2 C(p, gamma)` through log-Gamma.
pub fn log2_binomial(p: usize, gamma: usize) -> f64 {
    assert!(gamma <= p, "support size {gamma} exceeds {p} atoms");
    if gamma == 0 || gamma == p {
        return 0.0;
    }
    let (n, k) = (p as f64, gamma as f64);
    (ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)) / std::f64::consts::LN_2
}

/// Enumerative code: `log2 p` bits for the support size, then `log2 C(p, gamma)`
/// for the arrangement.
pub fn enumerative_bits(gamma: usize, p: usize) -> f64 {
    (p as f64).log2() + log2_binomial(p, gamma)
}

pub fn support_codelength_enumerative(support: &[bool]) -> f64 {
    let gamma = support.iter().filter(|&&z| z).count();
    enumerative_bits(gamma, support.len())
}

/// One bit per non-zero coefficient.
pub fn sign_codelength(support: &[bool]) -> f64 {
    support.iter().filter(|&&z| z).count() as f64
}

/// Enumerative codelengths for every support size of a `p`-atom dictionary.
#[derive(Debug, Clone)]
pub struct EnumerativeTable {
    bits: Vec<f64>,
}

impl EnumerativeTable {
    pub fn new(p: usize) -> Self {
        Self {
            bits: (0..=p).map(|g| enumerative_bits(g, p)).collect(),
        }
    }

    #[inline]
    pub fn bits(&self, gamma: usize) -> f64 {
        self.bits[gamma]
    }
}
