//! Seeded random smooth fields: truncated Fourier series with decaying
//! coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{ModelSpace, SpaceKind};

/// Deterministic generator for smooth test fields.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    rng: ChaCha8Rng,
    max_freq: usize,
}

impl FieldSampler {
    /// `max_freq` may not exceed an eighth of the coarsest axis resolution.
    pub fn new(space: &ModelSpace, seed: u64, max_freq: usize) -> Result<Self> {
        let cap = space.dims().iter().min().copied().unwrap_or(0) / 8;
        if max_freq == 0 || max_freq > cap {
            return Err(Error::Input(format!(
                "random field frequency {max_freq} outside 1..={cap} for grid {}",
                space.key()
            )));
        }
        Ok(FieldSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_freq,
        })
    }

    fn coef(&mut self, order: f64) -> f64 {
        self.rng.gen_range(-1.0..1.0) / (1.0 + order).powi(2)
    }

    /// One smooth field with a vanishing mean coefficient.
    pub fn field(&mut self, space: &ModelSpace) -> Vec<f64> {
        let kmax = self.max_freq as i64;
        let mut terms: Vec<(Vec<f64>, f64, f64)> = Vec::new();
        match space.kind() {
            SpaceKind::Circle => {
                for k in 1..=kmax {
                    let (a, b) = (self.coef(k as f64), self.coef(k as f64));
                    terms.push((vec![k as f64], a, b));
                }
            }
            SpaceKind::Torus2 => {
                for kx in -kmax..=kmax {
                    for ky in 0..=kmax {
                        if ky == 0 && kx <= 0 {
                            continue;
                        }
                        let order = ((kx * kx + ky * ky) as f64).sqrt();
                        let (a, b) = (self.coef(order), self.coef(order));
                        terms.push((vec![kx as f64, ky as f64], a, b));
                    }
                }
            }
            SpaceKind::SphereZonal => {
                // cos kθ keeps the field even across both poles
                for k in 1..=kmax {
                    let a = self.coef(k as f64);
                    terms.push((vec![k as f64], a, 0.0));
                }
            }
        }
        space.sample(|x| {
            terms
                .iter()
                .map(|(k, a, b)| {
                    let phase: f64 = k.iter().zip(x).map(|(k, x)| k * x).sum();
                    a * phase.cos() + b * phase.sin()
                })
                .sum()
        })
    }

    /// A positive field `1 + contrast · φ / max|φ|`, unnormalized.
    pub fn positive(&mut self, space: &ModelSpace, contrast: f64) -> Vec<f64> {
        let f = self.field(space);
        let amp = f.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        f.iter().map(|v| 1.0 + contrast * v / amp).collect()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }
}
