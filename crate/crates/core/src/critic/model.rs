use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::scalar::Scalar;

use super::mlp::Mlp;
use super::CriticError;

const MAGIC: &[u8; 4] = b"HAFC";
pub const FORMAT_VERSION: u32 = 1;

/// Class-resolved fulfillment forecast, each component in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticForecast {
    pub r_large: f64,
    pub r_small: f64,
    pub r_ran: f64,
}

impl CriticForecast {
    pub fn weighted(&self, w: [f64; 3]) -> f64 {
        (w[0] * self.r_large + w[1] * self.r_small + w[2] * self.r_ran) / (w[0] + w[1] + w[2])
    }
}

/// Frozen critic: the network plus the standardization it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticModel<T> {
    pub nodes: usize,
    pub mean: Vec<T>,
    pub std: Vec<T>,
    pub mlp: Mlp<T>,
}

impl<T: Scalar> CriticModel<T> {
    pub fn input_len(&self) -> usize {
        self.mlp.input
    }

    pub fn standardize(&self, raw: &[f64]) -> Result<Vec<T>, CriticError> {
        if raw.len() != self.mlp.input {
            return Err(CriticError::ShapeMismatch { expected: self.mlp.input, found: raw.len() });
        }
        Ok(raw
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| (T::of(v) - m) / s)
            .collect())
    }

    pub fn forecast(&self, raw: &[f64]) -> Result<CriticForecast, CriticError> {
        let y = self.mlp.forward(&self.standardize(raw)?);
        Ok(CriticForecast { r_large: y[0].as_f64(), r_small: y[1].as_f64(), r_ran: y[2].as_f64() })
    }

    /// Versioned little-endian binary: magic, version, shapes, node count,
    /// then mean, std, W1, b1, W2, b2 as f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        for v in [FORMAT_VERSION, self.mlp.input as u32, self.mlp.hidden as u32, self.mlp.output as u32, self.nodes as u32] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        for part in [&self.mean, &self.std, &self.mlp.w1, &self.mlp.b1, &self.mlp.w2, &self.mlp.b2] {
            for v in part.iter() {
                b.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CriticError> {
        let bad = |m: &str| CriticError::Format(m.to_string());
        if bytes.len() < 24 || &bytes[..4] != MAGIC {
            return Err(bad("not a critic model file"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        if word(0) as u32 != FORMAT_VERSION {
            return Err(bad(&format!("unsupported format version {}", word(0))));
        }
        let (input, hidden, output, nodes) = (word(1), word(2), word(3), word(4));
        let sizes = [input, input, hidden * input, hidden, output * hidden, output];
        let expected = 24 + 8 * sizes.iter().sum::<usize>();
        if bytes.len() != expected {
            return Err(bad(&format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let mut off = 24;
        let mut take = |n: usize| -> Vec<T> {
            let v = bytes[off..off + 8 * n]
                .chunks_exact(8)
                .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
                .collect();
            off += 8 * n;
            v
        };
        let mean = take(input);
        let std = take(input);
        let mut mlp = Mlp::zeros(input, hidden, output);
        mlp.w1 = take(hidden * input);
        mlp.b1 = take(hidden);
        mlp.w2 = take(output * hidden);
        mlp.b2 = take(output);
        Ok(CriticModel { nodes, mean, std, mlp })
    }

    /// Hex SHA-256 of the serialized model.
    pub fn hash(&self) -> String {
        hex_digest(&self.to_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), CriticError> {
        fs::write(path, self.to_bytes()).map_err(|e| CriticError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CriticError> {
        let bytes = fs::read(path).map_err(|e| CriticError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
