//! Binary checkpoint of a trained head and its training configuration.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "PTDE"
//!      4     4  format version (u32)
//!      8     4  input dim (u32)
//!     12     4  hidden width 1 (u32)
//!     16     4  hidden width 2 (u32)
//!     20     4  output width (u32, always 1)
//!     24     4  fusion mode tag (u32: 0 global, 1 global-local)
//!     28     8  seed (u64)
//!     36     8  learning rate (f64)
//!     44     8  epochs (u64)
//!     52     8  pairs per epoch (u64)
//!     60     8  lambda1 (f64)
//!     68     8  lambda2 (f64)
//!     76     8  adagrad epsilon (f64)
//!     84     -  parameters (f64): W1, b1, W2, b2, W3, b3; weights fan_in x fan_out row-major
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::FusionMode;
use crate::head::{ScoringHead, OUTPUT_WIDTH};
use crate::trainer::TrainConfig;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PTDE";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const CHECKPOINT_HEADER_LEN: usize = 84;

pub fn encode_checkpoint(head: &ScoringHead, config: &TrainConfig) -> Vec<u8> {
    let mut out = Vec::with_capacity(CHECKPOINT_HEADER_LEN + head.parameter_count() * 8);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    let [h1, h2] = head.hidden_widths();
    for word in [
        CHECKPOINT_VERSION,
        head.input_dim() as u32,
        h1 as u32,
        h2 as u32,
        OUTPUT_WIDTH as u32,
        u32::from(config.fusion_mode.tag()),
    ] {
        out.extend_from_slice(&word.to_le_bytes());
    }
    out.extend_from_slice(&config.seed.to_le_bytes());
    out.extend_from_slice(&config.learning_rate.to_le_bytes());
    out.extend_from_slice(&(config.epochs as u64).to_le_bytes());
    out.extend_from_slice(&(config.pairs_per_epoch as u64).to_le_bytes());
    out.extend_from_slice(&config.lambda1.to_le_bytes());
    out.extend_from_slice(&config.lambda2.to_le_bytes());
    out.extend_from_slice(&config.adagrad_epsilon.to_le_bytes());
    debug_assert_eq!(out.len(), CHECKPOINT_HEADER_LEN);
    for v in head.blocks().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let chunk = self
            .bytes
            .get(self.pos..self.pos + N)
            .ok_or_else(|| Error::CorruptCheckpoint(format!("truncated at byte {}", self.pos)))?;
        self.pos += N;
        Ok(chunk.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<u32> {
        self.take().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.take().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.take().map(f64::from_le_bytes)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ScoringHead, TrainConfig)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take::<4>()? != CHECKPOINT_MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let input_dim = r.u32()? as usize;
    let hidden = [r.u32()? as usize, r.u32()? as usize];
    let output = r.u32()? as usize;
    if output != OUTPUT_WIDTH || input_dim == 0 || hidden.contains(&0) {
        return Err(Error::CorruptCheckpoint(format!(
            "invalid layer dims {input_dim}/{}/{}/{output}",
            hidden[0], hidden[1]
        )));
    }
    let tag = r.u32()?;
    let fusion_mode = u8::try_from(tag)
        .ok()
        .and_then(FusionMode::from_tag)
        .ok_or_else(|| Error::CorruptCheckpoint(format!("unknown fusion tag {tag}")))?;
    let config = TrainConfig {
        seed: r.u64()?,
        learning_rate: r.f64()?,
        epochs: r.u64()? as usize,
        pairs_per_epoch: r.u64()? as usize,
        lambda1: r.f64()?,
        lambda2: r.f64()?,
        adagrad_epsilon: r.f64()?,
        fusion_mode,
    };

    let mut head = ScoringHead::zeros(input_dim, hidden);
    let expected = CHECKPOINT_HEADER_LEN + head.parameter_count() * 8;
    if bytes.len() != expected {
        return Err(Error::CorruptCheckpoint(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    for block in head.blocks_mut() {
        for v in block {
            *v = r.f64()?;
        }
    }
    if !head.is_finite() {
        return Err(Error::CorruptCheckpoint("non-finite parameter".into()));
    }
    Ok((head, config))
}

pub fn save_checkpoint(head: &ScoringHead, config: &TrainConfig, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(head, config)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ScoringHead, TrainConfig)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::head::init_head;

    fn sample() -> (ScoringHead, TrainConfig) {
        let head = ScoringHead::with_widths(3, [4, 2], 11).unwrap();
        let config = TrainConfig {
            seed: 11,
            epochs: 17,
            fusion_mode: FusionMode::GlobalLocalConcat,
            ..TrainConfig::default()
        };
        (head, config)
    }

    #[test]
    fn header_layout() {
        let (head, config) = sample();
        let bytes = encode_checkpoint(&head, &config);
        assert_eq!(&bytes[..4], b"PTDE");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 1);
        assert_eq!(
            bytes.len(),
            CHECKPOINT_HEADER_LEN + head.parameter_count() * 8
        );
        let w0 = f64::from_le_bytes(bytes[84..92].try_into().unwrap());
        assert_eq!(w0.to_bits(), head.layers[0].weights[0].to_bits());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let head = init_head(16, 5).unwrap();
        let config = TrainConfig::default();
        let (back, cfg) = decode_checkpoint(&encode_checkpoint(&head, &config)).unwrap();
        let bits = |h: &ScoringHead| {
            h.blocks()
                .flatten()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&back), bits(&head));
        assert_eq!(cfg, config);
    }

    #[test]
    fn rejects_corruption() {
        let (head, config) = sample();
        let good = encode_checkpoint(&head, &config);

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_checkpoint(&bad),
            Err(Error::CorruptCheckpoint(_))
        ));

        let mut bad = good.clone();
        bad[4] = 9;
        assert!(matches!(
            decode_checkpoint(&bad),
            Err(Error::UnsupportedVersion {
                found: 9,
                supported: 1
            })
        ));

        assert!(matches!(
            decode_checkpoint(&good[..good.len() - 3]),
            Err(Error::CorruptCheckpoint(_))
        ));
        assert!(matches!(
            decode_checkpoint(&good[..10]),
            Err(Error::CorruptCheckpoint(_))
        ));

        let mut bad = good.clone();
        bad.extend_from_slice(&[0; 8]);
        assert!(matches!(
            decode_checkpoint(&bad),
            Err(Error::CorruptCheckpoint(_))
        ));

        let mut bad = good.clone();
        bad[24] = 7;
        assert!(matches!(
            decode_checkpoint(&bad),
            Err(Error::CorruptCheckpoint(_))
        ));

        let mut bad = good;
        bad[84..92].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            decode_checkpoint(&bad),
            Err(Error::CorruptCheckpoint(_))
        ));
    }
}
