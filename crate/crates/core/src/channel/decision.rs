use crate::error::{Error, Result};

/// One channel index per user slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Decision {
    channels: Vec<usize>,
    collision: bool,
}

impl Decision {
    pub fn new(channels: Vec<usize>, num_channels: usize) -> Result<Self> {
        if let Some(&index) = channels.iter().find(|&&c| c >= num_channels) {
            return Err(Error::InvalidDecision {
                index,
                channels: num_channels,
            });
        }
        let collision = has_duplicates(&channels);
        Ok(Self {
            channels,
            collision,
        })
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn collision(&self) -> bool {
        self.collision
    }

    /// Whether user `n` loses its channel to a lower-indexed user.
    pub fn loses_collision(&self, n: usize) -> bool {
        self.channels[..n].contains(&self.channels[n])
    }
}

fn has_duplicates(v: &[usize]) -> bool {
    v.iter().enumerate().any(|(i, c)| v[i + 1..].contains(c))
}

/// Quantises raw actions in `(0, 1)` to `M` levels: `min(floor(raw·M), M − 1)`.
pub fn decode_action(raw: &[f64], num_channels: usize) -> Result<Decision> {
    let channels = raw
        .iter()
        .map(|&r| {
            if r > 0.0 && r < 1.0 {
                Ok(((r * num_channels as f64).floor() as usize).min(num_channels - 1))
            } else {
                Err(Error::EncodingContract(r))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Decision::new(channels, num_channels)
}

/// Centre of the quantisation bin for `channel`.
pub fn encode_channel(channel: usize, num_channels: usize) -> f64 {
    (channel as f64 + 0.5) / num_channels as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decoding_examples() {
        assert_eq!(decode_action(&[1e-12], 25).unwrap().channels(), &[0]);
        assert_eq!(decode_action(&[0.999], 25).unwrap().channels(), &[24]);
        let d = decode_action(&[0.30, 0.31], 10).unwrap();
        assert_eq!(d.channels(), &[3, 3]);
        assert!(d.collision());
        assert!(!d.loses_collision(0));
        assert!(d.loses_collision(1));
    }

    #[test]
    fn out_of_range_raw_is_contract_violation() {
        for r in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(
                decode_action(&[r], 4),
                Err(Error::EncodingContract(_))
            ));
        }
    }

    #[test]
    fn out_of_range_index_is_invalid_decision() {
        assert!(matches!(
            Decision::new(vec![0, 4], 4),
            Err(Error::InvalidDecision {
                index: 4,
                channels: 4
            })
        ));
    }

    proptest! {
        #[test]
        fn decode_is_order_preserving(a in 1e-9f64..0.999_999, b in 1e-9f64..0.999_999, m in 1usize..40) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let d = decode_action(&[lo, hi], m).unwrap();
            prop_assert!(d.channels()[0] <= d.channels()[1]);
            prop_assert!(d.channels()[1] < m);
        }

        #[test]
        fn every_channel_reachable(m in 1usize..64) {
            for c in 0..m {
                prop_assert_eq!(decode_action(&[encode_channel(c, m)], m).unwrap().channels()[0], c);
            }
        }

        #[test]
        fn collision_flag_matches_duplicates(ch in proptest::collection::vec(0usize..6, 1..6)) {
            let d = Decision::new(ch.clone(), 6).unwrap();
            let mut s = ch.clone();
            s.sort_unstable();
            s.dedup();
            prop_assert_eq!(d.collision(), s.len() != ch.len());
        }
    }
}
