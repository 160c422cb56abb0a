//! Augmentations of segment pairs: temporal cropping plus the state-space
//! baselines (random amplitude scaling, Gaussian noise).
//!
//! None of these touch the preference label of the pair they augment.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Segment;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropConfig {
    pub h_min: usize,
    pub h_max: usize,
    /// Length of every segment before cropping.
    pub segment_len: usize,
}

impl Default for CropConfig {
    fn default() -> Self {
        CropConfig {
            h_min: 45,
            h_max: 55,
            segment_len: 60,
        }
    }
}

impl CropConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h_min == 0 || self.h_min > self.h_max || self.h_max > self.segment_len {
            return Err(Error::contract(format!(
                "crop bounds need 1 <= h_min <= h_max <= H, got [{}, {}] with H = {}",
                self.h_min, self.h_max, self.segment_len
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for RasConfig {
    fn default() -> Self {
        RasConfig {
            alpha: 0.8,
            beta: 1.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnConfig {
    pub sigma: f64,
    /// Draw fresh noise at every step instead of once per segment.
    pub per_step: bool,
}

impl Default for GnConfig {
    fn default() -> Self {
        GnConfig {
            sigma: 1.0,
            per_step: false,
        }
    }
}

/// Crops both segments to a shared random length `H'` in `[h_min, h_max]`,
/// with independent uniform offsets in `[0, H - H']`.
pub fn tda<R: Rng + ?Sized>(
    seg0: &Segment,
    seg1: &Segment,
    cfg: &CropConfig,
    rng: &mut R,
) -> Result<(Segment, Segment)> {
    cfg.validate()?;
    let h = cfg.segment_len;
    if seg0.len() != h || seg1.len() != h {
        return Err(Error::contract(format!(
            "cropping expects segments of length {h}, got {} and {}",
            seg0.len(),
            seg1.len()
        )));
    }
    let cropped_len = rng.random_range(cfg.h_min..=cfg.h_max);
    let k0 = rng.random_range(0..=h - cropped_len);
    let k1 = rng.random_range(0..=h - cropped_len);
    Ok((seg0.crop(k0, cropped_len)?, seg1.crop(k1, cropped_len)?))
}

/// Scales every state of the segment by one `z ~ U[alpha, beta]`.
pub fn ras<R: Rng + ?Sized>(seg: &Segment, cfg: &RasConfig, rng: &mut R) -> Result<Segment> {
    if !(cfg.alpha > 0.0 && cfg.alpha <= cfg.beta) {
        return Err(Error::contract(format!(
            "amplitude scaling needs 0 < alpha <= beta, got [{}, {}]",
            cfg.alpha, cfg.beta
        )));
    }
    let z = if cfg.alpha == cfg.beta {
        cfg.alpha
    } else {
        rng.random_range(cfg.alpha..=cfg.beta)
    };
    Ok(seg.with_states(seg.states().iter().map(|s| s * z).collect()))
}

/// Adds `z ~ N(0, sigma^2 I)` to every state; one draw per segment unless
/// `per_step` is set.
pub fn gn<R: Rng + ?Sized>(seg: &Segment, cfg: &GnConfig, rng: &mut R) -> Result<Segment> {
    if !(cfg.sigma >= 0.0) {
        return Err(Error::contract(format!("noise scale {} must be >= 0", cfg.sigma)));
    }
    if cfg.sigma == 0.0 {
        return Ok(seg.clone());
    }
    let normal = Normal::new(0.0, cfg.sigma).map_err(|e| Error::contract(e.to_string()))?;
    let sd = seg.state_dim();
    let mut states = seg.states().to_vec();
    let mut z: Vec<f64> = (0..sd).map(|_| normal.sample(rng)).collect();
    for (t, row) in states.chunks_mut(sd.max(1)).enumerate() {
        if cfg.per_step && t > 0 {
            z.iter_mut().for_each(|v| *v = normal.sample(rng));
        }
        row.iter_mut().zip(&z).for_each(|(s, n)| *s += n);
    }
    Ok(seg.with_states(states))
}

/// Augmentation pipeline applied to each training pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub crop: Option<CropConfig>,
    pub ras: Option<RasConfig>,
    pub gn: Option<GnConfig>,
}

impl AugmentConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn crop_only(crop: CropConfig) -> Self {
        AugmentConfig {
            crop: Some(crop),
            ..Self::default()
        }
    }

    pub fn is_identity(&self) -> bool {
        self.crop.is_none() && self.ras.is_none() && self.gn.is_none()
    }

    /// Crop first, then per-segment state perturbations (independent draws
    /// for the two segments).
    pub fn apply<R: Rng + ?Sized>(
        &self,
        seg0: &Segment,
        seg1: &Segment,
        rng: &mut R,
    ) -> Result<(Segment, Segment)> {
        let (mut a, mut b) = match &self.crop {
            Some(c) => tda(seg0, seg1, c, rng)?,
            None => (seg0.clone(), seg1.clone()),
        };
        if let Some(r) = &self.ras {
            a = ras(&a, r, rng)?;
            b = ras(&b, r, rng)?;
        }
        if let Some(g) = &self.gn {
            a = gn(&a, g, rng)?;
            b = gn(&b, g, rng)?;
        }
        Ok((a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seg(len: usize, episode: u64) -> Segment {
        Segment::new(
            2,
            1,
            (0..2 * len).map(|v| 1.0 + v as f64).collect(),
            (0..len).map(|v| v as f64 * 0.1).collect(),
            vec![0.0; len],
            episode,
            0,
        )
        .unwrap()
    }

    #[test]
    fn full_length_crop_is_identity() {
        let (a, b) = (seg(10, 0), seg(10, 1));
        let cfg = CropConfig { h_min: 10, h_max: 10, segment_len: 10 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (ca, cb) = tda(&a, &b, &cfg, &mut rng).unwrap();
        assert_eq!((ca, cb), (a, b));
    }

    #[test]
    fn table_setting_offsets_are_bounded() {
        let (a, b) = (seg(60, 0), seg(60, 1));
        let cfg = CropConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let (ca, cb) = tda(&a, &b, &cfg, &mut rng).unwrap();
            assert_eq!(ca.len(), cb.len());
            assert!((45..=55).contains(&ca.len()));
            assert!(ca.start_step() <= 60 - ca.len());
            assert!(cb.start_step() <= 60 - cb.len());
            if ca.len() == 55 {
                assert!(ca.start_step() <= 5);
            }
        }
    }

    #[test]
    fn invalid_crop_configs_are_rejected() {
        let (a, b) = (seg(10, 0), seg(10, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for cfg in [
            CropConfig { h_min: 0, h_max: 5, segment_len: 10 },
            CropConfig { h_min: 6, h_max: 5, segment_len: 10 },
            CropConfig { h_min: 5, h_max: 11, segment_len: 10 },
        ] {
            assert!(matches!(tda(&a, &b, &cfg, &mut rng), Err(Error::Contract(_))));
        }
        let wrong = CropConfig { h_min: 5, h_max: 8, segment_len: 12 };
        assert!(tda(&a, &b, &wrong, &mut rng).is_err());
    }

    #[test]
    fn ras_scales_uniformly_in_time() {
        let s = seg(8, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let same = ras(&s, &RasConfig { alpha: 1.0, beta: 1.0 }, &mut rng).unwrap();
        assert_eq!(same, s);
        let out = ras(&s, &RasConfig::default(), &mut rng).unwrap();
        let ratio = out.states()[0] / s.states()[0];
        assert!((0.8..=1.2).contains(&ratio));
        for (o, i) in out.states().iter().zip(s.states()) {
            assert!((o / i - ratio).abs() < 1e-12);
        }
        assert_eq!(out.actions(), s.actions());
        assert!(ras(&s, &RasConfig { alpha: 0.0, beta: 1.0 }, &mut rng).is_err());
    }

    #[test]
    fn gn_offsets_are_shared_across_time() {
        let s = seg(8, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(gn(&s, &GnConfig { sigma: 0.0, per_step: false }, &mut rng).unwrap(), s);
        let out = gn(&s, &GnConfig::default(), &mut rng).unwrap();
        let d0: Vec<f64> = (0..2).map(|j| out.state(0)[j] - s.state(0)[j]).collect();
        for t in 1..8 {
            for j in 0..2 {
                assert!((out.state(t)[j] - s.state(t)[j] - d0[j]).abs() < 1e-12);
            }
        }
        assert_eq!(out.actions(), s.actions());
        let step = gn(&s, &GnConfig { sigma: 1.0, per_step: true }, &mut rng).unwrap();
        assert_ne!(step.state(1)[0] - s.state(1)[0], step.state(0)[0] - s.state(0)[0]);
    }
}
