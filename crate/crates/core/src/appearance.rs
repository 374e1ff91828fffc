//! Appearance-only video scoring baseline: evenly subsampled frames, mean image, fixed random
//! projection. It never looks at flow.

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::retrieval::{Embedding, EMBEDDING_DIM};
use crate::sim::{AppearanceVideo, APPEARANCE_SIZE};

pub const SUBSAMPLED_FRAMES: usize = 16;
const PROJECTION_SEED: u64 = 0x5eed_a11e;

/// `round(i * (n - 1) / 15)` for `i` in `0..16`.
pub fn subsample_indices(n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::EmptyVideo);
    }
    let last = (SUBSAMPLED_FRAMES - 1) as f64;
    Ok((0..SUBSAMPLED_FRAMES)
        .map(|i| (i as f64 * (n - 1) as f64 / last).round() as usize)
        .collect())
}

fn projection() -> &'static [f64] {
    static P: OnceLock<Vec<f64>> = OnceLock::new();
    P.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(PROJECTION_SEED);
        (0..EMBEDDING_DIM * APPEARANCE_SIZE * APPEARANCE_SIZE)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    })
}

pub fn video_embedding_appearance(video: &AppearanceVideo) -> Result<Embedding> {
    let idx = subsample_indices(video.len())?;
    let pixels = APPEARANCE_SIZE * APPEARANCE_SIZE;
    if video.width * video.height != pixels {
        return Err(Error::ShapeMismatch(format!(
            "appearance frames must be {APPEARANCE_SIZE}x{APPEARANCE_SIZE}"
        )));
    }
    let mut mean = vec![0.0f64; pixels];
    for &i in &idx {
        for (m, &p) in mean.iter_mut().zip(&video.frames[i]) {
            *m += p as f64;
        }
    }
    for m in &mut mean {
        *m /= idx.len() as f64;
    }
    let proj = projection();
    let v = (0..EMBEDDING_DIM)
        .map(|r| {
            proj[r * pixels..(r + 1) * pixels]
                .iter()
                .zip(&mean)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    Embedding::normalized(v)
}

/// Mean cosine distance from the execution to each demonstration; lower is better.
pub fn score_template_appearance(exec: &AppearanceVideo, demos: &[&AppearanceVideo]) -> Result<f64> {
    if demos.is_empty() {
        return Err(Error::EmptyDemoSet);
    }
    let e = video_embedding_appearance(exec)?;
    let mut sum = 0.0;
    for d in demos {
        sum += 1.0 - e.cosine(&video_embedding_appearance(d)?);
    }
    Ok(sum / demos.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn video(frames: Vec<Vec<f32>>) -> AppearanceVideo {
        AppearanceVideo {
            width: 16,
            height: 16,
            frames,
        }
    }

    fn random_frames(n: usize, seed: u64) -> Vec<Vec<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..256).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn subsample_examples() {
        assert_eq!(subsample_indices(16).unwrap(), (0..16).collect::<Vec<_>>());
        assert_eq!(subsample_indices(1).unwrap(), vec![0; 16]);
        let idx = subsample_indices(31).unwrap();
        for (i, &k) in idx.iter().enumerate() {
            assert_eq!(k, (i as f64 * 30.0 / 15.0).round() as usize);
        }
        let idx = subsample_indices(60).unwrap();
        assert_eq!((idx[0], idx[15]), (0, 59));
        assert!(idx.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn constant_video_matches_single_frame() {
        let f = random_frames(1, 4).remove(0);
        let one = video_embedding_appearance(&video(vec![f.clone()])).unwrap();
        let many = video_embedding_appearance(&video(vec![f; 40])).unwrap();
        for (a, b) in one.as_slice().iter().zip(many.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pinned_checksum() {
        let e = video_embedding_appearance(&video(random_frames(20, 8))).unwrap();
        let checksum: f64 = e.as_slice().iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum();
        assert!((checksum - PINNED_CHECKSUM).abs() < 1e-9, "{checksum}");
    }

    const PINNED_CHECKSUM: f64 = -103.94205391847093;

    #[test]
    fn score_examples() {
        let a = video(random_frames(10, 1));
        let b = video(random_frames(10, 2));
        assert!(score_template_appearance(&a, &[&a]).unwrap().abs() < 1e-12);
        let (ea, eb) = (
            video_embedding_appearance(&a).unwrap(),
            video_embedding_appearance(&b).unwrap(),
        );
        let naive = ((1.0 - ea.cosine(&ea)) + (1.0 - ea.cosine(&eb))) / 2.0;
        assert!((score_template_appearance(&a, &[&a, &b]).unwrap() - naive).abs() < 1e-12);
        assert!(matches!(score_template_appearance(&a, &[]), Err(Error::EmptyDemoSet)));
        let x = Embedding::normalized(vec![1.0, 0.0]).unwrap();
        let y = Embedding::normalized(vec![0.0, 3.0]).unwrap();
        assert_eq!(1.0 - x.cosine(&y), 1.0);
        let s = score_template_appearance(&a, &[&b]).unwrap();
        assert!((0.0..=2.0).contains(&s));
    }
}
