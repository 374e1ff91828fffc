//! Text-to-video retrieval of demonstrations in a shared embedding space.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::SkillLabel;
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::lang::tokenize;
use crate::sim::{DemoRecord, FlowVideo};

pub const EMBEDDING_DIM: usize = 64;
/// Dimensions reserved for hashed tokens; the rest carry flow statistics.
pub const TOKEN_DIMS: usize = 56;
pub const FLOW_STAT_DIMS: usize = EMBEDDING_DIM - TOKEN_DIMS;
/// Demos retrieved per skill.
pub const DEFAULT_M: usize = 5;
const FLOW_STAT_WEIGHT: f64 = 0.25;

/// Unit-norm vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `v`; fails on a zero or non-finite vector.
    pub fn normalized(v: Vec<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::EmptyInput);
        }
        Ok(Self(v.into_iter().map(|x| x / norm).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

pub trait DualEncoder {
    fn embed_text(&self, caption: &str) -> Result<Embedding>;
    fn embed_video(&self, record: &DemoRecord) -> Result<Embedding>;
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn hash_tokens<'a>(tokens: impl Iterator<Item = &'a str>, out: &mut [f64]) {
    for t in tokens {
        out[(fnv1a(t) % TOKEN_DIMS as u64) as usize] += 1.0;
    }
}

/// `[mean |flow|, moving fraction, mean dx, mean dy, share of moving pixels heading right,
/// down, left, up]`.
pub fn flow_statistics(video: &FlowVideo) -> [f64; FLOW_STAT_DIMS] {
    let mut s = [0.0; FLOW_STAT_DIMS];
    let (mut n, mut moving) = (0usize, 0usize);
    for frame in &video.frames {
        for v in frame.chunks_exact(2) {
            let (dx, dy) = (v[0] as f64, v[1] as f64);
            let mag = dx.hypot(dy);
            n += 1;
            s[0] += mag;
            s[2] += dx;
            s[3] += dy;
            if mag > 1e-3 {
                moving += 1;
                let bin = if dx.abs() >= dy.abs() {
                    if dx > 0.0 {
                        4
                    } else {
                        6
                    }
                } else if dy > 0.0 {
                    5
                } else {
                    7
                };
                s[bin] += 1.0;
            }
        }
    }
    if n > 0 {
        for x in &mut s[..4] {
            *x /= n as f64;
        }
        s[1] = moving as f64 / n as f64;
    }
    if moving > 0 {
        for x in &mut s[4..] {
            *x /= moving as f64;
        }
    }
    s
}

/// Hashed bag of tokens for captions; video embeddings add metadata tokens and a few coarse
/// flow statistics.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashEncoder;

impl DualEncoder for HashEncoder {
    fn embed_text(&self, caption: &str) -> Result<Embedding> {
        let tokens = tokenize(caption);
        if tokens.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut v = vec![0.0; EMBEDDING_DIM];
        hash_tokens(tokens.iter().map(String::as_str), &mut v);
        Embedding::normalized(v)
    }

    fn embed_video(&self, record: &DemoRecord) -> Result<Embedding> {
        let mut tokens = tokenize(&record.text);
        for o in &record.objects {
            tokens.extend(tokenize(o));
        }
        if tokens.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut v = vec![0.0; EMBEDDING_DIM];
        hash_tokens(tokens.iter().map(String::as_str), &mut v);
        let scale = v[..TOKEN_DIMS].iter().map(|x| x * x).sum::<f64>().sqrt() * FLOW_STAT_WEIGHT;
        for (dst, s) in v[TOKEN_DIMS..].iter_mut().zip(flow_statistics(&record.video)) {
            *dst = s * scale;
        }
        Embedding::normalized(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    /// Index into the corpus.
    pub record_id: usize,
    pub similarity: f64,
}

fn eligible(record: &DemoRecord, skill: &SkillLabel) -> bool {
    record.objects.contains(&skill.tool) && record.objects.contains(&skill.recipient)
}

/// The `m` records most similar to the skill caption among those that contain the skill's
/// tool and recipient; ties go to the lower corpus index.
pub fn retrieve<E: DualEncoder + ?Sized>(
    skill: &SkillLabel,
    corpus: &[DemoRecord],
    encoder: &E,
    m: usize,
) -> Result<Vec<RetrievalHit>> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput);
    }
    if m == 0 {
        return Err(Error::InvalidConfig("m must be at least 1".into()));
    }
    let query = encoder.embed_text(&skill.caption())?;
    let mut hits = corpus
        .iter()
        .enumerate()
        .filter(|(_, r)| eligible(r, skill))
        .map(|(i, r)| {
            Ok(RetrievalHit {
                record_id: i,
                similarity: query.cosine(&encoder.embed_video(r)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if hits.is_empty() {
        return Err(Error::NoEligibleRecords(vec![
            skill.tool.clone(),
            skill.recipient.clone(),
        ]));
    }
    hits.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then(a.record_id.cmp(&b.record_id))
    });
    hits.truncate(m);
    Ok(hits)
}

#[derive(Serialize)]
struct LogLine<'a> {
    skill: &'a str,
    record_id: usize,
    similarity: f64,
}

/// One JSON object per hit: `{"skill", "record_id", "similarity"}`.
pub fn retrieval_log_lines(skill: &SkillLabel, hits: &[RetrievalHit]) -> Result<String> {
    let caption = skill.caption();
    let mut out = String::new();
    for h in hits {
        out.push_str(&serde_json::to_string(&LogLine {
            skill: &caption,
            record_id: h.record_id,
            similarity: h.similarity,
        })?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_retrieval_log(path: &Path, skill: &SkillLabel, hits: &[RetrievalHit]) -> Result<()> {
    write_atomic(path, retrieval_log_lines(skill, hits)?.as_bytes())
}
