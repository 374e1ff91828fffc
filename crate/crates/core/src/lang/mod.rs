//! Language-model likelihood of template descriptors under a skill prompt.

mod ngram;
#[cfg(feature = "remote")]
mod remote;

pub use ngram::{NgramBackend, UNKNOWN_TOKEN};
#[cfg(feature = "remote")]
pub use remote::{RemoteBackend, ScoreRequest, ScoreResponse};

use crate::domain::{fill_descriptor, SkillLabel, Template};
use crate::error::{Error, Result};
use crate::fusion::{Orientation, ScoreVector};

/// Lowercases, strips punctuation (apostrophes and hyphens inside words survive) and splits on
/// whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.to_lowercase()
                .chars()
                .filter(|c| c.is_alphanumeric() || *c == '\'' || *c == '-')
                .collect::<String>()
                .trim_matches(|c| c == '\'' || c == '-')
                .to_string()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

pub fn prompt_text(skill: &SkillLabel) -> String {
    format!(
        "To successfully {} the {} with the {} you should ",
        skill.verb, skill.recipient, skill.tool
    )
}

pub fn build_prompt(skill: &SkillLabel) -> Vec<String> {
    tokenize(&prompt_text(skill))
}

/// A next-token distribution over a fixed vocabulary.
pub trait TokenModel {
    fn vocabulary(&self) -> &[String];

    /// Probabilities aligned with [`TokenModel::vocabulary`]; sums to 1.
    fn distribution(&self, prefix: &[String]) -> Vec<f64>;

    /// `p(token | prefix)`. The default looks the token up in the full distribution.
    fn prob(&self, prefix: &[String], token: &str) -> f64 {
        let dist = self.distribution(prefix);
        self.vocabulary()
            .iter()
            .position(|t| t == token)
            .map_or(0.0, |i| dist[i])
    }

    fn log_prob(&self, prefix: &[String], token: &str) -> f64 {
        self.prob(prefix, token).ln()
    }
}

/// Anything that can return per-token log-probabilities of a continuation after a prompt.
pub trait ContinuationScorer {
    fn token_logprobs(&self, prompt: &[String], continuation: &[String]) -> Result<Vec<f64>>;
}

impl<M: TokenModel> ContinuationScorer for M {
    fn token_logprobs(&self, prompt: &[String], continuation: &[String]) -> Result<Vec<f64>> {
        let mut prefix = prompt.to_vec();
        let mut out = Vec::with_capacity(continuation.len());
        for t in continuation {
            out.push(self.log_prob(&prefix, t));
            prefix.push(t.clone());
        }
        Ok(out)
    }
}

fn checked_logprobs<S: ContinuationScorer + ?Sized>(
    model: &S,
    prompt: &[String],
    descriptor: &[String],
) -> Result<Vec<f64>> {
    if descriptor.is_empty() {
        return Err(Error::EmptyDescriptor);
    }
    let lp = model.token_logprobs(prompt, descriptor)?;
    if lp.is_empty() {
        return Err(Error::Backend("scorer returned no token log-probabilities".into()));
    }
    if lp.iter().any(|v| v.is_nan() || *v > 0.0) {
        return Err(Error::Backend("token log-probabilities must be <= 0".into()));
    }
    Ok(lp)
}

/// Natural-log likelihood of the descriptor given the prompt.
pub fn sequence_loglik<S: ContinuationScorer + ?Sized>(
    model: &S,
    prompt: &[String],
    descriptor: &[String],
) -> Result<f64> {
    Ok(checked_logprobs(model, prompt, descriptor)?.iter().sum())
}

/// Mean log-probability per scored token.
pub fn normalized_score<S: ContinuationScorer + ?Sized>(
    model: &S,
    prompt: &[String],
    descriptor: &[String],
) -> Result<f64> {
    let lp = checked_logprobs(model, prompt, descriptor)?;
    if lp.iter().any(|v| v.is_infinite()) {
        return Ok(f64::NEG_INFINITY);
    }
    // shifted mean: exact when every token has the same log-probability
    let first = lp[0];
    Ok(first + lp.iter().map(|v| v - first).sum::<f64>() / lp.len() as f64)
}

/// Normalized descriptor score for every template, in library order.
pub fn rank_templates_llm<S: ContinuationScorer + ?Sized>(
    model: &S,
    skill: &SkillLabel,
    library: &[Template],
) -> Result<ScoreVector> {
    if library.is_empty() {
        return Err(Error::Empty);
    }
    let prompt = build_prompt(skill);
    let mut scores = Vec::with_capacity(library.len());
    for t in library {
        let descriptor = tokenize(&fill_descriptor(t, skill)?);
        let s = normalized_score(model, &prompt, &descriptor)?;
        if !s.is_finite() {
            return Err(Error::Backend(format!("non-finite score for template {}", t.id)));
        }
        scores.push(s);
    }
    ScoreVector::new(
        library.iter().map(|t| t.id).collect(),
        scores,
        Orientation::HigherIsBetter,
    )
}

/// Every token equally likely.
#[derive(Debug, Clone)]
pub struct UniformModel {
    vocab: Vec<String>,
}

impl UniformModel {
    pub fn new(vocab: Vec<String>) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self { vocab })
    }
}

impl TokenModel for UniformModel {
    fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    fn distribution(&self, _prefix: &[String]) -> Vec<f64> {
        vec![1.0 / self.vocab.len() as f64; self.vocab.len()]
    }

    fn prob(&self, _prefix: &[String], _token: &str) -> f64 {
        1.0 / self.vocab.len() as f64
    }

    fn log_prob(&self, _prefix: &[String], _token: &str) -> f64 {
        -(self.vocab.len() as f64).ln()
    }
}

/// Fixed per-token probabilities that ignore the prefix; unknown tokens fall back to the
/// last vocabulary entry.
#[derive(Debug, Clone)]
pub struct UnigramModel {
    vocab: Vec<String>,
    probs: Vec<f64>,
}

impl UnigramModel {
    pub fn new(vocab: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if vocab.is_empty() || vocab.len() != weights.len() {
            return Err(Error::ShapeMismatch("one positive weight per vocabulary entry".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidConfig("unigram weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        Ok(Self {
            vocab,
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }
}

impl TokenModel for UnigramModel {
    fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    fn distribution(&self, _prefix: &[String]) -> Vec<f64> {
        self.probs.clone()
    }

    fn prob(&self, _prefix: &[String], token: &str) -> f64 {
        let i = self
            .vocab
            .iter()
            .position(|t| t == token)
            .unwrap_or(self.vocab.len() - 1);
        self.probs[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_library;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    fn vocab(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn tokenizer_lowercases_and_strips_punctuation() {
        assert_eq!(
            toks("Move the [tool], quickly!  Don't stop."),
            vec!["move", "the", "tool", "quickly", "don't", "stop"]
        );
        assert!(toks(" -- ").is_empty());
    }

    #[test]
    fn prompt_for_wipe() {
        let wipe = SkillLabel::new("wipe", "cloth", "plate").unwrap();
        assert_eq!(
            prompt_text(&wipe),
            "To successfully wipe the plate with the cloth you should "
        );
        let p = build_prompt(&wipe);
        assert_eq!(p.join(" "), "to successfully wipe the plate with the cloth you should");
        assert!(p.iter().all(|t| !t.is_empty()));
        assert_eq!(p, build_prompt(&wipe));
    }

    #[test]
    fn uniform_model_scores() {
        let m = UniformModel::new(vocab(4)).unwrap();
        let d = toks("w0 w1 w2");
        let ll = sequence_loglik(&m, &[], &d).unwrap();
        assert!((ll - 3.0 * (0.25f64).ln()).abs() < 1e-12);
        assert_eq!(
            normalized_score(&m, &toks("w3"), &toks("w1 w1 w2 w0 w3")).unwrap(),
            -(4f64.ln())
        );
        assert!(matches!(sequence_loglik(&m, &[], &[]), Err(Error::EmptyDescriptor)));
    }

    #[test]
    fn repeated_descriptor_keeps_unigram_score() {
        let m = UnigramModel::new(vocab(3), vec![1.0, 2.0, 5.0]).unwrap();
        let once = toks("w0 w2 w1");
        let twice = toks("w0 w2 w1 w0 w2 w1");
        let a = normalized_score(&m, &[], &once).unwrap();
        let b = normalized_score(&m, &[], &twice).unwrap();
        assert!((a - b).abs() < 1e-12);
        // the prompt is ignored entirely
        assert_eq!(a, normalized_score(&m, &toks("w1 w1 w1 w2"), &once).unwrap());
    }

    #[test]
    fn uniform_model_ties_every_template() {
        let m = UniformModel::new(vocab(50)).unwrap();
        let skill = SkillLabel::new("wipe", "cloth", "plate").unwrap();
        let lib = build_library();
        let s = rank_templates_llm(&m, &skill, &lib).unwrap();
        assert_eq!(s.len(), 33);
        assert!(s.scores.iter().all(|&x| x == s.scores[0]));
    }

    #[test]
    fn ranking_follows_library_order() {
        let m = NgramBackend::builtin();
        let skill = SkillLabel::new("wipe", "cloth", "plate").unwrap();
        let lib = build_library();
        let s = rank_templates_llm(&m, &skill, &lib).unwrap();
        let mut rev = lib.clone();
        rev.reverse();
        let r = rank_templates_llm(&m, &skill, &rev).unwrap();
        for id in 0..33 {
            assert_eq!(s.get(id), r.get(id));
        }
    }
}
