use std::collections::{BTreeMap, HashMap};

use super::{tokenize, TokenModel};
use crate::error::{Error, Result};

pub const UNKNOWN_TOKEN: &str = "<unk>";
const START: &str = "<s>";
/// Weight of the topic-specific bigram in the mixture.
pub const DEFAULT_TOPIC_WEIGHT: f64 = 0.7;

const BUILTIN_CORPUS: &str = include_str!("../../data/cooking_corpus.txt");

#[derive(Debug, Clone, Default)]
struct BigramCounts {
    pairs: HashMap<(usize, usize), u32>,
    /// Outgoing count per history token.
    history: HashMap<usize, u32>,
}

impl BigramCounts {
    fn add(&mut self, prev: usize, next: usize) {
        *self.pairs.entry((prev, next)).or_default() += 1;
        *self.history.entry(prev).or_default() += 1;
    }

    fn prob(&self, prev: usize, next: usize, vocab: usize) -> f64 {
        let pair = self.pairs.get(&(prev, next)).copied().unwrap_or(0);
        let hist = self.history.get(&prev).copied().unwrap_or(0);
        (pair as f64 + 1.0) / (hist as f64 + vocab as f64)
    }
}

/// Add-one smoothed bigram model over a one-instruction-per-line corpus.
///
/// Lines are grouped by their first token (the imperative verb). When a prefix mentions one of
/// those verbs, the prediction mixes the verb's own bigram counts with the global counts.
#[derive(Debug, Clone)]
pub struct NgramBackend {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    /// Id of the sentence-start history token; not part of the predictable vocabulary.
    start: usize,
    global: BigramCounts,
    topics: BTreeMap<usize, BigramCounts>,
    topic_weight: f64,
}

impl NgramBackend {
    pub fn from_corpus(text: &str, topic_weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&topic_weight) {
            return Err(Error::InvalidConfig(format!(
                "topic weight {topic_weight} outside [0, 1]"
            )));
        }
        let lines: Vec<Vec<String>> = text.lines().map(tokenize).filter(|l| !l.is_empty()).collect();
        if lines.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut vocab: Vec<String> = lines.iter().flatten().cloned().collect();
        vocab.push(UNKNOWN_TOKEN.to_string());
        vocab.sort();
        vocab.dedup();
        let mut index: HashMap<String, usize> = vocab.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        let start = vocab.len();
        index.insert(START.to_string(), start);

        let mut global = BigramCounts::default();
        let mut topics: BTreeMap<usize, BigramCounts> = BTreeMap::new();
        for line in &lines {
            let ids: Vec<usize> = std::iter::once(start).chain(line.iter().map(|t| index[t])).collect();
            let topic = topics.entry(ids[1]).or_default();
            for w in ids.windows(2) {
                global.add(w[0], w[1]);
                topic.add(w[0], w[1]);
            }
        }
        Ok(Self {
            vocab,
            index,
            start,
            global,
            topics,
            topic_weight,
        })
    }

    /// The model trained on the shipped cooking-instruction corpus.
    pub fn builtin() -> Self {
        Self::from_corpus(BUILTIN_CORPUS, DEFAULT_TOPIC_WEIGHT).expect("shipped corpus is valid")
    }

    pub fn builtin_corpus() -> &'static str {
        BUILTIN_CORPUS
    }

    pub fn order(&self) -> usize {
        2
    }

    pub fn topic_weight(&self) -> f64 {
        self.topic_weight
    }

    fn id(&self, token: &str) -> usize {
        self.index
            .get(token)
            .copied()
            .unwrap_or_else(|| self.index[UNKNOWN_TOKEN])
    }

    /// First prefix token that opens some corpus line.
    pub fn topic(&self, prefix: &[String]) -> Option<&str> {
        prefix
            .iter()
            .map(|t| self.id(t))
            .find(|id| self.topics.contains_key(id))
            .map(|id| self.vocab[id].as_str())
    }

    fn history(&self, prefix: &[String]) -> usize {
        prefix.last().map_or(self.start, |t| self.id(t))
    }

    fn prob_ids(&self, topic: Option<usize>, prev: usize, next: usize) -> f64 {
        let v = self.vocab.len();
        let g = self.global.prob(prev, next, v);
        match topic.and_then(|t| self.topics.get(&t)) {
            Some(counts) if self.topic_weight > 0.0 => {
                self.topic_weight * counts.prob(prev, next, v) + (1.0 - self.topic_weight) * g
            }
            _ => g,
        }
    }
}

impl TokenModel for NgramBackend {
    fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    fn distribution(&self, prefix: &[String]) -> Vec<f64> {
        let topic = self.topic(prefix).map(|t| self.id(t));
        let prev = self.history(prefix);
        (0..self.vocab.len()).map(|w| self.prob_ids(topic, prev, w)).collect()
    }

    fn prob(&self, prefix: &[String], token: &str) -> f64 {
        let topic = self.topic(prefix).map(|t| self.id(t));
        self.prob_ids(topic, self.history(prefix), self.id(token))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_library;
    use crate::lang::{normalized_score, rank_templates_llm, sequence_loglik};
    use crate::sim::SkillKind;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn distributions_sum_to_one_and_are_positive() {
        let m = NgramBackend::builtin();
        for prefix in ["", "to successfully wipe the plate", "stir the", "zzz unknown words"] {
            let d = m.distribution(&toks(prefix));
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(d.iter().all(|&p| p > 0.0));
            for (t, &p) in m.vocabulary().iter().zip(&d).step_by(17) {
                assert_eq!(m.prob(&toks(prefix), t), p);
            }
        }
    }

    #[test]
    fn hand_counted_bigram() {
        // vocab {<unk>, a, b, c}; bigrams <s>a, ab, bc, <s>a, ac
        let m = NgramBackend::from_corpus("a b c\na c", 0.0).unwrap();
        assert_eq!(m.vocabulary().len(), 4);
        // p(b | a) = (1 + 1) / (2 + 4), p(c | b) = (1 + 1) / (1 + 4)
        let ll = sequence_loglik(&m, &toks("a"), &toks("b c")).unwrap();
        assert!((ll - ((2.0f64 / 6.0).ln() + (2.0f64 / 5.0).ln())).abs() < 1e-12);
        // <unk> has never been seen as a history
        assert_eq!(m.prob(&toks("q"), "a"), 0.25);
    }

    #[test]
    fn topic_mixture_by_hand() {
        let m = NgramBackend::from_corpus("stir x\nwipe y\nwipe y", 0.5).unwrap();
        // vocab {<unk>, stir, wipe, x, y}
        assert_eq!(m.topic(&toks("please wipe x")), Some("wipe"));
        assert_eq!(m.topic(&toks("please x")), None);
        // topic "wipe", history "stir": globally stir -> x once, never inside wipe lines
        let g = (1.0 + 1.0) / (1.0 + 5.0);
        let t = (0.0 + 1.0) / (0.0 + 5.0);
        assert!((m.prob(&toks("wipe stir"), "x") - (0.5 * t + 0.5 * g)).abs() < 1e-12);
        assert!((m.prob(&toks("x stir"), "x") - g).abs() < 1e-12);
    }

    #[test]
    fn length_normalization_can_reorder() {
        let m = NgramBackend::builtin();
        let prompt = toks("to successfully wipe the plate with the cloth you should");
        let short = toks("move the cloth in circles");
        let long = toks("move the cloth in a long side to side motion");
        let (s_raw, l_raw) = (
            sequence_loglik(&m, &prompt, &short).unwrap(),
            sequence_loglik(&m, &prompt, &long).unwrap(),
        );
        let (s_norm, l_norm) = (
            normalized_score(&m, &prompt, &short).unwrap(),
            normalized_score(&m, &prompt, &long).unwrap(),
        );
        assert_eq!((short.len(), long.len()), (5, 10));
        assert!(s_raw > l_raw, "raw {s_raw} vs {l_raw}");
        assert!(l_norm > s_norm, "normalized {l_norm} vs {s_norm}");
    }

    #[test]
    fn wipe_prefers_surface_motions_over_pushing() {
        let m = NgramBackend::builtin();
        let lib = build_library();
        let s = rank_templates_llm(&m, &SkillKind::Wipe.label(), &lib).unwrap();
        let best_surface = [0, 3, 12, 15, 30]
            .iter()
            .map(|&id| s.get(id).unwrap())
            .fold(f64::MIN, f64::max);
        for id in 18..24 {
            assert!(best_surface > s.get(id).unwrap(), "template {id}");
        }
    }
}
