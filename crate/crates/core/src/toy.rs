//! A synthetic language pair for experiments. Target sentences come from
//! a small template grammar; the source is the target reversed with every
//! word replaced through a fixed bijective lexicon. Verbs are optionally
//! followed by a target-only particle, with a verb-specific probability,
//! so the target is not a function of the source.

use crate::corpus::SentencePair;
use crate::rng::{derive_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WordClass {
    Det,
    Noun,
    Verb,
    Adj,
    Prep,
    Adv,
}

use WordClass::*;

const CLASS_SIZES: [(WordClass, usize); 6] =
    [(Det, 4), (Noun, 16), (Verb, 12), (Adj, 10), (Prep, 4), (Adv, 4)];

const TEMPLATES: [&[WordClass]; 8] = [
    &[Det, Noun, Verb],
    &[Det, Noun, Verb, Det, Noun],
    &[Det, Adj, Noun, Verb, Det, Noun],
    &[Det, Noun, Verb, Prep, Det, Noun],
    &[Det, Noun, Adv, Verb, Det, Adj, Noun],
    &[Det, Adj, Noun, Verb, Prep, Det, Adj, Noun],
    &[Prep, Det, Noun, Det, Noun, Verb],
    &[Det, Noun, Verb, Adv],
];

/// Which half of the content lexicon a sentence may draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Any,
    A,
    B,
}

#[derive(Debug, Clone)]
struct Entry {
    class: WordClass,
    target: String,
    source: String,
    /// Zipfian weight within the class.
    weight: f64,
    /// 0 or 1 for content words; function words are shared.
    half: Option<u8>,
}

/// Target-only words; never part of the lexicon.
pub const PARTICLES: [&str; 3] = ["ca", "fe", "vo"];

#[derive(Debug, Clone)]
pub struct ToyLanguage {
    entries: Vec<Entry>,
    /// Per entry: `(particle index, probability)` for verbs.
    particle: Vec<Option<(usize, f64)>>,
}

fn make_word(rng: &mut Rng, onsets: &[&str], vowels: &[&str], codas: &[&str]) -> String {
    let syllables = 1 + rng.below(3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(onsets[rng.below(onsets.len())]);
        w.push_str(vowels[rng.below(vowels.len())]);
    }
    if rng.bernoulli(0.4) {
        w.push_str(codas[rng.below(codas.len())]);
    }
    w
}

fn distinct_words(
    rng: &mut Rng,
    n: usize,
    onsets: &[&str],
    vowels: &[&str],
    codas: &[&str],
) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(n);
    while out.len() < n {
        let w = make_word(rng, onsets, vowels, codas);
        if !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

impl ToyLanguage {
    /// The 50-word language used throughout; fixed for a given `seed`.
    pub fn new(seed: u64) -> Self {
        let mut rng = Rng::new(derive_seed(seed, "toy-lexicon"));
        let total: usize = CLASS_SIZES.iter().map(|(_, n)| n).sum();
        let targets = distinct_words(
            &mut rng,
            total,
            &["p", "t", "k", "m", "n", "s", "l", "r"],
            &["a", "e", "i", "o", "u"],
            &["n", "s", "t"],
        );
        let sources = distinct_words(
            &mut rng,
            total,
            &["b", "d", "g", "v", "z", "h", "w", "j"],
            &["a", "o", "u", "y", "ae"],
            &["x", "q", "f"],
        );
        let mut entries = Vec::with_capacity(total);
        let mut k = 0;
        for (class, n) in CLASS_SIZES {
            let content = matches!(class, Noun | Verb | Adj | Adv);
            for rank in 0..n {
                entries.push(Entry {
                    class,
                    target: targets[k].clone(),
                    source: sources[k].clone(),
                    weight: 1.0 / (rank / 2 + 1) as f64,
                    half: content.then_some((rank % 2) as u8),
                });
                k += 1;
            }
        }
        let mut verb = 0;
        let particle = entries
            .iter()
            .map(|e| {
                (e.class == Verb).then(|| {
                    verb += 1;
                    let q = if verb % 2 == 0 { 0.8 } else { 0.2 };
                    (verb % PARTICLES.len(), q)
                })
            })
            .collect();
        ToyLanguage { entries, particle }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn target_words(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.target.as_str()).collect()
    }

    pub fn source_words(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.source.as_str()).collect()
    }

    fn pick(&self, class: WordClass, domain: Domain, rng: &mut Rng) -> usize {
        let allowed = |e: &&Entry| {
            e.class == class
                && match (domain, e.half) {
                    (Domain::Any, _) | (_, None) => true,
                    (Domain::A, Some(h)) => h == 0,
                    (Domain::B, Some(h)) => h == 1,
                }
        };
        let candidates: Vec<usize> = (0..self.entries.len())
            .filter(|&i| allowed(&&self.entries[i]))
            .collect();
        let total: f64 = candidates.iter().map(|&i| self.entries[i].weight).sum();
        let mut x = rng.uniform() * total;
        for &i in &candidates {
            x -= self.entries[i].weight;
            if x < 0.0 {
                return i;
            }
        }
        *candidates.last().expect("every class has words")
    }

    pub fn sample_target(&self, domain: Domain, rng: &mut Rng) -> Vec<String> {
        let template = TEMPLATES[rng.below(TEMPLATES.len())];
        let mut out = Vec::with_capacity(template.len() + 1);
        for &c in template {
            let i = self.pick(c, domain, rng);
            out.push(self.entries[i].target.clone());
            if let Some((p, q)) = self.particle[i] {
                if rng.bernoulli(q) {
                    out.push(PARTICLES[p].to_string());
                }
            }
        }
        out
    }

    /// Source-side rendering of a target sentence: particles dropped, the
    /// rest reversed and substituted. Unknown words pass through unchanged.
    pub fn to_source<S: AsRef<str>>(&self, target: &[S]) -> Vec<String> {
        target
            .iter()
            .rev()
            .filter(|w| !PARTICLES.contains(&w.as_ref()))
            .map(|w| {
                let w = w.as_ref();
                self.entries
                    .iter()
                    .find(|e| e.target == w)
                    .map_or_else(|| w.to_string(), |e| e.source.clone())
            })
            .collect()
    }

    pub fn sample_pair(&self, domain: Domain, rng: &mut Rng) -> SentencePair {
        let target = self.sample_target(domain, rng);
        SentencePair::parallel(self.to_source(&target), target)
    }
}

/// Parallel, monolingual and held-out data drawn from one language.
#[derive(Debug, Clone)]
pub struct ToyCorpus {
    pub parallel: Vec<SentencePair>,
    pub mono: Vec<String>,
    pub dev: Vec<SentencePair>,
}

impl ToyCorpus {
    pub fn generate(
        lang: &ToyLanguage,
        domain: Domain,
        n_parallel: usize,
        n_mono: usize,
        n_dev: usize,
        seed: u64,
    ) -> Self {
        let mut rng = Rng::new(derive_seed(seed, "toy-parallel"));
        let parallel = (0..n_parallel).map(|_| lang.sample_pair(domain, &mut rng)).collect();
        let mut rng = Rng::new(derive_seed(seed, "toy-mono"));
        let mono = (0..n_mono)
            .map(|_| lang.sample_target(domain, &mut rng).join(" "))
            .collect();
        let mut rng = Rng::new(derive_seed(seed, "toy-dev"));
        let dev = (0..n_dev).map(|_| lang.sample_pair(domain, &mut rng)).collect();
        ToyCorpus { parallel, mono, dev }
    }

    pub fn source_lines(pairs: &[SentencePair]) -> Vec<String> {
        pairs.iter().map(|p| p.source.join(" ")).collect()
    }

    pub fn target_lines(pairs: &[SentencePair]) -> Vec<String> {
        pairs.iter().map(|p| p.target.join(" ")).collect()
    }
}
