//! Synthetic question answering collections.
//!
//! Every question asks for an entity of some answer type ("What city did
//! Zorvane dakel ...?") and mentions one topic entity plus three topic words.
//! Relevant passages contain an entity of the answer type, the topic entity
//! and one topic word. Judged distractors contain all three topic words but
//! no entity of the answer type and not the topic entity, so plain word
//! overlap prefers them while type- and entity-aware scoring does not.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{write_corpus, CorpusRecord, EntityRecord, RecordKind};
use crate::eval::Qrels;
use crate::extract::{Pos, Stopwords, Token};

/// Answer types with the question words that ask for them.
const TEMPLATES: [(&str, &[&str]); 18] = [
    ("PERSON", &["Who"]),
    ("GPE", &["What", "city"]),
    ("ORG", &["Which", "company"]),
    ("DATE", &["When"]),
    ("LOC", &["Where"]),
    ("NORP", &["What", "nationality"]),
    ("FAC", &["What", "building"]),
    ("PRODUCT", &["What", "product"]),
    ("EVENT", &["What", "event"]),
    ("WORK_OF_ART", &["What", "book"]),
    ("LAW", &["Which", "law"]),
    ("LANGUAGE", &["What", "language"]),
    ("TIME", &["What", "time"]),
    ("PERCENT", &["What", "percentage"]),
    ("MONEY", &["How", "much"]),
    ("QUANTITY", &["How", "far"]),
    ("ORDINAL", &["Which", "rank"]),
    ("CARDINAL", &["How", "many"]),
];

/// Topic entities are PERSON, or GPE when the question asks for a person.
const TOPIC_TYPES: usize = 2;
const TOPIC_WORDS: usize = 3;
const NAMES_PER_TYPE: usize = 400;

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 6] = ["", "", "n", "r", "l", "s"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthParams {
    pub num_queries: usize,
    pub corpus_size: usize,
    pub num_ne_types: usize,
    pub vocab_size: usize,
    pub noise: f64,
    pub relevant_per_query: usize,
    pub distractors_per_query: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            num_queries: 200,
            corpus_size: 20_000,
            num_ne_types: 18,
            vocab_size: 5_000,
            noise: 0.1,
            relevant_per_query: 3,
            distractors_per_query: 10,
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub name: &'static str,
    pub questions: Vec<CorpusRecord>,
    pub qrels: Qrels,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub passages: Vec<CorpusRecord>,
    /// Train, dev and test, in that order.
    pub splits: Vec<Split>,
}

fn pseudo_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).unwrap());
        w.push_str(VOWELS.choose(rng).unwrap());
    }
    w.push_str(CODAS.choose(rng).unwrap());
    w
}

/// `n` distinct lowercase words not in `taken`.
fn fresh_words(rng: &mut ChaCha8Rng, n: usize, syllables: usize, taken: &mut HashSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        let extra = attempts / (n * 20 + 1000);
        let w = pseudo_word(rng, syllables + extra);
        attempts += 1;
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

struct Builder {
    tokens: Vec<Token>,
    nes: Vec<EntityRecord>,
}

impl Builder {
    fn new() -> Self {
        Self {
            tokens: Vec::new(),
            nes: Vec::new(),
        }
    }

    fn word(&mut self, w: &str, pos: Pos) {
        self.tokens.push(Token::new(w, Some(pos)));
    }

    fn entity(&mut self, name: &str, ne_type: &str) {
        let start = self.tokens.len();
        self.tokens.push(Token::new(name, Some(Pos::Noun)));
        self.nes.push(EntityRecord {
            start,
            end: start + 1,
            ne_type: ne_type.to_string(),
        });
    }

    fn record(self, id: String, kind: RecordKind) -> CorpusRecord {
        CorpusRecord::text(id, kind, &self.tokens, self.nes)
    }
}

/// A passage body: shuffled content pieces padded with filler words.
enum Piece<'a> {
    Word(&'a str),
    Entity(&'a str, &'a str),
}

fn passage<'a>(rng: &mut ChaCha8Rng, mut pieces: Vec<Piece<'a>>, vocab: &'a [String], filler: usize) -> Builder {
    for _ in 0..filler {
        pieces.push(Piece::Word(vocab.choose(rng).unwrap()));
    }
    pieces.shuffle(rng);
    let mut b = Builder::new();
    for p in pieces {
        match p {
            Piece::Word(w) => {
                let pos = if rng.gen_bool(0.6) { Pos::Noun } else { Pos::Verb };
                b.word(w, pos);
            }
            Piece::Entity(name, ty) => b.entity(name, ty),
        }
    }
    b.word(".", Pos::Other);
    b
}

/// Generates a collection; identical seeds give identical output.
pub fn synth_generate(seed: u64, params: &SynthParams) -> Result<SynthData, SynthError> {
    let p = params;
    if p.num_queries == 0 || p.corpus_size == 0 || p.vocab_size < TOPIC_WORDS {
        return Err(SynthError::Params("counts must be positive and vocab_size ≥ 3".into()));
    }
    if p.corpus_size < p.num_queries {
        return Err(SynthError::Params(format!(
            "corpus_size {} is smaller than num_queries {}",
            p.corpus_size, p.num_queries
        )));
    }
    if !(2..=TEMPLATES.len()).contains(&p.num_ne_types) {
        return Err(SynthError::Params(format!("num_ne_types must be in 2..={}", TEMPLATES.len())));
    }
    if !(0.0..=1.0).contains(&p.noise) {
        return Err(SynthError::Params("noise must be in [0, 1]".into()));
    }
    if p.relevant_per_query == 0 {
        return Err(SynthError::Params("relevant_per_query must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let templates = &TEMPLATES[..p.num_ne_types];
    let stop = Stopwords::builtin();
    let mut taken: HashSet<String> = TEMPLATES
        .iter()
        .flat_map(|(_, words)| words.iter().map(|w| w.to_lowercase()))
        .collect();
    let vocab: Vec<String> = fresh_words(&mut rng, p.vocab_size, 2, &mut taken)
        .into_iter()
        .filter(|w| !stop.contains(w))
        .collect();
    let names: Vec<Vec<String>> = templates
        .iter()
        .map(|_| {
            fresh_words(&mut rng, NAMES_PER_TYPE, 3, &mut taken)
                .iter()
                .map(|w| capitalize(w))
                .collect()
        })
        .collect();

    let budget = p.corpus_size / p.num_queries;
    let relevant_n = p.relevant_per_query.min(budget).max(1);
    let distractor_n = p.distractors_per_query.min(budget - relevant_n);
    let topic_types = TOPIC_TYPES.min(p.num_ne_types);

    let mut passages: Vec<(Builder, Option<(usize, bool)>)> = Vec::with_capacity(p.corpus_size);
    let mut questions = Vec::with_capacity(p.num_queries);
    let mut topic_used: Vec<HashSet<usize>> = vec![HashSet::new(); topic_types];

    for q in 0..p.num_queries {
        let answer_type = rng.gen_range(0..templates.len());
        let topic_type = usize::from(answer_type == 0);
        // Topic entities are unique per question while the pool lasts.
        let topic_idx = if topic_used[topic_type].len() < NAMES_PER_TYPE {
            loop {
                let i = rng.gen_range(0..NAMES_PER_TYPE);
                if topic_used[topic_type].insert(i) {
                    break i;
                }
            }
        } else {
            rng.gen_range(0..NAMES_PER_TYPE)
        };
        let topic = names[topic_type][topic_idx].as_str();
        let (answer_ty_name, wh) = templates[answer_type];
        let topic_ty_name = templates[topic_type].0;
        let words: Vec<&str> = vocab
            .choose_multiple(&mut rng, TOPIC_WORDS)
            .map(String::as_str)
            .collect();

        let mut qb = Builder::new();
        for (i, w) in wh.iter().enumerate() {
            let lat = i > 0 && wh[0] != "How";
            qb.word(w, if lat { Pos::Noun } else { Pos::Other });
        }
        qb.word("did", Pos::Verb);
        qb.entity(topic, topic_ty_name);
        for w in &words {
            qb.word(w, Pos::Verb);
        }
        qb.word("?", Pos::Other);
        questions.push(qb.record(format!("q{q:04}"), RecordKind::Question));

        for _ in 0..relevant_n {
            let answer = names[answer_type].choose(&mut rng).unwrap();
            let entity = if rng.gen_bool(p.noise) {
                names[topic_type]
                    .iter()
                    .filter(|n| n.as_str() != topic)
                    .collect::<Vec<_>>()
                    .choose(&mut rng)
                    .map(|s| s.as_str())
                    .unwrap()
            } else {
                topic
            };
            let pieces = vec![
                Piece::Entity(answer, answer_ty_name),
                Piece::Entity(entity, topic_ty_name),
                Piece::Word(words.choose(&mut rng).unwrap()),
            ];
            let filler = rng.gen_range(6..10);
            passages.push((passage(&mut rng, pieces, &vocab, filler), Some((q, true))));
        }
        for _ in 0..distractor_n {
            let mut pieces: Vec<Piece> = words.iter().map(|w| Piece::Word(w)).collect();
            let other = loop {
                let t = rng.gen_range(0..templates.len());
                if t != answer_type {
                    break t;
                }
            };
            let name = names[other]
                .iter()
                .filter(|n| n.as_str() != topic)
                .collect::<Vec<_>>()
                .choose(&mut rng)
                .map(|s| s.as_str())
                .unwrap();
            pieces.push(Piece::Entity(name, templates[other].0));
            let filler = rng.gen_range(5..9);
            passages.push((passage(&mut rng, pieces, &vocab, filler), Some((q, false))));
        }
    }

    while passages.len() < p.corpus_size {
        let mut pieces = Vec::new();
        if rng.gen_bool(0.3) {
            let t = rng.gen_range(0..templates.len());
            pieces.push(Piece::Entity(names[t].choose(&mut rng).unwrap(), templates[t].0));
        }
        let filler = rng.gen_range(8..14);
        passages.push((passage(&mut rng, pieces, &vocab, filler), None));
    }
    passages.shuffle(&mut rng);

    let mut order: Vec<usize> = (0..p.num_queries).collect();
    order.shuffle(&mut rng);
    let n_train = (p.num_queries * 3).div_ceil(5);
    let n_dev = (p.num_queries - n_train) / 2;
    let mut split_of = vec![0usize; p.num_queries];
    for (rank, &q) in order.iter().enumerate() {
        split_of[q] = if rank < n_train {
            0
        } else if rank < n_train + n_dev {
            1
        } else {
            2
        };
    }

    let mut splits: Vec<Split> = ["train", "dev", "test"]
        .into_iter()
        .map(|name| Split {
            name,
            questions: Vec::new(),
            qrels: Qrels::default(),
        })
        .collect();
    let mut records = Vec::with_capacity(passages.len());
    for (i, (builder, judged)) in passages.into_iter().enumerate() {
        let id = format!("p{i:05}");
        if let Some((q, relevant)) = judged {
            let qid = questions[q].id.clone();
            splits[split_of[q]]
                .qrels
                .insert(&qid, &id, relevant)
                .expect("passage ids are unique");
        }
        records.push(builder.record(id, RecordKind::Passage));
    }
    for (q, question) in questions.into_iter().enumerate() {
        splits[split_of[q]].questions.push(question);
    }
    for s in &mut splits {
        s.questions.sort_by(|a, b| a.id.cmp(&b.id));
    }
    Ok(SynthData {
        passages: records,
        splits,
    })
}

pub const CORPUS_FILE: &str = "corpus.jsonl";

pub fn questions_file(split: &str) -> String {
    format!("questions.{split}.jsonl")
}

pub fn qrels_file(split: &str) -> String {
    format!("qrels.{split}.txt")
}

impl SynthData {
    /// Writes `corpus.jsonl`, `questions.<split>.jsonl` and `qrels.<split>.txt`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        write_corpus(BufWriter::new(File::create(dir.join(CORPUS_FILE))?), &self.passages)?;
        for s in &self.splits {
            write_corpus(
                BufWriter::new(File::create(dir.join(questions_file(s.name)))?),
                &s.questions,
            )?;
            s.qrels.write(BufWriter::new(File::create(dir.join(qrels_file(s.name)))?))?;
        }
        Ok(())
    }

    pub fn split(&self, name: &str) -> Option<&Split> {
        self.splits.iter().find(|s| s.name == name)
    }
}
