//! Skip-gram with negative sampling over walk sequences.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alias::AliasTable;
use crate::error::{Error, Result};
use crate::walk::{splitmix64, WalkCorpus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgnsParams {
    pub dims: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial learning rate; decays linearly to `lr0 / 10`.
    pub lr0: f64,
    pub seed: u64,
    pub unigram_power: f64,
    /// 1 runs the deterministic serial trainer; more shards walks across
    /// workers with unsynchronized updates.
    pub threads: usize,
}

impl Default for SgnsParams {
    fn default() -> Self {
        SgnsParams {
            dims: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr0: 0.025,
            seed: 0,
            unigram_power: 0.75,
            threads: 1,
        }
    }
}

impl SgnsParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.dims < 1 {
            return bad("dims must be >= 1");
        }
        if self.window < 1 {
            return bad("window must be >= 1");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad("learning rate must be > 0");
        }
        if !self.unigram_power.is_finite() {
            return bad("unigram power must be finite");
        }
        if self.threads < 1 {
            return bad("threads must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Vocab {
    /// Tokens in dense-index order: descending frequency, ties lexicographic.
    pub tokens: Vec<String>,
    pub counts: Vec<u64>,
    pub index: HashMap<String, usize>,
    /// Noise distribution, proportional to count^power.
    pub noise: Vec<f64>,
}

pub fn build_vocab(corpus: &WalkCorpus, unigram_power: f64) -> Result<Vocab> {
    let mut counts = vec![0u64; corpus.ids.len()];
    for walk in &corpus.walks {
        for &t in walk {
            counts[t as usize] += 1;
        }
    }
    let mut order: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
    if order.is_empty() {
        return Err(Error::EmptyInput("walk corpus has no tokens".into()));
    }
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then_with(|| corpus.ids[a].cmp(&corpus.ids[b])));
    let tokens: Vec<String> = order.iter().map(|&i| corpus.ids[i].clone()).collect();
    let counts: Vec<u64> = order.iter().map(|&i| counts[i]).collect();
    let raw: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(unigram_power)).collect();
    let total: f64 = raw.iter().sum();
    let noise = raw.iter().map(|r| r / total).collect();
    let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(Vocab {
        tokens,
        counts,
        index,
        noise,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `-ln σ(x)`, stable for large |x|.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// SGNS loss for one (center, context) pair and its negatives:
/// `-ln σ(u·v) - Σ ln σ(-u·n_i)`.
pub fn pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    neg_log_sigmoid(dot(center, context))
        + negatives
            .iter()
            .map(|n| neg_log_sigmoid(-dot(center, n)))
            .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Loss and its analytic gradient with respect to every input vector.
pub fn pair_loss_grad(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairGradient {
    let d = center.len();
    let mut g_center = vec![0.0; d];
    // d/dx -ln σ(x) = σ(x) - 1
    let s = sigmoid(dot(center, context)) - 1.0;
    for i in 0..d {
        g_center[i] += s * context[i];
    }
    let g_context = center.iter().map(|u| s * u).collect();
    // d/dx -ln σ(-x) = σ(x)
    let g_neg = negatives
        .iter()
        .map(|n| {
            let s = sigmoid(dot(center, n));
            for i in 0..d {
                g_center[i] += s * n[i];
            }
            center.iter().map(|u| s * u).collect()
        })
        .collect();
    PairGradient {
        loss: pair_loss(center, context, negatives),
        center: g_center,
        context: g_context,
        negatives: g_neg,
    }
}

/// Row-major f64 matrix whose cells tolerate concurrent unsynchronized
/// updates. Single-threaded use is fully deterministic.
struct SharedMatrix {
    cells: Vec<AtomicU64>,
    width: usize,
}

impl SharedMatrix {
    fn from_vec(data: Vec<f64>, width: usize) -> Self {
        SharedMatrix {
            cells: data.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
            width,
        }
    }

    fn read_row(&self, row: usize, out: &mut [f64]) {
        let base = row * self.width;
        for (o, c) in out.iter_mut().zip(&self.cells[base..base + self.width]) {
            *o = f64::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn add_row(&self, row: usize, delta: &[f64], scale: f64) {
        let base = row * self.width;
        for (c, d) in self.cells[base..base + self.width].iter().zip(delta) {
            let v = f64::from_bits(c.load(Ordering::Relaxed)) + scale * d;
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_vec(self) -> Vec<f64> {
        self.cells
            .into_iter()
            .map(|c| f64::from_bits(c.into_inner()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub dims: usize,
    /// Token ids in row order.
    pub ids: Vec<String>,
    pub index: HashMap<String, usize>,
    /// Published vectors (center side).
    pub input: Vec<f64>,
    /// Context side; empty when loaded from a published file.
    pub output: Vec<f64>,
    pub params: Option<SgnsParams>,
}

impl EmbeddingMatrix {
    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let dims = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dims) {
            return Err(Error::parse("embedding", "rows have differing widths"));
        }
        if ids.len() != rows.len() {
            return Err(Error::parse("embedding", "id count does not match row count"));
        }
        let index: HashMap<String, usize> = ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        if index.len() != ids.len() {
            return Err(Error::parse("embedding", "duplicate concept id"));
        }
        Ok(EmbeddingMatrix {
            dims,
            ids,
            index,
            input: rows.into_iter().flatten().collect(),
            output: Vec::new(),
            params: None,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn vector(&self, row: usize) -> &[f64] {
        &self.input[row * self.dims..(row + 1) * self.dims]
    }

    pub fn context_vector(&self, row: usize) -> &[f64] {
        &self.output[row * self.dims..(row + 1) * self.dims]
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&r| self.vector(r))
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|x| x.is_finite())
    }

    /// Mean SGNS loss over fixed (center, context, negatives) index triples.
    pub fn mean_loss(&self, samples: &[TrainingSample]) -> f64 {
        let total: f64 = samples
            .iter()
            .map(|s| {
                let negs: Vec<&[f64]> = s.negatives.iter().map(|&n| self.context_vector(n)).collect();
                pair_loss(self.vector(s.center), self.context_vector(s.context), &negs)
            })
            .sum();
        total / samples.len().max(1) as f64
    }
}

/// One positive pair with its negatives, as dense vocab indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSample {
    pub center: usize,
    pub context: usize,
    pub negatives: Vec<usize>,
}

/// Draws `count` training samples the way the trainer would, for monitoring.
pub fn sample_pairs(corpus: &WalkCorpus, vocab: &Vocab, params: &SgnsParams, count: usize, seed: u64) -> Vec<TrainingSample> {
    let sentences = encode(corpus, vocab);
    let noise = AliasTable::new(&vocab.noise).expect("vocab is non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<(usize, usize)> = sentences
        .iter()
        .enumerate()
        .flat_map(|(s, w)| (0..w.len()).map(move |p| (s, p)))
        .filter(|&(s, _)| sentences[s].len() > 1)
        .collect();
    let mut out = Vec::with_capacity(count);
    while out.len() < count && !positions.is_empty() {
        let (s, p) = positions[rng.gen_range(0..positions.len())];
        let sent = &sentences[s];
        let b = rng.gen_range(1..=params.window);
        let lo = p.saturating_sub(b);
        let hi = (p + b).min(sent.len() - 1);
        let choices: Vec<usize> = (lo..=hi).filter(|&c| c != p).collect();
        let ctx = sent[choices[rng.gen_range(0..choices.len())]];
        let negatives = (0..params.negatives).map(|_| noise.sample(&mut rng)).collect();
        out.push(TrainingSample {
            center: sent[p],
            context: ctx,
            negatives,
        });
    }
    out
}

fn encode(corpus: &WalkCorpus, vocab: &Vocab) -> Vec<Vec<usize>> {
    let remap: Vec<Option<usize>> = corpus.ids.iter().map(|id| vocab.index.get(id).copied()).collect();
    corpus
        .walks
        .iter()
        .map(|w| w.iter().filter_map(|&t| remap[t as usize]).collect())
        .collect()
}

struct Trainer<'a> {
    params: &'a SgnsParams,
    noise: AliasTable,
    input: SharedMatrix,
    output: SharedMatrix,
    total_tokens: u64,
}

impl Trainer<'_> {
    fn lr(&self, processed: u64) -> f64 {
        let lr0 = self.params.lr0;
        let progress = (processed as f64 / self.total_tokens.max(1) as f64).min(1.0);
        lr0 - (lr0 - lr0 / 10.0) * progress
    }

    /// One pass over `sentences`; `processed` is the global token counter
    /// at the start of this shard.
    fn run_sentences(&self, sentences: &[Vec<usize>], mut processed: u64, rng: &mut ChaCha8Rng) {
        let d = self.params.dims;
        let mut center = vec![0.0; d];
        let mut target = vec![0.0; d];
        let mut grad = vec![0.0; d];
        for sent in sentences {
            for p in 0..sent.len() {
                let lr = self.lr(processed);
                processed += 1;
                let b = rng.gen_range(1..=self.params.window);
                let lo = p.saturating_sub(b);
                let hi = (p + b).min(sent.len() - 1);
                for c in lo..=hi {
                    if c == p {
                        continue;
                    }
                    let (u_row, ctx_row) = (sent[p], sent[c]);
                    self.input.read_row(u_row, &mut center);
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=self.params.negatives {
                        let (row, label) = if k == 0 {
                            (ctx_row, 1.0)
                        } else {
                            let n = self.noise.sample(rng);
                            if n == ctx_row {
                                continue;
                            }
                            (n, 0.0)
                        };
                        self.output.read_row(row, &mut target);
                        let g = (label - sigmoid(dot(&center, &target))) * lr;
                        for i in 0..d {
                            grad[i] += g * target[i];
                        }
                        self.output.add_row(row, &center, g);
                    }
                    self.input.add_row(u_row, &grad, 1.0);
                }
            }
        }
    }
}

/// Trains embeddings. `on_epoch` sees the model after each completed epoch.
pub fn train_with<F>(corpus: &WalkCorpus, params: &SgnsParams, mut on_epoch: F) -> Result<EmbeddingMatrix>
where
    F: FnMut(usize, &EmbeddingMatrix),
{
    params.validate()?;
    let vocab = build_vocab(corpus, params.unigram_power)?;
    let sentences: Vec<Vec<usize>> = encode(corpus, &vocab)
        .into_iter()
        .filter(|s| s.len() > 1)
        .collect();
    if sentences.is_empty() {
        return Err(Error::EmptyInput(
            "no walk has two or more nodes; nothing to train on".into(),
        ));
    }
    let n = vocab.tokens.len();
    let d = params.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let half = 0.5 / d as f64;
    let input: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-half..half)).collect();

    let epoch_tokens: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    let trainer = Trainer {
        params,
        noise: AliasTable::new(&vocab.noise).expect("vocab is non-empty"),
        input: SharedMatrix::from_vec(input, d),
        output: SharedMatrix::from_vec(vec![0.0; n * d], d),
        total_tokens: epoch_tokens * params.epochs as u64,
    };

    let snapshot = |t: &Trainer| {
        let read = |m: &SharedMatrix| {
            m.cells
                .iter()
                .map(|c| f64::from_bits(c.load(Ordering::Relaxed)))
                .collect::<Vec<_>>()
        };
        EmbeddingMatrix {
            dims: d,
            ids: vocab.tokens.clone(),
            index: vocab.index.clone(),
            input: read(&t.input),
            output: read(&t.output),
            params: Some(params.clone()),
        }
    };

    for epoch in 0..params.epochs {
        let start = epoch_tokens * epoch as u64;
        if params.threads <= 1 {
            trainer.run_sentences(&sentences, start, &mut rng);
        } else {
            let shard = sentences.len().div_ceil(params.threads);
            let base = rng.gen::<u64>();
            sentences
                .par_chunks(shard)
                .enumerate()
                .for_each(|(i, chunk)| {
                    let offset: u64 = sentences[..i * shard].iter().map(|s| s.len() as u64).sum();
                    let mut local = ChaCha8Rng::seed_from_u64(splitmix64(base ^ i as u64));
                    trainer.run_sentences(chunk, start + offset, &mut local);
                });
        }
        let model = snapshot(&trainer);
        if !model.is_finite() {
            return Err(Error::NonFinite { iteration: epoch + 1 });
        }
        on_epoch(epoch + 1, &model);
    }

    Ok(EmbeddingMatrix {
        dims: d,
        ids: vocab.tokens,
        index: vocab.index,
        input: trainer.input.into_vec(),
        output: trainer.output.into_vec(),
        params: Some(params.clone()),
    })
}

pub fn train(corpus: &WalkCorpus, params: &SgnsParams) -> Result<EmbeddingMatrix> {
    train_with(corpus, params, |_, _| {})
}
