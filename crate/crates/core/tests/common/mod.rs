//! Shared test helpers: random corpora, an index-free reference scorer and a
//! numerical integrator used as an independent oracle.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use lit_core::analysis::AnalyzerConfig;
use lit_core::index::{build_index, Index};
use lit_core::scoring::ScorerKind;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

/// Tokenised corpus kept alongside the index built from it.
pub struct Corpus {
    pub docs: Vec<(String, Vec<String>)>,
    pub vocab: Vec<String>,
}

impl Corpus {
    pub fn index(&self) -> Index {
        build_index(
            self.docs
                .iter()
                .map(|(id, toks)| (id.clone(), toks.join(" "))),
            &AnalyzerConfig::plain(),
        )
        .expect("generated ids are unique")
    }
}

/// Random corpus with Zipf-like term frequencies. Some documents are empty.
pub fn random_corpus<R: Rng>(rng: &mut R, max_docs: usize, max_vocab: usize) -> Corpus {
    let n_docs = rng.gen_range(1..=max_docs);
    let v = rng.gen_range(1..=max_vocab);
    let vocab: Vec<String> = (0..v).map(|i| format!("w{i}")).collect();
    let weights: Vec<f64> = (1..=v).map(|r| 1.0 / r as f64).collect();
    let zipf = WeightedIndex::new(&weights).unwrap();
    let docs = (0..n_docs)
        .map(|d| {
            let len = if rng.gen_bool(0.05) {
                0
            } else {
                rng.gen_range(1..=40)
            };
            let toks = (0..len).map(|_| vocab[zipf.sample(rng)].clone()).collect();
            (format!("doc{d:03}"), toks)
        })
        .collect();
    Corpus { docs, vocab }
}

/// Random query of 1-6 tokens; repeats are likely and about one token in ten
/// is outside the vocabulary.
pub fn random_query<R: Rng>(rng: &mut R, c: &Corpus) -> Vec<String> {
    let n = rng.gen_range(1..=6);
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.1) {
                format!("zz{}", rng.gen_range(0..3))
            } else {
                let i = rng.gen_range(0..c.vocab.len().min(30));
                c.vocab[i].clone()
            }
        })
        .collect()
}

pub fn g(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (1.0 - p.ln())
    }
}

/// Collection statistics recomputed from raw tokens.
pub struct Stats<'a> {
    corpus: &'a Corpus,
    n: f64,
    l: f64,
    avgdl: f64,
    df: BTreeMap<&'a str, f64>,
    cf: BTreeMap<&'a str, f64>,
    tf: Vec<BTreeMap<&'a str, f64>>,
}

impl<'a> Stats<'a> {
    pub fn new(corpus: &'a Corpus) -> Self {
        let mut df = BTreeMap::new();
        let mut cf = BTreeMap::new();
        let mut l = 0.0;
        for (_, toks) in &corpus.docs {
            l += toks.len() as f64;
            let uniq: BTreeSet<&str> = toks.iter().map(String::as_str).collect();
            for t in uniq {
                *df.entry(t).or_insert(0.0) += 1.0;
            }
            for t in toks {
                *cf.entry(t.as_str()).or_insert(0.0) += 1.0;
            }
        }
        let tf = corpus
            .docs
            .iter()
            .map(|(_, toks)| {
                let mut m = BTreeMap::new();
                for t in toks {
                    *m.entry(t.as_str()).or_insert(0.0) += 1.0;
                }
                m
            })
            .collect();
        let n = corpus.docs.len() as f64;
        Self {
            corpus,
            n,
            l,
            avgdl: if n > 0.0 { l / n } else { 0.0 },
            df,
            cf,
            tf,
        }
    }

    fn tf(&self, d: usize, t: &str) -> f64 {
        self.tf[d].get(t).copied().unwrap_or(0.0)
    }

    fn len(&self, d: usize) -> f64 {
        self.corpus.docs[d].1.len() as f64
    }

    fn p_td(&self, d: usize, t: &str) -> f64 {
        let len = self.len(d);
        if len == 0.0 {
            0.0
        } else {
            self.tf(d, t) / len
        }
    }

    fn lib(&self, d: usize, t: &str) -> f64 {
        let present = if self.tf(d, t) > 0.0 { 1.0 } else { 0.0 };
        present - g(self.df[t] / self.n)
    }

    fn lif(&self, d: usize, t: &str) -> f64 {
        g(self.p_td(d, t)) - g(self.cf[t] / self.l)
    }

    fn lib2(&self, d: usize, t: &str) -> f64 {
        let p = if self.tf(d, t) > 0.0 { 1.0 } else { 0.0 };
        let pc = self.df[t] / self.n;
        g(p) - g(pc) - g(1.0 - p) - g(1.0 - pc)
    }

    fn lif2(&self, d: usize, t: &str) -> f64 {
        let p = self.p_td(d, t);
        let pc = self.cf[t] / self.l;
        g(p) - g(pc) + g(1.0 - pc) - g(1.0 - p)
    }

    fn term_score(&self, kind: ScorerKind, d: usize, t: &str, b: f64, k1: f64) -> f64 {
        let tf = self.tf(d, t);
        let df = self.df[t];
        match kind {
            ScorerKind::Lib => self.lib(d, t),
            ScorerKind::Lif => self.lif(d, t),
            ScorerKind::Lib2 => self.lib2(d, t),
            ScorerKind::Lif2 => self.lif2(d, t),
            ScorerKind::LibPlusLif => self.lib(d, t) + self.lif(d, t),
            ScorerKind::LibTimesLif => (self.lib(d, t) + 1.0) * (self.lif(d, t) + 1.0),
            ScorerKind::TfIdf => tf * (self.n / df).ln(),
            ScorerKind::TfNIdf => self.p_td(d, t) * (self.n / df).ln(),
            ScorerKind::Bm25 => {
                if tf == 0.0 {
                    return 0.0;
                }
                let idf = ((self.n - df + 0.5) / (df + 0.5)).ln();
                idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * self.len(d) / self.avgdl))
            }
            ScorerKind::LiCos => unreachable!(),
        }
    }

    fn licos(&self, d: usize, query: &[String]) -> f64 {
        let doc_terms: BTreeSet<&str> = self.tf[d].keys().copied().collect();
        let w = |t: &str| self.lib(d, t) + self.lif(d, t);
        let norm_d = doc_terms.iter().map(|t| w(t).powi(2)).sum::<f64>().sqrt();
        let q: BTreeSet<&str> = query
            .iter()
            .map(String::as_str)
            .filter(|t| self.df.contains_key(t))
            .collect();
        let dot: f64 = q
            .iter()
            .filter(|t| doc_terms.contains(*t))
            .map(|t| w(t))
            .sum();
        let norm_q = (q.len() as f64).sqrt();
        if dot == 0.0 || norm_d == 0.0 || norm_q == 0.0 {
            0.0
        } else {
            dot / (norm_d * norm_q)
        }
    }

    /// Reference score of document `d` (corpus position) for `query`.
    pub fn score(&self, kind: ScorerKind, d: usize, query: &[String], b: f64, k1: f64) -> f64 {
        if kind == ScorerKind::LiCos {
            return self.licos(d, query);
        }
        query
            .iter()
            .filter(|t| self.df.contains_key(t.as_str()))
            .map(|t| self.term_score(kind, d, t, b, k1))
            .sum()
    }

    /// Documents containing at least one query term.
    pub fn matches(&self, query: &[String]) -> BTreeSet<String> {
        self.corpus
            .docs
            .iter()
            .filter(|(_, toks)| toks.iter().any(|t| query.contains(t)))
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Number of query tokens (with multiplicity) occurring in document `d`.
    pub fn coordination(&self, d: usize, query: &[String]) -> usize {
        query
            .iter()
            .filter(|t| self.corpus.docs[d].1.contains(t))
            .count()
    }
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_2,
    0.063_092_092_629_979_0,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod 7-15 panel: returns (Kronrod estimate, error estimate).
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let pair = f(c - x) + f(c + x);
        kronrod += GK_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (est, err) = gk15(f, a, b);
    if err <= tol || depth == 0 || (b - a).abs() < 1e-15 {
        return est;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, tol / 2.0, depth - 1) + adaptive(f, m, b, tol / 2.0, depth - 1)
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -integrate(f, b, a, tol);
    }
    adaptive(f, a, b, tol, 60)
}

/// `|∫_x^y -ln p dp|` evaluated numerically.
pub fn li_by_quadrature(x: f64, y: f64) -> f64 {
    integrate(&|p: f64| -p.ln(), x, y, 1e-12).abs()
}

/// Random probability vector of length `n`, sometimes with exact zeros and
/// occasionally a point mass.
pub fn random_dist<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    if rng.gen_bool(0.05) {
        let mut v = vec![0.0; n];
        v[rng.gen_range(0..n)] = 1.0;
        return v;
    }
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.15) {
                0.0
            } else {
                rng.gen::<f64>()
            }
        })
        .collect();
    let s: f64 = v.iter().sum();
    if s == 0.0 {
        v[0] = 1.0;
        return v;
    }
    v.iter_mut().for_each(|x| *x /= s);
    v
}
