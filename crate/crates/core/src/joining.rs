//! The self-joining `Gamma = (rho_1 x ... x rho_k)(F_g)`: per-word tuples of
//! isometries, Cartan vectors, and orbit enumeration.
//!
//! Enumeration walks the reduced-word prefix tree with one matrix product per
//! node per factor, re-orthonormalizing any matrix whose Lorentz-form defect
//! exceeds the trigger. Subtrees below a fixed prefix depth are traversed in
//! parallel and merged back in prefix order, so the record stream is
//! byte-identical across runs and worker counts. Records are stored
//! column-wise ([`Orbit`]); [`OrbitRecordRef`] is the per-record view the
//! estimators consume.

use crate::group::{evaluate, word_fixed_data, GroupError, SchottkyRep, Word};
use crate::hyperbolic::{GeomError, Isometry, REORTH_TRIGGER};
use rayon::prelude::*;
use std::io::{BufRead, BufReader, BufWriter, Read, Write as IoWrite};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("group error: {0}")]
    Group(#[from] GroupError),
    #[error("joining needs at least one factor")]
    EmptyJoining,
    #[error("factors disagree on generator count: {0:?}")]
    GeneratorMismatch(Vec<usize>),
    #[error("word {word} is not loxodromic in factor {factor}: {source}")]
    NotLoxodromic { word: String, factor: usize, source: GeomError },
    #[error("fixed-point data failed for word {word} in factor {factor}: {source}")]
    JordanFailure { word: String, factor: usize, source: GroupError },
    #[error(
        "record budget {budget} exceeded; partial orbit carries all {got} records of length <= {complete_len}"
    )]
    Budget { budget: usize, got: usize, complete_len: usize, partial: Box<Orbit> },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache hash mismatch: cache built for {found}, current config is {expected}")]
    CacheHashMismatch { expected: String, found: String },
    #[error("malformed orbit cache: {0}")]
    CacheFormat(String),
}

/// The tuple of Schottky representations defining the self-joining.
#[derive(Debug, Clone)]
pub struct SelfJoining {
    factors: Vec<SchottkyRep>,
    labels: Vec<String>,
}

impl SelfJoining {
    pub fn new(factors: Vec<SchottkyRep>, labels: Vec<String>) -> Result<Self, OrbitError> {
        if factors.is_empty() {
            return Err(OrbitError::EmptyJoining);
        }
        let gens: Vec<usize> = factors.iter().map(|f| f.generators()).collect();
        if gens.windows(2).any(|w| w[0] != w[1]) {
            return Err(OrbitError::GeneratorMismatch(gens));
        }
        let labels = if labels.len() == factors.len() {
            labels
        } else {
            (0..factors.len()).map(|i| format!("factor{}", i + 1)).collect()
        };
        Ok(SelfJoining { factors, labels })
    }

    pub fn k(&self) -> usize {
        self.factors.len()
    }

    pub fn generators(&self) -> usize {
        self.factors[0].generators()
    }

    pub fn factor(&self, i: usize) -> &SchottkyRep {
        &self.factors[i]
    }

    pub fn factors(&self) -> &[SchottkyRep] {
        &self.factors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn factor_dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.factor_dim()).collect()
    }
}

/// `min_i mu_i`.
pub fn min_mu(mu: &[f64]) -> f64 {
    mu.iter().copied().fold(f64::INFINITY, f64::min)
}

/// A linear functional applied to a Cartan vector.
pub fn linear_mu(coeffs: &[f64], mu: &[f64]) -> f64 {
    debug_assert_eq!(coeffs.len(), mu.len());
    coeffs.iter().zip(mu).map(|(c, m)| c * m).sum()
}

/// Euclidean norm of a Cartan vector; equals `d(gamma o, o)` in the product
/// metric.
pub fn mu_norm(mu: &[f64]) -> f64 {
    mu.iter().map(|m| m * m).sum::<f64>().sqrt()
}

/// Cartan vector of a word: per-factor displacement `d_i(o, rho_i(w) o)`.
pub fn cartan(joining: &SelfJoining, w: &Word) -> Result<Vec<f64>, GroupError> {
    let mut out = Vec::with_capacity(joining.k());
    for rep in &joining.factors {
        let m = evaluate(rep, w)?;
        let n = rep.factor_dim();
        out.push(m.matrix()[(n, n)].max(1.0).acosh());
    }
    Ok(out)
}

/// Options for [`enumerate_orbit`].
#[derive(Debug, Clone, Default)]
pub struct OrbitOptions {
    /// Compute per-factor attracting fixed points and translation lengths.
    pub jordan: bool,
    /// Discard a subtree once its root's `min_mu` exceeds this cutoff.
    /// A biased truncation; off by default.
    pub prune_min_mu: Option<f64>,
    /// Hard budget on the record count. When the full enumeration would
    /// exceed it, the traversal stops at the deepest complete length and the
    /// partial orbit is returned inside [`OrbitError::Budget`].
    pub max_records: Option<usize>,
}

/// Column-wise orbit table: one row per reduced word of length `<= max_len`,
/// in deterministic length-lexicographic order, identity first.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    k: usize,
    factor_dims: Vec<usize>,
    dim_offsets: Vec<usize>,
    total_dim: usize,
    max_len: usize,
    words: Vec<Word>,
    mu: Vec<f64>,
    dirs: Vec<f64>,
    jordan_dirs: Option<Vec<f64>>,
    jordan_lens: Option<Vec<f64>>,
}

/// View of one orbit record.
#[derive(Clone, Copy)]
pub struct OrbitRecordRef<'a> {
    orbit: &'a Orbit,
    pub index: usize,
}

impl<'a> OrbitRecordRef<'a> {
    pub fn word(&self) -> &'a Word {
        &self.orbit.words[self.index]
    }

    pub fn mu(&self) -> &'a [f64] {
        let k = self.orbit.k;
        &self.orbit.mu[self.index * k..(self.index + 1) * k]
    }

    pub fn min_mu(&self) -> f64 {
        min_mu(self.mu())
    }

    pub fn mu_norm(&self) -> f64 {
        mu_norm(self.mu())
    }

    /// Radial direction of `gamma_i o_i`; `None` for the identity record.
    pub fn dir(&self, factor: usize) -> Option<&'a [f64]> {
        if self.word().is_empty() {
            return None;
        }
        Some(self.orbit.dir_slice(&self.orbit.dirs, self.index, factor))
    }

    /// Attracting fixed direction in factor `i`, when Jordan data is present.
    pub fn jordan_dir(&self, factor: usize) -> Option<&'a [f64]> {
        if self.word().is_empty() {
            return None;
        }
        let jd = self.orbit.jordan_dirs.as_ref()?;
        Some(self.orbit.dir_slice(jd, self.index, factor))
    }

    /// Per-factor translation-length vector, when Jordan data is present.
    pub fn jordan_lens(&self) -> Option<&'a [f64]> {
        if self.word().is_empty() {
            return None;
        }
        let jl = self.orbit.jordan_lens.as_ref()?;
        let k = self.orbit.k;
        Some(&jl[self.index * k..(self.index + 1) * k])
    }
}

impl Orbit {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn has_jordan(&self) -> bool {
        self.jordan_dirs.is_some()
    }

    pub fn record(&self, index: usize) -> OrbitRecordRef<'_> {
        OrbitRecordRef { orbit: self, index }
    }

    pub fn records(&self) -> impl Iterator<Item = OrbitRecordRef<'_>> {
        (0..self.len()).map(move |index| OrbitRecordRef { orbit: self, index })
    }

    fn dir_slice<'a>(&self, data: &'a [f64], index: usize, factor: usize) -> &'a [f64] {
        let off = index * self.total_dim + self.dim_offsets[factor];
        &data[off..off + self.factor_dims[factor]]
    }

    /// Largest `min_mu` over all records.
    pub fn max_min_mu(&self) -> f64 {
        self.records().map(|r| r.min_mu()).fold(0.0, f64::max)
    }
}

/// Number of reduced words of length `<= max_len` (identity excluded).
pub fn reduced_word_count(generators: usize, max_len: usize) -> usize {
    let b = 2 * generators - 1;
    let mut level = 2 * generators;
    let mut total = 0usize;
    for _ in 1..=max_len {
        total += level;
        level *= b;
    }
    total
}

struct LengthBuckets {
    words: Vec<Vec<Word>>,
    mu: Vec<Vec<f64>>,
    dirs: Vec<Vec<f64>>,
    jordan_dirs: Option<Vec<Vec<f64>>>,
    jordan_lens: Option<Vec<Vec<f64>>>,
}

impl LengthBuckets {
    fn new(max_len: usize, jordan: bool) -> Self {
        LengthBuckets {
            words: vec![Vec::new(); max_len + 1],
            mu: vec![Vec::new(); max_len + 1],
            dirs: vec![Vec::new(); max_len + 1],
            jordan_dirs: jordan.then(|| vec![Vec::new(); max_len + 1]),
            jordan_lens: jordan.then(|| vec![Vec::new(); max_len + 1]),
        }
    }
}

struct Walker<'a> {
    joining: &'a SelfJoining,
    letters: Vec<i16>,
    max_len: usize,
    prune: Option<f64>,
    jordan: bool,
}

impl<'a> Walker<'a> {
    /// Emit the node for `word` with the given factor matrices, then recurse.
    fn walk(
        &self,
        word: &mut Vec<i16>,
        mats: &[Isometry],
        out: &mut LengthBuckets,
    ) -> Result<(), OrbitError> {
        let k = self.joining.k();
        let len = word.len();
        let mut mu = Vec::with_capacity(k);
        for (i, m) in mats.iter().enumerate() {
            let n = self.joining.factor(i).factor_dim();
            mu.push(m.matrix()[(n, n)].max(1.0).acosh());
        }
        if let Some(cutoff) = self.prune {
            if min_mu(&mu) > cutoff {
                return Ok(());
            }
        }
        out.words[len].push(Word::from_reduced_unchecked(word.clone()));
        out.mu[len].extend_from_slice(&mu);
        for (i, m) in mats.iter().enumerate() {
            let n = self.joining.factor(i).factor_dim();
            let col = m.matrix().column(n);
            let mut norm = 0.0;
            for j in 0..n {
                norm += col[j] * col[j];
            }
            let norm = norm.sqrt().max(f64::MIN_POSITIVE);
            for j in 0..n {
                out.dirs[len].push(col[j] / norm);
            }
        }
        if self.jordan {
            let jd = out.jordan_dirs.as_mut().expect("jordan buckets allocated");
            let jl = out.jordan_lens.as_mut().expect("jordan buckets allocated");
            let w = Word::from_reduced_unchecked(word.clone());
            for (i, m) in mats.iter().enumerate() {
                let (fp, tl) = crate::group::word_fixed_data(self.joining.factor(i), &w, Some(m))
                    .map_err(|source| OrbitError::JordanFailure {
                        word: w.to_string(),
                        factor: i,
                        source,
                    })?;
                jd[len].extend_from_slice(fp.coords().as_slice());
                jl[len].push(tl);
            }
        }
        if len == self.max_len {
            return Ok(());
        }
        let last = *word.last().expect("walk starts below the root");
        for &l in &self.letters {
            if l == -last {
                continue;
            }
            let next: Vec<Isometry> = mats
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let mut p = m.compose(
                        self.joining.factor(i).letter_image(l).expect("letter in range"),
                    );
                    if p.relative_form_defect() > REORTH_TRIGGER {
                        p = p.reorthonormalized();
                    }
                    p
                })
                .collect();
            word.push(l);
            self.walk(word, &next, out)?;
            word.pop();
        }
        Ok(())
    }
}

/// Enumerate all reduced words of length `<= max_len` with their Cartan
/// vectors and boundary directions, one matrix product per node per factor.
pub fn enumerate_orbit(
    joining: &SelfJoining,
    max_len: usize,
    options: &OrbitOptions,
) -> Result<Orbit, OrbitError> {
    let g = joining.generators();
    let mut effective_len = max_len;
    let mut budget_hit = false;
    if let Some(budget) = options.max_records {
        while effective_len > 0 && reduced_word_count(g, effective_len) + 1 > budget {
            effective_len -= 1;
            budget_hit = true;
        }
    }

    let letters: Vec<i16> = (1..=g as i16).flat_map(|i| [i, -i]).collect();
    let split_depth = if effective_len >= 2 && g >= 1 { 2 } else { 1.min(effective_len) };

    // prefixes of length `split_depth` in lex order
    let prefixes: Vec<Vec<i16>> = if split_depth == 0 {
        Vec::new()
    } else {
        let mut out = Vec::new();
        for &a in &letters {
            if split_depth == 1 {
                out.push(vec![a]);
            } else {
                for &b in &letters {
                    if b != -a {
                        out.push(vec![a, b]);
                    }
                }
            }
        }
        out
    };

    let walker = Walker {
        joining,
        letters: letters.clone(),
        max_len: effective_len,
        prune: options.prune_min_mu,
        jordan: options.jordan,
    };

    // serial part: words shorter than the split depth
    let mut serial = LengthBuckets::new(effective_len, options.jordan);
    if split_depth == 2 {
        for &a in &letters {
            let mats: Vec<Isometry> = (0..joining.k())
                .map(|i| joining.factor(i).letter_image(a).expect("letter in range").clone())
                .collect();
            let short_walker = Walker {
                joining,
                letters: letters.clone(),
                max_len: 1,
                prune: options.prune_min_mu,
                jordan: options.jordan,
            };
            let mut w = vec![a];
            short_walker.walk(&mut w, &mats, &mut serial)?;
        }
    }

    // parallel part: one task per prefix, merged back in prefix order
    let subtree_results: Vec<Result<LengthBuckets, OrbitError>> = prefixes
        .par_iter()
        .map(|prefix| {
            let mut buckets = LengthBuckets::new(effective_len, options.jordan);
            let mut mats: Vec<Isometry> = (0..joining.k())
                .map(|i| Isometry::identity(joining.factor(i).factor_dim()))
                .collect();
            for &l in prefix {
                for (i, m) in mats.iter_mut().enumerate() {
                    *m = m.compose(joining.factor(i).letter_image(l).expect("letter in range"));
                }
            }
            let mut w = prefix.clone();
            walker.walk(&mut w, &mats, &mut buckets)?;
            Ok(buckets)
        })
        .collect();

    let factor_dims = joining.factor_dims();
    let total_dim: usize = factor_dims.iter().sum();
    let mut dim_offsets = Vec::with_capacity(factor_dims.len());
    let mut acc = 0;
    for &d in &factor_dims {
        dim_offsets.push(acc);
        acc += d;
    }

    let k = joining.k();
    let mut orbit = Orbit {
        k,
        factor_dims,
        dim_offsets,
        total_dim,
        max_len: effective_len,
        words: vec![Word::empty()],
        mu: vec![0.0; k],
        dirs: vec![0.0; total_dim],
        jordan_dirs: options.jordan.then(|| vec![0.0; total_dim]),
        jordan_lens: options.jordan.then(|| vec![0.0; k]),
    };

    let mut subtrees = Vec::with_capacity(subtree_results.len());
    for r in subtree_results {
        subtrees.push(r?);
    }
    for len in 1..=effective_len {
        let mut append = |b: &mut LengthBuckets| {
            orbit.words.append(&mut b.words[len]);
            orbit.mu.append(&mut b.mu[len]);
            orbit.dirs.append(&mut b.dirs[len]);
            if let (Some(jd), Some(src)) = (&mut orbit.jordan_dirs, &mut b.jordan_dirs) {
                jd.append(&mut src[len]);
            }
            if let (Some(jl), Some(src)) = (&mut orbit.jordan_lens, &mut b.jordan_lens) {
                jl.append(&mut src[len]);
            }
        };
        if len < split_depth {
            append(&mut serial);
        } else {
            for sub in &mut subtrees {
                append(sub);
            }
        }
    }

    if budget_hit {
        let got = orbit.len();
        return Err(OrbitError::Budget {
            budget: options.max_records.expect("budget_hit implies a budget"),
            got,
            complete_len: effective_len,
            partial: Box::new(orbit),
        });
    }
    Ok(orbit)
}

/// Necessary-condition report for Zariski density of the joining: the
/// per-factor translation-length spectra must differ across factors, and the
/// fixed directions must not sit in a proper subsphere. Checked on the first
/// `sample_words` nonempty reduced words; these are necessary conditions
/// only, not a density certificate.
#[derive(Debug, Clone)]
pub struct ZariskiReport {
    /// `spectra_differ[i][j]`: some sampled word has different translation
    /// lengths in factors i and j.
    pub spectra_differ: Vec<Vec<bool>>,
    /// Fixed directions of the sampled words span the factor's `R^n`.
    pub spanning: Vec<bool>,
}

impl ZariskiReport {
    pub fn all_pairs_differ(&self) -> bool {
        let k = self.spectra_differ.len();
        (0..k).all(|i| (i + 1..k).all(|j| self.spectra_differ[i][j]))
    }
}

pub fn zariski_necessary_report(
    joining: &SelfJoining,
    sample_words: usize,
) -> Result<ZariskiReport, OrbitError> {
    let k = joining.k();
    let g = joining.generators();
    let words: Vec<Word> = crate::group::enumerate_reduced(g, 6).take(sample_words).collect();
    let mut lens = vec![Vec::with_capacity(words.len()); k];
    let mut fixed: Vec<Vec<Vec<f64>>> = vec![Vec::new(); k];
    for w in &words {
        for i in 0..k {
            let (fp, tl) = word_fixed_data(joining.factor(i), w, None).map_err(|source| {
                OrbitError::JordanFailure { word: w.to_string(), factor: i, source }
            })?;
            lens[i].push(tl);
            fixed[i].push(fp.coords().as_slice().to_vec());
        }
    }
    let mut spectra_differ = vec![vec![false; k]; k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                spectra_differ[i][j] =
                    lens[i].iter().zip(&lens[j]).any(|(a, b)| (a - b).abs() > 1e-6);
            }
        }
    }
    let spanning = (0..k)
        .map(|i| {
            let n = joining.factor(i).factor_dim();
            rank_at_least(&fixed[i], n)
        })
        .collect();
    Ok(ZariskiReport { spectra_differ, spanning })
}

/// True when the vectors span `R^n` (Gram-matrix rank with a loose cutoff).
fn rank_at_least(vecs: &[Vec<f64>], n: usize) -> bool {
    if vecs.len() < n {
        return false;
    }
    let m = nalgebra::DMatrix::from_fn(vecs.len(), n, |r, c| vecs[r][c]);
    m.svd(false, false).rank(1e-9) >= n
}

const CACHE_MAGIC: &str = "DIRLIM-ORBIT-CACHE v1";

impl Orbit {
    /// Write the flat binary table with its text header. Layout per row:
    /// u16 word length, `max_len` i16 letters (zero padded), `k` f64 mu,
    /// `total_dim` f64 dirs, and with Jordan data `total_dim` f64 fixed
    /// directions plus `k` f64 translation lengths. Little-endian throughout.
    pub fn write_cache(&self, path: &Path, config_hash: &str) -> Result<(), OrbitError> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{CACHE_MAGIC}")?;
        writeln!(w, "config_hash = {config_hash}")?;
        writeln!(w, "k = {}", self.k)?;
        let dims: Vec<String> = self.factor_dims.iter().map(|d| d.to_string()).collect();
        writeln!(w, "dims = {}", dims.join(","))?;
        writeln!(w, "max_word_length = {}", self.max_len)?;
        writeln!(w, "records = {}", self.len())?;
        writeln!(w, "jordan = {}", self.has_jordan())?;
        writeln!(w, "END-HEADER")?;
        for rec in self.records() {
            let word = rec.word();
            w.write_all(&(word.len() as u16).to_le_bytes())?;
            for j in 0..self.max_len {
                let letter = word.letters().get(j).copied().unwrap_or(0);
                w.write_all(&letter.to_le_bytes())?;
            }
            for v in rec.mu() {
                w.write_all(&v.to_le_bytes())?;
            }
            let dir_row =
                &self.dirs[rec.index * self.total_dim..(rec.index + 1) * self.total_dim];
            for v in dir_row {
                w.write_all(&v.to_le_bytes())?;
            }
            if let Some(jd) = &self.jordan_dirs {
                for v in &jd[rec.index * self.total_dim..(rec.index + 1) * self.total_dim] {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            if let Some(jl) = &self.jordan_lens {
                for v in &jl[rec.index * self.k..(rec.index + 1) * self.k] {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reload a cache written by [`Orbit::write_cache`]; refuses a cache whose
    /// config hash differs from `expected_hash`.
    pub fn read_cache(path: &Path, expected_hash: &str) -> Result<Orbit, OrbitError> {
        let file = std::fs::File::open(path)?;
        let mut r = BufReader::new(file);
        let mut header = std::collections::BTreeMap::new();
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != CACHE_MAGIC {
            return Err(OrbitError::CacheFormat(format!("bad magic line {line:?}")));
        }
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(OrbitError::CacheFormat("missing END-HEADER".into()));
            }
            let t = line.trim_end();
            if t == "END-HEADER" {
                break;
            }
            if let Some((key, value)) = t.split_once(" = ") {
                header.insert(key.to_string(), value.to_string());
            }
        }
        let get = |key: &str| -> Result<&String, OrbitError> {
            header.get(key).ok_or_else(|| OrbitError::CacheFormat(format!("missing key {key}")))
        };
        let found = get("config_hash")?.clone();
        if found != expected_hash {
            return Err(OrbitError::CacheHashMismatch {
                expected: expected_hash.to_string(),
                found,
            });
        }
        let parse_usize = |key: &str| -> Result<usize, OrbitError> {
            get(key)?
                .parse::<usize>()
                .map_err(|e| OrbitError::CacheFormat(format!("bad {key}: {e}")))
        };
        let k = parse_usize("k")?;
        let factor_dims: Vec<usize> = get("dims")?
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| OrbitError::CacheFormat(format!("bad dims: {e}")))?;
        if factor_dims.len() != k {
            return Err(OrbitError::CacheFormat("dims length differs from k".into()));
        }
        let max_len = parse_usize("max_word_length")?;
        let records = parse_usize("records")?;
        let jordan = get("jordan")?.as_str() == "true";
        let total_dim: usize = factor_dims.iter().sum();
        let mut dim_offsets = Vec::with_capacity(k);
        let mut acc = 0;
        for &d in &factor_dims {
            dim_offsets.push(acc);
            acc += d;
        }
        let mut orbit = Orbit {
            k,
            factor_dims,
            dim_offsets,
            total_dim,
            max_len,
            words: Vec::with_capacity(records),
            mu: Vec::with_capacity(records * k),
            dirs: Vec::with_capacity(records * total_dim),
            jordan_dirs: jordan.then(|| Vec::with_capacity(records * total_dim)),
            jordan_lens: jordan.then(|| Vec::with_capacity(records * k)),
        };
        let row_bytes = 2
            + 2 * max_len
            + 8 * (k + total_dim)
            + if jordan { 8 * (total_dim + k) } else { 0 };
        let mut buf = vec![0u8; row_bytes];
        for row in 0..records {
            r.read_exact(&mut buf)
                .map_err(|_| OrbitError::CacheFormat(format!("truncated at row {row}")))?;
            let mut at = 0usize;
            let mut take2 = || {
                let v = i16::from_le_bytes([buf[at], buf[at + 1]]);
                at += 2;
                v
            };
            let len = take2() as usize;
            if len > max_len {
                return Err(OrbitError::CacheFormat(format!("row {row} length {len}")));
            }
            let mut letters = Vec::with_capacity(len);
            for j in 0..max_len {
                let l = take2();
                if j < len {
                    letters.push(l);
                }
            }
            orbit.words.push(Word::from_reduced_unchecked(letters));
            let mut take8 = |out: &mut Vec<f64>, count: usize| {
                for _ in 0..count {
                    let mut b = [0u8; 8];
                    b.copy_from_slice(&buf[at..at + 8]);
                    out.push(f64::from_le_bytes(b));
                    at += 8;
                }
            };
            take8(&mut orbit.mu, k);
            take8(&mut orbit.dirs, total_dim);
            if let Some(jd) = &mut orbit.jordan_dirs {
                take8(jd, total_dim);
            }
            if let Some(jl) = &mut orbit.jordan_lens {
                take8(jl, k);
            }
        }
        Ok(orbit)
    }
}
