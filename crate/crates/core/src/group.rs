//! Free-group combinatorics and Schottky representations.
//!
//! The ambient abstract group is a free group `F_g` with generators indexed
//! `1..=g`; a letter is a nonzero signed index. A representation assigns each
//! generator a loxodromic isometry of one hyperbolic factor together with
//! ping-pong caps on the boundary sphere. [`verify_ping_pong`] certifies,
//! by sampled margins, that the caps witness freeness, discreteness and
//! convex cocompactness.

use crate::hyperbolic::{
    angle, attracting_fixed_point, axis_translation, BoundaryDir, Cap, GeomError, Isometry,
};
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Default minimal angular margin between ping-pong caps, in radians.
pub const DEFAULT_CAP_MARGIN: f64 = 0.02;
/// Default number of sample directions per cap in [`verify_ping_pong`].
pub const DEFAULT_SAMPLES_PER_CAP: usize = 256;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("letter {0} out of range for {1} generators")]
    LetterOutOfRange(i16, usize),
    #[error("generator count must be >= 1, got {0}")]
    NoGenerators(usize),
    #[error("geometry error: {0}")]
    Geometry(#[from] GeomError),
    #[error("generator {index}: {source}")]
    BadGenerator { index: usize, source: GeomError },
    #[error("no cap radius passes ping-pong verification (best margin {best_margin:.4})")]
    CapTuningFailed { best_margin: f64 },
    #[error("ping-pong verification failed: {0}")]
    PingPongFailed(PingPongReport),
    #[error("factor dimension mismatch: expected {expected}, generator {index} has {got}")]
    FactorDimMismatch { expected: usize, index: usize, got: usize },
}

/// A reduced word in `F_g`: letters are signed generator indices, with no
/// adjacent `(j, -j)` pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    letters: Vec<i16>,
}

impl Word {
    pub fn empty() -> Self {
        Word { letters: Vec::new() }
    }

    /// Free reduction of a letter sequence. Idempotent; never inflates.
    pub fn reduce(letters: &[i16], generators: usize) -> Result<Self, GroupError> {
        if generators == 0 {
            return Err(GroupError::NoGenerators(0));
        }
        let mut stack: Vec<i16> = Vec::with_capacity(letters.len());
        for &l in letters {
            if l == 0 || l.unsigned_abs() as usize > generators {
                return Err(GroupError::LetterOutOfRange(l, generators));
            }
            if stack.last() == Some(&-l) {
                stack.pop();
            } else {
                stack.push(l);
            }
        }
        Ok(Word { letters: stack })
    }

    pub(crate) fn from_reduced_unchecked(letters: Vec<i16>) -> Self {
        Word { letters }
    }

    pub fn letters(&self) -> &[i16] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word { letters: self.letters.iter().rev().map(|l| -l).collect() }
    }

    /// Concatenation followed by free reduction.
    pub fn concat(&self, other: &Word) -> Word {
        let mut stack = self.letters.clone();
        for &l in &other.letters {
            if stack.last() == Some(&-l) {
                stack.pop();
            } else {
                stack.push(l);
            }
        }
        Word { letters: stack }
    }

    /// Repeated concatenation `w^n`.
    pub fn power(&self, n: usize) -> Word {
        let mut out = Word::empty();
        for _ in 0..n {
            out = out.concat(self);
        }
        out
    }

    /// Split as `h * core * h^{-1}` with `core` cyclically reduced (its first
    /// letter is not the inverse of its last).
    pub fn cyclic_reduce(&self) -> (Word, Word) {
        let mut lo = 0usize;
        let mut hi = self.letters.len();
        while hi - lo >= 2 && self.letters[lo] == -self.letters[hi - 1] {
            lo += 1;
            hi -= 1;
        }
        (
            Word { letters: self.letters[..lo].to_vec() },
            Word { letters: self.letters[lo..hi].to_vec() },
        )
    }

    /// Position of a letter in the canonical enumeration order
    /// `1, -1, 2, -2, ...`; used for the deterministic length-lex order.
    pub fn letter_rank(l: i16) -> usize {
        let base = (l.unsigned_abs() as usize - 1) * 2;
        if l > 0 {
            base
        } else {
            base + 1
        }
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        for (i, &l) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Iterator over all nonempty reduced words of length `<= max_len`, grouped
/// by length and lexicographic within each length (letter order `1, -1, 2,
/// -2, ...`). Count at length `l >= 1` is `2g (2g-1)^(l-1)`.
pub fn enumerate_reduced(generators: usize, max_len: usize) -> ReducedWords {
    ReducedWords { g: generators, max_len, current_len: 1, state: Vec::new() }
}

pub struct ReducedWords {
    g: usize,
    max_len: usize,
    current_len: usize,
    /// letters of the next word to emit at `current_len`; empty means start
    state: Vec<i16>,
}

impl ReducedWords {
    fn letter_at(rank: usize) -> i16 {
        let idx = (rank / 2 + 1) as i16;
        if rank % 2 == 0 {
            idx
        } else {
            -idx
        }
    }

    /// First admissible letter after `prev` (never the inverse of `prev`).
    fn first_letter(&self, prev: Option<i16>) -> i16 {
        for r in 0..2 * self.g {
            let l = Self::letter_at(r);
            if prev != Some(-l) {
                return l;
            }
        }
        unreachable!("g >= 1 always leaves an admissible letter")
    }

    /// Advance `state` to the lexicographically next reduced word of the same
    /// length; returns false when the length is exhausted.
    fn advance(&mut self) -> bool {
        let n = self.state.len();
        let mut pos = n;
        loop {
            if pos == 0 {
                return false;
            }
            pos -= 1;
            let prev = if pos == 0 { None } else { Some(self.state[pos - 1]) };
            let mut rank = Word::letter_rank(self.state[pos]) + 1;
            while rank < 2 * self.g {
                let l = Self::letter_at(rank);
                if prev != Some(-l) {
                    self.state[pos] = l;
                    for i in pos + 1..n {
                        let p = self.state[i - 1];
                        self.state[i] = self.first_letter(Some(p));
                    }
                    return true;
                }
                rank += 1;
            }
        }
    }
}

impl Iterator for ReducedWords {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        loop {
            if self.current_len > self.max_len {
                return None;
            }
            if self.state.is_empty() {
                // first word of the current length
                let mut w = Vec::with_capacity(self.current_len);
                for i in 0..self.current_len {
                    let prev = if i == 0 { None } else { Some(w[i - 1]) };
                    w.push(self.first_letter(prev));
                }
                self.state = w;
                return Some(Word::from_reduced_unchecked(self.state.clone()));
            }
            if self.advance() {
                return Some(Word::from_reduced_unchecked(self.state.clone()));
            }
            self.current_len += 1;
            self.state.clear();
        }
    }
}

/// Axis data for one generator: repelling endpoint, attracting endpoint, and
/// translation length.
#[derive(Debug, Clone)]
pub struct AxisSpec {
    pub minus: BoundaryDir,
    pub plus: BoundaryDir,
    pub length: f64,
}

/// The loxodromic isometry translating by `length` along the geodesic with
/// the given boundary endpoints. `attracting_fixed_point` recovers
/// `(plus, length)`.
pub fn make_axis_generator(
    p_minus: &BoundaryDir,
    p_plus: &BoundaryDir,
    length: f64,
) -> Result<Isometry, GroupError> {
    if length <= 0.0 {
        return Err(GroupError::Geometry(GeomError::NegativeTime(length)));
    }
    Ok(axis_translation(p_minus, p_plus, length)?)
}

/// How ping-pong caps are chosen when building a [`SchottkyRep`].
#[derive(Debug, Clone)]
pub enum CapPolicy {
    /// Bisect for the largest common radius passing verification with the
    /// given margin.
    Auto { margin_min: f64 },
    /// Use one fixed radius for every cap.
    Fixed(f64),
    /// Caps supplied explicitly, indexed like [`SchottkyRep::cap`].
    Explicit(Vec<Cap>),
}

/// A Schottky representation of `F_g` into the isometries of one factor:
/// generator images plus certified ping-pong caps (2g of them, one per
/// signed generator).
#[derive(Debug, Clone)]
pub struct SchottkyRep {
    factor_dim: usize,
    images: Vec<Isometry>,
    inverses: Vec<Isometry>,
    caps: Vec<Cap>,
}

impl SchottkyRep {
    /// Build from generator images and a cap policy. The representation is
    /// returned only if [`verify_ping_pong`] passes.
    pub fn new(
        factor_dim: usize,
        images: Vec<Isometry>,
        policy: CapPolicy,
    ) -> Result<Self, GroupError> {
        if images.is_empty() {
            return Err(GroupError::NoGenerators(0));
        }
        for (i, g) in images.iter().enumerate() {
            if g.spatial_dim() != factor_dim {
                return Err(GroupError::FactorDimMismatch {
                    expected: factor_dim,
                    index: i,
                    got: g.spatial_dim(),
                });
            }
        }
        let inverses: Vec<Isometry> = images.iter().map(Isometry::inverse).collect();
        // fixed points of each signed generator give the cap centers
        let mut centers = Vec::with_capacity(2 * images.len());
        for (i, g) in images.iter().enumerate() {
            let (plus, _) = attracting_fixed_point(g)
                .map_err(|source| GroupError::BadGenerator { index: i, source })?;
            let (minus, _) = attracting_fixed_point(&inverses[i])
                .map_err(|source| GroupError::BadGenerator { index: i, source })?;
            centers.push((plus, minus));
        }
        let build = |radius: f64| -> Result<Vec<Cap>, GeomError> {
            let mut caps = Vec::with_capacity(2 * centers.len());
            for (plus, minus) in &centers {
                caps.push(Cap::new(plus.clone(), radius)?);
                caps.push(Cap::new(minus.clone(), radius)?);
            }
            Ok(caps)
        };
        let caps = match policy {
            CapPolicy::Explicit(caps) => caps,
            CapPolicy::Fixed(radius) => build(radius)?,
            CapPolicy::Auto { margin_min } => {
                // the largest radius compatible with pairwise disjointness
                let mut min_pair_angle = std::f64::consts::PI;
                let flat: Vec<&BoundaryDir> =
                    centers.iter().flat_map(|(p, m)| [p, m]).collect();
                for i in 0..flat.len() {
                    for j in i + 1..flat.len() {
                        min_pair_angle = min_pair_angle.min(angle(flat[i], flat[j]));
                    }
                }
                let r_max = 0.5 * (min_pair_angle - margin_min);
                if r_max <= 0.0 {
                    return Err(GroupError::CapTuningFailed { best_margin: r_max });
                }
                // pass region in the radius is an interval: larger caps make
                // the image containment easier and disjointness harder, so
                // bisect down from the disjointness bound
                let passes = |r: f64| -> bool {
                    build(r).ok().is_some_and(|caps| {
                        let rep = SchottkyRep {
                            factor_dim,
                            images: images.clone(),
                            inverses: inverses.clone(),
                            caps,
                        };
                        let report = verify_ping_pong(&rep, 64);
                        report.pass && report.min_margin() >= margin_min
                    })
                };
                let mut best = None;
                let mut r = r_max * 0.999;
                for _ in 0..24 {
                    if passes(r) {
                        best = Some(r);
                        break;
                    }
                    r *= 0.85;
                    if r < 1e-3 {
                        break;
                    }
                }
                let Some(r0) = best else {
                    return Err(GroupError::CapTuningFailed { best_margin: -1.0 });
                };
                build(r0)?
            }
        };
        let rep = SchottkyRep { factor_dim, images, inverses, caps };
        let report = verify_ping_pong(&rep, DEFAULT_SAMPLES_PER_CAP);
        if !report.pass {
            return Err(GroupError::PingPongFailed(report));
        }
        Ok(rep)
    }

    /// Build from axis specifications (the usual fixture route).
    pub fn from_axes(
        factor_dim: usize,
        axes: &[AxisSpec],
        policy: CapPolicy,
    ) -> Result<Self, GroupError> {
        let images = axes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                axis_translation(&a.minus, &a.plus, a.length)
                    .map_err(|source| GroupError::BadGenerator { index: i, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(factor_dim, images, policy)
    }

    pub fn generators(&self) -> usize {
        self.images.len()
    }

    pub fn factor_dim(&self) -> usize {
        self.factor_dim
    }

    /// Image of a signed letter.
    pub fn letter_image(&self, letter: i16) -> Result<&Isometry, GroupError> {
        let idx = letter.unsigned_abs() as usize;
        if letter == 0 || idx > self.images.len() {
            return Err(GroupError::LetterOutOfRange(letter, self.images.len()));
        }
        Ok(if letter > 0 { &self.images[idx - 1] } else { &self.inverses[idx - 1] })
    }

    /// Ping-pong cap of a signed letter: the target cap of that letter's
    /// image (`cap(+s)` for `s > 0`, `cap(-s)` for `s < 0`).
    pub fn cap(&self, letter: i16) -> Result<&Cap, GroupError> {
        let idx = letter.unsigned_abs() as usize;
        if letter == 0 || idx > self.images.len() {
            return Err(GroupError::LetterOutOfRange(letter, self.images.len()));
        }
        Ok(if letter > 0 { &self.caps[2 * (idx - 1)] } else { &self.caps[2 * (idx - 1) + 1] })
    }

    pub fn caps(&self) -> &[Cap] {
        &self.caps
    }
}

/// Product of generator images along a reduced word; identity on the empty
/// word.
pub fn evaluate(rep: &SchottkyRep, w: &Word) -> Result<Isometry, GroupError> {
    let mut m = Isometry::identity(rep.factor_dim);
    for &l in w.letters() {
        m = m.compose(rep.letter_image(l)?);
    }
    Ok(m)
}

/// Attracting fixed point and translation length of a word's image.
///
/// Conjugates `h c h^{-1}` have eigenbases conditioned like `e^{2 d(h)}`,
/// which defeats matrix-level eigenvector extraction for deep conjugators.
/// The word is cyclically reduced first: a cyclically reduced core has its
/// fixed points in disjoint ping-pong caps, so its eigen problem is uniformly
/// well conditioned, and the conjugator acts afterwards on the boundary.
pub fn word_fixed_data(
    rep: &SchottkyRep,
    w: &Word,
    full_matrix: Option<&Isometry>,
) -> Result<(BoundaryDir, f64), GroupError> {
    let (h, core) = w.cyclic_reduce();
    if h.is_empty() {
        let owned;
        let m = match full_matrix {
            Some(m) => m,
            None => {
                owned = evaluate(rep, w)?;
                &owned
            }
        };
        return Ok(attracting_fixed_point(m)?);
    }
    let core_m = evaluate(rep, &core)?;
    let (fp_core, length) = attracting_fixed_point(&core_m)?;
    let h_m = evaluate(rep, &h)?;
    Ok((h_m.apply_boundary(&fp_core), length))
}

/// Outcome of sampled ping-pong verification.
#[derive(Debug, Clone)]
pub struct PingPongReport {
    pub pass: bool,
    /// Worst pairwise cap-disjointness margin (gap minus both radii).
    pub min_pair_margin: f64,
    /// The two signed letters realizing the worst disjointness margin.
    pub worst_pair: (i16, i16),
    /// Worst containment margin of a mapped sample inside its target cap.
    pub min_image_margin: f64,
    /// The signed letter realizing the worst containment margin.
    pub worst_letter: i16,
    pub samples_per_cap: usize,
}

impl PingPongReport {
    pub fn min_margin(&self) -> f64 {
        self.min_pair_margin.min(self.min_image_margin)
    }
}

impl std::fmt::Display for PingPongReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "pass={} pair_margin={:.4} (letters {} vs {}) image_margin={:.4} (letter {})",
            self.pass,
            self.min_pair_margin,
            self.worst_pair.0,
            self.worst_pair.1,
            self.min_image_margin,
            self.worst_letter
        )
    }
}

fn signed_letters(g: usize) -> Vec<i16> {
    (1..=g as i16).flat_map(|i| [i, -i]).collect()
}

/// Certify the ping-pong configuration by sampling.
///
/// Checks (a) pairwise disjointness of the 2g caps and (b) that the image of
/// each letter maps the complement of the cap of its inverse into its own cap
/// with positive margin, testing `samples_per_cap` deterministic directions
/// (rim points of the complement plus a spread over its interior). A pass
/// certifies, via the ping-pong lemma, that the group is free, discrete, and
/// convex cocompact.
pub fn verify_ping_pong(rep: &SchottkyRep, samples_per_cap: usize) -> PingPongReport {
    let letters = signed_letters(rep.generators());
    let mut min_pair_margin = f64::INFINITY;
    let mut worst_pair = (0, 0);
    for i in 0..letters.len() {
        for j in i + 1..letters.len() {
            let a = rep.cap(letters[i]).expect("letter in range");
            let b = rep.cap(letters[j]).expect("letter in range");
            let margin = angle(&a.center, &b.center) - a.angular_radius - b.angular_radius;
            if margin < min_pair_margin {
                min_pair_margin = margin;
                worst_pair = (letters[i], letters[j]);
            }
        }
    }

    // deterministic sample directions; a fixed seed keeps reports reproducible
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cab5);
    let n = rep.factor_dim;
    let mut min_image_margin = f64::INFINITY;
    let mut worst_letter = 0;
    for &s in &letters {
        let image = rep.letter_image(s).expect("letter in range");
        let source = rep.cap(-s).expect("letter in range");
        let target = rep.cap(s).expect("letter in range");
        let rim = samples_per_cap / 4;
        let interior = samples_per_cap - rim;
        let mut check = |eta: &BoundaryDir| {
            let margin = target.margin(&image.apply_boundary(eta));
            if margin < min_image_margin {
                min_image_margin = margin;
                worst_letter = s;
            }
        };
        // rim of the complement: directions at angular distance exactly the
        // source radius from the source center
        for _ in 0..rim {
            let w = random_unit(&mut rng, n);
            if let Some(p) = rotate_toward(&source.center, &w, source.angular_radius) {
                check(&p);
            }
        }
        // spread over the complement interior
        let mut done = 0;
        while done < interior {
            let w = random_unit(&mut rng, n);
            if angle(&w, &source.center) > source.angular_radius {
                check(&w);
                done += 1;
            }
        }
    }

    let pass = min_pair_margin > 0.0 && min_image_margin > 0.0;
    PingPongReport {
        pass,
        min_pair_margin,
        worst_pair,
        min_image_margin,
        worst_letter,
        samples_per_cap,
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> BoundaryDir {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0f64..1.0));
        let norm = v.norm();
        if norm > 1e-3 {
            return BoundaryDir::new(v).expect("nonzero");
        }
    }
}

/// The direction at angular distance `theta` from `c` in the great circle
/// through `c` and `w`; `None` when `w` is (anti)parallel to `c`.
fn rotate_toward(c: &BoundaryDir, w: &BoundaryDir, theta: f64) -> Option<BoundaryDir> {
    let cv = c.coords();
    let wv = w.coords();
    let perp = wv - cv * cv.dot(wv);
    let norm = perp.norm();
    if norm < 1e-9 {
        return None;
    }
    let unit_perp = perp / norm;
    BoundaryDir::new(cv * theta.cos() + unit_perp * theta.sin()).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn orthogonal_axes(lengths: &[f64]) -> Vec<AxisSpec> {
        lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| AxisSpec {
                minus: BoundaryDir::unit(2, i).neg(),
                plus: BoundaryDir::unit(2, i),
                length: l,
            })
            .collect()
    }

    #[test]
    fn reduce_basics() {
        assert!(Word::reduce(&[1, -1], 2).unwrap().is_empty());
        assert_eq!(Word::reduce(&[1, 2, -2, 1], 2).unwrap().letters(), &[1, 1]);
        assert!(matches!(Word::reduce(&[3], 2), Err(GroupError::LetterOutOfRange(3, 2))));
        assert!(matches!(Word::reduce(&[0], 2), Err(GroupError::LetterOutOfRange(0, 2))));
    }

    proptest! {
        #[test]
        fn reduce_idempotent(letters in proptest::collection::vec(
            prop_oneof![1i16..=3, -3i16..=-1], 0..30)) {
            let once = Word::reduce(&letters, 3).unwrap();
            let twice = Word::reduce(once.letters(), 3).unwrap();
            prop_assert_eq!(once.letters(), twice.letters());
            prop_assert!(once.len() <= letters.len());
        }

        #[test]
        fn concat_matches_reduce(a in proptest::collection::vec(
            prop_oneof![1i16..=2, -2i16..=-1], 0..15),
            b in proptest::collection::vec(prop_oneof![1i16..=2, -2i16..=-1], 0..15)) {
            let wa = Word::reduce(&a, 2).unwrap();
            let wb = Word::reduce(&b, 2).unwrap();
            let joined: Vec<i16> = a.iter().chain(b.iter()).copied().collect();
            let concat = wa.concat(&wb);
            let reduced = Word::reduce(&joined, 2).unwrap();
            prop_assert_eq!(concat.letters(), reduced.letters());
        }
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_reduced(2, 1).count(), 4);
        assert_eq!(enumerate_reduced(2, 3).count(), 52);
        // brute-force oracle at g = 3, L = 4: filter all letter sequences
        let g = 3usize;
        let letters: Vec<i16> = (1..=g as i16).flat_map(|i| [i, -i]).collect();
        let mut by_len = vec![0usize; 5];
        let mut seqs: Vec<Vec<i16>> = vec![Vec::new()];
        for len in 1..=4 {
            let mut next = Vec::new();
            for s in &seqs {
                for &l in &letters {
                    let mut t = s.clone();
                    t.push(l);
                    next.push(t);
                }
            }
            by_len[len] = next
                .iter()
                .filter(|s| s.windows(2).all(|w| w[0] != -w[1]))
                .count();
            seqs = next;
        }
        assert_eq!(&by_len[1..], &[6, 30, 150, 750]);
        let mut got = vec![0usize; 5];
        for w in enumerate_reduced(3, 4) {
            got[w.len()] += 1;
        }
        assert_eq!(&got[1..], &by_len[1..]);
    }

    #[test]
    fn enumeration_closed_formula_and_uniqueness() {
        for g in 1..=3usize {
            let words: Vec<Word> = enumerate_reduced(g, 5).collect();
            let mut seen = std::collections::HashSet::new();
            for w in &words {
                assert!(seen.insert(w.letters().to_vec()), "duplicate {w}");
                assert!(w.letters().windows(2).all(|p| p[0] != -p[1]), "unreduced {w}");
            }
            for l in 1..=5usize {
                let count = words.iter().filter(|w| w.len() == l).count();
                let expect = 2 * g * (2 * g - 1).pow(l as u32 - 1);
                assert_eq!(count, expect, "g={g} l={l}");
            }
        }
    }

    #[test]
    fn enumeration_is_length_lex() {
        let words: Vec<Word> = enumerate_reduced(2, 4).collect();
        for pair in words.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let ka: Vec<usize> = a.letters().iter().map(|&l| Word::letter_rank(l)).collect();
            let kb: Vec<usize> = b.letters().iter().map(|&l| Word::letter_rank(l)).collect();
            assert!(
                (a.len(), ka) < (b.len(), kb),
                "order violation: {a} before {b}"
            );
        }
    }

    #[test]
    fn axis_generator_roundtrip() {
        let p_minus = BoundaryDir::from_slice(&[0.0, -1.0]).unwrap();
        let p_plus = BoundaryDir::from_slice(&[1.0, 1.0]).unwrap();
        let g = make_axis_generator(&p_minus, &p_plus, 1.3).unwrap();
        let (fp, len) = attracting_fixed_point(&g).unwrap();
        assert!(angle(&fp, &p_plus) < 1e-8);
        assert!((len - 1.3).abs() < 1e-8);
    }

    #[test]
    fn ping_pong_passes_on_strong_contraction() {
        let rep = SchottkyRep::from_axes(
            2,
            &orthogonal_axes(&[4.0, 4.0]),
            CapPolicy::Fixed(0.5),
        )
        .unwrap();
        let report = verify_ping_pong(&rep, 256);
        assert!(report.pass, "{report}");
        assert!(report.min_margin() > 0.02);
    }

    #[test]
    fn ping_pong_fails_on_weak_contraction() {
        let err = SchottkyRep::from_axes(2, &orthogonal_axes(&[0.1, 0.1]), CapPolicy::Fixed(0.5));
        match err {
            Err(GroupError::PingPongFailed(report)) => {
                assert!(!report.pass);
                assert!(report.min_image_margin < 0.0, "{report}");
            }
            other => panic!("expected ping-pong failure, got {other:?}"),
        }
    }

    #[test]
    fn ping_pong_single_generator() {
        let rep =
            SchottkyRep::from_axes(2, &orthogonal_axes(&[3.0]), CapPolicy::Auto { margin_min: 0.02 })
                .unwrap();
        let report = verify_ping_pong(&rep, 128);
        assert!(report.pass, "{report}");
    }

    #[test]
    fn auto_caps_pass_with_margin() {
        let rep = SchottkyRep::from_axes(
            2,
            &orthogonal_axes(&[2.2, 3.0]),
            CapPolicy::Auto { margin_min: DEFAULT_CAP_MARGIN },
        )
        .unwrap();
        let report = verify_ping_pong(&rep, 256);
        assert!(report.pass && report.min_margin() >= DEFAULT_CAP_MARGIN, "{report}");
    }

    #[test]
    fn evaluate_contract() {
        let rep = SchottkyRep::from_axes(
            2,
            &orthogonal_axes(&[2.5, 2.5]),
            CapPolicy::Auto { margin_min: 0.02 },
        )
        .unwrap();
        let id = evaluate(&rep, &Word::empty()).unwrap();
        assert!((id.matrix() - nalgebra::DMatrix::identity(3, 3)).amax() < 1e-12);
        // s . s^{-1} via an unreduced path
        let g1 = rep.letter_image(1).unwrap().clone();
        let g1i = rep.letter_image(-1).unwrap().clone();
        assert!((g1.compose(&g1i).matrix() - nalgebra::DMatrix::identity(3, 3)).amax() < 1e-9);
        // associativity robustness: left fold vs right fold
        let w = Word::reduce(&[1, 2, -1, 2, 2, -1, 1, 2], 2).unwrap();
        let left = evaluate(&rep, &w).unwrap();
        let mut right = Isometry::identity(2);
        for &l in w.letters().iter().rev() {
            right = rep.letter_image(l).unwrap().compose(&right);
        }
        let o = crate::hyperbolic::HPoint::basepoint(2);
        let dl = crate::hyperbolic::dist(&o, &left.apply(&o));
        let dr = crate::hyperbolic::dist(&o, &right.apply(&o));
        assert!((dl - dr).abs() < 1e-6);
    }

    #[test]
    fn certified_words_are_loxodromic_and_quasi_isometric() {
        let rep = SchottkyRep::from_axes(
            2,
            &orthogonal_axes(&[2.4, 3.0]),
            CapPolicy::Auto { margin_min: 0.02 },
        )
        .unwrap();
        let o = crate::hyperbolic::HPoint::basepoint(2);
        let mut lens = Vec::new();
        let mut dists = Vec::new();
        for w in enumerate_reduced(2, 6) {
            let g = evaluate(&rep, &w).unwrap();
            assert!(
                attracting_fixed_point(&g).is_ok(),
                "word {w} evaluated non-loxodromic"
            );
            lens.push(w.len() as f64);
            dists.push(crate::hyperbolic::dist(&o, &g.apply(&o)));
        }
        // quasi-isometric embedding: dist >= c |w| - c' with c > 0
        let line = crate::fit::line_fit(&lens, &dists).unwrap();
        assert!(line.slope > 0.5, "quasi-isometry constant too small: {}", line.slope);
        let c = line.slope;
        let cp = dists
            .iter()
            .zip(&lens)
            .map(|(d, l)| c * l - d)
            .fold(f64::MIN, f64::max);
        for (&d, &l) in dists.iter().zip(&lens) {
            assert!(d >= c * l - cp - 1e-9);
        }
    }
}
