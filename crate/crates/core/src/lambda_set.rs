//! Genealogy of the resonant set, its planar placement, verification and statistics.

use std::collections::{HashMap, HashSet};

use num_integer::Integer;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diophantine::Convergent;
use crate::error::{invalid, Error, Result};
use crate::lattice::Mode;
use crate::scalar::kahan_sum;

/// Flip-coordinate genealogy: every generation holds the 2^{N−1} binary
/// strings of length N−1, and transition i (1-based) pairs strings that
/// differ only in coordinate i.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Genealogy {
    pub n: usize,
}

/// A nuclear family in string labels. `children[0]` is the child carrying the
/// label of `parents[0]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Family {
    pub transition: usize,
    pub parents: [u32; 2],
    pub children: [u32; 2],
}

pub fn build_genealogy(n: usize) -> Result<Genealogy> {
    if !(2..=12).contains(&n) {
        return invalid(format!("genealogy needs 2 <= N <= 12, got {n}"));
    }
    Ok(Genealogy { n })
}

impl Genealogy {
    pub fn size(&self) -> usize {
        1 << (self.n - 1)
    }

    fn bit(&self, transition: usize) -> u32 {
        assert!(transition >= 1 && transition < self.n, "transition {transition} out of range");
        1 << (transition - 1)
    }

    /// Spouse of σ in generation i (transition i → i+1).
    pub fn spouse(&self, generation: usize, sigma: u32) -> u32 {
        sigma ^ self.bit(generation)
    }

    /// Sibling of σ in generation i (transition i−1 → i).
    pub fn sibling(&self, generation: usize, sigma: u32) -> u32 {
        sigma ^ self.bit(generation - 1)
    }

    /// Children of σ and its spouse in generation i+1.
    pub fn children(&self, generation: usize, sigma: u32) -> [u32; 2] {
        let b = self.bit(generation);
        [sigma & !b, sigma | b]
    }

    /// Parents in generation i−1 of σ in generation i.
    pub fn parents(&self, generation: usize, sigma: u32) -> [u32; 2] {
        let b = self.bit(generation - 1);
        [sigma & !b, sigma | b]
    }

    pub fn families(&self, transition: usize) -> Vec<Family> {
        let b = self.bit(transition);
        (0..self.size() as u32)
            .filter(|s| s & b == 0)
            .map(|s| Family { transition, parents: [s, s | b], children: [s, s | b] })
            .collect()
    }

    pub fn all_families(&self) -> Vec<Family> {
        (1..self.n).flat_map(|i| self.families(i)).collect()
    }
}

/// Positions of the genealogy in ℤ², possibly scaled by B = diag(p, q).
///
/// `generations[i][σ]` is the position of string σ in generation i+1. Extra
/// entries beyond 2^{N−1} are allowed so that verification can be exercised
/// on sets that are not genealogical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacedSet {
    pub n: usize,
    pub p: i64,
    pub q: i64,
    pub generations: Vec<Vec<Mode>>,
    pub r_empirical: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyModes {
    pub transition: usize,
    pub parents: [Mode; 2],
    pub children: [Mode; 2],
}

impl PlacedSet {
    pub fn from_generations(generations: Vec<Vec<Mode>>, p: i64, q: i64) -> Result<Self> {
        if generations.is_empty() {
            return invalid("placed set needs at least one generation");
        }
        if p < 1 || q < 1 {
            return invalid("scaling factors must be positive");
        }
        let n = generations.len();
        let r_empirical = empirical_r(&generations, p, q);
        Ok(Self { n, p, q, generations, r_empirical })
    }

    pub fn genealogy(&self) -> Option<Genealogy> {
        (self.n >= 2).then_some(Genealogy { n: self.n })
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        self.generations.iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.generations.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Generation (1-based) of every mode; the last occurrence wins on duplicates.
    pub fn generation_map(&self) -> HashMap<Mode, usize> {
        let mut m = HashMap::new();
        for (i, g) in self.generations.iter().enumerate() {
            for x in g {
                m.insert(*x, i + 1);
            }
        }
        m
    }

    pub fn mode_set(&self) -> HashSet<Mode> {
        self.modes().collect()
    }

    /// Nuclear families of the genealogy with their positions.
    pub fn families(&self) -> Vec<FamilyModes> {
        let Some(g) = self.genealogy() else { return Vec::new() };
        let size = g.size();
        if self.generations.iter().any(|v| v.len() < size) {
            return Vec::new();
        }
        g.all_families()
            .into_iter()
            .map(|f| {
                let i = f.transition - 1;
                FamilyModes {
                    transition: f.transition,
                    parents: f.parents.map(|s| self.generations[i][s as usize]),
                    children: f.children.map(|s| self.generations[i + 1][s as usize]),
                }
            })
            .collect()
    }

    /// Undoes the scaling: positions (j, k) ↦ (j/p, k/q).
    pub fn unscaled_mode(&self, n: Mode) -> Mode {
        Mode::new(n.j / self.p, n.k / self.q)
    }
}

fn empirical_r(generations: &[Vec<Mode>], p: i64, q: i64) -> f64 {
    generations
        .iter()
        .flatten()
        .map(|n| Mode::new(n.j / p, n.k / q).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Directions offered to the rectangle completion.
const DIRECTIONS: [(i64, i64); 12] =
    [(1, 0), (0, 1), (1, 1), (1, -1), (1, 2), (2, 1), (1, -2), (2, -1), (1, 3), (3, 1), (1, -3), (3, -1)];

/// Children of the diagonal a, b of a rectangle with one side along `u`:
/// a + x and b − x where x is the projection of b − a onto `u`.
/// Exact when |u|² divides ⟨b − a, u⟩.
pub fn rectangle_children(a: Mode, b: Mode, u: (i64, i64)) -> (Mode, Mode) {
    let d = b - a;
    let u = Mode::new(u.0, u.1);
    let t = d.dot(&u) / u.norm_sq();
    let x = Mode::new((t * u.j as i128) as i64, (t * u.k as i128) as i64);
    (a + x, b - x)
}

/// Places the genealogy from seeded generation-1 positions in
/// [−box, box]², completing every family to a rectangle (see [`try_place`])
/// and dividing the result by the gcd of all coordinates. Attempt k draws from ChaCha
/// stream k of `seed`; the first attempt passing [`verify_properties`] wins.
pub fn place(g: &Genealogy, seed: u64, box_size: i64, retries: usize) -> Result<PlacedSet> {
    if g.n > 6 {
        return invalid(format!("placement is verified exhaustively only for N <= 6, got {}", g.n));
    }
    if box_size < 1 || ((2 * box_size + 1) as u128).pow(2) < g.size() as u128 {
        return invalid(format!("box {box_size} too small for {} points", g.size()));
    }
    for attempt in 0..retries.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        if let Some(ps) = try_place(g, &mut rng, box_size) {
            if verify_properties(&ps).passed() {
                return Ok(ps);
            }
        }
    }
    Err(Error::PlacementFailed { attempts: retries.max(1) })
}

/// Whether adding `c` to the placed points creates a momentum relation that
/// is not `family`, or a right angle whose fourth vertex is missing.
fn admissible_point(placed: &[Mode], set: &HashSet<Mode>, c: Mode, family: Option<[Mode; 4]>) -> bool {
    let allowed = |quad: [Mode; 4]| {
        family.is_some_and(|f| {
            let key = |q: [Mode; 4]| (unordered(q[0], q[2]), unordered(q[1], q[3]));
            let (a, b) = key(quad);
            let fk = key(f);
            (a, b) == fk || (b, a) == fk
        })
    };
    for &x in placed {
        if x == c {
            continue;
        }
        if set.contains(&(c + c - x)) || set.contains(&(x + x - c)) {
            return false;
        }
        for &y in placed {
            if y == x || y == c {
                continue;
            }
            let z1 = c - x + y;
            let z2 = x - c + y;
            let in1 = set.contains(&z1);
            let in2 = set.contains(&z2);
            if (in1 && !allowed([c, x, y, z1])) || (in2 && !allowed([x, c, y, z2])) {
                return false;
            }
            if (!in2 && right_angle(x, c, y, 1, 1)) || (!in1 && right_angle(c, x, y, 1, 1)) {
                return false;
            }
        }
    }
    true
}

/// Factor by which coordinates must be multiplied so that the rectangle
/// completion of the diagonal `d` along `u` is integral.
fn completion_factor(d: Mode, u: (i64, i64)) -> i64 {
    let u = Mode::new(u.0, u.1);
    let n = u.norm_sq() as i64;
    let t = d.dot(&u) as i64;
    n / t.gcd(&n)
}

fn scaled(m: Mode, f: i64) -> Mode {
    Mode::new(m.j * f, m.k * f)
}

/// One placement attempt: generation-1 points are drawn one at a time and
/// kept only if admissible; each family then tries the side directions in a
/// seeded order (those needing no rescaling first) and keeps the first whose
/// children are admissible. When a completion is not integral the whole
/// configuration is multiplied by the smallest factor that makes it so.
pub fn try_place(g: &Genealogy, rng: &mut ChaCha8Rng, box_size: i64) -> Option<PlacedSet> {
    let mut placed: Vec<Mode> = Vec::new();
    let mut set: HashSet<Mode> = HashSet::new();
    let mut first = Vec::with_capacity(g.size());
    let mut draws = 0;
    while first.len() < g.size() {
        draws += 1;
        if draws > 100 * g.size() {
            return None;
        }
        let m = Mode::new(rng.gen_range(-box_size..=box_size), rng.gen_range(-box_size..=box_size));
        if m == Mode::new(0, 0) || set.contains(&m) {
            continue;
        }
        set.insert(m);
        if admissible_point(&placed, &set, m, None) {
            placed.push(m);
            first.push(m);
        } else {
            set.remove(&m);
        }
    }
    let mut gens = vec![first];
    for i in 1..g.n {
        let mut next: Vec<Option<Mode>> = vec![None; g.size()];
        for f in g.families(i) {
            let (n1, n3) = (gens[i - 1][f.parents[0] as usize], gens[i - 1][f.parents[1] as usize]);
            let d = n3 - n1;
            let mut dirs: Vec<(i64, i64)> = DIRECTIONS
                .iter()
                .copied()
                .filter(|&(a, b)| {
                    let u = Mode::new(a, b);
                    d.dot(&u) != 0 && d.cross(&u) != 0
                })
                .collect();
            dirs.shuffle(rng);
            dirs.sort_by_key(|&u| completion_factor(d, u));
            let mut chosen = None;
            for u in dirs {
                let k = completion_factor(d, u);
                let (sp, ss): (Vec<Mode>, HashSet<Mode>) = if k == 1 {
                    (placed.clone(), set.clone())
                } else {
                    (placed.iter().map(|m| scaled(*m, k)).collect(), set.iter().map(|m| scaled(*m, k)).collect())
                };
                let (a, b) = (scaled(n1, k), scaled(n3, k));
                let (c0, c1) = rectangle_children(a, b, u);
                if c0 == Mode::new(0, 0) || c1 == Mode::new(0, 0) || ss.contains(&c0) || ss.contains(&c1) {
                    continue;
                }
                let fam = Some([a, c0, b, c1]);
                let (mut sp, mut ss) = (sp, ss);
                ss.insert(c0);
                ss.insert(c1);
                sp.push(c0);
                if !admissible_point(&sp, &ss, c0, fam) {
                    continue;
                }
                sp.push(c1);
                if !admissible_point(&sp, &ss, c1, fam) {
                    continue;
                }
                chosen = Some((k, c0, c1, sp, ss));
                break;
            }
            let (k, c0, c1, sp, ss) = chosen?;
            if k != 1 {
                for v in gens.iter_mut().flatten() {
                    *v = scaled(*v, k);
                }
                for v in next.iter_mut().flatten() {
                    *v = scaled(*v, k);
                }
            }
            placed = sp;
            set = ss;
            next[f.children[0] as usize] = Some(c0);
            next[f.children[1] as usize] = Some(c1);
        }
        gens.push(next.into_iter().map(|m| m.expect("every child placed")).collect());
    }
    let all: Vec<Mode> = gens.iter().flatten().copied().collect();
    let d = all.iter().fold(0i64, |acc, m| acc.gcd(&m.j).gcd(&m.k)).max(1);
    for v in gens.iter_mut().flatten() {
        *v = Mode::new(v.j / d, v.k / d);
    }
    let min = all.iter().map(|m| m.norm_sq()).min().unwrap() as f64;
    let max = all.iter().map(|m| m.norm_sq()).max().unwrap() as f64;
    if max.sqrt() > 3f64.powi(g.n as i32) * min.sqrt() {
        return None;
    }
    PlacedSet::from_generations(gens, 1, 1).ok()
}

/// Positions (j, k) ↦ (p j, q k).
pub fn scale(ps: &PlacedSet, c: &Convergent) -> Result<PlacedSet> {
    if ps.p != 1 || ps.q != 1 {
        return invalid("scale expects an unscaled set");
    }
    let (p, q) = (c.p as i64, c.q as i64);
    if p < 1 || q < 1 || p as i128 != c.p || q as i128 != c.q {
        return invalid("convergent out of range for scaling");
    }
    let gens = ps
        .generations
        .iter()
        .map(|g| g.iter().map(|m| Mode::new(m.j * p, m.k * q)).collect())
        .collect();
    PlacedSet::from_generations(gens, p, q)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A position occurs more than once.
    Prolificity { mode: Mode },
    /// A genealogy family is not a non-degenerate (p,q)-rectangle.
    FamilyShape { transition: usize, parents: [Mode; 2], children: [Mode; 2] },
    /// Three vertices of a (p,q)-rectangle lie in Λ but the fourth does not.
    Closure { quad: [Mode; 4] },
    /// Spouse and children are not unique (count of geometric families found).
    Spouse { generation: usize, mode: Mode, count: usize },
    /// Parents and sibling are not unique.
    Parents { generation: usize, mode: Mode, count: usize },
    /// Sibling equals spouse.
    SiblingIsSpouse { generation: usize, mode: Mode },
    /// A nontrivial momentum relation inside Λ that is not a nuclear family.
    NonFamilyRelation { quad: [Mode; 4] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub points: usize,
    pub triples_checked: u64,
    pub violations: Vec<Violation>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Orthogonality ⟨B⁻²a, b⟩ = 0 cleared of denominators.
fn respq_orthogonal(a: Mode, b: Mode, p: i64, q: i64) -> bool {
    let (p2, q2) = ((p as i128).pow(2), (q as i128).pow(2));
    a.j as i128 * b.j as i128 * q2 + a.k as i128 * b.k as i128 * p2 == 0
}

/// Right angle at `corner` between the legs to `a` and `b`, both nonzero.
fn right_angle(a: Mode, corner: Mode, b: Mode, p: i64, q: i64) -> bool {
    let (u, v) = (a - corner, b - corner);
    u != Mode::new(0, 0) && v != Mode::new(0, 0) && respq_orthogonal(u, v, p, q)
}

fn unordered(a: Mode, b: Mode) -> (Mode, Mode) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Exhaustive check of prolificity, closure, uniqueness of spouse/children
/// and parents/sibling, sibling ≠ spouse, and absence of non-family relations.
pub fn verify_properties(ps: &PlacedSet) -> PropertyReport {
    let (p, q) = (ps.p, ps.q);
    let mut violations = Vec::new();
    let mut counts: HashMap<Mode, usize> = HashMap::new();
    for m in ps.modes() {
        *counts.entry(m).or_default() += 1;
    }
    for (m, c) in &counts {
        if *c > 1 {
            violations.push(Violation::Prolificity { mode: *m });
        }
    }
    let mut points: Vec<Mode> = counts.keys().copied().collect();
    points.sort();

    let families = ps.families();
    let mut family_keys = HashSet::new();
    for f in &families {
        let [n1, n3] = f.parents;
        let [n2, n4] = f.children;
        let closed = n1 - n2 + n3 - n4 == Mode::new(0, 0);
        if !closed || !right_angle(n1, n2, n3, p, q) || n1 == n3 {
            violations.push(Violation::FamilyShape { transition: f.transition, parents: f.parents, children: f.children });
        }
        family_keys.insert((unordered(n1, n3), unordered(n2, n4)));
    }
    let is_family = |a: Mode, b: Mode, c: Mode, d: Mode| {
        family_keys.contains(&(unordered(a, c), unordered(b, d))) || family_keys.contains(&(unordered(b, d), unordered(a, c)))
    };

    let set: HashSet<Mode> = points.iter().copied().collect();
    let mut triples = 0u64;
    for &n1 in &points {
        for &n2 in &points {
            if n2 == n1 {
                continue;
            }
            for &n3 in &points {
                if n3 == n2 {
                    continue;
                }
                triples += 1;
                let n4 = n1 - n2 + n3;
                if set.contains(&n4) {
                    if !is_family(n1, n2, n3, n4) {
                        let mut quad = [n1, n2, n3, n4];
                        canonical_quad(&mut quad);
                        violations.push(Violation::NonFamilyRelation { quad });
                    }
                } else if right_angle(n1, n2, n3, p, q) {
                    let mut quad = [n1, n2, n3, n4];
                    canonical_quad(&mut quad);
                    violations.push(Violation::Closure { quad });
                }
            }
        }
    }

    let gens: Vec<Vec<Mode>> = ps.generations.iter().map(|g| dedup_sorted(g)).collect();
    let mut spouse: HashMap<(usize, Mode), Mode> = HashMap::new();
    let mut sibling: HashMap<(usize, Mode), Mode> = HashMap::new();
    for i in 0..gens.len().saturating_sub(1) {
        let (cur, next) = (&gens[i], &gens[i + 1]);
        let next_set: HashSet<Mode> = next.iter().copied().collect();
        let cur_set: HashSet<Mode> = cur.iter().copied().collect();
        for &n1 in cur {
            let mut found = HashSet::new();
            for &n3 in cur {
                if n3 == n1 {
                    continue;
                }
                for &n2 in next {
                    let n4 = n1 + n3 - n2;
                    if n4 != n2 && next_set.contains(&n4) && right_angle(n1, n2, n3, p, q) {
                        found.insert((n3, unordered(n2, n4)));
                    }
                }
            }
            if found.len() == 1 {
                spouse.insert((i + 1, n1), found.iter().next().unwrap().0);
            } else {
                violations.push(Violation::Spouse { generation: i + 1, mode: n1, count: found.len() });
            }
        }
        for &n2 in next {
            let mut found = HashSet::new();
            for &n4 in next {
                if n4 == n2 {
                    continue;
                }
                for &n1 in cur {
                    let n3 = n2 + n4 - n1;
                    if n3 != n1 && cur_set.contains(&n3) && right_angle(n1, n2, n3, p, q) {
                        found.insert((n4, unordered(n1, n3)));
                    }
                }
            }
            if found.len() == 1 {
                sibling.insert((i + 2, n2), found.iter().next().unwrap().0);
            } else {
                violations.push(Violation::Parents { generation: i + 2, mode: n2, count: found.len() });
            }
        }
    }
    for ((g, m), s) in &sibling {
        if spouse.get(&(*g, *m)) == Some(s) {
            violations.push(Violation::SiblingIsSpouse { generation: *g, mode: *m });
        }
    }
    violations.sort();
    violations.dedup();
    PropertyReport { points: points.len(), triples_checked: triples, violations }
}

fn dedup_sorted(v: &[Mode]) -> Vec<Mode> {
    let mut v = v.to_vec();
    v.sort();
    v.dedup();
    v
}

/// Canonical representative of a quadruple under the symmetries
/// (n1,n2,n3,n4) ~ (n3,n2,n1,n4) ~ (n1,n4,n3,n2) ~ (n2,n1,n4,n3).
fn canonical_quad(quad: &mut [Mode; 4]) {
    let [a, b, c, d] = *quad;
    let cands = [
        [a, b, c, d],
        [c, b, a, d],
        [a, d, c, b],
        [c, d, a, b],
        [b, a, d, c],
        [d, a, b, c],
        [b, c, d, a],
        [d, c, b, a],
    ];
    *quad = *cands.iter().min().unwrap();
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub s: f64,
    /// S_i = Σ_{n∈Λ_i} |n|^{2s}.
    pub sums: Vec<f64>,
    pub min_norm: Vec<f64>,
    pub max_norm: Vec<f64>,
    pub r_empirical: f64,
}

impl GenerationStats {
    /// S_j / S_i with 1-based generation indices.
    pub fn ratio(&self, j: usize, i: usize) -> f64 {
        self.sums[j - 1] / self.sums[i - 1]
    }
}

pub fn stats(ps: &PlacedSet, s: f64) -> GenerationStats {
    let sums = ps
        .generations
        .iter()
        .map(|g| kahan_sum(g.iter().map(|n| (n.norm_sq() as f64).powf(s))))
        .collect();
    let min_norm = ps.generations.iter().map(|g| g.iter().map(Mode::norm).fold(f64::INFINITY, f64::min)).collect();
    let max_norm = ps.generations.iter().map(|g| g.iter().map(Mode::norm).fold(0.0, f64::max)).collect();
    GenerationStats { s, sums, min_norm, max_norm, r_empirical: ps.r_empirical }
}

/// On-disk form of a placed set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LambdaFile {
    pub n: usize,
    pub p: i64,
    pub q: i64,
    pub generations: Vec<Vec<[i64; 2]>>,
    pub families: Vec<FamilyModes>,
}

impl From<&PlacedSet> for LambdaFile {
    fn from(ps: &PlacedSet) -> Self {
        Self {
            n: ps.n,
            p: ps.p,
            q: ps.q,
            generations: ps.generations.iter().map(|g| g.iter().map(|m| [m.j, m.k]).collect()).collect(),
            families: ps.families(),
        }
    }
}

impl LambdaFile {
    pub fn into_placed(self) -> Result<PlacedSet> {
        let gens = self.generations.into_iter().map(|g| g.into_iter().map(|[j, k]| Mode::new(j, k)).collect()).collect();
        PlacedSet::from_generations(gens, self.p, self.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(j: i64, k: i64) -> Mode {
        Mode::new(j, k)
    }

    #[test]
    fn genealogy_sizes() {
        let g = build_genealogy(2).unwrap();
        assert_eq!((g.size(), g.families(1).len()), (2, 1));
        let g = build_genealogy(3).unwrap();
        assert_eq!((g.size(), g.families(1).len(), g.families(2).len()), (4, 2, 2));
        let g = build_genealogy(5).unwrap();
        assert!((1..5).all(|i| g.families(i).len() == 8));
        assert!(build_genealogy(1).is_err() && build_genealogy(13).is_err());
    }

    #[test]
    fn sibling_never_spouse() {
        for n in 3..=12 {
            let g = build_genealogy(n).unwrap();
            for i in 2..n {
                for s in 0..g.size() as u32 {
                    assert_ne!(g.sibling(i, s), g.spouse(i, s));
                    assert!(g.children(i, s).contains(&s));
                    assert!(g.parents(i, s).contains(&s));
                }
            }
        }
    }

    #[test]
    fn rectangle_completion_axis_example() {
        let (a, b) = rectangle_children(m(0, 0), m(2, 2), (1, 0));
        let mut c = [a, b];
        c.sort();
        assert_eq!(c, [m(0, 2), m(2, 0)]);
    }

    #[test]
    fn hand_set_passes_and_rogue_is_caught() {
        let ps = PlacedSet::from_generations(vec![vec![m(0, 0), m(2, 2)], vec![m(2, 0), m(0, 2)]], 1, 1).unwrap();
        assert!(verify_properties(&ps).passed());
        let mut bad = ps.clone();
        bad.generations[1].push(m(4, 2));
        let r = verify_properties(&bad);
        assert!(!r.passed());
        assert!(r.violations.iter().any(|v| matches!(v, Violation::Closure { .. } | Violation::NonFamilyRelation { .. })));
    }

    #[test]
    fn singleton_passes() {
        let ps = PlacedSet::from_generations(vec![vec![m(3, 1)]], 1, 1).unwrap();
        assert!(verify_properties(&ps).passed());
    }

    #[test]
    fn scaling_rectangle_example() {
        let ps = PlacedSet::from_generations(vec![vec![m(0, 0), m(2, 0)], vec![m(1, 1), m(1, -1)]], 1, 1).unwrap();
        let sc = scale(&ps, &Convergent { p: 3, q: 2 }).unwrap();
        assert_eq!(sc.generations, vec![vec![m(0, 0), m(6, 0)], vec![m(3, 2), m(3, -2)]]);
        assert!(verify_properties(&sc).passed());
        assert_eq!(stats(&sc, 1.0).sums[1], 26.0);
        assert!(scale(&sc, &Convergent { p: 3, q: 2 }).is_err());
        assert_eq!(scale(&ps, &Convergent { p: 1, q: 1 }).unwrap().generations, ps.generations);
    }

    #[test]
    fn stats_examples() {
        let ps = PlacedSet::from_generations(vec![vec![m(0, 0), m(2, 2)], vec![m(2, 0), m(0, 2)]], 1, 1).unwrap();
        let st = stats(&ps, 1.0);
        assert_eq!(st.sums, vec![8.0, 8.0]);
        assert_eq!(stats(&ps, 0.0).sums, vec![2.0, 2.0]);
    }

    #[test]
    fn placement_rejects_bad_requests() {
        let g = build_genealogy(7).unwrap();
        assert!(place(&g, 0, 50, 3).is_err());
        let g = build_genealogy(3).unwrap();
        assert!(place(&g, 0, 0, 3).is_err());
    }
}
