//! Coupling sweeps: labeled branch tracking through both parity blocks,
//! classification of level crossings and location of exceptional points.
//!
//! Each parity block is tracked on its own. Diagonalizations of the base
//! grid run in parallel; matching is a sequential pass over ascending `g`,
//! so assignments do not depend on scheduling.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{Model, Parity, TruncationScheme};
use crate::eigen::{self, EigenError};
use crate::hamiltonian::{BlockTemplate, HamiltonianError};
use crate::perturb::LevelLabel;

/// Coupling at which branch labels are read off.
pub const SEED_COUPLING: f64 = 0.02;

/// Maximum number of step halvings when overlaps drop.
pub const MAX_REFINEMENTS: u32 = 8;

/// Bisection stops once the bracket is narrower than this.
pub const EP_BRACKET: f64 = 1e-6;

/// Successive-difference threshold of [`convergence_study`].
pub const CONVERGENCE_TOL: f64 = 1e-8;

// cross-overlap above which two candidates count as mixed
const MIXING: f64 = 0.3;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("eigensolver failed at g = {g}: {source}")]
    Eigen {
        g: f64,
        #[source]
        source: EigenError,
    },
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub model: Model,
    pub g_min: f64,
    pub g_max: f64,
    pub initial_step: f64,
    pub trunc: TruncationScheme,
    /// Minimum accepted eigenvector overlap before the step is halved.
    pub overlap_threshold: f64,
    /// `|Im E| ≤ imag_tol · max(1, |E|)` counts as real.
    pub imag_tol: f64,
    /// Highest unperturbed level `n` whose branches are tracked.
    pub max_level: u32,
    /// Keep the eigenvector at every sample (memory heavy at large N).
    pub keep_vectors: bool,
}

impl SweepConfig {
    pub fn new(model: Model, trunc: TruncationScheme) -> Self {
        SweepConfig {
            model,
            g_min: 0.0,
            g_max: 6.0,
            initial_step: 0.02,
            trunc,
            overlap_threshold: 0.9,
            imag_tol: 1e-7,
            max_level: 6,
            keep_vectors: false,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: String| Err(SweepError::InvalidConfig(m));
        if !(self.g_min.is_finite() && self.g_max.is_finite()) || self.g_min < 0.0 || self.g_min >= self.g_max {
            return bad(format!("need 0 <= g_min < g_max, got [{}, {}]", self.g_min, self.g_max));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return bad(format!("initial step must be positive, got {}", self.initial_step));
        }
        if !(self.overlap_threshold > 0.0 && self.overlap_threshold < 1.0) {
            return bad(format!("overlap threshold must lie in (0, 1), got {}", self.overlap_threshold));
        }
        if !(self.imag_tol > 0.0 && self.imag_tol.is_finite()) {
            return bad(format!("imaginary tolerance must be positive, got {}", self.imag_tol));
        }
        if self.max_level > self.trunc.max_total_quanta {
            return bad(format!("max level {} exceeds truncation N = {}", self.max_level, self.trunc.max_total_quanta));
        }
        Ok(())
    }

    pub fn is_real(&self, e: Complex64) -> bool {
        e.im.abs() <= self.imag_tol * e.norm().max(1.0)
    }

    fn tracked(&self, parity: Parity) -> usize {
        TruncationScheme::new(self.max_level).sector_size(parity)
    }

    fn candidates(&self, parity: Parity) -> usize {
        let t = self.tracked(parity);
        t + (t / 2).max(6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum SampleStatus {
    Real,
    /// Member of a conjugate pair; the partner is `None` when it lies
    /// outside the tracked window.
    ComplexPaired { partner: Option<LevelLabel> },
    /// No acceptable match even after maximal refinement.
    Broken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    pub g: f64,
    pub value: Complex64,
    pub status: SampleStatus,
    #[serde(skip)]
    pub vector: Option<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub label: LevelLabel,
    pub samples: Vec<BranchSample>,
}

impl Branch {
    pub fn parity(&self) -> Parity {
        self.label.parity
    }

    // index i with samples[i].g <= g <= samples[i + 1].g
    fn bracket(&self, g: f64) -> Option<usize> {
        let s = &self.samples;
        if s.is_empty() || g < s[0].g || g > s[s.len() - 1].g {
            return None;
        }
        let i = s.partition_point(|x| x.g <= g);
        Some(i.saturating_sub(1).min(s.len().saturating_sub(2)))
    }

    /// Linear interpolation between the bracketing samples.
    pub fn value_at(&self, g: f64) -> Option<Complex64> {
        let i = self.bracket(g)?;
        let s = &self.samples;
        if s.len() == 1 {
            return Some(s[0].value);
        }
        let (a, b) = (&s[i], &s[i + 1]);
        let t = if b.g > a.g { (g - a.g) / (b.g - a.g) } else { 0.0 };
        Some(a.value + (b.value - a.value) * t)
    }

    /// Both bracketing samples are real.
    pub fn real_at(&self, g: f64) -> bool {
        match self.bracket(g) {
            Some(i) => self.samples[i..(i + 2).min(self.samples.len())].iter().all(|s| s.status == SampleStatus::Real),
            None => false,
        }
    }
}

struct Solve {
    values: Vec<Complex64>,
    vectors: Vec<Vec<Complex64>>,
}

fn solve(t: &BlockTemplate, g: f64, count: usize) -> Result<Solve, SweepError> {
    let m = t.at(g)?;
    let (values, vectors) = eigen::lowest_eigenpairs(&m, count).map_err(|source| SweepError::Eigen { g, source })?;
    Ok(Solve { values, vectors })
}

fn overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm()
}

struct Track {
    label: LevelLabel,
    g: f64,
    value: Complex64,
    vector: Vec<Complex64>,
    prev: Option<(f64, Complex64)>,
}

impl Track {
    fn predict(&self, g: f64) -> Complex64 {
        match self.prev {
            Some((g0, v0)) if self.g > g0 => self.value + (self.value - v0) * ((g - self.g) / (self.g - g0)),
            _ => self.value,
        }
    }
}

fn conj_partner(values: &[Complex64], j: usize, cfg: &SweepConfig) -> Option<usize> {
    let v = values[j];
    if cfg.is_real(v) {
        return None;
    }
    values
        .iter()
        .enumerate()
        .filter(|&(k, w)| k != j && (w.im > 0.0) != (v.im > 0.0))
        .map(|(k, w)| (k, (w - v.conj()).norm()))
        .filter(|&(_, d)| d <= 1e-6 * v.norm().max(1.0))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
}

/// Assigns a candidate to every track and returns per-track quality.
fn assign(tracks: &[Track], cand: &Solve, g: f64, cfg: &SweepConfig) -> (Vec<usize>, Vec<f64>) {
    let nt = tracks.len();
    let nc = cand.values.len();
    let o: Vec<Vec<f64>> = tracks.iter().map(|t| cand.vectors.iter().map(|w| overlap(&t.vector, w)).collect()).collect();
    let mut order: Vec<(usize, usize)> = (0..nt).flat_map(|b| (0..nc).map(move |j| (b, j))).collect();
    order.sort_by(|x, y| o[y.0][y.1].total_cmp(&o[x.0][x.1]).then(x.cmp(y)));
    let mut of_track = vec![usize::MAX; nt];
    let mut of_cand = vec![usize::MAX; nc];
    for (b, j) in order {
        if of_track[b] == usize::MAX && of_cand[j] == usize::MAX {
            of_track[b] = j;
            of_cand[j] = b;
        }
    }
    let mut quality: Vec<f64> = (0..nt).map(|b| o[b][of_track[b]]).collect();

    // strongly mixed pairs: keep real order, otherwise follow the prediction
    for b in 0..nt {
        for c in b + 1..nt {
            let (j, k) = (of_track[b], of_track[c]);
            if o[b][k] < MIXING || o[c][j] < MIXING {
                continue;
            }
            let (ej, ek) = (cand.values[j], cand.values[k]);
            let swap = if cfg.is_real(ej) && cfg.is_real(ek) && cfg.is_real(tracks[b].value) && cfg.is_real(tracks[c].value) {
                (tracks[b].value.re < tracks[c].value.re) != (ej.re < ek.re)
            } else {
                let (pb, pc) = (tracks[b].predict(g), tracks[c].predict(g));
                (pb - ek).norm() + (pc - ej).norm() < (pb - ej).norm() + (pc - ek).norm()
            };
            if swap {
                of_track.swap(b, c);
                of_cand[j] = c;
                of_cand[k] = b;
            }
            quality[b] = (o[b][j].powi(2) + o[b][k].powi(2)).sqrt().min(1.0);
            quality[c] = (o[c][j].powi(2) + o[c][k].powi(2)).sqrt().min(1.0);
        }
    }

    // conjugate pairs: a branch keeps the sign of Im E it already has; at
    // coalescence the lower label takes Im E > 0
    for b in 0..nt {
        let j = of_track[b];
        let Some(k) = conj_partner(&cand.values, j, cfg) else {
            continue;
        };
        let want_upper = if !cfg.is_real(tracks[b].value) {
            tracks[b].value.im > 0.0
        } else {
            match of_cand[k] {
                c if c != usize::MAX && cfg.is_real(tracks[c].value) => tracks[b].label < tracks[c].label,
                c if c != usize::MAX => tracks[c].value.im < 0.0,
                _ => true,
            }
        };
        if (cand.values[j].im > 0.0) != want_upper {
            let c = of_cand[k];
            of_track[b] = k;
            of_cand[k] = b;
            of_cand[j] = c;
            if c != usize::MAX {
                of_track[c] = j;
            }
        }
        let pair = (o[b][j].powi(2) + o[b][k].powi(2)).sqrt().min(1.0);
        quality[b] = quality[b].max(pair);
    }
    (of_track, quality)
}

fn record(tracks: &mut [Track], branches: &mut [Branch], cand: Solve, g: f64, cfg: &SweepConfig, broken: &[bool], of_track: &[usize]) {
    let mut owner = vec![usize::MAX; cand.values.len()];
    for (b, &j) in of_track.iter().enumerate() {
        owner[j] = b;
    }
    let mut vectors: Vec<Option<Vec<Complex64>>> = cand.vectors.into_iter().map(Some).collect();
    for (b, &j) in of_track.iter().enumerate() {
        let value = cand.values[j];
        let status = if broken[b] {
            SampleStatus::Broken
        } else if cfg.is_real(value) {
            SampleStatus::Real
        } else {
            let partner = conj_partner(&cand.values, j, cfg).and_then(|k| (owner[k] != usize::MAX).then(|| tracks[owner[k]].label));
            SampleStatus::ComplexPaired { partner }
        };
        let vector = vectors[j].take().expect("each candidate assigned once");
        branches[b].samples.push(BranchSample { g, value, status, vector: cfg.keep_vectors.then(|| vector.clone()) });
        let t = &mut tracks[b];
        t.prev = Some((t.g, t.value));
        t.g = g;
        t.value = value;
        t.vector = vector;
    }
}

struct Sector<'a> {
    template: BlockTemplate,
    cfg: &'a SweepConfig,
    count: usize,
}

impl Sector<'_> {
    // advances all tracks from their current g to `g`, halving on poor overlap
    fn advance(&self, tracks: &mut [Track], branches: &mut [Branch], g: f64, cand: Solve, depth: u32) -> Result<(), SweepError> {
        let (of_track, quality) = assign(tracks, &cand, g, self.cfg);
        let worst = quality.iter().copied().fold(1.0, f64::min);
        if worst < self.cfg.overlap_threshold && depth < MAX_REFINEMENTS {
            let mid = 0.5 * (tracks[0].g + g);
            let mid_solve = solve(&self.template, mid, self.count)?;
            self.advance(tracks, branches, mid, mid_solve, depth + 1)?;
            return self.advance(tracks, branches, g, cand, depth + 1);
        }
        let broken: Vec<bool> = quality.iter().map(|&q| q < self.cfg.overlap_threshold).collect();
        record(tracks, branches, cand, g, self.cfg, &broken, &of_track);
        Ok(())
    }
}

/// Seeds labels at [`SEED_COUPLING`]: within each unperturbed level the
/// branches are numbered by descending energy, exact cross-parity ties
/// putting even parity first. This is the ordering of the perturbation
/// series by their leading distinct coefficient.
fn seed(cfg: &SweepConfig, templates: &[BlockTemplate; 2]) -> Result<[Vec<Track>; 2], SweepError> {
    let mut levels: BTreeMap<u32, Vec<(Complex64, Parity, Vec<Complex64>)>> = BTreeMap::new();
    for t in templates {
        let s = solve(t, SEED_COUPLING, cfg.tracked(t.parity()))?;
        for (v, x) in s.values.into_iter().zip(s.vectors) {
            let n = ((v.re - 2.0) / 2.0).round().max(0.0) as u32;
            levels.entry(n).or_default().push((v, t.parity(), x));
        }
    }
    let mut out: [Vec<Track>; 2] = [Vec::new(), Vec::new()];
    for (n, mut members) in levels {
        members.sort_by(|a, b| {
            let tie = (a.0.re - b.0.re).abs() <= 1e-9 * a.0.norm().max(1.0);
            if tie {
                a.1.cmp(&b.1)
            } else {
                b.0.re.total_cmp(&a.0.re)
            }
        });
        for (k, (_, parity, vector)) in members.into_iter().enumerate() {
            let label = LevelLabel { n, k: k as u32, parity };
            let e0 = Complex64::new(2.0 * (n as f64 + 1.0), 0.0);
            let slot = if parity == Parity::Even { 0 } else { 1 };
            out[slot].push(Track { label, g: 0.0, value: e0, vector, prev: None });
        }
    }
    for tracks in out.iter_mut() {
        tracks.sort_by_key(|t| t.label);
    }
    Ok(out)
}

fn base_grid(cfg: &SweepConfig) -> Vec<f64> {
    let steps = (cfg.g_max / cfg.initial_step - 1e-9).ceil().max(1.0) as usize;
    (1..=steps).map(|i| (i as f64 * cfg.initial_step).min(cfg.g_max)).collect()
}

fn sweep_sector(cfg: &SweepConfig, template: BlockTemplate, mut tracks: Vec<Track>) -> Result<Vec<Branch>, SweepError> {
    let mut branches: Vec<Branch> = tracks
        .iter()
        .map(|t| Branch {
            label: t.label,
            samples: vec![BranchSample { g: 0.0, value: t.value, status: SampleStatus::Real, vector: None }],
        })
        .collect();
    let count = cfg.candidates(template.parity()).min(template.dim());
    let sector = Sector { template, cfg, count };
    let grid = base_grid(cfg);
    let batch = 2 * rayon::current_num_threads().max(1);
    for chunk in grid.chunks(batch) {
        let solves: Vec<Result<Solve, SweepError>> = chunk.par_iter().map(|&g| solve(&sector.template, g, count)).collect();
        for (&g, s) in chunk.iter().zip(solves) {
            sector.advance(&mut tracks, &mut branches, g, s?, 0)?;
        }
    }
    for b in branches.iter_mut() {
        b.samples.retain(|s| s.g >= cfg.g_min - 1e-12);
    }
    Ok(branches)
}

/// Tracks every branch with `n ≤ cfg.max_level` from `g = 0` to `g_max`
/// and returns those samples with `g ≥ g_min`, branches ordered by label.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<Branch>, SweepError> {
    cfg.validate()?;
    let templates = [
        BlockTemplate::new(cfg.model, Parity::Even, cfg.trunc),
        BlockTemplate::new(cfg.model, Parity::Odd, cfg.trunc),
    ];
    let [even, odd] = seed(cfg, &templates)?;
    let [te, to] = templates;
    let (a, b) = rayon::join(|| sweep_sector(cfg, te, even), || sweep_sector(cfg, to, odd));
    let mut all = a?;
    all.extend(b?);
    all.sort_by_key(|b| b.label);
    Ok(all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CrossingKind {
    RealCrossing,
    ExceptionalPoint,
    /// More than two branches coalesced within one step.
    MultiBranch,
}

/// `|Im E| ≈ alpha · √|g − g_c|` near an exceptional point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqrtFit {
    pub alpha: f64,
    /// Largest relative misfit at the nearest complex-side samples.
    pub max_rel_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub kind: CrossingKind,
    pub g_location: f64,
    pub halfwidth: f64,
    pub branch_a: LevelLabel,
    pub branch_b: LevelLabel,
    pub parities: (Parity, Parity),
    /// Further members of a multi-branch event.
    pub others: Vec<LevelLabel>,
    /// 1-based ranks by Re E among all tracked branches at `g_location`.
    pub ranks: (usize, usize),
    pub sqrt_fit: Option<SqrtFit>,
}

fn ranks(branches: &[Branch], a: &Branch, b: &Branch, g: f64) -> (usize, usize) {
    let level = match (a.value_at(g), b.value_at(g)) {
        (Some(x), Some(y)) => 0.5 * (x.re + y.re),
        _ => return (0, 0),
    };
    let below = branches
        .iter()
        .filter(|c| c.label != a.label && c.label != b.label)
        .filter_map(|c| c.value_at(g))
        .filter(|v| v.re < level)
        .count();
    (below + 1, below + 2)
}

fn real_crossings(branches: &[Branch], out: &mut Vec<CrossingEvent>) {
    for (ia, a) in branches.iter().enumerate() {
        for b in &branches[ia + 1..] {
            if a.parity() == b.parity() {
                continue;
            }
            let mut gs: Vec<f64> = a.samples.iter().chain(&b.samples).map(|s| s.g).collect();
            gs.sort_by(f64::total_cmp);
            gs.dedup();
            let diff = |g: f64| -> Option<f64> { Some(a.value_at(g)?.re - b.value_at(g)?.re) };
            let tol = |g: f64| 1e-8 * a.value_at(g).map_or(1.0, |v| v.norm().max(1.0));
            for w in gs.windows(2) {
                let (g0, g1) = (w[0], w[1]);
                if !(a.real_at(g0) && a.real_at(g1) && b.real_at(g0) && b.real_at(g1)) {
                    continue;
                }
                let (Some(d0), Some(d1)) = (diff(g0), diff(g1)) else {
                    continue;
                };
                if d0.abs() <= tol(g0) || d1.abs() <= tol(g1) || (d0 > 0.0) == (d1 > 0.0) {
                    continue;
                }
                let root = g0 + (g1 - g0) * d0 / (d0 - d1);
                out.push(CrossingEvent {
                    kind: CrossingKind::RealCrossing,
                    g_location: root,
                    halfwidth: 0.5 * (g1 - g0),
                    branch_a: a.label,
                    branch_b: b.label,
                    parities: (a.parity(), b.parity()),
                    others: Vec::new(),
                    ranks: ranks(branches, a, b, root),
                    sqrt_fit: None,
                });
            }
        }
    }
}

// Is the pair near `target` complex at g? Returns its |Im E| when it is.
fn pair_state(t: &BlockTemplate, g: f64, count: usize, target: f64, cfg: &SweepConfig) -> Result<Option<f64>, SweepError> {
    let s = solve(t, g, count)?;
    let mut near: Vec<Complex64> = s.values.clone();
    near.sort_by(|x, y| (x.re - target).abs().total_cmp(&(y.re - target).abs()));
    let (x, y) = (near[0], near[1]);
    let paired = !cfg.is_real(x) && (x - y.conj()).norm() <= 1e-6 * x.norm().max(1.0);
    Ok(paired.then_some(x.im.abs()))
}

struct Transition {
    i: usize,
    forward: bool,
    a: usize,
    b: usize,
}

fn exceptional_points(branches: &[Branch], cfg: &SweepConfig, out: &mut Vec<CrossingEvent>) -> Result<(), SweepError> {
    for parity in Parity::BOTH {
        let idx: Vec<usize> = (0..branches.len()).filter(|&i| branches[i].parity() == parity).collect();
        if idx.len() < 2 {
            continue;
        }
        let template = BlockTemplate::new(cfg.model, parity, cfg.trunc);
        let count = cfg.candidates(parity).min(template.dim());
        let len = idx.iter().map(|&i| branches[i].samples.len()).min().unwrap_or(0);
        let complex = |bi: usize, s: usize| matches!(branches[bi].samples[s].status, SampleStatus::ComplexPaired { .. });
        let partner = |bi: usize, s: usize| match branches[bi].samples[s].status {
            SampleStatus::ComplexPaired { partner } => partner,
            _ => None,
        };
        let mut transitions: Vec<Transition> = Vec::new();
        for s in 1..len {
            // branches that change between real and paired in this step
            let moving: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&bi| branches[bi].samples[s - 1].status != SampleStatus::Broken && branches[bi].samples[s].status != SampleStatus::Broken)
                .filter(|&bi| complex(bi, s - 1) != complex(bi, s))
                .collect();
            let mut seen = vec![false; moving.len()];
            for (m, &bi) in moving.iter().enumerate() {
                if seen[m] {
                    continue;
                }
                let forward = complex(bi, s);
                let at = if forward { s } else { s - 1 };
                let v = branches[bi].samples[at].value;
                // everything coalescing at the same place in the same step
                let cluster: Vec<usize> = (0..moving.len())
                    .filter(|&q| {
                        let w = branches[moving[q]].samples[at].value;
                        complex(moving[q], s) == forward && (w.re - v.re).abs() <= 1e-6 * v.norm().max(1.0)
                    })
                    .collect();
                for &q in &cluster {
                    seen[q] = true;
                }
                if cluster.len() > 2 {
                    let labels: Vec<LevelLabel> = cluster.iter().map(|&q| branches[moving[q]].label).collect();
                    let (g0, g1) = (branches[bi].samples[s - 1].g, branches[bi].samples[s].g);
                    out.push(CrossingEvent {
                        kind: CrossingKind::MultiBranch,
                        g_location: 0.5 * (g0 + g1),
                        halfwidth: 0.5 * (g1 - g0),
                        branch_a: labels[0],
                        branch_b: labels[1],
                        parities: (parity, parity),
                        others: labels[2..].to_vec(),
                        ranks: (0, 0),
                        sqrt_fit: None,
                    });
                    continue;
                }
                let p = partner(bi, at);
                let other = cluster.iter().map(|&q| moving[q]).find(|&q| q != bi && Some(branches[q].label) == p);
                if let Some(bj) = other {
                    let (a, b) = if branches[bi].label < branches[bj].label { (bi, bj) } else { (bj, bi) };
                    transitions.push(Transition { i: s, forward, a, b });
                }
            }
        }
        for t in transitions {
            out.push(locate_ep(branches, cfg, &template, count, &t)?);
        }
    }
    Ok(())
}

fn locate_ep(branches: &[Branch], cfg: &SweepConfig, template: &BlockTemplate, count: usize, t: &Transition) -> Result<CrossingEvent, SweepError> {
    let (a, b) = (&branches[t.a], &branches[t.b]);
    let (s0, s1) = (&a.samples[t.i - 1], &a.samples[t.i]);
    let target = |g: f64| {
        let m0 = 0.5 * (s0.value.re + b.samples[t.i - 1].value.re);
        let m1 = 0.5 * (s1.value.re + b.samples[t.i].value.re);
        m0 + (m1 - m0) * (g - s0.g) / (s1.g - s0.g)
    };
    // (g, |Im E|) on the complex side, nearest last
    let (mut real_g, mut cplx_g) = if t.forward { (s0.g, s1.g) } else { (s1.g, s0.g) };
    let mut cplx: Vec<(f64, f64)> = vec![(cplx_g, (if t.forward { s1 } else { s0 }).value.im.abs())];
    while (cplx_g - real_g).abs() > EP_BRACKET {
        let mid = 0.5 * (real_g + cplx_g);
        match pair_state(template, mid, count, target(mid), cfg)? {
            Some(im) => {
                cplx_g = mid;
                cplx.push((mid, im));
            }
            None => real_g = mid,
        }
    }
    let mut g_c = 0.5 * (real_g + cplx_g);
    let halfwidth = 0.5 * (cplx_g - real_g).abs();
    // y² = α²|g − g_c| through the two nearest complex-side points
    if let [.., (g1, y1), (g2, y2)] = cplx[..] {
        let den = y2 * y2 - y1 * y1;
        if den != 0.0 {
            let fit = (y2 * y2 * g1 - y1 * y1 * g2) / den;
            if (fit - g_c).abs() <= halfwidth {
                g_c = fit;
            }
        }
    }
    // fit quality against the nearest sweep samples on the complex side
    let side: Vec<(f64, f64)> = if t.forward {
        a.samples[t.i..].iter().take_while(|s| s.status != SampleStatus::Real).take(2).map(|s| (s.g, s.value.im.abs())).collect()
    } else {
        a.samples[..t.i].iter().rev().take_while(|s| s.status != SampleStatus::Real).take(2).map(|s| (s.g, s.value.im.abs())).collect()
    };
    let roots: Vec<f64> = side.iter().map(|&(g, _)| (g - g_c).abs().sqrt()).collect();
    let norm: f64 = roots.iter().map(|r| r * r).sum();
    let sqrt_fit = (norm > 0.0).then(|| {
        let alpha = side.iter().zip(&roots).map(|(&(_, y), r)| y * r).sum::<f64>() / norm;
        let max_rel_residual = side.iter().zip(&roots).map(|(&(_, y), r)| ((alpha * r - y) / y).abs()).fold(0.0, f64::max);
        SqrtFit { alpha, max_rel_residual }
    });
    Ok(CrossingEvent {
        kind: CrossingKind::ExceptionalPoint,
        g_location: g_c,
        halfwidth,
        branch_a: a.label,
        branch_b: b.label,
        parities: (a.parity(), b.parity()),
        others: Vec::new(),
        ranks: ranks(branches, a, b, if t.forward { s0.g } else { s1.g }),
        sqrt_fit,
    })
}

/// Exceptional points between same-parity branches (located by bisection)
/// and real crossings between different-parity branches, sorted by `g`.
pub fn detect_crossings(branches: &[Branch], cfg: &SweepConfig) -> Result<Vec<CrossingEvent>, SweepError> {
    cfg.validate()?;
    let mut out = Vec::new();
    exceptional_points(branches, cfg, &mut out)?;
    real_crossings(branches, &mut out);
    out.sort_by(|x, y| x.g_location.total_cmp(&y.g_location).then(x.branch_a.cmp(&y.branch_a)).then(x.branch_b.cmp(&y.branch_b)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_max: u32,
    pub values: Vec<Complex64>,
    /// Largest change against the previous row.
    pub max_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub model: Model,
    pub g: f64,
    pub rows: Vec<ConvergenceRow>,
    /// First truncation whose change from its predecessor is below
    /// [`CONVERGENCE_TOL`].
    pub converged_at: Option<u32>,
}

/// Lowest eigenvalues of both parity blocks for several truncations.
pub fn convergence_study(model: Model, g: f64, level_count: usize, truncations: &[u32]) -> Result<ConvergenceTable, SweepError> {
    if truncations.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SweepError::InvalidConfig("truncations must be strictly ascending".into()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut converged_at = None;
    for &n in truncations {
        let mut values = Vec::new();
        for parity in Parity::BOTH {
            let t = BlockTemplate::new(model, parity, TruncationScheme::new(n));
            values.extend(solve(&t, g, level_count)?.values);
        }
        values.sort_by(|a, b| a.re.total_cmp(&b.re).then(b.im.total_cmp(&a.im)));
        values.truncate(level_count);
        let max_change = rows.last().map(|prev: &ConvergenceRow| {
            prev.values.iter().zip(&values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        });
        if converged_at.is_none() && max_change.is_some_and(|d| d < CONVERGENCE_TOL) {
            converged_at = Some(n);
        }
        rows.push(ConvergenceRow { n_max: n, values, max_change });
    }
    Ok(ConvergenceTable { model, g, rows, converged_at })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetEntry {
    pub branch_a: LevelLabel,
    pub branch_b: LevelLabel,
    pub g_c: f64,
}

/// First exceptional point of every same-parity pair inside the level
/// window, sorted by the higher level, then the lower one, then `g_c`.
pub fn onset_trend(model: Model, window: RangeInclusive<u32>, cfg: &SweepConfig) -> Result<Vec<OnsetEntry>, SweepError> {
    if window.is_empty() {
        return Ok(Vec::new());
    }
    let cfg = SweepConfig { model, max_level: *window.end(), ..cfg.clone() };
    let branches: Vec<Branch> = run_sweep(&cfg)?;
    let inside = |l: &LevelLabel| window.contains(&l.n);
    let branches: Vec<Branch> = branches.into_iter().filter(|b| inside(&b.label)).collect();
    if branches.len() < 2 {
        return Ok(Vec::new());
    }
    Ok(onset_from_events(&detect_crossings(&branches, &cfg)?, &window))
}

/// The onset table from already detected events.
pub fn onset_from_events(events: &[CrossingEvent], window: &RangeInclusive<u32>) -> Vec<OnsetEntry> {
    let mut first: BTreeMap<(LevelLabel, LevelLabel), f64> = BTreeMap::new();
    for e in events {
        if e.kind != CrossingKind::ExceptionalPoint || !window.contains(&e.branch_a.n) || !window.contains(&e.branch_b.n) {
            continue;
        }
        let g = first.entry((e.branch_a, e.branch_b)).or_insert(e.g_location);
        *g = g.min(e.g_location);
    }
    let mut out: Vec<OnsetEntry> = first.into_iter().map(|((a, b), g_c)| OnsetEntry { branch_a: a, branch_b: b, g_c }).collect();
    out.sort_by(|x, y| {
        let key = |e: &OnsetEntry| (e.branch_a.n.max(e.branch_b.n), e.branch_a.n.min(e.branch_b.n));
        key(x).cmp(&key(y)).then(x.g_c.total_cmp(&y.g_c))
    });
    out
}

/// Smallest onset among pairs involving a level `≥ split` and among pairs
/// confined below `split`.
pub fn onset_split(entries: &[OnsetEntry], split: u32) -> (Option<f64>, Option<f64>) {
    let min = |it: &mut dyn Iterator<Item = f64>| it.fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.min(g))));
    let high = min(&mut entries.iter().filter(|e| e.branch_a.n.max(e.branch_b.n) >= split).map(|e| e.g_c));
    let low = min(&mut entries.iter().filter(|e| e.branch_a.n.max(e.branch_b.n) < split).map(|e| e.g_c));
    (high, low)
}

pub const CSV_HEADER: &str = "g,parity,label_n,label_k,re_E,im_E";

/// One row per sample: `g, parity, label_n, label_k, re_E, im_E` with
/// 17 significant digits.
pub fn write_branches_csv<W: Write>(branches: &[Branch], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for b in branches {
        for s in &b.samples {
            writeln!(w, "{:.16e},{},{},{},{:.16e},{:.16e}", s.g, b.parity(), b.label.n, b.label.k, s.value.re, s.value.im)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingReport<'a> {
    pub config: &'a SweepConfig,
    pub events: &'a [CrossingEvent],
}

pub fn crossing_report_json(cfg: &SweepConfig, events: &[CrossingEvent]) -> serde_json::Result<String> {
    serde_json::to_string_pretty(&CrossingReport { config: cfg, events })
}
