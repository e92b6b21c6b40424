//! Controlled edits of a prediction map relative to its ground truth.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mask::{binarize_class, connected_components, Connectivity, LabelMap, NO_REGION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    /// Grows and shrinks region boundaries without changing the overlap graph.
    BoundaryJitter,
    /// Cuts one predicted region into two pieces over a common ground-truth region.
    SplitPred,
    /// Bridges two predicted regions with a background path.
    MergePreds,
    /// Adds a predicted region that overlaps nothing.
    AddFalsePositive,
    /// Deletes one predicted region.
    RemovePred,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    /// Jitter rounds; extra side length of false positives.
    pub magnitude: usize,
    pub seed: u64,
    /// Class whose predicted regions are edited.
    pub class: u16,
    /// Value written into removed pixels and read as free space.
    pub background: u16,
    pub connectivity: Connectivity,
    /// Jitter attempts before giving up.
    pub max_retries: usize,
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind, magnitude: usize, seed: u64) -> Self {
        Self {
            kind,
            magnitude,
            seed,
            class: 1,
            background: 0,
            connectivity: Connectivity::Eight,
            max_retries: 32,
        }
    }
}

const N4: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
const N8: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

struct Grid {
    width: usize,
    height: usize,
}

impl Grid {
    fn of(map: &LabelMap) -> Self {
        Grid {
            width: map.width(),
            height: map.height(),
        }
    }

    fn neighbors<'a>(&self, i: usize, offsets: &'a [(isize, isize)]) -> impl Iterator<Item = usize> + 'a {
        let (w, h) = (self.width as isize, self.height as isize);
        let (r, c) = ((i / self.width) as isize, (i % self.width) as isize);
        offsets.iter().filter_map(move |&(dr, dc)| {
            let (rr, cc) = (r + dr, c + dc);
            (rr >= 0 && cc >= 0 && rr < h && cc < w).then(|| (rr * w + cc) as usize)
        })
    }
}

/// Region label per pixel for one class, `NO_REGION` elsewhere, plus the count.
fn class_labels(map: &LabelMap, class: u16, conn: Connectivity) -> Result<(Vec<u32>, usize)> {
    let set = connected_components(&binarize_class(map, class)?, class, conn);
    Ok((set.dense_labels(), set.len()))
}

fn edge_set(gt: &[u32], pred: &[u32]) -> BTreeSet<(u32, u32)> {
    gt.iter()
        .zip(pred)
        .filter(|(&g, &p)| g != NO_REGION && p != NO_REGION)
        .map(|(&g, &p)| (g, p))
        .collect()
}

fn check_inputs(gt: &LabelMap, pred: &LabelMap, spec: &PerturbationSpec) -> Result<()> {
    gt.check_paired(pred)?;
    if spec.background == spec.class || spec.background >= pred.num_classes() {
        return Err(Error::Config(format!(
            "background {} must be a class other than {}",
            spec.background, spec.class
        )));
    }
    Ok(())
}

/// Applies one perturbation to `pred`.
pub fn perturb(gt: &LabelMap, pred: &LabelMap, spec: &PerturbationSpec) -> Result<LabelMap> {
    check_inputs(gt, pred, spec)?;
    // validates the class as well
    binarize_class(pred, spec.class)?;
    match spec.kind {
        PerturbationKind::BoundaryJitter => boundary_jitter(gt, pred, spec),
        PerturbationKind::SplitPred => split_pred(gt, pred, spec),
        PerturbationKind::MergePreds => merge_preds(gt, pred, spec),
        PerturbationKind::AddFalsePositive => add_false_positive(gt, pred, spec),
        PerturbationKind::RemovePred => remove_pred(pred, spec),
    }
}

fn boundary_jitter(gt: &LabelMap, pred: &LabelMap, spec: &PerturbationSpec) -> Result<LabelMap> {
    let (gt_labels, _) = class_labels(gt, spec.class, spec.connectivity)?;
    let (pred_labels, m) = class_labels(pred, spec.class, spec.connectivity)?;
    let edges = edge_set(&gt_labels, &pred_labels);
    for attempt in 0..spec.max_retries.max(1) {
        let seed = spec
            .seed
            .wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (data, origin) = jitter_once(pred, &pred_labels, spec, &mut rng);
        let candidate = pred.with_data(data)?;
        if jitter_preserves(&candidate, &origin, &gt_labels, &edges, m, spec)? {
            return Ok(candidate);
        }
    }
    Err(Error::RetriesExhausted(spec.max_retries.max(1)))
}

/// One jitter draw. Returns the new data and, for every class pixel, the
/// original region it grew from.
fn jitter_once(pred: &LabelMap, labels: &[u32], spec: &PerturbationSpec, rng: &mut ChaCha8Rng) -> (Vec<u16>, Vec<u32>) {
    let grid = Grid::of(pred);
    let mut data = pred.data().to_vec();
    let mut origin = labels.to_vec();
    for _ in 0..spec.magnitude {
        let snapshot = data.clone();
        for i in 0..data.len() {
            if snapshot[i] == spec.class {
                let boundary = grid.neighbors(i, &N4).any(|j| snapshot[j] != spec.class);
                if boundary && removable(&grid, &data, &origin, i) && rng.random_bool(0.5) {
                    data[i] = spec.background;
                    origin[i] = NO_REGION;
                }
            } else if snapshot[i] == spec.background {
                // grow only where every live neighbour belongs to one region,
                // so no two regions can merge
                let mut owner = None;
                let mut unique = true;
                for j in grid.neighbors(i, &N8) {
                    if data[j] == spec.class {
                        match owner {
                            None => owner = Some(origin[j]),
                            Some(o) if o != origin[j] => unique = false,
                            _ => {}
                        }
                    }
                }
                // attach to a pixel present before this round, so growth
                // advances at most one pixel per round
                let attached = grid
                    .neighbors(i, &N4)
                    .any(|j| snapshot[j] == spec.class && data[j] == spec.class);
                if let (Some(o), true, true) = (owner, unique, attached) {
                    if rng.random_bool(0.5) {
                        data[i] = spec.class;
                        origin[i] = o;
                    }
                }
            }
        }
    }
    (data, origin)
}

/// Clockwise ring around a pixel; consecutive entries are 4-adjacent.
const RING: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)];

/// True when the pixel's same-region neighbours form one run around the
/// ring, so removing it cannot disconnect its region under either
/// connectivity, and the region keeps other pixels.
fn removable(grid: &Grid, data: &[u16], origin: &[u32], i: usize) -> bool {
    let (r, c) = ((i / grid.width) as isize, (i % grid.width) as isize);
    let own = origin[i];
    let member: Vec<bool> = RING
        .iter()
        .map(|&(dr, dc)| {
            let (rr, cc) = (r + dr, c + dc);
            if rr < 0 || cc < 0 || rr >= grid.height as isize || cc >= grid.width as isize {
                return false;
            }
            let j = rr as usize * grid.width + cc as usize;
            data[j] == data[i] && origin[j] == own
        })
        .collect();
    let runs = (0..8).filter(|&k| member[k] && !member[(k + 7) % 8]).count();
    // a run must also hold a 4-neighbour, or it would hang on a diagonal
    let has_edge = [1, 3, 5, 7].iter().any(|&k| member[k]);
    runs == 1 && has_edge
}

/// Old and new regions must correspond one to one, with the same
/// ground-truth overlaps.
fn jitter_preserves(
    candidate: &LabelMap,
    origin: &[u32],
    gt_labels: &[u32],
    edges: &BTreeSet<(u32, u32)>,
    m: usize,
    spec: &PerturbationSpec,
) -> Result<bool> {
    let (new_labels, new_m) = class_labels(candidate, spec.class, spec.connectivity)?;
    if new_m != m {
        return Ok(false);
    }
    let mut map_to_old = vec![NO_REGION; new_m];
    for (&l, &o) in new_labels.iter().zip(origin) {
        if l == NO_REGION {
            continue;
        }
        let slot = &mut map_to_old[l as usize];
        if *slot == NO_REGION {
            *slot = o;
        } else if *slot != o {
            return Ok(false);
        }
    }
    let distinct: BTreeSet<u32> = map_to_old.iter().copied().collect();
    if distinct.len() != m || distinct.contains(&NO_REGION) {
        return Ok(false);
    }
    let remapped: BTreeSet<(u32, u32)> = edge_set(gt_labels, &new_labels)
        .into_iter()
        .map(|(g, p)| (g, map_to_old[p as usize]))
        .collect();
    Ok(&remapped == edges)
}

fn ground_truth_sets(gt_labels: &[u32], pred_labels: &[u32], m: usize) -> Vec<BTreeSet<u32>> {
    let mut sets = vec![BTreeSet::new(); m];
    for (g, p) in edge_set(gt_labels, pred_labels) {
        sets[p as usize].insert(g);
    }
    sets
}

fn split_pred(gt: &LabelMap, pred: &LabelMap, spec: &PerturbationSpec) -> Result<LabelMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w = pred.width();
    let (gt_labels, _) = class_labels(gt, spec.class, spec.connectivity)?;
    let (pred_labels, m) = class_labels(pred, spec.class, spec.connectivity)?;
    let touched = ground_truth_sets(&gt_labels, &pred_labels, m);

    let mut candidates: Vec<u32> = (0..m as u32).filter(|&s| !touched[s as usize].is_empty()).collect();
    candidates.shuffle(&mut rng);
    for s in candidates {
        let pixels: Vec<usize> = (0..pred_labels.len()).filter(|&i| pred_labels[i] == s).collect();
        let (r0, r1) = pixels
            .iter()
            .fold((usize::MAX, 0), |(a, b), &i| (a.min(i / w), b.max(i / w)));
        let (c0, c1) = pixels
            .iter()
            .fold((usize::MAX, 0), |(a, b), &i| (a.min(i % w), b.max(i % w)));
        let mut cuts: Vec<(bool, usize)> = (r0 + 1..r1).map(|r| (true, r)).collect();
        cuts.extend((c0 + 1..c1).map(|c| (false, c)));
        cuts.shuffle(&mut rng);
        for (is_row, at) in cuts {
            let mut data = pred.data().to_vec();
            for &i in &pixels {
                if (is_row && i / w == at) || (!is_row && i % w == at) {
                    data[i] = spec.background;
                }
            }
            let candidate = pred.with_data(data)?;
            let (new_labels, new_m) = class_labels(&candidate, spec.class, spec.connectivity)?;
            if new_m != m + 1 {
                continue;
            }
            let pieces: BTreeSet<u32> = pixels
                .iter()
                .map(|&i| new_labels[i])
                .filter(|&l| l != NO_REGION)
                .collect();
            if pieces.len() != 2 {
                continue;
            }
            let sets = ground_truth_sets(&gt_labels, &new_labels, new_m);
            let mut it = pieces.iter().map(|&p| &sets[p as usize]);
            let (a, b) = (it.next().unwrap(), it.next().unwrap());
            let covers = a.union(b).count() == touched[s as usize].len();
            if covers && a.intersection(b).next().is_some() {
                return Ok(candidate);
            }
        }
    }
    Err(Error::NoEligibleRegion(
        "no predicted region can be cut into two pieces over a common ground-truth region".into(),
    ))
}

/// Merging two predictions never lowers RUM when their ground-truth sets are
/// disjoint, at most one of them already under-segments, and the bridge
/// touches no third prediction and no ground-truth region outside the pair's
/// sets.
fn merge_preds(gt: &LabelMap, pred: &LabelMap, spec: &PerturbationSpec) -> Result<LabelMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let grid = Grid::of(pred);
    let (gt_labels, _) = class_labels(gt, spec.class, spec.connectivity)?;
    let (pred_labels, m) = class_labels(pred, spec.class, spec.connectivity)?;
    let touched = ground_truth_sets(&gt_labels, &pred_labels, m);

    let mut pairs: Vec<(u32, u32)> = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            let (ta, tb) = (&touched[a], &touched[b]);
            if ta.is_disjoint(tb) && !(ta.len() >= 2 && tb.len() >= 2) {
                pairs.push((a as u32, b as u32));
            }
        }
    }
    pairs.shuffle(&mut rng);
    let data = pred.data();
    for (a, b) in pairs {
        let allowed: BTreeSet<u32> = touched[a as usize].union(&touched[b as usize]).copied().collect();
        let free = |i: usize| {
            data[i] == spec.background
                && (gt_labels[i] == NO_REGION || allowed.contains(&gt_labels[i]))
                && grid
                    .neighbors(i, &N8)
                    .all(|j| pred_labels[j] == NO_REGION || pred_labels[j] == a || pred_labels[j] == b)
        };
        let touches = |i: usize, r: u32| grid.neighbors(i, &N4).any(|j| pred_labels[j] == r);
        let Some(path) = bfs_path(&grid, data.len(), &free, |i| touches(i, a), |i| touches(i, b)) else {
            continue;
        };
        let mut out = data.to_vec();
        for i in path {
            out[i] = spec.class;
        }
        let candidate = pred.with_data(out)?;
        let (_, new_m) = class_labels(&candidate, spec.class, spec.connectivity)?;
        if new_m + 1 == m {
            return Ok(candidate);
        }
    }
    Err(Error::NoEligibleRegion(
        "no pair of predicted regions can be bridged".into(),
    ))
}

/// Shortest 4-connected path through `free` pixels from a pixel satisfying
/// `start` to one satisfying `goal`.
fn bfs_path(
    grid: &Grid,
    len: usize,
    free: &impl Fn(usize) -> bool,
    start: impl Fn(usize) -> bool,
    goal: impl Fn(usize) -> bool,
) -> Option<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let mut prev = vec![UNSEEN; len];
    let mut queue = VecDeque::new();
    for (i, p) in prev.iter_mut().enumerate() {
        if start(i) && free(i) {
            *p = i;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        if goal(i) {
            let mut path = vec![i];
            let mut cur = i;
            while prev[cur] != cur {
                cur = prev[cur];
                path.push(cur);
            }
            return Some(path);
        }
        for j in grid.neighbors(i, &N4) {
            if prev[j] == UNSEEN && free(j) {
                prev[j] = i;
                queue.push_back(j);
            }
        }
    }
    None
}

fn add_false_positive(gt: &LabelMap, pred: &LabelMap, spec: &PerturbationSpec) -> Result<LabelMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (pred.width(), pred.height());
    let max_side = 2 + spec.magnitude;
    for _ in 0..200 {
        let rh = rng.random_range(2..=max_side).min(h);
        let rw = rng.random_range(2..=max_side).min(w);
        let r0 = rng.random_range(0..=h - rh);
        let c0 = rng.random_range(0..=w - rw);
        let inside = |r: usize, c: usize| (r0..r0 + rh).contains(&r) && (c0..c0 + rw).contains(&c);
        let mut ok = true;
        'scan: for r in r0.saturating_sub(1)..(r0 + rh + 1).min(h) {
            for c in c0.saturating_sub(1)..(c0 + rw + 1).min(w) {
                let i = r * w + c;
                if pred.data()[i] == spec.class
                    || (inside(r, c) && (pred.data()[i] != spec.background || gt.data()[i] == spec.class))
                {
                    ok = false;
                    break 'scan;
                }
            }
        }
        if !ok {
            continue;
        }
        let mut data = pred.data().to_vec();
        for r in r0..r0 + rh {
            for c in c0..c0 + rw {
                data[r * w + c] = spec.class;
            }
        }
        return pred.with_data(data);
    }
    Err(Error::NoEligibleRegion("no free area for a false positive".into()))
}

fn remove_pred(pred: &LabelMap, spec: &PerturbationSpec) -> Result<LabelMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (labels, m) = class_labels(pred, spec.class, spec.connectivity)?;
    if m == 0 {
        return Err(Error::NoEligibleRegion(format!(
            "no predicted region of class {}",
            spec.class
        )));
    }
    let victim = rng.random_range(0..m as u32);
    let data = pred
        .data()
        .iter()
        .zip(&labels)
        .map(|(&v, &l)| if l == victim { spec.background } else { v })
        .collect();
    pred.with_data(data)
}
