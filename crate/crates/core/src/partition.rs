//! Thread partitioning of ordered signal lists: cdo construction, greedy
//! merging of per-po lists, wire-pair ordering and placeholder assignment.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::clocks::{is_comb, DomainAnalysis, PodOwner, PodPlan};
use crate::ir::*;
use crate::schedule::{build_osl, Osl};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("tdmax must be at least 1")]
    ZeroThreads,
    #[error("cw must be 32 or 64, got {0}")]
    WordWidth(u32),
}

/// Target execution parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExecConfig {
    pub tdmax: usize,
    pub phmax: usize,
    pub cw: u32,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            tdmax: std::thread::available_parallelism().map_or(1, |n| n.get()),
            phmax: 32,
            cw: 64,
        }
    }
}

impl ExecConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tdmax == 0 {
            return Err(ConfigError::ZeroThreads);
        }
        if self.cw != 32 && self.cw != 64 {
            return Err(ConfigError::WordWidth(self.cw));
        }
        Ok(())
    }
}

/// A clock domain plus the output-domain logic its registers drive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdoPlan {
    pub domain: usize,
    pub po: Vec<SignalId>,
    pub elements: Vec<ElementId>,
}

/// Attach to every domain the output-domain elements reachable from its
/// registers.
pub fn build_cdo(d: &FlatDesign, a: &DomainAnalysis) -> Vec<CdoPlan> {
    let drivers = d.drivers();
    // domains reaching each combinational signal
    let mut reach: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); d.signals.len()];
    let od: BTreeSet<ElementId> = a.output_pod.cone.iter().copied().collect();
    let order: Vec<ElementId> = crate::schedule::levelize(d, &a.output_pod.cone)
        .into_iter()
        .map(|(e, l)| (l, e))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|(_, e)| e)
        .collect();
    for e in order {
        let el = d.element(e);
        let mut r = BTreeSet::new();
        for &i in &el.inputs {
            if let Some(&dom) = a.domain_of.get(&i) {
                r.insert(dom);
            } else if is_comb(d, i) && drivers[i.index()].is_some_and(|p| od.contains(&p)) {
                r.extend(reach[i.index()].iter().copied());
            }
        }
        reach[el.output.index()] = r;
    }
    a.domains
        .iter()
        .map(|dom| {
            let mut elements: BTreeSet<ElementId> = a.pods[dom.id].cone.iter().copied().collect();
            let mut po: Vec<SignalId> = dom.registers.iter().map(|r| r.0).collect();
            for &e in &a.output_pod.cone {
                if reach[d.element(e).output.index()].contains(&dom.id) {
                    elements.insert(e);
                }
            }
            for &o in &a.output_pod.po {
                if reach[o.index()].contains(&dom.id) {
                    po.push(o);
                }
            }
            CdoPlan {
                domain: dom.id,
                po,
                elements: elements.into_iter().collect(),
            }
        })
        .collect()
}

/// One step of the greedy merge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeStep {
    /// Partition indices before the merge; `b` is folded into `a`.
    pub a: usize,
    pub b: usize,
    pub shared: usize,
    /// Highest shared count among all other pairs at this step.
    pub best_other: Option<usize>,
    /// Estimated live wires of the merged list fit the placeholder budget.
    pub fits_phmax: bool,
}

/// Partition outputs paired with the elements they need.
pub type OslSet<T> = (Vec<T>, BTreeSet<ElementId>);

/// Greedily merge element sets until at most `tdmax` remain, always taking
/// the pair sharing the most elements. Among equal candidates, merges whose
/// `estimate` fits `phmax` come first, then the lowest indices.
pub fn merge_osls<T: Clone>(
    mut sets: Vec<OslSet<T>>,
    tdmax: usize,
    phmax: usize,
    estimate: impl Fn(&BTreeSet<ElementId>) -> usize,
) -> (Vec<OslSet<T>>, Vec<MergeStep>) {
    let tdmax = tdmax.max(1);
    let mut log = Vec::new();
    let universe = sets
        .iter()
        .flat_map(|s| s.1.iter())
        .map(|e| e.index() + 1)
        .max()
        .unwrap_or(0);
    let mut bits: Vec<Vec<u64>> = sets.iter().map(|s| to_bits(&s.1, universe)).collect();
    while sets.len() > tdmax {
        let n = sets.len();
        let mut cands: Vec<(usize, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let shared = bits[i]
                    .iter()
                    .zip(&bits[j])
                    .map(|(x, y)| (x & y).count_ones() as usize)
                    .sum();
                cands.push((i, j, shared));
            }
        }
        let top = cands.iter().map(|c| c.2).max().unwrap();
        let mut chosen = None;
        for &(i, j, s) in cands.iter().filter(|c| c.2 == top) {
            let merged: BTreeSet<ElementId> = sets[i].1.union(&sets[j].1).copied().collect();
            let fits = estimate(&merged) <= phmax;
            if fits {
                chosen = Some((i, j, s, true));
                break;
            }
            if chosen.is_none() {
                chosen = Some((i, j, s, false));
            }
        }
        let (i, j, shared, fits) = chosen.unwrap();
        let best_other = cands.iter().filter(|c| (c.0, c.1) != (i, j)).map(|c| c.2).max();
        log.push(MergeStep {
            a: i,
            b: j,
            shared,
            best_other,
            fits_phmax: fits,
        });
        let (po_b, set_b) = sets.remove(j);
        let bits_b = bits.remove(j);
        sets[i].0.extend(po_b);
        sets[i].1.extend(set_b);
        for (x, y) in bits[i].iter_mut().zip(bits_b) {
            *x |= y;
        }
    }
    (sets, log)
}

fn to_bits(s: &BTreeSet<ElementId>, universe: usize) -> Vec<u64> {
    let mut v = vec![0u64; universe.div_ceil(64)];
    for e in s {
        v[e.index() / 64] |= 1 << (e.index() % 64);
    }
    v
}

/// Wire pairs per level: `(fw, sw)` with `fw` computed on level `l` and read
/// by `sw` on level `l + 1`.
pub type Wpl = BTreeMap<u32, Vec<(SignalId, SignalId)>>;

/// Collect wire pairs and reorder each level so first wires are computed
/// last on their level and second wires first on the next.
pub fn order_wire_pairs(d: &FlatDesign, osl: &mut Osl) -> Wpl {
    let mut level_of: BTreeMap<SignalId, u32> = BTreeMap::new();
    let mut readers: BTreeMap<SignalId, usize> = BTreeMap::new();
    for g in &osl.groups {
        for &e in &g.members {
            let el = d.element(e);
            if is_comb(d, el.output) {
                level_of.insert(el.output, g.level);
            }
            for &i in el.inputs.iter().collect::<BTreeSet<_>>() {
                *readers.entry(i).or_default() += 1;
            }
        }
    }
    let mut wpl: Wpl = BTreeMap::new();
    for g in &osl.groups {
        if g.terminal || g.level == 0 {
            continue;
        }
        for &e in &g.members {
            let el = d.element(e);
            for &i in &el.inputs {
                if level_of.get(&i) == Some(&(g.level - 1)) {
                    let pairs = wpl.entry(g.level - 1).or_default();
                    if !pairs.contains(&(i, el.output)) {
                        pairs.push((i, el.output));
                    }
                }
            }
        }
    }
    // pairs whose first wire has no other reader go last
    for pairs in wpl.values_mut() {
        pairs.sort_by_key(|&(fw, _)| readers.get(&fw).copied().unwrap_or(0) == 1);
    }
    let mut fw_rank: BTreeMap<SignalId, usize> = BTreeMap::new();
    let mut sw_rank: BTreeMap<SignalId, usize> = BTreeMap::new();
    for pairs in wpl.values() {
        for (k, &(fw, sw)) in pairs.iter().enumerate() {
            fw_rank.entry(fw).or_insert(k);
            sw_rank.entry(sw).or_insert(k);
        }
    }
    let key = |d: &FlatDesign, e: ElementId| -> (u8, usize) {
        let o = d.element(e).output;
        if let Some(&k) = sw_rank.get(&o) {
            (0, k)
        } else if let Some(&k) = fw_rank.get(&o) {
            (2, k)
        } else {
            (1, 0)
        }
    };
    for g in osl.groups.iter_mut() {
        g.members.sort_by_key(|&e| key(d, e));
    }
    let mut start = 0;
    while start < osl.groups.len() {
        let l = osl.groups[start].level;
        let mut end = start;
        while end < osl.groups.len() && osl.groups[end].level == l {
            end += 1;
        }
        osl.groups[start..end]
            .sort_by_key(|g| (g.terminal, g.members.iter().map(|&e| key(d, e)).min().unwrap_or((1, 0))));
        start = end;
    }
    wpl
}

/// Storage of the wires computed by one partition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Placement {
    pub slot_of: BTreeMap<SignalId, usize>,
    /// Wires without a placeholder slot.
    pub bulk: Vec<SignalId>,
    pub slots_used: usize,
    /// Largest number of simultaneously live wires.
    pub peak_live: usize,
}

/// Live interval `(def, last_use)` of every wire computed by `osl`, in
/// execution positions.
pub fn live_intervals(d: &FlatDesign, osl: &Osl) -> Vec<(SignalId, usize, usize)> {
    let mut def: BTreeMap<SignalId, usize> = BTreeMap::new();
    let mut last: BTreeMap<SignalId, usize> = BTreeMap::new();
    for (p, e) in osl.elements().enumerate() {
        let el = d.element(e);
        for &i in &el.inputs {
            if def.contains_key(&i) {
                last.insert(i, p);
            }
        }
        if is_comb(d, el.output) {
            def.insert(el.output, p);
        }
    }
    let mut v: Vec<(SignalId, usize, usize)> = def
        .iter()
        .map(|(&w, &p)| (w, p, last.get(&w).copied().unwrap_or(p)))
        .collect();
    v.sort_by_key(|&(w, p, _)| (p, w));
    v
}

/// Linear-scan slot allocation over the execution order of `osl`.
pub fn assign_placeholders(d: &FlatDesign, osl: &Osl, phmax: usize) -> Placement {
    let iv = live_intervals(d, osl);
    let mut out = Placement::default();
    let mut active: Vec<(usize, usize)> = Vec::new(); // (end, slot)
    let mut free: BTreeSet<usize> = BTreeSet::new();
    for &(w, start, end) in &iv {
        active.retain(|&(e, s)| {
            if e < start {
                free.insert(s);
                false
            } else {
                true
            }
        });
        let slot = match free.pop_first() {
            Some(s) => Some(s),
            None if out.slots_used < phmax => {
                out.slots_used += 1;
                Some(out.slots_used - 1)
            }
            None => None,
        };
        match slot {
            Some(s) => {
                out.slot_of.insert(w, s);
                active.push((end, s));
            }
            None => out.bulk.push(w),
        }
    }
    out.peak_live = peak_live(&iv);
    out
}

/// Largest number of intervals alive at one position.
pub fn peak_live(iv: &[(SignalId, usize, usize)]) -> usize {
    let Some(max) = iv.iter().map(|x| x.2).max() else {
        return 0;
    };
    (0..=max)
        .map(|p| iv.iter().filter(|&&(_, s, e)| s <= p && p <= e).count())
        .max()
        .unwrap_or(0)
}

/// Work of one thread within a pod pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadPartition {
    pub id: usize,
    pub po: Vec<SignalId>,
    pub osl: Osl,
    /// Elements also computed by another partition of the same pod.
    pub duplicated: Vec<ElementId>,
    pub wpl: Wpl,
    pub placement: Placement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PodPartitions {
    pub owner: PodOwner,
    pub partitions: Vec<ThreadPartition>,
    pub merge_log: Vec<MergeStep>,
}

/// Backward cone of `po` within the pod.
fn po_cone(d: &FlatDesign, drivers: &[Option<ElementId>], po: SignalId) -> BTreeSet<ElementId> {
    let mut out = BTreeSet::new();
    let mut stack = vec![po];
    let mut seen = BTreeSet::new();
    while let Some(s) = stack.pop() {
        if !seen.insert(s) {
            continue;
        }
        if let Some(e) = drivers[s.index()] {
            out.insert(e);
            stack.extend(d.element(e).inputs.iter().copied().filter(|&i| is_comb(d, i)));
        }
    }
    out
}

/// Split a pod into at most `tdmax` partitions.
pub fn partition_pod(d: &FlatDesign, pod: &PodPlan, cfg: &ExecConfig) -> PodPartitions {
    let drivers = d.drivers();
    let sets: Vec<(Vec<SignalId>, BTreeSet<ElementId>)> =
        pod.po.iter().map(|&p| (vec![p], po_cone(d, &drivers, p))).collect();
    let estimate = |s: &BTreeSet<ElementId>| s.iter().filter(|&&e| is_comb(d, d.element(e).output)).count();
    let (merged, merge_log) = merge_osls(sets, cfg.tdmax, cfg.phmax, estimate);
    let mut count: BTreeMap<ElementId, usize> = BTreeMap::new();
    for (_, s) in &merged {
        for &e in s {
            *count.entry(e).or_default() += 1;
        }
    }
    let partitions = merged
        .into_iter()
        .enumerate()
        .map(|(id, (po, set))| {
            let cone: Vec<ElementId> = set.iter().copied().collect();
            let mut osl = build_osl(d, &cone);
            let wpl = order_wire_pairs(d, &mut osl);
            let placement = assign_placeholders(d, &osl, cfg.phmax);
            ThreadPartition {
                id,
                po,
                duplicated: cone.iter().copied().filter(|e| count[e] > 1).collect(),
                osl,
                wpl,
                placement,
            }
        })
        .collect();
    PodPartitions {
        owner: pod.owner,
        partitions,
        merge_log,
    }
}
