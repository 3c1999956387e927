//! The activity-gated simulator that executes a [`Plan`].
//!
//! Every pod partition owns a private store for the wires it computes and a
//! dirty flag per signal group. Inputs, registers and published outputs live
//! in one shared store. A cycle settles the output pod, then processes clock
//! edges: triggered domain pods are evaluated (partitions in parallel),
//! registers commit in their planned order and the output pod settles again.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;

use crate::bits::{words_for, Bits};
use crate::clocks::{is_comb, PodOwner};
use crate::ir::*;
use crate::ops;
use crate::partition::ThreadPartition;
use crate::plan::Plan;
use crate::sim::{CycleModel, SimError, EDGE_ROUND_CAP};

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimOptions {
    /// Skip groups whose inputs did not change (`false` evaluates everything).
    pub gating: bool,
    /// Worker threads for partition evaluation.
    pub threads: usize,
    /// Count wire evaluations per pass.
    pub instrument: bool,
    /// Keep the number of evaluations of every cycle.
    pub record_per_cycle: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            gating: true,
            threads: 1,
            instrument: false,
            record_per_cycle: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub cycles: u64,
    /// Combinational element evaluations, register data inputs included.
    pub evaluations: u64,
    pub groups_evaluated: u64,
    pub groups_skipped: u64,
    pub pod_passes: u64,
    /// Most evaluations of a single wire within one partition pass.
    pub max_wire_evals_per_pass: u32,
    pub per_cycle: Vec<u64>,
}

#[derive(Clone, Copy, Debug)]
enum Src {
    Shared(u32, u32),
    Wire(u32),
}

#[derive(Clone, Copy, Debug)]
enum Out {
    Wire(u32),
    Term(u32),
}

#[derive(Clone, Debug)]
struct Inst {
    op: Op,
    width: u32,
    narrow: bool,
    ins: Vec<Src>,
    in_widths: Vec<u32>,
    out: Out,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GroupKind {
    Comb,
    /// Data input of a split register; computes its pre-value.
    Split,
    /// Data input of a non-split register; evaluated at commit.
    Commit,
}

#[derive(Clone, Debug)]
struct GroupRt {
    insts: Range<usize>,
    kind: GroupKind,
}

#[derive(Clone, Copy, Debug)]
struct WireRt {
    home: u32,
    nw: u32,
    slot: u32,
}

#[derive(Clone, Copy, Debug)]
struct TermRt {
    reg: SignalId,
    pre: u32,
    nw: u32,
}

#[derive(Clone, Debug)]
struct PartProg {
    insts: Vec<Inst>,
    groups: Vec<GroupRt>,
    wires: Vec<WireRt>,
    /// Offset of each placeholder slot in the private store.
    slot_off: Vec<u32>,
    mem_len: usize,
    wire_watch: Vec<Vec<u32>>,
    terms: Vec<TermRt>,
    pre_len: usize,
    /// Outputs and derived clocks this partition publishes.
    publish: Vec<(u32, SignalId)>,
}

#[derive(Clone, Debug)]
struct PartState {
    mem: Vec<u64>,
    slot_owner: Vec<u32>,
    dirty: Vec<bool>,
    pre: Vec<u64>,
    pass_evals: Vec<u32>,
}

#[derive(Clone, Copy, Debug, Default)]
struct PassStats {
    evaluations: u64,
    evaluated: u64,
    skipped: u64,
    max_wire: u32,
}

impl PassStats {
    fn add(&mut self, o: PassStats) {
        self.evaluations += o.evaluations;
        self.evaluated += o.evaluated;
        self.skipped += o.skipped;
        self.max_wire = self.max_wire.max(o.max_wire);
    }
}

#[derive(Clone, Debug)]
struct DomainRt {
    root: SignalId,
    regs: Vec<(SignalId, Polarity)>,
    commit: Vec<SignalId>,
    split: Vec<SignalId>,
}

pub struct Simulator {
    plan: Plan,
    opts: SimOptions,
    soff: Vec<u32>,
    snw: Vec<u32>,
    shared: Vec<u64>,
    progs: Vec<PartProg>,
    states: Vec<PartState>,
    pod_parts: Vec<Range<usize>>,
    shared_watch: Vec<Vec<(u32, u32)>>,
    /// Register -> (partition, group, terminal).
    term_of: BTreeMap<SignalId, (usize, usize, u32)>,
    domains: Vec<DomainRt>,
    prev_root: Vec<bool>,
    cycle: u64,
    stats: Stats,
    pool: Option<rayon::ThreadPool>,
}

fn fetch<'a>(prog: &PartProg, st: &'a PartState, shared: &'a [u64], src: Src) -> &'a [u64] {
    match src {
        Src::Shared(off, nw) => &shared[off as usize..(off + nw) as usize],
        Src::Wire(w) => {
            let wr = prog.wires[w as usize];
            let off = if wr.slot != NONE && st.slot_owner[wr.slot as usize] == w {
                prog.slot_off[wr.slot as usize]
            } else {
                wr.home
            };
            &st.mem[off as usize..(off + wr.nw) as usize]
        }
    }
}

/// Evaluate `inst` into `out`.
fn compute(prog: &PartProg, st: &PartState, shared: &[u64], inst: &Inst, out: &mut Vec<u64>) {
    out.clear();
    if inst.narrow && inst.ins.len() <= 8 {
        let mut vals = [0u64; 8];
        for (v, &s) in vals.iter_mut().zip(&inst.ins) {
            *v = fetch(prog, st, shared, s)[0];
        }
        out.push(ops::eval_narrow(
            &inst.op,
            inst.width,
            &vals[..inst.ins.len()],
            &inst.in_widths,
        ));
        return;
    }
    let ins: Vec<&[u64]> = inst.ins.iter().map(|&s| fetch(prog, st, shared, s)).collect();
    out.resize(words_for(inst.width), 0);
    ops::eval(&inst.op, inst.width, &ins, &inst.in_widths, out);
}

/// Store a wire value through its placeholder slot; returns whether it changed.
fn store_wire(prog: &PartProg, st: &mut PartState, w: u32, v: &[u64]) -> bool {
    let wr = prog.wires[w as usize];
    let nw = wr.nw as usize;
    if wr.slot == NONE {
        let h = wr.home as usize;
        if st.mem[h..h + nw] == *v {
            return false;
        }
        st.mem[h..h + nw].copy_from_slice(v);
        return true;
    }
    let s = wr.slot as usize;
    let so = prog.slot_off[s] as usize;
    let owner = st.slot_owner[s];
    if owner == w {
        if st.mem[so..so + nw] == *v {
            return false;
        }
        st.mem[so..so + nw].copy_from_slice(v);
        return true;
    }
    // evict the previous occupant to its home location
    if owner != NONE {
        let ow = prog.wires[owner as usize];
        let (oh, onw) = (ow.home as usize, ow.nw as usize);
        st.mem.copy_within(so..so + onw, oh);
    }
    let h = wr.home as usize;
    let changed = st.mem[h..h + nw] != *v;
    st.slot_owner[s] = w;
    st.mem[so..so + nw].copy_from_slice(v);
    changed
}

/// One gated (or full) pass over a partition.
fn run_pass(prog: &PartProg, st: &mut PartState, shared: &[u64], gating: bool, instrument: bool) -> PassStats {
    let mut ps = PassStats::default();
    let mut buf = Vec::with_capacity(4);
    if instrument {
        st.pass_evals.iter_mut().for_each(|c| *c = 0);
    }
    for (g, grp) in prog.groups.iter().enumerate() {
        if grp.kind == GroupKind::Commit {
            continue;
        }
        if gating && !st.dirty[g] {
            ps.skipped += 1;
            continue;
        }
        st.dirty[g] = false;
        ps.evaluated += 1;
        for k in grp.insts.clone() {
            let inst = &prog.insts[k];
            compute(prog, st, shared, inst, &mut buf);
            ps.evaluations += 1;
            match inst.out {
                Out::Wire(w) => {
                    if instrument {
                        st.pass_evals[w as usize] += 1;
                        ps.max_wire = ps.max_wire.max(st.pass_evals[w as usize]);
                    }
                    if store_wire(prog, st, w, &buf) {
                        for &r in &prog.wire_watch[w as usize] {
                            st.dirty[r as usize] = true;
                        }
                    }
                }
                Out::Term(t) => {
                    let tr = prog.terms[t as usize];
                    st.pre[tr.pre as usize..(tr.pre + tr.nw) as usize].copy_from_slice(&buf);
                }
            }
        }
    }
    ps
}

impl Simulator {
    pub fn new(plan: Plan, opts: SimOptions) -> Self {
        let d = &plan.design;
        let mut soff = Vec::with_capacity(d.signals.len());
        let mut snw = Vec::with_capacity(d.signals.len());
        let mut total = 0u32;
        for s in &d.signals {
            let nw = words_for(s.width) as u32;
            soff.push(total);
            snw.push(nw);
            total += nw;
        }
        let mut shared = vec![0u64; total as usize];
        for s in &d.signals {
            let o = soff[s.id.index()] as usize;
            let v = s.init_value();
            shared[o..o + v.words().len()].copy_from_slice(v.words());
        }

        let mut progs = Vec::new();
        let mut pod_parts = Vec::new();
        for pod in plan.pods() {
            let start = progs.len();
            for t in &pod.partitions {
                progs.push(compile_partition(&plan, pod.owner, t, &soff, &snw));
            }
            pod_parts.push(start..progs.len());
        }

        let mut shared_watch: Vec<Vec<(u32, u32)>> = vec![Vec::new(); d.signals.len()];
        let mut term_of = BTreeMap::new();
        let mut pi = 0;
        for pod in plan.pods() {
            for t in &pod.partitions {
                for (g, grp) in t.osl.groups.iter().enumerate() {
                    for &s in &grp.watch {
                        if !is_comb(d, s) {
                            shared_watch[s.index()].push((pi as u32, g as u32));
                        }
                    }
                }
                for (k, tr) in progs[pi].terms.iter().enumerate() {
                    let g = progs[pi]
                        .groups
                        .iter()
                        .position(|grp| {
                            grp.insts
                                .clone()
                                .any(|i| matches!(progs[pi].insts[i].out, Out::Term(x) if x as usize == k))
                        })
                        .expect("terminal has a group");
                    term_of.insert(tr.reg, (pi, g, k as u32));
                }
                pi += 1;
            }
        }

        let domains = plan
            .analysis
            .domains
            .iter()
            .map(|dom| {
                let o = &plan.orders[dom.id];
                DomainRt {
                    root: dom.clock_root,
                    regs: dom.registers.clone(),
                    commit: o
                        .commit_sequence
                        .iter()
                        .copied()
                        .filter(|r| !o.split_set.contains(r))
                        .collect(),
                    split: o.split_set.iter().copied().collect(),
                }
            })
            .collect();

        let states = progs
            .iter()
            .map(|p| PartState {
                mem: vec![0; p.mem_len],
                slot_owner: vec![NONE; p.slot_off.len()],
                dirty: vec![true; p.groups.len()],
                pre: vec![0; p.pre_len],
                pass_evals: vec![0; p.wires.len()],
            })
            .collect();

        let pool = (opts.threads > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.threads)
                .build()
                .expect("thread pool")
        });

        let mut sim = Simulator {
            soff,
            snw,
            shared,
            progs,
            states,
            pod_parts,
            shared_watch,
            term_of,
            domains,
            prev_root: Vec::new(),
            cycle: 0,
            stats: Stats::default(),
            pool,
            opts,
            plan,
        };
        sim.output_pass();
        sim.prev_root = sim.domains.iter().map(|dm| sim.root_value(dm.root)).collect();
        sim.stats = Stats::default();
        sim
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = Stats::default();
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    fn root_value(&self, s: SignalId) -> bool {
        self.shared[self.soff[s.index()] as usize] & 1 == 1
    }

    fn mark_shared(&mut self, s: SignalId) {
        for &(p, g) in &self.shared_watch[s.index()] {
            self.states[p as usize].dirty[g as usize] = true;
        }
    }

    fn write_shared(&mut self, s: SignalId, v: &[u64]) {
        let o = self.soff[s.index()] as usize;
        let n = self.snw[s.index()] as usize;
        if self.shared[o..o + n] != *v {
            self.shared[o..o + n].copy_from_slice(v);
            self.mark_shared(s);
        }
    }

    /// Run passes over the partitions of `pods` (parallel when threaded).
    fn run_pods(&mut self, pods: &[usize]) {
        let mut active = vec![false; self.progs.len()];
        for &p in pods {
            for k in self.pod_parts[p].clone() {
                active[k] = true;
            }
        }
        let (gating, instrument) = (self.opts.gating, self.opts.instrument);
        let shared = &self.shared;
        let progs = &self.progs;
        let work = |(k, st): (usize, &mut PartState)| {
            if active[k] {
                run_pass(&progs[k], st, shared, gating, instrument)
            } else {
                PassStats::default()
            }
        };
        let total = match &self.pool {
            Some(pool) => pool.install(|| {
                self.states
                    .par_iter_mut()
                    .enumerate()
                    .map(work)
                    .reduce(PassStats::default, |mut a, b| {
                        a.add(b);
                        a
                    })
            }),
            None => self
                .states
                .iter_mut()
                .enumerate()
                .map(work)
                .fold(PassStats::default(), |mut a, b| {
                    a.add(b);
                    a
                }),
        };
        self.stats.pod_passes += active.iter().filter(|&&a| a).count() as u64;
        self.stats.evaluations += total.evaluations;
        self.stats.groups_evaluated += total.evaluated;
        self.stats.groups_skipped += total.skipped;
        self.stats.max_wire_evals_per_pass = self.stats.max_wire_evals_per_pass.max(total.max_wire);
    }

    /// Settle the output pod and publish its outputs.
    fn output_pass(&mut self) {
        let od = self.pod_parts.len() - 1;
        self.run_pods(&[od]);
        for k in self.pod_parts[od].clone() {
            for idx in 0..self.progs[k].publish.len() {
                let (w, s) = self.progs[k].publish[idx];
                let v = fetch(&self.progs[k], &self.states[k], &self.shared, Src::Wire(w)).to_vec();
                self.write_shared(s, &v);
            }
        }
    }

    /// Triggered registers per domain; updates the stored root levels.
    fn detect_edges(&mut self) -> Vec<Vec<SignalId>> {
        let mut out = Vec::with_capacity(self.domains.len());
        for i in 0..self.domains.len() {
            let now = self.root_value(self.domains[i].root);
            let before = std::mem::replace(&mut self.prev_root[i], now);
            let fired = match (before, now) {
                (false, true) => Some(Polarity::Posedge),
                (true, false) => Some(Polarity::Negedge),
                _ => None,
            };
            out.push(match fired {
                Some(p) => self.domains[i].regs.iter().filter(|r| r.1 == p).map(|r| r.0).collect(),
                None => Vec::new(),
            });
        }
        out
    }

    fn commit(&mut self, triggered: &[Vec<SignalId>]) {
        let mut buf = Vec::new();
        let order = self.plan.analysis.order.clone();
        for &dom in &order {
            if triggered[dom].is_empty() {
                continue;
            }
            for idx in 0..self.domains[dom].commit.len() {
                let r = self.domains[dom].commit[idx];
                if !triggered[dom].contains(&r) {
                    continue;
                }
                let Some(&(p, g, _)) = self.term_of.get(&r) else {
                    continue;
                };
                if self.opts.gating && !self.states[p].dirty[g] {
                    self.stats.groups_skipped += 1;
                    continue;
                }
                self.states[p].dirty[g] = false;
                let prog = &self.progs[p];
                let k = prog.groups[g].insts.start;
                compute(prog, &self.states[p], &self.shared, &prog.insts[k], &mut buf);
                self.stats.evaluations += 1;
                self.stats.groups_evaluated += 1;
                self.write_shared(r, &buf);
            }
        }
        for &dom in &order {
            for idx in 0..self.domains[dom].split.len() {
                let r = self.domains[dom].split[idx];
                if !triggered[dom].contains(&r) {
                    continue;
                }
                let Some(&(p, _, t)) = self.term_of.get(&r) else {
                    continue;
                };
                let tr = self.progs[p].terms[t as usize];
                let v = self.states[p].pre[tr.pre as usize..(tr.pre + tr.nw) as usize].to_vec();
                self.write_shared(r, &v);
            }
        }
    }
}

fn compile_partition(plan: &Plan, owner: PodOwner, t: &ThreadPartition, soff: &[u32], snw: &[u32]) -> PartProg {
    let d = &plan.design;
    let mut local: BTreeMap<SignalId, u32> = BTreeMap::new();
    let mut wires = Vec::new();
    let mut home = 0u32;
    for e in t.osl.elements() {
        let o = d.element(e).output;
        if is_comb(d, o) {
            let nw = words_for(d.signal(o).width) as u32;
            local.insert(o, wires.len() as u32);
            wires.push(WireRt {
                home,
                nw,
                slot: t.placement.slot_of.get(&o).map_or(NONE, |&s| s as u32),
            });
            home += nw;
        }
    }
    let mut slot_cap = vec![0u32; t.placement.slots_used];
    for w in &wires {
        if w.slot != NONE {
            slot_cap[w.slot as usize] = slot_cap[w.slot as usize].max(w.nw);
        }
    }
    let mut slot_off = Vec::with_capacity(slot_cap.len());
    let mut off = home;
    for c in slot_cap {
        slot_off.push(off);
        off += c;
    }

    let mut insts = Vec::new();
    let mut groups = Vec::new();
    let mut terms = Vec::new();
    let mut pre_len = 0u32;
    let mut wire_watch = vec![Vec::new(); wires.len()];
    for (g, grp) in t.osl.groups.iter().enumerate() {
        let start = insts.len();
        let mut kind = GroupKind::Comb;
        for &s in &grp.watch {
            if let Some(&w) = local.get(&s) {
                wire_watch[w as usize].push(g as u32);
            }
        }
        for &e in &grp.members {
            let el = d.element(e);
            let width = d.signal(el.output).width;
            let ins: Vec<Src> = el
                .inputs
                .iter()
                .map(|&i| match local.get(&i) {
                    Some(&w) => Src::Wire(w),
                    None => Src::Shared(soff[i.index()], snw[i.index()]),
                })
                .collect();
            let in_widths: Vec<u32> = el.inputs.iter().map(|&i| d.signal(i).width).collect();
            let out = match local.get(&el.output) {
                Some(&w) => Out::Wire(w),
                None => {
                    let nw = words_for(width) as u32;
                    kind = if plan.is_split(el.output) {
                        GroupKind::Split
                    } else {
                        GroupKind::Commit
                    };
                    terms.push(TermRt {
                        reg: el.output,
                        pre: pre_len,
                        nw,
                    });
                    pre_len += nw;
                    Out::Term(terms.len() as u32 - 1)
                }
            };
            insts.push(Inst {
                op: el.op.clone(),
                width,
                narrow: width <= 64 && in_widths.iter().all(|&w| w <= 64),
                ins,
                in_widths,
                out,
            });
        }
        groups.push(GroupRt {
            insts: start..insts.len(),
            kind,
        });
    }
    let publish = if owner == PodOwner::Output {
        t.po.iter().filter_map(|s| local.get(s).map(|&w| (w, *s))).collect()
    } else {
        Vec::new()
    };
    PartProg {
        insts,
        groups,
        wires,
        slot_off,
        mem_len: off as usize,
        wire_watch,
        terms,
        pre_len: pre_len as usize,
        publish,
    }
}

impl CycleModel for Simulator {
    fn design(&self) -> &FlatDesign {
        &self.plan.design
    }

    fn set_input(&mut self, s: SignalId, v: &Bits) {
        let w = self.plan.design.signal(s).width;
        let v = v.resize(w);
        self.write_shared(s, v.words());
    }

    fn step(&mut self) -> Result<(), SimError> {
        let before = self.stats.evaluations;
        self.output_pass();
        for round in 0..=EDGE_ROUND_CAP {
            let triggered = self.detect_edges();
            if triggered.iter().all(|t| t.is_empty()) {
                break;
            }
            if round == EDGE_ROUND_CAP {
                return Err(SimError::Oscillation {
                    cycle: self.cycle,
                    rounds: EDGE_ROUND_CAP,
                });
            }
            let pods: Vec<usize> = (0..triggered.len()).filter(|&i| !triggered[i].is_empty()).collect();
            self.run_pods(&pods);
            self.commit(&triggered);
            self.output_pass();
        }
        self.cycle += 1;
        self.stats.cycles += 1;
        if self.opts.record_per_cycle {
            self.stats.per_cycle.push(self.stats.evaluations - before);
        }
        Ok(())
    }

    fn value(&self, s: SignalId) -> Bits {
        let o = self.soff[s.index()] as usize;
        let n = self.snw[s.index()] as usize;
        Bits::from_words(&self.shared[o..o + n], self.plan.design.signal(s).width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborate::elaborate;
    use crate::frontend::parse_text;
    use crate::oracle::Oracle;
    use crate::partition::ExecConfig;
    use crate::plan::build_plan;
    use crate::sim::run;
    use crate::stimulus::ResolvedStimulus;

    fn sim(src: &str, opts: SimOptions) -> (Simulator, Oracle) {
        let d = elaborate(&parse_text("t.v", src).unwrap(), "top").unwrap();
        let d = crate::optimize::optimize(&d).unwrap();
        let cfg = ExecConfig {
            tdmax: 2,
            ..ExecConfig::default()
        };
        (
            Simulator::new(build_plan(d.clone(), cfg).unwrap(), opts),
            Oracle::new(d),
        )
    }

    const SWAP: &str = "module top(input clk, output reg [3:0] a, output reg [3:0] b, output [4:0] s); \
        initial begin a = 4'd1; b = 4'd2; end always @(posedge clk) begin a <= b; b <= a; end assign s = a + b; endmodule";

    #[test]
    fn swap_matches_oracle() {
        let (mut s, mut o) = sim(SWAP, SimOptions::default());
        let clk = s.design().find_signal("top_clk").unwrap();
        let mut st = ResolvedStimulus::new(vec![], vec![(clk, 2, 0)]);
        let a = run(&mut s, &mut st, 20).unwrap();
        st.rewind();
        let b = run(&mut o, &mut st, 20).unwrap();
        assert_eq!(a.first_mismatch(&b), None);
    }

    #[test]
    fn gated_skips_idle_logic() {
        let src = "module top(input clk, input en, input [7:0] d, output reg [7:0] q, output [7:0] y); \
            always @(posedge clk) if (en) q <= d * 8'd3 + 8'd1; assign y = q ^ 8'h55; endmodule";
        let (mut s, _) = sim(src, SimOptions::default());
        let clk = s.design().find_signal("top_clk").unwrap();
        let mut st = ResolvedStimulus::new(vec![], vec![(clk, 2, 0)]);
        run(&mut s, &mut st, 40).unwrap();
        assert!(s.stats().groups_skipped > 0);
    }

    #[test]
    fn random_designs_match_oracle() {
        use crate::testgen::{random_design, random_stimulus, GenConfig};
        for seed in 0..40u64 {
            let cfg = GenConfig {
                domains: 1 + (seed % 3) as usize,
                max_registers: 16,
                max_elements: 128,
                ..GenConfig::default()
            };
            let d = random_design(seed, &cfg);
            for gating in [true, false] {
                let plan = build_plan(
                    d.clone(),
                    ExecConfig {
                        tdmax: 3,
                        ..ExecConfig::default()
                    },
                )
                .unwrap();
                let mut s = Simulator::new(
                    plan,
                    SimOptions {
                        gating,
                        threads: 1 + (seed % 4) as usize,
                        ..SimOptions::default()
                    },
                );
                let mut o = Oracle::new(d.clone());
                let mut st = random_stimulus(&d, seed, 200);
                let a = run(&mut s, &mut st, 200).unwrap();
                st.rewind();
                let b = run(&mut o, &mut st, 200).unwrap();
                if let Some(m) = a.first_mismatch(&b) {
                    panic!("seed {seed} gating {gating}: {m}\n{}", crate::ir::export_ir(&d));
                }
            }
        }
    }
}
