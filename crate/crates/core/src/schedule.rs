//! Register ordering with pre-register splitting, levelization, signal
//! grouping and ordered signal lists.

use std::collections::{BTreeMap, BTreeSet};

use crate::clocks::{is_comb, ClockDomain};
use crate::ir::*;

/// Elements of one level evaluated together under one activity flag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignalGroup {
    pub level: u32,
    pub members: Vec<ElementId>,
    /// Signals whose change activates the group.
    pub watch: Vec<SignalId>,
    /// The group computes a register data input.
    pub terminal: bool,
}

/// Level-sorted groups of one pod or partition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Osl {
    pub groups: Vec<SignalGroup>,
}

impl Osl {
    /// Elements in execution order.
    pub fn elements(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.groups.iter().flat_map(|g| g.members.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterOrder {
    pub domain: usize,
    pub commit_sequence: Vec<SignalId>,
    pub split_set: BTreeSet<SignalId>,
}

/// Order the registers of `domain` so that readers of an old value update
/// before its source; registers on a dependency cycle (plus `extra_split`)
/// are split.
pub fn order_registers(
    domain: &ClockDomain,
    rcils: &BTreeMap<SignalId, BTreeSet<SignalId>>,
    extra_split: &BTreeSet<SignalId>,
) -> RegisterOrder {
    let regs: Vec<SignalId> = domain.registers.iter().map(|r| r.0).collect();
    let index: BTreeMap<SignalId, usize> = regs.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let n = regs.len();
    let mut succ = vec![Vec::new(); n];
    for (a, &ra) in regs.iter().enumerate() {
        for rb in rcils.get(&ra).into_iter().flatten() {
            if let Some(&b) = index.get(rb) {
                if a != b {
                    succ[a].push(b);
                }
            }
        }
    }
    let comp = tarjan(&succ);
    let ncomp = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for (v, &c) in comp.iter().enumerate() {
        members[c].push(v);
    }
    let mut split_set: BTreeSet<SignalId> = extra_split.iter().filter(|r| index.contains_key(r)).copied().collect();
    for m in &members {
        if m.len() >= 2 {
            split_set.extend(m.iter().map(|&v| regs[v]));
        }
    }
    let mut csucc: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ncomp];
    let mut indeg = vec![0; ncomp];
    for a in 0..n {
        for &b in &succ[a] {
            if comp[a] != comp[b] && csucc[comp[a]].insert(comp[b]) {
                indeg[comp[b]] += 1;
            }
        }
    }
    // ready components keyed by their lowest register id
    let key = |c: usize| members[c].iter().map(|&v| regs[v]).min().unwrap();
    let mut ready: BTreeSet<(SignalId, usize)> = (0..ncomp).filter(|&c| indeg[c] == 0).map(|c| (key(c), c)).collect();
    let mut commit_sequence = Vec::with_capacity(n);
    while let Some((_, c)) = ready.pop_first() {
        let mut m: Vec<SignalId> = members[c].iter().map(|&v| regs[v]).collect();
        m.sort();
        commit_sequence.extend(m);
        for &s in &csucc[c] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.insert((key(s), s));
            }
        }
    }
    RegisterOrder {
        domain: domain.id,
        commit_sequence,
        split_set,
    }
}

/// Strongly connected component index of every vertex.
fn tarjan(succ: &[Vec<usize>]) -> Vec<usize> {
    let n = succ.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    let mut ncomp = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        // iterative DFS: (vertex, next successor position)
        let mut call = vec![(root, 0usize)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on[root] = true;
        while let Some(top) = call.last_mut() {
            let v = top.0;
            if top.1 < succ[v].len() {
                let w = succ[v][top.1];
                top.1 += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on[w] = true;
                    call.push((w, 0));
                } else if on[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    comp
}

/// Level of every element of `cone`: 0 when it reads no combinational
/// signal computed inside the cone, else one above its highest such input.
pub fn levelize(d: &FlatDesign, cone: &[ElementId]) -> Vec<(ElementId, u32)> {
    let in_cone: BTreeSet<ElementId> = cone.iter().copied().collect();
    let drivers = d.drivers();
    let mut level: BTreeMap<ElementId, u32> = BTreeMap::new();
    // iterative post-order over the in-cone dependency graph
    for &root in cone {
        let mut stack = vec![(root, false)];
        while let Some((e, done)) = stack.pop() {
            if level.contains_key(&e) {
                continue;
            }
            let deps: Vec<ElementId> = d
                .element(e)
                .inputs
                .iter()
                .filter(|&&i| is_comb(d, i))
                .filter_map(|i| drivers[i.index()])
                .filter(|p| in_cone.contains(p))
                .collect();
            if done {
                let l = deps.iter().map(|p| level[p] + 1).max().unwrap_or(0);
                level.insert(e, l);
            } else {
                stack.push((e, true));
                for p in deps {
                    if !level.contains_key(&p) {
                        stack.push((p, false));
                    }
                }
            }
        }
    }
    cone.iter().map(|e| (*e, level[e])).collect()
}

/// Group the elements of each level by the transitive closure of sharing
/// an input wire. Register data inputs become singleton terminal groups.
pub fn group(d: &FlatDesign, leveled: &[(ElementId, u32)]) -> Vec<SignalGroup> {
    let mut by_level: BTreeMap<u32, Vec<ElementId>> = BTreeMap::new();
    let mut terminals = Vec::new();
    for &(e, l) in leveled {
        if d.signal(d.element(e).output).kind == SignalKind::Register {
            terminals.push((e, l));
        } else {
            by_level.entry(l).or_default().push(e);
        }
    }
    let mut groups = Vec::new();
    for (l, mut elems) in by_level {
        elems.sort();
        let mut uf = UnionFind::new(elems.len());
        let mut first_reader: BTreeMap<SignalId, usize> = BTreeMap::new();
        for (k, &e) in elems.iter().enumerate() {
            for &i in &d.element(e).inputs {
                if !is_comb(d, i) {
                    continue;
                }
                match first_reader.get(&i) {
                    Some(&j) => uf.union(j, k),
                    None => {
                        first_reader.insert(i, k);
                    }
                }
            }
        }
        let mut sets: BTreeMap<usize, Vec<ElementId>> = BTreeMap::new();
        for (k, &e) in elems.iter().enumerate() {
            sets.entry(uf.find(k)).or_default().push(e);
        }
        let mut level_groups: Vec<Vec<ElementId>> = sets.into_values().collect();
        level_groups.sort_by_key(|m| m[0]);
        for members in level_groups {
            groups.push(make_group(d, l, members, false));
        }
    }
    for (e, l) in terminals {
        groups.push(make_group(d, l, vec![e], true));
    }
    groups.sort_by_key(|g| (g.level, g.terminal, g.members[0]));
    groups
}

pub(crate) fn make_group(d: &FlatDesign, level: u32, members: Vec<ElementId>, terminal: bool) -> SignalGroup {
    let watch: BTreeSet<SignalId> = members
        .iter()
        .flat_map(|&e| d.element(e).inputs.iter().copied())
        .collect();
    SignalGroup {
        level,
        members,
        watch: watch.into_iter().collect(),
        terminal,
    }
}

/// Levelize and group a cone into an ordered signal list.
pub fn build_osl(d: &FlatDesign, cone: &[ElementId]) -> Osl {
    Osl {
        groups: group(d, &levelize(d, cone)),
    }
}

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            let (lo, hi) = (a.min(b), a.max(b));
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clocks::{analyze, compute_rcil};
    use crate::elaborate::elaborate;
    use crate::frontend::parse_text;
    use crate::optimize::optimize;

    fn build(src: &str) -> FlatDesign {
        let mods = parse_text("t.v", src).unwrap();
        optimize(&elaborate(&mods, "top").unwrap()).unwrap()
    }

    fn order(d: &FlatDesign) -> RegisterOrder {
        let a = analyze(d).unwrap();
        let rcils = d.registers().map(|r| (r.id, compute_rcil(d, r.id))).collect();
        order_registers(&a.domains[0], &rcils, &BTreeSet::new())
    }

    fn names(d: &FlatDesign, v: impl IntoIterator<Item = SignalId>) -> Vec<String> {
        v.into_iter().map(|s| d.signal(s).local_name().to_string()).collect()
    }

    #[test]
    fn shift_register_orders_reader_first() {
        let d = build("module top(input clk, d, output reg q2); reg q1; always @(posedge clk) begin q1 <= d; q2 <= q1; end endmodule");
        let o = order(&d);
        assert_eq!(names(&d, o.commit_sequence.clone()), vec!["q2", "q1"]);
        assert!(o.split_set.is_empty());
    }

    #[test]
    fn swap_splits_both() {
        let d = build("module top(input clk, output reg a, output reg b); initial begin a = 0; b = 1; end always @(posedge clk) begin a <= b; b <= a; end endmodule");
        let o = order(&d);
        assert_eq!(o.split_set.len(), 2);
    }

    #[test]
    fn self_recirculation_is_not_split() {
        let d = build("module top(input clk, output reg [3:0] c); always @(posedge clk) c <= c + 4'd1; endmodule");
        assert!(order(&d).split_set.is_empty());
    }

    #[test]
    fn chain_and_diamond_levels() {
        let d = build("module top(input a, b, c, output y, output z); wire w1 = a & b; assign y = w1 | c; wire p = ~a; wire q = a ^ c; assign z = p & q; endmodule");
        let cone: Vec<ElementId> = d.elements.iter().map(|e| e.id).collect();
        let lv: BTreeMap<String, u32> = levelize(&d, &cone)
            .into_iter()
            .map(|(e, l)| (d.signal(d.element(e).output).local_name().to_string(), l))
            .collect();
        assert_eq!(lv["w1"], 0);
        assert_eq!(lv["y"], 1);
        assert_eq!(lv["p"], 0);
        assert_eq!(lv["q"], 0);
        assert_eq!(lv["z"], 1);
    }

    #[test]
    fn shared_wire_groups() {
        let d = build(
            "module top(input a, b, c, d, output e1, e2, e3);
               wire x = a & b; wire y = b | c; wire z = c ^ d; wire q = ~d;
               assign e1 = x & y; assign e2 = y | z; assign e3 = ~q;
             endmodule",
        );
        let cone: Vec<ElementId> = d.elements.iter().map(|e| e.id).collect();
        let groups = build_osl(&d, &cone).groups;
        let level1: Vec<Vec<String>> = groups
            .iter()
            .filter(|g| g.level == 1)
            .map(|g| names(&d, g.members.iter().map(|&e| d.element(e).output)))
            .collect();
        assert_eq!(
            level1,
            vec![vec!["e1".to_string(), "e2".to_string()], vec!["e3".to_string()]]
        );
    }
}
