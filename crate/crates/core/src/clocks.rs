//! Clock roots, clock domains, their dependencies and the primary-output
//! domain.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};
use thiserror::Error;

use crate::ir::*;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ClockError {
    #[error("clock of register `{register}` is a constant")]
    ConstantClock { register: String },
    #[error("clock domains depend on each other: {}", domains.join(" -> "))]
    ClockDependencyCycle { domains: Vec<String> },
}

/// Registers sharing one clock root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClockDomain {
    pub id: usize,
    pub clock_root: SignalId,
    pub registers: Vec<(SignalId, Polarity)>,
    pub depends_on: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PodOwner {
    Domain(usize),
    Output,
}

/// Primary outputs of one domain (or the output domain) with their cones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PodPlan {
    pub owner: PodOwner,
    /// Registers (for a clock domain) or outputs and derived clock roots.
    pub po: Vec<SignalId>,
    /// Inputs and registers read by the cone.
    pub pi: Vec<SignalId>,
    /// Elements of the cone in ascending id order.
    pub cone: Vec<ElementId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainAnalysis {
    pub domains: Vec<ClockDomain>,
    /// Domain ids in dependency order.
    pub order: Vec<usize>,
    pub pods: Vec<PodPlan>,
    pub output_pod: PodPlan,
    pub domain_of: BTreeMap<SignalId, usize>,
}

/// Signals computed by combinational logic.
pub fn is_comb(d: &FlatDesign, s: SignalId) -> bool {
    matches!(d.signal(s).kind, SignalKind::Wire | SignalKind::Output)
}

/// Clock root of every register: the signal on its clock pin.
pub fn trace_clock_roots(d: &FlatDesign) -> Result<BTreeMap<SignalId, SignalId>, ClockError> {
    let drivers = d.drivers();
    let mut roots = BTreeMap::new();
    for (&reg, pin) in &d.clocks {
        if let Some(e) = drivers[pin.clock.index()] {
            if is_comb(d, pin.clock) && d.element(e).op.is_const() {
                return Err(ClockError::ConstantClock {
                    register: d.signal(reg).name.clone(),
                });
            }
        }
        roots.insert(reg, pin.clock);
    }
    Ok(roots)
}

/// Elements and boundary signals in the backward cone of `starts`, tracing
/// through combinational signals only.
fn cone(
    d: &FlatDesign,
    drivers: &[Option<ElementId>],
    starts: &[SignalId],
) -> (BTreeSet<ElementId>, BTreeSet<SignalId>) {
    let mut elems = BTreeSet::new();
    let mut boundary = BTreeSet::new();
    let mut seen = vec![false; d.signals.len()];
    let mut stack: Vec<SignalId> = starts.to_vec();
    while let Some(s) = stack.pop() {
        if std::mem::replace(&mut seen[s.index()], true) {
            continue;
        }
        if let Some(e) = drivers[s.index()] {
            elems.insert(e);
            for &i in &d.element(e).inputs {
                if is_comb(d, i) {
                    stack.push(i);
                } else {
                    boundary.insert(i);
                }
            }
        }
    }
    (elems, boundary)
}

/// Registers and inputs driving the data input of `register`.
pub fn compute_rcil(d: &FlatDesign, register: SignalId) -> BTreeSet<SignalId> {
    let drivers = d.drivers();
    rcil_with(d, &drivers, register)
}

pub(crate) fn rcil_with(d: &FlatDesign, drivers: &[Option<ElementId>], register: SignalId) -> BTreeSet<SignalId> {
    let Some(e) = drivers[register.index()] else {
        return BTreeSet::new();
    };
    let mut out = BTreeSet::new();
    let mut starts = Vec::new();
    for &i in &d.element(e).inputs {
        if is_comb(d, i) {
            starts.push(i);
        } else {
            out.insert(i);
        }
    }
    out.extend(cone(d, drivers, &starts).1);
    out
}

/// Group registers by clock root, order the domains and build the pods.
pub fn group_domains(d: &FlatDesign, roots: &BTreeMap<SignalId, SignalId>) -> Result<DomainAnalysis, ClockError> {
    let drivers = d.drivers();
    let mut by_root: BTreeMap<SignalId, Vec<(SignalId, Polarity)>> = BTreeMap::new();
    for (&reg, &root) in roots {
        by_root.entry(root).or_default().push((reg, d.clocks[&reg].polarity));
    }
    let mut domains: Vec<ClockDomain> = by_root
        .into_iter()
        .enumerate()
        .map(|(id, (clock_root, registers))| ClockDomain {
            id,
            clock_root,
            registers,
            depends_on: Vec::new(),
        })
        .collect();
    let mut domain_of = BTreeMap::new();
    for dom in &domains {
        for &(r, _) in &dom.registers {
            domain_of.insert(r, dom.id);
        }
    }
    for dom in domains.iter_mut() {
        let root = dom.clock_root;
        let sources: BTreeSet<SignalId> = if is_comb(d, root) {
            cone(d, &drivers, &[root]).1
        } else {
            BTreeSet::from([root])
        };
        let deps: BTreeSet<usize> = sources.iter().filter_map(|s| domain_of.get(s).copied()).collect();
        dom.depends_on = deps.into_iter().collect();
    }
    let order = topo_order(&domains).map_err(|cycle| ClockError::ClockDependencyCycle {
        domains: cycle
            .iter()
            .map(|&i| d.signal(domains[i].clock_root).name.clone())
            .collect(),
    })?;
    let pods = domains
        .iter()
        .map(|dom| {
            let po: Vec<SignalId> = dom.registers.iter().map(|r| r.0).collect();
            let (elems, pi) = cone_of_registers(d, &drivers, &po);
            PodPlan {
                owner: PodOwner::Domain(dom.id),
                po,
                pi: pi.into_iter().collect(),
                cone: elems.into_iter().collect(),
            }
        })
        .collect();
    let mut po: Vec<SignalId> = d.outputs().map(|s| s.id).collect();
    for dom in &domains {
        if is_comb(d, dom.clock_root) && !po.contains(&dom.clock_root) {
            po.push(dom.clock_root);
        }
    }
    po.sort();
    let (elems, pi) = cone(d, &drivers, &po);
    let output_pod = PodPlan {
        owner: PodOwner::Output,
        po,
        pi: pi.into_iter().collect(),
        cone: elems.into_iter().collect(),
    };
    Ok(DomainAnalysis {
        domains,
        order,
        pods,
        output_pod,
        domain_of,
    })
}

fn cone_of_registers(
    d: &FlatDesign,
    drivers: &[Option<ElementId>],
    regs: &[SignalId],
) -> (BTreeSet<ElementId>, BTreeSet<SignalId>) {
    let mut elems = BTreeSet::new();
    let mut starts = Vec::new();
    let mut pi = BTreeSet::new();
    for &r in regs {
        if let Some(e) = drivers[r.index()] {
            elems.insert(e);
            for &i in &d.element(e).inputs {
                if is_comb(d, i) {
                    starts.push(i);
                } else {
                    pi.insert(i);
                }
            }
        }
    }
    let (more, b) = cone(d, drivers, &starts);
    elems.extend(more);
    pi.extend(b);
    (elems, pi)
}

/// Kahn's algorithm with lowest-id tie breaking; on failure returns the
/// domains left on a cycle.
fn topo_order(domains: &[ClockDomain]) -> Result<Vec<usize>, Vec<usize>> {
    let n = domains.len();
    let mut indeg = vec![0; n];
    let mut succ = vec![Vec::new(); n];
    for dom in domains {
        for &p in &dom.depends_on {
            succ[p].push(dom.id);
            indeg[dom.id] += 1;
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::new();
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &s in &succ[i] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.insert(s);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).filter(|&i| indeg[i] > 0).collect())
    }
}

/// Trace roots and group domains in one call.
pub fn analyze(d: &FlatDesign) -> Result<DomainAnalysis, ClockError> {
    let roots = trace_clock_roots(d)?;
    group_domains(d, &roots)
}

/// JSON report for `--dump-domains`.
pub fn domains_report(d: &FlatDesign, a: &DomainAnalysis) -> Value {
    let names = |v: &[SignalId]| v.iter().map(|s| d.signal(*s).name.clone()).collect::<Vec<_>>();
    let domains: Vec<Value> = a
        .domains
        .iter()
        .map(|dom| {
            let pod = &a.pods[dom.id];
            json!({
                "id": dom.id,
                "clock_root": d.signal(dom.clock_root).name,
                "root_kind": d.signal(dom.clock_root).kind.as_str(),
                "registers": dom.registers.iter().map(|(r, p)| json!({
                    "name": d.signal(*r).name,
                    "polarity": match p { Polarity::Posedge => "posedge", Polarity::Negedge => "negedge" },
                })).collect::<Vec<_>>(),
                "depends_on": dom.depends_on,
                "pod": {"po": pod.po.len(), "pi": names(&pod.pi), "cone_elements": pod.cone.len()},
            })
        })
        .collect();
    json!({
        "top": d.top,
        "domains": domains,
        "order": a.order,
        "output_domain": {
            "po": names(&a.output_pod.po),
            "pi": names(&a.output_pod.pi),
            "cone_elements": a.output_pod.cone.len(),
        },
    })
}
