//! The complete, immutable execution plan of a design.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::clocks::{self, is_comb, ClockError, DomainAnalysis, PodOwner};
use crate::ir::*;
use crate::partition::{build_cdo, partition_pod, CdoPlan, ExecConfig, PodPartitions};
use crate::schedule::{order_registers, RegisterOrder};

#[derive(Clone, Debug)]
pub struct Plan {
    pub design: FlatDesign,
    pub config: ExecConfig,
    pub analysis: DomainAnalysis,
    /// Register order per domain id.
    pub orders: Vec<RegisterOrder>,
    /// Partitions per domain id.
    pub domain_pods: Vec<PodPartitions>,
    pub output_pod: PodPartitions,
    pub cdos: Vec<CdoPlan>,
}

impl Plan {
    pub fn pods(&self) -> impl Iterator<Item = &PodPartitions> {
        self.domain_pods.iter().chain(std::iter::once(&self.output_pod))
    }

    pub fn is_split(&self, reg: SignalId) -> bool {
        let dom = self.analysis.domain_of[&reg];
        self.orders[dom].split_set.contains(&reg)
    }
}

/// Build the plan of an optimized, loop-free design.
pub fn build_plan(design: FlatDesign, config: ExecConfig) -> Result<Plan, ClockError> {
    build_plan_with(design, config, &BTreeSet::new())
}

/// As [`build_plan`], but never split the registers in `no_split`. Only for
/// demonstrating that splitting is required.
pub fn build_plan_with(
    design: FlatDesign,
    config: ExecConfig,
    no_split: &BTreeSet<SignalId>,
) -> Result<Plan, ClockError> {
    let analysis = clocks::analyze(&design)?;
    let drivers = design.drivers();
    let rcils: BTreeMap<SignalId, BTreeSet<SignalId>> = design
        .registers()
        .map(|r| (r.id, clocks::rcil_with(&design, &drivers, r.id)))
        .collect();
    // registers read directly by another domain's data input commit last
    let mut cross: Vec<BTreeSet<SignalId>> = vec![BTreeSet::new(); analysis.domains.len()];
    for r in design.registers() {
        let dom = analysis.domain_of[&r.id];
        let Some(e) = drivers[r.id.index()] else { continue };
        for i in &design.element(e).inputs {
            if let Some(&other) = analysis.domain_of.get(i) {
                if other != dom {
                    cross[other].insert(*i);
                }
            }
        }
    }
    let orders: Vec<RegisterOrder> = analysis
        .domains
        .iter()
        .map(|dom| {
            let mut o = order_registers(dom, &rcils, &cross[dom.id]);
            o.split_set.retain(|r| !no_split.contains(r));
            o
        })
        .collect();
    let domain_pods = analysis
        .pods
        .iter()
        .map(|p| partition_pod(&design, p, &config))
        .collect();
    let output_pod = partition_pod(&design, &analysis.output_pod, &config);
    let cdos = build_cdo(&design, &analysis);
    Ok(Plan {
        design,
        config,
        analysis,
        orders,
        domain_pods,
        output_pod,
        cdos,
    })
}

fn owner_name(d: &FlatDesign, a: &DomainAnalysis, o: PodOwner) -> String {
    match o {
        PodOwner::Domain(i) => d.signal(a.domains[i].clock_root).name.clone(),
        PodOwner::Output => "OD".to_string(),
    }
}

fn elem_name(d: &FlatDesign, e: ElementId) -> String {
    d.signal(d.element(e).output).name.clone()
}

/// JSON report for `--dump-schedule`.
pub fn schedule_report(p: &Plan) -> Value {
    let d = &p.design;
    let names = |v: &[SignalId]| v.iter().map(|s| d.signal(*s).name.clone()).collect::<Vec<_>>();
    let pods: Vec<Value> = p
        .pods()
        .map(|pod| {
            let parts: Vec<Value> = pod
                .partitions
                .iter()
                .map(|t| {
                    let groups: Vec<Value> = t
                        .osl
                        .groups
                        .iter()
                        .map(|g| {
                            json!({
                                "level": g.level,
                                "terminal": g.terminal,
                                "members": g.members.iter().map(|&e| elem_name(d, e)).collect::<Vec<_>>(),
                                "watch": names(&g.watch),
                            })
                        })
                        .collect();
                    json!({"partition": t.id, "po": names(&t.po), "groups": groups})
                })
                .collect();
            json!({"pod": owner_name(d, &p.analysis, pod.owner), "partitions": parts})
        })
        .collect();
    let orders: Vec<Value> = p
        .orders
        .iter()
        .map(|o| {
            json!({
                "domain": owner_name(d, &p.analysis, PodOwner::Domain(o.domain)),
                "commit_sequence": names(&o.commit_sequence),
                "split_set": o.split_set.iter().map(|s| d.signal(*s).name.clone()).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({"top": d.top, "pods": pods, "register_orders": orders})
}

/// JSON report for `--dump-partitions`.
pub fn partitions_report(p: &Plan) -> Value {
    let d = &p.design;
    let pods: Vec<Value> = p
        .pods()
        .map(|pod| {
            let parts: Vec<Value> = pod
                .partitions
                .iter()
                .map(|t| {
                    let wpl: BTreeMap<String, Vec<[String; 2]>> = t
                        .wpl
                        .iter()
                        .map(|(l, v)| {
                            (
                                l.to_string(),
                                v.iter().map(|(a, b)| [d.signal(*a).name.clone(), d.signal(*b).name.clone()]).collect(),
                            )
                        })
                        .collect();
                    json!({
                        "partition": t.id,
                        "po": t.po.iter().map(|s| d.signal(*s).name.clone()).collect::<Vec<_>>(),
                        "elements": t.osl.len(),
                        "duplicated": t.duplicated.len(),
                        "wires": t.osl.elements().filter(|&e| is_comb(d, d.element(e).output)).count(),
                        "placeholders": t.placement.slots_used,
                        "bulk": t.placement.bulk.len(),
                        "peak_live": t.placement.peak_live,
                        "wpl": wpl,
                    })
                })
                .collect();
            let log: Vec<Value> = pod
                .merge_log
                .iter()
                .map(|m| json!({"a": m.a, "b": m.b, "shared": m.shared, "best_other": m.best_other, "fits_phmax": m.fits_phmax}))
                .collect();
            json!({"pod": owner_name(d, &p.analysis, pod.owner), "partitions": parts, "merge_log": log})
        })
        .collect();
    let cdos: Vec<Value> = p
        .cdos
        .iter()
        .map(|c| {
            json!({
                "domain": owner_name(d, &p.analysis, PodOwner::Domain(c.domain)),
                "po": c.po.iter().map(|s| d.signal(*s).name.clone()).collect::<Vec<_>>(),
                "elements": c.elements.len(),
            })
        })
        .collect();
    json!({
        "top": d.top,
        "config": {"tdmax": p.config.tdmax, "phmax": p.config.phmax, "cw": p.config.cw},
        "cdo": cdos,
        "pods": pods,
    })
}
