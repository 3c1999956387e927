use std::collections::{BTreeMap, BTreeSet};

use aoc::clocks::{analyze, compute_rcil, is_comb};
use aoc::ir::{FlatDesign, SignalId, SignalKind};
use aoc::optimize::optimize;
use aoc::oracle::Oracle;
use aoc::partition::{assign_placeholders, live_intervals};
use aoc::schedule::{build_osl, levelize};
use aoc::sim::{run, Trace};
use aoc::testgen::{random_design, random_netlist, random_stimulus, GenConfig};
use proptest::prelude::*;

fn small(domains: usize) -> GenConfig {
    GenConfig {
        max_registers: 12,
        max_elements: 96,
        domains,
        max_width: 70,
    }
}

/// Output values per cycle keyed by name.
fn outputs_by_name(d: &FlatDesign, t: &Trace) -> Vec<BTreeMap<String, u64>> {
    let outs: BTreeSet<SignalId> = d.outputs().map(|s| s.id).collect();
    t.snapshots()
        .iter()
        .map(|snap| {
            t.signals
                .iter()
                .zip(snap)
                .filter(|(s, _)| outs.contains(s))
                .map(|(s, v)| (d.signal(*s).name.clone(), v.words().iter().fold(0u64, |a, w| a ^ w)))
                .collect()
        })
        .collect()
}

/// Backward search from the register's data input through combinational
/// signals, stopping at registers and inputs.
fn brute_rcil(d: &FlatDesign, r: SignalId) -> BTreeSet<SignalId> {
    let drivers = d.drivers();
    let mut out = BTreeSet::new();
    let Some(e) = drivers[r.index()] else { return out };
    let mut stack: Vec<SignalId> = d.element(e).inputs.clone();
    let mut seen = BTreeSet::new();
    while let Some(s) = stack.pop() {
        if !seen.insert(s) {
            continue;
        }
        match d.signal(s).kind {
            SignalKind::Wire | SignalKind::Output => {
                if let Some(e) = drivers[s.index()] {
                    stack.extend(d.element(e).inputs.iter().copied());
                }
            }
            _ => {
                out.insert(s);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimization_preserves_outputs(seed in 0u64..1_000_000, domains in 1usize..=3) {
        let raw = random_netlist(seed, &small(domains));
        let Ok(opt) = optimize(&raw) else { return Ok(()) };
        let cycles = 60;
        let a = run(&mut Oracle::new(raw.clone()), &mut random_stimulus(&raw, seed, cycles), cycles).unwrap();
        let b = run(&mut Oracle::new(opt.clone()), &mut random_stimulus(&opt, seed, cycles), cycles).unwrap();
        prop_assert_eq!(outputs_by_name(&raw, &a), outputs_by_name(&opt, &b));
    }

    #[test]
    fn levels_exceed_the_levels_of_in_cone_drivers(seed in 0u64..1_000_000) {
        let d = random_design(seed, &small(2));
        let a = analyze(&d).unwrap();
        let drivers = d.drivers();
        for pod in a.pods.iter().chain(std::iter::once(&a.output_pod)) {
            let lv: BTreeMap<_, _> = levelize(&d, &pod.cone).into_iter().collect();
            for (&e, &l) in &lv {
                let mut want = 0;
                for &i in &d.element(e).inputs {
                    if !is_comb(&d, i) { continue; }
                    if let Some(p) = drivers[i.index()] {
                        if let Some(&pl) = lv.get(&p) {
                            prop_assert!(l > pl);
                            want = want.max(pl + 1);
                        }
                    }
                }
                prop_assert_eq!(l, want);
            }
        }
    }

    #[test]
    fn groups_share_a_level_and_cover_the_cone(seed in 0u64..1_000_000) {
        let d = random_design(seed, &small(1));
        let a = analyze(&d).unwrap();
        for pod in a.pods.iter().chain(std::iter::once(&a.output_pod)) {
            let osl = build_osl(&d, &pod.cone);
            let lv: BTreeMap<_, _> = levelize(&d, &pod.cone).into_iter().collect();
            let mut seen = BTreeSet::new();
            let mut last_level = 0;
            for g in &osl.groups {
                prop_assert!(g.level >= last_level);
                last_level = g.level;
                for e in &g.members {
                    prop_assert_eq!(lv[e], g.level);
                    prop_assert!(seen.insert(*e));
                }
                if g.terminal {
                    prop_assert_eq!(g.members.len(), 1);
                }
            }
            let cone: BTreeSet<_> = pod.cone.iter().copied().collect();
            prop_assert_eq!(seen, cone);
        }
    }

    #[test]
    fn rcil_matches_backward_search(seed in 0u64..1_000_000) {
        let d = random_design(seed, &small(3));
        for r in d.registers() {
            prop_assert_eq!(compute_rcil(&d, r.id), brute_rcil(&d, r.id));
        }
    }

    #[test]
    fn placeholder_slots_never_hold_two_live_wires(seed in 0u64..1_000_000, phmax in 1usize..12) {
        let d = random_design(seed, &small(1));
        let a = analyze(&d).unwrap();
        for pod in a.pods.iter().chain(std::iter::once(&a.output_pod)) {
            let osl = build_osl(&d, &pod.cone);
            let p = assign_placeholders(&d, &osl, phmax);
            prop_assert!(p.slots_used <= phmax);
            let iv = live_intervals(&d, &osl);
            prop_assert_eq!(p.slot_of.len() + p.bulk.len(), iv.len());
            for (i, x) in iv.iter().enumerate() {
                for y in &iv[i + 1..] {
                    let (Some(sx), Some(sy)) = (p.slot_of.get(&x.0), p.slot_of.get(&y.0)) else { continue };
                    if sx == sy {
                        prop_assert!(x.2 < y.1 || y.2 < x.1, "{:?} and {:?} overlap in slot {}", x, y, sx);
                    }
                }
            }
            if p.bulk.is_empty() {
                prop_assert!(p.slots_used <= p.peak_live.max(1));
            }
        }
    }

    #[test]
    fn oracle_fixpoint_ignores_worklist_order(seed in 0u64..1_000_000) {
        let d = random_design(seed, &small(3));
        let cycles = 80;
        let a = run(&mut Oracle::shuffled(d.clone(), seed), &mut random_stimulus(&d, seed, cycles), cycles).unwrap();
        let b = run(&mut Oracle::shuffled(d.clone(), seed ^ 0xabc), &mut random_stimulus(&d, seed, cycles), cycles).unwrap();
        prop_assert!(a.first_mismatch(&b).is_none());
    }
}
