//! Event-driven reference simulator. It evaluates the flat netlist with a
//! worklist and two-phase register updates and knows nothing about domains,
//! levels or groups.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::bits::Bits;
use crate::ir::*;
use crate::ops;
use crate::sim::{CycleModel, SimError, EDGE_ROUND_CAP};

pub struct Oracle {
    design: FlatDesign,
    values: Vec<Bits>,
    drivers: Vec<Option<ElementId>>,
    readers: Vec<Vec<ElementId>>,
    queued: Vec<bool>,
    work: Vec<ElementId>,
    prev_clock: BTreeMap<SignalId, bool>,
    cycle: u64,
    rng: Option<StdRng>,
    /// Elements evaluated so far.
    pub evaluations: u64,
}

impl Oracle {
    pub fn new(design: FlatDesign) -> Self {
        Self::build(design, None)
    }

    /// An oracle that processes its worklist in a random order.
    pub fn shuffled(design: FlatDesign, seed: u64) -> Self {
        Self::build(design, Some(StdRng::seed_from_u64(seed)))
    }

    fn build(design: FlatDesign, rng: Option<StdRng>) -> Self {
        let values = design.signals.iter().map(|s| s.init_value()).collect();
        let drivers = design.drivers();
        let readers = design.readers();
        let n = design.elements.len();
        let mut o = Oracle {
            values,
            drivers,
            readers,
            queued: vec![false; n],
            work: Vec::new(),
            prev_clock: BTreeMap::new(),
            cycle: 0,
            rng,
            evaluations: 0,
            design,
        };
        for k in 0..n {
            o.enqueue(ElementId(k as u32));
        }
        o.settle();
        for p in o.design.clocks.values() {
            o.prev_clock.insert(p.clock, o.values[p.clock.index()].bit(0));
        }
        o
    }

    fn is_register_input(&self, e: ElementId) -> bool {
        self.design.signal(self.design.element(e).output).kind == SignalKind::Register
    }

    fn enqueue(&mut self, e: ElementId) {
        if !self.queued[e.index()] && !self.is_register_input(e) {
            self.queued[e.index()] = true;
            self.work.push(e);
        }
    }

    fn eval(&mut self, e: ElementId) -> Bits {
        self.evaluations += 1;
        let el = self.design.element(e);
        let ins: Vec<&Bits> = el.inputs.iter().map(|i| &self.values[i.index()]).collect();
        ops::eval_bits(&el.op, self.design.signal(el.output).width, &ins)
    }

    fn write(&mut self, s: SignalId, v: Bits) {
        if self.values[s.index()] != v {
            self.values[s.index()] = v;
            for k in 0..self.readers[s.index()].len() {
                let r = self.readers[s.index()][k];
                self.enqueue(r);
            }
        }
    }

    /// Evaluate dirty elements until nothing changes.
    fn settle(&mut self) {
        while !self.work.is_empty() {
            let k = match &mut self.rng {
                Some(r) => r.gen_range(0..self.work.len()),
                None => self.work.len() - 1,
            };
            let e = self.work.swap_remove(k);
            self.queued[e.index()] = false;
            let v = self.eval(e);
            let out = self.design.element(e).output;
            self.write(out, v);
        }
    }

    /// Registers whose clock pin saw its active edge since the last check.
    fn detect_edges(&mut self) -> Vec<SignalId> {
        let mut now = BTreeMap::new();
        for p in self.design.clocks.values() {
            now.insert(p.clock, self.values[p.clock.index()].bit(0));
        }
        let mut fired = Vec::new();
        for (&r, p) in &self.design.clocks {
            let (before, after) = (self.prev_clock[&p.clock], now[&p.clock]);
            let hit = match p.polarity {
                Polarity::Posedge => !before && after,
                Polarity::Negedge => before && !after,
            };
            if hit {
                fired.push(r);
            }
        }
        self.prev_clock = now;
        fired
    }
}

impl CycleModel for Oracle {
    fn design(&self) -> &FlatDesign {
        &self.design
    }

    fn set_input(&mut self, s: SignalId, v: &Bits) {
        let w = self.design.signal(s).width;
        self.write(s, v.resize(w));
    }

    fn step(&mut self) -> Result<(), SimError> {
        self.settle();
        for round in 0..=EDGE_ROUND_CAP {
            let fired = self.detect_edges();
            if fired.is_empty() {
                break;
            }
            if round == EDGE_ROUND_CAP {
                return Err(SimError::Oscillation {
                    cycle: self.cycle,
                    rounds: EDGE_ROUND_CAP,
                });
            }
            // all next values from the pre-edge state, then commit together
            let next: Vec<(SignalId, Bits)> = fired
                .iter()
                .map(|&r| {
                    let e = self.drivers[r.index()].expect("register has a driver");
                    (r, self.eval(e))
                })
                .collect();
            for (r, v) in next {
                self.write(r, v);
            }
            self.settle();
        }
        self.cycle += 1;
        Ok(())
    }

    fn value(&self, s: SignalId) -> Bits {
        self.values[s.index()].clone()
    }
}
