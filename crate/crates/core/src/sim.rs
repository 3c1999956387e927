//! Backend-independent simulation plumbing: the cycle-model interface,
//! traces and the stimulus-driven run loop.

use thiserror::Error;

use crate::bits::Bits;
use crate::ir::{FlatDesign, SignalId};
use crate::stimulus::ResolvedStimulus;

/// Edge-detection rounds allowed per cycle before derived clocks are
/// declared oscillating.
pub const EDGE_ROUND_CAP: usize = 16;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("derived clocks still toggling after {rounds} edge rounds in cycle {cycle}")]
    Oscillation { cycle: u64, rounds: usize },
    #[error("deadlock at time {time}: {reason}")]
    Deadlock { time: u64, reason: String },
}

/// A cycle-accurate model of a design.
pub trait CycleModel {
    fn design(&self) -> &FlatDesign;
    /// Drive a design input; takes effect on the next [`CycleModel::step`].
    fn set_input(&mut self, s: SignalId, v: &Bits);
    /// Settle combinational logic and process clock edges until quiet.
    fn step(&mut self) -> Result<(), SimError>;
    /// Current value of an input, register or output.
    fn value(&self, s: SignalId) -> Bits;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Change {
    pub cycle: u64,
    pub index: usize,
    pub value: Bits,
}

/// Value changes of the observable signals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub signals: Vec<SignalId>,
    pub names: Vec<String>,
    pub widths: Vec<u32>,
    /// Values before the first cycle.
    pub initial: Vec<Bits>,
    pub changes: Vec<Change>,
    pub cycles: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub cycle: u64,
    pub signal: String,
    pub left: Bits,
    pub right: Bits,
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "cycle {}: `{}` is {} vs {}",
            self.cycle, self.signal, self.left, self.right
        )
    }
}

impl Trace {
    pub fn new(d: &FlatDesign) -> Self {
        let signals = d.observable();
        Trace {
            names: signals.iter().map(|&s| d.signal(s).name.clone()).collect(),
            widths: signals.iter().map(|&s| d.signal(s).width).collect(),
            signals,
            initial: Vec::new(),
            changes: Vec::new(),
            cycles: 0,
        }
    }

    /// Values after every cycle; entry `c` holds the state after cycle `c`.
    pub fn snapshots(&self) -> Vec<Vec<Bits>> {
        let mut cur = self.initial.clone();
        let mut out = Vec::with_capacity(self.cycles as usize);
        let mut k = 0;
        for c in 0..self.cycles {
            while k < self.changes.len() && self.changes[k].cycle == c {
                cur[self.changes[k].index] = self.changes[k].value.clone();
                k += 1;
            }
            out.push(cur.clone());
        }
        out
    }

    /// First difference between two traces of the same design.
    pub fn first_mismatch(&self, other: &Trace) -> Option<Mismatch> {
        if self.signals != other.signals {
            return Some(Mismatch {
                cycle: 0,
                signal: "<signal set>".into(),
                left: Bits::zero(1),
                right: Bits::zero(1),
            });
        }
        for (i, (a, b)) in self.initial.iter().zip(&other.initial).enumerate() {
            if a != b {
                return Some(Mismatch {
                    cycle: 0,
                    signal: self.names[i].clone(),
                    left: a.clone(),
                    right: b.clone(),
                });
            }
        }
        let (sa, sb) = (self.snapshots(), other.snapshots());
        for c in 0..sa.len().max(sb.len()) {
            let (Some(x), Some(y)) = (sa.get(c), sb.get(c)) else {
                return Some(Mismatch {
                    cycle: c as u64,
                    signal: "<trace length>".into(),
                    left: Bits::from_u64(sa.len() as u64, 64),
                    right: Bits::from_u64(sb.len() as u64, 64),
                });
            };
            for i in 0..x.len() {
                if x[i] != y[i] {
                    return Some(Mismatch {
                        cycle: c as u64,
                        signal: self.names[i].clone(),
                        left: x[i].clone(),
                        right: y[i].clone(),
                    });
                }
            }
        }
        None
    }
}

/// Records a trace while a model runs.
pub struct Recorder {
    pub trace: Trace,
    last: Vec<Bits>,
}

impl Recorder {
    pub fn start(m: &dyn CycleModel) -> Self {
        let mut trace = Trace::new(m.design());
        trace.initial = trace.signals.iter().map(|&s| m.value(s)).collect();
        Recorder {
            last: trace.initial.clone(),
            trace,
        }
    }

    /// Record the state after `cycle`.
    pub fn sample(&mut self, m: &dyn CycleModel, cycle: u64) {
        for (i, &s) in self.trace.signals.iter().enumerate() {
            let v = m.value(s);
            if v != self.last[i] {
                self.trace.changes.push(Change {
                    cycle,
                    index: i,
                    value: v.clone(),
                });
                self.last[i] = v;
            }
        }
        self.trace.cycles = cycle + 1;
    }
}

/// Run `cycles` cycles of `m` under `stim`, recording every change.
pub fn run(m: &mut dyn CycleModel, stim: &mut ResolvedStimulus, cycles: u64) -> Result<Trace, SimError> {
    let mut rec = Recorder::start(m);
    for c in 0..cycles {
        for (s, v) in stim.take(c) {
            m.set_input(s, &v);
        }
        m.step().map_err(|e| match e {
            SimError::Oscillation { rounds, .. } => SimError::Oscillation { cycle: c, rounds },
            other => other,
        })?;
        rec.sample(m, c);
    }
    Ok(rec.trace)
}
