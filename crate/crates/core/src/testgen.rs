//! Random netlists and stimulus for differential testing.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::bits::Bits;
use crate::ir::*;
use crate::optimize::optimize;
use crate::stimulus::ResolvedStimulus;

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub max_registers: usize,
    pub max_elements: usize,
    /// Clock domains including derived ones (1 to 3).
    pub domains: usize,
    pub max_width: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_registers: 64,
            max_elements: 512,
            domains: 1,
            max_width: 70,
        }
    }
}

/// How an extra clock domain is clocked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtraClock {
    /// A second primary clock input.
    Input,
    /// A register toggling on the main clock.
    Divider,
    /// The main clock ANDed with a register.
    Gated,
}

struct Builder {
    d: FlatDesign,
    rng: StdRng,
    max_width: u32,
}

impl Builder {
    fn signal(&mut self, name: String, kind: SignalKind, width: u32, init: Option<Bits>) -> SignalId {
        let id = SignalId(self.d.signals.len() as u32);
        self.d.signals.push(Signal {
            id,
            name,
            scope: vec![self.d.top.clone()],
            kind,
            width,
            dims: u8::from(width > 1),
            depth: 1,
            init,
            port_output: false,
        });
        id
    }

    fn element(&mut self, op: Op, inputs: Vec<SignalId>, output: SignalId) {
        let id = ElementId(self.d.elements.len() as u32);
        self.d.elements.push(CombElement { id, op, inputs, output });
    }

    fn width(&mut self) -> u32 {
        match self.rng.gen_range(0..10) {
            0..=2 => 1,
            3..=7 => self.rng.gen_range(2..=16),
            8 => self.rng.gen_range(17..=64),
            _ => self.rng.gen_range(2..=self.max_width.max(2)),
        }
    }

    fn random_bits(&mut self, width: u32) -> Bits {
        let mut b = Bits::zero(width);
        for w in b.words_mut() {
            *w = self.rng.gen();
        }
        b.normalize();
        b
    }

    fn pick(&mut self, pool: &[SignalId]) -> SignalId {
        pool[self.rng.gen_range(0..pool.len())]
    }

    /// A random operator over `pool` producing `width` bits.
    fn random_op(&mut self, pool: &[SignalId], width: u32) -> (Op, Vec<SignalId>) {
        let a = self.pick(pool);
        let b = self.pick(pool);
        let c = self.pick(pool);
        let aw = self.d.signal(a).width;
        match self.rng.gen_range(0..22) {
            0 => (Op::Buffer, vec![a]),
            1 => (Op::Not, vec![a]),
            2 => (Op::And, vec![a, b]),
            3 => (Op::Or, vec![a, b]),
            4 => (Op::Xor, vec![a, b]),
            5 => (Op::Xnor, vec![a, b]),
            6 | 7 => (Op::Add, vec![a, b]),
            8 => (Op::Sub, vec![a, b]),
            9 => (Op::Mul, vec![a, b]),
            10 => (if self.rng.gen() { Op::Div } else { Op::Mod }, vec![a, b]),
            11 => (if self.rng.gen() { Op::Shl } else { Op::Shr }, vec![a, b]),
            12 => {
                let ops = [
                    Op::Eq,
                    Op::Ne,
                    Op::Lt,
                    Op::Le,
                    Op::Gt,
                    Op::Ge,
                    Op::LogicAnd,
                    Op::LogicOr,
                ];
                (ops[self.rng.gen_range(0..ops.len())].clone(), vec![a, b])
            }
            13 => {
                let ops = [
                    Op::LogicNot,
                    Op::RedAnd,
                    Op::RedOr,
                    Op::RedXor,
                    Op::RedNand,
                    Op::RedNor,
                    Op::RedXnor,
                ];
                (ops[self.rng.gen_range(0..ops.len())].clone(), vec![a])
            }
            14 | 15 => (Op::Mux, vec![a, b, c]),
            16 => {
                let sw = aw.min(3);
                let n = self.rng.gen_range(1..=3);
                let mut arms = Vec::new();
                let mut ins = vec![a];
                for _ in 0..n {
                    arms.push(vec![Bits::from_u64(self.rng.gen_range(0..(1u64 << sw)), aw)]);
                    ins.push(self.pick(pool));
                }
                ins.push(self.pick(pool));
                (Op::Case { arms }, ins)
            }
            17 => {
                let n = self.rng.gen_range(2..=3);
                (Op::Concat, (0..n).map(|_| self.pick(pool)).collect())
            }
            18 => (
                Op::Slice {
                    lsb: self.rng.gen_range(0..aw),
                },
                vec![a],
            ),
            19 => {
                let ew = self.rng.gen_range(1..=width.max(1)).min(aw);
                (Op::Index { elem_width: ew }, vec![a, b])
            }
            20 => {
                let ew = self.rng.gen_range(1..=width.max(1));
                (Op::IndexAssign { elem_width: ew }, vec![a, b, c])
            }
            _ => (Op::Const(self.random_bits(width)), vec![]),
        }
    }
}

/// A random loop-free design with up to `cfg.domains` clock domains.
pub fn random_design(seed: u64, cfg: &GenConfig) -> FlatDesign {
    let mut attempt = 0u64;
    loop {
        let d = random_netlist(seed.wrapping_mul(1_000_003).wrapping_add(attempt), cfg);
        // constant folding can turn a divisor into zero; try another draw
        if let Ok(opt) = optimize(&d) {
            if opt.registers().next().is_some() {
                return opt;
            }
        }
        attempt += 1;
    }
}

/// The unoptimized netlist behind [`random_design`].
pub fn random_netlist(seed: u64, cfg: &GenConfig) -> FlatDesign {
    let mut b = Builder {
        d: FlatDesign {
            top: "top".into(),
            ..FlatDesign::default()
        },
        rng: StdRng::seed_from_u64(seed),
        max_width: cfg.max_width,
    };
    let clk = b.signal("top_clk".into(), SignalKind::Input, 1, None);
    let n_in = b.rng.gen_range(1..=4);
    let mut pool: Vec<SignalId> = Vec::new();
    for k in 0..n_in {
        let w = b.width();
        pool.push(b.signal(format!("top_in{k}"), SignalKind::Input, w, None));
    }

    let mut clock_pins = vec![clk];
    let mut regs = Vec::new();
    let mut clock_regs: Vec<(SignalId, Op, Vec<SignalId>)> = Vec::new();
    let domains = cfg.domains.clamp(1, 3);
    for k in 1..domains {
        let kind = [ExtraClock::Input, ExtraClock::Divider, ExtraClock::Gated][b.rng.gen_range(0..3)];
        match kind {
            ExtraClock::Input => {
                clock_pins.push(b.signal(format!("top_clk{k}"), SignalKind::Input, 1, None));
            }
            ExtraClock::Divider => {
                let r = b.signal(format!("top_div{k}"), SignalKind::Register, 1, None);
                b.d.clocks.insert(
                    r,
                    ClockPin {
                        clock: clk,
                        polarity: Polarity::Posedge,
                    },
                );
                clock_regs.push((r, Op::Not, vec![r]));
                clock_pins.push(r);
            }
            ExtraClock::Gated => {
                let gate = b.signal(format!("top_gate{k}"), SignalKind::Register, 1, None);
                b.d.clocks.insert(
                    gate,
                    ClockPin {
                        clock: clk,
                        polarity: Polarity::Negedge,
                    },
                );
                pool.push(gate);
                regs.push(gate);
                let g = b.signal(format!("top_gclk{k}"), SignalKind::Wire, 1, None);
                b.element(Op::And, vec![clk, gate], g);
                clock_pins.push(g);
            }
        }
    }

    let room = cfg.max_registers.saturating_sub(clock_regs.len() + regs.len()).max(1);
    let n_regs = b.rng.gen_range(1..=room);
    for k in 0..n_regs {
        let w = b.width();
        let init = if b.rng.gen_bool(0.7) {
            Some(b.random_bits(w))
        } else {
            None
        };
        let r = b.signal(format!("top_r{k}"), SignalKind::Register, w, init);
        let pin = clock_pins[b.rng.gen_range(0..clock_pins.len())];
        let polarity = if b.rng.gen_bool(0.8) {
            Polarity::Posedge
        } else {
            Polarity::Negedge
        };
        b.d.clocks.insert(r, ClockPin { clock: pin, polarity });
        regs.push(r);
        pool.push(r);
    }
    for (r, _, _) in &clock_regs {
        pool.push(*r);
    }

    let n_out = b.rng.gen_range(1..=4);
    let fixed = clock_regs.len() + n_regs + n_out + b.d.elements.len();
    let budget = cfg.max_elements.saturating_sub(fixed);
    let n_wires = if budget == 0 { 0 } else { b.rng.gen_range(0..=budget) };
    for k in 0..n_wires {
        let w = b.width();
        let (op, ins) = b.random_op(&pool, w);
        let s = b.signal(format!("top_w{k}"), SignalKind::Wire, w, None);
        b.element(op, ins, s);
        pool.push(s);
    }
    for (r, op, ins) in clock_regs {
        b.element(op, ins, r);
    }
    for &r in &regs {
        let w = b.d.signal(r).width;
        let (op, ins) = b.random_op(&pool, w);
        b.element(op, ins, r);
    }
    for k in 0..n_out {
        let w = b.width();
        let (op, ins) = b.random_op(&pool, w);
        let o = b.signal(format!("top_out{k}"), SignalKind::Output, w, None);
        b.element(op, ins, o);
    }
    debug_assert!(b.d.validate().is_ok());
    b.d
}

/// Random stimulus: every clock input toggles with its own period and data
/// inputs change at random cycles.
pub fn random_stimulus(d: &FlatDesign, seed: u64, cycles: u64) -> ResolvedStimulus {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x5eed);
    let pins: BTreeMap<SignalId, ()> = d.clocks.values().map(|p| (p.clock, ())).collect();
    let mut clocks = Vec::new();
    let mut data = Vec::new();
    for s in d.inputs() {
        if pins.contains_key(&s.id) {
            let period = 2 * rng.gen_range(1..=3);
            clocks.push((s.id, period, rng.gen_range(0..period)));
        } else {
            data.push(s.id);
        }
    }
    let mut events = Vec::new();
    for c in 0..cycles {
        for &s in &data {
            if rng.gen_bool(0.3) {
                let w = d.signal(s).width;
                let mut v = Bits::zero(w);
                for x in v.words_mut() {
                    *x = rng.gen();
                }
                v.normalize();
                events.push((c, s, v));
            }
        }
    }
    ResolvedStimulus::new(events, clocks)
}
