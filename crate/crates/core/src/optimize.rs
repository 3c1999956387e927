//! Constant propagation, buffer-chain collapsing and dead-code removal.

use std::collections::BTreeMap;

use crate::bits::Bits;
use crate::elaborate::ElabError;
use crate::ir::*;
use crate::ops;

/// Simplify `design` to a fixpoint. The result has dense ids and the same
/// observable behavior; running it twice gives the same design.
pub fn optimize(design: &FlatDesign) -> Result<FlatDesign, ElabError> {
    let mut w = Work::new(design);
    loop {
        let mut changed = w.fold();
        changed |= w.collapse();
        if !changed {
            break;
        }
    }
    let out = w.finish();
    for e in &out.elements {
        if matches!(e.op, Op::Div | Op::Mod) {
            if let Some(Op::Const(v)) = driver_op(&out, e.inputs[1]) {
                if v.is_zero() {
                    return Err(ElabError::DivisionByZero {
                        signal: out.signal(e.output).name.clone(),
                    });
                }
            }
        }
    }
    Ok(out)
}

fn driver_op(d: &FlatDesign, s: SignalId) -> Option<&Op> {
    if d.signal(s).kind == SignalKind::Register {
        return None;
    }
    d.elements.iter().find(|e| e.output == s).map(|e| &e.op)
}

struct Work {
    signals: Vec<Signal>,
    elems: Vec<Option<CombElement>>,
    clocks: BTreeMap<SignalId, ClockPin>,
    top: String,
}

impl Work {
    fn new(d: &FlatDesign) -> Self {
        Work {
            signals: d.signals.clone(),
            elems: d.elements.iter().cloned().map(Some).collect(),
            clocks: d.clocks.clone(),
            top: d.top.clone(),
        }
    }

    fn width(&self, s: SignalId) -> u32 {
        self.signals[s.index()].width
    }

    /// Index of the element driving each signal.
    fn drivers(&self) -> Vec<Option<usize>> {
        let mut d = vec![None; self.signals.len()];
        for (i, e) in self.elems.iter().enumerate() {
            if let Some(e) = e {
                d[e.output.index()] = Some(i);
            }
        }
        d
    }

    /// Constant value of every combinational signal driven by a constant.
    fn consts(&self, drivers: &[Option<usize>]) -> Vec<Option<Bits>> {
        self.signals
            .iter()
            .map(|s| {
                if s.kind == SignalKind::Register {
                    return None;
                }
                let e = self.elems[drivers[s.id.index()]?].as_ref()?;
                match &e.op {
                    Op::Const(v) => Some(v.resize(s.width)),
                    _ => None,
                }
            })
            .collect()
    }

    fn fold(&mut self) -> bool {
        let drivers = self.drivers();
        let consts = self.consts(&drivers);
        let mut changed = false;
        for slot in self.elems.iter_mut() {
            let Some(e) = slot else { continue };
            if e.op.is_const() {
                continue;
            }
            let w = self.signals[e.output.index()].width;
            let cv: Vec<Option<&Bits>> = e.inputs.iter().map(|i| consts[i.index()].as_ref()).collect();
            if cv.iter().all(Option::is_some) {
                let ins: Vec<&Bits> = cv.iter().map(|c| c.unwrap()).collect();
                let zero_div = matches!(e.op, Op::Div | Op::Mod) && ins[1].is_zero();
                if !zero_div {
                    e.op = Op::Const(ops::eval_bits(&e.op, w, &ins));
                    e.inputs.clear();
                    changed = true;
                }
                continue;
            }
            if let Some(r) = simplify(&e.op, &e.inputs, &cv, w) {
                match r {
                    Simple::Const(v) => {
                        e.op = Op::Const(v);
                        e.inputs.clear();
                    }
                    Simple::Pass(s) => {
                        e.op = Op::Buffer;
                        e.inputs = vec![s];
                    }
                }
                changed = true;
            }
        }
        changed
    }

    /// Collapse same-width buffers into their source.
    fn collapse(&mut self) -> bool {
        let n = self.signals.len();
        let mut alias: Vec<SignalId> = (0..n as u32).map(SignalId).collect();
        let mut changed = false;
        for slot in self.elems.iter_mut() {
            let Some(e) = slot else { continue };
            if e.op != Op::Buffer {
                continue;
            }
            let (src, dst) = (e.inputs[0], e.output);
            if src == dst || self.signals[src.index()].width != self.signals[dst.index()].width {
                continue;
            }
            if self.signals[dst.index()].kind == SignalKind::Wire {
                alias[dst.index()] = src;
                *slot = None;
                changed = true;
            }
        }
        if changed {
            let resolve = |mut s: SignalId| {
                let mut steps = 0;
                while alias[s.index()] != s && steps <= n {
                    s = alias[s.index()];
                    steps += 1;
                }
                s
            };
            for e in self.elems.iter_mut().flatten() {
                for i in e.inputs.iter_mut() {
                    *i = resolve(*i);
                }
            }
            for p in self.clocks.values_mut() {
                p.clock = resolve(p.clock);
            }
        }
        changed | self.absorb()
    }

    /// `s1 <= f(..); s2 <= s1;` with `s1` read only by the buffer becomes
    /// `s2 <= f(..);`.
    fn absorb(&mut self) -> bool {
        let drivers = self.drivers();
        let mut reads = vec![0usize; self.signals.len()];
        for e in self.elems.iter().flatten() {
            for i in &e.inputs {
                reads[i.index()] += 1;
            }
        }
        for p in self.clocks.values() {
            reads[p.clock.index()] += 1;
        }
        let mut changed = false;
        for k in 0..self.elems.len() {
            let Some(e) = &self.elems[k] else { continue };
            if e.op != Op::Buffer {
                continue;
            }
            let (src, dst) = (e.inputs[0], e.output);
            if src == dst
                || self.signals[src.index()].kind != SignalKind::Wire
                || self.width(src) != self.width(dst)
                || reads[src.index()] != 1
            {
                continue;
            }
            let Some(dk) = drivers[src.index()] else { continue };
            if dk == k {
                continue;
            }
            if let Some(d) = self.elems[dk].as_mut() {
                d.output = dst;
            }
            self.elems[k] = None;
            reads[src.index()] = 0;
            changed = true;
        }
        changed
    }

    fn finish(self) -> FlatDesign {
        let drivers = self.drivers();
        let n = self.signals.len();
        let mut live = vec![false; n];
        let mut stack: Vec<SignalId> = Vec::new();
        for s in &self.signals {
            if matches!(s.kind, SignalKind::Output | SignalKind::Register) {
                stack.push(s.id);
            }
        }
        stack.extend(self.clocks.values().map(|p| p.clock));
        while let Some(s) = stack.pop() {
            if std::mem::replace(&mut live[s.index()], true) {
                continue;
            }
            if let Some(k) = drivers[s.index()] {
                if let Some(e) = &self.elems[k] {
                    stack.extend(e.inputs.iter().copied());
                }
            }
        }
        let mut remap = vec![None; n];
        let mut signals = Vec::new();
        for s in &self.signals {
            let keep = live[s.id.index()] || s.kind != SignalKind::Wire;
            if keep {
                let id = SignalId(signals.len() as u32);
                remap[s.id.index()] = Some(id);
                let mut s = s.clone();
                s.id = id;
                signals.push(s);
            }
        }
        let map = |s: SignalId| remap[s.index()].expect("live signal");
        let mut elements = Vec::new();
        for e in self.elems.into_iter().flatten() {
            if !live[e.output.index()] {
                continue;
            }
            elements.push(CombElement {
                id: ElementId(elements.len() as u32),
                op: e.op,
                inputs: e.inputs.iter().map(|&i| map(i)).collect(),
                output: map(e.output),
            });
        }
        let clocks = self
            .clocks
            .iter()
            .map(|(r, p)| {
                (
                    map(*r),
                    ClockPin {
                        clock: map(p.clock),
                        polarity: p.polarity,
                    },
                )
            })
            .collect();
        FlatDesign {
            top: self.top,
            signals,
            elements,
            clocks,
        }
    }
}

enum Simple {
    Const(Bits),
    Pass(SignalId),
}

fn simplify(op: &Op, ins: &[SignalId], cv: &[Option<&Bits>], w: u32) -> Option<Simple> {
    let zero = |k: usize| cv[k].is_some_and(|v| v.is_zero());
    // all-ones as seen by an operator that zero-extends to `w`
    let ones = |k: usize| cv[k].is_some_and(|v| v.width() >= w && v.resize(w).is_ones());
    let one = |k: usize| cv[k].is_some_and(|v| v.as_u64() == Some(1));
    match op {
        Op::And => {
            if zero(0) || zero(1) {
                Some(Simple::Const(Bits::zero(w)))
            } else if ones(0) {
                Some(Simple::Pass(ins[1]))
            } else if ones(1) {
                Some(Simple::Pass(ins[0]))
            } else {
                None
            }
        }
        Op::Or | Op::Xor | Op::Add => {
            if zero(0) {
                Some(Simple::Pass(ins[1]))
            } else if zero(1) {
                Some(Simple::Pass(ins[0]))
            } else {
                None
            }
        }
        Op::Sub | Op::Shl | Op::Shr => zero(1).then(|| Simple::Pass(ins[0])),
        Op::Mul => {
            if zero(0) || zero(1) {
                Some(Simple::Const(Bits::zero(w)))
            } else if one(0) {
                Some(Simple::Pass(ins[1]))
            } else if one(1) {
                Some(Simple::Pass(ins[0]))
            } else {
                None
            }
        }
        Op::Mux => {
            let c = cv[0]?;
            Some(Simple::Pass(if c.is_zero() { ins[2] } else { ins[1] }))
        }
        Op::Case { arms } => {
            let sel = cv[0]?;
            let k = arms
                .iter()
                .position(|labels| labels.iter().any(|l| l.resize(sel.width()) == *sel))
                .unwrap_or(arms.len());
            Some(Simple::Pass(ins[1 + k]))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborate::elaborate;
    use crate::frontend::parse_text;

    fn build(src: &str) -> FlatDesign {
        let mods = parse_text("t.v", src).unwrap();
        elaborate(&mods, "top").unwrap()
    }

    #[test]
    fn annihilator_folds_to_constant() {
        let d = optimize(&build("module top(input a, output y); assign y = a & 1'b0; endmodule")).unwrap();
        assert_eq!(d.elements.len(), 1);
        assert_eq!(d.elements[0].op, Op::Const(Bits::zero(1)));
        assert_eq!(d.signal(d.elements[0].output).name, "top_y");
    }

    #[test]
    fn buffer_chain_collapses() {
        let d = optimize(&build(
            "module top(input s0, output s2); wire s1; assign s1 = s0; assign s2 = s1; endmodule",
        ))
        .unwrap();
        assert_eq!(d.elements.len(), 1);
        let e = &d.elements[0];
        assert_eq!(e.op, Op::Buffer);
        assert_eq!(d.signal(e.inputs[0]).name, "top_s0");
        assert_eq!(d.signal(e.output).name, "top_s2");
        assert!(d.find_signal("top_s1").is_none());
    }

    #[test]
    fn enable_register_becomes_mux() {
        let d = optimize(&build(
            "module top(input clk, en, d, output reg q); always @(posedge clk) if (en) q <= d; endmodule",
        ))
        .unwrap();
        let q = d.find_signal("top_q").unwrap();
        let e = d.elements.iter().find(|e| e.output == q).unwrap();
        assert_eq!(e.op, Op::Mux);
        assert_eq!(
            e.inputs,
            vec![d.find_signal("top_en").unwrap(), d.find_signal("top_d").unwrap(), q]
        );
    }

    #[test]
    fn idempotent() {
        let d = optimize(&build(
            "module top(input clk, input [3:0] a, output reg [3:0] q); wire [3:0] t = a + 4'd0;
             always @(posedge clk) q <= t | (a & 4'd0); endmodule",
        ))
        .unwrap();
        assert_eq!(optimize(&d).unwrap(), d);
    }

    #[test]
    fn constant_zero_divisor_is_an_error() {
        let e = optimize(&build(
            "module top(input [3:0] a, output [3:0] y); assign y = a / 4'd0; endmodule",
        ))
        .unwrap_err();
        assert!(matches!(e, ElabError::DivisionByZero { .. }));
    }
}
