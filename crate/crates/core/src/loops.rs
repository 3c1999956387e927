//! Detection of combinational loops.

use std::collections::VecDeque;

use thiserror::Error;

use crate::ir::*;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("combinational loop through {}", cycle.join(" -> "))]
pub struct LoopError {
    /// Local signal names along the cycle, in dataflow order.
    pub cycle: Vec<String>,
}

/// Report the shortest cycle through combinational signals, if any. Among
/// equally short cycles the one through the lowest signal id wins, and it
/// is listed starting from that signal.
pub fn check_loops(d: &FlatDesign) -> Result<(), LoopError> {
    let n = d.signals.len();
    let comb = |s: SignalId| matches!(d.signal(s).kind, SignalKind::Wire | SignalKind::Output);
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for e in &d.elements {
        if !comb(e.output) {
            continue;
        }
        for &i in &e.inputs {
            if comb(i) {
                succ[i.index()].push(e.output.index());
                indeg[e.output.index()] += 1;
            }
        }
    }
    // peel off the acyclic part first
    let mut q: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut removed = vec![false; n];
    while let Some(v) = q.pop_front() {
        removed[v] = true;
        for &w in &succ[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                q.push_back(w);
            }
        }
    }
    if removed.iter().all(|&r| r) {
        return Ok(());
    }
    let mut best: Option<Vec<usize>> = None;
    for start in (0..n).filter(|&v| !removed[v]) {
        if let Some(c) = shortest_cycle(&succ, &removed, start) {
            if best.as_ref().is_none_or(|b| c.len() < b.len()) {
                best = Some(c);
            }
        }
    }
    let mut cycle = best.expect("cyclic residue has a cycle");
    let k = (0..cycle.len()).min_by_key(|&i| cycle[i]).unwrap();
    cycle.rotate_left(k);
    Err(LoopError {
        cycle: cycle
            .into_iter()
            .map(|v| d.signals[v].local_name().to_string())
            .collect(),
    })
}

fn shortest_cycle(succ: &[Vec<usize>], removed: &[bool], start: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; succ.len()];
    let mut q = VecDeque::from([start]);
    let mut seen = vec![false; succ.len()];
    seen[start] = true;
    while let Some(v) = q.pop_front() {
        for &w in &succ[v] {
            if removed[w] {
                continue;
            }
            if w == start {
                let mut path = vec![v];
                let mut x = v;
                while x != start {
                    x = prev[x];
                    path.push(x);
                }
                path.reverse();
                return Some(path);
            }
            if !seen[w] {
                seen[w] = true;
                prev[w] = v;
                q.push_back(w);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborate::elaborate;
    use crate::frontend::parse_text;

    fn check(src: &str) -> Result<(), LoopError> {
        let mods = parse_text("t.v", src).unwrap();
        check_loops(&elaborate(&mods, "top").unwrap())
    }

    #[test]
    fn two_wire_loop() {
        let e = check(
            "module top(input c, d, output y); wire a, b; assign a = b & c; assign b = a | d; assign y = a; endmodule",
        )
        .unwrap_err();
        assert_eq!(e.cycle, vec!["a", "b"]);
    }

    #[test]
    fn registers_break_loops() {
        check("module top(input clk, output reg a, output reg b); always @(posedge clk) begin a <= b; b <= a; end endmodule")
            .unwrap();
    }
}
