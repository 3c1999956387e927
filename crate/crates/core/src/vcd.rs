//! Value change dump writer. Trace stamps (cycles, or time for testbench
//! runs) become VCD timestamps.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::bits::Bits;
use crate::ir::FlatDesign;
use crate::sim::Trace;

/// Short printable identifier code for the `k`-th variable.
pub fn id_code(mut k: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'!' + (k % 94) as u8) as char);
        k /= 94;
        if k == 0 {
            break;
        }
        k -= 1;
    }
    s
}

fn value_text(v: &Bits, width: u32, id: &str) -> String {
    if width == 1 {
        return format!("{}{}", u8::from(v.bit(0)), id);
    }
    let bin = v.to_binary_string();
    let digits = bin.trim_start_matches('0');
    format!("b{} {}", if digits.is_empty() { "0" } else { digits }, id)
}

#[derive(Default)]
struct Scope {
    vars: Vec<(usize, String)>,
    children: BTreeMap<String, Scope>,
}

impl Scope {
    fn write(&self, name: &str, trace: &Trace, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "$scope module {name} $end")?;
        for (k, var) in &self.vars {
            let w = trace.widths[*k];
            if w == 1 {
                writeln!(out, "$var wire 1 {} {} $end", id_code(*k), var)?;
            } else {
                writeln!(out, "$var wire {} {} {} [{}:0] $end", w, id_code(*k), var, w - 1)?;
            }
        }
        for (n, c) in &self.children {
            c.write(n, trace, out)?;
        }
        writeln!(out, "$upscope $end")
    }
}

/// Write the trace as VCD. Timestamp `c` holds the values after cycle `c`;
/// `$dumpvars` at `#0` therefore shows the state after the first cycle.
pub fn write_vcd(trace: &Trace, design: &FlatDesign, timescale: &str, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "$date aoc $end")?;
    writeln!(out, "$version aoc {} $end", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "$timescale {timescale} $end")?;
    let mut root = Scope::default();
    for (k, &s) in trace.signals.iter().enumerate() {
        let sig = design.signal(s);
        let mut node = &mut root;
        let mut prefix = String::new();
        for part in sig.scope.iter().skip(1) {
            node = node.children.entry(part.clone()).or_default();
        }
        for part in &sig.scope {
            prefix.push_str(part);
            prefix.push('_');
        }
        let var = sig.name.strip_prefix(&prefix).unwrap_or(&sig.name).to_string();
        node.vars.push((k, var));
    }
    root.write(&design.top, trace, out)?;
    writeln!(out, "$enddefinitions $end")?;
    if trace.cycles == 0 {
        return Ok(());
    }
    let mut cur = trace.initial.clone();
    let mut i = 0;
    let changes = &trace.changes;
    while i < changes.len() && changes[i].cycle == 0 {
        cur[changes[i].index] = changes[i].value.clone();
        i += 1;
    }
    writeln!(out, "#0")?;
    writeln!(out, "$dumpvars")?;
    for (k, v) in cur.iter().enumerate() {
        writeln!(out, "{}", value_text(v, trace.widths[k], &id_code(k)))?;
    }
    writeln!(out, "$end")?;
    while i < changes.len() {
        let t = changes[i].cycle;
        let mut stamped = false;
        while i < changes.len() && changes[i].cycle == t {
            let c = &changes[i];
            i += 1;
            if cur[c.index] == c.value {
                continue;
            }
            if !stamped {
                writeln!(out, "#{t}")?;
                stamped = true;
            }
            writeln!(
                out,
                "{}",
                value_text(&c.value, trace.widths[c.index], &id_code(c.index))
            )?;
            cur[c.index] = c.value.clone();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_codes_are_unique() {
        let codes: std::collections::BTreeSet<String> = (0..20000).map(id_code).collect();
        assert_eq!(codes.len(), 20000);
        assert_eq!(id_code(0), "!");
        assert!(codes.iter().all(|c| c.bytes().all(|b| (33..=126).contains(&b))));
    }

    #[test]
    fn vector_values_drop_leading_zeros() {
        assert_eq!(value_text(&Bits::from_u64(5, 8), 8, "!"), "b101 !");
        assert_eq!(value_text(&Bits::zero(8), 8, "!"), "b0 !");
        assert_eq!(value_text(&Bits::from_u64(1, 1), 1, "#"), "1#");
    }
}
