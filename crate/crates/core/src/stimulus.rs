//! Line-oriented stimulus files.
//!
//! ```text
//! # comments and blank lines are ignored
//! clock clk 2        # period in cycles, optional phase as a third field
//! 0 rst 1
//! 4 rst 0
//! 6 data 0xff
//! ```

use thiserror::Error;

use crate::bits::Bits;
use crate::ir::{FlatDesign, SignalId, SignalKind};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum StimulusError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: `{signal}` is not a design input")]
    NotAnInput { line: usize, signal: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub cycle: u64,
    pub signal: String,
    pub value: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClockSpec {
    pub signal: String,
    pub period: u64,
    pub phase: u64,
    pub line: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stimulus {
    pub assignments: Vec<Assignment>,
    pub clocks: Vec<ClockSpec>,
}

impl Stimulus {
    pub fn parse(text: &str) -> Result<Stimulus, StimulusError> {
        let mut out = Stimulus::default();
        let mut last_cycle = 0;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let f: Vec<&str> = body.split_whitespace().collect();
            let err = |message: &str| StimulusError::Syntax {
                line,
                message: message.to_string(),
            };
            if f[0] == "clock" {
                if !(3..=4).contains(&f.len()) {
                    return Err(err("expected `clock <signal> <period> [phase]`"));
                }
                let period: u64 = f[2].parse().map_err(|_| err("bad clock period"))?;
                if period < 2 || !period.is_multiple_of(2) {
                    return Err(err("clock period must be an even number of cycles"));
                }
                let phase: u64 = match f.get(3) {
                    Some(p) => p.parse().map_err(|_| err("bad clock phase"))?,
                    None => 0,
                };
                out.clocks.push(ClockSpec {
                    signal: f[1].to_string(),
                    period,
                    phase,
                    line,
                });
                continue;
            }
            if f.len() != 3 {
                return Err(err("expected `<cycle> <signal> <value>`"));
            }
            let cycle: u64 = f[0].parse().map_err(|_| err("bad cycle number"))?;
            if cycle < last_cycle {
                return Err(err("cycles must be nondecreasing"));
            }
            last_cycle = cycle;
            if parse_value(f[2], 1).is_none() {
                return Err(err("bad value"));
            }
            out.assignments.push(Assignment {
                cycle,
                signal: f[1].to_string(),
                value: f[2].to_string(),
                line,
            });
        }
        Ok(out)
    }

    /// Bind signal names to design inputs and size the values.
    pub fn resolve(&self, d: &FlatDesign) -> Result<ResolvedStimulus, StimulusError> {
        let input = |name: &str, line: usize| -> Result<SignalId, StimulusError> {
            match d.lookup(name) {
                Some(s) if d.signal(s).kind == SignalKind::Input => Ok(s),
                _ => Err(StimulusError::NotAnInput {
                    line,
                    signal: name.to_string(),
                }),
            }
        };
        let mut events = Vec::new();
        for a in &self.assignments {
            let s = input(&a.signal, a.line)?;
            let v = parse_value(&a.value, d.signal(s).width).ok_or(StimulusError::Syntax {
                line: a.line,
                message: "bad value".into(),
            })?;
            events.push((a.cycle, s, v));
        }
        let mut clocks = Vec::new();
        for c in &self.clocks {
            clocks.push((input(&c.signal, c.line)?, c.period, c.phase));
        }
        Ok(ResolvedStimulus {
            events,
            clocks,
            next: 0,
        })
    }
}

/// `0x..`, `0b..`, decimal, or Verilog-style `8'hff`.
pub fn parse_value(text: &str, width: u32) -> Option<Bits> {
    if let Some((_, rest)) = text.split_once('\'') {
        let mut chars = rest.chars();
        let radix = match chars.next()?.to_ascii_lowercase() {
            'h' => 16,
            'b' => 2,
            'd' => 10,
            'o' => 8,
            _ => return None,
        };
        let digits: String = chars.filter(|&c| c != '_').collect();
        return Bits::parse_radix(&digits, radix, width);
    }
    Bits::parse(text, width)
}

/// Stimulus bound to a design, consumed cycle by cycle.
#[derive(Clone, Debug, Default)]
pub struct ResolvedStimulus {
    pub events: Vec<(u64, SignalId, Bits)>,
    /// (input, period, phase)
    pub clocks: Vec<(SignalId, u64, u64)>,
    next: usize,
}

impl ResolvedStimulus {
    pub fn new(events: Vec<(u64, SignalId, Bits)>, clocks: Vec<(SignalId, u64, u64)>) -> Self {
        ResolvedStimulus {
            events,
            clocks,
            next: 0,
        }
    }

    /// Value of a generated clock at `cycle`.
    pub fn clock_value(period: u64, phase: u64, cycle: u64) -> u64 {
        ((cycle + phase) / (period / 2)) % 2
    }

    /// Input values to apply at the start of `cycle`, in file order. Must be
    /// called with increasing cycles.
    pub fn take(&mut self, cycle: u64) -> Vec<(SignalId, Bits)> {
        let mut out: Vec<(SignalId, Bits)> = self
            .clocks
            .iter()
            .map(|&(s, p, ph)| (s, Bits::from_u64(Self::clock_value(p, ph, cycle), 1)))
            .collect();
        while self.next < self.events.len() && self.events[self.next].0 <= cycle {
            let (_, s, v) = &self.events[self.next];
            out.push((*s, v.clone()));
            self.next += 1;
        }
        out
    }

    pub fn rewind(&mut self) {
        self.next = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lines_and_clocks() {
        let s = Stimulus::parse("# hi\nclock clk 4 1\n0 a 1\n3 b 8'hff # trailing\n").unwrap();
        assert_eq!(s.clocks[0].period, 4);
        assert_eq!(s.clocks[0].phase, 1);
        assert_eq!(s.assignments.len(), 2);
        assert_eq!(parse_value("8'hff", 8).unwrap().to_u64(), 255);
        assert_eq!(parse_value("0b101", 3).unwrap().to_u64(), 5);
    }

    #[test]
    fn rejects_decreasing_cycles() {
        assert!(Stimulus::parse("3 a 1\n2 a 0\n").is_err());
    }

    #[test]
    fn clock_waveform() {
        let v: Vec<u64> = (0..6).map(|c| ResolvedStimulus::clock_value(2, 0, c)).collect();
        assert_eq!(v, vec![0, 1, 0, 1, 0, 1]);
        let v: Vec<u64> = (0..6).map(|c| ResolvedStimulus::clock_value(4, 1, c)).collect();
        assert_eq!(v, vec![0, 1, 1, 0, 0, 1]);
    }
}
