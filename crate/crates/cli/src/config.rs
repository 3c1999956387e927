//! `key=value` configuration files.

use aoc::partition::ExecConfig;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FileConfig {
    pub tdmax: Option<usize>,
    pub phmax: Option<usize>,
    pub cw: Option<u32>,
    pub timescale: Option<String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<FileConfig, String> {
        let mut c = FileConfig::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("line {}: expected key=value", k + 1));
            };
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| format!("line {}: `{v}` is not a number", k + 1))
            };
            match key {
                "tdmax" => c.tdmax = Some(num(value)?),
                "phmax" => c.phmax = Some(num(value)?),
                "cw" => c.cw = Some(num(value)? as u32),
                "timescale" => c.timescale = Some(value.to_string()),
                _ => return Err(format!("line {}: unknown key `{key}`", k + 1)),
            }
        }
        Ok(c)
    }

    /// Command-line values win over file values, which win over defaults.
    pub fn exec(&self, threads: Option<usize>, phmax: Option<usize>, cw: Option<u32>) -> ExecConfig {
        let d = ExecConfig::default();
        ExecConfig {
            tdmax: threads.or(self.tdmax).unwrap_or(d.tdmax),
            phmax: phmax.or(self.phmax).unwrap_or(d.phmax),
            cw: cw.or(self.cw).unwrap_or(d.cw),
        }
    }
}
