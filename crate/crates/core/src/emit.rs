//! C source emission of an execution plan, plus a differential check of the
//! emitted model against the interpreter.
//!
//! Generated layout: preamble with word helpers, a shared state block for
//! inputs, registers and outputs, one private block per pod partition, one
//! function per partition, a commit function, the cycle function
//! `aoc_step` and the stimulus hook `aoc_set`. With `AOC_MAIN` defined the
//! file also contains a line-oriented driver reading commands from stdin.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use thiserror::Error;

use crate::bits::Bits;
use crate::clocks::{is_comb, PodOwner};
use crate::ir::*;
use crate::plan::Plan;
use crate::sim::{Change, Mismatch, Trace, EDGE_ROUND_CAP};
use crate::stimulus::ResolvedStimulus;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("no C compiler found")]
    ToolchainMissing,
    #[error("compiling the emitted model failed:\n{0}")]
    Compile(String),
    #[error("running the emitted model failed: {0}")]
    Run(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Emitted source text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmittedModel {
    pub header: String,
    pub source: String,
}

impl EmittedModel {
    /// Header and source in one translation unit.
    pub fn single_file(&self) -> String {
        format!("{}\n{}", self.header, self.source)
    }

    /// Source that includes `header_name` instead of inlining the header.
    pub fn split_source(&self, header_name: &str) -> String {
        format!("#include \"{header_name}\"\n\n{}", self.source)
    }
}

fn words(width: u32, cw: u32) -> usize {
    width.div_ceil(cw) as usize
}

/// A value as `cw`-bit hexadecimal literals, least significant first.
fn c_words(b: &Bits, cw: u32) -> Vec<String> {
    let n = words(b.width(), cw);
    (0..n)
        .map(|k| {
            let v = if cw == 64 {
                b.words()[k]
            } else {
                (b.words()[k / 2] >> (32 * (k % 2))) & 0xffff_ffff
            };
            format!("0x{v:x}u")
        })
        .collect()
}

fn mask_lit(w: u32, cw: u32) -> String {
    if w >= cw {
        format!("0x{:x}u", if cw == 64 { u64::MAX } else { u32::MAX as u64 })
    } else {
        format!("0x{:x}u", (1u64 << w) - 1)
    }
}

fn mangle(s: &Signal) -> String {
    let clean: String = s
        .name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    format!("s{}_{}", s.id.0, clean)
}

/// Where an operand lives in the emitted code.
#[derive(Clone, Debug)]
struct Operand {
    lvalue: String,
    width: u32,
    scalar: bool,
}

impl Operand {
    /// Pointer form for helper calls.
    fn ptr(&self) -> String {
        if self.scalar {
            format!("&{}", self.lvalue)
        } else {
            self.lvalue.clone()
        }
    }
}

/// Statements computing `op` into the word array `t`.
fn lower(op: &Op, w: u32, ins: &[Operand], cw: u32, consts: &mut Vec<(String, Vec<String>)>) -> String {
    let narrow = w <= cw && ins.iter().all(|o| o.width <= cw);
    let m = mask_lit(w, cw);
    let v = |k: usize| ins[k].lvalue.clone();
    if narrow {
        let e = match op {
            Op::Buffer => format!("{} & {m}", v(0)),
            Op::Const(b) => format!("{} & {m}", c_words(b, cw)[0]),
            Op::Not => format!("~{} & {m}", v(0)),
            Op::And | Op::Or | Op::Xor => {
                let sym = match op {
                    Op::And => "&",
                    Op::Or => "|",
                    _ => "^",
                };
                if w >= ins[0].width.max(ins[1].width) {
                    format!("{} {sym} {}", v(0), v(1))
                } else {
                    format!("({} {sym} {}) & {m}", v(0), v(1))
                }
            }
            Op::Xnor => format!("~({} ^ {}) & {m}", v(0), v(1)),
            Op::Add => format!("(W)({} + {}) & {m}", v(0), v(1)),
            Op::Sub => format!("(W)({} - {}) & {m}", v(0), v(1)),
            Op::Mul => format!("(W)({} * {}) & {m}", v(0), v(1)),
            Op::Div | Op::Mod => {
                let sym = if matches!(op, Op::Div) { "/" } else { "%" };
                format!("({b} & {m}) ? ({a} & {m}) {sym} ({b} & {m}) : 0", a = v(0), b = v(1))
            }
            Op::Shl => format!("{b} >= {w} ? 0 : (({a} & {m}) << {b}) & {m}", a = v(0), b = v(1)),
            Op::Shr => format!("{b} >= {w} ? 0 : ({a} & {m}) >> {b}", a = v(0), b = v(1)),
            Op::Eq => format!("{} == {}", v(0), v(1)),
            Op::Ne => format!("{} != {}", v(0), v(1)),
            Op::Lt => format!("{} < {}", v(0), v(1)),
            Op::Le => format!("{} <= {}", v(0), v(1)),
            Op::Gt => format!("{} > {}", v(0), v(1)),
            Op::Ge => format!("{} >= {}", v(0), v(1)),
            Op::LogicNot => format!("{} == 0", v(0)),
            Op::LogicAnd => format!("{} != 0 && {} != 0", v(0), v(1)),
            Op::LogicOr => format!("{} != 0 || {} != 0", v(0), v(1)),
            Op::RedAnd => format!("{} == {}", v(0), mask_lit(ins[0].width, cw)),
            Op::RedNand => format!("{} != {}", v(0), mask_lit(ins[0].width, cw)),
            Op::RedOr => format!("{} != 0", v(0)),
            Op::RedNor => format!("{} == 0", v(0)),
            Op::RedXor => format!("aoc_par1({})", v(0)),
            Op::RedXnor => format!("!aoc_par1({})", v(0)),
            Op::Mux => format!("({} ? {} : {}) & {m}", v(0), v(1), v(2)),
            Op::Case { arms } => {
                let mut s = String::new();
                for (k, labels) in arms.iter().enumerate() {
                    let conds: Vec<String> = labels
                        .iter()
                        .filter(|l| l.as_u64().is_some_and(|x| cw == 64 || x <= u32::MAX as u64))
                        .map(|l| format!("{} == 0x{:x}u", v(0), l.to_u64()))
                        .collect();
                    let cond = if conds.is_empty() {
                        "0".to_string()
                    } else {
                        conds.join(" || ")
                    };
                    let kw = if k == 0 { "if" } else { "else if" };
                    let _ = write!(s, "{kw} ({cond}) t[0] = {} & {m}; ", v(1 + k));
                }
                let _ = write!(s, "else t[0] = {} & {m};", v(1 + arms.len()));
                return s;
            }
            Op::Concat => {
                let mut acc = String::from("0");
                for o in ins {
                    acc = format!("aoc_shl1({acc}, {}) | {}", o.width, o.lvalue);
                }
                format!("({acc}) & {m}")
            }
            Op::Slice { lsb } => {
                if *lsb >= cw {
                    "0".to_string()
                } else {
                    format!("({} >> {lsb}) & {m}", v(0))
                }
            }
            Op::Index { elem_width } => {
                let k = ins[0].width / elem_width;
                format!(
                    "{i} < {k}u ? (({a} >> ({i} * {elem_width})) & {em}) & {m} : 0",
                    a = v(0),
                    i = v(1),
                    em = mask_lit(*elem_width, cw)
                )
            }
            Op::IndexAssign { elem_width } => {
                let k = w / elem_width;
                let em = mask_lit(*elem_width, cw);
                format!(
                    "{i} < {k}u ? ((({a} & {m}) & ~((W){em} << ({i} * {elem_width}))) | (({x} & {em}) << ({i} * {elem_width}))) & {m} : {a} & {m}",
                    a = v(0),
                    i = v(1),
                    x = v(2)
                )
            }
        };
        return format!("t[0] = {e};");
    }
    let p = |k: usize| format!("{}, {}", ins[k].ptr(), ins[k].width);
    match op {
        Op::Buffer => format!("aoc_buf(t, {w}, {});", p(0)),
        Op::Const(b) => {
            let name = format!("K{}", consts.len());
            consts.push((name.clone(), c_words(b, cw)));
            format!("aoc_buf(t, {w}, {name}, {});", b.width())
        }
        Op::Not => format!("aoc_not(t, {w}, {});", p(0)),
        Op::And | Op::Or | Op::Xor | Op::Xnor => {
            let k = match op {
                Op::And => 0,
                Op::Or => 1,
                Op::Xor => 2,
                _ => 3,
            };
            format!("aoc_bit(t, {w}, {}, {}, {k});", p(0), p(1))
        }
        Op::Add => format!("aoc_add(t, {w}, {}, {});", p(0), p(1)),
        Op::Sub => format!("aoc_sub(t, {w}, {}, {});", p(0), p(1)),
        Op::Mul => format!("aoc_mul(t, {w}, {}, {});", p(0), p(1)),
        Op::Div => format!("aoc_divmod(t, {w}, {}, {}, 0);", p(0), p(1)),
        Op::Mod => format!("aoc_divmod(t, {w}, {}, {}, 1);", p(0), p(1)),
        Op::Shl => format!("aoc_shift(t, {w}, {}, {}, 1);", p(0), p(1)),
        Op::Shr => format!("aoc_shift(t, {w}, {}, {}, 0);", p(0), p(1)),
        Op::Eq | Op::Ne | Op::Lt | Op::Le | Op::Gt | Op::Ge => {
            let rel = match op {
                Op::Eq => "== 0",
                Op::Ne => "!= 0",
                Op::Lt => "< 0",
                Op::Le => "<= 0",
                Op::Gt => "> 0",
                _ => ">= 0",
            };
            format!("aoc_bool(t, {w}, aoc_cmp({}, {}) {rel});", p(0), p(1))
        }
        Op::LogicNot => format!("aoc_bool(t, {w}, aoc_zero({}));", p(0)),
        Op::LogicAnd => format!("aoc_bool(t, {w}, !aoc_zero({}) && !aoc_zero({}));", p(0), p(1)),
        Op::LogicOr => format!("aoc_bool(t, {w}, !aoc_zero({}) || !aoc_zero({}));", p(0), p(1)),
        Op::RedAnd => format!("aoc_bool(t, {w}, aoc_redand({}));", p(0)),
        Op::RedNand => format!("aoc_bool(t, {w}, !aoc_redand({}));", p(0)),
        Op::RedOr => format!("aoc_bool(t, {w}, !aoc_zero({}));", p(0)),
        Op::RedNor => format!("aoc_bool(t, {w}, aoc_zero({}));", p(0)),
        Op::RedXor => format!("aoc_bool(t, {w}, aoc_parity({}));", p(0)),
        Op::RedXnor => format!("aoc_bool(t, {w}, !aoc_parity({}));", p(0)),
        Op::Mux => format!(
            "if (!aoc_zero({})) aoc_buf(t, {w}, {}); else aoc_buf(t, {w}, {});",
            p(0),
            p(1),
            p(2)
        ),
        Op::Case { arms } => {
            let mut s = String::new();
            for (k, labels) in arms.iter().enumerate() {
                let conds: Vec<String> = labels
                    .iter()
                    .map(|l| {
                        let name = format!("K{}", consts.len());
                        consts.push((name.clone(), c_words(l, cw)));
                        format!("aoc_cmp({}, {name}, {}) == 0", p(0), l.width())
                    })
                    .collect();
                let cond = if conds.is_empty() {
                    "0".to_string()
                } else {
                    conds.join(" || ")
                };
                let kw = if k == 0 { "if" } else { "else if" };
                let _ = write!(s, "{kw} ({cond}) aoc_buf(t, {w}, {}); ", p(1 + k));
            }
            let _ = write!(s, "else aoc_buf(t, {w}, {});", p(1 + arms.len()));
            s
        }
        Op::Concat => {
            let mut s = format!("aoc_bool(t, {w}, 0);");
            let mut pos = 0u64;
            for o in ins.iter().rev() {
                if pos >= w as u64 {
                    break;
                }
                let _ = write!(s, " aoc_set_bits(t, {w}, {pos}u, {}, {});", o.ptr(), o.width);
                pos += o.width as u64;
            }
            s
        }
        Op::Slice { lsb } => format!("aoc_get_bits(t, {w}, {}, {lsb}u);", p(0)),
        Op::Index { elem_width } => format!("aoc_index(t, {w}, {}, {}, {elem_width});", p(0), p(1)),
        Op::IndexAssign { elem_width } => {
            format!("aoc_index_assign(t, {w}, {}, {}, {}, {elem_width});", p(0), p(1), p(2))
        }
    }
}

const PREAMBLE: &str = r#"#define NW(w) (((w) + CW - 1) / CW)

static W aoc_shl1(W x, int s) { return s >= CW ? 0 : x << s; }
static int aoc_par1(W x) { int p = 0; while (x) { p ^= 1; x &= x - 1; } return p; }
static void aoc_mask(W *o, int w) { int r = w % CW; if (r) o[NW(w) - 1] &= ((W)1 << r) - 1; }
static void aoc_ext(W *t, int n, const W *a, int aw) {
    int k = NW(aw);
    for (int i = 0; i < n; i++) t[i] = i < k ? a[i] : 0;
}
static int aoc_zero(const W *a, int aw) {
    for (int i = 0; i < NW(aw); i++) if (a[i]) return 0;
    return 1;
}
static int aoc_cmp(const W *a, int aw, const W *b, int bw) {
    int na = NW(aw), nb = NW(bw), n = na > nb ? na : nb;
    for (int i = n - 1; i >= 0; i--) {
        W x = i < na ? a[i] : 0, y = i < nb ? b[i] : 0;
        if (x != y) return x < y ? -1 : 1;
    }
    return 0;
}
static void aoc_bool(W *o, int ow, int v) { memset(o, 0, NW(ow) * sizeof(W)); o[0] = (W)(v != 0); }
static void aoc_buf(W *o, int ow, const W *a, int aw) { aoc_ext(o, NW(ow), a, aw); aoc_mask(o, ow); }
static void aoc_not(W *o, int ow, const W *a, int aw) {
    int n = NW(ow);
    aoc_ext(o, n, a, aw);
    for (int i = 0; i < n; i++) o[i] = ~o[i];
    aoc_mask(o, ow);
}
static void aoc_bit(W *o, int ow, const W *a, int aw, const W *b, int bw, int k) {
    W x[AOC_MAXW], y[AOC_MAXW];
    int n = NW(ow);
    aoc_ext(x, n, a, aw);
    aoc_ext(y, n, b, bw);
    for (int i = 0; i < n; i++)
        o[i] = k == 0 ? x[i] & y[i] : k == 1 ? x[i] | y[i] : k == 2 ? x[i] ^ y[i] : ~(x[i] ^ y[i]);
    aoc_mask(o, ow);
}
static void aoc_add(W *o, int ow, const W *a, int aw, const W *b, int bw) {
    W x[AOC_MAXW], y[AOC_MAXW], c = 0;
    int n = NW(ow);
    aoc_ext(x, n, a, aw);
    aoc_ext(y, n, b, bw);
    for (int i = 0; i < n; i++) {
        W s = x[i] + c;
        W c1 = s < c;
        W s2 = s + y[i];
        o[i] = s2;
        c = c1 | (s2 < s);
    }
    aoc_mask(o, ow);
}
static void aoc_sub(W *o, int ow, const W *a, int aw, const W *b, int bw) {
    W x[AOC_MAXW], y[AOC_MAXW], br = 0;
    int n = NW(ow);
    aoc_ext(x, n, a, aw);
    aoc_ext(y, n, b, bw);
    for (int i = 0; i < n; i++) {
        W d = x[i] - y[i];
        W b1 = x[i] < y[i];
        W d2 = d - br;
        W b2 = d < br;
        o[i] = d2;
        br = b1 | b2;
    }
    aoc_mask(o, ow);
}
static void aoc_mul(W *o, int ow, const W *a, int aw, const W *b, int bw) {
    W x[AOC_MAXW], y[AOC_MAXW], acc[AOC_MAXW];
    int n = NW(ow);
    aoc_ext(x, n, a, aw);
    aoc_ext(y, n, b, bw);
    memset(acc, 0, sizeof acc);
    for (int i = 0; i < n; i++) {
        DW carry = 0;
        for (int j = 0; j < n - i; j++) {
            DW cur = (DW)acc[i + j] + (DW)x[i] * (DW)y[j] + carry;
            acc[i + j] = (W)cur;
            carry = cur >> CW;
        }
    }
    memcpy(o, acc, n * sizeof(W));
    aoc_mask(o, ow);
}
static void aoc_divmod(W *o, int ow, const W *a, int aw, const W *b, int bw, int want_mod) {
    W x[AOC_MAXW], y[AOC_MAXW], q[AOC_MAXW], r[AOC_MAXW];
    int n = NW(ow);
    aoc_ext(x, n, a, aw);
    aoc_mask(x, ow);
    aoc_ext(y, n, b, bw);
    aoc_mask(y, ow);
    memset(q, 0, sizeof q);
    memset(r, 0, sizeof r);
    if (aoc_zero(y, ow)) { aoc_bool(o, ow, 0); return; }
    for (int i = ow - 1; i >= 0; i--) {
        W out = r[n - 1] >> (CW - 1);
        for (int k = n - 1; k > 0; k--) r[k] = (r[k] << 1) | (r[k - 1] >> (CW - 1));
        r[0] = (r[0] << 1) | ((x[i / CW] >> (i % CW)) & 1);
        if (out || aoc_cmp(r, n * CW, y, n * CW) >= 0) {
            W br = 0;
            for (int k = 0; k < n; k++) {
                W d = r[k] - y[k];
                W b1 = r[k] < y[k];
                W b2 = d < br;
                r[k] = d - br;
                br = b1 | b2;
            }
            q[i / CW] |= (W)1 << (i % CW);
        }
    }
    memcpy(o, want_mod ? r : q, n * sizeof(W));
    aoc_mask(o, ow);
}
/* value of an operand as a 64-bit amount; 0 when it does not fit */
static int aoc_amount(const W *b, int bw, uint64_t *amt) {
    uint64_t v = 0;
    for (int i = 0; i < NW(bw); i++) {
        if (i * CW < 64) v |= (uint64_t)b[i] << (i * CW);
        else if (b[i]) return 0;
    }
    *amt = v;
    return 1;
}
static void aoc_shift(W *o, int ow, const W *a, int aw, const W *b, int bw, int left) {
    W x[AOC_MAXW];
    uint64_t amt;
    int n = NW(ow);
    aoc_ext(x, n, a, aw);
    aoc_mask(x, ow);
    if (!aoc_amount(b, bw, &amt) || amt >= (uint64_t)ow) { aoc_bool(o, ow, 0); return; }
    int ws = (int)(amt / CW), bs = (int)(amt % CW);
    for (int i = 0; i < n; i++) {
        if (left) {
            int j = n - 1 - i;
            W lo = j >= ws ? x[j - ws] : 0;
            W lower = j > ws ? x[j - ws - 1] : 0;
            o[j] = bs == 0 ? lo : (lo << bs) | (lower >> (CW - bs));
        } else {
            W hi = i + ws < n ? x[i + ws] : 0;
            W higher = i + ws + 1 < n ? x[i + ws + 1] : 0;
            o[i] = bs == 0 ? hi : (hi >> bs) | (higher << (CW - bs));
        }
    }
    aoc_mask(o, ow);
}
static int aoc_redand(const W *a, int aw) {
    int n = NW(aw);
    for (int i = 0; i < n; i++) {
        W m = (i + 1 == n && aw % CW) ? ((W)1 << (aw % CW)) - 1 : ~(W)0;
        if ((a[i] & m) != m) return 0;
    }
    return 1;
}
static int aoc_parity(const W *a, int aw) {
    int p = 0;
    for (int i = 0; i < NW(aw); i++) p ^= aoc_par1(a[i]);
    return p;
}
static void aoc_get_bits(W *o, int ow, const W *a, int aw, uint64_t lsb) {
    int n = NW(ow), na = NW(aw);
    uint64_t word = lsb / CW;
    int shift = (int)(lsb % CW);
    for (int k = 0; k < n; k++) {
        W lo = word + k < (uint64_t)na ? a[word + k] : 0;
        W hi = word + k + 1 < (uint64_t)na ? a[word + k + 1] : 0;
        o[k] = shift == 0 ? lo : (lo >> shift) | (hi << (CW - shift));
    }
    aoc_mask(o, ow);
}
static void aoc_set_bits(W *o, int ow, uint64_t lsb, const W *src, int sw) {
    uint64_t remaining = (uint64_t)sw, pos = lsb, spos = 0;
    int n = NW(ow);
    while (remaining > 0) {
        uint64_t dw = pos / CW;
        int db = (int)(pos % CW);
        int chunk = (int)(remaining < (uint64_t)(CW - db) ? remaining : (uint64_t)(CW - db));
        W piece;
        aoc_get_bits(&piece, chunk, src, sw, spos);
        if (dw < (uint64_t)n) {
            W m = (chunk >= CW ? ~(W)0 : (((W)1 << chunk) - 1)) << db;
            o[dw] = (o[dw] & ~m) | ((piece << db) & m);
        }
        pos += chunk;
        spos += chunk;
        remaining -= chunk;
    }
    aoc_mask(o, ow);
}
static void aoc_index(W *o, int ow, const W *a, int aw, const W *ix, int iw, int ew) {
    uint64_t idx;
    W f[AOC_MAXW];
    aoc_bool(o, ow, 0);
    if (aoc_amount(ix, iw, &idx) && idx < (uint64_t)(aw / ew)) {
        aoc_get_bits(f, ew, a, aw, idx * ew);
        int k = NW(ow) < NW(ew) ? NW(ow) : NW(ew);
        memcpy(o, f, k * sizeof(W));
    }
    aoc_mask(o, ow);
}
static void aoc_index_assign(W *o, int ow, const W *a, int aw, const W *ix, int iw, const W *v, int vw, int ew) {
    uint64_t idx;
    W f[AOC_MAXW];
    aoc_buf(o, ow, a, aw);
    if (aoc_amount(ix, iw, &idx) && idx < (uint64_t)(ow / ew)) {
        aoc_buf(f, ew, v, vw);
        aoc_set_bits(o, ow, idx * ew, f, ew);
    }
}
"#;

struct Ctx<'a> {
    plan: &'a Plan,
    cw: u32,
    consts: Vec<(String, Vec<String>)>,
    /// Partition index -> local wire lvalues.
    private: Vec<BTreeMap<SignalId, String>>,
}

impl Ctx<'_> {
    fn d(&self) -> &FlatDesign {
        &self.plan.design
    }

    fn scalar(&self, s: SignalId) -> bool {
        self.d().signal(s).width <= self.cw
    }

    fn shared(&self, s: SignalId) -> String {
        format!("sh.{}", mangle(self.d().signal(s)))
    }

    fn operand(&self, part: usize, s: SignalId) -> Operand {
        let lvalue = self.private[part].get(&s).cloned().unwrap_or_else(|| self.shared(s));
        Operand {
            lvalue,
            width: self.d().signal(s).width,
            scalar: self.scalar(s),
        }
    }

    fn decl(&self, s: SignalId, name: &str) -> String {
        let n = words(self.d().signal(s).width, self.cw);
        if self.scalar(s) {
            format!("W {name};")
        } else {
            format!("W {name}[{n}];")
        }
    }

    fn compute(&mut self, part: usize, e: ElementId) -> String {
        let el = self.d().element(e).clone();
        let w = self.d().signal(el.output).width;
        let ins: Vec<Operand> = el.inputs.iter().map(|&i| self.operand(part, i)).collect();
        let mut consts = std::mem::take(&mut self.consts);
        let body = lower(&el.op, w, &ins, self.cw, &mut consts);
        self.consts = consts;
        format!("W t[{}]; {body}", words(w, self.cw))
    }

    /// Assign `t` to `dst` when different, running `on_change` afterwards.
    fn store(&self, dst: &str, s: SignalId, on_change: &str) -> String {
        if self.scalar(s) {
            format!("if (t[0] != {dst}) {{ {dst} = t[0];{on_change} }}")
        } else {
            format!("if (memcmp(t, {dst}, sizeof t)) {{ memcpy({dst}, t, sizeof t);{on_change} }}")
        }
    }
}

/// Emit the C model of `plan`.
pub fn emit_model(plan: &Plan) -> EmittedModel {
    let cw = plan.config.cw;
    let d = &plan.design;
    let parts: Vec<(usize, PodOwner, &crate::partition::ThreadPartition)> = plan
        .pods()
        .enumerate()
        .flat_map(|(pi, pod)| pod.partitions.iter().map(move |t| (pi, pod.owner, t)))
        .collect();
    let mut ctx = Ctx {
        plan,
        cw,
        consts: Vec::new(),
        private: Vec::new(),
    };
    for (k, (_, _, t)) in parts.iter().enumerate() {
        let mut m = BTreeMap::new();
        for e in t.osl.elements() {
            let o = d.element(e).output;
            if is_comb(d, o) {
                m.insert(o, format!("p{k}.{}", mangle(d.signal(o))));
            }
        }
        ctx.private.push(m);
    }

    // shared signals watched by each (partition, group)
    let mut shared_watch: BTreeMap<SignalId, Vec<(usize, usize)>> = BTreeMap::new();
    for (k, (_, _, t)) in parts.iter().enumerate() {
        for (g, grp) in t.osl.groups.iter().enumerate() {
            for &s in &grp.watch {
                if !is_comb(d, s) {
                    shared_watch.entry(s).or_default().push((k, g));
                }
            }
        }
    }
    let marks_of = |s: SignalId| -> String {
        if shared_watch.contains_key(&s) {
            format!(" mark_{}();", mangle(d.signal(s)))
        } else {
            String::new()
        }
    };

    let max_words = d.signals.iter().map(|s| words(s.width, cw)).max().unwrap_or(1).max(1);
    let mut header = String::new();
    let _ = writeln!(
        header,
        "/* AOC model of `{}`, generated by aoc {}.",
        d.top,
        env!("CARGO_PKG_VERSION")
    );
    let _ = writeln!(header, " *");
    let _ = writeln!(
        header,
        " * Word width {cw} bits. Signals wider than a word are arrays, least"
    );
    let _ = writeln!(header, " * significant word first. Memories are stored serialized.");
    let _ = writeln!(header, " *");
    let _ = writeln!(
        header,
        " * API: aoc_init(), aoc_set(id, words), aoc_step() (0 ok, 1 oscillation),"
    );
    let _ = writeln!(header, " * aoc_get(id). Signal ids:");
    for s in d.signals.iter().filter(|s| s.is_observable()) {
        let _ = writeln!(
            header,
            " *   {:>5}  {:<8} {:>4}  {}",
            s.id.0,
            s.kind.as_str(),
            s.width,
            s.name
        );
    }
    let _ = writeln!(header, " *");
    let _ = writeln!(
        header,
        " * Signal-class conversion functions are not generated; designs with"
    );
    let _ = writeln!(
        header,
        " * multi-valued signals would need AND(), OR(), NOT(), RESOLVE() here."
    );
    let _ = writeln!(header, " */");
    let _ = writeln!(header, "#ifndef AOC_MODEL_H\n#define AOC_MODEL_H\n#include <stdint.h>");
    if cw == 64 {
        let _ = writeln!(
            header,
            "typedef uint64_t W;\ntypedef unsigned __int128 DW;\n#define CW 64"
        );
    } else {
        let _ = writeln!(header, "typedef uint32_t W;\ntypedef uint64_t DW;\n#define CW 32");
    }
    let _ = writeln!(
        header,
        "void aoc_init(void);\nvoid aoc_set(int id, const W *v);\nint aoc_step(void);\nconst W *aoc_get(int id);"
    );
    let _ = writeln!(header, "#endif");

    let mut src = String::new();
    let _ = writeln!(src, "#include <stdio.h>\n#include <stdlib.h>\n#include <string.h>\n");
    let _ = writeln!(src, "#define AOC_MAXW {}", max_words + 1);
    src.push_str(PREAMBLE);

    // state block
    let _ = writeln!(src, "\n/* shared state: inputs, registers, outputs, derived clocks */");
    let _ = writeln!(src, "static struct {{");
    let published: Vec<SignalId> = plan
        .output_pod
        .partitions
        .iter()
        .flat_map(|t| t.po.iter().copied())
        .collect();
    for s in &d.signals {
        if !is_comb(d, s.id) || published.contains(&s.id) {
            let _ = writeln!(src, "    {}", ctx.decl(s.id, &mangle(s)));
        }
    }
    let _ = writeln!(src, "    W pad;\n}} sh;");

    let mut body = String::new();
    let mut term_of: BTreeMap<SignalId, (usize, usize)> = BTreeMap::new();
    for (k, (pi, owner, t)) in parts.iter().enumerate() {
        let _ = writeln!(
            src,
            "\n/* pod {pi} partition {}: po {} */",
            t.id,
            t.po.iter()
                .map(|s| d.signal(*s).name.clone())
                .collect::<Vec<_>>()
                .join(" ")
        );
        if !t.placement.slot_of.is_empty() {
            let _ = writeln!(src, "/* placeholder slots:");
            let mut by_slot: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
            for (w, &s) in &t.placement.slot_of {
                by_slot.entry(s).or_default().push(&d.signal(*w).name);
            }
            for (s, ws) in by_slot {
                let _ = writeln!(src, " *   {s}: {}", ws.join(" "));
            }
            let _ = writeln!(src, " */");
        }
        let _ = writeln!(src, "static struct {{");
        for s in ctx.private[k].keys() {
            let _ = writeln!(src, "    {}", ctx.decl(*s, &mangle(d.signal(*s))));
        }
        let mut pre = Vec::new();
        for grp in &t.osl.groups {
            if grp.terminal {
                let r = d.element(grp.members[0]).output;
                if plan.is_split(r) {
                    let _ = writeln!(src, "    {}", ctx.decl(r, &format!("pre_{}", mangle(d.signal(r)))));
                    pre.push(r);
                }
            }
        }
        let _ = writeln!(src, "    W pad;\n}} p{k};");
        let _ = writeln!(src, "static unsigned char a{k}[{}];", t.osl.groups.len().max(1));

        let _ = writeln!(body, "\nstatic void part{k}(int full) {{");
        for (g, grp) in t.osl.groups.iter().enumerate() {
            if grp.terminal {
                let r = d.element(grp.members[0]).output;
                term_of.insert(r, (k, g));
                if !plan.is_split(r) {
                    continue;
                }
            }
            let _ = writeln!(body, "    if (full || a{k}[{g}]) {{\n        a{k}[{g}] = 0;");
            for &e in &grp.members {
                let o = d.element(e).output;
                let comp = ctx.compute(k, e);
                if grp.terminal {
                    let dst = format!("p{k}.pre_{}", mangle(d.signal(o)));
                    let copy = if ctx.scalar(o) {
                        format!("{dst} = t[0];")
                    } else {
                        format!("memcpy({dst}, t, sizeof t);")
                    };
                    let _ = writeln!(body, "        {{ {comp} {copy} }}");
                } else {
                    let watchers: String = t
                        .osl
                        .groups
                        .iter()
                        .enumerate()
                        .filter(|(_, g2)| g2.watch.contains(&o))
                        .map(|(g2, _)| format!(" a{k}[{g2}] = 1;"))
                        .collect();
                    let dst = ctx.private[k][&o].clone();
                    let _ = writeln!(body, "        {{ {comp} {} }}", ctx.store(&dst, o, &watchers));
                }
            }
            let _ = writeln!(body, "    }}");
        }
        if *owner == PodOwner::Output {
            for &s in &t.po {
                if let Some(src_l) = ctx.private[k].get(&s) {
                    let dst = ctx.shared(s);
                    if ctx.scalar(s) {
                        let _ = writeln!(body, "    {dst} = {src_l};");
                    } else {
                        let _ = writeln!(body, "    memcpy({dst}, {src_l}, sizeof {dst});");
                    }
                }
            }
        }
        let _ = writeln!(body, "}}");
    }

    // watcher marking for shared signals
    let mut marks = String::new();
    for (s, list) in &shared_watch {
        let sets: String = list.iter().map(|(k, g)| format!(" a{k}[{g}] = 1;")).collect();
        let _ = writeln!(marks, "static void mark_{}(void) {{{sets} }}", mangle(d.signal(*s)));
    }

    // commit
    let _ = writeln!(
        body,
        "\nstatic void commit(const int *pos, const int *neg, int full) {{"
    );
    let trig = |r: SignalId| -> String {
        let dom = plan.analysis.domain_of[&r];
        match d.clocks[&r].polarity {
            Polarity::Posedge => format!("pos[{dom}]"),
            Polarity::Negedge => format!("neg[{dom}]"),
        }
    };
    for &dom in &plan.analysis.order {
        let o = &plan.orders[dom];
        for &r in &o.commit_sequence {
            if o.split_set.contains(&r) {
                continue;
            }
            let Some(&(k, g)) = term_of.get(&r) else { continue };
            let e = parts[k].2.osl.groups[g].members[0];
            let comp = ctx.compute(k, e);
            let _ = writeln!(
                body,
                "    if ({} && (full || a{k}[{g}])) {{ a{k}[{g}] = 0; {comp} {} }}",
                trig(r),
                ctx.store(&ctx.shared(r), r, &marks_of(r))
            );
        }
    }
    for &dom in &plan.analysis.order {
        for &r in &plan.orders[dom].split_set {
            let Some(&(k, _)) = term_of.get(&r) else { continue };
            let pre = format!("p{k}.pre_{}", mangle(d.signal(r)));
            let dst = ctx.shared(r);
            let stmt = if ctx.scalar(r) {
                format!("W t[1] = {{ {pre} }}; {}", ctx.store(&dst, r, &marks_of(r)))
            } else {
                format!(
                    "W t[{}]; memcpy(t, {pre}, sizeof t); {}",
                    words(d.signal(r).width, cw),
                    ctx.store(&dst, r, &marks_of(r))
                )
            };
            let _ = writeln!(body, "    if ({}) {{ {stmt} }}", trig(r));
        }
    }
    let _ = writeln!(body, "}}");

    // cycle function
    let nd = plan.analysis.domains.len();
    let od_parts: Vec<usize> = parts
        .iter()
        .enumerate()
        .filter(|(_, p)| p.1 == PodOwner::Output)
        .map(|(k, _)| k)
        .collect();
    let _ = writeln!(body, "\nstatic int full_mode;\nstatic int prev_root[{}];", nd.max(1));
    let _ = writeln!(body, "\nstatic void output_pass(void) {{");
    for k in &od_parts {
        let _ = writeln!(body, "    part{k}(full_mode);");
    }
    let _ = writeln!(body, "}}");
    let _ = writeln!(body, "\nstatic int root_level(int dom) {{\n    switch (dom) {{");
    for dom in &plan.analysis.domains {
        let root = ctx.shared(dom.clock_root);
        let lv = if ctx.scalar(dom.clock_root) {
            root
        } else {
            format!("{root}[0]")
        };
        let _ = writeln!(body, "    case {}: return (int)({lv} & 1);", dom.id);
    }
    let _ = writeln!(body, "    }}\n    return 0;\n}}");
    let _ = writeln!(body, "\nint aoc_step(void) {{");
    let _ = writeln!(body, "    int pos[{n}], neg[{n}];", n = nd.max(1));
    let _ = writeln!(body, "    output_pass();");
    let _ = writeln!(body, "    for (int round = 0; round <= {EDGE_ROUND_CAP}; round++) {{");
    let _ = writeln!(body, "        int any = 0;");
    let _ = writeln!(body, "        for (int i = 0; i < {nd}; i++) {{");
    let _ = writeln!(body, "            int now = root_level(i);");
    let _ = writeln!(
        body,
        "            pos[i] = !prev_root[i] && now;\n            neg[i] = prev_root[i] && !now;"
    );
    let _ = writeln!(
        body,
        "            prev_root[i] = now;\n            any |= pos[i] | neg[i];\n        }}"
    );
    let _ = writeln!(
        body,
        "        if (!any) return 0;\n        if (round == {EDGE_ROUND_CAP}) return 1;"
    );
    for (k, (pi, owner, _)) in parts.iter().enumerate() {
        if let PodOwner::Domain(dom) = owner {
            let _ = writeln!(
                body,
                "        if (pos[{dom}] || neg[{dom}]) part{k}(full_mode); /* pod {pi} */"
            );
        }
    }
    let _ = writeln!(
        body,
        "        commit(pos, neg, full_mode);\n        output_pass();\n    }}\n    return 0;\n}}"
    );

    // init, hook, accessors
    let _ = writeln!(body, "\nvoid aoc_init(void) {{");
    let _ = writeln!(body, "    memset(&sh, 0, sizeof sh);");
    for k in 0..parts.len() {
        let _ = writeln!(
            body,
            "    memset(&p{k}, 0, sizeof p{k});\n    memset(a{k}, 1, sizeof a{k});"
        );
    }
    for s in d.signals.iter().filter(|s| s.kind == SignalKind::Register) {
        let v = s.init_value();
        if v.is_zero() {
            continue;
        }
        let ws = c_words(&v, cw);
        let dst = ctx.shared(s.id);
        if ctx.scalar(s.id) {
            let _ = writeln!(body, "    {dst} = {};", ws[0]);
        } else {
            for (i, w) in ws.iter().enumerate() {
                let _ = writeln!(body, "    {dst}[{i}] = {w};");
            }
        }
    }
    let _ = writeln!(
        body,
        "    full_mode = getenv(\"AOC_FULL\") != NULL;\n    output_pass();"
    );
    let _ = writeln!(
        body,
        "    for (int i = 0; i < {nd}; i++) prev_root[i] = root_level(i);\n}}"
    );

    let _ = writeln!(body, "\nvoid aoc_set(int id, const W *v) {{\n    switch (id) {{");
    for s in d.inputs() {
        let dst = ctx.shared(s.id);
        let n = words(s.width, cw);
        let st = if ctx.scalar(s.id) {
            format!("if ({dst} != v[0]) {{ {dst} = v[0];{} }}", marks_of(s.id))
        } else {
            format!(
                "if (memcmp({dst}, v, {n} * sizeof(W))) {{ memcpy({dst}, v, {n} * sizeof(W));{} }}",
                marks_of(s.id)
            )
        };
        let _ = writeln!(body, "    case {}: {st} break;", s.id.0);
    }
    let _ = writeln!(body, "    }}\n}}");
    let _ = writeln!(body, "\nconst W *aoc_get(int id) {{\n    switch (id) {{");
    for s in d
        .signals
        .iter()
        .filter(|s| !is_comb(d, s.id) || published.contains(&s.id))
    {
        let dst = ctx.shared(s.id);
        let p = if ctx.scalar(s.id) { format!("&{dst}") } else { dst };
        let _ = writeln!(body, "    case {}: return {p};", s.id.0);
    }
    let _ = writeln!(body, "    }}\n    return NULL;\n}}");

    let obs = d.observable();
    let _ = writeln!(body, "\n#ifdef AOC_MAIN");
    let _ = writeln!(
        body,
        "static const int obs_id[] = {{ {} }};",
        obs.iter().map(|s| s.0.to_string()).collect::<Vec<_>>().join(", ")
    );
    let _ = writeln!(
        body,
        "static const int obs_nw[] = {{ {} }};",
        obs.iter()
            .map(|s| words(d.signal(*s).width, cw).to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    let _ = writeln!(body, "static void dump(void) {{");
    let _ = writeln!(body, "    for (int k = 0; k < {}; k++) {{", obs.len());
    let _ = writeln!(body, "        const W *v = aoc_get(obs_id[k]);");
    let _ = writeln!(body, "        for (int i = 0; i < obs_nw[k]; i++) printf(\"%s%llx\", i ? \",\" : (k ? \" \" : \"\"), (unsigned long long)v[i]);");
    let _ = writeln!(body, "    }}\n    printf(\"\\n\");\n}}");
    let _ = writeln!(
        body,
        "/* stdin: `i <id> <n> <hex words>` sets an input, `s` runs a cycle */"
    );
    let _ = writeln!(
        body,
        "int main(void) {{\n    char cmd[8];\n    W buf[AOC_MAXW];\n    aoc_init();\n    dump();"
    );
    let _ = writeln!(body, "    while (scanf(\"%7s\", cmd) == 1) {{");
    let _ = writeln!(body, "        if (cmd[0] == 'i') {{\n            int id, n;\n            if (scanf(\"%d %d\", &id, &n) != 2) return 1;");
    let _ = writeln!(body, "            for (int i = 0; i < n; i++) {{ unsigned long long x; if (scanf(\"%llx\", &x) != 1) return 1; buf[i] = (W)x; }}");
    let _ = writeln!(
        body,
        "            aoc_set(id, buf);\n        }} else if (cmd[0] == 's') {{"
    );
    let _ = writeln!(body, "            if (aoc_step()) {{ printf(\"oscillation\\n\"); return 3; }}\n            dump();\n        }}\n    }}\n    return 0;\n}}\n#endif");

    let mut consts = String::new();
    for (name, ws) in &ctx.consts {
        let _ = writeln!(consts, "static const W {name}[] = {{ {} }};", ws.join(", "));
    }
    src.push('\n');
    src.push_str(&consts);
    src.push_str(&marks);
    src.push_str(&body);
    EmittedModel { header, source: src }
}

/// Find a C compiler: `$CC`, then `cc`, `gcc` and `clang` in common places.
pub fn find_cc() -> Option<PathBuf> {
    if let Ok(cc) = std::env::var("CC") {
        let p = PathBuf::from(cc);
        if p.exists() {
            return Some(p);
        }
    }
    for name in ["cc", "gcc", "clang"] {
        for dir in ["/usr/bin", "/usr/local/bin", "/bin"] {
            let p = Path::new(dir).join(name);
            if p.exists() {
                return Some(p);
            }
        }
    }
    None
}

fn bits_to_cwords(v: &Bits, cw: u32) -> Vec<u64> {
    let n = words(v.width(), cw);
    (0..n)
        .map(|k| {
            if cw == 64 {
                v.words()[k]
            } else {
                (v.words()[k / 2] >> (32 * (k % 2))) & 0xffff_ffff
            }
        })
        .collect()
}

fn cwords_to_bits(ws: &[u64], width: u32, cw: u32) -> Bits {
    let mut out = Bits::zero(width);
    for (k, &w) in ws.iter().enumerate() {
        if cw == 64 {
            if k < out.words().len() {
                out.words_mut()[k] = w;
            }
        } else if k / 2 < out.words().len() {
            out.words_mut()[k / 2] |= (w & 0xffff_ffff) << (32 * (k % 2));
        }
    }
    out.normalize();
    out
}

/// Compile `source` (a single-file model) with `AOC_MAIN`, drive it with
/// `stim` for `cycles` cycles and return its trace.
pub fn run_emitted(
    source: &str,
    design: &FlatDesign,
    cw: u32,
    stim: &mut ResolvedStimulus,
    cycles: u64,
    cc: &Path,
) -> Result<Trace, VerifyError> {
    let dir = tempdir()?;
    let c_path = dir.join("model.c");
    let exe = dir.join("model");
    std::fs::write(&c_path, source)?;
    let out = Command::new(cc)
        .args(["-O1", "-std=c99", "-w", "-DAOC_MAIN", "-o"])
        .arg(&exe)
        .arg(&c_path)
        .output()?;
    if !out.status.success() {
        let _ = std::fs::remove_dir_all(&dir);
        return Err(VerifyError::Compile(String::from_utf8_lossy(&out.stderr).into_owned()));
    }
    let mut script = String::new();
    for c in 0..cycles {
        for (s, v) in stim.take(c) {
            let v = v.resize(design.signal(s).width);
            let ws = bits_to_cwords(&v, cw);
            let _ = write!(script, "i {} {}", s.0, ws.len());
            for w in ws {
                let _ = write!(script, " {w:x}");
            }
            script.push('\n');
        }
        script.push_str("s\n");
    }
    let mut child = Command::new(&exe)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()?;
    child.stdin.take().expect("stdin").write_all(script.as_bytes())?;
    let result = child.wait_with_output()?;
    let _ = std::fs::remove_dir_all(&dir);
    let text = String::from_utf8_lossy(&result.stdout);
    if !result.status.success() {
        return Err(VerifyError::Run(format!(
            "exit status {}: {}",
            result.status,
            text.lines().last().unwrap_or("")
        )));
    }
    let mut trace = Trace::new(design);
    let mut last: Option<Vec<Bits>> = None;
    for (line_no, line) in text.lines().enumerate() {
        let vals: Vec<Bits> = line
            .split(' ')
            .zip(&trace.widths)
            .map(|(f, &w)| {
                let ws: Vec<u64> = f.split(',').map(|x| u64::from_str_radix(x, 16).unwrap_or(0)).collect();
                cwords_to_bits(&ws, w, cw)
            })
            .collect();
        match &last {
            None => trace.initial = vals.clone(),
            Some(prev) => {
                let cycle = line_no as u64 - 1;
                for (i, v) in vals.iter().enumerate() {
                    if *v != prev[i] {
                        trace.changes.push(Change {
                            cycle,
                            index: i,
                            value: v.clone(),
                        });
                    }
                }
                trace.cycles = cycle + 1;
            }
        }
        last = Some(vals);
    }
    Ok(trace)
}

fn tempdir() -> std::io::Result<PathBuf> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static N: AtomicU64 = AtomicU64::new(0);
    let p = std::env::temp_dir().join(format!(
        "aoc-emit-{}-{}",
        std::process::id(),
        N.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::create_dir_all(&p)?;
    Ok(p)
}

/// Compare the compiled model with an interpreter trace; `Ok(None)` means
/// every cycle matched.
pub fn verify_emitted(
    plan: &Plan,
    reference: &Trace,
    stim: &mut ResolvedStimulus,
) -> Result<Option<Mismatch>, VerifyError> {
    let cc = find_cc().ok_or(VerifyError::ToolchainMissing)?;
    let model = emit_model(plan);
    stim.rewind();
    let got = run_emitted(
        &model.single_file(),
        &plan.design,
        plan.config.cw,
        stim,
        reference.cycles,
        &cc,
    )?;
    Ok(reference.first_mismatch(&got))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Oracle;
    use crate::partition::ExecConfig;
    use crate::plan::build_plan;
    use crate::sim::run;
    use crate::testgen::{random_design, random_stimulus, GenConfig};

    #[test]
    fn and_lowers_to_plain_expression() {
        let op = |n: &str| Operand {
            lvalue: n.into(),
            width: 8,
            scalar: true,
        };
        let s = lower(&Op::And, 8, &[op("a"), op("b")], 64, &mut Vec::new());
        assert_eq!(s, "t[0] = a & b;");
    }

    #[test]
    fn random_designs_compile_and_match() {
        let Some(cc) = find_cc() else { return };
        for seed in 0..12u64 {
            let cfg = GenConfig {
                domains: 1 + (seed % 3) as usize,
                max_registers: 12,
                max_elements: 96,
                ..GenConfig::default()
            };
            let d = random_design(seed, &cfg);
            let cw = if seed % 2 == 0 { 64 } else { 32 };
            let plan = build_plan(d.clone(), ExecConfig { tdmax: 2, phmax: 4, cw }).unwrap();
            let mut st = random_stimulus(&d, seed, 100);
            let want = run(&mut Oracle::new(d.clone()), &mut st, 100).unwrap();
            st.rewind();
            let got = run_emitted(&emit_model(&plan).single_file(), &d, cw, &mut st, 100, &cc).unwrap();
            if let Some(m) = want.first_mismatch(&got) {
                panic!("seed {seed} cw {cw}: {m}");
            }
        }
    }
}
