//! Two-valued evaluation of combinational operators over word slices.
//!
//! All values are unsigned. Arithmetic wraps modulo `2^width`; division and
//! modulo by zero yield zero; out-of-range indices read as zero and leave
//! vectors unchanged on assignment.

use crate::bits::{mask64, mask_words, words_for, Bits};
use crate::ir::Op;

/// Evaluate `op` into `out` (which must hold `words_for(out_width)` words).
///
/// `ins[k]` holds operand `k` normalized to `in_widths[k]` bits.
pub fn eval(op: &Op, out_width: u32, ins: &[&[u64]], in_widths: &[u32], out: &mut [u64]) {
    debug_assert_eq!(out.len(), words_for(out_width));
    if out_width <= 64 && in_widths.iter().all(|&w| w <= 64) {
        let mut small = [0u64; 8];
        let v = if ins.len() <= small.len() {
            for (d, s) in small.iter_mut().zip(ins) {
                *d = s[0];
            }
            eval_narrow(op, out_width, &small[..ins.len()], in_widths)
        } else {
            let vals: Vec<u64> = ins.iter().map(|s| s[0]).collect();
            eval_narrow(op, out_width, &vals, in_widths)
        };
        out[0] = v;
        return;
    }
    eval_wide(op, out_width, ins, in_widths, out);
}

/// Convenience wrapper over [`Bits`] values.
pub fn eval_bits(op: &Op, out_width: u32, ins: &[&Bits]) -> Bits {
    let slices: Vec<&[u64]> = ins.iter().map(|b| b.words()).collect();
    let widths: Vec<u32> = ins.iter().map(|b| b.width()).collect();
    let mut out = Bits::zero(out_width);
    eval(op, out_width, &slices, &widths, out.words_mut());
    out
}

/// Fast path: output and every operand fit in one word.
pub fn eval_narrow(op: &Op, w: u32, v: &[u64], in_widths: &[u32]) -> u64 {
    let mask = mask64(w);
    let r = match op {
        Op::Buffer => v[0],
        Op::Const(b) => b.to_u64(),
        Op::Not => !v[0],
        Op::And => v[0] & v[1],
        Op::Or => v[0] | v[1],
        Op::Xor => v[0] ^ v[1],
        Op::Xnor => !(v[0] ^ v[1]),
        Op::Add => v[0].wrapping_add(v[1]),
        Op::Sub => v[0].wrapping_sub(v[1]),
        Op::Mul => v[0].wrapping_mul(v[1]),
        Op::Div => (v[0] & mask).checked_div(v[1] & mask).unwrap_or(0),
        Op::Mod => {
            let (a, b) = (v[0] & mask, v[1] & mask);
            if b == 0 {
                0
            } else {
                a % b
            }
        }
        Op::Shl => {
            if v[1] >= w as u64 {
                0
            } else {
                (v[0] & mask) << v[1]
            }
        }
        Op::Shr => {
            if v[1] >= w as u64 {
                0
            } else {
                (v[0] & mask) >> v[1]
            }
        }
        Op::Eq => (v[0] == v[1]) as u64,
        Op::Ne => (v[0] != v[1]) as u64,
        Op::Lt => (v[0] < v[1]) as u64,
        Op::Le => (v[0] <= v[1]) as u64,
        Op::Gt => (v[0] > v[1]) as u64,
        Op::Ge => (v[0] >= v[1]) as u64,
        Op::LogicNot => (v[0] == 0) as u64,
        Op::LogicAnd => (v[0] != 0 && v[1] != 0) as u64,
        Op::LogicOr => (v[0] != 0 || v[1] != 0) as u64,
        Op::RedAnd => (v[0] == mask64(in_widths[0])) as u64,
        Op::RedOr => (v[0] != 0) as u64,
        Op::RedXor => (v[0].count_ones() & 1) as u64,
        Op::RedNand => (v[0] != mask64(in_widths[0])) as u64,
        Op::RedNor => (v[0] == 0) as u64,
        Op::RedXnor => (!v[0].count_ones() & 1) as u64,
        Op::Mux => {
            if v[0] != 0 {
                v[1]
            } else {
                v[2]
            }
        }
        Op::Case { arms } => {
            let sel = v[0];
            let hit = arms
                .iter()
                .position(|labels| labels.iter().any(|l| l.as_u64() == Some(sel)));
            match hit {
                Some(k) => v[1 + k],
                None => v[1 + arms.len()],
            }
        }
        Op::Concat => {
            let mut acc = 0u64;
            for (val, &iw) in v.iter().zip(in_widths) {
                acc = if iw >= 64 { *val } else { (acc << iw) | *val };
            }
            acc
        }
        Op::Slice { lsb } => {
            if *lsb >= 64 {
                0
            } else {
                v[0] >> lsb
            }
        }
        Op::Index { elem_width } => {
            let ew = *elem_width as u64;
            match v[1].checked_mul(ew) {
                Some(lo) if lo + ew <= in_widths[0] as u64 => (v[0] >> lo) & mask64(*elem_width),
                _ => 0,
            }
        }
        Op::IndexAssign { elem_width } => {
            let ew = *elem_width as u64;
            let base = v[0] & mask;
            match v[1].checked_mul(ew) {
                Some(lo) if lo + ew <= w as u64 => {
                    let field = mask64(*elem_width) << lo;
                    (base & !field) | ((v[2] & mask64(*elem_width)) << lo)
                }
                _ => base,
            }
        }
    };
    r & mask
}

fn ext(src: &[u64], n: usize) -> Vec<u64> {
    let mut v = vec![0u64; n];
    let k = n.min(src.len());
    v[..k].copy_from_slice(&src[..k]);
    v
}

fn ext_masked(src: &[u64], width: u32) -> Vec<u64> {
    let mut v = ext(src, words_for(width));
    mask_words(&mut v, width);
    v
}

fn is_zero(v: &[u64]) -> bool {
    v.iter().all(|&w| w == 0)
}

fn cmp_words(a: &[u64], b: &[u64]) -> std::cmp::Ordering {
    let n = a.len().max(b.len());
    for i in (0..n).rev() {
        let x = a.get(i).copied().unwrap_or(0);
        let y = b.get(i).copied().unwrap_or(0);
        if x != y {
            return x.cmp(&y);
        }
    }
    std::cmp::Ordering::Equal
}

/// Value of a word slice as `u64`, or `None` when it does not fit.
fn small_value(v: &[u64]) -> Option<u64> {
    if v.iter().skip(1).all(|&w| w == 0) {
        Some(v.first().copied().unwrap_or(0))
    } else {
        None
    }
}

/// Extract `width` bits starting at `lsb`; bits past the end of `src` read as zero.
pub fn get_bits(src: &[u64], lsb: u64, width: u32) -> Vec<u64> {
    let n = words_for(width);
    let mut out = vec![0u64; n];
    let word = (lsb / 64) as usize;
    let shift = (lsb % 64) as u32;
    for (k, o) in out.iter_mut().enumerate() {
        let lo = src.get(word + k).copied().unwrap_or(0);
        let hi = src.get(word + k + 1).copied().unwrap_or(0);
        *o = if shift == 0 {
            lo
        } else {
            (lo >> shift) | (hi << (64 - shift))
        };
    }
    mask_words(&mut out, width);
    out
}

/// Overwrite `width` bits of `dst` starting at `lsb` with the low bits of `src`.
pub fn set_bits(dst: &mut [u64], lsb: u64, src: &[u64], width: u32) {
    let mut remaining = width as u64;
    let mut pos = lsb;
    let mut src_pos = 0u64;
    while remaining > 0 {
        let dw = (pos / 64) as usize;
        let db = (pos % 64) as u32;
        let chunk = remaining.min(64 - db as u64) as u32;
        let piece = get_bits(src, src_pos, chunk)[0];
        if dw < dst.len() {
            let m = mask64(chunk) << db;
            dst[dw] = (dst[dw] & !m) | ((piece << db) & m);
        }
        pos += chunk as u64;
        src_pos += chunk as u64;
        remaining -= chunk as u64;
    }
}

fn add_words(a: &[u64], b: &[u64], out: &mut [u64]) {
    let mut carry = 0u64;
    for i in 0..out.len() {
        let (s1, c1) = a[i].overflowing_add(b[i]);
        let (s2, c2) = s1.overflowing_add(carry);
        out[i] = s2;
        carry = (c1 | c2) as u64;
    }
}

fn sub_words(a: &[u64], b: &[u64], out: &mut [u64]) {
    let mut borrow = 0u64;
    for i in 0..out.len() {
        let (d1, b1) = a[i].overflowing_sub(b[i]);
        let (d2, b2) = d1.overflowing_sub(borrow);
        out[i] = d2;
        borrow = (b1 | b2) as u64;
    }
}

fn mul_words(a: &[u64], b: &[u64], out: &mut [u64]) {
    let n = out.len();
    let mut acc = vec![0u64; n];
    for i in 0..n {
        let mut carry: u128 = 0;
        for j in 0..n - i {
            let cur = acc[i + j] as u128 + (a[i] as u128) * (b[j] as u128) + carry;
            acc[i + j] = cur as u64;
            carry = cur >> 64;
        }
    }
    out.copy_from_slice(&acc);
}

fn shl_words(a: &[u64], amount: u64, out: &mut [u64]) {
    let n = out.len();
    let ws = (amount / 64) as usize;
    let bs = (amount % 64) as u32;
    for i in (0..n).rev() {
        let lo = if i >= ws { a[i - ws] } else { 0 };
        let lower = if i > ws { a[i - ws - 1] } else { 0 };
        out[i] = if bs == 0 { lo } else { (lo << bs) | (lower >> (64 - bs)) };
    }
}

fn shr_words(a: &[u64], amount: u64, out: &mut [u64]) {
    let ws = (amount / 64) as usize;
    let bs = (amount % 64) as u32;
    for (i, o) in out.iter_mut().enumerate() {
        let hi = a.get(i + ws).copied().unwrap_or(0);
        let higher = a.get(i + ws + 1).copied().unwrap_or(0);
        *o = if bs == 0 {
            hi
        } else {
            (hi >> bs) | (higher << (64 - bs))
        };
    }
}

/// Restoring long division; returns (quotient, remainder).
fn divmod_words(a: &[u64], b: &[u64], width: u32) -> (Vec<u64>, Vec<u64>) {
    let n = a.len();
    let mut q = vec![0u64; n];
    let mut r = vec![0u64; n];
    if is_zero(b) {
        return (q, vec![0u64; n]);
    }
    for i in (0..width as u64).rev() {
        let carry = r[n - 1] >> 63;
        let mut shifted = vec![0u64; n];
        shl_words(&r, 1, &mut shifted);
        r = shifted;
        if (a[(i / 64) as usize] >> (i % 64)) & 1 == 1 {
            r[0] |= 1;
        }
        if carry == 1 || cmp_words(&r, b) != std::cmp::Ordering::Less {
            let mut d = vec![0u64; n];
            sub_words(&r, b, &mut d);
            r = d;
            q[(i / 64) as usize] |= 1 << (i % 64);
        }
    }
    (q, r)
}

fn reduce_and(v: &[u64], width: u32) -> bool {
    let n = words_for(width);
    (0..n).all(|i| {
        let m = if i + 1 == n {
            crate::bits::top_mask(width)
        } else {
            u64::MAX
        };
        v.get(i).copied().unwrap_or(0) & m == m
    })
}

fn parity(v: &[u64]) -> bool {
    v.iter().map(|w| w.count_ones()).sum::<u32>() & 1 == 1
}

fn set_bool(out: &mut [u64], b: bool) {
    out.iter_mut().for_each(|w| *w = 0);
    out[0] = b as u64;
}

/// General path for operands or results wider than one word.
pub fn eval_wide(op: &Op, w: u32, ins: &[&[u64]], in_widths: &[u32], out: &mut [u64]) {
    let n = out.len();
    let operand = |k: usize| ext_masked(ins[k], w);
    match op {
        Op::Buffer => out.copy_from_slice(&ext(ins[0], n)),
        Op::Const(b) => out.copy_from_slice(&ext(b.words(), n)),
        Op::Not => {
            let a = ext(ins[0], n);
            for i in 0..n {
                out[i] = !a[i];
            }
        }
        Op::And | Op::Or | Op::Xor | Op::Xnor => {
            let (a, b) = (ext(ins[0], n), ext(ins[1], n));
            for i in 0..n {
                out[i] = match op {
                    Op::And => a[i] & b[i],
                    Op::Or => a[i] | b[i],
                    Op::Xor => a[i] ^ b[i],
                    _ => !(a[i] ^ b[i]),
                };
            }
        }
        Op::Add => add_words(&ext(ins[0], n), &ext(ins[1], n), out),
        Op::Sub => sub_words(&ext(ins[0], n), &ext(ins[1], n), out),
        Op::Mul => mul_words(&ext(ins[0], n), &ext(ins[1], n), out),
        Op::Div | Op::Mod => {
            let (q, r) = divmod_words(&operand(0), &operand(1), w);
            out.copy_from_slice(if matches!(op, Op::Div) { &q } else { &r });
        }
        Op::Shl | Op::Shr => {
            let a = operand(0);
            match small_value(ins[1]) {
                Some(amt) if amt < w as u64 => {
                    if matches!(op, Op::Shl) {
                        shl_words(&a, amt, out)
                    } else {
                        shr_words(&a, amt, out)
                    }
                }
                _ => out.iter_mut().for_each(|x| *x = 0),
            }
        }
        Op::Eq | Op::Ne | Op::Lt | Op::Le | Op::Gt | Op::Ge => {
            use std::cmp::Ordering::*;
            let c = cmp_words(ins[0], ins[1]);
            let b = match op {
                Op::Eq => c == Equal,
                Op::Ne => c != Equal,
                Op::Lt => c == Less,
                Op::Le => c != Greater,
                Op::Gt => c == Greater,
                _ => c != Less,
            };
            set_bool(out, b);
        }
        Op::LogicNot => set_bool(out, is_zero(ins[0])),
        Op::LogicAnd => set_bool(out, !is_zero(ins[0]) && !is_zero(ins[1])),
        Op::LogicOr => set_bool(out, !is_zero(ins[0]) || !is_zero(ins[1])),
        Op::RedAnd => set_bool(out, reduce_and(ins[0], in_widths[0])),
        Op::RedNand => set_bool(out, !reduce_and(ins[0], in_widths[0])),
        Op::RedOr => set_bool(out, !is_zero(ins[0])),
        Op::RedNor => set_bool(out, is_zero(ins[0])),
        Op::RedXor => set_bool(out, parity(ins[0])),
        Op::RedXnor => set_bool(out, !parity(ins[0])),
        Op::Mux => {
            let k = if is_zero(ins[0]) { 2 } else { 1 };
            out.copy_from_slice(&ext(ins[k], n));
        }
        Op::Case { arms } => {
            let sel = ins[0];
            let hit = arms.iter().position(|labels| {
                labels
                    .iter()
                    .any(|l| cmp_words(l.words(), sel) == std::cmp::Ordering::Equal)
            });
            let k = hit.map(|k| 1 + k).unwrap_or(1 + arms.len());
            out.copy_from_slice(&ext(ins[k], n));
        }
        Op::Concat => {
            out.iter_mut().for_each(|x| *x = 0);
            let mut pos = 0u64;
            for (val, &iw) in ins.iter().zip(in_widths).rev() {
                if pos >= w as u64 {
                    break;
                }
                set_bits(out, pos, val, iw);
                pos += iw as u64;
            }
        }
        Op::Slice { lsb } => out.copy_from_slice(&get_bits(ins[0], *lsb as u64, w)),
        Op::Index { elem_width } => {
            out.iter_mut().for_each(|x| *x = 0);
            let ew = *elem_width as u64;
            if let Some(idx) = small_value(ins[1]) {
                if let Some(lo) = idx.checked_mul(ew) {
                    if lo + ew <= in_widths[0] as u64 {
                        let field = get_bits(ins[0], lo, *elem_width);
                        let k = n.min(field.len());
                        out[..k].copy_from_slice(&field[..k]);
                    }
                }
            }
        }
        Op::IndexAssign { elem_width } => {
            out.copy_from_slice(&ext_masked(ins[0], w));
            let ew = *elem_width as u64;
            if let Some(idx) = small_value(ins[1]) {
                if let Some(lo) = idx.checked_mul(ew) {
                    if lo + ew <= w as u64 {
                        let val = ext_masked(ins[2], *elem_width);
                        set_bits(out, lo, &val, *elem_width);
                    }
                }
            }
        }
    }
    mask_words(out, w);
}
