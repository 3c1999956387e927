/* AOC model of `top`, generated by aoc 0.1.0.
 *
 * Word width 32 bits. Signals wider than a word are arrays, least
 * significant word first. Memories are stored serialized.
 *
 * API: aoc_init(), aoc_set(id, words), aoc_step() (0 ok, 1 oscillation),
 * aoc_get(id). Signal ids:
 *       0  input       1  top_clk
 *       1  input      70  top_a
 *       2  input      70  top_b
 *       3  register   70  top_sum
 *       4  register   70  top_acc
 *       5  output      1  top_carry
 *
 * Signal-class conversion functions are not generated; designs with
 * multi-valued signals would need AND(), OR(), NOT(), RESOLVE() here.
 */
#ifndef AOC_MODEL_H
#define AOC_MODEL_H
#include <stdint.h>
typedef uint32_t W;
typedef uint64_t DW;
#define CW 32
void aoc_init(void);
void aoc_set(int id, const W *v);
int aoc_step(void);
const W *aoc_get(int id);
#endif

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#define AOC_MAXW 4
#define NW(w) (((w) + CW - 1) / CW)

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

/* shared state: inputs, registers, outputs, derived clocks */
static struct {
    W s0_top_clk;
    W s1_top_a[3];
    W s2_top_b[3];
    W s3_top_sum[3];
    W s4_top_acc[3];
    W s5_top_carry;
    W pad;
} sh;

/* pod 0 partition 0: po top_sum */
/* placeholder slots:
 *   0: top__e1 top__e4
 *   1: top_full top__e3
 *   2: top__e2
 */
static struct {
    W s6_top_full[3];
    W s7_top__e1;
    W s8_top__e2[3];
    W s9_top__e3;
    W s10_top__e4[3];
    W pad;
} p0;
static unsigned char a0[6];

/* pod 0 partition 1: po top_acc */
/* placeholder slots:
 *   0: top__e5
 */
static struct {
    W s11_top__e5[3];
    W pad;
} p1;
static unsigned char a1[2];

/* pod 1 partition 0: po top_carry */
/* placeholder slots:
 *   0: top_carry top__e1 top__e4
 *   1: top_full top__e3
 *   2: top__e2
 */
static struct {
    W s5_top_carry;
    W s6_top_full[3];
    W s7_top__e1;
    W s8_top__e2[3];
    W s9_top__e3;
    W s10_top__e4[3];
    W pad;
} p2;
static unsigned char a2[6];

static void mark_s1_top_a(void) { a0[2] = 1; a1[0] = 1; a2[2] = 1; }
static void mark_s2_top_b(void) { a0[3] = 1; a1[0] = 1; a2[3] = 1; }
static void mark_s4_top_acc(void) { a1[1] = 1; }

static void part0(int full) {
    if (full || a0[0]) {
        a0[0] = 0;
        { W t[1]; t[0] = 0x0u & 0x1u; if (t[0] != p0.s7_top__e1) { p0.s7_top__e1 = t[0]; a0[2] = 1; } }
    }
    if (full || a0[1]) {
        a0[1] = 0;
        { W t[1]; t[0] = 0x0u & 0x1u; if (t[0] != p0.s9_top__e3) { p0.s9_top__e3 = t[0]; a0[3] = 1; } }
    }
    if (full || a0[2]) {
        a0[2] = 0;
        { W t[3]; aoc_bool(t, 71, 0); aoc_set_bits(t, 71, 0u, sh.s1_top_a, 70); aoc_set_bits(t, 71, 70u, &p0.s7_top__e1, 1); if (memcmp(t, p0.s8_top__e2, sizeof t)) { memcpy(p0.s8_top__e2, t, sizeof t); a0[4] = 1; } }
    }
    if (full || a0[3]) {
        a0[3] = 0;
        { W t[3]; aoc_bool(t, 71, 0); aoc_set_bits(t, 71, 0u, sh.s2_top_b, 70); aoc_set_bits(t, 71, 70u, &p0.s9_top__e3, 1); if (memcmp(t, p0.s10_top__e4, sizeof t)) { memcpy(p0.s10_top__e4, t, sizeof t); a0[4] = 1; } }
    }
    if (full || a0[4]) {
        a0[4] = 0;
        { W t[3]; aoc_add(t, 71, p0.s8_top__e2, 71, p0.s10_top__e4, 71); if (memcmp(t, p0.s6_top_full, sizeof t)) { memcpy(p0.s6_top_full, t, sizeof t); a0[5] = 1; } }
    }
}

static void part1(int full) {
    if (full || a1[0]) {
        a1[0] = 0;
        { W t[3]; aoc_bit(t, 70, sh.s1_top_a, 70, sh.s2_top_b, 70, 2); if (memcmp(t, p1.s11_top__e5, sizeof t)) { memcpy(p1.s11_top__e5, t, sizeof t); a1[1] = 1; } }
    }
}

static void part2(int full) {
    if (full || a2[0]) {
        a2[0] = 0;
        { W t[1]; t[0] = 0x0u & 0x1u; if (t[0] != p2.s7_top__e1) { p2.s7_top__e1 = t[0]; a2[2] = 1; } }
    }
    if (full || a2[1]) {
        a2[1] = 0;
        { W t[1]; t[0] = 0x0u & 0x1u; if (t[0] != p2.s9_top__e3) { p2.s9_top__e3 = t[0]; a2[3] = 1; } }
    }
    if (full || a2[2]) {
        a2[2] = 0;
        { W t[3]; aoc_bool(t, 71, 0); aoc_set_bits(t, 71, 0u, sh.s1_top_a, 70); aoc_set_bits(t, 71, 70u, &p2.s7_top__e1, 1); if (memcmp(t, p2.s8_top__e2, sizeof t)) { memcpy(p2.s8_top__e2, t, sizeof t); a2[4] = 1; } }
    }
    if (full || a2[3]) {
        a2[3] = 0;
        { W t[3]; aoc_bool(t, 71, 0); aoc_set_bits(t, 71, 0u, sh.s2_top_b, 70); aoc_set_bits(t, 71, 70u, &p2.s9_top__e3, 1); if (memcmp(t, p2.s10_top__e4, sizeof t)) { memcpy(p2.s10_top__e4, t, sizeof t); a2[4] = 1; } }
    }
    if (full || a2[4]) {
        a2[4] = 0;
        { W t[3]; aoc_add(t, 71, p2.s8_top__e2, 71, p2.s10_top__e4, 71); if (memcmp(t, p2.s6_top_full, sizeof t)) { memcpy(p2.s6_top_full, t, sizeof t); a2[5] = 1; } }
    }
    if (full || a2[5]) {
        a2[5] = 0;
        { W t[1]; aoc_get_bits(t, 1, p2.s6_top_full, 71, 70u); if (t[0] != p2.s5_top_carry) { p2.s5_top_carry = t[0]; } }
    }
    sh.s5_top_carry = p2.s5_top_carry;
}

static void commit(const int *pos, const int *neg, int full) {
    if (pos[0] && (full || a0[5])) { a0[5] = 0; W t[3]; aoc_get_bits(t, 70, p0.s6_top_full, 71, 0u); if (memcmp(t, sh.s3_top_sum, sizeof t)) { memcpy(sh.s3_top_sum, t, sizeof t); } }
    if (pos[0] && (full || a1[1])) { a1[1] = 0; W t[3]; aoc_add(t, 70, sh.s4_top_acc, 70, p1.s11_top__e5, 70); if (memcmp(t, sh.s4_top_acc, sizeof t)) { memcpy(sh.s4_top_acc, t, sizeof t); mark_s4_top_acc(); } }
}

static int full_mode;
static int prev_root[1];

static void output_pass(void) {
    part2(full_mode);
}

static int root_level(int dom) {
    switch (dom) {
    case 0: return (int)(sh.s0_top_clk & 1);
    }
    return 0;
}

int aoc_step(void) {
    int pos[1], neg[1];
    output_pass();
    for (int round = 0; round <= 16; round++) {
        int any = 0;
        for (int i = 0; i < 1; i++) {
            int now = root_level(i);
            pos[i] = !prev_root[i] && now;
            neg[i] = prev_root[i] && !now;
            prev_root[i] = now;
            any |= pos[i] | neg[i];
        }
        if (!any) return 0;
        if (round == 16) return 1;
        if (pos[0] || neg[0]) part0(full_mode); /* pod 0 */
        if (pos[0] || neg[0]) part1(full_mode); /* pod 0 */
        commit(pos, neg, full_mode);
        output_pass();
    }
    return 0;
}

void aoc_init(void) {
    memset(&sh, 0, sizeof sh);
    memset(&p0, 0, sizeof p0);
    memset(a0, 1, sizeof a0);
    memset(&p1, 0, sizeof p1);
    memset(a1, 1, sizeof a1);
    memset(&p2, 0, sizeof p2);
    memset(a2, 1, sizeof a2);
    full_mode = getenv("AOC_FULL") != NULL;
    output_pass();
    for (int i = 0; i < 1; i++) prev_root[i] = root_level(i);
}

void aoc_set(int id, const W *v) {
    switch (id) {
    case 0: if (sh.s0_top_clk != v[0]) { sh.s0_top_clk = v[0]; } break;
    case 1: if (memcmp(sh.s1_top_a, v, 3 * sizeof(W))) { memcpy(sh.s1_top_a, v, 3 * sizeof(W)); mark_s1_top_a(); } break;
    case 2: if (memcmp(sh.s2_top_b, v, 3 * sizeof(W))) { memcpy(sh.s2_top_b, v, 3 * sizeof(W)); mark_s2_top_b(); } break;
    }
}

const W *aoc_get(int id) {
    switch (id) {
    case 0: return &sh.s0_top_clk;
    case 1: return sh.s1_top_a;
    case 2: return sh.s2_top_b;
    case 3: return sh.s3_top_sum;
    case 4: return sh.s4_top_acc;
    case 5: return &sh.s5_top_carry;
    }
    return NULL;
}

#ifdef AOC_MAIN
static const int obs_id[] = { 0, 1, 2, 3, 4, 5 };
static const int obs_nw[] = { 1, 3, 3, 3, 3, 1 };
static void dump(void) {
    for (int k = 0; k < 6; k++) {
        const W *v = aoc_get(obs_id[k]);
        for (int i = 0; i < obs_nw[k]; i++) printf("%s%llx", i ? "," : (k ? " " : ""), (unsigned long long)v[i]);
    }
    printf("\n");
}
/* stdin: `i <id> <n> <hex words>` sets an input, `s` runs a cycle */
int main(void) {
    char cmd[8];
    W buf[AOC_MAXW];
    aoc_init();
    dump();
    while (scanf("%7s", cmd) == 1) {
        if (cmd[0] == 'i') {
            int id, n;
            if (scanf("%d %d", &id, &n) != 2) return 1;
            for (int i = 0; i < n; i++) { unsigned long long x; if (scanf("%llx", &x) != 1) return 1; buf[i] = (W)x; }
            aoc_set(id, buf);
        } else if (cmd[0] == 's') {
            if (aoc_step()) { printf("oscillation\n"); return 3; }
            dump();
        }
    }
    return 0;
}
#endif
