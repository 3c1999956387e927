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
