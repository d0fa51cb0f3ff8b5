/**
 * Tiny synthetic datasets, fully deterministic under a seed.
 *
 * - digits4x4: three classes of noisy 4x4 "digit" templates, values in [0, 1].
 * - sequences: length-L sequences of 2-feature frames in [0, 1]; the label is
 *   whether the running mean of the first feature exceeds that of the second.
 */

export interface Dataset {
  name: string;
  inputs: number[][]; // each row already flattened to the input arity
  labels: number[];
  labelNames: string[];
}

/** Small deterministic PRNG (mulberry32); tfjs has no global training seed,
 * so every random draw in this package goes through one of these. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const TEMPLATES: number[][] = [
  // "0": a ring
  [0.9, 0.9, 0.9, 0.9, 0.9, 0.1, 0.1, 0.9, 0.9, 0.1, 0.1, 0.9, 0.9, 0.9, 0.9, 0.9],
  // "1": a vertical bar
  [0.1, 0.9, 0.1, 0.1, 0.1, 0.9, 0.1, 0.1, 0.1, 0.9, 0.1, 0.1, 0.1, 0.9, 0.1, 0.1],
  // "7": a top bar with a diagonal
  [0.9, 0.9, 0.9, 0.9, 0.1, 0.1, 0.9, 0.1, 0.1, 0.9, 0.1, 0.1, 0.9, 0.1, 0.1, 0.1],
];

export function digits4x4(count: number, seed: number): Dataset {
  const rand = rng(seed);
  const inputs: number[][] = [];
  const labels: number[] = [];
  for (let i = 0; i < count; i++) {
    const cls = i % TEMPLATES.length;
    const row = TEMPLATES[cls].map((v) => {
      const noisy = v + (rand() - 0.5) * 0.3;
      return Math.min(1, Math.max(0, noisy));
    });
    inputs.push(row);
    labels.push(cls);
  }
  return { name: "digits4x4", inputs, labels, labelNames: ["zero", "one", "seven"] };
}

export const FRAME_SIZE = 2;

export function sequences(count: number, frames: number, seed: number): Dataset {
  const rand = rng(seed);
  const inputs: number[][] = [];
  const labels: number[] = [];
  for (let i = 0; i < count; i++) {
    const row: number[] = [];
    let sumA = 0;
    let sumB = 0;
    for (let t = 0; t < frames; t++) {
      const a = rand();
      const b = rand();
      row.push(a, b);
      sumA += a;
      sumB += b;
    }
    inputs.push(row);
    labels.push(sumA > sumB ? 1 : 0);
  }
  return { name: `sequences_${frames}x${FRAME_SIZE}`, inputs, labels, labelNames: ["low", "high"] };
}
