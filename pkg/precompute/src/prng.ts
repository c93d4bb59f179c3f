/** Deterministic 32-bit PRNG (splitmix32) so example subsets are
 * reproducible across platforms without native RNG differences. */

export function splitmix32(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x9e3779b9) >>> 0
    let z = state
    z = Math.imul(z ^ (z >>> 16), 0x21f0aaad)
    z = Math.imul(z ^ (z >>> 15), 0x735a2d97)
    z = z ^ (z >>> 15)
    return (z >>> 0) / 4294967296
  }
}

/** Fisher-Yates shuffle of 0..n-1, returning the first `take` indices. */
export function seededSample(n: number, take: number, seed: number): number[] {
  if (take > n) throw new Error(`cannot take ${take} of ${n}`)
  const rand = splitmix32(seed)
  const idx = Array.from({ length: n }, (_, i) => i)
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1))
    ;[idx[i], idx[j]] = [idx[j], idx[i]]
  }
  return idx.slice(0, take).sort((a, b) => a - b)
}
