import { mkdtempSync, mkdirSync, readFileSync, writeFileSync } from 'fs'
import { tmpdir } from 'os'
import { join } from 'path'
import { describe, expect, it } from 'vitest'
import { decodeEmbed1 } from '../src/embed1.js'
import { makeSeededProjectionEncoder } from '../src/encoders.js'
import { precompute, subsetDataset } from '../src/precompute.js'
import { seededSample, splitmix32 } from '../src/prng.js'
import { loadDataset } from '../src/datasets.js'

function textCache(rows: number): string {
  const cache = mkdtempSync(join(tmpdir(), 'precompute-job-'))
  mkdirSync(cache, { recursive: true })
  const lines = Array.from(
    { length: rows },
    (_, i) => `"${(i % 4) + 1}","Title ${i}","Body text number ${i} with words"`,
  )
  writeFileSync(join(cache, 'train.csv'), lines.join('\n') + '\n')
  return cache
}

describe('prng', () => {
  it('splitmix32 is deterministic and uniform-ish', () => {
    const a = splitmix32(42)
    const b = splitmix32(42)
    const xs = Array.from({ length: 1000 }, () => a())
    const ys = Array.from({ length: 1000 }, () => b())
    expect(xs).toEqual(ys)
    const mean = xs.reduce((s, x) => s + x, 0) / xs.length
    expect(mean).toBeGreaterThan(0.45)
    expect(mean).toBeLessThan(0.55)
  })

  it('seededSample is deterministic per seed and sorted', () => {
    const s1 = seededSample(100, 10, 7)
    const s2 = seededSample(100, 10, 7)
    const s3 = seededSample(100, 10, 8)
    expect(s1).toEqual(s2)
    expect(s1).not.toEqual(s3)
    expect([...s1].sort((a, b) => a - b)).toEqual(s1)
    expect(new Set(s1).size).toBe(10)
  })
})

describe('precompute job', () => {
  it('writes a valid EMBED1 with metadata and subset determinism', async () => {
    const cache = textCache(40)
    const out1 = join(cache, 'a.embed1')
    const out2 = join(cache, 'b.embed1')
    const job = {
      dataset: 'agnews' as const,
      encoder: makeSeededProjectionEncoder(384),
      maxExamples: 16,
      seed: 3,
      cacheDir: cache,
    }
    const r1 = await precompute({ ...job, outPath: out1 })
    const r2 = await precompute({ ...job, outPath: out2 })
    expect(r1.rows).toBe(16)
    expect(r1.dim).toBe(384)
    expect(r1.normMedian).toBeCloseTo(1.0, 6)
    // byte-identical on rerun with the same seed
    expect(readFileSync(out1).equals(readFileSync(out2))).toBe(true)

    const decoded = decodeEmbed1(readFileSync(out1))
    expect(decoded.vectors).toHaveLength(16)
    expect(decoded.metadata).toMatchObject({
      dataset: 'agnews',
      encoder: 'seeded-projection-384',
      seed: 3,
      rows: 16,
      dim: 384,
    })
  })

  it('different seeds give different subsets', async () => {
    const cache = textCache(40)
    const ds = await loadDataset('agnews', cache)
    const a = subsetDataset(ds, 10, 0)
    const b = subsetDataset(ds, 10, 1)
    expect(Array.from(a.labels)).not.toEqual(Array.from(b.labels))
  })

  it('caps the subset at the dataset size', async () => {
    const cache = textCache(8)
    const ds = await loadDataset('agnews', cache)
    const sub = subsetDataset(ds, 100, 0)
    expect(sub.records).toHaveLength(8)
  })

  it('image records produce unit-norm projections too', async () => {
    const enc = makeSeededProjectionEncoder(512)
    const vecs = await enc.encode([
      { kind: 'image', pixels: new Uint8Array(32 * 32 * 3).fill(100), width: 32, height: 32 },
    ])
    expect(vecs[0]).toHaveLength(512)
    const norm = Math.sqrt(vecs[0].reduce((s, x) => s + x * x, 0))
    expect(norm).toBeCloseTo(1.0, 5)
  })
})
