/** Precompute job: load a dataset, take a seeded subset, run the frozen
 * encoder, and write the EMBED1 file. Rerunning a job with the same inputs
 * produces a byte-identical file (no timestamps in the metadata). */

import { Dataset, DatasetName, loadDataset } from './datasets.js'
import { Encoder } from './encoders.js'
import { writeEmbed1 } from './embed1.js'
import { seededSample } from './prng.js'

export interface PrecomputeJob {
  dataset: DatasetName
  outPath: string
  encoder: Encoder
  maxExamples?: number
  seed: number
  cacheDir: string
}

export interface PrecomputeResult {
  rows: number
  dim: number
  normMedian: number
}

export function subsetDataset(dataset: Dataset, maxExamples: number | undefined, seed: number) {
  const n = dataset.records.length
  const take = maxExamples === undefined ? n : Math.min(maxExamples, n)
  const idx = take === n ? Array.from({ length: n }, (_, i) => i) : seededSample(n, take, seed)
  return {
    records: idx.map(i => dataset.records[i]),
    labels: Int32Array.from(idx.map(i => dataset.labels[i])),
  }
}

export async function precompute(job: PrecomputeJob): Promise<PrecomputeResult> {
  const dataset = await loadDataset(job.dataset, job.cacheDir)
  const { records, labels } = subsetDataset(dataset, job.maxExamples, job.seed)
  const vectors = await job.encoder.encode(records)
  if (vectors.length !== records.length) {
    throw new Error(`encoder returned ${vectors.length} vectors for ${records.length} records`)
  }
  for (const [i, v] of vectors.entries()) {
    if (v.length !== job.encoder.dim) {
      throw new Error(`row ${i}: got ${v.length}-d vector, encoder dim is ${job.encoder.dim}`)
    }
  }
  writeEmbed1(job.outPath, {
    vectors,
    labels,
    metadata: {
      dataset: job.dataset,
      encoder: job.encoder.id,
      seed: job.seed,
      rows: vectors.length,
      dim: job.encoder.dim,
    },
  })
  const norms = vectors.map(v => Math.sqrt(v.reduce((s, x) => s + x * x, 0))).sort((a, b) => a - b)
  return {
    rows: vectors.length,
    dim: job.encoder.dim,
    normMedian: norms[Math.floor(norms.length / 2)] ?? 0,
  }
}
