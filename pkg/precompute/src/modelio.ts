/** Read tfjs model artifacts (model.json + weight shards) from disk.
 * The plain @tensorflow/tfjs build has no file:// IO handler in Node, so
 * artifacts are assembled here and handed over via tf.io.fromMemory. */

import { readFileSync } from 'fs'
import { dirname, join } from 'path'
import type * as tfType from '@tensorflow/tfjs'

interface WeightsManifestGroup {
  paths: string[]
  weights: tfType.io.WeightsManifestEntry[]
}

export function readModelArtifacts(modelJsonPath: string): tfType.io.ModelArtifacts {
  const dir = dirname(modelJsonPath)
  const json = JSON.parse(readFileSync(modelJsonPath, 'utf-8')) as {
    modelTopology: object
    format?: string
    generatedBy?: string
    convertedBy?: string
    weightsManifest?: WeightsManifestGroup[]
  }
  const manifest = json.weightsManifest ?? []
  const weightSpecs = manifest.flatMap(g => g.weights)
  const buffers: Buffer[] = []
  for (const group of manifest) {
    for (const path of group.paths) {
      buffers.push(readFileSync(join(dir, path)))
    }
  }
  const weightData = Buffer.concat(buffers)
  return {
    modelTopology: json.modelTopology,
    format: json.format,
    generatedBy: json.generatedBy,
    convertedBy: json.convertedBy,
    weightSpecs,
    weightData: weightData.buffer.slice(
      weightData.byteOffset,
      weightData.byteOffset + weightData.byteLength,
    ) as ArrayBuffer,
  }
}
