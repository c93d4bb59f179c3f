/**
 * Frozen encoders. The production encoders are a pinned MiniLM sentence
 * transformer (384-d, unit norm) and an ImageNet-pretrained ResNet-18
 * penultimate feature head (512-d) loaded from a tfjs-converted model
 * directory; neither is fine-tuned here. The seeded-projection encoder is
 * a dependency-free deterministic stand-in used by tests and dry runs.
 */

import type * as tfType from '@tensorflow/tfjs'
import { DatasetRecord, ImageRecord, RetriableError, TextRecord } from './datasets.js'
import { splitmix32 } from './prng.js'

export interface Encoder {
  id: string
  dim: number
  encode(records: DatasetRecord[]): Promise<Float32Array[]>
}

export const MINILM_ID = 'Xenova/all-MiniLM-L6-v2'
export const RESNET18_DIM = 512
export const MINILM_DIM = 384

interface TransformersModule {
  env: { cacheDir?: string }
  pipeline: (
    task: string,
    model: string,
  ) => Promise<(texts: string[], opts: Record<string, unknown>) => Promise<{ data: Float32Array }>>
}

export function makeMinilmEncoder(cacheDir?: string): Encoder {
  return {
    id: MINILM_ID,
    dim: MINILM_DIM,
    async encode(records) {
      // optional dependency: its native image stack cannot install in every
      // environment, so resolve it at runtime only
      const specifier = '@xenova/transformers'
      let transformers: TransformersModule
      try {
        transformers = (await import(specifier)) as TransformersModule
      } catch (err) {
        throw new Error(
          `@xenova/transformers is not installed (${(err as Error).message}); ` +
            'install it to use the MiniLM encoder',
        )
      }
      if (cacheDir) transformers.env.cacheDir = cacheDir
      let extractor
      try {
        extractor = await transformers.pipeline('feature-extraction', MINILM_ID)
      } catch (err) {
        throw new RetriableError(`encoder download failed: ${(err as Error).message}`)
      }
      const out: Float32Array[] = []
      const batch = 64
      for (let i = 0; i < records.length; i += batch) {
        const texts = records.slice(i, i + batch).map(r => (r as TextRecord).text)
        const t = await extractor(texts, { pooling: 'mean', normalize: true })
        for (let j = 0; j < texts.length; j++) {
          out.push(Float32Array.from(t.data.subarray(j * MINILM_DIM, (j + 1) * MINILM_DIM)))
        }
      }
      return out
    },
  }
}

const IMAGENET_MEAN = [0.485, 0.456, 0.406]
const IMAGENET_STD = [0.229, 0.224, 0.225]

/**
 * Penultimate pooled features from a tfjs model. `modelPath` points at a
 * local model.json produced by the tfjs converter from an ImageNet
 * pretrained ResNet-18, so the encoder id pins the weights used.
 */
export function makeTfjsImageEncoder(
  modelPath: string,
  id = 'resnet18-imagenet-tfjs',
  dim = RESNET18_DIM,
  outputNode?: string,
): Encoder {
  return {
    id,
    dim,
    async encode(records) {
      const tf = await import('@tensorflow/tfjs')
      const { readModelArtifacts } = await import('./modelio.js')
      let model: tfType.GraphModel | tfType.LayersModel
      try {
        const artifacts = readModelArtifacts(modelPath)
        const handler = tf.io.fromMemory(artifacts)
        model =
          artifacts.format === 'graph-model'
            ? await tf.loadGraphModel(handler)
            : await tf.loadLayersModel(handler)
      } catch (err) {
        throw new Error(`cannot load image model at ${modelPath}: ${(err as Error).message}`)
      }
      const out: Float32Array[] = []
      const batch = 16
      for (let i = 0; i < records.length; i += batch) {
        const imgs = records.slice(i, i + batch) as ImageRecord[]
        const feats = tf.tidy(() => {
          const tensors = imgs.map(img => {
            const raw = tf
              .tensor3d(Array.from(img.pixels), [img.height, img.width, 3])
              .div<tfType.Tensor3D>(255)
            const resized = tf.image.resizeBilinear(raw, [224, 224])
            return resized.sub(IMAGENET_MEAN).div<tfType.Tensor3D>(IMAGENET_STD)
          })
          const input = tf.stack(tensors)
          const raw =
            outputNode && 'execute' in model
              ? (model as tfType.GraphModel).execute(input, outputNode)
              : model.predict(input)
          let output = (Array.isArray(raw) ? raw[raw.length - 1] : raw) as tfType.Tensor
          // collapse any remaining spatial axes to the pooled feature vector
          while (output.shape.length > 2) {
            output = output.mean(1)
          }
          return output
        })
        const d = feats.shape[feats.shape.length - 1] ?? 0
        if (d !== dim) {
          feats.dispose()
          throw new Error(`model emits ${d}-d features, expected ${dim}`)
        }
        const flat = feats.dataSync() as Float32Array
        for (let j = 0; j < imgs.length; j++) {
          out.push(Float32Array.from(flat.subarray(j * d, (j + 1) * d)))
        }
        feats.dispose()
      }
      return out
    },
  }
}

/**
 * Deterministic offline encoder: hashes content into a fixed seeded
 * projection, unit-normalized. No pretrained weights; test/dry-run only.
 */
export function makeSeededProjectionEncoder(dim: number): Encoder {
  return {
    id: `seeded-projection-${dim}`,
    dim,
    async encode(records) {
      return records.map(r => {
        const acc = new Float64Array(dim)
        if (r.kind === 'text') {
          const tokens = r.text.toLowerCase().split(/[^a-z0-9]+/).filter(Boolean)
          for (const tok of tokens) {
            let h = 2166136261
            for (let i = 0; i < tok.length; i++) {
              h = Math.imul(h ^ tok.charCodeAt(i), 16777619)
            }
            const rand = splitmix32(h >>> 0)
            for (let j = 0; j < dim; j++) acc[j] += rand() - 0.5
          }
        } else {
          const img = r as ImageRecord
          // fold pixel blocks into the projection deterministically
          for (let p = 0; p < img.pixels.length; p += 3) {
            const rand = splitmix32((p * 2654435761) >>> 0)
            const v = (img.pixels[p] + img.pixels[p + 1] + img.pixels[p + 2]) / 765
            const j = Math.floor(rand() * dim)
            acc[j] += v * (rand() - 0.5)
          }
        }
        let norm = Math.sqrt(acc.reduce((s, x) => s + x * x, 0))
        if (norm === 0) {
          acc[0] = 1
          norm = 1
        }
        return Float32Array.from(acc, x => x / norm)
      })
    },
  }
}

export function makeEncoder(
  name: string,
  opts: { cacheDir?: string; modelPath?: string; dim?: number },
): Encoder {
  switch (name) {
    case 'minilm':
      return makeMinilmEncoder(opts.cacheDir)
    case 'resnet18': {
      if (!opts.modelPath) {
        throw new Error('resnet18 encoder needs --model-path (tfjs-converted model.json)')
      }
      return makeTfjsImageEncoder(opts.modelPath)
    }
    case 'seeded-projection':
      return makeSeededProjectionEncoder(opts.dim ?? MINILM_DIM)
    default:
      throw new Error(`unknown encoder: ${name}`)
  }
}

export function defaultEncoderFor(dataset: string): string {
  return dataset === 'agnews' || dataset === 'imdb' ? 'minilm' : 'resnet18'
}
