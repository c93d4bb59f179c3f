#!/usr/bin/env node
/** CLI: precompute --dataset <name> --out <path> [--max-examples N]
 * [--seed S] [--encoder id] [--cache-dir dir] [--model-path p].
 * Exit codes: 0 ok, 2 usage/config error, 75 retriable (download failed). */

import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'
import { DatasetName, RetriableError } from './datasets.js'
import { defaultEncoderFor, makeEncoder, MINILM_DIM, RESNET18_DIM } from './encoders.js'
import { precompute } from './precompute.js'

const EX_TEMPFAIL = 75

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .command('precompute', 'compute frozen-encoder embeddings into an EMBED1 file')
    .option('dataset', {
      choices: ['cifar10', 'stl10', 'agnews', 'imdb'] as const,
      demandOption: true,
    })
    .option('out', { type: 'string', demandOption: true })
    .option('max-examples', { type: 'number' })
    .option('seed', { type: 'number', default: 0 })
    .option('encoder', {
      type: 'string',
      describe: 'minilm | resnet18 | seeded-projection (offline stand-in)',
    })
    .option('cache-dir', { type: 'string', default: 'data' })
    .option('model-path', { type: 'string', describe: 'tfjs model.json for the image encoder' })
    .strict()
    .fail((msg, err) => {
      throw err ?? new UsageError(msg ?? 'bad arguments')
    })
    .parse()

  const dataset = args.dataset as DatasetName
  const encoderName = args.encoder ?? defaultEncoderFor(dataset)
  const isText = dataset === 'agnews' || dataset === 'imdb'
  const encoder = makeEncoder(encoderName, {
    cacheDir: args['cache-dir'],
    modelPath: args['model-path'],
    dim: isText ? MINILM_DIM : RESNET18_DIM,
  })
  const result = await precompute({
    dataset,
    outPath: args.out,
    encoder,
    maxExamples: args['max-examples'],
    seed: args.seed,
    cacheDir: args['cache-dir'],
  })
  console.log(
    `wrote ${args.out}: ${result.rows} x ${result.dim} (${encoder.id}), median norm ${result.normMedian.toFixed(4)}`,
  )
  return 0
}

class UsageError extends Error {}

const entry = process.argv[1] ?? ''
if (entry.endsWith('cli.js') || entry.endsWith('cli.ts')) {
  main(hideBin(process.argv))
    .then(code => process.exit(code))
    .catch(err => {
      if (err instanceof RetriableError) {
        console.error(`RETRIABLE: ${err.message}`)
        process.exit(EX_TEMPFAIL)
      }
      if (err instanceof UsageError) {
        console.error(`usage error: ${err.message}`)
        process.exit(2)
      }
      console.error(`error: ${err instanceof Error ? err.message : err}`)
      process.exit(1)
    })
}
