/**
 * Dataset loaders. Each loader reads a local cache directory and, when the
 * cache is missing, attempts one download; a failed download raises
 * RetriableError so the CLI can exit with the retriable marker.
 */

import { createWriteStream, existsSync, mkdirSync, readFileSync, readdirSync } from 'fs'
import { get as httpsGet } from 'https'
import { join } from 'path'
import { spawnSync } from 'child_process'

export type DatasetName = 'cifar10' | 'stl10' | 'agnews' | 'imdb'

export interface ImageRecord {
  kind: 'image'
  /** interleaved RGB bytes, row-major */
  pixels: Uint8Array
  width: number
  height: number
}

export interface TextRecord {
  kind: 'text'
  text: string
}

export type DatasetRecord = ImageRecord | TextRecord

export interface Dataset {
  name: DatasetName
  records: DatasetRecord[]
  labels: Int32Array
  classNames: string[]
}

export class RetriableError extends Error {}

const URLS: Record<DatasetName, string> = {
  cifar10: 'https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz',
  stl10: 'https://cs.stanford.edu/~acoates/stl10/stl10_binary.tar.gz',
  agnews: 'https://raw.githubusercontent.com/mhjabreel/CharCnn_Keras/master/data/ag_news_csv/train.csv',
  imdb: 'https://ai.stanford.edu/~amaas/data/sentiment/aclImdb_v1.tar.gz',
}

function download(url: string, dest: string): Promise<void> {
  return new Promise((resolve, reject) => {
    const file = createWriteStream(dest)
    httpsGet(url, res => {
      if (res.statusCode !== 200) {
        reject(new RetriableError(`download failed: HTTP ${res.statusCode} for ${url}`))
        return
      }
      res.pipe(file)
      file.on('finish', () => file.close(() => resolve()))
    }).on('error', err => reject(new RetriableError(`download failed: ${err.message}`)))
  })
}

async function fetchArchive(name: DatasetName, cacheDir: string): Promise<void> {
  mkdirSync(cacheDir, { recursive: true })
  const url = URLS[name]
  const archive = join(cacheDir, url.split('/').pop()!)
  if (!existsSync(archive)) {
    await download(url, archive)
  }
  if (archive.endsWith('.tar.gz')) {
    const r = spawnSync('tar', ['xzf', archive, '-C', cacheDir])
    if (r.status !== 0) {
      throw new RetriableError(`extraction failed for ${archive}: ${r.stderr}`)
    }
  }
}

// --- CIFAR-10: binary batches, one record = label byte + 3072 planar bytes

function parseCifarBatch(buf: Buffer, records: DatasetRecord[], labels: number[]): void {
  const record = 1 + 3072
  if (buf.length % record !== 0) {
    throw new Error(`cifar batch size ${buf.length} not a multiple of ${record}`)
  }
  for (let off = 0; off < buf.length; off += record) {
    labels.push(buf[off])
    const planar = buf.subarray(off + 1, off + record)
    const pixels = new Uint8Array(3072)
    for (let p = 0; p < 1024; p++) {
      pixels[p * 3] = planar[p]
      pixels[p * 3 + 1] = planar[1024 + p]
      pixels[p * 3 + 2] = planar[2048 + p]
    }
    records.push({ kind: 'image', pixels, width: 32, height: 32 })
  }
}

async function loadCifar10(cacheDir: string): Promise<Dataset> {
  const dir = join(cacheDir, 'cifar-10-batches-bin')
  if (!existsSync(dir)) await fetchArchive('cifar10', cacheDir)
  const records: DatasetRecord[] = []
  const labels: number[] = []
  for (let b = 1; b <= 5; b++) {
    const path = join(dir, `data_batch_${b}.bin`)
    if (!existsSync(path)) throw new Error(`missing cifar batch ${path}`)
    parseCifarBatch(readFileSync(path), records, labels)
  }
  return {
    name: 'cifar10',
    records,
    labels: Int32Array.from(labels),
    classNames: ['airplane', 'automobile', 'bird', 'cat', 'deer', 'dog', 'frog', 'horse', 'ship', 'truck'],
  }
}

// --- STL-10: column-major uint8 planes, labels 1..10 in a separate file

function parseStl10(x: Buffer, y: Buffer): { records: DatasetRecord[]; labels: number[] } {
  const per = 96 * 96 * 3
  const n = y.length
  if (x.length !== n * per) {
    throw new Error(`stl10 image bytes ${x.length} disagree with ${n} labels`)
  }
  const records: DatasetRecord[] = []
  const labels: number[] = []
  for (let i = 0; i < n; i++) {
    const img = x.subarray(i * per, (i + 1) * per)
    const pixels = new Uint8Array(per)
    for (let c = 0; c < 3; c++) {
      for (let col = 0; col < 96; col++) {
        for (let row = 0; row < 96; row++) {
          // planes are column-major within each channel
          pixels[(row * 96 + col) * 3 + c] = img[c * 9216 + col * 96 + row]
        }
      }
    }
    records.push({ kind: 'image', pixels, width: 96, height: 96 })
    labels.push(y[i] - 1)
  }
  return { records, labels }
}

async function loadStl10(cacheDir: string): Promise<Dataset> {
  const dir = join(cacheDir, 'stl10_binary')
  if (!existsSync(dir)) await fetchArchive('stl10', cacheDir)
  const { records, labels } = parseStl10(
    readFileSync(join(dir, 'train_X.bin')),
    readFileSync(join(dir, 'train_y.bin')),
  )
  return {
    name: 'stl10',
    records,
    labels: Int32Array.from(labels),
    classNames: ['airplane', 'bird', 'car', 'cat', 'deer', 'dog', 'horse', 'monkey', 'ship', 'truck'],
  }
}

// --- AG News: csv rows "class","title","description", classes 1..4

export function parseCsvRows(text: string): string[][] {
  const rows: string[][] = []
  let field = ''
  let row: string[] = []
  let inQuotes = false
  for (let i = 0; i < text.length; i++) {
    const ch = text[i]
    if (inQuotes) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          field += '"'
          i++
        } else {
          inQuotes = false
        }
      } else {
        field += ch
      }
    } else if (ch === '"') {
      inQuotes = true
    } else if (ch === ',') {
      row.push(field)
      field = ''
    } else if (ch === '\n') {
      row.push(field.replace(/\r$/, ''))
      rows.push(row)
      row = []
      field = ''
    } else {
      field += ch
    }
  }
  if (field.length > 0 || row.length > 0) {
    row.push(field)
    rows.push(row)
  }
  return rows.filter(r => r.length > 1 || (r.length === 1 && r[0] !== ''))
}

async function loadAgnews(cacheDir: string): Promise<Dataset> {
  const path = join(cacheDir, 'train.csv')
  if (!existsSync(path)) await fetchArchive('agnews', cacheDir)
  const rows = parseCsvRows(readFileSync(path, 'utf-8'))
  const records: DatasetRecord[] = []
  const labels: number[] = []
  for (const row of rows) {
    if (row.length < 3) continue
    const cls = parseInt(row[0], 10)
    if (!(cls >= 1 && cls <= 4)) continue
    records.push({ kind: 'text', text: `${row[1]} ${row[2]}`.trim() })
    labels.push(cls - 1)
  }
  return {
    name: 'agnews',
    records,
    labels: Int32Array.from(labels),
    classNames: ['World', 'Sports', 'Business', 'Sci/Tech'],
  }
}

// --- IMDB: aclImdb/train/{pos,neg}/*.txt folders (or a pre-made csv)

async function loadImdb(cacheDir: string): Promise<Dataset> {
  const dir = join(cacheDir, 'aclImdb', 'train')
  const csvPath = join(cacheDir, 'imdb_train.csv')
  const records: DatasetRecord[] = []
  const labels: number[] = []
  if (existsSync(csvPath)) {
    for (const row of parseCsvRows(readFileSync(csvPath, 'utf-8'))) {
      if (row.length < 2) continue
      const cls = parseInt(row[1], 10)
      if (cls !== 0 && cls !== 1) continue
      records.push({ kind: 'text', text: row[0] })
      labels.push(cls)
    }
  } else {
    if (!existsSync(dir)) await fetchArchive('imdb', cacheDir)
    for (const [sub, cls] of [
      ['neg', 0],
      ['pos', 1],
    ] as const) {
      const folder = join(dir, sub)
      for (const file of readdirSync(folder).sort()) {
        if (!file.endsWith('.txt')) continue
        records.push({ kind: 'text', text: readFileSync(join(folder, file), 'utf-8') })
        labels.push(cls)
      }
    }
  }
  return {
    name: 'imdb',
    records,
    labels: Int32Array.from(labels),
    classNames: ['neg', 'pos'],
  }
}

export async function loadDataset(name: DatasetName, cacheDir: string): Promise<Dataset> {
  switch (name) {
    case 'cifar10':
      return loadCifar10(cacheDir)
    case 'stl10':
      return loadStl10(cacheDir)
    case 'agnews':
      return loadAgnews(cacheDir)
    case 'imdb':
      return loadImdb(cacheDir)
    default:
      throw new Error(`unknown dataset: ${name as string}`)
  }
}
