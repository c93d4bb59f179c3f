/**
 * EMBED1 file format: 6-byte magic "EMBED1", u8 version (=1), u32le row
 * count N, u32le dimension D, N*D float32le row-major vectors, N int32le
 * class labels, then an optional u32le-length-prefixed JSON metadata blob.
 */

import { writeFileSync, readFileSync } from 'fs'

export const MAGIC = Buffer.from('EMBED1', 'ascii')
export const VERSION = 1

export interface Embed1Content {
  vectors: Float32Array[]
  labels: Int32Array
  metadata?: Record<string, unknown>
}

export class Embed1Error extends Error {
  constructor(
    message: string,
    public readonly offset: number,
  ) {
    super(`${message} (byte offset ${offset})`)
  }
}

export function encodeEmbed1(content: Embed1Content): Buffer {
  const { vectors, labels, metadata } = content
  const n = vectors.length
  if (labels.length !== n) {
    throw new Error(`labels length ${labels.length} != vector rows ${n}`)
  }
  const dim = n > 0 ? vectors[0].length : 0
  for (const v of vectors) {
    if (v.length !== dim) throw new Error('inconsistent vector dimensions')
  }
  const header = Buffer.alloc(MAGIC.length + 1 + 8)
  MAGIC.copy(header, 0)
  header.writeUInt8(VERSION, 6)
  header.writeUInt32LE(n, 7)
  header.writeUInt32LE(dim, 11)

  const vecBuf = Buffer.alloc(n * dim * 4)
  vectors.forEach((v, i) => {
    for (let j = 0; j < dim; j++) vecBuf.writeFloatLE(v[j], (i * dim + j) * 4)
  })
  const labBuf = Buffer.alloc(n * 4)
  for (let i = 0; i < n; i++) labBuf.writeInt32LE(labels[i], i * 4)

  const parts = [header, vecBuf, labBuf]
  if (metadata !== undefined) {
    const blob = Buffer.from(stableJson(metadata), 'utf-8')
    const len = Buffer.alloc(4)
    len.writeUInt32LE(blob.length, 0)
    parts.push(len, blob)
  }
  return Buffer.concat(parts)
}

/** JSON with sorted keys, matching the Python writer byte for byte. */
function stableJson(value: unknown): string {
  if (Array.isArray(value)) {
    return `[${value.map(stableJson).join(', ')}]`
  }
  if (value !== null && typeof value === 'object') {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => `${JSON.stringify(k)}: ${stableJson(v)}`)
    return `{${entries.join(', ')}}`
  }
  return JSON.stringify(value)
}

export function writeEmbed1(path: string, content: Embed1Content): void {
  writeFileSync(path, encodeEmbed1(content))
}

export function decodeEmbed1(data: Buffer): Embed1Content {
  if (!data.subarray(0, 6).equals(MAGIC)) {
    throw new Embed1Error(`bad magic ${JSON.stringify(data.subarray(0, 6).toString('latin1'))}`, 0)
  }
  let off = 6
  if (data.length < off + 1) throw new Embed1Error('truncated before version byte', off)
  const version = data.readUInt8(off)
  if (version !== VERSION) throw new Embed1Error(`unsupported version ${version}`, off)
  off += 1
  if (data.length < off + 8) throw new Embed1Error('truncated header', off)
  const n = data.readUInt32LE(off)
  const dim = data.readUInt32LE(off + 4)
  off += 8
  const vecBytes = n * dim * 4
  if (data.length < off + vecBytes) {
    throw new Embed1Error(`truncated vectors: need ${vecBytes} bytes`, off)
  }
  const vectors: Float32Array[] = []
  for (let i = 0; i < n; i++) {
    const v = new Float32Array(dim)
    for (let j = 0; j < dim; j++) v[j] = data.readFloatLE(off + (i * dim + j) * 4)
    vectors.push(v)
  }
  off += vecBytes
  if (data.length < off + n * 4) {
    throw new Embed1Error(`truncated labels: need ${n * 4} bytes`, off)
  }
  const labels = new Int32Array(n)
  for (let i = 0; i < n; i++) labels[i] = data.readInt32LE(off + i * 4)
  off += n * 4
  let metadata: Record<string, unknown> | undefined
  if (data.length > off) {
    if (data.length < off + 4) throw new Embed1Error('truncated metadata length prefix', off)
    const blobLen = data.readUInt32LE(off)
    off += 4
    if (data.length < off + blobLen) {
      throw new Embed1Error(`truncated metadata blob: need ${blobLen} bytes`, off)
    }
    metadata = JSON.parse(data.subarray(off, off + blobLen).toString('utf-8'))
    off += blobLen
    if (data.length !== off) {
      throw new Embed1Error(`${data.length - off} trailing bytes after metadata`, off)
    }
  }
  vectors.forEach((v, i) => {
    for (const x of v) {
      if (!Number.isFinite(x)) {
        throw new Embed1Error(`non-finite values in row ${i}`, 15 + i * dim * 4)
      }
    }
  })
  return { vectors, labels, metadata }
}

export function readEmbed1(path: string): Embed1Content {
  return decodeEmbed1(readFileSync(path))
}
