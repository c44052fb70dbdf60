// Binary data-plane codec, mirroring the server's wire format.
//
// Little-endian header (19 bytes):
//   u16 magic 0x4E52, u8 version, u8 kind, u32 seq,
//   u64 first sample index, u16 samples per channel, u8 channels.
// Kind 1 carries f32 microvolt samples (sample-major); kinds 2-4 carry a
// u32 length prefix plus UTF-8 JSON.

export const MAGIC = 0x4e52;
export const VERSION = 1;
export const HEADER_SIZE = 19;

export enum Kind {
  Samples = 1,
  Event = 2,
  Impedance = 3,
  Status = 4,
}

export interface SampleMessage {
  kind: Kind.Samples;
  seq: number;
  firstIndex: number;
  nSamples: number;
  nChannels: number;
  /** sample-major: samples[i * nChannels + ch] */
  samples: Float32Array;
}

export interface JsonMessage {
  kind: Kind.Event | Kind.Impedance | Kind.Status;
  seq: number;
  payload: Record<string, unknown>;
  /** exact JSON text as received, so re-encoding is byte-faithful */
  raw: string;
}

export type DataMessage = SampleMessage | JsonMessage;

export class WireError extends Error {}

export function decodeMessage(buf: ArrayBuffer | Uint8Array): DataMessage {
  const bytes = buf instanceof Uint8Array ? buf : new Uint8Array(buf);
  if (bytes.length < HEADER_SIZE) {
    throw new WireError(`message shorter than header (${bytes.length} bytes)`);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const magic = view.getUint16(0, true);
  if (magic !== MAGIC) {
    throw new WireError(`bad magic 0x${magic.toString(16)}`);
  }
  const version = view.getUint8(2);
  if (version !== VERSION) {
    throw new WireError(`unsupported version ${version}`);
  }
  const kind = view.getUint8(3);
  const seq = view.getUint32(4, true);
  const firstIndex = Number(view.getBigUint64(8, true));
  const nSamples = view.getUint16(16, true);
  const nChannels = view.getUint8(18);

  if (kind === Kind.Samples) {
    const want = nSamples * nChannels * 4;
    if (bytes.length !== HEADER_SIZE + want) {
      throw new WireError(
        `sample payload is ${bytes.length - HEADER_SIZE} bytes, want ${want}`,
      );
    }
    // copy out so the caller is not pinned to the socket's buffer
    const samples = new Float32Array(nSamples * nChannels);
    for (let i = 0; i < samples.length; i++) {
      samples[i] = view.getFloat32(HEADER_SIZE + 4 * i, true);
    }
    return { kind, seq, firstIndex, nSamples, nChannels, samples };
  }

  if (kind === Kind.Event || kind === Kind.Impedance || kind === Kind.Status) {
    if (bytes.length < HEADER_SIZE + 4) {
      throw new WireError('missing JSON length prefix');
    }
    const jsonLen = view.getUint32(HEADER_SIZE, true);
    if (bytes.length !== HEADER_SIZE + 4 + jsonLen) {
      throw new WireError('JSON payload length mismatch');
    }
    const text = new TextDecoder().decode(
      bytes.subarray(HEADER_SIZE + 4, HEADER_SIZE + 4 + jsonLen),
    );
    return { kind, seq, payload: JSON.parse(text), raw: text };
  }

  throw new WireError(`unknown message kind ${kind}`);
}

function packHeader(
  kind: Kind,
  seq: number,
  firstIndex: number,
  nSamples: number,
  nChannels: number,
  payloadLen: number,
): { bytes: Uint8Array; view: DataView } {
  const bytes = new Uint8Array(HEADER_SIZE + payloadLen);
  const view = new DataView(bytes.buffer);
  view.setUint16(0, MAGIC, true);
  view.setUint8(2, VERSION);
  view.setUint8(3, kind);
  view.setUint32(4, seq >>> 0, true);
  view.setBigUint64(8, BigInt(firstIndex), true);
  view.setUint16(16, nSamples, true);
  view.setUint8(18, nChannels);
  return { bytes, view };
}

export function encodeSamples(
  seq: number,
  firstIndex: number,
  samples: Float32Array,
  nChannels: number,
): Uint8Array {
  if (samples.length % nChannels !== 0) {
    throw new WireError('sample count is not a channel multiple');
  }
  const nSamples = samples.length / nChannels;
  const { bytes, view } = packHeader(
    Kind.Samples, seq, firstIndex, nSamples, nChannels, samples.length * 4,
  );
  for (let i = 0; i < samples.length; i++) {
    view.setFloat32(HEADER_SIZE + 4 * i, samples[i], true);
  }
  return bytes;
}

export function encodeJson(
  kind: Kind.Event | Kind.Impedance | Kind.Status,
  seq: number,
  payload: Record<string, unknown> | string,
): Uint8Array {
  const text = typeof payload === 'string' ? payload : JSON.stringify(payload);
  const body = new TextEncoder().encode(text);
  const { bytes, view } = packHeader(kind, seq, 0, 0, 0, 4 + body.length);
  view.setUint32(HEADER_SIZE, body.length, true);
  bytes.set(body, HEADER_SIZE + 4);
  return bytes;
}
