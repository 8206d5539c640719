// 16-bit PCM mono WAV encoding at the service's canonical 16 kHz, so the
// server never has to transcode uploads.

export const TARGET_RATE = 16000;

export function resampleLinear(samples: Float32Array, sourceRate: number, targetRate: number): Float32Array {
  if (sourceRate === targetRate) return samples;
  const outLength = Math.max(1, Math.round((samples.length * targetRate) / sourceRate));
  const out = new Float32Array(outLength);
  const step = sourceRate / targetRate;
  for (let m = 0; m < outLength; m++) {
    const pos = m * step;
    const i = Math.min(Math.floor(pos), samples.length - 1);
    const j = Math.min(i + 1, samples.length - 1);
    const frac = pos - i;
    out[m] = samples[i] * (1 - frac) + samples[j] * frac;
  }
  return out;
}

export function encodeWavPcm16(samples: Float32Array, sourceRate: number): ArrayBuffer {
  const mono = resampleLinear(samples, sourceRate, TARGET_RATE);
  const buffer = new ArrayBuffer(44 + mono.length * 2);
  const view = new DataView(buffer);
  const writeAscii = (offset: number, text: string) => {
    for (let i = 0; i < text.length; i++) view.setUint8(offset + i, text.charCodeAt(i));
  };
  writeAscii(0, 'RIFF');
  view.setUint32(4, 36 + mono.length * 2, true);
  writeAscii(8, 'WAVE');
  writeAscii(12, 'fmt ');
  view.setUint32(16, 16, true);
  view.setUint16(20, 1, true); // PCM
  view.setUint16(22, 1, true); // mono
  view.setUint32(24, TARGET_RATE, true);
  view.setUint32(28, TARGET_RATE * 2, true);
  view.setUint16(32, 2, true);
  view.setUint16(34, 16, true);
  writeAscii(36, 'data');
  view.setUint32(40, mono.length * 2, true);
  for (let i = 0; i < mono.length; i++) {
    const clamped = Math.max(-1, Math.min(1, mono[i]));
    view.setInt16(44 + i * 2, Math.max(-32768, Math.min(32767, Math.round(clamped * 32768))), true);
  }
  return buffer;
}
