// Microphone capture via WebAudio, producing raw Float32 samples capped at
// three seconds. WAV encoding happens in wav.ts so this stays capture-only.

import type { AudioTake, Recorder } from './session.js';

export const MAX_SECONDS = 3;

export class MicRecorder implements Recorder {
  private stream?: MediaStream;
  private context?: AudioContext;
  private processor?: ScriptProcessorNode;
  private chunks: Float32Array[] = [];
  private timer?: ReturnType<typeof setTimeout>;

  async start(): Promise<void> {
    this.stream = await navigator.mediaDevices.getUserMedia({ audio: true });
    this.context = new AudioContext();
    const source = this.context.createMediaStreamSource(this.stream);
    this.processor = this.context.createScriptProcessor(4096, 1, 1);
    this.chunks = [];
    this.processor.onaudioprocess = (event) => {
      this.chunks.push(new Float32Array(event.inputBuffer.getChannelData(0)));
    };
    source.connect(this.processor);
    this.processor.connect(this.context.destination);
    this.timer = setTimeout(() => void this.stop(), MAX_SECONDS * 1000);
  }

  async stop(): Promise<AudioTake> {
    if (this.timer) clearTimeout(this.timer);
    const rate = this.context?.sampleRate ?? 48000;
    this.processor?.disconnect();
    this.stream?.getTracks().forEach((track) => track.stop());
    await this.context?.close();
    const total = this.chunks.reduce((n, c) => n + c.length, 0);
    const samples = new Float32Array(total);
    let offset = 0;
    for (const chunk of this.chunks) {
      samples.set(chunk, offset);
      offset += chunk.length;
    }
    this.chunks = [];
    return { samples, sampleRate: rate };
  }
}
