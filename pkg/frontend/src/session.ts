// Game session state machine. One attempt cycles
// Idle -> Recording -> Uploading -> Feedback -> Idle; a failed microphone
// start is the only back-edge (Recording -> Idle) and never reaches the
// network. While any attempt is in flight every further start request is
// refused, so overlapping diagnose calls cannot happen.
//
// The displayed level is whatever the most recent server response said;
// the client never computes levels itself.

import type { DiagnosisResult } from './api.js';
import { ApiError, TransportError } from './api.js';
import { encodeWavPcm16 } from './wav.js';

export interface AudioTake {
  samples: Float32Array;
  sampleRate: number;
}

export interface Recorder {
  start(): Promise<void>;
  stop(): Promise<AudioTake>;
}

export interface DiagnoseTransport {
  diagnose(letterId: string, wav: ArrayBuffer, childId?: string): Promise<DiagnosisResult>;
}

export type Feedback =
  | { kind: 'verdict'; result: DiagnosisResult }
  | { kind: 'unusable'; reason: string } // 422: prompt the child to re-record
  | { kind: 'error'; message: string; retryable: boolean };

export type AttemptState =
  | { kind: 'idle' }
  | { kind: 'recording' }
  | { kind: 'uploading' }
  | { kind: 'feedback'; feedback: Feedback };

export type SessionListener = (session: GameSession) => void;

export class GameSession {
  private attempt: AttemptState = { kind: 'idle' };
  private serverLevel = 0;
  private listeners: SessionListener[] = [];

  constructor(
    readonly childId: string,
    public letterId: string,
    private recorder: Recorder,
    private transport: DiagnoseTransport,
  ) {}

  get state(): AttemptState {
    return this.attempt;
  }

  get level(): number {
    return this.serverLevel;
  }

  onChange(listener: SessionListener): void {
    this.listeners.push(listener);
  }

  private setState(next: AttemptState): void {
    this.attempt = next;
    for (const listener of this.listeners) listener(this);
  }

  selectLetter(letterId: string): boolean {
    if (this.attempt.kind !== 'idle') return false;
    this.letterId = letterId;
    this.serverLevel = 0; // level re-syncs from the next server response
    return true;
  }

  /** Refuses unless idle, which is what makes rapid clicking harmless. */
  async startRecording(): Promise<boolean> {
    if (this.attempt.kind !== 'idle') return false;
    this.setState({ kind: 'recording' });
    try {
      await this.recorder.start();
      return true;
    } catch {
      this.setState({ kind: 'idle' }); // mic refused; nothing was uploaded
      return false;
    }
  }

  async finishRecording(): Promise<Feedback | null> {
    if (this.attempt.kind !== 'recording') return null;
    this.setState({ kind: 'uploading' });
    let feedback: Feedback;
    try {
      const take = await this.recorder.stop();
      const wav = encodeWavPcm16(take.samples, take.sampleRate);
      const result = await this.transport.diagnose(this.letterId, wav, this.childId);
      if (result.level !== null) this.serverLevel = result.level;
      feedback = { kind: 'verdict', result };
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        feedback = { kind: 'unusable', reason: err.reason ?? 'unusable-audio' };
      } else if (err instanceof TransportError) {
        feedback = { kind: 'error', message: err.message, retryable: true };
      } else {
        feedback = { kind: 'error', message: err instanceof Error ? err.message : String(err), retryable: false };
      }
    }
    this.setState({ kind: 'feedback', feedback });
    return feedback;
  }

  acknowledge(): boolean {
    if (this.attempt.kind !== 'feedback') return false;
    this.setState({ kind: 'idle' });
    return true;
  }

  /** Sync the level display from a progress fetch (e.g. when resuming). */
  syncLevel(level: number): void {
    this.serverLevel = level;
  }
}
