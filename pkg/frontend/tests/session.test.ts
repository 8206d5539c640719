import { describe, expect, it } from 'vitest';

import { ApiError, TransportError, type DiagnosisResult } from '../src/api.js';
import { GameSession, type AudioTake, type Recorder } from '../src/session.js';

class StubRecorder implements Recorder {
  started = 0;
  async start(): Promise<void> {
    this.started++;
  }
  async stop(): Promise<AudioTake> {
    return { samples: new Float32Array(1600).fill(0.1), sampleRate: 16000 };
  }
}

type Script = Array<'correct' | 'incorrect' | 'silence' | 'down'>;

class MockTransport {
  calls = 0;
  inFlight = 0;
  maxInFlight = 0;
  private level = 0;

  constructor(private script: Script) {}

  async diagnose(letterId: string, _wav: ArrayBuffer, _childId?: string): Promise<DiagnosisResult> {
    this.inFlight++;
    this.maxInFlight = Math.max(this.maxInFlight, this.inFlight);
    const step = this.script[this.calls % this.script.length];
    this.calls++;
    await Promise.resolve(); // yield, like a real network hop
    this.inFlight--;
    if (step === 'silence') throw new ApiError(422, 'could not hear any speech', 'silence');
    if (step === 'down') throw new TransportError('connection refused');
    if (step === 'correct') this.level++;
    return {
      letter_id: letterId,
      label: step,
      score: 0.9,
      model: { kind: 'knn', version: 1 },
      level: this.level,
    };
  }
}

function freshSession(script: Script) {
  const transport = new MockTransport(script);
  const session = new GameSession('child-1', 'raa', new StubRecorder(), transport);
  return { session, transport };
}

async function oneAttempt(session: GameSession) {
  await session.startRecording();
  const feedback = await session.finishRecording();
  session.acknowledge();
  return feedback;
}

describe('level display', () => {
  it('advances by exactly one on a correct verdict', async () => {
    const { session } = freshSession(['correct']);
    expect(session.level).toBe(0);
    await oneAttempt(session);
    expect(session.level).toBe(1);
    await oneAttempt(session);
    expect(session.level).toBe(2);
  });

  it('stays unchanged on an incorrect verdict', async () => {
    const { session } = freshSession(['correct', 'incorrect', 'incorrect']);
    await oneAttempt(session);
    expect(session.level).toBe(1);
    await oneAttempt(session);
    await oneAttempt(session);
    expect(session.level).toBe(1);
  });

  it('mirrors the server value, never a client computation', async () => {
    const { session } = freshSession(['correct']);
    session.syncLevel(7); // resumed session: server said 7
    await oneAttempt(session);
    expect(session.level).toBe(1); // server response wins outright
  });
});

describe('feedback kinds', () => {
  it('422 produces the re-record prompt state', async () => {
    const { session } = freshSession(['silence']);
    const feedback = await oneAttempt(session);
    expect(feedback).toEqual({ kind: 'unusable', reason: 'silence' });
    expect(session.level).toBe(0);
  });

  it('network failure is a retryable error, level untouched', async () => {
    const { session } = freshSession(['down']);
    const feedback = await oneAttempt(session);
    expect(feedback?.kind).toBe('error');
    expect(feedback && feedback.kind === 'error' && feedback.retryable).toBe(true);
    expect(session.level).toBe(0);
  });
});

describe('state machine discipline', () => {
  it('follows Idle -> Recording -> Uploading -> Feedback -> Idle', async () => {
    const { session } = freshSession(['correct']);
    const seen: string[] = [];
    session.onChange((s) => seen.push(s.state.kind));
    await oneAttempt(session);
    expect(seen).toEqual(['recording', 'uploading', 'feedback', 'idle']);
  });

  it('refuses to start while not idle', async () => {
    const { session, transport } = freshSession(['correct']);
    await session.startRecording();
    expect(await session.startRecording()).toBe(false);
    const pending = session.finishRecording();
    expect(await session.startRecording()).toBe(false); // uploading
    await pending;
    expect(await session.startRecording()).toBe(false); // feedback not acknowledged
    session.acknowledge();
    expect(await session.startRecording()).toBe(true);
    await session.finishRecording();
    expect(transport.calls).toBe(2);
  });

  it('finishRecording outside recording is a no-op', async () => {
    const { session, transport } = freshSession(['correct']);
    expect(await session.finishRecording()).toBeNull();
    expect(transport.calls).toBe(0);
  });

  it('mic failure returns to idle without any upload', async () => {
    const transport = new MockTransport(['correct']);
    const failingRecorder: Recorder = {
      start: async () => {
        throw new Error('permission denied');
      },
      stop: async () => ({ samples: new Float32Array(1), sampleRate: 16000 }),
    };
    const session = new GameSession('child-1', 'raa', failingRecorder, transport);
    expect(await session.startRecording()).toBe(false);
    expect(session.state.kind).toBe('idle');
    expect(transport.calls).toBe(0);
  });
});

// deterministic PRNG for the rapid-clicking property test
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe('rapid clicking property', () => {
  it('never overlaps diagnose requests and keeps transitions legal', async () => {
    const legal = new Set(['idle>recording', 'recording>uploading', 'uploading>feedback', 'feedback>idle', 'recording>idle']);
    for (let seed = 1; seed <= 200; seed++) {
      const rand = mulberry32(seed);
      const script: Script = ['correct', 'incorrect', 'silence', 'down'];
      const transport = new MockTransport(
        Array.from({ length: 8 }, () => script[Math.floor(rand() * script.length)]),
      );
      const session = new GameSession('child-1', 'raa', new StubRecorder(), transport);
      let previous = session.state.kind;
      let correctSeen = 0;
      const levels: number[] = [session.level];
      session.onChange((s) => {
        expect(legal.has(`${previous}>${s.state.kind}`)).toBe(true);
        previous = s.state.kind;
        if (s.state.kind === 'feedback' && s.state.feedback.kind === 'verdict') {
          if (s.state.feedback.result.label === 'correct') correctSeen++;
          levels.push(s.level);
        }
      });
      const pending: Promise<unknown>[] = [];
      for (let click = 0; click < 40; click++) {
        const roll = rand();
        if (roll < 0.4) pending.push(session.startRecording());
        else if (roll < 0.8) pending.push(session.finishRecording());
        else session.acknowledge();
        if (rand() < 0.3) await Promise.resolve();
      }
      await Promise.all(pending);
      if (session.state.kind === 'recording') await session.finishRecording();
      expect(transport.maxInFlight).toBeLessThanOrEqual(1);
      expect(session.level).toBe(correctSeen); // level == count of Correct verdicts seen
      for (let i = 1; i < levels.length; i++) expect(levels[i]).toBeGreaterThanOrEqual(levels[i - 1]);
    }
  });
});
