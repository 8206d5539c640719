// The child's game screen. Interaction is voice-first: one big microphone
// button, letter pictures to choose from, and a rabbit that hops up a level
// ladder when the server says the pronunciation was correct. All text on
// this screen is guardian-facing chrome; the child only needs the mic.

import type { ArpaClient } from '../api.js';
import { GameSession, type Feedback } from '../session.js';
import { MicRecorder } from '../recorder.js';

const LADDER_STEPS = 10;

export function renderGame(
  root: HTMLElement,
  client: ArpaClient,
  childId: string,
  letters: string[],
  onShowReport: () => void,
): GameSession {
  const session = new GameSession(childId, letters[0] ?? '', new MicRecorder(), client);
  root.innerHTML = `
    <section class="game">
      <nav class="letters"></nav>
      <div class="ladder"></div>
      <div class="rabbit" aria-label="rabbit avatar">🐰</div>
      <button class="mic" aria-label="hold to speak">🎤</button>
      <p class="prompt" aria-live="polite"></p>
      <button class="report-link">Progress report</button>
    </section>`;

  const nav = root.querySelector<HTMLElement>('.letters')!;
  const ladder = root.querySelector<HTMLElement>('.ladder')!;
  const rabbit = root.querySelector<HTMLElement>('.rabbit')!;
  const mic = root.querySelector<HTMLButtonElement>('.mic')!;
  const prompt = root.querySelector<HTMLElement>('.prompt')!;

  for (const letter of letters) {
    const button = document.createElement('button');
    button.className = 'letter';
    button.textContent = letter;
    button.addEventListener('click', () => {
      if (session.selectLetter(letter)) {
        void syncLevel();
        render();
      }
    });
    nav.appendChild(button);
  }

  async function syncLevel() {
    try {
      const records = await client.progress(childId);
      const record = records.find((r) => r.letter_id === session.letterId);
      session.syncLevel(record?.level ?? 0);
      render();
    } catch {
      // keep the current display; next diagnose response resyncs it
    }
  }

  function feedbackPrompt(feedback: Feedback): string {
    if (feedback.kind === 'verdict') {
      return feedback.result.label === 'correct' ? 'Great job! The rabbit jumped up!' : 'Almost! Try once more.';
    }
    if (feedback.kind === 'unusable') return "We couldn't hear you - try again closer to the microphone.";
    return feedback.retryable ? 'Connection hiccup - tap the microphone to retry.' : `Something went wrong: ${feedback.message}`;
  }

  function render() {
    ladder.innerHTML = '';
    for (let step = LADDER_STEPS - 1; step >= 0; step--) {
      const rung = document.createElement('div');
      rung.className = 'rung' + (step < session.level ? ' reached' : '');
      ladder.appendChild(rung);
    }
    rabbit.style.setProperty('--level', String(Math.min(session.level, LADDER_STEPS)));
    const state = session.state;
    mic.classList.toggle('recording', state.kind === 'recording');
    mic.disabled = state.kind === 'uploading';
    if (state.kind === 'feedback') {
      prompt.textContent = feedbackPrompt(state.feedback);
      if (state.feedback.kind === 'verdict' && state.feedback.result.label === 'correct') {
        rabbit.classList.add('jump');
        setTimeout(() => rabbit.classList.remove('jump'), 600);
      }
    } else if (state.kind === 'recording') {
      prompt.textContent = 'Listening...';
    } else if (state.kind === 'uploading') {
      prompt.textContent = 'Checking...';
    } else {
      prompt.textContent = `Say the letter "${session.letterId}"!`;
    }
  }

  mic.addEventListener('click', () => {
    const state = session.state;
    if (state.kind === 'idle') {
      void session.startRecording().then(render);
    } else if (state.kind === 'recording') {
      void session.finishRecording().then(render);
    } else if (state.kind === 'feedback') {
      session.acknowledge();
      render();
    }
    // uploading: ignore clicks; the state machine refuses overlaps anyway
  });

  root.querySelector('.report-link')!.addEventListener('click', onShowReport);
  session.onChange(render);
  void syncLevel();
  render();
  return session;
}
