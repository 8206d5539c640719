// Parent/therapist report view: per-letter level chart and attempt table,
// straight from /progress and /report. Printable via the print stylesheet.

import { ApiError, type ArpaClient } from '../api.js';

export async function renderReport(
  root: HTMLElement,
  client: ArpaClient,
  childId: string,
  onBack: () => void,
): Promise<void> {
  let reportDoc;
  let progress;
  try {
    [reportDoc, progress] = await Promise.all([client.report(childId), client.progress(childId)]);
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      root.innerHTML = `<section class="card"><h1>No such child</h1>
        <p>This profile does not exist on the server.</p></section>`;
      return;
    }
    throw err;
  }

  root.innerHTML = `
    <section class="report card">
      <h1>Progress: ${reportDoc.display_name}</h1>
      <button class="back no-print">Back to game</button>
      <div class="charts"></div>
      <h2>Attempts</h2>
      <table class="attempts">
        <thead><tr><th>Letter</th><th>When</th><th>Result</th><th>Confidence</th></tr></thead>
        <tbody></tbody>
      </table>
      <p class="empty-state" hidden>No attempts yet - time to play!</p>
    </section>`;

  const charts = root.querySelector<HTMLElement>('.charts')!;
  for (const letter of reportDoc.letters) {
    const row = document.createElement('div');
    row.className = 'chart-row';
    const bars = letter.level_trajectory
      .map((level) => `<span class="bar" style="--h:${level}" title="level ${level}"></span>`)
      .join('');
    row.innerHTML = `<h3>${letter.letter_id} - level ${letter.level}</h3>
      <div class="trajectory">${bars}</div>
      <p>${letter.correct}/${letter.attempts} correct (${(letter.correct_rate * 100).toFixed(0)}%)</p>`;
    charts.appendChild(row);
  }

  const tbody = root.querySelector<HTMLElement>('tbody')!;
  for (const record of progress) {
    for (const attempt of record.history) {
      const tr = document.createElement('tr');
      tr.innerHTML = `<td>${record.letter_id}</td>
        <td>${new Date(attempt.timestamp * 1000).toLocaleString()}</td>
        <td class="${attempt.label}">${attempt.label}</td>
        <td>${(attempt.score * 100).toFixed(0)}%</td>`;
      tbody.appendChild(tr);
    }
  }
  if (reportDoc.letters.length === 0) {
    root.querySelector<HTMLElement>('.empty-state')!.hidden = false;
  }
  root.querySelector('.back')!.addEventListener('click', onBack);
}
