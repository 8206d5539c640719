// Bootstrap and screen routing: register -> game <-> report.

import { ArpaClient } from './api.js';
import { renderGame } from './views/game.js';
import { renderRegister } from './views/register.js';
import { renderReport } from './views/report.js';

export interface AppConfig {
  baseUrl: string;
  token?: string;
}

export function startApp(root: HTMLElement, config: AppConfig): void {
  const client = new ArpaClient(config.baseUrl, config.token);

  const showGame = async (childId: string) => {
    const letters = await client.letters();
    renderGame(root, client, childId, letters, () => void showReport(childId));
  };

  const showReport = async (childId: string) => {
    await renderReport(root, client, childId, () => void showGame(childId));
  };

  renderRegister(root, client, (childId) => void showGame(childId));
}

declare global {
  interface Window {
    ARPA_CONFIG?: AppConfig;
  }
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  startApp(document.getElementById('app')!, window.ARPA_CONFIG ?? { baseUrl: 'http://127.0.0.1:8077' });
}
