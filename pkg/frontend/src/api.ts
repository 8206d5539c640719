// Typed client for the arpa diagnose service HTTP API (/api/v1).

export type GuardianRole = 'parent' | 'therapist';
export type Verdict = 'correct' | 'incorrect';

export interface ChildDetails {
  display_name: string;
  age_years: number;
  guardian_role: GuardianRole;
  gender?: 'female' | 'male' | 'unspecified';
}

export interface DiagnosisResult {
  letter_id: string;
  label: Verdict;
  score: number;
  model: { kind: string; version: number };
  level: number | null;
}

export interface AttemptEntry {
  timestamp: number;
  label: Verdict;
  score: number;
}

export interface ProgressRecord {
  letter_id: string;
  level: number;
  history: AttemptEntry[];
}

export interface LetterReport {
  letter_id: string;
  level: number;
  attempts: number;
  correct: number;
  correct_rate: number;
  level_trajectory: number[];
  window_rates: number[];
  window_size: number;
}

export interface ChildReport {
  child_id: string;
  display_name: string;
  age_years: number;
  letters: LetterReport[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly reason?: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

/** Network-level failure (server unreachable), distinct from an API error. */
export class TransportError extends Error {}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ArpaClient {
  constructor(
    private baseUrl: string,
    private token?: string,
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
  }

  private headers(): Record<string, string> {
    return this.token ? { Authorization: `Bearer ${this.token}` } : {};
  }

  private async request(path: string, init: RequestInit = {}): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/api/v1${path}`, {
        ...init,
        headers: { ...this.headers(), ...(init.headers ?? {}) },
      });
    } catch (err) {
      throw new TransportError(err instanceof Error ? err.message : String(err));
    }
    if (!response.ok) {
      let detail = response.statusText;
      let reason: string | undefined;
      try {
        const body = await response.json();
        detail = body.detail ?? detail;
        reason = body.reason;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail, reason);
    }
    return response;
  }

  async createChild(details: ChildDetails): Promise<string> {
    const response = await this.request('/children', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(details),
    });
    const body = await response.json();
    return body.child_id as string;
  }

  async diagnose(letterId: string, wav: ArrayBuffer, childId?: string): Promise<DiagnosisResult> {
    const form = new FormData();
    form.append('file', new Blob([wav], { type: 'audio/wav' }), 'attempt.wav');
    form.append('letter_id', letterId);
    if (childId) form.append('child_id', childId);
    const response = await this.request('/diagnose', { method: 'POST', body: form });
    return (await response.json()) as DiagnosisResult;
  }

  async progress(childId: string): Promise<ProgressRecord[]> {
    const response = await this.request(`/children/${encodeURIComponent(childId)}/progress`);
    return (await response.json()) as ProgressRecord[];
  }

  async report(childId: string): Promise<ChildReport> {
    const response = await this.request(`/children/${encodeURIComponent(childId)}/report?format=json`);
    return (await response.json()) as ChildReport;
  }

  async letters(): Promise<string[]> {
    const response = await this.request('/letters');
    const body = await response.json();
    return body.letters as string[];
  }
}
