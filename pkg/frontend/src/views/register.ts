// Guardian-facing registration form: posts the child profile and hands the
// fresh child_id to the caller. 400/409 surface as inline errors; an
// unreachable server shows a retry banner instead of looping requests.

import { ApiError, ArpaClient, TransportError, type GuardianRole } from '../api.js';

export function renderRegister(
  root: HTMLElement,
  client: ArpaClient,
  onRegistered: (childId: string) => void,
): void {
  root.innerHTML = `
    <section class="card">
      <h1>Welcome</h1>
      <p>Register as a parent or therapist to start practicing.</p>
      <form id="register-form">
        <label>I am a
          <select name="guardian_role">
            <option value="parent">Parent</option>
            <option value="therapist">Therapist</option>
          </select>
        </label>
        <label>Child's name <input name="display_name" required></label>
        <label>Age <input name="age_years" type="number" min="3" max="12" required></label>
        <label>Gender
          <select name="gender">
            <option value="unspecified">Prefer not to say</option>
            <option value="female">Girl</option>
            <option value="male">Boy</option>
          </select>
        </label>
        <button type="submit">Start</button>
        <p class="form-error" hidden></p>
        <p class="retry-banner" hidden>Can't reach the server. <button type="button" class="retry">Try again</button></p>
      </form>
    </section>`;

  const form = root.querySelector<HTMLFormElement>('#register-form')!;
  const errorLine = root.querySelector<HTMLElement>('.form-error')!;
  const retryBanner = root.querySelector<HTMLElement>('.retry-banner')!;

  const submit = async () => {
    errorLine.hidden = true;
    retryBanner.hidden = true;
    const data = new FormData(form);
    try {
      const childId = await client.createChild({
        display_name: String(data.get('display_name') ?? ''),
        age_years: Number(data.get('age_years')),
        guardian_role: String(data.get('guardian_role')) as GuardianRole,
        gender: String(data.get('gender')) as 'female' | 'male' | 'unspecified',
      });
      onRegistered(childId);
    } catch (err) {
      if (err instanceof TransportError) {
        retryBanner.hidden = false; // user decides when to retry
      } else if (err instanceof ApiError) {
        errorLine.textContent = err.detail;
        errorLine.hidden = false;
      } else {
        throw err;
      }
    }
  };

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    void submit();
  });
  retryBanner.querySelector('.retry')!.addEventListener('click', () => void submit());
}
