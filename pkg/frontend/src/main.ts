import { GradingApi } from './api.js';
import { ReviewApp } from './app.js';
import { render } from './render.js';
import type { Category } from './types.js';

// Browser bootstrap: ?session=<id> against the same origin (or ?api=<base>).

function start(): void {
  const params = new URLSearchParams(window.location.search);
  const sessionId = params.get('session');
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app element');
  if (!sessionId) {
    root.innerHTML = '<main class="screen"><p class="error">Add ?session=&lt;id&gt; to the URL.</p></main>';
    return;
  }

  const api = new GradingApi(params.get('api') ?? '');
  const app = new ReviewApp(api, sessionId);

  app.onChange((state) => {
    root.innerHTML = render(state);
    for (const button of root.querySelectorAll<HTMLButtonElement>('button.category')) {
      button.addEventListener('click', () => {
        app.select(button.dataset.category as Category);
      });
    }
    root.querySelector<HTMLButtonElement>('button.submit')?.addEventListener('click', () => {
      void app.submit();
    });
    root.querySelector<HTMLButtonElement>('button.toggle-context')?.addEventListener('click', () => {
      app.toggleContext();
    });
  });

  document.addEventListener('keydown', (event) => {
    if (event.target instanceof HTMLInputElement) return;
    app.handleKey(event.key);
  });

  void app.start();
}

document.addEventListener('DOMContentLoaded', start);
