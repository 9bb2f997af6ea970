import type { ViewState } from './app.js';
import { CATEGORIES, CATEGORY_LABELS } from './types.js';

function escapeHtml(text: string): string {
  return text
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;')
    .replaceAll('"', '&quot;');
}

/**
 * Pure view: state in, HTML out. Everything rendered comes from the service
 * payloads; the only client-side additions are button labels and chrome.
 */
export function render(state: ViewState): string {
  switch (state.kind) {
    case 'loading':
      return '<main class="screen"><p>Loading session…</p></main>';

    case 'fatal':
      return `<main class="screen"><p class="error">${escapeHtml(state.message)}</p></main>`;

    case 'complete':
      return [
        '<main class="screen complete">',
        '<h1>Session complete</h1>',
        `<p class="progress">${state.progress.done} / ${state.progress.total} answers graded</p>`,
        `<p><a class="export" href="${escapeHtml(state.exportUrl)}" download>Download labels (CSV)</a></p>`,
        '</main>',
      ].join('\n');

    case 'grading': {
      const { item, progress, selected, error, showContext, submitting } = state;
      const percent = progress.total ? Math.round((100 * progress.done) / progress.total) : 0;
      const buttons = CATEGORIES.map((category, index) => {
        const pressed = category === selected ? ' aria-pressed="true" data-selected="true"' : '';
        return (
          `<button class="category" data-category="${category}"${pressed}>` +
          `<kbd>${index + 1}</kbd> ${CATEGORY_LABELS[category]}</button>`
        );
      }).join('\n');
      const contextBlock = showContext
        ? `<section class="context"><h2>Source context</h2><p>${escapeHtml(item.context)}</p></section>`
        : '';
      const submitDisabled = selected === null || submitting ? ' disabled' : '';
      return [
        '<main class="screen grading">',
        `<div class="progressbar" role="progressbar" aria-valuenow="${progress.done}"`,
        ` aria-valuemax="${progress.total}"><div class="fill" style="width:${percent}%"></div></div>`,
        `<p class="progress">${progress.done} / ${progress.total}</p>`,
        `<section class="question"><h1>${escapeHtml(item.question)}</h1></section>`,
        `<section class="answer"><p>${escapeHtml(item.answer)}</p></section>`,
        `<button class="toggle-context">${showContext ? 'Hide' : 'Show'} context</button>`,
        contextBlock,
        error ? `<p class="error banner">${escapeHtml(error)}</p>` : '',
        `<div class="categories">${buttons}</div>`,
        `<button class="submit"${submitDisabled}>Submit</button>`,
        '</main>',
      ]
        .filter(Boolean)
        .join('\n');
    }
  }
}
