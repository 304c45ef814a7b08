/** Browser wiring: load a batch, step through screens, download ratings. */
import { BatchError, parseBatch } from './batch.js';
import { RatingStore, ScaleError } from './ratings.js';
import { Session, buildSession } from './session.js';
import { TaskScreen } from './types.js';

interface AppState {
  session: Session | null;
  cursor: number;
  store: RatingStore;
}

const state: AppState = { session: null, cursor: 0, store: new RatingStore() };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function setStatus(message: string, isError = false): void {
  const status = el<HTMLDivElement>('status');
  status.textContent = message;
  status.className = isError ? 'status error' : 'status';
}

function renderImage(screen: TaskScreen): string {
  if (!screen.definition.needsImage) return '';
  const { image_url, image_tags, image_id } = screen.item;
  if (image_url) {
    return `<img class="context-image" src="${image_url}" alt="image ${image_id}">`;
  }
  if (image_tags && image_tags.length > 0) {
    const tags = image_tags.map((t) => `<span class="tag">${t}</span>`).join(' ');
    return `<div class="tagbag"><span class="label">image concepts:</span> ${tags}</div>`;
  }
  return '<div class="tagbag muted">no image available</div>';
}

function renderScreen(): void {
  const session = state.session;
  const card = el<HTMLDivElement>('card');
  if (!session || session.screens.length === 0) {
    card.innerHTML = '<p class="muted">No items loaded. Pick a batch file to begin.</p>';
    el<HTMLButtonElement>('download').disabled = state.store.size === 0;
    return;
  }
  if (state.cursor >= session.screens.length) {
    card.innerHTML = `<h2>Session complete</h2>
      <p>${state.store.size} rating(s) recorded. Download the ratings file and send it back.</p>`;
    el<HTMLButtonElement>('download').disabled = false;
    return;
  }
  const screen = session.screens[state.cursor]!;
  const def = screen.definition;
  const existing = state.store.get(screen.item.item_id, session.annotatorId, def.kind);
  const options = def.options
    .map((o) => {
      const picked = existing && existing.value === o.value ? ' picked' : '';
      return `<button class="option${picked}" data-value="${JSON.stringify(o.value).replace(/"/g, '&quot;')}">
        <span class="value">${o.value}</span> <span class="anchor">${o.anchor}</span></button>`;
    })
    .join('');
  const answer = def.kind === 'label_consistency'
    ? `<p><span class="label">answer to judge:</span> ${screen.item.answer_before}</p>`
    : '';
  card.innerHTML = `
    <div class="progress">${state.cursor + 1} / ${session.screens.length}</div>
    <h2>${def.title}</h2>
    <p class="instructions">${def.instructions}</p>
    ${renderImage(screen)}
    <p><span class="label">original:</span> ${screen.item.original_question}</p>
    <p><span class="label">rewritten:</span> ${screen.item.adversarial_question}</p>
    ${answer}
    <div class="options">${options}</div>
    <div class="nav">
      <button id="back" ${state.cursor === 0 ? 'disabled' : ''}>back</button>
      <button id="skip">skip</button>
    </div>`;

  card.querySelectorAll<HTMLButtonElement>('.option').forEach((button) => {
    button.addEventListener('click', () => {
      const raw = JSON.parse(button.dataset.value!) as number | string;
      try {
        state.store.record(screen.item.item_id, session.annotatorId, def.kind, raw);
      } catch (err) {
        if (err instanceof ScaleError) {
          setStatus(err.message, true);
          return;
        }
        throw err;
      }
      state.cursor += 1;
      renderScreen();
    });
  });
  card.querySelector<HTMLButtonElement>('#back')?.addEventListener('click', () => {
    state.cursor = Math.max(0, state.cursor - 1);
    renderScreen();
  });
  card.querySelector<HTMLButtonElement>('#skip')?.addEventListener('click', () => {
    state.cursor += 1;
    renderScreen();
  });
}

function startSession(text: string): void {
  const annotatorId = el<HTMLInputElement>('annotator').value.trim();
  if (annotatorId === '') {
    setStatus('enter an annotator id first', true);
    return;
  }
  let items;
  try {
    items = parseBatch(text);
  } catch (err) {
    if (err instanceof BatchError) {
      setStatus(`could not load batch: ${err.message}`, true);
      return;
    }
    throw err;
  }
  state.session = buildSession(items, annotatorId);
  state.cursor = 0;
  const skipped = state.session.warnings.length;
  if (items.length === 0) {
    setStatus('the batch file is empty');
  } else {
    setStatus(`loaded ${state.session.screens.length} item(s)` +
      (skipped ? `, skipped ${skipped} without images` : ''));
  }
  state.session.warnings.forEach((w) => console.warn(w));
  renderScreen();
}

function downloadRatings(): void {
  const blob = new Blob([state.store.toJsonl()], { type: 'application/jsonl' });
  const anchor = document.createElement('a');
  anchor.href = URL.createObjectURL(blob);
  const who = state.session ? state.session.annotatorId : 'annotator';
  anchor.download = `ratings-${who}.jsonl`;
  anchor.click();
  URL.revokeObjectURL(anchor.href);
}

export function initApp(): void {
  el<HTMLInputElement>('batch-file').addEventListener('change', (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    file.text().then(startSession, (err) => setStatus(String(err), true));
  });
  el<HTMLButtonElement>('download').addEventListener('click', downloadRatings);
  renderScreen();
}

if (typeof document !== 'undefined' && document.getElementById('card')) {
  initApp();
}
