import { AnnotationItem, TASK_DEFINITIONS, TaskScreen } from './types.js';

/** FNV-1a over the annotator id: a stable, platform-independent seed. */
export function hashString(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** mulberry32: small deterministic PRNG, good enough for shuffling. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function shuffled<T>(items: T[], rand: () => number): T[] {
  const out = items.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    const a = out[i]!;
    out[i] = out[j]!;
    out[j] = a;
  }
  return out;
}

export interface Session {
  annotatorId: string;
  screens: TaskScreen[];
  /** Items dropped at load time, e.g. no image for a with-image task. */
  warnings: string[];
}

function hasImage(item: AnnotationItem): boolean {
  return (item.image_tags !== undefined && item.image_tags.length > 0) ||
    item.image_url !== undefined;
}

/**
 * Build one annotator's session: every usable item as a screen, presented in
 * an order randomized per annotator (seeded by the annotator id so a reload
 * shows the same order).
 */
export function buildSession(items: AnnotationItem[], annotatorId: string): Session {
  if (annotatorId.trim() === '') {
    throw new Error('annotator id must not be empty');
  }
  const warnings: string[] = [];
  const screens: TaskScreen[] = [];
  for (const item of items) {
    const definition = TASK_DEFINITIONS[item.task];
    if (definition.requiresImage && !hasImage(item)) {
      warnings.push(`skipped ${item.item_id}: task needs an image but the item has none`);
      continue;
    }
    screens.push({ item, definition });
  }
  const rand = mulberry32(hashString(annotatorId));
  return { annotatorId, screens: shuffled(screens, rand), warnings };
}
