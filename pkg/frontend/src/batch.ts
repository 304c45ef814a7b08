import { AnnotationItem, TASK_KINDS, TaskKind } from './types.js';

export class BatchError extends Error {}

const REQUIRED_FIELDS = [
  'item_id',
  'image_id',
  'task',
  'original_question',
  'adversarial_question',
] as const;

function validateItem(raw: unknown, where: string): AnnotationItem {
  if (typeof raw !== 'object' || raw === null || Array.isArray(raw)) {
    throw new BatchError(`${where}: expected a JSON object`);
  }
  const obj = raw as Record<string, unknown>;
  for (const field of REQUIRED_FIELDS) {
    if (typeof obj[field] !== 'string' || obj[field] === '') {
      throw new BatchError(`${where}: missing or empty field "${field}"`);
    }
  }
  if (!TASK_KINDS.includes(obj.task as TaskKind)) {
    throw new BatchError(`${where}: unknown task "${String(obj.task)}"`);
  }
  if (obj.image_tags !== undefined && !Array.isArray(obj.image_tags)) {
    throw new BatchError(`${where}: image_tags must be a list`);
  }
  return {
    item_id: obj.item_id as string,
    image_id: obj.image_id as string,
    task: obj.task as TaskKind,
    original_question: obj.original_question as string,
    adversarial_question: obj.adversarial_question as string,
    answer_before: typeof obj.answer_before === 'string' ? obj.answer_before : '',
    answer_after: typeof obj.answer_after === 'string' ? obj.answer_after : '',
    image_tags: obj.image_tags as string[] | undefined,
    image_url: typeof obj.image_url === 'string' ? obj.image_url : undefined,
  };
}

/** Parse a batch JSONL file; any malformed line is a load error. */
export function parseBatch(text: string): AnnotationItem[] {
  const items: AnnotationItem[] = [];
  const seen = new Set<string>();
  const lines = text.split('\n');
  for (let i = 0; i < lines.length; i++) {
    const line = (lines[i] ?? '').trim();
    if (line === '') continue;
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch (err) {
      throw new BatchError(`line ${i + 1}: invalid JSON (${String(err)})`);
    }
    const item = validateItem(raw, `line ${i + 1}`);
    if (seen.has(item.item_id)) {
      throw new BatchError(`line ${i + 1}: duplicate item_id "${item.item_id}"`);
    }
    seen.add(item.item_id);
    items.push(item);
  }
  return items;
}
