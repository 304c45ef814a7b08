/** Schemas shared with the attack harness: annotation batches in, ratings out. */

export type TaskKind =
  | 'similarity_no_image'
  | 'similarity_with_image'
  | 'grammaticality'
  | 'label_consistency';

export const TASK_KINDS: readonly TaskKind[] = [
  'similarity_no_image',
  'similarity_with_image',
  'grammaticality',
  'label_consistency',
];

/** One line of the batch JSONL produced by the export tool. */
export interface AnnotationItem {
  item_id: string;
  image_id: string;
  task: TaskKind;
  original_question: string;
  adversarial_question: string;
  answer_before: string;
  answer_after: string;
  /** Toy visual stand-in: concept tags shown when the task needs the image. */
  image_tags?: string[];
  /** Optional real image for deployments that have one. */
  image_url?: string;
}

/** One line of the ratings JSONL consumed by the aggregator. */
export interface Rating {
  item_id: string;
  annotator_id: string;
  task: TaskKind;
  value: number | string;
}

export interface ScaleOption {
  value: number | string;
  anchor: string;
}

export interface TaskDefinition {
  kind: TaskKind;
  title: string;
  instructions: string;
  needsImage: boolean;
  /** Skip the item (with a warning) when the image is missing. */
  requiresImage: boolean;
  options: ScaleOption[];
}

export const TASK_DEFINITIONS: Record<TaskKind, TaskDefinition> = {
  similarity_no_image: {
    kind: 'similarity_no_image',
    title: 'Semantic similarity (text only)',
    instructions:
      'Do the two questions still have the same meaning? Rate from 1 to 4.',
    needsImage: false,
    requiresImage: false,
    options: [
      { value: 1, anchor: 'One text means something completely different' },
      { value: 2, anchor: 'The meanings differ in important ways' },
      { value: 3, anchor: 'The meanings are mostly the same' },
      { value: 4, anchor: 'They have exactly the same meaning' },
    ],
  },
  similarity_with_image: {
    kind: 'similarity_with_image',
    title: 'Semantic similarity (with image)',
    instructions:
      'Looking at the image, do the two questions still have the same meaning? Rate from 1 to 4.',
    needsImage: true,
    requiresImage: true,
    options: [
      { value: 1, anchor: 'One text means something completely different' },
      { value: 2, anchor: 'The meanings differ in important ways' },
      { value: 3, anchor: 'The meanings are mostly the same' },
      { value: 4, anchor: 'They have exactly the same meaning' },
    ],
  },
  grammaticality: {
    kind: 'grammaticality',
    title: 'Grammaticality',
    instructions:
      'Is the rewritten question fluent and grammatical? Rate from 1 to 5.',
    needsImage: false,
    requiresImage: false,
    options: [
      { value: 1, anchor: 'Not understandable' },
      { value: 2, anchor: 'Hard to understand, serious errors' },
      { value: 3, anchor: 'Understandable but clearly flawed' },
      { value: 4, anchor: 'Minor flaws only' },
      { value: 5, anchor: 'Everything is perfect; could have been produced by a native speaker' },
    ],
  },
  label_consistency: {
    kind: 'label_consistency',
    title: 'Label consistency',
    instructions:
      'Given the rewritten question, is the original answer still correct?',
    needsImage: true,
    requiresImage: false,
    options: [
      { value: 'yes', anchor: '1 - Yes, answer is correct' },
      { value: 'no', anchor: '2 - No, answer is incorrect' },
      { value: 'unsure', anchor: '3 - Unsure' },
    ],
  },
};

/** A renderable unit: one item under one task definition. */
export interface TaskScreen {
  item: AnnotationItem;
  definition: TaskDefinition;
}

export function isValidValue(task: TaskKind, value: number | string): boolean {
  return TASK_DEFINITIONS[task].options.some((o) => o.value === value);
}
