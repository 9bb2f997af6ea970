// Payload shapes of the grading-service HTTP API. The service never pairs a
// system name with an answer while a session is open; answers arrive under
// opaque blind keys only.

export interface Progress {
  done: number;
  total: number;
}

export interface PendingAnswer {
  item_id: string;
  question: string;
  context: string;
  blind_key: string;
  answer: string;
}

export interface NextResponse {
  state: 'open' | 'complete';
  progress: Progress;
  complete: boolean;
  item?: PendingAnswer;
}

export interface LabelResponse {
  ok: boolean;
  progress: Progress;
}

// Grading categories in presentation order (worst to best); keyboard keys
// 1-4 map onto this order.
export const CATEGORIES = [
  'incorrect',
  'partially_incorrect',
  'correct_incomplete',
  'correct',
] as const;

export type Category = (typeof CATEGORIES)[number];

export const CATEGORY_LABELS: Record<Category, string> = {
  incorrect: 'Incorrect',
  partially_incorrect: 'Partially incorrect',
  correct_incomplete: 'Correct but incomplete',
  correct: 'Correct',
};
