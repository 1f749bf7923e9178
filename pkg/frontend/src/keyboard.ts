/** Keyboard shortcuts for the slice viewer: arrows scrub the active view,
 * A accepts, R rejects. Everything else is left to the browser. */

import type { Verdict } from './types.js';

export type Intent =
  | { kind: 'scrub'; delta: 1 | -1 }
  | { kind: 'verdict'; verdict: Verdict };

export function keyIntent(key: string): Intent | null {
  switch (key) {
    case 'ArrowRight':
    case 'ArrowUp':
      return { kind: 'scrub', delta: 1 };
    case 'ArrowLeft':
    case 'ArrowDown':
      return { kind: 'scrub', delta: -1 };
    case 'a':
    case 'A':
      return { kind: 'verdict', verdict: 'accepted' };
    case 'r':
    case 'R':
      return { kind: 'verdict', verdict: 'rejected' };
    default:
      return null;
  }
}

/** True when the event originates inside a form control, where keys must
 * keep their native meaning (typing a note, nudging a slider). */
export function isFormTarget(target: EventTarget | null): boolean {
  const tag = (target as { tagName?: unknown } | null)?.tagName;
  return tag === 'INPUT' || tag === 'TEXTAREA' || tag === 'SELECT';
}
