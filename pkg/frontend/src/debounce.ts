/** Trailing-edge debounce used to rate-limit /analyze while the user types. */

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  /** Drop the pending invocation, if any. */
  cancel(): void;
}

/**
 * Returns a wrapper that invokes `fn` once `delayMs` has elapsed without a
 * newer call. Continuous input therefore produces no calls until it pauses,
 * which bounds request volume at one per `delayMs` in the worst case.
 */
export function debounce<A extends unknown[]>(fn: (...args: A) => void, delayMs: number): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | undefined;

  const wrapper = (...args: A): void => {
    if (timer !== undefined) {
      clearTimeout(timer);
    }
    timer = setTimeout(() => {
      timer = undefined;
      fn(...args);
    }, delayMs);
  };

  wrapper.cancel = (): void => {
    if (timer !== undefined) {
      clearTimeout(timer);
      timer = undefined;
    }
  };

  return wrapper;
}
