// Trailing debounce: the callback fires once per quiet period, no matter
// how many times the input changed within it.

export interface Debouncer {
  schedule(): void;
  cancel(): void;
  flush(): void;
}

export function createDebouncer(quietMs: number, fn: () => void): Debouncer {
  let timer: ReturnType<typeof setTimeout> | null = null;
  return {
    schedule() {
      if (timer !== null) {
        clearTimeout(timer);
      }
      timer = setTimeout(() => {
        timer = null;
        fn();
      }, quietMs);
    },
    cancel() {
      if (timer !== null) {
        clearTimeout(timer);
        timer = null;
      }
    },
    flush() {
      if (timer !== null) {
        clearTimeout(timer);
        timer = null;
        fn();
      }
    },
  };
}
