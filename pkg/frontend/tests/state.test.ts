import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, QuestionPayload, ScoreResponse } from "../src/api.js";
import { EditorSession } from "../src/state.js";
import { mockScore, mockSuggest } from "./helpers.js";

interface Deferred<T> {
  promise: Promise<T>;
  resolve: (value: T) => void;
  reject: (err: Error) => void;
}

function deferred<T>(): Deferred<T> {
  let resolve!: (value: T) => void;
  let reject!: (err: Error) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

class FakeClient {
  scoreCalls: QuestionPayload[] = [];
  pending: Deferred<ScoreResponse>[] = [];
  manual = false;

  score(question: QuestionPayload): Promise<ScoreResponse> {
    this.scoreCalls.push(question);
    if (!this.manual) {
      return Promise.resolve(mockScore(question));
    }
    const d = deferred<ScoreResponse>();
    this.pending.push(d);
    return d.promise;
  }

  suggest(question: QuestionPayload) {
    return Promise.resolve(mockSuggest(question));
  }

  uplift() {
    return Promise.reject(new Error("no uplift in fake"));
  }

  health() {
    return Promise.resolve({ bundle_version: "mock-1", has_uplift: false });
  }
}

const flushMicrotasks = () => Promise.resolve().then(() => Promise.resolve());

describe("EditorSession scoring loop", () => {
  let client: FakeClient;
  let session: EditorSession;

  beforeEach(() => {
    vi.useFakeTimers();
    client = new FakeClient();
    session = new EditorSession(client as unknown as ApiClient, { quietMs: 300 });
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("issues exactly one request per quiet period while typing", async () => {
    for (const text of ["w", "wh", "whe", "wher", "where is my refund"]) {
      session.setSummary(text);
      vi.advanceTimersByTime(100); // keeps typing inside the quiet period
    }
    expect(client.scoreCalls.length).toBe(0);
    vi.advanceTimersByTime(300);
    await flushMicrotasks();
    expect(client.scoreCalls.length).toBe(1);
    expect(client.scoreCalls[0].summary).toBe("where is my refund");

    session.setSummary("where is my refund now");
    vi.advanceTimersByTime(300);
    await flushMicrotasks();
    expect(client.scoreCalls.length).toBe(2);
  });

  it("never issues requests for invalid input", () => {
    session.setSummary("");
    vi.advanceTimersByTime(1000);
    expect(client.scoreCalls.length).toBe(0);
    expect(session.validationError).toMatch(/required/);

    session.setSummary("x".repeat(171));
    vi.advanceTimersByTime(1000);
    expect(client.scoreCalls.length).toBe(0);
    expect(session.validationError).toMatch(/over the 170/);
  });

  it("typing during flight invalidates the earlier response", async () => {
    client.manual = true;
    session.setSummary("first version");
    vi.advanceTimersByTime(300);
    expect(client.pending.length).toBe(1);

    session.setSummary("second version");
    vi.advanceTimersByTime(300);
    expect(client.pending.length).toBe(2);

    // older response lands after the newer one: it must be dropped
    client.pending[1].resolve(mockScore(client.scoreCalls[1]));
    await flushMicrotasks();
    const applied = session.score!.probability;
    client.pending[0].resolve(mockScore(client.scoreCalls[0]));
    await flushMicrotasks();
    expect(session.score!.probability).toBe(applied);
    expect(session.scoreStale).toBe(false);
  });

  it("keeps the last good score marked stale on service error", async () => {
    session.setSummary("a valid question");
    vi.advanceTimersByTime(300);
    await flushMicrotasks();
    const good = session.score!.probability;

    client.manual = true;
    session.setSummary("a valid question edited");
    vi.advanceTimersByTime(300);
    client.pending[0].reject(new Error("boom"));
    await flushMicrotasks();
    expect(session.serviceError).toMatch(/boom/);
    expect(session.score!.probability).toBe(good);
    expect(session.scoreStale).toBe(true);
  });

  it("score always corresponds to displayed text after settling", async () => {
    session.setSummary("stable question text");
    vi.advanceTimersByTime(300);
    await flushMicrotasks();
    await flushMicrotasks();
    expect(session.score!.probability).toBe(
      mockScore({ summary: "stable question text", details: null, week: 1, platform: "online", product_version: "deluxe" }).probability,
    );
    expect(session.scoreStale).toBe(false);
  });
});

describe("EditorSession suggestions and undo", () => {
  let client: FakeClient;
  let session: EditorSession;

  beforeEach(() => {
    vi.useFakeTimers();
    client = new FakeClient();
    session = new EditorSession(client as unknown as ApiClient, { quietMs: 300 });
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  async function settle(text: string) {
    session.setSummary(text);
    vi.advanceTimersByTime(300);
    await flushMicrotasks();
    await flushMicrotasks();
  }

  it("applies a fresh suggestion and rescores", async () => {
    await settle("my refund is late. i filed in january");
    expect(session.suggestions).not.toBeNull();
    const suggestion = session.suggestions!.items[0];
    const before = session.snapshot();

    const result = session.applySuggestion(suggestion);
    expect(result.ok).toBe(true);
    expect(session.summary).toBe(suggestion.summary);
    expect(session.score!.probability).toBe(suggestion.score);
    expect(session.history.at(-1)!.label).toBe(suggestion.kind);

    // a second apply of the old (now stale) suggestion is rejected
    const again = session.applySuggestion(before.suggestions!.items[0]);
    expect(again.ok).toBe(false);
    if (!again.ok) {
      expect(again.reason).toBe("stale");
    }
  });

  it("undo restores prior text and score exactly", async () => {
    await settle("my refund is late. i filed in january");
    const before = session.snapshot();
    const suggestion = session.suggestions!.items[0];
    session.applySuggestion(suggestion);
    await flushMicrotasks();

    expect(session.undo()).toBe(true);
    expect(session.summary).toBe(before.summary);
    expect(session.details).toBe(before.details);
    expect(session.score).toEqual(before.score);
    expect(session.suggestions).toEqual(before.suggestions);
    expect(session.canUndo).toBe(false);
  });

  it("history is append-only across edits, applies, and undo", async () => {
    await settle("my refund is late. i filed in january");
    const len1 = session.history.length;
    session.applySuggestion(session.suggestions!.items[0]);
    await flushMicrotasks();
    const len2 = session.history.length;
    expect(len2).toBeGreaterThan(len1);
    session.undo();
    expect(session.history.length).toBeGreaterThan(len2);
    const seqs = session.history.map((h) => h.seq);
    expect([...seqs].sort((a, b) => a - b)).toEqual(seqs);
  });

  it("suggestion from a different text is rejected as stale", async () => {
    await settle("my refund is late. i filed in january");
    const stale = session.suggestions!.items[0];
    session.setSummary("totally different text now");
    const result = session.applySuggestion(stale);
    expect(result.ok).toBe(false);
  });
});
