/**
 * Minimal SSE consumption over fetch streams with reconnect-and-replay.
 *
 * The server closes idle streams; we reconnect asking for everything after
 * the last sequence number we saw, and drop anything replayed below it, so
 * consumers observe each event exactly once, in order.
 */

import type { SessionEvent } from "./types.js";

export interface SseFrame {
  id?: number;
  event?: string;
  data?: string;
}

/** Incremental SSE parser; feed arbitrary chunk boundaries. */
export function createSseParser(): { push(chunk: string): SseFrame[] } {
  let buffer = "";
  let current: SseFrame = {};
  let dataLines: string[] = [];

  function finishFrame(frames: SseFrame[]) {
    if (dataLines.length > 0 || current.id !== undefined || current.event !== undefined) {
      if (dataLines.length > 0) {
        current.data = dataLines.join("\n");
      }
      frames.push(current);
    }
    current = {};
    dataLines = [];
  }

  return {
    push(chunk: string): SseFrame[] {
      buffer += chunk;
      const frames: SseFrame[] = [];
      let newlineIndex: number;
      while ((newlineIndex = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, newlineIndex).replace(/\r$/, "");
        buffer = buffer.slice(newlineIndex + 1);
        if (line === "") {
          finishFrame(frames);
        } else if (line.startsWith(":")) {
          continue; // comment / keep-alive
        } else if (line.startsWith("id:")) {
          current.id = Number(line.slice(3).trim());
        } else if (line.startsWith("event:")) {
          current.event = line.slice(6).trim();
        } else if (line.startsWith("data:")) {
          dataLines.push(line.slice(5).replace(/^ /, ""));
        }
      }
      return frames;
    },
  };
}

export interface EventStreamOptions {
  baseUrl: string;
  sessionId: string;
  after?: number;
  /** injectable for tests */
  fetchFn?: typeof fetch;
  /** pause between reconnects after an error, milliseconds */
  retryDelayMs?: number;
  /** maximum reconnect attempts after consecutive errors; Infinity by default */
  maxRetries?: number;
  signal?: AbortSignal;
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

/**
 * Consume a session's events until the session closes or the signal aborts.
 * onEvent sees each event exactly once, in sequence order.
 */
export async function consumeEvents(
  options: EventStreamOptions,
  onEvent: (ev: SessionEvent) => void,
): Promise<void> {
  const fetchFn = options.fetchFn ?? fetch;
  const retryDelayMs = options.retryDelayMs ?? 1000;
  const maxRetries = options.maxRetries ?? Number.POSITIVE_INFINITY;
  let cursor = options.after ?? 0;
  let consecutiveErrors = 0;

  while (!options.signal?.aborted) {
    let response: Response;
    try {
      response = await fetchFn(
        `${options.baseUrl}/sessions/${options.sessionId}/events?after=${cursor}`,
        { signal: options.signal },
      );
    } catch (err) {
      if (options.signal?.aborted) return;
      if (++consecutiveErrors > maxRetries) throw err;
      await sleep(retryDelayMs);
      continue;
    }
    if (!response.ok) {
      if (++consecutiveErrors > maxRetries) {
        throw new Error(`event stream failed: HTTP ${response.status}`);
      }
      await sleep(retryDelayMs);
      continue;
    }
    consecutiveErrors = 0;
    const parser = createSseParser();

    const processChunk = (text: string): boolean => {
      for (const frame of parser.push(text)) {
        if (!frame.data) continue;
        const ev = JSON.parse(frame.data) as SessionEvent;
        if (ev.seq <= cursor) continue; // replayed after reconnect
        cursor = ev.seq;
        onEvent(ev);
        if (ev.type === "closed") return true;
      }
      return false;
    };

    const body = response.body;
    if (!body) {
      // non-streaming fetch implementation: parse the whole text at once
      if (processChunk(await response.text())) return;
      continue;
    }
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let closedSeen = false;

    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        if (processChunk(decoder.decode(value, { stream: true }))) {
          closedSeen = true;
          break;
        }
      }
    } catch {
      if (options.signal?.aborted) return;
      // stream broke mid-read: fall through to reconnect
    } finally {
      reader.releaseLock();
    }
    if (closedSeen) return;
    // idle timeout or disconnect: reconnect and replay from the cursor
  }
}
