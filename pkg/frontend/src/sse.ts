// Minimal server-sent-events reader over fetch streaming. One
// implementation serves both the browser and node-based tests, so the
// console needs no EventSource polyfill.

export interface SseOptions {
  fetchFn?: typeof fetch;
  signal?: AbortSignal;
}

export async function* readSse(
  url: string,
  options: SseOptions = {},
): AsyncGenerator<string, void, void> {
  const fetchFn = options.fetchFn ?? fetch;
  const response = await fetchFn(url, {
    headers: { accept: "text/event-stream" },
    signal: options.signal,
  });
  if (!response.ok || response.body === null) {
    throw new Error(`trace stream unavailable: ${response.status}`);
  }
  const reader = response.body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done) {
        break;
      }
      buffer += decoder.decode(value, { stream: true });
      for (;;) {
        const boundary = buffer.indexOf("\n\n");
        if (boundary < 0) {
          break;
        }
        const frame = buffer.slice(0, boundary);
        buffer = buffer.slice(boundary + 2);
        for (const line of frame.split("\n")) {
          if (line.startsWith("data: ")) {
            yield line.slice("data: ".length);
          }
        }
      }
    }
  } finally {
    reader.releaseLock();
  }
}
