/**
 * Incremental server-sent-events parser.
 *
 * The browser's EventSource cannot attach an Authorization header, and
 * putting the token in the URL is forbidden, so the stream is read with
 * fetch() and parsed here. Feed decoded text chunks in any split; the
 * parser emits each complete event's data payload and ignores comment
 * (keepalive) lines.
 */

export class SseParser {
  private buffer = "";
  private dataLines: string[] = [];

  /** Returns the data payloads of every event completed by this chunk. */
  feed(chunk: string): string[] {
    this.buffer += chunk;
    const events: string[] = [];
    for (;;) {
      const nl = this.buffer.indexOf("\n");
      if (nl < 0) break;
      let line = this.buffer.slice(0, nl);
      this.buffer = this.buffer.slice(nl + 1);
      if (line.endsWith("\r")) line = line.slice(0, -1);
      if (line === "") {
        if (this.dataLines.length) {
          events.push(this.dataLines.join("\n"));
          this.dataLines = [];
        }
      } else if (line.startsWith(":")) {
        // comment / keepalive
      } else if (line.startsWith("data:")) {
        this.dataLines.push(line.slice(5).replace(/^ /, ""));
      }
      // Other fields (event:, id:, retry:) are not used by this platform.
    }
    return events;
  }
}
