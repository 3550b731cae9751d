// Views render to HTML strings; everything user-controlled passes through
// esc() on the way in.

export function esc(value: unknown): string {
  return String(value ?? "")
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export function attr(value: unknown): string {
  return `"${esc(value)}"`;
}
