// Search-page state lives in the URL hash so results are shareable links.
// #/search?text=pain&facet.repository=repoA&offset=20

import { SearchQuery } from "./api";

export const PAGE_SIZE = 20;

export function encodeSearchState(query: SearchQuery): string {
  const params = new URLSearchParams();
  if (query.text) params.set("text", query.text);
  for (const [facet, values] of Object.entries(query.facets ?? {})) {
    for (const value of values) params.append(`facet.${facet}`, value);
  }
  if (query.offset) params.set("offset", String(query.offset));
  const qs = params.toString();
  return qs ? `#/search?${qs}` : "#/search";
}

export function decodeSearchState(hash: string): SearchQuery {
  const query: SearchQuery = { facets: {}, limit: PAGE_SIZE, offset: 0 };
  const qIndex = hash.indexOf("?");
  if (qIndex < 0) return query;
  const params = new URLSearchParams(hash.slice(qIndex + 1));
  for (const [key, value] of params.entries()) {
    if (key === "text" && value) query.text = value;
    else if (key === "offset") query.offset = Math.max(0, parseInt(value, 10) || 0);
    else if (key.startsWith("facet.")) {
      const facet = key.slice("facet.".length);
      (query.facets![facet] ??= []).push(value);
    }
  }
  return query;
}

export function toggleFacet(query: SearchQuery, facet: string, value: string): SearchQuery {
  const facets: Record<string, string[]> = {};
  for (const [name, values] of Object.entries(query.facets ?? {})) {
    facets[name] = [...values];
  }
  const current = facets[facet] ?? [];
  facets[facet] = current.includes(value)
    ? current.filter((v) => v !== value)
    : [...current, value];
  if (facets[facet].length === 0) delete facets[facet];
  return { ...query, facets, offset: 0 };
}
