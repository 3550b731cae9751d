// Pure view-model builders and HTML renderers. Builders fetch exactly what
// the page needs from the API and return plain data; renderers turn that
// data into markup. Tests exercise the builders without a browser.

import {
  FacetsResponse,
  HubApi,
  OverviewStats,
  SearchQuery,
  SearchResponse,
  StudyCard,
  StudyDetail,
} from "./api";
import { esc } from "./html";
import { PAGE_SIZE, encodeSearchState } from "./state";

// -- stats banner ------------------------------------------------------------

export const STAT_LABELS: [keyof OverviewStats, string][] = [
  ["searchable_studies", "Searchable studies"],
  ["connected_repositories", "Connected data repositories"],
  ["registered_studies", "Registered studies"],
  ["studies_with_slmd", "Studies with study-level metadata"],
  ["studies_with_vlmd", "Studies with variable-level metadata"],
  ["available_datasets", "Available datasets"],
];

export async function statsBanner(api: HubApi): Promise<OverviewStats> {
  return api.stats();
}

export function renderStatsBanner(stats: OverviewStats): string {
  const cells = STAT_LABELS.map(
    ([key, label]) => `
      <div class="stat">
        <div class="stat-value" data-stat="${key}">${stats[key].toLocaleString("en-US")}</div>
        <div class="stat-label">${esc(label)}</div>
      </div>`,
  );
  return `<section class="stats-banner">${cells.join("")}</section>`;
}

// -- search page ---------------------------------------------------------------

export interface SearchPageModel {
  query: SearchQuery;
  response: SearchResponse;
  facets: FacetsResponse;
}

export async function searchPage(api: HubApi, query: SearchQuery): Promise<SearchPageModel> {
  const [response, facets] = await Promise.all([
    api.search({ ...query, limit: query.limit ?? PAGE_SIZE }),
    api.facets(query.facets),
  ]);
  return { query, response, facets };
}

export function stateBadge(state: string | null): string {
  const value = state ?? "UNREGISTERED";
  return `<span class="badge badge-${esc(value.toLowerCase())}">${esc(value)}</span>`;
}

export function renderCard(card: StudyCard): string {
  const title = card.title ?? card.guid;
  const chips = [
    card.repository ? `<span class="chip">${esc(card.repository)}</span>` : "",
    ...card.blocks
      .filter((b) => ["slmd", "vlmd", "registry_source"].includes(b))
      .map((b) => `<span class="chip chip-block">${esc(b)}</span>`),
  ].join("");
  return `
    <article class="card" data-guid="${esc(card.guid)}">
      <a href="#/study/${esc(card.guid)}" class="card-title">${esc(title)}</a>
      ${stateBadge(card.state)}
      <div class="chips">${chips}</div>
    </article>`;
}

export function renderSearchPage(model: SearchPageModel): string {
  const { query, response, facets } = model;
  const selected = query.facets ?? {};
  const sidebar = facets.facets
    .map((facet) => {
      const counts = facets.counts[facet] ?? {};
      const rows = Object.entries(counts)
        .sort((a, b) => b[1] - a[1] || a[0].localeCompare(b[0]))
        .slice(0, 12)
        .map(([value, count]) => {
          const active = (selected[facet] ?? []).includes(value);
          return `
            <li>
              <button class="facet-value${active ? " active" : ""}"
                      data-facet="${esc(facet)}" data-value="${esc(value)}">
                ${esc(value)} <span class="count">${count}</span>
              </button>
            </li>`;
        })
        .join("");
      return `<div class="facet"><h3>${esc(facet.replaceAll("_", " "))}</h3><ul>${rows}</ul></div>`;
    })
    .join("");

  const cards = response.results.map(renderCard).join("") ||
    `<p class="empty">No studies match.</p>`;
  const offset = query.offset ?? 0;
  const prev = offset > 0
    ? `<a class="page-link" href="${esc(encodeSearchState({ ...query, offset: Math.max(0, offset - PAGE_SIZE) }))}">&laquo; previous</a>`
    : "";
  const next = offset + PAGE_SIZE < response.total
    ? `<a class="page-link" href="${esc(encodeSearchState({ ...query, offset: offset + PAGE_SIZE }))}">next &raquo;</a>`
    : "";
  return `
    <div class="search-layout">
      <aside class="facets">${sidebar}</aside>
      <section class="results">
        <form id="search-form">
          <input id="search-text" type="search" placeholder="Search studies, variables, CDEs"
                 value="${esc(query.text ?? "")}" />
          <button type="submit">Search</button>
        </form>
        <p class="total">${response.total.toLocaleString("en-US")} studies</p>
        ${cards}
        <nav class="pager">${prev} ${next}</nav>
      </section>
    </div>`;
}

// -- study detail -----------------------------------------------------------------

const BLOCK_TITLES: Record<string, string> = {
  grant_source: "Grant information",
  registry_source: "Trial registry",
  slmd: "Study-level metadata",
  vlmd: "Data dictionary",
  repository: "Repository",
  registration: "Registration",
};

function renderTree(value: unknown): string {
  if (value === null || value === undefined) return `<span class="null">&mdash;</span>`;
  if (Array.isArray(value)) {
    if (value.length === 0) return `<span class="null">&mdash;</span>`;
    return `<ul>${value.map((v) => `<li>${renderTree(v)}</li>`).join("")}</ul>`;
  }
  if (typeof value === "object") {
    const rows = Object.entries(value as Record<string, unknown>)
      .map(([k, v]) => `<tr><th>${esc(k.replaceAll("_", " "))}</th><td>${renderTree(v)}</td></tr>`)
      .join("");
    return `<table class="kv">${rows}</table>`;
  }
  return esc(value);
}

export function renderStudyDetail(detail: StudyDetail): string {
  const { study, document } = detail;
  const payload = document.payload ?? {};
  const order = ["grant_source", "registry_source", "slmd", "vlmd", "repository", "registration"];
  const blocks = order
    .filter((name) => name in payload)
    .map((name) => `
      <section class="block">
        <h3>${esc(BLOCK_TITLES[name] ?? name)}</h3>
        ${renderTree((payload as Record<string, unknown>)[name])}
      </section>`)
    .join("");
  const actions: string[] = [];
  if (study.state === "UNREGISTERED") {
    actions.push(`<a class="button" href="#/claim/${esc(study.guid)}">Claim this study</a>`);
  } else {
    actions.push(`<a class="button" href="#/slmd/${esc(study.guid)}">
      ${"slmd" in payload ? "Update study-level metadata" : "Submit study-level metadata"}</a>`);
  }
  return `
    <article class="study-detail" data-guid="${esc(study.guid)}">
      <a href="#/search">&laquo; back to search</a>
      <h2>${esc(study.guid)}</h2>
      <p>Award ${esc(study.award_number)} ${stateBadge(study.state)}</p>
      <div class="actions">${actions.join("")}</div>
      ${blocks}
      <p class="doc-meta">document version ${document.version}</p>
    </article>`;
}
