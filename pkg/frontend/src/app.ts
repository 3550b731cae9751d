// Hash-routed single-page portal. Routes:
//   #/search?...   #/study/{guid}   #/claim/{guid}   #/slmd/{guid}   #/login

import { ApiError, HubApi } from "./api";
import { esc } from "./html";
import { claimSucceededMarkup, renderClaimPage, renderSlmdForm } from "./forms";
import { login, logout, requireToken, session } from "./session";
import {
  buildPayload,
  clientValidate,
  FormValues,
  mapServerViolations,
  SLMD_FIELDS,
} from "./slmd";
import { decodeSearchState, encodeSearchState, toggleFacet } from "./state";
import {
  renderSearchPage,
  renderStatsBanner,
  renderStudyDetail,
  searchPage,
  statsBanner,
} from "./views";

declare global {
  interface Window {
    MESHHUB_API_BASE?: string;
  }
}

const api = new HubApi(window.MESHHUB_API_BASE ?? "");

function root(): HTMLElement {
  return document.getElementById("app")!;
}

function headerBar(): string {
  const user = session().userId;
  const who = user
    ? `<span>${esc(user)}</span> <button id="logout">log out</button>`
    : `<a href="#/login">log in</a>`;
  return `
    <header class="topbar">
      <a class="brand" href="#/search">meshhub portal</a>
      <nav>${who}</nav>
    </header>`;
}

function banner(message: string): string {
  return `<div class="error banner">${esc(message)}</div>`;
}

function bindHeader(): void {
  document.getElementById("logout")?.addEventListener("click", () => {
    logout();
    render();
  });
}

async function showSearch(hash: string): Promise<void> {
  const query = decodeSearchState(hash);
  try {
    const [stats, model] = await Promise.all([statsBanner(api), searchPage(api, query)]);
    root().innerHTML =
      headerBar() + renderStatsBanner(stats) + renderSearchPage(model);
  } catch (error) {
    root().innerHTML = headerBar() + banner(`API unavailable: ${error}`);
    bindHeader();
    return;
  }
  bindHeader();
  for (const button of root().querySelectorAll<HTMLButtonElement>(".facet-value")) {
    button.addEventListener("click", () => {
      const next = toggleFacet(query, button.dataset.facet!, button.dataset.value!);
      location.hash = encodeSearchState(next);
    });
  }
  document.getElementById("search-form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = (document.getElementById("search-text") as HTMLInputElement).value;
    location.hash = encodeSearchState({ ...query, text: text || undefined, offset: 0 });
  });
}

async function showStudy(guid: string): Promise<void> {
  try {
    const detail = await api.study(guid);
    root().innerHTML = headerBar() + renderStudyDetail(detail);
  } catch (error) {
    root().innerHTML = headerBar() + banner(`cannot load study: ${error}`);
  }
  bindHeader();
}

async function showClaim(guid: string): Promise<void> {
  if (!session().token) {
    location.hash = `#/login?next=${encodeURIComponent(`#/claim/${guid}`)}`;
    return;
  }
  const detail = await api.study(guid);
  root().innerHTML = headerBar() + renderClaimPage(guid, detail.study.state);
  bindHeader();
  const form = document.getElementById("claim-form") as HTMLFormElement;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const tokenInput = document.getElementById("claim-token") as HTMLInputElement;
    const submit = document.getElementById("claim-submit") as HTMLButtonElement;
    submit.disabled = true;
    try {
      const study = await api.claim(guid, tokenInput.value, requireToken());
      // badge flips in place; no reload
      document.getElementById("claim-state")!.innerHTML = claimSucceededMarkup(study);
      form.outerHTML = `<p class="success">Claimed. <a href="#/study/${esc(guid)}">Back to the study</a>
        or <a href="#/slmd/${esc(guid)}">submit study-level metadata</a>.</p>`;
    } catch (error) {
      const message = error instanceof ApiError ? error.body.message : String(error);
      root().innerHTML = headerBar() +
        renderClaimPage(guid, detail.study.state, message);
      bindHeader();
      showClaimBindings(guid);
    }
  });
}

function showClaimBindings(guid: string): void {
  // re-arm the form after an error rerender
  const form = document.getElementById("claim-form");
  form?.addEventListener("submit", (event) => {
    event.preventDefault();
    void showClaim(guid);
  }, { once: true });
}

function readFormValues(): FormValues {
  const values: FormValues = {};
  for (const field of SLMD_FIELDS) {
    const el = document.querySelector<HTMLElement>(`[data-path="${field.path}"]`);
    if (!el) continue;
    if (field.kind === "checkbox") values[field.path] = (el as HTMLInputElement).checked;
    else values[field.path] = (el as HTMLInputElement | HTMLTextAreaElement).value;
  }
  return values;
}

async function showSlmd(guid: string, values: FormValues = {}): Promise<void> {
  if (!session().token) {
    location.hash = `#/login?next=${encodeURIComponent(`#/slmd/${guid}`)}`;
    return;
  }
  root().innerHTML = headerBar() + renderSlmdForm(guid, values, {});
  bindHeader();
  bindSlmdSubmit(guid);
}

function bindSlmdSubmit(guid: string): void {
  document.getElementById("slmd-form")!.addEventListener("submit", async (event) => {
    event.preventDefault();
    const values = readFormValues();
    const clientErrors = clientValidate(values);
    if (Object.keys(clientErrors).length > 0) {
      root().innerHTML = headerBar() + renderSlmdForm(guid, values, clientErrors);
      bindHeader();
      bindSlmdSubmit(guid);
      return;
    }
    root().innerHTML = headerBar() + renderSlmdForm(guid, values, {}, [], true);
    bindHeader();
    try {
      await api.submitSlmd(guid, buildPayload(values), requireToken());
      location.hash = `#/study/${guid}`;
    } catch (error) {
      if (error instanceof ApiError && error.body.violations) {
        const { fields, general } = mapServerViolations(error.body.violations);
        root().innerHTML = headerBar() + renderSlmdForm(guid, values, fields, general);
      } else if (error instanceof ApiError && error.status === 401) {
        logout();
        location.hash = `#/login?next=${encodeURIComponent(`#/slmd/${guid}`)}`;
        return;
      } else {
        root().innerHTML = headerBar() +
          renderSlmdForm(guid, values, {}, [String(error)]);
      }
      bindHeader();
      bindSlmdSubmit(guid);
    }
  });
}

async function showLogin(hash: string): Promise<void> {
  const next = new URLSearchParams(hash.split("?")[1] ?? "").get("next") ?? "#/search";
  root().innerHTML = headerBar() + `
    <article class="login-page">
      <h2>Log in</h2>
      <form id="login-form">
        <label>Username <input id="login-user" required /></label>
        <button type="submit">Log in with mock IdP</button>
      </form>
    </article>`;
  bindHeader();
  document.getElementById("login-form")!.addEventListener("submit", async (event) => {
    event.preventDefault();
    const username = (document.getElementById("login-user") as HTMLInputElement).value;
    try {
      await login(api, username.trim());
      location.hash = next;
      render();
    } catch (error) {
      root().insertAdjacentHTML("beforeend", banner(`login failed: ${error}`));
    }
  });
}

export function render(): void {
  const hash = location.hash || "#/search";
  if (hash.startsWith("#/study/")) void showStudy(hash.slice("#/study/".length));
  else if (hash.startsWith("#/claim/")) void showClaim(hash.slice("#/claim/".length));
  else if (hash.startsWith("#/slmd/")) void showSlmd(hash.split("?")[0].slice("#/slmd/".length));
  else if (hash.startsWith("#/login")) void showLogin(hash);
  else void showSearch(hash);
}

window.addEventListener("hashchange", render);
window.addEventListener("DOMContentLoaded", render);
