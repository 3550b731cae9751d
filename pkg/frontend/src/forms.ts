// Claim and SLMD form rendering. Server errors surface inline next to the
// field they name; the submit button stays disabled while a request is in
// flight so a double click cannot double-submit.

import { StudyRecord } from "./api";
import { esc } from "./html";
import { FieldErrors, FormField, FormValues, SLMD_FIELDS } from "./slmd";
import { stateBadge } from "./views";

export function renderClaimPage(guid: string, state: string, error?: string): string {
  return `
    <article class="claim-page" data-guid="${esc(guid)}">
      <a href="#/study/${esc(guid)}">&laquo; study</a>
      <h2>Claim ${esc(guid)}</h2>
      <p>Current state: <span id="claim-state">${stateBadge(state)}</span></p>
      <form id="claim-form">
        <label>Claim token
          <input id="claim-token" type="password" autocomplete="off" required />
        </label>
        ${error ? `<p class="error" id="claim-error">${esc(error)}</p>` : ""}
        <button type="submit" id="claim-submit">Claim study</button>
      </form>
    </article>`;
}

export function claimSucceededMarkup(study: StudyRecord): string {
  // swapped into #claim-state without a page reload
  return stateBadge(study.state);
}

function renderField(field: FormField, values: FormValues, errors: FieldErrors): string {
  const value = values[field.path];
  const error = errors[field.path];
  const id = `f-${field.path.replaceAll(".", "-")}`;
  let control: string;
  switch (field.kind) {
    case "select": {
      const options = ["", ...field.options!]
        .map((opt) => `<option value="${esc(opt)}"${opt === value ? " selected" : ""}>
            ${esc(opt || "choose...")}</option>`)
        .join("");
      control = `<select id="${id}" data-path="${esc(field.path)}">${options}</select>`;
      break;
    }
    case "checkbox":
      control = `<input id="${id}" data-path="${esc(field.path)}" type="checkbox"
                        ${value === true ? "checked" : ""} />`;
      break;
    case "textarea":
    case "list":
      control = `<textarea id="${id}" data-path="${esc(field.path)}" rows="3">${esc(
        typeof value === "string" ? value : "")}</textarea>`;
      break;
    default:
      control = `<input id="${id}" data-path="${esc(field.path)}" type="text"
                        value="${esc(typeof value === "string" ? value : "")}" />`;
  }
  return `
    <div class="form-field${error ? " has-error" : ""}" data-field="${esc(field.path)}">
      <label for="${id}">${esc(field.label)}${field.required ? " *" : ""}</label>
      ${control}
      ${error ? `<p class="error field-error">${esc(error)}</p>` : ""}
    </div>`;
}

export function renderSlmdForm(
  guid: string,
  values: FormValues,
  errors: FieldErrors,
  general: string[] = [],
  submitting = false,
): string {
  const sections = new Map<string, string[]>();
  for (const field of SLMD_FIELDS) {
    const rendered = renderField(field, values, errors);
    sections.set(field.section, [...(sections.get(field.section) ?? []), rendered]);
  }
  const body = [...sections.entries()]
    .map(([name, fields]) => `<fieldset><legend>${esc(name)}</legend>${fields.join("")}</fieldset>`)
    .join("");
  const banner = general.length
    ? `<div class="error banner">${general.map(esc).join("<br/>")}</div>`
    : "";
  return `
    <article class="slmd-page" data-guid="${esc(guid)}">
      <a href="#/study/${esc(guid)}">&laquo; study</a>
      <h2>Study-level metadata for ${esc(guid)}</h2>
      ${banner}
      <form id="slmd-form">
        ${body}
        <button type="submit" id="slmd-submit" ${submitting ? "disabled" : ""}>
          ${submitting ? "Submitting..." : "Submit"}</button>
      </form>
    </article>`;
}
